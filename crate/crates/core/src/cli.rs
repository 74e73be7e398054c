//! Command-line front end: configuration, run orchestration and artifacts.
//!
//! Configuration is TOML (or JSON when the file ends in `.json`). Unknown keys
//! are rejected. `--set key=value` overrides accept dotted keys and TOML
//! literals. Every run writes `summary.json` plus command-specific CSV and
//! two-column `.dat` files with a gnuplot stub.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler_poisson::{damped_mode, EulerPoissonSolver, FlowState, Frame};
use crate::keller_segel::{KSState, KellerSegelSolver};
use crate::limit_harness::{
    damped_mode_decay_study, ep_ks_convergence_study, frame_consistency_study, EpsilonLadder,
    InitialData, StudyReport,
};
use crate::linear_analysis::{certify_low_frequency_decay, default_sweep};
use crate::littlewood_paley::{
    besov_norm, besov_norm_vector, block_norms, regime_report, write_norm_rows, DyadicPartition,
    Regime, NORM_CSV_HEADER,
};
use crate::model::ModelParams;
use crate::spectral::snapshot::{write_snapshot, Representation};
use crate::spectral::{Grid, SpectralField};

/// Largest total number of grid points accepted from a configuration.
pub const MAX_GRID_POINTS: usize = 1 << 22;
/// Accepted slope range for the rate studies.
pub const SLOPE_RANGE: (f64, f64) = (0.8, 1.2);
/// Accepted relative error for the frame-consistency study.
pub const FRAME_TOLERANCE: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(
    name = "relaxlab",
    version,
    about = "Relaxation-limit laboratory for damped Euler-Poisson"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set init.amplitude=0.02`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed (overrides `init.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps and ladders.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Certify the low-frequency decay bound of the linearised system.
    LinearVerify,
    /// Regime Besov norms of the configured initial data.
    Besov,
    /// Run the Euler-Poisson or Keller-Segel solver.
    Simulate,
    /// Run an epsilon-ladder study.
    LimitStudy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::LinearVerify => "linear-verify",
            Command::Besov => "besov",
            Command::Simulate => "simulate",
            Command::LimitStudy => "limit-study",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Ep,
    Ks,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    DampedMode,
    EpKs,
    FrameConsistency,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKey {
    Original,
    Rescaled,
}

impl From<FrameKey> for Frame {
    fn from(f: FrameKey) -> Self {
        match f {
            FrameKey::Original => Frame::Original,
            FrameKey::Rescaled => Frame::Rescaled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKindKey {
    Gaussian,
    SingleMode,
    RandomBand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub kind: InitKindKey,
    pub amplitude: f64,
    pub seed: u64,
    /// Gaussian standard deviation.
    pub width: f64,
    /// Integer wavevector of `single_mode`.
    pub k: Vec<i64>,
    /// Integer wavenumber band of `random_band`.
    pub k_min: f64,
    pub k_max: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            kind: InitKindKey::Gaussian,
            amplitude: 0.01,
            seed: 1,
            width: 2.0,
            k: vec![1],
            k_min: 1.0,
            k_max: 8.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub norm_stride: usize,
    /// 0 disables periodic snapshots.
    pub snapshot_stride: usize,
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            norm_stride: 10,
            snapshot_stride: 0,
            dir: PathBuf::from("relaxlab-out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    pub epsilons: Vec<f64>,
    pub horizon: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            epsilons: EpsilonLadder::default_epsilons(),
            horizon: 5.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BesovConfig {
    /// Regularity indices; empty means `{d/2 − 1, d/2, d/2 + 1}`.
    pub s: Vec<f64>,
}

/// Fully validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub gamma: f64,
    pub rho_bar: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub model: Model,
    pub frame: FrameKey,
    pub study: Study,
    pub log_level: String,
    pub init: InitConfig,
    pub output: OutputConfig,
    pub ladder: LadderConfig,
    pub besov: BesovConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 2,
            n: 128,
            length: 16.0 * std::f64::consts::PI,
            a: 1.0,
            gamma: 2.0,
            rho_bar: 1.0,
            epsilon: 0.1,
            dt: 0.01,
            t_final: 1.0,
            model: Model::Ep,
            frame: FrameKey::Rescaled,
            study: Study::EpKs,
            log_level: "info".into(),
            init: InitConfig::default(),
            output: OutputConfig::default(),
            ladder: LadderConfig::default(),
            besov: BesovConfig::default(),
        }
    }
}

fn key_error(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigKey {
        key: key.into(),
        message: message.into(),
    }
}

impl RunConfig {
    /// Checks every key against its module's preconditions.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(key_error(
                "d",
                format!("d must be 1, 2 or 3 (got {})", self.d),
            ));
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(key_error(
                "n",
                format!("n must be a power of two >= 8 (got {})", self.n),
            ));
        }
        if self
            .n
            .checked_pow(self.d as u32)
            .is_none_or(|t| t > MAX_GRID_POINTS)
        {
            return Err(key_error(
                "n",
                format!("n^d must not exceed {MAX_GRID_POINTS}"),
            ));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(key_error(
                "L",
                format!("L must be > 0 (got {})", self.length),
            ));
        }
        self.params()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(key_error("dt", format!("dt must be > 0 (got {})", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(key_error(
                "t_final",
                format!("t_final must be >= 0 (got {})", self.t_final),
            ));
        }
        if (self.t_final / self.dt) > 1e8 {
            return Err(key_error("dt", "t_final/dt exceeds 1e8 steps"));
        }
        let level = self.log_level.to_ascii_lowercase();
        if !["off", "error", "warn", "info", "debug", "trace"].contains(&level.as_str()) {
            return Err(key_error(
                "log_level",
                format!("unknown log level `{}`", self.log_level),
            ));
        }
        let init = &self.init;
        if !(init.amplitude >= 0.0 && init.amplitude.is_finite()) {
            return Err(key_error(
                "init.amplitude",
                "amplitude must be finite and >= 0",
            ));
        }
        if !(init.width > 0.0 && init.width.is_finite()) {
            return Err(key_error("init.width", "width must be finite and > 0"));
        }
        if init.kind == InitKindKey::SingleMode
            && (init.k.is_empty() || init.k.len() > self.d || init.k.iter().all(|&k| k == 0))
        {
            return Err(key_error(
                "init.k",
                "single_mode needs 1..=d components, not all zero",
            ));
        }
        if init.kind == InitKindKey::SingleMode
            && init
                .k
                .iter()
                .any(|&k| k.unsigned_abs() as usize > self.n / 3)
        {
            return Err(key_error("init.k", "mode lies outside the dealiased band"));
        }
        if !(init.k_min >= 0.0 && init.k_max >= init.k_min && init.k_max.is_finite()) {
            return Err(key_error("init.k_max", "band needs 0 <= k_min <= k_max"));
        }
        if self.output.norm_stride == 0 {
            return Err(key_error("output.norm_stride", "norm_stride must be >= 1"));
        }
        if !(self.ladder.horizon > 0.0 && self.ladder.horizon.is_finite()) {
            return Err(key_error("ladder.horizon", "horizon must be > 0"));
        }
        for (i, s) in self.besov.s.iter().enumerate() {
            if !s.is_finite() {
                return Err(key_error(&format!("besov.s[{i}]"), "index must be finite"));
            }
        }
        self.grid()?;
        self.ladder(self.grid()?)?;
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.a, self.gamma, self.rho_bar, self.epsilon)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.d, self.n, self.length).map_err(|e| key_error("n", e.to_string()))
    }

    pub fn initial_data(&self) -> InitialData {
        let i = &self.init;
        match i.kind {
            InitKindKey::Gaussian => InitialData::gaussian(i.amplitude, i.width),
            InitKindKey::SingleMode => {
                let mut k = [0i64; 3];
                for (a, v) in i.k.iter().take(3).enumerate() {
                    k[a] = *v;
                }
                InitialData::single_mode(i.amplitude, k)
            }
            InitKindKey::RandomBand => {
                InitialData::random_band(i.amplitude, i.k_min, i.k_max, i.seed)
            }
        }
    }

    pub fn ladder(&self, grid: Grid) -> Result<EpsilonLadder> {
        EpsilonLadder::new(
            self.ladder.epsilons.clone(),
            self.params()?,
            grid,
            self.initial_data(),
            self.ladder.horizon,
        )
    }

    fn s_values(&self) -> Vec<f64> {
        if self.besov.s.is_empty() {
            let h = self.d as f64 / 2.0;
            vec![h - 1.0, h, h + 1.0]
        } else {
            self.besov.s.clone()
        }
    }
}

/// Syntax of a configuration text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

impl ConfigFormat {
    pub fn of_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ConfigFormat::Json,
            _ => ConfigFormat::Toml,
        }
    }
}

/// Parses, applies `overrides` (`key=value`) and validates.
pub fn parse_config(text: &str, format: ConfigFormat, overrides: &[String]) -> Result<RunConfig> {
    let config: RunConfig = if overrides.is_empty() {
        // direct parse keeps line information for unknown keys
        match format {
            ConfigFormat::Toml => toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?,
            ConfigFormat::Json => {
                serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
            }
        }
    } else {
        let mut table: toml::Table = match format {
            ConfigFormat::Toml => toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?,
            ConfigFormat::Json => {
                let json: serde_json::Value =
                    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
                toml::Table::try_from(json).map_err(|e| Error::Config(e.to_string()))?
            }
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        RunConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| Error::Config(e.to_string()))?
    };
    config.validate()?;
    Ok(config)
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not of the form key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let value = parse_literal(raw.trim());
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{key}`: `{p}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_literal(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&probe) {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Reads `path` (or starts from defaults) and applies the CLI overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let (text, format) = match &cli.config {
        Some(p) => (
            fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            ConfigFormat::of_path(p),
        ),
        None => (String::new(), ConfigFormat::Toml),
    };
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("init.seed={seed}"));
    }
    if let Some(out) = &cli.out {
        let escaped = toml::Value::String(out.display().to_string()).to_string();
        overrides.push(format!("output.dir={escaped}"));
    }
    parse_config(&text, format, &overrides)
}

/// Machine-readable outcome written to `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub violations: usize,
    pub pass: bool,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Summary plus process exit status.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub summary: Summary,
    pub exit_code: i32,
}

/// Runs `command` and writes its artifacts under `config.output.dir`.
pub fn run(command: Command, config: &RunConfig) -> Result<Outcome> {
    let start = Instant::now();
    let out = &config.output.dir;
    fs::create_dir_all(out)?;
    let echo = toml::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    info!("effective configuration:\n{echo}");
    fs::write(out.join("config.effective.toml"), &echo)?;
    let mut summary = Summary {
        command: command.name(),
        slope: None,
        residual: None,
        violations: 0,
        pass: false,
        wall_time_s: 0.0,
        error: None,
    };
    let result = match command {
        Command::LinearVerify => linear_verify(config, out, &mut summary),
        Command::Besov => besov(config, out, &mut summary),
        Command::Simulate => simulate(config, out, &mut summary),
        Command::LimitStudy => limit_study(config, out, &mut summary),
    };
    let exit_code = match &result {
        Ok(()) if summary.pass => 0,
        Ok(()) => 4,
        Err(e) => {
            summary.error = Some(e.to_string());
            summary.pass = false;
            e.exit_code()
        }
    };
    summary.wall_time_s = start.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join("summary.json"), json + "\n")?;
    match result {
        Err(e) if e.exit_code() != 3 => Err(e),
        _ => Ok(Outcome { summary, exit_code }),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

/// Two-column plot data and a gnuplot stub rendering it.
fn write_plot(
    out: &Path,
    name: &str,
    columns: (&str, &str),
    rows: &[(f64, f64)],
    log: bool,
) -> Result<()> {
    let mut dat = BufWriter::new(File::create(out.join(format!("{name}.dat")))?);
    writeln!(dat, "# {} {}", columns.0, columns.1)?;
    for (x, y) in rows {
        writeln!(dat, "{x} {y}")?;
    }
    dat.flush()?;
    let scale = if log { "set logscale xy\n" } else { "" };
    let script = format!(
        "set xlabel '{}'\nset ylabel '{}'\n{scale}plot '{name}.dat' using 1:2 with linespoints title '{name}'\n",
        columns.0, columns.1
    );
    fs::write(out.join(format!("{name}.gp")), script)?;
    Ok(())
}

fn linear_verify(config: &RunConfig, out: &Path, summary: &mut Summary) -> Result<()> {
    let report = certify_low_frequency_decay(&default_sweep(), config.d)?;
    report.write_csv(BufWriter::new(File::create(out.join("certification.csv"))?))?;
    // worst measured/bound ratio per |ξ|
    let mut worst: Vec<(f64, f64)> = report
        .rows
        .iter()
        .map(|row| {
            (
                row.xi_norm,
                if row.bound > 0.0 {
                    row.measured / row.bound
                } else {
                    0.0
                },
            )
        })
        .collect();
    worst.sort_by(|a, b| a.0.total_cmp(&b.0));
    worst.dedup_by(|b, a| {
        let same = a.0 == b.0;
        if same {
            a.1 = a.1.max(b.1);
        }
        same
    });
    write_plot(
        out,
        "certification",
        ("xi_norm", "max_measured_over_bound"),
        &worst,
        false,
    )?;
    summary.violations = report.violations();
    summary.pass = report.passed();
    if !summary.pass {
        warn!("{} certification violations", summary.violations);
    }
    Ok(())
}

fn besov(config: &RunConfig, out: &Path, summary: &mut Summary) -> Result<()> {
    let grid = config.grid()?;
    let part = DyadicPartition::for_physical_frame(&grid, config.epsilon)?;
    let (rho, _) = config.initial_data().fields(&grid)?;
    let report = regime_report(&rho, &config.s_values(), &part);
    let mut w = csv_writer(&out.join("norms.csv"))?;
    w.write_record(NORM_CSV_HEADER)?;
    write_norm_rows(&mut w, 0.0, &report)?;
    w.flush()?;
    let blocks: Vec<(f64, f64)> = block_norms(&rho, &part)
        .iter()
        .map(|(j, b)| (j as f64, b))
        .collect();
    write_plot(out, "blocks", ("j", "block_l2_norm"), &blocks, false)?;
    summary.pass = true;
    Ok(())
}

/// Column labels `norm_s<s>_<regime>`.
fn norm_columns(s_values: &[f64]) -> Vec<(f64, Regime, String)> {
    let mut cols = Vec::new();
    for &s in s_values {
        for regime in [Regime::Low, Regime::High] {
            cols.push((s, regime, format!("norm_s{s}_{}", regime.label())));
        }
    }
    cols
}

enum SimState {
    Flow(EulerPoissonSolver, FlowState),
    Ks(KellerSegelSolver, KSState),
}

impl SimState {
    fn time(&self) -> f64 {
        match self {
            SimState::Flow(_, s) => s.time,
            SimState::Ks(_, s) => s.time,
        }
    }

    fn density(&self) -> &SpectralField {
        match self {
            SimState::Flow(_, s) => &s.rho,
            SimState::Ks(_, s) => &s.n,
        }
    }

    fn step(&mut self, dt: f64) -> Result<()> {
        match self {
            SimState::Flow(solver, s) => *s = solver.step(s, dt)?,
            SimState::Ks(solver, s) => *s = solver.step(s, dt)?,
        }
        Ok(())
    }

    fn snapshot(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        match self {
            SimState::Flow(_, s) => {
                let mut fields = vec![&s.rho];
                fields.extend(s.v.components.iter());
                write_snapshot(file, s.time, Representation::Spectral, &fields)
            }
            SimState::Ks(_, s) => write_snapshot(file, s.time, Representation::Spectral, &[&s.n]),
        }
    }
}

fn simulate(config: &RunConfig, out: &Path, summary: &mut Summary) -> Result<()> {
    let grid = config.grid()?;
    let params = config.params()?;
    let part = DyadicPartition::for_physical_frame(&grid, params.epsilon)?;
    let init = config.initial_data();
    let frame: Frame = config.frame.into();
    let mut sim = match config.model {
        Model::Ep => SimState::Flow(
            EulerPoissonSolver::new(&grid, &params, frame)?,
            init.flow_state(&grid, frame, params.epsilon)?,
        ),
        Model::Ks => SimState::Ks(
            KellerSegelSolver::new(&grid, &params)?,
            init.ks_state(&grid)?,
        ),
    };
    let s_values = config.s_values();
    let cols = norm_columns(&s_values);
    let s_half = config.d as f64 / 2.0;
    let mut w = csv_writer(&out.join("timeseries.csv"))?;
    let mut header = vec!["time".to_string()];
    header.extend(cols.iter().map(|c| c.2.clone()));
    header.extend([
        format!("damped_mode_s{s_half}"),
        "min_density".into(),
        "cfl".into(),
    ]);
    w.write_record(&header)?;
    let mut plot = Vec::new();
    let mut record = |sim: &SimState, dt: f64, w: &mut csv::Writer<_>| -> Result<()> {
        let rho = sim.density();
        let mut row = vec![sim.time().to_string()];
        row.extend(
            cols.iter()
                .map(|(s, r, _)| besov_norm(rho, *s, *r, &part).to_string()),
        );
        match sim {
            SimState::Flow(_, s) => {
                let wm = damped_mode(s, &params)?;
                row.push(besov_norm_vector(&wm, s_half, Regime::Full, &part).to_string());
                row.push(s.min_density(&params).to_string());
                row.push((dt * s.v.max_speed() / grid.spacing()).to_string());
            }
            SimState::Ks(_, s) => {
                row.extend([
                    String::new(),
                    s.min_density(&params).to_string(),
                    String::new(),
                ]);
            }
        }
        plot.push((
            sim.time(),
            besov_norm(rho, s_half - 1.0, Regime::Full, &part),
        ));
        w.write_record(&row)?;
        Ok(())
    };
    let steps = (config.t_final / config.dt - 1e-9).ceil().max(0.0) as usize;
    let mut failure = None;
    let mut k = 0;
    while k <= steps {
        let h = if k == 0 {
            config.dt
        } else {
            config.dt.min(config.t_final - sim.time())
        };
        let outcome = (|| {
            if k > 0 {
                sim.step(h)?;
            }
            if k % config.output.norm_stride == 0 || k == steps {
                record(&sim, h, &mut w)?;
            }
            if k > 0 && config.output.snapshot_stride > 0 && k % config.output.snapshot_stride == 0
            {
                sim.snapshot(&out.join(format!("snapshot_{k:06}.rlxf")))?;
            }
            Ok::<(), Error>(())
        })();
        if let Err(e) = outcome {
            warn!("run aborted at t = {}: {e}", sim.time());
            if e.is_numerical() {
                // last state that passed the step
                sim.snapshot(&out.join("blowup_snapshot.rlxf"))?;
            }
            failure = Some(e);
            break;
        }
        k += 1;
    }
    w.flush()?;
    write_plot(
        out,
        "norm_low",
        ("time", &format!("besov_s{}", s_half - 1.0)),
        &plot,
        false,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    summary.pass = true;
    Ok(())
}

fn write_study_rows<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn limit_study(config: &RunConfig, out: &Path, summary: &mut Summary) -> Result<()> {
    let ladder = config.ladder(config.grid()?)?;
    let (lo, hi) = SLOPE_RANGE;
    fn finish<R>(
        report: &StudyReport<R>,
        summary: &mut Summary,
        lo: f64,
        hi: f64,
    ) -> Option<String> {
        summary.slope = report.fit.as_ref().map(|f| f.slope);
        summary.residual = report.fit.as_ref().map(|f| f.max_residual);
        summary.pass = report.complete() && report.passes(lo, hi);
        for flag in &report.flags {
            warn!("{flag}");
        }
        for (a, b) in &report.monotonicity_violations {
            warn!("error increases from eps = {a} to eps = {b}");
        }
        report
            .flags
            .iter()
            .find(|f| f.starts_with("run aborted"))
            .cloned()
    }
    let aborted = match config.study {
        Study::DampedMode => {
            let r = damped_mode_decay_study(&ladder);
            write_study_rows(&out.join("study_damped_mode.csv"), &flatten_damped(&r))?;
            let pts: Vec<_> = r
                .rows
                .iter()
                .map(|row| (row.epsilon, row.integral))
                .collect();
            write_plot(out, "damped_mode", ("epsilon", "integral_w"), &pts, true)?;
            println!("{}", r.summary_line(lo, hi));
            finish(&r, summary, lo, hi)
        }
        Study::EpKs => {
            let r = ep_ks_convergence_study(&ladder);
            write_study_rows(&out.join("study_ep_ks.csv"), &flatten_convergence(&r))?;
            let pts: Vec<_> = r
                .rows
                .iter()
                .map(|row| (row.epsilon, row.sup_norm))
                .collect();
            write_plot(out, "ep_ks", ("epsilon", "sup_difference"), &pts, true)?;
            println!("{}", r.summary_line(lo, hi));
            finish(&r, summary, lo, hi)
        }
        Study::FrameConsistency => {
            let r = frame_consistency_study(&ladder);
            write_study_rows(&out.join("study_frame_consistency.csv"), &r.rows)?;
            let worst = r
                .rows
                .iter()
                .map(|row| row.relative_error)
                .fold(0.0f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
            summary.residual = Some(worst);
            summary.violations = r
                .rows
                .iter()
                .filter(|row| !(row.relative_error <= FRAME_TOLERANCE))
                .count();
            summary.pass = r.complete() && summary.violations == 0;
            println!("slope=NaN residual={worst} pass={}", summary.pass);
            r.flags.first().cloned()
        }
    };
    match aborted {
        Some(msg) => Err(Error::BlowUp {
            time: f64::NAN,
            detail: msg,
        }),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct DampedCsvRow {
    epsilon: f64,
    integral: f64,
    integral_half_stride: f64,
    horizon: f64,
    tail_ratio: Option<f64>,
    samples: usize,
    residual: Option<f64>,
    error: Option<String>,
}

fn flatten_damped(r: &StudyReport<crate::limit_harness::DampedModeRow>) -> Vec<DampedCsvRow> {
    let mut res = r
        .fit
        .as_ref()
        .map(|f| f.residuals.iter())
        .into_iter()
        .flatten();
    r.rows
        .iter()
        .map(|row| DampedCsvRow {
            epsilon: row.epsilon,
            integral: row.integral,
            integral_half_stride: row.integral_half_stride,
            horizon: row.horizon,
            tail_ratio: row.tail_ratio,
            samples: row.samples,
            residual: if row.error.is_none() && row.integral > 0.0 {
                res.next().copied()
            } else {
                None
            },
            error: row.error.clone(),
        })
        .collect()
}

#[derive(Serialize)]
struct ConvergenceCsvRow {
    epsilon: f64,
    sup_norm: f64,
    high_integral: f64,
    low_integral: f64,
    quadrature_check: f64,
    empty_regimes: String,
    horizon: f64,
    tail_ratio: Option<f64>,
    samples: usize,
    residual: Option<f64>,
    error: Option<String>,
}

fn flatten_convergence(r: &crate::limit_harness::ConvergenceReport) -> Vec<ConvergenceCsvRow> {
    let mut res = r
        .fit
        .as_ref()
        .map(|f| f.residuals.iter())
        .into_iter()
        .flatten();
    r.rows
        .iter()
        .map(|row| ConvergenceCsvRow {
            epsilon: row.epsilon,
            sup_norm: row.sup_norm,
            high_integral: row.high_integral,
            low_integral: row.low_integral,
            quadrature_check: row.quadrature_check,
            empty_regimes: row.empty_regimes.join(" "),
            horizon: row.horizon,
            tail_ratio: row.tail_ratio,
            samples: row.samples,
            residual: if row.error.is_none() && row.sup_norm > 0.0 {
                res.next().copied()
            } else {
                None
            },
            error: row.error.clone(),
        })
        .collect()
}

/// Entry point shared by the binary and tests; returns the exit status.
pub fn main_with(cli: Cli) -> i32 {
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&config.log_level)
        .parse_env("RUST_LOG")
        .try_init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            warn!("thread pool already initialised: {e}");
        }
    }
    match run(cli.command, &config) {
        Ok(outcome) => {
            if outcome.exit_code != 0 {
                if let Some(e) = &outcome.summary.error {
                    eprintln!("error: {e}");
                }
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_and_strings() {
        assert_eq!(parse_literal("0.5"), toml::Value::Float(0.5));
        assert_eq!(
            parse_literal("[0.2, 0.1]").as_array().map(|a| a.len()),
            Some(2)
        );
        assert_eq!(parse_literal("ks"), toml::Value::String("ks".into()));
    }

    #[test]
    fn dotted_override_creates_tables() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "init.amplitude=0.2").unwrap();
        assert_eq!(t["init"]["amplitude"].as_float(), Some(0.2));
        assert!(apply_override(&mut t, "init.amplitude.x=1").is_err());
        assert!(apply_override(&mut t, "novalue").is_err());
    }
}
