//! Homogeneous Littlewood–Paley decomposition on the periodic grid and
//! Besov norms `Ḃ^s_{2,1}` restricted to frequency regimes.
//!
//! The annulus profile is `φ(ξ) = χ(ξ/2) − χ(ξ)` where the radial low-pass
//! `χ` equals 1 on `|ξ| ≤ 3/4`, vanishes on `|ξ| ≥ 4/3`, and interpolates
//! with the C^∞ smoothstep built from `θ(t) = exp(−1/t)`. Hence
//! `supp φ ⊂ {3/4 ≤ |ξ| ≤ 8/3}` and the dyadic sum telescopes to 1.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField, VectorField};

pub const ANNULUS_INNER: f64 = 3.0 / 4.0;
pub const ANNULUS_OUTER: f64 = 8.0 / 3.0;
const LOW_PASS_EDGE: f64 = 4.0 / 3.0;

/// Default low/high cutoff in the nondimensional frame.
pub const UNIT_HF_THRESHOLD: f64 = 0.5;

fn theta(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
pub fn smooth_step(t: f64) -> f64 {
    let a = theta(t);
    let b = theta(1.0 - t);
    a / (a + b)
}

/// Radial low-pass χ(r).
pub fn low_pass(r: f64) -> f64 {
    if r <= ANNULUS_INNER {
        1.0
    } else if r >= LOW_PASS_EDGE {
        0.0
    } else {
        smooth_step((LOW_PASS_EDGE - r) / (LOW_PASS_EDGE - ANNULUS_INNER))
    }
}

/// Annulus profile φ(r) = χ(r/2) − χ(r).
pub fn annulus(r: f64) -> f64 {
    low_pass(0.5 * r) - low_pass(r)
}

/// Frequency regime over which a Besov sum runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// every resolved block
    Full,
    /// `2^j ≤ hf_threshold`
    Low,
    /// `2^j > hf_threshold`
    High,
    /// low blocks with `2^j ≤ eps_threshold`
    VeryLow,
    /// low blocks with `2^j > eps_threshold`
    Medium,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::Full,
        Regime::Low,
        Regime::High,
        Regime::VeryLow,
        Regime::Medium,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Regime::Full => "full",
            Regime::Low => "l",
            Regime::High => "h",
            Regime::VeryLow => "l-",
            Regime::Medium => "l+",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Resolved block range and regime thresholds for one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicPartition {
    pub j_min: i32,
    pub j_max: i32,
    /// physical frequency separating very-low from medium blocks
    pub eps_threshold: f64,
    /// physical frequency separating low from high blocks
    pub hf_threshold: f64,
}

/// Partition in the nondimensional frame: very-low below ε, high above 1/2.
pub fn build_partition(grid: &Grid, eps: f64) -> Result<DyadicPartition> {
    DyadicPartition::with_thresholds(grid, eps, UNIT_HF_THRESHOLD)
}

impl DyadicPartition {
    pub fn with_thresholds(grid: &Grid, eps_threshold: f64, hf_threshold: f64) -> Result<Self> {
        if !(eps_threshold > 0.0 && eps_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "regime threshold ε must be positive (got {eps_threshold})"
            )));
        }
        if !(hf_threshold > 0.0 && hf_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "high-frequency threshold must be positive (got {hf_threshold})"
            )));
        }
        // smallest nonzero |ξ| must sit where χ(2^{-j_min}·) has already reached 0
        let j_min = (grid.fundamental() / LOW_PASS_EDGE).log2().floor() as i32;
        // largest |ξ| must sit where χ(2^{-j_max-1}·) is still 1
        let j_max = (grid.max_wavenumber() / ANNULUS_INNER).log2().ceil() as i32 - 1;
        if j_max - j_min + 1 < 4 {
            return Err(Error::Config(format!(
                "grid resolves only blocks {j_min}..={j_max}; at least 4 are required"
            )));
        }
        Ok(Self {
            j_min,
            j_max,
            eps_threshold,
            hf_threshold,
        })
    }

    /// Thresholds for the physical frames (1) and (3): the nondimensional
    /// cutoffs ε and 1/2 scaled by ε⁻¹.
    pub fn for_physical_frame(grid: &Grid, eps: f64) -> Result<Self> {
        Self::with_thresholds(grid, 1.0, UNIT_HF_THRESHOLD / eps)
    }

    pub fn block_count(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn blocks(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    pub fn weight(&self, j: i32, r: f64) -> f64 {
        annulus(r * 2f64.powi(-j))
    }

    /// Blocks that may be nonzero at radius r (a superset, clipped to range).
    fn candidate_blocks(&self, r: f64) -> std::ops::RangeInclusive<i32> {
        if r == 0.0 {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        let lo = ((r / ANNULUS_OUTER).log2().floor() as i32).max(self.j_min);
        let hi = ((r / ANNULUS_INNER).log2().ceil() as i32).min(self.j_max);
        lo..=hi
    }

    pub fn contains(&self, j: i32, regime: Regime) -> bool {
        let scale = 2f64.powi(j);
        let low = scale <= self.hf_threshold;
        match regime {
            Regime::Full => true,
            Regime::Low => low,
            Regime::High => !low,
            Regime::VeryLow => low && scale <= self.eps_threshold,
            Regime::Medium => low && scale > self.eps_threshold,
        }
    }

    /// Σ_j φ(2^{−j}r) over the resolved range.
    pub fn partition_sum(&self, r: f64) -> f64 {
        self.blocks().map(|j| self.weight(j, r)).sum()
    }

    fn check_block(&self, j: i32) -> Result<()> {
        if j < self.j_min || j > self.j_max {
            return Err(Error::Range(format!(
                "block {j} outside resolved range [{}, {}]",
                self.j_min, self.j_max
            )));
        }
        Ok(())
    }

    /// Σ_{j ∈ J(regime)} 2^{js} b_j for precomputed block norms.
    pub fn besov_from_blocks(&self, blocks: &BlockNorms, s: f64, regime: Regime) -> f64 {
        blocks
            .iter()
            .filter(|(j, _)| self.contains(*j, regime))
            .fold(0.0, |acc, (j, b)| acc + 2f64.powf(j as f64 * s) * b)
    }
}

/// Δ̇_j u: multiply coefficients by φ(2^{−j}|ξ|).
pub fn dyadic_block(u: &SpectralField, j: i32, p: &DyadicPartition) -> Result<SpectralField> {
    p.check_block(j)?;
    let grid = u.grid();
    Ok(u.map_modes(|idx| Complex64::new(p.weight(j, grid.wavenumber_norm(idx)), 0.0)))
}

/// L² norms of every resolved dyadic block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockNorms {
    pub j_min: i32,
    pub values: Vec<f64>,
}

impl BlockNorms {
    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &b)| (self.j_min + i as i32, b))
    }

    pub fn get(&self, j: i32) -> f64 {
        self.values[(j - self.j_min) as usize]
    }
}

fn block_energy(fields: &[&SpectralField], p: &DyadicPartition) -> Vec<f64> {
    let mut energy = vec![0.0; p.block_count()];
    let grid = fields[0].grid();
    for idx in 0..grid.len() {
        let amp: f64 = fields.iter().map(|f| f.coeffs()[idx].norm_sqr()).sum();
        if amp == 0.0 {
            continue;
        }
        let r = grid.wavenumber_norm(idx);
        for j in p.candidate_blocks(r) {
            let w = p.weight(j, r);
            if w != 0.0 {
                energy[(j - p.j_min) as usize] += w * w * amp;
            }
        }
    }
    let vol = grid.volume();
    energy.iter().map(|e| (vol * e).sqrt()).collect()
}

pub fn block_norms(u: &SpectralField, p: &DyadicPartition) -> BlockNorms {
    BlockNorms {
        j_min: p.j_min,
        values: block_energy(&[u], p),
    }
}

/// Block norms of a vector field, `‖Δ̇_j v‖ = (Σ_i ‖Δ̇_j v_i‖²)^{1/2}`.
pub fn block_norms_vector(v: &VectorField, p: &DyadicPartition) -> BlockNorms {
    let refs: Vec<&SpectralField> = v.components.iter().collect();
    BlockNorms {
        j_min: p.j_min,
        values: block_energy(&refs, p),
    }
}

/// Σ_{j∈J(regime)} 2^{js} ‖Δ̇_j u‖_{L²}.
pub fn besov_norm(u: &SpectralField, s: f64, regime: Regime, p: &DyadicPartition) -> f64 {
    p.besov_from_blocks(&block_norms(u, p), s, regime)
}

pub fn besov_norm_vector(v: &VectorField, s: f64, regime: Regime, p: &DyadicPartition) -> f64 {
    p.besov_from_blocks(&block_norms_vector(v, p), s, regime)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeNorm {
    pub s: f64,
    pub regime: Regime,
    pub value: f64,
}

/// Norms of one field for several regularity indices and every regime.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeNormReport {
    pub j_min: i32,
    pub j_max: i32,
    pub entries: Vec<RegimeNorm>,
}

impl RegimeNormReport {
    pub fn from_blocks(blocks: &BlockNorms, s_values: &[f64], p: &DyadicPartition) -> Self {
        let entries = s_values
            .iter()
            .flat_map(|&s| {
                Regime::ALL.iter().map(move |&regime| RegimeNorm {
                    s,
                    regime,
                    value: p.besov_from_blocks(blocks, s, regime),
                })
            })
            .collect();
        Self {
            j_min: p.j_min,
            j_max: p.j_max,
            entries,
        }
    }

    pub fn get(&self, s: f64, regime: Regime) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.s == s && e.regime == regime)
            .map(|e| e.value)
    }
}

pub fn regime_report(u: &SpectralField, s_values: &[f64], p: &DyadicPartition) -> RegimeNormReport {
    RegimeNormReport::from_blocks(&block_norms(u, p), s_values, p)
}

pub const NORM_CSV_HEADER: [&str; 6] = ["time", "s", "regime", "value", "j_min", "j_max"];

/// Append report rows in the `time,s,regime,value,j_min,j_max` layout.
pub fn write_norm_rows<W: Write>(
    writer: &mut csv::Writer<W>,
    time: f64,
    report: &RegimeNormReport,
) -> Result<()> {
    for e in &report.entries {
        writer.write_record([
            time.to_string(),
            e.s.to_string(),
            e.regime.label().to_string(),
            e.value.to_string(),
            report.j_min.to_string(),
            report.j_max.to_string(),
        ])?;
    }
    Ok(())
}
