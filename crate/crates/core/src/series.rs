//! Scalar time series with trapezoid quadrature, used for L^∞-in-time and
//! L¹-in-time norms.

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len());
        Self { times, values }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.times.push(t);
        self.values.push(v);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// ∫ v dt by the trapezoid rule over the whole series.
    pub fn integral(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .fold(0.0, |acc, (t, v)| acc + 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
    }

    /// Running sup over [t_0, t_k] for every k.
    pub fn running_sup(&self) -> Vec<f64> {
        let mut acc = 0.0f64;
        self.values
            .iter()
            .map(|&v| {
                acc = acc.max(v);
                acc
            })
            .collect()
    }

    /// Running trapezoid integral over [t_0, t_k] for every k.
    pub fn running_integral(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for k in 0..self.len() {
            if k > 0 {
                acc += 0.5
                    * (self.times[k] - self.times[k - 1])
                    * (self.values[k] + self.values[k - 1]);
            }
            out.push(acc);
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Ratio of the final value to the running maximum.
    pub fn tail_ratio(&self) -> Option<f64> {
        let max = self.sup();
        (max > 0.0).then(|| self.last().unwrap_or(0.0) / max)
    }
}
