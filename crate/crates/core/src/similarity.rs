//! Similarity distributions on `[0, 1]` and the tools around them.
//!
//! Similarity values are drawn by inverse-transform sampling from a density
//! `h(s)`. Realized similarities between two optima are one minus their
//! Chebyshev distance, and a set of realized values is summarized by an
//! equal-width histogram.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 20;

/// A similarity density on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SimilaritySpec {
    /// Point mass at `s = 1`.
    #[serde(rename = "h1h")]
    H1h,
    /// `ReLU(8s - 4)`.
    #[serde(rename = "h2h")]
    H2h,
    /// Uniform.
    #[serde(rename = "h1m")]
    M1,
    /// `2s`.
    #[serde(rename = "h2m")]
    M2,
    /// `2 - 2s`.
    #[serde(rename = "h3m")]
    M3,
    /// Triangular with mode 0.5.
    #[serde(rename = "h4m")]
    M4,
    /// Point mass at `s = 0`.
    #[serde(rename = "h1l")]
    L1,
    /// `ReLU(4 - 8s)`.
    #[serde(rename = "h2l")]
    L2,
    #[serde(rename = "custom")]
    CustomPiecewiseLinear(PiecewiseLinearDensity),
}

impl SimilaritySpec {
    pub const BUILT_IN: [SimilaritySpec; 8] = [
        SimilaritySpec::H1h,
        SimilaritySpec::H2h,
        SimilaritySpec::M1,
        SimilaritySpec::M2,
        SimilaritySpec::M3,
        SimilaritySpec::M4,
        SimilaritySpec::L1,
        SimilaritySpec::L2,
    ];

    /// Token used inside problem names, e.g. `h4m`.
    pub fn label(&self) -> &'static str {
        match self {
            SimilaritySpec::H1h => "h1h",
            SimilaritySpec::H2h => "h2h",
            SimilaritySpec::M1 => "h1m",
            SimilaritySpec::M2 => "h2m",
            SimilaritySpec::M3 => "h3m",
            SimilaritySpec::M4 => "h4m",
            SimilaritySpec::L1 => "h1l",
            SimilaritySpec::L2 => "h2l",
            SimilaritySpec::CustomPiecewiseLinear(_) => "custom",
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, SimilaritySpec::H1h | SimilaritySpec::L1)
    }

    /// Exact CDF `H(s)`.
    pub fn cdf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfUnitRange { index: 0, value: s });
        }
        Ok(match self {
            SimilaritySpec::H1h => {
                if s >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SimilaritySpec::H2h => {
                if s <= 0.5 {
                    0.0
                } else {
                    (2.0 * s - 1.0).powi(2)
                }
            }
            SimilaritySpec::M1 => s,
            SimilaritySpec::M2 => s * s,
            SimilaritySpec::M3 => 1.0 - (1.0 - s).powi(2),
            SimilaritySpec::M4 => {
                if s <= 0.5 {
                    2.0 * s * s
                } else {
                    1.0 - 2.0 * (1.0 - s).powi(2)
                }
            }
            SimilaritySpec::L1 => 1.0,
            SimilaritySpec::L2 => {
                if s >= 0.5 {
                    1.0
                } else {
                    1.0 - (1.0 - 2.0 * s).powi(2)
                }
            }
            SimilaritySpec::CustomPiecewiseLinear(d) => d.cdf(s),
        })
    }

    /// Generalized inverse `H^-1(u) = inf { s : H(s) >= u }`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::OutOfUnitRange { index: 0, value: u });
        }
        let s = match self {
            SimilaritySpec::H1h => 1.0,
            SimilaritySpec::H2h => (1.0 + u.sqrt()) / 2.0,
            SimilaritySpec::M1 => u,
            SimilaritySpec::M2 => u.sqrt(),
            SimilaritySpec::M3 => 1.0 - (1.0 - u).sqrt(),
            SimilaritySpec::M4 => {
                if u <= 0.5 {
                    (u / 2.0).sqrt()
                } else {
                    1.0 - ((1.0 - u) / 2.0).sqrt()
                }
            }
            SimilaritySpec::L1 => 0.0,
            SimilaritySpec::L2 => (1.0 - (1.0 - u).sqrt()) / 2.0,
            SimilaritySpec::CustomPiecewiseLinear(d) => d.inverse_cdf(u),
        };
        Ok(s.clamp(0.0, 1.0))
    }

    /// Probability mass of `(low, high]`, or `[low, high]` when `closed_left`.
    pub fn interval_mass(&self, low: f64, high: f64, closed_left: bool) -> Result<f64> {
        let below = if closed_left {
            if low <= 0.0 {
                0.0
            } else {
                // H(low^-) equals H(low) except for the point mass at 1
                match self {
                    SimilaritySpec::H1h if low >= 1.0 => 0.0,
                    _ => self.cdf(low)?,
                }
            }
        } else {
            self.cdf(low)?
        };
        Ok(self.cdf(high)? - below)
    }
}

impl fmt::Display for SimilaritySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SimilaritySpec {
    type Err = Error;

    /// Accepts problem-name tokens (`h4m`) and short forms (`m4`).
    fn from_str(s: &str) -> Result<Self> {
        let spec = match s.to_ascii_lowercase().as_str() {
            "h1h" => SimilaritySpec::H1h,
            "h2h" => SimilaritySpec::H2h,
            "m1" | "h1m" => SimilaritySpec::M1,
            "m2" | "h2m" => SimilaritySpec::M2,
            "m3" | "h3m" => SimilaritySpec::M3,
            "m4" | "h4m" => SimilaritySpec::M4,
            "l1" | "h1l" => SimilaritySpec::L1,
            "l2" | "h2l" => SimilaritySpec::L2,
            _ => return Err(Error::UnknownName(s.to_string())),
        };
        Ok(spec)
    }
}

/// Piecewise-linear density through `(s, h)` knots spanning `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKnots", into = "RawKnots")]
pub struct PiecewiseLinearDensity {
    knots: Vec<(f64, f64)>,
    /// `H` at each knot.
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawKnots {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<RawKnots> for PiecewiseLinearDensity {
    type Error = Error;

    fn try_from(raw: RawKnots) -> Result<Self> {
        PiecewiseLinearDensity::new(raw.knots)
    }
}

impl From<PiecewiseLinearDensity> for RawKnots {
    fn from(d: PiecewiseLinearDensity) -> Self {
        RawKnots { knots: d.knots }
    }
}

impl PiecewiseLinearDensity {
    /// Knots must start at 0, end at 1, increase strictly, be nonnegative and
    /// integrate to 1 (trapezoidal rule, tolerance 1e-9).
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidDensity("at least two knots are required".into()));
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(Error::InvalidDensity("knots must span exactly [0, 1]".into()));
        }
        for (i, &(s, h)) in knots.iter().enumerate() {
            if !h.is_finite() || h < 0.0 {
                return Err(Error::InvalidDensity(format!("density {h} at s = {s} is negative")));
            }
            if i > 0 && s <= knots[i - 1].0 {
                return Err(Error::InvalidDensity("knot positions must increase strictly".into()));
            }
        }
        let mut cumulative = Vec::with_capacity(knots.len());
        cumulative.push(0.0);
        for w in knots.windows(2) {
            let area = 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
            cumulative.push(cumulative.last().unwrap() + area);
        }
        let total = *cumulative.last().unwrap();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDensity(format!("density integrates to {total}, not 1")));
        }
        Ok(PiecewiseLinearDensity { knots, cumulative })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn density(&self, s: f64) -> f64 {
        let j = self.segment_of(s);
        let ((s0, h0), (s1, h1)) = (self.knots[j], self.knots[j + 1]);
        h0 + (h1 - h0) * (s - s0) / (s1 - s0)
    }

    fn segment_of(&self, s: f64) -> usize {
        let idx = self.knots.partition_point(|k| k.0 <= s);
        idx.clamp(1, self.knots.len() - 1) - 1
    }

    fn cdf(&self, s: f64) -> f64 {
        let j = self.segment_of(s);
        let ((s0, h0), (s1, h1)) = (self.knots[j], self.knots[j + 1]);
        let t = s - s0;
        let slope = (h1 - h0) / (s1 - s0);
        let value = self.cumulative[j] + h0 * t + 0.5 * slope * t * t;
        value.clamp(0.0, 1.0)
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.min(*self.cumulative.last().unwrap());
        // first segment whose right-end cumulative reaches u
        let j = self.cumulative[1..].partition_point(|&c| c < u).min(self.knots.len() - 2);
        let ((s0, h0), (s1, h1)) = (self.knots[j], self.knots[j + 1]);
        let width = s1 - s0;
        let rem = (u - self.cumulative[j]).max(0.0);
        let a = 0.5 * (h1 - h0) / width;
        // a t^2 + h0 t - rem = 0, in the cancellation-free form
        let disc = (h0 * h0 + 4.0 * a * rem).max(0.0);
        let denom = h0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * rem / denom } else { 0.0 };
        s0 + t.clamp(0.0, width)
    }
}

/// Target similarity values, one per source task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilaritySample(Vec<f64>);

impl SimilaritySample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        crate::families::check_unit(&values)?;
        Ok(SimilaritySample(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Draws `k` i.i.d. values `S_i = H^-1(U_i)`.
pub fn sample_similarities(spec: &SimilaritySpec, k: usize, rng: &mut Rng) -> Result<SimilaritySample> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let values = (0..k).map(|_| spec.inverse_cdf(rng.random::<f64>())).collect::<Result<Vec<_>>>()?;
    Ok(SimilaritySample(values))
}

/// One minus the Chebyshev distance between two normalized optima.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    crate::families::check_unit(a)?;
    crate::families::check_unit(b)?;
    let dist = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(1.0 - dist)
}

/// Equal-width histogram of similarity values on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEstimate {
    pub bins: Vec<(f64, f64)>,
    pub mass: Vec<f64>,
    pub density: Vec<f64>,
}

impl HistogramEstimate {
    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// CSV with columns `bin_low,bin_high,mass,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,mass,density\n");
        for (b, (lo, hi)) in self.bins.iter().enumerate() {
            let _ = writeln!(out, "{lo},{hi},{},{}", self.mass[b], self.density[b]);
        }
        out
    }

    /// Same as [`to_csv`](Self::to_csv) plus the bin-averaged analytic density.
    pub fn to_csv_with_reference(&self, spec: &SimilaritySpec) -> Result<String> {
        let n = self.n_bins() as f64;
        let mut out = String::from("bin_low,bin_high,mass,density,analytic_density\n");
        for (b, &(lo, hi)) in self.bins.iter().enumerate() {
            let analytic = spec.interval_mass(lo, hi, b == 0)? * n;
            let _ = writeln!(out, "{lo},{hi},{},{},{analytic}", self.mass[b], self.density[b]);
        }
        Ok(out)
    }
}

/// Bin index for `s`: bin `b` covers `(b/n, (b+1)/n]`, bin 0 also holds 0.
pub fn bin_index(s: f64, n: usize) -> usize {
    let raw = (s * n as f64).ceil() as isize - 1;
    raw.clamp(0, n as isize - 1) as usize
}

/// Rescaled-histogram estimate over `n` equal-width bins.
pub fn estimate_density(values: &[f64], n: usize) -> Result<HistogramEstimate> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if n == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    crate::families::check_unit(values)?;
    let mut counts = vec![0usize; n];
    for &s in values {
        counts[bin_index(s, n)] += 1;
    }
    let k = values.len() as f64;
    let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / k).collect();
    let density = mass.iter().map(|m| m * n as f64).collect();
    let bins = (0..n).map(|b| (b as f64 / n as f64, (b + 1) as f64 / n as f64)).collect();
    Ok(HistogramEstimate { bins, mass, density })
}

/// Two-sided Kolmogorov-Smirnov statistic of `values` against `spec`.
pub fn ks_statistic(values: &[f64], spec: &SimilaritySpec) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = spec.cdf(x)?;
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}
