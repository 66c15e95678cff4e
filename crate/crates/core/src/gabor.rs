//! Second layer: Gabor-modulus measurements of a Dirac train.
//!
//! For the indicator window `w = 1_[0,1]` the measurement
//! `‖g_{s,ξ} ⋆ x‖_p^p` has an exact closed form as a sum over contiguous
//! spike blocks `{i, …, j}` of `|β_{i,j}(ξ)|^p · |R_{i,j}(s)|`, which is
//! piecewise linear in `s` with knots on the difference set. A direct
//! quadrature of the integrand is provided as an independent check and for
//! the Gaussian window.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SparseSignal;

/// Standard deviation of the Gaussian window, in window units. The window is
/// centred on `1/2` and truncated at `±6σ`, i.e. exactly to `[0, 1]`.
pub const GAUSSIAN_SIGMA: f64 = 1.0 / 12.0;

/// Differences closer than this are treated as equal when grouping pairs.
pub const JUMP_MATCH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Indicator,
    Gaussian,
}

impl Window {
    /// `w(u)`, supported on `[0, 1]`.
    pub fn value(self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            Window::Indicator => 1.0,
            Window::Gaussian => {
                let z = (u - 0.5) / GAUSSIAN_SIGMA;
                (-0.5 * z * z).exp()
            }
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Indicator => "indicator",
            Window::Gaussian => "gaussian",
        })
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(Window::Indicator),
            "gaussian" => Ok(Window::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown window '{other}'"))),
        }
    }
}

/// Whether a record stores `‖·‖_p` or `‖·‖_p^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Norm,
    NormPower,
}

impl Convention {
    /// Converts a p-th power value into this convention.
    pub fn from_power(self, power: f64, p: u32) -> f64 {
        match self {
            Convention::NormPower => power,
            Convention::Norm => power.max(0.0).powf(1.0 / p as f64),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Norm => "norm",
            Convention::NormPower => "norm_power",
        })
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" => Ok(Convention::Norm),
            "norm_power" | "norm-power" => Ok(Convention::NormPower),
            other => Err(Error::InvalidParameter(format!("unknown convention '{other}'"))),
        }
    }
}

/// Gabor filter `w(t/s) e^{iξt}` followed by an `L^p` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborSpec {
    pub window: Window,
    pub scale: f64,
    pub frequency: f64,
    pub exponent: u32,
}

impl GaborSpec {
    pub fn new(window: Window, scale: f64, frequency: f64, exponent: u32) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale {scale} must be positive")));
        }
        if exponent == 0 {
            return Err(Error::InvalidParameter("exponent p must be at least 1".into()));
        }
        if !frequency.is_finite() {
            return Err(Error::InvalidParameter("frequency must be finite".into()));
        }
        Ok(Self {
            window,
            scale,
            frequency,
            exponent,
        })
    }

    pub fn indicator(scale: f64, frequency: f64, exponent: u32) -> Result<Self> {
        Self::new(Window::Indicator, scale, frequency, exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub scale: f64,
    pub frequency: f64,
    pub exponent: u32,
    pub value: f64,
    pub convention: Convention,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub records: Vec<MeasurementRecord>,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The single convention shared by all records.
    pub fn convention(&self) -> Result<Option<Convention>> {
        let mut conventions = self.records.iter().map(|r| r.convention);
        let first = conventions.next();
        if conventions.any(|c| Some(c) != first) {
            return Err(Error::ConventionMismatch);
        }
        Ok(first)
    }
}

fn check_pair(x: &SparseSignal, i: usize, j: usize) -> Result<()> {
    if i > j || j >= x.len() {
        return Err(Error::IndexOutOfRange { i, j, k: x.len() });
    }
    Ok(())
}

/// `β_{i,j}(ξ) = Σ_{ℓ=i}^{j} a_ℓ e^{iξ(v_ℓ - v_i)}` with 0-based indices.
pub fn beta(x: &SparseSignal, i: usize, j: usize, xi: f64) -> Result<Complex64> {
    check_pair(x, i, j)?;
    Ok(beta_unchecked(x, i, j, xi))
}

fn beta_unchecked(x: &SparseSignal, i: usize, j: usize, xi: f64) -> Complex64 {
    let v = x.locations();
    let a = x.amplitudes();
    (i..=j)
        .map(|l| Complex64::from_polar(a[l], xi * (v[l] - v[i])))
        .sum()
}

fn modulus_pow(z: Complex64, p: u32) -> f64 {
    if p == 2 {
        z.norm_sqr()
    } else {
        z.norm().powi(p as i32)
    }
}

/// Lebesgue measure of the set where exactly spikes `i..=j` are covered by
/// their length-`s` windows, with `v_{-1} = -∞` and `v_k = +∞` (0-based).
pub fn region_length(x: &SparseSignal, i: usize, j: usize, s: f64) -> Result<f64> {
    check_pair(x, i, j)?;
    Ok(region_length_unchecked(x.locations(), i, j, s))
}

pub(crate) fn region_length_unchecked(v: &[f64], i: usize, j: usize, s: f64) -> f64 {
    let upper = match v.get(j + 1) {
        Some(&next) => (v[i] + s).min(next),
        None => v[i] + s,
    };
    let lower = match i.checked_sub(1) {
        Some(prev) => v[j].max(v[prev] + s),
        None => v[j],
    };
    (upper - lower).max(0.0)
}

/// Exact `‖g_{s,ξ} ⋆ x‖_p^p` for the indicator window.
pub fn measure_analytic(x: &SparseSignal, g: &GaborSpec) -> Result<f64> {
    if g.window != Window::Indicator {
        return Err(Error::UnsupportedWindow);
    }
    Ok(analytic_power(x, g.scale, g.frequency, g.exponent))
}

/// The closed form without validation; `s > 0` and `p ≥ 1` are assumed.
pub fn analytic_power(x: &SparseSignal, s: f64, xi: f64, p: u32) -> f64 {
    let v = x.locations();
    let a = x.amplitudes();
    let k = x.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut block = Complex64::new(0.0, 0.0);
        for j in i..k {
            // all of v_i..v_j must be covered: empty once v_j > v_i + s
            if v[j] - v[i] >= s {
                break;
            }
            block += Complex64::from_polar(a[j], xi * (v[j] - v[i]));
            let length = region_length_unchecked(v, i, j, s);
            if length > 0.0 {
                total += modulus_pow(block, p) * length;
            }
        }
    }
    total
}

/// Composite-midpoint quadrature of `∫ |Σ_j a_j w((t-v_j)/s) e^{iξ(t-v_j)}|^p dt`.
///
/// The integration range is split at every window edge `v_j` and `v_j + s`,
/// and each panel uses midpoints spaced at most `quad_step` apart.
pub fn measure_numeric(x: &SparseSignal, g: &GaborSpec, quad_step: f64) -> Result<f64> {
    let s = g.scale;
    let limit = s / 100.0;
    if !(quad_step > 0.0) || quad_step > limit * (1.0 + 1e-12) {
        return Err(Error::QuadStepTooCoarse { quad_step, limit });
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let v = x.locations();
    let a = x.amplitudes();
    let mut edges: Vec<f64> = v.iter().flat_map(|&t| [t, t + s]).collect();
    edges.sort_by(|p, q| p.total_cmp(q));
    edges.dedup();

    let xi = g.frequency;
    let p = g.exponent;
    let mut total = 0.0;
    for panel in edges.windows(2) {
        let (lo, hi) = (panel[0], panel[1]);
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        let count = (width / quad_step).ceil().max(1.0) as usize;
        let dt = width / count as f64;
        let mut panel_sum = 0.0;
        for n in 0..count {
            let t = lo + (n as f64 + 0.5) * dt;
            let mut acc = Complex64::new(0.0, 0.0);
            for (&vj, &aj) in v.iter().zip(a) {
                let w = g.window.value((t - vj) / s);
                if w != 0.0 {
                    acc += Complex64::from_polar(aj * w, xi * (t - vj));
                }
            }
            panel_sum += modulus_pow(acc, p);
        }
        total += panel_sum * dt;
    }
    Ok(total)
}

/// `c_{i,j}(ξ)`: coefficient of `δ_{Δ_{i,j}}` contributed by pair `(i, j)`,
/// `i < j`, 0-based.
pub fn jump_coefficient(x: &SparseSignal, i: usize, j: usize, xi: f64, p: u32) -> Result<f64> {
    if i >= j {
        return Err(Error::IndexOutOfRange { i, j, k: x.len() });
    }
    check_pair(x, i, j)?;
    let m = |lo: usize, hi: usize| modulus_pow(beta_unchecked(x, lo, hi, xi), p);
    Ok(if j == i + 1 {
        m(i, j) - m(j, j) - m(i, i)
    } else {
        m(i, j) + m(i + 1, j - 1) - m(i + 1, j) - m(i, j - 1)
    })
}

/// Mass of `∂_s² f_ξ(s)` at `s = d`: the sum of `c_{i,j}(ξ)` over all pairs
/// with `Δ_{i,j} = d`. Zero when `d` is not a difference.
pub fn second_derivative_jump(x: &SparseSignal, d: f64, xi: f64, p: u32) -> f64 {
    let v = x.locations();
    let k = x.len();
    let mut total = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            if ((v[j] - v[i]) - d).abs() <= JUMP_MATCH_TOLERANCE {
                total += jump_coefficient(x, i, j, xi, p).expect("indices in range");
            }
        }
    }
    total
}

/// One record per `(scale, frequency)` pair, scales outer and frequencies
/// inner. Indicator windows use the closed form, Gaussian windows use
/// quadrature at `scale · 1e-4`.
pub fn measurement_batch(
    x: &SparseSignal,
    scales: &[f64],
    freqs: &[f64],
    p: u32,
    window: Window,
    convention: Convention,
) -> Result<MeasurementSet> {
    let specs = scales
        .iter()
        .flat_map(|&s| freqs.iter().map(move |&xi| (s, xi)))
        .map(|(s, xi)| GaborSpec::new(window, s, xi, p))
        .collect::<Result<Vec<_>>>()?;
    let records = specs
        .par_iter()
        .map(|g| {
            let power = match g.window {
                Window::Indicator => measure_analytic(x, g)?,
                Window::Gaussian => measure_numeric(x, g, g.scale * 1e-4)?,
            };
            Ok(MeasurementRecord {
                scale: g.scale,
                frequency: g.frequency,
                exponent: p,
                value: convention.from_power(power, p),
                convention,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementSet { records })
}

/// `(s, f_ξ(s)^p)` at each requested scale, indicator window.
pub fn sweep(x: &SparseSignal, xi: f64, p: u32, scales: &[f64]) -> Vec<(f64, f64)> {
    scales
        .iter()
        .map(|&s| (s, analytic_power(x, s, xi, p)))
        .collect()
}

/// `count` scales `start, start + step, …`.
pub fn linear_scales(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|n| start + n as f64 * step).collect()
}
