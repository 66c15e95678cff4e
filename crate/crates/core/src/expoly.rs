//! Generalized exponential polynomials `Σ α_k e^{iγ_k θ}` with arbitrary
//! real frequencies, plus Monte-Carlo checks of the zero-set statements
//! used in the uniqueness arguments.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::beta;
use crate::generate::{random_collision_free, task_rng, DEFAULT_REJECTION_BUDGET};

/// Frequencies closer than this are merged.
pub const FREQUENCY_MERGE: f64 = 1e-12;

/// Coefficients below this fraction of the largest are dropped.
pub const COEFFICIENT_PRUNE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpPoly {
    terms: Vec<(f64, Complex64)>,
}

impl ExpPoly {
    /// Sorts by frequency, merges equal frequencies and prunes negligible
    /// coefficients.
    pub fn new(mut terms: Vec<(f64, Complex64)>) -> Self {
        terms.retain(|t| t.0.is_finite());
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, Complex64)> = Vec::with_capacity(terms.len());
        for (gamma, alpha) in terms {
            match merged.last_mut() {
                Some(last) if (gamma - last.0).abs() <= FREQUENCY_MERGE => last.1 += alpha,
                _ => merged.push((gamma, alpha)),
            }
        }
        let largest = merged.iter().fold(0.0f64, |m, t| m.max(t.1.norm()));
        merged.retain(|t| t.1.norm() > COEFFICIENT_PRUNE * largest && t.1 != Complex64::new(0.0, 0.0));
        Self { terms: merged }
    }

    pub fn from_real(terms: &[(f64, f64)]) -> Self {
        Self::new(terms.iter().map(|&(g, a)| (g, Complex64::new(a, 0.0))).collect())
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![(0.0, c)])
    }

    pub fn terms(&self) -> &[(f64, Complex64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest frequency; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<f64> {
        self.terms.last().map(|t| t.0)
    }

    pub fn min_frequency(&self) -> Option<f64> {
        self.terms.first().map(|t| t.0)
    }

    pub fn lead_coefficient(&self) -> Option<Complex64> {
        self.terms.last().map(|t| t.1)
    }

    pub fn evaluate(&self, theta: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(gamma, alpha)| alpha * Complex64::from_polar(1.0, gamma * theta))
            .sum()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.terms.iter().map(|&(g, a)| (g, a * c)).collect())
    }

    /// Pointwise complex conjugate: frequencies and coefficients conjugate.
    pub fn conj(&self) -> Self {
        Self::new(self.terms.iter().map(|&(g, a)| (-g, a.conj())).collect())
    }

    pub fn multiply(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(g1, a1) in &self.terms {
            for &(g2, a2) in &other.terms {
                terms.push((g1 + g2, a1 * a2));
            }
        }
        Self::new(terms)
    }

    /// `p · conj(p)` in Hermitian form: frequencies symmetric about zero and
    /// `α_{-γ} = conj(α_γ)`. For `p` with minimum frequency 0 the degree is
    /// unchanged.
    pub fn modulus_squared(&self) -> Self {
        let shift = self.min_frequency().unwrap_or(0.0);
        let based = Self {
            terms: self.terms.iter().map(|&(g, a)| (g - shift, a)).collect(),
        };
        let mut product = based.multiply(&based.conj());
        // exact symmetry: average each coefficient with its mirror
        let mirrored: Vec<(f64, Complex64)> = product
            .terms
            .iter()
            .map(|&(g, a)| {
                let partner = product
                    .terms
                    .iter()
                    .find(|t| (t.0 + g).abs() <= FREQUENCY_MERGE)
                    .map_or(a, |t| t.1.conj());
                (g, 0.5 * (a + partner))
            })
            .collect();
        product.terms = mirrored;
        product
    }

    /// `(γ, c_γ, s_γ)` with `γ ≥ 0` such that the real part of `p(θ)` is
    /// `Σ c_γ cos(γθ) - s_γ sin(γθ)` for a Hermitian `p`.
    pub fn cosine_coefficients(&self) -> Vec<(f64, f64, f64)> {
        self.terms
            .iter()
            .filter(|t| t.0 >= -FREQUENCY_MERGE)
            .map(|&(g, a)| {
                if g.abs() <= FREQUENCY_MERGE {
                    (0.0, a.re, 0.0)
                } else {
                    (g, 2.0 * a.re, 2.0 * a.im)
                }
            })
            .collect()
    }
}

impl Add for &ExpPoly {
    type Output = ExpPoly;

    fn add(self, other: &ExpPoly) -> ExpPoly {
        ExpPoly::new(self.terms.iter().chain(&other.terms).copied().collect())
    }
}

impl Sub for &ExpPoly {
    type Output = ExpPoly;

    fn sub(self, other: &ExpPoly) -> ExpPoly {
        self + &(-other)
    }
}

impl Neg for &ExpPoly {
    type Output = ExpPoly;

    fn neg(self) -> ExpPoly {
        ExpPoly {
            terms: self.terms.iter().map(|&(g, a)| (g, -a)).collect(),
        }
    }
}

impl Mul for &ExpPoly {
    type Output = ExpPoly;

    fn mul(self, other: &ExpPoly) -> ExpPoly {
        self.multiply(other)
    }
}

/// `β_{i,j}(θ)` of a signal as an element of `𝓔₀(Δ_{i,j})`.
pub fn beta_polynomial(x: &crate::signal::SparseSignal, i: usize, j: usize) -> Result<ExpPoly> {
    beta(x, i, j, 0.0)?;
    let v = x.locations();
    let a = x.amplitudes();
    Ok(ExpPoly::from_real(
        &(i..=j).map(|l| (v[l] - v[i], a[l])).collect::<Vec<_>>(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    UniqueRepresentation,
    #[serde(rename = "zero_set_1")]
    ZeroSet1,
    FourPSolutions,
    #[serde(rename = "zero_set_2")]
    ZeroSet2,
}

impl Lemma {
    pub const ALL: [Lemma; 4] = [
        Lemma::UniqueRepresentation,
        Lemma::ZeroSet1,
        Lemma::FourPSolutions,
        Lemma::ZeroSet2,
    ];
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lemma::UniqueRepresentation => "unique_representation",
            Lemma::ZeroSet1 => "zero_set_1",
            Lemma::FourPSolutions => "four_p_solutions",
            Lemma::ZeroSet2 => "zero_set_2",
        })
    }
}

impl FromStr for Lemma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Lemma::ALL
            .into_iter()
            .find(|l| l.to_string() == s.replace('-', "_"))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown lemma '{s}'")))
    }
}

/// Optional fixed parameters; anything left `None` is drawn per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub p: u32,
    /// `(a, b, c, d)` for the two-term lemma, `(a, b, c, ·)` for the
    /// three-term one.
    pub coefficients: Option<[f64; 4]>,
    pub constant: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    /// Random `θ` per trial for the zero-set statements.
    pub samples: usize,
    /// Grid spacing of the dense `[0, 2π]` scan.
    pub scan_step: f64,
}

impl Default for LemmaParams {
    fn default() -> Self {
        Self {
            p: 2,
            coefficients: None,
            constant: None,
            kappa: None,
            gamma: None,
            samples: 10_000,
            scan_step: 1e-5,
        }
    }
}

/// Minimum fraction of random `θ` at which a zero-set equation must fail.
pub const FAILURE_FRACTION: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: Lemma,
    pub trials: usize,
    pub passed_trials: usize,
    /// Worst statistic over trials: the smallest failure fraction, the
    /// largest sign-change count, or the smallest sampled `max |p|`.
    pub worst: f64,
    pub threshold: f64,
    /// Trials in which the equation held identically and the lemma's
    /// conclusion was confirmed instead.
    pub identically_satisfied: usize,
    pub pass: bool,
}

struct TrialOutcome {
    pass: bool,
    statistic: f64,
    identical: bool,
}

fn holds(lhs: f64, rhs: f64) -> bool {
    (lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs() + rhs.abs())
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn nonzero_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x = normal(rng);
        if x.abs() > 1e-3 {
            return x;
        }
    }
}

/// Monte-Carlo check of one of the exponential-polynomial statements.
pub fn check_lemma_statement(lemma: Lemma, params: &LemmaParams, trials: usize, seed: u64) -> Result<LemmaReport> {
    validate(lemma, params)?;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = task_rng(seed, t as u64);
            match lemma {
                Lemma::UniqueRepresentation => unique_representation_trial(params, &mut rng),
                Lemma::ZeroSet1 => zero_set_1_trial(params, &mut rng),
                Lemma::FourPSolutions => four_p_trial(params, &mut rng),
                Lemma::ZeroSet2 => zero_set_2_trial(params, &mut rng),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let passed_trials = outcomes.iter().filter(|o| o.pass).count();
    let (worst, threshold) = match lemma {
        Lemma::FourPSolutions => (
            outcomes.iter().map(|o| o.statistic).fold(0.0, f64::max),
            4.0 * params.p as f64,
        ),
        Lemma::UniqueRepresentation => (
            outcomes.iter().map(|o| o.statistic).fold(f64::INFINITY, f64::min),
            0.0,
        ),
        _ => (
            outcomes.iter().map(|o| o.statistic).fold(f64::INFINITY, f64::min),
            FAILURE_FRACTION,
        ),
    };
    Ok(LemmaReport {
        lemma,
        trials,
        passed_trials,
        worst,
        threshold,
        identically_satisfied: outcomes.iter().filter(|o| o.identical).count(),
        pass: passed_trials == trials,
    })
}

fn validate(lemma: Lemma, params: &LemmaParams) -> Result<()> {
    if params.p == 0 {
        return Err(Error::HypothesisViolation("p must be at least 1".into()));
    }
    match lemma {
        Lemma::FourPSolutions => {
            if params.p % 2 == 0 {
                return Err(Error::HypothesisViolation(format!("p = {} is not odd", params.p)));
            }
            if let Some(c) = params.coefficients {
                if c.contains(&0.0) {
                    return Err(Error::HypothesisViolation("a, b, c, d must be nonzero".into()));
                }
            }
            if !(params.scan_step > 0.0) {
                return Err(Error::InvalidParameter("scan step must be positive".into()));
            }
        }
        Lemma::ZeroSet2 => {
            if let Some(kappa) = params.kappa {
                if kappa == 0.0 || (kappa.abs() - 1.0).abs() <= 1e-12 {
                    return Err(Error::HypothesisViolation(format!("κ = {kappa} is 0 or ±1")));
                }
            }
            if matches!(params.gamma, Some(g) if !(g > 0.0)) {
                return Err(Error::HypothesisViolation("γ must be positive".into()));
            }
        }
        _ => {}
    }
    if matches!(lemma, Lemma::ZeroSet1 | Lemma::ZeroSet2 | Lemma::UniqueRepresentation) && params.samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    Ok(())
}

fn random_theta<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.0..std::f64::consts::TAU)
}

fn failure_fraction<R: Rng + ?Sized>(samples: usize, rng: &mut R, equation: impl Fn(f64) -> (f64, f64)) -> f64 {
    let failures = (0..samples)
        .filter(|_| {
            let (lhs, rhs) = equation(random_theta(rng));
            !holds(lhs, rhs)
        })
        .count();
    failures as f64 / samples as f64
}

/// A random nonzero polynomial is nonzero somewhere, and rebuilding it from
/// split, shuffled terms gives the identical term list.
fn unique_representation_trial<R: Rng + ?Sized>(params: &LemmaParams, rng: &mut R) -> Result<TrialOutcome> {
    let count = rng.random_range(1..=6);
    let terms: Vec<(f64, Complex64)> = (0..count)
        .map(|_| {
            (
                rng.random_range(-5.0..5.0),
                Complex64::new(nonzero_normal(rng), normal(rng)),
            )
        })
        .collect();
    let p = ExpPoly::new(terms.clone());
    let mut pieces: Vec<(f64, Complex64)> = terms
        .iter()
        .flat_map(|&(g, a)| {
            let w: f64 = rng.random_range(0.1..0.9);
            [(g, a * w), (g, a * (1.0 - w))]
        })
        .collect();
    for i in (1..pieces.len()).rev() {
        pieces.swap(i, rng.random_range(0..=i));
    }
    let q = ExpPoly::new(pieces);
    let same_terms = p.terms.len() == q.terms.len()
        && p.terms.iter().zip(&q.terms).all(|(x, y)| {
            x.0 == y.0 && (x.1 - y.1).norm() <= 1e-12 * x.1.norm().max(1.0)
        });
    let largest = (0..params.samples.min(256))
        .map(|_| p.evaluate(random_theta(rng)).norm())
        .fold(0.0, f64::max);
    Ok(TrialOutcome {
        pass: same_terms && largest > 1e-9,
        statistic: largest,
        identical: false,
    })
}

/// `|β_{i,j}|^p + |β_{i+1,j-1}|^p = |β_{i+1,j}|^p + |β_{i,j-1}|^p` for a
/// random collision-free signal: the first polynomial has strictly the
/// largest degree, so the equation fails almost everywhere.
fn zero_set_1_trial<R: Rng + ?Sized>(params: &LemmaParams, rng: &mut R) -> Result<TrialOutcome> {
    let k = rng.random_range(3..=6);
    let x = random_collision_free(k, 64, 1.0, DEFAULT_REJECTION_BUDGET, rng)?;
    let i = rng.random_range(0..k - 2);
    let j = rng.random_range(i + 2..k);
    let polys = [
        beta_polynomial(&x, i, j)?,
        beta_polynomial(&x, i + 1, j - 1)?,
        beta_polynomial(&x, i + 1, j)?,
        beta_polynomial(&x, i, j - 1)?,
    ];
    let d = polys.each_ref().map(|q| q.degree().unwrap_or(f64::NEG_INFINITY));
    if !(d[0] > d[1] && d[0] > d[2] && d[0] > d[3]) {
        return Err(Error::HypothesisViolation("d1 is not the strict maximum degree".into()));
    }
    let pp = params.p as i32;
    let fraction = failure_fraction(params.samples, rng, |theta| {
        let m = |q: &ExpPoly| q.evaluate(theta).norm().powi(pp);
        (m(&polys[0]) + m(&polys[1]), m(&polys[2]) + m(&polys[3]))
    });
    Ok(TrialOutcome {
        pass: fraction >= FAILURE_FRACTION,
        statistic: fraction,
        identical: false,
    })
}

fn two_term_modulus(a: f64, b: f64, theta: f64) -> f64 {
    Complex64::new(a + b * theta.cos(), b * theta.sin()).norm()
}

/// Counts sign changes of `|a + b e^{iθ}|^p - |c + d e^{iθ}|^p - C` on a
/// dense scan of `[0, 2π]`. More than `4p` would force `ab = cd` and
/// `a² + b² = c² + d²`.
fn four_p_trial<R: Rng + ?Sized>(params: &LemmaParams, rng: &mut R) -> Result<TrialOutcome> {
    let [a, b, c, d] = params
        .coefficients
        .unwrap_or_else(|| [(); 4].map(|_| nonzero_normal(rng)));
    let pp = params.p as i32;
    let g0 = |theta: f64| two_term_modulus(a, b, theta).powi(pp) - two_term_modulus(c, d, theta).powi(pp);
    let constant = params.constant.unwrap_or_else(|| g0(random_theta(rng)));
    let g = |theta: f64| g0(theta) - constant;

    let steps = (std::f64::consts::TAU / params.scan_step).ceil() as usize;
    let scale = 1.0 + (a.abs() + b.abs()).powi(pp) + (c.abs() + d.abs()).powi(pp) + constant.abs();
    let zero_band = 1e-12 * scale;
    let mut changes = 0usize;
    let mut last_sign = 0i8;
    let mut largest = 0.0f64;
    for n in 0..=steps {
        let theta = (n as f64 * params.scan_step).min(std::f64::consts::TAU);
        let value = g(theta);
        largest = largest.max(value.abs());
        let sign = if value > zero_band {
            1
        } else if value < -zero_band {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                changes += 1;
            }
            last_sign = sign;
        }
    }
    let identical = largest <= zero_band;
    let conclusion = holds(a * b, c * d) && holds(a * a + b * b, c * c + d * d);
    let pass = if identical { conclusion } else { changes <= 4 * params.p as usize };
    Ok(TrialOutcome {
        pass,
        statistic: changes as f64,
        identical,
    })
}

/// `|a + b e^{iθ} + c e^{i(γ+1)θ}|^p - |κa + b/κ e^{iθ} + κc e^{i(γ+1)θ}|^p = C`
/// fails for almost every `θ` when `κ ≠ 0, ±1`.
fn zero_set_2_trial<R: Rng + ?Sized>(params: &LemmaParams, rng: &mut R) -> Result<TrialOutcome> {
    let [a, b, c, _] = params
        .coefficients
        .unwrap_or_else(|| [(); 4].map(|_| nonzero_normal(rng)));
    let kappa = params.kappa.unwrap_or_else(|| loop {
        let k: f64 = rng.random_range(-1.5f64..1.5).exp() * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        if (k.abs() - 1.0).abs() > 0.05 {
            break k;
        }
    });
    let gamma = params.gamma.unwrap_or_else(|| rng.random_range(0.1..5.0));
    let p = ExpPoly::from_real(&[(0.0, a), (1.0, b), (gamma + 1.0, c)]);
    let q = ExpPoly::from_real(&[(0.0, kappa * a), (1.0, b / kappa), (gamma + 1.0, kappa * c)]);
    let pp = params.p as i32;
    let g = |theta: f64| p.evaluate(theta).norm().powi(pp) - q.evaluate(theta).norm().powi(pp);
    let constant = params.constant.unwrap_or_else(|| g(random_theta(rng)));
    let fraction = failure_fraction(params.samples, rng, |theta| (g(theta), constant));
    Ok(TrialOutcome {
        pass: fraction >= FAILURE_FRACTION,
        statistic: fraction,
        identical: false,
    })
}
