//! Signal representations shared by every stage of the pipeline.
//!
//! A [`SparseSignal`] is a finite Dirac train `x(t) = Σ a_j δ(t - v_j)`.
//! The measurements computed downstream are blind to translation,
//! reflection and global sign, so this module also provides the orbit
//! machinery: the difference multiset, a canonical orbit representative and
//! an equivalence test.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that a location sits on `hℤ`.
pub const GRID_TOLERANCE: f64 = 1e-12;

/// Tolerance used when grouping equal differences.
pub const DIFFERENCE_TOLERANCE: f64 = 1e-12;

fn on_grid(value: f64, step: f64) -> bool {
    let n = (value / step).round();
    (value - n * step).abs() <= GRID_TOLERANCE * value.abs().max(step)
}

#[derive(Deserialize)]
struct RawSparseSignal {
    locations: Vec<f64>,
    amplitudes: Vec<f64>,
    #[serde(default)]
    grid_step: Option<f64>,
}

/// Grid-free Dirac train with strictly increasing locations and nonzero
/// real amplitudes.
///
/// The empty train (no spikes) is representable; it is what max pooling
/// returns for a knot-free input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSparseSignal")]
pub struct SparseSignal {
    locations: Vec<f64>,
    amplitudes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_step: Option<f64>,
}

impl TryFrom<RawSparseSignal> for SparseSignal {
    type Error = Error;

    fn try_from(raw: RawSparseSignal) -> Result<Self> {
        let signal = SparseSignal::new(raw.locations, raw.amplitudes)?;
        match raw.grid_step {
            Some(h) => signal.with_grid_step(h),
            None => Ok(signal),
        }
    }
}

impl SparseSignal {
    pub fn new(locations: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        if locations.len() != amplitudes.len() {
            return Err(Error::InvalidSignal(format!(
                "{} locations but {} amplitudes",
                locations.len(),
                amplitudes.len()
            )));
        }
        if let Some(bad) = locations.iter().chain(&amplitudes).find(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!("non-finite value {bad}")));
        }
        if locations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSignal(
                "locations must be strictly increasing".into(),
            ));
        }
        if amplitudes.iter().any(|&a| a == 0.0) {
            return Err(Error::InvalidSignal("amplitudes must be nonzero".into()));
        }
        Ok(Self {
            locations,
            amplitudes,
            grid_step: None,
        })
    }

    /// Builds a signal whose locations are `step * indices`.
    pub fn on_grid(indices: &[i64], amplitudes: Vec<f64>, step: f64) -> Result<Self> {
        let locations = indices.iter().map(|&n| n as f64 * step).collect();
        Self::new(locations, amplitudes)?.with_grid_step(step)
    }

    pub fn empty() -> Self {
        Self {
            locations: Vec::new(),
            amplitudes: Vec::new(),
            grid_step: None,
        }
    }

    /// Attaches a grid step, checking that every location lies on `hℤ`.
    pub fn with_grid_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidSignal(format!("grid step {step} must be positive")));
        }
        if let Some(v) = self.locations.iter().find(|&&v| !on_grid(v, step)) {
            return Err(Error::InvalidSignal(format!(
                "location {v} is not a multiple of the grid step {step}"
            )));
        }
        self.grid_step = Some(step);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn grid_step(&self) -> Option<f64> {
        self.grid_step
    }

    /// `‖a‖_p`.
    pub fn amplitude_norm(&self, p: u32) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.abs().powi(p as i32))
            .sum::<f64>()
            .powf(1.0 / p as f64)
    }

    fn keep_grid(mut self, step: Option<f64>) -> Self {
        self.grid_step = step.filter(|&h| self.locations.iter().all(|&v| on_grid(v, h)));
        self
    }

    /// `x(t - tau)`.
    pub fn translate(&self, tau: f64) -> Self {
        Self {
            locations: self.locations.iter().map(|v| v + tau).collect(),
            amplitudes: self.amplitudes.clone(),
            grid_step: None,
        }
        .keep_grid(self.grid_step)
    }

    /// `x(-t)`.
    pub fn reflect(&self) -> Self {
        Self {
            locations: self.locations.iter().rev().map(|v| -v).collect(),
            amplitudes: self.amplitudes.iter().rev().copied().collect(),
            grid_step: self.grid_step,
        }
    }

    /// `λ·x` for nonzero `λ`.
    pub fn scale(&self, lambda: f64) -> Self {
        assert!(lambda != 0.0, "scaling by zero leaves no spikes");
        Self {
            locations: self.locations.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * lambda).collect(),
            grid_step: self.grid_step,
        }
    }

    pub fn negate(&self) -> Self {
        self.scale(-1.0)
    }

    /// Multiset of positive pairwise differences `v_j - v_i`, `i < j`.
    pub fn difference_set(&self) -> DifferenceMultiset {
        let k = self.len();
        let mut diffs = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for i in 0..k {
            for j in i + 1..k {
                diffs.push(self.locations[j] - self.locations[i]);
            }
        }
        DifferenceMultiset::from_differences(diffs, DIFFERENCE_TOLERANCE)
    }

    /// True iff all pairwise differences are distinct.
    pub fn is_collision_free(&self) -> bool {
        self.difference_set().is_collision_free()
    }

    fn translated_to_origin(&self) -> Self {
        match self.locations.first() {
            Some(&v0) => Self {
                locations: self.locations.iter().map(|v| v - v0).collect(),
                amplitudes: self.amplitudes.clone(),
                grid_step: None,
            }
            .keep_grid(self.grid_step),
            None => self.clone(),
        }
    }

    /// Representative of the translation / reflection / sign orbit.
    ///
    /// The minimum location is moved to 0; between the signal and its
    /// reflection the one with the lexicographically larger `|a|` sequence
    /// wins (then the smaller location sequence, then the larger
    /// sign-normalised amplitude sequence; a full tie keeps the unreflected
    /// signal); finally the first amplitude is made positive.
    pub fn canonicalize(&self) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        let direct = self.translated_to_origin();
        let reflected = self.reflect().translated_to_origin();
        let mut chosen = if orbit_key_cmp(&reflected, &direct) == Ordering::Greater {
            reflected
        } else {
            direct
        };
        if chosen.amplitudes[0] < 0.0 {
            chosen.amplitudes.iter_mut().for_each(|a| *a = -*a);
        }
        chosen
    }

    /// True iff some translation / reflection / sign change maps `other`
    /// onto `self` with every location and amplitude within `tol`.
    pub fn equivalent_up_to_symmetry(&self, other: &SparseSignal, tol: f64) -> bool {
        if self.len() != other.len() {
            return false;
        }
        if self.is_empty() {
            return true;
        }
        let base = self.translated_to_origin();
        let reflected = other.reflect();
        let candidates = [other, &reflected];
        let found = candidates.iter().any(|candidate| {
            let moved = candidate.translated_to_origin();
            let locations_close = base
                .locations
                .iter()
                .zip(&moved.locations)
                .all(|(a, b)| (a - b).abs() <= tol);
            locations_close
                && [1.0, -1.0].into_iter().any(|sign| {
                    base.amplitudes
                        .iter()
                        .zip(&moved.amplitudes)
                        .all(|(a, b)| (a - sign * b).abs() <= tol)
                })
        });
        found
    }
}

fn tolerant_cmp(a: f64, b: f64, scale: f64) -> Ordering {
    if (a - b).abs() <= 1e-12 * scale.max(a.abs()).max(b.abs()) {
        Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(Ordering::Equal)
    }
}

fn lexicographic(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>, scale: f64) -> Ordering {
    a.zip(b)
        .map(|(x, y)| tolerant_cmp(x, y, scale))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Orders orbit candidates; `Greater` means "preferred".
fn orbit_key_cmp(a: &SparseSignal, b: &SparseSignal) -> Ordering {
    let amp_scale = a.amplitudes.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let loc_scale = a.locations.last().copied().unwrap_or(0.0).abs();
    let by_magnitude = lexicographic(
        a.amplitudes.iter().map(|x| x.abs()),
        b.amplitudes.iter().map(|x| x.abs()),
        amp_scale,
    );
    if by_magnitude.is_ne() {
        return by_magnitude;
    }
    // smaller location sequence preferred
    let by_location = lexicographic(
        b.locations.iter().copied(),
        a.locations.iter().copied(),
        loc_scale,
    );
    if by_location.is_ne() {
        return by_location;
    }
    let sign = |s: &SparseSignal| s.amplitudes[0].signum();
    let (sa, sb) = (sign(a), sign(b));
    lexicographic(
        a.amplitudes.iter().map(|x| x * sa),
        b.amplitudes.iter().map(|x| x * sb),
        amp_scale,
    )
}

/// Multiset of positive differences, stored as sorted `(difference,
/// multiplicity)` pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DifferenceMultiset {
    entries: Vec<(f64, usize)>,
}

impl DifferenceMultiset {
    /// Groups raw differences, merging values within `tol * max(1, d)`.
    pub fn from_differences(mut diffs: Vec<f64>, tol: f64) -> Self {
        diffs.sort_by(|a, b| a.total_cmp(b));
        let mut entries: Vec<(f64, usize)> = Vec::new();
        for d in diffs {
            match entries.last_mut() {
                Some((last, count)) if (d - *last).abs() <= tol * d.abs().max(1.0) => *count += 1,
                _ => entries.push((d, 1)),
            }
        }
        Self { entries }
    }

    /// Builds a multiset from explicit entries; differences must be positive.
    pub fn from_entries(mut entries: Vec<(f64, usize)>) -> Result<Self> {
        if entries.iter().any(|&(d, m)| !(d > 0.0) || m == 0) {
            return Err(Error::InconsistentMultiset(
                "differences must be positive with positive multiplicity".into(),
            ));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, usize)] {
        &self.entries
    }

    /// Total multiplicity.
    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_collision_free(&self) -> bool {
        self.entries.iter().all(|&(_, m)| m == 1)
    }

    pub fn multiplicity(&self, d: f64, tol: f64) -> usize {
        self.entries
            .iter()
            .filter(|(e, _)| (e - d).abs() <= tol)
            .map(|e| e.1)
            .sum()
    }

    pub fn max(&self) -> Option<f64> {
        self.entries.last().map(|e| e.0)
    }

    /// Number of spikes `k` with `k(k-1)/2` equal to the total multiplicity,
    /// if the total is triangular.
    pub fn implied_spike_count(&self) -> Option<usize> {
        let total = self.total();
        let k = ((1.0 + (1.0 + 8.0 * total as f64).sqrt()) / 2.0).round() as usize;
        (k * (k - 1) / 2 == total).then_some(k)
    }

    /// Differences expanded with multiplicity.
    pub fn expanded(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|&(d, m)| std::iter::repeat_n(d, m))
            .collect()
    }
}

#[derive(Deserialize)]
struct RawPiecewisePolynomial {
    knots: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    domain: [f64; 2],
    #[serde(default)]
    degree_bound: Option<usize>,
}

/// Piecewise polynomial on a closed interval, right-continuous at knots.
///
/// Coefficients are stored constant-first: `pieces[i][q]` multiplies `t^q`
/// on the `i`-th piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewisePolynomial")]
pub struct PiecewisePolynomial {
    knots: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    domain: [f64; 2],
    degree_bound: usize,
}

impl TryFrom<RawPiecewisePolynomial> for PiecewisePolynomial {
    type Error = Error;

    fn try_from(raw: RawPiecewisePolynomial) -> Result<Self> {
        Self::new(raw.knots, raw.pieces, raw.domain, raw.degree_bound)
    }
}

impl PiecewisePolynomial {
    /// `degree_bound` defaults to the largest piece degree.
    pub fn new(
        knots: Vec<f64>,
        pieces: Vec<Vec<f64>>,
        domain: [f64; 2],
        degree_bound: Option<usize>,
    ) -> Result<Self> {
        let [lo, hi] = domain;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidPolynomial(format!("bad domain [{lo}, {hi}]")));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPolynomial("knots must be strictly increasing".into()));
        }
        if knots.iter().any(|&u| !(u > lo && u < hi)) {
            return Err(Error::InvalidPolynomial("knots must be interior to the domain".into()));
        }
        if pieces.len() != knots.len() + 1 {
            return Err(Error::InvalidPolynomial(format!(
                "{} knots need {} pieces, got {}",
                knots.len(),
                knots.len() + 1,
                pieces.len()
            )));
        }
        if pieces.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPolynomial("non-finite coefficient".into()));
        }
        let widest = pieces.iter().map(|p| p.len()).max().unwrap_or(0);
        let degree_bound = degree_bound.unwrap_or(widest.saturating_sub(1));
        if widest > degree_bound + 1 {
            return Err(Error::InvalidPolynomial(format!(
                "a piece has {widest} coefficients but the degree bound is {degree_bound}"
            )));
        }
        Ok(Self {
            knots,
            pieces,
            domain,
            degree_bound,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn min_knot_gap(&self) -> Option<f64> {
        self.knots.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let piece = self.knots.partition_point(|&u| u <= t);
        self.pieces[piece]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * t + c)
    }

    /// Samples the polynomial on `t_min + n·h` across the whole domain.
    pub fn sample(&self, step: f64) -> Result<SampledSignal> {
        let [lo, hi] = self.domain;
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        SampledSignal::new(
            lo,
            step,
            (0..count).map(|n| self.evaluate(lo + n as f64 * step)).collect(),
        )
    }
}

/// Real samples `values[n]` at `origin + n·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub origin: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(origin: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("sampling step {step} must be positive")));
        }
        if values.is_empty() {
            return Err(Error::InvalidParameter("sampled signal has no values".into()));
        }
        Ok(Self { origin, step, values })
    }

    pub fn time(&self, n: usize) -> f64 {
        self.origin + n as f64 * self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Discrete L¹ mass `h·Σ|values|`.
    pub fn l1_mass(&self) -> f64 {
        self.step * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(locations: &[f64], amplitudes: &[f64]) -> SparseSignal {
        SparseSignal::new(locations.to_vec(), amplitudes.to_vec()).unwrap()
    }

    #[test]
    fn collision_example_difference_set() {
        let x = sig(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 1.0, -1.0]);
        let d = x.difference_set();
        assert_eq!(d.entries(), &[(1.0, 3), (2.0, 2), (3.0, 1)]);
        assert!(!x.is_collision_free());
        assert_eq!(d.implied_spike_count(), Some(4));
    }

    #[test]
    fn single_spike_has_empty_difference_set() {
        let x = sig(&[2.5], &[3.0]);
        assert!(x.difference_set().is_empty());
        assert!(x.is_collision_free());
        assert_eq!(x.difference_set().implied_spike_count(), Some(1));
    }

    #[test]
    fn golomb_triple() {
        let x = sig(&[0.0, 1.0, 3.0], &[1.0, 1.0, 1.0]);
        assert_eq!(x.difference_set().entries(), &[(1.0, 1), (2.0, 1), (3.0, 1)]);
        assert!(x.is_collision_free());
    }

    #[test]
    fn rejects_invalid_signals() {
        assert!(SparseSignal::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(SparseSignal::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(SparseSignal::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(sig(&[0.0, 0.3], &[1.0, 1.0]).with_grid_step(0.25).is_err());
        assert!(sig(&[0.0, 0.75], &[1.0, 1.0]).with_grid_step(0.25).is_ok());
    }

    #[test]
    fn canonical_form_applies_reflection_then_sign() {
        let x = sig(&[5.0, 7.0], &[1.0, -2.0]);
        let c = x.canonicalize();
        assert_eq!(c.locations(), &[0.0, 2.0]);
        assert_eq!(c.amplitudes(), &[2.0, -1.0]);
        assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn canonical_form_breaks_amplitude_ties_by_location() {
        let x = sig(&[0.0, 1.0, 3.0], &[1.0, 1.0, 1.0]);
        assert_eq!(x.canonicalize(), x.reflect().canonicalize());
        assert_eq!(x.canonicalize().locations(), &[0.0, 1.0, 3.0]);
    }

    #[test]
    fn equivalence_examples() {
        let x = sig(&[0.0, 1.0, 4.5], &[1.0, -2.0, 0.5]);
        assert!(x.equivalent_up_to_symmetry(&x.translate(17.3), 1e-12));
        assert!(x.equivalent_up_to_symmetry(&x.reflect().negate(), 1e-12));
        let a = sig(&[0.0, 1.0], &[1.0, 2.0]);
        let b = sig(&[0.0, 2.0], &[1.0, 2.0]);
        assert!(!a.equivalent_up_to_symmetry(&b, 1e-9));
    }

    #[test]
    fn signal_json_field_names() {
        let x = SparseSignal::on_grid(&[0, 3], vec![1.0, -1.0], 0.5).unwrap();
        let text = serde_json::to_string(&x).unwrap();
        assert_eq!(text, r#"{"locations":[0.0,1.5],"amplitudes":[1.0,-1.0],"grid_step":0.5}"#);
        let back: SparseSignal = serde_json::from_str(&text).unwrap();
        assert_eq!(back, x);
        let bad = r#"{"locations":[1.0,0.0],"amplitudes":[1.0,1.0]}"#;
        assert!(serde_json::from_str::<SparseSignal>(bad).is_err());
    }

    #[test]
    fn piecewise_polynomial_is_right_continuous() {
        let y = PiecewisePolynomial::new(vec![1.0], vec![vec![0.0], vec![1.0, 2.0]], [0.0, 2.0], None)
            .unwrap();
        assert_eq!(y.degree_bound(), 1);
        assert_eq!(y.evaluate(0.5), 0.0);
        assert_eq!(y.evaluate(1.0), 3.0);
        assert!(PiecewisePolynomial::new(vec![2.0], vec![vec![0.0], vec![1.0]], [0.0, 2.0], None).is_err());
        assert!(PiecewisePolynomial::new(vec![1.0], vec![vec![0.0, 1.0, 2.0], vec![1.0]], [0.0, 2.0], Some(1)).is_err());
    }
}
