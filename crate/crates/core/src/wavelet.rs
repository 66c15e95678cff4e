//! First layer: compactly supported wavelet, convolution, modulus and max
//! pooling, turning a piecewise polynomial into a Dirac train.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::signal::{PiecewisePolynomial, SampledSignal, SparseSignal};

/// Relative tolerance of the discrete vanishing-moment check.
pub const MOMENT_TOLERANCE: f64 = 1e-9;

/// Relative amplitude floor applied by max pooling.
pub const POOL_FLOOR: f64 = 1e-9;

/// Largest moment order probed when counting vanishing moments.
const MAX_PROBED_MOMENTS: usize = 12;

/// Sampled mother wavelet supported in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotherWavelet {
    /// Nonzero taps only; `taps.origin` is the time of the first tap.
    pub taps: SampledSignal,
    /// Number of discrete vanishing moments verified on the grid.
    pub moment_order: usize,
    /// Factor that brought the peak absolute tap to 1.
    pub normalization: f64,
}

impl MotherWavelet {
    pub fn step(&self) -> f64 {
        self.taps.step
    }
}

/// `|Σ_n taps[n]·t_n^q·h|` for each `q < count`, relative to `Σ|taps|·h`.
pub fn relative_moments(taps: &SampledSignal, count: usize) -> Vec<f64> {
    let mass = taps.l1_mass();
    (0..count)
        .map(|q| {
            let moment: f64 = taps
                .values
                .iter()
                .enumerate()
                .map(|(n, v)| v * taps.time(n).powi(q as i32))
                .sum::<f64>()
                * taps.step;
            moment.abs() / mass
        })
        .collect()
}

fn count_vanishing_moments(taps: &SampledSignal) -> usize {
    relative_moments(taps, MAX_PROBED_MOMENTS)
        .iter()
        .take_while(|&&r| r <= MOMENT_TOLERANCE)
        .count()
}

/// Builds a wavelet with at least `m + 1` vanishing moments on the grid `hℤ`.
///
/// The taps are the `(m+1)`-fold finite difference (stride `r` samples) of a
/// smooth bump, so every polynomial of degree `≤ m` sampled on the grid is
/// annihilated exactly up to rounding. When the grid is fine enough
/// (`1/h ≥ 2m + 6`) the taps occupy less than `[-1/2, 1/2]`, which keeps the
/// responses of knots `2^{ℓ+1}` apart out of each other's pooling windows.
pub fn make_wavelet(m: usize, h: f64) -> Result<MotherWavelet> {
    let required = 2 * (m + 2) + 1;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::GridTooCoarse { step: h, required });
    }
    let per_unit = (1.0 / h + 1e-9).floor();
    if per_unit < (m + 2) as f64 {
        return Err(Error::GridTooCoarse { step: h, required });
    }
    let per_unit = per_unit as usize;
    let order = m + 1;
    let tap_count = if per_unit >= 2 * m + 6 {
        per_unit - 2
    } else {
        2 * per_unit - 1
    };
    let stride = ((tap_count - 1) / (2 * order)).max(1);
    let bump_len = tap_count - order * stride;

    let mut seq: Vec<f64> = (0..bump_len)
        .map(|i| {
            let u = 2.0 * (i + 1) as f64 / (bump_len + 1) as f64 - 1.0;
            (-1.0 / (1.0 - u * u)).exp()
        })
        .collect();
    for _ in 0..order {
        let mut next = vec![0.0; seq.len() + stride];
        for (n, out) in next.iter_mut().enumerate() {
            let ahead = seq.get(n).copied().unwrap_or(0.0);
            let behind = if n >= stride { seq.get(n - stride).copied().unwrap_or(0.0) } else { 0.0 };
            *out = ahead - behind;
        }
        seq = next;
    }
    debug_assert_eq!(seq.len(), tap_count);

    let peak = seq.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let normalization = 1.0 / peak;
    seq.iter_mut().for_each(|v| *v *= normalization);

    let first = -(((tap_count - 1) / 2) as f64);
    let taps = SampledSignal::new(first * h, h, seq)?;
    let moment_order = count_vanishing_moments(&taps);
    if moment_order < order {
        return Err(Error::InvalidParameter(format!(
            "wavelet construction verified only {moment_order} of {order} vanishing moments"
        )));
    }
    Ok(MotherWavelet {
        taps,
        moment_order,
        normalization,
    })
}

/// `ψ_ℓ(t) = 2^{-ℓ} ψ(t / 2^ℓ)` on the same step `h`.
///
/// Each tap is held over `2^ℓ` consecutive samples (zero-order hold), which
/// keeps the discrete vanishing moments and the discrete L¹ mass exact.
pub fn dilate(psi: &MotherWavelet, ell: u32) -> SampledSignal {
    let taps = &psi.taps;
    if ell == 0 {
        return taps.clone();
    }
    let factor = 1usize << ell;
    let h = taps.step;
    let first = (taps.origin / h).round() as i64;
    let origin = (first * factor as i64 - (factor / 2) as i64) as f64 * h;
    let scale = 1.0 / factor as f64;
    let values = taps
        .values
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v * scale, factor))
        .collect();
    SampledSignal {
        origin,
        step: h,
        values,
    }
}

fn check_steps(a: &SampledSignal, b: &SampledSignal) -> Result<()> {
    if (a.step - b.step).abs() > 1e-12 * a.step.max(b.step) {
        return Err(Error::StepMismatch(a.step, b.step));
    }
    Ok(())
}

/// Full discrete convolution scaled by `h` (Riemann approximation of the
/// continuous convolution). The output origin is the sum of the origins.
pub fn convolve(signal: &SampledSignal, filter: &SampledSignal) -> Result<SampledSignal> {
    check_steps(signal, filter)?;
    let (ls, lf) = (signal.len(), filter.len());
    let h = signal.step;
    let mut out = vec![0.0; ls + lf - 1];
    for (i, &s) in signal.values.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for (j, &f) in filter.values.iter().enumerate() {
            out[i + j] += s * f;
        }
    }
    out.iter_mut().for_each(|v| *v *= h);
    SampledSignal::new(signal.origin + filter.origin, h, out)
}

/// Convolution restricted to outputs whose filter support lies inside the
/// sampled domain, so domain edges never look like knots.
pub fn convolve_valid(signal: &SampledSignal, filter: &SampledSignal) -> Result<SampledSignal> {
    check_steps(signal, filter)?;
    let (ls, lf) = (signal.len(), filter.len());
    if ls < lf {
        return Err(Error::InvalidParameter(format!(
            "signal has {ls} samples, shorter than the {lf}-tap filter"
        )));
    }
    let h = signal.step;
    let out: Vec<f64> = (lf - 1..ls)
        .map(|n| {
            h * filter
                .values
                .iter()
                .enumerate()
                .map(|(j, f)| f * signal.values[n - j])
                .sum::<f64>()
        })
        .collect();
    SampledSignal::new(signal.origin + filter.origin + (lf - 1) as f64 * h, h, out)
}

/// Max pooling with the default floor `1e-9 · max z`.
pub fn max_pool(z: &SampledSignal, ell: u32, h: f64) -> Result<SparseSignal> {
    if (z.step - h).abs() > 1e-12 * h.max(z.step) {
        return Err(Error::StepMismatch(z.step, h));
    }
    let peak = z.sup_norm();
    max_pool_with_floor(z, ell, POOL_FLOOR * peak)
}

/// Keeps samples that are the maximum over the centred window
/// `[t - 2^ℓ, t + 2^ℓ] ∩ hℤ` and exceed `floor`; survivors less than `2^ℓ`
/// apart (a plateau) collapse onto the leftmost one.
pub fn max_pool_with_floor(z: &SampledSignal, ell: u32, floor: f64) -> Result<SparseSignal> {
    if z.values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "max pooling expects a nonnegative input (apply the modulus first)".into(),
        ));
    }
    let h = z.step;
    let reach = 2f64.powi(ell as i32);
    let radius = (reach / h + 1e-9).floor() as usize;
    let window_max = sliding_max(&z.values, radius);

    let mut locations = Vec::new();
    let mut amplitudes = Vec::new();
    let mut last_survivor: Option<f64> = None;
    for (n, (&value, &top)) in z.values.iter().zip(&window_max).enumerate() {
        if !(value > floor && value >= top) {
            continue;
        }
        let t = z.time(n);
        let joins_run = last_survivor.is_some_and(|prev| t - prev <= reach * (1.0 + 1e-12));
        last_survivor = Some(t);
        if !joins_run {
            locations.push(t);
            amplitudes.push(value);
        }
    }
    let pooled = SparseSignal::new(locations, amplitudes)?;
    let on_grid = (z.origin / h - (z.origin / h).round()).abs() < 1e-9;
    Ok(if on_grid {
        pooled.clone().with_grid_step(h).unwrap_or(pooled)
    } else {
        pooled
    })
}

/// `out[i] = max(values[i-r ..= i+r])`, clipped at the ends.
fn sliding_max(values: &[f64], radius: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for (i, slot) in out.iter_mut().enumerate() {
        let hi = (i + radius).min(n - 1);
        while next <= hi {
            while window.back().is_some_and(|&b| values[b] <= values[next]) {
                window.pop_back();
            }
            window.push_back(next);
            next += 1;
        }
        while window.front().is_some_and(|&f| f + radius < i) {
            window.pop_front();
        }
        *slot = values[*window.front().expect("window never empty")];
    }
    out
}

/// Intermediate stages of [`sparsify`], kept for plotting.
#[derive(Debug, Clone)]
pub struct SparsifyStages {
    pub samples: SampledSignal,
    pub filter: SampledSignal,
    pub response: SampledSignal,
    pub spikes: SparseSignal,
}

/// `MP_ℓ(|ψ_ℓ ⋆ y|)`.
pub fn sparsify(y: &PiecewisePolynomial, ell: u32, h: f64) -> Result<SparseSignal> {
    Ok(sparsify_stages(y, ell, h)?.spikes)
}

pub fn sparsify_stages(y: &PiecewisePolynomial, ell: u32, h: f64) -> Result<SparsifyStages> {
    let reach = 2f64.powi(ell as i32 + 1);
    if let Some(gap) = y.min_knot_gap() {
        if reach > gap * (1.0 + 1e-12) {
            return Err(Error::SeparationViolation { required: reach, gap });
        }
    }
    let psi = make_wavelet(y.degree_bound(), h)?;
    let filter = dilate(&psi, ell);
    let samples = y.sample(h)?;
    let response = convolve_valid(&samples, &filter)?;
    let modulus = SampledSignal {
        values: response.values.iter().map(|v| v.abs()).collect(),
        ..response.clone()
    };
    // rounding residue of the annihilated polynomial parts scales with the input
    let residue = POOL_FLOOR * samples.sup_norm() * filter.l1_mass();
    let floor = (POOL_FLOOR * modulus.sup_norm()).max(residue);
    let spikes = max_pool_with_floor(&modulus, ell, floor)?;
    Ok(SparsifyStages {
        samples,
        filter,
        response,
        spikes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_like_wavelet_for_constant_annihilation() {
        let psi = make_wavelet(0, 1.0 / 64.0).unwrap();
        let sum: f64 = psi.taps.values.iter().sum();
        assert!(sum.abs() <= 1e-12);
        let n = psi.taps.len();
        for i in 0..n {
            let mirrored = psi.taps.values[n - 1 - i];
            assert!((psi.taps.values[i] + mirrored).abs() < 1e-12, "not antisymmetric");
        }
        let peak = psi.taps.sup_norm();
        assert!((peak - 1.0).abs() < 1e-15);
    }

    #[test]
    fn second_order_wavelet_kills_quadratics() {
        let psi = make_wavelet(2, 1.0 / 100.0).unwrap();
        assert!(psi.moment_order >= 3);
        for r in relative_moments(&psi.taps, 3) {
            assert!(r <= 1e-9, "moment {r}");
        }
    }

    #[test]
    fn cubic_wavelet_on_fine_grid() {
        let psi = make_wavelet(3, 1.0 / 512.0).unwrap();
        assert!(psi.moment_order >= 4);
        let t_first = psi.taps.origin;
        let t_last = psi.taps.time(psi.taps.len() - 1);
        assert!(t_first >= -1.0 && t_last <= 1.0);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(matches!(make_wavelet(3, 0.25), Err(Error::GridTooCoarse { .. })));
        assert!(make_wavelet(3, 0.2).is_ok());
    }

    #[test]
    fn dilation_scales_support_and_amplitude() {
        let psi = make_wavelet(1, 1.0 / 32.0).unwrap();
        assert_eq!(dilate(&psi, 0), psi.taps);
        let d1 = dilate(&psi, 1);
        assert_eq!(d1.len(), 2 * psi.taps.len());
        assert!((d1.sup_norm() - 0.5).abs() < 1e-15);
        assert!((d1.l1_mass() - psi.taps.l1_mass()).abs() <= 1e-12 * psi.taps.l1_mass());
        let d3 = dilate(&psi, 3);
        assert!(d3.origin >= -8.0 && d3.time(d3.len() - 1) <= 8.0);
        for r in relative_moments(&d3, 2) {
            assert!(r <= 1e-8);
        }
    }

    #[test]
    fn unit_dirac_is_convolution_identity() {
        let h = 0.125;
        let s = SampledSignal::new(1.0, h, vec![1.0, -2.0, 3.5, 0.25]).unwrap();
        let dirac = SampledSignal::new(0.0, h, vec![1.0 / h]).unwrap();
        let out = convolve(&s, &dirac).unwrap();
        assert_eq!(out.origin, 1.0);
        for (a, b) in out.values.iter().zip(&s.values) {
            assert!((a - b).abs() < 1e-15);
        }
        let other = SampledSignal::new(0.0, 0.25, vec![1.0]).unwrap();
        assert!(matches!(convolve(&s, &other), Err(Error::StepMismatch(..))));
    }

    #[test]
    fn single_peak_pools_to_one_spike() {
        let z = SampledSignal::new(0.0, 0.5, vec![0.0, 0.1, 0.7, 2.0, 0.4, 0.0, 0.0]).unwrap();
        let pooled = max_pool(&z, 0, 0.5).unwrap();
        assert_eq!(pooled.locations(), &[1.5]);
        assert_eq!(pooled.amplitudes(), &[2.0]);
    }

    #[test]
    fn zero_input_pools_to_nothing() {
        let z = SampledSignal::new(0.0, 0.5, vec![0.0; 20]).unwrap();
        assert!(max_pool(&z, 1, 0.5).unwrap().is_empty());
    }

    #[test]
    fn two_separated_equal_peaks() {
        // 2^1 = 2 time units = 8 samples; peaks 20 samples apart > 2^{ℓ+1}
        let mut values = vec![0.0; 40];
        values[10] = 1.0;
        values[30] = 1.0;
        let z = SampledSignal::new(0.0, 0.25, values).unwrap();
        let pooled = max_pool(&z, 1, 0.25).unwrap();
        assert_eq!(pooled.locations(), &[2.5, 7.5]);
    }

    #[test]
    fn plateau_collapses_to_leftmost() {
        let z = SampledSignal::new(0.0, 1.0, vec![0.0, 1.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let pooled = max_pool(&z, 1, 1.0).unwrap();
        assert_eq!(pooled.locations(), &[1.0]);
    }

    #[test]
    fn knot_free_polynomial_sparsifies_to_nothing() {
        let h = 1.0 / 16.0;
        let y = PiecewisePolynomial::new(vec![], vec![vec![0.3, -0.02, 0.001]], [0.0, 1024.0 * h], None)
            .unwrap();
        assert!(sparsify(&y, 1, h).unwrap().is_empty());
    }

    #[test]
    fn step_function_spikes_near_knots() {
        let h = 1.0 / 16.0;
        let knots = vec![100.0 * h, 500.0 * h, 900.0 * h];
        let y = PiecewisePolynomial::new(
            knots.clone(),
            vec![vec![0.0], vec![1.0], vec![-0.5], vec![2.0]],
            [0.0, 1024.0 * h],
            None,
        )
        .unwrap();
        let ell = 2;
        let spikes = sparsify(&y, ell, h).unwrap();
        assert_eq!(spikes.len(), 3);
        for (v, u) in spikes.locations().iter().zip(&knots) {
            assert!((v - u).abs() <= 4.0);
        }
        assert!(spikes.amplitudes().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn separation_is_checked() {
        let h = 1.0 / 16.0;
        let y = PiecewisePolynomial::new(
            vec![10.0, 12.0],
            vec![vec![0.0], vec![1.0], vec![0.0]],
            [0.0, 64.0],
            None,
        )
        .unwrap();
        assert!(matches!(sparsify(&y, 1, h), Err(Error::SeparationViolation { .. })));
        assert!(sparsify(&y, 0, h).is_ok());
    }
}
