//! Amplitude recovery from second-derivative jumps at adjacent differences.
//!
//! Each adjacent pair `(a_i, a_{i+1})` leaves the jump
//! `|a_i + a_{i+1} e^{iξΔ}|^p - |a_i|^p - |a_{i+1}|^p` at `s = Δ_{i,i+1}`.
//! Fitting it across frequencies yields pair invariants, chaining them fixes
//! the amplitudes up to the alternation `a_odd / c, c · a_even`, and the
//! norm together with the jump at `Δ_{1,3}` pins `c`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::jump_coefficient;
use crate::signal::SparseSignal;
use crate::support::{recover_support, SupportRecovery};

/// Relative RMS residual above which a pair fit is rejected.
pub const FIT_TOLERANCE: f64 = 1e-7;

/// Relative agreement used for downstream consistency checks and for the
/// `Δ_{1,3}` candidate test.
pub const MATCH_TOLERANCE: f64 = 1e-8;

const POLAR_GRID: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairInvariants {
    pub index: usize,
    pub product: f64,
    /// `a_i² + a_{i+1}²`; not identifiable from `p = 2` jumps alone.
    pub sum_squares: Option<f64>,
    pub fit_residual: f64,
}

/// Minimum number of distinct `|ξ|` values for an exponent `p`.
pub fn required_frequencies(p: u32) -> usize {
    if p % 2 == 0 {
        p as usize + 2
    } else {
        4 * p as usize + 2
    }
}

fn distinct_magnitudes(freqs: impl Iterator<Item = f64>) -> usize {
    let mut mags: Vec<f64> = freqs.map(f64::abs).collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    mags.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.max(1.0));
    mags.len()
}

fn check_frequencies(freqs: impl Iterator<Item = f64>, p: u32) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidParameter("exponent p must be at least 1".into()));
    }
    let got = distinct_magnitudes(freqs);
    let required = required_frequencies(p);
    if got < required {
        return Err(Error::InsufficientFrequencies { got, required });
    }
    Ok(())
}

/// `|a + b e^{iθ}|^p - |a|^p - |b|^p`.
fn pair_jump(a: f64, b: f64, theta: f64, p: u32) -> f64 {
    let q = (a * a + b * b + 2.0 * a * b * theta.cos()).max(0.0);
    q.powf(p as f64 / 2.0) - a.abs().powi(p as i32) - b.abs().powi(p as i32)
}

fn pair_jump_gradient(a: f64, b: f64, theta: f64, p: u32) -> [f64; 2] {
    let pf = p as f64;
    let c = theta.cos();
    let q = (a * a + b * b + 2.0 * a * b * c).max(1e-300);
    let outer = pf * q.powf(pf / 2.0 - 1.0);
    let edge = |x: f64| pf * x.abs().powi(p as i32 - 1) * x.signum();
    [outer * (a + b * c) - edge(a), outer * (b + a * c) - edge(b)]
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Fits the invariants of one adjacent pair from `(ξ, jump)` samples at the
/// pair's difference `delta`.
///
/// For `p = 2` the jump is `2P cos(ξΔ)`, so only the product is fitted and
/// the sum of squares needs one `(ξ, |β_{i,i+1}(ξ)|²)` sample. Other
/// exponents fit `(a, b)` directly: a polar grid search with the radius in
/// closed form, then Gauss–Newton. The returned `index` is 0.
pub fn fit_pair_invariants(
    jumps: &[(f64, f64)],
    delta: f64,
    p: u32,
    beta_sample: Option<(f64, f64)>,
) -> Result<PairInvariants> {
    check_frequencies(jumps.iter().map(|j| j.0), p)?;
    let scale = jumps.iter().fold(0.0f64, |m, j| m.max(j.1.abs())).max(f64::MIN_POSITIVE);
    let thetas: Vec<f64> = jumps.iter().map(|j| j.0 * delta).collect();

    let (product, sum_squares, residual) = if p == 2 {
        let cc: f64 = thetas.iter().map(|t| t.cos().powi(2)).sum();
        let jc: f64 = jumps.iter().zip(&thetas).map(|(j, t)| j.1 * t.cos()).sum();
        if cc <= 1e-12 * jumps.len() as f64 {
            return Err(Error::InsufficientFrequencies {
                got: 0,
                required: required_frequencies(p),
            });
        }
        let product = jc / (2.0 * cc);
        let residual = rms(jumps.iter().zip(&thetas).map(|(j, t)| j.1 - 2.0 * product * t.cos()));
        let sum_squares = beta_sample.map(|(xi, value)| value - 2.0 * product * (xi * delta).cos());
        (product, sum_squares, residual)
    } else {
        let (a, b, residual) = fit_general(jumps, &thetas, p);
        (a * b, Some(a * a + b * b), residual)
    };

    if residual > FIT_TOLERANCE * scale {
        return Err(Error::FitFailure {
            residual,
            tolerance: FIT_TOLERANCE * scale,
        });
    }
    Ok(PairInvariants {
        index: 0,
        product,
        sum_squares,
        fit_residual: residual,
    })
}

fn fit_general(jumps: &[(f64, f64)], thetas: &[f64], p: u32) -> (f64, f64, f64) {
    let values: Vec<f64> = jumps.iter().map(|j| j.1).collect();
    let residual_of = |a: f64, b: f64| {
        rms(values.iter().zip(thetas).map(|(v, &t)| v - pair_jump(a, b, t, p)))
    };

    // (a, b) = ρ (cos φ, sin φ) with φ ∈ [-π/4, π/4] covers every pair up to
    // swap and joint sign; the jump is ρ^p times a function of φ.
    let quarter = std::f64::consts::FRAC_PI_4;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for n in 0..=POLAR_GRID {
        let phi = -quarter + 2.0 * quarter * n as f64 / POLAR_GRID as f64;
        let (c, s) = (phi.cos(), phi.sin());
        let g: Vec<f64> = thetas.iter().map(|&t| pair_jump(c, s, t, p)).collect();
        let gg: f64 = g.iter().map(|x| x * x).sum();
        if gg == 0.0 {
            continue;
        }
        let t = (g.iter().zip(&values).map(|(x, v)| x * v).sum::<f64>() / gg).max(0.0);
        let r: f64 = g.iter().zip(&values).map(|(x, v)| (v - t * x).powi(2)).sum();
        if r < best.0 {
            let rho = t.powf(1.0 / p as f64);
            best = (r, rho * c, rho * s);
        }
    }

    let (mut a, mut b) = (best.1, best.2);
    let mut current = residual_of(a, b);
    for _ in 0..100 {
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (v, &t) in values.iter().zip(thetas) {
            let r = v - pair_jump(a, b, t, p);
            let g = pair_jump_gradient(a, b, t, p);
            for i in 0..2 {
                jtr[i] += g[i] * r;
                for j in 0..2 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let da = (jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let db = (jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-6 {
            let (na, nb) = (a + step * da, b + step * db);
            let r = residual_of(na, nb);
            if r < current {
                a = na;
                b = nb;
                current = r;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved || current == 0.0 {
            break;
        }
    }
    (a, b, current)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub candidates: Vec<Vec<f64>>,
    /// The candidates are representatives of the alternation family rather
    /// than fully determined vectors.
    pub family: bool,
}

/// Propagates `a_{i+1} = P_i / a_i` along the chain.
///
/// With a known first sum of squares both roots for `a_1` are tried and
/// every available downstream sum of squares must agree; otherwise the
/// `a_1 = √|P_1|` representative of the alternation family is returned.
pub fn chain_amplitudes(pairs: &[PairInvariants], k: usize) -> Result<ChainResult> {
    if k == 0 || pairs.len() + 1 != k {
        return Err(Error::InvalidParameter(format!(
            "{} pair invariants for {k} spikes",
            pairs.len()
        )));
    }
    if k == 1 {
        return Ok(ChainResult {
            candidates: vec![vec![1.0]],
            family: true,
        });
    }
    if let Some(pair) = pairs.iter().find(|p| p.product == 0.0 || !p.product.is_finite()) {
        return Err(Error::InconsistentInvariants(format!(
            "pair {} has a zero product",
            pair.index
        )));
    }
    let propagate = |first: f64| {
        let mut a = vec![first];
        for pair in pairs {
            let last = *a.last().unwrap();
            a.push(pair.product / last);
        }
        a
    };

    let Some(s1) = pairs[0].sum_squares else {
        return Ok(ChainResult {
            candidates: vec![propagate(pairs[0].product.abs().sqrt())],
            family: true,
        });
    };
    let p1 = pairs[0].product;
    let disc = s1 * s1 - 4.0 * p1 * p1;
    if disc < -MATCH_TOLERANCE * s1 * s1 {
        return Err(Error::InconsistentInvariants(format!(
            "sum of squares {s1} is below 2|product| = {}",
            2.0 * p1.abs()
        )));
    }
    let root = disc.max(0.0).sqrt();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for first_sq in [(s1 + root) / 2.0, (s1 - root) / 2.0] {
        let a = propagate(first_sq.sqrt());
        let consistent = pairs.iter().zip(a.windows(2)).all(|(pair, w)| match pair.sum_squares {
            Some(s) => (w[0] * w[0] + w[1] * w[1] - s).abs() <= MATCH_TOLERANCE * s.abs().max(f64::MIN_POSITIVE),
            None => true,
        });
        let duplicate = candidates.iter().any(|c| {
            c.iter().zip(&a).all(|(x, y)| (x - y).abs() <= MATCH_TOLERANCE * x.abs().max(1.0))
        });
        if consistent && !duplicate {
            candidates.push(a);
        }
    }
    if candidates.is_empty() {
        return Err(Error::InconsistentInvariants(
            "no root for the first amplitude satisfies every pair".into(),
        ));
    }
    Ok(ChainResult {
        candidates,
        family: false,
    })
}

/// Applies the alternation `a_i / c` (even 0-based index), `c · a_i` (odd).
pub fn alternate(representative: &[f64], c: f64) -> Vec<f64> {
    representative
        .iter()
        .enumerate()
        .map(|(i, &r)| if i % 2 == 0 { r / c } else { c * r })
        .collect()
}

/// The alternation parameters `c > 0` for which `‖alternate(r, c)‖_p = norm`.
pub fn alternation_roots(representative: &[f64], norm: f64, p: u32) -> Result<Vec<f64>> {
    let pi = p as i32;
    let (mut odd, mut even) = (0.0, 0.0);
    for (i, r) in representative.iter().enumerate() {
        if i % 2 == 0 {
            odd += r.abs().powi(pi);
        } else {
            even += r.abs().powi(pi);
        }
    }
    let target = norm.powi(pi);
    if !(target > 0.0) || odd == 0.0 {
        return Err(Error::InvalidParameter("norm and amplitudes must be nonzero".into()));
    }
    let inv_p = 1.0 / p as f64;
    if even == 0.0 {
        return Ok(vec![(odd / target).powf(inv_p)]);
    }
    // even u² - target u + odd = 0 with u = c^p
    let disc = target * target - 4.0 * even * odd;
    if disc < -MATCH_TOLERANCE * target * target {
        return Err(Error::InconsistentInvariants(format!(
            "norm {norm} is too small for the pair products"
        )));
    }
    let root = disc.max(0.0).sqrt();
    let hi = (target + root) / (2.0 * even);
    let lo = odd / (even * hi);
    let (c_hi, c_lo) = (hi.powf(inv_p), lo.powf(inv_p));
    if (c_hi - c_lo).abs() <= 1e-12 * c_hi {
        Ok(vec![c_hi])
    } else {
        Ok(vec![c_hi, c_lo])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternation {
    pub amplitudes: Vec<f64>,
    pub candidate_c: Vec<f64>,
}

/// Picks the member of the alternation family with the given norm whose
/// `Δ_{1,3}` jump at `ξ_L` matches `extra_jump = (ξ_L, value)`.
///
/// Two spikes are settled by the norm alone (the two roots are reflections
/// of each other), and the candidate with the larger leading amplitude is
/// returned.
pub fn resolve_alternation(
    representative: &[f64],
    norm: f64,
    p: u32,
    extra_jump: Option<(f64, f64)>,
    locations: &[f64],
) -> Result<Alternation> {
    if representative.len() != locations.len() || representative.is_empty() {
        return Err(Error::InvalidParameter(
            "representative and support lengths differ".into(),
        ));
    }
    let roots = alternation_roots(representative, norm, p)?;
    let candidates: Vec<Vec<f64>> = roots.iter().map(|&c| alternate(representative, c)).collect();
    if candidates.len() == 1 {
        return Ok(Alternation {
            amplitudes: candidates.into_iter().next().unwrap(),
            candidate_c: roots,
        });
    }
    if representative.len() == 2 {
        let amplitudes = candidates
            .into_iter()
            .max_by(|x, y| x[0].abs().total_cmp(&y[0].abs()))
            .unwrap();
        return Ok(Alternation {
            amplitudes,
            candidate_c: roots,
        });
    }
    let (xi, observed) = extra_jump.ok_or_else(|| {
        Error::InvalidParameter("three or more spikes need the jump at Δ_{1,3}".into())
    })?;
    let predicted = candidates
        .iter()
        .map(|a| {
            let x = SparseSignal::new(locations.to_vec(), a.clone())?;
            jump_coefficient(&x, 0, 2, xi, p)
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = predicted
        .iter()
        .fold(observed.abs(), |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let matching: Vec<usize> = (0..candidates.len())
        .filter(|&n| (predicted[n] - observed).abs() <= MATCH_TOLERANCE * scale)
        .collect();
    match matching.as_slice() {
        [n] => Ok(Alternation {
            amplitudes: candidates[*n].clone(),
            candidate_c: roots,
        }),
        [] => Err(Error::InconsistentInvariants(format!(
            "no candidate reproduces the Δ_(1,3) jump {observed}"
        ))),
        _ => Err(Error::Unresolvable(format!(
            "both candidates reproduce the Δ_(1,3) jump at ξ = {xi}"
        ))),
    }
}

/// Second-derivative mass of a sampled piecewise-linear sweep at scale `d`.
///
/// If `d` is a sample, the slopes on either side are compared; otherwise the
/// slopes of the segments flanking the one containing `d`.
pub fn sweep_jump(sweep: &[(f64, f64)], d: f64) -> Result<f64> {
    let slope = |n: usize| (sweep[n + 1].1 - sweep[n].1) / (sweep[n + 1].0 - sweep[n].0);
    let n = sweep.partition_point(|s| s.0 <= d);
    let tol = 1e-9 * d.abs().max(1.0);
    if n > 0 && (sweep[n - 1].0 - d).abs() <= tol {
        let at = n - 1;
        if at >= 1 && at + 1 < sweep.len() {
            return Ok(slope(at) - slope(at - 1));
        }
    } else if n < sweep.len() && (sweep[n].0 - d).abs() <= tol {
        if n >= 1 && n + 1 < sweep.len() {
            return Ok(slope(n) - slope(n - 1));
        }
    } else if n >= 2 && n + 1 < sweep.len() {
        // d lies inside segment n - 1
        return Ok(slope(n) - slope(n - 2));
    }
    Err(Error::InsufficientSamples(sweep.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub p: u32,
    /// `‖a‖_p`, supplied as a side measurement.
    pub norm: f64,
    pub grid_step: f64,
    pub rel_tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecoveryDiagnostics {
    pub fit_residuals: Vec<f64>,
    pub candidate_c: Vec<f64>,
    pub redraws: usize,
    pub support_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub signals: Vec<SparseSignal>,
    pub ambiguous: bool,
    pub diagnostics: RecoveryDiagnostics,
}

/// Support recovery followed by pair fits, chaining and the alternation
/// test. `sweeps[ℓ]` holds `(s, f_{ξ_ℓ}(s)^p)` for the indicator window.
///
/// The `Δ_{1,3}` test uses the last frequency first; if it cannot separate
/// the candidates the remaining frequencies are tried in a seeded order and
/// each retry counts as a redraw.
pub fn recover_signal(sweeps: &[Vec<(f64, f64)>], freqs: &[f64], config: &RecoveryConfig) -> Result<Recovery> {
    check_frequencies(freqs.iter().copied(), config.p)?;
    if !(config.norm > 0.0) {
        return Err(Error::InvalidParameter("the norm side input must be positive".into()));
    }
    let support = recover_support(sweeps, freqs, config.grid_step, config.rel_tol)?;
    recover_amplitudes(&support, sweeps, freqs, config)
}

/// Amplitude stage of [`recover_signal`] for an already recovered support.
pub fn recover_amplitudes(
    support: &SupportRecovery,
    sweeps: &[Vec<(f64, f64)>],
    freqs: &[f64],
    config: &RecoveryConfig,
) -> Result<Recovery> {
    let mut diagnostics = RecoveryDiagnostics {
        support_candidates: support.candidates.len(),
        ..Default::default()
    };
    let mut order: Vec<usize> = (0..freqs.len().saturating_sub(1)).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    order.insert(0, freqs.len() - 1);

    let mut signals: Vec<SparseSignal> = Vec::new();
    let mut first_error = None;
    for locations in &support.candidates {
        match recover_on_support(locations, sweeps, freqs, config, &order, &mut diagnostics) {
            Ok(found) => {
                for x in found {
                    let x = x.with_grid_step(config.grid_step)?;
                    if !signals.iter().any(|s| s.equivalent_up_to_symmetry(&x, 1e-9 * config.norm)) {
                        signals.push(x);
                    }
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if signals.is_empty() {
        return Err(first_error.unwrap_or_else(|| Error::Unresolvable("no candidate support".into())));
    }
    Ok(Recovery {
        ambiguous: support.ambiguous || signals.len() > 1,
        signals,
        diagnostics,
    })
}

fn recover_on_support(
    locations: &[f64],
    sweeps: &[Vec<(f64, f64)>],
    freqs: &[f64],
    config: &RecoveryConfig,
    order: &[usize],
    diagnostics: &mut RecoveryDiagnostics,
) -> Result<Vec<SparseSignal>> {
    let k = locations.len();
    let p = config.p;
    let mut pairs = Vec::with_capacity(k.saturating_sub(1));
    for i in 0..k.saturating_sub(1) {
        let delta = locations[i + 1] - locations[i];
        let jumps = freqs
            .iter()
            .zip(sweeps)
            .map(|(&xi, sweep)| Ok((xi, sweep_jump(sweep, delta)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut pair = fit_pair_invariants(&jumps, delta, p, None)?;
        pair.index = i;
        diagnostics.fit_residuals.push(pair.fit_residual);
        pairs.push(pair);
    }
    let chain = chain_amplitudes(&pairs, k)?;

    let mut found = Vec::new();
    for representative in &chain.candidates {
        let mut outcome = None;
        for (attempt, &l) in order.iter().enumerate() {
            let extra = if k >= 3 {
                Some((freqs[l], sweep_jump(&sweeps[l], locations[2] - locations[0])?))
            } else {
                None
            };
            match resolve_alternation(representative, config.norm, p, extra, locations) {
                Err(Error::Unresolvable(msg)) => {
                    diagnostics.redraws += 1;
                    if attempt + 1 == order.len() {
                        return Err(Error::Unresolvable(msg));
                    }
                }
                other => {
                    outcome = Some(other?);
                    break;
                }
            }
        }
        let alternation = outcome.expect("order is nonempty");
        diagnostics.candidate_c.extend(&alternation.candidate_c);
        found.push(SparseSignal::new(locations.to_vec(), alternation.amplitudes)?);
    }
    Ok(found)
}
