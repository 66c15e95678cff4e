//! Seeded random instances: collision-free Dirac trains on a grid and
//! piecewise polynomials with separated knots.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::signal::{PiecewisePolynomial, SparseSignal};

pub const DEFAULT_REJECTION_BUDGET: usize = 10_000;

/// Number of grid samples spanned by generated piecewise polynomials.
pub const POLYNOMIAL_DOMAIN_SAMPLES: f64 = 1024.0;

/// Independent stream `task` of the generator seeded by `seed`.
pub fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

/// `count` i.i.d. standard-normal frequencies.
pub fn standard_normal_frequencies<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random amplitude with magnitude uniform in `[1/2, 2]` and a random sign.
pub fn random_amplitude<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let magnitude = rng.random_range(0.5..=2.0);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// A collision-free `k`-sparse signal on `{0, …, n-1} · grid_step`, drawn by
/// rejection on the location set.
pub fn random_collision_free<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    grid_step: f64,
    budget: usize,
    rng: &mut R,
) -> Result<SparseSignal> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::RejectionBudgetExhausted { budget: 0 });
    }
    for _ in 0..budget {
        let mut indices: Vec<i64> = sample(rng, n, k).into_iter().map(|i| i as i64).collect();
        indices.sort_unstable();
        if integer_collision_free(&indices) {
            let amplitudes = (0..k).map(|_| random_amplitude(rng)).collect();
            return SparseSignal::on_grid(&indices, amplitudes, grid_step);
        }
    }
    Err(Error::RejectionBudgetExhausted { budget })
}

pub fn integer_collision_free(sorted: &[i64]) -> bool {
    let mut seen = std::collections::HashSet::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            if !seen.insert(sorted[j] - sorted[i]) {
                return false;
            }
        }
    }
    true
}

/// A piecewise polynomial on `[0, 1024h]` with `knots` knots, pieces of
/// degree at most `m`, knot gaps and end margins of at least `2^{ℓ+1}`.
///
/// Coefficients are standard normal in the normalised variable `t / T`, so
/// values stay of order one over the domain.
pub fn random_piecewise_polynomial<R: Rng + ?Sized>(
    knots: usize,
    m: usize,
    ell: u32,
    h: f64,
    rng: &mut R,
) -> Result<PiecewisePolynomial> {
    let length = POLYNOMIAL_DOMAIN_SAMPLES * h;
    let gap = 2f64.powi(ell as i32 + 1);
    let room = length - 2.0 * gap - gap * knots.saturating_sub(1) as f64;
    if !(room > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{knots} knots with separation {gap} do not fit in [0, {length}]"
        )));
    }
    // spacings: uniform order statistics of the free room, then add the gaps
    let mut offsets: Vec<f64> = (0..knots).map(|_| rng.random_range(0.0..room)).collect();
    offsets.sort_by(|a, b| a.total_cmp(b));
    let knot_positions: Vec<f64> = offsets
        .iter()
        .enumerate()
        .map(|(i, &o)| gap + o + i as f64 * gap)
        .collect();
    let pieces: Vec<Vec<f64>> = (0..=knots)
        .map(|_| {
            (0..=m)
                .map(|q| {
                    let c: f64 = StandardNormal.sample(rng);
                    c / length.powi(q as i32)
                })
                .collect()
        })
        .collect();
    PiecewisePolynomial::new(knot_positions, pieces, [0.0, length], Some(m))
}
