//! Support recovery: knots of the piecewise-linear sweep `s ↦ f_ξ(s)^p` give
//! the difference set, and a turnpike solver rebuilds the locations.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::DifferenceMultiset;

/// Default relative slope-change threshold for exact (analytic) sweeps.
pub const DEFAULT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotEstimate {
    pub location: f64,
    pub jump: f64,
    pub confidence: f64,
}

/// Scales `h/2, h, 3h/2, …` up to at least `max_difference + h`.
///
/// Every grid difference lands on a sample and every gap between
/// consecutive differences contains one.
pub fn recommended_scales(max_difference: f64, grid_step: f64) -> Vec<f64> {
    let half = grid_step / 2.0;
    let count = ((max_difference + grid_step) / half).ceil() as usize;
    (1..=count).map(|n| n as f64 * half).collect()
}

fn validate_sweep(sweep: &[(f64, f64)]) -> Result<()> {
    if sweep.len() < 3 {
        return Err(Error::InsufficientSamples(sweep.len()));
    }
    if sweep.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InsufficientSamples(sweep.len()));
    }
    Ok(())
}

/// Breakpoints of a sampled piecewise-linear function.
///
/// A slope change at an interior sample above `rel_tol · max|slope|` flags
/// that sample. A flagged sample is a knot on its own; two adjacent flagged
/// samples with unflagged neighbours bracket a knot strictly inside their
/// segment, which is located by intersecting the two flanking lines.
pub fn detect_knots(sweep: &[(f64, f64)], rel_tol: f64) -> Result<Vec<KnotEstimate>> {
    validate_sweep(sweep)?;
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter("rel_tol must be positive".into()));
    }
    let slopes: Vec<f64> = sweep
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let max_slope = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if max_slope == 0.0 {
        return Ok(Vec::new());
    }
    let threshold = rel_tol * max_slope;
    // flagged[n] refers to sample n + 1, between segments n and n + 1
    let changes: Vec<f64> = slopes.windows(2).map(|w| w[1] - w[0]).collect();
    let flagged: Vec<bool> = changes.iter().map(|c| c.abs() > threshold).collect();

    let mut knots = Vec::new();
    let mut n = 0;
    while n < flagged.len() {
        if !flagged[n] {
            n += 1;
            continue;
        }
        let pair = n + 1 < flagged.len()
            && flagged[n + 1]
            && (n == 0 || !flagged[n - 1])
            && (n + 2 >= flagged.len() || !flagged[n + 2]);
        if pair {
            // segments n and n + 2 flank segment n + 1, which holds the knot
            let (s0, f0) = sweep[n + 1];
            let (s1, _) = sweep[n + 2];
            let (left, right) = (slopes[n], slopes[n + 2]);
            let (_, g1) = sweep[n + 2];
            let jump = right - left;
            let crossing = if jump.abs() > 0.0 {
                // f0 + left (t - s0) = g1 + right (t - s1)
                (g1 - f0 + left * s0 - right * s1) / (left - right)
            } else {
                f64::NAN
            };
            if crossing.is_finite() && crossing >= s0 && crossing <= s1 {
                knots.push(KnotEstimate {
                    location: crossing,
                    jump,
                    confidence: jump.abs() / threshold,
                });
                n += 2;
                continue;
            }
        }
        knots.push(KnotEstimate {
            location: sweep[n + 1].0,
            jump: changes[n],
            confidence: changes[n].abs() / threshold,
        });
        n += 1;
    }
    Ok(knots)
}

fn resolution(sweep: &[(f64, f64)]) -> f64 {
    sweep
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .fold(0.0, f64::max)
}

/// Union of the knots found in each frequency's sweep, clustered within the
/// coarsest scale spacing, each with multiplicity one.
pub fn estimate_difference_set(
    sweeps: &[Vec<(f64, f64)>],
    freqs: &[f64],
    rel_tol: f64,
) -> Result<DifferenceMultiset> {
    if sweeps.is_empty() || sweeps.len() != freqs.len() {
        return Err(Error::InvalidParameter(format!(
            "{} sweeps for {} frequencies",
            sweeps.len(),
            freqs.len()
        )));
    }
    let per_sweep = sweeps
        .par_iter()
        .map(|sweep| detect_knots(sweep, rel_tol))
        .collect::<Result<Vec<_>>>()?;
    let cell = sweeps.iter().map(|s| resolution(s)).fold(0.0, f64::max);
    let mut locations: Vec<f64> = per_sweep
        .into_iter()
        .flatten()
        .map(|k| k.location)
        .filter(|&d| d > 0.0)
        .collect();
    locations.sort_by(|a, b| a.total_cmp(b));

    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for d in locations {
        match clusters.last_mut() {
            Some(cluster) if d - cluster[0] < cell => cluster.push(d),
            _ => clusters.push(vec![d]),
        }
    }
    let entries = clusters
        .into_iter()
        .map(|c| (c.iter().sum::<f64>() / c.len() as f64, 1))
        .collect();
    DifferenceMultiset::from_entries(entries)
}

fn to_grid(d: &DifferenceMultiset, grid_step: f64) -> Result<BTreeMap<i64, usize>> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    let mut counts = BTreeMap::new();
    for &(value, m) in d.entries() {
        let units = value / grid_step;
        let index = units.round();
        if (units - index).abs() > 1e-6 * units.abs().max(1.0) {
            return Err(Error::InconsistentMultiset(format!(
                "difference {value} is not a multiple of the grid step {grid_step}"
            )));
        }
        *counts.entry(index as i64).or_insert(0) += m;
    }
    Ok(counts)
}

/// All point sets whose difference multiset is `d`, each with minimum 0 and
/// each reflection pair reported once.
pub fn turnpike(d: &DifferenceMultiset, grid_step: f64) -> Result<Vec<Vec<f64>>> {
    let mut remaining = to_grid(d, grid_step)?;
    if d.implied_spike_count().is_none() {
        return Err(Error::InconsistentMultiset(format!(
            "total multiplicity {} is not triangular",
            d.total()
        )));
    }
    let solutions = turnpike_integer(&mut remaining);
    if solutions.is_empty() {
        return Err(Error::InconsistentMultiset(
            "no point set realises the multiset".into(),
        ));
    }
    Ok(solutions
        .into_iter()
        .map(|s| s.into_iter().map(|n| n as f64 * grid_step).collect())
        .collect())
}

/// Backtracking partial-digest solver over integer differences.
pub fn turnpike_integer(remaining: &mut BTreeMap<i64, usize>) -> Vec<Vec<i64>> {
    let Some((&width, _)) = remaining.iter().next_back() else {
        return vec![vec![0]];
    };
    take(remaining, width);
    let mut points = vec![0, width];
    let mut found = BTreeSet::new();
    place(remaining, &mut points, width, &mut found);
    put(remaining, width);
    found.into_iter().collect()
}

fn take(m: &mut BTreeMap<i64, usize>, d: i64) -> bool {
    match m.get_mut(&d) {
        Some(c) if *c > 1 => {
            *c -= 1;
            true
        }
        Some(_) => {
            m.remove(&d);
            true
        }
        None => false,
    }
}

fn put(m: &mut BTreeMap<i64, usize>, d: i64) {
    *m.entry(d).or_insert(0) += 1;
}

fn place(
    remaining: &mut BTreeMap<i64, usize>,
    points: &mut Vec<i64>,
    width: i64,
    found: &mut BTreeSet<Vec<i64>>,
) {
    let Some((&y, _)) = remaining.iter().next_back() else {
        let mut sorted = points.clone();
        sorted.sort_unstable();
        let mut mirrored: Vec<i64> = sorted.iter().map(|&p| width - p).collect();
        mirrored.sort_unstable();
        found.insert(sorted.min(mirrored));
        return;
    };
    let mut candidates = vec![y, width - y];
    candidates.dedup();
    for candidate in candidates {
        if points.contains(&candidate) {
            continue;
        }
        let mut removed = Vec::with_capacity(points.len());
        let mut ok = true;
        for &p in points.iter() {
            let dist = (candidate - p).abs();
            if take(remaining, dist) {
                removed.push(dist);
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            points.push(candidate);
            place(remaining, points, width, found);
            points.pop();
        }
        for dist in removed {
            put(remaining, dist);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRecovery {
    pub candidates: Vec<Vec<f64>>,
    pub ambiguous: bool,
    pub differences: DifferenceMultiset,
}

/// Difference-set estimation, snapping to the grid, then turnpike.
pub fn recover_support(
    sweeps: &[Vec<(f64, f64)>],
    freqs: &[f64],
    grid_step: f64,
    rel_tol: f64,
) -> Result<SupportRecovery> {
    let estimated = estimate_difference_set(sweeps, freqs, rel_tol)?;
    if !(grid_step > 0.0) {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    let mut snapped: BTreeMap<i64, usize> = BTreeMap::new();
    for &(d, _) in estimated.entries() {
        let index = (d / grid_step).round() as i64;
        if index > 0 {
            snapped.insert(index, 1);
        }
    }
    let differences = DifferenceMultiset::from_entries(
        snapped
            .iter()
            .map(|(&n, &m)| (n as f64 * grid_step, m))
            .collect(),
    )?;
    let candidates = turnpike(&differences, grid_step)?;
    Ok(SupportRecovery {
        ambiguous: candidates.len() > 1,
        candidates,
        differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multiset(values: &[f64]) -> DifferenceMultiset {
        DifferenceMultiset::from_differences(values.to_vec(), 1e-12)
    }

    #[test]
    fn two_spike_knot_between_samples() {
        let mut sweep: Vec<(f64, f64)> = (1..=9).map(|n| (n as f64 / 10.0, 0.2 * n as f64)).collect();
        sweep.extend((11..=20).map(|n| (n as f64 / 10.0, 2.0)));
        let knots = detect_knots(&sweep, DEFAULT_REL_TOL).unwrap();
        assert_eq!(knots.len(), 1);
        assert!((knots[0].location - 1.0).abs() < 1e-12);
        assert!((knots[0].jump + 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_sweep_has_no_knots() {
        let sweep: Vec<(f64, f64)> = (0..20).map(|n| (n as f64, 3.0 * n as f64 - 1.0)).collect();
        assert!(detect_knots(&sweep, DEFAULT_REL_TOL).unwrap().is_empty());
        assert_eq!(
            detect_knots(&sweep[..2], DEFAULT_REL_TOL),
            Err(Error::InsufficientSamples(2))
        );
    }

    #[test]
    fn turnpike_small_cases() {
        assert_eq!(turnpike(&multiset(&[1.0, 2.0, 3.0]), 1.0).unwrap(), vec![vec![0.0, 1.0, 3.0]]);
        assert_eq!(
            turnpike(&multiset(&[1.0, 1.0, 1.0, 2.0, 2.0, 3.0]), 1.0).unwrap(),
            vec![vec![0.0, 1.0, 2.0, 3.0]]
        );
        assert_eq!(turnpike(&DifferenceMultiset::default(), 1.0).unwrap(), vec![vec![0.0]]);
        assert!(matches!(
            turnpike(&multiset(&[1.0, 2.0]), 1.0),
            Err(Error::InconsistentMultiset(_))
        ));
        assert!(matches!(
            turnpike(&multiset(&[1.0, 1.0, 5.0]), 1.0),
            Err(Error::InconsistentMultiset(_))
        ));
    }

    #[test]
    fn homometric_pair_is_ambiguous() {
        let a = [0.0, 1.0, 4.0, 10.0, 12.0, 17.0];
        let mut diffs = Vec::new();
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                diffs.push(a[j] - a[i]);
            }
        }
        let solutions = turnpike(&multiset(&diffs), 1.0).unwrap();
        assert_eq!(solutions.len(), 2);
        assert!(solutions.contains(&a.to_vec()));
        assert!(solutions.contains(&vec![0.0, 1.0, 8.0, 11.0, 13.0, 17.0]));
    }

    #[test]
    fn recommended_scales_cover_grid_and_gaps() {
        let s = recommended_scales(3.0, 1.0);
        assert_eq!(s.first(), Some(&0.5));
        assert!(s.contains(&1.0) && s.contains(&3.0) && s.contains(&3.5));
        assert!(*s.last().unwrap() >= 4.0);
    }
}
