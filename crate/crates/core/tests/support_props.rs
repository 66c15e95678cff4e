use std::collections::{BTreeMap, BTreeSet};

use hybrid_scattering::gabor::{second_derivative_jump, sweep};
use hybrid_scattering::generate::{random_collision_free, standard_normal_frequencies, task_rng};
use hybrid_scattering::support::{detect_knots, recommended_scales, turnpike_integer, DEFAULT_REL_TOL};
use proptest::prelude::*;

fn digest(points: &[i64]) -> BTreeMap<i64, usize> {
    let mut d = BTreeMap::new();
    for (n, &a) in points.iter().enumerate() {
        for &b in &points[n + 1..] {
            *d.entry((b - a).abs()).or_insert(0) += 1;
        }
    }
    d
}

fn canonical(points: &[i64]) -> Vec<i64> {
    let mut forward = points.to_vec();
    forward.sort_unstable();
    let lo = forward[0];
    let hi = *forward.last().unwrap();
    let forward: Vec<i64> = forward.iter().map(|v| v - lo).collect();
    let mut backward: Vec<i64> = forward.iter().map(|v| hi - lo - v).collect();
    backward.sort_unstable();
    forward.min(backward)
}

/// Every increasing `k`-subset of `0..=width` through both endpoints whose
/// digest equals `target`. Partial subsets are abandoned as soon as a new
/// difference is not left in the target.
fn exhaustive(target: &BTreeMap<i64, usize>, k: usize) -> BTreeSet<Vec<i64>> {
    fn extend(chosen: &mut Vec<i64>, left: &mut BTreeMap<i64, usize>, width: i64, k: usize, out: &mut BTreeSet<Vec<i64>>) {
        if chosen.len() == k {
            if left.values().all(|&c| c == 0) && *chosen.last().unwrap() == width {
                out.insert(canonical(chosen));
            }
            return;
        }
        let start = chosen.last().unwrap() + 1;
        for next in start..=width {
            let diffs: Vec<i64> = chosen.iter().map(|c| next - c).collect();
            let mut taken = Vec::new();
            let mut ok = true;
            for d in diffs {
                match left.get_mut(&d) {
                    Some(c) if *c > 0 => {
                        *c -= 1;
                        taken.push(d);
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                chosen.push(next);
                extend(chosen, left, width, k, out);
                chosen.pop();
            }
            for d in taken {
                *left.get_mut(&d).unwrap() += 1;
            }
        }
    }
    let mut out = BTreeSet::new();
    let width = *target.keys().next_back().unwrap();
    let mut left = target.clone();
    extend(&mut vec![0], &mut left, width, k, &mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn turnpike_is_sound_and_complete(set in prop::collection::btree_set(0i64..24, 2..7)) {
        let points: Vec<i64> = set.into_iter().collect();
        let target = digest(&points);
        let mut remaining = target.clone();
        let solutions = turnpike_integer(&mut remaining);
        for s in &solutions {
            prop_assert_eq!(&digest(s), &target);
        }
        let found: BTreeSet<Vec<i64>> = solutions.iter().map(|s| canonical(s)).collect();
        prop_assert_eq!(found.len(), solutions.len());
        prop_assert!(found.contains(&canonical(&points)));
        prop_assert_eq!(found, exhaustive(&target, points.len()));
    }
}

#[test]
fn jump_masses_do_not_vanish() {
    let mut below_floor = 0usize;
    for trial in 0..100u64 {
        let mut rng = task_rng(5, trial);
        let k = 2 + (trial as usize % 4);
        let x = random_collision_free(k, 32, 1.0, 10_000, &mut rng).unwrap();
        let diffs = x.difference_set().expanded();
        let width = diffs.iter().fold(0.0f64, |m, &d| m.max(d));
        for xi in standard_normal_frequencies(100, &mut rng) {
            for p in 1..=3 {
                let floor = 1e-9 * x.amplitude_norm(p).powi(p as i32);
                for &d in &diffs {
                    let c = second_derivative_jump(&x, d, xi, p);
                    assert!(c != 0.0, "trial {trial}: exact zero at d={d}, xi={xi}, p={p}");
                    if c.abs() <= floor {
                        // same-sign neighbours make c vanish quadratically at ξ = 0
                        assert!(xi.abs() * width < 1e-2, "trial {trial}: c={c:e} at d={d}, xi={xi}, p={p}");
                        below_floor += 1;
                    }
                }
            }
        }
    }
    assert!(below_floor <= 2, "{below_floor} draws below the floor");
}

#[test]
fn clean_sweeps_locate_every_difference() {
    for trial in 0..10u64 {
        let mut rng = task_rng(6, trial);
        let k = 2 + (trial as usize % 4);
        let x = random_collision_free(k, 32, 1.0, 10_000, &mut rng).unwrap();
        let truth = x.difference_set().expanded();
        let max = truth.iter().fold(0.0f64, |m, &d| m.max(d));
        let scales = recommended_scales(max, 1.0);
        let mut exact = 0;
        for xi in standard_normal_frequencies(100, &mut rng) {
            let knots = detect_knots(&sweep(&x, xi, 2, &scales), DEFAULT_REL_TOL).unwrap();
            let matched = knots.len() == truth.len()
                && knots.iter().zip(&truth).all(|(e, d)| (e.location - d).abs() <= 0.5);
            if matched {
                exact += 1;
            }
        }
        assert!(exact >= 95, "trial {trial}: {exact}/100");
    }
}
