use hybrid_scattering::amplitude::{recover_signal, RecoveryConfig};
use hybrid_scattering::gabor::sweep;
use hybrid_scattering::generate::{random_collision_free, standard_normal_frequencies, task_rng, DEFAULT_REJECTION_BUDGET};
use hybrid_scattering::support::{recommended_scales, recover_support, DEFAULT_REL_TOL};
use rand::Rng;

const N: usize = 64;

fn sweeps_for(x: &hybrid_scattering::SparseSignal, freqs: &[f64], p: u32) -> Vec<Vec<(f64, f64)>> {
    let scales = recommended_scales(N as f64, 1.0);
    freqs.iter().map(|&xi| sweep(x, xi, p, &scales)).collect()
}

#[test]
fn support_round_trip() {
    for trial in 0..20 {
        let mut rng = task_rng(100, trial);
        let k = rng.random_range(2..=5);
        let x = random_collision_free(k, N, 1.0, DEFAULT_REJECTION_BUDGET, &mut rng).unwrap();
        let freqs = standard_normal_frequencies(2, &mut rng);
        let found = recover_support(&sweeps_for(&x, &freqs, 2), &freqs, 1.0, DEFAULT_REL_TOL).unwrap();
        let origin = x.locations()[0];
        let truth: Vec<f64> = x.locations().iter().map(|v| v - origin).collect();
        let last = truth[k - 1];
        let mirrored: Vec<f64> = truth.iter().rev().map(|v| last - v).collect();
        assert!(!found.ambiguous);
        assert!(found.candidates[0] == truth || found.candidates[0] == mirrored, "trial {trial}");
    }
}

#[test]
fn amplitude_round_trip() {
    for trial in 0..20 {
        let mut rng = task_rng(200, trial);
        let k = rng.random_range(1..=5);
        let x = random_collision_free(k, N, 1.0, DEFAULT_REJECTION_BUDGET, &mut rng).unwrap();
        let freqs = standard_normal_frequencies(6, &mut rng);
        let config = RecoveryConfig {
            p: 2,
            norm: x.amplitude_norm(2),
            grid_step: 1.0,
            rel_tol: DEFAULT_REL_TOL,
            seed: trial,
        };
        let recovery = recover_signal(&sweeps_for(&x, &freqs, 2), &freqs, &config).unwrap();
        assert_eq!(recovery.signals.len(), 1);
        assert!(
            recovery.signals[0].equivalent_up_to_symmetry(&x, 1e-6),
            "trial {trial}: {:?} vs {:?}",
            recovery.signals[0],
            x
        );
    }
}
