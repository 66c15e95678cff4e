//! Acceptance criteria, one PASS/FAIL line each.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hybrid_scattering::amplitude::{alternation_roots, resolve_alternation, recover_signal, RecoveryConfig};
use hybrid_scattering::expoly::{check_lemma_statement, Lemma, LemmaParams};
use hybrid_scattering::gabor::{jump_coefficient, measure_analytic, measure_numeric, second_derivative_jump, sweep};
use hybrid_scattering::generate::{
    random_amplitude, random_collision_free, random_piecewise_polynomial, standard_normal_frequencies, task_rng,
    DEFAULT_REJECTION_BUDGET,
};
use hybrid_scattering::support::{estimate_difference_set, recommended_scales, turnpike_integer, DEFAULT_REL_TOL};
use hybrid_scattering::synthesis::{evaluate_reconstruction, greedy_synthesize, reference_trial, SynthesisConfig, REFERENCE_GRID, REFERENCE_SCALES, REFERENCE_SPIKES};
use hybrid_scattering::wavelet::{convolve_valid, dilate, make_wavelet, sparsify};
use hybrid_scattering::{GaborSpec, PiecewisePolynomial, SparseSignal};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn sparsification() -> Verdict {
    let start = Instant::now();
    let h = 1.0 / 16.0;
    let mut good = 0;
    for trial in 0..100u64 {
        let mut rng = task_rng(1, trial);
        let m = rng.random_range(0..=3);
        let k = rng.random_range(1..=5);
        let ell = rng.random_range(0..=2);
        let y = random_piecewise_polynomial(k, m, ell, h, &mut rng).expect("instance");
        let Ok(x) = sparsify(&y, ell, h) else { continue };
        let reach = 2f64.powi(ell as i32);
        let near = x.len() == k && x.locations().iter().zip(y.knots()).all(|(v, u)| (v - u).abs() <= reach);
        if near && x.amplitudes().iter().all(|&a| a > 0.0) {
            good += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(good == 100 && secs < 10.0, format!("{good}/100 exact, {secs:.2} s"))
}

fn annihilation() -> Verdict {
    let h = 1.0 / 64.0;
    let mut worst: f64 = 0.0;
    for m in 0..=3usize {
        let mut rng = task_rng(2, m as u64);
        for ell in 0..=2 {
            for _ in 0..5 {
                let length: f64 = 16.0;
                let coefficients: Vec<f64> = (0..=m).map(|q| rng.random_range(-1.0..1.0) / length.powi(q as i32)).collect();
                let y = PiecewisePolynomial::new(vec![], vec![coefficients], [0.0, length], Some(m)).expect("polynomial");
                let samples = y.sample(h).expect("samples");
                let z = convolve_valid(&samples, &dilate(&make_wavelet(m, h).expect("wavelet"), ell)).expect("convolution");
                worst = worst.max(z.sup_norm() / samples.sup_norm());
            }
        }
    }
    verdict(worst <= 1e-6, format!("worst relative sup-norm {worst:.2e}"))
}

fn oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    for trial in 0..200u64 {
        let mut rng = task_rng(3, trial);
        let k = rng.random_range(1..=8);
        let mut locations: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0)).collect();
        locations.sort_by(|a, b| a.total_cmp(b));
        let amplitudes = locations.iter().map(|_| random_amplitude(&mut rng)).collect();
        let x = SparseSignal::new(locations, amplitudes).expect("signal");
        let p = rng.random_range(1..=3);
        let s = rng.random_range(0.5..8.0);
        let xi = rng.random_range(-3.0..3.0);
        let g = GaborSpec::indicator(s, xi, p).expect("spec");
        let exact = measure_analytic(&x, &g).expect("closed form");
        let numeric = measure_numeric(&x, &g, 1e-4 * s).expect("quadrature");
        worst = worst.max((exact - numeric).abs() / exact);
    }
    verdict(worst <= 1e-4, format!("worst relative gap {worst:.2e} over 200 signals"))
}

fn collision_example() -> Verdict {
    let x = SparseSignal::new(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 1.0, 1.0, -1.0]).expect("signal");
    let mut rng = task_rng(4, 0);
    let worst = standard_normal_frequencies(100, &mut rng)
        .into_iter()
        .map(|xi| second_derivative_jump(&x, 2.0, xi, 2).abs())
        .fold(0.0f64, f64::max);
    verdict(worst <= 1e-9, format!("max |jump at 2| = {worst:.2e} over 100 frequencies"))
}

fn support_detection() -> Verdict {
    let n = 64usize;
    let scales = recommended_scales(n as f64, 1.0);
    let mut exact = 0;
    for trial in 0..100u64 {
        let mut rng = task_rng(5, trial);
        let k = rng.random_range(2..=6);
        let x = random_collision_free(k, n, 1.0, DEFAULT_REJECTION_BUDGET, &mut rng).expect("signal");
        let xi = standard_normal_frequencies(1, &mut rng)[0];
        let Ok(d) = estimate_difference_set(&[sweep(&x, xi, 2, &scales)], &[xi], DEFAULT_REL_TOL) else { continue };
        let snapped: Vec<f64> = d.expanded().iter().map(|v| v.round()).collect();
        if snapped == x.difference_set().expanded() {
            exact += 1;
        }
    }
    verdict(exact >= 95, format!("{exact}/100 exact difference sets"))
}

fn digest(points: &[i64]) -> BTreeMap<i64, usize> {
    let mut d = BTreeMap::new();
    for (n, &a) in points.iter().enumerate() {
        for &b in &points[n + 1..] {
            *d.entry(b - a).or_insert(0) += 1;
        }
    }
    d
}

fn canonical(points: &[i64]) -> Vec<i64> {
    let lo = points[0];
    let hi = points[points.len() - 1];
    let forward: Vec<i64> = points.iter().map(|v| v - lo).collect();
    let backward: Vec<i64> = points.iter().rev().map(|v| hi - v).collect();
    forward.min(backward)
}

/// All `k`-subsets of `0..=width` containing both ends with the given
/// digest; a branch stops once a new difference is not available.
fn exhaustive(target: &BTreeMap<i64, usize>, k: usize) -> BTreeSet<Vec<i64>> {
    fn extend(chosen: &mut Vec<i64>, left: &mut BTreeMap<i64, usize>, width: i64, k: usize, out: &mut BTreeSet<Vec<i64>>) {
        if chosen.len() == k {
            if *chosen.last().unwrap() == width && left.values().all(|&c| c == 0) {
                out.insert(canonical(chosen));
            }
            return;
        }
        for next in chosen.last().unwrap() + 1..=width {
            let mut taken = Vec::new();
            for c in chosen.iter() {
                match left.get_mut(&(next - c)) {
                    Some(m) if *m > 0 => {
                        *m -= 1;
                        taken.push(next - c);
                    }
                    _ => break,
                }
            }
            if taken.len() == chosen.len() {
                chosen.push(next);
                extend(chosen, left, width, k, out);
                chosen.pop();
            }
            for d in taken {
                *left.get_mut(&d).unwrap() += 1;
            }
        }
    }
    let width = *target.keys().next_back().unwrap();
    let mut out = BTreeSet::new();
    extend(&mut vec![0], &mut target.clone(), width, k, &mut out);
    out
}

fn turnpike() -> Verdict {
    let mut agree = 0;
    let mut sound = true;
    let mut ambiguous = 0;
    for trial in 0..200u64 {
        let mut rng = task_rng(6, trial);
        let n = rng.random_range(8..=40);
        let k = rng.random_range(2..=7);
        let mut points: Vec<i64> = rand::seq::index::sample(&mut rng, n, k).into_iter().map(|i| i as i64).collect();
        points.sort_unstable();
        let target = digest(&points);
        let solutions = turnpike_integer(&mut target.clone());
        sound &= solutions.iter().all(|s| digest(s) == target);
        let found: BTreeSet<Vec<i64>> = solutions.iter().map(|s| canonical(s)).collect();
        if found.len() > 1 {
            ambiguous += 1;
        }
        if found.len() == solutions.len() && found == exhaustive(&target, k) {
            agree += 1;
        }
    }
    // a homometric pair: both sets must come back
    let pair = [vec![0i64, 1, 4, 10, 12, 17], vec![0i64, 1, 8, 11, 13, 17]];
    let found: BTreeSet<Vec<i64>> = turnpike_integer(&mut digest(&pair[0])).iter().map(|s| canonical(s)).collect();
    let homometric = found == pair.iter().map(|s| canonical(s)).collect::<BTreeSet<_>>();
    verdict(
        agree == 200 && sound && homometric,
        format!("{agree}/200 agree with exhaustive search, {ambiguous} homometric, soundness {sound}, known pair recovered: {homometric}"),
    )
}

fn amplitude_recovery() -> Verdict {
    let n = 64usize;
    let scales = recommended_scales(n as f64, 1.0);
    let mut good = 0;
    let mut redrawn = 0;
    for trial in 0..100u64 {
        let mut rng = task_rng(7, trial);
        let k = rng.random_range(1..=5);
        let x = random_collision_free(k, n, 1.0, DEFAULT_REJECTION_BUDGET, &mut rng).expect("signal");
        let freqs = standard_normal_frequencies(6, &mut rng);
        let sweeps: Vec<_> = freqs.iter().map(|&xi| sweep(&x, xi, 2, &scales)).collect();
        let config = RecoveryConfig { p: 2, norm: x.amplitude_norm(2), grid_step: 1.0, rel_tol: DEFAULT_REL_TOL, seed: trial };
        if let Ok(r) = recover_signal(&sweeps, &freqs, &config) {
            if r.diagnostics.redraws > 0 {
                redrawn += 1;
            }
            if r.signals.len() == 1 && r.signals[0].equivalent_up_to_symmetry(&x, 1e-6) {
                good += 1;
            }
        }
    }

    // the two members of the (2,1,3) alternation family share pair products and norm
    let s13 = 13f64.sqrt();
    let members = [vec![2.0, 1.0, 3.0], vec![2.0 / s13, s13, 3.0 / s13]];
    let locations = [0.0, 1.0, 3.0];
    let representative = [1.0, 2.0, 1.5];
    let norm = 14f64.sqrt();
    let mut separated = alternation_roots(&representative, norm, 2).map(|r| r.len() == 2).unwrap_or(false);
    let mut rng = task_rng(7, 1000);
    for xi in standard_normal_frequencies(10, &mut rng) {
        for member in &members {
            let truth = SparseSignal::new(locations.to_vec(), member.clone()).expect("signal");
            let observed = jump_coefficient(&truth, 0, 2, xi, 2).expect("jump");
            separated &= resolve_alternation(&representative, norm, 2, Some((xi, observed)), &locations)
                .map(|a| a.amplitudes.iter().zip(member).all(|(x, y)| (x - y).abs() <= 1e-12))
                .unwrap_or(false);
        }
    }
    verdict(
        good == 100 && redrawn <= 2 && separated,
        format!("{good}/100 recovered, {redrawn} with redraws, (2,1,3) pair separated: {separated}"),
    )
}

fn synthesis() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut slowest: f64 = 0.0;
    for experiment in 0..REFERENCE_SCALES.len() {
        let mut good = 0;
        for trial in 0..20u64 {
            let (x, targets) = reference_trial(experiment, 1000, trial).expect("trial");
            let start = Instant::now();
            let result = greedy_synthesize(&SynthesisConfig::new(REFERENCE_GRID, targets, REFERENCE_SPIKES, trial)).expect("synthesis");
            let secs = start.elapsed().as_secs_f64();
            slowest = slowest.max(secs);
            let (error, _) = evaluate_reconstruction(&x, &result.signal).expect("comparison");
            if error <= 1e-3 && secs < 30.0 {
                good += 1;
            }
        }
        pass &= good >= 16;
        parts.push(format!("{good}/20"));
    }
    verdict(pass, format!("experiments {}; slowest trial {slowest:.1} s", parts.join(", ")))
}

fn lemmas() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for lemma in Lemma::ALL {
        let p = if lemma == Lemma::FourPSolutions { 3 } else { 2 };
        let params = LemmaParams { p, ..LemmaParams::default() };
        match check_lemma_statement(lemma, &params, 100, 9) {
            Ok(r) => {
                pass &= r.pass;
                parts.push(format!("{lemma} {}/{}", r.passed_trials, r.trials));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{lemma} error {e}"));
            }
        }
    }
    verdict(pass, parts.join(", "))
}

fn hscat(dir: &Path, args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_hscat")).args(args).current_dir(dir).output().expect("spawn hscat");
    (out.status.code(), out.stdout)
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("listing") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                files.insert(name, std::fs::read(&path).expect("reading"));
            }
        }
    }
    files
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 10] = [
        &["gen", "--k", "3", "--n", "48", "--seed", "4", "--out", "x.json"],
        &["gen", "--kind", "piecewise-poly", "--k", "3", "--seed", "4", "--out", "poly.json"],
        &["sparsify", "--input", "poly.json", "--stages", "stages.csv", "--svg", "stages.svg", "--out", "spikes.json"],
        &["measure", "--input", "x.json", "--scales", "1,2,5,9", "--freqs", "0.5,-1.3", "--out", "m.csv"],
        &["sweep", "--input", "x.json", "--freqs", "0.41,-1.2,0.77,1.9,-0.35,2.3", "--out", "sweeps.csv"],
        &["recover-support", "--sweeps", "sweeps.csv", "--out", "support.json"],
        &["recover", "--sweeps", "sweeps.csv", "--norm", "2", "--out", "rec.json", "--diagnostics", "diag.json"],
        &["synthesize", "--input", "x.json", "--n", "64", "--restarts", "8", "--out", "syn.json", "--trace", "trace.csv", "--plot", "plot.csv", "--svg", "syn.svg"],
        &["verify", "--trials", "20", "--out", "verify.jsonl"],
        &["demo", "--out-dir", "demo", "--restarts", "8", "--lemma-trials", "20", "--svg"],
    ];
    let dirs = [tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir")];
    let mut logs: [Vec<(Option<i32>, Vec<u8>)>; 2] = [Vec::new(), Vec::new()];
    for (dir, log) in dirs.iter().zip(logs.iter_mut()) {
        for args in runs {
            log.push(hscat(dir.path(), args));
        }
    }
    let codes: Vec<Option<i32>> = logs[0].iter().map(|l| l.0).collect();
    let files = [snapshot(dirs[0].path()), snapshot(dirs[1].path())];
    let identical = logs[0] == logs[1] && files[0] == files[1];
    let ran = codes.iter().all(|c| matches!(c, Some(0 | 3 | 4)));
    verdict(
        identical && ran && files[0].len() >= 20,
        format!("{} subcommands, {} artifacts, byte-identical: {identical}, exit codes {codes:?}", runs.len(), files[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("sparsification", sparsification),
        ("annihilation", annihilation),
        ("oracle equivalence", oracle),
        ("collision example", collision_example),
        ("support detection", support_detection),
        ("turnpike", turnpike),
        ("amplitude recovery", amplitude_recovery),
        ("synthesis", synthesis),
        ("lemma suite", lemmas),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        println!(
            "{} {:>2} {name}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            n + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
