//! The end-to-end artifact bundle: sparsification stages, the three
//! reference synthesis experiments and the lemma reports.

use std::path::Path;

use hybrid_scattering::expoly::Lemma;
use hybrid_scattering::generate::{random_piecewise_polynomial, task_rng};
use hybrid_scattering::synthesis::{
    evaluate_reconstruction, greedy_synthesize, reference_trial, SynthesisConfig, REFERENCE_GRID, REFERENCE_SCALES,
    REFERENCE_SPIKES,
};
use hybrid_scattering::wavelet::sparsify_stages;
use serde::Serialize;

use crate::io::{csv_string, emit, to_json};
use crate::{lemma_reports, pair_csv, pair_rows, pair_svg, sampled_points, stage_svg, trace_csv, DemoArgs, Failure, Status};

const KNOTS: usize = 4;
const DEGREE: usize = 2;
const ELL: u32 = 1;
const STEP: f64 = 1.0 / 16.0;

#[derive(Serialize)]
struct Point {
    t: f64,
    value: f64,
}

#[derive(Serialize)]
struct ExperimentSummary {
    experiment: usize,
    scales: usize,
    residual: f64,
    error: f64,
    success: bool,
}

struct Bundle<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Bundle<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        emit(Some(&self.dir.join(name)), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn run(args: &DemoArgs) -> Result<Status, Failure> {
    let mut bundle = Bundle { dir: &args.out_dir, files: Vec::new() };

    let mut rng = task_rng(args.seed, 0);
    let y = random_piecewise_polynomial(KNOTS, DEGREE, ELL, STEP, &mut rng)?;
    let stages = sparsify_stages(&y, ELL, STEP)?;
    bundle.write("polynomial.json", &to_json(&y)?)?;
    let points = |pts: Vec<(f64, f64)>| csv_string(pts.into_iter().map(|(t, value)| Point { t, value }));
    bundle.write("sparsify_samples.csv", &points(sampled_points(&stages.samples))?)?;
    bundle.write("sparsify_response.csv", &points(sampled_points(&stages.response))?)?;
    let spikes: Vec<(f64, f64)> = stages
        .spikes
        .locations()
        .iter()
        .copied()
        .zip(stages.spikes.amplitudes().iter().copied())
        .collect();
    bundle.write("sparsify_spikes.csv", &points(spikes)?)?;
    if args.svg {
        bundle.write("sparsify.svg", &stage_svg(&stages))?;
    }

    let mut summaries = Vec::new();
    for experiment in 0..REFERENCE_SCALES.len() {
        let (x, targets) = reference_trial(experiment, args.seed, args.trial)?;
        let mut config = SynthesisConfig::new(REFERENCE_GRID, targets, REFERENCE_SPIKES, args.seed.wrapping_add(args.trial));
        config.restarts = args.restarts;
        let result = greedy_synthesize(&config)?;
        let (error, g) = evaluate_reconstruction(&x, &result.signal)?;
        let stem = format!("synthesis_{}", experiment + 1);
        bundle.write(&format!("{stem}_original.json"), &to_json(&x)?)?;
        bundle.write(&format!("{stem}_reconstructed.json"), &to_json(&result.signal)?)?;
        bundle.write(&format!("{stem}_trace.csv"), &trace_csv(&result)?)?;
        let rows = pair_rows(&x, &result.signal, &g);
        bundle.write(&format!("{stem}_pair.csv"), &pair_csv(&rows)?)?;
        if args.svg {
            bundle.write(&format!("{stem}.svg"), &pair_svg(&format!("synthesis {}", experiment + 1), &rows))?;
        }
        summaries.push(ExperimentSummary {
            experiment: experiment + 1,
            scales: REFERENCE_SCALES[experiment].len(),
            residual: result.residual,
            error,
            success: error <= 1e-3,
        });
    }
    bundle.write("synthesis_summary.json", &to_json(&summaries)?)?;

    let reports = lemma_reports(&Lemma::ALL, args.lemma_trials, args.seed, 2, 3, 10_000, 1e-5)?;
    bundle.write("verify.json", &to_json(&reports)?)?;

    let mut index = bundle.files.join("\n");
    index.push('\n');
    emit(Some(&args.out_dir.join("index.txt")), &index)?;

    for s in &summaries {
        println!("{}", serde_json::to_string(s).map_err(anyhow::Error::from)?);
    }
    let passed = reports.iter().all(|r| r.pass) && summaries.iter().all(|s| s.success);
    Ok(if passed { Status::Done } else { Status::Failed })
}
