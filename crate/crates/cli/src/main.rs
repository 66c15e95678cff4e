mod demo;
mod io;
mod svg;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hybrid_scattering::amplitude::{recover_signal, RecoveryConfig};
use hybrid_scattering::expoly::{check_lemma_statement, Lemma, LemmaParams, LemmaReport};
use hybrid_scattering::gabor::{linear_scales, measurement_batch, sweep};
use hybrid_scattering::generate::{random_collision_free, random_piecewise_polynomial, task_rng};
use hybrid_scattering::support::{recommended_scales, recover_support};
use hybrid_scattering::synthesis::{
    evaluate_reconstruction, greedy_synthesize, GroupElement, SynthesisConfig, SynthesisResult, REFERENCE_FREQUENCIES,
    REFERENCE_GRID, REFERENCE_SCALES, REFERENCE_SPIKES,
};
use hybrid_scattering::wavelet::{sparsify_stages, SparsifyStages};
use hybrid_scattering::{Convention, MeasurementRecord, MeasurementSet, SampledSignal, SparseSignal, Window};
use serde::{Deserialize, Serialize};

use crate::io::{csv_string, emit, measurement_csv, read_measurements, read_polynomial, read_signal, read_sweeps, to_json};

/// Why a run stopped; each maps to one exit code.
#[derive(Debug)]
pub enum Failure {
    Precondition(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn precondition(message: impl Display) -> Self {
        Failure::Precondition(anyhow::anyhow!("{message}"))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Precondition(_) => 2,
            Failure::Numerical(_) => 4,
        }
    }
}

impl From<hybrid_scattering::Error> for Failure {
    fn from(e: hybrid_scattering::Error) -> Self {
        if e.is_precondition() {
            Failure::Precondition(e.into())
        } else {
            Failure::Numerical(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Precondition(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    Ambiguous,
    Failed,
}

#[derive(Parser, Debug)]
#[command(name = "hscat", version, about = "Hybrid scattering transform toolkit")]
struct Cli {
    /// Rerun a resolved configuration line printed by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Draw a random collision-free spike train or piecewise polynomial.
    Gen(GenArgs),
    /// Wavelet convolution and max pooling of a piecewise polynomial.
    Sparsify(SparsifyArgs),
    /// Gabor-modulus measurements of a spike train.
    Measure(MeasureArgs),
    /// Dense scale sweeps `(s, f(s)^p)` for support recovery.
    Sweep(SweepArgs),
    /// Difference set and turnpike reconstruction from sweeps.
    RecoverSupport(RecoverSupportArgs),
    /// Full recovery of locations and amplitudes from sweeps.
    Recover(RecoverArgs),
    /// Greedy synthesis of a sparse signal matching target measurements.
    Synthesize(SynthesizeArgs),
    /// Monte-Carlo checks of the exponential-polynomial lemmas.
    Verify(VerifyArgs),
    /// Run the full pipeline and write every artifact into a directory.
    Demo(DemoArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum GenKind {
    Diracs,
    PiecewisePoly,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "diracs")]
    kind: GenKind,
    /// Spikes, or knots for a piecewise polynomial.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Grid size for spike trains.
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    grid_step: f64,
    /// Polynomial degree bound.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Wavelet scale the knot separation must allow.
    #[arg(long, default_value_t = 1)]
    ell: u32,
    /// Sampling step; the domain is [0, 1024 h].
    #[arg(long, default_value_t = 0.0625)]
    h: f64,
    #[arg(long, default_value_t = hybrid_scattering::generate::DEFAULT_REJECTION_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SparsifyArgs {
    /// Piecewise polynomial object with `knots`, `pieces` and `domain`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    ell: u32,
    /// Sampling step h.
    #[arg(long, default_value_t = 0.0625)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of every intermediate stage (`stage,t,value`).
    #[arg(long)]
    stages: Option<PathBuf>,
    /// SVG plot of the stages.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct MeasureArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    scales: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    freqs: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[arg(long, default_value = "indicator")]
    window: Window,
    #[arg(long, default_value = "norm_power")]
    convention: Convention,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    freqs: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Largest scale; defaults to the signal extent plus one grid step.
    #[arg(long)]
    max_scale: Option<f64>,
    /// Scale spacing; defaults to half the grid step.
    #[arg(long)]
    scale_step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RecoverSupportArgs {
    /// Measurement CSVs; rows are grouped by frequency.
    #[arg(long, num_args = 1.., required = true)]
    sweeps: Vec<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    grid_step: f64,
    #[arg(long, default_value_t = hybrid_scattering::support::DEFAULT_REL_TOL)]
    rel_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RecoverArgs {
    #[arg(long, num_args = 1.., required = true)]
    sweeps: Vec<PathBuf>,
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Use only the first this many frequencies; defaults to all.
    #[arg(long)]
    num_freqs: Option<usize>,
    /// The side measurement ‖a‖_p.
    #[arg(long)]
    norm: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    grid_step: f64,
    #[arg(long, default_value_t = hybrid_scattering::support::DEFAULT_REL_TOL)]
    rel_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SynthesizeArgs {
    #[arg(long, default_value_t = REFERENCE_GRID)]
    n: usize,
    /// Frequencies for targets built from `--input`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    freqs: Vec<f64>,
    /// Scales for targets built from `--input`.
    #[arg(long, value_delimiter = ',')]
    scales: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[arg(long, default_value = "norm")]
    convention: Convention,
    #[arg(long, default_value_t = REFERENCE_SPIKES)]
    budget: usize,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 5)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Measurement CSV to match.
    #[arg(long, conflicts_with = "input")]
    targets: Option<PathBuf>,
    /// Ground-truth signal; targets are measured from it and the result is
    /// scored against it.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Residual trace CSV (`sweep,residual`).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Side-by-side CSV (`index,original,reconstructed`).
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct VerifyArgs {
    /// A lemma name or `all`.
    #[arg(long, default_value = "all")]
    lemma: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exponent for the even-p statements.
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Odd exponent for `four_p_solutions`.
    #[arg(long, default_value_t = 3)]
    odd_p: u32,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-5)]
    scan_step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DemoArgs {
    #[arg(long, default_value = "hscat-demo")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub seed: u64,
    /// Which seeded reference trial to synthesize.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    /// Monte-Carlo trials per lemma.
    #[arg(long, default_value_t = 100)]
    pub lemma_trials: usize,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
}

fn print_config(command: &Command) -> Result<(), Failure> {
    let line = serde_json::to_string(command).map_err(anyhow::Error::from)?;
    println!("{line}");
    Ok(())
}

fn run(command: Command) -> Result<Status, Failure> {
    match command {
        Command::Gen(args) => gen(args),
        Command::Sparsify(args) => sparsify(args),
        Command::Measure(args) => measure(args),
        Command::Sweep(args) => sweep_command(args),
        Command::RecoverSupport(args) => recover_support_command(args),
        Command::Recover(args) => recover(args),
        Command::Synthesize(args) => synthesize(args),
        Command::Verify(args) => verify(args),
        Command::Demo(args) => {
            print_config(&Command::Demo(args.clone()))?;
            demo::run(&args)
        }
    }
}

fn gen(args: GenArgs) -> Result<Status, Failure> {
    print_config(&Command::Gen(args.clone()))?;
    if args.k == 0 {
        return Err(Failure::precondition("k must be at least 1"));
    }
    let mut rng = task_rng(args.seed, 0);
    let text = match args.kind {
        GenKind::Diracs => to_json(&random_collision_free(args.k, args.n, args.grid_step, args.budget, &mut rng)?)?,
        GenKind::PiecewisePoly => to_json(&random_piecewise_polynomial(args.k, args.m, args.ell, args.h, &mut rng)?)?,
    };
    emit(args.out.as_deref(), &text)?;
    Ok(Status::Done)
}

pub fn sampled_points(s: &SampledSignal) -> Vec<(f64, f64)> {
    (0..s.len()).map(|n| (s.time(n), s.values[n])).collect()
}

#[derive(Serialize)]
struct StageRow {
    stage: &'static str,
    t: f64,
    value: f64,
}

pub fn stage_csv(stages: &SparsifyStages) -> Result<String, Failure> {
    let sampled = [
        ("samples", &stages.samples),
        ("filter", &stages.filter),
        ("response", &stages.response),
    ];
    let rows = sampled
        .iter()
        .flat_map(|(stage, s)| sampled_points(s).into_iter().map(move |(t, value)| StageRow { stage, t, value }))
        .chain(
            stages
                .spikes
                .locations()
                .iter()
                .zip(stages.spikes.amplitudes())
                .map(|(&t, &value)| StageRow { stage: "spikes", t, value }),
        );
    csv_string(rows)
}

pub fn stage_svg(stages: &SparsifyStages) -> String {
    let spikes: Vec<(f64, f64)> = stages
        .spikes
        .locations()
        .iter()
        .copied()
        .zip(stages.spikes.amplitudes().iter().copied())
        .collect();
    svg::render(
        "sparsification",
        &[
            svg::Series { label: "y".into(), style: svg::Style::Line, points: sampled_points(&stages.samples) },
            svg::Series { label: "|psi * y|".into(), style: svg::Style::Line, points: sampled_points(&stages.response).into_iter().map(|(t, v)| (t, v.abs())).collect() },
            svg::Series { label: "max pool".into(), style: svg::Style::Stems, points: spikes },
        ],
    )
}

fn sparsify(args: SparsifyArgs) -> Result<Status, Failure> {
    print_config(&Command::Sparsify(args.clone()))?;
    let y = read_polynomial(&args.input)?;
    let stages = sparsify_stages(&y, args.ell, args.step)?;
    if let Some(path) = &args.stages {
        emit(Some(path), &stage_csv(&stages)?)?;
    }
    if let Some(path) = &args.svg {
        emit(Some(path), &stage_svg(&stages))?;
    }
    emit(args.out.as_deref(), &to_json(&stages.spikes)?)?;
    Ok(Status::Done)
}

fn measure(args: MeasureArgs) -> Result<Status, Failure> {
    print_config(&Command::Measure(args.clone()))?;
    let x = read_signal(&args.input)?;
    let set = measurement_batch(&x, &args.scales, &args.freqs, args.p, args.window, args.convention)?;
    emit(args.out.as_deref(), &measurement_csv(&set)?)?;
    Ok(Status::Done)
}

fn sweep_command(mut args: SweepArgs) -> Result<Status, Failure> {
    let x = read_signal(&args.input)?;
    if args.p == 0 {
        return Err(Failure::precondition("p must be at least 1"));
    }
    let grid = x.grid_step().unwrap_or(1.0);
    let extent = match (x.locations().first(), x.locations().last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let step = *args.scale_step.get_or_insert(grid / 2.0);
    let max = *args.max_scale.get_or_insert(extent + grid);
    print_config(&Command::Sweep(args.clone()))?;
    if !(step > 0.0 && max >= step) {
        return Err(Failure::precondition("need 0 < scale-step <= max-scale"));
    }
    let scales = if step == grid / 2.0 {
        recommended_scales(max - grid, grid)
    } else {
        linear_scales(step, step, (max / step).ceil() as usize)
    };
    let records = args
        .freqs
        .iter()
        .flat_map(|&xi| {
            sweep(&x, xi, args.p, &scales).into_iter().map(move |(s, value)| MeasurementRecord {
                scale: s,
                frequency: xi,
                exponent: args.p,
                value,
                convention: Convention::NormPower,
            })
        })
        .collect();
    emit(args.out.as_deref(), &measurement_csv(&MeasurementSet { records })?)?;
    Ok(Status::Done)
}

#[derive(Serialize)]
struct SupportReport<'a> {
    candidates: &'a [Vec<f64>],
    ambiguous: bool,
    differences: &'a hybrid_scattering::DifferenceMultiset,
}

fn recover_support_command(args: RecoverSupportArgs) -> Result<Status, Failure> {
    print_config(&Command::RecoverSupport(args.clone()))?;
    let (freqs, sweeps, _) = read_sweeps(&args.sweeps, None)?;
    let support = recover_support(&sweeps, &freqs, args.grid_step, args.rel_tol)?;
    let report = SupportReport {
        candidates: &support.candidates,
        ambiguous: support.ambiguous,
        differences: &support.differences,
    };
    emit(args.out.as_deref(), &to_json(&report)?)?;
    Ok(if support.ambiguous { Status::Ambiguous } else { Status::Done })
}

#[derive(Serialize)]
struct RecoverDiagnostics<'a> {
    frequencies: &'a [f64],
    ambiguous: bool,
    candidates: &'a [SparseSignal],
    #[serde(flatten)]
    details: &'a hybrid_scattering::amplitude::RecoveryDiagnostics,
}

fn recover(mut args: RecoverArgs) -> Result<Status, Failure> {
    let (mut freqs, mut sweeps, _) = read_sweeps(&args.sweeps, Some(args.p))?;
    let used = *args.num_freqs.get_or_insert(freqs.len());
    print_config(&Command::Recover(args.clone()))?;
    if used > freqs.len() {
        return Err(Failure::precondition(format!("{used} frequencies requested, {} available", freqs.len())));
    }
    freqs.truncate(used);
    sweeps.truncate(used);
    let config = RecoveryConfig {
        p: args.p,
        norm: args.norm,
        grid_step: args.grid_step,
        rel_tol: args.rel_tol,
        seed: args.seed,
    };
    let recovery = recover_signal(&sweeps, &freqs, &config)?;
    let first = recovery
        .signals
        .first()
        .ok_or_else(|| Failure::Numerical(anyhow::anyhow!("recovery returned no candidate")))?;
    emit(args.out.as_deref(), &to_json(first)?)?;
    if let Some(path) = &args.diagnostics {
        let report = RecoverDiagnostics {
            frequencies: &freqs,
            ambiguous: recovery.ambiguous,
            candidates: &recovery.signals,
            details: &recovery.diagnostics,
        };
        emit(Some(path), &to_json(&report)?)?;
    }
    Ok(if recovery.ambiguous { Status::Ambiguous } else { Status::Done })
}

#[derive(Serialize)]
struct TraceRow {
    sweep: usize,
    residual: f64,
}

pub fn trace_csv(result: &SynthesisResult) -> Result<String, Failure> {
    csv_string(result.trace.iter().enumerate().map(|(sweep, &residual)| TraceRow { sweep, residual }))
}

/// `g·x` on grid indices.
fn moved_indices(x: &SparseSignal, g: &GroupElement, step: f64) -> Vec<(i64, f64)> {
    x.locations()
        .iter()
        .zip(x.amplitudes())
        .map(|(&v, &a)| {
            let n = (v / step).round() as i64;
            let n = if g.reflected { -n } else { n };
            (n + g.shift, g.sign * a)
        })
        .collect()
}

#[derive(Serialize)]
struct PairRow {
    index: i64,
    original: f64,
    reconstructed: f64,
}

/// Original moved onto the reconstruction next to the reconstruction, over
/// the joint index range.
pub fn pair_rows(x: &SparseSignal, x_tilde: &SparseSignal, g: &GroupElement) -> Vec<(i64, f64, f64)> {
    let step = x.grid_step().or(x_tilde.grid_step()).unwrap_or(1.0);
    let original = if g.shift == i64::MAX { Vec::new() } else { moved_indices(x, g, step) };
    let reconstructed: Vec<(i64, f64)> = x_tilde
        .locations()
        .iter()
        .zip(x_tilde.amplitudes())
        .map(|(&v, &a)| ((v / step).round() as i64, a))
        .collect();
    let all: Vec<i64> = original.iter().chain(&reconstructed).map(|e| e.0).collect();
    let (Some(&lo), Some(&hi)) = (all.iter().min(), all.iter().max()) else {
        return Vec::new();
    };
    (lo..=hi)
        .map(|n| {
            let find = |list: &[(i64, f64)]| list.iter().find(|e| e.0 == n).map_or(0.0, |e| e.1);
            (n, find(&original), find(&reconstructed))
        })
        .collect()
}

pub fn pair_csv(rows: &[(i64, f64, f64)]) -> Result<String, Failure> {
    csv_string(rows.iter().map(|&(index, original, reconstructed)| PairRow { index, original, reconstructed }))
}

pub fn pair_svg(title: &str, rows: &[(i64, f64, f64)]) -> String {
    let keep = |f: fn(&(i64, f64, f64)) -> f64| -> Vec<(f64, f64)> {
        rows.iter().filter(|r| f(r) != 0.0).map(|r| (r.0 as f64, f(r))).collect()
    };
    svg::render(
        title,
        &[
            svg::Series { label: "original".into(), style: svg::Style::Stems, points: keep(|r| r.1) },
            svg::Series { label: "reconstructed".into(), style: svg::Style::Stems, points: keep(|r| r.2) },
        ],
    )
}

#[derive(Serialize)]
struct SynthesisSummary {
    residual: f64,
    restart: usize,
    sweeps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<GroupElement>,
}

fn synthesize(mut args: SynthesizeArgs) -> Result<Status, Failure> {
    if args.targets.is_none() {
        if args.freqs.is_empty() {
            args.freqs = REFERENCE_FREQUENCIES.to_vec();
        }
        if args.scales.is_empty() {
            args.scales = REFERENCE_SCALES[0].to_vec();
        }
    }
    print_config(&Command::Synthesize(args.clone()))?;
    let truth = args.input.as_deref().map(read_signal).transpose()?;
    let targets = match (&args.targets, &truth) {
        (Some(path), _) => read_measurements(std::slice::from_ref(path))?,
        (None, Some(x)) => measurement_batch(x, &args.scales, &args.freqs, args.p, Window::Indicator, args.convention)?,
        (None, None) => return Err(Failure::precondition("either --targets or --input is required")),
    };
    let mut config = SynthesisConfig::new(args.n, targets, args.budget, args.seed);
    config.restarts = args.restarts;
    config.max_sweeps = args.max_sweeps;
    let result = greedy_synthesize(&config)?;
    emit(args.out.as_deref(), &to_json(&result.signal)?)?;
    if let Some(path) = &args.trace {
        emit(Some(path), &trace_csv(&result)?)?;
    }
    let mut summary = SynthesisSummary {
        residual: result.residual,
        restart: result.restart,
        sweeps: result.trace.len(),
        error: None,
        group: None,
    };
    let identity = GroupElement { reflected: false, shift: 0, sign: 1.0 };
    let rows = match &truth {
        Some(x) => {
            let (error, g) = evaluate_reconstruction(x, &result.signal)?;
            summary.error = Some(error);
            summary.group = Some(g);
            pair_rows(x, &result.signal, &g)
        }
        None => pair_rows(&SparseSignal::empty(), &result.signal, &identity),
    };
    if let Some(path) = &args.plot {
        emit(Some(path), &pair_csv(&rows)?)?;
    }
    if let Some(path) = &args.svg {
        emit(Some(path), &pair_svg("synthesis", &rows))?;
    }
    if args.out.is_some() {
        println!("{}", serde_json::to_string(&summary).map_err(anyhow::Error::from)?);
    }
    Ok(Status::Done)
}

pub fn lemma_reports(
    lemmas: &[Lemma],
    trials: usize,
    seed: u64,
    p: u32,
    odd_p: u32,
    samples: usize,
    scan_step: f64,
) -> Result<Vec<LemmaReport>, Failure> {
    lemmas
        .iter()
        .map(|&lemma| {
            let params = LemmaParams {
                p: if lemma == Lemma::FourPSolutions { odd_p } else { p },
                samples,
                scan_step,
                ..LemmaParams::default()
            };
            Ok(check_lemma_statement(lemma, &params, trials, seed)?)
        })
        .collect()
}

fn verify(args: VerifyArgs) -> Result<Status, Failure> {
    print_config(&Command::Verify(args.clone()))?;
    let lemmas: Vec<Lemma> = if args.lemma == "all" {
        Lemma::ALL.to_vec()
    } else {
        vec![args.lemma.parse()?]
    };
    let reports = lemma_reports(&lemmas, args.trials, args.seed, args.p, args.odd_p, args.samples, args.scan_step)?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&serde_json::to_string(r).map_err(anyhow::Error::from)?);
        text.push('\n');
    }
    emit(args.out.as_deref(), &text)?;
    for r in &reports {
        eprintln!(
            "{} {}: {}/{} trials, worst {:.6} against {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.lemma,
            r.passed_trials,
            r.trials,
            r.worst,
            r.threshold
        );
    }
    Ok(if reports.iter().all(|r| r.pass) { Status::Done } else { Status::Failed })
}

fn load_config(path: &Path) -> Result<Command, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::precondition(format!("reading {}: {e}", path.display())))?;
    let line = text.lines().next().unwrap_or_default();
    serde_json::from_str(line).map_err(|e| Failure::precondition(format!("parsing {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match (cli.config, cli.command) {
        (Some(_), Some(_)) => Err(Failure::precondition("--config replaces the subcommand; pass only one")),
        (Some(path), None) => load_config(&path),
        (None, Some(command)) => Ok(command),
        (None, None) => Err(Failure::precondition("a subcommand or --config is required")),
    };
    match command.and_then(run) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Ambiguous) => {
            eprintln!("hscat: recovery is ambiguous; every candidate was written");
            ExitCode::from(3)
        }
        Ok(Status::Failed) => ExitCode::from(4),
        Err(failure) => {
            let (Failure::Precondition(e) | Failure::Numerical(e)) = &failure;
            eprintln!("hscat: {e:#}");
            ExitCode::from(failure.exit_code())
        }
    }
}
