//! Command-line front end for the next-node TSP pipeline.
//!
//! Exit codes: 0 success, 1 pipeline error (a JSON summary goes to stderr),
//! 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tsp_core::benchmark::{
    run_benchmark, solve_one, sweep_k, write_sweep_csv, BenchConfig, Baseline, BenchmarkReport,
};
use tsp_core::decoding::{Symmetrization, DEFAULT_M_SPATIAL};
use tsp_core::encoding::{encode_training, DEFAULT_K};
use tsp_core::exact::held_karp;
use tsp_core::formats::{read_instances, write_instance, write_instances, InstanceEntry, InstanceFormat};
use tsp_core::geometry::{generate_instance, tour_length};
use tsp_core::local_search::multi_start_two_opt;
use tsp_core::predictor::{fit, FittedPredictor, PredictorKind, PredictorSpec};
use tsp_core::Tour;

#[derive(Parser)]
#[command(name = "tsptool", version, about = "Next-node regression pipeline for the Euclidean TSP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random unit-square instances in canonical format.
    Generate(GenerateArgs),
    /// Decode tours for a set of instances.
    Solve(SolveArgs),
    /// Solve and compare against a baseline; writes a per-instance report.
    Bench(BenchArgs),
    /// Mean gap for each neighbour count k.
    SweepK(SweepArgs),
    /// Optimal tours by Held-Karp (n <= 16).
    Exact(ExactArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Instance i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; one file per instance.
    #[arg(long)]
    out: PathBuf,
    /// Attach a reference tour: best 2-opt optimum over this many random starts.
    #[arg(long)]
    reference_restarts: Option<usize>,
    /// Attach the Held-Karp optimal tour (n <= 16).
    #[arg(long, conflicts_with = "reference_restarts")]
    exact: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Auto,
    Canonical,
    CoordsOutput,
}

impl From<FormatArg> for InstanceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Auto => InstanceFormat::Auto,
            FormatArg::Canonical => InstanceFormat::Canonical,
            FormatArg::CoordsOutput => InstanceFormat::CoordsOutput,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SymArg {
    Max,
    Sum,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Ref,
    HeldKarp,
}

impl From<BaselineArg> for Baseline {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Ref => Baseline::Reference,
            BaselineArg::HeldKarp => Baseline::HeldKarp,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// oracle | nearest | cmd:<adapter command line> | replay:<dir>
    #[arg(long, default_value = "nearest")]
    predictor: String,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_M_SPATIAL)]
    m_spatial: usize,
    /// How directed probabilities combine into an undirected edge score.
    #[arg(long, value_enum, default_value = "max")]
    symmetrization: SymArg,
    #[arg(long)]
    two_opt: bool,
    /// 2-opt time limit in seconds per instance (default: none up to 200 nodes, 60 above).
    #[arg(long)]
    time_limit: Option<f64>,
    /// Worker threads (default: available CPUs).
    #[arg(long)]
    workers: Option<usize>,
    /// Existing model artifact for an external adapter.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Adapt the predictor first on this instance file (first instance, needs a tour or n <= 16).
    #[arg(long)]
    fit_on: Option<PathBuf>,
    /// Scratch directory for adapter exchange files.
    #[arg(long, default_value = "adapter-work")]
    adapter_workdir: PathBuf,
    /// Adapter timeout in seconds per call.
    #[arg(long, default_value_t = 600.0)]
    adapter_timeout: f64,
    /// Archive every prediction set (replayable with --predictor replay:<dir>).
    #[arg(long)]
    archive: Option<PathBuf>,
    /// Write probability matrices and accepted edges per instance.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    format: FormatArg,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instances: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// CSV with instance_id,n,length,wall_time_s,tour.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    instances: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_enum, default_value = "ref")]
    baseline: BaselineArg,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Training instance file (first instance used).
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    eval: PathBuf,
    /// `a..b` (inclusive) or a comma list, e.g. `1..40` or `1,2,5,10`.
    #[arg(long, default_value = "1..40")]
    k_range: String,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_enum, default_value = "ref")]
    baseline: BaselineArg,
    /// CSV with k,mean_gap_percent,instances.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    format: FormatArg,
    /// Canonical file with every instance and its optimal tour.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct ErrorSummary<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failures: Vec<FailedInstance>,
}

#[derive(Serialize)]
struct FailedInstance {
    instance_id: String,
    kind: String,
    message: String,
}

/// A pipeline run that finished but left some instances unsolved.
#[derive(Debug)]
struct PartialFailure(Vec<(String, String, String)>);

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} instance(s) failed", self.0.len())
    }
}

impl std::error::Error for PartialFailure {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, failures) = if let Some(p) = err.downcast_ref::<PartialFailure>() {
                let failures = p
                    .0
                    .iter()
                    .map(|(id, kind, msg)| FailedInstance {
                        instance_id: id.clone(),
                        kind: kind.clone(),
                        message: msg.clone(),
                    })
                    .collect();
                ("partial-failure", failures)
            } else if let Some(e) = err.downcast_ref::<tsp_core::Error>() {
                (e.kind(), Vec::new())
            } else {
                ("error", Vec::new())
            };
            let summary = ErrorSummary {
                error: kind,
                message: format!("{err:#}"),
                failures,
            };
            eprintln!("{}", serde_json::to_string(&summary).expect("summary serialises"));
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::SweepK(a) => sweep(a),
        Command::Exact(a) => exact(a),
    }
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let width = a.count.saturating_sub(1).to_string().len().max(4);
    for i in 0..a.count {
        let seed = a.seed.wrapping_add(i);
        let inst = generate_instance(a.n, seed)?;
        let tour = if a.exact {
            Some(held_karp(&inst)?.0)
        } else if let Some(r) = a.reference_restarts {
            Some(multi_start_two_opt(&inst, r, seed)?)
        } else {
            None
        };
        let path = a.out.join(format!("inst-{i:0width$}.tsp"));
        write_instance(&inst, tour.as_ref(), &path)?;
    }
    Ok(())
}

fn load(path: &Path, format: FormatArg) -> anyhow::Result<Vec<InstanceEntry>> {
    let entries = read_instances(path, format.into())
        .with_context(|| format!("reading instances from {}", path.display()))?;
    if entries.is_empty() {
        bail!("no instances found in {}", path.display());
    }
    Ok(entries)
}

fn bench_config(p: &PipelineArgs) -> anyhow::Result<BenchConfig> {
    let time_limit = p
        .time_limit
        .map(|s| Duration::try_from_secs_f64(s).map_err(|_| anyhow!("bad --time-limit {s}")))
        .transpose()?;
    Ok(BenchConfig {
        k: p.k,
        m_spatial: p.m_spatial,
        symmetrization: match p.symmetrization {
            SymArg::Max => Symmetrization::Max,
            SymArg::Sum => Symmetrization::Sum,
        },
        two_opt: p.two_opt,
        time_limit,
        workers: p.workers.unwrap_or(0),
        archive_dir: p.archive.clone(),
        dump_dir: p.dump_dir.clone(),
    })
}

fn predictor_spec(p: &PipelineArgs) -> anyhow::Result<PredictorSpec> {
    let mut spec = PredictorSpec::parse(&p.predictor, &p.adapter_workdir)?;
    if let PredictorKind::External(adapter) = &mut spec.kind {
        adapter.timeout = Duration::try_from_secs_f64(p.adapter_timeout)
            .map_err(|_| anyhow!("bad --adapter-timeout {}", p.adapter_timeout))?;
    }
    Ok(spec)
}

/// First instance of `path` with a reference tour (Held-Karp when missing and small enough).
fn training_sample(path: &Path, format: FormatArg) -> anyhow::Result<(tsp_core::TspInstance, Tour)> {
    let (inst, tour) = load(path, format)?.into_iter().next().expect("non-empty");
    let tour = match tour {
        Some(t) => t,
        None => held_karp(&inst)
            .map(|(t, _)| t)
            .context("training instance has no tour and is too large for the exact solver")?,
    };
    Ok((inst, tour))
}

fn fitted_predictor(p: &PipelineArgs) -> anyhow::Result<FittedPredictor> {
    let spec = predictor_spec(p)?;
    match &p.fit_on {
        Some(train) => {
            let (inst, tour) = training_sample(train, p.format)?;
            let table = encode_training(&inst, &tour, p.k)?;
            Ok(fit(&spec, &table)?)
        }
        None => Ok(spec.unfitted(p.model.clone())),
    }
}

fn solve(a: SolveArgs) -> anyhow::Result<()> {
    let entries = load(&a.instances, a.pipeline.format)?;
    let cfg = bench_config(&a.pipeline)?;
    let predictor = fitted_predictor(&a.pipeline)?;
    if let Some(dir) = &cfg.archive_dir {
        fs::create_dir_all(dir)?;
    }

    let mut out = String::from("instance_id,n,length,wall_time_s,tour\n");
    let mut failed = Vec::new();
    for (inst, reference) in &entries {
        let solved = solve_one(inst, reference.as_ref(), &predictor, &cfg)
            .and_then(|(t, dt)| Ok((tour_length(inst, &t)?, t, dt)));
        match solved {
            Ok((len, tour, dt)) => {
                let order: Vec<String> = tour.order().iter().map(usize::to_string).collect();
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    inst.id(),
                    inst.len(),
                    len,
                    dt.as_secs_f64(),
                    order.join(" ")
                ));
                println!("{} {len:.6}", inst.id());
            }
            Err(e) => failed.push((inst.id().to_string(), e.kind().to_string(), e.to_string())),
        }
    }
    fs::write(&a.out, out).with_context(|| format!("writing {}", a.out.display()))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(PartialFailure(failed).into())
    }
}

fn finish_report(report: &BenchmarkReport, path: &Path) -> anyhow::Result<()> {
    report
        .write_csv(path)
        .with_context(|| format!("writing {}", path.display()))?;
    print!("{}", report.summary());
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(PartialFailure(
            report
                .failures
                .iter()
                .map(|f| (f.instance_id.clone(), f.kind.clone(), f.message.clone()))
                .collect(),
        )
        .into())
    }
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let entries = load(&a.instances, a.pipeline.format)?;
    let cfg = bench_config(&a.pipeline)?;
    let predictor = fitted_predictor(&a.pipeline)?;
    let report = run_benchmark(&entries, &predictor, &cfg, a.baseline.into())?;
    finish_report(&report, &a.report)
}

fn parse_k_range(s: &str) -> anyhow::Result<Vec<usize>> {
    let bad = || anyhow!("bad --k-range {s:?}; use `a..b` or `k1,k2,...`");
    let ks: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<anyhow::Result<_>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let ks = parse_k_range(&a.k_range)?;
    let (train, train_tour) = training_sample(&a.train, a.pipeline.format)?;
    let eval = load(&a.eval, a.pipeline.format)?;
    let cfg = bench_config(&a.pipeline)?;
    let spec = predictor_spec(&a.pipeline)?;
    let points = sweep_k((&train, &train_tour), &eval, &spec, &ks, &cfg, a.baseline.into())?;
    write_sweep_csv(&points, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    for p in &points {
        println!("k={:<3} mean gap {:>8.3}% over {} instances", p.k, p.mean_gap_percent, p.instances);
    }
    Ok(())
}

fn exact(a: ExactArgs) -> anyhow::Result<()> {
    let entries = load(&a.instances, a.format)?;
    let solved = entries
        .into_iter()
        .map(|(inst, _)| {
            let (tour, len) = held_karp(&inst)?;
            println!("{} {len:.6}", inst.id());
            Ok((inst, Some(tour)))
        })
        .collect::<tsp_core::Result<Vec<_>>>()?;
    write_instances(&solved, &a.out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_k_range("1,2, 5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_k_range("1..40").unwrap().len(), 40);
        assert!(parse_k_range("0..3").is_err());
        assert!(parse_k_range("a").is_err());
    }
}
