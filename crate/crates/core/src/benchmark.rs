//! Evaluation harness: run the pipeline over an instance set, compare every
//! tour with a baseline and aggregate lengths and gaps.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::decoding::{decode, decode_traced, write_debug_dump, DecodeConfig, Symmetrization, DEFAULT_M_SPATIAL};
use crate::encoding::{encode_inference, encode_training, write_prediction_csv, DEFAULT_K};
use crate::error::{Error, Result};
use crate::exact::{held_karp, MAX_EXACT_NODES};
use crate::formats::InstanceEntry;
use crate::geometry::{tour_length, Tour, TspInstance};
use crate::local_search::{default_time_limit, two_opt};
use crate::predictor::{fit, FittedPredictor, PredictorKind, PredictorSpec};

/// Signed relative gap in percent: `100 * (achieved - baseline) / baseline`.
pub fn gap_percent(baseline: f64, achieved: f64) -> Result<f64> {
    if !(baseline > 0.0) || !baseline.is_finite() {
        return Err(Error::InvalidBaseline(baseline));
    }
    Ok(100.0 * (achieved - baseline) / baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Tours shipped with the instances.
    Reference,
    /// Exact tours, computed on the fly; all instances need n <= 16.
    HeldKarp,
}

impl Baseline {
    pub fn label(self) -> &'static str {
        match self {
            Baseline::Reference => "reference",
            Baseline::HeldKarp => "held-karp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub k: usize,
    pub m_spatial: usize,
    pub symmetrization: Symmetrization,
    pub two_opt: bool,
    /// 2-opt time limit per instance; `None` applies [`default_time_limit`].
    pub time_limit: Option<Duration>,
    /// Worker threads; 0 means one per available CPU.
    pub workers: usize,
    /// When set, every instance's predictions are written to
    /// `<dir>/<instance id>.pred.csv` together with `config.json`.
    pub archive_dir: Option<PathBuf>,
    /// When set, the probability matrix and accepted edges of every decode
    /// are written to `<dir>/<instance id>.decode.txt`.
    pub dump_dir: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            k: DEFAULT_K,
            m_spatial: DEFAULT_M_SPATIAL,
            symmetrization: Symmetrization::default(),
            two_opt: false,
            time_limit: None,
            workers: 0,
            archive_dir: None,
            dump_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSnapshot {
    pub k: usize,
    pub m_spatial: usize,
    pub symmetrization: String,
    pub two_opt: bool,
    pub time_limit_s: Option<f64>,
    pub predictor: String,
    pub baseline: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub instance_id: String,
    pub method: String,
    pub n: usize,
    pub tour: Tour,
    pub length: f64,
    pub baseline_length: f64,
    /// Signed; negative when the pipeline beats the baseline.
    pub gap_percent: f64,
    /// Encode, predict, decode and the optional 2-opt pass.
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureRecord {
    pub instance_id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub count: usize,
    pub mean_length: f64,
    pub mean_gap_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub config: ConfigSnapshot,
    pub records: Vec<RunRecord>,
    pub failures: Vec<FailureRecord>,
    pub adaptation_time: Duration,
    /// Training instances the predictor was adapted on.
    pub data_used: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

impl BenchmarkReport {
    /// Arithmetic means over the successful records, in record order.
    pub fn aggregates(&self) -> Aggregates {
        Aggregates {
            count: self.records.len(),
            mean_length: mean(self.records.iter().map(|r| r.length)),
            mean_gap_percent: mean(self.records.iter().map(|r| r.gap_percent)),
        }
    }

    pub fn method(&self) -> String {
        method_label(&self.config.predictor, self.config.two_opt)
    }

    pub const CSV_HEADER: &'static str =
        "instance_id,method,n,length,baseline_length,gap_percent,wall_time_s,k,m_spatial,two_opt,predictor,tour";

    /// One row per record; `tour` is space-separated node indices.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            let tour: Vec<String> = r.tour.order().iter().map(usize::to_string).collect();
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.instance_id,
                r.method,
                r.n,
                r.length,
                r.baseline_length,
                r.gap_percent,
                r.wall_time.as_secs_f64(),
                self.config.k,
                self.config.m_spatial,
                self.config.two_opt,
                self.config.predictor,
                tour.join(" ")
            )?;
        }
        f.flush()?;
        Ok(())
    }

    /// Human-readable table. The `gap (>=0)` column clamps negative gaps to
    /// zero for comparison with tables that never print negative gaps.
    pub fn summary(&self) -> String {
        let a = self.aggregates();
        let mut s = String::new();
        writeln!(
            s,
            "{:<20} {:>9} {:>9} {:>8} {:>8} {:>10} {:>9} {:>9}",
            "method", "instances", "failures", "length", "gap %", "gap (>=0)", "adapt", "data used"
        )
        .unwrap();
        writeln!(
            s,
            "{:<20} {:>9} {:>9} {:>8.3} {:>8.2} {:>10.2} {:>8.1}s {:>9}",
            self.method(),
            a.count,
            self.failures.len(),
            a.mean_length,
            a.mean_gap_percent,
            a.mean_gap_percent.max(0.0),
            self.adaptation_time.as_secs_f64(),
            self.data_used
        )
        .unwrap();
        writeln!(s, "baseline: {}", self.config.baseline).unwrap();
        for f in &self.failures {
            writeln!(s, "failed {}: [{}] {}", f.instance_id, f.kind, f.message).unwrap();
        }
        s
    }
}

fn method_label(predictor: &str, two_opt: bool) -> String {
    if two_opt {
        format!("{predictor}+G+2opt")
    } else {
        format!("{predictor}+G")
    }
}

fn predictor_label(p: &FittedPredictor) -> String {
    match &p.spec.kind {
        PredictorKind::External(a) => format!("external:{}", a.program),
        PredictorKind::Replay(d) => format!("replay:{}", d.display()),
        k => k.label().to_string(),
    }
}

fn snapshot(cfg: &BenchConfig, predictor: &FittedPredictor, baseline: Baseline) -> ConfigSnapshot {
    ConfigSnapshot {
        k: cfg.k,
        m_spatial: cfg.m_spatial,
        symmetrization: format!("{:?}", cfg.symmetrization).to_lowercase(),
        two_opt: cfg.two_opt,
        time_limit_s: cfg.time_limit.map(|d| d.as_secs_f64()),
        predictor: predictor_label(predictor),
        baseline: baseline.label().to_string(),
    }
}

struct Prepared<'a> {
    inst: &'a TspInstance,
    baseline: (Tour, f64),
}

fn prepare<'a>(entry: &'a InstanceEntry, baseline: Baseline) -> Result<Prepared<'a>> {
    let (inst, reference) = entry;
    let baseline = match baseline {
        Baseline::Reference => {
            let t = reference.clone().ok_or_else(|| {
                Error::Precondition(format!("instance {} has no reference tour", inst.id()))
            })?;
            let len = tour_length(inst, &t)?;
            (t, len)
        }
        Baseline::HeldKarp => held_karp(inst)?,
    };
    Ok(Prepared { inst, baseline })
}

/// Encode, predict, decode and optionally 2-opt one instance. `context` is
/// handed to the predictor (the oracle reads its successors from it).
pub fn solve_one(
    inst: &TspInstance,
    context: Option<&Tour>,
    predictor: &FittedPredictor,
    cfg: &BenchConfig,
) -> Result<(Tour, Duration)> {
    let start = Instant::now();
    let table = encode_inference(inst, cfg.k)?;
    let preds = predictor.predict(&table, context, inst.id())?;
    if let Some(dir) = &cfg.archive_dir {
        write_prediction_csv(&preds.to_rows(), &dir.join(format!("{}.pred.csv", inst.id())))?;
    }
    let decode_cfg = DecodeConfig {
        m_spatial: cfg.m_spatial,
        symmetrization: cfg.symmetrization,
    };
    let mut tour = match &cfg.dump_dir {
        Some(dir) => {
            let trace = decode_traced(inst, &preds, &decode_cfg)?;
            fs::create_dir_all(dir)?;
            write_debug_dump(&trace, &dir.join(format!("{}.decode.txt", inst.id())))?;
            trace.tour
        }
        None => decode(inst, &preds, &decode_cfg)?,
    };
    if cfg.two_opt {
        let limit = cfg.time_limit.or_else(|| default_time_limit(inst.len()));
        tour = two_opt(inst, &tour, limit)?;
    }
    Ok((tour, start.elapsed()))
}

fn run_one(p: &Prepared<'_>, predictor: &FittedPredictor, cfg: &BenchConfig, method: &str) -> Result<RunRecord> {
    let inst = p.inst;
    let (tour, wall_time) = solve_one(inst, Some(&p.baseline.0), predictor, cfg)?;
    let length = tour_length(inst, &tour)?;
    Ok(RunRecord {
        instance_id: inst.id().to_string(),
        method: method.to_string(),
        n: inst.len(),
        tour,
        length,
        baseline_length: p.baseline.1,
        gap_percent: gap_percent(p.baseline.1, length)?,
        wall_time,
    })
}

/// Runs the pipeline on every instance.
///
/// Baseline preconditions (reference tours present, sizes within the exact
/// cap) are checked up front and fail the whole run. Errors inside the
/// per-instance pipeline are recorded as failures and left out of the
/// aggregates.
pub fn run_benchmark(
    instances: &[InstanceEntry],
    predictor: &FittedPredictor,
    cfg: &BenchConfig,
    baseline: Baseline,
) -> Result<BenchmarkReport> {
    match baseline {
        Baseline::HeldKarp => {
            if let Some((inst, _)) = instances.iter().find(|(i, _)| i.len() > MAX_EXACT_NODES) {
                return Err(Error::SizeCap(inst.len()));
            }
        }
        Baseline::Reference => {
            if let Some((inst, _)) = instances.iter().find(|(_, t)| t.is_none()) {
                return Err(Error::Precondition(format!(
                    "baseline=reference but instance {} has no reference tour",
                    inst.id()
                )));
            }
        }
    }
    let config = snapshot(cfg, predictor, baseline);
    if let Some(dir) = &cfg.archive_dir {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&config).expect("plain struct serialises");
        fs::write(dir.join("config.json"), json + "\n")?;
    }
    let method = method_label(&config.predictor, cfg.two_opt);

    // one adapter process at a time per predictor
    let workers = match predictor.spec.kind {
        PredictorKind::External(_) => 1,
        _ => cfg.workers,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;

    let outcomes: Vec<std::result::Result<RunRecord, FailureRecord>> = pool.install(|| {
        instances
            .par_iter()
            .map(|entry| {
                let fail = |e: Error| FailureRecord {
                    instance_id: entry.0.id().to_string(),
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                };
                let prepared = prepare(entry, baseline).map_err(fail)?;
                run_one(&prepared, predictor, cfg, &method).map_err(fail)
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(BenchmarkReport {
        config,
        records,
        failures,
        adaptation_time: predictor.adaptation_time,
        data_used: usize::from(predictor.training_rows > 0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub k: usize,
    pub mean_gap_percent: f64,
    pub instances: usize,
}

/// For each `k`: encode the training sample at `k`, adapt the predictor,
/// benchmark the evaluation set at the same `k`. Archived predictions, when
/// enabled, go to `<archive_dir>/k<k>/`.
pub fn sweep_k(
    train: (&TspInstance, &Tour),
    eval: &[InstanceEntry],
    template: &PredictorSpec,
    k_values: &[usize],
    cfg: &BenchConfig,
    baseline: Baseline,
) -> Result<Vec<SweepPoint>> {
    if eval.is_empty() {
        return Err(Error::Precondition("k-sweep needs a non-empty evaluation set".into()));
    }
    if let Some(&k) = k_values.iter().find(|&&k| k == 0) {
        return Err(Error::Precondition(format!("neighbour count must be >= 1, got {k}")));
    }
    k_values
        .iter()
        .map(|&k| {
            let table = encode_training(train.0, train.1, k)?;
            let fitted = fit(template, &table)?;
            let cfg = BenchConfig {
                k,
                archive_dir: cfg.archive_dir.as_ref().map(|d| d.join(format!("k{k}"))),
                ..cfg.clone()
            };
            let report = run_benchmark(eval, &fitted, &cfg, baseline)?;
            let agg = report.aggregates();
            Ok(SweepPoint {
                k,
                mean_gap_percent: agg.mean_gap_percent,
                instances: agg.count,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "k,mean_gap_percent,instances";

pub fn write_sweep_csv(points: &[SweepPoint], path: &Path) -> Result<()> {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for p in points {
        writeln!(s, "{},{},{}", p.k, p.mean_gap_percent, p.instances).unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}
