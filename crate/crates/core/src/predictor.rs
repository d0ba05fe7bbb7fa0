//! Next-node location predictors.
//!
//! Built-in predictors run in-process. External predictors are separate
//! programs that exchange CSV files with this crate:
//!
//! ```text
//! <command> train   --features <train.csv> --model-out <dir>
//! <command> predict --features <infer.csv> --model <dir> --out <pred.csv>
//! ```
//!
//! Exit status 0 means success; anything else is an adapter failure and the
//! captured stdout/stderr are attached to the error.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::encoding::{read_prediction_csv, write_feature_csv, FeatureTable, Mode};
use crate::error::{Error, Result};
use crate::geometry::{validate_order, Point, Tour, TourVerdict};

pub const DEFAULT_ADAPTER_TIMEOUT: Duration = Duration::from_secs(600);

/// One predicted successor location per node, indexed by node.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet(Vec<Point>);

impl PredictionSet {
    pub fn new(points: Vec<Point>) -> Self {
        PredictionSet(points)
    }

    /// Builds a set from `(row_id, x, y)` triples in any order. Every id in
    /// `0..n` must appear exactly once and all coordinates must be finite.
    pub fn from_keyed(n: usize, rows: &[(usize, f64, f64)]) -> Result<Self> {
        let mut slots = vec![None; n];
        for &(id, x, y) in rows {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::Protocol(format!("row {id}: non-finite prediction")));
            }
            let slot = slots
                .get_mut(id)
                .ok_or_else(|| Error::Protocol(format!("row_id {id} out of range")))?;
            if slot.replace(Point::new(x, y)).is_some() {
                return Err(Error::Protocol(format!("duplicate row_id {id}")));
            }
        }
        let points = slots
            .into_iter()
            .enumerate()
            .map(|(id, p)| p.ok_or_else(|| Error::Protocol(format!("missing row_id {id}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PredictionSet(points))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Point {
        self.0[i]
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn to_rows(&self) -> Vec<(usize, f64, f64)> {
        self.0.iter().enumerate().map(|(i, p)| (i, p.x, p.y)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalAdapter {
    pub program: String,
    pub args: Vec<String>,
    /// Where feature, prediction and log files are exchanged.
    pub workdir: PathBuf,
    pub timeout: Duration,
}

impl ExternalAdapter {
    /// Splits a shell-style command line into program and arguments.
    pub fn from_command_line(cmd: &str, workdir: impl Into<PathBuf>) -> Result<Self> {
        let words = shlex::split(cmd)
            .ok_or_else(|| Error::Precondition(format!("cannot parse adapter command {cmd:?}")))?;
        let (program, args) = words
            .split_first()
            .ok_or_else(|| Error::Precondition("adapter command is empty".into()))?;
        Ok(ExternalAdapter {
            program: program.clone(),
            args: args.to_vec(),
            workdir: workdir.into(),
            timeout: DEFAULT_ADAPTER_TIMEOUT,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorKind {
    /// Successor coordinates read off a reference tour. Test and sanity use only.
    Oracle,
    /// Coordinates of each node's nearest neighbour.
    Nearest,
    External(ExternalAdapter),
    /// Reads `<dir>/<tag>.pred.csv` archived by an earlier run.
    Replay(PathBuf),
}

impl PredictorKind {
    pub fn label(&self) -> &'static str {
        match self {
            PredictorKind::Oracle => "oracle",
            PredictorKind::Nearest => "nearest",
            PredictorKind::External(_) => "external",
            PredictorKind::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSpec {
    pub kind: PredictorKind,
}

impl PredictorSpec {
    pub fn oracle() -> Self {
        PredictorSpec {
            kind: PredictorKind::Oracle,
        }
    }

    pub fn nearest() -> Self {
        PredictorSpec {
            kind: PredictorKind::Nearest,
        }
    }

    pub fn external(adapter: ExternalAdapter) -> Self {
        PredictorSpec {
            kind: PredictorKind::External(adapter),
        }
    }

    /// Parses `oracle`, `nearest`, `cmd:<command line>` or `replay:<dir>`.
    /// External adapters exchange files in `workdir`.
    pub fn parse(s: &str, workdir: &Path) -> Result<Self> {
        let kind = match s {
            "oracle" => PredictorKind::Oracle,
            "nearest" => PredictorKind::Nearest,
            _ => {
                if let Some(cmd) = s.strip_prefix("cmd:") {
                    PredictorKind::External(ExternalAdapter::from_command_line(cmd, workdir)?)
                } else if let Some(dir) = s.strip_prefix("replay:") {
                    PredictorKind::Replay(PathBuf::from(dir))
                } else {
                    return Err(Error::Precondition(format!(
                        "unknown predictor {s:?}; expected oracle, nearest, cmd:<command> or replay:<dir>"
                    )));
                }
            }
        };
        Ok(PredictorSpec { kind })
    }

    /// A predictor ready for `predict` without any adaptation step. External
    /// adapters need `model` to point at an existing artifact.
    pub fn unfitted(self, model: Option<PathBuf>) -> FittedPredictor {
        FittedPredictor {
            spec: self,
            model,
            adaptation_time: Duration::ZERO,
            training_rows: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedPredictor {
    pub spec: PredictorSpec,
    /// Model artifact directory produced by an external `train` call.
    pub model: Option<PathBuf>,
    pub adaptation_time: Duration,
    /// Rows of the table the predictor was adapted on (0 when not adapted).
    pub training_rows: usize,
}

static CALL_SEQ: AtomicU64 = AtomicU64::new(0);

fn file_tag(tag: &str) -> String {
    let clean: String = tag
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{clean}-{}", CALL_SEQ.fetch_add(1, Ordering::Relaxed))
}

fn run_adapter(adapter: &ExternalAdapter, extra: &[&str], log_stem: &Path) -> Result<()> {
    let out_log = log_stem.with_extension("stdout.log");
    let err_log = log_stem.with_extension("stderr.log");
    let mut child = Command::new(&adapter.program)
        .args(&adapter.args)
        .args(extra)
        .stdin(Stdio::null())
        .stdout(File::create(&out_log)?)
        .stderr(File::create(&err_log)?)
        .spawn()
        .map_err(|e| Error::Adapter {
            message: format!("cannot start {:?}: {e}", adapter.program),
            diagnostics: String::new(),
        })?;

    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if start.elapsed() >= adapter.timeout {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let diagnostics = || {
        let read = |p: &Path| fs::read_to_string(p).unwrap_or_default();
        format!("--- stdout ---\n{}--- stderr ---\n{}", read(&out_log), read(&err_log))
    };
    match status {
        Some(s) if s.success() => Ok(()),
        Some(s) => Err(Error::Adapter {
            message: format!("{} {} exited with {s}", adapter.program, extra[0]),
            diagnostics: diagnostics(),
        }),
        None => Err(Error::Adapter {
            message: format!("{} {} timed out after {:?}", adapter.program, extra[0], adapter.timeout),
            diagnostics: diagnostics(),
        }),
    }
}

/// Adapts a predictor to a training table. Built-ins are stateless and return
/// immediately; external adapters run their `train` entry point.
pub fn fit(spec: &PredictorSpec, training: &FeatureTable) -> Result<FittedPredictor> {
    if training.mode != Mode::Training {
        return Err(Error::Precondition("fit needs a training-mode feature table".into()));
    }
    let PredictorKind::External(adapter) = &spec.kind else {
        return Ok(spec.clone().unfitted(None));
    };
    fs::create_dir_all(&adapter.workdir)?;
    let tag = file_tag(&format!("train-k{}", training.k));
    let features = adapter.workdir.join(format!("{tag}.features.csv"));
    let model = adapter.workdir.join(format!("{tag}.model"));
    write_feature_csv(training, &features)?;

    let start = Instant::now();
    run_adapter(
        adapter,
        &[
            "train",
            "--features",
            path_str(&features)?,
            "--model-out",
            path_str(&model)?,
        ],
        &adapter.workdir.join(&tag),
    )?;
    let adaptation_time = start.elapsed();
    if !model.exists() {
        return Err(Error::Adapter {
            message: format!("train succeeded but {} was not created", model.display()),
            diagnostics: String::new(),
        });
    }
    Ok(FittedPredictor {
        spec: spec.clone(),
        model: Some(model),
        adaptation_time,
        training_rows: training.len(),
    })
}

fn path_str(p: &Path) -> Result<&str> {
    p.to_str()
        .ok_or_else(|| Error::Precondition(format!("non-UTF-8 path {}", p.display())))
}

impl FittedPredictor {
    /// Predicts every node's successor location.
    ///
    /// `context` is the reference tour the oracle reads from; `tag` names the
    /// exchange files of external and replay predictors (usually the instance id).
    pub fn predict(&self, table: &FeatureTable, context: Option<&Tour>, tag: &str) -> Result<PredictionSet> {
        if table.mode != Mode::Inference {
            return Err(Error::Precondition("predict needs an inference-mode feature table".into()));
        }
        let n = table.len();
        match &self.spec.kind {
            PredictorKind::Oracle => {
                let tour = context.ok_or(Error::MissingContext)?;
                match validate_order(n, tour.order()) {
                    TourVerdict::Valid => {}
                    v => return Err(Error::InvalidTour(v)),
                }
                let next = tour.successors();
                Ok(PredictionSet((0..n).map(|i| table.rows[next[i]].cur).collect()))
            }
            PredictorKind::Nearest => Ok(PredictionSet(
                table.rows.iter().map(|r| r.neighbors[0].at).collect(),
            )),
            PredictorKind::Replay(dir) => {
                let path = dir.join(format!("{tag}.pred.csv"));
                let rows = read_prediction_csv(&path, &table.row_ids())?;
                PredictionSet::from_keyed(n, &rows)
            }
            PredictorKind::External(adapter) => {
                let model = self.model.as_ref().ok_or_else(|| {
                    Error::Precondition("external predictor has no model artifact; fit it first".into())
                })?;
                fs::create_dir_all(&adapter.workdir)?;
                let tag = file_tag(tag);
                let features = adapter.workdir.join(format!("{tag}.features.csv"));
                let out = adapter.workdir.join(format!("{tag}.pred.csv"));
                write_feature_csv(table, &features)?;
                run_adapter(
                    adapter,
                    &[
                        "predict",
                        "--features",
                        path_str(&features)?,
                        "--model",
                        path_str(model)?,
                        "--out",
                        path_str(&out)?,
                    ],
                    &adapter.workdir.join(&tag),
                )?;
                let rows = read_prediction_csv(&out, &table.row_ids()).map_err(|e| Error::Adapter {
                    message: format!("malformed prediction file {}", out.display()),
                    diagnostics: e.to_string(),
                })?;
                PredictionSet::from_keyed(n, &rows)
            }
        }
    }
}
