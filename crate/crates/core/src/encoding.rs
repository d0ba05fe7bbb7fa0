//! Node-based feature rows for next-node regression.
//!
//! Every node becomes one row: its own coordinates followed by `k` neighbours,
//! each given as coordinates plus the distance to the current node. In
//! inference mode the neighbours are the `k` nodes nearest to the current
//! node. In training mode they are the `k` nodes nearest to the current
//! node's successor in the reference tour, and the row carries the
//! successor's coordinates as the regression target.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{distance, ensure_valid, k_nearest, Point, Tour, TspInstance};

/// Neighbour count used when nothing else is configured.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub at: Point,
    /// Distance from the neighbour to the row's current node.
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub row_id: usize,
    pub cur: Point,
    pub neighbors: Vec<Neighbor>,
    pub target: Option<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub k: usize,
    pub mode: Mode,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_ids(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.row_id).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Drop the true successor from the training-mode candidate set. Off by
    /// default, in which case neighbour 1 of every training row is the
    /// successor itself.
    pub exclude_target_from_neighbors: bool,
}

fn check_k(n: usize, k: usize, reserved: usize) -> Result<()> {
    if k == 0 || n < k + 1 + reserved {
        return Err(Error::InsufficientCandidates {
            requested: k,
            available: n.saturating_sub(1 + reserved),
        });
    }
    Ok(())
}

fn make_neighbors(inst: &TspInstance, cur: Point, picked: Vec<(usize, f64)>) -> Vec<Neighbor> {
    picked
        .into_iter()
        .map(|(node, _)| {
            let at = inst.point(node);
            Neighbor {
                node,
                at,
                dist: distance(at, cur),
            }
        })
        .collect()
}

pub fn encode_inference(inst: &TspInstance, k: usize) -> Result<FeatureTable> {
    check_k(inst.len(), k, 0)?;
    let rows = (0..inst.len())
        .map(|i| {
            let cur = inst.point(i);
            let picked = k_nearest(inst, cur, k, &[i])?;
            Ok(FeatureRow {
                row_id: i,
                cur,
                neighbors: make_neighbors(inst, cur, picked),
                target: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable {
        k,
        mode: Mode::Inference,
        rows,
    })
}

pub fn encode_training(inst: &TspInstance, reference: &Tour, k: usize) -> Result<FeatureTable> {
    encode_training_with(inst, reference, k, EncodeOptions::default())
}

pub fn encode_training_with(
    inst: &TspInstance,
    reference: &Tour,
    k: usize,
    opts: EncodeOptions,
) -> Result<FeatureTable> {
    ensure_valid(inst, reference)?;
    let reserved = usize::from(opts.exclude_target_from_neighbors);
    check_k(inst.len(), k, reserved)?;
    let next = reference.successors();
    let rows = (0..inst.len())
        .map(|i| {
            let cur = inst.point(i);
            let succ = inst.point(next[i]);
            let picked = if opts.exclude_target_from_neighbors {
                k_nearest(inst, succ, k, &[i, next[i]])?
            } else {
                k_nearest(inst, succ, k, &[i])?
            };
            Ok(FeatureRow {
                row_id: i,
                cur,
                neighbors: make_neighbors(inst, cur, picked),
                target: Some(succ),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable {
        k,
        mode: Mode::Training,
        rows,
    })
}

/// Column names for a feature table with `k` neighbours.
pub fn feature_header(k: usize, mode: Mode) -> Vec<String> {
    let mut cols = vec!["row_id".to_string(), "cur_x".into(), "cur_y".into()];
    for j in 1..=k {
        cols.push(format!("nb{j}_x"));
        cols.push(format!("nb{j}_y"));
        cols.push(format!("nb{j}_d"));
    }
    if mode == Mode::Training {
        cols.push("next_x".into());
        cols.push("next_y".into());
    }
    cols
}

/// Writes the feature CSV. Floats use shortest round-trip formatting, which
/// is exact.
pub fn write_feature_csv(table: &FeatureTable, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(feature_header(table.k, table.mode))?;
    let mut rec: Vec<String> = Vec::with_capacity(3 + 3 * table.k + 2);
    for row in &table.rows {
        rec.clear();
        rec.push(row.row_id.to_string());
        rec.push(row.cur.x.to_string());
        rec.push(row.cur.y.to_string());
        for nb in &row.neighbors {
            rec.push(nb.at.x.to_string());
            rec.push(nb.at.y.to_string());
            rec.push(nb.dist.to_string());
        }
        if let Some(t) = row.target {
            rec.push(t.x.to_string());
            rec.push(t.y.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const PREDICTION_HEADER: [&str; 3] = ["row_id", "pred_x", "pred_y"];

/// Reads a prediction CSV and returns one `(row_id, x, y)` per expected id,
/// in the order of `expected`. Row order in the file does not matter.
pub fn read_prediction_csv(path: &Path, expected: &[usize]) -> Result<Vec<(usize, f64, f64)>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != PREDICTION_HEADER {
        return Err(Error::Protocol(format!(
            "{}: expected header {}, got {}",
            path.display(),
            PREDICTION_HEADER.join(","),
            header.join(",")
        )));
    }
    let wanted: HashMap<usize, usize> = expected.iter().enumerate().map(|(p, &id)| (id, p)).collect();
    let mut slots: Vec<Option<(f64, f64)>> = vec![None; expected.len()];
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        if rec.len() != 3 {
            return Err(Error::Protocol(format!("line {line}: expected 3 fields, got {}", rec.len())));
        }
        let id: usize = field(0)
            .parse()
            .map_err(|_| Error::Protocol(format!("line {line}: bad row_id {:?}", field(0))))?;
        let coord = |c: usize| -> Result<f64> {
            field(c)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::Protocol(format!("line {line}: non-finite prediction {:?}", field(c)))
                })
        };
        let (x, y) = (coord(1)?, coord(2)?);
        let &slot = wanted
            .get(&id)
            .ok_or_else(|| Error::Protocol(format!("line {line}: unexpected row_id {id}")))?;
        if slots[slot].replace((x, y)).is_some() {
            return Err(Error::Protocol(format!("line {line}: duplicate row_id {id}")));
        }
    }
    expected
        .iter()
        .zip(slots)
        .map(|(&id, s)| {
            s.map(|(x, y)| (id, x, y))
                .ok_or_else(|| Error::Protocol(format!("missing row_id {id}")))
        })
        .collect()
}

pub fn write_prediction_csv(preds: &[(usize, f64, f64)], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    writeln!(f, "{}", PREDICTION_HEADER.join(","))?;
    for (id, x, y) in preds {
        writeln!(f, "{id},{x},{y}")?;
    }
    f.flush()?;
    Ok(())
}
