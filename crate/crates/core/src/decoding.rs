//! Turning next-node location predictions into a tour.
//!
//! 1. `D[i][j]` is the distance from node i's predicted successor location to
//!    node j, with the diagonal forced to 0.
//! 2. `D` is divided by `tau`, the median of its off-diagonal entries that are
//!    neither zero nor infinite.
//! 3. One softmax of `-D/tau` runs over all `n(n-1)` off-diagonal entries
//!    together, so the whole matrix sums to 1. The diagonal stays 0.
//! 4. Undirected candidate edges are scored from `P` and accepted greedily
//!    under degree <= 2 with union-find subtour elimination, first from the
//!    spatial k-NN candidates, then from all pairs if the cycle is still open.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{distance, k_nearest, Tour, TspInstance};
use crate::predictor::PredictionSet;

/// Spatial neighbours per node when building the first candidate list.
pub const DEFAULT_M_SPATIAL: usize = 10;

/// Row-major `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    /// Wraps raw row-major values. The diagonal is zeroed; every entry must be
    /// finite and non-negative.
    pub fn from_raw(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Precondition(format!(
                "score matrix needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Precondition(format!("score entry {v} is not a finite length")));
        }
        for i in 0..n {
            data[i * n + i] = 0.0;
        }
        Ok(ScoreMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    n: usize,
    data: Vec<f64>,
    tau: f64,
}

impl ProbabilityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// The median used to normalise the score matrix.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCandidate {
    pub i: usize,
    pub j: usize,
    pub score: f64,
}

/// How the two directed probabilities of a node pair combine into one
/// undirected edge score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetrization {
    /// `max(P[i][j], P[j][i])`: an edge is as strong as its stronger direction.
    #[default]
    Max,
    /// `P[i][j] + P[j][i]`: total mass of the pair.
    Sum,
}

impl Symmetrization {
    #[inline]
    fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            Symmetrization::Max => a.max(b),
            Symmetrization::Sum => a + b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    /// Spatial neighbours per node. Values above `n - 1` are clamped.
    pub m_spatial: usize,
    pub symmetrization: Symmetrization,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            m_spatial: DEFAULT_M_SPATIAL,
            symmetrization: Symmetrization::default(),
        }
    }
}

pub fn score_matrix(inst: &TspInstance, preds: &PredictionSet) -> Result<ScoreMatrix> {
    let n = inst.len();
    if preds.len() != n {
        return Err(Error::IncompletePredictions {
            expected: n,
            got: preds.len(),
        });
    }
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        let p = preds.get(i);
        data.extend(inst.nodes().iter().map(|&q| distance(p, q)));
        data[i * n + i] = 0.0;
    }
    Ok(ScoreMatrix { n, data })
}

/// Median of a non-empty slice; even counts average the two middle values.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    let len = values.len();
    let mid = len / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .expect("even length >= 2");
        (lower + upper) / 2.0
    }
}

pub fn probability_matrix(d: &ScoreMatrix) -> Result<ProbabilityMatrix> {
    let n = d.n;
    if n < 2 {
        return Err(Error::Precondition("probability matrix needs n >= 2".into()));
    }
    let off_diag = |(idx, _): &(usize, &f64)| idx / n != idx % n;

    let mut kept: Vec<f64> = d
        .data
        .iter()
        .enumerate()
        .filter(off_diag)
        .map(|(_, &v)| v)
        .filter(|v| v.is_finite() && *v != 0.0)
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateScores);
    }
    let tau = median(&mut kept);

    // softmax over -D/tau, shifted by its maximum (the smallest normalised score)
    let shift = d
        .data
        .iter()
        .enumerate()
        .filter(off_diag)
        .map(|(_, &v)| v / tau)
        .fold(f64::INFINITY, f64::min);
    let mut data = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let e = (shift - d.get(i, j) / tau).exp();
                data[i * n + j] = e;
                total += e;
            }
        }
    }
    for v in &mut data {
        *v /= total;
    }
    Ok(ProbabilityMatrix { n, data, tau })
}

fn by_score_desc(a: &EdgeCandidate, b: &EdgeCandidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.i.cmp(&b.i))
        .then(a.j.cmp(&b.j))
}

/// Spatial and full candidate lists, each sorted by descending score with
/// ties broken by `(i, j)`.
pub fn candidate_edges(
    inst: &TspInstance,
    p: &ProbabilityMatrix,
    m_spatial: usize,
    sym: Symmetrization,
) -> Result<(Vec<EdgeCandidate>, Vec<EdgeCandidate>)> {
    let n = inst.len();
    if p.n != n {
        return Err(Error::Precondition(format!(
            "probability matrix is {}x{}, instance has {n} nodes",
            p.n, p.n
        )));
    }
    if m_spatial == 0 || m_spatial > n - 1 {
        return Err(Error::Precondition(format!(
            "m_spatial must be in 1..={}, got {m_spatial}",
            n - 1
        )));
    }
    let edge = |a: usize, b: usize| {
        let (i, j) = (a.min(b), a.max(b));
        EdgeCandidate {
            i,
            j,
            score: sym.combine(p.get(i, j), p.get(j, i)),
        }
    };

    let mut pairs = Vec::with_capacity(n * m_spatial);
    for a in 0..n {
        for (b, _) in k_nearest(inst, inst.point(a), m_spatial, &[a])? {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut spatial: Vec<EdgeCandidate> = pairs.into_iter().map(|(i, j)| edge(i, j)).collect();
    spatial.sort_by(by_score_desc);

    let mut full = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            full.push(edge(i, j));
        }
    }
    full.sort_by(by_score_desc);
    Ok((spatial, full))
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    Spatial,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptedEdge {
    pub edge: EdgeCandidate,
    pub pass: Pass,
}

/// Greedy edge insertion. Builds the cycle from `spatial` first and finishes
/// it from `full`, which must contain every pair.
pub fn greedy_construct(n: usize, spatial: &[EdgeCandidate], full: &[EdgeCandidate]) -> Tour {
    greedy_construct_traced(n, spatial, full).0
}

pub fn greedy_construct_traced(
    n: usize,
    spatial: &[EdgeCandidate],
    full: &[EdgeCandidate],
) -> (Tour, Vec<AcceptedEdge>) {
    let mut degree = vec![0u8; n];
    let mut adj = vec![[usize::MAX; 2]; n];
    let mut sets = DisjointSets::new(n);
    let mut accepted = Vec::with_capacity(n);

    for (list, pass) in [(spatial, Pass::Spatial), (full, Pass::Full)] {
        for e in list {
            if accepted.len() == n {
                break;
            }
            let (i, j) = (e.i, e.j);
            if i == j || degree[i] >= 2 || degree[j] >= 2 {
                continue;
            }
            // the last edge is the only one allowed to close a cycle
            let closes = accepted.len() == n - 1;
            if !sets.union(i, j) && !closes {
                continue;
            }
            adj[i][degree[i] as usize] = j;
            adj[j][degree[j] as usize] = i;
            degree[i] += 1;
            degree[j] += 1;
            accepted.push(AcceptedEdge { edge: *e, pass });
        }
    }
    assert_eq!(
        accepted.len(),
        n,
        "greedy construction needs a full candidate list covering every pair"
    );

    let mut order = Vec::with_capacity(n);
    let mut prev = 0;
    let mut cur = adj[0][0].min(adj[0][1]);
    order.push(0);
    while cur != 0 {
        order.push(cur);
        let nxt = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
        prev = cur;
        cur = nxt;
    }
    (Tour::new(order), accepted)
}

/// Everything `decode` computed, for inspection and debug dumps.
#[derive(Debug, Clone)]
pub struct DecodeTrace {
    pub tour: Tour,
    pub probabilities: ProbabilityMatrix,
    pub accepted: Vec<AcceptedEdge>,
}

pub fn decode(inst: &TspInstance, preds: &PredictionSet, cfg: &DecodeConfig) -> Result<Tour> {
    decode_traced(inst, preds, cfg).map(|t| t.tour)
}

pub fn decode_traced(inst: &TspInstance, preds: &PredictionSet, cfg: &DecodeConfig) -> Result<DecodeTrace> {
    let d = score_matrix(inst, preds)?;
    let p = probability_matrix(&d)?;
    let m = cfg.m_spatial.clamp(1, inst.len() - 1);
    let (spatial, full) = candidate_edges(inst, &p, m, cfg.symmetrization)?;
    let (tour, accepted) = greedy_construct_traced(inst.len(), &spatial, &full);
    Ok(DecodeTrace {
        tour,
        probabilities: p,
        accepted,
    })
}

/// Writes `P` and the accepted edges as text.
///
/// Layout: a `P <n> <tau>` line, then `n` lines where line `i` holds
/// `P[i][0] .. P[i][n-1]` separated by spaces; then `edges <n>` and one
/// `i j score spatial|full` line per accepted edge in acceptance order; then
/// the `tour` line.
pub fn write_debug_dump(trace: &DecodeTrace, path: &Path) -> Result<()> {
    let p = &trace.probabilities;
    let mut s = String::new();
    writeln!(s, "P {} {}", p.n, p.tau).unwrap();
    for row in p.data.chunks(p.n) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    writeln!(s, "edges {}", trace.accepted.len()).unwrap();
    for a in &trace.accepted {
        let pass = match a.pass {
            Pass::Spatial => "spatial",
            Pass::Full => "full",
        };
        writeln!(s, "{} {} {} {pass}", a.edge.i, a.edge.j, a.edge.score).unwrap();
    }
    let order: Vec<String> = trace.tour.order().iter().map(usize::to_string).collect();
    writeln!(s, "tour {}", order.join(" ")).unwrap();
    std::fs::write(path, s)?;
    Ok(())
}
