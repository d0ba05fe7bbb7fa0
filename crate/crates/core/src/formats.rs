//! Instance file formats.
//!
//! Canonical (UTF-8, LF):
//!
//! ```text
//! tsp <n> <id>
//! <x> <y>            (n lines)
//! tour <i0> ... <i{n-1}>   (optional, 0-based)
//! ```
//!
//! A file may hold several instances back to back; blank lines are ignored.
//! Floats are written in shortest round-trip form, so `read(write(x)) == x`
//! bit for bit.
//!
//! Coords-output compatibility format: one instance per line,
//! `x0 y0 x1 y1 ... output t0 t1 ... tn` with a 1-based closed tour whose last
//! index repeats the first.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{validate_order, Point, Tour, TourVerdict, TspInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceFormat {
    Canonical,
    CoordsOutput,
    /// Canonical when the first non-blank line starts with `tsp`, otherwise coords-output.
    Auto,
}

pub type InstanceEntry = (TspInstance, Option<Tour>);

/// Reads every instance in `path`. A directory is read file by file in
/// lexicographic name order (hidden files skipped).
pub fn read_instances(path: &Path, format: InstanceFormat) -> Result<Vec<InstanceEntry>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .filter(|p| {
                !p.file_name()
                    .and_then(|s| s.to_str())
                    .is_some_and(|s| s.starts_with('.'))
            })
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(read_file(&f, format)?);
        }
        Ok(out)
    } else {
        read_file(path, format)
    }
}

fn read_file(path: &Path, format: InstanceFormat) -> Result<Vec<InstanceEntry>> {
    let text = fs::read_to_string(path)?;
    let format = match format {
        InstanceFormat::Auto => {
            let first = text.lines().map(str::trim).find(|l| !l.is_empty());
            match first {
                Some(l) if l.starts_with("tsp") => InstanceFormat::Canonical,
                _ => InstanceFormat::CoordsOutput,
            }
        }
        f => f,
    };
    match format {
        InstanceFormat::Canonical => parse_canonical(&text, path),
        _ => parse_coords_output(&text, path),
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(path, line, format!("bad coordinate {tok:?}")))
}

fn build_instance(id: String, nodes: Vec<Point>, path: &Path, line: usize) -> Result<TspInstance> {
    TspInstance::new(id, nodes).map_err(|e| parse_err(path, line, e.to_string()))
}

fn check_tour(n: usize, order: Vec<usize>, path: &Path, line: usize) -> Result<Tour> {
    match validate_order(n, &order) {
        TourVerdict::Valid => Ok(Tour::new(order)),
        v => Err(parse_err(path, line, format!("tour is not a permutation: {v}"))),
    }
}

/// Parses canonical-format text. `path` is only used for error messages.
pub fn parse_canonical(text: &str, path: &Path) -> Result<Vec<InstanceEntry>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();
    let mut out = Vec::new();

    while let Some((lno, header)) = lines.next() {
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != "tsp" {
            return Err(parse_err(path, lno, "expected header `tsp <n> <id>`"));
        }
        let n: usize = toks[1]
            .parse()
            .map_err(|_| parse_err(path, lno, format!("bad node count {:?}", toks[1])))?;
        let id = toks[2].to_string();

        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let (l, row) = lines
                .next()
                .ok_or_else(|| parse_err(path, lno, format!("expected {n} coordinate lines")))?;
            let mut it = row.split_whitespace();
            let (Some(x), Some(y), None) = (it.next(), it.next(), it.next()) else {
                return Err(parse_err(path, l, "expected `x y`"));
            };
            nodes.push(Point::new(parse_f64(x, path, l)?, parse_f64(y, path, l)?));
        }
        let inst = build_instance(id, nodes, path, lno)?;

        let tour = match lines.peek() {
            Some((_, l)) if l.split_whitespace().next() == Some("tour") => {
                let (l, row) = lines.next().unwrap();
                let order = row
                    .split_whitespace()
                    .skip(1)
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| parse_err(path, l, format!("bad tour index {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(check_tour(n, order, path, l)?)
            }
            _ => None,
        };
        out.push((inst, tour));
    }
    Ok(out)
}

/// Parses coords-output text. Instance ids are `<file stem>-<line number>`.
pub fn parse_coords_output(text: &str, path: &Path) -> Result<Vec<InstanceEntry>> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("inst")
        .replace(char::is_whitespace, "_");
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let split = toks
            .iter()
            .position(|&t| t == "output")
            .ok_or_else(|| parse_err(path, lno, "missing `output` token"))?;
        let coords = &toks[..split];
        if coords.len() % 2 != 0 {
            return Err(parse_err(path, lno, "odd number of coordinates"));
        }
        let nodes = coords
            .chunks(2)
            .map(|c| Ok(Point::new(parse_f64(c[0], path, lno)?, parse_f64(c[1], path, lno)?)))
            .collect::<Result<Vec<_>>>()?;
        let n = nodes.len();
        let inst = build_instance(format!("{stem}-{lno}"), nodes, path, lno)?;

        let closed = toks[split + 1..]
            .iter()
            .map(|t| {
                t.parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .map(|v| v - 1)
                    .ok_or_else(|| parse_err(path, lno, format!("bad 1-based tour index {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if closed.len() != n + 1 || closed.first() != closed.last() {
            return Err(parse_err(
                path,
                lno,
                "tour must list n+1 indices and end where it starts",
            ));
        }
        let mut order = closed;
        order.pop();
        let tour = check_tour(n, order, path, lno)?;
        out.push((inst, Some(tour)));
    }
    Ok(out)
}

/// Canonical text for one instance.
pub fn format_canonical(inst: &TspInstance, tour: Option<&Tour>) -> String {
    let mut s = String::new();
    writeln!(s, "tsp {} {}", inst.len(), inst.id()).unwrap();
    for p in inst.nodes() {
        writeln!(s, "{} {}", p.x, p.y).unwrap();
    }
    if let Some(t) = tour {
        s.push_str("tour");
        for v in t.order() {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Writes a single instance (and optional tour) in canonical format.
pub fn write_instance(inst: &TspInstance, tour: Option<&Tour>, path: &Path) -> Result<()> {
    if let Some(t) = tour {
        crate::geometry::ensure_valid(inst, t)?;
    }
    fs::write(path, format_canonical(inst, tour))?;
    Ok(())
}

/// Writes several instances into one canonical file.
pub fn write_instances(entries: &[InstanceEntry], path: &Path) -> Result<()> {
    let mut s = String::new();
    for (inst, tour) in entries {
        if let Some(t) = tour {
            crate::geometry::ensure_valid(inst, t)?;
        }
        s.push_str(&format_canonical(inst, tour.as_ref()));
    }
    fs::write(path, s)?;
    Ok(())
}
