//! hMETIS `.hgr` hypergraphs and one-label-per-line solution files.

use std::fmt::Write as _;

use log::warn;

use super::{Hypergraph, Partition};
use crate::error::{Error, Result};

/// Non-comment, non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

fn parse_int(line: usize, tok: &str, what: &str) -> Result<i64> {
    tok.parse::<i64>()
        .map_err(|_| Error::parse(line, format!("expected integer {what}, found {tok:?}")))
}

/// Parses an hMETIS hypergraph. File vertices are 1-indexed.
///
/// Duplicate pins are dropped with a warning, and so are hyperedges left with
/// fewer than two distinct pins.
pub fn parse_hmetis(text: &str) -> Result<Hypergraph> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if !(2..=3).contains(&fields.len()) {
        return Err(Error::parse(hline, "header must be \"|E| |V| [fmt]\""));
    }
    let n_edges = parse_int(hline, fields[0], "edge count")?;
    let n_vertices = parse_int(hline, fields[1], "vertex count")?;
    if n_edges < 0 || n_vertices <= 0 {
        return Err(Error::parse(hline, "edge and vertex counts must be positive"));
    }
    let fmt = match fields.get(2) {
        None => 0,
        Some(t) => parse_int(hline, t, "format flag")?,
    };
    if !matches!(fmt, 0 | 1 | 10 | 11) {
        return Err(Error::parse(hline, format!("unsupported format flag {fmt}")));
    }
    let edge_weighted = fmt == 1 || fmt == 11;
    let vertex_weighted = fmt == 10 || fmt == 11;
    let n = n_vertices as usize;

    let mut edges: Vec<(Vec<usize>, u64)> = Vec::with_capacity(n_edges as usize);
    for i in 0..n_edges {
        let (ln, line) = lines.next().ok_or_else(|| {
            Error::parse(
                text.lines().count(),
                format!("expected {n_edges} hyperedge lines, found {i}"),
            )
        })?;
        let mut toks = line.split_whitespace();
        let weight = if edge_weighted {
            let w = parse_int(ln, toks.next().unwrap_or(""), "hyperedge weight")?;
            if w <= 0 {
                return Err(Error::parse(ln, format!("nonpositive hyperedge weight {w}")));
            }
            w as u64
        } else {
            1
        };
        let mut pins = Vec::new();
        for tok in toks {
            let v = parse_int(ln, tok, "vertex index")?;
            if v < 1 || v > n_vertices {
                return Err(Error::parse(
                    ln,
                    format!("vertex {v} out of range 1..={n_vertices}"),
                ));
            }
            pins.push(v as usize - 1);
        }
        let raw = pins.len();
        pins.sort_unstable();
        pins.dedup();
        if pins.len() < raw {
            warn!("line {ln}: removed {} duplicate pin(s)", raw - pins.len());
        }
        if pins.len() < 2 {
            warn!("line {ln}: dropped hyperedge with fewer than two distinct pins");
            continue;
        }
        edges.push((pins, weight));
    }

    let vertex_weights = if vertex_weighted {
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            let (ln, line) = lines.next().ok_or_else(|| {
                Error::parse(
                    text.lines().count(),
                    format!("expected {n} vertex weight lines, found {i}"),
                )
            })?;
            let mut toks = line.split_whitespace();
            let x = parse_int(ln, toks.next().unwrap_or(""), "vertex weight")?;
            if x < 0 {
                return Err(Error::parse(ln, format!("negative vertex weight {x}")));
            }
            if toks.next().is_some() {
                return Err(Error::parse(ln, "expected a single vertex weight"));
            }
            w.push(x as u64);
        }
        w
    } else {
        vec![1; n]
    };

    if let Some((ln, _)) = lines.next() {
        return Err(Error::parse(ln, "unexpected content after the last section"));
    }

    Hypergraph::new(vertex_weights, edges).map_err(|e| Error::parse(hline, e.to_string()))
}

/// Serializes in hMETIS format, choosing the smallest format flag that
/// preserves all weights.
pub fn write_hmetis(h: &Hypergraph) -> String {
    let edge_weighted = h.edge_weights().iter().any(|&w| w != 1);
    let vertex_weighted = h.vertex_weights().iter().any(|&w| w != 1);
    let fmt = match (edge_weighted, vertex_weighted) {
        (false, false) => None,
        (true, false) => Some(1),
        (false, true) => Some(10),
        (true, true) => Some(11),
    };
    let mut out = String::new();
    match fmt {
        Some(f) => writeln!(out, "{} {} {f}", h.n_edges(), h.n_vertices()),
        None => writeln!(out, "{} {}", h.n_edges(), h.n_vertices()),
    }
    .unwrap();
    for (pins, w) in h.edges() {
        if edge_weighted {
            write!(out, "{w} ").unwrap();
        }
        let line: Vec<String> = pins.iter().map(|v| (v + 1).to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    if vertex_weighted {
        for &w in h.vertex_weights() {
            writeln!(out, "{w}").unwrap();
        }
    }
    out
}

/// Reads a solution file: one 0-indexed block id per line.
pub fn read_solution(text: &str, n_vertices: usize, k: usize) -> Result<Partition> {
    let mut labels = Vec::with_capacity(n_vertices);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let b: usize = line
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("expected block id, found {line:?}")))?;
        if b >= k {
            return Err(Error::parse(i + 1, format!("block id {b} not below k = {k}")));
        }
        labels.push(b);
    }
    if labels.len() != n_vertices {
        return Err(Error::parse(
            text.lines().count().max(1),
            format!("expected {n_vertices} labels, found {}", labels.len()),
        ));
    }
    Partition::new(labels, k)
}

pub fn write_solution(s: &Partition) -> String {
    let mut out = String::with_capacity(s.len() * 2);
    for &b in s.labels() {
        writeln!(out, "{b}").unwrap();
    }
    out
}
