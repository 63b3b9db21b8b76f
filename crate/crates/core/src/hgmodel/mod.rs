//! Hypergraph and partition data model.
//!
//! All weights are integers, so cutsizes and block weights are exact. Balance
//! windows are converted once into integer bounds ([`BalanceBounds`]) and every
//! stage compares against those.

mod brute;
mod io;

pub use brute::brute_force_optimal;
pub use io::{parse_hmetis, read_solution, write_hmetis, write_solution};

use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};

/// Weighted hypergraph stored as two CSR incidence structures (edge→pins and
/// vertex→edges).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    vertex_weights: Vec<u64>,
    edge_weights: Vec<u64>,
    edge_offsets: Vec<usize>,
    pins: Vec<usize>,
    vertex_offsets: Vec<usize>,
    incident: Vec<usize>,
    total_weight: u64,
}

impl Hypergraph {
    /// Builds a hypergraph. Pins of every hyperedge are sorted and
    /// deduplicated; an edge left with fewer than two distinct pins is an
    /// error, as are zero edge weights and a zero total vertex weight.
    pub fn new<I, P>(vertex_weights: Vec<u64>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (P, u64)>,
        P: AsRef<[usize]>,
    {
        let n = vertex_weights.len();
        let total_weight: u64 = vertex_weights.iter().sum();
        if total_weight == 0 {
            return Err(Error::InvalidHypergraph(
                "total vertex weight must be positive".into(),
            ));
        }

        let mut edge_weights = Vec::new();
        let mut edge_offsets = vec![0];
        let mut pins = Vec::new();
        for (idx, (edge, w)) in edges.into_iter().enumerate() {
            if w == 0 {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {idx} has zero weight"
                )));
            }
            let start = pins.len();
            pins.extend_from_slice(edge.as_ref());
            let slot = &mut pins[start..];
            slot.sort_unstable();
            if let Some(&bad) = slot.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {idx} references vertex {bad} (only {n} vertices)"
                )));
            }
            let mut distinct: Vec<usize> = slot.to_vec();
            distinct.dedup();
            if distinct.len() < 2 {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {idx} has fewer than two distinct pins"
                )));
            }
            pins.truncate(start);
            pins.extend(distinct);
            edge_offsets.push(pins.len());
            edge_weights.push(w);
        }

        let mut degree = vec![0usize; n + 1];
        for &v in &pins {
            degree[v + 1] += 1;
        }
        for v in 0..n {
            degree[v + 1] += degree[v];
        }
        let vertex_offsets = degree;
        let mut fill = vertex_offsets.clone();
        let mut incident = vec![0usize; pins.len()];
        for e in 0..edge_weights.len() {
            for &v in &pins[edge_offsets[e]..edge_offsets[e + 1]] {
                incident[fill[v]] = e;
                fill[v] += 1;
            }
        }

        Ok(Self {
            vertex_weights,
            edge_weights,
            edge_offsets,
            pins,
            vertex_offsets,
            incident,
            total_weight,
        })
    }

    /// Unit vertex weights and unit edge weights.
    pub fn unit<P: AsRef<[usize]>>(n_vertices: usize, edges: &[P]) -> Result<Self> {
        Self::new(
            vec![1; n_vertices],
            edges.iter().map(|e| (e.as_ref().to_vec(), 1u64)),
        )
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_weights.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_weights.len()
    }

    /// Total number of pins, `Σ|e|`.
    pub fn n_pins(&self) -> usize {
        self.pins.len()
    }

    pub fn pins(&self, e: usize) -> &[usize] {
        &self.pins[self.edge_offsets[e]..self.edge_offsets[e + 1]]
    }

    pub fn edge_weight(&self, e: usize) -> u64 {
        self.edge_weights[e]
    }

    pub fn edge_weights(&self) -> &[u64] {
        &self.edge_weights
    }

    pub fn vertex_weight(&self, v: usize) -> u64 {
        self.vertex_weights[v]
    }

    pub fn vertex_weights(&self) -> &[u64] {
        &self.vertex_weights
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incident[self.vertex_offsets[v]..self.vertex_offsets[v + 1]]
    }

    pub fn edges(&self) -> impl Iterator<Item = (&[usize], u64)> + '_ {
        (0..self.n_edges()).map(move |e| (self.pins(e), self.edge_weights[e]))
    }

    /// Copy of `self` with additional hyperedges appended after the existing ones.
    pub fn with_extra_edges<P: AsRef<[usize]>>(&self, extra: &[(P, u64)]) -> Result<Self> {
        let edges = self
            .edges()
            .map(|(p, w)| (p.to_vec(), w))
            .chain(extra.iter().map(|(p, w)| (p.as_ref().to_vec(), *w)));
        Self::new(self.vertex_weights.clone(), edges)
    }
}

/// A K-way assignment of vertices to blocks `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPartition("block count must be positive".into()));
        }
        if let Some((v, &b)) = labels.iter().enumerate().find(|(_, &b)| b >= k) {
            return Err(Error::InvalidPartition(format!(
                "vertex {v} has block {b}, expected < {k}"
            )));
        }
        Ok(Self { labels, k })
    }

    /// Every vertex in block 0.
    pub fn trivial(n: usize, k: usize) -> Self {
        Self {
            labels: vec![0; n],
            k,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn block(&self, v: usize) -> usize {
        self.labels[v]
    }

    /// Checks that this partition labels exactly the vertices of `h`.
    pub fn check_for(&self, h: &Hypergraph) -> Result<()> {
        if self.labels.len() != h.n_vertices() {
            return Err(Error::InvalidPartition(format!(
                "partition has {} labels but the hypergraph has {} vertices",
                self.labels.len(),
                h.n_vertices()
            )));
        }
        Ok(())
    }

    pub fn block_weights(&self, h: &Hypergraph) -> Vec<u64> {
        let mut w = vec![0u64; self.k];
        for (v, &b) in self.labels.iter().enumerate() {
            w[b] += h.vertex_weight(v);
        }
        w
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut s = vec![0usize; self.k];
        for &b in &self.labels {
            s[b] += 1;
        }
        s
    }

    /// Relabels blocks in order of first appearance, so that partitions equal
    /// up to block permutation compare equal.
    pub fn canonical(&self) -> Self {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&b| {
                if map[b] == usize::MAX {
                    map[b] = next;
                    next += 1;
                }
                map[b]
            })
            .collect();
        Self { labels, k: self.k }
    }
}

/// Integer block-weight window `[lower, upper]` equivalent to the fractional
/// constraint `max(0, 1/K − ε) ≤ W_i / W ≤ 1/K + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BalanceBounds {
    pub lower: u64,
    pub upper: u64,
}

impl BalanceBounds {
    pub fn new(total: u64, k: usize, eps: f64) -> Self {
        let w = total as f64;
        let frac = 1.0 / k as f64;
        // absorbs the binary representation error of decimal ε such as 0.02
        let slack = 1e-9 * w.max(1.0);
        let lo = ((frac - eps).max(0.0) * w - slack).ceil().max(0.0);
        let hi = ((frac + eps) * w + slack).floor().max(0.0);
        Self {
            lower: lo as u64,
            upper: (hi as u64).min(total),
        }
    }

    pub fn for_hypergraph(h: &Hypergraph, k: usize, eps: f64) -> Self {
        Self::new(h.total_weight(), k, eps)
    }

    pub fn contains(&self, w: u64) -> bool {
        self.lower <= w && w <= self.upper
    }

    /// Distance of a block weight from the window, zero when inside.
    pub fn excess(&self, w: u64) -> u64 {
        if w > self.upper {
            w - self.upper
        } else {
            self.lower.saturating_sub(w)
        }
    }
}

/// Total weight of hyperedges whose pins span at least two blocks.
pub fn cutsize(h: &Hypergraph, s: &Partition) -> u64 {
    let labels = s.labels();
    h.edges()
        .filter(|(pins, _)| {
            let b = labels[pins[0]];
            pins[1..].iter().any(|&v| labels[v] != b)
        })
        .map(|(_, w)| w)
        .sum()
}

/// Indices of the hyperedges cut by `s`.
pub fn cut_edges(h: &Hypergraph, s: &Partition) -> Vec<usize> {
    let labels = s.labels();
    (0..h.n_edges())
        .filter(|&e| {
            let pins = h.pins(e);
            let b = labels[pins[0]];
            pins[1..].iter().any(|&v| labels[v] != b)
        })
        .collect()
}

pub fn is_balanced(h: &Hypergraph, s: &Partition, eps: f64) -> bool {
    balance_violation(h, s, eps) == 0
}

/// Sum over blocks of the weight by which each block leaves the balance window.
pub fn balance_violation(h: &Hypergraph, s: &Partition, eps: f64) -> u64 {
    let bounds = BalanceBounds::for_hypergraph(h, s.k(), eps);
    s.block_weights(h).iter().map(|&w| bounds.excess(w)).sum()
}

/// Fraction of the total vertex weight in each block.
pub fn block_fractions(h: &Hypergraph, s: &Partition) -> Vec<f64> {
    let total = h.total_weight() as f64;
    s.block_weights(h)
        .into_iter()
        .map(|w| w as f64 / total)
        .collect()
}

/// Connected components of the vertex/hyperedge incidence structure, each
/// sorted, ordered by smallest member.
pub fn connected_components(h: &Hypergraph) -> Vec<Vec<usize>> {
    let n = h.n_vertices();
    let mut uf = UnionFind::<usize>::new(n);
    for (pins, _) in h.edges() {
        for &v in &pins[1..] {
            uf.union(pins[0], v);
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        let r = uf.find(v);
        if slot[r] == usize::MAX {
            slot[r] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot[r]].push(v);
    }
    comps
}

/// A contracted hypergraph together with the vertex→cluster map used to lift
/// coarse solutions back.
#[derive(Debug, Clone)]
pub struct ClusteredHypergraph {
    pub coarse: Hypergraph,
    pub cluster_of: Vec<usize>,
}

impl ClusteredHypergraph {
    pub fn n_clusters(&self) -> usize {
        self.coarse.n_vertices()
    }

    /// Maps a coarse partition to the original vertices.
    pub fn lift(&self, coarse: &Partition) -> Partition {
        let labels = self.cluster_of.iter().map(|&c| coarse.block(c)).collect();
        Partition {
            labels,
            k: coarse.k(),
        }
    }

    /// Maps a fine partition onto clusters; `None` if some cluster is split
    /// across blocks.
    pub fn project(&self, fine: &Partition) -> Option<Partition> {
        let mut labels = vec![usize::MAX; self.n_clusters()];
        for (v, &c) in self.cluster_of.iter().enumerate() {
            let b = fine.block(v);
            if labels[c] == usize::MAX {
                labels[c] = b;
            } else if labels[c] != b {
                return None;
            }
        }
        Some(Partition {
            labels,
            k: fine.k(),
        })
    }
}

/// Contracts each cluster to one vertex. Hyperedges left with fewer than two
/// distinct clusters are dropped; hyperedges with identical cluster sets are
/// merged with summed weight, in order of first occurrence.
pub fn contract(h: &Hypergraph, cluster_of: &[usize]) -> Result<ClusteredHypergraph> {
    if cluster_of.len() != h.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "cluster map has {} entries for {} vertices",
            cluster_of.len(),
            h.n_vertices()
        )));
    }
    let n_clusters = cluster_of.iter().max().map_or(0, |&c| c + 1);
    let mut seen = vec![false; n_clusters];
    for &c in cluster_of {
        seen[c] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidArgument(
            "cluster indices must be dense".into(),
        ));
    }

    let mut weights = vec![0u64; n_clusters];
    for (v, &c) in cluster_of.iter().enumerate() {
        weights[c] += h.vertex_weight(v);
    }

    let mut index: std::collections::HashMap<Vec<usize>, usize> = Default::default();
    let mut edges: Vec<(Vec<usize>, u64)> = Vec::new();
    for (pins, w) in h.edges() {
        let mut cp: Vec<usize> = pins.iter().map(|&v| cluster_of[v]).collect();
        cp.sort_unstable();
        cp.dedup();
        if cp.len() < 2 {
            continue;
        }
        match index.get(&cp) {
            Some(&i) => edges[i].1 += w,
            None => {
                index.insert(cp.clone(), edges.len());
                edges.push((cp, w));
            }
        }
    }

    Ok(ClusteredHypergraph {
        coarse: Hypergraph::new(weights, edges)?,
        cluster_of: cluster_of.to_vec(),
    })
}
