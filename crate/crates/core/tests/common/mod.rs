//! Instance generators and dense reference implementations shared by the
//! integration suites. Everything here is written from definitions, without
//! calling into the code under test beyond constructors.

#![allow(dead_code)]

use std::collections::VecDeque;

use kspecpart::hgmodel::connected_components;
use kspecpart::{Hypergraph, Partition};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub n: usize,
    pub edges: usize,
    pub max_pins: usize,
    /// Vertex weights are drawn from `min_vw..=max_vw`.
    pub min_vw: u64,
    pub max_vw: u64,
    pub max_ew: u64,
    /// Chain components together with extra two-pin edges.
    pub connected: bool,
}

impl Shape {
    pub fn unit(n: usize, edges: usize) -> Self {
        Shape {
            n,
            edges,
            max_pins: 4,
            min_vw: 1,
            max_vw: 1,
            max_ew: 1,
            connected: false,
        }
    }
}

pub fn random_hypergraph(r: &mut ChaCha8Rng, s: Shape) -> Hypergraph {
    assert!(s.n >= 2);
    let mut vw: Vec<u64> = (0..s.n).map(|_| r.random_range(s.min_vw..=s.max_vw)).collect();
    if vw.iter().all(|&w| w == 0) {
        vw[0] = 1;
    }
    let mut edges: Vec<(Vec<usize>, u64)> = Vec::new();
    for _ in 0..s.edges {
        let size = r.random_range(2..=s.max_pins.min(s.n).max(2));
        let pins = sample(r, s.n, size).into_vec();
        edges.push((pins, r.random_range(1..=s.max_ew)));
    }
    let h = Hypergraph::new(vw.clone(), edges.clone()).unwrap();
    if !s.connected {
        return h;
    }
    let comps = connected_components(&h);
    for w in comps.windows(2) {
        let a = w[0][r.random_range(0..w[0].len())];
        let b = w[1][r.random_range(0..w[1].len())];
        edges.push((vec![a, b], r.random_range(1..=s.max_ew)));
    }
    Hypergraph::new(vw, edges).unwrap()
}

/// Labels in `0..k` with every block occupied (requires `n ≥ k`).
pub fn random_partition(r: &mut ChaCha8Rng, n: usize, k: usize) -> Partition {
    let mut labels: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
    let order = sample(r, n, k).into_vec();
    for (b, &v) in order.iter().enumerate() {
        labels[v] = b;
    }
    Partition::new(labels, k).unwrap()
}

pub fn random_vector(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Cutsize straight from the definition.
pub fn cut_of_labels(h: &Hypergraph, labels: &[usize]) -> u64 {
    (0..h.n_edges())
        .filter(|&e| {
            let p = h.pins(e);
            p.iter().any(|&v| labels[v] != labels[p[0]])
        })
        .map(|e| h.edge_weight(e))
        .sum()
}

pub fn cut_of_side(h: &Hypergraph, side: &[bool]) -> u64 {
    let labels: Vec<usize> = side.iter().map(|&b| usize::from(b)).collect();
    cut_of_labels(h, &labels)
}

pub fn block_weights(h: &Hypergraph, labels: &[usize], k: usize) -> Vec<u64> {
    let mut w = vec![0; k];
    for (v, &b) in labels.iter().enumerate() {
        w[b] += h.vertex_weight(v);
    }
    w
}

/// Balance straight from the definition `max(0, 1/K − ε) ≤ W_i/W ≤ 1/K + ε`,
/// with a relative slack for decimal ε.
pub fn balanced(h: &Hypergraph, labels: &[usize], k: usize, eps: f64) -> bool {
    let total = h.total_weight() as f64;
    let slack = 1e-9 * total.max(1.0);
    block_weights(h, labels, k).iter().all(|&w| {
        let w = w as f64;
        w >= ((1.0 / k as f64 - eps).max(0.0)) * total - slack
            && w <= (1.0 / k as f64 + eps) * total + slack
    })
}

/// Clique expansion as an explicit weighted edge list.
pub fn clique_expansion(h: &Hypergraph) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for e in 0..h.n_edges() {
        let p = h.pins(e);
        let w = h.edge_weight(e) as f64 / (p.len() - 1) as f64;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                out.push((p[i], p[j], w));
            }
        }
    }
    out
}

pub fn graph_laplacian(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for &(u, v, w) in edges {
        l[(u, u)] += w;
        l[(v, v)] += w;
        l[(u, v)] -= w;
        l[(v, u)] -= w;
    }
    l
}

pub fn dense_clique(h: &Hypergraph) -> DMatrix<f64> {
    graph_laplacian(h.n_vertices(), &clique_expansion(h))
}

/// Laplacian of the complete graph with edge weights `w_u · w_v`.
pub fn dense_weight_balance(w: &[u64]) -> DMatrix<f64> {
    let n = w.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v, (w[u] * w[v]) as f64));
        }
    }
    graph_laplacian(n, &edges)
}

/// Laplacian of the complete bipartite graph between the two hint blocks.
pub fn dense_hint(s: &Partition) -> DMatrix<f64> {
    let l = s.labels();
    let mut edges = Vec::new();
    for u in 0..l.len() {
        for v in u + 1..l.len() {
            if l[u] != l[v] {
                edges.push((u, v, 1.0));
            }
        }
    }
    graph_laplacian(l.len(), &edges)
}

pub fn matvec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Orthonormal basis of the complement of the all-ones vector.
pub fn ones_complement(n: usize) -> DMatrix<f64> {
    let c = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let eig = SymmetricEigen::new(c);
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    assert_eq!(cols.len(), n - 1);
    eig.eigenvectors.select_columns(&cols)
}

/// All eigenvalues of `A x = λ B x` restricted to `1⊥`, ascending.
/// `B` must be positive definite there.
pub fn dense_generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let q = ones_complement(a.nrows());
    let ar = q.transpose() * a * &q;
    let br = q.transpose() * b * &q;
    let l = Cholesky::new(br).expect("B positive definite on 1⊥").l();
    let li = l.clone().try_inverse().unwrap();
    let c = &li * ar * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// The two sides of tree `edges` after deleting edge `e`: `true` marks the
/// side without `root`.
pub fn split_tree(n: usize, edges: &[(usize, usize)], e: usize, root: usize) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for (i, &(u, v)) in edges.iter().enumerate() {
        if i != e {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut q = VecDeque::from([root]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                q.push_back(v);
            }
        }
    }
    seen.iter().map(|&s| !s).collect()
}

pub fn is_spanning_tree(n: usize, edges: &[(usize, usize)]) -> bool {
    if edges.len() + 1 != n {
        return false;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(u, v) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// Minimum cutsize over all balanced `k`-way labelings, by plain enumeration.
pub fn enumerate_optimum(h: &Hypergraph, k: usize, eps: f64) -> Option<u64> {
    let n = h.n_vertices();
    let mut labels = vec![0usize; n];
    let mut best: Option<u64> = None;
    loop {
        if balanced(h, &labels, k, eps) {
            let c = cut_of_labels(h, &labels);
            best = Some(best.map_or(c, |b| b.min(c)));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}
