//! Matrix-free Laplacians of the clique-expansion, weight-balance and hint
//! graphs, plus the random-cycle sparsifier.
//!
//! None of the dense graphs is ever built: the clique expansion of a hyperedge
//! with `p` pins has `p(p−1)/2` edges, the other two graphs are complete. Each
//! operator evaluates `L x` from projections in time linear in its input.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hgmodel::{Hypergraph, Partition};

/// Symmetric linear map on `R^dim`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y` (overwriting it).
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.apply(x))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Laplacian of the clique expansion: every hyperedge `e` becomes a clique
/// with edge weight `w_e / (|e| − 1)`.
pub struct CliqueLaplacian<'a> {
    h: &'a Hypergraph,
}

impl<'a> CliqueLaplacian<'a> {
    pub fn new(h: &'a Hypergraph) -> Self {
        Self { h }
    }
}

impl LinearOperator for CliqueLaplacian<'_> {
    fn dim(&self) -> usize {
        self.h.n_vertices()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (pins, w) in self.h.edges() {
            let p = pins.len() as f64;
            let mean = pins.iter().map(|&v| x[v]).sum::<f64>() / p;
            // clique Laplacian of K_p with edge weight c is c·p·(I − 11ᵀ/p)
            let scale = w as f64 * p / (p - 1.0);
            for &v in pins {
                y[v] += scale * (x[v] - mean);
            }
        }
    }
}

/// Laplacian of the complete graph with edge weights `w_u · w_v`, so that an
/// indicator `x_S` gives `x_Sᵀ L x_S = W_S · W_{V−S}`.
///
/// Equals `W · diag(w) − w wᵀ`; applied as `W (w ∘ x) − (wᵀx) w`.
pub struct WeightBalanceLaplacian {
    weights: Vec<f64>,
    total: f64,
}

impl WeightBalanceLaplacian {
    pub fn new(vertex_weights: &[u64]) -> Result<Self> {
        let weights: Vec<f64> = vertex_weights.iter().map(|&w| w as f64).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument(
                "vertex weights must have a positive sum".into(),
            ));
        }
        Ok(Self { weights, total })
    }
}

impl LinearOperator for WeightBalanceLaplacian {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let wx = dot(&self.weights, x);
        for ((yi, &wi), &xi) in y.iter_mut().zip(&self.weights).zip(x) {
            *yi = self.total * wi * xi - wx * wi;
        }
    }
}

/// Laplacian of the complete bipartite graph between the two blocks of a
/// two-way hint, via `L_{K_n} − L_{K_{V0}} − L_{K_{V1}}`.
pub struct HintLaplacian {
    side: Vec<bool>,
    sizes: [f64; 2],
}

impl HintLaplacian {
    pub fn new(hint: &Partition) -> Result<Self> {
        if hint.k() != 2 {
            return Err(Error::InvalidArgument(format!(
                "hint graph needs a two-way partition, got k = {}",
                hint.k()
            )));
        }
        let side: Vec<bool> = hint.labels().iter().map(|&b| b == 1).collect();
        let ones = side.iter().filter(|&&s| s).count();
        let sizes = [(side.len() - ones) as f64, ones as f64];
        if let Some(b) = sizes.iter().position(|&s| s == 0.0) {
            return Err(Error::EmptyBlock(b));
        }
        Ok(Self { side, sizes })
    }
}

impl LinearOperator for HintLaplacian {
    fn dim(&self) -> usize {
        self.side.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut sums = [0.0; 2];
        for (&s, &xi) in self.side.iter().zip(x) {
            sums[s as usize] += xi;
        }
        let n = self.sizes[0] + self.sizes[1];
        let mean = (sums[0] + sums[1]) / n;
        let means = [sums[0] / self.sizes[0], sums[1] / self.sizes[1]];
        for ((yi, &s), &xi) in y.iter_mut().zip(&self.side).zip(x) {
            let b = s as usize;
            *yi = n * (xi - mean) - self.sizes[b] * (xi - means[b]);
        }
    }
}

/// Sum of operators of equal dimension.
pub struct SumOperator<'a> {
    terms: Vec<&'a dyn LinearOperator>,
}

impl<'a> SumOperator<'a> {
    pub fn new(terms: Vec<&'a dyn LinearOperator>) -> Self {
        assert!(!terms.is_empty());
        let d = terms[0].dim();
        assert!(terms.iter().all(|t| t.dim() == d), "dimension mismatch");
        Self { terms }
    }
}

impl LinearOperator for SumOperator<'_> {
    fn dim(&self) -> usize {
        self.terms[0].dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; y.len()];
        self.terms[0].apply_into(x, y);
        for t in &self.terms[1..] {
            t.apply_into(x, &mut tmp);
            for (a, b) in y.iter_mut().zip(&tmp) {
                *a += b;
            }
        }
    }
}

/// Weighted multigraph given as an edge list; parallel edges add up in the
/// Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl SparseGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(u, v, w) in &edges {
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at {u}")));
            }
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) out of range for {n_vertices} vertices"
                )));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) has weight {w}"
                )));
            }
        }
        Ok(Self { n_vertices, edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Neighbor lists `(neighbor, weight, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64, usize)>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for (i, &(u, v, w)) in self.edges.iter().enumerate() {
            adj[u].push((v, w, i));
            adj[v].push((u, w, i));
        }
        adj
    }

    pub fn n_components(&self) -> usize {
        let mut uf = petgraph::unionfind::UnionFind::<usize>::new(self.n_vertices);
        let mut comps = self.n_vertices;
        for &(u, v, _) in &self.edges {
            if uf.union(u, v) {
                comps -= 1;
            }
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n_components() <= 1
    }

    pub fn laplacian(&self) -> GraphLaplacian<'_> {
        GraphLaplacian { g: self }
    }
}

pub struct GraphLaplacian<'a> {
    g: &'a SparseGraph,
}

impl LinearOperator for GraphLaplacian<'_> {
    fn dim(&self) -> usize {
        self.g.n_vertices
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for &(u, v, w) in &self.g.edges {
            let d = w * (x[u] - x[v]);
            y[u] += d;
            y[v] -= d;
        }
    }
}

/// Replaces every hyperedge by `zeta` uniformly random cycles through its
/// pins, each cycle edge weighted `w_e / zeta`. A two-pin hyperedge yields one
/// edge per cycle. At most `zeta · Σ|e|` edges.
pub fn build_sparsifier(h: &Hypergraph, zeta: usize, seed: u64) -> Result<SparseGraph> {
    if zeta == 0 {
        return Err(Error::InvalidArgument("zeta must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(zeta * h.n_pins());
    let mut order = Vec::new();
    for (pins, w) in h.edges() {
        let cw = w as f64 / zeta as f64;
        for _ in 0..zeta {
            if pins.len() == 2 {
                edges.push((pins[0], pins[1], cw));
                continue;
            }
            order.clear();
            order.extend_from_slice(pins);
            order.shuffle(&mut rng);
            for i in 0..order.len() {
                edges.push((order[i], order[(i + 1) % order.len()], cw));
            }
        }
    }
    SparseGraph::new(h.n_vertices(), edges)
}
