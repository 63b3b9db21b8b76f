//! Multilevel support-graph preconditioner for graph Laplacians.
//!
//! Every vertex is tied to its heaviest neighbor; the components of that
//! forest become the vertices of the next level and the coarse Laplacian is
//! `Pᵀ L P` for the piecewise-constant aggregation `P`. One application is a
//! symmetric V-cycle with damped Jacobi smoothing and an exact solve on the
//! coarsest level. Everything acts on the complement of the constant vector.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::SparseGraph;

const COARSEST_SIZE: usize = 64;
/// A level that keeps more than this fraction of its vertices stops coarsening.
const MIN_REDUCTION: f64 = 0.9;
const JACOBI_DAMPING: f64 = 2.0 / 3.0;
const SMOOTHING_SWEEPS: usize = 2;

/// Approximate inverse of a connected graph Laplacian on the range of `L`.
pub trait Preconditioner: Sync {
    fn dim(&self) -> usize;

    fn apply_into(&self, r: &[f64], z: &mut [f64]);

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        self.apply_into(r, &mut z);
        z
    }
}

/// Laplacian in CSR form with the diagonal kept separately.
#[derive(Debug, Clone)]
struct Csr {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    diag: Vec<f64>,
}

impl Csr {
    /// Merges parallel edges.
    fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (u, v, w) in edges {
            if u != v && w > 0.0 {
                rows[u].push((v, w));
                rows[v].push((u, w));
            }
        }
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let mut diag = vec![0.0; n];
        for (u, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(v, _)| v);
            let mut i = 0;
            while i < row.len() {
                let v = row[i].0;
                let mut w = 0.0;
                while i < row.len() && row[i].0 == v {
                    w += row[i].1;
                    i += 1;
                }
                cols.push(v);
                weights.push(w);
                diag[u] += w;
            }
            offsets.push(cols.len());
        }
        Self {
            offsets,
            cols,
            weights,
            diag,
        }
    }

    fn n(&self) -> usize {
        self.diag.len()
    }

    fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    /// `y = L x`
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for u in 0..self.n() {
            let off: f64 = self.row(u).map(|(v, w)| w * x[v]).sum();
            y[u] = self.diag[u] * x[u] - off;
        }
    }

    /// Aggregates along heaviest incident edges. Returns the cluster of each
    /// vertex and the cluster count.
    fn heavy_edge_aggregation(&self) -> (Vec<usize>, usize) {
        let n = self.n();
        let mut uf = petgraph::unionfind::UnionFind::<usize>::new(n);
        for u in 0..n {
            let mut best: Option<(usize, f64)> = None;
            for (v, w) in self.row(u) {
                if best.is_none_or(|(_, bw)| w > bw) {
                    best = Some((v, w));
                }
            }
            if let Some((v, _)) = best {
                uf.union(u, v);
            }
        }
        let mut id = vec![usize::MAX; n];
        let mut next = 0;
        let agg = (0..n)
            .map(|u| {
                let r = uf.find(u);
                if id[r] == usize::MAX {
                    id[r] = next;
                    next += 1;
                }
                id[r]
            })
            .collect();
        (agg, next)
    }

    fn galerkin(&self, agg: &[usize], n_coarse: usize) -> Self {
        let edges = (0..self.n()).flat_map(|u| {
            self.row(u)
                .filter(move |&(v, _)| u < v)
                .map(move |(v, w)| (agg[u], agg[v], w))
        });
        Self::from_edges(n_coarse, edges)
    }
}

fn remove_mean(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x {
        *v -= mean;
    }
}

struct Level {
    matrix: Csr,
    aggregate: Vec<usize>,
    n_coarse: usize,
}

/// Cholesky factor of `L + α 11ᵀ`, which is nonsingular for a connected
/// graph and agrees with `L⁺` on vectors orthogonal to the constants.
struct CoarseSolve {
    factor: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    n: usize,
}

impl CoarseSolve {
    fn new(m: &Csr) -> Result<Self> {
        let n = m.n();
        if n <= 1 {
            return Ok(Self { factor: None, n });
        }
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for u in 0..n {
            dense[(u, u)] = m.diag[u];
            for (v, w) in m.row(u) {
                dense[(u, v)] -= w;
            }
        }
        let alpha = m.diag.iter().sum::<f64>() / (n * n) as f64;
        dense.add_scalar_mut(alpha.max(f64::MIN_POSITIVE));
        let factor = dense
            .cholesky()
            .ok_or(Error::Disconnected { components: 2 })?;
        Ok(Self {
            factor: Some(factor),
            n,
        })
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        match &self.factor {
            None => z.fill(0.0),
            Some(f) => {
                let mut rhs = DVector::from_column_slice(r);
                remove_mean(rhs.as_mut_slice());
                let sol = f.solve(&rhs);
                z.copy_from_slice(sol.as_slice());
                remove_mean(z);
            }
        }
        debug_assert_eq!(z.len(), self.n);
    }
}

/// Preconditioner produced by [`build_preconditioner`].
pub struct GraphPreconditioner {
    kind: Kind,
}

enum Kind {
    Multilevel {
        levels: Vec<Level>,
        coarsest: Csr,
        solve: CoarseSolve,
    },
    Jacobi {
        inv_diag: Vec<f64>,
    },
}

impl std::fmt::Debug for GraphPreconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            Kind::Multilevel { levels, .. } => {
                write!(f, "Multilevel {{ depth: {} }}", levels.len() + 1)
            }
            Kind::Jacobi { inv_diag } => write!(f, "Jacobi {{ n: {} }}", inv_diag.len()),
        }
    }
}

/// Builds the multilevel hierarchy for the Laplacian of `g`. Falls back to
/// Jacobi when aggregation stalls above the coarsest size.
pub fn build_preconditioner(g: &SparseGraph) -> Result<GraphPreconditioner> {
    let comps = g.n_components();
    if comps > 1 {
        return Err(Error::Disconnected { components: comps });
    }
    let mut current = Csr::from_edges(g.n_vertices(), g.edges().iter().copied());
    let mut levels = Vec::new();
    while current.n() > COARSEST_SIZE {
        let (aggregate, n_coarse) = current.heavy_edge_aggregation();
        if n_coarse as f64 > MIN_REDUCTION * current.n() as f64 {
            let top = levels.first().map_or(&current, |l: &Level| &l.matrix);
            log::debug!(
                "aggregation stalled at {} vertices; using Jacobi",
                current.n()
            );
            return Ok(GraphPreconditioner {
                kind: Kind::Jacobi {
                    inv_diag: top.diag.iter().map(|&d| 1.0 / d).collect(),
                },
            });
        }
        let coarse = current.galerkin(&aggregate, n_coarse);
        levels.push(Level {
            matrix: current,
            aggregate,
            n_coarse,
        });
        current = coarse;
    }
    let solve = CoarseSolve::new(&current)?;
    Ok(GraphPreconditioner {
        kind: Kind::Multilevel {
            levels,
            coarsest: current,
            solve,
        },
    })
}

/// Diagonal preconditioner of the Laplacian of `g`.
pub fn jacobi_preconditioner(g: &SparseGraph) -> Result<GraphPreconditioner> {
    let m = Csr::from_edges(g.n_vertices(), g.edges().iter().copied());
    if m.diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Disconnected {
            components: g.n_components(),
        });
    }
    Ok(GraphPreconditioner {
        kind: Kind::Jacobi {
            inv_diag: m.diag.iter().map(|&d| 1.0 / d).collect(),
        },
    })
}

impl GraphPreconditioner {
    /// Number of levels including the coarsest; 1 for Jacobi.
    pub fn depth(&self) -> usize {
        match &self.kind {
            Kind::Multilevel { levels, .. } => levels.len() + 1,
            Kind::Jacobi { .. } => 1,
        }
    }

    pub fn is_jacobi(&self) -> bool {
        matches!(self.kind, Kind::Jacobi { .. })
    }

    fn vcycle(levels: &[Level], solve: &CoarseSolve, r: &[f64], z: &mut [f64]) {
        let Some((level, rest)) = levels.split_first() else {
            solve.solve(r, z);
            return;
        };
        let a = &level.matrix;
        let n = a.n();
        let mut az = vec![0.0; n];
        z.fill(0.0);
        for _ in 0..SMOOTHING_SWEEPS {
            a.apply(z, &mut az);
            for u in 0..n {
                z[u] += JACOBI_DAMPING * (r[u] - az[u]) / a.diag[u];
            }
        }
        a.apply(z, &mut az);
        let mut rc = vec![0.0; level.n_coarse];
        for u in 0..n {
            rc[level.aggregate[u]] += r[u] - az[u];
        }
        let mut zc = vec![0.0; level.n_coarse];
        Self::vcycle(rest, solve, &rc, &mut zc);
        for u in 0..n {
            z[u] += zc[level.aggregate[u]];
        }
        for _ in 0..SMOOTHING_SWEEPS {
            a.apply(z, &mut az);
            for u in 0..n {
                z[u] += JACOBI_DAMPING * (r[u] - az[u]) / a.diag[u];
            }
        }
    }
}

impl Preconditioner for GraphPreconditioner {
    fn dim(&self) -> usize {
        match &self.kind {
            Kind::Multilevel {
                levels, coarsest, ..
            } => levels.first().map_or(coarsest.n(), |l| l.matrix.n()),
            Kind::Jacobi { inv_diag } => inv_diag.len(),
        }
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        let mut rp = r.to_vec();
        remove_mean(&mut rp);
        match &self.kind {
            Kind::Multilevel { levels, solve, .. } => Self::vcycle(levels, solve, &rp, z),
            Kind::Jacobi { inv_diag } => {
                for ((zi, ri), d) in z.iter_mut().zip(&rp).zip(inv_diag) {
                    *zi = ri * d;
                }
            }
        }
        remove_mean(z);
    }
}

/// Identity on the complement of the constants.
pub struct IdentityPreconditioner(pub usize);

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        remove_mean(z);
    }
}
