//! Hint-supervised vertex embeddings.
//!
//! A two-way hint `S_b` defines the pencil `L_G x = λ (L_Gw + L_Gh) x`; its
//! smallest nontrivial eigenvectors are the embedding. For `K > 2` the K
//! one-vs-rest embeddings are stacked side by side and reduced back to `m`
//! columns with linear discriminant analysis, using the hint blocks as classes.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::eigen::{
    build_preconditioner, jacobi_preconditioner, solve_generalized, EigenOptions, Preconditioner,
};
use crate::error::{Error, Result};
use crate::hgmodel::{Hypergraph, Partition};
use crate::operators::{
    build_sparsifier, CliqueLaplacian, HintLaplacian, SumOperator, WeightBalanceLaplacian,
};

/// Row `v` holds the coordinates of vertex `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    matrix: DMatrix<f64>,
}

impl Embedding {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() == 0 {
            return Err(Error::InvalidArgument("embedding needs at least one column".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_vertices(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.column(j).iter().copied().collect()
    }

    /// Embedding restricted to the given columns, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Embedding {
        Embedding {
            matrix: self.matrix.select_columns(cols),
        }
    }

    /// `vertex,x0,x1,...` rows for external plotting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "vertex")?;
        for j in 0..self.dim() {
            write!(out, ",x{j}")?;
        }
        writeln!(out)?;
        for v in 0..self.n_vertices() {
            write!(out, "{v}")?;
            for j in 0..self.dim() {
                write!(out, ",{}", self.matrix[(v, j)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EmbedOptions {
    /// Target dimension.
    pub m: usize,
    pub eigen: EigenOptions,
    /// When false, `K > 2` returns the raw `K·m`-column stack.
    pub lda: bool,
}

impl EmbedOptions {
    pub fn new(m: usize, seed: u64) -> Self {
        Self {
            m,
            eigen: EigenOptions {
                seed,
                ..Default::default()
            },
            lda: true,
        }
    }
}

/// Embedding plus solver diagnostics, one entry per eigenproblem.
#[derive(Debug, Clone)]
pub struct EmbedOutput {
    pub embedding: Embedding,
    /// Width of the stacked embedding before LDA (`m` when `K = 2`).
    pub stacked_dim: usize,
    pub eigenvalues: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

/// Splits `s` into `V_j` (block 0) versus everything else (block 1).
pub fn one_vs_rest(s: &Partition, j: usize) -> Result<Partition> {
    if j >= s.k() {
        return Err(Error::InvalidArgument(format!("block {j} out of range")));
    }
    if !s.labels().contains(&j) {
        return Err(Error::EmptyBlock(j));
    }
    Partition::new(
        s.labels().iter().map(|&b| usize::from(b != j)).collect(),
        2,
    )
}

/// Preconditioner for the clique Laplacian of `h`, built from a fresh
/// sparsifier. Disconnected inputs fall back to Jacobi.
pub fn default_preconditioner(h: &Hypergraph, zeta: usize, seed: u64) -> Result<Box<dyn Preconditioner>> {
    let g = build_sparsifier(h, zeta, seed)?;
    Ok(match build_preconditioner(&g) {
        Ok(p) => Box::new(p),
        Err(Error::Disconnected { .. }) => Box::new(jacobi_preconditioner(&g)?),
        Err(e) => return Err(e),
    })
}

pub fn two_way_embedding(h: &Hypergraph, s_b: &Partition, m: usize, seed: u64) -> Result<Embedding> {
    let pc = default_preconditioner(h, 2, seed)?;
    Ok(two_way_embedding_with(h, s_b, pc.as_ref(), &EmbedOptions::new(m, seed))?.embedding)
}

pub fn two_way_embedding_with(
    h: &Hypergraph,
    s_b: &Partition,
    precond: &dyn Preconditioner,
    opts: &EmbedOptions,
) -> Result<EmbedOutput> {
    s_b.check_for(h)?;
    let a = CliqueLaplacian::new(h);
    let w = WeightBalanceLaplacian::new(h.vertex_weights())?;
    let hint = HintLaplacian::new(s_b)?;
    let b = SumOperator::new(vec![&w, &hint]);
    let res = solve_generalized(&a, &b, opts.m, precond, &opts.eigen)?;
    Ok(EmbedOutput {
        embedding: Embedding::new(res.eigenvectors)?,
        stacked_dim: opts.m,
        eigenvalues: vec![res.eigenvalues],
        residuals: vec![res.residuals],
        converged: res.converged,
        iterations: res.iterations,
    })
}

pub fn k_way_embedding(h: &Hypergraph, s: &Partition, m: usize, seed: u64) -> Result<Embedding> {
    let pc = default_preconditioner(h, 2, seed)?;
    Ok(k_way_embedding_with(h, s, pc.as_ref(), &EmbedOptions::new(m, seed))?.embedding)
}

/// K = 2 is the two-way embedding of `s` itself. Otherwise the K one-vs-rest
/// problems are solved in parallel, stacked and LDA-reduced.
pub fn k_way_embedding_with(
    h: &Hypergraph,
    s: &Partition,
    precond: &dyn Preconditioner,
    opts: &EmbedOptions,
) -> Result<EmbedOutput> {
    let k = s.k();
    if k < 2 {
        return Err(Error::InvalidArgument("K must be at least 2".into()));
    }
    s.check_for(h)?;
    // Empty blocks carry no supervision; embed against the occupied ones.
    let sizes = s.block_sizes();
    if let Some(empty) = sizes.iter().position(|&c| c == 0) {
        let occupied = sizes.iter().filter(|&&c| c > 0).count();
        if occupied < 2 {
            return Err(Error::EmptyBlock(empty));
        }
        let mut map = vec![usize::MAX; k];
        let mut next = 0;
        for (b, &c) in sizes.iter().enumerate() {
            if c > 0 {
                map[b] = next;
                next += 1;
            }
        }
        let relabeled = Partition::new(s.labels().iter().map(|&b| map[b]).collect(), occupied)?;
        return k_way_embedding_with(h, &relabeled, precond, opts);
    }
    if k == 2 {
        return two_way_embedding_with(h, s, precond, opts);
    }
    let parts: Vec<EmbedOutput> = (0..k)
        .into_par_iter()
        .map(|j| {
            let sb = one_vs_rest(s, j)?;
            let mut o = *opts;
            o.eigen.seed = crate::derive_seed(opts.eigen.seed, j as u64);
            two_way_embedding_with(h, &sb, precond, &o)
        })
        .collect::<Result<_>>()?;

    let n = h.n_vertices();
    let width = k * opts.m;
    let stacked = DMatrix::from_iterator(
        n,
        width,
        parts
            .iter()
            .flat_map(|p| p.embedding.matrix().as_slice().iter().copied()),
    );
    let stacked = Embedding::new(stacked)?;
    let embedding = if opts.lda {
        lda_reduce(&stacked, s, opts.m)?
    } else {
        stacked
    };
    Ok(EmbedOutput {
        embedding,
        stacked_dim: width,
        converged: parts.iter().all(|p| p.converged),
        iterations: parts.iter().map(|p| p.iterations).max().unwrap_or(0),
        eigenvalues: parts.iter().flat_map(|p| p.eigenvalues.clone()).collect(),
        residuals: parts.into_iter().flat_map(|p| p.residuals).collect(),
    })
}

fn fix_sign(v: &mut nalgebra::DVector<f64>) {
    let mut pivot = 0.0f64;
    for &x in v.iter() {
        if x.abs() > pivot.abs() {
            pivot = x;
        }
    }
    if pivot < 0.0 {
        v.neg_mut();
    }
}

/// Eigenpairs sorted by descending eigenvalue.
fn descending(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (&m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = e.eigenvectors.select_columns(&order);
    (vals, vecs)
}

/// Projects `x` onto the `m` most discriminative directions for the classes
/// in `labels`: the top eigenvectors of `(S_W + λI)⁻¹ S_B`. When fewer than
/// `m` directions carry between-class scatter, the rest are the leading
/// within-class principal directions orthogonal to them.
pub fn lda_reduce(x: &Embedding, labels: &Partition, m: usize) -> Result<Embedding> {
    let n = x.n_vertices();
    let d = x.dim();
    if labels.len() != n {
        return Err(Error::InvalidArgument("label count differs from row count".into()));
    }
    if m == 0 || m > d {
        return Err(Error::InvalidArgument(format!(
            "cannot reduce {d} columns to {m}"
        )));
    }
    let k = labels.k();
    let mut counts = vec![0usize; k];
    let mut sums = vec![nalgebra::DVector::<f64>::zeros(d); k];
    for v in 0..n {
        let c = labels.block(v);
        counts[c] += 1;
        sums[c] += x.matrix.row(v).transpose();
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidArgument("LDA needs at least two classes".into()));
    }
    let mean: nalgebra::DVector<f64> = sums.iter().sum::<nalgebra::DVector<f64>>() / n as f64;
    let means: Vec<_> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { s.clone() })
        .collect();

    let mut sw = DMatrix::<f64>::zeros(d, d);
    for v in 0..n {
        let diff = x.matrix.row(v).transpose() - &means[labels.block(v)];
        sw.ger(1.0, &diff, &diff, 1.0);
    }
    let mut sb = DMatrix::<f64>::zeros(d, d);
    for (mu, &c) in means.iter().zip(&counts) {
        if c > 0 {
            let diff = mu - &mean;
            sb.ger(c as f64, &diff, &diff, 1.0);
        }
    }
    if sw.trace() + sb.trace() <= 0.0 {
        log::warn!("LDA input has no spread; keeping the first {m} coordinates");
        return Embedding::new(x.matrix.columns(0, m).into_owned());
    }

    let lambda = (1e-6 * sw.trace() / d as f64)
        .max(1e-12 * sb.trace() / d as f64)
        .max(f64::MIN_POSITIVE);
    let a = &sw + DMatrix::<f64>::identity(d, d) * lambda;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("within-class scatter is not positive".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular within-class scatter".into()))?;
    // whitened between-class scatter; its eigenvectors u give p = L⁻ᵀ u
    let (vals, u) = descending(&l_inv * &sb * l_inv.transpose());
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let rank = vals.iter().filter(|&&v| v > 1e-10 * top && top > 0.0).count();

    let mut whitened: Vec<nalgebra::DVector<f64>> =
        (0..rank.min(m)).map(|j| u.column(j).into_owned()).collect();
    if rank < m {
        let null = u.columns(rank, d - rank).into_owned();
        let within = &l_inv * &sw * l_inv.transpose();
        let (_, z) = descending(null.transpose() * within * &null);
        for j in 0..m - rank {
            whitened.push(&null * z.column(j));
        }
    }
    let l_inv_t = l_inv.transpose();
    let mut p = DMatrix::<f64>::zeros(d, m);
    for (j, w) in whitened.iter().enumerate() {
        let mut col = &l_inv_t * w;
        fix_sign(&mut col);
        p.set_column(j, &col);
    }
    Embedding::new(&x.matrix * p)
}
