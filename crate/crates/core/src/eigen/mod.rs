//! Smallest nontrivial eigenpairs of a Laplacian pencil `A x = λ B x`.
//!
//! Both operators are assumed to annihilate the constant vector, so all work
//! happens on its orthogonal complement. Large problems run a block LOBPCG
//! iteration (block size `m + 2`); tiny ones (where a block of three times
//! that width would exhaust the space) are solved by Rayleigh–Ritz on the
//! whole complement.

mod precond;

pub use precond::{
    build_preconditioner, jacobi_preconditioner, GraphPreconditioner, IdentityPreconditioner,
    Preconditioner,
};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::LinearOperator;

/// Regularization of the projected `B` Gram matrix.
const B_REGULARIZATION: f64 = 1e-12;
/// Relative eigenvalue cutoff for directions dropped as linearly dependent.
const RANK_CUTOFF: f64 = 1e-11;

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `n × m`, columns B-orthonormal, largest-magnitude entry positive.
    pub eigenvectors: DMatrix<f64>,
    /// `‖A x − λ B x‖ / max(‖A x‖, λ‖B x‖)` per column.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Ritz values of the wanted pairs after every iteration.
    pub ritz_history: Vec<Vec<f64>>,
}

fn remove_mean(col: &mut [f64]) {
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    col.iter_mut().for_each(|v| *v -= mean);
}

fn apply_block(op: &dyn LinearOperator, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::<f64>::zeros(n, x.ncols());
    out.as_mut_slice()
        .par_chunks_mut(n)
        .zip(x.as_slice().par_chunks(n))
        .for_each(|(y, xc)| op.apply_into(xc, y));
    out
}

fn apply_precond(t: &dyn Preconditioner, r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = r.nrows();
    let mut out = DMatrix::<f64>::zeros(n, r.ncols());
    out.as_mut_slice()
        .par_chunks_mut(n)
        .zip(r.as_slice().par_chunks(n))
        .for_each(|(z, rc)| t.apply_into(rc, z));
    out
}

/// Removes the constant component of every column and scales to unit
/// Euclidean norm, dropping columns that vanish.
fn deflate_and_normalize(x: DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut keep: Vec<Vec<f64>> = Vec::with_capacity(x.ncols());
    for col in x.as_slice().chunks(n) {
        let mut c = col.to_vec();
        remove_mean(&mut c);
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-300 && norm.is_finite() {
            c.iter_mut().for_each(|v| *v /= norm);
            keep.push(c);
        }
    }
    let cols = keep.len();
    DMatrix::from_iterator(n, cols, keep.into_iter().flatten())
}

fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    DMatrix::from_iterator(
        n,
        cols,
        blocks.iter().flat_map(|b| b.as_slice().iter().copied()),
    )
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Rayleigh–Ritz for the projected pencil. Returns the `k` smallest Ritz
/// values and their coefficient vectors, normalized in the (regularized)
/// projected B inner product.
fn rayleigh_ritz(
    s: &DMatrix<f64>,
    as_: &DMatrix<f64>,
    bs: &DMatrix<f64>,
    k: usize,
) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let mut ga = s.transpose() * as_;
    let mut gb = s.transpose() * bs;
    symmetrize(&mut ga);
    symmetrize(&mut gb);
    gb += s.transpose() * s * B_REGULARIZATION;

    let eb = SymmetricEigen::new(gb);
    let max = eb.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return None;
    }
    let kept: Vec<usize> = (0..eb.eigenvalues.len())
        .filter(|&i| eb.eigenvalues[i] > RANK_CUTOFF * max)
        .collect();
    if kept.len() < k {
        return None;
    }
    let dim = ga.nrows();
    let mut t = DMatrix::<f64>::zeros(dim, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        let scale = eb.eigenvalues[i].sqrt().recip();
        t.set_column(j, &(eb.eigenvectors.column(i) * scale));
    }
    let mut c = t.transpose() * &ga * &t;
    symmetrize(&mut c);
    let ec = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..ec.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| ec.eigenvalues[i].total_cmp(&ec.eigenvalues[j]));
    let mut y = DMatrix::<f64>::zeros(dim, k);
    let mut vals = Vec::with_capacity(k);
    for (j, &i) in order.iter().take(k).enumerate() {
        vals.push(ec.eigenvalues[i]);
        y.set_column(j, &(&t * ec.eigenvectors.column(i)));
    }
    Some((vals, y))
}

fn relative_residuals(
    ax: &DMatrix<f64>,
    bx: &DMatrix<f64>,
    vals: &[f64],
    count: usize,
) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let r = ax.column(j) - bx.column(j) * vals[j];
            let denom = ax.column(j).norm().max(vals[j].abs() * bx.column(j).norm());
            if denom > 0.0 {
                r.norm() / denom
            } else {
                r.norm()
            }
        })
        .collect()
}

/// Scales each column to unit B-norm and flips it so that its
/// largest-magnitude entry is positive.
fn normalize_columns(x: &mut DMatrix<f64>, bx: &DMatrix<f64>) {
    for j in 0..x.ncols() {
        let bn = x.column(j).dot(&bx.column(j));
        let mut scale = if bn > 0.0 { bn.sqrt().recip() } else { 1.0 };
        let mut pivot = 0.0f64;
        for &v in x.column(j).iter() {
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        if pivot < 0.0 {
            scale = -scale;
        }
        x.column_mut(j).scale_mut(scale);
    }
}

/// Computes the `m` smallest eigenpairs of `A x = λ B x` orthogonal to the
/// constant vector.
///
/// Non-convergence within `max_iter` is not an error: the best iterate is
/// returned with `converged == false`.
pub fn solve_generalized(
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    m: usize,
    precond: &dyn Preconditioner,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let n = a.dim();
    if b.dim() != n || precond.dim() != n {
        return Err(Error::InvalidArgument(
            "operator dimensions differ".into(),
        ));
    }
    if m == 0 || m + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "cannot compute {m} nontrivial eigenvectors in dimension {n}"
        )));
    }
    let block = (m + 2).min(n - 1);
    if 3 * block >= n - 1 {
        return solve_dense(a, b, m);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init = DMatrix::from_fn(n, block, |_, _| rng.random::<f64>() - 0.5);
    let mut x = deflate_and_normalize(init);
    let ax = apply_block(a, &x);
    let bx = apply_block(b, &x);
    let (mut vals, y) = rayleigh_ritz(&x, &ax, &bx, block)
        .ok_or_else(|| Error::InvalidArgument("degenerate initial block".into()))?;
    x = &x * &y;
    let mut p: Option<DMatrix<f64>> = None;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let ax = apply_block(a, &x);
        let bx = apply_block(b, &x);
        let res = relative_residuals(&ax, &bx, &vals, block);
        if res[..m].iter().all(|&r| r <= opts.tol) {
            converged = true;
        }
        if converged || iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let mut r = bx.clone();
        for j in 0..block {
            r.column_mut(j).scale_mut(-vals[j]);
        }
        r += &ax;
        let w = deflate_and_normalize(apply_precond(precond, &r));
        let x_unit = deflate_and_normalize(x.clone());

        let mut step = None;
        for with_p in [true, false] {
            let mut parts = vec![&x_unit, &w];
            if with_p {
                match &p {
                    Some(pm) => parts.push(pm),
                    None => continue,
                }
            }
            let s = hcat(&parts);
            let as_ = apply_block(a, &s);
            let bs = apply_block(b, &s);
            if let Some((v, y)) = rayleigh_ritz(&s, &as_, &bs, block) {
                step = Some((s, v, y));
                break;
            }
        }
        let Some((s, v, y)) = step else {
            log::warn!("eigensolver: search space collapsed after {iterations} iterations");
            break;
        };
        let xb = x_unit.ncols();
        let tail = s.columns(xb, s.ncols() - xb) * y.rows(xb, s.ncols() - xb);
        x = &s * &y;
        let pn = deflate_and_normalize(tail);
        p = (pn.ncols() > 0).then_some(pn);
        vals = v;
        history.push(vals[..m].to_vec());
    }

    let ax = apply_block(a, &x);
    let bx = apply_block(b, &x);
    let mut vecs = x.columns(0, m).into_owned();
    normalize_columns(&mut vecs, &bx.columns(0, m).into_owned());
    let residuals = relative_residuals(&ax, &bx, &vals, m);
    if !converged {
        log::warn!(
            "eigensolver: not converged after {iterations} iterations (max residual {:.2e})",
            residuals.iter().cloned().fold(0.0, f64::max)
        );
    }
    Ok(EigenResult {
        eigenvalues: vals[..m].to_vec(),
        eigenvectors: vecs,
        residuals,
        converged,
        iterations,
        ritz_history: history,
    })
}

/// Rayleigh–Ritz on the full complement of the constants.
fn solve_dense(a: &dyn LinearOperator, b: &dyn LinearOperator, m: usize) -> Result<EigenResult> {
    let n = a.dim();
    let basis = DMatrix::from_fn(n, n - 1, |i, j| {
        if i == j {
            1.0 - 1.0 / n as f64
        } else {
            -1.0 / n as f64
        }
    });
    let as_ = apply_block(a, &basis);
    let bs = apply_block(b, &basis);
    let (vals, y) = rayleigh_ritz(&basis, &as_, &bs, m)
        .ok_or_else(|| Error::InvalidArgument("B is singular on too many directions".into()))?;
    let mut x = &basis * &y;
    let ax = apply_block(a, &x);
    let bx = apply_block(b, &x);
    let residuals = relative_residuals(&ax, &bx, &vals, m);
    normalize_columns(&mut x, &bx);
    Ok(EigenResult {
        eigenvalues: vals,
        eigenvectors: x,
        converged: true,
        residuals,
        iterations: 0,
        ritz_history: Vec::new(),
    })
}
