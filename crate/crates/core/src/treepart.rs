//! Turning distilled trees into K-way candidates.
//!
//! A sweep deletes the single tree edge with the smallest distilled cut whose
//! lower side fits a weight window. K-way solutions carve blocks one level at
//! a time: VILE uses the plain per-block window and may end up globally
//! imbalanced; the balanced-recursive variant tightens each window so the
//! remaining weight can still be split legally.

use rayon::prelude::*;

use crate::distill::{distill_restricted, DistilledTree};
use crate::error::{Error, Result};
use crate::hgmodel::{balance_violation, cutsize, BalanceBounds, Hypergraph, Partition};
use crate::refine::{fm_refine, FmConfig};

/// Chosen tree edge and the side below it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepCut {
    pub edge: usize,
    /// `true` for vertices below `edge` (block 0).
    pub below: Vec<bool>,
    pub below_weight: u64,
    pub cut_weight: u64,
    /// False when no edge fit the window and the ratio-cut fallback was used.
    pub feasible: bool,
}

impl SweepCut {
    pub fn partition(&self) -> Partition {
        Partition::new(self.below.iter().map(|&b| usize::from(!b)).collect(), 2)
            .expect("two labels")
    }
}

/// Minimum distilled cut over edges whose below-weight lies in `[lo, hi]`;
/// ties go to the weight closest to the window centre, then the lower edge
/// index. Without a feasible edge, minimizes `cut / (below · above)`.
pub fn sweep_bipartition(dt: &DistilledTree, lo: u64, hi: u64) -> Result<SweepCut> {
    let m = dt.edge_cut_weight.len();
    if m == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one tree edge".into()));
    }
    let total = dt.total_vertex_weight;
    let centre = u128::from(lo) + u128::from(hi);
    let imbalance = |w: u64| (2 * u128::from(w)).abs_diff(centre);
    let best = (0..m)
        .filter(|&e| (lo..=hi).contains(&dt.subtree_vertex_weight[e]))
        .min_by_key(|&e| {
            (
                dt.edge_cut_weight[e],
                imbalance(dt.subtree_vertex_weight[e]),
                e,
            )
        });
    let (edge, feasible) = match best {
        Some(e) => (e, true),
        None => {
            let ratio = |e: usize| {
                let b = dt.subtree_vertex_weight[e];
                if b == 0 || b >= total {
                    f64::INFINITY
                } else {
                    dt.edge_cut_weight[e] as f64 / (b as f64 * (total - b) as f64)
                }
            };
            let e = (0..m)
                .min_by(|&a, &b| {
                    ratio(a)
                        .total_cmp(&ratio(b))
                        .then(dt.edge_cut_weight[a].cmp(&dt.edge_cut_weight[b]))
                        .then(a.cmp(&b))
                })
                .unwrap();
            (e, false)
        }
    };
    Ok(SweepCut {
        edge,
        below: dt.tree.side_below(edge),
        below_weight: dt.subtree_vertex_weight[edge],
        cut_weight: dt.edge_cut_weight[edge],
        feasible,
    })
}

/// Sweep with the two-way window for `eps`.
pub fn sweep_two_way(dt: &DistilledTree, eps: f64) -> Result<SweepCut> {
    let b = BalanceBounds::new(dt.total_vertex_weight, 2, eps);
    sweep_bipartition(dt, b.lower, b.upper)
}

/// K-way partition from recursive carving, with whether any level had to
/// abandon its window.
#[derive(Debug, Clone)]
pub struct Carving {
    pub partition: Partition,
    pub fell_back: bool,
}

/// Carves `K − 1` blocks. At each level `windows(level, remaining)` lists the
/// weight windows to try in order; the first that admits an edge wins, and
/// if none does the last one's ratio-cut fallback is used.
fn carve<F>(h: &Hypergraph, dt: &DistilledTree, k: usize, windows: F) -> Result<Carving>
where
    F: Fn(usize, u64) -> Vec<(u64, u64)>,
{
    if k < 2 {
        return Err(Error::InvalidArgument("K must be at least 2".into()));
    }
    let n = h.n_vertices();
    let mut labels = vec![usize::MAX; n];
    let mut weights = h.vertex_weights().to_vec();
    let mut remaining = h.total_weight();
    let mut fell_back = false;
    for level in 0..k - 1 {
        let restricted;
        let level_dt = if level == 0 {
            dt
        } else {
            let fixed = |v: usize| labels[v] != usize::MAX;
            restricted = distill_restricted(h, &dt.tree, &weights, |e| {
                !h.pins(e).iter().all(|&v| fixed(v))
            })?;
            &restricted
        };
        let mut chosen = None;
        for (i, (lo, hi)) in windows(level, remaining).into_iter().enumerate() {
            let c = sweep_bipartition(level_dt, lo, hi)?;
            let ok = c.feasible;
            fell_back |= i > 0 || !ok;
            chosen = Some(c);
            if ok {
                break;
            }
        }
        let cut = chosen.expect("at least one window");
        for v in 0..n {
            if cut.below[v] && labels[v] == usize::MAX {
                labels[v] = level;
                remaining -= weights[v];
                weights[v] = 0;
            }
        }
    }
    labels.iter_mut().filter(|l| **l == usize::MAX).for_each(|l| *l = k - 1);
    Ok(Carving {
        partition: Partition::new(labels, k)?,
        fell_back,
    })
}

/// Carves `K − 1` blocks below tree edges, each within the per-block window
/// `[(1/K − ε)W, (1/K + ε)W]` when possible; carved vertices are fixed with
/// weight zero and the tree is re-distilled without the hyperedges lying
/// wholly among them. The rest is block `K − 1`, so the whole may be
/// imbalanced.
pub fn vile_kway(h: &Hypergraph, dt: &DistilledTree, k: usize, eps: f64) -> Result<Carving> {
    let b = BalanceBounds::for_hypergraph(h, k, eps);
    carve(h, dt, k, |_, _| vec![(b.lower, b.upper)])
}

/// Like [`vile_kway`], but level `i` also keeps the remaining weight `R`
/// splittable into the `r = K − 1 − i` later blocks:
/// `max(lo, R − r·hi) ≤ carved ≤ min(hi, R − r·lo)`. When that window is
/// empty or admits no edge the level falls back to the plain window.
pub fn balanced_recursive_kway(
    h: &Hypergraph,
    dt: &DistilledTree,
    k: usize,
    eps: f64,
) -> Result<Carving> {
    let b = BalanceBounds::for_hypergraph(h, k, eps);
    carve(h, dt, k, |level, remaining| {
        let r = (k - 1 - level) as u64;
        let lo = b.lower.max(remaining.saturating_sub(r.saturating_mul(b.upper)));
        let hi = remaining.checked_sub(r.saturating_mul(b.lower)).map(|x| x.min(b.upper));
        match hi {
            Some(hi) if lo <= hi => vec![(lo, hi), (b.lower, b.upper)],
            _ => vec![(b.lower, b.upper), (b.lower, b.upper)],
        }
    })
}

/// A candidate solution with its quality.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub partition: Partition,
    pub cutsize: u64,
    pub violation: u64,
}

impl Candidate {
    pub fn new(h: &Hypergraph, partition: Partition, eps: f64) -> Self {
        Self {
            cutsize: cutsize(h, &partition),
            violation: balance_violation(h, &partition, eps),
            partition,
        }
    }
}

/// Two carvings per tree (VILE then balanced-recursive), each FM-refined.
/// Candidates with identical labels are kept once, in first-seen order.
pub fn partition_tree_family(
    h: &Hypergraph,
    dts: &[DistilledTree],
    k: usize,
    eps: f64,
    fm: &FmConfig,
) -> Result<Vec<Candidate>> {
    let raw = raw_tree_candidates(h, dts, k, eps)?;
    let refined: Vec<Candidate> = raw
        .into_par_iter()
        .map(|s| Ok(Candidate::new(h, fm_refine(h, &s, eps, fm)?, eps)))
        .collect::<Result<_>>()?;
    let mut seen = std::collections::HashSet::new();
    Ok(refined
        .into_iter()
        .filter(|c| seen.insert(c.partition.labels().to_vec()))
        .collect())
}

/// The unrefined carvings, two per tree.
pub fn raw_tree_candidates(
    h: &Hypergraph,
    dts: &[DistilledTree],
    k: usize,
    eps: f64,
) -> Result<Vec<Partition>> {
    let per_tree: Vec<[Partition; 2]> = dts
        .par_iter()
        .map(|dt| {
            Ok([
                vile_kway(h, dt, k, eps)?.partition,
                balanced_recursive_kway(h, dt, k, eps)?.partition,
            ])
        })
        .collect::<Result<_>>()?;
    Ok(per_tree.into_iter().flatten().collect())
}
