//! Cut distilling: every tree edge gets the exact hypergraph cutsize of the
//! bipartition obtained by deleting it.
//!
//! A hyperedge is cut by deleting tree edge `(v, parent v)` exactly when the
//! subtree of `v` holds some but not all of its pins. With pins sorted by
//! preorder position, placing `+w` on every pin, `−w` on the LCA of every
//! consecutive pair and another `−w` on the LCA of all pins makes each subtree
//! sum equal `w` on precisely those edges and `0` elsewhere.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hgmodel::Hypergraph;
use crate::trees::Tree;

/// Constant-time lowest common ancestors over a rooted tree.
///
/// For `u ≠ v` with `u` earlier in preorder, `lca(u, v)` is the parent of the
/// shallowest vertex in the preorder range `(pos u, pos v]`; a sparse table
/// answers that range minimum.
pub struct Lca<'a> {
    tree: &'a Tree,
    pos: Vec<usize>,
    table: Vec<Vec<usize>>,
}

impl<'a> Lca<'a> {
    pub fn new(tree: &'a Tree) -> Self {
        let order = tree.preorder();
        let n = order.len();
        let mut pos = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut table = vec![order.to_vec()];
        let mut span = 1;
        while 2 * span <= n {
            let prev = table.last().unwrap();
            let next = (0..=n - 2 * span)
                .map(|i| {
                    let (a, b) = (prev[i], prev[i + span]);
                    if tree.depth(b) < tree.depth(a) {
                        b
                    } else {
                        a
                    }
                })
                .collect();
            table.push(next);
            span *= 2;
        }
        Self { tree, pos, table }
    }

    /// Preorder position of `v`.
    pub fn position(&self, v: usize) -> usize {
        self.pos[v]
    }

    pub fn lca(&self, u: usize, v: usize) -> usize {
        if u == v {
            return u;
        }
        let (a, b) = {
            let (pu, pv) = (self.pos[u], self.pos[v]);
            if pu < pv {
                (pu + 1, pv)
            } else {
                (pv + 1, pu)
            }
        };
        let level = (usize::BITS - 1 - (b - a + 1).leading_zeros()) as usize;
        let row = &self.table[level];
        let (x, y) = (row[a], row[b + 1 - (1 << level)]);
        let shallow = if self.tree.depth(y) < self.tree.depth(x) {
            y
        } else {
            x
        };
        self.tree.parent(shallow).expect("range excludes the root")
    }
}

/// Tree whose edges carry the exact induced hypergraph cutsize.
#[derive(Debug, Clone)]
pub struct DistilledTree {
    pub tree: Tree,
    /// Indexed like `tree.edges()`.
    pub edge_cut_weight: Vec<u64>,
    /// Total vertex weight of the subtree below each edge.
    pub subtree_vertex_weight: Vec<u64>,
    /// Sum of the vertex weights used while distilling.
    pub total_vertex_weight: u64,
}

pub fn distill(h: &Hypergraph, t: &Tree) -> Result<DistilledTree> {
    distill_restricted(h, t, h.vertex_weights(), |_| true)
}

/// Distills over the hyperedges accepted by `keep_edge`, with subtree
/// weights taken from `vertex_weights`.
pub fn distill_restricted(
    h: &Hypergraph,
    t: &Tree,
    vertex_weights: &[u64],
    keep_edge: impl Fn(usize) -> bool,
) -> Result<DistilledTree> {
    let n = h.n_vertices();
    if t.n_vertices() != n || vertex_weights.len() != n {
        return Err(Error::InvalidArgument(format!(
            "tree spans {} vertices, hypergraph has {n}",
            t.n_vertices()
        )));
    }
    let lca = Lca::new(t);
    let mut label = vec![0i128; n];
    let mut pins: Vec<usize> = Vec::new();
    for e in 0..h.n_edges() {
        if !keep_edge(e) {
            continue;
        }
        let w = i128::from(h.edge_weight(e));
        pins.clear();
        pins.extend_from_slice(h.pins(e));
        pins.sort_by_key(|&v| lca.position(v));
        for &p in &pins {
            label[p] += w;
        }
        for pair in pins.windows(2) {
            label[lca.lca(pair[0], pair[1])] -= w;
        }
        // the first and last pins in preorder span every pin
        label[lca.lca(pins[0], pins[pins.len() - 1])] -= w;
    }

    let mut edge_cut_weight = vec![0u64; n.saturating_sub(1)];
    let mut subtree_vertex_weight = vec![0u64; n.saturating_sub(1)];
    let mut below: Vec<u64> = vertex_weights.to_vec();
    for &v in t.preorder().iter().rev() {
        let Some(p) = t.parent(v) else { continue };
        let e = t.parent_edge(v).unwrap();
        edge_cut_weight[e] = u64::try_from(label[v]).expect("subtree sums are cut weights");
        subtree_vertex_weight[e] = below[v];
        label[p] += label[v];
        below[p] += below[v];
    }
    Ok(DistilledTree {
        tree: t.clone(),
        edge_cut_weight,
        subtree_vertex_weight,
        total_vertex_weight: vertex_weights.iter().sum(),
    })
}

/// Distills every tree in parallel, preserving order.
pub fn distill_all(h: &Hypergraph, trees: &[Tree]) -> Result<Vec<DistilledTree>> {
    trees.par_iter().map(|t| distill(h, t)).collect()
}
