//! Spanning trees over the embedding: one path per embedding column, and for
//! every nonempty subset of columns a low-stretch tree and a minimum spanning
//! tree of the sparsifier reweighted by embedding distance.

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::hgmodel::Hypergraph;
use crate::operators::{build_sparsifier, SparseGraph};

/// Spanning tree, rooted for traversal purposes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    n: usize,
    root: usize,
    edges: Vec<(usize, usize)>,
    /// `usize::MAX` at the root.
    parent: Vec<usize>,
    /// Index of the edge to the parent; `usize::MAX` at the root.
    parent_edge: Vec<usize>,
    preorder: Vec<usize>,
    depth: Vec<usize>,
}

impl Tree {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::with_root(n_vertices, edges, 0)
    }

    /// Validates that `edges` form a spanning tree and roots it.
    pub fn with_root(n_vertices: usize, edges: Vec<(usize, usize)>, root: usize) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if n_vertices == 0 {
            return bad("tree needs a vertex".into());
        }
        if root >= n_vertices {
            return bad(format!("root {root} out of range"));
        }
        if edges.len() + 1 != n_vertices {
            return bad(format!(
                "{} edges cannot span {n_vertices} vertices",
                edges.len()
            ));
        }
        let mut adj = vec![Vec::new(); n_vertices];
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= n_vertices || v >= n_vertices || u == v {
                return bad(format!("bad tree edge ({u}, {v})"));
            }
            adj[u].push((v, i));
            adj[v].push((u, i));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let mut parent = vec![usize::MAX; n_vertices];
        let mut parent_edge = vec![usize::MAX; n_vertices];
        let mut depth = vec![0; n_vertices];
        let mut seen = vec![false; n_vertices];
        let mut preorder = Vec::with_capacity(n_vertices);
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(u) = stack.pop() {
            preorder.push(u);
            for &(v, e) in adj[u].iter().rev() {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u;
                    parent_edge[v] = e;
                    depth[v] = depth[u] + 1;
                    stack.push(v);
                }
            }
        }
        if preorder.len() != n_vertices {
            return bad("tree edges do not connect all vertices".into());
        }
        Ok(Self {
            n: n_vertices,
            root,
            edges,
            parent,
            parent_edge,
            preorder,
            depth,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v != self.root).then(|| self.parent[v])
    }

    pub fn parent_edge(&self, v: usize) -> Option<usize> {
        (v != self.root).then(|| self.parent_edge[v])
    }

    /// The endpoint of edge `e` farther from the root.
    pub fn child_of_edge(&self, e: usize) -> usize {
        let (u, v) = self.edges[e];
        if self.parent[v] == u && self.parent_edge[v] == e {
            v
        } else {
            u
        }
    }

    /// Depth-first preorder from the root; children in ascending vertex order.
    pub fn preorder(&self) -> &[usize] {
        &self.preorder
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    /// Vertices in the subtree hanging below edge `e` (including its child).
    pub fn side_below(&self, e: usize) -> Vec<bool> {
        let c = self.child_of_edge(e);
        let mut below = vec![false; self.n];
        below[c] = true;
        for &v in &self.preorder {
            if v != c && v != self.root && below[self.parent[v]] {
                below[v] = true;
            }
        }
        below
    }

    /// Mean over `g`'s edges of `dist_T(u, v) / w_uv`, where each tree edge
    /// is as long as the lightest edge of `g` joining its endpoints (1 if
    /// none). Zero-weight edges count their tree distance unscaled.
    pub fn average_stretch(&self, g: &SparseGraph) -> f64 {
        if g.n_edges() == 0 {
            return 0.0;
        }
        let mut lightest = std::collections::HashMap::new();
        for &(u, v, w) in g.edges() {
            let slot = lightest.entry((u.min(v), u.max(v))).or_insert(f64::INFINITY);
            *slot = f64::min(*slot, w);
        }
        let up_len = |v: usize| {
            let p = self.parent[v];
            match lightest.get(&(v.min(p), v.max(p))) {
                Some(&w) => w,
                None => 1.0,
            }
        };
        let total: f64 = g
            .edges()
            .iter()
            .map(|&(mut u, mut v, w)| {
                let mut d = 0.0;
                while u != v {
                    if self.depth[u] >= self.depth[v] {
                        d += up_len(u);
                        u = self.parent[u];
                    } else {
                        d += up_len(v);
                        v = self.parent[v];
                    }
                }
                if w > 0.0 {
                    d / w
                } else {
                    d
                }
            })
            .sum();
        total / g.n_edges() as f64
    }
}

/// Path through the vertices sorted by value, ties by index.
pub fn path_graph(x_col: &[f64]) -> Result<Tree> {
    let mut order: Vec<usize> = (0..x_col.len()).collect();
    order.sort_by(|&a, &b| x_col[a].total_cmp(&x_col[b]).then(a.cmp(&b)));
    let edges = order.windows(2).map(|w| (w[0], w[1])).collect();
    Tree::new(x_col.len(), edges)
}

/// Same topology as `g` with weights replaced by Euclidean distances between
/// embedding rows. Parallel edges collapse to their first occurrence.
pub fn embedding_weighted_graph(g: &SparseGraph, y: &Embedding) -> Result<SparseGraph> {
    if y.n_vertices() != g.n_vertices() {
        return Err(Error::InvalidArgument("embedding row count differs".into()));
    }
    let m = y.matrix();
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(g.n_edges());
    for &(u, v, _) in g.edges() {
        if seen.insert((u.min(v), u.max(v))) {
            let d = (m.row(u) - m.row(v)).norm();
            edges.push((u, v, d));
        }
    }
    SparseGraph::new(g.n_vertices(), edges)
}

/// Kruskal with ties broken by `(weight, min endpoint, max endpoint)`.
pub fn mst_kruskal(g: &SparseGraph) -> Result<Tree> {
    let n = g.n_vertices();
    let mut order: Vec<(f64, usize, usize)> = g
        .edges()
        .iter()
        .map(|&(u, v, w)| (w, u.min(v), u.max(v)))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut uf = UnionFind::<usize>::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (_, u, v) in order {
        if uf.union(u, v) {
            tree.push((u, v));
        }
    }
    if tree.len() + 1 != n {
        return Err(Error::Disconnected {
            components: n - tree.len(),
        });
    }
    Tree::new(n, tree)
}

/// Low-stretch spanning tree in the style of Alon–Karp–Peleg–West.
///
/// Edges are bucketed by `⌊log₂(w / w_min)⌋`. Round `j` considers the edges of
/// classes up to `j` between current clusters and grows breadth-first balls
/// from unclaimed clusters, scanned in `vertex_order`; a ball stops growing
/// once `x · boundary ≤ internal + size` with `x = log₂ n + 1`. Breadth-first
/// discovery edges join the tree and every ball is contracted.
pub fn lsst_akpw(g: &SparseGraph, vertex_order: &[usize]) -> Result<Tree> {
    let n = g.n_vertices();
    let mut rank = vec![usize::MAX; n];
    for (i, &v) in vertex_order.iter().enumerate() {
        if v >= n || rank[v] != usize::MAX {
            return Err(Error::InvalidArgument("vertex_order is not a permutation".into()));
        }
        rank[v] = i;
    }
    if vertex_order.len() != n {
        return Err(Error::InvalidArgument("vertex_order is not a permutation".into()));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected {
            components: g.n_components(),
        });
    }
    let edges = g.edges();
    let w_min = edges
        .iter()
        .map(|e| e.2)
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    let class: Vec<u32> = edges
        .iter()
        .map(|&(_, _, w)| {
            if w > 0.0 && w_min.is_finite() {
                (w / w_min).log2().floor().clamp(0.0, 63.0) as u32
            } else {
                0
            }
        })
        .collect();
    let max_class = class.iter().copied().max().unwrap_or(0);
    let x = (n.max(2) as f64).log2() + 1.0;

    let mut uf = UnionFind::<usize>::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    let mut j = 0u32;
    while tree.len() + 1 < n {
        // cluster graph over classes ≤ j
        let mut cid = vec![usize::MAX; n];
        let mut reps: Vec<usize> = Vec::new();
        let mut members_rank: Vec<usize> = Vec::new();
        for v in 0..n {
            let r = uf.find(v);
            if cid[r] == usize::MAX {
                cid[r] = reps.len();
                reps.push(r);
                members_rank.push(rank[v]);
            } else {
                let c = cid[r];
                members_rank[c] = members_rank[c].min(rank[v]);
            }
        }
        let nc = reps.len();
        let cluster = |v: usize, uf: &mut UnionFind<usize>| cid[uf.find(v)];
        let mut adj: Vec<Vec<(f64, usize, usize)>> = vec![Vec::new(); nc];
        for (i, &(u, v, w)) in edges.iter().enumerate() {
            if class[i] > j {
                continue;
            }
            let (a, b) = (cluster(u, &mut uf), cluster(v, &mut uf));
            if a != b {
                adj[a].push((w, b, i));
                adj[b].push((w, a, i));
            }
        }
        for a in &mut adj {
            a.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.2.cmp(&q.2)));
        }
        let mut scan: Vec<usize> = (0..nc).collect();
        scan.sort_by_key(|&c| members_rank[c]);

        let mut owner = vec![usize::MAX; nc];
        let mut joins: Vec<usize> = Vec::new();
        for &start in &scan {
            if owner[start] != usize::MAX {
                continue;
            }
            owner[start] = start;
            let mut ball = vec![start];
            let mut frontier = vec![start];
            let mut internal = 0usize;
            loop {
                let boundary: usize = ball
                    .iter()
                    .flat_map(|&c| adj[c].iter())
                    .filter(|&&(_, d, _)| owner[d] == usize::MAX)
                    .count();
                if x * boundary as f64 <= (internal + ball.len()) as f64 || frontier.is_empty() {
                    break;
                }
                let mut next = Vec::new();
                for &c in &frontier {
                    for &(_, d, e) in &adj[c] {
                        if owner[d] == usize::MAX {
                            owner[d] = start;
                            joins.push(e);
                            next.push(d);
                        }
                    }
                }
                ball.extend_from_slice(&next);
                internal = ball
                    .iter()
                    .flat_map(|&c| adj[c].iter())
                    .filter(|&&(_, d, _)| owner[d] == start)
                    .count()
                    / 2;
                frontier = next;
            }
        }
        for e in joins {
            let (u, v, _) = edges[e];
            if uf.union(u, v) {
                tree.push((u, v));
            }
        }
        j = (j + 1).min(max_class);
    }
    Tree::new(n, tree)
}

/// `2(2^m − 1) + m` for an `m`-column embedding.
pub fn family_size(m: usize) -> usize {
    2 * ((1usize << m) - 1) + m
}

/// Builds the sparsifier of `h` and the tree family on top of it.
pub fn tree_family(h: &Hypergraph, x: &Embedding, zeta: usize, seed: u64) -> Result<Vec<Tree>> {
    let g = build_sparsifier(h, zeta, seed)?;
    tree_family_on(&g, x)
}

/// Paths for each column, then for each column subset (in increasing
/// bitmask order) the low-stretch tree followed by the MST of `g` reweighted
/// by distances in that subset. The low-stretch scan order sorts vertices by
/// the first column.
pub fn tree_family_on(g: &SparseGraph, x: &Embedding) -> Result<Vec<Tree>> {
    let m = x.dim();
    if m == 0 || m >= usize::BITS as usize - 1 {
        return Err(Error::InvalidArgument(format!("unsupported embedding width {m}")));
    }
    let first = x.column(0);
    let mut order: Vec<usize> = (0..first.len()).collect();
    order.sort_by(|&a, &b| first[a].total_cmp(&first[b]).then(a.cmp(&b)));

    let mut trees: Vec<Tree> = (0..m)
        .map(|j| path_graph(&x.column(j)))
        .collect::<Result<_>>()?;
    let subset_trees: Vec<Vec<Tree>> = (1usize..1 << m)
        .into_par_iter()
        .map(|mask| {
            let cols: Vec<usize> = (0..m).filter(|&j| mask >> j & 1 == 1).collect();
            let gy = embedding_weighted_graph(g, &x.select_columns(&cols))?;
            Ok(vec![lsst_akpw(&gy, &order)?, mst_kruskal(&gy)?])
        })
        .collect::<Result<_>>()?;
    trees.extend(subset_trees.into_iter().flatten());
    Ok(trees)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn edge_set(t: &Tree) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = t.edges().iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        e.sort();
        e
    }

    #[test]
    fn tree_validation() {
        assert!(Tree::new(3, vec![(0, 1), (1, 2)]).is_ok());
        assert!(Tree::new(3, vec![(0, 1)]).is_err());
        assert!(Tree::new(4, vec![(0, 1), (1, 0), (2, 3)]).is_err());
        let t = Tree::new(4, vec![(0, 1), (1, 2), (1, 3)]).unwrap();
        assert_eq!(t.preorder(), &[0, 1, 2, 3]);
        assert_eq!(t.parent(3), Some(1));
        assert_eq!(t.child_of_edge(0), 1);
        assert_eq!(t.side_below(0), vec![false, true, true, true]);
    }

    #[test]
    fn path_examples() {
        let t = path_graph(&[0.3, -1.0, 2.0, 0.0]).unwrap();
        assert_eq!(t.edges(), &[(1, 3), (3, 0), (0, 2)]);
        let t = path_graph(&[1.0; 5]).unwrap();
        assert_eq!(t.edges(), &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(path_graph(&[5.0, 1.0]).unwrap().edges(), &[(1, 0)]);
    }

    #[test]
    fn reweighting_examples() {
        let g = SparseGraph::new(3, vec![(0, 2, 7.0), (2, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let y = Embedding::new(DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 3.0])).unwrap();
        let gy = embedding_weighted_graph(&g, &y).unwrap();
        assert_eq!(gy.edges(), &[(0, 2, 3.0), (0, 1, 1.0)]);
        let y2 = Embedding::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0])).unwrap();
        let g2 = SparseGraph::new(2, vec![(0, 1, 1.0)]).unwrap();
        assert_eq!(embedding_weighted_graph(&g2, &y2).unwrap().edges()[0].2, 5.0);
        let same = Embedding::new(DMatrix::from_element(3, 2, 1.5)).unwrap();
        assert!(embedding_weighted_graph(&g, &same)
            .unwrap()
            .edges()
            .iter()
            .all(|e| e.2 == 0.0));
    }

    #[test]
    fn kruskal_examples() {
        let tri = SparseGraph::new(3, vec![(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)]).unwrap();
        assert_eq!(edge_set(&mst_kruskal(&tri).unwrap()), vec![(0, 1), (1, 2)]);
        let mut k4 = Vec::new();
        for u in 0..4 {
            for v in u + 1..4 {
                k4.push((v, u, 1.0));
            }
        }
        let k4 = SparseGraph::new(4, k4).unwrap();
        assert_eq!(edge_set(&mst_kruskal(&k4).unwrap()), vec![(0, 1), (0, 2), (0, 3)]);
        let split = SparseGraph::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(mst_kruskal(&split).is_err());
    }

    #[test]
    fn akpw_examples() {
        let path = SparseGraph::new(4, vec![(0, 1, 1.0), (1, 2, 5.0), (2, 3, 0.5)]).unwrap();
        let t = lsst_akpw(&path, &[0, 1, 2, 3]).unwrap();
        assert_eq!(edge_set(&t), vec![(0, 1), (1, 2), (2, 3)]);
        let c6 = SparseGraph::new(6, (0..6).map(|i| (i, (i + 1) % 6, 1.0)).collect()).unwrap();
        let t = lsst_akpw(&c6, &[3, 1, 0, 2, 5, 4]).unwrap();
        assert_eq!(t.edges().len(), 5);
        let split = SparseGraph::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(lsst_akpw(&split, &[0, 1, 2, 3]).is_err());
        assert!(lsst_akpw(&path, &[0, 1, 1, 3]).is_err());
    }

    #[test]
    fn family_sizes() {
        assert_eq!((family_size(1), family_size(2), family_size(3)), (3, 8, 17));
        let n = 12;
        let mut edges: Vec<Vec<usize>> = (0..n - 1).map(|i| vec![i, i + 1]).collect();
        edges.push(vec![0, 5, 9]);
        let h = Hypergraph::unit(n, &edges).unwrap();
        for m in 1..=3 {
            let x = Embedding::new(DMatrix::from_fn(n, m, |i, j| ((i * 7 + j * 3) % 5) as f64))
                .unwrap();
            let fam = tree_family(&h, &x, 2, 1).unwrap();
            assert_eq!(fam.len(), family_size(m));
            assert_eq!(fam, tree_family(&h, &x, 2, 1).unwrap());
        }
    }
}
