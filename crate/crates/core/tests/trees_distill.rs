mod common;

use common::*;
use kspecpart::distill::{distill, Lca};
use kspecpart::embed::Embedding;
use kspecpart::operators::SparseGraph;
use kspecpart::treepart::{balanced_recursive_kway, sweep_bipartition, vile_kway};
use kspecpart::trees::{family_size, lsst_akpw, mst_kruskal, path_graph, tree_family, Tree};
use kspecpart::Hypergraph;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_graph(r: &mut ChaCha8Rng, n: usize, extra: usize) -> SparseGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((r.random_range(0..v), v, r.random_range(1..=20) as f64));
    }
    for _ in 0..extra {
        let u = r.random_range(0..n);
        let v = (u + r.random_range(1..n)) % n;
        edges.push((u, v, r.random_range(1..=20) as f64));
    }
    SparseGraph::new(n, edges).unwrap()
}

fn tree_weight(g: &SparseGraph, t: &Tree) -> f64 {
    t.edges()
        .iter()
        .map(|&(u, v)| {
            g.edges()
                .iter()
                .filter(|e| (e.0, e.1) == (u, v) || (e.0, e.1) == (v, u))
                .map(|e| e.2)
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

fn subsets(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..m {
            cur.push(i);
            go(i + 1, m, k, cur, f);
            cur.pop();
        }
    }
    go(0, m, k, &mut Vec::new(), f);
}

#[test]
fn kruskal_matches_exhaustive_minimum() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 8, 7);
        let t = mst_kruskal(&g).unwrap();
        assert!(is_spanning_tree(8, t.edges()));
        let mut best = f64::INFINITY;
        let es = g.edges();
        subsets(es.len(), 7, &mut |idx| {
            let pairs: Vec<(usize, usize)> = idx.iter().map(|&i| (es[i].0, es[i].1)).collect();
            if is_spanning_tree(8, &pairs) {
                best = best.min(idx.iter().map(|&i| es[i].2).sum());
            }
        });
        assert_eq!(tree_weight(&g, &t), best, "seed {seed}");
    }
}

/// Uniform spanning tree by Wilson's algorithm.
fn wilson(r: &mut ChaCha8Rng, g: &SparseGraph) -> Tree {
    let n = g.n_vertices();
    let adj = g.adjacency();
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    in_tree[0] = true;
    for start in 1..n {
        let mut u = start;
        while !in_tree[u] {
            // unweighted walk: uniform over spanning trees of the simple graph
            let (v, _, _) = adj[u][r.random_range(0..adj[u].len())];
            next[u] = v;
            u = v;
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    Tree::new(n, (1..n).map(|v| (v, next[v])).collect()).unwrap()
}

#[test]
fn low_stretch_tree_beats_random_spanning_trees() {
    let mut wins = 0;
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let g = random_graph(&mut r, 10, 15);
        let mut order: Vec<usize> = (0..10).collect();
        order.shuffle(&mut r);
        let t = lsst_akpw(&g, &order).unwrap();
        assert!(is_spanning_tree(10, t.edges()));
        let samples = 200;
        let random_mean: f64 =
            (0..samples).map(|_| wilson(&mut r, &g).average_stretch(&g)).sum::<f64>() / samples as f64;
        if t.average_stretch(&g) <= random_mean {
            wins += 1;
        }
    }
    assert_eq!(wins, 20);
}

#[test]
fn family_sizes() {
    assert_eq!([1, 2, 3].map(family_size), [3, 8, 17]);
    let mut r = rng(4);
    let h = random_hypergraph(&mut r, Shape { connected: true, ..Shape::unit(20, 40) });
    for m in 1..=3 {
        let x = Embedding::new(DMatrix::from_fn(20, m, |_, _| r.random_range(-1.0..1.0))).unwrap();
        let family = tree_family(&h, &x, 2, 1).unwrap();
        assert_eq!(family.len(), family_size(m));
        assert!(family.iter().all(|t| is_spanning_tree(20, t.edges())));
    }
}

fn naive_lca(t: &Tree, mut u: usize, mut v: usize) -> usize {
    while t.depth(u) > t.depth(v) {
        u = t.parent(u).unwrap();
    }
    while t.depth(v) > t.depth(u) {
        v = t.parent(v).unwrap();
    }
    while u != v {
        u = t.parent(u).unwrap();
        v = t.parent(v).unwrap();
    }
    u
}

fn check_distilled(h: &Hypergraph, t: &Tree) {
    let dt = distill(h, t).unwrap();
    for (e, _) in t.edges().iter().enumerate() {
        let side = split_tree(h.n_vertices(), t.edges(), e, t.root());
        assert_eq!(dt.edge_cut_weight[e], cut_of_side(h, &side), "edge {e}");
        let below: u64 = (0..h.n_vertices()).filter(|&v| side[v]).map(|v| h.vertex_weight(v)).sum();
        assert_eq!(dt.subtree_vertex_weight[e], below);
    }
}

#[test]
fn distilled_weights_are_exact_cuts() {
    for seed in 0..15 {
        let mut r = rng(500 + seed);
        let n = r.random_range(3..=120);
        let shape = Shape {
            max_pins: 8,
            max_vw: 3,
            max_ew: 4,
            connected: true,
            ..Shape::unit(n, 2 * n)
        };
        let h = random_hypergraph(&mut r, shape);
        let x = Embedding::new(DMatrix::from_fn(n, 2, |_, _| r.random_range(-1.0..1.0))).unwrap();
        for t in tree_family(&h, &x, 2, seed).unwrap() {
            check_distilled(&h, &t);
        }
    }
}

#[test]
fn lca_matches_parent_walk() {
    let mut r = rng(8);
    let g = random_graph(&mut r, 60, 0);
    let t = mst_kruskal(&g).unwrap();
    let lca = Lca::new(&t);
    for _ in 0..500 {
        let (u, v) = (r.random_range(0..60), r.random_range(0..60));
        assert_eq!(lca.lca(u, v), naive_lca(&t, u, v));
    }
}

#[test]
fn sweep_is_the_feasible_minimum() {
    for seed in 0..40 {
        let mut r = rng(700 + seed);
        let n = r.random_range(3..=30);
        let h = random_hypergraph(&mut r, Shape { max_vw: 4, ..Shape::unit(n, 2 * n) });
        let vals: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let dt = distill(&h, &path_graph(&vals).unwrap()).unwrap();
        let total = h.total_weight();
        let lo = r.random_range(0..=total / 2);
        let hi = r.random_range(lo..=total);
        let c = sweep_bipartition(&dt, lo, hi).unwrap();
        let feasible: Vec<usize> = (0..n - 1)
            .filter(|&e| (lo..=hi).contains(&dt.subtree_vertex_weight[e]))
            .collect();
        assert_eq!(c.feasible, !feasible.is_empty());
        if c.feasible {
            let best = feasible.iter().map(|&e| dt.edge_cut_weight[e]).min().unwrap();
            assert_eq!(c.cut_weight, best);
            assert!((lo..=hi).contains(&c.below_weight));
        }
        let labels: Vec<usize> = c.below.iter().map(|&b| usize::from(!b)).collect();
        assert_eq!(cut_of_labels(&h, &labels), c.cut_weight);
    }
}

#[test]
fn chained_cliques_are_carved_apart() {
    let mut edges = Vec::new();
    for c in 0..3 {
        for u in 0..4 {
            for v in u + 1..4 {
                edges.push(vec![c * 4 + u, c * 4 + v]);
            }
        }
    }
    let h = Hypergraph::unit(12, &edges).unwrap();
    let vals: Vec<f64> = (0..12).map(|v| v as f64).collect();
    let dt = distill(&h, &path_graph(&vals).unwrap()).unwrap();
    for carving in [vile_kway(&h, &dt, 3, 0.1).unwrap(), balanced_recursive_kway(&h, &dt, 3, 0.1).unwrap()] {
        assert_eq!(cut_of_labels(&h, carving.partition.labels()), 0);
        assert!(!carving.fell_back);
    }
}

#[test]
fn balanced_recursive_carvings_are_balanced() {
    let mut balanced_count = 0;
    for seed in 0..50 {
        let mut r = rng(900 + seed);
        let h = random_hypergraph(&mut r, Shape { connected: true, ..Shape::unit(12, 20) });
        let x = Embedding::new(DMatrix::from_fn(12, 1, |_, _| r.random_range(-1.0..1.0))).unwrap();
        let t = &tree_family(&h, &x, 2, seed).unwrap()[0];
        let c = balanced_recursive_kway(&h, &distill(&h, t).unwrap(), 3, 0.2).unwrap();
        if balanced(&h, c.partition.labels(), 3, 0.2) {
            balanced_count += 1;
        }
    }
    assert_eq!(balanced_count, 50);
}

fn tree_cut(dt_cut: &[u64], t: &Tree, labels: &[usize]) -> u64 {
    t.edges()
        .iter()
        .enumerate()
        .filter(|(_, &(u, v))| labels[u] != labels[v])
        .map(|(e, _)| dt_cut[e])
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_cut_bounds_hypergraph_cut(seed in any::<u64>(), n in 3usize..60, k in 2usize..5) {
        let mut r = rng(seed);
        let h = random_hypergraph(&mut r, Shape { max_pins: 6, connected: true, ..Shape::unit(n, 2 * n) });
        let vals: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let x = Embedding::new(DMatrix::from_column_slice(n, 1, &vals)).unwrap();
        let trees = tree_family(&h, &x, 1, seed).unwrap();
        let t = &trees[r.random_range(0..trees.len())];
        let dt = distill(&h, t).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        prop_assert!(cut_of_labels(&h, &labels) <= tree_cut(&dt.edge_cut_weight, t, &labels));
    }

    #[test]
    fn every_family_tree_distills_exactly(seed in any::<u64>(), n in 2usize..40) {
        let mut r = rng(seed);
        let h = random_hypergraph(&mut r, Shape { max_pins: 5, max_ew: 3, connected: true, ..Shape::unit(n, n + 3) });
        let x = Embedding::new(DMatrix::from_fn(n, 2, |_, _| r.random_range(-1.0..1.0))).unwrap();
        for t in tree_family(&h, &x, 2, seed).unwrap() {
            check_distilled(&h, &t);
        }
    }
}
