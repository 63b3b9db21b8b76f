mod common;

use common::*;
use kspecpart::driver::bridge_components;
use kspecpart::eigen::{solve_generalized, EigenOptions, IdentityPreconditioner};
use kspecpart::embed::{default_preconditioner, k_way_embedding, lda_reduce, two_way_embedding, Embedding};
use kspecpart::operators::{CliqueLaplacian, HintLaplacian, SumOperator, WeightBalanceLaplacian};
use kspecpart::{Hypergraph, Partition};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn pencil_shape(n: usize, edges: usize) -> Shape {
    Shape {
        n,
        edges,
        max_pins: 5,
        min_vw: 1,
        max_vw: 4,
        max_ew: 5,
        connected: true,
    }
}

#[test]
fn lobpcg_matches_dense_pencils() {
    for seed in 0..8u64 {
        let mut r = rng(100 + seed);
        let n = r.random_range(5..=40);
        let e = r.random_range(n..=80);
        let h = random_hypergraph(&mut r, pencil_shape(n, e));
        let hint = random_partition(&mut r, n, 2);
        let a = CliqueLaplacian::new(&h);
        let wb = WeightBalanceLaplacian::new(h.vertex_weights()).unwrap();
        let hl = HintLaplacian::new(&hint).unwrap();
        let b = SumOperator::new(vec![&wb, &hl]);
        let m = 2.min(n - 2);
        let pc = default_preconditioner(&h, 2, seed).unwrap();
        let opts = EigenOptions {
            seed,
            ..Default::default()
        };
        let res = solve_generalized(&a, &b, m, pc.as_ref(), &opts).unwrap();
        let dense = dense_generalized_eigenvalues(
            &dense_clique(&h),
            &(dense_weight_balance(h.vertex_weights()) + dense_hint(&hint)),
        );
        assert!(res.converged);
        for i in 0..m {
            let rel = (res.eigenvalues[i] - dense[i]).abs() / dense[i].abs();
            assert!(rel <= 1e-5, "seed {seed} pair {i}: {} vs {}", res.eigenvalues[i], dense[i]);
            assert!(res.residuals[i] <= 1e-6);
        }

        // B-orthonormal columns, orthogonal to the all-ones vector
        let bd = dense_weight_balance(h.vertex_weights()) + dense_hint(&hint);
        let x = &res.eigenvectors;
        let gram = x.transpose() * &bd * x;
        assert!((gram - DMatrix::identity(m, m)).abs().max() <= 1e-6);
        for j in 0..m {
            assert!(x.column(j).sum().abs() <= 1e-8 * n as f64);
        }
    }
}

#[test]
fn preconditioner_does_not_change_the_answer() {
    let mut r = rng(55);
    let h = random_hypergraph(&mut r, pencil_shape(30, 60));
    let hint = random_partition(&mut r, 30, 2);
    let a = CliqueLaplacian::new(&h);
    let wb = WeightBalanceLaplacian::new(h.vertex_weights()).unwrap();
    let hl = HintLaplacian::new(&hint).unwrap();
    let b = SumOperator::new(vec![&wb, &hl]);
    let opts = EigenOptions {
        max_iter: 1000,
        ..Default::default()
    };
    let pc = default_preconditioner(&h, 2, 0).unwrap();
    let with = solve_generalized(&a, &b, 2, pc.as_ref(), &opts).unwrap();
    let without = solve_generalized(&a, &b, 2, &IdentityPreconditioner(30), &opts).unwrap();
    for i in 0..2 {
        let rel = (with.eigenvalues[i] - without.eigenvalues[i]).abs() / with.eigenvalues[i];
        assert!(rel <= 1e-5);
    }
}

fn cliques(count: usize, size: usize) -> Hypergraph {
    let mut edges = Vec::new();
    for c in 0..count {
        for u in 0..size {
            for v in u + 1..size {
                edges.push(vec![c * size + u, c * size + v]);
            }
        }
    }
    Hypergraph::unit(count * size, &edges).unwrap()
}

#[test]
fn bridged_cliques_split_by_first_eigenvector() {
    let (h, added) = bridge_components(&cliques(2, 6)).unwrap();
    assert_eq!(added, 1);
    let hint = Partition::new((0..12).map(|v| v / 6).collect(), 2).unwrap();
    let x = two_way_embedding(&h, &hint, 1, 9).unwrap().column(0);
    assert!(x[..6].iter().all(|&a| a * x[0] > 0.0));
    assert!(x[6..].iter().all(|&a| a * x[0] < 0.0));
}

#[test]
fn four_cliques_form_four_groups() {
    let (h, _) = bridge_components(&cliques(4, 5)).unwrap();
    let hint = Partition::new((0..20).map(|v| v / 5).collect(), 4).unwrap();
    let y = k_way_embedding(&h, &hint, 2, 4).unwrap();
    assert_eq!(y.dim(), 2);
    let pt = |v: usize| DVector::from_vec(vec![y.matrix()[(v, 0)], y.matrix()[(v, 1)]]);
    let centroid = |g: usize| (0..5).map(|i| pt(g * 5 + i)).sum::<DVector<f64>>() / 5.0;
    let cs: Vec<_> = (0..4).map(centroid).collect();
    let radius = (0..20)
        .map(|v| (pt(v) - &cs[v / 5]).norm())
        .fold(0.0, f64::max);
    for a in 0..4 {
        for b in a + 1..4 {
            assert!((&cs[a] - &cs[b]).norm() > radius, "groups {a},{b}");
        }
    }
}

#[test]
fn lda_two_class_direction_is_closed_form() {
    let mut r = rng(21);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (class, mx) in [(0usize, 0.0), (1, 10.0)] {
        // symmetric cross of offsets keeps the within-class scatter isotropic
        for _ in 0..25 {
            for (dx, dy) in [(0.3, 0.0), (-0.3, 0.0), (0.0, 0.3), (0.0, -0.3)] {
                let jitter = |r: &mut rand_chacha::ChaCha8Rng| r.random_range(-1e-7..1e-7);
                rows.push([mx + dx + jitter(&mut r), dy + jitter(&mut r)]);
                labels.push(class);
            }
        }
    }
    let n = rows.len();
    let x = DMatrix::from_fn(n, 2, |i, j| rows[i][j]);
    let s = Partition::new(labels, 2).unwrap();
    let y = lda_reduce(&Embedding::new(x.clone()).unwrap(), &s, 1).unwrap();

    // recover the projection direction by least squares on [x, 1]
    let design = DMatrix::from_fn(n, 3, |i, j| if j < 2 { x[(i, j)] } else { 1.0 });
    let coef = design
        .svd(true, true)
        .solve(&DVector::from_column_slice(y.matrix().column(0).as_slice()), 1e-12)
        .unwrap();
    let angle = coef[1].atan2(coef[0]).abs();
    let angle = angle.min(std::f64::consts::PI - angle);
    assert!(angle <= 1e-3, "angle {angle}");
}
