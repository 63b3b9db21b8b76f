use super::{cutsize, BalanceBounds, Hypergraph, Partition};
use crate::error::{Error, Result};

const MAX_ASSIGNMENTS: f64 = 1e8;

/// Exhaustive minimum-cutsize ε-balanced partition.
///
/// Enumerates every assignment up to block relabeling (blocks are opened in
/// ascending order, so vertex 0 is always in block 0) and evaluates each leaf
/// from scratch. Meant as a test oracle for tiny instances: `k^n` must not
/// exceed 1e8.
pub fn brute_force_optimal(h: &Hypergraph, k: usize, eps: f64) -> Result<Partition> {
    let n = h.n_vertices();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if (k as f64).powi(n as i32) > MAX_ASSIGNMENTS {
        return Err(Error::InvalidArgument(format!(
            "{k}^{n} assignments exceed the brute-force guard"
        )));
    }
    let bounds = BalanceBounds::for_hypergraph(h, k, eps);
    let mut search = Enumerate {
        h,
        k,
        bounds,
        labels: vec![0; n],
        best: None,
    };
    search.descend(0, 0);
    search
        .best
        .map(|(_, labels)| Partition::new(labels, k).expect("labels below k"))
        .ok_or_else(|| Error::Infeasible(format!("k = {k}, eps = {eps}")))
}

struct Enumerate<'a> {
    h: &'a Hypergraph,
    k: usize,
    bounds: BalanceBounds,
    labels: Vec<usize>,
    best: Option<(u64, Vec<usize>)>,
}

impl Enumerate<'_> {
    fn descend(&mut self, v: usize, used: usize) {
        if v == self.labels.len() {
            self.leaf();
            return;
        }
        let open = (used + 1).min(self.k);
        for b in 0..open {
            self.labels[v] = b;
            self.descend(v + 1, used.max(b + 1));
        }
    }

    fn leaf(&mut self) {
        let s = Partition {
            labels: self.labels.clone(),
            k: self.k,
        };
        if !s.block_weights(self.h).iter().all(|&w| self.bounds.contains(w)) {
            return;
        }
        let cut = cutsize(self.h, &s);
        if self.best.as_ref().is_none_or(|(c, _)| cut < *c) {
            self.best = Some((cut, s.labels));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgmodel::is_balanced;

    fn h0() -> Hypergraph {
        Hypergraph::unit(4, &[vec![0, 1, 2], vec![1, 2, 3], vec![0, 3]]).unwrap()
    }

    #[test]
    fn h0_bisection() {
        let s = brute_force_optimal(&h0(), 2, 0.0).unwrap();
        assert_eq!(cutsize(&h0(), &s), 2);
        assert_eq!(s.labels(), &[0, 1, 1, 0]);
    }

    #[test]
    fn disjoint_triangles() {
        let h = Hypergraph::unit(6, &[vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let s = brute_force_optimal(&h, 2, 0.0).unwrap();
        assert_eq!(cutsize(&h, &s), 0);
    }

    #[test]
    fn forced_singletons() {
        let s = brute_force_optimal(&h0(), 4, 0.0).unwrap();
        assert_eq!(cutsize(&h0(), &s), 3);
        assert_eq!(s.block_sizes(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn infeasible_and_guard() {
        let h = Hypergraph::new(vec![3, 1], [(vec![0, 1], 1)]).unwrap();
        assert!(matches!(
            brute_force_optimal(&h, 2, 0.0),
            Err(Error::Infeasible(_))
        ));
        let big = Hypergraph::unit(30, &[vec![0, 1]]).unwrap();
        assert!(matches!(
            brute_force_optimal(&big, 2, 0.1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn result_is_balanced_and_minimal() {
        let h = Hypergraph::new(
            vec![2, 1, 1, 3, 1, 2],
            [
                (vec![0, 1], 2),
                (vec![1, 2, 3], 1),
                (vec![3, 4], 3),
                (vec![4, 5, 0], 1),
                (vec![2, 5], 2),
            ],
        )
        .unwrap();
        let s = brute_force_optimal(&h, 3, 0.2).unwrap();
        assert!(is_balanced(&h, &s, 0.2));
        let best = cutsize(&h, &s);
        // every raw assignment, no symmetry breaking
        for code in 0..3usize.pow(6) {
            let labels: Vec<usize> = (0..6).map(|i| code / 3usize.pow(i) % 3).collect();
            let p = Partition::new(labels, 3).unwrap();
            if is_balanced(&h, &p, 0.2) {
                assert!(cutsize(&h, &p) >= best);
            }
        }
    }
}
