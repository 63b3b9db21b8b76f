//! K-way Fiduccia–Mattheyses refinement with balance repair, and a
//! multi-start greedy + FM partitioner used to generate hints.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hgmodel::{balance_violation, cutsize, BalanceBounds, Hypergraph, Partition};

#[derive(Debug, Clone, Copy)]
pub struct FmConfig {
    pub max_passes: usize,
    /// Lets an imbalanced start make violation-reducing moves regardless of
    /// gain. Without it a move may never take its source below the lower
    /// bound or its destination above the upper bound.
    pub allow_illegal_start: bool,
}

impl Default for FmConfig {
    fn default() -> Self {
        Self {
            max_passes: 10,
            allow_illegal_start: true,
        }
    }
}

/// Bucket entries considered per (source, destination) pair when the best
/// ones are blocked by vertex weight.
const SCAN_LIMIT: usize = 64;

struct Fm<'a> {
    h: &'a Hypergraph,
    k: usize,
    bounds: BalanceBounds,
    labels: Vec<usize>,
    block_weight: Vec<u64>,
    /// `phi[e * k + b]`: pins of `e` in block `b`.
    phi: Vec<u32>,
    gain: Vec<i64>,
    locked: Vec<bool>,
    /// `buckets[a * k + b]`: unlocked vertices of block `a` keyed for a move to `b`.
    buckets: Vec<BTreeSet<(Reverse<i64>, usize)>>,
    cut: u64,
}

impl<'a> Fm<'a> {
    fn new(h: &'a Hypergraph, s: &Partition, bounds: BalanceBounds) -> Self {
        let k = s.k();
        let mut phi = vec![0u32; h.n_edges() * k];
        for e in 0..h.n_edges() {
            for &v in h.pins(e) {
                phi[e * k + s.block(v)] += 1;
            }
        }
        Self {
            h,
            k,
            bounds,
            labels: s.labels().to_vec(),
            block_weight: s.block_weights(h),
            phi,
            gain: vec![0; h.n_vertices() * k],
            locked: vec![false; h.n_vertices()],
            buckets: vec![BTreeSet::new(); k * k],
            cut: cutsize(h, s),
        }
    }

    fn violation(&self) -> u64 {
        self.block_weight.iter().map(|&w| self.bounds.excess(w)).sum()
    }

    /// Gain of `e` toward moving a pin from block `x` to block `c`.
    fn contribution(&self, e: usize, x: usize, c: usize) -> i64 {
        let size = self.h.pins(e).len() as u32;
        let w = self.h.edge_weight(e) as i64;
        let phi = &self.phi[e * self.k..(e + 1) * self.k];
        w * (i64::from(phi[c] == size - 1) - i64::from(phi[x] == size))
    }

    fn start_pass(&mut self) {
        let (n, k) = (self.h.n_vertices(), self.k);
        self.locked.iter_mut().for_each(|l| *l = false);
        self.buckets.iter_mut().for_each(BTreeSet::clear);
        self.gain.iter_mut().for_each(|g| *g = 0);
        for v in 0..n {
            let a = self.labels[v];
            for &e in self.h.incident_edges(v) {
                for c in (0..k).filter(|&c| c != a) {
                    self.gain[v * k + c] += self.contribution(e, a, c);
                }
            }
            for c in (0..k).filter(|&c| c != a) {
                self.buckets[a * k + c].insert((Reverse(self.gain[v * k + c]), v));
            }
        }
    }

    fn legal(&self, v: usize, a: usize, b: usize, repair: bool) -> bool {
        let w = self.h.vertex_weight(v);
        let (wa, wb) = (self.block_weight[a], self.block_weight[b]);
        let (na, nb) = (wa - w, wb + w);
        if na >= self.bounds.lower && nb <= self.bounds.upper {
            return true;
        }
        repair && {
            let before = self.bounds.excess(wa) + self.bounds.excess(wb);
            let after = self.bounds.excess(na) + self.bounds.excess(nb);
            after < before
        }
    }

    /// Highest-gain legal move, ties by vertex then destination. With
    /// `reducing` only moves that lower the total violation qualify.
    fn best_move(&self, repair: bool, reducing: bool) -> Option<(i64, usize, usize)> {
        let k = self.k;
        let mut best: Option<(i64, usize, usize)> = None;
        for a in 0..k {
            for b in (0..k).filter(|&b| b != a) {
                for &(Reverse(g), v) in self.buckets[a * k + b].iter().take(SCAN_LIMIT) {
                    if let Some((bg, bv, bb)) = best {
                        if (Reverse(g), v, b) >= (Reverse(bg), bv, bb) {
                            break;
                        }
                    }
                    let ok = if reducing {
                        let w = self.h.vertex_weight(v);
                        let (wa, wb) = (self.block_weight[a], self.block_weight[b]);
                        self.bounds.excess(wa - w) + self.bounds.excess(wb + w)
                            < self.bounds.excess(wa) + self.bounds.excess(wb)
                    } else {
                        self.legal(v, a, b, repair)
                    };
                    if ok {
                        best = Some((g, v, b));
                        break;
                    }
                }
            }
        }
        best
    }

    fn set_gain(&mut self, u: usize, c: usize, delta: i64) {
        let k = self.k;
        let a = self.labels[u];
        let old = self.gain[u * k + c];
        self.buckets[a * k + c].remove(&(Reverse(old), u));
        self.gain[u * k + c] = old + delta;
        self.buckets[a * k + c].insert((Reverse(old + delta), u));
    }

    /// Moves `v` to `b`, keeping pin counts, cut, and (when `track`) the
    /// gains of unlocked vertices current.
    fn apply_move(&mut self, v: usize, b: usize, track: bool) {
        let k = self.k;
        let a = self.labels[v];
        let h = self.h;
        for &e in h.incident_edges(v) {
            let size = h.pins(e).len() as u32;
            let (oa, ob) = (self.phi[e * k + a], self.phi[e * k + b]);
            let crosses = |x: u32| x == size || x + 1 == size;
            let touches = track && (crosses(oa) || crosses(oa - 1) || crosses(ob) || crosses(ob + 1));
            let mut before = Vec::new();
            if touches {
                for &u in h.pins(e) {
                    if u != v && !self.locked[u] {
                        let x = self.labels[u];
                        for c in (0..k).filter(|&c| c != x) {
                            before.push(self.contribution(e, x, c));
                        }
                    }
                }
            }
            if oa == size {
                self.cut += h.edge_weight(e);
            }
            if ob + 1 == size {
                self.cut -= h.edge_weight(e);
            }
            self.phi[e * k + a] -= 1;
            self.phi[e * k + b] += 1;
            if touches {
                let mut i = 0;
                for &u in h.pins(e) {
                    if u != v && !self.locked[u] {
                        let x = self.labels[u];
                        for c in (0..k).filter(|&c| c != x) {
                            let delta = self.contribution(e, x, c) - before[i];
                            i += 1;
                            if delta != 0 {
                                self.set_gain(u, c, delta);
                            }
                        }
                    }
                }
            }
        }
        if track {
            for c in (0..k).filter(|&c| c != a) {
                self.buckets[a * k + c].remove(&(Reverse(self.gain[v * k + c]), v));
            }
            self.locked[v] = true;
        }
        let w = h.vertex_weight(v);
        self.block_weight[a] -= w;
        self.block_weight[b] += w;
        self.labels[v] = b;
    }

    /// One pass; returns whether the best prefix improved on the start.
    fn pass(&mut self, cfg: &FmConfig) -> bool {
        self.start_pass();
        let start = (self.violation(), self.cut);
        let mut best = start;
        let mut moves: Vec<(usize, usize)> = Vec::new();
        let mut best_len = 0;
        let n = self.h.n_vertices();
        let patience = (n / 4).max(100);
        let check = cfg!(debug_assertions) && n <= 200;
        loop {
            let viol = self.violation();
            let repair = cfg.allow_illegal_start && viol > 0;
            let mv = if repair {
                self.best_move(true, true)
                    .or_else(|| self.best_move(true, false))
            } else {
                self.best_move(false, false)
            };
            let Some((_, v, b)) = mv else { break };
            let from = self.labels[v];
            self.apply_move(v, b, true);
            moves.push((v, from));
            if check {
                let s = Partition::new(self.labels.clone(), self.k).unwrap();
                debug_assert_eq!(self.cut, cutsize(self.h, &s), "incremental cut drifted");
            }
            let key = (self.violation(), self.cut);
            if key < best {
                best = key;
                best_len = moves.len();
            } else if moves.len() - best_len > patience {
                break;
            }
        }
        while moves.len() > best_len {
            let (v, from) = moves.pop().unwrap();
            self.apply_move(v, from, false);
        }
        best < start
    }
}

/// Refines `s` by FM passes until a pass stops improving `(violation, cut)`
/// or `max_passes` is reached.
pub fn fm_refine(h: &Hypergraph, s: &Partition, eps: f64, cfg: &FmConfig) -> Result<Partition> {
    s.check_for(h)?;
    if s.k() < 2 {
        return Ok(s.clone());
    }
    let bounds = BalanceBounds::for_hypergraph(h, s.k(), eps);
    let mut fm = Fm::new(h, s, bounds);
    for _ in 0..cfg.max_passes.max(1) {
        if !fm.pass(cfg) {
            break;
        }
    }
    Partition::new(fm.labels, s.k())
}

const INIT_ATTEMPTS: usize = 100;

/// Heaviest-first, each vertex into the currently lightest block; ties in
/// both orders are random.
fn greedy_init(h: &Hypergraph, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..h.n_vertices()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&v| Reverse(h.vertex_weight(v)));
    let mut weight = vec![0u64; k];
    let mut labels = vec![0; h.n_vertices()];
    let mut ties = Vec::with_capacity(k);
    for v in order {
        let min = *weight.iter().min().unwrap();
        ties.clear();
        ties.extend((0..k).filter(|&b| weight[b] == min));
        let b = ties[rng.random_range(0..ties.len())];
        labels[v] = b;
        weight[b] += h.vertex_weight(v);
    }
    labels
}

/// Breadth-first region growing: each block grows from a random unassigned
/// vertex until it reaches `W / k`.
fn region_init(h: &Hypergraph, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = h.n_vertices();
    let target = h.total_weight() / k as u64;
    let mut labels = vec![usize::MAX; n];
    let mut unassigned: Vec<usize> = (0..n).collect();
    unassigned.shuffle(rng);
    let mut cursor = 0;
    for b in 0..k - 1 {
        let mut weight = 0u64;
        let mut queue = std::collections::VecDeque::new();
        while weight < target {
            let v = match queue.pop_front() {
                Some(v) => v,
                None => {
                    while cursor < n && labels[unassigned[cursor]] != usize::MAX {
                        cursor += 1;
                    }
                    if cursor == n {
                        break;
                    }
                    unassigned[cursor]
                }
            };
            if labels[v] != usize::MAX {
                continue;
            }
            labels[v] = b;
            weight += h.vertex_weight(v);
            for &e in h.incident_edges(v) {
                queue.extend(h.pins(e).iter().copied().filter(|&u| labels[u] == usize::MAX));
            }
        }
    }
    labels.iter_mut().filter(|l| **l == usize::MAX).for_each(|l| *l = k - 1);
    labels
}

/// Best of `restarts` independent greedy initializations refined by FM,
/// compared by `(violation, cut)`.
pub fn baseline_partitioner(
    h: &Hypergraph,
    k: usize,
    eps: f64,
    restarts: usize,
    seed: u64,
) -> Result<Partition> {
    if k < 2 || restarts == 0 {
        return Err(Error::InvalidArgument("need k ≥ 2 and at least one restart".into()));
    }
    if k > h.n_vertices() {
        return Err(Error::Infeasible(format!(
            "{k} blocks for {} vertices",
            h.n_vertices()
        )));
    }
    let bounds = BalanceBounds::for_hypergraph(h, k, eps);
    let balanced = |labels: &[usize]| {
        let mut w = vec![0u64; k];
        for (v, &b) in labels.iter().enumerate() {
            w[b] += h.vertex_weight(v);
        }
        w.iter().all(|&x| bounds.contains(x))
    };
    let runs: Vec<Result<(u64, u64, Partition)>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, r as u64));
            let mut init = None;
            if r % 2 == 1 {
                let labels = region_init(h, k, &mut rng);
                if balanced(&labels) {
                    init = Some(labels);
                }
            }
            for _ in 0..INIT_ATTEMPTS {
                if init.is_some() {
                    break;
                }
                let labels = greedy_init(h, k, &mut rng);
                if balanced(&labels) {
                    init = Some(labels);
                }
            }
            let labels = init.ok_or_else(|| {
                Error::Infeasible(format!(
                    "no balanced start after {INIT_ATTEMPTS} attempts"
                ))
            })?;
            let s = fm_refine(h, &Partition::new(labels, k)?, eps, &FmConfig::default())?;
            Ok((balance_violation(h, &s, eps), cutsize(h, &s), s))
        })
        .collect();
    let mut best: Option<(u64, u64, Partition)> = None;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| (c.0, c.1) < (b.0, b.1)) {
                    best = Some(c);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, _, s)) => Ok(s),
        None => Err(last_err.unwrap()),
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
    fn single_swap_improves_h0() {
        let s = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        let r = fm_refine(&h0(), &s, 0.25, &FmConfig::default()).unwrap();
        assert_eq!(cutsize(&h0(), &r), 2);
        assert!(is_balanced(&h0(), &r, 0.25));
    }

    #[test]
    fn optimal_input_is_kept() {
        let s = Partition::new(vec![0, 1, 1, 0], 2).unwrap();
        let r = fm_refine(&h0(), &s, 0.25, &FmConfig::default()).unwrap();
        assert_eq!(cutsize(&h0(), &r), 2);
    }

    #[test]
    fn repairs_imbalanced_start() {
        let s = Partition::new(vec![0, 0, 0, 1], 2).unwrap();
        let r = fm_refine(&h0(), &s, 0.25, &FmConfig::default()).unwrap();
        assert!(is_balanced(&h0(), &r, 0.25));
        assert!(cutsize(&h0(), &r) <= 3);

        let strict = FmConfig {
            allow_illegal_start: false,
            ..Default::default()
        };
        let heavy = Partition::new(vec![0, 0, 0, 0], 2).unwrap();
        let r = fm_refine(&h0(), &heavy, 0.0, &strict).unwrap();
        assert!(balance_violation(&h0(), &r, 0.0) <= balance_violation(&h0(), &heavy, 0.0));
    }

    #[test]
    fn weighted_kway_never_worse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = 30;
            let edges: Vec<(Vec<usize>, u64)> = (0..60)
                .map(|_| {
                    let mut p: Vec<usize> = (0..rng.random_range(2..5))
                        .map(|_| rng.random_range(0..n))
                        .collect();
                    p.sort();
                    p.dedup();
                    if p.len() < 2 {
                        p = vec![0, 1];
                    }
                    (p, rng.random_range(1..4))
                })
                .collect();
            let h = Hypergraph::new((0..n).map(|_| rng.random_range(1..3)).collect(), edges)
                .unwrap();
            let k = rng.random_range(2..5);
            let start = baseline_partitioner(&h, k, 0.2, 1, rng.random()).unwrap();
            let r = fm_refine(&h, &start, 0.2, &FmConfig::default()).unwrap();
            assert!(is_balanced(&h, &r, 0.2));
            assert!(cutsize(&h, &r) <= cutsize(&h, &start));
        }
    }

    #[test]
    fn baseline_examples() {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for u in base..base + 4 {
                for v in u + 1..base + 4 {
                    edges.push(vec![u, v]);
                }
            }
        }
        let cliques = Hypergraph::unit(8, &edges).unwrap();
        let s = baseline_partitioner(&cliques, 2, 0.0, 5, 1).unwrap();
        assert_eq!(cutsize(&cliques, &s), 0);
        assert_eq!(cutsize(&h0(), &baseline_partitioner(&h0(), 2, 0.25, 10, 3).unwrap()), 2);
        assert!(matches!(
            baseline_partitioner(&h0(), 5, 0.25, 1, 0),
            Err(Error::Infeasible(_))
        ));
        assert_eq!(
            baseline_partitioner(&cliques, 3, 0.1, 4, 9).unwrap(),
            baseline_partitioner(&cliques, 3, 0.1, 4, 9).unwrap()
        );
    }
}
