//! Cut-overlay ensembling.
//!
//! The union of the cut hyperedges of the best few solutions is removed; the
//! connected pieces left over become clusters. Every selected solution keeps
//! each cluster inside one block, so it survives contraction unchanged, and
//! the (usually small) clustered instance is solved exactly by
//! branch-and-bound before being lifted back and refined.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::hgmodel::{
    balance_violation, contract, cut_edges, cutsize, BalanceBounds, ClusteredHypergraph,
    Hypergraph, Partition,
};
use crate::refine::{baseline_partitioner, fm_refine, FmConfig};

/// Indices of the best `delta` solutions by `(cutsize, violation, index)`.
pub fn select_top(h: &Hypergraph, pool: &[Partition], eps: f64, delta: usize) -> Vec<usize> {
    let mut idx: Vec<(u64, u64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, s)| (cutsize(h, s), balance_violation(h, s, eps), i))
        .collect();
    idx.sort_unstable();
    idx.into_iter().take(delta.max(1)).map(|t| t.2).collect()
}

/// Clusters `h` by the connected components left after deleting every
/// hyperedge cut by one of the top `delta` solutions of `pool`.
pub fn cut_overlay_cluster(
    h: &Hypergraph,
    pool: &[Partition],
    eps: f64,
    delta: usize,
) -> Result<ClusteredHypergraph> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("solution pool is empty".into()));
    }
    for s in pool {
        s.check_for(h)?;
    }
    let mut removed = vec![false; h.n_edges()];
    for i in select_top(h, pool, eps, delta) {
        for e in cut_edges(h, &pool[i]) {
            removed[e] = true;
        }
    }
    let n = h.n_vertices();
    let mut uf = UnionFind::<usize>::new(n);
    for e in (0..h.n_edges()).filter(|&e| !removed[e]) {
        let pins = h.pins(e);
        for &v in &pins[1..] {
            uf.union(pins[0], v);
        }
    }
    let mut id = vec![usize::MAX; n];
    let mut cluster_of = vec![0; n];
    let mut next = 0;
    for v in 0..n {
        let r = uf.find(v);
        if id[r] == usize::MAX {
            id[r] = next;
            next += 1;
        }
        cluster_of[v] = id[r];
    }
    contract(h, &cluster_of)
}

#[derive(Debug, Clone, Copy)]
pub struct BbLimits {
    pub time_limit: Duration,
    /// Search nodes before giving up; `None` for no cap.
    pub node_limit: Option<u64>,
}

impl Default for BbLimits {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(30),
            node_limit: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BbResult {
    pub partition: Partition,
    /// The search finished, so `partition` is a proven optimum.
    pub optimal: bool,
    pub nodes: u64,
}

struct Search<'a> {
    h: &'a Hypergraph,
    k: usize,
    bounds: BalanceBounds,
    order: Vec<usize>,
    /// Weight of `order[i..]`.
    suffix_weight: Vec<u64>,
    /// Position of each vertex in `order`.
    pos: Vec<usize>,
    /// Pins of each hyperedge sorted by `pos`.
    pins_by_pos: Vec<Vec<usize>>,
    /// `n × k` lookahead scratch, zero between uses.
    extra: Vec<u64>,
    touched: Vec<usize>,
    /// `(cheapest block, weight, regret)` of pending vertices.
    pref: Vec<(usize, u64, u64)>,
    /// Per-depth branch order scratch, `k` slots each.
    branch: Vec<(u64, usize)>,
    labels: Vec<usize>,
    block_weight: Vec<u64>,
    count: Vec<u32>,
    spanned: Vec<u32>,
    cut: u64,
    best_cut: u64,
    best: Option<Vec<usize>>,
    nodes: u64,
    limits: BbLimits,
    start: Instant,
    aborted: bool,
}

impl Search<'_> {
    fn assign(&mut self, v: usize, b: usize) {
        self.labels[v] = b;
        self.block_weight[b] += self.h.vertex_weight(v);
        for &e in self.h.incident_edges(v) {
            let c = &mut self.count[e * self.k + b];
            *c += 1;
            if *c == 1 {
                self.spanned[e] += 1;
                if self.spanned[e] == 2 {
                    self.cut += self.h.edge_weight(e);
                }
            }
        }
    }

    fn unassign(&mut self, v: usize, b: usize) {
        for &e in self.h.incident_edges(v) {
            let c = &mut self.count[e * self.k + b];
            *c -= 1;
            if *c == 0 {
                if self.spanned[e] == 2 {
                    self.cut -= self.h.edge_weight(e);
                }
                self.spanned[e] -= 1;
            }
        }
        self.block_weight[b] -= self.h.vertex_weight(v);
        self.labels[v] = usize::MAX;
    }

    /// Remaining weight can still lift every block to the lower bound.
    fn fillable(&self, depth: usize) -> bool {
        let deficit: u64 = self
            .block_weight
            .iter()
            .map(|&w| self.bounds.lower.saturating_sub(w))
            .sum();
        deficit <= self.suffix_weight[depth]
    }

    /// Lower bound on the cut still to come. A hyperedge whose assigned pins
    /// all lie in one block is charged to its next unassigned pin, which
    /// either joins that block or cuts it; each pending vertex then adds its
    /// cheapest admissible block. Every hyperedge is charged at most once.
    fn lookahead(&mut self, depth: usize) -> u64 {
        let k = self.k;
        for e in 0..self.h.n_edges() {
            if self.spanned[e] != 1 {
                continue;
            }
            let Some(&owner) = self.pins_by_pos[e].iter().find(|&&u| self.pos[u] >= depth) else {
                continue;
            };
            let home = (0..k).find(|&b| self.count[e * k + b] > 0).unwrap();
            let w = self.h.edge_weight(e);
            let row = &mut self.extra[owner * k..(owner + 1) * k];
            if row.iter().all(|&x| x == 0) {
                self.touched.push(owner);
            }
            for (b, x) in row.iter_mut().enumerate() {
                if b != home {
                    *x += w;
                }
            }
        }
        let mut bound = 0u64;
        self.pref.clear();
        for i in 0..self.touched.len() {
            let u = self.touched[i];
            let wu = self.h.vertex_weight(u);
            let row = &mut self.extra[u * k..(u + 1) * k];
            let mut first: Option<(u64, usize)> = None;
            let mut second: Option<u64> = None;
            for (b, &x) in row.iter().enumerate() {
                if self.block_weight[b] + wu > self.bounds.upper {
                    continue;
                }
                match first {
                    Some((m, _)) if x >= m => second = Some(second.map_or(x, |s| s.min(x))),
                    _ => {
                        second = first.map(|f| f.0);
                        first = Some((x, b));
                    }
                }
            }
            row.fill(0);
            let Some((m1, b1)) = first else {
                self.touched.clear();
                return u64::MAX / 2;
            };
            bound += m1;
            if wu > 0 {
                // no alternative block: it cannot be pushed out of b1
                self.pref.push((b1, wu, second.map_or(u64::MAX, |m2| m2 - m1)));
            }
        }
        self.touched.clear();
        bound.saturating_add(self.capacity_penalty())
    }

    /// Pending vertices crowding into their cheapest block beyond its
    /// capacity must be pushed out, each paying at least its regret; the
    /// fractional knapsack over regret per unit weight bounds that cost.
    fn capacity_penalty(&mut self) -> u64 {
        let mut total = 0u64;
        self.pref.sort_unstable_by(|a, b| {
            a.0.cmp(&b.0)
                .then_with(|| (u128::from(a.2) * u128::from(b.1)).cmp(&(u128::from(b.2) * u128::from(a.1))))
        });
        let mut i = 0;
        while i < self.pref.len() {
            let b = self.pref[i].0;
            let j = i + self.pref[i..].iter().take_while(|p| p.0 == b).count();
            let demand: u64 = self.pref[i..j].iter().map(|p| p.1).sum();
            let capacity = self.bounds.upper - self.block_weight[b];
            if demand > capacity {
                let mut excess = demand - capacity;
                for &(_, w, regret) in &self.pref[i..j] {
                    if regret == u64::MAX {
                        return u64::MAX / 2;
                    }
                    if w >= excess {
                        total += (u128::from(regret) * u128::from(excess)).div_ceil(u128::from(w)) as u64;
                        excess = 0;
                        break;
                    }
                    total += regret;
                    excess -= w;
                }
                if excess > 0 {
                    return u64::MAX / 2;
                }
            }
            i = j;
        }
        total
    }

    fn out_of_budget(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        if self.limits.node_limit.is_some_and(|cap| self.nodes >= cap)
            || (self.nodes.is_multiple_of(1024) && self.start.elapsed() >= self.limits.time_limit)
        {
            self.aborted = true;
        }
        self.aborted
    }

    fn dfs(&mut self, depth: usize, used: usize) {
        self.nodes += 1;
        if self.out_of_budget() {
            return;
        }
        if depth == self.order.len() {
            if self.block_weight.iter().all(|&w| self.bounds.contains(w))
                && (self.best.is_none() || self.cut < self.best_cut)
            {
                self.best_cut = self.cut;
                self.best = Some(self.labels.clone());
            }
            return;
        }
        let v = self.order[depth];
        let w = self.h.vertex_weight(v);
        let limit = (used + 1).min(self.k);
        // cheapest block first so that good incumbents appear early
        let slots = depth * self.k..depth * self.k + limit;
        for b in 0..limit {
            let added: u64 = self
                .h
                .incident_edges(v)
                .iter()
                .filter(|&&e| self.spanned[e] == 1 && self.count[e * self.k + b] == 0)
                .map(|&e| self.h.edge_weight(e))
                .sum();
            self.branch[depth * self.k + b] = (added, b);
        }
        self.branch[slots.clone()].sort_unstable();
        for slot in slots {
            let b = self.branch[slot].1;
            if self.block_weight[b] + w > self.bounds.upper {
                continue;
            }
            self.assign(v, b);
            let promising = self.best.is_none()
                || (self.cut < self.best_cut
                    && self.cut + self.lookahead(depth + 1) < self.best_cut);
            if promising && self.fillable(depth + 1) {
                self.dfs(depth + 1, used.max(b + 1));
            }
            self.unassign(v, b);
            if self.aborted {
                return;
            }
        }
    }
}

/// Max-adjacency order: each step takes the vertex with the most hyperedge
/// weight shared with the vertices already placed, so hyperedges close early
/// and the bound bites. Ties go to the heavier vertex, then the lower index.
fn search_order(h: &Hypergraph) -> Vec<usize> {
    let n = h.n_vertices();
    let mut placed = vec![false; n];
    let mut score = vec![0u64; n];
    let mut edge_seen = vec![false; h.n_edges()];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !placed[v])
            .max_by_key(|&v| (score[v], h.vertex_weight(v), std::cmp::Reverse(v)))
            .unwrap();
        placed[v] = true;
        order.push(v);
        for &e in h.incident_edges(v) {
            if std::mem::replace(&mut edge_seen[e], true) {
                continue;
            }
            for &u in h.pins(e) {
                if !placed[u] {
                    score[u] += h.edge_weight(e);
                }
            }
        }
    }
    order
}

/// Exact minimum-cut ε-balanced K-way partition by depth-first
/// branch-and-bound. The bound is the weight of hyperedges whose assigned
/// pins already span two blocks plus a one-vertex lookahead; branches that overfill a block or can no
/// longer fill every block to its lower bound are pruned, and blocks are
/// opened in ascending order to skip relabelings. On a timeout the best
/// solution found so far is returned (never worse than a balanced
/// `incumbent`).
pub fn exact_partition_bb(
    hc: &Hypergraph,
    k: usize,
    eps: f64,
    incumbent: &Partition,
    limits: BbLimits,
) -> Result<BbResult> {
    incumbent.check_for(hc)?;
    if incumbent.k() != k || k < 2 {
        return Err(Error::InvalidArgument("incumbent has the wrong block count".into()));
    }
    let bounds = BalanceBounds::for_hypergraph(hc, k, eps);
    let inc_ok = incumbent.block_weights(hc).iter().all(|&w| bounds.contains(w));
    let order = search_order(hc);
    let mut suffix_weight = vec![0u64; order.len() + 1];
    for i in (0..order.len()).rev() {
        suffix_weight[i] = suffix_weight[i + 1] + hc.vertex_weight(order[i]);
    }
    let mut pos = vec![0; order.len()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let pins_by_pos: Vec<Vec<usize>> = (0..hc.n_edges())
        .map(|e| {
            let mut p = hc.pins(e).to_vec();
            p.sort_by_key(|&u| pos[u]);
            p
        })
        .collect();
    let mut search = Search {
        h: hc,
        k,
        bounds,
        order,
        suffix_weight,
        pins_by_pos,
        pos,
        extra: vec![0; hc.n_vertices() * k],
        touched: Vec::new(),
        pref: Vec::new(),
        branch: vec![(0, 0); (hc.n_vertices() + 1) * k],
        labels: vec![usize::MAX; hc.n_vertices()],
        block_weight: vec![0; k],
        count: vec![0; hc.n_edges() * k],
        spanned: vec![0; hc.n_edges()],
        cut: 0,
        best_cut: if inc_ok { cutsize(hc, incumbent) } else { u64::MAX },
        best: inc_ok.then(|| incumbent.labels().to_vec()),
        nodes: 0,
        limits,
        start: Instant::now(),
        aborted: false,
    };
    search.dfs(0, 0);
    let optimal = !search.aborted;
    match search.best {
        Some(labels) => Ok(BbResult {
            partition: Partition::new(labels, k)?,
            optimal: optimal || search.best_cut == 0,
            nodes: search.nodes,
        }),
        None if optimal => Err(Error::Infeasible(format!(
            "no {k}-way partition within eps {eps}"
        ))),
        None => Ok(BbResult {
            partition: incumbent.clone(),
            optimal: false,
            nodes: search.nodes,
        }),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnsembleConfig {
    pub k: usize,
    pub eps: f64,
    pub delta: usize,
    /// Largest coarse hyperedge count handed to the exact solver.
    pub gamma: usize,
    pub limits: BbLimits,
    pub fm: FmConfig,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(k: usize, eps: f64) -> Self {
        Self {
            k,
            eps,
            delta: 5,
            gamma: 500,
            limits: BbLimits::default(),
            fm: FmConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub partition: Partition,
    pub cutsize: u64,
    pub coarse_vertices: usize,
    pub coarse_edges: usize,
    /// The exact solver ran and finished.
    pub proved_optimal: bool,
    pub used_exact: bool,
}

fn key(h: &Hypergraph, s: &Partition, eps: f64) -> (u64, u64) {
    (balance_violation(h, s, eps), cutsize(h, s))
}

/// Cluster, solve the clustered instance (exactly when it has at most
/// `gamma` hyperedges, otherwise with the greedy + FM baseline), lift, refine
/// with FM, and keep the better of that and the best pool solution.
pub fn ensemble(h: &Hypergraph, pool: &[Partition], cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    let (k, eps) = (cfg.k, cfg.eps);
    if pool.iter().any(|s| s.k() != k) {
        return Err(Error::InvalidArgument("pool solutions disagree on K".into()));
    }
    let clustered = cut_overlay_cluster(h, pool, eps, cfg.delta)?;
    let hc = &clustered.coarse;
    let selected = select_top(h, pool, eps, cfg.delta);
    let seed_idx = *selected
        .iter()
        .min_by_key(|&&i| (key(h, &pool[i], eps), i))
        .unwrap();
    let incumbent = clustered
        .project(&pool[seed_idx])
        .expect("selected solutions are constant on clusters");

    let mut used_exact = false;
    let mut proved_optimal = false;
    let coarse = if hc.n_edges() <= cfg.gamma {
        used_exact = true;
        match exact_partition_bb(hc, k, eps, &incumbent, cfg.limits) {
            Ok(r) => {
                proved_optimal = r.optimal;
                r.partition
            }
            Err(Error::Infeasible(_)) => incumbent.clone(),
            Err(e) => return Err(e),
        }
    } else {
        let refined = fm_refine(hc, &incumbent, eps, &cfg.fm)?;
        match baseline_partitioner(hc, k, eps, 5, cfg.seed) {
            Ok(b) if key(hc, &b, eps) < key(hc, &refined, eps) => b,
            _ => refined,
        }
    };
    let lifted = fm_refine(h, &clustered.lift(&coarse), eps, &cfg.fm)?;

    let best_pool = pool
        .iter()
        .enumerate()
        .min_by_key(|(i, s)| (key(h, s, eps), *i))
        .map(|(_, s)| s)
        .unwrap();
    let partition = if key(h, &lifted, eps) <= key(h, best_pool, eps) {
        lifted
    } else {
        best_pool.clone()
    };
    Ok(EnsembleResult {
        cutsize: cutsize(h, &partition),
        partition,
        coarse_vertices: hc.n_vertices(),
        coarse_edges: hc.n_edges(),
        proved_optimal,
        used_exact,
    })
}

/// The partitioning problem for `hc` as a binary program in LP format:
/// maximize the weight of uncut hyperedges subject to one block per vertex
/// and the balance window on every block.
pub fn write_lp(hc: &Hypergraph, k: usize, eps: f64) -> String {
    let b = BalanceBounds::for_hypergraph(hc, k, eps);
    let mut out = String::from("\\ K-way hypergraph partitioning\nMaximize\n obj:");
    let mut first = true;
    for e in 0..hc.n_edges() {
        for i in 0..k {
            let sign = if first { " " } else { " + " };
            first = false;
            let _ = write!(out, "{sign}{} y_{e}_{i}", hc.edge_weight(e));
        }
    }
    if first {
        out.push_str(" 0 x_0_0");
    }
    out.push_str("\nSubject To\n");
    for v in 0..hc.n_vertices() {
        let terms: Vec<String> = (0..k).map(|i| format!("x_{v}_{i}")).collect();
        let _ = writeln!(out, " assign_{v}: {} = 1", terms.join(" + "));
    }
    for e in 0..hc.n_edges() {
        for &v in hc.pins(e) {
            for i in 0..k {
                let _ = writeln!(out, " pin_{e}_{v}_{i}: y_{e}_{i} - x_{v}_{i} <= 0");
            }
        }
    }
    for i in 0..k {
        let terms: Vec<String> = (0..hc.n_vertices())
            .map(|v| format!("{} x_{v}_{i}", hc.vertex_weight(v)))
            .collect();
        let sum = terms.join(" + ");
        let _ = writeln!(out, " low_{i}: {sum} >= {}", b.lower);
        let _ = writeln!(out, " high_{i}: {sum} <= {}", b.upper);
    }
    out.push_str("Binary\n");
    for v in 0..hc.n_vertices() {
        for i in 0..k {
            let _ = writeln!(out, " x_{v}_{i}");
        }
    }
    for e in 0..hc.n_edges() {
        for i in 0..k {
            let _ = writeln!(out, " y_{e}_{i}");
        }
    }
    out.push_str("End\n");
    out
}
