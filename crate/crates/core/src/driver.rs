//! The supervised refinement loop.
//!
//! Starting from a hint, each iteration embeds the vertices, builds the tree
//! family, distills and partitions every tree, refines the candidates and
//! ensembles them into the next hint. A final ensemble over the initial hint
//! and every iteration's output gives the result, which therefore never has
//! a larger cut than a balanced hint.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::distill::distill_all;
use crate::eigen::{build_preconditioner, jacobi_preconditioner, EigenOptions, Preconditioner};
use crate::embed::{k_way_embedding_with, EmbedOptions};
use crate::ensemble::{ensemble, BbLimits, EnsembleConfig};
use crate::error::{Error, Result};
use crate::hgmodel::{
    balance_violation, block_fractions, connected_components, cutsize, Hypergraph, Partition,
};
use crate::operators::{build_sparsifier, SparseGraph};
use crate::refine::{baseline_partitioner, fm_refine, FmConfig};
use crate::treepart::partition_tree_family;
use crate::trees::tree_family_on;

#[derive(Debug, Clone)]
pub struct KspConfig {
    pub k: usize,
    pub eps: f64,
    /// Embedding dimension.
    pub m: usize,
    /// Solutions overlaid per ensemble.
    pub delta: usize,
    /// Supervision iterations.
    pub beta: usize,
    /// Random cycles per hyperedge in the sparsifier.
    pub zeta: usize,
    /// Largest clustered instance (in hyperedges) solved exactly.
    pub gamma: usize,
    pub seed: u64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    pub fm_max_passes: usize,
    pub bb_time_limit: Duration,
    /// Skip LDA and keep the stacked `K·m`-column embedding.
    pub lda_bypass: bool,
    /// Restarts of the baseline partitioner when no hint is given.
    pub hint_restarts: usize,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// When false every `seconds` field of the report is zero, so reports of
    /// identical runs compare equal byte for byte.
    pub record_timings: bool,
}

impl KspConfig {
    pub fn new(k: usize, eps: f64) -> Self {
        Self {
            k,
            eps,
            m: 2,
            delta: 5,
            beta: 2,
            zeta: 2,
            gamma: 500,
            seed: 0,
            eigen_tol: 1e-6,
            eigen_max_iter: 200,
            fm_max_passes: 10,
            bb_time_limit: Duration::from_secs(30),
            lda_bypass: false,
            hint_restarts: 5,
            threads: None,
            record_timings: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad("eps must be a nonnegative fraction");
        }
        if self.m == 0 || self.m > 16 {
            return bad("m must be between 1 and 16");
        }
        if self.delta == 0 || self.zeta == 0 || self.hint_restarts == 0 {
            return bad("delta, zeta and hint restarts must be at least 1");
        }
        if self.eigen_max_iter == 0 || self.fm_max_passes == 0 {
            return bad("iteration limits must be at least 1");
        }
        if self.eigen_tol.is_nan() || self.eigen_tol <= 0.0 {
            return bad("eigen tolerance must be positive");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        Ok(())
    }

    fn fm(&self) -> FmConfig {
        FmConfig {
            max_passes: self.fm_max_passes,
            allow_illegal_start: true,
        }
    }

    fn ensemble(&self, delta: usize, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            k: self.k,
            eps: self.eps,
            delta,
            gamma: self.gamma,
            limits: BbLimits {
                time_limit: self.bb_time_limit,
                node_limit: None,
            },
            fm: self.fm(),
            seed,
        }
    }

    fn seconds(&self, since: Instant) -> f64 {
        if self.record_timings {
            since.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InputSummary {
    pub vertices: usize,
    pub hyperedges: usize,
    pub k: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct IterationReport {
    pub hint_cutsize: u64,
    /// Relative residuals of every computed eigenvector.
    pub eigen_residuals: Vec<f64>,
    pub n_candidates: usize,
    pub ensemble_cutsize: Option<u64>,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FinalReport {
    pub cutsize: u64,
    pub balance: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Report {
    pub input: InputSummary,
    pub iterations: Vec<IterationReport>,
    #[serde(rename = "final")]
    pub final_: FinalReport,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Debug, Clone)]
pub struct KspOutput {
    pub partition: Partition,
    pub report: Report,
}

/// `h` plus unit two-pin hyperedges chaining the smallest vertex of each
/// connected component to the next; `h` itself when already connected.
pub fn bridge_components(h: &Hypergraph) -> Result<(Hypergraph, usize)> {
    let comps = connected_components(h);
    if comps.len() <= 1 {
        return Ok((h.clone(), 0));
    }
    let extra: Vec<(Vec<usize>, u64)> = comps
        .windows(2)
        .map(|w| (vec![w[0][0], w[1][0]], 1))
        .collect();
    Ok((h.with_extra_edges(&extra)?, extra.len()))
}

/// Hint from the internal multi-start partitioner.
pub fn generate_hint(h: &Hypergraph, cfg: &KspConfig) -> Result<Partition> {
    baseline_partitioner(
        h,
        cfg.k,
        cfg.eps,
        cfg.hint_restarts,
        crate::derive_seed(cfg.seed, 7),
    )
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

struct Workspace {
    bridged: Hypergraph,
    sparsifier: SparseGraph,
    precond: Box<dyn Preconditioner>,
}

impl Workspace {
    fn new(h: &Hypergraph, cfg: &KspConfig) -> Result<Self> {
        let (bridged, added) = bridge_components(h)?;
        if added > 0 {
            log::info!("bridged {} components with {added} unit edges", added + 1);
        }
        let sparsifier = build_sparsifier(&bridged, cfg.zeta, crate::derive_seed(cfg.seed, 1))?;
        let precond: Box<dyn Preconditioner> = match build_preconditioner(&sparsifier) {
            Ok(p) => Box::new(p),
            Err(e) => {
                log::warn!("multilevel preconditioner unavailable ({e}); using Jacobi");
                Box::new(jacobi_preconditioner(&sparsifier)?)
            }
        };
        Ok(Self {
            bridged,
            sparsifier,
            precond,
        })
    }
}

/// One supervision step: returns the ensembled solution, the residuals and
/// the number of distinct tree candidates.
fn iterate(
    h: &Hypergraph,
    ws: &Workspace,
    hint: &Partition,
    cfg: &KspConfig,
    i: usize,
) -> Result<(Partition, Vec<f64>, usize)> {
    let seed = crate::derive_seed(cfg.seed, 100 + i as u64);
    let opts = EmbedOptions {
        m: cfg.m.min(h.n_vertices().saturating_sub(1)).max(1),
        eigen: EigenOptions {
            tol: cfg.eigen_tol,
            max_iter: cfg.eigen_max_iter,
            seed,
        },
        lda: !cfg.lda_bypass,
    };
    let emb = k_way_embedding_with(&ws.bridged, hint, ws.precond.as_ref(), &opts)?;
    if !emb.converged {
        log::warn!("iteration {i}: eigensolver did not reach tolerance");
    }
    let trees = tree_family_on(&ws.sparsifier, &emb.embedding)?;
    let dts = distill_all(h, &trees)?;
    let cands = partition_tree_family(h, &dts, cfg.k, cfg.eps, &cfg.fm())?;
    let n = cands.len();
    let mut pool: Vec<Partition> = vec![hint.clone()];
    pool.extend(cands.into_iter().map(|c| c.partition));
    let out = ensemble(h, &pool, &cfg.ensemble(cfg.delta, seed))?;
    Ok((out.partition, emb.residuals.concat(), n))
}

fn better(h: &Hypergraph, eps: f64, a: &Partition, b: &Partition) -> bool {
    (balance_violation(h, a, eps), cutsize(h, a)) < (balance_violation(h, b, eps), cutsize(h, b))
}

/// Runs the full pipeline from `s_init`. Failures inside an iteration end
/// the loop early; the candidates gathered so far are still ensembled.
pub fn run_kspecpart(h: &Hypergraph, s_init: &Partition, cfg: &KspConfig) -> Result<KspOutput> {
    cfg.validate()?;
    s_init.check_for(h)?;
    if s_init.k() != cfg.k {
        return Err(Error::InvalidArgument(format!(
            "hint has {} blocks, expected {}",
            s_init.k(),
            cfg.k
        )));
    }
    with_pool(cfg.threads, || run_inner(h, s_init, cfg))?
}

fn run_inner(h: &Hypergraph, s_init: &Partition, cfg: &KspConfig) -> Result<KspOutput> {
    let mut candidates = vec![s_init.clone()];
    let mut iterations = Vec::new();
    let workspace = if cfg.beta > 0 {
        match Workspace::new(h, cfg) {
            Ok(ws) => Some(ws),
            Err(e) => {
                log::warn!("spectral setup failed: {e}");
                iterations.push(IterationReport {
                    hint_cutsize: cutsize(h, s_init),
                    eigen_residuals: Vec::new(),
                    n_candidates: 0,
                    ensemble_cutsize: None,
                    seconds: 0.0,
                    error: Some(e.to_string()),
                });
                None
            }
        }
    } else {
        None
    };
    if let Some(ws) = &workspace {
        let mut hint = s_init.clone();
        for i in 0..cfg.beta {
            let t0 = Instant::now();
            let hint_cutsize = cutsize(h, &hint);
            match iterate(h, ws, &hint, cfg, i) {
                Ok((next, residuals, n)) => {
                    iterations.push(IterationReport {
                        hint_cutsize,
                        eigen_residuals: residuals,
                        n_candidates: n,
                        ensemble_cutsize: Some(cutsize(h, &next)),
                        seconds: cfg.seconds(t0),
                        error: None,
                    });
                    candidates.push(next.clone());
                    hint = next;
                }
                Err(e) => {
                    log::warn!("iteration {i} failed: {e}");
                    iterations.push(IterationReport {
                        hint_cutsize,
                        eigen_residuals: Vec::new(),
                        n_candidates: 0,
                        ensemble_cutsize: None,
                        seconds: cfg.seconds(t0),
                        error: Some(e.to_string()),
                    });
                    break;
                }
            }
        }
    }

    let final_seed = crate::derive_seed(cfg.seed, 99);
    let mut partition = match ensemble(h, &candidates, &cfg.ensemble(candidates.len(), final_seed))
    {
        Ok(r) => r.partition,
        Err(e) => {
            log::warn!("final ensemble failed: {e}");
            candidates
                .iter()
                .fold(None::<&Partition>, |best, c| match best {
                    Some(b) if !better(h, cfg.eps, c, b) => Some(b),
                    _ => Some(c),
                })
                .unwrap()
                .clone()
        }
    };
    let refined = fm_refine(h, &partition, cfg.eps, &cfg.fm())?;
    if better(h, cfg.eps, &refined, &partition) {
        partition = refined;
    }
    let report = Report {
        input: InputSummary {
            vertices: h.n_vertices(),
            hyperedges: h.n_edges(),
            k: cfg.k,
            eps: cfg.eps,
        },
        iterations,
        final_: FinalReport {
            cutsize: cutsize(h, &partition),
            balance: block_fractions(h, &partition),
            seed: cfg.seed,
        },
    };
    Ok(KspOutput { partition, report })
}

/// Ensembles externally supplied solutions without any spectral step.
pub fn run_overlay_only(h: &Hypergraph, pool: &[Partition], cfg: &KspConfig) -> Result<Partition> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::InvalidArgument("overlay needs at least one solution".into()));
    }
    with_pool(cfg.threads, || {
        ensemble(h, pool, &cfg.ensemble(cfg.delta, cfg.seed)).map(|r| r.partition)
    })?
}
