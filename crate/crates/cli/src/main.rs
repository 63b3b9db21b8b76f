//! `kspecpart` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 input/output or parse failure,
//! 3 no balanced partition exists.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use kspecpart::bench::{parse_manifest, run_suite, SuiteOptions};
use kspecpart::distill::distill;
use kspecpart::driver::{generate_hint, run_kspecpart, run_overlay_only, KspConfig};
use kspecpart::embed::{default_preconditioner, k_way_embedding_with, EmbedOptions};
use kspecpart::ensemble::{cut_overlay_cluster, write_lp};
use kspecpart::hgmodel::{
    block_fractions, brute_force_optimal, cutsize, is_balanced, parse_hmetis, read_solution,
    write_hmetis, write_solution, BalanceBounds,
};
use kspecpart::operators::build_sparsifier;
use kspecpart::refine::baseline_partitioner;
use kspecpart::trees::tree_family_on;
use kspecpart::{Error, Hypergraph, Partition};

#[derive(Parser)]
#[command(name = "kspecpart", version, about = "Supervised spectral hypergraph partitioning")]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "KSPECPART_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Improve a hint partition with the full spectral pipeline.
    Partition(PartitionArgs),
    /// Ensemble existing solutions by cut overlay.
    Overlay(OverlayArgs),
    /// Report cutsize and block balance of a solution.
    Evaluate(EvaluateArgs),
    /// Exhaustive optimum for tiny instances.
    Brute(BruteArgs),
    /// Print the distilled cut of every edge of one family tree.
    DistillDebug(DistillArgs),
    /// Generate a hint with the internal multi-start partitioner.
    Hint(HintArgs),
    /// Run a benchmark manifest and write a CSV table.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Problem {
    /// Hypergraph in hMETIS format.
    #[arg(long)]
    hgr: PathBuf,
    /// Number of blocks.
    #[arg(long)]
    k: usize,
    /// Balance tolerance as a fraction (0.02 for 2%).
    #[arg(long)]
    eps: f64,
}

#[derive(Args, Clone)]
struct Tuning {
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Solutions overlaid per ensemble.
    #[arg(long, default_value_t = 5)]
    delta: usize,
    /// Supervision iterations.
    #[arg(long, default_value_t = 2)]
    beta: usize,
    /// Random cycles per hyperedge in the sparsifier.
    #[arg(long, default_value_t = 2)]
    zeta: usize,
    /// Largest clustered instance, in hyperedges, solved exactly.
    #[arg(long, default_value_t = 500)]
    gamma: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    eigen_tol: f64,
    #[arg(long, default_value_t = 200)]
    eigen_max_iter: usize,
    #[arg(long, default_value_t = 10)]
    fm_passes: usize,
    /// Seconds per exact solve.
    #[arg(long, default_value_t = 30.0)]
    bb_time_limit: f64,
    /// Keep the stacked one-vs-rest embedding instead of reducing it.
    #[arg(long)]
    no_lda: bool,
    /// Restarts of the internal partitioner when no hint is supplied.
    #[arg(long, default_value_t = 5)]
    hint_restarts: usize,
    /// Write zero for every timing so reports are reproducible.
    #[arg(long)]
    no_timings: bool,
}

impl Tuning {
    fn config(&self, k: usize, eps: f64) -> Result<KspConfig, Error> {
        if !(self.bb_time_limit >= 0.0 && self.bb_time_limit.is_finite()) {
            return Err(Error::InvalidArgument("bb-time-limit must be nonnegative".into()));
        }
        let cfg = KspConfig {
            m: self.m,
            delta: self.delta,
            beta: self.beta,
            zeta: self.zeta,
            gamma: self.gamma,
            seed: self.seed,
            eigen_tol: self.eigen_tol,
            eigen_max_iter: self.eigen_max_iter,
            fm_max_passes: self.fm_passes,
            bb_time_limit: Duration::from_secs_f64(self.bb_time_limit),
            lda_bypass: self.no_lda,
            hint_restarts: self.hint_restarts,
            record_timings: !self.no_timings,
            ..KspConfig::new(k, eps)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    problem: Problem,
    /// Hint solution; generated internally when omitted.
    #[arg(long)]
    hint: Option<PathBuf>,
    /// Solution file to write.
    #[arg(long)]
    out: PathBuf,
    /// JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct OverlayArgs {
    #[command(flatten)]
    problem: Problem,
    /// Solution files to ensemble (repeat the flag).
    #[arg(long = "sol", required = true)]
    sols: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write PREFIX.hgr (clustered instance) and PREFIX.lp (its
    /// integer program).
    #[arg(long)]
    export_coarse: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    problem: Problem,
    #[arg(long)]
    sol: PathBuf,
}

#[derive(Args)]
struct BruteArgs {
    #[command(flatten)]
    problem: Problem,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistillArgs {
    #[command(flatten)]
    problem: Problem,
    /// Hint used for the embedding; generated internally when omitted.
    #[arg(long)]
    hint: Option<PathBuf>,
    /// Index into the tree family.
    #[arg(long, default_value_t = 0)]
    tree: usize,
    /// Write the embedding as CSV.
    #[arg(long)]
    embedding_csv: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct HintArgs {
    #[command(flatten)]
    problem: Problem,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where downloaded benchmarks are kept.
    #[arg(long, default_value = ".kspecpart-cache")]
    cache_dir: PathBuf,
    /// Run manifest entries concurrently.
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    tuning: Tuning,
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn load(p: &Problem) -> Result<Hypergraph, Error> {
    if p.k < 2 {
        return Err(Error::InvalidArgument("--k must be at least 2".into()));
    }
    if !(p.eps >= 0.0 && p.eps.is_finite()) {
        return Err(Error::InvalidArgument("--eps must be a nonnegative fraction".into()));
    }
    parse_hmetis(&read_text(&p.hgr)?)
}

fn load_solution(path: &Path, h: &Hypergraph, k: usize) -> Result<Partition, Error> {
    read_solution(&read_text(path)?, h.n_vertices(), k)
}

fn print_quality(h: &Hypergraph, s: &Partition, eps: f64) {
    let fractions: Vec<String> = block_fractions(h, s)
        .iter()
        .map(|f| format!("{f:.4}"))
        .collect();
    println!("cutsize {}", cutsize(h, s));
    println!("balanced {}", is_balanced(h, s, eps));
    println!("blocks {}", fractions.join(" "));
}

fn partition(a: &PartitionArgs) -> Result<(), Error> {
    let h = load(&a.problem)?;
    let cfg = a.tuning.config(a.problem.k, a.problem.eps)?;
    let hint = match &a.hint {
        Some(p) => load_solution(p, &h, cfg.k)?,
        None => generate_hint(&h, &cfg)?,
    };
    let out = run_kspecpart(&h, &hint, &cfg)?;
    write_text(&a.out, &write_solution(&out.partition))?;
    if let Some(r) = &a.report {
        write_text(r, &out.report.to_json()?)?;
    }
    println!("hint cutsize {}", cutsize(&h, &hint));
    print_quality(&h, &out.partition, cfg.eps);
    Ok(())
}

fn overlay(a: &OverlayArgs) -> Result<(), Error> {
    let h = load(&a.problem)?;
    let cfg = a.tuning.config(a.problem.k, a.problem.eps)?;
    let pool = a
        .sols
        .iter()
        .map(|p| load_solution(p, &h, cfg.k))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(prefix) = &a.export_coarse {
        let c = cut_overlay_cluster(&h, &pool, cfg.eps, cfg.delta)?;
        let base = prefix.display().to_string();
        write_text(Path::new(&format!("{base}.hgr")), &write_hmetis(&c.coarse))?;
        write_text(Path::new(&format!("{base}.lp")), &write_lp(&c.coarse, cfg.k, cfg.eps))?;
    }
    let s = run_overlay_only(&h, &pool, &cfg)?;
    write_text(&a.out, &write_solution(&s))?;
    print_quality(&h, &s, cfg.eps);
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<(), Error> {
    let h = load(&a.problem)?;
    let s = load_solution(&a.sol, &h, a.problem.k)?;
    print_quality(&h, &s, a.problem.eps);
    let b = BalanceBounds::for_hypergraph(&h, a.problem.k, a.problem.eps);
    println!("bounds {} {}", b.lower, b.upper);
    Ok(())
}

fn brute(a: &BruteArgs) -> Result<(), Error> {
    let h = load(&a.problem)?;
    let s = brute_force_optimal(&h, a.problem.k, a.problem.eps)?;
    if let Some(out) = &a.out {
        write_text(out, &write_solution(&s))?;
    }
    print_quality(&h, &s, a.problem.eps);
    Ok(())
}

fn distill_debug(a: &DistillArgs) -> Result<(), Error> {
    let h = load(&a.problem)?;
    let cfg = a.tuning.config(a.problem.k, a.problem.eps)?;
    let hint = match &a.hint {
        Some(p) => load_solution(p, &h, cfg.k)?,
        None => generate_hint(&h, &cfg)?,
    };
    let (bridged, _) = kspecpart::driver::bridge_components(&h)?;
    let pc = default_preconditioner(&bridged, cfg.zeta, cfg.seed)?;
    let mut opts = EmbedOptions::new(cfg.m.min(h.n_vertices().saturating_sub(1)).max(1), cfg.seed);
    opts.lda = !cfg.lda_bypass;
    let emb = k_way_embedding_with(&bridged, &hint, pc.as_ref(), &opts)?.embedding;
    if let Some(path) = &a.embedding_csv {
        let mut buf = Vec::new();
        emb.write_csv(&mut buf)?;
        fs::write(path, buf)?;
    }
    let g = build_sparsifier(&bridged, cfg.zeta, cfg.seed)?;
    let family = tree_family_on(&g, &emb)?;
    let t = family.get(a.tree).ok_or_else(|| {
        Error::InvalidArgument(format!("tree {} of {}", a.tree, family.len()))
    })?;
    let dt = distill(&h, t)?;
    println!("# u v cut below_weight");
    for (e, &(u, v)) in t.edges().iter().enumerate() {
        println!(
            "{u} {v} {} {}",
            dt.edge_cut_weight[e], dt.subtree_vertex_weight[e]
        );
    }
    Ok(())
}

fn hint(a: &HintArgs) -> Result<(), Error> {
    let h = load(&a.problem)?;
    let s = baseline_partitioner(&h, a.problem.k, a.problem.eps, a.restarts, a.seed)?;
    write_text(&a.out, &write_solution(&s))?;
    print_quality(&h, &s, a.problem.eps);
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<(), Error> {
    let manifest = parse_manifest(&read_text(&a.manifest)?)?;
    let config = a.tuning.config(2, 0.0)?;
    let base_dir = a
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let opts = SuiteOptions {
        config,
        base_dir,
        cache_dir: a.cache_dir.clone(),
        parallel: a.parallel,
    };
    let outcome = run_suite(&manifest, &opts);
    for (name, why) in &outcome.skipped {
        eprintln!("skipped {name}: {why}");
    }
    match &a.out {
        Some(p) => write_text(p, &outcome.to_csv())?,
        None => print!("{}", outcome.to_csv()),
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => 3,
        Error::Parse { .. }
        | Error::Io(_)
        | Error::Json(_)
        | Error::InvalidHypergraph(_)
        | Error::InvalidPartition(_)
        | Error::Checksum { .. }
        | Error::Download { .. } => 2,
        Error::InvalidArgument(_) | Error::EmptyBlock(_) | Error::Disconnected { .. } => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let result = match &cli.command {
        Command::Partition(a) => partition(a),
        Command::Overlay(a) => overlay(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Brute(a) => brute(a),
        Command::DistillDebug(a) => distill_debug(a),
        Command::Hint(a) => hint(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
