//! Benchmark sweeps driven by a manifest.
//!
//! Manifest lines are `name path_or_url sha256 k_list eps [hint]`, blank
//! lines and `#` comments ignored. `k_list` is comma-separated; `sha256` may
//! be `-` for local files but is mandatory for URLs. Relative paths resolve
//! against the manifest's directory. The optional hint is a solution file
//! (used only when it matches the run's K); otherwise hints come from the
//! internal partitioner.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::driver::{generate_hint, run_kspecpart, KspConfig};
use crate::error::{Error, Result};
use crate::hgmodel::{cutsize, parse_hmetis, read_solution};

pub const CSV_HEADER: &str = "benchmark,|V|,|E|,K,eps,hint_cutsize,final_cutsize,seconds,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub name: String,
    pub source: String,
    pub sha256: Option<String>,
    pub k_list: Vec<usize>,
    pub eps: f64,
    pub hint: Option<String>,
}

impl ManifestEntry {
    pub fn is_remote(&self) -> bool {
        self.source.starts_with("http://") || self.source.starts_with("https://")
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let f: Vec<&str> = line.split_whitespace().collect();
        if !(5..=6).contains(&f.len()) {
            return Err(Error::parse(
                lineno,
                "expected: name path_or_url sha256 k_list eps [hint]",
            ));
        }
        let sha256 = match f[2] {
            "-" => None,
            s if s.len() == 64 && s.chars().all(|c| c.is_ascii_hexdigit()) => {
                Some(s.to_ascii_lowercase())
            }
            s => return Err(Error::parse(lineno, format!("bad sha256 '{s}'"))),
        };
        let k_list = f[3]
            .split(',')
            .map(|k| match k.parse::<usize>() {
                Ok(k) if k >= 2 => Ok(k),
                _ => Err(Error::parse(lineno, format!("bad K '{k}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let eps: f64 = f[4]
            .parse()
            .ok()
            .filter(|e: &f64| *e >= 0.0 && e.is_finite())
            .ok_or_else(|| Error::parse(lineno, format!("bad eps '{}'", f[4])))?;
        let entry = ManifestEntry {
            name: f[0].to_string(),
            source: f[1].to_string(),
            sha256,
            k_list,
            eps,
            hint: f.get(5).map(|s| s.to_string()),
        };
        if entry.is_remote() && entry.sha256.is_none() {
            return Err(Error::parse(lineno, "downloaded benchmarks need a sha256"));
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn verify(name: &str, bytes: &[u8], expected: Option<&str>) -> Result<()> {
    if let Some(expected) = expected {
        let actual = sha256_hex(bytes);
        if actual != expected {
            return Err(Error::Checksum {
                name: name.to_string(),
                expected: expected.to_string(),
                actual,
            });
        }
    }
    Ok(())
}

fn download(url: &str) -> Result<Vec<u8>> {
    let fail = |msg: String| Error::Download {
        url: url.to_string(),
        msg,
    };
    let mut resp = ureq::get(url).call().map_err(|e| fail(e.to_string()))?;
    let mut bytes = Vec::new();
    resp.body_mut()
        .as_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| fail(e.to_string()))?;
    Ok(bytes)
}

/// Contents of the entry's hypergraph file, verified. Remote files are
/// cached under `cache_dir` by name.
pub fn fetch(entry: &ManifestEntry, base_dir: &Path, cache_dir: &Path) -> Result<Vec<u8>> {
    let expected = entry.sha256.as_deref();
    if entry.is_remote() {
        let cached = cache_dir.join(format!("{}.hgr", entry.name));
        if let Ok(bytes) = fs::read(&cached) {
            if verify(&entry.name, &bytes, expected).is_ok() {
                return Ok(bytes);
            }
        }
        let bytes = download(&entry.source)?;
        verify(&entry.name, &bytes, expected)?;
        fs::create_dir_all(cache_dir)?;
        fs::write(&cached, &bytes)?;
        Ok(bytes)
    } else {
        let bytes = fs::read(resolve(base_dir, &entry.source))?;
        verify(&entry.name, &bytes, expected)?;
        Ok(bytes)
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub benchmark: String,
    pub vertices: usize,
    pub hyperedges: usize,
    pub k: usize,
    pub eps: f64,
    pub hint_cutsize: u64,
    pub final_cutsize: u64,
    pub seconds: f64,
    pub seed: u64,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3},{}",
            self.benchmark,
            self.vertices,
            self.hyperedges,
            self.k,
            self.eps,
            self.hint_cutsize,
            self.final_cutsize,
            self.seconds,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOutcome {
    pub rows: Vec<BenchRow>,
    /// `(benchmark, reason)` for every entry or K that could not run.
    pub skipped: Vec<(String, String)>,
}

impl SuiteOutcome {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }
}

pub struct SuiteOptions {
    /// Template for every run; `k` and `eps` are overridden per row.
    pub config: KspConfig,
    pub base_dir: PathBuf,
    pub cache_dir: PathBuf,
    /// Run manifest entries concurrently.
    pub parallel: bool,
}

fn run_entry(entry: &ManifestEntry, opts: &SuiteOptions) -> (Vec<BenchRow>, Vec<(String, String)>) {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let loaded = fetch(entry, &opts.base_dir, &opts.cache_dir).and_then(|bytes| {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::InvalidHypergraph("file is not UTF-8".into()))?;
        parse_hmetis(&text)
    });
    let h = match loaded {
        Ok(h) => h,
        Err(e) => {
            log::warn!("skipping {}: {e}", entry.name);
            skipped.push((entry.name.clone(), e.to_string()));
            return (rows, skipped);
        }
    };
    for &k in &entry.k_list {
        let mut cfg = opts.config.clone();
        cfg.k = k;
        cfg.eps = entry.eps;
        let t0 = Instant::now();
        let result = (|| {
            let hint = match &entry.hint {
                Some(p) => {
                    let text = fs::read_to_string(resolve(&opts.base_dir, p))?;
                    match read_solution(&text, h.n_vertices(), k) {
                        Ok(s) => s,
                        Err(_) => generate_hint(&h, &cfg)?,
                    }
                }
                None => generate_hint(&h, &cfg)?,
            };
            let out = run_kspecpart(&h, &hint, &cfg)?;
            Ok::<_, Error>((cutsize(&h, &hint), out.report.final_.cutsize))
        })();
        match result {
            Ok((hint_cutsize, final_cutsize)) => rows.push(BenchRow {
                benchmark: entry.name.clone(),
                vertices: h.n_vertices(),
                hyperedges: h.n_edges(),
                k,
                eps: entry.eps,
                hint_cutsize,
                final_cutsize,
                seconds: if cfg.record_timings {
                    t0.elapsed().as_secs_f64()
                } else {
                    0.0
                },
                seed: cfg.seed,
            }),
            Err(e) => {
                log::warn!("skipping {} K={k}: {e}", entry.name);
                skipped.push((entry.name.clone(), format!("K={k}: {e}")));
            }
        }
    }
    (rows, skipped)
}

/// Runs every `(entry, K)` pair. Unreadable, corrupt or failing entries are
/// skipped and listed, never fatal.
pub fn run_suite(manifest: &[ManifestEntry], opts: &SuiteOptions) -> SuiteOutcome {
    let results: Vec<_> = if opts.parallel {
        manifest.par_iter().map(|e| run_entry(e, opts)).collect()
    } else {
        manifest.iter().map(|e| run_entry(e, opts)).collect()
    };
    let mut outcome = SuiteOutcome::default();
    for (rows, skipped) in results {
        outcome.rows.extend(rows);
        outcome.skipped.extend(skipped);
    }
    outcome
}
