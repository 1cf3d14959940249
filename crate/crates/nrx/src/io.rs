//! Files: checkpoints, run logs, BLER curves and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nrx_core::eval::BlerCurve;
use nrx_core::receiver::LogRow;
use nrx_core::transfer::{Checkpoint, Fingerprint, FingerprintPolicy};
use serde::{Deserialize, Serialize};

use crate::config::Experiment;
use crate::profiles::sha256_hex;

pub const CHECKPOINT_EXT: &str = "nrxckpt";

/// Writes via a temporary file in the same directory and a rename, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_atomic(path, &ckpt.encode())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    Checkpoint::decode(&bytes).with_context(|| format!("decoding checkpoint {}", path.display()))
}

/// Loads a checkpoint and checks it against `expected`. Under the permissive
/// policy differences are logged and returned.
pub fn load_checked(path: &Path, expected: &Fingerprint, policy: FingerprintPolicy) -> Result<(Checkpoint, Vec<String>)> {
    let ckpt = load_checkpoint(path)?;
    let delta = ckpt.check(expected, policy).with_context(|| format!("checkpoint {}", path.display()))?;
    for d in &delta {
        log::warn!("{}: fingerprint differs: {d}", path.display());
    }
    Ok((ckpt, delta))
}

pub const RUN_LOG_HEADER: &str = "iter,L,mean_bce_bits,ebno_lo,ebno_hi,seed";

/// Run log: `# key=value` metadata lines, the column header, then one line per
/// iteration.
pub fn format_run_log(meta: &[(&str, String)], rows: &[LogRow]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={v}");
    }
    if let Some(first) = rows.first() {
        let _ = writeln!(s, "# batch_size={}", first.batch);
    }
    let _ = writeln!(s, "# samples={}", rows.iter().map(|r| r.batch as u64).sum::<u64>());
    let _ = writeln!(s, "# last_batch={}", rows.last().map_or(0, |r| r.batch));
    let _ = writeln!(s, "{RUN_LOG_HEADER}");
    for r in rows {
        let _ = writeln!(s, "{},{:?},{:?},{:?},{:?},{}", r.iter, r.rate, r.mean_bce, r.ebno_lo, r.ebno_hi, r.seed);
    }
    s
}

/// Parsed run log.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub meta: BTreeMap<String, String>,
    /// `(iter, L, mean_bce_bits)`.
    pub rows: Vec<(u64, f64, f64)>,
}

impl RunLog {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut rows = Vec::new();
        let mut header = false;
        for line in text.lines() {
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once('=').with_context(|| format!("bad metadata line `{line}`"))?;
                meta.insert(k.to_string(), v.to_string());
            } else if line == RUN_LOG_HEADER {
                header = true;
            } else {
                let f: Vec<&str> = line.split(',').collect();
                if !header || f.len() != 6 {
                    bail!("bad run log line `{line}`");
                }
                rows.push((f[0].parse()?, f[1].parse()?, f[2].parse()?));
            }
        }
        if !header {
            bail!("run log has no column header");
        }
        Ok(Self { meta, rows })
    }

    pub fn meta_u64(&self, key: &str) -> Result<u64> {
        self.meta.get(key).with_context(|| format!("run log lacks `{key}`"))?.parse().map_err(Into::into)
    }

    /// Samples consumed, recomputed from the row count and batch sizes.
    pub fn samples_from_rows(&self) -> Result<u64> {
        if self.rows.is_empty() {
            return Ok(0);
        }
        let batch = self.meta_u64("batch_size")?;
        Ok((self.rows.len() as u64 - 1) * batch + self.meta_u64("last_batch")?)
    }
}

pub const CSV_HEADER: &str = "technique,alpha,ebno_db,blocks,block_errors,bler,bit_errors,seed,source_fp,target_fp";

/// Metadata written alongside every curve row.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveMeta {
    pub technique: String,
    pub alpha: f64,
    pub seed: u64,
    pub source_fp: String,
    pub target_fp: String,
}

pub fn format_curve_csv(curve: &BlerCurve, meta: &CurveMeta) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for p in &curve.points {
        let c = &p.counts;
        let _ = writeln!(
            s,
            "{},{:?},{:?},{},{},{:?},{},{},{},{}",
            meta.technique,
            meta.alpha,
            p.ebno_db,
            c.blocks,
            c.block_errors,
            p.bler(),
            c.bit_errors,
            meta.seed,
            meta.source_fp,
            meta.target_fp
        );
    }
    s
}

/// One parsed CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub technique: String,
    pub alpha: f64,
    pub ebno_db: f64,
    pub blocks: u64,
    pub block_errors: u64,
    pub bler: f64,
    pub bit_errors: u64,
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        bail!("CSV header mismatch");
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 10 {
                bail!("bad CSV row `{l}`");
            }
            Ok(CsvRow {
                technique: f[0].to_string(),
                alpha: f[1].parse()?,
                ebno_db: f[2].parse()?,
                blocks: f[3].parse()?,
                block_errors: f[4].parse()?,
                bler: f[5].parse()?,
                bit_errors: f[6].parse()?,
            })
        })
        .collect()
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub noise_convention: String,
    pub code: String,
    /// SHA-256 of every channel data source used.
    pub profiles: BTreeMap<String, String>,
    /// SHA-256 of every file written, relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    pub config: Experiment,
}

impl Manifest {
    pub fn new(command: &str, config: &Experiment) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            noise_convention: "n0 = 1 / (10^(ebno_db/10) * bits_per_symbol * code_rate), unit-energy symbols".into(),
            code: "regular (3,6) LDPC, rate 1/2, one codeword per grid, normalized min-sum".into(),
            profiles: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: config.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Writes output files under one directory and records their checksums.
pub struct OutputDir {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl OutputDir {
    pub fn new(root: &Path, manifest: Manifest) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), manifest })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(rel);
        write_atomic(&p, bytes)?;
        self.manifest.outputs.insert(rel.to_string(), sha256_hex(bytes));
        Ok(p)
    }

    pub fn finish(self) -> Result<PathBuf> {
        let p = self.root.join("manifest.toml");
        write_atomic(&p, self.manifest.to_toml().as_bytes())?;
        Ok(p)
    }
}
