//! Monte-Carlo BLER evaluation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::link::{Block, Link};
use crate::numerics::Scalar;
use crate::phy::demap_maxlog;
use crate::receiver::{data_llrs, preprocess, Model};
use crate::rng::eval_block;
use crate::{Error, Result};

/// Produces per-bit LLRs for the data REs of a received block in canonical
/// order.
pub trait Receiver: Sync {
    fn llrs(&self, link: &Link, block: &Block) -> Result<Vec<f32>>;
}

pub struct NeuralReceiver<T = f32> {
    pub model: Model<T>,
}

impl<T: Scalar> Receiver for NeuralReceiver<T> {
    fn llrs(&self, link: &Link, block: &Block) -> Result<Vec<f32>> {
        if self.model.spec.bits_per_symbol != link.bits_per_symbol() {
            return Err(Error::Config(format!(
                "model emits {} bits per RE, link carries {}",
                self.model.spec.bits_per_symbol,
                link.bits_per_symbol()
            )));
        }
        let out = self.model.forward(&preprocess(&block.rx))?;
        Ok(data_llrs(&out, &link.domain().grid)?.into_iter().map(|v| v.as_f64() as f32).collect())
    }
}

/// Magnitude cap on genie LLRs, reached only in (near) noiseless conditions.
pub const GENIE_LLR_LIMIT: f64 = 1e6;

/// LMMSE combining with the true channel, bias removal and max-log demapping.
pub struct GenieLmmse;

impl Receiver for GenieLmmse {
    fn llrs(&self, link: &Link, block: &Block) -> Result<Vec<f32>> {
        let grid = &link.domain().grid;
        let points = link.domain().modulation.points();
        let s = grid.num_subcarriers;
        let rx = &block.rx;
        let mut out = Vec::with_capacity(grid.data_re_count() * link.bits_per_symbol());
        let mut tmp = Vec::new();
        for p in grid.data_positions() {
            let sc = p % s;
            let (mut num, mut gain) = (Complex64::new(0.0, 0.0), 0.0);
            for r in 0..rx.num_rx {
                let h = block.h[r * s + sc];
                num += h.conj() * rx.antenna(r)[p];
                gain += h.norm_sqr();
            }
            tmp.clear();
            if gain > 0.0 {
                // LMMSE estimate ΣH*y/(G+n0) scaled by (G+n0)/G is unbiased
                // with residual noise variance n0/G.
                demap_maxlog(num / gain, (block.n0 / gain).max(f64::MIN_POSITIVE), &points, &mut tmp);
            } else {
                tmp.resize(link.bits_per_symbol(), 0.0);
            }
            out.extend(tmp.iter().map(|&v| v.clamp(-GENIE_LLR_LIMIT, GENIE_LLR_LIMIT) as f32));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub blocks: u64,
    pub block_errors: u64,
    pub bit_errors: u64,
}

impl Counts {
    pub fn add(&mut self, o: &Counts) {
        self.blocks += o.blocks;
        self.block_errors += o.block_errors;
        self.bit_errors += o.bit_errors;
    }
}

/// Runs independent jobs, returning results in job order.
pub trait Executor {
    /// Jobs submitted together per round; only affects speed.
    fn width(&self) -> usize;
    fn run(&self, jobs: &[u64], f: &(dyn Fn(u64) -> Result<Counts> + Sync)) -> Vec<Result<Counts>>;
}

pub struct SerialExecutor;

impl Executor for SerialExecutor {
    fn width(&self) -> usize {
        1
    }

    fn run(&self, jobs: &[u64], f: &(dyn Fn(u64) -> Result<Counts> + Sync)) -> Vec<Result<Counts>> {
        jobs.iter().map(|&j| f(j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub ebno_db: Vec<f64>,
    pub max_blocks: u64,
    /// Stop a point once this many block errors have been seen.
    pub max_block_errors: u64,
    /// Blocks per job; the stopping rule is checked between jobs.
    pub batch_blocks: u64,
    pub decoder_iters: usize,
    pub seed: u64,
}

impl EvalConfig {
    /// -4..8 dB in 1 dB steps.
    pub fn default_grid() -> Vec<f64> {
        (-4..=8).map(f64::from).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ebno_db.is_empty() || self.max_blocks == 0 || self.batch_blocks == 0 || self.decoder_iters == 0 {
            return Err(Error::Config("evaluation needs Eb/N0 points and positive block, batch and iteration limits".into()));
        }
        if self.ebno_db.iter().any(|e| e.is_nan()) {
            return Err(Error::Config("Eb/N0 point is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlerPoint {
    pub ebno_db: f64,
    pub counts: Counts,
}

impl BlerPoint {
    pub fn bler(&self) -> f64 {
        self.counts.block_errors as f64 / self.counts.blocks as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlerCurve {
    pub label: String,
    pub points: Vec<BlerPoint>,
}

/// Decodes one block and counts info-bit errors.
pub fn evaluate_block(receiver: &dyn Receiver, link: &Link, block: &Block, decoder_iters: usize) -> Result<Counts> {
    let llrs = receiver.llrs(link, block)?;
    let decoded = link.code().decode(&llrs, decoder_iters)?;
    let bit_errors = decoded.info.iter().zip(&block.info).filter(|(a, b)| a != b).count() as u64;
    Ok(Counts { blocks: 1, block_errors: u64::from(bit_errors > 0), bit_errors })
}

/// Every block draws from its own stream derived from `(seed, point, block)`,
/// so results are identical for any executor and any receiver sees the same
/// channel and noise realizations.
pub fn run_bler(
    receiver: &dyn Receiver,
    link: &Link,
    cfg: &EvalConfig,
    label: &str,
    exec: &dyn Executor,
) -> Result<BlerCurve> {
    cfg.validate()?;
    let mut points = Vec::with_capacity(cfg.ebno_db.len());
    let num_batches = cfg.max_blocks.div_ceil(cfg.batch_blocks);
    for (pi, &ebno) in cfg.ebno_db.iter().enumerate() {
        let job = |b: u64| -> Result<Counts> {
            let mut c = Counts::default();
            for blk in b * cfg.batch_blocks..((b + 1) * cfg.batch_blocks).min(cfg.max_blocks) {
                let mut rng = eval_block(cfg.seed, pi, blk);
                let block = link.transmit(ebno, &mut rng)?;
                c.add(&evaluate_block(receiver, link, &block, cfg.decoder_iters)?);
            }
            Ok(c)
        };
        let mut total = Counts::default();
        let mut next = 0;
        'point: while next < num_batches {
            let round: Vec<u64> = (next..(next + exec.width().max(1) as u64).min(num_batches)).collect();
            next += round.len() as u64;
            for r in exec.run(&round, &job) {
                total.add(&r?);
                if total.block_errors >= cfg.max_block_errors {
                    break 'point;
                }
            }
        }
        points.push(BlerPoint { ebno_db: ebno, counts: total });
    }
    Ok(BlerCurve { label: label.into(), points })
}

/// Uncoded bit errors of hard decisions on the receiver's LLRs, with the
/// noise level set for an uncoded (rate 1) link.
pub fn uncoded_ber(receiver: &dyn Receiver, link: &Link, ebno_db: f64, min_bits: u64, seed: u64) -> Result<(u64, u64)> {
    let n0 = crate::channel::ebno_to_n0(ebno_db, link.bits_per_symbol(), 1.0)?;
    let (mut errors, mut bits) = (0u64, 0u64);
    let mut blk = 0;
    while bits < min_bits {
        let mut rng = eval_block(seed, 0, blk);
        let block = link.transmit_n0(n0, &mut rng)?;
        let llrs = receiver.llrs(link, &block)?;
        errors += llrs.iter().zip(&block.coded).filter(|(&l, &b)| u8::from(l > 0.0) != b).count() as u64;
        bits += llrs.len() as u64;
        blk += 1;
    }
    Ok((errors, bits))
}

/// `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// Uncoded Gray-mapped QPSK bit error probability over AWGN.
pub fn qpsk_awgn_ber(ebno_db: f64) -> f64 {
    q_function(libm::sqrt(2.0 * libm::pow(10.0, ebno_db / 10.0)))
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
