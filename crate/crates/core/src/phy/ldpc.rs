//! Regular (3,6) LDPC codes built from a seeded random socket permutation,
//! with a systematic encoder derived by Gaussian elimination over GF(2) and a
//! normalized min-sum decoder.
//!
//! LLRs everywhere in this crate are `log P(b=1)/P(b=0)`: positive values
//! favour a one.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::{seeded, stream};
use crate::{Error, Result};

pub const VAR_DEGREE: usize = 3;
pub const CHECK_DEGREE: usize = 6;
/// Default check-to-variable message scaling of the min-sum decoder.
pub const MIN_SUM_SCALE: f32 = 0.75;

/// Seeds tried before giving up on a construction.
const MAX_CONSTRUCTION_ATTEMPTS: u64 = 64;

/// A rate-1/2 regular LDPC code whose codewords are laid out as
/// `[info bits | parity bits]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    seed: u64,
    /// Variable indices attached to each check.
    checks: Vec<Vec<u32>>,
    /// Row `i` selects the info bits whose sum is parity bit `i`.
    parity_rows: Vec<Vec<u64>>,
}

/// Decoder output.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub info: Vec<u8>,
    /// Zero syndrome reached with every posterior LLR non-zero.
    pub converged: bool,
    pub iterations: usize,
}

impl LdpcCode {
    /// Builds a code of length `n` (even, at least 12). Seeds that produce a
    /// rank-deficient parity-check matrix are skipped in favour of the next
    /// seed; [`LdpcCode::seed`] reports the one that was used.
    pub fn regular(n: usize, seed: u64) -> Result<Self> {
        if n < 2 * CHECK_DEGREE || !n.is_multiple_of(2) {
            return Err(Error::Config(format!("LDPC length {n} must be even and at least {}", 2 * CHECK_DEGREE)));
        }
        for attempt in 0..MAX_CONSTRUCTION_ATTEMPTS {
            let s = seed.wrapping_add(attempt);
            match Self::try_build(n, s) {
                Some(code) => return Ok(code),
                None => log::warn!("LDPC construction seed {s} (n = {n}) rejected, trying next seed"),
            }
        }
        Err(Error::Config(format!("no full-rank LDPC code of length {n} within {MAX_CONSTRUCTION_ATTEMPTS} seeds")))
    }

    fn try_build(n: usize, seed: u64) -> Option<Self> {
        let m = n / 2;
        let mut rng = seeded(seed, stream::LDPC);
        let mut sockets: Vec<u32> = (0..n as u32).flat_map(|v| [v; VAR_DEGREE]).collect();
        sockets.shuffle(&mut rng);
        if !remove_repeats(&mut sockets, &mut rng) {
            return None;
        }
        let checks: Vec<Vec<u32>> = sockets.chunks_exact(CHECK_DEGREE).map(|c| c.to_vec()).collect();

        // Reduced row echelon form of H.
        let words = n.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = checks
            .iter()
            .map(|c| {
                let mut r = vec![0u64; words];
                for &v in c {
                    r[v as usize / 64] ^= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::with_capacity(m);
        let mut row = 0;
        for col in 0..n {
            if row == m {
                break;
            }
            let (w, b) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (row..m).find(|&r| rows[r][w] & b != 0) else { continue };
            rows.swap(row, p);
            let pivot_row = rows[row].clone();
            for (r, other) in rows.iter_mut().enumerate() {
                if r != row && other[w] & b != 0 {
                    other.iter_mut().zip(&pivot_row).for_each(|(a, p)| *a ^= p);
                }
            }
            pivots.push(col);
            row += 1;
        }
        if pivots.len() < m {
            return None;
        }

        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&c| is_pivot[c] = true);
        let info_cols: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let k = info_cols.len();
        let mut new_index = vec![0u32; n];
        for (pos, &old) in info_cols.iter().chain(&pivots).enumerate() {
            new_index[old] = pos as u32;
        }
        let kw = k.div_ceil(64);
        let parity_rows = rows
            .iter()
            .map(|r| {
                let mut packed = vec![0u64; kw];
                for (j, &c) in info_cols.iter().enumerate() {
                    if r[c / 64] >> (c % 64) & 1 == 1 {
                        packed[j / 64] |= 1 << (j % 64);
                    }
                }
                packed
            })
            .collect();
        let checks = checks.into_iter().map(|c| c.into_iter().map(|v| new_index[v as usize]).collect()).collect();
        Some(Self { n, k, seed, checks, parity_rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Construction seed that produced this code.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn checks(&self) -> &[Vec<u32>] {
        &self.checks
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::Usage(format!("expected {} info bits, got {}", self.k, info.len())));
        }
        let mut packed = vec![0u64; self.k.div_ceil(64)];
        for (j, &b) in info.iter().enumerate() {
            if b > 1 {
                return Err(Error::Usage(format!("bit value {b} is not 0 or 1")));
            }
            packed[j / 64] |= (b as u64) << (j % 64);
        }
        let mut cw = Vec::with_capacity(self.n);
        cw.extend_from_slice(info);
        for row in &self.parity_rows {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw.push((ones & 1) as u8);
        }
        Ok(cw)
    }

    /// `H c = 0` over GF(2).
    pub fn is_codeword(&self, cw: &[u8]) -> bool {
        cw.len() == self.n && self.checks.iter().all(|c| c.iter().map(|&v| cw[v as usize]).fold(0, |a, b| a ^ b) == 0)
    }

    /// Min-sum decoding with early stop once the hard decision satisfies every
    /// check. Ties (a posterior of exactly zero) decide zero and prevent
    /// convergence from being reported.
    pub fn decode(&self, llrs: &[f32], max_iters: usize) -> Result<Decoded> {
        self.decode_scaled(llrs, max_iters, MIN_SUM_SCALE)
    }

    pub fn decode_scaled(&self, llrs: &[f32], max_iters: usize, scale: f32) -> Result<Decoded> {
        if llrs.len() != self.n {
            return Err(Error::Usage(format!("expected {} LLRs, got {}", self.n, llrs.len())));
        }
        if let Some(i) = llrs.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite(format!("decoder input LLR at index {i}")));
        }
        // Internally lambda = log P(0)/P(1).
        let prior: Vec<f32> = llrs.iter().map(|&l| -l).collect();
        let mut posterior = prior.clone();
        let mut hard = vec![0u8; self.n];
        if self.decide(&posterior, &mut hard) {
            return Ok(self.finish(hard, true, 0));
        }
        let edges: usize = self.checks.iter().map(Vec::len).sum();
        let mut v2c = Vec::with_capacity(edges);
        for c in &self.checks {
            v2c.extend(c.iter().map(|&v| prior[v as usize]));
        }
        let mut c2v = vec![0.0f32; edges];
        for iter in 1..=max_iters {
            let mut e = 0;
            for c in &self.checks {
                let msgs = &v2c[e..e + c.len()];
                let (mut min1, mut min2, mut arg) = (f32::INFINITY, f32::INFINITY, 0);
                let mut negative = false;
                for (j, &m) in msgs.iter().enumerate() {
                    let a = m.abs();
                    negative ^= m < 0.0;
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        arg = j;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for (j, &m) in msgs.iter().enumerate() {
                    let mag = scale * if j == arg { min2 } else { min1 };
                    let neg = negative ^ (m < 0.0);
                    c2v[e + j] = if neg { -mag } else { mag };
                }
                e += c.len();
            }
            posterior.copy_from_slice(&prior);
            let mut e = 0;
            for c in &self.checks {
                for (j, &v) in c.iter().enumerate() {
                    posterior[v as usize] += c2v[e + j];
                }
                e += c.len();
            }
            let mut e = 0;
            for c in &self.checks {
                for (j, &v) in c.iter().enumerate() {
                    v2c[e + j] = posterior[v as usize] - c2v[e + j];
                }
                e += c.len();
            }
            if self.decide(&posterior, &mut hard) {
                return Ok(self.finish(hard, true, iter));
            }
        }
        Ok(self.finish(hard, false, max_iters))
    }

    /// Hard decision; true when the result is a codeword with no ties.
    fn decide(&self, lambda: &[f32], hard: &mut [u8]) -> bool {
        let mut decisive = true;
        for (h, &l) in hard.iter_mut().zip(lambda) {
            *h = (l < 0.0) as u8;
            decisive &= l != 0.0;
        }
        decisive && self.is_codeword(hard)
    }

    fn finish(&self, mut hard: Vec<u8>, converged: bool, iterations: usize) -> Decoded {
        hard.truncate(self.k);
        Decoded { info: hard, converged, iterations }
    }

    /// Text export of H: a header line then one line per check listing its
    /// variable indices (codeword order).
    pub fn to_index_lists(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# ldpc n={} k={} seed={} dv={VAR_DEGREE} dc={CHECK_DEGREE}", self.n, self.k, self.seed);
        for c in &self.checks {
            let mut first = true;
            for v in c {
                if !first {
                    s.push(' ');
                }
                let _ = write!(s, "{v}");
                first = false;
            }
            s.push('\n');
        }
        s
    }
}

/// Reshuffles sockets until no check connects to the same variable twice.
fn remove_repeats<R: Rng>(sockets: &mut [u32], rng: &mut R) -> bool {
    for _ in 0..100 * sockets.len() {
        let Some(bad) = (0..sockets.len()).find(|&i| {
            let c = i / CHECK_DEGREE;
            let base = c * CHECK_DEGREE;
            (base..i).any(|j| sockets[j] == sockets[i])
        }) else {
            return true;
        };
        let other = rng.random_range(0..sockets.len());
        let (cb, co) = (bad / CHECK_DEGREE, other / CHECK_DEGREE);
        if cb == co {
            continue;
        }
        let (vb, vo) = (sockets[bad], sockets[other]);
        let clash_b = (0..CHECK_DEGREE).any(|j| sockets[cb * CHECK_DEGREE + j] == vo);
        let clash_o = (0..CHECK_DEGREE).any(|j| sockets[co * CHECK_DEGREE + j] == vb);
        if !clash_b && !clash_o {
            sockets.swap(bad, other);
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_bits(k: usize, seed: u64) -> Vec<u8> {
        let mut rng = seeded(seed, 0);
        (0..k).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn structure_is_regular_and_full_rank() {
        let code = LdpcCode::regular(96, 1).unwrap();
        assert_eq!((code.n(), code.k()), (96, 48));
        assert_eq!(code.rate(), 0.5);
        let mut degree = vec![0; 96];
        for c in code.checks() {
            assert_eq!(c.len(), CHECK_DEGREE);
            let mut sorted = c.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), CHECK_DEGREE);
            c.iter().for_each(|&v| degree[v as usize] += 1);
        }
        assert!(degree.iter().all(|&d| d == VAR_DEGREE));
    }

    #[test]
    fn zero_info_gives_zero_codeword() {
        let code = LdpcCode::regular(648, 1).unwrap();
        assert!(code.encode(&vec![0; code.k()]).unwrap().iter().all(|&b| b == 0));
    }

    #[test]
    fn codewords_are_systematic_and_valid() {
        let code = LdpcCode::regular(648, 1).unwrap();
        for s in 0..20 {
            let info = random_bits(code.k(), s);
            let cw = code.encode(&info).unwrap();
            assert_eq!(&cw[..code.k()], &info[..]);
            assert!(code.is_codeword(&cw));
        }
    }

    #[test]
    fn noiseless_llrs_decode_immediately() {
        let code = LdpcCode::regular(648, 3).unwrap();
        let info = random_bits(code.k(), 9);
        let cw = code.encode(&info).unwrap();
        let llrs: Vec<f32> = cw.iter().map(|&b| if b == 1 { 20.0 } else { -20.0 }).collect();
        let d = code.decode(&llrs, 20).unwrap();
        assert!(d.converged && d.iterations <= 1);
        assert_eq!(d.info, info);
    }

    #[test]
    fn every_single_flip_is_corrected() {
        let code = LdpcCode::regular(48, 2).unwrap();
        let info = random_bits(code.k(), 4);
        let cw = code.encode(&info).unwrap();
        for pos in 0..code.n() {
            let mut llrs: Vec<f32> = cw.iter().map(|&b| if b == 1 { 10.0 } else { -10.0 }).collect();
            llrs[pos] = -llrs[pos];
            let d = code.decode(&llrs, 20).unwrap();
            assert!(d.converged, "flip at {pos}");
            assert_eq!(d.info, info, "flip at {pos}");
        }
    }

    #[test]
    fn all_zero_llrs_do_not_converge() {
        let code = LdpcCode::regular(96, 1).unwrap();
        let a = code.decode(&vec![0.0; 96], 20).unwrap();
        let b = code.decode(&vec![0.0; 96], 20).unwrap();
        assert!(!a.converged);
        assert_eq!(a, b);
        assert!(a.info.iter().all(|&b| b == 0));
    }

    #[test]
    fn wrong_lengths_are_usage_errors() {
        let code = LdpcCode::regular(96, 1).unwrap();
        assert!(matches!(code.encode(&[0; 3]), Err(Error::Usage(_))));
        assert!(matches!(code.decode(&[0.0; 3], 5), Err(Error::Usage(_))));
        assert!(matches!(LdpcCode::regular(7, 1), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip_thousand_words() {
        let code = LdpcCode::regular(96, 5).unwrap();
        let mut rng = seeded(77, 0);
        for _ in 0..1000 {
            let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
            let cw = code.encode(&info).unwrap();
            assert!(code.is_codeword(&cw));
            let llrs: Vec<f32> = cw.iter().map(|&b| if b == 1 { 20.0 } else { -20.0 }).collect();
            assert_eq!(code.decode(&llrs, 20).unwrap().info, info);
        }
    }

    #[test]
    fn index_list_export_has_one_line_per_check() {
        let code = LdpcCode::regular(48, 2).unwrap();
        let text = code.to_index_lists();
        assert_eq!(text.lines().count(), 1 + 24);
        assert!(text.starts_with("# ldpc n=48 k=24"));
    }

    proptest! {
        #[test]
        fn sum_of_codewords_is_codeword(a in any::<u64>(), b in any::<u64>()) {
            let code = LdpcCode::regular(96, 1).unwrap();
            let ca = code.encode(&random_bits(code.k(), a)).unwrap();
            let cb = code.encode(&random_bits(code.k(), b)).unwrap();
            let sum: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
            prop_assert!(code.is_codeword(&sum));
        }
    }
}
