//! OFDM resource-grid layout.
//!
//! The grid is `F` OFDM symbols by `S` subcarriers. Whole OFDM symbols carry
//! pilots, the lowest `guard_lo` and highest `guard_hi` subcarriers are left
//! empty, and every other resource element (RE) carries data.
//!
//! Data REs are always visited in one canonical order: OFDM symbol outer,
//! subcarrier inner, and the bits of one RE innermost. The mapper, the loss
//! and the decoder all rely on it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::qam::{qam_map, Modulation};
use crate::rng::{seeded, stream};
use crate::{Error, Result};
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub num_symbols: usize,
    pub num_subcarriers: usize,
    pub guard_lo: usize,
    pub guard_hi: usize,
    pub pilot_symbols: Vec<usize>,
    pub scs_khz: f64,
    pub pilot_seed: u64,
}

pub const DEFAULT_PILOT_SEED: u64 = 0x5EED_0FD1_1075;

impl GridConfig {
    /// 14 symbols x 128 subcarriers, guards 5 + 6, pilots on symbols 2 and 11.
    pub fn full_scale(scs_khz: f64) -> Self {
        Self {
            num_symbols: 14,
            num_subcarriers: 128,
            guard_lo: 5,
            guard_hi: 6,
            pilot_symbols: vec![2, 11],
            scs_khz,
            pilot_seed: DEFAULT_PILOT_SEED,
        }
    }

    /// 14 symbols x 32 subcarriers, guards 2 + 3.
    pub fn desk(scs_khz: f64) -> Self {
        Self { num_subcarriers: 32, guard_lo: 2, guard_hi: 3, ..Self::full_scale(scs_khz) }
    }

    /// 14 symbols x 16 subcarriers, guards 2 + 3. Used for gradient checks.
    pub fn tiny(scs_khz: f64) -> Self {
        Self { num_subcarriers: 16, ..Self::desk(scs_khz) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_symbols == 0 || self.num_subcarriers == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if self.guard_lo + self.guard_hi >= self.num_subcarriers {
            return Err(Error::Config(format!(
                "guards {} + {} leave no subcarriers out of {}",
                self.guard_lo, self.guard_hi, self.num_subcarriers
            )));
        }
        let mut p = self.pilot_symbols.clone();
        p.sort_unstable();
        p.dedup();
        if p.len() != self.pilot_symbols.len() || p.iter().any(|&s| s >= self.num_symbols) {
            return Err(Error::Config(format!("invalid pilot symbol indices {:?}", self.pilot_symbols)));
        }
        if p.len() == self.num_symbols {
            return Err(Error::Config("every OFDM symbol is a pilot symbol".into()));
        }
        if !(self.scs_khz > 0.0) {
            return Err(Error::Config(format!("subcarrier spacing {} kHz must be positive", self.scs_khz)));
        }
        Ok(())
    }

    pub fn res_per_grid(&self) -> usize {
        self.num_symbols * self.num_subcarriers
    }

    pub fn used_subcarriers(&self) -> usize {
        self.num_subcarriers - self.guard_lo - self.guard_hi
    }

    pub fn data_symbols(&self) -> usize {
        self.num_symbols - self.pilot_symbols.len()
    }

    pub fn data_re_count(&self) -> usize {
        self.used_subcarriers() * self.data_symbols()
    }

    pub fn is_pilot_symbol(&self, symbol: usize) -> bool {
        self.pilot_symbols.contains(&symbol)
    }

    pub fn is_guard(&self, subcarrier: usize) -> bool {
        subcarrier < self.guard_lo || subcarrier >= self.num_subcarriers - self.guard_hi
    }

    /// Flat `symbol * S + subcarrier` indices of the data REs in canonical order.
    pub fn data_positions(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.data_re_count());
        for f in (0..self.num_symbols).filter(|&f| !self.is_pilot_symbol(f)) {
            for s in self.guard_lo..self.num_subcarriers - self.guard_hi {
                out.push(f * self.num_subcarriers + s);
            }
        }
        out
    }

    /// Flat indices of the pilot REs, symbol outer, subcarrier inner.
    pub fn pilot_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for &f in &self.pilot_symbols {
            for s in self.guard_lo..self.num_subcarriers - self.guard_hi {
                out.push(f * self.num_subcarriers + s);
            }
        }
        out
    }

    /// Seeded QPSK pilot sequence, one value per pilot position.
    pub fn pilot_values(&self) -> Vec<Complex64> {
        let mut rng = seeded(self.pilot_seed, stream::PILOTS);
        let bits: Vec<u8> = (0..2 * self.pilot_positions().len()).map(|_| rng.random_range(0..2u8)).collect();
        qam_map(&bits, Modulation::Qpsk).expect("even bit count")
    }
}

/// Transmitted grid, `[F, S]` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TxGrid {
    pub num_symbols: usize,
    pub num_subcarriers: usize,
    pub data: Vec<Complex64>,
}

/// Received grid, `[N_rx, F, S]` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RxGrid {
    pub num_rx: usize,
    pub num_symbols: usize,
    pub num_subcarriers: usize,
    pub data: Vec<Complex64>,
}

impl RxGrid {
    pub fn antenna(&self, r: usize) -> &[Complex64] {
        let n = self.num_symbols * self.num_subcarriers;
        &self.data[r * n..(r + 1) * n]
    }
}

/// Places data symbols and pilots onto an empty grid.
pub fn build_grid(symbols: &[Complex64], cfg: &GridConfig) -> Result<TxGrid> {
    cfg.validate()?;
    let positions = cfg.data_positions();
    if symbols.len() != positions.len() {
        return Err(Error::Usage(format!("grid holds {} data REs but {} symbols were given", positions.len(), symbols.len())));
    }
    let mut data = vec![Complex64::new(0.0, 0.0); cfg.res_per_grid()];
    for (&p, &x) in positions.iter().zip(symbols) {
        data[p] = x;
    }
    for (p, x) in cfg.pilot_positions().into_iter().zip(cfg.pilot_values()) {
        data[p] = x;
    }
    Ok(TxGrid { num_symbols: cfg.num_symbols, num_subcarriers: cfg.num_subcarriers, data })
}

/// Pulls the data REs out of values laid out as `[.., F, S, inner]`, keeping
/// `inner` consecutive values per RE. Leading dimensions are processed in
/// order.
pub fn extract_data_res_with_inner<T: Copy>(values: &[T], cfg: &GridConfig, inner: usize) -> Result<Vec<T>> {
    let block = cfg.res_per_grid() * inner;
    if inner == 0 || !values.len().is_multiple_of(block) {
        return Err(Error::Shape(format!(
            "{} values do not end in [{}, {}, {inner}]",
            values.len(),
            cfg.num_symbols,
            cfg.num_subcarriers
        )));
    }
    let positions = cfg.data_positions();
    let mut out = Vec::with_capacity(values.len() / block * positions.len() * inner);
    for chunk in values.chunks_exact(block) {
        for &p in &positions {
            out.extend_from_slice(&chunk[p * inner..(p + 1) * inner]);
        }
    }
    Ok(out)
}

/// Data REs of values laid out as `[.., F, S]`.
pub fn extract_data_res<T: Copy>(values: &[T], cfg: &GridConfig) -> Result<Vec<T>> {
    extract_data_res_with_inner(values, cfg, 1)
}
