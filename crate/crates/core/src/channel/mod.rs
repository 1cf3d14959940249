//! Block-fading tapped-delay-line channels in the frequency domain.
//!
//! A realization draws complex tap gains per receive antenna; the channel seen
//! by subcarrier `k` is the discrete Fourier sum of the taps at
//! `f_k = k * scs`, constant over the whole slot. The cyclic prefix is assumed
//! ideal, so applying the channel is a per-RE multiplication.

mod profile;

pub use profile::{ChannelModel, ChannelProfile, Tap, UmiApprox};

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::phy::{GridConfig, RxGrid, TxGrid};
use crate::{Error, Result};

/// Sampled tap gains, `gains[r * taps + i]` for antenna `r` and tap `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub num_rx: usize,
    pub delays_s: Vec<f64>,
    pub gains: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn num_taps(&self) -> usize {
        self.delays_s.len()
    }

    pub fn antenna_gains(&self, r: usize) -> &[Complex64] {
        let t = self.num_taps();
        &self.gains[r * t..(r + 1) * t]
    }
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = libm::sqrt(variance / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Draws one realization. Antennas fade independently; a tap with a Rician
/// K-factor adds a deterministic zero-phase component of power
/// `P K / (K + 1)` to a diffuse part of power `P / (K + 1)`.
pub fn realize_channel<R: Rng + ?Sized>(model: &ChannelModel, num_rx: usize, rng: &mut R) -> ChannelRealization {
    assert!(num_rx >= 1, "at least one receive antenna is required");
    let drawn;
    let profile = match model {
        ChannelModel::Tdl(p) => p,
        ChannelModel::Mixture { members, .. } => &members[rng.random_range(0..members.len())],
        ChannelModel::UmiApprox(params) => {
            drawn = params.draw_profile(rng);
            &drawn
        }
    };
    let taps = profile.taps();
    let powers = profile.linear_powers();
    let mut gains = Vec::with_capacity(num_rx * taps.len());
    for _ in 0..num_rx {
        for (tap, &p) in taps.iter().zip(powers) {
            let g = match tap.k_factor_db {
                Some(k_db) if k_db.is_infinite() && k_db > 0.0 => Complex64::new(libm::sqrt(p), 0.0),
                Some(k_db) => {
                    let k = libm::pow(10.0, k_db / 10.0);
                    let los = libm::sqrt(p * k / (k + 1.0));
                    Complex64::new(los, 0.0) + complex_gaussian(rng, p / (k + 1.0))
                }
                None => complex_gaussian(rng, p),
            };
            gains.push(g);
        }
    }
    ChannelRealization { num_rx, delays_s: taps.iter().map(|t| t.delay_s).collect(), gains }
}

/// `H[r, k] = sum_i a_{r,i} exp(-j 2 pi k scs tau_i)`, laid out `[N_rx, S]`.
pub fn frequency_response(real: &ChannelRealization, cfg: &GridConfig) -> Vec<Complex64> {
    let scs = cfg.scs_khz * 1e3;
    let mut h = Vec::with_capacity(real.num_rx * cfg.num_subcarriers);
    for r in 0..real.num_rx {
        let gains = real.antenna_gains(r);
        for k in 0..cfg.num_subcarriers {
            let f = k as f64 * scs;
            let mut acc = Complex64::new(0.0, 0.0);
            for (&a, &tau) in gains.iter().zip(&real.delays_s) {
                acc += a * Complex64::from_polar(1.0, -2.0 * PI * f * tau);
            }
            h.push(acc);
        }
    }
    h
}

/// `y[r, f, s] = H[r, s] x[f, s] + w` with `E|w|^2 = n0` on every RE.
pub fn apply_channel_awgn<R: Rng + ?Sized>(
    tx: &TxGrid,
    h: &[Complex64],
    num_rx: usize,
    n0: f64,
    rng: &mut R,
) -> Result<RxGrid> {
    let s = tx.num_subcarriers;
    if h.len() != num_rx * s {
        return Err(Error::Shape(format!("frequency response has {} values, expected {num_rx} x {s}", h.len())));
    }
    if !(n0 >= 0.0) {
        return Err(Error::Config(format!("noise power {n0} must be non-negative")));
    }
    let mut data = Vec::with_capacity(num_rx * tx.data.len());
    for r in 0..num_rx {
        let hr = &h[r * s..(r + 1) * s];
        for (i, &x) in tx.data.iter().enumerate() {
            let mut y = hr[i % s] * x;
            if n0 > 0.0 {
                y += complex_gaussian(rng, n0);
            }
            data.push(y);
        }
    }
    Ok(RxGrid { num_rx, num_symbols: tx.num_symbols, num_subcarriers: s, data })
}

/// Noise power for unit-energy symbols: `n0 = 1 / (10^(ebno/10) K r)`.
pub fn ebno_to_n0(ebno_db: f64, bits_per_symbol: usize, code_rate: f64) -> Result<f64> {
    if ![2, 4, 6].contains(&bits_per_symbol) {
        return Err(Error::Config(format!("{bits_per_symbol} bits per symbol is not supported")));
    }
    if !(code_rate > 0.0 && code_rate <= 1.0) {
        return Err(Error::Config(format!("code rate {code_rate} is outside (0, 1]")));
    }
    Ok(1.0 / (libm::pow(10.0, ebno_db / 10.0) * bits_per_symbol as f64 * code_rate))
}
