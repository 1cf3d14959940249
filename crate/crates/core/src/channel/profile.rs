use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap {
    pub delay_s: f64,
    pub power_db: f64,
    /// Rician K-factor of a line-of-sight tap.
    pub k_factor_db: Option<f64>,
}

/// A power-delay profile, normalized so that linear tap powers sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelProfile {
    name: String,
    taps: Vec<Tap>,
    los: bool,
    source: String,
    powers: Vec<f64>,
}

impl ChannelProfile {
    pub fn new(name: impl Into<String>, taps: Vec<Tap>, los: bool, source: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if taps.is_empty() {
            return Err(Error::Profile(format!("profile `{name}` has no taps")));
        }
        let mut prev = 0.0;
        for (i, t) in taps.iter().enumerate() {
            if !t.delay_s.is_finite() || t.delay_s < prev {
                return Err(Error::Profile(format!("profile `{name}`: tap {i} delay {} is negative or out of order", t.delay_s)));
            }
            if t.power_db.is_nan() || t.power_db == f64::INFINITY {
                return Err(Error::Profile(format!("profile `{name}`: tap {i} power {} dB", t.power_db)));
            }
            if t.k_factor_db.is_some_and(f64::is_nan) {
                return Err(Error::Profile(format!("profile `{name}`: tap {i} K-factor is NaN")));
            }
            prev = t.delay_s;
        }
        let linear: Vec<f64> = taps.iter().map(|t| libm::pow(10.0, t.power_db / 10.0)).collect();
        let total: f64 = linear.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Profile(format!("profile `{name}` cannot be normalized (total power {total})")));
        }
        let powers = linear.into_iter().map(|p| p / total).collect();
        Ok(Self { name, taps, los, source: source.into(), powers })
    }

    /// One zero-delay tap: flat Rayleigh fading.
    pub fn flat_rayleigh() -> Self {
        Self::new("flat", alloc::vec![Tap { delay_s: 0.0, power_db: 0.0, k_factor_db: None }], false, "single tap")
            .expect("valid profile")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn los(&self) -> bool {
        self.los
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Normalized linear powers, one per tap.
    pub fn linear_powers(&self) -> &[f64] {
        &self.powers
    }

    /// RMS delay spread of the normalized profile.
    pub fn rms_delay_spread(&self) -> f64 {
        let mean: f64 = self.taps.iter().zip(&self.powers).map(|(t, p)| p * t.delay_s).sum();
        let second: f64 = self.taps.iter().zip(&self.powers).map(|(t, p)| p * t.delay_s * t.delay_s).sum();
        libm::sqrt((second - mean * mean).max(0.0))
    }
}

/// Randomized clustered delay line standing in for an urban-micro NLOS
/// channel. Each realization draws a delay spread, cluster delays and
/// shadowed cluster powers, then renormalizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UmiApprox {
    pub clusters: usize,
    /// Mean and standard deviation of `log10(delay spread / 1 s)`.
    pub lg_ds_mean: f64,
    pub lg_ds_std: f64,
    /// Delay scaling factor `r_tau`.
    pub delay_scaling: f64,
    /// Per-cluster shadowing standard deviation in dB.
    pub shadowing_db: f64,
}

impl Default for UmiApprox {
    /// Urban-micro NLOS statistics at a 3.5 GHz carrier.
    fn default() -> Self {
        Self { clusters: 19, lg_ds_mean: -6.99, lg_ds_std: 0.385, delay_scaling: 2.1, shadowing_db: 3.0 }
    }
}

impl UmiApprox {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || !(self.delay_scaling > 1.0) || !(self.lg_ds_std >= 0.0) || !(self.shadowing_db >= 0.0) {
            return Err(Error::Profile(format!("invalid umi_approx parameters {self:?}")));
        }
        Ok(())
    }

    pub fn draw_profile<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelProfile {
        let z: f64 = StandardNormal.sample(rng);
        let ds = libm::pow(10.0, self.lg_ds_mean + self.lg_ds_std * z);
        let mut delays: Vec<f64> = (0..self.clusters)
            .map(|_| {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                -self.delay_scaling * ds * libm::log(u)
            })
            .collect();
        delays.sort_by(f64::total_cmp);
        let first = delays[0];
        let taps = delays
            .into_iter()
            .map(|d| {
                let tau = d - first;
                let shadow: f64 = StandardNormal.sample(rng);
                let lin = libm::exp(-tau * (self.delay_scaling - 1.0) / (self.delay_scaling * ds));
                Tap { delay_s: tau, power_db: 10.0 * libm::log10(lin) - self.shadowing_db * shadow, k_factor_db: None }
            })
            .collect();
        ChannelProfile::new("umi_approx", taps, false, "randomized clustered delay line").expect("finite draw")
    }
}

/// Channel distribution sampled once per resource grid.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelModel {
    Tdl(ChannelProfile),
    UmiApprox(UmiApprox),
    /// Uniform choice among member profiles per realization.
    Mixture { name: String, members: Vec<ChannelProfile> },
}

impl ChannelModel {
    pub fn name(&self) -> &str {
        match self {
            ChannelModel::Tdl(p) => p.name(),
            ChannelModel::UmiApprox(_) => "umi_approx",
            ChannelModel::Mixture { name, .. } => name,
        }
    }
}
