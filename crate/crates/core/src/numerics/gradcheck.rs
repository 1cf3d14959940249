//! Central-difference verification of analytic gradients.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;

use crate::rng::seeded;

/// One contiguous block of parameters, e.g. the weights of a convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGroup {
    /// Owning layer, e.g. `resnet_2`.
    pub layer: String,
    /// Layer kind used to aggregate the report, e.g. `conv` or `layer_norm`.
    pub kind: &'static str,
    pub len: usize,
}

/// A differentiable scalar function of a set of parameter groups.
pub trait GradProbe {
    fn groups(&self) -> Vec<ParamGroup>;
    fn get(&self, group: usize, index: usize) -> f64;
    fn set(&mut self, group: usize, index: usize, value: f64);
    fn loss(&self) -> f64;
    /// Analytic gradient, one vector per group.
    fn gradient(&self) -> Vec<Vec<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error, so that gradients that are
    /// zero up to rounding do not produce spurious failures.
    pub floor: f64,
    /// Check at most this many randomly chosen entries per group.
    pub max_per_group: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-5, tolerance: 1e-4, floor: 1e-6, max_per_group: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupError {
    pub layer: String,
    pub kind: &'static str,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }

    /// Maximum relative error per layer kind, in first-seen order.
    pub fn by_kind(&self) -> Vec<(&'static str, f64)> {
        let mut out: Vec<(&'static str, f64)> = Vec::new();
        for g in &self.groups {
            match out.iter_mut().find(|(k, _)| *k == g.kind) {
                Some((_, e)) => *e = e.max(g.max_rel_error),
                None => out.push((g.kind, g.max_rel_error)),
            }
        }
        out
    }

    /// Group with the largest error.
    pub fn worst(&self) -> Option<&GroupError> {
        self.groups.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }

    /// Layers holding at least one entry above tolerance.
    pub fn flagged_layers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for g in self.groups.iter().filter(|g| g.max_rel_error >= self.tolerance) {
            if !out.contains(&g.layer.as_str()) {
                out.push(&g.layer);
            }
        }
        out
    }

    pub fn checked(&self) -> usize {
        self.groups.iter().map(|g| g.checked).sum()
    }
}

/// Compares the analytic gradient of `probe` against central differences.
pub fn finite_diff_check<P: GradProbe>(probe: &mut P, cfg: &GradCheckConfig) -> GradCheckReport {
    let analytic = probe.gradient();
    let mut rng = seeded(cfg.seed, 0);
    let mut groups = Vec::new();
    for (gi, group) in probe.groups().into_iter().enumerate() {
        let indices: Vec<usize> = match cfg.max_per_group {
            Some(cap) if cap < group.len => {
                let mut v = sample(&mut rng, group.len, cap).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..group.len).collect(),
        };
        let mut worst = (0.0f64, 0usize);
        for &i in &indices {
            let orig = probe.get(gi, i);
            probe.set(gi, i, orig + cfg.step);
            let plus = probe.loss();
            probe.set(gi, i, orig - cfg.step);
            let minus = probe.loss();
            probe.set(gi, i, orig);
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic[gi][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            if rel > worst.0 || !rel.is_finite() {
                worst = (if rel.is_finite() { rel } else { f64::INFINITY }, i);
            }
        }
        groups.push(GroupError {
            layer: group.layer,
            kind: group.kind,
            max_rel_error: worst.0,
            worst_index: worst.1,
            checked: indices.len(),
        });
    }
    GradCheckReport { groups, tolerance: cfg.tolerance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{conv2d, conv2d_backward, ConvLayer, Tensor};
    use crate::rng::seeded;
    use alloc::vec;
    use rand::Rng;

    /// `loss = <c, conv(x)>`: linear in the weights.
    struct LinearConv {
        layer: ConvLayer<f64>,
        input: Tensor<f64>,
        coeff: Tensor<f64>,
        flip_sign: bool,
    }

    impl GradProbe for LinearConv {
        fn groups(&self) -> Vec<ParamGroup> {
            vec![
                ParamGroup { layer: "conv".into(), kind: "conv", len: self.layer.weight.len() },
                ParamGroup { layer: "conv".into(), kind: "conv", len: self.layer.bias.len() },
            ]
        }
        fn get(&self, g: usize, i: usize) -> f64 {
            [&self.layer.weight, &self.layer.bias][g].data()[i]
        }
        fn set(&mut self, g: usize, i: usize, v: f64) {
            [&mut self.layer.weight, &mut self.layer.bias][g].data_mut()[i] = v;
        }
        fn loss(&self) -> f64 {
            conv2d(&self.input, &self.layer).unwrap().data().iter().zip(self.coeff.data()).map(|(a, b)| a * b).sum()
        }
        fn gradient(&self) -> Vec<Vec<f64>> {
            let (_, g) = conv2d_backward(&self.coeff, Some(&self.input), &self.layer).unwrap();
            let s = if self.flip_sign { -1.0 } else { 1.0 };
            vec![
                g.weight.data().iter().map(|v| s * v).collect(),
                g.bias.data().iter().map(|v| s * v).collect(),
            ]
        }
    }

    fn probe(flip_sign: bool) -> LinearConv {
        let mut rng = seeded(5, 0);
        let layer = ConvLayer::glorot(2, 3, (3, 3), (1, 1), &mut rng);
        let mut rand_t = |shape: &[usize]| {
            let n = shape.iter().product();
            Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let input = rand_t(&[2, 5, 6]);
        let coeff = rand_t(&[3, 5, 6]);
        LinearConv { layer, input, coeff, flip_sign }
    }

    #[test]
    fn linear_conv_is_exact() {
        let report = finite_diff_check(&mut probe(false), &GradCheckConfig::default());
        assert!(report.max_rel_error() < 1e-8, "{}", report.max_rel_error());
        assert!(report.passed());
        assert_eq!(report.checked(), 2 * 3 * 9 + 3);
    }

    #[test]
    fn sign_flip_is_flagged() {
        let report = finite_diff_check(&mut probe(true), &GradCheckConfig::default());
        assert!(!report.passed());
        assert_eq!(report.flagged_layers(), ["conv"]);
        assert!(report.worst().unwrap().max_rel_error > 1.0);
    }

    #[test]
    fn sampling_caps_checked_entries() {
        let cfg = GradCheckConfig { max_per_group: Some(5), ..Default::default() };
        let report = finite_diff_check(&mut probe(false), &cfg);
        assert_eq!(report.checked(), 5 + 3);
    }
}
