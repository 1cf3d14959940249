//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nrx_core::eval::EvalConfig;
use nrx_core::link::Domain;
use nrx_core::numerics::AdamHyper;
use nrx_core::phy::{GridConfig, Modulation};
use nrx_core::receiver::{ModelSpec, TrainConfig};
use nrx_core::transfer::Technique;
use serde::{Deserialize, Serialize};

use crate::profiles::{resolve_channel, ResolvedChannel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Widths 8/16 on the 14 x 32 grid.
    Toy,
    /// Widths 16/32 on the 14 x 32 grid.
    Desk,
    /// Widths 128/256 on the 14 x 128 grid.
    Full,
}

impl Scale {
    pub fn model_spec(self, bits_per_symbol: usize, num_rx: usize) -> ModelSpec {
        let spec = match self {
            Scale::Toy => ModelSpec::toy(bits_per_symbol),
            Scale::Desk => ModelSpec::desk(bits_per_symbol),
            Scale::Full => ModelSpec::full_scale(bits_per_symbol),
        };
        ModelSpec { num_rx, ..spec }
    }

    pub fn grid(self, scs_khz: f64) -> GridConfig {
        match self {
            Scale::Toy | Scale::Desk => GridConfig::desk(scs_khz),
            Scale::Full => GridConfig::full_scale(scs_khz),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub modulation: Modulation,
    /// Shipped profile name, `flat`, `umi_approx`, `mixed_cdl` or a file path.
    pub channel: String,
    pub scs_khz: f64,
}

impl DomainConfig {
    pub fn label(&self) -> String {
        let chan = Path::new(&self.channel).file_stem().map_or(self.channel.clone(), |s| s.to_string_lossy().into_owned());
        format!("{}_{}_{}khz", self.modulation.name(), chan, self.scs_khz)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    /// Total training grids; ignored for adaptation, whose budget is
    /// `alpha` times the source budget.
    #[serde(default)]
    pub samples: u64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_ebno_range")]
    pub ebno_db: [f64; 2],
}

fn default_lr() -> f64 {
    1e-3
}

fn default_ebno_range() -> [f64; 2] {
    [-4.0, 8.0]
}

impl TrainSection {
    pub fn to_config(&self, samples: u64, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            samples,
            adam: AdamHyper { lr: self.lr, ..AdamHyper::default() },
            ebno_db: (self.ebno_db[0], self.ebno_db[1]),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub modulation: Modulation,
    pub channel: String,
    pub scs_khz: f64,
    /// Use an existing checkpoint instead of training one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub train: TrainSection,
}

impl SourceSection {
    pub fn domain(&self) -> DomainConfig {
        DomainConfig { modulation: self.modulation, channel: self.channel.clone(), scs_khz: self.scs_khz }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    WithoutTl,
    ModelTransfer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptSection {
    #[serde(default)]
    pub techniques: Vec<Technique>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default = "default_freeze_k")]
    pub freeze_k: usize,
    #[serde(default)]
    pub benchmarks: Vec<Benchmark>,
    /// Batch size, learning rate and Eb/N0 range for target training;
    /// defaults to the source settings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
}

fn default_freeze_k() -> usize {
    2
}

impl Default for AdaptSection {
    fn default() -> Self {
        Self { techniques: Vec::new(), alphas: Vec::new(), freeze_k: 2, benchmarks: Vec::new(), train: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "EvalConfig::default_grid")]
    pub ebno_db: Vec<f64>,
    pub max_blocks: u64,
    #[serde(default = "default_max_errors")]
    pub max_block_errors: u64,
    #[serde(default = "default_batch_blocks")]
    pub batch_blocks: u64,
    #[serde(default = "default_decoder_iters")]
    pub decoder_iters: usize,
    /// Defaults to the experiment seed plus two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Also evaluate the genie LMMSE receiver on every target.
    #[serde(default)]
    pub genie: bool,
    /// Checkpoint evaluated by the `eval` command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

fn default_max_errors() -> u64 {
    100
}

fn default_batch_blocks() -> u64 {
    10
}

fn default_decoder_iters() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub scale: Scale,
    pub seed: u64,
    #[serde(default = "default_num_rx")]
    pub num_rx: usize,
    #[serde(default = "default_ldpc_seed")]
    pub ldpc_seed: u64,
    pub source: SourceSection,
    #[serde(default)]
    pub targets: Vec<DomainConfig>,
    #[serde(default)]
    pub adapt: AdaptSection,
    pub eval: EvalSection,
}

fn default_num_rx() -> usize {
    2
}

fn default_ldpc_seed() -> u64 {
    1
}

/// A domain ready for simulation.
pub struct BuiltDomain {
    pub domain: Domain,
    pub channel: ResolvedChannel,
}

impl Experiment {
    /// Reads an experiment file, or the `config` table of a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text)?;
        let exp: Experiment = match value.get("config") {
            Some(cfg) => cfg.clone().try_into()?,
            None => toml::Value::Table(value).try_into()?,
        };
        exp.validate()?;
        Ok(exp)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.train.batch_size == 0 {
            bail!("source.train.batch_size must be positive");
        }
        if let Some(t) = &self.adapt.train {
            if t.batch_size == 0 {
                bail!("adapt.train.batch_size must be positive");
            }
        }
        if self.adapt.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            bail!("adapt.alphas must lie in [0, 1]");
        }
        if self.adapt.benchmarks.contains(&Benchmark::WithoutTl) && self.adapt.alphas.contains(&0.0) {
            bail!("without_tl needs alpha > 0");
        }
        self.eval_config().validate()?;
        Ok(())
    }

    pub fn source_seed(&self) -> u64 {
        self.seed
    }

    /// Seed of every adaptation and from-scratch target run, so that all
    /// variants see the same target data.
    pub fn target_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn eval_config(&self) -> EvalConfig {
        let e = &self.eval;
        EvalConfig {
            ebno_db: e.ebno_db.clone(),
            max_blocks: e.max_blocks,
            max_block_errors: e.max_block_errors,
            batch_blocks: e.batch_blocks,
            decoder_iters: e.decoder_iters,
            seed: e.seed.unwrap_or(self.seed.wrapping_add(2)),
        }
    }

    pub fn target_train(&self) -> &TrainSection {
        self.adapt.train.as_ref().unwrap_or(&self.source.train)
    }

    pub fn build_domain(&self, d: &DomainConfig) -> Result<BuiltDomain> {
        let channel = resolve_channel(&d.channel)?;
        let domain = Domain {
            grid: self.scale.grid(d.scs_khz),
            modulation: d.modulation,
            channel: channel.model.clone(),
            num_rx: self.num_rx,
            ldpc_seed: self.ldpc_seed,
        };
        domain.grid.validate()?;
        Ok(BuiltDomain { domain, channel })
    }

    pub fn model_spec(&self, m: Modulation) -> ModelSpec {
        self.scale.model_spec(m.bits_per_symbol(), self.num_rx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const SAMPLE: &str = r#"
name = "mod"
scale = "toy"
seed = 3

[source]
modulation = "qpsk"
channel = "cdl_e_like"
scs_khz = 30.0
[source.train]
batch_size = 4
samples = 40

[[targets]]
modulation = "16qam"
channel = "cdl_e_like"
scs_khz = 30.0

[adapt]
techniques = ["fine_tuning", "feature_extraction"]
alphas = [0.1]
benchmarks = ["without_tl", "model_transfer"]

[eval]
ebno_db = [7.0, 8.0]
max_blocks = 20
"#;

    #[test]
    fn parses_with_defaults() {
        let e = Experiment::parse(SAMPLE).unwrap();
        assert_eq!(e.num_rx, 2);
        assert_eq!(e.adapt.freeze_k, 2);
        assert_eq!(e.source.train.lr, 1e-3);
        assert_eq!(e.source.train.ebno_db, [-4.0, 8.0]);
        assert_eq!(e.eval.max_block_errors, 100);
        assert_eq!(e.targets[0].label(), "16qam_cdl_e_like_30khz");
    }

    #[test]
    fn toml_round_trip() {
        let e = Experiment::parse(SAMPLE).unwrap();
        assert_eq!(Experiment::parse(&e.to_toml()).unwrap(), e);
        let mut table = toml::Table::new();
        table.insert("version".into(), "x".into());
        table.insert("config".into(), toml::Value::try_from(&e).unwrap());
        let manifest = toml::to_string(&table).unwrap();
        assert_eq!(Experiment::parse(&manifest).unwrap(), e);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_alpha() {
        assert!(Experiment::parse(&SAMPLE.replace("seed = 3", "seed = 3\nsed = 4")).is_err());
        assert!(Experiment::parse(&SAMPLE.replace("alphas = [0.1]", "alphas = [1.5]")).is_err());
    }
}
