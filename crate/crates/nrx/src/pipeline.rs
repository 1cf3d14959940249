//! Experiment stages shared by the command-line verbs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nrx_core::eval::{run_bler, Executor, GenieLmmse, NeuralReceiver, Receiver};
use nrx_core::link::Link;
use nrx_core::receiver::{train_source, LogRow, Model};
use nrx_core::transfer::{
    adapt, count_params, model_transfer, prepare, without_tl, AdaptConfig, Checkpoint, Fingerprint, FingerprintPolicy,
    ParamReport, Technique, REFERENCE_COUNTS, AlternativeStructure,
};

use crate::config::{Benchmark, DomainConfig, Experiment, Scale};
use crate::io::{format_curve_csv, format_run_log, load_checked, CurveMeta, OutputDir, CHECKPOINT_EXT};

/// A domain with its link and a short label.
pub struct Target {
    pub config: DomainConfig,
    pub link: Link,
}

pub fn build_target(exp: &Experiment, d: &DomainConfig, out: &mut OutputDir) -> Result<Target> {
    let built = exp.build_domain(d)?;
    out.manifest.profiles.extend(built.channel.checksums);
    Ok(Target { config: d.clone(), link: Link::new(built.domain)? })
}

/// Targets of the experiment; the source domain when none are listed.
pub fn build_targets(exp: &Experiment, out: &mut OutputDir) -> Result<Vec<Target>> {
    let domains = if exp.targets.is_empty() { vec![exp.source.domain()] } else { exp.targets.clone() };
    domains.iter().map(|d| build_target(exp, d, out)).collect()
}

fn progress(tag: String) -> impl FnMut(&LogRow) {
    move |r: &LogRow| {
        if r.iter.is_multiple_of(100) {
            log::info!("{tag}: iter {} L={:.4}", r.iter, r.rate);
        }
    }
}

fn fingerprint(model: &Model<f32>, link: &Link, lineage: String) -> Fingerprint {
    Fingerprint::new(&model.spec, &link.domain().grid, lineage)
}

/// Trains the source model, or loads it when the configuration names a
/// checkpoint, and records it in `out`.
pub fn source_model(exp: &Experiment, out: &mut OutputDir) -> Result<Checkpoint> {
    let src = build_target(exp, &exp.source.domain(), out)?;
    let spec = exp.model_spec(exp.source.modulation);
    if let Some(path) = &exp.source.checkpoint {
        let expected = Fingerprint::new(&spec, &src.link.domain().grid, "");
        return Ok(load_checked(path, &expected, FingerprintPolicy::Strict)?.0);
    }
    let tc = exp.source.train.to_config(exp.source.train.samples, exp.source_seed());
    let outcome = train_source(&spec, &src.link, &tc, &mut progress("source".into())).map_err(|f| {
        anyhow::anyhow!("source training failed after {} iterations: {}", f.log.len(), f.error)
    })?;
    let lineage = format!("train_source(seed={},samples={},domain={})", tc.seed, tc.samples, src.config.label());
    let ckpt = Checkpoint { fingerprint: fingerprint(&outcome.model, &src.link, lineage), model: outcome.model };
    out.write(&format!("source.{CHECKPOINT_EXT}"), &ckpt.encode())?;
    let meta = [("run", "train_source".to_string()), ("domain", src.config.label())];
    out.write("source.log", format_run_log(&meta, &outcome.log).as_bytes())?;
    Ok(ckpt)
}

/// One receiver variant evaluated on a target.
pub struct Variant {
    /// File stem.
    pub name: String,
    /// Value of the CSV `technique` column.
    pub technique: String,
    pub alpha: f64,
    pub checkpoint: Checkpoint,
}

fn alpha_tag(alpha: f64) -> String {
    format!("a{alpha}")
}

/// Adapts the source to one target with every configured technique, alpha
/// and benchmark, writing checkpoints and run logs under `dir`.
pub fn adapt_target(
    exp: &Experiment,
    source: &Checkpoint,
    target: &Target,
    dir: &str,
    out: &mut OutputDir,
) -> Result<Vec<Variant>> {
    let mut variants = Vec::new();
    let tt = exp.target_train();
    let seed = exp.target_seed();
    let source_samples = exp.source.train.samples;
    let k = target.link.bits_per_symbol();
    let label = target.config.label();
    let mut record = |out: &mut OutputDir, name: String, technique: &str, alpha: f64, model: Model<f32>, lineage: String, log: Option<(Vec<LogRow>, u64)>| -> Result<()> {
        let checkpoint = Checkpoint { fingerprint: fingerprint(&model, &target.link, lineage), model };
        out.write(&format!("{dir}/{name}.{CHECKPOINT_EXT}"), &checkpoint.encode())?;
        if let Some((rows, declared)) = log {
            let meta = [
                ("run", technique.to_string()),
                ("alpha", format!("{alpha:?}")),
                ("source_samples", source_samples.to_string()),
                ("budget", declared.to_string()),
                ("domain", label.clone()),
            ];
            out.write(&format!("{dir}/{name}.log"), format_run_log(&meta, &rows).as_bytes())?;
        }
        variants.push(Variant { name, technique: technique.to_string(), alpha, checkpoint });
        Ok(())
    };

    if exp.adapt.benchmarks.contains(&Benchmark::ModelTransfer) {
        let model = model_transfer(&source.model, k, seed);
        let lineage = format!("model_transfer(domain={label}) <- {}", source.fingerprint.lineage);
        record(out, "model_transfer".into(), "model_transfer", 0.0, model, lineage, None)?;
    }
    for &alpha in &exp.adapt.alphas {
        for &technique in &exp.adapt.techniques {
            let cfg = AdaptConfig { technique, freeze_k: exp.adapt.freeze_k, alpha, source_samples, train: tt.to_config(0, seed) };
            let name = format!("{}_{}", technique.name(), alpha_tag(alpha));
            let outcome = adapt(&source.model, &target.link, &cfg, &mut progress(format!("{label} {name}")))
                .map_err(|f| anyhow::anyhow!("{name} failed after {} iterations: {}", f.log.len(), f.error))?;
            let lineage = format!("{}(alpha={alpha:?},seed={seed},domain={label}) <- {}", technique.name(), source.fingerprint.lineage);
            let budget = nrx_core::transfer::scaled_samples(source_samples, alpha)?;
            record(out, name, technique.name(), alpha, outcome.model, lineage, Some((outcome.log, budget)))?;
        }
        if exp.adapt.benchmarks.contains(&Benchmark::WithoutTl) {
            let name = format!("without_tl_{}", alpha_tag(alpha));
            let spec = exp.model_spec(target.config.modulation);
            let outcome = without_tl(&spec, &target.link, source_samples, alpha, &tt.to_config(0, seed), &mut progress(format!("{label} {name}")))
                .map_err(|f| anyhow::anyhow!("{name} failed after {} iterations: {}", f.log.len(), f.error))?;
            let lineage = format!("without_tl(alpha={alpha:?},seed={seed},domain={label})");
            let budget = nrx_core::transfer::scaled_samples(source_samples, alpha)?;
            record(out, name, "without_tl", alpha, outcome.model, lineage, Some((outcome.log, budget)))?;
        }
    }
    Ok(variants)
}

/// Evaluates a receiver and writes `{dir}/{name}.csv`.
pub fn evaluate(
    exp: &Experiment,
    receiver: &dyn Receiver,
    target: &Target,
    meta: &CurveMeta,
    path: &str,
    out: &mut OutputDir,
    exec: &dyn Executor,
) -> Result<nrx_core::eval::BlerCurve> {
    let curve = run_bler(receiver, &target.link, &exp.eval_config(), &meta.technique, exec)?;
    out.write(path, format_curve_csv(&curve, meta).as_bytes())?;
    Ok(curve)
}

pub fn evaluate_variant(
    exp: &Experiment,
    v: &Variant,
    source_fp: &str,
    target: &Target,
    dir: &str,
    out: &mut OutputDir,
    exec: &dyn Executor,
) -> Result<nrx_core::eval::BlerCurve> {
    let meta = CurveMeta {
        technique: v.technique.clone(),
        alpha: v.alpha,
        seed: exp.eval_config().seed,
        source_fp: source_fp.to_string(),
        target_fp: v.checkpoint.fingerprint.digest(),
    };
    let receiver = NeuralReceiver { model: v.checkpoint.model.clone() };
    evaluate(exp, &receiver, target, &meta, &format!("{dir}/{}.csv", v.name), out, exec)
}

pub fn evaluate_genie(exp: &Experiment, target: &Target, dir: &str, out: &mut OutputDir, exec: &dyn Executor) -> Result<()> {
    let meta = CurveMeta {
        technique: "genie_lmmse".into(),
        alpha: 0.0,
        seed: exp.eval_config().seed,
        source_fp: "none".into(),
        target_fp: "none".into(),
    };
    evaluate(exp, &GenieLmmse, target, &meta, &format!("{dir}/genie_lmmse.csv"), out, exec)?;
    Ok(())
}

pub fn target_dir(i: usize, t: &Target) -> String {
    format!("target{i}_{}", t.config.label())
}

/// Checks everything that can fail before training starts.
pub fn preflight(exp: &Experiment) -> Result<()> {
    if let Some(p) = &exp.source.checkpoint {
        if !p.is_file() {
            bail!("source checkpoint {} does not exist", p.display());
        }
    }
    for d in std::iter::once(exp.source.domain()).chain(exp.targets.iter().cloned()) {
        exp.build_domain(&d).with_context(|| format!("domain {}", d.label()))?;
    }
    Ok(())
}

/// Source training (or loading), adaptation to every target and evaluation
/// of every variant.
pub fn sweep(exp: &Experiment, out: &mut OutputDir, exec: &dyn Executor) -> Result<()> {
    preflight(exp)?;
    let source = source_model(exp, out)?;
    let source_fp = source.fingerprint.digest();
    let targets = build_targets(exp, out)?;
    for (i, target) in targets.iter().enumerate() {
        let dir = target_dir(i, target);
        let variants = adapt_target(exp, &source, target, &dir, out)?;
        for v in &variants {
            evaluate_variant(exp, v, &source_fp, target, &dir, out, exec)?;
        }
        if exp.eval.genie {
            evaluate_genie(exp, target, &dir, out, exec)?;
        }
    }
    Ok(())
}

/// Evaluates a stored checkpoint on every target. A checkpoint trained for a
/// different modulation is used with a re-initialized output layer.
pub fn eval_checkpoint(exp: &Experiment, path: &Path, out: &mut OutputDir, exec: &dyn Executor) -> Result<()> {
    let targets = build_targets(exp, out)?;
    for (i, target) in targets.iter().enumerate() {
        let spec = exp.model_spec(target.config.modulation);
        let expected = Fingerprint::new(&spec, &target.link.domain().grid, "");
        let (ckpt, _) = load_checked(path, &expected, FingerprintPolicy::Permissive)?;
        let model = model_transfer(&ckpt.model, target.link.bits_per_symbol(), exp.target_seed());
        let fp = Fingerprint::new(&model.spec, &target.link.domain().grid, format!("eval <- {}", ckpt.fingerprint.lineage));
        let meta = CurveMeta {
            technique: "checkpoint".into(),
            alpha: 0.0,
            seed: exp.eval_config().seed,
            source_fp: ckpt.fingerprint.digest(),
            target_fp: fp.digest(),
        };
        evaluate(exp, &NeuralReceiver { model }, target, &meta, &format!("{}/checkpoint.csv", target_dir(i, target)), out, exec)?;
    }
    Ok(())
}

/// Parameter counts of the base model under fine tuning and of the extended
/// model under the two freezing techniques.
pub fn param_reports(scale: Scale, bits_per_symbol: usize, num_rx: usize) -> Result<Vec<(Technique, ParamReport)>> {
    let spec = scale.model_spec(bits_per_symbol, num_rx);
    let mut rng = nrx_core::rng::seeded(0, nrx_core::rng::stream::INIT);
    let source = Model::<f32>::new(&spec, &mut rng)?;
    Technique::ALL
        .into_iter()
        .map(|t| Ok((t, count_params(&prepare(&source, bits_per_symbol, t, 2, 0)?.0))))
        .collect()
}

pub fn format_param_table(scale: Scale, reports: &[(Technique, ParamReport)]) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let reference = REFERENCE_COUNTS;
    let alt = AlternativeStructure::new().counts();
    let _ = writeln!(s, "scale={scale:?}");
    let _ = writeln!(s, "{:<20} {:>10} {:>10} {:>10} {:>12} {:>14}", "technique", "total", "trainable", "frozen", "reference", "alt_structure");
    for (t, r) in reports {
        let (reference_trainable, alt_trainable) = match t {
            Technique::FineTuning => (reference.fine_tuning, alt.fine_tuning),
            Technique::FineTuningPlus => (reference.fine_tuning_plus, alt.fine_tuning_plus),
            Technique::FeatureExtraction => (reference.feature_extraction, alt.feature_extraction),
        };
        let _ = writeln!(s, "{:<20} {:>10} {:>10} {:>10} {:>12} {:>14}", t.name(), r.total, r.trainable, r.frozen, reference_trainable, alt_trainable);
    }
    let _ = writeln!(s, "reference extended total {} (alt_structure {})", reference.extended_total, alt.extended_total);
    for (t, r) in reports {
        let _ = writeln!(s, "\n[{}]", t.name());
        for l in &r.layers {
            let _ = writeln!(s, "{:<12} {:<7} {:>10} {}", l.name, l.kind.as_str(), l.params, if l.trainable { "trainable" } else { "frozen" });
        }
    }
    s
}
