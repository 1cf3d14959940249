//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion and exits non-zero if any failed. An optional command
//! line argument restricts the run to criteria whose name contains it.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use nrx::config::Experiment;
use nrx::exec::ThreadExecutor;
use nrx::io::{parse_curve_csv, Manifest, OutputDir, RunLog};
use nrx::pipeline;
use nrx::profiles::resolve_channel;
use nrx_core::eval::{run_bler, uncoded_ber, EvalConfig, GenieLmmse, NeuralReceiver, SerialExecutor};
use nrx_core::link::{Domain, Link};
use nrx_core::numerics::{finite_diff_check, AdamHyper, GradCheckConfig};
use nrx_core::phy::{GridConfig, Modulation};
use nrx_core::receiver::{preprocess, train, train_source, Model, ModelProbe, ModelSpec, TrainConfig, INPUT_CONV, OUTPUT_CONV};
use nrx_core::rng::{seeded, stream};
use nrx_core::transfer::{
    adapt, count_params, model_transfer, prepare, AdaptConfig, Checkpoint, Fingerprint, Technique, REFERENCE_COUNTS,
};
use rand::Rng;

// Criterion 1
const GRADCHECK_TOL: f64 = 1e-4;
const GRADCHECK_STEP: f64 = 1e-6;
const GRADCHECK_FLOOR: f64 = 1e-5;
const GRADCHECK_PER_GROUP: usize = 256;
const GRADCHECK_MAX_SECS: f64 = 60.0;
// Criterion 2
const BER_POINTS_DB: [f64; 3] = [0.0, 4.0, 8.0];
const BER_BITS: u64 = 100_000;
const BER_SIGMAS: f64 = 3.0;
// Criterion 3
const LDPC_ROUND_TRIPS: usize = 1000;
// Criterion 5
const FREEZE_ITERATIONS: u64 = 100;
// Criterion 6
const ZERO_SHOT_MIN_BLER: f64 = 0.9;
const ZERO_SHOT_BLOCKS: u64 = 50;
// Criterion 7
const TL_SEEDS: [u64; 3] = [1, 2, 3];
const TL_SOURCE_SAMPLES: u64 = 16_000;
const TL_BATCH: usize = 4;
const TL_EBNO_RANGE: (f64, f64) = (2.0, 8.0);
const TL_ALPHA: f64 = 0.1;
const TL_EVAL_DB: [f64; 2] = [7.0, 8.0];
const TL_EVAL_BLOCKS: u64 = 100;
const TL_EVAL_SEED: u64 = 77;
const TL_MIN_SEEDS: usize = 2;
// Criterion 8
const PROGRESS_ITERATIONS: u64 = 300;
const PROGRESS_BATCH: usize = 8;
const PROGRESS_EBNO_DB: f64 = 8.0;
const PROGRESS_INITIAL_ABS: f64 = 1e-12;
const PROGRESS_TARGET: f64 = 0.5;
const PROGRESS_TAIL: usize = 20;
// Criterion 11
const SWEEP_ALPHAS: [f64; 3] = [0.05, 0.35, 1.0];
const SWEEP_SOURCE_SAMPLES: u64 = 40;

const CHANNEL: &str = "cdl_e_like";
const DECODER_ITERS: usize = 20;

type Criterion = fn(&mut Shared) -> Result<String>;

/// State shared between criteria: source models are expensive to train.
#[derive(Default)]
struct Shared {
    sources: BTreeMap<u64, Model<f32>>,
}

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(u32, &str, Criterion); 11] = [
        (1, "gradient_check", gradient_check),
        (2, "uncoded_qpsk_awgn", uncoded_qpsk_awgn),
        (3, "ldpc_round_trips", ldpc_round_trips),
        (4, "parameter_accounting", parameter_accounting),
        (5, "freeze_contract", freeze_contract),
        (6, "zero_shot_collapse", zero_shot_collapse),
        (7, "transfer_recovery", transfer_recovery),
        (8, "training_progress", training_progress),
        (9, "determinism", determinism),
        (10, "checkpoint_integrity", checkpoint_integrity),
        (11, "alpha_sweep", alpha_sweep),
    ];
    let mut shared = Shared::default();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let t = Instant::now();
        let result = run(&mut shared);
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {id:>2} {name} ({secs:.1}s): {detail}"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {id:>2} {name} ({secs:.1}s): {e:#}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn link(grid: GridConfig, modulation: Modulation, channel: &str, num_rx: usize) -> Result<Link> {
    let channel = resolve_channel(channel)?.model;
    Ok(Link::new(Domain { grid, modulation, channel, num_rx, ldpc_seed: 1 })?)
}

fn desk_link(modulation: Modulation) -> Result<Link> {
    link(GridConfig::desk(30.0), modulation, CHANNEL, 2)
}

fn tl_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: TL_BATCH,
        samples: TL_SOURCE_SAMPLES,
        adam: AdamHyper { lr: 1e-3, ..AdamHyper::default() },
        ebno_db: TL_EBNO_RANGE,
        seed,
    }
}

fn source_model(shared: &mut Shared, seed: u64) -> Result<Model<f32>> {
    if let Some(m) = shared.sources.get(&seed) {
        return Ok(m.clone());
    }
    let out = train_source(&ModelSpec::toy(2), &desk_link(Modulation::Qpsk)?, &tl_train_config(seed), &mut |_| {})
        .map_err(|f| f.error)?;
    shared.sources.insert(seed, out.model.clone());
    Ok(out.model)
}

fn gradient_check(_: &mut Shared) -> Result<String> {
    let t = Instant::now();
    let grid = GridConfig::tiny(30.0);
    let l = link(grid.clone(), Modulation::Qpsk, CHANNEL, 2)?;
    let spec = ModelSpec::toy(2);
    ensure!(spec.width_in == 8 && spec.width_res == 16 && grid.num_subcarriers == 16);
    let model = Model::<f64>::new(&spec, &mut seeded(11, stream::INIT))?;
    let mut rng = seeded(12, stream::DATA);
    let block = l.transmit(4.0, &mut rng)?;
    let mut probe = ModelProbe { model, inputs: vec![preprocess(&block.rx)], coded: vec![block.coded], grid };
    let cfg = GradCheckConfig {
        step: GRADCHECK_STEP,
        tolerance: GRADCHECK_TOL,
        floor: GRADCHECK_FLOOR,
        max_per_group: Some(GRADCHECK_PER_GROUP),
        seed: 0,
    };
    let report = finite_diff_check(&mut probe, &cfg);
    let secs = t.elapsed().as_secs_f64();
    let kinds: Vec<String> = report.by_kind().iter().map(|(k, e)| format!("{k}={e:.2e}")).collect();
    let detail = format!(
        "{} entries, max rel error {:.3e} (< {GRADCHECK_TOL:e}), per kind [{}], {secs:.1}s",
        report.checked(),
        report.max_rel_error(),
        kinds.join(" ")
    );
    ensure!(report.passed(), "{detail}; worst {:?}", report.worst());
    ensure!(secs < GRADCHECK_MAX_SECS, "{detail}; too slow");
    Ok(detail)
}

/// Upper-tail Gaussian probability by composite Simpson integration of the
/// density over [x, x + 12].
fn q_oracle(x: f64) -> f64 {
    let n = 20_000;
    let h = 12.0 / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(x) + pdf(x + 12.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(x + i as f64 * h);
    }
    s * h / 3.0
}

fn uncoded_qpsk_awgn(_: &mut Shared) -> Result<String> {
    let l = awgn_link()?;
    let mut parts = Vec::new();
    for (i, &ebno) in BER_POINTS_DB.iter().enumerate() {
        let (errors, bits) = uncoded_ber(&GenieLmmse, &l, ebno, BER_BITS, 1000 + i as u64)?;
        let p = q_oracle((2.0 * 10f64.powf(ebno / 10.0)).sqrt());
        let measured = errors as f64 / bits as f64;
        let sigma = (p * (1.0 - p) / bits as f64).sqrt();
        let z = (measured - p) / sigma;
        parts.push(format!("{ebno} dB: {measured:.5} vs {p:.5} ({z:+.2} sigma, {bits} bits)"));
        ensure!(bits >= BER_BITS && z.abs() <= BER_SIGMAS, "{}", parts.join("; "));
    }
    Ok(parts.join("; "))
}

/// Single-antenna AWGN: one line-of-sight tap with no diffuse part.
fn awgn_link() -> Result<Link> {
    use nrx_core::channel::{ChannelModel, ChannelProfile, Tap};
    let tap = Tap { delay_s: 0.0, power_db: 0.0, k_factor_db: Some(f64::INFINITY) };
    let channel = ChannelModel::Tdl(ChannelProfile::new("awgn", vec![tap], true, "static unit gain")?);
    Ok(Link::new(Domain { grid: GridConfig::desk(30.0), modulation: Modulation::Qpsk, channel, num_rx: 1, ldpc_seed: 1 })?)
}

fn ldpc_round_trips(_: &mut Shared) -> Result<String> {
    let l = desk_link(Modulation::Qpsk)?;
    let code = l.code();
    let n = code.n();
    let mut rng = seeded(5, stream::DATA);
    for t in 0..LDPC_ROUND_TRIPS {
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let cw = code.encode(&info)?;
        ensure!(cw.len() == n);
        for (c, check) in code.checks().iter().enumerate() {
            let parity = check.iter().fold(0u8, |acc, &v| acc ^ cw[v as usize]);
            ensure!(parity == 0, "trip {t}: check {c} unsatisfied");
        }
        let llrs: Vec<f32> = cw.iter().map(|&b| if b == 1 { 20.0 } else { -20.0 }).collect();
        let dec = code.decode(&llrs, DECODER_ITERS)?;
        ensure!(dec.info == info && dec.converged, "trip {t}: decode mismatch");
    }
    Ok(format!("{LDPC_ROUND_TRIPS} trips exact, n={n} k={} checks={}", code.k(), code.checks().len()))
}

fn parameter_accounting(_: &mut Shared) -> Result<String> {
    let mut detail = String::new();
    for (scale, spec) in [("toy", ModelSpec::toy(2)), ("full", ModelSpec::full_scale(2))] {
        let source = Model::<f32>::new(&spec, &mut seeded(0, stream::INIT))?;
        let base = count_params(&source);
        let mut reports = BTreeMap::new();
        for t in Technique::ALL {
            let r = count_params(&prepare(&source, 2, t, 2, 0)?.0);
            ensure!(r.trainable + r.frozen == r.total, "{scale} {}: trainable + frozen != total", t.name());
            reports.insert(t.name(), r);
        }
        let fe = &reports["feature_extraction"];
        let ftp = &reports["fine_tuning_plus"];
        let ft = &reports["fine_tuning"];
        let added = fe.layers.iter().find(|l| !base.layers.iter().any(|b| b.name == l.name)).context("no added block")?;
        let out_conv = fe.layer(OUTPUT_CONV).context("no output conv")?.params;
        ensure!(ft.total == base.total && ft.frozen == 0);
        ensure!(fe.total - base.total == added.params, "{scale}: extended total minus base != added block");
        ensure!(fe.trainable == added.params + out_conv, "{scale}: FE trainable != added block + output conv");
        let first_two = ftp.layer(INPUT_CONV).context("no input conv")?.params + ftp.layer("resnet_1").context("no resnet_1")?.params;
        ensure!(ftp.frozen == first_two, "{scale}: FT+ frozen != input conv + resnet_1");
        detail += &format!(
            "{scale}: FT {} | ext {} | FT+ {} | FE {}; ",
            ft.trainable, fe.total, ftp.trainable, fe.trainable
        );
    }
    let r = REFERENCE_COUNTS;
    detail += &format!(
        "reference FT {} | ext {} | FT+ {} | FE {} (difference documented in README)",
        r.fine_tuning, r.extended_total, r.fine_tuning_plus, r.feature_extraction
    );
    Ok(detail)
}

fn freeze_contract(_: &mut Shared) -> Result<String> {
    let source = Model::<f32>::new(&ModelSpec::toy(2), &mut seeded(21, stream::INIT))?;
    let target = desk_link(Modulation::Qam16)?;
    let samples = FREEZE_ITERATIONS * TL_BATCH as u64;
    let mut parts = Vec::new();
    for technique in Technique::ALL {
        let train = TrainConfig { samples: 0, ebno_db: (8.0, 8.0), ..tl_train_config(22) };
        let cfg = AdaptConfig { technique, freeze_k: 2, alpha: 1.0, source_samples: samples, train };
        let (before, _) = prepare(&source, 4, technique, 2, cfg.train.seed)?;
        let out = adapt(&source, &target, &cfg, &mut |_| {}).map_err(|f| f.error)?;
        ensure!(out.log.len() as u64 >= FREEZE_ITERATIONS);
        let flags = before.tensor_trainable_flags();
        let (mut frozen, mut changed) = (0, 0);
        for ((a, b), trainable) in before.tensors().iter().zip(out.model.tensors()).zip(flags) {
            let same = a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            if trainable {
                ensure!(!same, "{}: a trainable tensor did not change", technique.name());
                changed += 1;
            } else {
                ensure!(same, "{}: a frozen tensor changed", technique.name());
                frozen += 1;
            }
        }
        if technique == Technique::FineTuning {
            ensure!(frozen == 0, "fine tuning froze {frozen} tensors");
        } else {
            ensure!(frozen > 0, "{} froze nothing", technique.name());
        }
        parts.push(format!("{}: {frozen} frozen bit-identical, {changed} changed", technique.name()));
    }
    Ok(format!("{} iterations each; {}", FREEZE_ITERATIONS, parts.join("; ")))
}

fn zero_shot_collapse(shared: &mut Shared) -> Result<String> {
    let source = source_model(shared, TL_SEEDS[0])?;
    let target = desk_link(Modulation::Qam16)?;
    let receiver = NeuralReceiver { model: model_transfer(&source, 4, TL_SEEDS[0]) };
    let cfg = EvalConfig {
        ebno_db: (-4..=8).map(f64::from).collect(),
        max_blocks: ZERO_SHOT_BLOCKS,
        max_block_errors: ZERO_SHOT_BLOCKS,
        batch_blocks: 10,
        decoder_iters: DECODER_ITERS,
        seed: TL_EVAL_SEED,
    };
    let curve = run_bler(&receiver, &target, &cfg, "model_transfer", &SerialExecutor)?;
    let min = curve.points.iter().map(|p| p.bler()).fold(f64::INFINITY, f64::min);
    let detail = format!("min BLER {min:.3} over {} points (-4..8 dB), threshold {ZERO_SHOT_MIN_BLER}", curve.points.len());
    ensure!(min >= ZERO_SHOT_MIN_BLER, "{detail}");
    Ok(detail)
}

fn transfer_recovery(shared: &mut Shared) -> Result<String> {
    let target = desk_link(Modulation::Qam16)?;
    let cfg = EvalConfig {
        ebno_db: TL_EVAL_DB.to_vec(),
        max_blocks: TL_EVAL_BLOCKS,
        max_block_errors: TL_EVAL_BLOCKS,
        batch_blocks: 10,
        decoder_iters: DECODER_ITERS,
        seed: TL_EVAL_SEED,
    };
    let bler = |model: Model<f32>, label: &str| -> Result<Vec<f64>> {
        let curve = run_bler(&NeuralReceiver { model }, &target, &cfg, label, &SerialExecutor)?;
        Ok(curve.points.iter().map(|p| p.bler()).collect())
    };
    let mut wins: BTreeMap<&str, usize> = BTreeMap::new();
    let mut table = Vec::new();
    for &seed in &TL_SEEDS {
        let source = source_model(shared, seed)?;
        let mt = bler(model_transfer(&source, 4, seed), "model_transfer")?;
        let mut row = format!("seed {seed}: MT {mt:.2?}");
        for technique in Technique::ALL {
            let cfg = AdaptConfig {
                technique,
                freeze_k: 2,
                alpha: TL_ALPHA,
                source_samples: TL_SOURCE_SAMPLES,
                train: tl_train_config(seed),
            };
            let out = adapt(&source, &target, &cfg, &mut |_| {}).map_err(|f| f.error)?;
            let b = bler(out.model, technique.name())?;
            if b.iter().zip(&mt).all(|(x, m)| x < m) {
                *wins.entry(technique.name()).or_default() += 1;
            }
            row += &format!(" {} {b:.2?}", technique.name());
        }
        table.push(row);
    }
    let summary: Vec<String> =
        Technique::ALL.iter().map(|t| format!("{} {}/3", t.name(), wins.get(t.name()).copied().unwrap_or(0))).collect();
    let detail = format!("{} | {}", summary.join(", "), table.join(" | "));
    ensure!(Technique::ALL.iter().all(|t| wins.get(t.name()).copied().unwrap_or(0) >= TL_MIN_SEEDS), "{detail}");
    Ok(detail)
}

fn training_progress(_: &mut Shared) -> Result<String> {
    let cfg = TrainConfig {
        batch_size: PROGRESS_BATCH,
        samples: PROGRESS_ITERATIONS * PROGRESS_BATCH as u64,
        adam: AdamHyper::default(),
        ebno_db: (PROGRESS_EBNO_DB, PROGRESS_EBNO_DB),
        seed: 31,
    };
    // Zero output layer: every logit is 0, so the first batch has L = 0.
    let mut model = Model::<f32>::new(&ModelSpec::toy(2), &mut seeded(cfg.seed, stream::INIT))?;
    let out_conv = model.output_conv_mut();
    out_conv.weight.fill(0.0);
    out_conv.bias.fill(0.0);
    let out = train(model, &desk_link(Modulation::Qpsk)?, &cfg, &mut |_| {}).map_err(|f| f.error)?;
    let first = out.log.first().context("empty log")?.rate;
    let tail = &out.log[out.log.len() - PROGRESS_TAIL..];
    let last = tail.iter().map(|r| r.rate).sum::<f64>() / tail.len() as f64;
    let detail = format!(
        "{} iterations at {PROGRESS_EBNO_DB} dB: L {first:.3e} -> {last:.3} (mean of last {PROGRESS_TAIL}), need L0 = 0 and L >= {PROGRESS_TARGET}",
        out.log.len()
    );
    ensure!(out.log.len() as u64 >= PROGRESS_ITERATIONS && first.abs() <= PROGRESS_INITIAL_ABS && last >= PROGRESS_TARGET, "{detail}");
    Ok(detail)
}

fn pipeline_config(name: &str, alphas: &[f64]) -> String {
    let alphas: Vec<String> = alphas.iter().map(|a| format!("{a:?}")).collect();
    format!(
        r#"
name = "{name}"
scale = "toy"
seed = 5

[source]
modulation = "qpsk"
channel = "{CHANNEL}"
scs_khz = 30.0
[source.train]
batch_size = 4
samples = {SWEEP_SOURCE_SAMPLES}
ebno_db = [2.0, 8.0]

[[targets]]
modulation = "16qam"
channel = "{CHANNEL}"
scs_khz = 30.0

[adapt]
techniques = ["fine_tuning", "fine_tuning_plus", "feature_extraction"]
alphas = [{}]
benchmarks = ["without_tl", "model_transfer"]

[eval]
ebno_db = [6.0, 8.0]
max_blocks = 4
batch_blocks = 2
genie = true
"#,
        alphas.join(", ")
    )
}

fn run_sweep(config: &str, root: &Path, workers: usize) -> Result<()> {
    let exp = Experiment::parse(config)?;
    let mut out = OutputDir::new(root, Manifest::new("sweep", &exp))?;
    pipeline::sweep(&exp, &mut out, &ThreadExecutor::new(workers))?;
    out.finish()?;
    Ok(())
}

fn read_tree(root: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root)?.to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&p)?);
            }
        }
    }
    Ok(files)
}

fn determinism(_: &mut Shared) -> Result<String> {
    let config = pipeline_config("determinism", &[0.5]);
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    run_sweep(&config, a.path(), 1)?;
    run_sweep(&config, b.path(), 3)?;
    let (ta, tb) = (read_tree(a.path())?, read_tree(b.path())?);
    ensure!(ta.keys().eq(tb.keys()), "different file sets");
    for (name, bytes) in &ta {
        ensure!(bytes == &tb[name], "{name} differs between runs");
    }
    let count = |ext: &str| ta.keys().filter(|k| k.ends_with(ext)).count();
    let (ckpts, logs, csvs) = (count(".nrxckpt"), count(".log"), count(".csv"));
    ensure!(ckpts > 0 && logs > 0 && csvs > 0);
    Ok(format!("{} files identical across runs with 1 and 3 workers ({ckpts} checkpoints, {logs} logs, {csvs} csv)", ta.len()))
}

fn checkpoint_integrity(_: &mut Shared) -> Result<String> {
    let mut model = Model::<f32>::new(&ModelSpec::toy(4), &mut seeded(41, stream::INIT))?;
    model = prepare(&model, 4, Technique::FineTuningPlus, 2, 3)?.0;
    let grid = GridConfig::desk(30.0);
    let ckpt = Checkpoint { fingerprint: Fingerprint::new(&model.spec, &grid, "acceptance"), model };
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("m.nrxckpt");
    nrx::io::save_checkpoint(&path, &ckpt)?;
    let back = nrx::io::load_checkpoint(&path)?;
    let bit_exact = back.model.tensors().iter().zip(ckpt.model.tensors()).all(|(a, b)| {
        a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
    });
    ensure!(back == ckpt && bit_exact && back.encode() == ckpt.encode(), "round trip not bit-exact");

    let bytes = ckpt.encode();
    let header_end = 16 + u64::from_le_bytes(bytes[8..16].try_into()?) as usize;
    let header = std::str::from_utf8(&bytes[16..header_end])?;
    let edit = |from: &str, to: &str| -> Vec<u8> {
        let h = header.replacen(from, to, 1);
        let mut v = bytes[..8].to_vec();
        v.extend((h.len() as u64).to_le_bytes());
        v.extend(h.as_bytes());
        v.extend(&bytes[header_end..]);
        v
    };
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 1;
    let cases: Vec<(&str, Vec<u8>)> = vec![
        ("magic", bad_magic),
        ("truncated", bytes[..bytes.len() - 3].to_vec()),
        ("trailing", [bytes.as_slice(), &[0]].concat()),
        ("shape", edit("tensor.0.shape=", "tensor.0.shape=2x")),
        ("kind", edit("layer.1.kind=resnet", "layer.1.kind=lstm")),
        ("format", edit("format=1", "format=2")),
        ("fingerprint", edit("fp.num_rx=2", "fp.num_rx=3")),
        ("header_len", {
            let mut v = bytes.clone();
            v[8] = v[8].wrapping_add(1);
            v
        }),
    ];
    let mut rejected = Vec::new();
    for (name, corrupt) in &cases {
        ensure!(corrupt != &bytes, "case {name} did not change the bytes");
        ensure!(Checkpoint::decode(corrupt).is_err(), "corruption `{name}` accepted");
        rejected.push(*name);
    }
    Ok(format!("{} bytes round trip bit-exact; rejected {}", bytes.len(), rejected.join(", ")))
}

fn alpha_sweep(_: &mut Shared) -> Result<String> {
    let dir = tempfile::tempdir()?;
    run_sweep(&pipeline_config("alpha_sweep", &SWEEP_ALPHAS), dir.path(), 2)?;
    let target = std::fs::read_dir(dir.path())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .find(|p| p.is_dir())
        .context("no target directory")?;
    let mut parts = Vec::new();
    for &alpha in &SWEEP_ALPHAS {
        let expected = (alpha * SWEEP_SOURCE_SAMPLES as f64).round() as u64;
        for run in ["fine_tuning", "fine_tuning_plus", "feature_extraction", "without_tl"] {
            let stem = format!("{run}_a{alpha}");
            let log = RunLog::parse(&std::fs::read_to_string(target.join(format!("{stem}.log")))?)?;
            let from_rows = log.samples_from_rows()?;
            ensure!(log.meta_u64("budget")? == expected && from_rows == expected, "{stem}: consumed {from_rows}, expected {expected}");
            let rows = parse_curve_csv(&std::fs::read_to_string(target.join(format!("{stem}.csv")))?)?;
            ensure!(rows.len() == 2 && rows.iter().all(|r| r.alpha == alpha), "{stem}: bad curve");
        }
        parts.push(format!("alpha {alpha}: {expected} samples"));
    }
    let curves = std::fs::read_dir(&target)?.filter(|e| e.as_ref().is_ok_and(|e| e.path().extension().is_some_and(|x| x == "csv"))).count();
    let expected_curves = SWEEP_ALPHAS.len() * 4 + 2;
    ensure!(curves == expected_curves, "{curves} curves, expected {expected_curves}");
    Ok(format!("source {SWEEP_SOURCE_SAMPLES} samples; {}; {curves} curves", parts.join(", ")))
}
