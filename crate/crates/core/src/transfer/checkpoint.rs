//! Checkpoint container.
//!
//! ```text
//! magic        8 bytes  "NRXCKPT1"
//! header_len   u64 LE
//! header       UTF-8, one `key=value` record per line
//! tensor_count u64 LE
//! index        tensor_count x (offset u64 LE, byte_len u64 LE)
//! payload      f32 LE arrays, row-major, in index order
//! ```
//!
//! Header records:
//!
//! | key | meaning |
//! |-----|---------|
//! | `format` | container version, currently `1` |
//! | `fp.bits_per_symbol`, `fp.num_rx`, `fp.width_in`, `fp.width_res`, `fp.num_symbols`, `fp.num_subcarriers` | configuration fingerprint |
//! | `fp.lineage` | how the weights were produced, newest step first |
//! | `model.kernel`, `model.dilation` | `HxW` |
//! | `model.num_blocks`, `model.extended` | residual block count, surgery flag |
//! | `layer.N.name`, `.kind`, `.in`, `.out`, `.trainable`, `.fresh` | layer records in topological order |
//! | `tensor.N.layer`, `.role`, `.shape`, `.offset`, `.len` | tensor records; `offset`/`len` in bytes relative to the payload |
//!
//! Offsets must be contiguous from zero and cover the payload exactly; the
//! binary index must repeat the header's offsets.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use rand::SeedableRng;

use crate::numerics::Scalar;
use crate::phy::GridConfig;
use crate::receiver::{Layer, LayerKind, LayerSlot, Model, ModelSpec, ResBlock};
use crate::rng::ChaCha8Rng;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"NRXCKPT1";
const FORMAT_VERSION: u32 = 1;

/// Configuration a checkpoint was trained for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fingerprint {
    pub bits_per_symbol: usize,
    pub num_rx: usize,
    pub width_in: usize,
    pub width_res: usize,
    pub num_symbols: usize,
    pub num_subcarriers: usize,
    pub lineage: String,
}

impl Fingerprint {
    pub fn new(spec: &ModelSpec, grid: &GridConfig, lineage: impl Into<String>) -> Self {
        Self {
            bits_per_symbol: spec.bits_per_symbol,
            num_rx: spec.num_rx,
            width_in: spec.width_in,
            width_res: spec.width_res,
            num_symbols: grid.num_symbols,
            num_subcarriers: grid.num_subcarriers,
            lineage: lineage.into(),
        }
    }

    fn fields(&self) -> [(&'static str, usize); 6] {
        [
            ("bits_per_symbol", self.bits_per_symbol),
            ("num_rx", self.num_rx),
            ("width_in", self.width_in),
            ("width_res", self.width_res),
            ("num_symbols", self.num_symbols),
            ("num_subcarriers", self.num_subcarriers),
        ]
    }

    /// Human-readable differences, ignoring lineage.
    pub fn delta(&self, other: &Fingerprint) -> Vec<String> {
        self.fields()
            .iter()
            .zip(other.fields())
            .filter(|(a, b)| a.1 != b.1)
            .map(|(a, b)| format!("{}: {} -> {}", a.0, a.1, b.1))
            .collect()
    }

    /// Stable 16-hex-digit digest of every field including lineage.
    pub fn digest(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = write!(s, "{k}={v};");
        }
        s.push_str(&self.lineage);
        format!("{:016x}", fnv1a(s.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FingerprintPolicy {
    /// Any difference is an error.
    Strict,
    /// Differences are returned to the caller for logging.
    Permissive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub fingerprint: Fingerprint,
    pub model: Model<f32>,
}

fn dims(d: &[usize]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("x")
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let fp = &self.fingerprint;
        let m = &self.model;
        let mut h = String::new();
        let _ = writeln!(h, "format={FORMAT_VERSION}");
        for (k, v) in fp.fields() {
            let _ = writeln!(h, "fp.{k}={v}");
        }
        let _ = writeln!(h, "fp.lineage={}", fp.lineage.replace('\n', " "));
        let _ = writeln!(h, "model.kernel={}", dims(&[m.spec.kernel.0, m.spec.kernel.1]));
        let _ = writeln!(h, "model.dilation={}", dims(&[m.spec.dilation.0, m.spec.dilation.1]));
        let _ = writeln!(h, "model.num_blocks={}", m.spec.num_blocks);
        let _ = writeln!(h, "model.extended={}", m.extended);
        let mut index = Vec::new();
        let mut payload = Vec::new();
        let mut t = 0;
        for (li, slot) in m.layers.iter().enumerate() {
            let _ = writeln!(h, "layer.{li}.name={}", slot.name);
            let _ = writeln!(h, "layer.{li}.kind={}", slot.layer.kind().as_str());
            let _ = writeln!(h, "layer.{li}.in={}", slot.layer.in_channels());
            let _ = writeln!(h, "layer.{li}.out={}", slot.layer.out_channels());
            let _ = writeln!(h, "layer.{li}.trainable={}", slot.trainable);
            let _ = writeln!(h, "layer.{li}.fresh={}", slot.fresh);
            for (role, tensor) in slot.layer.tensors() {
                let offset = payload.len();
                payload.extend(tensor.data().iter().flat_map(|v| v.to_le_bytes()));
                let len = payload.len() - offset;
                let _ = writeln!(h, "tensor.{t}.layer={li}");
                let _ = writeln!(h, "tensor.{t}.role={role}");
                let _ = writeln!(h, "tensor.{t}.shape={}", dims(tensor.shape()));
                let _ = writeln!(h, "tensor.{t}.offset={offset}");
                let _ = writeln!(h, "tensor.{t}.len={len}");
                index.push((offset as u64, len as u64));
                t += 1;
            }
        }
        let mut out = Vec::with_capacity(32 + h.len() + 16 * index.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(h.len() as u64).to_le_bytes());
        out.extend_from_slice(h.as_bytes());
        out.extend_from_slice(&(index.len() as u64).to_le_bytes());
        for (o, l) in index {
            out.extend_from_slice(&o.to_le_bytes());
            out.extend_from_slice(&l.to_le_bytes());
        }
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let header_len = r.u64()? as usize;
        let header = core::str::from_utf8(r.take(header_len)?).map_err(|_| bad("header is not UTF-8"))?;
        let rec = parse_records(header)?;
        let count = r.u64()? as usize;
        if count > bytes.len() / 16 {
            return Err(bad("tensor count exceeds file size"));
        }
        let mut index = Vec::with_capacity(count);
        for _ in 0..count {
            index.push((r.u64()?, r.u64()?));
        }
        let payload = &bytes[r.pos..];

        let version: u32 = rec.num("format")?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let fingerprint = Fingerprint {
            bits_per_symbol: rec.num("fp.bits_per_symbol")?,
            num_rx: rec.num("fp.num_rx")?,
            width_in: rec.num("fp.width_in")?,
            width_res: rec.num("fp.width_res")?,
            num_symbols: rec.num("fp.num_symbols")?,
            num_subcarriers: rec.num("fp.num_subcarriers")?,
            lineage: rec.get("fp.lineage")?.into(),
        };
        let pair = |key: &str| -> Result<(usize, usize)> {
            match parse_dims(rec.get(key)?)?.as_slice() {
                &[a, b] => Ok((a, b)),
                _ => Err(bad(&format!("{key} must be HxW"))),
            }
        };
        let spec = ModelSpec {
            num_rx: fingerprint.num_rx,
            width_in: fingerprint.width_in,
            width_res: fingerprint.width_res,
            num_blocks: rec.num("model.num_blocks")?,
            bits_per_symbol: fingerprint.bits_per_symbol,
            kernel: pair("model.kernel")?,
            dilation: pair("model.dilation")?,
        };
        spec.validate().map_err(|e| bad(&format!("{e}")))?;
        let extended: bool = rec.flag("model.extended")?;

        // Rebuild the skeleton from the layer records, then fill it.
        let mut layers = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut li = 0;
        while rec.has(&format!("layer.{li}.name")) {
            let key = |f: &str| format!("layer.{li}.{f}");
            let (cin, cout): (usize, usize) = (rec.num(&key("in"))?, rec.num(&key("out"))?);
            let layer = match rec.get(&key("kind"))? {
                "conv" => Layer::Conv(crate::numerics::ConvLayer::zeros(cin, cout, spec.kernel, spec.dilation)),
                "resnet" => Layer::Res(ResBlock::new(cin, cout, spec.kernel, spec.dilation, &mut rng)),
                other => return Err(bad(&format!("unknown layer kind `{other}`"))),
            };
            layers.push(LayerSlot {
                name: rec.get(&key("name"))?.into(),
                layer,
                trainable: rec.flag(&key("trainable"))?,
                fresh: rec.flag(&key("fresh"))?,
            });
            li += 1;
        }
        check_topology(&layers, &spec)?;
        let mut model = Model { spec, layers, extended };

        let mut expected_offset = 0u64;
        let mut t = 0;
        for (li, slot) in model.layers.iter_mut().enumerate() {
            let roles: Vec<&'static str> = slot.layer.tensors().iter().map(|(r, _)| *r).collect();
            for (role, tensor) in roles.into_iter().zip(slot.layer.tensors_mut()) {
                let key = |f: &str| format!("tensor.{t}.{f}");
                if rec.num::<usize>(&key("layer"))? != li || rec.get(&key("role"))? != role {
                    return Err(bad(&format!("tensor {t} is not {}.{role}", slot.name)));
                }
                if parse_dims(rec.get(&key("shape"))?)? != tensor.shape() {
                    return Err(bad(&format!("tensor {t} shape does not match layer {}", slot.name)));
                }
                let (offset, len): (u64, u64) = (rec.num(&key("offset"))?, rec.num(&key("len"))?);
                if index.get(t) != Some(&(offset, len)) {
                    return Err(bad(&format!("binary index disagrees with header for tensor {t}")));
                }
                if offset != expected_offset {
                    return Err(bad(&format!("tensor {t} offset {offset} overlaps or leaves a gap (expected {expected_offset})")));
                }
                if len != 4 * tensor.len() as u64 {
                    return Err(bad(&format!("tensor {t} length {len} bytes, expected {}", 4 * tensor.len())));
                }
                let end = offset.checked_add(len).filter(|&e| e <= payload.len() as u64).ok_or_else(|| bad("truncated payload"))?;
                let raw = &payload[offset as usize..end as usize];
                for (v, c) in tensor.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
                    *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                }
                expected_offset = end;
                t += 1;
            }
        }
        if t != index.len() || rec.has(&format!("tensor.{t}.layer")) {
            return Err(bad("tensor records do not match the layer structure"));
        }
        if expected_offset != payload.len() as u64 {
            return Err(bad("payload has trailing bytes not covered by any tensor"));
        }
        if model.tensors().iter().any(|t| !t.all_finite()) {
            return Err(bad("payload contains non-finite values"));
        }
        Ok(Self { fingerprint, model })
    }

    /// Compares against the configuration the caller expects.
    pub fn check(&self, expected: &Fingerprint, policy: FingerprintPolicy) -> Result<Vec<String>> {
        let delta = self.fingerprint.delta(expected);
        if !delta.is_empty() && policy == FingerprintPolicy::Strict {
            return Err(Error::Fingerprint(delta.join(", ")));
        }
        Ok(delta)
    }
}

fn check_topology<T: Scalar>(layers: &[LayerSlot<T>], spec: &ModelSpec) -> Result<()> {
    let n = layers.len();
    if n < 2 || layers[0].layer.kind() != LayerKind::Conv || layers[n - 1].layer.kind() != LayerKind::Conv {
        return Err(bad("layers must start and end with a convolution"));
    }
    if layers[1..n - 1].iter().any(|l| l.layer.kind() != LayerKind::Res) || n - 2 < spec.num_blocks {
        return Err(bad("residual blocks must sit between the two convolutions"));
    }
    if n - 2 != spec.num_blocks {
        return Err(bad(&format!("{} residual blocks recorded, header says {}", n - 2, spec.num_blocks)));
    }
    if layers[0].layer.in_channels() != spec.input_channels() || layers[n - 1].layer.out_channels() != spec.bits_per_symbol {
        return Err(bad("input or output channel counts disagree with the fingerprint"));
    }
    for w in layers.windows(2) {
        if w[0].layer.out_channels() != w[1].layer.in_channels() {
            return Err(bad(&format!("{} feeds {} with mismatched channels", w[0].name, w[1].name)));
        }
    }
    Ok(())
}

fn bad(msg: &str) -> Error {
    Error::Checkpoint(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("eight bytes")))
    }
}

struct Records<'a>(BTreeMap<&'a str, &'a str>);

fn parse_records(header: &str) -> Result<Records<'_>> {
    let mut map = BTreeMap::new();
    for line in header.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(&format!("malformed header line `{line}`")))?;
        if map.insert(k, v).is_some() {
            return Err(bad(&format!("duplicate header key `{k}`")));
        }
    }
    Ok(Records(map))
}

impl<'a> Records<'a> {
    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn get(&self, key: &str) -> Result<&'a str> {
        self.0.get(key).copied().ok_or_else(|| bad(&format!("missing header key `{key}`")))
    }

    fn num<N: core::str::FromStr>(&self, key: &str) -> Result<N> {
        let v = self.get(key)?;
        v.parse().map_err(|_| bad(&format!("`{key}` has invalid value `{v}`")))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        self.num(key)
    }
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split('x').map(|d| d.parse().map_err(|_| bad(&format!("invalid dimensions `{s}`")))).collect()
}
