//! Power-delay profile files and channel-name resolution.
//!
//! Format, one record per line:
//!
//! * leading and trailing whitespace is ignored, as are empty lines;
//! * a line starting with `#` is metadata when the text after `#` has the
//!   form `key=value` (both sides trimmed, split at the first `=`), and a
//!   comment otherwise;
//! * every other line is a tap: `delay_s power_db [rician_k_db]`, fields
//!   separated by whitespace and parsed as decimal floats (`-inf` allowed for
//!   the power);
//! * `name=` and `los=` (`true`/`false`) metadata are required; `source=` is
//!   optional. Taps must be listed in non-decreasing delay order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nrx_core::channel::{ChannelModel, ChannelProfile, Tap, UmiApprox};
use sha2::{Digest, Sha256};

pub const SHIPPED: [(&str, &str); 5] = [
    ("cdl_a_like", include_str!("../profiles/cdl_a_like.txt")),
    ("cdl_b_like", include_str!("../profiles/cdl_b_like.txt")),
    ("cdl_c_like", include_str!("../profiles/cdl_c_like.txt")),
    ("cdl_d_like", include_str!("../profiles/cdl_d_like.txt")),
    ("cdl_e_like", include_str!("../profiles/cdl_e_like.txt")),
];

/// Channel names understood besides shipped profiles and file paths.
pub const FLAT: &str = "flat";
pub const UMI_APPROX: &str = "umi_approx";
pub const MIXED_CDL: &str = "mixed_cdl";

pub fn parse_profile(text: &str) -> Result<ChannelProfile> {
    let mut meta = BTreeMap::new();
    let mut taps = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            bail!("line {}: expected `delay_s power_db [k_db]`, got `{line}`", no + 1);
        }
        let num = |s: &str| s.parse::<f64>().with_context(|| format!("line {}: `{s}` is not a number", no + 1));
        taps.push(Tap {
            delay_s: num(fields[0])?,
            power_db: num(fields[1])?,
            k_factor_db: fields.get(2).map(|s| num(s)).transpose()?,
        });
    }
    let name = meta.get("name").context("missing `# name=` metadata")?;
    let los = match meta.get("los").map(String::as_str) {
        Some("true") => true,
        Some("false") => false,
        other => bail!("`# los=` must be true or false, got {other:?}"),
    };
    let source = meta.get("source").cloned().unwrap_or_default();
    Ok(ChannelProfile::new(name.clone(), taps, los, source)?)
}

/// Writes a profile in the file format; `parse_profile` reads it back exactly.
pub fn format_profile(p: &ChannelProfile) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# name={}", p.name());
    let _ = writeln!(s, "# los={}", p.los());
    if !p.source().is_empty() {
        let _ = writeln!(s, "# source={}", p.source());
    }
    for t in p.taps() {
        let _ = match t.k_factor_db {
            Some(k) => writeln!(s, "{:?} {:?} {:?}", t.delay_s, t.power_db, k),
            None => writeln!(s, "{:?} {:?}", t.delay_s, t.power_db),
        };
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A resolved channel and the checksum of every data source it came from.
pub struct ResolvedChannel {
    pub model: ChannelModel,
    pub checksums: BTreeMap<String, String>,
}

fn shipped(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Resolves a channel name: `flat`, `umi_approx`, `mixed_cdl`, a shipped
/// profile name, or a path to a profile file.
pub fn resolve_channel(name: &str) -> Result<ResolvedChannel> {
    let mut checksums = BTreeMap::new();
    let model = match name {
        FLAT => ChannelModel::Tdl(ChannelProfile::flat_rayleigh()),
        UMI_APPROX => {
            let u = UmiApprox::default();
            u.validate()?;
            checksums.insert(UMI_APPROX.into(), sha256_hex(format!("{u:?}").as_bytes()));
            ChannelModel::UmiApprox(u)
        }
        MIXED_CDL => {
            let mut members = Vec::new();
            for (n, text) in SHIPPED {
                members.push(parse_profile(text).with_context(|| format!("shipped profile {n}"))?);
                checksums.insert(n.into(), sha256_hex(text.as_bytes()));
            }
            ChannelModel::Mixture { name: MIXED_CDL.into(), members }
        }
        _ => {
            let (text, key) = match shipped(name) {
                Some(t) => (t.to_string(), name.to_string()),
                None => {
                    let path = Path::new(name);
                    let t = std::fs::read_to_string(path)
                        .with_context(|| format!("unknown channel `{name}` and no readable profile file at that path"))?;
                    (t, path.display().to_string())
                }
            };
            let profile = parse_profile(&text).with_context(|| format!("profile `{name}`"))?;
            checksums.insert(key, sha256_hex(text.as_bytes()));
            ChannelModel::Tdl(profile)
        }
    };
    Ok(ResolvedChannel { model, checksums })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_profiles_normalize() {
        for (name, text) in SHIPPED {
            let p = parse_profile(text).unwrap();
            assert_eq!(p.name(), name);
            let sum: f64 = p.linear_powers().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn los_flags() {
        let d = parse_profile(shipped("cdl_d_like").unwrap()).unwrap();
        assert!(d.los());
        assert_eq!(d.taps()[0].k_factor_db, Some(13.3));
        let c = parse_profile(shipped("cdl_c_like").unwrap()).unwrap();
        assert!(!c.los() && c.taps().iter().all(|t| t.k_factor_db.is_none()));
    }

    #[test]
    fn single_tap_is_flat() {
        let p = parse_profile("# name=one\n# los=false\n\n0 0\n").unwrap();
        assert_eq!(p.linear_powers(), [1.0]);
    }

    #[test]
    fn format_round_trip() {
        for (_, text) in SHIPPED {
            let p = parse_profile(text).unwrap();
            assert_eq!(parse_profile(&format_profile(&p)).unwrap(), p);
        }
    }

    #[test]
    fn rejects_bad_files() {
        assert!(parse_profile("# los=false\n0 0\n").is_err());
        assert!(parse_profile("# name=x\n0 0\n").is_err());
        assert!(parse_profile("# name=x\n# los=false\n0 -inf\n").is_err());
        assert!(parse_profile("# name=x\n# los=false\n0 0 1 2\n").is_err());
        assert!(parse_profile("# name=x\n# los=false\n1e-7 0\n0 0\n").is_err());
        assert!(resolve_channel("no_such_profile").is_err());
    }

    #[test]
    fn mixture_has_five_members() {
        let r = resolve_channel(MIXED_CDL).unwrap();
        let ChannelModel::Mixture { members, .. } = r.model else { panic!() };
        assert_eq!(members.len(), 5);
        assert_eq!(r.checksums.len(), 5);
    }
}
