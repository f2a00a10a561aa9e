//! Bit-exact parameter checkpoints.
//!
//! A checkpoint is a pair of files:
//!
//! * `params.manifest` — text; first line `groupscore-params v1`, then one
//!   line per tensor: `tensor <name> <dtype> <d0>x<d1>... <byte_offset> <elems>`.
//! * `params.blob` — the tensors' values back to back as little-endian f32,
//!   in manifest order, at the stated byte offsets.
//!
//! Training runs in f64; storage narrows to f32. Loading widens back, so a
//! save/load round trip is exactly `f64 -> f32 -> f64` per value.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::params::{Init, ParamSet};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "params.manifest";
pub const BLOB_FILE: &str = "params.blob";
const MAGIC: &str = "groupscore-params v1";

pub fn save(params: &ParamSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    manifest.push_str(MAGIC);
    manifest.push('\n');
    let mut blob: Vec<u8> = Vec::with_capacity(params.len() * 4);
    for spec in params.specs() {
        let shape = spec
            .shape
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        writeln!(
            manifest,
            "tensor {} f32 {} {} {}",
            spec.name,
            shape,
            blob.len(),
            spec.len
        )
        .expect("write to string");
        for v in &params.data()[spec.offset..spec.offset + spec.len] {
            blob.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    let blob_path = dir.join(BLOB_FILE);
    std::fs::write(&blob_path, blob).map_err(|e| Error::io(&blob_path, e))?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<ParamSet> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest =
        std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let blob_path = dir.join(BLOB_FILE);
    let blob = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;

    let mut lines = manifest.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Checkpoint(format!(
            "{}: bad magic line",
            manifest_path.display()
        )));
    }

    // Init values are immediately overwritten; the rng seed is irrelevant.
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut params = ParamSet::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| {
            Error::Checkpoint(format!(
                "{}, line {}: {}",
                manifest_path.display(),
                lineno + 2,
                msg
            ))
        };
        if fields.len() != 6 || fields[0] != "tensor" {
            return Err(bad("expected `tensor <name> <dtype> <shape> <offset> <elems>`"));
        }
        let name = fields[1];
        if fields[2] != "f32" {
            return Err(bad(&format!("unsupported dtype `{}`", fields[2])));
        }
        let shape: Vec<usize> = fields[3]
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad shape"))?;
        let byte_offset: usize = fields[4].parse().map_err(|_| bad("bad offset"))?;
        let elems: usize = fields[5].parse().map_err(|_| bad("bad length"))?;
        let count: usize = shape.iter().product();
        if elems != count {
            return Err(bad("element count does not match shape"));
        }
        let end = byte_offset
            .checked_add(count * 4)
            .ok_or_else(|| bad("offset overflow"))?;
        if end > blob.len() {
            return Err(bad("tensor extends past end of blob"));
        }
        let id = params.add(name, &shape, Init::Zero, &mut rng);
        let values = params.values_mut(id);
        for (i, v) in values.iter_mut().enumerate() {
            let at = byte_offset + i * 4;
            let bits: [u8; 4] = blob[at..at + 4].try_into().expect("bounds checked");
            *v = f32::from_le_bytes(bits) as f64;
        }
    }
    Ok(params)
}
