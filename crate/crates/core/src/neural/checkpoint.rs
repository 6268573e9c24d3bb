//! Plain-text named-tensor container.
//!
//! ```text
//! #manifest <TAB> config_hash=<hex> <TAB> seed=<u64> [<TAB> key=value]*
//! <name> <TAB> <d0>x<d1>[x<d2>] <TAB> <16 hex digits per value, little-endian f64 bytes>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::params::ParameterStore;
use super::tensor::Tensor;
use super::{NeuralError, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub extra: BTreeMap<String, String>,
}

fn bad(line: usize, reason: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint {
        line,
        reason: reason.into(),
    }
}

pub fn format_checkpoint(store: &ParameterStore, manifest: &Manifest) -> String {
    let mut out = format!(
        "#manifest\tconfig_hash={}\tseed={}",
        manifest.config_hash, manifest.seed
    );
    for (k, v) in &manifest.extra {
        let _ = write!(out, "\t{k}={v}");
    }
    out.push('\n');
    for (name, value) in store.names().iter().zip(store.values()) {
        let shape: Vec<String> = value.shape().iter().map(ToString::to_string).collect();
        let _ = write!(out, "{}\t{}\t", name, shape.join("x"));
        for x in value.data() {
            for b in x.to_le_bytes() {
                let _ = write!(out, "{b:02x}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_checkpoint(content: &str) -> Result<(ParameterStore, Manifest)> {
    let mut lines = content.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| bad(1, "empty checkpoint"))?;
    let mut fields = head.split('\t');
    if fields.next() != Some("#manifest") {
        return Err(bad(1, "missing #manifest line"));
    }
    let mut manifest = Manifest::default();
    let mut seen_seed = false;
    for f in fields {
        let (k, v) = f
            .split_once('=')
            .ok_or_else(|| bad(1, format!("manifest field `{f}` is not key=value")))?;
        match k {
            "config_hash" => manifest.config_hash = v.to_string(),
            "seed" => {
                manifest.seed = v.parse().map_err(|_| bad(1, "seed is not an integer"))?;
                seen_seed = true;
            }
            _ => {
                manifest.extra.insert(k.to_string(), v.to_string());
            }
        }
    }
    if !seen_seed {
        return Err(bad(1, "manifest lacks seed"));
    }
    let mut store = ParameterStore::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(bad(line_no, "expected name, shape and data"));
        }
        let shape = parts[1]
            .split('x')
            .map(str::parse)
            .collect::<std::result::Result<Vec<usize>, _>>()
            .map_err(|_| bad(line_no, format!("bad shape `{}`", parts[1])))?;
        let hex = parts[2].as_bytes();
        if !hex.len().is_multiple_of(16) {
            return Err(bad(line_no, "data is not a whole number of f64 values"));
        }
        let mut data = Vec::with_capacity(hex.len() / 16);
        for chunk in hex.chunks_exact(16) {
            let mut bytes = [0u8; 8];
            for (b, pair) in bytes.iter_mut().zip(chunk.chunks_exact(2)) {
                let s = std::str::from_utf8(pair).map_err(|_| bad(line_no, "non-ascii data"))?;
                *b = u8::from_str_radix(s, 16).map_err(|_| bad(line_no, "bad hex digit"))?;
            }
            data.push(f64::from_le_bytes(bytes));
        }
        let tensor = Tensor::from_vec(&shape, data).map_err(|e| bad(line_no, e.to_string()))?;
        store.add(parts[0], tensor)?;
    }
    Ok((store, manifest))
}

pub fn write_checkpoint(store: &ParameterStore, manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_checkpoint(store, manifest))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(ParameterStore, Manifest)> {
    parse_checkpoint(&fs::read_to_string(path)?)
}
