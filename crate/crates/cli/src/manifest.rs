//! Layer manifests: a JSON list of named weight/quantized file pairs.
//!
//! ```json
//! { "layers": [ { "name": "blk0.q", "weights": "q.fpt", "quantized": "q.ptq" } ] }
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    layers: Vec<RawLayer>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    name: String,
    weights: PathBuf,
    quantized: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ManifestLayer {
    pub name: String,
    pub weights: PathBuf,
    pub quantized: PathBuf,
}

pub fn load(path: &Path) -> Result<Vec<ManifestLayer>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let raw: Raw = serde_json::from_str(&text)
        .with_context(|| format!("parsing manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = std::collections::HashSet::new();
    let mut layers = Vec::with_capacity(raw.layers.len());
    for l in raw.layers {
        if !seen.insert(l.name.clone()) {
            bail!("duplicate layer name {:?} in manifest", l.name);
        }
        layers.push(ManifestLayer {
            name: l.name,
            weights: base.join(l.weights),
            quantized: base.join(l.quantized),
        });
    }
    Ok(layers)
}
