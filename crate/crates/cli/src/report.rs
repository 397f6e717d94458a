//! JSON report types. Every report carries `schema_version`.

use std::path::Path;

use ptqtp_core::storage::{fp16_memory_bits, ptqtp_memory_bits};
use ptqtp_core::{
    frobenius_error, reconstruct, DType, DecomposeConfig, QuantizedLayer, WeightMatrix,
};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub n: usize,
    pub d: usize,
}

/// Quality and size figures recomputable from a weights/quantized file pair.
#[derive(Debug, Clone, Serialize)]
pub struct LayerFigures {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "G")]
    pub group: usize,
    /// ‖W − Ŵ‖_F with Ŵ built from the stored (rounded) scales.
    pub error: f64,
    pub weight_norm: f64,
    /// `error / ‖W‖_F`, 0 when W is zero.
    pub relative_error: f64,
    pub sparsity1: f64,
    pub sparsity2: f64,
    pub memory_bits: u64,
    pub fp16_bits: u64,
    pub compression_ratio: f64,
}

impl LayerFigures {
    pub fn compute(w: &WeightMatrix, stored: &QuantizedLayer) -> anyhow::Result<Self> {
        let layout = stored.layout();
        let (n, d, g) = (layout.n(), layout.d(), layout.group_size());
        let error = frobenius_error(w, &reconstruct(stored))?;
        let weight_norm = w.frobenius_norm();
        let (sparsity1, sparsity2) = stored.sparsity();
        let memory_bits = ptqtp_memory_bits(n as u64, d as u64, g as u64)?;
        let fp16_bits = fp16_memory_bits(n as u64, d as u64);
        Ok(Self {
            n,
            d,
            group: g,
            error,
            weight_norm,
            relative_error: relative(error, weight_norm),
            sparsity1,
            sparsity2,
            memory_bits,
            fp16_bits,
            compression_ratio: fp16_bits as f64 / memory_bits as f64,
        })
    }
}

pub fn relative(error: f64, norm: f64) -> f64 {
    if norm == 0.0 {
        0.0
    } else {
        error / norm
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub name: Option<String>,
    pub input: InputInfo,
    pub output: String,
    pub config: DecomposeConfig,
    pub scale_format: &'static str,
    pub iterations: usize,
    pub converged: bool,
    /// Error of the in-memory result, as recorded in the file header.
    pub final_error: f64,
    /// Escalated rows summed over iterations.
    pub escalations: usize,
    #[serde(flatten)]
    pub figures: LayerFigures,
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct QuantizeReport {
    pub schema_version: u32,
    pub layers: Vec<RunReport>,
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub schema_version: u32,
    pub weights: String,
    pub quantized: String,
    pub scale_format: &'static str,
    /// Iteration count and error stored in the PTQ1 header.
    pub iterations: u32,
    pub final_error: f64,
    #[serde(flatten)]
    pub figures: LayerFigures,
}

#[derive(Debug, Serialize)]
pub struct NamedStats {
    pub name: String,
    #[serde(flatten)]
    pub stats: StatsReport,
}

#[derive(Debug, Serialize)]
pub struct ManifestTotals {
    pub layers: usize,
    pub params: u64,
    /// √(Σ layer error²).
    pub error: f64,
    /// error / √(Σ ‖W‖²).
    pub relative_error: f64,
    pub memory_bits: u64,
    pub fp16_bits: u64,
    pub compression_ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct ManifestStats {
    pub schema_version: u32,
    pub manifest: String,
    pub layers: Vec<NamedStats>,
    pub total: ManifestTotals,
}

pub fn dtype_name(d: DType) -> &'static str {
    match d {
        DType::F16 => "f16",
        DType::F32 => "f32",
    }
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}
