//! Bit-exact memory accounting for quantized weight matrices.
//!
//! All functions take an `n × d` matrix, group size `k` (scales per `k`
//! columns, `⌈d/k⌉` groups per row) and, for the salient-column baselines,
//! the salient column count `c`. Results are exact integer bit counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(n: u64, d: u64, k: u64) -> Result<()> {
    if n == 0 || d == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "memory model needs positive n, d, k (got {n}, {d}, {k})"
        )));
    }
    Ok(())
}

fn check_salient(n: u64, d: u64, k: u64, c: u64) -> Result<()> {
    check(n, d, k)?;
    if c > d {
        return Err(Error::InvalidArgument(format!(
            "salient columns {c} > d = {d}"
        )));
    }
    Ok(())
}

pub fn fp16_memory_bits(n: u64, d: u64) -> u64 {
    16 * n * d
}

/// Generic `m`-bit weights with one FP16 scale per row and group.
pub fn uniform_memory_bits(n: u64, d: u64, k: u64, bits: u64) -> Result<u64> {
    check(n, d, k)?;
    Ok(n * d * bits + d.div_ceil(k) * n * 16)
}

/// Two 2-bit trit-planes plus two FP16 scales per row and group:
/// `2·n·d·2 + ⌈d/k⌉·2n·16`.
pub fn ptqtp_memory_bits(n: u64, d: u64, k: u64) -> Result<u64> {
    check(n, d, k)?;
    Ok(2 * n * d * 2 + d.div_ceil(k) * 2 * n * 16)
}

/// Residual binarization with salient columns and group/column bitmaps.
pub fn billm_memory_bits(n: u64, d: u64, k: u64, c: u64) -> Result<u64> {
    check_salient(n, d, k, c)?;
    let g = d.div_ceil(k);
    let second_order = 2 * n * c + g * 3 * n * 16;
    let first_order = n * (d - c) + g * 2 * n * 16 * 2;
    Ok(second_order + first_order + n * d + d)
}

/// Alternating refined binarization, row–column scales.
pub fn arbrc_memory_bits(n: u64, d: u64, k: u64, c: u64) -> Result<u64> {
    check_salient(n, d, k, c)?;
    let g = d.div_ceil(k);
    let second_order = 2 * n * c + (g * 2 * n + 2 * c) * 16;
    let first_order = n * (d - c) + (g * n + (d - c)) * 16 * 2;
    Ok(second_order + first_order + n * d + d)
}

/// [`arbrc_memory_bits`] with the grouped column bitmap variant.
pub fn arbrc_cgb_memory_bits(n: u64, d: u64, k: u64, c: u64) -> Result<u64> {
    check_salient(n, d, k, c)?;
    let g = d.div_ceil(k);
    let second_order = 2 * n * c + (g * 2 * n + 2 * c) * 16 * 2;
    let first_order = n * (d - c) + (g * n + (d - c)) * 16 * 2;
    Ok(second_order + first_order + n * d + d)
}

/// `count` identical `rows × cols` weight matrices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub rows: u64,
    pub cols: u64,
    pub count: u64,
    /// Unquantized shapes (embeddings, heads) stay at FP16 under every method.
    pub quantized: bool,
}

impl LayerShape {
    pub fn linear(name: &str, rows: u64, cols: u64, count: u64) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            count,
            quantized: true,
        }
    }

    pub fn fp16(name: &str, rows: u64, cols: u64, count: u64) -> Self {
        Self {
            quantized: false,
            ..Self::linear(name, rows, cols, count)
        }
    }

    pub fn params(&self) -> u64 {
        self.rows * self.cols * self.count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryMethod {
    Fp16,
    /// One scale pair per row.
    Ptqtp,
    /// One scale pair per row and group of `group` columns.
    PtqtpGrouped {
        group: u64,
    },
}

impl FromStr for MemoryMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fp16" => Ok(MemoryMethod::Fp16),
            "ptqtp" => Ok(MemoryMethod::Ptqtp),
            "ptqtp-grouped" => Ok(MemoryMethod::PtqtpGrouped { group: 128 }),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?}; expected fp16, ptqtp or ptqtp-grouped"
            ))),
        }
    }
}

impl fmt::Display for MemoryMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemoryMethod::Fp16 => f.write_str("fp16"),
            MemoryMethod::Ptqtp => f.write_str("ptqtp"),
            MemoryMethod::PtqtpGrouped { .. } => f.write_str("ptqtp-grouped"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub bits: u64,
}

impl MemoryReport {
    pub fn bytes(&self) -> f64 {
        self.bits as f64 / 8.0
    }

    /// Decimal gigabytes (10⁹ bytes).
    pub fn gb(&self) -> f64 {
        self.bytes() / 1e9
    }

    /// Binary gigabytes (2³⁰ bytes).
    pub fn gib(&self) -> f64 {
        self.bytes() / f64::from(1u32 << 30)
    }
}

pub fn layer_memory_bits(shape: &LayerShape, method: MemoryMethod) -> Result<u64> {
    let (n, d) = (shape.rows, shape.cols);
    let per = match method {
        _ if !shape.quantized => fp16_memory_bits(n, d),
        MemoryMethod::Fp16 => fp16_memory_bits(n, d),
        MemoryMethod::Ptqtp => ptqtp_memory_bits(n, d, d)?,
        MemoryMethod::PtqtpGrouped { group } => ptqtp_memory_bits(n, d, group)?,
    };
    Ok(per * shape.count)
}

/// Total footprint of a model described by its weight shapes.
pub fn model_memory_report(shapes: &[LayerShape], method: MemoryMethod) -> Result<MemoryReport> {
    let bits = shapes
        .iter()
        .map(|s| layer_memory_bits(s, method))
        .sum::<Result<u64>>()?;
    Ok(MemoryReport { bits })
}

/// Decoder-only transformer: per block four `hidden²` attention projections
/// and three `hidden × intermediate` MLP projections, plus input embedding and
/// output head kept at FP16.
pub fn transformer_shapes(
    blocks: u64,
    hidden: u64,
    intermediate: u64,
    vocab: u64,
) -> Vec<LayerShape> {
    vec![
        LayerShape::linear("attn_proj", hidden, hidden, 4 * blocks),
        LayerShape::linear("mlp_proj", hidden, intermediate, 3 * blocks),
        LayerShape::fp16("embed_and_head", vocab, hidden, 2),
    ]
}

pub fn llama_7b_shapes() -> Vec<LayerShape> {
    transformer_shapes(32, 4096, 11008, 32000)
}

pub fn llama_13b_shapes() -> Vec<LayerShape> {
    transformer_shapes(40, 5120, 13824, 32000)
}

/// Named shape presets.
pub fn preset_shapes(name: &str) -> Option<Vec<LayerShape>> {
    match name {
        "llama-7b" => Some(llama_7b_shapes()),
        "llama-13b" => Some(llama_13b_shapes()),
        _ => None,
    }
}
