//! FPT1 dense tensors and PTQ1 quantized layers. Little-endian throughout.
//!
//! FPT1 (26-byte header):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `FPT1`                  |
//! | 4      | 4    | version `u32` = 1             |
//! | 8      | 1    | dtype `u8` (0 = f32, 1 = f16) |
//! | 9      | 1    | rank `u8` = 2                 |
//! | 10     | 8    | n `u64`                       |
//! | 18     | 8    | d `u64`                       |
//! | 26     | …    | row-major payload             |
//!
//! PTQ1 (44-byte header):
//!
//! | offset | size | field                                    |
//! |--------|------|------------------------------------------|
//! | 0      | 4    | magic `PTQ1`                             |
//! | 4      | 4    | version `u32` = 1                        |
//! | 8      | 1    | scale dtype `u8` (1 = f16, 0 = f32)      |
//! | 9      | 3    | reserved, zero                           |
//! | 12     | 8    | n `u64`                                  |
//! | 20     | 8    | d `u64`                                  |
//! | 28     | 4    | G `u32`                                  |
//! | 32     | 4    | iterations used `u32`                    |
//! | 36     | 8    | final Frobenius error `f64`              |
//! | 44     | …    | plane 1, plane 2 (`⌈m·G/4⌉` bytes each)  |
//! | …      | …    | scale 1, scale 2 (`m` values each)       |
//!
//! with `m = n · ⌈d/G⌉`. Planes use the 2-bit trit packing from
//! [`crate::trit`].

use std::fs;
use std::io::Write;
use std::path::Path;

use super::half::{f16_bits_from_f64, f64_from_f16_bits};
use crate::error::{Error, Result};
use crate::linalg::WeightMatrix;
use crate::trit::{packed_len, GroupLayout, LayerMeta, QuantizedLayer, ScaleVector, TritPlane};

pub const FPT_MAGIC: [u8; 4] = *b"FPT1";
pub const PTQ_MAGIC: [u8; 4] = *b"PTQ1";
pub const FORMAT_VERSION: u32 = 1;
pub const FPT_HEADER_LEN: usize = 26;
pub const PTQ_HEADER_LEN: usize = 44;

/// Element encoding shared by both containers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DType {
    F32 = 0,
    #[default]
    F16 = 1,
}

impl DType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F16),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F16 => 2,
        }
    }

    fn encode(self, v: f64, index: usize, out: &mut Vec<u8>) -> Result<()> {
        match self {
            DType::F32 => {
                let x = v as f32;
                if !x.is_finite() {
                    return Err(Error::ScaleOverflow { index, value: v });
                }
                out.extend_from_slice(&x.to_le_bytes());
            }
            DType::F16 => {
                let h = f16_bits_from_f64(v);
                if h & 0x7c00 == 0x7c00 {
                    return Err(Error::ScaleOverflow { index, value: v });
                }
                out.extend_from_slice(&h.to_le_bytes());
            }
        }
        Ok(())
    }

    fn decode(self, bytes: &[u8]) -> f64 {
        match self {
            DType::F32 => f32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            DType::F16 => f64_from_f16_bits(u16::from_le_bytes(bytes.try_into().unwrap())),
        }
    }

    /// `v` after an encode/decode round trip.
    pub fn round(self, v: f64) -> f64 {
        match self {
            DType::F32 => v as f32 as f64,
            DType::F16 => f64_from_f16_bits(f16_bits_from_f64(v)),
        }
    }
}

/// Sequential little-endian reader over a byte slice.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                expected: self.pos.saturating_add(len),
                found: self.bytes.len(),
            }),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptHeader(msg.into())
}

fn dimension(v: u64, name: &str) -> Result<usize> {
    usize::try_from(v)
        .ok()
        .filter(|&x| x > 0)
        .ok_or_else(|| corrupt(format!("{name} = {v}")))
}

/// Checks the exact byte length implied by a header before anything is
/// allocated.
fn expect_len(found: usize, header: usize, parts: &[Option<usize>]) -> Result<usize> {
    let total = parts
        .iter()
        .try_fold(header, |acc, p| p.and_then(|p| acc.checked_add(p)))
        .ok_or_else(|| corrupt("section sizes overflow"))?;
    if found < total {
        return Err(Error::Truncated {
            expected: total,
            found,
        });
    }
    if found > total {
        return Err(corrupt(format!("{} trailing bytes", found - total)));
    }
    Ok(total)
}

pub fn write_tensor(w: &WeightMatrix, dtype: DType) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(FPT_HEADER_LEN + w.data().len() * dtype.size());
    out.extend_from_slice(&FPT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(dtype.code());
    out.push(2);
    out.extend_from_slice(&(w.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(w.cols() as u64).to_le_bytes());
    for (i, &v) in w.data().iter().enumerate() {
        dtype.encode(v, i, &mut out)?;
    }
    Ok(out)
}

pub fn read_tensor(bytes: &[u8]) -> Result<WeightMatrix> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != FPT_MAGIC {
        return Err(corrupt("bad FPT1 magic"));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported FPT1 version {version}")));
    }
    let code = cur.u8()?;
    let dtype = DType::from_code(code).ok_or_else(|| corrupt(format!("dtype code {code}")))?;
    let rank = cur.u8()?;
    if rank != 2 {
        return Err(corrupt(format!("rank {rank}, only 2 is supported")));
    }
    let n = dimension(cur.u64()?, "n")?;
    let d = dimension(cur.u64()?, "d")?;
    let payload = n.checked_mul(d).and_then(|e| e.checked_mul(dtype.size()));
    expect_len(bytes.len(), FPT_HEADER_LEN, &[payload])?;
    let data = bytes[FPT_HEADER_LEN..]
        .chunks_exact(dtype.size())
        .map(|c| dtype.decode(c))
        .collect();
    WeightMatrix::new(n, d, data)
}

/// Serializes a layer. Scales are rounded to `scales` precision.
pub fn write_quantized(q: &QuantizedLayer, scales: DType) -> Result<Vec<u8>> {
    let layout = q.layout();
    let group = u32::try_from(layout.group_size())
        .map_err(|_| Error::InvalidArgument("group size exceeds u32".into()))?;
    let plane_bytes = packed_len(layout.m() * layout.group_size());
    let mut out =
        Vec::with_capacity(PTQ_HEADER_LEN + 2 * plane_bytes + 2 * layout.m() * scales.size());
    out.extend_from_slice(&PTQ_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(scales.code());
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&(layout.n() as u64).to_le_bytes());
    out.extend_from_slice(&(layout.d() as u64).to_le_bytes());
    out.extend_from_slice(&group.to_le_bytes());
    out.extend_from_slice(&q.meta.iterations.to_le_bytes());
    out.extend_from_slice(&q.meta.final_error.to_le_bytes());
    out.extend_from_slice(&q.plane1().pack());
    out.extend_from_slice(&q.plane2().pack());
    for (i, &v) in q
        .scale1()
        .values()
        .iter()
        .chain(q.scale2().values())
        .enumerate()
    {
        scales.encode(v, i, &mut out)?;
    }
    Ok(out)
}

/// Parses a PTQ1 stream, returning the layer and its scale precision.
pub fn read_quantized_with_dtype(bytes: &[u8]) -> Result<(QuantizedLayer, DType)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != PTQ_MAGIC {
        return Err(corrupt("bad PTQ1 magic"));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported PTQ1 version {version}")));
    }
    let code = cur.u8()?;
    let dtype =
        DType::from_code(code).ok_or_else(|| corrupt(format!("scale dtype code {code}")))?;
    if cur.take(3)? != [0; 3] {
        return Err(corrupt("reserved bytes not zero"));
    }
    let n = dimension(cur.u64()?, "n")?;
    let d = dimension(cur.u64()?, "d")?;
    let group = dimension(cur.u32()? as u64, "G")?;
    let iterations = cur.u32()?;
    let final_error = cur.f64()?;
    if !(final_error >= 0.0 && final_error.is_finite()) {
        return Err(corrupt(format!("final error {final_error}")));
    }

    let m = n.checked_mul(d.div_ceil(group));
    let trits = m.and_then(|m| m.checked_mul(group));
    let plane = trits.map(packed_len);
    let scale = m.and_then(|m| m.checked_mul(dtype.size()));
    expect_len(bytes.len(), PTQ_HEADER_LEN, &[plane, plane, scale, scale])?;
    let (m, trits, plane) = (m.unwrap(), trits.unwrap(), plane.unwrap());

    let layout = GroupLayout::new(n, d, group)?;
    let p1 = TritPlane::from_packed(cur.take(plane)?, m, group)?;
    let p2 = TritPlane::from_packed(cur.take(plane)?, m, group).map_err(|e| match e {
        Error::InvalidTritCode { index } => Error::InvalidTritCode {
            index: trits + index,
        },
        other => other,
    })?;
    let mut read_scales = |k: u8| -> Result<ScaleVector> {
        let raw = cur.take(m * dtype.size())?;
        let values: Vec<f64> = raw
            .chunks_exact(dtype.size())
            .map(|c| dtype.decode(c))
            .collect();
        ScaleVector::new(values, k).map_err(|_| corrupt(format!("non-finite scale in plane {k}")))
    };
    let s1 = read_scales(1)?;
    let s2 = read_scales(2)?;
    let meta = LayerMeta {
        iterations,
        final_error,
        ..LayerMeta::default()
    };
    let layer = QuantizedLayer::new(layout, p1, p2, s1, s2, meta).map_err(|e| match e {
        Error::InvalidArgument(msg) => corrupt(msg),
        other => other,
    })?;
    Ok((layer, dtype))
}

pub fn read_quantized(bytes: &[u8]) -> Result<QuantizedLayer> {
    read_quantized_with_dtype(bytes).map(|(q, _)| q)
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
