//! Trits, trit-planes, group layout and the 2-bit packing.
//!
//! Packing layout (normative for the on-disk format): four trits per byte,
//! element `j` in bits `2·(j mod 4)` and `2·(j mod 4)+1` of byte `j / 4`,
//! least-significant first. Codes: `0 → 00`, `+1 → 01`, `−1 → 10`; `11` is
//! reserved and rejected on decode. The last partial byte is zero-padded.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::decompose::DecomposeConfig;
use crate::error::{Error, Result};
use crate::linalg::WeightMatrix;

/// A single ternary digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(i8)]
pub enum Trit {
    Neg = -1,
    #[default]
    Zero = 0,
    Pos = 1,
}

impl Trit {
    pub const ALL: [Trit; 3] = [Trit::Neg, Trit::Zero, Trit::Pos];

    #[inline]
    pub fn value(self) -> i8 {
        self as i8
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        self as i8 as f64
    }

    #[inline]
    pub fn abs(self) -> u8 {
        (self as i8).unsigned_abs()
    }

    /// `acc + t·x` without a multiply: add, subtract or skip.
    #[inline]
    pub fn apply(self, acc: f64, x: f64) -> f64 {
        match self {
            Trit::Pos => acc + x,
            Trit::Neg => acc - x,
            Trit::Zero => acc,
        }
    }

    /// Sign of `x` with `sign(0) = +1`.
    #[inline]
    pub fn sign_nonzero(x: f64) -> Trit {
        if x < 0.0 {
            Trit::Neg
        } else {
            Trit::Pos
        }
    }

    #[inline]
    pub fn code(self) -> u8 {
        match self {
            Trit::Zero => 0b00,
            Trit::Pos => 0b01,
            Trit::Neg => 0b10,
        }
    }

    #[inline]
    pub fn from_code(code: u8) -> Option<Trit> {
        match code & 0b11 {
            0b00 => Some(Trit::Zero),
            0b01 => Some(Trit::Pos),
            0b10 => Some(Trit::Neg),
            _ => None,
        }
    }
}

impl TryFrom<i64> for Trit {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Trit::Neg),
            0 => Ok(Trit::Zero),
            1 => Ok(Trit::Pos),
            other => Err(Error::InvalidTrit(other)),
        }
    }
}

impl TryFrom<i8> for Trit {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        Trit::try_from(v as i64)
    }
}

impl fmt::Display for Trit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Converts integer trit values, rejecting anything outside `{-1, 0, 1}`.
pub fn trits_from_ints<I: Copy + Into<i64>>(values: &[I]) -> Result<Vec<Trit>> {
    values.iter().map(|&v| Trit::try_from(v.into())).collect()
}

pub fn packed_len(count: usize) -> usize {
    count.div_ceil(4)
}

pub fn pack_trits(trits: &[Trit]) -> Vec<u8> {
    let mut out = vec![0u8; packed_len(trits.len())];
    for (j, t) in trits.iter().enumerate() {
        out[j >> 2] |= t.code() << ((j & 3) * 2);
    }
    out
}

/// Decodes the trit at element `index` of a packed stream.
#[inline]
pub fn decode_trit(bytes: &[u8], index: usize) -> Result<Trit> {
    let code = (bytes[index >> 2] >> ((index & 3) * 2)) & 0b11;
    Trit::from_code(code).ok_or(Error::InvalidTritCode { index })
}

pub fn unpack_trits(bytes: &[u8], count: usize) -> Result<Vec<Trit>> {
    let need = packed_len(count);
    if bytes.len() < need {
        return Err(Error::Truncated {
            expected: need,
            found: bytes.len(),
        });
    }
    (0..count).map(|j| decode_trit(bytes, j)).collect()
}

/// How an `n × d` matrix is chopped into grouped rows of width `G`.
///
/// Groups never cross original rows: grouped row `g` belongs to original row
/// `g / groups_per_row` and covers columns starting at
/// `(g % groups_per_row) · G`. The last group of every row may be short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLayout {
    n: usize,
    d: usize,
    group: usize,
    groups_per_row: usize,
    last_group_len: usize,
}

impl GroupLayout {
    pub fn new(n: usize, d: usize, group: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Dimension(format!("empty shape {n}x{d}")));
        }
        if group == 0 {
            return Err(Error::InvalidArgument("group size must be >= 1".into()));
        }
        let groups_per_row = d.div_ceil(group);
        Ok(Self {
            n,
            d,
            group,
            groups_per_row,
            last_group_len: d - (groups_per_row - 1) * group,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn group_size(&self) -> usize {
        self.group
    }

    pub fn groups_per_row(&self) -> usize {
        self.groups_per_row
    }

    /// Number of grouped rows.
    pub fn m(&self) -> usize {
        self.n * self.groups_per_row
    }

    pub fn last_group_len(&self) -> usize {
        self.last_group_len
    }

    /// Number of real (non-padding) elements in grouped row `g`.
    pub fn valid_len(&self, g: usize) -> usize {
        if g % self.groups_per_row == self.groups_per_row - 1 {
            self.last_group_len
        } else {
            self.group
        }
    }

    /// `(original row, first column)` of grouped row `g`.
    pub fn origin(&self, g: usize) -> (usize, usize) {
        (
            g / self.groups_per_row,
            (g % self.groups_per_row) * self.group,
        )
    }

    pub fn has_padding(&self) -> bool {
        self.last_group_len != self.group
    }
}

/// `m × G` grouped view of a weight matrix, zero-padded.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedMatrix {
    layout: GroupLayout,
    data: Vec<f64>,
}

impl GroupedMatrix {
    pub fn layout(&self) -> &GroupLayout {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Full-width row including padding.
    pub fn row(&self, g: usize) -> &[f64] {
        let w = self.layout.group;
        &self.data[g * w..(g + 1) * w]
    }

    /// Row without padding.
    pub fn valid_row(&self, g: usize) -> &[f64] {
        &self.row(g)[..self.layout.valid_len(g)]
    }

    pub fn ungroup(&self) -> Result<WeightMatrix> {
        ungroup(&self.data, &self.layout)
    }
}

pub fn group_reshape(w: &WeightMatrix, group: usize) -> Result<GroupedMatrix> {
    let layout = GroupLayout::new(w.rows(), w.cols(), group)?;
    let mut data = vec![0.0; layout.m() * group];
    for g in 0..layout.m() {
        let (i, c0) = layout.origin(g);
        let len = layout.valid_len(g);
        data[g * group..g * group + len].copy_from_slice(&w.row(i)[c0..c0 + len]);
    }
    Ok(GroupedMatrix { layout, data })
}

/// Inverse of [`group_reshape`]; padding positions are ignored.
pub fn ungroup(grouped: &[f64], layout: &GroupLayout) -> Result<WeightMatrix> {
    let expected = layout.m() * layout.group;
    if grouped.len() != expected {
        return Err(Error::Dimension(format!(
            "grouped data has {} values, layout needs {expected}",
            grouped.len()
        )));
    }
    let mut out = vec![0.0; layout.n * layout.d];
    for g in 0..layout.m() {
        let (i, c0) = layout.origin(g);
        let len = layout.valid_len(g);
        let src = &grouped[g * layout.group..g * layout.group + len];
        out[i * layout.d + c0..i * layout.d + c0 + len].copy_from_slice(src);
    }
    WeightMatrix::new(layout.n, layout.d, out)
}

/// A `rows × cols` matrix of trits, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TritPlane {
    rows: usize,
    cols: usize,
    values: Vec<Trit>,
}

impl TritPlane {
    pub fn new(rows: usize, cols: usize, values: Vec<Trit>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} plane needs {} trits, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![Trit::Zero; rows * cols],
        }
    }

    pub fn from_packed(bytes: &[u8], rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, unpack_trits(bytes, rows * cols)?)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[Trit] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[Trit] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn pack(&self) -> Vec<u8> {
        pack_trits(&self.values)
    }
}

/// Fraction of zero trits among the real (non-padding) positions of a plane.
pub fn sparsity(plane: &TritPlane, layout: &GroupLayout) -> Result<f64> {
    if plane.rows != layout.m() || plane.cols != layout.group {
        return Err(Error::Dimension(format!(
            "plane {}x{} does not match layout {}x{}",
            plane.rows,
            plane.cols,
            layout.m(),
            layout.group
        )));
    }
    let zeros: usize = (0..plane.rows)
        .map(|g| {
            plane.row(g)[..layout.valid_len(g)]
                .iter()
                .filter(|t| **t == Trit::Zero)
                .count()
        })
        .sum();
    Ok(zeros as f64 / (layout.n * layout.d) as f64)
}

/// Per-group coefficients belonging to one trit-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleVector {
    values: Vec<f64>,
    plane: u8,
}

impl ScaleVector {
    pub fn new(values: Vec<f64>, plane: u8) -> Result<Self> {
        if !(plane == 1 || plane == 2) {
            return Err(Error::InvalidArgument(format!("plane index {plane}")));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values, plane })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn plane_index(&self) -> u8 {
        self.plane
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Convergence bookkeeping carried with a layer.
///
/// Only `iterations` and `final_error` survive a round trip through the PTQ1
/// file; the rest is `None` after a read.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerMeta {
    pub iterations: u32,
    /// `‖W − Ŵ‖_F` at full scale precision.
    pub final_error: f64,
    pub max_delta: Option<f64>,
    pub converged: Option<bool>,
    pub config: Option<DecomposeConfig>,
}

/// Two trit-planes plus their scales: `Ŵ = diag(α¹)T¹ + diag(α²)T²` per group.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedLayer {
    layout: GroupLayout,
    plane1: TritPlane,
    plane2: TritPlane,
    scale1: ScaleVector,
    scale2: ScaleVector,
    pub meta: LayerMeta,
}

impl QuantizedLayer {
    pub fn new(
        layout: GroupLayout,
        plane1: TritPlane,
        plane2: TritPlane,
        scale1: ScaleVector,
        scale2: ScaleVector,
        meta: LayerMeta,
    ) -> Result<Self> {
        let (m, g) = (layout.m(), layout.group);
        for p in [&plane1, &plane2] {
            if p.rows != m || p.cols != g {
                return Err(Error::Dimension(format!(
                    "plane {}x{} does not match layout {m}x{g}",
                    p.rows, p.cols
                )));
            }
        }
        for s in [&scale1, &scale2] {
            if s.len() != m {
                return Err(Error::Dimension(format!(
                    "scale vector of length {} for {m} groups",
                    s.len()
                )));
            }
        }
        if layout.has_padding() {
            for p in [&plane1, &plane2] {
                for r in (layout.groups_per_row - 1..m).step_by(layout.groups_per_row) {
                    if p.row(r)[layout.last_group_len..]
                        .iter()
                        .any(|t| *t != Trit::Zero)
                    {
                        return Err(Error::InvalidArgument(format!(
                            "non-zero trit in padding of grouped row {r}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            layout,
            plane1,
            plane2,
            scale1,
            scale2,
            meta,
        })
    }

    /// An all-zero layer: zero planes, zero scales.
    pub fn zeros(layout: GroupLayout) -> Self {
        let (m, g) = (layout.m(), layout.group);
        Self {
            layout,
            plane1: TritPlane::zeros(m, g),
            plane2: TritPlane::zeros(m, g),
            scale1: ScaleVector {
                values: vec![0.0; m],
                plane: 1,
            },
            scale2: ScaleVector {
                values: vec![0.0; m],
                plane: 2,
            },
            meta: LayerMeta::default(),
        }
    }

    pub fn layout(&self) -> &GroupLayout {
        &self.layout
    }

    pub fn plane1(&self) -> &TritPlane {
        &self.plane1
    }

    pub fn plane2(&self) -> &TritPlane {
        &self.plane2
    }

    pub fn scale1(&self) -> &ScaleVector {
        &self.scale1
    }

    pub fn scale2(&self) -> &ScaleVector {
        &self.scale2
    }

    /// `(α₁, α₂)` of grouped row `g`.
    pub fn scales(&self, g: usize) -> [f64; 2] {
        [self.scale1.values[g], self.scale2.values[g]]
    }

    /// Same layer with every scale passed through `f`.
    pub fn map_scales(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let s1 = ScaleVector::new(self.scale1.values.iter().map(|&v| f(v)).collect(), 1)?;
        let s2 = ScaleVector::new(self.scale2.values.iter().map(|&v| f(v)).collect(), 2)?;
        Ok(Self {
            scale1: s1,
            scale2: s2,
            ..self.clone()
        })
    }

    pub fn sparsity(&self) -> (f64, f64) {
        // shapes are validated at construction
        (
            sparsity(&self.plane1, &self.layout).unwrap(),
            sparsity(&self.plane2, &self.layout).unwrap(),
        )
    }
}
