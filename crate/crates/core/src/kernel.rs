//! Multiplication-free forward pass over quantized layers.
//!
//! Inside a group the trits only add, subtract or skip activations. Each
//! group then costs exactly two real multiplies, one per plane scale, so a
//! layer performs `2 · n · groups_per_row` multiplies per input vector
//! regardless of `d`.

use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::{decompose, reconstruct, DecomposeConfig};
use crate::error::{Error, Result};
use crate::synth;
use crate::trit::{decode_trit, GroupLayout, QuantizedLayer, Trit};

#[inline]
fn dot(t: &[Trit], x: &[f64]) -> f64 {
    t.iter().zip(x).fold(0.0, |acc, (&t, &v)| t.apply(acc, v))
}

/// `Σ tⱼ·xⱼ` using only additions and subtractions.
pub fn ternary_dot(t: &[Trit], x: &[f64]) -> Result<f64> {
    if t.len() != x.len() {
        return Err(Error::Dimension(format!(
            "{} trits against {} activations",
            t.len(),
            x.len()
        )));
    }
    Ok(dot(t, x))
}

fn check_input(layout: &GroupLayout, x: &[f64]) -> Result<()> {
    if x.len() != layout.d() {
        return Err(Error::Dimension(format!(
            "activation of length {} for a layer with {} inputs",
            x.len(),
            layout.d()
        )));
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

/// Reference path, generic over the scalar multiply so it can be counted.
fn forward_impl(q: &QuantizedLayer, x: &[f64], mul: &mut impl FnMut(f64, f64) -> f64) -> Vec<f64> {
    let layout = q.layout();
    let gpr = layout.groups_per_row();
    (0..layout.n())
        .map(|i| {
            let mut y = 0.0;
            for g in i * gpr..(i + 1) * gpr {
                let (_, c0) = layout.origin(g);
                let len = layout.valid_len(g);
                let seg = &x[c0..c0 + len];
                let s1 = dot(&q.plane1().row(g)[..len], seg);
                let s2 = dot(&q.plane2().row(g)[..len], seg);
                let [a1, a2] = q.scales(g);
                y += mul(a1, s1) + mul(a2, s2);
            }
            y
        })
        .collect()
}

/// `Ŵ · x` straight from the trit-planes.
pub fn forward(q: &QuantizedLayer, x: &[f64]) -> Result<Vec<f64>> {
    check_input(q.layout(), x)?;
    Ok(forward_impl(q, x, &mut |a, b| a * b))
}

/// [`forward`] plus the number of scalar multiplies it performed.
pub fn forward_with_census(q: &QuantizedLayer, x: &[f64]) -> Result<(Vec<f64>, usize)> {
    check_input(q.layout(), x)?;
    let mut count = 0usize;
    let y = forward_impl(q, x, &mut |a, b| {
        count += 1;
        a * b
    });
    Ok((y, count))
}

/// Batched forward. `xs` is `d × batch` row-major; the result is `n × batch`
/// row-major. Columns are processed in parallel, each with the reference path.
pub fn forward_batch(q: &QuantizedLayer, xs: &[f64], batch: usize) -> Result<Vec<f64>> {
    let (n, d) = (q.layout().n(), q.layout().d());
    if batch == 0 || xs.len() != d * batch {
        return Err(Error::Dimension(format!(
            "batch buffer of {} values for {d}x{batch}",
            xs.len()
        )));
    }
    let cols: Vec<Vec<f64>> = (0..batch)
        .into_par_iter()
        .map(|b| {
            let x: Vec<f64> = (0..d).map(|j| xs[j * batch + b]).collect();
            forward(q, &x)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; n * batch];
    for (b, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            out[i * batch + b] = *v;
        }
    }
    Ok(out)
}

/// A layer kept in its 2-bit storage form.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedLayer {
    pub layout: GroupLayout,
    pub plane1: Vec<u8>,
    pub plane2: Vec<u8>,
    pub scale1: Vec<f64>,
    pub scale2: Vec<f64>,
}

impl PackedLayer {
    pub fn new(
        layout: GroupLayout,
        plane1: Vec<u8>,
        plane2: Vec<u8>,
        scale1: Vec<f64>,
        scale2: Vec<f64>,
    ) -> Result<Self> {
        let bytes = (layout.m() * layout.group_size()).div_ceil(4);
        for p in [&plane1, &plane2] {
            if p.len() != bytes {
                return Err(Error::Truncated {
                    expected: bytes,
                    found: p.len(),
                });
            }
        }
        for s in [&scale1, &scale2] {
            if s.len() != layout.m() {
                return Err(Error::Dimension(format!(
                    "{} scales for {} groups",
                    s.len(),
                    layout.m()
                )));
            }
        }
        Ok(Self {
            layout,
            plane1,
            plane2,
            scale1,
            scale2,
        })
    }
}

impl From<&QuantizedLayer> for PackedLayer {
    fn from(q: &QuantizedLayer) -> Self {
        Self {
            layout: *q.layout(),
            plane1: q.plane1().pack(),
            plane2: q.plane2().pack(),
            scale1: q.scale1().values().to_vec(),
            scale2: q.scale2().values().to_vec(),
        }
    }
}

fn packed_dot(bytes: &[u8], start: usize, x: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (c, &v) in x.iter().enumerate() {
        acc = decode_trit(bytes, start + c)?.apply(acc, v);
    }
    Ok(acc)
}

/// Same contract as [`forward`], decoding trits from the packed bytes on the
/// fly. The accumulation order matches, so results are bit-identical.
pub fn forward_packed(p: &PackedLayer, x: &[f64]) -> Result<Vec<f64>> {
    let layout = &p.layout;
    check_input(layout, x)?;
    let (gpr, width) = (layout.groups_per_row(), layout.group_size());
    (0..layout.n())
        .map(|i| {
            let mut y = 0.0;
            for g in i * gpr..(i + 1) * gpr {
                let (_, c0) = layout.origin(g);
                let seg = &x[c0..c0 + layout.valid_len(g)];
                let s1 = packed_dot(&p.plane1, g * width, seg)?;
                let s2 = packed_dot(&p.plane2, g * width, seg)?;
                y += p.scale1[g] * s1 + p.scale2[g] * s2;
            }
            Ok(y)
        })
        .collect()
}

/// Dense-vs-ternary matvec timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "G")]
    pub group: usize,
    pub reps: usize,
    pub ns_dense: f64,
    pub ns_ternary: f64,
    /// `ns_dense / ns_ternary`.
    pub ratio: f64,
    pub sparsity1: f64,
    pub sparsity2: f64,
    /// Largest `|y_ternary − y_dense| / max(|y_dense|, 1)` over outputs.
    pub max_rel_diff: f64,
}

const BENCH_SEED: u64 = 0x5eed;

/// Quantizes a seeded Gaussian `n × d` matrix and times `reps` matvecs with
/// the dense reconstruction against the same number of ternary forwards.
pub fn bench_matvec(n: usize, d: usize, group: usize, reps: usize) -> Result<BenchReport> {
    if n == 0 || d == 0 || group == 0 {
        return Err(Error::InvalidArgument("sizes must be >= 1".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("repetitions must be >= 1".into()));
    }
    let w = synth::gaussian(n, d, BENCH_SEED);
    let (q, _) = decompose(&w, &DecomposeConfig::default().with_group_size(group))?;
    let dense = reconstruct(&q);
    let x = synth::gaussian_vec(d, BENCH_SEED + 1);

    let start = Instant::now();
    let mut y_dense = Vec::new();
    for _ in 0..reps {
        y_dense = black_box(dense.matvec(black_box(&x))?);
    }
    let ns_dense = start.elapsed().as_nanos() as f64 / reps as f64;

    let start = Instant::now();
    let mut y_tern = Vec::new();
    for _ in 0..reps {
        y_tern = black_box(forward(black_box(&q), black_box(&x))?);
    }
    let ns_ternary = start.elapsed().as_nanos() as f64 / reps as f64;

    let max_rel_diff = y_dense
        .iter()
        .zip(&y_tern)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max);
    let (sparsity1, sparsity2) = q.sparsity();
    Ok(BenchReport {
        n,
        d,
        group,
        reps,
        ns_dense,
        ns_ternary,
        ratio: ns_dense / ns_ternary.max(f64::MIN_POSITIVE),
        sparsity1,
        sparsity2,
        max_rel_diff,
    })
}
