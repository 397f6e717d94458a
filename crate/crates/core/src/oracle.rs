//! Slow reference computations used to certify the fast path.
//!
//! Nothing here calls into [`crate::linalg`] or [`crate::decompose`]; the
//! arithmetic is restated from scratch so the two routes stay independent.

use crate::error::{Error, Result};
use crate::linalg::WeightMatrix;
use crate::trit::{QuantizedLayer, Trit};

/// Longest row the exhaustive search accepts (`9⁶ = 531 441` candidates).
pub const MAX_ORACLE_LEN: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// `‖w − Sα‖² + λ‖α‖²` at the optimum.
    pub objective: f64,
    /// `‖w − Sα‖²` at the optimum.
    pub error_sq: f64,
    pub t1: Vec<Trit>,
    pub t2: Vec<Trit>,
    pub alpha: [f64; 2],
    pub enumerated: u64,
}

/// Pairs ranked by number of non-zeros, then lexicographically.
fn ranked_pairs() -> [(i8, i8); 9] {
    let mut pairs = [(0i8, 0i8); 9];
    let mut k = 0;
    for a in -1i8..=1 {
        for b in -1i8..=1 {
            pairs[k] = (a, b);
            k += 1;
        }
    }
    pairs.sort_by_key(|&(a, b)| (a.abs() + b.abs(), a, b));
    pairs
}

/// Minimizes `‖w − Sθ‖² + λ‖θ‖²` jointly over both trit rows and `θ` by
/// enumerating all `9^len` trit-pair assignments and solving the 2×2 normal
/// equations for each. Ties prefer fewer non-zero trits, then the
/// lexicographically smallest assignment.
pub fn global_optimum_row(w: &[f64], lambda: f64) -> Result<OracleResult> {
    let len = w.len();
    if len > MAX_ORACLE_LEN {
        return Err(Error::InvalidArgument(format!(
            "oracle rows are limited to {MAX_ORACLE_LEN} elements, got {len}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "oracle needs lambda > 0, got {lambda}"
        )));
    }
    if let Some(index) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let pairs = ranked_pairs();
    let total = 9u64.pow(len as u32);
    let mut digits = vec![0usize; len];
    let mut best: Option<(f64, u32, u64, [f64; 2])> = None;

    for idx in 0..total {
        // position 0 is the most significant base-9 digit
        let mut rest = idx;
        for p in (0..len).rev() {
            digits[p] = (rest % 9) as usize;
            rest /= 9;
        }
        let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut nonzeros = 0u32;
        for (p, &x) in w.iter().enumerate() {
            let (a, b) = pairs[digits[p]];
            let (a, b) = (a as f64, b as f64);
            s11 += a * a;
            s12 += a * b;
            s22 += b * b;
            b1 += a * x;
            b2 += b * x;
            nonzeros += (a != 0.0) as u32 + (b != 0.0) as u32;
        }
        let (a11, a22) = (s11 + lambda, s22 + lambda);
        let det = a11 * a22 - s12 * s12;
        let alpha = [(a22 * b1 - s12 * b2) / det, (a11 * b2 - s12 * b1) / det];
        let mut objective = lambda * (alpha[0] * alpha[0] + alpha[1] * alpha[1]);
        for (p, &x) in w.iter().enumerate() {
            let (a, b) = pairs[digits[p]];
            let r = x - alpha[0] * a as f64 - alpha[1] * b as f64;
            objective += r * r;
        }
        let better = match best {
            None => true,
            Some((obj, nz, _, _)) => objective < obj || (objective == obj && nonzeros < nz),
        };
        if better {
            best = Some((objective, nonzeros, idx, alpha));
        }
    }

    let (objective, _, idx, alpha) = best.expect("at least one candidate");
    let mut rest = idx;
    let mut t1 = vec![Trit::Zero; len];
    let mut t2 = vec![Trit::Zero; len];
    for p in (0..len).rev() {
        let (a, b) = pairs[(rest % 9) as usize];
        rest /= 9;
        t1[p] = Trit::try_from(a)?;
        t2[p] = Trit::try_from(b)?;
    }
    let error_sq = objective - lambda * (alpha[0] * alpha[0] + alpha[1] * alpha[1]);
    Ok(OracleResult {
        objective,
        error_sq: error_sq.max(0.0),
        t1,
        t2,
        alpha,
        enumerated: total,
    })
}

/// `‖W − Ŵ‖_F` recomputed element by element straight from the planes.
pub fn naive_reconstruct_error(w: &WeightMatrix, q: &QuantizedLayer) -> Result<f64> {
    let layout = q.layout();
    if (w.rows(), w.cols()) != (layout.n(), layout.d()) {
        return Err(Error::Dimension(format!(
            "weights {}x{} vs layer {}x{}",
            w.rows(),
            w.cols(),
            layout.n(),
            layout.d()
        )));
    }
    let group = layout.group_size();
    let per_row = layout.d().div_ceil(group);
    let (p1, p2) = (q.plane1().values(), q.plane2().values());
    let (s1, s2) = (q.scale1().values(), q.scale2().values());
    let mut sum = 0.0;
    for i in 0..w.rows() {
        for j in 0..w.cols() {
            let g = i * per_row + j / group;
            let at = g * group + j % group;
            let approx = s1[g] * p1[at].value() as f64 + s2[g] * p2[at].value() as f64;
            let r = w.get(i, j) - approx;
            sum += r * r;
        }
    }
    Ok(sum.sqrt())
}
