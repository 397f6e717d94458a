//! Alternating two-plane ternary decomposition.
//!
//! Each grouped row `w` (length `G`) is approximated as `α₁·t₁ + α₂·t₂` with
//! `t₁, t₂ ∈ {−1, 0, 1}^G`. One iteration is
//!
//! 1. an α-step: for every row, form `A = SᵀS + λI`, estimate its condition
//!    number, escalate `λ` if the estimate crosses the threshold, rebuild `A`
//!    and solve the 2×2 ridge system in closed form;
//! 2. a trit-step: for every element, pick the best of the nine trit pairs
//!    for the new `α`.
//!
//! The loop stops after a trit-step once the largest per-row `‖Δα‖₂` drops
//! below the tolerance, when the residual is exactly zero, or at the
//! iteration cap. Rows are independent inside each half-step, so both
//! half-steps run as a rayon parallel map; all reductions are done
//! sequentially in row order, which keeps results independent of the pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{combine_pair, condition_estimate, Basis, RidgeSystem, WeightMatrix};
use crate::trit::{
    group_reshape, ungroup, GroupedMatrix, LayerMeta, QuantizedLayer, ScaleVector, Trit, TritPlane,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeConfig {
    /// Columns per group.
    pub group_size: usize,
    pub max_iterations: usize,
    /// Convergence threshold on `max_g ‖α_g(t) − α_g(t−1)‖₂`.
    pub tolerance: f64,
    pub lambda_init: f64,
    pub lambda_max: f64,
    /// `κ` at or above which `λ` is escalated.
    pub condition_threshold: f64,
    /// Re-solve α once more after the last trit update.
    pub final_refit: bool,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            group_size: 128,
            max_iterations: 50,
            tolerance: 1e-4,
            lambda_init: 1e-8,
            lambda_max: 1.0,
            condition_threshold: 1e12,
            final_refit: false,
        }
    }
}

impl DecomposeConfig {
    pub fn with_group_size(mut self, group_size: usize) -> Self {
        self.group_size = group_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.group_size == 0 {
            return bad("group size must be >= 1".into());
        }
        if self.max_iterations == 0 {
            return bad("max iterations must be >= 1".into());
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad(format!("tolerance {} must be positive", self.tolerance));
        }
        if !(self.lambda_init > 0.0 && self.lambda_init <= self.lambda_max)
            || !self.lambda_max.is_finite()
        {
            return bad(format!(
                "need 0 < lambda_init ({}) <= lambda_max ({})",
                self.lambda_init, self.lambda_max
            ));
        }
        if self.condition_threshold.is_nan() || self.condition_threshold <= 0.0 {
            return bad(format!(
                "condition threshold {} must be positive",
                self.condition_threshold
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// `‖W − Ŵ‖_F` after the α-step.
    pub alpha_error: f64,
    /// `‖W − Ŵ‖_F` after the trit-step.
    pub trit_error: f64,
    pub max_delta: f64,
    /// Rows whose λ was raised this iteration.
    pub escalated: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Error after the optional final α refit.
    pub refit_error: Option<f64>,
    /// Per grouped row λ at exit.
    pub final_lambdas: Vec<f64>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_error(&self) -> f64 {
        self.refit_error
            .or_else(|| self.records.last().map(|r| r.trit_error))
            .unwrap_or(0.0)
    }
}

/// Raises `λ` by `√(κ / threshold)` once `κ` reaches the threshold, clamped to
/// `λ_max`. Never lowers it.
pub fn adapt_lambda(lambda: f64, kappa: f64, cfg: &DecomposeConfig) -> f64 {
    if kappa < cfg.condition_threshold {
        lambda
    } else {
        (lambda * (kappa / cfg.condition_threshold).sqrt()).min(cfg.lambda_max)
    }
}

/// Starting point: both planes `sign(w)` with `sign(0) = +1` on real
/// positions and 0 on padding; every scale pair `(1, 1)`.
pub fn init_planes(w: &GroupedMatrix) -> Result<(TritPlane, TritPlane, Vec<[f64; 2]>)> {
    let layout = w.layout();
    let (m, width) = (layout.m(), layout.group_size());
    if let Some(index) = w.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut values = vec![Trit::Zero; m * width];
    for g in 0..m {
        for (t, &x) in values[g * width..].iter_mut().zip(w.valid_row(g)) {
            *t = Trit::sign_nonzero(x);
        }
    }
    let plane = TritPlane::new(m, width, values)?;
    Ok((plane.clone(), plane, vec![[1.0, 1.0]; m]))
}

/// The nine trit pairs in tie-break order: fewer non-zeros first, then
/// lexicographic with `−1 < 0 < 1`.
pub const CANDIDATES: [(Trit, Trit); 9] = {
    use Trit::{Neg as N, Pos as P, Zero as Z};
    [
        (Z, Z),
        (N, Z),
        (Z, N),
        (Z, P),
        (P, Z),
        (N, N),
        (N, P),
        (P, N),
        (P, P),
    ]
};

/// Writes the best pair for each element of `w` into `t1`/`t2` and returns
/// the squared error. Positions of `t1`/`t2` past `w.len()` are padding and
/// are set to zero.
fn fill_trits(w: &[f64], alpha: [f64; 2], t1: &mut [Trit], t2: &mut [Trit]) -> f64 {
    let values = CANDIDATES.map(|(a, b)| combine_pair(alpha, a, b));
    let mut err = 0.0;
    for ((&x, a), b) in w.iter().zip(t1.iter_mut()).zip(t2.iter_mut()) {
        let mut best = 0;
        let mut best_err = (x - values[0]) * (x - values[0]);
        for (k, &v) in values.iter().enumerate().skip(1) {
            let e = (x - v) * (x - v);
            if e < best_err {
                best = k;
                best_err = e;
            }
        }
        (*a, *b) = CANDIDATES[best];
        err += best_err;
    }
    t1[w.len()..].fill(Trit::Zero);
    t2[w.len()..].fill(Trit::Zero);
    err
}

/// Element-wise exhaustive search over the nine trit pairs for fixed `α`.
pub fn update_trits_row(w: &[f64], alpha: [f64; 2]) -> (Vec<Trit>, Vec<Trit>) {
    let mut t1 = vec![Trit::Zero; w.len()];
    let mut t2 = vec![Trit::Zero; w.len()];
    fill_trits(w, alpha, &mut t1, &mut t2);
    (t1, t2)
}

/// `Σ (w − α₁t₁ − α₂t₂)²` over the row.
pub fn row_error_sq(w: &[f64], t1: &[Trit], t2: &[Trit], alpha: [f64; 2]) -> f64 {
    w.iter()
        .zip(t1.iter().zip(t2))
        .map(|(&x, (&a, &b))| {
            let r = x - combine_pair(alpha, a, b);
            r * r
        })
        .sum()
}

/// `‖w − Sα‖² + λ‖α‖²`, the quantity the α-step minimizes.
pub fn regularized_objective(
    w: &[f64],
    t1: &[Trit],
    t2: &[Trit],
    alpha: [f64; 2],
    lambda: f64,
) -> f64 {
    row_error_sq(w, t1, t2, alpha) + lambda * (alpha[0] * alpha[0] + alpha[1] * alpha[1])
}

struct AlphaStep {
    alpha: [f64; 2],
    lambda: f64,
    escalated: bool,
    delta: f64,
    err_sq: f64,
}

fn alpha_step(
    w: &[f64],
    t1: &[Trit],
    t2: &[Trit],
    prev: [f64; 2],
    lambda: f64,
    cfg: &DecomposeConfig,
) -> AlphaStep {
    let basis = Basis::from_valid(t1, t2);
    let mut sys = RidgeSystem::from_parts(basis.gram(), basis.project(w), lambda);
    // det(A) can only vanish through rounding here; treat it as unbounded κ.
    let kappa = condition_estimate(&sys.a).unwrap_or(f64::INFINITY);
    let new_lambda = adapt_lambda(lambda, kappa, cfg);
    let escalated = new_lambda != lambda;
    if escalated {
        sys = sys.with_lambda(new_lambda);
    }
    // λ > 0 makes A positive definite.
    let alpha = sys.solve().unwrap_or([0.0, 0.0]);
    let (d0, d1) = (alpha[0] - prev[0], alpha[1] - prev[1]);
    AlphaStep {
        alpha,
        lambda: new_lambda,
        escalated,
        delta: (d0 * d0 + d1 * d1).sqrt(),
        err_sq: row_error_sq(w, t1, t2, alpha),
    }
}

/// Mutable optimization state over a grouped matrix.
struct State<'a> {
    w: &'a GroupedMatrix,
    t1: Vec<Trit>,
    t2: Vec<Trit>,
    alpha: Vec<[f64; 2]>,
    lambda: Vec<f64>,
}

impl State<'_> {
    fn width(&self) -> usize {
        self.w.layout().group_size()
    }

    /// Returns (squared error, max Δα, escalations).
    fn alpha_pass(&mut self, cfg: &DecomposeConfig) -> (f64, f64, usize) {
        let width = self.width();
        let layout = *self.w.layout();
        let steps: Vec<AlphaStep> = (0..layout.m())
            .into_par_iter()
            .map(|g| {
                let len = layout.valid_len(g);
                let span = g * width..g * width + len;
                alpha_step(
                    self.w.valid_row(g),
                    &self.t1[span.clone()],
                    &self.t2[span],
                    self.alpha[g],
                    self.lambda[g],
                    cfg,
                )
            })
            .collect();
        let (mut err, mut max_delta, mut escalated) = (0.0, 0.0f64, 0);
        for (g, s) in steps.into_iter().enumerate() {
            self.alpha[g] = s.alpha;
            self.lambda[g] = s.lambda;
            err += s.err_sq;
            max_delta = max_delta.max(s.delta);
            escalated += s.escalated as usize;
        }
        (err, max_delta, escalated)
    }

    fn trit_pass(&mut self) -> f64 {
        let width = self.width();
        let w = self.w;
        let alpha = &self.alpha;
        let errs: Vec<f64> = self
            .t1
            .par_chunks_mut(width)
            .zip(self.t2.par_chunks_mut(width))
            .enumerate()
            .map(|(g, (a, b))| fill_trits(w.valid_row(g), alpha[g], a, b))
            .collect();
        errs.into_iter().sum()
    }
}

/// Decomposes an already grouped matrix.
pub fn decompose_grouped(
    w: &GroupedMatrix,
    cfg: &DecomposeConfig,
) -> Result<(QuantizedLayer, IterationTrace)> {
    cfg.validate()?;
    let layout = *w.layout();
    if layout.group_size() != cfg.group_size {
        return Err(Error::InvalidConfig(format!(
            "matrix grouped by {} but config asks for {}",
            layout.group_size(),
            cfg.group_size
        )));
    }
    let (p1, p2, alpha) = init_planes(w)?;
    let mut state = State {
        w,
        t1: p1.values().to_vec(),
        t2: p2.values().to_vec(),
        alpha,
        lambda: vec![cfg.lambda_init; layout.m()],
    };

    let mut trace = IterationTrace::default();
    let mut max_delta = f64::INFINITY;
    for iteration in 1..=cfg.max_iterations {
        let (alpha_err, delta, escalated) = state.alpha_pass(cfg);
        let trit_err = state.trit_pass();
        max_delta = delta;
        trace.records.push(IterationRecord {
            iteration,
            alpha_error: alpha_err.sqrt(),
            trit_error: trit_err.sqrt(),
            max_delta,
            escalated,
        });
        if delta < cfg.tolerance || trit_err == 0.0 {
            trace.converged = true;
            break;
        }
    }
    if cfg.final_refit {
        let (err, _, _) = state.alpha_pass(cfg);
        trace.refit_error = Some(err.sqrt());
    }
    trace.final_lambdas = state.lambda.clone();

    let m = layout.m();
    let meta = LayerMeta {
        iterations: trace.iterations() as u32,
        final_error: trace.final_error(),
        max_delta: Some(max_delta),
        converged: Some(trace.converged),
        config: Some(*cfg),
    };
    let layer = QuantizedLayer::new(
        layout,
        TritPlane::new(m, layout.group_size(), state.t1)?,
        TritPlane::new(m, layout.group_size(), state.t2)?,
        ScaleVector::new(state.alpha.iter().map(|a| a[0]).collect(), 1)?,
        ScaleVector::new(state.alpha.iter().map(|a| a[1]).collect(), 2)?,
        meta,
    )?;
    Ok((layer, trace))
}

/// Quantizes `w` into two trit-planes with per-group scales.
pub fn decompose(
    w: &WeightMatrix,
    cfg: &DecomposeConfig,
) -> Result<(QuantizedLayer, IterationTrace)> {
    cfg.validate()?;
    decompose_grouped(&group_reshape(w, cfg.group_size)?, cfg)
}

/// Dense `Ŵ` from a quantized layer.
pub fn reconstruct(q: &QuantizedLayer) -> WeightMatrix {
    let layout = q.layout();
    let width = layout.group_size();
    let mut grouped = vec![0.0; layout.m() * width];
    for g in 0..layout.m() {
        let alpha = q.scales(g);
        let (t1, t2) = (q.plane1().row(g), q.plane2().row(g));
        for c in 0..layout.valid_len(g) {
            grouped[g * width + c] = combine_pair(alpha, t1[c], t2[c]);
        }
    }
    // layout and buffer are consistent by construction
    ungroup(&grouped, layout).expect("layer layout is self-consistent")
}
