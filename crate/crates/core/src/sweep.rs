//! Parameter sweeps over a fixed matrix: one decomposition per value.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::decompose::{decompose, DecomposeConfig};
use crate::error::{Error, Result};
use crate::linalg::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Iteration cap.
    Iters,
    /// Convergence tolerance.
    Eps,
    /// Condition-number threshold for λ escalation.
    CondThreshold,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iters" => Ok(SweepParam::Iters),
            "eps" => Ok(SweepParam::Eps),
            "cond-threshold" => Ok(SweepParam::CondThreshold),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep parameter {other:?}; expected iters, eps or cond-threshold"
            ))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Iters => "iters",
            SweepParam::Eps => "eps",
            SweepParam::CondThreshold => "cond-threshold",
        })
    }
}

impl SweepParam {
    /// `base` with this parameter set to `value`, validated.
    pub fn apply(self, base: &DecomposeConfig, value: f64) -> Result<DecomposeConfig> {
        let mut cfg = *base;
        match self {
            SweepParam::Iters => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(Error::InvalidConfig(format!("iteration cap {value}")));
                }
                cfg.max_iterations = value as usize;
            }
            SweepParam::Eps => cfg.tolerance = value,
            SweepParam::CondThreshold => cfg.condition_threshold = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub iterations: usize,
    pub final_error: f64,
    /// Median wall time over the repeats, seconds.
    pub wall_seconds: f64,
}

/// Runs one decomposition per value (`repeats` times each, reporting the
/// median wall time). All values are validated before any work starts.
pub fn run_sweep(
    w: &WeightMatrix,
    base: &DecomposeConfig,
    param: SweepParam,
    values: &[f64],
    repeats: usize,
) -> Result<Vec<SweepRow>> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let configs = values
        .iter()
        .map(|&v| param.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (&value, cfg) in values.iter().zip(&configs) {
        let mut times = Vec::with_capacity(repeats);
        let mut last = None;
        for _ in 0..repeats {
            let start = Instant::now();
            let (_, trace) = decompose(w, cfg)?;
            times.push(start.elapsed().as_secs_f64());
            last = Some(trace);
        }
        let trace = last.expect("repeats >= 1");
        rows.push(SweepRow {
            value,
            iterations: trace.iterations(),
            final_error: trace.final_error(),
            wall_seconds: median(&mut times),
        });
    }
    Ok(rows)
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}
