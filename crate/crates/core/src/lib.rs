//! Two-plane ternary post-training quantization.
//!
//! A dense weight matrix `W` is split into groups of `G` columns per row and
//! each group is approximated as `α₁·T₁ + α₂·T₂` with trit rows
//! `T₁, T₂ ∈ {−1, 0, 1}^G`. Scales come from a closed-form 2×2 ridge solve with
//! adaptive regularization; trits come from an element-wise search over the
//! nine trit pairs. The two steps alternate until the scales stop moving.
//!
//! ```
//! use ptqtp_core::{decompose, reconstruct, forward, synth, DecomposeConfig};
//!
//! let w = synth::gaussian(16, 256, 1);
//! let (layer, trace) = decompose(&w, &DecomposeConfig::default()).unwrap();
//! assert!(trace.iterations() <= 50);
//!
//! let x = synth::gaussian_vec(256, 2);
//! let y = forward(&layer, &x).unwrap();
//! let dense = reconstruct(&layer).matvec(&x).unwrap();
//! assert!((y[0] - dense[0]).abs() < 1e-9);
//! ```

pub mod decompose;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod oracle;
pub mod storage;
pub mod sweep;
pub mod synth;
pub mod trit;

pub use decompose::{
    adapt_lambda, decompose, decompose_grouped, init_planes, reconstruct, regularized_objective,
    update_trits_row, DecomposeConfig, IterationRecord, IterationTrace,
};
pub use error::{Error, Result};
pub use kernel::{
    bench_matvec, forward, forward_batch, forward_packed, forward_with_census, ternary_dot,
    BenchReport, PackedLayer,
};
pub use linalg::{
    build_basis, condition_estimate, frobenius_error, frobenius_error_sq, solve_ridge, Basis, Mat2,
    RidgeSystem, WeightMatrix,
};
pub use oracle::{global_optimum_row, naive_reconstruct_error, OracleResult};
pub use storage::DType;
pub use trit::{
    group_reshape, pack_trits, sparsity, ungroup, unpack_trits, GroupLayout, GroupedMatrix,
    LayerMeta, QuantizedLayer, ScaleVector, Trit, TritPlane,
};
