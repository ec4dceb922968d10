//! Rough homogeneous-kernel fractional integrals `T_Ω^α`, fractional maximal
//! operators `M_Ω^α`, weak-Lorentz quasi-norms, and a harness that measures
//! how `A f_t` approaches `Ω(x)/|x|^{n-α} ||f||_1` as `t -> 0`.
//!
//! Dimensions 1 and 2 are supported.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod functions;
pub mod kernel;
pub mod lorentz;
pub mod operators;
pub mod quad;

pub use error::{Error, Result};
pub use fields::{beta_t, homog_weak_norm_closed, Exponents, HomogeneousField};
pub use functions::{Profile, TestFunction, VectorTestFunction};
pub use kernel::{DiniConfig, DiniReport, DiniVerdict, LipschitzEstimate, SphereKernel};
pub use lorentz::{
    distribution_measure, lr_norm, tail_bound_weak, weak_quasinorm, SampledField, WeakNormResult,
};
pub use operators::{
    frac_integral, frac_integral_abs, frac_maximal, AnnulusGrid, OpKind, QuadratureSpec,
};
