//! Smoluchowski coagulation with the solvable kernels `2`, `x + y` and `xy`
//! in self-similar variables: transform-space flows, a finite-volume
//! physical-space solver, and the weighted sup-norm contraction metrics.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod catalog;
pub mod density;
pub mod error;
pub mod flow;
pub mod grid;
pub mod harness;
pub mod interp;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod ode;
pub mod physical;
pub mod scaling;
pub mod special;
pub mod transforms;

pub use catalog::{exact_profile, PowerExp};
pub use density::{compute_moments, normalize_to_class, GriddedDensity, MomentVector};
pub use error::{CoagError, GridEnd, Result};
pub use flow::{
    characteristic_foot, duhamel_residual_const, evolve_add, evolve_const, evolve_mult, semigroup_apply, FlowSolver, FlowState,
};
pub use kernel::{AdmissibleClass, KernelKind};
pub use metrics::{distance, fit_rate, weighted_sup, ContractionReport, KappaNorm};
pub use scaling::{from_selfsimilar, make_scaling, to_selfsimilar, ScalingMap};
pub use transforms::{bernstein, closed_form, laplace, mult_bernstein, TransformCurve, TransformKind};
