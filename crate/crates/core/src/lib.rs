//! Twisted quiver representations and quiver vortex equations: path algebras,
//! slope stability, the Kempf–Ness flow for Hermite–Einstein type metrics at
//! point scale, and a spectral Newton solver for line-bundle vortices on the
//! flat torus.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod error;
pub mod io;
pub mod linalg;
pub mod moment;
pub mod quiver;
pub mod rep;
pub mod stability;
pub mod torus;

pub use error::{Error, Result, SchemaIssue};
pub use linalg::CMatrix;
pub use moment::{
    flow_solve, kempf_ness, kempf_ness_gradient, moment_map, residual_norm, FlowOptions, FlowReport, FlowStatus,
    IterRecord, MetricState,
};
pub use quiver::{gallery, Arrow, Path, PathAlgebra, PathAlgebraElement, Quiver, Relation, TwistSpec};
pub use rep::{SubrepWitness, TwistedRep};
pub use stability::{destabilizer_extract, stability_oracle, FiltrationStep, StabilityParams, Verdict, VerdictTag};
pub use torus::{solve_vortex, PotentialState, TorusGrid, TorusSystem, VortexOptions, VortexSolution, WeightField};

pub use num_complex::Complex64;
