//! Numerical equiaffine geometry and the Calabi composition of hyperbolic
//! affine hyperspheres.
//!
//! The crate has three layers:
//!
//! - [`jets`]: exact forward-mode differentiation through truncated
//!   multivariate Taylor expansions (order ≤ 4);
//! - [`equiaffine`]: the invariants of a nondegenerate hypersurface immersion
//!   computed from jets alone — Blaschke metric, affine normal, induced
//!   connection, Fubini–Pick cubic form, shape operator, Pick invariant,
//!   curvature tensor and the covariant derivative of the cubic form;
//! - [`factors`], [`composition`] and [`verify`]: a catalog of hyperbolic
//!   affine hyperspheres, the Calabi composition that welds them into a new
//!   hypersphere, closed-form predictions for every invariant of the result,
//!   and a randomized harness that checks the engine against the predictions
//!   at machine precision.
//!
//! The `calabi` binary exposes the harness on the command line; see the
//! `book/` directory for a guided tour.

// Indexed loops mirror the tensor index notation throughout, and negated
// comparisons deliberately reject NaN parameters.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod composition;
pub mod equiaffine;
pub mod factors;
pub mod jets;
pub mod report;
pub mod tensor;
pub mod verify;

pub mod cli;

pub use equiaffine::{GeometryError, ImmersionChart, InvariantSet, MetricFrame, SphereVerdict};
pub use jets::{seed_point, Jet, JetError, JetSpace};

// The book chapters double as doc-tests so their code samples stay
// compilable against the current API.
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[doc = include_str!("../../../book/src/jets.md")]
mod book_jets {}
#[doc = include_str!("../../../book/src/equiaffine.md")]
mod book_equiaffine {}
#[doc = include_str!("../../../book/src/factors.md")]
mod book_factors {}
#[doc = include_str!("../../../book/src/composition.md")]
mod book_composition {}
#[doc = include_str!("../../../book/src/verification.md")]
mod book_verification {}
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
