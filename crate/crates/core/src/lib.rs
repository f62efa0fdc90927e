//! Rigid body with Kovalevskaya inertia ratios in two constant force fields.
//!
//! The body has inertia `diag(2, 2, 1)` and potential `−α1 − β2`, where
//! `α`, `β` are the body-frame components of two orthogonal constant fields
//! with `|α| = a > |β| = b > 0`. The crate integrates the Euler–Poisson
//! equations, evaluates the first integrals and the Lie–Poisson bracket,
//! tests membership in the invariant four-dimensional set `N`, and on `N`
//! passes to separated variables `(s1, s2)` whose motion is elliptic.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x <= y)` deliberately routes NaN to the failing branch

pub mod bifurcation;
pub mod checks;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod manifold;
pub mod ode;
pub mod poisson;
pub mod sampling;
pub mod separation;
pub mod statespace;

pub use error::{Error, Result};
pub use separation::{SeparatedPoint, SeparationConstants, Sign};
pub use statespace::{BodyParams, PhaseState, Vec3};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
