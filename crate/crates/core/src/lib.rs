//! Probability distributions supported on convex polytopes.
//!
//! The crate covers the full geometric pipeline needed to model, sample and
//! evaluate densities whose support is a convex polytope:
//!
//! * [`polytope`] and [`lp`]: canonical/H/V descriptions, a dense simplex
//!   solver, redundancy removal and implicit-equality detection.
//! * [`rounding`]: affine embedding into the free-variable space and rounding
//!   to John position through the maximum-volume inscribed ellipsoid.
//! * [`ball`]: the hit-and-run homeomorphism between a John polytope and the
//!   unit ball, cylinder/polar coordinates and their analytic Jacobians.
//! * [`spline`]: rational-quadratic and circular spline transforms.
//! * [`mcmc`]: multi-proposal hit-and-run sampling and convergence diagnostics.
//! * [`simplex_coords`]: maximum-entropy barycentric coordinates, ilr
//!   transform and the standardized projected coordinates built on them.
//! * [`cnf`]: continuous normalizing flows trained by conditional flow matching.
//! * [`eval`]: target densities, volume and normalizing-constant estimates and
//!   flow evaluation metrics.
//!
//! Everything here is `no_std` (with `alloc`); file formats, threads and the
//! command line live in the companion `polyflow` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ball;
pub mod cnf;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod mcmc;
pub mod lp;
pub mod model;
pub mod polytope;
pub mod rng;
pub mod rounding;
pub mod simplex_coords;
pub mod special;
pub mod spline;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use polytope::{CanonicalModel, HPolytope, VPolytope};
pub use rounding::TransformChain;
