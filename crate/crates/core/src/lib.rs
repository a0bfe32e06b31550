//! Numerical laboratory for log-concave measures.
//!
//! The crate is organized in four layers:
//!
//! - **measures**: declarative measure families (`MeasureSpec`) with exact
//!   unnormalized log densities, tilting by `exp(-t|x|^2 + h.x)`, and convex
//!   body geometry (membership, bounding boxes, analytic chords).
//! - **sampling**: weighted sample clouds from any family — closed-form
//!   Gaussian draws, per-coordinate quadrature inversion for product
//!   families, hit-and-run on convex bodies, MALA for smooth potentials, and
//!   importance reweighting between tilts.
//! - **psi**: empirical Orlicz norms (psi1/psi2), sub-gaussian constants over
//!   direction nets, concentration-function lower bounds, entropy/Dirichlet
//!   functionals, and the one-dimensional isoperimetric-style functional.
//! - **tilting / localization**: log-Laplace transforms, tilt-stability
//!   scans, tilt-map inversion, and the localization process driven by
//!   reweighting a fixed base cloud, with its martingale and entropy
//!   decomposition checks.
//!
//! Determinism: every stochastic routine takes an explicit seed and derives
//! independent ChaCha8 streams from it; reruns are bit-identical.

pub mod cloud;
pub mod dist;
pub mod error;
pub mod linalg;
pub mod localization;
pub mod measures;
pub mod psi;

pub mod quad;
pub mod rng;
pub mod sampling;
pub mod tilting;

pub use cloud::{Estimate, WeightedCloud};
pub use error::{Error, Result};
pub use measures::{Measure, MeasureSpec, TiltParams};
