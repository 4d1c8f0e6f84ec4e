//! Computable hyperbolic metric spaces, the function space of self-maps with a
//! prescribed modulus of continuity, explicit perturbation constructions in
//! that space, and a harness that checks the inequalities those constructions
//! are supposed to satisfy.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: Euclidean space, the Poincaré upper half-plane and a star
//!   tree, each with a coherent system of geodesics.
//! * [`moduli`]: concave moduli of continuity ω and the scalar searches used
//!   by the constructions.
//! * [`funcspace`]: an expression algebra of self-maps, sampled estimates of
//!   moduli of continuity, and enclosures of the three function-space metrics.
//! * [`constructions`]: the retraction, the two Step-1 maps, the Step-2 radius,
//!   the porosity centre and the pointwise-topology choice of `p`.
//! * [`verify`]: seeded property checks producing structured reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constructions;
pub mod error;
pub mod funcspace;
pub mod geometry;
pub mod moduli;
pub mod par;
pub mod verify;

pub use error::{Error, Result};
pub use funcspace::MapExpr;
pub use geometry::{Point, Ray, Space};
pub use moduli::Modulus;
