//! Self-maps of a space, sampled estimates of their moduli of continuity, and
//! certified enclosures of the function-space metrics.

mod dense;
mod estimate;
mod expr;
mod metrics;
pub mod nets;

pub use dense::DenseSequence;
pub use estimate::{check_in_c_omega, default_pairs, mod_lower, Estimate, Falsification, SampleDomain, Witness};
pub use expr::{eval_map, image_ball, sep_bound, Band, MapExpr, Piece, RetractionParams};
pub use metrics::{metric_d, metric_dinf, metric_dtheta, DOptions, Interval};
