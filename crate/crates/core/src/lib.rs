//! Higher-criticism and Berk-Jones global tests for many independent
//! hypotheses.
//!
//! The crate covers the statistics themselves, analytic null tail
//! probabilities and threshold calibration, exact finite-sample boundary
//! crossing probabilities, power under sparse Gaussian mixtures, lower
//! confidence bounds for the fraction of false nulls, and a multi-sequence
//! interval scan.

pub mod boundary;
pub mod cli;
pub mod bounds;
pub mod error;
pub mod exact;
pub mod montecarlo;
pub mod power;
pub mod special;
pub mod rng;
pub mod scan;
pub mod statistics;
pub mod tail_approx;

pub use boundary::{boundary_vector, curve_derivative, curve_value, BoundaryPoint, BoundaryVector, CurveKind};
pub use error::{Error, Result};
pub use statistics::{evaluate, exceeds, PValueSample, RejectionRule, StatisticResult, StatisticSpec};
pub use tail_approx::{darling_erdos_pvalue, ou_pvalue, tail_pvalue, tail_pvalue_generic, threshold, OuApproxResult, TailApproxResult};
