//! Sharp bounds on the probability that at least (or exactly) `r` of `n`
//! events occur, computed from normalized binomial moments.
//!
//! Every quantity can be evaluated in exact rational arithmetic
//! ([`Rational`]) or in `f64`, through the [`Scalar`] trait.

pub mod bounds;
pub mod combinatorics;
pub mod conditional;
pub mod engine;
pub mod error;
pub mod io;
pub mod moments;
pub mod scalar;
pub mod system;
pub mod verify;

pub use bounds::{evaluate, BoundCertificate, BoundRequest, FormulaId, Term};
pub use conditional::{AggregatedBound, PartitionField};
pub use combinatorics::{binomial, enumerate_index_tuples, IndexTuple};
pub use engine::{Side, Target};
pub use error::{Error, Result};
pub use moments::{MomentMatrix, MomentSet, MomentVector};
pub use scalar::{Rational, Scalar, FLOAT_TOLERANCE};
pub use system::{EventSystem, OccurrenceDistribution};
