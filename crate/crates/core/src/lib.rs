pub mod acceptance;
pub mod concentration;
pub mod constructions;
pub mod distribution;
pub mod error;
pub mod flow;
pub mod graph;
pub mod influence;
pub mod linalg;
pub mod par;
pub mod report;
pub mod scp;
pub mod sparsify;

pub use distribution::{ConditioningSpec, Distribution, MarginalVector, OutcomeMask, PickDistribution};
pub use error::{Error, Result};
