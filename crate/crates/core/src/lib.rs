pub mod affinity;
pub mod binfmt;
pub mod embedding;
pub mod error;
pub mod expressivity;
pub mod features;
pub mod graph;
pub mod lapsolve;
pub mod oracle;
pub mod verify;

pub use error::{AffinityError, Result};
pub use graph::{Graph, StationaryDistribution};
