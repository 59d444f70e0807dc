pub mod calculus;
pub mod complex;
pub mod curvature;
pub mod data;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metric;
pub mod nn;
pub mod partition;
pub mod scalar;

pub use complex::{Chain, Cochain, Simplex, SimplicialComplex, VertexId};
pub use error::{Error, Result};
pub use metric::{EnsembleTerms, RiemannianStructure};
pub use partition::{build_nerve, Domain, Face, Nerve, NerveOptions, Partition, PartitionCell};

/// Real chains and cochains.
pub type RealChain = Chain<f64>;
pub type RealCochain = Cochain<f64>;
/// Integer chains, for exact sign arithmetic.
pub type IntChain = Chain<i64>;
