//! Exact local optima networks (LONs) for small quadratic assignment
//! problems, and the tools to study their community structure.
//!
//! The pipeline runs instance generation ([`instance`]), exhaustive LON
//! construction ([`lon`]), symmetrization and quantile filtering
//! ([`transform`]), community detection ([`community`]) and significance
//! testing ([`stats`]).

pub mod community;
pub mod error;
pub mod instance;
pub mod lon;
pub mod qap;
pub mod rng;
pub mod stats;
pub mod transform;

pub use community::{
    cross_evaluate, greedy_communities, mcl, modularity, spinglass_communities, Algorithm,
    Detector, MclParams, Partition, SpinGlassParams,
};
pub use error::{Error, Result};
pub use instance::{
    generate, read_instance, write_instance, AnyInstance, DistanceLaw, GeneratorParams,
    InstanceClass,
};
pub use lon::{
    best_improvement, build_lon, global_optimum, BuildOptions, LocalOptimum, Lon, LonMeta,
};
pub use qap::{Permutation, QapInstance};
pub use stats::{
    fitness_assortativity, null_ensemble, permutation_anova, q_significance, rewire_null,
    AnovaRecord, AnovaResult, AssortativityReport, NullModelEnsemble, RewireOptions,
};
pub use transform::{
    density_stats, filter, max_connected_threshold, symmetrize, DensityStats, ExportFormat,
    GraphTable, UndirectedLon,
};
