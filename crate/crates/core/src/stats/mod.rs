//! Significance testing and correlation statistics over LONs and their
//! community structure.

mod anova;
mod assort;
mod null;

pub use anova::{permutation_anova, AnovaRecord, AnovaResult, FStats};
pub use assort::{
    average_ranks, fitness_assortativity, pearson, spearman, AssortativityReport, GraphKind, LOW_N,
};
pub use null::{
    mean_sd, null_ensemble, q_significance, rewire_null, NullModelEnsemble, RewireOptions, Rewired,
    Significance, WeightMode, MAX_FAILURE_RATE,
};
