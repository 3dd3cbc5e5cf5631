//! Multi-Bernoulli set-density primitives: resampling, Monte Carlo sampling
//! of set realisations, exact set-density evaluation and kernel density
//! estimation of particle clouds.

mod density;
mod kde;
mod resample;
mod sampling;

pub use density::{
    eval_mb_density, log_mb_density, ComponentDensity, PreparedSet, ProvenanceWeights, DEFAULT_ASSIGNMENT_CAP,
};
pub use kde::{kde_density, silverman_bandwidth, ComponentKde, GaussianKde, KdeDensities, BANDWIDTH_FLOOR};
pub use resample::{resample_component, systematic_indices};
pub use sampling::{cardinality_pmf, sample_multi_bernoulli, SamplePoint, SampleSet};
