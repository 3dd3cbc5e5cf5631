//! Robust multi-Bernoulli recursion on the hybrid clutter-generator/target
//! space, plus the known-parameter baseline update.

mod estimate;
mod model;
mod update;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{BernoulliComponent, HybridParticle, MultiBernoulliBelief};
use crate::error::Result;
use crate::geometry::Area;
use crate::mb::resample_component;

pub use estimate::{extract_estimates, Estimates, ObjectEstimate};
pub use model::{BirthModel, BirthSpec, Measurement, MeasurementModel, MotionModel};
pub use update::{update_known_params, update_robust, update_with, Detection, UpdateParams};

/// Particle and component budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Particles per component after resampling.
    pub particles: usize,
    pub max_components: usize,
    pub min_existence: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            particles: 1000,
            max_components: 60,
            min_existence: 1e-3,
        }
    }
}

/// Which measurement update drives the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterMode {
    /// Unknown clutter rate and detection profile, learned through clutter
    /// generators and the augmented detection probability.
    Robust,
    /// Known clutter rate and constant detection probability.
    KnownParams { clutter_rate: f64, pd: f64 },
}

impl FilterMode {
    pub fn name(&self) -> &'static str {
        match self {
            FilterMode::Robust => "robust",
            FilterMode::KnownParams { .. } => "baseline",
        }
    }
}

/// Propagates every component one step and appends `births`.
///
/// Survival is applied per particle class, so `r' = r * sum_j w_j p_S(u_j)`
/// and the cloud is reweighted by `p_S(u_j)`. Particles move by NCV
/// kinematics; detection probabilities take a clipped random-walk step.
pub fn predict<R: Rng + ?Sized>(
    belief: &MultiBernoulliBelief,
    motion: &MotionModel,
    births: Vec<BernoulliComponent>,
    rng: &mut R,
) -> MultiBernoulliBelief {
    let mut out = Vec::with_capacity(belief.len() + births.len());
    for c in belief.components() {
        let survival: f64 = c
            .particles()
            .iter()
            .map(|p| p.weight * motion.survival(p.class))
            .sum();
        if !(survival > 0.0) {
            continue;
        }
        let particles: Vec<HybridParticle> = c
            .particles()
            .iter()
            .map(|p| HybridParticle {
                class: p.class,
                pd: motion.jitter_pd(p.pd, rng),
                state: motion.propagate(&p.state, rng),
                weight: p.weight * motion.survival(p.class) / survival,
            })
            .collect();
        out.push(BernoulliComponent::from_normalized(c.existence() * survival, particles));
    }
    out.extend(births);
    MultiBernoulliBelief::new(out)
}

/// Drops components below `min_existence`, keeps the `max_components`
/// most likely (stable in input order among ties) and resamples each
/// survivor to `particles` equal-weight particles. Existence probabilities
/// are not touched.
pub fn prune<R: Rng + ?Sized>(
    belief: &MultiBernoulliBelief,
    min_existence: f64,
    max_components: usize,
    particles: usize,
    rng: &mut R,
) -> Result<MultiBernoulliBelief> {
    let mut kept: Vec<(usize, &BernoulliComponent)> = belief
        .components()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.existence() >= min_existence && !c.is_empty())
        .collect();
    kept.sort_by(|a, b| b.1.existence().total_cmp(&a.1.existence()).then(a.0.cmp(&b.0)));
    kept.truncate(max_components);
    kept.into_iter()
        .map(|(_, c)| resample_component(c, particles, rng))
        .collect()
}

/// The full recursion for one filter configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBernoulliFilter {
    pub area: Area,
    pub motion: MotionModel,
    pub measurement: MeasurementModel,
    pub birth: BirthModel,
    pub params: FilterParams,
    pub mode: FilterMode,
}

impl MultiBernoulliFilter {
    pub fn predict<R: Rng + ?Sized>(&self, belief: &MultiBernoulliBelief, rng: &mut R) -> MultiBernoulliBelief {
        let (fixed_pd, with_clutter) = match self.mode {
            FilterMode::Robust => (None, true),
            FilterMode::KnownParams { pd, .. } => (Some(pd), false),
        };
        let births = self.birth.sample(
            &self.area,
            self.params.particles,
            (self.motion.pd_min, self.motion.pd_max),
            fixed_pd,
            with_clutter,
            rng,
        );
        predict(belief, &self.motion, births, rng)
    }

    /// Measurement update at sensor position `sensor` in this filter's mode.
    pub fn update(
        &self,
        belief: &MultiBernoulliBelief,
        measurements: &[Measurement],
        sensor: [f64; 2],
    ) -> Result<MultiBernoulliBelief> {
        match self.mode {
            FilterMode::Robust => Ok(update_robust(belief, measurements, sensor, &self.measurement)),
            FilterMode::KnownParams { clutter_rate, pd } => {
                update_known_params(belief, measurements, sensor, &self.measurement, clutter_rate, pd)
            }
        }
    }

    pub fn prune<R: Rng + ?Sized>(&self, belief: &MultiBernoulliBelief, rng: &mut R) -> Result<MultiBernoulliBelief> {
        prune(
            belief,
            self.params.min_existence,
            self.params.max_components,
            self.params.particles,
            rng,
        )
    }
}

#[cfg(test)]
mod tests;
