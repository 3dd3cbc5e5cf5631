//! Sensor control: admissible moves, predicted ideal measurement sets and
//! Rényi-divergence command selection.

mod reward;

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{BernoulliComponent, Kinematic, MultiBernoulliBelief, ObjectClass};
use crate::error::{Error, Result};
use crate::filter::{extract_estimates, Measurement, MeasurementModel, MultiBernoulliFilter};
use crate::geometry::Area;
use crate::mb::{resample_component, KdeDensities, ProvenanceWeights, DEFAULT_ASSIGNMENT_CAP};

pub use reward::{renyi_reward, renyi_reward_with, RewardEstimate};

/// A candidate sensor position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorCommand {
    pub position: [f64; 2],
}

/// Which part of the hybrid belief the reward is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardSpace {
    /// Target-class marginal of the predicted and updated beliefs.
    Targets,
    /// Full hybrid beliefs, clutter generators included.
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Rényi order, in `(0, 1)`.
    pub alpha: f64,
    /// Monte Carlo sets per command.
    pub reward_samples: usize,
    /// Move lengths, m. The "stay" command is always included.
    pub step_sizes: Vec<f64>,
    pub directions: usize,
    pub bandwidth_scale: f64,
    pub assignment_cap: usize,
    pub reward_space: RewardSpace,
    /// Score every command with the same random stream.
    pub common_random_numbers: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            reward_samples: 100,
            step_sizes: vec![50.0, 100.0],
            directions: 8,
            bandwidth_scale: 1.0,
            assignment_cap: DEFAULT_ASSIGNMENT_CAP,
            reward_space: RewardSpace::Targets,
            common_random_numbers: true,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        reward::check_alpha(self.alpha)?;
        if self.reward_samples == 0 {
            return Err(Error::InvalidParameter("reward_samples must be positive".into()));
        }
        if self.step_sizes.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter(format!("step sizes {:?}", self.step_sizes)));
        }
        if !self.step_sizes.is_empty() && self.directions == 0 {
            return Err(Error::InvalidParameter("directions must be positive".into()));
        }
        if !(self.bandwidth_scale > 0.0) || self.assignment_cap == 0 {
            return Err(Error::InvalidParameter(format!("control config {self:?}")));
        }
        Ok(())
    }
}

/// "Stay" followed by every step size in every direction (angles
/// `2 pi k / directions`), each clipped to the area. Clipped duplicates are
/// kept so the list length does not depend on the position.
pub fn admissible_commands(current: [f64; 2], area: &Area, step_sizes: &[f64], directions: usize) -> Vec<SensorCommand> {
    let mut out = vec![SensorCommand {
        position: area.clip(current),
    }];
    for &d in step_sizes {
        for k in 0..directions {
            let a = 2.0 * PI * k as f64 / directions as f64;
            out.push(SensorCommand {
                position: area.clip([current[0] + d * a.cos(), current[1] + d * a.sin()]),
            });
        }
    }
    out
}

/// Target estimates behind the predicted ideal measurement set.
///
/// All objects (clutter generators included) are estimated from the
/// predicted belief and measured noise-free from `sensor`; the belief is
/// updated with that set, and the targets of the result are returned.
pub fn pims_targets(
    filter: &MultiBernoulliFilter,
    pred: &MultiBernoulliBelief,
    sensor: [f64; 2],
) -> Result<Vec<Kinematic>> {
    let all = extract_estimates(pred).all_objects;
    let z_bar: Vec<Measurement> = all
        .iter()
        .map(|o| filter.measurement.measure([o.state[0], o.state[1]], sensor))
        .collect();
    let inter = filter.update(pred, &z_bar, sensor)?;
    Ok(extract_estimates(&inter).target_states)
}

/// Noise-free measurements of `targets` from `position`.
pub fn ideal_measurements(targets: &[Kinematic], position: [f64; 2], model: &MeasurementModel) -> Vec<Measurement> {
    targets
        .iter()
        .map(|x| model.measure([x[0], x[1]], position))
        .collect()
}

/// Predicted ideal measurement set for one command.
pub fn generate_pims(
    filter: &MultiBernoulliFilter,
    pred: &MultiBernoulliBelief,
    sensor: [f64; 2],
    command: &SensorCommand,
) -> Result<Vec<Measurement>> {
    let targets = pims_targets(filter, pred, sensor)?;
    Ok(ideal_measurements(&targets, command.position, &filter.measurement))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardEvaluation {
    pub command: SensorCommand,
    pub pims: Vec<Measurement>,
    pub reward: RewardEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Index of the chosen command in `evaluations`.
    pub index: usize,
    pub command: SensorCommand,
    pub evaluations: Vec<RewardEvaluation>,
}

fn compare_components(a: &BernoulliComponent, b: &BernoulliComponent) -> Ordering {
    b.existence()
        .total_cmp(&a.existence())
        .then(a.len().cmp(&b.len()))
        .then_with(|| {
            a.particles()
                .iter()
                .zip(b.particles())
                .map(|(p, q)| {
                    p.key()
                        .cmp(&q.key())
                        .then(p.weight.to_bits().cmp(&q.weight.to_bits()))
                })
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Same belief with components in a content-defined order.
pub fn canonical_order(belief: &MultiBernoulliBelief) -> MultiBernoulliBelief {
    let mut comps = belief.components().to_vec();
    comps.sort_by(compare_components);
    MultiBernoulliBelief::new(comps)
}

/// Scores every admissible command for a predicted belief and returns the
/// one with the largest Rényi divergence (the smallest Monte Carlo sum).
/// Ties go to the earliest command, so "stay" wins a full tie.
///
/// The result depends on the belief only through its content: components
/// are put in canonical order first.
pub fn select_command<R: Rng + ?Sized>(
    config: &ControlConfig,
    filter: &MultiBernoulliFilter,
    pred: &MultiBernoulliBelief,
    sensor: [f64; 2],
    rng: &mut R,
) -> Result<Decision> {
    config.validate()?;
    let pred = canonical_order(pred);
    let commands = admissible_commands(sensor, &filter.area, &config.step_sizes, config.directions);
    let targets = pims_targets(filter, &pred, sensor)?;

    let restrict = |b: MultiBernoulliBelief| match config.reward_space {
        RewardSpace::Targets => b.restrict(ObjectClass::Target),
        RewardSpace::Hybrid => b,
    };
    let pred_r = restrict(pred.clone());
    let pred_dens = KdeDensities::new(&pred_r, config.bandwidth_scale);
    let pred_existences = pred_r.existences();
    let seed: u64 = rng.random();

    let mut evaluations = Vec::with_capacity(commands.len());
    for (k, command) in commands.iter().enumerate() {
        let mut stream = ChaCha8Rng::seed_from_u64(seed);
        if !config.common_random_numbers {
            stream.set_stream(k as u64);
        }
        let pims = ideal_measurements(&targets, command.position, &filter.measurement);
        let upd = filter.update(&pred, &pims, command.position)?;
        let upd: MultiBernoulliBelief = upd
            .components()
            .iter()
            .map(|c| resample_component(c, filter.params.particles, &mut stream))
            .collect::<Result<_>>()?;
        let upd = restrict(upd);
        let upd_dens = ProvenanceWeights::new(&upd);
        let reward = renyi_reward_with(
            &upd,
            &upd_dens,
            &pred_existences,
            &pred_dens,
            config.alpha,
            config.reward_samples,
            config.assignment_cap,
            &mut stream,
        )?;
        evaluations.push(RewardEvaluation {
            command: *command,
            pims,
            reward,
        });
    }

    let mut index = 0;
    for (k, e) in evaluations.iter().enumerate() {
        if e.reward.sum < evaluations[index].reward.sum {
            index = k;
        }
    }
    Ok(Decision {
        index,
        command: evaluations[index].command,
        evaluations,
    })
}
