//! Simulated world: target trajectories, sensor relocation and bearing/range
//! measurements with distance-dependent noise and detection.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::belief::Kinematic;
use crate::control::{ControlConfig, SensorCommand};
use crate::error::{Error, Result};
use crate::filter::{
    BirthModel, FilterMode, FilterParams, Measurement, MeasurementModel, MotionModel, MultiBernoulliFilter,
};
use crate::geometry::{distance, wrap_angle, Area};

/// One scheduled target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// First step at which the target exists.
    pub birth: usize,
    /// First step at which the target no longer exists.
    #[serde(default)]
    pub death: Option<usize>,
    /// State at the birth step, `[x, y, vx, vy]`.
    pub state: Kinematic,
}

/// Distance-dependent detection probability
/// `p_D(d) = p_max * exp(-d^2 / (2 r_pd^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionProfile {
    pub p_max: f64,
    pub r_pd: f64,
}

impl Default for DetectionProfile {
    fn default() -> Self {
        Self {
            p_max: 0.98,
            r_pd: 700.0,
        }
    }
}

impl DetectionProfile {
    pub fn probability(&self, d: f64) -> f64 {
        self.p_max * (-d * d / (2.0 * self.r_pd * self.r_pd)).exp()
    }
}

/// Spatial law of clutter ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutterRange {
    /// Range uniform on `[0, R_max]`.
    #[default]
    Uniform,
    /// Range density proportional to range (uniform over the disc), so
    /// clutter becomes denser with distance along each bearing.
    Increasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area: Area,
    /// Number of steps `K`.
    pub steps: usize,
    pub sensor_start: [f64; 2],
    /// Mean number of clutter measurements per scan.
    pub clutter_rate: f64,
    pub clutter_range: ClutterRange,
    /// Acceleration noise of the true targets, m/s^2.
    pub sigma_acc: f64,
    pub targets: Vec<TargetSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let t = |birth, state| TargetSpec {
            birth,
            death: None,
            state,
        };
        Self {
            area: Area::default(),
            steps: 35,
            sensor_start: [10.0, 10.0],
            clutter_rate: 10.0,
            clutter_range: ClutterRange::Uniform,
            sigma_acc: 2.0,
            targets: vec![
                t(1, [250.0, 700.0, 5.0, -3.0]),
                t(1, [750.0, 300.0, -4.0, 6.0]),
                t(5, [500.0, 850.0, 6.0, -8.0]),
                t(10, [850.0, 750.0, -7.0, -5.0]),
                t(15, [200.0, 250.0, 8.0, 4.0]),
            ],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.area.width > 0.0 && self.area.height > 0.0) {
            return bad(format!("area {:?}", self.area));
        }
        if !self.area.contains(self.sensor_start) {
            return bad(format!("sensor start {:?} outside the area", self.sensor_start));
        }
        if !(self.clutter_rate >= 0.0 && self.clutter_rate.is_finite()) || !(self.sigma_acc >= 0.0) {
            return bad("clutter rate and sigma_acc must be non-negative".into());
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.birth < 1 || t.birth > self.steps.max(1) {
                return bad(format!("target {i}: birth step {} outside [1, {}]", t.birth, self.steps));
            }
            if let Some(d) = t.death {
                if d <= t.birth || d > self.steps + 1 {
                    return bad(format!("target {i}: death step {d} invalid"));
                }
            }
            if !self.area.contains([t.state[0], t.state[1]]) || t.state.iter().any(|v| !v.is_finite()) {
                return bad(format!("target {i}: initial state {:?} outside the area", t.state));
            }
        }
        Ok(())
    }

    /// Number of targets alive at step `k`.
    pub fn alive_count(&self, k: usize) -> usize {
        self.targets.iter().filter(|t| is_alive(t, k)).count()
    }
}

fn is_alive(t: &TargetSpec, k: usize) -> bool {
    k >= t.birth && t.death.is_none_or(|d| k < d)
}

/// Known parameters used by the baseline filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub clutter_rate: f64,
    pub pd: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            clutter_rate: 15.0,
            pd: 0.98,
        }
    }
}

/// Everything that determines a run, given a seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub detection: DetectionProfile,
    pub measurement: MeasurementModel,
    pub motion: MotionModel,
    pub birth: BirthModel,
    pub filter: FilterParams,
    pub control: ControlConfig,
    pub baseline: BaselineConfig,
}

impl Config {
    /// Parses a TOML document. Missing keys take their defaults; unknown keys
    /// are errors. Messages carry line and column.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let config: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let d = &self.detection;
        if !((0.0..=1.0).contains(&d.p_max) && d.r_pd > 0.0) {
            return Err(Error::InvalidParameter(format!("detection profile {d:?}")));
        }
        self.measurement.validate()?;
        self.motion.validate()?;
        self.control.validate()?;
        let f = &self.filter;
        if f.particles == 0 || f.max_components == 0 || !(0.0..1.0).contains(&f.min_existence) {
            return Err(Error::InvalidParameter(format!("filter params {f:?}")));
        }
        let b = &self.baseline;
        if !(b.clutter_rate >= 0.0 && (0.0..=1.0).contains(&b.pd)) {
            return Err(Error::InvalidParameter(format!("baseline {b:?}")));
        }
        Ok(())
    }

    pub fn filter(&self, mode: FilterMode) -> MultiBernoulliFilter {
        MultiBernoulliFilter {
            area: self.scenario.area,
            motion: self.motion.clone(),
            measurement: self.measurement.clone(),
            birth: self.birth.clone(),
            params: self.filter.clone(),
            mode,
        }
    }

    pub fn baseline_mode(&self) -> FilterMode {
        FilterMode::KnownParams {
            clutter_rate: self.baseline.clutter_rate,
            pd: self.baseline.pd,
        }
    }
}

/// True target states at one step, indexed like the scenario's target list.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub step: usize,
    pub targets: Vec<Option<Kinematic>>,
}

impl GroundTruth {
    /// State before the first step: nothing alive.
    pub fn initial(scenario: &ScenarioConfig) -> Self {
        Self {
            step: 0,
            targets: vec![None; scenario.targets.len()],
        }
    }

    pub fn alive(&self) -> Vec<Kinematic> {
        self.targets.iter().flatten().copied().collect()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.targets.iter().flatten().map(|x| [x[0], x[1]]).collect()
    }
}

fn reflect(pos: &mut f64, vel: &mut f64, hi: f64) {
    for _ in 0..4 {
        if *pos < 0.0 {
            *pos = -*pos;
            *vel = -*vel;
        } else if *pos > hi {
            *pos = 2.0 * hi - *pos;
            *vel = -*vel;
        } else {
            return;
        }
    }
    *pos = pos.clamp(0.0, hi);
}

/// Advances the world to step `k`: scheduled targets appear with their
/// initial state, surviving targets move by NCV dynamics and bounce off the
/// area borders, expired targets disappear.
pub fn step_ground_truth<R: Rng + ?Sized>(
    truth: &GroundTruth,
    k: usize,
    scenario: &ScenarioConfig,
    rng: &mut R,
) -> GroundTruth {
    let motion = MotionModel {
        sigma_acc: scenario.sigma_acc,
        ..MotionModel::default()
    };
    let targets = scenario
        .targets
        .iter()
        .zip(&truth.targets)
        .map(|(spec, prev)| {
            if !is_alive(spec, k) {
                return None;
            }
            match prev {
                None => Some(spec.state),
                Some(x) => {
                    let mut x = motion.propagate(x, rng);
                    let (px, rest) = x.split_at_mut(1);
                    let (py, vel) = rest.split_at_mut(1);
                    let (vx, vy) = vel.split_at_mut(1);
                    reflect(&mut px[0], &mut vx[0], scenario.area.width);
                    reflect(&mut py[0], &mut vy[0], scenario.area.height);
                    Some(x)
                }
            }
        })
        .collect();
    GroundTruth { step: k, targets }
}

/// One scan: each target is detected with probability `p_D(d)` and measured
/// with bearing noise `sigma_theta` and range noise `sigma_R(d)`; Poisson
/// clutter is added over `[-pi, pi] x [0, R_max]`.
pub fn generate_measurements<R: Rng + ?Sized>(
    targets: &[[f64; 2]],
    sensor: [f64; 2],
    scenario: &ScenarioConfig,
    detection: &DetectionProfile,
    model: &MeasurementModel,
    rng: &mut R,
) -> Vec<Measurement> {
    let mut z = Vec::new();
    for &p in targets {
        let d = distance(p, sensor);
        let u: f64 = rng.random();
        if u < detection.probability(d) {
            let h = model.measure(p, sensor);
            let eb: f64 = StandardNormal.sample(rng);
            let er: f64 = StandardNormal.sample(rng);
            z.push(Measurement {
                bearing: wrap_angle(h.bearing + model.sigma_bearing * eb),
                range: h.range + model.range_sigma(d) * er,
            });
        }
    }
    let count = if scenario.clutter_rate > 0.0 {
        let n: f64 = Poisson::new(scenario.clutter_rate)
            .expect("positive finite rate")
            .sample(rng);
        n as usize
    } else {
        0
    };
    for _ in 0..count {
        let bearing = rng.random_range(-PI..PI);
        let u: f64 = rng.random();
        let range = match scenario.clutter_range {
            ClutterRange::Uniform => u * model.range_max,
            ClutterRange::Increasing => u.sqrt() * model.range_max,
        };
        z.push(Measurement { bearing, range });
    }
    z
}

/// Instantaneous relocation of the sensor.
pub fn apply_command(_sensor: [f64; 2], command: &SensorCommand) -> [f64; 2] {
    command.position
}
