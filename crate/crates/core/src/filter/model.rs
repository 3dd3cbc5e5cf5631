use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::belief::{BernoulliComponent, HybridParticle, Kinematic, ObjectClass};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Area};

/// Nearly-constant-velocity kinematics with per-class survival and a random
/// walk on the augmented detection probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionModel {
    /// Time step, s.
    pub dt: f64,
    /// Acceleration noise standard deviation, m/s^2.
    pub sigma_acc: f64,
    pub survival_target: f64,
    pub survival_clutter: f64,
    /// Standard deviation of the detection-probability jitter.
    pub pd_jitter: f64,
    pub pd_min: f64,
    pub pd_max: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            dt: 1.0,
            sigma_acc: 2.0,
            survival_target: 0.98,
            survival_clutter: 0.9,
            pd_jitter: 0.02,
            pd_min: 0.01,
            pd_max: 0.99,
        }
    }
}

impl MotionModel {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.dt > 0.0)
            || !(self.sigma_acc >= 0.0)
            || !(self.pd_jitter >= 0.0)
            || !prob(self.survival_target)
            || !prob(self.survival_clutter)
            || !(0.0 < self.pd_min && self.pd_min <= self.pd_max && self.pd_max < 1.0)
        {
            return Err(Error::InvalidParameter(format!("motion model {self:?}")));
        }
        Ok(())
    }

    pub fn survival(&self, class: ObjectClass) -> f64 {
        match class {
            ObjectClass::Target => self.survival_target,
            ObjectClass::ClutterGenerator => self.survival_clutter,
        }
    }

    /// Deterministic part of the transition.
    pub fn advance(&self, x: &Kinematic) -> Kinematic {
        [
            x[0] + self.dt * x[2],
            x[1] + self.dt * x[3],
            x[2],
            x[3],
        ]
    }

    /// One NCV step driven by piecewise-constant white acceleration.
    pub fn propagate<R: Rng + ?Sized>(&self, x: &Kinematic, rng: &mut R) -> Kinematic {
        let dt = self.dt;
        let ax: f64 = StandardNormal.sample(rng);
        let ay: f64 = StandardNormal.sample(rng);
        let (ax, ay) = (ax * self.sigma_acc, ay * self.sigma_acc);
        [
            x[0] + dt * x[2] + 0.5 * dt * dt * ax,
            x[1] + dt * x[3] + 0.5 * dt * dt * ay,
            x[2] + dt * ax,
            x[3] + dt * ay,
        ]
    }

    pub fn jitter_pd<R: Rng + ?Sized>(&self, pd: f64, rng: &mut R) -> f64 {
        if self.pd_jitter == 0.0 {
            return pd;
        }
        let e: f64 = StandardNormal.sample(rng);
        (pd + self.pd_jitter * e).clamp(self.pd_min, self.pd_max)
    }

    /// Per-axis process noise covariance of `(position, velocity)`.
    pub fn axis_noise_covariance(&self) -> [[f64; 2]; 2] {
        let q = self.sigma_acc * self.sigma_acc;
        let dt = self.dt;
        [
            [q * dt.powi(4) / 4.0, q * dt.powi(3) / 2.0],
            [q * dt.powi(3) / 2.0, q * dt * dt],
        ]
    }
}

/// Bearing/range measurement `z = [theta, range]` (rad, m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub bearing: f64,
    pub range: f64,
}

/// Bearing-range sensor with range noise growing quadratically with
/// distance: `sigma_R(R) = sigma_0 + eta * R^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementModel {
    /// Bearing noise, rad.
    pub sigma_bearing: f64,
    /// Range noise at zero distance, m.
    pub sigma_range0: f64,
    /// Quadratic growth of range noise, 1/m.
    pub range_eta: f64,
    /// Largest measurable range, m.
    pub range_max: f64,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self {
            sigma_bearing: PI / 180.0,
            sigma_range0: 1.0,
            range_eta: 5e-5,
            range_max: 1415.0,
        }
    }
}

impl MeasurementModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_bearing > 0.0 && self.sigma_range0 > 0.0 && self.range_eta >= 0.0 && self.range_max > 0.0) {
            return Err(Error::InvalidParameter(format!("measurement model {self:?}")));
        }
        Ok(())
    }

    pub fn range_sigma(&self, range: f64) -> f64 {
        self.sigma_range0 + self.range_eta * range * range
    }

    /// Volume of the observation space `[-pi, pi] x [0, range_max]`.
    pub fn observation_volume(&self) -> f64 {
        2.0 * PI * self.range_max
    }

    /// Noise-free measurement of position `p` from a sensor at `sensor`.
    pub fn measure(&self, p: [f64; 2], sensor: [f64; 2]) -> Measurement {
        let dx = p[0] - sensor[0];
        let dy = p[1] - sensor[1];
        Measurement {
            bearing: dy.atan2(dx),
            range: dx.hypot(dy),
        }
    }

    /// Measurement likelihood `g(z | x, s)`.
    pub fn likelihood(&self, z: &Measurement, p: [f64; 2], sensor: [f64; 2]) -> f64 {
        let h = self.measure(p, sensor);
        self.likelihood_from(z, &h)
    }

    pub(crate) fn likelihood_from(&self, z: &Measurement, h: &Measurement) -> f64 {
        let sr = self.range_sigma(h.range);
        let eb = wrap_angle(z.bearing - h.bearing) / self.sigma_bearing;
        let er = (z.range - h.range) / sr;
        (-0.5 * (eb * eb + er * er)).exp() / (2.0 * PI * self.sigma_bearing * sr)
    }
}

/// Parameters of one family of birth components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthSpec {
    /// Number of birth components per step.
    pub count: usize,
    pub existence: f64,
    /// Each velocity axis is drawn from `Uniform(-max_speed, max_speed)`.
    pub max_speed: f64,
    pub pd_low: f64,
    pub pd_high: f64,
}

/// Birth model: target and clutter-generator components appended at each
/// prediction, with positions uniform over the surveillance area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirthModel {
    pub targets: BirthSpec,
    pub clutter: BirthSpec,
}

impl Default for BirthModel {
    fn default() -> Self {
        Self {
            targets: BirthSpec {
                count: 4,
                existence: 0.03,
                max_speed: 10.0,
                pd_low: 0.5,
                pd_high: 1.0,
            },
            clutter: BirthSpec {
                count: 8,
                existence: 0.1,
                max_speed: 0.0,
                pd_low: 0.1,
                pd_high: 0.9,
            },
        }
    }
}

impl BirthModel {
    /// Draws the birth components of one step.
    ///
    /// `fixed_pd` overrides the detection-probability prior (known-parameter
    /// filtering); `with_clutter` controls whether clutter generators are born.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        area: &Area,
        particles: usize,
        pd_bounds: (f64, f64),
        fixed_pd: Option<f64>,
        with_clutter: bool,
        rng: &mut R,
    ) -> Vec<BernoulliComponent> {
        let mut out = Vec::new();
        let mut family = |spec: &BirthSpec, class: ObjectClass, out: &mut Vec<BernoulliComponent>| {
            for _ in 0..spec.count {
                let w = 1.0 / particles as f64;
                let ps = (0..particles)
                    .map(|_| {
                        let px = rng.random::<f64>() * area.width;
                        let py = rng.random::<f64>() * area.height;
                        let (vx, vy) = if spec.max_speed > 0.0 {
                            (
                                rng.random_range(-spec.max_speed..spec.max_speed),
                                rng.random_range(-spec.max_speed..spec.max_speed),
                            )
                        } else {
                            (0.0, 0.0)
                        };
                        let pd = match fixed_pd {
                            Some(pd) => pd,
                            None => {
                                let u: f64 = rng.random();
                                (spec.pd_low + u * (spec.pd_high - spec.pd_low)).clamp(pd_bounds.0, pd_bounds.1)
                            }
                        };
                        HybridParticle::new(class, pd, [px, py, vx, vy], w)
                    })
                    .collect();
                out.push(BernoulliComponent::from_normalized(spec.existence, ps));
            }
        };
        family(&self.targets, ObjectClass::Target, &mut out);
        if with_clutter {
            family(&self.clutter, ObjectClass::ClutterGenerator, &mut out);
        }
        out
    }
}
