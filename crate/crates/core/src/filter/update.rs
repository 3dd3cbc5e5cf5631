use crate::belief::{BernoulliComponent, HybridParticle, MultiBernoulliBelief, ObjectClass};
use crate::error::{Error, Result};
use crate::filter::model::{Measurement, MeasurementModel};

/// Where the per-particle detection probability comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    /// Use each particle's augmented detection probability.
    PerParticle,
    /// Use one known detection probability everywhere.
    Fixed(f64),
}

/// Knobs of the shared cardinality-balanced update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    pub detection: Detection,
    /// Clutter intensity `kappa(z)` per unit observation volume. Zero for
    /// the robust filter, where clutter is explained by clutter generators.
    pub clutter_intensity: f64,
}

/// Robust update: detection probabilities from the augmented state, clutter
/// modelled solely by clutter-generator particles that emit uniformly over
/// the observation space. No clutter intensity enters.
pub fn update_robust(
    belief: &MultiBernoulliBelief,
    measurements: &[Measurement],
    sensor: [f64; 2],
    model: &MeasurementModel,
) -> MultiBernoulliBelief {
    update_with(
        belief,
        measurements,
        sensor,
        model,
        UpdateParams {
            detection: Detection::PerParticle,
            clutter_intensity: 0.0,
        },
    )
}

/// Classical multi-Bernoulli update with known Poisson clutter rate
/// `clutter_rate` (uniform over the observation space) and constant
/// detection probability `pd`.
pub fn update_known_params(
    belief: &MultiBernoulliBelief,
    measurements: &[Measurement],
    sensor: [f64; 2],
    model: &MeasurementModel,
    clutter_rate: f64,
    pd: f64,
) -> Result<MultiBernoulliBelief> {
    if !(clutter_rate >= 0.0) || !clutter_rate.is_finite() {
        return Err(Error::InvalidParameter(format!("clutter rate {clutter_rate}")));
    }
    if !(0.0..=1.0).contains(&pd) {
        return Err(Error::InvalidParameter(format!("detection probability {pd}")));
    }
    Ok(update_with(
        belief,
        measurements,
        sensor,
        model,
        UpdateParams {
            detection: Detection::Fixed(pd),
            clutter_intensity: clutter_rate / model.observation_volume(),
        },
    ))
}

/// Cardinality-balanced multi-Bernoulli update on the hybrid space.
///
/// Output order: one legacy (missed-detection) component per input
/// component with nonzero existence, then one component per measurement.
/// With `rho_i = <p_i, pd>` and `rho_{z,i} = <p_i, psi_z>`:
///
/// * legacy `r = r_i (1 - rho_i) / (1 - r_i rho_i)`, weights `w (1 - pd)`;
/// * measurement `r = sum_i r_i (1 - r_i) rho_{z,i} / (1 - r_i rho_i)^2`
///   `/ (kappa + sum_i r_i rho_{z,i} / (1 - r_i rho_i))`, weights
///   `r_i / (1 - r_i) * w * psi_z`,
///
/// where `psi_z = pd * g(z | x, s)` for targets and `pd / V` for clutter
/// generators.
pub fn update_with(
    belief: &MultiBernoulliBelief,
    measurements: &[Measurement],
    sensor: [f64; 2],
    model: &MeasurementModel,
    params: UpdateParams,
) -> MultiBernoulliBelief {
    let components = belief.components();
    let inv_volume = 1.0 / model.observation_volume();
    let pd_of = |p: &HybridParticle| match params.detection {
        Detection::PerParticle => p.pd,
        Detection::Fixed(pd) => pd,
    };

    let mut out = Vec::with_capacity(components.len() + measurements.len());
    let mut rho = Vec::with_capacity(components.len());
    for c in components {
        let r = c.existence();
        let rho_i: f64 = c.particles().iter().map(|p| p.weight * pd_of(p)).sum();
        rho.push(rho_i);
        if r <= 0.0 {
            continue;
        }
        let r_legacy = r * (1.0 - rho_i) / (1.0 - r * rho_i);
        if !(r_legacy > 0.0) {
            continue;
        }
        let mut ps: Vec<HybridParticle> = c
            .particles()
            .iter()
            .map(|p| HybridParticle {
                weight: p.weight * (1.0 - pd_of(p)),
                ..*p
            })
            .collect();
        let total: f64 = ps.iter().map(|p| p.weight).sum();
        if !(total > 0.0) {
            continue;
        }
        for p in ps.iter_mut() {
            p.weight /= total;
        }
        out.push(BernoulliComponent::from_normalized(r_legacy, ps));
    }

    if measurements.is_empty() {
        return MultiBernoulliBelief::new(out);
    }

    // Sensor-relative geometry does not depend on z.
    let predicted: Vec<Vec<Option<Measurement>>> = components
        .iter()
        .map(|c| {
            c.particles()
                .iter()
                .map(|p| (p.class == ObjectClass::Target).then(|| model.measure(p.position(), sensor)))
                .collect()
        })
        .collect();

    let mut psi: Vec<Vec<f64>> = components.iter().map(|c| vec![0.0; c.len()]).collect();
    for z in measurements {
        let mut numerator = 0.0;
        let mut denominator = params.clutter_intensity;
        for (i, c) in components.iter().enumerate() {
            let r = c.existence();
            let mut rho_z = 0.0;
            for (j, p) in c.particles().iter().enumerate() {
                let likelihood = match &predicted[i][j] {
                    Some(h) => model.likelihood_from(z, h),
                    None => inv_volume,
                };
                let v = pd_of(p) * likelihood;
                psi[i][j] = v;
                rho_z += p.weight * v;
            }
            if r <= 0.0 {
                continue;
            }
            let miss = 1.0 - r * rho[i];
            numerator += r * (1.0 - r) * rho_z / (miss * miss);
            denominator += r * rho_z / miss;
        }
        if !(denominator > 0.0) || !(numerator > 0.0) {
            continue;
        }
        let r_update = numerator / denominator;

        let mut ps = Vec::new();
        for (i, c) in components.iter().enumerate() {
            let r = c.existence();
            if r <= 0.0 {
                continue;
            }
            let odds = r / (1.0 - r);
            for (j, p) in c.particles().iter().enumerate() {
                let w = odds * p.weight * psi[i][j];
                if w > 0.0 {
                    ps.push(HybridParticle { weight: w, ..*p });
                }
            }
        }
        let total: f64 = ps.iter().map(|p| p.weight).sum();
        if !(total > 0.0) || !total.is_finite() {
            continue;
        }
        for p in ps.iter_mut() {
            p.weight /= total;
        }
        out.push(BernoulliComponent::from_normalized(r_update, ps));
    }
    MultiBernoulliBelief::new(out)
}
