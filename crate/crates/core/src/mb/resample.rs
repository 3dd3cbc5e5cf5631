use rand::Rng;

use crate::belief::{BernoulliComponent, HybridParticle};
use crate::error::{Error, Result};

/// Systematic resampling: returns `n` ancestor indices drawn from `weights`
/// with a single uniform offset. Weights need not be normalised.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateComponent);
    }
    let step = total / n as f64;
    let mut position = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for _ in 0..n {
        while position >= cumulative && i + 1 < weights.len() {
            i += 1;
            cumulative += weights[i];
        }
        // Never land on a zero-weight tail entry through rounding.
        let mut j = i;
        while weights[j] <= 0.0 && j > 0 {
            j -= 1;
        }
        out.push(j);
        position += step;
    }
    Ok(out)
}

/// Resamples a component to exactly `n` equal-weight particles. The
/// existence probability is carried over unchanged.
pub fn resample_component<R: Rng + ?Sized>(
    component: &BernoulliComponent,
    n: usize,
    rng: &mut R,
) -> Result<BernoulliComponent> {
    if n == 0 {
        return Err(Error::InvalidParameter("resample size must be positive".into()));
    }
    let weights: Vec<f64> = component.particles().iter().map(|p| p.weight).collect();
    let indices = systematic_indices(&weights, n, rng)?;
    let w = 1.0 / n as f64;
    let particles: Vec<HybridParticle> = indices
        .into_iter()
        .map(|i| HybridParticle {
            weight: w,
            ..component.particles()[i]
        })
        .collect();
    Ok(BernoulliComponent::from_normalized(component.existence(), particles))
}
