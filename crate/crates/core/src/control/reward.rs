use rand::Rng;

use crate::belief::MultiBernoulliBelief;
use crate::error::{Error, Result};
use crate::mb::{
    log_mb_density, sample_multi_bernoulli, ComponentDensity, KdeDensities, PreparedSet, ProvenanceWeights,
};

/// Sets whose combined term bound is below this fraction of the evaluated
/// sum are left out.
pub const SKIP_TOLERANCE: f64 = 1e-9;
/// Largest point chunk used by the cheap predicted-density bound.
const BOUND_CHUNK: usize = 10;

/// Monte Carlo estimate of the Rényi reward for one command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardEstimate {
    /// `(1/L) sum_l [pi_pred(X_l) / pi_upd(X_l)]^(1 - alpha)`, an estimate of
    /// `int pi_upd^alpha pi_pred^(1 - alpha) dX`.
    pub sum: f64,
    /// `log(sum) / (alpha - 1)`, in nats. Larger means more information.
    pub divergence: f64,
    pub samples: usize,
    /// Sets whose predicted density exceeded the assignment cap and entered
    /// through its upper bound instead.
    pub bounded: usize,
}

impl RewardEstimate {
    fn new(sum: f64, alpha: f64, samples: usize, bounded: usize) -> Self {
        Self {
            sum,
            divergence: sum.ln() / (alpha - 1.0),
            samples,
            bounded,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Rényi reward between a predicted belief and the belief updated with an
/// ideal measurement set.
///
/// `upd` must carry equal-weight clouds. Sets are drawn from `upd`; the
/// updated density of a sampled point is the weight of the coinciding
/// particles of the updated cloud, the predicted density is a Gaussian KDE of
/// the predicted cloud (Silverman bandwidth times `bandwidth_scale`).
pub fn renyi_reward<R: Rng + ?Sized>(
    pred: &MultiBernoulliBelief,
    upd: &MultiBernoulliBelief,
    alpha: f64,
    samples: usize,
    bandwidth_scale: f64,
    cap: usize,
    rng: &mut R,
) -> Result<RewardEstimate> {
    let pred_dens = KdeDensities::new(pred, bandwidth_scale);
    let upd_dens = ProvenanceWeights::new(upd);
    renyi_reward_with(
        upd,
        &upd_dens,
        &pred.existences(),
        &pred_dens,
        alpha,
        samples,
        cap,
        rng,
    )
}

/// [`renyi_reward`] with caller-supplied single-object density evaluators.
///
/// Sets whose predicted density has small blocks are evaluated exactly.
/// The rest are evaluated in decreasing order of an upper bound on their
/// term, stopping once the remaining bounds add up to less than
/// [`SKIP_TOLERANCE`] times the sum so far; skipped sets count as zero.
#[allow(clippy::too_many_arguments)]
pub fn renyi_reward_with<R, U, P>(
    upd: &MultiBernoulliBelief,
    upd_dens: &U,
    pred_existences: &[f64],
    pred_dens: &P,
    alpha: f64,
    samples: usize,
    cap: usize,
    rng: &mut R,
) -> Result<RewardEstimate>
where
    R: Rng + ?Sized,
    U: ComponentDensity + ?Sized,
    P: ComponentDensity + ?Sized,
{
    check_alpha(alpha)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("reward needs at least one sample".into()));
    }
    let upd_existences = upd.existences();
    let exponent = 1.0 - alpha;
    let mut terms = vec![0.0; samples];
    let mut pending = Vec::new();
    let mut evaluated = 0.0;
    let mut bounded = 0;
    for (l, set) in sample_multi_bernoulli(upd, samples, rng).into_iter().enumerate() {
        let log_upd = log_mb_density(&upd_existences, &set.points, upd_dens, cap)?;
        debug_assert!(log_upd.is_finite(), "sampled set has zero updated density");
        let pred = PreparedSet::new(pred_existences, &set.points, pred_dens);
        let bound = term(exponent, pred.log_upper_bound(BOUND_CHUNK), log_upd);
        if pred.is_small(BOUND_CHUNK) {
            terms[l] = bound;
            evaluated += bound;
        } else if bound > 0.0 {
            pending.push((l, bound, pred, log_upd));
        }
    }

    // Large sets are evaluated in decreasing order of their bound until the
    // bounds left over cannot move the sum by more than the tolerance.
    pending.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut left: f64 = pending.iter().map(|p| p.1).sum();
    for (l, bound, pred, log_upd) in pending {
        if left <= SKIP_TOLERANCE * evaluated {
            break;
        }
        terms[l] = match pred.log_density(cap) {
            Ok(log_pred) => term(exponent, log_pred, log_upd),
            Err(Error::CardinalityTooLarge { .. }) => {
                bounded += 1;
                bound
            }
            Err(e) => return Err(e),
        };
        evaluated += terms[l];
        left -= bound;
    }
    let sum: f64 = terms.iter().sum();
    Ok(RewardEstimate::new(sum / samples as f64, alpha, samples, bounded))
}

fn term(exponent: f64, log_pred: f64, log_upd: f64) -> f64 {
    if log_pred == f64::NEG_INFINITY {
        return 0.0;
    }
    (exponent * (log_pred - log_upd)).exp()
}
