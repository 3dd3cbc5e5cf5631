use rand::Rng;

use crate::belief::{HybridParticle, MultiBernoulliBelief};

/// One element of a sampled set, with the component and particle it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub component: usize,
    pub particle: usize,
    pub value: HybridParticle,
}

/// One Monte Carlo realisation of a multi-Bernoulli random set. Every
/// component contributes at most one point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub points: Vec<SamplePoint>,
}

impl SampleSet {
    pub fn cardinality(&self) -> usize {
        self.points.len()
    }
}

/// Draws `count` realisations of a multi-Bernoulli distribution whose
/// components carry equal-weight particle clouds.
///
/// For every realisation and every component `i`, a uniform draw below `r_i`
/// includes the component, and a second uniform draw picks one of its
/// particles. Clouds may differ in length; the index is uniform over each
/// component's own cloud.
pub fn sample_multi_bernoulli<R: Rng + ?Sized>(
    belief: &MultiBernoulliBelief,
    count: usize,
    rng: &mut R,
) -> Vec<SampleSet> {
    let components = belief.components();
    (0..count)
        .map(|_| {
            let mut set = SampleSet::default();
            for (i, c) in components.iter().enumerate() {
                let u: f64 = rng.random();
                if u < c.existence() {
                    let v: f64 = rng.random();
                    let n = c.len();
                    let j = ((n as f64 * v) as usize).min(n - 1);
                    set.points.push(SamplePoint {
                        component: i,
                        particle: j,
                        value: c.particles()[j],
                    });
                }
            }
            set
        })
        .collect()
}

/// Exact distribution of the number of objects in a multi-Bernoulli set
/// (a sum of independent Bernoulli variables), by repeated convolution.
pub fn cardinality_pmf(existences: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &r in existences {
        let mut next = vec![0.0; pmf.len() + 1];
        for (n, &p) in pmf.iter().enumerate() {
            next[n] += p * (1.0 - r);
            next[n + 1] += p * r;
        }
        pmf = next;
    }
    pmf
}
