#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use robust_mb::mb::{cardinality_pmf, log_mb_density, sample_multi_bernoulli, ComponentDensity, SamplePoint};
use robust_mb::{BernoulliComponent, HybridParticle, MultiBernoulliBelief, ObjectClass};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn particle(x: f64, y: f64) -> HybridParticle {
    HybridParticle::new(ObjectClass::Target, 0.9, [x, y, 0.0, 0.0], 1.0)
}

/// Equal-weight belief with `len` distinct particles per component.
pub fn belief(rs: &[f64], len: usize) -> MultiBernoulliBelief {
    rs.iter()
        .enumerate()
        .map(|(i, &r)| {
            let ps = (0..len).map(|j| particle(i as f64, j as f64)).collect();
            BernoulliComponent::new(r, ps).unwrap()
        })
        .collect()
}

/// Pearson chi-square p-value; cells with expectation below 5 are pooled
/// into their neighbour.
pub fn chi2_pvalue(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        obs += c as f64;
        exp += p * n as f64;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    1.0 - ChiSquared::new((cells.len() - 1) as f64).unwrap().cdf(stat)
}

/// Chi-square p-value of the sampled cardinality law against the exact pmf.
pub fn cardinality_pvalue<R: Rng>(rs: &[f64], samples: usize, rng: &mut R) -> f64 {
    let b = belief(rs, 3);
    let mut counts = vec![0u64; rs.len() + 1];
    for set in sample_multi_bernoulli(&b, samples, rng) {
        counts[set.cardinality()] += 1;
    }
    chi2_pvalue(&counts, &cardinality_pmf(&b.existences()))
}

/// `table[i][j]`: density of component `i` at point `j`.
pub struct Table(pub Vec<Vec<f64>>);

impl ComponentDensity for Table {
    fn density(&self, component: usize, point: &SamplePoint) -> f64 {
        self.0[component][point.particle]
    }
}

pub fn table_points(n: usize) -> Vec<SamplePoint> {
    (0..n)
        .map(|j| SamplePoint {
            component: 0,
            particle: j,
            value: particle(j as f64, 0.0),
        })
        .collect()
}

/// Multi-Bernoulli density by enumeration of every ordered tuple of
/// distinct components.
pub fn brute_force_density(rs: &[f64], table: &[Vec<f64>], n: usize) -> f64 {
    fn go(rs: &[f64], table: &[Vec<f64>], j: usize, n: usize, used: &mut Vec<bool>) -> f64 {
        if j == n {
            return 1.0;
        }
        let mut acc = 0.0;
        for i in 0..rs.len() {
            if !used[i] {
                used[i] = true;
                acc += rs[i] / (1.0 - rs[i]) * table[i][j] * go(rs, table, j + 1, n, used);
                used[i] = false;
            }
        }
        acc
    }
    let empty: f64 = rs.iter().map(|r| 1.0 - r).product();
    empty * go(rs, table, 0, n, &mut vec![false; rs.len()])
}

/// Isotropic 2-D Gaussian densities on particle positions.
pub struct Gaussians {
    pub means: Vec<[f64; 2]>,
    pub sigma: f64,
}

impl Gaussians {
    pub fn pdf(&self, i: usize, p: [f64; 2]) -> f64 {
        let s2 = self.sigma * self.sigma;
        let dx = p[0] - self.means[i][0];
        let dy = p[1] - self.means[i][1];
        (-(dx * dx + dy * dy) / (2.0 * s2)).exp() / (2.0 * PI * s2)
    }
}

impl ComponentDensity for Gaussians {
    fn density(&self, component: usize, point: &SamplePoint) -> f64 {
        self.pdf(component, point.value.position())
    }
}

/// Importance-sampled set integral `sum_n (1/n!) int pi({x_1..x_n})` of a
/// multi-Bernoulli density with Gaussian components, using a broad
/// Gaussian proposal centred on the component means.
pub fn set_integral<R: Rng>(rs: &[f64], dens: &Gaussians, draws: usize, rng: &mut R) -> f64 {
    let m = rs.len();
    let cx = dens.means.iter().map(|p| p[0]).sum::<f64>() / m as f64;
    let cy = dens.means.iter().map(|p| p[1]).sum::<f64>() / m as f64;
    let spread = dens
        .means
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let q_sigma = 2.0 * dens.sigma + spread;
    let proposal = Gaussians {
        means: vec![[cx, cy]],
        sigma: q_sigma,
    };
    let normal = Normal::new(0.0, q_sigma).unwrap();
    let mut total = (0..m).map(|i| 1.0 - rs[i]).product::<f64>();
    let mut factorial = 1.0;
    for n in 1..=m {
        factorial *= n as f64;
        let mut acc = 0.0;
        for _ in 0..draws {
            let mut points = Vec::with_capacity(n);
            let mut log_q = 0.0;
            for j in 0..n {
                let p = [cx + normal.sample(rng), cy + normal.sample(rng)];
                log_q += proposal.pdf(0, p).ln();
                points.push(SamplePoint {
                    component: 0,
                    particle: j,
                    value: particle(p[0], p[1]),
                });
            }
            let log_pi = log_mb_density(rs, &points, dens, 20).unwrap();
            acc += (log_pi - log_q).exp();
        }
        total += acc / draws as f64 / factorial;
    }
    total
}
