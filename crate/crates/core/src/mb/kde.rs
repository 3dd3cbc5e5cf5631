use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use super::density::ComponentDensity;
use super::sampling::SamplePoint;
use crate::belief::{BernoulliComponent, HybridParticle, MultiBernoulliBelief, ObjectClass, ParticleKey};

/// Smallest bandwidth used in any dimension.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

// exp(-x) underflows to exactly 0.0 for x > ~745.13; a single coordinate
// this many bandwidths away already zeroes the whole kernel term.
const ZERO_CUTOFF: f64 = 38.7;

/// Silverman's rule of thumb per dimension for a weighted cloud:
/// `h_d = sigma_d * (4 / ((D + 2) n_eff))^(1 / (D + 4))`, floored at
/// [`BANDWIDTH_FLOOR`].
pub fn silverman_bandwidth<const D: usize>(points: &[[f64; D]], weights: &[f64]) -> [f64; D] {
    let total: f64 = weights.iter().sum();
    if points.is_empty() || !(total > 0.0) {
        return [BANDWIDTH_FLOOR; D];
    }
    let mut mean = [0.0; D];
    let mut sum_sq_w = 0.0;
    for (x, &w) in points.iter().zip(weights) {
        let w = w / total;
        sum_sq_w += w * w;
        for d in 0..D {
            mean[d] += w * x[d];
        }
    }
    let mut var = [0.0; D];
    for (x, &w) in points.iter().zip(weights) {
        let w = w / total;
        for d in 0..D {
            let e = x[d] - mean[d];
            var[d] += w * e * e;
        }
    }
    let n_eff = 1.0 / sum_sq_w;
    let factor = (4.0 / ((D as f64 + 2.0) * n_eff)).powf(1.0 / (D as f64 + 4.0));
    var.map(|v| (v.sqrt() * factor).max(BANDWIDTH_FLOOR))
}

/// Weighted Gaussian kernel density estimate with a diagonal bandwidth.
#[derive(Debug, Clone)]
pub struct GaussianKde<const D: usize> {
    centers: Vec<[f64; D]>,
    weights: Vec<f64>,
    inv_bandwidth: [f64; D],
    norm: f64,
    lo: [f64; D],
    hi: [f64; D],
    /// Centres are sorted along this axis.
    axis: usize,
}

impl<const D: usize> GaussianKde<D> {
    /// `weights` are used as given (not renormalised), so a subset of a
    /// normalised cloud yields a sub-probability density.
    pub fn new(centers: Vec<[f64; D]>, weights: Vec<f64>, bandwidth: [f64; D]) -> Self {
        assert_eq!(centers.len(), weights.len());
        assert!(bandwidth.iter().all(|&h| h > 0.0), "bandwidth must be positive");
        let norm = bandwidth
            .iter()
            .map(|h| 1.0 / (2.0 * PI * h * h).sqrt())
            .product();
        let mut lo = [f64::INFINITY; D];
        let mut hi = [f64::NEG_INFINITY; D];
        for c in &centers {
            for d in 0..D {
                lo[d] = lo[d].min(c[d]);
                hi[d] = hi[d].max(c[d]);
            }
        }
        let inv_bandwidth = bandwidth.map(|h| 1.0 / h);
        let axis = (0..D)
            .max_by(|&a, &b| ((hi[a] - lo[a]) * inv_bandwidth[a]).total_cmp(&((hi[b] - lo[b]) * inv_bandwidth[b])))
            .unwrap_or(0);
        let mut order: Vec<usize> = (0..centers.len()).collect();
        order.sort_by(|&i, &j| centers[i][axis].total_cmp(&centers[j][axis]).then(i.cmp(&j)));
        Self {
            centers: order.iter().map(|&i| centers[i]).collect(),
            weights: order.iter().map(|&i| weights[i]).collect(),
            inv_bandwidth,
            norm,
            lo,
            hi,
            axis,
        }
    }

    /// KDE with Silverman bandwidth scaled by `scale`.
    pub fn silverman(centers: Vec<[f64; D]>, weights: Vec<f64>, scale: f64) -> Self {
        let h = silverman_bandwidth(&centers, &weights).map(|h| h * scale);
        Self::new(centers, weights, h)
    }

    pub fn bandwidth(&self) -> [f64; D] {
        self.inv_bandwidth.map(|v| 1.0 / v)
    }

    pub fn density(&self, x: &[f64; D]) -> f64 {
        for d in 0..D {
            let out = (self.lo[d] - x[d]).max(x[d] - self.hi[d]);
            if out * self.inv_bandwidth[d] > ZERO_CUTOFF {
                return 0.0;
            }
        }
        let reach = ZERO_CUTOFF / self.inv_bandwidth[self.axis];
        let a = self.axis;
        let start = self.centers.partition_point(|c| c[a] < x[a] - reach);
        let end = self.centers.partition_point(|c| c[a] <= x[a] + reach);
        let mut acc = 0.0;
        'centers: for (c, &w) in self.centers[start..end].iter().zip(&self.weights[start..end]) {
            let mut q = 0.0;
            for d in 0..D {
                let z = (x[d] - c[d]) * self.inv_bandwidth[d];
                if z.abs() > ZERO_CUTOFF {
                    continue 'centers;
                }
                q += z * z;
            }
            acc += w * (-0.5 * q).exp();
        }
        acc * self.norm
    }
}

/// Equal-weight KDE of a particle cloud in `(pd, px, py, vx, vy)`
/// coordinates. Only particles of the same class as `x` contribute; each
/// carries weight `1 / len`, so a mixed cloud yields the joint density on
/// the hybrid space. Returns 0 when no particle matches the class.
pub fn kde_density(particles: &[HybridParticle], bandwidth: &[f64; 5], x: &HybridParticle) -> f64 {
    let w = 1.0 / particles.len().max(1) as f64;
    let (centers, weights): (Vec<_>, Vec<_>) = particles
        .iter()
        .filter(|p| p.class == x.class)
        .map(|p| (p.coords(), w))
        .unzip();
    if centers.is_empty() {
        return 0.0;
    }
    GaussianKde::new(centers, weights, *bandwidth).density(&x.coords())
}

/// Per-class kernel density estimates of one Bernoulli component's cloud.
#[derive(Debug, Clone)]
pub struct ComponentKde {
    clutter: Option<GaussianKde<5>>,
    target: Option<GaussianKde<5>>,
}

impl ComponentKde {
    /// Silverman bandwidth is computed per class on that class's particles.
    pub fn new(component: &BernoulliComponent, bandwidth_scale: f64) -> Self {
        let build = |class: ObjectClass| {
            let (centers, weights): (Vec<_>, Vec<_>) = component
                .particles()
                .iter()
                .filter(|p| p.class == class)
                .map(|p| (p.coords(), p.weight))
                .unzip();
            if centers.is_empty() {
                return None;
            }
            let h = silverman_bandwidth(&centers, &weights).map(|h| h * bandwidth_scale);
            Some(GaussianKde::new(centers, weights, h))
        };
        Self {
            clutter: build(ObjectClass::ClutterGenerator),
            target: build(ObjectClass::Target),
        }
    }

    pub fn density(&self, x: &HybridParticle) -> f64 {
        let kde = match x.class {
            ObjectClass::ClutterGenerator => &self.clutter,
            ObjectClass::Target => &self.target,
        };
        kde.as_ref().map_or(0.0, |k| k.density(&x.coords()))
    }
}

/// KDE-based density evaluator for a predicted belief, with memoisation of
/// component/point pairs (sampled points repeat across sets and commands).
#[derive(Debug)]
pub struct KdeDensities {
    kdes: Vec<ComponentKde>,
    cache: RefCell<HashMap<(usize, ParticleKey), f64>>,
}

impl KdeDensities {
    pub fn new(belief: &MultiBernoulliBelief, bandwidth_scale: f64) -> Self {
        Self {
            kdes: belief
                .components()
                .iter()
                .map(|c| ComponentKde::new(c, bandwidth_scale))
                .collect(),
            cache: RefCell::new(HashMap::new()),
        }
    }
}

impl ComponentDensity for KdeDensities {
    fn density(&self, component: usize, point: &SamplePoint) -> f64 {
        let key = (component, point.value.key());
        if let Some(&v) = self.cache.borrow().get(&key) {
            return v;
        }
        let v = self.kdes[component].density(&point.value);
        self.cache.borrow_mut().insert(key, v);
        v
    }
}
