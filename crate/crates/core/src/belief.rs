//! Particle representation of multi-Bernoulli beliefs on the hybrid
//! (clutter generator / target) single-object space.

use crate::error::{Error, Result};

/// Upper bound applied to every existence probability. Set densities divide
/// by `1 - r`, so `r` never reaches one.
pub const MAX_EXISTENCE: f64 = 1.0 - 1e-6;

/// Kinematic state `[px, py, vx, vy]` in metres and metres per second.
pub type Kinematic = [f64; 4];

/// Which part of the hybrid state space a particle lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectClass {
    /// Hypothetical object that only ever produces clutter measurements.
    ClutterGenerator,
    /// Actual target.
    Target,
}

impl ObjectClass {
    pub fn label(self) -> u8 {
        match self {
            ObjectClass::ClutterGenerator => 0,
            ObjectClass::Target => 1,
        }
    }
}

/// One weighted sample of the augmented single-object state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridParticle {
    pub class: ObjectClass,
    /// Detection probability carried as part of the state.
    pub pd: f64,
    pub state: Kinematic,
    pub weight: f64,
}

/// Bit-exact identity of a particle's location in the hybrid space. Two
/// particles share a key iff they sit at the same point (weights ignored).
pub type ParticleKey = (u8, [u64; 5]);

impl HybridParticle {
    pub fn new(class: ObjectClass, pd: f64, state: Kinematic, weight: f64) -> Self {
        Self {
            class,
            pd,
            state,
            weight,
        }
    }

    /// Coordinates used by kernel density estimation: `(pd, px, py, vx, vy)`.
    pub fn coords(&self) -> [f64; 5] {
        [
            self.pd,
            self.state[0],
            self.state[1],
            self.state[2],
            self.state[3],
        ]
    }

    pub fn position(&self) -> [f64; 2] {
        [self.state[0], self.state[1]]
    }

    pub fn key(&self) -> ParticleKey {
        let c = self.coords();
        (self.class.label(), c.map(f64::to_bits))
    }
}

/// A Bernoulli random finite set: empty with probability `1 - r`, otherwise a
/// single object distributed according to the particle cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliComponent {
    existence: f64,
    particles: Vec<HybridParticle>,
}

impl BernoulliComponent {
    /// Builds a component, clamping `r` into `[0, MAX_EXISTENCE]` and
    /// normalising the particle weights.
    pub fn new(existence: f64, mut particles: Vec<HybridParticle>) -> Result<Self> {
        if !existence.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "existence probability {existence}"
            )));
        }
        let existence = existence.clamp(0.0, MAX_EXISTENCE);
        if particles.is_empty() {
            if existence > 0.0 {
                return Err(Error::EmptyComponent(existence));
            }
        } else {
            normalize(&mut particles)?;
        }
        Ok(Self {
            existence,
            particles,
        })
    }

    /// Builds a component from particles whose weights are already normalised.
    pub(crate) fn from_normalized(existence: f64, particles: Vec<HybridParticle>) -> Self {
        debug_assert!(!particles.is_empty());
        Self {
            existence: existence.clamp(0.0, MAX_EXISTENCE),
            particles,
        }
    }

    pub fn existence(&self) -> f64 {
        self.existence
    }

    pub fn particles(&self) -> &[HybridParticle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Weight mass of the particles in `class`.
    pub fn class_mass(&self, class: ObjectClass) -> f64 {
        self.particles
            .iter()
            .filter(|p| p.class == class)
            .map(|p| p.weight)
            .sum()
    }

    /// Existence probability of the `class` part: `r * mass(class)`.
    pub fn class_existence(&self, class: ObjectClass) -> f64 {
        self.existence * self.class_mass(class)
    }

    /// Weighted mean kinematic state over the particles of `class`.
    pub fn class_mean(&self, class: ObjectClass) -> Option<Kinematic> {
        let mut mass = 0.0;
        let mut mean = [0.0; 4];
        for p in self.particles.iter().filter(|p| p.class == class) {
            mass += p.weight;
            for (m, s) in mean.iter_mut().zip(p.state) {
                *m += p.weight * s;
            }
        }
        (mass > 0.0).then(|| mean.map(|m| m / mass))
    }

    /// Weighted mean detection probability over the particles of `class`.
    pub fn class_mean_pd(&self, class: ObjectClass) -> Option<f64> {
        let (mass, acc) = self
            .particles
            .iter()
            .filter(|p| p.class == class)
            .fold((0.0, 0.0), |(m, a), p| (m + p.weight, a + p.weight * p.pd));
        (mass > 0.0).then(|| acc / mass)
    }

    /// The `class` part of this Bernoulli: existence `r * mass(class)` and the
    /// conditional cloud. `None` when the component carries no mass in `class`.
    pub fn restrict(&self, class: ObjectClass) -> Option<BernoulliComponent> {
        let mass = self.class_mass(class);
        if mass <= 0.0 {
            return None;
        }
        let particles = self
            .particles
            .iter()
            .filter(|p| p.class == class)
            .map(|p| HybridParticle {
                weight: p.weight / mass,
                ..*p
            })
            .collect();
        Some(Self::from_normalized(self.existence * mass, particles))
    }
}

pub(crate) fn normalize(particles: &mut [HybridParticle]) -> Result<()> {
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateComponent);
    }
    for p in particles.iter_mut() {
        p.weight /= total;
    }
    Ok(())
}

/// Ordered collection of Bernoulli components.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultiBernoulliBelief {
    components: Vec<BernoulliComponent>,
}

impl MultiBernoulliBelief {
    pub fn new(components: Vec<BernoulliComponent>) -> Self {
        Self { components }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn components(&self) -> &[BernoulliComponent] {
        &self.components
    }

    pub fn into_components(self) -> Vec<BernoulliComponent> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn push(&mut self, c: BernoulliComponent) {
        self.components.push(c);
    }

    pub fn existences(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.existence()).collect()
    }

    /// Expected total cardinality, both classes.
    pub fn expected_cardinality(&self) -> f64 {
        self.components.iter().map(|c| c.existence()).sum()
    }

    pub fn expected_class_cardinality(&self, class: ObjectClass) -> f64 {
        self.components.iter().map(|c| c.class_existence(class)).sum()
    }

    /// Multi-Bernoulli of the `class` objects alone. Thinning each Bernoulli
    /// by its class mass is exact, so this is the marginal of the belief on
    /// one half of the hybrid space.
    pub fn restrict(&self, class: ObjectClass) -> MultiBernoulliBelief {
        Self::new(
            self.components
                .iter()
                .filter_map(|c| c.restrict(class))
                .collect(),
        )
    }
}

impl FromIterator<BernoulliComponent> for MultiBernoulliBelief {
    fn from_iter<I: IntoIterator<Item = BernoulliComponent>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}
