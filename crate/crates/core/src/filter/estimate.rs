use crate::belief::{Kinematic, MultiBernoulliBelief, ObjectClass};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectEstimate {
    pub class: ObjectClass,
    pub state: Kinematic,
}

/// Point estimates extracted from a belief.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Estimates {
    /// Estimated number of actual targets.
    pub n_targets: usize,
    pub target_states: Vec<Kinematic>,
    /// Expected number of clutter measurements per scan.
    pub clutter_rate: f64,
    /// Estimates of all objects, clutter generators included.
    pub all_objects: Vec<ObjectEstimate>,
}

/// Target count `round(sum_i r_i(1))`, target states from the components
/// with largest target existence, clutter rate `sum_i r_i(0) E[pd | u = 0]`.
///
/// `all_objects` takes the `round(sum_i r_i)` most likely components with
/// the mean of each component's dominant class.
pub fn extract_estimates(belief: &MultiBernoulliBelief) -> Estimates {
    let comps = belief.components();

    let target_r: Vec<f64> = comps
        .iter()
        .map(|c| c.class_existence(ObjectClass::Target))
        .collect();
    let n_targets = target_r.iter().sum::<f64>().round() as usize;
    let mut order: Vec<usize> = (0..comps.len()).collect();
    order.sort_by(|&a, &b| target_r[b].total_cmp(&target_r[a]).then(a.cmp(&b)));
    let target_states = order
        .iter()
        .take(n_targets)
        .filter_map(|&i| comps[i].class_mean(ObjectClass::Target))
        .collect();

    let clutter_rate = comps
        .iter()
        .map(|c| {
            c.class_existence(ObjectClass::ClutterGenerator)
                * c.class_mean_pd(ObjectClass::ClutterGenerator).unwrap_or(0.0)
        })
        .sum();

    let n_all = belief.expected_cardinality().round() as usize;
    let mut order: Vec<usize> = (0..comps.len()).collect();
    order.sort_by(|&a, &b| {
        comps[b]
            .existence()
            .total_cmp(&comps[a].existence())
            .then(a.cmp(&b))
    });
    let all_objects = order
        .iter()
        .take(n_all)
        .filter_map(|&i| {
            let c = &comps[i];
            let class = if c.class_mass(ObjectClass::Target) >= c.class_mass(ObjectClass::ClutterGenerator) {
                ObjectClass::Target
            } else {
                ObjectClass::ClutterGenerator
            };
            c.class_mean(class).map(|state| ObjectEstimate { class, state })
        })
        .collect();

    Estimates {
        n_targets,
        target_states,
        clutter_rate,
        all_objects,
    }
}
