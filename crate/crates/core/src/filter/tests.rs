use super::*;
use crate::belief::{ObjectClass, MAX_EXISTENCE};
use crate::geometry::distance;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn cloud(class: ObjectClass, pd: f64, center: [f64; 2], spread: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<HybridParticle> {
    let noise = Normal::new(0.0, spread.max(1e-12)).unwrap();
    (0..n)
        .map(|_| {
            let x = if spread > 0.0 { noise.sample(rng) } else { 0.0 };
            let y = if spread > 0.0 { noise.sample(rng) } else { 0.0 };
            HybridParticle::new(class, pd, [center[0] + x, center[1] + y, 0.0, 0.0], 1.0)
        })
        .collect()
}

fn component(r: f64, ps: Vec<HybridParticle>) -> BernoulliComponent {
    BernoulliComponent::new(r, ps).unwrap()
}

#[test]
fn predict_scales_existence_by_survival() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let belief = MultiBernoulliBelief::new(vec![component(
        0.5,
        cloud(ObjectClass::Target, 0.9, [100.0, 100.0], 5.0, 100, &mut rng),
    )]);
    let pred = predict(&belief, &MotionModel::default(), vec![], &mut rng);
    assert!((pred.components()[0].existence() - 0.49).abs() < 1e-15);
}

#[test]
fn predict_mixed_survival_reweights_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ps = cloud(ObjectClass::Target, 0.9, [0.0, 0.0], 1.0, 2, &mut rng);
    ps.extend(cloud(ObjectClass::ClutterGenerator, 0.5, [0.0, 0.0], 1.0, 2, &mut rng));
    let belief = MultiBernoulliBelief::new(vec![component(0.5, ps)]);
    let motion = MotionModel::default();
    let pred = predict(&belief, &motion, vec![], &mut rng);
    let c = &pred.components()[0];
    assert!((c.existence() - 0.5 * (0.5 * 0.98 + 0.5 * 0.9)).abs() < 1e-15);
    assert!((c.class_mass(ObjectClass::Target) - 0.98 / (0.98 + 0.9)).abs() < 1e-12);
}

#[test]
fn predict_without_noise_keeps_static_particles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let motion = MotionModel {
        sigma_acc: 0.0,
        pd_jitter: 0.0,
        ..Default::default()
    };
    let ps = cloud(ObjectClass::Target, 0.9, [10.0, 20.0], 3.0, 50, &mut rng);
    let belief = MultiBernoulliBelief::new(vec![component(0.5, ps.clone())]);
    let pred = predict(&belief, &motion, vec![], &mut rng);
    for (a, b) in ps.iter().zip(pred.components()[0].particles()) {
        assert_eq!(a.state, b.state);
        assert_eq!(a.pd, b.pd);
    }
}

#[test]
fn predicted_velocity_covariance_matches_ncv_model() {
    // Oracle: for x' = F x + G a with a ~ N(0, s^2 I), the velocity block of
    // the added covariance is s^2 dt^2 per axis, cross-axis zero.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let motion = MotionModel::default();
    let n = 10_000;
    let ps: Vec<_> = (0..n)
        .map(|_| HybridParticle::new(ObjectClass::Target, 0.9, [500.0, 500.0, 3.0, -2.0], 1.0))
        .collect();
    let belief = MultiBernoulliBelief::new(vec![component(0.5, ps)]);
    let pred = predict(&belief, &motion, vec![], &mut rng);
    let vs: Vec<[f64; 2]> = pred.components()[0]
        .particles()
        .iter()
        .map(|p| [p.state[2], p.state[3]])
        .collect();
    let mean = [
        vs.iter().map(|v| v[0]).sum::<f64>() / n as f64,
        vs.iter().map(|v| v[1]).sum::<f64>() / n as f64,
    ];
    let cov = |a: usize, b: usize| {
        vs.iter().map(|v| (v[a] - mean[a]) * (v[b] - mean[b])).sum::<f64>() / (n - 1) as f64
    };
    let expected = motion.axis_noise_covariance()[1][1];
    assert!((expected - 4.0).abs() < 1e-12);
    assert!((cov(0, 0) / expected - 1.0).abs() < 0.1);
    assert!((cov(1, 1) / expected - 1.0).abs() < 0.1);
    assert!(cov(0, 1).abs() < 0.1 * expected);
}

#[test]
fn legacy_only_update_for_empty_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let belief = MultiBernoulliBelief::new(vec![component(
        0.5,
        cloud(ObjectClass::Target, 0.9, [300.0, 300.0], 10.0, 20, &mut rng),
    )]);
    let upd = update_robust(&belief, &[], [0.0, 0.0], &MeasurementModel::default());
    assert_eq!(upd.len(), 1);
    let expected = 0.5 * 0.1 / (1.0 - 0.45);
    assert!((upd.components()[0].existence() - expected).abs() < 1e-15);
    assert!((expected - 0.090_909_090_909).abs() < 1e-10);
}

#[test]
fn zero_detection_probability_leaves_legacy_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let model = MeasurementModel::default();
    let ps = cloud(ObjectClass::Target, 0.0, [300.0, 300.0], 10.0, 20, &mut rng);
    let belief = MultiBernoulliBelief::new(vec![component(0.7, ps)]);
    let z = [model.measure([300.0, 300.0], [0.0, 0.0])];
    let upd = update_robust(&belief, &z, [0.0, 0.0], &model);
    assert_eq!(upd.len(), 1);
    assert_eq!(upd.components()[0].existence(), 0.7);
    for (a, b) in upd.components()[0].particles().iter().zip(belief.components()[0].particles()) {
        assert_eq!(a.state, b.state);
        assert!((a.weight - b.weight).abs() < 1e-15);
    }
}

#[test]
fn near_component_dominates_measurement_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = MeasurementModel::default();
    let sensor = [0.0, 0.0];
    let near = [400.0, 300.0];
    let far = [100.0, 900.0];
    let belief = MultiBernoulliBelief::new(vec![
        component(0.6, cloud(ObjectClass::Target, 0.9, near, 5.0, 200, &mut rng)),
        component(0.6, cloud(ObjectClass::Target, 0.9, far, 5.0, 200, &mut rng)),
    ]);
    let z = model.measure(near, sensor);
    let upd = update_robust(&belief, &[z], sensor, &model);
    assert_eq!(upd.len(), 3);
    let c = &upd.components()[2];
    let near_mass: f64 = c
        .particles()
        .iter()
        .filter(|p| p.class == ObjectClass::Target && distance(p.position(), near) < 100.0)
        .map(|p| p.weight)
        .sum();
    assert!(near_mass / c.class_mass(ObjectClass::Target) > 0.99);
}

#[test]
fn known_params_without_detection_is_uninformative() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = MeasurementModel::default();
    let belief = MultiBernoulliBelief::new(vec![component(
        0.4,
        cloud(ObjectClass::Target, 0.98, [200.0, 200.0], 10.0, 30, &mut rng),
    )]);
    let z = [model.measure([200.0, 200.0], [0.0, 0.0])];
    let upd = update_known_params(&belief, &z, [0.0, 0.0], &model, 15.0, 0.0).unwrap();
    assert_eq!(upd.len(), 1);
    assert_eq!(upd.components()[0].existence(), 0.4);
}

#[test]
fn known_params_clutter_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = MeasurementModel::default();
    let belief = MultiBernoulliBelief::new(vec![component(
        0.4,
        cloud(ObjectClass::Target, 0.98, [200.0, 200.0], 10.0, 30, &mut rng),
    )]);
    let z = [model.measure([200.0, 200.0], [0.0, 0.0])];
    let mut last = f64::INFINITY;
    for kappa in [0.0, 1.0, 1e3, 1e6, 1e12, 1e300] {
        let upd = update_known_params(&belief, &z, [0.0, 0.0], &model, kappa, 0.98).unwrap();
        let r_u = upd.components()[1].existence();
        assert!(r_u <= last);
        last = r_u;
    }
    assert!(last < 1e-250);
    assert!(update_known_params(&belief, &z, [0.0, 0.0], &model, -1.0, 0.98).is_err());
}

#[test]
fn known_params_two_particle_hand_evaluation() {
    let model = MeasurementModel::default();
    let sensor = [50.0, 60.0];
    let x1 = [300.0, 280.0];
    let x2 = [310.0, 300.0];
    let ps = vec![
        HybridParticle::new(ObjectClass::Target, 0.98, [x1[0], x1[1], 0.0, 0.0], 0.5),
        HybridParticle::new(ObjectClass::Target, 0.98, [x2[0], x2[1], 0.0, 0.0], 0.5),
    ];
    let r = 0.6;
    let belief = MultiBernoulliBelief::new(vec![component(r, ps)]);
    let z = Measurement {
        bearing: 0.73,
        range: 340.0,
    };
    let (kappa, pd) = (15.0, 0.9);
    let upd = update_known_params(&belief, &[z], sensor, &model, kappa, pd).unwrap();

    let g1 = model.likelihood(&z, x1, sensor);
    let g2 = model.likelihood(&z, x2, sensor);
    let rho_z = 0.5 * pd * g1 + 0.5 * pd * g2;
    let kz = kappa / (2.0 * std::f64::consts::PI * 1415.0);
    let miss = 1.0 - r * pd;
    let r_u = (r * (1.0 - r) * rho_z / (miss * miss)) / (kz + r * rho_z / miss);
    let r_l = r * (1.0 - pd) / miss;
    assert!((upd.components()[0].existence() - r_l).abs() < 1e-12);
    assert!((upd.components()[1].existence() - r_u).abs() < 1e-12 * r_u.max(1e-300));
    let w1 = g1 / (g1 + g2);
    assert!((upd.components()[1].particles()[0].weight - w1).abs() < 1e-12);
}

#[test]
fn prune_threshold_and_cap() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mk = |r: f64, x: f64, rng: &mut ChaCha8Rng| component(r, cloud(ObjectClass::Target, 0.9, [x, x], 1.0, 5, rng));
    let belief = MultiBernoulliBelief::new(vec![mk(0.5, 1.0, &mut rng), mk(0.0001, 2.0, &mut rng), mk(0.9, 3.0, &mut rng)]);
    let out = prune(&belief, 1e-3, 2, 10, &mut rng).unwrap();
    assert_eq!(out.existences(), vec![0.9, 0.5]);
    assert!(out.components().iter().all(|c| c.len() == 10));
    let kept_sum: f64 = out.existences().iter().sum();
    assert_eq!(kept_sum, 0.9 + 0.5);

    let none = prune(&belief, 0.95, 10, 10, &mut rng).unwrap();
    assert!(none.is_empty());
}

#[test]
fn estimates_of_single_certain_target() {
    let p = HybridParticle::new(ObjectClass::Target, 0.9, [1.0, 2.0, 3.0, 4.0], 1.0);
    let belief = MultiBernoulliBelief::new(vec![component(1.0, vec![p; 5])]);
    let e = extract_estimates(&belief);
    assert_eq!(e.n_targets, 1);
    for (a, b) in e.target_states[0].iter().zip([1.0, 2.0, 3.0, 4.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(e.clutter_rate, 0.0);
    assert_eq!(e.all_objects.len(), 1);
}

#[test]
fn clutter_rate_estimate() {
    let p = HybridParticle::new(ObjectClass::ClutterGenerator, 0.5, [1.0, 2.0, 0.0, 0.0], 1.0);
    let belief = MultiBernoulliBelief::new(vec![component(0.9, vec![p; 5])]);
    let e = extract_estimates(&belief);
    assert!((e.clutter_rate - 0.45).abs() < 1e-15);
    assert_eq!(e.n_targets, 0);
    assert_eq!(e.all_objects[0].class, ObjectClass::ClutterGenerator);
}

#[test]
fn estimates_of_empty_belief() {
    let e = extract_estimates(&MultiBernoulliBelief::empty());
    assert_eq!(e, Estimates::default());
}

#[test]
fn robust_update_degenerates_to_known_params() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = MeasurementModel::default();
    let pd = 0.93;
    let belief = MultiBernoulliBelief::new(vec![
        component(0.7, cloud(ObjectClass::Target, pd, [300.0, 300.0], 20.0, 100, &mut rng)),
        component(0.2, cloud(ObjectClass::Target, pd, [600.0, 500.0], 20.0, 100, &mut rng)),
    ]);
    let sensor = [100.0, 50.0];
    let z = [model.measure([305.0, 298.0], sensor), model.measure([800.0, 800.0], sensor)];
    let kappa = 12.0;
    let a = update_with(
        &belief,
        &z,
        sensor,
        &model,
        UpdateParams {
            detection: Detection::PerParticle,
            clutter_intensity: kappa / model.observation_volume(),
        },
    );
    let b = update_known_params(&belief, &z, sensor, &model, kappa, pd).unwrap();
    assert_eq!(a.len(), b.len());
    for (ca, cb) in a.components().iter().zip(b.components()) {
        assert!((ca.existence() - cb.existence()).abs() < 1e-10);
        for (pa, pb) in ca.particles().iter().zip(cb.particles()) {
            assert!((pa.weight - pb.weight).abs() < 1e-10);
        }
    }
}

#[test]
fn single_target_error_shrinks_with_repeated_detections() {
    // One target, no clutter generators, noise-free detections: the median
    // position error over seeds must not grow from step to step.
    let model = MeasurementModel::default();
    let filter = MultiBernoulliFilter {
        area: Area::default(),
        motion: MotionModel {
            sigma_acc: 0.5,
            ..Default::default()
        },
        measurement: model.clone(),
        birth: BirthModel {
            targets: BirthSpec {
                count: 0,
                existence: 0.0,
                max_speed: 0.0,
                pd_low: 0.5,
                pd_high: 1.0,
            },
            clutter: BirthSpec {
                count: 0,
                existence: 0.0,
                max_speed: 0.0,
                pd_low: 0.5,
                pd_high: 1.0,
            },
        },
        params: FilterParams {
            particles: 1000,
            ..Default::default()
        },
        mode: FilterMode::Robust,
    };
    let truth = [520.0, 470.0];
    let sensor = [0.0, 0.0];
    let offset = [45.0, -35.0];
    let steps = 4;
    let mut errors = vec![Vec::new(); steps];
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let noise = Normal::new(0.0, 60.0).unwrap();
        let vel = Normal::new(0.0, 0.5).unwrap();
        let ps = (0..1000)
            .map(|_| {
                HybridParticle::new(
                    ObjectClass::Target,
                    0.9,
                    [
                        truth[0] + offset[0] + noise.sample(&mut rng),
                        truth[1] + offset[1] + noise.sample(&mut rng),
                        vel.sample(&mut rng),
                        vel.sample(&mut rng),
                    ],
                    1.0,
                )
            })
            .collect();
        let mut belief = MultiBernoulliBelief::new(vec![component(0.9, ps)]);
        for err in errors.iter_mut() {
            let pred = filter.predict(&belief, &mut rng);
            let z = [model.measure(truth, sensor)];
            let upd = filter.update(&pred, &z, sensor).unwrap();
            belief = filter.prune(&upd, &mut rng).unwrap();
            let e = extract_estimates(&belief);
            let est = belief
                .components()
                .iter()
                .max_by(|a, b| a.existence().total_cmp(&b.existence()))
                .and_then(|c| c.class_mean(ObjectClass::Target))
                .unwrap();
            assert!(e.n_targets <= 1);
            err.push(distance([est[0], est[1]], truth));
        }
    }
    let medians: Vec<f64> = errors
        .into_iter()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        })
        .collect();
    for w in medians.windows(2) {
        assert!(w[1] <= w[0], "median errors {medians:?}");
    }
}

fn arb_belief() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, u64)> {
    (
        prop::collection::vec(0.0f64..=1.0, 1..5),
        prop::collection::vec(0.0f64..0.999, 1..5),
        any::<u64>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn existence_stays_bounded_through_recursion((rs, pds, seed) in arb_belief()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = MeasurementModel::default();
        let comps = rs.iter().enumerate().map(|(k, &r)| {
            let pd = pds[k % pds.len()];
            let class = if k % 2 == 0 { ObjectClass::Target } else { ObjectClass::ClutterGenerator };
            component(r, cloud(class, pd, [100.0 + 150.0 * k as f64, 400.0], 15.0, 40, &mut rng))
        });
        let belief: MultiBernoulliBelief = comps.collect();
        let pred = predict(&belief, &MotionModel::default(), vec![], &mut rng);
        let sensor = [0.0, 0.0];
        let z = [model.measure([100.0, 400.0], sensor), model.measure([700.0, 100.0], sensor)];
        let upd = update_robust(&pred, &z, sensor, &model);
        let pruned = prune(&upd, 1e-3, 60, 40, &mut rng).unwrap();
        for b in [&pred, &upd, &pruned] {
            for c in b.components() {
                prop_assert!((0.0..=MAX_EXISTENCE).contains(&c.existence()));
            }
        }
    }

    #[test]
    fn legacy_existence_never_grows((rs, pds, seed) in arb_belief()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps: Vec<_> = rs.iter().enumerate().map(|(k, &r)| {
            let pd = pds[k % pds.len()];
            component(r, cloud(ObjectClass::Target, pd, [300.0, 300.0], 10.0, 10, &mut rng))
        }).collect();
        let belief = MultiBernoulliBelief::new(comps.clone());
        let upd = update_robust(&belief, &[], [0.0, 0.0], &MeasurementModel::default());
        let mut legacy = upd.components().iter();
        for c in &comps {
            let rho: f64 = c.particles().iter().map(|p| p.weight * p.pd).sum();
            if c.existence() > 0.0 && rho < 1.0 {
                let l = legacy.next().unwrap();
                prop_assert!(l.existence() <= c.existence() + 1e-15);
            }
        }
    }
}
