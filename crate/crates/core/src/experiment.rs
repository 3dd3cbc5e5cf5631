//! Seeded Monte Carlo trials of the closed loop
//! (predict, select command, move, measure, update) and CSV export.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::{Kinematic, MultiBernoulliBelief};
use crate::control::select_command;
use crate::error::Result;
use crate::filter::{extract_estimates, FilterMode};
use crate::geometry::distance;
use crate::scenario::{apply_command, generate_measurements, step_ground_truth, Config, GroundTruth};

/// Independent random streams of one trial.
const TRUTH_STREAM: u64 = 0;
const MEASUREMENT_STREAM: u64 = 1;
const FILTER_STREAM: u64 = 2;
const REWARD_STREAM: u64 = 3;

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One step of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Index of the chosen command; 0 is "stay".
    pub command: usize,
    /// Sensor position after the move.
    pub sensor: [f64; 2],
    pub n_targets_est: usize,
    pub clutter_rate_est: f64,
    pub n_targets_true: usize,
    pub clutter_rate_true: f64,
    /// Distance from the sensor to the closest true target, NaN when none.
    pub nearest_target_distance: f64,
    /// Rényi divergence of the chosen command.
    pub reward: f64,
    pub n_measurements: usize,
    pub target_estimates: Vec<Kinematic>,
}

impl StepRecord {
    pub fn cardinality_error(&self) -> f64 {
        (self.n_targets_est as f64 - self.n_targets_true as f64).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub seed: u64,
    pub mode: String,
    pub steps: Vec<StepRecord>,
    /// Wall-clock time per step, ms. Not part of the deterministic record.
    pub step_ms: Vec<f64>,
}

pub fn parse_mode(name: &str, config: &Config) -> Option<FilterMode> {
    match name {
        "robust" => Some(FilterMode::Robust),
        "baseline" => Some(config.baseline_mode()),
        _ => None,
    }
}

/// Runs the closed loop for `config.scenario.steps` steps.
pub fn run_trial(config: &Config, seed: u64, mode: FilterMode) -> Result<TrialLog> {
    config.validate()?;
    let filter = config.filter(mode);
    let scenario = &config.scenario;
    let mut truth_rng = substream(seed, TRUTH_STREAM);
    let mut meas_rng = substream(seed, MEASUREMENT_STREAM);
    let mut filter_rng = substream(seed, FILTER_STREAM);
    let mut reward_rng = substream(seed, REWARD_STREAM);

    let mut truth = GroundTruth::initial(scenario);
    let mut belief = MultiBernoulliBelief::empty();
    let mut sensor = scenario.sensor_start;
    let mut steps = Vec::with_capacity(scenario.steps);
    let mut step_ms = Vec::with_capacity(scenario.steps);

    for k in 1..=scenario.steps {
        let start = Instant::now();
        truth = step_ground_truth(&truth, k, scenario, &mut truth_rng);
        let pred = filter.predict(&belief, &mut filter_rng);
        let decision = select_command(&config.control, &filter, &pred, sensor, &mut reward_rng)?;
        sensor = apply_command(sensor, &decision.command);
        let positions = truth.positions();
        let z = generate_measurements(
            &positions,
            sensor,
            scenario,
            &config.detection,
            &config.measurement,
            &mut meas_rng,
        );
        let upd = filter.update(&pred, &z, sensor)?;
        belief = filter.prune(&upd, &mut filter_rng)?;
        let est = extract_estimates(&belief);
        let nearest = positions
            .iter()
            .map(|p| distance(*p, sensor))
            .fold(f64::NAN, f64::min);
        steps.push(StepRecord {
            step: k,
            command: decision.index,
            sensor,
            n_targets_est: est.n_targets,
            clutter_rate_est: est.clutter_rate,
            n_targets_true: positions.len(),
            clutter_rate_true: scenario.clutter_rate,
            nearest_target_distance: nearest,
            reward: decision.evaluations[decision.index].reward.divergence,
            n_measurements: z.len(),
            target_estimates: est.target_states,
        });
        step_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(TrialLog {
        seed,
        mode: mode.name().to_string(),
        steps,
        step_ms,
    })
}

/// Per-step statistics across the runs of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub mode: String,
    pub step: usize,
    pub runs: usize,
    pub clutter_rate_mean: f64,
    pub clutter_rate_std: f64,
    pub n_targets_mean: f64,
    pub n_targets_std: f64,
    pub cardinality_error_mean: f64,
    pub nearest_target_distance_mean: f64,
    pub n_targets_true: usize,
    pub clutter_rate_true: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Across-run mean and population standard deviation per step.
pub fn aggregate(logs: &[TrialLog]) -> Vec<AggregateRow> {
    let Some(first) = logs.first() else {
        return Vec::new();
    };
    (0..first.steps.len())
        .map(|i| {
            let col = |f: &dyn Fn(&StepRecord) -> f64| logs.iter().map(|l| f(&l.steps[i])).collect::<Vec<f64>>();
            let (lm, ls) = mean_std(&col(&|s| s.clutter_rate_est));
            let (nm, ns) = mean_std(&col(&|s| s.n_targets_est as f64));
            let (em, _) = mean_std(&col(&|s| s.cardinality_error()));
            let (dm, _) = mean_std(&col(&|s| s.nearest_target_distance));
            let s = &first.steps[i];
            AggregateRow {
                mode: first.mode.clone(),
                step: s.step,
                runs: logs.len(),
                clutter_rate_mean: lm,
                clutter_rate_std: ls,
                n_targets_mean: nm,
                n_targets_std: ns,
                cardinality_error_mean: em,
                nearest_target_distance_mean: dm,
                n_targets_true: s.n_targets_true,
                clutter_rate_true: s.clutter_rate_true,
            }
        })
        .collect()
}

/// Float with 9 significant digits, shortest form.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub const TRIAL_COLUMNS: [&str; 14] = [
    "run",
    "seed",
    "mode",
    "step",
    "command",
    "sensor_x",
    "sensor_y",
    "n_targets_est",
    "clutter_rate_est",
    "n_targets_true",
    "clutter_rate_true",
    "cardinality_error",
    "nearest_target_distance",
    "reward",
];

pub const ESTIMATE_COLUMNS: [&str; 8] = ["run", "seed", "mode", "step", "x", "y", "vx", "vy"];

pub const AGGREGATE_COLUMNS: [&str; 11] = [
    "mode",
    "step",
    "runs",
    "clutter_rate_mean",
    "clutter_rate_std",
    "n_targets_mean",
    "n_targets_std",
    "cardinality_error_mean",
    "nearest_target_distance_mean",
    "n_targets_true",
    "clutter_rate_true",
];

pub const TIMING_COLUMNS: [&str; 5] = ["run", "seed", "mode", "step", "wall_ms"];

pub fn write_trials<W: Write>(out: W, logs: &[TrialLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_COLUMNS)?;
    for (run, log) in logs.iter().enumerate() {
        for s in &log.steps {
            w.write_record([
                run.to_string(),
                log.seed.to_string(),
                log.mode.clone(),
                s.step.to_string(),
                s.command.to_string(),
                format_float(s.sensor[0]),
                format_float(s.sensor[1]),
                s.n_targets_est.to_string(),
                format_float(s.clutter_rate_est),
                s.n_targets_true.to_string(),
                format_float(s.clutter_rate_true),
                format_float(s.cardinality_error()),
                format_float(s.nearest_target_distance),
                format_float(s.reward),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_estimates<W: Write>(out: W, logs: &[TrialLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ESTIMATE_COLUMNS)?;
    for (run, log) in logs.iter().enumerate() {
        for s in &log.steps {
            for x in &s.target_estimates {
                let mut rec = vec![run.to_string(), log.seed.to_string(), log.mode.clone(), s.step.to_string()];
                rec.extend(x.iter().map(|v| format_float(*v)));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing<W: Write>(out: W, logs: &[TrialLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMING_COLUMNS)?;
    for (run, log) in logs.iter().enumerate() {
        for (s, ms) in log.steps.iter().zip(&log.step_ms) {
            w.write_record([
                run.to_string(),
                log.seed.to_string(),
                log.mode.clone(),
                s.step.to_string(),
                format_float(*ms),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.mode.clone(),
            r.step.to_string(),
            r.runs.to_string(),
            format_float(r.clutter_rate_mean),
            format_float(r.clutter_rate_std),
            format_float(r.n_targets_mean),
            format_float(r.n_targets_std),
            format_float(r.cardinality_error_mean),
            format_float(r.nearest_target_distance_mean),
            r.n_targets_true.to_string(),
            format_float(r.clutter_rate_true),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trials of every requested mode, run on the same seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub logs: Vec<Vec<TrialLog>>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs `n_runs` trials per mode (trial `i` uses seed `base_seed + i`).
/// `progress` is called after every finished trial.
pub fn run_batch(
    config: &Config,
    n_runs: usize,
    base_seed: u64,
    modes: &[FilterMode],
    mut progress: impl FnMut(&TrialLog),
) -> Result<BatchResult> {
    if n_runs == 0 {
        return Err(crate::Error::InvalidParameter("n_runs must be at least 1".into()));
    }
    let mut logs = Vec::with_capacity(modes.len());
    let mut rows = Vec::new();
    for &mode in modes {
        let mut per_mode = Vec::with_capacity(n_runs);
        for i in 0..n_runs {
            let log = run_trial(config, base_seed.wrapping_add(i as u64), mode)?;
            progress(&log);
            per_mode.push(log);
        }
        rows.extend(aggregate(&per_mode));
        logs.push(per_mode);
    }
    Ok(BatchResult { logs, aggregate: rows })
}

/// Writes `trials_<mode>.csv`, `estimates_<mode>.csv`, `timing_<mode>.csv`
/// and `aggregate.csv` into `dir`, creating it if needed.
pub fn write_batch(dir: &Path, batch: &BatchResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    for logs in &batch.logs {
        let Some(first) = logs.first() else { continue };
        let mode = &first.mode;
        write_trials(File::create(dir.join(format!("trials_{mode}.csv")))?, logs)?;
        write_estimates(File::create(dir.join(format!("estimates_{mode}.csv")))?, logs)?;
        write_timing(File::create(dir.join(format!("timing_{mode}.csv")))?, logs)?;
    }
    write_aggregate(File::create(dir.join("aggregate.csv"))?, &batch.aggregate)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{DetectionProfile, ScenarioConfig, TargetSpec};

    fn small_config(steps: usize) -> Config {
        let mut c = Config::default();
        c.scenario.steps = steps;
        c.filter.particles = 200;
        c.filter.max_components = 30;
        c.control.reward_samples = 20;
        c.scenario.targets.retain(|t| t.birth <= steps.max(1));
        c
    }

    #[test]
    fn float_format_has_nine_significant_digits() {
        assert_eq!(format_float(10.0), "10");
        assert_eq!(format_float(0.1234567891234), "0.123456789");
        assert_eq!(format_float(123456789123.0), "123456789000");
        assert_eq!(format_float(-2.5e-7), "-0.00000025");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn trial_is_deterministic() {
        let c = small_config(4);
        let a = run_trial(&c, 7, FilterMode::Robust).unwrap();
        let b = run_trial(&c, 7, FilterMode::Robust).unwrap();
        assert_eq!(a.steps, b.steps);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_trials(&mut x, &[a]).unwrap();
        write_trials(&mut y, &[b]).unwrap();
        assert_eq!(x, y);
        assert_eq!(String::from_utf8(x).unwrap().lines().count(), 5);
    }

    #[test]
    fn zero_steps_gives_empty_log() {
        let c = small_config(0);
        let log = run_trial(&c, 1, FilterMode::Robust).unwrap();
        assert!(log.steps.is_empty());
    }

    #[test]
    fn single_run_aggregate_equals_trial() {
        let c = small_config(3);
        let b = run_batch(&c, 1, 3, &[c.baseline_mode()], |_| {}).unwrap();
        assert_eq!(b.aggregate.len(), 3);
        for (row, s) in b.aggregate.iter().zip(&b.logs[0][0].steps) {
            assert_eq!(row.clutter_rate_mean, s.clutter_rate_est);
            assert_eq!(row.n_targets_mean, s.n_targets_est as f64);
            assert_eq!(row.clutter_rate_std, 0.0);
            assert_eq!(row.n_targets_std, 0.0);
            assert_eq!(row.mode, "baseline");
        }
    }

    #[test]
    fn seed_sets_change_the_aggregate() {
        let c = small_config(3);
        let a = run_batch(&c, 2, 0, &[FilterMode::Robust], |_| {}).unwrap();
        let b = run_batch(&c, 2, 100, &[FilterMode::Robust], |_| {}).unwrap();
        let a2 = run_batch(&c, 2, 0, &[FilterMode::Robust], |_| {}).unwrap();
        assert_ne!(a.aggregate, b.aggregate);
        assert_eq!(a.aggregate, a2.aggregate);
    }

    #[test]
    fn files_have_expected_rows() {
        let c = small_config(3);
        let b = run_batch(&c, 2, 0, &[FilterMode::Robust, c.baseline_mode()], |_| {}).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_batch(dir.path(), &b).unwrap();
        let lines = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap().lines().count();
        assert_eq!(lines("trials_robust.csv"), 1 + 3 * 2);
        assert_eq!(lines("trials_baseline.csv"), 1 + 3 * 2);
        assert_eq!(lines("aggregate.csv"), 1 + 3 * 2);
        let header = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
        assert!(header.starts_with(&AGGREGATE_COLUMNS.join(",")));
    }

    #[test]
    fn easy_scenario_tracks_one_static_target() {
        let mut c = small_config(12);
        c.scenario = ScenarioConfig {
            steps: 12,
            sensor_start: [400.0, 400.0],
            clutter_rate: 0.0,
            sigma_acc: 0.0,
            targets: vec![TargetSpec {
                birth: 1,
                death: None,
                state: [500.0, 500.0, 0.0, 0.0],
            }],
            ..Default::default()
        };
        c.detection = DetectionProfile { p_max: 1.0, r_pd: 700.0 };
        c.control.step_sizes.clear();
        c.filter.particles = 1000;
        let (mut n_sum, mut lam_sum, mut count, mut settled) = (0.0, 0.0, 0, 0);
        for seed in 0..20 {
            let log = run_trial(&c, seed, FilterMode::Robust).unwrap();
            assert!(log.steps.iter().all(|s| s.command == 0 && s.sensor == [400.0, 400.0]));
            if log.steps[4..].iter().all(|s| s.n_targets_est == 1) {
                settled += 1;
            }
            for s in &log.steps[8..] {
                n_sum += s.n_targets_est as f64;
                lam_sum += s.clutter_rate_est;
                count += 1;
            }
        }
        let n_mean = n_sum / count as f64;
        let lam_mean = lam_sum / count as f64;
        assert!(settled >= 10, "{settled}/20 runs hold one target from step 5");
        assert!((0.8..=1.25).contains(&n_mean), "mean cardinality {n_mean}");
        assert!(lam_mean < 0.5, "mean clutter rate {lam_mean}");
    }
}
