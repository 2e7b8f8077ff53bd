//! Monte-Carlo comparison of the estimators over an SNR sweep.
//!
//! Every trial synthesizes one observation and one starting point from seeds
//! derived from `(seed, snr, trial)` only, then runs each selected estimator on
//! that same data (paired design). Errors are computed after canonicalizing
//! both parameter sets and matching estimated paths to true ones:
//!
//! * azimuth/elevation errors in degrees, wrapped, for every path;
//! * delay and normalized-power errors relative to the reference (earliest)
//!   path, so they exist only for paths `2..P`.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::antenna::{wrap_angle, ArrayModel, ArraySource, Direction};
use crate::channel_model::{make_signal, synthesize, FrequencyGrid, Observation, Path, PathParameterSet, SignalKind};
use crate::cost_ccr::CcrMode;
use crate::estimator::{estimate, EstimatorKind, EstimatorOptions};
use crate::init::{coarse_grid, perturbed_truth, InitMode};
use crate::optimizer::LmOptions;
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub truth: PathParameterSet,
    pub array: ArraySource,
    pub bins: usize,
    pub signal: SignalKind,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub init: InitMode,
    pub lm: LmOptions,
    pub ccr_mode: CcrMode,
}

/// Path parameters of the three-path reference scenario: AoA 30/150/-45 deg,
/// EoA 35/50/75 deg, delays 1/9, 2/9, 4/9, polarizations H/H/V, powers
/// 0/-2/-3 dB, all weight phases zero.
pub fn default_truth() -> PathParameterSet {
    let mk = |az: f64, el: f64, delay: f64, horizontal: bool, power_db: f64| {
        let a = Complex64::new(10f64.powf(power_db / 20.0), 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Path {
            direction: Direction::from_degrees(az, el).expect("valid table direction"),
            weight_h: if horizontal { a } else { zero },
            weight_v: if horizontal { zero } else { a },
            delay,
        }
    };
    PathParameterSet::new(vec![
        mk(30.0, 35.0, 1.0 / 9.0, true, 0.0),
        mk(150.0, 50.0, 2.0 / 9.0, true, -2.0),
        mk(-45.0, 75.0, 4.0 / 9.0, false, -3.0),
    ])
    .expect("valid table parameters")
}

impl ScenarioConfig {
    /// Reference scenario on the default six-port array with 128 bins, SNR
    /// 0..=20 dB in 2 dB steps.
    pub fn default_scenario(trials: usize, seed: u64) -> Self {
        Self {
            truth: default_truth(),
            array: ArraySource::Analytic(ArrayModel::dipole_triad()),
            bins: 128,
            signal: SignalKind::default(),
            snr_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            trials,
            seed,
            estimators: vec![EstimatorKind::Ccr, EstimatorKind::Cml],
            init: InitMode::default(),
            lm: LmOptions::default(),
            ccr_mode: CcrMode::TwoStep,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.snr_db.is_empty() {
            return Err(Error::config("snr_db", "must not be empty"));
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::config("snr_db", "values must be numbers or +inf"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "must not be empty"));
        }
        use crate::antenna::Manifold;
        if self.array.port_count() < 2 {
            return Err(Error::config("array", "needs at least two ports"));
        }
        FrequencyGrid::new(self.bins)
            .and_then(|g| g.check_supports(self.truth.len()))
            .map_err(|e| Error::config("samples", e.to_string()))?;
        if self.truth.len() > 8 {
            return Err(Error::config("paths", "path matching supports at most 8 paths"));
        }
        self.lm.validate().map_err(|e| Error::config("lm", e.to_string()))?;
        normalized_power(&self.truth.canonicalize(), 0).map_err(|e| Error::config("paths", e.to_string()))?;
        Ok(())
    }

    fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions {
            lm: self.lm,
            ccr_mode: self.ccr_mode,
        }
    }
}

/// Power of path `p` relative to path 0, in dB.
pub fn normalized_power(params: &PathParameterSet, p: usize) -> Result<f64> {
    let reference = params.paths()[0].power();
    if !(reference > 0.0) {
        return Err(Error::InvalidParameters("reference path has zero weight".into()));
    }
    let path = params
        .paths()
        .get(p)
        .ok_or_else(|| Error::InvalidParameters(format!("no path {p}")))?;
    Ok(10.0 * (path.power() / reference).log10())
}

/// Wrapped delay difference in `[-0.5, 0.5)`.
fn delay_diff(a: f64, b: f64) -> f64 {
    (a - b + 0.5).rem_euclid(1.0) - 0.5
}

fn match_score(e: &Path, t: &Path) -> f64 {
    let daz = wrap_angle(e.direction.azimuth() - t.direction.azimuth()).to_degrees() / 180.0;
    let del = (e.direction.elevation() - t.direction.elevation()).to_degrees() / 90.0;
    let dt = delay_diff(e.delay, t.delay);
    daz * daz + del * del + dt * dt
}

/// `perm[p]` is the estimated path assigned to true path `p`, minimizing the
/// summed normalized squared distance over all permutations. Ties go to the
/// lexicographically smallest permutation.
pub fn match_paths(estimate: &PathParameterSet, truth: &PathParameterSet) -> Result<Vec<usize>> {
    let n = truth.len();
    if estimate.len() != n {
        return Err(Error::Dimension(format!(
            "estimate has {} paths, truth has {n}",
            estimate.len()
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let score: f64 = perm
            .iter()
            .enumerate()
            .map(|(t, &e)| match_score(&estimate.paths()[e], &truth.paths()[t]))
            .sum();
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, perm));
        }
    }
    Ok(best.expect("at least one permutation").1)
}

/// Signed per-path errors of one estimate. Delay and power entries are `None`
/// for the reference path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathErrors {
    pub aoa_deg: Vec<f64>,
    pub eoa_deg: Vec<f64>,
    pub delay: Vec<Option<f64>>,
    pub power_db: Vec<Option<f64>>,
}

/// Errors of `estimate` against `truth`; both are canonicalized here.
pub fn parameter_errors(estimate: &PathParameterSet, truth: &PathParameterSet) -> Result<PathErrors> {
    let truth = truth.canonicalize();
    let est = estimate.canonicalize_cyclic();
    let perm = match_paths(&est, &truth)?;
    let t = truth.paths();
    let e = |p: usize| &est.paths()[perm[p]];
    let e_ref = e(0);
    let ref_power = e_ref.power();
    if !(ref_power > 0.0) {
        return Err(Error::InvalidParameters("estimated reference path has zero weight".into()));
    }
    let n = t.len();
    let mut out = PathErrors {
        aoa_deg: Vec::with_capacity(n),
        eoa_deg: Vec::with_capacity(n),
        delay: Vec::with_capacity(n),
        power_db: Vec::with_capacity(n),
    };
    for p in 0..n {
        let ep = e(p);
        out.aoa_deg
            .push(wrap_angle(ep.direction.azimuth() - t[p].direction.azimuth()).to_degrees());
        out.eoa_deg
            .push((ep.direction.elevation() - t[p].direction.elevation()).to_degrees());
        if p == 0 {
            out.delay.push(None);
            out.power_db.push(None);
        } else {
            let est_rel = ep.delay - e_ref.delay;
            let true_rel = t[p].delay - t[0].delay;
            out.delay.push(Some(delay_diff(est_rel, true_rel)));
            let est_db = 10.0 * (ep.power() / ref_power).log10();
            out.power_db.push(Some(est_db - normalized_power(&truth, p)?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EstimatorOutcome {
    pub kind: EstimatorKind,
    /// `Err` holds the failure message of a flagged trial.
    pub result: std::result::Result<TrialEstimate, String>,
}

#[derive(Debug, Clone)]
pub struct TrialEstimate {
    pub errors: PathErrors,
    pub cost: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub trial: usize,
    pub outcomes: Vec<EstimatorOutcome>,
}

const STREAM_NOISE: u64 = 0;
const STREAM_INIT: u64 = 1;

/// Seed of one random stream of one trial.
pub fn trial_rng(seed: u64, snr_db: f64, trial: usize, stream: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&snr_db.to_bits().to_le_bytes());
    key[16..24].copy_from_slice(&(trial as u64).to_le_bytes());
    key[24..].copy_from_slice(&stream.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

fn noise_seed(seed: u64, snr_db: f64, trial: usize) -> u64 {
    use rand::RngCore;
    trial_rng(seed, snr_db, trial, STREAM_NOISE).next_u64()
}

/// Observation of one trial; every estimator of that trial sees this data.
pub fn trial_observation(config: &ScenarioConfig, snr_db: f64, trial: usize) -> Result<Observation> {
    let grid = FrequencyGrid::new(config.bins)?;
    let signal = make_signal(config.signal, grid)?;
    synthesize(
        &config.truth,
        &config.array,
        grid,
        &signal,
        snr_db,
        noise_seed(config.seed, snr_db, trial),
    )
}

pub fn run_trial(config: &ScenarioConfig, snr_db: f64, trial: usize) -> Result<TrialRecord> {
    let obs = trial_observation(config, snr_db, trial)?;
    let truth = config.truth.canonicalize();
    let init = match config.init {
        InitMode::PerturbedTruth {
            aoa_sigma_deg,
            eoa_sigma_deg,
            delay_sigma,
            weight_sigma,
        } => {
            let mut rng = trial_rng(config.seed, snr_db, trial, STREAM_INIT);
            perturbed_truth(&truth, aoa_sigma_deg, eoa_sigma_deg, delay_sigma, weight_sigma, &mut rng)
        }
        InitMode::CoarseGrid {
            azimuth_step_deg,
            elevation_step_deg,
            delay_step,
        } => coarse_grid(
            &obs,
            &config.array,
            truth.len(),
            azimuth_step_deg,
            elevation_step_deg,
            delay_step,
        ),
    };
    let opts = config.estimator_options();
    let outcomes = config
        .estimators
        .iter()
        .map(|&kind| {
            let result = init
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|init| {
                    let est = estimate(&obs, &config.array, init, kind, &opts).map_err(|e| e.to_string())?;
                    assert!(
                        est.lm.is_monotone(),
                        "accepted LM steps increased the cost ({kind}, snr {snr_db}, trial {trial})"
                    );
                    let errors = parameter_errors(&est.params, &truth).map_err(|e| e.to_string())?;
                    Ok(TrialEstimate {
                        errors,
                        cost: est.cost,
                        iterations: est.lm.iterations,
                    })
                });
            EstimatorOutcome { kind, result }
        })
        .collect();
    Ok(TrialRecord {
        snr_db,
        trial,
        outcomes,
    })
}

/// Running sums of squared errors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RmseAccumulator {
    n: usize,
    sum_sq: f64,
    sum_quartic: f64,
}

impl RmseAccumulator {
    pub fn push(&mut self, error: f64) {
        let sq = error * error;
        self.n += 1;
        self.sum_sq += sq;
        self.sum_quartic += sq * sq;
    }

    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.sum_sq += other.sum_sq;
        self.sum_quartic += other.sum_quartic;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn rmse(&self) -> Option<f64> {
        (self.n > 0).then(|| (self.sum_sq / self.n as f64).sqrt())
    }

    /// Delta-method standard error of the RMSE.
    pub fn standard_error(&self) -> Option<f64> {
        let rmse = self.rmse()?;
        if rmse == 0.0 {
            return Some(0.0);
        }
        let n = self.n as f64;
        let mse = self.sum_sq / n;
        let var = (self.sum_quartic / n - mse * mse).max(0.0);
        Some((var / n).sqrt() / (2.0 * rmse))
    }
}

/// RMSE of one estimator, SNR point and path.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseRecord {
    pub estimator: EstimatorKind,
    pub snr_db: f64,
    /// One-based path number in canonical (delay) order.
    pub path: usize,
    pub aoa_deg: RmseAccumulator,
    pub eoa_deg: RmseAccumulator,
    /// Empty for the reference path.
    pub delay: RmseAccumulator,
    pub power_db: RmseAccumulator,
    pub n_success: usize,
    pub n_fail: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<RmseRecord>,
    pub trials: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn record(&self, estimator: EstimatorKind, snr_db: f64, path: usize) -> Option<&RmseRecord> {
        self.records
            .iter()
            .find(|r| r.estimator == estimator && r.snr_db == snr_db && r.path == path)
    }

    /// Failed trials per estimator and SNR.
    pub fn failures(&self) -> Vec<(EstimatorKind, f64, usize, usize)> {
        self.records
            .iter()
            .filter(|r| r.path == 1)
            .map(|r| (r.estimator, r.snr_db, r.n_success, r.n_fail))
            .collect()
    }
}

/// Aggregates trial records in the order given.
pub fn aggregate(config: &ScenarioConfig, trials: &[TrialRecord]) -> Vec<RmseRecord> {
    let paths = config.truth.len();
    let mut records = Vec::new();
    for &estimator in &config.estimators {
        for &snr in &config.snr_db {
            let mut per_path: Vec<RmseRecord> = (1..=paths)
                .map(|path| RmseRecord {
                    estimator,
                    snr_db: snr,
                    path,
                    aoa_deg: Default::default(),
                    eoa_deg: Default::default(),
                    delay: Default::default(),
                    power_db: Default::default(),
                    n_success: 0,
                    n_fail: 0,
                })
                .collect();
            let outcomes = trials
                .iter()
                .filter(|t| t.snr_db.to_bits() == snr.to_bits())
                .flat_map(|t| t.outcomes.iter().filter(|o| o.kind == estimator));
            for outcome in outcomes {
                match &outcome.result {
                    Ok(est) => {
                        for (p, rec) in per_path.iter_mut().enumerate() {
                            rec.n_success += 1;
                            rec.aoa_deg.push(est.errors.aoa_deg[p]);
                            rec.eoa_deg.push(est.errors.eoa_deg[p]);
                            if let Some(d) = est.errors.delay[p] {
                                rec.delay.push(d);
                            }
                            if let Some(w) = est.errors.power_db[p] {
                                rec.power_db.push(w);
                            }
                        }
                    }
                    Err(_) => per_path.iter_mut().for_each(|r| r.n_fail += 1),
                }
            }
            records.extend(per_path);
        }
    }
    records
}

/// Runs every trial of every SNR point, on at most `jobs` threads (all cores
/// when `None`). Results are independent of the thread count.
pub fn run_sweep(config: &ScenarioConfig, jobs: Option<usize>) -> Result<SweepResult> {
    config.validate()?;
    let work: Vec<(f64, usize)> = config
        .snr_db
        .iter()
        .flat_map(|&s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let run = || -> Result<Vec<TrialRecord>> {
        work.par_iter()
            .map(|&(snr, trial)| run_trial(config, snr, trial))
            .collect()
    };
    let trials = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameters(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(SweepResult {
        records: aggregate(config, &trials),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shifted(p: &PathParameterSet, f: impl Fn(usize, &mut Path)) -> PathParameterSet {
        let mut q = p.clone();
        for (i, path) in q.paths_mut().iter_mut().enumerate() {
            f(i, path);
        }
        q
    }

    #[test]
    fn normalized_power_of_reference_scenario() {
        let t = default_truth().canonicalize();
        let got: Vec<f64> = (0..3).map(|p| normalized_power(&t, p).unwrap()).collect();
        for (g, want) in got.iter().zip([0.0, -2.0, -3.0]) {
            assert!((g - want).abs() < 1e-12, "{got:?}");
        }
        let mut doubled = t.clone();
        doubled.scale_weights(Complex64::new(2.0, 0.0));
        assert!((normalized_power(&doubled, 2).unwrap() + 3.0).abs() < 1e-12);
        let mut dead = t.clone();
        dead.paths_mut()[0].weight_h = Complex64::new(0.0, 0.0);
        assert!(normalized_power(&dead, 1).is_err());
    }

    #[test]
    fn matching_identity_swap_and_ties() {
        let t = default_truth().canonicalize();
        assert_eq!(match_paths(&t, &t).unwrap(), vec![0, 1, 2]);
        let mut paths = t.paths().to_vec();
        paths.swap(0, 1);
        let swapped = PathParameterSet::new(paths).unwrap();
        assert_eq!(match_paths(&swapped, &t).unwrap(), vec![1, 0, 2]);
        // Identical estimated paths: every permutation ties.
        let same = PathParameterSet::new(vec![t.paths()[0]; 3]).unwrap();
        assert_eq!(match_paths(&same, &t).unwrap(), vec![0, 1, 2]);
        assert!(match_paths(&PathParameterSet::new(vec![t.paths()[0]]).unwrap(), &t).is_err());
    }

    #[test]
    fn errors_are_zero_for_truth_and_wrap_angles() {
        let t = default_truth();
        let zero = parameter_errors(&t, &t).unwrap();
        assert!(zero.aoa_deg.iter().chain(&zero.eoa_deg).all(|e| e.abs() < 1e-12));
        assert_eq!(zero.delay[0], None);
        assert!(zero.delay[1].unwrap().abs() < 1e-12);

        // Common delay shift and weight scale are invisible.
        let gauge = shifted(&t, |_, p| {
            p.delay += 0.37;
            p.weight_h *= Complex64::new(0.0, 3.0);
            p.weight_v *= Complex64::new(0.0, 3.0);
        });
        let e = parameter_errors(&gauge, &t).unwrap();
        for p in 1..3 {
            assert!(e.delay[p].unwrap().abs() < 1e-12);
            assert!(e.power_db[p].unwrap().abs() < 1e-12);
        }

        let near_pi = PathParameterSet::new(vec![Path {
            direction: Direction::from_degrees(179.0, 0.0).unwrap(),
            ..t.paths()[0]
        }])
        .unwrap();
        let est = PathParameterSet::new(vec![Path {
            direction: Direction::from_degrees(-179.0, 0.0).unwrap(),
            ..t.paths()[0]
        }])
        .unwrap();
        let e = parameter_errors(&est, &near_pi).unwrap();
        assert!((e.aoa_deg[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn accumulator_merge_matches_union() {
        let errors: Vec<f64> = (0..40).map(|i| ((i * 7919) % 113) as f64 / 50.0 - 1.0).collect();
        let mut union = RmseAccumulator::default();
        errors.iter().for_each(|e| union.push(*e));
        let mut a = RmseAccumulator::default();
        let mut b = RmseAccumulator::default();
        errors[..20].iter().for_each(|e| a.push(*e));
        errors[20..].iter().for_each(|e| b.push(*e));
        a.merge(&b);
        assert_eq!(a.count(), union.count());
        assert!((a.rmse().unwrap() - union.rmse().unwrap()).abs() < 1e-15);
        assert_eq!(RmseAccumulator::default().rmse(), None);
        let mut single = RmseAccumulator::default();
        single.push(-0.25);
        assert_eq!(single.rmse(), Some(0.25));
    }

    #[test]
    fn noiseless_trial_recovers_truth_and_is_deterministic() {
        let mut cfg = ScenarioConfig::default_scenario(1, 42);
        cfg.snr_db = vec![f64::INFINITY];
        let a = run_trial(&cfg, f64::INFINITY, 0).unwrap();
        for o in &a.outcomes {
            let e = &o.result.as_ref().unwrap().errors;
            for v in e.aoa_deg.iter().chain(&e.eoa_deg) {
                assert!(v.abs() <= 1e-6, "{}: {v}", o.kind);
            }
            for v in e.delay.iter().chain(&e.power_db).flatten() {
                assert!(v.abs() <= 1e-6, "{}: {v}", o.kind);
            }
        }
        let b = run_trial(&cfg, f64::INFINITY, 0).unwrap();
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            assert_eq!(x.result.as_ref().unwrap().errors, y.result.as_ref().unwrap().errors);
        }
    }

    #[test]
    fn single_trial_sweep_reports_absolute_errors() {
        let mut cfg = ScenarioConfig::default_scenario(1, 3);
        cfg.snr_db = vec![f64::INFINITY];
        let sweep = run_sweep(&cfg, Some(1)).unwrap();
        assert_eq!(sweep.records.len(), 2 * 3);
        let trial = &sweep.trials[0];
        for o in &trial.outcomes {
            let est = o.result.as_ref().unwrap();
            let rec = sweep.record(o.kind, f64::INFINITY, 2).unwrap();
            assert_eq!(rec.aoa_deg.rmse().unwrap(), est.errors.aoa_deg[1].abs());
            assert_eq!(rec.delay.rmse().unwrap(), est.errors.delay[1].unwrap().abs());
            let r1 = sweep.record(o.kind, f64::INFINITY, 1).unwrap();
            assert_eq!(r1.delay.rmse(), None);
            assert_eq!((r1.n_success, r1.n_fail), (1, 0));
        }
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = ScenarioConfig::default_scenario(0, 1);
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "trials"));
        cfg.trials = 1;
        cfg.snr_db.clear();
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "snr_db"));
        cfg.snr_db = vec![0.0];
        cfg.bins = 5;
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "samples"));
    }
}
