//! Acceptance suite: one line per criterion, nonzero exit on any hard failure.
//!
//! Run with `cargo test --release --test acceptance`.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use blindpath::antenna::{build_steering_matrix, ArrayModel, ArraySource, Direction, Manifold};
use blindpath::channel_model::{
    make_signal, synthesize, vec_channel, FrequencyGrid, Observation, Path, PathParameterSet, SignalKind,
};
use blindpath::cli::rmse_csv;
use blindpath::cost_ccr::{ccr_evaluate, ccr_matrices, CcrMode, CcrProblem};
use blindpath::cost_cml::{cml_evaluate, cml_jacobian, CmlProblem};
use blindpath::estimator::EstimatorKind;
use blindpath::init::InitMode;
use blindpath::montecarlo::{run_sweep, default_truth, RmseAccumulator, ScenarioConfig, SweepResult, TrialRecord};
use blindpath::optimizer::{minimize, FnProblem, LeastSquaresProblem, LmOptions};
use blindpath::{CMatrix, CVector, Complex64};

const SEED: u64 = 20_240_601;
const TRIALS: usize = 100;
const TREND_SNRS: [f64; 6] = [0.0, 4.0, 8.0, 12.0, 16.0, 20.0];

#[derive(PartialEq)]
enum Status {
    Pass,
    Fail,
    SoftFail,
}

struct Report {
    hard_failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, name: &str, status: Status, detail: String, start: Instant) {
        let tag = match status {
            Status::Pass => "PASS",
            Status::Fail => {
                self.hard_failures += 1;
                "FAIL"
            }
            Status::SoftFail => "SOFT-FAIL",
        };
        println!(
            "[{tag:>9}] {id:<3} {name}: {detail} ({:.1} s)",
            start.elapsed().as_secs_f64()
        );
    }
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gaussian_c<R: Rng>(rng: &mut R) -> Complex64 {
    let g: f64 = rng.sample(rand_distr::StandardNormal);
    let h: f64 = rng.sample(rand_distr::StandardNormal);
    c(g, h)
}

fn dipole_triad() -> ArraySource {
    ArraySource::Analytic(ArrayModel::dipole_triad())
}

fn default_observation(snr_db: f64, seed: u64) -> Observation {
    let grid = FrequencyGrid::new(128).unwrap();
    let signal = make_signal(SignalKind::Flat, grid).unwrap();
    synthesize(&default_truth(), &dipole_triad(), grid, &signal, snr_db, seed).unwrap()
}

/// `exp(-j 2 pi k tau)` rows, written out independently of the library.
fn oracle_exponentials(params: &PathParameterSet, bins: usize) -> CMatrix {
    let p = params.len();
    CMatrix::from_fn(2 * p, bins, |row, k| {
        Complex64::from_polar(1.0, -TAU * k as f64 * params.paths()[row / 2].delay)
    })
}

fn oracle_channel<M: Manifold>(params: &PathParameterSet, manifold: &M, bins: usize) -> CMatrix {
    let b = build_steering_matrix(manifold, &params.directions()).unwrap();
    let gamma = CMatrix::from_diagonal(&params.weights());
    b * gamma * oracle_exponentials(params, bins)
}

fn column_major(h: &CMatrix) -> CVector {
    CVector::from_iterator(h.len(), h.iter().copied())
}

/// `||(I - H H^+) y||^2 / sigma^2` with the block-diagonal `H = I_K kr H`
/// formed explicitly and its pseudo-inverse taken by SVD.
fn oracle_dense_cml(y: &CMatrix, h: &CMatrix, sigma2: f64) -> f64 {
    let (m, k) = h.shape();
    let mut big = CMatrix::zeros(m * k, k);
    for bin in 0..k {
        for port in 0..m {
            big[(bin * m + port, bin)] = h[(port, bin)];
        }
    }
    let pinv = big.clone().pseudo_inverse(1e-14).unwrap();
    let yv = column_major(y);
    let r = &yv - &big * (pinv * &yv);
    r.norm_squared() / sigma2
}

/// Block-diagonal cross-relation matrix; the row of port pair `(i, j)` in
/// bin `k` satisfies `row . h(k) = y_i(k) h_j(k) - y_j(k) h_i(k)`.
fn oracle_dense_ddst(y: &CMatrix) -> CMatrix {
    let (m, k) = y.shape();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let q = pairs.len();
    let mut d = CMatrix::zeros(q * k, m * k);
    for bin in 0..k {
        for (row, &(i, j)) in pairs.iter().enumerate() {
            d[(bin * q + row, bin * m + j)] = y[(i, bin)];
            d[(bin * q + row, bin * m + i)] = -y[(j, bin)];
        }
    }
    d
}

fn random_params<R: Rng>(rng: &mut R, paths: usize) -> PathParameterSet {
    let v = (0..paths)
        .map(|_| Path {
            direction: Direction::new(rng.random_range(-3.0..3.0), rng.random_range(-1.2..1.2)).unwrap(),
            weight_h: gaussian_c(rng),
            weight_v: gaussian_c(rng),
            delay: rng.random_range(0.0..1.0),
        })
        .collect();
    PathParameterSet::new(v).unwrap()
}

/// Two crossed-dipole elements; [`ThreePorts`] keeps the first three ports.
fn small_array() -> ArraySource {
    use blindpath::antenna::Element;
    let model = ArrayModel::new(vec![
        Element {
            position: [0.0, 0.0, 0.0],
            axes: [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        },
        Element {
            position: [0.37, 0.21, 0.05],
            axes: [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        },
    ])
    .unwrap();
    ArraySource::Analytic(model)
}

/// First three ports of an array.
struct ThreePorts(ArraySource);

impl Manifold for ThreePorts {
    fn port_count(&self) -> usize {
        3
    }

    fn port_responses(&self, dir: Direction) -> blindpath::Result<Vec<blindpath::antenna::PortResponse>> {
        Ok(self.0.port_responses(dir)?.into_iter().take(3).collect())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn criterion_1(report: &mut Report) {
    let start = Instant::now();
    let m = dipole_triad();
    let obs = default_observation(f64::INFINITY, 0);
    let truth = default_truth();
    let y2 = obs.data().norm_squared();
    let cml = cml_evaluate(&obs, &truth, &m).unwrap().cost / y2;
    let ccr_true = ccr_evaluate(&obs, &truth, &m, Some(&truth.weights())).unwrap().cost / y2;
    let ccr_solved = ccr_evaluate(&obs, &truth, &m, None).unwrap().cost / y2;
    let worst = cml.max(ccr_true).max(ccr_solved);
    report.line(
        "1",
        "exact-fit zero cost",
        pass_if(worst <= 1e-15),
        format!("cml {cml:.2e}, ccr(true weights) {ccr_true:.2e}, ccr(solved) {ccr_solved:.2e}; tol 1e-15"),
        start,
    );
}

fn criterion_2(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (mut worst_a, mut worst_b, mut worst_c) = (0.0f64, 0.0f64, 0.0f64);
    let m = ThreePorts(small_array());
    for _ in 0..20 {
        for paths in 1..=2 {
            let params = random_params(&mut rng, paths);
            let y = CMatrix::from_fn(3, 4, |_, _| gaussian_c(&mut rng));
            let sigma2 = rng.random_range(0.1..2.0);
            let obs = Observation::new(y.clone(), sigma2).unwrap();

            let h = oracle_channel(&params, &m, 4);
            let dense = oracle_dense_cml(&y, &h, sigma2);
            let fast = cml_evaluate(&obs, &params, &m).unwrap().cost;
            worst_a = worst_a.max(rel(fast, dense));

            let (a, _) = ccr_matrices(&obs, &params, &m).unwrap();
            let lhs = &a * params.weights();
            let rhs = oracle_dense_ddst(&y) * column_major(&h);
            worst_b = worst_b.max((lhs - &rhs).norm() / rhs.norm());

            let kr = vec_channel(&params, &m, FrequencyGrid::new(4).unwrap()).unwrap();
            let direct = column_major(&h);
            worst_c = worst_c.max((kr - &direct).norm() / direct.norm());
        }
    }
    let ok = worst_a <= 1e-9 && worst_b <= 1e-12 && worst_c <= 1e-12;
    report.line(
        "2",
        "oracle equivalences",
        pass_if(ok),
        format!(
            "(a) dense CML {worst_a:.1e} [tol 1e-9], (b) dense DDST {worst_b:.1e} [tol 1e-12], (c) Khatri-Rao {worst_c:.1e} [tol 1e-12]"
        ),
        start,
    );
}

fn criterion_3(report: &mut Report) {
    let start = Instant::now();
    let m = dipole_triad();
    let obs = default_observation(10.0, 3);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        // Off-truth points so both costs are far from zero.
        let mut p = default_truth();
        for path in p.paths_mut() {
            path.direction = Direction::new(
                path.direction.azimuth() + rng.random_range(-0.1..0.1),
                path.direction.elevation() + rng.random_range(-0.1..0.1),
            )
            .unwrap();
            path.delay += rng.random_range(-0.01..0.01);
            path.weight_h += 0.2 * gaussian_c(&mut rng);
            path.weight_v += 0.2 * gaussian_c(&mut rng);
        }
        let cml0 = cml_evaluate(&obs, &p, &m).unwrap().cost;
        let ccr0 = ccr_evaluate(&obs, &p, &m, Some(&p.weights())).unwrap().cost;
        let mut variants = Vec::new();
        let mut scaled = p.clone();
        scaled.scale_weights(c(-1.7, 0.6));
        variants.push(scaled);
        for delta in [0.01, 0.07, 0.3] {
            let mut shifted = p.clone();
            shifted.shift_delays(delta);
            variants.push(shifted);
        }
        for q in &variants {
            worst = worst.max(rel(cml_evaluate(&obs, q, &m).unwrap().cost, cml0));
            worst = worst.max(rel(ccr_evaluate(&obs, q, &m, Some(&q.weights())).unwrap().cost, ccr0));
        }
    }
    report.line(
        "3",
        "gauge invariances",
        pass_if(worst <= 1e-10),
        format!("worst relative change {worst:.1e} over weight scaling and delay shifts 0.01/0.07/0.3; tol 1e-10"),
        start,
    );
}

fn recovered(trial: &TrialRecord, kind: EstimatorKind) -> bool {
    trial
        .outcomes
        .iter()
        .find(|o| o.kind == kind)
        .and_then(|o| o.result.as_ref().ok())
        .is_some_and(|est| {
            let e = &est.errors;
            e.aoa_deg
                .iter()
                .chain(&e.eoa_deg)
                .chain(e.delay.iter().flatten())
                .chain(e.power_db.iter().flatten())
                .all(|v| v.abs() <= 1e-6)
        })
}

fn recovery_rates(init: InitMode) -> (usize, usize) {
    let mut cfg = ScenarioConfig::default_scenario(TRIALS, SEED);
    cfg.snr_db = vec![f64::INFINITY];
    cfg.init = init;
    let sweep = run_sweep(&cfg, None).unwrap();
    let count = |k| sweep.trials.iter().filter(|t| recovered(t, k)).count();
    (count(EstimatorKind::Ccr), count(EstimatorKind::Cml))
}

fn criterion_4(report: &mut Report) {
    let start = Instant::now();
    let (ccr, cml) = recovery_rates(InitMode::PerturbedTruth {
        aoa_sigma_deg: 5.0,
        eoa_sigma_deg: 5.0,
        delay_sigma: 0.02,
        weight_sigma: 0.1,
    });
    let need = (0.95 * TRIALS as f64).ceil() as usize;
    report.line(
        "4",
        "noiseless recovery, 5 deg / 0.02 / 10% start",
        pass_if(ccr >= need && cml >= need),
        format!("ccr {ccr}/{TRIALS}, cml {cml}/{TRIALS} within 1e-6; need {need}"),
        start,
    );

    let start = Instant::now();
    let (ccr, cml) = recovery_rates(InitMode::default());
    report.line(
        "4b",
        "noiseless recovery, default 5 deg / 0.001 / 10% start",
        pass_if(ccr >= need && cml >= need),
        format!("ccr {ccr}/{TRIALS}, cml {cml}/{TRIALS} within 1e-6; need {need}"),
        start,
    );
}

type Metric = (&'static str, fn(&blindpath::montecarlo::RmseRecord) -> &RmseAccumulator);

const METRICS: [Metric; 4] = [
    ("aoa", |r| &r.aoa_deg),
    ("eoa", |r| &r.eoa_deg),
    ("delay", |r| &r.delay),
    ("power", |r| &r.power_db),
];

fn trend_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default_scenario(TRIALS, SEED);
    cfg.snr_db = TREND_SNRS.to_vec();
    cfg
}

fn criterion_5(report: &mut Report, sweep: &SweepResult, start: Instant) {
    let mut violations = Vec::new();
    let mut curves = 0;
    let mut worst_margin = f64::NEG_INFINITY;
    for kind in [EstimatorKind::Ccr, EstimatorKind::Cml] {
        for path in 1..=3 {
            for (name, get) in METRICS {
                let acc: Vec<&RmseAccumulator> = TREND_SNRS
                    .iter()
                    .map(|&s| get(sweep.record(kind, s, path).unwrap()))
                    .collect();
                if acc[0].rmse().is_none() {
                    continue;
                }
                curves += 1;
                let (first, last) = (acc[0].rmse().unwrap(), acc[5].rmse().unwrap());
                if !(last < first) {
                    violations.push(format!("{kind} path {path} {name}: 20 dB {last:.3e} >= 0 dB {first:.3e}"));
                }
                for i in 0..5 {
                    let (a, b) = (acc[i], acc[i + 1]);
                    let se = (a.standard_error().unwrap().powi(2) + b.standard_error().unwrap().powi(2)).sqrt();
                    let rise = b.rmse().unwrap() - a.rmse().unwrap();
                    worst_margin = worst_margin.max(rise / se.max(f64::MIN_POSITIVE));
                    if rise > 1.5 * se {
                        violations.push(format!(
                            "{kind} path {path} {name}: {} -> {} dB rises by {rise:.3e} > 1.5 x {se:.3e}",
                            TREND_SNRS[i],
                            TREND_SNRS[i + 1]
                        ));
                    }
                }
            }
        }
    }
    let failed: usize = sweep.failures().iter().map(|f| f.3).sum();
    let detail = if violations.is_empty() {
        format!("{curves} curves decrease; largest rise {worst_margin:.2} standard errors; {failed} failed runs")
    } else {
        violations.join("; ")
    };
    report.line("5", "consistency trend over SNR", pass_if(violations.is_empty()), detail, start);
}

/// Mean over paths of paired RMSEs: trials where both estimators succeeded.
fn paired_mean_rmse(trials: &[TrialRecord], snr: f64, metric: &str) -> (f64, f64) {
    let mut acc = [vec![RmseAccumulator::default(); 3], vec![RmseAccumulator::default(); 3]];
    for t in trials.iter().filter(|t| t.snr_db == snr) {
        let get = |k| t.outcomes.iter().find(|o| o.kind == k).and_then(|o| o.result.as_ref().ok());
        let (Some(cml), Some(ccr)) = (get(EstimatorKind::Cml), get(EstimatorKind::Ccr)) else {
            continue;
        };
        for (slot, est) in [cml, ccr].into_iter().enumerate() {
            let e = &est.errors;
            for p in 0..3 {
                let v = match metric {
                    "aoa" => Some(e.aoa_deg[p]),
                    "eoa" => Some(e.eoa_deg[p]),
                    "delay" => e.delay[p],
                    _ => e.power_db[p],
                };
                if let Some(v) = v {
                    acc[slot][p].push(v);
                }
            }
        }
    }
    let mean = |a: &[RmseAccumulator]| {
        let v: Vec<f64> = a.iter().filter_map(|x| x.rmse()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    (mean(&acc[0]), mean(&acc[1]))
}

fn criterion_6(report: &mut Report, trend: &SweepResult, start: Instant) {
    let mut cfg = trend_config();
    cfg.snr_db = vec![2.0];
    let extra = run_sweep(&cfg, None).unwrap();
    let trials: Vec<TrialRecord> = trend.trials.iter().chain(&extra.trials).cloned().collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for snr in [0.0, 2.0, 4.0] {
        for metric in ["eoa", "delay", "power"] {
            let (cml, ccr) = paired_mean_rmse(&trials, snr, metric);
            ok &= cml <= 1.05 * ccr;
            parts.push(format!("{snr} dB {metric} {:.3}", cml / ccr));
        }
    }
    report.line(
        "6",
        "low-SNR ordering CML <= 1.05 CCR (ratio shown)",
        if ok { Status::Pass } else { Status::SoftFail },
        parts.join(", "),
        start,
    );
}

fn criterion_7(report: &mut Report, sweep: &SweepResult, start: Instant) {
    let mut worst = (0.0f64, String::new());
    for path in 1..=3 {
        for (name, get) in METRICS {
            let a = get(sweep.record(EstimatorKind::Cml, 20.0, path).unwrap()).rmse();
            let b = get(sweep.record(EstimatorKind::Ccr, 20.0, path).unwrap()).rmse();
            if let (Some(a), Some(b)) = (a, b) {
                let d = (a - b).abs() / (0.5 * (a + b));
                if d > worst.0 {
                    worst = (d, format!("path {path} {name}"));
                }
            }
        }
    }
    report.line(
        "7",
        "high-SNR agreement at 20 dB",
        pass_if(worst.0 <= 0.15),
        format!("largest |CML - CCR| / mean {:.3} ({}); tol 0.15", worst.0, worst.1),
        start,
    );
}

fn criterion_8(report: &mut Report, runs: usize) {
    let start = Instant::now();
    let rosenbrock = FnProblem {
        residual: |x: &DVector<f64>| Ok(DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]])),
        jacobian: |x: &DVector<f64>| Ok(DMatrix::from_row_slice(2, 2, &[-20.0 * x[0], 10.0, -1.0, 0.0])),
    };
    let res = minimize(&rosenbrock, DVector::from_vec(vec![-1.2, 1.0]), &LmOptions::default()).unwrap();
    let ok = res.cost <= 1e-16
        && res.iterations <= 200
        && (res.x[0] - 1.0).abs() < 1e-8
        && (res.x[1] - 1.0).abs() < 1e-8
        && res.is_monotone();
    report.line(
        "8",
        "optimizer",
        pass_if(ok),
        format!(
            "Rosenbrock cost {:.1e} after {} iterations at ({:.10}, {:.10}); monotone accepted steps checked inline on {runs} Monte-Carlo runs",
            res.cost, res.iterations, res.x[0], res.x[1]
        ),
        start,
    );
}

/// Five-point central differences with steps larger than the library's.
fn five_point<P: LeastSquaresProblem>(problem: &P, x: &DVector<f64>, steps: &[f64]) -> DMatrix<f64> {
    let r0 = problem.residuals(x).unwrap();
    let mut j = DMatrix::zeros(r0.len(), x.len());
    for (col, &h) in steps.iter().enumerate() {
        let at = |t: f64| {
            let mut y = x.clone();
            y[col] += t;
            problem.residuals(&y).unwrap()
        };
        let d = (at(-2.0 * h) - at(2.0 * h) + (at(h) - at(-h)) * 8.0) / (12.0 * h);
        j.set_column(col, &d);
    }
    j
}

fn worst_entry(j: &DMatrix<f64>, oracle: &DMatrix<f64>) -> f64 {
    let floor = 1e-3 * oracle.amax();
    j.iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).abs() / b.abs().max(floor))
        .fold(0.0, f64::max)
}

fn criterion_9(report: &mut Report) {
    let start = Instant::now();
    let m = dipole_triad();
    let obs = default_observation(10.0, 9);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let (mut worst_cml, mut worst_ccr) = (0.0f64, 0.0f64);
    for _ in 0..3 {
        let mut p = default_truth();
        for path in p.paths_mut() {
            path.direction = Direction::new(
                path.direction.azimuth() + rng.random_range(-0.08..0.08),
                path.direction.elevation() + rng.random_range(-0.08..0.08),
            )
            .unwrap();
            path.delay += rng.random_range(-0.003..0.003);
            path.weight_h += 0.1 * gaussian_c(&mut rng);
            path.weight_v += 0.1 * gaussian_c(&mut rng);
        }
        p.shift_delays(-p.paths()[0].delay);

        let cml = CmlProblem::new(&obs, &m, &p);
        let x = cml.layout.encode(cml.layout.template());
        let steps = oracle_steps(&cml.layout);
        worst_cml = worst_cml.max(worst_entry(&cml_jacobian(&obs, &p, &m).unwrap(), &five_point(&cml, &x, &steps)));

        let ccr = CcrProblem::new(&obs, &m, &p, CcrMode::TwoStep);
        let x = ccr.layout.encode(ccr.layout.template());
        let steps = oracle_steps(&ccr.layout);
        worst_ccr = worst_ccr.max(worst_entry(&ccr.jacobian(&x).unwrap(), &five_point(&ccr, &x, &steps)));
    }
    report.line(
        "9",
        "Jacobians vs five-point differences",
        pass_if(worst_cml <= 1e-5 && worst_ccr <= 1e-5),
        format!("worst relative entry error cml {worst_cml:.1e}, ccr {worst_ccr:.1e}; tol 1e-5"),
        start,
    );
}

fn oracle_steps(layout: &blindpath::gauge::Parameterization) -> Vec<f64> {
    let (az, el) = layout.angle_ranges();
    (0..layout.dim())
        .map(|i| if az.contains(&i) || el.contains(&i) { 1e-4 } else { 1e-5 })
        .collect()
}

fn main() -> ExitCode {
    let mut report = Report { hard_failures: 0 };
    println!("acceptance suite: {TRIALS} trials per Monte-Carlo point, seed {SEED}");
    criterion_1(&mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criterion_9(&mut report);
    criterion_4(&mut report);

    let start = Instant::now();
    let cfg = trend_config();
    let trend = run_sweep(&cfg, None).unwrap();
    criterion_5(&mut report, &trend, start);
    let start = Instant::now();
    criterion_6(&mut report, &trend, start);
    criterion_7(&mut report, &trend, Instant::now());
    let runs = (TREND_SNRS.len() + 1) * TRIALS * 2 + 2 * TRIALS * 2;
    criterion_8(&mut report, runs);

    let start = Instant::now();
    let first = rmse_csv(&trend.records).unwrap();
    let again = rmse_csv(&run_sweep(&cfg, Some(1)).unwrap().records).unwrap();
    report.line(
        "10",
        "deterministic CSV",
        pass_if(first == again),
        format!("{} bytes, rerun with one worker identical: {}", first.len(), first == again),
        start,
    );

    if report.hard_failures == 0 {
        println!("acceptance: all hard criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} hard criteria failed", report.hard_failures);
        ExitCode::FAILURE
    }
}
