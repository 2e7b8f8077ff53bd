//! Implementation of the `sweep`, `estimate` and `synthesize` commands.
//!
//! The binary only parses arguments; everything that touches files lives here
//! so tests can drive the commands directly.

use std::io::Write as _;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::antenna::Manifold;
use crate::channel_model::PathParameterSet;
use crate::config::{ConfigFile, TruthSidecar};
use crate::estimator::{estimate, EstimatorKind, EstimatorOptions};
use crate::init::{coarse_grid, InitMode};
use crate::montecarlo::{run_sweep, trial_observation, RmseRecord, ScenarioConfig, SweepResult};
use crate::obsfile::{self, write_atomic};
use crate::plot::sweep_charts;
use crate::{Error, Result};

pub const RMSE_CSV: &str = "rmse.csv";
pub const MANIFEST: &str = "manifest.json";
pub const OBSERVATION: &str = "observation.bpob";
pub const TRUTH_SIDECAR: &str = "observation.truth.json";
pub const ESTIMATE_JSON: &str = "estimate.json";

pub const CSV_HEADER: [&str; 9] = [
    "estimator",
    "snr_db",
    "path",
    "rmse_aoa_deg",
    "rmse_eoa_deg",
    "rmse_delay",
    "rmse_power_db",
    "n_success",
    "n_fail",
];

/// Options shared by all commands.
#[derive(Debug, Clone)]
pub struct CommonArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    /// Overrides the config seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuccessCount {
    pub estimator: EstimatorKind,
    #[serde(serialize_with = "serialize_snr")]
    pub snr_db: f64,
    pub n_success: usize,
    pub n_fail: usize,
}

fn serialize_snr<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub config: ConfigFile,
    pub seed: u64,
    pub duration_s: f64,
    pub success: Vec<SuccessCount>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    fn write(&self, out: &FsPath) -> Result<PathBuf> {
        let path = out.join(MANIFEST);
        write_atomic(&path, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok(path)
    }
}

fn load(args: &CommonArgs) -> Result<(ConfigFile, ScenarioConfig)> {
    let mut file = ConfigFile::read(&args.config)?;
    if let Some(seed) = args.seed {
        file.seed = Some(seed);
    }
    let base = args.config.parent().unwrap_or(FsPath::new("."));
    let config = file.resolve(base)?;
    Ok((file, config))
}

fn create_dir(out: &FsPath) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

/// `v` with nine significant digits; plain notation for moderate magnitudes.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.8e}");
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp) as usize, v)
    } else {
        sci
    }
}

fn opt_number(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

/// RMSE table as CSV bytes. Missing values (no successful trial, or delay and
/// power of the reference path) are empty fields.
pub fn rmse_csv(records: &[RmseRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.estimator.as_str().to_string(),
            format_number(r.snr_db),
            r.path.to_string(),
            opt_number(r.aoa_deg.rmse()),
            opt_number(r.eoa_deg.rmse()),
            opt_number(r.delay.rmse()),
            opt_number(r.power_db.rmse()),
            r.n_success.to_string(),
            r.n_fail.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

fn success_counts(sweep: &SweepResult) -> Vec<SuccessCount> {
    sweep
        .failures()
        .into_iter()
        .map(|(estimator, snr_db, n_success, n_fail)| SuccessCount {
            estimator,
            snr_db,
            n_success,
            n_fail,
        })
        .collect()
}

pub fn cmd_sweep(args: &CommonArgs, jobs: Option<usize>, plots: bool) -> Result<RunManifest> {
    let start = Instant::now();
    let (file, config) = load(args)?;
    create_dir(&args.out)?;
    let sweep = run_sweep(&config, jobs)?;

    let mut outputs = Vec::new();
    let csv_path = args.out.join(RMSE_CSV);
    write_atomic(&csv_path, &rmse_csv(&sweep.records)?)?;
    outputs.push(csv_path);
    if plots {
        for (stem, chart) in sweep_charts(&sweep) {
            let path = args.out.join(format!("{stem}.svg"));
            write_atomic(&path, chart.to_svg().as_bytes())?;
            outputs.push(path);
        }
    }
    let mut manifest = RunManifest {
        command: "sweep",
        tool_version: env!("CARGO_PKG_VERSION"),
        config: file,
        seed: config.seed,
        duration_s: start.elapsed().as_secs_f64(),
        success: success_counts(&sweep),
        outputs,
    };
    manifest.outputs.push(args.out.join(MANIFEST));
    manifest.write(&args.out)?;
    Ok(manifest)
}

/// Synthesizes trial 0 at the first SNR of the config.
pub fn cmd_synthesize(args: &CommonArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let (file, config) = load(args)?;
    create_dir(&args.out)?;
    let snr = config.snr_db[0];
    let obs = trial_observation(&config, snr, 0)?;
    let obs_path = args.out.join(OBSERVATION);
    obsfile::write(&obs_path, &obs)?;
    let truth_path = args.out.join(TRUTH_SIDECAR);
    let sidecar = TruthSidecar::new(&config.truth, config.bins, snr, config.seed, obs.noise_variance());
    write_atomic(&truth_path, serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
    let manifest = RunManifest {
        command: "synthesize",
        tool_version: env!("CARGO_PKG_VERSION"),
        config: file,
        seed: config.seed,
        duration_s: start.elapsed().as_secs_f64(),
        success: Vec::new(),
        outputs: vec![obs_path, truth_path, args.out.join(MANIFEST)],
    };
    manifest.write(&args.out)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct PathReport {
    pub aoa_deg: f64,
    pub eoa_deg: f64,
    /// Delay relative to the reference (first) path.
    pub delay_norm: f64,
    /// Power relative to the reference path.
    pub power_db: f64,
    /// Share of the path power in horizontal polarization.
    pub h_fraction: f64,
    /// Phases relative to the dominant weight component of the reference
    /// path; `None` for a vanishing component.
    pub phase_h_deg: Option<f64>,
    pub phase_v_deg: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub cost: f64,
    pub iterations: usize,
    pub termination: String,
    pub paths: Vec<PathReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateOutput {
    pub observation: PathBuf,
    pub ports: usize,
    pub bins: usize,
    pub noise_variance: f64,
    pub estimates: Vec<EstimateReport>,
}

/// Canonical (reference path first) report of an estimate.
pub fn report_paths(params: &PathParameterSet) -> Vec<PathReport> {
    let canon = params.canonicalize_cyclic();
    let reference = canon.paths()[0];
    let ref_power = reference.power();
    let ref_phase = if reference.weight_v.norm() > reference.weight_h.norm() {
        reference.weight_v.arg()
    } else {
        reference.weight_h.arg()
    };
    let tiny = 1e-12 * ref_power.sqrt();
    let rel_phase = |w: crate::Complex64| {
        (w.norm() > tiny).then(|| crate::antenna::wrap_angle(w.arg() - ref_phase).to_degrees())
    };
    canon
        .paths()
        .iter()
        .map(|p| PathReport {
            aoa_deg: p.direction.azimuth().to_degrees(),
            eoa_deg: p.direction.elevation().to_degrees(),
            delay_norm: p.delay,
            power_db: 10.0 * (p.power() / ref_power).log10(),
            h_fraction: p.weight_h.norm_sqr() / p.power(),
            phase_h_deg: rel_phase(p.weight_h),
            phase_v_deg: rel_phase(p.weight_v),
        })
        .collect()
}

/// Estimates paths from a stored observation. The config supplies the array,
/// the path count and the start: its `paths` are used unperturbed as the
/// starting point in perturbed-truth mode, and ignored in coarse-grid mode.
pub fn cmd_estimate(args: &CommonArgs, observation: &FsPath) -> Result<EstimateOutput> {
    let (_, config) = load(args)?;
    let obs = obsfile::read(observation)?;
    if obs.ports() != config.array.port_count() {
        return Err(Error::Format(format!(
            "observation has {} ports, array has {}",
            obs.ports(),
            config.array.port_count()
        )));
    }
    obs.grid()
        .check_supports(config.truth.len())
        .map_err(|e| Error::config("paths", e.to_string()))?;
    let init = match config.init {
        InitMode::PerturbedTruth { .. } => config.truth.canonicalize(),
        InitMode::CoarseGrid {
            azimuth_step_deg,
            elevation_step_deg,
            delay_step,
        } => coarse_grid(
            &obs,
            &config.array,
            config.truth.len(),
            azimuth_step_deg,
            elevation_step_deg,
            delay_step,
        )?,
    };
    let opts = EstimatorOptions {
        lm: config.lm,
        ccr_mode: config.ccr_mode,
    };
    let estimates = config
        .estimators
        .iter()
        .map(|&kind| {
            let est = estimate(&obs, &config.array, &init, kind, &opts)?;
            Ok(EstimateReport {
                estimator: kind,
                cost: est.cost,
                iterations: est.lm.iterations,
                termination: format!("{:?}", est.lm.termination),
                paths: report_paths(&est.params),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let output = EstimateOutput {
        observation: observation.to_path_buf(),
        ports: obs.ports(),
        bins: obs.bins(),
        noise_variance: obs.noise_variance(),
        estimates,
    };
    create_dir(&args.out)?;
    let mut text = serde_json::to_vec_pretty(&output)?;
    text.write_all(b"\n").expect("write to Vec");
    write_atomic(&args.out.join(ESTIMATE_JSON), &text)?;
    Ok(output)
}
