//! Two-step CCR estimation: angles and delays are searched, the path weights
//! follow in closed form. Compared with the joint variant and with CML.
//!
//! `cargo run --release --example ccr_two_step`

use blindpath::antenna::ArrayModel;
use blindpath::channel_model::{make_signal, synthesize, FrequencyGrid, SignalKind};
use blindpath::cost_ccr::CcrMode;
use blindpath::estimator::{estimate, EstimatorKind, EstimatorOptions};
use blindpath::init::perturbed_truth;
use blindpath::montecarlo::{parameter_errors, default_truth};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> blindpath::Result<()> {
    let truth = default_truth().canonicalize();
    let array = ArrayModel::dipole_triad();
    let grid = FrequencyGrid::new(128)?;
    let signal = make_signal(SignalKind::Flat, grid)?;
    let obs = synthesize(&truth, &array, grid, &signal, 20.0, 11)?;
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let init = perturbed_truth(&truth, 3.0, 3.0, 0.0005, 0.1, &mut rng)?;

    let runs = [
        ("ccr two-step", EstimatorKind::Ccr, CcrMode::TwoStep),
        ("ccr joint", EstimatorKind::Ccr, CcrMode::Joint),
        ("cml", EstimatorKind::Cml, CcrMode::TwoStep),
    ];
    for (name, kind, mode) in runs {
        let opts = EstimatorOptions {
            ccr_mode: mode,
            ..Default::default()
        };
        let est = estimate(&obs, &array, &init, kind, &opts)?;
        let e = parameter_errors(&est.params, &truth)?;
        println!(
            "{name:<13} cost {:.4e} after {:>3} steps ({:?})",
            est.cost, est.lm.iterations, est.lm.termination
        );
        for p in 0..truth.len() {
            println!(
                "    path {}: d_az {:+.4} deg, d_el {:+.4} deg, d_tau {:>10}, d_power {:>8}",
                p + 1,
                e.aoa_deg[p],
                e.eoa_deg[p],
                e.delay[p].map_or("-".into(), |v| format!("{v:+.2e}")),
                e.power_db[p].map_or("-".into(), |v| format!("{v:+.3} dB")),
            );
        }
    }
    Ok(())
}
