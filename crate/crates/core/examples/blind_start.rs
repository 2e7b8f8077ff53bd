//! Estimation without ground truth: a greedy coarse grid search on the CCR
//! cost provides the start, then both estimators refine it.
//!
//! `cargo run --release --example blind_start`

use blindpath::antenna::ArrayModel;
use blindpath::channel_model::{make_signal, synthesize, FrequencyGrid, SignalKind};
use blindpath::estimator::{estimate, EstimatorKind};
use blindpath::init::coarse_grid;
use blindpath::montecarlo::{parameter_errors, default_truth};

fn main() -> blindpath::Result<()> {
    let truth = default_truth().canonicalize();
    let array = ArrayModel::dipole_triad();
    let grid = FrequencyGrid::new(128)?;
    let signal = make_signal(SignalKind::Flat, grid)?;
    let obs = synthesize(&truth, &array, grid, &signal, 25.0, 5)?;

    let start = std::time::Instant::now();
    let init = coarse_grid(&obs, &array, truth.len(), 10.0, 15.0, None)?;
    println!("grid search: {:.1} s", start.elapsed().as_secs_f64());

    for kind in [EstimatorKind::Ccr, EstimatorKind::Cml] {
        let est = estimate(&obs, &array, &init, kind, &Default::default())?;
        let e = parameter_errors(&est.params, &truth)?;
        let worst = e.aoa_deg.iter().chain(&e.eoa_deg).fold(0.0f64, |m, v| m.max(v.abs()));
        println!("{kind}: cost {:.4e}, worst angle error {worst:.3} deg", est.cost);
    }
    Ok(())
}
