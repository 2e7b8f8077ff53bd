//! Azimuth cut through the CML and CCR costs for the reference scenario, with
//! every other parameter at its true value.
//!
//! `cargo run --release --example cml_cost_surface`

use blindpath::antenna::{ArrayModel, Direction};
use blindpath::channel_model::{make_signal, synthesize, FrequencyGrid, SignalKind};
use blindpath::cost_ccr::ccr_evaluate;
use blindpath::cost_cml::cml_evaluate;
use blindpath::montecarlo::default_truth;

fn main() -> blindpath::Result<()> {
    let truth = default_truth();
    let array = ArrayModel::dipole_triad();
    let grid = FrequencyGrid::new(128)?;
    let signal = make_signal(SignalKind::Flat, grid)?;
    let obs = synthesize(&truth, &array, grid, &signal, 15.0, 1)?;

    println!("{:>8} {:>14} {:>14}", "az_deg", "cml", "ccr");
    for step in -10..=10 {
        let az = 30.0 + 1.5 * step as f64;
        let mut p = truth.clone();
        let el = p.paths()[0].direction.elevation().to_degrees();
        p.paths_mut()[0].direction = Direction::from_degrees(az, el)?;
        let cml = cml_evaluate(&obs, &p, &array)?.cost;
        let ccr = ccr_evaluate(&obs, &p, &array, None)?.cost;
        println!("{az:>8.1} {cml:>14.6e} {ccr:>14.6e}");
    }
    Ok(())
}
