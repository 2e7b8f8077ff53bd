//! Steering matrix of the default six-port array for a few directions.
//!
//! `cargo run --example steering_matrix`

use blindpath::antenna::{build_steering_matrix, evaluate_pattern, ArrayModel, Direction};
use blindpath::Complex64;

fn fmt(z: Complex64) -> String {
    // Round first so that tiny negative values print as +0.0000.
    let r = |x: f64| if x.abs() < 5e-5 { 0.0 } else { x };
    format!("{:+.4}{:+.4}i", r(z.re), r(z.im))
}

fn main() -> blindpath::Result<()> {
    let array = ArrayModel::dipole_triad();
    let dirs = [
        Direction::from_degrees(30.0, 35.0)?,
        Direction::from_degrees(150.0, 50.0)?,
    ];

    for (i, d) in dirs.iter().enumerate() {
        println!(
            "direction {i}: azimuth {:.1} deg, elevation {:.1} deg",
            d.azimuth().to_degrees(),
            d.elevation().to_degrees()
        );
        for (port, r) in evaluate_pattern(&array, *d).iter().enumerate() {
            println!("  port {port}: b_H = {}  b_V = {}", fmt(r.h), fmt(r.v));
        }
    }

    // Column 2p holds b_H and column 2p + 1 holds b_V of direction p.
    let b = build_steering_matrix(&array, &dirs)?;
    println!("B is {} x {}; column norms:", b.nrows(), b.ncols());
    for (j, col) in b.column_iter().enumerate() {
        println!("  column {j}: {:.4}", col.norm());
    }
    Ok(())
}
