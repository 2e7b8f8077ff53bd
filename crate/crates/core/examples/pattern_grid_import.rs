//! Samples the analytic array on a grid, round-trips it through the JSON
//! pattern format and compares interpolated responses with the exact ones.
//!
//! `cargo run --example pattern_grid_import [path.json]`

use blindpath::antenna::{ArrayModel, ArraySource, Direction, Manifold, PatternGrid};

fn main() -> blindpath::Result<()> {
    let exact = ArrayModel::dipole_triad();
    let grid = match std::env::args().nth(1) {
        Some(path) => PatternGrid::read_json(path.as_ref())?,
        None => {
            // 1 degree grid over the full sphere.
            let sampled = PatternGrid::sample(&exact, 361, 181)?;
            PatternGrid::from_json_str(&sampled.to_json_string()?)?
        }
    };
    let source = ArraySource::Grid(grid);
    println!("grid source with {} ports", source.port_count());

    for (az, el) in [(30.0, 35.0), (150.5, 50.25), (-45.3, 74.9), (179.9, -10.0)] {
        let d = Direction::from_degrees(az, el)?;
        let a = exact.port_responses(d)?;
        let b = source.port_responses(d)?;
        let err = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x.h - y.h).norm().max((x.v - y.v).norm()))
            .fold(0.0, f64::max);
        println!("az {az:>6.1} el {el:>6.2}: max interpolation error {err:.2e}");
    }
    Ok(())
}
