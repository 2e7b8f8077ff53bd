//! The Levenberg-Marquardt solver on the Rosenbrock residual, from the
//! classic start (-1.2, 1).
//!
//! `cargo run --example lm_rosenbrock`

use blindpath::optimizer::{minimize, FnProblem, LmOptions};
use nalgebra::{DMatrix, DVector};

fn main() -> blindpath::Result<()> {
    let problem = FnProblem {
        residual: |x: &DVector<f64>| Ok(DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]])),
        jacobian: |x: &DVector<f64>| Ok(DMatrix::from_row_slice(2, 2, &[-20.0 * x[0], 10.0, -1.0, 0.0])),
    };
    let res = minimize(&problem, DVector::from_vec(vec![-1.2, 1.0]), &LmOptions::default())?;
    for (i, c) in res.cost_trace.iter().enumerate() {
        println!("step {i:>2}: cost {c:.6e}");
    }
    println!(
        "x = ({:.12}, {:.12}), {} accepted steps, stopped by {:?}",
        res.x[0], res.x[1], res.iterations, res.termination
    );
    Ok(())
}
