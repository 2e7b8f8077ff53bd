//! Levenberg-Marquardt minimization of `||r(x)||^2`.
//!
//! Each iteration solves the Marquardt-damped normal equations
//! `(J^T J + lambda * diag(J^T J)) delta = -J^T r`. A step is accepted only if
//! it lowers the cost; otherwise `lambda` is raised and the step recomputed
//! from the same Jacobian. All stopping tests are relative, so scaling the
//! residual by a constant does not change the iterate sequence.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const MAX_CONSECUTIVE_REJECTIONS: usize = 20;

/// A least-squares problem over a real parameter vector.
pub trait LeastSquaresProblem {
    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Maps a trial point back into the parameter domain (angle wrapping and
    /// the like). Identity by default.
    fn project(&self, _x: &mut DVector<f64>) {}
}

/// Closure-backed problem.
pub struct FnProblem<R, J> {
    pub residual: R,
    pub jacobian: J,
}

impl<R, J> LeastSquaresProblem for FnProblem<R, J>
where
    R: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (self.residual)(x)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        (self.jacobian)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub cost_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 0.1,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            cost_tolerance: 1e-12,
        }
    }
}

impl LmOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.initial_damping,
            self.damping_up,
            self.damping_down,
            self.gradient_tolerance,
            self.step_tolerance,
            self.cost_tolerance,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Optimizer("LM options must be positive and finite".into()));
        }
        if self.damping_up <= 1.0 || self.damping_down >= 1.0 {
            return Err(Error::Optimizer(
                "damping factors must satisfy up > 1 and down < 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    Cost,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub x: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Cost at the start point followed by the cost after every accepted step.
    pub cost_trace: Vec<f64>,
}

impl LmResult {
    /// True when every accepted step strictly lowered the cost.
    pub fn is_monotone(&self) -> bool {
        self.cost_trace.windows(2).all(|w| w[1] < w[0])
    }
}

fn cost_of(r: &DVector<f64>) -> Option<f64> {
    let c = r.norm_squared();
    c.is_finite().then_some(c)
}

// Largest cosine between the residual and any Jacobian column.
fn scaled_gradient(jtr: &DVector<f64>, j: &DMatrix<f64>, r_norm: f64) -> f64 {
    if r_norm == 0.0 {
        return 0.0;
    }
    j.column_iter()
        .zip(jtr.iter())
        .map(|(col, g)| {
            let n = col.norm();
            if n == 0.0 {
                0.0
            } else {
                g.abs() / (n * r_norm)
            }
        })
        .fold(0.0, f64::max)
}

pub fn minimize<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    opts: &LmOptions,
) -> Result<LmResult> {
    opts.validate()?;
    let mut x = x0;
    problem.project(&mut x);
    let mut r = problem.residuals(&x)?;
    let mut cost = cost_of(&r)
        .ok_or_else(|| Error::Optimizer("residual is not finite at the start point".into()))?;
    let mut trace = vec![cost];
    let mut lambda = opts.initial_damping;
    let n = x.len();

    // Reported iterations are accepted steps.
    let finish = |x, cost, _loop: usize, termination, cost_trace: Vec<f64>| {
        let iterations = cost_trace.len() - 1;
        Ok(LmResult {
            x,
            cost,
            iterations,
            termination,
            cost_trace,
        })
    };

    for iter in 0..opts.max_iterations {
        if cost == 0.0 {
            return finish(x, cost, iter, Termination::Gradient, trace);
        }
        let j = problem.jacobian(&x)?;
        if j.ncols() != n || j.nrows() != r.len() {
            return Err(Error::Dimension(format!(
                "Jacobian is {}x{}, expected {}x{n}",
                j.nrows(),
                j.ncols(),
                r.len()
            )));
        }
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::Optimizer("non-finite Jacobian".into()));
        }
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        if scaled_gradient(&jtr, &j, cost.sqrt()) <= opts.gradient_tolerance {
            return finish(x, cost, iter, Termination::Gradient, trace);
        }
        let diag_floor = jtj.diagonal().max() * 1e-15;

        let mut non_finite = 0;
        let mut accepted = false;
        for _ in 0..MAX_CONSECUTIVE_REJECTIONS {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= opts.damping_up;
                continue;
            };
            let delta = chol.solve(&(-&jtr));
            // A collapsed step only means convergence when the rejections so
            // far were genuine cost increases.
            if non_finite == 0
                && delta.norm() <= opts.step_tolerance * (x.norm() + opts.step_tolerance)
            {
                return finish(x, cost, iter + 1, Termination::Step, trace);
            }
            let mut trial = &x + &delta;
            problem.project(&mut trial);
            let trial_cost = problem
                .residuals(&trial)
                .ok()
                .and_then(|tr| cost_of(&tr).map(|c| (tr, c)));
            match trial_cost {
                Some((tr, c)) if c < cost => {
                    let rel = (cost - c) / cost;
                    x = trial;
                    r = tr;
                    cost = c;
                    trace.push(c);
                    lambda *= opts.damping_down;
                    accepted = true;
                    if rel <= opts.cost_tolerance {
                        return finish(x, cost, iter + 1, Termination::Cost, trace);
                    }
                    break;
                }
                Some(_) => lambda *= opts.damping_up,
                None => {
                    non_finite += 1;
                    lambda *= opts.damping_up;
                }
            }
        }
        if !accepted {
            if non_finite == MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::Optimizer(format!(
                    "{MAX_CONSECUTIVE_REJECTIONS} consecutive non-finite trial points"
                )));
            }
            // No decrease even with heavy damping: the step has collapsed.
            return finish(x, cost, iter + 1, Termination::Step, trace);
        }
    }
    finish(x, cost, opts.max_iterations, Termination::MaxIterations, trace)
}

/// Central-difference Jacobian of `f` at `x` with per-coordinate steps.
/// `project` is applied to every perturbed point before evaluation.
pub fn central_difference_jacobian<F>(f: F, x: &DVector<f64>, steps: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut cols = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = steps[i];
        let mut xp = x.clone();
        xp[i] += h;
        let mut xm = x.clone();
        xm[i] -= h;
        let rp = f(&xp)?;
        let rm = f(&xm)?;
        cols.push((rp - rm) / (2.0 * h));
    }
    if cols.is_empty() {
        let m = f(x)?.len();
        return Ok(DMatrix::zeros(m, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}
