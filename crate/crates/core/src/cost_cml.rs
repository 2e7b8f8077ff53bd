//! Constrained maximum-likelihood cost.
//!
//! Stacking the bins, `y = (I_K kr H) s + n`: the channel acts on the unknown
//! spectrum through a block-diagonal matrix. Substituting the best linear
//! unbiased estimate of `s` into the Gaussian negative log-likelihood leaves
//!
//! ```text
//! C(alpha) = || y_L - H_L H_L^+ y_L ||^2,   y_L = L^-1 y,  H_L = L^-1 (I_K kr H)
//! ```
//!
//! where `R = L L^H` is the noise covariance. With white noise `L = sigma I`
//! and everything decouples per bin: `s_hat(k) = h(k)^H y(k) / ||h(k)||^2`.
//! A dense branch for an arbitrary covariance is kept in [`cml_cost_general`].

use nalgebra::{DMatrix, DVector};

use crate::antenna::{build_steering_matrix, Manifold};
use crate::channel_model::{channel_from_steering, Observation, PathParameterSet};
use crate::gauge::Parameterization;
use crate::optimizer::{central_difference_jacobian, LeastSquaresProblem};
use crate::{CMatrix, CVector, Complex64, Error, Result};

const SINGULAR_NORM: f64 = 1e-300;

/// How `L^-1` acts on the stacked data.
#[derive(Debug, Clone, PartialEq)]
pub enum Whitener {
    /// `L^-1 = (1 / sigma) I`.
    Scalar(f64),
    /// Dense lower-triangular `L^-1`.
    Dense(CMatrix),
}

/// Whitened stacked data `y_L = L^-1 vec(Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedObservation {
    pub y_l: CVector,
    pub whitener: Whitener,
}

fn stack(y: &CMatrix) -> CVector {
    CVector::from_iterator(y.len(), y.iter().copied())
}

impl WhitenedObservation {
    /// White noise with standard deviation `sigma`.
    pub fn white(obs: &Observation, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameters(format!("noise std {sigma} must be > 0")));
        }
        let inv = 1.0 / sigma;
        Ok(Self {
            y_l: stack(obs.data()) * Complex64::new(inv, 0.0),
            whitener: Whitener::Scalar(inv),
        })
    }

    /// Arbitrary Hermitian positive definite covariance of the stacked noise.
    pub fn with_covariance(obs: &Observation, covariance: &CMatrix) -> Result<Self> {
        let n = obs.data().len();
        if covariance.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "covariance must be {n}x{n}, got {:?}",
                covariance.shape()
            )));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameters("noise covariance is not positive definite".into()))?;
        let l = chol.l();
        let l_inv = l
            .solve_lower_triangular(&CMatrix::identity(n, n))
            .ok_or_else(|| Error::InvalidParameters("singular Cholesky factor".into()))?;
        Ok(Self {
            y_l: &l_inv * stack(obs.data()),
            whitener: Whitener::Dense(l_inv),
        })
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        match &self.whitener {
            Whitener::Scalar(s) => v * Complex64::new(*s, 0.0),
            Whitener::Dense(l) => l * v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmlEvaluation {
    pub cost: f64,
    /// Whitened residual, bin-major, length `M_R * K`.
    pub residual: CVector,
    pub s_hat: CVector,
}

fn check_ports<M: Manifold + ?Sized>(obs: &Observation, manifold: &M) -> Result<()> {
    if manifold.port_count() != obs.ports() {
        return Err(Error::Dimension(format!(
            "array has {} ports, observation has {}",
            manifold.port_count(),
            obs.ports()
        )));
    }
    Ok(())
}

fn blue_from_channel(y: &CMatrix, h: &CMatrix) -> Result<CVector> {
    let mut s = CVector::zeros(y.ncols());
    for k in 0..y.ncols() {
        let hk = h.column(k);
        let energy = hk.norm_squared();
        if !(energy.sqrt() >= SINGULAR_NORM) {
            return Err(Error::SingularChannel { bin: k });
        }
        s[k] = hk.dotc(&y.column(k)) / energy;
    }
    Ok(s)
}

/// Per-bin BLUE of the transmitter spectrum under white noise.
pub fn blue_estimate<M: Manifold + ?Sized>(
    obs: &Observation,
    params: &PathParameterSet,
    manifold: &M,
) -> Result<CVector> {
    check_ports(obs, manifold)?;
    let b = build_steering_matrix(manifold, &params.directions())?;
    let h = channel_from_steering(&b, params, obs.grid());
    blue_from_channel(obs.data(), &h)
}

fn evaluate_with_channel(y: &CMatrix, h: &CMatrix, sigma: f64) -> Result<CmlEvaluation> {
    let s_hat = blue_from_channel(y, h)?;
    let (m, k) = y.shape();
    let inv = 1.0 / sigma;
    let mut residual = CVector::zeros(m * k);
    for bin in 0..k {
        let s = s_hat[bin];
        for port in 0..m {
            residual[bin * m + port] = (y[(port, bin)] - h[(port, bin)] * s) * inv;
        }
    }
    Ok(CmlEvaluation {
        cost: residual.norm_squared(),
        residual,
        s_hat,
    })
}

/// CML cost whitened by the observation's noise level (`sigma = 1` when the
/// observation is noiseless).
pub fn cml_evaluate<M: Manifold + ?Sized>(
    obs: &Observation,
    params: &PathParameterSet,
    manifold: &M,
) -> Result<CmlEvaluation> {
    let sigma = if obs.noise_variance() > 0.0 {
        obs.noise_variance().sqrt()
    } else {
        1.0
    };
    cml_evaluate_with_sigma(obs, params, manifold, sigma)
}

pub fn cml_evaluate_with_sigma<M: Manifold + ?Sized>(
    obs: &Observation,
    params: &PathParameterSet,
    manifold: &M,
    sigma: f64,
) -> Result<CmlEvaluation> {
    check_ports(obs, manifold)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameters(format!("noise std {sigma} must be > 0")));
    }
    let b = build_steering_matrix(manifold, &params.directions())?;
    let h = channel_from_steering(&b, params, obs.grid());
    evaluate_with_channel(obs.data(), &h, sigma)
}

/// `I_K kr H`: block diagonal with `h(k)` as block `k`.
pub fn block_channel(h: &CMatrix) -> CMatrix {
    let (m, k) = h.shape();
    let mut out = CMatrix::zeros(m * k, k);
    for bin in 0..k {
        out.view_mut((bin * m, bin), (m, 1)).copy_from(&h.column(bin));
    }
    out
}

/// Dense evaluation for a general whitener: projects `y_L` onto the span of
/// `L^-1 (I_K kr H)` by least squares.
pub fn cml_cost_general<M: Manifold + ?Sized>(
    whitened: &WhitenedObservation,
    obs: &Observation,
    params: &PathParameterSet,
    manifold: &M,
) -> Result<f64> {
    check_ports(obs, manifold)?;
    let b = build_steering_matrix(manifold, &params.directions())?;
    let h = channel_from_steering(&b, params, obs.grid());
    let big = block_channel(&h);
    let h_l = match &whitened.whitener {
        Whitener::Scalar(s) => big * Complex64::new(*s, 0.0),
        Whitener::Dense(l) => l * big,
    };
    let svd = h_l.clone().svd(true, true);
    let s_l = svd
        .solve(&whitened.y_l, 1e-14)
        .map_err(|e| Error::InvalidParameters(e.to_string()))?;
    Ok((&whitened.y_l - h_l * s_l).norm_squared())
}

/// Real view `(re_0, im_0, re_1, ...)` of a complex vector.
pub fn realify(v: &CVector) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|c| [c.re, c.im]))
}

/// CML residual as a least-squares problem over the gauge-reduced parameters,
/// whitened with a fixed `sigma` (1 unless stated otherwise).
pub struct CmlProblem<'a, M: Manifold + ?Sized> {
    pub obs: &'a Observation,
    pub manifold: &'a M,
    pub layout: Parameterization,
    pub sigma: f64,
}

impl<'a, M: Manifold + ?Sized> CmlProblem<'a, M> {
    pub fn new(obs: &'a Observation, manifold: &'a M, init: &PathParameterSet) -> Self {
        Self {
            obs,
            manifold,
            layout: Parameterization::new(init, true),
            sigma: 1.0,
        }
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> Result<CmlEvaluation> {
        let params = self.layout.decode(x)?;
        cml_evaluate_with_sigma(self.obs, &params, self.manifold, self.sigma)
    }
}

impl<M: Manifold + ?Sized> LeastSquaresProblem for CmlProblem<'_, M> {
    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(realify(&self.evaluate(x)?.residual))
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        central_difference_jacobian(|x| self.residuals(x), x, &self.layout.fd_steps())
    }

    fn project(&self, x: &mut DVector<f64>) {
        self.layout.project(x);
    }
}

/// Central-difference Jacobian of the real-stacked residual w.r.t. the free
/// parameters of the layout built around `params` (`sigma = 1`).
pub fn cml_jacobian<M: Manifold + ?Sized>(
    obs: &Observation,
    params: &PathParameterSet,
    manifold: &M,
) -> Result<DMatrix<f64>> {
    let problem = CmlProblem::new(obs, manifold, params);
    let x = problem.layout.encode(problem.layout.template());
    problem.jacobian(&x)
}
