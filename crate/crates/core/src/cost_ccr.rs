//! Channel cross-relation cost.
//!
//! Two ports driven by the same transmitter satisfy `x_i h_j - x_j h_i = 0` in
//! every bin, independent of the spectrum. Stacking all `Q = M_R (M_R - 1) / 2`
//! port pairs of every bin gives `DDST(Y) h = 0`, and since
//! `h = (E^T kr B) gamma` is linear in the path weights,
//!
//! ```text
//! C(alpha) = ||A gamma||^2 / ||M gamma||^2,   A = DDST(Y) M,   M = E^T kr B
//! ```
//!
//! For fixed angles and delays the optimal `gamma` is the generalized
//! eigenvector of `(A^H A, M^H M)` with the smallest eigenvalue, which turns
//! the outer search into one over angles and delays only.

use nalgebra::{DMatrix, DVector};

use crate::antenna::{build_steering_matrix, Manifold};
use crate::channel_model::{build_exponential_matrix, khatri_rao, Observation, PathParameterSet};
use crate::cost_cml::realify;
use crate::gauge::Parameterization;
use crate::optimizer::{central_difference_jacobian, LeastSquaresProblem};
use crate::{CMatrix, CVector, Complex64, Error, Result};

// Relative pivot below which M^H M counts as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// All port pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn port_pairs(ports: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(ports * ports.saturating_sub(1) / 2);
    for i in 0..ports {
        for j in i + 1..ports {
            out.push((i, j));
        }
    }
    out
}

/// Pairwise cross relations: entry `(i, j)` is `x_i h_j - x_j h_i`.
pub fn dst_apply(x: &[Complex64], h: &[Complex64]) -> Result<CVector> {
    if x.len() != h.len() {
        return Err(Error::Dimension(format!(
            "dst operands have lengths {} and {}",
            x.len(),
            h.len()
        )));
    }
    let pairs = port_pairs(x.len());
    Ok(CVector::from_iterator(
        pairs.len(),
        pairs.iter().map(|&(i, j)| x[i] * h[j] - x[j] * h[i]),
    ))
}

/// The data-selection operator in implicit form: the raw data and the pair
/// list, reused for every candidate parameter vector.
#[derive(Debug, Clone)]
pub struct DstBlocks<'a> {
    y: &'a CMatrix,
    pairs: Vec<(usize, usize)>,
}

impl<'a> DstBlocks<'a> {
    pub fn new(obs: &'a Observation) -> Self {
        Self {
            y: obs.data(),
            pairs: port_pairs(obs.ports()),
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn rows_per_bin(&self) -> usize {
        self.pairs.len()
    }

    /// `DST(y(k)) h` for a length-`M_R` segment `h`.
    pub fn apply_bin(&self, k: usize, h: &[Complex64], out: &mut [Complex64]) {
        let x = self.y.column(k);
        for (row, &(i, j)) in self.pairs.iter().enumerate() {
            out[row] = x[i] * h[j] - x[j] * h[i];
        }
    }

    /// Dense `Q x M_R` operator of bin `k`.
    pub fn dense_bin(&self, k: usize) -> CMatrix {
        let x = self.y.column(k);
        let mut d = CMatrix::zeros(self.pairs.len(), self.y.nrows());
        for (row, &(i, j)) in self.pairs.iter().enumerate() {
            d[(row, j)] = x[i];
            d[(row, i)] = -x[j];
        }
        d
    }

    /// Dense block-diagonal `QK x M_R K` operator.
    pub fn dense(&self) -> CMatrix {
        let (m, k) = self.y.shape();
        let q = self.pairs.len();
        let mut d = CMatrix::zeros(q * k, m * k);
        for bin in 0..k {
            d.view_mut((bin * q, bin * m), (q, m)).copy_from(&self.dense_bin(bin));
        }
        d
    }
}

/// `(A, M)` with `M = E^T kr B` (`M_R K x 2P`) and `A = DDST(Y) M` (`QK x 2P`).
pub fn ccr_matrices<M: Manifold + ?Sized>(
    obs: &Observation,
    params: &PathParameterSet,
    manifold: &M,
) -> Result<(CMatrix, CMatrix)> {
    if manifold.port_count() != obs.ports() {
        return Err(Error::Dimension(format!(
            "array has {} ports, observation has {}",
            manifold.port_count(),
            obs.ports()
        )));
    }
    let b = build_steering_matrix(manifold, &params.directions())?;
    let e = build_exponential_matrix(params, obs.grid());
    let m = khatri_rao(&e.transpose(), &b)?;
    let dst = DstBlocks::new(obs);
    Ok((assemble_a(&dst, &m, obs.ports()), m))
}

fn assemble_a(dst: &DstBlocks<'_>, m: &CMatrix, ports: usize) -> CMatrix {
    let bins = m.nrows() / ports;
    let q = dst.rows_per_bin();
    let mut a = CMatrix::zeros(q * bins, m.ncols());
    let mut seg = vec![Complex64::new(0.0, 0.0); ports];
    let mut out = vec![Complex64::new(0.0, 0.0); q];
    for col in 0..m.ncols() {
        for bin in 0..bins {
            for (p, s) in seg.iter_mut().enumerate() {
                *s = m[(bin * ports + p, col)];
            }
            dst.apply_bin(bin, &seg, &mut out);
            for (row, v) in out.iter().enumerate() {
                a[(bin * q + row, col)] = *v;
            }
        }
    }
    a
}

/// Rotates the first clearly nonzero component to the positive real axis.
fn fix_phase(gamma: &mut CVector) {
    let peak = gamma.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if let Some(lead) = gamma.iter().find(|c| c.norm() > 1e-8 * peak).copied() {
        let rot = lead.conj() / lead.norm();
        for g in gamma.iter_mut() {
            *g *= rot;
        }
    }
}

/// Minimizer of `||A g||^2 / ||M g||^2`, normalized to `||M g|| = 1`, together
/// with the attained quotient.
pub fn solve_gamma(a: &CMatrix, m: &CMatrix) -> Result<(CVector, f64)> {
    if a.ncols() != m.ncols() || m.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "A has {} columns, M has {}",
            a.ncols(),
            m.ncols()
        )));
    }
    let mut gamma = smallest_generalized_eigenvector(&(a.adjoint() * a), &(m.adjoint() * m))?;
    let denom = (m * &gamma).norm();
    gamma /= Complex64::new(denom, 0.0);
    let quotient = (a * &gamma).norm_squared();
    Ok((gamma, quotient))
}

/// [`solve_gamma`] from the Gram matrices `A^H A` and `M^H M`.
pub fn solve_gamma_gram(ata: &CMatrix, mtm: &CMatrix) -> Result<(CVector, f64)> {
    if ata.shape() != mtm.shape() || !ata.is_square() || ata.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "Gram matrices are {:?} and {:?}",
            ata.shape(),
            mtm.shape()
        )));
    }
    let mut gamma = smallest_generalized_eigenvector(ata, mtm)?;
    let denom = gamma.dotc(&(mtm * &gamma)).re.sqrt();
    gamma /= Complex64::new(denom, 0.0);
    let quotient = gamma.dotc(&(ata * &gamma)).re;
    Ok((gamma, quotient))
}

fn smallest_generalized_eigenvector(ata: &CMatrix, gram: &CMatrix) -> Result<CVector> {
    let n = gram.ncols();
    let max_diag = gram.diagonal().iter().map(|c| c.re).fold(0.0, f64::max);
    if !(max_diag > 0.0) {
        return Err(Error::IllPosedWeights("steering/delay basis is zero".into()));
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::IllPosedWeights("M^H M is not positive definite".into()))?;
    let l = chol.l();
    let min_pivot = (0..n).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
    if min_pivot * min_pivot < RANK_TOL * max_diag {
        return Err(Error::IllPosedWeights("M is (numerically) rank deficient".into()));
    }
    // C = L^-1 (A^H A) L^-H, Hermitian.
    let left = l
        .solve_lower_triangular(ata)
        .ok_or_else(|| Error::IllPosedWeights("singular Cholesky factor".into()))?;
    let c_t = l
        .solve_lower_triangular(&left.adjoint())
        .ok_or_else(|| Error::IllPosedWeights("singular Cholesky factor".into()))?;
    let c = (&c_t + c_t.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = c.symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty spectrum");
    let u = eig.eigenvectors.column(idx).into_owned();
    // gamma = L^-H u.
    let mut gamma = l
        .adjoint()
        .solve_upper_triangular(&u)
        .ok_or_else(|| Error::IllPosedWeights("singular Cholesky factor".into()))?;
    fix_phase(&mut gamma);
    Ok(gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcrEvaluation {
    pub cost: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub gamma: CVector,
}

/// Quotient cost; weights are solved internally unless supplied.
pub fn ccr_evaluate<M: Manifold + ?Sized>(
    obs: &Observation,
    params: &PathParameterSet,
    manifold: &M,
    gamma: Option<&CVector>,
) -> Result<CcrEvaluation> {
    let (a, m) = ccr_matrices(obs, params, manifold)?;
    let gamma = match gamma {
        Some(g) => {
            if g.len() != m.ncols() {
                return Err(Error::Dimension(format!(
                    "gamma has length {}, expected {}",
                    g.len(),
                    m.ncols()
                )));
            }
            g.clone()
        }
        None => solve_gamma(&a, &m)?.0,
    };
    quotient(&a, &m, gamma)
}

fn quotient(a: &CMatrix, m: &CMatrix, gamma: CVector) -> Result<CcrEvaluation> {
    let numerator = (a * &gamma).norm_squared();
    let denominator = (m * &gamma).norm_squared();
    if !(denominator > 0.0) {
        return Err(Error::IllPosedWeights("||M gamma|| vanishes".into()));
    }
    Ok(CcrEvaluation {
        cost: numerator / denominator,
        numerator,
        denominator,
        gamma,
    })
}

/// `A gamma_hat / ||M gamma_hat||` with `gamma_hat` from [`solve_gamma`].
pub fn ccr_residual<M: Manifold + ?Sized>(
    obs: &Observation,
    params: &PathParameterSet,
    manifold: &M,
) -> Result<CVector> {
    let (a, m) = ccr_matrices(obs, params, manifold)?;
    let (gamma, _) = solve_gamma(&a, &m)?;
    let denom = (&m * &gamma).norm();
    Ok(a * gamma / Complex64::new(denom, 0.0))
}

/// How the weights are handled during optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CcrMode {
    /// Outer search over angles and delays, weights solved per evaluation.
    #[default]
    TwoStep,
    /// Weights are part of the outer parameter vector.
    Joint,
}

pub struct CcrProblem<'a, M: Manifold + ?Sized> {
    pub obs: &'a Observation,
    pub manifold: &'a M,
    pub layout: Parameterization,
    pub mode: CcrMode,
    dst: DstBlocks<'a>,
}

impl<'a, M: Manifold + ?Sized> CcrProblem<'a, M> {
    pub fn new(obs: &'a Observation, manifold: &'a M, init: &PathParameterSet, mode: CcrMode) -> Self {
        Self {
            obs,
            manifold,
            layout: Parameterization::new(init, mode == CcrMode::Joint),
            mode,
            dst: DstBlocks::new(obs),
        }
    }

    fn matrices(&self, params: &PathParameterSet) -> Result<(CMatrix, CMatrix)> {
        let b = build_steering_matrix(self.manifold, &params.directions())?;
        let e = build_exponential_matrix(params, self.obs.grid());
        let m = khatri_rao(&e.transpose(), &b)?;
        Ok((assemble_a(&self.dst, &m, self.obs.ports()), m))
    }

    /// Cost, weights and the full parameter set at `x`.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<(CcrEvaluation, PathParameterSet)> {
        let mut params = self.layout.decode(x)?;
        let (a, m) = self.matrices(&params)?;
        let gamma = match self.mode {
            CcrMode::TwoStep => solve_gamma(&a, &m)?.0,
            CcrMode::Joint => params.weights(),
        };
        let eval = quotient(&a, &m, gamma)?;
        params.set_weights(&eval.gamma)?;
        Ok((eval, params))
    }

    pub fn residual_complex(&self, x: &DVector<f64>) -> Result<CVector> {
        let params = self.layout.decode(x)?;
        let (a, m) = self.matrices(&params)?;
        let gamma = match self.mode {
            CcrMode::TwoStep => solve_gamma(&a, &m)?.0,
            CcrMode::Joint => params.weights(),
        };
        let denom = (&m * &gamma).norm();
        if !(denom > 0.0) {
            return Err(Error::IllPosedWeights("||M gamma|| vanishes".into()));
        }
        Ok(a * gamma / Complex64::new(denom, 0.0))
    }
}

impl<M: Manifold + ?Sized> LeastSquaresProblem for CcrProblem<'_, M> {
    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(realify(&self.residual_complex(x)?))
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        central_difference_jacobian(|x| self.residuals(x), x, &self.layout.fd_steps())
    }

    fn project(&self, x: &mut DVector<f64>) {
        self.layout.project(x);
    }
}
