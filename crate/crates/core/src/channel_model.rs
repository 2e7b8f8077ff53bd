//! Parametric frequency-domain SIMO channel and observation synthesis.
//!
//! For `P` paths the channel matrix is `H = B * Gamma * E` where `B` is the
//! `M_R x 2P` steering matrix, `Gamma = diag(g_H1, g_V1, ..., g_HP, g_VP)` and
//! row pair `(2p, 2p + 1)` of `E` holds `exp(-j 2 pi k tau_p)` for bins
//! `k = 0..K`. Delays are normalized to the ambiguity window, so `tau` and
//! `tau + 1` are indistinguishable.
//!
//! Absolute delay and absolute weight scale cannot be observed: a common delay
//! shift is absorbed by the transmitter spectrum, and so is a common weight
//! factor. [`PathParameterSet::canonicalize`] fixes the delay gauge by referring
//! every path to the earliest arrival.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::antenna::{build_steering_matrix, Direction, Manifold};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// One specular path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub direction: Direction,
    pub weight_h: Complex64,
    pub weight_v: Complex64,
    /// Normalized delay (cycles across the measured band).
    pub delay: f64,
}

impl Path {
    /// Squared norm of the `(g_H, g_V)` pair.
    pub fn power(&self) -> f64 {
        self.weight_h.norm_sqr() + self.weight_v.norm_sqr()
    }
}

/// Parameters of all paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathParameterSet {
    paths: Vec<Path>,
}

impl PathParameterSet {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidParameters("at least one path is required".into()));
        }
        for (i, p) in paths.iter().enumerate() {
            let finite = p.delay.is_finite()
                && [p.weight_h, p.weight_v]
                    .iter()
                    .all(|w| w.re.is_finite() && w.im.is_finite());
            if !finite {
                return Err(Error::InvalidParameters(format!("path {i}: non-finite value")));
            }
        }
        Ok(Self { paths })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn paths_mut(&mut self) -> &mut [Path] {
        &mut self.paths
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.paths.iter().map(|p| p.direction).collect()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.delay).collect()
    }

    /// Stacked weights `(g_H1, g_V1, ..., g_HP, g_VP)`.
    pub fn weights(&self) -> CVector {
        CVector::from_iterator(
            2 * self.paths.len(),
            self.paths.iter().flat_map(|p| [p.weight_h, p.weight_v]),
        )
    }

    /// Replaces all weights from a stacked vector; see [`Self::weights`].
    pub fn set_weights(&mut self, gamma: &CVector) -> Result<()> {
        if gamma.len() != 2 * self.paths.len() {
            return Err(Error::Dimension(format!(
                "weight vector has length {}, expected {}",
                gamma.len(),
                2 * self.paths.len()
            )));
        }
        for (p, path) in self.paths.iter_mut().enumerate() {
            path.weight_h = gamma[2 * p];
            path.weight_v = gamma[2 * p + 1];
        }
        Ok(())
    }

    pub fn scale_weights(&mut self, c: Complex64) {
        for p in &mut self.paths {
            p.weight_h *= c;
            p.weight_v *= c;
        }
    }

    pub fn shift_delays(&mut self, delta: f64) {
        for p in &mut self.paths {
            p.delay += delta;
        }
    }

    /// Sorts by delay (stable, so ties keep their original order) and shifts
    /// all delays so the earliest path sits at zero. Weights are untouched.
    pub fn canonicalize(&self) -> Self {
        let mut paths = self.paths.clone();
        paths.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        let first = paths[0].delay;
        for p in &mut paths {
            p.delay -= first;
        }
        paths[0].delay = 0.0;
        Self { paths }
    }

    /// Like [`Self::canonicalize`] but first wraps every delay into `[0, 1)`,
    /// which is the right view for estimates since delays are cyclic.
    pub fn canonicalize_cyclic(&self) -> Self {
        let mut wrapped = self.clone();
        for p in &mut wrapped.paths {
            p.delay = p.delay.rem_euclid(1.0);
        }
        wrapped.canonicalize()
    }

    pub fn is_canonical(&self) -> bool {
        self.paths[0].delay == 0.0 && self.paths.windows(2).all(|w| w[0].delay <= w[1].delay)
    }
}

/// Uniform normalized frequency grid with `K` bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyGrid {
    bins: usize,
}

impl FrequencyGrid {
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidParameters("frequency grid needs at least one bin".into()));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Normalized frequency `k / K` of bin `k`.
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 / self.bins as f64
    }

    /// Guards the delay identifiability requirement `K >= 2P`.
    pub fn check_supports(&self, paths: usize) -> Result<()> {
        if self.bins < 2 * paths {
            return Err(Error::InvalidParameters(format!(
                "{paths} paths need at least {} frequency bins, got {}",
                2 * paths,
                self.bins
            )));
        }
        Ok(())
    }
}

/// Transmitter spectrum `s(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitterSignal(CVector);

impl TransmitterSignal {
    pub fn new(samples: CVector) -> Result<Self> {
        if samples.iter().all(|c| c.norm_sqr() == 0.0) {
            return Err(Error::InvalidSignal("signal is identically zero".into()));
        }
        Ok(Self(samples))
    }

    pub fn samples(&self) -> &CVector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Transmitter waveform families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalKind {
    Flat,
    /// Time-domain boxcar occupying the first `ceil(duty * K)` samples.
    RectPulse { duty: f64 },
}

impl Default for SignalKind {
    fn default() -> Self {
        // A single-sample pulse: flat spectrum, no in-band nulls.
        SignalKind::Flat
    }
}

pub fn make_signal(kind: SignalKind, grid: FrequencyGrid) -> Result<TransmitterSignal> {
    let k = grid.bins();
    match kind {
        SignalKind::Flat => TransmitterSignal::new(CVector::from_element(k, Complex64::new(1.0, 0.0))),
        SignalKind::RectPulse { duty } => {
            if !(duty > 0.0 && duty <= 1.0) {
                return Err(Error::InvalidSignal(format!("duty {duty} outside (0, 1]")));
            }
            // Small slack keeps duty = n/K from rounding up to n + 1.
            let width = ((duty * k as f64) - 1e-9).ceil().max(1.0) as usize;
            let mut buf: Vec<Complex64> = (0..k)
                .map(|n| Complex64::new(if n < width { 1.0 } else { 0.0 }, 0.0))
                .collect();
            FftPlanner::new().plan_fft_forward(k).process(&mut buf);
            TransmitterSignal::new(CVector::from_vec(buf))
        }
    }
}

/// Received data plus the grid it was sampled on.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    y: CMatrix,
    grid: FrequencyGrid,
    noise_variance: f64,
}

impl Observation {
    pub fn new(y: CMatrix, noise_variance: f64) -> Result<Self> {
        let grid = FrequencyGrid::new(y.ncols())?;
        if y.nrows() == 0 {
            return Err(Error::Dimension("observation has no ports".into()));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::InvalidParameters(format!(
                "noise variance {noise_variance} must be >= 0"
            )));
        }
        Ok(Self {
            y,
            grid,
            noise_variance,
        })
    }

    /// `M_R x K` data matrix; column `k` is the snapshot of bin `k`.
    pub fn data(&self) -> &CMatrix {
        &self.y
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn ports(&self) -> usize {
        self.y.nrows()
    }

    pub fn bins(&self) -> usize {
        self.y.ncols()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Same data scaled by `c`, with the noise variance scaled by `|c|^2`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            y: &self.y * Complex64::new(c, 0.0),
            grid: self.grid,
            noise_variance: self.noise_variance * c * c,
        }
    }
}

/// `exp(-j 2 pi k tau)` for `k = 0..K`.
pub fn delay_phasors(delay: f64, bins: usize) -> impl Iterator<Item = Complex64> {
    // Reduce the phase per bin modulo one cycle before scaling by 2 pi so large
    // k keep full precision.
    (0..bins).map(move |k| {
        let cycles = (k as f64 * delay).rem_euclid(1.0);
        Complex64::from_polar(1.0, -TAU * cycles)
    })
}

/// `E(tau)`: `2P x K`, rows `2p` and `2p + 1` equal for path `p`.
pub fn build_exponential_matrix(params: &PathParameterSet, grid: FrequencyGrid) -> CMatrix {
    let k = grid.bins();
    let mut e = CMatrix::zeros(2 * params.len(), k);
    for (p, path) in params.paths().iter().enumerate() {
        for (col, z) in delay_phasors(path.delay, k).enumerate() {
            e[(2 * p, col)] = z;
            e[(2 * p + 1, col)] = z;
        }
    }
    e
}

/// `H = B * Gamma * E`, shape `M_R x K`.
pub fn build_channel_matrix<M: Manifold + ?Sized>(
    params: &PathParameterSet,
    manifold: &M,
    grid: FrequencyGrid,
) -> Result<CMatrix> {
    let b = build_steering_matrix(manifold, &params.directions())?;
    Ok(channel_from_steering(&b, params, grid))
}

/// `H` from a precomputed steering matrix.
pub fn channel_from_steering(b: &CMatrix, params: &PathParameterSet, grid: FrequencyGrid) -> CMatrix {
    let gamma = params.weights();
    // B * Gamma scales column q of B by gamma_q.
    let mut bg = b.clone();
    for (q, mut col) in bg.column_iter_mut().enumerate() {
        col *= gamma[q];
    }
    bg * build_exponential_matrix(params, grid)
}

/// Column-wise Kronecker product: column `q` is `kron(a[:, q], b[:, q])`.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "Khatri-Rao operands have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ra, rb) = (a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(ra * rb, a.ncols());
    for q in 0..a.ncols() {
        for i in 0..ra {
            let s = a[(i, q)];
            for j in 0..rb {
                out[(i * rb + j, q)] = s * b[(j, q)];
            }
        }
    }
    Ok(out)
}

/// `h = vec(H) = (E^T kr B) * gamma`, of length `M_R * K` (bin-major).
pub fn vec_channel<M: Manifold + ?Sized>(
    params: &PathParameterSet,
    manifold: &M,
    grid: FrequencyGrid,
) -> Result<CVector> {
    let b = build_steering_matrix(manifold, &params.directions())?;
    let e = build_exponential_matrix(params, grid);
    Ok(khatri_rao(&e.transpose(), &b)? * params.weights())
}

/// Signal-to-noise ratio in dB; `+inf` disables noise.
pub fn noise_variance_for(x: &CMatrix, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let n = (x.nrows() * x.ncols()) as f64;
    x.norm_squared() / (n * 10f64.powf(snr_db / 10.0))
}

/// `X = H * diag(s)`.
pub fn noiseless_data<M: Manifold + ?Sized>(
    params: &PathParameterSet,
    manifold: &M,
    grid: FrequencyGrid,
    signal: &TransmitterSignal,
) -> Result<CMatrix> {
    if signal.len() != grid.bins() {
        return Err(Error::Dimension(format!(
            "signal has {} samples, grid has {} bins",
            signal.len(),
            grid.bins()
        )));
    }
    let mut x = build_channel_matrix(params, manifold, grid)?;
    for (k, mut col) in x.column_iter_mut().enumerate() {
        col *= signal.samples()[k];
    }
    Ok(x)
}

/// `Y = H * diag(s) + N` with white circular Gaussian noise drawn from `seed`.
pub fn synthesize<M: Manifold + ?Sized>(
    params: &PathParameterSet,
    manifold: &M,
    grid: FrequencyGrid,
    signal: &TransmitterSignal,
    snr_db: f64,
    seed: u64,
) -> Result<Observation> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameters(format!("snr {snr_db} dB")));
    }
    let mut y = noiseless_data(params, manifold, grid, signal)?;
    let sigma2 = noise_variance_for(&y, snr_db);
    if sigma2 > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        add_white_noise(&mut y, sigma2, &mut rng);
    }
    Observation::new(y, sigma2)
}

/// Adds i.i.d. circular complex Gaussian noise of variance `sigma2`,
/// column by column.
pub fn add_white_noise<R: Rng>(y: &mut CMatrix, sigma2: f64, rng: &mut R) {
    let scale = (sigma2 / 2.0).sqrt();
    for c in y.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *c += Complex64::new(re * scale, im * scale);
    }
}
