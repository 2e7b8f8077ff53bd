//! Starting points for the local search.

use rand::Rng;
use rand_distr::StandardNormal;

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::antenna::{build_steering_matrix, Direction, Manifold};
use crate::channel_model::{Observation, Path, PathParameterSet};
use crate::cost_ccr::{ccr_evaluate, ccr_matrices, solve_gamma_gram, CcrMode, DstBlocks};
use crate::estimator::{estimate, EstimatorKind, EstimatorOptions};
use crate::optimizer::LmOptions;
use crate::{CMatrix, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// Truth plus zero-mean Gaussian perturbations.
    PerturbedTruth {
        aoa_sigma_deg: f64,
        eoa_sigma_deg: f64,
        /// Normalized delay std. The delay main lobe is only about `1 / K`
        /// wide, so values much above `0.1 / K` leave the basin of the truth.
        delay_sigma: f64,
        /// Perturbation std of each weight component relative to the path's
        /// weight norm.
        weight_sigma: f64,
    },
    /// Greedy path-by-path grid search on the CCR cost, refined after every
    /// added path. Needs no ground truth.
    CoarseGrid {
        azimuth_step_deg: f64,
        elevation_step_deg: f64,
        /// Delay step in normalized units; `None` means half a bin (`0.5 / K`).
        delay_step: Option<f64>,
    },
}

impl Default for InitMode {
    fn default() -> Self {
        InitMode::PerturbedTruth {
            aoa_sigma_deg: 5.0,
            eoa_sigma_deg: 5.0,
            delay_sigma: 0.001,
            weight_sigma: 0.1,
        }
    }
}

impl InitMode {
    pub fn coarse_grid_default() -> Self {
        InitMode::CoarseGrid {
            azimuth_step_deg: 10.0,
            elevation_step_deg: 15.0,
            delay_step: None,
        }
    }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Perturbs every parameter of `truth`. The result keeps the path order; call
/// sites feed canonical truth so path 0 stays the reference.
pub fn perturbed_truth<R: Rng>(
    truth: &PathParameterSet,
    aoa_sigma_deg: f64,
    eoa_sigma_deg: f64,
    delay_sigma: f64,
    weight_sigma: f64,
    rng: &mut R,
) -> Result<PathParameterSet> {
    let mut out = truth.clone();
    for path in out.paths_mut() {
        let az = path.direction.azimuth() + aoa_sigma_deg.to_radians() * gauss(rng);
        let el = path.direction.elevation() + eoa_sigma_deg.to_radians() * gauss(rng);
        path.direction = Direction::folded(az, el)?;
        path.delay += delay_sigma * gauss(rng);
        let scale = weight_sigma * path.power().sqrt() / std::f64::consts::SQRT_2;
        path.weight_h += Complex64::new(gauss(rng), gauss(rng)) * scale;
        path.weight_v += Complex64::new(gauss(rng), gauss(rng)) * scale;
    }
    Ok(out)
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| lo + step * i as f64).collect();
    if v.last().is_some_and(|x| (hi - x).abs() < 1e-12) {
        v.pop();
    }
    v
}

/// Costs of adding one path in a fixed direction to `found`, at every delay
/// `n / lanes`.
///
/// The candidate's delay only multiplies its bin-`k` rows of `A` and `M` by
/// `exp(-j 2 pi k tau)`, so the cross blocks of the Gram matrices `A^H A` and
/// `M^H M` are DFTs over bins and all delays come out of one FFT each.
struct CandidateScan<'a> {
    obs: &'a Observation,
    dst: DstBlocks<'a>,
    lanes: usize,
    fft: Arc<dyn Fft<f64>>,
    found: Option<FoundBlocks>,
}

struct FoundBlocks {
    a: CMatrix,
    m: CMatrix,
    ata: CMatrix,
    mtm: CMatrix,
}

impl<'a> CandidateScan<'a> {
    fn new<M: Manifold + ?Sized>(
        obs: &'a Observation,
        manifold: &M,
        found: &[Path],
        lanes: usize,
    ) -> Result<Self> {
        let found = if found.is_empty() {
            None
        } else {
            let (a, m) = ccr_matrices(obs, &PathParameterSet::new(found.to_vec())?, manifold)?;
            Some(FoundBlocks {
                ata: a.adjoint() * &a,
                mtm: m.adjoint() * &m,
                a,
                m,
            })
        };
        Ok(Self {
            obs,
            dst: DstBlocks::new(obs),
            lanes,
            fft: FftPlanner::new().plan_fft_forward(lanes),
            found,
        })
    }

    fn costs<M: Manifold + ?Sized>(&self, manifold: &M, direction: Direction) -> Result<Vec<Option<f64>>> {
        let b = build_steering_matrix(manifold, &[direction])?;
        let (ports, bins) = (self.obs.ports(), self.obs.bins());
        let q = self.dst.rows_per_bin();
        let zero = Complex64::new(0.0, 0.0);

        // Delay-free A rows of the candidate, bin-major.
        let mut a0 = CMatrix::zeros(q * bins, 2);
        let mut out = vec![zero; q];
        for c in 0..2 {
            let col: Vec<Complex64> = b.column(c).iter().copied().collect();
            for k in 0..bins {
                self.dst.apply_bin(k, &col, &mut out);
                for (row, v) in out.iter().enumerate() {
                    a0[(k * q + row, c)] = *v;
                }
            }
        }
        let ata_cc = a0.adjoint() * &a0;
        let mtm_cc = b.adjoint() * &b * Complex64::new(bins as f64, 0.0);

        let Some(found) = &self.found else {
            return Ok(vec![solve_gamma_gram(&ata_cc, &mtm_cc).ok().map(|(_, c)| c)]);
        };
        let nf = found.a.ncols();
        let n = nf + 2;
        // cross[(f, c)][lane] for both Gram matrices.
        let mut cross_a = vec![vec![zero; self.lanes]; nf * 2];
        let mut cross_m = vec![vec![zero; self.lanes]; nf * 2];
        for f in 0..nf {
            for c in 0..2 {
                let (sa, sm) = (&mut cross_a[f * 2 + c], &mut cross_m[f * 2 + c]);
                for k in 0..bins {
                    let lane = k % self.lanes;
                    for row in 0..q {
                        sa[lane] += found.a[(k * q + row, f)].conj() * a0[(k * q + row, c)];
                    }
                    for port in 0..ports {
                        sm[lane] += found.m[(k * ports + port, f)].conj() * b[(port, c)];
                    }
                }
                self.fft.process(sa);
                self.fft.process(sm);
            }
        }

        let mut ata = CMatrix::zeros(n, n);
        let mut mtm = CMatrix::zeros(n, n);
        ata.view_mut((0, 0), (nf, nf)).copy_from(&found.ata);
        mtm.view_mut((0, 0), (nf, nf)).copy_from(&found.mtm);
        ata.view_mut((nf, nf), (2, 2)).copy_from(&ata_cc);
        mtm.view_mut((nf, nf), (2, 2)).copy_from(&mtm_cc);
        Ok((0..self.lanes)
            .map(|lane| {
                for f in 0..nf {
                    for c in 0..2 {
                        let (ga, gm) = (cross_a[f * 2 + c][lane], cross_m[f * 2 + c][lane]);
                        ata[(f, nf + c)] = ga;
                        ata[(nf + c, f)] = ga.conj();
                        mtm[(f, nf + c)] = gm;
                        mtm[(nf + c, f)] = gm.conj();
                    }
                }
                solve_gamma_gram(&ata, &mtm).ok().map(|(_, c)| c)
            })
            .collect())
    }
}

/// Blind start: adds one path at a time, choosing the grid cell with the
/// lowest two-step CCR cost given the paths found so far, then refines all
/// of them. Elevations are searched in `[0, 90]` degrees; the delay grid has
/// `round(1 / delay_step)` nodes.
pub fn coarse_grid<M: Manifold + ?Sized>(
    obs: &Observation,
    manifold: &M,
    paths: usize,
    azimuth_step_deg: f64,
    elevation_step_deg: f64,
    delay_step: Option<f64>,
) -> Result<PathParameterSet> {
    if paths == 0 {
        return Err(Error::InvalidParameters("at least one path is required".into()));
    }
    obs.grid().check_supports(paths)?;
    let delay_step = delay_step.unwrap_or(0.5 / obs.bins() as f64);
    for (name, v) in [
        ("azimuth_step_deg", azimuth_step_deg),
        ("elevation_step_deg", elevation_step_deg),
        ("delay_step", delay_step),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(name, "grid step must be positive"));
        }
    }
    if delay_step > 1.0 {
        return Err(Error::config("delay_step", "must not exceed the unit delay window"));
    }
    let lanes = (1.0 / delay_step).round().max(1.0) as usize;
    // Offset azimuths by half a step so no node lands on a symmetry axis.
    let az_grid: Vec<f64> = axis(-180.0, 180.0, azimuth_step_deg)
        .into_iter()
        .map(|a| (a + 0.5 * azimuth_step_deg).to_radians())
        .collect();
    // Arrays whose phase centers share one horizontal plane cannot tell an
    // elevation from its mirror image, so only the upper hemisphere is searched.
    let el_grid: Vec<f64> = axis(0.5 * elevation_step_deg, 90.0, elevation_step_deg)
        .into_iter()
        .map(f64::to_radians)
        .collect();

    let unit = Complex64::new(1.0, 0.0);
    let mut found: Vec<Path> = Vec::with_capacity(paths);
    let refine = EstimatorOptions {
        lm: LmOptions {
            max_iterations: 50,
            ..LmOptions::default()
        },
        ccr_mode: CcrMode::TwoStep,
    };
    for p in 0..paths {
        let scan = CandidateScan::new(obs, manifold, &found, lanes)?;
        let mut best: Option<(f64, Path)> = None;
        for &az in &az_grid {
            for &el in &el_grid {
                let direction = Direction::new(az, el)?;
                // Degenerate cells (a vanishing polarization, a repeated
                // path) have no cost and are skipped.
                for (lane, cost) in scan.costs(manifold, direction)?.into_iter().enumerate() {
                    let Some(cost) = cost else { continue };
                    if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                        let candidate = Path {
                            direction,
                            weight_h: unit,
                            weight_v: unit,
                            delay: lane as f64 / lanes as f64,
                        };
                        best = Some((cost, candidate));
                    }
                }
            }
        }
        let (_, path) = best.ok_or_else(|| {
            Error::InvalidParameters(format!("no admissible grid cell for path {}", p + 1))
        })?;
        found.push(path);
        let set = PathParameterSet::new(found.clone())?;
        if let Ok(est) = estimate(obs, manifold, &set, EstimatorKind::Ccr, &refine) {
            found = est.params.paths().to_vec();
        }
    }
    let set = PathParameterSet::new(found)?;
    let eval = ccr_evaluate(obs, &set, manifold, None)?;
    let mut out = set;
    out.set_weights(&eval.gamma)?;
    Ok(out)
}
