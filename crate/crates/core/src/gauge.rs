//! Gauge-reduced real parameter vectors for the optimizer.
//!
//! Both cost functions are blind to a common delay shift and (CML) to a common
//! complex weight factor, so the Jacobian w.r.t. the raw parameters is rank
//! deficient. The layout below freezes the delay of path 0 and, when weights
//! are optimized, the complex weight component of path 0 with the largest
//! magnitude at initialization.
//!
//! Vector order: `[az_0..az_P, el_0..el_P, tau_1..tau_P, (re, im) of every
//! weight component except the frozen one]`.

use nalgebra::DVector;

use crate::antenna::{fold_elevation, wrap_angle, Direction};
use crate::channel_model::PathParameterSet;
use crate::{Complex64, Result};

pub const ANGLE_STEP: f64 = 1e-6;
pub const LINEAR_STEP: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct Parameterization {
    template: PathParameterSet,
    include_weights: bool,
    frozen_weight: usize,
}

impl Parameterization {
    /// Builds the layout around `init`. Delays are shifted so path 0 sits at
    /// zero; paths are not reordered.
    pub fn new(init: &PathParameterSet, include_weights: bool) -> Self {
        let mut template = init.clone();
        let d0 = template.paths()[0].delay;
        template.shift_delays(-d0);
        template.paths_mut()[0].delay = 0.0;
        let p0 = template.paths()[0];
        let frozen_weight = if p0.weight_v.norm() > p0.weight_h.norm() { 1 } else { 0 };
        Self {
            template,
            include_weights,
            frozen_weight,
        }
    }

    pub fn path_count(&self) -> usize {
        self.template.len()
    }

    pub fn includes_weights(&self) -> bool {
        self.include_weights
    }

    /// Index (into the stacked weight vector) of the frozen component.
    pub fn frozen_weight(&self) -> Option<usize> {
        self.include_weights.then_some(self.frozen_weight)
    }

    pub fn template(&self) -> &PathParameterSet {
        &self.template
    }

    pub fn dim(&self) -> usize {
        let p = self.path_count();
        let base = 3 * p - 1;
        if self.include_weights {
            base + 2 * (2 * p - 1)
        } else {
            base
        }
    }

    /// Indices holding azimuths and elevations respectively.
    pub fn angle_ranges(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let p = self.path_count();
        (0..p, p..2 * p)
    }

    pub fn encode(&self, params: &PathParameterSet) -> DVector<f64> {
        let p = self.path_count();
        let mut x = Vec::with_capacity(self.dim());
        x.extend(params.paths().iter().map(|q| q.direction.azimuth()));
        x.extend(params.paths().iter().map(|q| q.direction.elevation()));
        let d0 = params.paths()[0].delay;
        x.extend(params.paths()[1..].iter().map(|q| q.delay - d0));
        if self.include_weights {
            let gamma = params.weights();
            for (i, g) in gamma.iter().enumerate() {
                if i != self.frozen_weight {
                    x.push(g.re);
                    x.push(g.im);
                }
            }
        }
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(params.len(), p);
        DVector::from_vec(x)
    }

    /// Inverse of [`Self::encode`]. Frozen entries come from the template;
    /// without weights in the vector the template weights are kept.
    pub fn decode(&self, x: &DVector<f64>) -> Result<PathParameterSet> {
        let p = self.path_count();
        let mut out = self.template.clone();
        let mut gamma = out.weights();
        if self.include_weights {
            let mut j = 3 * p - 1;
            for i in 0..2 * p {
                if i != self.frozen_weight {
                    gamma[i] = Complex64::new(x[j], x[j + 1]);
                    j += 2;
                }
            }
        }
        for (i, path) in out.paths_mut().iter_mut().enumerate() {
            path.direction = Direction::folded(x[i], x[p + i])?;
            path.delay = if i == 0 { 0.0 } else { x[2 * p + i - 1] };
        }
        out.set_weights(&gamma)?;
        Ok(out)
    }

    /// Wraps azimuths into `(-pi, pi]` and reflects elevations that left
    /// `[-pi/2, pi/2]` back across the pole.
    pub fn project(&self, x: &mut DVector<f64>) {
        let p = self.path_count();
        for i in 0..p {
            let (az, el) = fold_elevation(x[i], x[p + i]);
            x[i] = wrap_angle(az);
            x[p + i] = el;
        }
    }

    /// Central-difference step per coordinate.
    pub fn fd_steps(&self) -> DVector<f64> {
        let p = self.path_count();
        DVector::from_fn(self.dim(), |i, _| if i < 2 * p { ANGLE_STEP } else { LINEAR_STEP })
    }
}
