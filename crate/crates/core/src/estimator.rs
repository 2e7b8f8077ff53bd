//! Runs one cost function from a starting point to a local minimum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::antenna::Manifold;
use crate::channel_model::{Observation, PathParameterSet};
use crate::cost_ccr::{CcrMode, CcrProblem};
use crate::cost_cml::CmlProblem;
use crate::optimizer::{minimize, LmOptions, LmResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Cml,
    Ccr,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Cml => "cml",
            EstimatorKind::Ccr => "ccr",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cml" => Ok(EstimatorKind::Cml),
            "ccr" => Ok(EstimatorKind::Ccr),
            other => Err(Error::config("estimators", format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorOptions {
    pub lm: LmOptions,
    pub ccr_mode: CcrMode,
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub kind: EstimatorKind,
    /// Estimated paths in the order of the starting point, path 0 at delay 0.
    pub params: PathParameterSet,
    /// Final value of the minimized cost.
    pub cost: f64,
    pub lm: LmResult,
}

pub fn estimate<M: Manifold + ?Sized>(
    obs: &Observation,
    manifold: &M,
    init: &PathParameterSet,
    kind: EstimatorKind,
    opts: &EstimatorOptions,
) -> Result<Estimate> {
    obs.grid().check_supports(init.len())?;
    match kind {
        EstimatorKind::Cml => {
            let problem = CmlProblem::new(obs, manifold, init);
            let x0 = problem.layout.encode(problem.layout.template());
            let lm = minimize(&problem, x0, &opts.lm)?;
            let params = problem.layout.decode(&lm.x)?;
            Ok(Estimate {
                kind,
                params,
                cost: lm.cost,
                lm,
            })
        }
        EstimatorKind::Ccr => {
            let problem = CcrProblem::new(obs, manifold, init, opts.ccr_mode);
            let x0 = problem.layout.encode(problem.layout.template());
            let lm = minimize(&problem, x0, &opts.lm)?;
            let (eval, params) = problem.evaluate(&lm.x)?;
            Ok(Estimate {
                kind,
                params,
                cost: eval.cost,
                lm,
            })
        }
    }
}
