//! Seeded, parallel reproduction protocols: GP benchmark, covariance selection,
//! function benchmark, resampling, prior sensitivity, estimation and φ-posterior studies.

mod suites;
mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes::{PhiGrid, DEFAULT_DRAWS};
use crate::covariance::Family;
use crate::error::{Error, Result};
use crate::validation::{regular_levels, LooMode, Method, DEFAULT_LEVEL_COUNT};

pub use suites::{
    run_covariance_selection, run_estimation_study, run_function_benchmark, run_gp_benchmark,
    run_posterior_phi_study, run_prior_sensitivity, run_resample_benchmark, PhiCurve, PhiStudy,
    PriorSensitivity, GP_BETA, GP_RANGE, GP_VARIANCE, PARENT_GRID_SIDE, REFERENCE_FIT_POINTS,
};
pub use table::{CriterionRow, CriterionTable, CurveRecord, SummaryRow, FAILURE_PREFIX};

/// Experiment protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Gp,
    Covsel,
    Function,
    Resample,
    PriorSens,
    Estimation,
    PhiPosterior,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Gp,
        Suite::Covsel,
        Suite::Function,
        Suite::Resample,
        Suite::PriorSens,
        Suite::Estimation,
        Suite::PhiPosterior,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Suite::Gp => "gp",
            Suite::Covsel => "covsel",
            Suite::Function => "function",
            Suite::Resample => "resample",
            Suite::PriorSens => "prior-sens",
            Suite::Estimation => "estimation",
            Suite::PhiPosterior => "phi-posterior",
        }
    }

    /// Sizes used when none are given.
    pub fn default_sizes(self) -> Vec<usize> {
        match self {
            Suite::Gp | Suite::Estimation => (4..=9).map(|k| k * k).collect(),
            Suite::Covsel => vec![144],
            Suite::Function => (20..=150).step_by(10).collect(),
            Suite::Resample => (20..=70).step_by(10).collect(),
            Suite::PriorSens => vec![20, 50],
            Suite::PhiPosterior => vec![25, 50, 100],
        }
    }

    /// Covariance families fitted when none are given.
    pub fn default_families(self) -> Vec<Family> {
        match self {
            Suite::Covsel => Family::ALL.to_vec(),
            Suite::Function => vec![Family::Gaussian],
            _ => vec![Family::EXPONENTIAL],
        }
    }

    pub fn default_methods(self) -> Vec<Method> {
        match self {
            Suite::PriorSens | Suite::PhiPosterior => vec![Method::Bayesian],
            _ => vec![Method::Ordinary, Method::Bayesian],
        }
    }

    /// Deterministic or single-dataset suites run once at every scale.
    fn single_replicate(self) -> bool {
        matches!(self, Suite::Covsel | Suite::PhiPosterior)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

/// Replicate count and posterior sample size presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// R = 100, M = 1000.
    Paper,
    /// R = 10, M = 200.
    Smoke,
    Custom { replicates: usize, draws: usize },
}

impl Scale {
    pub fn replicates(self) -> usize {
        match self {
            Scale::Paper => 100,
            Scale::Smoke => 10,
            Scale::Custom { replicates, .. } => replicates,
        }
    }

    pub fn draws(self) -> usize {
        match self {
            Scale::Paper => DEFAULT_DRAWS,
            Scale::Smoke => 200,
            Scale::Custom { draws, .. } => draws,
        }
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "smoke" => Ok(Scale::Smoke),
            _ => Err(Error::Config(format!("unknown scale {s:?} (expected paper or smoke)"))),
        }
    }
}

/// Settings shared by all suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub families: Vec<Family>,
    pub draws: usize,
    pub phi_grid: PhiGrid,
    pub loo_mode: LooMode,
    pub levels: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(suite: Suite, scale: Scale) -> Self {
        Self {
            suite,
            sizes: suite.default_sizes(),
            replicates: if suite.single_replicate() { 1 } else { scale.replicates() },
            seed: 0,
            methods: suite.default_methods(),
            families: suite.default_families(),
            draws: scale.draws(),
            phi_grid: PhiGrid::default(),
            loo_mode: LooMode::Fixed,
            levels: regular_levels(DEFAULT_LEVEL_COUNT),
        }
    }

    pub fn with_sizes(mut self, sizes: Vec<usize>) -> Self {
        self.sizes = sizes;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_draws(mut self, draws: usize) -> Self {
        self.draws = draws;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicate count must be at least 1".into()));
        }
        if self.draws == 0 {
            return Err(Error::Config("posterior sample size must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.families.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("sizes, families and methods must be non-empty".into()));
        }
        if self.levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Config("α levels must lie in (0, 1)".into()));
        }
        let grid_suite = matches!(self.suite, Suite::Gp | Suite::Estimation | Suite::Covsel);
        for &n in &self.sizes {
            if grid_suite && square_side(n).is_none() {
                return Err(Error::Config(format!("size {n} is not a square k² with k ≥ 2")));
            }
            if n < 4 {
                return Err(Error::Config(format!("size {n} is below the leave-one-out minimum of 4")));
            }
        }
        Ok(())
    }
}

/// `k` with `k² = n`, `k ≥ 2`.
pub fn square_side(n: usize) -> Option<usize> {
    let k = (n as f64).sqrt().round() as usize;
    (k >= 2 && k * k == n).then_some(k)
}
