use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{phi_posterior, Posterior, PosteriorSampleSet, PriorSpec};
use crate::covariance::cross_correlation;
use crate::dataset::{Point, SpatialDataset};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::ordinary::{clamp_variance_factor, FitOptions};
use crate::rng;
use crate::stats::quantile_sorted;

/// Empirical predictive law from `M` Monte Carlo draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    mean: f64,
    variance: f64,
    sorted: Vec<f64>,
}

impl PredictiveDistribution {
    pub fn from_draws(mut draws: Vec<f64>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Config("predictive distribution needs >= 1 draw".into()));
        }
        if draws.iter().any(|d| !d.is_finite()) {
            return Err(Error::Fit("non-finite predictive draw".into()));
        }
        let m = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / m;
        let variance = if draws.len() > 1 {
            draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        draws.sort_by(f64::total_cmp);
        Ok(Self {
            mean,
            variance,
            sorted: draws,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Empirical variance with divisor `M − 1`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn draws(&self) -> &[f64] {
        &self.sorted
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.sorted, q)
    }
}

/// Per (atom, target) coefficients: a draw at triple `(β, σ²)` is
/// `N(c0 + c1·β, σ²·vf)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DrawCoef {
    pub c0: f64,
    pub c1: f64,
    pub vf: f64,
}

/// Draws one predictive sample per posterior triple for each target.
///
/// `coefs(g, t)` gives the conditional coefficients of atom `g` at target `t`.
pub(crate) fn draw_predictive(
    samples: &PosteriorSampleSet,
    coefs: &[Vec<DrawCoef>],
    n_targets: usize,
    seed: u64,
) -> Result<Vec<PredictiveDistribution>> {
    (0..n_targets)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, &[rng::label("predictive"), t as u64]);
            let draws = samples
                .triples
                .iter()
                .zip(&samples.atom_index)
                .map(|(tr, &g)| {
                    let c = coefs[g][t];
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    c.c0 + c.c1 * tr.beta + (tr.variance * c.vf).sqrt() * eps
                })
                .collect();
            PredictiveDistribution::from_draws(draws)
        })
        .collect()
}

fn used_atoms(samples: &PosteriorSampleSet, n_atoms: usize) -> Vec<bool> {
    let mut used = vec![false; n_atoms];
    for &g in &samples.atom_index {
        used[g] = true;
    }
    used
}

impl Posterior {
    /// Predictive draws at `targets` from the known-parameter conditional of each triple:
    /// mean `β + rᵀR⁻¹(z − β1)`, variance `σ²(1 − rᵀR⁻¹r)`.
    pub fn predict(
        &self,
        samples: &PosteriorSampleSet,
        targets: &[Point],
        seed: u64,
    ) -> Result<Vec<PredictiveDistribution>> {
        self.predict_with(samples, targets, seed, false)
    }

    /// As [`Posterior::predict`], for a new noisy observation: the nugget is added to the variance.
    pub fn predict_observations(
        &self,
        samples: &PosteriorSampleSet,
        targets: &[Point],
        seed: u64,
    ) -> Result<Vec<PredictiveDistribution>> {
        self.predict_with(samples, targets, seed, true)
    }

    fn predict_with(
        &self,
        samples: &PosteriorSampleSet,
        targets: &[Point],
        seed: u64,
        observation: bool,
    ) -> Result<Vec<PredictiveDistribution>> {
        let used = used_atoms(samples, self.atoms.len());
        let positions = self.dataset.positions();
        let coefs: Vec<Vec<DrawCoef>> = self
            .atoms
            .par_iter()
            .zip(used.par_iter())
            .map(|(atom, &used)| -> Result<Vec<DrawCoef>> {
                if !used {
                    return Ok(Vec::new());
                }
                let kernel = atom.system.kernel();
                let extra = if observation { kernel.nugget_ratio } else { 0.0 };
                targets
                    .iter()
                    .map(|t| {
                        let r = cross_correlation(kernel, positions, t);
                        let vf = clamp_variance_factor(1.0 - atom.system.quad_form(&r))? + extra;
                        Ok(DrawCoef {
                            c0: dot(&r, &atom.gls.r_inv_z),
                            c1: 1.0 - dot(&r, &atom.gls.r_inv_one),
                            vf,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        draw_predictive(samples, &coefs, targets.len(), seed)
    }
}

/// Posterior, `M` triples and the predictive law at every target.
pub fn predict_bayes(
    ds: &SpatialDataset,
    opts: FitOptions,
    prior: &PriorSpec,
    targets: &[Point],
    draws: usize,
    seed: u64,
) -> Result<Vec<PredictiveDistribution>> {
    let post = phi_posterior(ds, opts, prior)?;
    let samples = post.sample(draws, seed)?;
    post.predict(&samples, targets, seed)
}
