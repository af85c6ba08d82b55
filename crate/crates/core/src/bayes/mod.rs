//! Bayesian kriging by exact composition sampling over a discrete range support.
//!
//! Given the range `φ`, the priors in [`PriorKind`] are conjugate for the
//! Gaussian likelihood, so `(β, σ²) | φ, z` is normal/scaled-inverse-χ² and
//! the marginal posterior of `φ` on its support is available in closed form.
//! Draws are produced as `φ`, then `σ² | φ`, then `β | σ², φ`, and each
//! predictive draw comes from the simple-kriging conditional at that triple.

mod density;
mod inv_chi2;
pub(crate) mod predictive;
mod prior;

pub use density::{posterior_phi_density, PhiDensity, DENSITY_GRID_POINTS};
pub use inv_chi2::ScaledInvChi2;
pub use predictive::{predict_bayes, PredictiveDistribution};
pub use prior::{
    make_appendix_prior, PhiGrid, PhiPrior, PriorKind, PriorSpec, DEFAULT_PHI_ATOMS,
};

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{CorrelationSystem, Family, Kernel};
use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::ordinary::{FitOptions, GlsFit, ParameterTriple};
use crate::rng;

/// Default number of Monte Carlo draws.
pub const DEFAULT_DRAWS: usize = 1000;

/// Law of `(β, σ²)` given one range atom and the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conditional {
    /// `σ² ~ Scaled-Inv-χ²(scale, df)`, `β | σ² ~ N(mean, σ²/kappa)`.
    NormalInvChi2 {
        mean: f64,
        kappa: f64,
        df: f64,
        scale: f64,
    },
    Fixed { beta: f64, variance: f64 },
}

impl Conditional {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        match *self {
            Conditional::NormalInvChi2 {
                mean,
                kappa,
                df,
                scale,
            } => {
                let variance = ScaledInvChi2::new(scale, df)?.sample(rng);
                let z: f64 = StandardNormal.sample(rng);
                Ok((mean + (variance / kappa).sqrt() * z, variance))
            }
            Conditional::Fixed { beta, variance } => Ok((beta, variance)),
        }
    }

    /// Marginal posterior modes of `β` and `σ²` under this conditional.
    pub fn modes(&self) -> (f64, f64) {
        match *self {
            Conditional::NormalInvChi2 {
                mean, df, scale, ..
            } => (mean, df * scale / (df + 2.0)),
            Conditional::Fixed { beta, variance } => (beta, variance),
        }
    }

    /// Posterior means of `β` and `σ²` (the latter `None` when `df ≤ 2`).
    pub fn means(&self) -> (f64, Option<f64>) {
        match *self {
            Conditional::NormalInvChi2 {
                mean, df, scale, ..
            } => (mean, (df > 2.0).then(|| df * scale / (df - 2.0))),
            Conditional::Fixed { beta, variance } => (beta, Some(variance)),
        }
    }
}

/// One atom of the range support with its factorized system and posterior pieces.
#[derive(Debug, Clone)]
pub struct PhiAtom {
    pub phi: f64,
    pub log_marginal: f64,
    pub conditional: Conditional,
    pub system: CorrelationSystem,
    pub gls: GlsFit,
}

/// Joint posterior of `(β, σ², φ)` for one dataset.
#[derive(Debug, Clone)]
pub struct Posterior {
    family: Family,
    nugget_ratio: f64,
    prior: PriorSpec,
    atoms: Vec<PhiAtom>,
    weights: Vec<f64>,
    dataset: SpatialDataset,
}

const MIN_POINTS: usize = 3;

fn atom_posterior(kind: &PriorKind, gls: &GlsFit, n: usize) -> (f64, Conditional) {
    let nf = n as f64;
    let s = gls.one_r_inv_one;
    match *kind {
        PriorKind::Vague => {
            let df = nf - 1.0;
            let log_m = -0.5 * gls.log_det - 0.5 * s.ln() - 0.5 * df * gls.rss.ln();
            let cond = Conditional::NormalInvChi2 {
                mean: gls.beta_hat,
                kappa: s,
                df,
                scale: gls.rss / df,
            };
            (log_m, cond)
        }
        PriorKind::NormalScaledInvChi2 {
            beta_center,
            variance_center,
            variance_df,
            beta_scaling,
        } => {
            let kappa = beta_scaling + s;
            let mean = (beta_scaling * beta_center + s * gls.beta_hat) / kappa;
            let df = variance_df + nf;
            let spread = variance_df * variance_center
                + gls.rss
                + beta_scaling * s / kappa * (gls.beta_hat - beta_center).powi(2);
            let log_m = -0.5 * gls.log_det - 0.5 * kappa.ln() - 0.5 * df * spread.ln();
            let cond = Conditional::NormalInvChi2 {
                mean,
                kappa,
                df,
                scale: spread / df,
            };
            (log_m, cond)
        }
        PriorKind::Known { beta, variance } => {
            // (z − β1)ᵀR⁻¹(z − β1) = rss + s(β − β̂)²
            let q = gls.rss + s * (beta - gls.beta_hat).powi(2);
            let log_m = -0.5 * gls.log_det - 0.5 * q / variance;
            (log_m, Conditional::Fixed { beta, variance })
        }
    }
}

/// Discrete posterior over the range support, with per-atom conditionals.
pub fn phi_posterior(ds: &SpatialDataset, opts: FitOptions, prior: &PriorSpec) -> Result<Posterior> {
    let n = ds.len();
    if n < MIN_POINTS {
        return Err(Error::Fit(format!(
            "Bayesian kriging needs at least {MIN_POINTS} points, got {n}"
        )));
    }
    prior.kind.validate()?;
    if !matches!(prior.kind, PriorKind::Known { .. }) {
        let first = ds.values()[0];
        if ds.values().iter().all(|v| *v == first) {
            return Err(Error::DegenerateData("all observations are equal".into()));
        }
    }
    let atoms: Vec<PhiAtom> = prior
        .phi
        .support()
        .par_iter()
        .zip(prior.phi.weights().par_iter())
        .map(|(&phi, &w)| -> Result<PhiAtom> {
            let kernel = Kernel::new(opts.family, phi, opts.nugget_ratio)?;
            let system = CorrelationSystem::assemble(kernel, ds.positions())?;
            let gls = GlsFit::compute(&system, ds.values());
            let (log_m, conditional) = atom_posterior(&prior.kind, &gls, n);
            let log_marginal = if w > 0.0 { w.ln() + log_m } else { f64::NEG_INFINITY };
            Ok(PhiAtom {
                phi,
                log_marginal,
                conditional,
                system,
                gls,
            })
        })
        .collect::<Result<_>>()?;

    let max = atoms
        .iter()
        .map(|a| a.log_marginal)
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::PosteriorDegenerate(
            "no range atom has a finite posterior weight".into(),
        ));
    }
    let raw: Vec<f64> = atoms
        .iter()
        .map(|a| {
            if a.log_marginal.is_finite() {
                (a.log_marginal - max).exp()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / total).collect();
    Ok(Posterior {
        family: opts.family,
        nugget_ratio: opts.nugget_ratio,
        prior: prior.clone(),
        atoms,
        weights,
        dataset: ds.clone(),
    })
}

/// `M` posterior triples with the atom each was drawn from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSampleSet {
    pub triples: Vec<ParameterTriple>,
    pub atom_index: Vec<usize>,
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PosteriorSampleSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn phi_draws(&self) -> Vec<f64> {
        self.triples.iter().map(|t| t.range).collect()
    }

    /// Componentwise means of the drawn triples.
    pub fn mean_triple(&self) -> ParameterTriple {
        let m = self.len() as f64;
        let (b, v, r) = self.triples.iter().fold((0.0, 0.0, 0.0), |acc, t| {
            (acc.0 + t.beta, acc.1 + t.variance, acc.2 + t.range)
        });
        ParameterTriple {
            beta: b / m,
            variance: v / m,
            range: r / m,
        }
    }
}

/// Summary of posterior point estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: ParameterTriple,
    pub mode: ParameterTriple,
}

impl Posterior {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn nugget_ratio(&self) -> f64 {
        self.nugget_ratio
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn support(&self) -> &[f64] {
        self.prior.phi.support()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> &[PhiAtom] {
        &self.atoms
    }

    pub fn dataset(&self) -> &SpatialDataset {
        &self.dataset
    }

    pub fn modal_atom(&self) -> usize {
        self.weights
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &w)| if w > best.1 { (i, w) } else { best })
            .0
    }

    /// Composition sampling of `M` triples, deterministic in `seed`.
    pub fn sample(&self, draws: usize, seed: u64) -> Result<PosteriorSampleSet> {
        if draws == 0 {
            return Err(Error::Config("number of draws must be >= 1".into()));
        }
        let picker = WeightedIndex::new(&self.weights)
            .map_err(|e| Error::PosteriorDegenerate(e.to_string()))?;
        let mut rng = rng::stream(seed, &[rng::label("posterior")]);
        let mut triples = Vec::with_capacity(draws);
        let mut atom_index = Vec::with_capacity(draws);
        for _ in 0..draws {
            let g = picker.sample(&mut rng);
            let atom = &self.atoms[g];
            let (beta, variance) = atom.conditional.sample(&mut rng)?;
            triples.push(ParameterTriple {
                beta,
                variance,
                range: atom.phi,
            });
            atom_index.push(g);
        }
        Ok(PosteriorSampleSet {
            triples,
            atom_index,
            support: self.support().to_vec(),
            weights: self.weights.clone(),
        })
    }

    /// `E[β | z] = Σ_g w_g E[β | φ_g, z]`.
    pub fn beta_mean(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a.conditional.means().0)
            .sum()
    }

    /// Mean from draws; mode as the modal range atom with the conditional
    /// modes of `β` and `σ²` at that atom.
    pub fn summarize(&self, samples: &PosteriorSampleSet) -> PosteriorSummary {
        let g = self.modal_atom();
        let (beta, variance) = self.atoms[g].conditional.modes();
        PosteriorSummary {
            mean: samples.mean_triple(),
            mode: ParameterTriple {
                beta,
                variance,
                range: self.atoms[g].phi,
            },
        }
    }
}

/// Convenience: posterior then `M` draws.
pub fn sample_posterior(
    ds: &SpatialDataset,
    opts: FitOptions,
    prior: &PriorSpec,
    draws: usize,
    seed: u64,
) -> Result<PosteriorSampleSet> {
    phi_posterior(ds, opts, prior)?.sample(draws, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSpec;
    use crate::dataset::{make_grid, Rect};
    use crate::simulate::simulate_gp;

    fn data(k: usize, seed: u64) -> SpatialDataset {
        let spec = CovarianceSpec::new(Family::EXPONENTIAL, 4.5, 0.1, 0.0).unwrap();
        simulate_gp(&spec, 0.5, &make_grid(Rect::square(0.0, 10.0), k).unwrap(), seed).unwrap()
    }

    #[test]
    fn single_atom_support_has_unit_weight() {
        let ds = data(4, 1);
        let prior = PriorSpec::vague(PhiPrior::single(3.0).unwrap());
        let post = phi_posterior(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0), &prior).unwrap();
        assert_eq!(post.weights(), &[1.0]);
    }

    #[test]
    fn one_draw_is_valid() {
        let ds = data(4, 2);
        let prior = PriorSpec::vague(PhiPrior::default_for(&ds).unwrap());
        let s = sample_posterior(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0), &prior, 1, 5)
            .unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.triples[0].variance > 0.0);
        assert!(prior.phi.support().contains(&s.triples[0].range));
    }

    #[test]
    fn sampling_is_deterministic() {
        let ds = data(4, 3);
        let prior = PriorSpec::vague(PhiPrior::default_for(&ds).unwrap());
        let post = phi_posterior(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0), &prior).unwrap();
        let a = post.sample(50, 9).unwrap();
        let b = post.sample(50, 9).unwrap();
        assert_eq!(a.triples, b.triples);
    }

    #[test]
    fn constant_data_rejected() {
        let pts = make_grid(Rect::square(0.0, 1.0), 2).unwrap();
        let ds = SpatialDataset::new(pts, vec![1.0; 4]).unwrap();
        let prior = PriorSpec::vague(PhiPrior::default_for(&ds).unwrap());
        assert!(phi_posterior(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0), &prior).is_err());
    }
}
