//! Leave-one-out cross-validation and the predictive-quality criteria:
//! Q², PVA, PIA, the α-CI coverage curve and MSEα.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{phi_posterior, PhiGrid, PredictiveDistribution, PriorKind, PriorSpec};
use crate::bayes::DEFAULT_DRAWS;
use crate::covariance::Family;
use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::ordinary::{clamp_variance_factor, fit_mle, gaussian_interval, FitOptions, OkModel, ParameterTriple,
};
use crate::rng;
use crate::stats::normal_quantile;

/// Lower and upper quantile orders used by PIA.
pub const PIA_LOWER: f64 = 0.31;
pub const PIA_UPPER: f64 = 0.69;
/// Default number of α levels (0.01, …, 0.99).
pub const DEFAULT_LEVEL_COUNT: usize = 99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ordinary,
    Bayesian,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Ordinary => "ordinary",
            Method::Bayesian => "bayesian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LooMode {
    /// Parameters (or posterior) from the full dataset; only the prediction system changes per fold.
    #[default]
    Fixed,
    /// Full refit on each `n − 1` subset.
    Reestimate,
}

/// Predictive law of a held-out observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeldOutLaw {
    Gaussian { mean: f64, sd: f64 },
    Empirical(PredictiveDistribution),
}

impl HeldOutLaw {
    pub fn quantile(&self, q: f64) -> f64 {
        match self {
            HeldOutLaw::Gaussian { mean, sd } => {
                if *sd == 0.0 {
                    *mean
                } else {
                    mean + sd * normal_quantile(q)
                }
            }
            HeldOutLaw::Empirical(d) => d.quantile(q),
        }
    }

    /// Central predictive interval (Gaussian) or credible interval (empirical) of level `alpha`.
    pub fn interval(&self, alpha: f64) -> Result<(f64, f64)> {
        match self {
            HeldOutLaw::Gaussian { mean, sd } => gaussian_interval(*mean, *sd, alpha),
            HeldOutLaw::Empirical(d) => {
                Ok((d.quantile(0.5 * (1.0 - alpha)), d.quantile(0.5 * (1.0 + alpha))))
            }
        }
    }
}

/// Held-out prediction at one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooRecord {
    pub index: usize,
    pub observed: f64,
    pub prediction: f64,
    pub variance: f64,
    pub law: HeldOutLaw,
}

impl LooRecord {
    pub fn gaussian(index: usize, observed: f64, mean: f64, variance: f64) -> Self {
        Self {
            index,
            observed,
            prediction: mean,
            variance,
            law: HeldOutLaw::Gaussian {
                mean,
                sd: variance.max(0.0).sqrt(),
            },
        }
    }

    pub fn empirical(index: usize, observed: f64, dist: PredictiveDistribution) -> Self {
        Self {
            index,
            observed,
            prediction: dist.mean(),
            variance: dist.variance(),
            law: HeldOutLaw::Empirical(dist),
        }
    }

    pub fn quantile(&self, q: f64) -> f64 {
        self.law.quantile(q)
    }

    pub fn squared_error(&self) -> f64 {
        (self.observed - self.prediction).powi(2)
    }
}

/// Settings for [`loo_records`] and [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub method: Method,
    pub family: Family,
    pub nugget_ratio: f64,
    pub loo_mode: LooMode,
    pub draws: usize,
    pub phi_grid: PhiGrid,
    pub prior: PriorKind,
    pub levels: Vec<f64>,
    pub seed: u64,
}

impl ValidationConfig {
    /// Defaults: fixed-parameter LOO, default nugget for the family, vague prior,
    /// 1000 draws, 99 regular levels.
    pub fn new(method: Method, family: Family) -> Self {
        Self {
            method,
            family,
            nugget_ratio: crate::ordinary::default_nugget_ratio(family),
            loo_mode: LooMode::Fixed,
            draws: DEFAULT_DRAWS,
            phi_grid: PhiGrid::default(),
            prior: PriorKind::Vague,
            levels: regular_levels(DEFAULT_LEVEL_COUNT),
            seed: 0,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions::new(self.family, self.nugget_ratio)
    }
}

/// `count` equally spaced levels `j/(count+1)`, `j = 1..=count`.
pub fn regular_levels(count: usize) -> Vec<f64> {
    (1..=count).map(|j| j as f64 / (count + 1) as f64).collect()
}

/// Leave-one-out records together with the full-data parameter summary.
#[derive(Debug, Clone)]
pub struct LooOutcome {
    pub records: Vec<LooRecord>,
    pub parameters: ParameterTriple,
}

/// Leave-one-out predictions for every site of `ds`.
pub fn loo_records(ds: &SpatialDataset, config: &ValidationConfig) -> Result<LooOutcome> {
    const MIN_POINTS: usize = 4;
    if ds.len() < MIN_POINTS {
        return Err(Error::InvalidSize {
            requested: ds.len(),
            available: MIN_POINTS,
        });
    }
    match (config.method, config.loo_mode) {
        (Method::Ordinary, LooMode::Fixed) => ok_loo_fixed(ds, config),
        (Method::Ordinary, LooMode::Reestimate) => ok_loo_refit(ds, config),
        (Method::Bayesian, LooMode::Fixed) => bayes_loo_fixed(ds, config),
        (Method::Bayesian, LooMode::Reestimate) => bayes_loo_refit(ds, config),
    }
}

fn fold_err(fold: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Fold {
        fold,
        source: Box::new(e),
    }
}

fn ok_loo_fixed(ds: &SpatialDataset, config: &ValidationConfig) -> Result<LooOutcome> {
    let model = fit_mle(ds, config.fit_options())?;
    Ok(LooOutcome {
        records: ok_loo_with_model(&model)?,
        parameters: model.params(),
    })
}

/// Closed-form leave-one-out for a fitted ordinary-kriging model, parameters held fixed.
pub fn ok_loo_with_model(model: &OkModel) -> Result<Vec<LooRecord>> {
    let gls = model.gls();
    let sigma2 = model.params().variance;
    let inv_diag = model.system().inverse_diagonal();
    // with P = R⁻¹ − R⁻¹11ᵀR⁻¹ / 1ᵀR⁻¹1: residual (Pz)_i / P_ii, variance σ²/P_ii.
    // The held-out value is an observation, so its law carries the nugget.
    model
        .dataset()
        .values()
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let b = gls.r_inv_one[i];
            let p_ii = inv_diag[i] - b * b / gls.one_r_inv_one;
            let resid = (gls.r_inv_z[i] - gls.beta_hat * b) / p_ii;
            let vf = clamp_variance_factor(1.0 / p_ii).map_err(fold_err(i))?;
            Ok(LooRecord::gaussian(i, z, z - resid, sigma2 * vf))
        })
        .collect()
}

fn ok_loo_refit(ds: &SpatialDataset, config: &ValidationConfig) -> Result<LooOutcome> {
    let full = fit_mle(ds, config.fit_options())?;
    let records = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let fold = ds.without(i).map_err(fold_err(i))?;
            let model = fit_mle(&fold, config.fit_options()).map_err(fold_err(i))?;
            let p = model.predict(&ds.positions()[i]).map_err(fold_err(i))?;
            let nugget = model.params().variance * model.kernel().nugget_ratio;
            Ok(LooRecord::gaussian(i, ds.values()[i], p.mean, p.variance + nugget))
        })
        .collect::<Result<_>>()?;
    Ok(LooOutcome {
        records,
        parameters: full.params(),
    })
}

fn prior_for(ds: &SpatialDataset, config: &ValidationConfig) -> Result<PriorSpec> {
    PriorSpec::new(config.prior, config.phi_grid.build(ds)?)
}

fn bayes_loo_fixed(ds: &SpatialDataset, config: &ValidationConfig) -> Result<LooOutcome> {
    use crate::bayes::predictive::{draw_predictive, DrawCoef};

    let prior = prior_for(ds, config)?;
    let post = phi_posterior(ds, config.fit_options(), &prior)?;
    let samples = post.sample(config.draws, config.seed)?;
    let mut used = vec![false; post.atoms().len()];
    for &g in &samples.atom_index {
        used[g] = true;
    }
    let z = ds.values();
    let coefs: Vec<Vec<DrawCoef>> = post
        .atoms()
        .par_iter()
        .zip(used.par_iter())
        .map(|(atom, &used)| -> Result<Vec<DrawCoef>> {
            if !used {
                return Ok(Vec::new());
            }
            let inv_diag = atom.system.inverse_diagonal();
            // known-β conditional of z_i given the rest:
            // mean z_i − [R⁻¹(z − β1)]_i / [R⁻¹]_ii, variance σ²/[R⁻¹]_ii
            (0..z.len())
                .map(|i| {
                    let d = inv_diag[i];
                    Ok(DrawCoef {
                        c0: z[i] - atom.gls.r_inv_z[i] / d,
                        c1: atom.gls.r_inv_one[i] / d,
                        vf: clamp_variance_factor(1.0 / d).map_err(fold_err(i))?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let dists = draw_predictive(&samples, &coefs, z.len(), config.seed)?;
    let records = dists
        .into_iter()
        .enumerate()
        .map(|(i, d)| LooRecord::empirical(i, z[i], d))
        .collect();
    Ok(LooOutcome {
        records,
        parameters: samples.mean_triple(),
    })
}

fn bayes_loo_refit(ds: &SpatialDataset, config: &ValidationConfig) -> Result<LooOutcome> {
    let prior = prior_for(ds, config)?;
    let full = phi_posterior(ds, config.fit_options(), &prior)?;
    let parameters = full.sample(config.draws, config.seed)?.mean_triple();
    let records = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let fold_seed = rng::derive_seed(config.seed, &[rng::label("loo-fold"), i as u64]);
            let fold = ds.without(i).map_err(fold_err(i))?;
            let post = phi_posterior(&fold, config.fit_options(), &prior).map_err(fold_err(i))?;
            let samples = post.sample(config.draws, fold_seed).map_err(fold_err(i))?;
            let mut d = post
                .predict_observations(&samples, &ds.positions()[i..=i], fold_seed)
                .map_err(fold_err(i))?;
            Ok(LooRecord::empirical(i, ds.values()[i], d.remove(0)))
        })
        .collect::<Result<_>>()?;
    Ok(LooOutcome {
        records,
        parameters,
    })
}

/// Predictivity coefficient `1 − Σ(z − ẑ)² / Σ(z − μ̂)²`.
pub fn q2(records: &[LooRecord]) -> Result<f64> {
    let n = records.len() as f64;
    let mu = records.iter().map(|r| r.observed).sum::<f64>() / n;
    let denom: f64 = records.iter().map(|r| (r.observed - mu).powi(2)).sum();
    if !(denom > 0.0) {
        return Err(Error::DegenerateData("observations have zero spread".into()));
    }
    let num: f64 = records.iter().map(LooRecord::squared_error).sum();
    Ok(1.0 - num / denom)
}

/// Predictive variance adequacy `|log mean((z − ẑ)² / ŝ²)|`.
pub fn pva(records: &[LooRecord]) -> Result<f64> {
    let mut acc = 0.0;
    for r in records {
        if !(r.variance > 0.0) {
            return Err(Error::UndefinedCriterion(format!(
                "PVA: zero prediction variance at fold {}",
                r.index
            )));
        }
        acc += r.squared_error() / r.variance;
    }
    Ok((acc / records.len() as f64).ln().abs())
}

/// Predictive interval adequacy, PVA with the squared `q0.31–q0.69` width in place of the variance.
pub fn pia(records: &[LooRecord]) -> Result<f64> {
    let mut acc = 0.0;
    for r in records {
        let width = r.quantile(PIA_LOWER) - r.quantile(PIA_UPPER);
        let w2 = width * width;
        if !(w2 > 0.0) {
            return Err(Error::UndefinedCriterion(format!(
                "PIA: zero interquantile width at fold {}",
                r.index
            )));
        }
        acc += r.squared_error() / w2;
    }
    Ok((acc / records.len() as f64).ln().abs())
}

/// `(α, Δ_α)`: fraction of observations inside the closed level-α interval.
pub fn alpha_curve(records: &[LooRecord], levels: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = records.len() as f64;
    levels
        .iter()
        .map(|&alpha| {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Domain(format!("level {alpha} outside (0, 1)")));
            }
            let mut inside = 0usize;
            for r in records {
                let (lo, hi) = r.law.interval(alpha)?;
                if r.observed >= lo && r.observed <= hi {
                    inside += 1;
                }
            }
            Ok((alpha, inside as f64 / n))
        })
        .collect()
}

/// `(1/n_α) Σ (Δ_α − α)²`.
pub fn mse_alpha(curve: &[(f64, f64)]) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::UndefinedCriterion("MSEα of an empty curve".into()));
    }
    Ok(curve.iter().map(|(a, d)| (d - a).powi(2)).sum::<f64>() / curve.len() as f64)
}

/// All criteria for one dataset and configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub q2: f64,
    pub pva: f64,
    pub pia: f64,
    pub mse_alpha: f64,
    pub alpha_curve: Vec<(f64, f64)>,
    pub method: Method,
    pub covariance: String,
    pub n: usize,
    pub n_levels: usize,
    pub parameters: ParameterTriple,
    pub config: ValidationConfig,
}

impl ValidationReport {
    pub fn from_records(
        records: &[LooRecord],
        parameters: ParameterTriple,
        config: &ValidationConfig,
    ) -> Result<Self> {
        let alpha_curve = alpha_curve(records, &config.levels)?;
        Ok(Self {
            q2: q2(records)?,
            pva: pva(records)?,
            pia: pia(records)?,
            mse_alpha: mse_alpha(&alpha_curve)?,
            alpha_curve,
            method: config.method,
            covariance: config.family.tag(),
            n: records.len(),
            n_levels: config.levels.len(),
            parameters,
            config: config.clone(),
        })
    }

    /// `(name, value)` for the four scalar criteria.
    pub fn scalars(&self) -> [(&'static str, f64); 4] {
        [
            ("q2", self.q2),
            ("pva", self.pva),
            ("pia", self.pia),
            ("mse_alpha", self.mse_alpha),
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One `alpha,delta` row per level, then the scalar rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,key,value\n");
        for (a, d) in &self.alpha_curve {
            out.push_str(&format!("curve,{a},{d}\n"));
        }
        for (name, v) in self.scalars() {
            out.push_str(&format!("scalar,{name},{v}\n"));
        }
        out
    }
}

/// Leave-one-out validation and all criteria.
pub fn validate(ds: &SpatialDataset, config: &ValidationConfig) -> Result<ValidationReport> {
    // Q² needs spread; fail before fitting
    let first = ds.values()[0];
    if ds.values().iter().all(|v| *v == first) {
        return Err(Error::DegenerateData("all observations are equal".into()));
    }
    let outcome = loo_records(ds, config)?;
    ValidationReport::from_records(&outcome.records, outcome.parameters, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(z: f64, m: f64, v: f64) -> LooRecord {
        LooRecord::gaussian(0, z, m, v)
    }

    #[test]
    fn q2_reference_cases() {
        let r = vec![rec(1.0, 1.5, 1.0), rec(2.0, 2.0, 1.0), rec(3.0, 2.5, 1.0)];
        assert!((q2(&r).unwrap() - 0.75).abs() < 1e-15);
        let perfect = vec![rec(1.0, 1.0, 1.0), rec(2.0, 2.0, 1.0)];
        assert_eq!(q2(&perfect).unwrap(), 1.0);
        let at_mean = vec![rec(1.0, 2.0, 1.0), rec(3.0, 2.0, 1.0)];
        assert_eq!(q2(&at_mean).unwrap(), 0.0);
        let flat = vec![rec(1.0, 1.0, 1.0), rec(1.0, 1.0, 1.0)];
        assert!(matches!(q2(&flat), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn pva_reference_cases() {
        let unit = vec![rec(1.0, 0.0, 1.0), rec(0.0, 2.0, 4.0)];
        assert!(pva(&unit).unwrap().abs() < 1e-15);
        let e = std::f64::consts::E;
        let r = vec![rec(e.sqrt(), 0.0, 1.0), rec(0.0, e.sqrt(), 1.0)];
        assert!((pva(&r).unwrap() - 1.0).abs() < 1e-15);
        let two = vec![rec(2f64.sqrt(), 0.0, 1.0), rec(2.0, 0.0, 2.0)];
        assert!((pva(&two).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(pva(&[rec(1.0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn pia_unit_width_is_zero() {
        let k = normal_quantile(PIA_UPPER) * 2.0;
        // |error| equal to the interquantile width at each fold
        let r = vec![rec(k * 1.0, 0.0, 1.0), rec(0.0, 3.0 * k, 9.0)];
        assert!(pia(&r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mse_alpha_reference_cases() {
        let levels = regular_levels(99);
        let diag: Vec<_> = levels.iter().map(|&a| (a, a)).collect();
        assert_eq!(mse_alpha(&diag).unwrap(), 0.0);
        let off: Vec<_> = levels.iter().map(|&a| (a, a + 0.1)).collect();
        assert!((mse_alpha(&off).unwrap() - 0.01).abs() < 1e-15);
        assert!(mse_alpha(&[]).is_err());
    }

    #[test]
    fn near_full_coverage() {
        let r: Vec<_> = (0..10).map(|i| rec(i as f64 * 0.1, 0.0, 1.0)).collect();
        let c = alpha_curve(&r, &[0.999_999]).unwrap();
        assert_eq!(c[0].1, 1.0);
        assert!(alpha_curve(&r, &[1.0]).is_err());
    }

    #[test]
    fn levels_are_regular() {
        let l = regular_levels(99);
        assert_eq!(l.len(), 99);
        assert!((l[0] - 0.01).abs() < 1e-15 && (l[98] - 0.99).abs() < 1e-15);
    }
}
