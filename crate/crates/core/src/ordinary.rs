//! Maximum-likelihood fitting and the ordinary-kriging predictor.

use serde::{Deserialize, Serialize};

use crate::covariance::{cross_correlation, CorrelationSystem, Family, Kernel};
use crate::dataset::{Point, SpatialDataset};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::optimize::brent_minimize;
use crate::stats::normal_quantile;

/// Relative threshold below which a negative prediction variance is treated as an error.
pub const NEGATIVE_VARIANCE_TOLERANCE: f64 = 1e-10;

/// `(β, σ², φ)`: mean, variance and range of the stationary field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterTriple {
    pub beta: f64,
    pub variance: f64,
    pub range: f64,
}

impl ParameterTriple {
    pub fn new(beta: f64, variance: f64, range: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Domain("beta must be finite".into()));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Domain(format!("variance must be > 0 (got {variance})")));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::Domain(format!("range must be > 0 (got {range})")));
        }
        Ok(Self {
            beta,
            variance,
            range,
        })
    }
}

/// Generalized-least-squares quantities of the data under a fixed correlation.
#[derive(Debug, Clone)]
pub struct GlsFit {
    /// `R⁻¹ z`
    pub r_inv_z: Vec<f64>,
    /// `R⁻¹ 1`
    pub r_inv_one: Vec<f64>,
    /// `1ᵀ R⁻¹ 1`
    pub one_r_inv_one: f64,
    /// `(1ᵀR⁻¹1)⁻¹ 1ᵀR⁻¹z`
    pub beta_hat: f64,
    /// `(z − β̂1)ᵀ R⁻¹ (z − β̂1)`
    pub rss: f64,
    pub log_det: f64,
}

impl GlsFit {
    pub fn compute(system: &CorrelationSystem, values: &[f64]) -> Self {
        let n = values.len();
        let ones = vec![1.0; n];
        let r_inv_z = system.solve(values);
        let r_inv_one = system.solve(&ones);
        let one_r_inv_one: f64 = r_inv_one.iter().sum();
        let beta_hat = dot(&r_inv_one, values) / one_r_inv_one;
        let resid: Vec<f64> = values.iter().map(|z| z - beta_hat).collect();
        let rss = system.quad_form(&resid);
        Self {
            r_inv_z,
            r_inv_one,
            one_r_inv_one,
            beta_hat,
            rss,
            log_det: system.log_det(),
        }
    }

    /// Profile log-likelihood with `σ̂² = rss / n`.
    pub fn profile_log_likelihood(&self, n: usize) -> f64 {
        let nf = n as f64;
        let sigma2 = self.rss / nf;
        -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0) - 0.5 * self.log_det
    }
}

/// Profile log-likelihood of `ds` at the correlation `kernel`.
pub fn profile_log_likelihood(ds: &SpatialDataset, kernel: Kernel) -> Result<f64> {
    let sys = CorrelationSystem::assemble(kernel, ds.positions())?;
    Ok(GlsFit::compute(&sys, ds.values()).profile_log_likelihood(ds.len()))
}

/// Search interval `[d_min / 2, 2 d_max]` for the range parameter.
pub fn range_bracket(ds: &SpatialDataset) -> Result<(f64, f64)> {
    let (d_min, d_max) = ds
        .distance_range()
        .ok_or_else(|| Error::Fit("range bracket needs at least two points".into()))?;
    Ok((0.5 * d_min, 2.0 * d_max))
}

/// Options for [`fit_mle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub family: Family,
    /// Fixed `τ²/σ²`; never estimated.
    pub nugget_ratio: f64,
}

impl FitOptions {
    pub fn new(family: Family, nugget_ratio: f64) -> Self {
        Self {
            family,
            nugget_ratio,
        }
    }

    /// Relative nugget `1e-6` for the Gaussian family, none otherwise.
    pub fn with_default_nugget(family: Family) -> Self {
        Self::new(family, default_nugget_ratio(family))
    }
}

pub fn default_nugget_ratio(family: Family) -> f64 {
    match family {
        Family::Gaussian => 1e-6,
        Family::Matern(_) => 0.0,
    }
}

/// Mean and variance of a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// Ordinary-kriging model with fixed covariance parameters over a training set.
#[derive(Debug, Clone)]
pub struct OkModel {
    kernel: Kernel,
    params: ParameterTriple,
    system: CorrelationSystem,
    gls: GlsFit,
    dataset: SpatialDataset,
    log_likelihood: f64,
}

const MIN_FIT_POINTS: usize = 3;

/// Maximum-likelihood fit of `(β, σ², φ)` by bounded 1-D search on the profile likelihood.
pub fn fit_mle(ds: &SpatialDataset, opts: FitOptions) -> Result<OkModel> {
    let n = ds.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "maximum likelihood needs at least {MIN_FIT_POINTS} points, got {n}"
        )));
    }
    check_not_constant(ds)?;
    let (lo, hi) = range_bracket(ds)?;
    let (log_lo, log_hi) = (lo.ln(), hi.ln());
    let objective = |log_phi: f64| -> f64 {
        let Ok(kernel) = Kernel::new(opts.family, log_phi.exp(), opts.nugget_ratio) else {
            return f64::INFINITY;
        };
        match CorrelationSystem::assemble(kernel, ds.positions()) {
            Ok(sys) => {
                let g = GlsFit::compute(&sys, ds.values());
                if g.rss > 0.0 {
                    -g.profile_log_likelihood(n)
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    };
    let tol = 1e-6 * (log_hi - log_lo);
    let best = brent_minimize(objective, log_lo, log_hi, tol, 500);
    if !best.value.is_finite() {
        return Err(Error::Fit(format!(
            "likelihood not finite anywhere on range bracket [{lo}, {hi}]"
        )));
    }
    let kernel = Kernel::new(opts.family, best.x.exp(), opts.nugget_ratio)?;
    let model = OkModel::with_kernel(ds, kernel, None)?;
    Ok(model)
}

fn check_not_constant(ds: &SpatialDataset) -> Result<()> {
    let v = ds.values();
    let first = v[0];
    if v.iter().all(|x| *x == first) {
        return Err(Error::DegenerateData(
            "all observations are equal (zero residual)".into(),
        ));
    }
    Ok(())
}

impl OkModel {
    /// Assembles a model for a fixed correlation. `variance = None` uses the
    /// profile MLE `rss / n`; `β` is always the GLS estimate.
    pub fn with_kernel(ds: &SpatialDataset, kernel: Kernel, variance: Option<f64>) -> Result<Self> {
        let system = CorrelationSystem::assemble(kernel, ds.positions())?;
        let gls = GlsFit::compute(&system, ds.values());
        let n = ds.len();
        let variance = match variance {
            Some(v) => v,
            None => {
                if !(gls.rss > 0.0) {
                    return Err(Error::DegenerateData("zero GLS residual".into()));
                }
                gls.rss / n as f64
            }
        };
        let params = ParameterTriple::new(gls.beta_hat, variance, kernel.range)?;
        let log_likelihood = gaussian_log_likelihood(&gls, n, variance);
        Ok(Self {
            kernel,
            params,
            system,
            gls,
            dataset: ds.clone(),
            log_likelihood,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn params(&self) -> ParameterTriple {
        self.params
    }

    pub fn system(&self) -> &CorrelationSystem {
        &self.system
    }

    pub fn gls(&self) -> &GlsFit {
        &self.gls
    }

    pub fn dataset(&self) -> &SpatialDataset {
        &self.dataset
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Mean weights `λ` with `mean = λᵀ z`; they sum to one.
    pub fn weights(&self, target: &Point) -> Vec<f64> {
        let r = cross_correlation(&self.kernel, self.dataset.positions(), target);
        let r_inv_r = self.system.solve(&r);
        let c = (1.0 - dot(&self.gls.r_inv_one, &r)) / self.gls.one_r_inv_one;
        r_inv_r
            .iter()
            .zip(&self.gls.r_inv_one)
            .map(|(a, b)| a + c * b)
            .collect()
    }

    pub fn predict(&self, target: &Point) -> Result<Prediction> {
        let r = cross_correlation(&self.kernel, self.dataset.positions(), target);
        let one_r = dot(&self.gls.r_inv_one, &r);
        let mean = dot(&r, &self.gls.r_inv_z) + (1.0 - one_r) * self.gls.beta_hat;
        let r_r = self.system.quad_form(&r);
        let factor = 1.0 - r_r + (1.0 - one_r).powi(2) / self.gls.one_r_inv_one;
        let variance = self.params.variance * clamp_variance_factor(factor)?;
        Ok(Prediction { mean, variance })
    }

    /// Central Gaussian predictive interval of level `alpha`.
    pub fn predict_gaussian_interval(&self, target: &Point, alpha: f64) -> Result<(f64, f64)> {
        let p = self.predict(target)?;
        gaussian_interval(p.mean, p.variance.sqrt(), alpha)
    }
}

pub(crate) fn gaussian_log_likelihood(gls: &GlsFit, n: usize, variance: f64) -> f64 {
    let nf = n as f64;
    -0.5 * nf * (2.0 * std::f64::consts::PI * variance).ln()
        - 0.5 * gls.log_det
        - 0.5 * gls.rss / variance
}

/// Clamps round-off negatives of a unit-variance factor to zero.
pub(crate) fn clamp_variance_factor(factor: f64) -> Result<f64> {
    if factor >= 0.0 {
        Ok(factor)
    } else if factor >= -NEGATIVE_VARIANCE_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance(factor))
    }
}

/// `[mean ∓ sd·Φ⁻¹((1+α)/2)]`.
pub fn gaussian_interval(mean: f64, sd: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("interval level must be in (0, 1), got {alpha}")));
    }
    let half = if alpha == 0.0 {
        0.0
    } else {
        sd * normal_quantile(0.5 * (1.0 + alpha))
    };
    Ok((mean - half, mean + half))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSpec;
    use crate::dataset::{make_grid, Rect};
    use crate::simulate::simulate_gp;

    fn gp_data(k: usize, seed: u64) -> SpatialDataset {
        let spec = CovarianceSpec::new(Family::EXPONENTIAL, 4.5, 0.1, 0.0).unwrap();
        let pts = make_grid(Rect::square(0.0, 10.0), k).unwrap();
        simulate_gp(&spec, 0.5, &pts, seed).unwrap()
    }

    #[test]
    fn optimum_beats_true_parameters() {
        for seed in 0..10 {
            let ds = gp_data(6, seed);
            let m = fit_mle(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0)).unwrap();
            let truth = profile_log_likelihood(&ds, Kernel::new(Family::EXPONENTIAL, 4.5, 0.0).unwrap())
                .unwrap();
            let at_opt = profile_log_likelihood(&ds, *m.kernel()).unwrap();
            assert!(at_opt >= truth - 1e-9, "seed {seed}: {at_opt} < {truth}");
            assert!((m.log_likelihood() - at_opt).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_data_is_degenerate() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        let ds = SpatialDataset::new(pts, vec![2.0; 3]).unwrap();
        assert!(matches!(
            fit_mle(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0)),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn too_few_points() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        let ds = SpatialDataset::new(pts, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            fit_mle(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0)),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn interpolates_training_points() {
        let ds = gp_data(5, 3);
        let m = fit_mle(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0)).unwrap();
        for (p, z) in ds.positions().iter().zip(ds.values()) {
            let pr = m.predict(p).unwrap();
            assert!((pr.mean - z).abs() <= 1e-8 * z.abs().max(1.0));
            assert!(pr.variance <= 1e-10 * m.params().variance);
            let (lo, hi) = m.predict_gaussian_interval(p, 0.95).unwrap();
            assert!((hi - lo).abs() < 1e-4);
        }
    }

    #[test]
    fn single_point_model_matches_symbolic_reduction() {
        let ds = SpatialDataset::new(vec![Point::new(1.0, 1.0)], vec![0.7]).unwrap();
        let kernel = Kernel::new(Family::EXPONENTIAL, 2.0, 0.0).unwrap();
        let m = OkModel::with_kernel(&ds, kernel, Some(0.3)).unwrap();
        for t in [Point::new(1.5, 1.0), Point::new(3.0, -2.0)] {
            let r1 = kernel.correlation(t.distance(&Point::new(1.0, 1.0)));
            let p = m.predict(&t).unwrap();
            assert!((p.mean - 0.7).abs() < 1e-14);
            assert!((p.variance - 2.0 * 0.3 * (1.0 - r1)).abs() < 1e-14);
        }
    }

    #[test]
    fn far_target_reverts_to_gls_mean() {
        let ds = gp_data(4, 9);
        let m = fit_mle(&ds, FitOptions::new(Family::EXPONENTIAL, 0.0)).unwrap();
        let p = m.predict(&Point::new(1e5, 1e5)).unwrap();
        let g = m.gls();
        assert!((p.mean - g.beta_hat).abs() < 1e-12);
        let expect = m.params().variance * (1.0 + 1.0 / g.one_r_inv_one);
        assert!((p.variance - expect).abs() < 1e-12);
    }

    #[test]
    fn gaussian_interval_widths() {
        let (lo, hi) = gaussian_interval(0.0, 1.0, 0.95).unwrap();
        assert!((hi - 1.959_964).abs() < 1e-6 && (lo + 1.959_964).abs() < 1e-6);
        let (lo, hi) = gaussian_interval(2.0, 1.0, 1e-12).unwrap();
        assert!((hi - lo) < 1e-10 && (lo - 2.0).abs() < 1e-10);
        assert!(gaussian_interval(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn variance_clamp_threshold() {
        assert_eq!(clamp_variance_factor(-5e-11).unwrap(), 0.0);
        assert!(clamp_variance_factor(-1e-9).is_err());
    }
}
