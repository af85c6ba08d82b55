use rand::Rng;
use rand_distr::{ChiSquared, Distribution};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Scaled-inverse-χ² law with scale `s²` and `df` degrees of freedom:
/// `df·s²/X` with `X ~ χ²_df`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledInvChi2 {
    scale: f64,
    df: f64,
    chi2: ChiSquared<f64>,
}

impl ScaledInvChi2 {
    pub fn new(scale: f64, df: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("scale must be > 0 (got {scale})")));
        }
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::Domain(format!("degrees of freedom must be > 0 (got {df})")));
        }
        let chi2 = ChiSquared::new(df).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(Self { scale, df, chi2 })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.df * self.scale / self.chi2.sample(rng)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let h = 0.5 * self.df;
        h * (h * self.scale).ln() - ln_gamma(h) - (h + 1.0) * x.ln() - h * self.scale / x
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Defined for `df > 2`.
    pub fn mean(&self) -> Option<f64> {
        (self.df > 2.0).then(|| self.df * self.scale / (self.df - 2.0))
    }

    pub fn mode(&self) -> f64 {
        self.df * self.scale / (self.df + 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn rejects_bad_arguments() {
        assert!(ScaledInvChi2::new(0.0, 3.0).is_err());
        assert!(ScaledInvChi2::new(1.0, -1.0).is_err());
    }

    #[test]
    fn sample_mean_matches_analytic() {
        let d = ScaledInvChi2::new(1.0, 10.0).unwrap();
        let mut r = rng::stream(1, &[]);
        let m = 1_000_000;
        let draws: Vec<f64> = (0..m).map(|_| d.sample(&mut r)).collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        // Var = 2 df² s⁴ / ((df-2)²(df-4))
        let sd = (2.0 * 100.0 / (64.0 * 6.0f64)).sqrt();
        assert!((mean - 1.25).abs() < 4.0 * sd / (m as f64).sqrt(), "mean {mean}");
        assert_eq!(d.mean(), Some(1.25));
    }

    #[test]
    fn density_integrates_to_one() {
        // substitute x = e^u, composite Simpson on u
        for &(s, df) in &[(1.0, 10.0), (0.1, 4.0), (3.0, 1.5)] {
            let d = ScaledInvChi2::new(s, df).unwrap();
            let (a, b, n) = (-40.0f64, 40.0f64, 200_000usize);
            let h = (b - a) / n as f64;
            let g = |u: f64| d.pdf(u.exp()) * u.exp();
            let mut acc = g(a) + g(b);
            for i in 1..n {
                acc += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let total = acc * h / 3.0;
            assert!((total - 1.0).abs() < 1e-6, "({s},{df}) -> {total}");
        }
    }

    #[test]
    fn mode_matches_grid_argmax() {
        let d = ScaledInvChi2::new(2.0, 7.0).unwrap();
        let (best, _) = (1..200_000)
            .map(|i| i as f64 * 1e-4)
            .map(|x| (x, d.ln_pdf(x)))
            .fold((0.0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
        assert!((best - d.mode()).abs() < 2e-4);
    }
}
