//! Correlation kernels and the factorized correlation system shared by both
//! kriging methods.
//!
//! Matérn kernels use the `√(2ν)·h/φ` scaling and are evaluated through the
//! closed forms available for half-integer smoothness. The nugget enters the
//! diagonal of the correlation matrix only, as the ratio `τ²/σ²`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Point;
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky};

/// Half-integer Matérn smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Smoothness {
    #[serde(rename = "0.5")]
    Half,
    #[serde(rename = "1.5")]
    ThreeHalves,
    #[serde(rename = "2.5")]
    FiveHalves,
}

impl Smoothness {
    pub fn value(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
        }
    }

    pub fn from_value(nu: f64) -> Result<Self> {
        match nu {
            0.5 => Ok(Smoothness::Half),
            1.5 => Ok(Smoothness::ThreeHalves),
            2.5 => Ok(Smoothness::FiveHalves),
            _ => Err(Error::Domain(format!(
                "Matérn smoothness must be one of 0.5, 1.5, 2.5 (got {nu})"
            ))),
        }
    }
}

/// Correlation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", content = "nu", rename_all = "snake_case")]
pub enum Family {
    Matern(Smoothness),
    Gaussian,
}

impl Family {
    pub const EXPONENTIAL: Family = Family::Matern(Smoothness::Half);

    /// The four families compared in the covariance-selection study.
    pub const ALL: [Family; 4] = [
        Family::Matern(Smoothness::Half),
        Family::Matern(Smoothness::ThreeHalves),
        Family::Matern(Smoothness::FiveHalves),
        Family::Gaussian,
    ];

    /// Parses `gaussian`, `matern` (needs `nu`), `exponential`, or tags like `matern_1.5`.
    pub fn parse(name: &str, nu: Option<f64>) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        match lower.as_str() {
            "gaussian" | "gauss" => Ok(Family::Gaussian),
            "exponential" | "exp" => Ok(Family::EXPONENTIAL),
            "matern" => {
                let nu = nu.ok_or_else(|| Error::Config("matern family needs --nu".into()))?;
                Ok(Family::Matern(Smoothness::from_value(nu)?))
            }
            other => {
                if let Some(v) = other.strip_prefix("matern_") {
                    let nu: f64 = v
                        .parse()
                        .map_err(|_| Error::Config(format!("bad smoothness in `{name}`")))?;
                    Ok(Family::Matern(Smoothness::from_value(nu)?))
                } else {
                    Err(Error::Config(format!("unknown covariance family `{name}`")))
                }
            }
        }
    }

    /// Correlation at distance `h ≥ 0` for range `phi > 0`, without nugget.
    #[inline]
    pub fn correlation_unchecked(self, phi: f64, h: f64) -> f64 {
        match self {
            Family::Gaussian => {
                let u = h / phi;
                (-u * u).exp()
            }
            Family::Matern(Smoothness::Half) => (-h / phi).exp(),
            Family::Matern(Smoothness::ThreeHalves) => {
                let u = 3f64.sqrt() * h / phi;
                (1.0 + u) * (-u).exp()
            }
            Family::Matern(Smoothness::FiveHalves) => {
                let u = 5f64.sqrt() * h / phi;
                (1.0 + u + u * u / 3.0) * (-u).exp()
            }
        }
    }

    pub fn tag(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian => write!(f, "gaussian"),
            Family::Matern(nu) => write!(f, "matern_{}", nu.value()),
        }
    }
}

/// Correlation with range `phi` and the nugget expressed as `τ²/σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: Family,
    pub range: f64,
    pub nugget_ratio: f64,
}

impl Kernel {
    pub fn new(family: Family, range: f64, nugget_ratio: f64) -> Result<Self> {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::Domain(format!("range must be > 0 (got {range})")));
        }
        if !(nugget_ratio >= 0.0 && nugget_ratio.is_finite()) {
            return Err(Error::Domain(format!(
                "nugget ratio must be >= 0 (got {nugget_ratio})"
            )));
        }
        Ok(Self {
            family,
            range,
            nugget_ratio,
        })
    }

    #[inline]
    pub fn correlation(&self, h: f64) -> f64 {
        self.family.correlation_unchecked(self.range, h)
    }
}

/// Full covariance model `σ² C_φ(h) + τ² δ(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub family: Family,
    pub range: f64,
    pub variance: f64,
    pub nugget: f64,
}

impl CovarianceSpec {
    pub fn new(family: Family, range: f64, variance: f64, nugget: f64) -> Result<Self> {
        let spec = Self {
            family,
            range,
            variance,
            nugget,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::Domain(format!("range must be > 0 (got {})", self.range)));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::Domain(format!(
                "variance must be > 0 (got {})",
                self.variance
            )));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(Error::Domain(format!("nugget must be >= 0 (got {})", self.nugget)));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Kernel {
        Kernel {
            family: self.family,
            range: self.range,
            nugget_ratio: self.nugget / self.variance,
        }
    }

    /// `C_φ(h)`, excluding the nugget, so `correlation(0) == 1`.
    pub fn correlation(&self, h: f64) -> Result<f64> {
        self.validate()?;
        if !(h >= 0.0) {
            return Err(Error::Domain(format!("distance must be >= 0 (got {h})")));
        }
        Ok(self.family.correlation_unchecked(self.range, h))
    }
}

/// Row-major `n × n` correlation matrix, diagonal `1 + τ²/σ²`.
pub fn correlation_matrix(kernel: &Kernel, positions: &[Point]) -> Vec<f64> {
    let n = positions.len();
    let mut a = vec![0.0; n * n];
    let diag = 1.0 + kernel.nugget_ratio;
    for i in 0..n {
        a[i * n + i] = diag;
        for j in 0..i {
            let c = kernel.correlation(positions[i].distance(&positions[j]));
            a[i * n + j] = c;
            a[j * n + i] = c;
        }
    }
    a
}

/// `r_j = C_φ(|x₀ − x_j|)`; the nugget never enters.
pub fn cross_correlation(kernel: &Kernel, positions: &[Point], target: &Point) -> Vec<f64> {
    positions
        .iter()
        .map(|p| kernel.correlation(p.distance(target)))
        .collect()
}

/// Factorized correlation matrix over a fixed set of positions.
#[derive(Debug, Clone)]
pub struct CorrelationSystem {
    kernel: Kernel,
    factor: Cholesky,
}

impl CorrelationSystem {
    pub fn assemble(kernel: Kernel, positions: &[Point]) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::InvalidDataset("no positions".into()));
        }
        // lower triangle only is read by the factorization
        let mut a = vec![0.0; n * n];
        let diag = 1.0 + kernel.nugget_ratio;
        for i in 0..n {
            let row = &mut a[i * n..i * n + i + 1];
            for (j, v) in row[..i].iter_mut().enumerate() {
                *v = kernel.correlation(positions[i].distance(&positions[j]));
            }
            row[i] = diag;
        }
        let factor = Cholesky::factor(a, n)?;
        Ok(Self { kernel, factor })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn factor(&self) -> &Cholesky {
        &self.factor
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.factor.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        self.factor.log_det()
    }

    /// `bᵀ R⁻¹ b` via a single triangular solve.
    pub fn quad_form(&self, b: &[f64]) -> f64 {
        let mut y = b.to_vec();
        self.factor.forward_in_place(&mut y);
        dot(&y, &y)
    }

    pub fn inverse_diagonal(&self) -> Vec<f64> {
        self.factor.inverse_diagonal()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_grid, Rect};

    #[test]
    fn unit_at_zero_and_gaussian_value() {
        for fam in Family::ALL {
            let s = CovarianceSpec::new(fam, 1.3, 2.0, 0.1).unwrap();
            assert_eq!(s.correlation(0.0).unwrap(), 1.0);
        }
        let g = CovarianceSpec::new(Family::Gaussian, 2.0, 1.0, 0.0).unwrap();
        assert!((g.correlation(2.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        let e = CovarianceSpec::new(Family::EXPONENTIAL, 4.5, 1.0, 0.0).unwrap();
        assert!((e.correlation(4.5).unwrap() - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        let s = CovarianceSpec::new(Family::Gaussian, 1.0, 1.0, 0.0).unwrap();
        assert!(s.correlation(-0.1).is_err());
        assert!(CovarianceSpec::new(Family::Gaussian, 0.0, 1.0, 0.0).is_err());
        assert!(CovarianceSpec::new(Family::Gaussian, 1.0, 0.0, 0.0).is_err());
        assert!(CovarianceSpec::new(Family::Gaussian, 1.0, 1.0, -1.0).is_err());
        assert!(Smoothness::from_value(1.0).is_err());
    }

    #[test]
    fn single_point_system() {
        let k = Kernel::new(Family::Gaussian, 1.0, 0.25).unwrap();
        let sys = CorrelationSystem::assemble(k, &[Point::new(0.0, 0.0)]).unwrap();
        assert!((sys.log_det() - 1.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn near_coincident_points_are_singular() {
        let k = Kernel::new(Family::Gaussian, 1.0, 0.0).unwrap();
        let pts = [Point::new(0.0, 0.0), Point::new(1e-9, 0.0)];
        assert!(matches!(
            CorrelationSystem::assemble(k, &pts),
            Err(Error::SingularSystem { index: 1, .. })
        ));
    }

    #[test]
    fn regularized_gaussian_on_144_grid_factors() {
        let pts = make_grid(Rect::square(-1.0, 1.0), 12).unwrap();
        for phi in [0.3, 1.0, 2.0] {
            let k = Kernel::new(Family::Gaussian, phi, 1e-6).unwrap();
            assert!(CorrelationSystem::assemble(k, &pts).is_ok(), "phi={phi}");
        }
    }

    #[test]
    fn cross_correlation_limits() {
        let pts = make_grid(Rect::square(0.0, 1.0), 3).unwrap();
        let k = Kernel::new(Family::EXPONENTIAL, 0.5, 0.3).unwrap();
        let r = cross_correlation(&k, &pts, &pts[4]);
        assert_eq!(r[4], 1.0);
        let far = cross_correlation(&k, &pts, &Point::new(1e4, 1e4));
        assert!(far.iter().all(|v| *v < 1e-300));
    }

    #[test]
    fn family_tags_round_trip() {
        for fam in Family::ALL {
            assert_eq!(Family::parse(&fam.tag(), None).unwrap(), fam);
        }
        assert_eq!(Family::parse("matern", Some(1.5)).unwrap(), Family::ALL[1]);
        assert!(Family::parse("spherical", None).is_err());
    }
}
