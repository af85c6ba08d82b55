//! Gaussian random-field simulation and the deterministic test surface.

use rand_distr::{Distribution, StandardNormal};

use crate::covariance::{CorrelationSystem, CovarianceSpec};
use crate::dataset::{Point, SpatialDataset};
use crate::error::Result;
use crate::rng;

/// One exact draw of `Z ~ N(β·1, σ²R)` at `positions` (nugget included in `R`).
pub fn simulate_gp(
    spec: &CovarianceSpec,
    beta: f64,
    positions: &[Point],
    seed: u64,
) -> Result<SpatialDataset> {
    spec.validate()?;
    let sys = CorrelationSystem::assemble(spec.kernel(), positions)?;
    let mut rng = rng::stream(seed, &[rng::label("gp-field")]);
    let eps: Vec<f64> = (0..positions.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let sd = spec.variance.sqrt();
    let values = sys
        .factor()
        .mul_lower(&eps)
        .into_iter()
        .map(|v| beta + sd * v)
        .collect();
    SpatialDataset::new(positions.to_vec(), values)
}

/// Two-dimensional deterministic test function on `[-1, 1]²`.
pub fn eval_f(x: f64, y: f64) -> f64 {
    x.exp() / 5.0 - y / 5.0 + y.powi(6) / 3.0 + 4.0 * y.powi(4) - 4.0 * y * y
        + 7.0 * x * x / 10.0
        + x.powi(4)
        + 3.0 / (4.0 * x * x + 4.0 * y * y + 1.0)
}

/// Analytic gradient of [`eval_f`].
pub fn grad_f(x: f64, y: f64) -> (f64, f64) {
    let d = 4.0 * x * x + 4.0 * y * y + 1.0;
    let dx = x.exp() / 5.0 + 7.0 * x / 5.0 + 4.0 * x.powi(3) - 24.0 * x / (d * d);
    let dy = -0.2 + 2.0 * y.powi(5) + 16.0 * y.powi(3) - 8.0 * y - 24.0 * y / (d * d);
    (dx, dy)
}

/// Dataset of `f` evaluated at `positions`.
pub fn sample_f(positions: &[Point]) -> Result<SpatialDataset> {
    let values = positions.iter().map(|p| eval_f(p.x, p.y)).collect();
    SpatialDataset::new(positions.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::Family;
    use crate::dataset::{make_grid, sample_uniform, Rect};

    #[test]
    fn f_reference_values() {
        assert!((eval_f(0.0, 0.0) - 3.2).abs() < 1e-15);
        assert!((eval_f(0.0, 1.0) - 0.933_333_333_333_333_3).abs() < 1e-14);
        let expect = std::f64::consts::E / 5.0 - 0.2 + 1.0 / 3.0 + 0.7 + 1.0 + 1.0 / 3.0;
        assert!((eval_f(1.0, 1.0) - expect).abs() < 1e-14);
        assert!((eval_f(1.0, 1.0) - 2.710_323).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pts = sample_uniform(Rect::square(-1.0, 1.0), 20, 3).unwrap();
        let h = 1e-5;
        for p in pts {
            let (gx, gy) = grad_f(p.x, p.y);
            let fx = (eval_f(p.x + h, p.y) - eval_f(p.x - h, p.y)) / (2.0 * h);
            let fy = (eval_f(p.x, p.y + h) - eval_f(p.x, p.y - h)) / (2.0 * h);
            assert!((fx - gx).abs() <= 1e-5 * gx.abs().max(1.0), "x at {p:?}");
            assert!((fy - gy).abs() <= 1e-5 * gy.abs().max(1.0), "y at {p:?}");
        }
    }

    #[test]
    fn vanishing_variance_gives_constant_field() {
        let spec = CovarianceSpec::new(Family::EXPONENTIAL, 4.5, 1e-30, 0.0).unwrap();
        let pts = make_grid(Rect::square(0.0, 10.0), 5).unwrap();
        let ds = simulate_gp(&spec, 0.5, &pts, 1).unwrap();
        assert!(ds.values().iter().all(|v| (v - 0.5).abs() < 1e-10));
    }

    #[test]
    fn bit_reproducible() {
        let spec = CovarianceSpec::new(Family::EXPONENTIAL, 4.5, 0.1, 0.0).unwrap();
        let pts = make_grid(Rect::square(0.0, 10.0), 6).unwrap();
        let a = simulate_gp(&spec, 0.5, &pts, 42).unwrap();
        let b = simulate_gp(&spec, 0.5, &pts, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_gp(&spec, 0.5, &pts, 43).unwrap());
    }
}
