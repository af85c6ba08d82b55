use serde::{Deserialize, Serialize};

use super::PosteriorSampleSet;
use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, sample_variance, sorted};

pub const DENSITY_GRID_POINTS: usize = 512;
/// Grid padding beyond the support, in bandwidths.
const CUT: f64 = 4.0;

/// Kernel-smoothed posterior density of the range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiDensity {
    Curve {
        grid: Vec<f64>,
        density: Vec<f64>,
        bandwidth: f64,
    },
    /// Every draw had the same value.
    PointMass { phi: f64 },
}

impl PhiDensity {
    /// Location of the density maximum.
    pub fn mode(&self) -> f64 {
        match self {
            PhiDensity::Curve { grid, density, .. } => {
                let (i, _) = density
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
                grid[i]
            }
            PhiDensity::PointMass { phi } => *phi,
        }
    }

    /// Trapezoid-rule integral of the curve (1 for a point mass).
    pub fn integral(&self) -> f64 {
        match self {
            PhiDensity::Curve { grid, density, .. } => grid
                .windows(2)
                .zip(density.windows(2))
                .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
                .sum(),
            PhiDensity::PointMass { .. } => 1.0,
        }
    }
}

/// Silverman's rule of thumb, `0.9 · min(sd, IQR/1.34) · M^(-1/5)`, with the
/// usual fallbacks when the spread estimate vanishes.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let s = sorted(values);
    let sd = sample_variance(values).sqrt();
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let mut lo = sd.min(iqr / 1.34);
    if !(lo > 0.0) {
        lo = if sd > 0.0 {
            sd
        } else if s[0] != 0.0 {
            s[0].abs()
        } else {
            1.0
        };
    }
    0.9 * lo * (values.len() as f64).powf(-0.2)
}

/// Gaussian-kernel density of the range draws on a 512-point grid covering the support.
pub fn posterior_phi_density(samples: &PosteriorSampleSet) -> Result<PhiDensity> {
    let draws = samples.phi_draws();
    if draws.is_empty() {
        return Err(Error::Config("no draws".into()));
    }
    let first = draws[0];
    if draws.iter().all(|d| *d == first) {
        return Ok(PhiDensity::PointMass { phi: first });
    }
    let h = silverman_bandwidth(&draws);
    let (lo, hi) = samples
        .support
        .iter()
        .chain(draws.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = (lo - CUT * h, hi + CUT * h);
    let m = draws.len() as f64;
    let norm = 1.0 / (m * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..DENSITY_GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (DENSITY_GRID_POINTS - 1) as f64)
        .collect();
    let density = grid
        .iter()
        .map(|x| {
            norm * draws
                .iter()
                .map(|d| (-0.5 * ((x - d) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Ok(PhiDensity::Curve {
        grid,
        density,
        bandwidth: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordinary::ParameterTriple;

    fn set(phis: &[f64], support: Vec<f64>) -> PosteriorSampleSet {
        PosteriorSampleSet {
            triples: phis
                .iter()
                .map(|&range| ParameterTriple {
                    beta: 0.0,
                    variance: 1.0,
                    range,
                })
                .collect(),
            atom_index: vec![0; phis.len()],
            weights: vec![1.0 / support.len() as f64; support.len()],
            support,
        }
    }

    #[test]
    fn bimodal_atoms() {
        let mut phis = vec![1.0; 500];
        phis.extend(vec![9.0; 500]);
        let d = posterior_phi_density(&set(&phis, vec![1.0, 9.0])).unwrap();
        let PhiDensity::Curve { grid, density, .. } = &d else {
            panic!("expected a curve")
        };
        let step = grid[1] - grid[0];
        let half = grid.len() / 2;
        let left = (0..half).max_by(|&a, &b| density[a].total_cmp(&density[b])).unwrap();
        let right = (half..grid.len())
            .max_by(|&a, &b| density[a].total_cmp(&density[b]))
            .unwrap();
        assert!((grid[left] - 1.0).abs() <= step);
        assert!((grid[right] - 9.0).abs() <= step);
        assert!((d.integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn identical_draws_are_a_point_mass() {
        let d = posterior_phi_density(&set(&[2.0; 10], vec![2.0])).unwrap();
        assert_eq!(d, PhiDensity::PointMass { phi: 2.0 });
    }
}
