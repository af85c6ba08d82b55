use serde::{Deserialize, Serialize};

use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};

/// Prior on `(β, σ²)` given the range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    /// `π(β, σ²) ∝ 1/σ²`.
    Vague,
    /// `σ² ~ Scaled-Inv-χ²(variance_center, variance_df)`,
    /// `β | σ² ~ N(beta_center, σ² / beta_scaling)`.
    NormalScaledInvChi2 {
        beta_center: f64,
        variance_center: f64,
        variance_df: f64,
        beta_scaling: f64,
    },
    /// Point masses on `β` and `σ²`.
    Known { beta: f64, variance: f64 },
}

impl PriorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorKind::Vague => Ok(()),
            PriorKind::NormalScaledInvChi2 {
                beta_center,
                variance_center,
                variance_df,
                beta_scaling,
            } => {
                if !beta_center.is_finite() {
                    return Err(Error::Domain("prior beta center must be finite".into()));
                }
                if !(variance_center > 0.0 && variance_center.is_finite()) {
                    return Err(Error::Domain("prior variance center must be > 0".into()));
                }
                if !(variance_df > 0.0 && variance_df.is_finite()) {
                    return Err(Error::Domain("prior variance df must be > 0".into()));
                }
                if !(beta_scaling > 0.0 && beta_scaling.is_finite()) {
                    return Err(Error::Domain("prior beta scaling must be > 0".into()));
                }
                Ok(())
            }
            PriorKind::Known { beta, variance } => {
                if !beta.is_finite() || !(variance > 0.0 && variance.is_finite()) {
                    return Err(Error::Domain("known parameters must be finite, variance > 0".into()));
                }
                Ok(())
            }
        }
    }
}

/// Discrete prior on the range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiPrior {
    support: Vec<f64>,
    weights: Vec<f64>,
}

/// Number of atoms in the default range support.
pub const DEFAULT_PHI_ATOMS: usize = 51;

impl PhiPrior {
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::Config(
                "range support and weights must be non-empty and of equal length".into(),
            ));
        }
        if support.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::Config("range support values must be > 0".into()));
        }
        if support.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("range support must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config("range prior weights must be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("range prior weights sum to {total}, not 1")));
        }
        Ok(Self { support, weights })
    }

    pub fn uniform(support: Vec<f64>) -> Result<Self> {
        let g = support.len().max(1);
        Self::new(support, vec![1.0 / g as f64; g])
    }

    /// `count` equally spaced atoms on `[lo, hi]`, uniform weights.
    pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("range grid needs at least one atom".into()));
        }
        if count == 1 {
            return Self::uniform(vec![lo]);
        }
        let support = (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect();
        Self::uniform(support)
    }

    /// 51 atoms from `d_max/100` to `d_max`, `d_max` the largest pairwise distance.
    pub fn default_for(ds: &SpatialDataset) -> Result<Self> {
        let (_, d_max) = ds
            .distance_range()
            .ok_or_else(|| Error::Config("default range grid needs two points".into()))?;
        Self::uniform_grid(d_max / 100.0, d_max, DEFAULT_PHI_ATOMS)
    }

    pub fn single(phi: f64) -> Result<Self> {
        Self::new(vec![phi], vec![1.0])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// How the range support is chosen when a prior is built for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiGrid {
    /// `count` atoms from `d_max · lo_fraction` to `d_max · hi_fraction`.
    RelativeToMaxDistance {
        count: usize,
        lo_fraction: f64,
        hi_fraction: f64,
    },
    Explicit { support: Vec<f64> },
}

impl Default for PhiGrid {
    fn default() -> Self {
        PhiGrid::RelativeToMaxDistance {
            count: DEFAULT_PHI_ATOMS,
            lo_fraction: 0.01,
            hi_fraction: 1.0,
        }
    }
}

impl PhiGrid {
    pub fn build(&self, ds: &SpatialDataset) -> Result<PhiPrior> {
        match self {
            PhiGrid::RelativeToMaxDistance {
                count,
                lo_fraction,
                hi_fraction,
            } => {
                let (_, d_max) = ds
                    .distance_range()
                    .ok_or_else(|| Error::Config("range grid needs two points".into()))?;
                PhiPrior::uniform_grid(d_max * lo_fraction, d_max * hi_fraction, *count)
            }
            PhiGrid::Explicit { support } => PhiPrior::uniform(support.clone()),
        }
    }
}

/// Joint prior: `(β, σ²) | φ` and the discrete range prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub phi: PhiPrior,
}

impl PriorSpec {
    pub fn new(kind: PriorKind, phi: PhiPrior) -> Result<Self> {
        kind.validate()?;
        Ok(Self { kind, phi })
    }

    pub fn vague(phi: PhiPrior) -> Self {
        Self {
            kind: PriorKind::Vague,
            phi,
        }
    }
}

/// The five prior specifications of the prior-sensitivity study, for a dataset of size `n`:
///
/// 1. vague;
/// 2. `σ² ~ Scaled-Inv-χ²(σ²_init, n)`, `β | σ² ~ N(β_init, σ²/n)`;
/// 3. as 2 with both centers tripled;
/// 4. as 2 with `n/3` degrees of freedom;
/// 5. both modifications.
pub fn make_appendix_prior(case: u8, beta_init: f64, variance_init: f64, n: usize) -> Result<PriorKind> {
    let nf = n as f64;
    let informative = |center_mult: f64, df: f64| PriorKind::NormalScaledInvChi2 {
        beta_center: center_mult * beta_init,
        variance_center: center_mult * variance_init,
        variance_df: df,
        beta_scaling: nf,
    };
    let kind = match case {
        1 => PriorKind::Vague,
        2 => informative(1.0, nf),
        3 => informative(3.0, nf),
        4 => informative(1.0, nf / 3.0),
        5 => informative(3.0, nf / 3.0),
        other => return Err(Error::Config(format!("prior case must be 1..=5 (got {other})"))),
    };
    kind.validate()?;
    Ok(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appendix_cases() {
        assert_eq!(make_appendix_prior(1, 0.5, 0.1, 20).unwrap(), PriorKind::Vague);
        match make_appendix_prior(3, 0.5, 0.1, 20).unwrap() {
            PriorKind::NormalScaledInvChi2 {
                beta_center,
                variance_center,
                variance_df,
                beta_scaling,
            } => {
                assert!((beta_center - 1.5).abs() < 1e-15);
                assert!((variance_center - 0.3).abs() < 1e-15);
                assert_eq!(variance_df, 20.0);
                assert_eq!(beta_scaling, 20.0);
            }
            k => panic!("{k:?}"),
        }
        match make_appendix_prior(4, 0.5, 0.1, 21).unwrap() {
            PriorKind::NormalScaledInvChi2 {
                variance_center,
                variance_df,
                ..
            } => {
                assert_eq!(variance_center, 0.1);
                assert_eq!(variance_df, 7.0);
            }
            k => panic!("{k:?}"),
        }
        assert!(make_appendix_prior(6, 0.5, 0.1, 20).is_err());
        assert!(make_appendix_prior(0, 0.5, 0.1, 20).is_err());
    }

    #[test]
    fn phi_prior_validation() {
        assert!(PhiPrior::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(PhiPrior::new(vec![0.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(PhiPrior::new(vec![1.0, 2.0], vec![0.6, 0.5]).is_err());
        let g = PhiPrior::uniform_grid(0.1, 10.0, 51).unwrap();
        assert_eq!(g.len(), 51);
        assert!((g.support()[50] - 10.0).abs() < 1e-12);
    }
}
