//! Ordinary and Bayesian kriging with leave-one-out validation criteria.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod covariance;
pub mod dataset;
pub mod error;
pub mod experiments;
pub(crate) mod linalg;
pub mod optimize;
pub mod ordinary;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod validation;

pub use bayes::{
    phi_posterior, predict_bayes, sample_posterior, Posterior, PosteriorSampleSet, PredictiveDistribution,
    PriorKind, PriorSpec,
};
pub use covariance::{CovarianceSpec, Family, Kernel, Smoothness};
pub use dataset::{Point, Rect, SpatialDataset};
pub use error::{Error, Result};
pub use ordinary::{fit_mle, FitOptions, OkModel, ParameterTriple, Prediction};
pub use simulate::{eval_f, simulate_gp};
pub use validation::{validate, LooMode, Method, ValidationConfig, ValidationReport};
