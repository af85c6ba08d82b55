use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::{CriterionRow, CriterionTable, CurveRecord, FAILURE_PREFIX};
use super::{square_side, ExperimentConfig, Suite};
use crate::bayes::{
    make_appendix_prior, phi_posterior, posterior_phi_density, PhiDensity, PriorKind, PriorSpec,
};
use crate::covariance::{CovarianceSpec, Family};
use crate::dataset::{make_grid, sample_uniform, subsample, subsample_indices, Point, Rect, SpatialDataset};
use crate::error::{Error, Result};
use crate::ordinary::{default_nugget_ratio, fit_mle, FitOptions, ParameterTriple};
use crate::rng::{derive_seed, label};
use crate::simulate::{sample_f, simulate_gp};
use crate::validation::{validate, Method, ValidationConfig};

/// Simulation model of the GP benchmark (exponential covariance on `[0, 10]²`).
pub const GP_BETA: f64 = 0.5;
pub const GP_VARIANCE: f64 = 0.1;
pub const GP_RANGE: f64 = 4.5;
const GP_SIDE: f64 = 10.0;
/// The prior-sensitivity parent field lives on a `129 × 129` grid.
pub const PARENT_GRID_SIDE: usize = 129;
/// Upper bound on the points used to estimate the reference parameters of the parent field.
pub const REFERENCE_FIT_POINTS: usize = 1000;

fn gp_spec() -> CovarianceSpec {
    CovarianceSpec::new(Family::EXPONENTIAL, GP_RANGE, GP_VARIANCE, 0.0).expect("valid constants")
}

fn gp_rect() -> Rect {
    Rect::square(0.0, GP_SIDE)
}

fn f_rect() -> Rect {
    Rect::square(-1.0, 1.0)
}

fn unit_seed(config: &ExperimentConfig, n: usize, replicate: usize) -> u64 {
    derive_seed(config.seed, &[label(config.suite.tag()), n as u64, replicate as u64])
}

/// Seed of the simulated field shared by the GP benchmark and the estimation study.
fn gp_data_seed(master: u64, n: usize, replicate: usize) -> u64 {
    derive_seed(master, &[label("gp-data"), n as u64, replicate as u64])
}

fn units(config: &ExperimentConfig) -> Vec<(usize, usize)> {
    config
        .sizes
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect()
}

fn row(experiment: &str, method: &str, covariance: &str, n: usize, replicate: usize, criterion: &str, value: f64) -> CriterionRow {
    CriterionRow {
        experiment: experiment.to_string(),
        method: method.to_string(),
        covariance: covariance.to_string(),
        n,
        replicate,
        criterion: criterion.to_string(),
        value,
    }
}

fn failure_row(experiment: &str, method: &str, covariance: &str, n: usize, replicate: usize, err: &Error) -> CriterionRow {
    let criterion = format!("{FAILURE_PREFIX}{}", err.code());
    row(experiment, method, covariance, n, replicate, &criterion, f64::NAN)
}

/// Runs `validate` and appends either the four scalar rows and the curve, or a failure row.
#[allow(clippy::too_many_arguments)]
fn push_validation(
    table: &mut CriterionTable,
    config: &ExperimentConfig,
    ds: &SpatialDataset,
    method: Method,
    method_name: &str,
    family: Family,
    prior: PriorKind,
    n: usize,
    replicate: usize,
    seed: u64,
) {
    let experiment = config.suite.tag();
    let cov = family.tag();
    let vc = ValidationConfig {
        method,
        family,
        nugget_ratio: default_nugget_ratio(family),
        loo_mode: config.loo_mode,
        draws: config.draws,
        phi_grid: config.phi_grid.clone(),
        prior,
        levels: config.levels.clone(),
        seed: derive_seed(seed, &[label(method_name), label(&cov)]),
    };
    match validate(ds, &vc) {
        Ok(report) => {
            for (name, v) in report.scalars() {
                table.rows.push(row(experiment, method_name, &cov, n, replicate, name, v));
            }
            table.curves.push(CurveRecord {
                method: method_name.to_string(),
                covariance: cov,
                n,
                replicate,
                curve: report.alpha_curve,
            });
        }
        Err(e) => table.rows.push(failure_row(experiment, method_name, &cov, n, replicate, &e)),
    }
}

/// Every configured method × family on one dataset; a data error fails them all.
fn validate_all(config: &ExperimentConfig, data: Result<SpatialDataset>, n: usize, replicate: usize, seed: u64) -> CriterionTable {
    let mut table = CriterionTable::new();
    for &family in &config.families {
        for &method in &config.methods {
            match &data {
                Ok(ds) => push_validation(&mut table, config, ds, method, method.tag(), family, PriorKind::Vague, n, replicate, seed),
                Err(e) => table
                    .rows
                    .push(failure_row(config.suite.tag(), method.tag(), &family.tag(), n, replicate, e)),
            }
        }
    }
    table
}

/// Parallel over units, merged in unit order.
fn run_units<F>(config: &ExperimentConfig, unit: F) -> CriterionTable
where
    F: Fn(usize, usize) -> CriterionTable + Sync,
{
    let parts: Vec<CriterionTable> = units(config).into_par_iter().map(|(n, r)| unit(n, r)).collect();
    let mut table = CriterionTable::new();
    for p in parts {
        table.extend(p);
    }
    table
}

fn expect_suite(config: &ExperimentConfig, suite: Suite) -> Result<()> {
    if config.suite != suite {
        return Err(Error::Config(format!(
            "configuration is for suite {}, not {}",
            config.suite, suite
        )));
    }
    config.validate()
}

fn gp_grid_dataset(n: usize, seed: u64) -> Result<SpatialDataset> {
    let k = square_side(n).ok_or_else(|| Error::Config(format!("size {n} is not a square")))?;
    let grid = make_grid(gp_rect(), k)?;
    simulate_gp(&gp_spec(), GP_BETA, &grid, seed)
}

/// Exponential-covariance GP on square grids of `[0, 10]²`, both methods validated per replicate.
pub fn run_gp_benchmark(config: &ExperimentConfig) -> Result<CriterionTable> {
    expect_suite(config, Suite::Gp)?;
    Ok(run_units(config, |n, r| {
        let data = gp_grid_dataset(n, gp_data_seed(config.seed, n, r));
        validate_all(config, data, n, r, unit_seed(config, n, r))
    }))
}

/// The 144-point grid of the deterministic function, every family × method.
pub fn run_covariance_selection(config: &ExperimentConfig) -> Result<CriterionTable> {
    expect_suite(config, Suite::Covsel)?;
    Ok(run_units(config, |n, r| {
        let data = square_side(n)
            .ok_or_else(|| Error::Config(format!("size {n} is not a square")))
            .and_then(|k| make_grid(f_rect(), k))
            .and_then(|g| sample_f(&g));
        validate_all(config, data, n, r, unit_seed(config, n, r))
    }))
}

/// Random uniform designs on `[-1, 1]²` evaluated through the deterministic function.
pub fn run_function_benchmark(config: &ExperimentConfig) -> Result<CriterionTable> {
    expect_suite(config, Suite::Function)?;
    Ok(run_units(config, |n, r| {
        let seed = unit_seed(config, n, r);
        let data = sample_uniform(f_rect(), n, derive_seed(seed, &[label("design")])).and_then(|p| sample_f(&p));
        validate_all(config, data, n, r, seed)
    }))
}

/// Subsamples without replacement of `parent`; the full size is validated once.
pub fn run_resample_benchmark(parent: &SpatialDataset, config: &ExperimentConfig) -> Result<CriterionTable> {
    expect_suite(config, Suite::Resample)?;
    if let Some(&n) = config.sizes.iter().find(|&&n| n > parent.len()) {
        return Err(Error::InvalidSize {
            requested: n,
            available: parent.len(),
        });
    }
    let units: Vec<(usize, usize)> = config
        .sizes
        .iter()
        .flat_map(|&n| {
            let reps = if n == parent.len() { 1 } else { config.replicates };
            (0..reps).map(move |r| (n, r))
        })
        .collect();
    let parts: Vec<CriterionTable> = units
        .into_par_iter()
        .map(|(n, r)| {
            let seed = unit_seed(config, n, r);
            let data = if n == parent.len() {
                Ok(parent.clone())
            } else {
                subsample(parent, n, derive_seed(seed, &[label("subsample")]))
            };
            validate_all(config, data, n, r, seed)
        })
        .collect();
    let mut table = CriterionTable::new();
    for p in parts {
        table.extend(p);
    }
    Ok(table)
}

/// Output of [`run_prior_sensitivity`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSensitivity {
    pub table: CriterionTable,
    /// Parameters estimated on the parent field, used to center the informative priors.
    pub reference: ParameterTriple,
    /// Parent-field sites actually simulated (the union of all subsamples).
    pub simulated_sites: usize,
}

/// Five prior specifications on subsamples of a `129 × 129` parent GP field.
///
/// Only the union of the subsampled sites is simulated, jointly, which is an exact
/// draw of the parent field's marginal on those sites.
pub fn run_prior_sensitivity(config: &ExperimentConfig) -> Result<PriorSensitivity> {
    expect_suite(config, Suite::PriorSens)?;
    let family = *config.families.first().expect("validated non-empty");
    let grid = make_grid(gp_rect(), PARENT_GRID_SIDE)?;
    let units = units(config);
    let picks: Vec<Vec<usize>> = units
        .iter()
        .map(|&(n, r)| subsample_indices(grid.len(), n, derive_seed(unit_seed(config, n, r), &[label("subsample")])))
        .collect::<Result<_>>()?;
    let mut union: Vec<usize> = picks.iter().flatten().copied().collect();
    union.sort_unstable();
    union.dedup();
    let sites: Vec<Point> = union.iter().map(|&i| grid[i]).collect();
    let field = simulate_gp(&gp_spec(), GP_BETA, &sites, derive_seed(config.seed, &[label("parent-field")]))?;
    let position_of = |i: usize| union.binary_search(&i).expect("index in union");

    let reference_idx: Vec<usize> = if union.len() <= REFERENCE_FIT_POINTS {
        (0..union.len()).collect()
    } else {
        let mut idx = subsample_indices(union.len(), REFERENCE_FIT_POINTS, derive_seed(config.seed, &[label("reference")]))?;
        idx.sort_unstable();
        idx
    };
    let reference = fit_mle(&field.select(&reference_idx)?, FitOptions::new(family, default_nugget_ratio(family)))?.params();

    let parts: Vec<CriterionTable> = units
        .into_par_iter()
        .zip(picks.into_par_iter())
        .map(|((n, r), pick)| {
            let local: Vec<usize> = pick.iter().map(|&i| position_of(i)).collect();
            let mut table = CriterionTable::new();
            let seed = unit_seed(config, n, r);
            let ds = match field.select(&local) {
                Ok(ds) => ds,
                Err(e) => {
                    for case in 1..=5u8 {
                        let name = format!("bayes_case{case}");
                        table.rows.push(failure_row(config.suite.tag(), &name, &family.tag(), n, r, &e));
                    }
                    return table;
                }
            };
            for case in 1..=5u8 {
                let name = format!("bayes_case{case}");
                match make_appendix_prior(case, reference.beta, reference.variance, n) {
                    Ok(prior) => push_validation(&mut table, config, &ds, Method::Bayesian, &name, family, prior, n, r, seed),
                    Err(e) => table.rows.push(failure_row(config.suite.tag(), &name, &family.tag(), n, r, &e)),
                }
            }
            table
        })
        .collect();
    let mut table = CriterionTable::new();
    for p in parts {
        table.extend(p);
    }
    Ok(PriorSensitivity {
        table,
        reference,
        simulated_sites: union.len(),
    })
}

fn push_triple(table: &mut CriterionTable, method: &str, cov: &str, n: usize, r: usize, t: ParameterTriple) {
    for (name, v) in [("beta", t.beta), ("sigma2", t.variance), ("phi", t.range)] {
        table.rows.push(row(Suite::Estimation.tag(), method, cov, n, r, name, v));
    }
}

/// MLE, posterior-mean and posterior-mode parameter estimates on the GP benchmark fields.
///
/// Rows use method `mle`, `posterior_mean` or `posterior_mode` and criterion `beta`, `sigma2` or `phi`.
pub fn run_estimation_study(config: &ExperimentConfig) -> Result<CriterionTable> {
    expect_suite(config, Suite::Estimation)?;
    let family = *config.families.first().expect("validated non-empty");
    let cov = family.tag();
    let opts = FitOptions::new(family, default_nugget_ratio(family));
    Ok(run_units(config, |n, r| {
        let mut table = CriterionTable::new();
        let ds = match gp_grid_dataset(n, gp_data_seed(config.seed, n, r)) {
            Ok(ds) => ds,
            Err(e) => {
                for m in ["mle", "posterior_mean", "posterior_mode"] {
                    table.rows.push(failure_row(Suite::Estimation.tag(), m, &cov, n, r, &e));
                }
                return table;
            }
        };
        match fit_mle(&ds, opts) {
            Ok(model) => push_triple(&mut table, "mle", &cov, n, r, model.params()),
            Err(e) => table.rows.push(failure_row(Suite::Estimation.tag(), "mle", &cov, n, r, &e)),
        }
        let summary = config
            .phi_grid
            .build(&ds)
            .and_then(|phi| PriorSpec::new(PriorKind::Vague, phi))
            .and_then(|prior| phi_posterior(&ds, opts, &prior))
            .and_then(|post| {
                let samples = post.sample(config.draws, unit_seed(config, n, r))?;
                Ok(post.summarize(&samples))
            });
        match summary {
            Ok(s) => {
                push_triple(&mut table, "posterior_mean", &cov, n, r, s.mean);
                push_triple(&mut table, "posterior_mode", &cov, n, r, s.mode);
            }
            Err(e) => {
                for m in ["posterior_mean", "posterior_mode"] {
                    table.rows.push(failure_row(Suite::Estimation.tag(), m, &cov, n, r, &e));
                }
            }
        }
        table
    }))
}

/// Kernel-smoothed posterior density of φ for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiCurve {
    pub n: usize,
    pub replicate: usize,
    pub density: PhiDensity,
    pub mode: f64,
    /// Uniform prior density on the support interval.
    pub prior_density: f64,
    pub support: (f64, f64),
    /// `sup |posterior density − prior density|` over the evaluation grid.
    pub prior_deviation: f64,
}

/// Output of [`run_posterior_phi_study`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhiStudy {
    pub curves: Vec<PhiCurve>,
    /// `(n, replicate, reason code)` of failed datasets.
    pub failures: Vec<(usize, usize, String)>,
}

impl PhiStudy {
    /// Long CSV `n,replicate,phi,density`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["n", "replicate", "phi", "density"])?;
        for c in &self.curves {
            match &c.density {
                PhiDensity::Curve { grid, density, .. } => {
                    for (p, d) in grid.iter().zip(density) {
                        w.write_record([c.n.to_string(), c.replicate.to_string(), p.to_string(), d.to_string()])?;
                    }
                }
                PhiDensity::PointMass { phi } => {
                    w.write_record([c.n.to_string(), c.replicate.to_string(), phi.to_string(), "inf".to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn phi_curve(config: &ExperimentConfig, family: Family, n: usize, r: usize) -> Result<PhiCurve> {
    let seed = unit_seed(config, n, r);
    let design = sample_uniform(gp_rect(), n, derive_seed(seed, &[label("design")]))?;
    let ds = simulate_gp(&gp_spec(), GP_BETA, &design, derive_seed(seed, &[label("field")]))?;
    let phi = config.phi_grid.build(&ds)?;
    let lo = phi.support()[0];
    let hi = *phi.support().last().expect("non-empty support");
    let prior = PriorSpec::new(PriorKind::Vague, phi)?;
    let post = phi_posterior(&ds, FitOptions::new(family, default_nugget_ratio(family)), &prior)?;
    let samples = post.sample(config.draws, seed)?;
    let density = posterior_phi_density(&samples)?;
    let prior_density = if hi > lo { 1.0 / (hi - lo) } else { f64::INFINITY };
    let prior_at = |p: f64| if p >= lo && p <= hi { prior_density } else { 0.0 };
    let prior_deviation = match &density {
        PhiDensity::Curve { grid, density, .. } => grid
            .iter()
            .zip(density)
            .map(|(p, d)| (d - prior_at(*p)).abs())
            .fold(0.0, f64::max),
        PhiDensity::PointMass { .. } => f64::INFINITY,
    };
    Ok(PhiCurve {
        n,
        replicate: r,
        mode: density.mode(),
        density,
        prior_density,
        support: (lo, hi),
        prior_deviation,
    })
}

/// Posterior φ densities for random designs of the GP benchmark model.
pub fn run_posterior_phi_study(config: &ExperimentConfig) -> Result<PhiStudy> {
    expect_suite(config, Suite::PhiPosterior)?;
    let family = *config.families.first().expect("validated non-empty");
    let results: Vec<((usize, usize), Result<PhiCurve>)> = units(config)
        .into_par_iter()
        .map(|(n, r)| ((n, r), phi_curve(config, family, n, r)))
        .collect();
    let mut study = PhiStudy::default();
    for ((n, r), res) in results {
        match res {
            Ok(c) => study.curves.push(c),
            Err(e) => study.failures.push((n, r, e.code().to_string())),
        }
    }
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Scale;

    fn small(suite: Suite, sizes: Vec<usize>, reps: usize) -> ExperimentConfig {
        ExperimentConfig::new(suite, Scale::Custom { replicates: reps, draws: 50 })
            .with_sizes(sizes)
            .with_seed(7)
    }

    #[test]
    fn gp_row_accounting() {
        let t = run_gp_benchmark(&small(Suite::Gp, vec![16], 1)).unwrap();
        assert_eq!(t.rows.len(), 2 * 4);
        assert_eq!(t.failure_count(), 0);
        assert_eq!(t.curves.len(), 2);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let c = small(Suite::Gp, vec![16, 25], 2);
        let a = run_gp_benchmark(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_gp_benchmark(&c).unwrap());
        let bits = |t: &CriterionTable| t.rows.iter().map(|r| r.value.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.rows.len(), b.rows.len());
    }

    #[test]
    fn resample_full_size_runs_once() {
        let grid = make_grid(gp_rect(), 5).unwrap();
        let parent = simulate_gp(&gp_spec(), GP_BETA, &grid, 3).unwrap();
        let t = run_resample_benchmark(&parent, &small(Suite::Resample, vec![20, 25], 3)).unwrap();
        let full: Vec<_> = t.rows.iter().filter(|r| r.n == 25).collect();
        assert_eq!(full.len(), 2 * 4);
        assert!(full.iter().all(|r| r.replicate == 0));
        assert_eq!(t.rows.iter().filter(|r| r.n == 20).count(), 3 * 2 * 4);
        assert!(run_resample_benchmark(&parent, &small(Suite::Resample, vec![30], 1)).is_err());
    }

    #[test]
    fn estimation_row_accounting() {
        let t = run_estimation_study(&small(Suite::Estimation, vec![16, 25], 2)).unwrap();
        assert_eq!(t.rows.len(), 2 * 2 * 3 * 3);
    }

    #[test]
    fn failures_are_rows() {
        let c = small(Suite::Function, vec![20], 1);
        let err = Error::SingularSystem { index: 3, pivot: -1e-3 };
        let t = validate_all(&c, Err(err), 20, 0, 1);
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.failure_code() == Some("singular_system") && r.value.is_nan()));
        let mut wrong = c.clone();
        wrong.suite = Suite::Gp;
        assert!(run_function_benchmark(&wrong).is_err());
    }

    #[test]
    fn phi_curves_integrate_to_one() {
        let s = run_posterior_phi_study(&small(Suite::PhiPosterior, vec![25], 1).with_draws(300)).unwrap();
        assert_eq!(s.curves.len(), 1);
        assert!((s.curves[0].density.integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn prior_sensitivity_small() {
        let out = run_prior_sensitivity(&small(Suite::PriorSens, vec![20], 2)).unwrap();
        assert_eq!(out.table.rows.len(), 2 * 5 * 4);
        assert!(out.simulated_sites <= 40);
        assert!(out.reference.variance > 0.0);
    }
}
