use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use krigeval::bayes::{phi_posterior, PhiGrid, PriorKind, PriorSpec};
use krigeval::dataset::{make_grid, read_csv, read_points_csv, sample_uniform, write_csv, write_csv_to, Point, Rect, SpatialDataset};
use krigeval::experiments::{
    run_covariance_selection, run_estimation_study, run_function_benchmark, run_gp_benchmark,
    run_posterior_phi_study, run_prior_sensitivity, run_resample_benchmark, CriterionTable, ExperimentConfig,
    Scale, Suite,
};
use krigeval::ordinary::{default_nugget_ratio, fit_mle, range_bracket, FitOptions};
use krigeval::stats::normal_quantile;
use krigeval::validation::{regular_levels, validate, LooMode, Method, ValidationConfig};
use krigeval::{CovarianceSpec, Error, Family};

use crate::args::{BenchmarkArgs, Command, FamilyArgs, LooModeArg, MethodArg, ModelArgs, PredictArgs, SimulateArgs, ValidateArgs};

/// Quantile orders reported by `predict`.
const PREDICT_QUANTILES: [f64; 5] = [0.025, 0.31, 0.5, 0.69, 0.975];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{failed} replicate(s) failed; see the manifest")]
    Partial { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Partial { .. } => 4,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Validate(a) => validate_cmd(a),
        Command::Benchmark(a) => benchmark(a),
    }
}

fn family(a: &FamilyArgs) -> CliResult<Family> {
    Ok(Family::parse(&a.family, a.nu)?)
}

fn parse_rect(s: &str) -> CliResult<Rect> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--rect expects four numbers, got {s:?}")))?;
    if v.len() != 4 {
        return Err(CliError::Usage(format!("--rect expects x_min,x_max,y_min,y_max, got {s:?}")));
    }
    let rect = Rect::new(v[0], v[1], v[2], v[3]);
    rect.validate()?;
    Ok(rect)
}

fn parse_phi_grid(s: Option<&str>) -> CliResult<PhiGrid> {
    let Some(s) = s else {
        return Ok(PhiGrid::default());
    };
    let bad = || CliError::Usage(format!("--phi-grid expects COUNT or LO:HI:COUNT, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [count] => {
            let count: usize = count.parse().map_err(|_| bad())?;
            match PhiGrid::default() {
                PhiGrid::RelativeToMaxDistance { lo_fraction, hi_fraction, .. } => Ok(PhiGrid::RelativeToMaxDistance {
                    count,
                    lo_fraction,
                    hi_fraction,
                }),
                other => Ok(other),
            }
        }
        [lo, hi, count] => {
            let lo: f64 = lo.parse().map_err(|_| bad())?;
            let hi: f64 = hi.parse().map_err(|_| bad())?;
            let count: usize = count.parse().map_err(|_| bad())?;
            let prior = krigeval::bayes::PhiPrior::uniform_grid(lo, hi, count)?;
            Ok(PhiGrid::Explicit {
                support: prior.support().to_vec(),
            })
        }
        _ => Err(bad()),
    }
}

fn loo_mode(m: LooModeArg) -> LooMode {
    match m {
        LooModeArg::Fixed => LooMode::Fixed,
        LooModeArg::Reestimate => LooMode::Reestimate,
    }
}

/// Writes `text` to `out` and prints the path, or prints `text` to stdout.
fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => {
            fs::write(p, text)?;
            println!("{}", p.display());
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let fam = family(&a.family)?;
    if a.sigma2.is_nan() || a.sigma2 <= 0.0 {
        return Err(CliError::Usage(format!("--sigma2 must be > 0 (got {})", a.sigma2)));
    }
    let rect = parse_rect(&a.rect)?;
    let spec = CovarianceSpec::new(fam, a.phi, a.sigma2, a.tau2)?;
    let positions = match (a.grid, a.n) {
        (Some(k), None) => make_grid(rect, k)?,
        (None, Some(n)) => sample_uniform(rect, n, krigeval::rng::derive_seed(a.seed, &[krigeval::rng::label("design")]))?,
        _ => return Err(CliError::Usage("give exactly one of --grid or --n".into())),
    };
    let config = json!({
        "family": fam.tag(),
        "phi": a.phi,
        "sigma2": a.sigma2,
        "tau2": a.tau2,
        "beta": a.beta,
        "grid": a.grid,
        "n": positions.len(),
        "rect": [rect.x_min, rect.x_max, rect.y_min, rect.y_max],
        "seed": a.seed,
    });
    eprintln!("{}", serde_json::to_string(&config)?);
    let ds = krigeval::simulate_gp(&spec, a.beta, &positions, a.seed)?;
    match &a.out {
        Some(p) => {
            write_csv(&ds, p)?;
            println!("{}", p.display());
        }
        None => write_csv_to(&ds, &mut io::stdout().lock())?,
    }
    Ok(())
}

fn options(m: &ModelArgs) -> CliResult<FitOptions> {
    let fam = family(&m.family)?;
    let nugget = m.tau2.unwrap_or_else(|| default_nugget_ratio(fam));
    if !(nugget >= 0.0 && nugget.is_finite()) {
        return Err(CliError::Usage(format!("--tau2 must be >= 0 (got {nugget})")));
    }
    Ok(FitOptions::new(fam, nugget))
}

fn load(path: &Path) -> CliResult<SpatialDataset> {
    if !path.exists() {
        return Err(CliError::Usage(format!("data file {} not found", path.display())));
    }
    Ok(read_csv(path)?)
}

fn bayes_prior(m: &ModelArgs, ds: &SpatialDataset) -> CliResult<PriorSpec> {
    let grid = parse_phi_grid(m.phi_grid.as_deref())?;
    Ok(PriorSpec::new(PriorKind::Vague, grid.build(ds)?)?)
}

fn fit(m: ModelArgs) -> CliResult<()> {
    let ds = load(&m.data)?;
    let opts = options(&m)?;
    let report = match m.method {
        MethodArg::Ok => {
            let model = fit_mle(&ds, opts)?;
            let p = model.params();
            json!({
                "method": "ok",
                "family": opts.family.tag(),
                "nugget_ratio": opts.nugget_ratio,
                "n": ds.len(),
                "beta": p.beta,
                "variance": p.variance,
                "range": p.range,
                "log_likelihood": model.log_likelihood(),
                "range_bracket": range_bracket(&ds)?,
            })
        }
        MethodArg::Bayes => {
            let prior = bayes_prior(&m, &ds)?;
            let post = phi_posterior(&ds, opts, &prior)?;
            let samples = post.sample(m.draws, m.seed)?;
            let summary = post.summarize(&samples);
            json!({
                "method": "bayes",
                "family": opts.family.tag(),
                "nugget_ratio": opts.nugget_ratio,
                "n": ds.len(),
                "draws": m.draws,
                "seed": m.seed,
                "phi_grid": post.support(),
                "prior_weights": prior.phi.weights(),
                "posterior_weights": post.weights(),
                "posterior_mean": summary.mean,
                "posterior_mode": summary.mode,
            })
        }
    };
    emit(&serde_json::to_string_pretty(&report)?, m.out.as_deref())
}

fn targets(a: &PredictArgs, ds: &SpatialDataset) -> CliResult<Vec<Point>> {
    match (&a.targets, a.grid) {
        (Some(p), None) => {
            if !p.exists() {
                return Err(CliError::Usage(format!("targets file {} not found", p.display())));
            }
            Ok(read_points_csv(p)?)
        }
        (None, Some(k)) => {
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for p in ds.positions() {
                x0 = x0.min(p.x);
                x1 = x1.max(p.x);
                y0 = y0.min(p.y);
                y1 = y1.max(p.y);
            }
            Ok(make_grid(Rect::new(x0, x1, y0, y1), k)?)
        }
        _ => Err(CliError::Usage("give exactly one of --targets or --grid".into())),
    }
}

fn predict(a: PredictArgs) -> CliResult<()> {
    let m = &a.model;
    let ds = load(&m.data)?;
    let opts = options(m)?;
    let pts = targets(&a, &ds)?;
    let mut rows: Vec<(f64, f64, Vec<f64>)> = Vec::with_capacity(pts.len());
    match m.method {
        MethodArg::Ok => {
            let model = fit_mle(&ds, opts)?;
            for t in &pts {
                let p = model.predict(t)?;
                let sd = p.variance.sqrt();
                let q = PREDICT_QUANTILES
                    .iter()
                    .map(|&q| if sd == 0.0 { p.mean } else { p.mean + sd * normal_quantile(q) })
                    .collect();
                rows.push((p.mean, p.variance, q));
            }
        }
        MethodArg::Bayes => {
            let prior = bayes_prior(m, &ds)?;
            let dists = krigeval::predict_bayes(&ds, opts, &prior, &pts, m.draws, m.seed)?;
            for d in dists {
                let q = PREDICT_QUANTILES.iter().map(|&q| d.quantile(q)).collect();
                rows.push((d.mean(), d.variance(), q));
            }
        }
    }
    let mut text = String::from("x,y,mean,variance");
    for q in PREDICT_QUANTILES {
        text.push_str(&format!(",q{q}"));
    }
    text.push('\n');
    for (t, (mean, var, qs)) in pts.iter().zip(rows) {
        text.push_str(&format!("{},{},{mean},{var}", t.x, t.y));
        for q in qs {
            text.push_str(&format!(",{q}"));
        }
        text.push('\n');
    }
    emit(&text, m.out.as_deref())
}

fn curve_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}_alpha.csv"))
}

fn validate_cmd(a: ValidateArgs) -> CliResult<()> {
    let m = &a.model;
    let ds = load(&m.data)?;
    let opts = options(m)?;
    if a.alpha_levels == 0 {
        return Err(CliError::Usage("--alpha-levels must be at least 1".into()));
    }
    let method = match m.method {
        MethodArg::Ok => Method::Ordinary,
        MethodArg::Bayes => Method::Bayesian,
    };
    let mut config = ValidationConfig::new(method, opts.family);
    config.nugget_ratio = opts.nugget_ratio;
    config.loo_mode = loo_mode(a.loo_mode);
    config.draws = m.draws;
    config.phi_grid = parse_phi_grid(m.phi_grid.as_deref())?;
    config.levels = regular_levels(a.alpha_levels);
    config.seed = m.seed;
    let report = validate(&ds, &config)?;
    emit(&report.to_json()?, m.out.as_deref())?;
    let curve = a.curve_out.clone().or_else(|| m.out.as_deref().map(curve_path));
    if let Some(p) = curve {
        fs::write(&p, report.to_csv())?;
        println!("{}", p.display());
    }
    Ok(())
}

fn failure_list(table: &CriterionTable) -> Vec<Value> {
    table
        .failures()
        .map(|r| {
            json!({
                "method": r.method,
                "covariance": r.covariance,
                "n": r.n,
                "replicate": r.replicate,
                "code": r.failure_code(),
            })
        })
        .collect()
}

/// One JSON report per `(method, covariance)` of a single-replicate table.
fn write_group_reports(table: &CriterionTable, dir: &Path) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for c in &table.curves {
        let scalars: serde_json::Map<String, Value> = table
            .rows
            .iter()
            .filter(|r| r.method == c.method && r.covariance == c.covariance && r.n == c.n && r.replicate == c.replicate)
            .map(|r| (r.criterion.clone(), json!(r.value)))
            .collect();
        let report = json!({
            "method": c.method,
            "covariance": c.covariance,
            "n": c.n,
            "replicate": c.replicate,
            "criteria": scalars,
            "alpha_curve": c.curve,
        });
        let path = dir.join(format!("{}_{}_r{}.json", c.method, c.covariance, c.replicate));
        fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        paths.push(path);
    }
    Ok(paths)
}

fn benchmark(a: BenchmarkArgs) -> CliResult<()> {
    let suite: Suite = a.suite.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let scale: Scale = a.scale.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let mut config = ExperimentConfig::new(suite, scale).with_seed(a.seed);
    if let Some(r) = a.replicates {
        config.replicates = r;
    }
    if let Some(m) = a.draws {
        config.draws = m;
    }
    if let Some(s) = &a.sizes {
        config.sizes = s.clone();
    }
    config.loo_mode = loo_mode(a.loo_mode);
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let parent = match (suite, &a.data) {
        (Suite::Resample, Some(p)) => Some(load(p)?),
        (Suite::Resample, None) => {
            return Err(CliError::Usage("--suite resample needs --data <CSV>".into()));
        }
        _ => None,
    };
    fs::create_dir_all(&a.out_dir)?;
    let started = Instant::now();
    let mut outputs: Vec<PathBuf> = Vec::new();
    let mut extra = json!({});
    let failures: Vec<Value> = match suite {
        Suite::PriorSens => {
            let out = run_prior_sensitivity(&config)?;
            outputs.extend(out.table.write_dir(&a.out_dir)?);
            extra = json!({ "reference": out.reference, "simulated_sites": out.simulated_sites });
            failure_list(&out.table)
        }
        Suite::PhiPosterior => {
            let study = run_posterior_phi_study(&config)?;
            let csv = a.out_dir.join("phi_density.csv");
            study.write_csv(&csv)?;
            let modes = a.out_dir.join("phi_curves.json");
            let summary: Vec<Value> = study
                .curves
                .iter()
                .map(|c| {
                    json!({
                        "n": c.n,
                        "replicate": c.replicate,
                        "mode": c.mode,
                        "support": c.support,
                        "prior_density": c.prior_density,
                        "prior_deviation": c.prior_deviation,
                        "integral": c.density.integral(),
                    })
                })
                .collect();
            fs::write(&modes, serde_json::to_string_pretty(&summary)?)?;
            outputs.extend([csv, modes]);
            study
                .failures
                .iter()
                .map(|(n, r, code)| json!({ "n": n, "replicate": r, "code": code }))
                .collect()
        }
        _ => {
            let table = match suite {
                Suite::Gp => run_gp_benchmark(&config)?,
                Suite::Covsel => run_covariance_selection(&config)?,
                Suite::Function => run_function_benchmark(&config)?,
                Suite::Resample => run_resample_benchmark(parent.as_ref().expect("checked above"), &config)?,
                Suite::Estimation => run_estimation_study(&config)?,
                Suite::PriorSens | Suite::PhiPosterior => unreachable!("handled above"),
            };
            outputs.extend(table.write_dir(&a.out_dir)?);
            if suite == Suite::Covsel {
                outputs.extend(write_group_reports(&table, &a.out_dir.join("reports"))?);
            }
            failure_list(&table)
        }
    };
    let manifest = json!({
        "suite": suite.tag(),
        "scale": a.scale,
        "config": config,
        "data": a.data,
        "jobs": rayon::current_num_threads(),
        "versions": {
            "krigeval": env!("CARGO_PKG_VERSION"),
            "krigeval-cli": env!("CARGO_PKG_VERSION"),
        },
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "outputs": outputs,
        "failures": failures,
        "details": extra,
    });
    let manifest_path = a.out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    for p in &outputs {
        println!("{}", p.display());
    }
    println!("{}", manifest_path.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial { failed: failures.len() })
    }
}
