//! Config-driven command-line front end.
//!
//! Every subcommand reads a JSON [`RunConfig`] and writes `result.json` plus
//! CSV/SVG artifacts into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use fracspec::capacity::{
    capacity, capacity_relative, compactness_diagnostic, concentration_at, hardy_norm_estimate, CapacityOptions,
    CellSet, CompactnessOptions, HardyFamily,
};
use fracspec::eigen::{eigen_sequence, linear_oracle, EigenOptions, Weight};
use fracspec::io::{emit_plot, PlotData};
use fracspec::nonlocal::{nonlocal_gradient, seminorm_p};
use fracspec::rearrangement::{
    decreasing_rearrangement, lorentz_norm, lorentz_quasi_norm, maximal_function, schwarz_symmetrization,
};
use fracspec::verify::{run_suite, VerifyConfig};
use fracspec::{sample, Error, FracParams, Grid, GridFunction, GridSpec, KernelTable, Region, WeightSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_CONVERGENCE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CONFIG: i32 = 65;

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "FRACSPEC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fracspec", version, about = "Fractional Sobolev energies, capacities and weighted eigenproblems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Discrete (s,p) seminorm of `function`.
    Seminorm(Common),
    /// Nonlocal gradient field |D^s u| of `function`.
    Gradient(Common),
    /// Decreasing rearrangement, maximal function and radial rearrangement.
    Rearrange(Common),
    /// Lorentz quasi-norm and norm of `function`.
    Lorentz(Common),
    /// Capacity of `set`, optionally relative to `domain`.
    Capacity(Common),
    /// Capacitary norm estimate of `weight`.
    HardyNorm(Common),
    /// Concentration profiles and the compactness verdict for `weight`.
    Concentration(Common),
    /// Eigenpairs of the weighted fractional p-Laplacian.
    Eigen {
        #[command(flatten)]
        common: Common,
        /// Number of eigenpairs.
        #[arg(long, default_value_t = 1)]
        levels: usize,
        /// Cross-check against the dense generalized eigensolver (p = 2).
        #[arg(long)]
        oracle: bool,
    },
    /// Seeded property suite.
    Verify(Common),
}

/// Lorentz exponents; a missing `q` means `q = inf`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzExponents {
    pub p: f64,
    #[serde(default)]
    pub q: Option<f64>,
}

impl Default for LorentzExponents {
    fn default() -> Self {
        Self { p: 2.0, q: None }
    }
}

fn default_params() -> FracParams {
    FracParams { s: 0.4, p: 2.0 }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_params")]
    pub params: FracParams,
    /// Test function for `seminorm`, `gradient`, `rearrange` and `lorentz`.
    #[serde(default)]
    pub function: Option<WeightSpec>,
    /// Weight (positive part `w1`, or a signed weight when
    /// `negative_weight` is absent).
    #[serde(default)]
    pub weight: Option<WeightSpec>,
    /// Negative part `w2` of the weight.
    #[serde(default)]
    pub negative_weight: Option<WeightSpec>,
    #[serde(default)]
    pub set: Option<Region>,
    #[serde(default)]
    pub domain: Option<Region>,
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    /// Radii for the local concentration profile, strictly decreasing.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub lorentz: LorentzExponents,
    #[serde(default)]
    pub capacity: CapacityOptions,
    #[serde(default)]
    pub hardy: HardyFamily,
    #[serde(default)]
    pub compactness: CompactnessOptions,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Core(e) => error_code(e),
        }
    }
}

/// Exit code for a library error.
pub fn error_code(e: &Error) -> i32 {
    if e.is_convergence_failure() {
        return EXIT_CONVERGENCE;
    }
    match e {
        Error::InvalidConfig(_)
        | Error::InvalidParams(_)
        | Error::InvalidGrid(_)
        | Error::InvalidSpec(_)
        | Error::ExtRadiusTooSmall { .. }
        | Error::NonFiniteSample { .. }
        | Error::Csv(_)
        | Error::Json(_) => EXIT_CONFIG,
        Error::Check { source, .. } => error_code(source),
        _ => EXIT_DOMAIN,
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match thread_cap() {
        Ok(Some(n)) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(Failure::Usage(format!("cannot build a pool of {n} threads: {e}"))),
        },
        Ok(None) => run(cli.command),
        Err(f) => Err(f),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("fracspec: {}", describe(&f));
            f.code()
        }
    }
}

fn describe(f: &Failure) -> String {
    match f {
        Failure::Usage(m) => format!("usage error: {m}"),
        Failure::Config(m) => format!("malformed config: {m}"),
        Failure::Core(e) => e.to_string(),
    }
}

fn thread_cap() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Reads a config file; relative `from_file` paths are resolved against the
/// config's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for spec in [&mut cfg.function, &mut cfg.weight, &mut cfg.negative_weight].into_iter().flatten() {
        resolve_paths(spec, base);
    }
    Ok(cfg)
}

fn resolve_paths(spec: &mut WeightSpec, base: &Path) {
    match spec {
        WeightSpec::FromFile { path } if path.is_relative() => *path = base.join(&*path),
        WeightSpec::Difference { positive, negative } => {
            resolve_paths(positive, base);
            resolve_paths(negative, base);
        }
        WeightSpec::Product { factors } => factors.iter_mut().for_each(|f| resolve_paths(f, base)),
        _ => {}
    }
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
}

impl Run {
    fn new(common: &Common) -> Result<Self, Failure> {
        let cfg = load_config(&common.config).map_err(Failure::Config)?;
        let out = common.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out)?;
        Ok(Self { cfg, out })
    }

    fn grid(&self) -> Result<Arc<Grid>, Failure> {
        Ok(self.cfg.grid.grid()?)
    }

    fn kernel(&self) -> Result<KernelTable, Failure> {
        Ok(self.cfg.grid.kernel(self.cfg.params)?)
    }

    fn field(&self, grid: &Arc<Grid>, spec: &Option<WeightSpec>, name: &str) -> Result<GridFunction, Failure> {
        let spec = spec.as_ref().ok_or_else(|| Failure::Config(format!("missing `{name}`")))?;
        Ok(sample(grid, spec)?)
    }

    fn function(&self, grid: &Arc<Grid>) -> Result<GridFunction, Failure> {
        self.field(grid, &self.cfg.function, "function")
    }

    fn weight(&self, grid: &Arc<Grid>) -> Result<GridFunction, Failure> {
        self.field(grid, &self.cfg.weight, "weight")
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn plot(&self, data: PlotData<'_>, name: &str) -> Result<(), Failure> {
        emit_plot(data, &self.path(name))?;
        Ok(())
    }

    fn finish(&self, result: Value) -> Result<i32, Failure> {
        let path = self.path("result.json");
        fs::write(&path, serde_json::to_string_pretty(&result).expect("json values serialize") + "\n")?;
        println!("wrote {}", path.display());
        Ok(EXIT_OK)
    }
}

fn run(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Seminorm(c) => seminorm(&Run::new(&c)?),
        Command::Gradient(c) => gradient(&Run::new(&c)?),
        Command::Rearrange(c) => rearrange(&Run::new(&c)?),
        Command::Lorentz(c) => lorentz(&Run::new(&c)?),
        Command::Capacity(c) => capacity_cmd(&Run::new(&c)?),
        Command::HardyNorm(c) => hardy(&Run::new(&c)?),
        Command::Concentration(c) => concentration(&Run::new(&c)?),
        Command::Eigen { common, levels, oracle } => eigen(&Run::new(&common)?, levels, oracle),
        Command::Verify(c) => verify(&Run::new(&c)?),
    }
}

fn seminorm(run: &Run) -> Result<i32, Failure> {
    let kt = run.kernel()?;
    let u = run.function(kt.grid())?;
    let v = seminorm_p(&u, &kt)?;
    println!("seminorm {:.12e}", v.value);
    run.finish(json!({
        "seminorm": v.value,
        "interior_part": v.interior_part,
        "boundary_part": v.boundary_part,
    }))
}

fn gradient(run: &Run) -> Result<i32, Failure> {
    let kt = run.kernel()?;
    let u = run.function(kt.grid())?;
    let g = nonlocal_gradient(&u, &kt)?;
    run.plot(PlotData::Field(&g), "gradient.svg")?;
    run.finish(json!({
        "seminorm": seminorm_p(&u, &kt)?.value,
        "max_gradient": g.max_abs(),
        "field": "gradient.csv",
    }))
}

fn rearrange(run: &Run) -> Result<i32, Failure> {
    let grid = run.grid()?;
    let f = run.function(&grid)?;
    let fstar = decreasing_rearrangement(&f);
    let fss = maximal_function(&fstar)?;
    let sym = schwarz_symmetrization(&f);
    run.plot(PlotData::Step(&fstar), "decreasing.svg")?;
    run.plot(PlotData::Step(&fss), "maximal.svg")?;
    run.plot(PlotData::Field(&sym), "symmetrized.svg")?;
    run.finish(json!({
        "total_measure": fstar.total_measure(),
        "sup": fstar.levels.first().copied().unwrap_or(0.0),
        "l1_norm": fstar.integral(),
        "files": ["decreasing.csv", "maximal.csv", "symmetrized.csv"],
    }))
}

fn lorentz(run: &Run) -> Result<i32, Failure> {
    let grid = run.grid()?;
    let f = run.function(&grid)?;
    let p = run.cfg.lorentz.p;
    let q = run.cfg.lorentz.q.unwrap_or(f64::INFINITY);
    let quasi = lorentz_quasi_norm(&f, p, q)?;
    let norm = lorentz_norm(&f, p, q)?;
    println!("quasi-norm {quasi:.12e}, norm {norm:.12e}");
    run.finish(json!({
        "p": p,
        "q": if q.is_finite() { json!(q) } else { json!("inf") },
        "quasi_norm": finite_or_string(quasi),
        "norm": finite_or_string(norm),
    }))
}

fn finite_or_string(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

fn region_set(grid: &Arc<Grid>, region: &Region) -> CellSet {
    CellSet::from_predicate(grid.clone(), |x| region.contains(x))
}

fn capacity_cmd(run: &Run) -> Result<i32, Failure> {
    let kt = run.kernel()?;
    let grid = kt.grid().clone();
    let region = run.cfg.set.as_ref().ok_or_else(|| Failure::Config("missing `set`".into()))?;
    let f = region_set(&grid, region);
    let r = match &run.cfg.domain {
        Some(d) => capacity_relative(&f, &region_set(&grid, d), &kt, &run.cfg.capacity)?,
        None => capacity(&f, &kt, &run.cfg.capacity)?,
    };
    println!("capacity {:.12e} ({} cells, {} iterations)", r.value, f.count(), r.iterations);
    run.plot(PlotData::Field(&r.minimizer), "minimizer.svg")?;
    run.finish(json!({
        "capacity": r.value,
        "cells": f.count(),
        "measure": f.measure(),
        "iterations": r.iterations,
        "grad_norm": r.grad_norm,
        "degenerate": r.degenerate,
        "minimizer": "minimizer.csv",
    }))
}

fn hardy(run: &Run) -> Result<i32, Failure> {
    let kt = run.kernel()?;
    let w = run.weight(kt.grid())?;
    let est = hardy_norm_estimate(&w, &kt, &run.cfg.hardy)?;
    println!("weight-norm estimate {:.12e} over {} candidates", est.estimate, est.sweep.len());
    run.finish(serde_json::to_value(&est).map_err(Error::from)?)
}

fn concentration(run: &Run) -> Result<i32, Failure> {
    let kt = run.kernel()?;
    let grid = kt.grid().clone();
    let w = run.weight(&grid)?;
    let h = grid.spacing();
    let mut result = serde_json::Map::new();
    if let Some(x) = &run.cfg.point {
        let radii = run.cfg.radii.clone().unwrap_or_else(|| vec![8.0 * h, 4.0 * h, 2.0 * h]);
        let profile = concentration_at(&w, &kt, x, &radii, &run.cfg.hardy)?;
        run.plot(PlotData::Series { x: &profile.radii, y: &profile.norm_estimates }, "concentration.svg")?;
        result.insert("point".into(), json!(x));
        result.insert("profile".into(), serde_json::to_value(&profile).map_err(Error::from)?);
    }
    let opts = CompactnessOptions { family: run.cfg.hardy.clone(), ..run.cfg.compactness.clone() };
    let verdict = compactness_diagnostic(&w, &kt, &opts)?;
    println!(
        "C* {:.6e}, C(inf) {:.6e}, tolerance {:.6e}: {}",
        verdict.c_star,
        verdict.c_infinity,
        verdict.tolerance,
        if verdict.compact_indicating { "compact-indicating" } else { "not compact-indicating" }
    );
    result.insert("verdict".into(), serde_json::to_value(&verdict).map_err(Error::from)?);
    run.finish(Value::Object(result))
}

fn eigen(run: &Run, levels: usize, oracle: bool) -> Result<i32, Failure> {
    if levels == 0 {
        return Err(Failure::Usage("--levels must be at least 1".into()));
    }
    let kt = run.kernel()?;
    let grid = kt.grid().clone();
    let w = run.weight(&grid)?;
    let wt = match &run.cfg.negative_weight {
        Some(spec) => Weight::new(w, sample(&grid, spec)?)?,
        None => Weight::from_signed(&w)?,
    };
    let opts = EigenOptions { seed: run.cfg.seed, ..run.cfg.eigen.clone() };
    let pairs = eigen_sequence(&wt, &kt, levels, &opts)?;
    let mut entries = Vec::new();
    for (k, r) in pairs.iter().enumerate() {
        let name = format!("eigenfunction_{}.svg", k + 1);
        run.plot(PlotData::Field(&r.u), &name)?;
        println!("lambda_{} = {:.12e} (residual {:.2e}, {:?})", k + 1, r.lambda, r.eigen_residual, r.sign.tag);
        let mut e = serde_json::to_value(r).map_err(Error::from)?;
        e["eigenfunction"] = json!(format!("eigenfunction_{}.csv", k + 1));
        entries.push(e);
    }
    let mut result = json!({ "levels": entries });
    if oracle {
        let exact = linear_oracle(&wt, &kt)?;
        let lambdas: Vec<f64> = exact.iter().take(levels).map(|o| o.lambda).collect();
        let errors: Vec<f64> = pairs.iter().zip(&lambdas).map(|(r, l)| ((r.lambda.abs() - l) / l).abs()).collect();
        println!("oracle relative errors {errors:?}");
        result["oracle"] = json!({ "lambdas": lambdas, "relative_errors": errors });
    }
    run.finish(result)
}

fn verify(run: &Run) -> Result<i32, Failure> {
    let cfg = VerifyConfig { seed: run.cfg.seed, grid: run.cfg.grid, params: run.cfg.params, ..run.cfg.verify.clone() };
    let report = run_suite(&cfg)?;
    fs::write(run.path("report.json"), report.to_json() + "\n")?;
    fs::write(run.path("report.txt"), report.table())?;
    print!("{}", report.table());
    Ok(if report.all_pass { EXIT_OK } else { EXIT_DOMAIN })
}
