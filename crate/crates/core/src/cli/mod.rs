//! Command-line front end.
//!
//! Exit codes: 0 all checks pass, 1 usage or configuration error, 2 a check
//! failed, 3 numerical failure (quadrature, tabulation, singular design).

pub mod config;
pub mod report;
pub mod suites;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::process_sim::{simulate_y, PathBatch, TimeGrid};
use crate::qh_verify::moment_warning;
use crate::randomization::RandomizationLaw;
use config::{parse_groups, parse_list, ExperimentConfig, Format, Settings};
use report::{CheckEntry, RunReport};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Library(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(e) if e.is_numerical() || matches!(e, Error::SingularDesign(_)) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bimeixner",
    version,
    about = "Stitched Lévy-Meixner processes: simulation and quadratic-harness checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct Common {
    /// TOML file with any of the options below; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// wiener, poisson, gamma, negative-binomial, hyperbolic-secant
    #[arg(long)]
    family: Option<String>,
    /// Negative binomial parameter in (0, 1)
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Number of simulated paths [default: 1000000]
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated times
    #[arg(long)]
    grid: Option<String>,
    /// Semicolon-separated s,t,u triples
    #[arg(long)]
    triples: Option<String>,
    /// Semicolon-separated s,u pairs
    #[arg(long)]
    pairs: Option<String>,
    /// Largest accepted |z| [default: 4]
    #[arg(long)]
    threshold: Option<f64>,
    /// Worker threads, 0 for all cores
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// y for the randomized Lévy process, z for the stitched process
    #[arg(long, default_value = "z")]
    process: String,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta: f64,
    /// Comma-separated time lengths
    #[arg(long, default_value = "0.3,1,2.5")]
    times: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quadratic-harness parameters, theorem formula against closed forms
    Params(Common),
    /// Mean and variance of kappa'(Theta), sampled and by quadrature
    Moments(Common),
    /// Write simulated paths as CSV or JSON
    Simulate(SimulateArgs),
    /// Covariance of the stitched process
    VerifyCovariance(Common),
    /// Linear conditional mean given two surrounding times
    VerifyHarness(Common),
    /// Quadratic conditional variance given two surrounding times
    VerifyQvar(Common),
    /// Moment identities, martingale and posterior-mean checks
    VerifyIdentities(Common),
    /// Decay conditions of the randomization law at the domain ends
    CheckAssumptions(Common),
    /// Mass, mean and variance of the increment densities
    Density(DensityArgs),
    /// Everything above except simulate and density
    VerifyAll(Common),
}

impl Common {
    fn settings(&self) -> Result<Settings, CliError> {
        let flags = Settings {
            family: self.family.clone(),
            q: self.q,
            p: self.p,
            r: self.r,
            paths: self.paths,
            seed: self.seed,
            grid: self
                .grid
                .as_deref()
                .map(parse_list)
                .transpose()
                .map_err(CliError::Usage)?,
            triples: self
                .triples
                .as_deref()
                .map(parse_groups::<3>)
                .transpose()
                .map_err(CliError::Usage)?,
            pairs: self
                .pairs
                .as_deref()
                .map(parse_groups::<2>)
                .transpose()
                .map_err(CliError::Usage)?,
            threshold: self.threshold,
            threads: self.threads,
            format: self.format,
            out: self.out.clone(),
        };
        let file = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        Ok(flags.over(file))
    }
}

/// What a subcommand produced.
enum Output {
    Report(Box<RunReport>),
    Text(String),
}

fn run_command(command: &Command, cfg: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<Output, CliError> {
    let mut warn = || warnings.extend(moment_warning(&cfg.spec, cfg.r));
    let checks: Vec<CheckEntry> = match command {
        Command::Params(_) => {
            cfg.require_admissible()?;
            suites::params(cfg)?
        }
        Command::Moments(_) => {
            cfg.require_admissible()?;
            suites::moments(cfg, cfg.require_seed()?)?
        }
        Command::Simulate(a) => {
            cfg.require_admissible()?;
            let seed = cfg.require_seed()?;
            let batch = match a.process.as_str() {
                "z" | "Z" => suites::simulate_z_batch(cfg, seed)?,
                "y" | "Y" => {
                    let law = RandomizationLaw::new(cfg.spec, cfg.p, cfg.r)?;
                    simulate_y(&law, &TimeGrid::new(cfg.grid.clone())?, cfg.paths, seed)?
                }
                other => return Err(CliError::Usage(format!("--process must be y or z, got {other}"))),
            };
            return Ok(Output::Text(render_paths(cfg, &batch)?));
        }
        Command::VerifyCovariance(_) => {
            cfg.require_admissible()?;
            let batch = suites::simulate_z_batch(cfg, cfg.require_seed()?)?;
            suites::covariance(cfg, &batch)?
        }
        Command::VerifyHarness(_) => {
            cfg.require_admissible()?;
            let batch = suites::simulate_z_batch(cfg, cfg.require_seed()?)?;
            suites::harness(cfg, &batch)?
        }
        Command::VerifyQvar(_) => {
            cfg.require_admissible()?;
            warn();
            let batch = suites::simulate_z_batch(cfg, cfg.require_seed()?)?;
            suites::qvar(cfg, &batch)?
        }
        Command::VerifyIdentities(_) => {
            cfg.require_admissible()?;
            let seed = cfg.require_seed()?;
            let batch = suites::simulate_z_batch(cfg, seed)?;
            suites::identities(cfg, seed, &batch)?
        }
        Command::CheckAssumptions(_) => suites::assumptions(cfg)?,
        Command::Density(a) => {
            let times = parse_list(&a.times).map_err(CliError::Usage)?;
            suites::density(&cfg.spec, a.theta, &times)?
        }
        Command::VerifyAll(_) => {
            cfg.require_admissible()?;
            warn();
            let seed = cfg.require_seed()?;
            let batch = suites::simulate_z_batch(cfg, seed)?;
            let mut all = suites::params(cfg)?;
            all.extend(suites::assumptions(cfg)?);
            all.extend(suites::moments(cfg, seed)?);
            all.extend(suites::covariance(cfg, &batch)?);
            all.extend(suites::harness(cfg, &batch)?);
            all.extend(suites::qvar(cfg, &batch)?);
            all.extend(suites::identities(cfg, seed, &batch)?);
            all
        }
    };
    Ok(Output::Report(Box::new(RunReport::new(cfg.clone(), checks))))
}

fn render_paths(cfg: &ExperimentConfig, batch: &PathBatch) -> Result<String, CliError> {
    let io = |e: &dyn std::fmt::Display| CliError::Io(e.to_string());
    let times = batch.grid().times();
    match cfg.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["path".to_string(), "theta".to_string()];
            header.extend(times.iter().map(|t| format!("t={t}")));
            w.write_record(&header).map_err(|e| io(&e))?;
            for i in 0..batch.n_paths() {
                let mut rec = vec![i.to_string(), batch.thetas()[i].to_string()];
                rec.extend(batch.row(i).iter().map(|x| x.to_string()));
                w.write_record(&rec).map_err(|e| io(&e))?;
            }
            let bytes = w.into_inner().map_err(|e| io(&e))?;
            String::from_utf8(bytes).map_err(|e| io(&e))
        }
        Format::Json => {
            let rows: Vec<Vec<f64>> = (0..batch.n_paths()).map(|i| batch.row(i)).collect();
            let value = serde_json::json!({
                "config": cfg,
                "grid": times,
                "thetas": batch.thetas(),
                "paths": rows,
                "version": env!("CARGO_PKG_VERSION"),
            });
            let mut text = serde_json::to_string_pretty(&value).map_err(|e| io(&e))?;
            text.push('\n');
            Ok(text)
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let common = match &cli.command {
        Command::Params(c)
        | Command::Moments(c)
        | Command::VerifyCovariance(c)
        | Command::VerifyHarness(c)
        | Command::VerifyQvar(c)
        | Command::VerifyIdentities(c)
        | Command::CheckAssumptions(c)
        | Command::VerifyAll(c) => c,
        Command::Simulate(a) => &a.common,
        Command::Density(a) => &a.common,
    };
    let cfg = ExperimentConfig::resolve(common.settings()?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cfg.threads)))?;
    let start = Instant::now();
    let mut warnings = Vec::new();
    let produced = pool.install(|| run_command(&cli.command, &cfg, &mut warnings));
    for w in &warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let produced = produced?;
    let (text, code) = match produced {
        Output::Report(rep) => {
            let failed = rep.checks.iter().filter(|c| !c.pass).count();
            let _ = writeln!(
                err,
                "{} of {} checks passed in {:.2} s",
                rep.checks.len() - failed,
                rep.checks.len(),
                start.elapsed().as_secs_f64()
            );
            (rep.render(cfg.format)?, if rep.pass { 0 } else { 2 })
        }
        Output::Text(t) => (t, 0),
    };
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?
        }
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(code)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut argv = vec!["bimeixner"];
        argv.extend_from_slice(args);
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn params_poisson() {
        let (code, out, _) = run_str(&["params", "--family", "poisson", "--p", "4", "--r", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let checks = v["checks"].as_array().unwrap();
        let get = |n: &str| {
            checks.iter().find(|c| c["name"] == n).unwrap()["estimate"]
                .as_f64()
                .unwrap()
        };
        assert!((get("params.alpha") - 0.5).abs() < 1e-15);
        assert_eq!(get("params.sigma"), 0.0);
        assert_eq!(get("params.gamma"), 1.0);
        assert_eq!(v["pass"], true);
        assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_str(&["params", "--family", "poisson", "--p", "4"]).0, 1);
        assert_eq!(
            run_str(&["verify-all", "--family", "poisson", "--p", "4", "--r", "1"]).0,
            1
        );
        assert_eq!(run_str(&["bogus"]).0, 1);
        assert_eq!(run_str(&["params", "--family", "gamma", "--p", "3", "--r", "1"]).0, 1);
        assert_eq!(run_str(&["--help"]).0, 0);
    }

    #[test]
    fn failing_assumptions_exit_two() {
        let (code, out, _) = run_str(&["check-assumptions", "--family", "gamma", "--p", "1", "--r", "0.5"]);
        assert_eq!(code, 2);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let failed: Vec<_> = v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["pass"] == false)
            .collect();
        assert!(!failed.is_empty());
        assert!(failed
            .iter()
            .all(|c| c["name"].as_str().unwrap().contains("endpoint=1")));
    }

    #[test]
    fn csv_output() {
        let (code, out, _) = run_str(&["params", "--family", "gamma", "--p", "3", "--r", "2", "--format", "csv"]);
        assert_eq!(code, 0);
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), "name,theory,estimate,std_error,z,pass");
        assert_eq!(lines.next().unwrap(), "params.alpha,2.0,2.0,0.0,,true");
    }

    #[test]
    fn density_secant() {
        let (code, out, _) = run_str(&["density", "--family", "secant", "--p", "0", "--r", "1", "--theta", "-2"]);
        assert_eq!(code, 0, "{out}");
    }

    #[test]
    fn errors_map_to_exit_codes() {
        assert_eq!(CliError::Library(Error::Integration("x".into())).exit_code(), 3);
        assert_eq!(CliError::Library(Error::SingularDesign("x".into())).exit_code(), 3);
        assert_eq!(CliError::Library(Error::Grid(1.0)).exit_code(), 1);
    }
}
