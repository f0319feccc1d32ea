//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 positivity violation,
//! 3 I/O, configuration or usage error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use jasdm_core::noise::NoiseBundle;
use jasdm_core::scheme::simulate_path;
use jasdm_core::SchemeError;

use crate::analysis::{
    mean_reversion_study, moment_study, positivity_audit, strong_error_study, Stepper,
    StrongErrorSpec,
};
use crate::config::{ConfigError, ConfigFile};
use crate::manifest::{RunManifest, SchemeSummary, StepperName, Study};
use crate::report::{self, ReportError};
use crate::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_POSITIVITY: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "jasdm",
    version,
    about = "Positivity-preserving simulation of delay CIR/CEV jump models"
)]
pub struct Cli {
    /// Cap on worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the file's theta.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Override the file's step exponent (step = tau * 2^-e).
    #[arg(long)]
    pub delta_exponent: Option<u32>,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the step-size conditions.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Write one trajectory CSV per path.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value_t = 1)]
        paths: u64,
        /// Also write each path's raw noise as `path_NNNNN.noise.bin`.
        #[arg(long)]
        dump_noise: bool,
    },
    /// Strong L2 error against a fine reference over a ladder of steps.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        /// Comma list or inclusive range, e.g. `5,6,7` or `5..9`.
        #[arg(long, default_value = "5..9", value_parser = parse_exponents)]
        delta_exponents: Exponents,
        #[arg(long, default_value_t = 50)]
        batches: usize,
        #[arg(long, default_value_t = 100)]
        per_batch: usize,
        #[arg(long, default_value_t = 12)]
        ref_exponent: u32,
        /// Also estimate the error as a sup over the coarse nodes.
        #[arg(long)]
        sup_error: bool,
    },
    /// Monte Carlo mean against the exact mean.
    MeanReversion {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        /// Horizon as a multiple of the file's horizon.
        #[arg(long, default_value_t = 1)]
        t_multiplier: u64,
        #[arg(long, default_value_t = 10_000)]
        paths: u64,
    },
    /// Moments E[y^p] over time.
    Moments {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value = "1,2,4", value_delimiter = ',')]
        powers: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        paths: u64,
    },
    /// Count non-positive values over many paths.
    Audit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value_t = 10_000)]
        paths: u64,
        #[arg(long, value_enum, default_value = "jasdm")]
        stepper: StepperName,
    },
    /// Re-run a study from its manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; defaults to the one recorded in the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Step exponents given on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exponents(pub Vec<u32>);

fn parse_exponents(s: &str) -> Result<Exponents, String> {
    parse_exponent_list(s).map(Exponents)
}

fn parse_exponent_list(s: &str) -> Result<Vec<u32>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let b: u32 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|e| format!("{b:?}: {e}"))?;
        if b < a {
            return Err(format!("empty range {s}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Study(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Study(Error::Scheme(SchemeError::PositivityViolation { .. })) => {
                EXIT_POSITIVITY
            }
            _ => EXIT_IO,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Text printed on stdout plus the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub summary: String,
}

fn resolve(common: &Common) -> Result<ConfigFile, CliError> {
    let mut cfg = ConfigFile::load(&common.config)?;
    if let Some(theta) = common.theta {
        cfg.theta = theta;
    }
    if let Some(e) = common.delta_exponent {
        cfg.delta_exponent = e;
    }
    Ok(cfg.resolved()?)
}

/// Formats a bound with four decimals, trimming zeros down to one decimal.
fn short(x: f64) -> String {
    if x.is_infinite() {
        return "inf".into();
    }
    let s = format!("{x:.4}");
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}

fn three(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.3}")
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn validate(cfg: &ConfigFile) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let scheme = cfg.scheme()?;
    let b = model.validate_assumption_b(&scheme);
    let j = model.validate_jump_step(&scheme);
    let mut s = String::new();
    writeln!(
        s,
        "Assumption B bound {}: {}; jump bound {}: {}",
        short(b.bound),
        verdict(b.satisfied),
        short(j.bound),
        verdict(j.satisfied)
    )
    .unwrap();
    let [c1, c2, c3] = b.components;
    writeln!(
        s,
        "  delta = {} ; {} ∧ {} ∧ {} = {}",
        short(scheme.delta()),
        three(c1),
        three(c2),
        three(c3),
        three(b.bound)
    )
    .unwrap();
    if !model.jump_coeff().is_zero() && model.lipschitz() > 1.0 && !model.jump_positive() {
        writeln!(s, "  jump coefficient needs to be positive when L > 1").unwrap();
    }
    let code = if b.satisfied && j.satisfied {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    };
    Ok(Outcome { code, summary: s })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| {
            p.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        })
        .collect()
}

/// Runs a study, writes its CSVs and manifest into `out`.
pub fn execute(
    cfg: &ConfigFile,
    study: &Study,
    seed: u64,
    out: &Path,
    threads: Option<usize>,
) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let model = cfg.model()?;
    let scheme = cfg.scheme()?;
    create_dir(out)?;
    let mut s = String::new();
    let mut code = EXIT_OK;
    let outputs: Vec<PathBuf> = match study {
        Study::Simulate { paths, dump_noise } => {
            if *paths == 0 {
                return Err(Error::Usage("--paths must be at least 1".into()).into());
            }
            let mut written = Vec::new();
            for i in 0..*paths {
                let bundle =
                    NoiseBundle::generate(&model, scheme.l(), seed, i).map_err(Error::from)?;
                let traj = simulate_path(&model, &scheme, bundle.fine_grid(), bundle.wiener_fine())
                    .map_err(Error::from)?;
                let path = out.join(format!("path_{i:05}.csv"));
                report::write_trajectory(&path, &traj)?;
                writeln!(
                    s,
                    "path {i}: {} jumps, y_T = {:.6}, min = {:.6}",
                    bundle.jump_times().len(),
                    traj.terminal(),
                    traj.min_forward()
                )
                .unwrap();
                written.push(path);
                if *dump_noise {
                    let path = out.join(format!("path_{i:05}.noise.bin"));
                    std::fs::write(&path, bundle.to_le_bytes()).map_err(io_err(&path))?;
                    written.push(path);
                }
            }
            written
        }
        Study::Convergence {
            delta_exponents,
            batches,
            per_batch,
            ref_exponent,
            sup_error,
        } => {
            if delta_exponents.iter().any(|&e| e >= *ref_exponent) {
                return Err(Error::Usage(format!(
                    "every exponent must be below the reference exponent {ref_exponent}"
                ))
                .into());
            }
            let mut spec =
                StrongErrorSpec::dyadic(delta_exponents, *ref_exponent, *batches, *per_batch, seed);
            spec.sup_error = *sup_error;
            let r = strong_error_study(&model, &scheme, &spec)?;
            writeln!(s, "e   epsilon_hat   stderr     rung rate  in fit").unwrap();
            for (i, e) in delta_exponents.iter().enumerate() {
                let rate = r
                    .rung_rates
                    .get(i)
                    .map_or(String::new(), |x| format!("{x:.3}"));
                writeln!(
                    s,
                    "{e:<3} {:.5e}  {:.3e}  {rate:<9}  {}",
                    r.errors[i],
                    r.error_stderrs[i],
                    if r.fitted_rungs[i] { "yes" } else { "no" }
                )
                .unwrap();
            }
            if let Some(f) = &r.floor_error {
                writeln!(s, "reference floor (e = {}): {f:.5e}", ref_exponent - 1).unwrap();
            }
            match &r.fit {
                Some(f) => writeln!(
                    s,
                    "slope {:.4} over {} rungs above the floor",
                    f.slope, f.used
                ),
                None => writeln!(s, "slope: too few rungs above the floor"),
            }
            .unwrap();
            if let Some(f) = &r.fit_all {
                writeln!(s, "slope {:.4} over all {} rungs", f.slope, f.used).unwrap();
            } else {
                log::warn!("a single step size gives no slope");
            }
            writeln!(
                s,
                "theoretical lower bound {:.4}",
                r.theoretical_slope_lower_bound
            )
            .unwrap();
            report::write_convergence(out, &r)?
        }
        Study::MeanReversion {
            t_multiplier,
            paths,
        } => {
            if *t_multiplier == 0 {
                return Err(Error::Usage("--t-multiplier must be at least 1".into()).into());
            }
            let horizon = cfg.horizon * *t_multiplier as f64;
            let r = mean_reversion_study(&model, &scheme, horizon, *paths, seed)?;
            let z = (r.terminal_mean() - r.terminal_closed_form()) / r.terminal_stderr();
            writeln!(
                s,
                "T = {horizon}: mean {:.6} ± {:.6}, exact {:.6} ({z:+.2} SE)",
                r.terminal_mean(),
                r.terminal_stderr(),
                r.terminal_closed_form()
            )
            .unwrap();
            writeln!(
                s,
                "k1/(k2 theta) = {}; delta (1 - theta) < 1/k2: {}",
                short(r.theta_bound),
                r.step_condition
            )
            .unwrap();
            let path = out.join("mean_reversion.csv");
            report::write_mean_reversion(&path, &r)?;
            vec![path]
        }
        Study::Moments { powers, paths } => {
            let r = moment_study(&model, &scheme, powers, *paths, seed)?;
            for (q, p) in powers.iter().enumerate() {
                writeln!(
                    s,
                    "p = {p}: sup_t E[y^p] = {:.6}, E[sup_t y^p] = {:.6}",
                    r.sup_over_time[q], r.expected_path_sup[q]
                )
                .unwrap();
            }
            report::write_moments(out, &r)?
        }
        Study::Audit { paths, stepper } => {
            let which = match stepper {
                StepperName::Jasdm => Stepper::Jasdm,
                StepperName::Em => Stepper::EulerMaruyama,
            };
            let a = positivity_audit(&model, &scheme, which, *paths, seed)?;
            writeln!(
                s,
                "{} paths: min {:.6e}, non-positive paths {}, clamps {}, guaranteed regime {}",
                a.paths, a.min_value, a.negative_count, a.clamp_total, a.in_guaranteed_regime
            )
            .unwrap();
            if which == Stepper::Jasdm && (a.negative_count > 0 || a.clamp_total > 0) {
                code = EXIT_POSITIVITY;
            }
            let path = out.join("audit.csv");
            report::write_audit(&path, &a)?;
            vec![path]
        }
    };

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        study: study.clone(),
        master_seed: seed,
        config: cfg.clone(),
        scheme: SchemeSummary {
            theta: scheme.theta(),
            m: scheme.m(),
            l: scheme.l(),
            delta: scheme.delta(),
        },
        out_dir: out.to_path_buf(),
        threads,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs: file_names(&outputs),
    };
    let path = manifest.write(out).map_err(io_err(out))?;
    writeln!(s, "wrote {} files and {}", outputs.len(), path.display()).unwrap();
    Ok(Outcome { code, summary: s })
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let threads = cli.threads;
    let (common, output, study) = match cli.command {
        Command::Validate { common } => return validate(&resolve(&common)?),
        Command::Replay { manifest, out } => {
            let m = RunManifest::read(&manifest).map_err(io_err(&manifest))?;
            let out = out.unwrap_or(m.out_dir.clone());
            return execute(&m.config, &m.study, m.master_seed, &out, threads);
        }
        Command::Simulate {
            common,
            output,
            paths,
            dump_noise,
        } => (common, output, Study::Simulate { paths, dump_noise }),
        Command::Convergence {
            common,
            output,
            delta_exponents,
            batches,
            per_batch,
            ref_exponent,
            sup_error,
        } => (
            common,
            output,
            Study::Convergence {
                delta_exponents: delta_exponents.0,
                batches,
                per_batch,
                ref_exponent,
                sup_error,
            },
        ),
        Command::MeanReversion {
            common,
            output,
            t_multiplier,
            paths,
        } => (
            common,
            output,
            Study::MeanReversion {
                t_multiplier,
                paths,
            },
        ),
        Command::Moments {
            common,
            output,
            powers,
            paths,
        } => (common, output, Study::Moments { powers, paths }),
        Command::Audit {
            common,
            output,
            paths,
            stepper,
        } => (common, output, Study::Audit { paths, stepper }),
    };
    let cfg = resolve(&common)?;
    execute(&cfg, &study, output.seed, &output.out, threads)
}

/// Entry point of the binary: parses `std::env::args`, prints, returns the
/// exit code.
pub fn main() -> u8 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
