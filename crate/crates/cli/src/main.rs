use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hornfit::exactlp::LpOutcome;
use hornfit::program::{Coefficient, CoefficientAssignment};
use hornfit::rational::{self, BigRational};
use hornfit::softfp::F32;
use hornfit::{synth, verify};
use hornfit_cli::config::{self, Job, JobConfig};
use hornfit_cli::{coeffs, emit, CliError};

const EXIT_VIOLATION: u8 = 1;
const EXIT_HEURISTIC: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hornfit",
    version,
    about = "Synthesize and verify binary32 Horner polynomials"
)]
struct Cli {
    /// Cap on worker threads used by exhaustive scans.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for coefficients meeting the job's tolerance.
    Synthesize {
        config: PathBuf,
        /// Where to write the coefficients (default: `[output] coefficients`, else stdout).
        #[arg(long)]
        coefficients: Option<PathBuf>,
        /// Where to write the run report (default: `[output] report`, else stderr).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Suppress progress lines.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Exhaustively measure the ulp error of a coefficient set.
    Verify {
        config: PathBuf,
        /// Coefficient file (default: `[output] coefficients`, else the `[coefficients]` section).
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Exact LP bounds on the unfixed coefficients for a set of test points.
    Bounds {
        config: PathBuf,
        /// Test points as hexadecimal floats.
        #[arg(long = "point", value_name = "HEXFLOAT")]
        points: Vec<String>,
        /// Coefficient file of values to hold fixed, in addition to `[coefficients]`.
        #[arg(long)]
        fixed: Option<PathBuf>,
    },
    /// Print C99 source for the program.
    Emit {
        config: PathBuf,
        #[arg(long)]
        coefficients: Option<PathBuf>,
        /// Output file (default: `[output] source`, else stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load(path: &Path) -> Result<Job, CliError> {
    JobConfig::load(path)?.resolve()
}

fn read_coeffs(job: &Job, path: &Path) -> Result<BTreeMap<usize, F32>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    coeffs::parse(&job.skeleton, &text)
}

/// Coefficients from an explicit file, the configured output file, or the
/// config itself, in that order.
fn job_coefficients(job: &Job, explicit: Option<PathBuf>) -> Result<Vec<F32>, CliError> {
    let extra = match explicit.or_else(|| job.config.output.coefficients.clone()) {
        Some(p) => read_coeffs(job, &p)?,
        None => BTreeMap::new(),
    };
    job.full_coefficients(&extra)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Synthesize {
            config,
            coefficients,
            report,
            quiet,
        } => {
            let job = load(&config)?;
            let mut sc = job.synth_config()?;
            for (&k, v) in &job.known {
                sc.boxes[k] = (v.to_rational(), v.to_rational());
            }
            let oracle = job.oracle();
            let mut progress = |line: &str| {
                if !quiet {
                    eprintln!("{line}");
                }
            };
            let run = synth::synthesize(&job.skeleton, oracle.as_ref(), &sc, &mut progress)?;
            let report_path = report.or_else(|| job.config.output.report.clone());
            match &report_path {
                Some(p) => std::fs::write(p, run.to_string())?,
                None => eprint!("{run}"),
            }
            match &run.coefficients {
                Some(c) => {
                    let path = coefficients.or_else(|| job.config.output.coefficients.clone());
                    write_or_print(path.as_deref(), &coeffs::write(&job.skeleton, c))?;
                    Ok(0)
                }
                None => {
                    eprintln!(
                        "synthesis failed: {}",
                        run.failure.as_deref().unwrap_or("no solution")
                    );
                    Ok(EXIT_HEURISTIC)
                }
            }
        }
        Command::Verify {
            config,
            coefficients,
        } => {
            let job = load(&config)?;
            let c = job_coefficients(&job, coefficients)?;
            let report = if job.juffa {
                verify::full_range_error(&job.skeleton, &c, Some(&job.k))?
            } else {
                verify::max_ulp_error(&job.skeleton, &c, job.function, job.domain, Some(&job.k))?
            };
            print!("{report}");
            if let Some(p) = &job.config.output.report {
                std::fs::write(p, report.to_string())?;
            }
            match report.first_violation {
                Some(a) => {
                    eprintln!("violation: first violating abscissa {a}");
                    Ok(EXIT_VIOLATION)
                }
                None => Ok(0),
            }
        }
        Command::Bounds {
            config,
            points,
            fixed,
        } => {
            let job = load(&config)?;
            let points = points
                .iter()
                .map(|p| config::parse_hex(p))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(p) = points.iter().find(|p| !job.oracle().domain().contains(**p)) {
                return Err(CliError::Config(format!(
                    "test point {p} lies outside the domain"
                )));
            }
            let mut held = job.known.clone();
            if let Some(path) = fixed {
                held.extend(read_coeffs(&job, &path)?);
            }
            print!("{}", bounds_report(&job, &points, &held)?);
            Ok(0)
        }
        Command::Emit {
            config,
            coefficients,
            output,
        } => {
            let job = load(&config)?;
            let c = job_coefficients(&job, coefficients)?;
            let src = emit::emit_c(&job.skeleton, &c, &job.config.program.function_name);
            let path = output.or_else(|| job.config.output.source.clone());
            write_or_print(path.as_deref(), &src)?;
            Ok(0)
        }
    }
}

fn hex_or_none(x: Result<F32, hornfit::Error>) -> String {
    x.map(|v| v.to_string()).unwrap_or_else(|_| "none".into())
}

fn bounds_report(
    job: &Job,
    points: &[F32],
    held: &BTreeMap<usize, F32>,
) -> Result<String, CliError> {
    let sc = job.synth_config()?;
    let coeffs = CoefficientAssignment(
        (0..job.skeleton.num_coeffs())
            .map(|k| match held.get(&k) {
                Some(&v) => Coefficient::Fixed(v),
                None => Coefficient::Boxed(sc.boxes[k].0.clone(), sc.boxes[k].1.clone()),
            })
            .collect(),
    );
    let oracle = job.oracle();
    let sys = synth::build_constraints(&job.skeleton, &coeffs, oracle.as_ref(), points)?;
    let mut out = String::new();
    let mut bounds: Vec<(String, BigRational, BigRational)> = Vec::new();
    for v in 0..sys.num_vars() {
        let (LpOutcome::Optimal { value: lo, .. }, LpOutcome::Optimal { value: hi, .. }) =
            (sys.minimize(v), sys.maximize(v))
        else {
            return Ok("infeasible\n".into());
        };
        bounds.push((sys.variables[v].clone(), lo, hi));
    }
    for (label, lo, hi) in bounds {
        out.push_str(&format!(
            "{label} in [{}, {}] representable [{}, {}]\n",
            rational::to_exact_string(&lo),
            rational::to_exact_string(&hi),
            hex_or_none(rational::ceil_f32(&lo)),
            hex_or_none(rational::floor_f32(&hi)),
        ));
    }
    for (&k, v) in held {
        out.push_str(&format!("{} = {v} fixed\n", job.skeleton.labels()[k]));
    }
    Ok(out)
}
