//! `phess`: run one suite and write its report.
//!
//! Exit status: 0 when no invariant is violated, 1 on a violation or a library
//! failure, 2 on a usage or input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use phess_cli::{error_status, run, to_csv, to_json};
use phess_core::{Error, Result};

#[derive(Parser)]
#[command(name = "phess", version, about = "Property suites and solvers for p-Hessian equations")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed of every random stream; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// JSON file whose top-level keys override the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 picks the number of cores).
    #[arg(long, global = true, env = "PHESS_THREADS")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// σ-identity family on random vectors.
    Identities {
        /// Dimension range lo..hi (or a single n).
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Cone and eigenvalue inequalities.
    Cone {
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Closed-form eigenvalue derivatives against finite differences.
    SpectralDerivs {
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        gap: Option<f64>,
    },
    /// Large-μ_1 concavity inequality on hypothesis-satisfying samples.
    ConcavityFuzz {
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Threshold M̂ of the small-μ_1 concavity inequality.
    FindM {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        /// σ_p band lo:hi.
        #[arg(long)]
        sigma: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Floor −C on μ_1.
        #[arg(long)]
        mu1_floor: Option<f64>,
        /// Use the residual-minimizing weight in every trial.
        #[arg(long)]
        adversarial: bool,
    },
    /// Ball subsolution matrix and rank-one expansion.
    Subsolution {
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        rank_one_samples: Option<usize>,
    },
    /// Key-lemma conclusion on hypothesis-verified configurations.
    KeyLemma {
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        configs: Option<usize>,
        #[arg(long)]
        ray_samples: Option<usize>,
    },
    /// Damped Newton solve on the torus.
    Solve {
        /// Problem file, read like --config.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Write the solution in the CSV grid format.
        #[arg(long)]
        field_out: Option<PathBuf>,
    },
    /// Generalized Alexandrov inequality.
    Alexandrov {
        #[arg(long)]
        resolution: Option<usize>,
        /// Skip the convex corpus.
        #[arg(long)]
        no_corpus: bool,
    },
    /// Pseudo-solution conditions.
    PseudoCheck {
        /// Problem file, read like --config.
        #[arg(long)]
        problem: Option<PathBuf>,
    },
}

/// `lo..hi` or `n`.
fn range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidInput(format!("bad range {s}; expected lo..hi or n"));
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    match s.split_once("..") {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi.trim_start_matches('='))?)),
        None => parse(s).map(|n| (n, n)),
    }
}

fn band(s: &str) -> Result<[f64; 2]> {
    let bad = || Error::InvalidInput(format!("bad band {s}; expected lo:hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok([lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?])
}

/// Inserts `key: value` when the flag was given.
fn put<T: serde::Serialize>(m: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        m.insert(key.into(), json!(v));
    }
}

fn put_range(m: &mut Map<String, Value>, n: Option<String>) -> Result<()> {
    if let Some(s) = n {
        let (lo, hi) = range(&s)?;
        m.insert("n_min".into(), json!(lo));
        m.insert("n_max".into(), json!(hi));
    }
    Ok(())
}

fn read_json(path: &PathBuf) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// Subcommand name, flag overrides, problem file and field output path.
type Parsed = (&'static str, Map<String, Value>, Option<PathBuf>, Option<PathBuf>);

fn flags(cmd: Command) -> Result<Parsed> {
    let mut m = Map::new();
    let (name, problem, field_out) = match cmd {
        Command::Identities { n, trials, tol } => {
            put_range(&mut m, n)?;
            put(&mut m, "trials", trials);
            put(&mut m, "tol", tol);
            ("identities", None, None)
        }
        Command::Cone { n, samples, tol } => {
            put_range(&mut m, n)?;
            put(&mut m, "samples", samples);
            put(&mut m, "tol", tol);
            ("cone", None, None)
        }
        Command::SpectralDerivs { n, samples, gap } => {
            put_range(&mut m, n)?;
            put(&mut m, "samples", samples);
            put(&mut m, "gap", gap);
            ("spectral-derivs", None, None)
        }
        Command::ConcavityFuzz { n, samples, tol } => {
            put(&mut m, "n_values", n);
            put(&mut m, "samples", samples);
            put(&mut m, "tol", tol);
            ("concavity-fuzz", None, None)
        }
        Command::FindM { n, p, tau, eps, sigma, trials, mu1_floor, adversarial } => {
            put(&mut m, "n", n);
            put(&mut m, "p", p);
            put(&mut m, "tau", tau);
            put(&mut m, "eps", eps);
            put(&mut m, "sigma_band", sigma.as_deref().map(band).transpose()?);
            put(&mut m, "trials", trials);
            put(&mut m, "mu1_floor", mu1_floor);
            if adversarial {
                m.insert("adversarial".into(), json!(true));
            }
            ("find-m", None, None)
        }
        Command::Subsolution { resolution, rank_one_samples } => {
            put(&mut m, "resolution", resolution);
            put(&mut m, "rank_one_samples", rank_one_samples);
            ("subsolution", None, None)
        }
        Command::KeyLemma { n, configs, ray_samples } => {
            put_range(&mut m, n)?;
            put(&mut m, "configs", configs);
            put(&mut m, "ray_samples", ray_samples);
            ("key-lemma", None, None)
        }
        Command::Solve { problem, tol, max_iters, field_out } => {
            put(&mut m, "tol", tol);
            put(&mut m, "max_iters", max_iters);
            ("solve", problem, field_out)
        }
        Command::Alexandrov { resolution, no_corpus } => {
            put(&mut m, "resolution", resolution);
            if no_corpus {
                m.insert("corpus".into(), json!(false));
            }
            ("alexandrov", None, None)
        }
        Command::PseudoCheck { problem } => ("pseudo-check", problem, None),
    };
    Ok((name, m, problem, field_out))
}

fn write(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main_inner(cli: Cli) -> Result<i32> {
    let g = cli.global;
    if let Some(t) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    let (name, overrides, problem, field_out) = flags(cli.command)?;
    let mut layers = Vec::new();
    for path in [g.config.as_ref(), problem.as_ref()].into_iter().flatten() {
        layers.push(read_json(path)?);
    }
    layers.push(Value::Object(overrides));
    let out = run(name, layers, g.seed)?;
    let text = match g.format {
        Format::Json => to_json(&out.report),
        Format::Csv => to_csv(out.report.seed, &out.rows),
    };
    write(g.out.as_ref(), &text)?;
    if let (Some(path), Some(field)) = (field_out.as_ref(), out.field.as_ref()) {
        write(Some(path), &field.to_csv())?;
    }
    if out.report.violations > 0 {
        eprintln!("{name}: {} violation(s)", out.report.violations);
        return Ok(1);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("phess: {e}");
            ExitCode::from(error_status(&e) as u8)
        }
    }
}
