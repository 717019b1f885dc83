//! Batch front end: every subcommand resolves a typed config from defaults, an
//! optional JSON file and flag overrides, runs one suite and emits a report.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use phess_core::solver::GridFn;
use phess_core::{Error, Result};

pub mod suites;

use suites::SuiteResult;

/// Subcommand names, in help order.
pub const COMMANDS: [&str; 10] = [
    "identities",
    "cone",
    "spectral-derivs",
    "concavity-fuzz",
    "find-m",
    "subsolution",
    "key-lemma",
    "solve",
    "alexandrov",
    "pseudo-check",
];

/// The report written for every run. `wall_time` is the only field that varies
/// between runs with the same config and seed.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    /// The fully resolved config, defaults included.
    pub config: Value,
    /// "ok" or "violation".
    pub status: String,
    pub violations: usize,
    pub counterexample: Option<Value>,
    pub result: Value,
    /// Seconds.
    pub wall_time: f64,
}

/// A finished run: the report, its CSV rows and an optional solution field.
pub struct Outcome {
    pub report: Report,
    pub rows: Vec<Value>,
    pub field: Option<GridFn>,
}

/// Top-level keys of `over` replace those of `base`.
pub fn overlay(base: &mut Value, over: Value) -> Result<()> {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            b.extend(o);
            Ok(())
        }
        (_, Value::Null) => Ok(()),
        _ => Err(Error::InvalidInput("config must be a JSON object".into())),
    }
}

fn resolve<T: Serialize + DeserializeOwned>(default: T, layers: Vec<Value>, seed: Option<u64>) -> Result<T> {
    let mut v = serde_json::to_value(default).expect("configs serialize");
    for l in layers {
        overlay(&mut v, l)?;
    }
    if let Some(s) = seed {
        overlay(&mut v, serde_json::json!({ "seed": s }))?;
    }
    serde_json::from_value(v).map_err(|e| Error::InvalidInput(format!("config: {e}")))
}

fn finish<C: Serialize, R: SuiteResult>(
    command: &str,
    seed: u64,
    config: &C,
    result: &R,
    field: Option<GridFn>,
    start: Instant,
) -> Outcome {
    let violations = result.violations();
    let report = Report {
        command: command.to_string(),
        seed,
        config: serde_json::to_value(config).expect("configs serialize"),
        status: if violations == 0 { "ok" } else { "violation" }.to_string(),
        violations,
        counterexample: result.counterexample(),
        result: serde_json::to_value(result).expect("results serialize"),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Outcome { report, rows: result.rows(), field }
}

/// Runs subcommand `command` with config `layers` applied over its defaults and
/// `seed` over everything.
pub fn run(command: &str, layers: Vec<Value>, seed: Option<u64>) -> Result<Outcome> {
    use suites::*;
    let start = Instant::now();
    macro_rules! suite {
        ($default:expr, $run:path) => {{
            let cfg = resolve($default, layers, seed)?;
            let r = $run(&cfg)?;
            Ok(finish(command, cfg.seed, &cfg, &r, None, start))
        }};
    }
    match command {
        "identities" => suite!(identities::IdentitiesConfig::default(), identities::run),
        "cone" => suite!(inequalities::InequalitiesConfig::default(), inequalities::run),
        "spectral-derivs" => suite!(derivs::DerivsConfig::default(), derivs::run),
        "concavity-fuzz" => suite!(concavity::FuzzConfig::default(), concavity::fuzz),
        "find-m" => suite!(concavity::default_find_m(), concavity::find_m),
        "subsolution" => suite!(subsolution::SubsolutionConfig::default(), subsolution::run),
        "key-lemma" => suite!(key_lemma::KeyLemmaSuiteConfig::default(), key_lemma::run),
        "alexandrov" => suite!(alexandrov::AlexandrovConfig::default(), alexandrov::run),
        "pseudo-check" => suite!(pseudo::PseudoSuiteConfig::default(), pseudo::run),
        "solve" => {
            let cfg = resolve(solve::SolveConfig::default(), layers, seed)?;
            let mut r = solve::run(&cfg)?;
            let field = r.solution.take();
            Ok(finish(command, cfg.seed, &cfg, &r, field, start))
        }
        other => Err(Error::InvalidInput(format!("unknown subcommand {other}"))),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

/// CSV over the union of row keys, sorted, with a leading `seed` column.
pub fn to_csv(seed: u64, rows: &[Value]) -> String {
    let keys: BTreeSet<String> = rows.iter().filter_map(Value::as_object).flat_map(|o| o.keys().cloned()).collect();
    let mut out = String::from("seed");
    for k in &keys {
        out.push(',');
        out.push_str(k);
    }
    out.push('\n');
    let empty = Map::new();
    for r in rows {
        let o = r.as_object().unwrap_or(&empty);
        out.push_str(&seed.to_string());
        for k in &keys {
            out.push(',');
            out.push_str(&cell(o.get(k)));
        }
        out.push('\n');
    }
    out
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => quote(s),
        Some(Value::Number(n)) => n.to_string(),
        Some(Value::Bool(b)) => b.to_string(),
        Some(other) => quote(&other.to_string()),
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Exit status of a failed run: 2 for bad input, 1 for everything else.
pub fn error_status(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Io(_) => 2,
        _ => 1,
    }
}
