//! Acceptance suite: one PASS/FAIL line per criterion, at full scale.
//!
//! Runs without the libtest harness so every line reaches the output; the process
//! fails when any criterion fails. Each criterion drives the same entry point as
//! the `phess` binary.

use std::process::Command;
use std::time::Instant;

use serde_json::{json, Value};

use phess_cli::run;
use phess_core::solver::{
    manufactured_field, pseudo_check, EquationSpec, PseudoCheckConfig, PseudoConstants, TorusGrid,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Runs a subcommand through the library with a fixed seed and returns its report.
fn report(command: &str, config: Value) -> Value {
    let out = run(command, vec![config], Some(20_240_901)).unwrap_or_else(|e| panic!("{command}: {e}"));
    serde_json::to_value(&out.report).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn c01() -> Verdict {
    let t = Instant::now();
    let r = report("identities", json!({"n_min": 2, "n_max": 8, "trials": 10_000, "tol": 1e-10}));
    let secs = t.elapsed().as_secs_f64();
    let max = f(&r["result"]["max_residual"]);
    let evals = r["result"]["evaluations"].as_u64().unwrap();
    let pass = r["violations"] == 0 && max <= 1e-10 && evals == 10_000 * 42 && secs <= 10.0;
    verdict(pass, format!("max residual {max:.2e} <= 1e-10 over {evals} evaluations in {secs:.1} s (limit 10 s)"))
}

fn c02() -> Verdict {
    let t = Instant::now();
    let r = report("cone", json!({"samples": 10_000, "tol": 1e-10}));
    let secs = t.elapsed().as_secs_f64();
    let worst = f(&r["result"]["worst_slack"]);
    let families = r["result"]["components"].as_array().unwrap().len();
    let pass = r["violations"] == 0 && worst >= -1e-10 && families == 7 && secs <= 60.0;
    verdict(pass, format!("worst slack {worst:.2e} >= -1e-10 over {families} families x 10^4 in {secs:.1} s (limit 60 s)"))
}

fn c03() -> Verdict {
    let r = report("spectral-derivs", json!({"samples": 1000, "gap": 0.5, "tol": 1e-6}));
    let err = f(&r["result"]["max_error"]);
    let mism = r["result"]["sparsity_mismatches"].as_u64().unwrap();
    let pass = r["violations"] == 0 && err <= 1e-6 && mism == 0;
    verdict(pass, format!("max error {err:.2e} <= 1e-6, {mism} sparsity mismatches over 10^3 diagonals"))
}

fn c04() -> Verdict {
    let t = Instant::now();
    let r = report("concavity-fuzz", json!({"n_values": [3, 4, 5], "samples": 100_000, "tol": 1e-9}));
    let worst = f(&r["result"]["worst_residual"]);
    let sampled: u64 = r["result"]["groups"].as_array().unwrap().iter().map(|g| g["samples"].as_u64().unwrap()).sum();
    let mut pass = r["violations"] == 0 && worst >= -1e-9 && sampled == 100_000;
    let mut thresholds = Vec::new();
    for n in [3, 4] {
        for tau in [0.25, 0.5] {
            let cfg = json!({"n": n, "p": 2, "tau": tau, "eps": 1.0, "sigma_band": [0.5, 2.0], "trials": 10_000});
            let r = report("find-m", cfg);
            let th = &r["result"]["threshold"];
            let m = f(&th["m_hat"]);
            pass &= r["violations"] == 0 && m.is_finite() && f(&th["worst_residual"]) >= -1e-9;
            thresholds.push(format!("M(n={n},tau={tau})={m}"));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs <= 300.0;
    verdict(
        pass,
        format!("worst residual {worst:.3e} >= -1e-9 on {sampled} samples; {}; {secs:.1} s (limit 300 s)", thresholds.join(", ")),
    )
}

fn c05() -> Verdict {
    let r = report("subsolution", json!({"resolution": 129, "rank_one_samples": 10_000, "rank_one_tol": 1e-9}));
    let res = &r["result"];
    let cases = res["cases"].as_array().unwrap().len();
    let worst = f(&res["worst_slack"]);
    let rank_one = f(&res["rank_one_max_error"]);
    let pass = r["violations"] == 0 && cases == 20 && worst >= 0.0 && rank_one <= 1e-9;
    verdict(pass, format!("worst slack {worst:.3} >= 0 over {cases} balls at 129/axis; rank-one error {rank_one:.2e} <= 1e-9"))
}

fn c06() -> Verdict {
    let r = report("key-lemma", json!({"n_max": 4, "p_max": 3, "configs": 1000, "tol": 1e-9}));
    let res = &r["result"];
    let worst = f(&res["worst_slack"]);
    let verified = res["verified"].as_u64().unwrap();
    let pass = r["violations"] == 0 && verified == 1000 && worst >= -1e-9;
    verdict(pass, format!("worst slack {worst:.3e} >= -1e-9 on {verified} verified configurations"))
}

fn c07() -> Verdict {
    let t = Instant::now();
    let mut pass = true;
    let mut iters = Vec::new();
    let mut order = f64::INFINITY;
    for m in [32, 64, 128] {
        let order_sizes = if m == 32 { json!([32, 64, 128]) } else { json!([]) };
        let cfg = json!({
            "grid": {"sizes": [m, m]},
            "equation": {"p": 2, "a_field": {"kind": "conformal", "c": 1.0},
                         "rhs": {"kind": "manufactured", "amplitude": 0.3}},
            "initial": {"kind": "perturbed", "relative": 0.05},
            "tol": 1e-9, "max_iters": 12, "order_sizes": order_sizes,
        });
        let r = report("solve", cfg);
        let res = &r["result"];
        for lvl in res["order_study"].as_array().unwrap().iter().skip(1) {
            order = order.min(f(&lvl["order"]));
        }
        let trace = res["trace"].as_array().unwrap();
        pass &= res["converged"] == true
            && res["iterations"].as_u64().unwrap() <= 12
            && trace.iter().all(|s| f(&s["margin"]) > 0.0);
        iters.push(res["iterations"].as_u64().unwrap().to_string());
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= order >= 1.8 && secs <= 120.0;
    verdict(
        pass,
        format!(
            "residual order {order:.3} >= 1.8; Newton iterations {} (32/64/128) <= 12, all iterates admissible; {secs:.1} s (limit 120 s)",
            iters.join("/")
        ),
    )
}

fn c08() -> Verdict {
    let r = report("alexandrov", json!({"resolution": 129, "equality": true, "corpus": true}));
    let res = &r["result"];
    let ratio = f(&res["equality_ratio"]);
    let cases = res["cases"].as_array().unwrap();
    let corpus_ok = cases.iter().filter(|c| c["label"] != "equality").all(|c| c["holds"] == true);
    let pass = r["violations"] == 0 && (0.98..=1.02).contains(&ratio) && corpus_ok && cases.len() == 21;
    verdict(
        pass,
        format!("equality ratio {ratio:.4} in [0.98, 1.02]; {} corpus cases within 2%, max ratio {:.4}", cases.len() - 1, f(&res["max_ratio"])),
    )
}

fn c09() -> Verdict {
    let r = report("pseudo-check", json!({}));
    let mut pass = r["violations"] == 0;
    let mut checked = 1;
    // Further grids, dimensions and δ₂, always with M₂ = δ₂ⁿ.
    for (d, m) in [(2, 48), (3, 12)] {
        let grid = TorusGrid::cube(d, m).unwrap();
        let spec = EquationSpec::manufactured(2, 0.2);
        let u = manufactured_field(&grid, 0.2);
        for delta2 in [0.1f64, 0.5, 1.0, 2.0] {
            let constants = PseudoConstants { delta1: 1e-3, m1: 10.0, delta2, m2: delta2.powi(d as i32) };
            let rep = pseudo_check(&u, &PseudoCheckConfig { constants, ubar: u.clone() }, &spec).unwrap();
            pass &= rep.super_violations.is_empty() && rep.super_qualifying == grid.len();
            checked += 1;
        }
    }
    verdict(pass, format!("no supersolution violation with u = ubar, M2 = delta2^n, over {checked} configurations"))
}

/// Reduced configurations: determinism does not depend on scale.
fn small_configs() -> Vec<(&'static str, Value)> {
    vec![
        ("identities", json!({"n_max": 4, "trials": 200})),
        ("cone", json!({"samples": 200})),
        ("spectral-derivs", json!({"samples": 30, "n_max": 4})),
        ("concavity-fuzz", json!({"samples": 2000})),
        ("find-m", json!({"trials": 500})),
        ("subsolution", json!({"dims": [2], "resolution": 33, "rank_one_samples": 500})),
        ("key-lemma", json!({"configs": 30, "ray_samples": 200})),
        ("solve", json!({"grid": {"sizes": [16, 16]}, "order_sizes": [16, 32]})),
        ("alexandrov", json!({"resolution": 129})),
        ("pseudo-check", json!({"grid": {"sizes": [16, 16]}})),
    ]
}

fn strip_wall_time(text: &str) -> Value {
    let mut v: Value = serde_json::from_str(text).expect("report is JSON");
    v.as_object_mut().unwrap().remove("wall_time").expect("wall_time present");
    v
}

fn c10() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_phess");
    let dir = std::env::temp_dir().join(format!("phess-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut failures = Vec::new();
    for (name, cfg) in small_configs() {
        let cfg_path = dir.join(format!("{name}.json"));
        std::fs::write(&cfg_path, cfg.to_string()).unwrap();
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let out = Command::new(bin)
                .args([name, "--seed", "99", "--threads", threads, "--config"])
                .arg(&cfg_path)
                .output()
                .expect("binary runs");
            outputs.push((out.status.code(), String::from_utf8(out.stdout).unwrap()));
        }
        let same = outputs[0].0 == Some(0)
            && outputs[1].0 == Some(0)
            && strip_wall_time(&outputs[0].1) == strip_wall_time(&outputs[1].1)
            && strip_wall_time(&outputs[0].1)["seed"] == 99;
        // Byte identity of everything but the wall-time line.
        let lines = |s: &str| s.lines().filter(|l| !l.contains("\"wall_time\"")).collect::<Vec<_>>().join("\n");
        if !same || lines(&outputs[0].1) != lines(&outputs[1].1) {
            failures.push(name);
        }
    }
    std::fs::remove_dir_all(&dir).ok();
    let detail = if failures.is_empty() {
        "all 10 subcommands byte-identical modulo wall_time across runs and thread counts".to_string()
    } else {
        format!("differing reports: {}", failures.join(", "))
    };
    verdict(failures.is_empty(), detail)
}

fn main() {
    let criteria: [(&str, &str, fn() -> Verdict); 10] = [
        ("c01", "identities", c01),
        ("c02", "inequalities", c02),
        ("c03", "spectral derivatives", c03),
        ("c04", "concavity", c04),
        ("c05", "subsolution", c05),
        ("c06", "key lemma", c06),
        ("c07", "solver", c07),
        ("c08", "alexandrov", c08),
        ("c09", "pseudo-solution", c09),
        ("c10", "determinism", c10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} {id} {name}: {} [{:.1} s]", v.detail, t.elapsed().as_secs_f64());
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
