//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::time::{Duration, Instant};

use driftlab::experiments::{compute_with_threads, ExperimentResult};
use driftlab::spec::validate_spec;
use driftlab::table::Table;
use serde_json::json;

struct Run {
    result: ExperimentResult,
    elapsed: Duration,
}

struct Suite {
    outcomes: Vec<(u32, bool)>,
    determinism: Vec<(String, bool)>,
}

impl Suite {
    /// Runs the spec on one and on eight threads; the criterion is judged on
    /// the eight-thread output.
    fn run(&mut self, label: &str, spec: serde_json::Value) -> Option<Run> {
        let spec = match validate_spec(&spec.to_string()) {
            Ok(s) => s,
            Err(errors) => {
                eprintln!("{label}: invalid spec: {errors:?}");
                self.determinism.push((label.into(), false));
                return None;
            }
        };
        let single = compute_with_threads(&spec, 1);
        let start = Instant::now();
        let multi = compute_with_threads(&spec, 8);
        let elapsed = start.elapsed();
        match (single, multi) {
            (Ok(a), Ok(b)) => {
                let identical = a.table.to_csv_bytes() == b.table.to_csv_bytes();
                self.determinism.push((label.into(), identical));
                Some(Run { result: b, elapsed })
            }
            (a, b) => {
                eprintln!("{label}: run failed: {:?} / {:?}", a.err(), b.err());
                self.determinism.push((label.into(), false));
                None
            }
        }
    }

    fn report(&mut self, id: u32, title: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2}: {title}: {detail}");
        self.outcomes.push((id, pass));
    }
}

fn f(t: &Table, row: usize, col: &str) -> f64 {
    t.float(row, col).unwrap_or(f64::NAN)
}

fn rows_where<'a>(t: &'a Table, col: &'a str, value: &'a str) -> impl Iterator<Item = usize> + 'a {
    (0..t.rows.len()).filter(move |&r| t.text(r, col).as_deref() == Some(value))
}

fn oracle_equivalence(s: &mut Suite) {
    let run = s.run(
        "onemax oracle",
        json!({
            "kind": "ORACLE_COMPARE", "oracle": "ONEMAX", "replications": 2000,
            "master_seed": 101, "budget": "1e6", "grid": {"n": [32], "c": [0.5, 1.0]}
        }),
    );
    let Some(run) = run else {
        return s.report(1, "OneMax EA vs exact chain", false, "run failed".into());
    };
    let t = &run.result.table;
    let mut pass = run.elapsed < Duration::from_secs(60);
    let mut detail = Vec::new();
    for r in 0..t.rows.len() {
        let within = t.text(r, "within_3se").as_deref() == Some("true");
        pass &= within;
        detail.push(format!(
            "c={} mean={:.3} exact={:.3} z={:.2}",
            f(t, r, "parameter"),
            f(t, r, "mean"),
            f(t, r, "exact"),
            f(t, r, "z_score")
        ));
    }
    detail.push(format!("time={:.1}s", run.elapsed.as_secs_f64()));
    s.report(1, "OneMax EA vs exact chain", pass && t.rows.len() == 2, detail.join("; "));
}

fn additive_drift(s: &mut Suite) {
    let run = s.run(
        "additive walk",
        json!({
            "kind": "BOUNDS_CHECK", "replications": 10000, "master_seed": 202,
            "budget": "100*n", "grid": {"n": [50]},
            "cases": [{"type": "ADDITIVE_WALK", "p_down": 0.75}]
        }),
    );
    let Some(run) = run else {
        return s.report(2, "additive drift walk", false, "run failed".into());
    };
    let t = &run.result.table;
    let (exact, bound, mean, se) = (f(t, 0, "exact"), f(t, 0, "bound"), f(t, 0, "mean"), f(t, 0, "std_error"));
    let pass = bound == 100.0 && (exact - 100.0).abs() <= 1e-9 * 100.0 && (mean - 100.0).abs() <= 3.0 * se;
    s.report(
        2,
        "additive drift walk",
        pass,
        format!("exact={exact:.12} bound={bound} mean={mean:.3} se={se:.3}"),
    );
}

fn variable_drift(s: &mut Suite) {
    let run = s.run(
        "variable onemax",
        json!({
            "kind": "BOUNDS_CHECK", "replications": 500, "master_seed": 303,
            "budget": "1e6", "grid": {"n": [64]},
            "cases": [{"type": "VARIABLE_ONEMAX", "c": 0.5}]
        }),
    );
    let Some(run) = run else {
        return s.report(3, "variable drift bound", false, "run failed".into());
    };
    let t = &run.result.table;
    let (exact, bound) = (f(t, 0, "exact"), f(t, 0, "bound"));
    s.report(
        3,
        "variable drift bound",
        bound >= exact,
        format!("bound={bound:.2} exact={exact:.2} ratio={:.3}", bound / exact),
    );
}

fn multiplicative_tail(s: &mut Suite) {
    let run = s.run(
        "multiplicative tail",
        json!({
            "kind": "BOUNDS_CHECK", "replications": 100000, "master_seed": 404,
            "budget": "1e6", "grid": {"n": [1000]},
            "cases": [{"type": "MULTIPLICATIVE_DECLINE", "a": 1.0, "k": [1.0, 2.0, 3.0]}]
        }),
    );
    let Some(run) = run else {
        return s.report(4, "multiplicative tail", false, "run failed".into());
    };
    let t = &run.result.table;
    let mut pass = t.rows.len() == 3;
    let mut detail = Vec::new();
    for r in 0..t.rows.len() {
        pass &= t.text(r, "bound_holds").as_deref() == Some("true");
        detail.push(format!(
            "k={} t_k={} emp={:.5} bound={:.5}",
            f(t, r, "k"),
            f(t, r, "tail_threshold"),
            f(t, r, "empirical_probability"),
            f(t, r, "bound_probability")
        ));
    }
    s.report(4, "multiplicative tail", pass, detail.join("; "));
}

fn negative_drift(s: &mut Suite) {
    let run = s.run(
        "negative drift",
        json!({
            "kind": "BOUNDS_CHECK", "replications": 1000, "master_seed": 505,
            "budget": "n", "grid": {"n": [200]},
            "cases": [{
                "type": "NEGATIVE_DRIFT_WALK", "epsilon": 0.2, "a": 0.25, "b": 0.75,
                "gamma": 0.5, "min_success": 0.99,
                "ascent_replications": 100, "ascent_budget": 1000000
            }]
        }),
    );
    let Some(run) = run else {
        return s.report(5, "negative drift walk", false, "run failed".into());
    };
    let t = &run.result.table;
    let descent = rows_where(t, "case", "NEGATIVE_DRIFT_WALK/DESCENT").next();
    let ascent = rows_where(t, "case", "NEGATIVE_DRIFT_WALK/ASCENT").next();
    let (Some(d), Some(a)) = (descent, ascent) else {
        return s.report(5, "negative drift walk", false, "rows missing".into());
    };
    let part_a = t.text(d, "bound_holds").as_deref() == Some("true") && f(t, d, "budget") == 750.0;
    let part_b = t.text(a, "bound_holds").as_deref() == Some("true");
    s.report(
        5,
        "negative drift walk",
        part_a && part_b,
        format!(
            "(a) success={:.3} within {} steps [{}]; (b) reached={} of {} [{}]",
            f(t, d, "empirical_probability"),
            f(t, d, "budget"),
            if part_a { "ok" } else { "below 0.99" },
            f(t, a, "replications") - f(t, a, "censored"),
            f(t, a, "replications"),
            if part_b { "ok" } else { "escaped" },
        ),
    );
}

fn decline_threshold(s: &mut Suite) {
    let scan = s.run(
        "decline scan",
        json!({
            "kind": "DECLINE_SCAN", "replications": 500, "master_seed": 606,
            "budget": "1000*ln(n)",
            "grid": {"n": [1000, 10000, 100000, 1000000], "a": [2.0, 3.5]}
        }),
    );
    let oracle = s.run(
        "decline oracle",
        json!({
            "kind": "ORACLE_COMPARE", "oracle": "RANDOM_DECLINE", "replications": 20000,
            "master_seed": 607, "budget": "1e6", "grid": {"n": [10, 100, 1000], "a": [1.0]}
        }),
    );
    let (Some(scan), Some(oracle)) = (scan, oracle) else {
        return s.report(6, "random-decline threshold", false, "run failed".into());
    };
    let t = &scan.result.table;
    let ratios = |a: &str| -> Vec<f64> {
        rows_where(t, "a", a).map(|r| f(t, r, "ratio_mean_over_ln_n")).collect()
    };
    let low = ratios("2");
    let high = ratios("3.5");
    let mean_low = low.iter().sum::<f64>() / low.len() as f64;
    let flat = low.len() == 4 && low.iter().all(|r| (r / mean_low - 1.0).abs() <= 0.15);
    let growing = high.len() == 4 && high.windows(2).all(|w| w[1] >= 1.25 * w[0]);
    let o = &oracle.result.table;
    let exact_ok = o.rows.len() == 3 && (0..3).all(|r| o.text(r, "within_3se").as_deref() == Some("true"));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",");
    let z: Vec<f64> = (0..o.rows.len()).map(|r| f(o, r, "z_score")).collect();
    s.report(
        6,
        "random-decline threshold",
        flat && growing && exact_ok,
        format!(
            "a=2 ratios [{}] flat={flat}; a=3.5 ratios [{}] growing={growing}; a=1 z [{}] ok={exact_ok}",
            fmt(&low),
            fmt(&high),
            fmt(&z)
        ),
    );
}

fn linear_constant(s: &mut Suite) {
    let run = s.run(
        "linear constant",
        json!({
            "kind": "LINEAR_CONSTANT", "replications": 200, "master_seed": 707,
            "budget": "100*n*ln(n)",
            "grid": {"n": [512, 2048], "c": [0.5, 1.0], "fitness": ["ONEMAX", "BINVAL", "RANDOM_LINEAR"]}
        }),
    );
    let Some(run) = run else {
        return s.report(7, "linear-function constant", false, "run failed".into());
    };
    let t = &run.result.table;
    let mut within = true;
    let mut toward = 0;
    let mut detail = Vec::new();
    // Rows come in (fitness, c, n) order, so each pair is one (fitness, c) cell.
    for pair in (0..t.rows.len()).collect::<Vec<_>>().chunks(2) {
        let (small, large) = (pair[0], pair[1]);
        let (r0, r1) = (f(t, small, "ratio"), f(t, large, "ratio"));
        within &= (r0 - 1.0).abs() <= 0.25 && (r1 - 1.0).abs() <= 0.25;
        if (r1 - 1.0).abs() < (r0 - 1.0).abs() {
            toward += 1;
        }
        detail.push(format!(
            "{} c={}: {r0:.3}->{r1:.3}",
            t.text(small, "fitness").unwrap_or_default(),
            f(t, small, "c")
        ));
    }
    s.report(
        7,
        "linear-function constant",
        t.rows.len() == 12 && within && toward >= 5,
        format!("ratio to e^c/c {}; toward in {toward}/6", detail.join(", ")),
    );
}

fn monotone_easy(s: &mut Suite) {
    let run = s.run(
        "monotone easy",
        json!({
            "kind": "MONOTONE_EASY", "replications": 50, "master_seed": 808,
            "budget": "60*n*ln(n)", "grid": {"n": [500], "c": [0.5]},
            "hot": {"mode": "TIME_DEPENDENT"}
        }),
    );
    let Some(run) = run else {
        return s.report(8, "monotone, small c", false, "run failed".into());
    };
    let t = &run.result.table;
    let censored = f(t, 0, "censored");
    s.report(
        8,
        "monotone, small c",
        censored == 0.0,
        format!(
            "budget={} finished={} of 50 max_steps={}",
            f(t, 0, "budget"),
            f(t, 0, "optimum_count"),
            f(t, 0, "max_steps")
        ),
    );
}

fn monotone_hard(s: &mut Suite) {
    let run = s.run(
        "monotone hard",
        json!({
            "kind": "MONOTONE_HARD", "replications": 50, "master_seed": 909,
            "budget": "500*n*ln(n)", "grid": {"n": [200, 400], "c": [2.5]},
            "hot": {"design_c": 2.5, "mode": "TIME_DEPENDENT"}
        }),
    );
    let Some(run) = run else {
        return s.report(9, "monotone hardness", false, "run failed".into());
    };
    let t = &run.result.table;
    let mut pass = t.rows.len() == 2;
    let mut detail = Vec::new();
    for r in 0..t.rows.len() {
        let optimum = f(t, r, "optimum_count");
        let frac = f(t, r, "frac_final_density_above_half_epsilon");
        pass &= optimum == 0.0 && frac >= 0.95;
        detail.push(format!(
            "n={}: optimum={optimum} dense={frac:.2} mean_density={:.3}",
            f(t, r, "n"),
            f(t, r, "mean_final_density")
        ));
    }
    let eps = run.result.derived["hot_constants"]["epsilon"].as_f64().unwrap_or(f64::NAN);
    detail.push(format!("epsilon={eps:.5}"));
    s.report(9, "monotone hardness", pass, detail.join("; "));
}

fn density_ordering(s: &mut Suite) {
    let run = s.run(
        "density track",
        json!({
            "kind": "DENSITY_TRACK", "replications": 20, "master_seed": 1010,
            "budget": "100*n", "grid": {"n": [2000], "c": [1.0], "fitness": ["BINVAL"]},
            "density": {"set_size": 200, "stride": "n", "from": "10*n", "to": "100*n", "tolerance": 0.05}
        }),
    );
    let Some(run) = run else {
        return s.report(10, "density ordering", false, "run failed".into());
    };
    let t = &run.result.table;
    let frac = f(t, 0, "hold_fraction");
    s.report(
        10,
        "density ordering",
        frac >= 0.99,
        format!(
            "held at {} of {} probes ({frac:.4}); max gap {:.4}",
            f(t, 0, "hold_count"),
            f(t, 0, "probe_count"),
            f(t, 0, "max_gap")
        ),
    );
}

fn binomial_grid(s: &mut Suite) {
    let run = s.run(
        "binomial grid",
        json!({
            "kind": "BOUNDS_CHECK", "replications": 1, "master_seed": 1111,
            "budget": "1", "grid": {"n": [64]},
            "cases": [{"type": "BINOMIAL_GRID", "n_max": 64, "p_points": 101}]
        }),
    );
    let Some(run) = run else {
        return s.report(11, "binomial inequality", false, "run failed".into());
    };
    let t = &run.result.table;
    let violations = f(t, 0, "violations");
    s.report(11, "binomial inequality", violations == 0.0, format!("{violations} violations over 65 x 101 points"));
}

fn main() {
    let mut s = Suite {
        outcomes: Vec::new(),
        determinism: Vec::new(),
    };
    oracle_equivalence(&mut s);
    additive_drift(&mut s);
    variable_drift(&mut s);
    multiplicative_tail(&mut s);
    negative_drift(&mut s);
    decline_threshold(&mut s);
    linear_constant(&mut s);
    monotone_easy(&mut s);
    monotone_hard(&mut s);
    density_ordering(&mut s);
    binomial_grid(&mut s);

    let differing: Vec<&str> = s
        .determinism
        .iter()
        .filter(|(_, same)| !same)
        .map(|(l, _)| l.as_str())
        .collect();
    let detail = if differing.is_empty() {
        format!("{} experiments byte-identical at 1 and 8 threads", s.determinism.len())
    } else {
        format!("differing: {}", differing.join(", "))
    };
    s.report(12, "determinism across thread counts", differing.is_empty(), detail);

    let failed: Vec<String> = s.outcomes.iter().filter(|(_, p)| !p).map(|(i, _)| i.to_string()).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        s.outcomes.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
