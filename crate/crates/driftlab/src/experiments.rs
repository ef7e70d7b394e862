//! Grid orchestration for every experiment kind.
//!
//! Cells run one after another in grid order; replications inside a cell run
//! in parallel and are collected by index. Cell `i` uses
//! `derive_seed(master_seed, i)` and replication `r` of it
//! `derive_seed(cell_seed, r)`, so output never depends on the thread count.

use std::fs;
use std::path::{Path, PathBuf};

use driftlab_core::bounds::{
    additive_bound, binomial_positive_lb, multiplicative_mean_bound, multiplicative_tail,
    negative_drift_thresholds, variable_drift_bound, BoundValue,
};
use driftlab_core::chain::walks::BiasedWalk;
use driftlab_core::chain::{replicate_hitting, replicate_outcomes, solve_expected_hitting, HittingTime};
use driftlab_core::decline::{
    exact_expected_time, make_random_decline, rescaling_constant, threshold_scan, DeclineFactor,
};
use driftlab_core::ea::{
    onemax_zero_chain, run_ea, write_trace_csv, Probe, ProbeSpec, RunStatus, TracePoint,
};
use driftlab_core::fitness::{
    binval, hot_monotone, onemax, random_linear, HotMonotoneConfig, WeightDistribution,
};
use driftlab_core::seed::{derive_seed, replicate, with_threads};
use driftlab_core::{BitString, EAParams, Fitness, HittingStats, NoiseConfig, Start};
use serde_json::{json, Map, Value};

use crate::formula::Formula;
use crate::noise::noise_preset;
use crate::spec::{BoundsCase, ExperimentSpec, FitnessKind, Kind, OracleKind};
use crate::table::{Cell, Table};
use crate::DriftlabError;

/// Everything an experiment produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub table: Table,
    /// Constants chosen or computed while running (alpha, C, L_max, ...).
    pub derived: Map<String, Value>,
    pub traces: Option<Vec<TracePoint>>,
    /// Cells whose computation failed; their rows carry a note.
    pub failed_cells: usize,
}

/// Paths of the files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub trace: Option<PathBuf>,
    pub rows: usize,
    pub failed_cells: usize,
}

pub const DECLINE_SCAN_HEADER: &[&str] = &[
    "a",
    "n",
    "replications",
    "mean",
    "std_error",
    "censored",
    "ratio_mean_over_ln_n",
];

pub const LINEAR_CONSTANT_HEADER: &[&str] = &[
    "kind",
    "fitness",
    "n",
    "c",
    "replications",
    "budget",
    "mean",
    "std_error",
    "median",
    "censored",
    "theory_value",
    "ratio",
    "seed",
    "note",
];

pub const MONOTONE_HEADER: &[&str] = &[
    "kind",
    "n",
    "c",
    "replications",
    "budget",
    "mean",
    "std_error",
    "median",
    "censored",
    "cap_reached",
    "optimum_count",
    "max_steps",
    "mean_final_density",
    "frac_final_density_above_half_epsilon",
    "theory_value",
    "ratio",
    "seed",
    "note",
];

pub const BOUNDS_CHECK_HEADER: &[&str] = &[
    "case",
    "theorem",
    "n",
    "parameter",
    "k",
    "replications",
    "start",
    "budget",
    "mean",
    "std_error",
    "censored",
    "exact",
    "bound",
    "direction",
    "bound_holds",
    "tail_threshold",
    "bound_probability",
    "empirical_probability",
    "violations",
    "seed",
    "note",
];

pub const ORACLE_COMPARE_HEADER: &[&str] = &[
    "oracle",
    "n",
    "parameter",
    "replications",
    "budget",
    "mean",
    "std_error",
    "censored",
    "exact",
    "z_score",
    "within_3se",
    "seed",
    "note",
];

pub const DENSITY_TRACK_HEADER: &[&str] = &[
    "kind",
    "fitness",
    "n",
    "c",
    "replications",
    "budget",
    "probe_count",
    "hold_count",
    "hold_fraction",
    "min_run_hold_fraction",
    "mean_gap",
    "max_gap",
    "tolerance",
    "seed",
    "note",
];

pub fn header_for(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::DeclineScan => DECLINE_SCAN_HEADER,
        Kind::LinearConstant => LINEAR_CONSTANT_HEADER,
        Kind::MonotoneHard | Kind::MonotoneEasy => MONOTONE_HEADER,
        Kind::BoundsCheck => BOUNDS_CHECK_HEADER,
        Kind::OracleCompare => ORACLE_COMPARE_HEADER,
        Kind::DensityTrack => DENSITY_TRACK_HEADER,
    }
}

fn runtime(msg: impl std::fmt::Display) -> DriftlabError {
    DriftlabError::Runtime(msg.to_string())
}

/// Runs `spec` and returns the table without touching the file system.
pub fn compute(spec: &ExperimentSpec) -> Result<ExperimentResult, DriftlabError> {
    let mut ctx = Ctx {
        spec,
        budget: spec.budget_formula(),
        table: Table::new(header_for(spec.kind)),
        derived: Map::new(),
        traces: None,
        failed_cells: 0,
        next_cell: 0,
    };
    match spec.kind {
        Kind::DeclineScan => ctx.decline_scan()?,
        Kind::LinearConstant => ctx.linear_constant()?,
        Kind::MonotoneHard | Kind::MonotoneEasy => ctx.monotone()?,
        Kind::BoundsCheck => ctx.bounds_check()?,
        Kind::OracleCompare => ctx.oracle_compare()?,
        Kind::DensityTrack => ctx.density_track()?,
    }
    Ok(ExperimentResult {
        table: ctx.table,
        derived: ctx.derived,
        traces: ctx.traces,
        failed_cells: ctx.failed_cells,
    })
}

/// Summary JSON text: the spec, the tool version, derived constants and
/// the names of the files written.
pub fn summary_json(spec: &ExperimentSpec, result: &ExperimentResult, trace_name: Option<&str>) -> String {
    let mut outputs = Map::new();
    outputs.insert("csv".into(), json!(spec.csv_name()));
    if let Some(t) = trace_name {
        outputs.insert("trace".into(), json!(t));
    }
    let summary = json!({
        "tool": "driftlab",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "spec": spec,
        "derived": result.derived,
        "outputs": outputs,
        "rows": result.table.rows.len(),
        "failed_cells": result.failed_cells,
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    text
}

fn trace_name(spec: &ExperimentSpec) -> String {
    let csv = spec.csv_name();
    let stem = csv.strip_suffix(".csv").unwrap_or(&csv);
    format!("{stem}.trace.csv")
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), DriftlabError> {
    fs::write(path, bytes).map_err(|source| DriftlabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `spec` and writes the CSV, the optional trace CSV and the summary
/// into `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<RunReport, DriftlabError> {
    let result = compute(spec)?;
    fs::create_dir_all(out_dir).map_err(|source| DriftlabError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let csv = out_dir.join(spec.csv_name());
    write(&csv, &result.table.to_csv_bytes())?;
    let trace = match &result.traces {
        Some(points) => {
            let name = trace_name(spec);
            let path = out_dir.join(&name);
            let mut bytes = Vec::new();
            write_trace_csv(points, &mut bytes).map_err(runtime)?;
            write(&path, &bytes)?;
            Some(path)
        }
        None => None,
    };
    let summary = out_dir.join(spec.summary_name());
    let tname = trace.as_ref().map(|_| trace_name(spec));
    write(&summary, summary_json(spec, &result, tname.as_deref()).as_bytes())?;
    Ok(RunReport {
        csv,
        summary,
        trace,
        rows: result.table.rows.len(),
        failed_cells: result.failed_cells,
    })
}

/// [`run_experiment`] on a dedicated pool of `threads` workers (0: default).
pub fn run_with_threads(
    spec: &ExperimentSpec,
    out_dir: &Path,
    threads: usize,
) -> Result<RunReport, DriftlabError> {
    with_threads(threads, || run_experiment(spec, out_dir)).map_err(runtime)?
}

/// [`compute`] on a dedicated pool of `threads` workers (0: default).
pub fn compute_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentResult, DriftlabError> {
    with_threads(threads, || compute(spec)).map_err(runtime)?
}

/// Delegates everything but the optimum predicate, turning a run into a
/// fixed-length probing run.
struct ProbeOnly(Box<dyn Fitness>);

impl Fitness for ProbeOnly {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn evaluate(&self, point: &BitString) -> f64 {
        self.0.evaluate(point)
    }
    fn delta(&self, parent: &BitString, flips: &[usize]) -> f64 {
        self.0.delta(parent, flips)
    }
    fn is_optimum(&self, _point: &BitString) -> Option<bool> {
        None
    }
    fn is_stateful(&self) -> bool {
        self.0.is_stateful()
    }
    fn reset(&mut self, start: &BitString) {
        self.0.reset(start)
    }
    fn accepted(&mut self, point: &BitString, flips: &[usize]) {
        self.0.accepted(point, flips)
    }
    fn cap_reached(&self) -> bool {
        self.0.cap_reached()
    }
}

fn hitting_time(status: RunStatus) -> HittingTime {
    match status {
        RunStatus::Optimum(t) => HittingTime::Hit(t),
        other => HittingTime::Censored(other.steps()),
    }
}

fn n_ln_n(n: u64) -> f64 {
    n as f64 * (n as f64).ln()
}

fn exact_floor(x: f64, n: u64) -> u64 {
    DeclineFactor::from_f64(x)
        .map(|d| d.floor_mul(n))
        .unwrap_or_else(|_| (x * n as f64).floor() as u64)
}

fn exact_ceil(x: f64, n: u64) -> u64 {
    match DeclineFactor::from_f64(x) {
        Ok(d) => {
            let prod = u128::from(d.numer()) * u128::from(n);
            u64::try_from(prod.div_ceil(u128::from(d.denom()))).unwrap_or(u64::MAX)
        }
        Err(_) => (x * n as f64).ceil() as u64,
    }
}

struct Ctx<'a> {
    spec: &'a ExperimentSpec,
    budget: Formula,
    table: Table,
    derived: Map<String, Value>,
    traces: Option<Vec<TracePoint>>,
    failed_cells: usize,
    next_cell: u64,
}

impl Ctx<'_> {
    fn cell_seed(&mut self) -> u64 {
        let s = derive_seed(self.spec.master_seed, self.next_cell);
        self.next_cell += 1;
        s
    }

    fn budget_at(&self, n: u64) -> Result<u64, DriftlabError> {
        self.budget.budget(n).map_err(runtime)
    }

    fn noise_for(&mut self, c: f64) -> Result<NoiseConfig, DriftlabError> {
        let Some(ns) = self.spec.noise else {
            return Ok(NoiseConfig::noiseless());
        };
        let mut cfg = match ns.preset {
            Some(p) => {
                let preset = noise_preset(p.epsilon, c, p.c_max).map_err(runtime)?;
                let presets = self
                    .derived
                    .entry("noise_presets")
                    .or_insert_with(|| Value::Array(Vec::new()));
                if let Value::Array(list) = presets {
                    let entry = json!({ "c": c, "preset": preset });
                    if !list.contains(&entry) {
                        list.push(entry);
                    }
                }
                preset.config()
            }
            None => NoiseConfig {
                delta1: ns.delta1.unwrap_or(0.0),
                delta2: ns.delta2.unwrap_or(1.0),
                ..NoiseConfig::noiseless()
            },
        };
        cfg.adversary1 = ns.adversary1;
        cfg.adversary2 = ns.adversary2;
        Ok(cfg)
    }

    fn weights(&self) -> WeightDistribution {
        self.spec.weights.unwrap_or_default()
    }

    fn decline_scan(&mut self) -> Result<(), DriftlabError> {
        let spec = self.spec;
        let factors: Vec<DeclineFactor> = spec
            .grid
            .a
            .iter()
            .map(|&a| DeclineFactor::from_f64(a).map_err(runtime))
            .collect::<Result<_, _>>()?;
        let mut budgets = Vec::new();
        for &n in &spec.grid.n {
            budgets.push((n, self.budget_at(n)?));
        }
        let rows = threshold_scan(
            &factors,
            &spec.grid.n,
            spec.replications,
            |n| budgets.iter().find(|(m, _)| *m == n).map_or(1, |(_, b)| *b),
            spec.master_seed,
        )
        .map_err(runtime)?;
        for row in &rows {
            if row.stats.is_none() {
                self.failed_cells += 1;
            }
            self.table.push(vec![
                row.a.into(),
                row.n.into(),
                row.replications.into(),
                row.mean().into(),
                row.std_error().into(),
                row.censored.into(),
                row.ratio_mean_over_ln_n().into(),
            ]);
        }
        let mut per_a = Vec::new();
        for a in &factors {
            let below = a.to_f64() < std::f64::consts::E;
            let mut entry = json!({ "a": a.to_string(), "below_threshold": below });
            if let Ok((c, margin)) = rescaling_constant(*a) {
                entry["rescaling_constant"] = json!(c);
                entry["rescaled_drift_margin"] = json!(margin);
            }
            per_a.push(entry);
        }
        self.derived.insert("threshold_a".into(), json!(std::f64::consts::E));
        self.derived.insert("decline_factors".into(), Value::Array(per_a));
        self.derived.insert("budgets".into(), json!(budgets));
        Ok(())
    }

    fn make_fitness(kind: FitnessKind, n: usize, weights: WeightDistribution, seed: u64) -> Result<Box<dyn Fitness>, String> {
        Ok(match kind {
            FitnessKind::Onemax => Box::new(onemax(n)),
            FitnessKind::Binval => Box::new(binval(n)),
            FitnessKind::RandomLinear => {
                Box::new(random_linear(n, weights, seed).map_err(|e| e.to_string())?)
            }
        })
    }

    fn linear_constant(&mut self) -> Result<(), DriftlabError> {
        let spec = self.spec;
        let weights = self.weights();
        for &fk in &spec.grid.fitness {
            for &c in &spec.grid.c {
                for &n in &spec.grid.n {
                    let seed = self.cell_seed();
                    let budget = self.budget_at(n)?;
                    let noise = self.noise_for(c)?;
                    let theory = c.exp() / c;
                    let mut row = vec![
                        spec.kind.name().into(),
                        fk.name().into(),
                        n.into(),
                        c.into(),
                        spec.replications.into(),
                        budget.into(),
                    ];
                    let params = EAParams::new(n as usize, c).map_err(runtime)?;
                    let results = replicate(spec.replications, seed, |_, s| {
                        let mut f = Self::make_fitness(fk, n as usize, weights, derive_seed(s, 1))?;
                        run_ea(f.as_mut(), &params, &Start::Random, &noise, budget, derive_seed(s, 0), None)
                            .map(|r| r.status)
                            .map_err(|e| e.to_string())
                    });
                    match results.into_iter().collect::<Result<Vec<_>, _>>() {
                        Ok(statuses) => {
                            let times: Vec<_> = statuses.into_iter().map(hitting_time).collect();
                            let censored = times.iter().filter(|t| t.is_censored()).count();
                            let stats = HittingStats::from_times(&times, budget, seed).ok();
                            let ratio = stats
                                .as_ref()
                                .filter(|_| censored == 0)
                                .map(|s| s.mean / n_ln_n(n) / theory);
                            if stats.is_none() {
                                self.failed_cells += 1;
                            }
                            row.extend([
                                stats.as_ref().map(|s| s.mean).into(),
                                stats.as_ref().map(|s| s.std_error).into(),
                                stats.as_ref().map(|s| s.median).into(),
                                censored.into(),
                                theory.into(),
                                ratio.into(),
                                seed.into(),
                                stats.is_none().then_some("all runs censored").into(),
                            ]);
                        }
                        Err(e) => {
                            self.failed_cells += 1;
                            row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, theory.into(), Cell::Empty, seed.into(), e.into()]);
                        }
                    }
                    self.table.push(row);
                }
            }
        }
        Ok(())
    }

    fn monotone(&mut self) -> Result<(), DriftlabError> {
        let spec = self.spec;
        let hot = spec.hot.clone().unwrap_or_default();
        let k = hot.constants().map_err(runtime)?;
        let mut per_n = Vec::new();
        for &n in &spec.grid.n {
            let cfg = HotMonotoneConfig {
                n: n as usize,
                c: hot.design_c,
                alpha: k.alpha,
                beta: k.beta,
                epsilon: k.epsilon,
                mu: k.mu,
                level_cap: hot.level_cap,
                seed: 0,
            };
            match hot_monotone(cfg.clone(), driftlab_core::fitness::Mode::TimeDependent) {
                Ok(f) => per_n.push(json!({
                    "n": n,
                    "level_cap": f.level_cap(),
                    "a_size": f.a_size(),
                    "b_size": f.b_size(),
                    "zero_threshold": f.zero_threshold(),
                })),
                Err(e) => per_n.push(json!({ "n": n, "error": e.to_string() })),
            }
        }
        self.derived.insert("hot_constants".into(), json!(k));
        self.derived.insert("hot_design_c".into(), json!(hot.design_c));
        self.derived.insert("hot_mode".into(), json!(hot.mode));
        self.derived.insert("hot_sizes".into(), Value::Array(per_n));

        for &c in &spec.grid.c {
            for &n in &spec.grid.n {
                let seed = self.cell_seed();
                let budget = self.budget_at(n)?;
                let noise = self.noise_for(c)?;
                let params = EAParams::new(n as usize, c).map_err(runtime)?;
                let theory = (spec.kind == Kind::MonotoneEasy && c < 1.0)
                    .then(|| (1.0 + c) / (c * (1.0 - c)) * n_ln_n(n));
                let results = replicate(spec.replications, seed, |_, s| {
                    let cfg = HotMonotoneConfig {
                        n: n as usize,
                        c: hot.design_c,
                        alpha: k.alpha,
                        beta: k.beta,
                        epsilon: k.epsilon,
                        mu: k.mu,
                        level_cap: hot.level_cap,
                        seed: derive_seed(s, 1),
                    };
                    let mut f = hot_monotone(cfg, hot.mode).map_err(|e| e.to_string())?;
                    let r = run_ea(&mut f, &params, &Start::Random, &noise, budget, derive_seed(s, 0), None)
                        .map_err(|e| e.to_string())?;
                    Ok::<_, String>((r.status, r.final_point.zero_count() as f64 / n as f64))
                });
                let mut row = vec![
                    spec.kind.name().into(),
                    n.into(),
                    c.into(),
                    spec.replications.into(),
                    budget.into(),
                ];
                match results.into_iter().collect::<Result<Vec<_>, _>>() {
                    Ok(runs) => {
                        let times: Vec<_> = runs.iter().map(|(s, _)| hitting_time(*s)).collect();
                        let censored = times.iter().filter(|t| t.is_censored()).count();
                        let cap = runs.iter().filter(|(s, _)| matches!(s, RunStatus::CapReached(_))).count();
                        let optimum = runs.len() - censored;
                        let max_steps = times.iter().filter_map(|t| t.steps()).max();
                        let densities: Vec<f64> = runs.iter().map(|(_, d)| *d).collect();
                        let mean_density = densities.iter().sum::<f64>() / densities.len() as f64;
                        let above = densities.iter().filter(|&&d| d > k.epsilon / 2.0).count() as f64
                            / densities.len() as f64;
                        let stats = HittingStats::from_times(&times, budget, seed).ok();
                        let ratio = match (&stats, theory) {
                            (Some(s), Some(t)) if censored == 0 => Some(s.mean / t),
                            _ => None,
                        };
                        row.extend([
                            stats.as_ref().map(|s| s.mean).into(),
                            stats.as_ref().map(|s| s.std_error).into(),
                            stats.as_ref().map(|s| s.median).into(),
                            censored.into(),
                            cap.into(),
                            optimum.into(),
                            max_steps.into(),
                            mean_density.into(),
                            above.into(),
                            theory.into(),
                            ratio.into(),
                            seed.into(),
                            Cell::Empty,
                        ]);
                    }
                    Err(e) => {
                        self.failed_cells += 1;
                        row.extend((0..11).map(|_| Cell::Empty));
                        row.extend([seed.into(), e.into()]);
                    }
                }
                self.table.push(row);
            }
        }
        Ok(())
    }

    fn bounds_row(&mut self, fields: &[(&str, Cell)]) {
        let mut row = vec![Cell::Empty; BOUNDS_CHECK_HEADER.len()];
        for (name, value) in fields {
            let col = BOUNDS_CHECK_HEADER
                .iter()
                .position(|h| h == name)
                .expect("known column");
            row[col] = value.clone();
        }
        self.table.push(row);
    }

    fn bounds_check(&mut self) -> Result<(), DriftlabError> {
        let spec = self.spec;
        for case in &spec.cases {
            match case {
                BoundsCase::AdditiveWalk { p_down } => {
                    for &n in &spec.grid.n {
                        self.additive_walk(*p_down, n)?;
                    }
                }
                BoundsCase::VariableOnemax { c } => {
                    for &n in &spec.grid.n {
                        self.variable_onemax(*c, n)?;
                    }
                }
                BoundsCase::MultiplicativeDecline { a, k } => {
                    for &n in &spec.grid.n {
                        self.multiplicative_decline(*a, k, n)?;
                    }
                }
                BoundsCase::NegativeDriftWalk {
                    epsilon,
                    a,
                    b,
                    gamma,
                    min_success,
                    ascent_replications,
                    ascent_budget,
                } => {
                    for &n in &spec.grid.n {
                        self.negative_drift(*epsilon, *a, *b, *gamma, *min_success, *ascent_replications, *ascent_budget, n)?;
                    }
                }
                BoundsCase::BinomialGrid { n_max, p_points } => {
                    let seed = self.cell_seed();
                    let mut violations = 0u64;
                    for n in 0..=*n_max {
                        for i in 0..*p_points {
                            let p = i as f64 / (*p_points - 1) as f64;
                            let lhs = binomial_positive_lb(n, p);
                            let rhs = 1.0 - (1.0 - p).powi(n as i32);
                            if lhs > rhs {
                                violations += 1;
                            }
                        }
                    }
                    self.bounds_row(&[
                        ("case", "BINOMIAL_GRID".into()),
                        ("theorem", "BINOMIAL".into()),
                        ("n", (*n_max).into()),
                        ("parameter", (*p_points).into()),
                        ("bound_holds", (violations == 0).into()),
                        ("violations", violations.into()),
                        ("seed", seed.into()),
                    ]);
                }
            }
        }
        Ok(())
    }

    fn additive_walk(&mut self, p_down: f64, n: u64) -> Result<(), DriftlabError> {
        let seed = self.cell_seed();
        let budget = self.budget_at(n)?;
        let reps = self.spec.replications;
        // Reflecting far above the start changes E[T] by (q/p)^{19 n}.
        let cap = 20 * n.max(1);
        let walk = BiasedWalk::new(p_down, Some(cap)).map_err(runtime)?;
        let drift = 2.0 * p_down - 1.0;
        let bound = additive_bound(n as f64, drift).map_err(runtime)?;
        let states: Vec<u64> = (0..=cap).collect();
        let exact = solve_expected_hitting::<f64, _, _>(&walk, |x: &u64| *x == 0, &states)
            .map(|m| m[&n]);
        let stats = replicate_hitting(&walk, &n, |x: &u64| *x == 0, reps, budget, seed);
        let mut note = Vec::new();
        if let Err(e) = &exact {
            note.push(e.to_string());
        }
        if let Err(e) = &stats {
            note.push(e.to_string());
        }
        if !note.is_empty() {
            self.failed_cells += 1;
        }
        let exact = exact.ok();
        let stats = stats.ok();
        self.bounds_row(&[
            ("case", "ADDITIVE_WALK".into()),
            ("theorem", bound.theorem_id.name().into()),
            ("n", n.into()),
            ("parameter", p_down.into()),
            ("replications", reps.into()),
            ("start", n.into()),
            ("budget", budget.into()),
            ("mean", stats.as_ref().map(|s| s.mean).into()),
            ("std_error", stats.as_ref().map(|s| s.std_error).into()),
            ("censored", stats.as_ref().map(|s| s.censored_count).into()),
            ("exact", exact.into()),
            ("bound", bound.value().into()),
            ("direction", "UPPER".into()),
            ("bound_holds", exact.map(|e| e <= bound.value() * (1.0 + 1e-9)).into()),
            ("seed", seed.into()),
            ("note", (!note.is_empty()).then(|| note.join("; ")).into()),
        ]);
        Ok(())
    }

    fn onemax_exact(n: u64, c: f64) -> Result<f64, String> {
        let chain = onemax_zero_chain(n as usize, c).map_err(|e| e.to_string())?;
        let states: Vec<u64> = (0..=n).collect();
        solve_expected_hitting::<f64, _, _>(&chain, |x: &u64| *x == 0, &states)
            .map(|m| m[&n])
            .map_err(|e| e.to_string())
    }

    fn onemax_from_zeros(&self, n: u64, c: f64, budget: u64, seed: u64) -> Result<HittingStats, String> {
        let params = EAParams::new(n as usize, c).map_err(|e| e.to_string())?;
        let noise = NoiseConfig::noiseless();
        let start = Start::Given(BitString::zeros(n as usize));
        let times = replicate(self.spec.replications, seed, |_, s| {
            run_ea(&mut onemax(n as usize), &params, &start, &noise, budget, s, None)
                .map(|r| hitting_time(r.status))
                .map_err(|e| e.to_string())
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        HittingStats::from_times(&times, budget, seed).map_err(|e| e.to_string())
    }

    fn variable_onemax(&mut self, c: f64, n: u64) -> Result<(), DriftlabError> {
        let seed = self.cell_seed();
        let budget = self.budget_at(n)?;
        let nf = n as f64;
        let h = move |x: f64| x * c * (1.0 - c) / (nf * (1.0 + c));
        let bound = variable_drift_bound(&h, nf, 0.5).map_err(runtime)?;
        let exact = Self::onemax_exact(n, c);
        let stats = self.onemax_from_zeros(n, c, budget, seed);
        let note: Vec<String> = [exact.as_ref().err(), stats.as_ref().err()]
            .into_iter()
            .flatten()
            .cloned()
            .collect();
        if !note.is_empty() {
            self.failed_cells += 1;
        }
        let exact = exact.ok();
        let stats = stats.ok();
        self.bounds_row(&[
            ("case", "VARIABLE_ONEMAX".into()),
            ("theorem", bound.theorem_id.name().into()),
            ("n", n.into()),
            ("parameter", c.into()),
            ("replications", self.spec.replications.into()),
            ("start", n.into()),
            ("budget", budget.into()),
            ("mean", stats.as_ref().map(|s| s.mean).into()),
            ("std_error", stats.as_ref().map(|s| s.std_error).into()),
            ("censored", stats.as_ref().map(|s| s.censored_count).into()),
            ("exact", exact.into()),
            ("bound", bound.value().into()),
            ("direction", "UPPER".into()),
            ("bound_holds", exact.map(|e| bound.value() >= e).into()),
            ("seed", seed.into()),
            ("note", (!note.is_empty()).then(|| note.join("; ")).into()),
        ]);
        Ok(())
    }

    fn multiplicative_decline(&mut self, a: f64, ks: &[f64], n: u64) -> Result<(), DriftlabError> {
        let seed = self.cell_seed();
        let budget = self.budget_at(n)?;
        let reps = self.spec.replications;
        let factor = DeclineFactor::from_f64(a).map_err(runtime)?;
        let chain = make_random_decline(factor);
        let delta = 1.0 - a / 2.0;
        let mean_bound = multiplicative_mean_bound(n as f64, delta).map_err(runtime)?;
        let exact: Option<f64> = exact_expected_time(factor, n).ok();
        let times = replicate_outcomes(&chain, &n, |x: &u64| *x == 0, reps, budget, seed);
        let stats = HittingStats::from_times(&times, budget, seed).ok();
        for &k in ks {
            let tail = multiplicative_tail(n as f64, delta, k).map_err(runtime)?;
            let BoundValue::Tail { t_threshold, probability } = tail.bound_value else {
                unreachable!("tail bounds report a threshold");
            };
            let exceed = times
                .iter()
                .filter(|t| match t {
                    HittingTime::Hit(s) => *s > t_threshold,
                    HittingTime::Censored(_) => true,
                })
                .count();
            let empirical = exceed as f64 / reps as f64;
            let sigma = (probability * (1.0 - probability) / reps as f64).sqrt();
            let note = (budget < t_threshold).then_some("budget below the tail threshold; censored runs counted as exceeding");
            self.bounds_row(&[
                ("case", "MULTIPLICATIVE_DECLINE".into()),
                ("theorem", tail.theorem_id.name().into()),
                ("n", n.into()),
                ("parameter", a.into()),
                ("k", k.into()),
                ("replications", reps.into()),
                ("start", n.into()),
                ("budget", budget.into()),
                ("mean", stats.as_ref().map(|s| s.mean).into()),
                ("std_error", stats.as_ref().map(|s| s.std_error).into()),
                ("censored", times.iter().filter(|t| t.is_censored()).count().into()),
                ("exact", exact.into()),
                ("bound", mean_bound.value().into()),
                ("direction", "UPPER".into()),
                ("bound_holds", (empirical <= probability + 3.0 * sigma).into()),
                ("tail_threshold", t_threshold.into()),
                ("bound_probability", probability.into()),
                ("empirical_probability", empirical.into()),
                ("seed", seed.into()),
                ("note", note.into()),
            ]);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn negative_drift(
        &mut self,
        epsilon: f64,
        a: f64,
        b: f64,
        gamma: f64,
        min_success: f64,
        ascent_reps: usize,
        ascent_budget: u64,
        n: u64,
    ) -> Result<(), DriftlabError> {
        let walk = BiasedWalk::new((1.0 + epsilon) / 2.0, None).map_err(runtime)?;
        let report = negative_drift_thresholds(a, b, epsilon, gamma, n as f64).map_err(runtime)?;
        let threshold = report.value();
        let descent_budget = threshold.ceil() as u64;
        let low = exact_floor(a, n);
        let high_start = exact_ceil(b, n);

        let seed = self.cell_seed();
        let reps = self.spec.replications;
        let times = replicate_outcomes(&walk, &high_start, |x: &u64| *x <= low, reps, descent_budget, seed);
        let hits = times.iter().filter(|t| !t.is_censored()).count();
        let success = hits as f64 / reps as f64;
        let stats = HittingStats::from_times(&times, descent_budget, seed).ok();
        self.bounds_row(&[
            ("case", "NEGATIVE_DRIFT_WALK/DESCENT".into()),
            ("theorem", report.theorem_id.name().into()),
            ("n", n.into()),
            ("parameter", epsilon.into()),
            ("replications", reps.into()),
            ("start", high_start.into()),
            ("budget", descent_budget.into()),
            ("mean", stats.as_ref().map(|s| s.mean).into()),
            ("std_error", stats.as_ref().map(|s| s.std_error).into()),
            ("censored", (reps - hits).into()),
            ("bound", threshold.into()),
            ("direction", "UPPER".into()),
            ("bound_holds", (success >= min_success).into()),
            ("bound_probability", min_success.into()),
            ("empirical_probability", success.into()),
            ("seed", seed.into()),
        ]);

        let seed = self.cell_seed();
        let low_start = exact_ceil(a, n);
        let high = exact_ceil(b, n);
        let times = replicate_outcomes(&walk, &low_start, |x: &u64| *x >= high, ascent_reps, ascent_budget, seed);
        let reached = times.iter().filter(|t| !t.is_censored()).count();
        self.bounds_row(&[
            ("case", "NEGATIVE_DRIFT_WALK/ASCENT".into()),
            ("theorem", report.theorem_id.name().into()),
            ("n", n.into()),
            ("parameter", epsilon.into()),
            ("replications", ascent_reps.into()),
            ("start", low_start.into()),
            ("budget", ascent_budget.into()),
            ("censored", (ascent_reps - reached).into()),
            ("direction", "LOWER".into()),
            ("bound_holds", (reached == 0).into()),
            ("empirical_probability", (reached as f64 / ascent_reps as f64).into()),
            ("seed", seed.into()),
        ]);
        Ok(())
    }

    fn oracle_compare(&mut self) -> Result<(), DriftlabError> {
        let spec = self.spec;
        let oracle = spec.oracle.ok_or_else(|| runtime("oracle missing"))?;
        let (name, params): (&str, &[f64]) = match oracle {
            OracleKind::Onemax => ("ONEMAX", &spec.grid.c),
            OracleKind::RandomDecline => ("RANDOM_DECLINE", &spec.grid.a),
        };
        for &p in params {
            for &n in &spec.grid.n {
                let seed = self.cell_seed();
                let budget = self.budget_at(n)?;
                let (exact, stats) = match oracle {
                    OracleKind::Onemax => (Self::onemax_exact(n, p), self.onemax_from_zeros(n, p, budget, seed)),
                    OracleKind::RandomDecline => {
                        let factor = DeclineFactor::from_f64(p).map_err(runtime)?;
                        let chain = make_random_decline(factor);
                        (
                            exact_expected_time::<f64>(factor, n).map_err(|e| e.to_string()),
                            replicate_hitting(&chain, &n, |x: &u64| *x == 0, spec.replications, budget, seed)
                                .map_err(|e| e.to_string()),
                        )
                    }
                };
                let note: Vec<String> = [exact.as_ref().err(), stats.as_ref().err()]
                    .into_iter()
                    .flatten()
                    .cloned()
                    .collect();
                if !note.is_empty() {
                    self.failed_cells += 1;
                }
                let exact = exact.ok();
                let stats = stats.ok();
                let z = match (&stats, exact) {
                    (Some(s), Some(e)) if s.std_error > 0.0 => Some((s.mean - e) / s.std_error),
                    (Some(s), Some(e)) => Some(if s.mean == e { 0.0 } else { f64::INFINITY }),
                    _ => None,
                };
                self.table.push(vec![
                    name.into(),
                    n.into(),
                    p.into(),
                    spec.replications.into(),
                    budget.into(),
                    stats.as_ref().map(|s| s.mean).into(),
                    stats.as_ref().map(|s| s.std_error).into(),
                    stats.as_ref().map(|s| s.censored_count).into(),
                    exact.into(),
                    z.into(),
                    z.map(|z| z.abs() <= 3.0).into(),
                    seed.into(),
                    (!note.is_empty()).then(|| note.join("; ")).into(),
                ]);
            }
        }
        Ok(())
    }

    fn density_track(&mut self) -> Result<(), DriftlabError> {
        let spec = self.spec;
        let dens = spec.density.clone().ok_or_else(|| runtime("density missing"))?;
        let stride_f = Formula::parse(&dens.stride).map_err(runtime)?;
        let from_f = Formula::parse(&dens.from).map_err(runtime)?;
        let to_f = Formula::parse(&dens.to).map_err(runtime)?;
        let weights = self.weights();
        let mut traces = Vec::new();
        let mut windows = Vec::new();
        let mut cell_index = 0usize;
        for &fk in &spec.grid.fitness {
            for &c in &spec.grid.c {
                for &n in &spec.grid.n {
                    let seed = self.cell_seed();
                    let budget = self.budget_at(n)?;
                    let noise = self.noise_for(c)?;
                    let stride = stride_f.budget(n).map_err(runtime)?;
                    let from = from_f.budget(n).map_err(runtime)?;
                    let to = to_f.budget(n).map_err(runtime)?;
                    windows.push(json!({ "n": n, "stride": stride, "from": from, "to": to }));
                    let m = dens.set_size;
                    let nu = n as usize;
                    let probes = ProbeSpec {
                        probes: vec![
                            Probe { name: "I".into(), positions: (0..m).collect() },
                            Probe { name: "J".into(), positions: (nu - m..nu).collect() },
                        ],
                        stride,
                    };
                    let params = EAParams::new(nu, c).map_err(runtime)?;
                    let results = replicate(spec.replications, seed, |_, s| {
                        let f = Self::make_fitness(fk, nu, weights, derive_seed(s, 1))?;
                        let mut f = ProbeOnly(f);
                        run_ea(&mut f, &params, &Start::Random, &noise, budget, derive_seed(s, 0), Some(&probes))
                            .map(|r| r.trace.unwrap_or_default())
                            .map_err(|e| e.to_string())
                    });
                    let mut row = vec![
                        spec.kind.name().into(),
                        fk.name().into(),
                        n.into(),
                        c.into(),
                        spec.replications.into(),
                        budget.into(),
                    ];
                    match results.into_iter().collect::<Result<Vec<_>, _>>() {
                        Ok(runs) => {
                            let (mut probe_count, mut hold_count) = (0u64, 0u64);
                            let mut min_run = f64::INFINITY;
                            let (mut gap_sum, mut gap_max) = (0.0, f64::NEG_INFINITY);
                            for (r, trace) in runs.iter().enumerate() {
                                let (mut run_probes, mut run_holds) = (0u64, 0u64);
                                for pair in trace.chunks(2) {
                                    let t = pair[0].t;
                                    if t < from || t > to {
                                        continue;
                                    }
                                    let gap = pair[0].value - pair[1].value;
                                    run_probes += 1;
                                    run_holds += u64::from(gap <= dens.tolerance);
                                    gap_sum += gap;
                                    gap_max = f64::max(gap_max, gap);
                                }
                                probe_count += run_probes;
                                hold_count += run_holds;
                                if run_probes > 0 {
                                    min_run = min_run.min(run_holds as f64 / run_probes as f64);
                                }
                                traces.extend(trace.iter().map(|p| TracePoint {
                                    t: p.t,
                                    probe_name: format!("cell{cell_index}/run{r}/{}", p.probe_name),
                                    value: p.value,
                                }));
                            }
                            let has = probe_count > 0;
                            row.extend([
                                probe_count.into(),
                                hold_count.into(),
                                has.then(|| hold_count as f64 / probe_count as f64).into(),
                                has.then_some(min_run).into(),
                                has.then(|| gap_sum / probe_count as f64).into(),
                                has.then_some(gap_max).into(),
                                dens.tolerance.into(),
                                seed.into(),
                                (!has).then_some("no probes inside the window").into(),
                            ]);
                        }
                        Err(e) => {
                            self.failed_cells += 1;
                            row.extend((0..6).map(|_| Cell::Empty));
                            row.extend([dens.tolerance.into(), seed.into(), e.into()]);
                        }
                    }
                    self.table.push(row);
                    cell_index += 1;
                }
            }
        }
        self.derived.insert("probe_windows".into(), Value::Array(windows));
        self.traces = Some(traces);
        Ok(())
    }
}
