//! Experiment specifications: JSON parsing with field-level, aggregated
//! validation. Unknown keys are errors at every level.

use std::fmt;

use driftlab_core::decline::DeclineFactor;
use driftlab_core::ea::{Adversary1, Penalty};
use driftlab_core::fitness::{find_alpha, Mode, WeightDistribution};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::formula::Formula;
use crate::noise::noise_preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Kind {
    DeclineScan,
    LinearConstant,
    MonotoneHard,
    MonotoneEasy,
    BoundsCheck,
    OracleCompare,
    DensityTrack,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::DeclineScan,
        Kind::LinearConstant,
        Kind::MonotoneHard,
        Kind::MonotoneEasy,
        Kind::BoundsCheck,
        Kind::OracleCompare,
        Kind::DensityTrack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::DeclineScan => "DECLINE_SCAN",
            Kind::LinearConstant => "LINEAR_CONSTANT",
            Kind::MonotoneHard => "MONOTONE_HARD",
            Kind::MonotoneEasy => "MONOTONE_EASY",
            Kind::BoundsCheck => "BOUNDS_CHECK",
            Kind::OracleCompare => "ORACLE_COMPARE",
            Kind::DensityTrack => "DENSITY_TRACK",
        }
    }

    fn from_name(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    fn runs_ea(self) -> bool {
        matches!(
            self,
            Kind::LinearConstant | Kind::MonotoneHard | Kind::MonotoneEasy | Kind::DensityTrack
        )
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FitnessKind {
    Onemax,
    Binval,
    RandomLinear,
}

impl FitnessKind {
    pub fn name(self) -> &'static str {
        match self {
            FitnessKind::Onemax => "ONEMAX",
            FitnessKind::Binval => "BINVAL",
            FitnessKind::RandomLinear => "RANDOM_LINEAR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Grid {
    pub n: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fitness: Vec<FitnessKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetSpec {
    pub epsilon: f64,
    pub c_max: f64,
}

/// Either explicit rates or a preset evaluated per mutation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetSpec>,
    pub adversary1: Adversary1,
    pub adversary2: Penalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotSpec {
    pub design_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_cap: Option<u64>,
    pub mode: Mode,
    pub grid_step: f64,
}

impl Default for HotSpec {
    fn default() -> Self {
        HotSpec {
            design_c: 2.5,
            alpha: None,
            beta: None,
            epsilon: None,
            mu: 1.0,
            level_cap: None,
            mode: Mode::TimeDependent,
            grid_step: 1e-4,
        }
    }
}

/// Resolved hot-monotone constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HotConstants {
    pub alpha: f64,
    pub alpha_margin: Option<f64>,
    pub beta: f64,
    pub epsilon: f64,
    pub mu: f64,
}

impl HotSpec {
    pub fn constants(&self) -> Result<HotConstants, String> {
        let (alpha, alpha_margin) = match self.alpha {
            Some(a) => (a, None),
            None => match find_alpha(self.design_c, self.grid_step) {
                Ok(Some((a, m))) => (a, Some(m)),
                Ok(None) => {
                    return Err(format!(
                        "no feasible alpha for design_c = {}; set alpha explicitly",
                        self.design_c
                    ))
                }
                Err(e) => return Err(e.to_string()),
            },
        };
        Ok(HotConstants {
            alpha,
            alpha_margin,
            beta: self.beta.unwrap_or(alpha / 20.0),
            epsilon: self.epsilon.unwrap_or(alpha / 10.0),
            mu: self.mu,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundsCase {
    /// +-1 walk moving down with probability `p_down`, started at `n`.
    AdditiveWalk { p_down: f64 },
    /// OneMax from all zeros against the variable drift bound with
    /// `h(x) = x c (1 - c) / (n (1 + c))`.
    VariableOnemax { c: f64 },
    /// Random decline from `n` against the multiplicative tail bound.
    MultiplicativeDecline { a: f64, k: Vec<f64> },
    /// Walk with down-probability `(1 + epsilon) / 2` between `a n` and `b n`.
    NegativeDriftWalk {
        epsilon: f64,
        a: f64,
        b: f64,
        gamma: f64,
        min_success: f64,
        ascent_replications: usize,
        ascent_budget: u64,
    },
    /// `np / (1 + np) <= 1 - (1 - p)^n` over `n <= n_max` and a `p` grid.
    BinomialGrid { n_max: u64, p_points: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleKind {
    Onemax,
    RandomDecline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub set_size: usize,
    pub stride: String,
    pub from: String,
    pub to: String,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub replications: usize,
    pub master_seed: u64,
    pub budget: String,
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hot: Option<HotSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<BoundsCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightDistribution>,
    #[serde(default, skip_serializing_if = "OutputSpec::is_empty")]
    pub output: OutputSpec,
}

impl OutputSpec {
    fn is_empty(&self) -> bool {
        self.csv.is_none() && self.summary.is_none()
    }
}

impl ExperimentSpec {
    pub fn budget_formula(&self) -> Formula {
        Formula::parse(&self.budget).expect("validated budget formula")
    }

    pub fn csv_name(&self) -> String {
        self.output
            .csv
            .clone()
            .unwrap_or_else(|| format!("{}.csv", self.kind.name().to_lowercase()))
    }

    pub fn summary_name(&self) -> String {
        self.output
            .summary
            .clone()
            .unwrap_or_else(|| format!("{}.summary.json", self.kind.name().to_lowercase()))
    }

    /// Canonical JSON text; validating it gives back an equal spec.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

/// One validation failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Default)]
struct Checker {
    errors: Vec<FieldError>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Checker {
    fn err(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(obj) = v.as_object() else {
            self.err(path, "expected an object");
            return None;
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(join(path, key), "unknown key");
            }
        }
        Some(obj)
    }

    fn required<'a>(&mut self, obj: &'a Map<String, Value>, path: &str, key: &str) -> Option<&'a Value> {
        let v = obj.get(key);
        if v.is_none() {
            self.err(join(path, key), "missing required field");
        }
        v
    }

    fn uint(&mut self, v: &Value, path: &str) -> Option<u64> {
        let r = v.as_u64();
        if r.is_none() {
            self.err(path, format!("expected a non-negative integer, got {v}"));
        }
        r
    }

    fn real(&mut self, v: &Value, path: &str) -> Option<f64> {
        let r = v.as_f64().filter(|x| x.is_finite());
        if r.is_none() {
            self.err(path, format!("expected a number, got {v}"));
        }
        r
    }

    fn text<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a str> {
        let r = v.as_str();
        if r.is_none() {
            self.err(path, format!("expected a string, got {v}"));
        }
        r
    }

    fn list<T>(
        &mut self,
        v: &Value,
        path: &str,
        mut item: impl FnMut(&mut Self, &Value, &str) -> Option<T>,
    ) -> Option<Vec<T>> {
        let Some(arr) = v.as_array() else {
            self.err(path, "expected a list");
            return None;
        };
        if arr.is_empty() {
            self.err(path, "must not be empty");
            return None;
        }
        let mut out = Vec::with_capacity(arr.len());
        let mut ok = true;
        for (i, x) in arr.iter().enumerate() {
            match item(self, x, &format!("{path}[{i}]")) {
                Some(t) => out.push(t),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn opt_real(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        obj.get(key).and_then(|v| self.real(v, &join(path, key)))
    }

    fn opt_uint(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<u64> {
        obj.get(key).and_then(|v| self.uint(v, &join(path, key)))
    }

    #[allow(clippy::too_many_arguments)]
    fn real_in(&mut self, obj: &Map<String, Value>, path: &str, key: &str, lo: f64, hi: f64, closed_lo: bool, closed_hi: bool) -> Option<f64> {
        let field = join(path, key);
        let x = self.required(obj, path, key).and_then(|v| self.real(v, &field))?;
        let above = if closed_lo { x >= lo } else { x > lo };
        let below = if closed_hi { x <= hi } else { x < hi };
        if above && below {
            Some(x)
        } else {
            let l = if closed_lo { '[' } else { '(' };
            let r = if closed_hi { ']' } else { ')' };
            self.err(field, format!("{x} must lie in {l}{lo}, {hi}{r}"));
            None
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "kind",
    "replications",
    "master_seed",
    "budget",
    "grid",
    "noise",
    "hot",
    "cases",
    "oracle",
    "density",
    "weights",
    "output",
];

/// Keys besides the common ones that each kind accepts.
fn kind_keys(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::DeclineScan => &[],
        Kind::LinearConstant => &["noise", "weights"],
        Kind::MonotoneHard | Kind::MonotoneEasy => &["noise", "hot"],
        Kind::BoundsCheck => &["cases"],
        Kind::OracleCompare => &["oracle"],
        Kind::DensityTrack => &["noise", "weights", "density"],
    }
}

fn grid_keys(kind: Kind, oracle: Option<OracleKind>) -> &'static [&'static str] {
    match kind {
        Kind::DeclineScan => &["n", "a"],
        Kind::LinearConstant | Kind::DensityTrack => &["n", "c", "fitness"],
        Kind::MonotoneHard | Kind::MonotoneEasy => &["n", "c"],
        Kind::BoundsCheck => &["n"],
        Kind::OracleCompare => match oracle {
            Some(OracleKind::RandomDecline) => &["n", "a"],
            _ => &["n", "c"],
        },
    }
}

/// Parses and validates a spec, reporting every violation found.
pub fn validate_spec(text: &str) -> Result<ExperimentSpec, Vec<FieldError>> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        vec![FieldError {
            field: "$".into(),
            message: format!("invalid JSON: {e}"),
        }]
    })?;
    validate_value(&value)
}

/// Accepts either a spec or a run summary that embeds one under `spec`.
pub fn spec_from_spec_or_summary(text: &str) -> Result<ExperimentSpec, Vec<FieldError>> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        vec![FieldError {
            field: "$".into(),
            message: format!("invalid JSON: {e}"),
        }]
    })?;
    match value.get("spec") {
        Some(inner) if value.get("tool_version").is_some() => validate_value(inner),
        _ => validate_value(&value),
    }
}

pub fn validate_value(value: &Value) -> Result<ExperimentSpec, Vec<FieldError>> {
    let mut ck = Checker::default();
    let Some(top) = ck.object(value, "", TOP_KEYS) else {
        return Err(ck.errors);
    };

    let kind = ck.required(top, "", "kind").and_then(|v| {
        let s = ck.text(v, "kind")?;
        let k = Kind::from_name(s);
        if k.is_none() {
            let names: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
            ck.err("kind", format!("unknown kind {s:?}; expected one of {}", names.join(", ")));
        }
        k
    });
    let replications = ck.required(top, "", "replications").and_then(|v| {
        let r = ck.uint(v, "replications")?;
        if !(1..=100_000_000).contains(&r) {
            ck.err("replications", format!("{r} must lie in [1, 10^8]"));
            return None;
        }
        Some(r as usize)
    });
    let master_seed = ck
        .required(top, "", "master_seed")
        .and_then(|v| ck.uint(v, "master_seed"));
    let budget = ck.required(top, "", "budget").and_then(|v| {
        let s = ck.text(v, "budget")?;
        match Formula::parse(s) {
            Ok(f) => Some(f),
            Err(e) => {
                ck.err("budget", e.to_string());
                None
            }
        }
    });

    let oracle = top.get("oracle").and_then(|v| {
        let s = ck.text(v, "oracle")?;
        match s {
            "ONEMAX" => Some(OracleKind::Onemax),
            "RANDOM_DECLINE" => Some(OracleKind::RandomDecline),
            _ => {
                ck.err("oracle", format!("unknown oracle {s:?}; expected ONEMAX or RANDOM_DECLINE"));
                None
            }
        }
    });

    if let Some(kind) = kind {
        let common = ["kind", "replications", "master_seed", "budget", "grid", "output"];
        for key in top.keys() {
            let k = key.as_str();
            if TOP_KEYS.contains(&k) && !common.contains(&k) && !kind_keys(kind).contains(&k) {
                ck.err(k, format!("not used by {kind}"));
            }
        }
        if kind == Kind::OracleCompare && oracle.is_none() && !top.contains_key("oracle") {
            ck.err("oracle", "missing required field");
        }
        if kind == Kind::BoundsCheck && !top.contains_key("cases") {
            ck.err("cases", "missing required field");
        }
        if kind == Kind::DensityTrack && !top.contains_key("density") {
            ck.err("density", "missing required field");
        }
    }

    let grid = ck.required(top, "", "grid").and_then(|g| {
        let allowed = kind.map(|k| grid_keys(k, oracle)).unwrap_or(&["n", "c", "a", "fitness"]);
        let obj = ck.object(g, "grid", allowed)?;
        let n = ck.required(obj, "grid", "n").and_then(|v| {
            ck.list(v, "grid.n", |ck, x, p| {
                let n = ck.uint(x, p)?;
                if n == 0 {
                    ck.err(p, "n must be at least 1");
                    return None;
                }
                Some(n)
            })
        });
        let mut grid = Grid::default();
        if let Some(n) = n {
            grid.n = n;
        }
        for key in allowed.iter().filter(|k| **k != "n") {
            let path = format!("grid.{key}");
            let Some(v) = ck.required(obj, "grid", key) else {
                continue;
            };
            match *key {
                "c" => {
                    if let Some(cs) = ck.list(v, &path, |ck, x, p| {
                        let c = ck.real(x, p)?;
                        if c <= 0.0 {
                            ck.err(p, format!("c = {c} must be positive"));
                            return None;
                        }
                        Some(c)
                    }) {
                        grid.c = cs;
                    }
                }
                "a" => {
                    if let Some(avals) = ck.list(v, &path, |ck, x, p| {
                        let a = ck.real(x, p)?;
                        if a <= 0.0 {
                            ck.err(p, format!("a = {a} must be positive"));
                            return None;
                        }
                        if let Err(e) = DeclineFactor::from_f64(a) {
                            ck.err(p, e.to_string());
                            return None;
                        }
                        Some(a)
                    }) {
                        grid.a = avals;
                    }
                }
                "fitness" => {
                    if let Some(fs) = ck.list(v, &path, |ck, x, p| {
                        let s = ck.text(x, p)?;
                        match s {
                            "ONEMAX" => Some(FitnessKind::Onemax),
                            "BINVAL" => Some(FitnessKind::Binval),
                            "RANDOM_LINEAR" => Some(FitnessKind::RandomLinear),
                            _ => {
                                ck.err(p, format!("unknown fitness {s:?}; expected ONEMAX, BINVAL or RANDOM_LINEAR"));
                                None
                            }
                        }
                    }) {
                        grid.fitness = fs;
                    }
                }
                _ => {}
            }
        }
        Some(grid)
    });

    if let (Some(f), Some(grid)) = (&budget, &grid) {
        for &n in &grid.n {
            if let Err(e) = f.budget(n) {
                ck.err("budget", e.to_string());
            }
        }
    }
    if let (Some(kind), Some(grid)) = (kind, &grid) {
        if kind.runs_ea() || (kind == Kind::OracleCompare && oracle == Some(OracleKind::Onemax)) {
            for (i, &c) in grid.c.iter().enumerate() {
                if let Some(&n) = grid.n.iter().find(|&&n| c > n as f64) {
                    ck.err(format!("grid.c[{i}]"), format!("c = {c} exceeds n = {n}"));
                }
            }
        }
        if kind == Kind::OracleCompare && oracle == Some(OracleKind::RandomDecline) {
            for (i, &a) in grid.a.iter().enumerate() {
                if a > 1.0 {
                    ck.err(format!("grid.a[{i}]"), format!("exact oracle needs a <= 1, got {a}"));
                }
            }
        }
    }

    let noise = top.get("noise").and_then(|v| parse_noise(&mut ck, v, grid.as_ref()));
    let hot = top.get("hot").and_then(|v| parse_hot(&mut ck, v));
    if kind.is_some_and(|k| matches!(k, Kind::MonotoneHard | Kind::MonotoneEasy)) && !top.contains_key("hot") {
        if let Err(e) = HotSpec::default().constants() {
            ck.err("hot", e);
        }
    }
    let cases = top
        .get("cases")
        .and_then(|v| ck.list(v, "cases", parse_case))
        .unwrap_or_default();
    let density = top
        .get("density")
        .and_then(|v| parse_density(&mut ck, v, grid.as_ref(), budget.as_ref()));
    let weights = top.get("weights").and_then(|v| parse_weights(&mut ck, v));
    if top.contains_key("weights") {
        if let Some(grid) = &grid {
            if !grid.fitness.contains(&FitnessKind::RandomLinear) {
                ck.err("weights", "only used with RANDOM_LINEAR fitness");
            }
        }
    }
    let output = top
        .get("output")
        .and_then(|v| {
            let obj = ck.object(v, "output", &["csv", "summary"])?;
            let mut out = OutputSpec::default();
            for (key, slot) in [("csv", &mut out.csv), ("summary", &mut out.summary)] {
                if let Some(name) = obj.get(key).and_then(|x| ck.text(x, &format!("output.{key}"))) {
                    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                        ck.err(format!("output.{key}"), "must be a plain file name");
                    } else {
                        *slot = Some(name.to_string());
                    }
                }
            }
            Some(out)
        })
        .unwrap_or_default();

    if !ck.errors.is_empty() {
        return Err(ck.errors);
    }
    Ok(ExperimentSpec {
        kind: kind.expect("checked"),
        replications: replications.expect("checked"),
        master_seed: master_seed.expect("checked"),
        budget: budget.expect("checked").text().to_string(),
        grid: grid.expect("checked"),
        noise,
        hot,
        cases,
        oracle,
        density,
        weights,
        output,
    })
}

fn parse_adversary1(ck: &mut Checker, v: &Value, path: &str) -> Option<Adversary1> {
    match ck.text(v, path)? {
        "ALWAYS_ACCEPT" => Some(Adversary1::AlwaysAccept),
        "ALWAYS_REJECT" => Some(Adversary1::AlwaysReject),
        "NONE" => Some(Adversary1::None),
        s => {
            ck.err(path, format!("unknown policy {s:?}; expected ALWAYS_ACCEPT, ALWAYS_REJECT or NONE"));
            None
        }
    }
}

fn parse_penalty(ck: &mut Checker, v: &Value, path: &str) -> Option<Penalty> {
    if let Some(s) = v.as_str() {
        return match s {
            "ZERO" => Some(Penalty::Zero),
            "INFINITE" => Some(Penalty::Infinite),
            _ => {
                ck.err(path, format!("unknown penalty {s:?}; expected ZERO, INFINITE or {{\"CONSTANT\": v}}"));
                None
            }
        };
    }
    let obj = ck.object(v, path, &["CONSTANT"])?;
    let x = ck.required(obj, path, "CONSTANT").and_then(|x| ck.real(x, &join(path, "CONSTANT")))?;
    if x < 0.0 {
        ck.err(join(path, "CONSTANT"), format!("penalty {x} must be non-negative"));
        return None;
    }
    Some(Penalty::Constant(x))
}

fn parse_noise(ck: &mut Checker, v: &Value, grid: Option<&Grid>) -> Option<NoiseSpec> {
    let obj = ck.object(v, "noise", &["delta1", "delta2", "preset", "adversary1", "adversary2"])?;
    let before = ck.errors.len();
    let mut spec = NoiseSpec {
        delta1: None,
        delta2: None,
        preset: None,
        adversary1: Adversary1::None,
        adversary2: Penalty::Zero,
    };
    for key in ["delta1", "delta2"] {
        if obj.contains_key(key) {
            let x = ck.real_in(obj, "noise", key, 0.0, 1.0, true, true);
            if key == "delta1" {
                spec.delta1 = x;
            } else {
                spec.delta2 = x;
            }
        }
    }
    if let Some(p) = obj.get("preset") {
        if spec.delta1.is_some() || spec.delta2.is_some() {
            ck.err("noise.preset", "cannot be combined with explicit delta1/delta2");
        }
        if let Some(pobj) = ck.object(p, "noise.preset", &["epsilon", "c_max"]) {
            let eps = ck.real_in(pobj, "noise.preset", "epsilon", 0.0, 1.0, false, true);
            let c_max = ck.real_in(pobj, "noise.preset", "c_max", 0.0, f64::MAX, false, true);
            if let (Some(epsilon), Some(c_max)) = (eps, c_max) {
                for &c in grid.map(|g| g.c.as_slice()).unwrap_or(&[]) {
                    if let Err(e) = noise_preset(epsilon, c, c_max) {
                        ck.err("noise.preset", format!("at c = {c}: {e}"));
                    }
                }
                spec.preset = Some(PresetSpec { epsilon, c_max });
            }
        }
    }
    if let Some(a) = obj.get("adversary1") {
        spec.adversary1 = parse_adversary1(ck, a, "noise.adversary1")?;
    }
    if let Some(a) = obj.get("adversary2") {
        spec.adversary2 = parse_penalty(ck, a, "noise.adversary2")?;
    }
    (ck.errors.len() == before).then_some(spec)
}

fn parse_hot(ck: &mut Checker, v: &Value) -> Option<HotSpec> {
    let keys = ["design_c", "alpha", "beta", "epsilon", "mu", "level_cap", "mode", "grid_step"];
    let obj = ck.object(v, "hot", &keys)?;
    let before = ck.errors.len();
    let mut spec = HotSpec::default();
    if let Some(x) = ck.opt_real(obj, "hot", "design_c") {
        spec.design_c = x;
    }
    spec.alpha = ck.opt_real(obj, "hot", "alpha");
    spec.beta = ck.opt_real(obj, "hot", "beta");
    spec.epsilon = ck.opt_real(obj, "hot", "epsilon");
    if let Some(x) = ck.opt_real(obj, "hot", "mu") {
        spec.mu = x;
    }
    spec.level_cap = ck.opt_uint(obj, "hot", "level_cap");
    if let Some(x) = ck.opt_real(obj, "hot", "grid_step") {
        spec.grid_step = x;
    }
    if let Some(m) = obj.get("mode") {
        match ck.text(m, "hot.mode") {
            Some("STATIC") => spec.mode = Mode::Static,
            Some("TIME_DEPENDENT") => spec.mode = Mode::TimeDependent,
            Some(s) => ck.err("hot.mode", format!("unknown mode {s:?}; expected STATIC or TIME_DEPENDENT")),
            None => {}
        }
    }
    if ck.errors.len() != before {
        return None;
    }
    match spec.constants() {
        Ok(k) => {
            if !(k.alpha > 0.0 && k.alpha < 0.5) {
                ck.err("hot.alpha", format!("alpha = {} must lie in (0, 1/2)", k.alpha));
            }
            if !(k.beta > 0.0 && k.beta <= k.alpha) {
                ck.err("hot.beta", format!("beta = {} must lie in (0, alpha]", k.beta));
            }
            if !(k.epsilon > 0.0 && k.epsilon < 1.0) {
                ck.err("hot.epsilon", format!("epsilon = {} must lie in (0, 1)", k.epsilon));
            }
            if !(k.mu > 0.0) {
                ck.err("hot.mu", format!("mu = {} must be positive", k.mu));
            }
            if spec.level_cap == Some(0) {
                ck.err("hot.level_cap", "must be at least 1");
            }
        }
        Err(e) => ck.err("hot", e),
    }
    (ck.errors.len() == before).then_some(spec)
}

fn parse_case(ck: &mut Checker, v: &Value, path: &str) -> Option<BoundsCase> {
    let ty = v
        .get("type")
        .and_then(Value::as_str)
        .map(str::to_string);
    let Some(ty) = ty else {
        ck.err(join(path, "type"), "missing required field");
        return None;
    };
    let before = ck.errors.len();
    let case = match ty.as_str() {
        "ADDITIVE_WALK" => {
            let obj = ck.object(v, path, &["type", "p_down"])?;
            let p = ck.real_in(obj, path, "p_down", 0.5, 1.0, false, true)?;
            BoundsCase::AdditiveWalk { p_down: p }
        }
        "VARIABLE_ONEMAX" => {
            let obj = ck.object(v, path, &["type", "c"])?;
            let c = ck.real_in(obj, path, "c", 0.0, 1.0, false, false)?;
            BoundsCase::VariableOnemax { c }
        }
        "MULTIPLICATIVE_DECLINE" => {
            let obj = ck.object(v, path, &["type", "a", "k"])?;
            let a = ck.real_in(obj, path, "a", 0.0, 2.0, false, false);
            let k = ck.required(obj, path, "k").and_then(|kv| {
                ck.list(kv, &join(path, "k"), |ck, x, p| {
                    let k = ck.real(x, p)?;
                    if k <= 0.0 {
                        ck.err(p, format!("k = {k} must be positive"));
                        return None;
                    }
                    Some(k)
                })
            });
            BoundsCase::MultiplicativeDecline { a: a?, k: k? }
        }
        "NEGATIVE_DRIFT_WALK" => {
            let keys = ["type", "epsilon", "a", "b", "gamma", "min_success", "ascent_replications", "ascent_budget"];
            let obj = ck.object(v, path, &keys)?;
            let epsilon = ck.real_in(obj, path, "epsilon", 0.0, 1.0, false, true);
            let a = ck.real_in(obj, path, "a", 0.0, 1.0, false, false);
            let b = ck.real_in(obj, path, "b", 0.0, 1.0, false, true);
            if let (Some(a), Some(b)) = (a, b) {
                if a >= b {
                    ck.err(join(path, "b"), format!("need a < b, got a = {a}, b = {b}"));
                }
            }
            let gamma = if obj.contains_key("gamma") {
                ck.real_in(obj, path, "gamma", 0.0, f64::MAX, true, true)
            } else {
                Some(0.5)
            };
            let min_success = if obj.contains_key("min_success") {
                ck.real_in(obj, path, "min_success", 0.0, 1.0, true, true)
            } else {
                Some(0.99)
            };
            let ascent_replications = ck.opt_uint(obj, path, "ascent_replications").unwrap_or(100);
            let ascent_budget = ck.opt_uint(obj, path, "ascent_budget").unwrap_or(1_000_000);
            if ascent_replications == 0 || ascent_budget == 0 {
                ck.err(path.to_string(), "ascent_replications and ascent_budget must be positive");
            }
            for (key, x) in [("a", a), ("b", b)] {
                if let Some(x) = x {
                    if let Err(e) = DeclineFactor::from_f64(x) {
                        ck.err(join(path, key), e.to_string());
                    }
                }
            }
            BoundsCase::NegativeDriftWalk {
                epsilon: epsilon?,
                a: a?,
                b: b?,
                gamma: gamma?,
                min_success: min_success?,
                ascent_replications: ascent_replications as usize,
                ascent_budget,
            }
        }
        "BINOMIAL_GRID" => {
            let obj = ck.object(v, path, &["type", "n_max", "p_points"])?;
            let n_max = ck.opt_uint(obj, path, "n_max").unwrap_or(64);
            let p_points = ck.opt_uint(obj, path, "p_points").unwrap_or(101);
            if !(2..=1_000_000).contains(&p_points) || n_max > 100_000 {
                ck.err(path.to_string(), "need 2 <= p_points <= 10^6 and n_max <= 10^5");
            }
            BoundsCase::BinomialGrid { n_max, p_points }
        }
        other => {
            ck.err(join(path, "type"), format!(
                "unknown case {other:?}; expected ADDITIVE_WALK, VARIABLE_ONEMAX, MULTIPLICATIVE_DECLINE, NEGATIVE_DRIFT_WALK or BINOMIAL_GRID"
            ));
            return None;
        }
    };
    (ck.errors.len() == before).then_some(case)
}

fn parse_density(ck: &mut Checker, v: &Value, grid: Option<&Grid>, budget: Option<&Formula>) -> Option<DensitySpec> {
    let obj = ck.object(v, "density", &["set_size", "stride", "from", "to", "tolerance"])?;
    let before = ck.errors.len();
    let set_size = ck
        .required(obj, "density", "set_size")
        .and_then(|x| ck.uint(x, "density.set_size"));
    let formula = |ck: &mut Checker, key: &str, default: &str| -> Option<Formula> {
        let text = match obj.get(key) {
            Some(x) => ck.text(x, &format!("density.{key}"))?.to_string(),
            None => default.to_string(),
        };
        Formula::parse(&text)
            .map_err(|e| ck.err(format!("density.{key}"), e.to_string()))
            .ok()
    };
    let stride = formula(ck, "stride", "n");
    let from = formula(ck, "from", "10*n");
    let to = formula(ck, "to", "100*n");
    let tolerance = if obj.contains_key("tolerance") {
        ck.real_in(obj, "density", "tolerance", 0.0, 1.0, true, true)
    } else {
        Some(0.05)
    };
    if let (Some(m), Some(grid)) = (set_size, grid) {
        if m == 0 {
            ck.err("density.set_size", "must be at least 1");
        }
        for &n in &grid.n {
            if m > n {
                ck.err("density.set_size", format!("{m} exceeds n = {n}"));
            }
            let (Some(s), Some(f), Some(t)) = (&stride, &from, &to) else {
                continue;
            };
            match (s.budget(n), f.budget(n), t.budget(n)) {
                (Ok(_), Ok(lo), Ok(hi)) => {
                    if lo > hi {
                        ck.err("density.from", format!("from = {lo} exceeds to = {hi} at n = {n}"));
                    }
                    if let Some(Ok(b)) = budget.map(|b| b.budget(n)) {
                        if hi > b {
                            ck.err("density.to", format!("to = {hi} exceeds the budget {b} at n = {n}"));
                        }
                    }
                }
                (s, f, t) => {
                    for (key, r) in [("stride", s), ("from", f), ("to", t)] {
                        if let Err(e) = r {
                            ck.err(format!("density.{key}"), e.to_string());
                        }
                    }
                }
            }
        }
    }
    if ck.errors.len() != before {
        return None;
    }
    Some(DensitySpec {
        set_size: set_size? as usize,
        stride: stride?.text().to_string(),
        from: from?.text().to_string(),
        to: to?.text().to_string(),
        tolerance: tolerance?,
    })
}

fn parse_weights(ck: &mut Checker, v: &Value) -> Option<WeightDistribution> {
    let before = ck.errors.len();
    let obj = ck.object(v, "weights", &["uniform", "exponential"])?;
    if obj.len() != 1 {
        ck.err("weights", "expected exactly one of uniform or exponential");
        return None;
    }
    let dist = if let Some(u) = obj.get("uniform") {
        let uo = ck.object(u, "weights.uniform", &["low", "high"])?;
        let low = ck.real_in(uo, "weights.uniform", "low", 0.0, f64::MAX, true, true);
        let high = ck.real_in(uo, "weights.uniform", "high", 0.0, f64::MAX, false, true);
        if let (Some(l), Some(h)) = (low, high) {
            if l >= h {
                ck.err("weights.uniform", format!("need low < high, got ({l}, {h}]"));
            }
        }
        WeightDistribution::Uniform { low: low?, high: high? }
    } else {
        let eo = ck.object(&obj["exponential"], "weights.exponential", &["rate"])?;
        let rate = ck.real_in(eo, "weights.exponential", "rate", 0.0, f64::MAX, false, true)?;
        WeightDistribution::Exponential { rate }
    };
    (ck.errors.len() == before).then_some(dist)
}
