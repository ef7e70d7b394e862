//! `driftlab bounds <theorem> --params k=v,...`: evaluate one drift bound.

use std::collections::BTreeMap;

use driftlab_core::bounds::{
    additive_bound, multiplicative_mean_bound, multiplicative_tail, negative_drift_thresholds,
    reverse_additive_lower, two_phase_bound, variable_drift_bound, variable_drift_bound_closed,
    ConstantRate, DriftRate, LinearRate, TheoremId,
};
use driftlab_core::DriftBoundReport64;

use crate::formula::Formula;
use crate::spec::FieldError;
use crate::DriftlabError;

/// Parameter names accepted by each theorem; required ones first, optional
/// ones marked with a trailing `?`.
pub fn parameters(theorem: TheoremId) -> &'static [&'static str] {
    match theorem {
        TheoremId::Additive => &["n", "c"],
        TheoremId::AdditiveReverse => &["n", "c", "limit_term?"],
        TheoremId::TwoPhase => &["expected_t_c", "p0", "b"],
        TheoremId::Rescaled => &["n", "c", "g?"],
        TheoremId::Variable => &["n", "slope", "offset?", "step?"],
        TheoremId::MultiplicativeMean => &["n", "delta"],
        TheoremId::MultiplicativeTail => &["n", "delta", "k"],
        TheoremId::NegativeDrift => &["n", "a", "b", "epsilon", "gamma?"],
    }
}

fn config(field: &str, message: impl Into<String>) -> DriftlabError {
    DriftlabError::Config(vec![FieldError {
        field: field.to_string(),
        message: message.into(),
    }])
}

pub fn parse_theorem(name: &str) -> Result<TheoremId, DriftlabError> {
    let wanted = name.trim().to_ascii_uppercase().replace('-', "_");
    TheoremId::ALL
        .into_iter()
        .find(|t| t.name() == wanted)
        .ok_or_else(|| {
            let names: Vec<_> = TheoremId::ALL.iter().map(|t| t.name()).collect();
            config("theorem", format!("unknown theorem {name:?}; expected one of {}", names.join(", ")))
        })
}

/// Splits `k=v` pairs given as separate arguments or joined with commas.
/// Values stay text because `g` of the rescaled bound is a formula.
pub fn parse_params(args: &[String]) -> Result<BTreeMap<String, String>, DriftlabError> {
    let mut out = BTreeMap::new();
    let mut errors = Vec::new();
    for piece in args.iter().flat_map(|a| a.split(',')).map(str::trim).filter(|p| !p.is_empty()) {
        match piece.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                let key = k.trim().to_ascii_lowercase();
                if out.insert(key.clone(), v.trim().to_string()).is_some() {
                    errors.push(FieldError {
                        field: key,
                        message: "given more than once".into(),
                    });
                }
            }
            _ => errors.push(FieldError {
                field: piece.to_string(),
                message: "expected key=value".into(),
            }),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(DriftlabError::Config(errors))
    }
}

struct Params {
    values: BTreeMap<String, String>,
    errors: Vec<FieldError>,
}

impl Params {
    fn text(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        let raw = self.values.get(key)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.errors.push(FieldError {
                    field: key.into(),
                    message: format!("not a finite number: {raw:?}"),
                });
                None
            }
        }
    }

    fn required(&mut self, key: &str) -> f64 {
        if !self.values.contains_key(key) {
            self.errors.push(FieldError {
                field: key.into(),
                message: "required".into(),
            });
        }
        self.number(key).unwrap_or(f64::NAN)
    }
}

/// Evaluates `theorem` at `params`. Bad or missing parameters and inputs
/// outside a bound's domain are configuration errors.
pub fn evaluate(theorem: TheoremId, params: BTreeMap<String, String>) -> Result<DriftBoundReport64, DriftlabError> {
    let allowed = parameters(theorem);
    let mut p = Params {
        errors: params
            .keys()
            .filter(|k| !allowed.iter().any(|a| a.trim_end_matches('?') == k.as_str()))
            .map(|k| FieldError {
                field: k.clone(),
                message: format!("not a parameter of {}; expected {}", theorem.name(), allowed.join(", ")),
            })
            .collect(),
        values: params,
    };
    let result = match theorem {
        TheoremId::Additive => {
            let (n, c) = (p.required("n"), p.required("c"));
            checked(p.errors)?;
            additive_bound(n, c)
        }
        TheoremId::AdditiveReverse => {
            let (n, c) = (p.required("n"), p.required("c"));
            let limit = p.number("limit_term").unwrap_or(0.0);
            checked(p.errors)?;
            reverse_additive_lower(n, c, limit)
        }
        TheoremId::TwoPhase => {
            let (t, p0, b) = (p.required("expected_t_c"), p.required("p0"), p.required("b"));
            checked(p.errors)?;
            two_phase_bound(t, p0, b)
        }
        TheoremId::Rescaled => {
            let (n, c) = (p.required("n"), p.required("c"));
            let g = match p.text("g").map(Formula::parse).transpose() {
                Ok(g) => g,
                Err(e) => {
                    p.errors.push(FieldError {
                        field: "g".into(),
                        message: e.to_string(),
                    });
                    None
                }
            };
            checked(p.errors)?;
            // g defaults to ln; the formula language spells the argument n.
            let g = g.unwrap_or_else(|| Formula::parse("ln(n)").expect("constant formula"));
            driftlab_core::bounds::rescaled_bound(|x: f64| g.eval_at(x), n, c)
        }
        TheoremId::Variable => {
            let (n, slope) = (p.required("n"), p.required("slope"));
            let offset = p.number("offset").unwrap_or(0.0);
            let step = p.number("step").unwrap_or(0.5);
            checked(p.errors)?;
            if offset == 0.0 {
                closed(&LinearRate(slope), n)
            } else if slope == 0.0 {
                closed(&ConstantRate(offset), n)
            } else {
                variable_drift_bound(&move |x: f64| offset + slope * x, n, step)
            }
        }
        TheoremId::MultiplicativeMean => {
            let (n, delta) = (p.required("n"), p.required("delta"));
            checked(p.errors)?;
            multiplicative_mean_bound(n, delta)
        }
        TheoremId::MultiplicativeTail => {
            let (n, delta, k) = (p.required("n"), p.required("delta"), p.required("k"));
            checked(p.errors)?;
            multiplicative_tail(n, delta, k)
        }
        TheoremId::NegativeDrift => {
            let (n, a, b, eps) = (p.required("n"), p.required("a"), p.required("b"), p.required("epsilon"));
            let gamma = p.number("gamma").unwrap_or(0.5);
            checked(p.errors)?;
            negative_drift_thresholds(a, b, eps, gamma, n)
        }
    };
    result.map_err(|e| config("params", e.to_string()))
}

fn closed(h: &dyn DriftRate<f64>, n: f64) -> Result<DriftBoundReport64, driftlab_core::BoundError> {
    variable_drift_bound_closed(h, n).expect("closed form available")
}

fn checked(errors: Vec<FieldError>) -> Result<(), DriftlabError> {
    if errors.is_empty() {
        Ok(())
    } else {
        Err(DriftlabError::Config(errors))
    }
}
