//! Closed-form hitting-time bounds from drift conditions.
//!
//! Every function returns a [`DriftBoundReport`] echoing its inputs, so the
//! experiment layer can serialize a bound next to the empirical or exact
//! hitting time it is compared against. Logarithms are natural.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TheoremId {
    Additive,
    AdditiveReverse,
    TwoPhase,
    Rescaled,
    Variable,
    MultiplicativeMean,
    MultiplicativeTail,
    NegativeDrift,
}

impl TheoremId {
    pub const ALL: [TheoremId; 8] = [
        TheoremId::Additive,
        TheoremId::AdditiveReverse,
        TheoremId::TwoPhase,
        TheoremId::Rescaled,
        TheoremId::Variable,
        TheoremId::MultiplicativeMean,
        TheoremId::MultiplicativeTail,
        TheoremId::NegativeDrift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Additive => "ADDITIVE",
            TheoremId::AdditiveReverse => "ADDITIVE_REVERSE",
            TheoremId::TwoPhase => "TWO_PHASE",
            TheoremId::Rescaled => "RESCALED",
            TheoremId::Variable => "VARIABLE",
            TheoremId::MultiplicativeMean => "MULTIPLICATIVE_MEAN",
            TheoremId::MultiplicativeTail => "MULTIPLICATIVE_TAIL",
            TheoremId::NegativeDrift => "NEGATIVE_DRIFT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Upper,
    Lower,
}

/// Either a number of steps or a tail statement `Pr[T > threshold] <= probability`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundValue<S> {
    Steps(S),
    Tail { t_threshold: u64, probability: S },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBoundReport<S> {
    pub theorem_id: TheoremId,
    pub inputs: BTreeMap<String, S>,
    pub bound_value: BoundValue<S>,
    pub direction: Direction,
}

impl<S: Scalar> DriftBoundReport<S> {
    fn steps(theorem_id: TheoremId, inputs: &[(&str, S)], value: S, direction: Direction) -> Self {
        DriftBoundReport {
            theorem_id,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            bound_value: BoundValue::Steps(value),
            direction,
        }
    }

    /// The step bound, or the tail threshold as a number of steps.
    pub fn value(&self) -> S {
        match self.bound_value {
            BoundValue::Steps(v) => v,
            BoundValue::Tail { t_threshold, .. } => S::from_count(t_threshold),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("drift margin must be positive, got {0}")]
    NonpositiveMargin(f64),
    #[error("probability must lie in (0, 1], got {0}")]
    BadProbability(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("k must be positive, got {0}")]
    BadK(f64),
    #[error("need a < b, got a = {a}, b = {b}")]
    BadInterval { a: f64, b: f64 },
    #[error("h({x}) = {value} is not positive")]
    NonpositiveH { x: f64, value: f64 },
    #[error("h is not increasing: h({x}) = {hx} > h({y}) = {hy}")]
    NotIncreasing { x: f64, hx: f64, y: f64, hy: f64 },
    #[error("quadrature did not reach relative change 1e-8 (last {0:e})")]
    QuadratureNotConverged(f64),
    #[error("invalid input {name} = {value}")]
    InvalidInput { name: &'static str, value: f64 },
}

fn f<S: Scalar>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn require_margin<S: Scalar>(c: S) -> Result<(), BoundError> {
    if c > S::zero() {
        Ok(())
    } else {
        Err(BoundError::NonpositiveMargin(f(c)))
    }
}

fn require_nonnegative<S: Scalar>(name: &'static str, x: S) -> Result<(), BoundError> {
    if x >= S::zero() {
        Ok(())
    } else {
        Err(BoundError::InvalidInput { name, value: f(x) })
    }
}

fn require_delta<S: Scalar>(delta: S) -> Result<(), BoundError> {
    if delta > S::zero() && delta < S::one() {
        Ok(())
    } else {
        Err(BoundError::BadDelta(f(delta)))
    }
}

/// `E[T] <= n / c` under additive drift `c`.
pub fn additive_bound<S: Scalar>(n: S, c: S) -> Result<DriftBoundReport<S>, BoundError> {
    require_margin(c)?;
    require_nonnegative("n", n)?;
    Ok(DriftBoundReport::steps(
        TheoremId::Additive,
        &[("n", n), ("c", c)],
        n / c,
        Direction::Upper,
    ))
}

/// Reverse additive drift: `E[T] >= (n - limit_term) / c`, clamped at 0.
/// `limit_term` stands for `liminf E[X_t]` (0 for chains absorbed at 0).
pub fn reverse_additive_lower<S: Scalar>(
    n: S,
    c: S,
    limit_term: S,
) -> Result<DriftBoundReport<S>, BoundError> {
    require_margin(c)?;
    let value = ((n - limit_term) / c).max(S::zero());
    Ok(DriftBoundReport::steps(
        TheoremId::AdditiveReverse,
        &[("n", n), ("c", c), ("limit_term", limit_term)],
        value,
        Direction::Lower,
    ))
}

/// Two-phase bound `E[T] <= E[T_C] + (B + 1) / p0`.
pub fn two_phase_bound<S: Scalar>(
    expected_t_c: S,
    p0: S,
    b: S,
) -> Result<DriftBoundReport<S>, BoundError> {
    if !(p0 > S::zero() && p0 <= S::one()) {
        return Err(BoundError::BadProbability(f(p0)));
    }
    require_nonnegative("B", b)?;
    require_nonnegative("expected_T_C", expected_t_c)?;
    Ok(DriftBoundReport::steps(
        TheoremId::TwoPhase,
        &[("expected_T_C", expected_t_c), ("p0", p0), ("B", b)],
        expected_t_c + (b + S::one()) / p0,
        Direction::Upper,
    ))
}

/// Rescaled drift: `E[T_C] <= g(n) / c` when `g(X_t)` drifts down by `c`
/// above `C`.
pub fn rescaled_bound<S: Scalar>(
    g: impl Fn(S) -> S,
    n: S,
    c: S,
) -> Result<DriftBoundReport<S>, BoundError> {
    require_margin(c)?;
    let gn = g(n);
    require_nonnegative("g(n)", gn)?;
    Ok(DriftBoundReport::steps(
        TheoremId::Rescaled,
        &[("n", n), ("g_n", gn), ("c", c)],
        gn / c,
        Direction::Upper,
    ))
}

/// A positive, increasing drift function `h` for the variable drift bound.
pub trait DriftRate<S: Scalar> {
    fn rate(&self, x: S) -> S;

    /// `\int_lo^hi 1/h(u) du` in closed form, when known.
    fn reciprocal_integral(&self, _lo: S, _hi: S) -> Option<S> {
        None
    }
}

impl<S: Scalar, F: Fn(S) -> S> DriftRate<S> for F {
    fn rate(&self, x: S) -> S {
        self(x)
    }
}

/// `h(x) = value`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRate<S>(pub S);

impl<S: Scalar> DriftRate<S> for ConstantRate<S> {
    fn rate(&self, _x: S) -> S {
        self.0
    }

    fn reciprocal_integral(&self, lo: S, hi: S) -> Option<S> {
        Some((hi - lo) / self.0)
    }
}

/// `h(x) = slope * x`, i.e. multiplicative drift.
#[derive(Debug, Clone, Copy)]
pub struct LinearRate<S>(pub S);

impl<S: Scalar> DriftRate<S> for LinearRate<S> {
    fn rate(&self, x: S) -> S {
        self.0 * x
    }

    fn reciprocal_integral(&self, lo: S, hi: S) -> Option<S> {
        Some((hi / lo).ln() / self.0)
    }
}

const QUADRATURE_RTOL: f64 = 1e-8;
const MAX_QUADRATURE_POINTS: u64 = 1 << 28;

/// Composite trapezoid of `1/h` over `[1, n]`, halving the step until
/// successive estimates agree to `1e-8` relative. Checks the sampled `h` is
/// positive and non-decreasing along the way.
fn integrate_reciprocal<S: Scalar>(h: &dyn DriftRate<S>, n: S, step: S) -> Result<S, BoundError> {
    let one = S::one();
    let width = n - one;
    if width <= S::zero() {
        return Ok(S::zero());
    }
    let mut intervals = (width / step).ceil().to_u64().unwrap_or(1).max(1);
    let mut previous: Option<S> = None;
    let mut last_change = f64::INFINITY;
    while intervals <= MAX_QUADRATURE_POINTS {
        let dx = width / S::from_count(intervals);
        let mut sum = S::zero();
        let mut prev_h: Option<(S, S)> = None;
        for i in 0..=intervals {
            let x = if i == intervals {
                n
            } else {
                one + dx * S::from_count(i)
            };
            let hx = h.rate(x);
            if !(hx > S::zero()) {
                return Err(BoundError::NonpositiveH {
                    x: f(x),
                    value: f(hx),
                });
            }
            if let Some((px, ph)) = prev_h {
                if ph > hx {
                    return Err(BoundError::NotIncreasing {
                        x: f(px),
                        hx: f(ph),
                        y: f(x),
                        hy: f(hx),
                    });
                }
            }
            prev_h = Some((x, hx));
            let w = if i == 0 || i == intervals {
                S::lit(0.5)
            } else {
                one
            };
            sum = sum + w / hx;
        }
        let estimate = sum * dx;
        if let Some(prev) = previous {
            let change = f(((estimate - prev) / estimate).abs());
            if change < QUADRATURE_RTOL {
                return Ok(estimate);
            }
            last_change = change;
        }
        previous = Some(estimate);
        intervals *= 2;
    }
    Err(BoundError::QuadratureNotConverged(last_change))
}

/// Variable drift: `E[T] <= 1/h(1) + \int_1^n 1/h(u) du`, integrated
/// numerically from `quadrature_step`.
pub fn variable_drift_bound<S: Scalar>(
    h: &dyn DriftRate<S>,
    n: S,
    quadrature_step: S,
) -> Result<DriftBoundReport<S>, BoundError> {
    if !(n >= S::one()) {
        return Err(BoundError::InvalidInput {
            name: "n",
            value: f(n),
        });
    }
    if !(quadrature_step > S::zero()) {
        return Err(BoundError::InvalidInput {
            name: "quadrature_step",
            value: f(quadrature_step),
        });
    }
    let h1 = h.rate(S::one());
    if !(h1 > S::zero()) {
        return Err(BoundError::NonpositiveH {
            x: 1.0,
            value: f(h1),
        });
    }
    let integral = integrate_reciprocal(h, n, quadrature_step)?;
    Ok(variable_report(n, quadrature_step, h1, integral))
}

/// Variable drift evaluated with the rate's closed-form antiderivative.
pub fn variable_drift_bound_closed<S: Scalar>(
    h: &dyn DriftRate<S>,
    n: S,
) -> Option<Result<DriftBoundReport<S>, BoundError>> {
    let integral = h.reciprocal_integral(S::one(), n)?;
    let h1 = h.rate(S::one());
    if !(h1 > S::zero()) {
        return Some(Err(BoundError::NonpositiveH {
            x: 1.0,
            value: f(h1),
        }));
    }
    Some(Ok(variable_report(n, S::zero(), h1, integral)))
}

fn variable_report<S: Scalar>(n: S, step: S, h1: S, integral: S) -> DriftBoundReport<S> {
    DriftBoundReport::steps(
        TheoremId::Variable,
        &[
            ("n", n),
            ("quadrature_step", step),
            ("h_at_1", h1),
            ("integral", integral),
        ],
        S::one() / h1 + integral,
        Direction::Upper,
    )
}

/// Multiplicative drift in expectation: `E[T] <= (1 + ln n) / delta`.
pub fn multiplicative_mean_bound<S: Scalar>(
    n: S,
    delta: S,
) -> Result<DriftBoundReport<S>, BoundError> {
    require_delta(delta)?;
    if !(n >= S::one()) {
        return Err(BoundError::InvalidInput {
            name: "n",
            value: f(n),
        });
    }
    Ok(DriftBoundReport::steps(
        TheoremId::MultiplicativeMean,
        &[("n", n), ("delta", delta)],
        (S::one() + n.ln()) / delta,
        Direction::Upper,
    ))
}

/// Multiplicative drift tail: `Pr[T > ceil((ln n + k) / |ln(1 - delta)|)] <= e^{-k}`.
pub fn multiplicative_tail<S: Scalar>(
    n: S,
    delta: S,
    k: S,
) -> Result<DriftBoundReport<S>, BoundError> {
    require_delta(delta)?;
    if !(k > S::zero()) {
        return Err(BoundError::BadK(f(k)));
    }
    if !(n >= S::one()) {
        return Err(BoundError::InvalidInput {
            name: "n",
            value: f(n),
        });
    }
    let t = ((n.ln() + k) / (S::one() - delta).ln().abs()).ceil();
    let t_threshold = t.to_u64().ok_or(BoundError::InvalidInput {
        name: "t_threshold",
        value: f(t),
    })?;
    Ok(DriftBoundReport {
        theorem_id: TheoremId::MultiplicativeTail,
        inputs: [("n", n), ("delta", delta), ("k", k)]
            .iter()
            .map(|(name, v)| (name.to_string(), *v))
            .collect(),
        bound_value: BoundValue::Tail {
            t_threshold,
            probability: (-k).exp(),
        },
        direction: Direction::Upper,
    })
}

/// Negative drift, fast-descent part: from `bn`, the level `an` is reached
/// within `(1 + gamma)(b - a) n / epsilon` steps except with exponentially
/// small probability.
pub fn negative_drift_thresholds<S: Scalar>(
    a: S,
    b: S,
    epsilon: S,
    gamma: S,
    n: S,
) -> Result<DriftBoundReport<S>, BoundError> {
    if !(a > S::zero() && a < b) {
        return Err(BoundError::BadInterval { a: f(a), b: f(b) });
    }
    if !(epsilon > S::zero()) {
        return Err(BoundError::NonpositiveMargin(f(epsilon)));
    }
    if !(gamma >= S::zero()) {
        return Err(BoundError::InvalidInput {
            name: "gamma",
            value: f(gamma),
        });
    }
    if !(n >= S::one()) {
        return Err(BoundError::InvalidInput {
            name: "n",
            value: f(n),
        });
    }
    Ok(DriftBoundReport::steps(
        TheoremId::NegativeDrift,
        &[
            ("a", a),
            ("b", b),
            ("epsilon", epsilon),
            ("gamma", gamma),
            ("n", n),
        ],
        (S::one() + gamma) * (b - a) * n / epsilon,
        Direction::Upper,
    ))
}

/// Lower bound `np / (1 + np)` on `Pr[Bin(n, p) > 0]`.
pub fn binomial_positive_lb<S: Scalar>(n: u64, p: S) -> S {
    let np = S::from_count(n) * p;
    np / (S::one() + np)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steps(r: &DriftBoundReport<f64>) -> f64 {
        match r.bound_value {
            BoundValue::Steps(v) => v,
            BoundValue::Tail { .. } => panic!("tail"),
        }
    }

    #[test]
    fn additive_examples() {
        assert_eq!(steps(&additive_bound(100.0, 0.5).unwrap()), 200.0);
        assert_eq!(steps(&additive_bound(0.0, 1.0).unwrap()), 0.0);
        assert_eq!(
            additive_bound(1.0, 0.0).unwrap_err(),
            BoundError::NonpositiveMargin(0.0)
        );
        let r = additive_bound(100.0, 0.5).unwrap();
        assert_eq!(r.inputs["n"], 100.0);
        assert_eq!(r.inputs["c"], 0.5);
        assert_eq!(r.direction, Direction::Upper);
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(steps(&reverse_additive_lower(100.0, 1.0, 0.0).unwrap()), 100.0);
        assert_eq!(steps(&reverse_additive_lower(100.0, 1.0, 100.0).unwrap()), 0.0);
        assert_eq!(steps(&reverse_additive_lower(10.0, 1.0, 50.0).unwrap()), 0.0);
        // Fair walk: zero interior drift gives no usable margin.
        assert!(matches!(
            reverse_additive_lower(10.0, 0.0, 0.0),
            Err(BoundError::NonpositiveMargin(_))
        ));
        assert_eq!(
            reverse_additive_lower(10.0, 1.0, 0.0).unwrap().direction,
            Direction::Lower
        );
    }

    #[test]
    fn two_phase_examples() {
        assert_eq!(steps(&two_phase_bound(100.0, 0.2, 10.0).unwrap()), 155.0);
        assert_eq!(steps(&two_phase_bound(0.0, 1.0, 0.0).unwrap()), 1.0);
        assert_eq!(
            two_phase_bound(1.0, 0.0, 1.0).unwrap_err(),
            BoundError::BadProbability(0.0)
        );
        assert!(two_phase_bound(1.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn rescaled_examples() {
        assert_eq!(steps(&rescaled_bound(|x| x, 100.0, 2.0).unwrap()), 50.0);
        let r = rescaled_bound(|x: f64| x.ln(), 10f64.exp(), 1.0).unwrap();
        assert!((steps(&r) - 10.0).abs() < 1e-12);
        assert!(rescaled_bound(|x| x, 1.0, -1.0).is_err());
    }

    #[test]
    fn variable_drift_multiplicative_closed_form() {
        let delta = 0.25;
        let n = 500.0;
        let r = variable_drift_bound(&|x: f64| delta * x, n, 0.5).unwrap();
        let expected = (1.0 + f64::ln(n)) / delta;
        assert!((steps(&r) - expected).abs() / expected < 1e-7);
        let closed = variable_drift_bound_closed(&LinearRate(delta), n).unwrap().unwrap();
        assert!((steps(&closed) - expected).abs() < 1e-12);
    }

    #[test]
    fn variable_drift_constant_is_additive() {
        let r = variable_drift_bound(&|_x: f64| 2.0, 41.0, 1.0).unwrap();
        assert!((steps(&r) - 20.5).abs() < 1e-12);
    }

    #[test]
    fn variable_drift_rejects_bad_h() {
        assert!(matches!(
            variable_drift_bound(&|x: f64| 5.0 - x, 10.0, 0.5),
            Err(BoundError::NonpositiveH { .. }) | Err(BoundError::NotIncreasing { .. })
        ));
        assert!(matches!(
            variable_drift_bound(&|x: f64| 1.0 / x, 10.0, 0.5),
            Err(BoundError::NotIncreasing { .. })
        ));
        assert!(matches!(
            variable_drift_bound(&|_x: f64| 0.0, 10.0, 0.5),
            Err(BoundError::NonpositiveH { .. })
        ));
    }

    #[test]
    fn multiplicative_mean_examples() {
        assert!((steps(&multiplicative_mean_bound(1.0, 0.2).unwrap()) - 5.0).abs() < 1e-12);
        let e = std::f64::consts::E;
        assert!((steps(&multiplicative_mean_bound(e, 0.5).unwrap()) - 4.0).abs() < 1e-12);
        assert_eq!(
            multiplicative_mean_bound(10.0, 1.0).unwrap_err(),
            BoundError::BadDelta(1.0)
        );
    }

    #[test]
    fn multiplicative_tail_examples() {
        let r = multiplicative_tail(1000.0, 0.5, 3.0).unwrap();
        match r.bound_value {
            BoundValue::Tail {
                t_threshold,
                probability,
            } => {
                assert_eq!(t_threshold, 15);
                assert!((probability - 0.049_787_068_367_863_94_f64).abs() < 1e-15);
            }
            _ => panic!(),
        }
        let delta = 0.3;
        let r = multiplicative_tail(1.0, delta, 1.0).unwrap();
        let expected = (1.0 / f64::ln(1.0 - delta).abs()).ceil() as u64;
        assert_eq!(
            r.bound_value,
            BoundValue::Tail {
                t_threshold: expected,
                probability: (-1.0f64).exp()
            }
        );
        assert_eq!(multiplicative_tail(10.0, 0.5, 0.0).unwrap_err(), BoundError::BadK(0.0));
        assert!(multiplicative_tail(10.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn negative_drift_examples() {
        let r = negative_drift_thresholds(0.25, 0.75, 0.2, 0.5, 200.0).unwrap();
        assert!((steps(&r) - 750.0).abs() < 1e-9);
        let r = negative_drift_thresholds(0.25, 0.75, 0.2, 0.0, 200.0).unwrap();
        assert!((steps(&r) - 500.0).abs() < 1e-9);
        assert!(matches!(
            negative_drift_thresholds(0.75, 0.25, 0.2, 0.5, 200.0),
            Err(BoundError::BadInterval { .. })
        ));
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial_positive_lb(0, 0.3), 0.0);
        assert_eq!(binomial_positive_lb(1, 1.0), 0.5);
        assert_eq!(binomial_positive_lb(10, 0.1), 0.5);
        assert!(0.5 <= 1.0 - 0.9f64.powi(10));
    }

    #[test]
    fn single_precision_bounds() {
        let r = additive_bound(100.0f32, 0.5).unwrap();
        assert_eq!(r.value(), 200.0f32);
    }

    #[test]
    fn report_serializes_with_stable_fields() {
        let r = multiplicative_tail(1000.0, 0.5, 3.0).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["theorem_id"], "MULTIPLICATIVE_TAIL");
        assert_eq!(json["direction"], "UPPER");
        assert_eq!(json["bound_value"]["t_threshold"], 15);
        let back: DriftBoundReport<f64> = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);
    }
}
