//! First-step analysis: expected hitting times of a finite chain.
//!
//! Solves `E[s] = 1 + sum_s' P(s, s') E[s']` with `E = 0` on the target.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use crate::scalar::Scalar;

use super::{ChainError, ChainKernel, ROW_SUM_TOLERANCE};

/// Largest number of non-target states solved by dense elimination; larger
/// systems use Gauss-Seidel sweeps.
pub const DIRECT_SOLVE_LIMIT: usize = 1000;

const MAX_SWEEPS: usize = 1_000_000;
const REFINEMENT_ROUNDS: usize = 3;

struct SparseSystem<S> {
    /// Rows over non-target unknowns: `(column, probability)`, diagonal kept.
    rows: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> SparseSystem<S> {
    /// `max |E - 1 - P E| / max(1, max |E|)`.
    fn relative_residual(&self, e: &[S]) -> S {
        let mut worst = S::zero();
        let mut scale = S::one();
        for (i, row) in self.rows.iter().enumerate() {
            let pe = row.iter().fold(S::zero(), |acc, &(j, p)| acc + p * e[j]);
            let r = (e[i] - S::one() - pe).abs();
            worst = worst.max(r);
            scale = scale.max(e[i].abs());
        }
        worst / scale
    }

    fn residual_vector(&self, e: &[S]) -> Vec<S> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let pe = row.iter().fold(S::zero(), |acc, &(j, p)| acc + p * e[j]);
                S::one() + pe - e[i]
            })
            .collect()
    }

    fn dense_matrix(&self) -> Vec<Vec<S>> {
        let m = self.rows.len();
        let mut a = vec![vec![S::zero(); m]; m];
        for (i, row) in self.rows.iter().enumerate() {
            a[i][i] = S::one();
            for &(j, p) in row {
                a[i][j] = a[i][j] - p;
            }
        }
        a
    }

    fn solve_direct(&self) -> Result<Vec<S>, ChainError> {
        let m = self.rows.len();
        let lu = Lu::factor(self.dense_matrix())?;
        let mut e = lu.solve(vec![S::one(); m]);
        let tol = S::solver_tolerance();
        for _ in 0..REFINEMENT_ROUNDS {
            if self.relative_residual(&e) <= tol {
                break;
            }
            let correction = lu.solve(self.residual_vector(&e));
            for (x, d) in e.iter_mut().zip(correction) {
                *x = *x + d;
            }
        }
        Ok(e)
    }

    fn solve_iterative(&self) -> Result<Vec<S>, ChainError> {
        let m = self.rows.len();
        let mut e = vec![S::zero(); m];
        let tol = S::solver_tolerance();
        let diag: Vec<S> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                S::one()
                    - row
                        .iter()
                        .filter(|(j, _)| *j == i)
                        .fold(S::zero(), |acc, &(_, p)| acc + p)
            })
            .collect();
        let mut residual = S::infinity();
        for sweep in 0..MAX_SWEEPS {
            for i in 0..m {
                let off = self.rows[i]
                    .iter()
                    .filter(|(j, _)| *j != i)
                    .fold(S::zero(), |acc, &(j, p)| acc + p * e[j]);
                e[i] = (S::one() + off) / diag[i];
            }
            if sweep % 16 == 0 || sweep + 1 == MAX_SWEEPS {
                residual = self.relative_residual(&e);
                if residual <= tol {
                    return Ok(e);
                }
            }
        }
        Err(ChainError::NotConverged {
            residual: residual.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Dense LU factorization with partial pivoting.
struct Lu<S> {
    a: Vec<Vec<S>>,
    perm: Vec<usize>,
}

impl<S: Scalar> Lu<S> {
    fn factor(mut a: Vec<Vec<S>>) -> Result<Self, ChainError> {
        let m = a.len();
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let pivot = (k..m)
                .max_by(|&i, &j| {
                    a[i][k]
                        .abs()
                        .partial_cmp(&a[j][k].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(k);
            if a[pivot][k] == S::zero() {
                return Err(ChainError::Singular {
                    state: format!("unknown #{k}"),
                });
            }
            a.swap(k, pivot);
            perm.swap(k, pivot);
            let (upper, lower) = a.split_at_mut(k + 1);
            let pivot_row = &upper[k];
            for row in lower.iter_mut() {
                let factor = row[k] / pivot_row[k];
                row[k] = factor;
                if factor != S::zero() {
                    for j in k + 1..m {
                        row[j] = row[j] - factor * pivot_row[j];
                    }
                }
            }
        }
        Ok(Lu { a, perm })
    }

    fn solve(&self, b: Vec<S>) -> Vec<S> {
        let m = self.a.len();
        let mut y: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..m {
            let s = (0..i).fold(y[i], |acc, j| acc - self.a[i][j] * y[j]);
            y[i] = s;
        }
        for i in (0..m).rev() {
            let s = (i + 1..m).fold(y[i], |acc, j| acc - self.a[i][j] * y[j]);
            y[i] = s / self.a[i][i];
        }
        y
    }
}

/// Exact expected hitting times of `target` from every enumerated state.
///
/// The enumeration must be closed under the chain's transitions and the
/// target must be reachable from every state.
pub fn solve_expected_hitting<S, C, P>(
    chain: &C,
    target: P,
    states: &[C::State],
) -> Result<HashMap<C::State, S>, ChainError>
where
    S: Scalar,
    C: ChainKernel + ?Sized,
    C::State: Eq + Hash,
    P: Fn(&C::State) -> bool,
{
    let index: HashMap<&C::State, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    if index.len() != states.len() {
        return Err(ChainError::InvalidArgument(
            "state enumeration contains duplicates".into(),
        ));
    }
    let in_target: Vec<bool> = states.iter().map(&target).collect();

    // Full rows over enumeration indices.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(states.len());
    for s in states {
        let row = chain
            .exact_transitions(s)
            .ok_or_else(|| ChainError::NoExactTransitions {
                state: format!("{s:?}"),
            })?;
        let sum: f64 = row.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE || row.iter().any(|(_, p)| *p < 0.0) {
            return Err(ChainError::BadRow {
                state: format!("{s:?}"),
                sum,
            });
        }
        let mut mapped = Vec::with_capacity(row.len());
        for (succ, p) in row {
            if p == 0.0 {
                continue;
            }
            let j = *index.get(&succ).ok_or_else(|| ChainError::NotClosed {
                from: format!("{s:?}"),
                to: format!("{succ:?}"),
            })?;
            mapped.push((j, p));
        }
        rows.push(mapped);
    }

    // Every state must reach the target along positive-probability edges.
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
    for (i, row) in rows.iter().enumerate() {
        for &(j, _) in row {
            predecessors[j].push(i);
        }
    }
    let mut reaches = in_target.clone();
    let mut queue: VecDeque<usize> = (0..states.len()).filter(|&i| in_target[i]).collect();
    while let Some(j) = queue.pop_front() {
        for &i in &predecessors[j] {
            if !reaches[i] {
                reaches[i] = true;
                queue.push_back(i);
            }
        }
    }
    if let Some(i) = reaches.iter().position(|r| !r) {
        return Err(ChainError::Singular {
            state: format!("{:?}", states[i]),
        });
    }

    // Restrict to non-target unknowns.
    let unknowns: Vec<usize> = (0..states.len()).filter(|&i| !in_target[i]).collect();
    let mut slot = vec![usize::MAX; states.len()];
    for (k, &i) in unknowns.iter().enumerate() {
        slot[i] = k;
    }
    let system = SparseSystem {
        rows: unknowns
            .iter()
            .map(|&i| {
                rows[i]
                    .iter()
                    .filter(|(j, _)| !in_target[*j])
                    .map(|&(j, p)| (slot[j], S::lit(p)))
                    .collect()
            })
            .collect(),
    };

    let solution = if unknowns.is_empty() {
        Vec::new()
    } else if unknowns.len() <= DIRECT_SOLVE_LIMIT {
        system.solve_direct()?
    } else {
        system.solve_iterative()?
    };
    let residual = if solution.is_empty() {
        S::zero()
    } else {
        system.relative_residual(&solution)
    };
    if residual > S::solver_tolerance() || solution.iter().any(|v| !v.is_finite()) {
        return Err(ChainError::NotConverged {
            residual: residual.to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut out = HashMap::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let v = if in_target[i] {
            S::zero()
        } else {
            solution[slot[i]]
        };
        out.insert(s.clone(), v);
    }
    Ok(out)
}
