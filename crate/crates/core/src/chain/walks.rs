//! Small reference chains used as test fixtures and in bound checks.

use rand::{Rng, RngCore};

use super::{ChainError, ChainKernel, TransitionRow, ROW_SUM_TOLERANCE};

/// `x -> x - 1`, with 0 absorbing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Decrement;

impl ChainKernel for Decrement {
    type State = u64;

    fn sample_next(&self, state: &u64, _rng: &mut dyn RngCore) -> u64 {
        state.saturating_sub(1)
    }

    fn exact_transitions(&self, state: &u64) -> Option<TransitionRow<u64>> {
        Some(vec![(state.saturating_sub(1), 1.0)])
    }
}

/// Every state is absorbing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fixed;

impl ChainKernel for Fixed {
    type State = u64;

    fn sample_next(&self, state: &u64, _rng: &mut dyn RngCore) -> u64 {
        *state
    }

    fn exact_transitions(&self, state: &u64) -> Option<TransitionRow<u64>> {
        Some(vec![(*state, 1.0)])
    }
}

/// Nearest-neighbour walk on the non-negative integers: down with
/// probability `p_down`, up otherwise. A move below 0 or above the optional
/// cap is replaced by staying put.
#[derive(Debug, Clone, Copy)]
pub struct BiasedWalk {
    p_down: f64,
    cap: Option<u64>,
}

impl BiasedWalk {
    pub fn new(p_down: f64, cap: Option<u64>) -> Result<Self, ChainError> {
        if !(0.0..=1.0).contains(&p_down) {
            return Err(ChainError::InvalidArgument(format!(
                "p_down = {p_down} is not a probability"
            )));
        }
        Ok(BiasedWalk { p_down, cap })
    }

    pub fn p_down(&self) -> f64 {
        self.p_down
    }

    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    fn up(&self, x: u64) -> u64 {
        match self.cap {
            Some(cap) if x >= cap => x,
            _ => x + 1,
        }
    }
}

impl ChainKernel for BiasedWalk {
    type State = u64;

    fn sample_next(&self, state: &u64, rng: &mut dyn RngCore) -> u64 {
        if rng.random_bool(self.p_down) {
            state.saturating_sub(1)
        } else {
            self.up(*state)
        }
    }

    fn exact_transitions(&self, state: &u64) -> Option<TransitionRow<u64>> {
        let down = state.saturating_sub(1);
        let up = self.up(*state);
        if down == up {
            return Some(vec![(down, 1.0)]);
        }
        Some(vec![(down, self.p_down), (up, 1.0 - self.p_down)])
    }

    fn is_finite(&self) -> bool {
        self.cap.is_some()
    }
}

/// A chain on `0..rows.len()` given by explicit transition rows.
#[derive(Debug, Clone)]
pub struct FiniteChain {
    rows: Vec<TransitionRow<usize>>,
}

impl FiniteChain {
    pub fn new(rows: Vec<TransitionRow<usize>>) -> Result<Self, ChainError> {
        let m = rows.len();
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if row.iter().any(|&(j, p)| j >= m || p < 0.0) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE
            {
                return Err(ChainError::BadRow {
                    state: i.to_string(),
                    sum,
                });
            }
        }
        Ok(FiniteChain { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl ChainKernel for FiniteChain {
    type State = usize;

    fn sample_next(&self, state: &usize, rng: &mut dyn RngCore) -> usize {
        let row = &self.rows[*state];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(j, p) in row {
            acc += p;
            if u < acc {
                return j;
            }
        }
        row.iter().rev().find(|(_, p)| *p > 0.0).map_or(*state, |r| r.0)
    }

    fn exact_transitions(&self, state: &usize) -> Option<TransitionRow<usize>> {
        self.rows.get(*state).cloned()
    }

    fn is_finite(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::check_rows;

    #[test]
    fn walk_rows_are_normalized() {
        let w = BiasedWalk::new(0.75, Some(10)).unwrap();
        let states: Vec<u64> = (0..=10).collect();
        check_rows(&w, &states).unwrap();
        assert_eq!(w.exact_transitions(&10).unwrap(), vec![(9, 0.75), (10, 0.25)]);
        assert_eq!(w.exact_transitions(&0).unwrap(), vec![(0, 0.75), (1, 0.25)]);
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(BiasedWalk::new(1.5, None).is_err());
        assert!(FiniteChain::new(vec![vec![(0, 0.5)]]).is_err());
        assert!(FiniteChain::new(vec![vec![(1, 1.0)]]).is_err());
    }
}
