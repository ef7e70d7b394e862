//! Cross-checks between simulation, exact solvers and independent
//! brute-force reimplementations.

use driftlab_core::bounds::{additive_bound, binomial_positive_lb, variable_drift_bound};
use driftlab_core::chain::walks::{BiasedWalk, Decrement};
use driftlab_core::chain::{replicate_hitting, solve_expected_hitting, HittingTime};
use driftlab_core::decline::{exact_expected_time, make_random_decline, DeclineFactor};
use driftlab_core::ea::{mutation_flips, onemax_zero_chain, run_ea, RunStatus};
use driftlab_core::fitness::{
    binval, hot_monotone, is_strictly_monotone, level, onemax, HotMonotoneConfig, Mode,
    MonotoneVerdict,
};
use driftlab_core::seed::{replicate, rng_from_seed, with_threads};
use driftlab_core::{BitString, EAParams, Fitness, HittingStats, NoiseConfig, Start};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

fn onemax_exact(n: usize, c: f64) -> f64 {
    let chain = onemax_zero_chain(n, c).unwrap();
    let states: Vec<u64> = (0..=n as u64).collect();
    solve_expected_hitting::<f64, _, _>(&chain, |x: &u64| *x == 0, &states).unwrap()[&(n as u64)]
}

fn ea_times(n: usize, c: f64, runs: usize, seed: u64) -> Vec<HittingTime> {
    let params = EAParams::new(n, c).unwrap();
    replicate(runs, seed, |_, s| {
        let r = run_ea(
            &mut onemax(n),
            &params,
            &Start::Given(BitString::zeros(n)),
            &NoiseConfig::noiseless(),
            1_000_000,
            s,
            None,
        )
        .unwrap();
        match r.status {
            RunStatus::Optimum(t) => HittingTime::Hit(t),
            other => HittingTime::Censored(other.steps()),
        }
    })
}

#[test]
fn onemax_simulation_matches_zero_count_chain() {
    let exact = onemax_exact(16, 1.0);
    let stats = HittingStats::from_times(&ea_times(16, 1.0, 2000, 99), 1_000_000, 99).unwrap();
    assert_eq!(stats.censored_count, 0);
    assert!(
        (stats.mean - exact).abs() <= 3.0 * stats.std_error,
        "mean {} exact {} se {}",
        stats.mean,
        exact,
        stats.std_error
    );
}

#[test]
fn ea_replications_ignore_thread_count() {
    let one = with_threads(1, || ea_times(12, 1.0, 64, 5)).unwrap();
    let eight = with_threads(8, || ea_times(12, 1.0, 64, 5)).unwrap();
    assert_eq!(one, eight);
}

#[test]
fn flip_count_is_binomial() {
    let (n, c, samples) = (100usize, 1.0, 1_000_000usize);
    let params = EAParams::new(n, c).unwrap();
    let mut rng = rng_from_seed(2024);
    let mut counts = vec![0u64; n + 1];
    for _ in 0..samples {
        counts[mutation_flips(&params, &mut rng).len()] += 1;
    }
    let total: u64 = counts.iter().enumerate().map(|(k, &m)| k as u64 * m).sum();
    let mean = total as f64 / samples as f64;
    let sigma = (n as f64 * 0.01 * 0.99 / samples as f64).sqrt();
    assert!((mean - 1.0).abs() <= 3.0 * sigma, "mean distance {mean}");

    // Pool the upper tail so every cell expects at least 5 samples.
    let pmf = Binomial::new(0.01, n as u64).unwrap();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut tail = (0.0, 0.0);
    for (k, &m) in counts.iter().enumerate() {
        let expected = pmf.pmf(k as u64) * samples as f64;
        if expected >= 5.0 && tail == (0.0, 0.0) {
            cells.push((m as f64, expected));
        } else {
            tail.0 += m as f64;
            tail.1 += expected;
        }
    }
    cells.push(tail);
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    assert!(p_value > 1e-3, "chi-square {stat} on {dof} dof, p = {p_value}");
}

#[test]
fn flips_are_uniform_over_positions() {
    let (n, samples) = (20usize, 200_000usize);
    let params = EAParams::new(n, 2.0).unwrap();
    let mut rng = rng_from_seed(8);
    let mut hits = vec![0u64; n];
    for _ in 0..samples {
        for i in mutation_flips(&params, &mut rng) {
            hits[i] += 1;
        }
    }
    let p = 0.1;
    let sd = (samples as f64 * p * (1.0 - p)).sqrt();
    for h in hits {
        assert!((h as f64 - samples as f64 * p).abs() < 5.0 * sd);
    }
}

/// Brute-force level and value straight from the definition.
fn direct_hot_value(f: &driftlab_core::fitness::HotMonotone, x: &BitString) -> (u64, f64) {
    let n = x.len();
    let cap = f.level_cap();
    let eps = f.config().epsilon;
    let mut l = 0;
    for lp in 1..=cap {
        let b = &f.level_sets(lp).b;
        let zeros = b.iter().filter(|&&i| !x.get(i)).count();
        // Compare in integers: zeros * 10 <= epsilon * 10 * |B| for one-decimal epsilon.
        if (zeros * 10) as f64 <= (eps * 10.0).round() * b.len() as f64 {
            l = lp;
        }
    }
    let a = &f.level_sets(l + 1).a;
    let mut value = (l as f64) * (n * n) as f64;
    for i in 0..n {
        if x.get(i) {
            value += if a.contains(&i) { n as f64 } else { 1.0 };
        }
    }
    (l, value)
}

fn small_config(n: usize, seed: u64) -> HotMonotoneConfig {
    HotMonotoneConfig {
        n,
        c: 2.5,
        alpha: 0.4,
        beta: 0.2,
        epsilon: 0.5,
        mu: 1.0,
        level_cap: Some(6),
        seed,
    }
}

#[test]
fn hot_monotone_matches_direct_evaluation_on_all_points() {
    for seed in [0u64, 1, 77] {
        let f = hot_monotone(small_config(10, seed), Mode::Static).unwrap();
        for x in 0..1024usize {
            let p = BitString::from_bits((0..10).map(|i| x >> i & 1 == 1));
            let (l, v) = direct_hot_value(&f, &p);
            assert_eq!(level(&p, &f).unwrap(), l, "seed {seed}, x = {p}");
            assert_eq!(f.evaluate(&p), v, "seed {seed}, x = {p}");
        }
        // A string with at most one zero inside B_1 is at least on level 1.
        let mut x = BitString::zeros(10);
        for &i in &f.level_sets(1).b[1..] {
            x.set(i, true);
        }
        assert!(level(&x, &f).unwrap() >= 1);
    }
}

#[test]
fn hot_monotone_static_is_strictly_monotone_for_many_seeds() {
    for seed in 0..20u64 {
        let mut cfg = small_config(12, seed);
        cfg.alpha = 0.4;
        cfg.beta = 0.25;
        cfg.epsilon = 0.4;
        cfg.level_cap = Some(8);
        let f = hot_monotone(cfg, Mode::Static).unwrap();
        assert!(
            is_strictly_monotone(&f, 12).unwrap().is_strict(),
            "seed {seed}"
        );
    }
}

struct Table(Vec<f64>, usize);

impl Fitness for Table {
    fn len(&self) -> usize {
        self.1
    }
    fn evaluate(&self, point: &BitString) -> f64 {
        let idx = point
            .iter()
            .enumerate()
            .map(|(i, b)| usize::from(b) << i)
            .sum::<usize>();
        self.0[idx]
    }
    fn is_optimum(&self, _: &BitString) -> Option<bool> {
        None
    }
}

/// All `3^n`-style dominance pairs, compared directly.
fn all_pairs_strict(f: &dyn Fitness, n: usize) -> bool {
    let pt = |x: usize| BitString::from_bits((0..n).map(|i| x >> i & 1 == 1));
    (0..1usize << n).all(|y| {
        // Every proper submask x of y.
        let mut x = y;
        loop {
            if x == 0 {
                break y == 0 || f.evaluate(&pt(y)) > f.evaluate(&pt(0));
            }
            x = (x - 1) & y;
            if f.evaluate(&pt(y)) <= f.evaluate(&pt(x)) {
                break false;
            }
        }
    })
}

#[test]
fn covering_pair_check_agrees_with_all_pairs() {
    let n = 5;
    let mut rng = rng_from_seed(12);
    use rand::Rng;
    for trial in 0..300 {
        // Popcount plus noise: monotone for small noise, broken for large.
        let scale = if trial % 2 == 0 { 0.3 } else { 1.5 };
        let table: Vec<f64> = (0..1usize << n)
            .map(|x| x.count_ones() as f64 + scale * rng.random::<f64>())
            .collect();
        let f = Table(table, n);
        let verdict = is_strictly_monotone(&f, n).unwrap();
        assert_eq!(verdict.is_strict(), all_pairs_strict(&f, n), "trial {trial}");
        if let MonotoneVerdict::Violation { lower, upper } = verdict {
            assert!(f.evaluate(&upper) <= f.evaluate(&lower));
            assert!(lower.iter().zip(upper.iter()).all(|(a, b)| !a || b));
        }
    }
}

#[test]
fn additive_bound_dominates_exact_times() {
    for &(p_down, cap) in &[(0.75, 120u64), (0.6, 80), (0.9, 40), (1.0, 30)] {
        let walk = BiasedWalk::new(p_down, Some(cap)).unwrap();
        let states: Vec<u64> = (0..=cap).collect();
        let exact = solve_expected_hitting::<f64, _, _>(&walk, |x: &u64| *x == 0, &states).unwrap();
        let drift = 2.0 * p_down - 1.0;
        for x in [1u64, cap / 3, cap / 2, cap] {
            let bound = additive_bound(x as f64, drift).unwrap().value();
            assert!(exact[&x] <= bound * (1.0 + 1e-9), "p {p_down} x {x}");
        }
    }
    let states: Vec<u64> = (0..=40).collect();
    let exact = solve_expected_hitting::<f64, _, _>(&Decrement, |x: &u64| *x == 0, &states).unwrap();
    assert_eq!(exact[&40], additive_bound(40.0, 1.0).unwrap().value());
}

#[test]
fn biased_walk_monte_carlo_matches_exact() {
    let walk = BiasedWalk::new(0.75, Some(1000)).unwrap();
    let stats = replicate_hitting(&walk, &50u64, |x: &u64| *x == 0, 4000, 100_000, 31).unwrap();
    assert!((stats.mean - 100.0).abs() <= 3.0 * stats.std_error);
}

#[test]
fn variable_drift_bound_covers_onemax() {
    let (n, c) = (64usize, 0.5);
    let nf = n as f64;
    let h = move |x: f64| x * c * (1.0 - c) / (nf * (1.0 + c));
    let bound = variable_drift_bound(&h, nf, 1e-3).unwrap().value();
    let exact = onemax_exact(n, c);
    assert!(bound >= exact, "bound {bound} exact {exact}");
    assert!(bound / exact < 20.0);
}

#[test]
fn binomial_inequality_on_grid() {
    for n in 0..=64u64 {
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            let rhs = 1.0 - (1.0 - p).powi(n as i32);
            assert!(binomial_positive_lb(n, p) <= rhs + 1e-15, "n {n} p {p}");
        }
    }
}

#[test]
fn random_decline_simulation_matches_recursion() {
    let a = DeclineFactor::from_decimal("1").unwrap();
    let chain = make_random_decline(a);
    for n in [10u64, 100, 1000] {
        let exact: f64 = exact_expected_time(a, n).unwrap();
        let stats = replicate_hitting(&chain, &n, |x: &u64| *x == 0, 20_000, 10_000, n).unwrap();
        assert!(
            (stats.mean - exact).abs() <= 3.0 * stats.std_error,
            "n {n}: mean {} exact {exact}",
            stats.mean
        );
    }
}

#[test]
fn binval_runs_reach_the_optimum() {
    let n = 30;
    let params = EAParams::new(n, 1.0).unwrap();
    let r = run_ea(
        &mut binval(n),
        &params,
        &Start::Random,
        &NoiseConfig::noiseless(),
        1_000_000,
        4,
        None,
    )
    .unwrap();
    assert!(r.status.is_optimum());
    assert!(r.final_point.is_all_ones());
}
