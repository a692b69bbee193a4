mod common;

use markov_girsanov::cli::{simulate_csv, Law};
use markov_girsanov::config::{parse_raw, Experiment};
use markov_girsanov::likelihood::segment_generator;
use markov_girsanov::verify::{check_dynkin_mc, check_z_martingale_discrete};
use markov_girsanov::{
    build_quadratic, compensated_log_integral, ctmc_marginal_oracle, enumerate_paths, exact_expectation,
    likelihood_ctmc, likelihood_discrete, par, pathwise_likelihood_oracle, simulate_ctmc, simulate_discrete,
    Distribution, Estimate, GeneratorMatrix, QuadraticCoefficients, SeededSampler,
};
use proptest::prelude::*;
use rand::Rng;

use common::*;

/// Empirical frequency of each state as an estimate with its standard error.
fn frequencies(states: &[usize], n: usize) -> Vec<Estimate> {
    (0..n)
        .map(|j| {
            let hits: Vec<f64> = states.iter().map(|&s| if s == j { 1.0 } else { 0.0 }).collect();
            Estimate::from_samples(&hits).unwrap()
        })
        .collect()
}

fn feasible(rng: &mut rand_chacha::ChaCha8Rng, q0: &GeneratorMatrix) -> QuadraticCoefficients {
    loop {
        let c = random_coefficients(rng, q0.n_states(), (-0.3, 0.3), (0.4, 2.0));
        if build_quadratic(q0, &c).is_ok() {
            return c;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engine_matches_product_oracle(seed in any::<u64>(), n in 2usize..=4, steps in 0usize..=5) {
        let mut rng = rng(seed);
        let nu = random_distribution(&mut rng, n);
        let p0 = random_stochastic(&mut rng, n);
        let ctrl = random_table(&mut rng, n, 0.3);
        for (path, _) in enumerate_paths(&nu, &p0, steps).unwrap().entries() {
            let z = likelihood_discrete(path, &p0, &ctrl).unwrap();
            let oracle = pathwise_likelihood_oracle(path, &nu, &ctrl, &p0).unwrap();
            if oracle == 0.0 {
                prop_assert_eq!(z.terminal(), 0.0);
                prop_assert!(z.zero_at().is_some());
            } else {
                prop_assert!((z.terminal() - oracle).abs() <= 1e-12 * oracle);
            }
        }
    }

    #[test]
    fn change_of_measure_for_vector_payoffs(seed in any::<u64>(), n in 2usize..=3, steps in 1usize..=4) {
        let mut rng = rng(seed);
        let nu = random_distribution(&mut rng, n);
        let p0 = random_stochastic(&mut rng, n);
        let ctrl = random_table(&mut rng, n, 0.3);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let reference = enumerate_paths(&nu, &p0, steps).unwrap();
        let target = enumerate_paths(&nu, &ctrl, steps).unwrap();
        let lhs = exact_expectation(&reference, |p| likelihood_discrete(p, &p0, &ctrl).unwrap().terminal() * f[p.terminal()]);
        let rhs = exact_expectation(&target, |p| f[p.terminal()]);
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn ctmc_log_likelihood_matches_product_form(seed in any::<u64>(), n in 2usize..=4, horizon in 0.1f64..3.0) {
        let mut rng = rng(seed);
        let q0 = random_generator(&mut rng, n, 0.2, 2.0);
        let c = feasible(&mut rng, &q0);
        let nu = random_distribution(&mut rng, n);
        let traj = simulate_ctmc(&nu, &q0, None, horizon, SeededSampler::new(seed, 0)).unwrap();
        let z = likelihood_ctmc(&traj, &q0, &c).unwrap().terminal();
        let mut product = 1.0;
        let mut integral = 0.0;
        for (k, seg) in traj.segments().iter().enumerate() {
            let q = segment_generator(&traj, &q0, Some(&c), k).unwrap();
            let i = seg.state;
            for j in (0..n).filter(|&j| j != i) {
                integral += (seg.end - seg.start) * (q.get(i, j) - q0.get(i, j));
            }
            if let Some(jump) = traj.jumps().get(k) {
                product *= q.get(i, jump.target) / q0.get(i, jump.target);
            }
        }
        let expected = product * (-integral).exp();
        prop_assert!((z - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn identity_control_gives_unit_likelihood(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = rng(seed);
        let q0 = random_generator(&mut rng, n, 0.2, 2.0);
        let nu = random_distribution(&mut rng, n);
        let traj = simulate_ctmc(&nu, &q0, None, 2.0, SeededSampler::new(seed, 1)).unwrap();
        let ident = QuadraticCoefficients::identity(n);
        prop_assert_eq!(likelihood_ctmc(&traj, &q0, &ident).unwrap().terminal_log(), 0.0);
        prop_assert_eq!(compensated_log_integral(&traj, &q0, &ident, 2.0).unwrap(), 0.0);
    }
}

#[test]
fn atom_residual_scales_with_likelihood_size() {
    let mut rng = rng(202);
    for _ in 0..20 {
        let n = rng.random_range(2..=4);
        let steps = rng.random_range(1..=6);
        let nu = random_distribution(&mut rng, n);
        let p0 = random_stochastic(&mut rng, n);
        let ctrl = random_table(&mut rng, n, 0.3);
        let z_max = enumerate_paths(&nu, &p0, steps)
            .unwrap()
            .entries()
            .iter()
            .map(|(p, _)| likelihood_discrete(p, &p0, &ctrl).unwrap().terminal())
            .fold(1.0, f64::max);
        let reports = check_z_martingale_discrete(&nu, &ctrl, &p0, steps).unwrap();
        assert!(
            reports[0].value <= 1e-12 * z_max,
            "{} at Z_max {z_max}",
            reports[0].value
        );
        assert!(reports[1].passed, "{:?}", reports[1]);
    }
}

#[test]
fn discrete_marginals_match_enumeration() {
    let mut rng = rng(31);
    let n = 3;
    let nu = random_distribution(&mut rng, n);
    let ctrl = random_table(&mut rng, n, 0.3);
    let steps = 4;
    let exact = enumerate_paths(&nu, &ctrl, steps).unwrap();
    let states = par::map_indexed(100_000, |i| {
        simulate_discrete(&nu, &ctrl, steps, SeededSampler::new(8, i as u64))
            .unwrap()
            .terminal()
    });
    for (j, est) in frequencies(&states, n).iter().enumerate() {
        let p = exact_expectation(&exact, |path| if path.terminal() == j { 1.0 } else { 0.0 });
        assert!(est.within(p, 4.0), "state {j}: {} vs {p}", est.estimate);
    }
}

#[test]
fn ctmc_marginals_match_semigroup() {
    let mut rng = rng(32);
    for n in [2, 3, 4] {
        let q0 = random_generator(&mut rng, n, 0.2, 2.0);
        let c = feasible(&mut rng, &q0);
        let nu = random_distribution(&mut rng, n);
        let horizon = 1.3;
        // Reference law, then the constant quadratic target simulated directly.
        for (q, ctrl) in [(q0.clone(), None), (build_quadratic(&q0, &c).unwrap(), Some(&c))] {
            let oracle = ctmc_marginal_oracle(&q, &nu, horizon).unwrap();
            let states = par::map_indexed(100_000, |i| {
                let ctrl = ctrl.map(|c| c as &dyn markov_girsanov::JumpControl);
                simulate_ctmc(&nu, &q0, ctrl, horizon, SeededSampler::new(n as u64, i as u64))
                    .unwrap()
                    .terminal_state()
            });
            for (j, est) in frequencies(&states, n).iter().enumerate() {
                assert!(
                    est.within(oracle.prob(j), 4.0),
                    "N={n} state {j}: {} vs {}",
                    est.estimate,
                    oracle.prob(j)
                );
            }
        }
    }
}

#[test]
fn compensated_log_integral_has_mean_zero() {
    let mut rng = rng(33);
    let q0 = random_generator(&mut rng, 3, 0.3, 2.0);
    let c = feasible(&mut rng, &q0);
    let nu = Distribution::uniform(3).unwrap();
    let us = par::map_indexed(100_000, |i| {
        let traj = simulate_ctmc(&nu, &q0, None, 1.0, SeededSampler::new(21, i as u64)).unwrap();
        compensated_log_integral(&traj, &q0, &c, 1.0).unwrap()
    });
    let est = Estimate::from_samples(&us).unwrap();
    assert!(est.within(0.0, 4.0), "{est:?}");
}

#[test]
fn dynkin_passes_under_reference_law() {
    let mut rng = rng(34);
    let q0 = random_generator(&mut rng, 4, 0.3, 2.0);
    let nu = Distribution::dirac(4, 2).unwrap();
    let f = [1.0, -1.0, 3.0, 0.5];
    let reports = check_dynkin_mc(&nu, &q0, None, None, &f, 1.5, 50_000, 4).unwrap();
    assert!(reports.iter().all(|r| r.passed), "{reports:?}");
}

#[test]
fn parallel_and_sequential_maps_agree_bitwise() {
    let mut rng = rng(35);
    let q0 = random_generator(&mut rng, 3, 0.3, 2.0);
    let c = feasible(&mut rng, &q0);
    let nu = Distribution::uniform(3).unwrap();
    let work = |i: usize| {
        let traj = simulate_ctmc(&nu, &q0, Some(&c), 2.0, SeededSampler::new(77, i as u64)).unwrap();
        likelihood_ctmc(&traj, &q0, &c).unwrap().terminal_log().to_bits()
    };
    assert_eq!(par::map_indexed(5_000, work), par::map_indexed_sequential(5_000, work));
}

#[test]
fn simulated_csv_is_reproducible() {
    let raw = parse_raw(
        r#"
mode = "ctmc"
[state_space]
n = 3
[initial]
probs = [0.2, 0.3, 0.5]
[reference]
matrix = [[-1.0, 0.5, 0.5], [0.2, -0.4, 0.2], [1.0, 1.0, -2.0]]
[control]
kind = "quadratic"
a = [0.1, 0.0, -0.1]
b = [1.5, 1.0, 0.8]
[horizon]
time = 2.5
"#,
    )
    .unwrap();
    let exp = Experiment::validate(&raw).0.unwrap();
    let a = simulate_csv(&exp, 10, 2000, Law::Target).unwrap();
    let b = simulate_csv(&exp, 10, 2000, Law::Target).unwrap();
    let c = simulate_csv(&exp, 11, 2000, Law::Target).unwrap();
    let r = simulate_csv(&exp, 10, 2000, Law::Reference).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, r);
    assert_eq!(a.lines().count(), 2001);
}
