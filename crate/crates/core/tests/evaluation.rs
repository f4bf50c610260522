mod common;

use mtrl_core::evaluation::{
    evaluate_policy, evaluate_start, lemma_a4_harness, optimal_values, subspace_alignment, OraclePolicy,
    Policy, RandomPolicy,
};
use mtrl_core::linalg::svd;
use mtrl_core::linear_mdp::LinearMdpSpec;
use mtrl_core::{seed, Execution, Matrix};
use proptest::prelude::*;
use rand::Rng;

use common::{noiseless_corridor, random_matrix, world};

/// Value of a deterministic Markov policy `pi[h][s]`, by forward propagation
/// of the state distribution from `start`.
fn policy_value(spec: &LinearMdpSpec, horizon: usize, pi: &[Vec<usize>], start: usize) -> f64 {
    let k = spec.num_states();
    let mut dist = vec![0.0; k];
    dist[start] = 1.0;
    let mut total = 0.0;
    for level in pi.iter().take(horizon) {
        let mut next = vec![0.0; k];
        for s in 0..k {
            if dist[s] == 0.0 {
                continue;
            }
            let a = level[s];
            total += dist[s] * spec.reward(s, a);
            for (s2, p) in spec.transition_row(s, a).iter().enumerate() {
                next[s2] += dist[s] * p;
            }
        }
        dist = next;
    }
    total
}

/// All deterministic Markov policies, as `H × K` action tables.
fn all_policies(k: usize, na: usize, horizon: usize) -> Vec<Vec<Vec<usize>>> {
    let slots = k * horizon;
    let count = na.pow(slots as u32);
    (0..count)
        .map(|mut code| {
            (0..horizon)
                .map(|_| {
                    (0..k)
                        .map(|_| {
                            let a = code % na;
                            code /= na;
                            a
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

#[test]
fn dynamic_programming_matches_brute_force_policy_enumeration() {
    let mut rng = seed::rng(61);
    let mut checked = 0;
    while checked < 30 {
        let k = rng.random_range(1..=5);
        let na: usize = rng.random_range(1..=3);
        let horizon = rng.random_range(1..=4);
        if na.pow((k * horizon) as u32) > 20_000 {
            continue;
        }
        let spec = LinearMdpSpec::random_tabular(k, na, horizon, &mut rng).unwrap();
        let table = optimal_values(&spec, horizon);
        let policies = all_policies(k, na, horizon);
        for s in 0..k {
            let best = policies
                .iter()
                .map(|pi| policy_value(&spec, horizon, pi, s))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((table.value(1, s) - best).abs() < 1e-10);
        }
        checked += 1;
    }
}

#[test]
fn bellman_residual_is_zero() {
    let mut rng = seed::rng(62);
    for _ in 0..20 {
        let spec = LinearMdpSpec::random_tabular(5, 3, 4, &mut rng).unwrap();
        let table = optimal_values(&spec, 4);
        for s in 0..5 {
            assert_eq!(table.value(5, s), 0.0);
        }
        for h in 1..=4 {
            let next: Vec<f64> = (0..5).map(|s| table.value(h + 1, s)).collect();
            for s in 0..5 {
                let best = (0..3)
                    .map(|a| spec.backup(s, a, &next))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(table.value(h, s), best);
            }
        }
    }
}

const FIRE_RING: &str = "FFFFF\nF...F\nF.S.F\nF..GF\nFFFFF";

#[test]
fn random_policy_is_worse_than_optimal() {
    let w = world(FIRE_RING, 30, 0.5, 0.05, 5);
    let oracle = OraclePolicy::new(&w).unwrap();
    let v_star = oracle.values().value(1, w.start_state());
    let (mean, se) = evaluate_start(&RandomPolicy, &w, 4000, 7, Execution::Parallel).unwrap();
    assert!(mean + 3.0 * se < v_star, "{mean} ± {se} vs {v_star}");
}

#[test]
fn oracle_rollouts_never_beat_the_optimal_value() {
    let w = world(FIRE_RING, 30, 0.5, 0.2, 5);
    let oracle = OraclePolicy::new(&w).unwrap();
    let report = evaluate_policy(&oracle, &w, 4000, 8, Execution::Parallel).unwrap();
    assert!(report.mean_return <= report.optimal_start + 3.0 * report.stderr);
    assert!(report.suboptimality_start.abs() <= 3.0 * report.stderr + 1e-9);
    assert!(report.stderr >= 0.0);
}

#[test]
fn deterministic_oracle_rollout_equals_the_optimal_value() {
    let w = noiseless_corridor(3);
    let oracle = OraclePolicy::new(&w).unwrap();
    let report = evaluate_policy(&oracle, &w, 10, 0, Execution::Sequential).unwrap();
    assert_eq!(report.mean_return, 99.0);
    assert_eq!(report.stderr, 0.0);
    assert_eq!(report.suboptimality_max, 0.0);
}

#[test]
fn standard_error_shrinks_like_inverse_square_root() {
    let w = world(FIRE_RING, 30, 0.5, 0.1, 5);
    let se: Vec<f64> = (0..5)
        .map(|i| {
            evaluate_start(
                &RandomPolicy,
                &w,
                10_000 << i,
                100 + i as u64,
                Execution::Parallel,
            )
            .unwrap()
            .1
        })
        .collect();
    for pair in se.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "{se:?}");
    }
}

#[test]
fn evaluation_does_not_depend_on_the_schedule() {
    let w = world(FIRE_RING, 30, 0.5, 0.1, 5);
    let a = evaluate_policy(&RandomPolicy, &w, 500, 9, Execution::Sequential).unwrap();
    let b = mtrl_core::exec::with_workers(3, || {
        evaluate_policy(&RandomPolicy, &w, 500, 9, Execution::Parallel)
    })
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn alignment_of_the_orthogonal_complement_is_total() {
    let w = world("S.G", 4, 0.0, 0.0, 1);
    let b_star = w.ground_truth_representation();
    let mut comp = Matrix::zeros(w.ambient_dim(), w.ambient_dim() - b_star.cols());
    let mut j = 0;
    for i in 0..w.ambient_dim() {
        if !w.is_informative_coordinate(i) {
            comp.set(i, j, 1.0);
            j += 1;
        }
    }
    let report = subspace_alignment(&comp, &b_star).unwrap();
    assert!((report.aggregate - (b_star.cols() as f64).sqrt()).abs() < 1e-12);
    let (informative, noise) = report.split_means(|i| w.is_informative_coordinate(i));
    assert_eq!((informative, noise), (0.0, 1.0));
    assert!(subspace_alignment(&Matrix::identity(3), &b_star).is_err());
}

#[test]
fn lemma_a4_holds_on_random_mdps() {
    let mut rng = seed::rng(63);
    for _ in 0..50 {
        let k = rng.random_range(1..=6);
        let na = rng.random_range(1..=3);
        let horizon = rng.random_range(1..=5);
        let spec = LinearMdpSpec::random_tabular(k, na, horizon, &mut rng).unwrap();
        let deltas: Vec<f64> = (0..horizon).map(|_| rng.random()).collect();
        let report = lemma_a4_harness(&spec, horizon, &deltas, &mut rng).unwrap();
        assert!(report.violations.is_empty());
        assert!(report.worst_ratio <= 1.0);
        assert_eq!(report.checks, k * horizon);
    }
}

fn orthonormal(rows: usize, cols: usize, seed_value: u64) -> Matrix {
    let mut rng = seed::rng(seed_value);
    svd(&random_matrix(rows, cols, &mut rng)).unwrap().u
}

proptest! {
    #[test]
    fn alignment_aggregate_matches_the_trace_identity(
        rows in 3usize..16,
        seed_value in any::<u64>(),
        d_hat in 1usize..8,
        d_star in 1usize..8,
    ) {
        let b_hat = orthonormal(rows, d_hat.min(rows), seed_value);
        let b_star = orthonormal(rows, d_star.min(rows), seed_value.wrapping_add(1));
        let report = subspace_alignment(&b_hat, &b_star).unwrap();
        let cross = b_hat.transpose().matmul(&b_star).unwrap().frobenius_norm();
        let expect = (b_star.cols() as f64 - cross * cross).max(0.0).sqrt();
        prop_assert!((report.aggregate - expect).abs() <= 1e-7);
        for (i, norm) in report.coordinate_norms.iter().enumerate() {
            let row: f64 = b_hat.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - row).abs() <= 1e-12);
            prop_assert!(*norm <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn random_policy_picks_valid_actions(seed_value in any::<u64>()) {
        let mut rng = seed::rng(seed_value);
        let a = RandomPolicy.act(&[1.0, 0.0], 1, &mut rng);
        prop_assert!(a < 4);
    }
}
