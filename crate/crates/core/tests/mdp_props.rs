use oorl::mdp::{
    evaluate_policy, optimal_policy, optimal_values, rollout_return, tabular_embed, worst_values,
    Kernel, LinearMixtureMdp, Policy, RewardTable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mdp(n: usize, m: usize, horizon: usize, seed: u64) -> LinearMixtureMdp {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n * m)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
            let t: f64 = raw.iter().sum();
            raw.iter().map(|x| x / t).collect()
        })
        .collect();
    let reward: Vec<f64> = (0..n * m).map(|_| r.random_range(0.0..1.0)).collect();
    tabular_embed(
        &Kernel::from_rows(n, m, &rows).unwrap(),
        &RewardTable::new(n, m, reward).unwrap(),
        horizon,
        0,
    )
    .unwrap()
}

fn random_policy(n: usize, m: usize, horizon: usize, r: &mut ChaCha8Rng) -> Policy {
    Policy::new(
        (0..horizon)
            .map(|_| (0..n).map(|_| r.random_range(0..m)).collect())
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn values_are_bounded_and_sandwiched(n in 1usize..5, m in 1usize..4, horizon in 1usize..5, seed in any::<u64>()) {
        let mdp = random_mdp(n, m, horizon, seed);
        let best = optimal_values(&mdp);
        let worst = worst_values(&mdp);
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..10 {
            let v = evaluate_policy(&mdp, &random_policy(n, m, horizon, &mut r)).unwrap();
            for h in 1..=horizon {
                for s in 0..n {
                    let cap = (horizon - h + 1) as f64;
                    prop_assert!(worst.get(h, s) <= v.get(h, s) + 1e-12);
                    prop_assert!(v.get(h, s) <= best.get(h, s) + 1e-12);
                    prop_assert!(worst.get(h, s) >= 0.0 && best.get(h, s) <= cap + 1e-12);
                }
            }
        }
        let greedy = evaluate_policy(&mdp, &optimal_policy(&mdp)).unwrap();
        for h in 1..=horizon {
            for s in 0..n {
                prop_assert!((greedy.get(h, s) - best.get(h, s)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn tabular_embedding_reproduces_the_kernel(n in 1usize..5, m in 1usize..4, seed in any::<u64>()) {
        let mdp = random_mdp(n, m, 2, seed);
        for s in 0..n {
            for a in 0..m {
                prop_assert_eq!(mdp.transition_probs(s, a).unwrap(), mdp.kernel().row(s, a));
            }
        }
    }
}

#[test]
fn random_three_by_two_kernel_round_trips() {
    let mdp = random_mdp(3, 2, 3, 99);
    let rows: Vec<Vec<f64>> = (0..6)
        .map(|i| mdp.kernel().row(i / 2, i % 2).to_vec())
        .collect();
    let again =
        tabular_embed(&Kernel::from_rows(3, 2, &rows).unwrap(), mdp.reward(), 3, 0).unwrap();
    for s in 0..3 {
        for a in 0..2 {
            assert_eq!(
                again.transition_probs(s, a).unwrap(),
                rows[s * 2 + a].as_slice()
            );
        }
    }
}

#[test]
fn monte_carlo_rollouts_agree_with_exact_evaluation() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..3 {
        let mdp = random_mdp(3, 2, 3, seed);
        let pi = random_policy(3, 2, 3, &mut r);
        let exact = evaluate_policy(&mdp, &pi).unwrap().get(1, 0);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| rollout_return(&mdp, &pi, &mut r)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "mean {mean}, exact {exact}, se {se}"
        );
    }
}

#[test]
fn single_state_single_action_is_a_self_loop() {
    let mdp = tabular_embed(
        &Kernel::from_rows(1, 1, &[vec![1.0]]).unwrap(),
        &RewardTable::new(1, 1, vec![0.5]).unwrap(),
        4,
        0,
    )
    .unwrap();
    assert_eq!(mdp.dim(), 1);
    assert_eq!(mdp.theta(), &[1.0]);
    assert_eq!(optimal_values(&mdp).get(1, 0), 2.0);
}
