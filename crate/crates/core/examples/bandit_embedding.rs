//! A three-arm bandit written as a two-stage linear mixture MDP: UCB1 offline
//! data concentrate on the best arm, which leaves the other arms poorly covered.
use oorl::mdp::bandit_embed;
use oorl::offline::{accumulate_offline, generate_offline, AuxDesign, BehaviorPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta = [0.6, 0.4, 0.2];
    let (off, _on) = bandit_embed(&theta, &theta)?;
    for (name, policy) in [
        ("uniform", BehaviorPolicy::UniformRandom),
        (
            "ucb1",
            BehaviorPolicy::Ucb1 {
                exploration_rate: None,
            },
        ),
    ] {
        let data = generate_offline(&off, &policy, 3000, 5)?;
        let mut pulls = [0usize; 3];
        for t in &data.trajectories {
            pulls[t[0].action] += 1;
        }
        let summary = accumulate_offline(off.phi(), &data, &AuxDesign::Deterministic, 1.0, 5)?;
        println!(
            "{name:<8} pulls {pulls:?}  tau_hat = {:.3e}",
            summary.tau_hat.unwrap()
        );
    }
    Ok(())
}
