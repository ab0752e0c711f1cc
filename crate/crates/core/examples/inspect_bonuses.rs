//! Hooks into planning to watch the two bonus terms of the offline-online learner
//! and how often the offline-informed one is the tighter.
use oorl::agents::{run_agent, AgentConfig, Algorithm, EpisodeHook, EpisodePlan, EstimatorState};
use oorl::envgen::generate_env_pair;
use oorl::offline::{accumulate_offline, generate_offline, AuxDesign, BehaviorPolicy};

#[derive(Default)]
struct BonusLog {
    tighter: usize,
    total: usize,
}

impl EpisodeHook for BonusLog {
    fn on_plan(&mut self, k: usize, _state: &EstimatorState, plan: &mut EpisodePlan) {
        for (used, online) in plan.bonus.iter().zip(&plan.bonus_online) {
            self.total += 1;
            self.tighter += usize::from(used < online);
        }
        if k.is_multiple_of(50) {
            println!(
                "episode {k}: beta {:.1}, gamma {:.1}",
                plan.radii.beta, plan.radii.gamma
            );
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = generate_env_pair(5, 10, 3, 0.05, 1)?;
    let cfg = AgentConfig::for_env(&pair.online, 200)
        .with_bonus_scale(0.07)
        .with_shift_bound(pair.theta_shift_l2());
    let data = generate_offline(&pair.offline, &BehaviorPolicy::UniformRandom, 20_000, 4)?;
    let summary = accumulate_offline(
        pair.offline.phi(),
        &data,
        &AuxDesign::Deterministic,
        cfg.lambda,
        4,
    )?;
    let mut log = BonusLog::default();
    let curve = run_agent(Algorithm::OoUcrlVtr, &pair, &summary, &cfg, 1, &mut log)?;
    println!(
        "offline-informed bonus tighter at {}/{} entries; regret {:.3}",
        log.tighter,
        log.total,
        curve.final_regret()
    );
    Ok(())
}
