//! The three learners on one environment pair, at a small and a large shift.
use oorl::agents::{run_complete, run_oo_ucrl_vtr, run_ucrl, AgentConfig};
use oorl::envgen::generate_env_pair;
use oorl::offline::{accumulate_offline, generate_offline, AuxDesign, BehaviorPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes = 300;
    for delta in [0.0, 1.0] {
        let pair = generate_env_pair(5, 10, 3, delta, 1)?;
        let cfg = AgentConfig::for_env(&pair.online, episodes)
            .with_bonus_scale(0.07)
            .with_shift_bound(pair.theta_shift_l2());
        let data = generate_offline(&pair.offline, &BehaviorPolicy::UniformRandom, 20_000, 2)?;
        let summary = accumulate_offline(
            pair.offline.phi(),
            &data,
            &AuxDesign::Deterministic,
            cfg.lambda,
            2,
        )?;
        let oo = run_oo_ucrl_vtr(&pair, &summary, &cfg, 9)?;
        let ucrl = run_ucrl(&pair, &cfg, 9)?;
        let complete = run_complete(&pair, &summary, &cfg, 9)?;
        println!(
            "delta = {delta}: regret after {episodes} episodes  O-O {:.2}  UCRL {:.2}  COMPLETE {:.2}",
            oo.final_regret(),
            ucrl.final_regret(),
            complete.final_regret()
        );
    }
    Ok(())
}
