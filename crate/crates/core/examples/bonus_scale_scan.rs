//! Tuning regret of UCRL and COMPLETE across the default bonus-scale grid, and
//! the scales the harness picks from it.
use oorl::agents::{AgentConfig, Algorithm};
use oorl::envgen::generate_env_pair;
use oorl::harness::{
    default_bonus_grid, select_bonus_scales, tuning_regret, tuning_seeds, ExperimentSpec, SweepAxis,
};
use oorl::offline::{
    accumulate_offline, generate_offline, AuxDesign, BehaviorPolicy, OfflineSummary,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ExperimentSpec {
        episodes: 300,
        ..ExperimentSpec::standard(SweepAxis::None)
    };
    let pair = generate_env_pair(
        spec.env.states,
        spec.env.actions,
        spec.env.horizon,
        0.0,
        spec.env.env_seed,
    )?;
    let lambda = AgentConfig::for_env(&pair.online, spec.episodes).lambda;
    let empty = OfflineSummary::empty(pair.online.dim(), lambda);
    let data = generate_offline(&pair.offline, &BehaviorPolicy::UniformRandom, spec.m_off, 1)?;
    let summary = accumulate_offline(
        pair.offline.phi(),
        &data,
        &AuxDesign::Deterministic,
        lambda,
        1,
    )?;
    let seeds = tuning_seeds(spec.base_seed, 2);

    println!("{:>6} {:>10} {:>10}", "b_s", "ucrl", "complete");
    for b_s in default_bonus_grid() {
        let u = tuning_regret(Algorithm::Ucrl, &pair, &empty, spec.episodes, b_s, &seeds)?;
        let c = tuning_regret(
            Algorithm::Complete,
            &pair,
            &summary,
            spec.episodes,
            b_s,
            &seeds,
        )?;
        println!("{b_s:>6} {u:>10.2} {c:>10.2}");
    }
    let picked = select_bonus_scales(&spec)?;
    println!(
        "selected: UCRL/O-O {}, COMPLETE {}",
        picked.shared, picked.complete
    );
    Ok(())
}
