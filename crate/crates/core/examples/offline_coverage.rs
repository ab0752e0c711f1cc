//! Coverage τ̂ of one offline dataset under each auxiliary design, the τ-control
//! knob, and the design-based lower bounds.
use oorl::envgen::generate_env_pair;
use oorl::offline::{
    accumulate_offline, coverage_p0_best_stage, generate_offline, learnability_certificate,
    tau_lower_bounds, visitation, AuxDesign, BehaviorPolicy, CoverageInputs,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (s, a, h) = (5, 10, 3);
    let pair = generate_env_pair(s, a, h, 0.05, 1)?;
    let env = &pair.offline;
    let lambda = (h * h * env.dim()) as f64;
    let m_off = 10_000;
    let data = generate_offline(env, &BehaviorPolicy::UniformRandom, m_off, 3)?;

    let designs = [
        ("deterministic", AuxDesign::Deterministic),
        (
            "stochastic",
            AuxDesign::StochasticProbe(AuxDesign::basis_probes(s)),
        ),
        ("constant", AuxDesign::Constant(vec![1.0; s])),
        (
            "deterministic, tau target 0.1",
            AuxDesign::tau_control(AuxDesign::Deterministic, 0.1),
        ),
    ];
    for (name, design) in &designs {
        let summary = accumulate_offline(env.phi(), &data, design, lambda, 3)?;
        println!(
            "{name:<32} tau_hat = {:.4e}  lambda_max(G_off) = {:.1}",
            summary.tau_hat.unwrap(),
            summary.lambda_max_goff
        );
    }

    let vis = visitation(env, &BehaviorPolicy::UniformRandom)?;
    let probes = AuxDesign::basis_probes(s);
    let pairs: Vec<(usize, usize)> = (0..s).flat_map(|x| (0..a).map(move |y| (x, y))).collect();
    let kappa = learnability_certificate(env.phi(), &probes, &pairs)?;
    let bounds = tau_lower_bounds(&CoverageInputs {
        p0: coverage_p0_best_stage(&vis, h - 1),
        kappa,
        probes: probes.len(),
        dim: env.dim(),
        states: s,
        actions: a,
        m_off,
        delta: 0.05,
    });
    println!(
        "kappa = {kappa}, lower bounds: deterministic {:.3e}, stochastic {:.3e}",
        bounds.deterministic, bounds.stochastic
    );
    Ok(())
}
