//! Where offline data stop paying off: the coverage knee of the admissible region
//! and the largest tolerable shift above it.
use oorl::diagnostics::{
    admissible_delta, admissible_tau_threshold, informative_check, log_space, BoundInputs,
    InformativeConstants,
};

fn main() {
    let base = BoundInputs {
        d: 5.0,
        horizon: 3.0,
        episodes: 1e3,
        param_bound: 10.0,
        delta_theta: 0.0,
        m_off: 1.5e11,
        tau: 1.0,
    };
    let eps = 1e-3;
    println!(
        "no shift is admissible below tau = {:.3e}",
        admissible_tau_threshold(&base, eps)
    );
    for tau in log_space(1e-8, 1.0, 9) {
        let x = BoundInputs { tau, ..base };
        println!(
            "tau {tau:.1e}: largest admissible delta {:.3e}",
            admissible_delta(&x, eps)
        );
    }
    let r = informative_check(
        &BoundInputs {
            tau: 1e-3,
            delta_theta: 1e-9,
            ..base
        },
        0.1,
        InformativeConstants::default(),
    )
    .expect("valid inputs");
    println!(
        "tau 1e-3, delta 1e-9: coverage ratio {:.3}, shift ratio {:.3}, informative {}",
        r.coverage_ratio, r.shift_ratio, r.informative
    );
}
