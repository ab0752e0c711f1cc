//! Order-level regret bound and informativeness conditions.
//!
//! Constants hidden by the asymptotic notation are set to one (or to the
//! caller's calibration), so the outputs are deterministic diagnostics rather
//! than certified bounds.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid bound inputs: {0}")]
pub struct BoundError(pub String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub d: f64,
    pub horizon: f64,
    pub episodes: f64,
    pub param_bound: f64,
    /// Parameter shift Δ ≥ 0.
    pub delta_theta: f64,
    pub m_off: f64,
    pub tau: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<(), BoundError> {
        let positive = [
            ("d", self.d),
            ("H", self.horizon),
            ("K", self.episodes),
            ("B", self.param_bound),
            ("tau", self.tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BoundError(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.delta_theta >= 0.0) || !(self.m_off >= 0.0) {
            return Err(BoundError("Δ and M_off must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// Offline-online term `(BH²d√K + H⁴d^{3/2}Δ√K√(M_off/τ)) · sqrt(ln(1 + H³K/(τM_off)))`.
    pub term_a: f64,
    /// Online-only term `BH²d√K`.
    pub term_b: f64,
    pub bound: f64,
}

/// Both terms of the min-of-two regret bound. Without offline data term (A) is infinite.
pub fn regret_bound_terms(x: &BoundInputs) -> BoundTerms {
    let (h, d, k) = (x.horizon, x.d, x.episodes);
    let term_b = x.param_bound * h * h * d * k.sqrt();
    let term_a = if x.m_off > 0.0 {
        let shift = h.powi(4) * d.powf(1.5) * x.delta_theta * k.sqrt() * (x.m_off / x.tau).sqrt();
        let log = (h.powi(3) * k / (x.tau * x.m_off)).ln_1p();
        (term_b + shift) * log.sqrt()
    } else {
        f64::INFINITY
    };
    BoundTerms {
        term_a,
        term_b,
        bound: term_a.min(term_b),
    }
}

/// Implied constants of the two informativeness conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformativeConstants {
    pub coverage: f64,
    pub shift: f64,
}

impl Default for InformativeConstants {
    fn default() -> Self {
        Self {
            coverage: 1.0,
            shift: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformativeReport {
    /// `τ / (c₁ H³ K^{1+2ε} / M_off)`; the coverage condition holds when ≥ 1.
    pub coverage_ratio: f64,
    /// `(c₂ B / (H^{7/2} d^{1/2} K^{1/2+ε})) / (Δ/τ)`; the shift condition holds when ≥ 1.
    pub shift_ratio: f64,
    pub coverage_ok: bool,
    pub shift_ok: bool,
    pub informative: bool,
}

/// Sufficient conditions `τ ≥ c₁H³K^{1+2ε}/M_off` and `Δ/τ ≤ c₂B/(H^{7/2}d^{1/2}K^{1/2+ε})`.
pub fn informative_check(
    x: &BoundInputs,
    epsilon: f64,
    c: InformativeConstants,
) -> Result<InformativeReport, BoundError> {
    x.validate()?;
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(BoundError(format!(
            "epsilon must lie in (0, 1/2], got {epsilon}"
        )));
    }
    let (h, d, k) = (x.horizon, x.d, x.episodes);
    let coverage_threshold = c.coverage * h.powi(3) * k.powf(1.0 + 2.0 * epsilon) / x.m_off;
    let coverage_ratio = x.tau / coverage_threshold;
    let shift_threshold =
        c.shift * x.param_bound / (h.powf(3.5) * d.sqrt() * k.powf(0.5 + epsilon));
    let shift_ratio = shift_threshold / (x.delta_theta / x.tau);
    let coverage_ok = coverage_ratio >= 1.0;
    let shift_ok = shift_ratio >= 1.0;
    Ok(InformativeReport {
        coverage_ratio,
        shift_ratio,
        coverage_ok,
        shift_ok,
        informative: coverage_ok && shift_ok,
    })
}

/// Whether term (A) alone meets the informative rate `BH²dK^{1/2−ε}`.
pub fn admissible(x: &BoundInputs, epsilon: f64) -> bool {
    let target = x.param_bound * x.horizon * x.horizon * x.d * x.episodes.powf(0.5 - epsilon);
    regret_bound_terms(x).term_a <= target
}

/// Smallest τ at which some Δ ≥ 0 is admissible: with Δ = 0 the condition reads
/// `ln(1 + H³K/(τM_off)) ≤ K^{−2ε}`.
pub fn admissible_tau_threshold(x: &BoundInputs, epsilon: f64) -> f64 {
    let rhs = x.episodes.powf(-2.0 * epsilon).exp_m1();
    x.horizon.powi(3) * x.episodes / (x.m_off * rhs)
}

/// Largest admissible Δ at coverage `tau` (0 when even Δ = 0 fails).
pub fn admissible_delta(x: &BoundInputs, epsilon: f64) -> f64 {
    let (h, d, k) = (x.horizon, x.d, x.episodes);
    let target = x.param_bound * h * h * d * k.powf(0.5 - epsilon);
    let log = (h.powi(3) * k / (x.tau * x.m_off)).ln_1p().sqrt();
    let term_b = x.param_bound * h * h * d * k.sqrt();
    let slope = h.powi(4) * d.powf(1.5) * k.sqrt() * (x.m_off / x.tau).sqrt();
    ((target / log - term_b) / slope).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub tau: f64,
    pub delta: f64,
    pub term_a: f64,
    pub term_b: f64,
    pub informative: bool,
}

/// Evaluates the bound terms and admissibility on every `(τ, Δ)` pair.
pub fn admissible_grid(
    base: &BoundInputs,
    taus: &[f64],
    deltas: &[f64],
    epsilon: f64,
) -> Vec<GridPoint> {
    let mut out = Vec::with_capacity(taus.len() * deltas.len());
    for &tau in taus {
        for &delta in deltas {
            let x = BoundInputs {
                tau,
                delta_theta: delta,
                ..*base
            };
            let t = regret_bound_terms(&x);
            out.push(GridPoint {
                tau,
                delta,
                term_a: t.term_a,
                term_b: t.term_b,
                informative: admissible(&x, epsilon),
            });
        }
    }
    out
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}
