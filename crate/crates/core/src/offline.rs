//! Offline phase: behavior policies, trajectory generation, auxiliary value
//! designs, the offline design `(G_off, w_off)` and coverage diagnostics.

use rand::Rng;
use thiserror::Error;

use crate::linalg::{max_eigenvalue, min_eigenvalue, LinalgError, SymMatrix};
use crate::mdp::{sample_index, FeatureMap, LinearMixtureMdp, MdpError, Policy};
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OfflineError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("UCB1 behavior needs a bandit-embedded environment")]
    Ucb1NeedsBandit,
    #[error("visitation is undefined for the adaptive UCB1 behavior")]
    AdaptiveVisitation,
    #[error("probe {probe} has entry {value} outside [-1, 1]")]
    ProbeOutOfRange { probe: usize, value: f64 },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
}

/// How offline trajectories choose actions.
#[derive(Debug, Clone, PartialEq)]
pub enum BehaviorPolicy {
    UniformRandom,
    FixedTable(Policy),
    /// UCB1 over the first-stage arms of a bandit embedding. `None` uses the rate
    /// `sqrt(2 ln M_off)`.
    Ucb1 {
        exploration_rate: Option<f64>,
    },
}

impl BehaviorPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            BehaviorPolicy::UniformRandom => "uniform",
            BehaviorPolicy::FixedTable(_) => "fixed",
            BehaviorPolicy::Ucb1 { .. } => "ucb1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// `M_off` trajectories of `H` transitions each.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub trajectories: Vec<Vec<Transition>>,
    pub behavior: BehaviorPolicy,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub initial_state: usize,
    pub seed: u64,
}

impl OfflineDataset {
    pub fn m_off(&self) -> usize {
        self.trajectories.len()
    }

    /// Number of visits to each `(s, a)` over all stages, indexed `s·A + a`.
    pub fn pair_counts(&self) -> Vec<u64> {
        let mut counts = vec![0; self.states * self.actions];
        for t in self.trajectories.iter().flatten() {
            counts[t.state * self.actions + t.action] += 1;
        }
        counts
    }
}

struct Ucb1State {
    rate: f64,
    pulls: Vec<u64>,
    sums: Vec<f64>,
}

impl Ucb1State {
    fn choose(&self) -> usize {
        if let Some(a) = self.pulls.iter().position(|&n| n == 0) {
            return a;
        }
        let index = |a: usize| {
            let n = self.pulls[a] as f64;
            self.sums[a] / n + self.rate / n.sqrt()
        };
        (1..self.pulls.len()).fold(0, |best, a| if index(a) > index(best) { a } else { best })
    }
}

/// Simulates `m_off` trajectories of `policy` in `env`.
pub fn generate_offline(
    env: &LinearMixtureMdp,
    policy: &BehaviorPolicy,
    m_off: usize,
    seed: u64,
) -> Result<OfflineDataset, OfflineError> {
    let (n, m, h_max) = (env.num_states(), env.num_actions(), env.horizon());
    let mut rng = stream(seed, Stream::OfflineData);
    let mut ucb = match policy {
        BehaviorPolicy::Ucb1 { exploration_rate } => {
            if !matches!(env.phi(), FeatureMap::BanditThreeState { .. }) {
                return Err(OfflineError::Ucb1NeedsBandit);
            }
            let rate =
                exploration_rate.unwrap_or_else(|| (2.0 * (m_off.max(1) as f64).ln()).sqrt());
            Some(Ucb1State {
                rate,
                pulls: vec![0; m],
                sums: vec![0.0; m],
            })
        }
        BehaviorPolicy::FixedTable(pi) => {
            crate::mdp::evaluate_policy(env, pi)?;
            None
        }
        BehaviorPolicy::UniformRandom => None,
    };
    let mut trajectories = Vec::with_capacity(m_off);
    for _ in 0..m_off {
        let mut traj = Vec::with_capacity(h_max);
        let mut s = env.initial_state();
        let mut arm = None;
        for h in 1..=h_max {
            let a = match (policy, &ucb) {
                (BehaviorPolicy::UniformRandom, _) => rng.random_range(0..m),
                (BehaviorPolicy::FixedTable(pi), _) => pi.action(h, s),
                (_, Some(state)) if h == 1 => {
                    let a = state.choose();
                    arm = Some(a);
                    a
                }
                _ => 0,
            };
            let reward = env.reward().get(s, a);
            let next = sample_index(env.kernel().row(s, a), &mut rng);
            traj.push(Transition {
                state: s,
                action: a,
                reward,
                next_state: next,
            });
            s = next;
        }
        if let (Some(state), Some(a)) = (ucb.as_mut(), arm) {
            state.pulls[a] += 1;
            state.sums[a] += traj.iter().map(|t| t.reward).sum::<f64>();
        }
        trajectories.push(traj);
    }
    Ok(OfflineDataset {
        trajectories,
        behavior: policy.clone(),
        states: n,
        actions: m,
        horizon: h_max,
        initial_state: env.initial_state(),
        seed,
    })
}

/// Exact state-action visitation `d_h(s, a)` of a non-adaptive behavior policy,
/// returned per stage `h = 1..=H` as vectors indexed `s·A + a`.
pub fn visitation(
    env: &LinearMixtureMdp,
    policy: &BehaviorPolicy,
) -> Result<Vec<Vec<f64>>, OfflineError> {
    let (n, m) = (env.num_states(), env.num_actions());
    let mut state_dist = vec![0.0; n];
    state_dist[env.initial_state()] = 1.0;
    let mut out = Vec::with_capacity(env.horizon());
    for h in 1..=env.horizon() {
        let mut d = vec![0.0; n * m];
        for s in 0..n {
            match policy {
                BehaviorPolicy::UniformRandom => {
                    for a in 0..m {
                        d[s * m + a] = state_dist[s] / m as f64;
                    }
                }
                BehaviorPolicy::FixedTable(pi) => d[s * m + pi.action(h, s)] = state_dist[s],
                BehaviorPolicy::Ucb1 { .. } => return Err(OfflineError::AdaptiveVisitation),
            }
        }
        let mut next = vec![0.0; n];
        for s in 0..n {
            for a in 0..m {
                let w = d[s * m + a];
                if w > 0.0 {
                    for (sp, p) in env.kernel().row(s, a).iter().enumerate() {
                        next[sp] += w * p;
                    }
                }
            }
        }
        out.push(d);
        state_dist = next;
    }
    Ok(out)
}

/// `inf_{h,s,a} d_h(s, a)`.
pub fn coverage_p0(visitation: &[Vec<f64>]) -> f64 {
    visitation
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `min_{s,a} max_{h ≤ last_stage} d_h(s, a)`: the per-pair coverage of the best
/// single stage among the first `last_stage` stages.
pub fn coverage_p0_best_stage(visitation: &[Vec<f64>], last_stage: usize) -> f64 {
    let stages = &visitation[..last_stage.min(visitation.len())];
    let width = stages.first().map_or(0, Vec::len);
    (0..width)
        .map(|i| stages.iter().map(|d| d[i]).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// Auxiliary value functions `Ṽ` applied to offline transitions.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxDesign {
    /// Basis vector of the least-selected next state for the visited `(s, a)`.
    Deterministic,
    /// Rademacher combination `(1/L) Σ ξ_l V_l` of fixed probes.
    StochasticProbe(Vec<Vec<f64>>),
    Constant(Vec<f64>),
    /// On visits to `masked_states`, `Ṽ = 0` with probability `1 − tau_target`;
    /// otherwise `inner` applies.
    TauControl {
        inner: Box<AuxDesign>,
        tau_target: f64,
        masked_states: Vec<usize>,
    },
}

impl AuxDesign {
    /// Masks states 0 and 1, leaving `inner` in charge elsewhere.
    pub fn tau_control(inner: AuxDesign, tau_target: f64) -> Self {
        AuxDesign::TauControl {
            inner: Box::new(inner),
            tau_target,
            masked_states: vec![0, 1],
        }
    }

    /// The standard-basis probes `e_0, …, e_{S−1}`.
    pub fn basis_probes(states: usize) -> Vec<Vec<f64>> {
        (0..states)
            .map(|i| {
                (0..states)
                    .map(|j| if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    fn validate(&self, states: usize) -> Result<(), OfflineError> {
        match self {
            AuxDesign::Deterministic => Ok(()),
            AuxDesign::StochasticProbe(probes) => check_probes(probes, states),
            AuxDesign::Constant(v) => {
                if v.len() != states {
                    return Err(OfflineError::InvalidDesign(format!(
                        "constant Ṽ has {} entries, expected {states}",
                        v.len()
                    )));
                }
                Ok(())
            }
            AuxDesign::TauControl {
                inner,
                tau_target,
                masked_states,
            } => {
                if !(0.0..=1.0).contains(tau_target) {
                    return Err(OfflineError::InvalidDesign(format!(
                        "tau_target {tau_target} outside [0, 1]"
                    )));
                }
                if let Some(s) = masked_states.iter().find(|&&s| s >= states) {
                    return Err(OfflineError::InvalidDesign(format!(
                        "masked state {s} out of range"
                    )));
                }
                inner.validate(states)
            }
        }
    }
}

fn check_probes(probes: &[Vec<f64>], states: usize) -> Result<(), OfflineError> {
    if probes.is_empty() {
        return Err(OfflineError::InvalidDesign(
            "stochastic design needs at least one probe".into(),
        ));
    }
    for (l, p) in probes.iter().enumerate() {
        if p.len() != states {
            return Err(OfflineError::InvalidDesign(format!(
                "probe {l} has {} entries, expected {states}",
                p.len()
            )));
        }
        if let Some(&value) = p.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(OfflineError::ProbeOutOfRange { probe: l, value });
        }
    }
    Ok(())
}

/// Running counts `N(x, s, a)` of the deterministic design.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleCounts {
    states: usize,
    actions: usize,
    counts: Vec<u64>,
}

impl TripleCounts {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            counts: vec![0; states * states * actions],
        }
    }

    pub fn get(&self, x: usize, s: usize, a: usize) -> u64 {
        self.counts[(s * self.actions + a) * self.states + x]
    }
}

/// `e_{s'}` with `s' = argmin_x N(x, s, a)` (lowest index on ties); increments `N(s', s, a)`.
pub fn vtilde_deterministic(counts: &mut TripleCounts, s: usize, a: usize) -> Vec<f64> {
    let n = counts.states;
    let block = &mut counts.counts[(s * counts.actions + a) * n..][..n];
    let pick = (1..n).fold(0, |best, x| if block[x] < block[best] { x } else { best });
    block[pick] += 1;
    let mut e = vec![0.0; n];
    e[pick] = 1.0;
    e
}

/// `(1/L) Σ_l ξ_l V_l` with fresh Rademacher signs `ξ_l`.
pub fn vtilde_stochastic<R: Rng + ?Sized>(
    probes: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<f64>, OfflineError> {
    let states = probes.first().map_or(0, Vec::len);
    check_probes(probes, states)?;
    let scale = 1.0 / probes.len() as f64;
    let mut out = vec![0.0; states];
    for p in probes {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for (o, v) in out.iter_mut().zip(p) {
            *o += scale * sign * v;
        }
    }
    Ok(out)
}

struct DesignSampler<'a> {
    design: &'a AuxDesign,
    counts: TripleCounts,
    rng: SimRng,
}

impl DesignSampler<'_> {
    fn next(&mut self, design: &AuxDesign, s: usize, a: usize) -> Result<Vec<f64>, OfflineError> {
        match design {
            AuxDesign::Deterministic => Ok(vtilde_deterministic(&mut self.counts, s, a)),
            AuxDesign::StochasticProbe(probes) => vtilde_stochastic(probes, &mut self.rng),
            AuxDesign::Constant(v) => Ok(v.clone()),
            AuxDesign::TauControl {
                inner,
                tau_target,
                masked_states,
            } => {
                if masked_states.contains(&s) && self.rng.random::<f64>() >= *tau_target {
                    return Ok(vec![0.0; self.counts.states]);
                }
                self.next(inner, s, a)
            }
        }
    }

    fn sample(&mut self, s: usize, a: usize) -> Result<Vec<f64>, OfflineError> {
        self.next(self.design, s, a)
    }
}

/// Offline design `G_off = Σ x xᵀ`, `w_off = Σ x y` and its spectral summary.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSummary {
    pub g_off: SymMatrix,
    pub w_off: Vec<f64>,
    pub lambda: f64,
    pub lambda_max_goff: f64,
    /// `λ_min(λI + G_off)`.
    pub lambda_min_reg: f64,
    /// `λ_min(λI + G_off) / M_off`; `None` without offline data.
    pub tau_hat: Option<f64>,
    pub m_off: usize,
    /// Number of regression pairs behind `G_off` (`M_off · H`).
    pub n_pairs: u64,
}

impl OfflineSummary {
    /// Summary of an empty dataset.
    pub fn empty(dim: usize, lambda: f64) -> Self {
        Self {
            g_off: SymMatrix::zeros(dim),
            w_off: vec![0.0; dim],
            lambda,
            lambda_max_goff: 0.0,
            lambda_min_reg: lambda,
            tau_hat: None,
            m_off: 0,
            n_pairs: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_off.len()
    }
}

/// Forms `x = φ(·|s,a) Ṽ_{m,h+1}`, `y = Ṽ_{m,h+1}(s')` for every offline step and
/// sums them into the offline design. `Ṽ_{m,H+1} = 0`.
pub fn accumulate_offline(
    phi: &FeatureMap,
    dataset: &OfflineDataset,
    design: &AuxDesign,
    lambda: f64,
    seed: u64,
) -> Result<OfflineSummary, OfflineError> {
    if !(lambda > 0.0) {
        return Err(LinalgError::NonPositiveRegularizer(lambda).into());
    }
    let n = phi.num_states();
    if dataset.states != n || dataset.actions != phi.num_actions() {
        return Err(MdpError::DimensionMismatch {
            what: "dataset state-action space",
            expected: n * phi.num_actions(),
            actual: dataset.states * dataset.actions,
        }
        .into());
    }
    design.validate(n)?;
    let dim = phi.dim();
    if dataset.m_off() == 0 {
        return Ok(OfflineSummary::empty(dim, lambda));
    }
    let mut sampler = DesignSampler {
        design,
        counts: TripleCounts::new(n, phi.num_actions()),
        rng: stream(seed, Stream::AuxDesign),
    };
    let mut g_off = SymMatrix::zeros(dim);
    let mut w_off = vec![0.0; dim];
    let mut n_pairs = 0u64;
    for traj in &dataset.trajectories {
        for (h, t) in traj.iter().enumerate() {
            n_pairs += 1;
            if h + 1 == dataset.horizon {
                continue;
            }
            let v = sampler.sample(t.state, t.action)?;
            let x = phi.feature_vector(t.state, t.action, &v)?;
            let y = v[t.next_state];
            g_off.add_outer(&x, 1.0)?;
            for (w, xi) in w_off.iter_mut().zip(&x) {
                *w += xi * y;
            }
        }
    }
    let lambda_max_goff = max_eigenvalue(&g_off)?;
    let mut reg = g_off.clone();
    reg.add_scaled_identity(lambda);
    let lambda_min_reg = min_eigenvalue(&reg)?;
    let m_off = dataset.m_off();
    Ok(OfflineSummary {
        g_off,
        w_off,
        lambda,
        lambda_max_goff,
        lambda_min_reg,
        tau_hat: Some(lambda_min_reg / m_off as f64),
        m_off,
        n_pairs,
    })
}

/// `κ = λ_min(Σ_{i,l} (φ(·|s_i,a_i) V_l)(φ(·|s_i,a_i) V_l)ᵀ)`.
pub fn learnability_certificate(
    phi: &FeatureMap,
    probes: &[Vec<f64>],
    pairs: &[(usize, usize)],
) -> Result<f64, OfflineError> {
    check_probes(probes, phi.num_states())?;
    let mut sum = SymMatrix::zeros(phi.dim());
    for &(s, a) in pairs {
        for v in probes {
            sum.add_outer(&phi.feature_vector(s, a, v)?, 1.0)?;
        }
    }
    Ok(min_eigenvalue(&sum)?.max(0.0))
}

/// Lower bounds on the effective coverage under the stochastic and deterministic
/// designs. Negative values are reported as 0 with the matching flag set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauBounds {
    pub stochastic: f64,
    pub deterministic: f64,
    pub stochastic_clamped: bool,
    pub deterministic_clamped: bool,
}

/// Coverage inputs of [`tau_lower_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageInputs {
    pub p0: f64,
    pub kappa: f64,
    pub probes: usize,
    pub dim: usize,
    pub states: usize,
    pub actions: usize,
    pub m_off: usize,
    pub delta: f64,
}

/// `p₀κ/L² − sqrt(2dp₀κ/(L²M_off) · ln(d/δ))` and `p₀/S − (1/S) sqrt(ln(SA/δ)/(2M_off))`.
pub fn tau_lower_bounds(c: &CoverageInputs) -> TauBounds {
    let l2 = (c.probes * c.probes) as f64;
    let m = c.m_off as f64;
    let d = c.dim as f64;
    let s = c.states as f64;
    let base = c.p0 * c.kappa / l2;
    let stochastic = base - (2.0 * d * base / m * (d / c.delta).ln()).sqrt();
    let deterministic = c.p0 / s - ((s * c.actions as f64 / c.delta).ln() / (2.0 * m)).sqrt() / s;
    TauBounds {
        stochastic: stochastic.max(0.0),
        deterministic: deterministic.max(0.0),
        stochastic_clamped: !(stochastic > 0.0),
        deterministic_clamped: !(deterministic > 0.0),
    }
}
