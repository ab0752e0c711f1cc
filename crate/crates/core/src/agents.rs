//! Optimistic value-targeted regression agents.
//!
//! All three agents plan with the closed-form optimistic values
//! `Q̂ = r + mean(x) + b_s · bonus(x)`, `x = φ(·|s,a) V̂_{h+1}`, clipped to
//! `[0, H − h + 1]`, and act greedily (lowest action index on ties).
//!
//! | agent        | mean          | bonus                                          | updates        |
//! |--------------|---------------|------------------------------------------------|----------------|
//! | O-O UCRL-VTR | `xᵀθ̂_on`     | `min(β‖x‖_{M_on⁻¹}, γ‖x‖_{M_all⁻¹})`            | `M_on`, `M_all`|
//! | UCRL         | `xᵀθ̂_on`     | `β‖x‖_{M_on⁻¹}`                                | `M_on`         |
//! | COMPLETE     | `xᵀθ̂_all`    | `β_all‖x‖_{M_all⁻¹}`                           | `M_all`        |
//!
//! `M_all` starts at `λI + G_off` with response `w_off`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::envgen::EnvPair;
use crate::linalg::{dot, DesignAccumulator, LinalgError, NumericSettings};
use crate::mdp::{
    evaluate_policy, optimal_values, sample_index, LinearMixtureMdp, MdpError, Policy, ValueTable,
};
use crate::offline::OfflineSummary;
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    OoUcrlVtr,
    Ucrl,
    Complete,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::OoUcrlVtr, Algorithm::Ucrl, Algorithm::Complete];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::OoUcrlVtr => "oo_ucrl_vtr",
            Algorithm::Ucrl => "ucrl",
            Algorithm::Complete => "complete",
        }
    }

    pub fn uses_offline_data(self) -> bool {
        self != Algorithm::Ucrl
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| {
                format!("unknown algorithm `{s}` (expected oo_ucrl_vtr, ucrl or complete)")
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub horizon: usize,
    /// Ridge coefficient λ.
    pub lambda: f64,
    /// Known bound `B ≥ ‖θ*‖₂`.
    pub param_bound: f64,
    /// Known bound on `‖θ* − θ^off,*‖₂`.
    pub shift_bound: f64,
    pub episodes: usize,
    /// Bonus scale `b_s ∈ [0, 1]`.
    pub bonus_scale: f64,
    /// Failure level δ inside the radii; `1/(2K)` by default.
    pub confidence_delta: f64,
    /// Also record realized-return regret.
    pub realized_regret: bool,
    pub numerics: NumericSettings,
}

impl AgentConfig {
    /// Defaults for `env`: `λ = H²d`, `B` from the model, no shift, `b_s = 1`, `δ = 1/(2K)`.
    pub fn for_env(env: &LinearMixtureMdp, episodes: usize) -> Self {
        let h = env.horizon() as f64;
        Self {
            horizon: env.horizon(),
            lambda: h * h * env.dim() as f64,
            param_bound: env.param_bound(),
            shift_bound: 0.0,
            episodes,
            bonus_scale: 1.0,
            confidence_delta: 1.0 / (2.0 * episodes.max(1) as f64),
            realized_regret: false,
            numerics: NumericSettings::default(),
        }
    }

    pub fn with_shift_bound(mut self, delta: f64) -> Self {
        self.shift_bound = delta;
        self
    }

    pub fn with_bonus_scale(mut self, b_s: f64) -> Self {
        self.bonus_scale = b_s;
        self
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::Config(m));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.bonus_scale) {
            return bad(format!(
                "bonus scale must lie in [0, 1], got {}",
                self.bonus_scale
            ));
        }
        if !(self.param_bound > 0.0) {
            return bad(format!(
                "parameter bound must be positive, got {}",
                self.param_bound
            ));
        }
        if !(self.shift_bound >= 0.0 && self.shift_bound.is_finite()) {
            return bad(format!(
                "shift bound must be finite and non-negative, got {}",
                self.shift_bound
            ));
        }
        if !(self.confidence_delta > 0.0 && self.confidence_delta < 1.0) {
            return bad(format!(
                "confidence level must lie in (0, 1), got {}",
                self.confidence_delta
            ));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        Ok(())
    }
}

/// Paired ridge designs: `on` holds online data only, `all` is seeded with the
/// offline design.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub on: DesignAccumulator,
    pub all: DesignAccumulator,
    /// `λ_max(G_off)`.
    pub lambda_max_goff: f64,
    /// `λ_min(λI + G_off)`.
    pub lambda_min_reg: f64,
    /// Episodes completed so far.
    pub episode: usize,
}

impl EstimatorState {
    pub fn new(summary: &OfflineSummary, cfg: &AgentConfig) -> Result<Self, AgentError> {
        if summary.lambda != cfg.lambda {
            return Err(AgentError::Config(format!(
                "offline summary was built with lambda {} but the agent uses {}",
                summary.lambda, cfg.lambda
            )));
        }
        let dim = summary.dim();
        let on = DesignAccumulator::new(dim, cfg.lambda)?.with_settings(&cfg.numerics);
        let all = DesignAccumulator::with_prior(
            cfg.lambda,
            &summary.g_off,
            &summary.w_off,
            summary.n_pairs,
        )?
        .with_settings(&cfg.numerics);
        Ok(Self {
            on,
            all,
            lambda_max_goff: summary.lambda_max_goff,
            lambda_min_reg: summary.lambda_min_reg,
            episode: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii {
    /// Online-only radius β_k (log-determinant of `M_on`).
    pub beta: f64,
    /// Offline-online radius γ_k (log-determinant of `M_all` plus the shift term).
    pub gamma: f64,
    /// β formula evaluated on `M_all`, the single radius of COMPLETE.
    pub beta_all: f64,
}

fn self_normalized_radius(horizon: usize, log_det_ratio: f64, delta: f64) -> f64 {
    // ln(det(M)^{1/2} / (det(λI)^{1/2} δ))
    let log_term = 0.5 * log_det_ratio - delta.ln();
    horizon as f64 * (2.0 * log_term).sqrt()
}

/// `β_k = H sqrt(2 ln(det(M_on)^{1/2} / (det(λI)^{1/2} δ))) + √λ B` and
/// `γ_k = H sqrt(2 ln(det(M_all)^{1/2} / (det(λI)^{1/2} δ))) + Δ λ_max(G_off)/sqrt(λ_min(λI + G_off)) + √λ B`.
pub fn radii(state: &EstimatorState, cfg: &AgentConfig) -> Radii {
    let prior = cfg.lambda.sqrt() * cfg.param_bound;
    let on = self_normalized_radius(cfg.horizon, state.on.log_det_ratio(), cfg.confidence_delta);
    let all = self_normalized_radius(cfg.horizon, state.all.log_det_ratio(), cfg.confidence_delta);
    let shift = cfg.shift_bound * state.lambda_max_goff / state.lambda_min_reg.sqrt();
    Radii {
        beta: on + prior,
        gamma: all + shift + prior,
        beta_all: all + prior,
    }
}

/// One optimistic action value with its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValue {
    pub q: f64,
    pub mean: f64,
    /// Bonus actually used (before scaling by `b_s`).
    pub bonus: f64,
    /// `β‖x‖_{M_on⁻¹}`, the online-only bonus.
    pub bonus_online: f64,
}

/// Estimates fixed for the duration of one plan.
pub struct PlanningContext<'a> {
    pub algorithm: Algorithm,
    pub state: &'a EstimatorState,
    pub radii: Radii,
    pub theta_on: Vec<f64>,
    pub theta_all: Vec<f64>,
}

impl<'a> PlanningContext<'a> {
    pub fn new(algorithm: Algorithm, state: &'a EstimatorState, cfg: &AgentConfig) -> Self {
        let theta_on = if algorithm == Algorithm::Complete {
            Vec::new()
        } else {
            state.on.ridge_solve()
        };
        let theta_all = if algorithm == Algorithm::Ucrl {
            Vec::new()
        } else {
            state.all.ridge_solve()
        };
        Self {
            algorithm,
            state,
            radii: radii(state, cfg),
            theta_on,
            theta_all,
        }
    }
}

/// Optimistic `Q̂_h(s, a)` given `V̂_{h+1}`, clipped to `[0, H − h + 1]`.
pub fn qhat(
    env: &LinearMixtureMdp,
    ctx: &PlanningContext<'_>,
    cfg: &AgentConfig,
    h: usize,
    s: usize,
    a: usize,
    v_next: &[f64],
) -> Result<QValue, AgentError> {
    let x = env.phi().feature_vector(s, a, v_next)?;
    let tol = cfg.numerics.neg_quad_tol;
    let r = ctx.radii;
    let (mean, bonus, bonus_online) = match ctx.algorithm {
        Algorithm::OoUcrlVtr => {
            let online = r.beta * ctx.state.on.weighted_norm_with_tol(&x, tol)?;
            let merged = r.gamma * ctx.state.all.weighted_norm_with_tol(&x, tol)?;
            (dot(&x, &ctx.theta_on), online.min(merged), online)
        }
        Algorithm::Ucrl => {
            let online = r.beta * ctx.state.on.weighted_norm_with_tol(&x, tol)?;
            (dot(&x, &ctx.theta_on), online, online)
        }
        Algorithm::Complete => {
            let merged = r.beta_all * ctx.state.all.weighted_norm_with_tol(&x, tol)?;
            (dot(&x, &ctx.theta_all), merged, f64::NAN)
        }
    };
    let cap = (cfg.horizon - h + 1) as f64;
    let q = (env.reward().get(s, a) + mean + cfg.bonus_scale * bonus).clamp(0.0, cap);
    Ok(QValue {
        q,
        mean,
        bonus,
        bonus_online,
    })
}

/// Optimistic values, greedy policy and per-`(h, s, a)` bonus record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodePlan {
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    /// `Q̂_h(s, a)` at `((h − 1)·S + s)·A + a`.
    pub q: Vec<f64>,
    /// Unscaled bonus used, same layout as `q`.
    pub bonus: Vec<f64>,
    /// Unscaled online-only bonus `β‖x‖_{M_on⁻¹}` (NaN for COMPLETE), same layout.
    pub bonus_online: Vec<f64>,
    pub values: ValueTable,
    pub policy: Policy,
    pub radii: Radii,
}

impl EpisodePlan {
    pub fn q_at(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[((h - 1) * self.states + s) * self.actions + a]
    }
}

/// Backward induction `h = H, …, 1` with [`qhat`].
pub fn plan_episode(
    env: &LinearMixtureMdp,
    algorithm: Algorithm,
    state: &EstimatorState,
    cfg: &AgentConfig,
) -> Result<EpisodePlan, AgentError> {
    let (h_max, n, m) = (env.horizon(), env.num_states(), env.num_actions());
    let ctx = PlanningContext::new(algorithm, state, cfg);
    let mut values = ValueTable::zeros(h_max, n);
    let mut policy = Policy::constant(h_max, n, 0);
    let len = h_max * n * m;
    let (mut q, mut bonus, mut bonus_online) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for h in (1..=h_max).rev() {
        let v_next = values.stage(h + 1).to_vec();
        for s in 0..n {
            let mut best = (0, f64::NEG_INFINITY);
            for a in 0..m {
                let qv = qhat(env, &ctx, cfg, h, s, a, &v_next)?;
                let idx = ((h - 1) * n + s) * m + a;
                q[idx] = qv.q;
                bonus[idx] = qv.bonus;
                bonus_online[idx] = qv.bonus_online;
                if qv.q > best.1 {
                    best = (a, qv.q);
                }
            }
            values.stage_mut(h)[s] = best.1;
            policy.set(h, s, best.0);
        }
    }
    Ok(EpisodePlan {
        horizon: h_max,
        states: n,
        actions: m,
        q,
        bonus,
        bonus_online,
        values,
        policy,
        radii: ctx.radii,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub x: Vec<f64>,
    pub y: f64,
}

/// Executes the plan's policy in `env`, forms `x = φ(·|s,a) V̂_{h+1}`,
/// `y = V̂_{h+1}(s')` at every step and feeds them to the accumulators the
/// algorithm maintains.
pub fn run_episode(
    env: &LinearMixtureMdp,
    algorithm: Algorithm,
    plan: &EpisodePlan,
    state: &mut EstimatorState,
    rng: &mut SimRng,
) -> Result<Vec<Step>, AgentError> {
    let mut s = env.initial_state();
    let mut steps = Vec::with_capacity(env.horizon());
    for h in 1..=env.horizon() {
        let a = plan.policy.action(h, s);
        let next = sample_index(env.transition_probs(s, a)?, rng);
        let v_next = plan.values.stage(h + 1);
        let x = env.phi().feature_vector(s, a, v_next)?;
        let y = v_next[next];
        match algorithm {
            Algorithm::OoUcrlVtr => {
                state.on.rank1_update(&x, y)?;
                state.all.rank1_update(&x, y)?;
            }
            Algorithm::Ucrl => state.on.rank1_update(&x, y)?,
            Algorithm::Complete => state.all.rank1_update(&x, y)?,
        }
        steps.push(Step {
            state: s,
            action: a,
            reward: env.reward().get(s, a),
            next_state: next,
            x,
            y,
        });
        s = next;
    }
    state.episode += 1;
    Ok(steps)
}

/// Per-episode and cumulative regret of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// `V*₁(s₁) − V^{π_k}₁(s₁)` per episode.
    pub per_episode: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Cumulative `V*₁(s₁) − Σ_h r_h` when realized regret is requested.
    pub realized_cumulative: Option<Vec<f64>>,
}

impl RegretCurve {
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Observes (and may override) each plan before it is executed.
pub trait EpisodeHook {
    fn on_plan(&mut self, _k: usize, _state: &EstimatorState, _plan: &mut EpisodePlan) {}
}

/// Hook that does nothing.
pub struct NoHook;

impl EpisodeHook for NoHook {}

/// Runs `cfg.episodes` episodes of `algorithm` on the online MDP of `pair`.
pub fn run_agent(
    algorithm: Algorithm,
    pair: &EnvPair,
    summary: &OfflineSummary,
    cfg: &AgentConfig,
    seed: u64,
    hook: &mut dyn EpisodeHook,
) -> Result<RegretCurve, AgentError> {
    cfg.validate()?;
    let env = &pair.online;
    if summary.dim() != env.dim() {
        return Err(AgentError::Config(format!(
            "offline summary has dimension {}, model has {}",
            summary.dim(),
            env.dim()
        )));
    }
    if cfg.horizon != env.horizon() {
        return Err(AgentError::Config(format!(
            "config horizon {} differs from the model's {}",
            cfg.horizon,
            env.horizon()
        )));
    }
    let empty;
    let summary = if algorithm.uses_offline_data() {
        summary
    } else {
        empty = OfflineSummary::empty(env.dim(), cfg.lambda);
        &empty
    };
    let mut state = EstimatorState::new(summary, cfg)?;
    let v_star = optimal_values(env).get(1, env.initial_state());
    let mut rng = stream(seed, Stream::Online);
    let mut per_episode = Vec::with_capacity(cfg.episodes);
    let mut cumulative = Vec::with_capacity(cfg.episodes);
    let mut realized = cfg
        .realized_regret
        .then(|| Vec::with_capacity(cfg.episodes));
    let (mut total, mut total_realized) = (0.0, 0.0);
    for k in 1..=cfg.episodes {
        let mut plan = plan_episode(env, algorithm, &state, cfg)?;
        hook.on_plan(k, &state, &mut plan);
        let v_pi = evaluate_policy(env, &plan.policy)?.get(1, env.initial_state());
        let steps = run_episode(env, algorithm, &plan, &mut state, &mut rng)?;
        // exact arithmetic can leave V^π a hair above V*
        let gap = (v_star - v_pi).max(0.0);
        total += gap;
        per_episode.push(gap);
        cumulative.push(total);
        if let Some(r) = realized.as_mut() {
            total_realized += v_star - steps.iter().map(|s| s.reward).sum::<f64>();
            r.push(total_realized);
        }
    }
    Ok(RegretCurve {
        algorithm,
        seed,
        per_episode,
        cumulative,
        realized_cumulative: realized,
    })
}

/// O-O UCRL-VTR with the offline design in `summary`.
pub fn run_oo_ucrl_vtr(
    pair: &EnvPair,
    summary: &OfflineSummary,
    cfg: &AgentConfig,
    seed: u64,
) -> Result<RegretCurve, AgentError> {
    run_agent(Algorithm::OoUcrlVtr, pair, summary, cfg, seed, &mut NoHook)
}

/// Online-only UCRL-VTR.
pub fn run_ucrl(pair: &EnvPair, cfg: &AgentConfig, seed: u64) -> Result<RegretCurve, AgentError> {
    let empty = OfflineSummary::empty(pair.online.dim(), cfg.lambda);
    run_agent(Algorithm::Ucrl, pair, &empty, cfg, seed, &mut NoHook)
}

/// COMPLETE: offline and online data merged into one confidence set.
pub fn run_complete(
    pair: &EnvPair,
    summary: &OfflineSummary,
    cfg: &AgentConfig,
    seed: u64,
) -> Result<RegretCurve, AgentError> {
    run_agent(Algorithm::Complete, pair, summary, cfg, seed, &mut NoHook)
}
