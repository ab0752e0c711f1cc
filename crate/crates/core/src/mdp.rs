//! Linear mixture MDPs, their tabular and bandit embeddings, and exact
//! finite-horizon dynamic programming.
//!
//! A linear mixture MDP has transitions `P(s' | s, a) = ⟨θ, φ(s' | s, a)⟩` for a
//! known feature map `φ` and parameter `θ`. Stages are numbered `1..=H`; value
//! tables carry an extra terminal stage `H + 1` that is identically zero.

use rand::Rng;
use thiserror::Error;

use crate::linalg::dot;

/// Entries of a contracted distribution may dip this far below zero.
pub const NEG_PROB_TOL: f64 = 1e-10;
/// Allowed deviation of a row sum from one.
pub const ROW_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("{what} index {index} out of range (< {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("transition row (s={state}, a={action}) is not a distribution: {detail}")]
    InvalidDistribution {
        state: usize,
        action: usize,
        detail: String,
    },

    #[error("reward r({state}, {action}) = {value} is outside [0, 1]")]
    RewardOutOfRange {
        state: usize,
        action: usize,
        value: f64,
    },

    #[error("parameter norm {norm} exceeds the bound {bound}")]
    ParamBoundExceeded { norm: f64, bound: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("feature column {column} at (s={state}, a={action}) has absolute mass {mass} > 1")]
    FeatureMassExceeded {
        column: usize,
        state: usize,
        action: usize,
        mass: f64,
    },

    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Known feature map `φ(· | s, a) ∈ R^{d × |S|}`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    /// One-hot encoding of `(s', s, a)`; `d = S²A`. Coordinate `(s·A + a)·S + s'`.
    TabularOneHot { states: usize, actions: usize },
    /// Three-state, two-stage embedding of a linear bandit whose arms are points of
    /// the probability simplex in `R^{d_B}`. States: 0 = start, 1 = rewarding,
    /// 2 = non-rewarding; `d = 3·d_B`, coordinate `3·i + s'`.
    BanditThreeState { arms: Vec<Vec<f64>> },
    /// Arbitrary table, `table[((s·A + a)·S + s')·d + j] = φ_j(s' | s, a)`.
    Explicit {
        states: usize,
        actions: usize,
        dim: usize,
        table: Vec<f64>,
    },
}

impl FeatureMap {
    pub fn tabular(states: usize, actions: usize) -> Self {
        FeatureMap::TabularOneHot { states, actions }
    }

    /// Bandit embedding with `d_B` standard-basis arms.
    pub fn bandit_basis(arm_dim: usize) -> Self {
        let arms = (0..arm_dim)
            .map(|i| {
                (0..arm_dim)
                    .map(|j| if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        FeatureMap::BanditThreeState { arms }
    }

    /// Explicit feature table; checks `Σ_{s'} |φ_j(s' | s, a)| ≤ 1`.
    pub fn explicit(
        states: usize,
        actions: usize,
        dim: usize,
        table: Vec<f64>,
    ) -> Result<Self, MdpError> {
        let expected = states * actions * states * dim;
        if table.len() != expected {
            return Err(MdpError::DimensionMismatch {
                what: "feature table",
                expected,
                actual: table.len(),
            });
        }
        let phi = FeatureMap::Explicit {
            states,
            actions,
            dim,
            table,
        };
        phi.check_column_mass()?;
        Ok(phi)
    }

    pub fn num_states(&self) -> usize {
        match self {
            FeatureMap::TabularOneHot { states, .. } => *states,
            FeatureMap::BanditThreeState { .. } => 3,
            FeatureMap::Explicit { states, .. } => *states,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            FeatureMap::TabularOneHot { actions, .. } => *actions,
            FeatureMap::BanditThreeState { arms } => arms.len(),
            FeatureMap::Explicit { actions, .. } => *actions,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::TabularOneHot { states, actions } => states * states * actions,
            FeatureMap::BanditThreeState { arms } => 3 * arms.first().map_or(0, Vec::len),
            FeatureMap::Explicit { dim, .. } => *dim,
        }
    }

    pub fn is_tabular(&self) -> bool {
        matches!(self, FeatureMap::TabularOneHot { .. })
    }

    fn check_sa(&self, s: usize, a: usize) -> Result<(), MdpError> {
        if s >= self.num_states() {
            return Err(MdpError::IndexOutOfRange {
                what: "state",
                index: s,
                bound: self.num_states(),
            });
        }
        if a >= self.num_actions() {
            return Err(MdpError::IndexOutOfRange {
                what: "action",
                index: a,
                bound: self.num_actions(),
            });
        }
        Ok(())
    }

    /// `φ(· | s, a) · v`, the d-vector whose inner product with `θ` is `E[v(s')]`.
    pub fn feature_vector(&self, s: usize, a: usize, v: &[f64]) -> Result<Vec<f64>, MdpError> {
        self.check_sa(s, a)?;
        let n = self.num_states();
        if v.len() != n {
            return Err(MdpError::DimensionMismatch {
                what: "value vector",
                expected: n,
                actual: v.len(),
            });
        }
        let mut x = vec![0.0; self.dim()];
        match self {
            FeatureMap::TabularOneHot { actions, .. } => {
                let base = (s * actions + a) * n;
                x[base..base + n].copy_from_slice(v);
            }
            FeatureMap::BanditThreeState { arms } => {
                if s == 0 {
                    for (i, &ai) in arms[a].iter().enumerate() {
                        for sp in 0..3 {
                            x[3 * i + sp] = ai * v[sp];
                        }
                    }
                } else {
                    // φ(s | s, a) = e_{(0,0)} + e_{(0,1)} + e_{(0,2)}: a self-loop
                    for sp in 0..3 {
                        x[sp] = v[s];
                    }
                }
            }
            FeatureMap::Explicit {
                actions,
                dim,
                table,
                ..
            } => {
                for (sp, &vs) in v.iter().enumerate() {
                    if vs == 0.0 {
                        continue;
                    }
                    let off = ((s * actions + a) * n + sp) * dim;
                    for j in 0..*dim {
                        x[j] += table[off + j] * vs;
                    }
                }
            }
        }
        Ok(x)
    }

    /// Column `φ_j(· | s, a)` over next states.
    pub fn column(&self, j: usize, s: usize, a: usize) -> Result<Vec<f64>, MdpError> {
        self.check_sa(s, a)?;
        if j >= self.dim() {
            return Err(MdpError::IndexOutOfRange {
                what: "feature",
                index: j,
                bound: self.dim(),
            });
        }
        let n = self.num_states();
        // φ_j(s' | s, a) = (φ(· | s, a) e_{s'})_j
        let mut col = vec![0.0; n];
        let mut e = vec![0.0; n];
        for sp in 0..n {
            e[sp] = 1.0;
            col[sp] = self.feature_vector(s, a, &e)?[j];
            e[sp] = 0.0;
        }
        Ok(col)
    }

    /// `⟨θ, φ(· | s, a)⟩` as a raw (unvalidated) vector over next states.
    pub fn contract(&self, theta: &[f64], s: usize, a: usize) -> Result<Vec<f64>, MdpError> {
        if theta.len() != self.dim() {
            return Err(MdpError::DimensionMismatch {
                what: "theta",
                expected: self.dim(),
                actual: theta.len(),
            });
        }
        self.check_sa(s, a)?;
        let n = self.num_states();
        let mut e = vec![0.0; n];
        let mut out = vec![0.0; n];
        for sp in 0..n {
            e[sp] = 1.0;
            out[sp] = dot(theta, &self.feature_vector(s, a, &e)?);
            e[sp] = 0.0;
        }
        Ok(out)
    }

    fn check_column_mass(&self) -> Result<(), MdpError> {
        for s in 0..self.num_states() {
            for a in 0..self.num_actions() {
                for j in 0..self.dim() {
                    let mass: f64 = self.column(j, s, a)?.iter().map(|v| v.abs()).sum();
                    if mass > 1.0 + 1e-12 {
                        return Err(MdpError::FeatureMassExceeded {
                            column: j,
                            state: s,
                            action: a,
                            mass,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Validates a contracted transition row. Rows with entries in `[-1e-10, 0)` are
/// clamped and renormalized; untouched rows are returned bit for bit.
pub fn validate_distribution(raw: Vec<f64>, s: usize, a: usize) -> Result<Vec<f64>, MdpError> {
    let bad = |detail: String| MdpError::InvalidDistribution {
        state: s,
        action: a,
        detail,
    };
    if let Some(v) = raw.iter().find(|v| !v.is_finite() || **v < -NEG_PROB_TOL) {
        return Err(bad(format!("entry {v} below zero")));
    }
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(bad(format!("row sums to {sum}")));
    }
    if raw.iter().any(|v| *v < 0.0) {
        let clamped: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        return Ok(clamped.into_iter().map(|v| v / total).collect());
    }
    Ok(raw)
}

/// Tabular transition kernel, row `(s, a)` stored at `(s·A + a)·S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    states: usize,
    actions: usize,
    probs: Vec<f64>,
}

impl Kernel {
    pub fn new(states: usize, actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if states == 0 || actions == 0 {
            return Err(MdpError::Invalid(
                "kernel needs at least one state and action".into(),
            ));
        }
        let expected = states * states * actions;
        if probs.len() != expected {
            return Err(MdpError::DimensionMismatch {
                what: "kernel",
                expected,
                actual: probs.len(),
            });
        }
        for s in 0..states {
            for a in 0..actions {
                let row = &probs[(s * actions + a) * states..][..states];
                if row.iter().any(|p| !(*p >= 0.0)) {
                    return Err(MdpError::InvalidDistribution {
                        state: s,
                        action: a,
                        detail: "negative entry".into(),
                    });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(MdpError::InvalidDistribution {
                        state: s,
                        action: a,
                        detail: format!("row sums to {sum}"),
                    });
                }
            }
        }
        Ok(Self {
            states,
            actions,
            probs,
        })
    }

    pub fn from_rows(states: usize, actions: usize, rows: &[Vec<f64>]) -> Result<Self, MdpError> {
        Self::new(states, actions, rows.iter().flatten().copied().collect())
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.probs[(s * self.actions + a) * self.states..][..self.states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Largest per-row ℓ₁ distance to `other`.
    pub fn max_l1_distance(&self, other: &Kernel) -> f64 {
        let mut worst = 0.0f64;
        for s in 0..self.states {
            for a in 0..self.actions {
                let d: f64 = self
                    .row(s, a)
                    .iter()
                    .zip(other.row(s, a))
                    .map(|(p, q)| (p - q).abs())
                    .sum();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Deterministic reward table `r(s, a) ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn new(states: usize, actions: usize, values: Vec<f64>) -> Result<Self, MdpError> {
        let expected = states * actions;
        if values.len() != expected {
            return Err(MdpError::DimensionMismatch {
                what: "reward table",
                expected,
                actual: values.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(MdpError::RewardOutOfRange {
                    state: i / actions,
                    action: i % actions,
                    value: v,
                });
            }
        }
        Ok(Self {
            states,
            actions,
            values,
        })
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.actions + a]
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Episodic linear mixture MDP `(φ, θ, r, H, s₁, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMixtureMdp {
    phi: FeatureMap,
    theta: Vec<f64>,
    reward: RewardTable,
    horizon: usize,
    initial_state: usize,
    param_bound: f64,
    // validated ⟨θ, φ(· | s, a)⟩ rows
    kernel: Kernel,
}

impl LinearMixtureMdp {
    pub fn new(
        phi: FeatureMap,
        theta: Vec<f64>,
        reward: RewardTable,
        horizon: usize,
        initial_state: usize,
        param_bound: f64,
    ) -> Result<Self, MdpError> {
        let (n, m) = (phi.num_states(), phi.num_actions());
        if n == 0 || m == 0 || phi.dim() == 0 {
            return Err(MdpError::Invalid(
                "empty state, action or feature space".into(),
            ));
        }
        if horizon == 0 {
            return Err(MdpError::Invalid("horizon must be positive".into()));
        }
        if initial_state >= n {
            return Err(MdpError::IndexOutOfRange {
                what: "initial state",
                index: initial_state,
                bound: n,
            });
        }
        if reward.states() != n || reward.actions() != m {
            return Err(MdpError::DimensionMismatch {
                what: "reward table",
                expected: n * m,
                actual: reward.states() * reward.actions(),
            });
        }
        let norm = dot(&theta, &theta).sqrt();
        if norm > param_bound * (1.0 + 1e-12) {
            return Err(MdpError::ParamBoundExceeded {
                norm,
                bound: param_bound,
            });
        }
        let mut probs = Vec::with_capacity(n * n * m);
        for s in 0..n {
            for a in 0..m {
                let raw = phi.contract(&theta, s, a)?;
                probs.extend(validate_distribution(raw, s, a)?);
            }
        }
        let kernel = Kernel {
            states: n,
            actions: m,
            probs,
        };
        Ok(Self {
            phi,
            theta,
            reward,
            horizon,
            initial_state,
            param_bound,
            kernel,
        })
    }

    pub fn phi(&self) -> &FeatureMap {
        &self.phi
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn reward(&self) -> &RewardTable {
        &self.reward
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn param_bound(&self) -> f64 {
        self.param_bound
    }

    pub fn num_states(&self) -> usize {
        self.phi.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.phi.num_actions()
    }

    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// `P(· | s, a) = ⟨θ, φ(· | s, a)⟩`.
    pub fn transition_probs(&self, s: usize, a: usize) -> Result<&[f64], MdpError> {
        self.phi.check_sa(s, a)?;
        Ok(self.kernel.row(s, a))
    }

    /// Draws `s' ~ P(· | s, a)`.
    pub fn sample_next<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<usize, MdpError> {
        Ok(sample_index(self.transition_probs(s, a)?, rng))
    }

    /// Same model with another parameter vector (shared φ, r, H, s₁, B).
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self, MdpError> {
        Self::new(
            self.phi.clone(),
            theta,
            self.reward.clone(),
            self.horizon,
            self.initial_state,
            self.param_bound,
        )
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Embeds a tabular MDP with one-hot features, `θ_{(s',s,a)} = P(s' | s, a)`.
/// The parameter bound is `sqrt(S·A)`, valid for every tabular kernel.
pub fn tabular_embed(
    kernel: &Kernel,
    reward: &RewardTable,
    horizon: usize,
    initial_state: usize,
) -> Result<LinearMixtureMdp, MdpError> {
    let (n, m) = (kernel.states(), kernel.actions());
    let bound = ((n * m) as f64).sqrt();
    LinearMixtureMdp::new(
        FeatureMap::tabular(n, m),
        kernel.as_slice().to_vec(),
        reward.clone(),
        horizon,
        initial_state,
        bound,
    )
}

/// Parameter vector of the three-state bandit embedding: arm coordinate `i` carries
/// `(0, θ_B[i], 1 − θ_B[i])` over `(start, rewarding, non-rewarding)`.
pub fn bandit_theta(theta_b: &[f64]) -> Vec<f64> {
    theta_b.iter().flat_map(|&t| [0.0, t, 1.0 - t]).collect()
}

/// Offline and online MDPs of a linear bandit with standard-basis arms. From the
/// start state, arm `a` reaches the rewarding state with probability `⟨θ_B, a⟩`;
/// the second stage is absorbing with reward 1 at the rewarding state.
pub fn bandit_embed(
    theta_off_b: &[f64],
    theta_on_b: &[f64],
) -> Result<(LinearMixtureMdp, LinearMixtureMdp), MdpError> {
    bandit_embed_with_arms(
        FeatureMap::bandit_basis(theta_on_b.len()),
        theta_off_b,
        theta_on_b,
    )
}

pub fn bandit_embed_with_arms(
    phi: FeatureMap,
    theta_off_b: &[f64],
    theta_on_b: &[f64],
) -> Result<(LinearMixtureMdp, LinearMixtureMdp), MdpError> {
    let FeatureMap::BanditThreeState { arms } = &phi else {
        return Err(MdpError::Invalid(
            "bandit embedding needs a BanditThreeState feature map".into(),
        ));
    };
    let arm_dim = arms.first().map_or(0, Vec::len);
    if arm_dim == 0 {
        return Err(MdpError::Invalid(
            "bandit needs at least one arm coordinate".into(),
        ));
    }
    for (i, arm) in arms.iter().enumerate() {
        let sum: f64 = arm.iter().sum();
        if arm.len() != arm_dim || arm.iter().any(|v| *v < 0.0) || (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(MdpError::Invalid(format!(
                "arm {i} is not a point of the probability simplex"
            )));
        }
    }
    for th in [theta_off_b, theta_on_b] {
        if th.len() != arm_dim {
            return Err(MdpError::DimensionMismatch {
                what: "bandit parameter",
                expected: arm_dim,
                actual: th.len(),
            });
        }
    }
    let n_arms = arms.len();
    let mut rewards = vec![0.0; 3 * n_arms];
    rewards[n_arms..2 * n_arms]
        .iter_mut()
        .for_each(|r| *r = 1.0);
    let reward = RewardTable::new(3, n_arms, rewards)?;
    let bound = (arm_dim as f64).sqrt();
    let off = LinearMixtureMdp::new(
        phi.clone(),
        bandit_theta(theta_off_b),
        reward.clone(),
        2,
        0,
        bound,
    )?;
    let on = LinearMixtureMdp::new(phi, bandit_theta(theta_on_b), reward, 2, 0, bound)?;
    Ok((off, on))
}

/// Stage-indexed values `V_h(s)` for `h = 1..=H+1`, with `V_{H+1} ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn zeros(horizon: usize, states: usize) -> Self {
        Self {
            values: vec![vec![0.0; states]; horizon + 1],
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// Values at stage `h` (1-based; `h = H + 1` is the terminal zero stage).
    pub fn stage(&self, h: usize) -> &[f64] {
        &self.values[h - 1]
    }

    pub fn stage_mut(&mut self, h: usize) -> &mut [f64] {
        &mut self.values[h - 1]
    }

    pub fn get(&self, h: usize, s: usize) -> f64 {
        self.values[h - 1][s]
    }
}

/// Deterministic non-stationary policy, `action(h, s)` for `h = 1..=H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    actions: Vec<Vec<usize>>,
}

impl Policy {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        Self { actions }
    }

    pub fn constant(horizon: usize, states: usize, action: usize) -> Self {
        Self {
            actions: vec![vec![action; states]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h - 1][s]
    }

    pub fn set(&mut self, h: usize, s: usize, a: usize) {
        self.actions[h - 1][s] = a;
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.actions
    }

    fn check(&self, mdp: &LinearMixtureMdp) -> Result<(), MdpError> {
        if self.horizon() != mdp.horizon() {
            return Err(MdpError::DimensionMismatch {
                what: "policy horizon",
                expected: mdp.horizon(),
                actual: self.horizon(),
            });
        }
        for row in &self.actions {
            if row.len() != mdp.num_states() {
                return Err(MdpError::DimensionMismatch {
                    what: "policy states",
                    expected: mdp.num_states(),
                    actual: row.len(),
                });
            }
            if let Some(&a) = row.iter().find(|&&a| a >= mdp.num_actions()) {
                return Err(MdpError::IndexOutOfRange {
                    what: "policy action",
                    index: a,
                    bound: mdp.num_actions(),
                });
            }
        }
        Ok(())
    }
}

/// `r(s, a) + Σ_{s'} P(s' | s, a) v(s')`.
#[inline]
pub fn q_value(mdp: &LinearMixtureMdp, s: usize, a: usize, v_next: &[f64]) -> f64 {
    mdp.reward().get(s, a) + dot(mdp.kernel().row(s, a), v_next)
}

#[derive(Clone, Copy)]
enum Extremum {
    Max,
    Min,
}

fn backward_induction(mdp: &LinearMixtureMdp, which: Extremum) -> (ValueTable, Policy) {
    let (h_max, n, m) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut values = ValueTable::zeros(h_max, n);
    let mut policy = Policy::constant(h_max, n, 0);
    for h in (1..=h_max).rev() {
        let next = values.stage(h + 1).to_vec();
        for s in 0..n {
            let mut best_a = 0;
            let mut best_q = q_value(mdp, s, 0, &next);
            for a in 1..m {
                let q = q_value(mdp, s, a, &next);
                // strict comparison keeps the lowest index on ties
                let better = match which {
                    Extremum::Max => q > best_q,
                    Extremum::Min => q < best_q,
                };
                if better {
                    best_q = q;
                    best_a = a;
                }
            }
            values.stage_mut(h)[s] = best_q;
            policy.set(h, s, best_a);
        }
    }
    (values, policy)
}

/// `V*` by backward induction.
pub fn optimal_values(mdp: &LinearMixtureMdp) -> ValueTable {
    backward_induction(mdp, Extremum::Max).0
}

/// Greedy policy of `V*`, ties to the lowest action index.
pub fn optimal_policy(mdp: &LinearMixtureMdp) -> Policy {
    backward_induction(mdp, Extremum::Max).1
}

/// Values of the worst (minimizing) policy.
pub fn worst_values(mdp: &LinearMixtureMdp) -> ValueTable {
    backward_induction(mdp, Extremum::Min).0
}

/// Exact `V^π`.
pub fn evaluate_policy(mdp: &LinearMixtureMdp, policy: &Policy) -> Result<ValueTable, MdpError> {
    policy.check(mdp)?;
    let (h_max, n) = (mdp.horizon(), mdp.num_states());
    let mut values = ValueTable::zeros(h_max, n);
    for h in (1..=h_max).rev() {
        let next = values.stage(h + 1).to_vec();
        for s in 0..n {
            values.stage_mut(h)[s] = q_value(mdp, s, policy.action(h, s), &next);
        }
    }
    Ok(values)
}

/// Realized return of one episode of `policy` from the initial state.
pub fn rollout_return<R: Rng + ?Sized>(
    mdp: &LinearMixtureMdp,
    policy: &Policy,
    rng: &mut R,
) -> f64 {
    let mut s = mdp.initial_state();
    let mut total = 0.0;
    for h in 1..=mdp.horizon() {
        let a = policy.action(h, s);
        total += mdp.reward().get(s, a);
        s = sample_index(mdp.kernel().row(s, a), rng);
    }
    total
}
