//! Synthetic offline/online environment pairs.
//!
//! The online kernel has flat-Dirichlet rows and uniform rewards. The offline
//! kernel moves, in every row, up to `Δ/2` probability mass onto the state with
//! the smallest worst-policy value, which minimizes the expected next-state value
//! under the per-row budget `‖P^off(·|s,a) − P(·|s,a)‖₁ ≤ Δ`.

use rand::Rng;
use rand_distr::Exp1;

use crate::linalg::dot;
use crate::mdp::{tabular_embed, worst_values, Kernel, LinearMixtureMdp, MdpError, RewardTable};
use crate::rng::{stream, Stream};

/// Offline and online MDPs sharing features, rewards, horizon and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvPair {
    pub online: LinearMixtureMdp,
    pub offline: LinearMixtureMdp,
    /// Per-row ℓ₁ budget used to build the offline kernel.
    pub delta_l1: f64,
    pub seed: u64,
}

impl EnvPair {
    pub fn new(
        online: LinearMixtureMdp,
        offline: LinearMixtureMdp,
        delta_l1: f64,
        seed: u64,
    ) -> Result<Self, MdpError> {
        if online.phi() != offline.phi()
            || online.reward() != offline.reward()
            || online.horizon() != offline.horizon()
            || online.initial_state() != offline.initial_state()
        {
            return Err(MdpError::Invalid(
                "offline and online MDPs must share features, rewards, horizon and initial state"
                    .into(),
            ));
        }
        Ok(Self {
            online,
            offline,
            delta_l1,
            seed,
        })
    }

    /// `‖θ* − θ^off,*‖₂`, the parameter-space shift.
    pub fn theta_shift_l2(&self) -> f64 {
        let diff: Vec<f64> = self
            .online
            .theta()
            .iter()
            .zip(self.offline.theta())
            .map(|(a, b)| a - b)
            .collect();
        dot(&diff, &diff).sqrt()
    }

    /// Largest per-row ℓ₁ distance between the two kernels.
    pub fn realized_l1(&self) -> f64 {
        self.online.kernel().max_l1_distance(self.offline.kernel())
    }
}

/// Kernel whose `S·A` rows are independent flat-Dirichlet draws (normalized Exp(1)).
pub fn sample_online_kernel(states: usize, actions: usize, seed: u64) -> Result<Kernel, MdpError> {
    let mut rng = stream(seed, Stream::Kernel);
    let mut probs = Vec::with_capacity(states * actions * states);
    let mut row = vec![0.0; states];
    for _ in 0..states * actions {
        for v in row.iter_mut() {
            *v = rng.sample::<f64, _>(Exp1);
        }
        let total: f64 = row.iter().sum();
        probs.extend(row.iter().map(|v| v / total));
    }
    Kernel::new(states, actions, probs)
}

/// Reward table with independent `Unif[0, 1)` entries.
pub fn sample_rewards(states: usize, actions: usize, seed: u64) -> Result<RewardTable, MdpError> {
    let mut rng = stream(seed, Stream::Rewards);
    RewardTable::new(
        states,
        actions,
        (0..states * actions).map(|_| rng.random::<f64>()).collect(),
    )
}

/// Per-row minimizer of `E_{P^off}[v]` over the ℓ₁ ball of radius `delta` around `P`.
///
/// Mass is taken from states in decreasing `v` order (ties to the lower index) and
/// placed on the lowest-index minimizer of `v`, until `delta/2` has moved.
pub fn shift_offline_kernel(
    kernel: &Kernel,
    v_worst: &[f64],
    delta: f64,
) -> Result<Kernel, MdpError> {
    let n = kernel.states();
    if v_worst.len() != n {
        return Err(MdpError::DimensionMismatch {
            what: "worst-value vector",
            expected: n,
            actual: v_worst.len(),
        });
    }
    if !(0.0..=2.0).contains(&delta) {
        return Err(MdpError::Invalid(format!(
            "ℓ₁ budget must lie in [0, 2], got {delta}"
        )));
    }
    let target = (0..n).fold(
        0,
        |best, s| if v_worst[s] < v_worst[best] { s } else { best },
    );
    let mut donors: Vec<usize> = (0..n).filter(|&s| s != target).collect();
    donors.sort_by(|&i, &j| v_worst[j].total_cmp(&v_worst[i]).then(i.cmp(&j)));

    let mut probs = Vec::with_capacity(kernel.as_slice().len());
    for s in 0..n {
        for a in 0..kernel.actions() {
            let mut row = kernel.row(s, a).to_vec();
            let mut budget = delta / 2.0;
            let mut moved = 0.0;
            for &d in &donors {
                if budget <= 0.0 {
                    break;
                }
                let take = row[d].min(budget);
                row[d] -= take;
                budget -= take;
                moved += take;
            }
            row[target] += moved;
            probs.extend(row);
        }
    }
    Kernel::new(n, kernel.actions(), probs)
}

/// Builds the online MDP from `seed`, then its shifted offline counterpart.
/// The initial state is state 0; the shift targets the stage-1 worst-policy values.
pub fn generate_env_pair(
    states: usize,
    actions: usize,
    horizon: usize,
    delta: f64,
    seed: u64,
) -> Result<EnvPair, MdpError> {
    if states == 0 || actions == 0 || horizon == 0 {
        return Err(MdpError::Invalid("S, A and H must be positive".into()));
    }
    let kernel = sample_online_kernel(states, actions, seed)?;
    let reward = sample_rewards(states, actions, seed)?;
    env_pair_from_kernel(&kernel, &reward, horizon, 0, delta, seed)
}

/// Online/offline pair built from a given online kernel and reward table.
pub fn env_pair_from_kernel(
    kernel: &Kernel,
    reward: &RewardTable,
    horizon: usize,
    initial_state: usize,
    delta: f64,
    seed: u64,
) -> Result<EnvPair, MdpError> {
    let online = tabular_embed(kernel, reward, horizon, initial_state)?;
    let v_worst = worst_values(&online).stage(1).to_vec();
    let off_kernel = shift_offline_kernel(kernel, &v_worst, delta)?;
    let offline = tabular_embed(&off_kernel, reward, horizon, initial_state)?;
    EnvPair::new(online, offline, delta, seed)
}
