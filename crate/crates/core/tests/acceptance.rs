#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Standard environment: S=5, A=10, H=3 (d=250), env_seed 1.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oorl::agents::{
    run_agent, run_complete, run_oo_ucrl_vtr, run_ucrl, AgentConfig, Algorithm, EpisodeHook,
    EpisodePlan, EstimatorState,
};
use oorl::diagnostics::{regret_bound_terms, BoundInputs};
use oorl::envgen::{generate_env_pair, EnvPair};
use oorl::harness::{
    run_spec, select_bonus_scales, BonusScale, DeltaCurve, ExperimentSpec, SweepAxis, SweepResult,
};
use oorl::linalg::{max_eigenvalue, min_eigenvalue, DesignAccumulator, SymMatrix};
use oorl::mdp::{bandit_embed, optimal_values, tabular_embed, Kernel, RewardTable};
use oorl::offline::{
    accumulate_offline, coverage_p0, coverage_p0_best_stage, generate_offline, tau_lower_bounds,
    visitation, AuxDesign, BehaviorPolicy, CoverageInputs, OfflineDataset, OfflineSummary,
    Transition,
};

const ENV_SEED: u64 = 1;
const THM1_CONSTANT: f64 = 20.0;

struct Report {
    passed: usize,
    failed: Vec<String>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let mut err = std::io::stderr();
        let _ = writeln!(err, "[{tag}] {name}: {detail}");
        if pass {
            self.passed += 1;
        } else {
            self.failed.push(name.to_string());
        }
    }

    fn info(&self, msg: String) {
        let _ = writeln!(std::io::stderr(), "       {msg}");
    }

    fn runtime(&mut self, name: &str, start: Instant, limit: Duration) {
        let el = start.elapsed();
        self.check(
            name,
            el <= limit,
            format!("{:.1}s (limit {}s)", el.as_secs_f64(), limit.as_secs()),
        );
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn standard_pair(delta: f64) -> EnvPair {
    generate_env_pair(5, 10, 3, delta, ENV_SEED).unwrap()
}

// ---------------------------------------------------------------- oracles

/// Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn gauss_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            gauss_solve(
                a.to_vec(),
                (0..n).map(|i| f64::from(u8::from(i == j))).collect(),
            )
            .unwrap()
        })
        .collect();
    (0..n)
        .map(|i| (0..n).map(|j| cols[j][i]).collect())
        .collect()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn random_spd(r: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// `min ⟨q, v⟩` over the simplex intersected with the ℓ₁ ball of radius `delta`
/// around `p`, by enumerating the vertices of the polytope
/// `{q ≥ 0, Σq = 1, σ·(q − p) ≤ Δ for every sign vector σ}`.
fn lp_min_shift(p: &[f64], v: &[f64], delta: f64) -> f64 {
    let n = p.len();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..n {
        let mut a = vec![0.0; n];
        a[i] = -1.0;
        rows.push((a, 0.0));
    }
    for mask in 0..(1u32 << n) {
        let sigma: Vec<f64> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        let rhs = delta + sigma.iter().zip(p).map(|(s, x)| s * x).sum::<f64>();
        rows.push((sigma, rhs));
    }
    let feasible = |q: &[f64]| {
        (q.iter().sum::<f64>() - 1.0).abs() < 1e-9
            && rows
                .iter()
                .all(|(a, b)| a.iter().zip(q).map(|(x, y)| x * y).sum::<f64>() <= b + 1e-9)
    };
    let mut best = f64::INFINITY;
    let m = rows.len();
    let mut idx = vec![0usize; n - 1];
    fn combos(
        start: usize,
        depth: usize,
        m: usize,
        idx: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if depth == idx.len() {
            f(idx);
            return;
        }
        for i in start..m {
            idx[depth] = i;
            combos(i + 1, depth + 1, m, idx, f);
        }
    }
    combos(0, 0, m, &mut idx, &mut |sel: &[usize]| {
        let mut a = vec![vec![1.0; n]];
        let mut b = vec![1.0];
        for &s in sel {
            a.push(rows[s].0.clone());
            b.push(rows[s].1);
        }
        if let Some(q) = gauss_solve(a, b) {
            if feasible(&q) {
                best = best.min(q.iter().zip(v).map(|(x, y)| x * y).sum());
            }
        }
    });
    best
}

/// Expected return of a deterministic Markov policy by forward propagation of the state law.
fn forward_return(
    rows: &[Vec<f64>],
    reward: &[f64],
    n: usize,
    m: usize,
    horizon: usize,
    s1: usize,
    pol: &[usize],
) -> f64 {
    let mut law = vec![0.0; n];
    law[s1] = 1.0;
    let mut total = 0.0;
    for h in 0..horizon {
        let mut next = vec![0.0; n];
        for s in 0..n {
            let a = pol[h * n + s];
            total += law[s] * reward[s * m + a];
            for (t, nx) in next.iter_mut().enumerate() {
                *nx += law[s] * rows[s * m + a][t];
            }
        }
        law = next;
    }
    total
}

fn oracle_suite(rep: &mut Report) {
    let start = Instant::now();

    // ridge regression against the normal equations
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let lambda = r.random_range(0.1..5.0);
        let mut acc = DesignAccumulator::new(5, lambda).unwrap();
        let mut gram: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { lambda } else { 0.0 }).collect())
            .collect();
        let mut w = vec![0.0; 5];
        for _ in 0..r.random_range(1..30) {
            let x: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
            let y = r.random_range(-2.0..2.0);
            acc.rank1_update(&x, y).unwrap();
            for i in 0..5 {
                w[i] += x[i] * y;
                for j in 0..5 {
                    gram[i][j] += x[i] * x[j];
                }
            }
        }
        let want = gauss_solve(gram, w).unwrap();
        let got = acc.ridge_solve();
        let num: f64 = want
            .iter()
            .zip(&got)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = want.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        worst = worst.max(num / den);
    }
    rep.check(
        "oracle/ridge_solve vs normal equations (100 SPD 5x5)",
        worst <= 1e-10,
        format!("max relative error {worst:.2e} (tol 1e-10)"),
    );

    // Sherman-Morrison maintenance with no periodic refresh
    let mut acc = DesignAccumulator::new(5, 1.0)
        .unwrap()
        .with_refresh_every(usize::MAX);
    let mut gram: Vec<Vec<f64>> = (0..5)
        .map(|i| (0..5).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
        acc.rank1_update(&x, 0.0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                gram[i][j] += x[i] * x[j];
            }
        }
    }
    let inv = gauss_inverse(&gram);
    let err = (0..5)
        .flat_map(|i| (0..5).map(move |j| (i, j)))
        .map(|(i, j)| (acc.inverse().get(i, j) - inv[i][j]).abs())
        .fold(0.0, f64::max);
    rep.check(
        "oracle/rank-1 inverse after 1e4 updates vs refactorization",
        err <= 1e-8,
        format!("max abs error {err:.2e} (tol 1e-8)"),
    );

    // extreme eigenvalues
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = random_spd(&mut r, 2);
        let (tr, det) = (m[0][0] + m[1][1], m[0][0] * m[1][1] - m[0][1] * m[1][0]);
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        let sm = SymMatrix::from_rows(&m).unwrap();
        worst = worst
            .max(rel(min_eigenvalue(&sm).unwrap(), (tr - disc) / 2.0))
            .max(rel(max_eigenvalue(&sm).unwrap(), (tr + disc) / 2.0));
    }
    for _ in 0..50 {
        let m = random_spd(&mut r, 10);
        let ev = jacobi_eigenvalues(m.clone());
        let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sm = SymMatrix::from_rows(&m).unwrap();
        worst = worst
            .max(rel(min_eigenvalue(&sm).unwrap(), lo))
            .max(rel(max_eigenvalue(&sm).unwrap(), hi));
    }
    rep.check(
        "oracle/min & max eigenvalue vs char. polynomial (2x2) and Jacobi (10x10)",
        worst <= 1e-9,
        format!("max relative error {worst:.2e} (tol 1e-9)"),
    );

    // value iteration against exhaustive enumeration of deterministic Markov policies
    let mut worst: f64 = 0.0;
    let (n, m, horizon) = (2, 2, 2);
    for _ in 0..200 {
        let rows: Vec<Vec<f64>> = (0..n * m)
            .map(|_| {
                let p = r.random_range(0.0..1.0);
                vec![p, 1.0 - p]
            })
            .collect();
        let reward: Vec<f64> = (0..n * m).map(|_| r.random_range(0.0..1.0)).collect();
        let kernel = Kernel::from_rows(n, m, &rows).unwrap();
        let table = RewardTable::new(n, m, reward.clone()).unwrap();
        for s1 in 0..n {
            let mdp = tabular_embed(&kernel, &table, horizon, s1).unwrap();
            let v = optimal_values(&mdp).get(1, s1);
            let n_pol = m.pow((n * horizon) as u32);
            let best = (0..n_pol)
                .map(|code| {
                    let pol: Vec<usize> = (0..n * horizon)
                        .map(|i| code / m.pow(i as u32) % m)
                        .collect();
                    forward_return(&rows, &reward, n, m, horizon, s1, &pol)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((v - best).abs());
        }
    }
    rep.check(
        "oracle/value iteration vs policy enumeration (2 states, 2 actions, H=2)",
        worst <= 1e-10,
        format!("max abs error {worst:.2e} (tol 1e-10)"),
    );

    // adversarial shift against an LP vertex-enumeration oracle
    let (mut gap, mut over): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let raw: Vec<f64> = (0..4).map(|_| r.random_range(0.0..1.0)).collect();
                let t: f64 = raw.iter().sum();
                raw.iter().map(|x| x / t).collect()
            })
            .collect();
        let v: Vec<f64> = (0..4).map(|_| r.random_range(0.0..3.0)).collect();
        let delta = r.random_range(0.0..2.0);
        let kernel = Kernel::from_rows(4, 1, &rows).unwrap();
        let shifted = oorl::envgen::shift_offline_kernel(&kernel, &v, delta).unwrap();
        for (s, p) in rows.iter().enumerate() {
            let q = shifted.row(s, 0);
            let obj: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            gap = gap.max((obj - lp_min_shift(p, &v, delta)).abs());
            let l1: f64 = q.iter().zip(p).map(|(a, b)| (a - b).abs()).sum();
            over = over.max(l1 - delta);
            assert!(q.iter().all(|x| *x >= 0.0) && (q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
    rep.check(
        "oracle/shift_offline_kernel vs LP vertex enumeration (100 cases, 4 states)",
        gap <= 1e-9 && over <= 1e-12,
        format!("max objective gap {gap:.2e} (tol 1e-9), max l1 budget excess {over:.2e}"),
    );

    // uniform bandit coverage equals the closed diagonal form
    let (off, _on) = bandit_embed(&[0.3, 0.5, 0.7], &[0.3, 0.5, 0.7]).unwrap();
    let pulls = 300;
    let mut trajectories = Vec::new();
    for k in 0..pulls {
        for arm in 0..3 {
            let next = 1 + (k + arm) % 2;
            trajectories.push(vec![
                Transition {
                    state: 0,
                    action: arm,
                    reward: off.reward().get(0, arm),
                    next_state: next,
                },
                Transition {
                    state: next,
                    action: 0,
                    reward: off.reward().get(next, 0),
                    next_state: next,
                },
            ]);
        }
    }
    let data = OfflineDataset {
        trajectories,
        behavior: BehaviorPolicy::UniformRandom,
        states: 3,
        actions: 3,
        horizon: 2,
        initial_state: 0,
        seed: 0,
    };
    let lambda = (off.horizon() * off.horizon() * off.dim()) as f64;
    let summary =
        accumulate_offline(off.phi(), &data, &AuxDesign::Deterministic, lambda, 0).unwrap();
    let m_off = (3 * pulls) as f64;
    let want = (pulls as f64 / 3.0 + lambda) / m_off;
    let got = summary.tau_hat.unwrap();
    let diag = summary.g_off.diagonal_entries();
    let diagonal_ok = summary.g_off.trace() == diag.iter().sum::<f64>()
        && (0..9).all(|i| (0..9).all(|j| i == j || summary.g_off.get(i, j) == 0.0))
        && diag.iter().all(|x| *x == pulls as f64 / 3.0);
    rep.check(
        "oracle/uniform-bandit tau_hat equals (N/3 + lambda)/M_off",
        diagonal_ok && rel(got, want) <= 1e-12,
        format!("tau_hat {got:.15e}, closed form {want:.15e}, G_off diagonal with entries N/3: {diagonal_ok}"),
    );

    rep.runtime("oracle/runtime", start, Duration::from_secs(60));
}

// ---------------------------------------------------------------- invariants

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

struct ContainmentHook {
    theta_star: Vec<f64>,
    v_star: f64,
    s1: usize,
    episodes: usize,
    contained: usize,
    optimism_violations: usize,
}

impl EpisodeHook for ContainmentHook {
    fn on_plan(&mut self, _k: usize, state: &EstimatorState, plan: &mut EpisodePlan) {
        self.episodes += 1;
        let diff = |acc: &DesignAccumulator| -> Vec<f64> {
            acc.ridge_solve()
                .iter()
                .zip(&self.theta_star)
                .map(|(a, b)| a - b)
                .collect()
        };
        let in_on = state.on.gram_norm(&diff(&state.on)).unwrap() <= plan.radii.beta;
        let in_all = state.all.gram_norm(&diff(&state.all)).unwrap() <= plan.radii.gamma;
        if in_on && in_all {
            self.contained += 1;
            if plan.values.get(1, self.s1) < self.v_star - 1e-12 {
                self.optimism_violations += 1;
            }
        }
    }
}

struct DominanceHook {
    checked: usize,
    violations: usize,
}

impl EpisodeHook for DominanceHook {
    fn on_plan(&mut self, _k: usize, _state: &EstimatorState, plan: &mut EpisodePlan) {
        for (b, bo) in plan.bonus.iter().zip(&plan.bonus_online) {
            self.checked += 1;
            if !(b <= bo) {
                self.violations += 1;
            }
        }
    }
}

fn invariants(rep: &mut Report) {
    let start = Instant::now();
    let pair = standard_pair(0.05);
    let d = pair.online.dim();

    // reductions
    let mut mismatches = 0;
    let mut runs = 0;
    for &b_s in &[0.05, 0.1, 1.0] {
        let cfg = AgentConfig::for_env(&pair.online, 200)
            .with_bonus_scale(b_s)
            .with_shift_bound(pair.theta_shift_l2());
        let empty = OfflineSummary::empty(d, cfg.lambda);
        for seed in 0..20u64 {
            let none =
                generate_offline(&pair.offline, &BehaviorPolicy::UniformRandom, 0, seed).unwrap();
            let zero = accumulate_offline(
                pair.offline.phi(),
                &none,
                &AuxDesign::Deterministic,
                cfg.lambda,
                seed,
            )
            .unwrap();
            let u = run_ucrl(&pair, &cfg, seed).unwrap();
            let o = run_oo_ucrl_vtr(&pair, &empty, &cfg, seed).unwrap();
            let c = run_complete(&pair, &zero, &cfg, seed).unwrap();
            runs += 2;
            mismatches += usize::from(
                bits(&o.per_episode) != bits(&u.per_episode)
                    || bits(&o.cumulative) != bits(&u.cumulative),
            );
            mismatches += usize::from(
                bits(&c.per_episode) != bits(&u.per_episode)
                    || bits(&c.cumulative) != bits(&u.cumulative),
            );
        }
    }
    rep.check(
        "invariant/reduction: O-O(empty) and COMPLETE(M_off=0) bit-identical to UCRL (20 seeds, K=200)",
        mismatches == 0,
        format!("{mismatches} of {runs} comparisons differ (b_s in 0.05, 0.1, 1)"),
    );

    // conditional optimism
    let cfg = AgentConfig::for_env(&pair.online, 500)
        .with_bonus_scale(1.0)
        .with_shift_bound(pair.theta_shift_l2());
    let v_star = optimal_values(&pair.online).get(1, pair.online.initial_state());
    let mut hook = ContainmentHook {
        theta_star: pair.online.theta().to_vec(),
        v_star,
        s1: pair.online.initial_state(),
        episodes: 0,
        contained: 0,
        optimism_violations: 0,
    };
    for seed in 0..50u64 {
        let data =
            generate_offline(&pair.offline, &BehaviorPolicy::UniformRandom, 2000, seed).unwrap();
        let summary = accumulate_offline(
            pair.offline.phi(),
            &data,
            &AuxDesign::Deterministic,
            cfg.lambda,
            seed,
        )
        .unwrap();
        run_agent(Algorithm::OoUcrlVtr, &pair, &summary, &cfg, seed, &mut hook).unwrap();
    }
    let fail_rate = 1.0 - hook.contained as f64 / hook.episodes as f64;
    rep.check(
        "invariant/conditional optimism: V_hat >= V* whenever both ellipsoids contain theta* (b_s=1)",
        hook.optimism_violations == 0,
        format!("{} violations over {} contained episodes", hook.optimism_violations, hook.contained),
    );
    rep.check(
        "invariant/containment failure rate <= 5% (50 seeds x K=500)",
        fail_rate <= 0.05,
        format!(
            "failure rate {:.4} over {} episodes",
            fail_rate, hook.episodes
        ),
    );

    // min-of-two dominance
    let cfg = AgentConfig::for_env(&pair.online, 50).with_shift_bound(pair.theta_shift_l2());
    let data = generate_offline(&pair.offline, &BehaviorPolicy::UniformRandom, 20_000, 3).unwrap();
    let summary = accumulate_offline(
        pair.offline.phi(),
        &data,
        &AuxDesign::Deterministic,
        cfg.lambda,
        3,
    )
    .unwrap();
    let mut dom = DominanceHook {
        checked: 0,
        violations: 0,
    };
    run_agent(Algorithm::OoUcrlVtr, &pair, &summary, &cfg, 3, &mut dom).unwrap();
    rep.check(
        "invariant/min-of-two: O-O bonus <= online-only bonus at every (k,h,s,a)",
        dom.violations == 0 && dom.checked == 50 * 3 * 5 * 10,
        format!(
            "{} violations over {} logged entries",
            dom.violations, dom.checked
        ),
    );

    // coverage range and the deterministic-design lower bound
    let m_off = 10_000;
    let (mut in_range, mut above_bound, mut above_stage_bound) = (0, 0, 0);
    let (mut p0_max, mut p0_stage_min) = (0.0f64, f64::INFINITY);
    for seed in 0..50u64 {
        let pair = generate_env_pair(5, 10, 3, 0.05, 1000 + seed).unwrap();
        let env = &pair.offline;
        let lambda = (9 * env.dim()) as f64;
        let data = generate_offline(env, &BehaviorPolicy::UniformRandom, m_off, seed).unwrap();
        let s =
            accumulate_offline(env.phi(), &data, &AuxDesign::Deterministic, lambda, seed).unwrap();
        let tau = s.tau_hat.unwrap();
        let upper = (lambda + 27.0 * env.dim() as f64 * m_off as f64) / m_off as f64;
        in_range += usize::from(tau >= lambda / m_off as f64 * (1.0 - 1e-12) && tau <= upper);
        let vis = visitation(env, &BehaviorPolicy::UniformRandom).unwrap();
        let p0 = coverage_p0(&vis);
        let p0_stage = coverage_p0_best_stage(&vis, 2);
        p0_max = p0_max.max(p0);
        p0_stage_min = p0_stage_min.min(p0_stage);
        let inputs = |p0| CoverageInputs {
            p0,
            kappa: 1.0,
            probes: 5,
            dim: env.dim(),
            states: 5,
            actions: 10,
            m_off,
            delta: 0.05,
        };
        above_bound += usize::from(tau >= tau_lower_bounds(&inputs(p0)).deterministic);
        above_stage_bound += usize::from(tau >= tau_lower_bounds(&inputs(p0_stage)).deterministic);
    }
    rep.check(
        "invariant/tau_hat in [lambda/M_off, (lambda + H^3 d M_off)/M_off] (50 seeds)",
        in_range == 50,
        format!("{in_range}/50 in range"),
    );
    rep.check(
        "invariant/tau_hat >= deterministic-design lower bound with exact p0 in >= 90% of 50 seeds (M_off=1e4)",
        above_bound >= 45,
        format!("{above_bound}/50; exact p0 = inf over all stages <= {p0_max:.3e} (initial state is fixed)"),
    );
    rep.info(format!("with the single-stage p0 (>= {p0_stage_min:.3e}) the bound holds in {above_stage_bound}/50 seeds"));

    rep.runtime("invariant/runtime", start, Duration::from_secs(300));
}

// ---------------------------------------------------------------- trends

struct Stat {
    mean: f64,
    std: f64,
}

fn stat(res: &SweepResult, alg: Algorithm, axis: &str, value: f64) -> Stat {
    let row = res
        .aggregate(alg, axis, value)
        .unwrap_or_else(|| panic!("missing {alg} at {axis}={value}"));
    Stat {
        mean: row.mean_final,
        std: row.std_final,
    }
}

fn pooled(a: &Stat, b: &Stat) -> f64 {
    ((a.std * a.std + b.std * b.std) / 2.0).sqrt()
}

/// Every later point is at least the earlier one minus their pooled std.
fn non_decreasing(points: &[Stat]) -> (bool, f64) {
    let mut worst = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            worst = worst.min(points[j].mean - points[i].mean + pooled(&points[i], &points[j]));
        }
    }
    (worst >= 0.0, worst)
}

fn fmt_means(points: &[Stat]) -> String {
    points
        .iter()
        .map(|p| format!("{:.2}±{:.2}", p.mean, p.std))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Realized cumulative regret against the bound with implied constant [`THM1_CONSTANT`].
fn bound_violations(res: &SweepResult, episodes: usize) -> (usize, usize, f64) {
    let (mut n, mut bad, mut worst_ratio) = (0, 0, 0.0f64);
    for c in &res.curves {
        let job = res
            .jobs
            .iter()
            .find(|j| {
                j.axis_name == c.axis_name && j.axis_value == c.axis_value && j.seed == c.seed
            })
            .unwrap();
        let x = BoundInputs {
            d: job.dim as f64,
            horizon: 3.0,
            episodes: episodes as f64,
            param_bound: job.param_bound,
            delta_theta: job.shift_bound,
            m_off: job.m_off as f64,
            tau: job.tau_hat.unwrap_or(1.0),
        };
        let t = regret_bound_terms(&x);
        let bound = if c.algorithm == Algorithm::Ucrl.label() || job.tau_hat.is_none() {
            t.term_b
        } else {
            t.bound
        };
        let ratio = c.final_regret() / (THM1_CONSTANT * bound);
        worst_ratio = worst_ratio.max(ratio);
        n += 1;
        bad += usize::from(ratio > 1.0);
    }
    (n, bad, worst_ratio)
}

fn coverage_in_range(res: &SweepResult) -> bool {
    res.jobs.iter().all(|j| match j.tau_hat {
        None => true,
        Some(t) => {
            let lambda = 9.0 * j.dim as f64;
            let m = j.m_off as f64;
            t >= lambda / m * (1.0 - 1e-12) && t <= (lambda + 27.0 * j.dim as f64 * m) / m
        }
    })
}

fn trends(rep: &mut Report) {
    let start = Instant::now();
    let (oo, ucrl, complete) = (Algorithm::OoUcrlVtr, Algorithm::Ucrl, Algorithm::Complete);
    let deltas = [0.0, 0.05, 0.2, 0.5, 1.0];
    let mut shift_sweep = ExperimentSpec::standard(SweepAxis::Delta(deltas.to_vec()));
    let scales = select_bonus_scales(&shift_sweep).unwrap();
    rep.info(format!(
        "bonus scales from the grid search: UCRL and O-O b_s = {}, COMPLETE b_s = {}",
        scales.shared, scales.complete
    ));
    shift_sweep.bonus = BonusScale::Fixed(scales);
    let mut bound_checks = Vec::new();

    let res = run_spec(&shift_sweep).unwrap();
    let pts: Vec<Stat> = deltas.iter().map(|&d| stat(&res, oo, "delta", d)).collect();
    let (u0, o0) = (stat(&res, ucrl, "delta", 0.0), stat(&res, oo, "delta", 0.0));
    let (u1, o1, c1) = (
        stat(&res, ucrl, "delta", 1.0),
        stat(&res, oo, "delta", 1.0),
        stat(&res, complete, "delta", 1.0),
    );
    rep.check(
        "trend/shift_sweep: at delta=0, O-O <= 0.7 x UCRL",
        o0.mean <= 0.7 * u0.mean,
        format!(
            "O-O {:.3}, UCRL {:.3}, ratio {:.3}",
            o0.mean,
            u0.mean,
            o0.mean / u0.mean
        ),
    );
    rep.check(
        "trend/shift_sweep: at delta=1, O-O <= 1.15 x UCRL and COMPLETE >= 1.5 x UCRL",
        o1.mean <= 1.15 * u1.mean && c1.mean >= 1.5 * u1.mean,
        format!(
            "O-O/UCRL {:.3}, COMPLETE/UCRL {:.3} (UCRL {:.3})",
            o1.mean / u1.mean,
            c1.mean / u1.mean,
            u1.mean
        ),
    );
    let (ok, slack) = non_decreasing(&pts);
    rep.check(
        "trend/shift_sweep: O-O non-decreasing in delta within one pooled std",
        ok,
        format!("means {}; min slack {slack:.3}", fmt_means(&pts)),
    );
    bound_checks.push((
        "shift_sweep",
        bound_violations(&res, shift_sweep.episodes),
        coverage_in_range(&res),
    ));

    let m_offs = [100usize, 1000, 20_000];
    let offline_size = ExperimentSpec {
        algorithms: vec![oo, ucrl],
        ..ExperimentSpec {
            axis: SweepAxis::Moff(m_offs.to_vec()),
            ..shift_sweep.clone()
        }
    };
    let res = run_spec(&offline_size).unwrap();
    let oo_pts: Vec<Stat> = m_offs
        .iter()
        .map(|&m| stat(&res, oo, "m_off", m as f64))
        .collect();
    let u_pts: Vec<Stat> = m_offs
        .iter()
        .map(|&m| stat(&res, ucrl, "m_off", m as f64))
        .collect();
    rep.check(
        "trend/offline_size: O-O at M_off=2e4 <= 0.8 x O-O at M_off=1e2 (delta=0.05)",
        oo_pts[2].mean <= 0.8 * oo_pts[0].mean,
        format!("O-O means {}", fmt_means(&oo_pts)),
    );
    let flat = (0..u_pts.len()).all(|i| {
        (0..u_pts.len())
            .all(|j| (u_pts[i].mean - u_pts[j].mean).abs() <= pooled(&u_pts[i], &u_pts[j]))
    });
    rep.check(
        "trend/offline_size: UCRL flat in M_off within one pooled std",
        flat,
        format!("UCRL means {}", fmt_means(&u_pts)),
    );
    bound_checks.push((
        "offline_size",
        bound_violations(&res, offline_size.episodes),
        coverage_in_range(&res),
    ));

    let taus = [0.01, 0.1, 0.5, 1.0];
    let coverage_sweep = ExperimentSpec {
        axis: SweepAxis::Tau(taus.to_vec()),
        ..offline_size.clone()
    };
    let res = run_spec(&coverage_sweep).unwrap();
    let pts: Vec<Stat> = taus.iter().map(|&t| stat(&res, oo, "tau", t)).collect();
    let neg: Vec<Stat> = pts
        .iter()
        .map(|p| Stat {
            mean: -p.mean,
            std: p.std,
        })
        .collect();
    let (ok, slack) = non_decreasing(&neg);
    rep.check(
        "trend/coverage_sweep: O-O non-increasing in tau_target within one pooled std",
        ok,
        format!("means {}; min slack {slack:.3}", fmt_means(&pts)),
    );
    let u = stat(&res, ucrl, "tau", 1.0);
    rep.check(
        "trend/coverage_sweep: at tau_target=1, O-O <= 0.8 x UCRL",
        pts[3].mean <= 0.8 * u.mean,
        format!("O-O {:.3}, UCRL {:.3}", pts[3].mean, u.mean),
    );
    bound_checks.push((
        "coverage_sweep",
        bound_violations(&res, coverage_sweep.episodes),
        coverage_in_range(&res),
    ));

    let curves = vec![
        DeltaCurve::calibrated("linear", 1.0, 0.001, 0.01),
        DeltaCurve::calibrated("cubic", 3.0, 0.001, 0.01),
    ];
    let shift_rate = ExperimentSpec {
        algorithms: vec![oo],
        axis: SweepAxis::DeltaOfTau {
            taus: vec![0.01, 0.1, 0.5],
            curves,
        },
        ..shift_sweep.clone()
    };
    let res = run_spec(&shift_rate).unwrap();
    let lin = stat(&res, oo, "delta_of_tau:linear", 0.5);
    let cub = stat(&res, oo, "delta_of_tau:cubic", 0.5);
    rep.check(
        "trend/shift_rate: at tau=0.5 the cubic family's O-O regret exceeds the linear family's by >= 25%",
        cub.mean >= 1.25 * lin.mean,
        format!("cubic {:.3}, linear {:.3}", cub.mean, lin.mean),
    );
    for t in [0.01, 0.1] {
        let (l, c) = (
            stat(&res, oo, "delta_of_tau:linear", t),
            stat(&res, oo, "delta_of_tau:cubic", t),
        );
        rep.info(format!(
            "shift_rate at tau={t}: linear {:.3}, cubic {:.3}",
            l.mean, c.mean
        ));
    }
    bound_checks.push((
        "shift_rate",
        bound_violations(&res, shift_rate.episodes),
        coverage_in_range(&res),
    ));

    let total: usize = bound_checks.iter().map(|(_, (n, _, _), _)| n).sum();
    let bad: usize = bound_checks.iter().map(|(_, (_, b, _), _)| b).sum();
    let worst = bound_checks
        .iter()
        .map(|(_, (_, _, w), _)| *w)
        .fold(0.0, f64::max);
    rep.check(
        "trend/regret <= 20 x order-level regret bound on every (config, seed)",
        bad == 0,
        format!("{bad} of {total} curves exceed; max regret/(20 x bound) = {worst:.2e}"),
    );
    let cov_ok = bound_checks.iter().all(|(_, _, c)| *c);
    rep.check(
        "invariant/tau_hat range on every trend offline summary",
        cov_ok,
        format!("checked {} configs", bound_checks.len()),
    );

    rep.runtime("trend/runtime", start, Duration::from_secs(15 * 60));
}

fn main() {
    let mut rep = Report {
        passed: 0,
        failed: Vec::new(),
    };
    oracle_suite(&mut rep);
    invariants(&mut rep);
    trends(&mut rep);
    let total = rep.passed + rep.failed.len();
    let _ = writeln!(
        std::io::stderr(),
        "acceptance: {}/{} criteria passed",
        rep.passed,
        total
    );
    if !rep.failed.is_empty() {
        let _ = writeln!(std::io::stderr(), "failed: {}", rep.failed.join("; "));
        std::process::exit(1);
    }
}
