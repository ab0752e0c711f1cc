//! Experiment specs, seeded sweeps and CSV output.
//!
//! # Spec files
//!
//! Plain `key = value` lines (`#` comments). Lists are whitespace separated.
//!
//! ```text
//! states = 5                 # |S|
//! actions = 10               # |A|
//! horizon = 3                # H
//! env_seed = 1
//! axis = delta               # delta | m_off | tau | delta_of_tau | none
//! values = 0 0.05 0.2 0.5 1  # axis values (τ values for delta_of_tau)
//! curves = linear:1 cubic:3  # delta_of_tau only: label:exponent[:coefficient]
//! delta_ref = 0.001          # delta_of_tau only: shared Δ at τ = tau_ref
//! tau_ref = 0.01
//! episodes = 1000            # K
//! m_off = 20000
//! delta = 0.05               # per-row ℓ₁ shift when it is not the axis
//! tau = 1                    # optional τ-control target when it is not the axis
//! design = deterministic     # deterministic | stochastic | constant
//! algorithms = oo_ucrl_vtr ucrl complete
//! repeats = 20
//! base_seed = 7
//! bonus_scale = grid         # a number in [0, 1], or `grid`
//! complete_bonus_scale = 0.05 # optional with a number above; defaults to it
//! bonus_grid = 0 0.01 …      # candidates for `grid` (default 0, 0.01, …, 0.1, 0.2, …, 1)
//! tuning_repeats = 4
//! shift_bound = realized     # realized | l1_bound
//! realized_regret = false
//! ```
//!
//! # Seeds
//!
//! Repeat `r` uses `run_seed = mix_seed(base_seed, r)` at every axis point, so
//! axis points are compared under common random numbers. The offline data and
//! the auxiliary design draw from `mix_seed(run_seed, 1)`; the online phase
//! draws from `run_seed`. The environment depends only on `env_seed` (and Δ).
//!
//! # CSV
//!
//! `# config:` lines echo the canonical spec, `# config-hash:` is its SHA-256,
//! then the header `algorithm,axis_name,axis_value,seed,episode,cum_regret`.
//! Rows are sorted by algorithm, axis name, axis value, seed and episode; floats
//! carry 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{run_agent, AgentConfig, Algorithm, NoHook};
use crate::envfile::{fmt_f64, parse_key_values, EnvFileError};
use crate::envgen::{generate_env_pair, EnvPair};
use crate::offline::{
    accumulate_offline, generate_offline, AuxDesign, BehaviorPolicy, OfflineSummary,
};
use crate::rng::mix_seed;

pub const CSV_HEADER: &str = "algorithm,axis_name,axis_value,seed,episode,cum_regret";
pub const AGGREGATE_HEADER: &str = "algorithm,axis_name,axis_value,n,mean_final,std_final";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("spec validation failed:\n  {}", .0.join("\n  "))]
    Spec(Vec<String>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

impl HarnessError {
    /// Process exit code: 2 for spec errors, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Spec(_) => 2,
            HarnessError::Numerical(_) => 3,
            _ => 1,
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Numerical(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub env_seed: u64,
}

/// One `Δ(τ) = coefficient · τ^exponent` family.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaCurve {
    pub label: String,
    pub coefficient: f64,
    pub exponent: f64,
}

impl DeltaCurve {
    /// Family through `(tau_ref, delta_ref)`.
    pub fn calibrated(label: &str, exponent: f64, delta_ref: f64, tau_ref: f64) -> Self {
        Self {
            label: label.into(),
            coefficient: delta_ref / tau_ref.powf(exponent),
            exponent,
        }
    }

    /// `Δ(τ)`, capped at the largest ℓ₁ distance 2.
    pub fn delta(&self, tau: f64) -> f64 {
        (self.coefficient * tau.powf(self.exponent)).min(2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    None,
    Delta(Vec<f64>),
    Moff(Vec<usize>),
    Tau(Vec<f64>),
    DeltaOfTau {
        taus: Vec<f64>,
        curves: Vec<DeltaCurve>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Deterministic,
    /// Rademacher combinations of the standard-basis probes.
    Stochastic,
    /// All-ones `Ṽ`.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BonusScale {
    Fixed(BonusScales),
    /// Grid value minimizing mean final regret on held-out tuning seeds at Δ = 0.
    /// UCRL's regret picks the scale shared by UCRL and O-O; COMPLETE is tuned
    /// on its own regret. Ties go to the middle of the tied values.
    GridSearch {
        grid: Vec<f64>,
        tuning_repeats: usize,
    },
}

/// Bonus scales resolved for a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusScales {
    /// UCRL and O-O UCRL-VTR.
    pub shared: f64,
    pub complete: f64,
}

impl BonusScales {
    pub fn uniform(b_s: f64) -> Self {
        Self {
            shared: b_s,
            complete: b_s,
        }
    }

    pub fn for_algorithm(&self, algorithm: Algorithm) -> f64 {
        match algorithm {
            Algorithm::Complete => self.complete,
            Algorithm::OoUcrlVtr | Algorithm::Ucrl => self.shared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftBound {
    /// Exact `‖θ* − θ^off,*‖₂` of the generated pair.
    Realized,
    /// `sqrt(S·A) · Δ`.
    L1Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub env: EnvSpec,
    pub axis: SweepAxis,
    pub episodes: usize,
    pub m_off: usize,
    pub delta: f64,
    pub tau: Option<f64>,
    pub design: DesignKind,
    pub algorithms: Vec<Algorithm>,
    pub repeats: usize,
    pub base_seed: u64,
    pub bonus: BonusScale,
    pub shift_bound: ShiftBound,
    pub realized_regret: bool,
}

/// `0, 0.01, …, 0.1, 0.2, …, 1`: fine where the bonus starts to saturate the clip.
pub fn default_bonus_grid() -> Vec<f64> {
    (0..=10)
        .map(|i| i as f64 / 100.0)
        .chain((2..=10).map(|i| i as f64 / 10.0))
        .collect()
}

impl ExperimentSpec {
    /// Desk-scale standard setting: S=5, A=10, H=3, K=1000, M_off=2·10⁴, 20 repeats.
    pub fn standard(axis: SweepAxis) -> Self {
        Self {
            env: EnvSpec {
                states: 5,
                actions: 10,
                horizon: 3,
                env_seed: 1,
            },
            axis,
            episodes: 1000,
            m_off: 20_000,
            delta: 0.05,
            tau: None,
            design: DesignKind::Deterministic,
            algorithms: Algorithm::ALL.to_vec(),
            repeats: 20,
            base_seed: 7,
            bonus: BonusScale::GridSearch {
                grid: default_bonus_grid(),
                tuning_repeats: 4,
            },
            shift_bound: ShiftBound::Realized,
            realized_regret: false,
        }
    }

    /// Every validation problem, in one list.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.env.states == 0 || self.env.actions == 0 || self.env.horizon == 0 {
            p.push("states, actions and horizon must be positive".to_string());
        }
        if self.repeats == 0 {
            p.push("repeats must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            p.push("at least one algorithm is required".into());
        }
        let mut sorted = self.algorithms.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.algorithms.len() {
            p.push("algorithms must not repeat".into());
        }
        if !(0.0..=2.0).contains(&self.delta) {
            p.push(format!("delta must lie in [0, 2], got {}", self.delta));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t <= 1.0) {
                p.push(format!("tau must lie in (0, 1], got {t}"));
            }
        }
        match &self.bonus {
            BonusScale::Fixed(b) => {
                for v in [b.shared, b.complete] {
                    if !(0.0..=1.0).contains(&v) {
                        p.push(format!("bonus_scale must lie in [0, 1], got {v}"));
                    }
                }
            }
            BonusScale::GridSearch {
                grid,
                tuning_repeats,
            } => {
                if grid.is_empty() || grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
                    p.push("bonus_grid must be a non-empty list of values in [0, 1]".into());
                }
                if *tuning_repeats == 0 {
                    p.push("tuning_repeats must be at least 1".into());
                }
            }
        }
        match &self.axis {
            SweepAxis::None => {}
            SweepAxis::Delta(v) => {
                if v.is_empty() || v.iter().any(|d| !(0.0..=2.0).contains(d)) {
                    p.push("delta axis values must be a non-empty list in [0, 2]".into());
                }
            }
            SweepAxis::Moff(v) => {
                if v.is_empty() {
                    p.push("m_off axis needs at least one value".into());
                }
            }
            SweepAxis::Tau(v) => {
                if v.is_empty() || v.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
                    p.push("tau axis values must be a non-empty list in (0, 1]".into());
                }
            }
            SweepAxis::DeltaOfTau { taus, curves } => {
                if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
                    p.push("delta_of_tau values must be a non-empty list in (0, 1]".into());
                }
                if curves.is_empty() {
                    p.push("delta_of_tau needs at least one curve".into());
                }
                if curves
                    .iter()
                    .any(|c| !(c.coefficient >= 0.0) || !c.exponent.is_finite())
                {
                    p.push("curve coefficients must be non-negative and exponents finite".into());
                }
            }
        }
        let needs_offline = self.algorithms.iter().any(|a| a.uses_offline_data());
        let m_off_axis = matches!(self.axis, SweepAxis::Moff(_));
        if needs_offline && self.m_off == 0 && !m_off_axis && self.tau.is_some() {
            p.push("tau control needs offline data (m_off > 0)".into());
        }
        p
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Spec(p))
        }
    }

    /// Axis points as `(axis_name, axis_value, Δ, M_off, τ)`.
    pub fn points(&self) -> Vec<AxisPoint> {
        let base = AxisPoint {
            axis_name: "none".into(),
            axis_value: 0.0,
            delta: self.delta,
            m_off: self.m_off,
            tau: self.tau,
        };
        match &self.axis {
            SweepAxis::None => vec![base],
            SweepAxis::Delta(v) => v
                .iter()
                .map(|&d| AxisPoint {
                    axis_name: "delta".into(),
                    axis_value: d,
                    delta: d,
                    ..base.clone()
                })
                .collect(),
            SweepAxis::Moff(v) => v
                .iter()
                .map(|&m| AxisPoint {
                    axis_name: "m_off".into(),
                    axis_value: m as f64,
                    m_off: m,
                    ..base.clone()
                })
                .collect(),
            SweepAxis::Tau(v) => v
                .iter()
                .map(|&t| AxisPoint {
                    axis_name: "tau".into(),
                    axis_value: t,
                    tau: Some(t),
                    ..base.clone()
                })
                .collect(),
            SweepAxis::DeltaOfTau { taus, curves } => curves
                .iter()
                .flat_map(|c| {
                    let base = base.clone();
                    taus.iter().map(move |&t| AxisPoint {
                        axis_name: format!("delta_of_tau:{}", c.label),
                        axis_value: t,
                        delta: c.delta(t),
                        tau: Some(t),
                        ..base.clone()
                    })
                })
                .collect(),
        }
    }

    /// Canonical `key = value` rendering; parsing it returns an equal spec.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| short(*x)).collect::<Vec<_>>().join(" ");
        let mut o = String::new();
        let _ = writeln!(o, "states = {}", self.env.states);
        let _ = writeln!(o, "actions = {}", self.env.actions);
        let _ = writeln!(o, "horizon = {}", self.env.horizon);
        let _ = writeln!(o, "env_seed = {}", self.env.env_seed);
        match &self.axis {
            SweepAxis::None => {
                let _ = writeln!(o, "axis = none");
            }
            SweepAxis::Delta(v) => {
                let _ = writeln!(o, "axis = delta\nvalues = {}", list(v));
            }
            SweepAxis::Moff(v) => {
                let vals: Vec<String> = v.iter().map(|m| m.to_string()).collect();
                let _ = writeln!(o, "axis = m_off\nvalues = {}", vals.join(" "));
            }
            SweepAxis::Tau(v) => {
                let _ = writeln!(o, "axis = tau\nvalues = {}", list(v));
            }
            SweepAxis::DeltaOfTau { taus, curves } => {
                let cs: Vec<String> = curves
                    .iter()
                    .map(|c| format!("{}:{}:{}", c.label, short(c.exponent), short(c.coefficient)))
                    .collect();
                let _ = writeln!(
                    o,
                    "axis = delta_of_tau\nvalues = {}\ncurves = {}",
                    list(taus),
                    cs.join(" ")
                );
            }
        }
        let _ = writeln!(o, "episodes = {}", self.episodes);
        let _ = writeln!(o, "m_off = {}", self.m_off);
        let _ = writeln!(o, "delta = {}", short(self.delta));
        if let Some(t) = self.tau {
            let _ = writeln!(o, "tau = {}", short(t));
        }
        let design = match self.design {
            DesignKind::Deterministic => "deterministic",
            DesignKind::Stochastic => "stochastic",
            DesignKind::Constant => "constant",
        };
        let _ = writeln!(o, "design = {design}");
        let algs: Vec<&str> = self.algorithms.iter().map(|a| a.label()).collect();
        let _ = writeln!(o, "algorithms = {}", algs.join(" "));
        let _ = writeln!(o, "repeats = {}", self.repeats);
        let _ = writeln!(o, "base_seed = {}", self.base_seed);
        match &self.bonus {
            BonusScale::Fixed(b) => {
                let _ = writeln!(o, "bonus_scale = {}", short(b.shared));
                if b.complete != b.shared {
                    let _ = writeln!(o, "complete_bonus_scale = {}", short(b.complete));
                }
            }
            BonusScale::GridSearch {
                grid,
                tuning_repeats,
            } => {
                let _ = writeln!(
                    o,
                    "bonus_scale = grid\nbonus_grid = {}\ntuning_repeats = {tuning_repeats}",
                    list(grid)
                );
            }
        }
        let shift = match self.shift_bound {
            ShiftBound::Realized => "realized",
            ShiftBound::L1Bound => "l1_bound",
        };
        let _ = writeln!(o, "shift_bound = {shift}");
        let _ = writeln!(o, "realized_regret = {}", self.realized_regret);
        o
    }

    /// SHA-256 of [`ExperimentSpec::to_text`].
    pub fn config_hash(&self) -> String {
        hex(&Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let kv = parse_key_values(text).map_err(|e| HarnessError::Spec(vec![e.to_string()]))?;
        let mut p = SpecParser {
            kv,
            problems: Vec::new(),
        };
        let env = EnvSpec {
            states: p.num("states", Some(5)),
            actions: p.num("actions", Some(10)),
            horizon: p.num("horizon", Some(3)),
            env_seed: p.num("env_seed", Some(1)),
        };
        let axis_name = p.take("axis").unwrap_or_else(|| "none".into());
        let axis = match axis_name.as_str() {
            "none" => SweepAxis::None,
            "delta" => SweepAxis::Delta(p.list("values")),
            "m_off" => SweepAxis::Moff(p.list("values")),
            "tau" => SweepAxis::Tau(p.list("values")),
            "delta_of_tau" => {
                let taus = p.list("values");
                let delta_ref: f64 = p.num("delta_ref", Some(0.001));
                let tau_ref: f64 = p.num("tau_ref", Some(0.01));
                let curves = p.curves(delta_ref, tau_ref);
                SweepAxis::DeltaOfTau { taus, curves }
            }
            other => {
                p.problems.push(format!(
                    "unknown axis `{other}` (expected none, delta, m_off, tau, delta_of_tau)"
                ));
                SweepAxis::None
            }
        };
        let episodes = p.num("episodes", Some(1000));
        let m_off = p.num("m_off", Some(20_000));
        let delta = p.num("delta", Some(0.05));
        let tau = p.take("tau").and_then(|v| p.parse_value::<f64>("tau", &v));
        let design = match p.take("design").as_deref().unwrap_or("deterministic") {
            "deterministic" => DesignKind::Deterministic,
            "stochastic" => DesignKind::Stochastic,
            "constant" => DesignKind::Constant,
            other => {
                p.problems.push(format!("unknown design `{other}`"));
                DesignKind::Deterministic
            }
        };
        let algorithms = match p.take("algorithms") {
            None => Algorithm::ALL.to_vec(),
            Some(v) => v
                .split_whitespace()
                .filter_map(|a| a.parse::<Algorithm>().map_err(|e| p.problems.push(e)).ok())
                .collect(),
        };
        let repeats = p.num("repeats", Some(20));
        let base_seed = p.num("base_seed", Some(7));
        let bonus = match p.take("bonus_scale").as_deref().unwrap_or("grid") {
            "grid" => {
                let grid = if p.kv.contains_key("bonus_grid") {
                    p.list("bonus_grid")
                } else {
                    default_bonus_grid()
                };
                BonusScale::GridSearch {
                    grid,
                    tuning_repeats: p.num("tuning_repeats", Some(4)),
                }
            }
            v => {
                let shared = p.parse_value("bonus_scale", v).unwrap_or(f64::NAN);
                let complete = p.num("complete_bonus_scale", Some(shared));
                BonusScale::Fixed(BonusScales { shared, complete })
            }
        };
        let shift_bound = match p.take("shift_bound").as_deref().unwrap_or("realized") {
            "realized" => ShiftBound::Realized,
            "l1_bound" => ShiftBound::L1Bound,
            other => {
                p.problems.push(format!("unknown shift_bound `{other}`"));
                ShiftBound::Realized
            }
        };
        let realized_regret = p.num("realized_regret", Some(false));
        for k in p.kv.keys() {
            p.problems.push(format!("unknown key `{k}`"));
        }
        let spec = Self {
            env,
            axis,
            episodes,
            m_off,
            delta,
            tau,
            design,
            algorithms,
            repeats,
            base_seed,
            bonus,
            shift_bound,
            realized_regret,
        };
        let mut problems = p.problems;
        problems.extend(spec.problems());
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(HarnessError::Spec(problems))
        }
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

struct SpecParser {
    kv: BTreeMap<String, String>,
    problems: Vec<String>,
}

impl SpecParser {
    fn take(&mut self, key: &str) -> Option<String> {
        self.kv.remove(key)
    }

    fn parse_value<T: std::str::FromStr>(&mut self, key: &str, v: &str) -> Option<T> {
        match v.parse() {
            Ok(x) => Some(x),
            Err(_) => {
                self.problems.push(format!("cannot parse `{key} = {v}`"));
                None
            }
        }
    }

    fn num<T: std::str::FromStr + Default>(&mut self, key: &str, default: Option<T>) -> T {
        match self.take(key) {
            Some(v) => self.parse_value(key, &v).unwrap_or_default(),
            None => default.unwrap_or_else(|| {
                self.problems.push(format!("missing key `{key}`"));
                T::default()
            }),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Vec<T> {
        let Some(v) = self.take(key) else {
            self.problems.push(format!("missing key `{key}`"));
            return Vec::new();
        };
        v.split_whitespace()
            .filter_map(|t| self.parse_value(key, t))
            .collect()
    }

    fn curves(&mut self, delta_ref: f64, tau_ref: f64) -> Vec<DeltaCurve> {
        let Some(v) = self.take("curves") else {
            return [("linear", 1.0), ("quadratic", 2.0), ("cubic", 3.0)]
                .iter()
                .map(|(l, e)| DeltaCurve::calibrated(l, *e, delta_ref, tau_ref))
                .collect();
        };
        let mut out = Vec::new();
        for item in v.split_whitespace() {
            let parts: Vec<&str> = item.split(':').collect();
            let exponent = parts.get(1).and_then(|e| e.parse::<f64>().ok());
            match (parts.len(), exponent) {
                (2, Some(e)) => out.push(DeltaCurve::calibrated(parts[0], e, delta_ref, tau_ref)),
                (3, Some(e)) => match parts[2].parse::<f64>() {
                    Ok(c) => out.push(DeltaCurve {
                        label: parts[0].into(),
                        coefficient: c,
                        exponent: e,
                    }),
                    Err(_) => self
                        .problems
                        .push(format!("bad curve coefficient in `{item}`")),
                },
                _ => self.problems.push(format!(
                    "bad curve `{item}` (expected label:exponent[:coefficient])"
                )),
            }
        }
        out
    }
}

/// Shortest text that parses back to the same `f64`.
fn short(v: f64) -> String {
    format!("{v}")
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisPoint {
    pub axis_name: String,
    pub axis_value: f64,
    /// Per-row ℓ₁ shift.
    pub delta: f64,
    pub m_off: usize,
    /// τ-control target, if any.
    pub tau: Option<f64>,
}

/// One regret curve as stored in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub algorithm: String,
    pub axis_name: String,
    pub axis_value: f64,
    pub seed: u64,
    pub cum_regret: Vec<f64>,
}

impl CurveRecord {
    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }
}

/// Per-job quantities that the CSV does not carry.
#[derive(Debug, Clone, PartialEq)]
pub struct JobInfo {
    pub axis_name: String,
    pub axis_value: f64,
    pub seed: u64,
    pub delta_l1: f64,
    pub m_off: usize,
    pub theta_shift_l2: f64,
    pub shift_bound: f64,
    pub tau_hat: Option<f64>,
    pub param_bound: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub algorithm: String,
    pub axis_name: String,
    pub axis_value: f64,
    pub n: usize,
    pub mean_final: f64,
    /// Sample standard deviation (`n − 1` denominator; 0 for a single curve).
    pub std_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub curves: Vec<CurveRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub jobs: Vec<JobInfo>,
    pub bonus_scales: BonusScales,
}

impl SweepResult {
    pub fn aggregate(
        &self,
        algorithm: Algorithm,
        axis_name: &str,
        axis_value: f64,
    ) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|r| {
            r.algorithm == algorithm.label()
                && r.axis_name == axis_name
                && r.axis_value == axis_value
        })
    }
}

/// Mean final regret of `algorithm` with bonus scale `b_s` over `seeds`.
pub fn tuning_regret(
    algorithm: Algorithm,
    pair: &EnvPair,
    summary: &OfflineSummary,
    episodes: usize,
    b_s: f64,
    seeds: &[u64],
) -> Result<f64, HarnessError> {
    let cfg = AgentConfig::for_env(&pair.online, episodes)
        .with_bonus_scale(b_s)
        .with_shift_bound(pair.theta_shift_l2());
    let total = seeds
        .iter()
        .map(|&seed| {
            run_agent(algorithm, pair, summary, &cfg, seed, &mut NoHook).map(|c| c.final_regret())
        })
        .sum::<Result<f64, _>>()
        .map_err(numerical)?;
    Ok(total / seeds.len().max(1) as f64)
}

/// Tuning seeds, disjoint in derivation from the evaluation seeds.
pub fn tuning_seeds(base_seed: u64, n: usize) -> Vec<u64> {
    (0..n as u64)
        .map(|i| mix_seed(base_seed ^ 0x7475_6e65, i))
        .collect()
}

/// Grid value with the lowest tuning regret. When several values tie (the
/// regret is often flat below the scale at which bonuses saturate the clip),
/// the middle of the tied set is taken.
fn grid_search(
    algorithm: Algorithm,
    pair: &EnvPair,
    summary: &OfflineSummary,
    episodes: usize,
    grid: &[f64],
    seeds: &[u64],
) -> Result<f64, HarnessError> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let scores: Vec<f64> = sorted
        .par_iter()
        .map(|&b| tuning_regret(algorithm, pair, summary, episodes, b, seeds))
        .collect::<Result<_, _>>()?;
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * best.abs().max(1.0);
    let tied: Vec<f64> = sorted
        .iter()
        .zip(&scores)
        .filter(|(_, r)| **r <= best + tol)
        .map(|(b, _)| *b)
        .collect();
    Ok(tied[(tied.len() - 1) / 2])
}

/// Resolves the bonus scales of `spec`, running the grid search when requested.
///
/// The search runs on the Δ = 0 pair of the spec's environment with the spec's
/// `M_off` and design (no τ control).
pub fn select_bonus_scales(spec: &ExperimentSpec) -> Result<BonusScales, HarnessError> {
    let (grid, tuning_repeats) = match &spec.bonus {
        BonusScale::Fixed(b) => return Ok(*b),
        BonusScale::GridSearch {
            grid,
            tuning_repeats,
        } => (grid, *tuning_repeats),
    };
    let env = &spec.env;
    let pair = generate_env_pair(env.states, env.actions, env.horizon, 0.0, env.env_seed)
        .map_err(numerical)?;
    let seeds = tuning_seeds(spec.base_seed, tuning_repeats);
    let lambda = AgentConfig::for_env(&pair.online, spec.episodes).lambda;
    let empty = OfflineSummary::empty(pair.online.dim(), lambda);
    let shared = grid_search(Algorithm::Ucrl, &pair, &empty, spec.episodes, grid, &seeds)?;
    let complete = if spec.algorithms.contains(&Algorithm::Complete) {
        let data_seed = mix_seed(spec.base_seed ^ 0x7475_6e65, u64::MAX);
        let data = generate_offline(
            &pair.offline,
            &BehaviorPolicy::UniformRandom,
            spec.m_off,
            data_seed,
        )
        .map_err(numerical)?;
        let summary = accumulate_offline(
            pair.offline.phi(),
            &data,
            &aux_design(spec, None),
            lambda,
            data_seed,
        )
        .map_err(numerical)?;
        grid_search(
            Algorithm::Complete,
            &pair,
            &summary,
            spec.episodes,
            grid,
            &seeds,
        )?
    } else {
        shared
    };
    Ok(BonusScales { shared, complete })
}

fn aux_design(spec: &ExperimentSpec, tau: Option<f64>) -> AuxDesign {
    let inner = match spec.design {
        DesignKind::Deterministic => AuxDesign::Deterministic,
        DesignKind::Stochastic => {
            AuxDesign::StochasticProbe(AuxDesign::basis_probes(spec.env.states))
        }
        DesignKind::Constant => AuxDesign::Constant(vec![1.0; spec.env.states]),
    };
    match tau {
        Some(t) => AuxDesign::tau_control(inner, t),
        None => inner,
    }
}

/// Runs every algorithm of `spec` at one axis point for one repeat.
pub fn run_job(
    spec: &ExperimentSpec,
    point: &AxisPoint,
    repeat: usize,
    bonus: BonusScales,
) -> Result<(Vec<CurveRecord>, JobInfo), HarnessError> {
    let env = &spec.env;
    let pair = generate_env_pair(
        env.states,
        env.actions,
        env.horizon,
        point.delta,
        env.env_seed,
    )
    .map_err(numerical)?;
    let run_seed = mix_seed(spec.base_seed, repeat as u64);
    let data_seed = mix_seed(run_seed, 1);
    let shift_bound = match spec.shift_bound {
        ShiftBound::Realized => pair.theta_shift_l2(),
        ShiftBound::L1Bound => ((env.states * env.actions) as f64).sqrt() * point.delta,
    };
    let mut cfg = AgentConfig::for_env(&pair.online, spec.episodes).with_shift_bound(shift_bound);
    cfg.realized_regret = spec.realized_regret;
    let needs_offline = spec.algorithms.iter().any(|a| a.uses_offline_data());
    let summary = if needs_offline {
        let data = generate_offline(
            &pair.offline,
            &BehaviorPolicy::UniformRandom,
            point.m_off,
            data_seed,
        )
        .map_err(numerical)?;
        accumulate_offline(
            pair.offline.phi(),
            &data,
            &aux_design(spec, point.tau),
            cfg.lambda,
            data_seed,
        )
        .map_err(numerical)?
    } else {
        OfflineSummary::empty(pair.online.dim(), cfg.lambda)
    };
    let mut curves = Vec::with_capacity(spec.algorithms.len());
    for &alg in &spec.algorithms {
        let cfg = cfg.clone().with_bonus_scale(bonus.for_algorithm(alg));
        let curve =
            run_agent(alg, &pair, &summary, &cfg, run_seed, &mut NoHook).map_err(numerical)?;
        curves.push(CurveRecord {
            algorithm: alg.label().into(),
            axis_name: point.axis_name.clone(),
            axis_value: point.axis_value,
            seed: run_seed,
            cum_regret: curve.cumulative,
        });
    }
    let info = JobInfo {
        axis_name: point.axis_name.clone(),
        axis_value: point.axis_value,
        seed: run_seed,
        delta_l1: point.delta,
        m_off: point.m_off,
        theta_shift_l2: pair.theta_shift_l2(),
        shift_bound,
        tau_hat: summary.tau_hat,
        param_bound: pair.online.param_bound(),
        dim: pair.online.dim(),
    };
    Ok((curves, info))
}

fn sort_curves(curves: &mut [CurveRecord]) {
    curves.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then_with(|| a.axis_name.cmp(&b.axis_name))
            .then_with(|| a.axis_value.total_cmp(&b.axis_value))
            .then_with(|| a.seed.cmp(&b.seed))
    });
}

/// Validates `spec`, resolves the bonus scales, then runs all axis-point × repeat jobs in parallel.
pub fn run_spec(spec: &ExperimentSpec) -> Result<SweepResult, HarnessError> {
    spec.validate()?;
    let bonus_scales = select_bonus_scales(spec)?;
    let jobs: Vec<(AxisPoint, usize)> = spec
        .points()
        .into_iter()
        .flat_map(|p| (0..spec.repeats).map(move |r| (p.clone(), r)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(p, r)| run_job(spec, p, *r, bonus_scales))
        .collect::<Result<_, _>>()?;
    let mut curves = Vec::new();
    let mut infos = Vec::new();
    for (c, i) in results {
        curves.extend(c);
        infos.push(i);
    }
    sort_curves(&mut curves);
    let aggregates = aggregate(&curves);
    Ok(SweepResult {
        curves,
        aggregates,
        jobs: infos,
        bonus_scales,
    })
}

/// Mean and sample standard deviation of the final regret per (algorithm, axis point).
pub fn aggregate(curves: &[CurveRecord]) -> Vec<AggregateRow> {
    let mut sorted: Vec<&CurveRecord> = curves.iter().collect();
    sorted.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then_with(|| a.axis_name.cmp(&b.axis_name))
            .then_with(|| a.axis_value.total_cmp(&b.axis_value))
    });
    let mut rows = Vec::new();
    for group in sorted.chunk_by(|a, b| {
        a.algorithm == b.algorithm && a.axis_name == b.axis_name && a.axis_value == b.axis_value
    }) {
        let finals: Vec<f64> = group.iter().map(|c| c.final_regret()).collect();
        let (mean, std) = mean_std(&finals);
        rows.push(AggregateRow {
            algorithm: group[0].algorithm.clone(),
            axis_name: group[0].axis_name.clone(),
            axis_value: group[0].axis_value,
            n: finals.len(),
            mean_final: mean,
            std_final: std,
        });
    }
    rows
}

/// Mean and sample standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() == 1 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn config_header(spec: Option<&ExperimentSpec>) -> String {
    let mut o = String::new();
    if let Some(spec) = spec {
        for line in spec.to_text().lines() {
            let _ = writeln!(o, "# config: {line}");
        }
        let _ = writeln!(o, "# config-hash: {}", spec.config_hash());
    }
    o
}

/// CSV text of `curves` (sorted copy), with the spec echo when given.
pub fn csv_text(curves: &[CurveRecord], spec: Option<&ExperimentSpec>) -> String {
    let mut sorted = curves.to_vec();
    sort_curves(&mut sorted);
    let mut o = config_header(spec);
    o.push_str(CSV_HEADER);
    o.push('\n');
    for c in &sorted {
        let prefix = format!(
            "{},{},{},{}",
            c.algorithm,
            c.axis_name,
            fmt_f64(c.axis_value),
            c.seed
        );
        for (k, r) in c.cum_regret.iter().enumerate() {
            let _ = writeln!(o, "{prefix},{},{}", k + 1, fmt_f64(*r));
        }
    }
    o
}

pub fn write_csv(
    curves: &[CurveRecord],
    path: &Path,
    spec: Option<&ExperimentSpec>,
) -> Result<(), HarnessError> {
    Ok(std::fs::write(path, csv_text(curves, spec))?)
}

pub fn aggregate_text(rows: &[AggregateRow], spec: Option<&ExperimentSpec>) -> String {
    let mut o = config_header(spec);
    o.push_str(AGGREGATE_HEADER);
    o.push('\n');
    for r in rows {
        let _ = writeln!(
            o,
            "{},{},{},{},{},{}",
            r.algorithm,
            r.axis_name,
            fmt_f64(r.axis_value),
            r.n,
            fmt_f64(r.mean_final),
            fmt_f64(r.std_final)
        );
    }
    o
}

pub fn write_aggregate(
    rows: &[AggregateRow],
    path: &Path,
    spec: Option<&ExperimentSpec>,
) -> Result<(), HarnessError> {
    Ok(std::fs::write(path, aggregate_text(rows, spec))?)
}

/// Parses a curve CSV back into records; `#` lines are skipped. Episodes of each
/// curve must be consecutive and start at 1.
pub fn parse_csv(text: &str) -> Result<Vec<CurveRecord>, HarnessError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((i, _)) => {
            return Err(HarnessError::Csv {
                line: i + 1,
                msg: format!("expected header `{CSV_HEADER}`"),
            })
        }
        None => {
            return Err(HarnessError::Csv {
                line: 0,
                msg: "missing header".into(),
            })
        }
    }
    let mut out: Vec<CurveRecord> = Vec::new();
    for (i, line) in lines {
        let bad = |msg: &str| HarnessError::Csv {
            line: i + 1,
            msg: msg.into(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let axis_value: f64 = f[2].parse().map_err(|_| bad("bad axis_value"))?;
        let seed: u64 = f[3].parse().map_err(|_| bad("bad seed"))?;
        let episode: usize = f[4].parse().map_err(|_| bad("bad episode"))?;
        let value: f64 = f[5].parse().map_err(|_| bad("bad cum_regret"))?;
        let same = out.last().is_some_and(|c| {
            c.algorithm == f[0]
                && c.axis_name == f[1]
                && c.axis_value.to_bits() == axis_value.to_bits()
                && c.seed == seed
        });
        if same {
            let c = out.last_mut().expect("checked");
            if episode != c.cum_regret.len() + 1 {
                return Err(bad("episodes must be consecutive"));
            }
            c.cum_regret.push(value);
        } else {
            if episode != 1 {
                return Err(bad("a curve must start at episode 1"));
            }
            out.push(CurveRecord {
                algorithm: f[0].into(),
                axis_name: f[1].into(),
                axis_value,
                seed,
                cum_regret: vec![value],
            });
        }
    }
    Ok(out)
}

impl From<EnvFileError> for HarnessError {
    fn from(e: EnvFileError) -> Self {
        match e {
            EnvFileError::Io(io) => HarnessError::Io(io),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}
