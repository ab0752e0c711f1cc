//! Command-line front end: `gen-env`, `run`, `sweep`, `diag` and `bound`.
//!
//! Exit codes: 0 success, 2 invalid spec or arguments, 3 numerical failure,
//! 1 for I/O problems.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agents::{AgentConfig, Algorithm};
use crate::diagnostics::{
    admissible_grid, informative_check, log_space, regret_bound_terms, BoundInputs,
    InformativeConstants,
};
use crate::envfile::{fmt_f64, EnvFile};
use crate::envgen::generate_env_pair;
use crate::harness::{
    default_bonus_grid, run_spec, write_aggregate, write_csv, BonusScale, BonusScales, DeltaCurve,
    DesignKind, EnvSpec, ExperimentSpec, HarnessError, ShiftBound, SweepAxis,
};
use crate::offline::{
    accumulate_offline, coverage_p0, coverage_p0_best_stage, generate_offline,
    learnability_certificate, tau_lower_bounds, visitation, AuxDesign, BehaviorPolicy,
    CoverageInputs,
};

#[derive(Debug, Parser)]
#[command(
    name = "oorl",
    version,
    about = "Offline-to-online RL in linear mixture MDPs under environment shift"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an online/offline environment pair and write it to a file.
    GenEnv(GenEnvArgs),
    /// Run the experiment described by a spec file.
    Run(RunArgs),
    /// Run a sweep described by command-line flags.
    Sweep(SweepArgs),
    /// Offline coverage diagnostics for an environment file.
    Diag(DiagArgs),
    /// Regret-bound terms over a (τ, Δ) grid, as CSV.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
pub struct GenEnvArgs {
    #[arg(long, default_value_t = 5)]
    pub states: usize,
    #[arg(long, default_value_t = 10)]
    pub actions: usize,
    #[arg(long, default_value_t = 3)]
    pub horizon: usize,
    /// Per-row ℓ₁ shift of the offline kernel, in [0, 2].
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Per-episode curve CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-point mean/std table.
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisKind {
    None,
    Delta,
    MOff,
    Tau,
    DeltaOfTau,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "delta")]
    pub axis: AxisKind,
    /// Axis values (τ values for delta-of-tau).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub values: Vec<f64>,
    /// delta-of-tau curves as `label:exponent`.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub curves: Vec<String>,
    #[arg(long, default_value_t = 0.001)]
    pub delta_ref: f64,
    #[arg(long, default_value_t = 0.01)]
    pub tau_ref: f64,
    #[arg(long, default_value_t = 5)]
    pub states: usize,
    #[arg(long, default_value_t = 10)]
    pub actions: usize,
    #[arg(long, default_value_t = 3)]
    pub horizon: usize,
    #[arg(long, default_value_t = 1)]
    pub env_seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 20_000)]
    pub m_off: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_value = "oo_ucrl_vtr,ucrl,complete")]
    pub algorithms: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 7)]
    pub base_seed: u64,
    /// Fixed bonus scale for every algorithm; omit to select scales by grid search.
    #[arg(long)]
    pub bonus_scale: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub tuning_repeats: usize,
    /// Use the √(SA)·Δ bound instead of the realized parameter shift.
    #[arg(long)]
    pub l1_shift_bound: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DiagArgs {
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub m_off: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Confidence level of the coverage lower bounds.
    #[arg(long, default_value_t = 0.05)]
    pub confidence: f64,
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, default_value_t = 5.0)]
    pub d: f64,
    #[arg(long, default_value_t = 3.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e3)]
    pub episodes: f64,
    #[arg(long, default_value_t = 10.0)]
    pub param_bound: f64,
    #[arg(long, default_value_t = 1.5e11)]
    pub m_off: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta_max: f64,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SweepArgs {
    pub fn to_spec(&self) -> Result<ExperimentSpec, HarnessError> {
        let mut problems = Vec::new();
        let algorithms = self
            .algorithms
            .iter()
            .filter_map(|a| a.parse::<Algorithm>().map_err(|e| problems.push(e)).ok())
            .collect();
        let axis = match self.axis {
            AxisKind::None => SweepAxis::None,
            AxisKind::Delta => SweepAxis::Delta(self.values.clone()),
            AxisKind::Tau => SweepAxis::Tau(self.values.clone()),
            AxisKind::MOff => {
                let mut v = Vec::new();
                for &x in &self.values {
                    if x >= 0.0 && x.fract() == 0.0 {
                        v.push(x as usize);
                    } else {
                        problems.push(format!(
                            "m_off values must be non-negative integers, got {x}"
                        ));
                    }
                }
                SweepAxis::Moff(v)
            }
            AxisKind::DeltaOfTau => {
                let labels = if self.curves.is_empty() {
                    vec!["linear:1".into(), "quadratic:2".into(), "cubic:3".into()]
                } else {
                    self.curves.clone()
                };
                let mut curves = Vec::new();
                for c in &labels {
                    match c.split_once(':').map(|(l, e)| (l, e.parse::<f64>())) {
                        Some((l, Ok(e))) => {
                            curves.push(DeltaCurve::calibrated(l, e, self.delta_ref, self.tau_ref))
                        }
                        _ => problems.push(format!("bad curve `{c}` (expected label:exponent)")),
                    }
                }
                SweepAxis::DeltaOfTau {
                    taus: self.values.clone(),
                    curves,
                }
            }
        };
        let spec = ExperimentSpec {
            env: EnvSpec {
                states: self.states,
                actions: self.actions,
                horizon: self.horizon,
                env_seed: self.env_seed,
            },
            axis,
            episodes: self.episodes,
            m_off: self.m_off,
            delta: self.delta,
            tau: self.tau,
            design: DesignKind::Deterministic,
            algorithms,
            repeats: self.repeats,
            base_seed: self.base_seed,
            bonus: match self.bonus_scale {
                Some(b) => BonusScale::Fixed(BonusScales::uniform(b)),
                None => BonusScale::GridSearch {
                    grid: default_bonus_grid(),
                    tuning_repeats: self.tuning_repeats,
                },
            },
            shift_bound: if self.l1_shift_bound {
                ShiftBound::L1Bound
            } else {
                ShiftBound::Realized
            },
            realized_regret: false,
        };
        problems.extend(spec.problems());
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(HarnessError::Spec(problems))
        }
    }
}

fn run_and_write(spec: &ExperimentSpec, output: &OutputArgs) -> Result<String, HarnessError> {
    let result = run_spec(spec)?;
    write_csv(&result.curves, &output.out, Some(spec))?;
    if let Some(path) = &output.aggregate {
        write_aggregate(&result.aggregates, path, Some(spec))?;
    }
    Ok(format!(
        "wrote {} curves to {} (bonus_scale = {}, complete {})\n",
        result.curves.len(),
        output.out.display(),
        result.bonus_scales.shared,
        result.bonus_scales.complete
    ))
}

fn gen_env(a: &GenEnvArgs) -> Result<String, HarnessError> {
    let mut problems = Vec::new();
    if a.states == 0 || a.actions == 0 || a.horizon == 0 {
        problems.push("states, actions and horizon must be positive".to_string());
    }
    if !(0.0..=2.0).contains(&a.delta) {
        problems.push(format!("delta must lie in [0, 2], got {}", a.delta));
    }
    if !problems.is_empty() {
        return Err(HarnessError::Spec(problems));
    }
    let pair = generate_env_pair(a.states, a.actions, a.horizon, a.delta, a.seed)
        .map_err(|e| HarnessError::Numerical(e.to_string()))?;
    let file = EnvFile::from_pair(&pair)?;
    file.write(&a.out)?;
    Ok(format!(
        "wrote {} (theta_shift_l2 = {})\n",
        a.out.display(),
        fmt_f64(pair.theta_shift_l2())
    ))
}

/// `key = value` record of the offline diagnostics.
pub fn diag_report(a: &DiagArgs) -> Result<String, HarnessError> {
    if !(a.confidence > 0.0 && a.confidence < 1.0) {
        return Err(HarnessError::Spec(vec![format!(
            "confidence must lie in (0, 1), got {}",
            a.confidence
        )]));
    }
    let num = |e: &dyn std::fmt::Display| HarnessError::Numerical(e.to_string());
    let file = EnvFile::read(&a.env)?;
    let pair = file.to_pair()?;
    let env = &pair.offline;
    let (n, m, h) = (env.num_states(), env.num_actions(), env.horizon());
    let cfg = AgentConfig::for_env(&pair.online, a.episodes);
    let behavior = BehaviorPolicy::UniformRandom;
    let data = generate_offline(env, &behavior, a.m_off, a.seed).map_err(|e| num(&e))?;
    let summary = accumulate_offline(
        env.phi(),
        &data,
        &AuxDesign::Deterministic,
        cfg.lambda,
        a.seed,
    )
    .map_err(|e| num(&e))?;
    let vis = visitation(env, &behavior).map_err(|e| num(&e))?;
    let p0 = coverage_p0(&vis);
    let p0_stage = coverage_p0_best_stage(&vis, h.saturating_sub(1).max(1));
    let probes = AuxDesign::basis_probes(n);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|s| (0..m).map(move |a| (s, a))).collect();
    let kappa = learnability_certificate(env.phi(), &probes, &pairs).map_err(|e| num(&e))?;
    let cov = |p0| {
        tau_lower_bounds(&CoverageInputs {
            p0,
            kappa,
            probes: probes.len(),
            dim: env.dim(),
            states: n,
            actions: m,
            m_off: a.m_off,
            delta: a.confidence,
        })
    };
    let bounds = cov(p0);
    let bounds_stage = cov(p0_stage);
    let tau_hat = summary.tau_hat.unwrap_or(f64::NAN);
    let x = BoundInputs {
        d: env.dim() as f64,
        horizon: h as f64,
        episodes: a.episodes as f64,
        param_bound: cfg.param_bound,
        delta_theta: pair.theta_shift_l2(),
        m_off: a.m_off as f64,
        tau: tau_hat,
    };
    let mut o = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(o, "{k} = {v}");
    };
    kv("m_off", a.m_off.to_string());
    kv("lambda", fmt_f64(summary.lambda));
    kv("tau_hat", fmt_f64(tau_hat));
    kv("lambda_min_reg", fmt_f64(summary.lambda_min_reg));
    kv("lambda_max_goff", fmt_f64(summary.lambda_max_goff));
    kv("kappa", fmt_f64(kappa));
    kv("p0", fmt_f64(p0));
    kv("p0_best_stage", fmt_f64(p0_stage));
    kv("tau_bound_stochastic", fmt_f64(bounds.stochastic));
    kv("tau_bound_deterministic", fmt_f64(bounds.deterministic));
    kv(
        "tau_bound_stochastic_best_stage",
        fmt_f64(bounds_stage.stochastic),
    );
    kv(
        "tau_bound_deterministic_best_stage",
        fmt_f64(bounds_stage.deterministic),
    );
    kv("delta_l1", fmt_f64(pair.delta_l1));
    kv("theta_shift_l2", fmt_f64(pair.theta_shift_l2()));
    let terms = regret_bound_terms(&x);
    kv("term_a", fmt_f64(terms.term_a));
    kv("term_b", fmt_f64(terms.term_b));
    if let Ok(r) = informative_check(&x, a.epsilon, InformativeConstants::default()) {
        kv("coverage_ratio", fmt_f64(r.coverage_ratio));
        kv("shift_ratio", fmt_f64(r.shift_ratio));
        kv("informative", r.informative.to_string());
    }
    Ok(o)
}

/// CSV with columns `tau,delta,term_a,term_b,informative` on a log-spaced grid.
pub fn bound_csv(a: &BoundArgs) -> Result<String, HarnessError> {
    let base = BoundInputs {
        d: a.d,
        horizon: a.horizon,
        episodes: a.episodes,
        param_bound: a.param_bound,
        delta_theta: 0.0,
        m_off: a.m_off,
        tau: a.tau_max,
    };
    let mut problems: Vec<String> = base
        .validate()
        .err()
        .map(|e| e.to_string())
        .into_iter()
        .collect();
    if !(a.tau_min > 0.0 && a.tau_min <= a.tau_max)
        || !(a.delta_min > 0.0 && a.delta_min <= a.delta_max)
    {
        problems.push("grid ranges must be positive and ordered".into());
    }
    if !(a.epsilon > 0.0 && a.epsilon <= 0.5) {
        problems.push(format!("epsilon must lie in (0, 1/2], got {}", a.epsilon));
    }
    if !problems.is_empty() {
        return Err(HarnessError::Spec(problems));
    }
    let grid = admissible_grid(
        &base,
        &log_space(a.tau_min, a.tau_max, a.points),
        &log_space(a.delta_min, a.delta_max, a.points),
        a.epsilon,
    );
    let mut o = String::from("tau,delta,term_a,term_b,informative\n");
    for p in grid {
        let _ = writeln!(
            o,
            "{},{},{},{},{}",
            fmt_f64(p.tau),
            fmt_f64(p.delta),
            fmt_f64(p.term_a),
            fmt_f64(p.term_b),
            p.informative
        );
    }
    Ok(o)
}

/// Executes a parsed command and returns its standard output.
pub fn execute(cli: &Cli) -> Result<String, HarnessError> {
    match &cli.command {
        Command::GenEnv(a) => gen_env(a),
        Command::Run(a) => run_and_write(&ExperimentSpec::read(&a.spec)?, &a.output),
        Command::Sweep(a) => run_and_write(&a.to_spec()?, &a.output),
        Command::Diag(a) => diag_report(a),
        Command::Bound(a) => {
            let csv = bound_csv(a)?;
            match &a.out {
                Some(p) => {
                    std::fs::write(p, csv)?;
                    Ok(String::new())
                }
                None => Ok(csv),
            }
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
