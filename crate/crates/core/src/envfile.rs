//! Plain-text environment files.
//!
//! One `key = value` pair per line; `#` starts a comment. Vectors are
//! whitespace-separated and floats are written with 17 significant digits, so a
//! write/read cycle reproduces every probability bit for bit.
//!
//! ```text
//! format = oorl-env-1
//! states = 2
//! actions = 1
//! horizon = 3
//! initial_state = 0
//! seed = 7
//! reward.0 = <r(0, a) for a in 0..A>
//! online.0.0 = <P(s' | 0, 0) for s' in 0..S>
//! offline.0.0 = <P_off(s' | 0, 0)>        (pairs only)
//! delta_l1 = <Δ>                           (pairs only)
//! theta_shift_l2 = <‖θ* − θ_off‖₂>          (written as metadata, ignored on read)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::envgen::EnvPair;
use crate::mdp::{tabular_embed, Kernel, LinearMixtureMdp, MdpError, RewardTable};

const FORMAT: &str = "oorl-env-1";

#[derive(Debug, Error)]
pub enum EnvFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("only tabular environments can be serialized")]
    NotTabular,
    #[error(transparent)]
    Model(#[from] MdpError),
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializable tabular environment: an online MDP and optionally its offline twin.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvFile {
    pub horizon: usize,
    pub initial_state: usize,
    pub seed: u64,
    pub reward: RewardTable,
    pub online: Kernel,
    pub offline: Option<Kernel>,
    pub delta_l1: Option<f64>,
    pub theta_shift_l2: Option<f64>,
}

impl EnvFile {
    pub fn from_mdp(mdp: &LinearMixtureMdp, seed: u64) -> Result<Self, EnvFileError> {
        if !mdp.phi().is_tabular() {
            return Err(EnvFileError::NotTabular);
        }
        Ok(Self {
            horizon: mdp.horizon(),
            initial_state: mdp.initial_state(),
            seed,
            reward: mdp.reward().clone(),
            online: mdp.kernel().clone(),
            offline: None,
            delta_l1: None,
            theta_shift_l2: None,
        })
    }

    pub fn from_pair(pair: &EnvPair) -> Result<Self, EnvFileError> {
        let mut file = Self::from_mdp(&pair.online, pair.seed)?;
        file.offline = Some(pair.offline.kernel().clone());
        file.delta_l1 = Some(pair.delta_l1);
        file.theta_shift_l2 = Some(pair.theta_shift_l2());
        Ok(file)
    }

    pub fn online_mdp(&self) -> Result<LinearMixtureMdp, EnvFileError> {
        Ok(tabular_embed(
            &self.online,
            &self.reward,
            self.horizon,
            self.initial_state,
        )?)
    }

    /// The stored pair; a file without an offline kernel yields a zero-shift pair.
    pub fn to_pair(&self) -> Result<EnvPair, EnvFileError> {
        let online = self.online_mdp()?;
        let offline_kernel = self.offline.as_ref().unwrap_or(&self.online);
        let offline = tabular_embed(
            offline_kernel,
            &self.reward,
            self.horizon,
            self.initial_state,
        )?;
        Ok(EnvPair::new(
            online,
            offline,
            self.delta_l1.unwrap_or(0.0),
            self.seed,
        )?)
    }

    pub fn to_text(&self) -> String {
        let (n, m) = (self.online.states(), self.online.actions());
        let join = |vals: &[f64]| {
            vals.iter()
                .map(|v| fmt_f64(*v))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        let _ = writeln!(out, "format = {FORMAT}");
        let _ = writeln!(out, "states = {n}");
        let _ = writeln!(out, "actions = {m}");
        let _ = writeln!(out, "horizon = {}", self.horizon);
        let _ = writeln!(out, "initial_state = {}", self.initial_state);
        let _ = writeln!(out, "seed = {}", self.seed);
        for s in 0..n {
            let _ = writeln!(
                out,
                "reward.{s} = {}",
                join(&self.reward.as_slice()[s * m..(s + 1) * m])
            );
        }
        let mut kernel_block = |name: &str, k: &Kernel| {
            for s in 0..n {
                for a in 0..m {
                    let _ = writeln!(out, "{name}.{s}.{a} = {}", join(k.row(s, a)));
                }
            }
        };
        kernel_block("online", &self.online);
        if let Some(off) = &self.offline {
            kernel_block("offline", off);
        }
        if let Some(d) = self.delta_l1 {
            let _ = writeln!(out, "delta_l1 = {}", fmt_f64(d));
        }
        if let Some(t) = self.theta_shift_l2 {
            let _ = writeln!(out, "# metadata\ntheta_shift_l2 = {}", fmt_f64(t));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, EnvFileError> {
        let kv = parse_key_values(text)?;
        let format = get(&kv, "format")?;
        if format != FORMAT {
            return Err(EnvFileError::Value {
                key: "format".into(),
                msg: format!("expected {FORMAT}, got {format}"),
            });
        }
        let n: usize = scalar(&kv, "states")?;
        let m: usize = scalar(&kv, "actions")?;
        let horizon = scalar(&kv, "horizon")?;
        let initial_state = scalar(&kv, "initial_state")?;
        let seed = scalar(&kv, "seed")?;
        let mut rewards = Vec::with_capacity(n * m);
        for s in 0..n {
            rewards.extend(floats(&kv, &format!("reward.{s}"), m)?);
        }
        let reward = RewardTable::new(n, m, rewards)?;
        let kernel = |name: &str| -> Result<Kernel, EnvFileError> {
            let mut probs = Vec::with_capacity(n * m * n);
            for s in 0..n {
                for a in 0..m {
                    probs.extend(floats(&kv, &format!("{name}.{s}.{a}"), n)?);
                }
            }
            Ok(Kernel::new(n, m, probs)?)
        };
        let online = kernel("online")?;
        let offline = if kv.contains_key("offline.0.0") {
            Some(kernel("offline")?)
        } else {
            None
        };
        let delta_l1 = kv
            .get("delta_l1")
            .map(|_| scalar(&kv, "delta_l1"))
            .transpose()?;
        let theta_shift_l2 = kv
            .get("theta_shift_l2")
            .map(|_| scalar(&kv, "theta_shift_l2"))
            .transpose()?;
        let expected_keys = 6
            + n
            + n * m * (1 + offline.is_some() as usize)
            + delta_l1.is_some() as usize
            + theta_shift_l2.is_some() as usize;
        if kv.len() != expected_keys {
            let known = |k: &str| {
                [
                    "format",
                    "states",
                    "actions",
                    "horizon",
                    "initial_state",
                    "seed",
                    "delta_l1",
                    "theta_shift_l2",
                ]
                .contains(&k)
                    || k.starts_with("reward.")
                    || k.starts_with("online.")
                    || k.starts_with("offline.")
            };
            let extra = kv
                .keys()
                .find(|k| !known(k))
                .cloned()
                .unwrap_or_else(|| "<index out of range>".into());
            return Err(EnvFileError::Value {
                key: extra,
                msg: "unexpected key".into(),
            });
        }
        Ok(Self {
            horizon,
            initial_state,
            seed,
            reward,
            online,
            offline,
            delta_l1,
            theta_shift_l2,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), EnvFileError> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn read(path: &Path) -> Result<Self, EnvFileError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Parses `key = value` lines, skipping blanks and `#` comments. Duplicate keys are errors.
pub(crate) fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, EnvFileError> {
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(EnvFileError::Syntax {
                line: i + 1,
                msg: "expected `key = value`".into(),
            });
        };
        let key = k.trim().to_string();
        if kv.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(EnvFileError::Syntax {
                line: i + 1,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(kv)
}

fn get<'a>(kv: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str, EnvFileError> {
    kv.get(key)
        .map(String::as_str)
        .ok_or_else(|| EnvFileError::Missing(key.into()))
}

fn scalar<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T, EnvFileError>
where
    T::Err: std::fmt::Display,
{
    get(kv, key)?
        .parse()
        .map_err(|e: T::Err| EnvFileError::Value {
            key: key.into(),
            msg: e.to_string(),
        })
}

fn floats(kv: &BTreeMap<String, String>, key: &str, len: usize) -> Result<Vec<f64>, EnvFileError> {
    let vals = get(kv, key)?
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| EnvFileError::Value {
            key: key.into(),
            msg: e.to_string(),
        })?;
    if vals.len() != len {
        return Err(EnvFileError::Value {
            key: key.into(),
            msg: format!("expected {len} numbers, got {}", vals.len()),
        });
    }
    Ok(vals)
}
