//! Plain-text `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agent::{apply_hyper_override, ColHyperparams};
use crate::baselines::{BcConfig, Method, OuNoise};
use crate::error::{Error, Result};
use crate::lander::EnvKind;
use crate::replay::DEFAULT_AGENT_CAPACITY;
use crate::training::PerConfig;

/// Name of the resolved config copy written into every run directory.
pub const FROZEN_CONFIG: &str = "config.txt";

/// Splits `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Returns `(line number, key, value)` triples in file order.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        out.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub env: EnvKind,
    pub seeds: Vec<u64>,
    pub total_env_steps: usize,
    pub demo_path: Option<PathBuf>,
    /// Use only the first this-many demonstration trajectories.
    pub demo_episodes: Option<usize>,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub bc_eval_episodes: usize,
    /// Periodic checkpoint cadence in env steps; 0 keeps only the final one.
    pub checkpoint_interval: usize,
    pub output_dir: PathBuf,
    pub hyper: ColHyperparams,
    pub agent_capacity: usize,
    pub per: PerConfig,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub bc: BcConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ou = OuNoise::default();
        ExperimentConfig {
            method: Method::Col,
            env: EnvKind::Dense,
            seeds: vec![1, 2, 3],
            total_env_steps: 300_000,
            demo_path: None,
            demo_episodes: None,
            eval_interval: 5_000,
            eval_episodes: 10,
            bc_eval_episodes: 100,
            checkpoint_interval: 0,
            output_dir: PathBuf::from("runs"),
            hyper: ColHyperparams::default(),
            agent_capacity: DEFAULT_AGENT_CAPACITY,
            per: PerConfig::default(),
            ou_theta: ou.theta,
            ou_sigma: ou.sigma,
            bc: BcConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str_at(&text, path)
    }

    pub fn from_str_at(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (line, key, value) in parse_key_values(text, path)? {
            cfg.set(&key, &value).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override such as those given with `--set`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override must look like key=value, got {pair:?}")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "method" => self.method = value.parse()?,
            "env" => self.env = value.parse()?,
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| parse::<u64>(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "total_env_steps" => self.total_env_steps = parse(key, value)?,
            "demo_path" => self.demo_path = (!value.is_empty()).then(|| PathBuf::from(value)),
            "demo_episodes" => {
                self.demo_episodes = if value.is_empty() || value == "all" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "eval_interval" => self.eval_interval = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "bc_eval_episodes" => self.bc_eval_episodes = parse(key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "agent_capacity" => self.agent_capacity = parse(key, value)?,
            "per_alpha" => self.per.alpha = parse(key, value)?,
            "per_beta_start" => self.per.beta_start = parse(key, value)?,
            "per_beta_end" => self.per.beta_end = parse(key, value)?,
            "per_epsilon" => self.per.epsilon = parse(key, value)?,
            "ou_theta" => self.ou_theta = parse(key, value)?,
            "ou_sigma" => self.ou_sigma = parse(key, value)?,
            "bc_epochs" => self.bc.epochs = parse(key, value)?,
            "bc_batch_size" => self.bc.batch_size = parse(key, value)?,
            "bc_lr" => self.bc.lr = parse(key, value)?,
            "train_steps" => {
                return Err(Error::Config(
                    "train_steps is derived from total_env_steps / collect_steps; set total_env_steps".into(),
                ))
            }
            other => apply_hyper_override(&mut self.hyper, other, value)?,
        }
        Ok(())
    }

    /// Update iterations needed to cover `total_env_steps`.
    pub fn iterations(&self) -> usize {
        self.total_env_steps.div_ceil(self.hyper.collect_steps.max(1))
    }

    /// Hyperparameters with `train_steps` resolved.
    pub fn resolved_hyper(&self) -> ColHyperparams {
        let mut h = self.hyper.clone();
        h.train_steps = self.iterations().max(1);
        h
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.total_env_steps == 0 && self.method != Method::Bc {
            return Err(Error::Config("total_env_steps must be positive".into()));
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 || self.bc_eval_episodes == 0 {
            return Err(Error::Config("eval_interval, eval_episodes and bc_eval_episodes must be positive".into()));
        }
        if self.agent_capacity == 0 {
            return Err(Error::Config("agent_capacity must be positive".into()));
        }
        if !(self.per.alpha >= 0.0) || !(0.0..=1.0).contains(&self.per.beta_start) || !(0.0..=1.0).contains(&self.per.beta_end) {
            return Err(Error::Config("per_alpha must be >= 0 and per_beta_* within [0, 1]".into()));
        }
        if !(self.per.epsilon > 0.0) {
            return Err(Error::Config("per_epsilon must be positive".into()));
        }
        if !(self.ou_theta >= 0.0) || !(self.ou_sigma >= 0.0) {
            return Err(Error::Config("ou_theta and ou_sigma must be non-negative".into()));
        }
        if self.method.needs_demos() && self.demo_path.is_none() {
            return Err(Error::Config(format!("method {} needs demo_path", self.method)));
        }
        self.resolved_hyper().validate()
    }

    /// The resolved configuration as a `key = value` document that
    /// [`ExperimentConfig::from_file`] reads back to an equal value.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let h = &self.hyper;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("method", self.method.to_string());
        kv("env", self.env.to_string());
        kv("seeds", seeds.join(","));
        kv("total_env_steps", self.total_env_steps.to_string());
        kv(
            "demo_path",
            self.demo_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        kv(
            "demo_episodes",
            self.demo_episodes.map_or_else(|| "all".to_string(), |n| n.to_string()),
        );
        kv("eval_interval", self.eval_interval.to_string());
        kv("eval_episodes", self.eval_episodes.to_string());
        kv("bc_eval_episodes", self.bc_eval_episodes.to_string());
        kv("checkpoint_interval", self.checkpoint_interval.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("agent_capacity", self.agent_capacity.to_string());
        kv("per_alpha", self.per.alpha.to_string());
        kv("per_beta_start", self.per.beta_start.to_string());
        kv("per_beta_end", self.per.beta_end.to_string());
        kv("per_epsilon", self.per.epsilon.to_string());
        kv("ou_theta", self.ou_theta.to_string());
        kv("ou_sigma", self.ou_sigma.to_string());
        kv("bc_epochs", self.bc.epochs.to_string());
        kv("bc_batch_size", self.bc.batch_size.to_string());
        kv("bc_lr", self.bc.lr.to_string());
        kv("lambda_bc", h.lambda_bc.to_string());
        kv("lambda_a", h.lambda_a.to_string());
        kv("lambda_q1", h.lambda_q1.to_string());
        kv("lambda_l2q", h.lambda_l2q.to_string());
        kv("lambda_l2pi", h.lambda_l2pi.to_string());
        kv("gamma", h.gamma.to_string());
        kv("tau", h.tau.to_string());
        kv("pretrain_steps", h.pretrain_steps.to_string());
        kv("collect_steps", h.collect_steps.to_string());
        kv("batch_size", h.batch_size.to_string());
        kv("actor_lr", h.actor_lr.to_string());
        kv("critic_lr", h.critic_lr.to_string());
        kv("critic_loss_action", h.critic_loss_action.to_string());
        s
    }
}
