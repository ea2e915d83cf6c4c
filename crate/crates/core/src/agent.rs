//! The actor-critic learner and its combined loss.
//!
//! One update minimizes, over a batch,
//!
//! ```text
//! L = l_bc * L_bc(actor) + l_a * L_a(actor) + l_q1 * L_q1(critic)
//!   + l_l2q * |W_critic|^2 + l_l2pi * |W_actor|^2
//! ```
//!
//! with `L_bc = 1/2 mean_expert |pi(s) - a_E|^2`,
//! `L_q1 = 1/2 mean (y - Q(s, a))^2` against the frozen target
//! `y = r + gamma * Q'(s', pi'(s'))`, and `L_a = -mean Q(s, pi(s))`.
//! All gradients are taken at the current parameters, then the critic and
//! the actor each take one Adam step and both targets are Polyak-averaged.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lander::{Action, ACTION_DIM, OBS_DIM};
use crate::nn::{load_network, save_network, Activation, AdamState, ForwardCache, GradientSet, NetworkParams};
use crate::replay::{sample_uniform, ExpertBuffer, Source, Transition};

pub const CRITIC_INPUT: usize = OBS_DIM + ACTION_DIM;

/// Which action the critic is regressed at in the 1-step loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CriticLossAction {
    /// The action stored in the transition.
    #[default]
    Stored,
    /// The current policy's action `pi(s)`.
    Policy,
}

impl FromStr for CriticLossAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stored" => Ok(CriticLossAction::Stored),
            "policy" => Ok(CriticLossAction::Policy),
            other => Err(Error::Config(format!(
                "critic_loss_action must be `stored` or `policy`, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for CriticLossAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriticLossAction::Stored => "stored",
            CriticLossAction::Policy => "policy",
        })
    }
}

/// Weights of the five loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub bc: f64,
    pub actor_q: f64,
    pub q1: f64,
    pub l2_critic: f64,
    pub l2_actor: f64,
}

impl LossWeights {
    /// Standard DDPG: critic TD loss and actor Q loss only.
    pub const DDPG: LossWeights = LossWeights {
        bc: 0.0,
        actor_q: 1.0,
        q1: 1.0,
        l2_critic: 0.0,
        l2_actor: 0.0,
    };

    /// Plain regression onto demonstrated actions.
    pub const BC_ONLY: LossWeights = LossWeights {
        bc: 1.0,
        actor_q: 0.0,
        q1: 0.0,
        l2_critic: 0.0,
        l2_actor: 0.0,
    };

    fn trains_actor(&self) -> bool {
        self.bc != 0.0 || self.actor_q != 0.0 || self.l2_actor != 0.0
    }

    fn trains_critic(&self) -> bool {
        self.q1 != 0.0 || self.l2_critic != 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColHyperparams {
    pub lambda_bc: f64,
    pub lambda_a: f64,
    pub lambda_q1: f64,
    pub lambda_l2q: f64,
    pub lambda_l2pi: f64,
    pub gamma: f64,
    pub tau: f64,
    /// L
    pub pretrain_steps: usize,
    /// M
    pub collect_steps: usize,
    /// N
    pub batch_size: usize,
    /// T
    pub train_steps: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub critic_loss_action: CriticLossAction,
}

impl Default for ColHyperparams {
    fn default() -> Self {
        ColHyperparams {
            lambda_bc: 1.0,
            lambda_a: 1e-3,
            lambda_q1: 1.0,
            lambda_l2q: 1e-5,
            lambda_l2pi: 1e-5,
            gamma: 0.99,
            tau: 0.001,
            pretrain_steps: 10_000,
            collect_steps: 1,
            batch_size: 64,
            train_steps: 300_000,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            critic_loss_action: CriticLossAction::Stored,
        }
    }
}

impl ColHyperparams {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            bc: self.lambda_bc,
            actor_q: self.lambda_a,
            q1: self.lambda_q1,
            l2_critic: self.lambda_l2q,
            l2_actor: self.lambda_l2pi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            ("lambda_bc", self.lambda_bc),
            ("lambda_a", self.lambda_a),
            ("lambda_q1", self.lambda_q1),
            ("lambda_l2q", self.lambda_l2q),
            ("lambda_l2pi", self.lambda_l2pi),
        ];
        for (name, v) in lambdas {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.batch_size < 4 {
            return Err(Error::Config(format!("batch_size must be at least 4, got {}", self.batch_size)));
        }
        if self.collect_steps == 0 || self.train_steps == 0 {
            return Err(Error::Config("collect_steps and train_steps must be positive".into()));
        }
        if !(self.actor_lr > 0.0) || !(self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// Hidden-layer layout of one network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkShape {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl NetworkShape {
    pub fn new(hidden: &[usize], activation: Activation) -> Self {
        NetworkShape {
            hidden: hidden.to_vec(),
            activation,
        }
    }

    /// Three hidden layers of 128 ELU units.
    pub fn col_default() -> Self {
        Self::new(&[128, 128, 128], Activation::Elu)
    }

    /// 400/300 ReLU units.
    pub fn ddpg() -> Self {
        Self::new(&[400, 300], Activation::Relu)
    }

    fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden.len() + 2);
        s.push(input);
        s.extend_from_slice(&self.hidden);
        s.push(output);
        s
    }

    pub fn build_actor(&self, seed: u64) -> Result<NetworkParams> {
        NetworkParams::init(&self.sizes(OBS_DIM, ACTION_DIM), self.activation, Activation::Tanh, seed)
    }

    pub fn build_critic(&self, seed: u64) -> Result<NetworkParams> {
        NetworkParams::init(&self.sizes(CRITIC_INPUT, 1), self.activation, Activation::Linear, seed)
    }
}

/// Per-update diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossReport {
    pub bc: f64,
    pub q1: f64,
    pub actor_q: f64,
    pub l2_actor: f64,
    pub l2_critic: f64,
    pub combined_actor: f64,
    pub combined_critic: f64,
    pub per_sample_td_errors: Vec<f64>,
}

impl LossReport {
    fn all_finite(&self) -> bool {
        [
            self.bc,
            self.q1,
            self.actor_q,
            self.l2_actor,
            self.l2_critic,
            self.combined_actor,
            self.combined_critic,
        ]
        .iter()
        .all(|v| v.is_finite())
            && self.per_sample_td_errors.iter().all(|v| v.is_finite())
    }
}

/// Column-major-free batch layout used by the loss routines.
struct BatchArrays {
    n: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    cut: Vec<bool>,
    expert: Vec<bool>,
}

impl BatchArrays {
    fn new(batch: &[Transition]) -> Self {
        let n = batch.len();
        let mut b = BatchArrays {
            n,
            states: Vec::with_capacity(n * OBS_DIM),
            actions: Vec::with_capacity(n * ACTION_DIM),
            rewards: Vec::with_capacity(n),
            next_states: Vec::with_capacity(n * OBS_DIM),
            cut: Vec::with_capacity(n),
            expert: Vec::with_capacity(n),
        };
        for t in batch {
            b.states.extend_from_slice(&t.state);
            b.actions.extend_from_slice(&t.action);
            b.rewards.push(t.reward);
            b.next_states.extend_from_slice(&t.next_state);
            b.cut.push(t.cuts_bootstrap());
            b.expert.push(t.source == Source::Expert);
        }
        b
    }
}

fn critic_input(states: &[f64], actions: &[f64], n: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(n * CRITIC_INPUT);
    for (s, a) in states.chunks_exact(OBS_DIM).zip(actions.chunks_exact(ACTION_DIM)) {
        x.extend_from_slice(s);
        x.extend_from_slice(a);
    }
    x
}

/// Actor, critic, their targets and optimizers.
#[derive(Debug, Clone)]
pub struct ColAgent {
    pub actor: NetworkParams,
    pub critic: NetworkParams,
    pub actor_target: NetworkParams,
    pub critic_target: NetworkParams,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub hyper: ColHyperparams,
    /// Completed calls to [`ColAgent::col_update`].
    pub updates: u64,
}

impl ColAgent {
    /// Random online networks with targets as exact copies.
    pub fn new(hyper: ColHyperparams, actor_shape: &NetworkShape, critic_shape: &NetworkShape, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let actor = actor_shape.build_actor(seed.wrapping_mul(2).wrapping_add(1))?;
        let critic = critic_shape.build_critic(seed.wrapping_mul(2).wrapping_add(2))?;
        Self::from_networks(hyper, actor, critic)
    }

    pub fn from_networks(hyper: ColHyperparams, actor: NetworkParams, critic: NetworkParams) -> Result<Self> {
        if actor.input_width() != OBS_DIM || actor.output_width() != ACTION_DIM {
            return Err(Error::shape("actor widths", OBS_DIM, actor.input_width()));
        }
        if critic.input_width() != CRITIC_INPUT || critic.output_width() != 1 {
            return Err(Error::shape("critic widths", CRITIC_INPUT, critic.input_width()));
        }
        Ok(ColAgent {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            actor,
            critic,
            hyper,
            updates: 0,
        })
    }

    /// Deterministic action plus optional additive noise, clamped to `[-1, 1]`.
    pub fn act(&self, state: &[f64], noise: Option<&[f64]>) -> Result<Action> {
        if state.len() != OBS_DIM {
            return Err(Error::shape("agent state", OBS_DIM, state.len()));
        }
        let mut a = self.actor.forward(state)?;
        if let Some(noise) = noise {
            if noise.len() != ACTION_DIM {
                return Err(Error::shape("exploration noise", ACTION_DIM, noise.len()));
            }
            a.iter_mut().zip(noise).for_each(|(a, n)| *a += n);
        }
        Ok(Action::from_slice(&a)?.clamped())
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        Ok(self.critic.forward(&x)?[0])
    }

    /// Behavior-cloning loss over the expert entries of `batch` and its
    /// actor gradient. No expert entries gives zero loss and gradient.
    pub fn bc_loss(&self, batch: &[Transition]) -> Result<(f64, GradientSet)> {
        let expert: Vec<Transition> = batch.iter().copied().filter(|t| t.source == Source::Expert).collect();
        let mut grads = GradientSet::zeros_like(&self.actor);
        if expert.is_empty() {
            return Ok((0.0, grads));
        }
        let b = BatchArrays::new(&expert);
        let cache = self.actor.forward_cached(&b.states, b.n)?;
        let (loss, upstream) = bc_terms(cache.output(), &b, 1.0);
        self.actor.backward_batch(&cache, &upstream, Some(&mut grads))?;
        Ok((loss, grads))
    }

    /// 1-step TD loss, critic gradient and per-sample TD errors `y - Q`.
    pub fn q1_loss(&self, batch: &[Transition]) -> Result<(f64, GradientSet, Vec<f64>)> {
        non_empty(batch)?;
        let b = BatchArrays::new(batch);
        let targets = self.td_targets(&b)?;
        let mut grads = GradientSet::zeros_like(&self.critic);
        let actions = match self.hyper.critic_loss_action {
            CriticLossAction::Stored => b.actions.clone(),
            CriticLossAction::Policy => self.actor.forward_batch(&b.states, b.n)?,
        };
        let (loss, td) = self.critic_td_step(&b, &actions, &targets, None, 1.0, &mut grads)?;
        Ok((loss, grads, td))
    }

    /// `-mean Q(s, pi(s))` and its actor gradient, critic held fixed.
    pub fn actor_q_loss(&self, batch: &[Transition]) -> Result<(f64, GradientSet)> {
        non_empty(batch)?;
        let b = BatchArrays::new(batch);
        let actor_cache = self.actor.forward_cached(&b.states, b.n)?;
        let (loss, dpi) = self.actor_q_terms(&b, actor_cache.output(), 1.0)?;
        let mut grads = GradientSet::zeros_like(&self.actor);
        self.actor.backward_batch(&actor_cache, &dpi, Some(&mut grads))?;
        Ok((loss, grads))
    }

    /// Bootstrap targets from the target networks; no gradient flows here.
    fn td_targets(&self, b: &BatchArrays) -> Result<Vec<f64>> {
        let next_actions = self.actor_target.forward_batch(&b.next_states, b.n)?;
        let next_q = self
            .critic_target
            .forward_batch(&critic_input(&b.next_states, &next_actions, b.n), b.n)?;
        Ok((0..b.n)
            .map(|i| {
                if b.cut[i] {
                    b.rewards[i]
                } else {
                    b.rewards[i] + self.hyper.gamma * next_q[i]
                }
            })
            .collect())
    }

    /// Accumulates `scale * dL_q1/dtheta` into `grads`; returns the loss and TD errors.
    fn critic_td_step(
        &self,
        b: &BatchArrays,
        actions: &[f64],
        targets: &[f64],
        weights: Option<&[f64]>,
        scale: f64,
        grads: &mut GradientSet,
    ) -> Result<(f64, Vec<f64>)> {
        let cache = self.critic.forward_cached(&critic_input(&b.states, actions, b.n), b.n)?;
        let q = cache.output();
        let n = b.n as f64;
        let mut loss = 0.0;
        let mut td = Vec::with_capacity(b.n);
        let mut upstream = Vec::with_capacity(b.n);
        for i in 0..b.n {
            let w = weights.map_or(1.0, |w| w[i]);
            let err = targets[i] - q[i];
            loss += w * err * err;
            td.push(err);
            upstream.push(scale * w * (q[i] - targets[i]) / n);
        }
        if scale != 0.0 {
            self.critic.backward_batch(&cache, &upstream, Some(grads))?;
        }
        Ok((0.5 * loss / n, td))
    }

    /// Loss `-mean Q(s, pi)` and `scale * dL/dpi` (`n x ACTION_DIM`).
    fn actor_q_terms(&self, b: &BatchArrays, pi: &[f64], scale: f64) -> Result<(f64, Vec<f64>)> {
        let cache = self.critic.forward_cached(&critic_input(&b.states, pi, b.n), b.n)?;
        let n = b.n as f64;
        let loss = -cache.output().iter().sum::<f64>() / n;
        let upstream = vec![-scale / n; b.n];
        let input_grad = self.critic.backward_batch(&cache, &upstream, None)?;
        let mut dpi = Vec::with_capacity(b.n * ACTION_DIM);
        for row in input_grad.chunks_exact(CRITIC_INPUT) {
            dpi.extend_from_slice(&row[OBS_DIM..]);
        }
        Ok((loss, dpi))
    }

    /// Losses and gradients of the combined objective at the current parameters.
    pub fn combined_gradients(
        &self,
        batch: &[Transition],
        weights: &LossWeights,
        importance: Option<&[f64]>,
    ) -> Result<(LossReport, GradientSet, GradientSet)> {
        non_empty(batch)?;
        if let Some(w) = importance {
            if w.len() != batch.len() {
                return Err(Error::shape("importance weights", batch.len(), w.len()));
            }
        }
        let b = BatchArrays::new(batch);
        let mut critic_grads = GradientSet::zeros_like(&self.critic);
        let mut actor_grads = GradientSet::zeros_like(&self.actor);

        let actor_cache: ForwardCache = self.actor.forward_cached(&b.states, b.n)?;
        let pi = actor_cache.output();

        let targets = self.td_targets(&b)?;
        let critic_actions: &[f64] = match self.hyper.critic_loss_action {
            CriticLossAction::Stored => &b.actions,
            CriticLossAction::Policy => pi,
        };
        let (q1, td) = self.critic_td_step(&b, critic_actions, &targets, importance, weights.q1, &mut critic_grads)?;

        let (actor_q, mut dpi) = self.actor_q_terms(&b, pi, weights.actor_q)?;
        let (bc, dbc) = bc_terms(pi, &b, weights.bc);
        for (d, e) in dpi.iter_mut().zip(&dbc) {
            *d += e;
        }
        if weights.trains_actor() {
            self.actor.backward_batch(&actor_cache, &dpi, Some(&mut actor_grads))?;
        }

        let (l2_actor, l2_actor_grad) = self.actor.l2_penalty();
        let (l2_critic, l2_critic_grad) = self.critic.l2_penalty();
        if weights.l2_actor != 0.0 {
            actor_grads.add_scaled(&l2_actor_grad, weights.l2_actor);
        }
        if weights.l2_critic != 0.0 {
            critic_grads.add_scaled(&l2_critic_grad, weights.l2_critic);
        }

        let report = LossReport {
            bc,
            q1,
            actor_q,
            l2_actor,
            l2_critic,
            combined_actor: weights.bc * bc + weights.actor_q * actor_q + weights.l2_actor * l2_actor,
            combined_critic: weights.q1 * q1 + weights.l2_critic * l2_critic,
            per_sample_td_errors: td,
        };
        Ok((report, critic_grads, actor_grads))
    }

    /// One combined update with the agent's own loss weights.
    pub fn col_update(&mut self, batch: &[Transition]) -> Result<LossReport> {
        let weights = self.hyper.weights();
        self.col_update_with(batch, &weights, None)
    }

    /// One combined update: Adam step on the critic, Adam step on the
    /// actor (networks with all-zero loss weights are left alone), then
    /// soft target updates.
    pub fn col_update_with(
        &mut self,
        batch: &[Transition],
        weights: &LossWeights,
        importance: Option<&[f64]>,
    ) -> Result<LossReport> {
        let (report, critic_grads, actor_grads) = self.combined_gradients(batch, weights, importance)?;
        if !report.all_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss at update {}: bc={} q1={} actor_q={} l2_actor={} l2_critic={} (batch of {}, {} expert)",
                self.updates,
                report.bc,
                report.q1,
                report.actor_q,
                report.l2_actor,
                report.l2_critic,
                batch.len(),
                batch.iter().filter(|t| t.source == Source::Expert).count(),
            )));
        }
        if weights.trains_critic() {
            self.critic_opt.step(&mut self.critic, &critic_grads, self.hyper.critic_lr)?;
        }
        if weights.trains_actor() {
            self.actor_opt.step(&mut self.actor, &actor_grads, self.hyper.actor_lr)?;
        }
        self.actor_target.soft_update_from(&self.actor, self.hyper.tau)?;
        self.critic_target.soft_update_from(&self.critic, self.hyper.tau)?;
        self.updates += 1;
        Ok(report)
    }

    /// `steps` combined updates on uniform expert-only batches.
    pub fn pretrain<R: Rng + ?Sized>(
        &mut self,
        expert: &ExpertBuffer,
        steps: usize,
        batch_size: usize,
        weights: &LossWeights,
        rng: &mut R,
    ) -> Result<Vec<LossReport>> {
        if steps == 0 {
            return Ok(Vec::new());
        }
        if expert.is_empty() {
            return Err(Error::Config("pre-training requires a non-empty expert buffer".into()));
        }
        let mut reports = Vec::with_capacity(steps);
        for _ in 0..steps {
            let batch = sample_uniform(expert.as_slice(), batch_size, rng)?;
            reports.push(self.col_update_with(&batch, weights, None)?);
        }
        Ok(reports)
    }

    /// Writes `actor.colnn`, `critic.colnn`, their targets and `manifest.txt`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_network(&self.actor, &dir.join("actor.colnn"))?;
        save_network(&self.critic, &dir.join("critic.colnn"))?;
        save_network(&self.actor_target, &dir.join("actor_target.colnn"))?;
        save_network(&self.critic_target, &dir.join("critic_target.colnn"))?;
        let h = &self.hyper;
        let manifest = format!(
            "lambda_bc = {}\nlambda_a = {}\nlambda_q1 = {}\nlambda_l2q = {}\nlambda_l2pi = {}\n\
             gamma = {}\ntau = {}\npretrain_steps = {}\ncollect_steps = {}\nbatch_size = {}\n\
             train_steps = {}\nactor_lr = {}\ncritic_lr = {}\ncritic_loss_action = {}\n\
             updates = {}\nactor_adam_steps = {}\ncritic_adam_steps = {}\n",
            h.lambda_bc,
            h.lambda_a,
            h.lambda_q1,
            h.lambda_l2q,
            h.lambda_l2pi,
            h.gamma,
            h.tau,
            h.pretrain_steps,
            h.collect_steps,
            h.batch_size,
            h.train_steps,
            h.actor_lr,
            h.critic_lr,
            h.critic_loss_action,
            self.updates,
            self.actor_opt.step,
            self.critic_opt.step,
        );
        let path = dir.join("manifest.txt");
        std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
    }

    /// Restores networks, hyperparameters and counters. Adam moments are
    /// not persisted and restart from zero.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.txt");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let kv = crate::harness::config::parse_key_values(&text, &path)?;
        let mut hyper = ColHyperparams::default();
        let mut updates = 0;
        let mut actor_steps = 0;
        let mut critic_steps = 0;
        for (line, key, value) in &kv {
            match key.as_str() {
                "updates" => updates = parse_value(value, *line, &path)?,
                "actor_adam_steps" => actor_steps = parse_value(value, *line, &path)?,
                "critic_adam_steps" => critic_steps = parse_value(value, *line, &path)?,
                _ => apply_hyper_override(&mut hyper, key, value).map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: *line,
                    message: e.to_string(),
                })?,
            }
        }
        let mut agent = ColAgent::from_networks(
            hyper,
            load_network(&dir.join("actor.colnn"))?,
            load_network(&dir.join("critic.colnn"))?,
        )?;
        agent.actor_target = load_network(&dir.join("actor_target.colnn"))?;
        agent.critic_target = load_network(&dir.join("critic_target.colnn"))?;
        if !agent.actor_target.same_shape(&agent.actor) || !agent.critic_target.same_shape(&agent.critic) {
            return Err(Error::Validation("target networks do not match online networks".into()));
        }
        agent.updates = updates;
        agent.actor_opt.step = actor_steps;
        agent.critic_opt.step = critic_steps;
        Ok(agent)
    }
}

fn parse_value<T: FromStr>(value: &str, line: usize, path: &Path) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {value:?}"),
    })
}

/// Set one hyperparameter by its manifest/config key.
pub fn apply_hyper_override(h: &mut ColHyperparams, key: &str, value: &str) -> Result<()> {
    fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
        value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
    }
    match key {
        "lambda_bc" => h.lambda_bc = num(key, value)?,
        "lambda_a" => h.lambda_a = num(key, value)?,
        "lambda_q1" => h.lambda_q1 = num(key, value)?,
        "lambda_l2q" => h.lambda_l2q = num(key, value)?,
        "lambda_l2pi" => h.lambda_l2pi = num(key, value)?,
        "gamma" => h.gamma = num(key, value)?,
        "tau" => h.tau = num(key, value)?,
        "pretrain_steps" => h.pretrain_steps = num(key, value)?,
        "collect_steps" => h.collect_steps = num(key, value)?,
        "batch_size" => h.batch_size = num(key, value)?,
        "train_steps" => h.train_steps = num(key, value)?,
        "actor_lr" => h.actor_lr = num(key, value)?,
        "critic_lr" => h.critic_lr = num(key, value)?,
        "critic_loss_action" => h.critic_loss_action = value.trim().parse()?,
        other => return Err(Error::Config(format!("unknown hyperparameter {other:?}"))),
    }
    Ok(())
}

fn non_empty(batch: &[Transition]) -> Result<()> {
    if batch.is_empty() {
        Err(Error::Empty("batch"))
    } else {
        Ok(())
    }
}

/// BC loss over the expert rows and `scale * dL/dpi` for every row.
fn bc_terms(pi: &[f64], b: &BatchArrays, scale: f64) -> (f64, Vec<f64>) {
    let n_expert = b.expert.iter().filter(|&&e| e).count();
    let mut grad = vec![0.0; b.n * ACTION_DIM];
    if n_expert == 0 {
        return (0.0, grad);
    }
    let m = n_expert as f64;
    let mut loss = 0.0;
    for i in (0..b.n).filter(|&i| b.expert[i]) {
        for j in 0..ACTION_DIM {
            let k = i * ACTION_DIM + j;
            let diff = pi[k] - b.actions[k];
            loss += diff * diff;
            grad[k] = scale * diff / m;
        }
    }
    (0.5 * loss / m, grad)
}
