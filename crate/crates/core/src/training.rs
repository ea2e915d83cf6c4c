//! The interaction loop: collect, absorb interventions, update, evaluate.

use std::sync::mpsc::Receiver;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{ColAgent, LossReport, LossWeights};
use crate::baselines::{evaluate, BufferRegime, EvalStats, OuNoise};
use crate::error::{Error, Result};
use crate::lander::{Environment, TerminationReason};
use crate::replay::{
    sample_fixed_ratio, AgentBuffer, ExpertBuffer, PriorityBuffer, Source, Transition, DEFAULT_PER_ALPHA,
    DEFAULT_PER_BETA_START, DEFAULT_PER_EPSILON,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerConfig {
    pub alpha: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub epsilon: f64,
}

impl Default for PerConfig {
    fn default() -> Self {
        PerConfig {
            alpha: DEFAULT_PER_ALPHA,
            beta_start: DEFAULT_PER_BETA_START,
            beta_end: 1.0,
            epsilon: DEFAULT_PER_EPSILON,
        }
    }
}

/// Replay storage for one run.
#[derive(Debug, Clone)]
pub enum Replay {
    /// Fixed 25/75 expert/agent batches.
    FixedRatio { expert: ExpertBuffer, agent: AgentBuffer },
    /// Uniform agent-only batches; the expert buffer is kept for pretraining.
    AgentUniform { expert: ExpertBuffer, agent: AgentBuffer },
    /// One prioritized pool over both sources.
    Prioritized { expert: ExpertBuffer, pool: PriorityBuffer },
}

/// A drawn batch plus what prioritized replay needs to close the loop.
pub struct Batch {
    pub transitions: Vec<Transition>,
    pub indices: Option<Vec<usize>>,
    pub weights: Option<Vec<f64>>,
}

impl Replay {
    pub fn new(regime: BufferRegime, expert: ExpertBuffer, capacity: usize, per: &PerConfig) -> Result<Self> {
        Ok(match regime {
            BufferRegime::FixedRatio | BufferRegime::None => Replay::FixedRatio {
                expert,
                agent: AgentBuffer::new(capacity)?,
            },
            BufferRegime::AgentUniform => Replay::AgentUniform {
                expert,
                agent: AgentBuffer::new(capacity)?,
            },
            BufferRegime::Prioritized => {
                let mut pool = PriorityBuffer::new(capacity, per.alpha, per.epsilon)?;
                for t in expert.as_slice() {
                    pool.push(*t)?;
                }
                Replay::Prioritized { expert, pool }
            }
        })
    }

    pub fn expert(&self) -> &ExpertBuffer {
        match self {
            Replay::FixedRatio { expert, .. } | Replay::AgentUniform { expert, .. } | Replay::Prioritized { expert, .. } => {
                expert
            }
        }
    }

    pub fn expert_len(&self) -> usize {
        self.expert().len()
    }

    pub fn agent_len(&self) -> usize {
        match self {
            Replay::FixedRatio { agent, .. } | Replay::AgentUniform { agent, .. } => agent.len(),
            Replay::Prioritized { pool, .. } => pool.agent_len(),
        }
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        match (self, t.source) {
            (Replay::FixedRatio { expert, .. } | Replay::AgentUniform { expert, .. }, Source::Expert) => expert.push(t),
            (Replay::FixedRatio { agent, .. } | Replay::AgentUniform { agent, .. }, Source::Agent) => agent.push(t),
            (Replay::Prioritized { expert, pool }, source) => {
                if source == Source::Expert {
                    expert.push(t)?;
                }
                pool.push(t)
            }
        }
    }

    pub fn sample(&self, n: usize, beta: f64, rng: &mut dyn RngCore) -> Result<Batch> {
        match self {
            Replay::FixedRatio { expert, agent } => Ok(Batch {
                transitions: sample_fixed_ratio(expert, agent, n, rng)?,
                indices: None,
                weights: None,
            }),
            Replay::AgentUniform { agent, .. } => Ok(Batch {
                transitions: agent.sample_uniform(n, rng)?,
                indices: None,
                weights: None,
            }),
            Replay::Prioritized { pool, .. } => {
                let b = pool.sample(n, beta, rng)?;
                Ok(Batch {
                    transitions: b.transitions,
                    indices: Some(b.indices),
                    weights: Some(b.weights),
                })
            }
        }
    }

    fn update_priorities(&mut self, indices: &[usize], td: &[f64]) -> Result<()> {
        match self {
            Replay::Prioritized { pool, .. } => pool.update_priorities(indices, td),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Update iterations T; each collects `agent.hyper.collect_steps` env steps.
    pub iterations: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub rl_weights: LossWeights,
    pub per: PerConfig,
    pub noise: OuNoise,
}

/// One evaluation checkpoint of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub env_steps: u64,
    pub updates: u64,
    pub episodes: u64,
    pub eval: EvalStats,
    /// Loss averages over the updates since the previous point.
    pub losses: LossReport,
    pub expert_size: usize,
    pub agent_size: usize,
}

/// Running mean of loss reports between evaluation points.
#[derive(Debug, Default)]
pub struct LossAccumulator {
    sum: LossReport,
    count: usize,
}

impl LossAccumulator {
    pub fn add(&mut self, r: &LossReport) {
        self.sum.bc += r.bc;
        self.sum.q1 += r.q1;
        self.sum.actor_q += r.actor_q;
        self.sum.l2_actor += r.l2_actor;
        self.sum.l2_critic += r.l2_critic;
        self.sum.combined_actor += r.combined_actor;
        self.sum.combined_critic += r.combined_critic;
        self.count += 1;
    }

    /// Mean since the last call (all zeros when empty), then resets.
    pub fn take(&mut self) -> LossReport {
        let n = self.count.max(1) as f64;
        let s = std::mem::take(&mut self.sum);
        self.count = 0;
        LossReport {
            bc: s.bc / n,
            q1: s.q1 / n,
            actor_q: s.actor_q / n,
            l2_actor: s.l2_actor / n,
            l2_critic: s.l2_critic / n,
            combined_actor: s.combined_actor / n,
            combined_critic: s.combined_critic / n,
            per_sample_td_errors: Vec::new(),
        }
    }
}

/// Independent, reproducible random streams derived from one seed.
pub struct RunStreams {
    pub init: u64,
    pub env: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    pub sample: ChaCha8Rng,
    eval_seed: u64,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        let mut init = stream(0);
        RunStreams {
            init: init.next_u64(),
            env: stream(1),
            noise: stream(2),
            sample: stream(3),
            eval_seed: stream(4).next_u64(),
        }
    }

    /// The same evaluation start states at every checkpoint.
    pub fn eval_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.eval_seed)
    }
}

/// Evaluates the current actor without noise.
pub fn evaluate_agent(
    agent: &ColAgent,
    eval_env: &mut dyn Environment,
    episodes: usize,
    streams: &RunStreams,
) -> Result<EvalStats> {
    let mut actor = agent.actor.clone();
    evaluate(&mut actor, eval_env, episodes, &mut streams.eval_rng())
}

/// Runs `config.iterations` collect/update cycles. Calls `on_eval` with
/// the post-pretraining evaluation (env step 0) and at every multiple of
/// `eval_interval` env steps.
#[allow(clippy::too_many_arguments)]
pub fn train(
    agent: &mut ColAgent,
    env: &mut dyn Environment,
    eval_env: &mut dyn Environment,
    replay: &mut Replay,
    config: &TrainConfig,
    streams: &mut RunStreams,
    initial_losses: LossReport,
    interventions: Option<&Receiver<Transition>>,
    on_eval: &mut dyn FnMut(&EvalPoint, &ColAgent) -> Result<()>,
) -> Result<()> {
    if config.eval_interval == 0 || config.eval_episodes == 0 {
        return Err(Error::Config("eval_interval and eval_episodes must be positive".into()));
    }
    let m = agent.hyper.collect_steps;
    let n = agent.hyper.batch_size;
    let mut noise = config.noise.clone();
    noise.reset();
    let mut env_steps: u64 = 0;
    let mut episodes: u64 = 0;
    let mut losses = LossAccumulator::default();

    let point = |agent: &ColAgent, eval_env: &mut dyn Environment, env_steps, episodes, losses, replay: &Replay, streams: &RunStreams| -> Result<EvalPoint> {
        Ok(EvalPoint {
            env_steps,
            updates: agent.updates,
            episodes,
            eval: evaluate_agent(agent, eval_env, config.eval_episodes, streams)?,
            losses,
            expert_size: replay.expert_len(),
            agent_size: replay.agent_len(),
        })
    };
    on_eval(&point(agent, eval_env, 0, 0, initial_losses, replay, streams)?, agent)?;

    if config.iterations == 0 {
        return Ok(());
    }
    let mut obs = env.reset(&mut streams.env).observation();
    for iter in 0..config.iterations {
        let mut due = false;
        for _ in 0..m {
            let eps = noise.sample(&mut streams.noise);
            let action = agent.act(&obs, Some(&eps))?;
            let step = env
                .step(action)
                .map_err(|e| Error::Session(format!("environment fault at env step {env_steps}: {e}")))?;
            let next = step.next_state.observation();
            replay.push(Transition {
                state: obs,
                action: action.to_array(),
                reward: step.reward,
                next_state: next,
                done: step.done,
                truncated: step.reason == TerminationReason::TimeLimit,
                source: Source::Agent,
            })?;
            env_steps += 1;
            if step.done {
                episodes += 1;
                noise.reset();
                obs = env.reset(&mut streams.env).observation();
            } else {
                obs = next;
            }
            if env_steps.is_multiple_of(config.eval_interval as u64) {
                due = true;
            }
        }

        if let Some(rx) = interventions {
            while let Ok(mut t) = rx.try_recv() {
                t.source = Source::Expert;
                replay.push(t)?;
            }
        }

        let progress = (iter as f64 / config.iterations as f64).min(1.0);
        let beta = config.per.beta_start + (config.per.beta_end - config.per.beta_start) * progress;
        let batch = replay.sample(n, beta, &mut streams.sample)?;
        let report = agent
            .col_update_with(&batch.transitions, &config.rl_weights, batch.weights.as_deref())
            .map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("{msg} at env step {env_steps}")),
                other => other,
            })?;
        if let Some(indices) = &batch.indices {
            replay.update_priorities(indices, &report.per_sample_td_errors)?;
        }
        losses.add(&report);

        if due {
            on_eval(&point(agent, eval_env, env_steps, episodes, losses.take(), replay, streams)?, agent)?;
        }
    }
    Ok(())
}
