//! Comparison methods: behavior cloning, DDPG and the ablation grid,
//! plus the OU exploration process and policy evaluation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::agent::{ColHyperparams, LossWeights, NetworkShape};
use crate::error::{Error, Result};
use crate::lander::{Action, Environment, ACTION_DIM, OBS_DIM};
use crate::nn::{AdamState, NetworkParams};
use crate::policy::Policy;
use crate::replay::Transition;

#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    pub state: [f64; ACTION_DIM],
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl Default for OuNoise {
    fn default() -> Self {
        OuNoise::new(0.15, 0.2)
    }
}

impl OuNoise {
    pub fn new(theta: f64, sigma: f64) -> Self {
        OuNoise {
            state: [0.0; ACTION_DIM],
            theta,
            mu: 0.0,
            sigma,
            dt: 1.0,
        }
    }

    pub fn reset(&mut self) {
        self.state = [self.mu; ACTION_DIM];
    }

    /// `x += theta (mu - x) dt + sigma sqrt(dt) N(0, 1)` per dimension.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [f64; ACTION_DIM] {
        let scale = self.sigma * self.dt.sqrt();
        for x in self.state.iter_mut() {
            let z: f64 = if scale != 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            *x += self.theta * (self.mu - *x) * self.dt + scale * z;
        }
        self.state
    }
}

/// The comparison grid; names are the CLI spellings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Col,
    ColMinusPt,
    ColMinusBc,
    BcPlusDdpg,
    ColPlusPer,
    Ddpg,
    Bc,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Col,
        Method::ColMinusPt,
        Method::ColMinusBc,
        Method::BcPlusDdpg,
        Method::ColPlusPer,
        Method::Ddpg,
        Method::Bc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Col => "col",
            Method::ColMinusPt => "col-pt",
            Method::ColMinusBc => "col-bc",
            Method::BcPlusDdpg => "bc+ddpg",
            Method::ColPlusPer => "col+per",
            Method::Ddpg => "ddpg",
            Method::Bc => "bc",
        }
    }

    /// Whether the method reads demonstrations.
    pub fn needs_demos(self) -> bool {
        !matches!(self, Method::Ddpg)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How RL-phase batches are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferRegime {
    /// 25% expert, 75% agent.
    FixedRatio,
    /// Agent transitions only.
    AgentUniform,
    /// Proportional prioritization over expert and agent transitions.
    Prioritized,
    /// No RL phase.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    pub method: Method,
    pub hyper: ColHyperparams,
    pub pretrain_weights: LossWeights,
    pub rl_weights: LossWeights,
    pub regime: BufferRegime,
    pub actor_shape: NetworkShape,
    pub critic_shape: NetworkShape,
}

impl Ablation {
    pub fn pretrain_steps(&self) -> usize {
        self.hyper.pretrain_steps
    }

    /// Replaces the hyperparameters and re-derives the loss weights.
    pub fn with_hyper(mut self, hyper: ColHyperparams) -> Self {
        let base = make_ablation(self.method, hyper);
        self.pretrain_weights = base.pretrain_weights;
        self.rl_weights = base.rl_weights;
        self.hyper = base.hyper;
        self
    }
}

/// Maps a method onto losses, buffer regime, pretraining and network sizes.
/// `base` supplies the shared hyperparameters; each method then overrides
/// the cells it differs in.
pub fn make_ablation(method: Method, base: ColHyperparams) -> Ablation {
    let mut hyper = base;
    let col = NetworkShape::col_default();
    let mut actor_shape = col.clone();
    let mut critic_shape = col;
    let (pretrain_weights, rl_weights, regime);
    match method {
        Method::Col | Method::ColPlusPer => {
            pretrain_weights = hyper.weights();
            rl_weights = hyper.weights();
            regime = if method == Method::Col {
                BufferRegime::FixedRatio
            } else {
                BufferRegime::Prioritized
            };
        }
        Method::ColMinusPt => {
            hyper.pretrain_steps = 0;
            pretrain_weights = hyper.weights();
            rl_weights = hyper.weights();
            regime = BufferRegime::FixedRatio;
        }
        Method::ColMinusBc => {
            hyper.lambda_bc = 0.0;
            pretrain_weights = hyper.weights();
            rl_weights = hyper.weights();
            regime = BufferRegime::FixedRatio;
        }
        Method::BcPlusDdpg => {
            pretrain_weights = LossWeights::BC_ONLY;
            rl_weights = LossWeights::DDPG;
            regime = BufferRegime::AgentUniform;
        }
        Method::Ddpg => {
            hyper.pretrain_steps = 0;
            pretrain_weights = LossWeights::DDPG;
            rl_weights = LossWeights::DDPG;
            regime = BufferRegime::AgentUniform;
            actor_shape = NetworkShape::ddpg();
            critic_shape = NetworkShape::ddpg();
        }
        Method::Bc => {
            pretrain_weights = LossWeights::BC_ONLY;
            rl_weights = LossWeights::BC_ONLY;
            regime = BufferRegime::None;
        }
    }
    Ablation {
        method,
        hyper,
        pretrain_weights,
        rl_weights,
        regime,
        actor_shape,
        critic_shape,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
        }
    }
}

/// Mean over transitions of `|pi(s) - a|^2`.
pub fn bc_mse(policy: &NetworkParams, demos: &[Transition]) -> Result<f64> {
    if demos.is_empty() {
        return Err(Error::Empty("demonstrations"));
    }
    let states: Vec<f64> = demos.iter().flat_map(|t| t.state).collect();
    let out = policy.forward_batch(&states, demos.len())?;
    let total: f64 = out
        .chunks_exact(ACTION_DIM)
        .zip(demos)
        .map(|(pi, t)| pi.iter().zip(&t.action).map(|(p, a)| (p - a) * (p - a)).sum::<f64>())
        .sum();
    Ok(total / demos.len() as f64)
}

/// Fits a fresh 3x128 ELU / tanh actor to the demonstrations by
/// minibatch Adam on `1/2 |pi(s) - a|^2`, reshuffling every epoch.
pub fn train_bc<R: Rng + ?Sized>(demos: &[Transition], config: &BcConfig, rng: &mut R) -> Result<NetworkParams> {
    if demos.is_empty() {
        return Err(Error::Config("behavior cloning requires demonstrations".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("bc batch_size must be positive".into()));
    }
    let mut policy = NetworkShape::col_default().build_actor(rng.next_u64())?;
    let mut opt = AdamState::new(&policy);
    let mut order: Vec<usize> = (0..demos.len()).collect();
    let mut states = Vec::with_capacity(config.batch_size * OBS_DIM);
    for _ in 0..config.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for chunk in order.chunks(config.batch_size) {
            states.clear();
            for &i in chunk {
                states.extend_from_slice(&demos[i].state);
            }
            let cache = policy.forward_cached(&states, chunk.len())?;
            let m = chunk.len() as f64;
            let upstream: Vec<f64> = cache
                .output()
                .chunks_exact(ACTION_DIM)
                .zip(chunk)
                .flat_map(|(pi, &i)| {
                    let a = demos[i].action;
                    [(pi[0] - a[0]) / m, (pi[1] - a[1]) / m]
                })
                .collect();
            let mut grads = crate::nn::GradientSet::zeros_like(&policy);
            policy.backward_batch(&cache, &upstream, Some(&mut grads))?;
            opt.step(&mut policy, &grads, config.lr)?;
        }
    }
    Ok(policy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    pub stderr: f64,
    pub returns: Vec<f64>,
}

impl EvalStats {
    pub fn from_returns(returns: Vec<f64>) -> Result<Self> {
        let (mean, stderr) = mean_stderr(&returns).ok_or(Error::Empty("episode returns"))?;
        Ok(EvalStats { mean, stderr, returns })
    }
}

/// Sample mean and standard error of the mean; a single value has zero error.
pub fn mean_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// Noise-free rollouts of `policy`; returns per-episode return statistics.
pub fn evaluate<P: Policy + ?Sized, E: Environment + ?Sized>(
    policy: &mut P,
    env: &mut E,
    episodes: usize,
    rng: &mut dyn RngCore,
) -> Result<EvalStats> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng).observation();
        let mut total = 0.0;
        loop {
            let action: Action = policy.act(&obs)?.clamped();
            let step = env.step(action)?;
            total += step.reward;
            obs = step.next_state.observation();
            if step.done {
                break;
            }
        }
        returns.push(total);
    }
    EvalStats::from_returns(returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::scripted_action;
    use crate::lander::LanderEnv;
    use crate::replay::Source;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ou_deterministic_decay() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ou = OuNoise::new(0.15, 0.0);
        ou.state = [1.0, 1.0];
        assert_eq!(ou.sample(&mut rng), [0.85, 0.85]);
        let mut prev: f64 = 0.85;
        for _ in 0..50 {
            let x = ou.sample(&mut rng)[0];
            assert!(x.abs() < prev.abs());
            prev = x;
        }
        ou.reset();
        for _ in 0..10 {
            assert_eq!(ou.sample(&mut rng), [0.0, 0.0]);
        }
    }

    #[test]
    fn ou_stationary_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ou = OuNoise::default();
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = ou.sample(&mut rng)[0];
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).sqrt();
        // Exact discrete-time stationary law for dt = 1: sigma^2 / (1 - (1 - theta)^2).
        let discrete = 0.2 / (1.0 - 0.85f64.powi(2)).sqrt();
        let continuous = 0.2 / (2.0f64 * 0.15).sqrt();
        assert!((std - discrete).abs() / discrete < 0.05, "std {std}");
        assert!((std - continuous).abs() / continuous < 0.05, "std {std}");
    }

    #[test]
    fn ablation_cells() {
        let base = ColHyperparams::default();
        assert_eq!(make_ablation(Method::ColMinusPt, base.clone()).pretrain_steps(), 0);
        let nobc = make_ablation(Method::ColMinusBc, base.clone());
        assert_eq!(nobc.pretrain_weights.bc, 0.0);
        assert_eq!(nobc.rl_weights.bc, 0.0);
        let ddpg = make_ablation(Method::Ddpg, base.clone());
        assert_eq!(ddpg.actor_shape.hidden, vec![400, 300]);
        assert_eq!(ddpg.critic_shape.hidden, vec![400, 300]);
        assert_eq!(ddpg.pretrain_steps(), 0);
        assert_eq!(ddpg.regime, BufferRegime::AgentUniform);
        let bcddpg = make_ablation(Method::BcPlusDdpg, base.clone());
        assert_eq!(bcddpg.rl_weights, ddpg.rl_weights);
        assert_eq!(bcddpg.pretrain_weights, LossWeights::BC_ONLY);
        assert_eq!(make_ablation(Method::ColPlusPer, base.clone()).regime, BufferRegime::Prioritized);
        assert_eq!(make_ablation(Method::Bc, base).regime, BufferRegime::None);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("dapg".parse::<Method>(), Err(Error::Config(_))));
    }

    fn demo(state: [f64; OBS_DIM], action: [f64; ACTION_DIM]) -> Transition {
        Transition {
            state,
            action,
            reward: 0.0,
            next_state: state,
            done: false,
            truncated: false,
            source: Source::Expert,
        }
    }

    #[test]
    fn train_bc_zero_epochs_is_init() {
        let demos = [demo([0.1; OBS_DIM], [0.2, 0.3])];
        let a = train_bc(&demos, &BcConfig { epochs: 0, ..Default::default() }, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = NetworkShape::col_default().build_actor(rng.next_u64()).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            train_bc(&[], &BcConfig::default(), &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn train_bc_fits_single_pair() {
        let demos = [demo([0.3, 2.0, -0.1, -0.4, 0.05, 0.0, 0.0, 0.0], [0.6, -0.35])];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = BcConfig { epochs: 500, batch_size: 1, lr: 1e-3 };
        let p = train_bc(&demos, &cfg, &mut rng).unwrap();
        let out = p.forward(&demos[0].state).unwrap();
        assert!((out[0] - 0.6).abs() < 0.05 && (out[1] + 0.35).abs() < 0.05, "{out:?}");
    }

    #[test]
    fn train_bc_reduces_mse() {
        let mut env = LanderEnv::new();
        let mut pilot = scripted_action;
        let trajs = crate::expert::record_episodes(&mut env, &mut pilot, 2, 5, crate::expert::DemoSource::Scripted).unwrap();
        let demos: Vec<Transition> = trajs.iter().flat_map(|t| t.transitions.iter().copied()).collect();
        let init = train_bc(&demos, &BcConfig { epochs: 0, ..Default::default() }, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let fit = train_bc(&demos, &BcConfig::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(bc_mse(&fit, &demos).unwrap() < bc_mse(&init, &demos).unwrap());
    }

    #[test]
    fn evaluate_basics() {
        let mut env = LanderEnv::new();
        let mut idle = |_: &[f64; OBS_DIM]| Action::IDLE;
        let one = evaluate(&mut idle, &mut env, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(one.mean, one.returns[0]);
        assert_eq!(one.stderr, 0.0);
        assert!(evaluate(&mut idle, &mut env, 0, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn evaluate_identical_starts_have_zero_error() {
        struct Fixed(LanderEnv);
        impl Environment for Fixed {
            fn id(&self) -> &'static str {
                "fixed"
            }
            fn reset(&mut self, _: &mut dyn RngCore) -> crate::lander::EnvState {
                self.0.reset(&mut ChaCha8Rng::seed_from_u64(11))
            }
            fn step(&mut self, a: Action) -> Result<crate::lander::StepResult> {
                self.0.step(a)
            }
            fn state(&self) -> &crate::lander::EnvState {
                self.0.state()
            }
        }
        let mut env = Fixed(LanderEnv::new());
        let mut pilot = scripted_action;
        let s = evaluate(&mut pilot, &mut env, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.stderr, 0.0);
    }

    #[test]
    fn scripted_expert_is_proficient() {
        let mut env = LanderEnv::new();
        let mut pilot = scripted_action;
        let s = evaluate(&mut pilot, &mut env, 100, &mut ChaCha8Rng::seed_from_u64(2024)).unwrap();
        assert!(s.mean > 150.0, "expert mean {}", s.mean);
        let mut idle = |_: &[f64; OBS_DIM]| Action::IDLE;
        let r = evaluate(&mut idle, &mut env, 20, &mut ChaCha8Rng::seed_from_u64(2024)).unwrap();
        assert!(s.mean > r.mean + 200.0);
    }
}
