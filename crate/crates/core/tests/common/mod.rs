//! Shared helpers for the integration tests.
#![allow(dead_code)]

use col_lab::agent::{ColAgent, ColHyperparams, NetworkShape, CRITIC_INPUT};
use col_lab::lander::{ACTION_DIM, OBS_DIM};
use col_lab::nn::{Activation, GradientSet, NetworkParams};
use col_lab::replay::{Source, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn assert_matches(what: &str, analytic: &[f64], numeric: &[f64]) {
    assert_eq!(analytic.len(), numeric.len(), "{what}: length");
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let e = rel_err(*a, *n);
        assert!(e < TOL, "{what}[{i}]: analytic {a:e} numeric {n:e} rel err {e:e}");
    }
}

/// Central differences of `f` over every entry of `values`.
pub fn fd(values: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..values.len())
        .map(|k| {
            let orig = values[k];
            values[k] = orig + H;
            let up = f(values);
            values[k] = orig - H;
            let down = f(values);
            values[k] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

pub fn fd_params(net: &NetworkParams, mut f: impl FnMut(&NetworkParams) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    let mut values = net.values().to_vec();
    fd(&mut values, |v| {
        probe.values_mut().copy_from_slice(v);
        f(&probe)
    })
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|i| {
            let mut state = [0.0; OBS_DIM];
            let mut next_state = [0.0; OBS_DIM];
            let mut action = [0.0; ACTION_DIM];
            state.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            next_state.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            action.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            Transition {
                state,
                action,
                reward: rng.gen_range(-2.0..2.0),
                next_state,
                done: i % 5 == 4,
                truncated: i % 10 == 9,
                source: if i % 3 == 0 { Source::Expert } else { Source::Agent },
            }
        })
        .collect()
}

/// Small agent: actor 8-6-2 (68 parameters), critic 10-6-1 (73 parameters).
pub fn tiny_agent(seed: u64) -> ColAgent {
    let shape = NetworkShape::new(&[6], Activation::Elu);
    let mut agent = ColAgent::new(ColHyperparams::default(), &shape, &shape, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    // Distinct targets so bootstrap terms are exercised.
    for v in agent.actor_target.values_mut() {
        *v += rng.gen_range(-0.3..0.3);
    }
    for v in agent.critic_target.values_mut() {
        *v += rng.gen_range(-0.3..0.3);
    }
    agent
}

/// DDPG gradients written directly against the network primitives.
pub fn reference_ddpg(agent: &ColAgent, batch: &[Transition]) -> (GradientSet, GradientSet) {
    let n = batch.len();
    let gamma = agent.hyper.gamma;
    let mut states = Vec::new();
    let mut next_states = Vec::new();
    let mut sa = Vec::new();
    for t in batch {
        states.extend_from_slice(&t.state);
        next_states.extend_from_slice(&t.next_state);
        sa.extend_from_slice(&t.state);
        sa.extend_from_slice(&t.action);
    }
    let next_actions = agent.actor_target.forward_batch(&next_states, n).unwrap();
    let mut next_sa = Vec::new();
    for (s, a) in next_states.chunks(OBS_DIM).zip(next_actions.chunks(ACTION_DIM)) {
        next_sa.extend_from_slice(s);
        next_sa.extend_from_slice(a);
    }
    let next_q = agent.critic_target.forward_batch(&next_sa, n).unwrap();
    let y: Vec<f64> = batch
        .iter()
        .zip(&next_q)
        .map(|(t, q)| {
            if t.done && !t.truncated {
                t.reward
            } else {
                t.reward + gamma * q
            }
        })
        .collect();
    let cache = agent.critic.forward_cached(&sa, n).unwrap();
    let upstream: Vec<f64> = (0..n).map(|i| (cache.output()[i] - y[i]) / n as f64).collect();
    let mut critic_grads = GradientSet::zeros_like(&agent.critic);
    agent.critic.backward_batch(&cache, &upstream, Some(&mut critic_grads)).unwrap();

    let actor_cache = agent.actor.forward_cached(&states, n).unwrap();
    let mut s_pi = Vec::new();
    for (s, a) in states.chunks(OBS_DIM).zip(actor_cache.output().chunks(ACTION_DIM)) {
        s_pi.extend_from_slice(s);
        s_pi.extend_from_slice(a);
    }
    let q_cache = agent.critic.forward_cached(&s_pi, n).unwrap();
    let dq = agent.critic.backward_batch(&q_cache, &vec![-1.0 / n as f64; n], None).unwrap();
    let dpi: Vec<f64> = dq.chunks(CRITIC_INPUT).flat_map(|row| row[OBS_DIM..].to_vec()).collect();
    let mut actor_grads = GradientSet::zeros_like(&agent.actor);
    agent.actor.backward_batch(&actor_cache, &dpi, Some(&mut actor_grads)).unwrap();
    (critic_grads, actor_grads)
}

