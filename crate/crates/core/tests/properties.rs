//! Invariants over randomized inputs.

mod common;

use col_lab::lander::{Action, EnvKind, EnvState};
use col_lab::nn::{soft_update, Activation, NetworkParams};
use col_lab::replay::{
    expert_quota, sample_fixed_ratio, AgentBuffer, ExpertBuffer, PriorityBuffer, Source, Transition,
};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tagged(source: Source, tag: usize) -> Transition {
    Transition {
        state: [0.0; 8],
        action: [0.0; 2],
        reward: tag as f64,
        next_state: [0.0; 8],
        done: false,
        truncated: false,
        source,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fixed_ratio_batches_have_exact_composition(
        n in 4usize..300,
        n_expert in 1usize..50,
        n_agent in 1usize..50,
        seed in any::<u64>(),
    ) {
        let mut expert = ExpertBuffer::new();
        expert.extend((0..n_expert).map(|i| tagged(Source::Expert, i))).unwrap();
        let mut agent = AgentBuffer::new(1000).unwrap();
        for i in 0..n_agent {
            agent.push(tagged(Source::Agent, i)).unwrap();
        }
        let batch = sample_fixed_ratio(&expert, &agent, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(batch.len(), n);
        let experts = batch.iter().filter(|t| t.source == Source::Expert).count();
        prop_assert_eq!(experts, expert_quota(n));
        prop_assert!(experts * 4 >= n.saturating_sub(1) && experts * 4 <= n + 2);
    }

    #[test]
    fn agent_buffer_keeps_newest_in_order(capacity in 1usize..40, pushes in 0usize..120) {
        let mut buf = AgentBuffer::new(capacity).unwrap();
        for i in 0..pushes {
            buf.push(tagged(Source::Agent, i)).unwrap();
        }
        let kept: Vec<usize> = buf.iter().map(|t| t.reward as usize).collect();
        let expected: Vec<usize> = (pushes.saturating_sub(capacity)..pushes).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn soft_update_is_a_convex_combination(tau in 0.0f64..=1.0, a in any::<u64>(), b in any::<u64>()) {
        let target = NetworkParams::init(&[3, 4, 2], Activation::Elu, Activation::Tanh, a).unwrap();
        let online = NetworkParams::init(&[3, 4, 2], Activation::Elu, Activation::Tanh, b).unwrap();
        let next = soft_update(&target, &online, tau).unwrap();
        for ((n, t), o) in next.values().iter().zip(target.values()).zip(online.values()) {
            let (lo, hi) = (t.min(*o), t.max(*o));
            prop_assert!(*n >= lo - 1e-12 && *n <= hi + 1e-12);
        }
        if tau == 0.0 {
            prop_assert_eq!(next.values(), target.values());
        }
    }

    #[test]
    fn clamped_actions_are_finite_and_in_range(main in prop::num::f64::ANY, side in prop::num::f64::ANY) {
        let a = Action::new(main, side).clamped();
        prop_assert!((-1.0..=1.0).contains(&a.main) && (-1.0..=1.0).contains(&a.side));
        prop_assert!((0.0..=1.0).contains(&a.main_power()));
        prop_assert!((-1.0..=1.0).contains(&a.side_power()));
    }

    #[test]
    fn losses_are_non_negative(seed in 0u64..1000, n in 1usize..24) {
        let agent = tiny_agent(seed);
        let batch = random_batch(&mut ChaCha8Rng::seed_from_u64(seed), n);
        prop_assert!(agent.bc_loss(&batch).unwrap().0 >= 0.0);
        prop_assert!(agent.q1_loss(&batch).unwrap().0 >= 0.0);
        prop_assert!(agent.actor.l2_penalty().0 >= 0.0);
    }

    #[test]
    fn priorities_form_a_distribution(
        tds in prop::collection::vec(-50.0f64..50.0, 1..40),
        beta in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let mut buf = PriorityBuffer::new(64, 0.6, 1e-6).unwrap();
        for i in 0..tds.len() {
            let source = if i % 4 == 0 { Source::Expert } else { Source::Agent };
            buf.push(tagged(source, i)).unwrap();
        }
        let indices: Vec<usize> = (0..tds.len()).collect();
        buf.update_priorities(&indices, &tds).unwrap();
        let total: f64 = (0..buf.len()).map(|i| buf.probability(i)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for (i, td) in tds.iter().enumerate() {
            prop_assert_eq!(buf.priority(i).unwrap(), td.abs() + 1e-6);
        }
        let batch = buf.sample(16, beta, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(batch.weights.iter().all(|w| *w > 0.0 && *w <= 1.0));
        prop_assert!(batch.weights.contains(&1.0));
    }

    #[test]
    fn sparse_return_equals_dense_return(seed in any::<u64>(), actions in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..400)) {
        let mut dense = EnvKind::Dense.make();
        let mut sparse = EnvKind::Sparse.make();
        dense.reset(&mut ChaCha8Rng::seed_from_u64(seed));
        sparse.reset(&mut ChaCha8Rng::seed_from_u64(seed));
        let (mut rd, mut rs) = (0.0, 0.0);
        for (i, &(m, s)) in actions.iter().enumerate() {
            let a = dense.step(Action::new(m, s)).unwrap();
            let b = sparse.step(Action::new(m, s)).unwrap();
            prop_assert_eq!(a.next_state.observation(), b.next_state.observation());
            rd += a.reward;
            rs += b.reward;
            if a.done {
                prop_assert_eq!(rd, rs);
                break;
            }
            prop_assert_eq!(b.reward, 0.0);
            if i + 1 == actions.len() {
                prop_assert_eq!(rs, 0.0);
            }
        }
    }

    #[test]
    fn observations_round_trip(seed in any::<u64>()) {
        let mut env = EnvKind::Dense.make();
        let s = env.reset(&mut ChaCha8Rng::seed_from_u64(seed));
        let back = EnvState::from_observation(&s.observation()).unwrap();
        prop_assert_eq!(back.observation(), s.observation());
    }
}
