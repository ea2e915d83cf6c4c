//! Experience storage: a permanent expert buffer, a FIFO agent buffer, and
//! a TD-error prioritized buffer.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lander::{ACTION_DIM, OBS_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    Expert,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; OBS_DIM],
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_state: [f64; OBS_DIM],
    /// The episode ended with this transition.
    pub done: bool,
    /// The episode was cut by the time limit; the value target still bootstraps.
    pub truncated: bool,
    pub source: Source,
}

impl Transition {
    /// Whether the 1-step target should drop the bootstrap term.
    pub fn cuts_bootstrap(&self) -> bool {
        self.done && !self.truncated
    }

    pub fn is_finite(&self) -> bool {
        self.state
            .iter()
            .chain(&self.action)
            .chain(&self.next_state)
            .all(|v| v.is_finite())
            && self.reward.is_finite()
    }
}

fn check_source(t: &Transition, expected: Source) -> Result<()> {
    if t.source != expected {
        return Err(Error::Usage(format!(
            "{:?} transition pushed into the {:?} buffer",
            t.source, expected
        )));
    }
    if !t.is_finite() {
        return Err(Error::Usage("transition contains non-finite values".into()));
    }
    Ok(())
}

/// Append-only demonstration memory.
#[derive(Debug, Clone, Default)]
pub struct ExpertBuffer {
    transitions: Vec<Transition>,
}

impl ExpertBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        check_source(&t, Source::Expert)?;
        self.transitions.push(t);
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = Transition>>(&mut self, items: I) -> Result<()> {
        for t in items {
            self.push(t)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.transitions.get(i)
    }

    pub fn as_slice(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Transition>> {
        sample_uniform(&self.transitions, n, rng)
    }
}

/// Bounded FIFO of the agent's own experience.
#[derive(Debug, Clone)]
pub struct AgentBuffer {
    transitions: VecDeque<Transition>,
    capacity: usize,
}

pub const DEFAULT_AGENT_CAPACITY: usize = 1_000_000;

impl AgentBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("agent buffer capacity must be positive".into()));
        }
        Ok(AgentBuffer {
            transitions: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        })
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        check_source(&t, Source::Agent)?;
        if self.transitions.len() == self.capacity {
            self.transitions.pop_front();
        }
        self.transitions.push_back(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if self.transitions.is_empty() {
            return Err(Error::Empty("agent buffer"));
        }
        Ok((0..n)
            .map(|_| self.transitions[rng.gen_range(0..self.transitions.len())])
            .collect())
    }
}

pub fn sample_uniform<R: Rng + ?Sized>(items: &[Transition], n: usize, rng: &mut R) -> Result<Vec<Transition>> {
    if items.is_empty() {
        return Err(Error::Empty("expert buffer"));
    }
    Ok((0..n).map(|_| items[rng.gen_range(0..items.len())]).collect())
}

pub const EXPERT_FRACTION: f64 = 0.25;

/// Number of expert entries in a fixed-ratio batch of `n` (round half up).
pub fn expert_quota(n: usize) -> usize {
    (EXPERT_FRACTION * n as f64 + 0.5).floor() as usize
}

/// A batch with exactly `expert_quota(n)` expert entries and the rest from
/// the agent buffer, each drawn uniformly with replacement, then shuffled.
pub fn sample_fixed_ratio<R: Rng + ?Sized>(
    expert: &ExpertBuffer,
    agent: &AgentBuffer,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    if expert.is_empty() {
        return Err(Error::Empty("expert buffer"));
    }
    if agent.is_empty() {
        return Err(Error::Empty("agent buffer"));
    }
    let n_expert = expert_quota(n);
    let mut batch = expert.sample_uniform(n_expert, rng)?;
    batch.extend(agent.sample_uniform(n - n_expert, rng)?);
    // Fisher-Yates
    for i in (1..batch.len()).rev() {
        let j = rng.gen_range(0..=i);
        batch.swap(i, j);
    }
    Ok(batch)
}

/// Sum tree over `p_i^alpha` giving O(log n) proportional sampling and updates.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new() -> Self {
        SumTree {
            leaves: 1,
            nodes: vec![0.0; 2],
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn grow(&mut self) {
        let old: Vec<f64> = self.nodes[self.leaves..].to_vec();
        self.leaves *= 2;
        self.nodes = vec![0.0; 2 * self.leaves];
        self.nodes[self.leaves..self.leaves + old.len()].copy_from_slice(&old);
        for i in (1..self.leaves).rev() {
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    fn set(&mut self, index: usize, value: f64) {
        while index >= self.leaves {
            self.grow();
        }
        let mut i = index + self.leaves;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    fn get(&self, index: usize) -> f64 {
        self.nodes[index + self.leaves]
    }

    /// Leaf whose cumulative interval contains `mass` (in `[0, total)`).
    fn find(&self, mut mass: f64, len: usize) -> usize {
        let mut i = 1;
        while i < self.leaves {
            let left = self.nodes[2 * i];
            if mass < left {
                i *= 2;
            } else {
                mass -= left;
                i = 2 * i + 1;
            }
        }
        // Rounding can push past the last populated leaf.
        (i - self.leaves).min(len - 1)
    }
}

pub const DEFAULT_PER_ALPHA: f64 = 0.6;
pub const DEFAULT_PER_BETA_START: f64 = 0.4;
pub const DEFAULT_PER_EPSILON: f64 = 1e-6;

/// Proportional prioritized replay over expert and agent transitions alike.
#[derive(Debug, Clone)]
pub struct PriorityBuffer {
    transitions: Vec<Transition>,
    priorities: Vec<f64>,
    tree: SumTree,
    alpha: f64,
    epsilon: f64,
    /// Maximum number of agent entries; expert entries are never evicted.
    capacity: usize,
    /// Slots holding agent entries, oldest first.
    agent_slots: VecDeque<usize>,
    max_priority: f64,
}

#[derive(Debug, Clone)]
pub struct PrioritizedBatch {
    pub transitions: Vec<Transition>,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl PriorityBuffer {
    pub fn new(capacity: usize, alpha: f64, epsilon: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("priority buffer capacity must be positive".into()));
        }
        if !(alpha >= 0.0) || !(epsilon > 0.0) {
            return Err(Error::Config(format!(
                "PER needs alpha >= 0 and epsilon > 0, got alpha={alpha}, epsilon={epsilon}"
            )));
        }
        Ok(PriorityBuffer {
            transitions: Vec::new(),
            priorities: Vec::new(),
            tree: SumTree::new(),
            alpha,
            epsilon,
            capacity,
            agent_slots: VecDeque::new(),
            max_priority: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn agent_len(&self) -> usize {
        self.agent_slots.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn priority(&self, i: usize) -> Option<f64> {
        self.priorities.get(i).copied()
    }

    pub fn transition(&self, i: usize) -> Option<&Transition> {
        self.transitions.get(i)
    }

    /// Insert at the current maximum priority. Expert entries are permanent;
    /// agent entries are evicted oldest-first once `capacity` agent entries
    /// are held.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::Usage("transition contains non-finite values".into()));
        }
        let p = self.max_priority;
        match t.source {
            Source::Expert => self.insert_new(t, p),
            Source::Agent => {
                if self.agent_slots.len() < self.capacity {
                    self.insert_new(t, p);
                    self.agent_slots.push_back(self.transitions.len() - 1);
                } else {
                    let slot = self.agent_slots.pop_front().expect("capacity is positive");
                    self.transitions[slot] = t;
                    self.set_priority(slot, p);
                    self.agent_slots.push_back(slot);
                }
            }
        }
        Ok(())
    }

    fn insert_new(&mut self, t: Transition, p: f64) {
        self.transitions.push(t);
        self.priorities.push(p);
        self.tree.set(self.transitions.len() - 1, p.powf(self.alpha));
    }

    fn set_priority(&mut self, i: usize, p: f64) {
        self.priorities[i] = p;
        self.tree.set(i, p.powf(self.alpha));
    }

    /// Exact sampling probability of entry `i`.
    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, beta: f64, rng: &mut R) -> Result<PrioritizedBatch> {
        if self.transitions.is_empty() {
            return Err(Error::Empty("priority buffer"));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("PER beta must lie in [0, 1], got {beta}")));
        }
        let total = self.tree.total();
        let len = self.transitions.len();
        let mut indices = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            let i = self.tree.find(rng.gen::<f64>() * total, len);
            indices.push(i);
            weights.push((len as f64 * self.probability(i)).powf(-beta));
        }
        let max_w = weights.iter().cloned().fold(f64::MIN, f64::max);
        weights.iter_mut().for_each(|w| *w /= max_w);
        Ok(PrioritizedBatch {
            transitions: indices.iter().map(|&i| self.transitions[i]).collect(),
            indices,
            weights,
        })
    }

    /// `p_i <- |td_i| + epsilon`
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        if indices.len() != td_errors.len() {
            return Err(Error::shape("priority update", indices.len(), td_errors.len()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.transitions.len()) {
            return Err(Error::Usage(format!(
                "priority index {bad} out of range for buffer of {}",
                self.transitions.len()
            )));
        }
        for (&i, &td) in indices.iter().zip(td_errors) {
            if !td.is_finite() {
                return Err(Error::Numeric(format!("non-finite TD error {td}")));
            }
            let p = td.abs() + self.epsilon;
            self.max_priority = self.max_priority.max(p);
            self.set_priority(i, p);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tagged(tag: f64, source: Source) -> Transition {
        Transition {
            state: [tag; OBS_DIM],
            action: [0.0; ACTION_DIM],
            reward: tag,
            next_state: [tag; OBS_DIM],
            done: false,
            truncated: false,
            source,
        }
    }

    #[test]
    fn agent_buffer_fifo() {
        let mut b = AgentBuffer::new(2).unwrap();
        b.push(tagged(1.0, Source::Agent)).unwrap();
        assert_eq!(b.len(), 1);
        b.push(tagged(2.0, Source::Agent)).unwrap();
        b.push(tagged(3.0, Source::Agent)).unwrap();
        let kept: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(kept, vec![2.0, 3.0]);
    }

    #[test]
    fn source_mismatch_rejected() {
        let mut a = AgentBuffer::new(4).unwrap();
        assert!(matches!(a.push(tagged(0.0, Source::Expert)), Err(Error::Usage(_))));
        let mut e = ExpertBuffer::new();
        assert!(matches!(e.push(tagged(0.0, Source::Agent)), Err(Error::Usage(_))));
    }

    #[test]
    fn expert_buffer_never_evicts() {
        let mut e = ExpertBuffer::new();
        for i in 0..100_000 {
            e.push(tagged(i as f64, Source::Expert)).unwrap();
        }
        assert_eq!(e.len(), 100_000);
    }

    #[test]
    fn uniform_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut e = ExpertBuffer::new();
        assert!(matches!(e.sample_uniform(3, &mut rng), Err(Error::Empty(_))));
        e.push(tagged(7.0, Source::Expert)).unwrap();
        let batch = e.sample_uniform(5, &mut rng).unwrap();
        assert!(batch.iter().all(|t| t.reward == 7.0));
        assert_eq!(batch.len(), 5);

        for i in 1..4 {
            e.push(tagged(7.0 + i as f64, Source::Expert)).unwrap();
        }
        let draws = e.sample_uniform(100_000, &mut rng).unwrap();
        for tag in 7..11 {
            let freq = draws.iter().filter(|t| t.reward == tag as f64).count() as f64 / 1e5;
            assert!((freq - 0.25).abs() < 0.01, "tag {tag} freq {freq}");
        }

        let a = e.sample_uniform(16, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = e.sample_uniform(16, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quota_rounding() {
        assert_eq!(expert_quota(64), 16);
        assert_eq!(expert_quota(8), 2);
        assert_eq!(expert_quota(2), 1);
        assert_eq!(expert_quota(6), 2);
        assert_eq!(expert_quota(5), 1);
    }

    #[test]
    fn fixed_ratio_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut e = ExpertBuffer::new();
        let mut a = AgentBuffer::new(10).unwrap();
        assert!(matches!(sample_fixed_ratio(&e, &a, 8, &mut rng), Err(Error::Empty(_))));
        e.push(tagged(1.0, Source::Expert)).unwrap();
        assert!(matches!(sample_fixed_ratio(&e, &a, 8, &mut rng), Err(Error::Empty(_))));
        a.push(tagged(2.0, Source::Agent)).unwrap();
        for (n, n_e) in [(64, 16), (8, 2), (2, 1)] {
            let batch = sample_fixed_ratio(&e, &a, n, &mut rng).unwrap();
            assert_eq!(batch.len(), n);
            assert_eq!(batch.iter().filter(|t| t.source == Source::Expert).count(), n_e);
        }
    }

    #[test]
    fn per_exact_probabilities() {
        let mut b = PriorityBuffer::new(8, 1.0, 1e-6).unwrap();
        b.push(tagged(0.0, Source::Agent)).unwrap();
        b.push(tagged(1.0, Source::Agent)).unwrap();
        b.update_priorities(&[0, 1], &[1.0 - 1e-6, 3.0 - 1e-6]).unwrap();
        assert!((b.probability(0) - 0.25).abs() < 1e-12);
        assert!((b.probability(1) - 0.75).abs() < 1e-12);

        let mut b = PriorityBuffer::new(8, 0.5, 1e-6).unwrap();
        b.push(tagged(0.0, Source::Agent)).unwrap();
        b.push(tagged(1.0, Source::Agent)).unwrap();
        b.update_priorities(&[0, 1], &[1.0 - 1e-6, 4.0 - 1e-6]).unwrap();
        assert!((b.probability(0) - 1.0 / 3.0).abs() < 1e-12);
        assert!((b.probability(1) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn per_priority_floor_and_magnitude() {
        let mut b = PriorityBuffer::new(8, 0.6, 1e-6).unwrap();
        for i in 0..3 {
            b.push(tagged(i as f64, Source::Agent)).unwrap();
        }
        b.update_priorities(&[0], &[0.0]).unwrap();
        assert_eq!(b.priority(0), Some(1e-6));
        b.update_priorities(&[1, 2], &[-2.0, 2.0]).unwrap();
        assert_eq!(b.priority(1), b.priority(2));
        // optimistic insertion at the running max
        b.push(tagged(9.0, Source::Agent)).unwrap();
        assert_eq!(b.priority(3), Some(2.0 + 1e-6));
        assert!(matches!(b.update_priorities(&[4], &[1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn per_agent_eviction_keeps_expert() {
        let mut b = PriorityBuffer::new(2, 0.6, 1e-6).unwrap();
        b.push(tagged(-1.0, Source::Expert)).unwrap();
        for i in 0..5 {
            b.push(tagged(i as f64, Source::Agent)).unwrap();
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.transition(0).unwrap().reward, -1.0);
        let mut agent: Vec<f64> = (1..3).map(|i| b.transition(i).unwrap().reward).collect();
        agent.sort_by(f64::total_cmp);
        assert_eq!(agent, vec![3.0, 4.0]);
    }

    #[test]
    fn per_weights_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut b = PriorityBuffer::new(8, 1.0, 1e-6).unwrap();
        assert!(matches!(b.sample(4, 0.4, &mut rng), Err(Error::Empty(_))));
        for i in 0..4 {
            b.push(tagged(i as f64, Source::Agent)).unwrap();
        }
        b.update_priorities(&[0, 1, 2, 3], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let batch = b.sample(256, 0.5, &mut rng).unwrap();
        let max = batch.weights.iter().cloned().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        for (&i, &w) in batch.indices.iter().zip(&batch.weights) {
            assert_eq!(batch.transitions.len(), 256);
            let raw = (4.0 * b.probability(i)).powf(-0.5);
            let raw_min_p = (4.0 * b.probability(0)).powf(-0.5);
            assert!(w > 0.0 && w <= 1.0);
            if batch.indices.contains(&0) {
                assert!((w - raw / raw_min_p).abs() < 1e-12);
            }
        }
    }
}
