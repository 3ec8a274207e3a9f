//! Deep Q-network: a 5-32-32-4 value net, uniform experience replay, and a
//! periodically synced target network.

use std::collections::VecDeque;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::agent::argmax;
use crate::env::{Action, StateVector, NUM_ACTIONS, STATE_DIM};
use crate::error::{Error, Result};
use crate::learner::{AgentKind, Learner, Transition};
use crate::policy::PolicyFile;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Environment steps between target-network syncs.
    pub target_sync: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            learning_rate: 1e-3,
            gamma: 0.99,
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync: 100,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("dqn.hidden needs at least one nonzero layer"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("dqn.learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("dqn.gamma must lie in [0, 1)"));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size || self.target_sync == 0 {
            return Err(Error::config(
                "dqn needs batch_size > 0, replay_capacity >= batch_size, target_sync > 0",
            ));
        }
        let unit = 0.0..=1.0;
        if !(unit.contains(&self.epsilon_start)
            && unit.contains(&self.epsilon_end)
            && self.epsilon_end > 0.0
            && self.epsilon_end <= self.epsilon_start)
        {
            return Err(Error::config("dqn epsilons need 0 < end <= start <= 1"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![STATE_DIM];
        sizes.extend(&self.hidden);
        sizes.push(NUM_ACTIONS);
        sizes
    }

    /// Exponential decay from `epsilon_start` to `epsilon_end` across the run.
    pub fn epsilon(&self, episode: usize, total_episodes: usize) -> f64 {
        if total_episodes <= 1 {
            return self.epsilon_start;
        }
        let progress = (episode as f64 / (total_episodes - 1) as f64).min(1.0);
        self.epsilon_start * (self.epsilon_end / self.epsilon_start).powf(progress)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: [f64; STATE_DIM],
    pub action: usize,
    pub reward: f64,
    pub next_state: [f64; STATE_DIM],
    pub done: bool,
}

/// FIFO replay memory; the oldest experience is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, rng: &mut Rng, n: usize) -> Vec<Experience> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// Epsilon-greedy over the value net's outputs.
pub fn dqn_act(state: &StateVector, params: &Mlp, epsilon: f64, rng: &mut Rng) -> Action {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Action::ALL[rng.random_range(0..NUM_ACTIONS)];
    }
    Action::ALL[argmax(&params.forward(&state.to_array()))]
}

/// Mean squared TD error over the batch and its gradient with respect to the
/// online parameters. Targets come from the target network and are constants.
pub fn dqn_loss_and_grad(
    params: &Mlp,
    target_params: &Mlp,
    batch: &[Experience],
    gamma: f64,
) -> Result<(f64, Mlp)> {
    if batch.is_empty() {
        return Err(Error::Empty("DQN batch"));
    }
    let n = batch.len() as f64;
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let mut grad_out = [0.0; NUM_ACTIONS];
    for e in batch {
        let target = if e.done {
            e.reward
        } else {
            let next = target_params.forward(&e.next_state);
            e.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let cache = params.forward_cached(&e.state);
        let err = cache.output()[e.action] - target;
        loss += err * err / n;
        grad_out.fill(0.0);
        grad_out[e.action] = 2.0 * err / n;
        params.backward(&cache, &grad_out, &mut grads);
    }
    if !loss.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite DQN loss {loss} over a batch of {}",
            batch.len()
        )));
    }
    Ok((loss, grads))
}

/// One SGD step on the batch; returns the loss before the step.
pub fn dqn_train_batch(
    params: &mut Mlp,
    target_params: &Mlp,
    batch: &[Experience],
    gamma: f64,
    lr: f64,
) -> Result<f64> {
    let (loss, grads) = dqn_loss_and_grad(params, target_params, batch, gamma)?;
    params.sgd_step(&grads, lr)?;
    Ok(loss)
}

pub fn dqn_sync_target(params: &Mlp, target_params: &mut Mlp) {
    target_params.clone_from(params);
}

pub struct Dqn {
    config: DqnConfig,
    online: Mlp,
    target: Mlp,
    replay: ReplayBuffer,
    rng: Rng,
    episode: usize,
    total_episodes: usize,
    steps: usize,
}

impl Dqn {
    pub fn new(config: DqnConfig, seed: u64, total_episodes: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::sub_rng(seed, 0xD0);
        let online = Mlp::new(&config.layer_sizes(), &mut rng)?;
        Ok(Self {
            target: online.clone(),
            replay: ReplayBuffer::new(config.replay_capacity),
            online,
            config,
            rng,
            episode: 0,
            total_episodes,
            steps: 0,
        })
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon(self.episode, self.total_episodes)
    }
}

impl Learner for Dqn {
    fn kind(&self) -> AgentKind {
        AgentKind::Dqn
    }

    fn begin_episode(&mut self, episode: usize) -> Result<()> {
        self.episode = episode;
        Ok(())
    }

    fn act(&mut self, state: &StateVector, _ip: u32) -> Result<Action> {
        let eps = self.epsilon();
        Ok(dqn_act(state, &self.online, eps, &mut self.rng))
    }

    fn observe(&mut self, t: &Transition) -> Result<()> {
        self.replay.push(Experience {
            state: t.state.to_array(),
            action: t.action.index(),
            reward: t.reward,
            next_state: t.next_state.to_array(),
            done: t.done,
        });
        self.steps += 1;
        if self.replay.len() >= self.config.batch_size {
            let batch = self.replay.sample(&mut self.rng, self.config.batch_size);
            dqn_train_batch(
                &mut self.online,
                &self.target,
                &batch,
                self.config.gamma,
                self.config.learning_rate,
            )?;
        }
        if self.steps % self.config.target_sync == 0 {
            dqn_sync_target(&self.online, &mut self.target);
        }
        Ok(())
    }

    fn policy(&self) -> PolicyFile {
        PolicyFile::new(
            AgentKind::Dqn,
            "replay",
            serde_json::to_value(&self.config).unwrap_or_default(),
            self.online.sizes(),
            self.online.params(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experience(rng: &mut Rng, done: bool) -> Experience {
        let mut s = [0.0; STATE_DIM];
        let mut n = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            s[i] = rng.random_range(-1.0..1.0);
            n[i] = rng.random_range(-1.0..1.0);
        }
        Experience {
            state: s,
            action: rng.random_range(0..NUM_ACTIONS),
            reward: rng.random_range(-10.0..10.0),
            next_state: n,
            done,
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = seed::rng(1);
        let net = Mlp::new(&[5, 8, 4], &mut rng).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[dqn_act(&StateVector::default(), &net, 1.0, &mut rng).index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.03, "{counts:?}");
        }
    }

    #[test]
    fn greedy_is_deterministic_argmax() {
        let mut rng = seed::rng(2);
        let net = Mlp::new(&[5, 8, 4], &mut rng).unwrap();
        let s = StateVector::from_array([0.1, 1.0, 0.2, 0.3, 1.0]);
        let q = net.forward(&s.to_array());
        let expected = Action::ALL[argmax(&q)];
        for _ in 0..100 {
            assert_eq!(dqn_act(&s, &net, 0.0, &mut rng), expected);
        }
    }

    #[test]
    fn zero_discount_targets_the_reward() {
        let mut rng = seed::rng(3);
        let net = Mlp::new(&[5, 6, 4], &mut rng).unwrap();
        let e = experience(&mut rng, false);
        let (loss, _) = dqn_loss_and_grad(&net, &net, &[e], 0.0).unwrap();
        let q = net.forward(&e.state)[e.action];
        assert!((loss - (q - e.reward).powi(2)).abs() < 1e-12);
        // terminal transitions ignore the bootstrap regardless of gamma
        let done = Experience { done: true, ..e };
        let (loss, _) = dqn_loss_and_grad(&net, &net, &[done], 0.99).unwrap();
        assert!((loss - (q - e.reward).powi(2)).abs() < 1e-12);
        assert!(dqn_loss_and_grad(&net, &net, &[], 0.9).is_err());
    }

    #[test]
    fn loss_decreases_on_a_fixed_batch() {
        let mut rng = seed::rng(4);
        let mut net = Mlp::new(&[5, 32, 32, 4], &mut rng).unwrap();
        let target = net.clone();
        let batch: Vec<_> = (0..32).map(|i| experience(&mut rng, i % 3 == 0)).collect();
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let loss = dqn_train_batch(&mut net, &target, &batch, 0.9, 1e-3).unwrap();
            assert!(loss <= prev + 1e-12, "{loss} > {prev}");
            prev = loss;
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seed::rng(7);
        for trial in 0..5 {
            let net = Mlp::new(&[5, 4, 3, 4], &mut rng).unwrap();
            let mut target = Mlp::new(&[5, 4, 3, 4], &mut rng).unwrap();
            target.scale(0.5);
            let batch: Vec<_> = (0..4).map(|i| experience(&mut rng, i == trial % 4)).collect();
            let (_, grads) = dqn_loss_and_grad(&net, &target, &batch, 0.9).unwrap();
            let analytic = grads.params();
            let base = net.params();
            let h = 1e-5;
            for i in 0..base.len() {
                let mut p = base.clone();
                let mut probe = net.clone();
                p[i] += h;
                probe.set_params(&p).unwrap();
                let up = dqn_loss_and_grad(&probe, &target, &batch, 0.9).unwrap().0;
                p[i] -= 2.0 * h;
                probe.set_params(&p).unwrap();
                let down = dqn_loss_and_grad(&probe, &target, &batch, 0.9).unwrap().0;
                let numeric = (up - down) / (2.0 * h);
                let scale = numeric.abs().max(analytic[i].abs()).max(1e-6);
                assert!((numeric - analytic[i]).abs() / scale < 1e-4, "param {i}: {numeric} vs {}", analytic[i]);
            }
        }
    }

    #[test]
    fn target_sync() {
        let mut rng = seed::rng(5);
        let mut online = Mlp::new(&[5, 8, 4], &mut rng).unwrap();
        let mut target = online.clone();
        let batch: Vec<_> = (0..8).map(|_| experience(&mut rng, false)).collect();
        for _ in 0..3 {
            dqn_train_batch(&mut online, &target, &batch, 0.9, 1e-2).unwrap();
        }
        assert_ne!(online, target);
        dqn_sync_target(&online, &mut target);
        assert_eq!(online, target);
        dqn_sync_target(&online, &mut target);
        assert_eq!(online, target);
    }

    #[test]
    fn replay_is_fifo_and_samples_stored_items() {
        let mut rng = seed::rng(6);
        let mut buf = ReplayBuffer::new(3);
        let items: Vec<_> = (0..5)
            .map(|i| Experience {
                reward: i as f64,
                ..experience(&mut rng, false)
            })
            .collect();
        for e in &items {
            buf.push(*e);
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = buf.iter().map(|e| e.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
        for e in buf.sample(&mut rng, 50) {
            assert!(items[2..].contains(&e));
        }
    }

    #[test]
    fn epsilon_schedule_spans_start_to_end() {
        let c = DqnConfig::default();
        assert_eq!(c.epsilon(0, 2_000), 1.0);
        assert!((c.epsilon(1_999, 2_000) - 0.05).abs() < 1e-12);
        assert!(c.epsilon(500, 2_000) > c.epsilon(501, 2_000));
    }
}
