//! LogGuardQ: a linear Q-learner with temperature-decayed softmax selection,
//! visit-count curiosity and a dual (recent-IP / recent-reward) memory.
//!
//! Per step the learner
//!
//! 1. counts the visit to the (rounded) state,
//! 2. shapes the environment reward: with probability `penalty_prob` it
//!    subtracts `penalty_value`, then adds `curiosity_weight / sqrt(n + 1)`,
//! 3. pushes the IP and the shaped reward into memory,
//! 4. takes a TD step on the chosen action's weight column.
//!
//! The alternative exploration (epsilon schedules) and plasticity
//! (variance-scaled learning rate) rules are selectable through
//! [`AgentConfig`].

use std::collections::{HashMap, VecDeque};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{Action, ShortTermMemory, StateVector, NUM_ACTIONS, STATE_DIM};
use crate::error::{Error, Result};
use crate::learner::{AgentKind, Learner, Transition};
use crate::policy::PolicyFile;
use crate::seed::{self, Rng};

pub const LONG_TERM_CAPACITY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlasticityMode {
    /// Exponentially decayed learning rate with a floor.
    Schedule,
    /// Base rate scaled by the long-term reward variance.
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationMode {
    Softmax,
    EpsGreedy,
    AdaptiveEps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryMode {
    /// IP frequency from the environment's 100-slot recent-IP buffer.
    Bounded,
    /// IP frequency from an unbounded per-IP counter, clamped to 1.
    Counter,
}

impl MemoryMode {
    pub fn tag(self) -> &'static str {
        match self {
            MemoryMode::Bounded => "bounded",
            MemoryMode::Counter => "counter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub initial_learning_rate: f64,
    pub learning_rate_decay: f64,
    pub min_learning_rate: f64,
    pub initial_temperature: f64,
    pub temperature_decay: f64,
    pub min_temperature: f64,
    pub plasticity_mode: PlasticityMode,
    pub plasticity_k: f64,
    pub curiosity_enabled: bool,
    pub curiosity_weight: f64,
    pub penalty_prob: f64,
    pub penalty_value: f64,
    pub exploration_mode: ExplorationMode,
    pub memory_mode: MemoryMode,
    /// Standard deviation of the initial weights.
    pub init_weight_sd: f64,
    /// Bootstrap from the next state even on the final step of an episode.
    pub bootstrap_terminal: bool,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            initial_learning_rate: 0.02,
            learning_rate_decay: 0.999,
            min_learning_rate: 0.001,
            initial_temperature: 1.0,
            temperature_decay: 0.9995,
            min_temperature: 0.6,
            plasticity_mode: PlasticityMode::Schedule,
            plasticity_k: 0.1,
            curiosity_enabled: true,
            curiosity_weight: 1.0,
            penalty_prob: 0.05,
            penalty_value: 0.5,
            exploration_mode: ExplorationMode::Softmax,
            memory_mode: MemoryMode::Bounded,
            init_weight_sd: 0.01,
            bootstrap_terminal: true,
            seed: 0,
        }
    }
}

fn in_unit_decay(x: f64) -> bool {
    x > 0.0 && x <= 1.0
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1)"));
        }
        if !in_unit_decay(self.learning_rate_decay) || !in_unit_decay(self.temperature_decay) {
            return Err(Error::config("decay factors must lie in (0, 1]"));
        }
        if !(self.min_learning_rate > 0.0 && self.min_learning_rate <= self.initial_learning_rate) {
            return Err(Error::config(
                "learning rates need 0 < min_learning_rate <= initial_learning_rate",
            ));
        }
        if !(self.min_temperature > 0.0 && self.min_temperature <= self.initial_temperature) {
            return Err(Error::config(
                "temperatures need 0 < min_temperature <= initial_temperature",
            ));
        }
        if !(self.plasticity_k.is_finite() && self.plasticity_k >= 0.0) {
            return Err(Error::config("plasticity_k must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.penalty_prob) {
            return Err(Error::config("penalty_prob must lie in [0, 1]"));
        }
        if !self.penalty_value.is_finite() || !self.curiosity_weight.is_finite() {
            return Err(Error::config("penalty_value and curiosity_weight must be finite"));
        }
        if !(self.init_weight_sd.is_finite() && self.init_weight_sd >= 0.0) {
            return Err(Error::config("init_weight_sd must be nonnegative"));
        }
        Ok(())
    }
}

/// Linear Q-function weights, state dimension by action.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightMatrix(pub [[f64; NUM_ACTIONS]; STATE_DIM]);

impl WeightMatrix {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn random(rng: &mut Rng, sd: f64) -> Result<Self> {
        let normal = Normal::new(0.0, sd).map_err(|e| Error::config(e.to_string()))?;
        let mut w = Self::zeros();
        for row in w.0.iter_mut() {
            for x in row.iter_mut() {
                *x = normal.sample(rng);
            }
        }
        Ok(w)
    }

    pub fn q_values(&self, state: &StateVector) -> [f64; NUM_ACTIONS] {
        let s = state.to_array();
        let mut q = [0.0; NUM_ACTIONS];
        for (i, row) in self.0.iter().enumerate() {
            for (a, w) in row.iter().enumerate() {
                q[a] += s[i] * w;
            }
        }
        q
    }

    pub fn q(&self, state: &StateVector, action: Action) -> f64 {
        let s = state.to_array();
        (0..STATE_DIM).map(|i| s[i] * self.0[i][action.index()]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    /// Row-major: state feature outer, action inner.
    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != STATE_DIM * NUM_ACTIONS {
            return Err(Error::config(format!(
                "expected {} weights, got {}",
                STATE_DIM * NUM_ACTIONS,
                values.len()
            )));
        }
        let mut w = Self::zeros();
        for (i, row) in w.0.iter_mut().enumerate() {
            row.copy_from_slice(&values[i * NUM_ACTIONS..(i + 1) * NUM_ACTIONS]);
        }
        Ok(w)
    }
}

/// Boltzmann distribution over `q / temperature`, max-shifted for stability.
pub fn softmax(q: &[f64; NUM_ACTIONS], temperature: f64) -> Result<[f64; NUM_ACTIONS]> {
    if !(temperature > 0.0) {
        return Err(Error::config(format!("temperature must be positive, got {temperature}")));
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!("non-finite q-values {q:?}")));
    }
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_ACTIONS];
    for (pi, qi) in p.iter_mut().zip(q) {
        *pi = ((qi - max) / temperature).exp();
    }
    let total: f64 = p.iter().sum();
    for pi in p.iter_mut() {
        *pi /= total;
    }
    Ok(p)
}

pub fn sample_categorical(rng: &mut Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Samples an action from the softmax of the state's q-values.
pub fn select_action(
    state: &StateVector,
    weights: &WeightMatrix,
    temperature: f64,
    rng: &mut Rng,
) -> Result<(Action, [f64; NUM_ACTIONS])> {
    let probs = softmax(&weights.q_values(state), temperature)?;
    let action = Action::from_index(sample_categorical(rng, &probs))?;
    Ok((action, probs))
}

pub fn temperature_at(episode: usize, config: &AgentConfig) -> f64 {
    let decayed = config.initial_temperature * config.temperature_decay.powf(episode as f64);
    decayed.max(config.min_temperature)
}

pub fn curiosity_bonus(visit_count: u64) -> f64 {
    1.0 / ((visit_count as f64) + 1.0).sqrt()
}

/// Environment reward with the random penalty and the curiosity bonus applied.
pub fn shape_reward(base_reward: f64, visit_count: u64, rng: &mut Rng, config: &AgentConfig) -> f64 {
    let mut reward = base_reward;
    if rng.random::<f64>() < config.penalty_prob {
        reward -= config.penalty_value;
    }
    if config.curiosity_enabled {
        reward += config.curiosity_weight * curiosity_bonus(visit_count);
    }
    reward
}

pub fn learning_rate_at(episode: usize, reward_variance: f64, config: &AgentConfig) -> Result<f64> {
    match config.plasticity_mode {
        PlasticityMode::Schedule => {
            let decayed =
                config.initial_learning_rate * config.learning_rate_decay.powf(episode as f64);
            Ok(decayed.max(config.min_learning_rate))
        }
        PlasticityMode::Variance => {
            if !(reward_variance >= 0.0) {
                return Err(Error::Usage(format!(
                    "reward variance must be nonnegative, got {reward_variance}"
                )));
            }
            Ok(config.initial_learning_rate * (1.0 + config.plasticity_k * reward_variance))
        }
    }
}

/// Result of one TD step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdStep {
    pub delta: f64,
    /// Change of Q(state, action) produced by the step.
    pub q_change: f64,
}

/// `W[:, a] += eta * delta * s` with `delta = r + gamma * max_a' Q(s', a') - Q(s, a)`.
pub fn td_update(
    weights: &mut WeightMatrix,
    state: &StateVector,
    action: Action,
    reward: f64,
    next_state: Option<&StateVector>,
    eta: f64,
    gamma: f64,
) -> Result<TdStep> {
    if !(eta.is_finite() && eta != 0.0) {
        return Err(Error::Usage(format!("learning rate must be finite and nonzero, got {eta}")));
    }
    if !reward.is_finite() || !state.is_finite() || next_state.is_some_and(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite TD input".into()));
    }
    let bootstrap = next_state.map_or(0.0, |s| {
        weights.q_values(s).into_iter().fold(f64::NEG_INFINITY, f64::max)
    });
    let delta = reward + gamma * bootstrap - weights.q(state, action);
    let s = state.to_array();
    let a = action.index();
    for (row, si) in weights.0.iter_mut().zip(s) {
        row[a] += eta * delta * si;
    }
    if !weights.is_finite() {
        return Err(Error::Numerical(format!(
            "weights diverged (delta {delta}, eta {eta})"
        )));
    }
    let norm2: f64 = s.iter().map(|x| x * x).sum();
    Ok(TdStep {
        delta,
        q_change: eta * delta * norm2,
    })
}

/// ε = max(0.01, 0.1·e^(−0.001·t))
pub fn epsilon_at(t: usize) -> f64 {
    (0.1 * (-0.001 * t as f64).exp()).max(0.01)
}

/// ε = min(1, max(0.01, e^(−e/1000)·(1 + σ/|μ|))); the floor when μ = 0.
pub fn adaptive_epsilon(episode: usize, mean: f64, sd: f64) -> f64 {
    if mean == 0.0 || !mean.is_finite() || !sd.is_finite() {
        return 0.01;
    }
    let raw = (-(episode as f64) / 1000.0).exp() * (1.0 + sd / mean.abs());
    raw.clamp(0.01, 1.0)
}

/// Visit-count key: components rounded to three decimals.
pub type StateKey = [i64; STATE_DIM];

pub fn state_key(state: &StateVector) -> StateKey {
    state.to_array().map(|x| (x * 1000.0).round() as i64)
}

#[derive(Debug, Clone, Default)]
pub struct VisitCounter {
    counts: HashMap<StateKey, u64>,
}

impl VisitCounter {
    /// Records a visit and returns the updated count.
    pub fn visit(&mut self, key: StateKey) -> u64 {
        let c = self.counts.entry(key).or_default();
        *c += 1;
        *c
    }

    pub fn get(&self, key: &StateKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn distinct_states(&self) -> usize {
        self.counts.len()
    }
}

/// Population mean and variance of the long-term reward window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreStats {
    pub mean: f64,
    pub variance: f64,
    pub sd: f64,
    pub count: usize,
}

impl ScoreStats {
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (sum, count) = values.clone().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
        if count == 0 {
            return Self::default();
        }
        let mean = sum / count as f64;
        let variance = values.map(|x| (x - mean).powi(2)).sum::<f64>() / count as f64;
        Self {
            mean,
            variance,
            sd: variance.sqrt(),
            count,
        }
    }
}

/// Recent IPs (short term), recent rewards (long term), plus a lifetime
/// per-IP counter.
#[derive(Debug, Clone)]
pub struct DualMemory {
    pub short_term: ShortTermMemory,
    long_term: VecDeque<f64>,
    ip_counts: HashMap<u32, u64>,
    stats: ScoreStats,
}

impl Default for DualMemory {
    fn default() -> Self {
        Self {
            short_term: ShortTermMemory::default(),
            long_term: VecDeque::with_capacity(LONG_TERM_CAPACITY + 1),
            ip_counts: HashMap::new(),
            stats: ScoreStats::default(),
        }
    }
}

impl DualMemory {
    pub fn update(&mut self, ip: u32, reward: f64) {
        self.short_term.push(ip);
        *self.ip_counts.entry(ip).or_default() += 1;
        self.long_term.push_back(reward);
        if self.long_term.len() > LONG_TERM_CAPACITY {
            self.long_term.pop_front();
        }
        self.stats = ScoreStats::of(self.long_term.iter().copied());
    }

    pub fn stats(&self) -> ScoreStats {
        self.stats
    }

    pub fn long_term(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.long_term.iter().copied()
    }

    pub fn long_term_len(&self) -> usize {
        self.long_term.len()
    }

    pub fn ip_count(&self, ip: u32) -> u64 {
        self.ip_counts.get(&ip).copied().unwrap_or(0)
    }

    /// IP frequency as the lifetime counter sees it, clamped to [0, 1].
    pub fn counter_frequency(&self, ip: u32) -> f64 {
        (self.ip_count(ip) as f64 / 100.0).min(1.0)
    }
}

pub struct LogGuardQ {
    config: AgentConfig,
    weights: WeightMatrix,
    memory: DualMemory,
    visits: VisitCounter,
    rng: Rng,
    episode: usize,
    q_deltas: Vec<f64>,
}

impl LogGuardQ {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(config.seed);
        let weights = WeightMatrix::random(&mut rng, config.init_weight_sd)?;
        Ok(Self {
            config,
            weights,
            memory: DualMemory::default(),
            visits: VisitCounter::default(),
            rng,
            episode: 0,
            q_deltas: Vec::new(),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn memory(&self) -> &DualMemory {
        &self.memory
    }

    pub fn visits(&self) -> &VisitCounter {
        &self.visits
    }

    pub fn temperature(&self) -> f64 {
        temperature_at(self.episode, &self.config)
    }

    /// Applies the configured memory mode to an environment observation.
    fn perceive(&self, state: &StateVector, ip: u32) -> StateVector {
        match self.config.memory_mode {
            MemoryMode::Bounded => *state,
            MemoryMode::Counter => StateVector {
                ip_freq: self.memory.counter_frequency(ip),
                ..*state
            },
        }
    }

    pub fn greedy_action(&self, state: &StateVector) -> Action {
        Action::ALL[argmax(&self.weights.q_values(state))]
    }

    fn epsilon_greedy(&mut self, state: &StateVector, epsilon: f64) -> Action {
        if self.rng.random::<f64>() < epsilon {
            Action::ALL[self.rng.random_range(0..NUM_ACTIONS)]
        } else {
            self.greedy_action(state)
        }
    }
}

impl Learner for LogGuardQ {
    fn kind(&self) -> AgentKind {
        AgentKind::LogGuardQ
    }

    fn begin_episode(&mut self, episode: usize) -> Result<()> {
        self.episode = episode;
        Ok(())
    }

    fn act(&mut self, state: &StateVector, ip: u32) -> Result<Action> {
        let s = self.perceive(state, ip);
        match self.config.exploration_mode {
            ExplorationMode::Softmax => {
                let t = self.temperature();
                select_action(&s, &self.weights, t, &mut self.rng).map(|(a, _)| a)
            }
            ExplorationMode::EpsGreedy => Ok(self.epsilon_greedy(&s, epsilon_at(self.episode))),
            ExplorationMode::AdaptiveEps => {
                let stats = self.memory.stats();
                let eps = if stats.count == 0 {
                    1.0
                } else {
                    adaptive_epsilon(self.episode, stats.mean, stats.sd)
                };
                Ok(self.epsilon_greedy(&s, eps))
            }
        }
    }

    fn observe(&mut self, t: &Transition) -> Result<()> {
        let state = self.perceive(&t.state, t.ip);
        let visits = self.visits.visit(state_key(&state));
        let reward = shape_reward(t.reward, visits, &mut self.rng, &self.config);
        self.memory.update(t.ip, reward);

        let next = self.perceive(&t.next_state, t.next_ip);
        let eta = learning_rate_at(self.episode, self.memory.stats().variance, &self.config)?;
        let bootstrap = (!t.done || self.config.bootstrap_terminal).then_some(&next);
        let step = td_update(
            &mut self.weights,
            &state,
            t.action,
            reward,
            bootstrap,
            eta,
            self.config.gamma,
        )?;
        self.q_deltas.push(step.q_change.abs());
        Ok(())
    }

    fn q_deltas(&self) -> &[f64] {
        &self.q_deltas
    }

    fn policy(&self) -> PolicyFile {
        PolicyFile::new(
            AgentKind::LogGuardQ,
            self.config.memory_mode.tag(),
            serde_json::to_value(&self.config).unwrap_or_default(),
            vec![STATE_DIM, NUM_ACTIONS],
            self.weights.to_vec(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(v: [f64; 5]) -> StateVector {
        StateVector::from_array(v)
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.3; 4], 0.7).unwrap();
        for pi in p {
            assert!((pi - 0.25).abs() < 1e-15);
        }
        let p = softmax(&[1.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 3.0)).abs() < 1e-12);
        assert!((p[0] - 0.4754).abs() < 1e-4);
        let p = softmax(&[1.0, 0.5, 0.2, 0.0], 1e-4).unwrap();
        assert!(p[0] > 1.0 - 1e-12);
        assert!(softmax(&[0.0; 4], 0.0).is_err());
        assert!(softmax(&[0.0; 4], -1.0).is_err());
    }

    #[test]
    fn select_action_rejects_bad_temperature() {
        let mut rng = seed::rng(1);
        let w = WeightMatrix::zeros();
        assert!(select_action(&StateVector::default(), &w, 0.0, &mut rng).is_err());
        let (_, p) = select_action(&StateVector::default(), &w, 1.0, &mut rng).unwrap();
        assert_eq!(p, [0.25; 4]);
    }

    #[test]
    fn temperature_schedule() {
        let c = AgentConfig::default();
        assert_eq!(temperature_at(0, &c), 1.0);
        assert!((temperature_at(1, &c) - 0.9995).abs() < 1e-15);
        assert_eq!(temperature_at(1_000_000, &c), 0.6);
        let mut prev = f64::INFINITY;
        for e in (0..5_000).step_by(7) {
            let t = temperature_at(e, &c);
            assert!(t <= prev && (0.6..=1.0).contains(&t));
            prev = t;
        }
    }

    #[test]
    fn curiosity_values() {
        assert_eq!(curiosity_bonus(0), 1.0);
        assert_eq!(curiosity_bonus(3), 0.5);
        assert!((curiosity_bonus(99) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn shaping() {
        let c = AgentConfig::default();
        // penalty never fires / always fires
        let never = AgentConfig { penalty_prob: 0.0, ..c.clone() };
        let always = AgentConfig { penalty_prob: 1.0, ..c.clone() };
        let mut rng = seed::rng(2);
        assert_eq!(shape_reward(10.0, 0, &mut rng, &never), 11.0);
        assert_eq!(shape_reward(10.0, 0, &mut rng, &always), 10.5);
        let off = AgentConfig { curiosity_enabled: false, ..never };
        assert_eq!(shape_reward(10.0, 0, &mut rng, &off), 10.0);
        let weighted = AgentConfig { curiosity_weight: 1.5, penalty_prob: 0.0, ..c };
        assert_eq!(shape_reward(0.0, 3, &mut rng, &weighted), 0.75);
    }

    #[test]
    fn penalty_fires_at_configured_rate() {
        let c = AgentConfig { curiosity_enabled: false, ..AgentConfig::default() };
        let mut rng = seed::rng(9);
        let n = 100_000;
        let fired = (0..n).filter(|_| shape_reward(0.0, 0, &mut rng, &c) < 0.0).count();
        assert!((fired as f64 / n as f64 - 0.05).abs() < 0.003);
    }

    #[test]
    fn learning_rates() {
        let c = AgentConfig::default();
        assert_eq!(learning_rate_at(0, 0.0, &c).unwrap(), 0.02);
        assert_eq!(learning_rate_at(100_000, 0.0, &c).unwrap(), 0.001);
        let v = AgentConfig { plasticity_mode: PlasticityMode::Variance, ..c };
        assert_eq!(learning_rate_at(0, 0.0, &v).unwrap(), 0.02);
        assert!((learning_rate_at(0, 10.0, &v).unwrap() - 0.04).abs() < 1e-15);
        assert!(learning_rate_at(0, -1.0, &v).is_err());
    }

    #[test]
    fn td_examples() {
        let s = state([1.0, 0.0, 0.0, 0.0, 0.0]);
        let mut w = WeightMatrix::zeros();
        let step = td_update(&mut w, &s, Action::Benign, 10.0, Some(&s), 0.02, 0.99).unwrap();
        assert_eq!(step.delta, 10.0);
        assert!((w.0[0][1] - 0.2).abs() < 1e-15);
        for (i, row) in w.0.iter().enumerate() {
            for (a, x) in row.iter().enumerate() {
                if (i, a) != (0, 1) {
                    assert_eq!(*x, 0.0);
                }
            }
        }

        // zero state leaves weights untouched
        let mut rng = seed::rng(4);
        let mut w = WeightMatrix::random(&mut rng, 0.5).unwrap();
        let before = w;
        td_update(&mut w, &StateVector::default(), Action::Ignore, 3.0, Some(&s), 0.1, 0.9).unwrap();
        assert_eq!(w, before);

        // reward equal to the prediction gives delta 0
        let s2 = state([0.2, 1.0, 0.1, 0.3, 0.0]);
        let target = w.q(&s2, Action::Investigate) - 0.9 * w.q_values(&s).into_iter().fold(f64::MIN, f64::max);
        let step = td_update(&mut w, &s2, Action::Investigate, target, Some(&s), 0.1, 0.9).unwrap();
        assert!(step.delta.abs() < 1e-12);
        for (x, y) in w.to_vec().iter().zip(before.to_vec()) {
            assert!((x - y).abs() < 1e-12);
        }

        let mut w = WeightMatrix::zeros();
        assert!(td_update(&mut w, &s, Action::Benign, f64::NAN, None, 0.1, 0.9).is_err());
        assert!(td_update(&mut w, &s, Action::Benign, 1.0, None, 0.0, 0.9).is_err());
    }

    #[test]
    fn epsilon_schedules() {
        assert_eq!(epsilon_at(0), 0.1);
        assert_eq!(epsilon_at(1_000_000), 0.01);
        assert!((epsilon_at(1000) - 0.1 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((epsilon_at(1000) - 0.03679).abs() < 1e-5);
        assert_eq!(adaptive_epsilon(0, 5.0, 0.0), 1.0);
        assert_eq!(adaptive_epsilon(1_000_000, 5.0, 3.0), 0.01);
        assert!((adaptive_epsilon(1000, -4.0, 4.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((adaptive_epsilon(1000, 4.0, 4.0) - 0.7358).abs() < 1e-4);
        assert_eq!(adaptive_epsilon(10, 0.0, 4.0), 0.01);
    }

    #[test]
    fn state_keys() {
        let a = state([0.5, 1.0, 0.11, 0.2345, 0.0]);
        assert_eq!(state_key(&a), state_key(&a));
        let nudged = state([0.5 + 1e-6, 1.0, 0.11, 0.2345, 0.0]);
        assert_eq!(state_key(&a), state_key(&nudged));
        let ua = state([0.5, 1.0, 0.11, 0.2345, 1.0]);
        assert_ne!(state_key(&a), state_key(&ua));

        let mut visits = VisitCounter::default();
        assert_eq!(visits.visit(state_key(&a)), 1);
        assert_eq!(visits.visit(state_key(&nudged)), 2);
    }

    #[test]
    fn dual_memory_basics() {
        let mut m = DualMemory::default();
        for r in [2.0, 2.0, 2.0] {
            m.update(1, r);
        }
        assert_eq!((m.stats().mean, m.stats().variance), (2.0, 0.0));
        let mut m = DualMemory::default();
        m.update(1, 0.0);
        m.update(2, 10.0);
        assert_eq!((m.stats().mean, m.stats().variance, m.stats().sd), (5.0, 25.0, 5.0));
        for i in 0..250u32 {
            m.update(i, f64::from(i));
        }
        assert_eq!(m.long_term_len(), 100);
        assert_eq!(m.short_term.len(), 100);
        assert_eq!(m.long_term().next(), Some(150.0));
        assert_eq!(m.ip_count(1), 2);
        for _ in 0..300 {
            m.update(7, 0.0);
        }
        assert_eq!(m.counter_frequency(7), 1.0);
    }

    #[test]
    fn config_validation() {
        AgentConfig::default().validate().unwrap();
        let bad = [
            AgentConfig { gamma: 1.0, ..Default::default() },
            AgentConfig { temperature_decay: 0.0, ..Default::default() },
            AgentConfig { min_temperature: 2.0, ..Default::default() },
            AgentConfig { min_learning_rate: 0.5, ..Default::default() },
            AgentConfig { penalty_prob: 1.5, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    fn arb_state() -> impl Strategy<Value = StateVector> {
        prop::array::uniform5(-3.0f64..3.0).prop_map(StateVector::from_array)
    }

    proptest! {
        #[test]
        fn softmax_is_a_shift_invariant_distribution(
            q in prop::array::uniform4(-50.0f64..50.0),
            shift in -100.0f64..100.0,
            t in 0.05f64..5.0,
        ) {
            let p = softmax(&q, t).unwrap();
            let spread = q.iter().cloned().fold(f64::MIN, f64::max) - q.iter().cloned().fold(f64::MAX, f64::min);
            // strictly positive whenever exp(-spread / t) is representable
            if spread / t < 700.0 {
                prop_assert!(p.iter().all(|x| *x > 0.0));
            }
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted = softmax(&q.map(|x| x + shift), t).unwrap();
            for (a, b) in p.iter().zip(shifted) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn curiosity_times_root_is_one(n in 0u64..10_000_000) {
            prop_assert!((curiosity_bonus(n) * ((n + 1) as f64).sqrt() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn schedules_are_monotone_with_exact_floors(e in 0usize..200_000) {
            let c = AgentConfig::default();
            prop_assert!(temperature_at(e + 1, &c) <= temperature_at(e, &c));
            prop_assert!(temperature_at(e, &c) >= 0.6);
            let lr = |e| learning_rate_at(e, 0.0, &c).unwrap();
            prop_assert!(lr(e + 1) <= lr(e));
            prop_assert!(lr(e) >= 0.001);
            prop_assert!((0.01..=0.1).contains(&epsilon_at(e)));
            prop_assert!(epsilon_at(e + 1) <= epsilon_at(e));
        }

        #[test]
        fn td_step_touches_one_column_and_reverses(
            s in arb_state(),
            next in arb_state(),
            a in 0usize..4,
            r in -60.0f64..10.0,
            eta in 0.001f64..0.1,
            seed in any::<u64>(),
        ) {
            let mut rng = seed::rng(seed);
            let original = WeightMatrix::random(&mut rng, 0.1).unwrap();
            let action = Action::from_index(a).unwrap();
            let mut w = original;
            let step = td_update(&mut w, &s, action, r, Some(&next), eta, 0.99).unwrap();
            for i in 0..STATE_DIM {
                for b in 0..NUM_ACTIONS {
                    if b != a {
                        prop_assert_eq!(w.0[i][b], original.0[i][b]);
                    } else {
                        let expected = original.0[i][b] + eta * step.delta * s.to_array()[i];
                        prop_assert!((w.0[i][b] - expected).abs() < 1e-12);
                    }
                }
            }
            // undo with -eta and the same delta
            let sv = s.to_array();
            for i in 0..STATE_DIM {
                w.0[i][a] += -eta * step.delta * sv[i];
            }
            for (x, y) in w.to_vec().iter().zip(original.to_vec()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn running_stats_match_batch(rewards in prop::collection::vec(-70.0f64..20.0, 1..400)) {
            let mut m = DualMemory::default();
            for (i, r) in rewards.iter().enumerate() {
                m.update(i as u32 % 7, *r);
            }
            let tail = &rewards[rewards.len().saturating_sub(100)..];
            let n = tail.len() as f64;
            let mean = tail.iter().sum::<f64>() / n;
            let var = tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assert!((m.stats().mean - mean).abs() < 1e-9);
            prop_assert!((m.stats().variance - var).abs() < 1e-9);
            prop_assert!(m.short_term.len() <= 100 && m.long_term_len() <= 100);
        }
    }
}
