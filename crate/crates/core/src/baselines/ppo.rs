//! Proximal policy optimization with a shared-trunk actor-critic
//! (5-32-(4 logits + 1 value)), Monte-Carlo returns and a value baseline.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::agent::sample_categorical;
use crate::env::{Action, StateVector, NUM_ACTIONS, STATE_DIM};
use crate::error::{Error, Result};
use crate::learner::{AgentKind, Learner, Transition};
use crate::policy::PolicyFile;
use crate::seed::{self, Rng};

const VALUE_INDEX: usize = NUM_ACTIONS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub clip_eps: f64,
    /// Minimum number of steps collected before an update; updates happen at
    /// episode boundaries so every return is a complete Monte-Carlo return.
    pub rollout_len: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            learning_rate: 1e-3,
            gamma: 0.99,
            clip_eps: 0.2,
            rollout_len: 512,
            epochs: 4,
            minibatch: 64,
            value_coef: 0.5,
            entropy_coef: 0.01,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("ppo.hidden needs at least one nonzero layer"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("ppo.learning_rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("ppo.gamma must lie in [0, 1]"));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::config("ppo.clip_eps must lie in (0, 1)"));
        }
        if self.rollout_len == 0 || self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::config("ppo rollout_len, epochs and minibatch must be positive"));
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return Err(Error::config("ppo loss coefficients must be nonnegative"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![STATE_DIM];
        sizes.extend(&self.hidden);
        sizes.push(NUM_ACTIONS + 1);
        sizes
    }

    fn coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            clip_eps: self.clip_eps,
            value: self.value_coef,
            entropy: self.entropy_coef,
        }
    }
}

/// `min(r·A, clip(r, 1-ε, 1+ε)·A)`.
pub fn ppo_clipped_objective(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Log-softmax of the first `NUM_ACTIONS` outputs.
pub fn log_probs(output: &[f64]) -> [f64; NUM_ACTIONS] {
    let logits = &output[..NUM_ACTIONS];
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    std::array::from_fn(|i| logits[i] - lse)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutStep {
    pub state: [f64; STATE_DIM],
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Discounted returns, reset at episode ends, and advantages
    /// `G - V` normalized to zero mean and unit SD.
    pub fn finish(&mut self, gamma: f64) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Empty("PPO rollout"));
        }
        let n = self.steps.len();
        self.returns = vec![0.0; n];
        let mut g = 0.0;
        for i in (0..n).rev() {
            if self.steps[i].done {
                g = 0.0;
            }
            g = self.steps[i].reward + gamma * g;
            self.returns[i] = g;
        }
        let raw: Vec<f64> = (0..n).map(|i| self.returns[i] - self.steps[i].value).collect();
        let mean = raw.iter().sum::<f64>() / n as f64;
        let var = raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt().max(1e-8);
        self.advantages = raw.iter().map(|a| (a - mean) / sd).collect();
        if self.advantages.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numerical("non-finite PPO advantages".into()));
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.returns.clear();
        self.advantages.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_eps: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Loss `-mean(clip) + c_v·mean((V-G)²) - c_e·mean(H)` over the selected
/// rollout indices, and its gradient.
pub fn ppo_loss_and_grad(
    params: &Mlp,
    rollout: &Rollout,
    indices: &[usize],
    coef: LossCoefficients,
) -> Result<(f64, Mlp)> {
    if indices.is_empty() {
        return Err(Error::Empty("PPO minibatch"));
    }
    let m = indices.len() as f64;
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let mut grad_out = [0.0; NUM_ACTIONS + 1];
    for &i in indices {
        let step = &rollout.steps[i];
        let adv = rollout.advantages[i];
        let ret = rollout.returns[i];
        let cache = params.forward_cached(&step.state);
        let out = cache.output();
        let lp = log_probs(out);
        let probs = lp.map(f64::exp);
        let entropy = -probs.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
        let ratio = (lp[step.action] - step.log_prob).exp();
        let value_err = out[VALUE_INDEX] - ret;
        loss += (-ppo_clipped_objective(ratio, adv, coef.clip_eps)
            + coef.value * value_err * value_err
            - coef.entropy * entropy)
            / m;

        // the unclipped branch carries the gradient unless the clip binds
        let active = if adv >= 0.0 {
            ratio <= 1.0 + coef.clip_eps
        } else {
            ratio >= 1.0 - coef.clip_eps
        };
        let policy_scale = if active { ratio * adv } else { 0.0 };
        for j in 0..NUM_ACTIONS {
            let indicator = if j == step.action { 1.0 } else { 0.0 };
            let d_logp = indicator - probs[j];
            let d_entropy = -probs[j] * (lp[j] + entropy);
            grad_out[j] = (-policy_scale * d_logp - coef.entropy * d_entropy) / m;
        }
        grad_out[VALUE_INDEX] = 2.0 * coef.value * value_err / m;
        params.backward(&cache, &grad_out, &mut grads);
    }
    if !loss.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite PPO loss {loss} over {} samples",
            indices.len()
        )));
    }
    Ok((loss, grads))
}

/// `epochs` passes of shuffled minibatch SGD over a finished rollout.
/// Returns the mean minibatch loss of the last epoch.
pub fn ppo_update(
    params: &mut Mlp,
    rollout: &Rollout,
    config: &PpoConfig,
    rng: &mut Rng,
) -> Result<f64> {
    if rollout.is_empty() || rollout.advantages.len() != rollout.len() {
        return Err(Error::Usage("ppo_update needs a finished, nonempty rollout".into()));
    }
    let coef = config.coefficients();
    let mut order: Vec<usize> = (0..rollout.len()).collect();
    let mut last = 0.0;
    for _ in 0..config.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.minibatch) {
            let (loss, grads) = ppo_loss_and_grad(params, rollout, chunk, coef)?;
            params.sgd_step(&grads, config.learning_rate)?;
            total += loss;
            batches += 1;
        }
        last = total / batches as f64;
    }
    Ok(last)
}

pub struct Ppo {
    config: PpoConfig,
    net: Mlp,
    rollout: Rollout,
    rng: Rng,
    pending: Option<(usize, f64, f64)>,
}

impl Ppo {
    pub fn new(config: PpoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::sub_rng(seed, 0xB0);
        let net = Mlp::new(&config.layer_sizes(), &mut rng)?;
        Ok(Self {
            config,
            net,
            rollout: Rollout::default(),
            rng,
            pending: None,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn rollout(&self) -> &Rollout {
        &self.rollout
    }

    pub fn action_probs(&self, state: &StateVector) -> [f64; NUM_ACTIONS] {
        log_probs(&self.net.forward(&state.to_array())).map(f64::exp)
    }
}

impl Learner for Ppo {
    fn kind(&self) -> AgentKind {
        AgentKind::Ppo
    }

    fn begin_episode(&mut self, _episode: usize) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, state: &StateVector, _ip: u32) -> Result<Action> {
        let out = self.net.forward(&state.to_array());
        let lp = log_probs(&out);
        let a = sample_categorical(&mut self.rng, &lp.map(f64::exp));
        self.pending = Some((a, lp[a], out[VALUE_INDEX]));
        Action::from_index(a)
    }

    fn observe(&mut self, t: &Transition) -> Result<()> {
        let (action, log_prob, value) = match self.pending.take() {
            Some(p) if p.0 == t.action.index() => p,
            // action chosen elsewhere: score it under the current policy
            _ => {
                let out = self.net.forward(&t.state.to_array());
                let a = t.action.index();
                (a, log_probs(&out)[a], out[VALUE_INDEX])
            }
        };
        self.rollout.steps.push(RolloutStep {
            state: t.state.to_array(),
            action,
            reward: t.reward,
            done: t.done,
            log_prob,
            value,
        });
        Ok(())
    }

    fn end_episode(&mut self) -> Result<()> {
        if self.rollout.len() >= self.config.rollout_len {
            self.rollout.finish(self.config.gamma)?;
            ppo_update(&mut self.net, &self.rollout, &self.config, &mut self.rng)?;
            self.rollout.clear();
        }
        Ok(())
    }

    fn policy(&self) -> PolicyFile {
        PolicyFile::new(
            AgentKind::Ppo,
            "rollout",
            serde_json::to_value(&self.config).unwrap_or_default(),
            self.net.sizes(),
            self.net.params(),
        )
    }
}
