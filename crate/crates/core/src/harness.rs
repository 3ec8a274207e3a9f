//! Episode loop shared by every agent, and agent construction by kind.

use std::sync::Arc;

use crate::agent::{AgentConfig, LogGuardQ};
use crate::analytics::metrics::EpisodeRecord;
use crate::baselines::{dqn::Dqn, ppo::Ppo, BaselineConfig};
use crate::env::{Dataset, EnvConfig, LogEnv};
use crate::error::{Error, Result};
use crate::learner::{AgentKind, Learner};

/// Runs `episodes` episodes and returns one record per episode. Rewards in
/// the records are the environment's (noisy) rewards, before any shaping a
/// learner applies internally.
pub fn run_episodes(
    env: &mut LogEnv,
    learner: &mut dyn Learner,
    episodes: usize,
) -> Result<Vec<EpisodeRecord>> {
    let mut records = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        learner.begin_episode(episode)?;
        let mut state = env.reset()?;
        let mut record = EpisodeRecord::new(episode);
        loop {
            let ip = env
                .current_record()
                .map(|r| r.ip)
                .ok_or_else(|| Error::Usage("episode has no current entry".into()))?;
            let action = learner.act(&state, ip)?;
            let step = env.step(action)?;
            let next_ip = env.current_record().map_or(ip, |r| r.ip);
            learner.observe(&crate::learner::Transition {
                state,
                ip,
                action,
                reward: step.reward,
                next_state: step.state,
                next_ip,
                done: step.done,
            })?;
            record.record(action, step.outcome, step.reward);
            state = step.state;
            if step.done {
                break;
            }
        }
        learner.end_episode()?;
        records.push(record);
    }
    Ok(records)
}

pub fn build_learner(
    kind: AgentKind,
    agent: &AgentConfig,
    baselines: &BaselineConfig,
    episodes: usize,
) -> Result<Box<dyn Learner + Send>> {
    Ok(match kind {
        AgentKind::LogGuardQ => Box::new(LogGuardQ::new(agent.clone())?),
        AgentKind::Dqn => Box::new(Dqn::new(baselines.dqn.clone(), baselines.seed, episodes)?),
        AgentKind::Ppo => Box::new(Ppo::new(baselines.ppo.clone(), baselines.seed)?),
    })
}

/// A finished training run.
pub struct TrainedRun {
    pub records: Vec<EpisodeRecord>,
    pub learner: Box<dyn Learner + Send>,
}

/// Builds the environment and learner and trains for `episodes` episodes.
pub fn train(
    kind: AgentKind,
    dataset: Arc<Dataset>,
    env: &EnvConfig,
    agent: &AgentConfig,
    baselines: &BaselineConfig,
    episodes: usize,
) -> Result<TrainedRun> {
    let mut env = LogEnv::new(dataset, env.clone())?;
    let mut learner = build_learner(kind, agent, baselines, episodes)?;
    let records = run_episodes(&mut env, learner.as_mut(), episodes)?;
    Ok(TrainedRun { records, learner })
}
