//! The log-classification MDP.
//!
//! An episode starts at a random entry of a uniformly chosen chunk and walks
//! forward one entry per step. Each step the agent labels the current entry,
//! receives a reward from the reward table (plus optional Gaussian noise), and
//! the entry's IP enters the short-term memory that drives the IP-frequency
//! feature. The memory persists across episodes.

use std::collections::{HashMap, VecDeque};
use std::net::Ipv4Addr;
use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loggen;
use crate::logmodel::{is_suspicious_ua, LogEntry};
use crate::seed::{self, Rng};

pub const STATE_DIM: usize = 5;
pub const NUM_ACTIONS: usize = 4;
pub const SHORT_TERM_CAPACITY: usize = 100;

/// Normalized observation for one log entry.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub ip_freq: f64,
    pub status_feature: f64,
    pub uri_len_norm: f64,
    pub bytes_norm: f64,
    pub suspicious_ua: f64,
}

impl StateVector {
    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.ip_freq,
            self.status_feature,
            self.uri_len_norm,
            self.bytes_norm,
            self.suspicious_ua,
        ]
    }

    pub fn from_array(v: [f64; STATE_DIM]) -> Self {
        Self {
            ip_freq: v[0],
            status_feature: v[1],
            uri_len_norm: v[2],
            bytes_norm: v[3],
            suspicious_ua: v[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Malicious = 0,
    Benign = 1,
    Investigate = 2,
    Ignore = 3,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Malicious,
        Action::Benign,
        Action::Investigate,
        Action::Ignore,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Usage(format!("no action with index {i}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
    Neutral,
}

/// Confusion outcome of labeling one entry.
pub fn classify_outcome(action: Action, is_anomaly: bool) -> Outcome {
    match (action, is_anomaly) {
        (Action::Malicious, true) => Outcome::TruePositive,
        (Action::Malicious, false) => Outcome::FalsePositive,
        (Action::Benign | Action::Ignore, true) => Outcome::FalseNegative,
        (Action::Benign, false) => Outcome::TrueNegative,
        (Action::Investigate, _) | (Action::Ignore, false) => Outcome::Neutral,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardTable {
    pub true_positive: f64,
    pub false_positive: f64,
    /// Also charged for ignoring an anomaly.
    pub false_negative: f64,
    pub true_negative: f64,
    pub investigate_anomaly: f64,
    pub investigate_normal: f64,
    pub ignore_normal: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        Self {
            true_positive: 10.0,
            false_positive: -60.0,
            false_negative: -5.0,
            true_negative: 2.0,
            investigate_anomaly: 5.0,
            investigate_normal: -1.0,
            ignore_normal: 0.0,
        }
    }
}

impl RewardTable {
    pub fn base_reward(&self, action: Action, is_anomaly: bool) -> f64 {
        match (action, is_anomaly) {
            (Action::Malicious, true) => self.true_positive,
            (Action::Malicious, false) => self.false_positive,
            (Action::Benign | Action::Ignore, true) => self.false_negative,
            (Action::Benign, false) => self.true_negative,
            (Action::Investigate, true) => self.investigate_anomaly,
            (Action::Investigate, false) => self.investigate_normal,
            (Action::Ignore, false) => self.ignore_normal,
        }
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.true_positive,
            self.false_positive,
            self.false_negative,
            self.true_negative,
            self.investigate_anomaly,
            self.investigate_normal,
            self.ignore_normal,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub max_steps: usize,
    /// Discount factor; consumed by the agents, kept here with the MDP.
    pub gamma: f64,
    pub noise_sd: f64,
    pub noise_enabled: bool,
    pub chunk_size: usize,
    pub rewards: RewardTable,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            max_steps: 5,
            gamma: 0.99,
            noise_sd: 0.05,
            noise_enabled: true,
            chunk_size: 100_000,
            rewards: RewardTable::default(),
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1)"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::config("noise_sd must be nonnegative"));
        }
        if self.chunk_size == 0 {
            return Err(Error::config("chunk_size must be positive"));
        }
        if self.rewards.values().iter().any(|r| !r.is_finite()) {
            return Err(Error::config("reward table entries must be finite"));
        }
        Ok(())
    }
}

/// Maps an address to a memory key. Non-IPv4 text falls back to a stable hash.
pub fn ip_key(ip: &str) -> u32 {
    match ip.parse::<Ipv4Addr>() {
        Ok(addr) => u32::from(addr),
        Err(_) => ip
            .bytes()
            .fold(0x811C_9DC5u32, |h, b| (h ^ u32::from(b)).wrapping_mul(0x0100_0193)),
    }
}

/// FIFO of the most recent client addresses, with O(1) occurrence counts.
#[derive(Debug, Clone)]
pub struct ShortTermMemory {
    capacity: usize,
    buffer: VecDeque<u32>,
    counts: HashMap<u32, u32>,
}

impl Default for ShortTermMemory {
    fn default() -> Self {
        Self::new(SHORT_TERM_CAPACITY)
    }
}

impl ShortTermMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            buffer: VecDeque::with_capacity(capacity + 1),
            counts: HashMap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn push(&mut self, ip: u32) {
        self.buffer.push_back(ip);
        *self.counts.entry(ip).or_default() += 1;
        if self.buffer.len() > self.capacity {
            if let Some(old) = self.buffer.pop_front() {
                if let Some(c) = self.counts.get_mut(&old) {
                    *c -= 1;
                    if *c == 0 {
                        self.counts.remove(&old);
                    }
                }
            }
        }
    }

    pub fn count(&self, ip: u32) -> u32 {
        self.counts.get(&ip).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.buffer.iter().copied()
    }

    pub fn clear(&mut self) {
        self.buffer.clear();
        self.counts.clear();
    }
}

/// {200 -> 0, 401 -> 1, 403 -> 2, anything else -> 3}
pub fn status_feature(status: u16) -> f64 {
    match status {
        200 => 0.0,
        401 => 1.0,
        403 => 2.0,
        _ => 3.0,
    }
}

/// The fields of a log entry the environment actually reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvRecord {
    pub ip: u32,
    pub status: u16,
    pub uri_len: u32,
    pub bytes: u64,
    pub suspicious_ua: bool,
    pub anomaly: bool,
}

impl From<&LogEntry> for EnvRecord {
    fn from(e: &LogEntry) -> Self {
        Self {
            ip: ip_key(&e.ip),
            status: e.status,
            uri_len: e.uri.chars().count() as u32,
            bytes: e.bytes,
            suspicious_ua: is_suspicious_ua(&e.user_agent),
            anomaly: e.is_anomaly(),
        }
    }
}

pub fn record_state(record: &EnvRecord, short_term: &ShortTermMemory) -> StateVector {
    let freq = f64::from(short_term.count(record.ip)) / short_term.capacity() as f64;
    StateVector {
        ip_freq: freq.clamp(0.0, 1.0),
        status_feature: status_feature(record.status),
        uri_len_norm: f64::from(record.uri_len) / 100.0,
        bytes_norm: record.bytes as f64 / 10_000.0,
        suspicious_ua: if record.suspicious_ua { 1.0 } else { 0.0 },
    }
}

/// Observation for `entry` given the recent-IP buffer.
pub fn build_state(entry: &LogEntry, short_term: &ShortTermMemory) -> StateVector {
    record_state(&EnvRecord::from(entry), short_term)
}

/// A loaded dataset in the compact form the environment steps through.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    records: Vec<EnvRecord>,
}

impl Dataset {
    pub fn from_entries(entries: &[LogEntry]) -> Self {
        Self {
            records: entries.iter().map(EnvRecord::from).collect(),
        }
    }

    pub fn from_records(records: Vec<EnvRecord>) -> Self {
        Self { records }
    }

    /// Loads a generated log and its label sidecar without keeping the
    /// full text records in memory.
    pub fn load(log_path: &Path, labels_path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        loggen::for_each_entry(log_path, labels_path, |e| {
            records.push(EnvRecord::from(&e));
            Ok(())
        })?;
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EnvRecord] {
        &self.records
    }

    pub fn anomaly_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.anomaly).count() as f64 / self.records.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub state: StateVector,
    /// Base reward plus noise.
    pub reward: f64,
    pub base_reward: f64,
    pub done: bool,
    pub outcome: Outcome,
    pub was_anomaly: bool,
}

pub struct LogEnv {
    dataset: Arc<Dataset>,
    config: EnvConfig,
    rng: Rng,
    noise: Option<Normal<f64>>,
    memory: ShortTermMemory,
    chunk: usize,
    chunk_end: usize,
    cursor: usize,
    steps: usize,
    done: bool,
}

impl LogEnv {
    pub fn new(dataset: Arc<Dataset>, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let noise = if config.noise_enabled && config.noise_sd > 0.0 {
            Some(Normal::new(0.0, config.noise_sd).map_err(|e| Error::config(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            rng: seed::rng(config.seed),
            dataset,
            config,
            noise,
            memory: ShortTermMemory::default(),
            chunk: 0,
            chunk_end: 0,
            cursor: 0,
            steps: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn num_chunks(&self) -> usize {
        self.dataset.len().div_ceil(self.config.chunk_size)
    }

    pub fn current_chunk(&self) -> usize {
        self.chunk
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn memory(&self) -> &ShortTermMemory {
        &self.memory
    }

    /// The entry the agent is about to label.
    pub fn current_record(&self) -> Option<&EnvRecord> {
        if self.done {
            None
        } else {
            self.dataset.records.get(self.cursor)
        }
    }

    fn state_at(&self, index: usize) -> StateVector {
        record_state(&self.dataset.records[index], &self.memory)
    }

    /// Picks a chunk uniformly and a start entry uniformly within it.
    pub fn reset(&mut self) -> Result<StateVector> {
        if self.dataset.is_empty() {
            return Err(Error::Dataset("cannot reset on an empty dataset".into()));
        }
        let size = self.config.chunk_size;
        self.chunk = self.rng.random_range(0..self.num_chunks());
        let start = self.chunk * size;
        self.chunk_end = (start + size).min(self.dataset.len());
        self.cursor = self.rng.random_range(start..self.chunk_end);
        self.steps = 0;
        self.done = false;
        Ok(self.state_at(self.cursor))
    }

    /// Labels the current entry and advances. When the chunk runs out, the
    /// returned state is that of the chunk's final entry.
    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode; call reset".into()));
        }
        let record = self.dataset.records[self.cursor];
        let outcome = classify_outcome(action, record.anomaly);
        let base_reward = self.config.rewards.base_reward(action, record.anomaly);
        let noise = self.noise.map_or(0.0, |n| n.sample(&mut self.rng));

        self.memory.push(record.ip);
        self.steps += 1;
        self.cursor += 1;
        let exhausted = self.cursor >= self.chunk_end;
        self.done = self.steps >= self.config.max_steps || exhausted;
        let state = self.state_at(if exhausted { self.chunk_end - 1 } else { self.cursor });

        Ok(StepResult {
            state,
            reward: base_reward + noise,
            base_reward,
            done: self.done,
            outcome,
            was_anomaly: record.anomaly,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ip: u32, anomaly: bool) -> EnvRecord {
        EnvRecord {
            ip,
            status: if anomaly { 401 } else { 200 },
            uri_len: 11,
            bytes: 2_000,
            suspicious_ua: false,
            anomaly,
        }
    }

    fn env_with(records: Vec<EnvRecord>, chunk: usize, noise: bool) -> LogEnv {
        let config = EnvConfig {
            chunk_size: chunk,
            noise_enabled: noise,
            seed: 3,
            ..EnvConfig::default()
        };
        LogEnv::new(Arc::new(Dataset::from_records(records)), config).unwrap()
    }

    fn entry(ip: &str, uri: &str, status: u16, bytes: u64, ua: &str) -> LogEntry {
        LogEntry {
            ip: ip.into(),
            timestamp: 0,
            method: "GET".into(),
            uri: uri.into(),
            protocol: "HTTP/1.1".into(),
            status,
            bytes,
            referrer: "-".into(),
            user_agent: ua.into(),
            label: None,
        }
    }

    #[test]
    fn ip_frequency_is_share_of_buffer() {
        let mut mem = ShortTermMemory::default();
        let ip = ip_key("10.0.0.9");
        for i in 0..100 {
            mem.push(if i % 2 == 0 { ip } else { 1000 + i });
        }
        let s = build_state(&entry("10.0.0.9", "/", 200, 0, "-"), &mem);
        assert_eq!(s.ip_freq, 0.5);
    }

    #[test]
    fn normalizations_and_status_map() {
        let mem = ShortTermMemory::default();
        let uri = format!("/{}", "a".repeat(99));
        let s = build_state(&entry("1.2.3.4", &uri, 200, 10_000, "curl/8"), &mem);
        assert_eq!(s.uri_len_norm, 1.0);
        assert_eq!(s.bytes_norm, 1.0);
        assert_eq!(s.status_feature, 0.0);
        assert_eq!(s.suspicious_ua, 1.0);
        assert_eq!(s.ip_freq, 0.0);
        assert_eq!(status_feature(401), 1.0);
        assert_eq!(status_feature(403), 2.0);
        assert_eq!(status_feature(500), 3.0);
        assert_eq!(status_feature(418), 3.0);
    }

    #[test]
    fn memory_evicts_oldest_first() {
        let mut mem = ShortTermMemory::default();
        for ip in 0..101 {
            mem.push(ip);
        }
        assert_eq!(mem.len(), 100);
        assert_eq!(mem.count(0), 0);
        assert_eq!(mem.count(1), 1);
        assert_eq!(mem.iter().next(), Some(1));
    }

    #[test]
    fn outcome_table() {
        use Action::*;
        use Outcome::*;
        assert_eq!(classify_outcome(Malicious, true), TruePositive);
        assert_eq!(classify_outcome(Malicious, false), FalsePositive);
        assert_eq!(classify_outcome(Benign, true), FalseNegative);
        assert_eq!(classify_outcome(Ignore, true), FalseNegative);
        assert_eq!(classify_outcome(Benign, false), TrueNegative);
        assert_eq!(classify_outcome(Investigate, true), Neutral);
        assert_eq!(classify_outcome(Investigate, false), Neutral);
        assert_eq!(classify_outcome(Ignore, false), Neutral);
    }

    #[test]
    fn noise_free_rewards() {
        let mut env = env_with(vec![record(1, true); 10], 10, false);
        env.reset().unwrap();
        let r = env.step(Action::Malicious).unwrap();
        assert_eq!((r.reward, r.outcome), (10.0, Outcome::TruePositive));

        let mut env = env_with(vec![record(1, false); 10], 10, false);
        env.reset().unwrap();
        let r = env.step(Action::Benign).unwrap();
        assert_eq!((r.reward, r.outcome), (2.0, Outcome::TrueNegative));
        let r = env.step(Action::Malicious).unwrap();
        assert_eq!((r.reward, r.outcome), (-60.0, Outcome::FalsePositive));
    }

    #[test]
    fn episode_ends_at_max_steps_and_rejects_extra_steps() {
        let mut env = env_with(vec![record(1, false); 1_000], 1_000, true);
        for _ in 0..50 {
            env.reset().unwrap();
            assert_eq!(env.steps(), 0);
            assert!(!env.is_done());
            let mut steps = 0;
            loop {
                let r = env.step(Action::Benign).unwrap();
                steps += 1;
                if r.done {
                    break;
                }
            }
            assert!(steps <= 5);
            assert!(matches!(env.step(Action::Benign), Err(Error::Usage(_))));
        }
    }

    #[test]
    fn fifth_step_is_terminal_when_chunk_has_room() {
        let mut env = env_with(vec![record(1, false); 10], 10, false);
        // force a start at the chunk head
        loop {
            env.reset().unwrap();
            if env.cursor <= 5 {
                break;
            }
        }
        for i in 1..=5 {
            let r = env.step(Action::Benign).unwrap();
            assert_eq!(r.done, i == 5);
        }
    }

    #[test]
    fn single_chunk_always_selected_and_empty_dataset_errors() {
        let mut env = env_with(vec![record(1, false); 7], 100, false);
        for _ in 0..20 {
            env.reset().unwrap();
            assert_eq!(env.current_chunk(), 0);
        }
        let mut empty = env_with(Vec::new(), 10, false);
        assert!(empty.reset().is_err());
    }

    #[test]
    fn chunks_selected_uniformly() {
        let mut env = env_with(vec![record(1, false); 1_000], 100, false);
        let mut freq = [0usize; 10];
        for _ in 0..10_000 {
            env.reset().unwrap();
            freq[env.current_chunk()] += 1;
        }
        for f in freq {
            let p = f as f64 / 10_000.0;
            assert!((p - 0.1).abs() <= 0.02, "{freq:?}");
        }
    }

    #[test]
    fn reward_noise_has_configured_moments() {
        let records: Vec<_> = (0..1_000).map(|i| record(i, i % 2 == 0)).collect();
        let mut env = env_with(records, 1_000, true);
        let mut diffs = Vec::new();
        while diffs.len() < 10_000 {
            env.reset().unwrap();
            loop {
                let r = env.step(Action::Investigate).unwrap();
                diffs.push(r.reward - r.base_reward);
                assert!(env.config().rewards.values().contains(&r.base_reward));
                if r.done {
                    break;
                }
            }
        }
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 0.01 * 0.2 * 5.0, "mean {mean}");
        assert!((sd - 0.05).abs() < 0.05 * 0.2, "sd {sd}");
    }

    #[test]
    fn config_validation() {
        let mut c = EnvConfig::default();
        c.validate().unwrap();
        c.max_steps = 0;
        assert!(c.validate().is_err());
        let c = EnvConfig {
            noise_sd: -1.0,
            ..EnvConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
