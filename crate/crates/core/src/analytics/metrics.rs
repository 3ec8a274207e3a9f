//! Per-episode records, confusion-matrix metrics and the cumulative series
//! behind the learning-curve figures.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::env::{Action, Outcome, NUM_ACTIONS};
use crate::error::{Error, Result};

pub const EPISODE_CSV_HEADER: &str = "episode,reward,steps,tp,fp,fn,tn,neutral,a0,a1,a2,a3";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub reward: f64,
    pub steps: usize,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub neutral: u64,
    pub actions: [u64; NUM_ACTIONS],
}

impl EpisodeRecord {
    pub fn new(episode: usize) -> Self {
        Self {
            episode,
            ..Self::default()
        }
    }

    pub fn record(&mut self, action: Action, outcome: Outcome, reward: f64) {
        self.steps += 1;
        self.reward += reward;
        self.actions[action.index()] += 1;
        match outcome {
            Outcome::TruePositive => self.tp += 1,
            Outcome::FalsePositive => self.fp += 1,
            Outcome::FalseNegative => self.fn_ += 1,
            Outcome::TrueNegative => self.tn += 1,
            Outcome::Neutral => self.neutral += 1,
        }
    }

    pub fn detected(&self) -> bool {
        self.tp >= 1
    }

    /// Outcome counts partition the steps, and so do action counts.
    pub fn is_consistent(&self) -> bool {
        let outcomes = self.tp + self.fp + self.fn_ + self.tn + self.neutral;
        outcomes == self.steps as u64 && self.actions.iter().sum::<u64>() == self.steps as u64
    }

    fn csv_row(&self) -> String {
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{},{},{}",
            self.episode, self.reward, self.steps, self.tp, self.fp, self.fn_, self.tn, self.neutral
        );
        for a in self.actions {
            let _ = write!(row, ",{a}");
        }
        row
    }
}

pub fn write_episodes_csv<W: Write>(mut out: W, records: &[EpisodeRecord]) -> Result<()> {
    writeln!(out, "{EPISODE_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_episodes_csv<R: Read>(input: R) -> Result<Vec<EpisodeRecord>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != EPISODE_CSV_HEADER {
        return Err(Error::Dataset(format!("unexpected episode CSV header '{header}'")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Dataset(format!("episode CSV row {}: {what}", i + 2));
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 12 {
            return Err(bad("expected 12 columns"));
        }
        let int = |k: usize| fields[k].parse::<u64>().map_err(|_| bad("bad integer"));
        let mut actions = [0; NUM_ACTIONS];
        for (a, slot) in actions.iter_mut().enumerate() {
            *slot = int(8 + a)?;
        }
        let record = EpisodeRecord {
            episode: int(0)? as usize,
            reward: fields[1].parse().map_err(|_| bad("bad reward"))?,
            steps: int(2)? as usize,
            tp: int(3)?,
            fp: int(4)?,
            fn_: int(5)?,
            tn: int(6)?,
            neutral: int(7)?,
            actions,
        };
        if !record.is_consistent() {
            return Err(bad("counts do not partition steps"));
        }
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// False when there were no predicted positives and no actual positives,
    /// so every value above is a convention rather than a measurement.
    pub has_support: bool,
}

/// Precision, recall and F1. Precision with no predicted positives and
/// recall with no actual positives are both 1 by convention.
pub fn classification_metrics(tp: u64, fp: u64, fn_: u64) -> ClassificationMetrics {
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassificationMetrics {
        precision,
        recall,
        f1,
        has_support: tp + fp + fn_ > 0,
    }
}

/// Share of episodes with at least one true positive.
pub fn detection_rate(records: &[EpisodeRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("detection rate of no episodes"));
    }
    Ok(records.iter().filter(|r| r.detected()).count() as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardStats {
    pub mean: f64,
    pub variance: f64,
    pub sd: f64,
}

/// Population (1/n) mean, variance and standard deviation.
pub fn reward_stats(rewards: &[f64]) -> Result<RewardStats> {
    if rewards.is_empty() {
        return Err(Error::Empty("reward statistics of no rewards"));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(RewardStats {
        mean,
        variance,
        sd: variance.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub episodes: usize,
    pub steps: u64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub neutral: u64,
    pub detections: u64,
    pub actions: [u64; NUM_ACTIONS],
}

impl Totals {
    pub fn add(&mut self, r: &EpisodeRecord) {
        self.episodes += 1;
        self.steps += r.steps as u64;
        self.tp += r.tp;
        self.fp += r.fp;
        self.fn_ += r.fn_;
        self.tn += r.tn;
        self.neutral += r.neutral;
        self.detections += u64::from(r.detected());
        for (t, a) in self.actions.iter_mut().zip(r.actions) {
            *t += a;
        }
    }

    pub fn of(records: &[EpisodeRecord]) -> Self {
        let mut t = Self::default();
        records.iter().for_each(|r| t.add(r));
        t
    }

    pub fn metrics(&self) -> ClassificationMetrics {
        classification_metrics(self.tp, self.fp, self.fn_)
    }

    pub fn action_shares(&self) -> [f64; NUM_ACTIONS] {
        let total = self.actions.iter().sum::<u64>().max(1) as f64;
        self.actions.map(|a| a as f64 / total)
    }
}

/// Per-episode cumulative series computed in one streaming pass.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub reward: Vec<f64>,
    pub detected: Vec<bool>,
    pub detection_rate: Vec<f64>,
    pub cumulative_tp: Vec<u64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub reward_mean: Vec<f64>,
    pub reward_variance: Vec<f64>,
    /// Population variance of the trailing `window` episode rewards.
    pub window_variance: Vec<f64>,
    /// Share of each action in the trailing window, per episode.
    pub action_shares: Vec<[f64; NUM_ACTIONS]>,
    pub window: usize,
}

impl MetricsFrame {
    pub fn from_records(records: &[EpisodeRecord], window: usize) -> Self {
        let window = window.max(1);
        let mut frame = Self {
            window,
            ..Self::default()
        };
        let mut totals = Totals::default();
        // Welford for the all-episode running moments
        let (mut mean, mut m2) = (0.0, 0.0);
        let (mut wsum, mut wsq) = (0.0, 0.0);
        let mut wactions = [0u64; NUM_ACTIONS];
        for (i, r) in records.iter().enumerate() {
            totals.add(r);
            let n = (i + 1) as f64;
            let d = r.reward - mean;
            mean += d / n;
            m2 += d * (r.reward - mean);

            wsum += r.reward;
            wsq += r.reward * r.reward;
            for (w, a) in wactions.iter_mut().zip(r.actions) {
                *w += a;
            }
            if i >= window {
                let old = &records[i - window];
                wsum -= old.reward;
                wsq -= old.reward * old.reward;
                for (w, a) in wactions.iter_mut().zip(old.actions) {
                    *w -= a;
                }
            }
            let wn = (i + 1).min(window) as f64;
            let wmean = wsum / wn;

            let m = totals.metrics();
            frame.reward.push(r.reward);
            frame.detected.push(r.detected());
            frame.detection_rate.push(totals.detections as f64 / n);
            frame.cumulative_tp.push(totals.tp);
            frame.precision.push(m.precision);
            frame.recall.push(m.recall);
            frame.f1.push(m.f1);
            frame.reward_mean.push(mean);
            frame.reward_variance.push(m2 / n);
            frame.window_variance.push((wsq / wn - wmean * wmean).max(0.0));
            let wtotal = wactions.iter().sum::<u64>().max(1) as f64;
            frame.action_shares.push(wactions.map(|a| a as f64 / wtotal));
        }
        frame
    }

    pub fn len(&self) -> usize {
        self.reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(episode: usize, tp: u64, fp: u64, fn_: u64, tn: u64, reward: f64) -> EpisodeRecord {
        let steps = (tp + fp + fn_ + tn) as usize;
        EpisodeRecord {
            episode,
            reward,
            steps,
            tp,
            fp,
            fn_,
            tn,
            neutral: 0,
            actions: [tp + fp, fn_ + tn, 0, 0],
        }
    }

    #[test]
    fn reported_confusion_counts() {
        let m = classification_metrics(47_686, 52_178, 65);
        assert!((m.precision - 0.4775).abs() < 5e-4);
        assert!((m.recall - 0.9986).abs() < 5e-4);
        assert!((m.f1 - 0.6461).abs() < 1e-3);
    }

    #[test]
    fn degenerate_and_symmetric_counts() {
        let m = classification_metrics(0, 0, 0);
        assert_eq!((m.precision, m.recall, m.f1, m.has_support), (1.0, 1.0, 1.0, false));
        let m = classification_metrics(0, 0, 4);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 0.0, 0.0));
        let m = classification_metrics(0, 3, 0);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 1.0, 0.0));
        let m = classification_metrics(5, 5, 5);
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn detection_rates() {
        let mut records: Vec<_> = (0..501).map(|i| rec(i, u64::from(i < 466), 0, 1, 0, 0.0)).collect();
        assert!((detection_rate(&records).unwrap() - 0.9301).abs() < 1e-4);
        records.iter_mut().for_each(|r| r.tp = 0);
        assert_eq!(detection_rate(&records).unwrap(), 0.0);
        assert!(detection_rate(&[]).is_err());
    }

    #[test]
    fn population_stats() {
        let s = reward_stats(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.sd), (2.0, 0.0, 0.0));
        let s = reward_stats(&[0.0, 10.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.sd), (5.0, 25.0, 5.0));
        assert!(reward_stats(&[]).is_err());
    }

    #[test]
    fn frame_matches_batch_recomputation() {
        let records: Vec<_> = (0..300)
            .map(|i| rec(i, (i % 3) as u64, (i % 2) as u64, (i % 5 == 0) as u64, 1, (i as f64).sin() * 30.0))
            .collect();
        let frame = MetricsFrame::from_records(&records, 50);
        for k in [0, 1, 49, 50, 51, 150, 299] {
            let prefix = &records[..=k];
            let totals = Totals::of(prefix);
            assert!((frame.detection_rate[k] - detection_rate(prefix).unwrap()).abs() < 1e-12);
            assert_eq!(frame.cumulative_tp[k], totals.tp);
            let m = totals.metrics();
            assert!((frame.f1[k] - m.f1).abs() < 1e-12);
            let rewards: Vec<f64> = prefix.iter().map(|r| r.reward).collect();
            let s = reward_stats(&rewards).unwrap();
            assert!((frame.reward_mean[k] - s.mean).abs() < 1e-9);
            assert!((frame.reward_variance[k] - s.variance).abs() < 1e-9);
            let tail = &rewards[rewards.len().saturating_sub(50)..];
            let w = reward_stats(tail).unwrap();
            assert!((frame.window_variance[k] - w.variance).abs() < 1e-6);
        }
        assert!(frame.cumulative_tp.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let records: Vec<_> = (0..5).map(|i| rec(i, 1, 2, 1, 1, -51.0 + i as f64 * 0.1)).collect();
        let mut buf = Vec::new();
        write_episodes_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(EPISODE_CSV_HEADER));
        assert_eq!(read_episodes_csv(&buf[..]).unwrap(), records);

        let broken = text.replace("\n0,", "\n0,x");
        assert!(read_episodes_csv(broken.as_bytes()).is_err());
        assert!(read_episodes_csv("a,b\n".as_bytes()).is_err());
    }
}
