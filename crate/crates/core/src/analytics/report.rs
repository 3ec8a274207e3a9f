//! Cross-agent comparison: per-run and per-agent summaries, pairwise
//! Mann-Whitney tests on episode rewards, and the report figures.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::chart::{bar_chart, line_chart, Series};
use super::convergence::Convergence;
use super::metrics::{detection_rate, reward_stats, EpisodeRecord, MetricsFrame, Totals};
use super::savgol::savitzky_golay;
use super::sensitivity::stability_sigma;
use super::stats::{mann_whitney_u, TestResult};
use crate::env::NUM_ACTIONS;
use crate::error::{Error, Result};
use crate::learner::AgentKind;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub agent: AgentKind,
    pub run: usize,
    pub seed: u64,
    pub episodes: usize,
    pub detection_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub reward_mean: f64,
    pub reward_sd: f64,
    pub mean_steps: f64,
    pub action_shares: [f64; NUM_ACTIONS],
    pub convergence: Option<Convergence>,
}

impl RunSummary {
    pub fn of(
        agent: AgentKind,
        run: usize,
        seed: u64,
        records: &[EpisodeRecord],
        convergence: Option<Convergence>,
    ) -> Result<Self> {
        let totals = Totals::of(records);
        let m = totals.metrics();
        let rewards: Vec<f64> = records.iter().map(|r| r.reward).collect();
        let stats = reward_stats(&rewards)?;
        Ok(Self {
            agent,
            run,
            seed,
            episodes: records.len(),
            detection_rate: detection_rate(records)?,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            reward_mean: stats.mean,
            reward_sd: stats.sd,
            mean_steps: totals.steps as f64 / records.len() as f64,
            action_shares: totals.action_shares(),
            convergence,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: AgentKind,
    pub runs: usize,
    pub episodes: usize,
    pub detection_rate_mean: f64,
    /// Spread of per-run detection rates.
    pub detection_rate_sd: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub reward_mean: f64,
    pub reward_sd: f64,
    pub mean_steps: f64,
    pub action_shares: [f64; NUM_ACTIONS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: AgentKind,
    pub b: AgentKind,
    pub test: TestResult,
    pub significant: bool,
}

/// Training output of one agent: one record list per run, with the seed.
#[derive(Debug, Clone)]
pub struct AgentRuns {
    pub agent: AgentKind,
    pub runs: Vec<(u64, Vec<EpisodeRecord>)>,
    pub convergence: Vec<Option<Convergence>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub significance: f64,
    pub agents: Vec<AgentSummary>,
    pub runs: Vec<RunSummary>,
    pub tests: Vec<PairwiseTest>,
}

fn summarize_agent(data: &AgentRuns) -> Result<(AgentSummary, Vec<RunSummary>, Vec<f64>)> {
    if data.runs.is_empty() {
        return Err(Error::Empty("agent with no runs"));
    }
    let mut totals = Totals::default();
    let mut rewards = Vec::new();
    let mut runs = Vec::with_capacity(data.runs.len());
    for (i, (seed, records)) in data.runs.iter().enumerate() {
        let conv = data.convergence.get(i).copied().flatten();
        runs.push(RunSummary::of(data.agent, i, *seed, records, conv)?);
        records.iter().for_each(|r| totals.add(r));
        rewards.extend(records.iter().map(|r| r.reward));
    }
    let rates: Vec<f64> = runs.iter().map(|r| r.detection_rate).collect();
    let stats = reward_stats(&rewards)?;
    let m = totals.metrics();
    let summary = AgentSummary {
        agent: data.agent,
        runs: runs.len(),
        episodes: totals.episodes,
        detection_rate_mean: rates.iter().sum::<f64>() / rates.len() as f64,
        detection_rate_sd: stability_sigma(&rates)?,
        tp: totals.tp,
        fp: totals.fp,
        fn_: totals.fn_,
        tn: totals.tn,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        reward_mean: stats.mean,
        reward_sd: stats.sd,
        mean_steps: totals.steps as f64 / totals.episodes as f64,
        action_shares: totals.action_shares(),
    };
    Ok((summary, runs, rewards))
}

impl ComparisonReport {
    pub fn build(agents: &[AgentRuns], significance: f64) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::Empty("comparison with no agents"));
        }
        let lengths: Vec<usize> = agents
            .iter()
            .flat_map(|a| a.runs.iter().map(|(_, r)| r.len()))
            .collect();
        if lengths.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Usage(format!(
                "run sets have mismatched episode counts {lengths:?}"
            )));
        }
        let mut summaries = Vec::new();
        let mut all_runs = Vec::new();
        let mut rewards = Vec::new();
        for data in agents {
            let (s, runs, r) = summarize_agent(data)?;
            summaries.push(s);
            all_runs.extend(runs);
            rewards.push(r);
        }
        let mut tests = Vec::new();
        for i in 0..agents.len() {
            for j in i + 1..agents.len() {
                let test = mann_whitney_u(&rewards[i], &rewards[j])?;
                tests.push(PairwiseTest {
                    a: agents[i].agent,
                    b: agents[j].agent,
                    significant: test.p < significance,
                    test,
                });
            }
        }
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            significance,
            agents: summaries,
            runs: all_runs,
            tests,
        })
    }

    pub fn markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Agent comparison\n");
        let _ = writeln!(
            out,
            "| Agent | Runs | Detection rate | Precision | Recall | F1 | Reward (mean ± sd) | Steps |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|---|---|");
        for a in &self.agents {
            let _ = writeln!(
                out,
                "| {} | {} | {:.4} ± {:.4} | {:.4} | {:.4} | {:.4} | {:.2} ± {:.2} | {:.2} |",
                a.agent.display_name(),
                a.runs,
                a.detection_rate_mean,
                a.detection_rate_sd,
                a.precision,
                a.recall,
                a.f1,
                a.reward_mean,
                a.reward_sd,
                a.mean_steps
            );
        }
        let _ = writeln!(out, "\n## Mann-Whitney U on episode rewards\n");
        let _ = writeln!(out, "| Pair | U | z | p | r | Effect | p < {} |", self.significance);
        let _ = writeln!(out, "|---|---|---|---|---|---|---|");
        for t in &self.tests {
            let _ = writeln!(
                out,
                "| {} vs {} | {:.1} | {:.3} | {:.3e} | {:.4} | {} | {} |",
                t.a.display_name(),
                t.b.display_name(),
                t.test.u,
                t.test.z,
                t.test.p,
                t.test.r,
                t.test.label.as_str(),
                if t.significant { "yes" } else { "no" }
            );
        }
        out
    }
}

/// Per-episode mean across runs of a per-run series.
fn mean_over_runs(series: &[Vec<f64>]) -> Vec<f64> {
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| series.iter().map(|s| s[i]).sum::<f64>() / series.len() as f64)
        .collect()
}

fn smooth(values: &[f64], window: usize, poly: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Ok(Vec::new());
    }
    savitzky_golay(values, window, poly)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// One value per episode.
    Line,
    /// One value per action.
    Bars,
}

/// One report figure: its data and how to draw it.
#[derive(Debug, Clone)]
pub struct Curve {
    pub name: &'static str,
    pub title: String,
    pub y_label: &'static str,
    pub kind: CurveKind,
    pub series: Vec<Series>,
}

pub const ACTION_NAMES: [&str; NUM_ACTIONS] = ["malicious", "benign", "investigate", "ignore"];

impl Curve {
    pub fn svg(&self) -> String {
        match self.kind {
            CurveKind::Line => line_chart(&self.title, "episode", self.y_label, &self.series),
            CurveKind::Bars => bar_chart(&self.title, self.y_label, &ACTION_NAMES, &self.series),
        }
    }

    /// Wide CSV: an index column, then one column per series.
    pub fn csv(&self) -> String {
        let index = match self.kind {
            CurveKind::Line => "episode",
            CurveKind::Bars => "action",
        };
        let mut out = String::from(index);
        for s in &self.series {
            out.push(',');
            out.push_str(&s.name);
        }
        out.push('\n');
        let len = self.series.iter().map(|s| s.values.len()).max().unwrap_or(0);
        for i in 0..len {
            match self.kind {
                CurveKind::Line => {
                    let _ = write!(out, "{i}");
                }
                CurveKind::Bars => out.push_str(ACTION_NAMES.get(i).copied().unwrap_or("?")),
            }
            for s in &self.series {
                match s.values.get(i) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// The six comparison figures, each averaged per episode across runs.
pub fn curves(
    agents: &[AgentRuns],
    window: usize,
    poly: usize,
    metrics_window: usize,
) -> Result<Vec<Curve>> {
    let mut reward = Vec::new();
    let mut detection = Vec::new();
    let mut variance = Vec::new();
    let mut cumulative_tp = Vec::new();
    let mut precision = Vec::new();
    let mut shares = Vec::new();
    for data in agents {
        let frames: Vec<MetricsFrame> = data
            .runs
            .iter()
            .map(|(_, r)| MetricsFrame::from_records(r, metrics_window))
            .collect();
        let pick = |f: &dyn Fn(&MetricsFrame) -> Vec<f64>| -> Vec<f64> {
            mean_over_runs(&frames.iter().map(f).collect::<Vec<_>>())
        };
        let name = data.agent.display_name();
        reward.push(Series::new(name, smooth(&pick(&|f| f.reward.clone()), window, poly)?));
        detection.push(Series::new(name, pick(&|f| f.detection_rate.clone())));
        variance.push(Series::new(name, pick(&|f| f.window_variance.clone())));
        cumulative_tp.push(Series::new(
            name,
            pick(&|f| f.cumulative_tp.iter().map(|&v| v as f64).collect()),
        ));
        precision.push(Series::new(name, pick(&|f| f.precision.clone())));
        let mut totals = Totals::default();
        data.runs.iter().flat_map(|(_, r)| r).for_each(|r| totals.add(r));
        shares.push(Series::new(name, totals.action_shares().to_vec()));
    }
    let line = |name, title: String, y_label, series| Curve {
        name,
        title,
        y_label,
        kind: CurveKind::Line,
        series,
    };
    Ok(vec![
        line(
            "learning_curve",
            format!("Episode reward (Savitzky-Golay, window {window}, order {poly})"),
            "reward",
            reward,
        ),
        line("detection_rate", "Cumulative detection rate".into(), "detection rate", detection),
        line(
            "reward_variance",
            format!("Reward variance ({metrics_window}-episode window)"),
            "variance",
            variance,
        ),
        line("cumulative_tp", "Cumulative true positives".into(), "TP", cumulative_tp),
        line("precision", "Running precision".into(), "precision", precision),
        Curve {
            name: "action_distribution",
            title: "Action distribution".into(),
            y_label: "share of steps",
            kind: CurveKind::Bars,
            series: shares,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, Outcome};

    fn runs(agent: AgentKind, rewards: &[f64], tp: bool) -> AgentRuns {
        let records = rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let mut rec = EpisodeRecord::new(i);
                if tp {
                    rec.record(Action::Malicious, Outcome::TruePositive, r);
                } else {
                    rec.record(Action::Benign, Outcome::TrueNegative, r);
                }
                rec
            })
            .collect();
        AgentRuns {
            agent,
            runs: vec![(1, records)],
            convergence: vec![None],
        }
    }

    #[test]
    fn report_summarizes_and_tests_pairs() {
        let a = runs(AgentKind::LogGuardQ, &[10.0, 11.0, 12.0, 13.0], true);
        let b = runs(AgentKind::Ppo, &[1.0, 2.0, 3.0, 4.0], false);
        let report = ComparisonReport::build(&[a.clone(), b.clone()], 0.05).unwrap();
        assert_eq!(report.agents[0].detection_rate_mean, 1.0);
        assert_eq!(report.agents[1].detection_rate_mean, 0.0);
        assert_eq!(report.tests.len(), 1);
        assert_eq!(report.tests[0].test.u, 16.0);
        assert!(report.markdown().contains("LogGuardQ vs PPO"));
        let figs = curves(&[a.clone(), b], 3, 2, 2).unwrap();
        assert_eq!(figs.len(), 6);
        for f in &figs {
            assert!(f.svg().contains("</svg>"));
            assert_eq!(f.csv().lines().next().unwrap().split(',').count(), 3);
        }
        assert_eq!(figs[1].csv().lines().nth(1).unwrap(), "0,1,0");
        assert!(ComparisonReport::build(&[], 0.05).is_err());
        let short = runs(AgentKind::Dqn, &[1.0, 2.0], true);
        assert!(ComparisonReport::build(&[a.clone(), short], 0.05).is_err());
        let same = ComparisonReport::build(&[a.clone(), a.clone()], 0.05).unwrap();
        assert_eq!((same.tests[0].test.p, same.tests[0].test.r), (1.0, 0.0));
    }
}
