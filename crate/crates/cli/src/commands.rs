use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use logguard::analytics::convergence::{convergence_check, Convergence};
use logguard::analytics::metrics::{read_episodes_csv, write_episodes_csv, EpisodeRecord};
use logguard::analytics::report::{curves, AgentRuns, ComparisonReport, RunSummary};
use logguard::analytics::sensitivity::{linspace, sweep};
use logguard::analytics::metrics::detection_rate;
use logguard::config::RunConfig;
use logguard::env::Dataset;
use logguard::harness;
use logguard::learner::AgentKind;
use logguard::loggen::write_generated;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::output::{self, DatasetPaths};
use crate::{
    ensure_dir, parse_agents, CompareArgs, GenerateArgs, ReportArgs, SensitivityArgs, TrainArgs,
};

fn data_dir(config: &RunConfig, data: &Option<PathBuf>) -> PathBuf {
    data.clone().unwrap_or_else(|| config.output_dir.join("data"))
}

fn load_dataset(dir: &Path) -> Result<Arc<Dataset>> {
    let paths = DatasetPaths::new(dir);
    paths.require()?;
    let dataset = Dataset::load(&paths.log, &paths.labels)
        .with_context(|| format!("loading dataset from {}", dir.display()))?;
    Ok(Arc::new(dataset))
}

pub fn generate(mut config: RunConfig, args: &GenerateArgs) -> Result<()> {
    if let Some(n) = args.entries {
        config.loggen.total_entries = n;
    }
    if let Some(rate) = args.anomaly_rate {
        config.loggen.anomaly_rate = rate;
    }
    match args.chunk_size {
        Some(size) => config.loggen.chunk_size = size,
        None => config.loggen.chunk_size = config.loggen.chunk_size.min(config.loggen.total_entries),
    }
    config.loggen = config.dataset_config();
    config.validate()?;
    let dir = args.out.clone().unwrap_or_else(|| config.output_dir.join("data"));
    ensure_dir(&dir)?;
    let paths = DatasetPaths::new(&dir);
    let summary = write_generated(&config.loggen, &config.profile, &paths.log, &paths.labels)?;
    println!(
        "wrote {} entries to {} ({} anomalies, rate {:.4}, span {} s, {} chunks)",
        summary.entries,
        paths.log.display(),
        summary.anomalies,
        summary.anomaly_rate,
        summary.span_seconds,
        summary.chunks
    );
    let doc = output::envelope("generate", &config, json!({ "summary": summary }))?;
    output::write_json(&paths.summary, &doc)
}

struct RunOutput {
    records: Vec<EpisodeRecord>,
    summary: RunSummary,
    policy: logguard::policy::PolicyFile,
}

fn train_one(
    config: &RunConfig,
    dataset: Arc<Dataset>,
    kind: AgentKind,
    run: usize,
    episodes: usize,
) -> Result<(RunConfig, RunOutput)> {
    let resolved = config.for_run(run);
    let trained = harness::train(
        kind,
        dataset,
        &resolved.env,
        &resolved.agent,
        &resolved.baselines,
        episodes,
    )
    .with_context(|| format!("training {kind} run {run}"))?;
    let deltas = trained.learner.q_deltas();
    let convergence: Option<Convergence> = (!deltas.is_empty()).then(|| {
        convergence_check(
            deltas,
            config.protocol.convergence_theta,
            config.protocol.convergence_window,
        )
    });
    let summary = RunSummary::of(kind, run, config.run_seed(run), &trained.records, convergence)?;
    Ok((
        resolved,
        RunOutput {
            policy: trained.learner.policy(),
            records: trained.records,
            summary,
        },
    ))
}

fn write_run(dir: &Path, data: &Path, resolved: &RunConfig, out: &RunOutput) -> Result<()> {
    ensure_dir(dir)?;
    let csv = dir.join(output::EPISODES_FILE);
    let file = File::create(&csv).with_context(|| format!("creating {}", csv.display()))?;
    write_episodes_csv(BufWriter::new(file), &out.records)?;
    out.policy.save(&dir.join(output::POLICY_FILE))?;
    let doc = output::envelope(
        "train",
        resolved,
        json!({
            "agent": out.summary.agent,
            "run": out.summary.run,
            "run_seed": out.summary.seed,
            "dataset": data,
            "summary": out.summary,
        }),
    )?;
    output::write_json(&dir.join(output::SUMMARY_FILE), &doc)
}

fn print_summary(s: &RunSummary) {
    println!(
        "{} run {}: episodes {}, steps/episode {:.2}, detection rate {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}, reward {:.2} ± {:.2}",
        s.agent.display_name(),
        s.run,
        s.episodes,
        s.mean_steps,
        s.detection_rate,
        s.precision,
        s.recall,
        s.f1,
        s.reward_mean,
        s.reward_sd
    );
}

pub fn train(mut config: RunConfig, args: &TrainArgs) -> Result<()> {
    let kind: AgentKind = args.agent.parse()?;
    if let Some(n) = args.episodes {
        config.protocol.episodes = n;
    }
    config.validate()?;
    let data = data_dir(&config, &args.data);
    let dataset = load_dataset(&data)?;
    let (resolved, out) = train_one(&config, dataset, kind, args.run, config.protocol.episodes)?;
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir.join("train").join(kind.name()));
    write_run(&dir, &data, &resolved, &out)?;
    print_summary(&out.summary);
    println!("outputs in {}", dir.display());
    Ok(())
}

fn run_dir(root: &Path, kind: AgentKind, run: usize) -> PathBuf {
    root.join("runs").join(kind.name()).join(format!("run_{run}"))
}

/// Reads a finished `train` output directory.
fn load_run(dir: &Path) -> Result<(AgentKind, u64, Vec<EpisodeRecord>, Option<Convergence>)> {
    let summary_path = dir.join(output::SUMMARY_FILE);
    let csv_path = dir.join(output::EPISODES_FILE);
    let missing: Vec<String> = [&summary_path, &csv_path]
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        bail!("missing run outputs: {}", missing.join(", "));
    }
    let doc = output::read_json(&summary_path)?;
    let agent: AgentKind = serde_json::from_value(doc["agent"].clone())
        .with_context(|| format!("{}: bad agent field", summary_path.display()))?;
    let seed = doc["run_seed"].as_u64().unwrap_or_default();
    let convergence = serde_json::from_value(doc["summary"]["convergence"].clone()).ok().flatten();
    let file = File::open(&csv_path).with_context(|| format!("opening {}", csv_path.display()))?;
    let records = read_episodes_csv(file)
        .with_context(|| format!("reading {}", csv_path.display()))?;
    Ok((agent, seed, records, convergence))
}

fn group_runs(
    runs: Vec<(AgentKind, u64, Vec<EpisodeRecord>, Option<Convergence>)>,
) -> Vec<AgentRuns> {
    let mut groups: Vec<AgentRuns> = Vec::new();
    for (agent, seed, records, conv) in runs {
        let group = match groups.iter().position(|g| g.agent == agent) {
            Some(i) => &mut groups[i],
            None => {
                groups.push(AgentRuns {
                    agent,
                    runs: Vec::new(),
                    convergence: Vec::new(),
                });
                groups.last_mut().expect("just pushed")
            }
        };
        group.runs.push((seed, records));
        group.convergence.push(conv);
    }
    groups
}

fn write_curves(dir: &Path, config: &RunConfig, groups: &[AgentRuns]) -> Result<()> {
    let p = &config.protocol;
    let curve_dir = dir.join("curves");
    ensure_dir(&curve_dir)?;
    for curve in curves(groups, p.savgol_window, p.savgol_poly, p.metrics_window)? {
        let path = curve_dir.join(format!("{}.csv", curve.name));
        std::fs::write(&path, curve.csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn compare(mut config: RunConfig, args: &CompareArgs) -> Result<()> {
    if let Some(n) = args.episodes {
        config.protocol.episodes = n;
    }
    if let Some(n) = args.runs {
        config.protocol.runs = n;
    }
    if let Some(names) = &args.agents {
        config.protocol.agents = parse_agents(names)?;
    }
    config.validate()?;
    let dir = args.out.clone().unwrap_or_else(|| config.output_dir.join("compare"));
    ensure_dir(&dir)?;

    let (groups, run_dirs, data): (Vec<AgentRuns>, Vec<PathBuf>, Option<PathBuf>) =
        if args.inputs.is_empty() {
            let data = data_dir(&config, &args.data);
            let dataset = load_dataset(&data)?;
            let jobs: Vec<(AgentKind, usize)> = config
                .protocol
                .agents
                .iter()
                .flat_map(|&k| (0..config.protocol.runs).map(move |r| (k, r)))
                .collect();
            let episodes = config.protocol.episodes;
            let results = jobs
                .par_iter()
                .map(|&(kind, run)| -> Result<_> {
                    let (resolved, out) = train_one(&config, dataset.clone(), kind, run, episodes)?;
                    let rdir = run_dir(&dir, kind, run);
                    write_run(&rdir, &data, &resolved, &out)?;
                    Ok((rdir, out))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut dirs = Vec::new();
            let mut runs = Vec::new();
            for (rdir, out) in results {
                print_summary(&out.summary);
                dirs.push(rdir);
                runs.push((out.summary.agent, out.summary.seed, out.records, out.summary.convergence));
            }
            (group_runs(runs), dirs, Some(data))
        } else {
            if args.inputs.len() < 2 {
                bail!("compare needs at least two run directories");
            }
            let runs = args
                .inputs
                .iter()
                .map(|d| load_run(d))
                .collect::<Result<Vec<_>>>()?;
            (group_runs(runs), args.inputs.clone(), None)
        };

    let report = ComparisonReport::build(&groups, config.protocol.significance)?;
    write_curves(&dir, &config, &groups)?;
    let doc = output::envelope(
        "compare",
        &config,
        json!({
            "dataset": data,
            "run_dirs": run_dirs,
            "report": report,
        }),
    )?;
    output::write_json(&dir.join(output::COMPARISON_FILE), &doc)?;
    std::fs::write(dir.join("comparison.md"), report.markdown())?;
    print!("{}", report.markdown());
    println!("outputs in {}", dir.display());
    Ok(())
}

pub fn sensitivity(mut config: RunConfig, args: &SensitivityArgs) -> Result<()> {
    if let Some(n) = args.episodes {
        config.sensitivity.episodes = n;
    }
    if let Some(n) = args.grid {
        config.sensitivity.temperature_points = n;
        config.sensitivity.curiosity_points = n;
    }
    config.validate()?;
    let s = &config.sensitivity;
    let temperatures = linspace(s.temperature_min, s.temperature_max, s.temperature_points)?;
    let weights = linspace(s.curiosity_min, s.curiosity_max, s.curiosity_points)?;
    let data = data_dir(&config, &args.data);
    let dataset = load_dataset(&data)?;
    let episodes = s.episodes;
    let seeds = s.seeds_per_cell;
    let report = sweep(&temperatures, &weights, |t, w| {
        let mut total = 0.0;
        for run in 0..seeds {
            let mut resolved = config.for_run(run);
            resolved.agent.initial_temperature = t;
            resolved.agent.curiosity_weight = w;
            let trained = harness::train(
                AgentKind::LogGuardQ,
                dataset.clone(),
                &resolved.env,
                &resolved.agent,
                &resolved.baselines,
                episodes,
            )?;
            total += detection_rate(&trained.records)?;
        }
        Ok(total / seeds as f64)
    })?;
    for c in &report.cells {
        println!(
            "T0 {:.3}  w_c {:.3}  detection rate {:.4}",
            c.temperature, c.curiosity_weight, c.detection_rate
        );
    }
    let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.4}"));
    println!(
        "S(T0) = {}, S(w_c) = {}, sigma_D = {:.4}",
        fmt(report.s_temperature),
        fmt(report.s_curiosity),
        report.sigma_d
    );
    let dir = args.out.clone().unwrap_or_else(|| config.output_dir.join("sensitivity"));
    ensure_dir(&dir)?;
    let doc = output::envelope(
        "sensitivity",
        &config,
        json!({ "dataset": data, "report": report }),
    )?;
    output::write_json(&dir.join("sensitivity.json"), &doc)?;
    println!("outputs in {}", dir.display());
    Ok(())
}

pub fn report(config: RunConfig, args: &ReportArgs) -> Result<()> {
    let input = args.input.clone().unwrap_or_else(|| config.output_dir.join("compare"));
    let comparison_path = input.join(output::COMPARISON_FILE);
    if !comparison_path.is_file() {
        bail!(
            "missing comparison output: {} (run `logguard compare` first)",
            comparison_path.display()
        );
    }
    let doc = output::read_json(&comparison_path)?;
    let run_dirs: Vec<PathBuf> = serde_json::from_value(doc["run_dirs"].clone())
        .with_context(|| format!("{}: bad run_dirs", comparison_path.display()))?;
    let missing: Vec<String> = run_dirs
        .iter()
        .flat_map(|d| [d.join(output::SUMMARY_FILE), d.join(output::EPISODES_FILE)])
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        bail!("missing run outputs:\n  {}", missing.join("\n  "));
    }
    // the comparison's own protocol governs smoothing and significance
    let used: RunConfig = serde_json::from_value(doc["config"].clone())
        .with_context(|| format!("{}: bad config echo", comparison_path.display()))?;
    let runs = run_dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
    let groups = group_runs(runs);
    let report = ComparisonReport::build(&groups, used.protocol.significance)?;
    let p = &used.protocol;
    let figures = curves(&groups, p.savgol_window, p.savgol_poly, p.metrics_window)?;

    let out = args.out.clone().unwrap_or_else(|| input.join("report"));
    let fig_dir = out.join("figures");
    ensure_dir(&fig_dir)?;
    let mut md = report.markdown();
    md.push_str("\n## Figures\n\n");
    for f in &figures {
        let file = format!("{}.svg", f.name);
        std::fs::write(fig_dir.join(&file), f.svg())?;
        md.push_str(&format!("![{}](figures/{file})\n\n", f.title));
    }
    md.push_str(&format!(
        "## Configuration\n\nGlobal seed {}, {} episodes x {} runs per agent, Savitzky-Golay window {} order {}, significance {}.\n",
        used.seed, p.episodes, p.runs, p.savgol_window, p.savgol_poly, p.significance
    ));
    std::fs::write(out.join("report.md"), &md)?;
    let summary: BTreeMap<&str, Value> = BTreeMap::from([
        ("report", serde_json::to_value(&report)?),
        ("source", json!(comparison_path)),
    ]);
    output::write_json(&out.join("report.json"), &output::envelope("report", &used, summary)?)?;
    println!("report written to {}", out.join("report.md").display());
    Ok(())
}
