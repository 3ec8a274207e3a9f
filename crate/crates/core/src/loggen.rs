//! Seeded synthetic access-log generation.
//!
//! Each chunk draws from its own sub-stream of the global seed, so chunks can
//! be produced in any order (or in parallel) and still concatenate to the same
//! dataset. Timestamps use exponential inter-arrival gaps whose rate is
//! `total_entries / time_span`, which puts the expected span at `time_span`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use rand::seq::{index, IndexedRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Exp, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logmodel::{format_line, is_injection_uri, label_entry, parse_line, LogEntry};
use crate::seed::{self, Rng};

/// 2024-01-01T00:00:00Z
pub const DEFAULT_START: i64 = 1_704_067_200;

const SECONDS_PER_DAY: f64 = 86_400.0;
const CHUNK_JITTER: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub total_entries: usize,
    pub anomaly_rate: f64,
    /// Fraction of anomalies that carry an explicit injection URI.
    pub attack_rate: f64,
    pub chunk_size: usize,
    /// Seconds.
    pub time_span: f64,
    /// Relative half-width of the uniform multiplicative perturbation on bytes.
    pub bytes_noise: f64,
    pub start_time: i64,
    pub seed: Option<u64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            total_entries: 1_000_000,
            anomaly_rate: 0.479,
            attack_rate: 0.01,
            chunk_size: 100_000,
            time_span: SECONDS_PER_DAY,
            bytes_noise: 0.05,
            start_time: DEFAULT_START,
            seed: None,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_entries == 0 {
            return Err(Error::config("total_entries must be positive"));
        }
        if !(0.0..=1.0).contains(&self.anomaly_rate) {
            return Err(Error::config("anomaly_rate must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.attack_rate) {
            return Err(Error::config("attack_rate must lie in [0, 1]"));
        }
        if self.chunk_size == 0 || self.chunk_size > self.total_entries {
            return Err(Error::config(format!(
                "chunk_size must be in 1..={}",
                self.total_entries
            )));
        }
        if !(self.time_span.is_finite() && self.time_span > 0.0) {
            return Err(Error::config("time_span must be positive"));
        }
        if !(0.0..1.0).contains(&self.bytes_noise) {
            return Err(Error::config("bytes_noise must lie in [0, 1)"));
        }
        if self.seed.is_none() {
            return Err(Error::config("a seed is required for generation"));
        }
        Ok(())
    }

    pub fn num_chunks(&self) -> usize {
        self.total_entries.div_ceil(self.chunk_size)
    }

    fn chunk_len(&self, chunk: usize) -> usize {
        let start = chunk * self.chunk_size;
        self.chunk_size.min(self.total_entries - start)
    }
}

/// Relative weights over the status codes {200, 401, 403, 500}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatusWeights {
    pub ok: f64,
    pub unauthorized: f64,
    pub forbidden: f64,
    pub server_error: f64,
}

impl StatusWeights {
    fn pairs(&self) -> [(u16, f64); 4] {
        [
            (200, self.ok),
            (401, self.unauthorized),
            (403, self.forbidden),
            (500, self.server_error),
        ]
    }
}

fn draw_weighted(rng: &mut Rng, pairs: &[(u16, f64)]) -> u16 {
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut x = rng.random::<f64>() * total;
    for &(code, w) in pairs {
        if x < w {
            return code;
        }
        x -= w;
    }
    pairs.iter().rev().find(|p| p.1 > 0.0).map_or(200, |p| p.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu_log: f64,
    pub sigma_log: f64,
}

/// What the generated traffic looks like, per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntryProfile {
    /// CIDR ranges for legitimate clients.
    pub normal_ip_pools: Vec<String>,
    /// CIDR ranges for hostile clients; kept small so addresses recur.
    pub anomaly_ip_pools: Vec<String>,
    pub normal_uris: Vec<String>,
    /// Sensitive endpoints hit by anomalous traffic without an injection payload.
    pub probe_uris: Vec<String>,
    pub attack_uris: Vec<String>,
    pub normal_status: StatusWeights,
    pub anomaly_status: StatusWeights,
    pub normal_bytes: LogNormalParams,
    pub anomaly_bytes: LogNormalParams,
    pub benign_uas: Vec<String>,
    pub suspicious_uas: Vec<String>,
    pub normal_suspicious_ua_prob: f64,
    pub anomaly_suspicious_ua_prob: f64,
    pub benign_referrers: Vec<String>,
    pub malicious_referrers: Vec<String>,
    pub anomaly_malicious_referrer_prob: f64,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for EntryProfile {
    fn default() -> Self {
        Self {
            normal_ip_pools: strings(&["192.168.0.0/20", "10.10.0.0/16", "203.0.113.128/25"]),
            anomaly_ip_pools: strings(&["203.0.113.0/26", "198.51.100.0/26", "45.33.32.0/27"]),
            normal_uris: strings(&[
                "/index.html",
                "/about.html",
                "/contact.html",
                "/products",
                "/products/item?id=42",
                "/search?q=shoes",
                "/blog/2024/01/welcome",
                "/static/css/main.css",
                "/static/js/app.js",
                "/images/logo.png",
                "/api/v1/status",
                "/favicon.ico",
            ]),
            probe_uris: strings(&[
                "/admin",
                "/login",
                "/wp-login.php",
                "/phpmyadmin/",
                "/.env",
                "/config.php",
                "/server-status",
                "/api/v1/users",
            ]),
            attack_uris: strings(&[
                "/admin?' OR 1=1 --",
                "/login.php?user=admin' OR 1=1 --",
                "/products?id=1' OR 1=1--",
                "/search?q=<script>alert(1)</script>",
                "/comment?text=<script>document.cookie</script>",
                "/../../etc/passwd",
                "/download?file=../../../etc/shadow",
                "/item?id=7;DROP TABLE users--",
            ]),
            normal_status: StatusWeights {
                ok: 0.99,
                unauthorized: 0.0,
                forbidden: 0.0,
                server_error: 0.01,
            },
            anomaly_status: StatusWeights {
                ok: 0.0,
                unauthorized: 0.495,
                forbidden: 0.495,
                server_error: 0.01,
            },
            normal_bytes: LogNormalParams {
                mu_log: 7.6,
                sigma_log: 0.5,
            },
            anomaly_bytes: LogNormalParams {
                mu_log: 8.6,
                sigma_log: 0.7,
            },
            benign_uas: strings(&[
                "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/120.0 Safari/537.36",
                "Mozilla/5.0 (Macintosh; Intel Mac OS X 14_2) AppleWebKit/605.1.15 (KHTML, like Gecko) Version/17.2 Safari/605.1.15",
                "Mozilla/5.0 (X11; Linux x86_64; rv:121.0) Gecko/20100101 Firefox/121.0",
                "Mozilla/5.0 (iPhone; CPU iPhone OS 17_2 like Mac OS X) AppleWebKit/605.1.15 Mobile/15E148",
            ]),
            suspicious_uas: strings(&[
                "curl/7.68.0",
                "python-requests/2.31 (scanbot)",
                "sqlmap/1.7 (http://sqlmap.org) bot",
                "Googlebot/2.1 (+http://www.google.com/bot.html)",
                "masscan-bot/1.3",
            ]),
            normal_suspicious_ua_prob: 0.02,
            anomaly_suspicious_ua_prob: 0.6,
            benign_referrers: strings(&[
                "-",
                "https://www.google.com/",
                "https://www.bing.com/",
                "https://shop.example.com/",
            ]),
            malicious_referrers: strings(&["http://malicious-site.com/"]),
            anomaly_malicious_referrer_prob: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cidr {
    base: u32,
    size: u64,
}

impl Cidr {
    fn parse(text: &str) -> Result<Self> {
        let (addr, prefix) = text
            .split_once('/')
            .ok_or_else(|| Error::config(format!("'{text}' is not CIDR notation")))?;
        let addr: Ipv4Addr = addr
            .parse()
            .map_err(|_| Error::config(format!("bad address in '{text}'")))?;
        let prefix: u32 = prefix
            .parse()
            .ok()
            .filter(|p| *p <= 32)
            .ok_or_else(|| Error::config(format!("bad prefix in '{text}'")))?;
        let size = 1u64 << (32 - prefix);
        let mask = if prefix == 0 { 0 } else { u32::MAX << (32 - prefix) };
        Ok(Self {
            base: u32::from(addr) & mask,
            size,
        })
    }

    fn sample(&self, rng: &mut Rng) -> Ipv4Addr {
        // skip network and broadcast addresses when the block has room
        let offset = if self.size > 2 {
            rng.random_range(1..self.size - 1)
        } else {
            rng.random_range(0..self.size)
        };
        Ipv4Addr::from(self.base.wrapping_add(offset as u32))
    }
}

fn check_nonempty(name: &str, items: &[String]) -> Result<()> {
    if items.is_empty() {
        Err(Error::config(format!("profile.{name} must not be empty")))
    } else {
        Ok(())
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(format!("profile.{name} must lie in [0, 1]")))
    }
}

struct CompiledProfile<'a> {
    profile: &'a EntryProfile,
    normal_pools: Vec<Cidr>,
    anomaly_pools: Vec<Cidr>,
    normal_bytes: LogNormal<f64>,
    anomaly_bytes: LogNormal<f64>,
}

impl EntryProfile {
    /// Checks that generation and labeling agree: attack URIs must trip the
    /// injection rule, normal traffic must never look anomalous.
    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    fn compile(&self) -> Result<CompiledProfile<'_>> {
        check_nonempty("normal_ip_pools", &self.normal_ip_pools)?;
        check_nonempty("anomaly_ip_pools", &self.anomaly_ip_pools)?;
        check_nonempty("normal_uris", &self.normal_uris)?;
        check_nonempty("probe_uris", &self.probe_uris)?;
        check_nonempty("attack_uris", &self.attack_uris)?;
        check_nonempty("benign_uas", &self.benign_uas)?;
        check_nonempty("suspicious_uas", &self.suspicious_uas)?;
        check_nonempty("benign_referrers", &self.benign_referrers)?;
        check_nonempty("malicious_referrers", &self.malicious_referrers)?;
        check_prob("normal_suspicious_ua_prob", self.normal_suspicious_ua_prob)?;
        check_prob("anomaly_suspicious_ua_prob", self.anomaly_suspicious_ua_prob)?;
        check_prob(
            "anomaly_malicious_referrer_prob",
            self.anomaly_malicious_referrer_prob,
        )?;

        if let Some(uri) = self.attack_uris.iter().find(|u| !is_injection_uri(u)) {
            return Err(Error::config(format!(
                "attack URI '{uri}' does not match the injection rule"
            )));
        }
        if let Some(uri) = self
            .normal_uris
            .iter()
            .chain(&self.probe_uris)
            .find(|u| is_injection_uri(u))
        {
            return Err(Error::config(format!(
                "non-attack URI '{uri}' matches the injection rule"
            )));
        }
        let normal = self.normal_status;
        if normal.unauthorized != 0.0 || normal.forbidden != 0.0 {
            return Err(Error::config(
                "normal traffic cannot carry 401/403, which the labeler treats as anomalous",
            ));
        }
        if normal.ok + normal.server_error <= 0.0 {
            return Err(Error::config("normal status weights sum to zero"));
        }
        let anomaly = self.anomaly_status;
        if anomaly.unauthorized + anomaly.forbidden <= 0.0 {
            return Err(Error::config("anomalous traffic needs weight on 401/403"));
        }
        for w in normal.pairs().iter().chain(anomaly.pairs().iter()) {
            if !(w.1.is_finite() && w.1 >= 0.0) {
                return Err(Error::config("status weights must be finite and nonnegative"));
            }
        }

        let lognormal = |p: LogNormalParams| {
            LogNormal::new(p.mu_log, p.sigma_log)
                .map_err(|e| Error::config(format!("bad lognormal parameters: {e}")))
        };
        let pools = |v: &[String]| v.iter().map(|c| Cidr::parse(c)).collect::<Result<Vec<_>>>();
        Ok(CompiledProfile {
            profile: self,
            normal_pools: pools(&self.normal_ip_pools)?,
            anomaly_pools: pools(&self.anomaly_ip_pools)?,
            normal_bytes: lognormal(self.normal_bytes)?,
            anomaly_bytes: lognormal(self.anomaly_bytes)?,
        })
    }
}

/// One exponential inter-arrival gap in seconds.
pub fn sample_interarrival(rng: &mut Rng, rate: f64) -> Result<f64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::config(format!("inter-arrival rate must be positive, got {rate}")));
    }
    let exp = Exp::new(rate).map_err(|e| Error::config(e.to_string()))?;
    // the support is (0, inf); guard the measure-zero draw of exactly 0
    loop {
        let gap = exp.sample(rng);
        if gap > 0.0 {
            return Ok(gap);
        }
    }
}

/// Per-chunk anomaly rates: the global rate jittered by up to ±0.1 (less when
/// the rate sits near 0 or 1), recentred so the size-weighted mean is exactly
/// the global rate.
pub fn chunk_anomaly_rates(config: &GenConfig) -> Vec<f64> {
    let seed = config.seed.unwrap_or_default();
    let mut rng = seed::sub_rng(seed, u64::MAX);
    let n = config.num_chunks();
    let rate = config.anomaly_rate;
    let amplitude = CHUNK_JITTER.min(rate).min(1.0 - rate);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let centre: f64 = (0..n)
        .map(|c| raw[c] * config.chunk_len(c) as f64)
        .sum::<f64>()
        / config.total_entries as f64;
    let deviations: Vec<f64> = raw.iter().map(|u| u - centre).collect();
    let widest = deviations.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let scale = if widest > 1.0 { amplitude / widest } else { amplitude };
    deviations
        .iter()
        .map(|d| (rate + d * scale).clamp(0.0, 1.0))
        .collect()
}

fn pick<'a>(rng: &mut Rng, items: &'a [String]) -> &'a str {
    items.choose(rng).map(String::as_str).unwrap_or("-")
}

impl CompiledProfile<'_> {
    fn entry(&self, rng: &mut Rng, anomalous: bool, attack_rate: f64, noise: f64) -> LogEntry {
        let p = self.profile;
        let (ip, uri, status, bytes, ua, referrer);
        if anomalous {
            let attack = rng.random::<f64>() < attack_rate;
            let pool = self.anomaly_pools.choose(rng).expect("validated nonempty");
            ip = pool.sample(rng);
            uri = if attack {
                pick(rng, &p.attack_uris)
            } else {
                pick(rng, &p.probe_uris)
            };
            status = if attack {
                draw_weighted(rng, &p.anomaly_status.pairs())
            } else {
                // without a payload only 401/403 make the entry anomalous
                draw_weighted(rng, &p.anomaly_status.pairs()[1..3])
            };
            bytes = self.anomaly_bytes.sample(rng);
            ua = if rng.random::<f64>() < p.anomaly_suspicious_ua_prob {
                pick(rng, &p.suspicious_uas)
            } else {
                pick(rng, &p.benign_uas)
            };
            referrer = if rng.random::<f64>() < p.anomaly_malicious_referrer_prob {
                pick(rng, &p.malicious_referrers)
            } else {
                pick(rng, &p.benign_referrers)
            };
        } else {
            let pool = self.normal_pools.choose(rng).expect("validated nonempty");
            ip = pool.sample(rng);
            uri = pick(rng, &p.normal_uris);
            status = draw_weighted(rng, &p.normal_status.pairs());
            bytes = self.normal_bytes.sample(rng);
            ua = if rng.random::<f64>() < p.normal_suspicious_ua_prob {
                pick(rng, &p.suspicious_uas)
            } else {
                pick(rng, &p.benign_uas)
            };
            referrer = pick(rng, &p.benign_referrers);
        }
        let perturbation = if noise > 0.0 {
            1.0 + rng.random_range(-noise..=noise)
        } else {
            1.0
        };
        let mut entry = LogEntry {
            ip: ip.to_string(),
            timestamp: 0,
            method: "GET".into(),
            uri: uri.to_string(),
            protocol: "HTTP/1.1".into(),
            status,
            bytes: (bytes * perturbation).round().max(0.0) as u64,
            referrer: referrer.to_string(),
            user_agent: ua.to_string(),
            label: None,
        };
        entry.label = Some(label_entry(&entry));
        debug_assert_eq!(entry.label, Some(anomalous));
        entry
    }
}

/// Entries of one chunk with timestamps relative to the chunk's start, plus
/// the chunk's total elapsed seconds.
fn generate_chunk_relative(
    config: &GenConfig,
    profile: &CompiledProfile<'_>,
    chunk: usize,
    chunk_rate: f64,
) -> Result<(Vec<LogEntry>, Vec<f64>)> {
    let seed = config.seed.ok_or_else(|| Error::config("seed required"))?;
    let len = config.chunk_len(chunk);
    let mut rng = seed::sub_rng(seed, chunk as u64);
    let arrival_rate = config.total_entries as f64 / config.time_span;

    let anomalies = ((chunk_rate * len as f64).round() as usize).min(len);
    let mut is_anomaly = vec![false; len];
    for i in index::sample(&mut rng, len, anomalies) {
        is_anomaly[i] = true;
    }

    let mut clock = 0.0;
    let mut offsets = Vec::with_capacity(len);
    let mut entries = Vec::with_capacity(len);
    for &anomalous in &is_anomaly {
        clock += sample_interarrival(&mut rng, arrival_rate)?;
        offsets.push(clock);
        entries.push(profile.entry(&mut rng, anomalous, config.attack_rate, config.bytes_noise));
    }
    Ok((entries, offsets))
}

/// Streams the dataset chunk by chunk in order, with absolute timestamps.
/// Chunks are generated in parallel batches; output is identical to a
/// sequential pass.
pub fn generate_chunks<F>(config: &GenConfig, profile: &EntryProfile, mut sink: F) -> Result<()>
where
    F: FnMut(usize, Vec<LogEntry>) -> Result<()>,
{
    config.validate()?;
    let compiled = profile.compile()?;
    let rates = chunk_anomaly_rates(config);
    let batch = rayon::current_num_threads().max(1);
    let mut clock = 0.0;
    for first in (0..rates.len()).step_by(batch) {
        let last = (first + batch).min(rates.len());
        let produced: Vec<_> = (first..last)
            .into_par_iter()
            .map(|c| generate_chunk_relative(config, &compiled, c, rates[c]))
            .collect::<Result<_>>()?;
        for (i, (mut entries, offsets)) in produced.into_iter().enumerate() {
            for (entry, offset) in entries.iter_mut().zip(&offsets) {
                entry.timestamp = config.start_time + (clock + offset).floor() as i64;
            }
            clock += offsets.last().copied().unwrap_or(0.0);
            sink(first + i, entries)?;
        }
    }
    Ok(())
}

pub fn generate_dataset(config: &GenConfig, profile: &EntryProfile) -> Result<Vec<LogEntry>> {
    let mut all = Vec::with_capacity(config.total_entries);
    generate_chunks(config, profile, |_, mut chunk| {
        all.append(&mut chunk);
        Ok(())
    })?;
    Ok(all)
}

/// Splits into consecutive chunks of `chunk_size`; only the last may be short.
pub fn chunk_dataset<T>(entries: &[T], chunk_size: usize) -> Result<Vec<&[T]>> {
    if chunk_size == 0 {
        return Err(Error::config("chunk_size must be positive"));
    }
    Ok(entries.chunks(chunk_size).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub entries: usize,
    pub anomalies: usize,
    pub anomaly_rate: f64,
    pub first_timestamp: i64,
    pub last_timestamp: i64,
    pub span_seconds: i64,
    pub chunks: usize,
    pub chunk_anomaly_rates: Vec<f64>,
}

#[derive(Default)]
struct SummaryBuilder {
    entries: usize,
    anomalies: usize,
    first: Option<i64>,
    last: i64,
    chunk_rates: Vec<f64>,
}

impl SummaryBuilder {
    fn add_chunk(&mut self, chunk: &[LogEntry]) {
        let anomalies = chunk.iter().filter(|e| e.label == Some(true)).count();
        self.entries += chunk.len();
        self.anomalies += anomalies;
        if let (Some(first), Some(last)) = (chunk.first(), chunk.last()) {
            self.first.get_or_insert(first.timestamp);
            self.last = last.timestamp;
        }
        if !chunk.is_empty() {
            self.chunk_rates.push(anomalies as f64 / chunk.len() as f64);
        }
    }

    fn finish(self) -> DatasetSummary {
        let first = self.first.unwrap_or_default();
        DatasetSummary {
            entries: self.entries,
            anomalies: self.anomalies,
            anomaly_rate: if self.entries == 0 {
                0.0
            } else {
                self.anomalies as f64 / self.entries as f64
            },
            first_timestamp: first,
            last_timestamp: self.last,
            span_seconds: self.last - first,
            chunks: self.chunk_rates.len(),
            chunk_anomaly_rates: self.chunk_rates,
        }
    }
}

pub fn summarize(entries: &[LogEntry], chunk_size: usize) -> Result<DatasetSummary> {
    let mut builder = SummaryBuilder::default();
    for chunk in chunk_dataset(entries, chunk_size)? {
        builder.add_chunk(chunk);
    }
    Ok(builder.finish())
}

/// Generates straight to disk: the log file plus a `line_number,label`
/// sidecar (1-based line numbers, labels 0/1).
pub fn write_generated(
    config: &GenConfig,
    profile: &EntryProfile,
    log_path: &Path,
    labels_path: &Path,
) -> Result<DatasetSummary> {
    let mut log = BufWriter::new(File::create(log_path)?);
    let mut labels = BufWriter::new(File::create(labels_path)?);
    let mut builder = SummaryBuilder::default();
    let mut line_no = 0usize;
    generate_chunks(config, profile, |_, chunk| {
        for entry in &chunk {
            line_no += 1;
            writeln!(log, "{}", format_line(entry))?;
            writeln!(labels, "{},{}", line_no, u8::from(entry.label == Some(true)))?;
        }
        builder.add_chunk(&chunk);
        Ok(())
    })?;
    log.flush()?;
    labels.flush()?;
    Ok(builder.finish())
}

pub fn write_dataset(entries: &[LogEntry], log_path: &Path, labels_path: &Path) -> Result<()> {
    let mut log = BufWriter::new(File::create(log_path)?);
    let mut labels = BufWriter::new(File::create(labels_path)?);
    for (i, entry) in entries.iter().enumerate() {
        writeln!(log, "{}", format_line(entry))?;
        let label = entry.label.unwrap_or_else(|| label_entry(entry));
        writeln!(labels, "{},{}", i + 1, u8::from(label))?;
    }
    log.flush()?;
    labels.flush()?;
    Ok(())
}

pub fn read_labels(labels_path: &Path) -> Result<Vec<bool>> {
    let reader = BufReader::new(File::open(labels_path)?);
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let bad = || Error::Dataset(format!("{}:{}: malformed label row", labels_path.display(), i + 1));
        let (num, label) = line.trim().split_once(',').ok_or_else(bad)?;
        if num.parse::<usize>().ok() != Some(i + 1) {
            return Err(bad());
        }
        labels.push(match label {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        });
    }
    Ok(labels)
}

/// Streams parsed, labeled entries from a log file and its sidecar.
pub fn for_each_entry<F>(log_path: &Path, labels_path: &Path, mut f: F) -> Result<usize>
where
    F: FnMut(LogEntry) -> Result<()>,
{
    let labels = read_labels(labels_path)?;
    let reader = BufReader::new(File::open(log_path)?);
    let mut count = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut entry = parse_line(&line).map_err(|e| {
            Error::Dataset(format!("{}:{}: {e}", log_path.display(), i + 1))
        })?;
        let label = labels.get(i).ok_or_else(|| {
            Error::Dataset(format!("labels file has no row for line {}", i + 1))
        })?;
        entry.label = Some(*label);
        f(entry)?;
        count += 1;
    }
    if count != labels.len() {
        return Err(Error::Dataset(format!(
            "log has {count} lines but labels file has {} rows",
            labels.len()
        )));
    }
    Ok(count)
}

pub fn read_dataset(log_path: &Path, labels_path: &Path) -> Result<Vec<LogEntry>> {
    let mut entries = Vec::new();
    for_each_entry(log_path, labels_path, |e| {
        entries.push(e);
        Ok(())
    })?;
    Ok(entries)
}
