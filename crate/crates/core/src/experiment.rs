//! Replicated experiments over node counts and routing policies, with CSV
//! and JSON output and paired policy comparison.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{build_spanning_tree, Event, EventLog};
use crate::energy::EnergyParams;
use crate::geometry::{Area, Point, SinkPath};
use crate::network::Network;
use crate::opt::{brute_force_optimum, OracleError, SaConfig, TreeProblem, VnsConfig};
use crate::sim::{
    deploy, run_simulation, OptimizerKind, Policy, Reoptimize, RoundMetrics, SimError,
    SimulationConfig,
};
use crate::topology::Parent;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot parse {path} at `{key}`: {reason}")]
    Parse {
        path: PathBuf,
        key: String,
        reason: String,
    },
    #[error("invalid config value `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("simulation failed for node_count={node_count} rep={rep} seed={seed}: {source}")]
    Simulation {
        node_count: usize,
        rep: usize,
        seed: u64,
        source: SimError,
    },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("cannot compare summaries: {0}")]
    Compare(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("oracle instance: {0}")]
    Instance(String),
}

impl ExperimentError {
    /// True for problems with the user's input files rather than the run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Self::Read { .. } | Self::Parse { .. } | Self::Invalid { .. }
        )
    }
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn is_on(self) -> bool {
        self == Switch::On
    }
}

fn default_reoptimize() -> Reoptimize {
    Reoptimize::OnThreshold
}

/// A named policy as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: String,
    pub optimizer: OptimizerKind,
    pub thresholds: Switch,
    #[serde(default = "default_reoptimize")]
    pub reoptimize: Reoptimize,
}

impl PolicySpec {
    pub fn policy(&self) -> Policy {
        Policy {
            optimizer: self.optimizer,
            thresholds: self.thresholds.is_on(),
            reoptimize: self.reoptimize,
        }
    }

    pub fn baseline() -> Self {
        Self {
            name: "baseline".into(),
            optimizer: OptimizerKind::None,
            thresholds: Switch::Off,
            reoptimize: Reoptimize::Setup,
        }
    }

    pub fn proposed() -> Self {
        Self {
            name: "proposed".into(),
            optimizer: OptimizerKind::Vns,
            thresholds: Switch::On,
            reoptimize: Reoptimize::OnThreshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub area: Area,
    pub node_counts: Vec<usize>,
    pub initial_energy: f64,
    pub e_min: f64,
    pub comm_radius: f64,
    pub anchor_radius: f64,
    pub rounds: u32,
    pub reps: usize,
    pub base_seed: u64,
    pub optimizer: OptimizerKind,
    pub thresholds: Switch,
    pub reoptimize: Reoptimize,
    /// Runs these policies instead of the single one given by `optimizer`,
    /// `thresholds` and `reoptimize`.
    pub policies: Option<Vec<PolicySpec>>,
    pub sa: SaConfig,
    pub vns: VnsConfig,
    pub radio: EnergyParams,
    pub t_hop_ms: f64,
    /// Defaults to the horizontal mid-line of the area.
    pub sink_waypoints: Option<Vec<Point>>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            area: Area::default(),
            node_counts: Vec::new(),
            initial_energy: 0.2,
            e_min: 0.01,
            comm_radius: 150.0,
            anchor_radius: 100.0,
            rounds: 1200,
            reps: 25,
            base_seed: 1,
            optimizer: OptimizerKind::Vns,
            thresholds: Switch::On,
            reoptimize: Reoptimize::OnThreshold,
            policies: None,
            sa: SaConfig::default(),
            vns: VnsConfig::default(),
            radio: EnergyParams::default(),
            t_hop_ms: 0.1,
            sink_waypoints: None,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.node_counts.is_empty() {
            return Err(invalid("node_counts", "must list at least one node count"));
        }
        if let Some(i) = self.node_counts.iter().position(|&n| n == 0) {
            return Err(invalid(format!("node_counts[{i}]"), "must be >= 1"));
        }
        let mut seen = self.node_counts.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("node_counts", "contains duplicates"));
        }
        if self.reps == 0 {
            return Err(invalid("reps", "must be >= 1"));
        }
        if self.rounds == 0 {
            return Err(invalid("rounds", "must be >= 1"));
        }
        for (key, v) in [
            ("area.width", self.area.width),
            ("area.height", self.area.height),
            ("initial_energy", self.initial_energy),
            ("e_min", self.e_min),
            ("comm_radius", self.comm_radius),
            ("anchor_radius", self.anchor_radius),
            ("t_hop_ms", self.t_hop_ms),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("must be a finite value > 0, got {v}")));
            }
        }
        if self.e_min > self.initial_energy {
            return Err(invalid("e_min", "must not exceed initial_energy"));
        }
        if self.base_seed.checked_add(self.reps as u64).is_none() {
            return Err(invalid("base_seed", "base_seed + reps overflows"));
        }
        self.radio.validate().map_err(|e| match e {
            crate::energy::EnergyError::InvalidParam { key, reason } => {
                invalid(format!("radio.{key}"), reason)
            }
            other => invalid("radio", other.to_string()),
        })?;
        self.sa.validate().map_err(|e| invalid(e.key, e.reason))?;
        self.vns.validate().map_err(|e| invalid(e.key, e.reason))?;
        self.sink_path()?;
        if let Some(ps) = &self.policies {
            if ps.is_empty() {
                return Err(invalid("policies", "must not be empty when given"));
            }
            for (i, p) in ps.iter().enumerate() {
                let ok = !p.name.is_empty()
                    && p.name
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
                if !ok {
                    return Err(invalid(
                        format!("policies[{i}].name"),
                        "must be non-empty and use only letters, digits, '-' or '_'",
                    ));
                }
                if ps[..i].iter().any(|q| q.name == p.name) {
                    return Err(invalid(format!("policies[{i}].name"), "duplicate name"));
                }
            }
        }
        Ok(())
    }

    pub fn sink_path(&self) -> Result<SinkPath, ExperimentError> {
        let path = match &self.sink_waypoints {
            None => SinkPath::midline(&self.area),
            Some(w) => {
                SinkPath::new(w.clone()).map_err(|e| invalid("sink_waypoints", e.to_string()))?
            }
        };
        path.check_within(&self.area)
            .map_err(|e| invalid("sink_waypoints", e.to_string()))?;
        Ok(path)
    }

    /// Policies to run, in output order.
    pub fn policy_specs(&self) -> Vec<PolicySpec> {
        match &self.policies {
            Some(ps) => ps.clone(),
            None => {
                let opt = match self.optimizer {
                    OptimizerKind::None => "none",
                    OptimizerKind::Sa => "sa",
                    OptimizerKind::Vns => "vns",
                };
                let th = if self.thresholds.is_on() { "on" } else { "off" };
                vec![PolicySpec {
                    name: format!("{opt}-{th}"),
                    optimizer: self.optimizer,
                    thresholds: self.thresholds,
                    reoptimize: self.reoptimize,
                }]
            }
        }
    }

    /// Simulation settings for one replicate.
    pub fn simulation(
        &self,
        policy: Policy,
        node_count: usize,
        rep: usize,
    ) -> Result<SimulationConfig, ExperimentError> {
        let seed = self.base_seed + rep as u64;
        let path = self.sink_path()?;
        let positions = deploy(
            node_count,
            &self.area,
            &path,
            self.comm_radius,
            self.anchor_radius,
            deployment_seed(seed, node_count),
        )
        .map_err(|source| ExperimentError::Simulation {
            node_count,
            rep,
            seed,
            source,
        })?;
        Ok(SimulationConfig {
            positions,
            sink_path: path,
            radio: self.radio,
            initial_energy: self.initial_energy,
            e_min: self.e_min,
            comm_radius: self.comm_radius,
            anchor_radius: self.anchor_radius,
            rounds: self.rounds,
            t_hop_ms: self.t_hop_ms,
            policy,
            sa: self.sa,
            vns: self.vns,
            seed,
        })
    }
}

/// Deployments depend on the seed and the node count only, so every policy
/// sees the same networks.
pub fn deployment_seed(seed: u64, node_count: usize) -> u64 {
    seed ^ ((node_count as u64) << 40)
}

fn parse_json<T: serde::de::DeserializeOwned>(
    path: &Path,
    text: &str,
) -> Result<T, ExperimentError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ExperimentError::Parse {
        path: path.to_path_buf(),
        key: e.path().to_string(),
        reason: e.inner().to_string(),
    })
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let cfg: ExperimentConfig = parse_json(path, &read(path)?)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Final values of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub policy: String,
    pub node_count: usize,
    pub rep: usize,
    pub seed: u64,
    pub dead: usize,
    pub energy_j: f64,
    /// Mean per-packet delay over delivered packets.
    pub delay_ms: f64,
    pub pdr: f64,
    pub conservation_error: f64,
    pub metrics: Vec<RoundMetrics>,
    pub events: Vec<Event>,
}

pub fn run_replicate(
    cfg: &ExperimentConfig,
    spec: &PolicySpec,
    node_count: usize,
    rep: usize,
) -> Result<RepOutcome, ExperimentError> {
    let sim_cfg = cfg.simulation(spec.policy(), node_count, rep)?;
    let seed = sim_cfg.seed;
    let out = run_simulation(sim_cfg).map_err(|source| ExperimentError::Simulation {
        node_count,
        rep,
        seed,
        source,
    })?;
    let generated: u64 = out.metrics.iter().map(|m| m.generated as u64).sum();
    let delivered: u64 = out.metrics.iter().map(|m| m.delivered as u64).sum();
    let delay_sum: f64 = out.metrics.iter().map(|m| m.delay_sum_ms).sum();
    Ok(RepOutcome {
        policy: spec.name.clone(),
        node_count,
        rep,
        seed,
        dead: out.final_nodes.iter().filter(|n| !n.is_alive()).count(),
        energy_j: out.metrics.iter().map(|m| m.energy_used).sum(),
        delay_ms: if delivered == 0 {
            0.0
        } else {
            delay_sum / delivered as f64
        },
        pdr: if generated == 0 {
            0.0
        } else {
            delivered as f64 / generated as f64
        },
        conservation_error: out.conservation_error,
        metrics: out.metrics,
        events: out.events,
    })
}

/// Runs every policy × node count × replicate. Results come back ordered
/// by policy, node count and replicate regardless of `jobs`.
pub fn execute(
    cfg: &ExperimentConfig,
    jobs: Option<usize>,
) -> Result<Vec<RepOutcome>, ExperimentError> {
    cfg.validate()?;
    let specs = cfg.policy_specs();
    let mut work = Vec::new();
    for spec in &specs {
        for &n in &cfg.node_counts {
            for rep in 0..cfg.reps {
                work.push((spec, n, rep));
            }
        }
    }
    let run = || {
        work.par_iter()
            .map(|&(spec, n, rep)| run_replicate(cfg, spec, n, rep))
            .collect::<Vec<_>>()
    };
    let results = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| invalid("jobs", e.to_string()))?
            .install(run),
        None => run(),
    };
    results.into_iter().collect()
}

/// Fixed decimal notation with six significant digits.
pub fn fmt6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let x = if x == 0.0 { 0.0 } else { x };
    // the exponent after rounding to six digits decides the decimals
    let sci = format!("{x:.5e}");
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let decimals = (5 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn round6(x: f64) -> f64 {
    fmt6(x).parse().expect("fmt6 output parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
    /// Per-replicate finals in replicate order, as written to the CSV.
    pub values: Vec<f64>,
}

impl MetricStats {
    /// Mean and sample standard deviation (0 for a single value) of the
    /// six-digit rounded values.
    pub fn from_values(raw: &[f64]) -> Self {
        let values: Vec<f64> = raw.iter().map(|&x| round6(x)).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self {
            mean: round6(mean),
            std: round6(std),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub node_count: usize,
    pub seeds: Vec<u64>,
    pub dead: MetricStats,
    pub energy_j: MetricStats,
    pub delay_ms: MetricStats,
    pub pdr: MetricStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub rows: Vec<SummaryRow>,
}

impl ExperimentSummary {
    pub fn row(&self, policy: &str, node_count: usize) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && r.node_count == node_count)
    }
}

/// Groups outcomes by (policy, node count) in first-seen order.
pub fn summarize(outcomes: &[RepOutcome]) -> ExperimentSummary {
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut groups: BTreeMap<(String, usize), Vec<&RepOutcome>> = BTreeMap::new();
    for o in outcomes {
        let key = (o.policy.clone(), o.node_count);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(o);
    }
    let rows = order
        .into_iter()
        .map(|key| {
            let mut g = groups.remove(&key).unwrap_or_default();
            g.sort_by_key(|o| o.rep);
            let col = |f: fn(&RepOutcome) -> f64| -> Vec<f64> { g.iter().map(|o| f(o)).collect() };
            SummaryRow {
                policy: key.0,
                node_count: key.1,
                seeds: g.iter().map(|o| o.seed).collect(),
                dead: MetricStats::from_values(&col(|o| o.dead as f64)),
                energy_j: MetricStats::from_values(&col(|o| o.energy_j)),
                delay_ms: MetricStats::from_values(&col(|o| o.delay_ms)),
                pdr: MetricStats::from_values(&col(|o| o.pdr)),
            }
        })
        .collect();
    ExperimentSummary { rows }
}

pub const TRACE_HEADER: [&str; 10] = [
    "rep",
    "round",
    "alive",
    "dead",
    "generated",
    "delivered",
    "pdr",
    "delay_ms_avg",
    "energy_used_J",
    "bottleneck_load",
];

pub const EVENT_HEADER: [&str; 6] = ["rep", "round", "kind", "node", "old_parent", "new_parent"];

pub const REPS_HEADER: [&str; 8] = [
    "policy",
    "node_count",
    "rep",
    "seed",
    "dead",
    "energy_J",
    "delay_ms",
    "pdr",
];

pub const SUMMARY_HEADER: [&str; 11] = [
    "policy",
    "node_count",
    "reps",
    "dead_mean",
    "dead_std",
    "energy_J_mean",
    "energy_J_std",
    "delay_ms_mean",
    "delay_ms_std",
    "pdr_mean",
    "pdr_std",
];

type CsvOut = csv::Writer<BufWriter<File>>;

fn csv_writer(path: &Path) -> Result<CsvOut, ExperimentError> {
    let f = File::create(path).map_err(|source| ExperimentError::Write {
        path: path.into(),
        source,
    })?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn csv_err(path: &Path, e: csv::Error) -> ExperimentError {
    ExperimentError::Write {
        path: path.into(),
        source: io::Error::other(e),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), ExperimentError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| ExperimentError::Write {
        path: path.into(),
        source,
    })
}

fn ratio(num: f64, den: u32) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

fn trace_rows(o: &RepOutcome) -> impl Iterator<Item = Vec<String>> + '_ {
    o.metrics.iter().map(move |m| {
        vec![
            o.rep.to_string(),
            m.round.to_string(),
            m.alive.to_string(),
            (o.node_count as u32 - m.alive).to_string(),
            m.generated.to_string(),
            m.delivered.to_string(),
            fmt6(ratio(m.delivered as f64, m.generated)),
            fmt6(ratio(m.delay_sum_ms, m.delivered)),
            fmt6(m.energy_used),
            fmt6(m.bottleneck_load),
        ]
    })
}

fn event_rows(o: &RepOutcome) -> impl Iterator<Item = Vec<String>> + '_ {
    let label = |p: Option<Parent>| p.map(|p| p.to_string()).unwrap_or_default();
    o.events.iter().map(move |e| {
        vec![
            o.rep.to_string(),
            e.round.to_string(),
            e.kind.as_str().to_string(),
            e.node.to_string(),
            label(e.old_parent),
            label(e.new_parent),
        ]
    })
}

/// Writes traces, event logs, per-replicate finals and the summary into
/// `dir`.
pub fn write_outputs(
    dir: &Path,
    outcomes: &[RepOutcome],
    summary: &ExperimentSummary,
) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Write {
        path: dir.into(),
        source,
    })?;
    for row in &summary.rows {
        let group: Vec<&RepOutcome> = outcomes
            .iter()
            .filter(|o| o.policy == row.policy && o.node_count == row.node_count)
            .collect();
        let stem = format!("{}_n{}", row.policy, row.node_count);
        write_rows(
            &dir.join(format!("trace_{stem}.csv")),
            &TRACE_HEADER,
            group.iter().flat_map(|o| trace_rows(o)),
        )?;
        write_rows(
            &dir.join(format!("events_{stem}.csv")),
            &EVENT_HEADER,
            group.iter().flat_map(|o| event_rows(o)),
        )?;
    }
    write_rows(
        &dir.join("reps.csv"),
        &REPS_HEADER,
        outcomes.iter().map(|o| {
            vec![
                o.policy.clone(),
                o.node_count.to_string(),
                o.rep.to_string(),
                o.seed.to_string(),
                o.dead.to_string(),
                fmt6(o.energy_j),
                fmt6(o.delay_ms),
                fmt6(o.pdr),
            ]
        }),
    )?;
    write_rows(
        &dir.join("summary.csv"),
        &SUMMARY_HEADER,
        summary.rows.iter().map(|r| {
            vec![
                r.policy.clone(),
                r.node_count.to_string(),
                r.seeds.len().to_string(),
                fmt6(r.dead.mean),
                fmt6(r.dead.std),
                fmt6(r.energy_j.mean),
                fmt6(r.energy_j.std),
                fmt6(r.delay_ms.mean),
                fmt6(r.delay_ms.std),
                fmt6(r.pdr.mean),
                fmt6(r.pdr.std),
            ]
        }),
    )?;
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|source| ExperimentError::Write { path, source })
}

/// Runs the experiment, writes all outputs to `cfg.output_dir` and returns
/// the summary.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    jobs: Option<usize>,
) -> Result<ExperimentSummary, ExperimentError> {
    let outcomes = execute(cfg, jobs)?;
    let summary = summarize(&outcomes);
    write_outputs(&cfg.output_dir, &outcomes, &summary)?;
    Ok(summary)
}

pub fn load_summary(path: &Path) -> Result<ExperimentSummary, ExperimentError> {
    parse_json(path, &read(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricComparison {
    /// Policy mean minus reference mean.
    pub delta: f64,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

impl MetricComparison {
    fn new(reference: &MetricStats, other: &MetricStats, higher_is_better: bool) -> Self {
        let mut c = Self {
            delta: round6(other.mean - reference.mean),
            wins: 0,
            losses: 0,
            ties: 0,
        };
        for (r, o) in reference.values.iter().zip(&other.values) {
            let better = if higher_is_better { o > r } else { o < r };
            if o == r {
                c.ties += 1;
            } else if better {
                c.wins += 1;
            } else {
                c.losses += 1;
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub reference: String,
    pub policy: String,
    pub node_count: usize,
    pub pairs: usize,
    pub dead: MetricComparison,
    pub energy_j: MetricComparison,
    pub delay_ms: MetricComparison,
    pub pdr: MetricComparison,
}

/// Compares every policy against the first one found, per node count and
/// over replicates paired by seed. Wins count replicates where the policy
/// beats the reference: fewer dead, less energy, lower delay, higher PDR.
pub fn compare_policies(
    summaries: &[ExperimentSummary],
) -> Result<Vec<ComparisonRow>, ExperimentError> {
    // policy label -> rows in node-count order; repeated labels get a suffix
    let mut policies: Vec<(String, Vec<&SummaryRow>)> = Vec::new();
    for (i, s) in summaries.iter().enumerate() {
        let mut local: Vec<(String, Vec<&SummaryRow>)> = Vec::new();
        for r in &s.rows {
            match local.iter_mut().find(|(name, _)| *name == r.policy) {
                Some((_, rows)) => rows.push(r),
                None => local.push((r.policy.clone(), vec![r])),
            }
        }
        for (name, rows) in local {
            let label = if policies.iter().any(|(n, _)| *n == name) {
                format!("{name}#{}", i + 1)
            } else {
                name
            };
            policies.push((label, rows));
        }
    }
    if policies.len() < 2 {
        return Err(ExperimentError::Compare(
            "need at least two policies".into(),
        ));
    }
    let (ref_name, ref_rows) = &policies[0];
    let mut out = Vec::new();
    for (name, rows) in &policies[1..] {
        for r in ref_rows {
            if !rows.iter().any(|o| o.node_count == r.node_count) {
                return Err(ExperimentError::Compare(format!(
                    "node_count {} is missing for policy `{name}`",
                    r.node_count
                )));
            }
        }
        for o in rows {
            let Some(r) = ref_rows.iter().find(|r| r.node_count == o.node_count) else {
                return Err(ExperimentError::Compare(format!(
                    "node_count {} is missing for policy `{ref_name}`",
                    o.node_count
                )));
            };
            if r.seeds != o.seeds {
                return Err(ExperimentError::Compare(format!(
                    "policies `{ref_name}` and `{name}` used different seeds at node_count {}",
                    o.node_count
                )));
            }
        }
        for r in ref_rows {
            let o = rows
                .iter()
                .find(|o| o.node_count == r.node_count)
                .expect("checked above");
            out.push(ComparisonRow {
                reference: ref_name.clone(),
                policy: name.clone(),
                node_count: r.node_count,
                pairs: r.seeds.len(),
                dead: MetricComparison::new(&r.dead, &o.dead, false),
                energy_j: MetricComparison::new(&r.energy_j, &o.energy_j, false),
                delay_ms: MetricComparison::new(&r.delay_ms, &o.delay_ms, false),
                pdr: MetricComparison::new(&r.pdr, &o.pdr, true),
            });
        }
    }
    Ok(out)
}

pub fn write_comparison<W: Write>(rows: &[ComparisonRow], w: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let mut header = vec!["reference", "policy", "node_count", "pairs"];
    let metric_cols = [
        ["dead_delta", "dead_wins", "dead_losses", "dead_ties"],
        [
            "energy_J_delta",
            "energy_J_wins",
            "energy_J_losses",
            "energy_J_ties",
        ],
        [
            "delay_ms_delta",
            "delay_ms_wins",
            "delay_ms_losses",
            "delay_ms_ties",
        ],
        ["pdr_delta", "pdr_wins", "pdr_losses", "pdr_ties"],
    ];
    header.extend(metric_cols.iter().flatten());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.reference.clone(),
            r.policy.clone(),
            r.node_count.to_string(),
            r.pairs.to_string(),
        ];
        for m in [r.dead, r.energy_j, r.delay_ms, r.pdr] {
            rec.extend([
                fmt6(m.delta),
                m.wins.to_string(),
                m.losses.to_string(),
                m.ties.to_string(),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn default_comm_radius() -> f64 {
    150.0
}

fn default_anchor_radius() -> f64 {
    100.0
}

fn default_energy() -> f64 {
    0.2
}

/// A small fixed network for the exhaustive oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleInstance {
    pub nodes: Vec<Point>,
    /// Remaining energy per node; every node gets `initial_energy` if
    /// omitted.
    #[serde(default)]
    pub energies: Option<Vec<f64>>,
    #[serde(default = "default_energy")]
    pub initial_energy: f64,
    #[serde(default = "default_comm_radius")]
    pub comm_radius: f64,
    #[serde(default = "default_anchor_radius")]
    pub anchor_radius: f64,
    #[serde(default)]
    pub area: Area,
    #[serde(default)]
    pub sink_waypoints: Option<Vec<Point>>,
    #[serde(default)]
    pub radio: EnergyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub greedy_cost: f64,
    pub optimum_cost: f64,
    /// Parent of each node in an optimal tree: "sink", a node id, or null
    /// for nodes outside the tree.
    pub parents: Vec<Option<String>>,
}

pub fn load_instance(path: &Path) -> Result<OracleInstance, ExperimentError> {
    parse_json(path, &read(path)?)
}

/// Builds the greedy tree for `inst` and solves it exactly.
pub fn solve_instance(inst: &OracleInstance) -> Result<OracleReport, ExperimentError> {
    let bad = |m: String| ExperimentError::Instance(m);
    inst.radio.validate().map_err(|e| bad(e.to_string()))?;
    let path = match &inst.sink_waypoints {
        Some(w) => SinkPath::new(w.clone()).map_err(|e| bad(e.to_string()))?,
        None => SinkPath::midline(&inst.area),
    };
    let e_min = inst.initial_energy.min(0.01);
    let mut net = Network::new(
        &inst.nodes,
        path,
        inst.comm_radius,
        inst.anchor_radius,
        inst.initial_energy,
        e_min,
    )
    .map_err(|e| bad(e.to_string()))?;
    if let Some(es) = &inst.energies {
        if es.len() != inst.nodes.len() {
            return Err(bad(format!(
                "{} energies for {} nodes",
                es.len(),
                inst.nodes.len()
            )));
        }
        for (node, &e) in net.nodes.iter_mut().zip(es) {
            if !(e > 0.0) {
                return Err(bad(format!("energy of node {} must be > 0", node.id)));
            }
            node.energy = e;
        }
    }
    let topo = build_spanning_tree(&net, &inst.radio, &mut EventLog::default())
        .map_err(|e| bad(e.to_string()))?;
    let problem = TreeProblem::new(&net, &inst.radio, &topo);
    let greedy_cost = problem.solution(&topo).cost;
    let (optimum_cost, best) = brute_force_optimum(&problem)?;
    Ok(OracleReport {
        greedy_cost,
        optimum_cost,
        parents: best
            .parents
            .iter()
            .map(|p| p.map(|p| p.to_string()))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ExperimentError> {
        let cfg: ExperimentConfig = parse_json(Path::new("cfg.json"), text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn key_of(e: ExperimentError) -> String {
        match e {
            ExperimentError::Invalid { key, .. } | ExperimentError::Parse { key, .. } => key,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse(r#"{ "node_counts": [100] }"#).unwrap();
        assert_eq!(
            cfg.area,
            Area {
                width: 1000.0,
                height: 1000.0
            }
        );
        assert_eq!(cfg.initial_energy, 0.2);
        assert_eq!((cfg.reps, cfg.rounds), (25, 1200));
        assert_eq!(cfg.policy_specs()[0].name, "vns-on");
    }

    #[test]
    fn validation_names_the_key() {
        assert_eq!(
            key_of(parse(r#"{ "node_counts": [100], "reps": 0 }"#).unwrap_err()),
            "reps"
        );
        assert_eq!(
            key_of(parse(r#"{ "node_counts": [100], "initial_energy": -1 }"#).unwrap_err()),
            "initial_energy"
        );
        assert_eq!(
            key_of(parse(r#"{ "reps": 3 }"#).unwrap_err()),
            "node_counts"
        );
        assert_eq!(
            key_of(parse(r#"{ "node_counts": [100], "sa": { "cool": 2.0 } }"#).unwrap_err()),
            "sa.cool"
        );
        assert_eq!(
            key_of(parse(r#"{ "node_counts": [100], "radio": { "alpha": 3 } }"#).unwrap_err()),
            "radio.alpha"
        );
        assert_eq!(
            key_of(parse(r#"{ "node_counts": [100], "rounds": -5 }"#).unwrap_err()),
            "rounds"
        );
        assert_eq!(
            key_of(parse(r#"{ "node_counts": [100], "bogus": 1 }"#).unwrap_err()),
            "bogus"
        );
    }

    #[test]
    fn fmt6_uses_six_significant_digits() {
        assert_eq!(fmt6(0.0), "0.00000");
        assert_eq!(fmt6(-0.0), "0.00000");
        assert_eq!(fmt6(1.0), "1.00000");
        assert_eq!(fmt6(13.0), "13.0000");
        assert_eq!(fmt6(123456.7), "123457");
        assert_eq!(fmt6(0.00123456789), "0.00123457");
        assert_eq!(fmt6(9.9999996), "10.0000");
        assert_eq!(fmt6(-2.5), "-2.50000");
    }

    #[test]
    fn single_rep_has_zero_std() {
        let s = MetricStats::from_values(&[3.25]);
        assert_eq!((s.mean, s.std), (3.25, 0.0));
    }

    #[test]
    fn mean_lies_within_range() {
        let s = MetricStats::from_values(&[0.1, 0.1, 0.1]);
        assert!(s.mean <= 0.1 && s.mean >= 0.1);
    }

    fn row(policy: &str, n: usize, dead: &[f64]) -> SummaryRow {
        let st = MetricStats::from_values(dead);
        SummaryRow {
            policy: policy.into(),
            node_count: n,
            seeds: (1..=dead.len() as u64).collect(),
            dead: st.clone(),
            energy_j: st.clone(),
            delay_ms: st.clone(),
            pdr: st,
        }
    }

    #[test]
    fn self_comparison_is_all_ties() {
        let s = ExperimentSummary {
            rows: vec![row("a", 100, &[1.0, 2.0]), row("a", 130, &[3.0, 4.0])],
        };
        let c = compare_policies(&[s.clone(), s]).unwrap();
        assert_eq!(c.len(), 2);
        for r in c {
            assert_eq!(r.policy, "a#2");
            for m in [r.dead, r.energy_j, r.delay_ms, r.pdr] {
                assert_eq!((m.delta, m.wins, m.losses, m.ties), (0.0, 0, 0, 2));
            }
        }
    }

    #[test]
    fn comparison_counts_wins() {
        let s = ExperimentSummary {
            rows: vec![row("base", 100, &[5.0, 3.0]), row("new", 100, &[4.0, 3.0])],
        };
        let c = compare_policies(&[s]).unwrap();
        assert_eq!((c[0].dead.wins, c[0].dead.ties), (1, 1));
        assert_eq!(c[0].dead.delta, -0.5);
        // higher pdr wins, so the same values lose there
        assert_eq!(c[0].pdr.losses, 1);
    }

    #[test]
    fn missing_node_count_is_named() {
        let a = ExperimentSummary {
            rows: vec![row("a", 100, &[1.0]), row("a", 130, &[1.0])],
        };
        let b = ExperimentSummary {
            rows: vec![row("b", 100, &[1.0])],
        };
        let err = compare_policies(&[a, b]).unwrap_err().to_string();
        assert!(err.contains("130"), "{err}");
    }
}
