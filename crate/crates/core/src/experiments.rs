//! Scenarios, parameter sweeps and the bundled reference workload.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{InferencePolicy, KnowledgeBase, NullPolicy, RelationRule};
use crate::metrics::{format_pct, improvement, Improvement, MetricsReport};
use crate::sim::{CacheLocation, Mode, SimError, SimOutput, Simulation, Topology};
use crate::workload::{generate_trace, SyntheticSpec, TraceEntry, WorkloadError};

pub const MB: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("sweep point {point}: {source}")]
    Point {
        point: String,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("sweep has no points")]
    EmptySweep,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("failed to write results: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to write results: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyChoice {
    Relation { max_prefetch: Option<usize> },
    Null,
}

impl Default for PolicyChoice {
    fn default() -> Self {
        PolicyChoice::Relation { max_prefetch: None }
    }
}

impl PolicyChoice {
    fn with_policy<R>(&self, f: impl FnOnce(&dyn InferencePolicy) -> R) -> R {
        match *self {
            PolicyChoice::Relation { max_prefetch } => f(&RelationRule { max_prefetch }),
            PolicyChoice::Null => f(&NullPolicy),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Workload {
    Synthetic(SyntheticSpec),
    Trace(Vec<TraceEntry>),
}

/// Everything a run needs apart from the knowledge base and the mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub workload: Workload,
    pub policy: PolicyChoice,
    pub seed: u64,
}

impl Scenario {
    pub fn trace(&self, kb: &KnowledgeBase) -> Result<Vec<TraceEntry>, WorkloadError> {
        match &self.workload {
            Workload::Synthetic(spec) => generate_trace(
                kb,
                &SyntheticSpec {
                    seed: self.seed,
                    ..spec.clone()
                },
            ),
            Workload::Trace(trace) => Ok(trace.clone()),
        }
    }

    pub fn run_trace(
        &self,
        kb: &KnowledgeBase,
        trace: &[TraceEntry],
        mode: Mode,
    ) -> Result<SimOutput, SimError> {
        self.policy.with_policy(|policy| {
            Simulation::new(&self.topology, kb)
                .with_policy(policy)
                .run(trace, mode, self.seed)
        })
    }

    pub fn run(&self, kb: &KnowledgeBase, mode: Mode) -> Result<SimOutput, ExperimentError> {
        let trace = self.trace(kb)?;
        Ok(self.run_trace(kb, &trace, mode)?)
    }

    /// Restricts the workload to its first `users` users.
    pub fn with_users(&self, users: u32) -> Scenario {
        let workload = match &self.workload {
            Workload::Synthetic(spec) => Workload::Synthetic(SyntheticSpec {
                users,
                ..spec.clone()
            }),
            Workload::Trace(trace) => {
                let keep: BTreeSet<u32> = trace
                    .iter()
                    .map(|e| e.user_id)
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .take(users as usize)
                    .collect();
                Workload::Trace(
                    trace
                        .iter()
                        .filter(|e| keep.contains(&e.user_id))
                        .cloned()
                        .collect(),
                )
            }
        };
        Scenario {
            workload,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    UserCount,
    CacheSize,
    CacheLocation,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::UserCount => "user-count",
            SweepVariable::CacheSize => "cache-size",
            SweepVariable::CacheLocation => "cache-location",
        })
    }
}

impl std::str::FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user-count" | "users" => Ok(SweepVariable::UserCount),
            "cache-size" => Ok(SweepVariable::CacheSize),
            "cache-location" | "location" => Ok(SweepVariable::CacheLocation),
            _ => Err(format!(
                "unknown sweep variable `{s}` (expected user-count, cache-size or cache-location)"
            )),
        }
    }
}

/// Sweep values; one variant per variable keeps them type-consistent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepPoints {
    UserCount(Vec<u32>),
    CacheSize(Vec<u64>),
    CacheLocation(Vec<CacheLocation>),
}

impl SweepPoints {
    pub fn variable(&self) -> SweepVariable {
        match self {
            SweepPoints::UserCount(_) => SweepVariable::UserCount,
            SweepPoints::CacheSize(_) => SweepVariable::CacheSize,
            SweepPoints::CacheLocation(_) => SweepVariable::CacheLocation,
        }
    }

    pub fn values(&self) -> Vec<SweepValue> {
        match self {
            SweepPoints::UserCount(v) => v.iter().map(|&u| SweepValue::Users(u)).collect(),
            SweepPoints::CacheSize(v) => v.iter().map(|&b| SweepValue::CacheBytes(b)).collect(),
            SweepPoints::CacheLocation(v) => v.iter().map(|&l| SweepValue::Location(l)).collect(),
        }
    }

    /// Default grid for each variable.
    pub fn default_for(variable: SweepVariable) -> Self {
        match variable {
            SweepVariable::UserCount => SweepPoints::UserCount(vec![1, 2, 5, 10, 20]),
            SweepVariable::CacheSize => {
                SweepPoints::CacheSize([5, 10, 20, 50, 100].iter().map(|m| m * MB).collect())
            }
            SweepVariable::CacheLocation => SweepPoints::CacheLocation(CacheLocation::ALL.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SweepValue {
    Users(u32),
    CacheBytes(u64),
    Location(CacheLocation),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Users(u) => write!(f, "{u}"),
            SweepValue::CacheBytes(b) => write!(f, "{b}"),
            SweepValue::Location(l) => write!(f, "{l}"),
        }
    }
}

impl SweepValue {
    pub fn apply(&self, base: &Scenario) -> Scenario {
        match *self {
            SweepValue::Users(u) => base.with_users(u),
            SweepValue::CacheBytes(bytes) => Scenario {
                topology: Topology {
                    cache_capacity: bytes,
                    ..base.topology.clone()
                },
                ..base.clone()
            },
            SweepValue::Location(location) => Scenario {
                topology: Topology {
                    cache_location: location,
                    ..base.topology.clone()
                },
                ..base.clone()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Scenario,
    pub points: SweepPoints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: SweepValue,
    pub mode: Mode,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub variable: SweepVariable,
    /// Ordered by sweep value as given, semantic before traditional.
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, value: SweepValue, mode: Mode) -> Option<&MetricsReport> {
        self.rows
            .iter()
            .find(|r| r.value == value && r.mode == mode)
            .map(|r| &r.report)
    }

    pub fn values(&self) -> Vec<SweepValue> {
        let mut out: Vec<SweepValue> = Vec::new();
        for row in &self.rows {
            if !out.contains(&row.value) {
                out.push(row.value);
            }
        }
        out
    }

    pub fn improvement_at(&self, value: SweepValue) -> Option<Improvement> {
        let sem = self.get(value, Mode::Semantic)?;
        let trad = self.get(value, Mode::Traditional)?;
        improvement(sem, trad).ok()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), ExperimentError> {
        let mut writer = csv::Writer::from_writer(sink);
        let mut header = vec!["variable", "value"];
        header.extend(MetricsReport::CSV_COLUMNS);
        writer.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![self.variable.to_string(), row.value.to_string()];
            record.extend(row.report.csv_values());
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Plain-text summary, one line per sweep value.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{:<16} {:>9} {:>9} {:>12} {:>12} {:>10} {:>10}\n",
            self.variable.to_string(),
            "hit(sem)",
            "hit(trad)",
            "lat(sem) ms",
            "lat(trad) ms",
            "hit +%",
            "lat -%"
        );
        for value in self.values() {
            let (Some(sem), Some(trad)) = (
                self.get(value, Mode::Semantic),
                self.get(value, Mode::Traditional),
            ) else {
                continue;
            };
            let imp = self.improvement_at(value);
            out.push_str(&format!(
                "{:<16} {:>9.4} {:>9.4} {:>12.2} {:>12.2} {:>10} {:>10}\n",
                value.to_string(),
                sem.hit_ratio,
                trad.hit_ratio,
                sem.mean_latency_ms,
                trad.mean_latency_ms,
                imp.map_or("-".into(), |i| format_pct(i.hit_ratio_increase_pct)),
                imp.map_or("-".into(), |i| format_pct(i.latency_decrease_pct)),
            ));
        }
        out
    }
}

/// Runs both modes at every sweep point, on identical traces.
///
/// Points run in parallel on the current rayon pool; the result order does
/// not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec, kb: &KnowledgeBase) -> Result<SweepTable, ExperimentError> {
    let values = spec.points.values();
    if values.is_empty() {
        return Err(ExperimentError::EmptySweep);
    }
    let jobs: Vec<(SweepValue, Mode)> = values
        .iter()
        .flat_map(|&v| [(v, Mode::Semantic), (v, Mode::Traditional)])
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(value, mode)| {
            let scenario = value.apply(&spec.base);
            scenario
                .run(kb, mode)
                .map(|out| SweepRow {
                    value,
                    mode,
                    report: out.report,
                })
                .map_err(|e| ExperimentError::Point {
                    point: format!("{}={value} ({mode})", spec.points.variable()),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable {
        variable: spec.points.variable(),
        rows,
    })
}

/// The pinned reference workload: a bundled 200-entity knowledge base and
/// 20 synthetic users over four cells.
pub mod reference {
    use super::*;
    use crate::workload::GapDistribution;

    pub const KB_TEXT: &str = include_str!("../data/reference_kb.txt");
    pub const SEED: u64 = 42;
    pub const USERS: u32 = 20;
    pub const CELLS: u32 = 4;
    pub const P_FOLLOW: f64 = 0.6;
    pub const CACHE_BYTES: u64 = 20 * MB;

    pub fn knowledge_base() -> KnowledgeBase {
        KnowledgeBase::from_text(KB_TEXT).expect("bundled knowledge base is valid")
    }

    pub fn workload() -> SyntheticSpec {
        SyntheticSpec {
            users: USERS,
            requests_min: 20,
            requests_max: 30,
            p_follow: P_FOLLOW,
            gap: GapDistribution::Uniform {
                min_ms: 5_000,
                max_ms: 30_000,
            },
            cells: CELLS,
            seed: SEED,
        }
    }

    pub fn topology() -> Topology {
        Topology {
            cells: CELLS,
            cache_location: CacheLocation::ENodeB,
            cache_capacity: CACHE_BYTES,
            ..Topology::default()
        }
    }

    pub fn scenario() -> Scenario {
        Scenario {
            topology: topology(),
            workload: Workload::Synthetic(workload()),
            policy: PolicyChoice::default(),
            seed: SEED,
        }
    }

    pub fn sweep(variable: SweepVariable) -> SweepSpec {
        SweepSpec {
            base: scenario(),
            points: SweepPoints::default_for(variable),
        }
    }
}
