//! Scenario files.
//!
//! A scenario is a TOML document; every key is optional.
//!
//! ```toml
//! seed = 42
//! mode = "both"                 # semantic | traditional | both
//! kb = "reference_kb.txt"       # relative paths resolve against this file
//! trace = "trace.csv"           # omit to synthesize from [workload]
//!
//! [topology]
//! cells = 4
//! cache_location = "enodeb"     # enodeb | sgw | pgw
//! cache_capacity_bytes = 20000000
//! replacement = "lru"           # lru | fifo
//! request_bytes = 250
//!
//! [links]
//! ue_enodeb = { delay_ms = 10.0, bandwidth_bytes_per_ms = 1250.0 }
//! enodeb_sgw = { delay_ms = 5.0, bandwidth_bytes_per_ms = 1250.0 }
//! sgw_pgw = { delay_ms = 5.0, bandwidth_bytes_per_ms = 1250.0 }
//! pgw_internet = { delay_ms = 20.0, bandwidth_bytes_per_ms = 1250.0 }
//!
//! [workload]
//! users = 20
//! requests_min = 20
//! requests_max = 30
//! p_follow = 0.6
//! gap_min_ms = 5000
//! gap_max_ms = 30000
//!
//! [policy]
//! kind = "relation"             # relation | null
//! max_prefetch = 3
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::cache::Replacement;
use crate::experiments::{reference, PolicyChoice, Scenario, Workload};
use crate::sim::{CacheLocation, LinkParams, Mode, Topology};
use crate::workload::{GapDistribution, SyntheticSpec};

pub const SEED_ENV: &str = "SEMCACHE_SEED";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    Semantic,
    Traditional,
    #[default]
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeSelection::Semantic => vec![Mode::Semantic],
            ModeSelection::Traditional => vec![Mode::Traditional],
            ModeSelection::Both => vec![Mode::Semantic, Mode::Traditional],
        }
    }
}

impl std::str::FromStr for ModeSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "semantic" => Ok(ModeSelection::Semantic),
            "traditional" => Ok(ModeSelection::Traditional),
            "both" => Ok(ModeSelection::Both),
            _ => Err(format!(
                "unknown mode `{s}` (expected semantic, traditional or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySection {
    pub cells: Option<u32>,
    pub cache_location: Option<CacheLocation>,
    pub cache_capacity_bytes: Option<u64>,
    pub replacement: Option<Replacement>,
    pub request_bytes: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinksSection {
    pub ue_enodeb: Option<LinkParams>,
    pub enodeb_sgw: Option<LinkParams>,
    pub sgw_pgw: Option<LinkParams>,
    pub pgw_internet: Option<LinkParams>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    pub users: Option<u32>,
    pub requests_min: Option<u32>,
    pub requests_max: Option<u32>,
    pub p_follow: Option<f64>,
    pub gap_min_ms: Option<u64>,
    pub gap_max_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub kind: Option<String>,
    pub max_prefetch: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: Option<u64>,
    pub mode: Option<ModeSelection>,
    pub kb: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub topology: TopologySection,
    pub links: LinksSection,
    pub workload: WorkloadSection,
    pub policy: PolicySection,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

/// Command-line values that win over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kb: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub mode: Option<ModeSelection>,
    pub cache_location: Option<CacheLocation>,
    pub cache_size: Option<u64>,
    pub seed: Option<u64>,
    pub p_follow: Option<f64>,
    pub users: Option<u32>,
}

/// A scenario with its inputs located but not yet loaded.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    /// `None` means the bundled reference knowledge base.
    pub kb_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
    pub modes: Vec<Mode>,
    /// Its workload is synthetic until the trace file is loaded.
    pub scenario: Scenario,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("scenario")
                .to_string();
            ConfigError::new(field, e.message().trim().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("scenario", format!("{}: {e}", path.display())))?;
        let mut file = Self::parse(&text)?;
        file.base_dir = path.parent().map(Path::to_path_buf);
        Ok(file)
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn resolve(&self, overrides: &Overrides) -> Result<ResolvedScenario, ConfigError> {
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| {
                ConfigError::new(
                    "seed",
                    format!("{SEED_ENV}=`{v}` is not an unsigned integer"),
                )
            })?),
            Err(_) => None,
        };
        let seed = overrides
            .seed
            .or(self.seed)
            .or(env_seed)
            .unwrap_or(DEFAULT_SEED);

        let base = Topology::default();
        let t = &self.topology;
        let l = &self.links;
        let topology = Topology {
            cells: t.cells.unwrap_or(reference::CELLS),
            ue_enodeb: l.ue_enodeb.unwrap_or(base.ue_enodeb),
            enodeb_sgw: l.enodeb_sgw.unwrap_or(base.enodeb_sgw),
            sgw_pgw: l.sgw_pgw.unwrap_or(base.sgw_pgw),
            pgw_internet: l.pgw_internet.unwrap_or(base.pgw_internet),
            cache_location: overrides
                .cache_location
                .or(t.cache_location)
                .unwrap_or(base.cache_location),
            cache_capacity: overrides
                .cache_size
                .or(t.cache_capacity_bytes)
                .unwrap_or(reference::CACHE_BYTES),
            replacement: t.replacement.unwrap_or_default(),
            request_bytes: t.request_bytes.unwrap_or(base.request_bytes),
        };
        if topology.cells == 0 {
            return Err(ConfigError::new("topology.cells", "must be at least 1"));
        }
        if topology.cache_capacity == 0 {
            return Err(ConfigError::new("cache_capacity_bytes", "must be positive"));
        }
        for (name, link) in [
            ("links.ue_enodeb", &topology.ue_enodeb),
            ("links.enodeb_sgw", &topology.enodeb_sgw),
            ("links.sgw_pgw", &topology.sgw_pgw),
            ("links.pgw_internet", &topology.pgw_internet),
        ] {
            if !(link.delay_ms.is_finite() && link.delay_ms >= 0.0) {
                return Err(ConfigError::new(
                    name,
                    "delay_ms must be finite and non-negative",
                ));
            }
            if link.bandwidth_bytes_per_ms.is_nan() || link.bandwidth_bytes_per_ms <= 0.0 {
                return Err(ConfigError::new(
                    name,
                    "bandwidth_bytes_per_ms must be positive",
                ));
            }
        }

        let w = &self.workload;
        let defaults = reference::workload();
        let gap_min = w.gap_min_ms.unwrap_or(5_000);
        let gap_max = w.gap_max_ms.unwrap_or(30_000.max(gap_min));
        let spec = SyntheticSpec {
            users: overrides.users.or(w.users).unwrap_or(defaults.users),
            requests_min: w.requests_min.unwrap_or(defaults.requests_min),
            requests_max: w.requests_max.unwrap_or(defaults.requests_max),
            p_follow: overrides
                .p_follow
                .or(w.p_follow)
                .unwrap_or(defaults.p_follow),
            gap: GapDistribution::from_range_ms(gap_min, gap_max),
            cells: topology.cells,
            seed,
        };
        if !(0.0..=1.0).contains(&spec.p_follow) {
            return Err(ConfigError::new("p_follow", "must lie in [0, 1]"));
        }
        if spec.requests_min > spec.requests_max {
            return Err(ConfigError::new(
                "workload.requests_min",
                "must not exceed workload.requests_max",
            ));
        }
        if gap_min > gap_max {
            return Err(ConfigError::new(
                "workload.gap_min_ms",
                "must not exceed workload.gap_max_ms",
            ));
        }

        let policy = match self.policy.kind.as_deref().unwrap_or("relation") {
            "relation" => PolicyChoice::Relation {
                max_prefetch: self.policy.max_prefetch,
            },
            "null" => PolicyChoice::Null,
            other => {
                return Err(ConfigError::new(
                    "policy.kind",
                    format!("unknown policy `{other}` (expected relation or null)"),
                ))
            }
        };

        let kb_path = overrides
            .kb
            .clone()
            .or_else(|| self.kb.as_deref().map(|p| self.resolve_path(p)));
        let trace_path = overrides
            .trace
            .clone()
            .or_else(|| self.trace.as_deref().map(|p| self.resolve_path(p)));
        if let Some(p) = &kb_path {
            if !p.is_file() {
                return Err(ConfigError::new(
                    "kb",
                    format!("{} does not exist", p.display()),
                ));
            }
        }
        if let Some(p) = &trace_path {
            if !p.is_file() {
                return Err(ConfigError::new(
                    "trace",
                    format!("{} does not exist", p.display()),
                ));
            }
        }

        Ok(ResolvedScenario {
            kb_path,
            trace_path,
            modes: overrides.mode.or(self.mode).unwrap_or_default().modes(),
            scenario: Scenario {
                topology,
                workload: Workload::Synthetic(spec),
                policy,
                seed,
            },
        })
    }
}
