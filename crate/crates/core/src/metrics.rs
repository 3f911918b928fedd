//! Per-run metrics and Semantic-vs-Traditional comparison.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{CacheLocation, Mode};

/// Parameters that identify a scenario independent of the caching mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioParams {
    pub users: u32,
    pub cells: u32,
    pub cache_location: CacheLocation,
    pub cache_capacity_bytes: u64,
    pub seed: u64,
    pub requests_total: u64,
}

/// Outcome of one simulation run. Flat so it maps onto one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: Mode,
    pub policy: String,
    pub users: u32,
    pub cells: u32,
    pub cache_location: CacheLocation,
    pub cache_capacity_bytes: u64,
    pub seed: u64,
    pub requests_total: u64,
    pub hits: u64,
    pub hit_ratio: f64,
    pub mean_latency_ms: f64,
    pub prefetched_bytes: u64,
    pub prefetched_bytes_hit: u64,
    /// Unused prefetched bytes over all prefetched bytes.
    pub useless_prefetch_ratio: f64,
    /// Unused prefetched bytes over all content bytes pulled from the origin.
    pub useless_prefetch_origin_ratio: f64,
    pub origin_bytes: u64,
    pub delivered_bytes: u64,
    pub metadata_overhead_bytes: u64,
    pub metadata_overhead_per_user_bytes: f64,
}

impl MetricsReport {
    pub fn scenario(&self) -> ScenarioParams {
        ScenarioParams {
            users: self.users,
            cells: self.cells,
            cache_location: self.cache_location,
            cache_capacity_bytes: self.cache_capacity_bytes,
            seed: self.seed,
            requests_total: self.requests_total,
        }
    }

    pub const CSV_COLUMNS: [&'static str; 19] = [
        "mode",
        "policy",
        "users",
        "cells",
        "cache_location",
        "cache_capacity_bytes",
        "seed",
        "requests_total",
        "hits",
        "hit_ratio",
        "mean_latency_ms",
        "prefetched_bytes",
        "prefetched_bytes_hit",
        "useless_prefetch_ratio",
        "useless_prefetch_origin_ratio",
        "origin_bytes",
        "delivered_bytes",
        "metadata_overhead_bytes",
        "metadata_overhead_per_user_bytes",
    ];

    /// Values in `CSV_COLUMNS` order.
    pub fn csv_values(&self) -> Vec<String> {
        vec![
            self.mode.to_string(),
            self.policy.clone(),
            self.users.to_string(),
            self.cells.to_string(),
            self.cache_location.to_string(),
            self.cache_capacity_bytes.to_string(),
            self.seed.to_string(),
            self.requests_total.to_string(),
            self.hits.to_string(),
            self.hit_ratio.to_string(),
            self.mean_latency_ms.to_string(),
            self.prefetched_bytes.to_string(),
            self.prefetched_bytes_hit.to_string(),
            self.useless_prefetch_ratio.to_string(),
            self.useless_prefetch_origin_ratio.to_string(),
            self.origin_bytes.to_string(),
            self.delivered_bytes.to_string(),
            self.metadata_overhead_bytes.to_string(),
            self.metadata_overhead_per_user_bytes.to_string(),
        ]
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} caching at {} ({} users, {} cells, {} B cache, policy {})",
            self.mode,
            self.cache_location,
            self.users,
            self.cells,
            self.cache_capacity_bytes,
            self.policy
        )?;
        writeln!(
            f,
            "  requests {:>6}   hits {:>6}   hit ratio {:.4}",
            self.requests_total, self.hits, self.hit_ratio
        )?;
        writeln!(f, "  mean latency      {:.3} ms", self.mean_latency_ms)?;
        writeln!(
            f,
            "  prefetched        {} B ({} B used, useless ratio {:.4})",
            self.prefetched_bytes, self.prefetched_bytes_hit, self.useless_prefetch_ratio
        )?;
        write!(
            f,
            "  metadata overhead {} B ({:.1} B per user)",
            self.metadata_overhead_bytes, self.metadata_overhead_per_user_bytes
        )
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("reports describe different scenarios: {left:?} vs {right:?}")]
pub struct ScenarioMismatch {
    pub left: ScenarioParams,
    pub right: ScenarioParams,
}

/// Relative gain of semantic over traditional caching, in percent.
///
/// `hit_ratio_increase_pct` is `f64::INFINITY` when the traditional hit ratio
/// is zero and the semantic one is not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Improvement {
    pub hit_ratio_increase_pct: f64,
    pub latency_decrease_pct: f64,
}

fn relative_pct(delta: f64, base: f64) -> f64 {
    if base == 0.0 {
        if delta == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(delta)
        }
    } else {
        100.0 * delta / base
    }
}

pub fn improvement(
    semantic: &MetricsReport,
    traditional: &MetricsReport,
) -> Result<Improvement, ScenarioMismatch> {
    let (left, right) = (semantic.scenario(), traditional.scenario());
    if left != right {
        return Err(ScenarioMismatch { left, right });
    }
    Ok(Improvement {
        hit_ratio_increase_pct: relative_pct(
            semantic.hit_ratio - traditional.hit_ratio,
            traditional.hit_ratio,
        ),
        latency_decrease_pct: relative_pct(
            traditional.mean_latency_ms - semantic.mean_latency_ms,
            traditional.mean_latency_ms,
        ),
    })
}

pub fn format_pct(value: f64) -> String {
    if value.is_infinite() {
        if value > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{value:.2}")
    }
}

#[cfg(test)]
pub(crate) fn sample_report(mode: Mode, hit_ratio: f64, latency: f64) -> MetricsReport {
    MetricsReport {
        mode,
        policy: "relation".into(),
        users: 1,
        cells: 1,
        cache_location: CacheLocation::ENodeB,
        cache_capacity_bytes: 1000,
        seed: 42,
        requests_total: 100,
        hits: (hit_ratio * 100.0).round() as u64,
        hit_ratio,
        mean_latency_ms: latency,
        prefetched_bytes: 0,
        prefetched_bytes_hit: 0,
        useless_prefetch_ratio: 0.0,
        useless_prefetch_origin_ratio: 0.0,
        origin_bytes: 0,
        delivered_bytes: 0,
        metadata_overhead_bytes: 0,
        metadata_overhead_per_user_bytes: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_increase_in_percent() {
        let sem = sample_report(Mode::Semantic, 0.50, 80.0);
        let trad = sample_report(Mode::Traditional, 0.22, 100.0);
        let imp = improvement(&sem, &trad).unwrap();
        // 100 * (0.50 - 0.22) / 0.22
        let oracle = 100.0 * 0.28 / 0.22;
        assert!((imp.hit_ratio_increase_pct - oracle).abs() < 1e-9);
        assert!((imp.hit_ratio_increase_pct - 127.27).abs() < 0.01);
        assert!((imp.latency_decrease_pct - 20.0).abs() < 1e-9);
    }

    #[test]
    fn equal_reports_give_zero() {
        let sem = sample_report(Mode::Semantic, 0.3, 50.0);
        let trad = sample_report(Mode::Traditional, 0.3, 50.0);
        let imp = improvement(&sem, &trad).unwrap();
        assert_eq!(imp.hit_ratio_increase_pct, 0.0);
        assert_eq!(imp.latency_decrease_pct, 0.0);
    }

    #[test]
    fn zero_baseline_is_infinite() {
        let sem = sample_report(Mode::Semantic, 0.4, 50.0);
        let trad = sample_report(Mode::Traditional, 0.0, 60.0);
        let imp = improvement(&sem, &trad).unwrap();
        assert!(imp.hit_ratio_increase_pct.is_infinite());
        assert_eq!(format_pct(imp.hit_ratio_increase_pct), "inf");
        let both_zero = improvement(&sample_report(Mode::Semantic, 0.0, 1.0), &trad).unwrap();
        assert_eq!(both_zero.hit_ratio_increase_pct, 0.0);
    }

    #[test]
    fn mismatched_scenarios_are_refused() {
        let sem = sample_report(Mode::Semantic, 0.4, 50.0);
        let mut trad = sample_report(Mode::Traditional, 0.2, 60.0);
        trad.cache_capacity_bytes = 2000;
        assert!(improvement(&sem, &trad).is_err());
    }
}
