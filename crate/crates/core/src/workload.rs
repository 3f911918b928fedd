//! Request traces: loading, writing and synthesis.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{infer_next, KnowledgeBase};
use crate::time::SimTime;

pub const TRACE_HEADER: [&str; 4] = ["time_ms", "user_id", "cell_id", "entity_iri"];

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: negative time {time_ms}")]
    NegativeTime { line: u64, time_ms: f64 },
    #[error("knowledge base has no entities")]
    EmptyKnowledgeBase,
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub time: SimTime,
    pub user_id: u32,
    pub cell_id: u32,
    pub entity_iri: String,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    time_ms: String,
    user_id: String,
    cell_id: String,
    entity_iri: String,
}

fn parse_row(raw: RawRow, line: u64) -> Result<TraceEntry, WorkloadError> {
    let perr = |message: String| WorkloadError::Parse { line, message };
    let time_ms: f64 = raw
        .time_ms
        .trim()
        .parse()
        .map_err(|_| perr(format!("invalid time_ms `{}`", raw.time_ms)))?;
    if !time_ms.is_finite() {
        return Err(perr(format!("invalid time_ms `{}`", raw.time_ms)));
    }
    if time_ms < 0.0 {
        return Err(WorkloadError::NegativeTime { line, time_ms });
    }
    let user_id = raw
        .user_id
        .trim()
        .parse()
        .map_err(|_| perr(format!("invalid user_id `{}`", raw.user_id)))?;
    let cell_id = raw
        .cell_id
        .trim()
        .parse()
        .map_err(|_| perr(format!("invalid cell_id `{}`", raw.cell_id)))?;
    let entity_iri = raw.entity_iri.trim().to_string();
    if entity_iri.is_empty() {
        return Err(perr("empty entity_iri".into()));
    }
    Ok(TraceEntry {
        time: SimTime::from_millis_f64(time_ms),
        user_id,
        cell_id,
        entity_iri,
    })
}

/// Reads a trace CSV; the result is sorted by time, stable among ties.
pub fn load_trace<R: Read>(source: R) -> Result<Vec<TraceEntry>, WorkloadError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(WorkloadError::Parse {
            line: 1,
            message: format!("expected header `{}`", TRACE_HEADER.join(",")),
        });
    }
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            WorkloadError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw: RawRow = record
            .deserialize(Some(&headers))
            .map_err(|e| WorkloadError::Parse {
                line,
                message: e.to_string(),
            })?;
        entries.push(parse_row(raw, line)?);
    }
    entries.sort_by_key(|e| e.time);
    Ok(entries)
}

pub fn load_trace_file(
    path: impl AsRef<std::path::Path>,
) -> Result<Vec<TraceEntry>, WorkloadError> {
    load_trace(std::fs::File::open(path)?)
}

fn format_ms(t: SimTime) -> String {
    let us = t.as_micros();
    if us.is_multiple_of(1000) {
        (us / 1000).to_string()
    } else {
        format!("{}.{:03}", us / 1000, us % 1000)
    }
}

pub fn write_trace<W: Write>(sink: W, trace: &[TraceEntry]) -> Result<(), WorkloadError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(TRACE_HEADER)?;
    for e in trace {
        writer.write_record([
            format_ms(e.time),
            e.user_id.to_string(),
            e.cell_id.to_string(),
            e.entity_iri.clone(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Think time between two requests of the same user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GapDistribution {
    Fixed(SimTime),
    /// Uniform over whole milliseconds in `[min, max]`.
    Uniform {
        min_ms: u64,
        max_ms: u64,
    },
}

impl GapDistribution {
    pub fn from_range_ms(min_ms: u64, max_ms: u64) -> Self {
        if min_ms == max_ms {
            GapDistribution::Fixed(SimTime::from_millis(min_ms))
        } else {
            GapDistribution::Uniform { min_ms, max_ms }
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> SimTime {
        match *self {
            GapDistribution::Fixed(t) => t,
            GapDistribution::Uniform { min_ms, max_ms } => {
                SimTime::from_millis(rng.gen_range(min_ms..=max_ms))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub users: u32,
    pub requests_min: u32,
    pub requests_max: u32,
    /// Probability that a request follows from the previous one via inference.
    pub p_follow: f64,
    pub gap: GapDistribution,
    /// Users are assigned to cells round-robin.
    pub cells: u32,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: 20,
            requests_min: 20,
            requests_max: 30,
            p_follow: 0.6,
            gap: GapDistribution::Uniform {
                min_ms: 5_000,
                max_ms: 30_000,
            },
            cells: 1,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.requests_min > self.requests_max {
            return Err(WorkloadError::InvalidSpec(format!(
                "requests range [{}, {}] is not ordered",
                self.requests_min, self.requests_max
            )));
        }
        if !(0.0..=1.0).contains(&self.p_follow) {
            return Err(WorkloadError::InvalidSpec(format!(
                "p_follow {} is outside [0, 1]",
                self.p_follow
            )));
        }
        if self.cells == 0 {
            return Err(WorkloadError::InvalidSpec(
                "cells must be at least 1".into(),
            ));
        }
        if let GapDistribution::Uniform { min_ms, max_ms } = self.gap {
            if min_ms > max_ms {
                return Err(WorkloadError::InvalidSpec(format!(
                    "gap range [{min_ms}, {max_ms}] is not ordered"
                )));
            }
        }
        Ok(())
    }
}

/// Synthesizes a trace whose requests follow knowledge-base relations with
/// probability `p_follow`.
///
/// Users are generated one after another from a single seeded stream, so a
/// spec with more users extends the trace of a spec with fewer.
pub fn generate_trace(
    kb: &KnowledgeBase,
    spec: &SyntheticSpec,
) -> Result<Vec<TraceEntry>, WorkloadError> {
    spec.validate()?;
    if kb.is_empty() {
        return Err(WorkloadError::EmptyKnowledgeBase);
    }
    let entities: Vec<&str> = kb.entities().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trace = Vec::new();

    for user_id in 0..spec.users {
        let count = rng.gen_range(spec.requests_min..=spec.requests_max);
        let cell_id = user_id % spec.cells;
        let mut time = spec.gap.sample(&mut rng);
        let mut prev: Option<&str> = None;
        for _ in 0..count {
            let iri = match prev {
                Some(p) if rng.gen_bool(spec.p_follow) => {
                    let next = infer_next(kb, &kb.descriptor(p).expect("entity from kb"))
                        .expect("entity from kb");
                    if next.is_empty() {
                        entities[rng.gen_range(0..entities.len())]
                    } else {
                        let pick = &next[rng.gen_range(0..next.len())];
                        entities
                            .iter()
                            .copied()
                            .find(|e| *e == pick.entity_iri)
                            .expect("inferred entity is in kb")
                    }
                }
                _ => entities[rng.gen_range(0..entities.len())],
            };
            trace.push(TraceEntry {
                time,
                user_id,
                cell_id,
                entity_iri: iri.to_string(),
            });
            prev = Some(iri);
            time += spec.gap.sample(&mut rng);
        }
    }
    trace.sort_by_key(|e| e.time);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn chain_kb(n: usize) -> KnowledgeBase {
        let mut text = String::new();
        for i in 0..n {
            text.push_str(&format!(
                "p{i} type Person\np{i} size {}\np{i} spouse p{}\n",
                1000 + i,
                (i + 1) % n
            ));
        }
        KnowledgeBase::from_text(&text).unwrap()
    }

    #[test]
    fn loads_and_sorts() {
        let csv = "time_ms,user_id,cell_id,entity_iri\n# comment\n\
                   300,1,0,wiki/C\n100,0,0,wiki/A\n200,0,1,wiki/B\n";
        let trace = load_trace(csv.as_bytes()).unwrap();
        assert_eq!(trace.len(), 3);
        let iris: Vec<&str> = trace.iter().map(|e| e.entity_iri.as_str()).collect();
        assert_eq!(iris, ["wiki/A", "wiki/B", "wiki/C"]);
        assert_eq!(trace[0].time, SimTime::from_millis(100));
    }

    #[test]
    fn sort_is_stable_among_ties() {
        let csv = "time_ms,user_id,cell_id,entity_iri\n5,2,0,x2\n1,0,0,x0\n5,1,0,x1\n5,0,0,x3\n";
        let trace = load_trace(csv.as_bytes()).unwrap();
        // oracle: stable sort of (time, original index)
        let mut rows: Vec<(u64, usize, &str)> =
            vec![(5, 0, "x2"), (1, 1, "x0"), (5, 2, "x1"), (5, 3, "x3")];
        rows.sort_by_key(|r| (r.0, r.1));
        let expect: Vec<&str> = rows.iter().map(|r| r.2).collect();
        let got: Vec<&str> = trace.iter().map(|e| e.entity_iri.as_str()).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn negative_time_is_rejected() {
        let csv = "time_ms,user_id,cell_id,entity_iri\n10,0,0,a\n-5,0,0,b\n";
        match load_trace(csv.as_bytes()) {
            Err(WorkloadError::NegativeTime { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let csv = "time_ms,user_id,cell_id,entity_iri\n10,0,0,a\n10,zero,0,b\n";
        match load_trace(csv.as_bytes()) {
            Err(WorkloadError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let csv = "time_ms,user_id,cell_id,entity_iri\n10,0,0\n";
        assert!(matches!(
            load_trace(csv.as_bytes()),
            Err(WorkloadError::Parse { line: 2, .. })
        ));
        let csv = "when,who,where,what\n";
        assert!(matches!(
            load_trace(csv.as_bytes()),
            Err(WorkloadError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn write_then_load() {
        let kb = chain_kb(10);
        let spec = SyntheticSpec {
            users: 3,
            cells: 2,
            ..SyntheticSpec::default()
        };
        let trace = generate_trace(&kb, &spec).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        assert_eq!(load_trace(buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn request_counts_within_bounds() {
        let kb = chain_kb(50);
        let spec = SyntheticSpec {
            users: 5,
            ..SyntheticSpec::default()
        };
        let trace = generate_trace(&kb, &spec).unwrap();
        assert!((100..=150).contains(&trace.len()), "{}", trace.len());
        let mut per_user: BTreeMap<u32, usize> = BTreeMap::new();
        for e in &trace {
            *per_user.entry(e.user_id).or_default() += 1;
            assert!(kb.contains(&e.entity_iri));
        }
        assert_eq!(per_user.len(), 5);
        assert!(per_user.values().all(|&n| (20..=30).contains(&n)));
    }

    #[test]
    fn full_follow_walks_the_chain() {
        let kb = chain_kb(40);
        let spec = SyntheticSpec {
            users: 4,
            p_follow: 1.0,
            ..SyntheticSpec::default()
        };
        let trace = generate_trace(&kb, &spec).unwrap();
        for user in 0..4 {
            let reqs: Vec<&TraceEntry> = trace.iter().filter(|e| e.user_id == user).collect();
            for pair in reqs.windows(2) {
                let prev = kb.descriptor(&pair[0].entity_iri).unwrap();
                let next = infer_next(&kb, &prev).unwrap();
                assert_eq!(next.len(), 1);
                assert_eq!(next[0].entity_iri, pair[1].entity_iri);
            }
        }
    }

    #[test]
    fn zero_follow_is_chance_level() {
        // chance that a uniform draw over n entities hits the one successor is 1/n
        let n = 20;
        let kb = chain_kb(n);
        let spec = SyntheticSpec {
            users: 400,
            requests_min: 25,
            requests_max: 25,
            p_follow: 0.0,
            ..SyntheticSpec::default()
        };
        let trace = generate_trace(&kb, &spec).unwrap();
        let mut pairs = 0usize;
        let mut follows = 0usize;
        for user in 0..spec.users {
            let reqs: Vec<&TraceEntry> = trace.iter().filter(|e| e.user_id == user).collect();
            for w in reqs.windows(2) {
                pairs += 1;
                let succ = &kb.objects(&w[0].entity_iri, crate::kb::Predicate::Spouse)[0];
                if *succ == w[1].entity_iri {
                    follows += 1;
                }
            }
        }
        assert_eq!(pairs, 400 * 24);
        let p = 1.0 / n as f64;
        let observed = follows as f64 / pairs as f64;
        let sd = (p * (1.0 - p) / pairs as f64).sqrt();
        assert!(
            (observed - p).abs() < 4.0 * sd,
            "observed {observed}, chance {p}"
        );
    }

    #[test]
    fn deterministic_under_seed() {
        let kb = chain_kb(30);
        let spec = SyntheticSpec::default();
        assert_eq!(
            generate_trace(&kb, &spec).unwrap(),
            generate_trace(&kb, &spec).unwrap()
        );
        let other = SyntheticSpec {
            seed: 7,
            ..spec.clone()
        };
        assert_ne!(
            generate_trace(&kb, &spec).unwrap(),
            generate_trace(&kb, &other).unwrap()
        );
    }

    #[test]
    fn more_users_extend_the_trace() {
        let kb = chain_kb(30);
        let small = SyntheticSpec {
            users: 2,
            ..SyntheticSpec::default()
        };
        let big = SyntheticSpec {
            users: 5,
            ..SyntheticSpec::default()
        };
        let a = generate_trace(&kb, &small).unwrap();
        let b: Vec<TraceEntry> = generate_trace(&kb, &big)
            .unwrap()
            .into_iter()
            .filter(|e| e.user_id < 2)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_specs() {
        let kb = chain_kb(3);
        let bad = [
            SyntheticSpec {
                p_follow: 1.5,
                ..SyntheticSpec::default()
            },
            SyntheticSpec {
                requests_min: 31,
                ..SyntheticSpec::default()
            },
            SyntheticSpec {
                cells: 0,
                ..SyntheticSpec::default()
            },
        ];
        for spec in bad {
            assert!(matches!(
                generate_trace(&kb, &spec),
                Err(WorkloadError::InvalidSpec(_))
            ));
        }
        assert!(matches!(
            generate_trace(&KnowledgeBase::default(), &SyntheticSpec::default()),
            Err(WorkloadError::EmptyKnowledgeBase)
        ));
    }

    #[test]
    fn round_robin_cells() {
        let kb = chain_kb(10);
        let spec = SyntheticSpec {
            users: 6,
            cells: 4,
            ..SyntheticSpec::default()
        };
        for e in generate_trace(&kb, &spec).unwrap() {
            assert_eq!(e.cell_id, e.user_id % 4);
        }
    }
}
