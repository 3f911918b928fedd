//! Byte-capacity content cache with a metadata map and origin tracking.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CacheError {
    #[error("time went backwards: {now} is earlier than {last}")]
    TimeRegression { now: SimTime, last: SimTime },
    #[error("entry size must be positive")]
    ZeroSize,
}

/// Key in the metadata map.
///
/// Semantic caches key on canonical metadata records, traditional caches on
/// the bare IRI.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CacheKey {
    Metadata(Vec<u8>),
    Iri(String),
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CacheKey::Metadata(bytes) => write!(f, "meta:{}", hex::encode(bytes)),
            CacheKey::Iri(iri) => write!(f, "iri:{iri}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Demand,
    Prefetch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Replacement {
    #[default]
    Lru,
    Fifo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub size: u64,
    pub origin: Origin,
    pub inserted_at: SimTime,
    pub last_access: SimTime,
    pub hit_count: u64,
    // set while a prefetched entry has not yet served anyone
    unclaimed_prefetch: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheCounters {
    pub lookups: u64,
    pub hits: u64,
    pub demand_insertions: u64,
    pub prefetch_insertions: u64,
    pub evictions: u64,
    pub rejections: u64,
    pub prefetched_bytes: u64,
    pub prefetched_bytes_hit: u64,
}

impl CacheCounters {
    pub fn merge(&mut self, other: &CacheCounters) {
        self.lookups += other.lookups;
        self.hits += other.hits;
        self.demand_insertions += other.demand_insertions;
        self.prefetch_insertions += other.prefetch_insertions;
        self.evictions += other.evictions;
        self.rejections += other.rejections;
        self.prefetched_bytes += other.prefetched_bytes;
        self.prefetched_bytes_hit += other.prefetched_bytes_hit;
    }

    pub fn hit_ratio(&self) -> f64 {
        if self.lookups == 0 {
            0.0
        } else {
            self.hits as f64 / self.lookups as f64
        }
    }

    /// Share of prefetched bytes that never served a request.
    pub fn useless_prefetch_ratio(&self) -> f64 {
        if self.prefetched_bytes == 0 {
            0.0
        } else {
            (self.prefetched_bytes - self.prefetched_bytes_hit) as f64
                / self.prefetched_bytes as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CacheStats {
    pub counters: CacheCounters,
    pub capacity: u64,
    pub used: u64,
    pub entries: usize,
    pub hit_ratio: f64,
    pub useless_prefetch_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lookup<'a> {
    Hit(&'a CacheEntry),
    Miss,
}

impl Lookup<'_> {
    pub fn is_hit(&self) -> bool {
        matches!(self, Lookup::Hit(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Stored; lists the keys evicted to make room, oldest first.
    Inserted { evicted: Vec<CacheKey> },
    /// The key was already resident; recency and origin were refreshed.
    Refreshed,
    /// Larger than the whole cache.
    Rejected,
}

type OrderKey = (SimTime, SimTime, CacheKey);

#[derive(Debug, Clone)]
pub struct Cache {
    capacity: u64,
    used: u64,
    policy: Replacement,
    entries: HashMap<CacheKey, CacheEntry>,
    order: BTreeSet<OrderKey>,
    counters: CacheCounters,
    clock: SimTime,
}

impl Cache {
    pub fn new(capacity: u64) -> Self {
        Self::with_policy(capacity, Replacement::Lru)
    }

    pub fn with_policy(capacity: u64, policy: Replacement) -> Self {
        Self {
            capacity,
            used: 0,
            policy,
            entries: HashMap::new(),
            order: BTreeSet::new(),
            counters: CacheCounters::default(),
            clock: SimTime::ZERO,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn policy(&self) -> Replacement {
        self.policy
    }

    pub fn counters(&self) -> &CacheCounters {
        &self.counters
    }

    /// Residency check that leaves counters and recency alone.
    pub fn contains(&self, key: &CacheKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn peek(&self, key: &CacheKey) -> Option<&CacheEntry> {
        self.entries.get(key)
    }

    /// Resident keys in eviction order (next victim first).
    pub fn eviction_order(&self) -> impl Iterator<Item = &CacheKey> {
        self.order.iter().map(|(_, _, k)| k)
    }

    fn order_key(&self, entry: &CacheEntry) -> OrderKey {
        match self.policy {
            Replacement::Lru => (entry.last_access, entry.inserted_at, entry.key.clone()),
            Replacement::Fifo => (entry.inserted_at, SimTime::ZERO, entry.key.clone()),
        }
    }

    fn advance(&mut self, now: SimTime) -> Result<(), CacheError> {
        if now < self.clock {
            return Err(CacheError::TimeRegression {
                now,
                last: self.clock,
            });
        }
        self.clock = now;
        Ok(())
    }

    fn touch(&mut self, key: &CacheKey, now: SimTime, as_lookup: bool) -> bool {
        let Some(entry) = self.entries.get(key) else {
            return false;
        };
        let old = self.order_key(entry);
        self.order.remove(&old);
        let entry = self.entries.get_mut(key).expect("entry present");
        entry.last_access = now;
        if as_lookup {
            entry.hit_count += 1;
        }
        if entry.unclaimed_prefetch {
            entry.unclaimed_prefetch = false;
            self.counters.prefetched_bytes_hit += entry.size;
        }
        let new = self.order_key(&self.entries[key]);
        self.order.insert(new);
        true
    }

    pub fn lookup(&mut self, key: &CacheKey, now: SimTime) -> Result<Lookup<'_>, CacheError> {
        self.advance(now)?;
        self.counters.lookups += 1;
        if self.touch(key, now, true) {
            self.counters.hits += 1;
            Ok(Lookup::Hit(&self.entries[key]))
        } else {
            Ok(Lookup::Miss)
        }
    }

    /// Hands a resident entry to a request that was waiting on its fetch.
    ///
    /// Refreshes recency and credits a pending prefetch as used, but is not
    /// a lookup and does not count as a hit. Returns false if not resident.
    pub fn claim(&mut self, key: &CacheKey, now: SimTime) -> Result<bool, CacheError> {
        self.advance(now)?;
        Ok(self.touch(key, now, false))
    }

    fn remove(&mut self, key: &CacheKey) -> Option<CacheEntry> {
        let entry = self.entries.remove(key)?;
        let ok = self.order_key(&entry);
        self.order.remove(&ok);
        self.used -= entry.size;
        Some(entry)
    }

    pub fn insert(
        &mut self,
        key: CacheKey,
        size: u64,
        origin: Origin,
        now: SimTime,
    ) -> Result<InsertOutcome, CacheError> {
        if size == 0 {
            return Err(CacheError::ZeroSize);
        }
        self.advance(now)?;
        if size > self.capacity {
            self.counters.rejections += 1;
            return Ok(InsertOutcome::Rejected);
        }

        if let Some(entry) = self.entries.get(&key) {
            if entry.size == size {
                let old = self.order_key(entry);
                self.order.remove(&old);
                let entry = self.entries.get_mut(&key).expect("entry present");
                entry.last_access = now;
                entry.origin = origin;
                let new = self.order_key(&self.entries[&key]);
                self.order.insert(new);
                return Ok(InsertOutcome::Refreshed);
            }
            // Content changed size: replace it.
            self.remove(&key);
        }

        let mut evicted = Vec::new();
        while self.used + size > self.capacity {
            let victim = self
                .order
                .first()
                .map(|(_, _, k)| k.clone())
                .expect("used > 0 implies a resident entry");
            self.remove(&victim);
            self.counters.evictions += 1;
            evicted.push(victim);
        }

        match origin {
            Origin::Demand => self.counters.demand_insertions += 1,
            Origin::Prefetch => {
                self.counters.prefetch_insertions += 1;
                self.counters.prefetched_bytes += size;
            }
        }
        let entry = CacheEntry {
            key: key.clone(),
            size,
            origin,
            inserted_at: now,
            last_access: now,
            hit_count: 0,
            unclaimed_prefetch: origin == Origin::Prefetch,
        };
        self.order.insert(self.order_key(&entry));
        self.entries.insert(key, entry);
        self.used += size;
        Ok(InsertOutcome::Inserted { evicted })
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            counters: self.counters,
            capacity: self.capacity,
            used: self.used,
            entries: self.entries.len(),
            hit_ratio: self.counters.hit_ratio(),
            useless_prefetch_ratio: self.counters.useless_prefetch_ratio(),
        }
    }
}
