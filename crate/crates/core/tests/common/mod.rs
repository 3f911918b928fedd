//! Shared helpers for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semcache::cache::{Cache, CacheKey, InsertOutcome, Origin, Replacement};
use semcache::SimTime;

/// Deliberately naive cache: a flat list scanned in full for every victim.
pub struct BruteForceCache {
    capacity: u64,
    policy: Replacement,
    // (key, size, inserted_at, last_access)
    entries: Vec<(CacheKey, u64, SimTime, SimTime)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefOutcome {
    Hit(bool),
    Inserted(Vec<CacheKey>),
    Refreshed,
    Rejected,
}

impl BruteForceCache {
    pub fn new(capacity: u64, policy: Replacement) -> Self {
        Self {
            capacity,
            policy,
            entries: Vec::new(),
        }
    }

    fn used(&self) -> u64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    fn rank(&self, e: &(CacheKey, u64, SimTime, SimTime)) -> (SimTime, SimTime, CacheKey) {
        match self.policy {
            Replacement::Lru => (e.3, e.2, e.0.clone()),
            Replacement::Fifo => (e.2, SimTime::ZERO, e.0.clone()),
        }
    }

    pub fn lookup(&mut self, key: &CacheKey, now: SimTime) -> bool {
        for e in &mut self.entries {
            if &e.0 == key {
                e.3 = now;
                return true;
            }
        }
        false
    }

    pub fn insert(&mut self, key: CacheKey, size: u64, now: SimTime) -> RefOutcome {
        if size > self.capacity {
            return RefOutcome::Rejected;
        }
        if let Some(i) = self.entries.iter().position(|e| e.0 == key) {
            if self.entries[i].1 == size {
                self.entries[i].3 = now;
                return RefOutcome::Refreshed;
            }
            self.entries.remove(i);
        }
        let mut evicted = Vec::new();
        while self.used() + size > self.capacity {
            let mut victim = 0;
            for i in 1..self.entries.len() {
                if self.rank(&self.entries[i]) < self.rank(&self.entries[victim]) {
                    victim = i;
                }
            }
            evicted.push(self.entries.remove(victim).0);
        }
        self.entries.push((key, size, now, now));
        RefOutcome::Inserted(evicted)
    }

    /// Resident keys, next victim first.
    pub fn order(&self) -> Vec<CacheKey> {
        let mut ranked: Vec<_> = self.entries.iter().map(|e| self.rank(e)).collect();
        ranked.sort();
        ranked.into_iter().map(|r| r.2).collect()
    }
}

/// Runs one random operation sequence against both caches and returns the
/// index of the first diverging operation, if any.
pub fn compare_with_reference(seed: u64, policy: Replacement, ops: usize) -> Option<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let capacity = rng.gen_range(20..200);
    let mut fast = Cache::with_policy(capacity, policy);
    let mut slow = BruteForceCache::new(capacity, policy);
    let mut now = 0u64;
    for i in 0..ops {
        // ties in time are common on purpose
        now += rng.gen_range(0..3);
        let t = SimTime::from_micros(now);
        let key = CacheKey::Iri(format!("k{}", rng.gen_range(0..12)));
        let (got, want) = if rng.gen_bool(0.5) {
            let hit = fast.lookup(&key, t).expect("time never regresses").is_hit();
            (RefOutcome::Hit(hit), RefOutcome::Hit(slow.lookup(&key, t)))
        } else {
            let size = rng.gen_range(1..=capacity + capacity / 4);
            let origin = if rng.gen_bool(0.5) {
                Origin::Demand
            } else {
                Origin::Prefetch
            };
            let got = match fast
                .insert(key.clone(), size, origin, t)
                .expect("valid insert")
            {
                InsertOutcome::Inserted { evicted } => RefOutcome::Inserted(evicted),
                InsertOutcome::Refreshed => RefOutcome::Refreshed,
                InsertOutcome::Rejected => RefOutcome::Rejected,
            };
            (got, slow.insert(key, size, t))
        };
        let order: Vec<CacheKey> = fast.eviction_order().cloned().collect();
        if got != want || order != slow.order() || fast.used() > capacity {
            return Some(i);
        }
    }
    None
}
