mod common;

use proptest::prelude::*;
use semcache::cache::{Cache, CacheKey, Origin, Replacement};
use semcache::SimTime;

#[test]
fn lru_matches_brute_force() {
    for seed in 0..1000 {
        assert_eq!(
            common::compare_with_reference(seed, Replacement::Lru, 150),
            None,
            "seed {seed}"
        );
    }
}

#[test]
fn fifo_matches_brute_force() {
    for seed in 0..300 {
        assert_eq!(
            common::compare_with_reference(seed, Replacement::Fifo, 150),
            None,
            "seed {seed}"
        );
    }
}

proptest! {
    #[test]
    fn never_exceeds_capacity(
        capacity in 1u64..500,
        ops in prop::collection::vec((0u8..20, 1u64..600, any::<bool>()), 1..200),
    ) {
        let mut cache = Cache::new(capacity);
        for (i, (k, size, lookup)) in ops.into_iter().enumerate() {
            let key = CacheKey::Iri(format!("k{k}"));
            let now = SimTime::from_micros(i as u64);
            if lookup {
                cache.lookup(&key, now).unwrap();
            } else {
                cache.insert(key, size, Origin::Demand, now).unwrap();
            }
            prop_assert!(cache.used() <= capacity);
            let resident: u64 = cache.eviction_order().map(|k| cache.peek(k).unwrap().size).sum();
            prop_assert_eq!(resident, cache.used());
            prop_assert_eq!(cache.eviction_order().count(), cache.len());
        }
    }

    #[test]
    fn useless_bytes_never_exceed_prefetched(
        ops in prop::collection::vec((0u8..10, 1u64..100, any::<bool>(), any::<bool>()), 1..200),
    ) {
        let mut cache = Cache::new(300);
        for (i, (k, size, lookup, prefetch)) in ops.into_iter().enumerate() {
            let key = CacheKey::Iri(format!("k{k}"));
            let now = SimTime::from_micros(i as u64);
            if lookup {
                cache.lookup(&key, now).unwrap();
            } else {
                let origin = if prefetch { Origin::Prefetch } else { Origin::Demand };
                cache.insert(key, size, origin, now).unwrap();
            }
            let c = cache.counters();
            prop_assert!(c.prefetched_bytes_hit <= c.prefetched_bytes);
            prop_assert!(c.hits <= c.lookups);
            let r = c.useless_prefetch_ratio();
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
