// Byte-capacity LRU cache with prefetch accounting.

use semcache::cache::InsertOutcome;
use semcache::{Cache, CacheKey, Origin, SimTime};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut cache = Cache::new(300);
    let key = |s: &str| CacheKey::Iri(s.to_string());
    let t = SimTime::from_millis;

    cache.insert(key("A"), 100, Origin::Demand, t(1))?;
    cache.insert(key("B"), 100, Origin::Prefetch, t(2))?;
    cache.insert(key("C"), 100, Origin::Prefetch, t(3))?;
    println!(
        "lookup A: hit = {}",
        cache.lookup(&key("A"), t(4))?.is_hit()
    );
    println!(
        "lookup C: hit = {}",
        cache.lookup(&key("C"), t(4))?.is_hit()
    );
    if let InsertOutcome::Inserted { evicted } =
        cache.insert(key("D"), 100, Origin::Demand, t(5))?
    {
        println!("inserting D evicted {evicted:?}");
    }
    let order: Vec<String> = cache.eviction_order().map(|k| k.to_string()).collect();
    println!("eviction order now: {order:?}");

    let c = cache.counters();
    println!(
        "hits {}/{}; prefetched {} B, {} B of it used; useless ratio {:.2}",
        c.hits,
        c.lookups,
        c.prefetched_bytes,
        c.prefetched_bytes_hit,
        c.useless_prefetch_ratio()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
