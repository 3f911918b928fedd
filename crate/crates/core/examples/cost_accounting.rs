// What semantic caching costs: header bytes on every request and prefetched
// content nobody asked for, across a range of user predictability.

use semcache::experiments::{reference, Workload};
use semcache::sim::metadata_overhead;
use semcache::{MetadataCodec, Mode, SyntheticSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let kb = reference::knowledge_base();
    println!(
        "{:>8} {:>10} {:>14} {:>12} {:>14}",
        "p_follow", "hit ratio", "prefetched B", "useless", "meta B/user"
    );
    for p_follow in [0.0, 0.3, 0.6, 0.9, 1.0] {
        let mut scenario = reference::scenario();
        scenario.workload = Workload::Synthetic(SyntheticSpec {
            p_follow,
            ..reference::workload()
        });
        let trace = scenario.trace(&kb)?;
        let out = scenario.run_trace(&kb, &trace, Mode::Semantic)?;
        let overhead = metadata_overhead(&trace, &kb, &MetadataCodec::default())?;
        let r = &out.report;
        println!(
            "{p_follow:>8.1} {:>10.4} {:>14} {:>12.4} {:>14.1}",
            r.hit_ratio, r.prefetched_bytes, r.useless_prefetch_ratio, overhead.per_user_bytes
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
