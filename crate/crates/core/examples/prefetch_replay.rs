// Two requests from one user: a person, then that person's spouse. With
// semantic caching the spouse is prefetched to the eNodeB while the first
// response is still on its way.

use semcache::sim::EventKind;
use semcache::workload::TraceEntry;
use semcache::{KnowledgeBase, Mode, SimTime, Simulation, Topology};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let kb = KnowledgeBase::from_text(
        "wiki/A type Person\nwiki/A size 50000\nwiki/B type Person\nwiki/B size 25000\n\
         wiki/A spouse wiki/B\n",
    )?;
    let topo = Topology::default();
    let trace = vec![
        TraceEntry {
            time: SimTime::ZERO,
            user_id: 0,
            cell_id: 0,
            entity_iri: "wiki/A".into(),
        },
        TraceEntry {
            time: SimTime::from_millis(10_000),
            user_id: 0,
            cell_id: 0,
            entity_iri: "wiki/B".into(),
        },
    ];
    for mode in [Mode::Semantic, Mode::Traditional] {
        let out = Simulation::new(&topo, &kb)
            .record_events(true)
            .run(&trace, mode, 0)?;
        println!("{mode}:");
        for e in out
            .events
            .iter()
            .filter(|e| !matches!(e.kind, EventKind::CacheDecision { .. }))
        {
            println!(
                "  {:>12}  {:<18} {}",
                e.time.to_string(),
                format!("{:?}", e.kind),
                e.entity_iri
            );
        }
        for r in &out.records {
            println!(
                "  {} served from {:?} in {}",
                r.descriptor.entity_iri,
                r.served_from,
                r.latency()
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
