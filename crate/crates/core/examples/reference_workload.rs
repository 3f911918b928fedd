// Run the bundled reference workload in both modes and compare them.

use semcache::experiments::reference;
use semcache::{improvement, Mode};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let kb = reference::knowledge_base();
    let scenario = reference::scenario();
    let trace = scenario.trace(&kb)?;
    println!("{} requests from {} users\n", trace.len(), reference::USERS);
    let sem = scenario.run_trace(&kb, &trace, Mode::Semantic)?;
    let trad = scenario.run_trace(&kb, &trace, Mode::Traditional)?;
    println!("{}\n\n{}\n", sem.report, trad.report);
    let imp = improvement(&sem.report, &trad.report)?;
    println!(
        "hit ratio +{:.1}%, mean latency -{:.1}%",
        imp.hit_ratio_increase_pct, imp.latency_decrease_pct
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
