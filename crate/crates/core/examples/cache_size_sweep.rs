// Hit ratio and latency as the eNodeB cache grows.

use semcache::experiments::reference;
use semcache::{run_sweep, SweepVariable};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let kb = reference::knowledge_base();
    let table = run_sweep(&reference::sweep(SweepVariable::CacheSize), &kb)?;
    print!("{}", table.summary());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
