// The same workload with the cache at the eNodeB, S-GW or P-GW. eNodeB
// caches are per cell; the gateways hold one cache shared by every cell.

use semcache::experiments::{reference, SweepPoints, SweepSpec};
use semcache::{run_sweep, CacheLocation};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let kb = reference::knowledge_base();
    let spec = SweepSpec {
        base: reference::scenario(),
        points: SweepPoints::CacheLocation(CacheLocation::ALL.to_vec()),
    };
    let table = run_sweep(&spec, &kb)?;
    print!("{}", table.summary());
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    println!(
        "\n{}",
        String::from_utf8(csv)?.lines().next().unwrap_or_default()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
