#[allow(dead_code)]
mod codec_roundtrip {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/codec_roundtrip.rs"
    ));
}

#[test]
fn codec_roundtrip_runs() {
    codec_roundtrip::run_example().expect("codec_roundtrip example runs");
}

#[allow(dead_code)]
mod knowledge_inference {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/knowledge_inference.rs"
    ));
}

#[test]
fn knowledge_inference_runs() {
    knowledge_inference::run_example().expect("knowledge_inference example runs");
}

#[allow(dead_code)]
mod lru_cache {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/lru_cache.rs"
    ));
}

#[test]
fn lru_cache_runs() {
    lru_cache::run_example().expect("lru_cache example runs");
}

#[allow(dead_code)]
mod prefetch_replay {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/prefetch_replay.rs"
    ));
}

#[test]
fn prefetch_replay_runs() {
    prefetch_replay::run_example().expect("prefetch_replay example runs");
}

#[allow(dead_code)]
mod reference_workload {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/reference_workload.rs"
    ));
}

#[test]
fn reference_workload_runs() {
    reference_workload::run_example().expect("reference_workload example runs");
}

#[allow(dead_code)]
mod cache_size_sweep {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/cache_size_sweep.rs"
    ));
}

#[test]
fn cache_size_sweep_runs() {
    cache_size_sweep::run_example().expect("cache_size_sweep example runs");
}

#[allow(dead_code)]
mod cache_location_sweep {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/cache_location_sweep.rs"
    ));
}

#[test]
fn cache_location_sweep_runs() {
    cache_location_sweep::run_example().expect("cache_location_sweep example runs");
}

#[allow(dead_code)]
mod cost_accounting {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/cost_accounting.rs"
    ));
}

#[test]
fn cost_accounting_runs() {
    cost_accounting::run_example().expect("cost_accounting example runs");
}
