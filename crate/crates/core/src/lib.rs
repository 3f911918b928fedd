//! Semantic in-network caching and prefetching for mobile networks.
//!
//! Requests carry a description of what they ask for in an IPv6 hop-by-hop
//! options header. A cache attached to the eNodeB, S-GW or P-GW reads that
//! metadata, serves the request if it can, and uses a knowledge base to
//! predict and prefetch what the user is likely to ask for next. The crate
//! simulates that framework next to plain identifier-keyed caching so the
//! two can be compared on identical traces.
//!
//! * [`codec`]: metadata records and the hop-by-hop header wire format
//! * [`kb`]: triple store and inference policies
//! * [`cache`]: byte-capacity LRU/FIFO cache with prefetch accounting
//! * [`workload`]: trace CSV and synthetic trace generation
//! * [`sim`]: discrete-event simulation of the mobile path
//! * [`metrics`]: run reports and semantic-over-traditional comparison
//! * [`experiments`]: scenarios, parameter sweeps and the reference workload
//! * [`cli`]: the `semcache` command line

pub mod cache;
pub mod cli;
pub mod codec;
pub mod config;
pub mod experiments;
pub mod kb;
pub mod metrics;
pub mod sim;
pub mod time;
pub mod workload;

pub use cache::{Cache, CacheKey, Origin, Replacement};
pub use codec::{
    decode_metadata, encode_metadata, wire_size, EntityKind, HopByHopHeader, MetadataCodec,
    MetadataDescriptor,
};
pub use experiments::{run_sweep, Scenario, SweepSpec, SweepVariable};
pub use kb::{infer_next, InferencePolicy, KnowledgeBase, NullPolicy, RelationRule};
pub use metrics::{improvement, Improvement, MetricsReport};
pub use sim::{run_simulation, CacheLocation, Mode, Simulation, Topology};
pub use time::SimTime;
pub use workload::{generate_trace, load_trace, SyntheticSpec, TraceEntry};
