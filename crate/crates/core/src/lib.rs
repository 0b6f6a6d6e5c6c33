//! Flow-level simulator for routing and traffic engineering over LEO
//! mega-constellations.
//!
//! The pipeline runs constellation geometry ([`orbital`]) into time-stamped
//! graphs ([`topology`]), routes city-to-city demands ([`traffic`]) with one
//! of four schedulers ([`routing`]) and summarizes realized throughput
//! ([`experiments`]).

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod orbital;
pub mod output;
pub mod routing;
pub mod scenario;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
pub use experiments::{
    compare_algorithms, path_delay_profile, throughput_cdf, CdfSeries, ComparisonTable,
    DelayProfile,
};
pub use orbital::{ConstellationSpec, SatElements, SatPosition, ShellSpec};
pub use routing::{Algorithm, FlowAssignment, LinkLoadMap, MfssState, Path};
pub use scenario::{Scenario, ScenarioConfig};
pub use topology::{Constellation, GroundStation, Link, NodeId, TopologySnapshot};
pub use traffic::{City, FlowDemand, ThroughputReport};
