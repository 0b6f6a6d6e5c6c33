//! Path computation and flow scheduling over a [`TopologySnapshot`].

mod b4;
mod elb;
mod mfss;
mod paths;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{LinkId, NodeId, NodeIx, TopologySnapshot};
use crate::traffic::FlowDemand;

pub use b4::{b4_allocate, b4_assign, B4Allocation, B4Flow, B4Params};
pub use elb::{elb_assign, ElbParams};
pub use mfss::{detect_congestion, mfss_assign, MfssParams, MfssState, Plane};
pub use paths::{equivalent_paths, k_shortest_paths, shortest_path};

/// A link traversed in one direction. `forward` means from the lower node
/// index to the higher one. Capacities apply per direction (full duplex).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DirLink {
    pub link: LinkId,
    pub forward: bool,
}

impl DirLink {
    pub fn between(snap: &TopologySnapshot, u: NodeIx, v: NodeIx) -> Option<DirLink> {
        let link = snap.link_between(u, v)?;
        Some(DirLink {
            link,
            forward: snap.link_ends(link).0 == u,
        })
    }

    pub fn capacity(&self, snap: &TopologySnapshot) -> f64 {
        snap.link(self.link).capacity
    }
}

/// Loopless path through a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub nodes: Vec<NodeIx>,
    #[serde(skip)]
    pub hops: Vec<DirLink>,
    pub total_delay_ms: f64,
    pub bottleneck_capacity: f64,
}

impl Path {
    /// Validates adjacency and looplessness and sums delays in path order.
    pub fn from_nodes(snap: &TopologySnapshot, nodes: Vec<NodeIx>) -> Result<Path> {
        if nodes.len() < 2 {
            return Err(Error::InvalidTopology(
                "a path needs at least two nodes".into(),
            ));
        }
        let mut seen = std::collections::HashSet::with_capacity(nodes.len());
        if !nodes.iter().all(|n| seen.insert(*n)) {
            return Err(Error::InvalidTopology("path repeats a node".into()));
        }
        let mut hops = Vec::with_capacity(nodes.len() - 1);
        let mut delay = 0.0;
        let mut bottleneck = f64::INFINITY;
        for w in nodes.windows(2) {
            let hop = DirLink::between(snap, w[0], w[1]).ok_or_else(|| {
                Error::InvalidTopology(format!(
                    "no link between {} and {}",
                    snap.node(w[0]),
                    snap.node(w[1])
                ))
            })?;
            let link = snap.link(hop.link);
            delay += link.delay_ms;
            bottleneck = bottleneck.min(link.capacity);
            hops.push(hop);
        }
        Ok(Path {
            nodes,
            hops,
            total_delay_ms: delay,
            bottleneck_capacity: bottleneck,
        })
    }

    pub fn node_ids(&self, snap: &TopologySnapshot) -> Vec<NodeId> {
        self.nodes.iter().map(|&n| snap.node(n)).collect()
    }

    pub fn hop_count(&self) -> usize {
        self.hops.len()
    }
}

/// Offered load per directed link, in capacity units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkLoadMap {
    loads: BTreeMap<DirLink, f64>,
}

impl LinkLoadMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, link: DirLink, amount: f64) {
        debug_assert!(amount >= 0.0);
        *self.loads.entry(link).or_insert(0.0) += amount;
    }

    pub fn add_path(&mut self, path: &Path, rate: f64) {
        for hop in &path.hops {
            self.add(*hop, rate);
        }
    }

    pub fn load(&self, link: DirLink) -> f64 {
        self.loads.get(&link).copied().unwrap_or(0.0)
    }

    pub fn utilization(&self, snap: &TopologySnapshot, link: DirLink) -> f64 {
        self.load(link) / link.capacity(snap)
    }

    pub fn iter(&self) -> impl Iterator<Item = (DirLink, f64)> + '_ {
        self.loads.iter().map(|(k, v)| (*k, *v))
    }

    /// Highest load/capacity ratio over all loaded links.
    pub fn max_utilization(&self, snap: &TopologySnapshot) -> f64 {
        self.iter()
            .map(|(l, load)| load / l.capacity(snap))
            .fold(0.0, f64::max)
    }

    /// Utilization of the busiest hop of `path` after adding `rate`.
    pub fn utilization_with(&self, snap: &TopologySnapshot, path: &Path, rate: f64) -> f64 {
        path.hops
            .iter()
            .map(|h| (self.load(*h) + rate) / h.capacity(snap))
            .fold(0.0, f64::max)
    }

    pub fn from_assignment(assignment: &FlowAssignment) -> Self {
        let mut loads = Self::new();
        for flow in &assignment.flows {
            if let Some(path) = &flow.path {
                loads.add_path(path, flow.demand.offered_rate);
            }
        }
        loads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ospf,
    Elb,
    B4,
    Mfss,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Ospf,
        Algorithm::Elb,
        Algorithm::B4,
        Algorithm::Mfss,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ospf => "ospf",
            Algorithm::Elb => "elb",
            Algorithm::B4 => "b4",
            Algorithm::Mfss => "mfss",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::param(
                    "scheduler",
                    format!("unknown scheduler `{s}` (expected ospf, elb, b4 or mfss)"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutedFlow {
    pub demand: FlowDemand,
    pub path: Option<Path>,
    /// Routing plane used (MFSS only).
    pub plane: Option<Plane>,
    /// Deflections applied (ELB only).
    pub deflections: u32,
    /// Why the flow has no path, or why a fallback was taken.
    pub note: Option<String>,
}

impl RoutedFlow {
    pub fn routed(demand: FlowDemand, path: Path) -> Self {
        Self {
            demand,
            path: Some(path),
            plane: None,
            deflections: 0,
            note: None,
        }
    }

    pub fn unroutable(demand: FlowDemand, reason: impl Into<String>) -> Self {
        Self {
            demand,
            path: None,
            plane: None,
            deflections: 0,
            note: Some(reason.into()),
        }
    }
}

/// Path binding for every demand, in scheduler processing order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowAssignment {
    pub algorithm: Algorithm,
    pub time_s: f64,
    pub flows: Vec<RoutedFlow>,
}

impl FlowAssignment {
    pub fn path_of(&self, flow_id: usize) -> Option<&Path> {
        self.flows
            .iter()
            .find(|f| f.demand.id == flow_id)
            .and_then(|f| f.path.as_ref())
    }
}

/// Resolves a demand's ground-station endpoints in the snapshot.
pub(crate) fn endpoints(snap: &TopologySnapshot, d: &FlowDemand) -> Result<(NodeIx, NodeIx)> {
    let missing = |i: usize| Error::InvalidTopology(format!("station {i} is not in the snapshot"));
    let src = snap.ground(d.src).ok_or_else(|| missing(d.src))?;
    let dst = snap.ground(d.dst).ok_or_else(|| missing(d.dst))?;
    Ok((src, dst))
}

/// Delay-weighted shortest path for every demand.
pub fn ospf_assign(snap: &TopologySnapshot, demands: &[FlowDemand]) -> FlowAssignment {
    use rayon::prelude::*;

    let ordered = crate::traffic::processing_order(demands);
    let flows = ordered
        .par_iter()
        .map(
            |d| match endpoints(snap, d).and_then(|(s, t)| shortest_path(snap, s, t)) {
                Ok(path) => RoutedFlow::routed(d.clone(), path),
                Err(e) => RoutedFlow::unroutable(d.clone(), e.to_string()),
            },
        )
        .collect();
    FlowAssignment {
        algorithm: Algorithm::Ospf,
        time_s: snap.time_s,
        flows,
    }
}

/// `f64` with a total order, for heaps and sorted sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Total(pub f64);

impl Eq for Total {}

impl PartialOrd for Total {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Total {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::topology::{Link, LinkKind, NodeId, TopologySnapshot};

    /// Snapshot over ground-typed nodes `0..n` with the given weighted edges.
    pub fn graph(n: u32, edges: &[(u32, u32, f64)], capacity: f64) -> TopologySnapshot {
        let links = edges
            .iter()
            .map(|&(a, b, d)| {
                Link::new(
                    NodeId::Ground(a),
                    NodeId::Ground(b),
                    d,
                    capacity,
                    LinkKind::Isl,
                )
            })
            .collect();
        TopologySnapshot::from_links(0.0, (0..n).map(NodeId::Ground), links).unwrap()
    }
}
