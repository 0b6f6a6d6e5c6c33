//! Distributed deflection baseline: hop-by-hop shortest-path forwarding where
//! a node that sees its outgoing link busy deflects part of the transit
//! traffic to the least utilized neighbour. Nodes only know their own links.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::paths::Searcher;
use super::{
    endpoints, shortest_path, Algorithm, DirLink, FlowAssignment, LinkLoadMap, Path, RoutedFlow,
};
use crate::error::{Error, Result};
use crate::topology::{NodeIx, TopologySnapshot};
use crate::traffic::{processing_order, FlowDemand};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElbParams {
    /// Utilization above which a node starts deflecting.
    pub busy_threshold: f64,
    /// Share of transiting flows deflected at a busy link.
    pub deflection_fraction: f64,
    /// Extra hops allowed beyond the undeflected shortest path.
    pub ttl: u32,
}

impl Default for ElbParams {
    fn default() -> Self {
        Self {
            busy_threshold: 0.7,
            deflection_fraction: 0.5,
            ttl: 32,
        }
    }
}

impl ElbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.busy_threshold > 0.0) {
            return Err(Error::param(
                "elb.busy_threshold",
                format!("must be positive, got {}", self.busy_threshold),
            ));
        }
        if !(0.0..=1.0).contains(&self.deflection_fraction) {
            return Err(Error::param(
                "elb.deflection_fraction",
                format!("must be in [0, 1], got {}", self.deflection_fraction),
            ));
        }
        Ok(())
    }
}

/// Routes flows one at a time in processing order, each seeing the offered
/// load of the flows routed before it.
pub fn elb_assign(
    snap: &TopologySnapshot,
    demands: &[FlowDemand],
    params: &ElbParams,
    seed: u64,
) -> Result<FlowAssignment> {
    params.validate()?;
    let ordered = processing_order(demands);
    let mut loads = LinkLoadMap::new();
    let mut dist_cache: HashMap<NodeIx, Vec<f64>> = HashMap::new();
    let mut search = Searcher::new(snap);
    let mut flows = Vec::with_capacity(ordered.len());

    for d in &ordered {
        let (src, dst) = match endpoints(snap, d) {
            Ok(e) => e,
            Err(e) => {
                flows.push(RoutedFlow::unroutable(d.clone(), e.to_string()));
                continue;
            }
        };
        let baseline = match shortest_path(snap, src, dst) {
            Ok(p) => p,
            Err(e) => {
                flows.push(RoutedFlow::unroutable(d.clone(), e.to_string()));
                continue;
            }
        };
        let dist = dist_cache
            .entry(dst)
            .or_insert_with(|| search.distances_to(dst, None).to_vec());
        let mut rng = flow_rng(seed, d.id);
        let walk = forward(
            snap,
            dist,
            &loads,
            d.offered_rate,
            src,
            dst,
            baseline.hop_count() + params.ttl as usize,
            params,
            &mut rng,
        );

        let flow = match walk {
            Some((nodes, deflections)) if deflections > 0 => {
                let path = Path::from_nodes(snap, nodes)?;
                let mut f = RoutedFlow::routed(d.clone(), path);
                f.deflections = deflections;
                f
            }
            Some(_) => RoutedFlow::routed(d.clone(), baseline),
            None => {
                let mut f = RoutedFlow::routed(d.clone(), baseline);
                f.note = Some("ttl exceeded; undeflected shortest path".into());
                f
            }
        };
        if let Some(p) = &flow.path {
            loads.add_path(p, d.offered_rate);
        }
        flows.push(flow);
    }
    Ok(FlowAssignment {
        algorithm: Algorithm::Elb,
        time_s: snap.time_s,
        flows,
    })
}

fn flow_rng(seed: u64, flow: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (flow as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// One forwarding walk. Returns the node sequence and the deflection count,
/// or `None` when the hop budget runs out or the walk dead-ends.
#[allow(clippy::too_many_arguments)]
fn forward(
    snap: &TopologySnapshot,
    dist: &[f64],
    loads: &LinkLoadMap,
    rate: f64,
    src: NodeIx,
    dst: NodeIx,
    max_hops: usize,
    params: &ElbParams,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<NodeIx>, u32)> {
    let mut visited = vec![false; snap.node_count()];
    let mut nodes = vec![src];
    visited[src] = true;
    let mut deflections = 0;
    let mut u = src;

    while u != dst {
        if nodes.len() > max_hops {
            return None;
        }
        // stub nodes (single-homed ground stations) only terminate traffic
        let usable = |v: NodeIx| {
            !visited[v] && dist[v].is_finite() && (v == dst || snap.neighbors(v).len() > 1)
        };
        let mut options: Vec<(f64, NodeIx, DirLink)> = snap
            .neighbors(u)
            .iter()
            .filter(|(v, _)| usable(*v))
            .map(|&(v, l)| {
                let hop = DirLink::between(snap, u, v).expect("neighbour");
                (snap.link(l).delay_ms + dist[v], v, hop)
            })
            .collect();
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let &(_, primary, primary_hop) = options.first()?;

        let mut next = primary;
        // a node measures its links with the transiting flow on them
        let util = |hop: DirLink| (loads.load(hop) + rate) / hop.capacity(snap);
        let busy = util(primary_hop);
        if busy > params.busy_threshold && rng.gen::<f64>() < params.deflection_fraction {
            let alt = options[1..]
                .iter()
                .map(|&(_, v, hop)| (util(hop), v))
                .filter(|(util, _)| *util < busy)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, v)) = alt {
                next = v;
                deflections += 1;
            }
        }
        visited[next] = true;
        nodes.push(next);
        u = next;
    }
    Some((nodes, deflections))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::ospf_assign;
    use crate::routing::testutil::graph;

    fn demand(id: usize, src: usize, dst: usize, rate: f64) -> FlowDemand {
        FlowDemand {
            id,
            src,
            dst,
            offered_rate: rate,
        }
    }

    #[test]
    fn idle_network_follows_shortest_paths() {
        let g = graph(
            5,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (1, 4, 1.0),
                (4, 3, 1.5),
            ],
            400.0,
        );
        let demands = [
            demand(0, 0, 3, 100.0),
            demand(1, 3, 0, 100.0),
            demand(2, 4, 2, 50.0),
        ];
        let e = elb_assign(&g, &demands, &ElbParams::default(), 7).unwrap();
        let o = ospf_assign(&g, &demands);
        for (x, y) in e.flows.iter().zip(&o.flows) {
            assert_eq!(x.path, y.path);
            assert_eq!(x.deflections, 0);
        }
    }

    #[test]
    fn hot_link_deflects_onto_idle_detour() {
        // 0 - 1 - 2 - 3 main line; 1 - 4 - 2 idle detour, slightly longer
        let g = graph(
            5,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (1, 4, 1.0),
                (4, 2, 1.5),
            ],
            400.0,
        );
        let params = ElbParams {
            deflection_fraction: 1.0,
            ..ElbParams::default()
        };
        let demands = [
            demand(0, 0, 3, 300.0),
            demand(1, 0, 3, 300.0),
            demand(2, 0, 1, 50.0),
        ];
        let e = elb_assign(&g, &demands, &params, 1).unwrap();
        let by_id = |id| e.flows.iter().find(|f| f.demand.id == id).unwrap();
        assert_eq!(by_id(0).path.as_ref().unwrap().nodes, vec![0, 1, 2, 3]);
        // 0->1 is busy too, but the only other neighbour is unusable
        assert_eq!(by_id(1).path.as_ref().unwrap().nodes, vec![0, 1, 4, 2, 3]);
        assert_eq!(by_id(1).deflections, 1);
        assert_eq!(by_id(2).path.as_ref().unwrap().nodes, vec![0, 1]);
    }

    #[test]
    fn zero_fraction_never_deflects() {
        let g = graph(
            5,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (1, 4, 1.0),
                (4, 2, 1.5),
            ],
            400.0,
        );
        let params = ElbParams {
            deflection_fraction: 0.0,
            ..ElbParams::default()
        };
        let demands = [demand(0, 0, 3, 390.0), demand(1, 0, 3, 390.0)];
        let e = elb_assign(&g, &demands, &params, 1).unwrap();
        assert!(e.flows.iter().all(|f| f.deflections == 0));
    }

    #[test]
    fn ttl_budget_falls_back_to_shortest_path() {
        // deflection into a long detour that exceeds a zero-hop budget
        let g = graph(
            6,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (1, 3, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (5, 2, 1.0),
            ],
            400.0,
        );
        let params = ElbParams {
            deflection_fraction: 1.0,
            ttl: 0,
            ..ElbParams::default()
        };
        let demands = [demand(0, 0, 2, 390.0), demand(1, 0, 2, 390.0)];
        let e = elb_assign(&g, &demands, &params, 3).unwrap();
        let second = &e.flows[1];
        assert_eq!(second.path.as_ref().unwrap().nodes, vec![0, 1, 2]);
        assert!(second.note.as_deref().unwrap().contains("ttl"));
    }

    #[test]
    fn deterministic_given_seed() {
        let g = graph(
            5,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (1, 4, 1.0),
                (4, 2, 1.5),
            ],
            400.0,
        );
        let demands: Vec<_> = (0..6).map(|i| demand(i, 0, 3, 200.0 + i as f64)).collect();
        let a = elb_assign(&g, &demands, &ElbParams::default(), 99).unwrap();
        let b = elb_assign(&g, &demands, &ElbParams::default(), 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_params() {
        let p = ElbParams {
            deflection_fraction: 1.5,
            ..ElbParams::default()
        };
        assert!(p.validate().is_err());
    }
}
