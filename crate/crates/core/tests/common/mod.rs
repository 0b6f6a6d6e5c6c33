//! Independent oracles and small-instance generators shared by the
//! integration and acceptance tests. Nothing here calls the code under test.
#![allow(dead_code)]

use leoroute::routing::{DirLink, Path, RoutedFlow};
use leoroute::topology::{Link, LinkKind, NodeId, TopologySnapshot};
use leoroute::{Algorithm, FlowAssignment, FlowDemand};
use rand::Rng;

/// Undirected graph over ground nodes `0..n`, integer delays so that ties
/// are exact.
#[derive(Debug, Clone)]
pub struct SmallGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, u32)>,
}

impl SmallGraph {
    pub fn random<R: Rng>(rng: &mut R, max_nodes: usize, density: f64, max_delay: u32) -> Self {
        let n = rng.gen_range(2..=max_nodes);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(density) {
                    edges.push((a, b, rng.gen_range(1..=max_delay)));
                }
            }
        }
        Self { n, edges }
    }

    pub fn snapshot(&self, capacity: f64) -> TopologySnapshot {
        let links = self
            .edges
            .iter()
            .map(|&(a, b, d)| {
                Link::new(
                    NodeId::Ground(a as u32),
                    NodeId::Ground(b as u32),
                    d as f64,
                    capacity,
                    LinkKind::Isl,
                )
            })
            .collect();
        TopologySnapshot::from_links(0.0, (0..self.n as u32).map(NodeId::Ground), links).unwrap()
    }

    fn weight(&self, a: usize, b: usize) -> Option<u32> {
        self.edges
            .iter()
            .find(|&&(x, y, _)| (x, y) == (a.min(b), a.max(b)))
            .map(|e| e.2)
    }

    /// Every simple path from `src` to `dst` by depth-first enumeration,
    /// sorted by (delay, node sequence).
    pub fn all_simple_paths(&self, src: usize, dst: usize) -> Vec<(u64, Vec<usize>)> {
        let mut out = Vec::new();
        let mut stack = vec![src];
        let mut on = vec![false; self.n];
        on[src] = true;
        self.dfs(dst, &mut stack, &mut on, 0, &mut out);
        out.sort();
        out
    }

    fn dfs(
        &self,
        dst: usize,
        stack: &mut Vec<usize>,
        on: &mut [bool],
        delay: u64,
        out: &mut Vec<(u64, Vec<usize>)>,
    ) {
        let u = *stack.last().unwrap();
        if u == dst {
            out.push((delay, stack.clone()));
            return;
        }
        for v in 0..self.n {
            if on[v] {
                continue;
            }
            if let Some(w) = self.weight(u, v) {
                on[v] = true;
                stack.push(v);
                self.dfs(dst, stack, on, delay + w as u64, out);
                stack.pop();
                on[v] = false;
            }
        }
    }

    /// Bellman-Ford distances from `src`.
    pub fn bellman_ford(&self, src: usize) -> Vec<Option<u64>> {
        let mut d = vec![None; self.n];
        d[src] = Some(0u64);
        for _ in 0..self.n {
            for &(a, b, w) in &self.edges {
                for (u, v) in [(a, b), (b, a)] {
                    if let Some(du) = d[u] {
                        if d[v].is_none_or(|dv| du + (w as u64) < dv) {
                            d[v] = Some(du + w as u64);
                        }
                    }
                }
            }
        }
        d
    }
}

/// Snapshot with `caps.len()` disjoint links `2i -- 2i+1`, so a flow can
/// cross any subset of them.
pub fn disjoint_links(caps: &[f64]) -> TopologySnapshot {
    let links = caps
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let (a, b) = (2 * i as u32, 2 * i as u32 + 1);
            Link::new(NodeId::Ground(a), NodeId::Ground(b), 1.0, c, LinkKind::Isl)
        })
        .collect();
    TopologySnapshot::from_links(0.0, (0..2 * caps.len() as u32).map(NodeId::Ground), links)
        .unwrap()
}

/// Assignment in which flow `i` crosses the links listed in `routes[i]`
/// (indices into the `disjoint_links` snapshot).
pub fn assignment_over(routes: &[Vec<usize>], offered: &[f64]) -> FlowAssignment {
    let flows = routes
        .iter()
        .zip(offered)
        .enumerate()
        .map(|(id, (r, &o))| {
            let path = Path {
                nodes: Vec::new(),
                hops: r
                    .iter()
                    .map(|&l| DirLink {
                        link: l,
                        forward: true,
                    })
                    .collect(),
                total_delay_ms: r.len() as f64,
                bottleneck_capacity: f64::INFINITY,
            };
            RoutedFlow::routed(
                FlowDemand {
                    id,
                    src: 0,
                    dst: 1,
                    offered_rate: o,
                },
                path,
            )
        })
        .collect();
    FlowAssignment {
        algorithm: Algorithm::Ospf,
        time_s: 0.0,
        flows,
    }
}

/// Bottleneck-level water-filling: raise a common level until the tightest
/// link fair share or offered cap, freeze what it binds, repeat.
pub fn water_filling(caps: &[f64], routes: &[Vec<usize>], offered: &[f64]) -> Vec<f64> {
    let n = routes.len();
    let mut rate = vec![0.0; n];
    let mut fixed = vec![false; n];
    loop {
        let active: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        if active.is_empty() {
            return rate;
        }
        let mut level = f64::INFINITY;
        for (l, &c) in caps.iter().enumerate() {
            let users = active.iter().filter(|&&i| routes[i].contains(&l)).count();
            if users > 0 {
                let used: f64 = (0..n)
                    .filter(|&i| fixed[i] && routes[i].contains(&l))
                    .map(|i| rate[i])
                    .sum();
                level = level.min((c - used) / users as f64);
            }
        }
        for &i in &active {
            level = level.min(offered[i]);
        }
        let mut binding = Vec::new();
        for (l, &c) in caps.iter().enumerate() {
            let users = active.iter().filter(|&&i| routes[i].contains(&l)).count();
            if users == 0 {
                continue;
            }
            let used: f64 = (0..n)
                .filter(|&i| fixed[i] && routes[i].contains(&l))
                .map(|i| rate[i])
                .sum();
            if (c - used) / users as f64 <= level * (1.0 + 1e-12) {
                binding.push(l);
            }
        }
        let mut froze = false;
        for &i in &active {
            if offered[i] <= level || routes[i].iter().any(|l| binding.contains(l)) {
                rate[i] = level.min(offered[i]);
                fixed[i] = true;
                froze = true;
            }
        }
        assert!(froze, "water-filling made no progress");
    }
}

/// Max-min optimality: each flow is at its offered rate or crosses a
/// saturated link on which no other flow gets more.
pub fn is_max_min(
    caps: &[f64],
    routes: &[Vec<usize>],
    offered: &[f64],
    rate: &[f64],
    tol: f64,
) -> bool {
    let load = |l: usize| -> f64 {
        (0..routes.len())
            .filter(|&i| routes[i].contains(&l))
            .map(|i| rate[i])
            .sum()
    };
    for (l, &c) in caps.iter().enumerate() {
        if load(l) > c + tol {
            return false;
        }
    }
    (0..routes.len()).all(|i| {
        rate[i] <= offered[i] + tol
            && (rate[i] >= offered[i] - tol
                || routes[i].iter().any(|&l| {
                    load(l) >= caps[l] - tol
                        && (0..routes.len())
                            .filter(|&j| routes[j].contains(&l))
                            .all(|j| rate[j] <= rate[i] + tol)
                }))
    })
}

/// A random instance for the water-filling comparison: up to `max_links`
/// links, up to `max_flows` flows, each flow on a nonempty link subset.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    max_links: usize,
    max_flows: usize,
) -> (Vec<f64>, Vec<Vec<usize>>, Vec<f64>) {
    let nl = rng.gen_range(1..=max_links);
    let nf = rng.gen_range(1..=max_flows);
    let caps: Vec<f64> = (0..nl).map(|_| rng.gen_range(10.0..500.0)).collect();
    let routes: Vec<Vec<usize>> = (0..nf)
        .map(|_| {
            let mut r: Vec<usize> = (0..nl).filter(|_| rng.gen_bool(0.5)).collect();
            if r.is_empty() {
                r.push(rng.gen_range(0..nl));
            }
            r
        })
        .collect();
    let offered: Vec<f64> = (0..nf)
        .map(|_| {
            if rng.gen_bool(0.3) {
                rng.gen_range(1.0..100.0)
            } else {
                rng.gen_range(100.0..1000.0)
            }
        })
        .collect();
    (caps, routes, offered)
}
