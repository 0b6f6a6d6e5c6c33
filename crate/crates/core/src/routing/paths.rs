//! Delay-weighted shortest paths and loopless K-shortest paths.
//!
//! Ties between equal-delay paths always resolve to the lexicographically
//! smallest node sequence. Searches run backwards from the destination so the
//! tie-break can be applied greedily while walking forward from the source.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use super::{Path, Total};
use crate::error::{Error, Result};
use crate::topology::{NodeIx, TopologySnapshot};

/// Reusable Dijkstra state with node and link exclusions.
pub(crate) struct Searcher<'a> {
    snap: &'a TopologySnapshot,
    dist: Vec<f64>,
    blocked_nodes: Vec<bool>,
    blocked_links: Vec<bool>,
    touched_nodes: Vec<NodeIx>,
    touched_links: Vec<usize>,
    heap: BinaryHeap<Reverse<(Total, NodeIx)>>,
}

impl<'a> Searcher<'a> {
    pub(crate) fn new(snap: &'a TopologySnapshot) -> Self {
        Self {
            snap,
            dist: vec![f64::INFINITY; snap.node_count()],
            blocked_nodes: vec![false; snap.node_count()],
            blocked_links: vec![false; snap.links().len()],
            touched_nodes: Vec::new(),
            touched_links: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }

    fn block_node(&mut self, n: NodeIx) {
        if !self.blocked_nodes[n] {
            self.blocked_nodes[n] = true;
            self.touched_nodes.push(n);
        }
    }

    fn block_link(&mut self, l: usize) {
        if !self.blocked_links[l] {
            self.blocked_links[l] = true;
            self.touched_links.push(l);
        }
    }

    fn clear_blocks(&mut self) {
        for n in self.touched_nodes.drain(..) {
            self.blocked_nodes[n] = false;
        }
        for l in self.touched_links.drain(..) {
            self.blocked_links[l] = false;
        }
    }

    /// Distances to `dst`. Stops once `stop_at` is settled; every node that
    /// can lie on a shortest path from `stop_at` is settled by then.
    pub(crate) fn distances_to(&mut self, dst: NodeIx, stop_at: Option<NodeIx>) -> &[f64] {
        self.dist.fill(f64::INFINITY);
        self.heap.clear();
        if self.blocked_nodes[dst] {
            return &self.dist;
        }
        let mut settled = vec![false; self.dist.len()];
        self.dist[dst] = 0.0;
        self.heap.push(Reverse((Total(0.0), dst)));
        while let Some(Reverse((Total(d), u))) = self.heap.pop() {
            if settled[u] {
                continue;
            }
            settled[u] = true;
            if Some(u) == stop_at {
                break;
            }
            for &(v, l) in self.snap.neighbors(u) {
                if settled[v] || self.blocked_nodes[v] || self.blocked_links[l] {
                    continue;
                }
                let nd = d + self.snap.link(l).delay_ms;
                if nd < self.dist[v] {
                    self.dist[v] = nd;
                    self.heap.push(Reverse((Total(nd), v)));
                }
            }
        }
        // Unsettled tentative values must not be mistaken for final ones.
        for (d, s) in self.dist.iter_mut().zip(&settled) {
            if !s {
                *d = f64::INFINITY;
            }
        }
        &self.dist
    }

    /// Lexicographically smallest shortest path from `src` to `dst` under the
    /// current exclusions.
    pub(crate) fn lexmin_path(&mut self, src: NodeIx, dst: NodeIx) -> Option<Vec<NodeIx>> {
        if self.blocked_nodes[src] {
            return None;
        }
        self.distances_to(dst, Some(src));
        self.walk(src, dst).or_else(|| {
            // zero-delay links can leave ties unsettled at the early stop
            self.distances_to(dst, None);
            self.walk(src, dst)
        })
    }

    fn walk(&self, src: NodeIx, dst: NodeIx) -> Option<Vec<NodeIx>> {
        if !self.dist[src].is_finite() {
            return None;
        }
        let mut path = vec![src];
        let mut u = src;
        while u != dst {
            let du = self.dist[u];
            let next = self.snap.neighbors(u).iter().find(|&&(v, l)| {
                !self.blocked_nodes[v]
                    && !self.blocked_links[l]
                    && self.dist[v].is_finite()
                    && self.dist[v] + self.snap.link(l).delay_ms == du
                    && !path.contains(&v)
            })?;
            u = next.0;
            path.push(u);
        }
        Some(path)
    }
}

fn unreachable(snap: &TopologySnapshot, src: NodeIx, dst: NodeIx) -> Error {
    Error::Unreachable {
        src: snap.node(src).to_string(),
        dst: snap.node(dst).to_string(),
    }
}

fn check_endpoints(snap: &TopologySnapshot, src: NodeIx, dst: NodeIx) -> Result<()> {
    let n = snap.node_count();
    if src >= n || dst >= n {
        return Err(Error::param("endpoints", "node index outside the snapshot"));
    }
    if src == dst {
        return Err(Error::param("endpoints", "source and destination coincide"));
    }
    Ok(())
}

/// Minimum-delay loopless path.
pub fn shortest_path(snap: &TopologySnapshot, src: NodeIx, dst: NodeIx) -> Result<Path> {
    check_endpoints(snap, src, dst)?;
    let nodes = Searcher::new(snap)
        .lexmin_path(src, dst)
        .ok_or_else(|| unreachable(snap, src, dst))?;
    Path::from_nodes(snap, nodes)
}

/// The `k` minimum-delay loopless paths in nondecreasing delay order, via
/// deviation from previously accepted paths (Yen). Fewer than `k` are
/// returned when the graph has fewer simple paths.
pub fn k_shortest_paths(
    snap: &TopologySnapshot,
    src: NodeIx,
    dst: NodeIx,
    k: usize,
) -> Result<Vec<Path>> {
    check_endpoints(snap, src, dst)?;
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let mut search = Searcher::new(snap);
    let first = search
        .lexmin_path(src, dst)
        .ok_or_else(|| unreachable(snap, src, dst))?;

    let mut accepted: Vec<Path> = vec![Path::from_nodes(snap, first)?];
    let mut seen: HashSet<Vec<NodeIx>> = HashSet::new();
    seen.insert(accepted[0].nodes.clone());
    let mut candidates: BTreeSet<(Total, Vec<NodeIx>)> = BTreeSet::new();

    while accepted.len() < k {
        let last = accepted.last().expect("nonempty").nodes.clone();
        for i in 0..last.len() - 1 {
            let spur = last[i];
            let root = &last[..=i];
            for p in &accepted {
                if p.nodes.len() > i + 1 && p.nodes[..=i] == *root {
                    search.block_link(p.hops[i].link);
                }
            }
            for &n in &root[..i] {
                search.block_node(n);
            }
            let spur_path = search.lexmin_path(spur, dst);
            search.clear_blocks();

            if let Some(tail) = spur_path {
                let mut nodes = root[..i].to_vec();
                nodes.extend(tail);
                if seen.insert(nodes.clone()) {
                    let delay = sequential_delay(snap, &nodes);
                    candidates.insert((Total(delay), nodes));
                }
            }
        }
        let Some((_, nodes)) = candidates.pop_first() else {
            break;
        };
        accepted.push(Path::from_nodes(snap, nodes)?);
    }
    Ok(accepted)
}

fn sequential_delay(snap: &TopologySnapshot, nodes: &[NodeIx]) -> f64 {
    nodes
        .windows(2)
        .map(|w| {
            let l = snap.link_between(w[0], w[1]).expect("adjacent");
            snap.link(l).delay_ms
        })
        .sum()
}

/// Paths whose delay is within `(1 + epsilon)` of the minimum, in input order.
/// `paths` must be sorted by delay.
pub fn equivalent_paths(paths: &[Path], epsilon: f64) -> Vec<Path> {
    let Some(best) = paths.first() else {
        return Vec::new();
    };
    let limit = (1.0 + epsilon.max(0.0)) * best.total_delay_ms;
    paths
        .iter()
        .take_while(|p| p.total_delay_ms <= limit)
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::testutil::graph;

    #[test]
    fn single_link() {
        let g = graph(2, &[(0, 1, 4.0)], 1.0);
        let p = shortest_path(&g, 0, 1).unwrap();
        assert_eq!(p.nodes, vec![0, 1]);
        assert_eq!(p.total_delay_ms, 4.0);
    }

    #[test]
    fn triangle_prefers_two_hops() {
        let g = graph(3, &[(0, 2, 3.0), (0, 1, 1.0), (1, 2, 1.0)], 1.0);
        let p = shortest_path(&g, 0, 2).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2]);
        assert_eq!(p.total_delay_ms, 2.0);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        // 0-3-1 and 0-2-1 have equal delay; 0-2-1 is smaller
        let g = graph(
            4,
            &[(0, 3, 1.0), (3, 1, 1.0), (0, 2, 1.0), (2, 1, 1.0)],
            1.0,
        );
        assert_eq!(shortest_path(&g, 0, 1).unwrap().nodes, vec![0, 2, 1]);
    }

    #[test]
    fn unreachable_and_bad_endpoints() {
        let g = graph(3, &[(0, 1, 1.0)], 1.0);
        assert!(matches!(
            shortest_path(&g, 0, 2),
            Err(Error::Unreachable { .. })
        ));
        assert!(matches!(
            k_shortest_paths(&g, 0, 2, 3),
            Err(Error::Unreachable { .. })
        ));
        assert!(shortest_path(&g, 1, 1).is_err());
        assert!(k_shortest_paths(&g, 0, 1, 0).is_err());
    }

    #[test]
    fn k1_is_shortest_path() {
        let g = graph(
            5,
            &[
                (0, 1, 2.0),
                (1, 4, 2.0),
                (0, 2, 1.0),
                (2, 3, 1.0),
                (3, 4, 1.5),
            ],
            1.0,
        );
        let k1 = k_shortest_paths(&g, 0, 4, 1).unwrap();
        assert_eq!(k1.len(), 1);
        assert_eq!(k1[0], shortest_path(&g, 0, 4).unwrap());
    }

    #[test]
    fn complete_four_node_unit_graph() {
        // simple paths 0->3 in K4: one direct, two of length 2, two of length 3
        let mut edges = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                edges.push((a, b, 1.0));
            }
        }
        let g = graph(4, &edges, 1.0);
        let d: Vec<f64> = k_shortest_paths(&g, 0, 3, 3)
            .unwrap()
            .iter()
            .map(|p| p.total_delay_ms)
            .collect();
        assert_eq!(d, vec![1.0, 2.0, 2.0]);
        let all = k_shortest_paths(&g, 0, 3, 100).unwrap();
        assert_eq!(all.len(), 5);
    }

    #[test]
    fn equivalent_path_threshold() {
        let g = graph(
            5,
            &[
                (0, 1, 5.0),
                (1, 4, 5.0),
                (0, 2, 5.0),
                (2, 4, 6.0),
                (0, 3, 6.0),
                (3, 4, 7.0),
            ],
            1.0,
        );
        let paths = k_shortest_paths(&g, 0, 4, 10).unwrap();
        let d: Vec<f64> = paths.iter().map(|p| p.total_delay_ms).collect();
        assert_eq!(d, vec![10.0, 11.0, 13.0]);
        let eq: Vec<f64> = equivalent_paths(&paths, 0.2)
            .iter()
            .map(|p| p.total_delay_ms)
            .collect();
        assert_eq!(eq, vec![10.0, 11.0]);
        assert_eq!(equivalent_paths(&paths, 0.0).len(), 1);
        assert!(equivalent_paths(&[], 0.5).is_empty());
    }
}
