//! Centralized max-min allocation over K candidate paths per flow, at flow
//! granularity.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{endpoints, k_shortest_paths, Algorithm, DirLink, FlowAssignment, Path, RoutedFlow};
use crate::error::{Error, Result};
use crate::topology::TopologySnapshot;
use crate::traffic::{processing_order, FlowDemand};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct B4Params {
    /// Candidate paths per flow.
    pub k: usize,
}

impl Default for B4Params {
    fn default() -> Self {
        Self { k: 4 }
    }
}

impl B4Params {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("b4.k", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct B4Flow {
    pub demand: FlowDemand,
    pub candidates: Vec<Path>,
    /// Rate placed on each candidate.
    pub split: Vec<f64>,
    pub rate: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct B4Allocation {
    pub flows: Vec<B4Flow>,
}

/// Water-filling: every unfrozen flow grows by the same increment, placed on
/// its candidate with the most residual bottleneck capacity. A flow freezes
/// when it reaches its offered rate or every candidate crosses a saturated
/// link.
pub fn b4_allocate(
    snap: &TopologySnapshot,
    demands: &[FlowDemand],
    params: &B4Params,
) -> Result<B4Allocation> {
    params.validate()?;
    let ordered = processing_order(demands);
    let mut flows: Vec<B4Flow> = ordered
        .par_iter()
        .map(|d| {
            let found =
                endpoints(snap, d).and_then(|(s, t)| k_shortest_paths(snap, s, t, params.k));
            let (candidates, note) = match found {
                Ok(c) => (c, None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            B4Flow {
                demand: d.clone(),
                split: vec![0.0; candidates.len()],
                candidates,
                rate: 0.0,
                note,
            }
        })
        .collect();

    let mut residual: HashMap<DirLink, f64> = HashMap::new();
    for f in &flows {
        for p in &f.candidates {
            for h in &p.hops {
                residual.entry(*h).or_insert_with(|| h.capacity(snap));
            }
        }
    }
    let saturated =
        |residual: &HashMap<DirLink, f64>, h: &DirLink| residual[h] <= EPS * h.capacity(snap);

    let mut active: Vec<bool> = flows.iter().map(|f| !f.candidates.is_empty()).collect();
    loop {
        // pick each active flow's current candidate
        let mut choice: Vec<Option<usize>> = vec![None; flows.len()];
        for (i, f) in flows.iter().enumerate() {
            if !active[i] {
                continue;
            }
            if f.rate >= f.demand.offered_rate - EPS * f.demand.offered_rate.max(1.0) {
                active[i] = false;
                continue;
            }
            let best = f
                .candidates
                .iter()
                .enumerate()
                .filter(|(_, p)| !p.hops.iter().any(|h| saturated(&residual, h)))
                .map(|(c, p)| {
                    (
                        c,
                        p.hops
                            .iter()
                            .map(|h| residual[h])
                            .fold(f64::INFINITY, f64::min),
                    )
                })
                .fold(None, |acc: Option<(usize, f64)>, (c, r)| match acc {
                    Some((_, br)) if br >= r => acc,
                    _ => Some((c, r)),
                });
            match best {
                Some((c, _)) => choice[i] = Some(c),
                None => active[i] = false,
            }
        }
        if !active.iter().any(|a| *a) {
            break;
        }

        let mut users: HashMap<DirLink, usize> = HashMap::new();
        let mut step = f64::INFINITY;
        for (i, f) in flows.iter().enumerate() {
            if let Some(c) = choice[i] {
                step = step.min(f.demand.offered_rate - f.rate);
                for h in &f.candidates[c].hops {
                    *users.entry(*h).or_insert(0) += 1;
                }
            }
        }
        for (h, n) in &users {
            step = step.min(residual[h] / *n as f64);
        }
        let step = step.max(0.0);
        for (i, f) in flows.iter_mut().enumerate() {
            if let Some(c) = choice[i] {
                f.rate += step;
                f.split[c] += step;
            }
        }
        for (h, n) in users {
            let r = residual.get_mut(&h).expect("tracked");
            *r = (*r - step * n as f64).max(0.0);
        }
    }
    Ok(B4Allocation { flows })
}

/// Single-path binding: each flow keeps the candidate that carried most of
/// its allocation (ties to the shorter candidate).
pub fn b4_assign(
    snap: &TopologySnapshot,
    demands: &[FlowDemand],
    params: &B4Params,
) -> Result<FlowAssignment> {
    let alloc = b4_allocate(snap, demands, params)?;
    let flows = alloc
        .flows
        .into_iter()
        .map(|f| {
            let best = f.split.iter().enumerate().fold(
                None,
                |acc: Option<(usize, f64)>, (c, &r)| match acc {
                    Some((_, br)) if br >= r => acc,
                    _ => Some((c, r)),
                },
            );
            match best {
                Some((c, _)) => RoutedFlow::routed(f.demand, f.candidates[c].clone()),
                None => RoutedFlow::unroutable(
                    f.demand,
                    f.note.unwrap_or_else(|| "no candidate path".into()),
                ),
            }
        })
        .collect();
    Ok(FlowAssignment {
        algorithm: Algorithm::B4,
        time_s: snap.time_s,
        flows,
    })
}
