//! Multi-routing-plane flow scheduling.
//!
//! Flows use the IP plane (delay-shortest path) until the congestion
//! predictor flags a link. From then on, new flows go to the auxiliary plane,
//! which picks among equivalent paths the one that avoids flagged links and
//! keeps its busiest hop least utilized. Admitted flows are never moved.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    endpoints, equivalent_paths, k_shortest_paths, shortest_path, Algorithm, DirLink,
    FlowAssignment, LinkLoadMap, Path, RoutedFlow,
};
use crate::error::{Error, Result};
use crate::topology::TopologySnapshot;
use crate::traffic::{processing_order, FlowDemand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Ip,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfssParams {
    /// Congestion threshold on the smoothed utilization.
    pub theta: f64,
    /// EWMA weight of the newest utilization sample.
    pub alpha: f64,
    /// Delay tolerance for equivalent paths.
    pub epsilon: f64,
    /// K-shortest search width.
    pub k: usize,
    /// Return to the IP plane once every estimate drops below `theta / 2`.
    pub deactivate_below_half_theta: bool,
}

impl Default for MfssParams {
    fn default() -> Self {
        Self {
            theta: 0.7,
            alpha: 0.5,
            epsilon: 0.2,
            k: 50,
            deactivate_below_half_theta: true,
        }
    }
}

impl MfssParams {
    /// Checks the configuration ranges. `theta` must lie in `(0, 1)` here;
    /// [`MfssState::new`] alone also accepts `theta >= 1` (a predictor that
    /// only fires on overload).
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::param(
                "mfss.theta",
                format!("must be in (0, 1), got {}", self.theta),
            ));
        }
        self.validate_common()
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(Error::param(
                "mfss.theta",
                format!("must be positive, got {}", self.theta),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param(
                "mfss.alpha",
                format!("must be in (0, 1], got {}", self.alpha),
            ));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::param(
                "mfss.epsilon",
                format!("must be >= 0, got {}", self.epsilon),
            ));
        }
        if self.k == 0 {
            return Err(Error::param("mfss.k", "must be at least 1"));
        }
        Ok(())
    }
}

/// Per-link utilization estimates and the active routing plane.
#[derive(Debug, Clone)]
pub struct MfssState {
    params: MfssParams,
    ewma: BTreeMap<DirLink, f64>,
    plane: Plane,
    activations: usize,
}

impl MfssState {
    pub fn new(params: MfssParams) -> Result<Self> {
        params.validate_common()?;
        Ok(Self {
            params,
            ewma: BTreeMap::new(),
            plane: Plane::Ip,
            activations: 0,
        })
    }

    pub fn params(&self) -> &MfssParams {
        &self.params
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    /// Number of IP -> auxiliary transitions so far.
    pub fn activations(&self) -> usize {
        self.activations
    }

    pub fn estimate(&self, link: DirLink) -> f64 {
        self.ewma.get(&link).copied().unwrap_or(0.0)
    }

    /// Applies one predictor step and switches planes accordingly.
    fn step(&mut self, loads: &LinkLoadMap, snap: &TopologySnapshot) -> Result<BTreeSet<DirLink>> {
        let flagged = detect_congestion(self, loads, |l| l.capacity(snap))?;
        if !flagged.is_empty() {
            if self.plane == Plane::Ip {
                self.activations += 1;
            }
            self.plane = Plane::Auxiliary;
        } else if self.params.deactivate_below_half_theta
            && self.plane == Plane::Auxiliary
            && self.ewma.values().all(|&e| e < self.params.theta / 2.0)
        {
            self.plane = Plane::Ip;
        }
        Ok(flagged)
    }
}

/// EWMA update `e <- alpha * load / capacity + (1 - alpha) * e` on every
/// link that is loaded or already tracked; returns links with `e >= theta`.
/// A link's first sample seeds its estimate.
pub fn detect_congestion(
    state: &mut MfssState,
    loads: &LinkLoadMap,
    capacity: impl Fn(DirLink) -> f64,
) -> Result<BTreeSet<DirLink>> {
    let alpha = state.params.alpha;
    let keys: BTreeSet<DirLink> = loads
        .iter()
        .map(|(l, _)| l)
        .chain(state.ewma.keys().copied())
        .collect();
    let mut flagged = BTreeSet::new();
    for link in keys {
        let cap = capacity(link);
        if !(cap > 0.0) {
            return Err(Error::ZeroCapacity(format!("link {}", link.link)));
        }
        let sample = loads.load(link) / cap;
        let e = state
            .ewma
            .entry(link)
            .and_modify(|e| *e = alpha * sample + (1.0 - alpha) * *e)
            .or_insert(sample);
        if *e >= state.params.theta {
            flagged.insert(link);
        }
    }
    Ok(flagged)
}

/// Routes `demands` in processing order, switching planes as the predictor
/// dictates. Unroutable flows are reported per flow.
pub fn mfss_assign(
    snap: &TopologySnapshot,
    demands: &[FlowDemand],
    state: &mut MfssState,
) -> Result<FlowAssignment> {
    let ordered = processing_order(demands);
    let params = state.params.clone();
    let mut loads = LinkLoadMap::new();
    let mut flagged = BTreeSet::new();
    let mut eps: HashMap<usize, Result<Vec<Path>>> = HashMap::new();
    let mut flows = Vec::with_capacity(ordered.len());

    for (i, d) in ordered.iter().enumerate() {
        let plane = state.plane();
        let routed = match plane {
            Plane::Ip => endpoints(snap, d).and_then(|(s, t)| shortest_path(snap, s, t)),
            Plane::Auxiliary => {
                if !eps.contains_key(&i) {
                    // the auxiliary plane rarely switches off again, so
                    // fill the cache for every remaining flow at once
                    let fresh: Vec<(usize, Result<Vec<Path>>)> = (i..ordered.len())
                        .into_par_iter()
                        .filter(|j| !eps.contains_key(j))
                        .map(|j| (j, equivalent_set(snap, &ordered[j], &params)))
                        .collect();
                    eps.extend(fresh);
                }
                match &eps[&i] {
                    Ok(set) => {
                        Ok(pick_auxiliary(snap, set, &loads, &flagged, d.offered_rate).clone())
                    }
                    Err(e) => Err(Error::InvalidTopology(e.to_string())),
                }
            }
        };
        let flow = match routed {
            Ok(path) => {
                loads.add_path(&path, d.offered_rate);
                let mut f = RoutedFlow::routed(d.clone(), path);
                f.plane = Some(plane);
                f
            }
            Err(e) => RoutedFlow::unroutable(d.clone(), e.to_string()),
        };
        flows.push(flow);
        flagged = state.step(&loads, snap)?;
    }
    Ok(FlowAssignment {
        algorithm: Algorithm::Mfss,
        time_s: snap.time_s,
        flows,
    })
}

fn equivalent_set(
    snap: &TopologySnapshot,
    d: &FlowDemand,
    params: &MfssParams,
) -> Result<Vec<Path>> {
    let (s, t) = endpoints(snap, d)?;
    let ksp = k_shortest_paths(snap, s, t, params.k)?;
    Ok(equivalent_paths(&ksp, params.epsilon))
}

/// Among `set`, prefer paths clear of flagged links, then the lowest
/// post-assignment utilization of the busiest hop, then lower delay.
fn pick_auxiliary<'p>(
    snap: &TopologySnapshot,
    set: &'p [Path],
    loads: &LinkLoadMap,
    flagged: &BTreeSet<DirLink>,
    rate: f64,
) -> &'p Path {
    let best_of = |clear_only: bool| {
        set.iter()
            .filter(|p| !clear_only || p.hops.iter().all(|h| !flagged.contains(h)))
            .map(|p| (loads.utilization_with(snap, p, rate), p))
            .fold(None, |acc: Option<(f64, &Path)>, (u, p)| match acc {
                Some((bu, _)) if bu <= u => acc,
                _ => Some((u, p)),
            })
            .map(|(_, p)| p)
    };
    best_of(true)
        .or_else(|| best_of(false))
        .expect("equivalent set is never empty")
}
