//! Time-stamped network graphs: +Grid inter-satellite links, ground-satellite
//! links by visibility, propagation delays and capacities.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path as FsPath;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::orbital::{
    build_constellation, elevation_deg, geocentric_lat_lon, propagate, ConstellationSpec,
    SatElements, SatPosition, EARTH_RADIUS_KM,
};

/// Speed of light in vacuum, km/s.
pub const LIGHT_SPEED_KM_S: f64 = 299_792.458;

/// Default inter-satellite link capacity in capacity units (1 unit = 1 Mbit/s).
pub const DEFAULT_ISL_CAPACITY: f64 = 400.0;
/// Laser-terminal capacity, 100 Gbit/s.
pub const LASER_ISL_CAPACITY: f64 = 100_000.0;
pub const DEFAULT_GSL_CAPACITY: f64 = 400.0;

pub type NodeIx = usize;
pub type LinkId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Satellite { shell: u32, plane: u32, slot: u32 },
    Ground(u32),
}

impl NodeId {
    pub fn is_ground(&self) -> bool {
        matches!(self, NodeId::Ground(_))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Satellite { shell, plane, slot } => write!(f, "sat-{shell}-{plane}-{slot}"),
            NodeId::Ground(i) => write!(f, "gs-{i}"),
        }
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidTopology(format!("malformed node id `{s}`"));
        if let Some(rest) = s.strip_prefix("gs-") {
            return rest.parse().map(NodeId::Ground).map_err(|_| bad());
        }
        let rest = s.strip_prefix("sat-").ok_or_else(bad)?;
        let parts: Vec<u32> = rest
            .split('-')
            .map(|p| p.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match parts[..] {
            [shell, plane, slot] => Ok(NodeId::Satellite { shell, plane, slot }),
            _ => Err(bad()),
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Isl,
    Gsl,
}

/// Undirected link. `ends` is stored in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub ends: [NodeId; 2],
    pub delay_ms: f64,
    pub capacity: f64,
    pub kind: LinkKind,
}

impl Link {
    pub fn new(u: NodeId, v: NodeId, delay_ms: f64, capacity: f64, kind: LinkKind) -> Self {
        let ends = if u <= v { [u, v] } else { [v, u] };
        Self {
            ends,
            delay_ms,
            capacity,
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStation {
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    #[serde(default = "default_min_elevation")]
    pub min_elevation_deg: f64,
}

fn default_min_elevation() -> f64 {
    GroundStation::DEFAULT_MIN_ELEVATION_DEG
}

impl GroundStation {
    pub const DEFAULT_MIN_ELEVATION_DEG: f64 = 25.0;

    pub fn new(
        name: impl Into<String>,
        lat_deg: f64,
        lon_deg: f64,
        min_elevation_deg: f64,
    ) -> Result<Self> {
        let gs = Self {
            name: name.into(),
            lat_deg,
            lon_deg,
            min_elevation_deg,
        };
        gs.validate()?;
        Ok(gs)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidStation {
                name: self.name.clone(),
                reason,
            })
        };
        if !(self.lat_deg.abs() <= 90.0) {
            return fail(format!("latitude {} outside [-90, 90]", self.lat_deg));
        }
        if !(self.lon_deg.abs() <= 180.0) {
            return fail(format!("longitude {} outside [-180, 180]", self.lon_deg));
        }
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            return fail(format!(
                "minimum elevation {} outside [0, 90)",
                self.min_elevation_deg
            ));
        }
        Ok(())
    }

    pub fn position(&self) -> SatPosition {
        SatPosition::from_geodetic(self.lat_deg, self.lon_deg, EARTH_RADIUS_KM)
    }
}

#[derive(Debug, Deserialize)]
struct StationRow {
    name: String,
    lat: f64,
    lon: f64,
}

/// Reads a `name,lat,lon` file (header row required, `#` comments allowed).
pub fn read_stations(path: &FsPath, min_elevation_deg: f64) -> Result<Vec<GroundStation>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<StationRow>() {
        let row = row.map_err(csv_err)?;
        out.push(GroundStation::new(
            row.name,
            row.lat,
            row.lon,
            min_elevation_deg,
        )?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridPolicy {
    /// Keep inter-plane links between the last and first plane of a shell.
    pub seam_links: bool,
    /// Drop inter-plane links whose endpoints are above this |latitude|.
    pub polar_cutoff_deg: Option<f64>,
    /// Build inter-satellite links at all; `false` yields a relay-only graph.
    pub isl_enabled: bool,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            seam_links: true,
            polar_cutoff_deg: Some(70.0),
            isl_enabled: true,
        }
    }
}

impl GridPolicy {
    pub fn full() -> Self {
        Self {
            polar_cutoff_deg: None,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CapacityProfile {
    pub isl: f64,
    pub gsl: f64,
}

impl Default for CapacityProfile {
    fn default() -> Self {
        Self {
            isl: DEFAULT_ISL_CAPACITY,
            gsl: DEFAULT_GSL_CAPACITY,
        }
    }
}

impl CapacityProfile {
    pub fn laser() -> Self {
        Self {
            isl: LASER_ISL_CAPACITY,
            ..Self::default()
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "laser" => Ok(Self::laser()),
            other => Err(Error::param(
                "capacity.profile",
                format!("unknown profile `{other}`"),
            )),
        }
    }
}

/// A constellation expanded into per-satellite elements.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub spec: ConstellationSpec,
    pub elements: Vec<SatElements>,
}

impl Constellation {
    pub fn new(spec: ConstellationSpec) -> Result<Self> {
        let elements = build_constellation(&spec)?;
        Ok(Self { spec, elements })
    }

    pub fn node_id(el: &SatElements) -> NodeId {
        NodeId::Satellite {
            shell: el.shell_index,
            plane: el.plane_index,
            slot: el.slot_index,
        }
    }

    pub fn inertial_positions(&self, t: f64) -> Vec<SatPosition> {
        self.elements.iter().map(|el| propagate(el, t)).collect()
    }

    fn shell_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.spec.shells.len());
        let mut acc = 0;
        for shell in &self.spec.shells {
            offsets.push(acc);
            acc += shell.satellite_count();
        }
        offsets
    }
}

pub fn link_delay(a: &SatPosition, b: &SatPosition) -> f64 {
    a.distance_km(b) / LIGHT_SPEED_KM_S * 1000.0
}

/// +Grid inter-satellite links: ring neighbours in-plane, same slot in the
/// adjacent planes.
pub fn build_isl_grid(
    c: &Constellation,
    t: f64,
    policy: &GridPolicy,
    capacity: f64,
) -> Result<Vec<Link>> {
    if c.elements.is_empty() {
        return Err(Error::InvalidTopology("empty constellation".into()));
    }
    if !policy.isl_enabled {
        return Ok(Vec::new());
    }
    if let Some(shell) = c.spec.shells.iter().find(|s| s.sats_per_plane < 3) {
        return Err(Error::InvalidTopology(format!(
            "+Grid needs at least 3 satellites per plane, shell has {}",
            shell.sats_per_plane
        )));
    }
    let pos = c.inertial_positions(t);
    let lat: Vec<f64> = pos.iter().map(|p| geocentric_lat_lon(p).0).collect();
    let mut pairs = BTreeSet::new();
    for (shell, base) in c.spec.shells.iter().zip(c.shell_offsets()) {
        let planes = shell.num_planes as usize;
        let per = shell.sats_per_plane as usize;
        let idx = |p: usize, s: usize| base + p * per + s;
        for p in 0..planes {
            for s in 0..per {
                let here = idx(p, s);
                let next = idx(p, (s + 1) % per);
                pairs.insert((here.min(next), here.max(next)));

                if planes < 2 {
                    continue;
                }
                let q = (p + 1) % planes;
                if q == 0 && !policy.seam_links {
                    continue;
                }
                let there = idx(q, s);
                if let Some(cut) = policy.polar_cutoff_deg {
                    if lat[here].abs() > cut || lat[there].abs() > cut {
                        continue;
                    }
                }
                pairs.insert((here.min(there), here.max(there)));
            }
        }
    }
    Ok(pairs
        .into_iter()
        .map(|(i, j)| {
            Link::new(
                Constellation::node_id(&c.elements[i]),
                Constellation::node_id(&c.elements[j]),
                link_delay(&pos[i], &pos[j]),
                capacity,
                LinkKind::Isl,
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnattachedStation {
    pub index: usize,
    pub name: String,
}

#[derive(Debug, Clone, Default)]
pub struct GroundAttachment {
    pub links: Vec<Link>,
    /// Serving satellite per station, `None` when nothing is above the mask.
    pub serving: Vec<Option<NodeId>>,
    pub unattached: Vec<UnattachedStation>,
}

/// Single-homes each station on the visible satellite with the highest
/// elevation. Ties go to the lower node id.
pub fn attach_ground_stations(
    c: &Constellation,
    t: f64,
    stations: &[GroundStation],
    capacity: f64,
) -> Result<GroundAttachment> {
    let pos = earth_fixed_positions(c, t);
    let mut out = GroundAttachment::default();
    for (i, gs) in stations.iter().enumerate() {
        gs.validate()?;
        let here = gs.position();
        let mut best: Option<(f64, usize)> = None;
        for (j, p) in pos.iter().enumerate() {
            let el = elevation_deg(&here, p);
            if el < gs.min_elevation_deg {
                continue;
            }
            if best.is_none_or(|(b, _)| el > b) {
                best = Some((el, j));
            }
        }
        match best {
            Some((_, j)) => {
                let sat = Constellation::node_id(&c.elements[j]);
                out.links.push(Link::new(
                    NodeId::Ground(i as u32),
                    sat,
                    link_delay(&here, &pos[j]),
                    capacity,
                    LinkKind::Gsl,
                ));
                out.serving.push(Some(sat));
            }
            None => {
                out.serving.push(None);
                out.unattached.push(UnattachedStation {
                    index: i,
                    name: gs.name.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Immutable network graph at one instant.
#[derive(Debug, Clone)]
pub struct TopologySnapshot {
    pub time_s: f64,
    nodes: Vec<NodeId>,
    links: Vec<Link>,
    link_ends: Vec<(NodeIx, NodeIx)>,
    adjacency: Vec<Vec<(NodeIx, LinkId)>>,
    pub station_names: Vec<String>,
    pub unattached: Vec<UnattachedStation>,
}

impl TopologySnapshot {
    /// Builds a snapshot from explicit nodes and links. Rejects self-loops,
    /// parallel links, unknown endpoints, negative delays and non-positive
    /// capacities.
    pub fn from_links(
        time_s: f64,
        nodes: impl IntoIterator<Item = NodeId>,
        links: Vec<Link>,
    ) -> Result<Self> {
        let nodes: Vec<NodeId> = nodes
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut links = links;
        links.sort_by_key(|l| l.ends);
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut link_ends = Vec::with_capacity(links.len());
        let ix = |n: &NodeId| {
            nodes
                .binary_search(n)
                .map_err(|_| Error::InvalidTopology(format!("link endpoint {n} is not a node")))
        };
        for (id, link) in links.iter().enumerate() {
            if link.ends[0] == link.ends[1] {
                return Err(Error::InvalidTopology(format!(
                    "self-loop at {}",
                    link.ends[0]
                )));
            }
            if id > 0 && links[id - 1].ends == link.ends {
                return Err(Error::InvalidTopology(format!(
                    "parallel links between {} and {}",
                    link.ends[0], link.ends[1]
                )));
            }
            if !(link.delay_ms >= 0.0) || !link.delay_ms.is_finite() {
                return Err(Error::InvalidTopology(format!(
                    "bad delay {} on a link",
                    link.delay_ms
                )));
            }
            if !(link.capacity > 0.0) {
                return Err(Error::ZeroCapacity(format!(
                    "{}-{}",
                    link.ends[0], link.ends[1]
                )));
            }
            let (a, b) = (ix(&link.ends[0])?, ix(&link.ends[1])?);
            adjacency[a].push((b, id));
            adjacency[b].push((a, id));
            link_ends.push((a, b));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self {
            time_s,
            nodes,
            links,
            link_ends,
            adjacency,
            station_names: Vec::new(),
            unattached: Vec::new(),
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, ix: NodeIx) -> NodeId {
        self.nodes[ix]
    }

    pub fn index_of(&self, id: &NodeId) -> Option<NodeIx> {
        self.nodes.binary_search(id).ok()
    }

    pub fn ground(&self, station: usize) -> Option<NodeIx> {
        self.index_of(&NodeId::Ground(station as u32))
    }

    /// Neighbours of `ix` in ascending node order, with the connecting link.
    pub fn neighbors(&self, ix: NodeIx) -> &[(NodeIx, LinkId)] {
        &self.adjacency[ix]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    /// Endpoint indices `(lo, hi)` of a link.
    pub fn link_ends(&self, id: LinkId) -> (NodeIx, NodeIx) {
        self.link_ends[id]
    }

    pub fn link_between(&self, u: NodeIx, v: NodeIx) -> Option<LinkId> {
        let adj = &self.adjacency[u];
        adj.binary_search_by(|(n, _)| n.cmp(&v))
            .ok()
            .map(|i| adj[i].1)
    }

    /// One JSON object per node, then one per link.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<snapshot>", e);
        for (ix, node) in self.nodes.iter().enumerate() {
            let mut obj = serde_json::json!({
                "type": "node",
                "id": node,
                "degree": self.adjacency[ix].len(),
            });
            if let NodeId::Ground(i) = node {
                if let Some(name) = self.station_names.get(*i as usize) {
                    obj["name"] = name.clone().into();
                }
            }
            writeln!(w, "{obj}").map_err(io)?;
        }
        for link in &self.links {
            let obj = serde_json::json!({
                "type": "link",
                "a": link.ends[0],
                "b": link.ends[1],
                "kind": link.kind,
                "delay_ms": link.delay_ms,
                "capacity": link.capacity,
            });
            writeln!(w, "{obj}").map_err(io)?;
        }
        Ok(())
    }

    /// SHA-256 of the JSON-lines export, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        let digest = Sha256::digest(&buf);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Full snapshot: all satellites, all stations (unattached ones isolated),
/// +Grid ISLs and single-homed GSLs at time `t`.
pub fn snapshot(
    c: &Constellation,
    stations: &[GroundStation],
    t: f64,
    policy: &GridPolicy,
    capacity: &CapacityProfile,
) -> Result<TopologySnapshot> {
    if !(capacity.isl > 0.0) || !(capacity.gsl > 0.0) {
        return Err(Error::ZeroCapacity("capacity profile".into()));
    }
    let mut links = build_isl_grid(c, t, policy, capacity.isl)?;
    let ground = attach_ground_stations(c, t, stations, capacity.gsl)?;
    links.extend(ground.links);
    let nodes = c
        .elements
        .iter()
        .map(Constellation::node_id)
        .chain((0..stations.len()).map(|i| NodeId::Ground(i as u32)));
    let mut snap = TopologySnapshot::from_links(t, nodes, links)?;
    snap.station_names = stations.iter().map(|s| s.name.clone()).collect();
    snap.unattached = ground.unattached;
    Ok(snap)
}

pub fn earth_fixed_positions(c: &Constellation, t: f64) -> Vec<SatPosition> {
    c.inertial_positions(t)
        .into_iter()
        .map(|p| p.to_earth_fixed(t))
        .collect()
}
