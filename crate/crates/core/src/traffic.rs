//! City demand matrices and realized throughput under max-min fair sharing.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbital::EARTH_RADIUS_KM;
use crate::routing::{Algorithm, DirLink, FlowAssignment, LinkLoadMap};
use crate::topology::{GroundStation, TopologySnapshot};

const DEFAULT_CITIES: &str = include_str!("../data/cities.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct City {
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    /// Traffic mass.
    pub weight: f64,
}

impl City {
    pub fn new(name: impl Into<String>, lat_deg: f64, lon_deg: f64, weight: f64) -> Result<Self> {
        let c = Self {
            name: name.into(),
            lat_deg,
            lon_deg,
            weight,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidTraffic(format!("city `{}`: {reason}", self.name));
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(bad(format!("weight must be positive, got {}", self.weight)));
        }
        if !(-90.0..=90.0).contains(&self.lat_deg) {
            return Err(bad(format!("latitude {} outside [-90, 90]", self.lat_deg)));
        }
        if !(-180.0..=180.0).contains(&self.lon_deg) {
            return Err(bad(format!(
                "longitude {} outside [-180, 180]",
                self.lon_deg
            )));
        }
        Ok(())
    }

    pub fn station(&self, min_elevation_deg: f64) -> Result<GroundStation> {
        GroundStation::new(
            self.name.clone(),
            self.lat_deg,
            self.lon_deg,
            min_elevation_deg,
        )
    }
}

/// Traffic offered from city `src` to city `dst` (indices into the city
/// list, which is also the ground-station list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDemand {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    pub offered_rate: f64,
}

/// The order in which schedulers admit demands: by (src, dst), then by
/// descending offered rate, then by id.
pub fn processing_order(demands: &[FlowDemand]) -> Vec<FlowDemand> {
    let mut v = demands.to_vec();
    v.sort_by(|a, b| {
        (a.src, a.dst)
            .cmp(&(b.src, b.dst))
            .then(b.offered_rate.total_cmp(&a.offered_rate))
            .then(a.id.cmp(&b.id))
    });
    v
}

fn check_total(total_rate: f64) -> Result<()> {
    if !(total_rate > 0.0 && total_rate.is_finite()) {
        return Err(Error::param(
            "traffic.total_rate",
            format!("must be positive, got {total_rate}"),
        ));
    }
    Ok(())
}

fn normalized(cities: &[City], pairs: &[(usize, usize)], total_rate: f64) -> Vec<FlowDemand> {
    let mass = |&(i, j): &(usize, usize)| cities[i].weight * cities[j].weight;
    let sum: f64 = pairs.iter().map(mass).sum();
    pairs
        .iter()
        .enumerate()
        .map(|(id, p)| FlowDemand {
            id,
            src: p.0,
            dst: p.1,
            offered_rate: total_rate * mass(p) / sum,
        })
        .collect()
}

/// One demand per ordered city pair, proportional to the product of the two
/// weights and scaled so the demands sum to `total_rate`.
pub fn gravity_demands(cities: &[City], total_rate: f64) -> Result<Vec<FlowDemand>> {
    if cities.len() < 2 {
        return Err(Error::InvalidTraffic(format!(
            "need at least 2 cities, got {}",
            cities.len()
        )));
    }
    check_total(total_rate)?;
    for c in cities {
        c.validate()?;
    }
    let pairs: Vec<_> = (0..cities.len())
        .flat_map(|i| {
            (0..cities.len())
                .filter(move |&j| j != i)
                .map(move |j| (i, j))
        })
        .collect();
    Ok(normalized(cities, &pairs, total_rate))
}

/// Great-circle distance on the spherical Earth.
pub fn great_circle_km(a: &City, b: &City) -> f64 {
    let (la, lb) = (a.lat_deg.to_radians(), b.lat_deg.to_radians());
    let dlat = lb - la;
    let dlon = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la.cos() * lb.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Gravity demands over the heaviest pairs only: pairs at least
/// `min_distance_km` apart are taken in descending mass order while neither
/// endpoint has reached `max_degree` outgoing (source) or incoming
/// (destination) demands.
pub fn hotspot_demands(
    cities: &[City],
    total_rate: f64,
    max_degree: usize,
    min_distance_km: f64,
) -> Result<Vec<FlowDemand>> {
    if cities.len() < 2 {
        return Err(Error::InvalidTraffic(format!(
            "need at least 2 cities, got {}",
            cities.len()
        )));
    }
    check_total(total_rate)?;
    if max_degree == 0 {
        return Err(Error::param("traffic.max_degree", "must be at least 1"));
    }
    for c in cities {
        c.validate()?;
    }
    let n = cities.len();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .filter(|&(i, j)| great_circle_km(&cities[i], &cities[j]) >= min_distance_km)
        .collect();
    pairs.sort_by(|a, b| {
        let ma = cities[a.0].weight * cities[a.1].weight;
        let mb = cities[b.0].weight * cities[b.1].weight;
        mb.total_cmp(&ma).then(a.cmp(b))
    });
    let (mut out, mut inn) = (vec![0; n], vec![0; n]);
    let mut chosen = Vec::new();
    for (i, j) in pairs {
        if out[i] < max_degree && inn[j] < max_degree {
            out[i] += 1;
            inn[j] += 1;
            chosen.push((i, j));
        }
    }
    if chosen.is_empty() {
        return Err(Error::InvalidTraffic(format!(
            "no city pair is at least {min_distance_km} km apart"
        )));
    }
    chosen.sort();
    Ok(normalized(cities, &chosen, total_rate))
}

#[derive(Debug, Deserialize)]
struct CityRow {
    name: String,
    lat: f64,
    lon: f64,
    weight: f64,
}

fn parse_cities<R: std::io::Read>(rdr: R, origin: &FsPath) -> Result<Vec<City>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(rdr);
    let mut out = Vec::new();
    for row in reader.deserialize::<CityRow>() {
        let row = row.map_err(|e| Error::Csv {
            path: origin.to_path_buf(),
            source: e,
        })?;
        out.push(City::new(row.name, row.lat, row.lon, row.weight)?);
    }
    Ok(out)
}

/// Reads a `name,lat,lon,weight` city list.
pub fn read_cities(path: &FsPath) -> Result<Vec<City>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_cities(f, path)
}

/// The bundled 18-city list (Europe, Asia, North America, six each).
pub fn default_cities() -> Vec<City> {
    parse_cities(
        DEFAULT_CITIES.as_bytes(),
        FsPath::new("<bundled cities.csv>"),
    )
    .expect("bundled city list is valid")
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandRow {
    id: usize,
    src: String,
    dst: String,
    offered_rate: f64,
}

/// Writes demands as `id,src,dst,offered_rate` with city names.
pub fn write_demands<W: Write>(w: W, cities: &[City], demands: &[FlowDemand]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for d in demands {
        wr.serialize(DemandRow {
            id: d.id,
            src: cities[d.src].name.clone(),
            dst: cities[d.dst].name.clone(),
            offered_rate: d.offered_rate,
        })
        .map_err(|e| Error::Csv {
            path: "<demands>".into(),
            source: e,
        })?;
    }
    wr.flush().map_err(|e| Error::io("<demands>", e))?;
    Ok(())
}

/// Reads an externally supplied demand matrix, resolving city names.
pub fn read_demands(path: &FsPath, cities: &[City]) -> Result<Vec<FlowDemand>> {
    let index: HashMap<&str, usize> = cities
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(f);
    let mut out = Vec::new();
    for row in reader.deserialize::<DemandRow>() {
        let row = row.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        let look = |name: &str| {
            index.get(name).copied().ok_or_else(|| {
                Error::InvalidTraffic(format!("{}: unknown city `{name}`", path.display()))
            })
        };
        let (src, dst) = (look(&row.src)?, look(&row.dst)?);
        if src == dst {
            return Err(Error::InvalidTraffic(format!(
                "{}: demand {} has src == dst",
                path.display(),
                row.id
            )));
        }
        if !(row.offered_rate > 0.0) {
            return Err(Error::InvalidTraffic(format!(
                "{}: demand {} has non-positive rate {}",
                path.display(),
                row.id,
                row.offered_rate
            )));
        }
        out.push(FlowDemand {
            id: row.id,
            src,
            dst,
            offered_rate: row.offered_rate,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRate {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    pub offered: f64,
    pub rate: f64,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkUse {
    pub link: DirLink,
    pub carried: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub algorithm: Algorithm,
    pub time_s: f64,
    /// In assignment order.
    pub flows: Vec<FlowRate>,
    /// Loaded links, in link order.
    pub links: Vec<LinkUse>,
    /// Busiest link under offered (not realized) load.
    pub max_offered_utilization: f64,
}

impl ThroughputReport {
    pub fn rates(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.rate).collect()
    }

    pub fn max_link_utilization(&self) -> f64 {
        self.links.iter().map(|l| l.utilization).fold(0.0, f64::max)
    }
}

/// Progressive filling: every unfrozen flow's rate rises at the same pace; a
/// flow freezes when it reaches its offered rate or a link on its path
/// saturates. Unroutable flows get rate 0 and keep their reason.
pub fn max_min_fair_throughput(
    assignment: &FlowAssignment,
    snap: &TopologySnapshot,
) -> ThroughputReport {
    let flows = &assignment.flows;
    let mut rate = vec![0.0; flows.len()];
    let mut frozen: Vec<bool> = flows
        .iter()
        .map(|f| f.path.is_none() || !(f.demand.offered_rate > 0.0))
        .collect();

    let mut users: BTreeMap<DirLink, Vec<usize>> = BTreeMap::new();
    for (i, f) in flows.iter().enumerate() {
        if let Some(p) = &f.path {
            for h in &p.hops {
                users.entry(*h).or_default().push(i);
            }
        }
    }
    let mut residual: BTreeMap<DirLink, f64> =
        users.keys().map(|l| (*l, l.capacity(snap))).collect();
    let tol = |x: f64| 1e-12 * x.abs().max(1.0);

    while frozen.iter().any(|f| !*f) {
        let mut step = f64::INFINITY;
        for (i, f) in flows.iter().enumerate() {
            if !frozen[i] {
                step = step.min(f.demand.offered_rate - rate[i]);
            }
        }
        for (l, us) in &users {
            let n = us.iter().filter(|&&i| !frozen[i]).count();
            if n > 0 {
                step = step.min(residual[l] / n as f64);
            }
        }
        let step = step.max(0.0);
        for (l, us) in &users {
            let n = us.iter().filter(|&&i| !frozen[i]).count();
            let r = residual.get_mut(l).expect("tracked");
            *r = (*r - step * n as f64).max(0.0);
        }
        for i in 0..flows.len() {
            if !frozen[i] {
                rate[i] += step;
                let offered = flows[i].demand.offered_rate;
                if offered - rate[i] <= tol(offered) {
                    rate[i] = offered;
                    frozen[i] = true;
                }
            }
        }
        for (l, us) in &users {
            if residual[l] <= tol(l.capacity(snap)) {
                for &i in us {
                    frozen[i] = true;
                }
            }
        }
    }

    let flow_rates = flows
        .iter()
        .zip(&rate)
        .map(|(f, &r)| FlowRate {
            id: f.demand.id,
            src: f.demand.src,
            dst: f.demand.dst,
            offered: f.demand.offered_rate,
            rate: r,
            reason: if f.path.is_none() {
                f.note.clone()
            } else {
                None
            },
        })
        .collect();
    let links = users
        .iter()
        .map(|(l, us)| {
            let carried: f64 = us.iter().map(|&i| rate[i]).sum();
            LinkUse {
                link: *l,
                carried,
                utilization: carried / l.capacity(snap),
            }
        })
        .collect();
    ThroughputReport {
        algorithm: assignment.algorithm,
        time_s: assignment.time_s,
        flows: flow_rates,
        links,
        max_offered_utilization: LinkLoadMap::from_assignment(assignment).max_utilization(snap),
    }
}
