//! Scenario files: a TOML tree describing constellation, ground segment,
//! traffic, time sampling and scheduler knobs, plus `key=value` overrides.

use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::SchedulerParams;
use crate::orbital::{ConstellationSpec, ShellSpec};
use crate::routing::{Algorithm, B4Params, ElbParams, MfssParams};
use crate::topology::{
    self, CapacityProfile, Constellation, GridPolicy, GroundStation, TopologySnapshot,
};
use crate::traffic::{self, City, FlowDemand};

/// Every config key with a one-line description, for `--help`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("seed", "64-bit seed for every random choice (default 42)"),
    ("output_dir", "directory for output files, relative to the working directory"),
    ("threads", "worker threads, 0 = all cores"),
    ("scheduler", "ospf | elb | b4 | mfss, used by `simulate`"),
    ("constellation.preset", "iridium | globalstar | oneweb | starlink_sim | kuiper | telesat"),
    ("constellation.shells", "inline shells instead of a preset: [[constellation.shells]] altitude_km, inclination_deg, num_planes, sats_per_plane, phasing_factor, raan_spread_deg"),
    ("grid.seam_links", "keep inter-plane links across the seam (bool)"),
    ("grid.polar_cutoff_deg", "drop inter-plane links above this |latitude|, (0, 90]; 90 keeps all"),
    ("grid.isl_enabled", "build inter-satellite links (bool)"),
    ("capacity.profile", "default (ISL 400) | laser (ISL 100000)"),
    ("capacity.isl", "ISL capacity per direction, overrides the profile"),
    ("capacity.gsl", "ground-satellite link capacity per direction"),
    ("cities.file", "name,lat,lon,weight list; relative to the config file; bundled 18 cities if unset"),
    ("cities.min_elevation_deg", "elevation mask for ground stations, [0, 90)"),
    ("traffic.total_rate", "sum of offered rates over all demands, > 0"),
    ("traffic.selection", "hotspot (heaviest pairs under a degree cap) | all (every ordered pair)"),
    ("traffic.max_degree", "hotspot: max demands a city sources and max it sinks"),
    ("traffic.min_distance_km", "hotspot: skip pairs closer than this great-circle distance"),
    ("traffic.demand_file", "id,src,dst,offered_rate matrix; replaces generated demands"),
    ("time.t", "first snapshot time, seconds"),
    ("time.step_s", "spacing between snapshots, seconds, > 0"),
    ("time.count", "number of snapshots, >= 1"),
    ("mfss.theta", "congestion threshold on smoothed utilization, (0, 1)"),
    ("mfss.alpha", "EWMA weight of the newest sample, (0, 1]"),
    ("mfss.epsilon", "equivalent-path delay tolerance, >= 0"),
    ("mfss.k", "K-shortest search width, >= 1"),
    ("mfss.deactivate_below_half_theta", "leave the auxiliary plane once all estimates < theta/2"),
    ("elb.busy_threshold", "utilization above which a node deflects, > 0"),
    ("elb.deflection_fraction", "share of transiting flows deflected, [0, 1]"),
    ("elb.ttl", "extra hops allowed beyond the shortest path"),
    ("b4.k", "candidate paths per flow, >= 1"),
    ("profile.pairs", "city pairs for delay profiles, e.g. [[\"New York\", \"London\"]]"),
    ("profile.k", "paths per profile, >= 1"),
    ("profile.epsilon", "tolerance reported in the profile summary"),
];

/// Uses `starlink_sim` when neither field is set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub shells: Vec<ShellSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub seam_links: bool,
    pub polar_cutoff_deg: f64,
    pub isl_enabled: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            seam_links: true,
            polar_cutoff_deg: 70.0,
            isl_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySection {
    pub profile: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gsl: Option<f64>,
}

impl Default for CapacitySection {
    fn default() -> Self {
        Self {
            profile: "default".into(),
            isl: None,
            gsl: Some(4000.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CitiesSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    pub min_elevation_deg: f64,
}

impl Default for CitiesSection {
    fn default() -> Self {
        Self {
            file: None,
            min_elevation_deg: GroundStation::DEFAULT_MIN_ELEVATION_DEG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    All,
    Hotspot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSection {
    pub total_rate: f64,
    pub selection: Selection,
    pub max_degree: usize,
    pub min_distance_km: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demand_file: Option<PathBuf>,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            total_rate: 10_000.0,
            selection: Selection::Hotspot,
            max_degree: 2,
            min_distance_km: 3000.0,
            demand_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub t: f64,
    pub step_s: f64,
    pub count: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t: 0.0,
            step_s: 60.0,
            count: 1,
        }
    }
}

impl TimeSection {
    pub fn instants(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.t + i as f64 * self.step_s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub pairs: Vec<[String; 2]>,
    pub k: usize,
    pub epsilon: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        let pair = |a: &str, b: &str| [a.to_string(), b.to_string()];
        Self {
            pairs: vec![
                pair("New York", "London"),
                pair("Singapore", "Frankfurt"),
                pair("Tokyo", "Los Angeles"),
            ],
            k: 30,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: usize,
    pub scheduler: Algorithm,
    pub constellation: ConstellationSection,
    pub grid: GridSection,
    pub capacity: CapacitySection,
    pub cities: CitiesSection,
    pub traffic: TrafficSection,
    pub time: TimeSection,
    pub mfss: MfssParams,
    pub elb: ElbParams,
    pub b4: B4Params,
    pub profile: ProfileSection,
    /// Directory relative file references resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: "out".into(),
            threads: 0,
            scheduler: Algorithm::Mfss,
            constellation: ConstellationSection::default(),
            grid: GridSection::default(),
            capacity: CapacitySection::default(),
            cities: CitiesSection::default(),
            traffic: TrafficSection::default(),
            time: TimeSection::default(),
            mfss: MfssParams::default(),
            elb: ElbParams::default(),
            b4: B4Params::default(),
            profile: ProfileSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Splits `key=value`. The value is read as a TOML value, or as a bare string
/// if it does not parse as one.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::param(s, "override must look like key=value"))?;
    let key = key.trim().to_string();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::param(s, "empty key"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("nonempty key");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::param(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

/// Line (1-based) where `key` is assigned in `text`, if it is.
fn locate(text: &str, key: &str) -> Option<usize> {
    let (table, leaf) = match key.rsplit_once('.') {
        Some((t, l)) => (t, l),
        None => ("", key),
    };
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('[') {
            current = line
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        let lhs = lhs.trim();
        let full = if current.is_empty() {
            lhs.to_string()
        } else {
            format!("{current}.{lhs}")
        };
        if (current == table && lhs == leaf) || full == key {
            return Some(i + 1);
        }
    }
    None
}

impl ScenarioConfig {
    /// Reads `path`, applies overrides in order and validates.
    pub fn load(path: &FsPath, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config_err = |message: String| Error::Config {
            path: path.to_path_buf(),
            message,
        };
        // parse the file on its own first so errors carry its line numbers
        toml::from_str::<ScenarioConfig>(&text)
            .map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
        let mut table: toml::Table =
            toml::from_str(&text).map_err(|e| config_err(e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v.clone())?;
        }
        let mut cfg = ScenarioConfig::deserialize(table).map_err(|e| {
            config_err(format!(
                "after --set overrides: {}",
                e.to_string().trim_end()
            ))
        })?;
        cfg.base_dir = path
            .parent()
            .map(FsPath::to_path_buf)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."));
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { ref key, .. } => {
                let from_flag = overrides.iter().any(|(k, _)| k == key);
                match locate(&text, key) {
                    Some(line) if !from_flag => config_err(format!("line {line}: {e}")),
                    _ if from_flag => config_err(format!("--set {key}: {e}")),
                    _ => config_err(e.to_string()),
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    /// Defaults plus overrides, without a file.
    pub fn from_overrides(overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table = toml::Table::try_from(ScenarioConfig::default())
            .map_err(|e| Error::param("config", e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v.clone())?;
        }
        let cfg = ScenarioConfig::deserialize(table)
            .map_err(|e| Error::param("config", e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&self, p: &FsPath) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range = |key: &str, ok: bool, what: &str, v: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::param(key, format!("must be {what}, got {v}")))
            }
        };
        self.constellation_spec()?.validate()?;
        let g = &self.grid;
        range(
            "grid.polar_cutoff_deg",
            g.polar_cutoff_deg > 0.0 && g.polar_cutoff_deg <= 90.0,
            "in (0, 90]",
            g.polar_cutoff_deg,
        )?;
        CapacityProfile::named(&self.capacity.profile)?;
        let cap = self.capacity_profile()?;
        range(
            "capacity.isl",
            cap.isl > 0.0 && cap.isl.is_finite(),
            "positive",
            cap.isl,
        )?;
        range(
            "capacity.gsl",
            cap.gsl > 0.0 && cap.gsl.is_finite(),
            "positive",
            cap.gsl,
        )?;
        let el = self.cities.min_elevation_deg;
        range(
            "cities.min_elevation_deg",
            (0.0..90.0).contains(&el),
            "in [0, 90)",
            el,
        )?;
        let t = &self.traffic;
        range(
            "traffic.total_rate",
            t.total_rate > 0.0 && t.total_rate.is_finite(),
            "positive",
            t.total_rate,
        )?;
        range(
            "traffic.min_distance_km",
            t.min_distance_km >= 0.0,
            ">= 0",
            t.min_distance_km,
        )?;
        if t.max_degree == 0 {
            return Err(Error::param(
                "traffic.max_degree",
                "must be at least 1, got 0",
            ));
        }
        for (key, file) in [
            ("cities.file", &self.cities.file),
            ("traffic.demand_file", &t.demand_file),
        ] {
            if let Some(f) = file {
                let p = self.resolve(f);
                if !p.is_file() {
                    return Err(Error::param(
                        key,
                        format!("file not found: {}", p.display()),
                    ));
                }
            }
        }
        let tm = &self.time;
        range("time.t", tm.t.is_finite(), "finite", tm.t)?;
        range(
            "time.step_s",
            tm.step_s > 0.0 && tm.step_s.is_finite(),
            "positive",
            tm.step_s,
        )?;
        if tm.count == 0 {
            return Err(Error::param("time.count", "must be at least 1, got 0"));
        }
        self.mfss.validate()?;
        self.elb.validate()?;
        self.b4.validate()?;
        if self.profile.k == 0 {
            return Err(Error::param("profile.k", "must be at least 1, got 0"));
        }
        range(
            "profile.epsilon",
            self.profile.epsilon >= 0.0,
            ">= 0",
            self.profile.epsilon,
        )?;
        Ok(())
    }

    pub fn constellation_spec(&self) -> Result<ConstellationSpec> {
        let c = &self.constellation;
        if !c.shells.is_empty() {
            if c.preset.is_some() {
                return Err(Error::param(
                    "constellation.preset",
                    "set either `preset` or `shells`, not both",
                ));
            }
            return Ok(ConstellationSpec {
                name: "custom".into(),
                shells: c.shells.clone(),
            });
        }
        let name = c.preset.as_deref().unwrap_or("starlink_sim");
        ConstellationSpec::preset(name).map_err(|_| {
            Error::param(
                "constellation.preset",
                format!(
                    "unknown preset `{name}` (expected one of {})",
                    ConstellationSpec::PRESET_NAMES.join(", ")
                ),
            )
        })
    }

    pub fn grid_policy(&self) -> GridPolicy {
        GridPolicy {
            seam_links: self.grid.seam_links,
            polar_cutoff_deg: Some(self.grid.polar_cutoff_deg),
            isl_enabled: self.grid.isl_enabled,
        }
    }

    pub fn capacity_profile(&self) -> Result<CapacityProfile> {
        let mut cap = CapacityProfile::named(&self.capacity.profile)?;
        if let Some(isl) = self.capacity.isl {
            cap.isl = isl;
        }
        if let Some(gsl) = self.capacity.gsl {
            cap.gsl = gsl;
        }
        Ok(cap)
    }

    pub fn load_cities(&self) -> Result<Vec<City>> {
        match &self.cities.file {
            Some(f) => traffic::read_cities(&self.resolve(f)),
            None => Ok(traffic::default_cities()),
        }
    }

    pub fn demands(&self, cities: &[City]) -> Result<Vec<FlowDemand>> {
        let t = &self.traffic;
        if let Some(f) = &t.demand_file {
            return traffic::read_demands(&self.resolve(f), cities);
        }
        match t.selection {
            Selection::All => traffic::gravity_demands(cities, t.total_rate),
            Selection::Hotspot => {
                traffic::hotspot_demands(cities, t.total_rate, t.max_degree, t.min_distance_km)
            }
        }
    }

    pub fn scheduler_params(&self) -> SchedulerParams {
        SchedulerParams {
            mfss: self.mfss.clone(),
            elb: self.elb.clone(),
            b4: self.b4.clone(),
            seed: self.seed,
        }
    }

    /// Station index pairs for the delay profile.
    pub fn profile_pairs(&self, cities: &[City]) -> Result<Vec<(usize, usize)>> {
        let find = |name: &str| {
            cities
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| Error::param("profile.pairs", format!("unknown city `{name}`")))
        };
        self.profile
            .pairs
            .iter()
            .map(|[a, b]| Ok((find(a)?, find(b)?)))
            .collect()
    }
}

/// A scenario expanded into concrete inputs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub constellation: Constellation,
    pub cities: Vec<City>,
    pub stations: Vec<GroundStation>,
    pub demands: Vec<FlowDemand>,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let constellation = Constellation::new(config.constellation_spec()?)?;
        let cities = config.load_cities()?;
        let stations = cities
            .iter()
            .map(|c| c.station(config.cities.min_elevation_deg))
            .collect::<Result<Vec<_>>>()?;
        let demands = config.demands(&cities)?;
        Ok(Self {
            config,
            constellation,
            cities,
            stations,
            demands,
        })
    }

    pub fn snapshot_at(&self, t: f64) -> Result<TopologySnapshot> {
        topology::snapshot(
            &self.constellation,
            &self.stations,
            t,
            &self.config.grid_policy(),
            &self.config.capacity_profile()?,
        )
    }

    /// One snapshot per configured instant, built in parallel.
    pub fn snapshots(&self) -> Result<Vec<TopologySnapshot>> {
        self.config
            .time
            .instants()
            .par_iter()
            .map(|&t| self.snapshot_at(t))
            .collect()
    }

    pub fn city_names(&self) -> Vec<String> {
        self.cities.iter().map(|c| c.name.clone()).collect()
    }
}
