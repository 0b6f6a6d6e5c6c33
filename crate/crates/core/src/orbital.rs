//! Walker-style constellation generation and circular-orbit propagation.
//!
//! Earth is a sphere of radius [`EARTH_RADIUS_KM`]; orbits are circular and
//! unperturbed. The inertial and earth-fixed frames coincide at `t = 0`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Standard gravitational parameter of Earth, km³/s².
pub const MU_KM3_S2: f64 = 398_600.441_8;
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;

/// One Walker shell: planes of equal altitude and inclination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub num_planes: u32,
    pub sats_per_plane: u32,
    #[serde(default)]
    pub phasing_factor: u32,
    /// 360 for inclined "delta" shells, 180 for polar "star" shells.
    #[serde(default = "default_raan_spread")]
    pub raan_spread_deg: f64,
}

fn default_raan_spread() -> f64 {
    360.0
}

impl ShellSpec {
    pub fn delta(
        altitude_km: f64,
        inclination_deg: f64,
        planes: u32,
        per_plane: u32,
        phasing: u32,
    ) -> Self {
        Self {
            altitude_km,
            inclination_deg,
            num_planes: planes,
            sats_per_plane: per_plane,
            phasing_factor: phasing,
            raan_spread_deg: 360.0,
        }
    }

    pub fn star(
        altitude_km: f64,
        inclination_deg: f64,
        planes: u32,
        per_plane: u32,
        phasing: u32,
    ) -> Self {
        Self {
            raan_spread_deg: 180.0,
            ..Self::delta(altitude_km, inclination_deg, planes, per_plane, phasing)
        }
    }

    pub fn satellite_count(&self) -> usize {
        self.num_planes as usize * self.sats_per_plane as usize
    }

    pub fn semi_major_axis_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidShell(m));
        if !(self.altitude_km > 0.0) {
            return Err(Error::NonPositiveAltitude(self.altitude_km));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return bad(format!(
                "inclination {} outside [0, 180]",
                self.inclination_deg
            ));
        }
        if self.num_planes == 0 {
            return bad("zero orbital planes".into());
        }
        if self.sats_per_plane == 0 {
            return bad("zero satellites per plane".into());
        }
        if self.phasing_factor >= self.num_planes {
            return bad(format!(
                "phasing factor {} must be below the plane count {}",
                self.phasing_factor, self.num_planes
            ));
        }
        if self.raan_spread_deg != 180.0 && self.raan_spread_deg != 360.0 {
            return bad(format!(
                "raan spread {} must be 180 or 360",
                self.raan_spread_deg
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub name: String,
    pub shells: Vec<ShellSpec>,
}

impl ConstellationSpec {
    pub fn satellite_count(&self) -> usize {
        self.shells.iter().map(ShellSpec::satellite_count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shells.is_empty() {
            return Err(Error::InvalidConstellation(format!(
                "`{}` has no shells",
                self.name
            )));
        }
        self.shells.iter().try_for_each(ShellSpec::validate)
    }

    /// Looks up a preset by name (`iridium`, `globalstar`, `oneweb`,
    /// `starlink_sim`, `kuiper`, `telesat`).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "iridium" => Ok(presets::iridium()),
            "globalstar" => Ok(presets::globalstar()),
            "oneweb" => Ok(presets::oneweb()),
            "starlink_sim" | "starlink" => Ok(presets::starlink_sim()),
            "kuiper" => Ok(presets::kuiper()),
            "telesat" => Ok(presets::telesat()),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub const PRESET_NAMES: [&'static str; 6] = [
        "iridium",
        "globalstar",
        "oneweb",
        "starlink_sim",
        "kuiper",
        "telesat",
    ];
}

pub mod presets {
    use super::{ConstellationSpec, ShellSpec};

    fn single(name: &str, shell: ShellSpec) -> ConstellationSpec {
        ConstellationSpec {
            name: name.to_string(),
            shells: vec![shell],
        }
    }

    /// 66 satellites, 6 polar planes of 11.
    pub fn iridium() -> ConstellationSpec {
        single("iridium", ShellSpec::star(780.0, 86.4, 6, 11, 0))
    }

    /// 48 satellites at 1400 km; the 8 x 6 layout is an assumption.
    pub fn globalstar() -> ConstellationSpec {
        single("globalstar", ShellSpec::delta(1400.0, 52.0, 8, 6, 1))
    }

    /// 720 satellites, 18 polar planes of 40 at 1200 km.
    pub fn oneweb() -> ConstellationSpec {
        single("oneweb", ShellSpec::star(1200.0, 87.9, 18, 40, 0))
    }

    /// 1584 satellites as 72 planes of 22 at 550 km, 53 degrees.
    pub fn starlink_sim() -> ConstellationSpec {
        single("starlink_sim", ShellSpec::delta(550.0, 53.0, 72, 22, 1))
    }

    /// 3236 satellites in three inclined shells.
    pub fn kuiper() -> ConstellationSpec {
        ConstellationSpec {
            name: "kuiper".into(),
            shells: vec![
                ShellSpec::delta(630.0, 51.9, 34, 34, 1),
                ShellSpec::delta(610.0, 42.0, 36, 36, 1),
                ShellSpec::delta(590.0, 33.0, 28, 28, 1),
            ],
        }
    }

    /// 300 satellites: 80 polar (8 x 10) plus 220 inclined (20 x 11). The
    /// per-shell split is an assumption; only the totals are published.
    pub fn telesat() -> ConstellationSpec {
        ConstellationSpec {
            name: "telesat".into(),
            shells: vec![
                ShellSpec::star(1015.0, 98.98, 8, 10, 0),
                ShellSpec::delta(1325.0, 50.88, 20, 11, 1),
            ],
        }
    }
}

/// Orbital elements of one satellite on a circular orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatElements {
    pub shell_index: u32,
    pub plane_index: u32,
    pub slot_index: u32,
    pub raan_rad: f64,
    pub inclination_rad: f64,
    /// Argument of latitude at `t = 0`.
    pub phase0_rad: f64,
    pub semi_major_axis_km: f64,
}

impl SatElements {
    pub fn mean_motion_rad_s(&self) -> f64 {
        (MU_KM3_S2 / self.semi_major_axis_km.powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        TAU / self.mean_motion_rad_s()
    }

    pub fn speed_km_s(&self) -> f64 {
        (MU_KM3_S2 / self.semi_major_axis_km).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Inertial,
    EarthFixed,
}

/// Earth-centred cartesian position in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub frame: Frame,
}

impl SatPosition {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance_km(&self, other: &SatPosition) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Rotates an inertial position into the earth-fixed frame at time `t`.
    pub fn to_earth_fixed(self, t: f64) -> SatPosition {
        match self.frame {
            Frame::EarthFixed => self,
            Frame::Inertial => {
                let theta = EARTH_ROTATION_RAD_S * t;
                let (s, c) = theta.sin_cos();
                SatPosition {
                    x: self.x * c + self.y * s,
                    y: -self.x * s + self.y * c,
                    z: self.z,
                    frame: Frame::EarthFixed,
                }
            }
        }
    }

    /// Earth-fixed point at geocentric `(lat, lon)` and radius `radius_km`.
    pub fn from_geodetic(lat_deg: f64, lon_deg: f64, radius_km: f64) -> SatPosition {
        let (slat, clat) = lat_deg.to_radians().sin_cos();
        let (slon, clon) = lon_deg.to_radians().sin_cos();
        SatPosition {
            x: radius_km * clat * clon,
            y: radius_km * clat * slon,
            z: radius_km * slat,
            frame: Frame::EarthFixed,
        }
    }
}

/// Expands a constellation into per-satellite elements, ordered by
/// `(shell, plane, slot)`.
pub fn build_constellation(spec: &ConstellationSpec) -> Result<Vec<SatElements>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.satellite_count());
    for (shell_index, shell) in spec.shells.iter().enumerate() {
        let planes = shell.num_planes;
        let per_plane = shell.sats_per_plane;
        let total = shell.satellite_count() as f64;
        let raan_step = shell.raan_spread_deg.to_radians() / planes as f64;
        let slot_step = TAU / per_plane as f64;
        let phase_offset = shell.phasing_factor as f64 * TAU / total;
        for plane in 0..planes {
            for slot in 0..per_plane {
                let phase = slot as f64 * slot_step + plane as f64 * phase_offset;
                out.push(SatElements {
                    shell_index: shell_index as u32,
                    plane_index: plane,
                    slot_index: slot,
                    raan_rad: plane as f64 * raan_step,
                    inclination_rad: shell.inclination_deg.to_radians(),
                    phase0_rad: phase.rem_euclid(TAU),
                    semi_major_axis_km: shell.semi_major_axis_km(),
                });
            }
        }
    }
    Ok(out)
}

/// Inertial position at time `t` seconds.
pub fn propagate(el: &SatElements, t: f64) -> SatPosition {
    let u = el.phase0_rad + el.mean_motion_rad_s() * t;
    let (su, cu) = u.sin_cos();
    let (si, ci) = el.inclination_rad.sin_cos();
    let (so, co) = el.raan_rad.sin_cos();
    let a = el.semi_major_axis_km;
    SatPosition {
        x: a * (co * cu - so * su * ci),
        y: a * (so * cu + co * su * ci),
        z: a * su * si,
        frame: Frame::Inertial,
    }
}

/// Position at `t` in the requested frame.
pub fn propagate_in(el: &SatElements, t: f64, frame: Frame) -> SatPosition {
    let p = propagate(el, t);
    match frame {
        Frame::Inertial => p,
        Frame::EarthFixed => p.to_earth_fixed(t),
    }
}

/// Inertial velocity vector (km/s).
pub fn velocity(el: &SatElements, t: f64) -> [f64; 3] {
    let n = el.mean_motion_rad_s();
    let u = el.phase0_rad + n * t;
    let (su, cu) = u.sin_cos();
    let (si, ci) = el.inclination_rad.sin_cos();
    let (so, co) = el.raan_rad.sin_cos();
    let v = el.semi_major_axis_km * n;
    [
        v * (-co * su - so * cu * ci),
        v * (-so * su + co * cu * ci),
        v * cu * si,
    ]
}

pub fn orbital_period(altitude_km: f64) -> Result<f64> {
    if !(altitude_km > 0.0) {
        return Err(Error::NonPositiveAltitude(altitude_km));
    }
    let a = EARTH_RADIUS_KM + altitude_km;
    Ok(TAU * (a.powi(3) / MU_KM3_S2).sqrt())
}

pub fn orbital_speed_km_s(altitude_km: f64) -> Result<f64> {
    if !(altitude_km > 0.0) {
        return Err(Error::NonPositiveAltitude(altitude_km));
    }
    Ok((MU_KM3_S2 / (EARTH_RADIUS_KM + altitude_km)).sqrt())
}

/// Geocentric `(lat_deg, lon_deg)` of the nadir point. Longitude is reported
/// as 0 at the poles.
pub fn subpoint(pos: &SatPosition) -> Result<(f64, f64)> {
    if pos.frame != Frame::EarthFixed {
        return Err(Error::InertialFrame);
    }
    Ok(geocentric_lat_lon(pos))
}

/// Latitude/longitude without the frame check. Latitude is frame-invariant.
pub(crate) fn geocentric_lat_lon(pos: &SatPosition) -> (f64, f64) {
    let r = pos.norm();
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let lat = (pos.z / r).clamp(-1.0, 1.0).asin().to_degrees();
    let lon = if pos.x == 0.0 && pos.y == 0.0 {
        0.0
    } else {
        pos.y.atan2(pos.x).to_degrees()
    };
    (lat, lon)
}

/// Elevation (degrees) of `target` seen from a ground point `observer`,
/// both earth-fixed.
pub fn elevation_deg(observer: &SatPosition, target: &SatPosition) -> f64 {
    let r = observer.norm();
    let (ux, uy, uz) = (observer.x / r, observer.y / r, observer.z / r);
    let (dx, dy, dz) = (
        target.x - observer.x,
        target.y - observer.y,
        target.z - observer.z,
    );
    let d = (dx * dx + dy * dy + dz * dz).sqrt();
    if d == 0.0 {
        return 90.0;
    }
    ((dx * ux + dy * uy + dz * uz) / d)
        .clamp(-1.0, 1.0)
        .asin()
        .to_degrees()
}
