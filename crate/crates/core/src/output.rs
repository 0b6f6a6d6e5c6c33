//! File writers: JSON lines for structured records, CSV for tables and
//! plottable series.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{CdfSeries, ComparisonTable, DelayProfile};
use crate::orbital::{propagate, subpoint, EARTH_RADIUS_KM};
use crate::routing::{FlowAssignment, Plane};
use crate::topology::{Constellation, NodeId, TopologySnapshot};
use crate::traffic::ThroughputReport;

fn csv_err(e: csv::Error) -> Error {
    Error::Csv {
        path: "<output>".into(),
        source: e,
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}

fn jsonl<W: Write, T: Serialize>(w: &mut W, rec: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, rec)?;
    w.write_all(b"\n").map_err(io_err)
}

#[derive(Serialize)]
struct SatRecord<'a> {
    id: String,
    shell: u32,
    plane: u32,
    slot: u32,
    altitude_km: f64,
    inclination_deg: f64,
    raan_deg: f64,
    phase0_deg: f64,
    period_s: f64,
    frame: &'a str,
    x_km: f64,
    y_km: f64,
    z_km: f64,
    lat_deg: f64,
    lon_deg: f64,
}

/// One line per satellite: elements plus position at `t`.
pub fn write_constellation_jsonl<W: Write>(mut w: W, c: &Constellation, t: f64) -> Result<()> {
    for el in &c.elements {
        let pos = propagate(el, t);
        let (lat, lon) = subpoint(&pos.to_earth_fixed(t))?;
        jsonl(
            &mut w,
            &SatRecord {
                id: Constellation::node_id(el).to_string(),
                shell: el.shell_index,
                plane: el.plane_index,
                slot: el.slot_index,
                altitude_km: el.semi_major_axis_km - EARTH_RADIUS_KM,
                inclination_deg: el.inclination_rad.to_degrees(),
                raan_deg: el.raan_rad.to_degrees(),
                phase0_deg: el.phase0_rad.to_degrees(),
                period_s: el.period_s(),
                frame: "inertial",
                x_km: pos.x,
                y_km: pos.y,
                z_km: pos.z,
                lat_deg: lat,
                lon_deg: lon,
            },
        )?;
    }
    w.flush().map_err(io_err)
}

#[derive(Serialize)]
struct FlowRecord<'a> {
    time_s: f64,
    algorithm: &'a str,
    flow: usize,
    src: &'a str,
    dst: &'a str,
    offered: f64,
    rate: f64,
    delay_ms: Option<f64>,
    path: Option<Vec<NodeId>>,
    plane: Option<Plane>,
    deflections: u32,
    note: Option<&'a str>,
}

/// One line per flow: path binding and realized rate.
pub fn write_assignment_jsonl<W: Write>(
    mut w: W,
    snap: &TopologySnapshot,
    assignment: &FlowAssignment,
    report: &ThroughputReport,
) -> Result<()> {
    let name = |i: usize| snap.station_names.get(i).map(String::as_str).unwrap_or("?");
    for (f, r) in assignment.flows.iter().zip(&report.flows) {
        debug_assert_eq!(f.demand.id, r.id);
        jsonl(
            &mut w,
            &FlowRecord {
                time_s: assignment.time_s,
                algorithm: assignment.algorithm.name(),
                flow: f.demand.id,
                src: name(f.demand.src),
                dst: name(f.demand.dst),
                offered: f.demand.offered_rate,
                rate: r.rate,
                delay_ms: f.path.as_ref().map(|p| p.total_delay_ms),
                path: f.path.as_ref().map(|p| p.node_ids(snap)),
                plane: f.plane,
                deflections: f.deflections,
                note: f.note.as_deref(),
            },
        )?;
    }
    w.flush().map_err(io_err)
}

/// Two columns, `value,fraction`.
pub fn write_cdf_csv<W: Write>(w: W, cdf: &CdfSeries) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["value", "fraction"]).map_err(csv_err)?;
    for (v, f) in cdf.values.iter().zip(&cdf.fractions) {
        wr.write_record([v.to_string(), f.to_string()])
            .map_err(csv_err)?;
    }
    wr.flush().map_err(io_err)
}

pub fn write_comparison_csv<W: Write>(w: W, table: &ComparisonTable) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in &table.rows {
        wr.serialize(row).map_err(csv_err)?;
    }
    wr.flush().map_err(io_err)
}

#[derive(Serialize)]
struct ProfileRow<'a> {
    src: &'a str,
    dst: &'a str,
    rank: usize,
    delay_ms: f64,
    hops: usize,
    ratio_to_best: f64,
}

/// One row per path: `src,dst,rank,delay_ms,hops,ratio_to_best`.
pub fn write_profile_csv<W: Write>(w: W, profiles: &[DelayProfile]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for p in profiles {
        let best = p.delays_ms.first().copied().unwrap_or(f64::NAN);
        for (rank, (&d, &h)) in p.delays_ms.iter().zip(&p.hops).enumerate() {
            wr.serialize(ProfileRow {
                src: &p.src,
                dst: &p.dst,
                rank: rank + 1,
                delay_ms: d,
                hops: h,
                ratio_to_best: d / best,
            })
            .map_err(csv_err)?;
        }
    }
    wr.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbital::ConstellationSpec;

    #[test]
    fn cdf_csv_has_two_columns() {
        let c = CdfSeries::from_samples(&[1.0, 2.0, 2.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_cdf_csv(&mut buf, &c).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "value,fraction\n1,0.25\n2,0.75\n4,1\n"
        );
    }

    #[test]
    fn constellation_lines() {
        let c = Constellation::new(ConstellationSpec::preset("iridium").unwrap()).unwrap();
        let mut buf = Vec::new();
        write_constellation_jsonl(&mut buf, &c, 0.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 66);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["id"], "sat-0-0-0");
    }
}
