//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any gated check fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path as FsPath, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use leoroute::experiments::compare_algorithms;
use leoroute::orbital::{orbital_speed_km_s, velocity, Frame, SatPosition, EARTH_RADIUS_KM};
use leoroute::routing::k_shortest_paths;
use leoroute::topology::{build_isl_grid, link_delay, GridPolicy, NodeId, LIGHT_SPEED_KM_S};
use leoroute::traffic::max_min_fair_throughput;
use leoroute::{
    path_delay_profile, Algorithm, Constellation, ConstellationSpec, Scenario, ScenarioConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Check = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Check);

fn workspace() -> PathBuf {
    FsPath::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn default_scenario() -> PathBuf {
    workspace().join("scenarios/default.toml")
}

fn timed(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let secs = took.as_secs_f64();
    match out {
        Ok(s) if took > limit => Err(format!(
            "{s}; {secs:.2}s, over the {}s limit",
            limit.as_secs()
        )),
        Ok(s) => Ok(format!("{s}; {secs:.2}s")),
        Err(s) => Err(format!("{s}; {secs:.2}s")),
    }
}

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn constellation_fidelity() -> Check {
    let want = [
        ("iridium", 66),
        ("globalstar", 48),
        ("oneweb", 720),
        ("starlink_sim", 1584),
        ("kuiper", 3236),
        ("telesat", 300),
    ];
    let mut got = Vec::new();
    let mut ok = true;
    for (name, n) in want {
        let c = Constellation::new(ConstellationSpec::preset(name).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        ok &= c.elements.len() == n;
        got.push(format!("{name}={}", c.elements.len()));
    }
    let oneweb = ConstellationSpec::preset("oneweb").map_err(|e| e.to_string())?;
    let shell = &oneweb.shells[0];
    ok &= shell.num_planes * shell.sats_per_plane == 720
        && shell.num_planes == 18
        && shell.altitude_km == 1200.0;
    let iridium = ConstellationSpec::preset("iridium").map_err(|e| e.to_string())?;
    ok &= iridium.shells[0].num_planes == 6 && iridium.shells[0].sats_per_plane == 11;
    ensure(ok, got.join(" "))
}

fn kinematics() -> Check {
    let v = orbital_speed_km_s(550.0).map_err(|e| e.to_string())?;
    let c =
        Constellation::new(ConstellationSpec::preset("starlink_sim").map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let vel = velocity(&c.elements[0], 1234.0);
    let norm = (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2]).sqrt();
    let rel = (v - 7.589).abs() / 7.589;
    let rel_prop = (norm - 7.589).abs() / 7.589;
    ensure(
        rel <= 1e-3 && rel_prop <= 1e-3,
        format!(
            "v={v:.4} km/s ({:.0} km/h), propagated {norm:.4} km/s, rel err {rel:.2e}",
            v * 3600.0
        ),
    )
}

fn ksp_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    for case in 0..200 {
        let g = common::SmallGraph::random(&mut rng, 12, 0.35, 4);
        let snap = g.snapshot(1.0);
        let src = rng.gen_range(0..g.n);
        let dst = (src + rng.gen_range(1..g.n)) % g.n;
        let k = rng.gen_range(1..=10);
        let all = g.all_simple_paths(src, dst);
        let want: Vec<_> = all.into_iter().take(k).collect();
        let got: Vec<(u64, Vec<usize>)> = match k_shortest_paths(&snap, src, dst, k) {
            Ok(ps) => ps
                .iter()
                .map(|p| (p.total_delay_ms as u64, p.nodes.clone()))
                .collect(),
            Err(_) => Vec::new(),
        };
        if got != want {
            return Err(format!("graph {case}: {src}->{dst} k={k} mismatch"));
        }
        compared += want.len();
    }
    Ok(format!("200 graphs, {compared} paths identical"))
}

fn max_min_fairness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let (caps, routes, offered) = common::random_instance(&mut rng, 5, 4);
        let snap = common::disjoint_links(&caps);
        let got =
            max_min_fair_throughput(&common::assignment_over(&routes, &offered), &snap).rates();
        let want = common::water_filling(&caps, &routes, &offered);
        let err = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        if err > 1e-9 {
            return Err(format!("instance {case}: {got:?} vs oracle {want:?}"));
        }
        if !common::is_max_min(&caps, &routes, &offered, &got, 1e-9) {
            return Err(format!("instance {case}: {got:?} is not max-min fair"));
        }
    }
    Ok(format!("100 instances, max deviation {worst:.1e}"))
}

fn ep_abundance() -> Check {
    let cfg = ScenarioConfig::load(&default_scenario(), &[]).map_err(|e| e.to_string())?;
    if cfg.constellation_spec().map_err(|e| e.to_string())?.name != "starlink_sim" {
        return Err("default scenario is not starlink_sim".into());
    }
    let scenario = Scenario::build(cfg).map_err(|e| e.to_string())?;
    let snap = scenario
        .snapshot_at(scenario.config.time.t)
        .map_err(|e| e.to_string())?;
    let pairs = scenario
        .config
        .profile_pairs(&scenario.cities)
        .map_err(|e| e.to_string())?;
    let profiles =
        path_delay_profile(&snap, &scenario.city_names(), &pairs, 50).map_err(|e| e.to_string())?;
    let counts: Vec<String> = profiles
        .iter()
        .map(|p| format!("{}-{}: {}", p.src, p.dst, p.within(0.10)))
        .collect();
    ensure(
        profiles.len() == 3 && profiles.iter().all(|p| p.within(0.10) >= 10),
        format!("paths within 10% (K=50): {}", counts.join(", ")),
    )
}

fn algorithm_ordering() -> Check {
    let scenario =
        Scenario::build(ScenarioConfig::load(&default_scenario(), &[]).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let snaps = scenario.snapshots().map_err(|e| e.to_string())?;
    let cmp = compare_algorithms(
        &snaps,
        &scenario.demands,
        &scenario.config.scheduler_params(),
    );
    let mut above = BTreeMap::new();
    let mut below = BTreeMap::new();
    for row in &cmp.table.rows {
        if let Some(e) = &row.error {
            return Err(format!("{} failed: {e}", row.algorithm));
        }
        above.insert(row.algorithm, row.frac_above_200);
        below.insert(row.algorithm, row.frac_below_125);
    }
    let baselines = [Algorithm::Ospf, Algorithm::Elb, Algorithm::B4];
    let mfss_above = above[&Algorithm::Mfss];
    let a = baselines.iter().all(|b| mfss_above > above[b]);
    let b = below[&Algorithm::Mfss] == 0.0;
    let c = below[&Algorithm::Elb] >= 0.5;
    let d = mfss_above > 0.40 - 0.15 && baselines.iter().all(|b| above[b] <= 0.20 + 0.15);
    let verdict = |x: bool| if x { "pass" } else { "FAIL" };
    let summary = Algorithm::ALL
        .iter()
        .map(|a| format!("{a} >200={:.3} <125={:.3}", above[a], below[a]))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(
        a && b && c,
        format!(
            "(a) {} (b) {} (c) {} (d, reported) {}; {summary}",
            verdict(a),
            verdict(b),
            verdict(c),
            verdict(d)
        ),
    )
}

fn hash_dir(dir: &FsPath) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
        out.insert(
            entry.file_name().to_string_lossy().into_owned(),
            format!("{:x}", Sha256::digest(&bytes)),
        );
    }
    Ok(out)
}

fn determinism() -> Check {
    let config = default_scenario()
        .canonicalize()
        .map_err(|e| e.to_string())?;
    let mut hashes = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let status = Command::new(env!("CARGO_BIN_EXE_leoroute"))
            .current_dir(dir.path())
            .arg("--config")
            .arg(&config)
            .args(["--out-dir", "out", "compare"])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "compare failed: {}",
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        hashes.push(hash_dir(&dir.path().join("out"))?);
    }
    ensure(
        hashes[0] == hashes[1] && hashes[0].len() >= 10,
        format!(
            "{} files, byte-identical: {}",
            hashes[0].len(),
            hashes[0] == hashes[1]
        ),
    )
}

fn delay_arithmetic() -> Check {
    let at = |x: f64| SatPosition {
        x,
        y: 0.0,
        z: 0.0,
        frame: Frame::Inertial,
    };
    let zero = link_delay(&at(7000.0), &at(7000.0));
    let second = link_delay(&at(0.0), &at(299_792.458));
    let c =
        Constellation::new(ConstellationSpec::preset("starlink_sim").map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let links =
        build_isl_grid(&c, 0.0, &GridPolicy::default(), 400.0).map_err(|e| e.to_string())?;
    let a = NodeId::Satellite {
        shell: 0,
        plane: 0,
        slot: 0,
    };
    let b = NodeId::Satellite {
        shell: 0,
        plane: 0,
        slot: 1,
    };
    let isl = links
        .iter()
        .find(|l| l.ends == [a, b])
        .ok_or("no intra-plane link sat-0-0-0 -- sat-0-0-1")?
        .delay_ms;
    let chord = 2.0 * (EARTH_RADIUS_KM + 550.0) * (PI / 22.0).sin() / LIGHT_SPEED_KM_S * 1000.0;
    ensure(
        zero == 0.0 && second == 1000.0 && (isl - 6.57).abs() <= 0.05 && (isl - chord).abs() <= 0.05,
        format!("0 km -> {zero} ms, c*1s -> {second} ms, intra-plane ISL {isl:.4} ms (chord {chord:.4} ms)"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("constellation fidelity", 1, constellation_fidelity),
        ("kinematics", 1, kinematics),
        ("k-shortest-path exactness", 30, ksp_exactness),
        ("max-min fairness", 10, max_min_fairness),
        ("equivalent-path abundance", 120, ep_abundance),
        ("algorithm ordering", 600, algorithm_ordering),
        ("determinism", 600, determinism),
        ("delay arithmetic", 1, delay_arithmetic),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        match timed(Duration::from_secs(limit), run) {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
