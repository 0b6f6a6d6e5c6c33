//! Sub-optimal path delay profiles and throughput comparisons.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::routing::{
    b4_assign, elb_assign, k_shortest_paths, mfss_assign, ospf_assign, Algorithm, B4Params,
    ElbParams, FlowAssignment, MfssParams, MfssState,
};
use crate::topology::TopologySnapshot;
use crate::traffic::{max_min_fair_throughput, FlowDemand, ThroughputReport};

/// Rate above which a flow counts as well served.
pub const HIGH_RATE: f64 = 200.0;
/// Rate below which a flow counts as starved.
pub const LOW_RATE: f64 = 125.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayProfile {
    pub src: String,
    pub dst: String,
    /// Nondecreasing delays of the K shortest paths, ms.
    pub delays_ms: Vec<f64>,
    pub hops: Vec<usize>,
    pub reason: Option<String>,
}

impl DelayProfile {
    /// Paths whose delay is within `(1 + frac)` of the best one.
    pub fn within(&self, frac: f64) -> usize {
        match self.delays_ms.first() {
            Some(&best) => self
                .delays_ms
                .iter()
                .filter(|&&d| d <= (1.0 + frac) * best)
                .count(),
            None => 0,
        }
    }
}

/// Delays of the `k` shortest paths for each `(src, dst)` station pair.
/// `names` labels station indices. Unroutable pairs give an empty profile.
pub fn path_delay_profile(
    snap: &TopologySnapshot,
    names: &[String],
    pairs: &[(usize, usize)],
    k: usize,
) -> Result<Vec<DelayProfile>> {
    if k == 0 {
        return Err(Error::param("profile.k", "must be at least 1"));
    }
    Ok(pairs
        .par_iter()
        .map(|&(s, t)| {
            let label = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("gs-{i}"));
            let mut p = DelayProfile {
                src: label(s),
                dst: label(t),
                delays_ms: Vec::new(),
                hops: Vec::new(),
                reason: None,
            };
            let found = match (snap.ground(s), snap.ground(t)) {
                (Some(a), Some(b)) => k_shortest_paths(snap, a, b, k),
                _ => Err(Error::InvalidTopology("station not in snapshot".into())),
            };
            match found {
                Ok(paths) => {
                    p.delays_ms = paths.iter().map(|x| x.total_delay_ms).collect();
                    p.hops = paths.iter().map(|x| x.hop_count()).collect();
                }
                Err(e) => p.reason = Some(e.to_string()),
            }
            p
        })
        .collect())
}

/// Empirical CDF as a step function over the distinct sample values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfSeries {
    pub values: Vec<f64>,
    /// `fractions[i]` is the share of samples `<= values[i]`.
    pub fractions: Vec<f64>,
}

impl CdfSeries {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidTraffic(
                "cannot build a CDF from zero samples".into(),
            ));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidTraffic("NaN sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let (mut values, mut fractions) = (Vec::new(), Vec::new());
        for (i, &x) in sorted.iter().enumerate() {
            if sorted.get(i + 1) != Some(&x) {
                values.push(x);
                fractions.push((i + 1) as f64 / n);
            }
        }
        *fractions.last_mut().expect("nonempty") = 1.0;
        Ok(Self { values, fractions })
    }

    /// Share of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        match self.values.partition_point(|&v| v <= x) {
            0 => 0.0,
            i => self.fractions[i - 1],
        }
    }

    /// Share of samples `< x`.
    pub fn fraction_below(&self, x: f64) -> f64 {
        match self.values.partition_point(|&v| v < x) {
            0 => 0.0,
            i => self.fractions[i - 1],
        }
    }

    /// Share of samples `> x`.
    pub fn fraction_above(&self, x: f64) -> f64 {
        1.0 - self.eval(x)
    }
}

pub fn throughput_cdf(report: &ThroughputReport) -> Result<CdfSeries> {
    CdfSeries::from_samples(&report.rates())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    pub flows: usize,
    pub frac_above_200: f64,
    pub frac_below_125: f64,
    pub median_rate: f64,
    pub mean_rate: f64,
    pub max_link_utilization: f64,
    pub max_offered_utilization: f64,
    pub error: Option<String>,
}

impl ComparisonRow {
    fn failed(algorithm: Algorithm, e: &Error) -> Self {
        Self {
            algorithm,
            flows: 0,
            frac_above_200: f64::NAN,
            frac_below_125: f64::NAN,
            median_rate: f64::NAN,
            mean_rate: f64::NAN,
            max_link_utilization: f64::NAN,
            max_offered_utilization: f64::NAN,
            error: Some(e.to_string()),
        }
    }

    /// Summary over the per-flow rates of every snapshot.
    pub fn from_reports(algorithm: Algorithm, reports: &[ThroughputReport]) -> Self {
        let mut rates: Vec<f64> = reports.iter().flat_map(|r| r.rates()).collect();
        rates.sort_by(f64::total_cmp);
        let n = rates.len();
        let frac = |pred: &dyn Fn(f64) -> bool| {
            rates.iter().filter(|&&r| pred(r)).count() as f64 / n.max(1) as f64
        };
        let median = match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => rates[n / 2],
            _ => 0.5 * (rates[n / 2 - 1] + rates[n / 2]),
        };
        Self {
            algorithm,
            flows: n,
            frac_above_200: frac(&|r| r > HIGH_RATE),
            frac_below_125: frac(&|r| r < LOW_RATE),
            median_rate: median,
            mean_rate: rates.iter().sum::<f64>() / n.max(1) as f64,
            max_link_utilization: reports
                .iter()
                .map(|r| r.max_link_utilization())
                .fold(0.0, f64::max),
            max_offered_utilization: reports
                .iter()
                .map(|r| r.max_offered_utilization)
                .fold(0.0, f64::max),
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, algorithm: Algorithm) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Scheduler knobs shared by every run of one comparison.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchedulerParams {
    pub mfss: MfssParams,
    pub elb: ElbParams,
    pub b4: B4Params,
    pub seed: u64,
}

/// Routes `demands` on each snapshot in turn. MFSS predictor state carries
/// over from one snapshot to the next.
pub fn run_scheduler(
    algorithm: Algorithm,
    snapshots: &[TopologySnapshot],
    demands: &[FlowDemand],
    params: &SchedulerParams,
) -> Result<Vec<(FlowAssignment, ThroughputReport)>> {
    let mut mfss = match algorithm {
        Algorithm::Mfss => Some(MfssState::new(params.mfss.clone())?),
        _ => None,
    };
    snapshots
        .iter()
        .enumerate()
        .map(|(i, snap)| {
            let a = match algorithm {
                Algorithm::Ospf => ospf_assign(snap, demands),
                Algorithm::Elb => elb_assign(
                    snap,
                    demands,
                    &params.elb,
                    params.seed.wrapping_add(i as u64),
                )?,
                Algorithm::B4 => b4_assign(snap, demands, &params.b4)?,
                Algorithm::Mfss => mfss_assign(snap, demands, mfss.as_mut().expect("state"))?,
            };
            let r = max_min_fair_throughput(&a, snap);
            Ok((a, r))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub result: Result<Vec<(FlowAssignment, ThroughputReport)>, String>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub table: ComparisonTable,
    pub cdfs: BTreeMap<Algorithm, CdfSeries>,
    pub runs: Vec<AlgorithmRun>,
}

/// Runs all four schedulers on the same snapshots and demands. A failing
/// scheduler gets an error row; the others still run.
pub fn compare_algorithms(
    snapshots: &[TopologySnapshot],
    demands: &[FlowDemand],
    params: &SchedulerParams,
) -> Comparison {
    let runs: Vec<AlgorithmRun> = Algorithm::ALL
        .par_iter()
        .map(|&algorithm| AlgorithmRun {
            algorithm,
            result: run_scheduler(algorithm, snapshots, demands, params).map_err(|e| e.to_string()),
        })
        .collect();

    let mut rows = Vec::new();
    let mut cdfs = BTreeMap::new();
    for run in &runs {
        match &run.result {
            Ok(out) => {
                let reports: Vec<ThroughputReport> = out.iter().map(|(_, r)| r.clone()).collect();
                let rates: Vec<f64> = reports.iter().flat_map(|r| r.rates()).collect();
                match CdfSeries::from_samples(&rates) {
                    Ok(c) => {
                        cdfs.insert(run.algorithm, c);
                        rows.push(ComparisonRow::from_reports(run.algorithm, &reports));
                    }
                    Err(e) => rows.push(ComparisonRow::failed(run.algorithm, &e)),
                }
            }
            Err(msg) => rows.push(ComparisonRow::failed(
                run.algorithm,
                &Error::InvalidTopology(msg.clone()),
            )),
        }
    }
    Comparison {
        table: ComparisonTable { rows },
        cdfs,
        runs,
    }
}
