use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use leoroute::experiments::{
    compare_algorithms, path_delay_profile, run_scheduler, ComparisonRow, ComparisonTable,
};
use leoroute::output;
use leoroute::routing::Algorithm;
use leoroute::scenario::{parse_override, Scenario, ScenarioConfig, CONFIG_KEYS};
use leoroute::traffic::write_demands;

/// Flow-level LEO constellation routing simulator.
///
/// Every flag has a config-file key; flags override `--set`, which overrides
/// the file. The effective config is written to the output directory.
#[derive(Debug, Parser)]
#[command(name = "leoroute", version)]
struct Cli {
    /// Scenario file (TOML). Built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set mfss.theta=0.6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// `seed`
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// `output_dir`
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// `threads` (0 = all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// `time.t`, seconds
    #[arg(long, global = true)]
    time: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write satellite elements and positions (constellation.jsonl).
    Generate,
    /// Write the topology graph of each snapshot (topology_<i>.jsonl).
    Snapshot,
    /// K-shortest path delays for the configured city pairs (profile.csv).
    Profile,
    /// Run one scheduler (assignments_<algo>.jsonl, cdf_<algo>.csv, summary_<algo>.csv).
    Simulate {
        /// `scheduler`
        #[arg(long)]
        scheduler: Option<Algorithm>,
    },
    /// Run all four schedulers (cdf_<algo>.csv, comparison.csv, assignments_<algo>.jsonl).
    Compare,
}

fn config_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys:\n");
    for (k, d) in CONFIG_KEYS {
        s.push_str(&format!("  {k:width$}  {d}\n"));
    }
    s
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut overrides = cli
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<leoroute::Result<Vec<_>>>()?;
    let mut flag = |key: &str, v: Option<toml::Value>| {
        if let Some(v) = v {
            overrides.push((key.to_string(), v));
        }
    };
    flag("seed", cli.seed.map(|s| toml::Value::Integer(s as i64)));
    flag(
        "output_dir",
        cli.out_dir
            .as_ref()
            .map(|p| toml::Value::String(p.display().to_string())),
    );
    flag(
        "threads",
        cli.threads.map(|t| toml::Value::Integer(t as i64)),
    );
    flag("time.t", cli.time.map(toml::Value::Float));
    if let Command::Simulate { scheduler: Some(a) } = &cli.command {
        flag("scheduler", Some(toml::Value::String(a.name().into())));
    }
    let cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p, &overrides)?,
        None => ScenarioConfig::from_overrides(&overrides)?,
    };
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    let f = File::create(&p).with_context(|| format!("cannot create {}", p.display()))?;
    Ok(BufWriter::new(f))
}

fn print_table(table: &ComparisonTable) {
    println!(
        "{:<6} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "algo", "flows", ">200", "<125", "median", "max_util", "offered"
    );
    for r in &table.rows {
        match &r.error {
            Some(e) => println!("{:<6} error: {e}", r.algorithm.name()),
            None => println!(
                "{:<6} {:>6} {:>10.3} {:>10.3} {:>10.1} {:>10.3} {:>10.3}",
                r.algorithm.name(),
                r.flows,
                r.frac_above_200,
                r.frac_below_125,
                r.median_rate,
                r.max_link_utilization,
                r.max_offered_utilization
            ),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    fs::write(out.join("effective_config.toml"), cfg.to_toml()).with_context(|| {
        format!(
            "cannot write {}",
            out.join("effective_config.toml").display()
        )
    })?;

    let scenario = Scenario::build(cfg)?;
    let cfg = &scenario.config;
    match &cli.command {
        Command::Generate => {
            output::write_constellation_jsonl(
                create(&out, "constellation.jsonl")?,
                &scenario.constellation,
                cfg.time.t,
            )?;
            println!(
                "{}: {} satellites in {} shell(s)",
                scenario.constellation.spec.name,
                scenario.constellation.elements.len(),
                scenario.constellation.spec.shells.len()
            );
        }
        Command::Snapshot => {
            for (i, snap) in scenario.snapshots()?.iter().enumerate() {
                snap.write_jsonl(create(&out, &format!("topology_{i}.jsonl"))?)?;
                println!(
                    "t={}s: {} nodes, {} links, {} unattached station(s), sha256 {}",
                    snap.time_s,
                    snap.node_count(),
                    snap.links().len(),
                    snap.unattached.len(),
                    snap.content_hash()
                );
            }
        }
        Command::Profile => {
            let snap = scenario.snapshot_at(cfg.time.t)?;
            let pairs = cfg.profile_pairs(&scenario.cities)?;
            let profiles =
                path_delay_profile(&snap, &scenario.city_names(), &pairs, cfg.profile.k)?;
            output::write_profile_csv(create(&out, "profile.csv")?, &profiles)?;
            let mut failed = 0;
            for p in &profiles {
                match (&p.reason, p.delays_ms.first()) {
                    (None, Some(best)) => println!(
                        "{} -> {}: {} paths, best {:.2} ms, {} within {}%",
                        p.src,
                        p.dst,
                        p.delays_ms.len(),
                        best,
                        p.within(cfg.profile.epsilon),
                        cfg.profile.epsilon * 100.0
                    ),
                    _ => {
                        failed += 1;
                        eprintln!(
                            "{} -> {}: {}",
                            p.src,
                            p.dst,
                            p.reason.as_deref().unwrap_or("no path")
                        );
                    }
                }
            }
            if failed > 0 {
                bail!("{failed} pair(s) unroutable");
            }
        }
        Command::Simulate { .. } => {
            let alg = cfg.scheduler;
            let snaps = scenario.snapshots()?;
            write_demands(
                create(&out, "demands.csv")?,
                &scenario.cities,
                &scenario.demands,
            )?;
            let results = run_scheduler(alg, &snaps, &scenario.demands, &cfg.scheduler_params())?;
            let mut w = create(&out, &format!("assignments_{alg}.jsonl"))?;
            for (snap, (a, r)) in snaps.iter().zip(&results) {
                output::write_assignment_jsonl(&mut w, snap, a, r)?;
            }
            let reports: Vec<_> = results.into_iter().map(|(_, r)| r).collect();
            let rates: Vec<f64> = reports.iter().flat_map(|r| r.rates()).collect();
            let cdf = leoroute::CdfSeries::from_samples(&rates)?;
            output::write_cdf_csv(create(&out, &format!("cdf_{alg}.csv"))?, &cdf)?;
            let table = ComparisonTable {
                rows: vec![ComparisonRow::from_reports(alg, &reports)],
            };
            output::write_comparison_csv(create(&out, &format!("summary_{alg}.csv"))?, &table)?;
            print_table(&table);
        }
        Command::Compare => {
            let snaps = scenario.snapshots()?;
            write_demands(
                create(&out, "demands.csv")?,
                &scenario.cities,
                &scenario.demands,
            )?;
            let cmp = compare_algorithms(&snaps, &scenario.demands, &cfg.scheduler_params());
            for run in &cmp.runs {
                if let Ok(results) = &run.result {
                    let mut w = create(&out, &format!("assignments_{}.jsonl", run.algorithm))?;
                    for (snap, (a, r)) in snaps.iter().zip(results) {
                        output::write_assignment_jsonl(&mut w, snap, a, r)?;
                    }
                }
            }
            for (alg, cdf) in &cmp.cdfs {
                output::write_cdf_csv(create(&out, &format!("cdf_{alg}.csv"))?, cdf)?;
            }
            output::write_comparison_csv(create(&out, "comparison.csv")?, &cmp.table)?;
            print_table(&cmp.table);
            let failed: Vec<_> = cmp
                .table
                .rows
                .iter()
                .filter(|r| r.error.is_some())
                .collect();
            if !failed.is_empty() {
                bail!("{} scheduler(s) failed", failed.len());
            }
        }
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_long_help(config_help());
    let cli = match Cli::from_arg_matches(&cmd.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
