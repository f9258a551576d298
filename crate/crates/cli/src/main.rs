// Copyright 2026 The D3 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `d3` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use d3_core::codes::mu_formula;
use d3_core::experiment::{rows_to_csv, run_experiment, ExperimentConfig};
use d3_core::metrics::{
    exhaustive_erasure_check, fault_tolerance_check, min_traffic_oracle, uniformity_report,
};
use d3_core::migration::{apply_migration, batches_to_csv, plan_migration};
use d3_core::placement::{place, validate_config, D3Layout};
use d3_core::recovery::{apply_recovery, plan_degraded_read, plan_node_recovery};
use d3_core::simnet::{
    accumulate_traffic, degraded_read_latency, lambda_metric, recovery_time, throughput,
    BandwidthModel,
};
use d3_core::{BlockAddress, ClusterConfig, CodeScheme, Execution, PlacementMap, Placer};

#[derive(Parser)]
#[command(
    name = "d3",
    version,
    about = "Deterministic placement and recovery simulator for erasure-coded clusters"
)]
struct Cli {
    /// Run sweeps on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a placement map.
    Layout {
        #[arg(long, default_value = "d3")]
        placer: Placer,
        #[arg(long)]
        code: CodeScheme,
        #[arg(long)]
        racks: usize,
        #[arg(long)]
        nodes: usize,
        /// Defaults to one full D3 cycle of the cluster.
        #[arg(long)]
        stripes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Block size in MB.
        #[arg(long, default_value_t = 16)]
        block_mb: u64,
        /// Cross-rack link rate in Mb/s.
        #[arg(long, default_value_t = 100.0)]
        cross_bw: f64,
        /// Inner-rack link rate in Mb/s.
        #[arg(long, default_value_t = 1000.0)]
        inner_bw: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the placement invariants of a map.
    Verify { map: PathBuf },
    /// Plan and simulate recovery of one failed node.
    Recover {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        fail: BlockAddress,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Post-recovery map, input to `migrate`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-port and per-node byte counts.
        #[arg(long)]
        traffic: Option<PathBuf>,
    },
    /// Plan a degraded read of one block at a client node.
    DegradedRead {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        stripe: usize,
        #[arg(long)]
        block: usize,
        #[arg(long)]
        client: BlockAddress,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Move rebuilt blocks back once the failed node is replaced.
    Migrate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        relived: BlockAddress,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Compare the closed-form cross-rack average with the brute-force minimum.
    Oracle {
        #[arg(long)]
        code: CodeScheme,
    },
    /// Sweep placers, codes, clusters, bandwidths and seeds.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Outcome of a command that ran to completion.
enum Status {
    Pass,
    InvariantFailure,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_map(path: &Path) -> anyhow::Result<PlacementMap> {
    PlacementMap::from_json(&read(path)?).with_context(|| format!("loading map {}", path.display()))
}

fn metric_csv(rows: &[(&str, String)]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "value"])?;
    for (k, v) in rows {
        w.write_record([*k, v.as_str()])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

#[allow(clippy::too_many_arguments)]
fn layout(
    placer: Placer,
    code: CodeScheme,
    racks: usize,
    nodes: usize,
    stripes: Option<usize>,
    seed: u64,
    block_mb: u64,
    cross_bw: f64,
    inner_bw: f64,
    out: &Path,
) -> anyhow::Result<Status> {
    let cfg = ClusterConfig::new(racks, nodes)
        .with_bandwidth(inner_bw, cross_bw)
        .with_block_size(block_mb * 1_000_000);
    if placer == Placer::D3 {
        let violations = validate_config(&cfg, &code);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            bail!(
                "no D3 layout for {code} on {racks}x{nodes}: {}",
                list.join("; ")
            );
        }
    }
    let stripes = match stripes {
        Some(s) => s,
        None => D3Layout::new(&cfg, &code)
            .context("--stripes is required when no D3 cycle exists for this cluster")?
            .stripes_per_cycle(),
    };
    let map = place(placer, &cfg, &code, stripes, seed)?;
    write(out, &map.to_json()?)?;
    println!(
        "wrote {} stripes of {code} ({placer}) to {}",
        stripes,
        out.display()
    );
    Ok(Status::Pass)
}

fn verify(path: &Path) -> anyhow::Result<Status> {
    let map = load_map(path)?;
    let mut ok = true;
    let mut line = |name: &str, pass: bool, detail: String| {
        ok &= pass;
        println!("{name}: {} ({detail})", if pass { "pass" } else { "FAIL" });
    };
    let ft = fault_tolerance_check(&map);
    line(
        "rack caps and node distinctness",
        ft.passed(),
        format!(
            "{} stripes, {} rack violations, {} node collisions",
            ft.stripes,
            ft.rack_violations.len(),
            ft.node_collisions.len()
        ),
    );
    let er = exhaustive_erasure_check(&map);
    line(
        "erasure tolerance",
        er.passed(),
        format!(
            "{} patterns of one rack or {} nodes, {} undecodable",
            er.patterns_checked,
            er.node_erasures,
            er.failures.len()
        ),
    );
    // equal per-node counts are only promised by intact full D3 cycles
    let uni = uniformity_report(&map);
    let full_cycles = map.is_d3()
        && map.recovery.is_none()
        && map
            .d3_layout()
            .map(|l| map.num_stripes() % l.stripes_per_cycle() == 0)
            .unwrap_or(false);
    if full_cycles {
        line("uniformity", uni.uniform, "full-cycle D3 map".into());
    } else {
        println!(
            "uniformity: {} (not required for this map)",
            if uni.uniform {
                "uniform"
            } else {
                "not uniform"
            }
        );
    }
    Ok(if ok {
        Status::Pass
    } else {
        Status::InvariantFailure
    })
}

#[allow(clippy::too_many_arguments)]
fn recover(
    map_path: &Path,
    failed: BlockAddress,
    seed: u64,
    report: &Path,
    plan_out: Option<&Path>,
    map_out: Option<&Path>,
    traffic_out: Option<&Path>,
) -> anyhow::Result<Status> {
    let map = load_map(map_path)?;
    let plan = plan_node_recovery(&map, failed, seed)?;
    let traffic = accumulate_traffic(&plan, &map.config);
    let time = recovery_time(&traffic, &BandwidthModel::of(&map.config)?);
    let lambda = lambda_metric(&traffic).ok();
    let tput = throughput(plan.failed_bytes(), time).ok().map(|t| t / 1e6);
    write(
        report,
        &metric_csv(&[
            ("cross_rack_bytes", traffic.cross_bytes().to_string()),
            ("lambda", opt(lambda)),
            ("recovery_time_s", time.to_string()),
            ("throughput_MBps", opt(tput)),
        ])?,
    )?;
    if let Some(p) = plan_out {
        write(p, &plan.to_json()?)?;
    }
    if let Some(p) = traffic_out {
        write(p, &traffic.to_csv()?)?;
    }
    if let Some(p) = map_out {
        write(p, &apply_recovery(&map, &plan)?.to_json()?)?;
    }
    println!(
        "rebuilt {} blocks of {failed}: {} cross-rack bytes, lambda {}, {time:.3} s",
        plan.stripes.len(),
        traffic.cross_bytes(),
        lambda
            .map(|l| format!("{l:.4}"))
            .unwrap_or_else(|| "n/a".into())
    );
    Ok(Status::Pass)
}

fn degraded_read(
    map_path: &Path,
    stripe: usize,
    block: usize,
    client: BlockAddress,
    seed: u64,
    report: &Path,
    plan_out: Option<&Path>,
) -> anyhow::Result<Status> {
    let map = load_map(map_path)?;
    let plan = plan_degraded_read(&map, stripe, block, client, seed)?;
    let bw = BandwidthModel::of(&map.config)?;
    let latency = degraded_read_latency(&plan, map.config.block_size, &bw);
    write(
        report,
        &metric_csv(&[
            ("stripe", stripe.to_string()),
            ("block", block.to_string()),
            ("client", client.to_string()),
            ("cross_reads", plan.cross_reads.to_string()),
            (
                "cross_rack_bytes",
                (plan.cross_reads as u64 * map.config.block_size).to_string(),
            ),
            ("latency_s", latency.to_string()),
        ])?,
    )?;
    if let Some(p) = plan_out {
        write(p, &serde_json::to_string_pretty(&plan)?)?;
    }
    println!(
        "stripe {stripe} block {block} at {client}: {} cross-rack reads, {latency:.3} s",
        plan.cross_reads
    );
    Ok(Status::Pass)
}

fn migrate(
    map_path: &Path,
    relived: BlockAddress,
    out: &Path,
    report: &Path,
) -> anyhow::Result<Status> {
    let map = load_map(map_path)?;
    let batches = plan_migration(&map, relived)?;
    let restored = apply_migration(&map, &batches)?;
    write(out, &restored.to_json()?)?;
    write(report, &batches_to_csv(&batches)?)?;
    let moves: usize = batches.iter().map(|b| b.moves.len()).sum();
    println!(
        "{} batches, {moves} blocks moved back to {relived}",
        batches.len()
    );
    Ok(Status::Pass)
}

fn oracle(code: CodeScheme) -> anyhow::Result<Status> {
    let formula = mu_formula(&code)?;
    let best = min_traffic_oracle(&code)?;
    let dec = |r: num_rational::Ratio<u64>| *r.numer() as f64 / *r.denom() as f64;
    println!("formula {} ({formula})", dec(formula));
    println!("oracle {} ({best})", dec(best));
    Ok(if formula == best {
        Status::Pass
    } else {
        Status::InvariantFailure
    })
}

fn experiment(config: &Path, out: &Path, exec: Execution) -> anyhow::Result<Status> {
    let cfg = ExperimentConfig::from_json(&read(config)?)
        .with_context(|| format!("parsing experiment {}", config.display()))?;
    let rows = run_experiment(&cfg, exec)?;
    write(out, &rows_to_csv(&rows)?)?;
    println!("{} cells written to {}", rows.len(), out.display());
    Ok(Status::Pass)
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::Layout {
            placer,
            code,
            racks,
            nodes,
            stripes,
            seed,
            block_mb,
            cross_bw,
            inner_bw,
            out,
        } => layout(
            placer, code, racks, nodes, stripes, seed, block_mb, cross_bw, inner_bw, &out,
        ),
        Command::Verify { map } => verify(&map),
        Command::Recover {
            map,
            fail,
            seed,
            report,
            plan,
            out,
            traffic,
        } => recover(
            &map,
            fail,
            seed,
            &report,
            plan.as_deref(),
            out.as_deref(),
            traffic.as_deref(),
        ),
        Command::DegradedRead {
            map,
            stripe,
            block,
            client,
            seed,
            report,
            plan,
        } => degraded_read(&map, stripe, block, client, seed, &report, plan.as_deref()),
        Command::Migrate {
            map,
            relived,
            out,
            report,
        } => migrate(&map, relived, &out, &report),
        Command::Oracle { code } => oracle(code),
        Command::Experiment { config, out } => experiment(&config, &out, exec(cli.sequential)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::InvariantFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
