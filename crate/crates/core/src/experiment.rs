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

//! Parameter sweeps: every placer × code × cluster × block size ×
//! bandwidth × seed cell places stripes, fails one node, plans recovery,
//! and simulates it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codes::CodeScheme;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::placement::{place, BlockAddress, ClusterConfig, D3Layout, Placer};
use crate::recovery::plan_node_recovery;
use crate::simnet::{accumulate_traffic, lambda_metric, recovery_time, throughput, BandwidthModel};

fn default_placers() -> Vec<Placer> {
    vec![Placer::D3, Placer::Rdd]
}
fn default_block_mb() -> Vec<u64> {
    vec![16]
}
fn default_cross() -> Vec<f64> {
    vec![100.0]
}
fn default_inner() -> Vec<f64> {
    vec![1000.0]
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_placers")]
    pub placers: Vec<Placer>,
    pub codes: Vec<CodeScheme>,
    pub racks: Vec<usize>,
    pub nodes: Vec<usize>,
    #[serde(default = "default_block_mb")]
    pub block_mb: Vec<u64>,
    #[serde(default = "default_cross")]
    pub cross_bw: Vec<f64>,
    #[serde(default = "default_inner")]
    pub inner_bw: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Stripes per map; defaults to one full D3 cycle of the cell's cluster.
    #[serde(default)]
    pub stripes: Option<usize>,
    /// Failed node; defaults to one drawn from the cell's seed.
    #[serde(default)]
    pub failed: Option<BlockAddress>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        for (name, empty) in [
            ("placers", cfg.placers.is_empty()),
            ("codes", cfg.codes.is_empty()),
            ("racks", cfg.racks.is_empty()),
            ("nodes", cfg.nodes.is_empty()),
            ("block_mb", cfg.block_mb.is_empty()),
            ("cross_bw", cfg.cross_bw.is_empty()),
            ("inner_bw", cfg.inner_bw.is_empty()),
            ("seeds", cfg.seeds.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("experiment field {name} is empty")));
            }
        }
        Ok(cfg)
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &placer in &self.placers {
            for &code in &self.codes {
                for &r in &self.racks {
                    for &n in &self.nodes {
                        for &block_mb in &self.block_mb {
                            for &cross_bw in &self.cross_bw {
                                for &inner_bw in &self.inner_bw {
                                    for &seed in &self.seeds {
                                        out.push(Cell {
                                            placer,
                                            code,
                                            config: ClusterConfig::new(r, n)
                                                .with_bandwidth(inner_bw, cross_bw)
                                                .with_block_size(block_mb * 1_000_000),
                                            seed,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub placer: Placer,
    pub code: CodeScheme,
    pub config: ClusterConfig,
    pub seed: u64,
}

/// One CSV row. `lambda` and throughput are empty when recovery moves no
/// cross-rack data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub placer: Placer,
    pub code: CodeScheme,
    pub r: usize,
    pub n: usize,
    pub block_mb: f64,
    pub cross_bw: f64,
    pub inner_bw: f64,
    pub seed: u64,
    pub lambda: Option<f64>,
    pub recovery_time_s: f64,
    #[serde(rename = "throughput_MBps")]
    pub throughput_mbps: Option<f64>,
}

/// Node failed in a cell with this seed, uniform over the cluster.
pub fn failure_for_seed(config: &ClusterConfig, seed: u64) -> BlockAddress {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    config.address(rng.gen_range(0..config.node_count()))
}

pub fn run_cell(
    cell: &Cell,
    stripes: Option<usize>,
    failed: Option<BlockAddress>,
) -> Result<ExperimentRow> {
    let cfg = &cell.config;
    let count = match stripes {
        Some(s) => s,
        None => D3Layout::new(cfg, &cell.code)?.stripes_per_cycle(),
    };
    let map = place(cell.placer, cfg, &cell.code, count, cell.seed)?;
    let failed = failed.unwrap_or_else(|| failure_for_seed(cfg, cell.seed));
    let plan = plan_node_recovery(&map, failed, cell.seed)?;
    let traffic = accumulate_traffic(&plan, cfg);
    let time = recovery_time(&traffic, &BandwidthModel::of(cfg)?);
    Ok(ExperimentRow {
        placer: cell.placer,
        code: cell.code,
        r: cfg.racks,
        n: cfg.nodes,
        block_mb: cfg.block_size as f64 / 1e6,
        cross_bw: cfg.cross_bw,
        inner_bw: cfg.inner_bw,
        seed: cell.seed,
        lambda: lambda_metric(&traffic).ok(),
        recovery_time_s: time,
        throughput_mbps: throughput(plan.failed_bytes(), time).ok().map(|t| t / 1e6),
    })
}

pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ExperimentRow>> {
    exec.map(&config.cells(), |c| {
        run_cell(c, config.stripes, config.failed)
    })
    .into_iter()
    .collect()
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "placer",
            "code",
            "r",
            "n",
            "block_mb",
            "cross_bw",
            "inner_bw",
            "seed",
            "lambda",
            "recovery_time_s",
            "throughput_MBps",
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "placers": ["d3", "rdd"],
        "codes": ["rs:3,2"],
        "racks": [5],
        "nodes": [3],
        "seeds": [1, 2]
    }"#;

    #[test]
    fn csv_header_and_rows() {
        let cfg = ExperimentConfig::from_json(SMALL).unwrap();
        let rows = run_experiment(&cfg, Execution::Parallel).unwrap();
        assert_eq!(rows.len(), 4);
        let csv = rows_to_csv(&rows).unwrap();
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "placer,code,r,n,block_mb,cross_bw,inner_bw,seed,lambda,recovery_time_s,throughput_MBps"
        );
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("d3,\"rs:3,2\",5,3,16.0,100.0,1000.0,1,0.0,"));
        assert_eq!(rows, run_experiment(&cfg, Execution::Sequential).unwrap());
    }

    #[test]
    fn empty_axes_rejected() {
        assert!(
            ExperimentConfig::from_json(r#"{"codes": [], "racks": [5], "nodes": [3]}"#).is_err()
        );
        assert!(ExperimentConfig::from_json(
            r#"{"codes": ["rs:3,2"], "racks": [5], "nodes": [3], "bogus": 1}"#
        )
        .is_err());
    }

    #[test]
    fn seeded_failure_is_stable() {
        let cfg = ClusterConfig::new(8, 3);
        assert_eq!(failure_for_seed(&cfg, 7), failure_for_seed(&cfg, 7));
        assert!(cfg.contains(failure_for_seed(&cfg, 7)));
    }

    #[test]
    fn invalid_cluster_reports_error() {
        let cfg = ExperimentConfig::from_json(
            r#"{"placers": ["d3"], "codes": ["rs:3,2"], "racks": [6], "nodes": [3]}"#,
        )
        .unwrap();
        assert!(run_experiment(&cfg, Execution::Sequential).is_err());
    }
}
