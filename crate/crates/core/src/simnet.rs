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

//! Static two-tier bandwidth model: every rack port (up and down) runs at
//! the cross-rack rate and every node link (tx and rx) at the inner rate, all
//! full-duplex. A plan's time is its busiest resource's time.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{BlockAddress, ClusterConfig};
use crate::recovery::{Payload, RecoveryPlan, RecoveryStep, StripeRecovery};

/// Byte and operation tallies for one recovery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficMatrix {
    pub racks: usize,
    pub nodes: usize,
    /// Rack whose port is left out of `λ` (the failed node's rack).
    pub excluded_rack: Option<usize>,
    pub up: Vec<u64>,
    pub down: Vec<u64>,
    pub node_tx: Vec<u64>,
    pub node_rx: Vec<u64>,
    pub reads: Vec<u64>,
    pub writes: Vec<u64>,
    pub computes: Vec<u64>,
}

impl TrafficMatrix {
    pub fn new(config: &ClusterConfig) -> Self {
        let (r, nodes) = (config.racks, config.node_count());
        TrafficMatrix {
            racks: r,
            nodes: config.nodes,
            excluded_rack: None,
            up: vec![0; r],
            down: vec![0; r],
            node_tx: vec![0; nodes],
            node_rx: vec![0; nodes],
            reads: vec![0; nodes],
            writes: vec![0; nodes],
            computes: vec![0; nodes],
        }
    }

    fn idx(&self, a: BlockAddress) -> usize {
        a.rack * self.nodes + a.node
    }

    pub fn cross_bytes(&self) -> u64 {
        self.up.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cross_bytes() == 0 && self.node_tx.iter().all(|&b| b == 0)
    }

    /// Adds one stripe's steps, each transfer carrying `block_size` bytes.
    pub fn add_stripe(&mut self, plan: &StripeRecovery, block_size: u64) {
        for step in &plan.steps {
            match step {
                RecoveryStep::InnerRead { payload, src, dst } => {
                    let (s, d) = (self.idx(*src), self.idx(*dst));
                    if matches!(payload, Payload::Block(_)) {
                        self.reads[s] += 1;
                    }
                    if src != dst {
                        self.node_tx[s] += block_size;
                        self.node_rx[d] += block_size;
                    }
                }
                RecoveryStep::CrossSend { payload, src, dst } => {
                    let (s, d) = (self.idx(*src), self.idx(*dst));
                    if matches!(payload, Payload::Block(_)) {
                        self.reads[s] += 1;
                    }
                    self.up[src.rack] += block_size;
                    self.down[dst.rack] += block_size;
                    self.node_tx[s] += block_size;
                    self.node_rx[d] += block_size;
                }
                RecoveryStep::Aggregate { at, .. } | RecoveryStep::Decode { at, .. } => {
                    let i = self.idx(*at);
                    self.computes[i] += 1;
                }
                RecoveryStep::Write { at, .. } => {
                    let i = self.idx(*at);
                    self.writes[i] += 1;
                }
            }
        }
    }

    /// Port loads that enter `λ`: both directions of every rack except the
    /// excluded one.
    pub fn surviving_port_loads(&self) -> Vec<u64> {
        (0..self.racks)
            .filter(|&r| Some(r) != self.excluded_rack)
            .flat_map(|r| [self.up[r], self.down[r]])
            .collect()
    }

    /// `port_or_node,direction,bytes` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["port_or_node", "direction", "bytes"])?;
        for r in 0..self.racks {
            w.write_record([format!("rack{r}"), "up".into(), self.up[r].to_string()])?;
            w.write_record([format!("rack{r}"), "down".into(), self.down[r].to_string()])?;
        }
        for i in 0..self.node_tx.len() {
            let a = BlockAddress::new(i / self.nodes, i % self.nodes);
            w.write_record([a.to_string(), "tx".into(), self.node_tx[i].to_string()])?;
            w.write_record([a.to_string(), "rx".into(), self.node_rx[i].to_string()])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?).unwrap())
    }
}

pub fn accumulate_traffic(plan: &RecoveryPlan, config: &ClusterConfig) -> TrafficMatrix {
    let mut t = TrafficMatrix::new(config);
    t.excluded_rack = Some(plan.failed.rack);
    for sp in &plan.stripes {
        t.add_stripe(sp, plan.block_size);
    }
    t
}

/// `(max - mean) / mean` over surviving port loads, exactly.
pub fn lambda_exact(traffic: &TrafficMatrix) -> Result<Ratio<u64>> {
    let loads = traffic.surviving_port_loads();
    let total: u64 = loads.iter().sum();
    if total == 0 {
        return Err(Error::Simulation("λ is undefined without port load".into()));
    }
    let max = *loads.iter().max().unwrap();
    Ok(Ratio::new(max * loads.len() as u64 - total, total))
}

pub fn lambda_metric(traffic: &TrafficMatrix) -> Result<f64> {
    let l = lambda_exact(traffic)?;
    Ok(*l.numer() as f64 / *l.denom() as f64)
}

/// Link rates in Mb/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthModel {
    pub inner_bw: f64,
    pub cross_bw: f64,
}

impl BandwidthModel {
    pub fn new(inner_bw: f64, cross_bw: f64) -> Result<Self> {
        if !(inner_bw > 0.0 && cross_bw > 0.0) {
            return Err(Error::Simulation("bandwidths must be positive".into()));
        }
        Ok(BandwidthModel { inner_bw, cross_bw })
    }

    pub fn of(config: &ClusterConfig) -> Result<Self> {
        Self::new(config.inner_bw, config.cross_bw)
    }
}

fn seconds(bytes: u64, mbps: f64) -> f64 {
    bytes as f64 * 8.0 / (mbps * 1e6)
}

pub fn recovery_time(traffic: &TrafficMatrix, bw: &BandwidthModel) -> f64 {
    let port = traffic
        .up
        .iter()
        .chain(&traffic.down)
        .copied()
        .max()
        .unwrap_or(0);
    let link = traffic
        .node_tx
        .iter()
        .chain(&traffic.node_rx)
        .copied()
        .max()
        .unwrap_or(0);
    seconds(port, bw.cross_bw).max(seconds(link, bw.inner_bw))
}

/// Bytes per second.
pub fn throughput(failed_bytes: u64, time: f64) -> Result<f64> {
    if time <= 0.0 {
        return Err(Error::Simulation(
            "throughput undefined for zero recovery time".into(),
        ));
    }
    Ok(failed_bytes as f64 / time)
}

/// Stage one: source racks read and aggregate in parallel. Stage two: every
/// cross-rack transfer queues on the client's downlink.
pub fn degraded_read_latency(plan: &StripeRecovery, block_size: u64, bw: &BandwidthModel) -> f64 {
    let mut inner: std::collections::BTreeMap<usize, u64> = Default::default();
    let mut cross = 0u64;
    for step in &plan.steps {
        match step {
            RecoveryStep::InnerRead { src, dst, .. } if src != dst => {
                *inner.entry(src.rack).or_default() += block_size;
            }
            RecoveryStep::CrossSend { .. } => cross += block_size,
            _ => {}
        }
    }
    let stage1 = inner
        .values()
        .map(|&b| seconds(b, bw.inner_bw))
        .fold(0.0, f64::max);
    stage1 + seconds(cross, bw.cross_bw)
}

/// Everything the reports need from one simulated recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub failed_blocks: usize,
    pub cross_rack_bytes: u64,
    pub lambda: f64,
    pub recovery_time_s: f64,
    pub throughput_mbps: f64,
}

pub fn summarize(plan: &RecoveryPlan, config: &ClusterConfig) -> Result<RecoverySummary> {
    let traffic = accumulate_traffic(plan, config);
    let time = recovery_time(&traffic, &BandwidthModel::of(config)?);
    Ok(RecoverySummary {
        failed_blocks: plan.stripes.len(),
        cross_rack_bytes: traffic.cross_bytes(),
        lambda: lambda_metric(&traffic)?,
        recovery_time_s: time,
        throughput_mbps: throughput(plan.failed_bytes(), time)? / 1e6,
    })
}
