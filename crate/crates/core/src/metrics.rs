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

//! Audits over maps and recovery traffic: per-node uniformity, fault
//! tolerance by exhaustive erasure, node and rack balance, and a
//! brute-force search for the least cross-rack recovery traffic.

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::coder::Coder;
use crate::codes::{BlockClass, CodeScheme};
use crate::error::{Error, Result};
use crate::gf256;
use crate::par::Execution;
use crate::placement::{BlockAddress, PlacementMap};
use crate::simnet::TrafficMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformityReport {
    /// Blocks per node (by node index) for each class.
    pub counts: BTreeMap<BlockClass, Vec<u64>>,
    /// Every node holds the same count of every class.
    pub uniform: bool,
    /// Nodes of the same rack hold equal counts of every class.
    pub rack_uniform: bool,
}

fn all_equal(xs: &[u64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

pub fn uniformity_report(map: &PlacementMap) -> UniformityReport {
    let counts = map.class_counts();
    let n = map.config.nodes;
    let uniform = counts.values().all(|c| all_equal(c));
    let rack_uniform = counts.values().all(|c| c.chunks(n).all(all_equal));
    UniformityReport {
        counts,
        uniform,
        rack_uniform,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultToleranceReport {
    pub stripes: usize,
    /// Stripes with more blocks in one rack than the code allows.
    pub rack_violations: Vec<usize>,
    /// Stripes with two blocks on one node.
    pub node_collisions: Vec<usize>,
}

impl FaultToleranceReport {
    pub fn passed(&self) -> bool {
        self.rack_violations.is_empty() && self.node_collisions.is_empty()
    }
}

/// Structural check: per-rack caps and node distinctness in every stripe.
pub fn fault_tolerance_check(map: &PlacementMap) -> FaultToleranceReport {
    let cap = map.scheme.rack_cap();
    let mut report = FaultToleranceReport {
        stripes: map.num_stripes(),
        rack_violations: Vec::new(),
        node_collisions: Vec::new(),
    };
    for (s, stripe) in map.stripes.iter().enumerate() {
        let mut racks: HashMap<usize, usize> = HashMap::new();
        for a in stripe {
            *racks.entry(a.rack).or_default() += 1;
        }
        if racks.values().any(|&c| c > cap) {
            report.rack_violations.push(s);
        }
        let mut nodes = stripe.clone();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.len() != stripe.len() {
            report.node_collisions.push(s);
        }
    }
    report
}

/// Decides recoverability of erasure patterns from the generator rank,
/// memoized by erased-block mask.
struct Decodability {
    generator: gf256::Matrix,
    k: usize,
    memo: HashMap<u64, bool>,
}

impl Decodability {
    fn new(scheme: &CodeScheme) -> Self {
        Decodability {
            generator: Coder::new(*scheme).generator().clone(),
            k: scheme.k(),
            memo: HashMap::new(),
        }
    }

    fn survives(&mut self, erased: u64) -> bool {
        if let Some(&v) = self.memo.get(&erased) {
            return v;
        }
        let rows: Vec<Vec<u8>> = self
            .generator
            .iter()
            .enumerate()
            .filter(|(b, _)| erased >> b & 1 == 0)
            .map(|(_, r)| r.clone())
            .collect();
        let ok = gf256::rank(&rows) == self.k;
        self.memo.insert(erased, ok);
        ok
    }
}

fn masks(len: usize, size: usize) -> impl Iterator<Item = u64> {
    (0u64..1 << len).filter(move |m| m.count_ones() as usize == size)
}

/// Largest `t` such that every `t`-block erasure is recoverable.
pub fn erasure_tolerance(scheme: &CodeScheme) -> usize {
    if let CodeScheme::Rs { m, .. } = *scheme {
        return m;
    }
    let mut dec = Decodability::new(scheme);
    let len = scheme.len();
    (1..=len)
        .take_while(|&t| masks(len, t).all(|m| dec.survives(m)))
        .last()
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErasureReport {
    pub stripes: usize,
    /// Node erasure size tried against every stripe.
    pub node_erasures: usize,
    pub patterns_checked: u64,
    /// `(stripe, erased blocks)` that could not be decoded.
    pub failures: Vec<(usize, Vec<usize>)>,
}

impl ErasureReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Erases every rack, and every set of `erasure_tolerance` nodes, from each
/// stripe and checks that the survivors still decode.
pub fn exhaustive_erasure_check(map: &PlacementMap) -> ErasureReport {
    let scheme = map.scheme;
    let t = erasure_tolerance(&scheme);
    let mut dec = Decodability::new(&scheme);
    let mut report = ErasureReport {
        stripes: map.num_stripes(),
        node_erasures: t,
        patterns_checked: 0,
        failures: Vec::new(),
    };
    for (s, stripe) in map.stripes.iter().enumerate() {
        let mut by_rack: BTreeMap<usize, u64> = BTreeMap::new();
        let mut by_node: BTreeMap<BlockAddress, u64> = BTreeMap::new();
        for (b, a) in stripe.iter().enumerate() {
            *by_rack.entry(a.rack).or_default() |= 1 << b;
            *by_node.entry(*a).or_default() |= 1 << b;
        }
        let node_masks: Vec<u64> = by_node.into_values().collect();
        let mut patterns: Vec<u64> = by_rack.into_values().collect();
        let pick = t.min(node_masks.len());
        for sel in masks(node_masks.len(), pick) {
            patterns.push(
                (0..node_masks.len())
                    .filter(|i| sel >> i & 1 == 1)
                    .fold(0, |acc, i| acc | node_masks[i]),
            );
        }
        for erased in patterns {
            report.patterns_checked += 1;
            if !dec.survives(erased) {
                let blocks = (0..stripe.len()).filter(|b| erased >> b & 1 == 1).collect();
                report.failures.push((s, blocks));
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTally {
    pub node: BlockAddress,
    pub reads: u64,
    pub writes: u64,
    pub computes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub failed: BlockAddress,
    /// Cross-rack bytes sent and received by each rack other than the failed one.
    pub rack_up: BTreeMap<usize, u64>,
    pub rack_down: BTreeMap<usize, u64>,
    pub nodes: Vec<NodeTally>,
    pub racks_balanced: bool,
    /// Reads, writes, and computes are each equal inside every surviving rack.
    pub nodes_balanced_in_racks: bool,
    /// Same, across all nodes of the surviving racks.
    pub nodes_balanced: bool,
}

impl BalanceReport {
    /// Rack balance plus in-rack node balance; LRCs also need balance across
    /// every surviving node.
    pub fn passed(&self, scheme: &CodeScheme) -> bool {
        self.racks_balanced
            && self.nodes_balanced_in_racks
            && (scheme.is_rs() || self.nodes_balanced)
    }

    /// Largest minus smallest port load, a measure of how far off balance is.
    pub fn port_spread(&self) -> u64 {
        let loads: Vec<u64> = self
            .rack_up
            .values()
            .chain(self.rack_down.values())
            .copied()
            .collect();
        loads.iter().max().unwrap_or(&0) - loads.iter().min().unwrap_or(&0)
    }
}

pub fn balance_report(traffic: &TrafficMatrix, failed: BlockAddress) -> BalanceReport {
    let n = traffic.nodes;
    let surviving: Vec<usize> = (0..traffic.racks).filter(|&r| r != failed.rack).collect();
    let rack_up: BTreeMap<usize, u64> = surviving.iter().map(|&r| (r, traffic.up[r])).collect();
    let rack_down: BTreeMap<usize, u64> = surviving.iter().map(|&r| (r, traffic.down[r])).collect();
    let tally = |i: usize| NodeTally {
        node: BlockAddress::new(i / n, i % n),
        reads: traffic.reads[i],
        writes: traffic.writes[i],
        computes: traffic.computes[i],
    };
    let nodes: Vec<NodeTally> = surviving
        .iter()
        .flat_map(|&r| (r * n..(r + 1) * n).map(tally))
        .collect();
    let balanced = |group: &[NodeTally]| {
        group.windows(2).all(|w| {
            (w[0].reads, w[0].writes, w[0].computes) == (w[1].reads, w[1].writes, w[1].computes)
        })
    };
    let ups: Vec<u64> = rack_up.values().copied().collect();
    let downs: Vec<u64> = rack_down.values().copied().collect();
    BalanceReport {
        failed,
        racks_balanced: all_equal(&ups) && all_equal(&downs),
        nodes_balanced_in_racks: nodes.chunks(n).all(balanced),
        nodes_balanced: balanced(&nodes),
        rack_up,
        rack_down,
        nodes,
    }
}

pub const ORACLE_MAX_LEN: usize = 6;

fn partitions(total: usize, max_part: usize) -> Vec<Vec<usize>> {
    if total == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in (1..=max_part.min(total)).rev() {
        for mut rest in partitions(total - first, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Fewest racks among `survivors` (excluding `target`) whose blocks add up
/// to `need`.
fn fewest_sources(survivors: &[usize], target: Option<usize>, need: usize) -> Option<usize> {
    let racks: Vec<usize> = (0..survivors.len())
        .filter(|&j| Some(j) != target)
        .collect();
    (0u32..1 << racks.len())
        .filter(|sel| {
            racks
                .iter()
                .enumerate()
                .filter(|(i, _)| sel >> i & 1 == 1)
                .map(|(_, &j)| survivors[j])
                .sum::<usize>()
                >= need
        })
        .map(|sel| sel.count_ones() as usize)
        .min()
}

/// Least average cross-rack reads per lost block over every grouping of an
/// RS stripe into racks of at most `m` blocks, every target (a fresh rack, or
/// any rack left with at most `m - 1` survivors), and every choice of source
/// racks.
pub fn min_traffic_oracle(scheme: &CodeScheme) -> Result<Ratio<u64>> {
    let CodeScheme::Rs { k, m } = *scheme else {
        return Err(Error::Scheme(format!(
            "oracle covers RS codes only, got {scheme}"
        )));
    };
    let len = scheme.len();
    if len > ORACLE_MAX_LEN {
        return Err(Error::Scheme(format!(
            "oracle is limited to stripes of {ORACLE_MAX_LEN} blocks, {scheme} has {len}"
        )));
    }
    let mut best: Option<Ratio<u64>> = None;
    for groups in partitions(len, m) {
        let mut total = 0u64;
        let mut feasible = true;
        for (f, &size) in groups.iter().enumerate() {
            let mut survivors = groups.clone();
            survivors[f] -= 1;
            let targets = std::iter::once(None)
                .chain((0..groups.len()).filter(|&j| survivors[j] < m).map(Some));
            let x = targets
                .filter_map(|t| {
                    let local = t.map_or(0, |j| survivors[j]);
                    if local >= k {
                        Some(0)
                    } else {
                        fewest_sources(&survivors, t, k - local)
                    }
                })
                .min();
            match x {
                Some(x) => total += size as u64 * x as u64,
                None => feasible = false,
            }
        }
        if feasible {
            let avg = Ratio::new(total, len as u64);
            best = Some(best.map_or(avg, |b| b.min(avg)));
        }
    }
    best.ok_or_else(|| Error::Infeasible(format!("no grouping of {scheme} can be recovered")))
}

/// `min_traffic_oracle` for many schemes at once.
pub fn oracle_sweep(schemes: &[CodeScheme], exec: Execution) -> Vec<Result<Ratio<u64>>> {
    exec.map(schemes, min_traffic_oracle)
}
