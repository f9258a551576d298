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

//! Single-node failure recovery planning.
//!
//! A plan lists, per lost block, the ordered steps that rebuild it: disk and
//! inner-rack reads, inner-rack aggregation into a partial combination,
//! cross-rack transfers, the decode, and the final write.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coder::{Coder, RepairEquation};
use crate::codes::{CodeScheme, StripeGrouping};
use crate::error::{Error, Result};
use crate::gf256;
use crate::oa::AddressingTable;
use crate::par::Execution;
use crate::placement::{
    admissible, BlockAddress, D3Layout, Destination, HashPlacer, PlacementMap, Placer, Provenance,
    RecoveredBlock, RecoveryRecord, Relabel, StripeShape,
};

/// What travels in a transfer: one stored block or a partial combination
/// of the listed blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Block(usize),
    Partial(Vec<usize>),
}

impl Payload {
    pub fn blocks(&self) -> Vec<usize> {
        match self {
            Payload::Block(b) => vec![*b],
            Payload::Partial(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RecoveryStep {
    /// Same-rack move; `src == dst` is a local disk read.
    InnerRead {
        payload: Payload,
        src: BlockAddress,
        dst: BlockAddress,
    },
    /// Combines blocks already present at `at` into `Partial(inputs)`.
    Aggregate {
        at: BlockAddress,
        inputs: Vec<usize>,
    },
    CrossSend {
        payload: Payload,
        src: BlockAddress,
        dst: BlockAddress,
    },
    Decode {
        at: BlockAddress,
        inputs: Vec<Payload>,
    },
    Write {
        at: BlockAddress,
        block: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryCase {
    /// `m` divides the stripe length: aggregate every other group into a new rack.
    Divisible,
    /// Some group holds at most `m - 1` surviving blocks and becomes the target.
    SmallGroup,
    /// The lost block sat in an `m`-group; rebuild next to the `(m-1)`-group.
    IntoShortGroup,
    /// The lost block sat in the `(m-1)`-group; rebuild in a new rack.
    ShortIntoSpare,
    LrcLocal,
    LrcGlobal,
    Baseline,
}

/// Recovery of one lost block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripeRecovery {
    pub stripe: usize,
    pub block: usize,
    pub origin: BlockAddress,
    /// Rebuild node, or the client for a degraded read.
    pub target: BlockAddress,
    pub destination: Destination,
    pub case: RecoveryCase,
    /// Blocks combined by the decode.
    pub sources: Vec<usize>,
    /// Racks other than the target's that send data.
    pub cross_reads: usize,
    pub steps: Vec<RecoveryStep>,
}

impl StripeRecovery {
    pub fn cross_sends(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, RecoveryStep::CrossSend { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPlan {
    pub failed: BlockAddress,
    pub provenance: Provenance,
    /// Seed used for baseline source and target choices.
    pub seed: u64,
    pub block_size: u64,
    pub stripes: Vec<StripeRecovery>,
}

impl RecoveryPlan {
    pub fn failed_bytes(&self) -> u64 {
        self.stripes.len() as u64 * self.block_size
    }

    pub fn cross_reads(&self) -> usize {
        self.stripes.iter().map(|s| s.cross_reads).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Which recovery case the lost `block` falls under and the group whose rack
/// receives the rebuilt block (`None` means the spare rack).
pub fn classify_rs(grouping: &StripeGrouping, block: usize) -> (RecoveryCase, Option<usize>) {
    let m = grouping.m;
    let f = grouping.group_of(block);
    if grouping.b == 0 {
        return (RecoveryCase::Divisible, None);
    }
    if grouping.b < m - 1 {
        let target = (0..grouping.groups)
            .rev()
            .filter(|&j| j != f)
            .find(|&j| grouping.group_size(j) < m);
        return (RecoveryCase::SmallGroup, target);
    }
    let short = grouping.groups - 1;
    debug_assert_eq!(grouping.group_size(short), m - 1);
    if f == short {
        (RecoveryCase::ShortIntoSpare, None)
    } else {
        (RecoveryCase::IntoShortGroup, Some(short))
    }
}

/// Source blocks for an RS rebuild, grouped per region-group.
fn select_rs_sources(
    grouping: &StripeGrouping,
    k: usize,
    block: usize,
    case: RecoveryCase,
    target: Option<usize>,
) -> Vec<usize> {
    let f = grouping.group_of(block);
    let survivors = |j: usize| grouping.group_range(j).filter(move |&b| b != block);
    let local: Vec<usize> = target
        .map(|t| survivors(t).take(k).collect())
        .unwrap_or_default();
    let need = k - local.len();
    let others: Vec<usize> = match case {
        RecoveryCase::ShortIntoSpare => (0..grouping.groups).flat_map(survivors).collect(),
        _ => (0..grouping.groups)
            .filter(|&j| j != f && Some(j) != target)
            .flat_map(|j| grouping.group_range(j))
            .collect(),
    };
    let mut sources = local;
    sources.extend(others.into_iter().take(need));
    sources.sort_unstable();
    sources
}

/// Rack of the spare region-group for table row `row`.
pub fn assign_h_rack(table: &AddressingTable, row: usize) -> usize {
    table.spare_rack(row)
}

/// Target node for a rebuilt block: the node after the group's
/// largest-subscript block, or round-robin over the spare rack by
/// `ordinal` (position among same-region spare-bound rebuilds).
pub fn select_recovered_target(
    layout: &D3Layout,
    stripe: usize,
    destination: Destination,
    ordinal: usize,
) -> BlockAddress {
    let n = layout.config().nodes;
    match destination {
        Destination::GroupRack { group } => {
            let last = match layout.shape() {
                StripeShape::Rs(g) => g.group_range(group).end - 1,
                StripeShape::Lrc(_) => group,
            };
            let a = layout.address(stripe, last);
            BlockAddress::new(a.rack, (a.node + 1) % n)
        }
        Destination::SpareRack | Destination::Elsewhere => {
            BlockAddress::new(layout.spare_rack(stripe), ordinal % n)
        }
    }
}

fn spare_bound(layout: &D3Layout, block: usize) -> bool {
    match layout.grouping() {
        Some(g) => classify_rs(g, block).1.is_none(),
        None => true,
    }
}

/// Number of earlier stripes in the same region whose block on `origin`
/// is rebuilt into the spare rack.
fn spare_ordinal(
    map: &PlacementMap,
    layout: &D3Layout,
    stripe: usize,
    origin: BlockAddress,
) -> usize {
    let per_region = layout.stripes_per_region();
    let start = stripe - stripe % per_region;
    (start..stripe)
        .filter(|&s| {
            map.block_on(s, origin)
                .is_some_and(|b| spare_bound(layout, b))
        })
        .count()
}

/// Builds read, aggregate, send, decode, and write steps. Racks other than
/// the target's aggregate at the node of their largest-subscript block.
fn build_steps(
    map: &PlacementMap,
    stripe: usize,
    sources: &[usize],
    target: BlockAddress,
    write: Option<usize>,
) -> (Vec<RecoveryStep>, usize) {
    let addr = |b: usize| map.stripes[stripe][b];
    let mut per_rack: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &b in sources {
        per_rack.entry(addr(b).rack).or_default().push(b);
    }
    let send = |payload: Payload, src: BlockAddress| {
        if src.rack == target.rack {
            RecoveryStep::InnerRead {
                payload,
                src,
                dst: target,
            }
        } else {
            RecoveryStep::CrossSend {
                payload,
                src,
                dst: target,
            }
        }
    };
    let mut steps = Vec::new();
    let mut inputs = Vec::new();
    let mut cross = 0;
    for (&rack, blocks) in &per_rack {
        if rack != target.rack {
            cross += 1;
        }
        if rack == target.rack || blocks.len() == 1 {
            for &b in blocks {
                steps.push(send(Payload::Block(b), addr(b)));
                inputs.push(Payload::Block(b));
            }
            continue;
        }
        let at = addr(*blocks.iter().max().unwrap());
        for &b in blocks {
            steps.push(RecoveryStep::InnerRead {
                payload: Payload::Block(b),
                src: addr(b),
                dst: at,
            });
        }
        steps.push(RecoveryStep::Aggregate {
            at,
            inputs: blocks.clone(),
        });
        steps.push(send(Payload::Partial(blocks.clone()), at));
        inputs.push(Payload::Partial(blocks.clone()));
    }
    steps.push(RecoveryStep::Decode { at: target, inputs });
    if let Some(block) = write {
        steps.push(RecoveryStep::Write { at: target, block });
    }
    (steps, cross)
}

fn lost_block(map: &PlacementMap, stripe: usize, block: usize) -> Result<BlockAddress> {
    map.locate_block(stripe, block)
}

fn require_d3(map: &PlacementMap) -> Result<D3Layout> {
    let layout = map.d3_layout().map_err(|_| {
        Error::Recovery(format!("{} map is not a D3 layout", map.provenance.placer))
    })?;
    if map.recovery.is_some() {
        return Err(Error::Recovery(
            "map already carries a recovery; migrate first".into(),
        ));
    }
    Ok(layout)
}

fn d3_rs_plan(
    map: &PlacementMap,
    layout: &D3Layout,
    stripe: usize,
    block: usize,
    client: Option<BlockAddress>,
    ordinal: Option<usize>,
) -> Result<StripeRecovery> {
    let grouping = layout
        .grouping()
        .ok_or_else(|| Error::Recovery(format!("{} is not an RS scheme", map.scheme)))?;
    let origin = lost_block(map, stripe, block)?;
    let (case, group) = classify_rs(grouping, block);
    let sources = select_rs_sources(grouping, map.scheme.k(), block, case, group);
    let destination = match group {
        Some(group) => Destination::GroupRack { group },
        None => Destination::SpareRack,
    };
    let target = client.unwrap_or_else(|| {
        let ordinal = ordinal.unwrap_or_else(|| spare_ordinal(map, layout, stripe, origin));
        select_recovered_target(layout, stripe, destination, ordinal)
    });
    let (steps, cross_reads) = build_steps(
        map,
        stripe,
        &sources,
        target,
        client.is_none().then_some(block),
    );
    Ok(StripeRecovery {
        stripe,
        block,
        origin,
        target,
        destination,
        case,
        sources,
        cross_reads,
        steps,
    })
}

fn d3_lrc_plan(
    map: &PlacementMap,
    layout: &D3Layout,
    stripe: usize,
    block: usize,
    client: Option<BlockAddress>,
    ordinal: Option<usize>,
) -> Result<StripeRecovery> {
    let origin = lost_block(map, stripe, block)?;
    let sources = map.scheme.lrc_repair_set(block)?;
    let case = if map.scheme.local_group_of(block).is_some() {
        RecoveryCase::LrcLocal
    } else {
        RecoveryCase::LrcGlobal
    };
    let target = client.unwrap_or_else(|| {
        let ordinal = ordinal.unwrap_or_else(|| spare_ordinal(map, layout, stripe, origin));
        select_recovered_target(layout, stripe, Destination::SpareRack, ordinal)
    });
    let (steps, cross_reads) = build_steps(
        map,
        stripe,
        &sources,
        target,
        client.is_none().then_some(block),
    );
    Ok(StripeRecovery {
        stripe,
        block,
        origin,
        target,
        destination: Destination::SpareRack,
        case,
        sources,
        cross_reads,
        steps,
    })
}

/// Plans the rebuild of `block` of `stripe` on a D3 RS map.
pub fn plan_stripe_recovery_rs(
    map: &PlacementMap,
    stripe: usize,
    block: usize,
) -> Result<StripeRecovery> {
    let layout = require_d3(map)?;
    d3_rs_plan(map, &layout, stripe, block, None, None)
}

/// Plans the rebuild of `block` of `stripe` on a D3 LRC map.
pub fn plan_stripe_recovery_lrc(
    map: &PlacementMap,
    stripe: usize,
    block: usize,
) -> Result<StripeRecovery> {
    let layout = require_d3(map)?;
    if !map.scheme.is_lrc() {
        return Err(Error::Recovery(format!(
            "{} is not an LRC scheme",
            map.scheme
        )));
    }
    d3_lrc_plan(map, &layout, stripe, block, None, None)
}

fn stripe_rng(seed: u64, stripe: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stripe as u64);
    rng
}

fn baseline_sources(map: &PlacementMap, block: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let scheme = map.scheme;
    let mut sources = match scheme {
        CodeScheme::Rs { k, .. } => {
            let mut survivors: Vec<usize> = (0..scheme.len()).filter(|&b| b != block).collect();
            survivors.shuffle(rng);
            survivors.truncate(k);
            survivors
        }
        CodeScheme::Lrc { .. } => scheme.lrc_repair_set(block)?,
    };
    sources.sort_unstable();
    Ok(sources)
}

fn baseline_target(
    map: &PlacementMap,
    stripe: usize,
    block: usize,
    failed: BlockAddress,
    rng: &mut ChaCha8Rng,
) -> Result<BlockAddress> {
    let survivors: Vec<BlockAddress> = map.stripes[stripe]
        .iter()
        .enumerate()
        .filter(|&(b, _)| b != block)
        .map(|(_, &a)| a)
        .collect();
    let cap = map.scheme.rack_cap();
    match map.provenance.placer {
        Placer::Hdd => HashPlacer {
            config: map.config,
            rack_cap: cap,
            seed: map.provenance.seed.unwrap_or(0),
        }
        .select(stripe, block, &survivors, &[failed]),
        _ => {
            let candidates: Vec<BlockAddress> = map
                .config
                .all_nodes()
                .filter(|&a| a != failed && admissible(a, &survivors, cap))
                .collect();
            candidates
                .choose(rng)
                .copied()
                .ok_or_else(|| Error::Recovery(format!("no admissible target for stripe {stripe}")))
        }
    }
}

fn baseline_plan(
    map: &PlacementMap,
    stripe: usize,
    block: usize,
    seed: u64,
    client: Option<BlockAddress>,
) -> Result<StripeRecovery> {
    let origin = lost_block(map, stripe, block)?;
    let mut rng = stripe_rng(seed, stripe);
    let sources = baseline_sources(map, block, &mut rng)?;
    let target = match client {
        Some(c) => c,
        None => baseline_target(map, stripe, block, origin, &mut rng)?,
    };
    // baselines never aggregate: every source ships its block
    let addr = |b: usize| map.stripes[stripe][b];
    let mut steps = Vec::new();
    let mut racks: Vec<usize> = Vec::new();
    for &b in &sources {
        let src = addr(b);
        if src.rack == target.rack {
            steps.push(RecoveryStep::InnerRead {
                payload: Payload::Block(b),
                src,
                dst: target,
            });
        } else {
            steps.push(RecoveryStep::CrossSend {
                payload: Payload::Block(b),
                src,
                dst: target,
            });
            racks.push(src.rack);
        }
    }
    let cross_reads = racks.len();
    steps.push(RecoveryStep::Decode {
        at: target,
        inputs: sources.iter().map(|&b| Payload::Block(b)).collect(),
    });
    if client.is_none() {
        steps.push(RecoveryStep::Write { at: target, block });
    }
    Ok(StripeRecovery {
        stripe,
        block,
        origin,
        target,
        destination: Destination::Elsewhere,
        case: RecoveryCase::Baseline,
        sources,
        cross_reads,
        steps,
    })
}

/// Plans the rebuild of every block held by `failed`.
pub fn plan_node_recovery(
    map: &PlacementMap,
    failed: BlockAddress,
    seed: u64,
) -> Result<RecoveryPlan> {
    plan_node_recovery_with(map, failed, seed, Execution::default())
}

pub fn plan_node_recovery_with(
    map: &PlacementMap,
    failed: BlockAddress,
    seed: u64,
    exec: Execution,
) -> Result<RecoveryPlan> {
    if !map.config.contains(failed) {
        return Err(Error::NoSuchNode(failed));
    }
    let affected: Vec<(usize, usize)> = (0..map.num_stripes())
        .filter_map(|s| map.block_on(s, failed).map(|b| (s, b)))
        .collect();
    let layout = if map.is_d3() {
        Some(require_d3(map)?)
    } else {
        None
    };
    let plans = match &layout {
        Some(layout) => {
            // spare-rack ordinals are positional, so assign them up front
            let mut ordinals = HashMap::new();
            let mut counters: HashMap<usize, usize> = HashMap::new();
            for &(s, b) in &affected {
                if spare_bound(layout, b) {
                    let c = counters.entry(layout.position(s).region).or_default();
                    ordinals.insert(s, *c);
                    *c += 1;
                }
            }
            exec.map(&affected, |&(s, b)| {
                let ordinal = Some(ordinals.get(&s).copied().unwrap_or(0));
                if map.scheme.is_rs() {
                    d3_rs_plan(map, layout, s, b, None, ordinal)
                } else {
                    d3_lrc_plan(map, layout, s, b, None, ordinal)
                }
            })
        }
        None => exec.map(&affected, |&(s, b)| baseline_plan(map, s, b, seed, None)),
    };
    Ok(RecoveryPlan {
        failed,
        provenance: map.provenance,
        seed,
        block_size: map.config.block_size,
        stripes: plans.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Plans an on-the-fly rebuild of `block` at `client`. Uses the same sources
/// as recovery on D3 maps; baselines read `k` random survivors.
pub fn plan_degraded_read(
    map: &PlacementMap,
    stripe: usize,
    block: usize,
    client: BlockAddress,
    seed: u64,
) -> Result<StripeRecovery> {
    if !map.config.contains(client) {
        return Err(Error::NoSuchNode(client));
    }
    if map.is_d3() {
        let layout = require_d3(map)?;
        if map.scheme.is_rs() {
            d3_rs_plan(map, &layout, stripe, block, Some(client), None)
        } else {
            d3_lrc_plan(map, &layout, stripe, block, Some(client), None)
        }
    } else {
        baseline_plan(map, stripe, block, seed, Some(client))
    }
}

/// Returns the map with every rebuilt block moved to its target and the
/// recovery recorded for migration.
pub fn apply_recovery(map: &PlacementMap, plan: &RecoveryPlan) -> Result<PlacementMap> {
    if plan.stripes.is_empty() {
        return Ok(map.clone());
    }
    if let Some(prev) = &map.recovery {
        if prev.failed != plan.failed {
            return Err(Error::Recovery(format!(
                "map already recovered from {}, cannot also recover {}",
                prev.failed, plan.failed
            )));
        }
    }
    let mut out = map.clone();
    let cap = map.scheme.rack_cap();
    let mut recovered = Vec::with_capacity(plan.stripes.len());
    for sp in &plan.stripes {
        let current = out.locate_block(sp.stripe, sp.block)?;
        if current != sp.origin {
            return Err(Error::Recovery(format!(
                "stripe {} block {} is on {current}, plan expects {}",
                sp.stripe, sp.block, sp.origin
            )));
        }
        let stripe = &mut out.stripes[sp.stripe];
        let others: Vec<BlockAddress> = stripe
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != sp.block)
            .map(|(_, &a)| a)
            .collect();
        if sp.target == plan.failed || !admissible(sp.target, &others, cap) {
            return Err(Error::Recovery(format!(
                "target {} conflicts with stripe {}",
                sp.target, sp.stripe
            )));
        }
        stripe[sp.block] = sp.target;
        recovered.push(RecoveredBlock {
            stripe: sp.stripe,
            block: sp.block,
            origin: sp.origin,
            target: sp.target,
            destination: sp.destination,
        });
    }
    let relabels = if map.is_d3() {
        relabel(&map.d3_layout()?, &recovered)
    } else {
        Vec::new()
    };
    let mut record = map.recovery.clone().unwrap_or(RecoveryRecord {
        failed: plan.failed,
        recovered: Vec::new(),
        relabels: Vec::new(),
    });
    record.recovered.extend(recovered);
    record.relabels.extend(relabels);
    out.recovery = Some(record);
    Ok(out)
}

fn relabel(layout: &D3Layout, recovered: &[RecoveredBlock]) -> Vec<Relabel> {
    let mut groups: BTreeMap<(usize, usize), Relabel> = BTreeMap::new();
    for rb in recovered {
        let region = layout.position(rb.stripe).region;
        let failed_group = layout.group_of(rb.block);
        groups
            .entry((region, rb.target.rack))
            .or_insert(Relabel {
                region,
                rack: rb.target.rack,
                failed_group,
                destination: rb.destination,
                blocks: 0,
            })
            .blocks += 1;
    }
    groups.into_values().collect()
}

/// Runs a stripe plan on real payloads and returns the rebuilt block.
/// `blocks[b]` is the content of block `b`; the lost block's entry is never
/// read. Every step is checked against what its node actually holds.
pub fn execute_stripe(coder: &Coder, plan: &StripeRecovery, blocks: &[Vec<u8>]) -> Result<Vec<u8>> {
    let eq: RepairEquation = coder.repair_equation(plan.block, &plan.sources)?;
    let len = blocks.first().map_or(0, Vec::len);
    let mut held: HashMap<(BlockAddress, Payload), Vec<u8>> = HashMap::new();
    let missing = |what: &str, at: BlockAddress| {
        Error::Recovery(format!(
            "stripe {}: {what} not present at {at}",
            plan.stripe
        ))
    };
    let fetch = |held: &HashMap<(BlockAddress, Payload), Vec<u8>>,
                 p: &Payload,
                 src: BlockAddress| {
        match p {
            Payload::Block(b) if src == plan.origin || *b == plan.block => Err(Error::Recovery(
                format!("stripe {}: block {b} read from the lost node", plan.stripe),
            )),
            Payload::Block(b) => Ok(held
                .get(&(src, p.clone()))
                .cloned()
                .unwrap_or_else(|| blocks[*b].clone())),
            Payload::Partial(_) => held
                .get(&(src, p.clone()))
                .cloned()
                .ok_or_else(|| missing("partial", src)),
        }
    };
    let mut rebuilt = None;
    for step in &plan.steps {
        match step {
            RecoveryStep::InnerRead { payload, src, dst }
            | RecoveryStep::CrossSend { payload, src, dst } => {
                let data = fetch(&held, payload, *src)?;
                held.insert((*dst, payload.clone()), data);
            }
            RecoveryStep::Aggregate { at, inputs } => {
                let parts: Vec<(usize, &[u8])> = inputs
                    .iter()
                    .map(|&b| {
                        held.get(&(*at, Payload::Block(b)))
                            .map(|d| (b, d.as_slice()))
                            .ok_or_else(|| missing("block", *at))
                    })
                    .collect::<Result<_>>()?;
                let partial = eq.partial(&parts, len)?;
                held.insert((*at, Payload::Partial(inputs.clone())), partial);
            }
            RecoveryStep::Decode { at, inputs } => {
                let mut out = vec![0u8; len];
                for p in inputs {
                    let data = held
                        .get(&(*at, p.clone()))
                        .ok_or_else(|| missing("decode input", *at))?;
                    match p {
                        Payload::Block(b) => {
                            let c = eq
                                .coefficient(*b)
                                .ok_or_else(|| missing("coefficient", *at))?;
                            gf256::mul_acc(&mut out, data, c);
                        }
                        Payload::Partial(_) => gf256::mul_acc(&mut out, data, 1),
                    }
                }
                rebuilt = Some(out);
            }
            RecoveryStep::Write { .. } => {}
        }
    }
    rebuilt.ok_or_else(|| Error::Recovery(format!("stripe {}: plan has no decode", plan.stripe)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{place_regions_d3_lrc, place_regions_d3_rs, ClusterConfig};

    fn fixture() -> PlacementMap {
        place_regions_d3_rs(
            &ClusterConfig::new(5, 3),
            &CodeScheme::rs(3, 2).unwrap(),
            20,
        )
        .unwrap()
    }

    #[test]
    fn three_two_cases() {
        let map = fixture();
        let p0 = plan_stripe_recovery_rs(&map, 0, 0).unwrap();
        assert_eq!(p0.cross_reads, 1);
        assert_eq!(p0.case, RecoveryCase::IntoShortGroup);
        assert_eq!(p0.target.rack, map.stripes[0][4].rack);
        let p4 = plan_stripe_recovery_rs(&map, 0, 4).unwrap();
        assert_eq!(p4.cross_reads, 2);
        assert_eq!(p4.case, RecoveryCase::ShortIntoSpare);
        assert!(map.stripes[0].iter().all(|a| a.rack != p4.target.rack));
    }

    #[test]
    fn six_three_always_two() {
        let map = place_regions_d3_rs(&ClusterConfig::new(5, 3), &CodeScheme::rs(6, 3).unwrap(), 1)
            .unwrap();
        for b in 0..9 {
            let p = plan_stripe_recovery_rs(&map, 4, b).unwrap();
            assert_eq!(p.cross_reads, 2);
            assert_eq!(p.cross_sends(), 2);
            assert_eq!(p.sources.len(), 6);
        }
    }

    #[test]
    fn target_after_last_block_of_group() {
        let map = fixture();
        for s in 0..map.num_stripes() {
            let p = plan_stripe_recovery_rs(&map, s, 1).unwrap();
            let last = map.stripes[s][4];
            assert_eq!(p.target, BlockAddress::new(last.rack, (last.node + 1) % 3));
        }
    }

    #[test]
    fn spare_targets_round_robin() {
        let map = fixture();
        let failed = BlockAddress::new(2, 0);
        let plan = plan_node_recovery(&map, failed, 0).unwrap();
        let layout = map.d3_layout().unwrap();
        let mut per_region: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for sp in plan
            .stripes
            .iter()
            .filter(|p| p.destination == Destination::SpareRack)
        {
            assert_eq!(sp.target.rack, layout.spare_rack(sp.stripe));
            per_region
                .entry(layout.position(sp.stripe).region)
                .or_default()
                .push(sp.target.node);
        }
        assert_eq!(per_region.len(), 4);
        for nodes in per_region.values() {
            assert_eq!(nodes, &vec![0, 1, 2]);
        }
        for sp in &plan.stripes {
            let single = plan_stripe_recovery_rs(&map, sp.stripe, sp.block).unwrap();
            assert_eq!(&single, sp);
        }
    }

    #[test]
    fn lrc_reads() {
        let scheme = CodeScheme::lrc(4, 2, 1).unwrap();
        let map = place_regions_d3_lrc(&ClusterConfig::new(8, 3), &scheme, 1).unwrap();
        let d0 = plan_stripe_recovery_lrc(&map, 0, 0).unwrap();
        assert_eq!(d0.sources, vec![1, 4]);
        assert_eq!(d0.cross_reads, 2);
        let p2 = plan_stripe_recovery_lrc(&map, 0, 6).unwrap();
        assert_eq!(p2.sources, vec![4, 5]);
        assert_eq!(p2.cross_reads, 2);
        assert_eq!(p2.target.rack, map.d3_layout().unwrap().spare_rack(0));
    }

    #[test]
    fn degraded_read_sources() {
        let cfg = ClusterConfig::new(8, 3);
        let rs21 = place_regions_d3_rs(&cfg, &CodeScheme::rs(2, 1).unwrap(), 1).unwrap();
        let client = BlockAddress::new(rs21.d3_layout().unwrap().spare_rack(0), 0);
        let p = plan_degraded_read(&rs21, 0, 0, client, 0).unwrap();
        assert_eq!(p.cross_sends(), 2);
        assert!(!p
            .steps
            .iter()
            .any(|s| matches!(s, RecoveryStep::Write { .. })));

        let rs63 = CodeScheme::rs(6, 3).unwrap();
        let d3 = place_regions_d3_rs(&cfg, &rs63, 1).unwrap();
        let client = BlockAddress::new(d3.d3_layout().unwrap().spare_rack(0), 0);
        assert_eq!(
            plan_degraded_read(&d3, 0, 0, client, 0)
                .unwrap()
                .cross_sends(),
            2
        );
        let rdd = crate::placement::place_rdd(&cfg, &rs63, 1, 3).unwrap();
        let used: Vec<usize> = rdd.stripes[0].iter().map(|a| a.rack).collect();
        let free = (0..8).find(|r| !used.contains(r)).unwrap();
        let p = plan_degraded_read(&rdd, 0, 0, BlockAddress::new(free, 0), 3).unwrap();
        assert_eq!(p.cross_sends(), 6);

        // client inside an aggregating rack turns that transfer inner-rack
        let inside = d3.stripes[0][3];
        let p = plan_degraded_read(&d3, 0, 0, inside, 0).unwrap();
        assert_eq!(p.cross_sends(), 1);
    }

    #[test]
    fn apply_moves_blocks_and_records() {
        let map = fixture();
        let failed = BlockAddress::new(0, 0);
        let plan = plan_node_recovery(&map, failed, 0).unwrap();
        assert_eq!(plan.stripes.len(), 60);
        let after = apply_recovery(&map, &plan).unwrap();
        assert!(after.stripes.iter().flatten().all(|&a| a != failed));
        let record = after.recovery.as_ref().unwrap();
        assert_eq!(record.recovered.len(), 60);
        assert_eq!(record.relabels.len(), 12);
        for stripe in &after.stripes {
            for rack in 0..5 {
                assert!(stripe.iter().filter(|a| a.rack == rack).count() <= 2);
            }
        }
        let empty = RecoveryPlan {
            stripes: vec![],
            ..plan.clone()
        };
        assert_eq!(apply_recovery(&map, &empty).unwrap(), map);
        assert!(apply_recovery(&after, &plan).is_err());
    }

    #[test]
    fn baselines_are_seeded() {
        let cfg = ClusterConfig::new(8, 3);
        let scheme = CodeScheme::rs(3, 2).unwrap();
        for placer in [Placer::Rdd, Placer::Hdd] {
            let map = crate::placement::place(placer, &cfg, &scheme, 300, 5).unwrap();
            let failed = BlockAddress::new(1, 1);
            let a = plan_node_recovery(&map, failed, 11).unwrap();
            assert_eq!(
                a,
                plan_node_recovery_with(&map, failed, 11, Execution::Sequential).unwrap()
            );
            let after = apply_recovery(&map, &a).unwrap();
            assert!(after.stripes.iter().flatten().all(|&x| x != failed));
        }
    }

    #[test]
    fn executes_bit_exact() {
        let map = fixture();
        let coder = Coder::new(map.scheme);
        let data: Vec<Vec<u8>> = (0..3)
            .map(|i| (0..64).map(|j| (i * 64 + j) as u8).collect())
            .collect();
        let blocks = coder.encode(&data).unwrap();
        let plan = plan_node_recovery(&map, BlockAddress::new(3, 1), 0).unwrap();
        for sp in &plan.stripes {
            assert_eq!(
                execute_stripe(&coder, sp, &blocks).unwrap(),
                blocks[sp.block]
            );
        }
    }

    #[test]
    fn non_d3_single_stripe_rejected() {
        let cfg = ClusterConfig::new(8, 3);
        let map = crate::placement::place_rdd(&cfg, &CodeScheme::rs(2, 1).unwrap(), 3, 1).unwrap();
        assert!(plan_stripe_recovery_rs(&map, 0, 0).is_err());
        assert!(plan_node_recovery(&map, BlockAddress::new(9, 0), 0).is_err());
    }
}
