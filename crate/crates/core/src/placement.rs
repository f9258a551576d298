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

//! Cluster description, the placement map, and the three placers.
//!
//! Stripes are indexed globally. Under D3, stripe `s` belongs to region
//! `s / n²` (globally counted) and occupies row `s mod n²` of the node-level
//! array; regions use row `(s / n²) mod r(r-1)` of the addressing table, so
//! `r(r-1)n²` stripes make one full cycle.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codes::{group_stripe_rs, lrc_columns, BlockClass, CodeScheme, StripeGrouping};
use crate::error::{Error, Result};
use crate::oa::{self, AddressingTable, OrthogonalArray};

pub const MAP_VERSION: u32 = 1;

/// Two-tier cluster: `racks × nodes`, bandwidths in Mb/s, block size in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    #[serde(rename = "r")]
    pub racks: usize,
    #[serde(rename = "n")]
    pub nodes: usize,
    pub inner_bw: f64,
    pub cross_bw: f64,
    pub block_size: u64,
}

impl ClusterConfig {
    /// 1000 Mb/s inside a rack, 100 Mb/s per rack port, 16 MB blocks.
    pub fn new(racks: usize, nodes: usize) -> Self {
        ClusterConfig {
            racks,
            nodes,
            inner_bw: 1000.0,
            cross_bw: 100.0,
            block_size: 16_000_000,
        }
    }

    pub fn with_bandwidth(mut self, inner_bw: f64, cross_bw: f64) -> Self {
        self.inner_bw = inner_bw;
        self.cross_bw = cross_bw;
        self
    }

    pub fn with_block_size(mut self, block_size: u64) -> Self {
        self.block_size = block_size;
        self
    }

    pub fn node_count(&self) -> usize {
        self.racks * self.nodes
    }

    #[inline]
    pub fn node_index(&self, addr: BlockAddress) -> usize {
        addr.rack * self.nodes + addr.node
    }

    #[inline]
    pub fn address(&self, index: usize) -> BlockAddress {
        BlockAddress::new(index / self.nodes, index % self.nodes)
    }

    pub fn contains(&self, addr: BlockAddress) -> bool {
        addr.rack < self.racks && addr.node < self.nodes
    }

    pub fn all_nodes(&self) -> impl Iterator<Item = BlockAddress> + '_ {
        (0..self.node_count()).map(|i| self.address(i))
    }
}

/// Node `N_{rack,node}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockAddress {
    pub rack: usize,
    pub node: usize,
}

impl BlockAddress {
    pub const fn new(rack: usize, node: usize) -> Self {
        BlockAddress { rack, node }
    }
}

impl fmt::Display for BlockAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}:n{}", self.rack, self.node)
    }
}

impl FromStr for BlockAddress {
    type Err = Error;

    /// Parses `rRACK:nNODE`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("expected rRACK:nNODE, got {s:?}"));
        let (rack, node) = s.trim().split_once(':').ok_or_else(bad)?;
        let rack = rack
            .strip_prefix('r')
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        let node = node
            .strip_prefix('n')
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        Ok(BlockAddress { rack, node })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placer {
    D3,
    Rdd,
    Hdd,
}

impl fmt::Display for Placer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placer::D3 => "d3",
            Placer::Rdd => "rdd",
            Placer::Hdd => "hdd",
        })
    }
}

impl FromStr for Placer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d3" => Ok(Placer::D3),
            "rdd" => Ok(Placer::Rdd),
            "hdd" => Ok(Placer::Hdd),
            _ => Err(Error::Config(format!("unknown placer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub placer: Placer,
    pub seed: Option<u64>,
}

/// Where a recovered block went: next to a surviving region-group of its
/// stripe (that group becomes `G*`) or into the region's spare rack (a new
/// region-group `H`). Baseline placers always report `Elsewhere`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Destination {
    GroupRack { group: usize },
    SpareRack,
    Elsewhere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveredBlock {
    pub stripe: usize,
    pub block: usize,
    pub origin: BlockAddress,
    pub target: BlockAddress,
    pub destination: Destination,
}

/// A region-group created or augmented by recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relabel {
    pub region: usize,
    pub rack: usize,
    /// Region-group of the failed node that lost the blocks.
    pub failed_group: usize,
    pub destination: Destination,
    pub blocks: usize,
}

/// Left behind by a completed recovery so migration can undo it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub failed: BlockAddress,
    pub recovered: Vec<RecoveredBlock>,
    #[serde(default)]
    pub relabels: Vec<Relabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementMap {
    pub version: u32,
    pub config: ClusterConfig,
    pub scheme: CodeScheme,
    pub provenance: Provenance,
    pub stripes: Vec<Vec<BlockAddress>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoveryRecord>,
}

impl PlacementMap {
    pub fn num_stripes(&self) -> usize {
        self.stripes.len()
    }

    pub fn locate_block(&self, stripe: usize, block: usize) -> Result<BlockAddress> {
        self.stripes
            .get(stripe)
            .and_then(|s| s.get(block))
            .copied()
            .ok_or(Error::OutOfRange { stripe, block })
    }

    pub fn is_d3(&self) -> bool {
        self.provenance.placer == Placer::D3
    }

    pub fn d3_layout(&self) -> Result<D3Layout> {
        if !self.is_d3() {
            return Err(Error::Config(format!(
                "{} map has no D3 layout",
                self.provenance.placer
            )));
        }
        D3Layout::new(&self.config, &self.scheme)
    }

    /// Block index of `stripe` stored on `node`, if any.
    pub fn block_on(&self, stripe: usize, node: BlockAddress) -> Option<usize> {
        self.stripes[stripe].iter().position(|&a| a == node)
    }

    /// Stripe count per node and block class, keyed by node index.
    pub fn class_counts(&self) -> BTreeMap<BlockClass, Vec<u64>> {
        let mut counts: BTreeMap<BlockClass, Vec<u64>> = self
            .scheme
            .classes()
            .iter()
            .map(|&c| (c, vec![0; self.config.node_count()]))
            .collect();
        for stripe in &self.stripes {
            for (b, &addr) in stripe.iter().enumerate() {
                let class = self.scheme.block_class(b);
                counts.get_mut(&class).unwrap()[self.config.node_index(addr)] += 1;
            }
        }
        counts
    }

    /// `rack,node,class,count` rows for audits.
    pub fn class_counts_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rack", "node", "class", "count"])?;
        let counts = self.class_counts();
        for addr in self.config.all_nodes() {
            for (class, per_node) in &counts {
                w.write_record([
                    addr.rack.to_string(),
                    addr.node.to_string(),
                    class.name().to_string(),
                    per_node[self.config.node_index(addr)].to_string(),
                ])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?).unwrap())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let map: PlacementMap = serde_json::from_str(s)?;
        if map.version != MAP_VERSION {
            return Err(Error::Serde(format!(
                "unsupported map version {}",
                map.version
            )));
        }
        map.check_shape()?;
        Ok(map)
    }

    fn check_shape(&self) -> Result<()> {
        if let Some(bad) = self
            .stripes
            .iter()
            .position(|s| s.len() != self.scheme.len())
        {
            return Err(Error::Serde(format!(
                "stripe {bad} has {} blocks, scheme {} needs {}",
                self.stripes[bad].len(),
                self.scheme,
                self.scheme.len()
            )));
        }
        if let Some(addr) = self
            .stripes
            .iter()
            .flatten()
            .find(|a| !self.config.contains(**a))
        {
            return Err(Error::NoSuchNode(*addr));
        }
        Ok(())
    }
}

/// One problem found by [`validate_config`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigViolation {
    TooFewRacks {
        racks: usize,
    },
    NoNodes,
    NonPositiveBandwidth,
    NodesBelowParity {
        nodes: usize,
        m: usize,
    },
    NodeArray {
        nodes: usize,
        columns: usize,
        bound: usize,
    },
    RacksNotAboveGroups {
        racks: usize,
        groups: usize,
    },
    RackArray {
        racks: usize,
        columns: usize,
        bound: usize,
    },
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConfigViolation::TooFewRacks { racks } => write!(f, "need at least 2 racks, got {racks}"),
            ConfigViolation::NoNodes => write!(f, "need at least 1 node per rack"),
            ConfigViolation::NonPositiveBandwidth => write!(f, "bandwidths must be positive"),
            ConfigViolation::NodesBelowParity { nodes, m } => {
                write!(f, "n = {nodes} nodes per rack is below m = {m}")
            }
            ConfigViolation::NodeArray { nodes, columns, bound } => write!(
                f,
                "node-level OA({nodes}, {columns}) needed but n = {nodes} supports at most {bound} columns"
            ),
            ConfigViolation::RacksNotAboveGroups { racks, groups } => {
                write!(f, "need r > {groups} racks, got r = {racks}")
            }
            ConfigViolation::RackArray { racks, columns, bound } => write!(
                f,
                "rack-level OA({racks}, {columns}) with a constant prefix needed but r = {racks} supports at most {bound} columns"
            ),
        }
    }
}

impl ClusterConfig {
    /// Smallest prime-power cluster that can host a D3 layout for `scheme`,
    /// with default bandwidths.
    pub fn smallest_for(scheme: &CodeScheme) -> Self {
        let (node_cols, groups, floor) = match *scheme {
            CodeScheme::Rs { m, .. } => {
                let g = group_stripe_rs(scheme).expect("rs scheme").groups;
                (g, g, m)
            }
            CodeScheme::Lrc { .. } => (
                lrc_columns(scheme).expect("valid lrc").n_cols,
                scheme.len(),
                1,
            ),
        };
        let fits = |q: usize, cols: usize| column_bound(q) >= cols;
        let nodes = (floor.max(2)..).find(|&q| fits(q, node_cols)).unwrap();
        let racks = (groups + 1..).find(|&q| fits(q, groups + 1)).unwrap();
        ClusterConfig::new(racks, nodes)
    }
}

fn column_bound(n: usize) -> usize {
    oa::prefix_columns(n).unwrap_or(0)
}

/// Checks that the cluster can host a D3 layout for `scheme`; returns every
/// violation found, empty when the pair is usable.
pub fn validate_config(config: &ClusterConfig, scheme: &CodeScheme) -> Vec<ConfigViolation> {
    let mut out = Vec::new();
    if config.racks < 2 {
        out.push(ConfigViolation::TooFewRacks {
            racks: config.racks,
        });
    }
    if config.nodes < 1 {
        out.push(ConfigViolation::NoNodes);
    }
    if !(config.inner_bw > 0.0 && config.cross_bw > 0.0) {
        out.push(ConfigViolation::NonPositiveBandwidth);
    }
    let (node_cols, groups) = match *scheme {
        CodeScheme::Rs { m, .. } => {
            if config.nodes < m {
                out.push(ConfigViolation::NodesBelowParity {
                    nodes: config.nodes,
                    m,
                });
            }
            let g = group_stripe_rs(scheme).expect("rs scheme").groups;
            (g, g)
        }
        CodeScheme::Lrc { .. } => {
            let cols = lrc_columns(scheme).expect("valid lrc scheme").n_cols;
            (cols, scheme.len())
        }
    };
    let bound = column_bound(config.nodes);
    if node_cols > bound {
        out.push(ConfigViolation::NodeArray {
            nodes: config.nodes,
            columns: node_cols,
            bound,
        });
    }
    if config.racks <= groups {
        out.push(ConfigViolation::RacksNotAboveGroups {
            racks: config.racks,
            groups,
        });
    }
    let bound = column_bound(config.racks);
    if groups + 1 > bound {
        out.push(ConfigViolation::RackArray {
            racks: config.racks,
            columns: groups + 1,
            bound,
        });
    }
    out
}

fn ensure_valid(config: &ClusterConfig, scheme: &CodeScheme) -> Result<()> {
    let violations = validate_config(config, scheme);
    if violations.is_empty() {
        Ok(())
    } else {
        let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
        Err(Error::Config(msgs.join("; ")))
    }
}

#[derive(Debug, Clone)]
pub enum StripeShape {
    Rs(StripeGrouping),
    /// Node-level OA column of every block.
    Lrc(Vec<usize>),
}

/// Position of a stripe in the D3 cycle structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StripePosition {
    pub cycle: usize,
    /// Global region index.
    pub region: usize,
    /// Row of the addressing table used by the region.
    pub table_row: usize,
    /// Row of the node-level array used by the stripe.
    pub row: usize,
}

/// The two orthogonal arrays and grouping that define a D3 layout.
#[derive(Debug, Clone)]
pub struct D3Layout {
    config: ClusterConfig,
    scheme: CodeScheme,
    shape: StripeShape,
    node_oa: OrthogonalArray,
    table: AddressingTable,
}

impl D3Layout {
    pub fn new(config: &ClusterConfig, scheme: &CodeScheme) -> Result<Self> {
        ensure_valid(config, scheme)?;
        let (shape, node_cols, groups) = match scheme {
            CodeScheme::Rs { .. } => {
                let g = group_stripe_rs(scheme)?;
                let n = g.groups;
                (StripeShape::Rs(g), n, n)
            }
            CodeScheme::Lrc { .. } => {
                let a = lrc_columns(scheme)?;
                (StripeShape::Lrc(a.col_of), a.n_cols, scheme.len())
            }
        };
        // OA(n, 1) is not constructed; a single column only needs a permutation
        let node_oa = oa::construct_oa(config.nodes, node_cols.max(2))?;
        let table = oa::addressing_table(config.racks, groups)?;
        Ok(D3Layout {
            config: *config,
            scheme: *scheme,
            shape,
            node_oa,
            table,
        })
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn scheme(&self) -> &CodeScheme {
        &self.scheme
    }

    pub fn shape(&self) -> &StripeShape {
        &self.shape
    }

    pub fn grouping(&self) -> Option<&StripeGrouping> {
        match &self.shape {
            StripeShape::Rs(g) => Some(g),
            StripeShape::Lrc(_) => None,
        }
    }

    pub fn node_oa(&self) -> &OrthogonalArray {
        &self.node_oa
    }

    pub fn table(&self) -> &AddressingTable {
        &self.table
    }

    /// Region-groups per region: `N_g` for RS, `k + l + g` for LRC.
    pub fn groups(&self) -> usize {
        self.table.groups()
    }

    pub fn stripes_per_region(&self) -> usize {
        self.config.nodes * self.config.nodes
    }

    pub fn regions_per_cycle(&self) -> usize {
        self.table.num_rows()
    }

    pub fn stripes_per_cycle(&self) -> usize {
        self.stripes_per_region() * self.regions_per_cycle()
    }

    pub fn position(&self, stripe: usize) -> StripePosition {
        let per_region = self.stripes_per_region();
        let region = stripe / per_region;
        StripePosition {
            cycle: stripe / self.stripes_per_cycle(),
            region,
            table_row: region % self.regions_per_cycle(),
            row: stripe % per_region,
        }
    }

    /// Region-group (RS group, or LRC block) that `block` belongs to.
    pub fn group_of(&self, block: usize) -> usize {
        match &self.shape {
            StripeShape::Rs(g) => g.group_of(block),
            StripeShape::Lrc(_) => block,
        }
    }

    pub fn group_rack(&self, stripe: usize, group: usize) -> usize {
        self.table.get(self.position(stripe).table_row, group)
    }

    /// Rack reserved for recovered blocks of this stripe's region.
    pub fn spare_rack(&self, stripe: usize) -> usize {
        self.table.spare_rack(self.position(stripe).table_row)
    }

    pub fn address(&self, stripe: usize, block: usize) -> BlockAddress {
        let pos = self.position(stripe);
        let n = self.config.nodes;
        match &self.shape {
            StripeShape::Rs(g) => {
                let grp = g.group_of(block);
                let rack = self.table.get(pos.table_row, grp);
                let node = (self.node_oa.get(pos.row, grp) + g.offset_in_group(block)) % n;
                BlockAddress::new(rack, node)
            }
            StripeShape::Lrc(cols) => {
                let rack = self.table.get(pos.table_row, block);
                BlockAddress::new(rack, self.node_oa.get(pos.row, cols[block]) % n)
            }
        }
    }

    pub fn stripe_addresses(&self, stripe: usize) -> Vec<BlockAddress> {
        (0..self.scheme.len())
            .map(|b| self.address(stripe, b))
            .collect()
    }

    pub fn build(&self, num_stripes: usize) -> PlacementMap {
        PlacementMap {
            version: MAP_VERSION,
            config: self.config,
            scheme: self.scheme,
            provenance: Provenance {
                placer: Placer::D3,
                seed: None,
            },
            stripes: (0..num_stripes).map(|s| self.stripe_addresses(s)).collect(),
            recovery: None,
        }
    }
}

/// Places one RS stripe given its node-level OA row and the rack of each
/// group: offset `o` of group `j` goes to node `(row[j] + o) mod n`.
pub fn place_stripe_rs(
    grouping: &StripeGrouping,
    oa_row: &[usize],
    racks: &[usize],
    nodes: usize,
) -> Vec<BlockAddress> {
    (0..grouping.len)
        .map(|b| {
            let g = grouping.group_of(b);
            BlockAddress::new(racks[g], (oa_row[g] + grouping.offset_in_group(b)) % nodes)
        })
        .collect()
}

/// D3 map of `num_stripes` stripes. Partial cycles are allowed.
pub fn place_d3(
    config: &ClusterConfig,
    scheme: &CodeScheme,
    num_stripes: usize,
) -> Result<PlacementMap> {
    Ok(D3Layout::new(config, scheme)?.build(num_stripes))
}

pub fn place_regions_d3_rs(
    config: &ClusterConfig,
    scheme: &CodeScheme,
    num_regions: usize,
) -> Result<PlacementMap> {
    if !scheme.is_rs() {
        return Err(Error::Scheme(format!("{scheme} is not an RS scheme")));
    }
    place_regions(config, scheme, num_regions)
}

pub fn place_regions_d3_lrc(
    config: &ClusterConfig,
    scheme: &CodeScheme,
    num_regions: usize,
) -> Result<PlacementMap> {
    if !scheme.is_lrc() {
        return Err(Error::Scheme(format!("{scheme} is not an LRC scheme")));
    }
    place_regions(config, scheme, num_regions)
}

fn place_regions(
    config: &ClusterConfig,
    scheme: &CodeScheme,
    num_regions: usize,
) -> Result<PlacementMap> {
    if num_regions == 0 {
        return Err(Error::Config("need at least one stripe region".into()));
    }
    let layout = D3Layout::new(config, scheme)?;
    let stripes = num_regions * layout.stripes_per_region();
    Ok(layout.build(stripes))
}

fn check_baseline_feasible(config: &ClusterConfig, scheme: &CodeScheme) -> Result<()> {
    if config.racks < 1 || config.nodes < 1 {
        return Err(Error::Config("empty cluster".into()));
    }
    let per_rack = scheme.rack_cap().min(config.nodes);
    if per_rack * config.racks < scheme.len() {
        return Err(Error::Infeasible(format!(
            "{} racks of {} nodes cannot hold a {scheme} stripe with at most {} blocks per rack",
            config.racks,
            config.nodes,
            scheme.rack_cap()
        )));
    }
    Ok(())
}

/// Whether `candidate` can take another block of a stripe already occupying `used`.
pub fn admissible(candidate: BlockAddress, used: &[BlockAddress], rack_cap: usize) -> bool {
    !used.contains(&candidate)
        && used.iter().filter(|a| a.rack == candidate.rack).count() < rack_cap
}

/// Seeded uniform random placement with per-rack cap (rejection sampling).
pub fn place_rdd(
    config: &ClusterConfig,
    scheme: &CodeScheme,
    num_stripes: usize,
    seed: u64,
) -> Result<PlacementMap> {
    check_baseline_feasible(config, scheme)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = scheme.rack_cap();
    let total = config.node_count();
    let stripes = (0..num_stripes)
        .map(|_| {
            let mut used: Vec<BlockAddress> = Vec::with_capacity(scheme.len());
            while used.len() < scheme.len() {
                let addr = config.address(rng.gen_range(0..total));
                if admissible(addr, &used, cap) {
                    used.push(addr);
                }
            }
            used
        })
        .collect();
    Ok(PlacementMap {
        version: MAP_VERSION,
        config: *config,
        scheme: *scheme,
        provenance: Provenance {
            placer: Placer::Rdd,
            seed: Some(seed),
        },
        stripes,
        recovery: None,
    })
}

/// 64-bit finalizer used by the hash placer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    x
}

/// Absorbs `(seed, stripe, block, attempt)` in order: `h = mix64(h ^ v)`
/// starting from `h = 0`.
pub fn hash_inputs(seed: u64, stripe: u64, block: u64, attempt: u64) -> u64 {
    [seed, stripe, block, attempt]
        .into_iter()
        .fold(0, |h, v| mix64(h ^ v))
}

pub const HASH_ATTEMPT_LIMIT: u64 = 1 << 16;

/// Hash-based placement with reselection on collisions.
#[derive(Debug, Clone, Copy)]
pub struct HashPlacer {
    pub config: ClusterConfig,
    pub rack_cap: usize,
    pub seed: u64,
}

impl HashPlacer {
    /// Picks a node for `(stripe, block)` avoiding `used`, full racks, and
    /// `failed` nodes, by bumping the attempt counter.
    pub fn select(
        &self,
        stripe: usize,
        block: usize,
        used: &[BlockAddress],
        failed: &[BlockAddress],
    ) -> Result<BlockAddress> {
        let total = self.config.node_count() as u64;
        for attempt in 0..HASH_ATTEMPT_LIMIT {
            let h = hash_inputs(self.seed, stripe as u64, block as u64, attempt);
            let addr = self.config.address((h % total) as usize);
            if !failed.contains(&addr) && admissible(addr, used, self.rack_cap) {
                return Ok(addr);
            }
        }
        Err(Error::Infeasible(format!(
            "no admissible node for stripe {stripe} block {block} after {HASH_ATTEMPT_LIMIT} attempts"
        )))
    }
}

pub fn place_hdd(
    config: &ClusterConfig,
    scheme: &CodeScheme,
    num_stripes: usize,
    seed: u64,
) -> Result<PlacementMap> {
    check_baseline_feasible(config, scheme)?;
    let placer = HashPlacer {
        config: *config,
        rack_cap: scheme.rack_cap(),
        seed,
    };
    let stripes = (0..num_stripes)
        .map(|s| {
            let mut used = Vec::with_capacity(scheme.len());
            for b in 0..scheme.len() {
                used.push(placer.select(s, b, &used, &[])?);
            }
            Ok(used)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PlacementMap {
        version: MAP_VERSION,
        config: *config,
        scheme: *scheme,
        provenance: Provenance {
            placer: Placer::Hdd,
            seed: Some(seed),
        },
        stripes,
        recovery: None,
    })
}

/// Dispatches to the named placer. D3 ignores the seed.
pub fn place(
    placer: Placer,
    config: &ClusterConfig,
    scheme: &CodeScheme,
    num_stripes: usize,
    seed: u64,
) -> Result<PlacementMap> {
    match placer {
        Placer::D3 => place_d3(config, scheme, num_stripes),
        Placer::Rdd => place_rdd(config, scheme, num_stripes, seed),
        Placer::Hdd => place_hdd(config, scheme, num_stripes, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs32() -> CodeScheme {
        CodeScheme::rs(3, 2).unwrap()
    }

    #[test]
    fn address_parsing() {
        let a: BlockAddress = "r2:n0".parse().unwrap();
        assert_eq!(a, BlockAddress::new(2, 0));
        assert_eq!(a.to_string(), "r2:n0");
        assert!("2:0".parse::<BlockAddress>().is_err());
        assert!("r2n0".parse::<BlockAddress>().is_err());
    }

    #[test]
    fn config_validation_examples() {
        assert!(validate_config(&ClusterConfig::new(5, 3), &rs32()).is_empty());
        let v = validate_config(&ClusterConfig::new(3, 3), &rs32());
        assert!(v.contains(&ConfigViolation::RacksNotAboveGroups {
            racks: 3,
            groups: 3
        }));
        let lrc = CodeScheme::lrc(4, 2, 1).unwrap();
        assert!(validate_config(&ClusterConfig::new(8, 3), &lrc).is_empty());
        assert!(!validate_config(&ClusterConfig::new(7, 3), &lrc).is_empty());
        let v = validate_config(&ClusterConfig::new(5, 1), &rs32());
        assert!(v.contains(&ConfigViolation::NodesBelowParity { nodes: 1, m: 2 }));
        let v = validate_config(&ClusterConfig::new(6, 3), &rs32());
        assert_eq!(
            v,
            vec![ConfigViolation::RackArray {
                racks: 6,
                columns: 4,
                bound: 2
            }]
        );
    }

    #[test]
    fn stripe_with_row_0_2_2() {
        let g = group_stripe_rs(&rs32()).unwrap();
        let addrs = place_stripe_rs(&g, &[0, 2, 2], &[0, 1, 2], 3);
        assert_eq!(
            addrs,
            vec![
                BlockAddress::new(0, 0),
                BlockAddress::new(0, 1),
                BlockAddress::new(1, 2),
                BlockAddress::new(1, 0),
                BlockAddress::new(2, 2),
            ]
        );
    }

    #[test]
    fn region_three_racks() {
        let map = place_regions_d3_rs(&ClusterConfig::new(5, 3), &rs32(), 20).unwrap();
        let layout = map.d3_layout().unwrap();
        let stripe = 3 * 9;
        let racks: Vec<usize> = (0..3).map(|g| layout.group_rack(stripe, g)).collect();
        assert_eq!(racks, vec![4, 0, 1]);
        for s in stripe..stripe + 9 {
            let addrs = map.stripes[s].clone();
            assert_eq!(addrs[0].rack, 4);
            assert_eq!(addrs[2].rack, 0);
            assert_eq!(addrs[4].rack, 1);
        }
    }

    #[test]
    fn locate_matches_contents() {
        let map = place_regions_d3_rs(&ClusterConfig::new(5, 3), &rs32(), 2).unwrap();
        for (s, stripe) in map.stripes.iter().enumerate() {
            for (b, &addr) in stripe.iter().enumerate() {
                assert_eq!(map.locate_block(s, b).unwrap(), addr);
            }
        }
        assert!(map.locate_block(18, 0).is_err());
        assert!(map.locate_block(0, 5).is_err());
    }

    #[test]
    fn d3_rs_stripes_are_distinct_and_capped() {
        let map = place_regions_d3_rs(
            &ClusterConfig::new(7, 4),
            &CodeScheme::rs(6, 3).unwrap(),
            42,
        )
        .unwrap();
        for stripe in &map.stripes {
            let mut nodes = stripe.clone();
            nodes.sort();
            nodes.dedup();
            assert_eq!(nodes.len(), 9);
            for rack in 0..7 {
                assert!(stripe.iter().filter(|a| a.rack == rack).count() <= 3);
            }
        }
    }

    #[test]
    fn d3_lrc_one_block_per_rack() {
        let scheme = CodeScheme::lrc(4, 2, 1).unwrap();
        let map = place_regions_d3_lrc(&ClusterConfig::new(8, 3), &scheme, 3).unwrap();
        let cols = lrc_columns(&scheme).unwrap().col_of;
        for stripe in &map.stripes {
            let mut racks: Vec<usize> = stripe.iter().map(|a| a.rack).collect();
            racks.sort();
            racks.dedup();
            assert_eq!(racks.len(), 7);
            // blocks sharing an OA column share a node id
            assert_eq!(cols[1], cols[6]);
            assert_eq!(stripe[1].node, stripe[6].node);
        }
    }

    #[test]
    fn full_cycle_counts_rs_3_2() {
        let map = place_regions_d3_rs(&ClusterConfig::new(5, 3), &rs32(), 20).unwrap();
        let counts = map.class_counts();
        assert!(counts[&BlockClass::Data].iter().all(|&c| c == 36));
        assert!(counts[&BlockClass::Parity].iter().all(|&c| c == 24));
    }

    #[test]
    fn wrong_scheme_kinds_rejected() {
        let cfg = ClusterConfig::new(8, 3);
        assert!(place_regions_d3_rs(&cfg, &CodeScheme::lrc(4, 2, 1).unwrap(), 1).is_err());
        assert!(place_regions_d3_lrc(&cfg, &rs32(), 1).is_err());
        assert!(place_regions_d3_rs(&ClusterConfig::new(3, 3), &rs32(), 1).is_err());
        assert!(place_regions_d3_rs(&cfg, &rs32(), 0).is_err());
    }

    #[test]
    fn rdd_constraints_and_determinism() {
        let cfg = ClusterConfig::new(8, 3);
        let scheme = CodeScheme::rs(6, 3).unwrap();
        let a = place_rdd(&cfg, &scheme, 200, 9).unwrap();
        assert_eq!(a, place_rdd(&cfg, &scheme, 200, 9).unwrap());
        assert_ne!(a, place_rdd(&cfg, &scheme, 200, 10).unwrap());
        for stripe in &a.stripes {
            for (i, x) in stripe.iter().enumerate() {
                assert!(!stripe[..i].contains(x));
            }
            for rack in 0..8 {
                assert!(stripe.iter().filter(|x| x.rack == rack).count() <= 3);
            }
        }
        assert!(place_rdd(
            &ClusterConfig::new(2, 3),
            &CodeScheme::lrc(4, 2, 1).unwrap(),
            1,
            0
        )
        .is_err());
    }

    #[test]
    fn hdd_constraints_and_determinism() {
        let cfg = ClusterConfig::new(8, 3);
        let scheme = CodeScheme::rs(2, 1).unwrap();
        let a = place_hdd(&cfg, &scheme, 500, 42).unwrap();
        assert_eq!(a, place_hdd(&cfg, &scheme, 500, 42).unwrap());
        for stripe in &a.stripes {
            let mut racks: Vec<usize> = stripe.iter().map(|x| x.rack).collect();
            racks.sort();
            racks.dedup();
            assert_eq!(racks.len(), 3);
        }
    }

    #[test]
    fn hdd_skips_failed_nodes() {
        let cfg = ClusterConfig::new(8, 3);
        let placer = HashPlacer {
            config: cfg,
            rack_cap: 1,
            seed: 42,
        };
        let first = placer.select(0, 0, &[], &[]).unwrap();
        let again = placer.select(0, 0, &[], &[first]).unwrap();
        assert_ne!(first, again);
    }

    #[test]
    fn json_round_trip() {
        let map = place_rdd(&ClusterConfig::new(5, 3), &rs32(), 4, 1).unwrap();
        let text = map.to_json().unwrap();
        assert!(text.contains("\"placer\": \"rdd\""));
        assert!(text.contains("\"scheme\": \"rs:3,2\""));
        assert_eq!(PlacementMap::from_json(&text).unwrap(), map);
        let broken = text.replace("\"version\": 1", "\"version\": 9");
        assert!(PlacementMap::from_json(&broken).is_err());
    }

    #[test]
    fn class_count_csv_has_all_nodes() {
        let map = place_regions_d3_rs(&ClusterConfig::new(5, 3), &rs32(), 20).unwrap();
        let csv = map.class_counts_csv().unwrap();
        assert_eq!(csv.lines().count(), 1 + 15 * 2);
        assert!(csv.lines().nth(1).unwrap().ends_with(",36"));
    }
}
