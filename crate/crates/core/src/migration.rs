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

//! Moves rebuilt blocks back onto the replacement ("relived") node once it
//! is in service, one batch per region-group type of the failed node.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{BlockAddress, Destination, PlacementMap, RecoveryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub stripe: usize,
    pub block: usize,
    pub src: BlockAddress,
    pub dst: BlockAddress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionGroupRef {
    pub region: usize,
    pub rack: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationBatch {
    pub index: usize,
    /// Region-group of the failed node whose blocks this batch returns.
    pub failed_group: usize,
    /// `SpareRack` for H batches, `GroupRack` for G* batches.
    pub destination: Destination,
    pub region_groups: Vec<RegionGroupRef>,
    pub moves: Vec<Move>,
    pub bytes: u64,
}

impl MigrationBatch {
    /// Blocks sent per source rack.
    pub fn source_racks(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for mv in &self.moves {
            *out.entry(mv.src.rack).or_default() += 1;
        }
        out
    }
}

fn batch_key(destination: Destination, group: usize) -> (u8, usize) {
    match destination {
        Destination::SpareRack => (0, group),
        _ => (1, group),
    }
}

/// Batches returning every rebuilt block of a recovered D3 map to
/// `relived`. H batches come first, then G* batches, each by ascending
/// failed region-group. A map without a recovery needs no batches.
pub fn plan_migration(map: &PlacementMap, relived: BlockAddress) -> Result<Vec<MigrationBatch>> {
    let Some(record) = &map.recovery else {
        return Ok(Vec::new());
    };
    let layout = map
        .d3_layout()
        .map_err(|_| Error::Migration("only D3 maps are migrated".into()))?;
    if !map.config.contains(relived) {
        return Err(Error::NoSuchNode(relived));
    }
    let mut batches: BTreeMap<(u8, usize), MigrationBatch> = BTreeMap::new();
    for rb in &record.recovered {
        let now = map.locate_block(rb.stripe, rb.block)?;
        if now != rb.target {
            return Err(Error::Migration(format!(
                "stripe {} block {} is on {now}, recovery put it on {}",
                rb.stripe, rb.block, rb.target
            )));
        }
        if map
            .block_on(rb.stripe, relived)
            .is_some_and(|b| b != rb.block)
        {
            return Err(Error::Migration(format!(
                "{relived} already holds a block of stripe {}",
                rb.stripe
            )));
        }
        let group = layout.group_of(rb.block);
        let batch = batches
            .entry(batch_key(rb.destination, group))
            .or_insert_with(|| MigrationBatch {
                index: 0,
                failed_group: group,
                destination: rb.destination,
                region_groups: Vec::new(),
                moves: Vec::new(),
                bytes: 0,
            });
        let rg = RegionGroupRef {
            region: layout.position(rb.stripe).region,
            rack: rb.target.rack,
        };
        if !batch.region_groups.contains(&rg) {
            batch.region_groups.push(rg);
        }
        batch.moves.push(Move {
            stripe: rb.stripe,
            block: rb.block,
            src: rb.target,
            dst: relived,
        });
        batch.bytes += map.config.block_size;
    }
    Ok(batches
        .into_values()
        .enumerate()
        .map(|(i, mut b)| {
            b.index = i;
            b.region_groups.sort();
            b
        })
        .collect())
}

/// Applies the moves of `batches`, in any order, and drops them from the
/// map's recovery record.
pub fn apply_migration(map: &PlacementMap, batches: &[MigrationBatch]) -> Result<PlacementMap> {
    let mut out = map.clone();
    let mut moved = std::collections::HashSet::new();
    for mv in batches.iter().flat_map(|b| &b.moves) {
        let now = out.locate_block(mv.stripe, mv.block)?;
        if now != mv.src {
            return Err(Error::Migration(format!(
                "stripe {} block {} is on {now}, move expects {}",
                mv.stripe, mv.block, mv.src
            )));
        }
        if out.block_on(mv.stripe, mv.dst).is_some() {
            return Err(Error::Migration(format!(
                "{} already holds a block of stripe {}",
                mv.dst, mv.stripe
            )));
        }
        out.stripes[mv.stripe][mv.block] = mv.dst;
        moved.insert((mv.stripe, mv.block));
    }
    if let Some(record) = out.recovery.take() {
        let recovered: Vec<_> = record
            .recovered
            .into_iter()
            .filter(|rb| !moved.contains(&(rb.stripe, rb.block)))
            .collect();
        if !recovered.is_empty() {
            let layout = out.d3_layout()?;
            let remaining: BTreeMap<(usize, usize), ()> = recovered
                .iter()
                .map(|rb| ((layout.position(rb.stripe).region, rb.target.rack), ()))
                .collect();
            let relabels = record
                .relabels
                .into_iter()
                .filter(|r| remaining.contains_key(&(r.region, r.rack)))
                .collect();
            out.recovery = Some(RecoveryRecord {
                failed: record.failed,
                recovered,
                relabels,
            });
        }
    }
    Ok(out)
}

pub fn batches_to_json(batches: &[MigrationBatch]) -> Result<String> {
    Ok(serde_json::to_string_pretty(batches)?)
}

/// `batch,kind,failed_group,region_groups,blocks,bytes,sources` rows;
/// sources reads `rack:blocks` pairs joined by `;`.
pub fn batches_to_csv(batches: &[MigrationBatch]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "batch",
        "kind",
        "failed_group",
        "region_groups",
        "blocks",
        "bytes",
        "sources",
    ])?;
    for b in batches {
        let kind = match b.destination {
            Destination::SpareRack => "h",
            _ => "g_star",
        };
        let sources: Vec<String> = b
            .source_racks()
            .iter()
            .map(|(r, c)| format!("{r}:{c}"))
            .collect();
        w.write_record([
            b.index.to_string(),
            kind.to_string(),
            b.failed_group.to_string(),
            b.region_groups.len().to_string(),
            b.moves.len().to_string(),
            b.bytes.to_string(),
            sources.join(";"),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::CodeScheme;
    use crate::placement::{place_regions_d3_rs, ClusterConfig};
    use crate::recovery::{apply_recovery, plan_node_recovery};

    fn recovered(failed: BlockAddress) -> (PlacementMap, PlacementMap) {
        let map = place_regions_d3_rs(
            &ClusterConfig::new(5, 3),
            &CodeScheme::rs(3, 2).unwrap(),
            20,
        )
        .unwrap();
        let plan = plan_node_recovery(&map, failed, 0).unwrap();
        let after = apply_recovery(&map, &plan).unwrap();
        (map, after)
    }

    #[test]
    fn three_batches_restore_layout() {
        let failed = BlockAddress::new(0, 0);
        let (canonical, after) = recovered(failed);
        let batches = plan_migration(&after, failed).unwrap();
        assert_eq!(batches.len(), 3);
        assert_eq!(batches[0].destination, Destination::SpareRack);
        let volumes: Vec<usize> = batches.iter().map(|b| b.moves.len()).collect();
        assert_eq!(volumes, vec![12, 24, 24]);
        for b in &batches {
            assert_eq!(b.region_groups.len(), 4);
            let src = b.source_racks();
            assert_eq!(src.len(), 4);
            assert!(!src.contains_key(&0));
            let first = *src.values().next().unwrap();
            assert!(src.values().all(|&c| c == first));
        }
        let restored = apply_migration(&after, &batches).unwrap();
        assert_eq!(restored, canonical);
        let reversed: Vec<_> = batches.iter().rev().cloned().collect();
        assert_eq!(apply_migration(&after, &reversed).unwrap(), canonical);
    }

    #[test]
    fn partial_migration_keeps_rest_of_record() {
        let failed = BlockAddress::new(2, 1);
        let (_, after) = recovered(failed);
        let batches = plan_migration(&after, failed).unwrap();
        let half = apply_migration(&after, &batches[..1]).unwrap();
        let left = half.recovery.as_ref().unwrap();
        assert_eq!(left.recovered.len(), 48);
        assert_eq!(left.relabels.len(), 8);
        let rest = plan_migration(&half, failed).unwrap();
        assert_eq!(rest.len(), 2);
    }

    #[test]
    fn no_recovery_no_batches() {
        let map = place_regions_d3_rs(&ClusterConfig::new(5, 3), &CodeScheme::rs(3, 2).unwrap(), 1)
            .unwrap();
        assert!(plan_migration(&map, BlockAddress::new(0, 0))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn csv_summary() {
        let failed = BlockAddress::new(1, 2);
        let (_, after) = recovered(failed);
        let batches = plan_migration(&after, failed).unwrap();
        let csv = batches_to_csv(&batches).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,h,"));
        assert!(lines[2].contains(",24,384000000,"));
        let json = batches_to_json(&batches).unwrap();
        let back: Vec<MigrationBatch> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, batches);
    }

    #[test]
    fn stale_map_rejected() {
        let failed = BlockAddress::new(0, 0);
        let (_, mut after) = recovered(failed);
        let rb = after.recovery.as_ref().unwrap().recovered[0];
        after.stripes[rb.stripe][rb.block] = rb.origin;
        assert!(plan_migration(&after, failed).is_err());
    }
}
