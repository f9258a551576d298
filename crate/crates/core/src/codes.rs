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

//! Code schemes, the D3 stripe grouping and the LRC column assignment.
//!
//! Block indices inside a stripe are `0..k` for data. RS parities follow
//! at `k..k+m`. For an LRC the `l` local parities sit at `k..k+l` and the
//! `g` global parities at `k+l..k+l+g`; local group `j` holds data blocks
//! `j*k/l .. (j+1)*k/l` plus local parity `k + j`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CodeScheme {
    Rs { k: usize, m: usize },
    Lrc { k: usize, l: usize, g: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockClass {
    Data,
    Parity,
    LocalParity,
    GlobalParity,
}

impl BlockClass {
    pub fn name(self) -> &'static str {
        match self {
            BlockClass::Data => "data",
            BlockClass::Parity => "parity",
            BlockClass::LocalParity => "local_parity",
            BlockClass::GlobalParity => "global_parity",
        }
    }
}

impl CodeScheme {
    pub fn rs(k: usize, m: usize) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::Scheme(format!("rs:{k},{m} needs k >= 1 and m >= 1")));
        }
        if k + m > 255 {
            return Err(Error::Scheme(format!("rs:{k},{m} exceeds 255 blocks")));
        }
        Ok(CodeScheme::Rs { k, m })
    }

    pub fn lrc(k: usize, l: usize, g: usize) -> Result<Self> {
        if k == 0 || l == 0 || g == 0 {
            return Err(Error::Scheme(format!("lrc:{k},{l},{g} needs k, l, g >= 1")));
        }
        if !k.is_multiple_of(l) {
            return Err(Error::Scheme(format!("lrc:{k},{l},{g}: l must divide k")));
        }
        if k + l + g > 255 {
            return Err(Error::Scheme(format!("lrc:{k},{l},{g} exceeds 255 blocks")));
        }
        Ok(CodeScheme::Lrc { k, l, g })
    }

    pub fn k(&self) -> usize {
        match *self {
            CodeScheme::Rs { k, .. } | CodeScheme::Lrc { k, .. } => k,
        }
    }

    /// Stripe size.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        match *self {
            CodeScheme::Rs { k, m } => k + m,
            CodeScheme::Lrc { k, l, g } => k + l + g,
        }
    }

    pub fn is_rs(&self) -> bool {
        matches!(self, CodeScheme::Rs { .. })
    }

    pub fn is_lrc(&self) -> bool {
        matches!(self, CodeScheme::Lrc { .. })
    }

    /// Most blocks of one stripe a single rack may hold while the stripe
    /// still survives losing that rack.
    pub fn rack_cap(&self) -> usize {
        match *self {
            CodeScheme::Rs { m, .. } => m,
            CodeScheme::Lrc { .. } => 1,
        }
    }

    pub fn block_class(&self, block: usize) -> BlockClass {
        match *self {
            CodeScheme::Rs { k, .. } => {
                if block < k {
                    BlockClass::Data
                } else {
                    BlockClass::Parity
                }
            }
            CodeScheme::Lrc { k, l, .. } => {
                if block < k {
                    BlockClass::Data
                } else if block < k + l {
                    BlockClass::LocalParity
                } else {
                    BlockClass::GlobalParity
                }
            }
        }
    }

    pub fn classes(&self) -> &'static [BlockClass] {
        match self {
            CodeScheme::Rs { .. } => &[BlockClass::Data, BlockClass::Parity],
            CodeScheme::Lrc { .. } => &[
                BlockClass::Data,
                BlockClass::LocalParity,
                BlockClass::GlobalParity,
            ],
        }
    }

    /// Local group of an LRC data block or local parity.
    pub fn local_group_of(&self, block: usize) -> Option<usize> {
        match *self {
            CodeScheme::Lrc { k, l, .. } => {
                if block < k {
                    Some(block / (k / l))
                } else if block < k + l {
                    Some(block - k)
                } else {
                    None
                }
            }
            CodeScheme::Rs { .. } => None,
        }
    }

    /// Data blocks then local parity of LRC local group `j`.
    pub fn local_group_members(&self, j: usize) -> Vec<usize> {
        match *self {
            CodeScheme::Lrc { k, l, .. } if j < l => {
                let size = k / l;
                (j * size..(j + 1) * size)
                    .chain(std::iter::once(k + j))
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// All local and global parities of an LRC stripe.
    pub fn lrc_parities(&self) -> Range<usize> {
        match *self {
            CodeScheme::Lrc { k, l, g } => k..k + l + g,
            CodeScheme::Rs { .. } => 0..0,
        }
    }

    /// The fixed LRC repair set: the rest of the local group, or the other
    /// parities for a global parity.
    pub fn lrc_repair_set(&self, block: usize) -> Result<Vec<usize>> {
        if !self.is_lrc() {
            return Err(Error::Scheme(format!("{self} has no local repair sets")));
        }
        if block >= self.len() {
            return Err(Error::Scheme(format!("block {block} outside {self}")));
        }
        Ok(match self.local_group_of(block) {
            Some(j) => self
                .local_group_members(j)
                .into_iter()
                .filter(|&b| b != block)
                .collect(),
            None => self.lrc_parities().filter(|&b| b != block).collect(),
        })
    }
}

impl fmt::Display for CodeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeScheme::Rs { k, m } => write!(f, "rs:{k},{m}"),
            CodeScheme::Lrc { k, l, g } => write!(f, "lrc:{k},{l},{g}"),
        }
    }
}

impl FromStr for CodeScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Scheme(format!("expected rs:K,M or lrc:K,L,G, got {s:?}"));
        let (kind, params) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums = params
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        match (kind.to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("rs", &[k, m]) => CodeScheme::rs(k, m),
            ("lrc", &[k, l, g]) => CodeScheme::lrc(k, l, g),
            _ => Err(bad()),
        }
    }
}

impl From<CodeScheme> for String {
    fn from(s: CodeScheme) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for CodeScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Split of an RS stripe into `N_g = ceil(len/m)` contiguous groups, the
/// first `t` of size `ceil(len/N_g)` and the rest of size `floor(len/N_g)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripeGrouping {
    pub len: usize,
    pub m: usize,
    pub groups: usize,
    pub large_groups: usize,
    pub size_max: usize,
    pub size_min: usize,
    /// `floor(len / m)`
    pub a: usize,
    /// `len mod m`
    pub b: usize,
    starts: Vec<usize>,
}

impl StripeGrouping {
    pub fn group_size(&self, g: usize) -> usize {
        if g < self.large_groups {
            self.size_max
        } else {
            self.size_min
        }
    }

    pub fn group_range(&self, g: usize) -> Range<usize> {
        self.starts[g]..self.starts[g] + self.group_size(g)
    }

    pub fn group_of(&self, block: usize) -> usize {
        self.starts.partition_point(|&s| s <= block) - 1
    }

    pub fn offset_in_group(&self, block: usize) -> usize {
        block - self.starts[self.group_of(block)]
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.groups).map(|g| self.group_size(g)).collect()
    }
}

pub fn group_stripe_rs(scheme: &CodeScheme) -> Result<StripeGrouping> {
    let CodeScheme::Rs { k, m } = *scheme else {
        return Err(Error::Scheme(format!("{scheme} is not an RS scheme")));
    };
    let len = k + m;
    let groups = len.div_ceil(m);
    let large_groups = len % groups;
    let size_max = len.div_ceil(groups);
    let size_min = len / groups;
    let mut starts = Vec::with_capacity(groups);
    let mut next = 0;
    for g in 0..groups {
        starts.push(next);
        next += if g < large_groups { size_max } else { size_min };
    }
    debug_assert_eq!(next, len);
    Ok(StripeGrouping {
        len,
        m,
        groups,
        large_groups,
        size_max,
        size_min,
        a: len / m,
        b: len % m,
        starts,
    })
}

/// Average cross-rack reads per failed block under the D3 layout.
pub fn mu_formula(scheme: &CodeScheme) -> Result<Ratio<u64>> {
    let CodeScheme::Rs { k, m } = *scheme else {
        return Err(Error::Scheme(format!("{scheme} is not an RS scheme")));
    };
    let (k, m) = (k as u64, m as u64);
    let len = k + m;
    let (a, b) = (len / m, len % m);
    Ok(if b == m - 1 {
        Ratio::new((a - 1) * (k + 1) + a * (m - 1), k + m)
    } else {
        Ratio::from_integer(a - 1)
    })
}

/// Node-level OA column of each block of an LRC stripe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LrcColumnAssignment {
    pub n_cols: usize,
    pub col_of: Vec<usize>,
}

pub fn lrc_columns(scheme: &CodeScheme) -> Result<LrcColumnAssignment> {
    let CodeScheme::Lrc { k, l, g } = *scheme else {
        return Err(Error::Scheme(format!("{scheme} is not an LRC scheme")));
    };
    if k % l != 0 {
        return Err(Error::Scheme(format!("lrc:{k},{l},{g}: l must divide k")));
    }
    let size = k / l;
    let n_cols = (size + 1).max(l + g);
    let mut col_of = vec![usize::MAX; k + l + g];
    for j in 0..l {
        col_of[k + j] = j;
    }
    for i in 0..g {
        col_of[k + l + i] = (l + i) % n_cols;
    }
    for j in 0..l {
        let mut used = vec![col_of[k + j]];
        for t in 0..size {
            let preferred = (j + 1 + t) % n_cols;
            let col = if used.contains(&preferred) {
                (0..n_cols).find(|c| !used.contains(c)).unwrap()
            } else {
                preferred
            };
            used.push(col);
            col_of[j * size + t] = col;
        }
    }
    Ok(LrcColumnAssignment { n_cols, col_of })
}
