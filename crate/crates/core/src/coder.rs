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

//! A small systematic GF(2^8) coder used to check that planned repairs,
//! including in-rack partial aggregation, rebuild blocks bit for bit.
//!
//! RS generator: the `len × k` Vandermonde matrix on points `0..len`,
//! right-multiplied by the inverse of its top `k × k` block. Any `k` rows
//! of it are invertible.
//!
//! LRC generator: local parity `j` is the XOR of its group's data blocks.
//! Global parities `0..g-1` use coefficients `2^((i+1)(d+1))`; the last
//! global is chosen so that all `l + g` parities XOR to zero, which makes
//! every parity the XOR of the other `l + g - 1`.

use crate::codes::CodeScheme;
use crate::error::{Error, Result};
use crate::gf256::{self, Matrix};

#[derive(Debug, Clone)]
pub struct Coder {
    scheme: CodeScheme,
    generator: Matrix,
}

/// `B_target = Σ coeffs[i] · B_sources[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairEquation {
    pub target: usize,
    pub sources: Vec<usize>,
    pub coeffs: Vec<u8>,
}

impl RepairEquation {
    pub fn coefficient(&self, block: usize) -> Option<u8> {
        self.sources
            .iter()
            .position(|&s| s == block)
            .map(|i| self.coeffs[i])
    }

    /// Partial sum over a subset of the sources. An empty subset yields a
    /// zero block of `block_len` bytes.
    pub fn partial(&self, subset: &[(usize, &[u8])], block_len: usize) -> Result<Vec<u8>> {
        let mut out = vec![0u8; block_len];
        for &(idx, data) in subset {
            let c = self.coefficient(idx).ok_or_else(|| {
                Error::Coder(format!(
                    "block {idx} is not in the repair set of block {}",
                    self.target
                ))
            })?;
            if data.len() != block_len {
                return Err(Error::Coder("unequal block lengths".into()));
            }
            gf256::mul_acc(&mut out, data, c);
        }
        Ok(out)
    }
}

/// XOR-sum of partial combinations.
pub fn combine_partials<'a>(
    partials: impl IntoIterator<Item = &'a [u8]>,
    block_len: usize,
) -> Vec<u8> {
    let mut out = vec![0u8; block_len];
    for p in partials {
        gf256::mul_acc(&mut out, p, 1);
    }
    out
}

impl Coder {
    pub fn new(scheme: CodeScheme) -> Self {
        let generator = match scheme {
            CodeScheme::Rs { k, m } => rs_generator(k, k + m),
            CodeScheme::Lrc { k, l, g } => lrc_generator(k, l, g),
        };
        Coder { scheme, generator }
    }

    pub fn scheme(&self) -> CodeScheme {
        self.scheme
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    pub fn encode(&self, data: &[Vec<u8>]) -> Result<Vec<Vec<u8>>> {
        let k = self.scheme.k();
        if data.len() != k {
            return Err(Error::Coder(format!(
                "expected {k} data blocks, got {}",
                data.len()
            )));
        }
        let len = data[0].len();
        if data.iter().any(|d| d.len() != len) {
            return Err(Error::Coder("unequal block lengths".into()));
        }
        Ok(self
            .generator
            .iter()
            .map(|row| {
                let mut out = vec![0u8; len];
                for (c, d) in row.iter().zip(data) {
                    gf256::mul_acc(&mut out, d, *c);
                }
                out
            })
            .collect())
    }

    /// Linear combination that rebuilds `target` from `sources`.
    pub fn repair_equation(&self, target: usize, sources: &[usize]) -> Result<RepairEquation> {
        let len = self.scheme.len();
        if target >= len || sources.iter().any(|&s| s >= len || s == target) {
            return Err(Error::Coder(format!(
                "invalid repair of {target} from {sources:?}"
            )));
        }
        let mut sorted = sources.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sources.len() {
            return Err(Error::Coder("duplicate source blocks".into()));
        }
        let coeffs = match self.scheme {
            CodeScheme::Rs { k, .. } => {
                if sources.len() != k {
                    return Err(Error::Coder(format!(
                        "RS repair needs exactly {k} sources, got {}",
                        sources.len()
                    )));
                }
                let sub: Matrix = sources.iter().map(|&s| self.generator[s].clone()).collect();
                let inv = gf256::invert(&sub)
                    .ok_or_else(|| Error::Coder("singular source set".into()))?;
                gf256::mat_mul(&vec![self.generator[target].clone()], &inv).remove(0)
            }
            CodeScheme::Lrc { .. } => {
                let mut expected = self.scheme.lrc_repair_set(target)?;
                expected.sort_unstable();
                if expected != sorted {
                    return Err(Error::Coder(format!(
                        "block {target} is rebuilt from {expected:?}, not {sources:?}"
                    )));
                }
                vec![1; sources.len()]
            }
        };
        Ok(RepairEquation {
            target,
            sources: sources.to_vec(),
            coeffs,
        })
    }

    pub fn decode_from(&self, target: usize, blocks: &[(usize, &[u8])]) -> Result<Vec<u8>> {
        let sources: Vec<usize> = blocks.iter().map(|b| b.0).collect();
        let eq = self.repair_equation(target, &sources)?;
        let len = blocks.first().map_or(0, |b| b.1.len());
        eq.partial(blocks, len)
    }
}

fn rs_generator(k: usize, len: usize) -> Matrix {
    let vander: Matrix = (0..len)
        .map(|i| (0..k).map(|j| gf256::pow(i as u8, j)).collect())
        .collect();
    let top: Matrix = vander[..k].to_vec();
    let inv = gf256::invert(&top).expect("Vandermonde block on distinct points is invertible");
    gf256::mat_mul(&vander, &inv)
}

fn lrc_generator(k: usize, l: usize, g: usize) -> Matrix {
    let size = k / l;
    let mut rows: Matrix = (0..k)
        .map(|i| (0..k).map(|j| u8::from(i == j)).collect())
        .collect();
    for j in 0..l {
        rows.push((0..k).map(|d| u8::from(d / size == j)).collect());
    }
    let mut last = vec![1u8; k];
    for i in 0..g - 1 {
        let row: Vec<u8> = (0..k).map(|d| gf256::pow(2, (i + 1) * (d + 1))).collect();
        last.iter_mut().zip(&row).for_each(|(a, b)| *a ^= b);
        rows.push(row);
    }
    rows.push(last);
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(k: usize, len: usize, seed: u64) -> Vec<Vec<u8>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k)
            .map(|_| (0..len).map(|_| rng.gen()).collect())
            .collect()
    }

    fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == size)
            .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    #[test]
    fn systematic() {
        let coder = Coder::new(CodeScheme::rs(6, 3).unwrap());
        let data = random_data(6, 64, 1);
        let coded = coder.encode(&data).unwrap();
        assert_eq!(&coded[..6], &data[..]);
    }

    #[test]
    fn single_parity_touches_every_block() {
        let coder = Coder::new(CodeScheme::rs(4, 1).unwrap());
        assert!(coder.generator()[4].iter().all(|&c| c != 0));
        let data = random_data(4, 32, 2);
        let coded = coder.encode(&data).unwrap();
        for lost in 0..5 {
            let avail: Vec<(usize, &[u8])> = (0..5)
                .filter(|&b| b != lost)
                .map(|b| (b, coded[b].as_slice()))
                .collect();
            assert_eq!(coder.decode_from(lost, &avail).unwrap(), coded[lost]);
        }
    }

    #[test]
    fn unequal_lengths_rejected() {
        let coder = Coder::new(CodeScheme::rs(2, 1).unwrap());
        assert!(coder.encode(&[vec![1, 2], vec![3]]).is_err());
    }

    #[test]
    fn any_erasure_pattern_decodes_rs_3_2() {
        let coder = Coder::new(CodeScheme::rs(3, 2).unwrap());
        let data = random_data(3, 1024, 3);
        let coded = coder.encode(&data).unwrap();
        for survivors in subsets(5, 3) {
            for target in (0..5).filter(|t| !survivors.contains(t)) {
                let blocks: Vec<(usize, &[u8])> = survivors
                    .iter()
                    .map(|&s| (s, coded[s].as_slice()))
                    .collect();
                assert_eq!(coder.decode_from(target, &blocks).unwrap(), coded[target]);
            }
        }
    }

    #[test]
    fn lrc_rules() {
        let coder = Coder::new(CodeScheme::lrc(4, 2, 1).unwrap());
        let data = random_data(4, 128, 4);
        let coded = coder.encode(&data).unwrap();
        let d0 = coder
            .decode_from(0, &[(1, &coded[1]), (4, &coded[4])])
            .unwrap();
        assert_eq!(d0, coded[0]);
        let p2 = coder
            .decode_from(6, &[(4, &coded[4]), (5, &coded[5])])
            .unwrap();
        assert_eq!(p2, coded[6]);
        assert!(coder
            .decode_from(0, &[(2, &coded[2]), (4, &coded[4])])
            .is_err());
    }

    #[test]
    fn lrc_multiple_globals() {
        let scheme = CodeScheme::lrc(6, 3, 2).unwrap();
        let coder = Coder::new(scheme);
        let coded = coder.encode(&random_data(6, 64, 5)).unwrap();
        for target in 0..scheme.len() {
            let set = scheme.lrc_repair_set(target).unwrap();
            let blocks: Vec<(usize, &[u8])> =
                set.iter().map(|&s| (s, coded[s].as_slice())).collect();
            assert_eq!(
                coder.decode_from(target, &blocks).unwrap(),
                coded[target],
                "block {target}"
            );
        }
    }

    #[test]
    fn partial_sums_match_direct_decode() {
        let coder = Coder::new(CodeScheme::rs(3, 2).unwrap());
        let coded = coder.encode(&random_data(3, 256, 6)).unwrap();
        let eq = coder.repair_equation(0, &[2, 3, 4]).unwrap();
        let first = eq.partial(&[(2, &coded[2]), (3, &coded[3])], 256).unwrap();
        let second = eq.partial(&[(4, &coded[4])], 256).unwrap();
        assert_eq!(
            combine_partials([first.as_slice(), second.as_slice()], 256),
            coded[0]
        );
        assert_eq!(eq.partial(&[], 256).unwrap(), vec![0u8; 256]);
        assert!(eq.partial(&[(1, &coded[1])], 256).is_err());
    }

    #[test]
    fn random_three_way_partitions() {
        let scheme = CodeScheme::rs(6, 3).unwrap();
        let coder = Coder::new(scheme);
        let coded = coder.encode(&random_data(6, 512, 7)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let mut idx: Vec<usize> = (0..9).collect();
            let target = idx.remove(rng.gen_range(0..9));
            while idx.len() > 6 {
                idx.remove(rng.gen_range(0..idx.len()));
            }
            let eq = coder.repair_equation(target, &idx).unwrap();
            let mut parts: [Vec<(usize, &[u8])>; 3] = Default::default();
            for &s in &idx {
                parts[rng.gen_range(0..3)].push((s, coded[s].as_slice()));
            }
            let partials: Vec<Vec<u8>> =
                parts.iter().map(|p| eq.partial(p, 512).unwrap()).collect();
            let sum = combine_partials(partials.iter().map(Vec::as_slice), 512);
            assert_eq!(sum, coded[target]);
        }
    }
}
