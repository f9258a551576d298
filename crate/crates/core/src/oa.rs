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

//! Orthogonal arrays OA(n, k) and the rack addressing table cut from them.
//!
//! An OA(n, k) is an `n² × k` matrix over `{0, …, n-1}` in which every ordered
//! pair of symbols occurs exactly once in every pair of columns. For a prime
//! power `q` the rows are indexed by `(j, i) ∈ GF(q)²` in `j`-major order and
//! column `c` holds `i + λ_c·j`, with `λ_c` running over the field elements
//! in the order `1, 2, …, q-1, 0`. The first `q` rows (`j = 0`) are then the
//! constant rows `(i, i, …, i)`. An optional extra column `j` reaches the
//! `q + 1` column bound at the cost of that prefix. Composite orders are
//! built as a product of their prime-power factors.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::{factorize, prime_power, Field};

/// Column bound `min p_i^e_i + 1` over the prime factorization of `n`.
pub fn max_columns(n: usize) -> Result<usize> {
    check_order(n)?;
    Ok(factorize(n)
        .iter()
        .map(|&(p, e)| p.pow(e) + 1)
        .min()
        .unwrap())
}

/// Largest `k` for which the construction keeps all `k` columns identical in
/// the first `n` rows. This is one less than [`max_columns`].
pub fn prefix_columns(n: usize) -> Result<usize> {
    Ok(max_columns(n)? - 1)
}

fn check_order(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::OrthogonalArray(format!(
            "symbol count must be at least 2, got {n}"
        )));
    }
    Ok(())
}

pub type Symbol = u16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalArray {
    n: usize,
    k: usize,
    rows: Vec<Symbol>,
    prefix_identical: usize,
}

impl OrthogonalArray {
    fn from_rows(n: usize, k: usize, rows: Vec<Symbol>) -> Self {
        let prefix_identical = measure_prefix(&rows, k);
        OrthogonalArray {
            n,
            k,
            rows,
            prefix_identical,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_rows(&self) -> usize {
        self.n * self.n
    }

    pub fn row(&self, i: usize) -> &[Symbol] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.rows[row * self.k + col] as usize
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Symbol]> {
        self.rows.chunks(self.k)
    }

    /// Number of leading rows whose entries agree across all columns.
    pub fn prefix_identical(&self) -> usize {
        self.prefix_identical
    }

    pub fn to_matrix(&self) -> Vec<Vec<i64>> {
        self.rows()
            .map(|r| r.iter().map(|&s| s as i64).collect())
            .collect()
    }

    /// One row per line, comma separated.
    pub fn to_csv(&self) -> String {
        rows_to_csv(self.rows())
    }
}

fn rows_to_csv<'a>(rows: impl Iterator<Item = &'a [Symbol]>) -> String {
    let mut out = String::new();
    for row in rows {
        for (c, s) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{s}");
        }
        out.push('\n');
    }
    out
}

fn measure_prefix(rows: &[Symbol], k: usize) -> usize {
    rows.chunks(k)
        .take_while(|r| r.iter().all(|&s| s == r[0]))
        .count()
}

/// Builds an OA(n, k) for `2 <= k <= max_columns(n)`.
pub fn construct_oa(n: usize, k: usize) -> Result<OrthogonalArray> {
    let bound = max_columns(n)?;
    if k < 2 || k > bound {
        return Err(Error::OrthogonalArray(format!(
            "OA({n}, k) supports 2 <= k <= {bound}, got k = {k}"
        )));
    }
    let mut factors = factorize(n).into_iter().map(|(p, e)| p.pow(e));
    let first = prime_power_oa(factors.next().unwrap(), k)?;
    let rows = factors.try_fold(first, |acc, q| {
        prime_power_oa(q, k).map(|next| product(&acc, &next, k))
    })?;
    Ok(OrthogonalArray::from_rows(n, k, rows.rows))
}

struct RawArray {
    n: usize,
    rows: Vec<Symbol>,
}

fn prime_power_oa(q: usize, k: usize) -> Result<RawArray> {
    debug_assert!(prime_power(q).is_some());
    let field = Field::new(q)?;
    let extra = k == q + 1;
    let affine = if extra { q } else { k };
    let mut rows = Vec::with_capacity(q * q * k);
    for j in 0..q {
        for i in 0..q {
            for c in 0..affine {
                let lambda = (c + 1) % q;
                rows.push(field.add(i, field.mul(lambda, j)) as Symbol);
            }
            if extra {
                rows.push(j as Symbol);
            }
        }
    }
    Ok(RawArray { n: q, rows })
}

/// Row-pairwise product; symbol `e1 * n2 + e2`. Pairs of prefix rows come
/// first so constant rows stay constant and in symbol order.
fn product(a: &RawArray, b: &RawArray, k: usize) -> RawArray {
    let (na, nb) = (a.n, b.n);
    let pa = measure_prefix(&a.rows, k).min(na);
    let pb = measure_prefix(&b.rows, k).min(nb);
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(na * na * nb * nb);
    if pa == na && pb == nb {
        for x in 0..na {
            for y in 0..nb {
                order.push((x, y));
            }
        }
    }
    for x in 0..na * na {
        for y in 0..nb * nb {
            if !(pa == na && pb == nb && x < na && y < nb) {
                order.push((x, y));
            }
        }
    }
    let mut rows = Vec::with_capacity(order.len() * k);
    for (x, y) in order {
        for c in 0..k {
            let s = a.rows[x * k + c] as usize * nb + b.rows[y * k + c] as usize;
            rows.push(s as Symbol);
        }
    }
    RawArray { n: na * nb, rows }
}

/// Outcome of checking a candidate matrix against the OA definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OaReport {
    pub rows: usize,
    pub cols: usize,
    /// Inferred symbol count (square root of the row count), if any.
    pub n: Option<usize>,
    pub shape_ok: bool,
    pub symbols_ok: bool,
    pub column_frequency_ok: bool,
    pub pair_coverage_ok: bool,
    pub prefix_identical: usize,
    /// Number of column pairs checked for exact coverage.
    pub pairs_checked: usize,
}

impl OaReport {
    pub fn passed(&self) -> bool {
        self.shape_ok && self.symbols_ok && self.column_frequency_ok && self.pair_coverage_ok
    }
}

/// Exhaustively checks the OA definition on an arbitrary integer matrix.
/// Malformed input produces a failing report.
pub fn verify_oa(matrix: &[Vec<i64>]) -> OaReport {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    let rectangular = matrix.iter().all(|r| r.len() == cols);
    let root = (rows as f64).sqrt().round() as usize;
    let n = (root * root == rows && root >= 1).then_some(root);
    let mut report = OaReport {
        rows,
        cols,
        n,
        shape_ok: rectangular && n.is_some() && cols >= 1,
        symbols_ok: false,
        column_frequency_ok: false,
        pair_coverage_ok: false,
        prefix_identical: 0,
        pairs_checked: 0,
    };
    if !rectangular {
        return report;
    }
    report.prefix_identical = matrix
        .iter()
        .take_while(|r| r.iter().all(|&s| Some(&s) == r.first()))
        .count();
    let Some(n) = n else {
        return report;
    };
    report.symbols_ok = matrix.iter().flatten().all(|&s| s >= 0 && (s as usize) < n);
    if !report.symbols_ok || !report.shape_ok {
        return report;
    }
    report.column_frequency_ok = (0..cols).all(|c| {
        let mut freq = vec![0usize; n];
        for r in matrix {
            freq[r[c] as usize] += 1;
        }
        freq.iter().all(|&f| f == n)
    });
    let mut coverage_ok = true;
    let mut seen = vec![0usize; n * n];
    for c1 in 0..cols {
        for c2 in c1 + 1..cols {
            seen.iter_mut().for_each(|s| *s = 0);
            for r in matrix {
                seen[r[c1] as usize * n + r[c2] as usize] += 1;
            }
            coverage_ok &= seen.iter().all(|&s| s == 1);
            report.pairs_checked += 1;
        }
    }
    report.pair_coverage_ok = coverage_ok;
    report
}

/// The matrix M: an OA(r, N_g + 1) with its `r` constant rows removed.
/// Columns `0..N_g` give the rack of each region-group of a stripe region;
/// the last column names the rack that receives newly formed region-groups
/// during recovery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressingTable {
    racks: usize,
    cols: usize,
    rows: Vec<Symbol>,
}

impl AddressingTable {
    pub fn racks(&self) -> usize {
        self.racks
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of region-groups addressed per row (`cols - 1`).
    pub fn groups(&self) -> usize {
        self.cols - 1
    }

    /// `r(r-1)`: the number of stripe regions in one full cycle.
    pub fn num_rows(&self) -> usize {
        self.racks * (self.racks - 1)
    }

    pub fn row(&self, j: usize) -> &[Symbol] {
        &self.rows[j * self.cols..(j + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.rows[row * self.cols + col] as usize
    }

    /// Rack reserved for recovered blocks of region `row`.
    pub fn spare_rack(&self, row: usize) -> usize {
        self.get(row, self.cols - 1)
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(self.rows.chunks(self.cols))
    }
}

pub fn derive_addressing_table(oa: &OrthogonalArray, groups: usize) -> Result<AddressingTable> {
    let r = oa.n();
    if oa.k() < groups + 1 {
        return Err(Error::OrthogonalArray(format!(
            "addressing {groups} groups needs {} columns, array has {}",
            groups + 1,
            oa.k()
        )));
    }
    if oa.prefix_identical() < r {
        return Err(Error::OrthogonalArray(format!(
            "only {} identical leading rows, need {r}",
            oa.prefix_identical()
        )));
    }
    let cols = groups + 1;
    let mut rows = Vec::with_capacity(r * (r - 1) * cols);
    for i in r..r * r {
        rows.extend_from_slice(&oa.row(i)[..cols]);
    }
    Ok(AddressingTable {
        racks: r,
        cols,
        rows,
    })
}

/// Builds the addressing table for `racks` racks and `groups` region-groups.
pub fn addressing_table(racks: usize, groups: usize) -> Result<AddressingTable> {
    derive_addressing_table(&construct_oa(racks, groups + 1)?, groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_count_oracle(oa: &OrthogonalArray) -> bool {
        // independent of verify_oa: brute-force search for each pair
        let n = oa.n();
        for c1 in 0..oa.k() {
            for c2 in 0..oa.k() {
                if c1 == c2 {
                    continue;
                }
                for x in 0..n {
                    for y in 0..n {
                        let hits = oa
                            .rows()
                            .filter(|r| r[c1] as usize == x && r[c2] as usize == y)
                            .count();
                        if hits != 1 {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    #[test]
    fn column_bounds() {
        assert_eq!(max_columns(5).unwrap(), 6);
        assert_eq!(max_columns(6).unwrap(), 3);
        assert_eq!(max_columns(2).unwrap(), 3);
        assert_eq!(max_columns(12).unwrap(), 4);
        assert_eq!(prefix_columns(8).unwrap(), 8);
        assert!(max_columns(1).is_err());
        assert!(max_columns(0).is_err());
    }

    #[test]
    fn small_array_prefix() {
        let oa = construct_oa(3, 3).unwrap();
        assert_eq!(oa.num_rows(), 9);
        assert_eq!(oa.row(0), &[0, 0, 0]);
        assert_eq!(oa.row(1), &[1, 1, 1]);
        assert_eq!(oa.row(2), &[2, 2, 2]);
        assert_eq!(oa.prefix_identical(), 3);
        assert!(verify_oa(&oa.to_matrix()).passed());
    }

    #[test]
    fn oa_5_4_prefix_rows() {
        let oa = construct_oa(5, 4).unwrap();
        assert_eq!(oa.num_rows(), 25);
        for i in 0..5 {
            assert!(oa.row(i).iter().all(|&s| s as usize == i));
        }
        assert_eq!(oa.prefix_identical(), 5);
    }

    #[test]
    fn order_four_against_oracle() {
        let oa = construct_oa(4, 3).unwrap();
        assert!(pair_count_oracle(&oa));
        let report = verify_oa(&oa.to_matrix());
        assert!(report.passed());
        assert_eq!(report.prefix_identical, 4);
    }

    #[test]
    fn extra_column_reaches_max_columns() {
        let oa = construct_oa(8, 9).unwrap();
        let report = verify_oa(&oa.to_matrix());
        assert!(report.passed());
        assert_eq!(report.pairs_checked, 36);
        assert!(pair_count_oracle(&oa));
        // the non-affine column breaks the constant prefix after row 0
        assert_eq!(oa.prefix_identical(), 1);
    }

    #[test]
    fn composite_orders() {
        for (n, k) in [(6, 2), (6, 3), (10, 3), (12, 3), (12, 4)] {
            let oa = construct_oa(n, k).unwrap();
            assert!(verify_oa(&oa.to_matrix()).passed(), "OA({n},{k})");
            assert!(pair_count_oracle(&oa), "OA({n},{k})");
        }
        assert_eq!(construct_oa(6, 2).unwrap().prefix_identical(), 6);
        assert_eq!(construct_oa(12, 3).unwrap().prefix_identical(), 12);
    }

    #[test]
    fn out_of_range_columns() {
        assert!(construct_oa(5, 7).is_err());
        assert!(construct_oa(5, 1).is_err());
        assert!(construct_oa(1, 2).is_err());
    }

    #[test]
    fn degenerate_matrix_fails_frequency() {
        let zeros = vec![vec![0i64; 3]; 9];
        let report = verify_oa(&zeros);
        assert!(report.shape_ok && report.symbols_ok);
        assert!(!report.column_frequency_ok);
        assert!(!report.passed());
        assert_eq!(report.prefix_identical, 9);
    }

    #[test]
    fn malformed_matrices_fail() {
        assert!(!verify_oa(&[]).passed());
        assert!(!verify_oa(&[vec![0, 1], vec![1]]).passed());
        let shape = verify_oa(&vec![vec![0i64, 0]; 5]);
        assert!(!shape.shape_ok);
        let mut bad = construct_oa(3, 3).unwrap().to_matrix();
        bad[4][1] = 7;
        assert!(!verify_oa(&bad).symbols_ok);
    }

    #[test]
    fn addressing_table_golden_row() {
        let table = addressing_table(5, 3).unwrap();
        assert_eq!(table.num_rows(), 20);
        assert_eq!(&table.row(3)[..3], &[4, 0, 1]);
    }

    #[test]
    fn addressing_table_invariants() {
        for (r, groups) in [(3, 2), (5, 3), (7, 3), (8, 7), (9, 4)] {
            let table = addressing_table(r, groups).unwrap();
            for c in 0..table.cols() {
                let mut freq = vec![0; r];
                for j in 0..table.num_rows() {
                    freq[table.get(j, c)] += 1;
                }
                assert!(freq.iter().all(|&f| f == r - 1), "r={r} col={c}");
            }
            for j in 0..table.num_rows() {
                let row = table.row(j);
                for a in 0..row.len() {
                    for b in a + 1..row.len() {
                        assert_ne!(row[a], row[b], "row {j} repeats a rack");
                    }
                }
            }
        }
    }

    #[test]
    fn addressing_table_rejects_short_prefix() {
        let oa = construct_oa(5, 6).unwrap();
        assert!(derive_addressing_table(&oa, 5).is_err());
        let oa = construct_oa(5, 3).unwrap();
        assert!(derive_addressing_table(&oa, 3).is_err());
    }

    #[test]
    fn csv_export() {
        let csv = construct_oa(2, 2).unwrap().to_csv();
        assert_eq!(csv.lines().next(), Some("0,0"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn construction_is_deterministic() {
        assert_eq!(construct_oa(9, 5).unwrap(), construct_oa(9, 5).unwrap());
    }
}
