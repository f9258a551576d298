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

//! Arithmetic in small fields GF(p^e), used to build orthogonal arrays.
//!
//! Elements are encoded as the integer value of their coefficient vector in
//! base `p` (digit `i` is the coefficient of `x^i`), so `0..q` is the
//! canonical element order. Extension fields are reduced by the smallest
//! monic irreducible polynomial of degree `e` under the same encoding,
//! which gives for example:
//!
//! | q  | modulus          |
//! |----|------------------|
//! | 4  | x^2 + x + 1      |
//! | 8  | x^3 + x + 1      |
//! | 9  | x^2 + 1          |
//! | 16 | x^4 + x + 1      |
//! | 25 | x^2 + 2          |
//! | 27 | x^3 + 2x + 1     |
//! | 32 | x^5 + x^2 + 1    |
//! | 49 | x^2 + 1          |
//! | 64 | x^6 + x + 1      |
//!
//! Prime fields use plain modular arithmetic.

use crate::error::{Error, Result};

/// Largest field order we build tables for.
pub const MAX_ORDER: usize = 1024;

/// Prime factorization of `n` as ascending `(p, e)` pairs.
pub fn factorize(mut n: usize) -> Vec<(usize, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Returns `(p, e)` if `q` is a prime power.
pub fn prime_power(q: usize) -> Option<(usize, u32)> {
    match factorize(q).as_slice() {
        [(p, e)] => Some((*p, *e)),
        _ => None,
    }
}

/// A finite field of prime-power order with precomputed operation tables.
#[derive(Debug, Clone)]
pub struct Field {
    p: usize,
    e: u32,
    q: usize,
    /// Coefficients of the monic modulus, lowest degree first (length e+1).
    modulus: Vec<usize>,
    add: Vec<u16>,
    mul: Vec<u16>,
}

impl Field {
    pub fn new(q: usize) -> Result<Self> {
        let (p, e) = prime_power(q)
            .ok_or_else(|| Error::OrthogonalArray(format!("{q} is not a prime power")))?;
        if q > MAX_ORDER {
            return Err(Error::OrthogonalArray(format!(
                "field order {q} exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        let modulus = if e == 1 {
            vec![0, 1]
        } else {
            smallest_irreducible(p, e as usize)
        };
        let mut field = Field {
            p,
            e,
            q,
            modulus,
            add: vec![0; q * q],
            mul: vec![0; q * q],
        };
        for a in 0..q {
            for b in 0..q {
                field.add[a * q + b] = field.slow_add(a, b) as u16;
                field.mul[a * q + b] = field.slow_mul(a, b) as u16;
            }
        }
        Ok(field)
    }

    pub fn order(&self) -> usize {
        self.q
    }

    pub fn characteristic(&self) -> usize {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.e
    }

    /// Modulus coefficients, lowest degree first.
    pub fn modulus(&self) -> &[usize] {
        &self.modulus
    }

    #[inline]
    pub fn add(&self, a: usize, b: usize) -> usize {
        self.add[a * self.q + b] as usize
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.q + b] as usize
    }

    fn digits(&self, mut a: usize) -> Vec<usize> {
        let mut d = vec![0; self.e as usize];
        for slot in d.iter_mut() {
            *slot = a % self.p;
            a /= self.p;
        }
        d
    }

    fn undigits(&self, d: &[usize]) -> usize {
        d.iter().rev().fold(0, |acc, &c| acc * self.p + c)
    }

    fn slow_add(&self, a: usize, b: usize) -> usize {
        let (da, db) = (self.digits(a), self.digits(b));
        let sum: Vec<usize> = da.iter().zip(&db).map(|(x, y)| (x + y) % self.p).collect();
        self.undigits(&sum)
    }

    fn slow_mul(&self, a: usize, b: usize) -> usize {
        if self.e == 1 {
            return (a * b) % self.p;
        }
        let prod = poly_mul(&self.digits(a), &self.digits(b), self.p);
        let rem = poly_rem(&prod, &self.modulus, self.p);
        let mut d = vec![0; self.e as usize];
        for (i, c) in rem.into_iter().enumerate().take(self.e as usize) {
            d[i] = c;
        }
        self.undigits(&d)
    }
}

fn poly_mul(a: &[usize], b: &[usize], p: usize) -> Vec<usize> {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    out
}

/// Remainder of `a` modulo the monic polynomial `m`.
fn poly_rem(a: &[usize], m: &[usize], p: usize) -> Vec<usize> {
    let mut r = a.to_vec();
    let dm = m.len() - 1;
    while r.len() > dm {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        if lead != 0 {
            for (i, &c) in m.iter().enumerate() {
                r[shift + i] = (r[shift + i] + p * p - (lead * c) % p) % p;
            }
        }
        r.pop();
    }
    r
}

fn monic_from_index(idx: usize, degree: usize, p: usize) -> Vec<usize> {
    let mut coeffs = Vec::with_capacity(degree + 1);
    let mut v = idx;
    for _ in 0..degree {
        coeffs.push(v % p);
        v /= p;
    }
    coeffs.push(1);
    coeffs
}

fn is_irreducible(poly: &[usize], p: usize) -> bool {
    let degree = poly.len() - 1;
    for d in 1..=degree / 2 {
        for idx in 0..p.pow(d as u32) {
            let divisor = monic_from_index(idx, d, p);
            if poly_rem(poly, &divisor, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn smallest_irreducible(p: usize, degree: usize) -> Vec<usize> {
    (0..p.pow(degree as u32))
        .map(|idx| monic_from_index(idx, degree, p))
        .find(|poly| is_irreducible(poly, p))
        .expect("an irreducible polynomial exists for every degree")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorization() {
        assert_eq!(factorize(2), vec![(2, 1)]);
        assert_eq!(factorize(12), vec![(2, 2), (3, 1)]);
        assert_eq!(factorize(49), vec![(7, 2)]);
        assert_eq!(prime_power(6), None);
        assert_eq!(prime_power(8), Some((2, 3)));
    }

    #[test]
    fn documented_moduli() {
        let expect: &[(usize, &[usize])] = &[
            (4, &[1, 1, 1]),
            (8, &[1, 1, 0, 1]),
            (9, &[1, 0, 1]),
            (16, &[1, 1, 0, 0, 1]),
            (25, &[2, 0, 1]),
            (27, &[1, 2, 0, 1]),
            (32, &[1, 0, 1, 0, 0, 1]),
            (49, &[1, 0, 1]),
            (64, &[1, 1, 0, 0, 0, 0, 1]),
        ];
        for (q, m) in expect {
            assert_eq!(Field::new(*q).unwrap().modulus(), *m, "q={q}");
        }
    }

    #[test]
    fn field_axioms_hold() {
        for q in [2, 3, 4, 5, 7, 8, 9, 16, 25, 27] {
            let f = Field::new(q).unwrap();
            for a in 0..q {
                assert_eq!(f.add(a, 0), a);
                assert_eq!(f.mul(a, 1), a);
                if a != 0 {
                    let inverses = (1..q).filter(|&b| f.mul(a, b) == 1).count();
                    assert_eq!(inverses, 1, "q={q} a={a}");
                }
                for b in 0..q {
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for c in 0..q {
                        assert_eq!(
                            f.mul(a, f.add(b, c)),
                            f.add(f.mul(a, b), f.mul(a, c)),
                            "distributivity q={q}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_non_prime_powers() {
        assert!(Field::new(6).is_err());
        assert!(Field::new(2048).is_err());
    }
}
