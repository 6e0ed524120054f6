//! Integral simplicial homology through Smith normal forms of boundary
//! matrices.
//!
//! Elimination runs in two phases. Unit pivots are removed sparsely (a unit
//! pivot contributes an invariant factor 1 and leaves a Schur complement
//! with the same remaining factors); whatever is left is reduced densely.
//! Sparse work is first tried in checked `i64` and repeated in `BigInt` on
//! overflow, the dense phase always uses `BigInt`.

use std::collections::BTreeSet;
use std::fmt::Debug;

use num_bigint::{BigInt, BigUint};
use num_traits::{CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::nerve::SimplicialComplex;

/// A sparse integer matrix stored by columns; each column is sorted by row
/// and holds no explicit zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    columns: Vec<Vec<(usize, i64)>>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, columns: vec![Vec::new(); cols] }
    }

    /// From row-major dense data.
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let columns = (0..ncols)
            .map(|j| (0..nrows).filter(|&i| rows[i][j] != 0).map(|i| (i, rows[i][j])).collect())
            .collect();
        IntMatrix { rows: nrows, columns }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, i64)] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.columns[j].binary_search_by_key(&i, |e| e.0).map(|k| self.columns[j][k].1).unwrap_or(0)
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![0; self.ncols()]; self.rows];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                out[i][j] = v;
            }
        }
        out
    }

    /// Exact product, `None` on overflow.
    pub fn checked_mul(&self, other: &IntMatrix) -> Option<IntMatrix> {
        assert_eq!(self.ncols(), other.rows, "dimension mismatch");
        let mut columns = Vec::with_capacity(other.ncols());
        for col in &other.columns {
            let mut acc = vec![0i64; self.rows];
            for &(k, b) in col {
                for &(i, a) in &self.columns[k] {
                    acc[i] = acc[i].checked_add(a.checked_mul(b)?)?;
                }
            }
            columns.push(acc.into_iter().enumerate().filter(|e| e.1 != 0).collect());
        }
        Some(IntMatrix { rows: self.rows, columns })
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(Vec::is_empty)
    }
}

/// The boundary map `∂_k` from `k`-chains to `(k-1)`-chains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryMatrix {
    pub k: usize,
    pub matrix: IntMatrix,
}

/// `∂_k` with entry `(-1)^i` at the face dropping the `i`-th vertex, for
/// `1 <= k <= dim K`.
pub fn boundary_matrix(complex: &SimplicialComplex, k: usize) -> Result<BoundaryMatrix> {
    let max = complex.dim().unwrap_or(0);
    if k == 0 || k > max {
        return Err(Error::BoundaryDegree { k, max });
    }
    Ok(BoundaryMatrix { k, matrix: boundary_unchecked(complex, k) })
}

fn boundary_unchecked(complex: &SimplicialComplex, k: usize) -> IntMatrix {
    let rows = complex.count(k - 1);
    let columns = complex
        .simplices(k)
        .par_iter()
        .map(|s| {
            let mut col: Vec<(usize, i64)> = crate::nerve::faces(s)
                .enumerate()
                .map(|(i, f)| {
                    let row = complex.index_of(&f).expect("complex is face closed");
                    (row, if i % 2 == 0 { 1 } else { -1 })
                })
                .collect();
            col.sort_unstable_by_key(|e| e.0);
            col
        })
        .collect();
    IntMatrix { rows, columns }
}

trait Coef: Clone + Debug + Zero + One + Signed + CheckedMul + CheckedSub + PartialOrd + From<i64> {}
impl Coef for i64 {}
impl Coef for BigInt {}

type Column<T> = Vec<(usize, T)>;

/// `a - f·b` on sorted sparse columns.
fn axpy<T: Coef>(a: &Column<T>, f: &T, b: &Column<T>) -> Option<Column<T>> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ra = a.get(i).map_or(usize::MAX, |e| e.0);
        let rb = b.get(j).map_or(usize::MAX, |e| e.0);
        if ra < rb {
            out.push(a[i].clone());
            i += 1;
        } else {
            let prod = f.checked_mul(&b[j].1)?;
            let v = if ra == rb {
                let v = a[i].1.checked_sub(&prod)?;
                i += 1;
                v
            } else {
                T::zero().checked_sub(&prod)?
            };
            j += 1;
            if !v.is_zero() {
                out.push((rb, v));
            }
        }
    }
    Some(out)
}

fn has_unit<T: Coef>(col: &Column<T>) -> bool {
    col.iter().any(|e| e.1.abs().is_one())
}

/// Removes unit pivots, lowest column then lowest row first. Returns the
/// number of pivots and the remaining nonzero columns.
fn eliminate_units<T: Coef>(rows: usize, mut cols: Vec<Column<T>>) -> Option<(usize, Vec<Column<T>>)> {
    let mut by_row: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); rows];
    let mut units = BTreeSet::new();
    for (j, col) in cols.iter().enumerate() {
        for e in col {
            by_row[e.0].insert(j);
        }
        if has_unit(col) {
            units.insert(j);
        }
    }
    let mut alive = vec![true; cols.len()];
    let mut pivots = 0;
    while let Some(j) = units.pop_first() {
        let pivot_col = std::mem::take(&mut cols[j]);
        let (prow, p) = pivot_col.iter().find(|e| e.1.abs().is_one()).cloned().expect("unit column");
        for e in &pivot_col {
            by_row[e.0].remove(&j);
        }
        let targets: Vec<usize> = by_row[prow].iter().copied().collect();
        for l in targets {
            let a = cols[l].iter().find(|e| e.0 == prow).map(|e| e.1.clone()).expect("row index is consistent");
            let f = a.checked_mul(&p)?;
            let updated = axpy(&cols[l], &f, &pivot_col)?;
            for e in &cols[l] {
                by_row[e.0].remove(&l);
            }
            for e in &updated {
                by_row[e.0].insert(l);
            }
            if has_unit(&updated) {
                units.insert(l);
            } else {
                units.remove(&l);
            }
            cols[l] = updated;
        }
        alive[j] = false;
        pivots += 1;
    }
    let rest = cols.into_iter().zip(alive).filter(|(c, a)| *a && !c.is_empty()).map(|(c, _)| c).collect();
    Some((pivots, rest))
}

/// Index of a nonzero entry of least magnitude in `a[t.., t..]`, lowest
/// column first on ties.
fn min_entry(a: &[Vec<BigInt>], t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let cols = a.first().map_or(0, Vec::len);
    for j in t..cols {
        for (i, row) in a.iter().enumerate().skip(t) {
            let v = &row[j];
            if v.is_zero() {
                continue;
            }
            if best.is_none_or(|(bi, bj)| v.abs() < a[bi][bj].abs()) {
                best = Some((i, j));
            }
        }
    }
    best
}

fn dense_snf(mut a: Vec<Vec<BigInt>>) -> Vec<BigInt> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut diag = Vec::new();
    for t in 0..rows.min(cols) {
        let Some((pi, pj)) = min_entry(&a, t) else { break };
        a.swap(t, pi);
        for row in a.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut clean = true;
            for i in t + 1..rows {
                if a[i][t].is_zero() {
                    continue;
                }
                let q = a[i][t].clone() / a[t][t].clone();
                for j in t..cols {
                    let d = &q * &a[t][j];
                    a[i][j] -= d;
                }
                if !a[i][t].is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..cols {
                if a[t][j].is_zero() {
                    continue;
                }
                let q = a[t][j].clone() / a[t][t].clone();
                for row in a.iter_mut().skip(t) {
                    let d = &q * &row[t];
                    row[j] -= d;
                }
                if !a[t][j].is_zero() {
                    clean = false;
                }
            }
            if clean {
                // divisibility: fold in any row whose entries the pivot does not divide
                let bad = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| !(&a[i][j] % &a[t][t]).is_zero()));
                match bad {
                    Some(i) => {
                        for j in t..cols {
                            let v = a[i][j].clone();
                            a[t][j] += v;
                        }
                    }
                    None => break,
                }
            }
            // move the smallest entry of row t / column t to the pivot
            let mut best = (t, t);
            for i in t..rows {
                if !a[i][t].is_zero() && (a[best.0][best.1].is_zero() || a[i][t].abs() < a[best.0][best.1].abs()) {
                    best = (i, t);
                }
            }
            for j in t..cols {
                if !a[t][j].is_zero() && a[t][j].abs() < a[best.0][best.1].abs() {
                    best = (t, j);
                }
            }
            a.swap(t, best.0);
            for row in a.iter_mut() {
                row.swap(t, best.1);
            }
        }
        diag.push(a[t][t].abs());
    }
    diag
}

/// Nonzero invariant factors `d_1 | d_2 | ... | d_r`.
pub fn smith_normal_form(m: &IntMatrix) -> Vec<BigInt> {
    let (ones, rest) = match eliminate_units(m.rows, m.columns.clone()) {
        Some((ones, rest)) => (ones, rest.into_iter().map(|c| c.into_iter().map(|(i, v)| (i, BigInt::from(v))).collect()).collect()),
        None => {
            let big: Vec<Column<BigInt>> =
                m.columns.iter().map(|c| c.iter().map(|&(i, v)| (i, BigInt::from(v))).collect()).collect();
            eliminate_units(m.rows, big).expect("big integers do not overflow")
        }
    };
    let mut factors: Vec<BigInt> = vec![BigInt::one(); ones];
    factors.extend(dense_remainder(rest));
    factors
}

fn dense_remainder(rest: Vec<Column<BigInt>>) -> Vec<BigInt> {
    if rest.is_empty() {
        return Vec::new();
    }
    let rows: BTreeSet<usize> = rest.iter().flatten().map(|e| e.0).collect();
    let row_pos: std::collections::HashMap<usize, usize> = rows.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    let mut dense = vec![vec![BigInt::zero(); rest.len()]; rows.len()];
    for (j, col) in rest.into_iter().enumerate() {
        for (i, v) in col {
            dense[row_pos[&i]][j] = v;
        }
    }
    dense_snf(dense)
}

/// Rank over `Z` (equivalently over `Q`).
pub fn rank(m: &IntMatrix) -> usize {
    smith_normal_form(m).len()
}

/// Betti numbers and torsion coefficients for degrees `0..betti.len()`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomologyGroups {
    pub betti: Vec<usize>,
    #[serde(serialize_with = "torsion_numbers")]
    pub torsion: Vec<Vec<BigUint>>,
}

fn torsion_numbers<S: Serializer>(t: &[Vec<BigUint>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let out: Vec<Vec<serde_json::Value>> = t
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| match v.to_u64() {
                    Some(x) => serde_json::Value::from(x),
                    None => serde_json::Value::from(v.to_str_radix(10)),
                })
                .collect()
        })
        .collect();
    out.serialize(s)
}

impl HomologyGroups {
    /// `Σ (-1)^k b_k`.
    pub fn euler_characteristic(&self) -> i64 {
        self.betti.iter().enumerate().map(|(k, &b)| if k % 2 == 0 { b as i64 } else { -(b as i64) }).sum()
    }

    pub fn has_torsion(&self) -> bool {
        self.torsion.iter().any(|t| !t.is_empty())
    }

    pub fn torsion_u64(&self) -> Vec<Vec<u64>> {
        self.torsion.iter().map(|t| t.iter().map(|v| v.to_u64().unwrap_or(u64::MAX)).collect()).collect()
    }
}

/// `H_k(K; Z)` for `k < max_dim`, from `∂_1 .. ∂_max_dim`.
pub fn homology_of_complex(complex: &SimplicialComplex, max_dim: usize) -> HomologyGroups {
    let top = complex.dim().unwrap_or(0);
    let factors: Vec<Vec<BigInt>> = (1..=max_dim)
        .into_par_iter()
        .map(|k| if k > top || complex.count(k) == 0 { Vec::new() } else { smith_normal_form(&boundary_unchecked(complex, k)) })
        .collect();
    // factors[k - 1] belongs to ∂_k
    let rank_of = |k: usize| if k == 0 || k > max_dim { 0 } else { factors[k - 1].len() };
    let mut betti = Vec::with_capacity(max_dim);
    let mut torsion = Vec::with_capacity(max_dim);
    for k in 0..max_dim {
        betti.push(complex.count(k) - rank_of(k) - rank_of(k + 1));
        torsion.push(factors[k].iter().filter(|d| !d.is_one()).map(|d| d.magnitude().clone()).collect());
    }
    HomologyGroups { betti, torsion }
}
