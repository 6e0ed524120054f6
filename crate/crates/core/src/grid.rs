//! The spherical grid `G_r`: the integer points `y ∈ Z^{n+1}` with
//! `‖y‖_∞ = M = ⌈√n / r⌉`, radially projected onto `S^n`.
//!
//! Points are streamed, never materialized. The shell is split into its
//! `2(n+1)` faces; a lattice point belongs to the face of the first
//! coordinate attaining `±M`, so every point is produced exactly once.
//! Faces are further split by their first free coordinate into independent
//! [`GridChunk`]s, which is the unit of parallel work.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;

/// Grid parameters for the sphere `S^n ⊂ R^{n+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    r: f64,
    m: u64,
}

/// Smallest integer `M` with `M·r >= √n`, decided in exact arithmetic on the
/// binary expansion of `r`.
fn ceil_sqrt_n_over_r(n: usize, r: f64) -> u64 {
    // r = mant · 2^exp exactly
    let bits = r.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if raw_exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), raw_exp - 1075) };
    let mant = BigUint::from(mant);
    let lhs_ok = |m: u64| -> bool {
        // (m · mant)^2 · 2^{2 exp} >= n
        let prod = BigUint::from(m) * &mant;
        let sq = &prod * &prod;
        let n = BigUint::from(n as u64);
        if exp >= 0 {
            (sq << (2 * exp) as usize) >= n
        } else {
            sq >= (n << (-2 * exp) as usize)
        }
    };
    let guess = ((n as f64).sqrt() / r).ceil().max(1.0) as u64;
    let mut m = guess.saturating_sub(2).max(1);
    while !lhs_ok(m) {
        m += 1;
    }
    m
}

impl GridSpec {
    /// The grid `G_r` on `S^n` for `0 < r < 1`.
    pub fn new(n: usize, r: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("grid needs sphere dimension n >= 1".into()));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Precondition(format!("grid radius must satisfy 0 < r < 1, got {r}")));
        }
        Ok(GridSpec { n, r, m: ceil_sqrt_n_over_r(n, r) })
    }

    /// The cube shell of a given level `M` directly.
    pub fn with_level(n: usize, m: u64) -> Self {
        assert!(n >= 1 && m >= 1, "grid needs n >= 1 and M >= 1");
        GridSpec { n, r: (n as f64).sqrt() / m as f64, m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn level(&self) -> u64 {
        self.m
    }

    /// Number of coordinates of each point, `n + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.n + 1
    }

    /// `(2M+1)^{n+1} - (2M-1)^{n+1}`.
    pub fn count(&self) -> BigUint {
        let e = (self.n + 1) as u32;
        let outer = BigUint::from(2 * self.m + 1).pow(e);
        let inner = BigUint::from(2 * self.m - 1).pow(e);
        outer - inner
    }

    pub(crate) fn count_u128(&self) -> u128 {
        self.count().to_u128().unwrap_or(u128::MAX)
    }

    /// Independent sub-streams in canonical order.
    pub fn chunks(&self) -> Vec<GridChunk> {
        let m = self.m as i64;
        let dim = self.ambient_dim();
        let mut out = Vec::new();
        for axis in 0..dim {
            for sign in [-1i64, 1] {
                let lead = if axis == 0 { 1 } else { 0 };
                let (lo, hi) = bounds(lead, axis, m);
                for value in lo..=hi {
                    out.push(GridChunk { dim, m, axis, sign, lead, lead_value: value });
                }
            }
        }
        out
    }

    /// Integer shell points in canonical order.
    pub fn lattice_points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        self.chunks().into_iter().flat_map(|c| c.lattice_points())
    }

    /// Unit vectors of `G_r` in canonical order.
    pub fn stream(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.lattice_points().map(|p| project(&p))
    }

    /// Whether `x` is (up to rounding) the projection of a shell point.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.ambient_dim() {
            return false;
        }
        let max = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if max == 0.0 {
            return false;
        }
        let scale = self.m as f64 / max;
        let y: Vec<i64> = x.iter().map(|v| (v * scale).round() as i64).collect();
        let on_lattice = x.iter().zip(&y).all(|(v, &c)| (v * scale - c as f64).abs() < 1e-6);
        on_lattice && linalg::euclidean_distance(&project(&y), x) < 1e-12
    }
}

/// Range of the free coordinate `j` on the face of `axis`: coordinates
/// before the owning axis stay strictly inside.
fn bounds(j: usize, axis: usize, m: i64) -> (i64, i64) {
    if j < axis {
        (-m + 1, m - 1)
    } else {
        (-m, m)
    }
}

fn project(p: &[i64]) -> Vec<f64> {
    let v: Vec<f64> = p.iter().map(|&c| c as f64).collect();
    linalg::normalized(&v)
}

/// The points of one face of the shell with a fixed first free coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridChunk {
    dim: usize,
    m: i64,
    axis: usize,
    sign: i64,
    lead: usize,
    lead_value: i64,
}

impl GridChunk {
    pub fn lattice_points(&self) -> ChunkIter {
        let mut cur = vec![0i64; self.dim];
        let mut free = Vec::new();
        for j in 0..self.dim {
            if j == self.axis {
                cur[j] = self.sign * self.m;
            } else if j == self.lead {
                cur[j] = self.lead_value;
            } else {
                let (lo, hi) = bounds(j, self.axis, self.m);
                cur[j] = lo;
                free.push((j, lo, hi));
            }
        }
        ChunkIter { cur, free, done: false }
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> {
        self.lattice_points().map(|p| project(&p))
    }

    pub fn len(&self) -> u128 {
        (0..self.dim)
            .filter(|&j| j != self.axis && j != self.lead)
            .map(|j| {
                let (lo, hi) = bounds(j, self.axis, self.m);
                (hi - lo + 1) as u128
            })
            .product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Lexicographic odometer over the free coordinates of a chunk.
pub struct ChunkIter {
    cur: Vec<i64>,
    free: Vec<(usize, i64, i64)>,
    done: bool,
}

impl Iterator for ChunkIter {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        // advance, last free coordinate fastest
        let mut advanced = false;
        for &(j, lo, hi) in self.free.iter().rev() {
            if self.cur[j] < hi {
                self.cur[j] += 1;
                advanced = true;
                break;
            }
            self.cur[j] = lo;
        }
        if !advanced {
            self.done = true;
        }
        Some(out)
    }
}

/// Monte Carlo estimate of `max_{y ∈ S^n} min_{x ∈ G_r} d_S(x, y)` from
/// `samples` uniform points. Diagnostic only.
pub fn covering_radius_estimate(spec: &GridSpec, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.ambient_dim();
    let queries: Vec<Vec<f64>> = (0..samples).map(|_| linalg::random_unit_vector(dim, &mut rng)).collect();
    let grid: Vec<Vec<f64>> = spec.stream().collect();
    queries
        .par_iter()
        .map(|y| {
            let best = grid.iter().map(|x| linalg::dot(x, y)).fold(f64::NEG_INFINITY, f64::max);
            2.0 * ((2.0 - 2.0 * best.min(1.0)).max(0.0).sqrt() / 2.0).min(1.0).asin()
        })
        .reduce(|| 0.0, f64::max)
}

/// Exact point count by brute force over the cube `[-M, M]^{n+1}`, for tests.
#[doc(hidden)]
pub fn brute_force_count(n: usize, m: u64) -> u64 {
    let m = m as i64;
    let dim = n + 1;
    let side = (2 * m + 1) as u64;
    let total = side.pow(dim as u32);
    let mut count = 0;
    for idx in 0..total {
        let mut rest = idx;
        let mut max = 0;
        for _ in 0..dim {
            let c = (rest % side) as i64 - m;
            rest /= side;
            max = max.max(c.abs());
        }
        if max == m {
            count += 1;
        }
    }
    count
}
