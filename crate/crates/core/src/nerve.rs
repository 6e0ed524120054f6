//! Simplicial complexes and the Čech nerve of a union of equal balls.
//!
//! Open balls `B(x_i, ε)` share a point iff the minimum enclosing ball of
//! their centers has radius `< ε`, so the nerve is decided by MEB radii.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::euclidean_distance;

/// A closed Euclidean ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    fn contains(&self, p: &[f64]) -> bool {
        self.radius >= 0.0 && euclidean_distance(&self.center, p) <= self.radius * (1.0 + 1e-12) + 1e-15
    }
}

/// Smallest ball with every point of `support` on its boundary, centered in
/// their affine hull.
fn circumball(support: &[&[f64]]) -> Option<Ball> {
    let (first, rest) = support.split_first()?;
    if rest.is_empty() {
        return Some(Ball { center: first.to_vec(), radius: 0.0 });
    }
    let dim = first.len();
    let k = rest.len();
    let v = DMatrix::from_fn(k, dim, |i, j| rest[i][j] - first[j]);
    let gram = &v * v.transpose();
    let rhs = DVector::from_fn(k, |i, _| 0.5 * v.row(i).norm_squared());
    let lambda = gram.clone().lu().solve(&rhs).or_else(|| gram.svd(true, true).solve(&rhs, 1e-14).ok())?;
    let offset = v.transpose() * lambda;
    let center: Vec<f64> = (0..dim).map(|j| first[j] + offset[j]).collect();
    let radius = support.iter().map(|p| euclidean_distance(&center, p)).fold(0.0, f64::max);
    Some(Ball { center, radius })
}

fn welzl<'a>(points: &[&'a [f64]], boundary: &mut Vec<&'a [f64]>, dim: usize) -> Ball {
    if points.is_empty() || boundary.len() == dim + 1 {
        return circumball(boundary).unwrap_or(Ball { center: vec![0.0; dim], radius: -1.0 });
    }
    let (last, rest) = points.split_last().unwrap();
    let ball = welzl(rest, boundary, dim);
    if ball.contains(last) {
        return ball;
    }
    boundary.push(last);
    let ball = welzl(rest, boundary, dim);
    boundary.pop();
    ball
}

/// Minimum enclosing ball by Welzl's algorithm with a seeded shuffle.
pub fn min_enclosing_ball_seeded(points: &[&[f64]], seed: u64) -> Result<Ball> {
    let first = points.first().ok_or(Error::EmptyPointSet)?;
    let dim = first.len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Arity { expected: dim, got: points.iter().find(|p| p.len() != dim).unwrap().len() });
    }
    let mut order = points.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(welzl(&order, &mut Vec::with_capacity(dim + 1), dim))
}

pub fn min_enclosing_ball(points: &[Vec<f64>]) -> Result<Ball> {
    let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    min_enclosing_ball_seeded(&refs, tuple_seed(&(0..points.len()).collect::<Vec<_>>()))
}

/// Deterministic seed for the MEB of a vertex tuple.
fn tuple_seed(tuple: &[usize]) -> u64 {
    tuple.iter().fold(0x9e37_79b9_7f4a_7c15u64, |h, &v| {
        let mut z = h ^ (v as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    })
}

/// A finite abstract simplicial complex on vertices `0..num_vertices`.
/// `simplices[k]` holds the `k`-simplices as strictly increasing tuples in
/// lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplicialComplex {
    num_vertices: usize,
    simplices: Vec<Vec<Vec<usize>>>,
}

impl SimplicialComplex {
    /// Only the vertices.
    pub fn discrete(num_vertices: usize) -> Self {
        let simplices = if num_vertices == 0 { Vec::new() } else { vec![(0..num_vertices).map(|v| vec![v]).collect()] };
        SimplicialComplex { num_vertices, simplices }
    }

    /// The closure of a list of simplices given in any order.
    pub fn from_facets(num_vertices: usize, facets: &[Vec<usize>]) -> Result<Self> {
        let mut by_dim: Vec<std::collections::BTreeSet<Vec<usize>>> = Vec::new();
        by_dim.push((0..num_vertices).map(|v| vec![v]).collect());
        for f in facets {
            let mut s = f.clone();
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                continue;
            }
            if *s.last().unwrap() >= num_vertices {
                return Err(Error::Precondition(format!("vertex out of range in facet {f:?}")));
            }
            // all nonempty subsets
            let k = s.len();
            for mask in 1u64..(1u64 << k) {
                let face: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect();
                let d = face.len() - 1;
                while by_dim.len() <= d {
                    by_dim.push(Default::default());
                }
                by_dim[d].insert(face);
            }
        }
        let simplices = by_dim.into_iter().map(|set| set.into_iter().collect::<Vec<_>>()).filter(|v| !v.is_empty()).collect();
        Ok(SimplicialComplex { num_vertices, simplices })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Top dimension, `None` for the empty complex.
    pub fn dim(&self) -> Option<usize> {
        self.simplices.len().checked_sub(1)
    }

    pub fn simplices(&self, k: usize) -> &[Vec<usize>] {
        self.simplices.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices(k).len()
    }

    /// Simplex counts by dimension.
    pub fn counts(&self) -> Vec<usize> {
        self.simplices.iter().map(Vec::len).collect()
    }

    pub fn index_of(&self, simplex: &[usize]) -> Option<usize> {
        let k = simplex.len().checked_sub(1)?;
        self.simplices(k).binary_search_by(|s| s.as_slice().cmp(simplex)).ok()
    }

    pub fn contains(&self, simplex: &[usize]) -> bool {
        self.index_of(simplex).is_some()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices.iter().enumerate().map(|(k, s)| if k % 2 == 0 { s.len() as i64 } else { -(s.len() as i64) }).sum()
    }

    /// Sorted, duplicate free and closed under faces.
    pub fn is_valid(&self) -> bool {
        for (k, level) in self.simplices.iter().enumerate() {
            for (i, s) in level.iter().enumerate() {
                if s.len() != k + 1 || s.windows(2).any(|w| w[0] >= w[1]) || s.iter().any(|&v| v >= self.num_vertices) {
                    return false;
                }
                if i > 0 && level[i - 1] >= *s {
                    return false;
                }
                if k > 0 && !faces(s).all(|f| self.contains(&f)) {
                    return false;
                }
            }
        }
        true
    }

    /// Whether every simplex of `self` is a simplex of `other`.
    pub fn is_subcomplex_of(&self, other: &SimplicialComplex) -> bool {
        self.simplices.iter().flatten().all(|s| other.contains(s))
    }
}

/// The codimension-one faces of a simplex, dropping vertex `i` for `i = 0, 1, ...`.
pub fn faces(s: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..s.len()).map(move |i| s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect())
}

/// Tie handling for the open-ball test.
#[derive(Clone, Debug, PartialEq)]
pub struct NerveOptions {
    /// Relative width of the band around `ε` treated as a tie.
    pub slack: f64,
    /// Mixed into the per-simplex shuffle seeds of the MEB computation.
    pub seed: u64,
}

impl Default for NerveOptions {
    fn default() -> Self {
        NerveOptions { slack: 1e-9, seed: 0 }
    }
}

/// A nerve with the number of MEB radii that fell within the slack band.
#[derive(Clone, Debug)]
pub struct Nerve {
    pub complex: SimplicialComplex,
    pub ambiguous: usize,
}

#[derive(Clone, Copy)]
enum Verdict {
    In,
    Out,
    Tie,
}

fn decide(radius: f64, epsilon: f64, slack: f64) -> Verdict {
    let band = slack * epsilon;
    if radius < epsilon - band {
        Verdict::In
    } else if radius <= epsilon + band {
        Verdict::Tie
    } else {
        Verdict::Out
    }
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Čech nerve of `{B(x, ε) : x ∈ points}` with simplices up to `max_dim`.
pub fn cech_nerve(points: &[Vec<f64>], epsilon: f64, max_dim: usize) -> SimplicialComplex {
    cech_nerve_with(points, epsilon, max_dim, &NerveOptions::default()).expect("valid nerve input").complex
}

pub fn cech_nerve_with(points: &[Vec<f64>], epsilon: f64, max_dim: usize, opts: &NerveOptions) -> Result<Nerve> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = points.len();
    if let Some(p) = points.first() {
        if let Some(q) = points.iter().find(|q| q.len() != p.len()) {
            return Err(Error::Arity { expected: p.len(), got: q.len() });
        }
    }
    let mut complex = SimplicialComplex::discrete(n);
    let mut ambiguous = 0;
    if n == 0 || max_dim == 0 {
        return Ok(Nerve { complex, ambiguous });
    }

    // edges by a sweep along the first coordinate
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    let reach = 2.0 * epsilon * (1.0 + opts.slack);
    let found: Vec<(Vec<(usize, usize)>, usize)> = (0..n)
        .into_par_iter()
        .map(|pos| {
            let a = order[pos];
            let mut edges = Vec::new();
            let mut ties = 0;
            for &b in &order[pos + 1..] {
                if points[b][0] - points[a][0] > reach {
                    break;
                }
                match decide(0.5 * euclidean_distance(&points[a], &points[b]), epsilon, opts.slack) {
                    Verdict::In => edges.push((a.min(b), a.max(b))),
                    Verdict::Tie => ties += 1,
                    Verdict::Out => {}
                }
            }
            (edges, ties)
        })
        .collect();
    let mut up: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (edges, ties) in found {
        ambiguous += ties;
        for (a, b) in edges {
            up[a].push(b);
        }
    }
    for list in &mut up {
        list.sort_unstable();
    }
    let edges: Vec<Vec<usize>> = (0..n).flat_map(|a| up[a].iter().map(move |&b| vec![a, b])).collect();
    complex.simplices.push(edges);

    // higher simplices by extending cliques with later common neighbors
    for k in 2..=max_dim {
        let prev = &complex.simplices[k - 1];
        if prev.is_empty() {
            break;
        }
        let level: Vec<(Vec<Vec<usize>>, usize)> = prev
            .par_iter()
            .map(|sigma| {
                let mut cands = up[sigma[0]].clone();
                for &v in &sigma[1..] {
                    cands = intersect_sorted(&cands, &up[v]);
                }
                let mut out = Vec::new();
                let mut ties = 0;
                for v in cands {
                    let mut tau = sigma.clone();
                    tau.push(v);
                    let closed = faces(&tau)
                        .take(k)
                        .all(|f| prev.binary_search(&f).is_ok());
                    if !closed {
                        continue;
                    }
                    let pts: Vec<&[f64]> = tau.iter().map(|&i| points[i].as_slice()).collect();
                    let ball = min_enclosing_ball_seeded(&pts, tuple_seed(&tau) ^ opts.seed).expect("nonempty");
                    match decide(ball.radius, epsilon, opts.slack) {
                        Verdict::In => out.push(tau),
                        Verdict::Tie => ties += 1,
                        Verdict::Out => {}
                    }
                }
                (out, ties)
            })
            .collect();
        let mut next = Vec::new();
        for (mut out, ties) in level {
            ambiguous += ties;
            next.append(&mut out);
        }
        if next.is_empty() {
            break;
        }
        complex.simplices.push(next);
    }
    while complex.simplices.last().is_some_and(Vec::is_empty) {
        complex.simplices.pop();
    }
    Ok(Nerve { complex, ambiguous })
}
