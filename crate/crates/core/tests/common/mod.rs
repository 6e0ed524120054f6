#![allow(dead_code)]

use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand_distr::StandardNormal;

use sah_core::linalg;
use sah_core::nerve::SimplicialComplex;
use sah_core::pipeline::parse_system;
use sah_core::polysys::{multinomial, AffineSystem, HomoPoly, Polynomial};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> AffineSystem {
    parse_system(fixture_path(name)).expect("fixture parses")
}

/// All exponent vectors of total degree `d` in `k` variables.
pub fn monomials(k: usize, d: u32) -> Vec<Vec<u32>> {
    if k == 1 {
        return vec![vec![d]];
    }
    let mut out = Vec::new();
    for first in (0..=d).rev() {
        for mut rest in monomials(k - 1, d - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// A Kostlan random form: coefficient of `X^a` is normal with variance
/// `d! / a!`.
pub fn random_form<R: Rng>(num_vars: usize, degree: u32, rng: &mut R) -> HomoPoly {
    let terms = monomials(num_vars, degree)
        .into_iter()
        .map(|a| {
            let z: f64 = rng.sample(StandardNormal);
            let w = multinomial(&a).sqrt();
            (a, z * w)
        })
        .collect::<Vec<_>>();
    HomoPoly::from_terms(num_vars, degree, terms).unwrap()
}

/// `h - h(x) <x, X>^d`, which vanishes at the unit vector `x`.
pub fn force_zero(h: &HomoPoly, x: &[f64]) -> HomoPoly {
    let k = x.len();
    let lin = Polynomial::from_terms(
        k,
        (0..k).map(|i| {
            let mut a = vec![0; k];
            a[i] = 1;
            (a, x[i])
        }),
    )
    .unwrap();
    let mut pow = Polynomial::constant(k, 1.0);
    for _ in 0..h.degree() {
        pow = pow.mul(&lin);
    }
    let shift = HomoPoly::new(h.degree(), pow.scale(h.eval(x))).unwrap();
    h.sub(&shift).unwrap()
}

fn det_bareiss(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a = m.to_vec();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(k, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Invariant factors from determinantal divisors: `d_k` is the gcd of all
/// `k × k` minors and the factors are `d_k / d_{k-1}`.
pub fn snf_by_minors(rows: &[Vec<i64>]) -> Vec<BigInt> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    let mut divisors = vec![BigInt::from(1)];
    for k in 1..=m.min(n) {
        let mut g = BigInt::zero();
        for rs in subsets(m, k) {
            for cs in subsets(n, k) {
                let minor: Vec<Vec<i128>> = rs.iter().map(|&i| cs.iter().map(|&j| rows[i][j] as i128).collect()).collect();
                g = g.gcd(&BigInt::from(det_bareiss(&minor)));
            }
        }
        if g.is_zero() {
            break;
        }
        divisors.push(g);
    }
    divisors.windows(2).map(|w| (&w[1] / &w[0]).abs()).collect()
}

/// Bounding ball of a support set by least squares in its affine hull.
fn support_ball(support: &[&Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    let p0 = support[0];
    let dim = p0.len();
    if support.len() == 1 {
        return Some((p0.clone(), 0.0));
    }
    let k = support.len() - 1;
    let a = DMatrix::from_fn(k, dim, |i, j| 2.0 * (support[i + 1][j] - p0[j]));
    let b = DVector::from_fn(k, |i, _| {
        support[i + 1].iter().map(|v| v * v).sum::<f64>() - p0.iter().map(|v| v * v).sum::<f64>()
    });
    // minimal-norm solution of A c = b relative to p0
    let shifted = &b - &a * DVector::from_column_slice(p0);
    let svd = a.clone().svd(true, true);
    if svd.singular_values.iter().any(|&s| s < 1e-9) {
        return None;
    }
    let delta = svd.solve(&shifted, 1e-12).ok()?;
    let c: Vec<f64> = (0..dim).map(|j| p0[j] + delta[j]).collect();
    let r = linalg::euclidean_distance(&c, p0);
    Some((c, r))
}

/// MEB radius by enumerating every support set of at most `dim + 1` points.
pub fn meb_by_enumeration(points: &[Vec<f64>]) -> f64 {
    let dim = points[0].len();
    let mut best = f64::INFINITY;
    for k in 1..=(dim + 1).min(points.len()) {
        for s in subsets(points.len(), k) {
            let support: Vec<&Vec<f64>> = s.iter().map(|&i| &points[i]).collect();
            if let Some((c, r)) = support_ball(&support) {
                let covers = points.iter().all(|p| linalg::euclidean_distance(&c, p) <= r * (1.0 + 1e-9) + 1e-12);
                if covers && r < best {
                    best = r;
                }
            }
        }
    }
    best
}

fn polar_angle(x: &[f64]) -> f64 {
    x[0].clamp(-1.0, 1.0).acos()
}

/// Geodesic distance on `S^2` from `x` to the band of polar angles `[lo, hi]`
/// around `e0`.
pub fn distance_to_band(x: &[f64], lo: f64, hi: f64) -> f64 {
    let t = polar_angle(x);
    (lo - t).max(t - hi).max(0.0)
}

/// Homogenized fixture sets on `S^2` as polar-angle bands.
pub fn fixture_band(name: &str) -> Option<(f64, f64)> {
    match name {
        "circle" => Some((FRAC_PI_4, FRAC_PI_4)),
        "disk" | "disk_strict" => Some((0.0, FRAC_PI_4)),
        "annulus" => Some((FRAC_PI_4, 2f64.atan())),
        _ => None,
    }
}

/// Random points of a polar band.
pub fn sample_band<R: Rng>(lo: f64, hi: f64, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let t = rng.random_range(lo..=hi);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            vec![t.cos(), t.sin() * phi.cos(), t.sin() * phi.sin()]
        })
        .collect()
}

/// The two homogenized zeros of `x² - 1`.
pub fn two_points() -> [[f64; 2]; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[h, h], [h, -h]]
}

/// Clique complex of a random graph, truncated at dimension 3.
pub fn random_flag_complex<R: Rng>(rng: &mut R) -> SimplicialComplex {
    let n = rng.random_range(4..=9);
    let p = rng.random_range(0.3..0.8);
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let e = rng.random_bool(p);
            adj[i][j] = e;
            adj[j][i] = e;
        }
    }
    let mut facets = Vec::new();
    for mask in 1u32..(1 << n) {
        let s: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if s.len() <= 4 && s.iter().all(|&a| s.iter().all(|&b| a == b || adj[a][b])) {
            facets.push(s);
        }
    }
    SimplicialComplex::from_facets(n, &facets).unwrap()
}
