//! Sparse real polynomials, homogeneous systems and the Weyl metric.
//!
//! A [`HomoSystem`] is a pair `(F, G)` of homogeneous polynomials in the
//! variables `X_0..X_n`: the equalities `f_i = 0` and the inequalities
//! `g_j >= 0`, solved on the unit sphere `S^n`. An [`AffineSystem`] lives in
//! `R^n` and is reduced to the spherical case by [`homogenize`] and
//! [`scaled_homogenization`], with `X_0` as the homogenizing variable.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Exponent vector of a monomial.
pub type Exponent = Vec<u32>;

/// Multinomial coefficient `|a|! / (a_0! ... a_n!)`.
pub fn multinomial(a: &[u32]) -> f64 {
    let mut acc = 1.0_f64;
    let mut total = 0u32;
    for &ai in a {
        for j in 1..=ai {
            total += 1;
            acc = acc * total as f64 / j as f64;
        }
    }
    acc
}

/// Binomial coefficient as an integer.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn monomial_value(a: &[u32], x: &[f64]) -> f64 {
    a.iter().zip(x).fold(1.0, |acc, (&e, &xi)| if e == 0 { acc } else { acc * xi.powi(e as i32) })
}

/// A sparse polynomial in a fixed number of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    num_vars: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Polynomial {
    pub fn zero(num_vars: usize) -> Self {
        Polynomial { num_vars, terms: BTreeMap::new() }
    }

    /// Builds a polynomial from `(exponent, coefficient)` pairs. Repeated
    /// exponents are summed and zero coefficients dropped.
    pub fn from_terms<I>(num_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, f64)>,
    {
        let mut p = Polynomial::zero(num_vars);
        for (a, c) in terms {
            if a.len() != num_vars {
                return Err(Error::Arity { expected: num_vars, got: a.len() });
            }
            p.add_term(a, c);
        }
        Ok(p)
    }

    pub fn constant(num_vars: usize, c: f64) -> Self {
        let mut p = Polynomial::zero(num_vars);
        p.add_term(vec![0; num_vars], c);
        p
    }

    /// The coordinate function `X_i`.
    pub fn variable(num_vars: usize, i: usize) -> Self {
        let mut a = vec![0; num_vars];
        a[i] = 1;
        let mut p = Polynomial::zero(num_vars);
        p.add_term(a, 1.0);
        p
    }

    pub(crate) fn add_term(&mut self, a: Exponent, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(a) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> + '_ {
        self.terms.iter().map(|(a, c)| (a, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, a: &[u32]) -> f64 {
        self.terms.get(a).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; zero for the zero polynomial.
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|a| a.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.num_vars);
        self.terms.iter().map(|(a, c)| c * monomial_value(a, x)).sum()
    }

    /// Gradient evaluated at `x`.
    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_vars];
        for (a, c) in &self.terms {
            for j in 0..self.num_vars {
                if a[j] == 0 {
                    continue;
                }
                let mut v = c * a[j] as f64;
                for (i, (&e, &xi)) in a.iter().zip(x).enumerate() {
                    let e = if i == j { e - 1 } else { e };
                    if e > 0 {
                        v *= xi.powi(e as i32);
                    }
                }
                g[j] += v;
            }
        }
        g
    }

    /// The partial derivative `∂/∂X_j`.
    pub fn partial(&self, j: usize) -> Polynomial {
        let mut p = Polynomial::zero(self.num_vars);
        for (a, c) in &self.terms {
            if a[j] > 0 {
                let mut b = a.clone();
                b[j] -= 1;
                p.add_term(b, c * a[j] as f64);
            }
        }
        p
    }

    /// Coefficients `c_0..c_deg` of the univariate polynomial `t ↦ f(x + t u)`.
    pub fn line_coefficients(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let deg = self.total_degree() as usize;
        let mut out = vec![0.0; deg + 1];
        let mut acc = Vec::with_capacity(deg + 1);
        let mut factor = Vec::with_capacity(deg + 1);
        for (a, c) in &self.terms {
            acc.clear();
            acc.push(*c);
            for (j, &e) in a.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                // (x_j + t u_j)^e
                factor.clear();
                for k in 0..=e {
                    let b = binomial(e as u64, k as u64) as f64;
                    factor.push(b * x[j].powi((e - k) as i32) * u[j].powi(k as i32));
                }
                let mut next = vec![0.0; acc.len() + factor.len() - 1];
                for (p, av) in acc.iter().enumerate() {
                    for (q, fv) in factor.iter().enumerate() {
                        next[p + q] += av * fv;
                    }
                }
                acc = next;
            }
            for (k, v) in acc.iter().enumerate() {
                out[k] += v;
            }
        }
        out
    }

    /// The `k`-th derivative at `x` applied to `(u, ..., u)`.
    pub fn directional_derivative(&self, x: &[f64], u: &[f64], k: usize) -> f64 {
        let coeffs = self.line_coefficients(x, u);
        match coeffs.get(k) {
            Some(c) => c * factorial(k),
            None => 0.0,
        }
    }

    pub fn scale(&self, lambda: f64) -> Polynomial {
        let mut p = Polynomial::zero(self.num_vars);
        for (a, c) in &self.terms {
            p.add_term(a.clone(), c * lambda);
        }
        p
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (a, c) in &other.terms {
            p.add_term(a.clone(), *c);
        }
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut p = Polynomial::zero(self.num_vars);
        for (a, c) in &self.terms {
            for (b, d) in &other.terms {
                let e: Exponent = a.iter().zip(b).map(|(x, y)| x + y).collect();
                p.add_term(e, c * d);
            }
        }
        p
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Degrees of the components of a system, equalities first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreePattern {
    degrees: Vec<u32>,
    q: usize,
}

impl DegreePattern {
    pub fn new(degrees: Vec<u32>, q: usize) -> Result<Self> {
        if q > degrees.len() {
            return Err(Error::Precondition(format!(
                "pattern with {} degrees cannot have {q} equalities",
                degrees.len()
            )));
        }
        if let Some(&d) = degrees.iter().find(|&&d| d == 0) {
            return Err(Error::Degree { expected: 1, got: d });
        }
        Ok(DegreePattern { degrees, q })
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn s(&self) -> usize {
        self.degrees.len() - self.q
    }

    /// The largest degree `D`, or 1 for the empty pattern.
    pub fn max_degree(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(1)
    }

    /// The pattern with one extra inequality of degree 1 appended.
    pub fn with_linear_appended(&self) -> DegreePattern {
        let mut degrees = self.degrees.clone();
        degrees.push(1);
        DegreePattern { degrees, q: self.q }
    }
}

/// A homogeneous polynomial of a fixed degree in `X_0..X_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomoPoly {
    degree: u32,
    poly: Polynomial,
}

impl HomoPoly {
    pub fn new(degree: u32, poly: Polynomial) -> Result<Self> {
        if let Some(a) = poly.terms.keys().find(|a| a.iter().sum::<u32>() != degree) {
            return Err(Error::NotHomogeneous { expected: degree, got: a.iter().sum() });
        }
        Ok(HomoPoly { degree, poly })
    }

    pub fn from_terms<I>(num_vars: usize, degree: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, f64)>,
    {
        HomoPoly::new(degree, Polynomial::from_terms(num_vars, terms)?)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn num_vars(&self) -> usize {
        self.poly.num_vars
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.poly.eval(x)
    }

    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        self.poly.gradient_at(x)
    }

    pub fn scale(&self, lambda: f64) -> HomoPoly {
        HomoPoly { degree: self.degree, poly: self.poly.scale(lambda) }
    }

    pub fn sub(&self, other: &HomoPoly) -> Result<HomoPoly> {
        check_compatible(self, other)?;
        Ok(HomoPoly { degree: self.degree, poly: self.poly.add(&other.poly.scale(-1.0)) })
    }

    /// Weyl norm `sqrt(<h, h>)`.
    pub fn weyl_norm(&self) -> f64 {
        self.poly.terms.iter().map(|(a, c)| c * c / multinomial(a)).sum::<f64>().sqrt()
    }

    /// Sets `X_0 = 1`.
    pub fn dehomogenize(&self) -> Polynomial {
        let n = self.num_vars() - 1;
        let mut p = Polynomial::zero(n);
        for (a, c) in &self.poly.terms {
            p.add_term(a[1..].to_vec(), *c);
        }
        p
    }
}

fn check_compatible(h: &HomoPoly, h2: &HomoPoly) -> Result<()> {
    if h.num_vars() != h2.num_vars() {
        return Err(Error::Arity { expected: h.num_vars(), got: h2.num_vars() });
    }
    if h.degree != h2.degree {
        return Err(Error::Degree { expected: h.degree, got: h2.degree });
    }
    Ok(())
}

/// Weyl inner product `Σ_a binom(d, a)^{-1} h_a h'_a`.
pub fn weyl_inner(h: &HomoPoly, h2: &HomoPoly) -> Result<f64> {
    check_compatible(h, h2)?;
    Ok(h.poly
        .terms
        .iter()
        .filter_map(|(a, c)| h2.poly.terms.get(a).map(|c2| c * c2 / multinomial(a)))
        .sum())
}

/// Weyl norm of a list of homogeneous polynomials.
pub fn weyl_norm(polys: &[HomoPoly]) -> f64 {
    polys.iter().map(|h| h.weyl_norm().powi(2)).sum::<f64>().sqrt()
}

/// Jacobian of `polys` at `x`, one row per polynomial.
pub fn jacobian(polys: &[HomoPoly], x: &[f64]) -> DMatrix<f64> {
    let cols = x.len();
    let mut m = DMatrix::zeros(polys.len(), cols);
    for (i, p) in polys.iter().enumerate() {
        for (j, g) in p.gradient_at(x).into_iter().enumerate() {
            m[(i, j)] = g;
        }
    }
    m
}

/// Substitutes `X ↦ u X`, i.e. returns `h ∘ u`, by full symbolic expansion.
pub fn compose_rotation(h: &HomoPoly, u: &DMatrix<f64>) -> Result<HomoPoly> {
    let dim = h.num_vars();
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::Arity { expected: dim, got: u.nrows() });
    }
    let deviation = (u.transpose() * u - DMatrix::identity(dim, dim)).amax();
    if deviation > 1e-10 {
        return Err(Error::NotOrthogonal(deviation));
    }
    let rows: Vec<Polynomial> = (0..dim)
        .map(|i| {
            Polynomial::from_terms(
                dim,
                (0..dim).map(|j| {
                    let mut a = vec![0; dim];
                    a[j] = 1;
                    (a, u[(i, j)])
                }),
            )
            .unwrap()
        })
        .collect();
    // powers[i][k] = (row_i . X)^k
    let d = h.degree as usize;
    let powers: Vec<Vec<Polynomial>> = rows
        .iter()
        .map(|row| {
            let mut pw = vec![Polynomial::constant(dim, 1.0)];
            for k in 1..=d {
                let next = pw[k - 1].mul(row);
                pw.push(next);
            }
            pw
        })
        .collect();
    let mut out = Polynomial::zero(dim);
    for (a, c) in &h.poly.terms {
        let mut term = Polynomial::constant(dim, *c);
        for (i, &e) in a.iter().enumerate() {
            if e > 0 {
                term = term.mul(&powers[i][e as usize]);
            }
        }
        out = out.add(&term);
    }
    HomoPoly::new(h.degree, out)
}

/// A homogeneous semialgebraic system `f_i = 0, g_j >= 0` on `S^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomoSystem {
    equalities: Vec<HomoPoly>,
    inequalities: Vec<HomoPoly>,
    pattern: DegreePattern,
    num_vars: usize,
}

impl HomoSystem {
    pub fn new(num_vars: usize, equalities: Vec<HomoPoly>, inequalities: Vec<HomoPoly>) -> Result<Self> {
        if num_vars < 2 {
            return Err(Error::Precondition("need at least two homogeneous variables".into()));
        }
        for h in equalities.iter().chain(&inequalities) {
            if h.num_vars() != num_vars {
                return Err(Error::Arity { expected: num_vars, got: h.num_vars() });
            }
        }
        let degrees = equalities.iter().chain(&inequalities).map(|h| h.degree).collect();
        let pattern = DegreePattern::new(degrees, equalities.len())?;
        Ok(HomoSystem { equalities, inequalities, pattern, num_vars })
    }

    pub fn equalities(&self) -> &[HomoPoly] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[HomoPoly] {
        &self.inequalities
    }

    /// All components, equalities first.
    pub fn components(&self) -> impl Iterator<Item = &HomoPoly> + '_ {
        self.equalities.iter().chain(&self.inequalities)
    }

    pub fn pattern(&self) -> &DegreePattern {
        &self.pattern
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Dimension `n` of the sphere `S^n` the system is solved on.
    pub fn sphere_dim(&self) -> usize {
        self.num_vars - 1
    }

    pub fn max_degree(&self) -> u32 {
        self.pattern.max_degree()
    }

    pub fn weyl_norm(&self) -> f64 {
        self.components().map(|h| h.weyl_norm().powi(2)).sum::<f64>().sqrt()
    }

    /// Values of all components at `x`, equalities first.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_vars {
            return Err(Error::Arity { expected: self.num_vars, got: x.len() });
        }
        Ok(self.components().map(|h| h.eval(x)).collect())
    }

    pub fn compose_rotation(&self, u: &DMatrix<f64>) -> Result<HomoSystem> {
        let eq = self.equalities.iter().map(|h| compose_rotation(h, u)).collect::<Result<_>>()?;
        let ineq = self.inequalities.iter().map(|h| compose_rotation(h, u)).collect::<Result<_>>()?;
        HomoSystem::new(self.num_vars, eq, ineq)
    }

    pub fn scale(&self, lambda: f64) -> HomoSystem {
        HomoSystem {
            equalities: self.equalities.iter().map(|h| h.scale(lambda)).collect(),
            inequalities: self.inequalities.iter().map(|h| h.scale(lambda)).collect(),
            pattern: self.pattern.clone(),
            num_vars: self.num_vars,
        }
    }
}

/// A basic semialgebraic system in `R^n`:
/// `f_i = 0`, and `g_j >= 0` or `g_j > 0` according to `strict[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSystem {
    n: usize,
    equalities: Vec<Polynomial>,
    inequalities: Vec<Polynomial>,
    strict: Vec<bool>,
    pattern: DegreePattern,
}

impl AffineSystem {
    pub fn new(
        n: usize,
        equalities: Vec<Polynomial>,
        inequalities: Vec<Polynomial>,
        strict: Vec<bool>,
        pattern: DegreePattern,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("ambient dimension must be at least 1".into()));
        }
        if equalities.len() > n {
            return Err(Error::Precondition(format!(
                "the algorithm requires q <= n equalities (q = {}, n = {n})",
                equalities.len()
            )));
        }
        if strict.len() != inequalities.len() {
            return Err(Error::Precondition("one strictness flag per inequality is required".into()));
        }
        if pattern.q() != equalities.len() || pattern.s() != inequalities.len() {
            return Err(Error::Precondition("degree pattern does not match the system shape".into()));
        }
        for (p, &d) in equalities.iter().chain(&inequalities).zip(pattern.degrees()) {
            if p.num_vars() != n {
                return Err(Error::Arity { expected: n, got: p.num_vars() });
            }
            if p.total_degree() > d {
                return Err(Error::Degree { expected: d, got: p.total_degree() });
            }
        }
        Ok(AffineSystem { n, equalities, inequalities, strict, pattern })
    }

    /// Uses each component's total degree (at least 1) as its pattern degree;
    /// all inequalities are closed.
    pub fn with_natural_degrees(n: usize, equalities: Vec<Polynomial>, inequalities: Vec<Polynomial>) -> Result<Self> {
        let degrees = equalities.iter().chain(&inequalities).map(|p| p.total_degree().max(1)).collect();
        let pattern = DegreePattern::new(degrees, equalities.len())?;
        let strict = vec![false; inequalities.len()];
        AffineSystem::new(n, equalities, inequalities, strict, pattern)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn equalities(&self) -> &[Polynomial] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[Polynomial] {
        &self.inequalities
    }

    pub fn strict(&self) -> &[bool] {
        &self.strict
    }

    pub fn pattern(&self) -> &DegreePattern {
        &self.pattern
    }

    pub fn is_zero(&self) -> bool {
        self.equalities.iter().chain(&self.inequalities).all(Polynomial::is_zero)
    }

    /// `N = Σ binom(n + d_i, n)`, the number of coefficients of the pattern.
    pub fn size(&self) -> u128 {
        self.pattern.degrees().iter().map(|&d| binomial(self.n as u64 + d as u64, self.n as u64)).sum()
    }

    /// Norm induced on affine systems by the Weyl norm of the homogenization.
    pub fn weyl_norm(&self) -> f64 {
        homogenize(self).weyl_norm()
    }

    pub(crate) fn with_strict(&self, strict: Vec<bool>) -> AffineSystem {
        AffineSystem { strict, ..self.clone() }
    }
}

fn homogenize_poly(p: &Polynomial, degree: u32) -> HomoPoly {
    let mut out = Polynomial::zero(p.num_vars() + 1);
    for (a, c) in &p.terms {
        let mut e = Vec::with_capacity(a.len() + 1);
        e.push(degree - a.iter().sum::<u32>());
        e.extend_from_slice(a);
        out.add_term(e, *c);
    }
    HomoPoly { degree, poly: out }
}

/// Homogenizes every component with respect to its pattern degree, using
/// `X_0` as the new leading variable.
pub fn homogenize(sys: &AffineSystem) -> HomoSystem {
    let degrees = sys.pattern.degrees();
    let (deq, dineq) = degrees.split_at(sys.equalities.len());
    let eq = sys.equalities.iter().zip(deq).map(|(p, &d)| homogenize_poly(p, d)).collect();
    let ineq = sys.inequalities.iter().zip(dineq).map(|(p, &d)| homogenize_poly(p, d)).collect();
    HomoSystem { equalities: eq, inequalities: ineq, pattern: sys.pattern.clone(), num_vars: sys.n + 1 }
}

/// The map `ψ ↦ (ψ^h, ‖ψ^h‖·X_0)`: homogenize and append the inequality
/// `‖ψ^h‖·X_0 >= 0` as the last component.
pub fn scaled_homogenization(sys: &AffineSystem) -> Result<HomoSystem> {
    if sys.is_zero() {
        return Err(Error::ZeroSystem);
    }
    let mut h = homogenize(sys);
    let norm = h.weyl_norm();
    let mut a = vec![0; h.num_vars];
    a[0] = 1;
    let mut x0 = Polynomial::zero(h.num_vars);
    x0.add_term(a, norm);
    h.inequalities.push(HomoPoly { degree: 1, poly: x0 });
    h.pattern = sys.pattern.with_linear_appended();
    Ok(h)
}
