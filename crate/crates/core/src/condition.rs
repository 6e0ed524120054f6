//! Condition numbers of homogeneous systems on the sphere.
//!
//! For `F = (f_1..f_q)` and a unit vector `x`:
//!
//! * `μ_norm(F, x) = ‖F‖ ‖DF(x)^† Δ‖` with `Δ = diag(√d_i)`,
//! * `μ_proj(F, x)`, the same with `DF(x)` restricted to `T_x = x^⊥`,
//! * `κ(F, x) = (μ_proj^{-2} + ‖F(x)‖² / ‖F‖²)^{-1/2}`,
//!
//! and `κ_*` maximizes `κ(F^L, x)` over the subtuples `L` of inequalities
//! with `q + |L| <= n + 1`. All norms of systems are Weyl norms. Extended
//! reals are `f64` with `+∞` for ill-posed values.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, surjective_sigma_min};
use crate::polysys::{HomoPoly, HomoSystem};
use crate::serde_ext;

/// Tolerance on `‖x‖ = 1` for points handed to the condition numbers.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// A choice of inequalities appended to the equalities, as sorted 0-based
/// indices into `G`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Subtuple {
    indices: Vec<usize>,
}

impl Subtuple {
    pub fn empty() -> Self {
        Subtuple { indices: Vec::new() }
    }

    /// Checks sortedness, range `< s` and `q + |L| <= n + 1`.
    pub fn new(indices: Vec<usize>, q: usize, s: usize, n: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("subtuple indices must be strictly increasing".into()));
        }
        if indices.iter().any(|&i| i >= s) {
            return Err(Error::Precondition(format!("subtuple index out of range for s = {s}")));
        }
        if q + indices.len() > n + 1 {
            return Err(Error::Precondition(format!(
                "subtuple too long: q + |L| = {} > n + 1 = {}",
                q + indices.len(),
                n + 1
            )));
        }
        Ok(Subtuple { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// All subsets of `0..s` with at most `max_len` elements, by size and then
/// lexicographically.
pub fn subtuples(s: usize, max_len: usize) -> Vec<Subtuple> {
    fn extend(start: usize, s: usize, len: usize, cur: &mut Vec<usize>, out: &mut Vec<Subtuple>) {
        if cur.len() == len {
            out.push(Subtuple { indices: cur.clone() });
            return;
        }
        for i in start..s {
            cur.push(i);
            extend(i + 1, s, len, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for len in 0..=max_len.min(s) {
        extend(0, s, len, &mut Vec::new(), &mut out);
    }
    out
}

/// A system prepared for repeated condition evaluations: components with
/// their Weyl norms and degrees cached.
#[derive(Clone, Debug)]
pub struct CompiledSystem {
    components: Vec<HomoPoly>,
    norms: Vec<f64>,
    degrees: Vec<u32>,
    q: usize,
    num_vars: usize,
}

impl CompiledSystem {
    pub fn new(sys: &HomoSystem) -> Self {
        let components: Vec<HomoPoly> = sys.components().cloned().collect();
        Self::build(components, sys.pattern().q(), sys.num_vars())
    }

    /// Treats every polynomial of the list as an equality.
    pub fn from_equalities(polys: &[HomoPoly], num_vars: usize) -> Result<Self> {
        if let Some(p) = polys.iter().find(|p| p.num_vars() != num_vars) {
            return Err(Error::Arity { expected: num_vars, got: p.num_vars() });
        }
        Ok(Self::build(polys.to_vec(), polys.len(), num_vars))
    }

    fn build(components: Vec<HomoPoly>, q: usize, num_vars: usize) -> Self {
        let norms = components.iter().map(HomoPoly::weyl_norm).collect();
        let degrees = components.iter().map(HomoPoly::degree).collect();
        CompiledSystem { components, norms, degrees, q, num_vars }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn s(&self) -> usize {
        self.components.len() - self.q
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn component_norms(&self) -> &[f64] {
        &self.norms
    }

    /// Component indices of `F^L`.
    pub fn indices_for(&self, sub: &Subtuple) -> Vec<usize> {
        (0..self.q).chain(sub.indices.iter().map(|i| self.q + i)).collect()
    }

    /// Evaluates values and gradients of every component at the unit vector `x`.
    pub fn at(&self, x: &[f64]) -> Result<PointJet<'_>> {
        if x.len() != self.num_vars {
            return Err(Error::Arity { expected: self.num_vars, got: x.len() });
        }
        let nx = linalg::norm(x);
        if (nx - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnit(nx));
        }
        Ok(self.at_unchecked(x))
    }

    pub(crate) fn at_unchecked(&self, x: &[f64]) -> PointJet<'_> {
        let values = self.components.iter().map(|h| h.eval(x)).collect();
        let gradients = self.components.iter().map(|h| h.gradient_at(x)).collect();
        PointJet { sys: self, x: x.to_vec(), values, gradients, basis: None }
    }
}

/// Values and first derivatives of a compiled system at one point.
pub struct PointJet<'a> {
    sys: &'a CompiledSystem,
    x: Vec<f64>,
    values: Vec<f64>,
    gradients: Vec<Vec<f64>>,
    basis: Option<DMatrix<f64>>,
}

impl PointJet<'_> {
    pub fn point(&self) -> &[f64] {
        &self.x
    }

    /// Component values, equalities first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn tangent_basis(&mut self) -> &DMatrix<f64> {
        if self.basis.is_none() {
            self.basis = Some(linalg::orthogonal_complement(&self.x));
        }
        self.basis.as_ref().unwrap()
    }

    fn system_norm(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.sys.norms[i].powi(2)).sum::<f64>().sqrt()
    }

    /// `Δ^{-1} DF(x)` for the selected components.
    fn scaled_jacobian(&self, idx: &[usize]) -> DMatrix<f64> {
        let cols = self.x.len();
        let mut m = DMatrix::zeros(idx.len(), cols);
        for (r, &i) in idx.iter().enumerate() {
            let w = 1.0 / (self.sys.degrees[i] as f64).sqrt();
            for j in 0..cols {
                m[(r, j)] = self.gradients[i][j] * w;
            }
        }
        m
    }

    /// `1/μ`, zero when the (restricted) derivative is not surjective.
    fn inverse_mu(&mut self, idx: &[usize], restricted: bool) -> f64 {
        let norm = self.system_norm(idx);
        if norm == 0.0 {
            return 0.0;
        }
        let mut m = self.scaled_jacobian(idx);
        if restricted {
            m = m * self.tangent_basis();
        }
        match surjective_sigma_min(&m) {
            Some(s) => s / norm,
            None => 0.0,
        }
    }

    pub fn mu_norm(&mut self, idx: &[usize]) -> f64 {
        invert(self.inverse_mu(idx, false))
    }

    pub fn mu_proj(&mut self, idx: &[usize]) -> f64 {
        invert(self.inverse_mu(idx, true))
    }

    /// `‖F(x)‖ / ‖F‖` for the selected components.
    pub fn residual_ratio(&self, idx: &[usize]) -> f64 {
        let norm = self.system_norm(idx);
        let value = idx.iter().map(|&i| self.values[i].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            f64::INFINITY
        } else {
            value / norm
        }
    }

    /// `κ(F_idx, x)`.
    pub fn kappa(&mut self, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 1.0;
        }
        if self.system_norm(idx) == 0.0 {
            return f64::INFINITY;
        }
        let inv = self.inverse_mu(idx, true);
        let ratio = self.residual_ratio(idx);
        let denom = inv * inv + ratio * ratio;
        if denom == 0.0 {
            f64::INFINITY
        } else {
            1.0 / denom.sqrt()
        }
    }

    /// `max_L κ(F^L, x)` over `q + |L| <= n + 1`, with the first maximizer in
    /// [`subtuples`] order.
    pub fn kappa_subtuple_max(&mut self, subs: &[Subtuple]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, sub) in subs.iter().enumerate() {
            let idx = self.sys.indices_for(sub);
            let value = self.kappa(&idx);
            if value > best.0 || (value.is_nan() && best.0 == f64::NEG_INFINITY) {
                best = (value, k);
            }
        }
        best
    }
}

fn invert(v: f64) -> f64 {
    if v == 0.0 {
        f64::INFINITY
    } else {
        1.0 / v
    }
}

fn all(polys: &[HomoPoly]) -> Vec<usize> {
    (0..polys.len()).collect()
}

fn num_vars_of(polys: &[HomoPoly], x: &[f64]) -> usize {
    polys.first().map(HomoPoly::num_vars).unwrap_or(x.len())
}

/// `μ_norm(F, x)`; `+∞` when `DF(x)` is not surjective.
pub fn mu_norm(polys: &[HomoPoly], x: &[f64]) -> Result<f64> {
    let sys = CompiledSystem::from_equalities(polys, num_vars_of(polys, x))?;
    Ok(sys.at(x)?.mu_norm(&all(polys)))
}

/// `μ_proj(F, x)`; `+∞` when `DF(x)|_{x^⊥}` is not surjective.
pub fn mu_proj(polys: &[HomoPoly], x: &[f64]) -> Result<f64> {
    let sys = CompiledSystem::from_equalities(polys, num_vars_of(polys, x))?;
    Ok(sys.at(x)?.mu_proj(&all(polys)))
}

/// `κ(F, x)`. The empty system has condition 1 and the zero system `+∞`.
pub fn kappa(polys: &[HomoPoly], x: &[f64]) -> Result<f64> {
    let sys = CompiledSystem::from_equalities(polys, num_vars_of(polys, x))?;
    Ok(sys.at(x)?.kappa(&all(polys)))
}

/// `max { κ(F^L, x) : L ⊆ G, q + |L| <= n + 1 }` and a maximizing `L`.
pub fn kappa_subtuple_max(sys: &HomoSystem, x: &[f64]) -> Result<(f64, Subtuple)> {
    let n = sys.sphere_dim();
    let q = sys.pattern().q();
    if q > n + 1 {
        return Err(Error::Precondition(format!("condition undefined for q = {q} > n + 1 = {}", n + 1)));
    }
    let compiled = CompiledSystem::new(sys);
    let subs = subtuples(compiled.s(), n + 1 - q);
    let (value, k) = compiled.at(x)?.kappa_subtuple_max(&subs);
    Ok((value, subs[k].clone()))
}

/// `1 / (7 D^{3/2} κ_*)`, a lower bound on the reach of the solution set;
/// zero for infinite `κ_*`.
pub fn reach_lower_bound(kappa_star: f64, max_degree: u32) -> f64 {
    if !kappa_star.is_finite() {
        return 0.0;
    }
    1.0 / (7.0 * (max_degree as f64).powf(1.5) * kappa_star)
}

/// Condition diagnostics of a system at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    #[serde(with = "serde_ext::extended_real")]
    pub kappa: f64,
    #[serde(with = "serde_ext::extended_real")]
    pub mu_norm: f64,
    #[serde(with = "serde_ext::extended_real")]
    pub mu_proj: f64,
    #[serde(with = "serde_ext::extended_real")]
    pub residual_ratio: f64,
    /// `1 / (7 D^{3/2} κ)`.
    pub reach_lower: f64,
    /// `‖F‖ / κ`, the distance to the ill-posed systems at `x`.
    pub dist_to_illposed_lower: f64,
}

impl ConditionReport {
    /// Report for `F` at `x`, with `max_degree` the `D` of the enclosing system.
    pub fn compute(polys: &[HomoPoly], x: &[f64], max_degree: u32) -> Result<Self> {
        let sys = CompiledSystem::from_equalities(polys, num_vars_of(polys, x))?;
        let mut jet = sys.at(x)?;
        let idx = all(polys);
        let kappa = jet.kappa(&idx);
        let norm = crate::polysys::weyl_norm(polys);
        Ok(ConditionReport {
            kappa,
            mu_norm: jet.mu_norm(&idx),
            mu_proj: jet.mu_proj(&idx),
            residual_ratio: if polys.is_empty() { 0.0 } else { jet.residual_ratio(&idx) },
            reach_lower: reach_lower_bound(kappa, max_degree),
            dist_to_illposed_lower: if kappa.is_finite() { norm / kappa } else { 0.0 },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hp(num_vars: usize, degree: u32, terms: &[(&[u32], f64)]) -> HomoPoly {
        HomoPoly::from_terms(num_vars, degree, terms.iter().map(|(a, c)| (a.to_vec(), *c))).unwrap()
    }

    #[test]
    fn mu_of_linear_form() {
        let f = [hp(2, 1, &[(&[0, 1], 1.0)])];
        assert_relative_eq!(mu_norm(&f, &[1.0, 0.0]).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(mu_proj(&f, &[1.0, 0.0]).unwrap(), 1.0, epsilon = 1e-14);
        let sq = [hp(2, 2, &[(&[0, 2], 1.0)])];
        assert!(mu_norm(&sq, &[1.0, 0.0]).unwrap().is_infinite());
    }

    #[test]
    fn kappa_of_linear_form() {
        let f = [hp(2, 1, &[(&[0, 1], 1.0)])];
        let at_zero = kappa(&f, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(at_zero, 1.0, epsilon = 1e-14);
        assert_relative_eq!(at_zero, mu_proj(&f, &[1.0, 0.0]).unwrap(), epsilon = 1e-14);
        assert_relative_eq!(kappa(&f, &[0.0, 1.0]).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn non_unit_point_is_rejected() {
        let f = [hp(2, 1, &[(&[0, 1], 1.0)])];
        assert!(matches!(kappa(&f, &[2.0, 0.0]), Err(Error::NotUnit(_))));
    }

    #[test]
    fn conventions_for_empty_and_zero() {
        assert_eq!(kappa(&[], &[1.0, 0.0]).unwrap(), 1.0);
        let zero = [HomoPoly::from_terms(2, 2, std::iter::empty()).unwrap()];
        assert!(kappa(&zero, &[1.0, 0.0]).unwrap().is_infinite());
    }

    #[test]
    fn overdetermined_kappa_is_residual_inverse() {
        // q = 2 > n = 1 on S^1
        let f = [hp(2, 1, &[(&[1, 0], 1.0)]), hp(2, 1, &[(&[0, 1], 1.0)])];
        let x = linalg::normalized(&[1.0, 2.0]);
        let expected = crate::polysys::weyl_norm(&f) / linalg::norm(&[x[0], x[1]]);
        assert_relative_eq!(kappa(&f, &x).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn subtuple_enumeration() {
        let subs = subtuples(3, 2);
        let got: Vec<Vec<usize>> = subs.iter().map(|s| s.indices().to_vec()).collect();
        assert_eq!(got, vec![vec![], vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(subtuples(0, 3).len(), 1);
        assert!(Subtuple::new(vec![1, 0], 0, 2, 2).is_err());
        assert!(Subtuple::new(vec![0, 1], 2, 2, 2).is_err());
        assert!(Subtuple::new(vec![0, 1], 1, 2, 2).is_ok());
    }

    #[test]
    fn subtuple_max_without_inequalities() {
        let f = hp(3, 2, &[(&[0, 2, 0], 1.0), (&[0, 0, 2], 1.0), (&[2, 0, 0], -1.0)]);
        let sys = HomoSystem::new(3, vec![f.clone()], vec![]).unwrap();
        let x = linalg::normalized(&[1.0, 0.3, -0.2]);
        let (k, sub) = kappa_subtuple_max(&sys, &x).unwrap();
        assert!(sub.is_empty());
        assert_eq!(k, kappa(&[f], &x).unwrap());
    }

    #[test]
    fn reach_bound() {
        assert_relative_eq!(reach_lower_bound(1.0, 2), 1.0 / (7.0 * 2f64.powf(1.5)));
        assert!((reach_lower_bound(1.0, 2) - 0.0505).abs() < 1e-4);
        assert_eq!(reach_lower_bound(f64::INFINITY, 2), 0.0);
    }

    #[test]
    fn report_fields() {
        let f = [hp(2, 1, &[(&[0, 1], 1.0)])];
        let rep = ConditionReport::compute(&f, &[1.0, 0.0], 1).unwrap();
        assert_relative_eq!(rep.kappa, 1.0, epsilon = 1e-14);
        assert_eq!(rep.residual_ratio, 0.0);
        assert_relative_eq!(rep.reach_lower, 1.0 / 7.0, epsilon = 1e-14);
        assert_relative_eq!(rep.dist_to_illposed_lower, 1.0, epsilon = 1e-14);
    }
}
