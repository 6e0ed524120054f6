//! Shub-Smale proximity numbers and the (continuous) Moore-Penrose Newton
//! method.
//!
//! `β(F, x) = ‖DF(x)^† F(x)‖`, `γ(F, x) = sup_k ‖DF(x)^† D^kF(x) / k!‖^{1/(k-1)}`
//! and `α = βγ`. The spectral norm of the symmetric multilinear map
//! `D^kF(x)` is estimated from below by maximizing over diagonal arguments
//! `(u, ..., u)`, so [`gamma`] never overestimates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{self, pseudo_inverse};
use crate::polysys::{factorial, HomoPoly, Polynomial};

/// Shub-Smale's universal constant for the discrete alpha theorem. Recorded
/// for reference only.
pub const ALPHA_BULLET: f64 = 0.125;

/// Hypothesis `α_0 < 1/13` under which the Newton flow is guaranteed to exist
/// for all time, decay exponentially and stay within `2 β_0` of its start.
pub const FLOW_ALPHA_BOUND: f64 = 1.0 / 13.0;

/// A polynomial map `R^m_in → R^m_out` with access to its derivatives.
pub trait AnalyticMap {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    /// Largest total degree among the components.
    fn max_degree(&self) -> u32;
    fn eval(&self, x: &[f64]) -> DVector<f64>;
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;
    /// `D^kF(x)(u, ..., u)`.
    fn derivative_along(&self, x: &[f64], u: &[f64], k: usize) -> DVector<f64>;
    /// `D^kF(x)(u, ..., u, v)` with `k - 1` copies of `u`.
    fn mixed_derivative(&self, x: &[f64], u: &[f64], v: &[f64], k: usize) -> DVector<f64>;
}

/// A list of polynomials viewed as a map.
#[derive(Clone, Debug)]
pub struct PolyMap {
    components: Vec<Polynomial>,
    partials: Vec<Vec<Polynomial>>,
    dim_in: usize,
}

impl PolyMap {
    pub fn new(dim_in: usize, components: Vec<Polynomial>) -> Result<Self> {
        if let Some(p) = components.iter().find(|p| p.num_vars() != dim_in) {
            return Err(Error::Arity { expected: dim_in, got: p.num_vars() });
        }
        let partials = components.iter().map(|p| (0..dim_in).map(|j| p.partial(j)).collect()).collect();
        Ok(PolyMap { components, partials, dim_in })
    }

    pub fn from_homogeneous(polys: &[HomoPoly]) -> Result<Self> {
        let dim = polys.first().map(HomoPoly::num_vars).unwrap_or(0);
        PolyMap::new(dim, polys.iter().map(|h| h.polynomial().clone()).collect())
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }
}

impl AnalyticMap for PolyMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.components.len()
    }

    fn max_degree(&self) -> u32 {
        self.components.iter().map(Polynomial::total_degree).max().unwrap_or(0)
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.components.len(), self.components.iter().map(|p| p.eval(x)))
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.components.len(), self.dim_in);
        for (i, p) in self.components.iter().enumerate() {
            for (j, g) in p.gradient_at(x).into_iter().enumerate() {
                m[(i, j)] = g;
            }
        }
        m
    }

    fn derivative_along(&self, x: &[f64], u: &[f64], k: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.components.len(),
            self.components.iter().map(|p| p.directional_derivative(x, u, k)),
        )
    }

    fn mixed_derivative(&self, x: &[f64], u: &[f64], v: &[f64], k: usize) -> DVector<f64> {
        if k == 0 {
            return DVector::zeros(self.components.len());
        }
        DVector::from_iterator(
            self.components.len(),
            self.partials.iter().map(|row| {
                row.iter()
                    .zip(v)
                    .filter(|(_, vj)| **vj != 0.0)
                    .map(|(dp, vj)| vj * dp.directional_derivative(x, u, k - 1))
                    .sum::<f64>()
            }),
        )
    }
}

/// The restriction `y ↦ F(base + B y)` of a map to an affine subspace.
pub struct AffineRestriction<'a, M: AnalyticMap> {
    map: &'a M,
    base: Vec<f64>,
    basis: DMatrix<f64>,
}

impl<'a, M: AnalyticMap> AffineRestriction<'a, M> {
    pub fn new(map: &'a M, base: Vec<f64>, basis: DMatrix<f64>) -> Result<Self> {
        if base.len() != map.dim_in() || basis.nrows() != map.dim_in() {
            return Err(Error::Arity { expected: map.dim_in(), got: basis.nrows() });
        }
        Ok(AffineRestriction { map, base, basis })
    }

    /// Restriction to the tangent space `x + x^⊥` of the sphere at `x`.
    pub fn tangent(map: &'a M, x: &[f64]) -> Result<Self> {
        AffineRestriction::new(map, x.to_vec(), linalg::orthogonal_complement(x))
    }

    fn lift(&self, y: &[f64]) -> Vec<f64> {
        let p = DVector::from_column_slice(&self.base) + &self.basis * DVector::from_column_slice(y);
        p.iter().copied().collect()
    }

    fn push(&self, u: &[f64]) -> Vec<f64> {
        (&self.basis * DVector::from_column_slice(u)).iter().copied().collect()
    }
}

impl<M: AnalyticMap> AnalyticMap for AffineRestriction<'_, M> {
    fn dim_in(&self) -> usize {
        self.basis.ncols()
    }

    fn dim_out(&self) -> usize {
        self.map.dim_out()
    }

    fn max_degree(&self) -> u32 {
        self.map.max_degree()
    }

    fn eval(&self, y: &[f64]) -> DVector<f64> {
        self.map.eval(&self.lift(y))
    }

    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        self.map.jacobian(&self.lift(y)) * &self.basis
    }

    fn derivative_along(&self, y: &[f64], u: &[f64], k: usize) -> DVector<f64> {
        self.map.derivative_along(&self.lift(y), &self.push(u), k)
    }

    fn mixed_derivative(&self, y: &[f64], u: &[f64], v: &[f64], k: usize) -> DVector<f64> {
        self.map.mixed_derivative(&self.lift(y), &self.push(u), &self.push(v), k)
    }
}

/// Length of the Newton step; `+∞` when `DF(x)` is not surjective.
pub fn beta<M: AnalyticMap>(map: &M, x: &[f64]) -> f64 {
    match pseudo_inverse(&map.jacobian(x)) {
        Some(p) => (p * map.eval(x)).norm(),
        None => f64::INFINITY,
    }
}

/// Controls the search for the norm of `DF^† D^kF / k!`.
#[derive(Clone, Debug)]
pub struct GammaEstimator {
    /// Cube-shell level of the direction sweep. Doubling the level refines
    /// the sweep to a superset of directions.
    pub sweep_level: u64,
    /// Upper bound on sweep size in dimensions above 3; the level is reduced
    /// until the sweep fits.
    pub max_sweep_points: u64,
    /// Ascent steps from the best sweep directions (only above dimension 3).
    pub ascent_steps: usize,
    pub ascent_starts: usize,
}

impl Default for GammaEstimator {
    fn default() -> Self {
        GammaEstimator { sweep_level: 16, max_sweep_points: 20_000, ascent_steps: 50, ascent_starts: 4 }
    }
}

impl GammaEstimator {
    pub fn with_level(sweep_level: u64) -> Self {
        GammaEstimator { sweep_level, ..Default::default() }
    }

    fn directions(&self, dim: usize) -> Vec<Vec<f64>> {
        if dim == 1 {
            return vec![vec![1.0]];
        }
        let mut level = self.sweep_level.max(1);
        if dim > 3 {
            while level > 1 && GridSpec::with_level(dim - 1, level).count_u128() > self.max_sweep_points as u128 {
                level /= 2;
            }
        }
        // one representative of each ±u pair suffices: ‖T(-u)‖ = ‖T(u)‖
        GridSpec::with_level(dim - 1, level)
            .lattice_points()
            .filter(|p| p.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0))
            .map(|p| linalg::normalized(&p.iter().map(|&c| c as f64).collect::<Vec<_>>()))
            .collect()
    }

    /// Lower estimate of `γ(F, x)`; `+∞` when `DF(x)` is not surjective.
    pub fn estimate<M: AnalyticMap>(&self, map: &M, x: &[f64]) -> f64 {
        let pinv = match pseudo_inverse(&map.jacobian(x)) {
            Some(p) => p,
            None => return f64::INFINITY,
        };
        let deg = map.max_degree() as usize;
        if deg < 2 {
            return 0.0;
        }
        let dim = map.dim_in();
        let dirs = self.directions(dim);
        let mut best = 0.0_f64;
        for k in 2..=deg {
            let scale = 1.0 / factorial(k);
            let value = |u: &[f64]| (&pinv * map.derivative_along(x, u, k)).norm() * scale;
            let mut scored: Vec<(f64, usize)> = dirs.iter().enumerate().map(|(i, u)| (value(u), i)).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut norm_k = scored.first().map(|s| s.0).unwrap_or(0.0);
            if dim > 3 {
                for &(start_value, idx) in scored.iter().take(self.ascent_starts) {
                    let polished = self.ascend(map, &pinv, x, k, &dirs[idx], start_value * factorial(k));
                    norm_k = norm_k.max(polished * scale);
                }
            }
            best = best.max(norm_k.powf(1.0 / (k as f64 - 1.0)));
        }
        best
    }

    /// Power-method style ascent of `u ↦ ‖P D^kF(x)(u^k)‖` on the unit sphere.
    fn ascend<M: AnalyticMap>(&self, map: &M, pinv: &DMatrix<f64>, x: &[f64], k: usize, start: &[f64], start_value: f64) -> f64 {
        let dim = map.dim_in();
        let mut u = start.to_vec();
        let mut current = start_value;
        let mut e = vec![0.0; dim];
        for _ in 0..self.ascent_steps {
            let w = pinv * map.derivative_along(x, &u, k);
            let mut grad = vec![0.0; dim];
            for j in 0..dim {
                e.iter_mut().for_each(|v| *v = 0.0);
                e[j] = 1.0;
                grad[j] = w.dot(&(pinv * map.mixed_derivative(x, &u, &e, k)));
            }
            if linalg::norm(&grad) == 0.0 {
                break;
            }
            let candidate = linalg::normalized(&grad);
            let value = (pinv * map.derivative_along(x, &candidate, k)).norm();
            if value <= current * (1.0 + 1e-12) {
                break;
            }
            current = value;
            u = candidate;
        }
        current
    }
}

/// `γ(F, x)` with the default estimator.
pub fn gamma<M: AnalyticMap>(map: &M, x: &[f64]) -> f64 {
    GammaEstimator::default().estimate(map, x)
}

pub fn alpha<M: AnalyticMap>(map: &M, x: &[f64]) -> f64 {
    let b = beta(map, x);
    if b.is_infinite() {
        return f64::INFINITY;
    }
    let g = gamma(map, x);
    if b == 0.0 && g.is_finite() {
        0.0
    } else {
        g * b
    }
}

/// One Moore-Penrose Newton step `x - DF(x)^† F(x)`.
pub fn newton_step<M: AnalyticMap>(map: &M, x: &[f64]) -> Result<Vec<f64>> {
    let p = pseudo_inverse(&map.jacobian(x)).ok_or(Error::RankDeficient)?;
    let step = p * map.eval(x);
    Ok(x.iter().zip(step.iter()).map(|(a, b)| a - b).collect())
}

/// The Newton iterates `x_0, x_1, ..., x_iterations`.
pub fn newton_iterates<M: AnalyticMap>(map: &M, x0: &[f64], iterations: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![x0.to_vec()];
    for _ in 0..iterations {
        let next = newton_step(map, out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowStatus {
    Completed,
    /// The Jacobian lost rank at this time; the trace stops there.
    RankLoss { time: f64 },
}

/// Samples of the continuous Newton flow `ẋ = -DF(x)^† F(x)`.
#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub betas: Vec<f64>,
    /// `‖F(x_t) - F(x_0) e^{-t}‖` at each sample.
    pub residual_deviation: Vec<f64>,
    /// `‖F(x_t)‖` at each sample.
    pub residual_norms: Vec<f64>,
    pub beta0: f64,
    pub alpha0: f64,
    /// Whether `α_0 < 1/13` held at the start.
    pub hypothesis_holds: bool,
    pub status: FlowStatus,
}

impl FlowTrace {
    /// `max_t |‖F(x_t)‖ / (‖F(x_0)‖ e^{-t}) - 1|`; zero when `F(x_0) = 0`.
    pub fn max_relative_decay_deviation(&self) -> f64 {
        let f0 = self.residual_norms[0];
        if f0 == 0.0 {
            return 0.0;
        }
        self.times
            .iter()
            .zip(&self.residual_norms)
            .map(|(t, r)| (r / (f0 * (-t).exp()) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_t ‖x_t - x_0‖ - 2 β_0 (1 - e^{-t})`; non-positive when the drift
    /// bound holds.
    pub fn max_drift_excess(&self) -> f64 {
        let x0 = &self.points[0];
        self.times
            .iter()
            .zip(&self.points)
            .map(|(t, x)| linalg::euclidean_distance(x, x0) - 2.0 * self.beta0 * (1.0 - (-t).exp()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_point(&self) -> &[f64] {
        self.points.last().unwrap()
    }
}

fn newton_velocity<M: AnalyticMap>(map: &M, x: &[f64]) -> Option<DVector<f64>> {
    pseudo_inverse(&map.jacobian(x)).map(|p| -(p * map.eval(x)))
}

/// Integrates the Newton flow from `x0` up to `t_end` with fixed-step
/// classical Runge-Kutta of order four.
pub fn newton_flow<M: AnalyticMap>(map: &M, x0: &[f64], t_end: f64, step: f64) -> Result<FlowTrace> {
    if !(step > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Precondition("flow needs step > 0 and t_end >= 0".into()));
    }
    let f0 = map.eval(x0);
    let beta0 = beta(map, x0);
    if beta0.is_infinite() {
        return Err(Error::RankDeficient);
    }
    let alpha0 = alpha(map, x0);
    let mut trace = FlowTrace {
        times: vec![0.0],
        points: vec![x0.to_vec()],
        betas: vec![beta0],
        residual_deviation: vec![0.0],
        residual_norms: vec![f0.norm()],
        beta0,
        alpha0,
        hypothesis_holds: alpha0 < FLOW_ALPHA_BOUND,
        status: FlowStatus::Completed,
    };
    let steps = (t_end / step).round() as usize;
    let mut x = DVector::from_column_slice(x0);
    let add = |x: &DVector<f64>, k: &DVector<f64>, h: f64| -> Vec<f64> { (x + k * h).iter().copied().collect() };
    for i in 1..=steps {
        let t_prev = (i - 1) as f64 * step;
        let stage = || -> Option<DVector<f64>> {
            let xs: Vec<f64> = x.iter().copied().collect();
            let k1 = newton_velocity(map, &xs)?;
            let k2 = newton_velocity(map, &add(&x, &k1, step / 2.0))?;
            let k3 = newton_velocity(map, &add(&x, &k2, step / 2.0))?;
            let k4 = newton_velocity(map, &add(&x, &k3, step))?;
            Some(&x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0))
        };
        match stage() {
            Some(next) => x = next,
            None => {
                trace.status = FlowStatus::RankLoss { time: t_prev };
                return Ok(trace);
            }
        }
        let t = i as f64 * step;
        let xs: Vec<f64> = x.iter().copied().collect();
        let fx = map.eval(&xs);
        trace.residual_deviation.push((&fx - &f0 * (-t).exp()).norm());
        trace.residual_norms.push(fx.norm());
        trace.betas.push(beta(map, &xs));
        trace.times.push(t);
        trace.points.push(xs);
    }
    Ok(trace)
}
