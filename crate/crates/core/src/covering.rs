//! The relaxation `Approx(F, G, r)` and the refinement loop producing a
//! finite point cloud `X ⊂ S^n` and a radius `ε` whose ball union has the
//! homotopy type of `S(F, G)`.
//!
//! Each iteration halves `r`, scans the grid `G_r` for
//! `k_* = max κ(F^L, x)` and stops once `71 D^{5/2} k_*² r < 1`. Then
//! `X = G_r ∩ Approx(F, G, D^{1/2} r)` and `ε = 5 D k_* r`.

use std::cmp::Ordering;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::condition::{subtuples, CompiledSystem, Subtuple};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::polysys::HomoSystem;
use crate::serde_ext;

/// Membership test for `Approx(F, G, r)` with cached component norms.
#[derive(Clone, Debug)]
pub struct RelaxationTest {
    sys: HomoSystem,
    norms: Vec<f64>,
}

impl RelaxationTest {
    pub fn new(sys: &HomoSystem) -> Self {
        let norms = sys.components().map(|h| h.weyl_norm()).collect();
        RelaxationTest { sys: sys.clone(), norms }
    }

    /// `|f(x)| < ‖f‖ r` for every equality and `g(x) > -‖g‖ r` for every
    /// inequality.
    pub fn contains(&self, r: f64, x: &[f64]) -> bool {
        let q = self.sys.pattern().q();
        let eq_ok = self.sys.equalities().iter().zip(&self.norms[..q]).all(|(f, &nf)| f.eval(x).abs() < nf * r);
        eq_ok && self.sys.inequalities().iter().zip(&self.norms[q..]).all(|(g, &ng)| g.eval(x) > -ng * r)
    }
}

/// Whether the unit vector `x` lies in `Approx(F, G, r)`.
pub fn approx_member(sys: &HomoSystem, r: f64, x: &[f64]) -> bool {
    RelaxationTest::new(sys).contains(r, x)
}

/// The grid maximum of `κ(F^L, x)` and where it is attained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KStar {
    #[serde(with = "serde_ext::extended_real")]
    pub value: f64,
    pub witness: Vec<f64>,
    pub subtuple: Subtuple,
}

fn check_shape(sys: &HomoSystem) -> Result<()> {
    let n = sys.sphere_dim();
    let q = sys.pattern().q();
    if q > n {
        return Err(Error::Precondition(format!("the algorithm requires q <= n equalities (q = {q}, n = {n})")));
    }
    Ok(())
}

/// Candidate maximum with its canonical grid position, for an
/// order-independent reduction.
struct Candidate {
    value: f64,
    chunk: usize,
    offset: usize,
    point: Vec<f64>,
    sub: usize,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    // larger value wins, then earlier grid position
    match a.value.total_cmp(&b.value) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.chunk, a.offset) < (b.chunk, b.offset),
    }
}

fn scan_kappa(compiled: &CompiledSystem, subs: &[Subtuple], spec: &GridSpec) -> Option<Candidate> {
    spec.chunks()
        .into_par_iter()
        .enumerate()
        .filter_map(|(ci, chunk)| {
            let mut best: Option<Candidate> = None;
            for (offset, x) in chunk.points().enumerate() {
                let mut jet = compiled.at_unchecked(&x);
                let (value, sub) = jet.kappa_subtuple_max(subs);
                // NaN can only come from overflow; treat it as ill-posed
                let value = if value.is_nan() { f64::INFINITY } else { value };
                let cand = Candidate { value, chunk: ci, offset, point: x, sub };
                if best.as_ref().is_none_or(|b| better(&cand, b)) {
                    best = Some(cand);
                }
            }
            best
        })
        .reduce_with(|a, b| if better(&a, &b) { a } else { b })
}

/// `max { κ(F^L, x) : x ∈ G_r, L ⊆ G, q + |L| <= n + 1 }`.
pub fn k_star_over_grid(sys: &HomoSystem, r: f64) -> Result<KStar> {
    check_shape(sys)?;
    let spec = GridSpec::new(sys.sphere_dim(), r)?;
    Ok(k_star_on(sys, &spec))
}

fn k_star_on(sys: &HomoSystem, spec: &GridSpec) -> KStar {
    let compiled = CompiledSystem::new(sys);
    let n = sys.sphere_dim();
    let subs = subtuples(compiled.s(), n + 1 - compiled.q());
    let best = scan_kappa(&compiled, &subs, spec).expect("grids are never empty");
    KStar { value: best.value, witness: best.point, subtuple: subs[best.sub].clone() }
}

/// `G_r ∩ Approx(F, G, radius)` in grid order.
pub fn filter_grid(sys: &HomoSystem, spec: &GridSpec, radius: f64) -> Vec<Vec<f64>> {
    let test = RelaxationTest::new(sys);
    let per_chunk: Vec<Vec<Vec<f64>>> = spec
        .chunks()
        .into_par_iter()
        .map(|chunk| chunk.points().filter(|x| test.contains(radius, x)).collect())
        .collect();
    per_chunk.into_iter().flatten().collect()
}

/// Limits converting a non-terminating refinement into a reported failure.
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringOptions {
    pub max_iterations: usize,
    /// Refinement stops unsuccessfully before `r` drops below this.
    pub min_r: f64,
    /// Largest grid that will be scanned.
    pub max_grid_size: u128,
}

impl Default for CoveringOptions {
    fn default() -> Self {
        CoveringOptions { max_iterations: 60, min_r: 0.0, max_grid_size: 100_000_000 }
    }
}

/// One refinement step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringStep {
    pub r: f64,
    #[serde(serialize_with = "serde_ext::biguint_string")]
    pub grid_size: BigUint,
    #[serde(with = "serde_ext::extended_real")]
    pub k_star: f64,
    /// `71 D^{5/2} k_*² r`.
    #[serde(with = "serde_ext::extended_real")]
    pub stop_value: f64,
}

/// Output of the covering stage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringResult {
    #[serde(skip)]
    pub points: Vec<Vec<f64>>,
    #[serde(with = "serde_ext::extended_real")]
    pub epsilon: f64,
    pub r_final: f64,
    #[serde(with = "serde_ext::extended_real")]
    pub k_star: f64,
    pub iterations: usize,
    pub certified: bool,
    #[serde(serialize_with = "serde_ext::biguint_string")]
    pub grid_size: BigUint,
    pub max_degree: u32,
    pub witness: Option<KStar>,
    pub trace: Vec<CoveringStep>,
    /// Why refinement stopped without a certificate.
    pub failure: Option<String>,
}

fn stop_value(d: f64, k: f64, r: f64) -> f64 {
    71.0 * d.powf(2.5) * k * k * r
}

fn epsilon_for(d: f64, k: f64, r: f64) -> f64 {
    5.0 * d * k * r
}

/// Runs the certified refinement loop.
pub fn covering(sys: &HomoSystem, opts: &CoveringOptions) -> Result<CoveringResult> {
    check_shape(sys)?;
    let n = sys.sphere_dim();
    let dmax = sys.max_degree();
    let d = dmax as f64;
    let mut r = 1.0;
    let mut trace = Vec::new();
    let mut last: Option<(GridSpec, KStar)> = None;
    let mut failure = None;
    for _ in 0..opts.max_iterations {
        let next = r / 2.0;
        if next < opts.min_r {
            failure = Some(format!("r would drop below min_r = {}", opts.min_r));
            break;
        }
        let spec = GridSpec::new(n, next)?;
        if spec.count_u128() > opts.max_grid_size {
            failure = Some(format!("grid of {} points exceeds max_grid_size = {}", spec.count(), opts.max_grid_size));
            break;
        }
        r = next;
        let ks = k_star_on(sys, &spec);
        let stop = stop_value(d, ks.value, r);
        trace.push(CoveringStep { r, grid_size: spec.count(), k_star: ks.value, stop_value: stop });
        let done = stop < 1.0;
        last = Some((spec, ks));
        if done {
            let (spec, ks) = last.unwrap();
            let points = filter_grid(sys, &spec, d.sqrt() * r);
            return Ok(CoveringResult {
                points,
                epsilon: epsilon_for(d, ks.value, r),
                r_final: r,
                k_star: ks.value,
                iterations: trace.len(),
                certified: true,
                grid_size: spec.count(),
                max_degree: dmax,
                witness: Some(ks),
                trace,
                failure: None,
            });
        }
    }
    let failure = failure.unwrap_or_else(|| format!("no certificate after max_iterations = {}", opts.max_iterations));
    let (grid_size, k_star, witness) = match last {
        Some((spec, ks)) => (spec.count(), ks.value, Some(ks)),
        None => (BigUint::from(0u32), f64::INFINITY, None),
    };
    Ok(CoveringResult {
        points: Vec::new(),
        epsilon: epsilon_for(d, k_star, r),
        r_final: r,
        k_star,
        iterations: trace.len(),
        certified: false,
        grid_size,
        max_degree: dmax,
        witness,
        trace,
        failure: Some(failure),
    })
}

/// Skips refinement: `X = G_r ∩ Approx(F, G, D^{1/2} r)` for a given `r`,
/// paired with the given `ε`. Never certified; `k_*` is still scanned for
/// the audit.
pub fn covering_fixed(sys: &HomoSystem, r: f64, epsilon: f64, opts: &CoveringOptions) -> Result<CoveringResult> {
    check_shape(sys)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Options(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    let spec = GridSpec::new(sys.sphere_dim(), r)?;
    if spec.count_u128() > opts.max_grid_size {
        return Err(Error::Options(format!(
            "grid of {} points exceeds max_grid_size = {}",
            spec.count(),
            opts.max_grid_size
        )));
    }
    let dmax = sys.max_degree();
    let d = dmax as f64;
    let ks = k_star_on(sys, &spec);
    let points = filter_grid(sys, &spec, d.sqrt() * r);
    let step = CoveringStep { r, grid_size: spec.count(), k_star: ks.value, stop_value: stop_value(d, ks.value, r) };
    Ok(CoveringResult {
        points,
        epsilon,
        r_final: r,
        k_star: ks.value,
        iterations: 1,
        certified: false,
        grid_size: spec.count(),
        max_degree: dmax,
        witness: Some(ks),
        trace: vec![step],
        failure: None,
    })
}

/// Independent recomputation of the loop postconditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringAudit {
    /// `71 D^{5/2} k_*² r`.
    #[serde(with = "serde_ext::extended_real")]
    pub stop_value: f64,
    pub stop_holds: bool,
    /// `ε` equals `5 D k_* r` bit for bit.
    pub epsilon_matches: bool,
    pub points_on_grid: bool,
    pub points_in_relaxation: bool,
    /// `13 D^{3/2} k_*² (D^{1/2} r)`, below 1 when the sampling hypothesis holds.
    #[serde(with = "serde_ext::extended_real")]
    pub hypothesis_value: f64,
}

impl CoveringAudit {
    /// Everything a certified result has to satisfy.
    pub fn certified_ok(&self) -> bool {
        self.stop_holds && self.epsilon_matches && self.points_on_grid && self.points_in_relaxation
    }
}

pub fn audit(sys: &HomoSystem, res: &CoveringResult) -> Result<CoveringAudit> {
    let d = sys.max_degree() as f64;
    let r = res.r_final;
    let k = res.k_star;
    let spec = GridSpec::new(sys.sphere_dim(), r)?;
    let test = RelaxationTest::new(sys);
    let radius = d.sqrt() * r;
    let stop = 71.0 * d.powf(2.5) * k * k * r;
    Ok(CoveringAudit {
        stop_value: stop,
        stop_holds: stop < 1.0,
        epsilon_matches: res.epsilon.to_bits() == (5.0 * d * k * r).to_bits(),
        points_on_grid: res.points.iter().all(|x| spec.contains(x)),
        points_in_relaxation: res.points.par_iter().all(|x| test.contains(radius, x)),
        hypothesis_value: 13.0 * d.powf(1.5) * k * k * radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::HomoPoly;

    fn x1_on_circle() -> HomoSystem {
        let f = HomoPoly::from_terms(2, 1, [(vec![0, 1], 1.0)]).unwrap();
        HomoSystem::new(2, vec![f], vec![]).unwrap()
    }

    #[test]
    fn membership_examples() {
        let sys = x1_on_circle();
        assert!(approx_member(&sys, 0.1, &[1.0, 0.0]));
        assert!(!approx_member(&sys, 0.1, &[0.0, 1.0]));
        assert!(approx_member(&sys, 1e-300, &[-1.0, 0.0]));
    }

    #[test]
    fn inequality_membership_is_strict() {
        let g = HomoPoly::from_terms(2, 1, [(vec![1, 0], 1.0)]).unwrap();
        let sys = HomoSystem::new(2, vec![], vec![g]).unwrap();
        assert!(approx_member(&sys, 0.1, &[0.0, 1.0]));
        assert!(!approx_member(&sys, 0.1, &[-0.1, (0.99f64).sqrt()]));
    }

    #[test]
    fn k_star_of_linear_form_matches_direct_scan() {
        // κ((X1), x) = (μ_proj^{-2} + x1²)^{-1/2} with μ_proj = 1/|x0|, so κ = 1
        let sys = x1_on_circle();
        let ks = k_star_over_grid(&sys, 0.5).unwrap();
        let mut direct = f64::NEG_INFINITY;
        for x in GridSpec::new(1, 0.5).unwrap().stream() {
            let mu = 1.0 / x[0].abs();
            direct = direct.max(1.0 / (mu.powi(-2) + x[1] * x[1]).sqrt());
        }
        assert!((ks.value - direct).abs() < 1e-12);
        assert!(ks.value >= 1.0 - 1e-12);
    }

    #[test]
    fn linear_form_is_certified() {
        let sys = x1_on_circle();
        let res = covering(&sys, &CoveringOptions::default()).unwrap();
        assert!(res.certified);
        let a = audit(&sys, &res).unwrap();
        assert!(a.certified_ok());
        assert!(res.points.iter().all(|x| x[1].abs() < res.r_final));
        assert!(res.points.iter().any(|x| x[0] > 0.0) && res.points.iter().any(|x| x[0] < 0.0));
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let sys = x1_on_circle();
        let opts = CoveringOptions { max_iterations: 3, ..Default::default() };
        let res = covering(&sys, &opts).unwrap();
        assert!(!res.certified);
        assert_eq!(res.iterations, 3);
        assert!(res.points.is_empty());
        assert!(res.failure.is_some());
    }

    #[test]
    fn grid_guard_reports_failure() {
        let sys = x1_on_circle();
        let opts = CoveringOptions { max_grid_size: 100, ..Default::default() };
        let res = covering(&sys, &opts).unwrap();
        assert!(!res.certified);
        assert!(res.failure.unwrap().contains("max_grid_size"));
    }

    #[test]
    fn fixed_mode_is_not_certified() {
        let sys = x1_on_circle();
        let res = covering_fixed(&sys, 0.1, 0.3, &CoveringOptions::default()).unwrap();
        assert!(!res.certified);
        assert_eq!(res.epsilon, 0.3);
        let a = audit(&sys, &res).unwrap();
        assert!(a.points_on_grid && a.points_in_relaxation);
    }
}
