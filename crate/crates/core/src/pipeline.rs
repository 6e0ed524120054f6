//! End-to-end homology of a basic semialgebraic set and the JSON documents
//! read and written by the command line tool.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::condition::ConditionReport;
use crate::covering::{self, CoveringAudit, CoveringOptions, CoveringResult, CoveringStep, KStar};
use crate::error::{Error, Result};
use crate::homology::{homology_of_complex, HomologyGroups};
use crate::nerve::{cech_nerve_with, NerveOptions};
use crate::polysys::{scaled_homogenization, AffineSystem, DegreePattern, HomoPoly, Polynomial};
use crate::serde_ext;

pub const SYSTEM_SCHEMA: &str = "sah-system/1";
pub const RESULT_SCHEMA: &str = "sah-result/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Certified,
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub mode: RunMode,
    pub r_override: Option<f64>,
    pub epsilon_override: Option<f64>,
    /// Nerve dimension cap; homology is reported below it. Defaults to `n + 1`.
    pub max_dim: Option<usize>,
    pub max_iterations: usize,
    pub min_r: f64,
    pub max_grid_size: u128,
    /// Worker threads, 0 for the rayon default.
    pub threads: usize,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        let c = CoveringOptions::default();
        RunOptions {
            mode: RunMode::Certified,
            r_override: None,
            epsilon_override: None,
            max_dim: None,
            max_iterations: c.max_iterations,
            min_r: c.min_r,
            max_grid_size: c.max_grid_size,
            threads: 0,
            seed: 0,
        }
    }
}

impl RunOptions {
    pub fn fixed(r: f64, epsilon: f64) -> Self {
        RunOptions { mode: RunMode::Fixed, r_override: Some(r), epsilon_override: Some(epsilon), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            RunMode::Certified => {
                if self.r_override.is_some() || self.epsilon_override.is_some() {
                    return Err(Error::Options("certified mode does not accept r or epsilon overrides".into()));
                }
            }
            RunMode::Fixed => {
                let (Some(r), Some(eps)) = (self.r_override, self.epsilon_override) else {
                    return Err(Error::Options("fixed mode requires both r and epsilon".into()));
                };
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::Options(format!("r must satisfy 0 < r < 1, got {r}")));
                }
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(Error::Options(format!("epsilon must be positive, got {eps}")));
                }
            }
        }
        if self.max_dim == Some(0) {
            return Err(Error::Options("max_dim must be at least 1".into()));
        }
        if !(self.min_r >= 0.0) {
            return Err(Error::Options(format!("min_r must be non-negative, got {}", self.min_r)));
        }
        Ok(())
    }

    fn covering_options(&self) -> CoveringOptions {
        CoveringOptions { max_iterations: self.max_iterations, min_r: self.min_r, max_grid_size: self.max_grid_size }
    }
}

/// Replaces every strict inequality by its closed version. The note is
/// `Some` when anything changed.
pub fn normalize_strictness(sys: &AffineSystem) -> (AffineSystem, Option<String>) {
    let changed = sys.strict().iter().filter(|&&s| s).count();
    let closed = sys.with_strict(vec![false; sys.strict().len()]);
    let note = (changed > 0).then(|| {
        format!(
            "{changed} strict inequalities relaxed to closed ones; the homotopy type is unchanged provided kappa_* is finite"
        )
    });
    (closed, note)
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub certified: bool,
    /// `None` when no homology claim is made.
    pub homology: Option<HomologyGroups>,
    pub covering: Option<CoveringResult>,
    pub audit: Option<CoveringAudit>,
    /// Condition report at the grid point and subtuple attaining `k_*`.
    pub condition: Option<ConditionReport>,
    pub sphere_dim: usize,
    pub max_dim: usize,
    pub simplex_counts: Vec<usize>,
    pub boundary_ambiguous: usize,
    pub notes: Vec<String>,
    pub wall_time_ms: u64,
}

impl RunResult {
    pub fn betti(&self) -> Option<&[usize]> {
        self.homology.as_ref().map(|h| h.betti.as_slice())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        self.covering.as_ref().map_or(&[], |c| c.points.as_slice())
    }
}

/// Homogenize, cover, build the nerve and compute its homology.
pub fn homology_algorithm(sys: &AffineSystem, opts: &RunOptions) -> Result<RunResult> {
    opts.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::Options(format!("cannot start thread pool: {e}")))?;
    pool.install(|| run(sys, opts))
}

fn run(sys: &AffineSystem, opts: &RunOptions) -> Result<RunResult> {
    let start = Instant::now();
    let n = sys.n();
    let max_dim = opts.max_dim.unwrap_or(n + 1);
    let mut notes = Vec::new();
    let (closed, note) = normalize_strictness(sys);
    notes.extend(note);
    if max_dim < n + 1 {
        notes.push(format!("homology in degrees >= {max_dim} not computed"));
    }

    let mut result = RunResult {
        certified: false,
        homology: None,
        covering: None,
        audit: None,
        condition: None,
        sphere_dim: n,
        max_dim,
        simplex_counts: Vec::new(),
        boundary_ambiguous: 0,
        notes,
        wall_time_ms: 0,
    };

    if closed.equalities().is_empty() && closed.inequalities().is_empty() {
        let mut betti = vec![0; max_dim];
        betti[0] = 1;
        result.certified = true;
        result.homology = Some(HomologyGroups { betti, torsion: vec![Vec::new(); max_dim] });
        result.notes.push("no constraints: the set is all of R^n".into());
        result.wall_time_ms = start.elapsed().as_millis() as u64;
        return Ok(result);
    }

    let h = scaled_homogenization(&closed)?;
    debug_assert_eq!(h.sphere_dim(), n);
    let cov = match opts.mode {
        RunMode::Certified => covering::covering(&h, &opts.covering_options())?,
        RunMode::Fixed => covering::covering_fixed(
            &h,
            opts.r_override.expect("validated"),
            opts.epsilon_override.expect("validated"),
            &opts.covering_options(),
        )?,
    };
    if let Some(w) = &cov.witness {
        let q = h.pattern().q();
        let polys: Vec<HomoPoly> = h
            .equalities()
            .iter()
            .cloned()
            .chain(w.subtuple.indices().iter().map(|&i| h.inequalities()[i].clone()))
            .collect();
        debug_assert_eq!(polys.len(), q + w.subtuple.len());
        result.condition = Some(ConditionReport::compute(&polys, &w.witness, h.max_degree())?);
    }
    let claim = cov.certified || opts.mode == RunMode::Fixed;
    if claim {
        result.audit = Some(covering::audit(&h, &cov)?);
        if cov.points.is_empty() {
            result.homology = Some(HomologyGroups { betti: vec![0; max_dim], torsion: vec![Vec::new(); max_dim] });
            result.notes.push("no grid point passed the relaxation test: the set is reported empty".into());
        } else {
            let nopts = NerveOptions { seed: opts.seed, ..Default::default() };
            let nerve = cech_nerve_with(&cov.points, cov.epsilon, max_dim, &nopts)?;
            if nerve.ambiguous > 0 {
                result.notes.push(format!(
                    "{} enclosing-ball radii within the tie band around epsilon were excluded (boundary-ambiguous)",
                    nerve.ambiguous
                ));
            }
            result.simplex_counts = nerve.complex.counts();
            result.boundary_ambiguous = nerve.ambiguous;
            result.homology = Some(homology_of_complex(&nerve.complex, max_dim));
        }
    }
    if opts.mode == RunMode::Fixed {
        result.notes.push("fixed mode: r and epsilon supplied by the user, result not certified".into());
    }
    if let Some(f) = &cov.failure {
        result.notes.push(format!("covering failed: {f}; no homology claim"));
    }
    result.certified = cov.certified;
    result.covering = Some(cov);
    result.wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(result)
}

/// Controls for [`emit_result`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmitOptions {
    /// Include `wall_time_ms`; without it documents are reproducible byte for byte.
    pub timing: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions { timing: true }
    }
}

#[derive(Serialize)]
struct CoveringDoc<'a> {
    max_degree: u32,
    trace: &'a [CoveringStep],
    witness: &'a Option<KStar>,
    failure: &'a Option<String>,
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    schema: &'static str,
    certified: bool,
    betti: Option<&'a [usize]>,
    torsion: Option<Vec<Vec<Value>>>,
    r: Option<f64>,
    #[serde(serialize_with = "opt_extended")]
    epsilon: Option<f64>,
    #[serde(serialize_with = "opt_extended")]
    k_star: Option<f64>,
    grid_size: Option<String>,
    num_points: usize,
    iterations: usize,
    max_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<u64>,
    sphere_dim: usize,
    simplex_counts: &'a [usize],
    boundary_ambiguous: usize,
    audit: &'a Option<CoveringAudit>,
    condition: &'a Option<ConditionReport>,
    covering: Option<CoveringDoc<'a>>,
    notes: &'a [String],
}

fn opt_extended<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => serde_ext::extended_real::serialize(x, s),
        None => s.serialize_none(),
    }
}

/// The result document as pretty-printed JSON.
pub fn emit_result(res: &RunResult, opts: &EmitOptions) -> String {
    let cov = res.covering.as_ref();
    let torsion = res.homology.as_ref().map(|h| {
        match serde_json::to_value(h).expect("serializable")["torsion"].take() {
            Value::Array(rows) => rows.into_iter().map(|r| r.as_array().cloned().unwrap_or_default()).collect(),
            _ => Vec::new(),
        }
    });
    let doc = ResultDoc {
        schema: RESULT_SCHEMA,
        certified: res.certified,
        betti: res.betti(),
        torsion,
        r: cov.map(|c| c.r_final),
        epsilon: cov.map(|c| c.epsilon),
        k_star: cov.map(|c| c.k_star),
        grid_size: cov.map(|c| c.grid_size.to_str_radix(10)),
        num_points: res.points().len(),
        iterations: cov.map_or(0, |c| c.iterations),
        max_dim: res.max_dim,
        wall_time_ms: opts.timing.then_some(res.wall_time_ms),
        sphere_dim: res.sphere_dim,
        simplex_counts: &res.simplex_counts,
        boundary_ambiguous: res.boundary_ambiguous,
        audit: &res.audit,
        condition: &res.condition,
        covering: cov.map(|c| CoveringDoc { max_degree: c.max_degree, trace: &c.trace, witness: &c.witness, failure: &c.failure }),
        notes: &res.notes,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("serializable");
    out.push('\n');
    out
}

/// Grid size as a big integer, for callers that only have the document.
pub fn parse_grid_size(s: &str) -> Option<BigUint> {
    s.parse().ok()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    schema: String,
    n: usize,
    #[serde(default)]
    equalities: Vec<RawPoly>,
    #[serde(default)]
    inequalities: Vec<RawPoly>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoly {
    degree: Option<u32>,
    strict: Option<bool>,
    terms: Vec<RawTerm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    coeff: Value,
    exponents: Vec<u32>,
}

fn parse_decimal(s: &str) -> Option<f64> {
    let s = s.trim();
    let ok = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'))
        && s.chars().any(|c| c.is_ascii_digit());
    if !ok {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// A coefficient given as a decimal string, a fraction `"p/q"` or a JSON number.
fn parse_coeff(v: &Value, loc: &str) -> Result<f64> {
    let bad = |msg: &str| Error::schema(loc, msg);
    match v {
        Value::Number(x) => x.as_f64().filter(|f| f.is_finite()).ok_or_else(|| bad("coefficient is not a finite number")),
        Value::String(s) => {
            if let Some((p, q)) = s.split_once('/') {
                let p = parse_decimal(p).ok_or_else(|| bad("malformed numerator"))?;
                let q = parse_decimal(q).ok_or_else(|| bad("malformed denominator"))?;
                if q == 0.0 {
                    return Err(bad("zero denominator"));
                }
                Ok(p / q)
            } else {
                parse_decimal(s).ok_or_else(|| bad(&format!("malformed decimal {s:?}")))
            }
        }
        _ => Err(bad("coefficient must be a decimal string or a number")),
    }
}

fn parse_poly(raw: &RawPoly, n: usize, loc: &str, inequality: bool) -> Result<(Polynomial, u32, bool)> {
    if !inequality && raw.strict.is_some() {
        return Err(Error::schema(format!("{loc}.strict"), "equalities have no strictness flag"));
    }
    let mut p = Polynomial::zero(n);
    let mut seen = BTreeSet::new();
    for (t, term) in raw.terms.iter().enumerate() {
        let tloc = format!("{loc}.terms[{t}]");
        if term.exponents.len() != n {
            return Err(Error::schema(
                format!("{tloc}.exponents"),
                format!("exponent vector has length {}, expected n = {n}", term.exponents.len()),
            ));
        }
        if !seen.insert(term.exponents.clone()) {
            return Err(Error::schema(format!("{tloc}.exponents"), "duplicate monomial"));
        }
        let c = parse_coeff(&term.coeff, &format!("{tloc}.coeff"))?;
        p.add_term(term.exponents.clone(), c);
    }
    let natural = raw.terms.iter().map(|t| t.exponents.iter().sum::<u32>()).max().unwrap_or(0).max(1);
    let degree = match raw.degree {
        Some(0) => return Err(Error::schema(format!("{loc}.degree"), "degree must be at least 1")),
        Some(d) if d < natural => {
            return Err(Error::schema(format!("{loc}.degree"), format!("degree {d} is below the total degree {natural}")))
        }
        Some(d) => d,
        None => natural,
    };
    Ok((p, degree, raw.strict.unwrap_or(false)))
}

/// Parses a system document.
pub fn parse_system_str(text: &str) -> Result<AffineSystem> {
    let raw: RawSystem = serde_json::from_str(text)?;
    if raw.schema != SYSTEM_SCHEMA {
        return Err(Error::schema("schema", format!("expected {SYSTEM_SCHEMA:?}, got {:?}", raw.schema)));
    }
    if raw.n == 0 {
        return Err(Error::schema("n", "n must be at least 1"));
    }
    if raw.equalities.len() > raw.n {
        return Err(Error::schema(
            "equalities",
            format!("the algorithm requires q <= n equalities (q = {}, n = {})", raw.equalities.len(), raw.n),
        ));
    }
    let mut eqs = Vec::new();
    let mut ineqs = Vec::new();
    let mut degrees = Vec::new();
    let mut strict = Vec::new();
    for (i, p) in raw.equalities.iter().enumerate() {
        let (poly, d, _) = parse_poly(p, raw.n, &format!("equalities[{i}]"), false)?;
        eqs.push(poly);
        degrees.push(d);
    }
    for (i, p) in raw.inequalities.iter().enumerate() {
        let (poly, d, s) = parse_poly(p, raw.n, &format!("inequalities[{i}]"), true)?;
        ineqs.push(poly);
        degrees.push(d);
        strict.push(s);
    }
    let pattern = DegreePattern::new(degrees, eqs.len())?;
    AffineSystem::new(raw.n, eqs, ineqs, strict, pattern)
}

pub fn parse_system(path: impl AsRef<Path>) -> Result<AffineSystem> {
    parse_system_str(&std::fs::read_to_string(path)?)
}

#[derive(Serialize)]
struct OutTerm {
    coeff: String,
    exponents: Vec<u32>,
}

#[derive(Serialize)]
struct OutPoly {
    degree: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    strict: Option<bool>,
    terms: Vec<OutTerm>,
}

#[derive(Serialize)]
struct OutSystem {
    schema: &'static str,
    n: usize,
    equalities: Vec<OutPoly>,
    inequalities: Vec<OutPoly>,
}

fn out_poly(p: &Polynomial, degree: u32, strict: Option<bool>) -> OutPoly {
    let terms = p.terms().map(|(a, c)| OutTerm { coeff: format!("{c}"), exponents: a.clone() }).collect();
    OutPoly { degree, strict, terms }
}

/// Serializes a system; coefficients are written as shortest round-trip decimals.
pub fn emit_system(sys: &AffineSystem) -> String {
    let degrees = sys.pattern().degrees();
    let q = sys.equalities().len();
    let doc = OutSystem {
        schema: SYSTEM_SCHEMA,
        n: sys.n(),
        equalities: sys.equalities().iter().zip(degrees).map(|(p, &d)| out_poly(p, d, None)).collect(),
        inequalities: sys
            .inequalities()
            .iter()
            .zip(&degrees[q..])
            .zip(sys.strict())
            .map(|((p, &d), &s)| out_poly(p, d, Some(s)))
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("serializable");
    out.push('\n');
    out
}
