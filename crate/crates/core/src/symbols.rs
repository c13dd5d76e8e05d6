//! Constant-coefficient symbols `P(xi)` and numerical checks of the structural
//! growth/level-set conditions that feed the density-of-states chain.
//!
//! A symbol is `P : R^d -> [0, inf)` with `P(0) = 0`, together with growth
//! exponents `(gamma1, gamma2)` and a structural constant `C` such that
//!
//! 1. `P(0) = 0`,
//! 2. `C^-1 |xi|^(gamma1+1) <= P(xi) <= C |xi|^gamma2`,
//! 3. `|grad P(xi)| >= C^-1 |xi|^gamma1` for `xi != 0`,
//! 4. `H^{d-1}({P = lambda}) <= C lambda^((d-1)/(gamma1+1))`.
//!
//! [`validate_assumption`] checks 1-3 pointwise on random samples and 4 through
//! Monte Carlo level-set areas ([`level_set_area`]) and a log-log exponent fit.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit_loglog, log_space};

/// Points with `|xi|` below this are never sampled (gradient singularities).
pub const SINGULAR_RADIUS: f64 = 1e-9;

const MC_BATCH: usize = 8192;

/// Surface area `|S^{d-1}|` of the unit sphere in `R^d` (`|S^0| = 2`).
pub fn sphere_area(d: usize) -> f64 {
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 2.0) * sphere_area(d - 2),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolKind {
    /// `|xi|^2`
    Laplacian,
    /// `|xi|^(2p)`
    Fractional { p: f64 },
    /// `sum_i xi_i^4`
    Quartic,
    /// `xi^T A xi` for a symmetric row-major `d x d` matrix `A`.
    Quadratic { matrix: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    name: String,
    d: usize,
    kind: SymbolKind,
    gamma1: f64,
    gamma2: f64,
    /// Nominal constant for conditions 2 and 3 (analytic where known).
    c_struct: f64,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (d={})", self.name, self.d)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    Ok(())
}

impl Symbol {
    pub fn laplacian(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self { name: "laplacian".into(), d, kind: SymbolKind::Laplacian, gamma1: 1.0, gamma2: 2.0, c_struct: 1.0 })
    }

    /// `|xi|^(2p)`; the fractional Laplacian of order `p`.
    pub fn fractional(d: usize, p: f64) -> Result<Self> {
        check_dim(d)?;
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("fractional order p must be positive, got {p}")));
        }
        Ok(Self {
            name: format!("fractional:p={p}"),
            d,
            kind: SymbolKind::Fractional { p },
            gamma1: 2.0 * p - 1.0,
            gamma2: 2.0 * p,
            c_struct: 1.0f64.max(1.0 / (2.0 * p)),
        })
    }

    pub fn quartic(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            name: "quartic".into(),
            d,
            kind: SymbolKind::Quartic,
            gamma1: 3.0,
            gamma2: 4.0,
            // sum xi^4 >= |xi|^4 / d and |grad| = 4 (sum xi^6)^(1/2) >= 4 |xi|^3 / d
            c_struct: d as f64,
        })
    }

    /// `sum_i xi_i^2 - xi_1 xi_2` (requires `d >= 2`).
    pub fn anisotropic(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter("anisotropic symbol needs d >= 2".into()));
        }
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = 1.0;
        }
        m[1] = -0.5;
        m[d] = -0.5;
        let mut s = Self::quadratic_form(d, m)?;
        s.name = "aniso".into();
        Ok(s)
    }

    /// `xi^T A xi` for a symmetric matrix (row-major). A singular or
    /// indefinite `A` is accepted here; validation will reject it.
    pub fn quadratic_form(d: usize, matrix: Vec<f64>) -> Result<Self> {
        check_dim(d)?;
        if matrix.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: matrix.len() });
        }
        for i in 0..d {
            for j in 0..i {
                if (matrix[i * d + j] - matrix[j * d + i]).abs() > 1e-14 {
                    return Err(Error::InvalidParameter("matrix must be symmetric".into()));
                }
            }
        }
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &matrix)).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // P in [lo |xi|^2, hi |xi|^2], |grad P| = 2|A xi| >= 2 lo |xi|
        let c = if lo > 0.0 { (1.0 / lo).max(hi).max(1.0 / (2.0 * lo)) } else { f64::INFINITY };
        Ok(Self {
            name: "quadratic".into(),
            d,
            kind: SymbolKind::Quadratic { matrix },
            gamma1: 1.0,
            gamma2: 2.0,
            c_struct: c,
        })
    }

    /// Parses the catalog names `laplacian`, `fractional:p=<p>`, `quartic`, `aniso`.
    pub fn from_name(name: &str, d: usize) -> Result<Self> {
        let name = name.trim();
        match name {
            "laplacian" => Self::laplacian(d),
            "quartic" => Self::quartic(d),
            "aniso" => Self::anisotropic(d),
            _ => {
                if let Some(rest) = name.strip_prefix("fractional:") {
                    let p = rest
                        .strip_prefix("p=")
                        .and_then(|v| v.parse::<f64>().ok())
                        .ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
                    Self::fractional(d, p)
                } else {
                    Err(Error::UnknownSymbol(name.to_string()))
                }
            }
        }
    }

    /// The four catalog symbols in dimension `d` (the anisotropic one only for `d >= 2`).
    pub fn catalog(d: usize, fractional_p: f64) -> Result<Vec<Self>> {
        let mut v = vec![Self::laplacian(d)?, Self::fractional(d, fractional_p)?, Self::quartic(d)?];
        if d >= 2 {
            v.push(Self::anisotropic(d)?);
        }
        Ok(v)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    /// Nominal pointwise constant (conditions 2-3); infinite for degenerate forms.
    pub fn c_struct(&self) -> f64 {
        self.c_struct
    }

    /// Homogeneity degree `m` with `P(s xi) = s^m P(xi)`.
    pub fn degree(&self) -> f64 {
        match self.kind {
            SymbolKind::Laplacian | SymbolKind::Quadratic { .. } => 2.0,
            SymbolKind::Fractional { p } => 2.0 * p,
            SymbolKind::Quartic => 4.0,
        }
    }

    /// True when `P` is a polynomial (smooth at the origin).
    pub fn is_polynomial(&self) -> bool {
        match self.kind {
            SymbolKind::Fractional { p } => p.fract() == 0.0,
            _ => true,
        }
    }

    fn check_len(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: xi.len() });
        }
        Ok(())
    }

    /// `P(xi)`.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        self.check_len(xi)?;
        Ok(self.eval_unchecked(xi))
    }

    /// `P(xi)` without the length check, for inner loops.
    #[inline]
    pub fn eval_unchecked(&self, xi: &[f64]) -> f64 {
        match &self.kind {
            SymbolKind::Laplacian => xi.iter().map(|x| x * x).sum(),
            SymbolKind::Fractional { p } => {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                if r2 == 0.0 {
                    0.0
                } else {
                    r2.powf(*p)
                }
            }
            SymbolKind::Quartic => xi.iter().map(|x| (x * x) * (x * x)).sum(),
            SymbolKind::Quadratic { matrix } => {
                let d = self.d;
                let mut s = 0.0;
                for i in 0..d {
                    let row = &matrix[i * d..(i + 1) * d];
                    let ai: f64 = row.iter().zip(xi).map(|(a, x)| a * x).sum();
                    s += xi[i] * ai;
                }
                s
            }
        }
    }

    /// `grad P(xi)`.
    pub fn grad(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xi)?;
        let r2: f64 = xi.iter().map(|x| x * x).sum();
        match &self.kind {
            SymbolKind::Laplacian => Ok(xi.iter().map(|x| 2.0 * x).collect()),
            SymbolKind::Fractional { p } => {
                if r2 == 0.0 {
                    if *p < 1.0 {
                        return Err(Error::SingularPoint { symbol: self.name.clone() });
                    }
                    return Ok(vec![0.0; self.d]);
                }
                let f = 2.0 * p * r2.powf(p - 1.0);
                Ok(xi.iter().map(|x| f * x).collect())
            }
            SymbolKind::Quartic => Ok(xi.iter().map(|x| 4.0 * x * x * x).collect()),
            SymbolKind::Quadratic { matrix } => {
                let d = self.d;
                Ok((0..d)
                    .map(|i| 2.0 * matrix[i * d..(i + 1) * d].iter().zip(xi).map(|(a, x)| a * x).sum::<f64>())
                    .collect())
            }
        }
    }

    fn grad_norm(&self, xi: &[f64]) -> f64 {
        match self.grad(xi) {
            Ok(g) => g.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Err(_) => f64::NAN,
        }
    }
}

/// Free-function form of [`Symbol::eval`].
pub fn eval_symbol(sym: &Symbol, xi: &[f64]) -> Result<f64> {
    sym.eval(xi)
}

/// Free-function form of [`Symbol::grad`].
pub fn eval_grad(sym: &Symbol, xi: &[f64]) -> Result<Vec<f64>> {
    sym.grad(xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaEstimate {
    pub area: f64,
    pub std_error: f64,
    pub hits: usize,
    pub samples: usize,
}

/// Monte Carlo estimate of `H^{d-1}({P = lambda})` through the coarea identity
///
/// `area ~ (1/delta) * integral over {lambda < P <= lambda + delta} of |grad P| d xi`,
///
/// sampled uniformly over the box `|xi_i| <= R` with `R` from the lower growth bound.
pub fn level_set_area(sym: &Symbol, lambda: f64, delta: f64, n: usize, seed: u64) -> Result<AreaEstimate> {
    if !(lambda > 0.0 && delta > 0.0) {
        return Err(Error::Domain(format!("level set needs lambda > 0 and delta > 0 (got {lambda}, {delta})")));
    }
    let c = sym.c_struct();
    if !c.is_finite() {
        return Err(Error::Refused(format!(
            "`{}` has no finite lower growth constant; its sublevel sets are unbounded",
            sym.name()
        )));
    }
    let radius = (c * (lambda + delta)).powf(1.0 / (sym.gamma1() + 1.0));
    let d = sym.dim();
    let volume = (2.0 * radius).powi(d as i32);
    let batches = n.div_ceil(MC_BATCH);

    let partials: Vec<(f64, f64, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BATCH.min(n - b * MC_BATCH);
            let mut xi = vec![0.0; d];
            let (mut s1, mut s2, mut hits) = (0.0, 0.0, 0usize);
            for _ in 0..count {
                for x in xi.iter_mut() {
                    *x = radius * (2.0 * rng.random::<f64>() - 1.0);
                }
                let p = sym.eval_unchecked(&xi);
                if p > lambda && p <= lambda + delta {
                    let g = sym.grad_norm(&xi);
                    if g.is_finite() {
                        s1 += g;
                        s2 += g * g;
                        hits += 1;
                    }
                }
            }
            (s1, s2, hits)
        })
        .collect();

    let (mut s1, mut s2, mut hits) = (0.0, 0.0, 0usize);
    for (a, b, h) in partials {
        s1 += a;
        s2 += b;
        hits += h;
    }
    if hits == 0 {
        return Err(Error::InsufficientSamples { samples: n });
    }
    let nf = n as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0);
    Ok(AreaEstimate { area: volume * mean / delta, std_error: volume * (var / nf).sqrt() / delta, hits, samples: n })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Witness {
    Point(Vec<f64>),
    Level(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    /// 1..=4
    pub condition: u8,
    pub label: String,
    pub passed: bool,
    /// Smallest constant the sample forces on this condition.
    pub worst_ratio: f64,
    pub witness: Option<Witness>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaExponentFit {
    pub lambdas: Vec<f64>,
    pub areas: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub exponent: f64,
    pub bound: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub symbol: String,
    pub d: usize,
    pub condition_results: Vec<ConditionResult>,
    pub area_exponent_fit: Option<AreaExponentFit>,
    pub sample_budget: usize,
    pub seed: u64,
    /// Max of the worst-case ratios, inflated by 1.1.
    pub c_struct_estimate: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.condition_results.iter().all(|c| c.passed)
    }

    pub fn condition(&self, k: u8) -> &ConditionResult {
        &self.condition_results[(k - 1) as usize]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    /// Worst-case ratios above this count as violations.
    pub max_constant: f64,
    pub exponent_margin: f64,
    pub lambda_range: (f64, f64),
    pub lambda_count: usize,
    /// Monte Carlo samples per level = `area_factor * budget`.
    pub area_factor: usize,
    pub inflation: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            max_constant: 1e6,
            exponent_margin: 0.05,
            lambda_range: (1e-2, 1e2),
            lambda_count: 9,
            area_factor: 20,
            inflation: 1.1,
        }
    }
}

struct Worst {
    ratio: f64,
    at: Vec<f64>,
}

impl Worst {
    fn new() -> Self {
        Self { ratio: 0.0, at: Vec::new() }
    }

    fn offer(&mut self, ratio: f64, xi: &[f64]) {
        let r = if ratio.is_nan() { f64::INFINITY } else { ratio };
        if r > self.ratio || self.at.is_empty() {
            self.ratio = r;
            self.at = xi.to_vec();
        }
    }
}

fn probe_points(d: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[i] = s;
            dirs.push(v);
        }
        for j in (i + 1)..d {
            for s in [1.0, -1.0] {
                let mut v = vec![0.0; d];
                v[i] = std::f64::consts::FRAC_1_SQRT_2;
                v[j] = s * std::f64::consts::FRAC_1_SQRT_2;
                dirs.push(v);
            }
        }
    }
    let mut out = Vec::new();
    for e in -3..=3 {
        let r = 10f64.powi(e);
        for v in &dirs {
            out.push(v.iter().map(|x| x * r).collect());
        }
    }
    out
}

pub fn validate_assumption(sym: &Symbol, budget: usize, seed: u64) -> Result<ValidationReport> {
    validate_assumption_with(sym, budget, seed, &ValidationOptions::default())
}

/// Samples `budget` points log-uniformly in `|xi| in [1e-3, 1e3]` (uniform
/// direction) plus fixed axis/diagonal probes, checks conditions 1-3 at each,
/// and fits the growth exponent of Monte Carlo level-set areas for condition 4.
/// Violations are recorded in the report; the function itself only fails on
/// bad arguments.
pub fn validate_assumption_with(
    sym: &Symbol,
    budget: usize,
    seed: u64,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    if budget < 1000 {
        return Err(Error::InvalidParameter(format!("validation budget must be >= 1000, got {budget}")));
    }
    let d = sym.dim();
    let (g1, g2) = (sym.gamma1(), sym.gamma2());

    let origin = vec![0.0; d];
    let p0 = sym.eval_unchecked(&origin);
    let cond1 = ConditionResult {
        condition: 1,
        label: "P(0) = 0".into(),
        passed: p0 == 0.0,
        worst_ratio: p0.abs(),
        witness: (p0 != 0.0).then(|| Witness::Point(origin.clone())),
        note: None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = probe_points(d);
    for _ in 0..budget {
        let r = 10f64.powf(rng.random_range(-3.0..3.0));
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x *= r / norm);
        points.push(v);
    }

    let mut lower = Worst::new();
    let mut upper = Worst::new();
    let mut gradw = Worst::new();
    for xi in &points {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r < SINGULAR_RADIUS {
            continue;
        }
        let p = sym.eval_unchecked(xi);
        lower.offer(r.powf(g1 + 1.0) / p, xi);
        upper.offer(p / r.powf(g2), xi);
        gradw.offer(r.powf(g1) / sym.grad_norm(xi), xi);
    }
    let judge = |w: &Worst, condition: u8, label: &str| {
        let passed = w.ratio.is_finite() && w.ratio <= opts.max_constant;
        ConditionResult {
            condition,
            label: label.into(),
            passed,
            worst_ratio: w.ratio,
            witness: Some(Witness::Point(w.at.clone())),
            note: None,
        }
    };
    let lower_res = judge(&lower, 2, "lower growth C^-1 |xi|^(g1+1) <= P");
    let upper_res = judge(&upper, 2, "upper growth P <= C |xi|^g2");
    let mut cond2 = if !lower_res.passed {
        lower_res.clone()
    } else if !upper_res.passed {
        upper_res.clone()
    } else if lower_res.worst_ratio >= upper_res.worst_ratio {
        lower_res.clone()
    } else {
        upper_res.clone()
    };
    cond2.label = format!("growth bounds ({})", cond2.label);
    let cond3 = judge(&gradw, 3, "gradient bound |grad P| >= C^-1 |xi|^g1");

    let area_exp = (d as f64 - 1.0) / (g1 + 1.0);
    let (cond4, fit) = if !lower_res.passed || !sym.c_struct().is_finite() {
        (
            ConditionResult {
                condition: 4,
                label: "level-set area growth".into(),
                passed: false,
                worst_ratio: f64::INFINITY,
                witness: None,
                note: Some("sublevel sets are unbounded; areas not estimated".into()),
            },
            None,
        )
    } else {
        level_area_condition(sym, budget, seed, opts, area_exp)?
    };

    let worst = [lower_res.worst_ratio, upper_res.worst_ratio, cond3.worst_ratio, cond4.worst_ratio]
        .into_iter()
        .fold(1.0f64, f64::max);

    Ok(ValidationReport {
        symbol: sym.name().to_string(),
        d,
        condition_results: vec![cond1, cond2, cond3, cond4],
        area_exponent_fit: fit,
        sample_budget: budget,
        seed,
        c_struct_estimate: opts.inflation * worst,
    })
}

fn level_area_condition(
    sym: &Symbol,
    budget: usize,
    seed: u64,
    opts: &ValidationOptions,
    area_exp: f64,
) -> Result<(ConditionResult, Option<AreaExponentFit>)> {
    let lambdas = log_space(opts.lambda_range.0, opts.lambda_range.1, opts.lambda_count);
    let n = budget * opts.area_factor;
    let mut areas = Vec::with_capacity(lambdas.len());
    let mut errs = Vec::with_capacity(lambdas.len());
    let mut worst = 0.0f64;
    let mut worst_at = lambdas[0];
    for (i, &lam) in lambdas.iter().enumerate() {
        let s = seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1));
        let est = level_set_area(sym, lam, lam / 100.0, n, s)?;
        let ratio = est.area / lam.powf(area_exp);
        if ratio > worst {
            worst = ratio;
            worst_at = lam;
        }
        areas.push(est.area);
        errs.push(est.std_error);
    }
    let f = fit_loglog(&lambdas, &areas, 3)?;
    let bound = area_exp + opts.exponent_margin;
    let passed = f.slope <= bound;
    let (slope_lambda, slope_witness) = (worst_at, f.slope);
    Ok((
        ConditionResult {
            condition: 4,
            label: "level-set area growth".into(),
            passed,
            worst_ratio: worst,
            witness: (!passed).then_some(Witness::Level(slope_lambda)),
            note: Some(format!("fitted exponent {slope_witness:.4} vs bound {bound:.4}")),
        },
        Some(AreaExponentFit { lambdas, areas, std_errors: errs, exponent: f.slope, bound, r2: f.r2 }),
    ))
}

/// A symbol whose structural conditions passed validation, carrying the
/// empirically calibrated constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSymbol {
    symbol: Symbol,
    c_struct: f64,
}

impl ValidatedSymbol {
    pub fn new(symbol: Symbol, report: &ValidationReport) -> Result<Self> {
        if report.symbol != symbol.name() || report.d != symbol.dim() {
            return Err(Error::InvalidParameter(format!(
                "report is for `{}` (d={}), not `{}` (d={})",
                report.symbol,
                report.d,
                symbol.name(),
                symbol.dim()
            )));
        }
        if !report.passed() {
            let failed: Vec<String> = report
                .condition_results
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} ({})", c.condition, c.label))
                .collect();
            return Err(Error::Refused(format!("`{}` failed validation: {}", symbol.name(), failed.join(", "))));
        }
        Ok(Self { c_struct: report.c_struct_estimate, symbol })
    }

    /// Runs [`validate_assumption`] and wraps the symbol on success.
    pub fn validate(symbol: Symbol, budget: usize, seed: u64) -> Result<(Self, ValidationReport)> {
        let report = validate_assumption(&symbol, budget, seed)?;
        Ok((Self::new(symbol, &report)?, report))
    }

    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    pub fn c_struct(&self) -> f64 {
        self.c_struct
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn eval_examples() {
        let lap = Symbol::laplacian(2).unwrap();
        assert_eq!(lap.eval(&[3.0, 4.0]).unwrap(), 25.0);
        let frac = Symbol::fractional(2, 0.5).unwrap();
        assert!((frac.eval(&[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-14);
        let q = Symbol::quartic(2).unwrap();
        assert_eq!(q.eval(&[1.0, 1.0]).unwrap(), 2.0);
        for s in Symbol::catalog(3, 0.3).unwrap() {
            assert_eq!(s.eval(&[0.0; 3]).unwrap(), 0.0);
        }
    }

    #[test]
    fn eval_rejects_wrong_length() {
        let lap = Symbol::laplacian(2).unwrap();
        assert_eq!(lap.eval(&[1.0, 2.0, 3.0]), Err(Error::DimensionMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn grad_examples() {
        let lap = Symbol::laplacian(2).unwrap();
        assert_eq!(lap.grad(&[3.0, 4.0]).unwrap(), vec![6.0, 8.0]);
        let q = Symbol::quartic(2).unwrap();
        assert_eq!(q.grad(&[1.0, 0.0]).unwrap(), vec![4.0, 0.0]);
        let abs = Symbol::fractional(2, 0.5).unwrap();
        let g = abs.grad(&[0.0, 2.0]).unwrap();
        assert!(g[0].abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fractional_grad_is_singular_at_origin() {
        let s = Symbol::fractional(1, 0.5).unwrap();
        assert!(matches!(s.grad(&[0.0]), Err(Error::SingularPoint { .. })));
        assert_eq!(Symbol::laplacian(1).unwrap().grad(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn grad_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..=3 {
            let mut syms = Symbol::catalog(d, 0.35).unwrap();
            syms.push(Symbol::fractional(d, 0.8).unwrap());
            for s in &syms {
                for _ in 0..50 {
                    let mut xi: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0f64)).collect();
                    let mut norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                    // the h^2 truncation term of the difference quotient is
                    // relative O(h^2 / |xi|^2); stay where 1e-6 is meaningful
                    if norm < 0.1 {
                        xi.iter_mut().for_each(|x| *x *= 0.1 / norm);
                        norm = 0.1;
                    }
                    let h = 1e-5 * norm.max(1.0);
                    let g = s.grad(&xi).unwrap();
                    let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                    for i in 0..d {
                        let mut a = xi.clone();
                        let mut b = xi.clone();
                        a[i] += h;
                        b[i] -= h;
                        let fd = (s.eval(&a).unwrap() - s.eval(&b).unwrap()) / (2.0 * h);
                        assert!((fd - g[i]).abs() <= 1e-6 * gn.max(1e-12), "{s}: component {i} fd {fd} vs {}", g[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn homogeneity_of_catalog() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=3 {
            for s in Symbol::catalog(d, 0.25).unwrap() {
                let m = s.degree();
                for _ in 0..100 {
                    let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0f64)).collect();
                    let t = 10f64.powf(rng.random_range(-2.0..2.0));
                    let scaled: Vec<f64> = xi.iter().map(|x| x * t).collect();
                    let lhs = s.eval(&scaled).unwrap();
                    let rhs = t.powf(m) * s.eval(&xi).unwrap();
                    assert!(rel(lhs, rhs) < 1e-12, "{s}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for (name, d) in [("laplacian", 1), ("fractional:p=0.5", 2), ("quartic", 3), ("aniso", 2)] {
            assert_eq!(Symbol::from_name(name, d).unwrap().name(), name);
        }
        assert_eq!(Symbol::from_name("biharmonic", 2), Err(Error::UnknownSymbol("biharmonic".into())));
        assert!(Symbol::from_name("fractional:q=1", 2).is_err());
        assert!(Symbol::from_name("aniso", 1).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert_eq!(sphere_area(1), 2.0);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn aniso_constant_from_eigenvalues() {
        // eigenvalues 1/2 and 3/2
        let s = Symbol::anisotropic(2).unwrap();
        assert!((s.c_struct() - 2.0).abs() < 1e-12);
        let degenerate = Symbol::quadratic_form(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(degenerate.c_struct().is_infinite());
    }

    #[test]
    fn level_set_area_sphere_formulas() {
        let lap2 = Symbol::laplacian(2).unwrap();
        let est = level_set_area(&lap2, 4.0, 0.04, 400_000, 1).unwrap();
        assert!((est.area - 4.0 * PI).abs() <= 3.0 * est.std_error, "{est:?}");
        let lap3 = Symbol::laplacian(3).unwrap();
        let est = level_set_area(&lap3, 1.0, 0.01, 400_000, 2).unwrap();
        assert!((est.area - 4.0 * PI).abs() <= 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn level_set_area_is_seed_deterministic() {
        let s = Symbol::quartic(2).unwrap();
        let a = level_set_area(&s, 1.0, 0.01, 50_000, 9).unwrap();
        let b = level_set_area(&s, 1.0, 0.01, 50_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn level_set_area_errors() {
        let s = Symbol::laplacian(2).unwrap();
        assert!(matches!(level_set_area(&s, 1.0, 1e-9, 10, 0), Err(Error::InsufficientSamples { samples: 10 })));
        assert!(level_set_area(&s, -1.0, 0.1, 10, 0).is_err());
        let deg = Symbol::quadratic_form(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(level_set_area(&deg, 1.0, 0.01, 10, 0), Err(Error::Refused(_))));
    }

    #[test]
    fn validation_is_deterministic() {
        let s = Symbol::anisotropic(2).unwrap();
        let a = validate_assumption(&s, 1000, 3).unwrap();
        let b = validate_assumption(&s, 1000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_rejects_small_budget() {
        let s = Symbol::laplacian(2).unwrap();
        assert!(validate_assumption(&s, 999, 0).is_err());
    }

    #[test]
    fn laplacian_passes_with_unit_pointwise_constant() {
        let s = Symbol::laplacian(2).unwrap();
        let r = validate_assumption(&s, 10_000, 1).unwrap();
        assert!(r.passed(), "{r:?}");
        // |xi|^2 / P = 1, P / |xi|^2 = 1, |xi| / (2|xi|) = 1/2
        assert!((r.condition(2).worst_ratio - 1.0).abs() < 1e-12);
        assert!((r.condition(3).worst_ratio - 0.5).abs() < 1e-12);
        let fit = r.area_exponent_fit.as_ref().unwrap();
        assert!((fit.exponent - 0.5).abs() < 0.05, "{fit:?}");
        // circumference 2 pi sqrt(lambda) dominates the constant
        assert!(r.c_struct_estimate > 1.1 * 2.0 * PI * 0.9);
    }

    #[test]
    fn aniso_passes_with_eigenvalue_constant() {
        let s = Symbol::anisotropic(2).unwrap();
        let r = validate_assumption(&s, 10_000, 2).unwrap();
        assert!(r.passed(), "{r:?}");
        // lower-growth ratio |xi|^2/P peaks at 1/lambda_min = 2, upper at 3/2
        assert!(r.condition(2).worst_ratio <= 2.0 + 1e-12);
        assert!(r.condition(2).worst_ratio > 1.9);
        assert!(r.condition(3).worst_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn degenerate_form_fails_on_axis() {
        let s = Symbol::quadratic_form(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = validate_assumption(&s, 1000, 4).unwrap();
        assert!(!r.passed());
        let c2 = r.condition(2);
        assert!(!c2.passed);
        match &c2.witness {
            Some(Witness::Point(xi)) => {
                assert_eq!(xi[0], 0.0);
                assert!(xi[1] != 0.0);
            }
            other => panic!("unexpected witness {other:?}"),
        }
        assert!(ValidatedSymbol::new(s, &r).is_err());
    }

    #[test]
    fn catalog_passes_with_stated_exponents() {
        for d in 1..=3 {
            for s in Symbol::catalog(d, 0.5).unwrap() {
                let r = validate_assumption(&s, 2000, 7).unwrap();
                assert!(r.passed(), "{s}: {r:?}");
                let fit = r.area_exponent_fit.as_ref().unwrap();
                let expected = (d as f64 - 1.0) / (s.gamma1() + 1.0);
                assert!((fit.exponent - expected).abs() < 0.05, "{s}: {fit:?}");
            }
        }
    }
}
