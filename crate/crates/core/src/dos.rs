//! Spectral measure of `P(D)` against a pair of fields, shell estimates of its
//! density, power-law fits, and DoS envelopes `psi` derived from a symbol.
//!
//! `(E(lambda) u, v) = L^{-d} sum_{P(xi_k) <= lambda} Re(u^_k conj(v^_k))`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::SpectralField;
use crate::fit::fit_loglog;
use crate::symbols::{sphere_area, Symbol, SymbolKind, ValidatedSymbol};

/// Shells narrower than this many lattice modes are widened.
pub const MIN_SHELL_MODES: usize = 32;

fn check_pair(sym: &Symbol, u: &SpectralField, v: &SpectralField) -> Result<()> {
    u.same_grid(v)?;
    if u.spec().d() != sym.dim() {
        return Err(Error::DimensionMismatch { expected: sym.dim(), got: u.spec().d() });
    }
    Ok(())
}

/// `(E(lambda) u, v)`: cumulative spectral mass up to level `lambda`.
pub fn spectral_mass(sym: &Symbol, u: &SpectralField, v: &SpectralField, lambda: f64) -> Result<f64> {
    check_pair(sym, u, v)?;
    let p = u.spec().symbol_values(sym)?;
    let (mut re, mut im, mut scale) = (0.0, 0.0, 0.0);
    for ((pk, a), b) in p.iter().zip(u.coeff()).zip(v.coeff()) {
        if *pk <= lambda {
            let z = a * b.conj();
            re += z.re;
            im += z.im;
            scale += a.norm() * b.norm();
        }
    }
    if im.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Inconsistent(format!("spectral mass has imaginary part {im:e} (real part {re:e})")));
    }
    Ok(re / u.spec().volume())
}

/// Mode-sorted spectral measure for repeated level queries.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    levels: Vec<f64>,
    /// `prefix[i]` = mass of the first `i` modes.
    prefix: Vec<f64>,
}

impl SpectralMeasure {
    pub fn new(sym: &Symbol, u: &SpectralField, v: &SpectralField) -> Result<Self> {
        check_pair(sym, u, v)?;
        let p = u.spec().symbol_values(sym)?;
        let vol = u.spec().volume();
        let mut pairs: Vec<(f64, f64)> = p
            .into_iter()
            .zip(u.coeff().iter().zip(v.coeff()))
            .map(|(pk, (a, b))| (pk, (a * b.conj()).re / vol))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut prefix = Vec::with_capacity(pairs.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &(_, w) in &pairs {
            acc += w;
            prefix.push(acc);
        }
        Ok(Self { levels: pairs.into_iter().map(|x| x.0).collect(), prefix })
    }

    fn count_le(&self, lambda: f64) -> usize {
        self.levels.partition_point(|&p| p <= lambda)
    }

    /// Mass of modes with `P <= lambda`.
    pub fn mass(&self, lambda: f64) -> f64 {
        self.prefix[self.count_le(lambda)]
    }

    /// Mass and mode count in `lo < P <= hi`.
    pub fn shell(&self, lo: f64, hi: f64) -> (f64, usize) {
        let a = self.count_le(lo);
        let b = self.count_le(hi);
        (self.prefix[b] - self.prefix[a], b.saturating_sub(a))
    }

    /// Smallest positive lattice level.
    pub fn gap(&self) -> f64 {
        self.levels.iter().copied().find(|&p| p > 0.0).unwrap_or(f64::INFINITY)
    }

    pub fn max_level(&self) -> f64 {
        self.levels.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShellEstimate {
    Value { value: f64, mode_count: usize },
    Empty,
}

impl ShellEstimate {
    pub fn value(&self) -> Option<f64> {
        match self {
            ShellEstimate::Value { value, .. } => Some(*value),
            ShellEstimate::Empty => None,
        }
    }

    pub fn mode_count(&self) -> usize {
        match self {
            ShellEstimate::Value { mode_count, .. } => *mode_count,
            ShellEstimate::Empty => 0,
        }
    }
}

/// `((E(lambda + delta) u, v) - (E(lambda) u, v)) / delta`, or `Empty` when no
/// lattice mode falls in the shell.
pub fn shell_dos(sym: &Symbol, u: &SpectralField, v: &SpectralField, lambda: f64, delta: f64) -> Result<ShellEstimate> {
    if !(lambda > 0.0 && delta > 0.0) {
        return Err(Error::Domain(format!("shell needs lambda > 0 and delta > 0 (got {lambda}, {delta})")));
    }
    let m = SpectralMeasure::new(sym, u, v)?;
    Ok(shell_from_measure(&m, lambda, lambda + delta))
}

fn shell_from_measure(m: &SpectralMeasure, lo: f64, hi: f64) -> ShellEstimate {
    let (mass, count) = m.shell(lo, hi);
    if count == 0 {
        ShellEstimate::Empty
    } else {
        ShellEstimate::Value { value: mass / (hi - lo), mode_count: count }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DosSample {
    /// Shell center.
    pub lambda: f64,
    pub delta: f64,
    /// `None` for an empty shell.
    pub value: Option<f64>,
    pub mode_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DosSamples {
    pub samples: Vec<DosSample>,
}

impl DosSamples {
    pub fn lambdas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.lambda).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["lambda", "delta", "value", "mode_count"])?;
        for s in &self.samples {
            w.write_record([
                format!("{:e}", s.lambda),
                format!("{:e}", s.delta),
                s.value.map(|v| format!("{v:e}")).unwrap_or_default(),
                s.mode_count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut samples = Vec::new();
        for rec in r.deserialize() {
            samples.push(rec?);
        }
        Ok(Self { samples })
    }
}

/// Shell estimates centered at each `lambda`: the shell is
/// `(lambda - delta/2, lambda + delta/2]` with `delta` starting at `lambda/10`
/// and doubling until it holds [`MIN_SHELL_MODES`] modes (capped at `2 lambda`).
pub fn dos_samples(sym: &Symbol, u: &SpectralField, v: &SpectralField, lambdas: &[f64]) -> Result<DosSamples> {
    let m = SpectralMeasure::new(sym, u, v)?;
    Ok(dos_samples_from_measure(&m, lambdas))
}

pub fn dos_samples_from_measure(m: &SpectralMeasure, lambdas: &[f64]) -> DosSamples {
    let samples = lambdas
        .iter()
        .filter(|l| **l > 0.0)
        .map(|&lambda| {
            let mut delta = lambda / 10.0;
            loop {
                let (_, count) = m.shell(lambda - delta / 2.0, lambda + delta / 2.0);
                if count >= MIN_SHELL_MODES || delta >= 2.0 * lambda {
                    break;
                }
                delta = (2.0 * delta).min(2.0 * lambda);
            }
            let est = shell_from_measure(m, lambda - delta / 2.0, lambda + delta / 2.0);
            DosSample { lambda, delta, value: est.value(), mode_count: est.mode_count() }
        })
        .collect();
    DosSamples { samples }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub c1: f64,
    pub alpha: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares of `ln value` on `ln lambda` over nonempty positive samples
/// with `lo <= lambda <= hi`.
pub fn fit_power_law(samples: &DosSamples, window: (f64, f64)) -> Result<PowerLawFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples
        .samples
        .iter()
        .filter(|s| s.lambda >= window.0 && s.lambda <= window.1)
        .filter_map(|s| s.value.filter(|v| *v > 0.0).map(|v| (s.lambda, v)))
        .unzip();
    let f = fit_loglog(&xs, &ys, 5)?;
    Ok(PowerLawFit { c1: f.intercept.exp(), alpha: f.slope, r2: f.r2, points: f.points })
}

/// Default fit window `(4 lambda_1, r)` avoiding the sparse lowest lattice levels.
pub fn default_fit_window(m: &SpectralMeasure, r: f64) -> (f64, f64) {
    (4.0 * m.gap(), r)
}

/// DoS exponent `-gamma1/gamma2 + (d-1)/(gamma1+1)`.
pub fn theoretical_alpha(gamma1: f64, gamma2: f64, d: usize) -> f64 {
    -gamma1 / gamma2 + (d as f64 - 1.0) / (gamma1 + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EnvelopeForm {
    PowerLaw {
        c1: f64,
        alpha: f64,
    },
    /// Piecewise-linear `psi` through the nodes. Repeated abscissae encode jumps.
    Tabulated {
        lambdas: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DosEnvelope {
    form: EnvelopeForm,
    r: f64,
    norm_pair: String,
    /// Cumulative integral at each tabulated node.
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl DosEnvelope {
    pub fn power_law(c1: f64, alpha: f64, r: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(Error::InvalidParameter(format!("C1 must be positive, got {c1}")));
        }
        if !(alpha > -1.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must exceed -1 for integrability, got {alpha}")));
        }
        check_r(r)?;
        Ok(Self { form: EnvelopeForm::PowerLaw { c1, alpha }, r, norm_pair: "L1xL1".into(), cumulative: Vec::new() })
    }

    /// Nodes must start at 0, be nondecreasing, and carry nonnegative values;
    /// `r` is the last node. Past `r`, `psi` is continued by its last value.
    pub fn tabulated(lambdas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if lambdas.len() != values.len() || lambdas.len() < 2 {
            return Err(Error::InvalidParameter(
                "tabulated envelope needs at least two (lambda, psi) nodes of equal count".into(),
            ));
        }
        if lambdas[0] != 0.0 {
            return Err(Error::InvalidParameter("first node must be lambda = 0".into()));
        }
        if lambdas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("nodes must be nondecreasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("psi values must be finite and >= 0".into()));
        }
        let r = *lambdas.last().unwrap();
        check_r(r)?;
        let mut cumulative = Vec::with_capacity(lambdas.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 1..lambdas.len() {
            acc += 0.5 * (values[i] + values[i - 1]) * (lambdas[i] - lambdas[i - 1]);
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::InvalidParameter("psi vanishes identically".into()));
        }
        Ok(Self { form: EnvelopeForm::Tabulated { lambdas, values }, r, norm_pair: "L1xL1".into(), cumulative })
    }

    /// Samples a power law on `nodes` equally spaced points of `[0, r]`
    /// (the value at 0 is taken from the first positive node for `alpha < 0`).
    pub fn tabulate_power_law(c1: f64, alpha: f64, r: f64, nodes: usize) -> Result<Self> {
        let lam: Vec<f64> = (0..nodes).map(|i| r * i as f64 / (nodes - 1) as f64).collect();
        let vals = lam
            .iter()
            .map(|&l| {
                let l = if l == 0.0 && alpha < 0.0 { lam[1] } else { l };
                c1 * l.powf(alpha)
            })
            .collect();
        Self::tabulated(lam, vals)
    }

    pub fn form(&self) -> &EnvelopeForm {
        &self.form
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn norm_pair(&self) -> &str {
        &self.norm_pair
    }

    pub fn as_power_law(&self) -> Option<(f64, f64)> {
        match self.form {
            EnvelopeForm::PowerLaw { c1, alpha } => Some((c1, alpha)),
            EnvelopeForm::Tabulated { .. } => None,
        }
    }

    /// `psi(lambda)` for `lambda >= 0`; tabulated envelopes are continued
    /// by their last value beyond `r`.
    pub fn psi(&self, lambda: f64) -> f64 {
        match &self.form {
            EnvelopeForm::PowerLaw { c1, alpha } => {
                if lambda <= 0.0 {
                    if *alpha < 0.0 {
                        f64::INFINITY
                    } else if *alpha == 0.0 {
                        *c1
                    } else {
                        0.0
                    }
                } else {
                    c1 * lambda.powf(*alpha)
                }
            }
            EnvelopeForm::Tabulated { lambdas, values } => {
                if lambda >= self.r {
                    return *values.last().unwrap();
                }
                // last segment with left node <= lambda (right-continuous at jumps)
                let i = lambdas.partition_point(|&x| x <= lambda).max(1) - 1;
                let (x0, x1) = (lambdas[i], lambdas[i + 1]);
                if x1 == x0 {
                    return values[i + 1];
                }
                let t = (lambda - x0) / (x1 - x0);
                values[i] + t * (values[i + 1] - values[i])
            }
        }
    }

    /// `Psi(rho) = int_0^rho psi`, exact for both forms (trapezoid is exact on
    /// piecewise-linear data), continued past `r` like [`psi`](Self::psi).
    pub fn cumulative(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        match &self.form {
            EnvelopeForm::PowerLaw { c1, alpha } => c1 * rho.powf(alpha + 1.0) / (alpha + 1.0),
            EnvelopeForm::Tabulated { lambdas, values } => {
                if rho >= self.r {
                    return self.cumulative.last().unwrap() + values.last().unwrap() * (rho - self.r);
                }
                let i = lambdas.partition_point(|&x| x <= rho).max(1) - 1;
                let x0 = lambdas[i];
                let p0 = if lambdas[i + 1] == x0 { values[i + 1] } else { values[i] };
                let p = self.psi(rho);
                self.cumulative[i] + 0.5 * (p0 + p) * (rho - x0)
            }
        }
    }

    /// `g(rho) = Psi(rho) + rho psi(rho)`.
    pub fn g(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        self.cumulative(rho) + rho * self.psi(rho)
    }

    /// SHA-256 over a canonical text form of the envelope.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        match &self.form {
            EnvelopeForm::PowerLaw { c1, alpha } => {
                let _ = write!(s, "power-law;c1={c1:e};alpha={alpha:e}");
            }
            EnvelopeForm::Tabulated { lambdas, values } => {
                s.push_str("tabulated");
                for (l, v) in lambdas.iter().zip(values) {
                    let _ = write!(s, ";{l:e},{v:e}");
                }
            }
        }
        let _ = write!(s, ";r={:e};norms={}", self.r, self.norm_pair);
        hex::encode(Sha256::digest(s.as_bytes()))
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("validity radius must be positive, got {r}")));
    }
    Ok(())
}

/// Power-law envelope `psi = C1 lambda^alpha` on `(0, r)` with `L1 x L1` norms.
///
/// The Laplacian and fractional Laplacian use exact sphere geometry,
/// `C1 = (2 pi)^{-d} |S^{d-1}| / (2p)`. Other symbols go through the
/// conservative chain `|grad P|^{-1} <= C |xi|^{-gamma1}` on `{P = lambda}`,
/// giving `C1 = (2 pi)^{-d} C^{2 + |gamma1|/gamma2}`; when `gamma1 < 0` this
/// needs `gamma2 = gamma1 + 1` and is refused otherwise.
pub fn envelope_from_symbol(vs: &ValidatedSymbol, r: f64) -> Result<DosEnvelope> {
    let sym = vs.symbol();
    let d = sym.dim();
    let (g1, g2) = (sym.gamma1(), sym.gamma2());
    let alpha = theoretical_alpha(g1, g2, d);
    let two_pi_d = (2.0 * PI).powi(-(d as i32));
    let c1 = match sym.kind() {
        SymbolKind::Laplacian => two_pi_d * sphere_area(d) / 2.0,
        SymbolKind::Fractional { p } => two_pi_d * sphere_area(d) / (2.0 * p),
        _ => {
            if g1 < 0.0 && (g2 - (g1 + 1.0)).abs() > 1e-12 {
                return Err(Error::Refused(format!(
                    "`{}`: gamma1 < 0 with gamma2 != gamma1 + 1 gives no power-law DoS bound",
                    sym.name()
                )));
            }
            two_pi_d * vs.c_struct().powf(2.0 + g1.abs() / g2)
        }
    };
    if !(alpha > -1.0) {
        return Err(Error::Refused(format!("`{}`: DoS exponent {alpha} is not integrable at 0", sym.name())));
    }
    DosEnvelope::power_law(c1, alpha, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_cosine_mode, make_gaussian, GridSpec};
    use crate::fit::log_space;

    fn gaussian(d: usize, n: usize, l: f64, sigma: f64) -> SpectralField {
        make_gaussian(GridSpec::new(d, n, l).unwrap(), sigma).unwrap()
    }

    #[test]
    fn full_mass_is_plancherel() {
        let u = gaussian(2, 64, 12.0, 1.0);
        let sym = Symbol::laplacian(2).unwrap();
        let m = spectral_mass(&sym, &u, &u, f64::INFINITY).unwrap();
        assert!((m - u.norms().l2sq).abs() < 1e-10 * m);
    }

    #[test]
    fn zero_level_mass() {
        let spec = GridSpec::new(1, 32, 5.0).unwrap();
        let sym = Symbol::laplacian(1).unwrap();
        let s = make_cosine_mode(spec, &[3]).unwrap();
        assert!(spectral_mass(&sym, &s, &s, 0.0).unwrap().abs() < 1e-12);
        let c = SpectralField::from_phys(spec, vec![1.5; 32]).unwrap();
        let m = spectral_mass(&sym, &c, &c, 0.0).unwrap();
        assert!((m - 2.25 * 5.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = gaussian(1, 32, 12.0, 1.0);
        let b = gaussian(1, 64, 12.0, 1.0);
        let sym = Symbol::laplacian(1).unwrap();
        assert!(matches!(spectral_mass(&sym, &a, &b, 1.0), Err(Error::GridMismatch(_))));
        let sym2 = Symbol::laplacian(2).unwrap();
        assert!(spectral_mass(&sym2, &a, &a, 1.0).is_err());
    }

    #[test]
    fn constant_field_has_no_shell_mass() {
        let spec = GridSpec::new(2, 16, 4.0).unwrap();
        let c = SpectralField::from_phys(spec, vec![2.0; 256]).unwrap();
        let sym = Symbol::laplacian(2).unwrap();
        for lam in [0.1, 1.0, 10.0] {
            match shell_dos(&sym, &c, &c, lam, lam).unwrap() {
                ShellEstimate::Value { value, .. } => assert!(value.abs() < 1e-12),
                ShellEstimate::Empty => {}
            }
        }
    }

    #[test]
    fn empty_shell_is_flagged() {
        let spec = GridSpec::new(1, 16, 2.0 * PI).unwrap();
        let sym = Symbol::laplacian(1).unwrap();
        let u = make_cosine_mode(spec, &[1]).unwrap();
        // levels are integers k^2, nothing in (1.2, 1.5]
        assert_eq!(shell_dos(&sym, &u, &u, 1.2, 0.3).unwrap(), ShellEstimate::Empty);
        // mode k = 2 only: u has nothing there
        let e = shell_dos(&sym, &u, &u, 3.5, 1.0).unwrap();
        assert_eq!(e.mode_count(), 2);
        assert!(e.value().unwrap().abs() < 1e-10 * u.norms().l2sq);
    }

    #[test]
    fn shells_telescope() {
        let u = gaussian(2, 64, 15.0, 0.8);
        let sym = Symbol::laplacian(2).unwrap();
        let edges = log_space(0.05, 5.0, 12);
        let mut sum = 0.0;
        for w in edges.windows(2) {
            let e = shell_dos(&sym, &u, &u, w[0], w[1] - w[0]).unwrap();
            sum += e.value().unwrap_or(0.0) * (w[1] - w[0]);
        }
        let direct = spectral_mass(&sym, &u, &u, 5.0).unwrap() - spectral_mass(&sym, &u, &u, 0.05).unwrap();
        assert!((sum - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn measure_is_monotone_for_self_pairing() {
        let u = gaussian(1, 128, 20.0, 1.0);
        let sym = Symbol::quartic(1).unwrap();
        let m = SpectralMeasure::new(&sym, &u, &u).unwrap();
        let mut prev = -1.0;
        for lam in log_space(1e-4, 1e3, 200) {
            let v = m.mass(lam);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn adaptive_shells_reach_min_modes() {
        let u = gaussian(2, 128, 40.0, 0.5);
        let sym = Symbol::laplacian(2).unwrap();
        let s = dos_samples(&sym, &u, &u, &log_space(0.05, 2.0, 10)).unwrap();
        for x in &s.samples {
            assert!(x.mode_count >= MIN_SHELL_MODES || x.delta >= 2.0 * x.lambda);
        }
        assert!(s.samples[0].delta > s.samples[0].lambda / 10.0);
    }

    #[test]
    fn samples_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = DosSamples {
            samples: vec![
                DosSample { lambda: 0.1, delta: 0.01, value: Some(0.5), mode_count: 40 },
                DosSample { lambda: 0.2, delta: 0.4, value: None, mode_count: 0 },
            ],
        };
        let p = dir.path().join("dos.csv");
        s.write_csv(&p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("lambda,delta,value,mode_count\n"));
        assert_eq!(DosSamples::read_csv(&p).unwrap(), s);
    }

    #[test]
    fn fit_power_law_exact() {
        let samples = DosSamples {
            samples: log_space(0.01, 1.0, 15)
                .into_iter()
                .map(|l| DosSample { lambda: l, delta: l / 10.0, value: Some(l.sqrt()), mode_count: 50 })
                .collect(),
        };
        let f = fit_power_law(&samples, (0.01, 1.0)).unwrap();
        assert!((f.alpha - 0.5).abs() < 1e-10);
        assert!((f.c1 - 1.0).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fit_power_law_needs_five_points() {
        let samples = DosSamples {
            samples: (1..=6)
                .map(|i| DosSample {
                    lambda: i as f64,
                    delta: 0.1,
                    value: if i % 2 == 0 { None } else { Some(1.0) },
                    mode_count: 1,
                })
                .collect(),
        };
        assert!(matches!(fit_power_law(&samples, (0.0, 10.0)), Err(Error::InsufficientData { needed: 5, got: 3 })));
    }

    #[test]
    fn theoretical_alpha_examples() {
        for d in 1..=3 {
            assert_eq!(theoretical_alpha(1.0, 2.0, d), d as f64 / 2.0 - 1.0);
            let p = 0.3;
            let a = theoretical_alpha(2.0 * p - 1.0, 2.0 * p, d);
            assert!((a - (d as f64 / (2.0 * p) - 1.0)).abs() < 1e-14);
        }
        assert_eq!(theoretical_alpha(1.0, 2.0, 2), 0.0);
    }

    fn validated(sym: Symbol) -> ValidatedSymbol {
        ValidatedSymbol::validate(sym, 2000, 1).unwrap().0
    }

    #[test]
    fn laplacian_envelopes() {
        let e1 = envelope_from_symbol(&validated(Symbol::laplacian(1).unwrap()), 1.0).unwrap();
        assert_eq!(e1.as_power_law().unwrap().1, -0.5);
        assert!((e1.psi(0.25) - 2.0 / (2.0 * PI)).abs() < 1e-15);
        let e2 = envelope_from_symbol(&validated(Symbol::laplacian(2).unwrap()), 1.0).unwrap();
        let (c1, a) = e2.as_power_law().unwrap();
        assert_eq!(a, 0.0);
        assert!((c1 - PI / (4.0 * PI * PI)).abs() < 1e-16);
        let ef = envelope_from_symbol(&validated(Symbol::fractional(1, 0.5).unwrap()), 1.0).unwrap();
        assert_eq!(ef.as_power_law().unwrap(), (1.0 / PI, 0.0));
    }

    #[test]
    fn chain_envelope_uses_validated_constant() {
        let vs = validated(Symbol::quartic(1).unwrap());
        let e = envelope_from_symbol(&vs, 1.0).unwrap();
        let (c1, a) = e.as_power_law().unwrap();
        assert_eq!(a, -0.75);
        assert!((c1 - vs.c_struct().powf(2.75) / (2.0 * PI)).abs() < 1e-12 * c1);
        // exact quartic DoS in d = 1 is lambda^{-3/4} / (4 pi)
        assert!(c1 >= 1.0 / (4.0 * PI));
    }

    #[test]
    fn tabulated_step_envelope() {
        let e = DosEnvelope::tabulated(vec![0.0, 0.5, 0.5, 1.0], vec![0.0, 0.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.psi(0.25), 0.0);
        assert_eq!(e.psi(0.5), 2.0);
        assert_eq!(e.psi(0.75), 2.0);
        assert_eq!(e.cumulative(0.5), 0.0);
        assert!((e.cumulative(0.75) - 0.5).abs() < 1e-15);
        assert!((e.cumulative(1.0) - 1.0).abs() < 1e-15);
        assert!((e.cumulative(2.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn tabulated_rejects_bad_nodes() {
        assert!(DosEnvelope::tabulated(vec![0.1, 1.0], vec![1.0, 1.0]).is_err());
        assert!(DosEnvelope::tabulated(vec![0.0, 1.0, 0.5], vec![1.0, 1.0, 1.0]).is_err());
        assert!(DosEnvelope::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(DosEnvelope::tabulated(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(DosEnvelope::power_law(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn fingerprint_is_stable_and_distinguishing() {
        let a = DosEnvelope::power_law(1.0, 0.5, 1.0).unwrap();
        let b = DosEnvelope::power_law(1.0, 0.5, 2.0).unwrap();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
