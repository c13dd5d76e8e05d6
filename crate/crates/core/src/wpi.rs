//! Weak Poincaré certificates `Var(u) <= C E(u)^{1/p} Phi(u)^{1/q}` built from
//! DoS envelopes, and their evaluation on concrete fields.
//!
//! Everything here works with `a = Var(u)` and `b = ||u||_X ||u||_Y`. Truncating
//! the spectral measure at `rho` gives `E(u) >= h(rho) = rho (a - Psi(rho) b)`;
//! the implicit bound picks `rho` from `Psi(rho) = K a / b`, the explicit one
//! maximizes `h` at `g(rho) = a / b`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dos::{DosEnvelope, EnvelopeForm};
use crate::error::{Error, Result};
use crate::fields::SpectralField;
use crate::fit::log_space;
use crate::symbols::{sphere_area, Symbol};

/// Holds-tolerance of [`check_certificate`].
pub const HOLDS_SLACK: f64 = 1e-6;

const BISECTION_STEPS: usize = 200;

/// `Psi(rho)` for `0 < rho <= r`.
pub fn psi_cumulative(env: &DosEnvelope, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= env.r()) {
        return Err(Error::Domain(format!("rho = {rho} outside (0, {}]", env.r())));
    }
    Ok(env.cumulative(rho))
}

/// `sup { x in (0, r) : Psi(x) <= y }`, with `sup {} = 0`.
pub fn psi_inverse_generalized(env: &DosEnvelope, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("Psi inverse needs y >= 0, got {y}")));
    }
    let r = env.r();
    if y >= env.cumulative(r) {
        return Ok(r);
    }
    if let EnvelopeForm::PowerLaw { c1, alpha } = *env.form() {
        return Ok(((alpha + 1.0) * y / c1).powf(1.0 / (alpha + 1.0)).min(r));
    }
    // invariant: Psi(lo) <= y < Psi(hi)
    let (mut lo, mut hi) = (0.0, r);
    for _ in 0..BISECTION_STEPS {
        if hi - lo <= 1e-13 * r {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if env.cumulative(mid) <= y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImplicitBound {
    pub value: f64,
    /// False when the truncation level reached the edge of `(0, r)`.
    pub valid: bool,
}

/// `(1 - K) Psi^{-1}(K var / (nx ny)) var`, a lower bound on `E(u)`.
pub fn implicit_wpi_bound(env: &DosEnvelope, k: f64, var: f64, nx: f64, ny: f64) -> Result<ImplicitBound> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Domain(format!("K must lie in (0, 1), got {k}")));
    }
    check_ab(var, nx, ny)?;
    if var == 0.0 {
        return Ok(ImplicitBound { value: 0.0, valid: true });
    }
    let y = k * var / (nx * ny);
    let rho = psi_inverse_generalized(env, y)?;
    Ok(ImplicitBound { value: (1.0 - k) * rho * var, valid: y < env.cumulative(env.r()) })
}

fn check_ab(var: f64, nx: f64, ny: f64) -> Result<()> {
    if !(var >= 0.0 && var.is_finite()) {
        return Err(Error::Domain(format!("variance must be finite and >= 0, got {var}")));
    }
    if !(nx > 0.0 && ny > 0.0 && nx.is_finite() && ny.is_finite()) {
        return Err(Error::Domain(format!("norms must be finite and positive, got {nx}, {ny}")));
    }
    Ok(())
}

/// `g = Psi + rho psi` of an envelope.
#[derive(Debug, Clone)]
pub struct GFunction {
    env: DosEnvelope,
}

impl GFunction {
    pub fn new(env: DosEnvelope) -> Self {
        Self { env }
    }

    pub fn envelope(&self) -> &DosEnvelope {
        &self.env
    }

    pub fn eval(&self, rho: f64) -> f64 {
        self.env.g(rho)
    }

    /// Checks that `g` is nondecreasing on a `points`-point log mesh of
    /// `[lo, hi]`, that it is small at `lo`, and that it grows without bound.
    /// Power laws satisfy all three in closed form.
    pub fn check_hypotheses(&self, lo: f64, hi: f64, points: usize) -> Result<()> {
        let values = match self.env.form() {
            EnvelopeForm::PowerLaw { .. } => return Ok(()),
            EnvelopeForm::Tabulated { values, .. } => values,
        };
        let mesh = log_space(lo, hi, points);
        let mut prev = self.eval(mesh[0]);
        for &rho in &mesh[1..] {
            let g = self.eval(rho);
            if g < prev - 1e-12 * prev.abs() {
                return Err(Error::Refused(format!("g decreases near rho = {rho:.6e} ({prev:.6e} -> {g:.6e})")));
            }
            prev = g;
        }
        let g_lo = self.eval(mesh[0]);
        let g_r = self.eval(self.env.r());
        if g_lo > 1e-3 * g_r {
            return Err(Error::Refused(format!(
                "g does not vanish at 0+: g({lo:.3e}) = {g_lo:.3e} vs g(r) = {g_r:.3e}"
            )));
        }
        if *values.last().unwrap() <= 0.0 {
            return Err(Error::Refused("g stays bounded: the envelope vanishes at its last node".into()));
        }
        Ok(())
    }

    /// Default hypothesis mesh: `10^4` points over `[r 1e-8, 10 r]`.
    pub fn check_default(&self) -> Result<()> {
        let r = self.env.r();
        self.check_hypotheses(1e-8 * r, 10.0 * r, 10_000)
    }
}

/// `inf { rho : g(rho) >= y }`; closed form for power laws.
pub fn g_inverse(gf: &GFunction, y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!("g inverse needs y > 0, got {y}")));
    }
    let env = gf.envelope();
    if let EnvelopeForm::PowerLaw { c1, alpha } = *env.form() {
        return Ok(((1.0 + alpha) * y / (c1 * (2.0 + alpha))).powf(1.0 / (1.0 + alpha)));
    }
    let mut hi = env.r();
    while gf.eval(hi) < y {
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(Error::Domain(format!("y = {y:e} lies beyond the range of g")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gf.eval(mid) >= y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Maximum of `h(rho) = rho (a - Psi(rho) b)` over `rho > 0`, attained at
/// `g^{-1}(a / b)`, where it equals `g^{-1}(a/b)^2 psi(g^{-1}(a/b)) b`.
///
/// Tabulated envelopes must pass [`GFunction::check_default`] first.
pub fn explicit_wpi_bound(env: &DosEnvelope, var: f64, nx: f64, ny: f64) -> Result<f64> {
    check_ab(var, nx, ny)?;
    if var == 0.0 {
        return Ok(0.0);
    }
    let gf = GFunction::new(env.clone());
    gf.check_default()?;
    let b = nx * ny;
    let rho = g_inverse(&gf, var / b)?;
    Ok(match env.form() {
        EnvelopeForm::PowerLaw { .. } => rho * rho * env.psi(rho) * b,
        // h itself stays exact where psi jumps across the critical point
        EnvelopeForm::Tabulated { .. } => rho * (var - env.cumulative(rho) * b),
    })
}

/// Closed form of [`explicit_wpi_bound`] for `psi = C1 lambda^alpha`.
pub fn explicit_power_law(c1: f64, alpha: f64, var: f64, nx: f64, ny: f64) -> f64 {
    let b = nx * ny;
    let e = (2.0 + alpha) / (1.0 + alpha);
    c1.powf(-1.0 / (1.0 + alpha)) * ((1.0 + alpha) / (2.0 + alpha)).powf(e) * (var / b).powf(e) * b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundPath {
    Explicit,
    /// Best valid implicit bound over a `K` grid.
    Implicit {
        k_percent: u32,
    },
}

/// Explicit bound when the envelope allows it, else the best valid implicit
/// bound over `K = 0.01, ..., 0.99`.
pub fn best_wpi_bound(env: &DosEnvelope, var: f64, nx: f64, ny: f64) -> Result<(f64, BoundPath)> {
    match explicit_wpi_bound(env, var, nx, ny) {
        Ok(v) => Ok((v, BoundPath::Explicit)),
        Err(Error::Refused(_)) => {
            let mut best = (0.0, BoundPath::Implicit { k_percent: 50 });
            for kp in 1..100u32 {
                let b = implicit_wpi_bound(env, kp as f64 / 100.0, var, nx, ny)?;
                if b.valid && b.value > best.0 {
                    best = (b.value, BoundPath::Implicit { k_percent: kp });
                }
            }
            Ok(best)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Frequency measure `d xi`, no `2 pi` factors.
    Bare,
    /// `u^ = int u e^{-i xi x} dx`, frequency measure `d xi / (2 pi)^d`.
    TwoPi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WpiCertificate {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Auxiliary functional; always `||u||_{L1}^2` here.
    pub phi: String,
    pub convention: Convention,
    /// Fingerprint of the source envelope, when there is one.
    pub fingerprint: Option<String>,
}

impl WpiCertificate {
    pub fn to_record(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if !(c.p > 1.0 && c.c > 0.0) || (1.0 / c.p + 1.0 / c.q - 1.0).abs() > 1e-15 {
            return Err(Error::Parse(format!("inconsistent certificate p = {}, q = {}, C = {}", c.p, c.q, c.c)));
        }
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_record()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_record(&std::fs::read_to_string(path)?)
    }
}

/// `p = (alpha+2)/(alpha+1)`, `q = alpha + 2`, `C = C1^{1/(2+alpha)} (2+alpha)/(1+alpha)`.
pub fn certificate_power_law(c1: f64, alpha: f64) -> Result<WpiCertificate> {
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::InvalidParameter(format!("C1 must be positive, got {c1}")));
    }
    if !(alpha > -1.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must exceed -1, got {alpha}")));
    }
    Ok(WpiCertificate {
        p: (alpha + 2.0) / (alpha + 1.0),
        q: alpha + 2.0,
        c: c1.powf(1.0 / (2.0 + alpha)) * (2.0 + alpha) / (1.0 + alpha),
        phi: "L1^2".into(),
        convention: Convention::TwoPi,
        fingerprint: None,
    })
}

/// Certificate of an envelope; only power laws have one.
pub fn certificate_from_envelope(env: &DosEnvelope) -> Result<WpiCertificate> {
    let (c1, alpha) = env
        .as_power_law()
        .ok_or_else(|| Error::Refused("closed-form certificates need a power-law envelope".into()))?;
    let mut c = certificate_power_law(c1, alpha)?;
    c.fingerprint = Some(env.fingerprint());
    Ok(c)
}

/// Nash inequality for the Laplacian in `R^d`, i.e. the power-law certificate
/// with `alpha = d/2 - 1` and `C1 = |S^{d-1}|/2` (`include_2pi = false`) or
/// `C1 = (2 pi)^{-d} |S^{d-1}| / 2`.
pub fn nash_certificate(d: usize, include_2pi: bool) -> Result<WpiCertificate> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    let mut c1 = sphere_area(d) / 2.0;
    if include_2pi {
        c1 *= (2.0 * std::f64::consts::PI).powi(-(d as i32));
    }
    let mut cert = certificate_power_law(c1, d as f64 / 2.0 - 1.0)?;
    cert.convention = if include_2pi { Convention::TwoPi } else { Convention::Bare };
    Ok(cert)
}

/// `E(u) = L^{-d} sum_k P(xi_k) |u^_k|^2`.
pub fn dirichlet_form(sym: &Symbol, u: &SpectralField) -> Result<f64> {
    let p = u.spec().symbol_values(sym)?;
    Ok(dirichlet_from_levels(&p, u))
}

pub(crate) fn dirichlet_from_levels(p: &[f64], u: &SpectralField) -> f64 {
    p.iter().zip(u.coeff()).map(|(pk, c)| pk * c.norm_sqr()).sum::<f64>() / u.spec().volume()
}

/// Torus variance `L^{-d} sum_{k != 0} |u^_k|^2` (mean removed).
pub fn variance(u: &SpectralField) -> f64 {
    u.coeff()[1..].iter().map(|c| c.norm_sqr()).sum::<f64>() / u.spec().volume()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub ratio: f64,
    pub holds: bool,
    pub var: f64,
    pub energy: f64,
    pub phi: f64,
}

/// `ratio = Var / (C E^{1/p} Phi^{1/q})` with `Phi = ||u||_1^2`.
pub fn check_certificate(sym: &Symbol, u: &SpectralField, cert: &WpiCertificate) -> Result<CertificateCheck> {
    let var = variance(u);
    let energy = dirichlet_form(sym, u)?;
    let phi = u.norms().l1.powi(2);
    if var == 0.0 {
        return Ok(CertificateCheck { ratio: 0.0, holds: true, var, energy, phi });
    }
    if energy <= 0.0 {
        return Err(Error::Inconsistent(format!("zero Dirichlet form with variance {var:e}")));
    }
    let ratio = var / (cert.c * energy.powf(1.0 / cert.p) * phi.powf(1.0 / cert.q));
    Ok(CertificateCheck { ratio, holds: ratio <= 1.0 + HOLDS_SLACK, var, energy, phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_gaussian, make_sine_mode, GridSpec};
    use std::f64::consts::PI;

    fn pl(c1: f64, alpha: f64, r: f64) -> DosEnvelope {
        DosEnvelope::power_law(c1, alpha, r).unwrap()
    }

    #[test]
    fn psi_cumulative_examples() {
        assert_eq!(psi_cumulative(&pl(1.0, 0.0, 1.0), 0.5).unwrap(), 0.5);
        assert_eq!(psi_cumulative(&pl(2.0, 1.0, 2.0), 1.0).unwrap(), 1.0);
        assert!((psi_cumulative(&pl(1.0, -0.5, 1.0), 0.25).unwrap() - 1.0).abs() < 1e-15);
        assert!(psi_cumulative(&pl(1.0, 0.0, 1.0), 0.0).is_err());
        assert!(psi_cumulative(&pl(1.0, 0.0, 1.0), 1.5).is_err());
    }

    #[test]
    fn tabulated_cumulative_matches_power_law() {
        let t = DosEnvelope::tabulate_power_law(3.0, 1.0, 2.0, 11).unwrap();
        for rho in [0.1, 0.77, 1.3, 2.0] {
            let exact = 1.5 * rho * rho;
            assert!((psi_cumulative(&t, rho).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_inverse_examples() {
        assert_eq!(psi_inverse_generalized(&pl(1.0, 0.0, 1.0), 0.5).unwrap(), 0.5);
        let step = DosEnvelope::tabulated(vec![0.0, 0.5, 0.5, 1.0], vec![0.0, 0.0, 2.0, 2.0]).unwrap();
        assert!((psi_inverse_generalized(&step, 0.0).unwrap() - 0.5).abs() < 1e-10);
        assert!((psi_inverse_generalized(&step, 0.5).unwrap() - 0.75).abs() < 1e-10);
        for env in [pl(1.0, 0.0, 1.0), step] {
            assert_eq!(psi_inverse_generalized(&env, 5.0).unwrap(), 1.0);
        }
        assert_eq!(psi_inverse_generalized(&pl(2.0, 0.5, 1.0), 0.0).unwrap(), 0.0);
        assert!(psi_inverse_generalized(&pl(1.0, 0.0, 1.0), -1.0).is_err());
    }

    #[test]
    fn implicit_examples() {
        let e = pl(1.0, 0.0, 1.0);
        assert_eq!(implicit_wpi_bound(&e, 0.5, 0.0, 1.0, 1.0).unwrap().value, 0.0);
        let b = implicit_wpi_bound(&e, 0.5, 1.0, 1.0, 1.0).unwrap();
        assert!((b.value - 0.25).abs() < 1e-15 && b.valid);
        let out = implicit_wpi_bound(&e, 0.9, 10.0, 1.0, 1.0).unwrap();
        assert!(!out.valid);
        assert!(implicit_wpi_bound(&e, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn g_inverse_examples() {
        assert!((g_inverse(&GFunction::new(pl(1.0, 0.0, 1.0)), 3.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((g_inverse(&GFunction::new(pl(1.0, 1.0, 1.0)), 6.0).unwrap() - 2.0).abs() < 1e-14);
        let tab = DosEnvelope::tabulated(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!((g_inverse(&GFunction::new(tab), 0.8).unwrap() - 0.4).abs() < 1e-9);
        let dead = DosEnvelope::tabulated(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!(g_inverse(&GFunction::new(dead), 10.0).is_err());
    }

    #[test]
    fn explicit_examples() {
        let e = pl(1.0, 0.0, 1.0);
        assert_eq!(explicit_wpi_bound(&e, 0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!((explicit_wpi_bound(&e, 1.0, 1.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        let x = explicit_wpi_bound(&pl(0.3, 0.7, 1.0), 2.0, 1.5, 0.5).unwrap();
        let c = explicit_power_law(0.3, 0.7, 2.0, 1.5, 0.5);
        assert!((x - c).abs() < 1e-12 * c);
    }

    #[test]
    fn explicit_refuses_decreasing_g() {
        let bad = DosEnvelope::tabulated(vec![0.0, 0.1, 0.1, 1.0], vec![5.0, 5.0, 0.01, 0.01]).unwrap();
        assert!(matches!(explicit_wpi_bound(&bad, 1.0, 1.0, 1.0), Err(Error::Refused(_))));
        let (v, path) = best_wpi_bound(&bad, 0.2, 1.0, 1.0).unwrap();
        assert!(matches!(path, BoundPath::Implicit { .. }));
        assert!(v > 0.0);
    }

    #[test]
    fn certificate_examples() {
        let c = certificate_power_law(1.0, 0.0).unwrap();
        assert_eq!((c.p, c.q, c.c), (2.0, 2.0, 2.0));
        let c = certificate_power_law(1.0, 1.0).unwrap();
        assert_eq!((c.p, c.c), (1.5, 1.5));
        for d in 1..=4 {
            let c = certificate_power_law(0.7, d as f64 / 2.0 - 1.0).unwrap();
            assert!((c.p - (d as f64 + 2.0) / d as f64).abs() < 1e-15);
            assert!((1.0 / c.p + 1.0 / c.q - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn nash_constants() {
        let c1 = nash_certificate(1, false).unwrap();
        assert!((c1.c - 3.0).abs() < 1e-15 && (c1.p - 3.0).abs() < 1e-15);
        let c2 = nash_certificate(2, false).unwrap();
        assert!((c2.c - 2.0 * PI.sqrt()).abs() < 1e-14 && c2.p == 2.0);
        let conv = nash_certificate(1, true).unwrap();
        assert!((conv.c - 3.0 * (2.0 * PI).powf(-2.0 / 3.0)).abs() < 1e-14);
        for d in 1..=5 {
            let a = nash_certificate(d, false).unwrap();
            let b = certificate_power_law(sphere_area(d) / 2.0, d as f64 / 2.0 - 1.0).unwrap();
            assert_eq!((a.p, a.q, a.c), (b.p, b.q, b.c));
            let closed = (sphere_area(d) / 2.0).powf(2.0 / (2.0 + d as f64)) * (2.0 + d as f64) / d as f64;
            assert!((a.c - closed).abs() < 1e-14 * closed);
        }
    }

    #[test]
    fn certificate_record_round_trip() {
        let mut c = nash_certificate(2, true).unwrap();
        c.fingerprint = Some("abc".into());
        let text = c.to_record().unwrap();
        assert!(text.contains("convention = \"two-pi\""));
        assert_eq!(WpiCertificate::from_record(&text).unwrap(), c);
        assert!(WpiCertificate::from_record("p = 2.0\nq = 3.0\nC = 1.0\nphi = \"L1^2\"\nconvention = \"spherical\"\n")
            .is_err());
    }

    #[test]
    fn form_and_variance_examples() {
        let spec = GridSpec::new(1, 512, 40.0).unwrap();
        let lap = Symbol::laplacian(1).unwrap();
        let c = SpectralField::from_phys(spec, vec![3.0; 512]).unwrap();
        assert!(dirichlet_form(&lap, &c).unwrap().abs() < 1e-20);
        assert!(variance(&c) < 1e-20);
        let s = make_sine_mode(spec, &[1]).unwrap();
        let l2 = s.norms().l2sq;
        let e = dirichlet_form(&lap, &s).unwrap();
        assert!((e - (2.0 * PI / 40.0).powi(2) * l2).abs() < 1e-12 * e);
        assert!((variance(&s) - l2).abs() < 1e-12 * l2);
        let g = make_gaussian(spec, 1.0).unwrap();
        assert!((dirichlet_form(&lap, &g).unwrap() - PI.sqrt() / 2.0).abs() < 1e-8);
        assert!((variance(&g) - (PI.sqrt() - 2.0 * PI / 40.0)).abs() < 1e-6);
    }

    #[test]
    fn gaussian_nash_ratio() {
        let spec = GridSpec::new(1, 512, 40.0).unwrap();
        let g = make_gaussian(spec, 1.0).unwrap();
        let chk = check_certificate(&Symbol::laplacian(1).unwrap(), &g, &nash_certificate(1, false).unwrap()).unwrap();
        let var = PI.sqrt() - 2.0 * PI / 40.0;
        let oracle = var / (3.0 * (PI.sqrt() / 2.0).powf(1.0 / 3.0) * (2.0 * PI).powf(2.0 / 3.0));
        assert!((chk.ratio - oracle).abs() < 1e-8, "{} vs {oracle}", chk.ratio);
        assert!(chk.holds);
        let whole = PI.sqrt() / (3.0 * (PI.sqrt() / 2.0).powf(1.0 / 3.0) * (2.0 * PI).powf(2.0 / 3.0));
        assert!((whole - 0.18).abs() < 0.005);
    }

    #[test]
    fn constant_field_certificate() {
        let spec = GridSpec::new(2, 16, 4.0).unwrap();
        let c = SpectralField::from_phys(spec, vec![1.0; 256]).unwrap();
        let chk = check_certificate(&Symbol::laplacian(2).unwrap(), &c, &nash_certificate(2, false).unwrap()).unwrap();
        assert_eq!(chk.ratio, 0.0);
        assert!(chk.holds);
    }
}
