//! Variance-decay envelopes from a power-law DoS envelope and an `X`-norm
//! growth bound `||P_t u||_X^2 <= ||u||_X^2 + C2 t^beta`.
//!
//! The envelope solves the comparison inequality `y' <= -A y^{1+a} (B + C t^b)^{-c}`:
//!
//! `y(t) <= (y0^{-a} + a A int_0^t (B + C s^b)^{-c} ds)^{-1/a}`,
//!
//! here with `a = c = 1/(1+alpha)`, `B = ||u0||_X^2`, `C = C2`, `b = beta` and
//! `a A = C3`.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::dos::DosEnvelope;
use crate::error::{Error, Result};
use crate::fit::{fit_loglog, LogLogFit};
use crate::quadrature::integrate_partitioned;

/// Relative accuracy of the time integral.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// `2 (alpha+2)^{-(alpha+2)/(alpha+1)} (alpha+1)^{1/(alpha+1)} C1^{-1/(alpha+1)}`.
pub fn c3_constant(alpha: f64, c1: f64) -> Result<f64> {
    check_alpha_c1(alpha, c1)?;
    let e = 1.0 / (alpha + 1.0);
    Ok(2.0 * (alpha + 2.0).powf(-(alpha + 2.0) * e) * (alpha + 1.0).powf(e) * c1.powf(-e))
}

fn check_alpha_c1(alpha: f64, c1: f64) -> Result<()> {
    if !(alpha > -1.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must exceed -1, got {alpha}")));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::InvalidParameter(format!("C1 must be positive, got {c1}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `t^{-(1+alpha)}`: no norm growth, or growth that decays.
    PolynomialFull,
    /// `t^{beta-(1+alpha)}`.
    PolynomialSlow,
    /// `(log t)^{-(1+alpha)}` at `beta = 1 + alpha`.
    Log,
    /// `beta > 1 + alpha`: the time integral converges and the envelope
    /// levels off at a positive value.
    NoDecayCertified,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::PolynomialFull => "polynomial-full",
            Regime::PolynomialSlow => "polynomial-slow",
            Regime::Log => "log",
            Regime::NoDecayCertified => "no-decay-certified",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeClass {
    pub regime: Regime,
    /// Power of `t` (or of `log t` in the log regime); 0 without decay.
    pub exponent: f64,
}

/// Relative tolerance for recognizing `beta = 1 + alpha`.
const LOG_TOL: f64 = 1e-12;

pub fn classify_regime(alpha: f64, beta: f64, c2: f64) -> RegimeClass {
    let full = -(1.0 + alpha);
    if c2 == 0.0 || beta <= 0.0 {
        RegimeClass { regime: Regime::PolynomialFull, exponent: full }
    } else if (beta - (1.0 + alpha)).abs() <= LOG_TOL * (1.0 + alpha) {
        RegimeClass { regime: Regime::Log, exponent: full }
    } else if beta < 1.0 + alpha {
        RegimeClass { regime: Regime::PolynomialSlow, exponent: beta + full }
    } else {
        RegimeClass { regime: Regime::NoDecayCertified, exponent: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayForecast {
    pub alpha: f64,
    pub c1: f64,
    pub c3: f64,
    pub var0: f64,
    pub nx_sq: f64,
    pub c2: f64,
    pub beta: f64,
    pub regime: Regime,
}

impl DecayForecast {
    pub fn new(alpha: f64, c1: f64, var0: f64, nx_sq: f64, c2: f64, beta: f64) -> Result<Self> {
        let c3 = c3_constant(alpha, c1)?;
        if !(var0 >= 0.0 && var0.is_finite()) {
            return Err(Error::InvalidParameter(format!("initial variance must be >= 0, got {var0}")));
        }
        if !(nx_sq > 0.0 && nx_sq.is_finite()) {
            return Err(Error::InvalidParameter(format!("||u0||_X^2 must be positive, got {nx_sq}")));
        }
        if !(c2 >= 0.0 && c2.is_finite()) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("need C2 >= 0 and finite beta, got {c2}, {beta}")));
        }
        Ok(Self { alpha, c1, c3, var0, nx_sq, c2, beta, regime: classify_regime(alpha, beta, c2).regime })
    }

    /// Forecast from a power-law envelope.
    pub fn from_envelope(env: &DosEnvelope, var0: f64, nx_sq: f64, c2: f64, beta: f64) -> Result<Self> {
        let (c1, alpha) =
            env.as_power_law().ok_or_else(|| Error::Refused("decay forecasts need a power-law envelope".into()))?;
        Self::new(alpha, c1, var0, nx_sq, c2, beta)
    }

    pub fn comparison(&self) -> OdeParams {
        let a = 1.0 / (1.0 + self.alpha);
        OdeParams { a, big_a: self.c3 / a, b: self.nx_sq, c_coef: self.c2, b_exp: self.beta, c_exp: a }
    }
}

/// Parameters of `y' <= -A y^{1+a} (B + C t^b)^{-c}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeParams {
    pub a: f64,
    pub big_a: f64,
    pub b: f64,
    pub c_coef: f64,
    pub b_exp: f64,
    pub c_exp: f64,
}

impl OdeParams {
    fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.big_a > 0.0
            && self.b > 0.0
            && self.c_coef >= 0.0
            && self.c_exp > 0.0
            && [self.a, self.big_a, self.b, self.c_coef, self.b_exp, self.c_exp].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid comparison parameters {self:?}")));
        }
        Ok(())
    }

    /// `(B + C s^b)^{-c}`, with `s^0 = 1`.
    pub fn weight(&self, s: f64) -> f64 {
        let grow = if self.b_exp == 0.0 { 1.0 } else { s.powf(self.b_exp) };
        (self.b + self.c_coef * grow).powf(-self.c_exp)
    }

    /// `int_0^t (B + C s^b)^{-c} ds`.
    pub fn weight_integral(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        if self.c_coef == 0.0 || self.b_exp == 0.0 {
            return Ok(self.weight(1.0) * t);
        }
        // With B > 0 the integrand is bounded for any real b (it tends to 0 at
        // s = 0 when b < 0), so no endpoint treatment is needed; decade
        // breakpoints and the crossover B = C s^b keep long ranges cheap.
        let mut pts = vec![0.0];
        let mut x = t * 1e-12;
        while x < t {
            pts.push(x);
            x *= 10.0;
        }
        let cross = (self.b / self.c_coef).powf(1.0 / self.b_exp);
        if cross > 0.0 && cross < t {
            pts.push(cross);
        }
        pts.push(t);
        pts.sort_by(f64::total_cmp);
        let r = integrate_partitioned(|s| self.weight(s), &pts, QUAD_REL_TOL, 0.0, 50_000)?;
        Ok(r.value)
    }
}

/// `(y0^{-a} + a A int_0^t (B + C s^b)^{-c} ds)^{-1/a}`.
pub fn ode_comparison(params: &OdeParams, y0: f64, t: f64) -> Result<f64> {
    params.validate()?;
    if !(y0 > 0.0 && y0.is_finite()) {
        return Err(Error::InvalidParameter(format!("y0 must be positive, got {y0}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    let i = params.weight_integral(t)?;
    Ok((y0.powf(-params.a) + params.a * params.big_a * i).powf(-1.0 / params.a))
}

/// Certified upper bound on `Var(P_t u0)`.
pub fn variance_envelope(fc: &DecayForecast, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    if fc.var0 == 0.0 {
        return Ok(0.0);
    }
    let e = 1.0 / (1.0 + fc.alpha);
    if fc.c2 == 0.0 {
        return Ok((fc.var0.powf(-e) + fc.c3 * fc.nx_sq.powf(-e) * t).powf(-(1.0 + fc.alpha)));
    }
    ode_comparison(&fc.comparison(), fc.var0, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastPoint {
    pub t: f64,
    pub envelope: f64,
}

pub fn forecast_trace(fc: &DecayForecast, times: &[f64]) -> Result<Vec<ForecastPoint>> {
    times.iter().map(|&t| Ok(ForecastPoint { t, envelope: variance_envelope(fc, t)? })).collect()
}

/// Columns `t,envelope,regime`.
pub fn write_forecast_csv(fc: &DecayForecast, points: &[ForecastPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "envelope", "regime"])?;
    for p in points {
        w.write_record([format!("{:e}", p.t), format!("{:e}", p.envelope), fc.regime.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Log-log least squares over `lo <= t <= hi`; needs 8 points in the window.
pub fn fit_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<LogLogFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        times.iter().zip(values).filter(|(t, _)| **t >= window.0 && **t <= window.1).map(|(t, v)| (*t, *v)).unzip();
    if ys.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("decay values in the window must be positive".into()));
    }
    fit_loglog(&xs, &ys, 8)
}

/// Slope of [`fit_decay`].
pub fn fit_decay_exponent(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    Ok(fit_decay(times, values, window)?.slope)
}
