//! Exact evolution under `P_t = e^{-t P(D)}` by Fourier multipliers, norm
//! traces, and the time window on which the torus mimics `R^d`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{GridSpec, SpectralField, DEFAULT_TAIL_CUTOFF};
use crate::fit::{fit_loglog, log_space, LogLogFit};
use crate::symbols::Symbol;
use crate::wpi::{dirichlet_from_levels, variance};

/// Log-spaced trace points per decade.
pub const POINTS_PER_DECADE: usize = 32;

/// Tolerance of the `d Var/dt = -2 E` check.
pub const DISSIPATION_TOL: f64 = 1e-3;

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// `u^_k -> e^{-t P(xi_k)} u^_k`.
pub fn evolve(sym: &Symbol, u: &SpectralField, t: f64) -> Result<SpectralField> {
    check_time(t)?;
    Evolver::new(sym, u)?.at(t)
}

/// Evolution of one initial field with the lattice levels cached.
#[derive(Debug, Clone)]
pub struct Evolver {
    u0: SpectralField,
    levels: Vec<f64>,
}

impl Evolver {
    pub fn new(sym: &Symbol, u0: &SpectralField) -> Result<Self> {
        Ok(Self { levels: u0.spec().symbol_values(sym)?, u0: u0.clone() })
    }

    pub fn initial(&self) -> &SpectralField {
        &self.u0
    }

    pub fn at(&self, t: f64) -> Result<SpectralField> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(self.u0.clone());
        }
        Ok(self.u0.apply_multiplier(|i| (-t * self.levels[i]).exp()))
    }

    /// `E(u_t)` straight from the coefficients.
    pub fn energy(&self, t: f64) -> f64 {
        let vol = self.u0.spec().volume();
        self.levels.iter().zip(self.u0.coeff()).map(|(p, c)| p * (-2.0 * t * p).exp() * c.norm_sqr()).sum::<f64>() / vol
    }

    /// Torus variance of `u_t` straight from the coefficients.
    pub fn variance(&self, t: f64) -> f64 {
        let vol = self.u0.spec().volume();
        self.levels[1..]
            .iter()
            .zip(&self.u0.coeff()[1..])
            .map(|(p, c)| (-2.0 * t * p).exp() * c.norm_sqr())
            .sum::<f64>()
            / vol
    }

    fn point(&self, t: f64) -> Result<TracePoint> {
        let u = self.at(t)?;
        let nm = u.norms();
        Ok(TracePoint {
            t,
            var: variance(&u),
            l1: nm.l1,
            l2sq: nm.l2sq,
            energy: dirichlet_from_levels(&self.levels, &u),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    /// Torus variance (mean removed).
    pub var: f64,
    pub l1: f64,
    /// `||u_t||_2^2`, the variance in the whole-space convention.
    pub l2sq: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub points: Vec<TracePoint>,
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn column(&self, f: impl Fn(&TracePoint) -> f64) -> Vec<f64> {
        self.points.iter().map(f).collect()
    }

    /// Columns `t,var,l1,l2sq,energy`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "var", "l1", "l2sq", "energy"])?;
        for p in &self.points {
            w.write_record([p.t, p.var, p.l1, p.l2sq, p.energy].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        for rec in r.deserialize() {
            points.push(rec?);
        }
        Ok(Self { points, warnings: Vec::new() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub tail_cutoff: f64,
    /// Window parameter for the out-of-window warnings.
    pub eta: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { tail_cutoff: DEFAULT_TAIL_CUTOFF, eta: 1.0 }
    }
}

/// Norm trace of `P_t u0` at increasing `times`. Unresolved initial data is
/// refused; times outside the valid window produce warnings.
pub fn evolve_series(sym: &Symbol, u0: &SpectralField, times: &[f64], opts: &SeriesOptions) -> Result<Trace> {
    u0.check_resolved(opts.tail_cutoff)?;
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("times must be strictly increasing".into()));
    }
    for &t in times {
        check_time(t)?;
    }
    let win = valid_window(u0.spec(), sym, opts.eta)?;
    let mut warnings: Vec<String> = win.warning.iter().cloned().collect();
    let outside = times.iter().filter(|&&t| t > 0.0 && (t < win.t_min || t > win.t_max)).count();
    if outside > 0 {
        warnings.push(format!(
            "{outside} of {} times lie outside the valid window [{:.4e}, {:.4e}]",
            times.len(),
            win.t_min,
            win.t_max
        ));
    }
    let ev = Evolver::new(sym, u0)?;
    let points = times.iter().map(|&t| ev.point(t)).collect::<Result<Vec<_>>>()?;
    Ok(Trace { points, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationCheck {
    pub max_rel_error: f64,
    pub worst_t: f64,
    pub holds: bool,
    pub intervals: usize,
}

/// Compares the difference quotient of the torus variance between
/// consecutive trace times with `-2` times the Simpson average of `E` over
/// the same interval.
pub fn dissipation_check(sym: &Symbol, u0: &SpectralField, trace: &Trace) -> Result<DissipationCheck> {
    let ev = Evolver::new(sym, u0)?;
    let mut worst = (0.0f64, f64::NAN);
    for w in trace.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dt = b.t - a.t;
        let quotient = (b.var - a.var) / dt;
        let mean_e = (a.energy + 4.0 * ev.energy(0.5 * (a.t + b.t)) + b.energy) / 6.0;
        let scale = 2.0 * mean_e;
        if scale <= 0.0 {
            continue;
        }
        let err = (quotient + scale).abs() / scale;
        if err > worst.0 || worst.1.is_nan() {
            worst = (err, 0.5 * (a.t + b.t));
        }
    }
    Ok(DissipationCheck {
        max_rel_error: worst.0,
        worst_t: worst.1,
        holds: worst.0 <= DISSIPATION_TOL,
        intervals: trace.points.len().saturating_sub(1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L1Check {
    pub max_increase: f64,
    pub holds: bool,
}

/// Largest increase of `||u_t||_1` between consecutive trace points, judged
/// against `1e-8 ||u_0||_1` (the first point).
pub fn l1_monotonicity_check(trace: &Trace) -> Result<L1Check> {
    let first = trace.points.first().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    let max_increase = trace.points.windows(2).map(|w| w[1].l1 - w[0].l1).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    Ok(L1Check { max_increase, holds: max_increase <= 1e-8 * first.l1 })
}

/// Empirical `(C2, beta)` of `||u_t||_1^2 - ||u_0||_1^2 <= C2 t^beta`; `None`
/// when the squared norm never grows by more than roundoff.
pub fn fit_l1_growth(trace: &Trace) -> Option<LogLogFit> {
    let first = trace.points.first()?;
    let base = first.l1 * first.l1;
    let (ts, gs): (Vec<f64>, Vec<f64>) = trace
        .points
        .iter()
        .filter(|p| p.t > 0.0)
        .map(|p| (p.t, p.l1 * p.l1 - base))
        .filter(|(_, g)| *g > 1e-10 * base)
        .unzip();
    fit_loglog(&ts, &gs, 5).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidWindow {
    pub t_min: f64,
    pub t_max: f64,
    /// Discrete gap `min_{k != 0} P(xi_k)`.
    pub lambda1: f64,
    pub warning: Option<String>,
}

/// `t_max = eta / lambda_1`; `t_min = 1 / P` at the `n/4` frequency shell
/// (smallest value over the coordinate axes).
pub fn valid_window(spec: &GridSpec, sym: &Symbol, eta: f64) -> Result<ValidWindow> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {eta}")));
    }
    let levels = spec.symbol_values(sym)?;
    let lambda1 = levels[1..].iter().copied().filter(|p| *p > 0.0).fold(f64::INFINITY, f64::min);
    if !lambda1.is_finite() {
        return Err(Error::Inconsistent(format!("`{}` has no positive lattice level", sym.name())));
    }
    if levels[1..].iter().any(|p| *p <= 0.0) {
        return Err(Error::Refused(format!(
            "`{}` vanishes at a nonzero lattice frequency; the torus kernel is not the constants",
            sym.name()
        )));
    }
    let d = spec.d();
    let xi_res = 2.0 * PI * (spec.n() / 4) as f64 / spec.box_len();
    let p_res = (0..d)
        .map(|i| {
            let mut xi = vec![0.0; d];
            xi[i] = xi_res;
            sym.eval_unchecked(&xi)
        })
        .fold(f64::INFINITY, f64::min);
    let t_min = 1.0 / p_res;
    let t_max = eta / lambda1;
    let warning = (t_max < 10.0 * t_min)
        .then(|| format!("valid window [{t_min:.3e}, {t_max:.3e}] spans less than a decade; enlarge the grid"));
    Ok(ValidWindow { t_min, t_max, lambda1, warning })
}

/// `eta = 1` for polynomial symbols; `0.1` where the symbol has a kink at 0.
pub fn default_eta(sym: &Symbol) -> f64 {
    if sym.is_polynomial() {
        1.0
    } else {
        0.1
    }
}

/// Log-spaced times covering `[lo, hi]` at [`POINTS_PER_DECADE`].
pub fn log_times(lo: f64, hi: f64) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = ((decades * POINTS_PER_DECADE as f64).ceil() as usize + 1).max(2);
    log_space(lo, hi, count)
}

/// Fit window for Gaussian data of width `sigma`: starts once the flow has
/// forgotten the initial length scale (`t >= 5 sigma^m` for a symbol of order m).
pub fn decay_fit_window(win: &ValidWindow, sigma: f64, order: f64) -> (f64, f64) {
    (win.t_min.max(5.0 * sigma.powf(order)), win.t_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatOracle {
    pub l2sq: f64,
    pub l1: f64,
}

/// Exact norms of the heat flow from `exp(-|x|^2 / (2 sigma^2))` in `R^d`.
pub fn heat_gaussian_oracle(sigma: f64, d: usize, t: f64) -> HeatOracle {
    let s2 = sigma * sigma;
    let dh = d as f64 / 2.0;
    HeatOracle { l2sq: (PI * s2).powf(dh) * (1.0 + 2.0 * t / s2).powf(-dh), l1: (2.0 * PI * s2).powf(dh) }
}
