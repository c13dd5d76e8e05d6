//! The experiment registry. Each runner writes its artifacts into the run
//! directory and reports checks and metrics.

use std::fs;
use std::path::Path;

use wpi_core::decay::{
    classify_regime, fit_decay, forecast_trace, variance_envelope, write_forecast_csv, DecayForecast, Regime,
};
use wpi_core::dos::{
    dos_samples_from_measure, envelope_from_symbol, fit_power_law, theoretical_alpha, SpectralMeasure,
};
use wpi_core::fields::{make_band_limited, make_dirichlet_kernel, make_gaussian};
use wpi_core::fit::log_space;
use wpi_core::semigroup::{
    default_eta, dissipation_check, evolve_series, fit_l1_growth, l1_monotonicity_check, log_times, valid_window,
    SeriesOptions,
};
use wpi_core::symbols::{validate_assumption, SymbolKind, ValidatedSymbol};
use wpi_core::wpi::{
    certificate_from_envelope, check_certificate, dirichlet_form, explicit_wpi_bound, implicit_wpi_bound,
    nash_certificate, variance,
};
use wpi_core::{GridSpec, SpectralField, Symbol};

use crate::config::{Experiment, ExperimentConfig, FieldKind};
use crate::plot::{LogLogPlot, Series, Style};
use crate::{HarnessError, Outcome};

/// Slack on envelope comparisons against lattice data.
const ENVELOPE_SLACK: f64 = 1.05;

pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    match cfg.experiment {
        Experiment::ValidateSymbol => validate_symbol(cfg, dir),
        Experiment::DosFit => dos_fit(cfg, dir),
        Experiment::WpiCheck => wpi_check(cfg, dir),
        Experiment::Nash => nash(cfg, dir),
        Experiment::DecayRun => decay_run(cfg, dir),
        Experiment::Regimes => regimes(cfg, dir),
    }
}

fn make_field(cfg: &ExperimentConfig, spec: GridSpec) -> Result<SpectralField, HarnessError> {
    let f = &cfg.field;
    Ok(match f.kind {
        FieldKind::Gaussian => make_gaussian(spec, f.sigma)?,
        FieldKind::BandLimited => make_band_limited(spec, f.kmax, cfg.seed)?,
        FieldKind::Dirichlet => make_dirichlet_kernel(spec, f.kmax)?,
        FieldKind::File => {
            let path = f.path.as_ref().expect("validated");
            let u = SpectralField::read_binary(path)?;
            if u.spec() != &spec {
                return Err(HarnessError::Config(format!(
                    "{} holds a field on {:?}, but the config asks for {:?}",
                    path.display(),
                    u.spec(),
                    spec
                )));
            }
            u
        }
    })
}

fn write_svg(out: &mut Outcome, dir: &Path, name: &str, plot: &LogLogPlot) -> Result<(), HarnessError> {
    fs::write(dir.join(name), plot.render())?;
    out.artifact(name);
    Ok(())
}

fn validated(cfg: &ExperimentConfig, sym: &Symbol) -> Result<ValidatedSymbol, HarnessError> {
    Ok(ValidatedSymbol::validate(sym.clone(), cfg.validate.budget, cfg.seed)?.0)
}

fn validate_symbol(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    let sym = cfg.symbol()?;
    let report = validate_assumption(&sym, cfg.validate.budget, cfg.seed)?;
    let mut out = Outcome::default();
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    out.artifact("report.json");

    let mut w = csv::Writer::from_path(dir.join("conditions.csv"))?;
    w.write_record(["condition", "label", "passed", "worst_ratio", "note"])?;
    for c in &report.condition_results {
        w.write_record([
            c.condition.to_string(),
            c.label.clone(),
            c.passed.to_string(),
            format!("{:e}", c.worst_ratio),
            c.note.clone().unwrap_or_default(),
        ])?;
        out.check(
            &format!("condition-{}", c.condition),
            c.passed,
            format!(
                "{}: worst ratio {:.4e}{}",
                c.label,
                c.worst_ratio,
                c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            ),
        );
    }
    w.flush()?;
    out.artifact("conditions.csv");

    out.metric("c_struct_estimate", report.c_struct_estimate);
    out.metric("gamma1", sym.gamma1());
    out.metric("gamma2", sym.gamma2());
    if let Some(fit) = &report.area_exponent_fit {
        out.metric("area_exponent", fit.exponent);
        out.metric("area_exponent_bound", fit.bound);
        let plot = LogLogPlot::new(format!("level-set areas of {}", sym.name()), "lambda", "area").with(Series::new(
            "Monte Carlo",
            &fit.lambdas,
            &fit.areas,
            Style::Markers,
        ));
        write_svg(&mut out, dir, "areas.svg", &plot)?;
    }
    Ok(out)
}

fn dos_fit(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    let spec = cfg.grid_spec()?;
    let sym = cfg.symbol()?;
    let u = make_field(cfg, spec)?;
    let m = SpectralMeasure::new(&sym, &u, &u)?;
    let mut out = Outcome::default();

    let lo = cfg.lambdas.lo.unwrap_or(32.0 * m.gap());
    let mut hi = cfg.lambdas.hi.unwrap_or(m.max_level() / 4.0);
    if cfg.lambdas.hi.is_none() && cfg.field.kind == FieldKind::Gaussian {
        hi = hi.min(10.0 / cfg.field.sigma.powi(2));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(HarnessError::Config(format!("empty lambda window [{lo:e}, {hi:e}]")));
    }
    let samples = dos_samples_from_measure(&m, &log_space(lo, hi, cfg.lambdas.count));
    samples.write_csv(&dir.join("dos.csv"))?;
    out.artifact("dos.csv");

    let theory = theoretical_alpha(sym.gamma1(), sym.gamma2(), sym.dim());
    out.metric("alpha_theory", theory);
    out.metric("lambda_1", m.gap());
    out.metric("lambda_lo", lo);
    out.metric("lambda_hi", hi);
    let empty = samples.samples.iter().filter(|s| s.value.is_none()).count();
    if empty > 0 {
        out.note(format!("{empty} of {} shells hold no lattice modes", samples.samples.len()));
    }
    let fit = fit_power_law(&samples, (lo, hi));
    match &fit {
        Ok(f) => {
            out.metric("alpha_fit", f.alpha);
            out.metric("c1_fit", f.c1);
            out.metric("r2", f.r2);
            if let Some(tol) = cfg.lambdas.alpha_tolerance {
                out.check(
                    "alpha",
                    (f.alpha - theory).abs() <= tol,
                    format!("fitted {:.4} vs {theory:.4} +/- {tol}", f.alpha),
                );
            }
        }
        Err(e) => {
            out.note(format!("power-law fit failed: {e}"));
            if cfg.lambdas.alpha_tolerance.is_some() {
                out.check("alpha", false, format!("no fit: {e}"));
            }
        }
    }

    let l1sq = u.norms().l1.powi(2);
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        samples.samples.iter().filter_map(|s| s.value.map(|v| (s.lambda, v / l1sq))).unzip();
    let mut plot = LogLogPlot::new(format!("shell DoS of {}", sym.name()), "lambda", "DoS / ||u||_1^2")
        .with(Series::new("shells", &xs, &ys, Style::Markers));
    if let Ok(f) = &fit {
        let line: Vec<f64> = xs.iter().map(|l| f.c1 * l.powf(f.alpha) / l1sq).collect();
        plot = plot.with(Series::new(format!("fit alpha={:.3}", f.alpha), &xs, &line, Style::Line));
    }

    match validated(cfg, &sym).and_then(|vs| Ok(envelope_from_symbol(&vs, hi)?)) {
        Ok(env) => {
            if let Some((c1, _)) = env.as_power_law() {
                out.metric("envelope_c1", c1);
            }
            // Shell mass against the envelope's mass over the same shell.
            let mut worst = 0.0f64;
            for s in &samples.samples {
                if let Some(v) = s.value {
                    let (a, b) = (s.lambda - s.delta / 2.0, s.lambda + s.delta / 2.0);
                    worst = worst.max(v * s.delta / l1sq / (env.cumulative(b) - env.cumulative(a)));
                }
            }
            out.metric("envelope_worst_ratio", worst);
            out.check(
                "envelope-validity",
                worst <= ENVELOPE_SLACK,
                format!("max shell mass / envelope mass = {worst:.4} (limit {ENVELOPE_SLACK})"),
            );
            let psi: Vec<f64> = xs.iter().map(|&l| env.psi(l)).collect();
            plot = plot.with(Series::new("envelope psi", &xs, &psi, Style::Dashed));
        }
        Err(e) => out.note(format!("no envelope for `{}`: {e}", sym.name())),
    }
    write_svg(&mut out, dir, "dos.svg", &plot)?;
    Ok(out)
}

fn wpi_check(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    let spec = cfg.grid_spec()?;
    let sym = cfg.symbol()?;
    let u = make_field(cfg, spec)?;
    let mut out = Outcome::default();
    let env = envelope_from_symbol(&validated(cfg, &sym)?, 1.0)?;
    let cert = certificate_from_envelope(&env)?;
    cert.write(&dir.join("certificate.toml"))?;
    out.artifact("certificate.toml");
    out.metric("C", cert.c);
    out.metric("p", cert.p);
    out.metric("q", cert.q);

    let c = check_certificate(&sym, &u, &cert)?;
    out.metric("ratio", c.ratio);
    out.metric("var", c.var);
    out.metric("energy", c.energy);
    out.metric("phi", c.phi);
    out.check("certificate", c.holds, format!("Var / (C E^(1/p) Phi^(1/q)) = {:.6}", c.ratio));

    let l1 = u.norms().l1;
    let var = variance(&u);
    let energy = dirichlet_form(&sym, &u)?;
    let explicit = explicit_wpi_bound(&env, var, l1, l1)?;
    out.metric("explicit_bound", explicit);
    out.check(
        "chain",
        energy >= explicit / ENVELOPE_SLACK,
        format!("E = {energy:.6e} vs explicit bound {explicit:.6e}"),
    );

    let mut w = csv::Writer::from_path(dir.join("implicit.csv"))?;
    w.write_record(["K", "implicit", "valid", "explicit"])?;
    let mut best = 0.0f64;
    for kp in 1..100 {
        let k = kp as f64 / 100.0;
        let b = implicit_wpi_bound(&env, k, var, l1, l1)?;
        if b.valid {
            best = best.max(b.value);
        }
        w.write_record([format!("{k}"), format!("{:e}", b.value), b.valid.to_string(), format!("{explicit:e}")])?;
    }
    w.flush()?;
    out.artifact("implicit.csv");
    out.metric("best_implicit_bound", best);
    out.check(
        "dominance",
        best <= explicit * (1.0 + 1e-12),
        format!("best valid implicit {best:.6e} <= explicit {explicit:.6e}"),
    );
    Ok(out)
}

fn nash(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    let spec = cfg.grid_spec()?;
    let d = spec.d();
    let sym = Symbol::laplacian(d)?;
    if cfg.symbol != "laplacian" {
        return Err(HarnessError::Config(format!("the Nash experiment is for the Laplacian, not `{}`", cfg.symbol)));
    }
    let nc = &cfg.nash;
    if nc.kmax_max == 0 || nc.kmax_max >= spec.n() / 4 {
        return Err(HarnessError::Config(format!("nash.kmax_max must lie in 1..{}", spec.n() / 4)));
    }
    let mut out = Outcome::default();
    let bare = nash_certificate(d, false)?;
    let two_pi = nash_certificate(d, true)?;
    bare.write(&dir.join("certificate.toml"))?;
    two_pi.write(&dir.join("certificate_2pi.toml"))?;
    out.artifact("certificate.toml");
    out.artifact("certificate_2pi.toml");
    out.metric("C", bare.c);
    out.metric("p", bare.p);
    out.metric("q", bare.q);
    out.metric("C_2pi", two_pi.c);

    let mut fields: Vec<(String, String, SpectralField)> = Vec::new();
    for i in 0..nc.fields {
        let kmax = 1 + i % nc.kmax_max;
        let u = make_band_limited(spec, kmax, cfg.seed.wrapping_add(i as u64))?;
        fields.push(("band-limited".into(), format!("kmax={kmax};seed={}", cfg.seed.wrapping_add(i as u64)), u));
    }
    let sigmas = if nc.sigma_count == 1 {
        vec![nc.sigma_min]
    } else {
        (0..nc.sigma_count)
            .map(|j| nc.sigma_min + (nc.sigma_max - nc.sigma_min) * j as f64 / (nc.sigma_count - 1) as f64)
            .collect()
    };
    for s in sigmas {
        fields.push(("gaussian".into(), format!("sigma={s}"), make_gaussian(spec, s)?));
    }

    let mut w = csv::Writer::from_path(dir.join("ratios.csv"))?;
    w.write_record(["kind", "params", "ratio", "ratio_2pi", "var", "energy", "phi"])?;
    let (mut worst, mut worst_2pi, mut violations, mut violations_2pi) = (0.0f64, 0.0f64, 0usize, 0usize);
    for (kind, params, u) in &fields {
        let a = check_certificate(&sym, u, &bare)?;
        let b = check_certificate(&sym, u, &two_pi)?;
        worst = worst.max(a.ratio);
        worst_2pi = worst_2pi.max(b.ratio);
        violations += usize::from(!a.holds);
        violations_2pi += usize::from(!b.holds);
        w.write_record([
            kind.clone(),
            params.clone(),
            format!("{:e}", a.ratio),
            format!("{:e}", b.ratio),
            format!("{:e}", a.var),
            format!("{:e}", a.energy),
            format!("{:e}", a.phi),
        ])?;
    }
    w.flush()?;
    out.artifact("ratios.csv");
    out.metric("fields", fields.len() as f64);
    out.metric("max_ratio", worst);
    out.metric("max_ratio_2pi", worst_2pi);
    out.metric("violations_2pi", violations_2pi as f64);
    out.check(
        "nash",
        violations == 0,
        format!("{violations} of {} fields exceed ratio 1; max ratio {worst:.4}", fields.len()),
    );
    Ok(out)
}

/// Positivity-preserving generators, for which the L1 norm cannot grow.
fn is_markov(sym: &Symbol) -> bool {
    matches!(sym.kind(), SymbolKind::Laplacian | SymbolKind::Fractional { .. })
}

fn decay_run(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    let spec = cfg.grid_spec()?;
    let sym = cfg.symbol()?;
    let u = make_field(cfg, spec)?;
    let mut out = Outcome::default();
    let eta = cfg.times.eta.unwrap_or_else(|| default_eta(&sym));
    let win = valid_window(&spec, &sym, eta)?;
    out.metric("eta", eta);
    out.metric("t_min", win.t_min);
    out.metric("t_max", win.t_max);
    out.metric("lambda_1", win.lambda1);

    let times = log_times(win.t_min, win.t_max);
    let trace = evolve_series(&sym, &u, &times, &SeriesOptions { eta, ..Default::default() })?;
    for w in &trace.warnings {
        out.note(w.clone());
    }
    trace.write_csv(&dir.join("trace.csv"))?;
    out.artifact("trace.csv");

    let fit_from = cfg.times.fit_from.unwrap_or_else(|| match cfg.field.kind {
        FieldKind::Gaussian => win.t_min.max(5.0 * cfg.field.sigma.powf(sym.degree())),
        _ => win.t_min,
    });
    let ts = trace.times();
    let expected =
        cfg.times.expected_slope.unwrap_or(-(1.0 + theoretical_alpha(sym.gamma1(), sym.gamma2(), sym.dim())));
    let tol = cfg.times.slope_tolerance;
    out.metric("expected_slope", expected);
    out.metric("fit_from", fit_from);
    match fit_decay(&ts, &trace.column(|p| p.l2sq), (fit_from, win.t_max)) {
        Ok(f) => {
            out.metric("slope", f.slope);
            out.metric("slope_r2", f.r2);
            out.check("slope", (f.slope - expected).abs() <= tol, format!("{:.4} vs {expected:.4} +/- {tol}", f.slope));
        }
        Err(e) => out.check("slope", false, format!("no fit on [{fit_from:.3e}, {:.3e}]: {e}", win.t_max)),
    }
    if let Ok(f) = fit_decay(&ts, &trace.column(|p| p.var), (fit_from, win.t_max)) {
        out.metric("slope_torus_var", f.slope);
    }

    let diss = dissipation_check(&sym, &u, &trace)?;
    out.metric("dissipation_max_rel_error", diss.max_rel_error);
    out.check("dissipation", diss.holds, format!("max |dVar/dt + 2E| / 2E = {:.3e}", diss.max_rel_error));

    let l1 = l1_monotonicity_check(&trace)?;
    out.metric("l1_max_increase", l1.max_increase);
    if is_markov(&sym) {
        out.check("l1-monotone", l1.holds, format!("largest L1 increase {:.3e}", l1.max_increase));
    } else if let Some(g) = fit_l1_growth(&trace) {
        // Whether such growth bounds hold for these generators is open; report only.
        out.metric("l1_growth_c2", g.intercept.exp());
        out.metric("l1_growth_beta", g.slope);
        out.note(format!("L1 norm grows: ||u_t||_1^2 - ||u_0||_1^2 ~ {:.3e} t^{:.3}", g.intercept.exp(), g.slope));
    }

    let l2: Vec<f64> = trace.column(|p| p.l2sq);
    let var: Vec<f64> = trace.column(|p| p.var);
    let mut plot = LogLogPlot::new(format!("variance decay, {} d={}", sym.name(), sym.dim()), "t", "Var")
        .with(Series::new("||u_t||_2^2", &ts, &l2, Style::Markers))
        .with(Series::new("torus Var", &ts, &var, Style::Line));
    match validated(cfg, &sym).and_then(|vs| Ok(envelope_from_symbol(&vs, 1.0)?)) {
        Ok(env) => {
            let nm = u.norms();
            let fc = DecayForecast::from_envelope(&env, nm.l2sq, nm.l1 * nm.l1, 0.0, 0.0)?;
            out.metric("c1", fc.c1);
            out.metric("c3", fc.c3);
            let points = forecast_trace(&fc, &ts)?;
            write_forecast_csv(&fc, &points, &dir.join("forecast.csv"))?;
            out.artifact("forecast.csv");
            let env_vals: Vec<f64> = points.iter().map(|p| p.envelope).collect();
            let worst = l2.iter().zip(&env_vals).map(|(v, e)| v / e).fold(0.0, f64::max);
            out.metric("envelope_worst_ratio", worst);
            out.check(
                "envelope",
                worst <= ENVELOPE_SLACK,
                format!("max measured / envelope = {worst:.4} (limit {ENVELOPE_SLACK})"),
            );
            plot = plot.with(Series::new("envelope", &ts, &env_vals, Style::Dashed));
        }
        Err(e) => out.note(format!("no envelope for `{}`: {e}", sym.name())),
    }
    write_svg(&mut out, dir, "decay.svg", &plot)?;
    Ok(out)
}

fn regimes(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    let rc = &cfg.regimes;
    if !(rc.t_max > 1.0) {
        return Err(HarnessError::Config("regimes.t_max must exceed 1".into()));
    }
    let mut out = Outcome::default();
    let times = log_space(1e-3, rc.t_max, (8.0 * (rc.t_max / 1e-3).log10()).ceil() as usize + 1);
    let mut w = csv::Writer::from_path(dir.join("regimes.csv"))?;
    w.write_record(["alpha", "beta", "C2", "regime", "exponent", "slope_at_t_max"])?;
    let mut slope_fail = Vec::new();
    let mut monotone_fail = Vec::new();
    for (i, &alpha) in rc.alphas.iter().enumerate() {
        let mut plot = LogLogPlot::new(format!("variance envelopes, alpha = {alpha}"), "t", "envelope");
        for &ratio in &rc.beta_ratios {
            let beta = ratio * (1.0 + alpha);
            let fc = DecayForecast::new(alpha, rc.c1, rc.var0, rc.nx_sq, rc.c2, beta)?;
            let class = classify_regime(alpha, beta, rc.c2);
            let y1 = variance_envelope(&fc, rc.t_max)?;
            let y2 = variance_envelope(&fc, 1.1 * rc.t_max)?;
            let slope = (y2 / y1).ln() / 1.1f64.ln();
            let vals = times.iter().map(|&t| variance_envelope(&fc, t)).collect::<wpi_core::Result<Vec<f64>>>()?;
            if vals.windows(2).any(|p| p[1] > p[0] * (1.0 + 1e-12)) {
                monotone_fail.push(format!("alpha={alpha} beta={beta}"));
            }
            let tagged = match class.regime {
                Regime::PolynomialFull | Regime::PolynomialSlow | Regime::NoDecayCertified => Some(class.exponent),
                // The log regime's local slope tends to 0 like 1 / ln t.
                Regime::Log => None,
            };
            if let Some(e) = tagged {
                if (slope - e).abs() > rc.slope_tolerance {
                    slope_fail.push(format!("alpha={alpha} beta={beta}: {slope:.4} vs {e:.4}"));
                }
            }
            w.write_record([
                format!("{alpha}"),
                format!("{beta}"),
                format!("{}", rc.c2),
                class.regime.to_string(),
                format!("{}", class.exponent),
                format!("{slope:e}"),
            ])?;
            plot = plot.with(Series::new(format!("beta={beta:.3} {}", class.regime), &times, &vals, Style::Line));
        }
        write_svg(&mut out, dir, &format!("regimes_{i}.svg"), &plot)?;
    }
    w.flush()?;
    out.artifact("regimes.csv");
    out.artifacts.rotate_right(1);
    out.check(
        "monotone",
        monotone_fail.is_empty(),
        if monotone_fail.is_empty() { "all envelopes nonincreasing".into() } else { monotone_fail.join("; ") },
    );
    out.check(
        "asymptotic-slope",
        slope_fail.is_empty(),
        if slope_fail.is_empty() {
            format!("local slopes at t = {:e} match the regime exponents", rc.t_max)
        } else {
            slope_fail.join("; ")
        },
    );
    Ok(out)
}
