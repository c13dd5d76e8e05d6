use proptest::prelude::*;

use wpi_core::dos::DosEnvelope;
use wpi_core::fields::{make_band_limited, GridSpec};
use wpi_core::semigroup::evolve;
use wpi_core::symbols::Symbol;
use wpi_core::wpi::{
    certificate_power_law, check_certificate, explicit_power_law, explicit_wpi_bound, implicit_wpi_bound,
    nash_certificate,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certificate_ratio_is_scale_invariant(seed in any::<u64>(), kmax in 1usize..20, c in -50.0f64..50.0) {
        prop_assume!(c.abs() > 1e-3);
        let spec = GridSpec::default_for(1).unwrap();
        let u = make_band_limited(spec, kmax, seed).unwrap();
        let sym = Symbol::laplacian(1).unwrap();
        let cert = nash_certificate(1, true).unwrap();
        let r0 = check_certificate(&sym, &u, &cert).unwrap().ratio;
        let r1 = check_certificate(&sym, &u.scaled(c), &cert).unwrap().ratio;
        prop_assert!(rel(r1, r0) < 1e-10);
    }

    #[test]
    fn explicit_matches_closed_form(
        lc1 in -2.0f64..2.0, alpha in -0.95f64..4.0, la in -4.0f64..4.0, lx in -2.0f64..2.0, ly in -2.0f64..2.0,
    ) {
        let (c1, a, nx, ny) = (10f64.powf(lc1), 10f64.powf(la), 10f64.powf(lx), 10f64.powf(ly));
        let env = DosEnvelope::power_law(c1, alpha, 1.0).unwrap();
        let v = explicit_wpi_bound(&env, a, nx, ny).unwrap();
        prop_assert!(rel(v, explicit_power_law(c1, alpha, a, nx, ny)) < 1e-12);
    }

    #[test]
    fn explicit_dominates_implicit(
        lc1 in -2.0f64..2.0, alpha in -0.95f64..4.0, la in -4.0f64..4.0, lx in -2.0f64..2.0, lr in -3.0f64..3.0,
    ) {
        let (c1, a, nx, r) = (10f64.powf(lc1), 10f64.powf(la), 10f64.powf(lx), 10f64.powf(lr));
        for env in [
            DosEnvelope::power_law(c1, alpha, r).unwrap(),
            DosEnvelope::tabulate_power_law(c1, alpha.max(0.0), r, 33).unwrap(),
        ] {
            let e = explicit_wpi_bound(&env, a, nx, nx).unwrap();
            for kp in 1..100 {
                let imp = implicit_wpi_bound(&env, kp as f64 / 100.0, a, nx, nx).unwrap();
                prop_assert!(imp.value <= e * (1.0 + 1e-12), "K={kp}%: {} > {e}", imp.value);
            }
        }
    }

    #[test]
    fn semigroup_law(seed in any::<u64>(), s in 0.0f64..2.0, t in 0.0f64..2.0, which in 0usize..3) {
        let spec = GridSpec::new(2, 32, 12.0).unwrap();
        let u = make_band_limited(spec, 6, seed).unwrap();
        let sym = Symbol::catalog(2, 0.5).unwrap().swap_remove(which);
        let two = evolve(&sym, &evolve(&sym, &u, s).unwrap(), t).unwrap();
        let one = evolve(&sym, &u, s + t).unwrap();
        let scale = one.coeff().iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (x, y) in two.coeff().iter().zip(one.coeff()) {
            prop_assert!((x - y).norm() <= 1e-12 * scale);
        }
        prop_assert_eq!(one.coeff()[0], u.coeff()[0]);
    }

    #[test]
    fn round_trip_and_plancherel(seed in any::<u64>(), d in 1usize..=3, kmax in 1usize..4) {
        let spec = GridSpec::new(d, 16, 7.0).unwrap();
        let u = make_band_limited(spec, kmax, seed).unwrap();
        let back = u.round_trip();
        let peak = u.phys().iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (a, b) in back.iter().zip(u.phys()) {
            prop_assert!((a - b).abs() <= 1e-12 * peak);
        }
        let phys: f64 = u.phys().iter().map(|x| x * x).sum::<f64>() * spec.cell_volume();
        let spectral: f64 = u.coeff().iter().map(|c| c.norm_sqr()).sum::<f64>() / spec.volume();
        prop_assert!(rel(phys, spectral) < 1e-10);
        prop_assert!(rel(u.norms().l2sq, spectral) < 1e-10);
    }
}

#[test]
fn nash_bare_certificate_is_the_sphere_power_law() {
    for d in 1..=3 {
        let a = nash_certificate(d, false).unwrap();
        let b = certificate_power_law(wpi_core::symbols::sphere_area(d) / 2.0, d as f64 / 2.0 - 1.0).unwrap();
        assert_eq!((a.p, a.q, a.c), (b.p, b.q, b.c));
    }
}
