use heat_series::kernels::{forward_line, forward_line_quad, forward_polar, forward_polar_quad};
use heat_series::profile::{AnalyticProfile, Field, Gaussian};
use heat_series::quad::{integrate, IntegrandDomain, QuadSpec};
use heat_series::series::{auto_beta, coefficients, evaluate, ConstantsMode, SeriesOptions, Variant};
use heat_series::series_polar::polar_transfer_sum;
use heat_series::specfun::{bessel_i0, hermite_at_zero, hermite_batch, hermite_eval, w_poly_batch, KernelParams};
use proptest::prelude::*;

fn gaussian_at(amplitude: f64, center: f64, width_a: f64) -> Gaussian {
    Gaussian::new(amplitude, center, width_a).unwrap()
}

fn mixture(parts: &[(f64, f64, f64)]) -> AnalyticProfile {
    AnalyticProfile::Mixture(parts.iter().map(|&(amp, c, a)| gaussian_at(amp, c, a)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hermite_generating_function(t in -1.0f64..=1.0, z in -2.0f64..=2.0) {
        let mut h = Vec::new();
        hermite_batch(40, z, &mut h).unwrap();
        let mut sum = 0.0;
        let mut tj = 1.0;
        for (j, hj) in h.iter().enumerate() {
            if j > 0 {
                tj *= t / j as f64;
            }
            sum += hj * tj;
        }
        let exact = (2.0 * t * z - t * t).exp();
        prop_assert!((sum - exact).abs() <= 1e-10, "t={t} z={z}: {sum} vs {exact}");
    }

    #[test]
    fn w_generating_function(t in -1.0f64..=1.0, z in 0.0f64..=2.0) {
        let mut w = Vec::new();
        w_poly_batch(30, z, &mut w).unwrap();
        let mut sum = 0.0;
        let mut tj = 1.0;
        for (j, wj) in w.iter().enumerate() {
            if j > 0 {
                tj *= t * t / ((2 * j - 1) * 2 * j) as f64;
            }
            sum += wj * tj;
        }
        let exact = (-t * t).exp() * bessel_i0(2.0 * t * z).unwrap();
        prop_assert!((sum - exact).abs() <= 1e-10, "t={t} z={z}: {sum} vs {exact}");
    }

    #[test]
    fn coefficients_are_linear(
        a1 in 0.5f64..2.0, a2 in 0.5f64..2.0, c1 in -0.5f64..0.5, c2 in -0.5f64..0.5,
        s in -2.0f64..2.0, vi in 0usize..12, x in 0.0f64..2.0,
    ) {
        let variant = Variant::SERIES[vi];
        let polar = variant.geometry() == heat_series::series::Geometry::Polar;
        let (c1, c2) = if polar { (0.0, 0.0) } else { (c1, c2) };
        let f = mixture(&[(1.0, c1, a1)]);
        let g = mixture(&[(1.0, c2, a2)]);
        let fg = mixture(&[(1.0, c1, a1), (s, c2, a2)]);
        let params = KernelParams::new(0.4, 0.9).unwrap();
        let spec = QuadSpec::default();
        let mode = ConstantsMode::OracleValidated;
        let n = 6;
        let cf = coefficients(variant, &f.into(), params, n, x, &spec, mode).unwrap();
        let cg = coefficients(variant, &g.into(), params, n, x, &spec, mode).unwrap();
        let cfg = coefficients(variant, &fg.into(), params, n, x, &spec, mode).unwrap();
        let opts = SeriesOptions { early_stop_tol: 0.0, ..SeriesOptions::default() };
        for j in 0..=n {
            let want = cf[j] + s * cg[j];
            let scale = cf[j].abs().max(s.abs() * cg[j].abs()).max(1.0);
            prop_assert!((cfg[j] - want).abs() <= 1e-9 * scale, "{variant} j={j}: {} vs {want}", cfg[j]);
        }
        let comb: Vec<f64> = cf.iter().zip(&cg).map(|(a, b)| a + s * b).collect();
        let (vf, _) = evaluate(variant, &cf, params, x, &opts).unwrap();
        let (vg, _) = evaluate(variant, &cg, params, x, &opts).unwrap();
        let (vc, _) = evaluate(variant, &comb, params, x, &opts).unwrap();
        prop_assert!((vc - (vf + s * vg)).abs() <= 1e-12 * (vf.abs() + s.abs() * vg.abs()).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn line_semigroup(a in 0.5f64..2.0, c in -1.0f64..1.0, t1 in 0.05f64..1.0, t2 in 0.05f64..1.0, x in -3.0f64..3.0) {
        let spec = QuadSpec::default();
        let f = mixture(&[(1.0, c, a)]);
        let u1: Field = f.evolve_line(t1).unwrap().into();
        let two_step = forward_line_quad(&u1, t2, x, &spec).unwrap();
        let one_step = forward_line(&f.into(), t1 + t2, x, &spec).unwrap();
        prop_assert!((two_step - one_step).abs() <= 1e-8, "{two_step} vs {one_step}");
    }

    #[test]
    fn polar_semigroup(a in 0.5f64..2.0, t1 in 0.05f64..1.0, t2 in 0.05f64..1.0, r in 0.0f64..3.0) {
        let spec = QuadSpec::default();
        let f = AnalyticProfile::gaussian(a);
        let u1: Field = f.evolve_polar(t1).unwrap().into();
        let two_step = forward_polar_quad(&u1, t2, r, &spec).unwrap();
        let one_step = forward_polar(&f.into(), t1 + t2, r, &spec).unwrap();
        prop_assert!((two_step - one_step).abs() <= 1e-8, "{two_step} vs {one_step}");
    }

    #[test]
    fn mass_is_conserved(a1 in 0.5f64..2.0, a2 in 0.5f64..2.0, c2 in -1.5f64..1.5, w in 0.1f64..1.0, tau in 0.05f64..1.0) {
        let spec = QuadSpec::default();
        let f: Field = mixture(&[(1.0, 0.0, a1), (w, c2, a2)]).into();
        let mass = |g: &dyn Fn(f64) -> f64| integrate(g, IntegrandDomain::FiniteInterval { a: -16.0, b: 16.0 }, &spec).unwrap().value;
        let m_f = mass(&|x| f.value(x));
        let m_u = mass(&|x| forward_line_quad(&f, tau, x, &spec).unwrap());
        prop_assert!((m_u - m_f).abs() <= 1e-8 * m_f, "{m_u} vs {m_f}");
    }

    #[test]
    fn maximum_principle(a1 in 0.5f64..2.0, a2 in 0.5f64..2.0, c2 in -1.5f64..1.5, w in 0.1f64..1.0, tau in 0.05f64..1.0) {
        let spec = QuadSpec::default();
        let f: Field = mixture(&[(1.0, 0.0, a1), (w, c2, a2)]).into();
        let xs: Vec<f64> = (0..=120).map(|i| -6.0 + 0.1 * i as f64).collect();
        let max_f = xs.iter().map(|&x| f.value(x)).fold(f64::MIN, f64::max);
        let max_u = xs.iter().map(|&x| forward_line_quad(&f, tau, x, &spec).unwrap()).fold(f64::MIN, f64::max);
        prop_assert!(max_u <= max_f + 1e-12);
    }

    #[test]
    fn polar_direct_solves_stay_nonnegative(a in 0.5f64..2.0, tau in 0.1f64..1.0, vi in 0usize..3) {
        let spec = QuadSpec::default();
        let variant = [Variant::PdA, Variant::PdB, Variant::PdC][vi];
        let f: Field = AnalyticProfile::gaussian(a).into();
        let beta = auto_beta(variant, &f, tau, &spec).unwrap();
        let solver = heat_series::series::SeriesSolver::new(variant, f, KernelParams::new(tau, beta).unwrap(), 40, spec, SeriesOptions::default()).unwrap();
        for k in 0..=12 {
            let r = 0.25 * k as f64;
            let (v, _) = solver.eval(r).unwrap();
            prop_assert!(v >= -1e-8, "{variant} r={r}: {v}");
        }
    }
}

#[test]
fn odd_hermite_vanishes_at_zero() {
    for k in 0..60 {
        assert_eq!(hermite_at_zero(2 * k + 1).unwrap(), 0.0);
        assert_eq!(hermite_eval(2 * k + 1, 0.0).unwrap(), 0.0);
    }
}

/// Central-difference Bessel operator applied to `I0(2 t z)` against `(2t)^2 I0(2 t z)`.
fn bessel_operator_error(t: f64, z: f64, h: f64) -> f64 {
    let g = |z: f64| bessel_i0(2.0 * t * z).unwrap();
    let d2 = (g(z + h) - 2.0 * g(z) + g(z - h)) / (h * h);
    let d1 = (g(z + h) - g(z - h)) / (2.0 * h);
    (d2 + d1 / z - 4.0 * t * t * g(z)).abs()
}

#[test]
fn bessel_operator_eigen_relation_is_second_order() {
    for j in 1..=10 {
        let t = 0.1 * j as f64;
        for z in [0.25, 0.5, 1.0, 1.5, 2.0] {
            let e1 = bessel_operator_error(t, z, 1e-2);
            let e2 = bessel_operator_error(t, z, 5e-3);
            let ratio = e1 / e2;
            assert!((3.5..4.5).contains(&ratio), "t={t} z={z}: ratio {ratio}");
            assert!(e1 <= 1e-2 * (4.0 * t * t * bessel_i0(2.0 * t * z).unwrap()));
        }
    }
}

#[test]
fn expansion_theorem_limit() {
    let spec = QuadSpec::default();
    let opts = SeriesOptions::default();
    let params = KernelParams::new(1.0, 1.0).unwrap();
    let g: Field = AnalyticProfile::gaussian(1.0).into();
    let c = coefficients(Variant::PdA, &g, params, 0, 0.0, &spec, ConstantsMode::OracleValidated).unwrap();
    for k in 0..=12 {
        let r = 0.25 * k as f64;
        let (v, _) = polar_transfer_sum(1.0, 1.0, &c, r, &opts).unwrap();
        assert!((v - g.value(r)).abs() <= 1e-8, "r={r}: {v}");
    }
    let profiles = [
        mixture(&[(1.0, 0.0, 0.7), (0.6, 0.0, 1.3)]),
        AnalyticProfile::LaguerreMode { order: 3, width_a: 1.0, amplitude: 1.0 },
    ];
    for p in profiles {
        let f: Field = p.clone().into();
        let beta = heat_series::series::radial_scale_estimate(&f, &spec).unwrap();
        let params = KernelParams::new(1.0, beta).unwrap();
        let c = coefficients(Variant::PdA, &f, params, 40, 0.0, &spec, ConstantsMode::OracleValidated).unwrap();
        let peak = (0..=30).map(|k| p.value(0.1 * k as f64).abs()).fold(0.0, f64::max);
        for k in 0..=30 {
            let r = 0.1 * k as f64;
            let (v, _) = polar_transfer_sum(beta, beta, &c, r, &opts).unwrap();
            assert!((v - p.value(r)).abs() <= 1e-4 * peak, "{p} r={r}: {v} vs {}", p.value(r));
        }
    }
}

#[test]
fn line_self_expansion_at_zero_time() {
    let spec = QuadSpec::default();
    let u = mixture(&[(1.0, 0.2, 0.9), (0.5, -0.4, 1.4)]);
    let field: Field = u.clone().into();
    let beta = heat_series::series::line_scale_estimate(&field, &spec).unwrap();
    // with tau = 0 both scales are beta; CD-A moments are exactly the moments at beta
    let c0 = coefficients(Variant::CdA, &field, KernelParams::new(1.0, beta).unwrap(), 40, 0.0, &spec, ConstantsMode::OracleValidated).unwrap();
    let opts = SeriesOptions::default();
    for k in 0..=12 {
        let x = -3.0 + 0.5 * k as f64;
        let (v, _) = heat_series::series_cartesian::line_transfer_sum(beta, beta, &c0, x, &opts).unwrap();
        assert!((v - u.value(x)).abs() <= 1e-6, "x={x}: {v} vs {}", u.value(x));
    }
}
