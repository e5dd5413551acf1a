//! Hermite series on the line: direct (CD-A/B/C), inverse (CI-A/B/C) and the
//! classical derivative expansion (CI-classical).

use crate::error::{invalid, Result};
use crate::profile::Field;
use crate::quad::QuadSpec;
use crate::series::{coefficients, eval_with_plan, evaluate, sum_terms, ConstantsMode, DivergenceDiag, EvalKind, SeriesOptions, Variant};
use crate::specfun::{hermite_batch, KernelParams, SQRT_PI};

fn require(variant: Variant, allowed: &[Variant], what: &str) -> Result<()> {
    if allowed.contains(&variant) {
        Ok(())
    } else {
        Err(invalid(format!("{variant} is not a {what} variant")))
    }
}

const DIRECT: [Variant; 3] = [Variant::CdA, Variant::CdB, Variant::CdC];
const INVERSE: [Variant; 3] = [Variant::CiA, Variant::CiB, Variant::CiC];

/// Moments of the initial data `f` for a direct variant.
///
/// CD-A: `int H_j(xi / 2 sqrt(beta)) f`; CD-B: same at scale `tau + beta`;
/// CD-C: `int H_2j((x - xi) / 2 sqrt(beta)) f` at `x = x_center`.
pub fn cd_coeffs(variant: Variant, f: &Field, params: KernelParams, n: usize, x_center: f64, spec: &QuadSpec) -> Result<Vec<f64>> {
    require(variant, &DIRECT, "direct Cartesian")?;
    coefficients(variant, f, params, n, x_center, spec, ConstantsMode::OracleValidated)
}

/// Truncated direct series at `x`.
pub fn cd_eval(variant: Variant, coeffs: &[f64], params: KernelParams, x: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    require(variant, &DIRECT, "direct Cartesian")?;
    evaluate(variant, coeffs, params, x, opts)
}

/// Moments of the observed field `u(tau, .)` for an inverse variant.
///
/// CI-A: `int H_j(xi / 2 sqrt(tau + beta)) u`; CI-B: `int G_beta(xi) H_j(xi / 2 sqrt(beta)) u`;
/// CI-C: `int H_2j((x - xi) / 2 sqrt(tau + beta)) u` at `x = x_center`.
pub fn ci_coeffs(variant: Variant, u: &Field, params: KernelParams, n: usize, x_center: f64, spec: &QuadSpec) -> Result<Vec<f64>> {
    require(variant, &INVERSE, "inverse Cartesian")?;
    coefficients(variant, u, params, n, x_center, spec, ConstantsMode::OracleValidated)
}

/// Truncated inverse series at `x`.
pub fn ci_eval(variant: Variant, coeffs: &[f64], params: KernelParams, x: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    require(variant, &INVERSE, "inverse Cartesian")?;
    evaluate(variant, coeffs, params, x, opts)
}

/// The sum shared by CD-A and CI-A: moments at scale `moment_scale`, evaluated at `eval_scale`.
///
/// CD-A is `(tau + beta, beta)` and CI-A is `(beta, tau + beta)`.
pub fn line_transfer_sum(eval_scale: f64, moment_scale: f64, coeffs: &[f64], x: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    if !(eval_scale > 0.0) || !(moment_scale > 0.0) {
        return Err(invalid("series scales must be positive"));
    }
    eval_with_plan(EvalKind::LineTransfer { te: eval_scale, rho: moment_scale / eval_scale }, coeffs, x, opts)
}

/// Classical inverse expansion in derivatives of `u` at the origin.
///
/// Validated constants: `f(x) = sum_j u^(j)(0) tau^{j/2} H_j(x / 2 sqrt(tau)) / j!`,
/// the backward heat flow of the Taylor polynomial. Printed constants:
/// `(1/sqrt(pi)) sum_j u^(j)(0) H_j(x / 2 sqrt(tau)) / ((2 sqrt(tau))^{j+1} j!)`.
pub fn ci_classical(u: &Field, tau: f64, n: usize, x: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(invalid(format!("tau must be positive and finite, got {tau}")));
    }
    let d = u.derivatives_at_zero(n)?;
    classical_from_derivatives(&d, tau, x, opts)
}

/// [`ci_classical`] from precomputed derivatives `u^(j)(0)`.
pub fn classical_from_derivatives(d: &[f64], tau: f64, x: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    if d.is_empty() {
        return Err(invalid("at least one derivative is required"));
    }
    let n = d.len() - 1;
    let s = 2.0 * tau.sqrt();
    let mut h = Vec::new();
    hermite_batch(n, x / s, &mut h)?;
    let mut terms = Vec::with_capacity(n + 1);
    let mut factor = match opts.constants_mode {
        ConstantsMode::OracleValidated => 1.0,
        ConstantsMode::PaperLiteral => 1.0 / (SQRT_PI * s),
    };
    for j in 0..=n {
        if j > 0 {
            factor *= match opts.constants_mode {
                ConstantsMode::OracleValidated => tau.sqrt(),
                ConstantsMode::PaperLiteral => 1.0 / s,
            } / j as f64;
        }
        let t = factor * d[j] * h[j];
        crate::error::check_finite("series term", t, || format!("classical term {j} at x={x}"))?;
        terms.push(t);
    }
    Ok(sum_terms(EvalKind::LineTaylor { s: tau, beta: tau }, &terms, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::forward_line;
    use crate::profile::AnalyticProfile;
    use crate::quad::hermite_moment;

    fn gauss(a: f64) -> Field {
        AnalyticProfile::gaussian(a).into()
    }

    fn p(tau: f64, beta: f64) -> KernelParams {
        KernelParams::new(tau, beta).unwrap()
    }

    #[test]
    fn cd_coeff_examples() {
        let spec = QuadSpec::default();
        let c = cd_coeffs(Variant::CdA, &gauss(0.7), p(0.3, 0.7), 4, 0.0, &spec).unwrap();
        assert!((c[0] - 2.0 * (std::f64::consts::PI * 0.7).sqrt()).abs() < 1e-12);
        for cj in &c[1..] {
            assert!(cj.abs() < 1e-10, "{c:?}");
        }
        let c = cd_coeffs(Variant::CdB, &gauss(1.0), p(0.5, 0.5), 2, 0.0, &spec).unwrap();
        assert!(c[2].abs() < 1e-10);
        // closed form: 2 sqrt(t) * hermite_moment(j, t / a)
        let c = cd_coeffs(Variant::CdA, &gauss(1.0), p(0.5, 0.5), 6, 0.0, &spec).unwrap();
        for (j, cj) in c.iter().enumerate() {
            let want = 2.0 * 0.5f64.sqrt() * hermite_moment(j, 0.5).unwrap();
            assert!((cj - want).abs() < 1e-10 * want.abs().max(1.0), "j={j}: {cj} vs {want}");
        }
    }

    #[test]
    fn cd_a_n0_example() {
        let spec = QuadSpec::default();
        let params = p(0.5, 0.5);
        let c = cd_coeffs(Variant::CdA, &gauss(1.0), params, 0, 0.0, &spec).unwrap();
        let (v, _) = cd_eval(Variant::CdA, &c, params, 0.0, &SeriesOptions::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cd_a_full_series_matches_kernel() {
        let spec = QuadSpec::default();
        let params = p(0.5, 0.5);
        let c = cd_coeffs(Variant::CdA, &gauss(1.0), params, 40, 0.0, &spec).unwrap();
        for k in 0..=12 {
            let x = -3.0 + 0.5 * k as f64;
            let (v, d) = cd_eval(Variant::CdA, &c, params, x, &SeriesOptions::default()).unwrap();
            let want = forward_line(&gauss(1.0), 0.5, x, &spec).unwrap();
            assert!((v - want).abs() < 1e-6, "x={x}: {v} vs {want}");
            assert!(!d.flagged);
        }
    }

    #[test]
    fn cd_a_and_ci_a_share_one_sum() {
        let c: Vec<f64> = (0..12).map(|j| ((j * 7 % 5) as f64 - 2.0) * 0.3f64.powi(j)).collect();
        let params = p(0.4, 0.9);
        let opts = SeriesOptions::default();
        for x in [-2.0, -0.3, 0.0, 1.7] {
            let direct = cd_eval(Variant::CdA, &c, params, x, &opts).unwrap();
            let inverse = ci_eval(Variant::CiA, &c, params, x, &opts).unwrap();
            assert_eq!(direct, line_transfer_sum(1.3, 0.9, &c, x, &opts).unwrap());
            assert_eq!(inverse, line_transfer_sum(0.9, 1.3, &c, x, &opts).unwrap());
        }
    }

    #[test]
    fn wrong_family_rejected() {
        let spec = QuadSpec::default();
        assert!(cd_coeffs(Variant::CiA, &gauss(1.0), p(0.5, 0.5), 2, 0.0, &spec).is_err());
        assert!(ci_eval(Variant::CdA, &[1.0], p(0.5, 0.5), 0.0, &SeriesOptions::default()).is_err());
    }

    #[test]
    fn classical_reconstructs_gaussian() {
        let u: Field = AnalyticProfile::gaussian(1.0).evolve_line(0.3).unwrap().into();
        let (v, _) = ci_classical(&u, 0.3, 30, 0.0, &SeriesOptions::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-4, "{v}");
    }
}
