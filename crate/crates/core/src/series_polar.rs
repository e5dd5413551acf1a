//! W-polynomial series for radially symmetric data: direct (PD-A/B/C) and
//! inverse (PI-A/B/C). All radial moments use the measure `xi dxi` on `[0, inf)`.

use crate::error::{invalid, Result};
use crate::profile::Field;
use crate::quad::QuadSpec;
use crate::series::{coefficients, eval_with_plan, evaluate, ConstantsMode, DivergenceDiag, EvalKind, SeriesOptions, Variant};
use crate::specfun::KernelParams;

const DIRECT: [Variant; 3] = [Variant::PdA, Variant::PdB, Variant::PdC];
const INVERSE: [Variant; 3] = [Variant::PiA, Variant::PiB, Variant::PiC];

fn require(variant: Variant, allowed: &[Variant], what: &str) -> Result<()> {
    if allowed.contains(&variant) {
        Ok(())
    } else {
        Err(invalid(format!("{variant} is not a {what} variant")))
    }
}

/// Radial moments of `f` for a direct variant.
///
/// PD-A: `int xi W_j(xi / 2 sqrt(beta)) f`; PD-B: same at scale `tau + beta`;
/// PD-C: angular moments `int [int_0^pi W_j(rho / 2 sqrt(beta)) dphi] xi f` at `r = r_center`.
pub fn pd_coeffs(variant: Variant, f: &Field, params: KernelParams, n: usize, r_center: f64, spec: &QuadSpec) -> Result<Vec<f64>> {
    require(variant, &DIRECT, "direct polar")?;
    coefficients(variant, f, params, n, r_center, spec, ConstantsMode::OracleValidated)
}

pub fn pd_eval(variant: Variant, coeffs: &[f64], params: KernelParams, r: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    require(variant, &DIRECT, "direct polar")?;
    evaluate(variant, coeffs, params, r, opts)
}

/// Radial moments of the observed field for an inverse variant.
///
/// PI-A: scale `tau + beta`; PI-B: scale `beta`; PI-C: angular moments at scale `tau + beta`.
pub fn pi_coeffs(variant: Variant, u: &Field, params: KernelParams, n: usize, r_center: f64, spec: &QuadSpec) -> Result<Vec<f64>> {
    require(variant, &INVERSE, "inverse polar")?;
    coefficients(variant, u, params, n, r_center, spec, ConstantsMode::OracleValidated)
}

pub fn pi_eval(variant: Variant, coeffs: &[f64], params: KernelParams, r: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    require(variant, &INVERSE, "inverse polar")?;
    evaluate(variant, coeffs, params, r, opts)
}

/// The sum shared by PD-A and PI-A, with moments at `moment_scale` evaluated at `eval_scale`.
pub fn polar_transfer_sum(eval_scale: f64, moment_scale: f64, coeffs: &[f64], r: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    if !(eval_scale > 0.0) || !(moment_scale > 0.0) {
        return Err(invalid("series scales must be positive"));
    }
    eval_with_plan(EvalKind::PolarTransfer { te: eval_scale, rho: moment_scale / eval_scale }, coeffs, r, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::forward_polar;
    use crate::profile::AnalyticProfile;
    use crate::specfun::w_poly_eval;

    fn gauss(a: f64) -> Field {
        AnalyticProfile::gaussian(a).into()
    }

    fn p(tau: f64, beta: f64) -> KernelParams {
        KernelParams::new(tau, beta).unwrap()
    }

    #[test]
    fn matched_scale_moments_vanish() {
        let spec = QuadSpec::default();
        let c = pd_coeffs(Variant::PdA, &gauss(1.0), p(0.5, 1.0), 6, 0.0, &spec).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12);
        for cj in &c[1..] {
            assert!(cj.abs() < 1e-10 * 2.0, "{c:?}");
        }
        let u: Field = AnalyticProfile::gaussian(1.0).evolve_polar(0.5).unwrap().into();
        let c = pi_coeffs(Variant::PiA, &u, p(0.5, 1.0), 6, 0.0, &spec).unwrap();
        for cj in &c[1..] {
            assert!(cj.abs() < 1e-10, "{c:?}");
        }
    }

    #[test]
    fn angular_moments_at_origin() {
        let spec = QuadSpec::default();
        let params = p(0.5, 0.8);
        let ang = pd_coeffs(Variant::PdC, &gauss(1.0), params, 4, 0.0, &spec).unwrap();
        let rad = pd_coeffs(Variant::PdA, &gauss(1.0), params, 4, 0.0, &spec).unwrap();
        for (a, r) in ang.iter().zip(&rad) {
            assert!((a - std::f64::consts::PI * r).abs() < 1e-9 * r.abs().max(1.0), "{a} vs {r}");
        }
    }

    #[test]
    fn pd_a_n0_example() {
        let spec = QuadSpec::default();
        let params = p(0.5, 1.0);
        let c = pd_coeffs(Variant::PdA, &gauss(1.0), params, 0, 0.0, &spec).unwrap();
        let (v, _) = pd_eval(Variant::PdA, &c, params, 0.0, &SeriesOptions::default()).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pd_a_full_series_matches_kernel() {
        let spec = QuadSpec::default();
        let params = p(0.5, 0.5);
        let c = pd_coeffs(Variant::PdA, &gauss(1.0), params, 40, 0.0, &spec).unwrap();
        for k in 0..=6 {
            let r = 0.5 * k as f64;
            let (v, _) = pd_eval(Variant::PdA, &c, params, r, &SeriesOptions::default()).unwrap();
            let want = forward_polar(&gauss(1.0), 0.5, r, &spec).unwrap();
            assert!((v - want).abs() < 1e-6, "r={r}: {v} vs {want}");
        }
    }

    #[test]
    fn pd_a_and_pi_a_share_one_sum() {
        let c: Vec<f64> = (0..10).map(|j| w_poly_eval(j, 0.3).unwrap() * 0.2f64.powi(j as i32)).collect();
        let params = p(0.25, 0.6);
        let opts = SeriesOptions::default();
        for r in [0.0, 0.4, 2.2] {
            assert_eq!(pd_eval(Variant::PdA, &c, params, r, &opts).unwrap(), polar_transfer_sum(0.85, 0.6, &c, r, &opts).unwrap());
            assert_eq!(pi_eval(Variant::PiA, &c, params, r, &opts).unwrap(), polar_transfer_sum(0.6, 0.85, &c, r, &opts).unwrap());
        }
    }
}
