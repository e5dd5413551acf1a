//! Forward heat evolution by kernel quadrature, and the integral identities
//! behind the polar machinery.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::profile::Field;
use crate::quad::{integrate, integrate_piecewise, IntegrandDomain, QuadSpec};
use crate::specfun::{bessel_j0, poisson_kernel, polar_kernel_unchecked, scaled_polar_kernel};

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(invalid(format!("tau must be positive and finite, got {tau}")));
    }
    Ok(())
}

/// Panel edges for `int k(x - xi) f(xi) dxi`, where the kernel has scale `sigma`.
fn convolution_breaks(field: &Field, x: f64, sigma: f64, spec: &QuadSpec, radial: bool) -> Result<Option<Vec<f64>>> {
    let reach = spec.truncation_radius_sigmas * sigma;
    let (lo, hi) = if radial { ((x - reach).max(0.0), x + reach) } else { (x - reach, x + reach) };
    let extent = if radial { field.radial_extent(spec.truncation_radius_sigmas, 0) } else { field.line_extent(spec.truncation_radius_sigmas, 0) };
    match extent {
        Ok(ext) => Ok(ext.clip(lo, hi, &[x])),
        // non-integrable data (polynomials): the kernel alone bounds the integrand
        Err(crate::Error::Unsupported(_)) => Ok(Some(if lo < x { vec![lo, x, hi] } else { vec![lo, hi] })),
        Err(e) => Err(e),
    }
}

/// `u(tau, x)` for initial data `f` on the line, by Poisson-kernel quadrature only.
pub fn forward_line_quad(f: &Field, tau: f64, x: f64, spec: &QuadSpec) -> Result<f64> {
    check_tau(tau)?;
    let Some(breaks) = convolution_breaks(f, x, (2.0 * tau).sqrt(), spec, false)? else {
        return Ok(0.0);
    };
    let out = integrate_piecewise(|xi, o: &mut [f64]| o[0] = poisson_kernel(x - xi, tau) * f.value(xi), 1, &breaks, spec)?;
    Ok(out[0].value)
}

/// `u(tau, x)` on the line; closed form when the profile has one.
pub fn forward_line(f: &Field, tau: f64, x: f64, spec: &QuadSpec) -> Result<f64> {
    check_tau(tau)?;
    if let Some(evolved) = f.as_analytic().and_then(|p| p.evolve_line(tau)) {
        return Ok(evolved.value(x));
    }
    forward_line_quad(f, tau, x, spec)
}

/// Radial `u(tau, r) = int_0^inf xi K(r, xi, tau) f(xi) dxi` by quadrature only.
pub fn forward_polar_quad(f: &Field, tau: f64, r: f64, spec: &QuadSpec) -> Result<f64> {
    check_tau(tau)?;
    if r < 0.0 {
        return Err(invalid(format!("radius must be non-negative, got {r}")));
    }
    let Some(breaks) = convolution_breaks(f, r, (2.0 * tau).sqrt(), spec, true)? else {
        return Ok(0.0);
    };
    let out = integrate_piecewise(|xi, o: &mut [f64]| o[0] = xi * polar_kernel_unchecked(r, xi, tau) * f.value(xi), 1, &breaks, spec)?;
    Ok(out[0].value)
}

/// Radial forward evolution; closed form when available.
pub fn forward_polar(f: &Field, tau: f64, r: f64, spec: &QuadSpec) -> Result<f64> {
    check_tau(tau)?;
    if r < 0.0 {
        return Err(invalid(format!("radius must be non-negative, got {r}")));
    }
    if let Some(evolved) = f.as_analytic().and_then(|p| p.evolve_polar(tau)) {
        return Ok(evolved.value(r));
    }
    forward_polar_quad(f, tau, r, spec)
}

/// `(int_0^inf lambda e^{-lambda^2 t} J0(lambda r) J0(lambda xi) dlambda, K(r, xi, t))`.
pub fn weber_integral_check(r: f64, xi: f64, t: f64, spec: &QuadSpec) -> Result<(f64, f64)> {
    let rhs = scaled_polar_kernel(r, xi, t)?;
    // e^{-lambda^2 t} < 1e-30 beyond this point
    let lmax = (30.0 * std::f64::consts::LN_10 / t).sqrt();
    let osc = (r + xi).max(1e-3);
    let n_panels = ((lmax * osc / PI).ceil() as usize).clamp(8, spec.max_panels / 4);
    let breaks: Vec<f64> = (0..=n_panels).map(|k| lmax * k as f64 / n_panels as f64).collect();
    let out = integrate_piecewise(|l, o: &mut [f64]| o[0] = l * (-l * l * t).exp() * bessel_j0(l * r) * bessel_j0(l * xi), 1, &breaks, spec)?;
    Ok((out[0].value, rhs))
}

/// `(J0(lambda x) J0(lambda y), (1/pi) int_0^pi J0(lambda sqrt(x^2+y^2-2xy cos phi)) dphi)`.
pub fn j0_product_check(lambda: f64, x: f64, y: f64, spec: &QuadSpec) -> Result<(f64, f64)> {
    if x < 0.0 || y < 0.0 {
        return Err(invalid(format!("radii must be non-negative, got x={x}, y={y}")));
    }
    let lhs = bessel_j0(lambda * x) * bessel_j0(lambda * y);
    let rho = |phi: f64| (x * x + y * y - 2.0 * x * y * phi.cos()).max(0.0).sqrt();
    let int = integrate(|phi| bessel_j0(lambda * rho(phi)), IntegrandDomain::FiniteInterval { a: 0.0, b: PI }, spec)?;
    Ok((lhs, int.value / PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{AnalyticProfile, Sampled1D};

    fn gauss(a: f64) -> Field {
        AnalyticProfile::gaussian(a).into()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn line_examples() {
        let spec = QuadSpec::default();
        close(forward_line(&gauss(1.0), 1.0, 0.0, &spec).unwrap(), 0.5f64.sqrt(), 1e-15);
        close(forward_line_quad(&gauss(1.0), 1.0, 0.0, &spec).unwrap(), 0.5f64.sqrt(), 1e-10);
        let want = (2.0f64 / 3.0).sqrt() * (-1.0f64 / 6.0).exp();
        close(forward_line_quad(&gauss(1.0), 0.5, 1.0, &spec).unwrap(), want, 1e-10);
        close(forward_line_quad(&gauss(1.0), 1e-8, 1.0, &spec).unwrap(), (-0.25f64).exp(), 1e-7);
    }

    #[test]
    fn polar_examples() {
        let spec = QuadSpec::default();
        close(forward_polar_quad(&gauss(1.0), 1.0, 0.0, &spec).unwrap(), 0.5, 1e-10);
        let want = 2.0 / 3.0 * (-1.0f64 / 3.0).exp();
        close(forward_polar(&gauss(2.0), 1.0, 2.0, &spec).unwrap(), want, 1e-15);
        close(forward_polar_quad(&gauss(2.0), 1.0, 2.0, &spec).unwrap(), want, 1e-10);
        let g = gauss(1.0);
        close(forward_polar_quad(&g, 1e-8, 1.3, &spec).unwrap(), g.value(1.3), 1e-6);
    }

    #[test]
    fn sampled_data_is_zero_extended() {
        let spec = QuadSpec::default();
        let s: Field = Sampled1D::from_fn(-1.0, 1.0, 3, |_| 1.0).unwrap().into();
        // int_{-1}^{1} G_tau(xi) dxi = erf(1/(2 sqrt tau)); tau = 1/4 -> erf(1)
        close(forward_line(&s, 0.25, 0.0, &spec).unwrap(), 0.842_700_792_949_714_9, 1e-10);
    }

    #[test]
    fn weber_examples() {
        let spec = QuadSpec::default();
        let (l, r) = weber_integral_check(0.0, 0.0, 1.0, &spec).unwrap();
        close(l, 0.5, 1e-10);
        close(r, 0.5, 1e-15);
        let (l, r) = weber_integral_check(1.0, 0.0, 1.0, &spec).unwrap();
        close(r, 0.5 * (-0.25f64).exp(), 1e-15);
        close(l, r, 1e-10);
        let (l1, r1) = weber_integral_check(1.5, 0.7, 0.4, &spec).unwrap();
        let (l2, _) = weber_integral_check(0.7, 1.5, 0.4, &spec).unwrap();
        close(l1, r1, 1e-9);
        assert_eq!(l1, l2);
    }

    #[test]
    fn j0_product_examples() {
        let spec = QuadSpec::default();
        let (l, r) = j0_product_check(1.0, 1.0, 1.0, &spec).unwrap();
        close(l, 0.765_197_686_557_966_6f64.powi(2), 1e-15);
        close(l, r, 1e-9);
        let (l, r) = j0_product_check(0.0, 2.0, 3.0, &spec).unwrap();
        assert_eq!(l, 1.0);
        close(r, 1.0, 1e-15);
        let (l, r) = j0_product_check(2.0, 1.3, 0.0, &spec).unwrap();
        close(l, r, 1e-14);
    }

    #[test]
    fn rejects_bad_times() {
        let spec = QuadSpec::default();
        assert!(forward_line(&gauss(1.0), 0.0, 0.0, &spec).is_err());
        assert!(forward_polar(&gauss(1.0), 1.0, -1.0, &spec).is_err());
    }
}
