//! Special functions used by the series solutions.
//!
//! Hermite polynomials follow the physicists' convention
//! `H_j(z) = (-1)^j e^{z^2} d^j/dz^j e^{-z^2}`. The W-polynomials are the
//! even polynomials generated by
//!
//! ```text
//! e^{-t^2} I0(2 t z) = sum_j t^{2j} W_j(z) / (2j)!
//! ```
//!
//! Multiplying the two power series gives the explicit form
//! `W_j(z) = (2j)! sum_k (-1)^{j-k} z^{2k} / (k!^2 (j-k)!)`, i.e.
//! `W_j(z) = (-1)^j (2j)!/j! L_j(z^2)` with `L_j` the Laguerre polynomial.
//! Evaluation goes through the Laguerre three-term recurrence, which stays
//! accurate where the alternating monomial sum cancels catastrophically.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_finite, invalid, Error, Result};

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Values of `H_0(z) ..= H_n(z)` by forward recurrence.
pub fn hermite_batch(n: usize, z: f64, out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    out.reserve(n + 1);
    out.push(1.0);
    if n == 0 {
        return Ok(());
    }
    out.push(2.0 * z);
    for k in 1..n {
        let next = 2.0 * z * out[k] - 2.0 * k as f64 * out[k - 1];
        out.push(next);
    }
    match out.iter().position(|v| !v.is_finite()) {
        Some(j) => Err(Error::OutOfRange { what: "Hermite polynomial", context: format!("H_{j}({z})") }),
        None => Ok(()),
    }
}

pub fn hermite_eval(j: usize, z: f64) -> Result<f64> {
    let mut buf = Vec::with_capacity(j + 1);
    hermite_batch(j, z, &mut buf)?;
    Ok(buf[j])
}

/// `H_j(0)`: zero for odd `j`, `(-1)^k (2k)!/k!` for `j = 2k`.
pub fn hermite_at_zero(j: usize) -> Result<f64> {
    if j % 2 == 1 {
        return Ok(0.0);
    }
    let mut value = 1.0;
    for k in 0..j / 2 {
        value *= -2.0 * (2 * k + 1) as f64;
    }
    check_finite("Hermite value at zero", value, || format!("H_{j}(0)"))
}

/// Values of `W_0(z) ..= W_n(z)`.
pub fn w_poly_batch(n: usize, z: f64, out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    out.reserve(n + 1);
    out.push(1.0);
    if n == 0 {
        return Ok(());
    }
    let x = z * z;
    out.push(2.0 * (x - 1.0));
    // W_{j+1} = -2(2j+1)/(j+1) [ (2j+1-x) W_j + 2j(2j-1) W_{j-1} ]
    for j in 1..n {
        let jf = j as f64;
        let lead = -2.0 * (2.0 * jf + 1.0) / (jf + 1.0);
        let next = lead * ((2.0 * jf + 1.0 - x) * out[j] + 2.0 * jf * (2.0 * jf - 1.0) * out[j - 1]);
        out.push(next);
    }
    match out.iter().position(|v| !v.is_finite()) {
        Some(j) => Err(Error::OutOfRange { what: "W-polynomial", context: format!("W_{j}({z})") }),
        None => Ok(()),
    }
}

pub fn w_poly_eval(j: usize, z: f64) -> Result<f64> {
    let mut buf = Vec::with_capacity(j + 1);
    w_poly_batch(j, z, &mut buf)?;
    Ok(buf[j])
}

/// Laguerre polynomial `L_j(x)` by its three-term recurrence.
pub fn laguerre_eval(j: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if j == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..j {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Monomial coefficients of `W_j`: entry `k` multiplies `z^{2k}`.
///
/// Built from the leading `(-1)^j (2j)!/j!` by the exact ratio
/// `c_{k+1}/c_k = -(j-k)/(k+1)^2`.
pub fn w_poly_coefficients(j: usize) -> Result<Vec<f64>> {
    let mut c0 = if j % 2 == 0 { 1.0 } else { -1.0 };
    for i in 1..=j {
        c0 *= (j + i) as f64;
    }
    check_finite("W-polynomial coefficient", c0, || format!("W_{j}"))?;
    let mut coeffs = Vec::with_capacity(j + 1);
    coeffs.push(c0);
    for k in 0..j {
        let prev = coeffs[k];
        coeffs.push(-prev * (j - k) as f64 / ((k + 1) * (k + 1)) as f64);
    }
    Ok(coeffs)
}

/// Which orthogonal family a [`PolynomialFamily`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    Hermite,
    W,
}

/// A polynomial family truncated at `max_order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialFamily {
    pub kind: FamilyKind,
    pub max_order: usize,
}

impl PolynomialFamily {
    pub fn new(kind: FamilyKind, max_order: usize) -> Self {
        Self { kind, max_order }
    }

    pub fn eval_all(&self, z: f64, out: &mut Vec<f64>) -> Result<()> {
        match self.kind {
            FamilyKind::Hermite => hermite_batch(self.max_order, z, out),
            FamilyKind::W => w_poly_batch(self.max_order, z, out),
        }
    }

    pub fn eval(&self, j: usize, z: f64) -> Result<f64> {
        if j > self.max_order {
            return Err(invalid(format!("order {j} exceeds family maximum {}", self.max_order)));
        }
        match self.kind {
            FamilyKind::Hermite => hermite_eval(j, z),
            FamilyKind::W => w_poly_eval(j, z),
        }
    }
}

/// Exponentially scaled modified Bessel function `e^{-|x|} I0(x)`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= 25.0 {
        // positive-term series; no cancellation
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Hankel asymptotic expansion, truncated well before its smallest term
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        while k < 60.0 {
            let next = term * (2.0 * k + 1.0) * (2.0 * k + 1.0) / (8.0 * (k + 1.0) * x);
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Modified Bessel function `I0(x)`. Overflow past `|x| ~ 713` is an error.
pub fn bessel_i0(x: f64) -> Result<f64> {
    let value = bessel_i0_scaled(x) * x.abs().exp();
    check_finite("Bessel I0", value, || format!("I0({x})"))
}

/// Bessel function of the first kind `J0(x)`.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Line heat kernel `e^{-x^2/(4t)} / (2 sqrt(pi t))`.
pub fn poisson_kernel(x: f64, t: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (2.0 * (PI * t).sqrt())
}

/// Radial heat kernel `e^{-(r^2+xi^2)/(4t)} I0(r xi/(2t)) / (2t)`.
///
/// The Gaussian factor and the growth of `I0` are combined in the exponent,
/// so the value stays finite for any radii.
pub fn scaled_polar_kernel(r: f64, xi: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("kernel time must be positive, got {t}")));
    }
    if r < 0.0 || xi < 0.0 {
        return Err(invalid(format!("radii must be non-negative, got r={r}, xi={xi}")));
    }
    Ok(polar_kernel_unchecked(r, xi, t))
}

pub(crate) fn polar_kernel_unchecked(r: f64, xi: f64, t: f64) -> f64 {
    let d = r - xi;
    (-d * d / (4.0 * t)).exp() * bessel_i0_scaled(r * xi / (2.0 * t)) / (2.0 * t)
}

/// `Gamma(j + 1/2) = (2j)! sqrt(pi) / (4^j j!)`.
pub fn gamma_half(j: usize) -> Result<f64> {
    let mut g = SQRT_PI;
    for i in 0..j {
        g *= i as f64 + 0.5;
    }
    check_finite("Gamma(j+1/2)", g, || format!("j = {j}"))
}

/// Time pair `(tau, beta)` of the shifted series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub tau: f64,
    pub beta: f64,
}

impl KernelParams {
    pub fn new(tau: f64, beta: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(invalid(format!("tau must be positive and finite, got {tau}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid(format!("beta must be positive and finite, got {beta}")));
        }
        Ok(Self { tau, beta })
    }

    /// `tau + beta`.
    pub fn shifted(&self) -> f64 {
        self.tau + self.beta
    }
}
