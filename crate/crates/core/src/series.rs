//! Machinery shared by the Cartesian and polar series: variant names,
//! constants modes, moment integrals, truncated summation and divergence
//! diagnostics.
//!
//! Every series variant is reduced to a moment kind (how the coefficients
//! are integrated from the data) and an evaluator kind (how the truncated
//! sum is formed). Two families of evaluators cover all variants:
//!
//! * scale-transfer sums `P(x) sum_j Phi_j(x / 2 sqrt(T_e)) rho_j c_j` whose
//!   moments `c_j` are taken at a second scale `T_m`. They represent
//!   `exp((T_e - T_m) d^2/dx^2)` applied to the data and converge
//!   geometrically with ratio `|T_m - a| / T_e` on a Gaussian of width `a`;
//! * even-order sums over the shifted moments `H_2k((x - xi) / 2 sqrt(M))`
//!   (or the angular W moments in polar), which come from expanding
//!   `e^{lambda^2 M}` and integrating `e^{-lambda^2 K}` in closed form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, invalid, Error, Result};
use crate::profile::{Extent, Field};
use crate::quad::{integrate_piecewise, GaussLegendre, QuadSpec};
use crate::specfun::{gamma_half, hermite_batch, w_poly_batch, KernelParams, SQRT_PI};

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 40;

/// Run length of the divergence rule.
pub const GROWTH_RUN: usize = 5;

/// Smallest index at which a growth run may start.
pub const GROWTH_START: usize = 4;

/// Terms below this fraction of the largest term so far never count as growth.
pub const GROWTH_NOISE_FLOOR: f64 = 1e-13;

/// Number of consecutive tiny terms that stops summation early.
pub const EARLY_STOP_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "CD-A")]
    CdA,
    #[serde(rename = "CD-B")]
    CdB,
    #[serde(rename = "CD-C")]
    CdC,
    #[serde(rename = "CI-A")]
    CiA,
    #[serde(rename = "CI-B")]
    CiB,
    #[serde(rename = "CI-C")]
    CiC,
    #[serde(rename = "CI-classical")]
    CiClassical,
    #[serde(rename = "PD-A")]
    PdA,
    #[serde(rename = "PD-B")]
    PdB,
    #[serde(rename = "PD-C")]
    PdC,
    #[serde(rename = "PI-A")]
    PiA,
    #[serde(rename = "PI-B")]
    PiB,
    #[serde(rename = "PI-C")]
    PiC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Line,
    Polar,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Line => "line",
            Geometry::Polar => "polar",
        })
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "line" => Ok(Geometry::Line),
            "polar" => Ok(Geometry::Polar),
            other => Err(invalid(format!("unknown geometry `{other}` (expected line or polar)"))),
        }
    }
}

impl Variant {
    pub const ALL: [Variant; 13] = [
        Variant::CdA,
        Variant::CdB,
        Variant::CdC,
        Variant::CiA,
        Variant::CiB,
        Variant::CiC,
        Variant::CiClassical,
        Variant::PdA,
        Variant::PdB,
        Variant::PdC,
        Variant::PiA,
        Variant::PiB,
        Variant::PiC,
    ];

    /// The twelve shifted series (everything except the classical baseline).
    pub const SERIES: [Variant; 12] = [
        Variant::CdA,
        Variant::CdB,
        Variant::CdC,
        Variant::CiA,
        Variant::CiB,
        Variant::CiC,
        Variant::PdA,
        Variant::PdB,
        Variant::PdC,
        Variant::PiA,
        Variant::PiB,
        Variant::PiC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::CdA => "CD-A",
            Variant::CdB => "CD-B",
            Variant::CdC => "CD-C",
            Variant::CiA => "CI-A",
            Variant::CiB => "CI-B",
            Variant::CiC => "CI-C",
            Variant::CiClassical => "CI-classical",
            Variant::PdA => "PD-A",
            Variant::PdB => "PD-B",
            Variant::PdC => "PD-C",
            Variant::PiA => "PI-A",
            Variant::PiB => "PI-B",
            Variant::PiC => "PI-C",
        }
    }

    pub fn geometry(self) -> Geometry {
        match self {
            Variant::PdA | Variant::PdB | Variant::PdC | Variant::PiA | Variant::PiB | Variant::PiC => Geometry::Polar,
            _ => Geometry::Line,
        }
    }

    pub fn is_inverse(self) -> bool {
        matches!(self, Variant::CiA | Variant::CiB | Variant::CiC | Variant::CiClassical | Variant::PiA | Variant::PiB | Variant::PiC)
    }

    /// Coefficients depend on the evaluation point.
    pub fn is_pointwise(self) -> bool {
        matches!(self, Variant::CdC | Variant::CiC | Variant::PdC | Variant::PiC | Variant::CiClassical)
    }

    pub fn valid_names() -> String {
        Variant::ALL.iter().map(|v| v.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| invalid(format!("unknown variant `{t}` (valid: {})", Variant::valid_names())))
    }
}

/// Which set of series constants to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsMode {
    /// Constants certified against the kernel quadrature.
    #[default]
    OracleValidated,
    /// Constants exactly as printed in the source formulas.
    PaperLiteral,
}

impl fmt::Display for ConstantsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstantsMode::OracleValidated => "oracle_validated",
            ConstantsMode::PaperLiteral => "paper_literal",
        })
    }
}

impl FromStr for ConstantsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "oracle_validated" => Ok(ConstantsMode::OracleValidated),
            "paper_literal" => Ok(ConstantsMode::PaperLiteral),
            other => Err(invalid(format!("unknown constants mode `{other}` (expected oracle_validated or paper_literal)"))),
        }
    }
}

/// Term growth report at one evaluation point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DivergenceDiag {
    pub term_magnitudes: Vec<f64>,
    pub flagged: bool,
    pub first_growth_index: Option<usize>,
}

impl DivergenceDiag {
    /// Applies the growth rule: flagged iff the monitored magnitudes increase
    /// for [`GROWTH_RUN`] consecutive indices starting at `j >= GROWTH_START`.
    ///
    /// Series mixing both parities are monitored through pair blocks
    /// `|t_2k| + |t_2k+1|` (indices `k >= GROWTH_START / 2`), so that vanishing
    /// odd or even terms do not mask growth. Reported indices are term indices.
    pub fn from_terms(terms: &[f64], mixed_parity: bool) -> Self {
        let term_magnitudes: Vec<f64> = terms.iter().map(|t| t.abs()).collect();
        let (seq, start, stride) = if mixed_parity {
            let blocks: Vec<f64> = term_magnitudes.chunks(2).map(|c| c.iter().sum()).collect();
            (blocks, GROWTH_START / 2, 2)
        } else {
            (term_magnitudes.clone(), GROWTH_START, 1)
        };
        let mut running_max = 0.0f64;
        let mut run = 0usize;
        let mut first_growth_index = None;
        for j in 0..seq.len() {
            let grows = j >= 1 && seq[j] > seq[j - 1] && seq[j] > GROWTH_NOISE_FLOOR * running_max && j >= start;
            running_max = running_max.max(seq[j]);
            if grows {
                run += 1;
                if run == GROWTH_RUN {
                    first_growth_index = Some((j + 1 - GROWTH_RUN) * stride);
                    break;
                }
            } else {
                run = 0;
            }
        }
        DivergenceDiag { term_magnitudes, flagged: first_growth_index.is_some(), first_growth_index }
    }
}

/// How a variant's coefficients are integrated from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum MomentKind {
    /// `int H_j(xi / 2 sqrt(t)) f(xi) dxi`.
    Hermite { t: f64 },
    /// `int G_t(xi) H_j(xi / 2 sqrt(t)) f(xi) dxi`.
    WeightedHermite { t: f64 },
    /// `int H_2j((x - xi) / 2 sqrt(t)) f(xi) dxi`.
    ShiftedEvenHermite { t: f64, x: f64 },
    /// `int_0^inf xi W_j(xi / 2 sqrt(t)) f(xi) dxi`.
    RadialW { t: f64 },
    /// `int_0^inf [int_0^pi W_j(rho / 2 sqrt(t)) dphi] xi f(xi) dxi`, `rho^2 = r^2 + xi^2 - 2 r xi cos phi`.
    AngularW { t: f64, r: f64 },
}

/// Constants of the even-order (C) series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum CConstants {
    Validated,
    /// `(-1)^k M^k / ((2 sqrt K)^{2k+1} 2^k k!)`.
    LineDirectPrinted,
    /// `(1/sqrt(pi)) (-1)^k M^k / ((2 sqrt K)^{2k+1} 2^k (2k)!)`.
    LineInversePrinted,
    /// `(1/2) (-1)^k M^k Gamma(k+1/2) / (K^{k+1/2} (2k)!)`.
    PolarDirectPrinted,
    /// `(1/2) (-1)^k M^k Gamma(k+1/2) / (tau^{k+1/2} (2k)!)`.
    PolarInversePrinted { tau: f64 },
}

/// How the truncated sum is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum EvalKind {
    /// `G_te(x) sum_j H_j(x / 2 sqrt(te)) rho^{j/2} / (2^j j!) c_j`.
    LineTransfer { te: f64, rho: f64 },
    /// `sum_j H_j(x / 2 sqrt(s)) (s / beta)^{j/2} / (2^j j!) c_j`.
    LineTaylor { s: f64, beta: f64 },
    /// `sum_k (-1)^k M^k / (sqrt(pi) (2 sqrt K)^{2k+1} k!) c_k`.
    LineEven { k: f64, m: f64, constants: CConstants },
    /// `e^{-r^2/4te} / (2 te) sum_j W_j(r / 2 sqrt(te)) j!^2 rho^j / (2j)!^2 c_j`.
    PolarTransfer { te: f64, rho: f64 },
    /// `(1 / 2 pi) sum_j (-1)^j M^j j! / (K^{j+1} (2j)!) c_j`.
    PolarEven { k: f64, m: f64, constants: CConstants },
}

impl EvalKind {
    fn mixed_parity(&self) -> bool {
        matches!(self, EvalKind::LineTransfer { .. } | EvalKind::LineTaylor { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Plan {
    pub moment: MomentKind,
    pub eval: EvalKind,
}

/// Moment and evaluator for `variant` at evaluation point `x` (used by the C variants only).
pub(crate) fn plan(variant: Variant, p: KernelParams, mode: ConstantsMode, x: f64) -> Result<Plan> {
    let (tau, beta) = (p.tau, p.beta);
    let s = p.shifted();
    let literal = mode == ConstantsMode::PaperLiteral;
    let transfer_line = |te: f64, tm: f64| EvalKind::LineTransfer { te, rho: tm / te };
    let transfer_polar = |te: f64, tm: f64| EvalKind::PolarTransfer { te, rho: tm / te };
    let plan = match variant {
        Variant::CdA => Plan { moment: MomentKind::Hermite { t: beta }, eval: transfer_line(s, beta) },
        Variant::CdB => Plan {
            moment: MomentKind::Hermite { t: s },
            eval: if literal { transfer_line(tau, s) } else { transfer_line(tau + s, s) },
        },
        Variant::CdC => Plan {
            moment: MomentKind::ShiftedEvenHermite { t: beta, x },
            eval: EvalKind::LineEven { k: s, m: beta, constants: if literal { CConstants::LineDirectPrinted } else { CConstants::Validated } },
        },
        Variant::CiA => Plan { moment: MomentKind::Hermite { t: s }, eval: transfer_line(beta, s) },
        Variant::CiB => Plan { moment: MomentKind::WeightedHermite { t: beta }, eval: EvalKind::LineTaylor { s, beta } },
        Variant::CiC => Plan {
            moment: MomentKind::ShiftedEvenHermite { t: s, x },
            eval: EvalKind::LineEven { k: beta, m: s, constants: if literal { CConstants::LineInversePrinted } else { CConstants::Validated } },
        },
        Variant::CiClassical => return Err(invalid("CI-classical is not a shifted series")),
        Variant::PdA => Plan { moment: MomentKind::RadialW { t: beta }, eval: transfer_polar(s, beta) },
        Variant::PdB => Plan {
            moment: MomentKind::RadialW { t: s },
            eval: if literal { transfer_polar(beta, s) } else { transfer_polar(tau + s, s) },
        },
        Variant::PdC => Plan {
            moment: MomentKind::AngularW { t: beta, r: x },
            eval: EvalKind::PolarEven { k: s, m: beta, constants: if literal { CConstants::PolarDirectPrinted } else { CConstants::Validated } },
        },
        Variant::PiA => Plan { moment: MomentKind::RadialW { t: s }, eval: transfer_polar(beta, s) },
        Variant::PiB => {
            if literal {
                // printed: prefactor and W argument at beta + tau, ratio tau / (beta + tau)
                Plan { moment: MomentKind::RadialW { t: beta }, eval: EvalKind::PolarTransfer { te: s, rho: tau / s } }
            } else {
                if !(beta > tau) {
                    return Err(invalid(format!("PI-B needs beta > tau (got beta={beta}, tau={tau})")));
                }
                Plan { moment: MomentKind::RadialW { t: beta }, eval: transfer_polar(beta - tau, beta) }
            }
        }
        Variant::PiC => Plan {
            moment: MomentKind::AngularW { t: s, r: x },
            eval: EvalKind::PolarEven { k: beta, m: s, constants: if literal { CConstants::PolarInversePrinted { tau } } else { CConstants::Validated } },
        },
    };
    if variant.geometry() == Geometry::Polar && x < 0.0 {
        return Err(invalid(format!("radius must be non-negative, got {x}")));
    }
    Ok(plan)
}

fn line_breaks(field: &Field, spec: &QuadSpec, degree: usize, window: Option<(f64, f64)>) -> Result<Option<Vec<f64>>> {
    let ext = match field.line_extent(spec.truncation_radius_sigmas, degree) {
        Ok(e) => e,
        Err(Error::Unsupported(_)) if window.is_some() => {
            let (lo, hi) = window.unwrap();
            Extent { breaks: vec![lo, hi] }
        }
        Err(e) => return Err(e),
    };
    Ok(match window {
        Some((lo, hi)) => ext.clip(lo, hi, &[0.0]),
        None => Some(ext.breaks),
    })
}

fn radial_breaks(field: &Field, spec: &QuadSpec, degree: usize) -> Result<Option<Vec<f64>>> {
    let ext = field.radial_extent(spec.truncation_radius_sigmas, degree)?;
    Ok(ext.clip(0.0, f64::INFINITY, &[]))
}

/// `(1/pi)`-free angular integrals `int_0^pi W_j(rho / 2 sqrt(t)) dphi`, `j = 0..=n`.
///
/// Fixed 64-node Gauss-Legendre, doubled until every component changes by
/// less than `rel_tol` of its magnitude (or of the rounding scale).
pub(crate) fn angular_w_integrals(n: usize, t: f64, r: f64, xi: f64, rel_tol: f64, out: &mut [f64]) -> Result<()> {
    let inv = 1.0 / (2.0 * t.sqrt());
    let mut w = Vec::with_capacity(n + 1);
    let mut rule_sum = |nodes: usize, acc: &mut Vec<f64>, scale: &mut Vec<f64>| -> Result<()> {
        let rule = GaussLegendre::cached(nodes);
        acc.iter_mut().for_each(|v| *v = 0.0);
        scale.iter_mut().for_each(|v| *v = 0.0);
        let half = 0.5 * PI;
        for (&node, &weight) in rule.nodes.iter().zip(&rule.weights) {
            let phi = half * (node + 1.0);
            let rho = (r * r + xi * xi - 2.0 * r * xi * phi.cos()).max(0.0).sqrt();
            w_poly_batch(n, rho * inv, &mut w)?;
            for j in 0..=n {
                acc[j] += half * weight * w[j];
                scale[j] += half * weight * w[j].abs();
            }
        }
        Ok(())
    };
    let mut prev = vec![0.0; n + 1];
    let mut scale = vec![0.0; n + 1];
    rule_sum(64, &mut prev, &mut scale)?;
    if r == 0.0 || xi == 0.0 {
        // integrand constant in phi
        out.copy_from_slice(&prev);
        return Ok(());
    }
    let mut nodes = 64;
    loop {
        nodes *= 2;
        let mut cur = vec![0.0; n + 1];
        rule_sum(nodes, &mut cur, &mut scale)?;
        let done = (0..=n).all(|j| (cur[j] - prev[j]).abs() <= rel_tol * cur[j].abs() + 64.0 * f64::EPSILON * scale[j]);
        prev = cur;
        if done || nodes >= 1024 {
            if !done {
                return Err(Error::QuadratureNotConverged { best: prev[n], err_estimate: f64::NAN });
            }
            out.copy_from_slice(&prev);
            return Ok(());
        }
    }
}

/// Moments `c_0..=c_n` of `field` for the given kind.
pub(crate) fn moments(kind: MomentKind, field: &Field, n: usize, spec: &QuadSpec) -> Result<Vec<f64>> {
    let dim = n + 1;
    let results = match kind {
        MomentKind::Hermite { t } => {
            let Some(breaks) = line_breaks(field, spec, n, None)? else { return Ok(vec![0.0; dim]) };
            let inv = 1.0 / (2.0 * t.sqrt());
            integrate_piecewise(
                |xi, o: &mut [f64]| {
                    let fv = field.value(xi);
                    let mut h = Vec::with_capacity(dim);
                    hermite_batch(n, xi * inv, &mut h).expect("Hermite values finite on the truncated domain");
                    for (oj, hj) in o.iter_mut().zip(&h) {
                        *oj = hj * fv;
                    }
                },
                dim,
                &breaks,
                spec,
            )?
        }
        MomentKind::WeightedHermite { t } => {
            let reach = (2.0 * t).sqrt() * (spec.truncation_radius_sigmas + (n as f64).sqrt());
            let Some(breaks) = line_breaks(field, spec, n, Some((-reach, reach)))? else { return Ok(vec![0.0; dim]) };
            let inv = 1.0 / (2.0 * t.sqrt());
            integrate_piecewise(
                |xi, o: &mut [f64]| {
                    let y = xi * inv;
                    let fv = field.value(xi) * (-y * y).exp() / (2.0 * (PI * t).sqrt());
                    let mut h = Vec::with_capacity(dim);
                    hermite_batch(n, y, &mut h).expect("Hermite values finite on the truncated domain");
                    for (oj, hj) in o.iter_mut().zip(&h) {
                        *oj = hj * fv;
                    }
                },
                dim,
                &breaks,
                spec,
            )?
        }
        MomentKind::ShiftedEvenHermite { t, x } => {
            let Some(breaks) = line_breaks(field, spec, 2 * n, None)? else { return Ok(vec![0.0; dim]) };
            let inv = 1.0 / (2.0 * t.sqrt());
            integrate_piecewise(
                |xi, o: &mut [f64]| {
                    let fv = field.value(xi);
                    let mut h = Vec::with_capacity(2 * n + 1);
                    hermite_batch(2 * n, (x - xi) * inv, &mut h).expect("Hermite values finite on the truncated domain");
                    for (k, oj) in o.iter_mut().enumerate() {
                        *oj = h[2 * k] * fv;
                    }
                },
                dim,
                &breaks,
                spec,
            )?
        }
        MomentKind::RadialW { t } => {
            let Some(breaks) = radial_breaks(field, spec, 2 * n + 1)? else { return Ok(vec![0.0; dim]) };
            let inv = 1.0 / (2.0 * t.sqrt());
            integrate_piecewise(
                |xi, o: &mut [f64]| {
                    let fv = xi * field.value(xi);
                    let mut w = Vec::with_capacity(dim);
                    w_poly_batch(n, xi * inv, &mut w).expect("W values finite on the truncated domain");
                    for (oj, wj) in o.iter_mut().zip(&w) {
                        *oj = wj * fv;
                    }
                },
                dim,
                &breaks,
                spec,
            )?
        }
        MomentKind::AngularW { t, r } => {
            let Some(breaks) = radial_breaks(field, spec, 2 * n + 1)? else { return Ok(vec![0.0; dim]) };
            let failure = std::cell::RefCell::new(None);
            let res = integrate_piecewise(
                |xi, o: &mut [f64]| {
                    let fv = xi * field.value(xi);
                    if fv == 0.0 {
                        o.iter_mut().for_each(|v| *v = 0.0);
                        return;
                    }
                    if let Err(e) = angular_w_integrals(n, t, r, xi, spec.rel_tol, o) {
                        failure.borrow_mut().get_or_insert(e);
                    }
                    o.iter_mut().for_each(|v| *v *= fv);
                },
                dim,
                &breaks,
                spec,
            );
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            res?
        }
    };
    Ok(results.into_iter().map(|i| i.value).collect())
}

/// Summation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub constants_mode: ConstantsMode,
    /// Summation stops once this many consecutive terms fall below `early_stop_tol`.
    pub early_stop_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { constants_mode: ConstantsMode::OracleValidated, early_stop_tol: QuadSpec::default().abs_tol }
    }
}

impl SeriesOptions {
    pub fn with_mode(mode: ConstantsMode) -> Self {
        Self { constants_mode: mode, ..Self::default() }
    }
}

/// Terms `t_0..` of the truncated series for coefficients `c` at point `x`.
pub(crate) fn terms(eval: EvalKind, c: &[f64], x: f64) -> Result<Vec<f64>> {
    let n = c.len().saturating_sub(1);
    let mut out = Vec::with_capacity(c.len());
    match eval {
        EvalKind::LineTransfer { te, rho } => {
            let y = x / (2.0 * te.sqrt());
            let pre = (-y * y).exp() / (2.0 * (PI * te).sqrt());
            let mut h = Vec::new();
            hermite_batch(n, y, &mut h)?;
            let step = 0.5 * rho.sqrt();
            let mut factor = pre;
            for j in 0..c.len() {
                if j > 0 {
                    factor *= step / j as f64;
                }
                out.push(factor * h[j] * c[j]);
            }
        }
        EvalKind::LineTaylor { s, beta } => {
            let mut h = Vec::new();
            hermite_batch(n, x / (2.0 * s.sqrt()), &mut h)?;
            let step = 0.5 * (s / beta).sqrt();
            let mut factor = 1.0;
            for j in 0..c.len() {
                if j > 0 {
                    factor *= step / j as f64;
                }
                out.push(factor * h[j] * c[j]);
            }
        }
        EvalKind::LineEven { k, m, constants } => {
            let base = 2.0 * k.sqrt();
            for (j, &cj) in c.iter().enumerate() {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let jf = j as i32;
                // (M / (2 sqrt K)^2)^j / (2 sqrt K) carried in one product
                let geo = (m / (base * base)).powi(jf) / base;
                let fact_j = factorial(j);
                let factor = match constants {
                    CConstants::Validated => geo / (SQRT_PI * fact_j),
                    CConstants::LineDirectPrinted => geo / (2f64.powi(jf) * fact_j),
                    CConstants::LineInversePrinted => geo / (SQRT_PI * 2f64.powi(jf) * factorial(2 * j)),
                    _ => unreachable!("polar constants on a line series"),
                };
                out.push(sign * factor * cj);
            }
        }
        EvalKind::PolarTransfer { te, rho } => {
            if x < 0.0 {
                return Err(invalid(format!("radius must be non-negative, got {x}")));
            }
            let z = x / (2.0 * te.sqrt());
            let pre = (-z * z).exp() / (2.0 * te);
            let mut w = Vec::new();
            w_poly_batch(n, z, &mut w)?;
            let mut factor = pre;
            for j in 0..c.len() {
                if j > 0 {
                    let jf = j as f64;
                    // j!^2 / (2j)!^2 update: j^2 / ((2j-1)^2 (2j)^2)
                    factor *= rho * jf * jf / ((2.0 * jf - 1.0) * (2.0 * jf)).powi(2);
                }
                out.push(factor * w[j] * c[j]);
            }
        }
        EvalKind::PolarEven { k, m, constants } => {
            let mut ratio = 1.0; // j! / (2j)!
            for (j, &cj) in c.iter().enumerate() {
                let jf = j as f64;
                if j > 0 {
                    ratio *= jf / ((2.0 * jf - 1.0) * (2.0 * jf));
                }
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let factor = match constants {
                    CConstants::Validated => (m / k).powi(j as i32) * ratio / (2.0 * PI * k),
                    CConstants::PolarDirectPrinted => 0.5 * (m / k).powi(j as i32) * gamma_half(j)? / (k.sqrt() * factorial(2 * j)),
                    CConstants::PolarInversePrinted { tau } => 0.5 * (m / tau).powi(j as i32) * gamma_half(j)? / (tau.sqrt() * factorial(2 * j)),
                    _ => unreachable!("line constants on a polar series"),
                };
                out.push(sign * factor * cj);
            }
        }
    }
    for (j, t) in out.iter().enumerate() {
        check_finite("series term", *t, || format!("term {j} at x={x}"))?;
    }
    Ok(out)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Sums terms in ascending order with early stop; returns value and diagnostics.
///
/// Mixed-parity series stop on runs of small pair blocks, as in the growth
/// rule: a zero of `H_2k` at `x` together with vanishing odd moments would
/// otherwise end the sum early. Leading small terms never count: data
/// orthogonal to the low orders have vanishing leading moments.
pub(crate) fn sum_terms(eval: EvalKind, terms: &[f64], opts: &SeriesOptions) -> (f64, DivergenceDiag) {
    let block = if eval.mixed_parity() { 2 } else { 1 };
    let mut small = 0usize;
    let mut started = false;
    let mut used = terms.len();
    for (k, chunk) in terms.chunks(block).enumerate() {
        let size: f64 = chunk.iter().map(|t| t.abs()).sum();
        started |= size >= opts.early_stop_tol;
        if started && size < opts.early_stop_tol {
            small += 1;
            if small == EARLY_STOP_RUN {
                used = (k * block + chunk.len()).min(terms.len());
                break;
            }
        } else {
            small = 0;
        }
    }
    let value = terms[..used].iter().sum();
    (value, DivergenceDiag::from_terms(&terms[..used], eval.mixed_parity()))
}

/// Evaluates the truncated series of `variant` from precomputed coefficients.
pub(crate) fn eval_with_plan(eval: EvalKind, coeffs: &[f64], x: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    if coeffs.is_empty() {
        return Err(invalid("at least one coefficient is required"));
    }
    let t = terms(eval, coeffs, x)?;
    Ok(sum_terms(eval, &t, opts))
}

/// Coefficients of `variant` for `field`; `point` is the evaluation point for the C variants.
pub fn coefficients(variant: Variant, field: &Field, params: KernelParams, n: usize, point: f64, spec: &QuadSpec, mode: ConstantsMode) -> Result<Vec<f64>> {
    let p = plan(variant, params, mode, point)?;
    moments(p.moment, field, n, spec)
}

/// Evaluates `variant` from coefficients produced by [`coefficients`] at point `x`.
pub fn evaluate(variant: Variant, coeffs: &[f64], params: KernelParams, x: f64, opts: &SeriesOptions) -> Result<(f64, DivergenceDiag)> {
    let p = plan(variant, params, opts.constants_mode, x)?;
    eval_with_plan(p.eval, coeffs, x, opts)
}

/// A computed series: the record that is serialized alongside results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSolution {
    pub variant: Variant,
    pub tau: f64,
    /// Absent for the classical baseline.
    pub beta: Option<f64>,
    pub order_n: usize,
    pub coeffs: Vec<f64>,
    pub constants_mode: ConstantsMode,
    pub diagnostics: DivergenceDiag,
}

/// Evaluates one variant at many points, reusing coefficients where the
/// variant allows it.
#[derive(Debug, Clone)]
pub struct SeriesSolver {
    variant: Variant,
    field: Field,
    params: KernelParams,
    order: usize,
    spec: QuadSpec,
    opts: SeriesOptions,
    shared: Option<Vec<f64>>,
}

impl SeriesSolver {
    pub fn new(variant: Variant, field: Field, params: KernelParams, order: usize, spec: QuadSpec, opts: SeriesOptions) -> Result<Self> {
        if variant == Variant::CiClassical {
            return Err(invalid("use ci_classical for the classical baseline"));
        }
        spec.validate()?;
        // build the plan once to validate parameters
        plan(variant, params, opts.constants_mode, 0.0)?;
        let shared = if variant.is_pointwise() { None } else { Some(coefficients(variant, &field, params, order, 0.0, &spec, opts.constants_mode)?) };
        Ok(Self { variant, field, params, order, spec, opts, shared })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    /// Coefficients used at `x`.
    pub fn coeffs_at(&self, x: f64) -> Result<Vec<f64>> {
        match &self.shared {
            Some(c) => Ok(c.clone()),
            None => coefficients(self.variant, &self.field, self.params, self.order, x, &self.spec, self.opts.constants_mode),
        }
    }

    pub fn eval(&self, x: f64) -> Result<(f64, DivergenceDiag)> {
        let p = plan(self.variant, self.params, self.opts.constants_mode, x)?;
        match &self.shared {
            Some(c) => eval_with_plan(p.eval, c, x, &self.opts),
            None => {
                let c = moments(p.moment, &self.field, self.order, &self.spec)?;
                eval_with_plan(p.eval, &c, x, &self.opts)
            }
        }
    }

    /// Serializable record with diagnostics at `probe`.
    pub fn solution(&self, probe: f64) -> Result<SeriesSolution> {
        let coeffs = self.coeffs_at(probe)?;
        let (_, diagnostics) = self.eval(probe)?;
        Ok(SeriesSolution {
            variant: self.variant,
            tau: self.params.tau,
            beta: Some(self.params.beta),
            order_n: self.order,
            coeffs,
            constants_mode: self.opts.constants_mode,
            diagnostics,
        })
    }
}

fn weighted_moments(field: &Field, spec: &QuadSpec, radial: bool) -> Result<[f64; 3]> {
    let breaks = if radial { radial_breaks(field, spec, 3)? } else { line_breaks(field, spec, 2, None)? };
    let Some(breaks) = breaks else { return Err(invalid("profile has no mass")) };
    let m = integrate_piecewise(
        |x, o: &mut [f64]| {
            let w = field.value(x).abs() * if radial { x } else { 1.0 };
            o[0] = w;
            o[1] = w * x;
            o[2] = w * x * x;
        },
        3,
        &breaks,
        spec,
    )?;
    Ok([m[0].value, m[1].value, m[2].value])
}

/// Time-like width of line data: half the variance of `|f|` normalised as a density.
pub fn line_scale_estimate(field: &Field, spec: &QuadSpec) -> Result<f64> {
    let [m0, m1, m2] = weighted_moments(field, spec, false)?;
    let peak = field.line_extent(spec.truncation_radius_sigmas, 0)?.breaks.iter().map(|&x| field.value(x).abs()).fold(0.0, f64::max);
    if !(m0 > 1e-12 * peak.max(f64::MIN_POSITIVE)) || !(m0 > 1e-300) {
        return Err(invalid("profile mass is too small to estimate its width"));
    }
    let mean = m1 / m0;
    let var = m2 / m0 - mean * mean;
    let a = check_finite("width estimate", 0.5 * var, || "line second moment".into())?;
    if !(a > 0.0) {
        return Err(invalid("profile width estimate is not positive"));
    }
    Ok(a)
}

/// Time-like width of radial data: `E[r^2] / 4` under the measure `|f(r)| r dr`.
pub fn radial_scale_estimate(field: &Field, spec: &QuadSpec) -> Result<f64> {
    let [m0, _, m2] = weighted_moments(field, spec, true)?;
    if !(m0 > 1e-300) {
        return Err(invalid("profile mass is too small to estimate its width"));
    }
    let a = check_finite("width estimate", 0.25 * m2 / m0, || "radial second moment".into())?;
    if !(a > 0.0) {
        return Err(invalid("profile width estimate is not positive"));
    }
    Ok(a)
}

/// `beta = max(a - tau, tau / 2)`, where `a` is the width of the data the series
/// consumes (initial data for direct variants, observed data for inverse ones).
pub fn beta_rule(a: f64, tau: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("width estimate must be positive and finite, got {a}")));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(invalid(format!("tau must be positive and finite, got {tau}")));
    }
    Ok((a - tau).max(0.5 * tau))
}

/// `beta` from [`beta_rule`] with the width estimated from `data`.
pub fn auto_beta(variant: Variant, data: &Field, tau: f64, spec: &QuadSpec) -> Result<f64> {
    let a = match variant.geometry() {
        Geometry::Line => line_scale_estimate(data, spec)?,
        Geometry::Polar => radial_scale_estimate(data, spec)?,
    };
    beta_rule(a, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        let err = "CD-Z".parse::<Variant>().unwrap_err().to_string();
        assert!(err.contains("PI-C") && err.contains("CI-classical"));
    }

    #[test]
    fn divergence_rule() {
        let grow: Vec<f64> = (0..12).map(|j| if j < 4 { 1.0 / (j + 1) as f64 } else { 2f64.powi(j) }).collect();
        let d = DivergenceDiag::from_terms(&grow, false);
        assert!(d.flagged);
        assert_eq!(d.first_growth_index, Some(4));
        let decay: Vec<f64> = (0..20).map(|j| 0.5f64.powi(j)).collect();
        assert!(!DivergenceDiag::from_terms(&decay, false).flagged);
        // growth before j = 4 does not count
        let early = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 0.1];
        assert!(!DivergenceDiag::from_terms(&early, false).flagged);
        // zero odd terms do not hide growth of the even ones
        let alternating: Vec<f64> = (0..30).map(|j| if j % 2 == 1 { 0.0 } else { 1.5f64.powi(j) }).collect();
        assert!(!DivergenceDiag::from_terms(&alternating, false).flagged);
        assert!(DivergenceDiag::from_terms(&alternating, true).flagged);
    }

    #[test]
    fn roundoff_terms_are_not_growth() {
        let mut t = vec![1.0];
        t.extend((1..15).map(|j| 1e-18 * j as f64));
        assert!(!DivergenceDiag::from_terms(&t, false).flagged);
    }

    #[test]
    fn beta_rule_examples() {
        assert!((beta_rule(1.0, 0.3).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(beta_rule(0.2, 0.3).unwrap(), 0.15);
        assert!(beta_rule(0.0, 0.3).is_err());
        assert!(beta_rule(f64::NAN, 0.3).is_err());
    }

    #[test]
    fn early_stop_needs_three_small_terms() {
        let eval = EvalKind::LineEven { k: 1.0, m: 1.0, constants: CConstants::Validated };
        let opts = SeriesOptions::default();
        let (v, d) = sum_terms(eval, &[1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 7.0], &opts);
        assert_eq!(v, 1.5);
        assert_eq!(d.term_magnitudes.len(), 7);
    }

    #[test]
    fn early_stop_uses_pair_blocks_for_mixed_parity() {
        // H_2 vanishes at 1/sqrt(2): with zero odd moments, terms 1..=3 are all zero
        let eval = EvalKind::LineTaylor { s: 1.0, beta: 1.0 };
        let opts = SeriesOptions::default();
        let (v, d) = sum_terms(eval, &[1.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.125, 0.0], &opts);
        assert_eq!(v, 1.375);
        assert_eq!(d.term_magnitudes.len(), 8);
        let (v, d) = sum_terms(eval, &[1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 9.0], &opts);
        assert_eq!(v, 1.5);
        assert_eq!(d.term_magnitudes.len(), 8);
    }
}
