//! Adaptive composite Gauss-Legendre quadrature.
//!
//! Every oracle and every series coefficient integral in the crate goes
//! through this module. Infinite domains are truncated at a multiple of a
//! caller-declared decay scale; the truncated interval is then refined by
//! panel bisection until the difference between a panel's rule and the rule
//! on its two halves meets the tolerance.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};

/// Quadrature configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Infinite domains are cut at this many decay scales.
    pub truncation_radius_sigmas: f64,
    pub max_panels: usize,
    pub nodes_per_panel: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            truncation_radius_sigmas: 12.0,
            max_panels: 4096,
            nodes_per_panel: 16,
        }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(invalid("quadrature tolerances must be positive"));
        }
        if !(self.truncation_radius_sigmas >= 6.0) {
            return Err(invalid("truncation radius must be at least 6 decay scales"));
        }
        if self.max_panels < 4 {
            return Err(invalid("max_panels must be at least 4"));
        }
        if self.nodes_per_panel < 2 {
            return Err(invalid("nodes_per_panel must be at least 2"));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }
}

/// Where an integrand lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IntegrandDomain {
    FiniteInterval { a: f64, b: f64 },
    /// `(-inf, inf)`, truncated symmetrically about `center`.
    WholeLine { center: f64, decay_scale: f64 },
    /// `[0, inf)`.
    HalfLine { decay_scale: f64 },
}

impl IntegrandDomain {
    pub fn whole_line(decay_scale: f64) -> Self {
        IntegrandDomain::WholeLine { center: 0.0, decay_scale }
    }

    /// The finite interval actually integrated.
    pub fn truncate(&self, spec: &QuadSpec) -> Result<(f64, f64)> {
        match *self {
            IntegrandDomain::FiniteInterval { a, b } => {
                if !(a < b) {
                    return Err(invalid(format!("finite interval needs a < b, got [{a}, {b}]")));
                }
                Ok((a, b))
            }
            IntegrandDomain::WholeLine { center, decay_scale } => {
                if !(decay_scale > 0.0) {
                    return Err(invalid("decay scale must be positive"));
                }
                let radius = spec.truncation_radius_sigmas * decay_scale;
                Ok((center - radius, center + radius))
            }
            IntegrandDomain::HalfLine { decay_scale } => {
                if !(decay_scale > 0.0) {
                    return Err(invalid("decay scale must be positive"));
                }
                Ok((0.0, spec.truncation_radius_sigmas * decay_scale))
            }
        }
    }
}

/// Result of a scalar integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub err_estimate: f64,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Roots of `P_n` by Newton iteration from the Chebyshev-like guess.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Cached rule of order `n`.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
        const MAX_CACHED: usize = 256;
        if n <= MAX_CACHED {
            let rules = RULES.get_or_init(|| (0..=MAX_CACHED).map(|k| if k == 0 { GaussLegendre { nodes: vec![], weights: vec![] } } else { GaussLegendre::new(k) }).collect());
            &rules[n]
        } else {
            // rare; leak so the reference can be 'static
            Box::leak(Box::new(GaussLegendre::new(n)))
        }
    }

    /// Apply the rule on `[a, b]` to a scalar integrand.
    pub fn apply(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mid + half * x)).sum::<f64>() * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    abs_value: Vec<f64>,
    err: Vec<f64>,
}

/// Vector integrand evaluated on one panel: `(rule value, |f| rule value)`.
fn panel_rule<F>(f: &F, rule: &GaussLegendre, a: f64, b: f64, dim: usize, scratch: &mut [f64]) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(f64, &mut [f64]),
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut value = vec![0.0; dim];
    let mut abs_value = vec![0.0; dim];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        scratch.iter_mut().for_each(|s| *s = 0.0);
        f(mid + half * x, scratch);
        for i in 0..dim {
            value[i] += w * scratch[i];
            abs_value[i] += w * scratch[i].abs();
        }
    }
    for i in 0..dim {
        value[i] *= half;
        abs_value[i] *= half;
    }
    (value, abs_value)
}

fn make_panel<F>(f: &F, rule: &GaussLegendre, a: f64, b: f64, coarse: Vec<f64>, dim: usize, scratch: &mut [f64]) -> Panel
where
    F: Fn(f64, &mut [f64]),
{
    let m = 0.5 * (a + b);
    let (left, left_abs) = panel_rule(f, rule, a, m, dim, scratch);
    let (right, right_abs) = panel_rule(f, rule, m, b, dim, scratch);
    let value: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
    let abs_value = left_abs.iter().zip(&right_abs).map(|(l, r)| l + r).collect();
    let err = value.iter().zip(&coarse).map(|(v, c)| (v - c).abs()).collect();
    Panel { a, b, value, abs_value, err }
}

/// Integrate a vector-valued integrand `f(x, out)` over `breaks[0]..breaks[last]`.
///
/// `breaks` are initial panel edges (kinks of piecewise data belong here).
/// Component `i` is accepted when its summed error estimate is at most
/// `max(abs_tol, rel_tol |value_i|, 64 eps L1_i)`; the last term is the
/// rounding floor for integrals that cancel.
pub fn integrate_piecewise<F>(f: F, dim: usize, breaks: &[f64], spec: &QuadSpec) -> Result<Vec<Integral>>
where
    F: Fn(f64, &mut [f64]),
{
    spec.validate()?;
    if breaks.len() < 2 {
        return Err(invalid("need at least two panel edges"));
    }
    if breaks.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("panel edges must be strictly increasing"));
    }
    let rule = GaussLegendre::cached(spec.nodes_per_panel);
    let mut scratch = vec![0.0; dim];

    let mut edges = breaks.to_vec();
    // at least four starting panels
    while edges.len() < 5 {
        let (k, _) = edges.windows(2).enumerate().map(|(k, w)| (k, w[1] - w[0])).fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mid = 0.5 * (edges[k] + edges[k + 1]);
        edges.insert(k + 1, mid);
    }
    if edges.len() - 1 > spec.max_panels {
        return Err(invalid(format!("{} initial panels exceed max_panels {}", edges.len() - 1, spec.max_panels)));
    }

    let mut panels: Vec<Panel> = edges
        .windows(2)
        .map(|w| {
            let (coarse, _) = panel_rule(&f, rule, w[0], w[1], dim, &mut scratch);
            make_panel(&f, rule, w[0], w[1], coarse, dim, &mut scratch)
        })
        .collect();

    loop {
        let mut total = vec![0.0; dim];
        let mut total_abs = vec![0.0; dim];
        let mut total_err = vec![0.0; dim];
        for p in &panels {
            for i in 0..dim {
                total[i] += p.value[i];
                total_abs[i] += p.abs_value[i];
                total_err[i] += p.err[i];
            }
        }
        let tol: Vec<f64> = (0..dim)
            .map(|i| spec.abs_tol.max(spec.rel_tol * total[i].abs()).max(64.0 * f64::EPSILON * total_abs[i]))
            .collect();
        let results = || total.iter().zip(&total_err).map(|(&value, &err_estimate)| Integral { value, err_estimate }).collect::<Vec<_>>();
        if total.iter().chain(&total_err).any(|v| !v.is_finite()) {
            return Err(Error::OutOfRange { what: "integrand", context: "non-finite quadrature sum".into() });
        }
        if (0..dim).all(|i| total_err[i] <= tol[i]) {
            return Ok(results());
        }

        // split every panel carrying more than its share of the error budget
        let n = panels.len() as f64;
        let score = |p: &Panel| (0..dim).map(|i| p.err[i] * n / tol[i]).fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..panels.len()).filter(|&k| score(&panels[k]) > 1.0).collect();
        order.sort_by(|&x, &y| score(&panels[y]).total_cmp(&score(&panels[x])).then(x.cmp(&y)));
        let room = spec.max_panels - panels.len();
        if room == 0 || order.is_empty() {
            let worst = (0..dim).max_by(|&x, &y| (total_err[x] / tol[x]).total_cmp(&(total_err[y] / tol[y]))).unwrap_or(0);
            return Err(Error::QuadratureNotConverged { best: total[worst], err_estimate: total_err[worst] });
        }
        order.truncate(room);
        order.sort_unstable();
        let mut next = Vec::with_capacity(panels.len() + order.len());
        let mut split = order.into_iter().peekable();
        for (k, p) in panels.into_iter().enumerate() {
            if split.peek() == Some(&k) {
                split.next();
                let m = 0.5 * (p.a + p.b);
                let (left_coarse, _) = panel_rule(&f, rule, p.a, m, dim, &mut scratch);
                let (right_coarse, _) = panel_rule(&f, rule, m, p.b, dim, &mut scratch);
                next.push(make_panel(&f, rule, p.a, m, left_coarse, dim, &mut scratch));
                next.push(make_panel(&f, rule, m, p.b, right_coarse, dim, &mut scratch));
            } else {
                next.push(p);
            }
        }
        panels = next;
    }
}

/// Vector-valued integration over a domain.
pub fn integrate_many<F>(f: F, dim: usize, domain: IntegrandDomain, spec: &QuadSpec) -> Result<Vec<Integral>>
where
    F: Fn(f64, &mut [f64]),
{
    let (a, b) = domain.truncate(spec)?;
    let breaks = match domain {
        IntegrandDomain::WholeLine { center, .. } => vec![a, center, b],
        _ => vec![a, b],
    };
    integrate_piecewise(f, dim, &breaks, spec)
}

/// Scalar integration over a domain.
pub fn integrate(f: impl Fn(f64) -> f64, domain: IntegrandDomain, spec: &QuadSpec) -> Result<Integral> {
    let out = integrate_many(|x, o: &mut [f64]| o[0] = f(x), 1, domain, spec)?;
    Ok(out[0])
}

/// Closed form of `int_R H_j(y) e^{-c y^2} dy`.
///
/// Zero for odd `j`; `sqrt(pi/c) ((1-c)/c)^k (2k)!/k!` for `j = 2k`
/// (coefficient extraction from `int e^{2sy - s^2 - c y^2} dy`).
pub fn hermite_moment(j: usize, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(invalid(format!("Gaussian rate must be positive, got {c}")));
    }
    if j % 2 == 1 {
        return Ok(0.0);
    }
    let ratio = (1.0 - c) / c;
    let mut value = (PI / c).sqrt();
    for k in 0..j / 2 {
        // ((2k+2)!/(k+1)!) / ((2k)!/k!) = 2(2k+1)
        value *= ratio * 2.0 * (2 * k + 1) as f64;
    }
    crate::error::check_finite("Hermite moment", value, || format!("j={j}, c={c}"))
}
