//! Initial and terminal temperature fields.
//!
//! A [`Field`] is either an [`AnalyticProfile`] (closed form, with exact heat
//! evolution where one exists) or a [`Sampled1D`] grid function, linearly
//! interpolated and zero outside its interval.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::specfun::{hermite_batch, hermite_eval, laguerre_eval};

/// `amplitude * exp(-(x - center)^2 / (4 width_a))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub amplitude: f64,
    pub center: f64,
    pub width_a: f64,
}

impl Gaussian {
    pub fn new(amplitude: f64, center: f64, width_a: f64) -> Result<Self> {
        if !(width_a > 0.0) || !width_a.is_finite() {
            return Err(invalid(format!("Gaussian width must be positive, got {width_a}")));
        }
        if !amplitude.is_finite() || !center.is_finite() {
            return Err(invalid("Gaussian amplitude and center must be finite"));
        }
        Ok(Self { amplitude, center, width_a })
    }

    pub fn unit(width_a: f64) -> Self {
        Self { amplitude: 1.0, center: 0.0, width_a }
    }

    pub fn value(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.amplitude * (-d * d / (4.0 * self.width_a)).exp()
    }

    fn sigma(&self) -> f64 {
        (2.0 * self.width_a).sqrt()
    }
}

/// Closed-form profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnalyticProfile {
    Gaussian(Gaussian),
    Mixture(Vec<Gaussian>),
    /// Smooth compact bump `amplitude * exp(1 - 1/(1 - s^2))`, `s = (x - center)/radius`.
    Bump { center: f64, radius: f64, amplitude: f64 },
    /// `amplitude * H_m(y) e^{-y^2}`, `y = (x - center)/(2 sqrt(width_a))`: a Gaussian derivative.
    HermiteMode { order: usize, width_a: f64, center: f64, amplitude: f64 },
    /// Radial `amplitude * L_m(z^2) e^{-z^2}`, `z = r/(2 sqrt(width_a))`.
    LaguerreMode { order: usize, width_a: f64, amplitude: f64 },
    /// `sum_k coeffs[k] x^k`; not integrable, usable only against decaying weights.
    Polynomial(Vec<f64>),
}

/// Interval carrying (numerically) all of a profile's mass, with panel edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Extent {
    pub breaks: Vec<f64>,
}

impl Extent {
    pub fn lo(&self) -> f64 {
        self.breaks[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// Restrict to `[lo, hi]`, adding extra edges; `None` if the overlap is empty.
    pub fn clip(&self, lo: f64, hi: f64, extra: &[f64]) -> Option<Vec<f64>> {
        let a = self.lo().max(lo);
        let b = self.hi().min(hi);
        if !(a < b) {
            return None;
        }
        let mut edges: Vec<f64> = self.breaks.iter().chain(extra).copied().filter(|&e| e > a && e < b).collect();
        edges.push(a);
        edges.push(b);
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
        Some(edges)
    }
}

fn sorted_edges(mut edges: Vec<f64>) -> Vec<f64> {
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
}

impl AnalyticProfile {
    pub fn gaussian(width_a: f64) -> Self {
        AnalyticProfile::Gaussian(Gaussian::unit(width_a))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            AnalyticProfile::Gaussian(g) => g.value(x),
            AnalyticProfile::Mixture(gs) => gs.iter().map(|g| g.value(x)).sum(),
            AnalyticProfile::Bump { center, radius, amplitude } => {
                let s = (x - center) / radius;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
            AnalyticProfile::HermiteMode { order, width_a, center, amplitude } => {
                let y = (x - center) / (2.0 * width_a.sqrt());
                // finite for every order used in practice; overflow falls back to NaN
                amplitude * hermite_eval(*order, y).unwrap_or(f64::NAN) * (-y * y).exp()
            }
            AnalyticProfile::LaguerreMode { order, width_a, amplitude } => {
                let z2 = x * x / (4.0 * width_a);
                amplitude * laguerre_eval(*order, z2) * (-z2).exp()
            }
            AnalyticProfile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnalyticProfile::Gaussian(g) => Gaussian::new(g.amplitude, g.center, g.width_a).map(|_| ()),
            AnalyticProfile::Mixture(gs) => {
                if gs.is_empty() {
                    return Err(invalid("mixture needs at least one component"));
                }
                gs.iter().try_for_each(|g| Gaussian::new(g.amplitude, g.center, g.width_a).map(|_| ()))
            }
            AnalyticProfile::Bump { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(invalid("bump radius must be positive"));
                }
                Ok(())
            }
            AnalyticProfile::HermiteMode { width_a, .. } | AnalyticProfile::LaguerreMode { width_a, .. } => {
                if !(*width_a > 0.0) {
                    return Err(invalid("mode width must be positive"));
                }
                Ok(())
            }
            AnalyticProfile::Polynomial(c) => {
                if c.is_empty() {
                    return Err(invalid("polynomial needs at least one coefficient"));
                }
                Ok(())
            }
        }
    }

    /// Extent on the line for integrands `profile * (degree-d polynomial)`.
    pub fn line_extent(&self, sigmas: f64, degree: usize) -> Option<Extent> {
        let grow = (degree as f64).sqrt();
        let gauss_edges = |g: &Gaussian, extra: f64| {
            let r = g.sigma() * (sigmas + grow + extra);
            [g.center - r, g.center, g.center + r]
        };
        match self {
            AnalyticProfile::Gaussian(g) => Some(Extent { breaks: gauss_edges(g, 0.0).to_vec() }),
            AnalyticProfile::Mixture(gs) => {
                let all: Vec<[f64; 3]> = gs.iter().map(|g| gauss_edges(g, 0.0)).collect();
                let lo = all.iter().map(|e| e[0]).fold(f64::INFINITY, f64::min);
                let hi = all.iter().map(|e| e[2]).fold(f64::NEG_INFINITY, f64::max);
                let mut edges = vec![lo, hi];
                edges.extend(all.iter().map(|e| e[1]));
                Some(Extent { breaks: sorted_edges(edges) })
            }
            AnalyticProfile::Bump { center, radius, .. } => Some(Extent { breaks: vec![center - radius, *center, center + radius] }),
            AnalyticProfile::HermiteMode { order, width_a, center, .. } => {
                let g = Gaussian::unit(*width_a);
                let r = g.sigma() * (sigmas + grow + (*order as f64).sqrt());
                Some(Extent { breaks: vec![center - r, *center, center + r] })
            }
            AnalyticProfile::LaguerreMode { order, width_a, .. } => {
                let r = Gaussian::unit(*width_a).sigma() * (sigmas + grow + (2.0 * *order as f64).sqrt());
                Some(Extent { breaks: vec![-r, 0.0, r] })
            }
            AnalyticProfile::Polynomial(_) => None,
        }
    }

    /// Extent on `[0, inf)` for radial integrands.
    pub fn radial_extent(&self, sigmas: f64, degree: usize) -> Option<Extent> {
        let ext = self.line_extent(sigmas, degree)?;
        let edges: Vec<f64> = ext.breaks.iter().copied().filter(|&e| e > 0.0).collect();
        if edges.is_empty() {
            return None;
        }
        let mut breaks = vec![0.0];
        breaks.extend(edges);
        Some(Extent { breaks })
    }

    /// Exact forward evolution on the line by time `tau` when known.
    pub fn evolve_line(&self, tau: f64) -> Option<AnalyticProfile> {
        let evolve = |g: &Gaussian| {
            let a = g.width_a + tau;
            Gaussian { amplitude: g.amplitude * (g.width_a / a).sqrt(), center: g.center, width_a: a }
        };
        match self {
            AnalyticProfile::Gaussian(g) => Some(AnalyticProfile::Gaussian(evolve(g))),
            AnalyticProfile::Mixture(gs) => Some(AnalyticProfile::Mixture(gs.iter().map(evolve).collect())),
            AnalyticProfile::HermiteMode { order, width_a, center, amplitude } => {
                let a = width_a + tau;
                Some(AnalyticProfile::HermiteMode { order: *order, width_a: a, center: *center, amplitude: amplitude * (width_a / a).powf(0.5 * (*order as f64 + 1.0)) })
            }
            AnalyticProfile::Polynomial(c) => Some(AnalyticProfile::Polynomial(polynomial_heat_flow(c, tau))),
            AnalyticProfile::Bump { .. } | AnalyticProfile::LaguerreMode { .. } => None,
        }
    }

    /// Exact radial evolution by time `tau` when known.
    pub fn evolve_polar(&self, tau: f64) -> Option<AnalyticProfile> {
        let evolve = |g: &Gaussian| {
            let a = g.width_a + tau;
            Gaussian { amplitude: g.amplitude * g.width_a / a, center: 0.0, width_a: a }
        };
        match self {
            AnalyticProfile::Gaussian(g) if g.center == 0.0 => Some(AnalyticProfile::Gaussian(evolve(g))),
            AnalyticProfile::Mixture(gs) if gs.iter().all(|g| g.center == 0.0) => Some(AnalyticProfile::Mixture(gs.iter().map(evolve).collect())),
            AnalyticProfile::LaguerreMode { order, width_a, amplitude } => {
                let a = width_a + tau;
                Some(AnalyticProfile::LaguerreMode { order: *order, width_a: a, amplitude: amplitude * (width_a / a).powi(*order as i32 + 1) })
            }
            _ => None,
        }
    }

    /// `f^(j)(0)` for `j = 0..=n`, when available in closed form.
    pub fn derivatives_at_zero(&self, n: usize) -> Result<Vec<f64>> {
        let gaussian_derivs = |g: &Gaussian, shift: usize, out: &mut [f64]| -> Result<()> {
            let s = 2.0 * g.width_a.sqrt();
            let y = -g.center / s;
            let mut h = Vec::new();
            hermite_batch(n + shift, y, &mut h)?;
            let env = g.amplitude * (-y * y).exp();
            let mut scale = 1.0;
            for (j, o) in out.iter_mut().enumerate() {
                *o += env * scale * h[j + shift];
                scale *= -1.0 / s;
            }
            Ok(())
        };
        let mut out = vec![0.0; n + 1];
        match self {
            AnalyticProfile::Gaussian(g) => gaussian_derivs(g, 0, &mut out)?,
            AnalyticProfile::Mixture(gs) => {
                for g in gs {
                    gaussian_derivs(g, 0, &mut out)?;
                }
            }
            AnalyticProfile::HermiteMode { order, width_a, center, amplitude } => {
                let g = Gaussian { amplitude: *amplitude, center: *center, width_a: *width_a };
                gaussian_derivs(&g, *order, &mut out)?;
            }
            AnalyticProfile::Polynomial(c) => {
                let mut fact = 1.0;
                for (j, o) in out.iter_mut().enumerate() {
                    if j > 0 {
                        fact *= j as f64;
                    }
                    *o = c.get(j).copied().unwrap_or(0.0) * fact;
                }
            }
            AnalyticProfile::Bump { .. } | AnalyticProfile::LaguerreMode { .. } => {
                return Err(Error::Unsupported("closed-form derivatives for this profile".into()));
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfRange { what: "profile derivative", context: format!("order up to {n}") });
        }
        Ok(out)
    }
}

/// Coefficients of `e^{s d^2/dx^2} p` (any real `s`): `sum_k s^k p^(2k) / k!`.
pub fn polynomial_heat_flow(coeffs: &[f64], s: f64) -> Vec<f64> {
    let mut out = coeffs.to_vec();
    let mut cur = coeffs.to_vec();
    let mut k = 0usize;
    loop {
        // cur <- d^2/dx^2 cur
        let next: Vec<f64> = cur.iter().enumerate().skip(2).map(|(i, &c)| c * (i * (i - 1)) as f64).collect();
        if next.is_empty() {
            break;
        }
        k += 1;
        let factor = s.powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
        for (i, &c) in next.iter().enumerate() {
            out[i] += factor * c;
        }
        cur = next;
    }
    out
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for AnalyticProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gauss_keys = |g: &Gaussian| format!("a={},center={},amp={}", fmt_num(g.width_a), fmt_num(g.center), fmt_num(g.amplitude));
        match self {
            AnalyticProfile::Gaussian(g) => write!(f, "gaussian:{}", gauss_keys(g)),
            AnalyticProfile::Mixture(gs) => write!(f, "mixture:[{}]", gs.iter().map(gauss_keys).collect::<Vec<_>>().join(";")),
            AnalyticProfile::Bump { center, radius, amplitude } => write!(f, "bump:center={center},radius={radius},amp={amplitude}"),
            AnalyticProfile::HermiteMode { order, width_a, center, amplitude } => {
                write!(f, "hermite:order={order},a={width_a},center={center},amp={amplitude}")
            }
            AnalyticProfile::LaguerreMode { order, width_a, amplitude } => write!(f, "laguerre:order={order},a={width_a},amp={amplitude}"),
            AnalyticProfile::Polynomial(c) => write!(f, "poly:[{}]", c.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")),
        }
    }
}

fn parse_keys<'a>(body: &'a str, allowed: &[&str]) -> Result<Vec<(&'a str, f64)>> {
    let mut out = Vec::new();
    for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| invalid(format!("expected key=value, got `{item}`")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(invalid(format!("unknown key `{k}` (allowed: {})", allowed.join(", "))));
        }
        let v: f64 = v.trim().parse().map_err(|_| invalid(format!("`{}` is not a number", v.trim())))?;
        out.push((k, v));
    }
    Ok(out)
}

fn lookup(keys: &[(&str, f64)], name: &str, default: Option<f64>) -> Result<f64> {
    keys.iter().rev().find(|(k, _)| *k == name).map(|(_, v)| *v).or(default).ok_or_else(|| invalid(format!("missing key `{name}`")))
}

fn parse_gaussian(body: &str) -> Result<Gaussian> {
    let body = body.trim().strip_prefix("gaussian:").unwrap_or(body.trim());
    let keys = parse_keys(body, &["a", "center", "amp"])?;
    Gaussian::new(lookup(&keys, "amp", Some(1.0))?, lookup(&keys, "center", Some(0.0))?, lookup(&keys, "a", None)?)
}

fn parse_order(v: f64) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || v > 1000.0 {
        return Err(invalid(format!("order must be a small non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

/// Parses the profile mini-language, e.g. `gaussian:a=1,center=0,amp=1`,
/// `mixture:[a=1,center=-1;a=0.5,center=1,amp=2]`, `bump:center=0,radius=1,amp=1`,
/// `hermite:order=2,a=1`, `laguerre:order=1,a=1`, `poly:[1,0,-2]`.
impl FromStr for AnalyticProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, body) = s.split_once(':').ok_or_else(|| invalid(format!("profile `{s}` needs the form kind:keys")))?;
        let list_body = || -> Result<&str> {
            body.trim().strip_prefix('[').and_then(|b| b.strip_suffix(']')).ok_or_else(|| invalid(format!("`{kind}` expects a bracketed list")))
        };
        let profile = match kind.trim() {
            "gaussian" => AnalyticProfile::Gaussian(parse_gaussian(body)?),
            "mixture" => AnalyticProfile::Mixture(list_body()?.split(';').filter(|c| !c.trim().is_empty()).map(parse_gaussian).collect::<Result<_>>()?),
            "bump" => {
                let keys = parse_keys(body, &["center", "radius", "amp"])?;
                AnalyticProfile::Bump { center: lookup(&keys, "center", Some(0.0))?, radius: lookup(&keys, "radius", Some(1.0))?, amplitude: lookup(&keys, "amp", Some(1.0))? }
            }
            "hermite" => {
                let keys = parse_keys(body, &["order", "a", "center", "amp"])?;
                AnalyticProfile::HermiteMode {
                    order: parse_order(lookup(&keys, "order", None)?)?,
                    width_a: lookup(&keys, "a", None)?,
                    center: lookup(&keys, "center", Some(0.0))?,
                    amplitude: lookup(&keys, "amp", Some(1.0))?,
                }
            }
            "laguerre" => {
                let keys = parse_keys(body, &["order", "a", "amp"])?;
                AnalyticProfile::LaguerreMode { order: parse_order(lookup(&keys, "order", None)?)?, width_a: lookup(&keys, "a", None)?, amplitude: lookup(&keys, "amp", Some(1.0))? }
            }
            "poly" => AnalyticProfile::Polynomial(
                list_body()?.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| invalid(format!("`{}` is not a number", v.trim())))).collect::<Result<_>>()?,
            ),
            other => return Err(invalid(format!("unknown profile kind `{other}` (expected gaussian, mixture, bump, hermite, laguerre, poly)"))),
        };
        profile.validate()?;
        Ok(profile)
    }
}

/// Samples on a uniform grid over `[a, b]`; zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampled1D {
    pub a: f64,
    pub b: f64,
    pub values: Vec<f64>,
}

impl Sampled1D {
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid("a sampled field needs at least two nodes"));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("sample interval must satisfy a < b, got [{a}, {b}]")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sample values must be finite"));
        }
        Ok(Self { a, b, values })
    }

    pub fn from_fn(a: f64, b: f64, n_nodes: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n_nodes < 2 {
            return Err(invalid("a sampled field needs at least two nodes"));
        }
        let h = (b - a) / (n_nodes - 1) as f64;
        Self::new(a, b, (0..n_nodes).map(|i| f(a + i as f64 * h)).collect())
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.n_nodes() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_nodes() {
            self.b
        } else {
            self.a + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    /// Linear interpolation, zero outside `[a, b]`.
    pub fn value(&self, x: f64) -> f64 {
        if x < self.a || x > self.b {
            return 0.0;
        }
        let h = self.spacing();
        let t = (x - self.a) / h;
        let i = (t.floor() as usize).min(self.n_nodes() - 2);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// `u^(j)(0)` for `j = 0..=n` by central differences with spacing `h`.
    ///
    /// Even orders use `delta^j`; odd orders use `delta^(j-1)` composed with the
    /// centred first difference. Both stencils have `2 ceil(j/2) + 1` points.
    pub fn derivatives_at_zero(&self, n: usize) -> Result<Vec<f64>> {
        let h = self.spacing();
        let mut out = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let m = (j + 1) / 2;
            let reach = m as f64 * h;
            if -reach < self.a - 1e-9 * h || reach > self.b + 1e-9 * h {
                return Err(Error::StencilOutOfGrid { order: j });
            }
            let weights = central_stencil(j);
            let acc: f64 = weights.iter().enumerate().map(|(i, &w)| w * self.value((i as f64 - m as f64) * h)).sum();
            let d = acc / h.powi(j as i32);
            if !d.is_finite() {
                return Err(Error::OutOfRange { what: "finite-difference derivative", context: format!("order {j}") });
            }
            out.push(d);
        }
        Ok(out)
    }

    /// Interval and node edges.
    pub fn extent(&self) -> Extent {
        Extent { breaks: self.nodes() }
    }
}

/// Weights on offsets `-m..=m`, `m = ceil(j/2)`, of the order-`j` central difference (times `h^j`).
fn central_stencil(j: usize) -> Vec<f64> {
    let even = j - j % 2;
    let mut w = vec![1.0f64];
    for _ in 0..even / 2 {
        // convolve with [1, -2, 1]
        let mut next = vec![0.0; w.len() + 2];
        for (i, &c) in w.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= 2.0 * c;
            next[i + 2] += c;
        }
        w = next;
    }
    if j % 2 == 1 {
        let mut next = vec![0.0; w.len() + 2];
        for (i, &c) in w.iter().enumerate() {
            next[i] -= 0.5 * c;
            next[i + 2] += 0.5 * c;
        }
        w = next;
    }
    w
}

/// A temperature field: closed form or samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Field {
    Analytic(AnalyticProfile),
    Sampled(Sampled1D),
}

impl From<AnalyticProfile> for Field {
    fn from(p: AnalyticProfile) -> Self {
        Field::Analytic(p)
    }
}

impl From<Sampled1D> for Field {
    fn from(s: Sampled1D) -> Self {
        Field::Sampled(s)
    }
}

impl Field {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Field::Analytic(p) => p.value(x),
            Field::Sampled(s) => s.value(x),
        }
    }

    pub fn line_extent(&self, sigmas: f64, degree: usize) -> Result<Extent> {
        match self {
            Field::Analytic(p) => p.line_extent(sigmas, degree).ok_or_else(|| Error::Unsupported(format!("profile `{p}` is not integrable on the line"))),
            Field::Sampled(s) => Ok(s.extent()),
        }
    }

    pub fn radial_extent(&self, sigmas: f64, degree: usize) -> Result<Extent> {
        match self {
            Field::Analytic(p) => p.radial_extent(sigmas, degree).ok_or_else(|| Error::Unsupported(format!("profile `{p}` is not integrable on the half-line"))),
            Field::Sampled(s) => {
                if s.a < 0.0 {
                    return Err(invalid("radial samples must live on [0, R]"));
                }
                Ok(s.extent())
            }
        }
    }

    pub fn derivatives_at_zero(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            Field::Analytic(p) => p.derivatives_at_zero(n),
            Field::Sampled(s) => s.derivatives_at_zero(n),
        }
    }

    pub fn as_analytic(&self) -> Option<&AnalyticProfile> {
        match self {
            Field::Analytic(p) => Some(p),
            Field::Sampled(_) => None,
        }
    }

    /// Sample onto a uniform grid.
    pub fn sample(&self, a: f64, b: f64, n_nodes: usize) -> Result<Sampled1D> {
        Sampled1D::from_fn(a, b, n_nodes, |x| self.value(x))
    }
}

/// Total mass of a unit-amplitude Gaussian on the line, `2 sqrt(pi a)`.
pub fn gaussian_line_mass(width_a: f64) -> f64 {
    2.0 * (PI * width_a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for src in [
            "gaussian:a=1,center=0.5,amp=2",
            "mixture:[a=1,center=-1,amp=1;a=0.5,center=1,amp=2]",
            "bump:center=0,radius=1.5,amp=1",
            "hermite:order=2,a=1,center=0,amp=1",
            "laguerre:order=1,a=0.7,amp=1",
            "poly:[1,0,-2]",
        ] {
            let p: AnalyticProfile = src.parse().unwrap();
            let again: AnalyticProfile = p.to_string().parse().unwrap();
            assert_eq!(p, again, "{src}");
        }
        let g: AnalyticProfile = "gaussian:a=1".parse().unwrap();
        assert_eq!(g, AnalyticProfile::gaussian(1.0));
    }

    #[test]
    fn parse_errors() {
        assert!("gaussian:a=-1".parse::<AnalyticProfile>().is_err());
        assert!("gaussian:width=1".parse::<AnalyticProfile>().is_err());
        assert!("blob:a=1".parse::<AnalyticProfile>().is_err());
        assert!("mixture:a=1".parse::<AnalyticProfile>().is_err());
        assert!("hermite:order=1.5,a=1".parse::<AnalyticProfile>().is_err());
    }

    #[test]
    fn sampled_interpolation_and_zero_extension() {
        let s = Sampled1D::new(0.0, 2.0, vec![0.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.value(0.5), 1.0);
        assert_eq!(s.value(2.0), 4.0);
        assert_eq!(s.value(2.1), 0.0);
        assert_eq!(s.value(-0.1), 0.0);
        assert!(Sampled1D::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(Sampled1D::new(1.0, 1.0, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn finite_differences_exact_on_low_degree() {
        // order-j stencils are exact for polynomials of degree j + 1
        let s = Sampled1D::from_fn(-1.0, 1.0, 41, |x| x * x - 3.0 * x + 5.0).unwrap();
        let d = s.derivatives_at_zero(2).unwrap();
        for (g, w) in d.iter().zip([5.0, -3.0, 2.0]) {
            assert!((g - w).abs() < 1e-10, "{d:?}");
        }
        let s = Sampled1D::from_fn(-1.0, 1.0, 41, |x| x.powi(4) - x.powi(3)).unwrap();
        let d = s.derivatives_at_zero(3).unwrap();
        assert!((d[3] + 6.0).abs() < 1e-8, "{d:?}");
    }

    #[test]
    fn finite_differences_second_order() {
        let err = |n: usize| {
            let s = Sampled1D::from_fn(-1.0, 1.0, n, |x| (x + 0.3).sin()).unwrap();
            let d = s.derivatives_at_zero(4).unwrap();
            let c = 0.3f64.cos();
            let sn = 0.3f64.sin();
            (d[1] - c).abs().max((d[3] + c).abs()).max((d[4] - sn).abs())
        };
        let ratio = err(41) / err(81);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn stencil_leaving_grid_is_reported() {
        let s = Sampled1D::from_fn(-0.1, 0.1, 5, |x| x).unwrap();
        assert!(matches!(s.derivatives_at_zero(6), Err(Error::StencilOutOfGrid { .. })));
    }

    #[test]
    fn gaussian_derivatives_closed_form() {
        // e^{-(x-1)^2/4}: f'(0) = -(0-1)/2 e^{-1/4}
        let p: AnalyticProfile = "gaussian:a=1,center=1".parse().unwrap();
        let d = p.derivatives_at_zero(2).unwrap();
        let e = (-0.25f64).exp();
        assert!((d[0] - e).abs() < 1e-15);
        assert!((d[1] - 0.5 * e).abs() < 1e-15);
        // f'' = (x-1)^2/4 - 1/2 times e at x=0 -> (1/4 - 1/2) e
        assert!((d[2] + 0.25 * e).abs() < 1e-15);
    }

    #[test]
    fn polynomial_heat_flow_matches_hand_result() {
        // e^{s D^2} x^2 = x^2 + 2s
        assert_eq!(polynomial_heat_flow(&[0.0, 0.0, 1.0], 0.3), vec![0.6, 0.0, 1.0]);
        // backward flow undoes forward flow
        let c = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let back = polynomial_heat_flow(&polynomial_heat_flow(&c, 0.7), -0.7);
        for (x, y) in back.iter().zip(&c) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
