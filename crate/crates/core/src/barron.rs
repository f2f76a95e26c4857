//! Lattice Fourier expansions on shifted lattices, the smooth bump and
//! mollified cutoff used to periodize compactly supported extensions,
//! weighted spectral norms and exact Sobolev norms.
//!
//! Modes are `e^{2 pi i (a + z/L) . x}` for integer `z`. On `[0, L]^d` they
//! are orthogonal with squared `H^m` norm `L^d * w_m(a + z/L)`, so every norm
//! of a [`FourierSum`] is a finite sum.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, composite_gauss_legendre, euclidean_norm, QuadratureMethod, QuadratureSpec, RateFit};

/// Relative magnitude below which coefficients are dropped on construction.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// A finite sum `sum_z c_z e^{2 pi i (a + z/L) . x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSum {
    dim: usize,
    period: f64,
    offset: Vec<f64>,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
}

impl FourierSum {
    /// Build a sum, adding up repeated indices and dropping coefficients
    /// smaller than [`DROP_TOLERANCE`] times the largest one.
    pub fn new<I>(dim: usize, period: f64, offset: Vec<f64>, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, Complex64)>,
    {
        let mut fs = Self::empty(dim, period, offset)?;
        for (z, c) in coeffs {
            if z.len() != dim {
                return Err(Error::domain("coeffs", format!("index {z:?} has wrong dimension, expected {dim}")));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::domain("coeffs", format!("non-finite coefficient at {z:?}")));
            }
            *fs.coeffs.entry(z).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        fs.prune();
        Ok(fs)
    }

    pub fn empty(dim: usize, period: f64, offset: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("d", "dimension must be at least 1"));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::domain("L", format!("period must be positive, got {period}")));
        }
        if offset.len() != dim {
            return Err(Error::domain("a", format!("offset has {} components, expected {dim}", offset.len())));
        }
        let cap = 1.0 / period;
        if let Some(bad) = offset.iter().find(|v| !(**v >= 0.0 && **v <= cap * (1.0 + 1e-12))) {
            return Err(Error::domain("a", format!("offset component {bad} outside [0, 1/L]")));
        }
        Ok(FourierSum {
            dim,
            period,
            offset,
            coeffs: BTreeMap::new(),
        })
    }

    fn prune(&mut self) {
        let max = self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
        let cut = DROP_TOLERANCE * max;
        self.coeffs.retain(|_, c| {
            let n = c.norm();
            n > 0.0 && n >= cut
        });
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<i64>, Complex64> {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The shifted frequency `a + z/L`.
    pub fn frequency(&self, z: &[i64]) -> Vec<f64> {
        z.iter()
            .zip(&self.offset)
            .map(|(zi, ai)| ai + *zi as f64 / self.period)
            .collect()
    }

    /// Plain l1 mass of the coefficients.
    pub fn ell1_mass(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Keep the coefficients whose index satisfies `keep`.
    pub fn restrict<F: Fn(&[i64]) -> bool>(&self, keep: F) -> FourierSum {
        FourierSum {
            dim: self.dim,
            period: self.period,
            offset: self.offset.clone(),
            coeffs: self
                .coeffs
                .iter()
                .filter(|(z, _)| keep(z))
                .map(|(z, c)| (z.clone(), *c))
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&FourierSumJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FourierSumJson = serde_json::from_str(text)?;
        FourierSum::new(
            raw.d,
            raw.period,
            raw.a,
            raw.coeffs.into_iter().map(|c| (c.z, Complex64::new(c.re, c.im))),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffJson {
    z: Vec<i64>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct FourierSumJson {
    d: usize,
    #[serde(rename = "L")]
    period: f64,
    a: Vec<f64>,
    coeffs: Vec<CoeffJson>,
}

impl From<&FourierSum> for FourierSumJson {
    fn from(fs: &FourierSum) -> Self {
        FourierSumJson {
            d: fs.dim,
            period: fs.period,
            a: fs.offset.clone(),
            coeffs: fs
                .coeffs
                .iter()
                .map(|(z, c)| CoeffJson {
                    z: z.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }
}

/// Submultiplicative frequency weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightSpec {
    /// `(1 + |xi|)^s`
    Polynomial { s: f64 },
    /// `exp(c |xi|^beta)`
    Subexponential { c: f64, beta: f64 },
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightSpec::Polynomial { s } if !(s >= 0.0) => Err(Error::domain("s", "weight exponent must be >= 0")),
            WeightSpec::Subexponential { c, .. } if !(c > 0.0) => Err(Error::domain("c", "must be > 0")),
            WeightSpec::Subexponential { beta, .. } if !(beta > 0.0 && beta < 1.0) => {
                Err(Error::domain("beta", "must lie in (0, 1)"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        let r = euclidean_norm(xi);
        match *self {
            WeightSpec::Polynomial { s } => (1.0 + r).powf(s),
            WeightSpec::Subexponential { c, beta } => (c * r.powf(beta)).exp(),
        }
    }
}

fn bump(alpha: f64, t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-(1.0 - t * t).powf(1.0 - alpha)).exp()
    }
}

/// The compactly supported bump `exp(-(1 - t^2)^(1 - alpha))` on `(-1, 1)`.
pub fn bump_value(alpha: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(bump(alpha, t))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("alpha", format!("bump exponent must exceed 1, got {alpha}")))
    }
}

const BUMP_PANELS: usize = 512;
const BUMP_ORDER: usize = 16;

/// Fourier transform `int g(t) e^{-2 pi i xi t} dt` of the bump; real
/// because the bump is real and even.
pub fn bump_transform(alpha: f64, xi: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (x, w) = composite_gauss_legendre(-1.0, 1.0, BUMP_ORDER, BUMP_PANELS);
    Ok(x.iter()
        .zip(&w)
        .map(|(t, wt)| wt * bump(alpha, *t) * (2.0 * PI * xi * t).cos())
        .sum())
}

/// Regression of the bump transform's decay against `|xi|^(1 - 1/alpha)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpDecay {
    /// Fitted decay constant (negated slope).
    pub c_alpha: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Goodness of fit of the upper envelope, which is what the decay bound
    /// constrains.
    pub r_squared: f64,
    /// Goodness of fit of the raw `log |g^|` values, which oscillate.
    pub raw_r_squared: f64,
    /// `(xi, |g^(xi)|, log |g^| - fitted line)` for every fitted frequency.
    pub residuals: Vec<(f64, f64, f64)>,
    /// Frequencies whose transform fell below `1e-300`.
    pub excluded: Vec<f64>,
}

/// Fit `log |g^(xi)| ~ intercept - c_alpha |xi|^(1 - 1/alpha)`.
///
/// The transform has sign changes, so the fit runs on the running maximum
/// taken from the high-frequency end (the tightest nonincreasing envelope).
pub fn bump_fourier_decay(alpha: f64, xi_grid: &[f64]) -> Result<BumpDecay> {
    check_alpha(alpha)?;
    let mut grid: Vec<f64> = xi_grid.iter().map(|x| x.abs()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let positive: Vec<f64> = grid.iter().copied().filter(|x| *x > 0.0).collect();
    match (positive.first(), positive.last()) {
        (Some(lo), Some(hi)) if hi / lo >= 10.0 => {}
        _ => return Err(Error::domain("xi_grid", "grid must span at least one decade of |xi|")),
    }
    let p = 1.0 - 1.0 / alpha;
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for &xi in &grid {
        let g = bump_transform(alpha, xi)?.abs();
        if g < 1e-300 {
            excluded.push(xi);
        } else {
            kept.push((xi, g));
        }
    }
    if kept.len() < 2 {
        return Err(Error::domain("xi_grid", "fewer than two frequencies above the underflow floor"));
    }
    let mut envelope = vec![0.0; kept.len()];
    let mut run = 0.0f64;
    for i in (0..kept.len()).rev() {
        run = run.max(kept[i].1);
        envelope[i] = run;
    }
    let xs: Vec<f64> = kept.iter().map(|(xi, _)| xi.powf(p)).collect();
    let env_logs: Vec<f64> = envelope.iter().map(|v| v.ln()).collect();
    let raw_logs: Vec<f64> = kept.iter().map(|(_, g)| g.ln()).collect();
    let env_fit = linear_fit(&xs, &env_logs);
    let raw_fit = linear_fit(&xs, &raw_logs);
    let residuals = kept
        .iter()
        .zip(&xs)
        .map(|((xi, g), x)| (*xi, *g, g.ln() - env_fit.intercept - env_fit.slope * x))
        .collect();
    Ok(BumpDecay {
        c_alpha: -env_fit.slope,
        slope: env_fit.slope,
        intercept: env_fit.intercept,
        r_squared: env_fit.r_squared,
        raw_r_squared: raw_fit.r_squared,
        residuals,
        excluded,
    })
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> RateFit {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    RateFit {
        slope,
        intercept,
        r_squared: if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 },
        points_used: xs.len(),
    }
}

/// Integral of the bump over `[lo, hi] ∩ [-1, 1]` with the given rule.
fn bump_integral(alpha: f64, lo: f64, hi: f64, order: usize, panels: usize) -> f64 {
    let lo = lo.max(-1.0);
    let hi = hi.min(1.0);
    if lo >= hi {
        return 0.0;
    }
    let (x, w) = composite_gauss_legendre(lo, hi, order, panels);
    x.iter().zip(&w).map(|(t, wt)| wt * bump(alpha, *t)).sum()
}

/// One-dimensional smooth cutoff: the bump rescaled to radius `eps/4` and
/// normalized, convolved with the indicator of `[-eps/2, L - 3 eps/2]`.
#[derive(Clone, Debug)]
pub struct Cutoff1d {
    period: f64,
    eps: f64,
    alpha: f64,
    order: usize,
    panels: usize,
    total: f64,
}

impl Cutoff1d {
    pub fn new(period: f64, eps: f64, alpha: f64, spec: &QuadratureSpec) -> Result<Self> {
        check_alpha(alpha)?;
        if !(eps > 0.0) {
            return Err(Error::domain("eps", "must be positive"));
        }
        if !(eps < period / 2.0) {
            return Err(Error::domain("eps", format!("must be below L/2 = {}", period / 2.0)));
        }
        if spec.method != QuadratureMethod::TensorGrid {
            return Err(Error::domain("spec", "the cutoff integral needs a tensor-grid rule"));
        }
        if spec.resolution < 2 || spec.panels < 1 {
            return Err(Error::domain("resolution", "must be at least 2"));
        }
        let total = bump_integral(alpha, -1.0, 1.0, spec.resolution, spec.panels);
        Ok(Cutoff1d {
            period,
            eps,
            alpha,
            order: spec.resolution,
            panels: spec.panels,
            total,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let scale = 4.0 / self.eps;
        let lo = scale * (x - (self.period - 1.5 * self.eps));
        let hi = scale * (x + 0.5 * self.eps);
        if lo <= -1.0 && hi >= 1.0 {
            return 1.0;
        }
        (bump_integral(self.alpha, lo, hi, self.order, self.panels) / self.total).clamp(0.0, 1.0)
    }
}

/// Smooth cutoff equal to 1 on `[0, L - 2 eps]^d` and supported in
/// `[-eps, L - eps]^d`; the tensor product of [`Cutoff1d`].
pub fn mollified_cutoff(x: &[f64], period: f64, eps: f64, alpha: f64, spec: &QuadratureSpec) -> Result<f64> {
    let c = Cutoff1d::new(period, eps, alpha, spec)?;
    Ok(x.iter().map(|xi| c.eval(*xi)).product())
}

/// How the extension is windowed before its lattice coefficients are taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Multiply by the mollified cutoff and transform over `[-eps, L - eps]^d`.
    Mollified,
    /// Project directly over one period `[0, L]^d`; for inputs that are
    /// already `L`-periodic up to the offset phase.
    Periodic,
}

/// Parameters of [`periodize_expand`].
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodizeConfig {
    pub period: f64,
    /// Side of the cube `[0, S]^d` containing the domain of interest.
    pub support: f64,
    pub offset: Vec<f64>,
    /// Lattice indices with `max_j |z_j| <= z_box` are computed.
    pub z_box: i64,
    pub eps: f64,
    pub alpha: f64,
    pub window: Window,
    /// Weight used by the trailing-ring check.
    pub weight: WeightSpec,
    /// Quadrature nodes per unit length and axis; `None` picks a default
    /// from the largest frequency.
    pub nodes_per_unit: Option<usize>,
}

impl PeriodizeConfig {
    pub fn new(dim: usize, period: f64, support: f64, z_box: i64) -> Self {
        PeriodizeConfig {
            period,
            support,
            offset: vec![0.0; dim],
            z_box,
            eps: 1.0,
            alpha: 2.0,
            window: Window::Mollified,
            weight: WeightSpec::Polynomial { s: 0.0 },
            nodes_per_unit: None,
        }
    }

    fn default_nodes_per_unit(&self) -> usize {
        let top = self.z_box as f64 / self.period;
        32usize.max((16.0 * (top + 1.0)).ceil() as usize)
    }
}

/// Lattice expansion together with its truncation diagnostics.
#[derive(Clone, Debug)]
pub struct Periodization {
    pub sum: FourierSum,
    /// Share of the weighted l1 mass sitting on the outermost ring
    /// `max_j |z_j| = z_box`.
    pub ring_fraction: f64,
    pub nodes_per_unit: usize,
    pub warning: Option<String>,
}

const RING_LIMIT: f64 = 0.01;

/// Lattice coefficients `c_z = L^{-d} h^(a + z/L)` of the windowed extension
/// `h = phi * f_e`, computed by tensor quadrature.
///
/// If the outermost ring carries more than 1% of the weighted mass the
/// quadrature is refined once; if the ring is still heavy the result carries
/// a truncation warning.
pub fn periodize_expand<F>(f_e: F, dim: usize, cfg: &PeriodizeConfig) -> Result<Periodization>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(1..=2).contains(&dim) {
        return Err(Error::domain("d", "periodization is implemented for d <= 2"));
    }
    match cfg.window {
        Window::Mollified => {
            let required = (dim as f64).sqrt() * cfg.support + 2.0;
            if !(cfg.period > required) {
                return Err(Error::domain("L", format!("need L > sqrt(d) S + 2 = {required}")));
            }
            if cfg.support > cfg.period - 2.0 * cfg.eps {
                return Err(Error::domain("eps", "domain cube [0, S]^d must fit inside [0, L - 2 eps]^d"));
            }
        }
        Window::Periodic => {
            if !(cfg.period > 0.0 && cfg.support <= cfg.period) {
                return Err(Error::domain("L", "domain cube must fit in one period"));
            }
        }
    }
    if cfg.z_box < 0 {
        return Err(Error::domain("z_box", "must be >= 0"));
    }
    cfg.weight.validate()?;
    let base = cfg.nodes_per_unit.unwrap_or_else(|| cfg.default_nodes_per_unit());
    if base < 2 {
        return Err(Error::domain("nodes_per_unit", "must be at least 2"));
    }
    let first = periodize_at(&f_e, dim, cfg, base)?;
    if first.ring_fraction <= RING_LIMIT {
        return Ok(first);
    }
    let mut second = periodize_at(&f_e, dim, cfg, 2 * base)?;
    if second.ring_fraction > RING_LIMIT {
        second.warning = Some(format!(
            "outer ring |z| = {} carries {:.3}% of the weighted mass; increase z_box",
            cfg.z_box,
            100.0 * second.ring_fraction
        ));
    }
    Ok(second)
}

fn periodize_at<F>(f_e: &F, dim: usize, cfg: &PeriodizeConfig, per_unit: usize) -> Result<Periodization>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let (lo, hi) = match cfg.window {
        Window::Mollified => (-cfg.eps, cfg.period - cfg.eps),
        Window::Periodic => (0.0, cfg.period),
    };
    let order = 16;
    let panels = ((hi - lo) * per_unit as f64 / order as f64).ceil().max(1.0) as usize;
    let (x, w) = composite_gauss_legendre(lo, hi, order, panels);
    let n = x.len();
    let window: Vec<f64> = match cfg.window {
        Window::Mollified => {
            let cut = Cutoff1d::new(cfg.period, cfg.eps, cfg.alpha, &QuadratureSpec::composite(32, 16))?;
            x.iter().map(|v| cut.eval(*v)).collect()
        }
        Window::Periodic => vec![1.0; n],
    };
    // Weighted samples of h on the tensor grid, row-major.
    let mut samples = vec![0.0; n.pow(dim as u32)];
    let mut point = vec![0.0; dim];
    for (idx, slot) in samples.iter_mut().enumerate() {
        let mut rest = idx;
        let mut wt = 1.0;
        for j in (0..dim).rev() {
            let i = rest % n;
            rest /= n;
            point[j] = x[i];
            wt *= w[i] * window[i];
        }
        if wt == 0.0 {
            continue;
        }
        let v = f_e(&point);
        if !v.is_finite() {
            return Err(Error::NonFinite { node: point.clone() });
        }
        *slot = wt * v;
    }
    let zs: Vec<i64> = (-cfg.z_box..=cfg.z_box).collect();
    let nz = zs.len();
    // Per-axis phase tables e^{-2 pi i (a_j + z/L) x}.
    let phases: Vec<Vec<Complex64>> = (0..dim)
        .map(|j| {
            let mut t = Vec::with_capacity(nz * n);
            for z in &zs {
                let eta = cfg.offset[j] + *z as f64 / cfg.period;
                for xi in &x {
                    t.push(Complex64::from_polar(1.0, -2.0 * PI * eta * xi));
                }
            }
            t
        })
        .collect();
    let norm = cfg.period.powi(dim as i32);
    let mut coeffs = Vec::with_capacity(nz.pow(dim as u32));
    if dim == 1 {
        for (iz, z) in zs.iter().enumerate() {
            let row = &phases[0][iz * n..(iz + 1) * n];
            let c: Complex64 = row.iter().zip(&samples).map(|(p, s)| p * s).sum();
            coeffs.push((vec![*z], c / norm));
        }
    } else {
        // Contract the last axis first, then the first axis.
        let mut partial = vec![Complex64::new(0.0, 0.0); n * nz];
        for i0 in 0..n {
            let row = &samples[i0 * n..(i0 + 1) * n];
            for iz in 0..nz {
                let ph = &phases[1][iz * n..(iz + 1) * n];
                partial[i0 * nz + iz] = ph.iter().zip(row).map(|(p, s)| p * s).sum();
            }
        }
        for (iz0, z0) in zs.iter().enumerate() {
            let ph0 = &phases[0][iz0 * n..(iz0 + 1) * n];
            for (iz1, z1) in zs.iter().enumerate() {
                let c: Complex64 = (0..n).map(|i0| ph0[i0] * partial[i0 * nz + iz1]).sum();
                coeffs.push((vec![*z0, *z1], c / norm));
            }
        }
    }
    let sum = FourierSum::new(dim, cfg.period, cfg.offset.clone(), coeffs)?;
    let total = barron_norm(&sum, &cfg.weight);
    let ring: f64 = sum
        .coeffs()
        .iter()
        .filter(|(z, _)| z.iter().map(|v| v.abs()).max() == Some(cfg.z_box))
        .map(|(z, c)| cfg.weight.eval(&sum.frequency(z)) * c.norm())
        .sum();
    let ring_fraction = if total > 0.0 { ring / total } else { 0.0 };
    Ok(Periodization {
        sum,
        ring_fraction,
        nodes_per_unit: per_unit,
        warning: None,
    })
}

/// Result of scanning offsets for the smallest weighted mass.
#[derive(Clone, Debug)]
pub struct OffsetScan {
    pub best: Vec<f64>,
    pub best_mass: f64,
    /// Every `(offset, weighted mass)` evaluated, in scan order.
    pub masses: Vec<(Vec<f64>, f64)>,
}

/// Evaluate the weighted mass of the expansion over a grid of offsets in
/// `[0, 1/L]^d` (`steps` points per axis) and return the minimizer.
///
/// Only existence of a good offset is guaranteed by the averaging argument;
/// the scan is a constructive stand-in.
pub fn scan_offset<F>(f_e: F, dim: usize, cfg: &PeriodizeConfig, steps: usize) -> Result<OffsetScan>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if steps < 1 {
        return Err(Error::domain("steps", "must be at least 1"));
    }
    let h = if steps == 1 { 0.0 } else { 1.0 / (cfg.period * (steps - 1) as f64) };
    let total = steps.pow(dim as u32);
    let mut masses = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rest = idx;
        let mut a = vec![0.0; dim];
        for slot in a.iter_mut().rev() {
            *slot = (rest % steps) as f64 * h;
            rest /= steps;
        }
        let mut local = cfg.clone();
        local.offset = a.clone();
        let p = periodize_expand(&f_e, dim, &local)?;
        masses.push((a, barron_norm(&p.sum, &cfg.weight)));
    }
    let (best, best_mass) = masses
        .iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(a, m)| (a.clone(), *m))
        .expect("at least one offset");
    Ok(OffsetScan { best, best_mass, masses })
}

/// Weighted l1 mass `sum_z mu(a + z/L) |c_z|`.
pub fn barron_norm(fs: &FourierSum, weight: &WeightSpec) -> f64 {
    fs.coeffs
        .iter()
        .map(|(z, c)| weight.eval(&fs.frequency(z)) * c.norm())
        .sum()
}

/// Evaluate the finite sum at `x`.
pub fn evaluate_sum(fs: &FourierSum, x: &[f64]) -> Complex64 {
    fs.coeffs
        .iter()
        .map(|(z, c)| {
            let phase = 2.0 * PI * numerics::dot(&fs.frequency(z), x);
            c * Complex64::from_polar(1.0, phase)
        })
        .sum()
}

/// Exact `H^m([0, L]^d)` norm by orthogonality of the modes.
pub fn hm_norm_exact(fs: &FourierSum, m: u32) -> f64 {
    let energy: f64 = fs
        .coeffs
        .iter()
        .map(|(z, c)| c.norm_sqr() * numerics::sobolev_weight(&fs.frequency(z), m))
        .sum();
    (fs.period.powi(fs.dim as i32) * energy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bump_basics() {
        assert_relative_eq!(bump_value(3.0, 0.0).unwrap(), (-1.0f64).exp());
        assert_eq!(bump_value(2.0, 1.0).unwrap(), 0.0);
        assert_eq!(bump_value(2.0, -1.5).unwrap(), 0.0);
        assert_eq!(bump_value(2.0, 0.5).unwrap(), bump_value(2.0, -0.5).unwrap());
        assert!(bump_value(1.0, 0.0).is_err());
    }

    #[test]
    fn bump_transform_symmetry_and_mass() {
        let g0 = bump_transform(2.0, 0.0).unwrap();
        assert!(g0 > 0.0);
        assert_relative_eq!(g0, 0.44399, epsilon = 1e-4);
        assert_eq!(bump_transform(2.0, 3.3).unwrap(), bump_transform(2.0, -3.3).unwrap());
    }

    #[test]
    fn bump_decay_fit() {
        let grid: Vec<f64> = (1..=64).map(f64::from).collect();
        let fit = bump_fourier_decay(2.0, &grid).unwrap();
        assert!(fit.slope < 0.0);
        assert!(fit.r_squared >= 0.95, "r2 {}", fit.r_squared);
        assert!(bump_fourier_decay(2.0, &[1.0, 2.0, 5.0]).is_err());
    }

    #[test]
    fn cutoff_plateau_and_support() {
        let spec = QuadratureSpec::composite(32, 16);
        assert_eq!(mollified_cutoff(&[0.7, 1.5], 4.0, 1.0, 2.0, &spec).unwrap(), 1.0);
        assert_eq!(mollified_cutoff(&[-1.1, 1.0], 4.0, 1.0, 2.0, &spec).unwrap(), 0.0);
        assert_eq!(mollified_cutoff(&[3.05], 4.0, 1.0, 2.0, &spec).unwrap(), 0.0);
        assert!(mollified_cutoff(&[0.0], 4.0, 2.0, 2.0, &spec).is_err());
    }

    #[test]
    fn cutoff_transition_against_finer_rule() {
        let coarse = QuadratureSpec::composite(32, 16);
        let fine = QuadratureSpec::composite(32, 160);
        let mid = mollified_cutoff(&[-0.5], 4.0, 1.0, 2.0, &coarse).unwrap();
        assert_relative_eq!(mid, 0.5, epsilon = 1e-9);
        for x in [-0.6, -0.45, -0.3, 2.7] {
            let a = mollified_cutoff(&[x], 4.0, 1.0, 2.0, &coarse).unwrap();
            let b = mollified_cutoff(&[x], 4.0, 1.0, 2.0, &fine).unwrap();
            assert!(a > 0.0 && a < 1.0);
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn periodic_input_recovered() {
        let l = 2.0;
        let a = vec![0.2];
        let modes = [(-3i64, c(0.5, -1.0)), (0, c(1.0, 0.0)), (2, c(0.0, 0.25)), (5, c(-0.3, 0.1))];
        let truth = FourierSum::new(1, l, a.clone(), modes.iter().map(|(z, c)| (vec![*z], *c))).unwrap();
        let f = |x: &[f64]| evaluate_sum(&truth, x).re;
        let fi = |x: &[f64]| evaluate_sum(&truth, x).im;
        let mut cfg = PeriodizeConfig::new(1, l, 0.0, 8);
        cfg.offset = a;
        cfg.window = Window::Periodic;
        let re = periodize_expand(f, 1, &cfg).unwrap().sum;
        let im = periodize_expand(fi, 1, &cfg).unwrap().sum;
        for (z, want) in truth.coeffs() {
            let got = re.coeffs().get(z).copied().unwrap_or_default()
                + Complex64::i() * im.coeffs().get(z).copied().unwrap_or_default();
            assert!((got - want).norm() < 1e-8, "z = {z:?}: {got} vs {want}");
        }
    }

    fn sinc(x: f64) -> f64 {
        if x == 0.0 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        }
    }

    // Oracle: direct evaluation of sinc at the probe points.
    #[test]
    fn sinc_reconstruction_on_domain() {
        let cfg = PeriodizeConfig::new(1, 4.0, 1.0, 128);
        let p = periodize_expand(|x: &[f64]| sinc(x[0]), 1, &cfg).unwrap();
        assert!(p.warning.is_none(), "{:?}", p.warning);
        let worst = (0..20)
            .map(|i| {
                let x = i as f64 / 19.0;
                (evaluate_sum(&p.sum, &[x]) - sinc(x)).norm()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-5, "max reconstruction error {worst}");
    }

    #[test]
    fn two_dimensional_reconstruction() {
        let f = |x: &[f64]| (-((x[0] - 0.4).powi(2) + (x[1] - 0.6).powi(2))).exp();
        let cfg = PeriodizeConfig::new(2, 4.0, 1.0, 48);
        let p = periodize_expand(f, 2, &cfg).unwrap();
        for x in [[0.0, 0.0], [0.5, 0.25], [1.0, 0.9]] {
            let err = (evaluate_sum(&p.sum, &x) - f(&x)).norm();
            assert!(err < 1e-3, "error {err} at {x:?}");
        }
    }

    #[test]
    fn zero_function_has_empty_expansion() {
        let cfg = PeriodizeConfig::new(1, 4.0, 1.0, 16);
        let p = periodize_expand(|_| 0.0, 1, &cfg).unwrap();
        assert!(p.sum.is_empty());
    }

    #[test]
    fn periodize_preconditions() {
        let cfg = PeriodizeConfig::new(1, 2.5, 1.0, 4);
        assert!(periodize_expand(|_| 1.0, 1, &cfg).is_err());
        let cfg = PeriodizeConfig::new(3, 9.0, 1.0, 4);
        assert!(periodize_expand(|_| 1.0, 3, &cfg).is_err());
    }

    #[test]
    fn small_ring_budget_warns() {
        let cfg = PeriodizeConfig::new(1, 4.0, 1.0, 2);
        let p = periodize_expand(|x: &[f64]| (-(x[0] - 0.5).powi(2) * 40.0).exp(), 1, &cfg).unwrap();
        assert!(p.warning.is_some());
    }

    #[test]
    fn barron_norm_examples() {
        let one = FourierSum::new(1, 1.0, vec![0.0], [(vec![0], c(1.0, 0.0))]).unwrap();
        assert_eq!(barron_norm(&one, &WeightSpec::Polynomial { s: 3.5 }), 1.0);
        let two = FourierSum::new(1, 1.0, vec![0.0], [(vec![1], c(1.0, 0.0)), (vec![-3], c(0.0, 2.0))]).unwrap();
        assert_relative_eq!(barron_norm(&two, &WeightSpec::Polynomial { s: 1.0 }), 10.0, epsilon = 1e-14);
        assert_relative_eq!(barron_norm(&two, &WeightSpec::Polynomial { s: 0.0 }), two.ell1_mass());
    }

    #[test]
    fn evaluation_examples() {
        let e = FourierSum::empty(2, 1.0, vec![0.0, 0.0]).unwrap();
        assert_eq!(evaluate_sum(&e, &[0.3, 0.1]), c(0.0, 0.0));
        let one = FourierSum::new(2, 1.0, vec![0.0, 0.0], [(vec![0, 0], c(1.0, 0.0))]).unwrap();
        assert_eq!(evaluate_sum(&one, &[0.3, 0.9]), c(1.0, 0.0));
        let two = FourierSum::new(1, 3.0, vec![0.1], [(vec![2], c(1.0, 2.0)), (vec![-7], c(-0.5, 0.5))]).unwrap();
        assert_eq!(evaluate_sum(&two, &[0.0]), c(0.5, 2.5));
    }

    #[test]
    fn hm_norm_examples() {
        let one = FourierSum::new(1, 1.0, vec![0.0], [(vec![0], c(1.0, 0.0))]).unwrap();
        assert_eq!(hm_norm_exact(&one, 0), 1.0);
        let unit = FourierSum::new(1, 1.0, vec![0.0], [(vec![1], c(1.0, 0.0))]).unwrap();
        assert_relative_eq!(hm_norm_exact(&unit, 1), (1.0 + 4.0 * PI * PI).sqrt(), epsilon = 1e-14);
    }

    // Oracle: integrate |f|^2 and |f'|^2 on [0, L] by quadrature, with the
    // derivative formed term by term.
    #[test]
    fn hm_norm_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = 1.5;
        let a = 0.3;
        let modes: Vec<(Vec<i64>, Complex64)> = (0..5)
            .map(|_| (vec![rng.random_range(-6..=6)], c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        let fs = FourierSum::new(1, l, vec![a], modes).unwrap();
        let deriv = |x: f64| -> (Complex64, Complex64) {
            let mut v = c(0.0, 0.0);
            let mut dv = c(0.0, 0.0);
            for (z, cz) in fs.coeffs() {
                let eta = a + z[0] as f64 / l;
                let e = Complex64::from_polar(1.0, 2.0 * PI * eta * x);
                v += cz * e;
                dv += cz * e * c(0.0, 2.0 * PI * eta);
            }
            (v, dv)
        };
        let dom = numerics::AxisBox::cube(1, 0.0, l).unwrap();
        let q = numerics::integrate(
            |x| {
                let (v, dv) = deriv(x[0]);
                v.norm_sqr() + dv.norm_sqr()
            },
            &dom,
            &QuadratureSpec::composite(32, 8),
        )
        .unwrap();
        assert!((q.sqrt() - hm_norm_exact(&fs, 1)).abs() < 1e-6);
    }

    #[test]
    fn parseval_at_order_zero() {
        let fs = FourierSum::new(
            2,
            2.0,
            vec![0.1, 0.4],
            [(vec![1, 0], c(3.0, 4.0)), (vec![0, -2], c(1.0, 0.0))],
        )
        .unwrap();
        let l2: f64 = fs.coeffs().values().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert_eq!(hm_norm_exact(&fs, 0), (4.0f64).sqrt() * l2);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let fs = FourierSum::new(
            2,
            std::f64::consts::E,
            vec![0.1 / 3.0, 0.0],
            [(vec![1, -4], c(PI / 7.0, -1e-300)), (vec![0, 2], c(1.0 / 3.0, 2.0f64.sqrt()))],
        )
        .unwrap();
        let text = fs.to_json().unwrap();
        assert!(text.contains("\"L\""));
        let back = FourierSum::from_json(&text).unwrap();
        assert_eq!(back, fs);
    }

    #[test]
    fn construction_errors() {
        assert!(FourierSum::empty(1, 0.0, vec![0.0]).is_err());
        assert!(FourierSum::empty(1, 2.0, vec![0.6]).is_err());
        assert!(FourierSum::new(2, 1.0, vec![0.0, 0.0], [(vec![1], c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn tiny_coefficients_dropped() {
        let fs = FourierSum::new(1, 1.0, vec![0.0], [(vec![0], c(1.0, 0.0)), (vec![1], c(1e-15, 0.0))]).unwrap();
        assert_eq!(fs.len(), 1);
    }

    proptest! {
        #[test]
        fn weights_submultiplicative(
            xi in prop::collection::vec(-50.0f64..50.0, 3),
            om in prop::collection::vec(-50.0f64..50.0, 3),
            s in 0.0f64..4.0,
            cc in 0.01f64..3.0,
            beta in 0.05f64..0.95,
        ) {
            let sum: Vec<f64> = xi.iter().zip(&om).map(|(a, b)| a + b).collect();
            for w in [WeightSpec::Polynomial { s }, WeightSpec::Subexponential { c: cc, beta }] {
                prop_assert!(w.eval(&sum) <= w.eval(&xi) * w.eval(&om) * (1.0 + 1e-12));
            }
        }

        #[test]
        fn evaluation_is_linear(re in -2.0f64..2.0, im in -2.0f64..2.0, x in -3.0f64..3.0) {
            let a = FourierSum::new(1, 2.0, vec![0.25], [(vec![3], c(re, im))]).unwrap();
            let b = FourierSum::new(1, 2.0, vec![0.25], [(vec![3], c(2.0 * re, 2.0 * im))]).unwrap();
            let va = evaluate_sum(&a, &[x]);
            let vb = evaluate_sum(&b, &[x]);
            prop_assert!((vb - 2.0 * va).norm() < 1e-12);
        }
    }
}
