//! Quadrature over axis-aligned boxes, Sobolev frequency weights and
//! log-log rate fitting.
//!
//! Everything here is a pure function of its inputs. A [`QuadratureSpec`]
//! fully determines its node set, so two integrations with equal specs see
//! bit-identical nodes and weights.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on the three-term recurrence, started from the
/// Tricomi approximation of the roots.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
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
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre nodes on `[lo, hi]`: `panels` equal panels with
/// `order` nodes each.
pub fn composite_gauss_legendre(lo: f64, hi: f64, order: usize, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let panels = panels.max(1);
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let a = lo + width * p as f64;
        let half = 0.5 * width;
        let mid = a + half;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::domain("box", "bounds must be nonempty and of equal dimension"));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::domain("box", format!("degenerate axis [{a}, {b}]")));
            }
        }
        Ok(AxisBox { lo, hi })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn unit(dim: usize) -> Self {
        AxisBox {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Largest Euclidean norm of a point in the box.
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a.abs().max(b.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMethod {
    TensorGrid,
    MonteCarlo,
}

/// How an integral over a box is discretized.
///
/// For the tensor grid, `resolution` is the Gauss–Legendre order per panel
/// and `panels` the number of equal panels per axis. For Monte Carlo,
/// `resolution` is the sample count and `seed` drives the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    pub resolution: usize,
    pub panels: usize,
    pub seed: u64,
}

impl QuadratureSpec {
    pub fn tensor(resolution: usize) -> Self {
        Self::composite(resolution, 1)
    }

    pub fn composite(resolution: usize, panels: usize) -> Self {
        QuadratureSpec {
            method: QuadratureMethod::TensorGrid,
            resolution,
            panels,
            seed: 0,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        QuadratureSpec {
            method: QuadratureMethod::MonteCarlo,
            resolution: samples,
            panels: 1,
            seed,
        }
    }

    /// Tensor Gauss–Legendre up to three dimensions, Monte Carlo above.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim <= 3 {
            Self::composite(16, 4)
        } else {
            Self::monte_carlo(1 << 16, 0x5eed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::domain("resolution", "must be at least 2"));
        }
        if self.panels < 1 {
            return Err(Error::domain("panels", "must be at least 1"));
        }
        Ok(())
    }

    /// Materialize the node set for `domain`.
    pub fn nodes(&self, domain: &AxisBox) -> Result<NodeSet> {
        self.validate()?;
        let d = domain.dim();
        match self.method {
            QuadratureMethod::TensorGrid => {
                let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
                    .map(|j| composite_gauss_legendre(domain.lo[j], domain.hi[j], self.resolution, self.panels))
                    .collect();
                let per_axis = axes[0].0.len();
                let total = per_axis.pow(d as u32);
                let mut coords = Vec::with_capacity(total * d);
                let mut weights = Vec::with_capacity(total);
                let mut idx = vec![0usize; d];
                for _ in 0..total {
                    let mut w = 1.0;
                    for j in 0..d {
                        coords.push(axes[j].0[idx[j]]);
                        w *= axes[j].1[idx[j]];
                    }
                    weights.push(w);
                    for j in (0..d).rev() {
                        idx[j] += 1;
                        if idx[j] < per_axis {
                            break;
                        }
                        idx[j] = 0;
                    }
                }
                Ok(NodeSet { dim: d, coords, weights })
            }
            QuadratureMethod::MonteCarlo => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let n = self.resolution;
                let w = domain.volume() / n as f64;
                let mut coords = Vec::with_capacity(n * d);
                for _ in 0..n {
                    for j in 0..d {
                        let u: f64 = rng.random();
                        coords.push(domain.lo[j] + u * (domain.hi[j] - domain.lo[j]));
                    }
                }
                Ok(NodeSet {
                    dim: d,
                    coords,
                    weights: vec![w; n],
                })
            }
        }
    }
}

/// Quadrature nodes (row-major coordinates) and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.coords.chunks(self.dim).zip(self.weights.iter().copied())
    }
}

/// Integrate a real field over `domain`.
pub fn integrate<F>(f: F, domain: &AxisBox, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let nodes = spec.nodes(domain)?;
    let mut acc = 0.0;
    for (x, w) in nodes.iter() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { node: x.to_vec() });
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Integrate a complex field; real and imaginary parts are accumulated
/// independently on the same nodes.
pub fn integrate_complex<F>(f: F, domain: &AxisBox, spec: &QuadratureSpec) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64,
{
    let nodes = spec.nodes(domain)?;
    let (mut re, mut im) = (0.0, 0.0);
    for (x, w) in nodes.iter() {
        let v = f(x);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite { node: x.to_vec() });
        }
        re += w * v.re;
        im += w * v.im;
    }
    Ok(Complex64::new(re, im))
}

/// Monte Carlo value with its standard-error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Plain Monte Carlo integration reporting the sample standard error.
pub fn integrate_mc<F>(f: F, domain: &AxisBox, samples: usize, seed: u64) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    let spec = QuadratureSpec::monte_carlo(samples, seed);
    let nodes = spec.nodes(domain)?;
    let n = nodes.len() as f64;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for (x, _) in nodes.iter() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { node: x.to_vec() });
        }
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n;
    let var = ((sum_sq / n) - mean * mean).max(0.0) * n / (n - 1.0);
    let vol = domain.volume();
    Ok(McEstimate {
        value: vol * mean,
        std_error: vol * (var / n).sqrt(),
    })
}

/// Exact squared `H^m` norm of a unit-modulus plane wave with frequency
/// `eta` per unit volume: the sum over `|alpha| <= m` of
/// `prod_j (2 pi eta_j)^(2 alpha_j)`.
pub fn sobolev_weight(eta: &[f64], m: u32) -> f64 {
    let m = m as usize;
    // by_degree[t] = sum of monomials of exact total degree t in u_j = (2 pi eta_j)^2
    let mut by_degree = vec![0.0; m + 1];
    by_degree[0] = 1.0;
    for &e in eta {
        let u = (2.0 * PI * e).powi(2);
        let mut next = vec![0.0; m + 1];
        for t in 0..=m {
            let mut pow = 1.0;
            for a in 0..=t {
                next[t] += by_degree[t - a] * pow;
                pow *= u;
            }
        }
        by_degree = next;
    }
    by_degree.iter().sum()
}

/// The comparison function `(1 + |eta|)^(2m)` that [`sobolev_weight`] is
/// equivalent to up to constants depending on `m` and `d`.
pub fn sobolev_comparison(eta: &[f64], m: u32) -> f64 {
    (1.0 + euclidean_norm(eta)).powi(2 * m as i32)
}

pub fn euclidean_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares line through `(log n, log error)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

impl RateFit {
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.slope * n.ln()).exp()
    }
}

/// Fit `log error = intercept + slope * log n`.
///
/// Repeated `n` values are collapsed by averaging their log errors before
/// fitting.
pub fn loglog_fit(samples: &[(f64, f64)]) -> Result<RateFit> {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
    for &(n, e) in samples {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::domain("n", format!("sample size {n} must be >= 1")));
        }
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::domain("error", format!("log undefined for error {e} at n = {n}")));
        }
        pts.push((n, e.ln()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        let mut j = i;
        let mut acc = 0.0;
        while j < pts.len() && pts[j].0 == pts[i].0 {
            acc += pts[j].1;
            j += 1;
        }
        xs.push(pts[i].0.ln());
        ys.push(acc / (j - i) as f64);
        i = j;
    }
    let k = xs.len();
    if k < 2 {
        return Err(Error::domain("samples", "need at least two distinct n values"));
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points_used: k,
    })
}
