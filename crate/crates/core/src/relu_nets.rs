//! ReLU^k units and networks, exact monomial representations, local Taylor
//! pieces of ridge units and a cube-partition compiler for smooth targets.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, composite_gauss_legendre, dot, gauss_legendre, AxisBox, QuadratureSpec};

/// `max(0, t)^k` with `0^0 = 0`, so `sigma_0` is the Heaviside step with
/// value 0 at the origin.
pub fn sigma_k(t: f64, k: u32) -> f64 {
    if t > 0.0 {
        t.powi(k as i32)
    } else {
        0.0
    }
}

/// `a * sigma_k(omega . x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluUnit {
    pub outer: Complex64,
    pub direction: Vec<f64>,
    pub bias: f64,
    pub power: u32,
}

impl ReluUnit {
    pub fn new(outer: Complex64, direction: Vec<f64>, bias: f64, power: u32) -> Self {
        ReluUnit {
            outer,
            direction,
            bias,
            power,
        }
    }

    /// A constant: zero direction and unit bias, so the activation is 1.
    pub fn constant(value: Complex64, dim: usize, power: u32) -> Self {
        ReluUnit::new(value, vec![0.0; dim], 1.0, power)
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.outer * sigma_k(dot(&self.direction, x) + self.bias, self.power)
    }

    /// Unit-norm direction (to 1e-12) and bias inside `[lo, hi]`.
    pub fn is_dictionary_unit(&self, lo: f64, hi: f64) -> bool {
        (numerics::euclidean_norm(&self.direction) - 1.0).abs() <= 1e-12 && self.bias >= lo && self.bias <= hi
    }
}

/// A shallow network `sum_i a_i sigma_{k_i}(omega_i . x + b_i)` with every
/// `k_i <= k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluNetwork {
    k: u32,
    dim: usize,
    units: Vec<ReluUnit>,
}

impl ReluNetwork {
    pub fn new(k: u32, dim: usize, units: Vec<ReluUnit>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("d", "must be >= 1"));
        }
        for (index, u) in units.iter().enumerate() {
            if u.direction.len() != dim {
                return Err(Error::Unit {
                    index,
                    reason: format!("direction has {} components, expected {dim}", u.direction.len()),
                });
            }
            if u.power > k {
                return Err(Error::Unit {
                    index,
                    reason: format!("power {} exceeds the network power {k}", u.power),
                });
            }
            let finite = u.outer.re.is_finite()
                && u.outer.im.is_finite()
                && u.bias.is_finite()
                && u.direction.iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::Unit {
                    index,
                    reason: "non-finite parameter".into(),
                });
            }
        }
        Ok(ReluNetwork { k, dim, units })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn units(&self) -> &[ReluUnit] {
        &self.units
    }

    pub fn width(&self) -> usize {
        self.units.len()
    }

    /// `sum_i |a_i|`.
    pub fn ell1(&self) -> f64 {
        self.units.iter().map(|u| u.outer.norm()).sum()
    }

    /// The network computing the sum of both networks.
    pub fn concat(&self, other: &ReluNetwork) -> Result<ReluNetwork> {
        if self.dim != other.dim {
            return Err(Error::domain("d", "networks have different input dimensions"));
        }
        let mut units = self.units.clone();
        units.extend(other.units.iter().cloned());
        ReluNetwork::new(self.k.max(other.k), self.dim, units)
    }

    /// Multiply every outer coefficient by `lambda`.
    pub fn scaled(&self, lambda: Complex64) -> ReluNetwork {
        let mut out = self.clone();
        for u in &mut out.units {
            u.outer *= lambda;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = NetworkJson {
            k: self.k,
            units: self
                .units
                .iter()
                .map(|u| UnitJson {
                    a_re: u.outer.re,
                    a_im: u.outer.im,
                    omega: u.direction.clone(),
                    b: u.bias,
                    k_i: u.power,
                })
                .collect(),
        };
        Ok(serde_json::to_string(&raw)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: NetworkJson = serde_json::from_str(text)?;
        let dim = raw.units.first().map(|u| u.omega.len()).unwrap_or(1);
        let units = raw
            .units
            .into_iter()
            .map(|u| ReluUnit::new(Complex64::new(u.a_re, u.a_im), u.omega, u.b, u.k_i))
            .collect();
        ReluNetwork::new(raw.k, dim, units)
    }
}

#[derive(Serialize, Deserialize)]
struct UnitJson {
    a_re: f64,
    a_im: f64,
    omega: Vec<f64>,
    b: f64,
    k_i: u32,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    k: u32,
    units: Vec<UnitJson>,
}

pub fn evaluate_network(net: &ReluNetwork, x: &[f64]) -> Complex64 {
    net.units.iter().map(|u| u.eval(x)).sum()
}

/// Two units computing `x^m = sigma_m(x) + (-1)^m sigma_m(-x)` on all of R.
pub fn monomial_network_1d(m: u32) -> Result<ReluNetwork> {
    if m == 0 {
        return Err(Error::domain("m", "degree 0 is a constant; use ReluUnit::constant"));
    }
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    ReluNetwork::new(
        m,
        1,
        vec![
            ReluUnit::new(Complex64::new(1.0, 0.0), vec![1.0], 0.0, m),
            ReluUnit::new(Complex64::new(sign, 0.0), vec![-1.0], 0.0, m),
        ],
    )
}

/// `sigma_{power}(sign * x_coord)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub coord: usize,
    pub sign: i8,
    pub power: u32,
}

/// `coeff * prod_j sigma_{a_j}(s_j x_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductTerm {
    pub coeff: f64,
    pub factors: Vec<Factor>,
}

/// A sum of products of coordinate-wise sigma powers. Such products are not
/// ridge functions in general, so they are kept in this form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductTermSum {
    pub dim: usize,
    pub terms: Vec<ProductTerm>,
}

impl ProductTermSum {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.factors
                        .iter()
                        .map(|f| sigma_k(f.sign as f64 * x[f.coord], f.power))
                        .product::<f64>()
            })
            .sum()
    }
}

/// Expand `prod_j (sigma_{a_j}(x_j) + (-1)^{a_j} sigma_{a_j}(-x_j))` by the
/// distributive law; coordinates with `a_j = 0` contribute no factor.
pub fn monomial_product_expansion(alpha: &[u32], k: u32) -> Result<ProductTermSum> {
    let total: u32 = alpha.iter().sum();
    if total > k {
        return Err(Error::domain("alpha", format!("|alpha| = {total} exceeds k = {k}")));
    }
    let active: Vec<(usize, u32)> = alpha.iter().copied().enumerate().filter(|(_, a)| *a > 0).collect();
    let mut terms = Vec::with_capacity(1 << active.len());
    for mask in 0u64..(1u64 << active.len()) {
        let mut coeff = 1.0;
        let factors = active
            .iter()
            .enumerate()
            .map(|(bit, &(coord, power))| {
                let negative = mask >> bit & 1 == 1;
                if negative && power % 2 == 1 {
                    coeff = -coeff;
                }
                Factor {
                    coord,
                    sign: if negative { -1 } else { 1 },
                    power,
                }
            })
            .collect();
        terms.push(ProductTerm { coeff, factors });
    }
    Ok(ProductTermSum {
        dim: alpha.len(),
        terms,
    })
}

/// A real polynomial in `x` stored as exponent vector -> coefficient.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        if c != 0.0 {
            p.terms.insert(vec![0; dim], c);
        }
        p
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(p, v)| v.powi(*p as i32)).product::<f64>())
            .sum()
    }

    /// Multiply by the affine form `theta . x + b`.
    pub fn mul_affine(&self, theta: &[f64], b: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.dim);
        for (e, c) in &self.terms {
            *out.terms.entry(e.clone()).or_insert(0.0) += c * b;
            for (j, th) in theta.iter().enumerate() {
                if *th == 0.0 {
                    continue;
                }
                let mut e2 = e.clone();
                e2[j] += 1;
                *out.terms.entry(e2).or_insert(0.0) += c * th;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    /// `(theta . x + b)^k`, expanded.
    pub fn affine_power(theta: &[f64], b: f64, k: u32) -> Polynomial {
        let mut p = Polynomial::constant(theta.len(), 1.0);
        for _ in 0..k {
            p = p.mul_affine(theta, b);
        }
        p
    }
}

/// Axis-aligned cube `lo + [0, side]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub side: f64,
}

impl Cell {
    pub fn new(lo: Vec<f64>, side: f64) -> Result<Self> {
        if lo.is_empty() || !(side > 0.0) {
            return Err(Error::domain("cell", "needs a dimension and a positive side"));
        }
        Ok(Cell { lo, side })
    }

    /// The cube of side `side` centered at `center`.
    pub fn centered(center: &[f64], side: f64) -> Result<Self> {
        Cell::new(center.iter().map(|c| c - side / 2.0).collect(), side)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().map(|l| l + self.side / 2.0).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lo)
            .all(|(v, l)| *v >= *l && *v <= l + self.side)
    }

    pub fn as_box(&self) -> AxisBox {
        AxisBox::new(self.lo.clone(), self.lo.iter().map(|l| l + self.side).collect()).expect("positive side")
    }

    /// Uniform grid with `per_axis` points per axis including the faces.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let per_axis = per_axis.max(2);
        let step = self.side / (per_axis - 1) as f64;
        let total = per_axis.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut x = vec![0.0; d];
                for j in (0..d).rev() {
                    x[j] = self.lo[j] + step * (idx % per_axis) as f64;
                    idx /= per_axis;
                }
                x
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaylorCase {
    /// The ridge argument is nonnegative on the whole cell.
    Active,
    /// The ridge argument is nonpositive on the whole cell.
    Inactive,
    /// The kink of the ridge crosses the cell.
    Straddling,
}

/// Local polynomial replacement of a ridge unit on one cell.
#[derive(Clone, Debug)]
pub struct LocalTaylor {
    pub case: TaylorCase,
    pub poly: Polynomial,
    /// Sup of `|sigma_k(theta . x + b) - p(x)|` over a dense cell grid.
    pub measured_error: f64,
    /// `delta^(k+1)/(k+1)` with `delta` the cell side; this remainder form
    /// assumes a bounded (k+1)-st derivative, which `sigma_k` lacks.
    pub remainder_bound: f64,
    /// `(|theta|_1 delta / 2)^k`, the bound that follows from homogeneity
    /// of `sigma_k` across the kink.
    pub homogeneity_bound: f64,
}

fn dense_grid_size(d: usize) -> usize {
    match d {
        1 => 4001,
        2 => 201,
        _ => 41,
    }
}

/// Degree-`k` polynomial for `sigma_k(theta . x + b)` on `cell`.
///
/// On active cells the unit is the polynomial `(theta . x + b)^k`; on
/// inactive cells it is zero. On straddling cells the Taylor polynomial of
/// `sigma_k` at the cell center is used: the active polynomial when the
/// center argument is positive, zero otherwise.
pub fn ridge_local_taylor(theta: &[f64], b: f64, cell: &Cell, k: u32) -> Result<LocalTaylor> {
    if theta.len() != cell.dim() {
        return Err(Error::domain("theta", "dimension differs from the cell"));
    }
    if (numerics::euclidean_norm(theta) - 1.0).abs() > 1e-12 {
        return Err(Error::domain("theta", "direction must be a unit vector"));
    }
    let center = cell.center();
    let t0 = dot(theta, &center) + b;
    let radius = 0.5 * cell.side * theta.iter().map(|v| v.abs()).sum::<f64>();
    let (t_min, t_max) = (t0 - radius, t0 + radius);
    let d = cell.dim();
    let active = Polynomial::affine_power(theta, b, k);
    let remainder_bound = cell.side.powi(k as i32 + 1) / (k as f64 + 1.0);
    let homogeneity_bound = radius.powi(k as i32);
    let (case, poly) = if t_min >= 0.0 {
        (TaylorCase::Active, active)
    } else if t_max <= 0.0 {
        (TaylorCase::Inactive, Polynomial::zero(d))
    } else if t0 > 0.0 {
        (TaylorCase::Straddling, active)
    } else {
        (TaylorCase::Straddling, Polynomial::zero(d))
    };
    // The polynomial is evaluated in ridge form: expanding it in monomials of
    // x loses all relative accuracy once the error falls far below |x|^k.
    let use_active = t0 > 0.0;
    let measured_error = if case == TaylorCase::Straddling {
        cell.grid(dense_grid_size(d))
            .iter()
            .map(|x| {
                let t = dot(theta, x) + b;
                let p = if use_active { t.powi(k as i32) } else { 0.0 };
                (sigma_k(t, k) - p).abs()
            })
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(LocalTaylor {
        case,
        poly,
        measured_error,
        remainder_bound,
        homogeneity_bound,
    })
}

/// Smoothed indicator `prod_j ramp(a_j (h/2 - |x_j - c_j|))` of a cell, with
/// `ramp(t) = sigma_1(t) - sigma_1(t - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorBump {
    pub center: Vec<f64>,
    pub side: f64,
    pub sharpness: Vec<f64>,
}

pub fn ramp(t: f64) -> f64 {
    sigma_k(t, 1) - sigma_k(t - 1.0, 1)
}

impl IndicatorBump {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(&self.sharpness)
            .zip(x)
            .map(|((c, a), v)| ramp(a * (self.side / 2.0 - (v - c).abs())))
            .product()
    }
}

pub fn indicator_bump(cell: &Cell, sharpness: &[f64]) -> Result<IndicatorBump> {
    if sharpness.len() != cell.dim() {
        return Err(Error::domain("sharpness", "one value per axis"));
    }
    if let Some(a) = sharpness.iter().find(|a| !(**a * cell.side / 2.0 > 1.0)) {
        return Err(Error::domain(
            "sharpness",
            format!("a = {a} leaves no plateau: need a * h / 2 > 1"),
        ));
    }
    Ok(IndicatorBump {
        center: cell.center(),
        side: cell.side,
        sharpness: sharpness.to_vec(),
    })
}

/// `[0, 1]^d` split into `q^d` cubes of side `1/q`, indexed row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubePartition {
    pub dim: usize,
    pub cells_per_axis: usize,
}

impl CubePartition {
    pub fn new(dim: usize, cells_per_axis: usize) -> Result<Self> {
        if dim == 0 || cells_per_axis == 0 {
            return Err(Error::domain("q", "need d >= 1 and q >= 1"));
        }
        Ok(CubePartition { dim, cells_per_axis })
    }

    pub fn side(&self) -> f64 {
        1.0 / self.cells_per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell(&self, index: usize) -> Cell {
        let q = self.cells_per_axis;
        let h = self.side();
        let mut rest = index;
        let mut lo = vec![0.0; self.dim];
        for j in (0..self.dim).rev() {
            lo[j] = (rest % q) as f64 * h;
            rest /= q;
        }
        Cell { lo, side: h }
    }

    /// Index of the cell containing `x`; points on shared faces go to the
    /// upper cell, points on the outer face `x_j = 1` to the last one.
    pub fn locate(&self, x: &[f64]) -> usize {
        let q = self.cells_per_axis;
        x.iter().fold(0, |acc, v| {
            let i = ((v * q as f64).floor().max(0.0) as usize).min(q - 1);
            acc * q + i
        })
    }
}

/// All exponent vectors of total degree `<= ell` in `d` variables, in
/// lexicographic order.
pub fn total_degree_exponents(d: usize, ell: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    fn rec(j: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if j == cur.len() {
            out.push(cur.clone());
            return;
        }
        for p in 0..=left {
            cur[j] = p;
            rec(j + 1, left - p, cur, out);
        }
        cur[j] = 0;
    }
    rec(0, ell, &mut cur, &mut out);
    out
}

/// Options for [`compile_sobolev_approximant`].
#[derive(Clone, Debug, PartialEq)]
pub struct CompileConfig {
    pub ell: u32,
    /// Least-squares nodes per axis and cell; default `ell + 3`.
    pub samples_per_axis: Option<usize>,
    /// Uniform indicator sharpness for the smoothed variant.
    pub sharpness: Option<f64>,
}

impl CompileConfig {
    pub fn new(ell: u32) -> Self {
        CompileConfig {
            ell,
            samples_per_axis: None,
            sharpness: None,
        }
    }
}

/// Least-squares polynomial of one cell, in the local coordinates
/// `u = 2 (x - c)/h` in `[-1, 1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFit {
    pub index: usize,
    pub center: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub sup_error: f64,
}

/// Piecewise polynomial approximant on a cube partition, optionally glued
/// with smoothed indicators.
#[derive(Clone, Debug)]
pub struct CompiledApproximant {
    pub partition: CubePartition,
    pub ell: u32,
    pub exponents: Vec<Vec<u32>>,
    pub cells: Vec<CellFit>,
    pub bumps: Option<Vec<IndicatorBump>>,
}

fn local_monomials(exponents: &[Vec<u32>], u: &[f64]) -> Vec<f64> {
    exponents
        .iter()
        .map(|e| e.iter().zip(u).map(|(p, v)| v.powi(*p as i32)).product())
        .collect()
}

impl CompiledApproximant {
    fn cell_poly(&self, index: usize, x: &[f64]) -> f64 {
        let fit = &self.cells[index];
        let h = self.partition.side();
        let u: Vec<f64> = x.iter().zip(&fit.center).map(|(v, c)| 2.0 * (v - c) / h).collect();
        local_monomials(&self.exponents, &u)
            .iter()
            .zip(&fit.coeffs)
            .map(|(m, c)| m * c)
            .sum()
    }

    /// The piecewise polynomial `P`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.cell_poly(self.partition.locate(x), x)
    }

    /// `sum_i p_i(x) phi_i(x)`; equals [`Self::eval`] when no smoothing was
    /// requested.
    pub fn eval_smoothed(&self, x: &[f64]) -> f64 {
        match &self.bumps {
            None => self.eval(x),
            Some(bumps) => {
                // Only cells whose closure contains x have a nonzero bump.
                let q = self.partition.cells_per_axis;
                let h = self.partition.side();
                let mut candidates = vec![0usize];
                for v in x {
                    let base = (v / h).floor() as i64;
                    let mut next = Vec::new();
                    for c in &candidates {
                        for i in [base - 1, base] {
                            if i >= 0 && (i as usize) < q {
                                next.push(c * q + i as usize);
                            }
                        }
                    }
                    candidates = next;
                }
                candidates
                    .into_iter()
                    .map(|i| {
                        let phi = bumps[i].eval(x);
                        if phi == 0.0 {
                            0.0
                        } else {
                            phi * self.cell_poly(i, x)
                        }
                    })
                    .sum()
            }
        }
    }

    /// `L^p([0, 1]^d)` distance to `f` for the plain (`smoothed = false`) or
    /// smoothed approximant. `p = f64::INFINITY` takes a max over a uniform
    /// per-cell grid; finite `p` uses Gauss-Legendre per cell.
    pub fn error_norm<F>(&self, f: F, p: f64, smoothed: bool, per_axis: usize) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let g = |x: &[f64]| {
            if smoothed {
                self.eval_smoothed(x)
            } else {
                self.cell_poly(self.partition.locate(x).min(self.cells.len() - 1), x)
            }
        };
        let per_cell: Vec<f64> = (0..self.partition.len())
            .into_par_iter()
            .map(|i| {
                let cell = self.partition.cell(i);
                if p.is_infinite() {
                    cell.grid(per_axis)
                        .iter()
                        .map(|x| {
                            let v = if smoothed { g(x) } else { self.cell_poly(i, x) };
                            (f(x) - v).abs()
                        })
                        .fold(0.0, f64::max)
                } else {
                    let spec = QuadratureSpec::tensor(per_axis.max(2));
                    numerics::integrate(
                        |x| {
                            let v = if smoothed { g(x) } else { self.cell_poly(i, x) };
                            (f(x) - v).abs().powf(p)
                        },
                        &cell.as_box(),
                        &spec,
                    )
                    .unwrap_or(f64::NAN)
                }
            })
            .collect();
        if p.is_infinite() {
            per_cell.into_iter().fold(0.0, f64::max)
        } else {
            per_cell.iter().sum::<f64>().powf(1.0 / p)
        }
    }

    /// Per-cell CSV: `cell_index, center..., coeffs..., sup_error`.
    pub fn to_csv(&self) -> String {
        let d = self.partition.dim;
        let mut out = String::from("cell_index");
        for j in 0..d {
            out.push_str(&format!(",center_{j}"));
        }
        for e in &self.exponents {
            let tag: Vec<String> = e.iter().map(|p| p.to_string()).collect();
            out.push_str(&format!(",c_{}", tag.join("_")));
        }
        out.push_str(",sup_error\n");
        for c in &self.cells {
            out.push_str(&c.index.to_string());
            for v in c.center.iter().chain(&c.coeffs) {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push_str(&format!(",{:.16e}\n", c.sup_error));
        }
        out
    }
}

/// Fit a degree-`ell` polynomial by discrete least squares on every cell of
/// the partition.
///
/// Cells are independent and processed in parallel; results are assembled
/// in cell order, so the output does not depend on scheduling.
pub fn compile_sobolev_approximant<F>(f: F, partition: &CubePartition, cfg: &CompileConfig) -> Result<CompiledApproximant>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = partition.dim;
    if d > 3 {
        return Err(Error::domain("d", "compilation is implemented for d <= 3"));
    }
    let exponents = total_degree_exponents(d, cfg.ell);
    let per_axis = cfg.samples_per_axis.unwrap_or(cfg.ell as usize + 3);
    let samples = per_axis.pow(d as u32);
    if samples < exponents.len() {
        return Err(Error::Underdetermined {
            samples,
            unknowns: exponents.len(),
        });
    }
    let (nodes, _) = gauss_legendre(per_axis);
    let local: Vec<Vec<f64>> = (0..samples)
        .map(|mut idx| {
            let mut u = vec![0.0; d];
            for j in (0..d).rev() {
                u[j] = nodes[idx % per_axis];
                idx /= per_axis;
            }
            u
        })
        .collect();
    let design = DMatrix::from_fn(samples, exponents.len(), |r, c| {
        exponents[c].iter().zip(&local[r]).map(|(p, v)| v.powi(*p as i32)).product()
    });
    let svd = design.clone().svd(true, true);
    let h = partition.side();
    let check = 4 * cfg.ell as usize + 9;
    let fits: Vec<Result<CellFit>> = (0..partition.len())
        .into_par_iter()
        .map(|index| {
            let cell = partition.cell(index);
            let center = cell.center();
            let mut rhs = DVector::zeros(samples);
            for (r, u) in local.iter().enumerate() {
                let x: Vec<f64> = u.iter().zip(&center).map(|(v, c)| c + v * h / 2.0).collect();
                let v = f(&x);
                if !v.is_finite() {
                    return Err(Error::NonFinite { node: x });
                }
                rhs[r] = v;
            }
            let sol = svd
                .solve(&rhs, 1e-13)
                .map_err(|e| Error::Convergence(format!("least squares on cell {index}: {e}")))?;
            let coeffs: Vec<f64> = sol.iter().copied().collect();
            let sup_error = cell
                .grid(check)
                .iter()
                .map(|x| {
                    let u: Vec<f64> = x.iter().zip(&center).map(|(v, c)| 2.0 * (v - c) / h).collect();
                    let p: f64 = local_monomials(&exponents, &u).iter().zip(&coeffs).map(|(m, c)| m * c).sum();
                    (f(x) - p).abs()
                })
                .fold(0.0, f64::max);
            Ok(CellFit {
                index,
                center,
                coeffs,
                sup_error,
            })
        })
        .collect();
    let cells = fits.into_iter().collect::<Result<Vec<_>>>()?;
    let bumps = match cfg.sharpness {
        None => None,
        Some(a) => Some(
            (0..partition.len())
                .map(|i| indicator_bump(&partition.cell(i), &vec![a; d]))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok(CompiledApproximant {
        partition: partition.clone(),
        ell: cfg.ell,
        exponents,
        cells,
        bumps,
    })
}

/// Certified `H^m(Omega)` upper bound for a network from the triangle
/// inequality: (largest unit norm) times (l1 mass of outer coefficients).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HmCertificate {
    pub unit_norms: Vec<f64>,
    pub max_unit_norm: f64,
    pub ell1: f64,
    pub bound: f64,
}

/// Complete homogeneous symmetric polynomials `h_0..h_m` of `u`.
fn complete_homogeneous(u: &[f64], m: usize) -> Vec<f64> {
    let mut h = vec![0.0; m + 1];
    h[0] = 1.0;
    for &v in u {
        for j in 1..=m {
            h[j] += v * h[j - 1];
        }
    }
    h
}

fn falling_factorial(k: u32, j: u32) -> f64 {
    (0..j).map(|i| (k - i) as f64).product()
}

/// `||sigma_k(omega . x + b)||_{H^m(Omega)}` by quadrature. Derivatives are
/// `k!/(k-|alpha|)! omega^alpha sigma_{k-|alpha|}`, so each order `j`
/// contributes `(k!/(k-j)!)^2 h_j(omega^2) int sigma_{k-j}^2`.
pub fn unit_hm_norm(direction: &[f64], bias: f64, k: u32, omega: &AxisBox, m: u32, spec: &QuadratureSpec) -> Result<f64> {
    let sq: Vec<f64> = direction.iter().map(|v| v * v).collect();
    let h = complete_homogeneous(&sq, m as usize);
    let mut total = 0.0;
    for j in 0..=m.min(k) {
        let power = k - j;
        let integral = numerics::integrate(|x| sigma_k(dot(direction, x) + bias, power).powi(2), omega, spec)?;
        total += falling_factorial(k, j).powi(2) * h[j as usize] * integral;
    }
    Ok(total.sqrt())
}

pub fn network_hm_upper(
    net: &ReluNetwork,
    omega: &AxisBox,
    m: u32,
    bias_cap: f64,
    spec: &QuadratureSpec,
) -> Result<HmCertificate> {
    if omega.dim() != net.dim() {
        return Err(Error::domain("Omega", "dimension differs from the network"));
    }
    for (index, u) in net.units().iter().enumerate() {
        if u.bias.abs() > bias_cap {
            return Err(Error::Unit {
                index,
                reason: format!("|b| = {} exceeds the bias cap {bias_cap}", u.bias.abs()),
            });
        }
        if !u.is_dictionary_unit(-bias_cap, bias_cap) {
            return Err(Error::Unit {
                index,
                reason: "direction is not a unit vector".into(),
            });
        }
        if !(m < u.power || (m == 0 && u.power == 0)) {
            return Err(Error::Unit {
                index,
                reason: format!("order m = {m} needs power k > m, unit has k = {}", u.power),
            });
        }
    }
    let unit_norms = net
        .units()
        .par_iter()
        .map(|u| unit_hm_norm(&u.direction, u.bias, u.power, omega, m, spec))
        .collect::<Result<Vec<f64>>>()?;
    let max_unit_norm = unit_norms.iter().copied().fold(0.0, f64::max);
    let ell1 = net.ell1();
    Ok(HmCertificate {
        bound: max_unit_norm * ell1,
        unit_norms,
        max_unit_norm,
        ell1,
    })
}

/// Nodes of a composite Gauss-Legendre rule on `[lo, hi]`, re-exported for
/// callers that build their own per-cell grids.
pub fn cell_rule(lo: f64, hi: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    composite_gauss_legendre(lo, hi, order, 1)
}
