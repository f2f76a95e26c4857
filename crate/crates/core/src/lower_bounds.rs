//! Witness constructions: spectra of exponential-decay ridge units and a
//! least-squares probe of their high-frequency gap, dyadic frequency
//! blocks, oscillatory plane waves, sign-vector packing families and the
//! tail mass of a heavy-tailed parameter measure.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::barron::{hm_norm_exact, FourierSum};
use crate::error::{Error, Result};
use crate::numerics::{self, composite_gauss_legendre, dot, sobolev_weight, AxisBox, QuadratureMethod, QuadratureSpec};
use crate::relu_nets::sigma_k;
use crate::sphere_geom::{separated_subset, SphericalNet};

/// `e^(-alpha |t|)`.
pub fn exp_unit(alpha: f64, t: f64) -> f64 {
    (-alpha * t.abs()).exp()
}

/// `2 alpha e^(i b xi) / (alpha^2 + (omega xi)^2)`.
///
/// For `|omega| = 1` this is the transform `int e^(-alpha |omega x + b|)
/// e^(-i xi x) dx`; for other `omega` the exact transform carries an extra
/// `1/|omega|` and evaluates the denominator at `xi/omega`.
pub fn exp_ridge_fourier(alpha: f64, omega: f64, b: f64, xi: f64) -> Result<Complex64> {
    if !(alpha > 0.0) {
        return Err(Error::domain("alpha", "decay must be positive"));
    }
    if omega == 0.0 {
        return Err(Error::domain("omega", "must be nonzero"));
    }
    Ok(Complex64::from_polar(1.0, b * xi) * (2.0 * alpha / (alpha * alpha + (omega * xi).powi(2))))
}

/// Least-squares ridge parameter added to the normal equations.
pub const GAP_RIDGE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub omega0: f64,
    pub n_units: usize,
    pub candidates: usize,
    /// Smallest `L^2[-1, 1]` error over all candidates.
    pub best_error: f64,
    pub best_candidate: usize,
    /// `best_error * |omega0|`.
    pub scaled_error: f64,
    pub ridge: f64,
}

/// Parameters `(omega, b)` of candidate `c`: `|omega|` log-uniform in
/// `[1e-2, 2 (|omega0| + 1)]` with a random sign and `b` uniform in
/// `[-|omega| - 1, |omega| + 1]`, so kinks land in or near the domain.
/// The stream is fixed per candidate, so smaller widths use a prefix.
fn candidate_units(omega0: f64, units: usize, seed: u64, c: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(c as u64);
    let (lo, hi) = (1e-2f64.ln(), (2.0 * (omega0.abs() + 1.0)).ln());
    (0..units)
        .map(|_| {
            let mag = rng.random_range(lo..hi).exp();
            let w = if rng.random_bool(0.5) { mag } else { -mag };
            let b = rng.random_range(-mag - 1.0..mag + 1.0);
            (w, b)
        })
        .collect()
}

fn gap_nodes(omega0: f64) -> (Vec<f64>, Vec<f64>) {
    let panels = (2.0 * omega0.abs()).ceil().max(16.0) as usize;
    composite_gauss_legendre(-1.0, 1.0, 8, panels)
}

fn ls_error(alpha: f64, omega0: f64, units: &[(f64, f64)], nodes: &[f64], weights: &[f64]) -> Result<f64> {
    let n = units.len();
    let a = DMatrix::from_fn(nodes.len(), n, |r, c| exp_unit(alpha, units[c].0 * nodes[r] + units[c].1));
    let mut gram = DMatrix::zeros(n, n);
    let mut rhs_re = DVector::zeros(n);
    let mut rhs_im = DVector::zeros(n);
    for r in 0..nodes.len() {
        let (s, co) = (omega0 * nodes[r]).sin_cos();
        for i in 0..n {
            rhs_re[i] += weights[r] * a[(r, i)] * co;
            rhs_im[i] += weights[r] * a[(r, i)] * s;
            for j in 0..n {
                gram[(i, j)] += weights[r] * a[(r, i)] * a[(r, j)];
            }
        }
    }
    for i in 0..n {
        gram[(i, i)] += GAP_RIDGE;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Convergence("regularized normal equations are not positive definite".into()))?;
    let (cr, ci) = (chol.solve(&rhs_re), chol.solve(&rhs_im));
    let fit_re = &a * cr;
    let fit_im = &a * ci;
    let err2: f64 = (0..nodes.len())
        .map(|r| {
            let (s, co) = (omega0 * nodes[r]).sin_cos();
            weights[r] * ((co - fit_re[r]).powi(2) + (s - fit_im[r]).powi(2))
        })
        .sum();
    Ok(err2.sqrt())
}

/// Best `L^2[-1, 1]` error of `e^(i omega0 x)` over `candidates` random
/// sets of `n_units` exponential-decay ridge units, each solved by least
/// squares for complex outer coefficients. The result is an upper bound on
/// the best achievable error.
pub fn highfreq_gap(alpha: f64, omega0: f64, n_units: usize, candidates: usize, seed: u64) -> Result<GapReport> {
    if !(alpha > 0.0) {
        return Err(Error::domain("alpha", "decay must be positive"));
    }
    if n_units == 0 || candidates == 0 {
        return Err(Error::domain("n_units", "need at least one unit and one candidate"));
    }
    let (nodes, weights) = gap_nodes(omega0);
    let errors = (0..candidates)
        .into_par_iter()
        .map(|c| ls_error(alpha, omega0, &candidate_units(omega0, n_units, seed, c), &nodes, &weights))
        .collect::<Result<Vec<f64>>>()?;
    let (best_candidate, best_error) = errors
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one candidate");
    Ok(GapReport {
        omega0,
        n_units,
        candidates,
        best_error,
        best_candidate,
        scaled_error: best_error * omega0.abs(),
        ridge: GAP_RIDGE,
    })
}

/// Blocks `Delta_k f` of a one-dimensional spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicDecomposition {
    pub blocks: Vec<(u32, FourierSum)>,
    pub source: FourierSum,
}

/// Annulus of `|xi|`: level 0 holds `|xi| < 2`, level `k >= 1` holds
/// `2^k <= |xi| < 2^(k+1)`, and the top level also collects everything
/// above it.
pub fn dyadic_level(xi: f64, levels: u32) -> u32 {
    let a = xi.abs();
    let mut k = 0;
    while k < levels && a >= 2f64.powi(k as i32 + 1) {
        k += 1;
    }
    k
}

/// Split a spectrum by sharp annulus indicators. On finite sums this is an
/// exact partition: blocks have disjoint modes and sum to the source.
pub fn dyadic_blocks(spectrum: &FourierSum, levels: u32) -> Result<DyadicDecomposition> {
    if spectrum.dim() != 1 {
        return Err(Error::domain("d", "dyadic blocks are one-dimensional"));
    }
    let blocks = (0..=levels)
        .map(|k| (k, spectrum.restrict(|z| dyadic_level(spectrum.frequency(z)[0], levels) == k)))
        .collect();
    Ok(DyadicDecomposition {
        blocks,
        source: spectrum.clone(),
    })
}

impl DyadicDecomposition {
    pub fn block_norm(&self, level: u32) -> f64 {
        self.blocks
            .iter()
            .find(|(k, _)| *k == level)
            .map(|(_, b)| hm_norm_exact(b, 0))
            .unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> Result<FourierSum> {
        let s = &self.source;
        FourierSum::new(
            1,
            s.period(),
            s.offset().to_vec(),
            self.blocks.iter().flat_map(|(_, b)| b.coeffs().iter().map(|(z, c)| (z.clone(), *c))),
        )
    }

    /// Rows `level, norm, residual_from_level`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,norm,residual\n");
        for (k, _) in &self.blocks {
            out.push_str(&format!("{k},{:.16e},{:.16e}\n", self.block_norm(*k), residual_tail_norm(self, *k)));
        }
        out
    }
}

/// `<f, g>` in `L^2([0, L]^d)` for sums on the same lattice.
pub fn l2_inner(f: &FourierSum, g: &FourierSum) -> Result<Complex64> {
    if f.dim() != g.dim() || f.period() != g.period() || f.offset() != g.offset() {
        return Err(Error::domain("spectrum", "sums live on different lattices"));
    }
    let s: Complex64 = f
        .coeffs()
        .iter()
        .filter_map(|(z, c)| g.coeffs().get(z).map(|d| c * d.conj()))
        .sum();
    Ok(s * f.period().powi(f.dim() as i32))
}

/// `||sum_{k >= from_level} Delta_k f||` by orthogonality of the blocks.
pub fn residual_tail_norm(decomp: &DyadicDecomposition, from_level: u32) -> f64 {
    decomp
        .blocks
        .iter()
        .filter(|(k, _)| *k >= from_level)
        .map(|(_, b)| hm_norm_exact(b, 0).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// The spectrum `c_z = (1 + |z|)^(-1)`, `|z| <= xi_max`, with period 1.
pub fn harmonic_spectrum(xi_max: i64) -> Result<FourierSum> {
    FourierSum::new(
        1,
        1.0,
        vec![0.0],
        (-xi_max..=xi_max).map(|z| (vec![z], Complex64::new(1.0 / (1.0 + z.abs() as f64), 0.0))),
    )
}

/// `e^(2 pi i K x_1)` on the unit cube with `K = n^((k+1)/d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatoryWitness {
    pub frequency: f64,
    pub sum: FourierSum,
    /// `||.||_{H^m([0,1]^d)}` from the mode expansion.
    pub norm: f64,
    /// `n^(m (k+1)/d)`.
    pub predicted_growth: f64,
}

pub fn oscillatory_witness(n: usize, k: u32, d: usize, m: u32) -> Result<OscillatoryWitness> {
    if n == 0 || d == 0 {
        return Err(Error::domain("n", "need n >= 1 and d >= 1"));
    }
    let frequency = (n as f64).powf((k as f64 + 1.0) / d as f64);
    let mut offset = vec![0.0; d];
    offset[0] = frequency.fract();
    let mut z = vec![0i64; d];
    z[0] = frequency.floor() as i64;
    let sum = FourierSum::new(d, 1.0, offset, [(z, Complex64::new(1.0, 0.0))])?;
    Ok(OscillatoryWitness {
        frequency,
        norm: hm_norm_exact(&sum, m),
        sum,
        predicted_growth: (n as f64).powf(m as f64 * (k as f64 + 1.0) / d as f64),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PackingKind {
    /// `(1/(sqrt(m) R^s)) sum_j s_j e^(2 pi i R omega_j . x)`.
    Fourier,
    /// `(1/sqrt(m)) sum_j s_j sigma_k(R omega_j . x)`.
    Relu,
}

/// Largest direction count for which sign vectors are handled.
pub const MAX_PACKING_DIRECTIONS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct PackingFamily {
    pub kind: PackingKind,
    pub dim: usize,
    pub k: u32,
    pub s: f64,
    pub m: usize,
    pub radius: f64,
    pub delta: f64,
    pub directions: SphericalNet,
    pub signs: Vec<Vec<i8>>,
    pub normalization: f64,
}

impl PackingFamily {
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// `f_sigma(x)` for sign vector number `idx`.
    pub fn eval(&self, idx: usize, x: &[f64]) -> Complex64 {
        self.eval_signs(&self.signs[idx], x)
    }

    fn eval_signs(&self, signs: &[i8], x: &[f64]) -> Complex64 {
        let sum: Complex64 = self
            .directions
            .points
            .iter()
            .zip(signs)
            .map(|(w, s)| {
                let t = self.radius * dot(w, x);
                let v = match self.kind {
                    PackingKind::Relu => Complex64::new(sigma_k(t, self.k), 0.0),
                    PackingKind::Fourier => Complex64::from_polar(1.0, 2.0 * PI * t),
                };
                v * *s as f64
            })
            .sum();
        sum * self.normalization
    }

    /// Predicted separation of two members differing in one sign:
    /// `R^k/sqrt(m)` for ReLU families, `2/(sqrt(m) R^s)` for Fourier ones.
    pub fn main_term_prediction(&self) -> f64 {
        match self.kind {
            PackingKind::Relu => self.radius.powi(self.k as i32) / (self.m as f64).sqrt(),
            PackingKind::Fourier => 2.0 * self.normalization,
        }
    }
}

/// Packing family with the standard scalings: for `Fourier`,
/// `m = floor(n^((d-1)/d))`, `R = n^(1/d)`, `delta = n^(-1/d)`; for `Relu`,
/// `m = floor(n^(d/(2d+2k+1)))`, `R = n^(1/2 + k/d)`,
/// `delta = (4k)^(-1/2) m^(-1/(d-1))`. `k_or_s` is the ReLU power or the
/// Fourier smoothness.
pub fn build_packing(kind: PackingKind, d: usize, k_or_s: f64, n: usize, seed: u64) -> Result<PackingFamily> {
    if d < 2 {
        return Err(Error::domain("d", "packing families need d >= 2"));
    }
    if n == 0 {
        return Err(Error::domain("n", "need n >= 1"));
    }
    let nf = n as f64;
    let df = d as f64;
    let (k, s, m, radius, delta, normalization);
    match kind {
        PackingKind::Relu => {
            if !(k_or_s >= 1.0 && k_or_s.fract() == 0.0) {
                return Err(Error::domain("k", "ReLU power must be a positive integer"));
            }
            k = k_or_s as u32;
            s = 0.0;
            m = (nf.powf(df / (2.0 * df + 2.0 * k_or_s + 1.0)).floor() as usize).max(1);
            radius = nf.powf(0.5 + k_or_s / df);
            delta = (1.0 / (4.0 * k_or_s)).sqrt() * (m as f64).powf(-1.0 / (df - 1.0));
            normalization = 1.0 / (m as f64).sqrt();
        }
        PackingKind::Fourier => {
            if !(k_or_s >= 0.0) {
                return Err(Error::domain("s", "smoothness must be nonnegative"));
            }
            k = 0;
            s = k_or_s;
            m = (nf.powf((df - 1.0) / df).floor() as usize).max(1);
            radius = nf.powf(1.0 / df);
            delta = nf.powf(-1.0 / df);
            normalization = 1.0 / ((m as f64).sqrt() * radius.powf(s));
        }
    }
    if m > MAX_PACKING_DIRECTIONS {
        return Err(Error::domain(
            "n",
            format!("family needs m = {m} > {MAX_PACKING_DIRECTIONS} directions; choose a smaller n"),
        ));
    }
    let net = separated_subset(d, delta.min(2.0), 4096, seed)?;
    if net.len() < m {
        return Err(Error::domain(
            "n",
            format!("only {} directions are {delta}-separated, need {m}", net.len()),
        ));
    }
    let directions = net.prefix(m);
    let signs = if m <= 12 {
        (0u32..1 << m)
            .map(|bits| (0..m).map(|j| if bits >> j & 1 == 1 { -1 } else { 1 }).collect())
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
        let mut seen = std::collections::BTreeSet::new();
        while seen.len() < 4096 {
            seen.insert(rng.random_range(0u32..1 << m));
        }
        seen.into_iter()
            .map(|bits| (0..m).map(|j| if bits >> j & 1 == 1 { -1 } else { 1 }).collect())
            .collect()
    };
    Ok(PackingFamily {
        kind,
        dim: d,
        k,
        s,
        m,
        radius,
        delta,
        directions,
        signs,
        normalization,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeparationNorm {
    /// `L^2([0,1]^d)` by composite Gauss-Legendre quadrature.
    L2,
    /// Max over the witness points `x_j = omega_j` (ReLU families only).
    Witness,
}

/// One evaluated pair. In witness mode `main` and `cross` are the two parts
/// of the difference at the witness point attaining `distance`; in `L2`
/// mode they split the squared distance into diagonal and off-diagonal
/// Gram contributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairRow {
    pub pair: usize,
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub main: f64,
    pub cross: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub min_distance: f64,
    pub pairs: Vec<PairRow>,
    pub main_term_prediction: f64,
    pub max_cross: f64,
    /// Largest `|main + cross - total|`, relative to the main-term scale.
    pub max_identity_residual: f64,
}

impl SeparationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair,a,b,distance,main,cross\n");
        for r in &self.pairs {
            out.push_str(&format!(
                "{},{},{},{:.16e},{:.16e},{:.16e}\n",
                r.pair, r.a, r.b, r.distance, r.main, r.cross
            ));
        }
        out
    }
}

struct PairEval {
    distance: f64,
    main: f64,
    cross: f64,
    residual: f64,
}

fn l2_nodes(family: &PackingFamily) -> Result<numerics::NodeSet> {
    let panels = ((2.0 * family.radius).ceil() as usize + 4).min(if family.dim <= 2 { 512 } else { 48 });
    QuadratureSpec::composite(8, panels).nodes(&AxisBox::unit(family.dim))
}

fn eval_pair(family: &PackingFamily, a: usize, b: usize, norm: SeparationNorm, nodes: Option<&numerics::NodeSet>) -> Result<PairEval> {
    let m = family.m;
    let diff: Vec<f64> = family.signs[a]
        .iter()
        .zip(&family.signs[b])
        .map(|(x, y)| (*x - *y) as f64)
        .collect();
    match norm {
        SeparationNorm::Witness => {
            if family.kind != PackingKind::Relu {
                return Err(Error::domain("norm", "witness points are defined for ReLU families"));
            }
            let scale = family.main_term_prediction().max(f64::MIN_POSITIVE);
            let main_amp = sigma_k(family.radius, family.k) * family.normalization;
            let mut best = PairEval {
                distance: 0.0,
                main: 0.0,
                cross: 0.0,
                residual: 0.0,
            };
            for (j, xj) in family.directions.points.iter().enumerate() {
                let total = (family.eval(a, xj) - family.eval(b, xj)).re;
                let main = diff[j] * main_amp;
                let cross: f64 = (0..m)
                    .filter(|&l| l != j)
                    .map(|l| diff[l] * sigma_k(family.radius * dot(&family.directions.points[l], xj), family.k))
                    .sum::<f64>()
                    * family.normalization;
                let residual = (main + cross - total).abs() / scale;
                best.residual = best.residual.max(residual);
                if total.abs() > best.distance || j == 0 {
                    best.distance = total.abs();
                    best.main = main;
                    best.cross = cross;
                }
            }
            Ok(best)
        }
        SeparationNorm::L2 => {
            let nodes = nodes.expect("L2 mode builds nodes");
            let basis = |x: &[f64], l: usize| -> Complex64 {
                let t = family.radius * dot(&family.directions.points[l], x);
                match family.kind {
                    PackingKind::Relu => Complex64::new(sigma_k(t, family.k), 0.0),
                    PackingKind::Fourier => Complex64::from_polar(1.0, 2.0 * PI * t),
                }
            };
            let mut total = 0.0;
            let mut gram = vec![Complex64::new(0.0, 0.0); m * m];
            for (x, w) in nodes.iter() {
                total += w * (family.eval(a, x) - family.eval(b, x)).norm_sqr();
                let vals: Vec<Complex64> = (0..m).map(|l| basis(x, l)).collect();
                for i in 0..m {
                    if diff[i] == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        gram[i * m + j] += vals[i] * vals[j].conj() * w;
                    }
                }
            }
            let n2 = family.normalization.powi(2);
            let mut main = 0.0;
            let mut cross = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let v = (gram[i * m + j] * diff[i] * diff[j]).re * n2;
                    if i == j {
                        main += v;
                    } else {
                        cross += v;
                    }
                }
            }
            let scale = main.abs().max(total).max(f64::MIN_POSITIVE);
            Ok(PairEval {
                distance: total.sqrt(),
                main,
                cross,
                residual: (main + cross - total).abs() / scale,
            })
        }
    }
}

/// Distance between members `a` and `b` of the family.
pub fn pair_distance(family: &PackingFamily, a: usize, b: usize, norm: SeparationNorm) -> Result<f64> {
    let nodes = match norm {
        SeparationNorm::L2 => Some(l2_nodes(family)?),
        SeparationNorm::Witness => None,
    };
    Ok(eval_pair(family, a, b, norm, nodes.as_ref())?.distance)
}

/// Separation over all pairs, or over `pair_budget` seeded pairs when there
/// are more.
pub fn pairwise_separation(family: &PackingFamily, norm: SeparationNorm, pair_budget: usize, seed: u64) -> Result<SeparationReport> {
    if pair_budget == 0 {
        return Err(Error::domain("pair_budget", "need at least one pair"));
    }
    let size = family.len();
    if size < 2 {
        return Err(Error::domain("family", "need at least two members"));
    }
    let all = size * (size - 1) / 2;
    let pairs: Vec<(usize, usize)> = if all <= pair_budget {
        (0..size).flat_map(|a| (a + 1..size).map(move |b| (a, b))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..pair_budget)
            .map(|_| {
                let a = rng.random_range(0..size);
                let mut b = rng.random_range(0..size - 1);
                if b >= a {
                    b += 1;
                }
                (a.min(b), a.max(b))
            })
            .collect()
    };
    let nodes = match norm {
        SeparationNorm::L2 => Some(l2_nodes(family)?),
        SeparationNorm::Witness => None,
    };
    let evals = pairs
        .par_iter()
        .map(|&(a, b)| eval_pair(family, a, b, norm, nodes.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<PairRow> = pairs
        .iter()
        .zip(&evals)
        .enumerate()
        .map(|(pair, (&(a, b), e))| PairRow {
            pair,
            a,
            b,
            distance: e.distance,
            main: e.main,
            cross: e.cross,
        })
        .collect();
    Ok(SeparationReport {
        min_distance: rows.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min),
        main_term_prediction: family.main_term_prediction(),
        max_cross: rows.iter().map(|r| r.cross.abs()).fold(0.0, f64::max),
        max_identity_residual: evals.iter().map(|e| e.residual).fold(0.0, f64::max),
        pairs: rows,
    })
}

/// `h(b, omega) = (1 + max(0, |b| - 2|omega|))^(-2)`.
pub fn tail_profile(b: f64, omega: f64) -> f64 {
    (1.0 + (b.abs() - 2.0 * omega.abs()).max(0.0)).powi(-2)
}

/// Normalizer and tail probability of the measure with density
/// proportional to `(1 + |omega|)^m h(b, omega) sqrt(pi) e^(-omega^2/4)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailMass {
    pub m: u32,
    pub a: f64,
    pub z: f64,
    pub z_coarse: f64,
    pub lambda_tail: f64,
    /// `4 sqrt(pi) e^(-A^2/4) / (Z A)`.
    pub closed_form_bound: f64,
    /// The `|omega|` cutoff and a bound on the mass beyond it.
    pub cutoff: f64,
    pub truncation_bound: f64,
}

impl TailMass {
    /// `{m, A, Z, lambda_tail, closed_form_bound}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&serde_json::json!({
            "m": self.m,
            "A": self.a,
            "Z": self.z,
            "lambda_tail": self.lambda_tail,
            "closed_form_bound": self.closed_form_bound,
        }))?)
    }
}

fn omega_tail_bound(m: u32, w: f64) -> f64 {
    // For omega >= W the b-integrated density is at most
    // 4 sqrt(pi) (1 + omega)^(m+1) e^(-omega^2/4); bound the tail integral
    // by the exponential majorant through omega = W, for both signs.
    let rate = w / 2.0 - (m as f64 + 1.0) / (1.0 + w);
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    2.0 * 4.0 * PI.sqrt() * (1.0 + w).powi(m as i32 + 1) * (-w * w / 4.0).exp() / rate
}

/// Mass of `|omega| in [lo, hi]` (both signs). The `b` integral is split at
/// `|b| = 2|omega|`: the inner part maps `b = 2 omega u`, `u in [-1, 1]`;
/// the outer part maps `|b| = 2 omega + u/(1-u)`, `u in [0, 1)`.
fn band_mass(m: u32, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64> {
    let g = |w: f64| (1.0 + w).powi(m as i32) * PI.sqrt() * (-w * w / 4.0).exp();
    let inner = numerics::integrate(
        |x| {
            let (w, u) = (x[0], x[1]);
            g(w) * tail_profile(2.0 * w * u, w) * 2.0 * w
        },
        &AxisBox::new(vec![lo, -1.0], vec![hi, 1.0])?,
        spec,
    )?;
    let outer = numerics::integrate(
        |x| {
            let (w, u) = (x[0], x[1]);
            let t = u / (1.0 - u);
            g(w) * tail_profile(2.0 * w + t, w) / (1.0 - u).powi(2)
        },
        &AxisBox::new(vec![lo, 0.0], vec![hi, 1.0])?,
        spec,
    )?;
    Ok(2.0 * (inner + 2.0 * outer))
}

fn refined(spec: &QuadratureSpec) -> QuadratureSpec {
    let mut s = *spec;
    match s.method {
        QuadratureMethod::TensorGrid => s.panels *= 2,
        QuadratureMethod::MonteCarlo => s.resolution *= 2,
    }
    s
}

/// Normalizer `Z`, tail mass `lambda(|omega| > A)` and the closed-form lower
/// bound, each from two quadrature levels that must agree to 1%.
pub fn heavy_tail_mass(m: u32, a: f64, spec: &QuadratureSpec) -> Result<TailMass> {
    if !(a >= 1.0) {
        return Err(Error::domain("A", "cutoff must be >= 1"));
    }
    let mut cutoff = (a + 1.0).max(8.0).max(2.0 * m as f64 + 4.0).ceil();
    while omega_tail_bound(m, cutoff) >= 1e-6 {
        cutoff += 1.0;
    }
    let fine = refined(spec);
    let z_coarse = band_mass(m, 0.0, cutoff, spec)?;
    let z = band_mass(m, 0.0, cutoff, &fine)?;
    if ((z - z_coarse) / z).abs() > 0.01 {
        return Err(Error::Convergence(format!(
            "normalizer changed from {z_coarse} to {z} under refinement"
        )));
    }
    let tail = band_mass(m, a, cutoff, &fine)?;
    let tail_coarse = band_mass(m, a, cutoff, spec)?;
    if ((tail - tail_coarse) / tail).abs() > 0.01 {
        return Err(Error::Convergence(format!(
            "tail mass changed from {tail_coarse} to {tail} under refinement"
        )));
    }
    Ok(TailMass {
        m,
        a,
        z,
        z_coarse,
        lambda_tail: tail / z,
        closed_form_bound: 4.0 * PI.sqrt() * (-a * a / 4.0).exp() / (z * a),
        cutoff,
        truncation_bound: omega_tail_bound(m, cutoff),
    })
}

/// `H^m` norm per unit volume of a unit-modulus plane wave.
pub fn plane_wave_hm_norm(frequency: &[f64], m: u32) -> f64 {
    sobolev_weight(frequency, m).sqrt()
}
