//! Greedy n-term truncation of lattice Fourier expansions and closed-form
//! rate exponents.
//!
//! Frequencies are ranked by `(1 + |xi|)^(2m - ks) |c_xi|` and the top `n`
//! kept. Because the modes are orthogonal in `H^m([0, L]^d)`, the error of
//! the truncation is an exact finite sum over the discarded coefficients.

use std::cmp::Ordering;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barron::{self, FourierSum, WeightSpec};
use crate::error::{Error, Result};
use crate::numerics::{euclidean_norm, sobolev_weight};

/// Which key ranks the frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingRule {
    /// `(1 + |xi|)^(2m - ks) |c_xi|`, the rule the rate bound is proved for.
    WeightedMagnitude,
    /// `|c_xi|^2 w_m(a + xi)`, the keep rule that minimizes the `H^m` tail.
    ModeEnergy,
}

/// A ranking of the support of a [`FourierSum`].
#[derive(Clone, Debug, PartialEq)]
pub struct GreedySelection {
    pub rule: OrderingRule,
    pub m: u32,
    pub ks: f64,
    /// Every lattice index of the support, exactly once, best first.
    pub ordering: Vec<Vec<i64>>,
    /// Ranking key of each entry of `ordering`.
    pub keys: Vec<f64>,
}

impl GreedySelection {
    /// The first `n` indices (all of them if `n` exceeds the support).
    pub fn selected(&self, n: usize) -> &[Vec<i64>] {
        &self.ordering[..n.min(self.ordering.len())]
    }

    /// l1 mass of the first `n` coefficients: the coefficient budget the
    /// truncation uses.
    pub fn ell1_mass(&self, fs: &FourierSum, n: usize) -> f64 {
        self.selected(n).iter().map(|z| fs.coeffs()[z].norm()).sum()
    }

    /// Key of the last kept coefficient, `None` when nothing is kept.
    pub fn key_of_last_kept(&self, n: usize) -> Option<f64> {
        let n = n.min(self.keys.len());
        if n == 0 {
            None
        } else {
            Some(self.keys[n - 1])
        }
    }
}

fn lattice_norm(fs: &FourierSum, z: &[i64]) -> f64 {
    let xi: Vec<f64> = z.iter().map(|v| *v as f64 / fs.period()).collect();
    euclidean_norm(&xi)
}

/// Rank frequencies by `(1 + |xi|)^(2m - ks) |c_xi|`, largest first, ties
/// broken by the smaller lattice index in lexicographic order.
pub fn order_frequencies(fs: &FourierSum, m: u32, ks: f64) -> Result<GreedySelection> {
    order_frequencies_by(fs, m, ks, OrderingRule::WeightedMagnitude)
}

pub fn order_frequencies_by(fs: &FourierSum, m: u32, ks: f64, rule: OrderingRule) -> Result<GreedySelection> {
    if fs.is_empty() {
        return Err(Error::domain("fs", "cannot order an empty expansion"));
    }
    if !ks.is_finite() {
        return Err(Error::domain("ks", "must be finite"));
    }
    let exponent = 2.0 * m as f64 - ks;
    let mut ranked: Vec<(f64, &Vec<i64>)> = fs
        .coeffs()
        .iter()
        .map(|(z, c)| {
            let key = match rule {
                OrderingRule::WeightedMagnitude => (1.0 + lattice_norm(fs, z)).powf(exponent) * c.norm(),
                OrderingRule::ModeEnergy => c.norm_sqr() * sobolev_weight(&fs.frequency(z), m),
            };
            (key, z)
        })
        .collect();
    ranked.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(b.1),
        other => other,
    });
    Ok(GreedySelection {
        rule,
        m,
        ks,
        keys: ranked.iter().map(|(k, _)| *k).collect(),
        ordering: ranked.into_iter().map(|(_, z)| z.clone()).collect(),
    })
}

/// Keep the first `n` ranked coefficients.
pub fn truncate_top_n(fs: &FourierSum, sel: &GreedySelection, n: usize) -> FourierSum {
    let kept: std::collections::BTreeSet<&Vec<i64>> = sel.selected(n).iter().collect();
    fs.restrict(|z| kept.contains(&z.to_vec()))
}

fn mode_energy(fs: &FourierSum, z: &[i64], m: u32) -> f64 {
    fs.coeffs()[z].norm_sqr() * sobolev_weight(&fs.frequency(z), m) * fs.period().powi(fs.dim() as i32)
}

/// Exact `H^m([0, L]^d)` norm of `f - f_n`.
pub fn tail_error_hm(fs: &FourierSum, sel: &GreedySelection, n: usize, m: u32) -> f64 {
    let start = n.min(sel.ordering.len());
    sel.ordering[start..]
        .iter()
        .map(|z| mode_energy(fs, z, m))
        .sum::<f64>()
        .sqrt()
}

/// Tail errors for every `n` in `0..=support size`, via suffix sums.
pub fn tail_errors(fs: &FourierSum, sel: &GreedySelection, m: u32) -> Vec<f64> {
    let energies: Vec<f64> = sel.ordering.iter().map(|z| mode_energy(fs, z, m)).collect();
    let mut out = vec![0.0; energies.len() + 1];
    let mut acc = 0.0;
    for i in (0..energies.len()).rev() {
        acc += energies[i];
        out[i] = acc.sqrt();
    }
    out
}

/// `sum over the first n ranked frequencies of (1 + |xi|)^(2(ks - m))`.
pub fn lattice_weight_sum(fs: &FourierSum, sel: &GreedySelection, n: usize) -> f64 {
    let e = 2.0 * (sel.ks - sel.m as f64);
    sel.selected(n)
        .iter()
        .map(|z| (1.0 + lattice_norm(fs, z)).powf(e))
        .sum()
}

/// One row of a truncation sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub error: f64,
    /// `C * ||f||_{B^{ks}} * n^{-(1/2 + (ks - m)/d)}` with `C` fitted at the
    /// smallest `n`.
    pub bound: f64,
    pub key_of_last_kept: f64,
}

/// Measure the truncation error over `ns` and attach the predicted bound.
pub fn greedy_sweep(fs: &FourierSum, m: u32, ks: f64, ns: &[usize]) -> Result<Vec<SweepRow>> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::domain("n", "sweep needs at least one n and every n >= 1"));
    }
    let sel = order_frequencies(fs, m, ks)?;
    let tails = tail_errors(fs, &sel, m);
    let exponent = greedy_rate(ks, m as f64, fs.dim());
    let norm = barron::barron_norm(fs, &WeightSpec::Polynomial { s: ks.max(0.0) });
    let err_at = |n: usize| tails[n.min(tails.len() - 1)];
    let n0 = ns[0] as f64;
    let scale = err_at(ns[0]) / (norm * n0.powf(-exponent));
    Ok(ns
        .iter()
        .map(|&n| SweepRow {
            n,
            error: err_at(n),
            bound: scale * norm * (n as f64).powf(-exponent),
            key_of_last_kept: sel.key_of_last_kept(n).unwrap_or(0.0),
        })
        .collect())
}

/// Heavy-tailed test expansion: `c_xi = e^{i theta} (1 + |xi|)^{-(ks + d + 0.1)}`
/// with uniform random phases for every `|xi| <= xi_max`, on the lattice with
/// period 1 and zero offset.
pub fn synthetic_heavy_tail(dim: usize, ks: f64, xi_max: f64, seed: u64) -> Result<FourierSum> {
    if dim == 0 || dim > 3 {
        return Err(Error::domain("d", "synthetic inputs support 1 <= d <= 3"));
    }
    if !(xi_max >= 1.0) {
        return Err(Error::domain("xi_max", "must be >= 1"));
    }
    let r = xi_max.floor() as i64;
    let decay = ks + dim as f64 + 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = Vec::new();
    let mut z = vec![-r; dim];
    loop {
        let xi: Vec<f64> = z.iter().map(|v| *v as f64).collect();
        let norm = euclidean_norm(&xi);
        if norm <= xi_max {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            coeffs.push((z.clone(), Complex64::from_polar((1.0 + norm).powf(-decay), theta)));
        }
        let mut j = dim;
        loop {
            if j == 0 {
                return FourierSum::new(dim, 1.0, vec![0.0; dim], coeffs);
            }
            j -= 1;
            z[j] += 1;
            if z[j] <= r {
                break;
            }
            z[j] = -r;
        }
    }
}

/// Closed-form rate exponents for a smoothness `s`, Sobolev order `m`,
/// activation power `k` and dimension `d`. Every entry is the positive
/// exponent `e` of a rate `n^{-e}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    /// `1/2 + (k s - m)/d`: greedy lattice-Fourier truncation in `H^m`.
    pub fourier_rate: f64,
    /// `1/2 + min((2(s - m) - 1)/(2(d + 1)), k - m + 1/2)`: ReLU^k rate
    /// without coefficient bounds.
    #[serde(rename = "t")]
    pub relu_rate: f64,
    /// Power of `log n` accompanying `relu_rate`.
    #[serde(rename = "q")]
    pub relu_log_power: f64,
    /// `(d + 1)(k - m + 1/2) + m + 1/2`: smoothness at which `relu_rate`
    /// saturates.
    #[serde(rename = "threshold")]
    pub saturation_smoothness: f64,
    /// `1/2 + (2k + 1)/(2d)`: packing (entropy) exponent of the ReLU^k
    /// variation ball.
    #[serde(rename = "gamma")]
    pub entropy_exponent: f64,
    /// `s/d`: classical Sobolev rate.
    pub sobolev_rate: f64,
    /// `(k + 1) - m`: the best possible ReLU^k rate at any smoothness.
    pub relu_rate_ceiling: f64,
}

/// `1/2 + (ks - m)/d`.
pub fn greedy_rate(ks: f64, m: f64, d: usize) -> f64 {
    0.5 + (ks - m) / d as f64
}

pub fn rate_exponents(s: f64, m: f64, k: u32, d: usize) -> Result<ExponentTable> {
    if d == 0 {
        return Err(Error::domain("d", "must be >= 1"));
    }
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::domain("m", "must be >= 0"));
    }
    if !s.is_finite() {
        return Err(Error::domain("s", "must be finite"));
    }
    let kf = k as f64;
    let df = d as f64;
    let cap = kf - m + 0.5;
    let threshold = (df + 1.0) * cap + m + 0.5;
    let relu_rate = 0.5 + ((2.0 * (s - m) - 1.0) / (2.0 * (df + 1.0))).min(cap);
    let relu_log_power = match s.partial_cmp(&threshold) {
        Some(Ordering::Less) => 0.0,
        Some(Ordering::Greater) => 1.0,
        _ => 1.0 + cap,
    };
    Ok(ExponentTable {
        fourier_rate: greedy_rate(kf * s, m, d),
        relu_rate,
        relu_log_power,
        saturation_smoothness: threshold,
        entropy_exponent: 0.5 + (2.0 * kf + 1.0) / (2.0 * df),
        sobolev_rate: s / df,
        relu_rate_ceiling: kf + 1.0 - m,
    })
}
