//! Bias truncation of atomic measures on the ReLU^k dictionary and
//! best-of-restarts empirical subsampling of averages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::euclidean_norm;

/// One atom `mass * delta_(omega, b)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub direction: Vec<f64>,
    pub bias: f64,
    pub mass: f64,
}

/// A finite signed measure on unit directions and biases.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomicMeasure {
    pub dim: usize,
    pub atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if a.direction.len() != dim || (euclidean_norm(&a.direction) - 1.0).abs() > 1e-12 {
                return Err(Error::domain("mu", format!("atom {i} direction is not a unit vector in R^{dim}")));
            }
            if !(a.mass.is_finite() && a.bias.is_finite()) {
                return Err(Error::domain("mu", format!("atom {i} has a non-finite mass or bias")));
            }
        }
        Ok(AtomicMeasure { dim, atoms })
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass.abs()).sum()
    }

    /// `int sigma_k(omega . x + b) d mu`.
    pub fn eval(&self, x: &[f64], k: u32) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.mass * crate::relu_nets::sigma_k(crate::numerics::dot(&a.direction, x) + a.bias, k))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Truncation {
    /// Bias cap: atoms with `|b| <= c_eps` are kept.
    pub c_eps: f64,
    pub truncated: AtomicMeasure,
    /// `sum_{|b| > c_eps} (|b| + C_Omega)^k |mass|`, which bounds the sup
    /// norm of the discarded part on a domain inside the `C_Omega` ball.
    pub discarded_bound: f64,
}

/// Smallest bias cap whose discarded weighted mass stays below `eps`.
pub fn truncate_dictionary_measure(mu: &AtomicMeasure, eps: f64, c_omega: f64, k: u32) -> Result<Truncation> {
    if !(eps > 0.0) {
        return Err(Error::domain("eps", "tolerance must be positive"));
    }
    if !(c_omega >= 0.0) {
        return Err(Error::domain("C_Omega", "domain bound must be nonnegative"));
    }
    if mu.total_variation() > 1.0 + 1e-12 {
        return Err(Error::domain("mu", format!("total variation {} exceeds 1", mu.total_variation())));
    }
    let weight = |a: &Atom| (a.bias.abs() + c_omega).powi(k as i32) * a.mass.abs();
    let mut caps: Vec<f64> = std::iter::once(0.0).chain(mu.atoms.iter().map(|a| a.bias.abs())).collect();
    caps.sort_by(f64::total_cmp);
    caps.dedup();
    for cap in caps {
        let tail: f64 = mu.atoms.iter().filter(|a| a.bias.abs() > cap).map(weight).sum();
        if tail < eps {
            let kept = mu.atoms.iter().filter(|a| a.bias.abs() <= cap).cloned().collect();
            return Ok(Truncation {
                c_eps: cap,
                truncated: AtomicMeasure::new(mu.dim, kept)?,
                discarded_bound: tail,
            });
        }
    }
    unreachable!("the largest cap discards nothing")
}

/// `B sqrt(ln(2M/p) / (2n))`: uniform deviation of `M` empirical means of
/// `n` samples bounded by `B`, holding with probability `1 - p`.
pub fn hoeffding_delta(n: usize, bound: f64, monomials: usize, fail_prob: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n", "need at least one sample"));
    }
    if !(fail_prob > 0.0 && fail_prob < 1.0) {
        return Err(Error::domain("fail_prob", "must lie in (0, 1)"));
    }
    if monomials == 0 || !(bound >= 0.0) {
        return Err(Error::domain("M", "need M >= 1 and B >= 0"));
    }
    Ok(bound * ((2.0 * monomials as f64 / fail_prob).ln() / (2.0 * n as f64)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RestartRow {
    pub restart: usize,
    pub deviation: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsampleResult {
    /// Chosen multiset as indices into the caller's term list, sorted.
    pub selection: Vec<usize>,
    /// `max_j |mean_S c_j - mean_all c_j|` of the best restart.
    pub deviation: f64,
    pub hoeffding: f64,
    pub accepted: bool,
    /// `M * basis_sup * deviation`.
    pub sup_bound: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartRow>,
}

impl SubsampleResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("restart,deviation,accepted\n");
        for r in &self.restarts {
            out.push_str(&format!("{},{:.16e},{}\n", r.restart, r.deviation, r.accepted as u8));
        }
        out
    }
}

fn deviation_of(terms: &[&Vec<f64>], picks: &[usize], mean: &[f64]) -> f64 {
    let n = picks.len() as f64;
    (0..mean.len())
        .map(|j| (picks.iter().map(|&i| terms[i][j]).sum::<f64>() / n - mean[j]).abs())
        .fold(0.0, f64::max)
}

/// Best of `restarts` uniform `n`-multisets (sampling with replacement)
/// approximating the average of `terms` coefficientwise.
///
/// Terms are sorted into a canonical order before sampling, so the result
/// does not depend on how the caller ordered them. When `n` equals the
/// number of terms, restart 0 is the full set itself.
pub fn maurey_subsample(
    terms: &[Vec<f64>],
    n: usize,
    restarts: usize,
    seed: u64,
    bound: f64,
    basis_sup: f64,
) -> Result<SubsampleResult> {
    let total = terms.len();
    if total == 0 {
        return Err(Error::domain("terms", "need at least one term"));
    }
    if n == 0 || n > total {
        return Err(Error::domain("n", format!("subsample size {n} must lie in 1..={total}")));
    }
    if restarts == 0 {
        return Err(Error::domain("restarts", "need at least one restart"));
    }
    let dim = terms[0].len();
    for (i, t) in terms.iter().enumerate() {
        if t.len() != dim {
            return Err(Error::domain("terms", format!("term {i} has {} coefficients, expected {dim}", t.len())));
        }
        if let Some(v) = t.iter().find(|v| !(v.abs() <= bound)) {
            return Err(Error::domain("B", format!("term {i} has coefficient {v} above the bound {bound}")));
        }
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        terms[a]
            .iter()
            .zip(&terms[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let canon: Vec<&Vec<f64>> = order.iter().map(|&i| &terms[i]).collect();
    let mean: Vec<f64> = (0..dim)
        .map(|j| canon.iter().map(|t| t[j]).sum::<f64>() / total as f64)
        .collect();
    let hoeffding = hoeffding_delta(n, bound, dim.max(1), 0.05)?;
    let draws: Vec<(usize, Vec<usize>, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let picks: Vec<usize> = if r == 0 && n == total {
                (0..total).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                (0..n).map(|_| rng.random_range(0..total)).collect()
            };
            let dev = deviation_of(&canon, &picks, &mean);
            (r, picks, dev)
        })
        .collect();
    let (best_restart, picks, deviation) = draws
        .iter()
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .cloned()
        .expect("at least one restart");
    let mut selection: Vec<usize> = picks.iter().map(|&i| order[i]).collect();
    selection.sort_unstable();
    Ok(SubsampleResult {
        selection,
        deviation,
        hoeffding,
        accepted: deviation <= hoeffding,
        sup_bound: dim as f64 * basis_sup * deviation,
        best_restart,
        restarts: draws
            .iter()
            .map(|(r, _, d)| RestartRow {
                restart: *r,
                deviation: *d,
                accepted: *d <= hoeffding,
            })
            .collect(),
    })
}

/// `count` terms with `dim` coefficients uniform in `[-1, 1]`.
pub fn random_terms(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn atom(b: f64, mass: f64) -> Atom {
        Atom {
            direction: vec![1.0, 0.0],
            bias: b,
            mass,
        }
    }

    #[test]
    fn truncation_examples() {
        let zero = AtomicMeasure::new(2, vec![atom(0.0, 0.5), atom(0.0, -0.25)]).unwrap();
        let t = truncate_dictionary_measure(&zero, 1e-3, 1.0, 2).unwrap();
        assert_eq!(t.c_eps, 0.0);
        assert_eq!(t.truncated.atoms.len(), 2);

        let far = AtomicMeasure::new(2, vec![atom(10.0, 1.0)]).unwrap();
        let t = truncate_dictionary_measure(&far, 100.0, 1.0, 2).unwrap();
        assert_eq!(t.c_eps, 10.0);
        assert_eq!(t.truncated.atoms.len(), 1);
        let t = truncate_dictionary_measure(&far, 122.0, 1.0, 2).unwrap();
        assert_eq!(t.c_eps, 0.0);
        assert!(t.truncated.atoms.is_empty());
        assert_eq!(t.discarded_bound, 121.0);

        assert!(truncate_dictionary_measure(&far, 0.0, 1.0, 2).is_err());
        let heavy = AtomicMeasure::new(2, vec![atom(1.0, 0.8), atom(2.0, 0.8)]).unwrap();
        assert!(truncate_dictionary_measure(&heavy, 1.0, 1.0, 1).is_err());
    }

    // Oracle: evaluate the discarded atoms on points of the C_Omega ball.
    #[test]
    fn discarded_part_is_small_in_sup_norm() {
        let atoms: Vec<Atom> = (0..20)
            .map(|i| Atom {
                direction: vec![(i as f64).cos(), (i as f64).sin()],
                bias: i as f64 * 0.4 - 4.0,
                mass: 0.05 * if i % 3 == 0 { -1.0 } else { 1.0 },
            })
            .collect();
        let mu = AtomicMeasure::new(2, atoms).unwrap();
        let eps = 0.5;
        let t = truncate_dictionary_measure(&mu, eps, 1.0, 2).unwrap();
        for i in 0..200 {
            let th = i as f64 * 0.1;
            let x = [th.cos() * (i % 7) as f64 / 7.0, th.sin() * (i % 7) as f64 / 7.0];
            assert!((mu.eval(&x, 2) - t.truncated.eval(&x, 2)).abs() < eps);
        }
    }

    #[test]
    fn hoeffding_closed_form() {
        let d = hoeffding_delta(64, 1.0, 10, 0.05).unwrap();
        assert!((d - (400f64.ln() / 128.0).sqrt()).abs() < 1e-15);
        assert!((d - 0.2164).abs() < 1e-4);
        assert_eq!(hoeffding_delta(64, 0.0, 10, 0.05).unwrap(), 0.0);
        let q = hoeffding_delta(256, 1.0, 10, 0.05).unwrap();
        assert!((q - d / 2.0).abs() < 1e-15);
        assert!(hoeffding_delta(0, 1.0, 10, 0.05).is_err());
    }

    #[test]
    fn subsample_trivial_cases() {
        let terms = random_terms(32, 5, 1);
        let full = maurey_subsample(&terms, 32, 4, 9, 1.0, 1.0).unwrap();
        assert_eq!(full.deviation, 0.0);
        assert_eq!(full.selection, (0..32).collect::<Vec<_>>());
        let same = vec![vec![0.3, -0.2]; 10];
        assert!(maurey_subsample(&same, 3, 5, 2, 1.0, 1.0).unwrap().deviation <= 1e-15);
        assert!(maurey_subsample(&terms, 33, 4, 9, 1.0, 1.0).is_err());
        assert!(maurey_subsample(&terms, 4, 4, 9, 0.5, 1.0).is_err());
    }

    #[test]
    fn best_restart_is_minimum_with_lowest_index() {
        let terms = random_terms(64, 4, 3);
        let r = maurey_subsample(&terms, 8, 32, 5, 1.0, 2.0).unwrap();
        let min = r.restarts.iter().map(|x| x.deviation).fold(f64::INFINITY, f64::min);
        assert_eq!(r.deviation, min);
        assert_eq!(r.best_restart, r.restarts.iter().position(|x| x.deviation == min).unwrap());
        assert_eq!(r.sup_bound, 4.0 * 2.0 * min);
        assert_eq!(r.to_csv().lines().count(), 33);
    }

    #[test]
    fn median_deviation_well_below_hoeffding() {
        let mut devs: Vec<f64> = (0..101)
            .map(|s| {
                let terms = random_terms(256, 10, 1000 + s);
                maurey_subsample(&terms, 64, 64, s, 1.0, 1.0).unwrap().deviation
            })
            .collect();
        devs.sort_by(f64::total_cmp);
        let h = hoeffding_delta(64, 1.0, 10, 0.05).unwrap();
        assert!(devs[50] <= 0.7 * h, "median {} vs {h}", devs[50]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn permutation_invariant(seed in 0u64..500, rot in 0usize..40) {
            let terms = random_terms(40, 3, seed);
            let mut shuffled = terms.clone();
            shuffled.rotate_left(rot);
            shuffled.reverse();
            let a = maurey_subsample(&terms, 10, 8, seed, 1.0, 1.0).unwrap();
            let b = maurey_subsample(&shuffled, 10, 8, seed, 1.0, 1.0).unwrap();
            prop_assert_eq!(a.deviation, b.deviation);
        }

        #[test]
        fn truncation_never_increases_variation(seed in 0u64..500, eps in 0.01f64..5.0) {
            let terms = random_terms(12, 2, seed);
            let total: f64 = terms.iter().map(|t| t[0].abs()).sum();
            let atoms = terms.iter().map(|t| Atom { direction: vec![0.0, 1.0], bias: 5.0 * t[1], mass: t[0] / total }).collect();
            let mu = AtomicMeasure::new(2, atoms).unwrap();
            let t = truncate_dictionary_measure(&mu, eps, 1.0, 2).unwrap();
            prop_assert!(t.truncated.total_variation() <= mu.total_variation());
            prop_assert!(t.discarded_bound < eps);
        }

        #[test]
        fn hoeffding_monotone(n in 1usize..1000, m in 1usize..100, b in 0.1f64..10.0) {
            let d = hoeffding_delta(n, b, m, 0.05).unwrap();
            prop_assert!(hoeffding_delta(n + 1, b, m, 0.05).unwrap() < d);
            prop_assert!(hoeffding_delta(n, b, m + 1, 0.05).unwrap() > d);
            prop_assert!(hoeffding_delta(n, b * 1.5, m, 0.05).unwrap() > d);
        }
    }
}
