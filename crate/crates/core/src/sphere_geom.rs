//! Direction sets on the unit sphere: greedy farthest-point nets, maximal
//! separated subsets and probed covering radii.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::euclidean_norm;

/// Unit vectors with their smallest pairwise distance and, when probed,
/// a covering-radius estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalNet {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub min_sep: f64,
    pub cover_rad: Option<f64>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn min_pairwise(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(distance(&points[i], &points[j]));
        }
    }
    best
}

impl SphericalNet {
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim || (euclidean_norm(p) - 1.0).abs() > 1e-12 {
                return Err(Error::domain("points", format!("row {i} is not a unit vector in R^{dim}")));
            }
        }
        Ok(SphericalNet {
            dim,
            min_sep: min_pairwise(&points),
            points,
            cover_rad: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `j` points as a net of their own.
    pub fn prefix(&self, j: usize) -> SphericalNet {
        let points = self.points[..j.min(self.len())].to_vec();
        SphericalNet {
            dim: self.dim,
            min_sep: min_pairwise(&points),
            points,
            cover_rad: None,
        }
    }

    /// Distance from `x` to the nearest net point.
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        self.points.iter().map(|p| distance(p, x)).fold(f64::INFINITY, f64::min)
    }

    /// One unit vector per row, columns `x0, x1, ...`.
    pub fn to_csv(&self) -> String {
        let header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        let mut out = header.join(",");
        out.push('\n');
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let dim = lines
            .next()
            .ok_or_else(|| Error::domain("csv", "empty input"))?
            .split(',')
            .count();
        let mut points = Vec::new();
        for line in lines {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::domain("csv", e.to_string())))
                .collect::<Result<Vec<f64>>>()?;
            points.push(row);
        }
        SphericalNet::from_points(dim, points)
    }
}

/// `count` uniform points on the sphere in R^d from normalized Gaussian
/// draws of a ChaCha8 stream seeded with `seed`.
pub fn sample_sphere(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = euclidean_norm(&v);
        if r > 1e-300 {
            out.push(v.iter().map(|x| x / r).collect());
        }
    }
    out
}

/// Candidate pool used when the caller does not choose one.
pub fn default_pool(m: usize) -> usize {
    256 * m.max(1)
}

/// Farthest-point net: a random first point, then each next point is the
/// candidate (from a fresh pool of `pool` uniform draws) farthest from the
/// points already chosen.
pub fn greedy_net(dim: usize, m: usize, pool: usize, seed: u64) -> Result<SphericalNet> {
    if dim < 2 {
        return Err(Error::domain("d", "sphere nets need d >= 2"));
    }
    if m == 0 {
        return Err(Error::domain("m", "need at least one point"));
    }
    if pool < 64 * m {
        return Err(Error::domain("candidate_pool", format!("need at least 64 m = {}, got {pool}", 64 * m)));
    }
    let mut points = sample_sphere(dim, 1, seed);
    for step in 1..m as u64 {
        let candidates = sample_sphere(dim, pool, seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (best, _) = candidates
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let d = points.iter().map(|p| distance(p, c)).fold(f64::INFINITY, f64::min);
                (i, d)
            })
            .reduce(
                || (usize::MAX, f64::NEG_INFINITY),
                |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a },
            );
        points.push(candidates[best].clone());
    }
    SphericalNet::from_points(dim, points)
}

/// Largest distance from `probes` seeded uniform points to the net. This is
/// a lower bound on the true covering radius.
pub fn covering_radius(net: &SphericalNet, probes: usize, seed: u64) -> Result<f64> {
    if probes < 10_000 {
        return Err(Error::domain("probes", format!("need at least 10^4 probes, got {probes}")));
    }
    if net.is_empty() {
        return Err(Error::domain("net", "empty net"));
    }
    let pts = sample_sphere(net.dim, probes, seed);
    Ok(pts.par_iter().map(|x| net.distance_to(x)).reduce(|| 0.0, f64::max))
}

/// A `delta`-separated subset built greedily from a seeded candidate stream,
/// then extended from fresh probes until every probe lies within `delta` of
/// a chosen point. `cover_rad` holds the final probed covering radius.
pub fn separated_subset(dim: usize, delta: f64, pool: usize, seed: u64) -> Result<SphericalNet> {
    if dim == 0 {
        return Err(Error::domain("d", "need d >= 1"));
    }
    if !(delta > 0.0) {
        return Err(Error::domain("delta", "separation must be positive"));
    }
    if pool == 0 {
        return Err(Error::domain("candidate_pool", "need at least one candidate"));
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    let admit = |c: &Vec<f64>, points: &mut Vec<Vec<f64>>| {
        if points.iter().all(|p| distance(p, c) >= delta) {
            points.push(c.clone());
        }
    };
    for c in sample_sphere(dim, pool, seed) {
        admit(&c, &mut points);
    }
    let probes = sample_sphere(dim, pool.max(10_000), seed ^ 0x005E_ED0F_5EED);
    for c in &probes {
        admit(c, &mut points);
    }
    let cover = probes
        .par_iter()
        .map(|x| points.iter().map(|p| distance(p, x)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max);
    let mut net = SphericalNet::from_points(dim, points)?;
    net.cover_rad = Some(cover);
    Ok(net)
}
