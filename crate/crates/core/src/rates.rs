//! Sweep harness: run a construction over a grid of sizes, fit the log-log
//! slope of its error and compare it with the predicted exponent.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::greedy_fourier::{order_frequencies, synthetic_heavy_tail, tail_errors, greedy_rate};
use crate::lower_bounds::{build_packing, dyadic_blocks, harmonic_spectrum, pairwise_separation, residual_tail_norm, PackingKind, SeparationNorm};
use crate::numerics::{loglog_fit, RateFit};
use crate::relu_nets::{compile_sobolev_approximant, CompileConfig, CubePartition};
use crate::sphere_geom::{covering_radius, greedy_net};
use crate::subsample::{maurey_subsample, random_terms};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GreedyFourier,
    SobolevCompile,
    SphereCover,
    SubsampleConcentration,
    PackingSeparation,
    DyadicResidual,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::GreedyFourier,
        ExperimentKind::SobolevCompile,
        ExperimentKind::SphereCover,
        ExperimentKind::SubsampleConcentration,
        ExperimentKind::PackingSeparation,
        ExperimentKind::DyadicResidual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GreedyFourier => "greedy-fourier",
            ExperimentKind::SobolevCompile => "sobolev-compile",
            ExperimentKind::SphereCover => "sphere-cover",
            ExperimentKind::SubsampleConcentration => "subsample-concentration",
            ExperimentKind::PackingSeparation => "packing-separation",
            ExperimentKind::DyadicResidual => "dyadic-residual",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::domain("kind", format!("unknown experiment '{s}'")))
    }
}

/// Parameters shared by all experiment kinds; each kind reads the ones it
/// needs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentParams {
    pub d: usize,
    pub ks: f64,
    pub m: u32,
    pub k: u32,
    pub ell: u32,
    pub xi_max: f64,
    pub terms: usize,
    pub monomials: usize,
    pub restarts: usize,
    pub probes: usize,
    pub pair_budget: usize,
    pub tolerance: f64,
}

impl ExperimentParams {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let d = match kind {
            ExperimentKind::SphereCover | ExperimentKind::PackingSeparation => 2,
            _ => 1,
        };
        ExperimentParams {
            d,
            ks: 2.0,
            m: 0,
            k: 1,
            ell: 2,
            xi_max: 4096.0,
            terms: 1024,
            monomials: 10,
            restarts: 64,
            probes: 20_000,
            pair_budget: 256,
            tolerance: 0.15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    BoundSatisfied,
    BoundViolated,
    Informational,
}

/// Upper-bound check: the measured decay must be at least as fast as the
/// predicted one, up to `tolerance` on the slope.
pub fn verdict(slope: f64, predicted: f64, tolerance: f64, informational: bool) -> Verdict {
    if informational {
        Verdict::Informational
    } else if slope <= predicted + tolerance {
        Verdict::BoundSatisfied
    } else {
        Verdict::BoundViolated
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub n: usize,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config: serde_json::Value,
    pub samples: Vec<Sample>,
    pub fit: Option<RateFit>,
    pub predicted: f64,
    pub verdict: Verdict,
    pub seconds: Option<f64>,
    pub error: Option<String>,
}

impl ExperimentReport {
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut v = json!({
            "kind": self.kind,
            "config": self.config,
            "samples": self.samples,
            "fit": self.fit.map(|f| json!({"slope": f.slope, "intercept": f.intercept, "r2": f.r_squared})),
            "predicted": self.predicted,
            "verdict": self.verdict,
            "seconds": self.seconds,
        });
        if let Some(e) = &self.error {
            v["error"] = json!(e);
        }
        v
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_value())?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,error\n");
        for s in &self.samples {
            out.push_str(&format!("{},{:.16e}\n", s.n, s.error));
        }
        out
    }
}

/// The sweep each kind runs when no grid is given.
pub fn default_grid(kind: ExperimentKind) -> Vec<usize> {
    let doubling = |lo: usize, hi: usize| {
        std::iter::successors(Some(lo), |v| Some(v * 2))
            .take_while(|v| *v <= hi)
            .collect()
    };
    match kind {
        ExperimentKind::GreedyFourier => (1..=128).map(|i| 2 * i).collect(),
        ExperimentKind::SobolevCompile => doubling(2, 64),
        ExperimentKind::SphereCover => doubling(4, 128),
        ExperimentKind::SubsampleConcentration => doubling(4, 256),
        ExperimentKind::PackingSeparation => doubling(4, 1024),
        ExperimentKind::DyadicResidual => doubling(2, 2048),
    }
}

/// Slope fits need a strictly increasing grid of at least 4 points
/// spanning at least 1.5 decades.
pub fn validate_grid(grid: &[usize]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::domain("n_grid", format!("need at least 4 points, got {}", grid.len())));
    }
    if grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("n_grid", "must be strictly increasing and positive"));
    }
    let span = (grid[grid.len() - 1] as f64 / grid[0] as f64).log10();
    if span < 1.5 - 1e-12 {
        return Err(Error::domain("n_grid", format!("spans {span:.2} decades, need 1.5")));
    }
    Ok(())
}

fn predicted_exponent(kind: ExperimentKind, p: &ExperimentParams) -> f64 {
    let d = p.d as f64;
    let k = p.k as f64;
    match kind {
        ExperimentKind::GreedyFourier => -greedy_rate(p.ks, p.m as f64, p.d),
        ExperimentKind::SobolevCompile => -(p.ell as f64) / d,
        ExperimentKind::SphereCover => -1.0 / (d - 1.0),
        ExperimentKind::SubsampleConcentration => -0.5,
        // Growth of R^k / sqrt(m) with R = n^(1/2 + k/d), m ~ n^(d/(2d+2k+1)).
        ExperimentKind::PackingSeparation => k * (0.5 + k / d) - 0.5 * d / (2.0 * d + 2.0 * k + 1.0),
        ExperimentKind::DyadicResidual => -0.5,
    }
}

fn check_params(kind: ExperimentKind, p: &ExperimentParams, grid: &[usize]) -> Result<()> {
    match kind {
        ExperimentKind::SphereCover | ExperimentKind::PackingSeparation if p.d < 2 => {
            Err(Error::domain("d", format!("{kind} needs d >= 2")))
        }
        ExperimentKind::SobolevCompile if p.d > 3 => Err(Error::domain("d", "sobolev-compile supports d <= 3")),
        ExperimentKind::SubsampleConcentration if grid.iter().any(|n| *n > p.terms) => {
            Err(Error::domain("n_grid", format!("subsample sizes must not exceed terms = {}", p.terms)))
        }
        ExperimentKind::DyadicResidual if p.d != 1 => Err(Error::domain("d", "dyadic-residual is one-dimensional")),
        _ if !(p.tolerance >= 0.0) => Err(Error::domain("tolerance", "must be nonnegative")),
        _ => Ok(()),
    }
}

fn sobolev_target(x: &[f64]) -> f64 {
    x.iter().map(|v| (2.0 * std::f64::consts::PI * v).sin()).product()
}

/// Run one sweep. Every grid point gets its own seed `seed ^ index`; grid
/// points run in parallel and samples are assembled in grid order.
/// Failures of individual runs are reported in the result, which then
/// carries the samples that did succeed and an informational verdict.
pub fn run_experiment(
    kind: ExperimentKind,
    params: &ExperimentParams,
    n_grid: &[usize],
    seed: u64,
    timing: bool,
) -> Result<ExperimentReport> {
    validate_grid(n_grid)?;
    check_params(kind, params, n_grid)?;
    let start = Instant::now();
    let p = params;
    // Inputs shared by every grid point.
    let greedy_tails = if kind == ExperimentKind::GreedyFourier {
        let fs = synthetic_heavy_tail(p.d, p.ks, p.xi_max, seed)?;
        let sel = order_frequencies(&fs, p.m, p.ks)?;
        Some(tail_errors(&fs, &sel, p.m))
    } else {
        None
    };
    let dyadic = if kind == ExperimentKind::DyadicResidual {
        let levels = p.xi_max.log2().ceil() as u32 + 1;
        Some(dyadic_blocks(&harmonic_spectrum(p.xi_max as i64)?, levels)?)
    } else {
        None
    };
    let run = |i: usize, n: usize| -> Result<Sample> {
        let run_seed = seed ^ i as u64;
        let (n_rec, error) = match kind {
            ExperimentKind::GreedyFourier => {
                let tails = greedy_tails.as_ref().expect("built above");
                if n >= tails.len() {
                    return Err(Error::domain("n_grid", format!("n = {n} exceeds the {} input modes", tails.len() - 1)));
                }
                (n, tails[n])
            }
            ExperimentKind::SobolevCompile => {
                let part = CubePartition::new(p.d, n)?;
                let comp = compile_sobolev_approximant(sobolev_target, &part, &CompileConfig::new(p.ell))?;
                let sup = comp.cells.iter().map(|c| c.sup_error).fold(0.0, f64::max);
                (part.len(), sup)
            }
            ExperimentKind::SphereCover => {
                let net = greedy_net(p.d, n, 64 * n, run_seed)?;
                (n, covering_radius(&net, p.probes, run_seed.wrapping_add(1))?)
            }
            ExperimentKind::SubsampleConcentration => {
                let terms = random_terms(p.terms, p.monomials, run_seed);
                (n, maurey_subsample(&terms, n, p.restarts, run_seed, 1.0, 1.0)?.deviation)
            }
            ExperimentKind::PackingSeparation => {
                let fam = build_packing(PackingKind::Relu, p.d, p.k as f64, n, run_seed)?;
                if fam.len() < 2 {
                    return Err(Error::domain("n_grid", format!("n = {n} gives a single-member family")));
                }
                (n, pairwise_separation(&fam, SeparationNorm::Witness, p.pair_budget, run_seed)?.min_distance)
            }
            ExperimentKind::DyadicResidual => {
                let dec = dyadic.as_ref().expect("built above");
                let k0 = (n as f64).log2().ceil() as u32;
                (n, residual_tail_norm(dec, k0))
            }
        };
        Ok(Sample { n: n_rec, error })
    };
    let results: Vec<Result<Sample>> = n_grid.par_iter().enumerate().map(|(i, &n)| run(i, n)).collect();
    let mut samples = Vec::new();
    let mut failure = None;
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e) if failure.is_none() => failure = Some(e.to_string()),
            Err(_) => {}
        }
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.n as f64, s.error)).collect();
    let fit = loglog_fit(&pts).ok();
    let predicted = predicted_exponent(kind, p);
    let informational = failure.is_some() || fit.is_none() || kind == ExperimentKind::PackingSeparation;
    let v = verdict(fit.map(|f| f.slope).unwrap_or(f64::NAN), predicted, p.tolerance, informational);
    Ok(ExperimentReport {
        kind,
        config: json!({"params": params, "n_grid": n_grid, "seed": seed}),
        samples,
        fit,
        predicted,
        verdict: v,
        seconds: timing.then(|| start.elapsed().as_secs_f64()),
        error: failure,
    })
}
