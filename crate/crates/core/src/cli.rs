//! The `shallow-approx` command line.
//!
//! Exit codes: 0 on success, 1 when a checked invariant fails or a sweep
//! violates its bound, 2 on argument or precondition errors.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::greedy_fourier::{greedy_sweep, rate_exponents, synthetic_heavy_tail};
use crate::lower_bounds::{
    build_packing, dyadic_blocks, heavy_tail_mass, harmonic_spectrum, highfreq_gap, oscillatory_witness, pairwise_separation,
    plane_wave_hm_norm, residual_tail_norm, PackingKind, SeparationNorm,
};
use crate::numerics::{AxisBox, QuadratureSpec};
use crate::rates::{default_grid, run_experiment, ExperimentKind, ExperimentParams, Verdict};
use crate::relu_nets::{
    compile_sobolev_approximant, evaluate_network, monomial_network_1d, monomial_product_expansion, network_hm_upper, total_degree_exponents,
    CompileConfig, CubePartition, ReluNetwork, ReluUnit,
};
use crate::sphere_geom::{covering_radius, default_pool, greedy_net};
use crate::subsample::{maurey_subsample, random_terms};

#[derive(Parser, Debug)]
#[command(name = "shallow-approx", version, about = "Constructive shallow-network approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Common {
    /// Write output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Describe the constructions this subcommand exercises and exit.
    #[arg(long)]
    list: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form rate exponents.
    Exponents(ExponentsArgs),
    /// Greedy lattice-Fourier truncation sweep on a heavy-tailed input.
    GreedyFourier(GreedyArgs),
    /// Piecewise-polynomial compilation of a smooth target on a cube grid.
    ReluCompile(CompileArgs),
    /// Exact monomial identities for ReLU^k units.
    MonomialCheck(MonomialArgs),
    /// Greedy farthest-point net on the sphere.
    SphereNet(SphereArgs),
    /// Best-of-restarts subsampling of an average.
    Subsample(SubsampleArgs),
    /// Sign-vector packing family and its pairwise separation.
    Packing(PackingArgs),
    /// Dyadic blocks of a harmonic spectrum.
    Dyadic(DyadicArgs),
    /// Least-squares probe of exponential-unit fits to plane waves.
    #[command(name = "gap-probe")]
    GapProbe(GapArgs),
    /// Normalizer and tail mass of the heavy-tailed parameter measure.
    #[command(name = "tail-mass")]
    TailMass(TailArgs),
    /// Oscillatory witness norm against a width-independent network bound.
    Witness(WitnessArgs),
    /// Sweep an experiment, fit the slope and render a verdict.
    Rates(RatesArgs),
}

#[derive(Args, Debug)]
struct ExponentsArgs {
    #[arg(long = "d", default_value_t = 2)]
    d: usize,
    #[arg(long = "m", default_value_t = 0.0)]
    m: f64,
    #[arg(long = "k", default_value_t = 1)]
    k: u32,
    #[arg(long = "s", default_value_t = 0.5)]
    s: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct GreedyArgs {
    #[arg(long = "d", default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2.0)]
    ks: f64,
    #[arg(long = "m", default_value_t = 0)]
    m: u32,
    #[arg(long, default_value_t = 4096.0)]
    xi_max: f64,
    /// `a:b`, `a:b:step` or a comma list.
    #[arg(long, value_parser = parse_grid)]
    n_grid: Option<Grid>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    /// `prod_j sin(2 pi x_j)`.
    Sin,
    /// `1 + x_1 - 2 x_1^2` (exactly reproduced for ell >= 2).
    Poly,
}

#[derive(Args, Debug)]
struct CompileArgs {
    #[arg(long = "d", default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    ell: u32,
    /// Cells per axis.
    #[arg(long = "q", default_value_t = 8)]
    q: usize,
    #[arg(long, value_enum, default_value_t = Target::Sin)]
    target: Target,
    /// Indicator sharpness for the smoothed approximant.
    #[arg(long)]
    sharpness: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct MonomialArgs {
    /// Largest total degree checked.
    #[arg(long = "k", default_value_t = 4)]
    k: u32,
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SphereArgs {
    #[arg(long = "d", default_value_t = 3)]
    d: usize,
    #[arg(long = "m", default_value_t = 64)]
    m: usize,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    probes: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SubsampleArgs {
    #[arg(long, default_value_t = 256)]
    terms: usize,
    #[arg(long = "n", default_value_t = 64)]
    n: usize,
    /// Coefficients per term.
    #[arg(long, default_value_t = 10)]
    monomials: usize,
    #[arg(long, default_value_t = 1.0)]
    bound: f64,
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Relu,
    Fourier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum NormArg {
    Witness,
    L2,
}

#[derive(Args, Debug)]
struct PackingArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Relu)]
    kind: KindArg,
    #[arg(long = "d", default_value_t = 2)]
    d: usize,
    #[arg(long = "k", default_value_t = 2)]
    k: u32,
    #[arg(long = "s", default_value_t = 1.0)]
    s: f64,
    #[arg(long = "n", default_value_t = 32)]
    n: usize,
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
    #[arg(long, default_value_t = 256)]
    pair_budget: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DyadicArgs {
    #[arg(long, default_value_t = 7)]
    levels: u32,
    #[arg(long, default_value_t = 127)]
    xi_max: i64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct GapArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Target frequencies, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![8.0, 16.0, 32.0, 64.0])]
    omega0: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    units: usize,
    #[arg(long, default_value_t = 512)]
    candidates: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TailArgs {
    #[arg(long = "m", default_value_t = 0)]
    m: u32,
    #[arg(long = "A", alias = "a", default_value_t = 2.0)]
    a: f64,
    #[arg(long, default_value_t = 16)]
    order: usize,
    #[arg(long, default_value_t = 8)]
    panels: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct WitnessArgs {
    #[arg(long = "n", default_value_t = 16)]
    n: usize,
    #[arg(long = "k", default_value_t = 1)]
    k: u32,
    #[arg(long = "d", default_value_t = 2)]
    d: usize,
    #[arg(long = "m", default_value_t = 1)]
    m: u32,
    /// Width of the random unit-l1 network whose bound is reported.
    #[arg(long, default_value_t = 32)]
    width: usize,
    #[arg(long, default_value_t = 2.0)]
    bias_cap: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: ExperimentKind,
    #[arg(long, value_parser = parse_grid)]
    n_grid: Option<Grid>,
    #[arg(long = "d")]
    d: Option<usize>,
    #[arg(long)]
    ks: Option<f64>,
    #[arg(long = "m")]
    m: Option<u32>,
    #[arg(long = "k")]
    k: Option<u32>,
    #[arg(long)]
    ell: Option<u32>,
    #[arg(long)]
    xi_max: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Record wall time in the report (makes output nondeterministic).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Grid(Vec<usize>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let bad = |e: std::num::ParseIntError| format!("bad grid '{s}': {e}");
    if s.contains(':') {
        let parts: Vec<usize> = s.split(':').map(|p| p.trim().parse().map_err(bad)).collect::<std::result::Result<_, _>>()?;
        let (lo, hi, step) = match parts.as_slice() {
            [lo, hi] => (*lo, *hi, 1),
            [lo, hi, step] => (*lo, *hi, *step),
            _ => return Err(format!("bad grid '{s}': use a:b or a:b:step")),
        };
        if step == 0 || lo > hi {
            return Err(format!("bad grid '{s}': need a <= b and step >= 1"));
        }
        Ok(Grid((lo..=hi).step_by(step).collect()))
    } else {
        Ok(Grid(
            s.split(',').map(|p| p.trim().parse().map_err(bad)).collect::<std::result::Result<_, _>>()?,
        ))
    }
}

fn parse_kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Lossless decimal form: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Outcome {
    text: String,
    ok: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome {
            text,
            ok: true,
            notes: Vec::new(),
        }
    }
}

fn json_text(v: &serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn listing(cmd: &Command) -> &'static str {
    match cmd {
        Command::Exponents(_) => "rate exponents: lattice-Fourier n-term rate; ReLU^k rate, saturation smoothness and log power; entropy exponent of the ReLU^k variation ball; Sobolev rate",
        Command::GreedyFourier(_) => "greedy n-term truncation of a lattice Fourier expansion; exact H^m tail error against the n^-(1/2 + (ks-m)/d) bound",
        Command::ReluCompile(_) => "per-cell least-squares polynomials on a cube partition; smoothed-indicator gluing; L^inf error against the n^-s/d rate",
        Command::MonomialCheck(_) => "x^m as two ReLU^m units; multivariate monomials as products of coordinate units",
        Command::SphereNet(_) => "greedy farthest-point net on the sphere; probed covering radius against m^-1/(d-1)",
        Command::Subsample(_) => "empirical subsampling of an average; best deviation against the Hoeffding union bound",
        Command::Packing(_) => "sign-vector packing families (Fourier and ReLU^k); witness-point main and cross terms",
        Command::Dyadic(_) => "dyadic frequency blocks of a (1+|xi|)^-1 spectrum; block norms and residual tails",
        Command::GapProbe(_) => "exponential-decay ridge units fit to e^(i omega0 x); best error times omega0",
        Command::TailMass(_) => "normalizer and tail mass of a Gaussian-in-omega measure with heavy bias tails",
        Command::Witness(_) => "H^m norm of an oscillatory plane wave against the width-independent l1 network bound",
        Command::Rates(_) => "sweeps over n with log-log slope fits and one-sided verdicts for every experiment kind",
    }
}

fn common_of(cmd: &Command) -> &Common {
    match cmd {
        Command::Exponents(a) => &a.common,
        Command::GreedyFourier(a) => &a.common,
        Command::ReluCompile(a) => &a.common,
        Command::MonomialCheck(a) => &a.common,
        Command::SphereNet(a) => &a.common,
        Command::Subsample(a) => &a.common,
        Command::Packing(a) => &a.common,
        Command::Dyadic(a) => &a.common,
        Command::GapProbe(a) => &a.common,
        Command::TailMass(a) => &a.common,
        Command::Witness(a) => &a.common,
        Command::Rates(a) => &a.common,
    }
}

fn default_format(cmd: &Command) -> Format {
    match cmd {
        Command::Exponents(_) | Command::TailMass(_) | Command::Witness(_) | Command::Rates(_) | Command::GapProbe(_) => Format::Json,
        _ => Format::Csv,
    }
}

fn exponents(a: &ExponentsArgs, fmt: Format) -> Result<Outcome> {
    let t = rate_exponents(a.s, a.m, a.k, a.d)?;
    let mut v = json!({"d": a.d, "m": a.m, "k": a.k, "s": a.s});
    if let (Some(obj), serde_json::Value::Object(tab)) = (v.as_object_mut(), serde_json::to_value(t)?) {
        obj.extend(tab);
    }
    Ok(Outcome::ok(match fmt {
        Format::Json => json_text(&v)?,
        Format::Csv => {
            let mut out = String::from("key,value\n");
            for (k, val) in v.as_object().expect("object") {
                let x = val.as_f64().unwrap_or(f64::NAN);
                out.push_str(&format!("{k},{}\n", num(x)));
            }
            out
        }
    }))
}

fn greedy(a: &GreedyArgs, fmt: Format) -> Result<Outcome> {
    let grid = a.n_grid.clone().map(|g| g.0).unwrap_or_else(|| default_grid(ExperimentKind::GreedyFourier));
    let fs = synthetic_heavy_tail(a.d, a.ks, a.xi_max, a.common.seed)?;
    let rows = greedy_sweep(&fs, a.m, a.ks, &grid)?;
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.n);
    let monotone = sorted.windows(2).all(|w| w[1].error <= w[0].error);
    let text = match fmt {
        Format::Json => json_text(&serde_json::to_value(&rows)?)?,
        Format::Csv => {
            let mut out = String::from("n,error,bound,key_of_last_kept\n");
            for r in &rows {
                out.push_str(&format!("{},{},{},{}\n", r.n, num(r.error), num(r.bound), num(r.key_of_last_kept)));
            }
            out
        }
    };
    let mut o = Outcome::ok(text);
    if !monotone {
        o.ok = false;
        o.notes.push("tail errors are not monotone in n".into());
    }
    Ok(o)
}

fn compile(a: &CompileArgs, fmt: Format) -> Result<Outcome> {
    let part = CubePartition::new(a.d, a.q)?;
    let mut cfg = CompileConfig::new(a.ell);
    cfg.sharpness = a.sharpness;
    let target = a.target;
    let f = move |x: &[f64]| match target {
        Target::Sin => x.iter().map(|v| (2.0 * std::f64::consts::PI * v).sin()).product(),
        Target::Poly => 1.0 + x[0] - 2.0 * x[0] * x[0],
    };
    let comp = compile_sobolev_approximant(f, &part, &cfg)?;
    let sup = comp.cells.iter().map(|c| c.sup_error).fold(0.0, f64::max);
    let mut o = Outcome::ok(match fmt {
        Format::Csv => comp.to_csv(),
        Format::Json => json_text(&json!({
            "d": a.d, "ell": a.ell, "q": a.q, "cells": comp.cells.len(),
            "sup_error": sup,
            "l2_error": comp.error_norm(f, 2.0, false, a.ell as usize + 4),
            "smoothed_l2_error": cfg.sharpness.map(|_| comp.error_norm(f, 2.0, true, a.ell as usize + 4)),
            "cell_fits": comp.cells,
        }))?,
    });
    if target == Target::Poly && a.ell >= 2 && sup > 1e-10 {
        o.ok = false;
        o.notes.push(format!("polynomial target not reproduced: sup error {sup}"));
    }
    Ok(o)
}

fn monomials(a: &MonomialArgs, fmt: Format) -> Result<Outcome> {
    if a.points == 0 {
        return Err(Error::Domain {
            param: "points",
            reason: "need at least one point".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let mut rows = Vec::new();
    for m in 1..=a.k {
        let net = monomial_network_1d(m)?;
        let dev = (0..a.points)
            .map(|_| {
                let x: f64 = rng.random_range(-10.0..=10.0);
                let exact = x.powi(m as i32);
                (evaluate_network(&net, &[x]).re - exact).abs() / exact.abs().max(1.0)
            })
            .fold(0.0, f64::max);
        rows.push(("network".to_string(), 1usize, vec![m], dev));
    }
    for d in 1..=3usize {
        for alpha in total_degree_exponents(d, a.k) {
            if alpha.iter().all(|v| *v == 0) {
                continue;
            }
            let p = monomial_product_expansion(&alpha, a.k)?;
            let dev = (0..a.points)
                .map(|_| {
                    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..=10.0)).collect();
                    let exact: f64 = x.iter().zip(&alpha).map(|(v, e)| v.powi(*e as i32)).product();
                    (p.eval(&x) - exact).abs() / exact.abs().max(1.0)
                })
                .fold(0.0, f64::max);
            rows.push(("product".to_string(), d, alpha, dev));
        }
    }
    let ok = rows.iter().all(|r| r.3 <= 1e-10);
    let text = match fmt {
        Format::Csv => {
            let mut out = String::from("form,d,alpha,max_rel_deviation,pass\n");
            for (form, d, alpha, dev) in &rows {
                let tag: Vec<String> = alpha.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!("{form},{d},{},{},{}\n", tag.join(" "), num(*dev), (*dev <= 1e-10) as u8));
            }
            out
        }
        Format::Json => json_text(&json!({
            "k": a.k,
            "points": a.points,
            "pass": ok,
            "rows": rows.iter().map(|(f, d, al, dev)| json!({"form": f, "d": d, "alpha": al, "max_rel_deviation": dev})).collect::<Vec<_>>(),
        }))?,
    };
    let mut o = Outcome::ok(text);
    o.ok = ok;
    if !ok {
        o.notes.push("a monomial identity exceeded 1e-10 relative deviation".into());
    }
    Ok(o)
}

fn sphere(a: &SphereArgs, fmt: Format) -> Result<Outcome> {
    let pool = a.pool.unwrap_or_else(|| default_pool(a.m));
    let mut net = greedy_net(a.d, a.m, pool, a.common.seed)?;
    net.cover_rad = Some(covering_radius(&net, a.probes, a.common.seed.wrapping_add(1))?);
    let mut o = Outcome::ok(match fmt {
        Format::Csv => net.to_csv(),
        Format::Json => json_text(&json!({
            "d": net.dim, "m": net.len(), "min_sep": net.min_sep, "cover_rad": net.cover_rad, "points": net.points,
        }))?,
    });
    o.notes.push(format!("min_sep {} cover_rad {}", num(net.min_sep), num(net.cover_rad.unwrap_or(f64::NAN))));
    Ok(o)
}

fn subsample(a: &SubsampleArgs, fmt: Format) -> Result<Outcome> {
    let terms: Vec<Vec<f64>> = random_terms(a.terms, a.monomials, a.common.seed)
        .into_iter()
        .map(|t| t.into_iter().map(|v| v * a.bound).collect())
        .collect();
    let r = maurey_subsample(&terms, a.n, a.restarts, a.common.seed, a.bound, 1.0)?;
    let mut o = Outcome::ok(match fmt {
        Format::Csv => r.to_csv(),
        Format::Json => json_text(&serde_json::to_value(&r)?)?,
    });
    o.notes.push(format!(
        "best deviation {} (restart {}), hoeffding {}, accepted {}",
        num(r.deviation),
        r.best_restart,
        num(r.hoeffding),
        r.accepted
    ));
    Ok(o)
}

fn packing(a: &PackingArgs, fmt: Format) -> Result<Outcome> {
    let (kind, k_or_s) = match a.kind {
        KindArg::Relu => (PackingKind::Relu, a.k as f64),
        KindArg::Fourier => (PackingKind::Fourier, a.s),
    };
    let norm = match a.norm.unwrap_or(if kind == PackingKind::Relu { NormArg::Witness } else { NormArg::L2 }) {
        NormArg::Witness => SeparationNorm::Witness,
        NormArg::L2 => SeparationNorm::L2,
    };
    let fam = build_packing(kind, a.d, k_or_s, a.n, a.common.seed)?;
    let rep = pairwise_separation(&fam, norm, a.pair_budget, a.common.seed)?;
    let mut o = Outcome::ok(match fmt {
        Format::Csv => rep.to_csv(),
        Format::Json => json_text(&json!({
            "kind": kind, "d": fam.dim, "m": fam.m, "R": fam.radius, "delta": fam.delta,
            "members": fam.len(), "report": rep,
        }))?,
    });
    o.notes.push(format!(
        "m {} R {} min distance {} main-term prediction {} max |cross| {}",
        fam.m,
        num(fam.radius),
        num(rep.min_distance),
        num(rep.main_term_prediction),
        num(rep.max_cross)
    ));
    if rep.max_identity_residual > 1e-9 {
        o.ok = false;
        o.notes.push(format!("main + cross != total: residual {}", rep.max_identity_residual));
    }
    Ok(o)
}

fn dyadic(a: &DyadicArgs, fmt: Format) -> Result<Outcome> {
    if a.xi_max < 1 {
        return Err(Error::Domain {
            param: "xi_max",
            reason: "need xi_max >= 1".into(),
        });
    }
    let fs = harmonic_spectrum(a.xi_max)?;
    let dec = dyadic_blocks(&fs, a.levels)?;
    let exact = dec.reconstruct()? == fs;
    let total = crate::barron::hm_norm_exact(&fs, 0);
    let pyth = (residual_tail_norm(&dec, 0) - total).abs() <= 1e-12 * total.max(1.0);
    let mut o = Outcome::ok(match fmt {
        Format::Csv => dec.to_csv(),
        Format::Json => json_text(&json!({
            "levels": a.levels,
            "xi_max": a.xi_max,
            "blocks": (0..=a.levels).map(|k| json!({"level": k, "norm": dec.block_norm(k), "residual": residual_tail_norm(&dec, k)})).collect::<Vec<_>>(),
        }))?,
    });
    if !(exact && pyth) {
        o.ok = false;
        o.notes.push("block reconstruction or norm identity failed".into());
    }
    Ok(o)
}

fn gap(a: &GapArgs, fmt: Format) -> Result<Outcome> {
    let reps = a
        .omega0
        .iter()
        .map(|w| highfreq_gap(a.alpha, *w, a.units, a.candidates, a.common.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome::ok(match fmt {
        Format::Json => json_text(&serde_json::to_value(&reps)?)?,
        Format::Csv => {
            let mut out = String::from("omega0,n_units,candidates,best_error,scaled_error\n");
            for r in &reps {
                out.push_str(&format!("{},{},{},{},{}\n", num(r.omega0), r.n_units, r.candidates, num(r.best_error), num(r.scaled_error)));
            }
            out
        }
    }))
}

fn tail(a: &TailArgs, fmt: Format) -> Result<Outcome> {
    let t = heavy_tail_mass(a.m, a.a, &QuadratureSpec::composite(a.order, a.panels))?;
    let mut o = Outcome::ok(match fmt {
        Format::Json => t.to_json()? + "\n",
        Format::Csv => format!(
            "m,A,Z,lambda_tail,closed_form_bound\n{},{},{},{},{}\n",
            t.m,
            num(t.a),
            num(t.z),
            num(t.lambda_tail),
            num(t.closed_form_bound)
        ),
    });
    o.notes.push(format!("omega cutoff {} with truncation bound {:e}", t.cutoff, t.truncation_bound));
    Ok(o)
}

/// `width` random dictionary units on the unit square with unit l1 mass.
fn random_unit_network(d: usize, k: u32, width: usize, bias_cap: f64, seed: u64) -> Result<ReluNetwork> {
    let dirs = crate::sphere_geom::sample_sphere(d, width, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB1A5);
    let raw: Vec<f64> = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mass: f64 = raw.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let units = dirs
        .into_iter()
        .zip(&raw)
        .map(|(w, c)| ReluUnit::new(Complex64::new(c / mass, 0.0), w, rng.random_range(-bias_cap..=bias_cap), k))
        .collect();
    ReluNetwork::new(k, d, units)
}

fn witness(a: &WitnessArgs, fmt: Format) -> Result<Outcome> {
    let w = oscillatory_witness(a.n, a.k, a.d, a.m)?;
    let mut freq = vec![0.0; a.d];
    freq[0] = w.frequency;
    let closed = plane_wave_hm_norm(&freq, a.m);
    let net = random_unit_network(a.d, a.k.max(a.m + 1), a.width, a.bias_cap, a.common.seed)?;
    let cert = network_hm_upper(&net, &AxisBox::unit(a.d), a.m, a.bias_cap, &QuadratureSpec::default_for_dim(a.d))?;
    let v = json!({
        "n": a.n, "k": a.k, "d": a.d, "m": a.m,
        "K": w.frequency,
        "norm": w.norm,
        "closed_form": closed,
        "predicted_growth": w.predicted_growth,
        "network_width": a.width,
        "network_bound": cert.bound,
        "gap_lower_bound": w.norm - cert.bound,
    });
    let mut o = Outcome::ok(match fmt {
        Format::Json => json_text(&v)?,
        Format::Csv => format!(
            "n,K,norm,closed_form,predicted_growth,network_bound\n{},{},{},{},{},{}\n",
            a.n,
            num(w.frequency),
            num(w.norm),
            num(closed),
            num(w.predicted_growth),
            num(cert.bound)
        ),
    });
    if (w.norm - closed).abs() > 1e-9 * closed.max(1.0) {
        o.ok = false;
        o.notes.push("witness norm differs from the closed form".into());
    }
    Ok(o)
}

fn rates(a: &RatesArgs, fmt: Format) -> Result<Outcome> {
    let mut p = ExperimentParams::for_kind(a.kind);
    if let Some(v) = a.d {
        p.d = v;
    }
    if let Some(v) = a.ks {
        p.ks = v;
    }
    if let Some(v) = a.m {
        p.m = v;
    }
    if let Some(v) = a.k {
        p.k = v;
    }
    if let Some(v) = a.ell {
        p.ell = v;
    }
    if let Some(v) = a.xi_max {
        p.xi_max = v;
    }
    if let Some(v) = a.tol {
        p.tolerance = v;
    }
    let grid = a.n_grid.clone().map(|g| g.0).unwrap_or_else(|| default_grid(a.kind));
    let rep = run_experiment(a.kind, &p, &grid, a.common.seed, a.timing)?;
    let mut o = Outcome::ok(match fmt {
        Format::Json => rep.to_json()? + "\n",
        Format::Csv => rep.to_csv(),
    });
    o.notes.push(format!(
        "{}: slope {} predicted {} verdict {:?}",
        a.kind,
        rep.fit.map(|f| num(f.slope)).unwrap_or_else(|| "n/a".into()),
        num(rep.predicted),
        rep.verdict
    ));
    if let Some(e) = &rep.error {
        o.notes.push(format!("partial run: {e}"));
    }
    o.ok = rep.verdict != Verdict::BoundViolated;
    Ok(o)
}

fn dispatch(cmd: &Command, fmt: Format) -> Result<Outcome> {
    match cmd {
        Command::Exponents(a) => exponents(a, fmt),
        Command::GreedyFourier(a) => greedy(a, fmt),
        Command::ReluCompile(a) => compile(a, fmt),
        Command::MonomialCheck(a) => monomials(a, fmt),
        Command::SphereNet(a) => sphere(a, fmt),
        Command::Subsample(a) => subsample(a, fmt),
        Command::Packing(a) => packing(a, fmt),
        Command::Dyadic(a) => dyadic(a, fmt),
        Command::GapProbe(a) => gap(a, fmt),
        Command::TailMass(a) => tail(a, fmt),
        Command::Witness(a) => witness(a, fmt),
        Command::Rates(a) => rates(a, fmt),
    }
}

/// Parse `argv` (including the program name), run the subcommand and
/// return the process exit code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    let common = common_of(&cli.command);
    if common.list {
        let _ = writeln!(out, "{}", listing(&cli.command));
        return 0;
    }
    let fmt = common.format.unwrap_or_else(|| default_format(&cli.command));
    match dispatch(&cli.command, fmt) {
        Ok(o) => {
            for n in &o.notes {
                let _ = writeln!(err, "{n}");
            }
            let written = match &common.out {
                Some(path) => std::fs::write(path, &o.text).map_err(Error::from),
                None => out.write_all(o.text.as_bytes()).map_err(Error::from),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e}");
                return 1;
            }
            if o.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_precondition() {
                2
            } else {
                1
            }
        }
    }
}
