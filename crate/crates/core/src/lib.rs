//! Constructive approximation by shallow networks.
//!
//! The crate builds explicit approximants and witnesses and measures their
//! errors:
//!
//! * [`barron`]: lattice Fourier expansions, bump/cutoff periodization and
//!   weighted spectral norms.
//! * [`greedy_fourier`]: n-term truncation of lattice expansions with exact
//!   Sobolev tail errors, plus closed-form rate exponents.
//! * [`relu_nets`]: ReLU^k units, exact monomial networks, local Taylor
//!   pieces and a cube-partition compiler for smooth targets.
//! * [`sphere_geom`]: greedy nets and separated sets on the unit sphere.
//! * [`subsample`]: bias truncation of atomic measures and best-of-restarts
//!   empirical subsampling.
//! * [`lower_bounds`]: witness functions, dyadic blocks and packing families.
//! * [`rates`]: the sweep harness that fits log-log slopes and renders
//!   verdicts.
//! * [`cli`]: the `shallow-approx` command line.
//!
//! ```
//! use shallow_approx::greedy_fourier::rate_exponents;
//!
//! let t = rate_exponents(0.5, 0.0, 1, 2).unwrap();
//! assert_eq!(t.saturation_smoothness, 5.0);
//! assert_eq!(t.relu_rate, 0.5);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barron;
pub mod cli;
pub mod error;
pub mod greedy_fourier;
pub mod lower_bounds;
pub mod numerics;
pub mod rates;
pub mod relu_nets;
pub mod sphere_geom;
pub mod subsample;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
    #[doc = include_str!("../../../book/src/lattice-fourier.md")]
    mod lattice_fourier {}
    #[doc = include_str!("../../../book/src/greedy.md")]
    mod greedy {}
    #[doc = include_str!("../../../book/src/relu.md")]
    mod relu {}
    #[doc = include_str!("../../../book/src/sphere.md")]
    mod sphere {}
    #[doc = include_str!("../../../book/src/subsample.md")]
    mod subsample {}
    #[doc = include_str!("../../../book/src/witnesses.md")]
    mod witnesses {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
