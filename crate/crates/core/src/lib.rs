//! Ortho-martingale approximation of stationary random fields on `Z^d`
//! driven by i.i.d. centered innovations.
//!
//! The crate represents every field functional exactly as a combination of
//! multilinear innovation monomials ([`algebra`]), builds linear and
//! Volterra field models ([`models`]), evaluates the projective criteria
//! for mean-square approximation by an ortho-martingale ([`criteria`]), and
//! checks the approximation and the resulting central limit theorem by
//! simulation ([`montecarlo`]). [`oracle`] is an independent brute-force
//! reference for the algebra; [`cli`] drives experiments from a config file.

pub mod algebra;
pub mod cli;
pub mod criteria;
pub mod error;
pub mod index;
pub mod kernel_file;
pub mod models;
pub mod montecarlo;
pub mod oracle;
pub mod prefix;
pub mod rng;

pub use algebra::{Expansion, Monomial};
pub use error::{Error, Result};
pub use index::{IndexBox, MultiIndex, Rectangle};
pub use models::{FieldModel, InnovationLaw, Kernel, LawKind, LinearKernel, VolterraKernel};
