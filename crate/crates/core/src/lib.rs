//! Nash–Moser–Hörmander iteration on truncated periodic Fourier scales.
//!
//! Everything lives on the lattice `|k|_inf <= nmax` of Fourier modes of the
//! torus `T^d` (`d = 1, 2`); the Sobolev scale is realised by the weighted
//! coefficient norms `||u||_a^2 = sum_k |u_k|^2 (1 + |k|^2)^a`. On top of the
//! scale sit dyadic (and generalised-velocity) smoothing operators, the
//! constants ledger of the abstract implicit-function theorem, the iteration
//! itself, and a handful of concrete problem instances that are cheap enough
//! to run to machine precision.
//!
//! The crate is a measurement instrument as much as a solver: smoothing-axiom
//! constants, decomposition constants and the iteration's a-priori bounds are
//! all *measured over discrete test sets* rather than assumed, so every bound
//! the theory predicts can be checked against what the lattice actually does.

pub mod conv;
pub mod error;
pub mod fit;
pub mod hypotheses;
pub mod iteration;
pub mod problems;
pub mod report;
pub mod sample;
pub mod scale;
pub mod smoothing;
pub(crate) mod solve;

pub use error::{Error, Result};
pub use scale::{nx, Lattice, NormExponent, SpectralFunction};
pub use smoothing::{CutoffShape, SmoothingFamily, Velocity};
