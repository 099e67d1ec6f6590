use thiserror::Error;

use crate::hypotheses::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("lattice mismatch: nmax {left} vs {right}")]
    LatticeMismatch { left: i64, right: i64 },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("Sobolev exponent must be finite and >= 0, got {0}")]
    InvalidExponent(f64),

    #[error("mode ({0}, {1}) outside the lattice")]
    ModeOutsideLattice(i64, i64),

    #[error("coefficients violate the real-valued symmetry u(-k) = conj(u(k))")]
    NotHermitian,

    #[error("invalid smoothing velocity: {0}")]
    InvalidVelocity(String),

    #[error("empty test set")]
    EmptyTestSet,

    #[error("exponent pair must be distinct (a = {0}, b = {1})")]
    DegenerateExponentPair(f64, f64),

    #[error("velocity fit needs b > a + 1, got a = {a}, b = {b}")]
    InvalidFitExponents { a: f64, b: f64 },

    #[error("fit window too short: need at least {need} points, got {got}")]
    FitWindowTooShort { need: usize, got: usize },

    #[error("no admissible gamma: 2*alpha - 2*a1 - beta = {0} is not positive")]
    NoAdmissibleGamma(f64),

    #[error("parameter hypotheses violated:\n{}", crate::hypotheses::render_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("invalid constant table: {0}")]
    InvalidTameTable(String),

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    #[error("divergence detected at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("invalid problem setup: {0}")]
    ProblemSetup(String),

    #[error("invalid counterexample setup: {0}")]
    CounterexampleSetup(String),

    #[error("zero function cannot be normalized")]
    ZeroNormalization,

    #[error("serialization failed: {0}")]
    Serialization(String),
}
