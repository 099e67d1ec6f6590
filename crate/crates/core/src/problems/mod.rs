//! Problem instances behind a single interface: a nonlinear map between
//! lattice scales together with its first two derivatives and an exact right
//! inverse of the linearisation at nearby points.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypotheses::IterationParams;
use crate::sample::{normalize_to, random_function};
use crate::scale::{nx, Lattice, SpectralFunction};

pub mod counterexample;
mod linear;
mod quadratic;
mod small_divisor;
mod transport;

pub use linear::{linear_multiplier_problem, power_multiplier_problem, LinearMultiplierProblem};
pub use quadratic::{quadratic_problem, QuadraticProblem};
pub use small_divisor::{golden_mean_frequencies, small_divisor_problem, SmallDivisorProblem};
pub use transport::{transport_problem, TransportProblem};

/// Structural data every instance reports about itself.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemMetadata {
    /// Derivative loss of the second differential.
    pub mu: f64,
    /// Low exponent at which the tame product estimates are anchored
    /// (above d/2, so the scale is an algebra there).
    pub a0: f64,
    /// Derivative loss of the right inverse: `loss = t` means inverting the
    /// linearisation costs about `t` orders of regularity.
    pub loss: f64,
    /// Radius of the ball around the origin on which the right inverse is
    /// guaranteed; steps outside it are flagged by the iteration.
    pub delta1: f64,
    /// Exponent layout known to work for this instance.
    pub suggested: IterationParams,
}

/// A nonlinear problem `phi` on a fixed lattice, with derivatives and an
/// approximate-inverse family indexed by the linearisation point.
pub trait TameProblem {
    fn name(&self) -> &'static str;

    fn lattice(&self) -> Lattice;

    fn metadata(&self) -> &ProblemMetadata;

    /// The nonlinear map itself.
    fn phi(&self, u: &SpectralFunction) -> Result<SpectralFunction>;

    /// Differential at `u` applied to `h`.
    fn dphi(&self, u: &SpectralFunction, h: &SpectralFunction) -> Result<SpectralFunction>;

    /// Second differential at `u` applied to the pair `(h, w)`.
    fn d2phi(
        &self,
        u: &SpectralFunction,
        h: &SpectralFunction,
        w: &SpectralFunction,
    ) -> Result<SpectralFunction>;

    /// Right inverse of `dphi(v, .)`: returns `h` with `dphi(v, h) = g`.
    fn psi(&self, v: &SpectralFunction, g: &SpectralFunction) -> Result<SpectralFunction>;
}

pub(crate) fn ensure_same_lattice(a: Lattice, b: Lattice) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { left: a.dim, right: b.dim });
    }
    if a.nmax != b.nmax {
        return Err(Error::LatticeMismatch { left: a.nmax, right: b.nmax });
    }
    Ok(())
}

fn rel_err_0(got: &SpectralFunction, want: &SpectralFunction) -> Result<f64> {
    let diff = got.sub(want)?;
    let denom = want.sobolev_norm(nx(0.0)).max(f64::MIN_POSITIVE);
    Ok(diff.sobolev_norm(nx(0.0)) / denom)
}

/// Relative error of a central finite difference of `phi` against `dphi`.
pub fn fd_check_dphi(
    problem: &dyn TameProblem,
    u: &SpectralFunction,
    h: &SpectralFunction,
    eps: f64,
) -> Result<f64> {
    let step = h.scale((eps).into());
    let plus = problem.phi(&u.add(&step)?)?;
    let minus = problem.phi(&u.sub(&step)?)?;
    let fd = plus.sub(&minus)?.scale((0.5 / eps).into());
    let exact = problem.dphi(u, h)?;
    rel_err_0(&fd, &exact)
}

/// Relative error of a central finite difference of `dphi(., h)` along `w`
/// against `d2phi`.
pub fn fd_check_d2phi(
    problem: &dyn TameProblem,
    u: &SpectralFunction,
    h: &SpectralFunction,
    w: &SpectralFunction,
    eps: f64,
) -> Result<f64> {
    let step = w.scale((eps).into());
    let plus = problem.dphi(&u.add(&step)?, h)?;
    let minus = problem.dphi(&u.sub(&step)?, h)?;
    let fd = plus.sub(&minus)?.scale((0.5 / eps).into());
    let exact = problem.d2phi(u, h, w)?;
    rel_err_0(&fd, &exact)
}

/// `|dphi(v, psi(v, g)) - g| / |g|` at exponent 0.
pub fn right_inverse_defect(
    problem: &dyn TameProblem,
    v: &SpectralFunction,
    g: &SpectralFunction,
) -> Result<f64> {
    let h = problem.psi(v, g)?;
    let back = problem.dphi(v, &h)?;
    rel_err_0(&back, g)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformanceRow {
    pub input: usize,
    pub dphi_rel_err: f64,
    pub d2phi_rel_err: f64,
    pub right_inverse_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformanceReport {
    pub problem: String,
    pub eps: f64,
    pub rows: Vec<ConformanceRow>,
    pub max_dphi_rel_err: f64,
    pub max_d2phi_rel_err: f64,
    pub max_right_inverse_defect: f64,
}

/// Run the derivative and right-inverse checks on `inputs` seeded random
/// functions. Linearisation points are kept inside half the instance's
/// trust radius; directions have unit norm at a mid exponent.
pub fn conformance_suite(
    problem: &dyn TameProblem,
    inputs: usize,
    seed: u64,
) -> Result<ConformanceReport> {
    if inputs == 0 {
        return Err(Error::EmptyTestSet);
    }
    let lattice = problem.lattice();
    let meta = problem.metadata();
    let decay = meta.a0 + 2.0;
    let eps = 1e-5;
    let mut rows = Vec::with_capacity(inputs);
    for i in 0..inputs {
        let base = seed.wrapping_add(1 + 3 * i as u64);
        let mut u = random_function(lattice, decay, base);
        normalize_to(&mut u, nx(meta.suggested.a1), (0.5 * meta.delta1).min(1.0))?;
        let mut h = random_function(lattice, decay, base + 1);
        normalize_to(&mut h, nx(meta.a0), 1.0)?;
        let mut w = random_function(lattice, decay, base + 2);
        normalize_to(&mut w, nx(meta.a0), 1.0)?;

        let dphi_rel_err = fd_check_dphi(problem, &u, &h, eps)?;
        let d2phi_rel_err = fd_check_d2phi(problem, &u, &h, &w, eps)?;
        let right_inverse_defect = right_inverse_defect(problem, &u, &h)?;
        rows.push(ConformanceRow { input: i, dphi_rel_err, d2phi_rel_err, right_inverse_defect });
    }
    let max_dphi_rel_err = rows.iter().map(|r| r.dphi_rel_err).fold(0.0, f64::max);
    let max_d2phi_rel_err = rows.iter().map(|r| r.d2phi_rel_err).fold(0.0, f64::max);
    let max_right_inverse_defect =
        rows.iter().map(|r| r.right_inverse_defect).fold(0.0, f64::max);
    Ok(ConformanceReport {
        problem: problem.name().to_string(),
        eps,
        rows,
        max_dphi_rel_err,
        max_d2phi_rel_err,
        max_right_inverse_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conformance_rejects_empty_input_set() {
        let p = quadratic_problem(Lattice::new(1, 8).unwrap()).unwrap();
        assert!(matches!(conformance_suite(&p, 0, 7), Err(Error::EmptyTestSet)));
    }
}
