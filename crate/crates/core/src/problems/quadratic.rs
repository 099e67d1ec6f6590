//! `phi(u) = u + u^2` on the periodic lattice scale. The simplest genuinely
//! nonlinear instance: the linearisation `h + 2uh` is an identity plus a
//! small multiplication operator, invertible on a fixed ball.

use num_complex::Complex64;

use crate::conv::{pointwise_product, FixedConvolver};
use crate::error::Result;
use crate::hypotheses::IterationParams;
use crate::scale::{Lattice, SpectralFunction};
use crate::solve::{solve_linear, SolveOptions};

use super::{ensure_same_lattice, ProblemMetadata, TameProblem};

pub struct QuadraticProblem {
    lattice: Lattice,
    meta: ProblemMetadata,
    solve_opts: SolveOptions,
}

/// Construct the instance; the trust radius 0.25 keeps `I + 2 Conv(v)`
/// uniformly invertible (the multiplier stays below 1 in operator norm).
pub fn quadratic_problem(lattice: Lattice) -> Result<QuadraticProblem> {
    let suggested = IterationParams {
        a0: 0.0,
        mu: 0.0,
        a1: 1.0,
        a2: 9.0,
        alpha: 4.0,
        beta: 4.0,
        gamma: Some(2.0),
        ..IterationParams::default()
    };
    let meta = ProblemMetadata {
        mu: 0.0,
        a0: if lattice.dim == 1 { 1.0 } else { 2.0 },
        loss: 0.0,
        delta1: 0.25,
        suggested,
    };
    Ok(QuadraticProblem { lattice, meta, solve_opts: SolveOptions::default() })
}

impl QuadraticProblem {
    #[cfg(test)]
    pub(crate) fn with_solve_opts(mut self, opts: SolveOptions) -> Self {
        self.solve_opts = opts;
        self
    }
}

impl TameProblem for QuadraticProblem {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn lattice(&self) -> Lattice {
        self.lattice
    }

    fn metadata(&self) -> &ProblemMetadata {
        &self.meta
    }

    fn phi(&self, u: &SpectralFunction) -> Result<SpectralFunction> {
        ensure_same_lattice(u.lattice(), self.lattice)?;
        let sq = pointwise_product(u, u)?;
        u.add(&sq)
    }

    fn dphi(&self, u: &SpectralFunction, h: &SpectralFunction) -> Result<SpectralFunction> {
        ensure_same_lattice(u.lattice(), self.lattice)?;
        ensure_same_lattice(h.lattice(), self.lattice)?;
        let cross = pointwise_product(u, h)?;
        h.add(&cross.scale(Complex64::new(2.0, 0.0)))
    }

    fn d2phi(
        &self,
        _u: &SpectralFunction,
        h: &SpectralFunction,
        w: &SpectralFunction,
    ) -> Result<SpectralFunction> {
        ensure_same_lattice(h.lattice(), self.lattice)?;
        ensure_same_lattice(w.lattice(), self.lattice)?;
        Ok(pointwise_product(h, w)?.scale(Complex64::new(2.0, 0.0)))
    }

    fn psi(&self, v: &SpectralFunction, g: &SpectralFunction) -> Result<SpectralFunction> {
        ensure_same_lattice(v.lattice(), self.lattice)?;
        ensure_same_lattice(g.lattice(), self.lattice)?;
        let factor = v.scale(Complex64::new(2.0, 0.0));
        let conv = FixedConvolver::new(&factor, self.lattice)?;
        let diag = vec![Complex64::ONE; self.lattice.len()];
        let op = crate::solve::LatticeOperator::new(self.lattice, diag, Some(conv))?;
        let (coeffs, _report) = solve_linear(&op, g.coeffs(), &self.solve_opts)?;
        let mut h = SpectralFunction::from_coeffs(self.lattice, coeffs, false)?;
        if v.real_valued() && g.real_valued() {
            h.hermitize();
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{fd_check_d2phi, fd_check_dphi, right_inverse_defect};
    use crate::sample::{normalize_to, random_function};
    use crate::scale::nx;

    #[test]
    fn derivatives_match_finite_differences_exactly() {
        // phi is quadratic, so the central difference has no truncation
        // error at all; only rounding remains.
        let lattice = Lattice::new(1, 16).unwrap();
        let p = quadratic_problem(lattice).unwrap();
        let mut u = random_function(lattice, 2.0, 1);
        normalize_to(&mut u, nx(1.0), 0.1).unwrap();
        let h = random_function(lattice, 2.0, 2);
        let w = random_function(lattice, 2.0, 3);
        assert!(fd_check_dphi(&p, &u, &h, 1e-5).unwrap() < 1e-9);
        assert!(fd_check_d2phi(&p, &u, &h, &w, 1e-5).unwrap() < 1e-9);
    }

    #[test]
    fn right_inverse_is_exact_inside_the_ball() {
        let lattice = Lattice::new(1, 24).unwrap();
        let p = quadratic_problem(lattice).unwrap();
        let mut v = random_function(lattice, 2.0, 5);
        normalize_to(&mut v, nx(1.0), 0.2).unwrap();
        let g = random_function(lattice, 2.0, 6);
        assert!(right_inverse_defect(&p, &v, &g).unwrap() < 1e-10);
    }

    #[test]
    fn right_inverse_agrees_between_dense_and_iterative_backends() {
        let lattice = Lattice::new(1, 20).unwrap();
        let mut v = random_function(lattice, 2.0, 9);
        normalize_to(&mut v, nx(1.0), 0.2).unwrap();
        let g = random_function(lattice, 2.0, 10);

        let dense = quadratic_problem(lattice)
            .unwrap()
            .with_solve_opts(SolveOptions { dense_cap: 4096, ..SolveOptions::default() });
        let iter = quadratic_problem(lattice)
            .unwrap()
            .with_solve_opts(SolveOptions { dense_cap: 0, ..SolveOptions::default() });
        let hd = dense.psi(&v, &g).unwrap();
        let hi = iter.psi(&v, &g).unwrap();
        let diff = hd.sub(&hi).unwrap().sobolev_norm(nx(0.0));
        assert!(diff < 1e-9 * g.sobolev_norm(nx(0.0)).max(1.0));
    }

    #[test]
    fn constant_data_reproduces_the_scalar_root() {
        // For constant g the solution of u + u^2 = g is the scalar root
        // (-1 + sqrt(1 + 4g)) / 2 placed on the zero mode.
        let lattice = Lattice::new(1, 8).unwrap();
        let p = quadratic_problem(lattice).unwrap();
        let g = 0.01_f64;
        let root = (-1.0 + (1.0 + 4.0 * g).sqrt()) / 2.0;
        let u = SpectralFunction::constant(lattice, Complex64::new(root, 0.0));
        let out = p.phi(&u).unwrap();
        let expect = SpectralFunction::constant(lattice, Complex64::new(g, 0.0));
        let err = out.sub(&expect).unwrap().sobolev_norm(nx(0.0));
        assert!(err < 1e-15);
    }
}
