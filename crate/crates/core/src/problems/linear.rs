//! Diagonal (Fourier multiplier) problems. These are linear, so the scheme
//! must reproduce the exact solve `u = L^{-1} g` and every quadratic error
//! term must vanish; useful as a calibration instance.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::fit_log2;
use crate::hypotheses::IterationParams;
use crate::scale::{Lattice, SpectralFunction};

use super::{ProblemMetadata, TameProblem};

pub struct LinearMultiplierProblem {
    lattice: Lattice,
    symbol: Vec<Complex64>,
    /// Whether the symbol satisfies the reality symmetry `m(-k) = conj(m(k))`.
    symmetric: bool,
    meta: ProblemMetadata,
}

fn suggested_for_loss(loss: f64) -> IterationParams {
    IterationParams {
        a0: 0.0,
        mu: 0.0,
        a1: loss + 1.0,
        a2: loss + 8.0,
        alpha: loss + 4.0,
        beta: 4.0,
        gamma: Some(2.0),
        ..IterationParams::default()
    }
}

/// Problem `phi(u) = L u` with `L` the multiplier `symbol(k)`; errors if the
/// symbol vanishes or is not finite anywhere on the lattice.
pub fn linear_multiplier_problem(
    lattice: Lattice,
    symbol: impl Fn([i64; 2]) -> Complex64,
) -> Result<LinearMultiplierProblem> {
    let mut values = Vec::with_capacity(lattice.len());
    for k in lattice.points() {
        let m = symbol(k);
        if !m.re.is_finite() || !m.im.is_finite() {
            return Err(Error::ProblemSetup(format!(
                "multiplier is not finite at mode ({}, {})",
                k[0], k[1]
            )));
        }
        if m.norm() == 0.0 {
            return Err(Error::ProblemSetup(format!(
                "multiplier vanishes at mode ({}, {}); the linearisation is not invertible",
                k[0], k[1]
            )));
        }
        values.push(m);
    }

    let symmetric = lattice.points().all(|k| {
        let i = lattice.index(k).unwrap();
        let j = lattice.index([-k[0], -k[1]]).unwrap();
        (values[i] - values[j].conj()).norm() <= 1e-14 * values[i].norm()
    });

    // Growth order of the symbol, from a log-log fit over nonzero modes;
    // this is the regularity the inverse loses.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in lattice.points() {
        if k == [0, 0] {
            continue;
        }
        let i = lattice.index(k).unwrap();
        xs.push((1.0 + Lattice::k_sq(k)).sqrt());
        ys.push(values[i].norm().log2());
    }
    let loss = match fit_log2(&xs, &ys) {
        Ok(fit) => fit.slope.max(0.0),
        Err(_) => 0.0,
    };

    let meta = ProblemMetadata {
        mu: 0.0,
        a0: if lattice.dim == 1 { 1.0 } else { 2.0 },
        loss,
        delta1: f64::MAX,
        suggested: suggested_for_loss(loss.round()),
    };
    Ok(LinearMultiplierProblem { lattice, symbol: values, symmetric, meta })
}

/// `phi(u) = <D>^p u`, the multiplier `(1 + |k|^2)^{p/2}`.
pub fn power_multiplier_problem(lattice: Lattice, p: f64) -> Result<LinearMultiplierProblem> {
    linear_multiplier_problem(lattice, |k| {
        Complex64::new(Lattice::weight(k, p / 2.0), 0.0)
    })
}

impl LinearMultiplierProblem {
    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    fn multiply(&self, u: &SpectralFunction, invert: bool) -> Result<SpectralFunction> {
        super::ensure_same_lattice(u.lattice(), self.lattice)?;
        let coeffs = u
            .coeffs()
            .iter()
            .zip(&self.symbol)
            .map(|(&c, &m)| if invert { c / m } else { c * m })
            .collect();
        SpectralFunction::from_coeffs(self.lattice, coeffs, u.real_valued() && self.symmetric)
    }
}

impl TameProblem for LinearMultiplierProblem {
    fn name(&self) -> &'static str {
        "linear-multiplier"
    }

    fn lattice(&self) -> Lattice {
        self.lattice
    }

    fn metadata(&self) -> &ProblemMetadata {
        &self.meta
    }

    fn phi(&self, u: &SpectralFunction) -> Result<SpectralFunction> {
        self.multiply(u, false)
    }

    fn dphi(&self, _u: &SpectralFunction, h: &SpectralFunction) -> Result<SpectralFunction> {
        self.multiply(h, false)
    }

    fn d2phi(
        &self,
        _u: &SpectralFunction,
        _h: &SpectralFunction,
        _w: &SpectralFunction,
    ) -> Result<SpectralFunction> {
        Ok(SpectralFunction::zero(self.lattice))
    }

    fn psi(&self, _v: &SpectralFunction, g: &SpectralFunction) -> Result<SpectralFunction> {
        self.multiply(g, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::nx;

    #[test]
    fn cubic_power_round_trips_and_measures_its_loss() {
        let lattice = Lattice::new(1, 32).unwrap();
        let p = power_multiplier_problem(lattice, 3.0).unwrap();
        assert!((p.metadata().loss - 3.0).abs() < 1e-6);
        assert_eq!(p.metadata().suggested.a1, 4.0);

        let g = crate::sample::random_function(lattice, 3.0, 11);
        let u = p.psi(&SpectralFunction::zero(lattice), &g).unwrap();
        let back = p.phi(&u).unwrap();
        let err = back.sub(&g).unwrap().sobolev_norm(nx(0.0));
        assert!(err <= 1e-12 * g.sobolev_norm(nx(0.0)));
        assert!(u.real_valued());
    }

    #[test]
    fn vanishing_symbol_is_rejected() {
        let lattice = Lattice::new(1, 4).unwrap();
        let r = linear_multiplier_problem(lattice, |k| Complex64::new(k[0] as f64, 0.0));
        assert!(matches!(r, Err(Error::ProblemSetup(_))));
    }

    #[test]
    fn second_derivative_vanishes() {
        let lattice = Lattice::new(1, 8).unwrap();
        let p = power_multiplier_problem(lattice, 2.0).unwrap();
        let h = crate::sample::random_function(lattice, 2.0, 3);
        let out = p.d2phi(&h, &h, &h).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }
}
