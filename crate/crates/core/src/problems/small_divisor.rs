//! `phi(u) = D u + u^2` on the two-dimensional lattice, where `D` is the
//! directional derivative with frequency vector `omega`: its symbol
//! `i (omega . k)` comes arbitrarily close to zero along resonant modes, so
//! the inverse of the linearisation loses regularity instead of being
//! bounded. With the golden-mean frequency the loss is one order: the
//! divisor floor `min |omega . k| |k|` stays bounded away from zero.

use num_complex::Complex64;

use crate::conv::{pointwise_product, FixedConvolver};
use crate::error::{Error, Result};
use crate::hypotheses::IterationParams;
use crate::sample::{normalize_to, random_function};
use crate::scale::{nx, Lattice, SpectralFunction};
use crate::solve::{solve_linear, LatticeOperator, SolveOptions};

use super::{ensure_same_lattice, right_inverse_defect, ProblemMetadata, TameProblem};

/// `(1, (sqrt 5 - 1) / 2)`: the classic badly-approximable pair.
pub fn golden_mean_frequencies() -> [f64; 2] {
    [1.0, (5.0_f64.sqrt() - 1.0) / 2.0]
}

pub struct SmallDivisorProblem {
    lattice: Lattice,
    omega: [f64; 2],
    /// Symbol of `D` on the lattice; the zero mode carries `d0`.
    symbol: Vec<Complex64>,
    divisor_floor: f64,
    min_divisor: f64,
    worst_mode: [i64; 2],
    condition_estimate: f64,
    meta: ProblemMetadata,
    solve_opts: SolveOptions,
}

/// Symbol of the directional derivative `i (omega . k)` with `d0` on the
/// zero mode, plus the divisor statistics gathered while building it.
pub(super) struct DirectionalSymbol {
    pub symbol: Vec<Complex64>,
    pub divisor_floor: f64,
    pub min_divisor: f64,
    pub max_divisor: f64,
    pub worst_mode: [i64; 2],
}

pub(super) fn directional_symbol(
    lattice: Lattice,
    omega: [f64; 2],
    d0: f64,
) -> Result<DirectionalSymbol> {
    if !omega[0].is_finite() || !omega[1].is_finite() {
        return Err(Error::ProblemSetup("frequency vector must be finite".into()));
    }
    if d0 == 0.0 || !d0.is_finite() {
        return Err(Error::ProblemSetup(format!(
            "zero-mode entry d0 must be finite and nonzero, got {d0}"
        )));
    }
    let mut symbol = vec![Complex64::ZERO; lattice.len()];
    let mut min_divisor = f64::INFINITY;
    let mut max_divisor: f64 = 0.0;
    let mut divisor_floor = f64::INFINITY;
    let mut worst_mode = [0, 0];
    for (i, k) in lattice.points().enumerate() {
        if k == [0, 0] {
            symbol[i] = Complex64::new(d0, 0.0);
            continue;
        }
        let dot = omega[0] * k[0] as f64 + omega[1] * k[1] as f64;
        let divisor = dot.abs();
        if divisor == 0.0 {
            return Err(Error::ProblemSetup(format!(
                "exact resonance: omega . k = 0 at mode ({}, {})",
                k[0], k[1]
            )));
        }
        symbol[i] = Complex64::new(0.0, dot);
        max_divisor = max_divisor.max(divisor);
        if divisor < min_divisor {
            min_divisor = divisor;
            worst_mode = k;
        }
        divisor_floor = divisor_floor.min(divisor * Lattice::k_sq(k).sqrt());
    }
    Ok(DirectionalSymbol { symbol, divisor_floor, min_divisor, max_divisor, worst_mode })
}

/// Build the instance on a two-dimensional lattice. `omega` defaults to the
/// golden-mean pair and `d0` (the zero-mode entry of the symbol) to 1.
///
/// Construction scans the whole lattice for the smallest divisor, rejects
/// exact resonances and condition numbers above 1e12, and runs one seeded
/// probe solve at the trust radius to confirm the right inverse is accurate.
pub fn small_divisor_problem(
    nmax: i64,
    omega: Option<[f64; 2]>,
    d0: f64,
) -> Result<SmallDivisorProblem> {
    let lattice = Lattice::new(2, nmax)?;
    let omega = omega.unwrap_or_else(golden_mean_frequencies);
    let DirectionalSymbol { symbol, divisor_floor, min_divisor, max_divisor, worst_mode } =
        directional_symbol(lattice, omega, d0)?;

    let condition_estimate = max_divisor.max(d0.abs()) / min_divisor.min(d0.abs());
    if condition_estimate > 1e12 {
        return Err(Error::ProblemSetup(format!(
            "divisors too small: diagonal condition estimate {condition_estimate:.3e} \
             exceeds 1e12 (worst mode ({}, {}))",
            worst_mode[0], worst_mode[1]
        )));
    }

    let suggested = IterationParams {
        a0: 2.0,
        mu: 2.0,
        a1: 3.0,
        a2: 16.0,
        alpha: 9.0,
        beta: 10.0,
        gamma: Some(2.0),
        ..IterationParams::default()
    };
    let meta = ProblemMetadata { mu: 0.0, a0: 2.0, loss: 1.0, delta1: 0.05, suggested };
    let problem = SmallDivisorProblem {
        lattice,
        omega,
        symbol,
        divisor_floor,
        min_divisor,
        worst_mode,
        condition_estimate,
        meta,
        solve_opts: SolveOptions::default(),
    };

    // Probe: solve once at the edge of the trust ball and insist on an
    // accurate right inverse before handing the instance out.
    let mut v = random_function(lattice, 4.0, 0x5d17);
    normalize_to(&mut v, nx(problem.meta.suggested.a1), problem.meta.delta1)?;
    let mut g = random_function(lattice, 4.0, 0x5d18);
    normalize_to(&mut g, nx(0.0), 1.0)?;
    let defect = right_inverse_defect(&problem, &v, &g)?;
    if defect > 1e-8 {
        return Err(Error::ProblemSetup(format!(
            "probe solve at the trust radius left relative defect {defect:.3e}"
        )));
    }

    Ok(problem)
}

impl SmallDivisorProblem {
    pub fn omega(&self) -> [f64; 2] {
        self.omega
    }

    /// `min |omega . k| |k|` over the nonzero lattice modes.
    pub fn divisor_floor(&self) -> f64 {
        self.divisor_floor
    }

    /// Smallest `|omega . k|` and the mode attaining it.
    pub fn min_divisor(&self) -> f64 {
        self.min_divisor
    }

    pub fn worst_mode(&self) -> [i64; 2] {
        self.worst_mode
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    fn apply_symbol(&self, u: &SpectralFunction) -> Result<SpectralFunction> {
        ensure_same_lattice(u.lattice(), self.lattice)?;
        let coeffs = u.coeffs().iter().zip(&self.symbol).map(|(&c, &m)| c * m).collect();
        SpectralFunction::from_coeffs(self.lattice, coeffs, u.real_valued())
    }
}

impl TameProblem for SmallDivisorProblem {
    fn name(&self) -> &'static str {
        "small-divisor"
    }

    fn lattice(&self) -> Lattice {
        self.lattice
    }

    fn metadata(&self) -> &ProblemMetadata {
        &self.meta
    }

    fn phi(&self, u: &SpectralFunction) -> Result<SpectralFunction> {
        let du = self.apply_symbol(u)?;
        du.add(&pointwise_product(u, u)?)
    }

    fn dphi(&self, u: &SpectralFunction, h: &SpectralFunction) -> Result<SpectralFunction> {
        ensure_same_lattice(u.lattice(), self.lattice)?;
        let dh = self.apply_symbol(h)?;
        dh.add(&pointwise_product(u, h)?.scale(Complex64::new(2.0, 0.0)))
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
        let op = LatticeOperator::new(self.lattice, self.symbol.clone(), Some(conv))?;
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

    #[test]
    fn golden_mean_divisor_floor_at_nmax_32() {
        let p = small_divisor_problem(32, None, 1.0).unwrap();
        assert!((p.divisor_floor() - 0.525731253407).abs() < 1e-9);
        assert!((p.min_divisor() - 0.021286236252207047).abs() < 1e-12);
        assert_eq!(p.worst_mode(), [-13, 21]);
        assert!(p.condition_estimate() < 1e4);
    }

    #[test]
    fn exact_resonance_is_rejected() {
        let r = small_divisor_problem(8, Some([1.0, 0.5]), 1.0);
        assert!(matches!(r, Err(Error::ProblemSetup(_))));
    }

    #[test]
    fn zero_d0_is_rejected() {
        let r = small_divisor_problem(8, None, 0.0);
        assert!(matches!(r, Err(Error::ProblemSetup(_))));
    }

    #[test]
    fn right_inverse_holds_on_the_trust_ball() {
        let p = small_divisor_problem(12, None, 1.0).unwrap();
        let mut v = random_function(p.lattice(), 4.0, 21);
        normalize_to(&mut v, nx(3.0), 0.05).unwrap();
        let g = random_function(p.lattice(), 3.0, 22);
        assert!(right_inverse_defect(&p, &v, &g).unwrap() < 1e-9);
    }

    #[test]
    fn reality_is_preserved() {
        let p = small_divisor_problem(8, None, 1.0).unwrap();
        let u = random_function(p.lattice(), 3.0, 31);
        assert!(p.phi(&u).unwrap().real_valued());
        assert!(p.phi(&u).unwrap().is_hermitian(1e-12));
    }
}
