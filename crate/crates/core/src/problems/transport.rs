//! Transport-type instance `phi(u) = D u - V(x1, x2 + u)` on the
//! two-dimensional lattice: the directional derivative of the small-divisor
//! instance composed with a shift of the velocity profile `V` along the
//! second coordinate. Compositions are evaluated on a fixed oversampled
//! grid (side 4 nmax) and projected back; derivatives are computed on the
//! same grid, so they are the exact derivatives of the discretised map and
//! the right inverse solves the identical operator.

use num_complex::Complex64;

use crate::conv::{next_fast, FixedConvolver, Grid};
use crate::error::{Error, Result};
use crate::hypotheses::IterationParams;
use crate::sample::{normalize_to, random_function};
use crate::scale::{nx, Lattice, SpectralFunction};
use crate::solve::{solve_linear, LatticeOperator, SolveOptions};

use super::small_divisor::{directional_symbol, DirectionalSymbol};
use super::{ensure_same_lattice, right_inverse_defect, ProblemMetadata, TameProblem};

pub struct TransportProblem {
    lattice: Lattice,
    omega: [f64; 2],
    symbol: Vec<Complex64>,
    divisor_floor: f64,
    /// Oversampled evaluation grid, side `m`.
    m: usize,
    /// Half-width of the profile's second-coordinate band.
    nv: i64,
    /// Partial transform of the profile: `ctab[t1][k2] = sum_k1 V(k1, k2)
    /// exp(i k1 x1(t1))`, stored t1-major. Derivatives in the shifted
    /// coordinate only scale each `k2` entry, so one table serves V, Vy, Vyy.
    ctab: Vec<Complex64>,
    meta: ProblemMetadata,
    solve_opts: SolveOptions,
}

/// Build the instance on lattice `nmax` with a given velocity profile (a
/// real-valued function on its own, possibly smaller, lattice). `omega`
/// defaults to the golden-mean pair. A seeded probe solve at the trust
/// radius validates invertibility of the linearisation at construction.
pub fn transport_problem(
    nmax: i64,
    profile: &SpectralFunction,
    omega: Option<[f64; 2]>,
    d0: f64,
) -> Result<TransportProblem> {
    let lattice = Lattice::new(2, nmax)?;
    if profile.lattice().dim != 2 {
        return Err(Error::ProblemSetup("velocity profile must be two-dimensional".into()));
    }
    if !profile.is_hermitian(1e-12 * profile.max_abs().max(1.0)) {
        return Err(Error::ProblemSetup("velocity profile must be real-valued".into()));
    }
    let omega = omega.unwrap_or_else(super::golden_mean_frequencies);
    let DirectionalSymbol { symbol, divisor_floor, min_divisor, max_divisor, .. } =
        directional_symbol(lattice, omega, d0)?;
    let condition = max_divisor.max(d0.abs()) / min_divisor.min(d0.abs());
    if condition > 1e12 {
        return Err(Error::ProblemSetup(format!(
            "divisors too small: diagonal condition estimate {condition:.3e} exceeds 1e12"
        )));
    }

    let m = next_fast((4 * nmax) as usize);
    let nv = profile.lattice().nmax;
    let width = (2 * nv + 1) as usize;
    let mut ctab = vec![Complex64::ZERO; m * width];
    for t1 in 0..m {
        let x1 = 2.0 * std::f64::consts::PI * t1 as f64 / m as f64;
        for k2 in -nv..=nv {
            let mut acc = Complex64::ZERO;
            for k1 in -nv..=nv {
                let c = profile.coeff([k1, k2]);
                if c != Complex64::ZERO {
                    acc += c * Complex64::from_polar(1.0, k1 as f64 * x1);
                }
            }
            ctab[t1 * width + (k2 + nv) as usize] = acc;
        }
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
    let problem = TransportProblem {
        lattice,
        omega,
        symbol,
        divisor_floor,
        m,
        nv,
        ctab,
        meta,
        solve_opts: SolveOptions::default(),
    };

    let mut v = random_function(lattice, 4.0, 0x7a55);
    normalize_to(&mut v, nx(problem.meta.suggested.a1), problem.meta.delta1)?;
    let mut g = random_function(lattice, 4.0, 0x7a56);
    normalize_to(&mut g, nx(0.0), 1.0)?;
    let defect = right_inverse_defect(&problem, &v, &g)?;
    if defect > 1e-8 {
        return Err(Error::ProblemSetup(format!(
            "probe solve at the trust radius left relative defect {defect:.3e}; \
             the velocity profile is too large for this frequency vector"
        )));
    }

    Ok(problem)
}

impl TransportProblem {
    pub fn omega(&self) -> [f64; 2] {
        self.omega
    }

    pub fn divisor_floor(&self) -> f64 {
        self.divisor_floor
    }

    pub fn grid_side(&self) -> usize {
        self.m
    }

    fn grid(&self) -> Grid {
        Grid::new(2, self.m)
    }

    /// Physical samples of `u` on the evaluation grid, `t1`-major.
    fn grid_samples(&self, grid: &Grid, u: &SpectralFunction) -> Vec<Complex64> {
        let mut buf = vec![Complex64::ZERO; grid.len()];
        grid.embed(u, &mut buf);
        grid.to_physical(&mut buf);
        buf
    }

    /// Samples of `(d/dy)^deriv V(x1, x2 + shift)` over the grid. The shift
    /// may be complex; the series is entire in it.
    fn compose(&self, shift: &[Complex64], deriv: u32) -> Vec<Complex64> {
        let m = self.m;
        let width = (2 * self.nv + 1) as usize;
        let mut out = vec![Complex64::ZERO; m * m];
        for t1 in 0..m {
            let row = &self.ctab[t1 * width..(t1 + 1) * width];
            for t2 in 0..m {
                let idx = t1 * m + t2;
                let x2 = 2.0 * std::f64::consts::PI * t2 as f64 / m as f64;
                let y = Complex64::new(x2, 0.0) + shift[idx];
                let mut acc = Complex64::ZERO;
                for (j, &c) in row.iter().enumerate() {
                    if c == Complex64::ZERO {
                        continue;
                    }
                    let k2 = j as i64 - self.nv;
                    let ik2 = Complex64::new(0.0, k2 as f64);
                    let factor = match deriv {
                        0 => Complex64::ONE,
                        1 => ik2,
                        _ => ik2 * ik2,
                    };
                    acc += c * factor * (ik2 * y).exp();
                }
                out[idx] = acc;
            }
        }
        out
    }

    /// Project grid samples onto the lattice modes.
    fn project(&self, grid: &Grid, mut samples: Vec<Complex64>) -> Result<SpectralFunction> {
        grid.to_spectral(&mut samples);
        let mut coeffs = vec![Complex64::ZERO; self.lattice.len()];
        grid.extract(&samples, self.lattice, &mut coeffs);
        SpectralFunction::from_coeffs(self.lattice, coeffs, false)
    }

    fn apply_symbol(&self, u: &SpectralFunction) -> Result<SpectralFunction> {
        ensure_same_lattice(u.lattice(), self.lattice)?;
        let coeffs = u.coeffs().iter().zip(&self.symbol).map(|(&c, &s)| c * s).collect();
        SpectralFunction::from_coeffs(self.lattice, coeffs, u.real_valued())
    }
}

impl TameProblem for TransportProblem {
    fn name(&self) -> &'static str {
        "transport"
    }

    fn lattice(&self) -> Lattice {
        self.lattice
    }

    fn metadata(&self) -> &ProblemMetadata {
        &self.meta
    }

    fn phi(&self, u: &SpectralFunction) -> Result<SpectralFunction> {
        let du = self.apply_symbol(u)?;
        let grid = self.grid();
        let shift = self.grid_samples(&grid, u);
        let comp = self.project(&grid, self.compose(&shift, 0))?;
        let mut out = du.sub(&comp)?;
        if u.real_valued() {
            out.hermitize();
        }
        Ok(out)
    }

    fn dphi(&self, u: &SpectralFunction, h: &SpectralFunction) -> Result<SpectralFunction> {
        ensure_same_lattice(u.lattice(), self.lattice)?;
        let dh = self.apply_symbol(h)?;
        let grid = self.grid();
        let shift = self.grid_samples(&grid, u);
        let mut w = self.compose(&shift, 1);
        let hs = self.grid_samples(&grid, h);
        for (a, b) in w.iter_mut().zip(&hs) {
            *a *= b;
        }
        let prod = self.project(&grid, w)?;
        let mut out = dh.sub(&prod)?;
        if u.real_valued() && h.real_valued() {
            out.hermitize();
        }
        Ok(out)
    }

    fn d2phi(
        &self,
        u: &SpectralFunction,
        h: &SpectralFunction,
        w: &SpectralFunction,
    ) -> Result<SpectralFunction> {
        ensure_same_lattice(u.lattice(), self.lattice)?;
        let grid = self.grid();
        let shift = self.grid_samples(&grid, u);
        let mut s = self.compose(&shift, 2);
        let hs = self.grid_samples(&grid, h);
        let ws = self.grid_samples(&grid, w);
        for ((a, b), c) in s.iter_mut().zip(&hs).zip(&ws) {
            *a *= b * c;
        }
        let mut out = self.project(&grid, s)?.scale(Complex64::new(-1.0, 0.0));
        if u.real_valued() && h.real_valued() && w.real_valued() {
            out.hermitize();
        }
        Ok(out)
    }

    fn psi(&self, v: &SpectralFunction, g: &SpectralFunction) -> Result<SpectralFunction> {
        ensure_same_lattice(v.lattice(), self.lattice)?;
        ensure_same_lattice(g.lattice(), self.lattice)?;
        let grid = self.grid();
        let shift = self.grid_samples(&grid, v);
        let mut w = self.compose(&shift, 1);
        for a in w.iter_mut() {
            *a = -*a;
        }
        let conv = FixedConvolver::from_physical(grid, w, self.lattice);
        let op = LatticeOperator::new(self.lattice, self.symbol.clone(), Some(conv))?;
        let (coeffs, _report) = solve_linear(&op, g.coeffs(), &self.solve_opts)?;
        let mut h = SpectralFunction::from_coeffs(self.lattice, coeffs, false)?;
        if v.real_valued() && g.real_valued() {
            h.hermitize();
        }
        Ok(h)
    }
}
