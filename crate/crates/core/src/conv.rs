//! Pointwise products of truncated Fourier series.
//!
//! Products are convolutions in coefficient space; they are evaluated by
//! zero-padded FFT on a grid large enough that circular wrap-around cannot
//! reach the retained modes, then truncated back to the target lattice. The
//! result is exact up to floating-point rounding.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::scale::{Lattice, SpectralFunction};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(m: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(m, dir))
}

/// Smallest 5-smooth integer >= n (sizes rustfft handles without Bluestein).
pub(crate) fn next_fast(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Periodic FFT grid of side `m` in `dim` dimensions, with scratch reused
/// across applications.
pub(crate) struct Grid {
    pub dim: usize,
    pub m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: RefCell<Vec<Complex64>>,
    transpose: RefCell<Vec<Complex64>>,
}

impl Grid {
    pub fn new(dim: usize, m: usize) -> Self {
        let fwd = plan(m, FftDirection::Forward);
        let inv = plan(m, FftDirection::Inverse);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            dim,
            m,
            fwd,
            inv,
            scratch: RefCell::new(vec![Complex64::ZERO; scratch_len]),
            transpose: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        if self.dim == 1 {
            self.m
        } else {
            self.m * self.m
        }
    }

    #[inline]
    fn wrap(&self, k: i64) -> usize {
        k.rem_euclid(self.m as i64) as usize
    }

    /// Scatter lattice coefficients onto the grid (indices mod m).
    pub fn embed(&self, f: &SpectralFunction, buf: &mut [Complex64]) {
        buf.fill(Complex64::ZERO);
        let lat = f.lattice();
        for (i, &c) in f.coeffs().iter().enumerate() {
            let k = lat.point(i);
            let idx = if self.dim == 1 {
                self.wrap(k[0])
            } else {
                self.wrap(k[0]) * self.m + self.wrap(k[1])
            };
            buf[idx] = c;
        }
    }

    fn run(&self, fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let mut scratch = self.scratch.borrow_mut();
        if self.dim == 1 {
            fft.process_with_scratch(buf, &mut scratch);
            return;
        }
        let m = self.m;
        for row in buf.chunks_exact_mut(m) {
            fft.process_with_scratch(row, &mut scratch);
        }
        let mut t = self.transpose.borrow_mut();
        t.resize(m * m, Complex64::ZERO);
        for r in 0..m {
            for c in 0..m {
                t[c * m + r] = buf[r * m + c];
            }
        }
        for row in t.chunks_exact_mut(m) {
            fft.process_with_scratch(row, &mut scratch);
        }
        for r in 0..m {
            for c in 0..m {
                buf[r * m + c] = t[c * m + r];
            }
        }
    }

    /// Unnormalised inverse transform: coefficients -> physical samples.
    pub fn to_physical(&self, buf: &mut [Complex64]) {
        self.run(&self.inv, buf);
    }

    /// Forward transform with 1/m^dim normalisation: samples -> coefficients.
    pub fn to_spectral(&self, buf: &mut [Complex64]) {
        self.run(&self.fwd, buf);
        let scale = 1.0 / (self.len() as f64);
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// Gather the modes of `lattice` out of the grid.
    pub fn extract(&self, buf: &[Complex64], lattice: Lattice, out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let k = lattice.point(i);
            let idx = if self.dim == 1 {
                self.wrap(k[0])
            } else {
                self.wrap(k[0]) * self.m + self.wrap(k[1])
            };
            *o = buf[idx];
        }
    }
}

fn product_grid(dim: usize, n_left: i64, n_right: i64, n_out: i64) -> Grid {
    // Wrap-around can only reach |k| <= n_out if m - n_out <= n_left + n_right.
    let m = next_fast((n_left + n_right + n_out + 1) as usize);
    Grid::new(dim, m)
}

/// `u * v` as functions on the torus, truncated to the larger of the two
/// input lattices.
pub fn pointwise_product(u: &SpectralFunction, v: &SpectralFunction) -> Result<SpectralFunction> {
    let (lu, lv) = (u.lattice(), v.lattice());
    if lu.dim != lv.dim {
        return Err(Error::DimensionMismatch { left: lu.dim, right: lv.dim });
    }
    let out_lat = Lattice { dim: lu.dim, nmax: lu.nmax.max(lv.nmax) };
    let grid = product_grid(lu.dim, lu.nmax, lv.nmax, out_lat.nmax);
    let mut bu = vec![Complex64::ZERO; grid.len()];
    let mut bv = vec![Complex64::ZERO; grid.len()];
    grid.embed(u, &mut bu);
    grid.embed(v, &mut bv);
    grid.to_physical(&mut bu);
    grid.to_physical(&mut bv);
    for (a, b) in bu.iter_mut().zip(&bv) {
        *a *= b;
    }
    grid.to_spectral(&mut bu);
    let mut out = SpectralFunction::zero(out_lat);
    grid.extract(&bu, out_lat, out.coeffs_mut());
    if u.real_valued() && v.real_valued() {
        out.hermitize();
    } else {
        out.set_real_valued(false);
    }
    Ok(out)
}

/// Multiplication operator `h -> trunc(v * h)` by a fixed factor `v`, with
/// the factor's physical samples precomputed; used inside linearised solves
/// where the same factor multiplies many directions.
pub(crate) struct FixedConvolver {
    grid: Grid,
    v_phys: Vec<Complex64>,
    lattice: Lattice,
    buf: RefCell<Vec<Complex64>>,
}

impl FixedConvolver {
    /// `lattice` is both the domain and codomain of the operator.
    pub fn new(v: &SpectralFunction, lattice: Lattice) -> Result<Self> {
        if v.lattice().dim != lattice.dim {
            return Err(Error::DimensionMismatch { left: v.lattice().dim, right: lattice.dim });
        }
        let grid = product_grid(lattice.dim, v.lattice().nmax, lattice.nmax, lattice.nmax);
        let mut v_phys = vec![Complex64::ZERO; grid.len()];
        grid.embed(v, &mut v_phys);
        grid.to_physical(&mut v_phys);
        let buf = RefCell::new(vec![Complex64::ZERO; grid.len()]);
        Ok(Self { grid, v_phys, lattice, buf })
    }

    /// Build from physical samples laid out as [`Grid::to_physical`] leaves
    /// them. Products are reduced modulo the grid, so the caller's choice of
    /// grid size decides how unresolved frequencies fold back.
    pub fn from_physical(grid: Grid, v_phys: Vec<Complex64>, lattice: Lattice) -> Self {
        let buf = RefCell::new(vec![Complex64::ZERO; grid.len()]);
        Self { grid, v_phys, lattice, buf }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// out = trunc(v * h); `h` and `out` are coefficient vectors on `lattice`.
    pub fn apply(&self, h: &[Complex64], out: &mut [Complex64]) {
        let mut buf = self.buf.borrow_mut();
        buf.fill(Complex64::ZERO);
        for (i, &c) in h.iter().enumerate() {
            let k = self.lattice.point(i);
            let idx = if self.grid.dim == 1 {
                self.grid.wrap(k[0])
            } else {
                self.grid.wrap(k[0]) * self.grid.m + self.grid.wrap(k[1])
            };
            buf[idx] = c;
        }
        self.grid.to_physical(&mut buf);
        for (a, b) in buf.iter_mut().zip(&self.v_phys) {
            *a *= b;
        }
        self.grid.to_spectral(&mut buf);
        self.grid.extract(&buf, self.lattice, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::nx;
    use approx::assert_relative_eq;

    /// Direct O(n^2) convolution, kept as the oracle for the FFT path.
    fn convolve_direct(u: &SpectralFunction, v: &SpectralFunction) -> SpectralFunction {
        let out_lat = Lattice { dim: u.lattice().dim, nmax: u.lattice().nmax.max(v.lattice().nmax) };
        let mut out = SpectralFunction::zero(out_lat);
        let mut acc = vec![Complex64::ZERO; out_lat.len()];
        for (ku, cu) in u.iter() {
            if cu == Complex64::ZERO {
                continue;
            }
            for (kv, cv) in v.iter() {
                let k = [ku[0] + kv[0], ku[1] + kv[1]];
                if let Some(idx) = out_lat.index(k) {
                    acc[idx] += cu * cv;
                }
            }
        }
        for (i, c) in acc.into_iter().enumerate() {
            out.coeffs_mut()[i] = c;
        }
        out
    }

    #[test]
    fn product_of_single_modes_adds_frequencies() {
        let lat = Lattice::new(1, 8).unwrap();
        let u = SpectralFunction::single_mode(lat, [1, 0], Complex64::ONE).unwrap();
        let p = pointwise_product(&u, &u).unwrap();
        assert_relative_eq!((p.coeff([2, 0]) - Complex64::ONE).norm(), 0.0, epsilon = 1e-14);
        assert!(p.sobolev_norm(nx(0.0)) < 1.0 + 1e-13);
    }

    #[test]
    fn product_truncates_outside_lattice() {
        let lat = Lattice::new(1, 8).unwrap();
        let u = SpectralFunction::single_mode(lat, [1, 0], Complex64::ONE).unwrap();
        let v = SpectralFunction::single_mode(lat, [8, 0], Complex64::ONE).unwrap();
        let p = pointwise_product(&u, &v).unwrap();
        // mode 9 falls off the lattice entirely
        assert!(p.sobolev_norm(nx(0.0)) < 1e-13);
    }

    #[test]
    fn fft_product_matches_direct_convolution() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for dim in [1usize, 2] {
            let lat = Lattice::new(dim, 6).unwrap();
            let mut u = SpectralFunction::zero(lat);
            let mut v = SpectralFunction::zero(lat);
            for i in 0..lat.len() {
                u.coeffs_mut()[i] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                v.coeffs_mut()[i] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
            u.set_real_valued(false);
            v.set_real_valued(false);
            let fast = pointwise_product(&u, &v).unwrap();
            let slow = convolve_direct(&u, &v);
            let diff = fast.sub(&slow).unwrap().sobolev_norm(nx(0.0));
            assert!(diff < 1e-12 * slow.sobolev_norm(nx(0.0)).max(1.0), "dim {dim}: {diff}");
        }
    }

    #[test]
    fn fixed_convolver_matches_product() {
        let lat = Lattice::new(2, 5).unwrap();
        let mut v = SpectralFunction::zero(lat);
        v.set_coeff([1, 2], Complex64::new(0.3, -0.1)).unwrap();
        v.set_coeff([-2, 0], Complex64::new(-0.7, 0.2)).unwrap();
        v.set_real_valued(false);
        let mut h = SpectralFunction::zero(lat);
        h.set_coeff([3, -4], Complex64::new(1.0, 1.0)).unwrap();
        h.set_coeff([0, 1], Complex64::new(0.5, 0.0)).unwrap();
        h.set_real_valued(false);
        let conv = FixedConvolver::new(&v, lat).unwrap();
        let mut out = vec![Complex64::ZERO; lat.len()];
        conv.apply(h.coeffs(), &mut out);
        let want = pointwise_product(&v, &h).unwrap();
        for (i, &c) in out.iter().enumerate() {
            assert!((c - want.coeffs()[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn next_fast_is_five_smooth() {
        assert_eq!(next_fast(97), 100);
        assert_eq!(next_fast(1), 1);
        assert_eq!(next_fast(129), 135);
    }
}
