//! Truncated periodic Fourier scale.
//!
//! A [`SpectralFunction`] stores the Fourier coefficients of a function on
//! `T^d` (`d = 1, 2`) restricted to the lattice `|k|_inf <= nmax`, and the
//! Sobolev norms are the weighted coefficient sums
//! `||u||_a^2 = sum_k |u_k|^2 <k>^{2a}` with `<k> = (1 + |k|^2)^{1/2}`
//! (`|k|` Euclidean). Norm monotonicity in `a` and the log-convexity
//! interpolation inequality hold with constant 1 by construction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mode lattice `{ k in Z^d : |k|_inf <= nmax }`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub nmax: i64,
}

impl Lattice {
    pub fn new(dim: usize, nmax: i64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidLattice(format!("dim must be 1 or 2, got {dim}")));
        }
        if nmax < 1 {
            return Err(Error::InvalidLattice(format!("nmax must be >= 1, got {nmax}")));
        }
        Ok(Self { dim, nmax })
    }

    /// Number of modes along one axis.
    #[inline]
    pub fn side(&self) -> usize {
        (2 * self.nmax + 1) as usize
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        let s = self.side();
        if self.dim == 1 {
            s
        } else {
            s * s
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn contains(&self, k: [i64; 2]) -> bool {
        k[0].abs() <= self.nmax && (if self.dim == 1 { k[1] == 0 } else { k[1].abs() <= self.nmax })
    }

    #[inline]
    pub fn index(&self, k: [i64; 2]) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let n = self.nmax;
        Some(if self.dim == 1 {
            (k[0] + n) as usize
        } else {
            (k[0] + n) as usize * self.side() + (k[1] + n) as usize
        })
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [i64; 2] {
        let n = self.nmax;
        if self.dim == 1 {
            [idx as i64 - n, 0]
        } else {
            let s = self.side();
            [(idx / s) as i64 - n, (idx % s) as i64 - n]
        }
    }

    pub fn points(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Euclidean `|k|^2`.
    #[inline]
    pub fn k_sq(k: [i64; 2]) -> f64 {
        (k[0] * k[0] + k[1] * k[1]) as f64
    }

    /// `<k>^{2a} = (1 + |k|^2)^a`.
    #[inline]
    pub fn weight(k: [i64; 2], a: f64) -> f64 {
        (1.0 + Self::k_sq(k)).powf(a)
    }

    /// Largest Euclidean mode radius present on the lattice (`sqrt(d) * nmax`).
    pub fn radius(&self) -> f64 {
        (self.dim as f64).sqrt() * self.nmax as f64
    }
}

/// Sobolev norm index; kept as a newtype so negative exponents are rejected
/// once at the boundary instead of inside every norm loop.
#[derive(Clone, Copy, PartialEq, PartialOrd, Debug)]
pub struct NormExponent(f64);

impl NormExponent {
    pub fn new(a: f64) -> Result<Self> {
        if a.is_finite() && a >= 0.0 {
            Ok(Self(a))
        } else {
            Err(Error::InvalidExponent(a))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for NormExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Panicking convenience constructor for exponents known to be admissible.
#[inline]
pub fn nx(a: f64) -> NormExponent {
    NormExponent::new(a).expect("norm exponent must be finite and >= 0")
}

/// Fourier coefficients of a function on `T^d`, truncated to a [`Lattice`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFunction {
    lattice: Lattice,
    real_valued: bool,
    coeffs: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn zero(lattice: Lattice) -> Self {
        Self { lattice, real_valued: true, coeffs: vec![Complex64::ZERO; lattice.len()] }
    }

    /// The constant function `value` (mode 0 only).
    pub fn constant(lattice: Lattice, value: Complex64) -> Self {
        let mut f = Self::zero(lattice);
        let idx = lattice.index([0, 0]).expect("0 is always on the lattice");
        f.coeffs[idx] = value;
        f.real_valued = value.im == 0.0;
        f
    }

    /// The single complex exponential `amp * e^{i k x}`.
    pub fn single_mode(lattice: Lattice, k: [i64; 2], amp: Complex64) -> Result<Self> {
        let idx = lattice.index(k).ok_or(Error::ModeOutsideLattice(k[0], k[1]))?;
        let mut f = Self::zero(lattice);
        f.coeffs[idx] = amp;
        f.real_valued = k == [0, 0] && amp.im == 0.0;
        Ok(f)
    }

    pub fn from_fn(lattice: Lattice, mut f: impl FnMut([i64; 2]) -> Complex64) -> Self {
        let coeffs = (0..lattice.len()).map(|i| f(lattice.point(i))).collect();
        let mut out = Self { lattice, real_valued: false, coeffs };
        out.real_valued = out.is_hermitian(0.0);
        out
    }

    pub fn from_coeffs(lattice: Lattice, coeffs: Vec<Complex64>, real_valued: bool) -> Result<Self> {
        if coeffs.len() != lattice.len() {
            return Err(Error::InvalidLattice(format!(
                "coefficient vector has length {}, lattice has {} points",
                coeffs.len(),
                lattice.len()
            )));
        }
        let f = Self { lattice, real_valued, coeffs };
        if real_valued && !f.is_hermitian(1e-12 * (1.0 + f.max_abs())) {
            return Err(Error::NotHermitian);
        }
        Ok(f)
    }

    #[inline]
    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    #[inline]
    pub fn real_valued(&self) -> bool {
        self.real_valued
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub(crate) fn set_real_valued(&mut self, flag: bool) {
        self.real_valued = flag;
    }

    /// Coefficient at mode `k`; zero outside the lattice.
    #[inline]
    pub fn coeff(&self, k: [i64; 2]) -> Complex64 {
        self.lattice.index(k).map_or(Complex64::ZERO, |i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, k: [i64; 2], value: Complex64) -> Result<()> {
        let idx = self.lattice.index(k).ok_or(Error::ModeOutsideLattice(k[0], k[1]))?;
        self.coeffs[idx] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = ([i64; 2], Complex64)> + '_ {
        self.coeffs.iter().enumerate().map(move |(i, &c)| (self.lattice.point(i), c))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `||u||_a = (sum_k |u_k|^2 <k>^{2a})^{1/2}`.
    pub fn sobolev_norm(&self, a: NormExponent) -> f64 {
        let a = a.value();
        let mut s = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let n2 = c.norm_sqr();
            if n2 != 0.0 {
                s += n2 * Lattice::weight(self.lattice.point(i), a);
            }
        }
        s.sqrt()
    }

    /// `alpha * x + y`, on the coarsest common refinement (the dims must
    /// match; the result lives on the lattice with the larger `nmax`).
    pub fn axpy(alpha: Complex64, x: &SpectralFunction, y: &SpectralFunction) -> Result<SpectralFunction> {
        if x.lattice.dim != y.lattice.dim {
            return Err(Error::DimensionMismatch { left: x.lattice.dim, right: y.lattice.dim });
        }
        let lattice = Lattice { dim: x.lattice.dim, nmax: x.lattice.nmax.max(y.lattice.nmax) };
        let real = x.real_valued && y.real_valued && alpha.im == 0.0;
        let mut out = Self::zero(lattice);
        if x.lattice == lattice && y.lattice == lattice {
            for i in 0..out.coeffs.len() {
                out.coeffs[i] = alpha * x.coeffs[i] + y.coeffs[i];
            }
        } else {
            for i in 0..out.coeffs.len() {
                let k = lattice.point(i);
                out.coeffs[i] = alpha * x.coeff(k) + y.coeff(k);
            }
        }
        out.real_valued = real;
        Ok(out)
    }

    pub fn add(&self, other: &SpectralFunction) -> Result<SpectralFunction> {
        Self::axpy(Complex64::ONE, self, other)
    }

    pub fn sub(&self, other: &SpectralFunction) -> Result<SpectralFunction> {
        Self::axpy(-Complex64::ONE, other, self)
    }

    pub fn scale(&self, alpha: Complex64) -> SpectralFunction {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= alpha;
        }
        out.real_valued = self.real_valued && alpha.im == 0.0;
        out
    }

    /// Restrict or extend to another lattice of the same dimension; modes
    /// outside the target are dropped, missing modes are zero.
    pub fn resample(&self, lattice: Lattice) -> Result<SpectralFunction> {
        if lattice.dim != self.lattice.dim {
            return Err(Error::DimensionMismatch { left: self.lattice.dim, right: lattice.dim });
        }
        if lattice == self.lattice {
            return Ok(self.clone());
        }
        let mut out = Self::zero(lattice);
        for i in 0..out.coeffs.len() {
            out.coeffs[i] = self.coeff(lattice.point(i));
        }
        out.real_valued = self.real_valued;
        Ok(out)
    }

    /// Check `u(-k) = conj(u(k))` up to an absolute tolerance.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        for i in 0..self.coeffs.len() {
            let k = self.lattice.point(i);
            let mirrored = self.coeff([-k[0], -k[1]]).conj();
            if (self.coeffs[i] - mirrored).norm() > tol {
                return false;
            }
        }
        true
    }

    /// Project onto the real-valued subspace (average with the reflected
    /// conjugate) and set the flag. A no-op for already symmetric data.
    pub fn hermitize(&mut self) {
        let lattice = self.lattice;
        let old = self.coeffs.clone();
        for i in 0..self.coeffs.len() {
            let k = lattice.point(i);
            let j = lattice.index([-k[0], -k[1]]).expect("mirror mode is on the lattice");
            self.coeffs[i] = 0.5 * (old[i] + old[j].conj());
        }
        self.real_valued = true;
    }
}

/// Interchange record: `{dim, nmax, real_valued, coeffs: [[[k...], re, im], ...]}`
/// listing only nonzero coefficients in lattice order.
#[derive(Serialize, Deserialize)]
struct SpectralFunctionRepr {
    dim: usize,
    nmax: i64,
    real_valued: bool,
    coeffs: Vec<(Vec<i64>, f64, f64)>,
}

impl Serialize for SpectralFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs = self
            .iter()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(|(k, c)| (k[..self.lattice.dim].to_vec(), c.re, c.im))
            .collect();
        SpectralFunctionRepr {
            dim: self.lattice.dim,
            nmax: self.lattice.nmax,
            real_valued: self.real_valued,
            coeffs,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpectralFunction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SpectralFunctionRepr::deserialize(deserializer)?;
        let lattice = Lattice::new(repr.dim, repr.nmax).map_err(D::Error::custom)?;
        let mut f = SpectralFunction::zero(lattice);
        for (k, re, im) in repr.coeffs {
            if k.len() != repr.dim {
                return Err(D::Error::custom(format!(
                    "mode index {k:?} does not match dim {}",
                    repr.dim
                )));
            }
            let k = [k[0], if repr.dim == 2 { k[1] } else { 0 }];
            f.set_coeff(k, Complex64::new(re, im)).map_err(D::Error::custom)?;
        }
        f.real_valued = repr.real_valued;
        if repr.real_valued && !f.is_hermitian(1e-12 * (1.0 + f.max_abs())) {
            return Err(D::Error::custom("coefficients violate real-valued symmetry"));
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn norm_of_single_mode_matches_weight() {
        let lat = Lattice::new(1, 8).unwrap();
        let u = SpectralFunction::single_mode(lat, [3, 0], Complex64::ONE).unwrap();
        // <3>^1 = sqrt(10)
        assert_relative_eq!(u.sobolev_norm(nx(1.0)), 10.0_f64.sqrt(), max_relative = 1e-15);
        assert_eq!(u.sobolev_norm(nx(0.0)), 1.0);
    }

    #[test]
    fn norm_of_zero_is_zero() {
        let lat = Lattice::new(2, 4).unwrap();
        assert_eq!(SpectralFunction::zero(lat).sobolev_norm(nx(7.5)), 0.0);
    }

    #[test]
    fn axpy_extends_to_larger_lattice() {
        let small = Lattice::new(1, 4).unwrap();
        let big = Lattice::new(1, 8).unwrap();
        let u = SpectralFunction::single_mode(small, [2, 0], Complex64::ONE).unwrap();
        let v = SpectralFunction::single_mode(big, [7, 0], Complex64::new(0.0, 2.0)).unwrap();
        let w = SpectralFunction::axpy(Complex64::new(3.0, 0.0), &u, &v).unwrap();
        assert_eq!(w.lattice().nmax, 8);
        assert_eq!(w.coeff([2, 0]), Complex64::new(3.0, 0.0));
        assert_eq!(w.coeff([7, 0]), Complex64::new(0.0, 2.0));
    }

    #[test]
    fn axpy_rejects_dimension_mismatch() {
        let a = SpectralFunction::zero(Lattice::new(1, 4).unwrap());
        let b = SpectralFunction::zero(Lattice::new(2, 4).unwrap());
        assert!(matches!(
            SpectralFunction::axpy(Complex64::ONE, &a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn negative_exponent_rejected() {
        assert!(NormExponent::new(-0.5).is_err());
        assert!(NormExponent::new(f64::NAN).is_err());
        assert!(NormExponent::new(0.0).is_ok());
    }

    #[test]
    fn hermitize_projects_and_flags() {
        let lat = Lattice::new(1, 3).unwrap();
        let mut u = SpectralFunction::zero(lat);
        u.set_coeff([1, 0], Complex64::new(1.0, 0.5)).unwrap();
        assert!(!u.is_hermitian(1e-15));
        u.hermitize();
        assert!(u.is_hermitian(0.0));
        assert_eq!(u.coeff([-1, 0]), u.coeff([1, 0]).conj());
    }

    #[test]
    fn json_round_trip() {
        let lat = Lattice::new(2, 3).unwrap();
        let mut u = SpectralFunction::zero(lat);
        u.set_coeff([1, -2], Complex64::new(0.25, -1.5)).unwrap();
        u.set_coeff([-1, 2], Complex64::new(0.25, 1.5)).unwrap();
        u.set_real_valued(true);
        let text = serde_json::to_string(&u).unwrap();
        let back: SpectralFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, u);
        assert!(back.real_valued());
    }
}
