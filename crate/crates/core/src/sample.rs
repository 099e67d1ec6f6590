//! Seeded random test functions.
//!
//! Coefficients are drawn shell by shell in sup-norm order, so enlarging the
//! lattice with the same seed extends a function instead of reshuffling it:
//! the modes that both lattices contain receive identical draws.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scale::{Lattice, NormExponent, SpectralFunction};

fn for_each_shell_point(lattice: Lattice, mut f: impl FnMut([i64; 2])) {
    for s in 0..=lattice.nmax {
        if lattice.dim == 1 {
            if s == 0 {
                f([0, 0]);
            } else {
                f([-s, 0]);
                f([s, 0]);
            }
        } else if s == 0 {
            f([0, 0]);
        } else {
            for k1 in -s..=s {
                for k2 in -s..=s {
                    if k1.abs().max(k2.abs()) == s {
                        f([k1, k2]);
                    }
                }
            }
        }
    }
}

/// Random real-valued function whose coefficients decay like `<k>^-decay`
/// on top of unit complex Gaussians. Deterministic in `seed`, and stable
/// under lattice enlargement (see module docs).
pub fn random_function(lattice: Lattice, decay: f64, seed: u64) -> SpectralFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = vec![Complex64::ZERO; lattice.len()];
    for_each_shell_point(lattice, |k| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        raw[lattice.index(k).expect("shell point on lattice")] = Complex64::new(re, im);
    });
    let mut out = SpectralFunction::zero(lattice);
    for i in 0..lattice.len() {
        let k = lattice.point(i);
        let mirror = lattice.index([-k[0], -k[1]]).expect("lattice is symmetric");
        let z = 0.5 * (raw[i] + raw[mirror].conj());
        let amp = Lattice::weight(k, -decay / 2.0);
        out.coeffs_mut()[i] = z * amp;
    }
    // k = 0 must be real for a real-valued function; the projection above
    // already guarantees it, but make it exact.
    let zero = lattice.index([0, 0]).unwrap();
    out.coeffs_mut()[zero] = Complex64::new(out.coeffs()[zero].re, 0.0);
    out.set_real_valued(true);
    out
}

/// Rescale `f` in place so that its Sobolev norm of order `a` equals
/// `target`. Fails on the zero function.
pub fn normalize_to(f: &mut SpectralFunction, a: NormExponent, target: f64) -> Result<f64> {
    let n = f.sobolev_norm(a);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroNormalization);
    }
    let s = target / n;
    *f = f.scale(s.into());
    Ok(s)
}
