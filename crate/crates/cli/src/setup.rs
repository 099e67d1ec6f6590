//! Shared construction: configs into lattices, functions and problem
//! instances.

use num_complex::Complex64;

use nmh_core::problems::{
    power_multiplier_problem, quadratic_problem, small_divisor_problem, transport_problem,
    TameProblem,
};
use nmh_core::sample::{normalize_to, random_function};
use nmh_core::{nx, Error, Lattice, SpectralFunction};

use crate::config::{FunctionSpec, LatticeConfig, ProblemConfig};

pub fn build_lattice(cfg: LatticeConfig) -> Result<Lattice, Error> {
    Lattice::new(cfg.d, cfg.nmax)
}

/// Build a function from its spec. Returns the function and the seed it
/// actually used (for the output record); `seed_override` wins over the
/// spec's own seed.
pub fn build_function(
    spec: &FunctionSpec,
    lattice: Lattice,
    seed_override: Option<u64>,
) -> Result<(SpectralFunction, Option<u64>), Error> {
    match spec {
        FunctionSpec::Constant { value } => {
            Ok((SpectralFunction::constant(lattice, Complex64::new(*value, 0.0)), None))
        }
        FunctionSpec::Mode { k, re, im } => {
            let mut f = SpectralFunction::zero(lattice);
            f.set_coeff(*k, Complex64::new(*re, *im))?;
            if *k != [0, 0] {
                f.set_coeff([-k[0], -k[1]], Complex64::new(*re, -*im))?;
            }
            f.hermitize();
            Ok((f, None))
        }
        FunctionSpec::Modes { modes } => {
            let mut f = SpectralFunction::zero(lattice);
            for m in modes {
                f.set_coeff(m.k, Complex64::new(m.re, m.im))?;
            }
            if f.is_hermitian(1e-15) {
                f.hermitize();
            }
            Ok((f, None))
        }
        FunctionSpec::Random { decay, seed, normalize } => {
            let used = seed_override.or(*seed).unwrap_or(0);
            let mut f = random_function(lattice, *decay, used);
            if let Some(n) = normalize {
                normalize_to(&mut f, nx(n.order), n.value)?;
            }
            Ok((f, Some(used)))
        }
    }
}

/// Instantiate the configured problem on the configured lattice.
pub fn build_problem(
    cfg: &ProblemConfig,
    lattice: LatticeConfig,
) -> Result<Box<dyn TameProblem>, Error> {
    match cfg {
        ProblemConfig::LinearMultiplier { power } => {
            let lat = build_lattice(lattice)?;
            Ok(Box::new(power_multiplier_problem(lat, *power)?))
        }
        ProblemConfig::Quadratic => {
            let lat = build_lattice(lattice)?;
            Ok(Box::new(quadratic_problem(lat)?))
        }
        ProblemConfig::SmallDivisor { omega, d0 } => {
            if lattice.d != 2 {
                return Err(Error::ProblemSetup(format!(
                    "small-divisor needs a two-dimensional lattice, got d = {}",
                    lattice.d
                )));
            }
            Ok(Box::new(small_divisor_problem(lattice.nmax, *omega, *d0)?))
        }
        ProblemConfig::Transport { profile, omega, d0 } => {
            if lattice.d != 2 {
                return Err(Error::ProblemSetup(format!(
                    "transport needs a two-dimensional lattice, got d = {}",
                    lattice.d
                )));
            }
            let lat = build_lattice(lattice)?;
            let (v, _) = build_function(profile, lat, None)?;
            Ok(Box::new(transport_problem(lattice.nmax, &v, *omega, *d0)?))
        }
    }
}
