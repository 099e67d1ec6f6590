//! Two explicit functions that separate nearby regularity notions on the
//! lattice scale.
//!
//! * [`borderline_example`]: coefficients built from the integral
//!   `u_k = int_{2|k|/3}^{2|k|} theta^{-beta} d theta`. Its partial sums at
//!   the critical exponent `beta - 3/2` grow like `2 C_beta^2 ln N`, so the
//!   function misses the critical space while lying in every space below;
//!   the single-band pieces `u_theta` decay one order faster than the
//!   borderline rate.
//! * [`block_bounded_example`]: coefficients `<k>^{-a-1/2}`. Every dyadic
//!   block has norm bounded at order `a` (squares approach `2 ln 2`), yet
//!   the smoothed norms grow linearly in the block index, so uniform block
//!   bounds do not give membership at order `a`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit_line, LineFit};
use crate::scale::{Lattice, SpectralFunction};

/// One sampled point of a named series, for table output.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesPoint {
    pub series: String,
    /// Regularity exponent the series was measured at.
    pub exponent: f64,
    /// Abscissa: cutoff `N`, band centre `theta`, or block index `j`.
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeSummary {
    pub series: String,
    pub exponent: f64,
    pub fitted: f64,
    pub predicted: f64,
    pub rms_residual: f64,
}

/// Closed form of the coefficient integral: `c(beta) |k|^{1-beta}`.
fn coeff_constant(beta: f64) -> f64 {
    if (beta - 1.0).abs() < 1e-12 {
        3.0_f64.ln()
    } else {
        let e = 1.0 - beta;
        (2.0_f64.powf(e) - (2.0 / 3.0_f64).powf(e)) / e
    }
}

fn simpson(f: impl Fn(f64) -> f64 + Copy, lo: f64, hi: f64, panels: usize) -> f64 {
    let n = panels * 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Independent evaluation of the coefficient integral by Simpson panels
/// with one Richardson refinement step.
fn coeff_by_quadrature(k: f64, beta: f64) -> f64 {
    let f = move |t: f64| t.powf(-beta);
    let (lo, hi) = (2.0 * k / 3.0, 2.0 * k);
    let coarse = simpson(f, lo, hi, 256);
    let fine = simpson(f, lo, hi, 512);
    fine + (fine - coarse) / 15.0
}

#[derive(Debug, Clone, Serialize)]
pub struct BorderlineReport {
    pub beta: f64,
    /// `beta - 3/2`: the first exponent the function fails to reach.
    pub critical: f64,
    /// Constant in the closed-form coefficients `c(beta) |k|^{1-beta}`.
    pub coeff_constant: f64,
    /// Worst relative gap between stored coefficients and quadrature.
    pub max_quadrature_rel_err: f64,
    /// Partial sums of the critical-norm square against `ln N`.
    pub psum_fit: LineFit,
    pub psum_predicted: f64,
    /// Fits of `ln |u_theta|_a` against `ln theta` at the probe exponents.
    pub block_fits: Vec<SlopeSummary>,
    /// `P_{2N} / P_N` just below the critical exponent at `N = 2^19`.
    pub subcritical_exponent: f64,
    pub subcritical_ratio: f64,
    pub points: Vec<SeriesPoint>,
    #[serde(skip)]
    pub function: SpectralFunction,
}

/// Build the borderline function on a one-dimensional lattice and measure
/// its norm growth. `probe` are two exponents straddling the critical one
/// from strictly below and above.
pub fn borderline_example(nmax: i64, beta: f64, probe: (f64, f64)) -> Result<BorderlineReport> {
    if !(beta > 1.5) {
        return Err(Error::CounterexampleSetup(format!(
            "need beta > 3/2 so the critical exponent is positive, got beta = {beta}"
        )));
    }
    let critical = beta - 1.5;
    let (a_lo, a_hi) = probe;
    if !(0.0 <= a_lo && a_lo < critical && critical < a_hi) {
        return Err(Error::CounterexampleSetup(format!(
            "probe exponents must satisfy 0 <= {a_lo} < {critical} < {a_hi}"
        )));
    }
    if nmax < 4 {
        return Err(Error::CounterexampleSetup(format!("lattice too small: nmax = {nmax}")));
    }
    let lattice = Lattice::new(1, nmax)?;
    let cb = coeff_constant(beta);
    let coeff = |k: f64| cb * k.powf(1.0 - beta);
    let function = SpectralFunction::from_fn(lattice, |k| {
        if k[0] == 0 {
            0.0.into()
        } else {
            coeff((k[0].abs()) as f64).into()
        }
    });

    // Spot-check the closed form against quadrature on small and dyadic
    // modes.
    let mut max_quadrature_rel_err: f64 = 0.0;
    let mut probes: Vec<i64> = (1..=64.min(nmax)).collect();
    let mut m = 128;
    while m <= nmax {
        probes.push(m);
        m *= 2;
    }
    for k in probes {
        let q = coeff_by_quadrature(k as f64, beta);
        let c = coeff(k as f64);
        max_quadrature_rel_err = max_quadrature_rel_err.max((q - c).abs() / c.abs());
    }

    let mut points = Vec::new();

    // Partial sums at the critical exponent over N = 2^8 .. 2^14.
    let cutoffs: Vec<i64> = (8..=14).map(|e| 1_i64 << e).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sum = 0.0;
    let mut next = 0;
    for k in 1..=*cutoffs.last().unwrap() {
        let c = coeff(k as f64);
        sum += 2.0 * c * c * Lattice::weight([k, 0], critical);
        if k == cutoffs[next] {
            xs.push((k as f64).ln());
            ys.push(sum);
            points.push(SeriesPoint {
                series: "critical-psum".into(),
                exponent: critical,
                x: k as f64,
                value: sum,
            });
            next += 1;
        }
    }
    let psum_fit = fit_line(&xs, &ys)?;
    let psum_predicted = 2.0 * cb * cb;

    // Single-band pieces u_theta at the probe exponents, theta = 2^5..2^12.
    let mut block_fits = Vec::new();
    for &a in &[a_lo, a_hi] {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for e in 5..=12 {
            let theta = (1_i64 << e) as f64;
            let lo = (theta / 2.0).ceil() as i64;
            let hi = (3.0 * theta / 2.0).floor() as i64;
            let mut s2 = 0.0;
            for k in lo..=hi {
                s2 += 2.0 * theta.powf(-2.0 * beta) * Lattice::weight([k, 0], a);
            }
            let norm = s2.sqrt();
            xs.push(theta.ln());
            ys.push(norm.ln());
            points.push(SeriesPoint {
                series: "band-norm".into(),
                exponent: a,
                x: theta,
                value: norm,
            });
        }
        let fit = fit_line(&xs, &ys)?;
        block_fits.push(SlopeSummary {
            series: "band-norm".into(),
            exponent: a,
            fitted: fit.slope,
            predicted: a - beta + 0.5,
            rms_residual: fit.rms_residual,
        });
    }

    // Just below the critical exponent the partial sums converge: the
    // doubling ratio approaches 1.
    let subcritical_exponent = critical - 0.1_f64.min(critical / 2.0);
    let n_ref = 1_i64 << 19;
    let mut p_n = 0.0;
    let mut p_2n = 0.0;
    for k in 1..=2 * n_ref {
        let c = coeff(k as f64);
        let term = 2.0 * c * c * Lattice::weight([k, 0], subcritical_exponent);
        p_2n += term;
        if k <= n_ref {
            p_n += term;
        }
    }
    let subcritical_ratio = p_2n / p_n;

    Ok(BorderlineReport {
        beta,
        critical,
        coeff_constant: cb,
        max_quadrature_rel_err,
        psum_fit,
        psum_predicted,
        block_fits,
        subcritical_exponent,
        subcritical_ratio,
        points,
        function,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockBoundedReport {
    /// Exponent at which the block norms are uniformly bounded.
    pub exponent: f64,
    /// Squared block norms over j = 3..12 stay inside a narrow band...
    pub block_sq_min: f64,
    pub block_sq_max: f64,
    pub block_sq_ratio: f64,
    /// ...while the smoothed norm squares grow linearly in j.
    pub growth_fit: LineFit,
    pub growth_predicted: f64,
    pub points: Vec<SeriesPoint>,
    #[serde(skip)]
    pub function: SpectralFunction,
}

/// Build `u_k = <k>^{-a-1/2}` on a one-dimensional lattice and measure its
/// dyadic block norms and smoothed norm growth at order `a`.
pub fn block_bounded_example(nmax: i64, a: f64) -> Result<BlockBoundedReport> {
    if !a.is_finite() || a < 0.0 {
        return Err(Error::CounterexampleSetup(format!(
            "exponent must be finite and nonnegative, got {a}"
        )));
    }
    if nmax < 8 {
        return Err(Error::CounterexampleSetup(format!("lattice too small: nmax = {nmax}")));
    }
    let lattice = Lattice::new(1, nmax)?;
    let function =
        SpectralFunction::from_fn(lattice, |k| Lattice::weight(k, -(a + 0.5) / 2.0).into());

    // At order a every coefficient weight collapses to <k>^{-1}; the block
    // and partial sums below are exact for any a.
    let mut points = Vec::new();
    let mut blocks = Vec::new();
    for j in 3..=12 {
        let lo = (1_i64 << j) + 1;
        let hi = 1_i64 << (j + 1);
        let mut s2 = 0.0;
        for k in lo..=hi {
            s2 += 2.0 * Lattice::weight([k, 0], -0.5);
        }
        blocks.push(s2);
        points.push(SeriesPoint {
            series: "block-sq".into(),
            exponent: a,
            x: j as f64,
            value: s2,
        });
    }
    let block_sq_min = blocks.iter().copied().fold(f64::INFINITY, f64::min);
    let block_sq_max = blocks.iter().copied().fold(0.0, f64::max);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 3..=12 {
        let mut s2 = 1.0;
        for k in 1..=(1_i64 << j) {
            s2 += 2.0 * Lattice::weight([k, 0], -0.5);
        }
        points.push(SeriesPoint {
            series: "smoothed-sq".into(),
            exponent: a,
            x: j as f64,
            value: s2,
        });
        if j >= 6 {
            xs.push(j as f64);
            ys.push(s2);
        }
    }
    let growth_fit = fit_line(&xs, &ys)?;

    Ok(BlockBoundedReport {
        exponent: a,
        block_sq_min,
        block_sq_max,
        block_sq_ratio: block_sq_max / block_sq_min,
        growth_fit,
        growth_predicted: 2.0 * 2.0_f64.ln(),
        points,
        function,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::nx;

    #[test]
    fn quadratic_decay_coefficients_are_exactly_one_over_k() {
        // beta = 2 makes the coefficient constant exactly 1.
        let r = borderline_example(256, 2.0, (0.25, 1.0)).unwrap();
        assert!((r.coeff_constant - 1.0).abs() < 1e-15);
        for (k, c) in r.function.iter() {
            if k[0] == 0 {
                assert_eq!(c.norm(), 0.0);
            } else {
                let want = 1.0 / (k[0].abs() as f64);
                assert!((c.re - want).abs() <= 1e-12 * want);
                assert_eq!(c.im, 0.0);
            }
        }
        assert!(r.max_quadrature_rel_err < 1e-12);
    }

    #[test]
    fn critical_partial_sums_grow_at_the_predicted_log_rate() {
        let r = borderline_example(64, 2.0, (0.25, 1.0)).unwrap();
        assert!((r.psum_fit.slope - 1.999181059292).abs() < 1e-6);
        assert!((r.psum_predicted - 2.0).abs() < 1e-15);
        assert!((r.psum_fit.slope - r.psum_predicted).abs() / r.psum_predicted < 0.05);
    }

    #[test]
    fn band_norms_decay_one_order_beyond_the_borderline_rate() {
        let r = borderline_example(64, 2.0, (0.25, 1.0)).unwrap();
        let lo = &r.block_fits[0];
        let hi = &r.block_fits[1];
        assert!((lo.fitted - -1.252630137275).abs() < 1e-6);
        assert!((hi.fitted - -0.503152525854).abs() < 1e-6);
        assert!((lo.fitted - lo.predicted).abs() / lo.predicted.abs() < 0.05);
        assert!((hi.fitted - hi.predicted).abs() / hi.predicted.abs() < 0.05);
    }

    #[test]
    fn subcritical_sums_stabilise() {
        let r = borderline_example(64, 2.0, (0.25, 1.0)).unwrap();
        assert!(r.subcritical_ratio < 1.01);
        assert!(r.subcritical_ratio > 1.0);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(borderline_example(64, 1.2, (0.0, 1.0)).is_err());
        assert!(borderline_example(64, 2.0, (0.6, 1.0)).is_err());
        assert!(block_bounded_example(64, -1.0).is_err());
    }

    #[test]
    fn block_norms_stay_in_a_narrow_band_while_smoothed_norms_grow() {
        let r = block_bounded_example(64, 1.0).unwrap();
        assert!((r.block_sq_min - 1.3207146331).abs() < 1e-9);
        assert!((r.block_sq_max - 1.3861722759).abs() < 1e-9);
        assert!(r.block_sq_ratio < 1.3);
        assert!((r.growth_fit.slope - 1.3840085086).abs() < 1e-9);
        let rel = (r.growth_fit.slope - r.growth_predicted).abs() / r.growth_predicted;
        assert!(rel < 0.1);
    }

    #[test]
    fn block_bounded_function_has_the_stated_coefficients() {
        let r = block_bounded_example(32, 1.5).unwrap();
        let c = r.function.coeff([4, 0]).re;
        assert!((c - (17.0_f64).powf(-1.0)).abs() < 1e-15);
        assert!(r.function.sobolev_norm(nx(0.0)).is_finite());
    }
}
