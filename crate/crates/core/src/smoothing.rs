//! Graded smoothing families acting diagonally in Fourier space.
//!
//! A family `S_θ`, θ ≥ 1, scales mode k by a cutoff profile evaluated at
//! |k|/θ: either a sharp indicator of |k| ≤ θ or a C^∞ profile that equals 1
//! up to θ and vanishes beyond 2θ. A velocity sequence θ_j grades the family
//! into difference blocks R_0 = S_{θ_1}, R_j = S_{θ_{j+1}} - S_{θ_j}, which
//! is how the iteration consumes it.
//!
//! All levels are handled through log2(θ_j): doubly exponential velocities
//! overflow f64 as raw θ values long before they stop being meaningful, and
//! log-space comparisons also make sharp cutoff boundaries exact at dyadic
//! mode radii.
//!
//! The measurement entry points ([`SmoothingFamily::measure_axioms`],
//! [`SmoothingFamily::measure_orthogonality`],
//! [`SmoothingFamily::velocity_loss_exponent`]) treat the family as a lab
//! instrument: they report suprema of the ratios that the iteration's
//! convergence proof needs, so that the constants fed to the parameter
//! checks are measured rather than assumed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_line, LineFit};
use crate::scale::{Lattice, NormExponent, SpectralFunction};

/// Level index beyond which we refuse to search; log2(θ) is astronomically
/// large for every admissible velocity well before this.
const LEVEL_CAP: u64 = 1 << 62;

fn bump(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// C^∞ transition profile: 1 on (-∞, 1], 0 on [2, ∞), strictly decreasing
/// in between, with ψ(3/2) = 1/2.
pub fn psi_profile(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let up = bump(2.0 - t);
        up / (up + bump(t - 1.0))
    }
}

/// Shape of the Fourier multiplier of `S_θ` as a function of |k|/θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffShape {
    /// Indicator of |k| ≤ θ.
    Sharp,
    /// C^∞ profile `psi_profile(|k|/θ)`, supported on |k| < 2θ.
    Smooth,
}

impl CutoffShape {
    /// Multiplier value given `d = log2(|k|) - log2(θ)`.
    #[inline]
    pub(crate) fn value_at_log_offset(self, d: f64) -> f64 {
        match self {
            CutoffShape::Sharp => {
                if d <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            CutoffShape::Smooth => {
                if d <= 0.0 {
                    1.0
                } else if d >= 1.0 {
                    0.0
                } else {
                    psi_profile(d.exp2())
                }
            }
        }
    }
}

/// Growth law of the level sequence θ_j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Velocity {
    /// θ_j = 2^j.
    Dyadic,
    /// θ_j = ratio^j, ratio > 1.
    Geometric { ratio: f64 },
    /// θ_j = (offset + j)^power, offset ≥ 1, power > 0. Consecutive levels
    /// approach each other: θ_{j+1}/θ_j → 1.
    Polynomial { offset: f64, power: f64 },
    /// θ_j = base^(chi^j), base > 1, chi > 1. The ratio θ_{j+1}/θ_j is
    /// unbounded, which is what the loss-exponent bench detects.
    DoublyExponential { base: f64, chi: f64 },
}

impl Velocity {
    pub fn validate(self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidVelocity(msg));
        match self {
            Velocity::Dyadic => Ok(()),
            Velocity::Geometric { ratio } => {
                if ratio.is_finite() && ratio > 1.0 {
                    Ok(())
                } else {
                    bad(format!("geometric ratio must be > 1, got {ratio}"))
                }
            }
            Velocity::Polynomial { offset, power } => {
                if offset.is_finite() && offset >= 1.0 && power.is_finite() && power > 0.0 {
                    Ok(())
                } else {
                    bad(format!("polynomial needs offset >= 1 and power > 0, got ({offset}, {power})"))
                }
            }
            Velocity::DoublyExponential { base, chi } => {
                if base.is_finite() && base > 1.0 && chi.is_finite() && chi > 1.0 {
                    Ok(())
                } else {
                    bad(format!("doubly exponential needs base > 1 and chi > 1, got ({base}, {chi})"))
                }
            }
        }
    }

    /// log2(θ_j). Strictly increasing in j for every admissible velocity.
    pub fn log2_theta(self, j: u64) -> f64 {
        match self {
            Velocity::Dyadic => j as f64,
            Velocity::Geometric { ratio } => j as f64 * ratio.log2(),
            Velocity::Polynomial { offset, power } => power * (offset + j as f64).log2(),
            Velocity::DoublyExponential { base, chi } => chi.powf(j as f64) * base.log2(),
        }
    }

    /// Whether sup_j θ_{j+1}/θ_j is finite. Families with bounded ratio
    /// incur no extra loss of regularity from the level spacing.
    pub fn bounded_ratio(self) -> bool {
        !matches!(self, Velocity::DoublyExponential { .. })
    }

    /// Predicted loss exponent for a measurement with norm-order gap
    /// `b - a - 1`: zero for bounded-ratio velocities, `(chi - 1)(b - a - 1)`
    /// for doubly exponential ones.
    pub fn predicted_loss(self, order_gap: f64) -> f64 {
        match self {
            Velocity::DoublyExponential { chi, .. } => (chi - 1.0) * order_gap,
            _ => 0.0,
        }
    }
}

/// Cutoff shape + velocity: everything needed to evaluate `S_{θ_j}` and its
/// blocks on a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingFamily {
    pub shape: CutoffShape,
    pub velocity: Velocity,
}

/// Test material for axiom scans.
pub enum TestFunctions {
    /// Every single Fourier mode of the lattice; ratios are evaluated in
    /// closed form, so this is both the sharpest and the cheapest choice.
    SingleModes,
    /// Explicit functions; ratios are measured through actual norms.
    Explicit(Vec<SpectralFunction>),
}

/// Which inequality of the smoothing family a measurement exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingAxiom {
    /// ‖S_θ u‖_b ≤ C ‖u‖_a for b ≤ a.
    LowNormBound,
    /// ‖S_θ u‖_b ≤ C θ^(b-a) ‖u‖_a for b ≥ a.
    HighNormGrowth,
    /// ‖u - S_θ u‖_b ≤ C θ^(b-a) ‖u‖_a for b ≤ a.
    ApproximationDecay,
    /// ‖(S_θ' - S_θ) u‖_b ≤ C (θ' - θ) θ^(b-a-1) ‖u‖_a across consecutive
    /// levels, measured for any sign of b - a.
    IncrementBound,
}

/// One measured constant: the supremum of the ratio for an axiom at a fixed
/// exponent pair, together with where the supremum was attained.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomMeasurement {
    pub axiom: SmoothingAxiom,
    pub a: f64,
    pub b: f64,
    pub constant: f64,
    pub worst_level: u64,
    pub worst_mode: Option<[i64; 2]>,
    pub worst_function: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomScan {
    pub rows: Vec<AxiomMeasurement>,
}

impl AxiomScan {
    pub fn constant(&self, axiom: SmoothingAxiom, a: f64, b: f64) -> Option<&AxiomMeasurement> {
        self.rows.iter().find(|m| m.axiom == axiom && m.a == a && m.b == b)
    }
}

/// Per-mode row of an orthogonality measurement. `weight` is the sum of
/// squared block multipliers at this mode, `ratio` its reciprocal: the
/// smallest constant C with |û_k|² ≤ C Σ_j |(R_j u)^(k)|² at this mode.
#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalityRow {
    pub mode: [i64; 2],
    pub weight: f64,
    pub ratio: f64,
    /// Number of levels whose block multiplier changes at this mode.
    pub window: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalityReport {
    /// sup over scanned modes of 1/weight: the best constant C in
    /// ‖u‖_a² ≤ C Σ_j ‖R_j u‖_a² valid for every u supported on the scanned
    /// modes (the bound is attained on single modes, and the constant is
    /// independent of the norm order a because the blocks are diagonal).
    pub sup_ratio: f64,
    pub worst_mode: [i64; 2],
    /// True when every lattice mode was scanned; false when the per-mode
    /// level windows were too wide and only axis modes at dyadic radii were
    /// measured (in that case `sup_ratio` is a lower bound for the true sup).
    pub exhaustive: bool,
    pub rows: Vec<OrthogonalityRow>,
}

/// One level of a velocity-loss measurement.
#[derive(Debug, Clone, Serialize)]
pub struct VelocityLossRow {
    pub level: u64,
    pub log2_theta: f64,
    /// log2 of sup over modes m ≥ 1 of ‖(S_{θ_{j+1}} - S_{θ_j}) e_m‖_b
    /// divided by (θ_{j+1} - θ_j) ‖e_m‖_a.
    pub log2_measured: f64,
    pub samples: u64,
    pub full_scan: bool,
}

/// Fitted loss exponent: slope of log2(measured) against log2(θ_j), minus
/// the exponent `b - a - 1` that a bounded-ratio family produces on its own.
#[derive(Debug, Clone, Serialize)]
pub struct VelocityLossEstimate {
    pub sigma_hat: f64,
    pub order_gap: f64,
    pub fit: LineFit,
    pub predicted: f64,
    pub rows: Vec<VelocityLossRow>,
}

impl SmoothingFamily {
    pub fn new(shape: CutoffShape, velocity: Velocity) -> Result<Self> {
        velocity.validate()?;
        Ok(Self { shape, velocity })
    }

    #[inline]
    pub fn log2_theta(&self, j: u64) -> f64 {
        self.velocity.log2_theta(j)
    }

    /// θ_j as a plain float; +∞ once the level leaves f64 range.
    pub fn theta(&self, j: u64) -> f64 {
        self.log2_theta(j).exp2()
    }

    /// Fourier multiplier of S_{θ_j} at mode k.
    #[inline]
    pub fn multiplier(&self, j: u64, k: [i64; 2]) -> f64 {
        let ksq = (k[0] * k[0] + k[1] * k[1]) as f64;
        if ksq == 0.0 {
            return 1.0;
        }
        self.shape.value_at_log_offset(0.5 * ksq.log2() - self.log2_theta(j))
    }

    /// S_{θ_j} u.
    pub fn apply_s(&self, j: u64, u: &SpectralFunction) -> SpectralFunction {
        let mut out = u.clone();
        let lat = u.lattice();
        for i in 0..lat.len() {
            out.coeffs_mut()[i] *= self.multiplier(j, lat.point(i));
        }
        out
    }

    /// Block R_j: R_0 = S_{θ_1}, and R_j = S_{θ_{j+1}} - S_{θ_j} for j ≥ 1.
    pub fn apply_r(&self, j: u64, u: &SpectralFunction) -> SpectralFunction {
        if j == 0 {
            return self.apply_s(1, u);
        }
        let mut out = u.clone();
        let lat = u.lattice();
        for i in 0..lat.len() {
            let k = lat.point(i);
            out.coeffs_mut()[i] *= self.multiplier(j + 1, k) - self.multiplier(j, k);
        }
        out
    }

    /// Smallest j ≥ `lo` with `pred(log2 θ_j)`, assuming monotonicity;
    /// capped at LEVEL_CAP.
    fn first_level(&self, lo: u64, pred: impl Fn(f64) -> bool) -> u64 {
        if pred(self.log2_theta(lo)) {
            return lo;
        }
        let mut hi = lo.max(1);
        while !pred(self.log2_theta(hi)) {
            if hi >= LEVEL_CAP {
                return LEVEL_CAP;
            }
            hi = (hi * 2).min(LEVEL_CAP);
        }
        // invariant: !pred at lo_b, pred at hi
        let mut lo_b = lo.max(hi / 2);
        while hi - lo_b > 1 {
            let mid = lo_b + (hi - lo_b) / 2;
            if pred(self.log2_theta(mid)) {
                hi = mid;
            } else {
                lo_b = mid;
            }
        }
        hi
    }

    /// Smallest level j with S_{θ_j} = identity on `lattice`, i.e. with
    /// θ_j at least the outermost mode radius. Blocks R_j vanish for
    /// j ≥ saturation_level, so sums over blocks are finite sums.
    pub fn saturation_level(&self, lattice: Lattice) -> u64 {
        let target = lattice.radius().log2();
        self.first_level(0, |l| l >= target)
    }

    /// Levels j ≥ 1 whose increment multiplier m_{j+1}(k) - m_j(k) can be
    /// nonzero at mode k: a half-open range `start..end`. None when the mode
    /// is already saturated at level 1.
    fn block_window(&self, k: [i64; 2]) -> Option<(u64, u64)> {
        let ksq = (k[0] * k[0] + k[1] * k[1]) as f64;
        if ksq == 0.0 {
            return None;
        }
        let lk = 0.5 * ksq.log2();
        if self.log2_theta(1) >= lk {
            return None;
        }
        // m_{j+1}(k) > 0 needs log2 θ_{j+1} > lk - 1; m_j(k) < 1 needs
        // log2 θ_j < lk. (For the sharp shape the first condition is
        // slightly loose, which only widens the window.)
        let js = self.first_level(0, |l| l > lk - 1.0);
        let start = js.saturating_sub(1).max(1);
        let end = self.first_level(1, |l| l >= lk);
        Some((start, end))
    }

    /// Σ over blocks of the squared multiplier at mode k:
    /// m_1(k)² + Σ_{j≥1} (m_{j+1}(k) - m_j(k))². Equals 1 exactly for the
    /// sharp shape (each mode sits in exactly one block).
    pub fn block_weight(&self, k: [i64; 2]) -> f64 {
        let m1 = self.multiplier(1, k);
        let mut w = m1 * m1;
        let Some((start, end)) = self.block_window(k) else {
            return w;
        };
        let mut prev = self.multiplier(start, k);
        for j in start..end {
            let next = self.multiplier(j + 1, k);
            let d = next - prev;
            w += d * d;
            prev = next;
        }
        w
    }

    /// Measure the orthogonality constant over the lattice. When the total
    /// number of level increments across all modes exceeds `work_budget`,
    /// only axis modes at dyadic radii are scanned (enough to demonstrate
    /// an unbounded constant, which is the regime where full scans are
    /// unaffordable).
    pub fn measure_orthogonality(&self, lattice: Lattice, work_budget: u64) -> OrthogonalityReport {
        let mut total: u64 = 0;
        let mut exhaustive = true;
        for i in 0..lattice.len() {
            if let Some((s, e)) = self.block_window(lattice.point(i)) {
                total = total.saturating_add(e - s);
            }
            if total > work_budget {
                exhaustive = false;
                break;
            }
        }

        let report_radii: Vec<i64> = {
            let mut v = Vec::new();
            let mut m: i64 = 1;
            while m <= lattice.nmax {
                v.push(m);
                m *= 2;
            }
            if *v.last().unwrap_or(&0) != lattice.nmax {
                v.push(lattice.nmax);
            }
            v
        };

        let mut sup_ratio = f64::NEG_INFINITY;
        let mut worst_mode = [0, 0];
        let mut rows: Vec<OrthogonalityRow> = Vec::new();
        let eval = |k: [i64; 2]| {
            let w = self.block_weight(k);
            let window = self.block_window(k).map_or(0, |(s, e)| e - s);
            OrthogonalityRow { mode: k, weight: w, ratio: 1.0 / w, window }
        };

        if exhaustive {
            for i in 0..lattice.len() {
                let k = lattice.point(i);
                let ratio = 1.0 / self.block_weight(k);
                if ratio > sup_ratio {
                    sup_ratio = ratio;
                    worst_mode = k;
                }
            }
            for &m in &report_radii {
                rows.push(eval([m, 0]));
            }
            // make sure the worst mode is visible in the report
            if !rows.iter().any(|r| r.mode == worst_mode) {
                rows.push(eval(worst_mode));
            }
        } else {
            for &m in &report_radii {
                let row = eval([m, 0]);
                if row.ratio > sup_ratio {
                    sup_ratio = row.ratio;
                    worst_mode = row.mode;
                }
                rows.push(row);
            }
        }

        OrthogonalityReport { sup_ratio, worst_mode, exhaustive, rows }
    }

    /// Measure the axiom constants of the family over `pairs` of norm
    /// orders (a, b), levels 0..=j_max. For each pair, the axioms whose
    /// order condition it satisfies are measured.
    pub fn measure_axioms(
        &self,
        lattice: Lattice,
        test: &TestFunctions,
        pairs: &[(f64, f64)],
        j_max: u64,
    ) -> Result<AxiomScan> {
        if let TestFunctions::Explicit(fns) = test {
            if fns.is_empty() {
                return Err(Error::EmptyTestSet);
            }
        }
        let mut rows = Vec::new();
        for &(a, b) in pairs {
            NormExponent::new(a)?;
            NormExponent::new(b)?;
            let mut axioms = Vec::new();
            if b <= a {
                axioms.push(SmoothingAxiom::LowNormBound);
                axioms.push(SmoothingAxiom::ApproximationDecay);
            }
            if b >= a {
                axioms.push(SmoothingAxiom::HighNormGrowth);
            }
            axioms.push(SmoothingAxiom::IncrementBound);
            for axiom in axioms {
                rows.push(match test {
                    TestFunctions::SingleModes => self.axiom_sup_modes(lattice, a, b, j_max, axiom),
                    TestFunctions::Explicit(fns) => self.axiom_sup_explicit(fns, a, b, j_max, axiom),
                });
            }
        }
        Ok(AxiomScan { rows })
    }

    /// log2(θ_{j+1} - θ_j), formed without leaving log space.
    fn log2_dtheta(&self, j: u64) -> f64 {
        let l0 = self.log2_theta(j);
        let l1 = self.log2_theta(j + 1);
        let delta = l1 - l0;
        // θ_{j+1} - θ_j = θ_{j+1} (1 - 2^-δ)
        l1 + (-(-delta * std::f64::consts::LN_2).exp()).ln_1p() / std::f64::consts::LN_2
    }

    fn axiom_sup_modes(
        &self,
        lattice: Lattice,
        a: f64,
        b: f64,
        j_max: u64,
        axiom: SmoothingAxiom,
    ) -> AxiomMeasurement {
        let mut best = f64::NEG_INFINITY;
        let mut worst_level = 0;
        let mut worst_mode = None;
        for j in 0..=j_max {
            let lt = self.log2_theta(j);
            let ldt = if axiom == SmoothingAxiom::IncrementBound { self.log2_dtheta(j) } else { 0.0 };
            for i in 0..lattice.len() {
                let k = lattice.point(i);
                let lang = 0.5 * (1.0 + Lattice::k_sq(k)).log2();
                let m = self.multiplier(j, k);
                let lr = match axiom {
                    SmoothingAxiom::LowNormBound => {
                        if m <= 0.0 {
                            continue;
                        }
                        m.log2() + (b - a) * lang
                    }
                    SmoothingAxiom::HighNormGrowth => {
                        if m <= 0.0 {
                            continue;
                        }
                        m.log2() + (b - a) * (lang - lt)
                    }
                    SmoothingAxiom::ApproximationDecay => {
                        let r = 1.0 - m;
                        if r <= 0.0 {
                            continue;
                        }
                        r.log2() + (b - a) * (lang - lt)
                    }
                    SmoothingAxiom::IncrementBound => {
                        let dm = self.multiplier(j + 1, k) - m;
                        if dm <= 0.0 {
                            continue;
                        }
                        dm.log2() + (b - a) * lang - ldt - (b - a - 1.0) * lt
                    }
                };
                if lr > best {
                    best = lr;
                    worst_level = j;
                    worst_mode = Some(k);
                }
            }
        }
        AxiomMeasurement {
            axiom,
            a,
            b,
            constant: best.exp2(),
            worst_level,
            worst_mode,
            worst_function: None,
        }
    }

    fn axiom_sup_explicit(
        &self,
        fns: &[SpectralFunction],
        a: f64,
        b: f64,
        j_max: u64,
        axiom: SmoothingAxiom,
    ) -> AxiomMeasurement {
        let log2_norm = |u: &SpectralFunction, order: f64, mult: &dyn Fn([i64; 2]) -> f64| -> f64 {
            let lat = u.lattice();
            let mut s = 0.0;
            for (i, &c) in u.coeffs().iter().enumerate() {
                let k = lat.point(i);
                let m = mult(k);
                if m == 0.0 {
                    continue;
                }
                s += m * m * c.norm_sqr() * Lattice::weight(k, order);
            }
            0.5 * s.log2()
        };
        let mut best = f64::NEG_INFINITY;
        let mut worst_level = 0;
        let mut worst_function = None;
        for (fi, u) in fns.iter().enumerate() {
            let la = log2_norm(u, a, &|_| 1.0);
            if !la.is_finite() {
                continue; // zero test function
            }
            for j in 0..=j_max {
                let lt = self.log2_theta(j);
                let lr = match axiom {
                    SmoothingAxiom::LowNormBound => log2_norm(u, b, &|k| self.multiplier(j, k)) - la,
                    SmoothingAxiom::HighNormGrowth => {
                        log2_norm(u, b, &|k| self.multiplier(j, k)) - la - (b - a) * lt
                    }
                    SmoothingAxiom::ApproximationDecay => {
                        log2_norm(u, b, &|k| 1.0 - self.multiplier(j, k)) - la - (b - a) * lt
                    }
                    SmoothingAxiom::IncrementBound => {
                        log2_norm(u, b, &|k| self.multiplier(j + 1, k) - self.multiplier(j, k))
                            - la
                            - self.log2_dtheta(j)
                            - (b - a - 1.0) * lt
                    }
                };
                if lr > best {
                    best = lr;
                    worst_level = j;
                    worst_function = Some(fi);
                }
            }
        }
        AxiomMeasurement {
            axiom,
            a,
            b,
            constant: best.exp2(),
            worst_level,
            worst_mode: None,
            worst_function,
        }
    }

    /// Measure how much regularity the level spacing itself costs.
    ///
    /// For each level j in `j_lo..=j_hi` the increment operator
    /// S_{θ_{j+1}} - S_{θ_j} is applied to single modes m ≥ 1 (one
    /// dimension, no lattice truncation: the supremum must be taken where
    /// the increment lives, which for fast velocities is far outside any
    /// affordable lattice). The sup of ‖increment · e_m‖_b / ‖e_m‖_a is
    /// divided by θ_{j+1} - θ_j and fitted against log2 θ_j; a family whose
    /// ratio θ_{j+1}/θ_j is bounded fits slope b - a - 1, and the excess
    /// `sigma_hat` is the measured loss exponent.
    pub fn velocity_loss_exponent(
        &self,
        a: f64,
        b: f64,
        j_lo: u64,
        j_hi: u64,
    ) -> Result<VelocityLossEstimate> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidFitExponents { a, b });
        }
        if j_hi < j_lo + 1 {
            return Err(Error::FitWindowTooShort { need: 2, got: (j_hi + 1 - j_lo.min(j_hi + 1)) as usize });
        }
        const FULL_SCAN_LIMIT: f64 = 200_000.0;
        const LOG_SAMPLES: usize = 100_001;

        let gap = b - a;
        let log2_angle = |e: f64| -> f64 {
            // log2 <m> for log2 m = e
            if 2.0 * e < 1020.0 {
                0.5 * (1.0 + (2.0 * e).exp2()).log2()
            } else {
                e
            }
        };

        let mut rows = Vec::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for j in j_lo..=j_hi {
            let lt0 = self.log2_theta(j);
            let lt1 = self.log2_theta(j + 1);
            if !lt1.is_finite() {
                break;
            }
            let ldt = self.log2_dtheta(j);
            let mut sup = f64::NEG_INFINITY;
            let mut samples: u64 = 0;
            let mut eval = |lk: f64| {
                let dm = self.shape.value_at_log_offset(lk - lt1) - self.shape.value_at_log_offset(lk - lt0);
                samples += 1;
                if dm > 0.0 {
                    let v = dm.log2() + gap * log2_angle(lk);
                    if v > sup {
                        sup = v;
                    }
                }
            };

            // increments vanish below θ_j and above 2 θ_{j+1}
            let e_lo = lt0.max(0.0);
            let e_hi = lt1 + 1.0;
            let full = e_hi < 60.0 && {
                let lo = e_lo.exp2().floor().max(1.0);
                let hi = e_hi.exp2().ceil();
                hi - lo <= FULL_SCAN_LIMIT
            };
            if full {
                let lo = e_lo.exp2().floor().max(1.0) as u64;
                let hi = e_hi.exp2().ceil() as u64;
                for m in lo..=hi {
                    eval((m as f64).log2());
                }
            } else {
                let integer_grid = e_hi < 53.0;
                let mut prev_m = 0.0f64;
                for s in 0..LOG_SAMPLES {
                    let e = e_lo + (e_hi - e_lo) * s as f64 / (LOG_SAMPLES - 1) as f64;
                    if integer_grid {
                        let m = e.exp2().round().max(1.0);
                        if m == prev_m {
                            continue;
                        }
                        prev_m = m;
                        eval(m.log2());
                    } else {
                        eval(e);
                    }
                }
            }
            if sup.is_finite() {
                rows.push(VelocityLossRow {
                    level: j,
                    log2_theta: lt0,
                    log2_measured: sup - ldt,
                    samples,
                    full_scan: full,
                });
                xs.push(lt0);
                ys.push(sup - ldt);
            }
        }
        if xs.len() < 2 {
            return Err(Error::FitWindowTooShort { need: 2, got: xs.len() });
        }
        let fit = fit_line(&xs, &ys)?;
        let order_gap = b - a - 1.0;
        Ok(VelocityLossEstimate {
            sigma_hat: fit.slope - order_gap,
            order_gap,
            fit,
            predicted: self.velocity.predicted_loss(order_gap),
            rows,
        })
    }
}
