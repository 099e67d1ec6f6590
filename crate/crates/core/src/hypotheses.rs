//! Parameter web and constant ledger for the iteration.
//!
//! The convergence proof hangs on a chain of inequalities between the norm
//! orders (a0 ≤ μ ≤ a1, a1 + β/2 < α < a1 + β, 2α < a1 + a2), a decay rate
//! γ with 2a1 + β + γ ≤ 2α, a smallness threshold δ = 1/B, and per-step
//! growth caps K1..K4. This module validates the orders, derives the
//! constants from the tame bounds of the problem, and evaluates the
//! higher-regularity coefficient recursion together with its closed form.
//!
//! The proof's anonymous multiplicative constants (C*, C′, C_{a,c}, C_c)
//! cannot be extracted from an asymptotic argument; they are configuration
//! inputs defaulting to 1, and the iterator measures their empirical
//! counterparts at run time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One violated parameter inequality, with both sides evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub requirement: &'static str,
    pub detail: String,
}

pub fn render_violations(vs: &[Violation]) -> String {
    if vs.is_empty() {
        return "none".to_string();
    }
    vs.iter()
        .map(|v| format!("{} ({})", v.requirement, v.detail))
        .collect::<Vec<_>>()
        .join("; ")
}

fn one() -> f64 {
    1.0
}

/// Norm orders and aggregate constants steering one iteration run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationParams {
    pub a0: f64,
    pub mu: f64,
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Decay rate of the block sizes; `None` picks the maximal admissible
    /// value 2α - 2a1 - β.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Higher-regularity increment; 0 disables the second-stage bound.
    #[serde(default)]
    pub c: f64,
    /// Decomposition constant of the right-hand side at order β.
    #[serde(rename = "A", default = "one")]
    pub a_decomp: f64,
    /// Decomposition constant at order β + c.
    #[serde(rename = "A_c", default = "one")]
    pub a_decomp_c: f64,
    /// Aggregate constant C* of the step bounds.
    #[serde(rename = "Cstar", default = "one")]
    pub cstar: f64,
    /// Aggregate constant C′ of the smallness threshold.
    #[serde(rename = "Cprime", default = "one")]
    pub cprime: f64,
    /// Generic constant C_{a,c} of the higher-regularity recursion.
    #[serde(rename = "C_ac", default = "one")]
    pub c_ac: f64,
    /// Generic constant C_c of the higher-regularity recursion.
    #[serde(rename = "C_c", default = "one")]
    pub c_c: f64,
}

impl Default for IterationParams {
    /// An admissible layout with all aggregate constants 1 and no
    /// higher-regularity stage.
    fn default() -> Self {
        Self {
            a0: 0.0,
            mu: 0.0,
            a1: 1.0,
            a2: 9.0,
            alpha: 4.0,
            beta: 4.0,
            gamma: None,
            c: 0.0,
            a_decomp: 1.0,
            a_decomp_c: 1.0,
            cstar: 1.0,
            cprime: 1.0,
            c_ac: 1.0,
            c_c: 1.0,
        }
    }
}

impl IterationParams {
    /// Check every inequality the convergence argument needs. Violations
    /// are data, not errors: an empty list means the parameters are
    /// admissible.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut check = |ok: bool, requirement: &'static str, detail: String| {
            if !ok {
                v.push(Violation { requirement, detail });
            }
        };
        let p = *self;
        check(p.a0 >= 0.0, "a0 >= 0", format!("a0 = {}", p.a0));
        check(p.a0 <= p.mu, "a0 <= mu", format!("a0 = {}, mu = {}", p.a0, p.mu));
        check(p.mu <= p.a1, "mu <= a1", format!("mu = {}, a1 = {}", p.mu, p.a1));
        check(
            p.a1 + p.beta / 2.0 < p.alpha,
            "a1 + beta/2 < alpha",
            format!("a1 + beta/2 = {}, alpha = {}", p.a1 + p.beta / 2.0, p.alpha),
        );
        check(
            p.alpha < p.a1 + p.beta,
            "alpha < a1 + beta",
            format!("alpha = {}, a1 + beta = {}", p.alpha, p.a1 + p.beta),
        );
        check(
            2.0 * p.alpha < p.a1 + p.a2,
            "2*alpha < a1 + a2",
            format!("2*alpha = {}, a1 + a2 = {}", 2.0 * p.alpha, p.a1 + p.a2),
        );
        if let Some(g) = p.gamma {
            check(g > 0.0, "gamma > 0", format!("gamma = {g}"));
            check(
                2.0 * p.a1 + p.beta + g <= 2.0 * p.alpha,
                "2*a1 + beta + gamma <= 2*alpha",
                format!("2*a1 + beta + gamma = {}, 2*alpha = {}", 2.0 * p.a1 + p.beta + g, 2.0 * p.alpha),
            );
        }
        check(p.c >= 0.0, "c >= 0", format!("c = {}", p.c));
        check(p.a_decomp >= 0.0, "A >= 0", format!("A = {}", p.a_decomp));
        check(p.a_decomp_c >= 0.0, "A_c >= 0", format!("A_c = {}", p.a_decomp_c));
        check(p.cstar > 0.0, "Cstar > 0", format!("Cstar = {}", p.cstar));
        check(p.cprime > 0.0, "Cprime > 0", format!("Cprime = {}", p.cprime));
        check(p.c_ac > 0.0, "C_ac > 0", format!("C_ac = {}", p.c_ac));
        check(p.c_c > 0.0, "C_c > 0", format!("C_c = {}", p.c_c));
        v
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    /// The decay rate actually used: the configured γ, or its maximal
    /// admissible value 2α - 2a1 - β.
    pub fn choose_gamma(&self) -> Result<f64> {
        let gmax = 2.0 * self.alpha - 2.0 * self.a1 - self.beta;
        if !(gmax > 0.0) {
            return Err(Error::NoAdmissibleGamma(gmax));
        }
        Ok(self.gamma.unwrap_or(gmax))
    }
}

/// Monotone nondecreasing function of a norm order: either a constant or a
/// piecewise-linear table (clamped outside its node range).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MonotoneTable {
    Constant(f64),
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl MonotoneTable {
    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTameTable(format!("{name}: {msg}")));
        match self {
            MonotoneTable::Constant(v) => {
                if !(v.is_finite() && *v > 0.0) {
                    return bad(format!("constant must be positive and finite, got {v}"));
                }
            }
            MonotoneTable::PiecewiseLinear(nodes) => {
                if nodes.is_empty() {
                    return bad("empty table".to_string());
                }
                for w in nodes.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return bad(format!("orders must be strictly increasing: {} then {}", w[0].0, w[1].0));
                    }
                    if w[1].1 < w[0].1 {
                        return bad(format!("values must be nondecreasing: {} then {}", w[0].1, w[1].1));
                    }
                }
                for &(x, y) in nodes {
                    if !(x.is_finite() && y.is_finite() && y > 0.0) {
                        return bad(format!("node ({x}, {y}) must be finite with positive value"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            MonotoneTable::Constant(v) => *v,
            MonotoneTable::PiecewiseLinear(nodes) => {
                if nodes.is_empty() {
                    return f64::NAN;
                }
                if s <= nodes[0].0 {
                    return nodes[0].1;
                }
                if s >= nodes[nodes.len() - 1].0 {
                    return nodes[nodes.len() - 1].1;
                }
                let i = nodes.partition_point(|&(x, _)| x <= s);
                let (x0, y0) = nodes[i - 1];
                let (x1, y1) = nodes[i];
                y0 + (y1 - y0) * (s - x0) / (x1 - x0)
            }
        }
    }
}

/// Tame bounds of a problem: M1..M3 control the operator and its first two
/// derivatives at shifted orders, L4..L6 control the approximate right
/// inverse, and delta1 is the radius of the ball where the inverse exists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TameConstants {
    #[serde(rename = "M1")]
    pub m1: MonotoneTable,
    #[serde(rename = "M2")]
    pub m2: MonotoneTable,
    #[serde(rename = "M3")]
    pub m3: MonotoneTable,
    #[serde(rename = "L4")]
    pub l4: MonotoneTable,
    #[serde(rename = "L5")]
    pub l5: MonotoneTable,
    #[serde(rename = "L6")]
    pub l6: MonotoneTable,
    pub delta1: f64,
}

impl TameConstants {
    pub fn validate(&self) -> Result<()> {
        self.m1.validate("M1")?;
        self.m2.validate("M2")?;
        self.m3.validate("M3")?;
        self.l4.validate("L4")?;
        self.l5.validate("L5")?;
        self.l6.validate("L6")?;
        if !(self.delta1.is_finite() && self.delta1 > 0.0) {
            return Err(Error::InvalidTameTable(format!("delta1 must be positive, got {}", self.delta1)));
        }
        Ok(())
    }

    pub fn m123(&self, s: f64) -> f64 {
        self.m1.eval(s) + self.m2.eval(s) + self.m3.eval(s)
    }

    pub fn m12(&self, s: f64) -> f64 {
        self.m1.eval(s) + self.m2.eval(s)
    }

    pub fn l456(&self, a: f64) -> f64 {
        self.l4.eval(a) + self.l5.eval(a) + self.l6.eval(a)
    }

    pub fn l45(&self, a: f64) -> f64 {
        self.l4.eval(a) + self.l5.eval(a)
    }
}

/// Smallness threshold: B and δ = 1/B. The iteration is guaranteed to
/// converge when ‖g‖_β ≤ δ.
pub fn compute_delta(p: &IterationParams, t: &TameConstants) -> Result<(f64, f64)> {
    if !(t.delta1 > 0.0) {
        return Err(Error::InvalidTameTable(format!("delta1 must be positive, got {}", t.delta1)));
    }
    let l = t.l456(p.a2);
    let a = p.a_decomp;
    let b = p.cprime
        * l
        * (1.0 / t.delta1).max((1.0 + a).max((1.0 + a) * l * t.m123(p.a2 - p.mu)));
    Ok((b, 1.0 / b))
}

/// Per-step growth caps: K1 = C* L456(a2), K2 = K3 = K4 = C* K1 (1+A).
pub fn fix_k_constants(p: &IterationParams, t: &TameConstants) -> (f64, f64, f64, f64) {
    let k1 = p.cstar * t.l456(p.a2);
    let k234 = p.cstar * k1 * (1.0 + p.a_decomp);
    (k1, k234, k234, k234)
}

/// How to evaluate the higher-regularity coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HighnormMode {
    /// Iterate the four-term recursion from its n = 1 initial values.
    Recursive,
    /// Evaluate the geometric-sum closed form directly.
    ClosedForm,
}

/// Coefficients (𝒜_n(a), ℬ_n(a), ℰ_n, ℱ_n) of the n-th interpolation step
/// of the higher-regularity bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HighnormCoeffs {
    pub a_n: f64,
    pub b_n: f64,
    pub e_n: f64,
    pub f_n: f64,
}

/// Number of interpolation steps: smallest positive integer N ≥ 2c/γ, so
/// that λ = c/N satisfies λ ≤ min{c, γ/2} and Nλ = c.
pub fn interpolation_steps(c: f64, gamma: f64) -> u64 {
    ((2.0 * c / gamma).ceil() as u64).max(1)
}

struct HighnormInputs {
    l45_a: f64,     // L45(a) · C_ac
    l456_a1: f64,   // L456(a1) · C_c
    l45_t: f64,     // L̃45 · C_ac (tilde = evaluated at a2 + c)
    l6_t: f64,      // L̃6
    m12_t: f64,     // M̃12 (at a2 + c - μ)
    m3_t: f64,      // M̃3
    m123_0: f64,    // M123(0)
    l456_a2: f64,   // L456(a2)
}

impl HighnormInputs {
    fn new(p: &IterationParams, t: &TameConstants, a: f64) -> Self {
        let hi = p.a2 + p.c;
        let shifted = p.a2 + p.c - p.mu;
        Self {
            l45_a: t.l45(a) * p.c_ac,
            l456_a1: t.l456(p.a1) * p.c_c,
            l45_t: t.l45(hi) * p.c_ac,
            l6_t: t.l6.eval(hi),
            m12_t: t.m12(shifted),
            m3_t: t.m3.eval(shifted),
            m123_0: t.m123(0.0),
            l456_a2: t.l456(p.a2),
        }
    }

    /// Common ratio of the closed-form geometric sums.
    fn z_ratio(&self) -> f64 {
        self.l456_a1 * self.m123_0 + self.l45_t * self.m12_t
    }

    /// The a-independent part of the A/E bracket.
    fn x_forcing(&self) -> f64 {
        self.l6_t * self.m12_t + self.l456_a2 * self.m3_t
    }
}

fn geometric_sum(z: f64, terms: u64) -> f64 {
    // Σ_{j=0}^{terms-1} z^j, evaluated term by term: the coefficients stay
    // small (N is a handful of steps), and this is exact at z = 1.
    let mut s = 0.0;
    let mut p = 1.0;
    for _ in 0..terms {
        s += p;
        p *= z;
    }
    s
}

/// Coefficients of interpolation step n at norm order a, by recursion or
/// closed form; the two agree to rounding for every admissible n.
pub fn highnorm_coeffs(
    p: &IterationParams,
    t: &TameConstants,
    n: u64,
    a: f64,
    mode: HighnormMode,
) -> Result<HighnormCoeffs> {
    if !(p.c > 0.0) {
        return Err(Error::InvalidParams(vec![Violation {
            requirement: "c > 0",
            detail: format!("c = {}", p.c),
        }]));
    }
    let gamma = p.choose_gamma()?;
    let n_max = interpolation_steps(p.c, gamma);
    if n < 1 || n > n_max {
        return Err(Error::InvalidParams(vec![Violation {
            requirement: "1 <= n <= N",
            detail: format!("n = {n}, N = {n_max}"),
        }]));
    }
    let inp = HighnormInputs::new(p, t, a);
    Ok(match mode {
        HighnormMode::Recursive => {
            let mut a_n = 0.0;
            let mut b_n = inp.l45_a;
            let mut a_t = 0.0;
            let mut b_t = inp.l45_t;
            let mut e_n = 0.0;
            let mut f_n = inp.l456_a1;
            for _ in 1..n {
                let bracket_a = a_t * inp.m12_t + inp.x_forcing() + e_n * inp.m123_0;
                let bracket_b = 1.0 + b_t * inp.m12_t + f_n * inp.m123_0;
                a_n = inp.l45_a * bracket_a;
                b_n = inp.l45_a * bracket_b;
                a_t = inp.l45_t * bracket_a;
                b_t = inp.l45_t * bracket_b;
                e_n = inp.l456_a1 * bracket_a;
                f_n = inp.l456_a1 * bracket_b;
            }
            HighnormCoeffs { a_n, b_n, e_n, f_n }
        }
        HighnormMode::ClosedForm => {
            let z = inp.z_ratio();
            let x = inp.x_forcing();
            let sum_a = geometric_sum(z, n - 1); // Σ_{j=0}^{n-2}
            let sum_b = geometric_sum(z, n); // Σ_{j=0}^{n-1}
            HighnormCoeffs {
                a_n: inp.l45_a * x * sum_a,
                b_n: inp.l45_a * sum_b,
                e_n: inp.l456_a1 * x * sum_a,
                f_n: inp.l456_a1 * sum_b,
            }
        }
    })
}

/// A-priori bound on ‖u‖_{α+c} in terms of ‖g‖_β and ‖g‖_{β+c}:
/// C_c { 𝒢1 (1+A) ‖g‖_β + 𝒢2 (1+A_c) ‖g‖_{β+c} }. The sums here use the
/// plain ratio z (without the generic C factors), matching the bound as
/// stated; with the default C_ac = C_c = 1 this coincides with the
/// closed-form coefficient ratio.
pub fn highnorm_bound(
    p: &IterationParams,
    t: &TameConstants,
    g_beta: f64,
    g_beta_c: f64,
) -> Result<f64> {
    if !(p.c > 0.0) {
        return Err(Error::InvalidParams(vec![Violation {
            requirement: "c > 0",
            detail: format!("c = {}", p.c),
        }]));
    }
    let gamma = p.choose_gamma()?;
    let n = interpolation_steps(p.c, gamma);
    let hi = p.a2 + p.c;
    let shifted = hi - p.mu;
    let l45_t = t.l45(hi);
    let l6_t = t.l6.eval(hi);
    let m12_t = t.m12(shifted);
    let z = t.l456(p.a1) * t.m123(0.0) + l45_t * m12_t;
    let x = l6_t * m12_t + t.l456(p.a2) * t.m3.eval(shifted);
    let g1 = l6_t + l45_t * x * geometric_sum(z, n - 1);
    let g2 = l45_t * geometric_sum(z, n);
    Ok(p.c_c * (g1 * (1.0 + p.a_decomp) * g_beta + g2 * (1.0 + p.a_decomp_c) * g_beta_c))
}

/// Everything `derive` produces: the full constant ledger of one run.
#[derive(Debug, Clone, Serialize)]
pub struct DerivedConstants {
    pub gamma: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub b_threshold: f64,
    pub delta: f64,
    /// Interpolation data; `None` when c = 0 (no higher-regularity stage).
    pub n_steps: Option<u64>,
    pub lambda: Option<f64>,
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub z: f64,
    pub z_proof: f64,
    pub x: f64,
}

impl DerivedConstants {
    pub fn derive(p: &IterationParams, t: &TameConstants) -> Result<Self> {
        p.ensure_valid()?;
        t.validate()?;
        let gamma = p.choose_gamma()?;
        let (k1, k2, k3, k4) = fix_k_constants(p, t);
        let (b_threshold, delta) = compute_delta(p, t)?;
        let hi = p.a2 + p.c;
        let shifted = hi - p.mu;
        let l45_t = t.l45(hi);
        let l6_t = t.l6.eval(hi);
        let m12_t = t.m12(shifted);
        let z = t.l456(p.a1) * t.m123(0.0) + l45_t * m12_t;
        let z_proof = t.l456(p.a1) * p.c_c * t.m123(0.0) + l45_t * p.c_ac * m12_t;
        let x = l6_t * m12_t + t.l456(p.a2) * t.m3.eval(shifted);
        let (n_steps, lambda, g1, g2) = if p.c > 0.0 {
            let n = interpolation_steps(p.c, gamma);
            let g1 = l6_t + l45_t * x * geometric_sum(z, n - 1);
            let g2 = l45_t * geometric_sum(z, n);
            (Some(n), Some(p.c / n as f64), Some(g1), Some(g2))
        } else {
            (None, None, None, None)
        };
        Ok(Self { gamma, k1, k2, k3, k4, b_threshold, delta, n_steps, lambda, g1, g2, z, z_proof, x })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(a0: f64, mu: f64, a1: f64, alpha: f64, beta: f64, a2: f64) -> IterationParams {
        IterationParams {
            a0,
            mu,
            a1,
            a2,
            alpha,
            beta,
            gamma: None,
            c: 0.0,
            a_decomp: 1.0,
            a_decomp_c: 1.0,
            cstar: 1.0,
            cprime: 1.0,
            c_ac: 1.0,
            c_c: 1.0,
        }
    }

    fn const_tables(m: [f64; 3], l: [f64; 3], delta1: f64) -> TameConstants {
        TameConstants {
            m1: MonotoneTable::Constant(m[0]),
            m2: MonotoneTable::Constant(m[1]),
            m3: MonotoneTable::Constant(m[2]),
            l4: MonotoneTable::Constant(l[0]),
            l5: MonotoneTable::Constant(l[1]),
            l6: MonotoneTable::Constant(l[2]),
            delta1,
        }
    }

    #[test]
    fn admissible_orders_pass() {
        assert!(params(1.0, 3.0, 5.0, 11.0, 11.0, 18.0).validate().is_empty());
    }

    #[test]
    fn each_boundary_names_its_violation() {
        let low = params(1.0, 3.0, 5.0, 10.0, 11.0, 18.0);
        let v = low.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].requirement, "a1 + beta/2 < alpha");
        let high = params(1.0, 3.0, 5.0, 16.0, 11.0, 40.0);
        let v = high.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].requirement, "alpha < a1 + beta");
    }

    #[test]
    fn gamma_defaults_to_the_maximum() {
        assert_relative_eq!(params(1.0, 3.0, 5.0, 11.0, 11.0, 18.0).choose_gamma().unwrap(), 1.0);
        assert_relative_eq!(params(1.0, 3.0, 5.0, 12.0, 12.0, 20.0).choose_gamma().unwrap(), 2.0);
        // boundary: 2α = 2a1 + β exactly leaves no room
        let boundary = params(1.0, 3.0, 5.0, 10.5, 11.0, 18.0);
        assert!(matches!(boundary.choose_gamma(), Err(Error::NoAdmissibleGamma(_))));
    }

    #[test]
    fn chosen_gamma_saturates_its_constraint() {
        let p = params(0.0, 0.0, 1.0, 4.0, 4.0, 9.0);
        let g = p.choose_gamma().unwrap();
        assert_relative_eq!(2.0 * p.a1 + p.beta + g, 2.0 * p.alpha);
    }

    #[test]
    fn delta_matches_hand_computation() {
        // L456(a2) = 2, M123(a2 - mu) = 4, A = 0, delta1 = 0.1
        let mut p = params(1.0, 3.0, 5.0, 11.0, 11.0, 18.0);
        p.a_decomp = 0.0;
        let t = const_tables([2.0, 1.0, 1.0], [1.0, 0.5, 0.5], 0.1);
        let (b, d) = compute_delta(&p, &t).unwrap();
        assert_relative_eq!(b, 20.0); // 1 · 2 · max{10, 1, 8}
        assert_relative_eq!(d, 0.05);
    }

    #[test]
    fn growing_a_never_grows_delta() {
        let t = const_tables([2.0, 1.0, 1.0], [1.0, 0.5, 0.5], 0.1);
        let mut prev = f64::INFINITY;
        for a in [0.0, 0.5, 1.0, 4.0, 100.0] {
            let mut p = params(1.0, 3.0, 5.0, 11.0, 11.0, 18.0);
            p.a_decomp = a;
            let (_, d) = compute_delta(&p, &t).unwrap();
            assert!(d <= prev);
            prev = d;
        }
    }

    #[test]
    fn k_constants_match_hand_computation() {
        let mut p = params(1.0, 3.0, 5.0, 11.0, 11.0, 18.0);
        p.cstar = 2.0;
        p.a_decomp = 1.0;
        let t = const_tables([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.5);
        let (k1, k2, k3, k4) = fix_k_constants(&p, &t);
        assert_relative_eq!(k1, 6.0);
        assert_relative_eq!(k2, 24.0);
        assert_eq!(k2, k3);
        assert_eq!(k3, k4);
    }

    #[test]
    fn table_interpolation_clamps_and_is_monotone() {
        let t = MonotoneTable::PiecewiseLinear(vec![(0.0, 1.0), (2.0, 3.0), (4.0, 3.5)]);
        assert!(t.validate("t").is_ok());
        assert_relative_eq!(t.eval(-1.0), 1.0);
        assert_relative_eq!(t.eval(1.0), 2.0);
        assert_relative_eq!(t.eval(3.0), 3.25);
        assert_relative_eq!(t.eval(9.0), 3.5);
        let bad = MonotoneTable::PiecewiseLinear(vec![(0.0, 2.0), (1.0, 1.0)]);
        assert!(bad.validate("bad").is_err());
    }

    #[test]
    fn highnorm_initial_values() {
        let mut p = params(1.0, 3.0, 5.0, 11.0, 11.0, 18.0);
        p.c = 2.0;
        let t = const_tables([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.5);
        for mode in [HighnormMode::Recursive, HighnormMode::ClosedForm] {
            let c = highnorm_coeffs(&p, &t, 1, 7.0, mode).unwrap();
            assert_eq!(c.a_n, 0.0);
            assert_eq!(c.e_n, 0.0);
            assert_relative_eq!(c.b_n, t.l45(7.0));
            assert_relative_eq!(c.f_n, t.l456(p.a1));
        }
    }

    #[test]
    fn degenerate_ratio_freezes_f() {
        // M123(0) = 0 and M̃12 = 0 force z = 0, so F stays at its initial value
        let mut p = params(1.0, 3.0, 5.0, 11.0, 11.0, 18.0);
        p.c = 2.0;
        let t = TameConstants {
            m1: MonotoneTable::Constant(0.0),
            m2: MonotoneTable::Constant(0.0),
            m3: MonotoneTable::Constant(0.0),
            l4: MonotoneTable::Constant(1.0),
            l5: MonotoneTable::Constant(1.0),
            l6: MonotoneTable::Constant(1.0),
            delta1: 0.5,
        };
        let n_max = interpolation_steps(p.c, p.choose_gamma().unwrap());
        for n in 1..=n_max {
            let c = highnorm_coeffs(&p, &t, n, 7.0, HighnormMode::Recursive).unwrap();
            assert_relative_eq!(c.f_n, t.l456(p.a1), max_relative = 1e-15);
        }
    }

    #[test]
    fn recursion_agrees_with_closed_form() {
        // generic inputs: L45 = 1, L456 = 1, M̃12 = 2, M̃3 = 1, M123(0) = 0.5
        let mut p = params(1.0, 3.0, 5.0, 11.0, 11.0, 30.0);
        p.c = 3.0;
        let shifted = p.a2 + p.c - p.mu;
        let t = TameConstants {
            m1: MonotoneTable::PiecewiseLinear(vec![(0.0, 0.25), (shifted, 2.0)]),
            m2: MonotoneTable::Constant(0.0),
            m3: MonotoneTable::PiecewiseLinear(vec![(0.0, 0.25), (shifted, 1.0)]),
            l4: MonotoneTable::Constant(1.0),
            l5: MonotoneTable::Constant(0.0),
            l6: MonotoneTable::Constant(0.0),
            delta1: 0.5,
        };
        let gamma = p.choose_gamma().unwrap();
        let n_max = interpolation_steps(p.c, gamma);
        assert!(n_max >= 3);
        for n in 1..=n_max {
            for a in [p.a1, 8.0, p.a2 + p.c] {
                let r = highnorm_coeffs(&p, &t, n, a, HighnormMode::Recursive).unwrap();
                let c = highnorm_coeffs(&p, &t, n, a, HighnormMode::ClosedForm).unwrap();
                assert_relative_eq!(r.a_n, c.a_n, max_relative = 1e-12);
                assert_relative_eq!(r.b_n, c.b_n, max_relative = 1e-12);
                assert_relative_eq!(r.e_n, c.e_n, max_relative = 1e-12);
                assert_relative_eq!(r.f_n, c.f_n, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn highnorm_coeffs_rejects_out_of_range_steps() {
        let mut p = params(1.0, 3.0, 5.0, 11.0, 11.0, 18.0);
        p.c = 2.0;
        let t = const_tables([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.5);
        let n_max = interpolation_steps(p.c, p.choose_gamma().unwrap());
        assert!(highnorm_coeffs(&p, &t, 0, 7.0, HighnormMode::Recursive).is_err());
        assert!(highnorm_coeffs(&p, &t, n_max + 1, 7.0, HighnormMode::Recursive).is_err());
        p.c = 0.0;
        assert!(highnorm_coeffs(&p, &t, 1, 7.0, HighnormMode::Recursive).is_err());
    }

    #[test]
    fn highnorm_bound_expands_by_hand_for_two_steps() {
        let mut p = params(1.0, 3.0, 5.0, 11.0, 11.0, 18.0);
        p.c = 1.0; // N = ceil(2/1) = 2
        p.a_decomp = 0.5;
        p.a_decomp_c = 0.25;
        let t = const_tables([1.0, 2.0, 3.0], [0.5, 1.5, 2.5], 0.5);
        let gamma = p.choose_gamma().unwrap();
        assert_eq!(interpolation_steps(p.c, gamma), 2);
        let l45t = t.l45(p.a2 + p.c);
        let l6t = t.l6.eval(p.a2 + p.c);
        let m12t = t.m12(p.a2 + p.c - p.mu);
        let m3t = t.m3.eval(p.a2 + p.c - p.mu);
        let z = t.l456(p.a1) * t.m123(0.0) + l45t * m12t;
        let g1 = l6t + l45t * (l6t * m12t + t.l456(p.a2) * m3t) * 1.0; // Σ over j=0..0
        let g2 = l45t * (1.0 + z);
        let want = g1 * 1.5 * 0.3 + g2 * 1.25 * 0.7;
        let got = highnorm_bound(&p, &t, 0.3, 0.7).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-13);
        assert_eq!(highnorm_bound(&p, &t, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn interpolation_step_count_and_size() {
        for (c, gamma) in [(2.0, 2.0), (3.0, 2.0), (0.5, 1.0), (5.0, 0.75)] {
            let n = interpolation_steps(c, gamma);
            let lambda = c / n as f64;
            assert!(n >= 1);
            assert!(n as f64 >= 2.0 * c / gamma);
            assert!(((n - 1) as f64) < 2.0 * c / gamma || n == 1);
            assert!(lambda <= c + 1e-15);
            assert!(lambda <= gamma / 2.0 + 1e-15);
            assert_relative_eq!(n as f64 * lambda, c);
        }
    }

    #[test]
    fn derive_assembles_the_ledger() {
        let mut p = params(0.0, 0.0, 1.0, 4.0, 4.0, 9.0);
        p.c = 2.0;
        let t = const_tables([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.25);
        let d = DerivedConstants::derive(&p, &t).unwrap();
        assert_relative_eq!(d.gamma, 2.0);
        assert_relative_eq!(d.delta * d.b_threshold, 1.0);
        assert_eq!(d.n_steps, Some(2));
        assert_relative_eq!(d.lambda.unwrap(), 1.0);
        assert_eq!(d.k2, d.k3);
        assert_eq!(d.k3, d.k4);
        // with all generic constants at 1, the proof ratio equals the plain one
        assert_relative_eq!(d.z, d.z_proof);
    }
}
