//! Configuration documents: one JSON file per experiment, deserialised with
//! position-annotated diagnostics.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use nmh_core::hypotheses::{IterationParams, MonotoneTable, TameConstants};
use nmh_core::smoothing::{SmoothingAxiom, SmoothingFamily};

/// Read and parse a config file; errors carry file/line/column.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
}

/// All-ones fallback tables for when a config wants the derived-constant
/// ledger without committing to measured values.
pub fn default_tame() -> TameConstants {
    TameConstants {
        m1: MonotoneTable::Constant(1.0),
        m2: MonotoneTable::Constant(1.0),
        m3: MonotoneTable::Constant(1.0),
        l4: MonotoneTable::Constant(1.0),
        l5: MonotoneTable::Constant(1.0),
        l6: MonotoneTable::Constant(1.0),
        delta1: 1.0,
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub d: usize,
    pub nmax: i64,
}

/// How to build a function on the problem lattice.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// The constant function with this value.
    Constant { value: f64 },
    /// `2 Re(c e^{ikx})`: the coefficient placed at `k` and mirrored at `-k`.
    Mode {
        k: [i64; 2],
        re: f64,
        #[serde(default)]
        im: f64,
    },
    /// Explicit coefficient list; modes not listed are zero.
    Modes { modes: Vec<ModeEntry> },
    /// Seeded random coefficients decaying like `<k>^-decay`.
    Random {
        decay: f64,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        normalize: Option<Normalize>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub k: [i64; 2],
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Rescale so the Sobolev norm at `order` equals `value`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalize {
    pub order: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Diagonal operator with symbol `<k>^power`.
    LinearMultiplier { power: f64 },
    /// `u + u^2`.
    Quadratic,
    /// Directional derivative plus square, with near-resonant divisors.
    SmallDivisor {
        #[serde(default)]
        omega: Option<[f64; 2]>,
        #[serde(default = "one")]
        d0: f64,
    },
    /// Directional derivative minus a composed coefficient field.
    Transport {
        profile: FunctionSpec,
        #[serde(default)]
        omega: Option<[f64; 2]>,
        #[serde(default = "one")]
        d0: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub data: FunctionSpec,
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub strict_ball: bool,
}

fn default_residual_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: None, formats: default_formats() }
    }
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

/// The `run` subcommand document: problem, parameters, smoothing, lattice,
/// data and output destinations.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub params: IterationParams,
    #[serde(default)]
    pub tame: Option<TameConstants>,
    pub smoothing: SmoothingFamily,
    pub lattice: LatticeConfig,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// The `params-check` subcommand document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsCheckConfig {
    pub params: IterationParams,
    #[serde(default)]
    pub tame: Option<TameConstants>,
}

/// Test material for axiom scans.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestsetSpec {
    /// Closed-form scan over every lattice mode.
    SingleModes,
    /// Seeded random functions measured through actual norms.
    Random { count: u32, decay: f64, #[serde(default)] seed: Option<u64> },
}

impl Default for TestsetSpec {
    fn default() -> Self {
        TestsetSpec::SingleModes
    }
}

/// One assertion evaluated by `verify-smoothing`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SmoothingAssertion {
    /// Sup over modes of the orthogonality ratio stays at most `max`.
    OrthogonalityMax { max: f64 },
    /// ... equals `value` within `tol`.
    OrthogonalityEquals { value: f64, tol: f64 },
    /// The ratio at one mode reaches at least `min` (failure-mode demo).
    OrthogonalityAtMode { mode: [i64; 2], min: f64 },
    /// Parseval defect `| |u|^2 / sum_j |R_j u|^2 - 1 |` over seeded random
    /// functions stays at most `tol`.
    RandomOrthogonality { count: u32, decay: f64, order: f64, seed: u64, tol: f64 },
    /// Measured axiom constant equals `value` within `tol`.
    AxiomConstantEquals { axiom: SmoothingAxiom, a: f64, b: f64, value: f64, tol: f64 },
    /// Measured axiom constant is at most `max`.
    AxiomConstantMax { axiom: SmoothingAxiom, a: f64, b: f64, max: f64 },
    /// Measured axiom constant lies in `[min, max]`.
    AxiomConstantRange { axiom: SmoothingAxiom, a: f64, b: f64, min: f64, max: f64 },
    /// Constant moves by at most `rel` (relative) when the level window
    /// grows from `j_lo` to `j_hi`.
    AxiomStable { axiom: SmoothingAxiom, a: f64, b: f64, j_lo: u64, j_hi: u64, rel: f64 },
}

/// The `verify-smoothing` subcommand document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingCheckConfig {
    pub smoothing: SmoothingFamily,
    pub lattice: LatticeConfig,
    /// Norm-order pairs (a, b) the axiom scan measures.
    #[serde(default)]
    pub pairs: Vec<(f64, f64)>,
    #[serde(default = "default_j_max")]
    pub j_max: u64,
    #[serde(default)]
    pub testset: TestsetSpec,
    /// Work budget for the orthogonality scan; above it only axis modes at
    /// dyadic radii are measured.
    #[serde(default = "default_budget")]
    pub orthogonality_budget: u64,
    #[serde(default)]
    pub checks: Vec<SmoothingAssertion>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_j_max() -> u64 {
    10
}

fn default_budget() -> u64 {
    100_000_000
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorderlineAssert {
    pub quadrature_rel_err_max: f64,
    /// Relative tolerance on the critical partial-sum slope vs `2 c(beta)^2`.
    pub psum_slope_rel: f64,
    /// Relative tolerance on the band-norm slopes vs `a - beta + 1/2`.
    pub band_slope_rel: f64,
    /// Require the doubling ratio just below critical to be at most this.
    pub subcritical_ratio_max: f64,
}

impl Default for BorderlineAssert {
    fn default() -> Self {
        Self {
            quadrature_rel_err_max: 1e-12,
            psum_slope_rel: 0.05,
            band_slope_rel: 0.05,
            subcritical_ratio_max: 1.01,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockBoundedAssert {
    /// Max/min spread of the squared block norms over the fit window.
    pub block_spread_max: f64,
    /// Relative tolerance on the smoothed-norm growth slope vs `2 ln 2`.
    pub growth_slope_rel: f64,
}

impl Default for BlockBoundedAssert {
    fn default() -> Self {
        Self { block_spread_max: 1.3, growth_slope_rel: 0.10 }
    }
}

/// The `counterexample` subcommand document.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CounterexampleConfig {
    /// Coefficients from the band-integral closed form; critical partial
    /// sums diverge logarithmically.
    Borderline {
        #[serde(default = "default_dim")]
        d: usize,
        nmax: i64,
        beta: f64,
        probe_below: f64,
        probe_above: f64,
        #[serde(default)]
        assert: BorderlineAssert,
        #[serde(default)]
        output: OutputSection,
    },
    /// Bounded dyadic block norms with linearly growing smoothed norms.
    BlockBounded {
        #[serde(default = "default_dim")]
        d: usize,
        nmax: i64,
        a: f64,
        #[serde(default)]
        assert: BlockBoundedAssert,
        #[serde(default)]
        output: OutputSection,
    },
}

fn default_dim() -> usize {
    1
}

/// One case of the `velocity-bench` subcommand.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityCase {
    pub label: String,
    pub smoothing: SmoothingFamily,
    pub a: f64,
    pub b: f64,
    pub j_lo: u64,
    pub j_hi: u64,
    /// Assert `|sigma_hat| <= sigma_abs_max`.
    #[serde(default)]
    pub sigma_abs_max: Option<f64>,
    /// Assert `sigma_hat >= sigma_min`.
    #[serde(default)]
    pub sigma_min: Option<f64>,
    /// Assert `sigma_hat <= sigma_max`.
    #[serde(default)]
    pub sigma_max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityBenchConfig {
    pub cases: Vec<VelocityCase>,
    #[serde(default)]
    pub output: OutputSection,
}

/// A sweep document: member config files run in parallel with isolated
/// output directories.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub configs: Vec<PathBuf>,
}
