//! `verify-smoothing`: measure axiom constants, orthogonality and velocity
//! behaviour of a smoothing family, then evaluate configured assertions.

use std::path::Path;

use serde::Serialize;

use nmh_core::sample::random_function;
use nmh_core::smoothing::{AxiomScan, SmoothingAxiom, SmoothingFamily, TestFunctions};
use nmh_core::{nx, CutoffShape, Lattice, SpectralFunction, Velocity};

use crate::config::{self, OutputFormat, SmoothingAssertion, SmoothingCheckConfig, TestsetSpec};
use crate::out::{csv_row, fmt, Sink};

/// Compact textual identity of the family, used as CSV key columns.
pub fn family_label(f: &SmoothingFamily) -> (String, String) {
    let shape = match f.shape {
        CutoffShape::Sharp => "sharp",
        CutoffShape::Smooth => "smooth",
    };
    let velocity = match f.velocity {
        Velocity::Dyadic => "dyadic".to_string(),
        Velocity::Geometric { ratio } => format!("geometric({ratio})"),
        Velocity::Polynomial { offset, power } => format!("polynomial({offset};{power})"),
        Velocity::DoublyExponential { base, chi } => format!("doubly-exponential({base};{chi})"),
    };
    (shape.to_string(), velocity)
}

fn axiom_label(a: SmoothingAxiom) -> &'static str {
    match a {
        SmoothingAxiom::LowNormBound => "low_norm_bound",
        SmoothingAxiom::HighNormGrowth => "high_norm_growth",
        SmoothingAxiom::ApproximationDecay => "approximation_decay",
        SmoothingAxiom::IncrementBound => "increment_bound",
    }
}

#[derive(Serialize)]
struct CheckResult {
    description: String,
    measured: f64,
    passed: bool,
}

#[derive(Serialize)]
struct SmoothingReport<'a> {
    shape: String,
    velocity: String,
    d: usize,
    nmax: i64,
    j_max: u64,
    axioms: &'a AxiomScan,
    orthogonality_sup_ratio: f64,
    orthogonality_worst_mode: [i64; 2],
    orthogonality_exhaustive: bool,
    checks: &'a [CheckResult],
    passed: bool,
}

fn parseval_defect(f: &SmoothingFamily, u: &SpectralFunction, order: f64) -> f64 {
    let total = u.sobolev_norm(nx(order)).powi(2);
    let mut sum = 0.0;
    for j in 0..f.saturation_level(u.lattice()).max(1) {
        sum += f.apply_r(j, u).sobolev_norm(nx(order)).powi(2);
    }
    if total == 0.0 {
        0.0
    } else {
        (total / sum - 1.0).abs()
    }
}

fn scan_constant(scan: &AxiomScan, axiom: SmoothingAxiom, a: f64, b: f64) -> Result<f64, String> {
    scan.constant(axiom, a, b).map(|m| m.constant).ok_or_else(|| {
        format!(
            "assertion references axiom {} at pair ({a}, {b}) which the scan did not measure; \
             add the pair to `pairs`",
            axiom_label(axiom)
        )
    })
}

pub fn exec(config_path: &Path, out: Option<&Path>, format: Option<OutputFormat>, seed: Option<u64>) -> u8 {
    let cfg: SmoothingCheckConfig = match config::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    match run_checks(&cfg, out, format, seed) {
        Ok(passed) => {
            if passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run_checks(
    cfg: &SmoothingCheckConfig,
    out: Option<&Path>,
    format: Option<OutputFormat>,
    seed: Option<u64>,
) -> Result<bool, String> {
    let fam = SmoothingFamily::new(cfg.smoothing.shape, cfg.smoothing.velocity)
        .map_err(|e| e.to_string())?;
    let lattice = Lattice::new(cfg.lattice.d, cfg.lattice.nmax).map_err(|e| e.to_string())?;
    let sink = Sink::new(&cfg.output, out, format);

    let testset = match &cfg.testset {
        TestsetSpec::SingleModes => TestFunctions::SingleModes,
        TestsetSpec::Random { count, decay, seed: cfg_seed } => {
            let base = seed.or(*cfg_seed).unwrap_or(0);
            TestFunctions::Explicit(
                (0..*count).map(|i| random_function(lattice, *decay, base + i as u64)).collect(),
            )
        }
    };
    let scan = fam.measure_axioms(lattice, &testset, &cfg.pairs, cfg.j_max).map_err(|e| e.to_string())?;
    let orth = fam.measure_orthogonality(lattice, cfg.orthogonality_budget);

    let mut results: Vec<CheckResult> = Vec::new();
    for check in &cfg.checks {
        let r = match check {
            SmoothingAssertion::OrthogonalityMax { max } => CheckResult {
                description: format!("orthogonality sup ratio <= {max}"),
                measured: orth.sup_ratio,
                passed: orth.sup_ratio <= *max,
            },
            SmoothingAssertion::OrthogonalityEquals { value, tol } => CheckResult {
                description: format!("orthogonality sup ratio = {value} within {tol}"),
                measured: orth.sup_ratio,
                passed: (orth.sup_ratio - value).abs() <= *tol,
            },
            SmoothingAssertion::OrthogonalityAtMode { mode, min } => {
                let ratio = 1.0 / fam.block_weight(*mode);
                CheckResult {
                    description: format!("orthogonality ratio at mode {mode:?} >= {min}"),
                    measured: ratio,
                    passed: ratio >= *min,
                }
            }
            SmoothingAssertion::RandomOrthogonality { count, decay, order, seed: s, tol } => {
                let base = seed.unwrap_or(*s);
                let mut worst = 0.0_f64;
                for i in 0..*count {
                    let u = random_function(lattice, *decay, base + i as u64);
                    worst = worst.max(parseval_defect(&fam, &u, *order));
                }
                CheckResult {
                    description: format!(
                        "max Parseval defect over {count} random functions at order {order} <= {tol}"
                    ),
                    measured: worst,
                    passed: worst <= *tol,
                }
            }
            SmoothingAssertion::AxiomConstantEquals { axiom, a, b, value, tol } => {
                let c = scan_constant(&scan, *axiom, *a, *b)?;
                CheckResult {
                    description: format!(
                        "{} constant at ({a}, {b}) = {value} within {tol}",
                        axiom_label(*axiom)
                    ),
                    measured: c,
                    passed: (c - value).abs() <= *tol,
                }
            }
            SmoothingAssertion::AxiomConstantMax { axiom, a, b, max } => {
                let c = scan_constant(&scan, *axiom, *a, *b)?;
                CheckResult {
                    description: format!(
                        "{} constant at ({a}, {b}) <= {max}",
                        axiom_label(*axiom)
                    ),
                    measured: c,
                    passed: c <= *max,
                }
            }
            SmoothingAssertion::AxiomConstantRange { axiom, a, b, min, max } => {
                let c = scan_constant(&scan, *axiom, *a, *b)?;
                CheckResult {
                    description: format!(
                        "{} constant at ({a}, {b}) in [{min}, {max}]",
                        axiom_label(*axiom)
                    ),
                    measured: c,
                    passed: *min <= c && c <= *max,
                }
            }
            SmoothingAssertion::AxiomStable { axiom, a, b, j_lo, j_hi, rel } => {
                let lo = fam
                    .measure_axioms(lattice, &TestFunctions::SingleModes, &[(*a, *b)], *j_lo)
                    .map_err(|e| e.to_string())?;
                let hi = fam
                    .measure_axioms(lattice, &TestFunctions::SingleModes, &[(*a, *b)], *j_hi)
                    .map_err(|e| e.to_string())?;
                let c_lo = scan_constant(&lo, *axiom, *a, *b)?;
                let c_hi = scan_constant(&hi, *axiom, *a, *b)?;
                let drift = (c_hi - c_lo).abs() / c_lo.abs().max(f64::MIN_POSITIVE);
                CheckResult {
                    description: format!(
                        "{} constant at ({a}, {b}) stable within {rel} as j_max {j_lo} -> {j_hi}",
                        axiom_label(*axiom)
                    ),
                    measured: drift,
                    passed: drift.is_finite() && drift <= *rel && c_hi.is_finite(),
                }
            }
        };
        results.push(r);
    }

    let passed = results.iter().all(|r| r.passed);
    let (shape, velocity) = family_label(&fam);

    let mut csv = String::from("family,velocity,axiom,a,b,j,ratio\n");
    for m in &scan.rows {
        csv.push_str(&csv_row(&[
            shape.clone(),
            velocity.clone(),
            axiom_label(m.axiom).to_string(),
            fmt(m.a),
            fmt(m.b),
            m.worst_level.to_string(),
            fmt(m.constant),
        ]));
    }
    for row in &orth.rows {
        csv.push_str(&csv_row(&[
            shape.clone(),
            velocity.clone(),
            "orthogonality".to_string(),
            String::new(),
            String::new(),
            row.mode[0].abs().max(row.mode[1].abs()).to_string(),
            fmt(row.ratio),
        ]));
    }
    sink.csv("smoothing.csv", &csv)?;

    let report = SmoothingReport {
        shape,
        velocity,
        d: cfg.lattice.d,
        nmax: cfg.lattice.nmax,
        j_max: cfg.j_max,
        axioms: &scan,
        orthogonality_sup_ratio: orth.sup_ratio,
        orthogonality_worst_mode: orth.worst_mode,
        orthogonality_exhaustive: orth.exhaustive,
        checks: &results,
        passed,
    };
    sink.json("smoothing.json", &report)?;

    for r in &results {
        println!("[{}] {} (measured {:.6e})", if r.passed { "pass" } else { "FAIL" }, r.description, r.measured);
    }
    println!(
        "orthogonality sup ratio {:.12e} at mode {:?}{}",
        orth.sup_ratio,
        orth.worst_mode,
        if orth.exhaustive { "" } else { " (sampled axis modes only)" }
    );
    Ok(passed)
}
