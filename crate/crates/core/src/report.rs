//! Run records: everything a solve produces beyond the solution itself,
//! in a form that serialises deterministically to JSON and CSV.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypotheses::{DerivedConstants, IterationParams};

/// Per-step measurements. Norm columns are tagged with the exponent they
/// were taken at; `ratio_*` columns divide by the growth envelope the step
/// bounds predict, so a scheme obeying the bounds keeps them bounded.
/// Ratios are `None` when the data is zero and the envelope degenerates.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub j: u64,
    /// Envelope weight of the step: `|g|_beta 2^(-j gamma) + |g_j|_beta`.
    pub xi: f64,
    pub g_block_beta: f64,
    pub h_low: f64,
    pub h_high: f64,
    pub v_low: f64,
    pub v_high: f64,
    pub uv_zero: f64,
    pub uv_high: f64,
    pub u_alpha: f64,
    pub y_zero: f64,
    pub e_zero: f64,
    pub e_high: f64,
    pub residual: f64,
    /// Defect of the telescoped error identity, exponent 0.
    pub identity_defect: Option<f64>,
    pub ratio_h: Option<f64>,
    pub ratio_v: Option<f64>,
    pub ratio_uv: Option<f64>,
    pub ratio_u: Option<f64>,
    /// Whether the smoothed point stayed inside the trust ball.
    pub ball_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub converged: bool,
    pub steps: u64,
    pub final_residual: f64,
    /// Measured decomposition constant at order beta (1 when g = 0).
    pub a_measured: f64,
    /// Same at order beta + c when a higher-regularity stage is active.
    pub a_c_measured: Option<f64>,
    /// Suprema over steps of the per-step envelope ratios.
    pub khat_h: Option<f64>,
    pub khat_v: Option<f64>,
    pub khat_uv: Option<f64>,
    pub khat_u: Option<f64>,
    pub max_identity_defect: Option<f64>,
    pub u_alpha: f64,
    /// `|u|_alpha / ((1 + A) |g|_beta)`: the low-norm solution bound
    /// without its generic constant.
    pub lownorm_ratio: Option<f64>,
    /// `|u|_(alpha+c) / (|g|_beta + |g|_(beta+c))` when c > 0.
    pub highnorm_ratio: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub params: IterationParams,
    /// Constant ledger derived from the tame tables, when provided.
    pub derived: Option<DerivedConstants>,
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Steps table, one row per iteration step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "j,xi,g_block_beta,h_low,h_high,v_low,v_high,uv_zero,uv_high,u_alpha,\
             y_zero,e_zero,e_high,residual,identity_defect,ratio_h,ratio_v,ratio_uv,\
             ratio_u,ball_ok\n",
        );
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                s.j,
                fmt(s.xi),
                fmt(s.g_block_beta),
                fmt(s.h_low),
                fmt(s.h_high),
                fmt(s.v_low),
                fmt(s.v_high),
                fmt(s.uv_zero),
                fmt(s.uv_high),
                fmt(s.u_alpha),
                fmt(s.y_zero),
                fmt(s.e_zero),
                fmt(s.e_high),
                fmt(s.residual),
                fmt_opt(s.identity_defect),
                fmt_opt(s.ratio_h),
                fmt_opt(s.ratio_v),
                fmt_opt(s.ratio_uv),
                fmt_opt(s.ratio_u),
                s.ball_ok,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> RunReport {
        RunReport {
            problem: "sample".into(),
            params: IterationParams::default(),
            derived: None,
            steps: vec![StepRecord {
                j: 0,
                xi: 1.5,
                g_block_beta: 1.0,
                h_low: 0.5,
                h_high: 2.0,
                v_low: 0.0,
                v_high: 0.0,
                uv_zero: 0.0,
                uv_high: 0.0,
                u_alpha: 0.0,
                y_zero: 0.0,
                e_zero: 1e-3,
                e_high: 2e-2,
                residual: 1e-4,
                identity_defect: Some(1e-16),
                ratio_h: Some(0.33),
                ratio_v: None,
                ratio_uv: Some(0.0),
                ratio_u: Some(0.0),
                ball_ok: true,
            }],
            summary: RunSummary {
                converged: true,
                steps: 1,
                final_residual: 1e-4,
                a_measured: 1.0,
                a_c_measured: None,
                khat_h: Some(0.33),
                khat_v: None,
                khat_uv: Some(0.0),
                khat_u: Some(0.0),
                max_identity_defect: Some(1e-16),
                u_alpha: 0.0,
                lownorm_ratio: Some(0.0),
                highnorm_ratio: None,
                warnings: vec![],
            },
        }
    }

    #[test]
    fn csv_has_one_line_per_step_plus_header() {
        let r = sample_report();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().next().unwrap().starts_with("j,xi,"));
        // Missing ratios render as empty cells, keeping the column count.
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 20);
    }

    #[test]
    fn json_round_trips_to_the_same_bytes() {
        let r = sample_report();
        assert_eq!(r.to_json().unwrap(), r.to_json().unwrap());
    }
}
