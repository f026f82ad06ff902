use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::model::FittedModel;

/// Normal quantile used for 95% Wald intervals.
pub const Z_95: f64 = 1.96;

/// Two-sided Wald p-value for `estimate / se` against a standard normal.
pub fn wald_p(estimate: f64, se: f64) -> f64 {
    if !(se > 0.0) || !se.is_finite() {
        return f64::NAN;
    }
    let z = (estimate / se).abs();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * normal.sf(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRow {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub p: f64,
    pub irr: f64,
    pub irr_ci_low: f64,
    pub irr_ci_high: f64,
}

impl InferenceRow {
    pub fn new(term: impl Into<String>, estimate: f64, se: f64) -> Self {
        Self {
            term: term.into(),
            estimate,
            se,
            p: wald_p(estimate, se),
            irr: estimate.exp(),
            irr_ci_low: (estimate - Z_95 * se).exp(),
            irr_ci_high: (estimate + Z_95 * se).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceTable {
    pub model: String,
    pub rows: Vec<InferenceRow>,
}

impl InferenceTable {
    pub fn row(&self, term: &str) -> Option<&InferenceRow> {
        self.rows.iter().find(|r| r.term == term)
    }
}

/// Estimates, Wald p-values and incidence rate ratios with 95% intervals.
pub fn inference_table(fit: &FittedModel) -> InferenceTable {
    InferenceTable {
        model: fit.id.clone(),
        rows: fit
            .terms
            .iter()
            .zip(fit.beta.iter().zip(&fit.se))
            .map(|(t, (b, s))| InferenceRow::new(t.clone(), *b, *s))
            .collect(),
    }
}
