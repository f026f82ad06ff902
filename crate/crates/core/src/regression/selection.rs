use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{FittedModel, INTERCEPT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub id: String,
    pub aic: f64,
    pub n_params: usize,
    pub delta_aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: String,
    pub ranking: Vec<RankedModel>,
    /// Fits without a likelihood (quasi-Poisson), kept for the report.
    pub unranked: Vec<String>,
}

/// Ranks likelihood-based fits by AIC, ties broken by fewer parameters.
pub fn select_model(fits: &[FittedModel]) -> Result<Selection> {
    if fits.is_empty() {
        return Err(Error::Empty("no candidate models".into()));
    }
    let mut ranked: Vec<&FittedModel> = fits.iter().filter(|f| f.aic.is_some_and(f64::is_finite)).collect();
    let unranked = fits
        .iter()
        .filter(|f| !f.aic.is_some_and(f64::is_finite))
        .map(|f| f.id.clone())
        .collect();
    if ranked.is_empty() {
        return Err(Error::Empty("no candidate has an AIC".into()));
    }
    ranked.sort_by(|a, b| {
        a.aic
            .unwrap()
            .total_cmp(&b.aic.unwrap())
            .then(a.n_params.cmp(&b.n_params))
            .then_with(|| a.id.cmp(&b.id))
    });
    let best_aic = ranked[0].aic.unwrap();
    Ok(Selection {
        best: ranked[0].id.clone(),
        ranking: ranked
            .iter()
            .map(|f| RankedModel {
                id: f.id.clone(),
                aic: f.aic.unwrap(),
                n_params: f.n_params,
                delta_aic: f.aic.unwrap() - best_aic,
            })
            .collect(),
        unranked,
    })
}

/// Per predictor, whether every fit's coefficient has the same strict sign.
pub fn sign_robustness(fits: &[FittedModel]) -> BTreeMap<String, bool> {
    let mut out = BTreeMap::new();
    let Some(first) = fits.first() else {
        return out;
    };
    for term in first.terms.iter().filter(|t| *t != INTERCEPT) {
        let signs: Vec<Option<f64>> = fits.iter().map(|f| f.coefficient(term)).collect();
        let agree = match signs.first().copied().flatten() {
            Some(s0) if s0 != 0.0 => signs
                .iter()
                .all(|s| s.is_some_and(|v| v != 0.0 && v.signum() == s0.signum())),
            _ => false,
        };
        out.insert(term.clone(), agree);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationResidual {
    pub occupation_code: String,
    pub intercept: f64,
    pub observed_mean: f64,
    pub expected_mean: f64,
}

/// Occupations ordered by conditional intercept, most negative first.
pub fn underutilization_residuals(fit: &FittedModel) -> Result<Vec<OccupationResidual>> {
    if !fit.spec.random_effects.has_occupation() {
        return Err(Error::InvalidParameter(
            "underutilisation residuals need occupation random intercepts".into(),
        ));
    }
    let mut out: Vec<OccupationResidual> = fit
        .occupation_fit
        .iter()
        .map(|(code, o)| OccupationResidual {
            occupation_code: code.clone(),
            intercept: o.intercept,
            observed_mean: o.observed_mean,
            expected_mean: o.expected_mean,
        })
        .collect();
    out.sort_by(|a, b| {
        a.intercept
            .total_cmp(&b.intercept)
            .then_with(|| a.occupation_code.cmp(&b.occupation_code))
    });
    Ok(out)
}
