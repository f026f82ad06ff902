use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::family::Family;
use crate::error::{Error, Result};
use crate::market::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomEffects {
    None,
    OccupationOnly,
    OccupationAndYear,
}

impl RandomEffects {
    pub fn has_occupation(self) -> bool {
        !matches!(self, RandomEffects::None)
    }

    pub fn has_year(self) -> bool {
        matches!(self, RandomEffects::OccupationAndYear)
    }

    pub fn count(self) -> usize {
        match self {
            RandomEffects::None => 0,
            RandomEffects::OccupationOnly => 1,
            RandomEffects::OccupationAndYear => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub random_effects: RandomEffects,
    /// Include `log(origin_exposure)` as an offset.
    pub offset: bool,
    pub predictors: Vec<Predictor>,
}

impl ModelSpec {
    pub fn new(family: Family, random_effects: RandomEffects) -> Self {
        Self {
            family,
            random_effects,
            offset: true,
            predictors: Predictor::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == Family::QuasiPoisson && self.random_effects != RandomEffects::None {
            return Err(Error::InvalidParameter(
                "quasi-Poisson is only fitted without random effects".into(),
            ));
        }
        let mut seen = self.predictors.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.predictors.len() {
            return Err(Error::InvalidParameter("duplicate predictor in model spec".into()));
        }
        Ok(())
    }

    /// Short identifier, e.g. `nb1_glmm` or `nb1_glmm_occ`.
    pub fn id(&self) -> String {
        let fam = match self.family {
            Family::Poisson => "poisson",
            Family::QuasiPoisson => "quasi_poisson",
            Family::Nb1 => "nb1",
            Family::Nb2 => "nb2",
        };
        match self.random_effects {
            RandomEffects::None if matches!(self.family, Family::Nb1 | Family::Nb2) => format!("{fam}_glm"),
            RandomEffects::None => fam.to_string(),
            RandomEffects::OccupationOnly => format!("{fam}_glmm_occ"),
            RandomEffects::OccupationAndYear => format!("{fam}_glmm"),
        }
    }

    pub fn parse_id(id: &str) -> Option<ModelSpec> {
        let (family, re) = match id {
            "poisson" => (Family::Poisson, RandomEffects::None),
            "quasi_poisson" => (Family::QuasiPoisson, RandomEffects::None),
            "nb1_glm" => (Family::Nb1, RandomEffects::None),
            "nb2_glm" => (Family::Nb2, RandomEffects::None),
            "poisson_glmm" => (Family::Poisson, RandomEffects::OccupationAndYear),
            "nb1_glmm" => (Family::Nb1, RandomEffects::OccupationAndYear),
            "nb2_glmm" => (Family::Nb2, RandomEffects::OccupationAndYear),
            "nb1_glmm_occ" => (Family::Nb1, RandomEffects::OccupationOnly),
            "nb2_glmm_occ" => (Family::Nb2, RandomEffects::OccupationOnly),
            _ => return None,
        };
        Some(ModelSpec::new(family, re))
    }

    pub fn label(&self) -> String {
        let suffix = match self.random_effects {
            RandomEffects::None => "GLM".to_string(),
            RandomEffects::OccupationOnly => "GLMM (occupation intercepts only)".to_string(),
            RandomEffects::OccupationAndYear => "GLMM".to_string(),
        };
        format!("{}-{}", self.family.label(), suffix)
    }

    /// The candidate set: the NB1 GLMM and its six alternatives.
    pub fn candidates() -> Vec<ModelSpec> {
        [
            "poisson",
            "quasi_poisson",
            "nb1_glm",
            "nb2_glm",
            "nb2_glmm",
            "nb1_glmm_occ",
            "nb1_glmm",
        ]
        .into_iter()
        .map(|id| ModelSpec::parse_id(id).expect("known id"))
        .collect()
    }
}

/// Conditional mean of one occupation's transitions against the fixed-effect expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationFit {
    pub intercept: f64,
    pub observed_mean: f64,
    /// Mean of `exp(x beta + offset + year intercept)`, i.e. with the occupation intercept at 0.
    pub expected_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RandomEffectModes {
    pub occupation: BTreeMap<String, f64>,
    pub year: BTreeMap<i32, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub id: String,
    pub terms: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub p: Vec<f64>,
    pub sigma2_occ: Option<f64>,
    pub sigma2_year: Option<f64>,
    pub alpha: Option<f64>,
    /// Pearson dispersion, quasi-Poisson only.
    pub dispersion: Option<f64>,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    /// Estimated parameters counted by AIC.
    pub n_params: usize,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_max_norm: f64,
    pub message: String,
    /// Variance components estimated on the boundary (exactly zero).
    pub boundary: Vec<String>,
    pub se_method: String,
    pub random_effect_modes: RandomEffectModes,
    pub occupation_fit: BTreeMap<String, OccupationFit>,
}

impl FittedModel {
    /// Coefficient of the named term, if present.
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.beta[i])
    }
}

pub const INTERCEPT: &str = "(Intercept)";
