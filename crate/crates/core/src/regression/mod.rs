//! Count regression for transition panels: Poisson, quasi-Poisson and
//! negative binomial GLMs, NB GLMMs with crossed random intercepts fitted by
//! Laplace approximation, AIC selection and Wald inference.

pub mod design;
pub mod family;
pub mod fit;
pub mod inference;
pub mod laplace;
pub mod model;
pub mod optim;
pub mod selection;
pub mod simulate;

pub use design::Design;
pub use family::{nb1_logpmf, nb2_logpmf, poisson_logpmf, Family};
pub use fit::{fit_glm, fit_glm_with, fit_glmm, fit_glmm_with, fit_model, FitOptions, BOUNDARY_VARIANCE};
pub use inference::{inference_table, wald_p, InferenceRow, InferenceTable};
pub use laplace::LaplaceObjective;
pub use model::{FittedModel, ModelSpec, OccupationFit, RandomEffectModes, RandomEffects, INTERCEPT};
pub use selection::{select_model, sign_robustness, underutilization_residuals, OccupationResidual, RankedModel, Selection};
pub use simulate::{simulate_panel, SimulatedPanel, SimulationConfig};

use crate::error::Result;
use crate::market::PredictorRow;

/// Fits each spec on its own thread; results come back in input order.
pub fn fit_candidates(specs: &[ModelSpec], rows: &[PredictorRow]) -> Vec<Result<FittedModel>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| scope.spawn(move || fit_model(spec, rows)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("model fitting thread panicked"))
            .collect()
    })
}
