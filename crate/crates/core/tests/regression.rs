mod common;

use common::{check_gradient, rel_err, small_panel};
use pathways_core::regression::design::Design;
use pathways_core::market::{standardize_two_sd, PredictorRow};
use pathways_core::regression::simulate::{simulate_panel, SimulationConfig};
use pathways_core::regression::*;

#[test]
fn nb1_glm_gradient_matches_finite_differences() {
    let rows = small_panel(40, Family::Nb1, 11);
    let design = Design::new(&rows, &ModelSpec::new(Family::Nb1, RandomEffects::None)).unwrap();
    let worst = check_gradient(&design, Family::Nb1, false, false, 1);
    assert!(worst < 1e-6, "worst relative error {worst:e}");
}

#[test]
fn laplace_gradients_match_finite_differences() {
    let rows = small_panel(40, Family::Nb1, 12);
    let design = Design::new(&rows, &ModelSpec::new(Family::Nb1, RandomEffects::OccupationAndYear)).unwrap();
    for (family, occ, year) in [
        (Family::Nb1, true, true),
        (Family::Nb1, true, false),
        (Family::Nb2, true, true),
        (Family::Poisson, true, true),
    ] {
        let worst = check_gradient(&design, family, occ, year, 2);
        assert!(worst < 1e-6, "{family:?} occ={occ} year={year}: worst relative error {worst:e}");
    }
}

fn intercept_only(family: Family, random_effects: RandomEffects, offset: bool) -> ModelSpec {
    ModelSpec {
        offset,
        predictors: Vec::new(),
        ..ModelSpec::new(family, random_effects)
    }
}

#[test]
fn poisson_intercept_is_log_rate() {
    let rows = small_panel(30, Family::Poisson, 3);
    let fit = fit_model(&intercept_only(Family::Poisson, RandomEffects::None, true), &rows).unwrap();
    let y: f64 = rows.iter().map(|r| r.transitions as f64).sum();
    let e: f64 = rows.iter().map(|r| r.origin_exposure).sum();
    assert!(rel_err(fit.beta[0], (y / e).ln()) < 1e-8, "{} vs {}", fit.beta[0], (y / e).ln());
}

#[test]
fn nb2_intercept_is_log_sample_mean() {
    let rows = small_panel(30, Family::Nb2, 4);
    let fit = fit_model(&intercept_only(Family::Nb2, RandomEffects::None, false), &rows).unwrap();
    let mean = rows.iter().map(|r| r.transitions as f64).sum::<f64>() / rows.len() as f64;
    assert!(rel_err(fit.beta[0], mean.ln()) < 1e-6, "{} vs {}", fit.beta[0], mean.ln());
}

#[test]
fn nested_models_do_not_lose_likelihood() {
    let rows = small_panel(60, Family::Nb1, 21);
    let ll = |id: &str| fit_model(&ModelSpec::parse_id(id).unwrap(), &rows).unwrap().loglik.unwrap();
    let chain = ["poisson", "nb1_glm", "nb1_glmm_occ", "nb1_glmm"];
    let values: Vec<f64> = chain.iter().map(|id| ll(id)).collect();
    for (pair, ids) in values.windows(2).zip(chain.windows(2)) {
        assert!(pair[1] >= pair[0] - 1e-6, "{} {} < {} {}", ids[1], pair[1], ids[0], pair[0]);
    }
    assert!(ll("nb2_glm") >= values[0] - 1e-6);
}

#[test]
fn identical_years_put_year_variance_on_the_boundary() {
    let rows = small_panel(50, Family::Nb1, 5);
    let first = rows.iter().map(|r| r.year).min().unwrap();
    let base: Vec<PredictorRow> = rows.iter().filter(|r| r.year == first).cloned().collect();
    let copies: Vec<PredictorRow> = (0..4)
        .flat_map(|k| {
            base.iter().map(move |r| PredictorRow {
                year: first + k,
                ..r.clone()
            })
        })
        .collect();
    let fit = fit_model(&ModelSpec::parse_id("nb1_glmm").unwrap(), &copies).unwrap();
    assert!(fit.boundary.contains(&"sigma2_year".to_string()), "{:?}", fit.boundary);
    assert_eq!(fit.sigma2_year, Some(0.0));
    assert!(!fit.boundary.contains(&"sigma2_occ".to_string()));
}

#[test]
fn selection_ranks_by_aic_and_skips_quasi_poisson() {
    let rows = small_panel(60, Family::Nb1, 8);
    let fits: Vec<FittedModel> = fit_candidates(&ModelSpec::candidates(), &rows)
        .into_iter()
        .collect::<pathways_core::Result<_>>()
        .unwrap();
    let selection = select_model(&fits).unwrap();
    assert_eq!(selection.unranked, vec!["quasi_poisson".to_string()]);
    assert_eq!(selection.ranking.len(), fits.len() - 1);
    let min_aic = fits.iter().filter_map(|f| f.aic).fold(f64::INFINITY, f64::min);
    assert_eq!(selection.ranking[0].aic, min_aic);
    assert_eq!(selection.ranking[0].delta_aic, 0.0);
    assert!(selection.ranking.windows(2).all(|w| w[0].aic <= w[1].aic));
    assert_eq!(selection.best, selection.ranking[0].id);
}

#[test]
fn nb2_dispersion_is_recovered() {
    let cfg = SimulationConfig {
        family: Family::Nb2,
        alpha: 0.4,
        occupations: 200,
        seed: 77,
        ..Default::default()
    };
    let panel = simulate_panel(&cfg).unwrap();
    let (rows, _) = standardize_two_sd(&panel.rows).unwrap();
    let fit = fit_model(&ModelSpec::parse_id("nb2_glmm").unwrap(), &rows).unwrap();
    assert!(fit.converged, "{}", fit.message);
    let alpha = fit.alpha.unwrap();
    assert!((alpha / cfg.alpha - 1.0).abs() < 0.3, "alpha {alpha}");
}
