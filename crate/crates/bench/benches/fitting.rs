use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pathways_core::capability::{similarity_scores, CapabilityRating, OccupationProfile};
use pathways_core::market::standardize_two_sd;
use pathways_core::regression::design::Design;
use pathways_core::regression::simulate::{simulate_panel, SimulationConfig};
use pathways_core::regression::{fit_model, Family, LaplaceObjective, ModelSpec, RandomEffects};

fn panel(occupations: usize) -> Vec<pathways_core::market::PredictorRow> {
    let cfg = SimulationConfig {
        occupations,
        ..Default::default()
    };
    standardize_two_sd(&simulate_panel(&cfg).unwrap().rows).unwrap().0
}

fn laplace(c: &mut Criterion) {
    let rows = panel(342);
    let spec = ModelSpec::new(Family::Nb1, RandomEffects::OccupationAndYear);
    let design = Design::new(&rows, &spec).unwrap();
    let objective = LaplaceObjective::new(&design, Family::Nb1, true, true);
    let theta = [-11.7, 1.571, 0.570, 0.908, 1.828, 0.694, 0.46, -2.3, 0.29];
    c.bench_function("laplace_evaluate_342x6", |b| {
        b.iter(|| objective.evaluate(black_box(&theta)).unwrap())
    });
}

fn fitting(c: &mut Criterion) {
    let rows = panel(80);
    let spec = ModelSpec::parse_id("nb1_glmm").unwrap();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("nb1_glmm_80x6", |b| b.iter(|| fit_model(&spec, black_box(&rows)).unwrap()));
    group.finish();
}

fn profiles(n: usize, items: usize) -> Vec<OccupationProfile> {
    (0..n)
        .map(|i| OccupationProfile {
            code: format!("{i:04}"),
            title: String::new(),
            ratings: (0..items)
                .map(|k| {
                    let t = (i * 31 + k * 17) as f64;
                    let rating = CapabilityRating {
                        level: 3.5 + 3.5 * t.sin(),
                        importance: 3.0 + 2.0 * (0.7 * t).cos(),
                    };
                    (format!("c{k:03}"), rating)
                })
                .collect(),
        })
        .collect()
}

fn similarity(c: &mut Criterion) {
    let all = profiles(1000, 120);
    c.bench_function("similarity_1000x120", |b| {
        b.iter(|| similarity_scores(black_box(&all[0]), black_box(&all[1..])).unwrap())
    });
}

criterion_group!(benches, laplace, fitting, similarity);
criterion_main!(benches);
