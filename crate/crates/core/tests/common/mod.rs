//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use pathways_core::market::{standardize_two_sd, PredictorRow};
use pathways_core::regression::design::Design;
use pathways_core::regression::simulate::{simulate_panel, SimulationConfig};
use pathways_core::regression::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_panel(occupations: usize, family: Family, seed: u64) -> Vec<PredictorRow> {
    let cfg = SimulationConfig {
        occupations,
        family,
        sigma2_occ: 1.0,
        sigma2_year: 0.05,
        seed,
        ..Default::default()
    };
    let panel = simulate_panel(&cfg).unwrap();
    standardize_two_sd(&panel.rows).unwrap().0
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn check_gradient(design: &Design, family: Family, occ: bool, year: bool, seed: u64) -> f64 {
    let mut obj = LaplaceObjective::new(design, family, occ, year);
    // finite differences of the Laplace value need a tightly converged mode
    obj.inner_tol = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut theta: Vec<f64> = vec![-11.0 + rng.gen_range(-0.5..0.5)];
        theta.extend((1..design.p).map(|_| rng.gen_range(-0.5..1.5)));
        if occ {
            theta.push(rng.gen_range(-1.5..1.0));
        }
        if year {
            theta.push(rng.gen_range(-4.0..-1.0));
        }
        if family.has_dispersion() {
            theta.push(rng.gen_range(-1.0..1.0));
        }
        let g = obj.evaluate(&theta).unwrap().gradient;
        for k in 0..theta.len() {
            let central = |h: f64| {
                let mut up = theta.clone();
                up[k] += h;
                let mut dn = theta.clone();
                dn[k] -= h;
                (obj.evaluate(&up).unwrap().value - obj.evaluate(&dn).unwrap().value) / (2.0 * h)
            };
            // Richardson extrapolation removes the h^2 truncation term
            let h = 1e-3 * theta[k].abs().max(1.0);
            let fd = (4.0 * central(h / 2.0) - central(h)) / 3.0;
            worst = worst.max(rel_err(g[k], fd));
        }
    }
    worst
}

