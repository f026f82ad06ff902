use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::model::{ModelSpec, INTERCEPT};
use crate::error::{Error, Result};
use crate::market::PredictorRow;

/// Dense design with the grouping indices used by the random intercepts.
#[derive(Debug, Clone)]
pub struct Design {
    pub terms: Vec<String>,
    /// Row-major `n x p`.
    pub x: Vec<f64>,
    pub p: usize,
    pub y: Vec<u64>,
    pub offset: Vec<f64>,
    pub occ: Vec<usize>,
    pub occ_levels: Vec<String>,
    pub year: Vec<usize>,
    pub year_levels: Vec<i32>,
}

impl Design {
    pub fn new(rows: &[PredictorRow], spec: &ModelSpec) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("no observations".into()));
        }
        let mut terms = vec![INTERCEPT.to_string()];
        terms.extend(spec.predictors.iter().map(|p| p.name().to_string()));
        let p = terms.len();
        let mut x = Vec::with_capacity(rows.len() * p);
        for r in rows {
            x.push(1.0);
            x.extend(spec.predictors.iter().map(|pr| r.predictor(*pr)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite predictor value".into()));
        }
        let offset = rows
            .iter()
            .map(|r| if spec.offset { r.origin_exposure.ln() } else { 0.0 })
            .collect();

        let occ_map: BTreeMap<&str, usize> = {
            let mut codes: Vec<&str> = rows.iter().map(|r| r.occupation_code.as_str()).collect();
            codes.sort();
            codes.dedup();
            codes.into_iter().enumerate().map(|(i, c)| (c, i)).collect()
        };
        let year_map: BTreeMap<i32, usize> = {
            let mut years: Vec<i32> = rows.iter().map(|r| r.year).collect();
            years.sort();
            years.dedup();
            years.into_iter().enumerate().map(|(i, y)| (y, i)).collect()
        };

        let design = Design {
            terms,
            p,
            y: rows.iter().map(|r| r.transitions).collect(),
            offset,
            occ: rows.iter().map(|r| occ_map[r.occupation_code.as_str()]).collect(),
            occ_levels: occ_map.keys().map(|s| s.to_string()).collect(),
            year: rows.iter().map(|r| year_map[&r.year]).collect(),
            year_levels: year_map.keys().copied().collect(),
            x,
        };
        design.check_rank()?;
        Ok(design)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn linear(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + self.offset[i]
    }

    fn check_rank(&self) -> Result<()> {
        if self.n() < self.p {
            return Err(Error::RankDeficient);
        }
        // scale columns before the Gram check so units do not matter
        let scale: Vec<f64> = (0..self.p)
            .map(|j| {
                let ss: f64 = (0..self.n()).map(|i| self.row(i)[j].powi(2)).sum();
                if ss > 0.0 { 1.0 / ss.sqrt() } else { 0.0 }
            })
            .collect();
        if scale.iter().any(|s| *s == 0.0) {
            return Err(Error::RankDeficient);
        }
        let mut gram = DMatrix::<f64>::zeros(self.p, self.p);
        for i in 0..self.n() {
            let r = self.row(i);
            for a in 0..self.p {
                for b in 0..self.p {
                    gram[(a, b)] += r[a] * scale[a] * r[b] * scale[b];
                }
            }
        }
        let eig = gram.symmetric_eigenvalues();
        let max = eig.max();
        if eig.min() <= 1e-12 * max {
            return Err(Error::RankDeficient);
        }
        Ok(())
    }
}
