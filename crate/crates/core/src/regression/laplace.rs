//! Laplace-approximated marginal log-likelihood for count models with crossed
//! random intercepts.
//!
//! Random intercepts are written as `b = sigma * v` with `v ~ N(0, I)`, so the
//! joint log density is `f(v) = sum_i l_i(eta_i) - |v|^2 / 2` with
//! `eta_i = x_i beta + offset_i + sigma_occ v_j(i) + sigma_year v_t(i)`. The
//! approximation is
//!
//! ```text
//! L(theta) = f(v_hat) - log det(H) / 2,     H = Z' W Z + I
//! ```
//!
//! where `v_hat` is the mode of `f`, `W` the observed curvature of the
//! log-likelihood in `eta` and `Z` the scaled incidence matrix. The occupation
//! block of `H` is diagonal and the year block small and dense, so solves go
//! through the Schur complement on the year block.
//!
//! The gradient is exact: the envelope theorem handles `f(v_hat)`, and the
//! log-determinant term is differentiated through `v_hat` by implicit
//! differentiation of the mode condition. With no random factors the
//! objective reduces to the plain GLM log-likelihood.

use std::cell::RefCell;

use nalgebra::DMatrix;

use super::design::Design;
use super::family::{derivs, fisher_weight, Family, ObsDerivs};
use crate::error::{Error, Result};

/// Where each free parameter sits in the optimiser's vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub p: usize,
    pub occ: bool,
    pub year: bool,
    pub alpha: bool,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.p + usize::from(self.occ) + usize::from(self.year) + usize::from(self.alpha)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn occ_index(&self) -> Option<usize> {
        self.occ.then_some(self.p)
    }

    pub fn year_index(&self) -> Option<usize> {
        self.year.then(|| self.p + usize::from(self.occ))
    }

    pub fn alpha_index(&self) -> Option<usize> {
        self.alpha
            .then(|| self.p + usize::from(self.occ) + usize::from(self.year))
    }
}

/// Natural-scale parameter values decoded from a free vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub beta: Vec<f64>,
    pub sd_occ: f64,
    pub sd_year: f64,
    pub log_alpha: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Conditional modes on the intercept scale (`sigma * v`).
    pub occ_modes: Vec<f64>,
    pub year_modes: Vec<f64>,
}

/// The objective. Variance components that are not free are held at zero.
pub struct LaplaceObjective<'a> {
    design: &'a Design,
    family: Family,
    /// Occupation factor present in the model.
    has_occ: bool,
    has_year: bool,
    pub layout: Layout,
    /// Fixed `log(alpha)` when dispersion is not free (Poisson: unused).
    fixed_log_alpha: f64,
    mode_cache: RefCell<Vec<f64>>,
    pub inner_tol: f64,
}

struct Block {
    /// Occupation diagonal.
    a: Vec<f64>,
    /// Occupation x year coupling, row-major `J x T`.
    c: Vec<f64>,
    t: usize,
    /// Inverse Schur complement on the year block, row-major `T x T`.
    s_inv: Vec<f64>,
    logdet: f64,
}

impl Block {
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        let j_n = self.a.len();
        let t_n = self.t;
        let mut tmp = r[j_n..].to_vec();
        for j in 0..j_n {
            let f = r[j] / self.a[j];
            for t in 0..t_n {
                tmp[t] -= self.c[j * t_n + t] * f;
            }
        }
        let mut xb = vec![0.0; t_n];
        for (t, xt) in xb.iter_mut().enumerate() {
            *xt = (0..t_n).map(|u| self.s_inv[t * t_n + u] * tmp[u]).sum();
        }
        let mut out = Vec::with_capacity(j_n + t_n);
        for j in 0..j_n {
            let cx: f64 = (0..t_n).map(|t| self.c[j * t_n + t] * xb[t]).sum();
            out.push((r[j] - cx) / self.a[j]);
        }
        out.extend(xb);
        out
    }

    /// Diagonal entries of the inverse and the occupation x year cross entries.
    fn inverse_parts(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let j_n = self.a.len();
        let t_n = self.t;
        let mut p_occ = Vec::with_capacity(j_n);
        let mut p_cross = vec![0.0; j_n * t_n];
        for j in 0..j_n {
            let cj: Vec<f64> = (0..t_n).map(|t| self.c[j * t_n + t] / self.a[j]).collect();
            // (S^-1 c_j / a_j)
            let sc: Vec<f64> = (0..t_n)
                .map(|t| (0..t_n).map(|u| self.s_inv[t * t_n + u] * cj[u]).sum())
                .collect();
            let quad: f64 = cj.iter().zip(&sc).map(|(a, b)| a * b).sum();
            p_occ.push(1.0 / self.a[j] + quad);
            for t in 0..t_n {
                p_cross[j * t_n + t] = -sc[t];
            }
        }
        let p_year = (0..t_n).map(|t| self.s_inv[t * t_n + t]).collect();
        (p_occ, p_year, p_cross)
    }
}

impl<'a> LaplaceObjective<'a> {
    pub fn new(design: &'a Design, family: Family, has_occ: bool, has_year: bool) -> Self {
        let layout = Layout {
            p: design.p,
            occ: has_occ,
            year: has_year,
            alpha: family.has_dispersion(),
        };
        Self {
            design,
            family,
            has_occ,
            has_year,
            layout,
            fixed_log_alpha: 0.0,
            mode_cache: RefCell::new(Vec::new()),
            inner_tol: 1e-9,
        }
    }

    /// Holds the occupation and/or year variance at exactly zero.
    pub fn fix_at_zero(&mut self, occ: bool, year: bool) {
        self.layout.occ = self.has_occ && !occ;
        self.layout.year = self.has_year && !year;
        self.mode_cache.borrow_mut().clear();
    }

    pub fn decode(&self, theta: &[f64]) -> Params {
        let l = &self.layout;
        Params {
            beta: theta[..l.p].to_vec(),
            sd_occ: l.occ_index().map_or(0.0, |i| (0.5 * theta[i]).exp()),
            sd_year: l.year_index().map_or(0.0, |i| (0.5 * theta[i]).exp()),
            log_alpha: l.alpha_index().map_or(self.fixed_log_alpha, |i| theta[i]),
        }
    }

    fn n_occ(&self) -> usize {
        if self.has_occ { self.design.occ_levels.len() } else { 0 }
    }

    fn n_year(&self) -> usize {
        if self.has_year { self.design.year_levels.len() } else { 0 }
    }

    fn etas(&self, params: &Params, v: &[f64]) -> Vec<f64> {
        let d = self.design;
        let j_n = self.n_occ();
        (0..d.n())
            .map(|i| {
                let mut eta = d.linear(i, &params.beta);
                if self.has_occ {
                    eta += params.sd_occ * v[d.occ[i]];
                }
                if self.has_year {
                    eta += params.sd_year * v[j_n + d.year[i]];
                }
                eta
            })
            .collect()
    }

    fn obs(&self, params: &Params, etas: &[f64]) -> Vec<ObsDerivs> {
        etas.iter()
            .zip(&self.design.y)
            .map(|(eta, y)| derivs(self.family, *y, *eta, params.log_alpha))
            .collect()
    }

    fn build_block(&self, params: &Params, w: &[f64]) -> Option<Block> {
        let d = self.design;
        let (j_n, t_n) = (self.n_occ(), self.n_year());
        let so = if self.has_occ { params.sd_occ } else { 0.0 };
        let sy = if self.has_year { params.sd_year } else { 0.0 };
        // Weight totals per occupation x year cell (one cell per factor when
        // the other factor is absent).
        let cols = t_n.max(1);
        let mut cell = vec![0.0; j_n.max(1) * cols];
        for i in 0..d.n() {
            let j = if self.has_occ { d.occ[i] } else { 0 };
            let t = if self.has_year { d.year[i] } else { 0 };
            cell[j * cols + t] += w[i];
        }
        let mut a = vec![1.0; j_n];
        for (j, aj) in a.iter_mut().enumerate() {
            *aj += so * so * cell[j * cols..(j + 1) * cols].iter().sum::<f64>();
        }
        if a.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let mut c = vec![0.0; j_n * t_n];
        for j in 0..j_n {
            for t in 0..t_n {
                c[j * t_n + t] = so * sy * cell[j * cols + t];
            }
        }
        // Schur complement of the occupation block. The diagonal is expanded
        // as w_jt (1 + so^2 (W_j - w_jt)) / a_j, which avoids subtracting two
        // large numbers when the weights are big.
        let mut s = DMatrix::<f64>::identity(t_n, t_n);
        let rows = if self.has_occ { j_n } else { 1 };
        for j in 0..rows {
            let row = &cell[j * cols..(j + 1) * cols];
            let aj = if self.has_occ { a[j] } else { 1.0 };
            let total: f64 = row.iter().sum();
            for t in 0..t_n {
                let wt = row[t];
                if wt == 0.0 {
                    continue;
                }
                s[(t, t)] += sy * sy * wt * (1.0 + so * so * (total - wt)) / aj;
                for u in 0..t_n {
                    if u != t {
                        s[(t, u)] -= so * so * sy * sy * wt * row[u] / aj;
                    }
                }
            }
        }
        let chol = s.cholesky()?;
        let logdet = a.iter().map(|v| v.ln()).sum::<f64>()
            + 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let s_inv = chol.inverse();
        Some(Block {
            a,
            c,
            t: t_n,
            s_inv: s_inv.transpose().as_slice().to_vec(),
            logdet,
        })
    }

    fn mode_gradient(&self, params: &Params, v: &[f64], obs: &[ObsDerivs]) -> Vec<f64> {
        let d = self.design;
        let j_n = self.n_occ();
        let mut g: Vec<f64> = v.iter().map(|x| -x).collect();
        for (i, o) in obs.iter().enumerate() {
            if self.has_occ {
                g[d.occ[i]] += params.sd_occ * o.s;
            }
            if self.has_year {
                g[j_n + d.year[i]] += params.sd_year * o.s;
            }
        }
        g
    }

    /// Rounding error of the largest mode-gradient component.
    fn gradient_noise(&self, params: &Params, v: &[f64], obs: &[ObsDerivs]) -> f64 {
        let d = self.design;
        let j_n = self.n_occ();
        let mut mag: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        for (i, o) in obs.iter().enumerate() {
            if self.has_occ {
                mag[d.occ[i]] += params.sd_occ * o.s.abs();
            }
            if self.has_year {
                mag[j_n + d.year[i]] += params.sd_year * o.s.abs();
            }
        }
        64.0 * f64::EPSILON * mag.iter().fold(0.0_f64, |m, x| m.max(*x))
    }

    fn joint(obs: &[ObsDerivs], v: &[f64]) -> f64 {
        obs.iter().map(|o| o.loglik).sum::<f64>() - 0.5 * v.iter().map(|x| x * x).sum::<f64>()
    }

    /// Mode of `f(v)`, warm-started from the previous mode. A warm start left
    /// by a far-off trial point can fail, so the search is repeated from zero.
    fn find_mode(&self, params: &Params) -> Result<Vec<f64>> {
        let q = self.n_occ() + self.n_year();
        if q == 0 {
            return Ok(Vec::new());
        }
        let cache = self.mode_cache.borrow().clone();
        if cache.len() == q && cache.iter().any(|x| *x != 0.0) {
            if let Ok(v) = self.newton_mode(params, cache) {
                return Ok(v);
            }
        }
        self.newton_mode(params, vec![0.0; q])
    }

    /// Newton iterations for the mode of `f(v)` from `v`.
    fn newton_mode(&self, params: &Params, mut v: Vec<f64>) -> Result<Vec<f64>> {
        let mut etas = self.etas(params, &v);
        let mut obs = self.obs(params, &etas);
        let mut f = Self::joint(&obs, &v);
        for _ in 0..200 {
            let g = self.mode_gradient(params, &v, &obs);
            let gmax = g.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if gmax < self.inner_tol {
                *self.mode_cache.borrow_mut() = v.clone();
                return Ok(v);
            }
            let w: Vec<f64> = obs.iter().map(|o| o.w).collect();
            let block = self.build_block(params, &w).or_else(|| {
                let wf: Vec<f64> = etas
                    .iter()
                    .map(|e| fisher_weight(self.family, *e, params.log_alpha))
                    .collect();
                self.build_block(params, &wf)
            });
            let Some(block) = block else {
                return Err(Error::Convergence("mode Hessian is not positive definite".into()));
            };
            let step = block.solve(&g);
            // Near the mode the gain in f falls below its rounding error, so a
            // step that keeps f within that error and shrinks the gradient is
            // also accepted.
            let noise = 1e-11 * f.abs().max(1.0);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..50 {
                let vn: Vec<f64> = v.iter().zip(&step).map(|(a, b)| a + t * b).collect();
                let en = self.etas(params, &vn);
                let on = self.obs(params, &en);
                let fnew = Self::joint(&on, &vn);
                let ok = fnew.is_finite()
                    && (fnew > f || {
                        let gn = self.mode_gradient(params, &vn, &on);
                        fnew >= f - noise && gn.iter().fold(0.0_f64, |m, x| m.max(x.abs())) < gmax
                    });
                if ok {
                    accepted = true;
                    v = vn;
                    etas = en;
                    obs = on;
                    f = fnew;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // A gradient already at the rounding level of its own terms
                // cannot be reduced further.
                if gmax <= self.gradient_noise(params, &v, &obs) {
                    *self.mode_cache.borrow_mut() = v.clone();
                    return Ok(v);
                }
                return Err(Error::Convergence(format!(
                    "random-effect mode search stalled at gradient {gmax:e}"
                )));
            }
        }
        Err(Error::Convergence("random-effect mode search hit its iteration limit".into()))
    }

    /// Value, exact gradient and conditional modes at `theta`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let params = self.decode(theta);
        let v = self.find_mode(&params)?;
        let d = self.design;
        let (j_n, t_n) = (self.n_occ(), self.n_year());
        let q = j_n + t_n;
        let etas = self.etas(&params, &v);
        let obs = self.obs(&params, &etas);
        let (so, sy) = (params.sd_occ, params.sd_year);
        let l = self.layout;
        let mut gradient = vec![0.0; l.len()];

        let occ_modes: Vec<f64> = v[..j_n].iter().map(|x| so * x).collect();
        let year_modes: Vec<f64> = v[j_n..].iter().map(|x| sy * x).collect();

        if q == 0 {
            let value: f64 = obs.iter().map(|o| o.loglik).sum();
            for (i, o) in obs.iter().enumerate() {
                for (k, xk) in d.row(i).iter().enumerate() {
                    gradient[k] += o.s * xk;
                }
                if let Some(ai) = l.alpha_index() {
                    gradient[ai] += o.l_phi;
                }
            }
            return finish(value, gradient, occ_modes, year_modes);
        }

        let w: Vec<f64> = obs.iter().map(|o| o.w).collect();
        let block = self
            .build_block(&params, &w)
            .ok_or_else(|| Error::Convergence("Laplace Hessian is not positive definite at the mode".into()))?;
        let value = Self::joint(&obs, &v) - 0.5 * block.logdet;

        let (p_occ, p_year, p_cross) = block.inverse_parts();
        let occ_of = |i: usize| d.occ[i];
        let year_of = |i: usize| d.year[i];
        let leverage: Vec<f64> = (0..d.n())
            .map(|i| {
                let mut h = 0.0;
                if self.has_occ {
                    h += so * so * p_occ[occ_of(i)];
                }
                if self.has_year {
                    h += sy * sy * p_year[year_of(i)];
                }
                if self.has_occ && self.has_year {
                    h += 2.0 * so * sy * p_cross[occ_of(i) * t_n + year_of(i)];
                }
                h
            })
            .collect();

        #[derive(Clone, Copy, PartialEq)]
        enum Kind {
            Beta(usize),
            Occ,
            Year,
            Alpha,
        }
        let mut kinds: Vec<Kind> = (0..l.p).map(Kind::Beta).collect();
        if l.occ {
            kinds.push(Kind::Occ);
        }
        if l.year {
            kinds.push(Kind::Year);
        }
        if l.alpha {
            kinds.push(Kind::Alpha);
        }

        let mut e = vec![0.0; d.n()];
        for (k, kind) in kinds.iter().enumerate() {
            for i in 0..d.n() {
                e[i] = match *kind {
                    Kind::Beta(b) => d.row(i)[b],
                    Kind::Occ => 0.5 * so * v[occ_of(i)],
                    Kind::Year => 0.5 * sy * v[j_n + year_of(i)],
                    Kind::Alpha => 0.0,
                };
            }
            let is_alpha = *kind == Kind::Alpha;
            let mut direct = 0.0;
            let mut dg = vec![0.0; q];
            for (i, o) in obs.iter().enumerate() {
                direct += o.s * e[i];
                if is_alpha {
                    direct += o.l_phi;
                }
                let r = -o.w * e[i] + if is_alpha { o.s_phi } else { 0.0 };
                if self.has_occ {
                    dg[occ_of(i)] += so * r;
                    if *kind == Kind::Occ {
                        dg[occ_of(i)] += 0.5 * so * o.s;
                    }
                }
                if self.has_year {
                    dg[j_n + year_of(i)] += sy * r;
                    if *kind == Kind::Year {
                        dg[j_n + year_of(i)] += 0.5 * sy * o.s;
                    }
                }
            }
            let dv = block.solve(&dg);
            let mut trace = 0.0;
            for (i, o) in obs.iter().enumerate() {
                let mut deta = e[i];
                if self.has_occ {
                    deta += so * dv[occ_of(i)];
                }
                if self.has_year {
                    deta += sy * dv[j_n + year_of(i)];
                }
                let dw = o.w3 * deta + if is_alpha { o.w_phi } else { 0.0 };
                trace += dw * leverage[i];
                match *kind {
                    Kind::Occ => {
                        let mut pz = so * p_occ[occ_of(i)];
                        if self.has_year {
                            pz += sy * p_cross[occ_of(i) * t_n + year_of(i)];
                        }
                        trace += o.w * so * pz;
                    }
                    Kind::Year => {
                        let mut pz = sy * p_year[year_of(i)];
                        if self.has_occ {
                            pz += so * p_cross[occ_of(i) * t_n + year_of(i)];
                        }
                        trace += o.w * sy * pz;
                    }
                    _ => {}
                }
            }
            gradient[k] = direct - 0.5 * trace;
        }
        finish(value, gradient, occ_modes, year_modes)
    }

    /// Laplace objective with the variances held at given natural-scale values
    /// (zero allowed) and no gradient; used for boundary checks and nesting tests.
    pub fn value_at(&self, beta: &[f64], sigma2_occ: f64, sigma2_year: f64, log_alpha: f64) -> Result<f64> {
        let mut shadow = LaplaceObjective::new(self.design, self.family, self.has_occ, self.has_year);
        shadow.fixed_log_alpha = log_alpha;
        shadow.layout.alpha = false;
        shadow.inner_tol = self.inner_tol;
        shadow.fix_at_zero(sigma2_occ == 0.0, sigma2_year == 0.0);
        let mut theta = beta.to_vec();
        if shadow.layout.occ {
            theta.push(sigma2_occ.ln());
        }
        if shadow.layout.year {
            theta.push(sigma2_year.ln());
        }
        Ok(shadow.evaluate(&theta)?.value)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn design(&self) -> &Design {
        self.design
    }
}

fn finish(value: f64, gradient: Vec<f64>, occ_modes: Vec<f64>, year_modes: Vec<f64>) -> Result<Evaluation> {
    if !value.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::Convergence("objective is not finite".into()));
    }
    Ok(Evaluation {
        value,
        gradient,
        occ_modes,
        year_modes,
    })
}
