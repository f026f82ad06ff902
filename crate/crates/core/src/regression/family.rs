//! Count families on the log link and their per-observation derivatives.
//!
//! Everything is expressed in the linear predictor `eta = log(mu)` and, for the
//! negative binomial families, in `phi = log(alpha)`. Terms of the form
//! `lgamma(y + r) - lgamma(r)` and the matching polygamma differences are
//! evaluated as finite sums over `k < y` for small counts and by asymptotic
//! series for large ones. Both forms stay accurate as `alpha -> 0`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Poisson,
    QuasiPoisson,
    /// Variance `mu (1 + alpha)`.
    Nb1,
    /// Variance `mu (1 + alpha mu)`.
    Nb2,
}

impl Family {
    pub fn has_dispersion(self) -> bool {
        matches!(self, Family::Nb1 | Family::Nb2)
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::Poisson => "Poisson",
            Family::QuasiPoisson => "quasi-Poisson",
            Family::Nb1 => "NB1",
            Family::Nb2 => "NB2",
        }
    }
}

/// Log-likelihood contribution and derivatives for one observation.
///
/// `s = dl/deta`, `w = -d2l/deta2`, `w3 = dw/deta`; the `*_phi` fields are the
/// partial derivatives of `l`, `s` and `w` with respect to `log(alpha)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObsDerivs {
    pub loglik: f64,
    pub s: f64,
    pub w: f64,
    pub w3: f64,
    pub l_phi: f64,
    pub s_phi: f64,
    pub w_phi: f64,
}

const MAX_ETA: f64 = 700.0;

fn ln_factorial(y: u64) -> f64 {
    ln_gamma(y as f64 + 1.0)
}

/// Poisson log probability mass.
pub fn poisson_logpmf(y: u64, mu: f64) -> f64 {
    if y == 0 {
        -mu
    } else {
        y as f64 * mu.ln() - mu - ln_factorial(y)
    }
}

/// NB1 log probability mass with mean `mu` and variance `mu (1 + alpha)`.
///
/// This is the negative binomial with size `mu / alpha` and success probability
/// `1 / (1 + alpha)`; `alpha = 0` gives the Poisson limit.
pub fn nb1_logpmf(y: u64, mu: f64, alpha: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be nonnegative, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(poisson_logpmf(y, mu));
    }
    Ok(nb1_terms(y, mu, alpha).0)
}

/// NB2 log probability mass with mean `mu` and variance `mu (1 + alpha mu)`.
pub fn nb2_logpmf(y: u64, mu: f64, alpha: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be nonnegative, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(poisson_logpmf(y, mu));
    }
    Ok(nb2_derivs(y, mu.ln(), alpha.ln()).loglik)
}

/// `log1p(a) / a`, continuous at 0.
fn log1p_over(a: f64) -> f64 {
    if a.abs() < 1e-8 {
        1.0 - a / 2.0 + a * a / 3.0
    } else {
        a.ln_1p() / a
    }
}

/// Sums over `k < y` of `ln(1 + k/r)` and of the first three powers of
/// `r / (r + k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RisingSums {
    log: f64,
    s1: f64,
    s2: f64,
    s3: f64,
}

/// Counts up to this size are summed term by term.
const DIRECT_SUM_MAX: u64 = 32;
/// Smallest argument at which the asymptotic series are used.
const ASYMPTOTIC_MIN: f64 = 20.0;

fn direct_sums(r: f64, from: u64, to: u64) -> RisingSums {
    let mut out = RisingSums {
        log: 0.0,
        s1: 0.0,
        s2: 0.0,
        s3: 0.0,
    };
    for k in from..to {
        let x = k as f64 / r;
        out.log += x.ln_1p();
        let q = 1.0 / (1.0 + x);
        out.s1 += q;
        out.s2 += q * q;
        out.s3 += q * q * q;
    }
    out
}

// Tails of the asymptotic expansions past their leading terms:
// lgamma(x) = (x - 1/2) ln x - x + ln(2 pi)/2 + lgamma_tail(x),
// digamma(x) = ln x + digamma_tail(x),
// trigamma(x) = 1/x + 1/(2 x^2) + trigamma_tail(x),
// sum_{k >= 0} (x + k)^-3 = 1/(2 x^2) + cube_tail(x).
fn lgamma_tail(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    (1.0 / 12.0 + z * (-1.0 / 360.0 + z * (1.0 / 1260.0 + z * (-1.0 / 1680.0 + z / 1188.0)))) / x
}

fn digamma_tail(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    -0.5 / x + z * (-1.0 / 12.0 + z * (1.0 / 120.0 + z * (-1.0 / 252.0 + z * (1.0 / 240.0 - z / 132.0))))
}

fn trigamma_tail(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    z / x * (1.0 / 6.0 + z * (-1.0 / 30.0 + z * (1.0 / 42.0 + z * (-1.0 / 30.0 + z * 5.0 / 66.0))))
}

fn cube_tail(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    0.5 * z / x + z * z * (0.25 + z * (-1.0 / 12.0 + z * (1.0 / 12.0 + z * (-3.0 / 20.0 + z * 5.0 / 12.0))))
}

fn rising_sums(r: f64, y: u64) -> RisingSums {
    if !r.is_finite() {
        let yf = y as f64;
        return RisingSums {
            log: 0.0,
            s1: yf,
            s2: yf,
            s3: yf,
        };
    }
    if y <= DIRECT_SUM_MAX {
        return direct_sums(r, 0, y);
    }
    // Shift the argument into the asymptotic range with a few direct terms.
    let n = (ASYMPTOTIC_MIN - r).max(0.0).ceil() as u64;
    let head = direct_sums(r, 0, n);
    let rs = r + n as f64;
    let ys = (y - n) as f64;
    let b = rs + ys;
    let u = (ys / rs).ln_1p();
    // lgamma(b) - lgamma(rs) - ys ln(rs), with the large terms cancelled by hand
    let excess = (b - 0.5) * u - ys + lgamma_tail(b) - lgamma_tail(rs);
    let d_digamma = u + digamma_tail(b) - digamma_tail(rs);
    let d_trigamma = ys / (rs * b) + ys * (rs + b) / (2.0 * rs * rs * b * b) + trigamma_tail(rs) - trigamma_tail(b);
    let d_cube = ys * (rs + b) / (2.0 * rs * rs * b * b) + cube_tail(rs) - cube_tail(b);
    RisingSums {
        log: head.log + excess + ys * (n as f64 / r).ln_1p(),
        s1: head.s1 + r * d_digamma,
        s2: head.s2 + r * r * d_trigamma,
        s3: head.s3 + r * r * r * d_cube,
    }
}

// Returns (loglik, sum mu/(mu+k alpha), sum (mu/(mu+k alpha))^2, sum (mu/(mu+k alpha))^3).
fn nb1_terms(y: u64, mu: f64, alpha: f64) -> (f64, f64, f64, f64) {
    let sums = rising_sums(mu / alpha, y);
    let yf = y as f64;
    let log_sum = if y == 0 { 0.0 } else { yf * mu.ln() + sums.log };
    let c = alpha.ln_1p();
    let loglik = log_sum - yf * c - mu * log1p_over(alpha) - ln_factorial(y);
    (loglik, sums.s1, sums.s2, sums.s3)
}

pub fn poisson_derivs(y: u64, eta: f64) -> ObsDerivs {
    let mu = eta.min(MAX_ETA).exp();
    ObsDerivs {
        loglik: y as f64 * eta - mu - ln_factorial(y),
        s: y as f64 - mu,
        w: mu,
        w3: mu,
        ..Default::default()
    }
}

pub fn nb1_derivs(y: u64, eta: f64, phi: f64) -> ObsDerivs {
    let mu = eta.min(MAX_ETA).exp();
    let alpha = phi.exp();
    let (loglik, rs1, r2s2, r3s3) = nb1_terms(y, mu, alpha);
    let yf = y as f64;
    // r = mu / alpha; r*S1 = rs1, r^2*S2 = r2s2, r^3*S3 = r3s3, r*c = mu*log1p(alpha)/alpha
    let rc = mu * log1p_over(alpha);
    let s = rs1 - rc;
    let w = -s + r2s2;
    let w3 = -s + 3.0 * r2s2 - 2.0 * r3s3;
    let ra = mu / (1.0 + alpha);
    ObsDerivs {
        loglik,
        s,
        w,
        w3,
        l_phi: -s - ra + yf / (1.0 + alpha),
        s_phi: w - ra,
        w_phi: -w3 + ra,
    }
}

pub fn nb2_derivs(y: u64, eta: f64, phi: f64) -> ObsDerivs {
    let mu = eta.min(MAX_ETA).exp();
    let alpha = phi.exp();
    let yf = y as f64;
    let sums = rising_sums(1.0 / alpha, y);
    let (log_sum, inv_sum) = (sums.log, sums.s1);
    let am = alpha * mu;
    let l1 = am.ln_1p();
    let loglik = log_sum - yf * l1 - mu * log1p_over(am) + yf * eta - ln_factorial(y);
    let den = 1.0 + am;
    let s = (yf - mu) / den;
    let w = mu * (1.0 + alpha * yf) / (den * den);
    let w3 = mu * (1.0 + alpha * yf) * (1.0 - am) / (den * den * den);
    // d/dphi of (1/alpha) log1p(alpha mu) is mu/(1+am) - log1p(am)/alpha
    let l_phi = -inv_sum + mu * log1p_over(am) + (yf - mu) / den;
    let s_phi = -alpha * mu * (yf - mu) / (den * den);
    let w_phi = -mu * alpha * (2.0 * mu + alpha * yf * mu - yf) / (den * den * den);
    ObsDerivs {
        loglik,
        s,
        w,
        w3,
        l_phi,
        s_phi,
        w_phi,
    }
}

/// Derivatives for `family` at linear predictor `eta` and `phi = log(alpha)`.
pub fn derivs(family: Family, y: u64, eta: f64, phi: f64) -> ObsDerivs {
    match family {
        Family::Poisson | Family::QuasiPoisson => poisson_derivs(y, eta),
        Family::Nb1 => nb1_derivs(y, eta, phi),
        Family::Nb2 => nb2_derivs(y, eta, phi),
    }
}

/// A positive stand-in for `w` used when the observed curvature is not usable
/// as a Newton metric: the Fisher weight of the family.
pub fn fisher_weight(family: Family, eta: f64, phi: f64) -> f64 {
    let mu = eta.min(MAX_ETA).exp();
    match family {
        Family::Poisson | Family::QuasiPoisson => mu,
        Family::Nb1 => mu / (1.0 + phi.exp()),
        Family::Nb2 => mu / (1.0 + phi.exp() * mu),
    }
}
