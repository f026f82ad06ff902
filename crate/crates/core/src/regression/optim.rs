//! BFGS minimiser with a weak-Wolfe bisection line search.

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged once the gradient max-norm drops below this.
    pub grad_tol: f64,
    /// Relative objective change treated as a stall.
    pub rel_f_tol: f64,
    /// Gradient max-norm that a stall must also satisfy to count as converged.
    pub stall_grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            rel_f_tol: 1e-10,
            stall_grad_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f`, which returns value and gradient or `None` where undefined.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Option<BfgsResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return None;
    }
    // inverse Hessian approximation, row-major
    let mut h = vec![0.0; n * n];
    let scale0 = 1.0 / max_norm(&g).max(1.0);
    for i in 0..n {
        h[i * n + i] = scale0;
    }
    let mut first = true;
    let mut stalls = 0;

    for iter in 0..opts.max_iter {
        let gnorm = max_norm(&g);
        if gnorm < opts.grad_tol {
            return Some(done(x, fx, g, iter, true, "gradient tolerance reached"));
        }
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            // reset to steepest descent
            h.iter_mut().enumerate().for_each(|(k, v)| *v = if k % (n + 1) == 0 { scale0 } else { 0.0 });
            d = g.iter().map(|v| -v * scale0).collect();
            slope = dot(&g, &d);
        }

        let Some((t, xn, fn_, gn)) = line_search(&mut f, &x, fx, slope, &d) else {
            let ok = gnorm < opts.stall_grad_tol;
            return Some(done(x, fx, g, iter, ok, "line search failed"));
        };
        let s: Vec<f64> = d.iter().map(|v| v * t).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let rel = (fx - fn_).abs() / fx.abs().max(1.0);
        x = xn;
        fx = fn_;
        g = gn;

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first {
                let gamma = sy / dot(&y, &y);
                h.iter_mut().enumerate().for_each(|(k, v)| *v = if k % (n + 1) == 0 { gamma } else { 0.0 });
                first = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }

        if rel < opts.rel_f_tol {
            stalls += 1;
            if stalls >= 2 && max_norm(&g) < opts.stall_grad_tol {
                return Some(done(x, fx, g, iter + 1, true, "relative objective change below tolerance"));
            }
        } else {
            stalls = 0;
        }
    }
    let ok = max_norm(&g) < opts.grad_tol;
    Some(done(x, fx, g, opts.max_iter, ok, "iteration limit reached"))
}

fn done(x: Vec<f64>, f: f64, grad: Vec<f64>, iterations: usize, converged: bool, msg: &str) -> BfgsResult {
    BfgsResult {
        x,
        f,
        grad,
        iterations,
        converged,
        message: msg.to_string(),
    }
}

type Step = (f64, Vec<f64>, f64, Vec<f64>);

fn line_search<F>(f: &mut F, x: &[f64], fx: f64, slope: f64, d: &[f64]) -> Option<Step>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    // objective values closer than this are indistinguishable in floating point
    let noise = 1e-13 * fx.abs().max(1.0);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut t = 1.0;
    let mut best: Option<Step> = None;
    for _ in 0..80 {
        let xt: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        match f(&xt) {
            Some((ft, gt)) if ft.is_finite() && ft <= fx + C1 * t * slope + noise => {
                if dot(&gt, d) >= C2 * slope {
                    return Some((t, xt, ft, gt));
                }
                lo = t;
                if best.as_ref().map_or(true, |b| ft < b.2) {
                    best = Some((t, xt, ft, gt));
                }
            }
            _ => hi = t,
        }
        t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo.max(t) };
        if hi.is_finite() && hi - lo < 1e-16 * hi.max(1.0) {
            break;
        }
    }
    best
}
