// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

//! Small numerical kernels shared by the physics modules: scalar root
//! finding and minimization, divided differences of the exponential,
//! exact oscillatory time integrals, a dense BFGS minimizer and a
//! deterministic pairwise summation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Sum with a fixed binary reduction tree, independent of thread scheduling.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 16 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Brent's method for a bracketed root of `f` on `[a, b]`.
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidInput(format!(
            "root not bracketed: f({a:.6e})={fa:.3e}, f({b:.6e})={fb:.3e}"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::NoConvergence { iterations: 200, residual: fb.abs() })
}

/// Golden-section minimization of a scalar function on `[a, b]`.
/// Returns `(x_min, f(x_min))`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn sinhc(d: C64) -> C64 {
    if d.norm() < 0.3 {
        let d2 = d * d;
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..8 {
            term = term * d2 / (((2 * k) * (2 * k + 1)) as f64);
            sum += term;
        }
        sum
    } else {
        d.sinh() / d
    }
}

/// First divided difference of `exp` at `a`, `b`.
pub fn exp_dd2(a: C64, b: C64) -> C64 {
    let m = 0.5 * (a + b);
    let d = 0.5 * (a - b);
    m.exp() * sinhc(d)
}

/// Second divided difference of `exp` at three points.
pub fn exp_dd3(z0: C64, z1: C64, z2: C64) -> C64 {
    let c = (z0 + z1 + z2) / 3.0;
    let w = [z0 - c, z1 - c, z2 - c];
    let r = w.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if r <= 1.0 {
        // Taylor series: sum_j h_j(w) / (j + 2)! with h_j the complete
        // homogeneous symmetric polynomials.
        let (mut a0, mut a1, mut a2) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let mut fact = 2.0;
        let mut sum = a2 / fact;
        let mut rj = 1.0;
        for j in 1..60 {
            a0 *= w[0];
            a1 = a0 + w[1] * a1;
            a2 = a1 + w[2] * a2;
            fact *= (j + 2) as f64;
            let t = a2 / fact;
            sum += t;
            rj *= r;
            let bound = rj * ((j + 1) * (j + 2)) as f64 / (2.0 * fact);
            if bound < 1e-18 * sum.norm().max(1e-300) {
                break;
            }
        }
        return c.exp() * sum;
    }
    let d01 = (z0 - z1).norm();
    let d02 = (z0 - z2).norm();
    let d12 = (z1 - z2).norm();
    let (a, b, e) = if d02 >= d01 && d02 >= d12 {
        (z0, z1, z2)
    } else if d01 >= d12 {
        (z0, z2, z1)
    } else {
        (z1, z0, z2)
    };
    (exp_dd2(a, b) - exp_dd2(b, e)) / (a - e)
}

/// `∫_a^b e^{iωt} dt`, exact for all ω including ω = 0.
pub fn osc_integral(omega: f64, a: f64, b: f64) -> C64 {
    let h = b - a;
    (I * omega * a).exp() * h * exp_dd2(C64::new(0.0, 0.0), I * omega * h)
}

/// `∫_a^b dt ∫_a^t dt' e^{i(ω₁t + ω₂t')}`, exact for all frequencies.
pub fn osc_triangle(w1: f64, w2: f64, a: f64, b: f64) -> C64 {
    let h = b - a;
    let z = C64::new(0.0, 0.0);
    (I * (w1 + w2) * a).exp() * h * h * exp_dd3(z, I * w1 * h, I * (w1 + w2) * h)
}

/// `∫_a^b sin(μt) e^{iνt} dt`.
pub fn sin_exp_integral(mu: f64, nu: f64, a: f64, b: f64) -> C64 {
    (osc_integral(nu + mu, a, b) - osc_integral(nu - mu, a, b)) / (2.0 * I)
}

/// `∫_a^b dt ∫_a^t dt' sin(μ₁t) sin(μ₂t') sin(ν(t − t'))`.
pub fn sin3_triangle(mu1: f64, mu2: f64, nu: f64, a: f64, b: f64) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            for s3 in [1.0, -1.0] {
                let w1 = s1 * mu1 + s3 * nu;
                let w2 = s2 * mu2 - s3 * nu;
                acc += s1 * s2 * s3 * osc_triangle(w1, w2, a, b);
            }
        }
    }
    // (2i)^3 = -8i
    (acc / C64::new(0.0, -8.0)).re
}

/// Result of a BFGS run.
#[derive(Debug, Clone)]
pub struct MinResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Dense BFGS with a backtracking Armijo line search.
pub fn bfgs<F>(mut fg: F, x0: DVector<f64>, max_iter: usize, gtol: f64) -> MinResult
where
    F: FnMut(&DVector<f64>, &mut DVector<f64>) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = DVector::zeros(n);
    let mut f = fg(&x, &mut g);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut g_new = DVector::zeros(n);
    let mut it = 0;
    while it < max_iter {
        if g.norm() < gtol {
            break;
        }
        let mut dir = -(&h * &g);
        let mut slope = dir.dot(&g);
        if slope >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = dir.dot(&g);
        }
        let mut step = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = f;
        for _ in 0..60 {
            x_new = &x + step * &dir;
            f_new = fg(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        it += 1;
        if !accepted {
            break;
        }
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        x = x_new;
        let f_old = f;
        f = f_new;
        std::mem::swap(&mut g, &mut g_new);
        if sy > 1e-300 {
            if !scaled {
                h *= sy / y.dot(&y);
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hyᵀ + hy sᵀ) + (rho² yHy + rho) s sᵀ
            h -= rho * (&s * hy.transpose() + &hy * s.transpose());
            h += (rho * rho * yhy + rho) * (&s * s.transpose());
        }
        if (f_old - f).abs() <= 1e-16 * f.abs().max(1e-300) && g.norm() < gtol * 1e3 {
            break;
        }
    }
    let grad_norm = g.norm();
    MinResult { x, f, grad_norm, iterations: it }
}

/// Levenberg–Marquardt for `min Σ rᵢ(x)²`. The closure returns residuals
/// and their Jacobian; `grad_norm` is `‖2Jᵀr‖`.
pub fn levenberg_marquardt<F>(mut rj: F, x0: DVector<f64>, max_iter: usize, gtol: f64) -> MinResult
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut r, mut j) = rj(&x);
    let mut f = r.norm_squared();
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut it = 0;
    let mut g = j.transpose() * &r;
    while it < max_iter && 2.0 * g.norm() >= gtol {
        it += 1;
        let jtj = j.transpose() * &j;
        let mut a = jtj.clone();
        let dmax = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-300);
        for i in 0..n {
            a[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * dmax);
        }
        let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
            lambda *= nu;
            nu *= 2.0;
            continue;
        };
        let x_new = &x + &step;
        let (r_new, j_new) = rj(&x_new);
        let f_new = r_new.norm_squared();
        let pred = -(2.0 * step.dot(&g) + step.dot(&(&jtj * &step)));
        let rho = if pred > 0.0 { (f - f_new) / pred } else { -1.0 };
        if f_new.is_finite() && rho > 0.0 {
            x = x_new;
            r = r_new;
            j = j_new;
            let small = (f - f_new) <= 1e-15 * f;
            f = f_new;
            g = j.transpose() * &r;
            lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if small && step.norm() <= 1e-14 * x.norm().max(1e-300) {
                break;
            }
        } else {
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e30 {
                break;
            }
        }
    }
    MinResult { grad_norm: 2.0 * g.norm(), x, f, iterations: it }
}
