//! Jacobi elliptic functions for real parameter `0 < k² < 1`, complete
//! integrals and nome, Fourier and Taylor data of `dn`, the order-4
//! trigonometric functions `δ_l`, and the Laplace transform of `dn`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::numerics::{integrate, integrate_singular, ln_gamma_pos, Tolerance, C64};

/// Limit of `K(k²)` as `k² → 0`.
pub const K_AT_ZERO: f64 = PI / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct EllipticContext {
    pub k2: f64,
    pub kprime2: f64,
    pub K: f64,
    pub Kprime: f64,
    pub q: f64,
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        let m = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = m;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind `K(m)` for `0 <= m < 1`.
pub fn complete_k(m: f64) -> f64 {
    PI / (2.0 * agm(1.0, (1.0 - m).sqrt()))
}

pub fn make_context(k2: f64) -> Result<EllipticContext> {
    if !(k2 > 0.0 && k2 < 1.0) {
        return invalid(format!("k2 must lie in (0,1), got {k2}"));
    }
    let kprime2 = 1.0 - k2;
    let big_k = complete_k(k2);
    let big_kp = complete_k(kprime2);
    Ok(EllipticContext { k2, kprime2, K: big_k, Kprime: big_kp, q: (-PI * big_kp / big_k).exp() })
}

impl EllipticContext {
    pub fn sn_cn_dn(&self, u: f64) -> (f64, f64, f64) {
        jacobi_scd(self, u)
    }
}

/// `(sn u, cn u, dn u)` by the descending Landen (AGM) scale.
pub fn jacobi_scd(ctx: &EllipticContext, u: f64) -> (f64, f64, f64) {
    // Reduce to (-2K, 2K]: sn and cn have period 4K, dn period 2K.
    let period = 4.0 * ctx.K;
    let mut v = u - period * (u / period).round();
    if v <= -2.0 * ctx.K {
        v += period;
    }
    let mut a = [0.0f64; 16];
    let mut c = [0.0f64; 16];
    a[0] = 1.0;
    let mut b = ctx.kprime2.sqrt();
    c[0] = ctx.k2.sqrt();
    let mut n = 0;
    while n < 15 && c[n].abs() > f64::EPSILON {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        n += 1;
    }
    let mut phi = 2f64.powi(n as i32) * a[n] * v;
    for i in (1..=n).rev() {
        phi = 0.5 * (phi + (c[i] / a[i] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    // dn² = k'² + k² cn² is a sum of non-negative terms.
    let dn = (ctx.kprime2 + ctx.k2 * cn * cn).sqrt();
    (sn, cn, dn)
}

/// Fourier coefficient of `dn u = Σ ψ_n cos(nπu/K)`: `ψ_0 = π/(2K)`,
/// `ψ_n = (2π/K) qⁿ/(1+q²ⁿ)`.
pub fn dn_fourier_coeff(ctx: &EllipticContext, n: usize) -> f64 {
    if n == 0 {
        PI / (2.0 * ctx.K)
    } else {
        let qn = ctx.q.powi(n as i32);
        2.0 * PI / ctx.K * qn / (1.0 + qn * qn)
    }
}

/// Partial Fourier sum of `dn u` with `harmonics` cosine terms.
pub fn dn_fourier_eval(ctx: &EllipticContext, u: f64, harmonics: usize) -> f64 {
    (0..=harmonics).rev().map(|n| dn_fourier_coeff(ctx, n) * (n as f64 * PI * u / ctx.K).cos()).sum()
}

// Taylor coefficients of (S, C, D)(v) = (-i sn(iv), cn(iv), dn(iv)), scaled by R^m.
// The system S' = CD, C' = SD, D' = k² SC has positive coefficients, so no
// cancellation occurs; dn(u) = Σ (-1)^n s_n u^{2n}/(2n)! gives s_n = (2n)! [v^{2n}] D.
fn scaled_dn_coefficients(k2: f64, order: usize, r: f64) -> Vec<f64> {
    let mut s = vec![0.0; order + 1];
    let mut c = vec![0.0; order + 1];
    let mut d = vec![0.0; order + 1];
    c[0] = 1.0;
    d[0] = 1.0;
    for m in 0..order {
        let (mut cs, mut ss, mut sc) = (0.0, 0.0, 0.0);
        for i in 0..=m {
            cs += c[i] * d[m - i];
            ss += s[i] * d[m - i];
            sc += s[i] * c[m - i];
        }
        let f = r / (m + 1) as f64;
        s[m + 1] = cs * f;
        c[m + 1] = ss * f;
        d[m + 1] = k2 * sc * f;
    }
    d
}

fn taylor_scale(k2: f64) -> f64 {
    // Radius of convergence in v is K', so coefficients scaled by K'^m stay O(1).
    if k2 > 0.0 && k2 <= 1.0 {
        complete_k(1.0 - k2)
    } else {
        1.0
    }
}

/// `ln s_n` for `n = 0..=nmax`, usable far beyond the double range.
pub fn dn_taylor_log_moments(k2: f64, nmax: usize) -> Result<Vec<f64>> {
    if !(k2 > 0.0 && k2.is_finite()) {
        return invalid(format!("k2 must be positive, got {k2}"));
    }
    let r = taylor_scale(k2);
    let d = scaled_dn_coefficients(k2, 2 * nmax, r);
    (0..=nmax)
        .map(|n| Ok(d[2 * n].ln() - 2.0 * n as f64 * r.ln() + ln_gamma_pos(2.0 * n as f64 + 1.0)?))
        .collect()
}

/// Moments `s_0..s_nmax` of the spectral measure of `dn`, read off its Taylor series.
pub fn dn_taylor_moments(k2: f64, nmax: usize) -> Result<Vec<f64>> {
    if !(k2 > 0.0 && k2.is_finite()) {
        return invalid(format!("k2 must be positive, got {k2}"));
    }
    let r = taylor_scale(k2);
    let d = scaled_dn_coefficients(k2, 2 * nmax, r);
    let logs = dn_taylor_log_moments(k2, nmax)?;
    let mut fact = 1.0;
    let mut out = Vec::with_capacity(nmax + 1);
    for n in 0..=nmax {
        if n > 0 {
            fact *= (2 * n - 1) as f64 * (2 * n) as f64;
        }
        let direct = d[2 * n] * fact / r.powi(2 * n as i32);
        out.push(if direct.is_finite() && direct > 0.0 { direct } else { logs[n].exp() });
    }
    Ok(out)
}

/// `ln(2 (2n)! / K'^{2n+1})`, the large-`n` behaviour of `s_n`.
pub fn moment_asymptote(ctx: &EllipticContext, n: usize) -> f64 {
    let two_n = 2.0 * n as f64;
    2f64.ln() + ln_gamma_pos(two_n + 1.0).expect("positive argument") - (two_n + 1.0) * ctx.Kprime.ln()
}

/// Order-4 trigonometric functions `δ_l(x) = Σ (-1)ⁿ x^{4n+l}/(4n+l)!`.
///
/// With `a = x/√2`: `δ₀ = cos a cosh a`, `δ₂ = sin a sinh a`,
/// `δ₁ = (sin a cosh a + cos a sinh a)/√2`, `δ₃ = (sin a cosh a − cos a sinh a)/√2`.
/// `δ₃` is summed from its series for `|x| < 2`, where the closed form cancels.
pub fn delta4(l: u32, x: C64) -> Result<C64> {
    let a = x * FRAC_1_SQRT_2;
    let v = match l {
        0 => a.cos() * a.cosh(),
        1 => (a.sin() * a.cosh() + a.cos() * a.sinh()) * FRAC_1_SQRT_2,
        2 => a.sin() * a.sinh(),
        3 if x.norm() < 2.0 => delta_series(3, x),
        3 => (a.sin() * a.cosh() - a.cos() * a.sinh()) * FRAC_1_SQRT_2,
        _ => return invalid(format!("delta index must be 0..=3, got {l}")),
    };
    Ok(v)
}

fn delta_series(l: u32, x: C64) -> C64 {
    let x4 = x.powi(4);
    let mut term = x.powi(l as i32) / (1..=l).map(|k| k as f64).product::<f64>();
    let mut acc = term;
    for n in 1..40u32 {
        let k = (4 * n + l) as f64;
        term = -term * x4 / (k * (k - 1.0) * (k - 2.0) * (k - 3.0));
        acc += term;
        if term.norm() < 1e-18 * acc.norm() {
            break;
        }
    }
    acc
}

/// `θ(1) = ∫₀¹ du/√(1−u⁴)`.
pub fn lemniscate_k0() -> f64 {
    let tol = Tolerance::new(1e-16, 1e-15, 500).expect("valid tolerance");
    let f = |u: f64| 1.0 / (1.0 - u.powi(4)).sqrt();
    let left = integrate(|u| C64::new(f(u), 0.0), 0.0, 0.5, &tol).expect("smooth integrand");
    // Near u = 1 write 1-u⁴ = v(2-v)(1+(1-v)²) with v = 1-u.
    let g = |v: f64| {
        let u = 1.0 - v;
        C64::new(1.0 / (v * (2.0 - v) * (1.0 + u * u)).sqrt(), 0.0)
    };
    let right = integrate_singular(g, 0.0, 0.5, Some(-0.5), None, &tol).expect("integrable singularity");
    (left + right).re
}

/// `∫₀^∞ dn(u) e^{-xu} du = (1 − e^{−2xK})⁻¹ ∫₀^{2K} dn(u) e^{−xu} du`.
pub fn laplace_dn(ctx: &EllipticContext, x: C64) -> Result<C64> {
    if !(x.re > 0.0) {
        return invalid(format!("laplace_dn needs Re x > 0, got {x}"));
    }
    let tol = Tolerance::new(1e-15, 1e-13, 2000)?;
    let f = |u: f64| (-x * u).exp() * jacobi_scd(ctx, u).2;
    let one_period = integrate(f, 0.0, ctx.K, &tol)? + integrate(f, ctx.K, 2.0 * ctx.K, &tol)?;
    Ok(one_period / (1.0 - (-2.0 * ctx.K * x).exp()))
}
