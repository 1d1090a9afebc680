//! Determinate problems: Markov's theorem as a numerical limit, the discrete
//! spectral measure of the dn fraction, and the generalized `c > 0` family
//! whose transform is a ratio of two elliptic integrals.

use std::f64::consts::PI;

use crate::contfrac::{DiscreteMeasure, NORMALIZATION_TOL};
use crate::elliptic::{dn_fourier_coeff, jacobi_scd, EllipticContext};
use crate::error::{invalid, Result};
use crate::numerics::{gamma_pos, integrate, ConvergedLimit, Tolerance, C64};
use crate::recurrence::{eval_f, log_pi, BirthDeathRates, PqStream};

/// `lim Q_n(x)/P_n(x)`, the Stieltjes transform `∫dψ(t)/(x−t)` of the
/// orthogonality measure when the problem is determinate.
///
/// Iteration stops once `|r_n − r_{n−1}|` and `|r_n − r_{n−2}|` are both
/// within the tolerance bound; the two-step test guards against sequences
/// that alternate between two accumulation points.
pub fn markov_limit(rates: &BirthDeathRates, x: C64, tol: &Tolerance) -> Result<ConvergedLimit> {
    if x.im == 0.0 || !x.is_finite() {
        return invalid(format!("markov_limit needs x off the real axis, got {x}"));
    }
    let mut stream = PqStream::new(rates, x)?;
    let mut prev2 = C64::new(f64::NAN, f64::NAN);
    let mut prev = stream.ratio();
    let mut last = f64::INFINITY;
    while stream.n() < tol.max_iter {
        stream.advance()?;
        let r = stream.ratio();
        if !r.is_finite() {
            break;
        }
        last = (r - prev).norm();
        let bound = tol.bound(r.norm());
        if last <= bound && (r - prev2).norm() <= bound {
            return Ok(ConvergedLimit { value: r, terms_used: stream.n(), last_increment: last, converged: true });
        }
        prev2 = prev;
        prev = r;
    }
    Ok(ConvergedLimit { value: prev, terms_used: stream.n(), last_increment: last, converged: false })
}

/// The measure `Σ ψ_n ε_{(nπ/K)²}` with the Fourier coefficients of `dn` as
/// masses. Atoms stop at `nmax` or once a mass falls below `1e-17`, so the
/// dropped tail is far below `1e-14`.
pub fn dn_spectral_measure(ctx: &EllipticContext, nmax: usize) -> Result<DiscreteMeasure> {
    let mut support = Vec::new();
    let mut mass = Vec::new();
    for n in 0..=nmax {
        let m = dn_fourier_coeff(ctx, n);
        if n > 0 && m < 1e-17 {
            break;
        }
        let t = n as f64 * PI / ctx.K;
        support.push(t * t);
        mass.push(m);
    }
    let total: f64 = mass.iter().rev().sum();
    let normalized = (total - 1.0).abs() <= NORMALIZATION_TOL;
    DiscreteMeasure::new(support, mass, normalized)
}

// ∫₀^b φ(u) sn(u)^e w(u) du, with the sn^e factor treated exactly near 0 by
// u = h s^{1/(e+1)} on [0, h]: there sn^e = u^e (sn u/u)^e and the Jacobian
// cancels u^e, leaving h^{e+1}/(e+1) ∫₀¹ φ(u)(sn u/u)^e w(u) ds.
fn sn_power_integral<W: Fn(f64) -> C64>(
    ctx: &EllipticContext,
    e: f64,
    weight: W,
    b: f64,
    tol: &Tolerance,
) -> Result<C64> {
    let h = 0.5 * b;
    let p = 1.0 / (e + 1.0);
    let sub = Tolerance { abs_tol: 0.5 * tol.abs_tol, ..*tol };
    let near = integrate(
        |s: f64| {
            let u = h * s.powf(p);
            let (sn, _, _) = jacobi_scd(ctx, u);
            let ratio = if u > 0.0 { sn / u } else { 1.0 };
            weight(u) * ratio.powf(e)
        },
        0.0,
        1.0,
        &sub,
    )? * (h.powf(e + 1.0) * p);
    let far = integrate(|u: f64| weight(u) * jacobi_scd(ctx, u).0.powf(e), h, b, &sub)?;
    Ok(near + far)
}

/// `N(c;x)/D(c;x)` with
/// `N = ∫₀^{2K} dn u (sn u)^{2c}/Γ(2c+1) e^{−xu} du` and
/// `D = ∫₀^{2K} cn u (sn u)^{2c−1}/Γ(2c) e^{−xu} du`.
///
/// Both integrals are folded onto `[0, K]` through `u → 2K − u`, which keeps
/// the only non-smooth point at `u = 0`.
pub fn generalized_ratio(ctx: &EllipticContext, c: f64, x: C64, tol: &Tolerance) -> Result<C64> {
    if !(c > 0.0 && c.is_finite()) {
        return invalid(format!("c must be positive, got {c}"));
    }
    if !(x.re > 0.0) || !x.is_finite() {
        return invalid(format!("generalized_ratio needs Re x > 0, got {x}"));
    }
    let k2 = 2.0 * ctx.K;
    let num = sn_power_integral(
        ctx,
        2.0 * c,
        |u| jacobi_scd(ctx, u).2 * ((-x * u).exp() + (-x * (k2 - u)).exp()),
        ctx.K,
        tol,
    )?;
    let den = sn_power_integral(
        ctx,
        2.0 * c - 1.0,
        |u| jacobi_scd(ctx, u).1 * ((-x * u).exp() - (-x * (k2 - u)).exp()),
        ctx.K,
        tol,
    )?;
    let value = (num / gamma_pos(2.0 * c + 1.0)?) / (den / gamma_pos(2.0 * c)?);
    if !value.is_finite() {
        return invalid(format!("generalized_ratio overflowed at c={c}, x={x}"));
    }
    Ok(value)
}

/// Scaled value `F_n(x)(k²)ⁿ n/π_n` for the dn rates together with its
/// predicted limit `−√x sin(√x K)/(2k'²)` (principal square root).
pub fn dn_f_asymptotic(ctx: &EllipticContext, x: C64, n: usize) -> Result<(C64, C64)> {
    if n == 0 {
        return invalid("dn_f_asymptotic needs n >= 1");
    }
    let rates = BirthDeathRates::stieltjes_dn(ctx.k2)?;
    let f = eval_f(&rates, n, x, 0)?;
    let lp = log_pi(&rates, n)?;
    let shift = f.scaling_log[n] + n as f64 * ctx.k2.ln() + (n as f64).ln() - lp[n];
    let scaled = f.values[n] * shift.exp();
    let r = x.sqrt();
    let limit = -r * (r * ctx.K).sin() / (2.0 * ctx.kprime2);
    Ok((scaled, limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac::{measure_moment, measure_s_transform, measure_stieltjes, s_fraction};
    use crate::elliptic::{laplace_dn, make_context};

    fn tight() -> Tolerance {
        Tolerance::new(1e-15, 1e-13, 5000).unwrap()
    }

    #[test]
    fn markov_matches_spectral_measure() {
        let ctx = make_context(0.5).unwrap();
        let rates = BirthDeathRates::stieltjes_dn(0.5).unwrap();
        let x = C64::new(0.0, 1.0);
        let lim = markov_limit(&rates, x, &tight()).unwrap();
        assert!(lim.converged);
        let m = dn_spectral_measure(&ctx, 200).unwrap();
        let oracle = measure_stieltjes(&m, x).unwrap();
        assert!((lim.value - oracle).norm() < 1e-8, "{} vs {oracle}", lim.value);
        assert!(lim.value.im < 0.0);
    }

    #[test]
    fn markov_periodic_fraction() {
        // Unit rates: the J-fraction tail T solves T = 1/(x - 2 - T).
        let rates = BirthDeathRates::custom("unit", |_| 1.0, |n| if n == 0 { 0.0 } else { 1.0 });
        let x = C64::new(3.0, 1.0);
        let d = x - 2.0;
        let root = (d * d - 4.0).sqrt();
        let t = [(d - root) / 2.0, (d + root) / 2.0].into_iter().find(|t| t.norm() < 1.0).unwrap();
        let oracle = 1.0 / (x - 1.0 - t);
        let lim = markov_limit(&rates, x, &tight()).unwrap();
        assert!(lim.converged);
        assert!((lim.value - oracle).norm() < 1e-11);
        assert!(markov_limit(&rates, C64::new(1.0, 0.0), &tight()).is_err());
    }

    #[test]
    fn markov_error_shrinks_with_n() {
        let ctx = make_context(0.5).unwrap();
        let rates = BirthDeathRates::stieltjes_dn(0.5).unwrap();
        let x = C64::new(0.0, 1.0);
        let oracle = measure_stieltjes(&dn_spectral_measure(&ctx, 200).unwrap(), x).unwrap();
        let mut s = PqStream::new(&rates, x).unwrap();
        let mut errs = Vec::new();
        for target in [5, 10, 20, 40] {
            while s.n() < target {
                s.advance().unwrap();
            }
            errs.push((s.ratio() - oracle).norm());
        }
        assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
    }

    #[test]
    fn dn_measure_facts() {
        let ctx = make_context(0.5).unwrap();
        let m = dn_spectral_measure(&ctx, 100).unwrap();
        assert!(m.normalized);
        assert!((m.mass[0] - PI / (2.0 * ctx.K)).abs() < 1e-15);
        assert!((m.support[3] - (3.0 * PI / ctx.K).powi(2)).abs() < 1e-12);
        assert!((measure_moment(&m, 1) - 0.5).abs() < 1e-12);
        assert!((measure_moment(&m, 2) - 2.25).abs() < 1e-10);
        let short = dn_spectral_measure(&ctx, 1).unwrap();
        assert!(!short.normalized);
    }

    #[test]
    fn three_way_agreement() {
        for k2 in [0.3, 0.5, 0.8] {
            let ctx = make_context(k2).unwrap();
            let rates = BirthDeathRates::stieltjes_dn(k2).unwrap();
            let m = dn_spectral_measure(&ctx, 400).unwrap();
            for x in [C64::new(1.0, 0.0), C64::new(2.0, 1.0)] {
                let a = s_fraction(&rates, 400, x).unwrap();
                let b = laplace_dn(&ctx, x).unwrap();
                let c = measure_s_transform(&m, x).unwrap();
                assert!((a - b).norm() < 1e-8 && (b - c).norm() < 1e-8, "k2={k2} x={x}: {a} {b} {c}");
            }
        }
    }

    #[test]
    fn generalized_matches_fraction() {
        let ctx = make_context(0.5).unwrap();
        for c in [0.25, 0.75, 1.5] {
            let rates = BirthDeathRates::generalized_c(0.5, c).unwrap();
            for x in [1.0, 1.5] {
                let x = C64::new(x, 0.0);
                let g = generalized_ratio(&ctx, c, x, &tight()).unwrap();
                let s = s_fraction(&rates, 400, x).unwrap();
                assert!((g - s).norm() < 1e-8, "c={c} x={x}: {g} vs {s}");
            }
        }
    }

    #[test]
    fn generalized_small_c_recovers_dn() {
        let ctx = make_context(0.5).unwrap();
        for x in [C64::new(1.0, 0.0), C64::new(1.0, 1.0)] {
            let g = generalized_ratio(&ctx, 1e-4, x, &tight()).unwrap();
            let l = laplace_dn(&ctx, x).unwrap();
            assert!((g - l).norm() < 1e-3, "{g} vs {l}");
        }
        let g = generalized_ratio(&ctx, 0.75, C64::new(1.0, 1.0), &tight()).unwrap();
        // S(x) = −x J(−x²): with x = 1+i, −x² = −2i lies in the lower half-plane.
        assert!(g.is_finite() && g.re > 0.0);
        assert!(generalized_ratio(&ctx, 0.0, C64::new(1.0, 0.0), &tight()).is_err());
        assert!(generalized_ratio(&ctx, 0.5, C64::new(-1.0, 0.0), &tight()).is_err());
    }

    #[test]
    fn dn_asymptotic_at_minus_one() {
        let ctx = make_context(0.5).unwrap();
        let (scaled, limit) = dn_f_asymptotic(&ctx, C64::new(-1.0, 0.0), 2000).unwrap();
        assert!((limit.re - ctx.K.sinh() / (2.0 * ctx.kprime2)).abs() < 1e-12);
        assert!((scaled / limit - 1.0).norm() < 1e-3, "{scaled} vs {limit}");
    }
}
