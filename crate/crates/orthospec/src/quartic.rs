//! Quartic birth-death rates, the closed-form Friedrichs and Krein
//! transforms built from `δ_l` and `cn` integrals, their discrete measures,
//! and the large-`n` asymptotics of the associated polynomial families.

use std::cell::RefCell;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;
use serde_json::json;

use crate::contfrac::DiscreteMeasure;
use crate::elliptic::{delta4, jacobi_scd, lemniscate_k0, make_context, EllipticContext};
use crate::error::{invalid, Error, Result};
pub use crate::indet::BorderMode;
use crate::numerics::{integrate, ser_complex, Tolerance, C64};
use crate::recurrence::{dual_rates, eval_f, eval_fhat, log_pi, BirthDeathRates, FamilyTag, PolySequence};

fn quartic_block(m: f64) -> f64 {
    m * (m + 1.0) * (m + 1.0) * (m + 2.0)
}

/// `λ_n = (4n+4c+1)(4n+4c+2)²(4n+4c+3)`, `μ_n = (4n+4c−1)(4n+4c)²(4n+4c+1)`
/// for `n >= 1` and `μ_0 = mu`.
pub fn quartic_rates(c: f64, mu: f64) -> Result<BirthDeathRates> {
    if !(c >= 0.0 && c.is_finite()) {
        return invalid(format!("c must be finite and non-negative, got {c}"));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return invalid(format!("mu must be finite and non-negative, got {mu}"));
    }
    Ok(BirthDeathRates::new(
        FamilyTag::Quartic { c, mu },
        move |n| quartic_block(4.0 * (n as f64 + c) + 1.0),
        move |n| if n == 0 { mu } else { quartic_block(4.0 * (n as f64 + c) - 1.0) },
    ))
}

/// Parameters of a quartic family with the two elliptic constants it needs:
/// the lemniscate integral `θ(1)` and the quarter period `K(1/2) = √2 θ(1)`,
/// which is the constant appearing in the closed-form transforms and spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuarticSpec {
    pub c: f64,
    pub mu: f64,
    pub k0: f64,
    pub ctx_half: EllipticContext,
    pub period: f64,
}

impl QuarticSpec {
    pub fn new(c: f64, mu: f64) -> Result<Self> {
        quartic_rates(c, mu)?;
        let ctx_half = make_context(0.5)?;
        Ok(Self { c, mu, k0: lemniscate_k0(), ctx_half, period: ctx_half.K })
    }

    pub fn rates(&self) -> Result<BirthDeathRates> {
        quartic_rates(self.c, self.mu)
    }

    fn require_base(&self, what: &str) -> Result<()> {
        if self.c != 0.0 || self.mu != 0.0 {
            return invalid(format!("{what} is only known in closed form for c = 0, mu = 0"));
        }
        Ok(())
    }
}

fn quad_tol() -> Tolerance {
    Tolerance { abs_tol: 1e-16, rel_tol: 1e-14, max_iter: 4000 }
}

/// `∫₀^K δ_l(ρu/√2) cn u du/√2` at modulus `k² = 1/2`.
pub fn cn_delta_integral(spec: &QuarticSpec, l: u32, rho: C64) -> Result<C64> {
    let ctx = spec.ctx_half;
    let fail = RefCell::new(None);
    let v = integrate(
        |u| match delta4(l, rho * (u * FRAC_1_SQRT_2)) {
            Ok(d) => d * jacobi_scd(&ctx, u).1,
            Err(e) => {
                fail.borrow_mut().get_or_insert(e);
                C64::new(0.0, 0.0)
            }
        },
        0.0,
        spec.period,
        &quad_tol(),
    )?;
    if let Some(e) = fail.into_inner() {
        return Err(e);
    }
    Ok(v * FRAC_1_SQRT_2)
}

fn fourth_root(x: C64) -> C64 {
    // Principal branch: arg x in (−π, π] gives arg ρ in (−π/4, π/4].
    C64::from_polar(x.norm().powf(0.25), x.arg() / 4.0)
}

fn check_off_ray(x: C64) -> Result<()> {
    if !x.is_finite() || (x.im == 0.0 && x.re >= 0.0) {
        return invalid(format!("x must lie off [0, ∞), got {x}"));
    }
    Ok(())
}

fn ratio_or_pole(num: C64, den: C64, x: C64) -> Result<C64> {
    let v = num / den;
    if den.norm() == 0.0 || !v.is_finite() {
        return Err(Error::Pole { location: format!("x = {x}") });
    }
    Ok(v)
}

/// Stieltjes transform of the Friedrichs measure of quartic(0, 0):
/// `−[∫₀^K δ₂(ρu/√2) cn u du/√2] / [ρ² δ₀(ρK/√2)]` with `ρ = x^{1/4}`.
pub fn friedrichs_transform(spec: &QuarticSpec, x: C64) -> Result<C64> {
    spec.require_base("friedrichs_transform")?;
    check_off_ray(x)?;
    let rho = fourth_root(x);
    let num = -cn_delta_integral(spec, 2, rho)?;
    let den = rho * rho * delta4(0, rho * (spec.period * FRAC_1_SQRT_2))?;
    ratio_or_pole(num, den, x)
}

/// Stieltjes transform of the Krein measure of quartic(0, 0):
/// `[∫₀^K δ₀(ρu/√2) cn u du/√2] / [ρ² δ₂(ρK/√2)]`.
pub fn krein_transform(spec: &QuarticSpec, x: C64) -> Result<C64> {
    spec.require_base("krein_transform")?;
    check_off_ray(x)?;
    let rho = fourth_root(x);
    let num = cn_delta_integral(spec, 0, rho)?;
    let den = rho * rho * delta4(2, rho * (spec.period * FRAC_1_SQRT_2))?;
    ratio_or_pole(num, den, x)
}

/// Atoms and printed masses of the border measures: Friedrichs at
/// `((2n+1)π/K)⁴` with `(4π/K²)(2n+1)π/sinh((2n+1)π)`, Krein at `(2nπ/K)⁴`
/// with `(4π/K²)2nπ/sinh(2nπ)` for `n >= 1` and `π/K²` at 0.
pub fn border_atoms(spec: &QuarticSpec, mode: BorderMode, nmax: usize) -> Vec<(f64, f64)> {
    let k = spec.period;
    let scale = 4.0 * PI / (k * k);
    (0..nmax)
        .map(|n| {
            let m = match mode {
                BorderMode::Friedrichs => (2 * n + 1) as f64,
                BorderMode::Krein => (2 * n) as f64,
            };
            let support = (m * PI / k).powi(4);
            let mass = if m == 0.0 { PI / (k * k) } else { scale * m * PI / (m * PI).sinh() };
            (support, mass)
        })
        .collect()
}

/// The border measure with masses rescaled to total 1; the printed masses and
/// their sum are kept in the metadata.
pub fn border_measure(spec: &QuarticSpec, mode: BorderMode, nmax: usize) -> Result<DiscreteMeasure> {
    spec.require_base("border_measure")?;
    if nmax == 0 {
        return invalid("nmax must be at least 1");
    }
    let atoms = border_atoms(spec, mode, nmax);
    let printed: Vec<f64> = atoms.iter().map(|a| a.1).collect();
    let total: f64 = printed.iter().rev().sum();
    let m = DiscreteMeasure::new(atoms.iter().map(|a| a.0).collect(), printed.clone(), false)?;
    Ok(m.normalize()?
        .with_meta("mode", json!(mode))
        .with_meta("printed_masses", json!(printed))
        .with_meta("printed_total", json!(total)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticRatio {
    pub name: &'static str,
    #[serde(serialize_with = "ser_complex")]
    pub ratio: C64,
    /// `|ratio − 1|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub n: usize,
    #[serde(serialize_with = "ser_complex")]
    pub x: C64,
    pub ratios: [AsymptoticRatio; 4],
}

/// Large-`n` behaviour of the four families attached to quartic(0, 0), each
/// reported as a ratio that tends to 1:
/// `F_n ~ π_n δ₀(ρK/√2)`, `F⁽¹⁾_{n−1}/μ_1 ~ π_n I₂/√x`,
/// `F̃_n ~ 3π π_n δ₂(ρK/√2)/√x`, `F̂_n ~ 3π π_n I₀`,
/// where `I_l = ∫₀^K δ_l(ρu/√2) cn u du/√2`.
///
/// All ratios are formed from log-scaled values, so `π_n` never needs to be
/// representable on its own.
pub fn asymptotic_checks(spec: &QuarticSpec, x: C64, n: usize) -> Result<AsymptoticReport> {
    spec.require_base("asymptotic_checks")?;
    if n < 2 {
        return invalid("asymptotic_checks needs n >= 2");
    }
    if x == C64::new(0.0, 0.0) || !x.is_finite() {
        return invalid(format!("x must be finite and nonzero, got {x}"));
    }
    let rates = spec.rates()?;
    let lp = log_pi(&rates, n)?;
    let rho = fourth_root(x);
    let sqrt_x = rho * rho;
    let arg = rho * (spec.period * FRAC_1_SQRT_2);
    let (d0, d2) = (delta4(0, arg)?, delta4(2, arg)?);
    let (i0, i2) = (cn_delta_integral(spec, 0, rho)?, cn_delta_integral(spec, 2, rho)?);
    let scaled = |s: &PolySequence, k: usize| s.values[k] * (s.scaling_log[k] - lp[n]).exp();
    let f = eval_f(&rates, n, x, 0)?;
    let f1 = eval_f(&rates, n - 1, x, 1)?;
    let ft = eval_f(&dual_rates(&rates, false)?, n, x, 0)?;
    let fh = eval_fhat(&rates, n, x)?;
    let three_pi = 3.0 * PI;
    let raw = [
        ("F", scaled(&f, n) / d0),
        ("F1", scaled(&f1, n - 1) / rates.mu(1) * sqrt_x / i2),
        ("F_dual", scaled(&ft, n) * sqrt_x / (three_pi * d2)),
        ("F_zero_dual", scaled(&fh, n) / (three_pi * i0)),
    ];
    let ratios = raw.map(|(name, ratio)| AsymptoticRatio { name, ratio, deviation: (ratio - 1.0).norm() });
    Ok(AsymptoticReport { n, x, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac::measure_stieltjes;
    use crate::indet::{markov_like_limit, nevanlinna_eval, nextremal_measure, Convention, Param};
    use crate::numerics::bracket_roots;
    use crate::recurrence::dual_rates;

    fn tol() -> Tolerance {
        Tolerance::new(1e-13, 1e-10, 2000).unwrap()
    }

    #[test]
    fn rate_examples() {
        let r = quartic_rates(0.0, 0.0).unwrap();
        assert_eq!((r.lambda(0), r.mu(0), r.mu(1)), (12.0, 0.0, 240.0));
        let d = dual_rates(&r, false).unwrap();
        let h = quartic_rates(0.5, 12.0).unwrap();
        for n in 0..=20 {
            assert_eq!(d.lambda(n), h.lambda(n), "lambda_{n}");
            assert_eq!(d.mu(n), h.mu(n), "mu_{n}");
        }
        assert!(quartic_rates(-0.1, 0.0).is_err());
        assert!(quartic_rates(0.0, -1.0).is_err());
        assert_eq!(quartic_rates(0.0, 3.0).unwrap().mu(0), 3.0);
    }

    #[test]
    fn spec_constants() {
        let s = QuarticSpec::new(0.0, 0.0).unwrap();
        assert!((s.k0 - 1.311_028_777_146_059_9).abs() < 1e-12);
        assert!((s.period - std::f64::consts::SQRT_2 * s.k0).abs() < 1e-12);
        assert!(QuarticSpec::new(0.5, 0.0).unwrap().require_base("x").is_err());
    }

    #[test]
    fn closed_forms_match_series() {
        let s = QuarticSpec::new(0.0, 0.0).unwrap();
        let r = s.rates().unwrap();
        for x in [C64::new(10.0, 10.0), C64::new(1.0, 1.0), C64::new(-3.0, 0.5)] {
            let nv = nevanlinna_eval(&r, x, &tol()).unwrap();
            let alpha = 1.0 / nv.alpha_inv;
            let fr = (nv.a * alpha - nv.c) / (nv.b * alpha - nv.d);
            let kr = nv.c / nv.d;
            let f = friedrichs_transform(&s, x).unwrap();
            let k = krein_transform(&s, x).unwrap();
            assert!((f - fr).norm() < 1e-8 * fr.norm(), "x={x}: {f} vs {fr}");
            assert!((k - kr).norm() < 1e-8 * kr.norm(), "x={x}: {k} vs {kr}");
        }
        let fi = friedrichs_transform(&s, C64::new(0.0, 1.0)).unwrap();
        let ki = krein_transform(&s, C64::new(0.0, 1.0)).unwrap();
        assert!(fi.im < 0.0 && ki.im < 0.0);
        assert!(friedrichs_transform(&s, C64::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn krein_residue_at_zero() {
        let s = QuarticSpec::new(0.0, 0.0).unwrap();
        let eps = C64::new(0.0, 1e-6);
        let res = krein_transform(&s, eps).unwrap() * eps;
        let k = s.period;
        assert!((res - PI / (k * k)).norm() < 1e-5, "{res}");
    }

    #[test]
    fn triple_agreement() {
        let s = QuarticSpec::new(0.0, 0.0).unwrap();
        let r = s.rates().unwrap();
        let fm = border_measure(&s, BorderMode::Friedrichs, 20).unwrap();
        let km = border_measure(&s, BorderMode::Krein, 20).unwrap();
        for x in [C64::new(10.0, 10.0), C64::new(0.0, 1.0), C64::new(-5.0, 2.0), C64::new(100.0, -40.0), C64::new(3.0, 0.5)] {
            let closed = friedrichs_transform(&s, x).unwrap();
            let lim = markov_like_limit(&r, x, BorderMode::Friedrichs, &tol()).unwrap().value;
            let meas = measure_stieltjes(&fm, x).unwrap();
            assert!((closed - lim).norm() < 1e-5 * closed.norm() && (closed - meas).norm() < 1e-5 * closed.norm(), "F x={x}");
            let closed = krein_transform(&s, x).unwrap();
            let lim = markov_like_limit(&r, x, BorderMode::Krein, &tol()).unwrap().value;
            let meas = measure_stieltjes(&km, x).unwrap();
            assert!((closed - lim).norm() < 1e-5 * closed.norm() && (closed - meas).norm() < 1e-5 * closed.norm(), "K x={x}");
        }
    }

    #[test]
    fn border_measure_normalization() {
        let s = QuarticSpec::new(0.0, 0.0).unwrap();
        for mode in [BorderMode::Friedrichs, BorderMode::Krein] {
            let m = border_measure(&s, mode, 20).unwrap();
            assert!(m.normalized);
            assert!((m.total_mass() - 1.0).abs() < 1e-10);
            let printed = m.meta["printed_total"].as_f64().unwrap();
            assert!((printed - 1.0).abs() < 1e-9, "{mode:?}: {printed}");
        }
        let f = border_measure(&s, BorderMode::Friedrichs, 3).unwrap();
        assert!((f.support[0] / (PI / s.period).powi(4) - 1.0).abs() < 1e-14);
        let k = border_measure(&s, BorderMode::Krein, 3).unwrap();
        assert_eq!(k.support[0], 0.0);
        assert!(border_measure(&s, BorderMode::Krein, 0).is_err());
    }

    #[test]
    fn delta_zeros_are_friedrichs_support() {
        let s = QuarticSpec::new(0.0, 0.0).unwrap();
        let k = s.period;
        let f = |y: f64| delta4(0, C64::new(y * k * FRAC_1_SQRT_2, 0.0)).unwrap().re;
        let ys = bracket_roots(f, 0.1, 10.0, 200, &tol());
        assert_eq!(ys.len(), 3);
        for (n, y) in ys.iter().enumerate() {
            let expect = ((2 * n + 1) as f64 * PI / k).powi(4);
            assert!((y.powi(4) / expect - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn series_masses_match_printed() {
        let s = QuarticSpec::new(0.0, 0.0).unwrap();
        let r = s.rates().unwrap();
        let m = nextremal_measure(&r, Param::Infinity, Convention::Mu, (1.0, 1.5e4), 40, &tol()).unwrap();
        let printed = border_atoms(&s, BorderMode::Friedrichs, 3);
        assert_eq!(m.len(), 3, "{:?}", m.support);
        for (i, (x, w)) in printed.iter().enumerate() {
            assert!((m.support[i] / x - 1.0).abs() < 1e-7);
            assert!((m.mass[i] / w - 1.0).abs() < 1e-6, "{} vs {w}", m.mass[i]);
        }
    }

    #[test]
    fn asymptotics_approach_one() {
        let s = QuarticSpec::new(0.0, 0.0).unwrap();
        let x = C64::new(1.0, 1.0);
        let r2000 = asymptotic_checks(&s, x, 2000).unwrap();
        assert!(r2000.ratios[0].deviation < 1e-2);
        let devs: Vec<[f64; 4]> =
            [500, 1000, 2000].iter().map(|&n| asymptotic_checks(&s, x, n).unwrap().ratios.map(|r| r.deviation)).collect();
        for j in 0..4 {
            assert!(devs[1][j] < devs[0][j] && devs[2][j] < devs[1][j], "ratio {j}: {devs:?}");
            assert!(devs[2][j] < 1e-2, "ratio {j}: {devs:?}");
        }
    }
}
