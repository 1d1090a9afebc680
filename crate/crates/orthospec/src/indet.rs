//! Indeterminate problems: determinacy classification, the Nevanlinna matrix
//! `(A, B, C, D)` by its defining series, N-extremal transforms and measures,
//! the dual-polynomial form of the modified entries, and the Markov-like
//! limits for the Friedrichs and Krein border measures.
//!
//! The series converge only algebraically (terms like `k⁻²` for the quartic
//! family), so partial sums are sampled on a doubling ladder and extrapolated
//! with Richardson's scheme rather than summed to a small last term.

use std::cell::RefCell;
use std::fmt;

use serde::Serialize;
use serde_json::json;

use crate::contfrac::DiscreteMeasure;
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    bracket_roots, doubling_checkpoints, ladder_limit, ser_complex, ComplexSum, ConvergedLimit, Tolerance, C64,
};
use crate::recurrence::{dual_rates, eval_f, eval_fhat, eval_pq, log_pi, pi_alpha, BirthDeathRates, PiAlpha};

/// First rung of the extrapolation ladder.
pub const LADDER_BASE: usize = 32;
/// Largest truncation index ever used.
pub const LADDER_LIMIT: usize = 4096;
const MIN_LEVELS: usize = 4;
/// Terms used by the classification that guards the indeterminate operations.
pub const GUARD_TERMS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    DetH,
    IndetSIndetH,
    DetSIndetH,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::DetH => "DET_H",
            Verdict::IndetSIndetH => "INDET_S_INDET_H",
            Verdict::DetSIndetH => "DET_S_INDET_H",
        })
    }
}

/// One criterion series: partial sum, tail diagnostics and the verdict on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesEstimate {
    pub name: &'static str,
    pub partial: f64,
    /// Effective term ratio `t_{2n}/t_n`; below 1/2 means summable.
    pub tail_ratio: f64,
    /// Power-law estimate of the remainder (infinite when divergent).
    pub tail_estimate: f64,
    pub convergent: bool,
    pub confident: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Determinacy {
    pub verdict: Verdict,
    /// `Σ(π_n + 1/μ_nπ_n)`, `Σπ_n(Σ_{k≤n} 1/μ_kπ_k)²`, `Σ 1/μ_nπ_n`.
    pub series_values: [SeriesEstimate; 3],
    pub confident: bool,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

// Fits ln t_n against ln n over the last quarter of the terms. For t_n ~ n^{-p}
// the doubling ratio is 2^{-p}; geometric decay shows up as a huge p.
fn estimate_series(name: &'static str, log_terms: &[f64], first: usize) -> SeriesEstimate {
    let n = log_terms.len() - 1;
    let mut log_sum = f64::NEG_INFINITY;
    for &lt in &log_terms[first..] {
        log_sum = log_add(log_sum, lt);
    }
    let start = (3 * n / 4).max(first.max(1));
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &lt) in log_terms.iter().enumerate().skip(start) {
        let lx = (k as f64).ln();
        sx += lx;
        sy += lt;
        sxx += lx * lx;
        sxy += lx * lt;
        cnt += 1.0;
    }
    let slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    let p = -slope;
    let tail_ratio = (-p * std::f64::consts::LN_2).exp();
    let convergent = tail_ratio < 0.5;
    let tail_estimate = if convergent { (log_terms[n] + (n as f64).ln()).exp() / (p - 1.0) } else { f64::INFINITY };
    SeriesEstimate {
        name,
        partial: log_sum.exp(),
        tail_ratio,
        tail_estimate,
        convergent,
        confident: (tail_ratio - 0.5).abs() > 0.05,
    }
}

/// Classifies the moment problem from the growth of the rates (`μ_0 = 0`):
/// indeterminate Stieltjes iff `Σ(π_n + 1/μ_nπ_n) < ∞`, indeterminate
/// Hamburger iff `Σπ_n(Σ_{k≤n} 1/μ_kπ_k)² < ∞`.
pub fn classify(rates: &BirthDeathRates, nmax: usize) -> Result<Determinacy> {
    rates.require_mu0_zero()?;
    if nmax < 100 {
        return invalid(format!("classify needs nmax >= 100, got {nmax}"));
    }
    let lp = log_pi(rates, nmax)?;
    let mut t_i = vec![0.0; nmax + 1];
    let mut t_ii = vec![f64::NEG_INFINITY; nmax + 1];
    let mut t_iii = vec![f64::NEG_INFINITY; nmax + 1];
    let mut inner = f64::NEG_INFINITY;
    for n in 1..=nmax {
        let inv = -rates.mu(n).ln() - lp[n];
        inner = log_add(inner, inv);
        t_i[n] = log_add(lp[n], inv);
        t_ii[n] = lp[n] + 2.0 * inner;
        t_iii[n] = inv;
    }
    let series = [
        estimate_series("pi_plus_inverse", &t_i, 0),
        estimate_series("hamburger", &t_ii, 1),
        estimate_series("inverse", &t_iii, 1),
    ];
    let (verdict, confident) = if series[0].convergent {
        (Verdict::IndetSIndetH, series[0].confident)
    } else if series[1].convergent {
        (Verdict::DetSIndetH, series[0].confident && series[1].confident)
    } else {
        (Verdict::DetH, series[0].confident && series[1].confident)
    };
    Ok(Determinacy { verdict, series_values: series, confident })
}

fn require_verdict(rates: &BirthDeathRates, allowed: &[Verdict], what: &str) -> Result<Determinacy> {
    let d = classify(rates, GUARD_TERMS)?;
    if !allowed.contains(&d.verdict) {
        return Err(Error::Classification(format!("{what} needs {allowed:?}, rates classify as {}", d.verdict)));
    }
    Ok(d)
}

fn checkpoints() -> Vec<usize> {
    doubling_checkpoints(LADDER_BASE, LADDER_LIMIT)
}

// Prefix sums Σ_{k<n} term(k) sampled at each checkpoint n.
fn prefix_samples(term: impl Fn(usize) -> C64, cps: &[usize]) -> Vec<C64> {
    let mut acc = ComplexSum::new();
    let mut out = Vec::with_capacity(cps.len());
    let mut k = 0;
    for &n in cps {
        while k < n {
            acc.add(term(k));
            k += 1;
        }
        out.push(acc.value());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NevanlinnaValue {
    #[serde(serialize_with = "ser_complex")]
    pub a: C64,
    #[serde(serialize_with = "ser_complex")]
    pub b: C64,
    #[serde(serialize_with = "ser_complex")]
    pub c: C64,
    #[serde(serialize_with = "ser_complex")]
    pub d: C64,
    #[serde(serialize_with = "ser_complex")]
    pub x: C64,
    pub terms_used: usize,
    /// `|AD − BC − 1|`.
    pub det_defect: f64,
    /// `1/α = −Σ 1/(μ_kπ_k)`.
    pub alpha_inv: f64,
    /// Largest extrapolation error indicator among the series.
    pub error_estimate: f64,
    #[serde(skip)]
    pub b_prime: Option<C64>,
    #[serde(skip)]
    pub d_prime: Option<C64>,
}

// P_k(0) = (−1)^k √π_k and Q_k(0) = P_k(0)/α_k, both free of recurrence error.
fn values_at_zero(pa: &PiAlpha, k: usize) -> (f64, f64) {
    let p0 = if k % 2 == 0 { 1.0 } else { -1.0 } * (0.5 * pa.log_pi[k]).exp();
    (p0, p0 * pa.alpha_inv[k])
}

struct Prepared {
    pa: PiAlpha,
    alpha: ConvergedLimit,
}

fn prepare(rates: &BirthDeathRates, tol: &Tolerance) -> Result<Prepared> {
    let pa = pi_alpha(rates, LADDER_LIMIT)?;
    let cps = checkpoints();
    let samples: Vec<C64> = cps.iter().map(|&n| C64::new(pa.alpha_inv[n], 0.0)).collect();
    let alpha = ladder_limit(&samples, &cps, tol, MIN_LEVELS);
    Ok(Prepared { pa, alpha })
}

fn no_convergence(what: &str, lim: &ConvergedLimit) -> Error {
    Error::NoConvergence {
        estimate: format!("{what} = {}", lim.value),
        bound: lim.last_increment,
        iterations: lim.terms_used,
    }
}

fn nevanlinna_core(rates: &BirthDeathRates, prep: &Prepared, x: C64, tol: &Tolerance, derivs: bool) -> Result<NevanlinnaValue> {
    let (p, q) = eval_pq(rates, LADDER_LIMIT, x, derivs)?;
    let pa = &prep.pa;
    let cps = checkpoints();
    let zero = |k| values_at_zero(pa, k);
    let ladders = [
        prefix_samples(|k| zero(k).1 * q.value(k), &cps),
        prefix_samples(|k| zero(k).1 * p.value(k), &cps),
        prefix_samples(|k| zero(k).0 * q.value(k), &cps),
        prefix_samples(|k| zero(k).0 * p.value(k), &cps),
    ];
    let mut limits = Vec::with_capacity(6);
    for s in &ladders {
        // Entries carry a factor x, so the tolerance applies to x·S.
        let scaled: Vec<C64> = s.iter().map(|v| v * x).collect();
        limits.push(ladder_limit(&scaled, &cps, tol, MIN_LEVELS));
    }
    let (mut b_prime, mut d_prime) = (None, None);
    if derivs {
        let dsb = prefix_samples(|k| zero(k).1 * (p.value(k) + x * p.deriv(k).unwrap_or_default()), &cps);
        let dsd = prefix_samples(|k| zero(k).0 * (p.value(k) + x * p.deriv(k).unwrap_or_default()), &cps);
        let lb = ladder_limit(&dsb, &cps, tol, MIN_LEVELS);
        let ld = ladder_limit(&dsd, &cps, tol, MIN_LEVELS);
        b_prime = Some(lb.value);
        d_prime = Some(ld.value);
        limits.push(lb);
        limits.push(ld);
    }
    // B and C are ±1 plus a series, so the matrix scale is at least 1; an
    // entry that is itself small near x = 0 is judged against that scale.
    let scale = limits.iter().map(|l| l.value.norm()).fold(1.0, f64::max);
    if let Some(bad) = limits.iter().find(|l| !(l.converged || l.last_increment <= tol.bound(scale))) {
        return Err(no_convergence("Nevanlinna series", bad));
    }
    let one = C64::new(1.0, 0.0);
    let (a, b, c, d) = (limits[0].value, limits[1].value - one, limits[2].value + one, limits[3].value);
    let terms_used = limits.iter().map(|l| l.terms_used).max().unwrap_or(0);
    let error_estimate = limits.iter().map(|l| l.last_increment).filter(|e| e.is_finite()).fold(0.0, f64::max);
    Ok(NevanlinnaValue {
        a,
        b,
        c,
        d,
        x,
        terms_used,
        det_defect: (a * d - b * c - one).norm(),
        alpha_inv: prep.alpha.value.re,
        error_estimate,
        b_prime,
        d_prime,
    })
}

/// `A, B, C, D` at `x` from
/// `A = xΣQ_k(0)Q_k(x)`, `B = −1 + xΣQ_k(0)P_k(x)`,
/// `C = 1 + xΣP_k(0)Q_k(x)`, `D = xΣP_k(0)P_k(x)`.
///
/// Refuses rates that do not classify as indeterminate Stieltjes.
pub fn nevanlinna_eval(rates: &BirthDeathRates, x: C64, tol: &Tolerance) -> Result<NevanlinnaValue> {
    nevanlinna_eval_with(rates, x, tol, false)
}

/// As [`nevanlinna_eval`], also filling `B'` and `D'` from the term-wise
/// differentiated series.
pub fn nevanlinna_eval_with(rates: &BirthDeathRates, x: C64, tol: &Tolerance, derivs: bool) -> Result<NevanlinnaValue> {
    if !x.is_finite() {
        return invalid(format!("x must be finite, got {x}"));
    }
    require_verdict(rates, &[Verdict::IndetSIndetH], "nevanlinna_eval")?;
    let prep = prepare(rates, tol)?;
    if !prep.alpha.converged {
        return Err(no_convergence("1/alpha", &prep.alpha));
    }
    nevanlinna_core(rates, &prep, x, tol, derivs)
}

/// Truncated entries `(A_n, B_n, C_n, D_n)`, the sums taken over `k = 0..=n`.
pub fn nevanlinna_partial(rates: &BirthDeathRates, x: C64, n: usize) -> Result<[C64; 4]> {
    let pa = pi_alpha(rates, n + 1)?;
    let (p, q) = eval_pq(rates, n + 1, x, false)?;
    let mut s = [ComplexSum::new(), ComplexSum::new(), ComplexSum::new(), ComplexSum::new()];
    for k in 0..=n {
        let (p0, q0) = values_at_zero(&pa, k);
        s[0].add(q0 * q.value(k));
        s[1].add(q0 * p.value(k));
        s[2].add(p0 * q.value(k));
        s[3].add(p0 * p.value(k));
    }
    let one = C64::new(1.0, 0.0);
    Ok([x * s[0].value(), x * s[1].value() - one, x * s[2].value() + one, x * s[3].value()])
}

/// `α` from `1/α = −Σ_{k≥1} 1/(μ_kπ_k)`; always negative.
pub fn alpha_limit(rates: &BirthDeathRates, tol: &Tolerance) -> Result<f64> {
    rates.require_mu0_zero()?;
    let d = classify(rates, GUARD_TERMS)?;
    if !d.series_values[2].convergent {
        return Err(Error::Classification(format!(
            "sum of 1/(mu_k pi_k) diverges (tail ratio {:.3}); the problem is det S",
            d.series_values[2].tail_ratio
        )));
    }
    let prep = prepare(rates, tol)?;
    if !prep.alpha.converged {
        return Err(no_convergence("1/alpha", &prep.alpha));
    }
    Ok(1.0 / prep.alpha.value.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Param {
    Finite(f64),
    Infinity,
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Finite(v) => write!(f, "{v}"),
            Param::Infinity => f.write_str("inf"),
        }
    }
}

/// Parametrization of the N-extremal family. `Lambda` gives
/// `(Aλ − C)/(Bλ − D)`. `Mu` uses `Ã = A − C/α`, `B̃ = B − D/α` and
/// `μ = αλ/(λ − α)`, which turns the transform into `(Ãμ + C)/(B̃μ + D)`;
/// positive supports then correspond to `μ ∈ [0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Lambda,
    Mu,
}

fn entries(nv: &NevanlinnaValue, convention: Convention) -> (C64, C64, C64, C64) {
    match convention {
        Convention::Lambda => (nv.a, nv.b, nv.c, nv.d),
        Convention::Mu => (nv.a - nv.c * nv.alpha_inv, nv.b - nv.d * nv.alpha_inv, -nv.c, -nv.d),
    }
}

// Denominator Bt − D in the convention's entries (B alone at t = ∞).
fn denominator(b: C64, d: C64, param: Param) -> C64 {
    match param {
        Param::Finite(t) => b * t - d,
        Param::Infinity => b,
    }
}

/// The N-extremal Stieltjes transform at `param` in the chosen convention;
/// `A/B` (or `Ã/B̃`) at infinity.
pub fn nextremal_transform(nv: &NevanlinnaValue, param: Param, convention: Convention) -> Result<C64> {
    if let Param::Finite(t) = param {
        if !t.is_finite() {
            return invalid(format!("parameter must be finite or Infinity, got {t}"));
        }
    }
    let (a, b, c, d) = entries(nv, convention);
    let num = match param {
        Param::Finite(t) => a * t - c,
        Param::Infinity => a,
    };
    let den = denominator(b, d, param);
    let value = num / den;
    if den.norm() == 0.0 || !value.is_finite() {
        return Err(Error::Pole { location: format!("x = {} (parameter {param})", nv.x) });
    }
    Ok(value)
}

/// Signed fourth power used to scan windows: atoms of the quartic family are
/// evenly spaced in `y = x^{1/4}`.
fn from_scan(y: f64) -> f64 {
    y * y * y * y.abs()
}

fn to_scan(x: f64) -> f64 {
    x.signum() * x.abs().powf(0.25)
}

/// Grid size giving five samples per expected spacing of zeros, measured in
/// the scan variable `x^{1/4}`.
pub fn suggested_grid(window: (f64, f64), spacing_fourth_root: f64) -> usize {
    let len = to_scan(window.1) - to_scan(window.0);
    ((len / (spacing_fourth_root / 5.0)).ceil() as usize).max(8)
}

/// Atoms of the N-extremal measure `ψ_t` inside `window`: the zeros of
/// `B t − D` (or `B` at `t = ∞`), with masses `1/(B'D − BD')`.
///
/// The scan is uniform in `x^{1/4}` with `grid` steps. The result covers the
/// window only and is flagged as not normalized.
pub fn nextremal_measure(
    rates: &BirthDeathRates,
    param: Param,
    convention: Convention,
    window: (f64, f64),
    grid: usize,
    tol: &Tolerance,
) -> Result<DiscreteMeasure> {
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return invalid(format!("window [{lo}, {hi}] is not a finite interval"));
    }
    if let Param::Finite(t) = param {
        if !t.is_finite() {
            return invalid(format!("parameter must be finite or Infinity, got {t}"));
        }
    }
    require_verdict(rates, &[Verdict::IndetSIndetH], "nextremal_measure")?;
    let prep = prepare(rates, tol)?;
    if !prep.alpha.converged {
        return Err(no_convergence("1/alpha", &prep.alpha));
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let g = |y: f64| -> f64 {
        let x = C64::new(from_scan(y), 0.0);
        match nevanlinna_core(rates, &prep, x, tol, false) {
            Ok(nv) => {
                let (_, b, _, d) = entries(&nv, convention);
                denominator(b, d, param).re
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let roots = bracket_roots(g, to_scan(lo), to_scan(hi), grid, tol);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut pairs = Vec::with_capacity(roots.len());
    for y in roots {
        let s = from_scan(y);
        let nv = nevanlinna_core(rates, &prep, C64::new(s, 0.0), tol, true)?;
        let (bp, dp) = (nv.b_prime.unwrap_or_default(), nv.d_prime.unwrap_or_default());
        // B̃'D̃ − B̃D̃' equals B'D − BD', so one mass formula serves both conventions.
        let mass = 1.0 / (bp * nv.d - nv.b * dp).re;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::NoConvergence {
                estimate: format!("mass {mass} at support point {s}"),
                bound: nv.error_estimate,
                iterations: nv.terms_used,
            });
        }
        pairs.push((s, mass));
    }
    Ok(DiscreteMeasure::from_pairs(pairs, false)?
        .with_meta("param", json!(param.to_string()))
        .with_meta("convention", json!(convention))
        .with_meta("window", json!([lo, hi])))
}

/// `(B − D/α, A − C/α)` computed from the dual families instead of the
/// Nevanlinna series: `B − D/α = −1 + (x/μ̃_0)ΣF̃_n(x)` and
/// `A − C/α = (1/μ̃_0)ΣF̂_n(x)`, with `μ̃_0 = λ_0`.
pub fn modified_entries_dual(rates: &BirthDeathRates, x: C64, tol: &Tolerance) -> Result<(C64, C64)> {
    rates.require_mu0_zero()?;
    if !x.is_finite() {
        return invalid(format!("x must be finite, got {x}"));
    }
    require_verdict(rates, &[Verdict::IndetSIndetH], "modified_entries_dual")?;
    let mu_t0 = rates.lambda(0);
    let ft = eval_f(&dual_rates(rates, false)?, LADDER_LIMIT, x, 0)?;
    let fh = eval_fhat(rates, LADDER_LIMIT, x)?;
    let cps = checkpoints();
    let sb: Vec<C64> = prefix_samples(|k| ft.value(k), &cps).into_iter().map(|s| s * x / mu_t0).collect();
    let sa: Vec<C64> = prefix_samples(|k| fh.value(k), &cps).into_iter().map(|s| s / mu_t0).collect();
    let lb = ladder_limit(&sb, &cps, tol, MIN_LEVELS);
    let la = ladder_limit(&sa, &cps, tol, MIN_LEVELS);
    let scale = 1f64.max((lb.value - 1.0).norm()).max(la.value.norm());
    for (name, l) in [("dual B series", &lb), ("dual A series", &la)] {
        if !(l.converged || l.last_increment <= tol.bound(scale)) {
            return Err(no_convergence(name, l));
        }
    }
    Ok((lb.value - 1.0, la.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BorderMode {
    Friedrichs,
    Krein,
}

/// `lim Q_n/P_n` (Friedrichs) or `lim F̂_n/(x F̃_n)` (Krein), extrapolated from
/// truncations `32, 64, ..., 4096`.
pub fn markov_like_limit(rates: &BirthDeathRates, x: C64, mode: BorderMode, tol: &Tolerance) -> Result<ConvergedLimit> {
    rates.require_mu0_zero()?;
    if x.im == 0.0 || !x.is_finite() {
        return invalid(format!("markov_like_limit needs x off the real axis, got {x}"));
    }
    let cps = checkpoints();
    let samples: Vec<C64> = match mode {
        BorderMode::Friedrichs => {
            require_verdict(rates, &[Verdict::IndetSIndetH, Verdict::DetSIndetH], "friedrichs mode")?;
            let (p, q) = eval_pq(rates, LADDER_LIMIT, x, false)?;
            cps.iter().map(|&n| q.ratio(n, &p, n)).collect()
        }
        BorderMode::Krein => {
            require_verdict(rates, &[Verdict::IndetSIndetH], "krein mode")?;
            let ft = eval_f(&dual_rates(rates, false)?, LADDER_LIMIT, x, 0)?;
            let fh = eval_fhat(rates, LADDER_LIMIT, x)?;
            cps.iter().map(|&n| fh.ratio(n, &ft, n) / x).collect()
        }
    };
    Ok(ladder_limit(&samples, &cps, tol, MIN_LEVELS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quartic::quartic_rates;

    fn tol() -> Tolerance {
        Tolerance::new(1e-13, 1e-10, 2000).unwrap()
    }

    #[test]
    fn classification_examples() {
        let q = classify(&quartic_rates(0.0, 0.0).unwrap(), 1000).unwrap();
        assert_eq!(q.verdict, Verdict::IndetSIndetH);
        assert!(q.confident);
        let dn = classify(&BirthDeathRates::stieltjes_dn(0.5).unwrap(), 1000).unwrap();
        assert_eq!(dn.verdict, Verdict::DetH);
        let unit = BirthDeathRates::custom("unit", |_| 1.0, |n| if n == 0 { 0.0 } else { 1.0 });
        let u = classify(&unit, 500).unwrap();
        assert_eq!(u.verdict, Verdict::DetH);
        assert!(u.confident);
        assert!(classify(&quartic_rates(0.0, 1.0).unwrap(), 1000).is_err());
        assert!(classify(&unit, 50).is_err());
        assert_eq!(serde_json::to_string(&q.verdict).unwrap(), "\"INDET_S_INDET_H\"");
    }

    #[test]
    fn nevanlinna_at_zero_and_det() {
        let r = quartic_rates(0.0, 0.0).unwrap();
        let z = nevanlinna_eval(&r, C64::new(0.0, 0.0), &tol()).unwrap();
        assert_eq!((z.a, z.b, z.c, z.d), (C64::new(0.0, 0.0), C64::new(-1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)));
        let v = nevanlinna_eval(&r, C64::new(5.0, 0.0), &tol()).unwrap();
        assert!(v.det_defect < 1e-9, "{v:?}");
        assert!(v.alpha_inv < 0.0);
        let dn = BirthDeathRates::stieltjes_dn(0.5).unwrap();
        assert!(matches!(nevanlinna_eval(&dn, C64::new(1.0, 0.0), &tol()), Err(Error::Classification(_))));
    }

    #[test]
    fn partial_det_identity() {
        let r = quartic_rates(0.0, 0.0).unwrap();
        let x = C64::new(3.0, -2.0);
        for n in [0, 1, 2, 5, 20] {
            let [a, b, c, d] = nevanlinna_partial(&r, x, n).unwrap();
            assert!((a * d - b * c - 1.0).norm() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn alpha_limit_against_direct_sum() {
        let r = quartic_rates(0.0, 0.0).unwrap();
        let alpha = alpha_limit(&r, &tol()).unwrap();
        assert!(alpha < 0.0);
        // Direct summation in log space with one Richardson step on the tail.
        let partial = |n: usize| {
            let (mut lp, mut s) = (0.0f64, 0.0f64);
            let mut sums = Vec::new();
            for k in 1..=n {
                lp += r.lambda(k - 1).ln() - r.mu(k).ln();
                s += (-r.mu(k).ln() - lp).exp();
                if k == n / 2 || k == n {
                    sums.push(s);
                }
            }
            2.0 * sums[1] - sums[0]
        };
        let oracle = -partial(1_000_000);
        assert!((1.0 / alpha - oracle).abs() < 1e-9 * oracle.abs(), "{} vs {oracle}", 1.0 / alpha);
        let dn = BirthDeathRates::stieltjes_dn(0.5).unwrap();
        assert!(alpha_limit(&dn, &tol()).is_err());
    }

    #[test]
    fn transform_conventions_agree() {
        let r = quartic_rates(0.0, 0.0).unwrap();
        let nv = nevanlinna_eval(&r, C64::new(2.0, 1.5), &tol()).unwrap();
        let alpha = 1.0 / nv.alpha_inv;
        let lam = nextremal_transform(&nv, Param::Finite(alpha), Convention::Lambda).unwrap();
        let mu = nextremal_transform(&nv, Param::Infinity, Convention::Mu).unwrap();
        assert!((lam - mu).norm() < 1e-10 * lam.norm());
        let k0 = nextremal_transform(&nv, Param::Finite(0.0), Convention::Lambda).unwrap();
        assert!((k0 - nv.c / nv.d).norm() < 1e-14 * k0.norm());
        let km = nextremal_transform(&nv, Param::Finite(0.0), Convention::Mu).unwrap();
        assert!((k0 - km).norm() < 1e-12 * k0.norm());
        // λ ↔ μ = αλ/(λ−α).
        let l = 0.3 * alpha;
        let m = alpha * l / (l - alpha);
        let a = nextremal_transform(&nv, Param::Finite(l), Convention::Lambda).unwrap();
        let b = nextremal_transform(&nv, Param::Finite(m), Convention::Mu).unwrap();
        assert!((a - b).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn dual_path_matches_direct() {
        let r = quartic_rates(0.0, 0.0).unwrap();
        let x = C64::new(3.0, 2.0);
        let nv = nevanlinna_eval(&r, x, &tol()).unwrap();
        let (bt, at) = modified_entries_dual(&r, x, &tol()).unwrap();
        let bd = nv.b - nv.d * nv.alpha_inv;
        let ad = nv.a - nv.c * nv.alpha_inv;
        assert!((bt - bd).norm() < 1e-8 * bd.norm(), "{bt} vs {bd}");
        assert!((at - ad).norm() < 1e-8 * ad.norm(), "{at} vs {ad}");
    }

    #[test]
    fn border_limits_match_series() {
        let r = quartic_rates(0.0, 0.0).unwrap();
        let x = C64::new(10.0, 10.0);
        let nv = nevanlinna_eval(&r, x, &tol()).unwrap();
        let fr = markov_like_limit(&r, x, BorderMode::Friedrichs, &tol()).unwrap();
        let kr = markov_like_limit(&r, x, BorderMode::Krein, &tol()).unwrap();
        let alpha = 1.0 / nv.alpha_inv;
        let fr_oracle = (nv.a * alpha - nv.c) / (nv.b * alpha - nv.d);
        let kr_oracle = nv.c / nv.d;
        assert!((fr.value - fr_oracle).norm() < 1e-7 * fr_oracle.norm(), "{fr:?} vs {fr_oracle}");
        assert!((kr.value - kr_oracle).norm() < 1e-7 * kr_oracle.norm(), "{kr:?} vs {kr_oracle}");
        assert!(fr.value.im < 0.0 && kr.value.im < 0.0);
        assert!(fr.terms_used <= 5000 && kr.terms_used <= 5000);
        let dn = BirthDeathRates::stieltjes_dn(0.5).unwrap();
        assert!(matches!(markov_like_limit(&dn, x, BorderMode::Friedrichs, &tol()), Err(Error::Classification(_))));
    }

    #[test]
    fn krein_measure_starts_at_zero() {
        let r = quartic_rates(0.0, 0.0).unwrap();
        let m = nextremal_measure(&r, Param::Finite(0.0), Convention::Lambda, (-1.0, 3000.0), 60, &tol()).unwrap();
        assert!(!m.normalized);
        assert!(m.support[0].abs() < 1e-9, "{:?}", m.support);
        assert!(m.mass.iter().all(|&w| w > 0.0));
        let k = 1.854_074_677_301_371_9_f64;
        let pi = std::f64::consts::PI;
        assert!((m.mass[0] - pi / (k * k)).abs() < 1e-8, "{}", m.mass[0]);
        assert!((m.support[1] / (2.0 * pi / k).powi(4) - 1.0).abs() < 1e-7, "{:?}", m.support);
    }
}
