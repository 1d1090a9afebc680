//! Birth-death rate families and the polynomial sequences they generate.
//!
//! Conventions:
//! * Jacobi coefficients `a_n = lambda_n + mu_n`, `b_n = sqrt(lambda_n mu_{n+1})`.
//! * `b_n P_{n+1} = (x - a_n) P_n - b_{n-1} P_{n-1}`, `P_0 = 1`, `P_1 = (x - a_0)/b_0`,
//!   and `Q_n` obeys the same recurrence from `Q_0 = 0`, `Q_1 = 1/b_0`.
//! * `mu_{n+1} F_{n+1} = (lambda_n + mu_n - x) F_n - lambda_{n-1} F_{n-1}`, `F_0 = 1`,
//!   so that `P_n = (-1)^n F_n / sqrt(pi_n)` and `F_n(0) = pi_n` when `mu_0 = 0`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::numerics::{CompensatedSum, C64};

pub type RateFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Where a set of rates came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FamilyTag {
    StieltjesDn { k2: f64 },
    StieltjesCn { k2: f64 },
    GeneralizedC { k2: f64, c: f64 },
    Quartic { c: f64, mu: f64 },
    DualOf(Box<FamilyTag>),
    ZeroRelatedDualOf(Box<FamilyTag>),
    Custom(String),
}

/// The pair `(lambda_n, mu_n)` given as closed-form callbacks.
#[derive(Clone)]
pub struct BirthDeathRates {
    lambda: RateFn,
    mu: RateFn,
    family: FamilyTag,
}

impl fmt::Debug for BirthDeathRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BirthDeathRates")
            .field("family", &self.family)
            .field("lambda_0", &self.lambda(0))
            .field("mu_0", &self.mu(0))
            .field("mu_1", &self.mu(1))
            .finish()
    }
}

impl BirthDeathRates {
    pub fn new(
        family: FamilyTag,
        lambda: impl Fn(usize) -> f64 + Send + Sync + 'static,
        mu: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { lambda: Arc::new(lambda), mu: Arc::new(mu), family }
    }

    pub fn custom(
        label: impl Into<String>,
        lambda: impl Fn(usize) -> f64 + Send + Sync + 'static,
        mu: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(FamilyTag::Custom(label.into()), lambda, mu)
    }

    /// `lambda_n = k2 (2n+1)^2`, `mu_n = 4 n^2`: the fraction of the Laplace transform of dn.
    pub fn stieltjes_dn(k2: f64) -> Result<Self> {
        if !(k2 > 0.0 && k2.is_finite()) {
            return invalid(format!("k2 must be positive, got {k2}"));
        }
        Ok(Self::new(
            FamilyTag::StieltjesDn { k2 },
            move |n| k2 * sq(2.0 * n as f64 + 1.0),
            |n| 4.0 * sq(n as f64),
        ))
    }

    /// `lambda_n = (2n+1)^2`, `mu_n = 4 k2 n^2`: the fraction of the Laplace transform of cn.
    pub fn stieltjes_cn(k2: f64) -> Result<Self> {
        if !(k2 > 0.0 && k2.is_finite()) {
            return invalid(format!("k2 must be positive, got {k2}"));
        }
        Ok(Self::new(FamilyTag::StieltjesCn { k2 }, |n| sq(2.0 * n as f64 + 1.0), move |n| 4.0 * k2 * sq(n as f64)))
    }

    /// `lambda_n = k2 (2n+2c+1)^2`, `mu_n = 4 (n+c)^2` for `n >= 1`, `mu_0 = 0`.
    pub fn generalized_c(k2: f64, c: f64) -> Result<Self> {
        if !(k2 > 0.0 && k2.is_finite()) {
            return invalid(format!("k2 must be positive, got {k2}"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return invalid(format!("c must be positive, got {c}"));
        }
        Ok(Self::new(
            FamilyTag::GeneralizedC { k2, c },
            move |n| k2 * sq(2.0 * (n as f64 + c) + 1.0),
            move |n| if n == 0 { 0.0 } else { 4.0 * sq(n as f64 + c) },
        ))
    }

    pub fn lambda(&self, n: usize) -> f64 {
        (self.lambda)(n)
    }

    pub fn mu(&self, n: usize) -> f64 {
        (self.mu)(n)
    }

    pub fn family(&self) -> &FamilyTag {
        &self.family
    }

    /// Rates with both sequences advanced by `s`: `(lambda_{n+s}, mu_{n+s})`.
    pub fn shifted(&self, s: usize) -> Self {
        if s == 0 {
            return self.clone();
        }
        let (l, m) = (self.lambda.clone(), self.mu.clone());
        Self {
            lambda: Arc::new(move |n| l(n + s)),
            mu: Arc::new(move |n| m(n + s)),
            family: self.family.clone(),
        }
    }

    /// Checks `lambda_k > 0` for `k <= n`, `mu_k > 0` for `1 <= k <= n + 1` and `mu_0 >= 0`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let m0 = self.mu(0);
        if !(m0 >= 0.0 && m0.is_finite()) {
            return invalid(format!("mu_0 must be finite and non-negative, got {m0}"));
        }
        for k in 0..=n {
            let l = self.lambda(k);
            if !(l > 0.0 && l.is_finite()) {
                return invalid(format!("lambda_{k} must be positive, got {l}"));
            }
            let m = self.mu(k + 1);
            if !(m > 0.0 && m.is_finite()) {
                return invalid(format!("mu_{} must be positive, got {m}", k + 1));
            }
        }
        Ok(())
    }

    pub(crate) fn require_mu0_zero(&self) -> Result<()> {
        let m0 = self.mu(0);
        if m0 != 0.0 {
            return invalid(format!("this operation needs mu_0 = 0, got {m0}"));
        }
        Ok(())
    }
}

fn sq(v: f64) -> f64 {
    v * v
}

/// Diagonal `a` and off-diagonal `b` of the Jacobi matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobiCoeffs {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn jacobi_from_rates(rates: &BirthDeathRates, n: usize) -> Result<JacobiCoeffs> {
    if n == 0 {
        return invalid("need at least one Jacobi coefficient");
    }
    rates.validate(n)?;
    let a = (0..n).map(|k| rates.lambda(k) + rates.mu(k)).collect();
    let b = (0..n).map(|k| (rates.lambda(k) * rates.mu(k + 1)).sqrt()).collect();
    Ok(JacobiCoeffs { a, b })
}

/// `pi_k` for `k = 0..=n` together with the partial sums `1/alpha_k = -sum_{j=1..k} 1/(mu_j pi_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiAlpha {
    /// `ln pi_k`; products of rates are never formed directly.
    pub log_pi: Vec<f64>,
    pub alpha_inv: Vec<f64>,
}

impl PiAlpha {
    pub fn pi(&self, k: usize) -> f64 {
        self.log_pi[k].exp()
    }
}

/// `ln pi_k` for `k = 0..=n`; defined for any `mu_0`.
pub fn log_pi(rates: &BirthDeathRates, n: usize) -> Result<Vec<f64>> {
    rates.validate(n.saturating_sub(1))?;
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::new();
    out.push(0.0);
    for k in 0..n {
        acc.add(rates.lambda(k).ln() - rates.mu(k + 1).ln());
        out.push(acc.value());
    }
    Ok(out)
}

pub fn pi_alpha(rates: &BirthDeathRates, n: usize) -> Result<PiAlpha> {
    if n == 0 {
        return invalid("n must be positive");
    }
    rates.require_mu0_zero()?;
    let log_pi = log_pi(rates, n)?;
    let mut alpha_inv = Vec::with_capacity(n + 1);
    alpha_inv.push(0.0);
    let mut acc = CompensatedSum::new();
    for k in 1..=n {
        acc.add(-(-rates.mu(k).ln() - log_pi[k]).exp());
        alpha_inv.push(acc.value());
    }
    Ok(PiAlpha { log_pi, alpha_inv })
}

/// A polynomial sequence evaluated at one point, stored with per-index log
/// scale factors: the true value is `values[k] * exp(scaling_log[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySequence {
    pub values: Vec<C64>,
    pub derivs: Option<Vec<C64>>,
    pub scaling_log: Vec<f64>,
}

impl PolySequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unscaled value; overflows to infinity if the true value is out of range.
    pub fn value(&self, k: usize) -> C64 {
        self.values[k] * self.scaling_log[k].exp()
    }

    pub fn deriv(&self, k: usize) -> Option<C64> {
        self.derivs.as_ref().map(|d| d[k] * self.scaling_log[k].exp())
    }

    /// `ln |value_k|`, valid far outside the double range.
    pub fn ln_abs(&self, k: usize) -> f64 {
        self.values[k].norm().ln() + self.scaling_log[k]
    }

    /// `self_j / other_k`, formed without leaving the scaled representation.
    pub fn ratio(&self, j: usize, other: &PolySequence, k: usize) -> C64 {
        self.values[j] / other.values[k] * (self.scaling_log[j] - other.scaling_log[k]).exp()
    }
}

const SCALE_HI: f64 = 1e150;
const SCALE_LO: f64 = 1e-150;

/// Runs `y_{k+1} = (alpha_k y_k - beta_k y_{k-1}) / gamma_k` for `k >= 1`
/// from the given `y_0, y_1` (and derivatives, where `d alpha_k/dx = dalpha`).
fn run_three_term(
    n: usize,
    y0: (C64, C64),
    y1: (C64, C64),
    with_deriv: bool,
    dalpha: f64,
    coef: impl Fn(usize) -> (C64, f64, f64),
) -> PolySequence {
    let mut values = Vec::with_capacity(n + 1);
    let mut derivs = Vec::with_capacity(if with_deriv { n + 1 } else { 0 });
    let mut scaling_log = Vec::with_capacity(n + 1);
    values.push(y0.0);
    derivs.push(y0.1);
    scaling_log.push(0.0);
    if n == 0 {
        return finish(values, derivs, scaling_log, with_deriv);
    }
    let (mut prev, mut dprev) = y0;
    let (mut cur, mut dcur) = y1;
    let mut scale = 0.0;
    let push = |cur: C64, dcur: C64, scale: f64, v: &mut Vec<C64>, d: &mut Vec<C64>, s: &mut Vec<f64>| {
        v.push(cur);
        d.push(dcur);
        s.push(scale);
    };
    push(cur, dcur, scale, &mut values, &mut derivs, &mut scaling_log);
    for k in 1..n {
        let (alpha, beta, gamma) = coef(k);
        let next = (alpha * cur - prev * beta) / gamma;
        let dnext = if with_deriv { (alpha * dcur + cur * dalpha - dprev * beta) / gamma } else { C64::new(0.0, 0.0) };
        prev = cur;
        dprev = dcur;
        cur = next;
        dcur = dnext;
        let mut m = cur.norm().max(prev.norm());
        if with_deriv {
            m = m.max(dcur.norm()).max(dprev.norm());
        }
        if m > SCALE_HI || (m < SCALE_LO && m > 0.0) {
            let f = 1.0 / m;
            prev *= f;
            cur *= f;
            dprev *= f;
            dcur *= f;
            scale += m.ln();
        }
        push(cur, dcur, scale, &mut values, &mut derivs, &mut scaling_log);
    }
    finish(values, derivs, scaling_log, with_deriv)
}

fn finish(values: Vec<C64>, derivs: Vec<C64>, scaling_log: Vec<f64>, with_deriv: bool) -> PolySequence {
    PolySequence { values, derivs: with_deriv.then_some(derivs), scaling_log }
}

/// `P_k(x)` and `Q_k(x)` for `k = 0..=n`, with exact derivatives when asked.
pub fn eval_pq(rates: &BirthDeathRates, n: usize, x: C64, with_deriv: bool) -> Result<(PolySequence, PolySequence)> {
    if n == 0 {
        return invalid("n must be positive");
    }
    let jac = jacobi_from_rates(rates, n)?;
    let (a, b) = (&jac.a, &jac.b);
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let coef = |k: usize| (x - a[k], b[k - 1], b[k]);
    let p = run_three_term(n, (one, zero), ((x - a[0]) / b[0], one / b[0]), with_deriv, 1.0, coef);
    let q = run_three_term(n, (zero, zero), (one / b[0], zero), with_deriv, 1.0, coef);
    Ok((p, q))
}

/// `F_k(x)` for `k = 0..=n` built from the rates advanced by `shift`
/// (`shift = 1` gives the associated polynomials `F^(1)`).
pub fn eval_f(rates: &BirthDeathRates, n: usize, x: C64, shift: usize) -> Result<PolySequence> {
    eval_f_with_deriv(rates, n, x, shift, false)
}

pub fn eval_f_with_deriv(rates: &BirthDeathRates, n: usize, x: C64, shift: usize, with_deriv: bool) -> Result<PolySequence> {
    let r = rates.shifted(shift);
    r.validate(n)?;
    let one = C64::new(1.0, 0.0);
    let m1 = r.mu(1);
    let f1 = (C64::new(r.lambda(0) + r.mu(0), 0.0) - x) / m1;
    Ok(run_three_term(n, (one, C64::new(0.0, 0.0)), (f1, C64::new(-1.0 / m1, 0.0)), with_deriv, -1.0, |k| {
        (C64::new(r.lambda(k) + r.mu(k), 0.0) - x, r.lambda(k - 1), r.mu(k + 1))
    }))
}

/// Dual rates `(mu_{n+1}, lambda_n)`; with `zero_related` the dual `mu_0` is reset to 0.
pub fn dual_rates(rates: &BirthDeathRates, zero_related: bool) -> Result<BirthDeathRates> {
    rates.require_mu0_zero()?;
    let (l, m) = (rates.lambda.clone(), rates.mu.clone());
    let base = Box::new(rates.family.clone());
    let lambda: RateFn = Arc::new(move |n| m(n + 1));
    let mu: RateFn = if zero_related { Arc::new(move |n| if n == 0 { 0.0 } else { l(n) }) } else { l };
    let family = if zero_related { FamilyTag::ZeroRelatedDualOf(base) } else { FamilyTag::DualOf(base) };
    Ok(BirthDeathRates { lambda, mu, family })
}

/// Zero-related dual polynomials, computed by their own recurrence.
pub fn eval_fhat(rates: &BirthDeathRates, n: usize, x: C64) -> Result<PolySequence> {
    eval_f(&dual_rates(rates, true)?, n, x, 0)
}

/// Forward iteration of `(P_n(x), Q_n(x))` one index at a time, for limits
/// where the stopping index is not known in advance. Both sequences share one
/// scale factor, so `Q_n/P_n` is always available.
pub struct PqStream<'a> {
    rates: &'a BirthDeathRates,
    x: C64,
    n: usize,
    p: (C64, C64),
    q: (C64, C64),
    b_prev: f64,
}

impl<'a> PqStream<'a> {
    /// Starts at `n = 1`.
    pub fn new(rates: &'a BirthDeathRates, x: C64) -> Result<Self> {
        rates.validate(0)?;
        let a0 = rates.lambda(0) + rates.mu(0);
        let b0 = (rates.lambda(0) * rates.mu(1)).sqrt();
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Ok(Self { rates, x, n: 1, p: (one, (x - a0) / b0), q: (zero, one / b0), b_prev: b0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `Q_n(x)/P_n(x)` at the current index.
    pub fn ratio(&self) -> C64 {
        self.q.1 / self.p.1
    }

    /// Moves to `n + 1`.
    pub fn advance(&mut self) -> Result<()> {
        let k = self.n;
        let (l, m) = (self.rates.lambda(k), self.rates.mu(k + 1));
        if !(l > 0.0 && m > 0.0 && l.is_finite() && m.is_finite()) {
            return invalid(format!("rates not positive at index {k}"));
        }
        let a = l + self.rates.mu(k);
        let b = (l * m).sqrt();
        let step = |(prev, cur): (C64, C64)| (cur, ((self.x - a) * cur - prev * self.b_prev) / b);
        self.p = step(self.p);
        self.q = step(self.q);
        self.b_prev = b;
        self.n += 1;
        let mag = self.p.1.norm().max(self.q.1.norm());
        if mag > SCALE_HI || (mag < SCALE_LO && mag > 0.0) {
            let f = 1.0 / mag;
            self.p = (self.p.0 * f, self.p.1 * f);
            self.q = (self.q.0 * f, self.q.1 * f);
        }
        Ok(())
    }
}
