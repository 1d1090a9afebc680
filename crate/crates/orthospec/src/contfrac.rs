//! Finite J- and S-fractions, Gauss (Christoffel) discretizations and the
//! discrete measure type with its transforms, moments and serialization.
//!
//! Variable conventions: a J-fraction in `z` approximates `∫ dψ(t)/(z - t)`;
//! an S-fraction in `x` approximates `∫ x dψ(t)/(x² + t)`. They are related by
//! `S(x) = -x J(-x²)`.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{invalid, Error, Result};
use crate::numerics::{tridiag_eigen, CompensatedSum, ComplexSum, C64};
use crate::recurrence::{eval_pq, jacobi_from_rates, BirthDeathRates, JacobiCoeffs};

/// Atoms `support[k]` with weights `mass[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub support: Vec<f64>,
    pub mass: Vec<f64>,
    pub normalized: bool,
    #[serde(default)]
    pub meta: Map<String, Value>,
}

/// Largest allowed deviation of the total mass from 1 for a normalized measure.
pub const NORMALIZATION_TOL: f64 = 1e-10;

impl DiscreteMeasure {
    pub fn new(support: Vec<f64>, mass: Vec<f64>, normalized: bool) -> Result<Self> {
        let m = Self { support, mass, normalized, meta: Map::new() };
        m.check()?;
        Ok(m)
    }

    /// Builds a measure from unordered `(point, mass)` pairs.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>, normalized: bool) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (support, mass) = pairs.into_iter().unzip();
        Self::new(support, mass, normalized)
    }

    fn check(&self) -> Result<()> {
        if self.support.len() != self.mass.len() {
            return invalid("support and mass lengths differ");
        }
        if self.support.iter().any(|s| !s.is_finite()) {
            return invalid("support points must be finite");
        }
        if self.support.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("support must be strictly increasing");
        }
        if let Some(m) = self.mass.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return invalid(format!("masses must be positive and finite, found {m}"));
        }
        if self.normalized && (self.total_mass() - 1.0).abs() > NORMALIZATION_TOL {
            return invalid(format!("measure flagged normalized but total mass is {}", self.total_mass()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = CompensatedSum::new();
        self.mass.iter().for_each(|&m| s.add(m));
        s.value()
    }

    /// Rescales the masses to total 1.
    pub fn normalize(&self) -> Result<Self> {
        let t = self.total_mass();
        if !(t > 0.0) {
            return invalid("cannot normalize an empty measure");
        }
        let mut out = self.clone();
        out.mass.iter_mut().for_each(|m| *m /= t);
        out.normalized = true;
        Ok(out)
    }

    pub fn with_meta(mut self, key: &str, value: Value) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }

    /// JSON object `{"support", "mass", "normalized", "meta"}` with numbers
    /// printed to 17 significant digits.
    pub fn to_json(&self) -> String {
        let arr = |v: &[f64]| v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(",");
        format!(
            "{{\"support\":[{}],\"mass\":[{}],\"normalized\":{},\"meta\":{}}}",
            arr(&self.support),
            arr(&self.mass),
            self.normalized,
            Value::Object(self.meta.clone())
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad measure JSON: {e}")))?;
        m.check()?;
        Ok(m)
    }

    /// CSV with header `support,mass`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["support", "mass"]).expect("in-memory write");
        for (s, m) in self.support.iter().zip(&self.mass) {
            w.write_record([fmt17(*s), fmt17(*m)]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Reads the CSV form; the `normalized` flag is recomputed from the total mass.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| Error::InvalidInput(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["support", "mass"] {
            return invalid("CSV header must be `support,mass`");
        }
        let mut pairs = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::InvalidInput(e.to_string()))?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidInput(format!("bad CSV number in row {:?}", rec)))
            };
            pairs.push((parse(0)?, parse(1)?));
        }
        let (support, mass): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut m = Self::new(support, mass, false)?;
        m.normalized = (m.total_mass() - 1.0).abs() <= NORMALIZATION_TOL;
        Ok(m)
    }
}

/// Decimal text with 17 significant digits (exact round trip for `f64`).
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Backward evaluation of `1/(z-a_0-b_0²/(z-a_1-...-b_{d-2}²/(z-a_{d-1})))`.
pub fn j_fraction(jacobi: &JacobiCoeffs, depth: usize, z: C64) -> Result<C64> {
    if depth == 0 || depth > jacobi.a.len() {
        return invalid(format!("depth {depth} outside 1..={}", jacobi.a.len()));
    }
    let mut t = z - jacobi.a[depth - 1];
    for k in (0..depth - 1).rev() {
        if t.norm() == 0.0 || !t.is_finite() {
            return Err(Error::Pole { location: format!("J-fraction level {}", k + 1) });
        }
        t = z - jacobi.a[k] - jacobi.b[k] * jacobi.b[k] / t;
    }
    if t.norm() == 0.0 || !t.is_finite() {
        return Err(Error::Pole { location: "J-fraction level 0".into() });
    }
    Ok(1.0 / t)
}

/// The `j`-th S-fraction coefficient, `j >= 1`: `lambda_0, mu_1, lambda_1, mu_2, ...`.
pub fn s_coefficient(rates: &BirthDeathRates, j: usize) -> f64 {
    let i = j - 1;
    if i % 2 == 0 {
        rates.lambda(i / 2)
    } else {
        rates.mu(i / 2 + 1)
    }
}

/// `1/(x + c_1/(x + c_2/(... + c_depth/x)))` with `c_j` from [`s_coefficient`].
///
/// `depth` counts partial quotients after the leading `1/x`, so depth `2k`
/// uses `lambda_0..lambda_{k-1}` and `mu_1..mu_k`.
pub fn s_fraction(rates: &BirthDeathRates, depth: usize, x: C64) -> Result<C64> {
    rates.require_mu0_zero()?;
    if depth > 0 {
        rates.validate(depth / 2)?;
    }
    let mut t = x;
    for j in (1..=depth).rev() {
        if t.norm() == 0.0 {
            return Err(Error::Pole { location: format!("S-fraction level {j}") });
        }
        t = x + s_coefficient(rates, j) / t;
    }
    if t.norm() == 0.0 || !t.is_finite() {
        return Err(Error::Pole { location: "S-fraction level 0".into() });
    }
    Ok(1.0 / t)
}

/// Gauss discretization: the zeros of `P_n` with Christoffel weights
/// `1 / sum_{j<n} P_j(x_k)^2`.
///
/// These weights equal the residues `Q_n(x_k)/P_n'(x_k)` but stay positive
/// and relatively accurate for weights far below the largest one.
pub fn gauss_measure(rates: &BirthDeathRates, n: usize) -> Result<DiscreteMeasure> {
    let jac = jacobi_from_rates(rates, n)?;
    let nodes = tridiag_eigen(&jac.a, &jac.b[..n - 1])?;
    let mut pairs = Vec::with_capacity(n);
    for &t in &nodes {
        let (p, _) = eval_pq(rates, n, C64::new(t, 0.0), false)?;
        let logs: Vec<f64> = (0..n).map(|j| 2.0 * p.ln_abs(j)).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = CompensatedSum::new();
        logs.iter().for_each(|l| acc.add((l - top).exp()));
        pairs.push((t, (-top).exp() / acc.value()));
    }
    let mut m = DiscreteMeasure::from_pairs(pairs, false)?;
    m.normalized = (m.total_mass() - 1.0).abs() <= NORMALIZATION_TOL;
    Ok(m)
}

/// Residues `Q_n(x_k)/P_n'(x_k)` of the `n`-th convergent at the given nodes.
pub fn gauss_residues(rates: &BirthDeathRates, n: usize, nodes: &[f64]) -> Result<Vec<f64>> {
    nodes
        .iter()
        .map(|&t| {
            let (p, q) = eval_pq(rates, n, C64::new(t, 0.0), true)?;
            let dp = p.derivs.as_ref().expect("derivatives requested")[n];
            Ok((q.values[n] / dp * (q.scaling_log[n] - p.scaling_log[n]).exp()).re)
        })
        .collect()
}

fn sum_small_first(mut terms: Vec<C64>) -> C64 {
    terms.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let mut acc = ComplexSum::new();
    terms.into_iter().for_each(|t| acc.add(t));
    acc.value()
}

/// `∫ dψ(t)/(z - t)`.
pub fn measure_stieltjes(m: &DiscreteMeasure, z: C64) -> Result<C64> {
    let mut terms = Vec::with_capacity(m.len());
    for (&t, &w) in m.support.iter().zip(&m.mass) {
        let d = z - t;
        if d.norm() == 0.0 {
            return Err(Error::Pole { location: format!("support point {t}") });
        }
        terms.push(w / d);
    }
    Ok(sum_small_first(terms))
}

/// `∫ x dψ(t)/(x² + t)`, the S-fraction variable convention.
pub fn measure_s_transform(m: &DiscreteMeasure, x: C64) -> Result<C64> {
    Ok(-x * measure_stieltjes(m, -x * x)?)
}

/// `∫ t^order dψ(t)`.
pub fn measure_moment(m: &DiscreteMeasure, order: u32) -> f64 {
    let mut terms: Vec<f64> = m.support.iter().zip(&m.mass).map(|(t, w)| w * t.powi(order as i32)).collect();
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut acc = CompensatedSum::new();
    terms.into_iter().for_each(|t| acc.add(t));
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dn() -> BirthDeathRates {
        BirthDeathRates::stieltjes_dn(0.5).unwrap()
    }

    #[test]
    fn j_fraction_depth_one() {
        let jac = jacobi_from_rates(&dn(), 4).unwrap();
        let z = C64::new(0.3, 2.0);
        let v = j_fraction(&jac, 1, z).unwrap();
        assert!((v - 1.0 / (z - jac.a[0])).norm() < 1e-16);
        assert!(j_fraction(&jac, 0, z).is_err() && j_fraction(&jac, 5, z).is_err());
    }

    #[test]
    fn j_fraction_matches_recurrence_ratio() {
        let rates = dn();
        let jac = jacobi_from_rates(&rates, 40).unwrap();
        let z = C64::new(0.0, 1.0);
        let (p, q) = eval_pq(&rates, 40, z, false).unwrap();
        let r = q.ratio(40, &p, 40);
        let v = j_fraction(&jac, 40, z).unwrap();
        assert!((v - r).norm() < 1e-12 * r.norm());
    }

    #[test]
    fn j_fraction_leading_moment() {
        let jac = jacobi_from_rates(&dn(), 10).unwrap();
        let z = C64::new(1e8, 0.0);
        let v = j_fraction(&jac, 10, z).unwrap();
        assert!((v * z - 1.0).norm() < 1e-7);
    }

    #[test]
    fn j_fraction_pole() {
        let unit = BirthDeathRates::custom("u", |_| 1.0, |n| if n == 0 { 0.0 } else { 1.0 });
        let jac = jacobi_from_rates(&unit, 3).unwrap();
        assert!(matches!(j_fraction(&jac, 1, C64::new(1.0, 0.0)), Err(Error::Pole { .. })));
    }

    #[test]
    fn s_fraction_first_levels() {
        let rates = dn();
        let x = C64::new(1.3, 0.4);
        assert!((s_fraction(&rates, 0, x).unwrap() - 1.0 / x).norm() < 1e-16);
        let v = s_fraction(&rates, 1, x).unwrap();
        assert!((v - x / (x * x + rates.lambda(0))).norm() < 1e-15);
        assert!(s_fraction(&rates.shifted(1), 3, x).is_err());
    }

    #[test]
    fn s_fraction_self_convergence() {
        let x = C64::new(1.0, 0.0);
        let a = s_fraction(&dn(), 200, x).unwrap();
        let b = s_fraction(&dn(), 400, x).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn s_and_j_fractions_are_related_by_contraction() {
        for rates in [dn(), BirthDeathRates::generalized_c(0.3, 0.75).unwrap()] {
            for x in [C64::new(1.0, 0.0), C64::new(0.7, 0.9), C64::new(2.0, -0.3)] {
                for n in [1, 2, 5, 17] {
                    let jac = jacobi_from_rates(&rates, n).unwrap();
                    let j = j_fraction(&jac, n, -x * x).unwrap();
                    let s = s_fraction(&rates, 2 * n - 1, x).unwrap();
                    assert!((s + x * j).norm() < 1e-10 * s.norm(), "n={n} x={x}");
                }
            }
        }
    }

    #[test]
    fn gauss_measure_examples() {
        let rates = dn();
        let g1 = gauss_measure(&rates, 1).unwrap();
        assert_eq!(g1.support, vec![0.5]);
        assert!((g1.mass[0] - 1.0).abs() < 1e-15);
        let g = gauss_measure(&rates, 12).unwrap();
        assert!(g.normalized && g.mass.iter().all(|&m| m > 0.0));
        assert!((g.total_mass() - 1.0).abs() < 1e-10);
        assert!((measure_moment(&g, 1) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn christoffel_weights_equal_residues() {
        let rates = dn();
        let g = gauss_measure(&rates, 8).unwrap();
        let r = gauss_residues(&rates, 8, &g.support).unwrap();
        for (w, r) in g.mass.iter().zip(&r) {
            assert!((w - r).abs() < 1e-13, "{w} vs {r}");
        }
    }

    #[test]
    fn gauss_stieltjes_equals_j_fraction() {
        let rates = dn();
        let n = 15;
        let g = gauss_measure(&rates, n).unwrap();
        let jac = jacobi_from_rates(&rates, n).unwrap();
        for z in [C64::new(0.0, 1.0), C64::new(-3.0, 0.5), C64::new(40.0, 20.0)] {
            let a = measure_stieltjes(&g, z).unwrap();
            let b = j_fraction(&jac, n, z).unwrap();
            assert!((a - b).norm() < 1e-10 * b.norm(), "{z}");
        }
    }

    #[test]
    fn stieltjes_small_measures() {
        let one = DiscreteMeasure::new(vec![0.0], vec![1.0], true).unwrap();
        let z = C64::new(0.4, -1.2);
        assert!((measure_stieltjes(&one, z).unwrap() - 1.0 / z).norm() < 1e-16);
        assert!(measure_stieltjes(&one, C64::new(0.0, 0.0)).is_err());
        let two = DiscreteMeasure::new(vec![-1.0, 1.0], vec![0.5, 0.5], true).unwrap();
        let v = measure_stieltjes(&two, C64::new(0.0, 2.0)).unwrap();
        assert!((v - C64::new(0.0, -0.4)).norm() < 1e-16);
        assert_eq!(measure_moment(&two, 0), 1.0);
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![1.0, 0.0], vec![0.5, 0.5], true).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, -0.5], false).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6], true).is_err());
        let m = DiscreteMeasure::new(vec![0.0, 1.0], vec![1.0, 3.0], false).unwrap().normalize().unwrap();
        assert!(m.normalized && (m.mass[1] - 0.75).abs() < 1e-16);
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let m = DiscreteMeasure::new(vec![0.0, 1.0 / 3.0, 2f64.sqrt() * 1e10], vec![0.1, 0.2, 0.7], true)
            .unwrap()
            .with_meta("source", Value::String("test".into()));
        let j = m.to_json();
        assert!(j.starts_with("{\"support\":[0.0000000000000000e0,3.3333333333333331e-1,"));
        let back = DiscreteMeasure::from_json(&j).unwrap();
        assert_eq!(back, m);
        let c = m.to_csv();
        assert!(c.starts_with("support,mass\n"));
        let back = DiscreteMeasure::from_csv(&c).unwrap();
        assert_eq!(back.support, m.support);
        assert_eq!(back.mass, m.mass);
        assert!(back.normalized);
        assert!(DiscreteMeasure::from_csv("a,b\n1,2\n").is_err());
    }
}
