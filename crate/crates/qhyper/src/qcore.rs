//! q-shifted factorials, q-binomial coefficients, the theta function and the
//! small pieces of complex-power plumbing everything else builds on.
//!
//! Complex powers `q^a` and `z^mu` always use the principal branch of the
//! logarithm. Every other module inherits this convention.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{QError, Result};

pub type C64 = Complex64;

/// Machine epsilon used in rounding-error allowances.
pub(crate) const EPS: f64 = f64::EPSILON;

/// Below this modulus a factor `1 - a q^k` switches the infinite product to
/// log-domain accumulation.
const NEAR_ZERO_FACTOR: f64 = 1e-3;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A base `q` with `0 < q < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Base(f64);

impl Base {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Base(q))
        } else {
            Err(QError::InvalidBase(q))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn ln(self) -> f64 {
        self.0.ln()
    }

    /// `q^k` for integer `k`.
    pub fn powi(self, k: i64) -> f64 {
        self.0.powi(k as i32)
    }

    /// `q^a` on the principal branch.
    pub fn pow(self, a: C64) -> C64 {
        (a * self.ln()).exp()
    }
}

/// A value produced by truncating an infinite sum or product.
///
/// `tail_bound` bounds `|true value - value|` and includes a rounding
/// allowance for the accumulation itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedValue {
    pub value: C64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

impl TruncatedValue {
    pub fn exact(value: C64) -> Self {
        TruncatedValue { value, tail_bound: 0.0, terms_used: 0 }
    }

    /// Quotient; fails if the denominator's bound does not keep it away from zero.
    pub fn checked_div(self, other: TruncatedValue) -> Result<TruncatedValue> {
        let d = other.value.norm();
        if d == 0.0 || other.tail_bound >= d {
            return Err(QError::Pole { what: "denominator product".into(), index: 0 });
        }
        let value = self.value / other.value;
        let rel = other.tail_bound / (d - other.tail_bound);
        Ok(TruncatedValue {
            value,
            tail_bound: self.tail_bound / (d - other.tail_bound) + value.norm() * rel,
            terms_used: self.terms_used + other.terms_used,
        })
    }

    pub fn scale(self, s: C64) -> TruncatedValue {
        TruncatedValue { value: self.value * s, tail_bound: self.tail_bound * s.norm(), terms_used: self.terms_used }
    }
}

/// Product with the first-order-plus-cross error bound.
impl Mul for TruncatedValue {
    type Output = TruncatedValue;

    fn mul(self, other: TruncatedValue) -> TruncatedValue {
        TruncatedValue {
            value: self.value * other.value,
            tail_bound: self.value.norm() * other.tail_bound + other.value.norm() * self.tail_bound + self.tail_bound * other.tail_bound,
            terms_used: self.terms_used + other.terms_used,
        }
    }
}

impl Add for TruncatedValue {
    type Output = TruncatedValue;

    fn add(self, other: TruncatedValue) -> TruncatedValue {
        TruncatedValue {
            value: self.value + other.value,
            tail_bound: self.tail_bound + other.tail_bound,
            terms_used: self.terms_used + other.terms_used,
        }
    }
}

/// Stopping controls for infinite sums and products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig { abs_tol: 1e-14, max_terms: 10_000 }
    }
}

impl ToleranceConfig {
    pub fn new(abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(QError::Domain(format!("abs_tol must be positive, got {abs_tol}")));
        }
        if max_terms == 0 {
            return Err(QError::Domain("max_terms must be at least 1".into()));
        }
        Ok(ToleranceConfig { abs_tol, max_terms })
    }
}

/// Principal-branch complex power `z^mu`.
pub fn cpow(z: C64, mu: C64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        return if mu == C64::new(0.0, 0.0) { c(1.0) } else { c(0.0) };
    }
    (mu * z.ln()).exp()
}

/// `log_q(x)` on the principal branch.
pub fn log_q(x: C64, q: Base) -> C64 {
    x.ln() / q.ln()
}

/// If `x` lies within a relative log-window of a lattice point `q^k`, returns `k`.
pub fn lattice_index(x: C64, q: Base, window: f64) -> Option<i64> {
    if x.norm() == 0.0 || !x.norm().is_finite() {
        return None;
    }
    let t = x.norm().ln() / q.ln();
    let k = t.round();
    if (t - k).abs() < window && x.arg().abs() < window {
        Some(k as i64)
    } else {
        None
    }
}

/// Finite q-shifted factorial `(a;q)_n`, including negative `n`.
pub fn qpoch_finite(a: C64, q: Base, n: i64) -> Result<C64> {
    if n >= 0 {
        let mut p = c(1.0);
        let mut aqk = a;
        for _ in 0..n {
            p *= c(1.0) - aqk;
            aqk *= q.value();
        }
        return Ok(p);
    }
    let m = -n;
    let shifted = a * q.powi(n);
    let mut p = c(1.0);
    let mut aqk = shifted;
    for k in 0..m {
        let f = c(1.0) - aqk;
        if f.norm() == 0.0 {
            return Err(QError::Pole { what: format!("factor 1 - a q^{}", n + k), index: k });
        }
        p *= f;
        aqk *= q.value();
    }
    Ok(c(1.0) / p)
}

/// Infinite q-shifted factorial `(a;q)_inf` with a certified tail bound.
pub fn qpoch_infinite(a: C64, q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let qv = q.value();
    let abs_a = a.norm();
    if abs_a == 0.0 {
        return Ok(TruncatedValue::exact(c(1.0)));
    }
    let mut prod = c(1.0);
    let mut log_sum = c(0.0);
    let mut log_mode = false;
    let mut aqk = a;
    let mut r = abs_a;
    let mut n = 0usize;
    while !(r < tol.abs_tol * (1.0 - qv) && r < 0.5) {
        if n >= tol.max_terms {
            return Err(QError::NonConvergence { terms: n });
        }
        let f = c(1.0) - aqk;
        if f.norm() == 0.0 {
            return Ok(TruncatedValue { value: c(0.0), tail_bound: 0.0, terms_used: n + 1 });
        }
        if f.norm() < NEAR_ZERO_FACTOR {
            log_mode = true;
        }
        prod *= f;
        log_sum += f.ln();
        aqk *= qv;
        r *= qv;
        n += 1;
    }
    let value = if log_mode { log_sum.exp() } else { prod };
    let eps_log = r / ((1.0 - qv) * (1.0 - r));
    let tail_bound = value.norm() * (eps_log.exp_m1() + 4.0 * (n as f64 + 1.0) * EPS);
    Ok(TruncatedValue { value, tail_bound, terms_used: n })
}

/// Infinite product `prod_{k != skip} (1 - a q^k)`, used for residues where
/// factor `skip` vanishes.
pub fn qpoch_infinite_except(a: C64, q: Base, skip: usize, tol: &ToleranceConfig) -> Result<C64> {
    let head = qpoch_finite(a, q, skip as i64)?;
    let tail = qpoch_infinite(a * q.powi(skip as i64 + 1), q, tol)?;
    Ok(head * tail.value)
}

/// Length argument for [`qpoch_multi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Finite(i64),
    Infinite,
}

/// `(a_1, ..., a_m; q)_n` as a product of single factorials.
pub fn qpoch_multi(params: &[C64], q: Base, n: Order, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let mut acc = TruncatedValue::exact(c(1.0));
    for &a in params {
        let f = match n {
            Order::Finite(n) => TruncatedValue::exact(qpoch_finite(a, q, n)?),
            Order::Infinite => qpoch_infinite(a, q, tol)?,
        };
        acc = acc * f;
    }
    Ok(acc)
}

/// Shorthand: value of `(a_1, ..., a_m; q)_inf` with the default tolerance.
pub fn qpoch_inf_all(params: &[C64], q: Base) -> Result<C64> {
    Ok(qpoch_multi(params, q, Order::Infinite, &ToleranceConfig::default())?.value)
}

/// Integer q-binomial coefficient.
pub fn qbinom(n: i64, k: i64, q: Base) -> Result<f64> {
    if n < 0 || k < 0 || k > n {
        return Err(QError::Domain(format!("q-binomial needs 0 <= k <= n, got n={n}, k={k}")));
    }
    let qq = c(q.value());
    let num = qpoch_finite(qq, q, n)?;
    let den = qpoch_finite(qq, q, k)? * qpoch_finite(qq, q, n - k)?;
    Ok((num / den).re)
}

fn as_integer(z: C64) -> Option<i64> {
    if z.im == 0.0 && z.re.fract() == 0.0 && z.re.abs() < 1e9 {
        Some(z.re as i64)
    } else {
        None
    }
}

/// Generalized q-binomial coefficient via the infinite-product quotient.
/// Integer arguments go through [`qbinom`].
pub fn qbinom_general(alpha: C64, beta: C64, q: Base, tol: &ToleranceConfig) -> Result<C64> {
    if let (Some(n), Some(k)) = (as_integer(alpha), as_integer(beta)) {
        if n >= 0 {
            return Ok(if (0..=n).contains(&k) { c(qbinom(n, k, q)?) } else { c(0.0) });
        }
    }
    let one = c(1.0);
    let num = qpoch_multi(&[q.pow(beta + one), q.pow(alpha - beta + one)], q, Order::Infinite, tol)?;
    let den = qpoch_multi(&[c(q.value()), q.pow(alpha + one)], q, Order::Infinite, tol)?;
    if den.value.norm() <= den.tail_bound {
        return Err(QError::Pole { what: "(q, q^(alpha+1); q)_inf".into(), index: 0 });
    }
    Ok(num.value / den.value)
}

/// Theta function `(z, q/z; q)_inf`.
pub fn theta(z: C64, q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    if z.norm() == 0.0 {
        return Err(QError::Domain("theta is undefined at z = 0".into()));
    }
    Ok(qpoch_infinite(z, q, tol)? * qpoch_infinite(c(q.value()) / z, q, tol)?)
}

/// Theta value with the default tolerance.
pub fn theta_value(z: C64, q: Base) -> Result<C64> {
    Ok(theta(z, q, &ToleranceConfig::default())?.value)
}

/// The q-number `(1 - q^a)/(1 - q)`.
pub fn qnumber(a: C64, q: Base) -> C64 {
    (c(1.0) - q.pow(a)) / (1.0 - q.value())
}
