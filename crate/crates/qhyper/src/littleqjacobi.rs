//! Little q-Jacobi polynomials on the grid `q^k`: values, weights, norms,
//! lowering/raising shifts, the monic recurrence and the moment-problem test
//! for the associated birth-and-death type recurrence.
//!
//! Values on the grid are computed in double-double arithmetic: the expansion
//! in powers of `x` alternates with coefficients of size `q^{-n(n-1)/2}`, so at
//! `x` near 1 plain `f64` loses every digit already for `n` around 10.

use nalgebra::DMatrix;
use twofloat::TwoFloat;

use crate::dd::dd_div;

use crate::error::{QError, Result};
use crate::qcore::{c, qpoch_finite, qpoch_inf_all, Base, ToleranceConfig, TruncatedValue, C64};
use crate::series::{eval_rphis, sum_direct, Param, SeriesSpec};

/// Parameters `(alpha, beta)` with `0 < alpha < 1/q`, `beta < 1/q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqjParams {
    pub alpha: f64,
    pub beta: f64,
    pub q: Base,
}

impl LqjParams {
    pub fn new(alpha: f64, beta: f64, q: f64) -> Result<Self> {
        let q = Base::new(q)?;
        let qi = 1.0 / q.value();
        if !(alpha > 0.0 && alpha < qi) {
            return Err(QError::Domain(format!("alpha = {alpha} must lie in (0, 1/q)")));
        }
        if !(beta < qi) {
            return Err(QError::Domain(format!("beta = {beta} must be < 1/q")));
        }
        Ok(LqjParams { alpha, beta, q })
    }

    /// `(alpha q, beta q)`, the parameters after one lowering step.
    pub fn shifted(&self) -> Self {
        let qv = self.q.value();
        LqjParams { alpha: self.alpha * qv, beta: self.beta * qv, q: self.q }
    }

    fn qv(&self) -> f64 {
        self.q.value()
    }
}

/// Dense polynomial, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<C64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|v| v.norm() == 0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: C64) -> C64 {
        self.coeffs.iter().rev().fold(c(0.0), |acc, &k| acc * x + k)
    }

    /// `D~_q r(x) = (r(qx) - r(x)) / x`.
    pub fn dq_tilde(&self, q: Base) -> Polynomial {
        Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(j, &k)| k * (q.powi(j as i64) - 1.0)).collect())
    }
}

fn tf(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

/// `p_n(x)` for real `x` in double-double arithmetic.
fn poly_value_dd(n: u32, x: f64, p: &LqjParams) -> TwoFloat {
    let q = tf(p.qv());
    let one = tf(1.0);
    let ab = tf(p.alpha) * tf(p.beta);
    let aq = tf(p.alpha) * q;
    let qx = q * tf(x);
    let q_neg_n = dd_div(one, q.powi(n as i32));
    let ab_top = ab * q.powi(n as i32 + 1);
    let mut qj = one;
    let mut term = one;
    let mut sum = one;
    for _ in 0..n {
        let num = (one - q_neg_n * qj) * (one - ab_top * qj);
        let den = (one - q * qj) * (one - aq * qj);
        term = dd_div(term * num, den) * qx;
        sum += term;
        qj *= q;
    }
    sum
}

/// `p_n(x; alpha, beta; q) = 2phi1(q^{-n}, alpha beta q^{n+1}; alpha q; q, qx)`.
pub fn lqj_poly(n: u32, x: C64, p: &LqjParams) -> Result<C64> {
    if x.im == 0.0 {
        return Ok(c(f64::from(poly_value_dd(n, x.re, p))));
    }
    let qv = p.qv();
    let spec = SeriesSpec::new(
        vec![Param::TerminatingPower(n), Param::real(p.alpha * p.beta * qv.powi(n as i32 + 1))],
        vec![Param::real(p.alpha * qv)],
        p.q,
        x * qv,
    );
    eval_rphis(&spec, &ToleranceConfig::default()).map(|v| v.value).map_err(|e| match e {
        QError::Pole { .. } => QError::Degenerate("alpha q lies on the lattice q^{-N}".into()),
        other => other,
    })
}

/// Coefficients of `p_n` in powers of `x`.
pub fn lqj_polynomial(n: u32, p: &LqjParams) -> Polynomial {
    let qv = p.qv();
    let q_neg_n = qv.powi(-(n as i32));
    let ab_top = p.alpha * p.beta * qv.powi(n as i32 + 1);
    let mut coeffs = Vec::with_capacity(n as usize + 1);
    let mut t = 1.0;
    let mut qj = 1.0;
    for _ in 0..=n {
        coeffs.push(c(t));
        t *= (1.0 - q_neg_n * qj) * (1.0 - ab_top * qj) / ((1.0 - qv * qj) * (1.0 - p.alpha * qv * qj)) * qv;
        qj *= qv;
    }
    Polynomial::new(coeffs)
}

/// Leading coefficient `(-1)^n q^{-n(n-1)/2} (alpha beta q^{n+1}; q)_n / (alpha q; q)_n`.
pub fn leading_coefficient(n: u32, p: &LqjParams) -> Result<f64> {
    let qv = p.qv();
    let ni = n as i64;
    let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
    let num = qpoch_finite(c(p.alpha * p.beta * qv.powi(n as i32 + 1)), p.q, ni)?;
    let den = qpoch_finite(c(p.alpha * qv), p.q, ni)?;
    Ok(sign * qv.powf(-((ni * (ni - 1)) as f64) / 2.0) * (num / den).re)
}

/// Monic polynomial `p_n / lc(p_n)` evaluated at real `x`.
pub fn monic_value(n: u32, x: f64, p: &LqjParams) -> Result<f64> {
    let lc = leading_coefficient(n, p)?;
    Ok(f64::from(dd_div(poly_value_dd(n, x, p), tf(lc))))
}

/// Weight `(alpha q)^k (beta q; q)_k / (q; q)_k` at the grid point `q^k`.
pub fn weight(k: u32, p: &LqjParams) -> f64 {
    let qv = p.qv();
    let mut w = 1.0;
    for j in 1..=k as i32 {
        w *= p.alpha * qv * (1.0 - p.beta * qv.powi(j)) / (1.0 - qv.powi(j));
    }
    w
}

/// `<f, g> = sum_k f(q^k) conj(g(q^k)) w_k`.
pub fn inner_product<F, G>(f: F, g: G, p: &LqjParams, tol: &ToleranceConfig) -> Result<TruncatedValue>
where
    F: Fn(C64) -> C64,
    G: Fn(C64) -> C64,
{
    let qv = p.qv();
    let mut w = 1.0;
    sum_direct(
        |k| {
            if k > 0 {
                let qk = qv.powi(k as i32);
                w *= p.alpha * qv * (1.0 - p.beta * qk) / (1.0 - qk);
            }
            let x = c(qv.powi(k as i32));
            Ok(f(x) * g(x).conj() * w)
        },
        p.alpha * qv,
        tol,
        qv,
    )
}

/// Squared norm `h_n` of `p_n`.
pub fn norm_h(n: u32, p: &LqjParams) -> Result<f64> {
    let q = p.q;
    let qv = q.value();
    let ni = n as i64;
    let ab = p.alpha * p.beta;
    let last = 1.0 - ab * qv.powi(2 * n as i32 + 1);
    if last == 0.0 {
        return Err(QError::Degenerate("1 - alpha beta q^{2n+1} vanishes".into()));
    }
    let num = qpoch_finite(c(qv), q, ni)? * qpoch_finite(c(p.beta * qv), q, ni)?;
    let den = qpoch_finite(c(p.alpha * qv), q, ni)? * qpoch_finite(c(ab * qv), q, ni)?;
    let tail = qpoch_inf_all(&[c(ab * qv * qv)], q)? / qpoch_inf_all(&[c(p.alpha * qv)], q)?;
    Ok(((p.alpha * qv).powi(n as i32) * num / den * (1.0 - ab * qv) / last * tail).re)
}

/// Gram matrix `<p_n, p_m>`, `0 <= n, m <= nmax`, accumulated in double-double.
pub fn gram_matrix(nmax: u32, p: &LqjParams, tol: &ToleranceConfig) -> Result<DMatrix<f64>> {
    let dim = nmax as usize + 1;
    let qv = p.qv();
    let mut acc = vec![tf(0.0); dim * dim];
    let mut w = tf(1.0);
    let ratio_bound = 1.0 / (1.0 - p.alpha * qv);
    for k in 0..tol.max_terms {
        let qk = qv.powi(k as i32);
        if k > 0 {
            w = dd_div(w * tf(p.alpha) * tf(qv) * (tf(1.0) - tf(p.beta) * tf(qv).powi(k as i32)), tf(1.0) - tf(qv).powi(k as i32));
        }
        let vals: Vec<TwoFloat> = (0..=nmax).map(|n| poly_value_dd(n, qk, p)).collect();
        for i in 0..dim {
            for j in i..dim {
                acc[i * dim + j] += w * vals[i] * vals[j];
            }
        }
        let peak = vals.iter().map(|v| f64::from(*v).abs()).fold(1.0, f64::max);
        let bound = f64::from(w).abs() * peak * peak * ratio_bound;
        let smallest = (0..dim).map(|i| f64::from(acc[i * dim + i]).abs()).fold(f64::INFINITY, f64::min);
        if k > 2 * dim && bound < 1e-18 * smallest {
            let mut g = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in i..dim {
                    let v = f64::from(acc[i * dim + j]);
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            return Ok(g);
        }
    }
    Err(QError::NonConvergence { terms: tol.max_terms })
}

/// `D~_q p_n(x)`, computed from the coefficients so that `x = 0` is allowed.
pub fn shift_lower(n: u32, x: C64, p: &LqjParams) -> C64 {
    lqj_polynomial(n, p).dq_tilde(p.q).eval(x)
}

/// Closed form `-q (1 - q^{-n})(1 - alpha beta q^{n+1}) / (1 - alpha q) p_{n-1}(x; alpha q, beta q)`.
pub fn shift_lower_closed(n: u32, x: C64, p: &LqjParams) -> Result<C64> {
    if n == 0 {
        return Ok(c(0.0));
    }
    let qv = p.qv();
    let factor = -qv * (1.0 - qv.powi(-(n as i32))) * (1.0 - p.alpha * p.beta * qv.powi(n as i32 + 1)) / (1.0 - p.alpha * qv);
    Ok(lqj_poly(n - 1, x, &p.shifted())? * factor)
}

/// Raising operator
/// `S r(x) = (1/(alpha q)) (1 - x)/(1 - beta q) r(x/q) - (1 - beta q x)/(1 - beta q) r(x)`.
pub fn shift_raise(r: &Polynomial, x: C64, p: &LqjParams) -> Result<C64> {
    let qv = p.qv();
    let bq = 1.0 - p.beta * qv;
    if bq == 0.0 {
        return Err(QError::Degenerate("beta q = 1".into()));
    }
    Ok((c(1.0) - x) / (p.alpha * qv * bq) * r.eval(x / qv) - (c(1.0) - x * p.beta * qv) / bq * r.eval(x))
}

/// Coefficients of `S r`.
pub fn shift_raise_poly(r: &Polynomial, p: &LqjParams) -> Result<Polynomial> {
    let qv = p.qv();
    let bq = 1.0 - p.beta * qv;
    if bq == 0.0 {
        return Err(QError::Degenerate("beta q = 1".into()));
    }
    let deg = r.coeffs.len();
    let mut out = vec![c(0.0); deg + 1];
    for (j, &k) in r.coeffs.iter().enumerate() {
        let scaled = k * qv.powi(-(j as i32)) / (p.alpha * qv * bq);
        out[j] += scaled - k / bq;
        out[j + 1] += -scaled + k * p.beta * qv / bq;
    }
    Ok(Polynomial::new(out))
}

/// The second order operator with the `p_n` as eigenfunctions,
/// `alpha (1 - beta q x)(f(qx) - f(x))/x + (1 - x)(f(x/q) - f(x))/x`.
pub fn apply_operator<F: Fn(C64) -> C64>(f: F, x: C64, p: &LqjParams) -> Result<C64> {
    if x.norm() == 0.0 {
        return Err(QError::Domain("operator undefined at x = 0".into()));
    }
    let qv = p.qv();
    let fx = f(x);
    Ok(p.alpha * (c(1.0) - x * p.beta * qv) * (f(x * qv) - fx) / x + (c(1.0) - x) * (f(x / qv) - fx) / x)
}

/// Eigenvalue `(1 - alpha beta q^{n+1})(1 - q^{-n})` of `p_n`.
pub fn eigenvalue(n: u32, p: &LqjParams) -> f64 {
    let qv = p.qv();
    (1.0 - p.alpha * p.beta * qv.powi(n as i32 + 1)) * (1.0 - qv.powi(-(n as i32)))
}

/// Subleading coefficient ratio `r_n` of the monic polynomial.
pub fn monic_subleading(n: u32, p: &LqjParams) -> f64 {
    let qv = p.qv();
    let qn = qv.powi(n as i32);
    -(1.0 - qn) * (1.0 - p.alpha * qn) / ((1.0 - qv) * (1.0 - p.alpha * p.beta * qn * qn))
}

/// Coefficients `(b_n, c_n)` of `x p~_n = p~_{n+1} + b_n p~_n + c_n p~_{n-1}`.
pub fn monic_recurrence(n: u32, p: &LqjParams) -> Result<(f64, f64)> {
    let qv = p.qv();
    let (a, b) = (p.alpha, p.beta);
    let qn = qv.powi(n as i32);
    let ab = a * b;
    let d = |e: i32| 1.0 - ab * qv.powi(e);
    let n2 = 2 * n as i32;
    if [d(n2 - 1), d(n2), d(n2 + 2), d(n2 + 1)].contains(&0.0) {
        return Err(QError::Degenerate("a factor 1 - alpha beta q^m vanishes".into()));
    }
    let bn = qn * ((1.0 + a) - a * (1.0 + b) * (1.0 + qv) * qn + ab * qv * (1.0 + a) * qn * qn) / (d(n2) * d(n2 + 2));
    let cn = a * qv.powi(n2 - 1) * (1.0 - qn) * (1.0 - a * qn) * (1.0 - b * qn) * (1.0 - ab * qn) / (d(n2 - 1) * d(n2) * d(n2) * d(n2 + 1));
    Ok((bn, cn))
}

/// Outcome of the moment-problem test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Determinacy {
    Determinate,
    Indeterminate,
}

/// Determinacy of the monic family
/// `x v_n = v_{n+1} + A q^{-n} v_n + (1 - q^{-n})(C - B q^{-n}) v_{n-1}`.
///
/// Indeterminate iff `A^2 > 4B` and `q >= |beta^2 B|`, where
/// `1 - A t + B t^2 = (1 - t/alpha)(1 - t/beta)` with `|alpha| >= |beta|`.
pub fn asc_determinacy(a: f64, b: f64, cc: f64, q: Base) -> Result<Determinacy> {
    if !(b >= 0.0 && b > cc) {
        return Err(QError::Domain(format!("need B >= 0 and B > C, got B = {b}, C = {cc}")));
    }
    let disc = a * a - 4.0 * b;
    if !(disc > 0.0) {
        return Ok(Determinacy::Determinate);
    }
    // 1/alpha and 1/beta are the roots of s^2 - A s + B; 1/beta is the larger one
    let s_big = (a + a.signum() * disc.sqrt()) / 2.0;
    let beta_sq_b = b / (s_big * s_big);
    Ok(if q.value() >= beta_sq_b.abs() { Determinacy::Indeterminate } else { Determinacy::Determinate })
}

/// Triple `(A, B, C) = (c/(q sqrt(ab)) + 1/sqrt(ab), c/(abq), 1)` attached to the
/// q-difference equation on the grid with `ab > 0`.
pub fn bhde_triple(a: f64, b: f64, cc: f64, q: Base) -> Result<(f64, f64, f64)> {
    let ab = a * b;
    if !(ab > 0.0) {
        return Err(QError::Domain(format!("need ab > 0, got {ab}")));
    }
    let qv = q.value();
    let r = ab.sqrt();
    Ok((cc / (qv * r) + 1.0 / r, cc / (ab * qv), 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> LqjParams {
        LqjParams::new(0.6, 0.3, 0.5).unwrap()
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn parameter_ranges() {
        assert!(LqjParams::new(0.0, 0.3, 0.5).is_err());
        assert!(LqjParams::new(2.0, 0.3, 0.5).is_err());
        assert!(LqjParams::new(0.6, 2.5, 0.5).is_err());
        assert!(LqjParams::new(1.5, -3.0, 0.5).is_ok());
    }

    #[test]
    fn polynomial_values() {
        let p = params();
        for n in 0..=10 {
            assert_eq!(lqj_poly(n, c(0.0), &p).unwrap(), c(1.0));
        }
        assert_eq!(lqj_poly(0, c(0.7), &p).unwrap(), c(1.0));
        // high precision values of p_10 on the grid
        let frozen = [
            (0, 2.396_831_197_800_810_6e-19),
            (1, -4.804_942_014_295_178e-16),
            (3, -1.946_567_295_417_336e-10),
            (7, -0.005_363_522_824_088_546),
        ];
        for (k, v) in frozen {
            let got = lqj_poly(10, c(0.5f64.powi(k)), &p).unwrap().re;
            assert!((got - v).abs() < 1e-15 * (1.0 + v.abs()), "k = {k}: {got}");
        }
        // complex arguments use the plain series
        let z = C64::new(0.3, 0.2);
        let direct = lqj_polynomial(4, &p).eval(z);
        assert!((lqj_poly(4, z, &p).unwrap() - direct).norm() < 1e-13);
    }

    #[test]
    fn leading_coefficient_matches_expansion() {
        let p = params();
        let poly = lqj_polynomial(3, &p);
        let lc = leading_coefficient(3, &p).unwrap();
        assert!((poly.coeffs()[3].re - lc).abs() < 1e-12 * lc.abs());
    }

    #[test]
    fn weight_examples() {
        let p = params();
        assert_eq!(weight(0, &p), 1.0);
        assert!((weight(1, &p) - 0.51).abs() < 1e-15);
        let (a, b, q) = (0.6, 0.3, 0.5f64);
        for k in 1..=10u32 {
            let ratio = weight(k, &p) / weight(k - 1, &p);
            let qk = q.powi(k as i32);
            assert!((ratio - a * q * (1.0 - b * qk) / (1.0 - qk)).abs() < 1e-14);
        }
    }

    #[test]
    fn inner_product_examples() {
        let p = params();
        let one = inner_product(|_| c(1.0), |_| c(1.0), &p, &tol()).unwrap();
        let closed = qpoch_inf_all(&[c(0.6 * 0.3 * 0.25)], p.q).unwrap() / qpoch_inf_all(&[c(0.3)], p.q).unwrap();
        assert!((one.value - closed).norm() < 1e-12);
        let p1 = |x| lqj_poly(1, x, &p).unwrap();
        let cross = inner_product(p1, |_| c(1.0), &p, &tol()).unwrap();
        assert!(cross.value.norm() <= cross.tail_bound + 1e-15);
        // <x, 1> = sum (alpha q^2)^k (beta q; q)_k / (q; q)_k
        let x1 = inner_product(|x| x, |_| c(1.0), &p, &tol()).unwrap();
        let closed = qpoch_inf_all(&[c(0.6 * 0.3 * 0.125)], p.q).unwrap() / qpoch_inf_all(&[c(0.15)], p.q).unwrap();
        assert!((x1.value - closed).norm() < 1e-12);
    }

    #[test]
    fn norms() {
        let p = params();
        let h0 = norm_h(0, &p).unwrap();
        let closed = (qpoch_inf_all(&[c(0.6 * 0.3 * 0.25)], p.q).unwrap() / qpoch_inf_all(&[c(0.3)], p.q).unwrap()).re;
        assert!((h0 - closed).abs() < 1e-14);
        let p1 = |x| lqj_poly(1, x, &p).unwrap();
        let h1 = inner_product(p1, p1, &p, &tol()).unwrap().value.re;
        assert!((h1 - norm_h(1, &p).unwrap()).abs() < 1e-10);
        for n in 1..=6 {
            let (_, cn) = monic_recurrence(n, &p).unwrap();
            let ratio = norm_h(n, &p).unwrap() / norm_h(n - 1, &p).unwrap();
            let lc = leading_coefficient(n, &p).unwrap() / leading_coefficient(n - 1, &p).unwrap();
            assert!((cn - ratio / (lc * lc)).abs() < 1e-12 * cn, "n = {n}");
        }
    }

    #[test]
    fn gram_is_diagonal() {
        let p = params();
        let g = gram_matrix(10, &p, &tol()).unwrap();
        for n in 0..=10usize {
            let hn = norm_h(n as u32, &p).unwrap();
            assert!((g[(n, n)] - hn).abs() < 1e-10 * hn, "diag {n}");
            for m in 0..n {
                let hm = norm_h(m as u32, &p).unwrap();
                assert!(g[(n, m)].abs() < 1e-10 * (hn * hm).sqrt(), "({n}, {m}) = {}", g[(n, m)]);
            }
        }
    }

    #[test]
    fn squared_norm_via_shifts() {
        // h_n = lc_n (q; q)_n alpha^n q^{n(n+1)/2} (beta q; q)_n / (alpha q; q)_n <1, 1> at shifted parameters
        let p = params();
        let q = p.q;
        for n in 0..=5u32 {
            let ni = n as i64;
            let shifted = LqjParams { alpha: p.alpha * q.powi(ni), beta: p.beta * q.powi(ni), q };
            let one = norm_h(0, &shifted).unwrap();
            let pref = (qpoch_finite(c(0.5), q, ni).unwrap() * qpoch_finite(c(p.beta * 0.5), q, ni).unwrap()
                / qpoch_finite(c(p.alpha * 0.5), q, ni).unwrap())
            .re;
            let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
            let via =
                leading_coefficient(n, &p).unwrap() * sign * pref * p.alpha.powi(n as i32) * 0.5f64.powf((n * (n + 1)) as f64 / 2.0) * one;
            let h = norm_h(n, &p).unwrap();
            assert!((via - h).abs() < 1e-12 * h, "n = {n}");
        }
    }

    #[test]
    fn eigenfunctions() {
        let p = params();
        for n in 0..=6u32 {
            let f = |x| lqj_poly(n, x, &p).unwrap();
            for x in [0.3, 0.77, 0.05] {
                let x = c(x);
                let lhs = apply_operator(f, x, &p).unwrap();
                let rhs = eigenvalue(n, &p) * f(x);
                assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()), "n = {n}");
            }
        }
    }

    #[test]
    fn shifts() {
        let p = params();
        assert_eq!(shift_lower(0, c(0.4), &p), c(0.0));
        for n in 1..=5u32 {
            for x in [0.0, 0.25, 0.9, -0.4] {
                let x = c(x);
                assert!((shift_lower(n, x, &p) - shift_lower_closed(n, x, &p).unwrap()).norm() < 1e-11);
                let r = lqj_polynomial(n - 1, &p.shifted());
                let lhs = shift_raise(&r, x, &p).unwrap();
                let qv = 0.5;
                let rhs = lqj_poly(n, x, &p).unwrap() * ((1.0 - p.alpha * qv) / (p.alpha * qv * (1.0 - p.beta * qv)));
                assert!((lhs - rhs).norm() < 1e-11, "n = {n}");
                assert!((shift_raise_poly(&r, &p).unwrap().eval(x) - lhs).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn monic_recurrence_coefficients() {
        let p = params();
        for n in 1..=20 {
            assert!(monic_recurrence(n, &p).unwrap().1 > 0.0);
        }
        for n in 1..=8 {
            let (bn, _) = monic_recurrence(n, &p).unwrap();
            assert!((bn - (monic_subleading(n, &p) - monic_subleading(n + 1, &p))).abs() < 1e-13);
        }
        for n in 1..=8u32 {
            let (bn, cn) = monic_recurrence(n, &p).unwrap();
            for j in 0..20 {
                let x = 0.05 * j as f64 - 0.2;
                let m = |k| monic_value(k, x, &p).unwrap();
                let r = x * m(n) - m(n + 1) - bn * m(n) - cn * m(n - 1);
                assert!(r.abs() < 1e-10, "n = {n}, x = {x}: {r}");
            }
        }
    }

    #[test]
    fn determinacy_examples() {
        let q = Base::new(0.5).unwrap();
        assert_eq!(asc_determinacy(0.0, 1.0, 0.0, q).unwrap(), Determinacy::Determinate);
        assert!(asc_determinacy(1.0, 1.0, 2.0, q).is_err());
        let (a, b, cc) = bhde_triple(0.2, 0.2, 0.1, q).unwrap();
        assert_eq!(asc_determinacy(a, b, cc, q).unwrap(), Determinacy::Indeterminate);
        let (a, b, cc) = bhde_triple(0.2, 0.2, 0.4, q).unwrap();
        assert_eq!(asc_determinacy(a, b, cc, q).unwrap(), Determinacy::Determinate);
        // c = q makes A^2 = 4B
        let (a, b, cc) = bhde_triple(0.2, 0.2, 0.5, q).unwrap();
        assert_eq!(asc_determinacy(a, b, cc, q).unwrap(), Determinacy::Determinate);
    }

    #[test]
    fn eigen_recursion_reduces_to_monic_form() {
        // L u = lambda u on the grid, rescaled, against the monic three-term form
        let q = 0.5f64;
        let (a, b, cc) = (0.2, 0.3, 0.15);
        let ab = a * b;
        let lambda = 0.37;
        let kmax = 10;
        let mut u = vec![1.0, 0.0];
        u[1] = u[0] + lambda * u[0] / (cc / q - ab);
        for k in 1..kmax {
            let qk = q.powi(-(k as i32));
            let up = cc * qk / q - ab;
            let next = u[k] + (lambda * u[k] - (qk - 1.0) * (u[k - 1] - u[k])) / up;
            u.push(next);
        }
        let alpha = -ab.sqrt();
        let mu2 = (lambda - ab - 1.0) / alpha;
        let big_a = cc / (q * ab.sqrt()) + 1.0 / ab.sqrt();
        let mut v = vec![1.0, 0.0];
        v[1] = mu2 - big_a;
        for k in 1..kmax {
            let qk = q.powi(-(k as i32));
            let next = (mu2 - big_a * qk) * v[k] - (1.0 - qk) * (1.0 - cc * qk / ab) * v[k - 1];
            v.push(next);
        }
        let mut scale = 1.0;
        for k in 0..=kmax {
            let pk = u[k] * scale / alpha.powi(k as i32);
            assert!((pk - v[k]).abs() < 1e-12 * (1.0 + v[k].abs()), "k = {k}");
            scale *= cc * q.powi(-(k as i32) - 1) - ab;
        }
    }

    proptest! {
        #[test]
        fn adjointness(p0 in proptest::collection::vec(-1.0f64..1.0, 5), r0 in proptest::collection::vec(-1.0f64..1.0, 5)) {
            let p = params();
            let poly_p = Polynomial::new(p0.into_iter().map(c).collect());
            let poly_r = Polynomial::new(r0.into_iter().map(c).collect());
            let dp = poly_p.dq_tilde(p.q);
            let sr = shift_raise_poly(&poly_r, &p).unwrap();
            let lhs = inner_product(|x| dp.eval(x), |x| poly_r.eval(x), &p.shifted(), &tol()).unwrap().value;
            let rhs = inner_product(|x| poly_p.eval(x), |x| sr.eval(x), &p, &tol()).unwrap().value;
            prop_assert!((lhs - rhs).norm() < 1e-11);
        }
    }
}
