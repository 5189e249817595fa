//! Intertwining operators for the second order q-difference operator of the
//! little q-Jacobi functions: the fractional q-integral `W_nu`, its adjoint
//! `A_nu`, the parameter swap `S(a, b)` and the two-parameter composites.
//!
//! Functions live on `(0, inf)` and are passed as [`HalfLineFn`], which
//! carries a support interval so sums over `x q^{-l}` or `x q^l` can stop
//! exactly for compactly supported input.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use crate::error::{QError, Result};
use crate::qcore::{c, cpow, qpoch_finite, qpoch_inf_all, theta_value, Base, ToleranceConfig, TruncatedValue, C64, EPS};
use crate::series::{eval_rphis, phi21_auto, sum_direct, Param, SeriesSpec};

/// Relative slack when comparing grid points against support ends.
const SUPPORT_SLACK: f64 = 1e-12;

/// Validated real parameters `a, b, y > 0`, `ab < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqfParams {
    pub a: f64,
    pub b: f64,
    pub y: f64,
    pub q: Base,
}

impl LqfParams {
    pub fn new(a: f64, b: f64, y: f64, q: f64) -> Result<Self> {
        let q = Base::new(q)?;
        if !(a > 0.0 && b > 0.0 && y > 0.0) {
            return Err(QError::Domain(format!("need a, b, y > 0, got a={a}, b={b}, y={y}")));
        }
        if !(a * b < 1.0) {
            return Err(QError::Domain(format!("need ab < 1, got {}", a * b)));
        }
        Ok(LqfParams { a, b, y, q })
    }

    /// Grid point `y q^k`.
    pub fn point(&self, k: i64) -> f64 {
        self.y * self.q.powi(k)
    }
}

/// A function on `(0, inf)` that vanishes outside `[lo, hi]`.
pub struct HalfLineFn<'a> {
    f: Box<dyn Fn(f64) -> Result<C64> + 'a>,
    lo: f64,
    hi: f64,
}

impl<'a> HalfLineFn<'a> {
    /// No support restriction; sums rely on decay.
    pub fn new(f: impl Fn(f64) -> Result<C64> + 'a) -> Self {
        HalfLineFn { f: Box::new(f), lo: 0.0, hi: f64::INFINITY }
    }

    /// Vanishes outside `[lo, hi]`; `f` is not called there.
    pub fn supported(f: impl Fn(f64) -> Result<C64> + 'a, lo: f64, hi: f64) -> Self {
        HalfLineFn { f: Box::new(f), lo, hi }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, x: f64) -> Result<C64> {
        if x < self.lo * (1.0 - SUPPORT_SLACK) || x > self.hi * (1.0 + SUPPORT_SLACK) {
            Ok(c(0.0))
        } else {
            (self.f)(x)
        }
    }
}

/// Finitely supported values on the grid `y q^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactGridFn {
    pub anchor: f64,
    pub q: Base,
    values: BTreeMap<i64, C64>,
}

impl CompactGridFn {
    pub fn new(anchor: f64, q: Base, values: impl IntoIterator<Item = (i64, C64)>) -> Self {
        CompactGridFn { anchor, q, values: values.into_iter().collect() }
    }

    /// Value at `x`; zero off the grid and off the support.
    pub fn at(&self, x: f64) -> C64 {
        let t = (x / self.anchor).ln() / self.q.ln();
        let k = t.round();
        if (t - k).abs() > 1e-9 {
            return c(0.0);
        }
        self.values.get(&(k as i64)).copied().unwrap_or(c(0.0))
    }

    pub fn to_fn(&self) -> HalfLineFn<'_> {
        let (kmin, kmax) = match (self.values.keys().next(), self.values.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return HalfLineFn::supported(|_| Ok(c(0.0)), 1.0, 0.0),
        };
        let lo = self.anchor * self.q.powi(kmax);
        let hi = self.anchor * self.q.powi(kmin);
        HalfLineFn::supported(move |x| Ok(self.at(x)), lo, hi)
    }
}

fn finite_sum(terms: impl IntoIterator<Item = Result<C64>>) -> Result<TruncatedValue> {
    let mut sum = c(0.0);
    let mut abs = 0.0;
    let mut n = 0usize;
    for t in terms {
        let t = t?;
        sum += t;
        abs += t.norm();
        n += 1;
    }
    Ok(TruncatedValue { value: sum, tail_bound: 2.0 * EPS * n as f64 * abs, terms_used: n })
}

/// `L^{(a,b)} f(x) = a^2 (1 + 1/x)(f(qx) - f(x)) + (1 + aq/(bx))(f(x/q) - f(x))`.
pub fn l_operator(f: &HalfLineFn, x: f64, a: C64, b: C64, q: Base) -> Result<C64> {
    let qv = q.value();
    let fx = f.eval(x)?;
    Ok(a * a * (1.0 + 1.0 / x) * (f.eval(qv * x)? - fx) + (c(1.0) + a * qv / (b * x)) * (f.eval(x / qv)? - fx))
}

/// The normalised operator `L/(2a) + (a + 1/a)/2`, with eigenvalue `mu(sigma)` on `phi_lambda`.
pub fn lcal_operator(f: &HalfLineFn, x: f64, a: C64, b: C64, q: Base) -> Result<C64> {
    let qv = q.value();
    Ok(a * 0.5 * (1.0 + 1.0 / x) * f.eval(qv * x)? - (a / (2.0 * x) + qv / (b * 2.0 * x)) * f.eval(x)?
        + (c(1.0) + a * qv / (b * x)) / (a * 2.0) * f.eval(x / qv)?)
}

/// `lcal_operator` as a function, support widened by one grid step each way.
pub fn lcal_fn<'a>(f: &'a HalfLineFn<'a>, a: C64, b: C64, q: Base) -> HalfLineFn<'a> {
    let (lo, hi) = f.support();
    HalfLineFn::supported(move |x| lcal_operator(f, x, a, b, q), lo * q.value(), hi / q.value())
}

/// Little q-Jacobi function `2phi1(a sigma, a/sigma; ab; q, -bx/a)`.
pub fn phi_lambda(x: f64, sigma: C64, a: C64, b: C64, q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    if x == 0.0 {
        return Ok(TruncatedValue::exact(c(1.0)));
    }
    if crate::qcore::lattice_index(a * b, q, 1e-12).is_some_and(|m| m <= 0) {
        return Err(QError::Degenerate("ab lies in q^{-N}".into()));
    }
    phi21_auto(a * sigma, a / sigma, a * b, q, -b * x / a, tol)
}

/// Asymptotically free solution at `x`, normalised on the grid `y q^Z`:
/// `(a sigma)^{-k} 2phi1(a sigma, q sigma/b; q sigma^2; q, -q/x)` with `x = y q^k`.
/// Off-grid `x` uses the real exponent `k = log_q(x/y)` on the principal branch.
pub fn phi_sigma_at(x: f64, sigma: C64, a: C64, b: C64, y: f64, q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let qv = q.value();
    let s2q = sigma * sigma * qv;
    if crate::qcore::lattice_index(s2q, q, 1e-12).is_some_and(|m| m <= 0) {
        return Err(QError::Degenerate("q sigma^2 lies in q^{-N}".into()));
    }
    let k = (x / y).ln() / q.ln();
    let series = phi21_auto(a * sigma, sigma * qv / b, s2q, q, c(-qv / x), tol)?;
    Ok(series.scale(cpow(a * sigma, c(-k))))
}

/// `Phi_sigma(y q^k; a, b; q)`.
pub fn phi_sigma(k: i64, sigma: C64, p: &LqfParams, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    phi_sigma_at(p.point(k), sigma, c(p.a), c(p.b), p.y, p.q, tol)
}

/// c-function of the expansion `phi_lambda = c(sigma) Phi_sigma + c(1/sigma) Phi_{1/sigma}`.
pub fn cfun(sigma: C64, p: &LqfParams) -> Result<C64> {
    let (a, b, y, qv) = (p.a, p.b, p.y, p.q.value());
    let num = qpoch_inf_all(&[b / sigma, a / sigma, -sigma * (b * y), -(sigma * (b * y)).inv() * qv], p.q)?;
    let den = qpoch_inf_all(&[(sigma * sigma).inv(), c(a * b), c(-b * y / a), c(-qv * a / (b * y))], p.q)?;
    if den.norm() == 0.0 {
        return Err(QError::Pole { what: "c-function denominator".into(), index: 0 });
    }
    Ok(num / den)
}

/// `W_nu f(x) = x^nu sum_l f(x q^{-l}) q^{-l nu} (q^nu;q)_l/(q;q)_l`.
pub fn apply_wnu(f: &HalfLineFn, nu: C64, x: f64, q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let qv = q.value();
    let qnu = q.pow(nu);
    let qmnu = q.pow(-nu);
    let mut coef = c(1.0);
    let mut next = |l: usize| -> Result<C64> {
        if l > 0 {
            coef *= (c(1.0) - qnu * qv.powi(l as i32 - 1)) / (1.0 - qv.powi(l as i32)) * qmnu;
        }
        Ok(f.eval(x * qv.powi(-(l as i32)))? * coef)
    };
    let (_, hi) = f.support();
    let sum = if hi.is_finite() {
        let steps = ((hi / x).ln() / -q.ln()).floor().max(-1.0) as i64 + 1;
        finite_sum((0..steps.max(0) as usize).map(&mut next))?
    } else {
        sum_direct(next, 0.0, tol, qv)?
    };
    Ok(sum.scale(cpow(c(x), nu)))
}

/// Backward q-derivative `B_q f(x) = (f(x) - f(x/q))/x`.
pub fn apply_bq(f: &HalfLineFn, x: f64, q: Base) -> Result<C64> {
    Ok((f.eval(x)? - f.eval(x / q.value())?) / x)
}

/// Adjoint of `B_q` up to a constant: `A(a,b) = (1 + bx/(aq)) - ab (1 + x) T_q`.
pub fn apply_darboux_a(f: &HalfLineFn, x: f64, a: C64, b: C64, q: Base) -> Result<C64> {
    let qv = q.value();
    Ok((c(1.0) + b * x / (a * qv)) * f.eval(x)? - a * b * (1.0 + x) * f.eval(qv * x)?)
}

/// `A_nu^{(a,b)} f(x)`, a q-integral towards zero with weight `(ab)^l`.
pub fn apply_anu(f: &HalfLineFn, nu: C64, x: f64, a: C64, b: C64, q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let qv = q.value();
    let ab = a * b;
    if ab.norm() >= 1.0 {
        return Err(QError::Domain(format!("A_nu needs |ab| < 1, got {}", ab.norm())));
    }
    let qnu = q.pow(nu);
    let bxa = b * x / a;
    let pref = qpoch_inf_all(&[-bxa], q)? / qpoch_inf_all(&[-bxa * q.pow(-nu)], q)?;
    let mut coef = c(1.0);
    let mut next = |l: usize| -> Result<C64> {
        if l > 0 {
            let j = l as i32 - 1;
            let qj = qv.powi(j);
            coef *= ab * (c(1.0) - qnu * qj) * (1.0 + x * qj) / ((1.0 - qv * qj) * (c(1.0) + bxa * qj));
        }
        Ok(f.eval(x * qv.powi(l as i32))? * coef)
    };
    let (lo, _) = f.support();
    let sum = if lo > 0.0 {
        let steps = ((x / lo).ln() / -q.ln()).floor().max(-1.0) as i64 + 1;
        finite_sum((0..steps.max(0) as usize).map(&mut next))?
    } else {
        sum_direct(next, ab.norm(), tol, qv)?
    };
    Ok(sum.scale(pref))
}

/// `S(a,b) f(x) = (-x;q)_inf/(-bx/a;q)_inf f(bx/a)`.
pub fn apply_sab(f: &HalfLineFn, x: f64, a: f64, b: f64, q: Base) -> Result<C64> {
    let pref = qpoch_inf_all(&[c(-x)], q)? / qpoch_inf_all(&[c(-b * x / a)], q)?;
    Ok(pref * f.eval(b * x / a)?)
}

fn real_shift(mu: C64, what: &str) -> Result<f64> {
    if mu.im != 0.0 {
        return Err(QError::Domain(format!(
            "{what} = {mu} shifts the argument off the real line; only real {what} is supported for functions on (0, inf)"
        )));
    }
    Ok(mu.re)
}

/// Composite `W_{nu,mu}(a,b)` with the terminating 3phi2 kernel; intertwines
/// the operator for `(a, b)` with the one for `(a q^{-nu}, b q^{-mu})`.
pub fn apply_wnumu(f: &HalfLineFn, nu: C64, mu: C64, a: C64, b: C64, x: f64, q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let mu_re = real_shift(mu, "mu")?;
    let qv = q.value();
    let ratio = q.pow(nu - mu) * b / a;
    if ratio.norm() >= 1.0 {
        return Err(QError::Region(format!("|q^(nu-mu) b/a| = {} must be < 1", ratio.norm())));
    }
    let pref = qpoch_inf_all(&[c(-x)], q)? / qpoch_inf_all(&[c(-x * qv.powf(-mu_re))], q)?
        * (-mu * mu * q.ln()).exp()
        * cpow(b / a, mu)
        * cpow(c(x), mu + nu);
    let qnu = q.pow(nu);
    let qmnu = q.pow(-nu);
    let xs = x * qv.powf(-mu_re);
    let kernel_z = q.pow(c(1.0) - mu) * b / a;
    let u = -q.pow(c(1.0) + mu - nu) * a / (b * x);
    let den2 = c(-qv.powf(1.0 + mu_re) / x);
    let mut coef = c(1.0);
    let mut next = |p: usize| -> Result<C64> {
        if p > 0 {
            coef *= (c(1.0) - qnu * qv.powi(p as i32 - 1)) / (1.0 - qv.powi(p as i32)) * qmnu;
        }
        let fv = f.eval(xs * qv.powi(-(p as i32)))?;
        if fv.norm() == 0.0 || coef.norm() == 0.0 {
            return Ok(c(0.0));
        }
        let spec = SeriesSpec::new(
            vec![Param::TerminatingPower(p as u32), Param::Generic(q.pow(mu)), Param::Generic(u)],
            vec![Param::Generic(q.pow(c(1.0 - p as f64) - nu)), Param::Generic(den2)],
            q,
            kernel_z,
        );
        Ok(fv * coef * eval_rphis(&spec, tol)?.value)
    };
    let (_, hi) = f.support();
    let sum = if hi.is_finite() {
        let steps = ((hi / xs).ln() / -q.ln()).floor().max(-1.0) as i64 + 1;
        finite_sum((0..steps.max(0) as usize).map(&mut next))?
    } else {
        sum_direct(next, ratio.norm(), tol, qv)?
    };
    Ok(sum.scale(pref))
}

/// Composite `A_{nu,mu}(a,b)` for `a, b > 0`, `ab < 1`, `nu > 0`; intertwines
/// the operator for `(a, b)` with the one for `(a q^nu, b q^mu)`.
pub fn apply_anumu(f: &HalfLineFn, nu: f64, mu: C64, a: f64, b: f64, x: f64, q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let mu_re = real_shift(mu, "mu")?;
    if !(a > 0.0 && b > 0.0 && a * b < 1.0 && nu > 0.0) {
        return Err(QError::Domain("A_{nu,mu} needs a, b > 0, ab < 1, nu > 0".into()));
    }
    if mu_re <= 0.0 && mu_re.fract() == 0.0 {
        return Err(QError::Domain(format!("mu = {mu_re} must not be a nonpositive integer")));
    }
    let qv = q.value();
    let ab = a * b;
    let xm = x * qv.powf(mu_re);
    let bxa = b * xm / a;
    let pref = qpoch_inf_all(&[c(-bxa)], q)? / qpoch_inf_all(&[c(-bxa * qv.powf(-nu))], q)?;
    let qnu = qv.powf(nu);
    let u = c(-bxa * qv.powf(-nu));
    let mut coef = c(1.0);
    let mut next = |k: usize| -> Result<C64> {
        if k > 0 {
            let qj = qv.powi(k as i32 - 1);
            coef *= c(ab * (1.0 - qnu * qj) * (1.0 + xm * qj) / ((1.0 - qv * qj) * (1.0 + bxa * qj)));
        }
        let fv = f.eval(xm * qv.powi(k as i32))?;
        if fv.norm() == 0.0 {
            return Ok(c(0.0));
        }
        let spec = SeriesSpec::new(
            vec![Param::TerminatingPower(k as u32), Param::Generic(q.pow(mu)), Param::Generic(u)],
            vec![Param::real(qv.powf(1.0 - nu - k as f64)), Param::real(-xm)],
            q,
            c(qv),
        );
        Ok(fv * coef * eval_rphis(&spec, tol)?.value)
    };
    let (lo, _) = f.support();
    let sum = if lo > 0.0 {
        let steps = ((xm / lo).ln() / -q.ln()).floor().max(-1.0) as i64 + 1;
        finite_sum((0..steps.max(0) as usize).map(&mut next))?
    } else {
        sum_direct(next, ab, tol, qv)?
    };
    Ok(sum.scale(pref))
}

/// Weight of the grid point `y q^k` in the Hilbert space for `(a, b; y)`.
pub fn grid_weight(k: i64, a: f64, b: f64, y: f64, q: Base) -> Result<f64> {
    let x = y * q.powi(k);
    let r = qpoch_inf_all(&[c(-b * x / a)], q)? / qpoch_inf_all(&[c(-x)], q)?;
    Ok((a * b).powi(k as i32) * r.re)
}

/// `<f, g>` in the weighted sequence space for `(a, b; y)`, summed over `ks`.
pub fn hilbert_inner(f: &HalfLineFn, g: &HalfLineFn, a: f64, b: f64, y: f64, q: Base, ks: RangeInclusive<i64>) -> Result<C64> {
    let mut acc = c(0.0);
    for k in ks {
        let x = y * q.powi(k);
        acc += f.eval(x)? * g.eval(x)?.conj() * grid_weight(k, a, b, y, q)?;
    }
    Ok(acc)
}

/// Parameters of the fractional-integral identity relating `2phi1` functions
/// with parameters `(ar, bs)` to those with `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasperPoint {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub s: f64,
    pub y: f64,
    pub l: i64,
    pub sigma: C64,
    pub q: Base,
}

/// Left and right sides of the fractional-integral identity.
pub fn gasper_sides(p: &GasperPoint, tol: &ToleranceConfig) -> Result<(C64, C64)> {
    let GasperPoint { a, b, r, s, y, l, sigma, q } = *p;
    let qv = q.value();
    if !((r * s).abs() < 1.0 && (a * b).abs() < 1.0) {
        return Err(QError::Domain("need |rs| < 1 and |ab| < 1".into()));
    }
    let ql = q.powi(l);
    let lhs = phi21_auto(sigma * (a * r), sigma.inv() * (a * r), c(a * b * r * s), q, c(-b * y * ql / (a * r)), tol)?.value;
    let front = qpoch_inf_all(&[c(a * b), c(r * s)], q)? / qpoch_inf_all(&[c(qv), c(a * b * r * s)], q)?;
    let term = |k: usize| -> Result<C64> {
        let k = k as i64;
        let qk = q.powi(k);
        let w =
            qpoch_inf_all(&[c(qv * qk), c(-b * y * qk * ql / a)], q)? / qpoch_inf_all(&[c(r * s * qk), c(-b * y * qk * ql / (a * r))], q)?;
        let spec = SeriesSpec::new(
            vec![Param::TerminatingPower(k as u32), Param::real(r), Param::real(a * r / b)],
            vec![Param::real(r * s), Param::real(-a * r * q.powi(1 - l - k) / (b * y))],
            q,
            c(qv),
        );
        let kernel = eval_rphis(&spec, tol)?.value;
        let phi = phi_lambda(y * ql * qk, sigma, c(a), c(b), q, tol)?.value;
        Ok(c((a * b).powi(k as i32)) * w * kernel * phi)
    };
    let rhs = sum_direct(term, a * b, tol, qv)?.value * front;
    Ok((lhs, rhs))
}

/// Lowering factor in `B_q phi_lambda(.; a, b) = factor * phi_lambda(.; aq, b)`.
pub fn lowering_factor(sigma: C64, a: C64, b: C64, q: Base) -> C64 {
    b * (c(1.0) - a * sigma) * (c(1.0) - a / sigma) / (a * q.value() * (c(1.0) - a * b))
}

/// Constant in `S(a,b) Phi_sigma(.; b, a)` with the input anchored at `yb/a`:
/// it equals `theta(-y)/theta(-by/a)` times `Phi_sigma(.; a, b)` anchored at `y`.
pub fn swap_constant(a: f64, b: f64, y: f64, q: Base) -> Result<C64> {
    Ok(theta_value(c(-y), q)? / theta_value(c(-b * y / a), q)?)
}

/// Constant `C` in `W_{nu,mu}(a,b) Phi_sigma(.; a, b) = C Phi_sigma(.; aq^{-nu}, bq^{-mu})`,
/// both sides anchored at `y`:
/// `y^{mu+nu} (b sigma)^mu theta(-y q^mu)/theta(-y) (a sigma, b sigma;q)_inf/(aq^{-nu} sigma, bq^{-mu} sigma;q)_inf`.
pub fn bateman_constant(sigma: C64, nu: C64, mu: f64, a: C64, b: C64, y: f64, q: Base) -> Result<C64> {
    let (an, bn) = (a * q.pow(-nu), b * q.value().powf(-mu));
    let k = qpoch_inf_all(&[a * sigma, b * sigma], q)? / qpoch_inf_all(&[an * sigma, bn * sigma], q)?;
    let theta = theta_value(c(-y * q.value().powf(mu)), q)? / theta_value(c(-y), q)?;
    Ok(cpow(c(y), nu + mu) * cpow(b * sigma, c(mu)) * theta * k)
}

/// `(abq^nu;q)_inf/(ab;q)_inf`, the constant in the action of `A_nu` on `phi_lambda`.
pub fn anu_eigen_constant(ab: C64, nu: C64, q: Base) -> Result<C64> {
    Ok(qpoch_inf_all(&[ab * q.pow(nu)], q)? / qpoch_inf_all(&[ab], q)?)
}

/// `(q^nu;q)_n / (q;q)_n`, used to build test data.
pub fn fractional_binomial(nu: C64, n: i64, q: Base) -> Result<C64> {
    Ok(qpoch_finite(q.pow(nu), q, n)? / qpoch_finite(c(q.value()), q, n)?)
}
