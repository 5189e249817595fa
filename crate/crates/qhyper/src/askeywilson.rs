//! Askey-Wilson polynomials and functions: the second-order q-difference
//! operator, dual parameters, the Gram matrix of the polynomials, the
//! Askey-Wilson function in its 8W7 and 4phi3-pair forms, the c-function
//! expansion, and the measure behind the function transform.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use twofloat::TwoFloat;

use crate::dd::Cdd;
use crate::error::{QError, Result};
use crate::qcore::{c, qpoch_finite, qpoch_infinite_except, qpoch_multi, theta_value, Base, Order, ToleranceConfig, TruncatedValue, C64};
use crate::series::{eval_rphis, eval_vwp, Param, SeriesSpec};

/// Relative change between dyadic trapezoid levels accepted as converged.
const QUAD_REL_TOL: f64 = 1e-9;
const QUAD_MIN_LEVEL: u32 = 4;
const QUAD_MAX_LEVEL: u32 = 13;
/// `S_-` atoms below this fraction of the largest mass are dropped.
const ATOM_TRUNCATION: f64 = 1e-16;
/// Slack for the boundary cases of the parameter set V.
const V_SLACK: f64 = 1e-12;
/// Beyond `|x| > FAR_OUT |d|` on the q-line the c-function expansion is used.
const FAR_OUT: f64 = 6.0;

/// Askey-Wilson parameters. `t` is only used by the function transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwParams {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
    pub t: Option<f64>,
    pub q: Base,
}

impl AwParams {
    /// Unchecked parameters; only the base is validated.
    pub fn generic(a: C64, b: C64, cc: C64, d: C64, q: f64) -> Result<Self> {
        Ok(AwParams { a, b, c: cc, d, t: None, q: Base::new(q)? })
    }

    /// Orthogonality regime `0 < a, b, c, d < 1`.
    pub fn polynomial(a: f64, b: f64, cc: f64, d: f64, q: f64) -> Result<Self> {
        if ![a, b, cc, d].iter().all(|&v| v > 0.0 && v < 1.0) {
            return Err(QError::Domain(format!("need 0 < a, b, c, d < 1, got ({a}, {b}, {cc}, {d})")));
        }
        AwParams::generic(c(a), c(b), c(cc), c(d), q)
    }

    /// Function-transform regime: `(a, b, c, d, t)` must lie in V.
    pub fn transform(a: f64, b: f64, cc: f64, d: f64, t: f64, q: f64) -> Result<Self> {
        let p = AwParams { t: Some(t), ..AwParams::generic(c(a), c(b), c(cc), c(d), q)? };
        if !p.in_v() {
            return Err(QError::Domain(format!(
                "({a}, {b}, {cc}, {d}, {t}) is outside V: need t < 0, 0 < b, c <= a < d/q, bd, cd >= q, ab, ac < 1"
            )));
        }
        Ok(p)
    }

    /// Membership in V: `t < 0`, `0 < b, c <= a < d/q`, `bd, cd >= q`, `ab, ac < 1`.
    pub fn in_v(&self) -> bool {
        let Some(t) = self.t else { return false };
        let real = [self.a, self.b, self.c, self.d].iter().all(|z| z.im == 0.0);
        if !real {
            return false;
        }
        let (a, b, cc, d, q) = (self.a.re, self.b.re, self.c.re, self.d.re, self.q.value());
        let le = |x: f64, y: f64| x <= y * (1.0 + V_SLACK);
        t < 0.0 && b > 0.0 && cc > 0.0 && le(b, a) && le(cc, a) && a < d / q && le(q, b * d) && le(q, cc * d) && a * b < 1.0 && a * cc < 1.0
    }

    /// `a~ = sqrt(abcd/q)`, principal branch.
    pub fn a_tilde(&self) -> C64 {
        (self.a * self.b * self.c * self.d / self.q.value()).sqrt()
    }

    /// Dual parameters `(a~, ab/a~, ac/a~, ad/a~)` and `t~ = 1/(qadt)`.
    pub fn dual(&self) -> AwParams {
        let at = self.a_tilde();
        let t = self.t.map(|t| 1.0 / (self.q.value() * (self.a * self.d).re * t));
        AwParams { a: at, b: self.a * self.b / at, c: self.a * self.c / at, d: self.a * self.d / at, t, q: self.q }
    }

    /// Eigenvalue parameter `gamma_n = a~ q^n` of `p_n`.
    pub fn gamma_n(&self, n: u32) -> C64 {
        self.a_tilde() * self.q.powi(n as i64)
    }

    /// `mu(gamma) = -1 - a~^2 + a~ (gamma + 1/gamma)`.
    pub fn eigenvalue(&self, gamma: C64) -> C64 {
        let at = self.a_tilde();
        -c(1.0) - at * at + at * (gamma + gamma.inv())
    }

    fn t_value(&self) -> Result<f64> {
        self.t.ok_or_else(|| QError::Domain("the parameter t is required here".into()))
    }
}

fn prod(params: &[C64], q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    qpoch_multi(params, q, Order::Infinite, tol)
}

/// `(nums; q)_inf / (dens; q)_inf`, failing on a vanishing denominator.
fn prod_ratio(nums: &[C64], dens: &[C64], q: Base, tol: &ToleranceConfig, what: &str) -> Result<TruncatedValue> {
    let den = prod(dens, q, tol)?;
    if den.value.norm() == 0.0 {
        return Err(QError::Pole { what: what.into(), index: 0 });
    }
    prod(nums, q, tol)?.checked_div(den)
}

/// A function of `x` that is symmetric under `x -> 1/x` by construction.
pub struct SymFunction<'a> {
    f: Box<dyn Fn(C64) -> Result<C64> + 'a>,
}

impl<'a> SymFunction<'a> {
    /// Wraps `f`; evaluation returns `(f(x) + f(1/x))/2`.
    pub fn new(f: impl Fn(C64) -> Result<C64> + 'a) -> Self {
        SymFunction { f: Box::new(f) }
    }

    pub fn eval(&self, x: C64) -> Result<C64> {
        Ok(((self.f)(x)? + (self.f)(x.inv())?) * 0.5)
    }
}

/// Askey-Wilson polynomial `p_n(x) = 4phi3(q^-n, q^(n-1)abcd, ax, a/x; ab, ac, ad; q, q)`.
pub fn aw_poly(n: u32, x: C64, p: &AwParams, tol: &ToleranceConfig) -> Result<C64> {
    if x.norm() == 0.0 {
        return Err(QError::Domain("x must be nonzero".into()));
    }
    if n == 0 {
        return Ok(c(1.0));
    }
    let (a, b, cc, d, q) = (p.a, p.b, p.c, p.d, p.q);
    let spec = SeriesSpec::new(
        vec![
            Param::TerminatingPower(n),
            Param::Generic(q.powi(n as i64 - 1) * a * b * cc * d),
            Param::Generic(a * x),
            Param::Generic(a / x),
        ],
        vec![Param::Generic(a * b), Param::Generic(a * cc), Param::Generic(a * d)],
        q,
        c(q.value()),
    );
    Ok(eval_rphis(&spec, tol)?.value)
}

fn alpha(x: C64, p: &AwParams) -> Result<C64> {
    let one = c(1.0);
    let den = (one - x * x) * (one - x * x * p.q.value());
    if den.norm() < 1e-13 {
        return Err(QError::Domain(format!("alpha has a pole at x = {x}")));
    }
    Ok((one - p.a * x) * (one - p.b * x) * (one - p.c * x) * (one - p.d * x) / den)
}

/// `(L f)(x) = alpha(x)(f(qx) - f(x)) + alpha(1/x)(f(x/q) - f(x))`.
pub fn aw_operator(f: &SymFunction, x: C64, p: &AwParams) -> Result<C64> {
    let q = p.q.value();
    let fx = f.eval(x)?;
    Ok(alpha(x, p)? * (f.eval(x * q)? - fx) + alpha(x.inv(), p)? * (f.eval(x / q)? - fx))
}

/// The weight `Delta(x)` of the polynomial orthogonality.
pub fn aw_delta(x: C64, p: &AwParams, tol: &ToleranceConfig) -> Result<C64> {
    let xi = x.inv();
    let (a, b, cc, d) = (p.a, p.b, p.c, p.d);
    let num = prod(&[x * x, xi * xi], p.q, tol)?.value;
    let den = prod(&[a * x, a * xi, b * x, b * xi, cc * x, cc * xi, d * x, d * xi], p.q, tol)?.value;
    if den.norm() == 0.0 {
        return Err(QError::Pole { what: "Delta denominator".into(), index: 0 });
    }
    Ok(num / den)
}

/// The Askey-Wilson integral `C_0 = 2 (abcd)_inf / (q, ab, ac, ad, bc, bd, cd)_inf`.
pub fn aw_integral(p: &AwParams, tol: &ToleranceConfig) -> Result<C64> {
    let (a, b, cc, d) = (p.a, p.b, p.c, p.d);
    let r =
        prod_ratio(&[a * b * cc * d], &[c(p.q.value()), a * b, a * cc, a * d, b * cc, b * d, cc * d], p.q, tol, "Askey-Wilson integral")?;
    Ok(r.value * 2.0)
}

/// Residue of `Delta(x)/x` at the simple pole `x = a q^n` coming from `(a/x; q)_inf`.
/// The vanishing factor `1 - a q^n / x` has derivative `1/x` there, which cancels the `1/x`.
pub fn delta_residue(n: u32, p: &AwParams, tol: &ToleranceConfig) -> Result<C64> {
    let (a, b, cc, d, q) = (p.a, p.b, p.c, p.d, p.q);
    let x = a * q.powi(n as i64);
    let xi = x.inv();
    let num = prod(&[x * x, xi * xi], q, tol)?.value;
    let den =
        prod(&[a * x, b * x, b * xi, cc * x, cc * xi, d * x, d * xi], q, tol)?.value * qpoch_infinite_except(a * xi, q, n as usize, tol)?;
    if den.norm() == 0.0 {
        return Err(QError::Genericity(format!("pole of Delta at a q^{n} is not simple")));
    }
    Ok(num / den)
}

/// Right-hand side of the norm formula: residue of `Delta~(x)/x` at `gamma_0` over
/// the one at `gamma_n`, with `Delta~` the weight for the dual parameters.
pub fn aw_norm(n: u32, p: &AwParams, tol: &ToleranceConfig) -> Result<C64> {
    let dual = p.dual();
    Ok(delta_residue(0, &dual, tol)? / delta_residue(n, &dual, tol)?)
}

/// Periodic trapezoid on `[0, 2 pi)` with dyadic refinement; `f` returns a block of values.
fn circle_trapezoid<F>(n_out: usize, mut f: F) -> Result<Vec<C64>>
where
    F: FnMut(f64) -> Result<Vec<C64>>,
{
    let mut n = 1usize << QUAD_MIN_LEVEL;
    let mut sums = vec![c(0.0); n_out];
    for j in 0..n {
        for (s, v) in sums.iter_mut().zip(f(2.0 * PI * j as f64 / n as f64)?) {
            *s += v;
        }
    }
    let mut prev: Vec<C64> = sums.iter().map(|s| s / n as f64).collect();
    for _ in QUAD_MIN_LEVEL..QUAD_MAX_LEVEL {
        for j in 0..n {
            for (s, v) in sums.iter_mut().zip(f(2.0 * PI * (j as f64 + 0.5) / n as f64)?) {
                *s += v;
            }
        }
        n *= 2;
        let next: Vec<C64> = sums.iter().map(|s| s / n as f64).collect();
        let scale = next.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let change = next.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if change <= QUAD_REL_TOL * scale {
            return Ok(next);
        }
        prev = next;
    }
    Err(QError::Quadrature(format!("no convergence with {n} trapezoid nodes")))
}

/// Gram matrix `(1/(2 pi i C_0)) \oint p_n p_m Delta dx/x` for `n, m <= nmax`.
pub fn aw_gram(nmax: u32, p: &AwParams, tol: &ToleranceConfig) -> Result<DMatrix<C64>> {
    let in_regime = [p.a, p.b, p.c, p.d].iter().all(|z| z.im == 0.0 && z.re > 0.0 && z.re < 1.0);
    if !in_regime {
        return Err(QError::Domain("the Gram matrix needs 0 < a, b, c, d < 1".into()));
    }
    let c0 = aw_integral(p, tol)?;
    let size = nmax as usize + 1;
    let entries = circle_trapezoid(size * size, |theta| {
        let x = C64::from_polar(1.0, theta);
        let w = aw_delta(x, p, tol)?;
        let vals = (0..=nmax).map(|n| aw_poly(n, x, p, tol)).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(size * size);
        for vn in &vals {
            for vm in &vals {
                out.push(vn * vm * w);
            }
        }
        Ok(out)
    })?;
    Ok(DMatrix::from_iterator(size, size, entries.into_iter().map(|e| e / c0)))
}

/// Which closed form of the Askey-Wilson function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwRepresentation {
    /// Very-well-poised 8W7, valid for `|q/(d~ gamma)| < 1`.
    W8,
    /// Sum of two balanced 4phi3 series; meromorphic in `x` and `gamma`.
    Pair43,
}

/// `u = q^{-m}` for some integer `m >= 0`.
fn on_inverse_lattice(u: C64, q: Base) -> bool {
    if u.norm() < 1.0 - 1e-12 {
        return false;
    }
    let m = (u.norm().ln() / -q.ln()).round();
    (u - c(q.powi(-(m as i64)))).norm() < 1e-12 * u.norm()
}

fn check_lattice(z: C64, q: Base, what: &str) -> Result<()> {
    // z in q^{1+N} means (q/z; q)_inf = 0
    if z.norm() == 0.0 {
        return Ok(());
    }
    let k = (z.norm().ln() / q.ln()).round();
    if k >= 1.0 && (z - c(q.powi(k as i64))).norm() < 1e-12 * z.norm() {
        return Err(QError::Pole { what: what.into(), index: k as i64 });
    }
    Ok(())
}

/// The Askey-Wilson function `phi_gamma(x)`.
pub fn aw_function(gamma: C64, x: C64, p: &AwParams, repr: AwRepresentation, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    if gamma.norm() == 0.0 || x.norm() == 0.0 {
        return Err(QError::Domain("gamma and x must be nonzero".into()));
    }
    match repr {
        AwRepresentation::W8 => phi_w8(gamma, x, p, tol),
        AwRepresentation::Pair43 => phi_pair43(gamma, x, p, tol),
    }
}

fn phi_w8(gamma: C64, x: C64, p: &AwParams, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let (a, d, q) = (p.a, p.d, p.q);
    let du = p.dual();
    let qv = q.value();
    let z = qv / (du.d * gamma);
    if z.norm() >= 1.0 {
        return Err(QError::Region(format!("8W7 form needs |q/(d~ gamma)| < 1, got {}", z.norm())));
    }
    let lead = du.a * du.b * du.c * gamma;
    let nums = [a * x * gamma * qv / du.d, a * gamma * qv / (du.d * x)];
    for u in nums {
        // (u; q)_inf = 0 against a pole of the 8W7 series: a removable point of this form
        if on_inverse_lattice(u, q) {
            return Err(QError::Degenerate("8W7 form is 0 * infinity here; use the 4phi3 pair".into()));
        }
    }
    let pre =
        prod_ratio(&nums, &[lead, gamma * qv / du.d, du.a * qv / du.d, x * qv / d, c(qv) / (d * x)], q, tol, "8W7 prefactor denominator")?;
    let rest = [a * x, a / x, du.a * gamma, du.b * gamma, du.c * gamma].map(Param::Generic);
    Ok(eval_vwp(lead / qv, &rest, q, z, tol)? * pre)
}

fn phi_pair43(gamma: C64, x: C64, p: &AwParams, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let (a, b, cc, d, q) = (p.a, p.b, p.c, p.d, p.q);
    let du = p.dual();
    let qv = q.value();
    for (v, what) in
        [(d * x, "x = q^(1+k)/d"), (d / x, "1/x = q^(1+k)/d"), (du.d * gamma, "gamma = q^(1+k)/d~"), (du.d / gamma, "1/gamma = q^(1+k)/d~")]
    {
        check_lattice(v, q, what)?;
    }
    // The two terms can be many orders of magnitude larger than their sum,
    // so both series and prefactors run in double-double.
    let qq = c(qv);
    let first = phi43_dd(&[a * x, a / x, du.a * gamma, du.a / gamma], &[a * b, a * cc, a * d], q, tol)?;
    let first_den = prod_dd(&[b * cc, a * qv / d, qq / (a * d)], q);
    if first_den.norm() == 0.0 {
        return Err(QError::Pole { what: "(bc, qa/d, q/ad)_inf".into(), index: 0 });
    }
    let mut total = first.div(first_den);
    let lead = prod_dd(&[a * x, a / x, du.a * gamma, du.a / gamma, b * qv / d, cc * qv / d], q);
    if lead.norm() != 0.0 {
        let den =
            prod_dd(&[x * qv / d, qq / (d * x), gamma * qv / du.d, qq / (du.d * gamma), a * b, a * cc, b * cc, a * qv / d, a * d / qv], q);
        if den.norm() == 0.0 {
            return Err(QError::Pole { what: "second 4phi3 prefactor".into(), index: 0 });
        }
        let second = phi43_dd(
            &[x * qv / d, qq / (d * x), gamma * qv / du.d, qq / (du.d * gamma)],
            &[b * qv / d, cc * qv / d, c(qv * qv) / (a * d)],
            q,
            tol,
        )?;
        total = total + second * lead.div(den);
    }
    let value = total.to_c64();
    Ok(TruncatedValue { value, tail_bound: DD_EPS * value.norm().max(1.0), terms_used: 0 })
}

/// Relative accuracy target of the double-double evaluations.
const DD_EPS: f64 = 1e-28;

/// `(u_1, ..., u_m; q)_inf` in double-double.
fn prod_dd(params: &[C64], q: Base) -> Cdd {
    let qd = TwoFloat::from(q.value());
    let mut acc = Cdd::one();
    for &u in params {
        let mut uq = Cdd::new(u);
        let mut mag = u.norm();
        while mag > 1e-34 {
            acc = acc * (Cdd::one() - uq);
            uq = uq.scale(qd);
            mag *= q.value();
        }
    }
    acc
}

/// Balanced `4phi3(nums; dens; q, q)` in double-double.
fn phi43_dd(nums: &[C64; 4], dens: &[C64; 3], q: Base, tol: &ToleranceConfig) -> Result<Cdd> {
    let qd = TwoFloat::from(q.value());
    let one = Cdd::one();
    let mut nq = nums.map(Cdd::new);
    let mut dq = dens.map(Cdd::new);
    let mut qk = Cdd::new(c(q.value()));
    let mut term = one;
    let mut sum = one;
    let mut small = 0;
    for k in 0..tol.max_terms {
        let mut num = one;
        for u in &nq {
            num = num * (one - *u);
        }
        if num.norm() == 0.0 {
            return Ok(sum);
        }
        let mut den = one - qk;
        for u in &dq {
            den = den * (one - *u);
        }
        if den.norm() == 0.0 {
            return Err(QError::Pole { what: "4phi3 denominator".into(), index: k as i64 + 1 });
        }
        term = (term * num).div(den).scale(qd);
        sum = sum + term;
        small = if term.norm() < DD_EPS * sum.norm() { small + 1 } else { 0 };
        if small >= 3 {
            return Ok(sum);
        }
        for u in nq.iter_mut().chain(dq.iter_mut()) {
            *u = u.scale(qd);
        }
        qk = qk.scale(qd);
    }
    Err(QError::NonConvergence { terms: tol.max_terms })
}

/// Picks the 8W7 form when its argument is comfortably inside the unit disc,
/// the 4phi3 pair otherwise, and falls back to the other form on failure.
/// Far out on the q-line of `x` (or the dual q-line of `gamma`) both forms
/// cancel badly, so the c-function expansion is used there.
pub fn aw_function_auto(gamma: C64, x: C64, p: &AwParams, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    if gamma.norm() == 0.0 || x.norm() == 0.0 {
        return Err(QError::Domain("gamma and x must be nonzero".into()));
    }
    // invariant under gamma -> 1/gamma and x -> 1/x; work outside the unit disc
    let gamma = if gamma.norm() < 1.0 { gamma.inv() } else { gamma };
    let x = if x.norm() < 1.0 { x.inv() } else { x };
    if p.t.is_some() {
        if let Some(k) = qline_index(x, p) {
            if x.norm() > FAR_OUT * p.d.norm() {
                return aw_function_qline(gamma, k, p, tol);
            }
        }
        let du = p.dual();
        if let Some(k) = qline_index(gamma, &du) {
            if gamma.norm() > FAR_OUT * du.d.norm() {
                // phi_gamma(x; p) = phi_x(gamma; dual p)
                return aw_function_qline(x, k, &du, tol);
            }
        }
    }
    let z = p.q.value() / (p.dual().d * gamma);
    let order =
        if z.norm() < 0.5 { [AwRepresentation::W8, AwRepresentation::Pair43] } else { [AwRepresentation::Pair43, AwRepresentation::W8] };
    aw_function(gamma, x, p, order[0], tol).or_else(|e| aw_function(gamma, x, p, order[1], tol).map_err(|_| e))
}

/// The c-function `c(gamma; a, b, c, d; t)`. Use `p.dual()` for the dual c-function.
pub fn aw_cfun(gamma: C64, p: &AwParams) -> Result<C64> {
    let t = p.t_value()?;
    let (a, b, cc, d, q) = (p.a, p.b, p.c, p.d, p.q);
    let qv = q.value();
    let g = gamma.inv();
    let th_norm = theta_value(a * d * t * qv, q)?;
    let den = prod(&[a * b, a * cc, b * cc, a * qv / d, gamma * qv / d, g * g], q, &ToleranceConfig::default())?.value * th_norm;
    if den.norm() == 0.0 {
        return Err(QError::Pole { what: "c-function denominator".into(), index: 0 });
    }
    let num = prod(&[a * g, b * g, cc * g], q, &ToleranceConfig::default())?.value * theta_value(gamma / (d * t), q)?;
    Ok(num / den)
}

/// The point `d t q^k` of the q-line.
pub fn qline_point(k: i64, p: &AwParams) -> Result<C64> {
    Ok(p.d * p.t_value()? * p.q.powi(k))
}

/// Asymptotically free solution `Phi_gamma(d t q^k)`, normalized so that
/// `(a~ gamma)^k Phi_gamma(d t q^k) -> 1` as `k -> -inf`.
pub fn aw_big_phi(gamma: C64, k: i64, p: &AwParams, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let (a, b, cc, d, q) = (p.a, p.b, p.c, p.d, p.q);
    let qv = q.value();
    let du = p.dual();
    let x = qline_point(k, p)?;
    let z = d / x;
    if z.norm() >= 1.0 {
        return Err(QError::Region(format!("Phi needs |d/x| < 1, got {} at k = {k}", z.norm())));
    }
    let y = gamma * qv / (du.a * x);
    let pre = prod_ratio(
        &[a * y, b * y, cc * y, du.a * gamma * qv / (d * x), z],
        &[c(qv) / (a * x), c(qv) / (b * x), c(qv) / (cc * x), c(qv) / (d * x), gamma * gamma * qv * qv / (d * x)],
        q,
        tol,
        "Phi prefactor denominator",
    )?;
    let lead = gamma * gamma * qv / (d * x);
    let rest = [gamma * qv / du.a, gamma * qv / du.d, du.b * gamma, du.c * gamma, c(qv) / (d * x)].map(Param::Generic);
    let free = (du.a * gamma).powi(-(k as i32));
    Ok((eval_vwp(lead, &rest, q, z, tol)? * pre).scale(free))
}

/// `k` with `x = d t q^k`, if `x` lies on the q-line.
pub fn qline_index(x: C64, p: &AwParams) -> Option<i64> {
    let base = p.d * p.t?;
    let r = x / base;
    if r.re <= 0.0 {
        return None;
    }
    let k = (r.norm().ln() / p.q.ln()).round();
    ((r - c(p.q.powi(k as i64))).norm() < 1e-12 * r.norm()).then_some(k as i64)
}

/// `phi_gamma(d t q^k) = c~(gamma) Phi_gamma + c~(1/gamma) Phi_{1/gamma}`.
pub fn aw_function_qline(gamma: C64, k: i64, p: &AwParams, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let du = p.dual();
    let mut acc = TruncatedValue::exact(c(0.0));
    for g in [gamma, gamma.inv()] {
        let cf = aw_cfun(g, &du)?;
        if cf.norm() != 0.0 {
            acc = acc + aw_big_phi(g, k, p, tol)?.scale(cf);
        }
    }
    Ok(acc)
}

/// Coefficients `(A, B)` with `phi_gamma = A Phi_gamma + B Phi_{1/gamma}` fitted on
/// the two q-line points `k`, `k + 1`.
pub fn expansion_coefficients(gamma: C64, k: i64, p: &AwParams, tol: &ToleranceConfig) -> Result<(C64, C64)> {
    let mut rows = [[c(0.0); 3]; 2];
    for (row, kk) in rows.iter_mut().zip([k, k + 1]) {
        let x = qline_point(kk, p)?;
        *row =
            [aw_big_phi(gamma, kk, p, tol)?.value, aw_big_phi(gamma.inv(), kk, p, tol)?.value, aw_function_auto(gamma, x, p, tol)?.value];
    }
    let det = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0];
    if det.norm() == 0.0 {
        return Err(QError::Degenerate("Phi_gamma and Phi_1/gamma are dependent".into()));
    }
    let ca = (rows[0][2] * rows[1][1] - rows[0][1] * rows[1][2]) / det;
    let cb = (rows[0][0] * rows[1][2] - rows[0][2] * rows[1][0]) / det;
    Ok((ca, cb))
}

/// Weight `W(x)`, the renormalized `1/(c(x) c(1/x))`.
pub fn aw_weight(x: C64, p: &AwParams, tol: &ToleranceConfig) -> Result<C64> {
    let t = p.t_value()?;
    let (a, b, cc, d, q) = (p.a, p.b, p.c, p.d, p.q);
    let qv = q.value();
    let xi = x.inv();
    let num = prod(&[x * qv / d, xi * qv / d, x * x, xi * xi], q, tol)?.value;
    let den =
        prod(&[a * x, a * xi, b * x, b * xi, cc * x, cc * xi], q, tol)?.value * theta_value(d * t * x, q)? * theta_value(d * t * xi, q)?;
    if den.norm() == 0.0 {
        return Err(QError::Pole { what: "W denominator".into(), index: 0 });
    }
    Ok(num / den)
}

/// Normalizing constant `K` of the measure.
pub fn aw_k(p: &AwParams) -> Result<f64> {
    let t = p.t_value()?;
    let (a, b, cc, d, q) = (p.a.re, p.b.re, p.c.re, p.d.re, p.q);
    let qv = q.value();
    let thetas = [qv * t, a * d * t, b * d * t, cc * d * t].iter().map(|&z| theta_value(c(z), q)).collect::<Result<Vec<_>>>()?;
    let rad = thetas.iter().product::<C64>() / (qv * a * b * cc * d * t * t);
    if !(rad.re > 0.0) {
        return Err(QError::Domain("K is not real for these parameters".into()));
    }
    let pre = prod(&[c(a * b), c(a * cc), c(b * cc), c(qv * a / d), c(qv)], q, &ToleranceConfig::default())?.value.re;
    Ok(pre * rad.re.sqrt())
}

/// A discrete mass point of the measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwAtom {
    /// `k` in `a q^k` or `d t q^k`.
    pub index: i64,
    pub x: f64,
    /// Mass at `x` and `1/x` together.
    pub mass: f64,
}

/// The measure `nu`: continuous part on the unit circle plus atoms at `S_+` and `S_-`
/// and their reciprocals, stored folded.
#[derive(Debug, Clone, PartialEq)]
pub struct AwMeasure {
    pub params: AwParams,
    pub k_norm: f64,
    pub atoms_plus: Vec<AwAtom>,
    pub atoms_minus: Vec<AwAtom>,
}

impl AwMeasure {
    /// Density `K W(e^{i theta}) / (4 pi)` with respect to `d theta` on `[0, 2 pi)`.
    pub fn density(&self, theta: f64) -> Result<f64> {
        let w = aw_weight(C64::from_polar(1.0, theta), &self.params, &ToleranceConfig::default())?;
        Ok(self.k_norm * w.re / (4.0 * PI))
    }

    pub fn atoms(&self) -> impl Iterator<Item = &AwAtom> {
        self.atoms_plus.iter().chain(&self.atoms_minus)
    }

    /// `\int f d nu` for `f` symmetric under `x -> 1/x`.
    pub fn integrate(&self, f: &dyn Fn(C64) -> Result<C64>, tol: &ToleranceConfig) -> Result<C64> {
        let cont = circle_trapezoid(1, |theta| {
            let x = C64::from_polar(1.0, theta);
            let v = f(x)?;
            if v.norm() == 0.0 {
                return Ok(vec![v]);
            }
            Ok(vec![v * aw_weight(x, &self.params, tol)?])
        })?[0];
        let mut total = cont * (self.k_norm / 2.0);
        for atom in self.atoms() {
            total += f(c(atom.x))? * atom.mass;
        }
        Ok(total)
    }

    /// `<f, g> = \int f conj(g) d nu`.
    pub fn inner(&self, f: &SymFunction, g: &SymFunction, tol: &ToleranceConfig) -> Result<C64> {
        self.integrate(&|x| Ok(f.eval(x)? * g.eval(x)?.conj()), tol)
    }
}

/// Mass `nu({a q^k})` at a point of `S_+`; the reciprocal point carries the same mass.
pub fn atom_mass_plus(k: i64, p: &AwParams, k_norm: f64) -> Result<f64> {
    let t = p.t_value()?;
    let (a, b, cc, d, q) = (p.a.re, p.b.re, p.c.re, p.d.re, p.q);
    let qv = q.value();
    let at = p.a_tilde().re;
    let num = prod(&[c(qv * a / d), c(qv / (a * d)), c(1.0 / (a * a))], q, &ToleranceConfig::default())?.value;
    let den = prod(&[c(qv), c(a * b), c(b / a), c(a * cc), c(cc / a)], q, &ToleranceConfig::default())?.value
        * theta_value(c(a * d * t), q)?
        * theta_value(c(d * t / a), q)?;
    if den.norm() == 0.0 {
        return Err(QError::Genericity(format!("pole at a q^{k} is not simple; perturb the parameters")));
    }
    let a2k = a * a * qv.powi(2 * k as i32);
    Ok((num / den).re * (1.0 - a2k) / (1.0 - a * a) * k_norm / (2.0 * at.powi(2 * k as i32)))
}

/// Mass `nu({d t q^k})` at a point of `S_-`; the reciprocal point carries the same mass.
pub fn atom_mass_minus(k: i64, p: &AwParams, k_norm: f64) -> Result<f64> {
    let t = p.t_value()?;
    let (a, b, cc, d, q) = (p.a.re, p.b.re, p.c.re, p.d.re, p.q);
    let qv = q.value();
    let dt = d * t;
    let at = p.a_tilde().re;
    let num = prod(&[c(qv * t), c(qv / (d * dt))], q, &ToleranceConfig::default())?.value;
    let den =
        prod(&[c(qv), c(qv), c(a / dt), c(b / dt), c(cc / dt), c(a * dt), c(b * dt), c(cc * dt)], q, &ToleranceConfig::default())?.value;
    if den.norm() == 0.0 {
        return Err(QError::Genericity(format!("pole at d t q^{k} is not simple; perturb the parameters")));
    }
    let mut finite = c(1.0);
    for u in [1.0 / t, a / dt, b / dt, cc / dt] {
        finite *= qpoch_finite(c(u), q, -k)?;
    }
    for u in [qv / (a * dt), qv / (b * dt), qv / (cc * dt), qv / (d * dt)] {
        let f = qpoch_finite(c(u), q, -k)?;
        if f.norm() == 0.0 {
            return Err(QError::Genericity(format!("pole at d t q^{k} is not simple; perturb the parameters")));
        }
        finite /= f;
    }
    let x = dt * qv.powi(k as i32);
    Ok((num / den * finite).re * (1.0 - 1.0 / (x * x)) * k_norm * at.powi(2 * k as i32) / 2.0)
}

/// Residue of `W(y)/y` at `x0` by a small circular contour.
fn contour_residue(x0: f64, p: &AwParams, tol: &ToleranceConfig) -> Result<C64> {
    let rad = 1e-5 * x0.abs();
    let n = 64;
    let mut acc = c(0.0);
    for j in 0..n {
        let e = C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
        let y = c(x0) + e * rad;
        acc += aw_weight(y, p, tol)? / y * e * rad;
    }
    Ok(acc / n as f64)
}

/// Checks the closed-form folded mass against `K/2 (Res_x - Res_{1/x})` of `W(y)/y`.
/// A mismatch means the pole is not simple or the fold is inconsistent.
fn check_atom(atom: &AwAtom, p: &AwParams, k_norm: f64, tol: &ToleranceConfig) -> Result<()> {
    let r = contour_residue(atom.x, p, tol)? - contour_residue(1.0 / atom.x, p, tol)?;
    let fold = r * (k_norm / 2.0);
    if (fold - c(atom.mass)).norm() > 1e-6 * atom.mass {
        return Err(QError::Genericity(format!(
            "residue at {} does not match a simple pole (contour {}, closed form {}); perturb the parameters",
            atom.x, fold, atom.mass
        )));
    }
    Ok(())
}

/// Builds the measure for parameters in V.
pub fn aw_measure(p: &AwParams, tol: &ToleranceConfig) -> Result<AwMeasure> {
    if !p.in_v() {
        return Err(QError::Domain("the measure needs parameters in V".into()));
    }
    let t = p.t_value()?;
    let (a, d, q) = (p.a.re, p.d.re, p.q);
    let k_norm = aw_k(p)?;

    // W differs from Delta by a q-periodic theta quotient
    for j in 0..20 {
        let x = C64::from_polar(1.0, PI * (j as f64 + 0.5) / 20.0);
        let quot = theta_value(p.d * x, q)? * theta_value(p.d / x, q)? / (theta_value(p.d * t * x, q)? * theta_value(p.d * t / x, q)?);
        let w = aw_weight(x, p, tol)?;
        let dw = aw_delta(x, p, tol)? * quot;
        if (w - dw).norm() > 1e-10 * w.norm() {
            return Err(QError::Degenerate(format!("W and Delta disagree at {x}")));
        }
    }

    let mut atoms_plus = Vec::new();
    let mut k = 0i64;
    while a * q.powi(k) > 1.0 {
        let mass = 2.0 * atom_mass_plus(k, p, k_norm)?;
        if !(mass > 0.0) {
            return Err(QError::Domain(format!("mass at a q^{k} is not positive")));
        }
        atoms_plus.push(AwAtom { index: k, x: a * q.powi(k), mass });
        k += 1;
    }

    let dt = d * t;
    // largest k with d t q^k < -1
    let mut k = ((-dt).ln() / -q.ln()).ceil() as i64 - 1;
    while dt * q.powi(k) >= -1.0 {
        k -= 1;
    }
    let mut atoms_minus: Vec<AwAtom> = Vec::new();
    let mut max_mass = 0.0f64;
    loop {
        if atoms_minus.len() >= tol.max_terms {
            return Err(QError::NonConvergence { terms: atoms_minus.len() });
        }
        let mass = 2.0 * atom_mass_minus(k, p, k_norm)?;
        if !(mass > 0.0) {
            return Err(QError::Domain(format!("mass at d t q^{k} is not positive")));
        }
        if !mass.is_finite() {
            return Err(QError::NonConvergence { terms: atoms_minus.len() });
        }
        max_mass = max_mass.max(mass);
        if mass < ATOM_TRUNCATION * max_mass {
            break;
        }
        atoms_minus.push(AwAtom { index: k, x: dt * q.powi(k), mass });
        k -= 1;
    }

    for atom in atoms_plus.first().into_iter().chain(atoms_minus.first()) {
        check_atom(atom, p, k_norm, tol)?;
    }
    Ok(AwMeasure { params: *p, k_norm, atoms_plus, atoms_minus })
}

/// `(F f)(gamma) = \int f conj(phi_gamma) d nu`.
pub fn aw_transform(f: &SymFunction, gamma: C64, m: &AwMeasure, tol: &ToleranceConfig) -> Result<C64> {
    m.integrate(
        &|x| {
            let v = f.eval(x)?;
            if v.norm() == 0.0 {
                return Ok(v);
            }
            Ok(v * aw_function_auto(gamma, x, &m.params, tol)?.value.conj())
        },
        tol,
    )
}
