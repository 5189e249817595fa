//! Evaluation of `r phi s` and very-well-poised series, base inversion,
//! reversal of terminating sums, the q-integral, the analytic continuation of
//! `2 phi 1` and a small catalog of classical identities checked as residuals.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use twofloat::TwoFloat;

use crate::dd::{dd_div, Cdd};
use crate::error::{QError, Result};
use crate::qcore::{c, lattice_index, qpoch_finite, qpoch_inf_all, theta_value, Base, ToleranceConfig, TruncatedValue, C64, EPS};

/// Relative log-window for deciding that a generic parameter sits on a pole lattice.
const LATTICE_WINDOW: f64 = 1e-12;
const DEGENERACY_WINDOW: f64 = 1e-10;

/// A numerator or denominator parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Generic(C64),
    /// `q^{-n}`; the degree is carried exactly so termination never depends on float equality.
    TerminatingPower(u32),
}

impl Param {
    pub fn real(x: f64) -> Param {
        Param::Generic(c(x))
    }

    /// Numerical value in the (possibly inverted) base `beta`.
    pub fn value_in(&self, beta: f64) -> C64 {
        match *self {
            Param::Generic(v) => v,
            Param::TerminatingPower(n) => c(beta.powi(-(n as i32))),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Param::Generic(v) if v.norm() == 0.0)
    }
}

/// Structural description of an `r phi s` series.
///
/// With `inverted == true` the series is taken in base `1/q`, which is how
/// base inversion represents its output without a `Base` above one.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSpec {
    pub numerators: Vec<Param>,
    pub denominators: Vec<Param>,
    pub q: Base,
    pub inverted: bool,
    pub z: C64,
}

impl SeriesSpec {
    pub fn new(numerators: Vec<Param>, denominators: Vec<Param>, q: Base, z: C64) -> Self {
        SeriesSpec { numerators, denominators, q, inverted: false, z }
    }

    /// Spec with only generic parameters.
    pub fn generic(numerators: &[C64], denominators: &[C64], q: Base, z: C64) -> Self {
        SeriesSpec::new(
            numerators.iter().map(|&v| Param::Generic(v)).collect(),
            denominators.iter().map(|&v| Param::Generic(v)).collect(),
            q,
            z,
        )
    }

    /// The base the series is written in.
    pub fn base_value(&self) -> f64 {
        if self.inverted {
            1.0 / self.q.value()
        } else {
            self.q.value()
        }
    }

    pub fn degree(&self) -> Option<u32> {
        self.numerators
            .iter()
            .filter_map(|p| match p {
                Param::TerminatingPower(n) => Some(*n),
                Param::Generic(_) => None,
            })
            .min()
    }
}

/// Convergence behaviour of a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceClass {
    Terminating(u32),
    AbsolutelyConvergent,
    Divergent,
}

impl fmt::Display for ConvergenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvergenceClass::Terminating(n) => write!(f, "terminating({n})"),
            ConvergenceClass::AbsolutelyConvergent => write!(f, "absolutely-convergent"),
            ConvergenceClass::Divergent => write!(f, "divergent"),
        }
    }
}

/// Limit of `|t_{n+1}/t_n|` as `n -> inf` for a non-terminating spec,
/// `None` when the terms grow super-geometrically.
fn asymptotic_ratio(spec: &SeriesSpec) -> Option<f64> {
    let r = spec.numerators.len() as i64;
    let s = spec.denominators.len() as i64;
    if !spec.inverted {
        return match r - s - 1 {
            e if e < 0 => Some(0.0),
            0 => Some(spec.z.norm()),
            _ => None,
        };
    }
    let zn = spec.numerators.iter().filter(|p| p.is_zero()).count() as i64;
    let zd = spec.denominators.iter().filter(|p| p.is_zero()).count() as i64;
    let p = spec.base_value();
    match zd - zn {
        g if g < 0 => Some(0.0),
        0 => {
            let num: f64 = spec.numerators.iter().filter(|x| !x.is_zero()).map(|x| x.value_in(p).norm()).product();
            let den: f64 = spec.denominators.iter().filter(|x| !x.is_zero()).map(|x| x.value_in(p).norm()).product();
            Some(num * spec.z.norm() / (p * den))
        }
        _ => None,
    }
}

/// Convergence class of a spec.
pub fn classify(spec: &SeriesSpec) -> ConvergenceClass {
    if let Some(n) = spec.degree() {
        return ConvergenceClass::Terminating(n);
    }
    if spec.z.norm() == 0.0 {
        return ConvergenceClass::AbsolutelyConvergent;
    }
    match asymptotic_ratio(spec) {
        Some(r) if r < 1.0 => ConvergenceClass::AbsolutelyConvergent,
        _ => ConvergenceClass::Divergent,
    }
}

/// Rejects denominators on the pole lattice `b beta^k = 1` reached before termination.
pub fn validate(spec: &SeriesSpec) -> Result<()> {
    let degree = spec.degree();
    for (j, p) in spec.denominators.iter().enumerate() {
        let hit = match *p {
            Param::TerminatingPower(m) => Some(m as i64),
            Param::Generic(v) => {
                crate::qcore::lattice_index(v, spec.q, LATTICE_WINDOW).map(|k| if spec.inverted { k } else { -k }).filter(|k| *k >= 0)
            }
        };
        if let Some(m) = hit {
            if degree.is_none_or(|n| (m as u64) < n as u64) {
                return Err(QError::Pole { what: format!("denominator parameter {j} on the lattice q^-{m}"), index: m + 1 });
            }
        }
    }
    Ok(())
}

/// Tracks recent term magnitudes and decides when the geometric tail is small enough.
pub(crate) struct TailMonitor {
    recent: VecDeque<f64>,
    floor: f64,
    q: f64,
    abs_tol: f64,
    abs_sum: f64,
    count: usize,
}

impl TailMonitor {
    pub(crate) fn new(floor: f64, q: f64, tol: &ToleranceConfig) -> Self {
        TailMonitor { recent: VecDeque::with_capacity(6), floor, q, abs_tol: tol.abs_tol, abs_sum: 0.0, count: 0 }
    }

    /// Records `|t_n|`; returns the tail bound once the stopping rule fires.
    pub(crate) fn push(&mut self, mag: f64) -> Option<f64> {
        self.count += 1;
        self.abs_sum += mag;
        if self.recent.len() == 6 {
            self.recent.pop_front();
        }
        self.recent.push_back(mag);
        if self.recent.len() < 6 {
            return None;
        }
        let mut rho = self.floor;
        for w in self.recent.iter().zip(self.recent.iter().skip(1)) {
            let r = match (*w.0, *w.1) {
                (a, b) if a > 0.0 => b / a,
                (_, 0.0) => 0.0,
                _ => f64::INFINITY,
            };
            rho = rho.max(r);
        }
        let rho = rho.clamp(self.q.min(0.999), 0.999);
        if mag < self.abs_tol * (1.0 - rho) {
            Some(mag * rho / (1.0 - rho) + self.rounding())
        } else {
            None
        }
    }

    pub(crate) fn rounding(&self) -> f64 {
        2.0 * EPS * self.count as f64 * self.abs_sum
    }

    pub(crate) fn count(&self) -> usize {
        self.count
    }
}

/// Sums `sum_n t_n` with `t_0 = 1` given the term ratio `t_{n+1}/t_n`.
pub(crate) fn sum_by_ratio<F>(mut ratio: F, terminating: Option<u32>, floor: f64, tol: &ToleranceConfig, q: f64) -> Result<TruncatedValue>
where
    F: FnMut(usize) -> Result<C64>,
{
    let mut term = c(1.0);
    let mut sum = c(1.0);
    if let Some(n) = terminating {
        for k in 0..n as usize {
            term *= ratio(k)?;
            sum += term;
        }
        return Ok(TruncatedValue { value: sum, tail_bound: 0.0, terms_used: n as usize + 1 });
    }
    let mut monitor = TailMonitor::new(floor, q, tol);
    monitor.push(1.0);
    let mut k = 0usize;
    loop {
        if k + 1 >= tol.max_terms {
            return Err(QError::NonConvergence { terms: k + 1 });
        }
        let r = ratio(k)?;
        k += 1;
        if r.norm() == 0.0 {
            return Ok(TruncatedValue { value: sum, tail_bound: monitor.rounding(), terms_used: k });
        }
        term *= r;
        sum += term;
        if let Some(tail) = monitor.push(term.norm()) {
            return Ok(TruncatedValue { value: sum, tail_bound: tail, terms_used: k + 1 });
        }
    }
}

/// Sums `sum_k term(k)` for directly computed terms with the same stopping rule.
pub(crate) fn sum_direct<F>(mut term: F, floor: f64, tol: &ToleranceConfig, q: f64) -> Result<TruncatedValue>
where
    F: FnMut(usize) -> Result<C64>,
{
    let mut monitor = TailMonitor::new(floor, q, tol);
    let mut sum = c(0.0);
    for k in 0..tol.max_terms {
        let t = term(k)?;
        sum += t;
        if let Some(tail) = monitor.push(t.norm()) {
            return Ok(TruncatedValue { value: sum, tail_bound: tail, terms_used: monitor.count() });
        }
    }
    Err(QError::NonConvergence { terms: tol.max_terms })
}

fn divergence_reason(spec: &SeriesSpec) -> String {
    let r = spec.numerators.len();
    let s = spec.denominators.len();
    if spec.inverted {
        format!("{r}phi{s} in base 1/q outside |z| < |b_1..b_s q^-1| / |a_1..a_r|")
    } else if r == s + 1 {
        format!("{r}phi{s} requires |z| < 1, got |z| = {}", spec.z.norm())
    } else {
        format!("{r}phi{s} with r > s+1 diverges for z != 0 unless it terminates")
    }
}

/// Evaluates an `r phi s` series.
pub fn eval_rphis(spec: &SeriesSpec, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let class = classify(spec);
    if class == ConvergenceClass::Divergent {
        return Err(QError::Divergent(divergence_reason(spec)));
    }
    validate(spec)?;
    if let ConvergenceClass::Terminating(n) = class {
        return sum_terminating_dd(spec, n);
    }
    let beta = spec.base_value();
    let nums: Vec<C64> = spec.numerators.iter().map(|p| p.value_in(beta)).collect();
    let dens: Vec<C64> = spec.denominators.iter().map(|p| p.value_in(beta)).collect();
    let e = 1 + dens.len() as i32 - nums.len() as i32;
    let z = spec.z;
    let mut bn = 1.0f64;
    let ratio = |n: usize| -> Result<C64> {
        let mut num = z;
        for &a in &nums {
            num *= c(1.0) - a * bn;
        }
        let mut den = c(1.0 - bn * beta);
        for &b in &dens {
            den *= c(1.0) - b * bn;
        }
        if den.norm() == 0.0 {
            return Err(QError::Pole { what: "denominator factor".into(), index: n as i64 + 1 });
        }
        let sign = if e.rem_euclid(2) == 1 { -1.0 } else { 1.0 };
        let r = num / den * (sign * bn.powi(e));
        bn *= beta;
        Ok(r)
    };
    let terminating = match class {
        ConvergenceClass::Terminating(n) => Some(n),
        _ => None,
    };
    let floor = asymptotic_ratio(spec).unwrap_or(0.0);
    sum_by_ratio(ratio, terminating, floor, tol, spec.q.value())
}

/// Terminating sums can cancel by many orders of magnitude (`q^{-n}` factors grow
/// like `q^{-n^2/2}`), so both the terms and the sum are carried in double-double.
fn sum_terminating_dd(spec: &SeriesSpec, n: u32) -> Result<TruncatedValue> {
    let one = TwoFloat::from(1.0);
    let q = TwoFloat::from(spec.q.value());
    let beta = if spec.inverted { dd_div(one, q) } else { q };
    let inv_beta = if spec.inverted { q } else { dd_div(one, q) };
    let pow = |k: i64| -> TwoFloat {
        let (b, m) = if k >= 0 { (beta, k) } else { (inv_beta, -k) };
        (0..m).fold(one, |acc, _| acc * b)
    };
    let param = |p: &Param| -> Cdd {
        match *p {
            Param::Generic(v) => Cdd::new(v),
            Param::TerminatingPower(m) => Cdd { re: pow(-(m as i64)), im: TwoFloat::from(0.0) },
        }
    };
    let nums: Vec<Cdd> = spec.numerators.iter().map(param).collect();
    let dens: Vec<Cdd> = spec.denominators.iter().map(param).collect();
    let e = 1 + dens.len() as i64 - nums.len() as i64;
    let z = Cdd::new(spec.z);
    let mut term = Cdd::one();
    let mut sum = Cdd::one();
    let mut bk = one;
    for k in 0..n as usize {
        let mut num = z;
        for &a in &nums {
            num = num * (Cdd::one() - a.scale(bk));
        }
        let mut den = Cdd { re: one - bk * beta, im: TwoFloat::from(0.0) };
        for &b in &dens {
            den = den * (Cdd::one() - b.scale(bk));
        }
        if den.norm() == 0.0 {
            return Err(QError::Pole { what: "denominator factor".into(), index: k as i64 + 1 });
        }
        let mut power = (0..e.abs()).fold(one, |acc, _| acc * bk);
        if e < 0 {
            power = dd_div(one, power);
        }
        if e.rem_euclid(2) == 1 {
            power = -power;
        }
        term = term * num.div(den).scale(power);
        sum = sum + term;
        bk *= beta;
    }
    Ok(TruncatedValue { value: sum.to_c64(), tail_bound: 0.0, terms_used: n as usize + 1 })
}

/// Convenience for `2 phi 1(a, b; c; q, z)` with generic parameters.
pub fn phi21(a: C64, b: C64, cc: C64, q: Base, z: C64, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    eval_rphis(&SeriesSpec::generic(&[a, b], &[cc], q, z), tol)
}

/// Very-well-poised series `_{r+1}W_r(a1; a4, ..., a_{r+1}; q, z)`.
pub fn eval_vwp(a1: C64, rest: &[Param], q: Base, z: C64, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let qv = q.value();
    let degree = rest
        .iter()
        .filter_map(|p| match p {
            Param::TerminatingPower(n) => Some(*n),
            _ => None,
        })
        .min();
    if degree.is_none() && z.norm() >= 1.0 {
        return Err(QError::Divergent(format!("very-well-poised series requires |z| < 1, got {}", z.norm())));
    }
    if (c(1.0) - a1).norm() == 0.0 {
        return Err(QError::Pole { what: "1 - a1".into(), index: 0 });
    }
    let nums: Vec<C64> = rest.iter().map(|p| p.value_in(qv)).collect();
    let dens: Vec<C64> = rest
        .iter()
        .map(|p| match *p {
            Param::TerminatingPower(n) => a1 * qv.powi(n as i32 + 1),
            Param::Generic(v) => a1 * qv / v,
        })
        .collect();
    let ratio = |k: usize| -> Result<C64> {
        let qk = qv.powi(k as i32);
        let mut num = z * (c(1.0) - a1 * qk * qk * qv * qv) * (c(1.0) - a1 * qk);
        let mut den = (c(1.0) - a1 * qk * qk) * (1.0 - qk * qv);
        for (&a, &b) in nums.iter().zip(&dens) {
            num *= c(1.0) - a * qk;
            den *= c(1.0) - b * qk;
        }
        if den.norm() == 0.0 {
            return Err(QError::Pole { what: "very-well-poised denominator".into(), index: k as i64 + 1 });
        }
        Ok(num / den)
    };
    sum_by_ratio(ratio, degree, z.norm(), tol, qv)
}

/// Rewrites a series in the inverted base. Zero parameters are absorbed into the
/// balancing exponent and re-emitted as zero padding, so inversion is an involution
/// on specs whose zeros sit on one side only.
pub fn invert_base(spec: &SeriesSpec) -> Result<SeriesSpec> {
    let beta = spec.base_value();
    let mut nums = Vec::new();
    let mut dens = Vec::new();
    let (mut zn, mut zd) = (0i64, 0i64);
    let mut w = spec.z / beta;
    for p in &spec.numerators {
        match *p {
            Param::TerminatingPower(_) => {
                return Err(QError::Domain("terminating parameters cannot be carried through base inversion".into()))
            }
            Param::Generic(v) if v.norm() == 0.0 => zn += 1,
            Param::Generic(v) => {
                w *= v;
                nums.push(Param::Generic(c(1.0) / v));
            }
        }
    }
    for p in &spec.denominators {
        match *p {
            Param::TerminatingPower(_) => {
                return Err(QError::Domain("terminating parameters cannot be carried through base inversion".into()))
            }
            Param::Generic(v) if v.norm() == 0.0 => zd += 1,
            Param::Generic(v) => {
                w /= v;
                dens.push(Param::Generic(c(1.0) / v));
            }
        }
    }
    let shift = zn - zd - 1 - dens.len() as i64 + nums.len() as i64;
    for _ in 0..(-shift).max(0) {
        nums.push(Param::Generic(c(0.0)));
    }
    for _ in 0..shift.max(0) {
        dens.push(Param::Generic(c(0.0)));
    }
    Ok(SeriesSpec { numerators: nums, denominators: dens, q: spec.q, inverted: !spec.inverted, z: w })
}

/// Output of [`reverse_terminating`]: `original = prefactor * eval(spec)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reversed {
    pub spec: SeriesSpec,
    pub prefactor: C64,
}

/// Reverses the order of summation of a terminating series.
pub fn reverse_terminating(spec: &SeriesSpec) -> Result<Reversed> {
    if spec.inverted {
        return Err(QError::Domain("reversal is defined for base q series only".into()));
    }
    let term_idx: Vec<usize> =
        spec.numerators.iter().enumerate().filter(|(_, p)| matches!(p, Param::TerminatingPower(_))).map(|(i, _)| i).collect();
    if term_idx.len() != 1 {
        return Err(QError::Domain(format!("reversal needs exactly one terminating numerator, found {}", term_idx.len())));
    }
    let n = match spec.numerators[term_idx[0]] {
        Param::TerminatingPower(n) => n,
        Param::Generic(_) => unreachable!(),
    };
    let q = spec.q;
    let qv = q.value();
    let ni = n as i64;
    let mut a_vals = Vec::new();
    for (i, p) in spec.numerators.iter().enumerate() {
        if i == term_idx[0] {
            continue;
        }
        match *p {
            Param::Generic(v) if v.norm() > 0.0 => a_vals.push(v),
            _ => return Err(QError::Domain("reversal needs nonzero generic parameters".into())),
        }
    }
    let mut b_vals = Vec::new();
    for p in &spec.denominators {
        match *p {
            Param::Generic(v) if v.norm() > 0.0 => b_vals.push(v),
            _ => return Err(QError::Domain("reversal needs nonzero generic parameters".into())),
        }
    }
    if spec.z.norm() == 0.0 {
        return Err(QError::Domain("reversal needs z != 0".into()));
    }
    let r = a_vals.len() as i64;
    let s = b_vals.len() as i64;
    let shift = q.powi(1 - ni);
    let mut prefactor = (spec.z / qv).powi(n as i32);
    let sign_pow = if n % 2 == 1 { -1.0 } else { 1.0 } * qv.powi((ni * (ni - 1) / 2) as i32);
    prefactor *= sign_pow.powi((s - r - 1) as i32);
    let mut arg = spec.z.inv() * qv.powi(n as i32 + 1);
    for &a in &a_vals {
        prefactor *= qpoch_finite(a, q, ni)?;
        arg /= a;
    }
    for &b in &b_vals {
        prefactor /= qpoch_finite(b, q, ni)?;
        arg *= b;
    }
    let mut nums: Vec<Param> = b_vals.iter().map(|&b| Param::Generic(shift / b)).collect();
    nums.push(Param::TerminatingPower(n));
    let mut dens: Vec<Param> = a_vals.iter().map(|&a| Param::Generic(shift / a)).collect();
    // pad with zeros so the balancing factor of the standard definition cancels
    for _ in 0..(r - s).max(0) {
        nums.push(Param::Generic(c(0.0)));
    }
    for _ in 0..(s - r).max(0) {
        dens.push(Param::Generic(c(0.0)));
    }
    Ok(Reversed { spec: SeriesSpec::new(nums, dens, q, arg), prefactor })
}

/// q-integral `int_0^a f(t) d_q t = (1-q) a sum_k q^k f(a q^k)`.
pub fn qintegral<F>(f: F, a: f64, q: Base, tol: &ToleranceConfig) -> Result<TruncatedValue>
where
    F: Fn(f64) -> C64,
{
    if !(a > 0.0) {
        return Err(QError::Domain(format!("q-integral upper limit must be positive, got {a}")));
    }
    let qv = q.value();
    let scale = (1.0 - qv) * a;
    let sum = sum_direct(|k| Ok(f(a * qv.powi(k as i32)) * qv.powi(k as i32)), 0.0, tol, qv)?;
    Ok(sum.scale(c(scale)))
}

fn on_q_lattice(x: C64, q: Base) -> bool {
    crate::qcore::lattice_index(x, q, DEGENERACY_WINDOW).is_some()
}

/// Analytic continuation of `2 phi 1(a, b; c; q, z)` through two series in `cq/(abz)`.
pub fn continue_2phi1(a: C64, b: C64, cc: C64, q: Base, z: C64, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    if a.norm() == 0.0 || b.norm() == 0.0 || z.norm() == 0.0 {
        return Err(QError::Domain("a, b and z must be nonzero".into()));
    }
    if on_q_lattice(cc, q) {
        return Err(QError::Degenerate("c lies on the lattice q^Z".into()));
    }
    if on_q_lattice(a / b, q) {
        return Err(QError::Degenerate("a/b lies on the lattice q^Z".into()));
    }
    if z.re > 0.0 && z.im == 0.0 {
        return Err(QError::Region("requires |arg(-z)| < pi".into()));
    }
    let qv = q.value();
    let w = cc * qv / (a * b * z);
    if w.norm() >= 1.0 {
        return Err(QError::Region(format!("|cq/(abz)| = {} must be < 1", w.norm())));
    }
    let term = |a: C64, b: C64| -> Result<TruncatedValue> {
        let coef = qpoch_inf_all(&[b, cc / a], q)? * theta_value(a * z, q)? / (qpoch_inf_all(&[cc, b / a], q)? * theta_value(z, q)?);
        Ok(phi21(a, a * qv / cc, a * qv / b, q, w, tol)?.scale(coef))
    };
    Ok(term(a, b)? + term(b, a)?)
}

/// `2 phi 1(a, b; c; q, z)` away from the unit circle.
///
/// Four representations are tried in order of their expansion variable: the
/// power series in `z`, its continuation in `cq/(abz)`, and the same two for
/// the Heine-transformed series `(abz/c;q)_inf/(z;q)_inf 2phi1(c/a, c/b; c; q, abz/c)`.
pub fn phi21_auto(a: C64, b: C64, cc: C64, q: Base, z: C64, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    if z.norm() < 0.5 {
        return phi21(a, b, cc, q, z, tol);
    }
    let z2 = a * b * z / cc;
    let (a2, b2) = (cc / a, cc / b);
    let heine = |series: Result<TruncatedValue>| -> Result<TruncatedValue> {
        let pref = qpoch_inf_all(&[z2], q)? / qpoch_inf_all(&[z], q)?;
        if !(pref.re.is_finite() && pref.im.is_finite()) {
            let index = lattice_index(z, q, LATTICE_WINDOW).map_or(0, |k| -k);
            return Err(QError::Pole { what: "(z;q)_inf in the Heine prefactor".into(), index });
        }
        Ok(series?.scale(pref))
    };
    let w1 = (cc * q.value() / (a * b * z)).norm();
    let w2 = (cc * q.value() / (a2 * b2 * z2)).norm();
    let mut candidates = [(z.norm(), 0u8), (w1, 1), (z2.norm(), 2), (w2, 3)];
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut first_err = None;
    for (modulus, which) in candidates {
        if !(modulus < 1.0) {
            break;
        }
        let attempt = match which {
            0 => phi21(a, b, cc, q, z, tol),
            1 => continue_2phi1(a, b, cc, q, z, tol),
            2 => heine(phi21(a2, b2, cc, q, z2, tol)),
            _ => heine(continue_2phi1(a2, b2, cc, q, z2, tol)),
        };
        match attempt {
            Ok(v) => return Ok(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or_else(|| QError::Region(format!("no convergent representation of 2phi1 at z = {z}"))))
}

/// Named identities of the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identity {
    QBinomial,
    TerminatingQBinomial,
    ChuVandermonde,
    Heine1,
    Heine2,
    Heine3,
    Phi11Symmetry,
    Phi01Limit,
}

impl Identity {
    pub const ALL: [Identity; 8] = [
        Identity::QBinomial,
        Identity::TerminatingQBinomial,
        Identity::ChuVandermonde,
        Identity::Heine1,
        Identity::Heine2,
        Identity::Heine3,
        Identity::Phi11Symmetry,
        Identity::Phi01Limit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::QBinomial => "q-binomial",
            Identity::TerminatingQBinomial => "terminating-q-binomial",
            Identity::ChuVandermonde => "chu-vandermonde",
            Identity::Heine1 => "heine-1",
            Identity::Heine2 => "heine-2",
            Identity::Heine3 => "heine-3",
            Identity::Phi11Symmetry => "1phi1-symmetry",
            Identity::Phi01Limit => "0phi1-limit",
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Identity {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        Identity::ALL.iter().copied().find(|i| i.name() == s).ok_or_else(|| QError::UnknownIdentity(s.to_string()))
    }
}

/// Parameter point for an identity check. Each identity reads the fields it needs:
/// `a`, `b`, `c`, `z` and the degree `n` for the terminating ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityPoint {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub z: C64,
    pub n: u32,
    pub q: Base,
}

fn scaled(lhs: C64, rhs: C64) -> f64 {
    (lhs - rhs).norm() / (1.0 + lhs.norm() + rhs.norm())
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(QError::Region(what.to_string()))
    }
}

/// Both sides of an identity, evaluated with this module's routines.
pub fn identity_sides(id: Identity, p: &IdentityPoint, tol: &ToleranceConfig) -> Result<Vec<C64>> {
    let q = p.q;
    let qv = q.value();
    let one = c(1.0);
    let (a, b, cc, z) = (p.a, p.b, p.c, p.z);
    let phi = |num: &[C64], den: &[C64], arg: C64| -> Result<C64> { Ok(eval_rphis(&SeriesSpec::generic(num, den, q, arg), tol)?.value) };
    let inf = |xs: &[C64]| qpoch_inf_all(xs, q);
    Ok(match id {
        Identity::QBinomial => {
            require(z.norm() < 1.0, "q-binomial needs |z| < 1")?;
            vec![phi(&[a], &[], z)?, inf(&[a * z])? / inf(&[z])?]
        }
        Identity::TerminatingQBinomial => {
            let n = p.n;
            let lhs = eval_rphis(&SeriesSpec::new(vec![Param::TerminatingPower(n)], vec![], q, z), tol)?.value;
            vec![lhs, qpoch_finite(z * qv.powi(-(n as i32)), q, n as i64)?]
        }
        Identity::ChuVandermonde => {
            let n = p.n;
            let spec = SeriesSpec::new(vec![Param::TerminatingPower(n), Param::Generic(a)], vec![Param::Generic(cc)], q, c(qv));
            let lhs = eval_rphis(&spec, tol)?.value;
            let rhs = qpoch_finite(cc / a, q, n as i64)? / qpoch_finite(cc, q, n as i64)? * a.powi(n as i32);
            vec![lhs, rhs]
        }
        Identity::Heine1 => {
            require(z.norm() < 1.0 && b.norm() < 1.0, "Heine's transformation needs |z| < 1 and |b| < 1")?;
            let rhs = inf(&[b, a * z])? / inf(&[cc, z])? * phi(&[cc / b, z], &[a * z], b)?;
            vec![phi(&[a, b], &[cc], z)?, rhs]
        }
        Identity::Heine2 => {
            require(z.norm() < 1.0 && (cc / b).norm() < 1.0, "second Heine form needs |z| < 1 and |c/b| < 1")?;
            let rhs = inf(&[cc / b, b * z])? / inf(&[cc, z])? * phi(&[a * b * z / cc, b], &[b * z], cc / b)?;
            vec![phi(&[a, b], &[cc], z)?, rhs]
        }
        Identity::Heine3 => {
            let w = a * b * z / cc;
            require(z.norm() < 1.0 && w.norm() < 1.0, "Euler form needs |z| < 1 and |abz/c| < 1")?;
            let rhs = inf(&[w])? / inf(&[z])? * phi(&[cc / a, cc / b], &[cc], w)?;
            vec![phi(&[a, b], &[cc], z)?, rhs]
        }
        Identity::Phi11Symmetry => {
            let zero = c(0.0);
            vec![inf(&[cc])? * phi(&[zero], &[cc], z)?, inf(&[z])? * phi(&[zero], &[z], cc)?]
        }
        Identity::Phi01Limit => {
            let w = z / cc;
            require(w.norm() < 1.0, "limit form needs |z/c| < 1")?;
            let zero = c(0.0);
            vec![inf(&[cc])? * phi(&[], &[cc], z)?, inf(&[w, cc])? * phi(&[zero, zero], &[cc], w)?, phi(&[w], &[zero], cc)? * one]
        }
    })
}

/// Largest scaled residual `|L - R| / (1 + |L| + |R|)` between the identity's sides.
pub fn check_identity(name: &str, point: &IdentityPoint, tol: &ToleranceConfig) -> Result<f64> {
    let id: Identity = name.parse()?;
    let sides = identity_sides(id, point, tol)?;
    Ok(sides.windows(2).map(|w| scaled(w[0], w[1])).fold(0.0, f64::max))
}
