//! Doubly infinite Jacobi operator on l^2(Z) whose generalized eigenvectors
//! are 2phi1 functions: recurrence coefficients, the solutions at 0 and at
//! -infinity, the c-function, Wronskians, the Green kernel and the spectral
//! measure (absolutely continuous part on [-1, 1] plus atoms outside).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{QError, Result};
use crate::qcore::{c, lattice_index, Base, ToleranceConfig, TruncatedValue, C64};
use crate::series::phi21_auto;

/// Atoms whose weight for `e_0` drops below this fraction of the largest are dropped.
const ATOM_TRUNCATION: f64 = 1e-16;
/// Quadrature endpoint inset on (0, pi).
const ENDPOINT_INSET: f64 = 1e-8;
/// Relative change between dyadic trapezoid levels accepted as converged.
const QUAD_REL_TOL: f64 = 1e-8;
const QUAD_MAX_LEVEL: u32 = 14;
/// Relative window for lattice coincidences in the simple-zero check.
const LATTICE_WINDOW: f64 = 1e-9;

/// Parameters `(q, c, r, d)` with `r < 0`, `0 < c <= q^2`, `|d| < 1`, `|c/d| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub q: Base,
    pub c: f64,
    pub r: f64,
    pub d: f64,
}

impl SpectralParams {
    pub fn new(q: f64, c: f64, r: f64, d: f64) -> Result<Self> {
        let base = Base::new(q)?;
        if !(r < 0.0) {
            return Err(QError::Domain(format!("r = {r} must be negative")));
        }
        if !(c > 0.0) {
            return Err(QError::Domain(format!("c must satisfy 0<c≤q², got c = {c}")));
        }
        if c > q * q * (1.0 + 1e-15) {
            let why =
                if c < 1.0 { ": for q^2 < c < 1 the operator is not essentially self-adjoint and no extension is chosen" } else { "" };
            return Err(QError::Domain(format!("c must satisfy 0<c≤q², got c = {c}{why}")));
        }
        if !(d.abs() < 1.0 && d != 0.0 && (c / d).abs() < 1.0) {
            return Err(QError::Domain(format!("need 0 < |d| < 1 and |c/d| < 1, got d = {d}")));
        }
        let p = SpectralParams { q: base, c, r, d };
        for k in -200..=200 {
            let (a, _) = coeffs(k, &p);
            if !(a > 0.0) {
                return Err(QError::Domain(format!("a_{k} is not positive")));
            }
        }
        Ok(p)
    }

    /// `mu(y) = (y + 1/y)/2`.
    pub fn mu(y: C64) -> C64 {
        (y + y.inv()) * 0.5
    }

    /// The root of `mu(y) = z` with `|y| <= 1`.
    pub fn inverse_mu(z: C64) -> C64 {
        let s = (z * z - c(1.0)).sqrt();
        let y = z - s;
        if y.norm() <= 1.0 {
            y
        } else {
            z + s
        }
    }
}

/// Recurrence coefficients `(a_k, b_k)`.
pub fn coeffs(k: i64, p: &SpectralParams) -> (f64, f64) {
    let qk = p.q.powi(-k);
    let a = 0.5 * ((1.0 - qk / p.r) * (1.0 - p.c * qk / (p.d * p.d * p.r))).sqrt();
    let b = qk * (p.c + p.q.value()) / (2.0 * p.d * p.r);
    (a, b)
}

/// `prod_j prod_i (1 - n_i q^j) / prod_i (1 - d_i q^j)` accumulated factor by
/// factor, so quotients of individually huge products stay finite.
fn poch_ratio(nums: &[C64], dens: &[C64], q: Base, tol: &ToleranceConfig) -> Result<C64> {
    let qv = q.value();
    let mut acc = c(1.0);
    let mut qj = 1.0;
    for j in 0..tol.max_terms {
        let big = nums.iter().chain(dens).map(|x| x.norm() * qj).fold(0.0, f64::max);
        if big < tol.abs_tol * (1.0 - qv) && big < 0.5 {
            return Ok(acc);
        }
        let mut num = c(1.0);
        for &x in nums {
            num *= c(1.0) - x * qj;
        }
        let mut den = c(1.0);
        for &x in dens {
            den *= c(1.0) - x * qj;
        }
        if den.norm() == 0.0 {
            return Err(QError::Pole { what: "denominator q-shifted factorial".into(), index: j as i64 });
        }
        acc *= num / den;
        qj *= qv;
    }
    Err(QError::NonConvergence { terms: tol.max_terms })
}

/// The weight `w_k`, real, with `w_k^2 = d^{2k} (cq^{1-k}/(d^2 r);q)_inf / (q^{1-k}/r;q)_inf`.
pub fn weight(k: i64, p: &SpectralParams) -> Result<f64> {
    let q1k = p.q.powi(1 - k);
    let ratio = poch_ratio(&[c(p.c * q1k / (p.d * p.d * p.r))], &[c(q1k / p.r)], p.q, &ToleranceConfig::default())?;
    Ok(p.d.powi(k as i32) * ratio.re.sqrt())
}

/// The three families of eigenvectors of the recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eigenvector {
    /// `w_k f_k(mu(y))`, square summable at `+inf`.
    Regular,
    /// `w_k g_k(mu(y))`.
    Secondary,
    /// `w_k F_k(y)`, with plane-wave behaviour `y^k` at `-inf`.
    Asymptotic,
}

/// `u_k` for the chosen eigenvector at eigenvalue `mu(y)`.
pub fn solution(which: Eigenvector, k: i64, y: C64, p: &SpectralParams, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let q = p.q;
    let qv = q.value();
    let (cc, r, d) = (c(p.c), p.r, p.d);
    let rqk = c(r * q.powi(k));
    let raw = match which {
        Eigenvector::Regular => phi21_auto(y * d, y.inv() * d, cc, q, rqk, tol)?,
        Eigenvector::Secondary => {
            let pref = c((qv / p.c).powi(k as i32));
            phi21_auto(y * (qv * d / p.c), y.inv() * (qv * d / p.c), c(qv * qv / p.c), q, rqk, tol)?.scale(pref)
        }
        Eigenvector::Asymptotic => {
            if lattice_index(y * y * qv, q, LATTICE_WINDOW).is_some_and(|m| m <= 0) {
                return Err(QError::Degenerate("y^2 lies in q^{-N}".into()));
            }
            let arg = c(q.powi(1 - k) * p.c / (d * d * r));
            let pref = (y * d).powi(-(k as i32));
            phi21_auto(y * d, y * (qv * d / p.c), y * y * qv, q, arg, tol)?.scale(pref)
        }
    };
    Ok(raw.scale(c(weight(k, p)?)))
}

/// The c-function `c(y) = (c/(dy), d/y, dry, q/(dry);q)_inf / (y^{-2}, c, r, q/r;q)_inf`.
pub fn cfun(y: C64, p: &SpectralParams) -> Result<C64> {
    if y.norm() == 0.0 {
        return Err(QError::Domain("c(y) needs y != 0".into()));
    }
    let (cc, r, d, qv) = (p.c, p.r, p.d, p.q.value());
    let nums = [y.inv() * (cc / d), y.inv() * d, y * (d * r), y.inv() * (qv / (d * r))];
    let dens = [(y * y).inv(), c(cc), c(r), c(qv / r)];
    poch_ratio(&nums, &dens, p.q, &ToleranceConfig::default())
}

/// Casorati determinant `a_k (u_{k+1} v_k - u_k v_{k+1})`.
pub fn wronskian<U, V>(u: U, v: V, k: i64, p: &SpectralParams) -> Result<C64>
where
    U: Fn(i64) -> Result<C64>,
    V: Fn(i64) -> Result<C64>,
{
    let (a, _) = coeffs(k, p);
    Ok((u(k + 1)? * v(k)? - u(k)? * v(k + 1)?) * a)
}

/// A finitely supported sequence on Z.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DoublySeq {
    values: BTreeMap<i64, C64>,
}

impl DoublySeq {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, C64)>) -> Self {
        DoublySeq { values: pairs.into_iter().collect() }
    }

    pub fn get(&self, k: i64) -> C64 {
        self.values.get(&k).copied().unwrap_or(c(0.0))
    }

    pub fn set(&mut self, k: i64, v: C64) {
        self.values.insert(k, v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    /// `(L - z) v`.
    pub fn apply_shifted(&self, z: C64, p: &SpectralParams) -> DoublySeq {
        let (Some(&lo), Some(&hi)) = (self.values.keys().next(), self.values.keys().next_back()) else {
            return DoublySeq::new();
        };
        let mut out = DoublySeq::new();
        for k in lo - 1..=hi + 1 {
            let (a, b) = coeffs(k, p);
            let (am, _) = coeffs(k - 1, p);
            let v = self.get(k + 1) * a + self.get(k) * (c(b) - z) + self.get(k - 1) * am;
            out.set(k, v);
        }
        out
    }
}

/// Green kernel `G_{k,l}(z)` of the resolvent `(L - z)^{-1}` for `Im z != 0`.
pub fn green_kernel(z: C64, k: i64, l: i64, p: &SpectralParams, tol: &ToleranceConfig) -> Result<C64> {
    if z.im == 0.0 {
        return Err(QError::Domain("the Green kernel needs Im z != 0".into()));
    }
    let y = SpectralParams::inverse_mu(z);
    let phi = |j: i64| Ok(solution(Eigenvector::Regular, j, y, p, tol)?.value);
    let big_phi = |j: i64| Ok(solution(Eigenvector::Asymptotic, j, y, p, tol)?.value);
    let wr = wronskian(phi, big_phi, 0, p)?;
    if wr.norm() == 0.0 || !wr.norm().is_finite() {
        return Err(QError::Degenerate(format!("Wronskian [phi, Phi] vanishes at z = {z}")));
    }
    let (lo, hi) = if k <= l { (k, l) } else { (l, k) };
    Ok(big_phi(lo)? * phi(hi)? / wr)
}

/// One mass point of the spectral measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// Index `p` with `y_p = q^p/(dr)`.
    pub index: i64,
    pub y: f64,
    /// Location `mu(y_p)`.
    pub point: f64,
    /// `Res_{y = y_p} 1/(c(1/y) c(y) y)`.
    pub mass: f64,
}

/// Absolutely continuous density in `chi` plus the atoms outside [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    pub params: SpectralParams,
    pub atoms: Vec<Atom>,
}

impl SpectralMeasure {
    /// `1/(2 pi |c(e^{i chi})|^2)` on `chi in (0, pi)`.
    pub fn density(&self, chi: f64) -> Result<f64> {
        let cv = cfun(C64::from_polar(1.0, chi), &self.params)?;
        Ok(1.0 / (2.0 * PI * cv.norm_sqr()))
    }

    /// `n` equispaced `(chi, density)` samples strictly inside (0, pi).
    pub fn density_samples(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        (1..=n)
            .map(|i| {
                let chi = PI * i as f64 / (n + 1) as f64;
                Ok((chi, self.density(chi)?))
            })
            .collect()
    }
}

/// Residue of `1/(c(1/y) c(y) y)` at the simple zero `y_p = q^p/(dr)` of `c`.
/// The vanishing factor of `(dry, q/(dry);q)_inf` is divided out analytically.
pub fn atom_mass(index: i64, p: &SpectralParams) -> Result<f64> {
    let (cc, r, d, qv) = (p.c, p.r, p.d, p.q.value());
    let y = p.q.powi(index) / (d * r);
    let tol = ToleranceConfig::default();
    let yc = c(y);
    // Product of all numerator factors except the vanishing one, over the denominator.
    let mut nums = vec![yc.inv() * (cc / d), yc.inv() * d];
    let dens = [(yc * yc).inv(), c(cc), c(r), c(qv / r)];
    let (dry, qdry) = (c(d * r * y), c(qv / (d * r * y)));
    let rest = if index <= 0 {
        // (dry;q)_inf vanishes at factor j = -index; d/dy (1 - dry q^j) = -1/y_p.
        let skip = (-index) as usize;
        let head = crate::qcore::qpoch_finite(dry, p.q, skip as i64)?;
        nums.push(qdry);
        let tail = poch_ratio(&[nums[0], nums[1], qdry, dry * p.q.powi(skip as i64 + 1)], &dens, p.q, &tol)?;
        -(head * tail)
    } else {
        // (q/(dry);q)_inf vanishes at factor j = index - 1; d/dy (1 - y_p/y) = 1/y_p.
        let skip = (index - 1) as usize;
        let head = crate::qcore::qpoch_finite(qdry, p.q, skip as i64)?;
        let tail = poch_ratio(&[nums[0], nums[1], dry, qdry * p.q.powi(skip as i64 + 1)], &dens, p.q, &tol)?;
        head * tail
    };
    let c_dual = cfun(yc.inv(), p)?;
    if rest.norm() == 0.0 || c_dual.norm() == 0.0 {
        return Err(QError::Genericity(format!(
            "zero of c at y_{index} = {y} is not simple or c(1/y) also vanishes; perturb the parameters"
        )));
    }
    Ok((c(1.0) / (c_dual * rest)).re)
}

/// Checks the simple-zero hypothesis at `y_p`: no other numerator factor of
/// `c(y)` vanishes there.
fn check_simple_zero(y: f64, p: &SpectralParams) -> Result<()> {
    for (name, x) in [("c/(dy)", p.c / (p.d * y)), ("d/y", p.d / y)] {
        if let Some(m) = lattice_index(c(x), p.q, LATTICE_WINDOW) {
            if m <= 0 {
                return Err(QError::Genericity(format!("{name} = {x} makes the zero at y = {y} non-simple; perturb the parameters")));
            }
        }
    }
    Ok(())
}

/// `w_k f_k(x_p)` at an atom, written as `w_k c(1/y_p) F_k(1/y_p)` because `c(y_p) = 0`.
/// This avoids the cancellation in the 2phi1 with the large parameter `d y_p`.
pub fn regular_at_atom(k: i64, atom: &Atom, p: &SpectralParams, tol: &ToleranceConfig) -> Result<f64> {
    let yi = c(1.0 / atom.y);
    let big = solution(Eigenvector::Asymptotic, k, yi, p, tol)?.value;
    Ok((cfun(yi, p)? * big).re)
}

/// The spectral measure of the self-adjoint operator.
pub fn spectral_measure(p: &SpectralParams) -> Result<SpectralMeasure> {
    let tol = ToleranceConfig::default();
    let (qv, dr) = (p.q.value(), p.d * p.r);
    // |q^p/(dr)| > 1 iff p < ln|dr|/ln q; atoms sit at p <= p_max.
    let bound = dr.abs().ln() / qv.ln();
    let mut p_max = bound.ceil() as i64 - 1;
    if (p.q.powi(p_max) / dr).abs() <= 1.0 {
        p_max -= 1;
    }
    let mut atoms = Vec::new();
    let mut best = 0.0f64;
    let mut index = p_max;
    loop {
        let y = p.q.powi(index) / dr;
        if (y.abs() - 1.0).abs() > 1e-12 {
            check_simple_zero(y, p)?;
            let mass = atom_mass(index, p)?;
            if !(mass > 0.0) {
                return Err(QError::Genericity(format!("nonpositive mass {mass} at y_{index}")));
            }
            let atom = Atom { index, y, point: 0.5 * (y + 1.0 / y), mass };
            let e0 = mass * regular_at_atom(0, &atom, p, &tol)?.powi(2);
            if !e0.is_finite() {
                break;
            }
            best = best.max(e0);
            if e0 < ATOM_TRUNCATION * best {
                break;
            }
            atoms.push(atom);
        }
        index -= 1;
        if p_max - index > 2000 {
            return Err(QError::NonConvergence { terms: 2000 });
        }
    }
    Ok(SpectralMeasure { params: *p, atoms })
}

/// Orthogonality residuals `|w_k w_l (int f_k f_l dE) - delta_kl|` for every
/// pair in `ks x ks`, scaled so the diagonal target is 1.
pub fn orthogonality_residuals(ks: &[i64], p: &SpectralParams, tol: &ToleranceConfig) -> Result<Vec<((i64, i64), f64)>> {
    let measure = spectral_measure(p)?;
    let n = ks.len();
    // Integrand at chi: density(chi) * (w_k f_k(cos chi)) (w_l f_l(cos chi)).
    let sample = |chi: f64| -> Result<Vec<f64>> {
        let y = C64::from_polar(1.0, chi);
        let dens = measure.density(chi)?;
        let f: Vec<f64> = ks.iter().map(|&k| Ok(solution(Eigenvector::Regular, k, y, p, tol)?.value.re)).collect::<Result<_>>()?;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = dens * f[i] * f[j];
            }
        }
        Ok(out)
    };
    let (lo, hi) = (ENDPOINT_INSET, PI - ENDPOINT_INSET);
    let mut panels = 16usize;
    let mut h = (hi - lo) / panels as f64;
    let mut sum = vec![0.0; n * n];
    for (i, v) in sample(lo)?.into_iter().zip(sample(hi)?).enumerate() {
        sum[i] = 0.5 * (v.0 + v.1);
    }
    for m in 1..panels {
        for (s, v) in sum.iter_mut().zip(sample(lo + h * m as f64)?) {
            *s += v;
        }
    }
    let mut estimate: Vec<f64> = sum.iter().map(|s| s * h).collect();
    let mut converged = false;
    for _ in 0..QUAD_MAX_LEVEL {
        for m in 0..panels {
            for (s, v) in sum.iter_mut().zip(sample(lo + h * (m as f64 + 0.5))?) {
                *s += v;
            }
        }
        panels *= 2;
        h *= 0.5;
        let next: Vec<f64> = sum.iter().map(|s| s * h).collect();
        let scale = next.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let change = next.iter().zip(&estimate).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        estimate = next;
        if change <= QUAD_REL_TOL * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(QError::Quadrature(format!("trapezoid rule not settled after {panels} panels")));
    }
    let mut discrete = vec![0.0; n * n];
    for atom in &measure.atoms {
        let f: Vec<f64> = ks.iter().map(|&k| regular_at_atom(k, atom, p, tol)).collect::<Result<_>>()?;
        for i in 0..n {
            for j in 0..n {
                discrete[i * n + j] += atom.mass * f[i] * f[j];
            }
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let total = estimate[i * n + j] + discrete[i * n + j];
            let target = if ks[i] == ks[j] { 1.0 } else { 0.0 };
            out.push(((ks[i], ks[j]), (total - target).abs()));
        }
    }
    Ok(out)
}

/// Orthogonality residual for the pair `(k, l)`; see [`orthogonality_residuals`].
pub fn check_orthogonality(k: i64, l: i64, p: &SpectralParams, tol: &ToleranceConfig) -> Result<f64> {
    let ks = if k == l { vec![k] } else { vec![k, l] };
    let all = orthogonality_residuals(&ks, p, tol)?;
    Ok(all.into_iter().find(|((a, b), _)| *a == k && *b == l).map(|(_, r)| r).unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> SpectralParams {
        SpectralParams::new(0.5, 0.2, -1.0, 0.4).unwrap()
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn u(which: Eigenvector, y: C64) -> impl Fn(i64) -> Result<C64> {
        move |k| Ok(solution(which, k, y, &example(), &tol())?.value)
    }

    #[test]
    fn coefficient_limits() {
        let p = example();
        let (a, _) = coeffs(-40, &p);
        assert!((a - 0.5).abs() < 1e-10);
        for k in -50..=50 {
            assert!(coeffs(k, &p).0 > 0.0);
        }
        assert!((coeffs(0, &p).1 + 0.875).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_self_adjoint_regime() {
        let err = SpectralParams::new(0.5, 0.5, -1.0, 0.6).unwrap_err();
        assert!(matches!(err, QError::Domain(_)));
        assert!(SpectralParams::new(0.5, 0.2, 1.0, 0.4).is_err());
        assert!(SpectralParams::new(0.5, 0.2, -1.0, 0.1).is_err());
    }

    #[test]
    fn weight_matches_oracle() {
        let w0 = weight(0, &example()).unwrap();
        assert!((w0 * w0 - 1.2045429024716127).abs() < 1e-13);
    }

    #[test]
    fn solutions_satisfy_recurrence() {
        let p = example();
        let y = C64::from_polar(0.3, 0.4);
        let z = SpectralParams::mu(y);
        for which in [Eigenvector::Regular, Eigenvector::Secondary, Eigenvector::Asymptotic] {
            let f = u(which, y);
            for k in -5..=5 {
                let (a, b) = coeffs(k, &p);
                let (am, _) = coeffs(k - 1, &p);
                let lhs = z * f(k).unwrap();
                let rhs = f(k + 1).unwrap() * a + f(k).unwrap() * b + f(k - 1).unwrap() * am;
                let scale = 1.0 + lhs.norm() + rhs.norm();
                assert!((lhs - rhs).norm() / scale < 1e-9, "{which:?} k={k}: {}", (lhs - rhs).norm());
            }
        }
    }

    #[test]
    fn asymptotic_solution_is_plane_wave() {
        let p = example();
        let y = C64::from_polar(0.3, 0.4);
        let k = 30;
        let big = solution(Eigenvector::Asymptotic, -k, y, &p, &tol()).unwrap().value / weight(-k, &p).unwrap();
        let ratio = big * (y * p.d).powi(-(k as i32));
        assert!((ratio - c(1.0)).norm() < 1e-8);
    }

    #[test]
    fn regular_solution_symmetric_in_y() {
        let y = C64::from_polar(0.3, 0.4);
        for k in [-3, 0, 2] {
            let a = u(Eigenvector::Regular, y)(k).unwrap();
            let b = u(Eigenvector::Regular, y.inv())(k).unwrap();
            assert!((a - b).norm() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn cfun_matches_oracle_and_expansion() {
        let p = example();
        let y = C64::from_polar(0.4, 0.7);
        let cv = cfun(y, &p).unwrap();
        let want = C64::new(-0.010_570_095_047_960_774, -0.009_408_804_227_102_833);
        assert!((cv - want).norm() < 1e-14);
        let k = -8;
        let f = u(Eigenvector::Regular, y)(k).unwrap();
        let expanded =
            cv * u(Eigenvector::Asymptotic, y)(k).unwrap() + cfun(y.inv(), &p).unwrap() * u(Eigenvector::Asymptotic, y.inv())(k).unwrap();
        assert!((f - expanded).norm() < 1e-8 * (1.0 + f.norm()));
    }

    #[test]
    fn cfun_zeros_on_dr_lattice() {
        let p = example();
        for m in -3..=3 {
            let y = p.q.powi(m) / (p.d * p.r);
            let v = cfun(c(y), &p).unwrap();
            let scale = cfun(c(y * 1.01), &p).unwrap().norm();
            assert!(v.norm() < 1e-10 * scale.max(1.0), "m={m}");
        }
        // The other two zero families sit inside the unit disc.
        for k in 0..10 {
            assert!((p.c / p.d * p.q.powi(k)).abs() < 1.0);
            assert!((p.d * p.q.powi(k)).abs() < 1.0);
        }
    }

    #[test]
    fn wronskians() {
        let p = example();
        let y = C64::from_polar(0.3, 0.4);
        let big = u(Eigenvector::Asymptotic, y);
        let big_dual = u(Eigenvector::Asymptotic, y.inv());
        let reg = u(Eigenvector::Regular, y);
        assert_eq!(wronskian(&big, &big, 2, &p).unwrap(), c(0.0));
        let w = wronskian(&big, &big_dual, -30, &p).unwrap();
        assert!((w - (y.inv() - y) * 0.5).norm() < 1e-8);
        let w = wronskian(&reg, &big, 0, &p).unwrap();
        let want = cfun(y.inv(), &p).unwrap() * (y - y.inv()) * 0.5;
        assert!((w - want).norm() < 1e-8 * (1.0 + want.norm()));
    }

    #[test]
    fn wronskian_constant_in_k() {
        let p = example();
        let pairs = [
            (Eigenvector::Regular, Eigenvector::Asymptotic),
            (Eigenvector::Secondary, Eigenvector::Regular),
            (Eigenvector::Secondary, Eigenvector::Asymptotic),
        ];
        // Off the unit circle both members of a pair may grow like y^k at -inf,
        // so the drift is measured against the size of the products that cancel.
        for (y, relative) in [(C64::from_polar(0.5, 1.1), true), (C64::from_polar(1.0, 0.9), false)] {
            for (a, b) in pairs {
                let (fa, fb) = (u(a, y), u(b, y));
                let w0 = wronskian(&fa, &fb, 0, &p).unwrap();
                for k in -20..=10 {
                    let wk = wronskian(&fa, &fb, k, &p).unwrap();
                    let (ak, _) = coeffs(k, &p);
                    let terms = ak * (fa(k + 1).unwrap() * fb(k).unwrap()).norm();
                    let scale = if relative { 1.0 + terms } else { 1.0 };
                    assert!((wk - w0).norm() < 1e-9 * scale, "{a:?}/{b:?} y={y} k={k}: {}", (wk - w0).norm());
                }
            }
        }
    }

    #[test]
    fn green_kernel_symmetry_and_resolvent() {
        let p = example();
        let z = C64::new(0.3, 0.2);
        let g = |k, l| green_kernel(z, k, l, &p, &tol()).unwrap();
        assert_eq!(g(-2, 3), g(3, -2));
        let gc = green_kernel(z.conj(), 1, 4, &p, &tol()).unwrap();
        assert!((gc - g(1, 4).conj()).norm() < 1e-12 * gc.norm());
        let v = DoublySeq::from_pairs([(-3, c(1.0)), (0, C64::new(0.5, -1.0)), (4, c(2.0))]);
        let lv = v.apply_shifted(z, &p);
        for k in -10..=10 {
            let mut acc = c(0.0);
            for (l, x) in lv.iter() {
                acc += g(k, l) * x;
            }
            assert!((acc - v.get(k)).norm() < 1e-8, "k={k}: {acc}");
        }
    }

    #[test]
    fn atoms_positive_outside_unit_interval() {
        let p = example();
        let m = spectral_measure(&p).unwrap();
        assert!(!m.atoms.is_empty());
        for a in &m.atoms {
            assert!(a.mass > 0.0);
            assert!(a.y.abs() > 1.0);
            assert!(a.point.abs() > 1.0);
        }
        let first = m.atoms[0];
        assert_eq!(first.index, 1);
        assert!((first.point + 1.025).abs() < 1e-14);
        assert!((first.mass - 9.445_393_085_743_218).abs() < 1e-9 * first.mass);
        assert!((m.atoms[2].mass - 214.2634947094817).abs() < 1e-9 * 214.0);
    }

    fn contour_residue(index: i64, p: &SpectralParams) -> C64 {
        let y0 = p.q.powi(index) / (p.d * p.r);
        let rad = 1e-4 * y0.abs();
        let n = 64;
        let mut acc = c(0.0);
        for j in 0..n {
            let e = C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
            let y = c(y0) + e * rad;
            let g = c(1.0) / (cfun(y.inv(), p).unwrap() * cfun(y, p).unwrap() * y);
            acc += g * e * rad;
        }
        acc / n as f64
    }

    #[test]
    fn residues_agree_with_contour() {
        let p = example();
        for index in [1, 0, -1] {
            let closed = atom_mass(index, &p).unwrap();
            let contour = contour_residue(index, &p);
            assert!((contour - c(closed)).norm() < 1e-6 * closed.abs(), "p={index}");
        }
    }

    #[test]
    fn density_is_conjugation_symmetric() {
        let p = example();
        for chi in [0.2, 1.0, 2.5] {
            let a = cfun(C64::from_polar(1.0, chi), &p).unwrap().norm();
            let b = cfun(C64::from_polar(1.0, -chi), &p).unwrap().norm();
            assert!((a - b).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn completeness_and_orthogonality() {
        let p = example();
        let res = orthogonality_residuals(&[-2, 0, 1, 3], &p, &tol()).unwrap();
        for ((k, l), r) in res {
            assert!(r < 1e-6, "({k},{l}): {r}");
        }
    }
}
