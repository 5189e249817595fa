//! The vector-valued q-hypergeometric equation
//!
//! `(q - z) u(z/q) + ((A + B) z - C - q) u(z) + (C - AB z) u(qz) = 0`
//!
//! with noncommuting `A, B, C`: ordered matrix Pochhammer products, the
//! matrix series `2Phi1^alpha` and `Theta^alpha`, and the 2N local solutions
//! at 0 and at infinity.
//!
//! Ordered products put the factor with the largest index on the left.

use nalgebra::{DMatrix, DVector};

use crate::error::{QError, Result};
use crate::qcore::{c, cpow, lattice_index, log_q, Base, ToleranceConfig, C64, EPS};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Log-window for "lies on q^Z" tests on eigenvalues and their ratios.
const LATTICE_WINDOW: f64 = 1e-8;
/// Required eigen-residual `|Mv - lambda v| / |M|`.
const EIGEN_RESIDUAL: f64 = 1e-10;
/// Relative size below which a factor `1 - x` counts as vanishing.
const POLE_TOL: f64 = 1e-12;
/// Kernel test threshold for termination detection.
const KERNEL_TOL: f64 = 1e-10;

/// Eigenvalues with unit right eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenData {
    pub values: Vec<C64>,
    pub vectors: Vec<CVec>,
}

/// Eigen-decomposition by a Schur pass for the values and the smallest
/// singular vector of `M - lambda` for each vector.
pub fn eigen(m: &CMat, what: &str) -> Result<EigenData> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(QError::Domain(format!("{what} must be a nonempty square matrix")));
    }
    let values: Vec<C64> = m
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| QError::Degenerate(format!("Schur form of {what} did not triangularize")))?
        .iter()
        .copied()
        .collect();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let mut vectors = Vec::with_capacity(n);
    for &lambda in &values {
        let shifted = m - CMat::identity(n, n) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let v: CVec = v_t.row(n - 1).adjoint();
        let res = (m * &v - &v * lambda).norm();
        if res > EIGEN_RESIDUAL * scale {
            return Err(QError::Degenerate(format!("eigenvector of {what} for {lambda} has residual {res:.2e}")));
        }
        vectors.push(v);
    }
    Ok(EigenData { values, vectors })
}

fn lattice(x: C64, q: Base) -> Option<i64> {
    lattice_index(x, q, LATTICE_WINDOW)
}

fn same(x: C64, y: C64) -> bool {
    (x - y).norm() <= LATTICE_WINDOW * x.norm().max(y.norm())
}

fn check_distinct_nonzero(e: &EigenData, name: &str) -> std::result::Result<(), String> {
    for (i, &x) in e.values.iter().enumerate() {
        if x.norm() < 1e-300 {
            return Err(format!("{name} has eigenvalue 0"));
        }
        for &y in &e.values[i + 1..] {
            if same(x, y) {
                return Err(format!("{name} has a repeated eigenvalue {x}"));
            }
        }
    }
    Ok(())
}

/// Is some `x / y` equal to `q^k` with `k >= 1`, for `x` in `xs`, `y` in `ys`?
fn shifted_hit(xs: &[C64], ys: &[C64], q: Base) -> Option<(C64, C64, i64)> {
    for &x in xs {
        for &y in ys {
            if let Some(k) = lattice(x / y, q) {
                if k >= 1 {
                    return Some((x, y, k));
                }
            }
        }
    }
    None
}

fn zero_violation(cc: &std::result::Result<EigenData, QError>, q: Base) -> Option<String> {
    let e = match cc {
        Ok(e) => e,
        Err(err) => return Some(format!("C is not diagonalizable to tolerance: {err}")),
    };
    if let Err(msg) = check_distinct_nonzero(e, "C") {
        return Some(msg);
    }
    for (i, &ci) in e.values.iter().enumerate() {
        if let Some(k) = lattice(ci, q) {
            return Some(format!("eigenvalue {ci} of C lies on q^Z (q^{k})"));
        }
        for (j, &cj) in e.values.iter().enumerate() {
            if i != j {
                if let Some(k) = lattice(ci / cj, q) {
                    return Some(format!("eigenvalues {ci}, {cj} of C have ratio q^{k}"));
                }
            }
        }
    }
    None
}

fn infinity_violation(a: &std::result::Result<EigenData, QError>, b: &std::result::Result<EigenData, QError>, q: Base) -> Option<String> {
    let (ea, eb) = match (a, b) {
        (Ok(ea), Ok(eb)) => (ea, eb),
        (Err(err), _) => return Some(format!("A is not diagonalizable to tolerance: {err}")),
        (_, Err(err)) => return Some(format!("B is not diagonalizable to tolerance: {err}")),
    };
    if let Err(msg) = check_distinct_nonzero(ea, "A").and(check_distinct_nonzero(eb, "B")) {
        return Some(msg);
    }
    for &x in &ea.values {
        for &y in &eb.values {
            if same(x, y) {
                return Some(format!("A and B share the eigenvalue {x}"));
            }
        }
    }
    let (sa, sb) = (&ea.values, &eb.values);
    let checks = [
        (sa, sb, "sigma(A) meets sigma(B) q^{1+N}"),
        (sb, sb, "sigma(B) meets sigma(B) q^{1+N}"),
        // The second family (built on eigenvalues of A) needs the mirrored pair.
        (sb, sa, "sigma(B) meets sigma(A) q^{1+N}"),
        (sa, sa, "sigma(A) meets sigma(A) q^{1+N}"),
    ];
    for (xs, ys, msg) in checks {
        if let Some((x, y, k)) = shifted_hit(xs, ys, q) {
            return Some(format!("{msg}: {x} = {y} q^{k}"));
        }
    }
    None
}

/// The coefficient matrices of the equation together with their spectra.
#[derive(Debug, Clone)]
pub struct MatrixTriple {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub q: Base,
    eig_a: std::result::Result<EigenData, QError>,
    eig_b: std::result::Result<EigenData, QError>,
    eig_c: std::result::Result<EigenData, QError>,
    /// Why the solutions at 0 are unavailable, if they are.
    pub zero_violation: Option<String>,
    /// Why the solutions at infinity are unavailable, if they are.
    pub infinity_violation: Option<String>,
}

impl MatrixTriple {
    pub fn new(a: CMat, b: CMat, cc: CMat, q: Base) -> Result<Self> {
        let n = a.nrows();
        for (m, name) in [(&a, "A"), (&b, "B"), (&cc, "C")] {
            if m.nrows() != n || m.ncols() != n || n == 0 {
                return Err(QError::Domain(format!("{name} must be {n}x{n}")));
            }
        }
        let eig_a = eigen(&a, "A");
        let eig_b = eigen(&b, "B");
        let eig_c = eigen(&cc, "C");
        let zero_violation = zero_violation(&eig_c, q);
        let infinity_violation = infinity_violation(&eig_a, &eig_b, q);
        Ok(MatrixTriple { a, b, c: cc, q, eig_a, eig_b, eig_c, zero_violation, infinity_violation })
    }

    /// Simultaneously diagonal triple with the given spectra.
    pub fn diagonal(a: &[C64], b: &[C64], cc: &[C64], q: Base) -> Result<Self> {
        let d = |v: &[C64]| CMat::from_diagonal(&CVec::from_column_slice(v));
        MatrixTriple::new(d(a), d(b), d(cc), q)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// The same equation with the roles of `A` and `B` exchanged in the
    /// ordered products.
    pub fn swapped(&self) -> MatrixTriple {
        MatrixTriple {
            a: self.b.clone(),
            b: self.a.clone(),
            eig_a: self.eig_b.clone(),
            eig_b: self.eig_a.clone(),
            infinity_violation: infinity_violation(&self.eig_b, &self.eig_a, self.q),
            ..self.clone()
        }
    }

    pub fn eigen_a(&self) -> Result<&EigenData> {
        self.eig_a.as_ref().map_err(Clone::clone)
    }

    pub fn eigen_b(&self) -> Result<&EigenData> {
        self.eig_b.as_ref().map_err(Clone::clone)
    }

    pub fn eigen_c(&self) -> Result<&EigenData> {
        self.eig_c.as_ref().map_err(Clone::clone)
    }

    /// The equation in `(U, V)` form with `U = A + B`, `V = AB`.
    pub fn equation(&self) -> UvEquation {
        UvEquation { u: &self.a + &self.b, v: &self.a * &self.b, c: self.c.clone(), q: self.q }
    }
}

/// The equation with `A + B` and `AB` replaced by general `U` and `V`.
#[derive(Debug, Clone)]
pub struct UvEquation {
    pub u: CMat,
    pub v: CMat,
    pub c: CMat,
    pub q: Base,
}

impl UvEquation {
    /// Residual of `u` at `z`, scaled by the size of the three terms:
    /// `|t1 + t2 + t3| / (1 + |t1| + |t2| + |t3|)` with `t1 = (q - z) u(z/q)`,
    /// `t2 = (Uz - C - q) u(z)`, `t3 = (C - Vz) u(qz)`. Frobenius norms, so
    /// vector and matrix unknowns are handled alike.
    pub fn residual<F>(&self, u: F, z: C64) -> Result<f64>
    where
        F: Fn(C64) -> Result<CMat>,
    {
        let qv = self.q.value();
        let n = self.c.nrows();
        let id = CMat::identity(n, n);
        let lo = u(z / qv)?;
        let mid = u(z)?;
        let hi = u(z * qv)?;
        let t1 = lo * (c(qv) - z);
        let t2 = (&self.u * z - &self.c - &id * c(qv)) * mid;
        let t3 = (&self.c - &self.v * z) * hi;
        let size = 1.0 + t1.norm() + t2.norm() + t3.norm();
        Ok((t1 + t2 + t3).norm() / size)
    }
}

/// Residual of a vector function under the equation of `t`.
pub fn residual<F>(t: &MatrixTriple, u: F, z: C64) -> Result<f64>
where
    F: Fn(C64) -> Result<CVec>,
{
    t.equation().residual(|w| u(w).map(|v| CMat::from_column_slice(v.len(), 1, v.as_slice())), z)
}

fn solve(m: &CMat, rhs: &CMat, what: &str, index: i64) -> Result<CMat> {
    m.clone().lu().solve(rhs).ok_or_else(|| QError::Pole { what: what.into(), index })
}

fn vanishes(x: C64) -> bool {
    (c(1.0) - x).norm() < POLE_TOL
}

/// `prod_{k=0}^{n-1} (I - q^k alpha C)^{-1}(I - q^k alpha A)(I - q^k alpha B)`.
pub fn mv_poch(t: &MatrixTriple, alpha: C64, n: usize) -> Result<CMat> {
    let mut p = CMat::identity(t.dim(), t.dim());
    for k in 0..n {
        p = poch_factor(t, alpha * t.q.powi(k as i64), k)? * p;
    }
    Ok(p)
}

/// `(I - s C)^{-1}(I - s A)(I - s B)`.
fn poch_factor(t: &MatrixTriple, s: C64, k: usize) -> Result<CMat> {
    if let Ok(e) = t.eigen_c() {
        if e.values.iter().any(|&cv| vanishes(s * cv)) {
            return Err(QError::Pole { what: "I - q^k alpha C".into(), index: k as i64 });
        }
    }
    let id = CMat::identity(t.dim(), t.dim());
    let rhs = (&id - &t.a * s) * (&id - &t.b * s);
    solve(&(&id - &t.c * s), &rhs, "I - q^k alpha C", k as i64)
}

/// Matrix result of a truncated series.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeries {
    pub value: CMat,
    pub tail_bound: f64,
    pub terms_used: usize,
}

/// Sums `sum_n T_n` from `T_0` and a step `T_{n-1} -> T_n`, stopping once
/// the observed term ratio bounds the tail below the tolerance.
fn sum_terms<F>(first: CMat, mut step: F, tol: &ToleranceConfig) -> Result<MatrixSeries>
where
    F: FnMut(usize, &CMat) -> Result<CMat>,
{
    let mut sum = first.clone();
    let mut term = first;
    let mut prev = term.norm();
    for n in 1..=tol.max_terms {
        term = step(n, &term)?;
        let size = term.norm();
        sum += &term;
        let total = sum.norm().max(1.0);
        if !total.is_finite() {
            return Err(QError::NonConvergence { terms: n });
        }
        let rounding = (n + 1) as f64 * EPS * total;
        if size == 0.0 {
            return Ok(MatrixSeries { value: sum, tail_bound: rounding, terms_used: n + 1 });
        }
        let r = if prev > 0.0 { size / prev } else { 1.0 };
        if r < 0.9 {
            let tail = size * r / (1.0 - r);
            if tail < tol.abs_tol * total {
                return Ok(MatrixSeries { value: sum, tail_bound: tail + rounding, terms_used: n + 1 });
            }
        }
        prev = size;
    }
    Err(QError::NonConvergence { terms: tol.max_terms })
}

/// `2Phi1^alpha(A, B; C; q, z) = sum_n (alpha A, alpha B; alpha C; q)_n z^n / (alpha q; q)_n`.
pub fn mv_2phi1(t: &MatrixTriple, alpha: C64, z: C64, tol: &ToleranceConfig) -> Result<MatrixSeries> {
    let id = CMat::identity(t.dim(), t.dim());
    mv_2phi1_applied(t, alpha, z, id, tol)
}

/// `2Phi1^alpha(...) X` summed column-wise, so a terminating `X` stops early.
fn mv_2phi1_applied(t: &MatrixTriple, alpha: C64, z: C64, x: CMat, tol: &ToleranceConfig) -> Result<MatrixSeries> {
    if z.norm() >= 1.0 {
        return Err(QError::Divergent(format!("matrix 2Phi1 needs |z| < 1, got {}", z.norm())));
    }
    let q = t.q;
    sum_terms(
        x,
        |n, prev| {
            let den = c(1.0) - alpha * q.powi(n as i64);
            if den.norm() < POLE_TOL {
                return Err(QError::Pole { what: "(alpha q;q)_n".into(), index: n as i64 });
            }
            Ok(poch_factor(t, alpha * q.powi(n as i64 - 1), n - 1)? * prev * (z / den))
        },
        tol,
    )
}

/// `(A - s)^{-1}(B - s)^{-1}(C - s)` for scalar `s`.
fn bracket_factor(t: &MatrixTriple, s: C64, k: usize) -> Result<CMat> {
    let n = t.dim();
    let id = CMat::identity(n, n);
    for (e, name) in [(t.eigen_a(), "A - alpha q^k"), (t.eigen_b(), "B - alpha q^k")] {
        if let Ok(e) = e {
            if e.values.iter().any(|&v| (v - s).norm() < POLE_TOL * v.norm().max(s.norm())) {
                return Err(QError::Pole { what: name.into(), index: k as i64 });
            }
        }
    }
    let right = solve(&(&t.b - &id * s), &(&t.c - &id * s), "B - alpha q^k", k as i64)?;
    solve(&(&t.a - &id * s), &right, "A - alpha q^k", k as i64)
}

/// `[A, B; C; alpha; q]_n = prod_{k=0}^{n-1} (A - alpha q^k)^{-1}(B - alpha q^k)^{-1}(C - alpha q^k)`.
pub fn mv_bracket(t: &MatrixTriple, alpha: C64, n: usize) -> Result<CMat> {
    let mut p = CMat::identity(t.dim(), t.dim());
    for k in 0..n {
        p = bracket_factor(t, alpha * t.q.powi(k as i64), k)? * p;
    }
    Ok(p)
}

/// `Theta^alpha(A, B; C; q, z) = sum_n (alpha/q; q)_n [A, B; C; alpha; q]_n z^n`.
pub fn mv_theta(t: &MatrixTriple, alpha: C64, z: C64, tol: &ToleranceConfig) -> Result<MatrixSeries> {
    let id = CMat::identity(t.dim(), t.dim());
    mv_theta_applied(t, alpha, z, id, tol)
}

fn mv_theta_applied(t: &MatrixTriple, alpha: C64, z: C64, x: CMat, tol: &ToleranceConfig) -> Result<MatrixSeries> {
    let q = t.q;
    sum_terms(
        x,
        |n, prev| {
            let k = n as i64 - 1;
            let scalar = c(1.0) - alpha * q.powi(k - 1);
            Ok(bracket_factor(t, alpha * q.powi(k), n - 1)? * prev * (scalar * z))
        },
        tol,
    )
}

/// Where a local solution is expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Zero,
    Infinity,
}

#[derive(Debug, Clone)]
enum Recursion {
    /// `(1 - q^{mu+n}) (1 - q^{mu+n-1} C) f_n = (1 - q^{mu+n-1} A)(1 - q^{mu+n-1} B) f_{n-1}`.
    Factored { a: CMat, b: CMat, c: CMat },
    /// The same with the middle coefficient `V q^{mu+n-1} - U + q^{1-mu-n}`.
    General { u: CMat, v: CMat, c: CMat },
    /// `f_{n+1} = q (1 - q^n beta)(B - beta q^{n+1})^{-1}(A - beta q^{n+1})^{-1}(C - beta q^{n+1}) f_n`.
    AtInfinity { swapped: Box<MatrixTriple> },
}

/// A local solution `sum_n f_n z^{n+mu}` (at 0) or `sum_n f_n z^{-n-mu}` (at infinity).
#[derive(Debug, Clone)]
pub struct VectorSolution {
    pub anchor: Anchor,
    pub mu: C64,
    pub f0: CVec,
    q: Base,
    qmu: C64,
    rec: Recursion,
}

impl VectorSolution {
    /// `q^mu`, kept exactly as constructed rather than recomputed from `mu`.
    pub fn q_mu(&self) -> C64 {
        self.qmu
    }

    /// `f_n` from `f_{n-1}`.
    fn next(&self, n: usize, prev: &CMat) -> Result<CMat> {
        let q = self.q;
        let dim = prev.nrows();
        let id = CMat::identity(dim, dim);
        match &self.rec {
            Recursion::Factored { a, b, c: cm } => {
                let s = self.qmu * q.powi(n as i64 - 1);
                let den = c(1.0) - s * q.value();
                if den.norm() < POLE_TOL {
                    return Err(QError::Pole { what: "1 - q^{mu+n}".into(), index: n as i64 });
                }
                let rhs = (&id - a * s) * ((&id - b * s) * prev);
                Ok(solve(&(&id - cm * s), &rhs, "1 - q^{mu+n-1} C", n as i64)? / den)
            }
            Recursion::General { u, v, c: cm } => {
                let up = self.qmu * q.powi(n as i64);
                let down = c(1.0) / (self.qmu * q.powi(n as i64 - 1));
                let lhs = cm * up - cm - &id * c(q.value()) + &id * down;
                let mid = v * (up / q.value()) - u + &id * down;
                solve(&lhs, &(mid * prev), "Frobenius coefficient at 0", n as i64)
            }
            Recursion::AtInfinity { swapped } => {
                let k = n as i64 - 1;
                let s = c(1.0) - self.qmu * q.powi(k);
                Ok(bracket_factor(swapped, self.qmu * q.powi(k + 1), n - 1)? * prev * (s * q.value()))
            }
        }
    }

    /// The first `count` coefficients `f_0, ..., f_{count-1}`.
    pub fn coefficients(&self, count: usize) -> Result<Vec<CVec>> {
        let mut out = Vec::with_capacity(count);
        let mut f = CMat::from_column_slice(self.f0.len(), 1, self.f0.as_slice());
        for n in 0..count {
            if n > 0 {
                f = self.next(n, &f)?;
            }
            out.push(f.column(0).into_owned());
        }
        Ok(out)
    }

    /// `u(z)` with principal-branch `z^{mu}` (or `z^{-mu}` at infinity).
    pub fn eval(&self, z: C64, tol: &ToleranceConfig) -> Result<CVec> {
        if z.norm() == 0.0 {
            return Err(QError::Domain("local solutions are not evaluated at z = 0".into()));
        }
        let (w, power) = match self.anchor {
            Anchor::Zero => (z, cpow(z, self.mu)),
            Anchor::Infinity => (c(1.0) / z, cpow(z, -self.mu)),
        };
        if w.norm() >= 1.0 && self.anchor == Anchor::Zero {
            return Err(QError::Divergent(format!("solution at 0 needs |z| < 1, got {}", z.norm())));
        }
        let f0 = CMat::from_column_slice(self.f0.len(), 1, self.f0.as_slice());
        let s = sum_terms(f0, |n, prev| Ok(self.next(n, prev)? * w), tol)?;
        Ok(s.value.column(0) * power)
    }
}

fn at_zero(t_c: &EigenData, rec: Recursion, q: Base, dim: usize) -> Vec<VectorSolution> {
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        let mut e = CVec::zeros(dim);
        e[i] = c(1.0);
        out.push(VectorSolution { anchor: Anchor::Zero, mu: c(0.0), f0: e, q, qmu: c(1.0), rec: rec.clone() });
    }
    for (ci, fi) in t_c.values.iter().zip(&t_c.vectors) {
        out.push(VectorSolution {
            anchor: Anchor::Zero,
            mu: c(1.0) - log_q(*ci, q),
            f0: fi.clone(),
            q,
            qmu: c(q.value()) / ci,
            rec: rec.clone(),
        });
    }
    out
}

/// The `2N` solutions at 0: `2Phi1(A,B;C;q,z) e_i` and
/// `z^{1 - log_q c_i} 2Phi1^{q/c_i}(A,B;C;q,z) f_i` with `C f_i = c_i f_i`.
pub fn solutions_at_zero(t: &MatrixTriple) -> Result<Vec<VectorSolution>> {
    if let Some(msg) = &t.zero_violation {
        return Err(QError::Genericity(msg.clone()));
    }
    let rec = Recursion::Factored { a: t.a.clone(), b: t.b.clone(), c: t.c.clone() };
    Ok(at_zero(t.eigen_c()?, rec, t.q, t.dim()))
}

/// The `2N` solutions at 0 of the `(U, V)` equation; the exponents are
/// fixed by `C` exactly as for `U = A + B`, `V = AB`.
pub fn solve_general_uv_at_zero(u: CMat, v: CMat, cc: CMat, q: Base) -> Result<Vec<VectorSolution>> {
    let n = cc.nrows();
    for (m, name) in [(&u, "U"), (&v, "V"), (&cc, "C")] {
        if m.nrows() != n || m.ncols() != n || n == 0 {
            return Err(QError::Domain(format!("{name} must be {n}x{n}")));
        }
    }
    let e = eigen(&cc, "C");
    if let Some(msg) = zero_violation(&e, q) {
        return Err(QError::Genericity(msg));
    }
    let e = e?;
    Ok(at_zero(&e, Recursion::General { u, v, c: cc }, q, n))
}

/// The `2N` solutions at infinity:
/// `z^{-log_q b_i} Theta^{q b_i}(B,A;C;q,q/z) f_i^B` and
/// `z^{-log_q a_i} Theta^{q a_i}(B,A;C;q,q/z) (a_i - B)^{-1} f_i^A`.
pub fn solutions_at_infinity(t: &MatrixTriple) -> Result<Vec<VectorSolution>> {
    if let Some(msg) = &t.infinity_violation {
        return Err(QError::Genericity(msg.clone()));
    }
    let n = t.dim();
    let swapped = Box::new(t.swapped());
    let mut out = Vec::with_capacity(2 * n);
    let mut push = |beta: C64, f0: CVec| {
        out.push(VectorSolution {
            anchor: Anchor::Infinity,
            mu: log_q(beta, t.q),
            f0,
            q: t.q,
            qmu: beta,
            rec: Recursion::AtInfinity { swapped: swapped.clone() },
        });
    };
    let eb = t.eigen_b()?;
    for (bi, fi) in eb.values.iter().zip(&eb.vectors) {
        push(*bi, fi.clone());
    }
    let ea = t.eigen_a()?;
    let id = CMat::identity(n, n);
    for (ai, fi) in ea.values.iter().zip(&ea.vectors) {
        let rhs = CMat::from_column_slice(n, 1, fi.as_slice());
        let f0 = solve(&(&id * *ai - &t.b), &rhs, "a_i - B", 0)?;
        push(*ai, f0.column(0).into_owned());
    }
    Ok(out)
}

/// Norm of the indicial operator applied to `f_0`: `((q^{1-mu} - q) - (1 - q^mu) C) f_0`
/// at 0 and `(-q^mu + (A + B) - q^{-mu} AB) f_0` at infinity.
pub fn indicial_residual(t: &MatrixTriple, s: &VectorSolution) -> f64 {
    let n = t.dim();
    let id = CMat::identity(n, n);
    let qv = t.q.value();
    let qmu = s.q_mu();
    let op = match s.anchor {
        Anchor::Zero => &id * (c(qv) / qmu - qv) - &t.c * (c(1.0) - qmu),
        Anchor::Infinity => &t.a + &t.b - &id * qmu - &t.a * &t.b / qmu,
    };
    (op * &s.f0).norm()
}

/// Distance of the solutions from linear dependence at `z`.
///
/// Builds the Casorati matrix with columns `(u(z), (u(z) - u(qz)) / ((1 - q) z))`,
/// each scaled to unit length, and returns its smallest singular value. The
/// result lies in `[0, 1]` and vanishes exactly when the determinant does.
pub fn independence_measure(sols: &[VectorSolution], z: C64, tol: &ToleranceConfig) -> Result<f64> {
    let Some(first) = sols.first() else {
        return Err(QError::Domain("no solutions given".into()));
    };
    let n = first.f0.len();
    if sols.len() != 2 * n {
        return Err(QError::Domain(format!("expected {} solutions, got {}", 2 * n, sols.len())));
    }
    let qv = first.q.value();
    let mut m = CMat::zeros(2 * n, 2 * n);
    for (j, s) in sols.iter().enumerate() {
        let u = s.eval(z, tol)?;
        let uq = s.eval(z * qv, tol)?;
        let d = (&u - uq) / (z * (1.0 - qv));
        let mut col = CVec::zeros(2 * n);
        col.rows_mut(0, n).copy_from(&u);
        col.rows_mut(n, n).copy_from(&d);
        let len = col.norm();
        if len == 0.0 {
            return Ok(0.0);
        }
        m.set_column(j, &(col / c(len)));
    }
    Ok(m.singular_values().min())
}

/// Degree of `2Phi1(A, B; C; q, z) f` if it is a polynomial of degree at most
/// `max_terms`.
///
/// The series stops after `z^l` when `g_l = (A, B; C; q)_l f` lies in
/// `Ker((1 - q^l A)(1 - q^l B))`.
pub fn termination_degree(t: &MatrixTriple, f: &CVec, tol: &ToleranceConfig) -> Option<usize> {
    let n = t.dim();
    if f.len() != n || f.norm() == 0.0 {
        return None;
    }
    let id = CMat::identity(n, n);
    let mut g = CMat::from_column_slice(n, 1, f.as_slice());
    for l in 0..=tol.max_terms {
        let s = c(t.q.powi(l as i64));
        let kill = (&id - &t.a * s) * (&id - &t.b * s);
        let scale = g.norm() * kill.norm().max(1.0);
        if (&kill * &g).norm() < KERNEL_TOL * scale {
            return Some(l);
        }
        g = poch_factor(t, s, l).ok()? * g;
        if !g.norm().is_finite() {
            return None;
        }
    }
    None
}

/// A generic triple with eigenvalues `|a|, |b|` in `[1.2, 2.4]` and `|c|` in
/// `[0.2, 0.45]`, conjugated by well-conditioned random bases. `uniform`
/// supplies samples from `[0, 1)`; it is retried until both genericity checks pass.
pub fn random_generic_triple(n: usize, q: Base, uniform: &mut dyn FnMut() -> f64) -> Result<MatrixTriple> {
    let mut eig = |lo: f64, hi: f64| {
        let r = lo + (hi - lo) * uniform();
        C64::from_polar(r, std::f64::consts::TAU * uniform())
    };
    for _ in 0..100 {
        let mut build = |lo: f64, hi: f64| -> Option<CMat> {
            let d = CMat::from_diagonal(&CVec::from_iterator(n, (0..n).map(|_| eig(lo, hi))));
            let p = CMat::identity(n, n) + CMat::from_fn(n, n, |_, _| eig(0.0, 0.35));
            let inv = p.clone().try_inverse()?;
            Some(&p * d * inv)
        };
        let (Some(a), Some(b), Some(cc)) = (build(1.2, 2.4), build(1.2, 2.4), build(0.2, 0.45)) else {
            continue;
        };
        let t = MatrixTriple::new(a, b, cc, q)?;
        if t.zero_violation.is_none() && t.infinity_violation.is_none() {
            return Ok(t);
        }
    }
    Err(QError::Genericity("no generic triple found in 100 draws".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::qpoch_finite;
    use crate::qdiffeq::{solution_u, HypergeomParams};
    use crate::series::phi21;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::new(1e-15, 5000).unwrap()
    }

    fn q() -> Base {
        Base::new(0.6).unwrap()
    }

    fn triple(n: usize, seed: u64) -> MatrixTriple {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_generic_triple(n, q(), &mut || rng.gen::<f64>()).unwrap()
    }

    fn cz(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn points(radii: &[f64]) -> Vec<C64> {
        radii.iter().enumerate().map(|(i, &r)| C64::from_polar(r, 0.7 + 0.8 * i as f64)).collect()
    }

    fn scalar_triple(a: C64, b: C64, cc: C64) -> MatrixTriple {
        MatrixTriple::diagonal(&[a], &[b], &[cc], q()).unwrap()
    }

    #[test]
    fn eigen_data_meets_residual() {
        let t = triple(3, 1);
        for (m, e) in [(&t.a, t.eigen_a().unwrap()), (&t.c, t.eigen_c().unwrap())] {
            for (l, v) in e.values.iter().zip(&e.vectors) {
                assert!((m * v - v * *l).norm() < 1e-10 * m.norm());
            }
        }
    }

    #[test]
    fn poch_basics() {
        let t = triple(2, 2);
        assert_eq!(mv_poch(&t, cz(0.3, 0.1), 0).unwrap(), CMat::identity(2, 2));
        let (a, b, cc) = (cz(0.7, 0.2), cz(-0.4, 0.0), cz(0.3, -0.5));
        let s = scalar_triple(a, b, cc);
        let alpha = cz(1.3, 0.4);
        for n in 1..6 {
            let m = mv_poch(&s, alpha, n).unwrap()[(0, 0)];
            let want = qpoch_finite(alpha * a, q(), n as i64).unwrap() * qpoch_finite(alpha * b, q(), n as i64).unwrap()
                / qpoch_finite(alpha * cc, q(), n as i64).unwrap();
            assert!((m - want).norm() < 1e-13 * want.norm());
        }
    }

    #[test]
    fn poch_order_puts_last_factor_left() {
        let t = triple(2, 3);
        let alpha = cz(0.8, -0.3);
        let f0 = poch_factor(&t, alpha, 0).unwrap();
        let f1 = poch_factor(&t, alpha * q().value(), 1).unwrap();
        assert!((mv_poch(&t, alpha, 2).unwrap() - f1 * f0).norm() < 1e-13);
    }

    #[test]
    fn poch_pole_reports_index() {
        let qv = q().value();
        let t = scalar_triple(c(0.3), c(0.4), c(1.0 / (qv * qv)));
        match mv_poch(&t, c(1.0), 5) {
            Err(QError::Pole { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected pole, got {other:?}"),
        }
    }

    #[test]
    fn diagonal_poch_is_entrywise_scalar() {
        let (a, b, cc) = ([cz(0.7, 0.1), cz(-0.2, 0.5)], [cz(0.3, 0.0), cz(1.4, -0.2)], [cz(0.25, 0.1), cz(-0.6, 0.2)]);
        let t = MatrixTriple::diagonal(&a, &b, &cc, q()).unwrap();
        let alpha = cz(0.9, 0.2);
        let m = mv_poch(&t, alpha, 7).unwrap();
        for i in 0..2 {
            let want = qpoch_finite(alpha * a[i], q(), 7).unwrap() * qpoch_finite(alpha * b[i], q(), 7).unwrap()
                / qpoch_finite(alpha * cc[i], q(), 7).unwrap();
            assert!((m[(i, i)] - want).norm() < 1e-12 * want.norm().max(1.0));
        }
        assert!(m[(0, 1)].norm() < 1e-14 && m[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn two_phi_one_reduces_to_scalar() {
        let (a, b, cc) = (cz(0.3, 0.2), cz(0.7, 0.0), cz(0.45, -0.1));
        let s = scalar_triple(a, b, cc);
        let z = cz(0.2, 0.35);
        let m = mv_2phi1(&s, c(1.0), z, &tol()).unwrap();
        let want = phi21(a, b, cc, q(), z, &tol()).unwrap().value;
        assert!((m.value[(0, 0)] - want).norm() < 1e-13);
        let t = triple(2, 4);
        assert_eq!(mv_2phi1(&t, c(1.0), c(0.0), &tol()).unwrap().value, CMat::identity(2, 2));
        assert!(matches!(mv_2phi1(&t, c(1.0), c(1.2), &tol()), Err(QError::Divergent(_))));
    }

    #[test]
    fn two_phi_one_columns_solve_the_equation() {
        let t = triple(2, 5);
        let eq = t.equation();
        for z in points(&[0.1, 0.2, 0.3, 0.4, 0.5]) {
            let r = eq.residual(|w| mv_2phi1(&t, c(1.0), w, &tol()).map(|s| s.value), z).unwrap();
            assert!(r < 1e-10, "residual {r} at {z}");
        }
    }

    #[test]
    fn solutions_at_zero_solve_the_equation() {
        let t = triple(3, 6);
        let sols = solutions_at_zero(&t).unwrap();
        assert_eq!(sols.len(), 6);
        for s in &sols {
            for z in points(&[0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.45, 0.5]) {
                let r = residual(&t, |w| s.eval(w, &tol()), z).unwrap();
                assert!(r < 1e-10, "residual {r} at {z}, mu = {}", s.mu);
            }
        }
    }

    #[test]
    fn exponents_are_indicial_roots() {
        let t = triple(3, 7);
        let cs = &t.eigen_c().unwrap().values;
        for s in solutions_at_zero(&t).unwrap() {
            let qmu = q().pow(s.mu);
            let root = std::iter::once(c(1.0)).chain(cs.iter().map(|ci| c(q().value()) / ci));
            assert!(root.into_iter().any(|r| (qmu - r).norm() < 1e-12 * r.norm()));
            assert!(indicial_residual(&t, &s) < 1e-12);
        }
        for s in solutions_at_infinity(&t).unwrap() {
            let scale = t.a.norm() * t.b.norm() * s.f0.norm();
            assert!(indicial_residual(&t, &s) < 1e-10 * scale);
        }
    }

    #[test]
    fn second_family_at_zero_reduces_to_u2() {
        let (a, b, cc) = ([cz(0.5, 0.1), cz(-0.3, 0.4)], [cz(0.8, 0.0), cz(0.2, -0.3)], [cz(0.35, 0.1), cz(-0.7, 0.2)]);
        let t = MatrixTriple::diagonal(&a, &b, &cc, q()).unwrap();
        let sols = solutions_at_zero(&t).unwrap();
        let z = cz(0.3, 0.2);
        for i in 0..2 {
            let p = HypergeomParams::new(a[i], b[i], cc[i], q()).unwrap();
            let u1 = solution_u(1, &p, z, &tol()).unwrap().value;
            let first = sols[i].eval(z, &tol()).unwrap();
            assert!((first[i] - u1).norm() < 1e-12 * u1.norm().max(1.0));
            let s = sols.iter().skip(2).find(|s| s.f0[i].norm() > 0.5).unwrap();
            let u2 = solution_u(2, &p, z, &tol()).unwrap().value;
            let got = s.eval(z, &tol()).unwrap()[i] / s.f0[i];
            assert!((got - u2).norm() < 1e-12 * u2.norm().max(1.0), "{got} vs {u2}");
        }
    }

    #[test]
    fn bracket_and_theta_basics() {
        let t = triple(2, 8);
        assert_eq!(mv_bracket(&t, cz(0.4, 0.1), 0).unwrap(), CMat::identity(2, 2));
        assert_eq!(mv_theta(&t, cz(0.4, 0.1), c(0.0), &tol()).unwrap().value, CMat::identity(2, 2));
        let (a, b, cc) = (cz(1.7, 0.2), cz(-1.3, 0.5), cz(0.4, 0.0));
        let s = scalar_triple(a, b, cc);
        let alpha = cz(0.9, -0.4);
        let mut want = c(1.0);
        for k in 0..6 {
            let x = alpha * q().powi(k);
            want *= (cc - x) / ((a - x) * (b - x));
            let got = mv_bracket(&s, alpha, k as usize + 1).unwrap()[(0, 0)];
            assert!((got - want).norm() < 1e-12 * want.norm());
        }
    }

    #[test]
    fn infinity_solutions_reduce_to_u3_u4() {
        let (a, b, cc) = (cz(1.6, 0.3), cz(-1.2, 0.7), cz(0.4, -0.1));
        let t = scalar_triple(a, b, cc);
        let p = HypergeomParams::new(a, b, cc, q()).unwrap();
        let sols = solutions_at_infinity(&t).unwrap();
        let z = cz(-3.0, 4.5);
        // First family is built on b (u4), second on a (u3, scaled by 1/(a - b)).
        let u4 = solution_u(4, &p, z, &tol()).unwrap().value;
        let u3 = solution_u(3, &p, z, &tol()).unwrap().value;
        let v4 = sols[0].eval(z, &tol()).unwrap()[0] / sols[0].f0[0];
        let v3 = sols[1].eval(z, &tol()).unwrap()[0] / sols[1].f0[0];
        assert!((v4 - u4).norm() < 1e-12 * u4.norm());
        assert!((v3 - u3).norm() < 1e-12 * u3.norm());
    }

    #[test]
    fn solutions_at_infinity_solve_the_equation() {
        let t = triple(2, 9);
        let sols = solutions_at_infinity(&t).unwrap();
        assert_eq!(sols.len(), 4);
        for s in &sols {
            for z in points(&[4.0, 4.5, 5.0, 6.0, 7.0, 8.0, 10.0, 20.0]) {
                let r = residual(&t, |w| s.eval(w, &tol()), z).unwrap();
                assert!(r < 1e-9, "residual {r} at {z}");
            }
        }
    }

    #[test]
    fn residual_controls() {
        let t = triple(2, 10);
        let zero = residual(&t, |_| Ok(CVec::zeros(2)), cz(0.3, 0.1)).unwrap();
        assert_eq!(zero, 0.0);
        let junk = residual(&t, |w| Ok(CVec::from_vec(vec![w.exp(), c(1.0) + w * w])), cz(0.3, 0.1)).unwrap();
        assert!(junk > 1e-3);
    }

    #[test]
    fn general_uv_specializes_to_ab() {
        let t = triple(2, 11);
        let eq = t.equation();
        let general = solve_general_uv_at_zero(eq.u.clone(), eq.v.clone(), t.c.clone(), q()).unwrap();
        let factored = solutions_at_zero(&t).unwrap();
        for (g, f) in general.iter().zip(&factored) {
            for z in points(&[0.2, 0.4]) {
                let d = (g.eval(z, &tol()).unwrap() - f.eval(z, &tol()).unwrap()).norm();
                assert!(d < 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn general_uv_solutions_solve_their_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = random_generic_triple(3, q(), &mut || rng.gen::<f64>()).unwrap();
        let u = CMat::from_fn(3, 3, |_, _| cz(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let v = CMat::from_fn(3, 3, |_, _| cz(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let eq = UvEquation { u: u.clone(), v: v.clone(), c: t.c.clone(), q: q() };
        for s in solve_general_uv_at_zero(u, v, t.c.clone(), q()).unwrap() {
            for z in points(&[0.15, 0.3, 0.45]) {
                let r = eq.residual(|w| s.eval(w, &tol()).map(|x| CMat::from_column_slice(3, 1, x.as_slice())), z).unwrap();
                assert!(r < 1e-10, "{r}");
            }
        }
    }

    #[test]
    fn genericity_failures_name_the_condition() {
        let qv = q().value();
        let t = MatrixTriple::diagonal(&[c(1.5), c(2.0)], &[c(1.3), c(1.9)], &[c(0.3), c(0.3 * qv * qv)], q()).unwrap();
        match solutions_at_zero(&t) {
            Err(QError::Genericity(msg)) => assert!(msg.contains("ratio"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let t = MatrixTriple::diagonal(&[c(1.5), c(1.3 * qv)], &[c(1.3), c(1.9)], &[c(0.3), c(0.4)], q()).unwrap();
        match solutions_at_infinity(&t) {
            Err(QError::Genericity(msg)) => assert!(msg.contains("sigma(A) meets sigma(B)"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let t = MatrixTriple::diagonal(&[c(1.5), c(2.0)], &[c(1.5 * qv), c(1.9)], &[c(0.3), c(0.4)], q()).unwrap();
        assert!(matches!(solutions_at_infinity(&t), Err(QError::Genericity(_))));
    }

    #[test]
    fn solutions_are_independent() {
        for (n, seed) in [(2, 13), (3, 14)] {
            let t = triple(n, seed);
            let m = independence_measure(&solutions_at_zero(&t).unwrap(), cz(0.3, 0.2), &tol()).unwrap();
            assert!(m > 1e-8, "{m}");
        }
        // A duplicated solution is caught.
        let t = triple(2, 15);
        let mut sols = solutions_at_zero(&t).unwrap();
        sols[1] = sols[0].clone();
        assert!(independence_measure(&sols, cz(0.3, 0.2), &tol()).unwrap() < 1e-12);
    }

    #[test]
    fn termination_matches_interpolation() {
        let t = triple(2, 16);
        let qv = q().value();
        // Give A the eigenvalue q^{-3}, then steer f so that g_3 lands in the kernel.
        let p = CMat::from_row_slice(2, 2, &[c(1.0), cz(0.2, 0.1), cz(-0.1, 0.3), c(1.0)]);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(qv.powi(-3)), cz(1.7, 0.4)]));
        let a = &p * d * p.clone().try_inverse().unwrap();
        let t = MatrixTriple::new(a, t.b.clone(), t.c.clone(), q()).unwrap();
        let id = CMat::identity(2, 2);
        let s3 = c(qv.powi(3));
        let target = (&id - &t.b * s3).lu().solve(&p.column(0).into_owned()).unwrap();
        let f = mv_poch(&t, c(1.0), 3).unwrap().lu().solve(&target).unwrap();
        assert_eq!(termination_degree(&t, &f, &tol()), Some(3));
        let generic = CVec::from_vec(vec![c(1.0), cz(0.3, -0.2)]);
        assert_eq!(termination_degree(&t, &generic, &tol()), None);

        // Four nodes fix a cubic; a fifth must agree with it.
        let fm = CMat::from_column_slice(2, 1, f.as_slice());
        let value = |z: C64| mv_2phi1_applied(&t, c(1.0), z, fm.clone(), &tol()).unwrap().value.column(0).into_owned();
        let nodes: Vec<C64> = [0.1, -0.2, 0.3, -0.4].iter().map(|&x| c(x)).collect();
        let extra = cz(0.15, 0.25);
        let mut interp = CVec::zeros(2);
        for (i, &zi) in nodes.iter().enumerate() {
            let mut w = c(1.0);
            for (j, &zj) in nodes.iter().enumerate() {
                if i != j {
                    w *= (extra - zj) / (zi - zj);
                }
            }
            interp += value(zi) * w;
        }
        let got = value(extra);
        assert!((&got - &interp).norm() < 1e-10 * got.norm().max(1.0));
        let full = mv_2phi1(&t, c(1.0), extra, &tol()).unwrap().value * &f;
        assert!((full - got).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn recursion_at_zero_holds(seed in 0u64..1000) {
            let t = triple(2, seed);
            let n_id = CMat::identity(2, 2);
            for s in solutions_at_zero(&t).unwrap() {
                let f = s.coefficients(21).unwrap();
                for n in 1..=20 {
                    let x = s.q_mu() * q().powi(n as i64 - 1);
                    let lhs = (&n_id - &t.c * x) * &f[n] * (c(1.0) - x * q().value());
                    let rhs = (&n_id - &t.a * x) * ((&n_id - &t.b * x) * &f[n - 1]);
                    prop_assert!((&lhs - &rhs).norm() < 1e-12 * rhs.norm().max(1.0));
                }
            }
        }

        #[test]
        fn recursion_at_infinity_holds(seed in 0u64..1000) {
            let t = triple(2, seed);
            let id = CMat::identity(2, 2);
            for s in solutions_at_infinity(&t).unwrap() {
                let f = s.coefficients(21).unwrap();
                let beta = s.q_mu();
                for n in 0..20 {
                    let x = beta * q().powi(n as i64 + 1);
                    // (A - x)(B - x) f_{n+1} = q (1 - q^n beta)(C - x) f_n
                    let lhs = (&t.a - &id * x) * ((&t.b - &id * x) * &f[n + 1]);
                    let rhs = (&t.c - &id * x) * &f[n] * (c(q().value()) * (c(1.0) - beta * q().powi(n as i64)));
                    prop_assert!((&lhs - &rhs).norm() < 1e-12 * rhs.norm().max(lhs.norm()).max(1e-300));
                }
            }
        }

        #[test]
        fn commuting_diagonal_matches_scalar(re in 0.2f64..0.45, im in -0.2f64..0.2, zr in 0.05f64..0.4) {
            let (a, b, cc) = ([cz(0.5, 0.1), cz(-0.3, 0.4)], [cz(0.8, 0.0), cz(0.2, -0.3)], [cz(re, im), cz(-0.7, 0.2)]);
            let t = MatrixTriple::diagonal(&a, &b, &cc, q()).unwrap();
            let z = C64::from_polar(zr, 1.1);
            let m = mv_2phi1(&t, c(1.0), z, &tol()).unwrap().value;
            for i in 0..2 {
                let want = phi21(a[i], b[i], cc[i], q(), z, &tol()).unwrap().value;
                prop_assert!((m[(i, i)] - want).norm() < 1e-12 * want.norm().max(1.0));
            }
            prop_assert!(m[(0, 1)].norm() < 1e-12 && m[(1, 0)].norm() < 1e-12);
        }
    }
}
