//! Seeded residual suites over the library's identities, as run by `qhyper check`.
//!
//! Each suite draws `count` points from a ChaCha stream seeded with `seed`, so a
//! run is reproducible bit for bit.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::askeywilson::{aw_function, aw_gram, aw_norm, aw_operator, aw_poly, AwParams, AwRepresentation, SymFunction};
use crate::error::{QError, Result};
use crate::littleqjacobi::{gram_matrix, monic_recurrence, monic_value, norm_h, LqjParams};
use crate::matrixq::{independence_measure, random_generic_triple, residual, solutions_at_infinity, solutions_at_zero};
use crate::qcore::{c, Base, ToleranceConfig, C64};
use crate::qdiffeq::{bhde_residual, check_darboux, connection_coeff, solution_u, HypergeomParams};
use crate::series::{identity_sides, Identity, IdentityPoint};
use crate::spectral::{orthogonality_residuals, weight, SpectralParams};
use crate::transmutation::{anu_eigen_constant, apply_anu, apply_wnu, gasper_sides, phi_lambda, CompactGridFn, GasperPoint, HalfLineFn};

/// Redraw budget per requested point when a draw falls outside an identity's region.
const MAX_REDRAWS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Bhde,
    LqJacobi,
    Spectral,
    Transmutation,
    AskeyWilson,
    Matrix,
}

impl Suite {
    pub const ALL: [Suite; 7] =
        [Suite::Identities, Suite::Bhde, Suite::LqJacobi, Suite::Spectral, Suite::Transmutation, Suite::AskeyWilson, Suite::Matrix];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Bhde => "bhde",
            Suite::LqJacobi => "lqjacobi",
            Suite::Spectral => "spectral",
            Suite::Transmutation => "transmutation",
            Suite::AskeyWilson => "askey-wilson",
            Suite::Matrix => "matrix",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.iter().copied().find(|x| x.name() == s).ok_or_else(|| QError::Domain(format!("unknown suite `{s}`")))
    }
}

/// Knobs shared by the suites; each suite reads the ones it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub count: usize,
    pub seed: u64,
    /// Matrix dimension for the matrix suite.
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
    /// Largest degree in the little q-Jacobi Gram matrix.
    pub nmax: u32,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { count: 20, seed: 0, n: 2, alpha: 0.6, beta: 0.3, q: 0.5, nmax: 10 }
    }
}

/// Which side of the threshold a check has to land on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Below,
    Above,
}

/// Worst value of one check over all points of a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub points: usize,
    pub worst: f64,
    pub threshold: f64,
    pub bound: Bound,
}

impl CheckOutcome {
    fn below(name: impl Into<String>, threshold: f64) -> Self {
        CheckOutcome { name: name.into(), points: 0, worst: 0.0, threshold, bound: Bound::Below }
    }

    fn above(name: impl Into<String>, threshold: f64) -> Self {
        CheckOutcome { name: name.into(), points: 0, worst: f64::INFINITY, threshold, bound: Bound::Above }
    }

    fn record(&mut self, v: f64) {
        self.points += 1;
        // NaN must fail the check, so it always wins.
        self.worst = match self.bound {
            Bound::Below if v.is_nan() || v > self.worst => v,
            Bound::Above if v.is_nan() || v < self.worst => v,
            _ => self.worst,
        };
    }

    pub fn passed(&self) -> bool {
        self.points > 0
            && match self.bound {
                Bound::Below => self.worst < self.threshold,
                Bound::Above => self.worst > self.threshold,
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }
}

fn scaled(a: C64, b: C64) -> f64 {
    (a - b).norm() / (1.0 + a.norm() + b.norm())
}

fn disc(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    C64::from_polar(r * rng.gen::<f64>().sqrt(), 2.0 * PI * rng.gen::<f64>())
}

/// Runs one suite.
pub fn run_suite(suite: Suite, opts: &SuiteOptions, tol: &ToleranceConfig) -> Result<SuiteReport> {
    if opts.count == 0 {
        return Err(QError::Domain("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let checks = match suite {
        Suite::Identities => identities(opts, tol, &mut rng)?,
        Suite::Bhde => bhde(opts, tol, &mut rng)?,
        Suite::LqJacobi => lqjacobi(opts, tol, &mut rng)?,
        Suite::Spectral => spectral(tol)?,
        Suite::Transmutation => transmutation(opts, tol, &mut rng)?,
        Suite::AskeyWilson => askey_wilson(opts, tol, &mut rng)?,
        Suite::Matrix => matrix(opts, tol, &mut rng)?,
    };
    Ok(SuiteReport { suite, checks })
}

fn identities(opts: &SuiteOptions, tol: &ToleranceConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let q = Base::new(0.5)?;
    let mut out = Vec::new();
    for id in Identity::ALL {
        let mut check = CheckOutcome::below(id.name(), 1e-11);
        let mut draws = 0;
        while check.points < opts.count {
            draws += 1;
            if draws > MAX_REDRAWS * opts.count {
                return Err(QError::Region(format!("{id}: too few in-region draws")));
            }
            let p = IdentityPoint { a: disc(rng, 0.9), b: disc(rng, 0.9), c: disc(rng, 0.9), z: disc(rng, 0.9), n: rng.gen_range(0..8), q };
            match identity_sides(id, &p, tol) {
                Ok(sides) => check.record(sides.windows(2).map(|w| scaled(w[0], w[1])).fold(0.0, f64::max)),
                Err(QError::Region(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        out.push(check);
    }
    Ok(out)
}

fn bhde(opts: &SuiteOptions, tol: &ToleranceConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let q = 0.5;
    let mut sols = CheckOutcome::below("u1-u4 residual", 1e-10);
    let mut conn = CheckOutcome::below("connection u1 = C3 u3 + C4 u4", 1e-9);
    let mut darboux = CheckOutcome::below("Darboux factorisation", 1e-12);
    for _ in 0..opts.count {
        let p = HypergeomParams::real(rng.gen_range(0.3..0.9), rng.gen_range(0.3..0.9), rng.gen_range(0.2..0.8), q)?;
        for i in 1..=4u8 {
            // Frobenius solutions at 0 live in |z| < 1, those at infinity where |qc/(abz)| < 1.
            let r = if i <= 2 { rng.gen_range(0.1..0.5) } else { rng.gen_range(10.0..20.0) };
            let z = C64::from_polar(r, rng.gen_range(0.2..3.0));
            sols.record(bhde_residual(&p, |x| Ok(solution_u(i, &p, x, tol)?.value), z)?);
        }
        let coef: Vec<C64> = (0..5).map(|_| disc(rng, 1.0)).collect();
        let z = disc(rng, 1.5) + c(0.1);
        darboux.record(check_darboux(&p, |x| Ok(coef.iter().rev().fold(c(0.0), |acc, &k| acc * x + k)), z)?);

        // Small c keeps |qc/(abz)| < 1 on the overlap z = -1/2.
        let p = HypergeomParams::real(rng.gen_range(0.7..0.9), rng.gen_range(0.7..0.9), rng.gen_range(0.05..0.15), q)?;
        let z = c(-0.5);
        let u = |i| Ok::<_, QError>(solution_u(i, &p, z, tol)?.value);
        let expanded = connection_coeff(3, &p, z)? * u(3)? + connection_coeff(4, &p, z)? * u(4)?;
        conn.record((u(1)? - expanded).norm());
    }
    Ok(vec![sols, conn, darboux])
}

fn lqjacobi(opts: &SuiteOptions, tol: &ToleranceConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let p = LqjParams::new(opts.alpha, opts.beta, opts.q)?;
    let g = gram_matrix(opts.nmax, &p, tol)?;
    let h: Vec<f64> = (0..=opts.nmax).map(|n| norm_h(n, &p)).collect::<Result<_>>()?;
    let mut off = CheckOutcome::below("Gram off-diagonal / sqrt(h_n h_m)", 1e-10);
    let mut diag = CheckOutcome::below("Gram diagonal vs h_n (relative)", 1e-10);
    for n in 0..h.len() {
        diag.record((g[(n, n)] - h[n]).abs() / h[n]);
        for m in 0..h.len() {
            if m != n {
                off.record(g[(n, m)].abs() / (h[n] * h[m]).sqrt());
            }
        }
    }
    let mut rec = CheckOutcome::below("monic three-term recurrence", 1e-10);
    for _ in 0..opts.count {
        let x = rng.gen_range(-0.2..1.0);
        for n in 1..opts.nmax.max(2) {
            let (bn, cn) = monic_recurrence(n, &p)?;
            let m = |k| monic_value(k, x, &p);
            rec.record((x * m(n)? - m(n + 1)? - bn * m(n)? - cn * m(n - 1)?).abs());
        }
    }
    Ok(vec![off, diag, rec])
}

fn spectral(tol: &ToleranceConfig) -> Result<Vec<CheckOutcome>> {
    let p = SpectralParams::new(0.5, 0.2, -1.0, 0.4)?;
    let ks: Vec<i64> = (-3..=3).collect();
    let mut orth = CheckOutcome::below("orthogonality |k|,|l| <= 3 (scaled by w_k/w_l)", 1e-6);
    let mut complete = CheckOutcome::below("completeness <E(R) e_0, e_0> = 1", 1e-6);
    for ((k, l), r) in orthogonality_residuals(&ks, &p, tol)? {
        orth.record(r * weight(k, &p)? / weight(l, &p)?);
        if k == 0 && l == 0 {
            complete.record(r);
        }
    }
    Ok(vec![orth, complete])
}

fn random_compact(rng: &mut ChaCha8Rng, q: Base) -> CompactGridFn {
    let values: Vec<(i64, C64)> = (-4..=4).map(|k| (k, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))).collect();
    CompactGridFn::new(1.0, q, values)
}

fn transmutation(opts: &SuiteOptions, tol: &ToleranceConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let q = Base::new(0.5)?;
    let close = |a: C64, b: C64| (a - b).norm() / (1.0 + a.norm().max(b.norm()));
    let mut semigroup = CheckOutcome::below("W_nu W_mu = W_(nu+mu)", 1e-8);
    let mut anu = CheckOutcome::below("A_nu on phi_lambda", 1e-8);
    let mut gasper = CheckOutcome::below("Gasper identity", 1e-8);
    for _ in 0..opts.count {
        let g = random_compact(rng, q);
        let f = g.to_fn();
        let nu = C64::new(rng.gen_range(0.2..1.2), rng.gen_range(-0.5..0.5));
        let mu = c(rng.gen_range(0.2..1.5));
        let wmu = HalfLineFn::supported(|x| Ok(apply_wnu(&f, mu, x, q, tol)?.value), 0.0, f.support().1);
        let x = q.powi(rng.gen_range(-6..=6));
        semigroup.record(close(apply_wnu(&wmu, nu, x, q, tol)?.value, apply_wnu(&f, nu + mu, x, q, tol)?.value));

        let (a, b) = (c(rng.gen_range(0.2..0.6)), c(rng.gen_range(0.2..0.6)));
        let sigma = C64::from_polar(rng.gen_range(0.1..0.5), rng.gen_range(-1.0..1.0));
        let nu = c(rng.gen_range(0.2..1.0));
        let phi = HalfLineFn::new(|x| Ok(phi_lambda(x, sigma, a, b, q, tol)?.value));
        let x = rng.gen_range(0.1..9.0);
        let lhs = apply_anu(&phi, nu, x, a, b, q, tol)?.value;
        let rhs = anu_eigen_constant(a * b, nu, q)? * phi_lambda(x, sigma, a * q.pow(nu), b, q, tol)?.value;
        anu.record(close(lhs, rhs));
    }
    let gp = GasperPoint { a: 0.4, b: 0.5, r: 0.6, s: 0.7, y: 1.0, l: 2, sigma: C64::from_polar(0.3, 0.2), q };
    let (lhs, rhs) = gasper_sides(&gp, tol)?;
    gasper.record(close(lhs, rhs));
    Ok(vec![semigroup, anu, gasper])
}

fn askey_wilson(opts: &SuiteOptions, tol: &ToleranceConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let p = AwParams::polynomial(0.3, 0.4, 0.5, 0.6, 0.5)?;
    let g = aw_gram(5, &p, tol)?;
    let scale = (0..6).map(|n| g[(n, n)].norm()).fold(0.0, f64::max);
    let mut off = CheckOutcome::below("Gram off-diagonal / scale", 1e-8);
    let mut diag = CheckOutcome::below("Gram diagonal vs norm (relative)", 1e-7);
    for n in 0..6 {
        for m in 0..6 {
            if n != m {
                off.record(g[(n, m)].norm() / scale);
            }
        }
        let h = aw_norm(n as u32, &p, tol)?;
        diag.record((g[(n, n)] - h).norm() / h.norm());
    }
    let mut eig = CheckOutcome::below("eigenvalue equation n <= 6", 1e-10);
    let mut agree = CheckOutcome::below("8W7 vs 4phi3 pair (relative)", 1e-9);
    let v = AwParams::transform(1.2, 0.5, 0.6, 2.5, -0.3, 0.5)?;
    let mut draws = 0;
    while agree.points < opts.count {
        draws += 1;
        if draws > MAX_REDRAWS * opts.count {
            return Err(QError::Region("too few draws where the 8W7 form converges".into()));
        }
        let x = C64::from_polar(rng.gen_range(0.6..1.4), rng.gen_range(0.1..3.0));
        let gamma = C64::from_polar(rng.gen_range(0.7..1.5), rng.gen_range(0.1..3.0));
        if eig.points < opts.count {
            for n in 0..=6u32 {
                let f = SymFunction::new(move |y| aw_poly(n, y, &p, tol));
                let rhs = p.eigenvalue(p.gamma_n(n)) * f.eval(x)?;
                eig.record((aw_operator(&f, x, &p)? - rhs).norm() / (1.0 + rhs.norm()));
            }
        }
        let w8 = match aw_function(gamma, x, &v, AwRepresentation::W8, tol) {
            Ok(w) => w.value,
            Err(QError::Region(_)) | Err(QError::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        };
        let pair = aw_function(gamma, x, &v, AwRepresentation::Pair43, tol)?.value;
        agree.record((w8 - pair).norm() / pair.norm().max(1e-300));
    }
    Ok(vec![off, diag, eig, agree])
}

fn matrix(opts: &SuiteOptions, tol: &ToleranceConfig, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    if opts.n == 0 {
        return Err(QError::Domain("matrix dimension must be at least 1".into()));
    }
    let q = Base::new(0.6)?;
    let mut at_zero = CheckOutcome::below("solutions at 0, |z| <= 0.5", 1e-9);
    let mut at_inf = CheckOutcome::below("solutions at infinity, |z| >= 4", 1e-9);
    let mut indep = CheckOutcome::above("independence (smallest singular value)", 1e-8);
    for _ in 0..opts.count {
        let t = random_generic_triple(opts.n, q, &mut || rng.gen::<f64>())?;
        let zero = solutions_at_zero(&t)?;
        let inf = solutions_at_infinity(&t)?;
        for _ in 0..4 {
            let z = C64::from_polar(rng.gen_range(0.1..0.5), rng.gen_range(0.0..2.0 * PI));
            for s in &zero {
                at_zero.record(residual(&t, |w| s.eval(w, tol), z)?);
            }
            let z = C64::from_polar(rng.gen_range(4.0..20.0), rng.gen_range(0.0..2.0 * PI));
            for s in &inf {
                at_inf.record(residual(&t, |w| s.eval(w, tol), z)?);
            }
        }
        indep.record(independence_measure(&zero, C64::from_polar(0.3, rng.gen_range(0.2..3.0)), tol)?);
    }
    Ok(vec![at_zero, at_inf, indep])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SuiteOptions {
        SuiteOptions { count: 3, seed, ..SuiteOptions::default() }
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn every_suite_passes_on_a_small_run() {
        for s in Suite::ALL {
            let r = run_suite(s, &small(7), &ToleranceConfig::default()).unwrap();
            assert!(r.passed(), "{s}: {:?}", r.checks);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let tol = ToleranceConfig::default();
        let a = run_suite(Suite::Identities, &small(3), &tol).unwrap();
        let b = run_suite(Suite::Identities, &small(3), &tol).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outcome_thresholds() {
        let mut below = CheckOutcome::below("x", 1.0);
        assert!(!below.passed());
        below.record(0.5);
        assert!(below.passed());
        below.record(f64::NAN);
        assert!(!below.passed());
        let mut above = CheckOutcome::above("y", 1.0);
        above.record(2.0);
        assert!(above.passed());
        above.record(0.5);
        assert!(!above.passed());
    }

    #[test]
    fn zero_count_is_rejected() {
        let opts = SuiteOptions { count: 0, ..SuiteOptions::default() };
        assert!(run_suite(Suite::Bhde, &opts, &ToleranceConfig::default()).is_err());
    }
}
