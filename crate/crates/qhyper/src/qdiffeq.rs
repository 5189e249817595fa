//! The second order q-difference operator of `2 phi 1`, its lowering/raising
//! factorisation, the four local solutions at 0 and infinity, and residual checks.

use std::collections::BTreeMap;

use crate::error::{QError, Result};
use crate::qcore::{c, cpow, lattice_index, log_q, qpoch_finite, qpoch_inf_all, theta_value, Base, ToleranceConfig, TruncatedValue, C64};
use crate::series::phi21;

const LATTICE_WINDOW: f64 = 1e-10;

/// Which lattice degeneracies the parameters sit on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Degeneracies {
    /// `c = q^{-m}`, `m >= 0`: `u1` is undefined.
    pub c_neg: bool,
    /// `c = q^{m}`, `m >= 2`: `u2` is undefined.
    pub c_pos2: bool,
    /// `a/b = q^{m}`, `m >= 1`: `u3` is undefined.
    pub u3: bool,
    /// `b/a = q^{m}`, `m >= 1`: `u4` is undefined.
    pub u4: bool,
}

/// Parameters `a, b, c` of the operator, with their degeneracy flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeomParams {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub q: Base,
    pub flags: Degeneracies,
}

impl HypergeomParams {
    pub fn new(a: C64, b: C64, cc: C64, q: Base) -> Result<Self> {
        if a.norm() == 0.0 || b.norm() == 0.0 || cc.norm() == 0.0 {
            return Err(QError::Domain("a, b and c must be nonzero".into()));
        }
        let idx = |x: C64| lattice_index(x, q, LATTICE_WINDOW);
        let flags = Degeneracies {
            c_neg: idx(cc).is_some_and(|k| k <= 0),
            c_pos2: idx(cc).is_some_and(|k| k >= 2),
            u3: idx(a / b).is_some_and(|k| k >= 1),
            u4: idx(b / a).is_some_and(|k| k >= 1),
        };
        Ok(HypergeomParams { a, b, c: cc, q, flags })
    }

    pub fn real(a: f64, b: f64, cc: f64, q: f64) -> Result<Self> {
        HypergeomParams::new(c(a), c(b), c(cc), Base::new(q)?)
    }

    /// Parameters `(aq, bq, cq)` of the Darboux transformed operator.
    pub fn shifted(&self) -> Result<Self> {
        let qv = self.q.value();
        HypergeomParams::new(self.a * qv, self.b * qv, self.c * qv, self.q)
    }

    fn swapped(&self) -> Self {
        HypergeomParams { a: self.b, b: self.a, flags: Degeneracies { u3: self.flags.u4, u4: self.flags.u3, ..self.flags }, ..*self }
    }
}

/// Samples of a function on the q-line `z0 q^k`, `k` in a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    anchor: C64,
    q: Base,
    values: BTreeMap<i64, C64>,
}

impl GridFunction {
    pub fn sample<F>(anchor: C64, q: Base, lo: i64, hi: i64, f: F) -> Result<Self>
    where
        F: Fn(C64) -> Result<C64>,
    {
        if anchor.norm() == 0.0 {
            return Err(QError::Domain("anchor must be nonzero".into()));
        }
        if lo > hi {
            return Err(QError::Domain(format!("empty support {lo}..={hi}")));
        }
        let mut values = BTreeMap::new();
        for k in lo..=hi {
            values.insert(k, f(anchor * q.powi(k))?);
        }
        Ok(GridFunction { anchor, q, values })
    }

    pub fn anchor(&self) -> C64 {
        self.anchor
    }

    pub fn support(&self) -> (i64, i64) {
        let lo = *self.values.keys().next().expect("nonempty by construction");
        let hi = *self.values.keys().next_back().expect("nonempty by construction");
        (lo, hi)
    }

    pub fn get(&self, k: i64) -> Option<C64> {
        self.values.get(&k).copied()
    }

    /// Scaled residuals of the q-difference equation at the interior grid points.
    pub fn bhde_residuals(&self, p: &HypergeomParams) -> Vec<(i64, f64)> {
        let (lo, hi) = self.support();
        ((lo + 1)..hi)
            .map(|k| {
                let z = self.anchor * self.q.powi(k);
                let r = bhde_terms(p, z, self.values[&(k + 1)], self.values[&k], self.values[&(k - 1)]);
                (k, r)
            })
            .collect()
    }
}

fn bhde_terms(p: &HypergeomParams, z: C64, u_qz: C64, u_z: C64, u_zq: C64) -> f64 {
    let qv = p.q.value();
    let t1 = (p.c - p.a * p.b * z) * u_qz;
    let t2 = ((p.a + p.b) * z - p.c - qv) * u_z;
    let t3 = (qv - z) * u_zq;
    (t1 + t2 + t3).norm() / (1.0 + t1.norm() + t2.norm() + t3.norm())
}

fn nonzero(x: C64) -> Result<()> {
    if x.norm() == 0.0 {
        Err(QError::Domain("operator undefined at z = 0".into()))
    } else {
        Ok(())
    }
}

/// `D_q f(x) = (f(x) - f(qx)) / ((1-q) x)`.
pub fn apply_dq<F: Fn(C64) -> Result<C64>>(f: F, x: C64, q: Base) -> Result<C64> {
    apply_dq_n(f, x, q, 1)
}

/// `n`-fold `D_q` from the values `f(q^k x)`, `k = 0..=n`.
pub fn apply_dq_n<F: Fn(C64) -> Result<C64>>(f: F, x: C64, q: Base, n: usize) -> Result<C64> {
    nonzero(x)?;
    let qv = q.value();
    let mut g = (0..=n).map(|k| f(x * qv.powi(k as i32))).collect::<Result<Vec<_>>>()?;
    for level in 0..n {
        for k in 0..(n - level) {
            g[k] = (g[k] - g[k + 1]) / ((1.0 - qv) * x * qv.powi(k as i32));
        }
    }
    Ok(g[0])
}

/// `D~_q f(x) = (f(qx) - f(x)) / x`.
pub fn apply_dq_tilde<F: Fn(C64) -> Result<C64>>(f: F, x: C64, q: Base) -> Result<C64> {
    nonzero(x)?;
    Ok((f(x * q.value())? - f(x)?) / x)
}

/// The operator `L` with `L u1 = (1-a)(1-b) u1`.
pub fn apply_l<F: Fn(C64) -> Result<C64>>(p: &HypergeomParams, f: F, z: C64) -> Result<C64> {
    nonzero(z)?;
    let qv = p.q.value();
    let fz = f(z)?;
    Ok((p.c - p.a * p.b * z) * (f(z * qv)? - fz) / z + (c(1.0) - z / qv) * (f(z / qv)? - fz) / (z / qv))
}

/// The raising factor `S` with `L = S o D~_q`.
pub fn apply_s<F: Fn(C64) -> Result<C64>>(p: &HypergeomParams, f: F, z: C64) -> Result<C64> {
    nonzero(z)?;
    let qv = p.q.value();
    Ok((p.c - p.a * p.b * z) * f(z)? - (c(1.0) - z / qv) * f(z / qv)?)
}

/// Scaled residual of the q-difference equation for `u` at `z`.
pub fn bhde_residual<F: Fn(C64) -> Result<C64>>(p: &HypergeomParams, u: F, z: C64) -> Result<f64> {
    nonzero(z)?;
    let qv = p.q.value();
    Ok(bhde_terms(p, z, u(z * qv)?, u(z)?, u(z / qv)?))
}

/// The local solution `u_i`, `i` in `1..=4`: two at the origin, two at infinity.
pub fn solution_u(i: u8, p: &HypergeomParams, z: C64, tol: &ToleranceConfig) -> Result<TruncatedValue> {
    let q = p.q;
    let qv = q.value();
    let (a, b, cc) = (p.a, p.b, p.c);
    match i {
        1 | 2 => {
            if z.norm() >= 1.0 {
                return Err(QError::Region(format!("u{i} needs |z| < 1, got {}", z.norm())));
            }
            if i == 1 {
                if p.flags.c_neg {
                    return Err(QError::Degenerate("c lies in q^{-N}".into()));
                }
                return phi21(a, b, cc, q, z, tol);
            }
            if p.flags.c_pos2 {
                return Err(QError::Degenerate("c lies in q^{2+N}".into()));
            }
            nonzero(z)?;
            let mu = c(1.0) - log_q(cc, q);
            let v = phi21(qv * a / cc, qv * b / cc, c(qv * qv) / cc, q, z, tol)?;
            Ok(v.scale(cpow(z, mu)))
        }
        3 | 4 => {
            let p = if i == 3 { *p } else { p.swapped() };
            if p.flags.u3 {
                return Err(QError::Degenerate(format!("u{i} undefined: the ratio of a and b lies on the lattice")));
            }
            nonzero(z)?;
            let w = qv * p.c / (p.a * p.b * z);
            if w.norm() >= 1.0 {
                return Err(QError::Region(format!("u{i} needs |qc/(abz)| < 1, got {}", w.norm())));
            }
            let v = phi21(p.a, qv * p.a / p.c, qv * p.a / p.b, q, w, tol)?;
            Ok(v.scale(cpow(z, -log_q(p.a, q))))
        }
        _ => Err(QError::Domain(format!("solution index {i} not in 1..=4"))),
    }
}

/// The q-periodic coefficient `C3` (or `C4`) in `u1 = C3 u3 + C4 u4`.
pub fn connection_coeff(which: u8, p: &HypergeomParams, z: C64) -> Result<C64> {
    let p = match which {
        3 => *p,
        4 => p.swapped(),
        _ => return Err(QError::Domain(format!("connection coefficient index {which} not in {{3, 4}}"))),
    };
    nonzero(z)?;
    let q = p.q;
    let den_theta = theta_value(z, q)?;
    if den_theta.norm() == 0.0 {
        return Err(QError::Pole { what: "theta(z)".into(), index: 0 });
    }
    let den = qpoch_inf_all(&[p.c, p.b / p.a], q)?;
    if den.norm() == 0.0 {
        return Err(QError::Pole { what: "(c, b/a; q)_inf".into(), index: 0 });
    }
    let num = qpoch_inf_all(&[p.b, p.c / p.a], q)? * theta_value(p.a * z, q)?;
    Ok(num / (den * den_theta) * cpow(z, log_q(p.a, q)))
}

/// Residual of the Darboux relation `D~_q S f = q^{-1} L' f + (1-q)(ab - 1/q) f`
/// with `L'` the operator at `(aq, bq, cq)`.
pub fn check_darboux<F: Fn(C64) -> Result<C64>>(p: &HypergeomParams, f: F, z: C64) -> Result<f64> {
    let q = p.q;
    let qv = q.value();
    let lhs = apply_dq_tilde(|x| apply_s(p, &f, x), z, q)?;
    let shifted = p.shifted()?;
    let rhs = apply_l(&shifted, &f, z)? / qv + (1.0 - qv) * (p.a * p.b - 1.0 / qv) * f(z)?;
    Ok((lhs - rhs).norm())
}

/// Prefactor `(a, b; q)_n / ((c; q)_n (1-q)^n)` of the `n`-th q-derivative of `2 phi 1`.
pub fn dq_power_prefactor(p: &HypergeomParams, n: usize) -> Result<C64> {
    let n = n as i64;
    let q = p.q;
    Ok(qpoch_finite(p.a, q, n)? * qpoch_finite(p.b, q, n)? / (qpoch_finite(p.c, q, n)? * (1.0 - q.value()).powi(n as i32)))
}
