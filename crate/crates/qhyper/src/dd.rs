//! Complex double-double arithmetic on top of `twofloat`, for sums whose
//! terms cancel by several orders of magnitude.

use std::ops::{Add, Mul, Sub};

use twofloat::TwoFloat;

use crate::qcore::C64;

/// Quotient with one Newton correction; the crate's own division is only accurate to `f64`.
pub(crate) fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let y = a / b;
    y + (a - b * y) / b.hi()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Cdd {
    pub re: TwoFloat,
    pub im: TwoFloat,
}

impl Cdd {
    pub fn new(z: C64) -> Self {
        Cdd { re: TwoFloat::from(z.re), im: TwoFloat::from(z.im) }
    }

    pub fn one() -> Self {
        Cdd::new(C64::new(1.0, 0.0))
    }

    pub fn to_c64(self) -> C64 {
        C64::new(f64::from(self.re), f64::from(self.im))
    }

    /// Modulus to `f64` accuracy.
    pub fn norm(self) -> f64 {
        self.to_c64().norm()
    }

    pub fn scale(self, s: TwoFloat) -> Self {
        Cdd { re: self.re * s, im: self.im * s }
    }

    pub fn div(self, b: Cdd) -> Cdd {
        let den = b.re * b.re + b.im * b.im;
        let nr = self.re * b.re + self.im * b.im;
        let ni = self.im * b.re - self.re * b.im;
        Cdd { re: dd_div(nr, den), im: dd_div(ni, den) }
    }
}

impl Add for Cdd {
    type Output = Cdd;
    fn add(self, b: Cdd) -> Cdd {
        Cdd { re: self.re + b.re, im: self.im + b.im }
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    fn sub(self, b: Cdd) -> Cdd {
        Cdd { re: self.re - b.re, im: self.im - b.im }
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    fn mul(self, b: Cdd) -> Cdd {
        Cdd { re: self.re * b.re - self.im * b.im, im: self.re * b.im + self.im * b.re }
    }
}
