//! First-order complex jets in two variables (forward-mode dual numbers).
//!
//! A [`Jet`] carries a value together with its partial derivatives with
//! respect to the two coordinates `x` and `y` of a point in C^2. All the
//! arithmetic below is holomorphic, so the chain rule is exact.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: C64,
    pub dx: C64,
    pub dy: C64,
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

impl Jet {
    pub const fn new(v: C64, dx: C64, dy: C64) -> Self {
        Self { v, dx, dy }
    }

    pub const fn constant(v: C64) -> Self {
        Self::new(v, ZERO, ZERO)
    }

    /// The coordinate function `x` evaluated at `v`.
    pub const fn var_x(v: C64) -> Self {
        Self::new(v, ONE, ZERO)
    }

    /// The coordinate function `y` evaluated at `v`.
    pub const fn var_y(v: C64) -> Self {
        Self::new(v, ZERO, ONE)
    }

    /// Applies a scalar holomorphic function with value `f` and derivative `df`.
    #[inline]
    fn chain(self, f: C64, df: C64) -> Self {
        Self::new(f, df * self.dx, df * self.dy)
    }

    pub fn sqr(self) -> Self {
        self.chain(self.v * self.v, self.v * 2.0)
    }

    pub fn recip(self) -> Self {
        let inv = self.v.inv();
        self.chain(inv, -inv * inv)
    }

    /// Principal branch logarithm.
    pub fn ln(self) -> Self {
        self.chain(self.v.ln(), self.v.inv())
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }

    /// Principal branch square root.
    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, (s * 2.0).inv())
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.v * k, self.dx * k, self.dy * k)
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.dx.is_finite() && self.dy.is_finite()
    }
}

impl From<C64> for Jet {
    fn from(v: C64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.v + o.v, self.dx + o.dx, self.dy + o.dy)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.v - o.v, self.dx - o.dx, self.dy - o.dy)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::new(
            self.v * o.v,
            self.dx * o.v + self.v * o.dx,
            self.dy * o.v + self.v * o.dy,
        )
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let inv = o.v.inv();
        let q = self.v * inv;
        Jet::new(q, (self.dx - q * o.dx) * inv, (self.dy - q * o.dy) * inv)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet::new(-self.v, -self.dx, -self.dy)
    }
}

impl Add<C64> for Jet {
    type Output = Jet;
    fn add(self, o: C64) -> Jet {
        Jet::new(self.v + o, self.dx, self.dy)
    }
}

impl Sub<C64> for Jet {
    type Output = Jet;
    fn sub(self, o: C64) -> Jet {
        Jet::new(self.v - o, self.dx, self.dy)
    }
}

impl Mul<C64> for Jet {
    type Output = Jet;
    fn mul(self, o: C64) -> Jet {
        Jet::new(self.v * o, self.dx * o, self.dy * o)
    }
}

impl Div<C64> for Jet {
    type Output = Jet;
    fn div(self, o: C64) -> Jet {
        let inv = o.inv();
        Jet::new(self.v * inv, self.dx * inv, self.dy * inv)
    }
}

impl Add<Jet> for C64 {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        o + self
    }
}

impl Sub<Jet> for C64 {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self - o.v, -o.dx, -o.dy)
    }
}

impl Mul<Jet> for C64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        o * self
    }
}
