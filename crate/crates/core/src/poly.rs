//! One-dimensional dynamics of p(x) = x^2 + c.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bottcher::BottcherJet;
use crate::error::{Error, Result};
use crate::escape::EscapeValue;
use crate::jet::{Jet, C64};

/// Largest preimage depth accepted by default (2^16 roots).
pub const DEFAULT_DEPTH_CAP: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyParams {
    pub c: C64,
}

impl PolyParams {
    pub fn new(c: C64) -> Self {
        Self { c }
    }

    #[inline]
    pub fn eval(&self, x: C64) -> C64 {
        x * x + self.c
    }

    #[inline]
    pub fn eval_jet(&self, x: Jet) -> Jet {
        x.sqr() + self.c
    }

    /// Radius beyond which orbits escape monotonically.
    pub fn escape_radius(&self) -> f64 {
        self.c.norm().max(2.0) + 1.0
    }

    /// Iterates `x` under `p` `n` times.
    pub fn iterate(&self, mut x: C64, n: u32) -> C64 {
        for _ in 0..n {
            x = self.eval(x);
        }
        x
    }
}

pub fn poly_eval(p: &PolyParams, x: C64) -> C64 {
    p.eval(x)
}

/// Green function of `p` at `x`.
///
/// Iterates until the orbit leaves the escape radius, then keeps going until
/// successive estimates `2^-n log|p^n(x)|` differ by less than `tol`. The
/// iteration is carried in log-space once `|x_n|` is large so it never
/// overflows.
pub fn green_poly(p: &PolyParams, x: C64, tol: f64, max_iter: usize) -> EscapeValue {
    assert!(tol > 0.0, "tolerance must be positive");
    let er = p.escape_radius();
    let mut z = x;
    let mut n = 0usize;
    while z.norm() <= er {
        if n >= max_iter {
            return EscapeValue::bounded(n);
        }
        z = p.eval(z);
        n += 1;
    }
    let mut scale = 0.5f64.powi(n as i32);
    let mut g = scale * z.norm().ln();
    // successive differences are 2^-(n+1) log|1 + c/x_n^2|
    for k in 0.. {
        let q = p.c / (z * z);
        let step = 0.5 * scale * (C64::new(1.0, 0.0) + q).norm().ln();
        g += step;
        scale *= 0.5;
        if step.abs() < tol || q.norm() < f64::EPSILON * tol || n + k + 1 >= max_iter + 64 {
            return EscapeValue {
                value: g,
                iterations: n + k + 1,
                converged: step.abs() < tol || q.norm() < f64::EPSILON * tol,
                escaped: true,
            };
        }
        z = p.eval(z);
        if !z.is_finite() {
            // the remaining increments are far below any tolerance
            return EscapeValue {
                value: g,
                iterations: n + k + 1,
                converged: true,
                escaped: true,
            };
        }
    }
    unreachable!()
}

/// Böttcher coordinate `b_p` through the telescopic product
/// `b_p(x) = x prod (x_n / x_{n-1}^2)^{2^-n}` with principal logarithms.
pub fn bottcher_poly(p: &PolyParams, x: C64, tol: f64) -> Result<BottcherJet> {
    let (log, tail) = log_bottcher_poly(p, Jet::var_x(x), tol)?;
    Ok(BottcherJet::from_log(log, 0, tail))
}

/// `log b_p` as a jet in whatever variables `x` carries, with its tail bound.
pub(crate) fn log_bottcher_poly(p: &PolyParams, x: Jet, tol: f64) -> Result<(Jet, f64)> {
    let er = p.escape_radius();
    let cabs = p.c.norm();
    let mut z = x;
    let mut acc = x.ln();
    let mut weight = 1.0f64;
    for step in 1..=MAX_TELESCOPE {
        let zn = z.v.norm();
        let rho = cabs / (zn * zn);
        if zn >= er && rho < 1.0 && weight * -(1.0 - rho).ln() < tol {
            return Ok((acc, weight * -(1.0 - rho).ln()));
        }
        let s = Jet::constant(p.c) / z.sqr();
        let m = s.v.norm();
        if m >= 1.0 || !m.is_finite() {
            return Err(Error::BranchFailure { step, modulus: m });
        }
        weight *= 0.5;
        acc = acc + (s + C64::new(1.0, 0.0)).ln().scale(weight);
        z = p.eval_jet(z);
    }
    Err(Error::NoConvergence {
        stage: "bottcher_poly",
        steps: MAX_TELESCOPE,
        residual: weight,
    })
}

pub(crate) const MAX_TELESCOPE: usize = 200;

/// Binary address of a root of `p^k(x) = 0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PreimageAddress {
    pub bits: Vec<u8>,
}

impl PreimageAddress {
    pub fn root() -> Self {
        Self { bits: Vec::new() }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        assert!(bits.iter().all(|&b| b < 2), "address bits must be 0 or 1");
        Self {
            bits: bits.to_vec(),
        }
    }

    pub fn depth(&self) -> usize {
        self.bits.len()
    }

    pub fn child(&self, bit: u8) -> Self {
        let mut bits = self.bits.clone();
        bits.push(bit);
        Self::from_bits(&bits)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.bits.is_empty() {
            None
        } else {
            Some(Self::from_bits(&self.bits[..self.bits.len() - 1]))
        }
    }

    /// All addresses of a given depth in lexicographic order.
    pub fn all(depth: usize) -> Vec<Self> {
        (0..1usize << depth)
            .map(|i| {
                let bits: Vec<u8> = (0..depth)
                    .map(|j| ((i >> (depth - 1 - j)) & 1) as u8)
                    .collect();
                Self { bits }
            })
            .collect()
    }

    /// The root of `p^k = 0` labelled by this address.
    pub fn point(&self, p: &PolyParams) -> C64 {
        self.bits
            .iter()
            .fold(C64::new(0.0, 0.0), |xi, &b| branch(p, xi, b))
    }

    /// Address of depth `depth` of the slab component containing `x`,
    /// read off from the half-plane of each orbit point.
    pub fn of_point(p: &PolyParams, x: C64, depth: usize) -> Self {
        let mut orbit = Vec::with_capacity(depth);
        let mut z = x;
        for _ in 0..depth {
            orbit.push(z);
            z = p.eval(z);
        }
        let bits = orbit.iter().rev().map(|z| branch_bit(*z)).collect();
        Self { bits }
    }
}

impl fmt::Display for PreimageAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            return write!(f, "-");
        }
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PreimageAddress {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "-" || s.is_empty() {
            return Ok(Self::root());
        }
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(format!("invalid address digit {other:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(|bits| Self { bits })
    }
}

/// Bit 0 is the principal square root of `xi - c`, bit 1 its negative.
pub fn branch(p: &PolyParams, xi: C64, bit: u8) -> C64 {
    let s = (xi - p.c).sqrt();
    if bit == 0 {
        s
    } else {
        -s
    }
}

/// Which branch a point lies on: 0 for the closed right half-plane side of
/// the principal root (ties on the imaginary axis go to `Im > 0`).
pub fn branch_bit(z: C64) -> u8 {
    if z.re > 0.0 || (z.re == 0.0 && z.im >= 0.0) {
        0
    } else {
        1
    }
}

pub fn preimages_of_zero(p: &PolyParams, k: u32) -> Result<BTreeMap<PreimageAddress, C64>> {
    preimages_of_zero_capped(p, k, DEFAULT_DEPTH_CAP)
}

pub fn preimages_of_zero_capped(
    p: &PolyParams,
    k: u32,
    cap: u32,
) -> Result<BTreeMap<PreimageAddress, C64>> {
    if k > cap {
        return Err(Error::DepthTooLarge { depth: k, cap });
    }
    let mut level = vec![(PreimageAddress::root(), C64::new(0.0, 0.0))];
    for _ in 0..k {
        level = level
            .into_iter()
            .flat_map(|(addr, xi)| [0u8, 1].map(|b| (addr.child(b), branch(p, xi, b))))
            .collect();
    }
    Ok(level.into_iter().collect())
}
