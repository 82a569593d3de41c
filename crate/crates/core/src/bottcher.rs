//! Böttcher coordinates phi_+ and phi_- of the Hénon map via the telescopic
//! products, their dynamical extensions phi^{2^n}, and first-order jets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::henon::{
    forward_jet, in_vminus, in_vplus, inverse_jet, HenonParams, PointC2, RegionConstants,
};
use crate::jet::{Jet, C64};
use crate::poly::{log_bottcher_poly, MAX_TELESCOPE};

/// Past this depth the 2^-n annuli drop below binary64 resolution.
pub const MAX_EXTENSION_DEPTH: u32 = 24;

const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BottcherJet {
    pub value: C64,
    pub d_dx: C64,
    pub d_dy: C64,
    pub depth: u32,
    pub tail_bound: f64,
}

impl BottcherJet {
    pub(crate) fn from_log(log: Jet, depth: u32, tail_bound: f64) -> Self {
        let value = log.v.exp();
        Self {
            value,
            d_dx: value * log.dx,
            d_dy: value * log.dy,
            depth,
            tail_bound,
        }
    }
}

/// Logarithm of phi^{2^n} as a jet. `raw` is log(phi^{2^n}) on some branch;
/// dividing by 2^depth gives the depth-independent log-derivative of phi.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogJet {
    pub raw: Jet,
    pub depth: u32,
    pub tail_bound: f64,
}

impl LogJet {
    pub fn scale(&self) -> f64 {
        0.5f64.powi(self.depth as i32)
    }

    /// (d/dx, d/dy) of log phi, independent of the extension depth.
    pub fn normalized_grad(&self) -> (C64, C64) {
        let s = self.scale();
        (self.raw.dx * s, self.raw.dy * s)
    }

    /// 2^-depth Re log phi^{2^depth}.
    pub fn green(&self) -> f64 {
        self.raw.v.re * self.scale()
    }

    pub fn to_bottcher(&self) -> BottcherJet {
        BottcherJet::from_log(self.raw, self.depth, self.tail_bound)
    }
}

pub fn sigma(k: i32) -> u64 {
    if k <= 0 {
        0
    } else {
        (1u64 << k) - 1
    }
}

// Forward telescope from a point of V+: log x + sum 2^-n log(1 + s_n) with
// s_n = (c - a y_{n-1}) / x_{n-1}^2.
fn telescope_plus(h: &HenonParams, mut x: Jet, mut y: Jet, tol: f64) -> Result<(Jet, f64)> {
    let cabs = h.c.norm();
    let aabs = h.a.norm();
    let mut acc = x.ln();
    let mut weight = 1.0f64;
    for step in 1..=MAX_TELESCOPE {
        let xn = x.v.norm();
        // every later factor satisfies |s| <= rho (standing-inequality ratio at the current iterate)
        let rho = cabs / (xn * xn) + aabs / xn;
        if rho < 1.0 {
            let tail = weight * -(1.0 - rho).ln();
            if tail < tol {
                return Ok((acc, tail));
            }
        }
        let s = (Jet::constant(h.c) - y * h.a) / x.sqr();
        let m = s.v.norm();
        if !(m < 1.0) {
            return Err(Error::BranchFailure { step, modulus: m });
        }
        weight *= 0.5;
        acc = acc + (s + ONE).ln().scale(weight);
        (x, y) = forward_jet(h, x, y);
    }
    Err(Error::NoConvergence {
        stage: "phi_plus telescope",
        steps: MAX_TELESCOPE,
        residual: weight,
    })
}

// Backward telescope from a point of V-: log y + sum 2^-n log(1 + s_n) with
// 1 + s_n = a y_{-n} / y_{-(n-1)}^2, s_n = (c - x_{-(n-1)}) / y_{-(n-1)}^2.
fn telescope_minus(h: &HenonParams, mut x: Jet, mut y: Jet, tol: f64) -> Result<(Jet, f64)> {
    let cabs = h.c.norm();
    let mut acc = y.ln();
    let mut weight = 1.0f64;
    for step in 1..=MAX_TELESCOPE {
        let yn = y.v.norm();
        let rho = cabs / (yn * yn) + 1.0 / yn;
        if rho < 1.0 {
            let tail = weight * -(1.0 - rho).ln();
            if tail < tol {
                return Ok((acc, tail));
            }
        }
        let s = (Jet::constant(h.c) - x) / y.sqr();
        let m = s.v.norm();
        if !(m < 1.0) {
            return Err(Error::BranchFailure { step, modulus: m });
        }
        weight *= 0.5;
        acc = acc + (s + ONE).ln().scale(weight);
        (x, y) = inverse_jet(h, x, y);
    }
    Err(Error::NoConvergence {
        stage: "phi_minus telescope",
        steps: MAX_TELESCOPE,
        residual: weight,
    })
}

fn base_plus(h: &HenonParams, x: Jet, y: Jet, tol: f64) -> Result<(Jet, f64)> {
    if h.is_degenerate() {
        // phi_{0,+}(x, y) = b_p(x)
        log_bottcher_poly(&h.poly(), x, tol)
    } else {
        telescope_plus(h, x, y, tol)
    }
}

fn start_jets(z: PointC2) -> (Jet, Jet) {
    (Jet::var_x(z.x), Jet::var_y(z.y))
}

pub fn log_phi_plus(h: &HenonParams, rc: &RegionConstants, z: PointC2, tol: f64) -> Result<LogJet> {
    if !in_vplus(rc.alpha, z.x, z.y) {
        return Err(Error::OutsideDomain { x: z.x, y: z.y });
    }
    let (x, y) = start_jets(z);
    let (raw, tail_bound) = base_plus(h, x, y, tol)?;
    Ok(LogJet {
        raw,
        depth: 0,
        tail_bound,
    })
}

pub fn phi_plus(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
) -> Result<BottcherJet> {
    log_phi_plus(h, rc, z, tol).map(|l| l.to_bottcher())
}

/// log phi_+^{2^n} = log phi_+ o f^n at the smallest n <= max_depth with f^n z in V+.
pub fn log_phi_plus_ext_capped(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
    max_depth: u32,
) -> Result<LogJet> {
    let (mut x, mut y) = start_jets(z);
    for depth in 0..=max_depth {
        if in_vplus(rc.alpha, x.v, y.v) {
            let (raw, tail_bound) = base_plus(h, x, y, tol)?;
            return Ok(LogJet {
                raw,
                depth,
                tail_bound,
            });
        }
        (x, y) = forward_jet(h, x, y);
        if !x.is_finite() || !y.is_finite() {
            break;
        }
    }
    Err(Error::NeverEntersVPlus { max_depth })
}

pub fn log_phi_plus_ext(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
) -> Result<LogJet> {
    log_phi_plus_ext_capped(h, rc, z, tol, MAX_EXTENSION_DEPTH)
}

pub fn phi_plus_ext(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
) -> Result<BottcherJet> {
    log_phi_plus_ext(h, rc, z, tol).map(|l| l.to_bottcher())
}

/// log phi_+^{2^n} at a prescribed depth n, which must put f^n z in V+.
pub fn log_phi_plus_at_depth(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    depth: u32,
    tol: f64,
) -> Result<LogJet> {
    let (mut x, mut y) = start_jets(z);
    for _ in 0..depth {
        (x, y) = forward_jet(h, x, y);
    }
    if !in_vplus(rc.alpha, x.v, y.v) {
        return Err(Error::NeverEntersVPlus { max_depth: depth });
    }
    let (raw, tail_bound) = base_plus(h, x, y, tol)?;
    Ok(LogJet {
        raw,
        depth,
        tail_bound,
    })
}

pub fn log_phi_minus(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
) -> Result<LogJet> {
    if h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    if !in_vminus(rc.alpha, z.x, z.y) {
        return Err(Error::OutsideDomain { x: z.x, y: z.y });
    }
    let (x, y) = start_jets(z);
    let (raw, tail_bound) = telescope_minus(h, x, y, tol)?;
    Ok(LogJet {
        raw,
        depth: 0,
        tail_bound,
    })
}

pub fn phi_minus(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
) -> Result<BottcherJet> {
    log_phi_minus(h, rc, z, tol).map(|l| l.to_bottcher())
}

/// log phi_-^{2^n} = sigma_n log a + log phi_- o f^-n at the smallest valid n.
/// At a = 0 this is log(p(y) - x) with n = 1.
pub fn log_phi_minus_ext_capped(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
    max_depth: u32,
) -> Result<LogJet> {
    let (mut x, mut y) = start_jets(z);
    if h.is_degenerate() {
        let u = h.poly().eval_jet(y) - x;
        if u.v == C64::new(0.0, 0.0) {
            return Err(Error::OnDegenerateParabola);
        }
        return Ok(LogJet {
            raw: u.ln(),
            depth: 1,
            tail_bound: 0.0,
        });
    }
    let log_a = h.a.ln();
    for depth in 0..=max_depth {
        if in_vminus(rc.alpha, x.v, y.v) {
            let (tele, tail_bound) = telescope_minus(h, x, y, tol)?;
            let raw = tele + log_a * sigma(depth as i32) as f64;
            return Ok(LogJet {
                raw,
                depth,
                tail_bound,
            });
        }
        (x, y) = inverse_jet(h, x, y);
        if !x.is_finite() || !y.is_finite() {
            break;
        }
    }
    Err(Error::NeverEntersVMinus { max_depth })
}

pub fn log_phi_minus_ext(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
) -> Result<LogJet> {
    log_phi_minus_ext_capped(h, rc, z, tol, MAX_EXTENSION_DEPTH)
}

pub fn phi_minus_ext(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
) -> Result<BottcherJet> {
    log_phi_minus_ext(h, rc, z, tol).map(|l| l.to_bottcher())
}

/// log phi_-^{2^n} at a prescribed depth (a != 0).
pub fn log_phi_minus_at_depth(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    depth: u32,
    tol: f64,
) -> Result<LogJet> {
    if h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    let (mut x, mut y) = start_jets(z);
    for _ in 0..depth {
        (x, y) = inverse_jet(h, x, y);
    }
    if !in_vminus(rc.alpha, x.v, y.v) {
        return Err(Error::NeverEntersVMinus { max_depth: depth });
    }
    let (tele, tail_bound) = telescope_minus(h, x, y, tol)?;
    Ok(LogJet {
        raw: tele + h.a.ln() * sigma(depth as i32) as f64,
        depth,
        tail_bound,
    })
}
