//! Green functions G_a^+ and G_a^- and the degenerate G_0^-.

use serde::{Deserialize, Serialize};

use crate::bottcher::{log_phi_minus_ext_capped, log_phi_plus_ext_capped};
use crate::error::{Error, Result};
use crate::henon::{HenonParams, PointC2, RegionConstants};
use crate::poly::PolyParams;

/// Default iteration cap used as the K^± proxy.
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeValue {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub escaped: bool,
}

impl EscapeValue {
    pub(crate) fn bounded(iterations: usize) -> Self {
        Self {
            value: 0.0,
            iterations,
            converged: false,
            escaped: false,
        }
    }
}

fn depth_cap(max_iter: usize) -> u32 {
    max_iter.min(u32::MAX as usize) as u32
}

/// G_a^+ = 2^-n log|phi_+(f^n z)| once the orbit is in V+; 0 with
/// `converged` unset if it never gets there within `max_iter` steps.
pub fn green_plus(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
    max_iter: usize,
) -> EscapeValue {
    assert!(tol > 0.0, "tolerance must be positive");
    match log_phi_plus_ext_capped(h, rc, z, tol, depth_cap(max_iter)) {
        Ok(l) => EscapeValue {
            value: l.green(),
            iterations: l.depth as usize,
            converged: l.tail_bound < tol,
            escaped: true,
        },
        Err(_) => EscapeValue::bounded(max_iter),
    }
}

/// Normalized G_a^-: 2^-n (log|phi_-(f^-n z)| + sigma_n log|a|). Points whose
/// backward orbit never reaches V- get the value log|a|, flagged non-escaped.
pub fn green_minus(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
    max_iter: usize,
) -> Result<EscapeValue> {
    assert!(tol > 0.0, "tolerance must be positive");
    if h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    match log_phi_minus_ext_capped(h, rc, z, tol, depth_cap(max_iter)) {
        Ok(l) => Ok(EscapeValue {
            value: l.green(),
            iterations: l.depth as usize,
            converged: l.tail_bound < tol,
            escaped: true,
        }),
        Err(Error::NeverEntersVMinus { .. }) => Ok(EscapeValue {
            value: h.a.norm().ln(),
            iterations: max_iter,
            converged: false,
            escaped: false,
        }),
        Err(e) => Err(e),
    }
}

/// G_0^- = 1/2 log|p(y) - x|, -inf on the parabola x = p(y).
pub fn green_minus_degenerate(p: &PolyParams, z: PointC2) -> EscapeValue {
    let u = p.eval(z.y) - z.x;
    EscapeValue {
        value: 0.5 * u.norm().ln(),
        iterations: 0,
        converged: true,
        escaped: u.norm() > 0.0,
    }
}
