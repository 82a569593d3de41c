//! The Hénon map f_a(x, y) = (x^2 + c - a y, x), its inverse, orbits, the
//! V+/V-/W partition and the region constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, C64};
use crate::poly::{green_poly, PolyParams};

/// Orbit coordinates beyond this modulus are reported as overflow.
pub const OVERFLOW_LIMIT: f64 = 1e300;

const GREEN_TOL: f64 = 1e-14;
const GREEN_MAX_ITER: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HenonParams {
    pub c: C64,
    pub a: C64,
    /// Bound on |a| used by the region constants.
    pub big_r: f64,
}

impl HenonParams {
    pub fn new(c: C64, a: C64, big_r: f64) -> Self {
        assert!(big_r > 0.0, "R must be positive");
        assert!(a.norm() < big_r, "|a| must be smaller than R");
        Self { c, a, big_r }
    }

    pub fn poly(&self) -> PolyParams {
        PolyParams::new(self.c)
    }

    pub fn with_a(&self, a: C64) -> Self {
        Self::new(self.c, a, self.big_r)
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == C64::new(0.0, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointC2 {
    pub x: C64,
    pub y: C64,
}

impl PointC2 {
    pub const fn new(x: C64, y: C64) -> Self {
        Self { x, y }
    }

    pub fn re(x: f64, y: f64) -> Self {
        Self::new(C64::new(x, 0.0), C64::new(y, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Euclidean distance in C^2 = R^4.
    pub fn dist(&self, o: &PointC2) -> f64 {
        ((self.x - o.x).norm_sqr() + (self.y - o.y).norm_sqr()).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.x.norm_sqr() + self.y.norm_sqr()).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    VPlus,
    VMinus,
    W,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionConstants {
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// Level r' with r < r' < G_p(c) used for the cone boxes.
    pub r_prime: f64,
    /// Horizontal cone constant C_h < min{2|x| : G_p(x) <= r'/2}.
    pub horizontal_c: f64,
    pub g0: f64,
    pub gc: f64,
}

impl RegionConstants {
    /// Constants with a hand-picked alpha and the rest left at placeholder
    /// values; only meant for classification tests.
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            r: 0.5,
            alpha,
            beta: 1.0,
            kappa: 1.0,
            lambda: 0.0625,
            epsilon: 0.1,
            r_prime: 0.6,
            horizontal_c: 1.0,
            g0: 0.0,
            gc: 1.0,
        }
    }
}

#[inline]
pub fn henon_forward(h: &HenonParams, z: PointC2) -> PointC2 {
    PointC2::new(z.x * z.x + h.c - h.a * z.y, z.x)
}

pub fn henon_inverse(h: &HenonParams, z: PointC2) -> Result<PointC2> {
    if h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    Ok(PointC2::new(z.y, (z.y * z.y + h.c - z.x) / h.a))
}

#[inline]
pub(crate) fn forward_jet(h: &HenonParams, x: Jet, y: Jet) -> (Jet, Jet) {
    (x.sqr() + h.c - y * h.a, x)
}

#[inline]
pub(crate) fn inverse_jet(h: &HenonParams, x: Jet, y: Jet) -> (Jet, Jet) {
    (y, (y.sqr() + h.c - x) / h.a)
}

/// Derivative of the forward map, rows (dx', dy').
pub fn jacobian(h: &HenonParams, z: PointC2) -> [[C64; 2]; 2] {
    [[z.x * 2.0, -h.a], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]]
}

/// Derivative of the inverse map.
pub fn inverse_jacobian(h: &HenonParams, z: PointC2) -> Result<[[C64; 2]; 2]> {
    if h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    let ia = h.a.inv();
    Ok([
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        [-ia, z.y * 2.0 * ia],
    ])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    pub points: Vec<PointC2>,
    pub overflowed: bool,
}

/// Forward orbit for `n > 0`, backward for `n < 0`; `|n| + 1` points unless
/// the orbit overflows, in which case it is truncated and flagged.
pub fn orbit(h: &HenonParams, z: PointC2, n: i64) -> Result<Orbit> {
    if n < 0 && h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    let mut points = Vec::with_capacity(n.unsigned_abs() as usize + 1);
    points.push(z);
    let mut cur = z;
    for _ in 0..n.unsigned_abs() {
        cur = if n > 0 {
            henon_forward(h, cur)
        } else {
            henon_inverse(h, cur)?
        };
        if !cur.is_finite() || cur.x.norm() > OVERFLOW_LIMIT || cur.y.norm() > OVERFLOW_LIMIT {
            return Ok(Orbit {
                points,
                overflowed: true,
            });
        }
        points.push(cur);
    }
    Ok(Orbit {
        points,
        overflowed: false,
    })
}

/// Partition of C^2; ties |x| = |y| > alpha go to V+.
pub fn classify_region(rc: &RegionConstants, z: PointC2) -> RegionTag {
    let ax = z.x.norm();
    let ay = z.y.norm();
    if ax > rc.alpha && ax >= ay {
        RegionTag::VPlus
    } else if ay > rc.alpha && ay > ax {
        RegionTag::VMinus
    } else {
        RegionTag::W
    }
}

pub(crate) fn in_vplus(alpha: f64, x: C64, y: C64) -> bool {
    let ax = x.norm();
    ax > alpha && ax >= y.norm()
}

pub(crate) fn in_vminus(alpha: f64, x: C64, y: C64) -> bool {
    let ay = y.norm();
    ay > alpha && ay > x.norm()
}

fn green(p: &PolyParams, x: C64) -> f64 {
    green_poly(p, x, GREEN_TOL, GREEN_MAX_ITER).value
}

/// Left side of the first standing inequality at |y| = t.
pub fn standing_lhs(p: &PolyParams, big_r: f64, t: f64) -> f64 {
    p.c.norm() / (t * t) + (big_r + 1.0) / t
}

fn alpha_ok(p: &PolyParams, big_r: f64, r: f64, alpha: f64) -> bool {
    if standing_lhs(p, big_r, alpha) >= r {
        return false;
    }
    (0..64).all(|k| {
        let y = C64::from_polar(alpha, std::f64::consts::TAU * k as f64 / 64.0);
        let image_ok = p.eval(y).norm() > (2.0 * big_r + 1.0) * alpha;
        image_ok && green(p, y) > r
    })
}

/// Grid over the escape-radius box used for the sublevel-set extrema.
fn sublevel_grid(p: &PolyParams, n: usize) -> (Vec<(C64, f64)>, f64) {
    let er = p.escape_radius();
    let h = 2.0 * er / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = C64::new(-er + i as f64 * h, -er + j as f64 * h);
            out.push((x, green(p, x)));
        }
    }
    (out, h)
}

pub fn select_constants(p: &PolyParams, big_r: f64) -> Result<RegionConstants> {
    assert!(big_r > 0.0, "R must be positive");
    let g0 = green(p, C64::new(0.0, 0.0));
    let gc = green(p, p.c);
    let r = 0.5 * (g0 + gc);
    if !(g0 > 1e-9 && gc > g0 && r < 1.0) {
        return Err(Error::InfeasibleConstants { g0, gc });
    }
    let mut alpha = p.c.norm().max(2.0 * big_r + 2.0);
    while !alpha_ok(p, big_r, r, alpha) {
        alpha *= 2.0;
        if alpha > 1e12 {
            return Err(Error::InfeasibleConstants { g0, gc });
        }
    }
    let r_prime = 0.5 * (r + gc);
    let (grid, h) = sublevel_grid(p, 401);
    let mut max_p = 0.0f64;
    let mut max_dp = 0.0f64;
    let mut min_x = f64::INFINITY;
    for &(x, g) in &grid {
        if g <= r {
            max_p = max_p.max(p.eval(x).norm());
            max_dp = max_dp.max(2.0 * x.norm());
        }
        if g <= 0.5 * r_prime {
            min_x = min_x.min(x.norm());
        }
    }
    let beta = 2.0 * (max_p + h * max_dp);
    // the grid minimum overestimates the true minimum by at most one diagonal
    let horizontal_c = 0.9 * 2.0 * (min_x - h * std::f64::consts::SQRT_2).max(0.0);
    if horizontal_c <= 0.0 {
        return Err(Error::InfeasibleConstants { g0, gc });
    }
    let kappa = select_kappa(horizontal_c, alpha);
    Ok(RegionConstants {
        r,
        alpha,
        beta,
        kappa,
        lambda: r / 8.0,
        epsilon: kappa / 10.0,
        r_prime,
        horizontal_c,
        g0,
        gc,
    })
}

/// Smallest level (on a 0.01 grid) at which every sampled leaf of the
/// degenerate foliation p(y) - x = const is tangent to the horizontal cones.
fn select_kappa(horizontal_c: f64, alpha: f64) -> f64 {
    let mut level = 0.01;
    while level < alpha {
        let all_horizontal = (0..64).all(|k| {
            let y = C64::from_polar(level, std::f64::consts::TAU * k as f64 / 64.0);
            // leaf tangent (xi, eta) = (p'(y), 1)
            let xi = y * 2.0;
            xi.norm() > horizontal_c * 1.0
        });
        if all_horizontal {
            return level;
        }
        level += 0.01;
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn h(a: f64) -> HenonParams {
        HenonParams::new(c(-3.0, 0.0), c(a, 0.0), 0.1)
    }

    fn close(u: PointC2, v: PointC2, tol: f64) -> bool {
        u.dist(&v) <= tol * v.norm().max(1.0)
    }

    #[test]
    fn forward_examples() {
        let z = henon_forward(&h(0.01), PointC2::re(1.0, 2.0));
        assert!(close(z, PointC2::re(-2.02, 1.0), 1e-15));
        assert_eq!(
            henon_forward(&h(0.01), PointC2::re(0.0, 0.0)),
            PointC2::re(-3.0, 0.0)
        );
        let z0 = PointC2::new(c(0.3, 1.0), c(-2.0, 0.5));
        let p = h(0.0).poly();
        assert_eq!(henon_forward(&h(0.0), z0), PointC2::new(p.eval(z0.x), z0.x));
    }

    #[test]
    fn inverse_examples() {
        let z = henon_inverse(&h(0.01), PointC2::re(-2.02, 1.0)).unwrap();
        assert!(close(z, PointC2::re(1.0, 2.0), 1e-12));
        let z = henon_inverse(&h(0.01), PointC2::re(-3.0, 0.0)).unwrap();
        assert!(close(z, PointC2::re(0.0, 0.0), 1e-15));
        assert_eq!(
            henon_inverse(&h(0.0), PointC2::re(1.0, 1.0)),
            Err(Error::DegenerateJacobian)
        );
    }

    #[test]
    fn classify_examples() {
        let rc = RegionConstants::with_alpha(5.0);
        assert_eq!(
            classify_region(&rc, PointC2::re(10.0, 1.0)),
            RegionTag::VPlus
        );
        assert_eq!(
            classify_region(&rc, PointC2::re(1.0, 10.0)),
            RegionTag::VMinus
        );
        assert_eq!(classify_region(&rc, PointC2::re(1.0, 1.0)), RegionTag::W);
        // tie-break
        assert_eq!(
            classify_region(&rc, PointC2::re(7.0, -7.0)),
            RegionTag::VPlus
        );
        assert_eq!(classify_region(&rc, PointC2::re(5.0, 5.0)), RegionTag::W);
    }

    #[test]
    fn orbit_examples() {
        let z = PointC2::re(1.0, 2.0);
        assert_eq!(orbit(&h(0.01), z, 0).unwrap().points, vec![z]);
        let fwd = orbit(&h(0.01), z, 1).unwrap();
        assert_eq!(fwd.points.len(), 2);
        assert!(close(fwd.points[1], PointC2::re(-2.02, 1.0), 1e-15));
        let back = orbit(&h(0.01), z, -1).unwrap();
        assert!(close(back.points[1], PointC2::re(2.0, 0.0), 1e-15));
        assert_eq!(orbit(&h(0.0), z, -3), Err(Error::DegenerateJacobian));
        let big = orbit(&h(0.01), PointC2::re(10.0, 0.0), 40).unwrap();
        assert!(big.overflowed && big.points.len() < 41);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let hh = HenonParams::new(c(-3.0, 0.0), c(0.02, 0.01), 0.1);
        let z = PointC2::new(c(0.7, -0.2), c(1.5, 0.4));
        let j = jacobian(&hh, z);
        let e = 1e-6;
        let fx = |dx: C64, dy: C64| henon_forward(&hh, PointC2::new(z.x + dx, z.y + dy));
        let col_x = {
            let (p, m) = (fx(c(e, 0.0), c(0.0, 0.0)), fx(c(-e, 0.0), c(0.0, 0.0)));
            [(p.x - m.x) / (2.0 * e), (p.y - m.y) / (2.0 * e)]
        };
        let col_y = {
            let (p, m) = (fx(c(0.0, 0.0), c(e, 0.0)), fx(c(0.0, 0.0), c(-e, 0.0)));
            [(p.x - m.x) / (2.0 * e), (p.y - m.y) / (2.0 * e)]
        };
        for i in 0..2 {
            assert!((j[i][0] - col_x[i]).norm() < 1e-8);
            assert!((j[i][1] - col_y[i]).norm() < 1e-8);
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        assert!((det - hh.a).norm() < 1e-15);
        let ji = inverse_jacobian(&hh, henon_forward(&hh, z)).unwrap();
        let dinv = ji[0][0] * ji[1][1] - ji[0][1] * ji[1][0];
        assert!((dinv * hh.a - 1.0).norm() < 1e-12);
    }

    #[test]
    fn constants_for_default_instance() {
        let p = PolyParams::new(c(-3.0, 0.0));
        let rc = select_constants(&p, 0.1).unwrap();
        let g0 = green_poly(&p, c(0.0, 0.0), 1e-15, 500).value;
        let gc = green_poly(&p, c(-3.0, 0.0), 1e-15, 500).value;
        assert!(g0 < rc.r && rc.r < gc);
        assert!(rc.r > 0.0 && rc.r < 1.0);
        // independent evaluation of the standing-inequality left side at |y| = alpha
        let lhs = 3.0 / (rc.alpha * rc.alpha) + 1.1 / rc.alpha;
        assert!(lhs < rc.r, "{lhs} vs {}", rc.r);
        assert_eq!(rc.alpha, 6.0);
        assert!(rc.lambda < rc.r / 4.0);
        assert!((rc.epsilon - rc.kappa / 10.0).abs() < 1e-15);
        assert!(rc.r < rc.r_prime && rc.r_prime < gc);
        assert!(rc.beta > 0.0 && rc.horizontal_c > 0.0);
    }

    #[test]
    fn connected_julia_set_is_infeasible() {
        let p = PolyParams::new(c(0.25, 0.0));
        assert!(matches!(
            select_constants(&p, 0.1),
            Err(Error::InfeasibleConstants { .. })
        ));
    }

    fn default_rc() -> RegionConstants {
        static RC: std::sync::OnceLock<RegionConstants> = std::sync::OnceLock::new();
        *RC.get_or_init(|| select_constants(&PolyParams::new(c(-3.0, 0.0)), 0.1).unwrap())
    }

    fn arb_a() -> impl Strategy<Value = C64> {
        (1e-4f64..0.099, 0.0f64..std::f64::consts::TAU).prop_map(|(m, t)| C64::from_polar(m, t))
    }

    proptest! {
        #[test]
        fn inverse_roundtrip(a in arb_a(), x in (-8.0f64..8.0, -8.0f64..8.0), y in (-8.0f64..8.0, -8.0f64..8.0)) {
            let hh = HenonParams::new(c(-3.0, 0.0), a, 0.1);
            let z = PointC2::new(c(x.0, x.1), c(y.0, y.1));
            let fwd = henon_forward(&hh, henon_inverse(&hh, z).unwrap());
            prop_assert!(fwd.dist(&z) <= 1e-12 * z.norm().max(1.0));
            // recovering a*y from x^2 + c - a*y loses (|x|^2 + |c|)/|a| in relative terms
            let cond = ((z.x.norm_sqr() + 3.0) / (a.norm() * z.norm().max(1.0))).max(1.0);
            let back = henon_inverse(&hh, henon_forward(&hh, z)).unwrap();
            prop_assert!(back.dist(&z) <= 1e-12 * z.norm().max(1.0) * (cond * 1e-4).max(1.0));
        }

        #[test]
        fn vplus_forward_invariant(a in arb_a(), r in 6.0f64..50.0, t in 0.0f64..6.3, s in 0.0f64..1.0, u in 0.0f64..6.3) {
            let rc = default_rc();
            let hh = HenonParams::new(c(-3.0, 0.0), a, 0.1);
            let x = C64::from_polar(r.max(rc.alpha * 1.000001), t);
            let y = C64::from_polar(s * x.norm(), u);
            let z = PointC2::new(x, y);
            prop_assume!(classify_region(&rc, z) == RegionTag::VPlus);
            prop_assert_eq!(classify_region(&rc, henon_forward(&hh, z)), RegionTag::VPlus);
        }

        #[test]
        fn vminus_backward_invariant(a in arb_a(), r in 6.0f64..50.0, t in 0.0f64..6.3, s in 0.0f64..0.999, u in 0.0f64..6.3) {
            let rc = default_rc();
            let hh = HenonParams::new(c(-3.0, 0.0), a, 0.1);
            let y = C64::from_polar(r.max(rc.alpha * 1.000001), t);
            let x = C64::from_polar(s * y.norm(), u);
            let z = PointC2::new(x, y);
            prop_assume!(classify_region(&rc, z) == RegionTag::VMinus);
            prop_assert_eq!(classify_region(&rc, henon_inverse(&hh, z).unwrap()), RegionTag::VMinus);
        }
    }
}
