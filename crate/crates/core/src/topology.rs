//! Desk-scale checks of the geometry: invariant cones, the regions
//! Omega^{xi_n}, the boundary census of the locus component in each of them,
//! disjointness of forward images, and the gluing pattern of the
//! truncated-sphere model.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::escape::{green_plus, DEFAULT_MAX_ITER};
use crate::henon::{henon_forward, HenonParams, PointC2, RegionConstants};
use crate::jet::C64;
use crate::locus::{
    blowup_circle, newton_refine, sublevel_radius, trace_locus, w_value, winding_of, ChartTag,
    FixedVar, Guide, LevelFn, LocusSeed, NewtonOptions, TraceBounds, TraceOptions, TracedCurve,
    PHI_TOL,
};
use crate::par::par_map;
use crate::poly::{branch_bit, PreimageAddress};

const ZERO: C64 = C64::new(0.0, 0.0);
const GREEN_TOL: f64 = 1e-14;

fn gplus(h: &HenonParams, rc: &RegionConstants, z: PointC2) -> Option<f64> {
    let g = green_plus(h, rc, z, GREEN_TOL, DEFAULT_MAX_ITER);
    g.escaped.then_some(g.value)
}

fn disc_sample(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    let r = radius * rng.random::<f64>().sqrt();
    C64::from_polar(r, TAU * rng.random::<f64>())
}

// ---------------------------------------------------------------- cones

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeOrientation {
    Horizontal,
    Vertical,
}

/// {G+ <= g_max} ∩ {|y| <= y_max}; the vertical box is further cut down to
/// the tube {|p(y) - x| <= |a| alpha}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeBox {
    pub g_max: f64,
    pub y_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub orientation: ConeOrientation,
    pub constant: f64,
    pub cone_box: ConeBox,
}

impl ConeSpec {
    /// |xi| > C |eta| with C = C_h on {G+ <= r'} ∩ {|y| <= beta}.
    pub fn horizontal(rc: &RegionConstants) -> Self {
        Self {
            orientation: ConeOrientation::Horizontal,
            constant: rc.horizontal_c,
            cone_box: ConeBox {
                g_max: rc.r_prime,
                y_max: rc.beta,
            },
        }
    }

    /// |xi| < C |a| |eta| with C = 1/(0.9 m), m = min{|y| : G_p(y) <= r'/2}.
    pub fn vertical(rc: &RegionConstants) -> Self {
        let m = rc.horizontal_c / 1.8;
        Self {
            orientation: ConeOrientation::Vertical,
            constant: 1.0 / (0.9 * m),
            cone_box: ConeBox {
                g_max: rc.r_prime,
                y_max: rc.alpha,
            },
        }
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = c;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeViolation {
    pub point: PointC2,
    pub vector: (C64, C64),
    pub image: (C64, C64),
    /// |xi/eta| of the image vector.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub orientation: ConeOrientation,
    pub constant: f64,
    pub tested: usize,
    pub violations: Vec<ConeViolation>,
}

impl ConeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const MAX_ATTEMPTS_PER_SAMPLE: usize = 200;

/// Df maps the horizontal cone into itself at sampled points whose image stays in the box.
pub fn check_horizontal_cones(
    h: &HenonParams,
    rc: &RegionConstants,
    spec: &ConeSpec,
    samples: usize,
    seed: u64,
) -> ConeReport {
    let p = h.poly();
    let xr =
        1.1 * sublevel_radius(&p, ZERO, spec.cone_box.g_max) + h.a.norm() * spec.cone_box.y_max;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = spec.constant;
    let in_box = |z: PointC2| {
        z.y.norm() <= spec.cone_box.y_max
            && gplus(h, rc, z).is_some_and(|g| g <= spec.cone_box.g_max)
    };
    let mut tested = 0;
    let mut violations = Vec::new();
    // draw in batches so the RNG stream is independent of the evaluation order
    let mut attempts = 0;
    while tested < samples && attempts < samples * MAX_ATTEMPTS_PER_SAMPLE {
        let batch: Vec<(PointC2, (C64, C64))> = (0..(samples - tested).max(64))
            .map(|_| {
                let z = PointC2::new(
                    disc_sample(&mut rng, xr),
                    disc_sample(&mut rng, spec.cone_box.y_max),
                );
                let xi = C64::from_polar(1.0, TAU * rng.random::<f64>());
                let eta = disc_sample(&mut rng, 1.0 / c);
                (z, (xi, eta))
            })
            .collect();
        attempts += batch.len();
        let results = par_map(&batch, |(z, v)| {
            if !(in_box(*z) && in_box(henon_forward(h, *z))) {
                return None;
            }
            let img = (2.0 * z.x * v.0 - h.a * v.1, v.0);
            let ratio = img.1.norm() / img.0.norm();
            Some((img, ratio))
        });
        for ((z, v), r) in batch.iter().zip(results) {
            if tested >= samples {
                break;
            }
            if let Some((img, ratio)) = r {
                tested += 1;
                if !(img.0.norm() > c * img.1.norm()) {
                    violations.push(ConeViolation {
                        point: *z,
                        vector: *v,
                        image: img,
                        ratio: img.0.norm() / img.1.norm(),
                    });
                }
                let _ = ratio;
            }
        }
    }
    ConeReport {
        orientation: ConeOrientation::Horizontal,
        constant: c,
        tested,
        violations,
    }
}

/// Df^-1 maps the vertical cone into itself on the tube around the parabola.
pub fn check_vertical_cones(
    h: &HenonParams,
    rc: &RegionConstants,
    spec: &ConeSpec,
    samples: usize,
    seed: u64,
) -> Result<ConeReport> {
    if h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    let p = h.poly();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = spec.constant;
    let ca = c * h.a.norm();
    let mut tested = 0;
    let mut violations = Vec::new();
    let mut attempts = 0;
    while tested < samples && attempts < samples * MAX_ATTEMPTS_PER_SAMPLE {
        let batch: Vec<(PointC2, (C64, C64))> = (0..(samples - tested).max(64))
            .map(|_| {
                let y = disc_sample(&mut rng, spec.cone_box.y_max);
                let v = disc_sample(&mut rng, rc.alpha);
                let z = PointC2::new(p.eval(y) - h.a * v, y);
                let eta = C64::from_polar(1.0, TAU * rng.random::<f64>());
                let xi = disc_sample(&mut rng, ca);
                (z, (xi, eta))
            })
            .collect();
        attempts += batch.len();
        let results = par_map(&batch, |(z, vec)| {
            if !gplus(h, rc, *z).is_some_and(|g| g <= spec.cone_box.g_max) {
                return None;
            }
            // Df^-1 = [[0, 1], [-1/a, 2y/a]]
            let img = (vec.1, (2.0 * z.y * vec.1 - vec.0) / h.a);
            Some(img)
        });
        for ((z, v), r) in batch.iter().zip(results) {
            if tested >= samples {
                break;
            }
            if let Some(img) = r {
                tested += 1;
                let ratio = img.0.norm() / img.1.norm();
                if !(ratio < ca) {
                    violations.push(ConeViolation {
                        point: *z,
                        vector: *v,
                        image: img,
                        ratio,
                    });
                }
            }
        }
    }
    Ok(ConeReport {
        orientation: ConeOrientation::Vertical,
        constant: c,
        tested,
        violations,
    })
}

// ---------------------------------------------------------------- Omega regions

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaRegion {
    pub level_n: u32,
    pub address: PreimageAddress,
    pub r: f64,
    pub alpha: f64,
    /// |a| alpha
    pub tube: f64,
}

impl OmegaRegion {
    pub fn new(h: &HenonParams, rc: &RegionConstants, address: &PreimageAddress) -> Self {
        Self {
            level_n: address.depth() as u32,
            address: address.clone(),
            r: rc.r,
            alpha: rc.alpha,
            tube: h.a.norm() * rc.alpha,
        }
    }

    /// [r/2^{n+1}, r/2^n]
    pub fn green_range(&self) -> (f64, f64) {
        let top = self.r / f64::from(1u32 << self.level_n);
        (0.5 * top, top)
    }

    pub fn contains(&self, h: &HenonParams, rc: &RegionConstants, z: PointC2) -> bool {
        omega_membership(h, rc, self.level_n, &self.address, z)
    }
}

/// Address read off the forward orbit: bit of x_k for k = n-1 down to 0.
/// At a = 0 this is `PreimageAddress::of_point` of x.
pub fn orbit_address(h: &HenonParams, z: PointC2, n: usize) -> PreimageAddress {
    let mut xs = Vec::with_capacity(n);
    let mut cur = z;
    for _ in 0..n {
        xs.push(cur.x);
        cur = henon_forward(h, cur);
    }
    let bits: Vec<u8> = xs.iter().rev().map(|x| branch_bit(*x)).collect();
    PreimageAddress::from_bits(&bits)
}

pub fn omega_membership(
    h: &HenonParams,
    rc: &RegionConstants,
    n: u32,
    address: &PreimageAddress,
    z: PointC2,
) -> bool {
    assert_eq!(address.depth() as u32, n, "address depth must equal n");
    let top = rc.r / f64::from(1u32 << n);
    if z.y.norm() > rc.alpha {
        return false;
    }
    if (h.poly().eval(z.y) - z.x).norm() < h.a.norm() * rc.alpha {
        return false;
    }
    match gplus(h, rc, z) {
        Some(g) if g >= 0.5 * top && g <= top => {}
        _ => return false,
    }
    orbit_address(h, z, n as usize) == *address
}

// ---------------------------------------------------------------- census

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryClass {
    /// |y| = alpha
    YAlpha,
    /// |p(y) - x| = |a| alpha
    Tube,
    /// G+ = r/2^n
    GreenOuter,
    /// G+ = r/2^{n+1}
    GreenInner,
}

impl BoundaryClass {
    pub const ALL: [BoundaryClass; 4] = [
        BoundaryClass::YAlpha,
        BoundaryClass::Tube,
        BoundaryClass::GreenOuter,
        BoundaryClass::GreenInner,
    ];

    pub fn key(self) -> &'static str {
        match self {
            BoundaryClass::YAlpha => "y_alpha",
            BoundaryClass::Tube => "tube",
            BoundaryClass::GreenOuter => "green_outer",
            BoundaryClass::GreenInner => "green_inner",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Piece {
    /// graph x = X(y) over {rho <= |y| <= alpha} minus the tube
    Vertical,
    /// graph y = Y(x) over the pants slab minus the neck
    Horizontal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircleKind {
    Boundary(BoundaryClass, Piece),
    /// |y| = rho, shared by both pieces
    Cut,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCircle {
    pub kind: CircleKind,
    pub curve: TracedCurve,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberCount {
    /// the fixed coordinate (y for vertical fibers, x for horizontal ones)
    pub at: C64,
    pub zeros: i64,
    pub member: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentTrace {
    pub address: PreimageAddress,
    pub level_n: u32,
    pub degenerate: bool,
    pub rho: f64,
    pub xi: C64,
    pub circles: Vec<BoundaryCircle>,
    pub vertical_fibers: Vec<FiberCount>,
    pub horizontal_fibers: Vec<FiberCount>,
    /// zeros of u = p(y) - X(y) between the cut and |y| = alpha (argument principle)
    pub tube_zero_count: i64,
    /// level crossings found on the x-grid, all lying on traced circles
    pub grid_crossings: usize,
}

impl ComponentTrace {
    pub fn count(&self, class: BoundaryClass) -> usize {
        self.circles
            .iter()
            .filter(|c| matches!(c.kind, CircleKind::Boundary(k, _) if k == class))
            .count()
    }

    /// All samples of all traced circles.
    pub fn samples(&self) -> impl Iterator<Item = PointC2> + '_ {
        self.circles.iter().flat_map(|c| c.curve.points())
    }

    pub fn residual_max(&self) -> f64 {
        self.circles
            .iter()
            .map(|c| c.curve.residual_max())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CensusOptions {
    /// x-grid nodes per side for the horizontal piece
    pub grid: usize,
    /// rings and spokes of the vertical fiber sample
    pub vertical_rings: usize,
    pub vertical_spokes: usize,
    /// every k-th grid node is used as a horizontal fiber
    pub horizontal_stride: usize,
    pub newton: NewtonOptions,
    pub trace_tol: f64,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self {
            grid: 48,
            vertical_rings: 6,
            vertical_spokes: 12,
            horizontal_stride: 2,
            newton: NewtonOptions {
                tol: 1e-11,
                ..NewtonOptions::default()
            },
            trace_tol: 1e-10,
        }
    }
}

/// The vertical sheet over y, continued from a guess near xi.
fn sheet_x(
    h: &HenonParams,
    rc: &RegionConstants,
    y: C64,
    guess: C64,
    opts: &NewtonOptions,
) -> Result<C64> {
    newton_refine(
        h,
        rc,
        &LocusSeed::manual(PointC2::new(guess, y)),
        FixedVar::Y,
        opts,
    )
    .map(|z| z.x)
}

/// The horizontal sheet over x, from y = 0.
fn sheet_y(h: &HenonParams, rc: &RegionConstants, x: C64, opts: &NewtonOptions) -> Result<C64> {
    newton_refine(
        h,
        rc,
        &LocusSeed::manual(PointC2::new(x, ZERO)),
        FixedVar::X,
        opts,
    )
    .map(|z| z.y)
}

fn loose_bounds(rc: &RegionConstants) -> TraceBounds {
    TraceBounds::boxed(4.0 * rc.alpha, 2.0 * rc.alpha)
}

fn trace_level(
    h: &HenonParams,
    rc: &RegionConstants,
    start: PointC2,
    guide: Guide,
    step: f64,
    tol: f64,
    what: &str,
) -> Result<TracedCurve> {
    let mut opts = TraceOptions::new(step, loose_bounds(rc));
    opts.guide = Some(guide);
    opts.tol = tol;
    opts.max_samples = 4000;
    let t = trace_locus(h, rc, start, ChartTag::Standard, &opts)?;
    if !t.closed {
        return Err(Error::IncompleteTrace(format!(
            "{what} did not close ({:?})",
            t.termination
        )));
    }
    Ok(t)
}

// winding number of f around 0 along theta in [0, 2pi), refining until the
// argument increments are small
fn winding_adaptive(f: &(dyn Fn(f64) -> Result<C64> + Sync), n0: usize) -> Result<i64> {
    let mut n = n0;
    loop {
        let thetas: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        let vals = thetas.iter().map(|t| f(*t)).collect::<Result<Vec<C64>>>()?;
        let mut jump = 0.0f64;
        for i in 0..n {
            jump = jump.max((vals[(i + 1) % n] / vals[i]).arg().abs());
        }
        if jump < 0.5 {
            return Ok(winding_of(&vals));
        }
        n *= 2;
        if n > 1 << 15 {
            return Err(Error::NoConvergence {
                stage: "winding number",
                steps: n,
                residual: jump,
            });
        }
    }
}

fn w_only(h: &HenonParams, rc: &RegionConstants, z: PointC2) -> Result<C64> {
    w_value(h, rc, z, PHI_TOL).map(|v| v.0)
}

struct GridNode {
    x: C64,
    y: Option<C64>,
    g: f64,
    addr_ok: bool,
}

fn sheet_grid(
    h: &HenonParams,
    rc: &RegionConstants,
    address: &PreimageAddress,
    xi: C64,
    half: f64,
    n: usize,
    rho: f64,
    opts: &NewtonOptions,
) -> Vec<GridNode> {
    let xs: Vec<C64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let s = |m: usize| -half + 2.0 * half * m as f64 / (n - 1) as f64;
            xi + C64::new(s(j), s(i))
        })
        .collect();
    let depth = address.depth();
    par_map(&xs, |&x| {
        let y = sheet_y(h, rc, x, opts).ok().filter(|y| y.norm() < rho);
        let (g, addr_ok) = match y {
            Some(y) => {
                let z = PointC2::new(x, y);
                (
                    gplus(h, rc, z).unwrap_or(f64::NAN),
                    orbit_address(h, z, depth) == *address,
                )
            }
            None => (f64::NAN, false),
        };
        GridNode { x, y, g, addr_ok }
    })
}

// bisection for G+ = level on the horizontal sheet along [x0, x1]
fn bisect_level(
    h: &HenonParams,
    rc: &RegionConstants,
    x0: C64,
    x1: C64,
    level: f64,
    opts: &NewtonOptions,
) -> Option<PointC2> {
    let g_at = |x: C64| -> Option<(f64, C64)> {
        let y = sheet_y(h, rc, x, opts).ok()?;
        Some((gplus(h, rc, PointC2::new(x, y))?, y))
    };
    let (mut a, mut b) = (x0, x1);
    let (ga, _) = g_at(a)?;
    let mut sa = ga - level;
    let mut best = None;
    for _ in 0..50 {
        let m = 0.5 * (a + b);
        let (gm, ym) = g_at(m)?;
        best = Some(PointC2::new(m, ym));
        if (gm - level) * sa > 0.0 {
            a = m;
            sa = gm - level;
        } else {
            b = m;
        }
        if (b - a).norm() < 1e-13 {
            break;
        }
    }
    best
}

fn near_curve(curve: &TracedCurve, z: PointC2, tol: f64) -> bool {
    curve.points().any(|q| q.dist(&z) < tol)
}

/// Traces every boundary circle of the locus component in Omega^{xi_n} and
/// samples the fiber counts that certify the two graph pieces.
pub fn trace_component(
    h: &HenonParams,
    rc: &RegionConstants,
    address: &PreimageAddress,
    opts: &CensusOptions,
) -> Result<ComponentTrace> {
    let p = h.poly();
    let n = address.depth() as u32;
    let xi = address.point(&p);
    let rho = rc.epsilon;
    let mut out = ComponentTrace {
        address: address.clone(),
        level_n: n,
        degenerate: h.is_degenerate(),
        rho,
        xi,
        circles: Vec::new(),
        vertical_fibers: Vec::new(),
        horizontal_fibers: Vec::new(),
        tube_zero_count: 0,
        grid_crossings: 0,
    };
    if out.degenerate {
        return Ok(out);
    }
    let nopts = &opts.newton;
    let tube = h.a.norm() * rc.alpha;
    let omega = OmegaRegion::new(h, rc, address);
    let (g_in, g_out) = omega.green_range();

    // vertical piece: cut circle and |y| = alpha
    let cut_start = PointC2::new(
        sheet_x(h, rc, C64::new(rho, 0.0), xi, nopts)?,
        C64::new(rho, 0.0),
    );
    let cut = trace_level(
        h,
        rc,
        cut_start,
        Guide::level_set(LevelFn::LogY, rho.ln()),
        TAU * rho / 96.0,
        opts.trace_tol,
        "cut circle",
    )?;
    let outer_start = PointC2::new(
        sheet_x(h, rc, C64::new(rc.alpha, 0.0), xi, nopts)?,
        C64::new(rc.alpha, 0.0),
    );
    let yalpha = trace_level(
        h,
        rc,
        outer_start,
        Guide::level_set(LevelFn::LogY, rc.alpha.ln()),
        TAU * rc.alpha / 192.0,
        opts.trace_tol,
        "|y| = alpha",
    )?;
    let u_wind = |c: &TracedCurve| {
        winding_of(&c.points().map(|z| p.eval(z.y) - z.x).collect::<Vec<_>>())
            * c.winding(FixedVar::Y, ZERO).signum()
    };
    out.tube_zero_count = u_wind(&yalpha) - u_wind(&cut);

    // tube circles: seeds at local minima of |p(y) - X(y)| on a polar grid
    let rings = 28;
    let spokes = 72;
    let ring_r =
        |i: usize| rho * 1.3 + (0.97 * rc.alpha - rho * 1.3) * i as f64 / (rings - 1) as f64;
    let ys: Vec<C64> = (0..rings * spokes)
        .map(|k| {
            C64::from_polar(
                ring_r(k / spokes),
                TAU * (k % spokes) as f64 / spokes as f64,
            )
        })
        .collect();
    // Newton from xi can land on a neighbouring vertical sheet; accept only
    // points closer to xi than to any other root of depth <= n + 1
    let gap = (0..=address.depth() + 1)
        .flat_map(PreimageAddress::all)
        .map(|b| (b.point(&p) - xi).norm())
        .filter(|d| *d > 1e-9)
        .fold(f64::INFINITY, f64::min);
    let own = (0.45 * gap).min(0.25);
    let us: Vec<f64> = par_map(&ys, |&y| {
        sheet_x(h, rc, y, xi, nopts)
            .ok()
            .filter(|x| (x - xi).norm() < own)
            .map_or(f64::NAN, |x| (p.eval(y) - x).norm())
    });
    let mut tubes: Vec<TracedCurve> = Vec::new();
    for i in 0..rings {
        for j in 0..spokes {
            let k = i * spokes + j;
            let v = us[k];
            if !v.is_finite() {
                continue;
            }
            let mut is_min = true;
            for (di, dj) in [
                (-1i64, 0i64),
                (1, 0),
                (0, -1),
                (0, 1),
                (-1, -1),
                (1, 1),
                (-1, 1),
                (1, -1),
            ] {
                let ii = i as i64 + di;
                if ii < 0 || ii >= rings as i64 {
                    continue;
                }
                let jj = (j as i64 + dj).rem_euclid(spokes as i64) as usize;
                let o = us[ii as usize * spokes + jj];
                if o.is_finite() && o < v {
                    is_min = false;
                }
            }
            if !is_min {
                continue;
            }
            // solve p(y) - X(y) = u0 on the vertical sheet, u0 on the tube circle
            let guess = ys[k];
            let Ok(x0) = sheet_x(h, rc, guess, xi, nopts) else {
                continue;
            };
            let u_grid = p.eval(guess) - x0;
            let u0 = tube * u_grid / u_grid.norm();
            // X moves by O(a) across the tube, so y <- sqrt(X(y) + u0 - c) contracts;
            // the small trust radius keeps each X solve clear of the pole at x = p(y)
            let seed_opts = NewtonOptions {
                tol: 1e-9,
                trust_radius: 0.5 * tube,
                ..*nopts
            };
            let (mut ystar, mut xstar) = (guess, x0);
            let mut settled = false;
            for _ in 0..40 {
                let sq = (xstar + u0 - h.c).sqrt();
                let yn = if (sq - ystar).norm() <= (sq + ystar).norm() {
                    sq
                } else {
                    -sq
                };
                let Ok(xn) = sheet_x(h, rc, yn, xstar, &seed_opts) else {
                    break;
                };
                let moved = (yn - ystar).norm();
                (ystar, xstar) = (yn, xn);
                if moved < 1e-13 * ystar.norm().max(1.0) {
                    settled = true;
                    break;
                }
            }
            if !settled {
                continue;
            }
            let zstar = PointC2::new(xstar, ystar);
            if (zstar.x - xi).norm() > own || ystar.norm() >= rc.alpha || ystar.norm() <= rho {
                continue;
            }
            let radius = tube / (2.0 * ystar.norm()).max(1e-3);
            if tubes.iter().any(|t| near_curve(t, zstar, 4.0 * radius)) {
                continue;
            }
            let t = trace_level(
                h,
                rc,
                zstar,
                Guide::level_set(LevelFn::LogU, tube.ln()),
                TAU * radius / 64.0,
                opts.trace_tol,
                "tube circle",
            )?;
            tubes.push(t);
        }
    }

    // horizontal piece: G+ level circles found on an x-grid
    let half = 1.3 * sublevel_radius(&p, xi, g_out);
    let gn = opts.grid;
    let nodes = sheet_grid(h, rc, address, xi, half, gn, rho, nopts);
    let mut outer: Vec<TracedCurve> = Vec::new();
    let mut inner: Vec<TracedCurve> = Vec::new();
    let step = half / 60.0;
    let mut crossings = 0;
    for (level, store) in [(g_out, &mut outer), (g_in, &mut inner)] {
        let mut seeds = Vec::new();
        for i in 0..gn {
            for j in 0..gn {
                let a = &nodes[i * gn + j];
                for (ni, nj) in [(i + 1, j), (i, j + 1)] {
                    if ni >= gn || nj >= gn {
                        continue;
                    }
                    let b = &nodes[ni * gn + nj];
                    if !(a.addr_ok && b.addr_ok && a.g.is_finite() && b.g.is_finite()) {
                        continue;
                    }
                    if (a.g - level) * (b.g - level) < 0.0 {
                        seeds.push((a.x, b.x));
                    }
                }
            }
        }
        let found: Vec<Option<PointC2>> =
            par_map(&seeds, |(a, b)| bisect_level(h, rc, *a, *b, level, nopts));
        for s in found.into_iter().flatten() {
            crossings += 1;
            if store.iter().any(|c| near_curve(c, s, 1.5 * step)) {
                continue;
            }
            let t = trace_level(
                h,
                rc,
                s,
                Guide::level_set(LevelFn::GreenPlus, level),
                step,
                opts.trace_tol,
                "G+ level circle",
            )?;
            store.push(t);
        }
    }
    out.grid_crossings = crossings;

    // fiber checks, horizontal piece: one zero of w(x, .) in |y| < rho
    let neck = cut.points().map(|z| (z.x - xi).norm()).fold(0.0, f64::max);
    let s = opts.horizontal_stride.max(1);
    let hf: Vec<&GridNode> = nodes
        .iter()
        .enumerate()
        .filter(|(k, nd)| {
            (k / gn) % s == 0
                && (k % gn) % s == 0
                && nd.addr_ok
                && nd.g > g_in
                && nd.g < g_out
                && (nd.x - xi).norm() > 2.0 * neck
        })
        .map(|(_, nd)| nd)
        .collect();
    out.horizontal_fibers = par_map(&hf, |nd| {
        let x = nd.x;
        let f = |t: f64| w_only(h, rc, PointC2::new(x, C64::from_polar(rho, t)));
        let zeros = winding_adaptive(&f, 128).unwrap_or(-99);
        let member =
            nd.y.is_some_and(|y| omega.contains(h, rc, PointC2::new(x, y)));
        FiberCount {
            at: x,
            zeros,
            member,
        }
    });

    // fiber checks, vertical piece: one zero of w(., y) in a disc about xi
    let r_v = 0.9
        * outer
            .iter()
            .chain(inner.iter())
            .flat_map(|c| c.points())
            .map(|z| (z.x - xi).norm())
            .fold(f64::INFINITY, f64::min);
    let vr = opts.vertical_rings.max(1);
    let vs = opts.vertical_spokes.max(1);
    let vy: Vec<C64> = (0..vr * vs)
        .map(|k| {
            let r = rho * 1.2
                + (0.97 * rc.alpha - rho * 1.2) * (k / vs) as f64 / (vr.max(2) - 1) as f64;
            C64::from_polar(r, TAU * ((k % vs) as f64 + 0.5) / vs as f64)
        })
        .collect();
    let vf: Vec<Option<FiberCount>> = par_map(&vy, |&y| {
        let gap = (p.eval(y) - xi).norm() - 2.0 * tube;
        let rad = r_v.min(0.45 * gap);
        let x = sheet_x(h, rc, y, xi, nopts).ok()?;
        if !(rad > 2.0 * (x - xi).norm()) {
            return None;
        }
        let f = |t: f64| w_only(h, rc, PointC2::new(xi + C64::from_polar(rad, t), y));
        let zeros = winding_adaptive(&f, 128).unwrap_or(-99);
        let member = omega.contains(h, rc, PointC2::new(x, y));
        Some(FiberCount {
            at: y,
            zeros,
            member,
        })
    });
    out.vertical_fibers = vf.into_iter().flatten().collect();

    let push =
        |out: &mut ComponentTrace, kind, curve| out.circles.push(BoundaryCircle { kind, curve });
    push(&mut out, CircleKind::Cut, cut);
    push(
        &mut out,
        CircleKind::Boundary(BoundaryClass::YAlpha, Piece::Vertical),
        yalpha,
    );
    for t in tubes {
        push(
            &mut out,
            CircleKind::Boundary(BoundaryClass::Tube, Piece::Vertical),
            t,
        );
    }
    for t in outer {
        push(
            &mut out,
            CircleKind::Boundary(BoundaryClass::GreenOuter, Piece::Horizontal),
            t,
        );
    }
    for t in inner {
        push(
            &mut out,
            CircleKind::Boundary(BoundaryClass::GreenInner, Piece::Horizontal),
            t,
        );
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCounts {
    pub y_alpha: usize,
    pub tube: usize,
    pub green_outer: usize,
    pub green_inner: usize,
}

impl BoundaryCounts {
    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (self.y_alpha, self.tube, self.green_outer, self.green_inner)
    }

    pub fn total(&self) -> usize {
        self.y_alpha + self.tube + self.green_outer + self.green_inner
    }

    pub fn as_map(&self) -> BTreeMap<&'static str, usize> {
        BTreeMap::from([
            (BoundaryClass::YAlpha.key(), self.y_alpha),
            (BoundaryClass::Tube.key(), self.tube),
            (BoundaryClass::GreenOuter.key(), self.green_outer),
            (BoundaryClass::GreenInner.key(), self.green_inner),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub component_id: String,
    pub level_n: u32,
    pub degenerate: bool,
    pub counts: BoundaryCounts,
    pub connected: bool,
    pub euler_characteristic: i64,
    pub genus: i64,
    pub boundary_circles: usize,
    /// each piece is one outer circle enclosing the others, the others mutually exterior
    pub planar_pieces: bool,
    /// every sampled fiber meets its piece exactly once and lies in Omega^{xi_n}
    pub graph_checks: bool,
    pub tube_zero_count: i64,
}

impl CensusReport {
    /// Connected, genus 0, boundary counts (1, 2, 1, 2), chi = -4, all checks passed.
    pub fn matches_expected(&self) -> bool {
        !self.degenerate
            && self.counts.as_tuple() == (1, 2, 1, 2)
            && self.connected
            && self.genus == 0
            && self.euler_characteristic == -4
            && self.planar_pieces
            && self.graph_checks
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

// one circle winds once around every other, the others are mutually exterior
fn planar_domain(circles: &[&TracedCurve], outer: usize, coord: FixedVar) -> bool {
    let pick = |z: PointC2| match coord {
        FixedVar::X => z.x,
        FixedVar::Y => z.y,
    };
    for (i, c) in circles.iter().enumerate() {
        let probe = pick(c.samples[0].0);
        for (j, d) in circles.iter().enumerate() {
            if i == j {
                continue;
            }
            let wnd = d.winding(coord, probe).abs();
            let want = if j == outer { 1 } else { 0 };
            if wnd != want {
                return false;
            }
        }
    }
    true
}

pub fn census_component(
    h: &HenonParams,
    rc: &RegionConstants,
    n: u32,
    address: &PreimageAddress,
    trace: &ComponentTrace,
) -> Result<CensusReport> {
    let _ = (h, rc);
    assert_eq!(address.depth() as u32, n, "address depth must equal n");
    if trace.address != *address {
        return Err(Error::IncompleteTrace(format!(
            "trace is for {} not {address}",
            trace.address
        )));
    }
    let counts = BoundaryCounts {
        y_alpha: trace.count(BoundaryClass::YAlpha),
        tube: trace.count(BoundaryClass::Tube),
        green_outer: trace.count(BoundaryClass::GreenOuter),
        green_inner: trace.count(BoundaryClass::GreenInner),
    };
    let mut report = CensusReport {
        component_id: address.to_string(),
        level_n: n,
        degenerate: trace.degenerate,
        counts,
        connected: false,
        euler_characteristic: 0,
        genus: 0,
        boundary_circles: counts.total(),
        planar_pieces: false,
        graph_checks: false,
        tube_zero_count: trace.tube_zero_count,
    };
    if trace.degenerate {
        return Ok(report);
    }
    if let Some(c) = trace.circles.iter().find(|c| !c.curve.closed) {
        return Err(Error::IncompleteTrace(format!(
            "{:?} circle is open",
            c.kind
        )));
    }
    let cut: Vec<&TracedCurve> = trace
        .circles
        .iter()
        .filter(|c| c.kind == CircleKind::Cut)
        .map(|c| &c.curve)
        .collect();
    let mut planar = cut.len() == 1;
    let mut chi = 0i64;
    // pieces 0 = vertical, 1 = horizontal; cut circles join them
    let mut uf = UnionFind(vec![0, 1]);
    let mut used = [false, false];
    for (pi, piece) in [Piece::Vertical, Piece::Horizontal].into_iter().enumerate() {
        let mut circles: Vec<&TracedCurve> = cut.clone();
        let mut outer_idx = None;
        for c in &trace.circles {
            if let CircleKind::Boundary(class, pc) = c.kind {
                if pc == piece {
                    if matches!(class, BoundaryClass::YAlpha | BoundaryClass::GreenOuter) {
                        if outer_idx.is_some() {
                            planar = false;
                        }
                        outer_idx = Some(circles.len());
                    }
                    circles.push(&c.curve);
                }
            }
        }
        if circles.len() > cut.len() {
            used[pi] = true;
        }
        let coord = match piece {
            Piece::Vertical => FixedVar::Y,
            Piece::Horizontal => FixedVar::X,
        };
        match outer_idx {
            Some(o) if planar_domain(&circles, o, coord) => {}
            _ => planar = false,
        }
        chi += 2 - circles.len() as i64;
    }
    if !cut.is_empty() && used[0] && used[1] {
        uf.union(0, 1);
    }
    let roots: std::collections::BTreeSet<usize> =
        (0..2).filter(|&i| used[i]).map(|i| uf.find(i)).collect();
    report.connected = roots.len() == 1;
    report.euler_characteristic = chi;
    let b = counts.total() as i64;
    report.genus = (2 * roots.len() as i64 - chi - b) / 2;
    report.planar_pieces = planar && trace.tube_zero_count == counts.tube as i64;
    report.graph_checks = !trace.vertical_fibers.is_empty()
        && !trace.horizontal_fibers.is_empty()
        && trace
            .vertical_fibers
            .iter()
            .chain(trace.horizontal_fibers.iter())
            .all(|f| f.zeros == 1 && f.member);
    Ok(report)
}

// ---------------------------------------------------------------- distance to the degenerate locus

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegenerateDistance {
    /// sampled Hausdorff distance in Omega^{xi} outside the crossing bidisk
    pub hausdorff: f64,
    /// largest distance inside the bidisk (the neck of (x - xi) y = delta)
    pub neck: f64,
    pub samples: usize,
}

/// Distance between the locus in Omega^{xi} and {(x - xi) y = 0}, measured
/// outside the bidisk of radius `exclusion` about (xi, 0); the excluded neck
/// is reported separately.
pub fn degenerate_distance(
    h: &HenonParams,
    rc: &RegionConstants,
    address: &PreimageAddress,
    exclusion: f64,
    grid: usize,
) -> Result<DegenerateDistance> {
    let p = h.poly();
    let xi = address.point(&p);
    let opts = NewtonOptions {
        tol: 1e-12,
        ..NewtonOptions::default()
    };
    let omega = OmegaRegion::new(h, rc, address);
    let (_, g_out) = omega.green_range();
    // vertical sheet
    let ys: Vec<C64> = (0..grid * grid)
        .map(|k| {
            let r = exclusion + (rc.alpha - exclusion) * (k / grid) as f64 / (grid - 1) as f64;
            C64::from_polar(r, TAU * (k % grid) as f64 / grid as f64)
        })
        .collect();
    let dv: Vec<Option<f64>> = par_map(&ys, |&y| {
        let x = sheet_x(h, rc, y, xi, &opts).ok()?;
        let z = PointC2::new(x, y);
        omega
            .contains(h, rc, z)
            .then(|| (x - xi).norm().min(y.norm()))
    });
    // horizontal sheet
    let half = 1.3 * sublevel_radius(&p, xi, g_out);
    let nodes = sheet_grid(h, rc, address, xi, half, grid, rc.alpha, &opts);
    let dh: Vec<Option<f64>> = par_map(&nodes, |nd| {
        let y = nd.y?;
        let z = PointC2::new(nd.x, y);
        ((nd.x - xi).norm() >= exclusion && omega.contains(h, rc, z))
            .then(|| y.norm().min((nd.x - xi).norm()))
    });
    let all: Vec<f64> = dv.into_iter().chain(dh).flatten().collect();
    if all.is_empty() {
        return Err(Error::NoComponentFound("degenerate distance"));
    }
    // neck: along |y| = s the sheet is x - xi ~ delta/y
    let ss: Vec<f64> = (0..40)
        .map(|k| exclusion * 10f64.powf(-3.0 * k as f64 / 39.0))
        .collect();
    let neck = ss
        .iter()
        .filter_map(|&s| {
            (0..8)
                .filter_map(|j| {
                    let y = C64::from_polar(s, TAU * j as f64 / 8.0);
                    let x = sheet_x(h, rc, y, xi, &opts).ok()?;
                    Some((x - xi).norm().min(s))
                })
                .reduce(f64::max)
        })
        .fold(0.0, f64::max);
    Ok(DegenerateDistance {
        hausdorff: all.iter().copied().fold(0.0, f64::max),
        neck,
        samples: all.len(),
    })
}

// ---------------------------------------------------------------- disjoint images

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisjointViolation {
    pub point: PointC2,
    pub k: usize,
    pub image: PointC2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisjointReport {
    pub tested: usize,
    /// draws that fell in the excluded tube
    pub excluded: usize,
    pub violations: Vec<DisjointViolation>,
}

impl DisjointReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// (W minus the tube) ∪ {|y| < eps, |x| > alpha}
pub fn in_fundamental_set(h: &HenonParams, rc: &RegionConstants, z: PointC2) -> bool {
    let (ax, ay) = (z.x.norm(), z.y.norm());
    let in_w = ax <= rc.alpha && ay <= rc.alpha;
    let off_tube = (h.poly().eval(z.y) - z.x).norm() > h.a.norm() * rc.alpha;
    (in_w && off_tube) || (ay < rc.epsilon && ax > rc.alpha)
}

pub fn check_disjoint_images(
    h: &HenonParams,
    rc: &RegionConstants,
    samples: usize,
    n_max: usize,
    seed: u64,
) -> Result<DisjointReport> {
    if h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<PointC2> = (0..samples)
        .map(|k| {
            if k % 2 == 0 {
                PointC2::new(
                    disc_sample(&mut rng, rc.alpha),
                    disc_sample(&mut rng, rc.alpha),
                )
            } else {
                let m = rc.alpha * 10f64.powf(rng.random::<f64>() * 2.0).max(1.0 + 1e-9);
                PointC2::new(
                    C64::from_polar(m, TAU * rng.random::<f64>()),
                    disc_sample(&mut rng, rc.epsilon),
                )
            }
        })
        .collect();
    let res: Vec<std::result::Result<Vec<DisjointViolation>, ()>> = par_map(&draws, |&z| {
        if !in_fundamental_set(h, rc, z) {
            return Err(());
        }
        let mut v = Vec::new();
        let mut cur = z;
        for k in 1..=n_max {
            cur = henon_forward(h, cur);
            if !cur.is_finite() || cur.norm() > 1e150 {
                break;
            }
            if in_fundamental_set(h, rc, cur) {
                v.push(DisjointViolation {
                    point: z,
                    k,
                    image: cur,
                });
            }
        }
        Ok(v)
    });
    let mut report = DisjointReport {
        tested: 0,
        excluded: 0,
        violations: Vec::new(),
    };
    for r in res {
        match r {
            Ok(v) => {
                report.tested += 1;
                report.violations.extend(v);
            }
            Err(()) => report.excluded += 1,
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------- model check

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluingPair {
    /// address of the handle whose |y| = alpha circle is mapped
    pub handle: String,
    /// Omega component holding the image circle ("hat-omega-1" for the horizontal pair)
    pub target: String,
    pub iterate: u32,
    pub samples: usize,
    /// cyclic index shift that best aligns the two parametrizations
    pub shift: usize,
    pub distance: f64,
    pub diameter: f64,
    pub tolerance: f64,
    pub matched: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleDiameter {
    pub address: String,
    pub depth: usize,
    pub diameter: f64,
    /// enclosing hole one level up
    pub parent: Option<String>,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub main_component: String,
    pub handles: Vec<String>,
    pub handle_pairs: Vec<GluingPair>,
    pub horizontal_pair: GluingPair,
    pub unmatched: Vec<String>,
    /// S_j -> S_{j+1} for j in the sphere window
    pub sphere_shift: Vec<(i64, i64)>,
    pub hole_diameters: Vec<HoleDiameter>,
}

impl ModelReport {
    pub fn passed(&self) -> bool {
        self.unmatched.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.handle_pairs.len() + 1
    }

    /// Largest child/parent hole-diameter ratio.
    pub fn max_hole_ratio(&self) -> Option<f64> {
        self.hole_diameters
            .iter()
            .filter_map(|d| d.ratio)
            .reduce(f64::max)
    }

    pub fn into_result(self) -> Result<Self> {
        let bad = self
            .handle_pairs
            .iter()
            .chain(std::iter::once(&self.horizontal_pair))
            .find(|p| !p.matched)
            .map(|p| (format!("{} -> {}", p.handle, p.target), p.distance));
        match bad {
            Some((pair, distance)) => Err(Error::GluingMismatch { pair, distance }),
            None => Ok(self),
        }
    }
}

const GLUE_SAMPLES: usize = 64;

fn glue_pair(
    h: &HenonParams,
    rc: &RegionConstants,
    address: &PreimageAddress,
    opts: &NewtonOptions,
) -> Result<GluingPair> {
    let p = h.poly();
    let xi = address.point(&p);
    let mut guess = xi;
    let mut image = Vec::with_capacity(GLUE_SAMPLES);
    for k in 0..GLUE_SAMPLES {
        let y = C64::from_polar(rc.alpha, TAU * k as f64 / GLUE_SAMPLES as f64);
        let x = sheet_x(h, rc, y, guess, opts)?;
        guess = x;
        image.push(henon_forward(h, PointC2::new(x, y)));
    }
    let target = blowup_circle(h, rc, address, GLUE_SAMPLES, opts)?;
    let mut diameter = 0.0f64;
    for a in &target {
        for b in &target {
            diameter = diameter.max(a.dist(b));
        }
    }
    let (shift, distance) = (0..GLUE_SAMPLES)
        .map(|s| {
            let d = (0..GLUE_SAMPLES)
                .map(|k| image[k].dist(&target[(k + s) % GLUE_SAMPLES]))
                .fold(0.0, f64::max);
            (s, d)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let tolerance = 1e-6 * diameter;
    let target_name = match address.parent() {
        Some(par) => par.to_string(),
        None => "hat-omega-1".to_string(),
    };
    Ok(GluingPair {
        handle: address.to_string(),
        target: target_name,
        iterate: 1,
        samples: GLUE_SAMPLES,
        shift,
        distance,
        diameter,
        tolerance,
        matched: distance <= tolerance,
    })
}

/// Diameters of the G+ = r/2^k holes around the depth-k preimages, k = 1..=depth_max.
pub fn hole_diameters(
    h: &HenonParams,
    rc: &RegionConstants,
    depth_max: usize,
    opts: &NewtonOptions,
) -> Result<Vec<HoleDiameter>> {
    let p = h.poly();
    let mut out: Vec<HoleDiameter> = Vec::new();
    let mut curves: Vec<(PreimageAddress, C64, TracedCurve)> = Vec::new();
    for k in 1..=depth_max {
        let level = rc.r / f64::from(1u32 << k);
        for addr in PreimageAddress::all(k) {
            let xi = addr.point(&p);
            let rad = sublevel_radius(&p, xi, level);
            // walk outward along the real direction until the level is crossed
            let mut t0 = 0.05 * rad;
            let mut t1 = t0;
            let g_on = |t: f64| -> Option<f64> {
                let x = xi + C64::new(t, 0.0);
                let y = sheet_y(h, rc, x, opts).ok()?;
                gplus(h, rc, PointC2::new(x, y))
            };
            while t1 < 2.0 * rad {
                t1 += 0.05 * rad;
                if g_on(t1).is_some_and(|g| g > level) {
                    break;
                }
                t0 = t1;
            }
            let seed = bisect_level(
                h,
                rc,
                xi + C64::new(t0, 0.0),
                xi + C64::new(t1, 0.0),
                level,
                opts,
            )
            .ok_or(Error::NoComponentFound("hole boundary"))?;
            let curve = trace_level(
                h,
                rc,
                seed,
                Guide::level_set(LevelFn::GreenPlus, level),
                rad / 40.0,
                1e-10,
                "hole circle",
            )?;
            let parent = curves
                .iter()
                .find(|(a, _, c)| a.depth() + 1 == k && c.winding(FixedVar::X, xi) != 0)
                .map(|(a, _, c)| (a.to_string(), c.diameter()));
            let diameter = curve.diameter();
            out.push(HoleDiameter {
                address: addr.to_string(),
                depth: k,
                diameter,
                parent: parent.as_ref().map(|p| p.0.clone()),
                ratio: parent.map(|p| diameter / p.1),
            });
            curves.push((addr, xi, curve));
        }
    }
    Ok(out)
}

pub fn verify_model(
    h: &HenonParams,
    rc: &RegionConstants,
    k_max: usize,
    sphere_window: i64,
) -> Result<ModelReport> {
    if h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    let opts = NewtonOptions {
        tol: 1e-12,
        ..NewtonOptions::default()
    };
    let mut handles = Vec::new();
    for k in 1..=k_max {
        handles.extend(PreimageAddress::all(k));
    }
    let pairs: Vec<Result<GluingPair>> = par_map(&handles, |a| glue_pair(h, rc, a, &opts));
    let handle_pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    let horizontal_pair = glue_pair(h, rc, &PreimageAddress::root(), &opts)?;
    let unmatched = handle_pairs
        .iter()
        .chain(std::iter::once(&horizontal_pair))
        .filter(|p| !p.matched)
        .map(|p| format!("{} -> {}", p.handle, p.target))
        .collect();
    let hole_diameters = if k_max > 0 {
        hole_diameters(h, rc, k_max, &opts)?
    } else {
        Vec::new()
    };
    Ok(ModelReport {
        main_component: PreimageAddress::root().to_string(),
        handles: handles.iter().map(|a| a.to_string()).collect(),
        handle_pairs,
        horizontal_pair,
        unmatched,
        sphere_shift: (-sphere_window..=sphere_window)
            .map(|j| (j, j + 1))
            .collect(),
        hole_diameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::henon::select_constants;
    use crate::poly::PolyParams;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rc() -> RegionConstants {
        static RC: std::sync::OnceLock<RegionConstants> = std::sync::OnceLock::new();
        *RC.get_or_init(|| select_constants(&PolyParams::new(c(-3.0, 0.0)), 0.1).unwrap())
    }

    fn h(a: f64) -> HenonParams {
        HenonParams::new(c(-3.0, 0.0), c(a, 0.0), 0.1)
    }

    #[test]
    fn horizontal_cones_degenerate_and_control() {
        let r = rc();
        let spec = ConeSpec::horizontal(&r);
        assert!(check_horizontal_cones(&h(0.0), &r, &spec, 2000, 1).passed());
        let rep = check_horizontal_cones(&h(1e-3), &r, &spec, 2000, 2);
        assert!(rep.passed() && rep.tested == 2000);
        let bad = spec.with_constant(20.0);
        assert!(!check_horizontal_cones(&h(1e-3), &r, &bad, 2000, 3).passed());
    }

    #[test]
    fn vertical_cones_and_controls() {
        let r = rc();
        let spec = ConeSpec::vertical(&r);
        let rep = check_vertical_cones(&h(1e-3), &r, &spec, 2000, 4).unwrap();
        assert!(
            rep.passed() && rep.tested == 2000,
            "{:?}",
            rep.violations.first()
        );
        assert!(
            !check_vertical_cones(&h(1e-3), &r, &spec.with_constant(0.05), 2000, 5)
                .unwrap()
                .passed()
        );
        let big = HenonParams::new(c(-3.0, 0.0), c(0.5, 0.0), 1.0);
        assert!(
            !check_vertical_cones(&big, &r, &spec.with_constant(0.05), 2000, 6)
                .unwrap()
                .passed()
        );
        assert_eq!(
            check_vertical_cones(&h(0.0), &r, &spec, 10, 0),
            Err(Error::DegenerateJacobian)
        );
    }

    #[test]
    fn vertical_vector_image_ratio() {
        // xi = 0: image (eta, 2 y eta / a), ratio |a| / |2 y|
        let hh = h(1e-3);
        let y = c(1.5, 0.5);
        let eta = c(0.3, -0.7);
        let img = (eta, (2.0 * y * eta - ZERO) / hh.a);
        let ratio = img.0.norm() / img.1.norm();
        assert!((ratio - hh.a.norm() / (2.0 * y.norm())).abs() < 1e-15);
    }

    #[test]
    fn membership_examples() {
        let r = rc();
        let s3 = 3f64.sqrt();
        let a1 = PreimageAddress::from_bits(&[0]);
        assert!(omega_membership(
            &h(0.0),
            &r,
            1,
            &a1,
            PointC2::re(s3 + 0.01, 0.0)
        ));
        assert!(!omega_membership(
            &h(0.0),
            &r,
            1,
            &a1,
            PointC2::re(s3 + 0.01, 7.0)
        ));
        assert!(!omega_membership(
            &h(0.0),
            &r,
            1,
            &a1,
            PointC2::re(-s3 - 0.01, 0.0)
        ));
        let a2 = PreimageAddress::from_bits(&[1]);
        assert!(omega_membership(
            &h(0.0),
            &r,
            1,
            &a2,
            PointC2::re(-s3 - 0.01, 0.0)
        ));
        assert!(omega_membership(
            &h(1e-3),
            &r,
            0,
            &PreimageAddress::root(),
            PointC2::re(0.05, 2.0)
        ));
    }

    #[test]
    fn orbit_address_matches_poly_address_at_a0() {
        let p = PolyParams::new(c(-3.0, 0.0));
        for x in [c(1.2, 0.3), c(-2.1, 0.4), c(0.3, -1.0)] {
            assert_eq!(
                orbit_address(&h(0.0), PointC2::new(x, c(0.5, 0.0)), 3),
                PreimageAddress::of_point(&p, x, 3)
            );
        }
    }

    #[test]
    fn census_root_component() {
        let hh = h(1e-3);
        let r = rc();
        let root = PreimageAddress::root();
        let t = trace_component(&hh, &r, &root, &CensusOptions::default()).unwrap();
        let rep = census_component(&hh, &r, 0, &root, &t).unwrap();
        assert_eq!(rep.counts.as_tuple(), (1, 2, 1, 2), "{rep:?}");
        assert!(rep.matches_expected(), "{rep:?}");
    }

    #[test]
    fn census_depth_two_all_addresses() {
        let r = rc();
        for a in [c(1e-3, 0.0), C64::from_polar(5e-3, -2.0)] {
            let hh = HenonParams::new(c(-3.0, 0.0), a, 0.1);
            for addr in PreimageAddress::all(2) {
                let t = trace_component(&hh, &r, &addr, &CensusOptions::default()).unwrap();
                let rep = census_component(&hh, &r, 2, &addr, &t).unwrap();
                assert!(rep.matches_expected(), "{a} {addr}: {rep:?}");
                assert!(t.residual_max() < 1e-8);
            }
        }
    }

    #[test]
    fn census_degenerate_flag() {
        let root = PreimageAddress::root();
        let t = trace_component(&h(0.0), &rc(), &root, &CensusOptions::default()).unwrap();
        let rep = census_component(&h(0.0), &rc(), 0, &root, &t).unwrap();
        assert!(rep.degenerate && !rep.matches_expected());
    }

    #[test]
    fn disjoint_images_small() {
        let rep = check_disjoint_images(&h(1e-3), &rc(), 2000, 8, 11).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations.first());
        assert!(rep.tested > 1000);
        // a point right on the parabola is excluded, not a violation
        let z = PointC2::new(h(1e-3).poly().eval(c(1.0, 0.0)), c(1.0, 0.0));
        assert!(!in_fundamental_set(&h(1e-3), &rc(), z));
    }

    #[test]
    fn model_k0_and_k1() {
        let r = rc();
        let m0 = verify_model(&h(1e-3), &r, 0, 2).unwrap();
        assert!(m0.handles.is_empty() && m0.handle_pairs.is_empty());
        assert!(m0.horizontal_pair.matched, "{:?}", m0.horizontal_pair);
        let m1 = verify_model(&h(1e-3), &r, 1, 2).unwrap();
        assert_eq!(m1.handles.len(), 2);
        assert_eq!(m1.handle_pairs.len(), 2);
        assert!(m1.passed(), "{:?}", m1.handle_pairs);
        assert_eq!(m1.handle_pairs[0].target, "-");
        assert_eq!(
            verify_model(&h(0.0), &r, 1, 1).unwrap_err(),
            Error::DegenerateJacobian
        );
    }
}
