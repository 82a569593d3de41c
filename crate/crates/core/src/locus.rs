//! The tangency function w, the degenerate locus, Newton refinement and
//! predictor-corrector tracing in the standard, infinity (t = 1/x) and
//! blow-up (u = p(y) - x, v = a/u) charts.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::bottcher::{log_phi_minus_ext, log_phi_plus_ext};
use crate::error::{Error, Result};
use crate::henon::{HenonParams, PointC2, RegionConstants};
use crate::jet::C64;
use crate::poly::{
    green_poly, preimages_of_zero_capped, PolyParams, PreimageAddress, DEFAULT_DEPTH_CAP,
};

/// Truncation tolerance for the Böttcher telescopes inside w.
pub const PHI_TOL: f64 = 1e-15;
/// Relative step for the central differences of w.
pub const FD_STEP: f64 = 1e-6;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangencyValue {
    pub w: C64,
    pub grad_w: (C64, C64),
    pub depths: (u32, u32),
}

/// w = det of the normalized log-derivative rows of phi_+ and phi_-.
pub(crate) fn w_value(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
) -> Result<(C64, (u32, u32))> {
    let lp = log_phi_plus_ext(h, rc, z, tol).map_err(|e| Error::NotInDomain(Box::new(e)))?;
    let lm = log_phi_minus_ext(h, rc, z, tol).map_err(|e| Error::NotInDomain(Box::new(e)))?;
    let (px, py) = lp.normalized_grad();
    let (mx, my) = lm.normalized_grad();
    let w = px * my - py * mx;
    if !w.is_finite() {
        return Err(Error::NotInDomain(Box::new(Error::OutsideDomain {
            x: z.x,
            y: z.y,
        })));
    }
    Ok((w, (lp.depth, lm.depth)))
}

fn fd_h(z: PointC2) -> f64 {
    FD_STEP * z.x.norm().max(z.y.norm()).max(1.0)
}

pub(crate) fn fd_grad(
    f: &dyn Fn(PointC2) -> Result<C64>,
    z: PointC2,
    h: f64,
) -> Result<(C64, C64)> {
    let hx = C64::new(h, 0.0);
    let gx = (f(PointC2::new(z.x + hx, z.y))? - f(PointC2::new(z.x - hx, z.y))?) / (2.0 * h);
    let gy = (f(PointC2::new(z.x, z.y + hx))? - f(PointC2::new(z.x, z.y - hx))?) / (2.0 * h);
    Ok((gx, gy))
}

pub fn tangency_w(
    h: &HenonParams,
    rc: &RegionConstants,
    z: PointC2,
    tol: f64,
) -> Result<TangencyValue> {
    let (w, depths) = w_value(h, rc, z, tol)?;
    let f = |q: PointC2| w_value(h, rc, q, tol).map(|v| v.0);
    let grad_w = fd_grad(&f, z, fd_h(z))?;
    Ok(TangencyValue { w, grad_w, depths })
}

// ---------------------------------------------------------------- charts

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartTag {
    /// (x, y)
    Standard,
    /// (t, y) with t = 1/x
    Infinity,
    /// (u, y) with u = p(y) - x; v = a/u is implied by the parameter
    Blowup,
}

impl ChartTag {
    pub fn name(self) -> &'static str {
        match self {
            ChartTag::Standard => "standard",
            ChartTag::Infinity => "infinity",
            ChartTag::Blowup => "blowup",
        }
    }

    pub fn to_standard(self, h: &HenonParams, q: PointC2) -> Option<PointC2> {
        match self {
            ChartTag::Standard => Some(q),
            ChartTag::Infinity => (q.x != ZERO).then(|| PointC2::new(q.x.inv(), q.y)),
            ChartTag::Blowup => Some(PointC2::new(h.poly().eval(q.y) - q.x, q.y)),
        }
    }

    pub fn from_standard(self, h: &HenonParams, z: PointC2) -> Option<PointC2> {
        match self {
            ChartTag::Standard => Some(z),
            ChartTag::Infinity => (z.x != ZERO).then(|| PointC2::new(z.x.inv(), z.y)),
            ChartTag::Blowup => Some(PointC2::new(h.poly().eval(z.y) - z.x, z.y)),
        }
    }

    // d(x)/d(q1), d(x)/d(q2); y is always the second coordinate
    fn x_derivs(self, h: &HenonParams, q: PointC2) -> (C64, C64) {
        match self {
            ChartTag::Standard => (C64::new(1.0, 0.0), ZERO),
            ChartTag::Infinity => (-(q.x * q.x).inv(), ZERO),
            ChartTag::Blowup => {
                let _ = h;
                (C64::new(-1.0, 0.0), 2.0 * q.y)
            }
        }
    }
}

/// w~(t, y) = -w(1/t, y)/t^2, extended to t = 0 by its limit p'(y)/2 = y.
pub fn w_infinity(h: &HenonParams, rc: &RegionConstants, t: C64, y: C64, tol: f64) -> Result<C64> {
    if t == ZERO {
        return Ok(y);
    }
    let (w, _) = w_value(h, rc, PointC2::new(t.inv(), y), tol)?;
    Ok(-w / (t * t))
}

/// x-derivative of the normalized log phi_+ extension at a = 0.
fn ell_plus_x_degenerate(h: &HenonParams, rc: &RegionConstants, x: C64, tol: f64) -> Result<C64> {
    let h0 = h.with_a(ZERO);
    let lp = log_phi_plus_ext(&h0, rc, PointC2::new(x, ZERO), tol)?;
    Ok(lp.normalized_grad().0)
}

/// w~(u, y, v) = -u w(p(y) - u, y; a = u v). At u = 0 this is the limit
/// -l(p(y)) p'(y) / (2 (1 + (c - y) v^2)) with l the x-log-derivative of the
/// degenerate phi_+, which vanishes exactly where b_p'(p(y)) p'(y) does.
pub fn w_blowup(
    h: &HenonParams,
    rc: &RegionConstants,
    u: C64,
    y: C64,
    v: C64,
    tol: f64,
) -> Result<C64> {
    let p = h.poly();
    if u == ZERO {
        let l = ell_plus_x_degenerate(h, rc, p.eval(y), tol)
            .map_err(|e| Error::NotInDomain(Box::new(e)))?;
        let denom = 2.0 * (1.0 + (h.c - y) * v * v);
        return Ok(-l * 2.0 * y / denom);
    }
    let a = u * v;
    if !(a.norm() < h.big_r) {
        return Err(Error::OutsideDomain {
            x: p.eval(y) - u,
            y,
        });
    }
    let ha = h.with_a(a);
    let (w, _) = w_value(&ha, rc, PointC2::new(p.eval(y) - u, y), tol)?;
    Ok(-u * w)
}

/// w in chart coordinates at the fixed parameter of `h`.
pub fn chart_w(
    h: &HenonParams,
    rc: &RegionConstants,
    chart: ChartTag,
    q: PointC2,
    tol: f64,
) -> Result<C64> {
    match chart {
        ChartTag::Standard => w_value(h, rc, q, tol).map(|v| v.0),
        ChartTag::Infinity => w_infinity(h, rc, q.x, q.y, tol),
        ChartTag::Blowup => {
            if q.x == ZERO {
                return Err(Error::OutsideDomain {
                    x: h.poly().eval(q.y),
                    y: q.y,
                });
            }
            w_blowup(h, rc, q.x, q.y, h.a / q.x, tol)
        }
    }
}

// ---------------------------------------------------------------- degenerate locus

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    Parabola,
    FilledJulia,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedDisk {
    pub center: PointC2,
    pub radius: f64,
    pub reason: Exclusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DegenerateComponent {
    /// y = 0
    Horizontal { excluded: Vec<ExcludedDisk> },
    /// x = xi, xi = p^-k(0)
    Vertical {
        address: PreimageAddress,
        xi: C64,
        excluded: Vec<ExcludedDisk>,
    },
}

impl DegenerateComponent {
    /// Distance in C^2 from z to the line.
    pub fn distance(&self, z: PointC2) -> f64 {
        match self {
            DegenerateComponent::Horizontal { .. } => z.y.norm(),
            DegenerateComponent::Vertical { xi, .. } => (z.x - xi).norm(),
        }
    }
}

// Radius of the sublevel component {G_p < level} around `center`, by ray marching.
pub(crate) fn sublevel_radius(p: &PolyParams, center: C64, level: f64) -> f64 {
    let rays = 32;
    let mut best = 0.0f64;
    for k in 0..rays {
        let dir = C64::from_polar(1.0, TAU * k as f64 / rays as f64);
        let mut lo = 0.0;
        let mut step = 1e-3;
        while green_poly(p, center + dir * (lo + step), 1e-14, 500).value < level && step < 1e3 {
            lo += step;
            step *= 1.5;
        }
        let mut hi = lo + step;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if green_poly(p, center + dir * mid, 1e-14, 500).value < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.max(hi);
    }
    best * 1.1
}

/// y = 0 together with the vertical lines over p^-k(0), k <= k_max.
pub fn degenerate_locus(
    p: &PolyParams,
    rc: &RegionConstants,
    k_max: u32,
) -> Result<Vec<DegenerateComponent>> {
    let _ = rc;
    let mut roots = Vec::new();
    for k in 0..=k_max {
        roots.extend(preimages_of_zero_capped(p, k, DEFAULT_DEPTH_CAP)?);
    }
    let deeper = preimages_of_zero_capped(p, k_max + 1, DEFAULT_DEPTH_CAP)?;
    let g0 = green_poly(p, ZERO, 1e-15, 500).value;
    let level = g0 / f64::from(1u32 << k_max.min(30));
    let mut excluded = vec![ExcludedDisk {
        center: PointC2::new(p.c, ZERO),
        radius: 0.0,
        reason: Exclusion::Parabola,
    }];
    for xi in deeper.values() {
        excluded.push(ExcludedDisk {
            center: PointC2::new(*xi, ZERO),
            radius: sublevel_radius(p, *xi, level),
            reason: Exclusion::FilledJulia,
        });
    }
    let mut out = vec![DegenerateComponent::Horizontal { excluded }];
    for (address, xi) in roots {
        let s = (xi - p.c).sqrt();
        let excluded = [s, -s]
            .into_iter()
            .map(|y| ExcludedDisk {
                center: PointC2::new(xi, y),
                radius: 0.0,
                reason: Exclusion::Parabola,
            })
            .collect();
        out.push(DegenerateComponent::Vertical {
            address,
            xi,
            excluded,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SeedProvenance {
    DegenerateContinuation(Option<PreimageAddress>),
    InfinityChart,
    Manual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocusSeed {
    pub point: PointC2,
    pub provenance: SeedProvenance,
}

impl LocusSeed {
    pub fn manual(point: PointC2) -> Self {
        Self {
            point,
            provenance: SeedProvenance::Manual,
        }
    }
}

/// One seed per degenerate component: (x0, 0) on the horizontal line and
/// (xi, y0) on each vertical line.
pub fn degenerate_seeds(components: &[DegenerateComponent], x0: C64, y0: C64) -> Vec<LocusSeed> {
    components
        .iter()
        .map(|c| match c {
            DegenerateComponent::Horizontal { .. } => LocusSeed {
                point: PointC2::new(x0, ZERO),
                provenance: SeedProvenance::DegenerateContinuation(None),
            },
            DegenerateComponent::Vertical { address, xi, .. } => LocusSeed {
                point: PointC2::new(*xi, y0),
                provenance: SeedProvenance::DegenerateContinuation(Some(address.clone())),
            },
        })
        .collect()
}

// ---------------------------------------------------------------- Newton

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedVar {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_steps: usize,
    pub trust_radius: f64,
    /// |dw| must exceed this times the local scale of w.
    pub cond_floor: f64,
    pub phi_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_steps: 60,
            trust_radius: 0.5,
            cond_floor: 1e-8,
            phi_tol: PHI_TOL,
        }
    }
}

/// Damped complex Newton for f(s) = 0 with a central-difference derivative.
pub(crate) fn newton_1d(
    f: &dyn Fn(C64) -> Result<C64>,
    s0: C64,
    opts: &NewtonOptions,
    stage: &'static str,
) -> Result<C64> {
    let mut s = s0;
    let mut fs = f(s)?;
    for _ in 0..opts.max_steps {
        if fs.norm() < opts.tol {
            return Ok(s);
        }
        let hstep = FD_STEP * s.norm().max(1.0);
        let hc = C64::new(hstep, 0.0);
        let d = (f(s + hc)? - f(s - hc)?) / (2.0 * hstep);
        let scale = fs.norm() / opts.trust_radius;
        if !(d.norm() >= opts.cond_floor * scale) || d.norm() == 0.0 {
            return Err(Error::IllConditioned {
                derivative: d.norm(),
                floor: opts.cond_floor * scale,
            });
        }
        let full = -fs / d;
        let mut delta = full;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = s + delta;
            if (cand - s0).norm() <= opts.trust_radius {
                if let Ok(fc) = f(cand) {
                    if fc.norm() < fs.norm() || fc.norm() < opts.tol {
                        s = cand;
                        fs = fc;
                        accepted = true;
                        break;
                    }
                }
            }
            delta *= 0.5;
        }
        if !accepted {
            // residual sits on its rounding floor: the Newton step no longer moves s
            if full.norm() <= 64.0 * f64::EPSILON * s.norm().max(1.0) {
                return Ok(s);
            }
            break;
        }
    }
    if fs.norm() < opts.tol {
        return Ok(s);
    }
    Err(Error::NoConvergence {
        stage,
        steps: opts.max_steps,
        residual: fs.norm(),
    })
}

/// Solves w = 0 in the variable not held fixed.
pub fn newton_refine(
    h: &HenonParams,
    rc: &RegionConstants,
    seed: &LocusSeed,
    fixed: FixedVar,
    opts: &NewtonOptions,
) -> Result<PointC2> {
    let z0 = seed.point;
    let s = match fixed {
        FixedVar::X => {
            let f = |y: C64| w_value(h, rc, PointC2::new(z0.x, y), opts.phi_tol).map(|v| v.0);
            newton_1d(&f, z0.y, opts, "newton_refine")?
        }
        FixedVar::Y => {
            let f = |x: C64| w_value(h, rc, PointC2::new(x, z0.y), opts.phi_tol).map(|v| v.0);
            newton_1d(&f, z0.x, opts, "newton_refine")?
        }
    };
    Ok(match fixed {
        FixedVar::X => PointC2::new(z0.x, s),
        FixedVar::Y => PointC2::new(s, z0.y),
    })
}

// ---------------------------------------------------------------- tracing

/// Holomorphic functions whose real level sets guide the continuation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelFn {
    X,
    Y,
    LogY,
    /// log(p(y) - x)
    LogU,
    /// normalized log phi_+ extension; its real part is G+
    GreenPlus,
}

fn level_eval(
    h: &HenonParams,
    rc: &RegionConstants,
    f: LevelFn,
    z: PointC2,
    tol: f64,
) -> Result<(C64, C64, C64)> {
    let one = C64::new(1.0, 0.0);
    Ok(match f {
        LevelFn::X => (z.x, one, ZERO),
        LevelFn::Y => (z.y, ZERO, one),
        LevelFn::LogY => (z.y.ln(), ZERO, z.y.inv()),
        LevelFn::LogU => {
            let u = h.poly().eval(z.y) - z.x;
            (u.ln(), -u.inv(), 2.0 * z.y / u)
        }
        LevelFn::GreenPlus => {
            let l = log_phi_plus_ext(h, rc, z, tol)?;
            let (gx, gy) = l.normalized_grad();
            (l.raw.v * l.scale(), gx, gy)
        }
    })
}

/// Follow the real level set Re(e^{i phase} L) = level inside the locus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Guide {
    pub func: LevelFn,
    pub phase: f64,
    /// None: the value at the start point.
    pub level: Option<f64>,
}

impl Guide {
    pub fn level_set(func: LevelFn, level: f64) -> Self {
        Self {
            func,
            phase: 0.0,
            level: Some(level),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceBounds {
    pub max_abs_x: f64,
    pub max_abs_y: f64,
    pub green: Option<(f64, f64)>,
    pub min_abs_u: Option<f64>,
}

impl TraceBounds {
    pub fn boxed(max_abs_x: f64, max_abs_y: f64) -> Self {
        Self {
            max_abs_x,
            max_abs_y,
            green: None,
            min_abs_u: None,
        }
    }

    pub fn contains(&self, h: &HenonParams, rc: &RegionConstants, z: PointC2) -> bool {
        if !(z.x.norm() <= self.max_abs_x && z.y.norm() <= self.max_abs_y) {
            return false;
        }
        if let Some(umin) = self.min_abs_u {
            if (h.poly().eval(z.y) - z.x).norm() < umin {
                return false;
            }
        }
        if let Some((lo, hi)) = self.green {
            let g = crate::escape::green_plus(h, rc, z, 1e-14, crate::escape::DEFAULT_MAX_ITER);
            if !(g.escaped && g.value >= lo && g.value <= hi) {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub step: f64,
    pub min_step: f64,
    pub max_samples: usize,
    /// Corrector tolerance on |w| (chart-scaled).
    pub tol: f64,
    pub phi_tol: f64,
    /// None picks the coordinate in which the locus is a graph at the start.
    pub guide: Option<Guide>,
    pub bounds: TraceBounds,
    /// +1 or -1: which way to leave the start point.
    pub orientation: f64,
    /// Gradient norm below which the point is reported singular.
    pub singular_floor: f64,
}

impl TraceOptions {
    pub fn new(step: f64, bounds: TraceBounds) -> Self {
        Self {
            step,
            min_step: step * 1e-4,
            max_samples: 20_000,
            tol: 1e-10,
            phi_tol: PHI_TOL,
            guide: None,
            bounds,
            orientation: 1.0,
            singular_floor: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Closed,
    LeftBounds,
    SampleCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracedCurve {
    pub samples: Vec<(PointC2, ChartTag)>,
    pub closed: bool,
    pub residuals: Vec<f64>,
    pub step: f64,
    pub termination: Termination,
}

impl TracedCurve {
    pub fn points(&self) -> impl Iterator<Item = PointC2> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn residual_max(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Largest distance between two samples.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<PointC2> = self.points().collect();
        let mut d = 0.0f64;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max(pts[i].dist(&pts[j]));
            }
        }
        d
    }

    /// Winding number of the projection to one coordinate around `center`.
    pub fn winding(&self, coord: FixedVar, center: C64) -> i64 {
        let pick = |z: &PointC2| match coord {
            FixedVar::X => z.x,
            FixedVar::Y => z.y,
        };
        let pts: Vec<C64> = self.samples.iter().map(|s| pick(&s.0) - center).collect();
        winding_of(&pts)
    }
}

pub(crate) fn winding_of(pts: &[C64]) -> i64 {
    if pts.len() < 3 {
        return 0;
    }
    let mut total = 0.0;
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        total += (b / a).arg();
    }
    (total / TAU).round() as i64
}

fn dot(a: (C64, C64), b: (C64, C64)) -> f64 {
    (a.0 * b.0.conj() + a.1 * b.1.conj()).re
}

fn cnorm(a: (C64, C64)) -> f64 {
    (a.0.norm_sqr() + a.1.norm_sqr()).sqrt()
}

struct Tracer<'a> {
    h: &'a HenonParams,
    rc: &'a RegionConstants,
    chart: ChartTag,
    opts: &'a TraceOptions,
    guide: Guide,
    level: f64,
}

impl Tracer<'_> {
    fn w(&self, q: PointC2) -> Result<C64> {
        chart_w(self.h, self.rc, self.chart, q, self.opts.phi_tol)
    }

    fn w_grad(&self, q: PointC2) -> Result<(C64, (C64, C64))> {
        let w = self.w(q)?;
        let f = |p: PointC2| self.w(p);
        let g = fd_grad(&f, q, fd_h(q))?;
        let n = cnorm(g);
        if !(n > self.opts.singular_floor) {
            let z = self.chart.to_standard(self.h, q).unwrap_or(q);
            return Err(Error::SingularPoint { x: z.x, y: z.y });
        }
        Ok((w, g))
    }

    // Re(e^{i phase} L) and the holomorphic derivatives of e^{i phase} L in chart coordinates.
    fn guide_eval(&self, q: PointC2) -> Result<(f64, C64, C64)> {
        let z = self
            .chart
            .to_standard(self.h, q)
            .ok_or(Error::OutsideDomain { x: q.x, y: q.y })?;
        let (l, lx, ly) = level_eval(self.h, self.rc, self.guide.func, z, self.opts.phi_tol)?;
        let rot = C64::from_polar(1.0, self.guide.phase);
        let (dx1, dx2) = self.chart.x_derivs(self.h, q);
        let g1 = rot * lx * dx1;
        let g2 = rot * (lx * dx2 + ly);
        Ok(((rot * l).re, g1, g2))
    }

    fn correct(&self, q0: PointC2) -> Result<PointC2> {
        let mut q = q0;
        let ltol = 1e-12 * (1.0 + self.level.abs());
        for _ in 0..40 {
            let (w, g) = self.w_grad(q)?;
            let n2 = g.0.norm_sqr() + g.1.norm_sqr();
            q = PointC2::new(q.x - w * g.0.conj() / n2, q.y - w * g.1.conj() / n2);
            let (val, l1, l2) = self.guide_eval(q)?;
            let t = (-g.1, g.0);
            let d = l1 * t.0 + l2 * t.1;
            if d.norm() == 0.0 {
                return Err(Error::NoConvergence {
                    stage: "trace corrector (guide critical)",
                    steps: 0,
                    residual: (self.level - val).abs(),
                });
            }
            let e = self.level - val;
            let s = e * d.conj() / d.norm_sqr();
            q = PointC2::new(q.x + s * t.0, q.y + s * t.1);
            if !q.is_finite() {
                break;
            }
            let wn = self.w(q)?;
            let (vn, m1, m2) = self.guide_eval(q)?;
            let lfloor =
                ltol.max(256.0 * f64::EPSILON * (m1.norm() + m2.norm()) * q.norm().max(1.0));
            // |w| can only be resolved down to rounding of |grad w| |q|
            let wfloor = self
                .opts
                .tol
                .max(256.0 * f64::EPSILON * n2.sqrt() * q.norm().max(1.0));
            if wn.norm() < wfloor && (vn - self.level).abs() < lfloor {
                return Ok(q);
            }
        }
        Err(Error::NoConvergence {
            stage: "trace corrector",
            steps: 40,
            residual: self.w(q).map(|w| w.norm()).unwrap_or(f64::INFINITY),
        })
    }

    // Unit tangent of the guided path at q (before orientation).
    fn direction(&self, q: PointC2) -> Result<(C64, C64)> {
        let (_, g) = self.w_grad(q)?;
        let t = (-g.1, g.0);
        let (_, l1, l2) = self.guide_eval(q)?;
        let d = l1 * t.0 + l2 * t.1;
        if d.norm() == 0.0 {
            return Err(Error::StepCollapse { min_step: 0.0 });
        }
        let zeta = I * d.conj() / d.norm();
        let nt = cnorm(t);
        Ok((zeta * t.0 / nt, zeta * t.1 / nt))
    }
}

fn auto_guide(
    h: &HenonParams,
    rc: &RegionConstants,
    chart: ChartTag,
    q: PointC2,
    tol: f64,
) -> Result<Guide> {
    let f = |p: PointC2| chart_w(h, rc, chart, p, tol);
    let g = fd_grad(&f, q, fd_h(q))?;
    // graph over x when dw/dy dominates: walk along Re x
    let func = if g.1.norm() >= g.0.norm() {
        LevelFn::X
    } else {
        LevelFn::Y
    };
    if chart != ChartTag::Standard {
        return Ok(Guide {
            func: LevelFn::Y,
            phase: FRAC_PI_2,
            level: None,
        });
    }
    Ok(Guide {
        func,
        phase: FRAC_PI_2,
        level: None,
    })
}

/// Predictor-corrector continuation of {w = 0} from `start` (chart coordinates).
pub fn trace_locus(
    h: &HenonParams,
    rc: &RegionConstants,
    start: PointC2,
    chart: ChartTag,
    opts: &TraceOptions,
) -> Result<TracedCurve> {
    let guide = match opts.guide {
        Some(g) => g,
        None => auto_guide(h, rc, chart, start, opts.phi_tol)?,
    };
    let mut tr = Tracer {
        h,
        rc,
        chart,
        opts,
        guide,
        level: 0.0,
    };
    tr.level = match guide.level {
        Some(l) => l,
        None => tr.guide_eval(start)?.0,
    };
    let z0 = tr.correct(start)?;
    let mut samples = vec![z0];
    let mut residuals = vec![tr.w(z0)?.norm()];
    let d0 = tr.direction(z0)?;
    let d0 = (
        d0.0 * opts.orientation.signum(),
        d0.1 * opts.orientation.signum(),
    );
    let mut dir = d0;
    let mut z = z0;
    let mut hstep = opts.step;
    let cos30 = 30f64.to_radians().cos();
    let mut travelled = 0.0;
    let finish = |samples: Vec<PointC2>,
                  residuals: Vec<f64>,
                  closed: bool,
                  termination: Termination| TracedCurve {
        samples: samples.into_iter().map(|s| (s, chart)).collect(),
        closed,
        residuals,
        step: opts.step,
        termination,
    };
    loop {
        if samples.len() >= opts.max_samples {
            return Ok(finish(samples, residuals, false, Termination::SampleCap));
        }
        // loop closure: the start is less than 1.5 steps ahead and we're heading its way
        let back = (z0.x - z.x, z0.y - z.y);
        let along = dot(back, dir);
        let gap = cnorm(back);
        let aim = if travelled > 4.0 * opts.step
            && gap < 1.5 * hstep
            && along > 0.0
            && dot(dir, d0) > cos30
        {
            Some(along.max(0.25 * hstep))
        } else {
            None
        };
        let len = aim.unwrap_or(hstep);
        let pred = PointC2::new(z.x + dir.0 * len, z.y + dir.1 * len);
        let next = tr.correct(pred).and_then(|q| {
            let nd = tr.direction(q)?;
            Ok((q, nd))
        });
        let ok = match &next {
            Ok((q, nd)) => {
                let moved = q.dist(&z);
                q.dist(&pred) < 0.5 * len
                    && moved > 0.2 * len
                    && moved < 2.0 * len
                    && dot(*nd, dir).abs() > 0.5
            }
            Err(Error::SingularPoint { .. }) => {
                return Err(next.unwrap_err());
            }
            Err(_) => false,
        };
        if !ok {
            hstep *= 0.5;
            if hstep < opts.min_step {
                return Err(Error::StepCollapse {
                    min_step: opts.min_step,
                });
            }
            continue;
        }
        let (q, mut nd) = next.unwrap();
        if dot(nd, dir) < 0.0 {
            nd = (-nd.0, -nd.1);
        }
        if aim.is_some() && q.dist(&z0) < 0.5 * opts.step {
            return Ok(finish(samples, residuals, true, Termination::Closed));
        }
        let zq = chart.to_standard(h, q).unwrap_or(q);
        if !opts.bounds.contains(h, rc, zq) {
            return Ok(finish(samples, residuals, false, Termination::LeftBounds));
        }
        travelled += q.dist(&z);
        residuals.push(tr.w(q)?.norm());
        samples.push(q);
        z = q;
        dir = nd;
        hstep = (hstep * 1.5).min(opts.step);
    }
}

// ---------------------------------------------------------------- infinity chart

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfinityChartReport {
    /// Samples in (t, y) coordinates on the two fit circles plus the origin.
    pub curve: TracedCurve,
    /// w~(0, 0) recovered as the circle mean of w~(t, 0) (removable singularity).
    pub w_origin: C64,
    /// dy/dt at t = 0 from the fit circle |t| = fit_radius.
    pub slope: C64,
    /// Same with the radius halved.
    pub slope_half: C64,
    /// C in 2 dy + C dt = 0.
    pub tangent_c: C64,
    pub fit_radius: f64,
}

impl InfinityChartReport {
    /// |slope - slope_half| relative to |slope| (absolute when both vanish).
    pub fn slope_stability(&self) -> f64 {
        let d = (self.slope - self.slope_half).norm();
        let s = self.slope.norm();
        if s < 1e-300 {
            d
        } else {
            d / s
        }
    }
}

const CHART_SAMPLES: usize = 32;

fn circle_fit(
    h: &HenonParams,
    rc: &RegionConstants,
    radius: f64,
    y_window: f64,
    opts: &NewtonOptions,
) -> Result<(C64, Vec<(PointC2, f64)>, C64)> {
    let mut sum = ZERO;
    let mut wsum = ZERO;
    let mut pts = Vec::with_capacity(CHART_SAMPLES);
    let mut guess = ZERO;
    for k in 0..CHART_SAMPLES {
        let t = C64::from_polar(radius, TAU * k as f64 / CHART_SAMPLES as f64);
        let f = |y: C64| w_infinity(h, rc, t, y, opts.phi_tol);
        let y = newton_1d(&f, guess, opts, "infinity chart")
            .map_err(|_| Error::NoComponentFound("infinity chart"))?;
        if y.norm() >= y_window {
            return Err(Error::NoComponentFound("infinity chart"));
        }
        guess = y;
        sum += y / t;
        wsum += w_infinity(h, rc, t, ZERO, opts.phi_tol)?;
        pts.push((PointC2::new(t, y), f(y)?.norm()));
    }
    Ok((sum / CHART_SAMPLES as f64, pts, wsum / CHART_SAMPLES as f64))
}

/// The locus component through (t, y) = (0, 0) as a graph y(t).
pub fn locus_infinity_chart(
    h: &HenonParams,
    rc: &RegionConstants,
    y_window: f64,
    tol: f64,
) -> Result<InfinityChartReport> {
    let opts = NewtonOptions {
        tol,
        trust_radius: y_window,
        ..NewtonOptions::default()
    };
    let radius = 0.3 / rc.alpha;
    let (slope, mut pts, w_origin) = circle_fit(h, rc, radius, y_window, &opts)?;
    let (slope_half, pts2, _) = circle_fit(h, rc, 0.5 * radius, y_window, &opts)?;
    pts.extend(pts2);
    let origin = PointC2::new(ZERO, ZERO);
    pts.insert(0, (origin, w_infinity(h, rc, ZERO, ZERO, tol)?.norm()));
    Ok(InfinityChartReport {
        curve: TracedCurve {
            samples: pts.iter().map(|(p, _)| (*p, ChartTag::Infinity)).collect(),
            closed: false,
            residuals: pts.iter().map(|(_, r)| *r).collect(),
            step: radius,
            termination: Termination::SampleCap,
        },
        w_origin,
        slope,
        slope_half,
        tangent_c: -2.0 * slope,
        fit_radius: radius,
    })
}

// ---------------------------------------------------------------- blow-up chart

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupChartReport {
    pub address: PreimageAddress,
    /// Samples (u, y) on circles |u| = |a| alpha * rho_j.
    pub curve: TracedCurve,
    /// Zero of w~(0, y, v) near xi for each sampled v (all equal to xi).
    pub limit_zeros: Vec<(C64, C64)>,
    /// The |u| = |a| alpha circle in standard coordinates, u = a alpha e^{i theta_k}.
    pub boundary_circle: Vec<PointC2>,
    /// max |y_blowup - y_standard| at the overlap circle.
    pub overlap_mismatch: f64,
}

/// y on the locus near xi with p(y) - x = u, at the parameter of h.
pub fn blowup_point(
    h: &HenonParams,
    rc: &RegionConstants,
    u: C64,
    guess: C64,
    opts: &NewtonOptions,
) -> Result<C64> {
    let f = |y: C64| w_blowup(h, rc, u, y, h.a / u, opts.phi_tol);
    newton_1d(&f, guess, opts, "blowup chart")
}

/// Points of the |u| = |a| alpha boundary circle labelled by xi, at u = a alpha e^{i theta}.
pub fn blowup_circle(
    h: &HenonParams,
    rc: &RegionConstants,
    address: &PreimageAddress,
    n: usize,
    opts: &NewtonOptions,
) -> Result<Vec<PointC2>> {
    let p = h.poly();
    let xi = address.point(&p);
    let mut guess = xi;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let u = h.a * rc.alpha * C64::from_polar(1.0, TAU * k as f64 / n as f64);
        let y = blowup_point(h, rc, u, guess, opts)
            .map_err(|_| Error::NoComponentFound("blowup circle"))?;
        guess = y;
        out.push(PointC2::new(p.eval(y) - u, y));
    }
    Ok(out)
}

pub fn locus_blowup_chart(
    h: &HenonParams,
    rc: &RegionConstants,
    address: &PreimageAddress,
    tol: f64,
) -> Result<BlowupChartReport> {
    if h.is_degenerate() {
        return Err(Error::DegenerateJacobian);
    }
    let p = h.poly();
    let xi = address.point(&p);
    let opts = NewtonOptions {
        tol,
        trust_radius: 0.25,
        ..NewtonOptions::default()
    };
    let base = h.a.norm() * rc.alpha;
    let radii = [1.0, 2.0, 4.0, 8.0];
    let mut samples: Vec<(PointC2, ChartTag)> = Vec::new();
    let mut residuals = Vec::new();
    let mut guess = xi;
    for (j, m) in radii.iter().enumerate() {
        for k in 0..CHART_SAMPLES {
            let u = C64::from_polar(base * m, h.a.arg() + TAU * k as f64 / CHART_SAMPLES as f64);
            let start = if k == 0 && j > 0 {
                samples[(j - 1) * CHART_SAMPLES].0
            } else {
                PointC2::new(u, guess)
            };
            let y = blowup_point(h, rc, u, start.y, &opts)
                .map_err(|_| Error::NoComponentFound("blowup chart"))?;
            guess = y;
            residuals.push(w_blowup(h, rc, u, y, h.a / u, PHI_TOL)?.norm());
            samples.push((PointC2::new(u, y), ChartTag::Blowup));
        }
    }
    let mut limit_zeros = Vec::new();
    for k in 0..8 {
        let v = C64::from_polar(
            0.9 / rc.alpha * (k as f64 + 1.0) / 8.0,
            TAU * k as f64 / 8.0,
        );
        let f = |y: C64| w_blowup(h, rc, ZERO, y, v, PHI_TOL);
        let y = newton_1d(&f, xi + C64::new(1e-3, 1e-3), &opts, "blowup limit")
            .map_err(|_| Error::NoComponentFound("blowup limit"))?;
        limit_zeros.push((v, y));
    }
    // the standard chart solves the same equation at the outer circle
    let mut overlap_mismatch = 0.0f64;
    let outer = &samples[(radii.len() - 1) * CHART_SAMPLES..];
    for (q, _) in outer {
        let x = p.eval(q.y) - q.x;
        // the root circle sits on the horizontal sheet (a graph over x), the
        // others on vertical sheets (graphs over y)
        let d = if address.depth() == 0 {
            let z = newton_refine(
                h,
                rc,
                &LocusSeed::manual(PointC2::new(x, xi)),
                FixedVar::X,
                &opts,
            )?;
            (z.y - q.y).norm()
        } else {
            let z = newton_refine(
                h,
                rc,
                &LocusSeed::manual(PointC2::new(p.eval(xi), q.y)),
                FixedVar::Y,
                &opts,
            )?;
            (z.x - x).norm()
        };
        overlap_mismatch = overlap_mismatch.max(d);
    }
    let boundary_circle = blowup_circle(h, rc, address, CHART_SAMPLES, &opts)?;
    Ok(BlowupChartReport {
        address: address.clone(),
        curve: TracedCurve {
            samples,
            closed: false,
            residuals,
            step: base,
            termination: Termination::SampleCap,
        },
        limit_zeros,
        boundary_circle,
        overlap_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::henon::select_constants;
    use crate::poly::preimages_of_zero;

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
    fn degenerate_w_examples() {
        let r = rc();
        let s3 = 3f64.sqrt();
        let off = tangency_w(&h(0.0), &r, PointC2::re(s3 + 0.5, 2.0), PHI_TOL).unwrap();
        assert!(off.w.norm() > 1e-3);
        let on_h = tangency_w(&h(0.0), &r, PointC2::re(4.0, 0.0), PHI_TOL).unwrap();
        assert!(on_h.w.norm() < 1e-10);
        let on_v = tangency_w(&h(0.0), &r, PointC2::re(s3, 2.0), PHI_TOL).unwrap();
        assert!(on_v.w.norm() < 1e-9, "{}", on_v.w);
    }

    #[test]
    fn w_not_in_domain_on_parabola() {
        // a = 0: phi_- extension is undefined on x = p(y)
        let e = tangency_w(&h(0.0), &rc(), PointC2::re(-2.0, 1.0), PHI_TOL).unwrap_err();
        assert!(matches!(e, Error::NotInDomain(_)));
    }

    #[test]
    fn degenerate_w_closed_form() {
        // a = 0: w = l(x) y / (p(y) - x) with l the log-derivative of the b_p extension
        let r = rc();
        for z in [
            PointC2::new(c(0.7, 0.2), c(1.5, -0.4)),
            PointC2::new(c(-1.1, 0.3), c(0.2, 2.0)),
        ] {
            let l = ell_plus_x_degenerate(&h(0.0), &r, z.x, PHI_TOL).unwrap();
            let u = h(0.0).poly().eval(z.y) - z.x;
            let want = l * z.y / u;
            let got = tangency_w(&h(0.0), &r, z, PHI_TOL).unwrap().w;
            assert!(
                (got - want).norm() < 1e-10 * want.norm().max(1.0),
                "{got} {want}"
            );
        }
    }

    #[test]
    fn grad_matches_coarser_difference() {
        let hh = h(1e-3);
        let z = PointC2::new(c(0.6, 0.1), c(1.3, 0.2));
        let tv = tangency_w(&hh, &rc(), z, PHI_TOL).unwrap();
        let f = |q: PointC2| w_value(&hh, &rc(), q, PHI_TOL).map(|v| v.0);
        let g = fd_grad(&f, z, 1e-4).unwrap();
        assert!((g.0 - tv.grad_w.0).norm() < 1e-5 * g.0.norm().max(1.0));
        assert!((g.1 - tv.grad_w.1).norm() < 1e-5 * g.1.norm().max(1.0));
    }

    #[test]
    fn depth_invariance_of_w() {
        use crate::bottcher::{log_phi_minus_at_depth, log_phi_plus_at_depth};
        let hh = HenonParams::new(c(-3.0, 0.0), c(1e-3, 3e-4), 0.1);
        let z = PointC2::new(c(0.3, 0.2), c(1.4, -0.2));
        let (w, (np, nm)) = w_value(&hh, &rc(), z, PHI_TOL).unwrap();
        let lp = log_phi_plus_at_depth(&hh, &rc(), z, np + 1, PHI_TOL).unwrap();
        let lm = log_phi_minus_at_depth(&hh, &rc(), z, nm + 1, PHI_TOL).unwrap();
        let (px, py) = lp.normalized_grad();
        let (mx, my) = lm.normalized_grad();
        let w2 = px * my - py * mx;
        assert!((w - w2).norm() < 1e-8 * w.norm());
    }

    #[test]
    fn degenerate_locus_examples() {
        let p = PolyParams::new(c(-3.0, 0.0));
        let d1 = degenerate_locus(&p, &rc(), 1).unwrap();
        assert_eq!(d1.len(), 4);
        assert!(matches!(d1[0], DegenerateComponent::Horizontal { .. }));
        let mut xs: Vec<f64> = d1
            .iter()
            .filter_map(|c| match c {
                DegenerateComponent::Vertical { xi, .. } => Some(xi.re),
                _ => None,
            })
            .collect();
        xs.sort_by(f64::total_cmp);
        let s3 = 3f64.sqrt();
        assert!((xs[0] + s3).abs() < 1e-14 && xs[1].abs() < 1e-14 && (xs[2] - s3).abs() < 1e-14);
        assert_eq!(degenerate_locus(&p, &rc(), 0).unwrap().len(), 2);
        assert_eq!(degenerate_locus(&p, &rc(), 2).unwrap().len(), 1 + 7);
        assert!(matches!(
            degenerate_locus(&p, &rc(), 40),
            Err(Error::DepthTooLarge { .. })
        ));
        // the Julia-set disks cover the real Cantor set K_p
        if let DegenerateComponent::Horizontal { excluded } = &d1[0] {
            let beta = 0.5 + (0.25f64 + 3.0).sqrt();
            for x in [beta, -beta, 0.9 * s3, -s3 * 1.05] {
                let g = green_poly(&p, c(x, 0.0), 1e-14, 500).value;
                if g < 1e-3 {
                    assert!(excluded.iter().any(|d| (d.center.x - x).norm() <= d.radius));
                }
            }
        }
    }

    #[test]
    fn newton_refine_examples() {
        let r = rc();
        let opts = NewtonOptions::default();
        let seed = LocusSeed::manual(PointC2::re(4.0, 0.0));
        assert_eq!(
            newton_refine(&h(0.0), &r, &seed, FixedVar::X, &opts).unwrap(),
            seed.point
        );
        let y3 = newton_refine(&h(1e-3), &r, &seed, FixedVar::X, &opts)
            .unwrap()
            .y
            .norm();
        let y4 = newton_refine(&h(1e-4), &r, &seed, FixedVar::X, &opts)
            .unwrap()
            .y
            .norm();
        assert!(y3 > 0.0 && y3 < 0.1);
        assert!((y3 / y4 - 10.0).abs() < 0.5, "{y3} {y4}");
        let s3 = 3f64.sqrt();
        let seed = LocusSeed::manual(PointC2::re(s3, 0.5));
        let x3 = newton_refine(&h(1e-3), &r, &seed, FixedVar::Y, &opts).unwrap();
        let x4 = newton_refine(&h(1e-4), &r, &seed, FixedVar::Y, &opts).unwrap();
        let d3 = (x3.x - s3).norm();
        let d4 = (x4.x - s3).norm();
        assert!(w_value(&h(1e-3), &r, x3, PHI_TOL).unwrap().0.norm() < 1e-10);
        assert!((d3 / d4 - 10.0).abs() < 0.5, "{d3} {d4}");
    }

    #[test]
    fn newton_ill_conditioned() {
        // along y = 0 at a = 0 the fixed-y solve has dw/dx = 0
        let seed = LocusSeed::manual(PointC2::re(4.0, 0.0));
        let m = LocusSeed::manual(PointC2::new(seed.point.x, c(0.0, 0.0)));
        let opts = NewtonOptions::default();
        let w = newton_refine(&h(0.0), &rc(), &m, FixedVar::Y, &opts);
        assert_eq!(w.unwrap(), m.point);
        let near = LocusSeed::manual(PointC2::re(4.0, 1e-3));
        let e = newton_refine(&h(0.0), &rc(), &near, FixedVar::Y, &opts).unwrap_err();
        assert!(
            matches!(
                e,
                Error::IllConditioned { .. } | Error::NoConvergence { .. }
            ),
            "{e:?}"
        );
    }

    #[test]
    fn trace_degenerate_horizontal() {
        let bounds = TraceBounds::boxed(5.0, rc().alpha);
        let mut opts = TraceOptions::new(0.05, bounds);
        opts.max_samples = 200;
        let t = trace_locus(
            &h(0.0),
            &rc(),
            PointC2::re(4.0, 0.0),
            ChartTag::Standard,
            &opts,
        )
        .unwrap();
        assert!(t.samples.len() > 10);
        assert!(t.points().all(|z| z.y.norm() < 1e-12));
        let mut xs: Vec<f64> = t.points().map(|z| z.x.re).collect();
        xs.dedup();
        assert!(xs.windows(2).all(|w| (w[1] - w[0]).abs() < 0.06));
    }

    #[test]
    fn trace_scales_with_a() {
        let bounds = TraceBounds::boxed(5.5, rc().alpha);
        let run = |a: f64| {
            let hh = h(a);
            let z = newton_refine(
                &hh,
                &rc(),
                &LocusSeed::manual(PointC2::re(4.0, 0.0)),
                FixedVar::X,
                &NewtonOptions::default(),
            )
            .unwrap();
            let mut opts = TraceOptions::new(0.05, bounds);
            opts.max_samples = 30;
            let t = trace_locus(&hh, &rc(), z, ChartTag::Standard, &opts).unwrap();
            assert!(t.residual_max() < opts.tol);
            t.points().map(|z| z.y.norm()).fold(0.0, f64::max)
        };
        let m3 = run(1e-3);
        let m4 = run(1e-4);
        let ratio = m3 / m4;
        assert!(ratio > 10.0 / 3.0 && ratio < 30.0, "{ratio}");
    }

    #[test]
    fn trace_closes_level_circle() {
        // |y| = 1 on the vertical sheet near x = 0
        let hh = h(1e-3);
        let r = rc();
        let z = newton_refine(
            &hh,
            &r,
            &LocusSeed::manual(PointC2::re(0.0, 1.0)),
            FixedVar::Y,
            &NewtonOptions::default(),
        )
        .unwrap();
        let mut opts = TraceOptions::new(0.05, TraceBounds::boxed(10.0, 10.0));
        opts.guide = Some(Guide::level_set(LevelFn::LogY, 0.0));
        let t = trace_locus(&hh, &r, z, ChartTag::Standard, &opts).unwrap();
        assert!(t.closed);
        assert_eq!(t.winding(FixedVar::Y, c(0.0, 0.0)).abs(), 1);
        assert!(t
            .points()
            .all(|q| (q.y.norm() - 1.0).abs() < 1e-9 && q.x.norm() < 1e-2));
        let n = t.samples.len() as f64;
        assert!((n * 0.05 - TAU).abs() < 0.5);
    }

    #[test]
    fn infinity_chart_examples() {
        let r = rc();
        let rep = locus_infinity_chart(&h(1e-3), &r, 0.5, 1e-13).unwrap();
        assert!(rep.w_origin.norm() < 1e-9, "{}", rep.w_origin);
        assert!(rep.slope.is_finite());
        assert!(
            rep.slope_stability() < 0.01,
            "{} {}",
            rep.slope,
            rep.slope_half
        );
        let rep0 = locus_infinity_chart(&h(0.0), &r, 0.5, 1e-13).unwrap();
        assert!(rep0.curve.points().all(|q| q.y.norm() < 1e-12));
        assert_eq!(rep0.slope, c(0.0, 0.0));
    }

    #[test]
    fn infinity_chart_is_continuous_at_t0() {
        let hh = h(1e-3);
        let r = rc();
        for y in [c(0.3, 0.0), c(-0.2, 0.4)] {
            let near = w_infinity(&hh, &r, c(1e-4, 0.0), y, PHI_TOL).unwrap();
            assert!((near - y).norm() < 1e-3);
        }
    }

    #[test]
    fn chart_zero_sets_agree() {
        let hh = h(1e-3);
        let r = rc();
        let z = newton_refine(
            &hh,
            &r,
            &LocusSeed::manual(PointC2::re(20.0, 0.0)),
            FixedVar::X,
            &NewtonOptions::default(),
        )
        .unwrap();
        let q = ChartTag::Infinity.from_standard(&hh, z).unwrap();
        let wt = chart_w(&hh, &r, ChartTag::Infinity, q, PHI_TOL).unwrap();
        let ws = w_value(&hh, &r, z, PHI_TOL).unwrap().0;
        // w~ = -w / t^2
        assert!(wt.norm() <= 10.0 * 1e-10 * z.x.norm_sqr().max(1.0));
        assert!(
            (wt + ws / (q.x * q.x)).norm()
                < 1e-12 * (1.0 + wt.norm()).max(ws.norm() * z.x.norm_sqr())
        );
        let qb = ChartTag::Blowup.from_standard(&hh, z).unwrap();
        let wb = chart_w(&hh, &r, ChartTag::Blowup, qb, PHI_TOL).unwrap();
        assert!(wb.norm() <= 10.0 * 1e-10 * qb.x.norm().max(1.0));
    }

    #[test]
    fn blowup_limit_examples() {
        let r = rc();
        let hh = h(1e-3);
        for k in 0..6 {
            let v = C64::from_polar(0.9 / r.alpha * k as f64 / 5.0, k as f64);
            assert!(
                w_blowup(&hh, &r, c(0.0, 0.0), c(0.0, 0.0), v, PHI_TOL)
                    .unwrap()
                    .norm()
                    < 1e-14
            );
            for y in [c(0.3, 0.0), c(0.0, -0.5), c(0.2, 0.2)] {
                assert!(
                    w_blowup(&hh, &r, c(0.0, 0.0), y, v, PHI_TOL)
                        .unwrap()
                        .norm()
                        > 1e-3
                );
            }
        }
    }

    #[test]
    fn blowup_limit_is_continuous() {
        let r = rc();
        let hh = h(1e-3);
        let y = c(0.3, 0.1);
        let v = c(0.05, 0.02);
        let lim = w_blowup(&hh, &r, c(0.0, 0.0), y, v, PHI_TOL).unwrap();
        let mut prev = f64::INFINITY;
        for u in [1e-2, 1e-3, 1e-4] {
            let near = w_blowup(&hh, &r, c(u, 0.0), y, v, PHI_TOL).unwrap();
            let err = (near - lim).norm();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-3 * lim.norm());
    }

    #[test]
    fn blowup_chart_root_and_child() {
        let r = rc();
        let hh = h(1e-3);
        for addr in [PreimageAddress::root(), PreimageAddress::from_bits(&[0])] {
            let rep = locus_blowup_chart(&hh, &r, &addr, 1e-10).unwrap();
            let xi = addr.point(&hh.poly());
            for (_, y) in &rep.limit_zeros {
                assert!((y - xi).norm() < 1e-9, "{addr} {y}");
            }
            assert!(
                rep.overlap_mismatch < 1e-6 * rep.curve.step,
                "{}",
                rep.overlap_mismatch
            );
            let inner = &rep.curve.samples[..CHART_SAMPLES];
            assert!(inner.iter().all(|(q, _)| (q.y - xi).norm() < 0.05));
            assert!(rep.curve.residual_max() < 1e-9);
        }
    }

    #[test]
    fn roots_from_independent_oracle() {
        let p = PolyParams::new(c(-3.0, 0.0));
        let roots = preimages_of_zero(&p, 3).unwrap();
        for (addr, xi) in roots {
            let w = tangency_w(&h(0.0), &rc(), PointC2::new(xi, c(1.5, 0.5)), PHI_TOL).unwrap();
            assert!(w.w.norm() < 1e-9, "{addr}");
        }
    }
}
