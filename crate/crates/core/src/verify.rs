//! Invariant suites shared by the CLI `verify` command and the acceptance tests.
//! Each suite samples deterministically from a seeded ChaCha8 stream and
//! returns its worst-case metrics alongside the pass flag.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bottcher::{
    log_phi_minus_at_depth, log_phi_minus_ext, log_phi_plus_at_depth, phi_minus, phi_plus,
    phi_plus_ext,
};
use crate::error::{Error, Result};
use crate::escape::{green_minus, green_plus, DEFAULT_MAX_ITER};
use crate::henon::{henon_forward, henon_inverse, HenonParams, PointC2, RegionConstants};
use crate::jet::C64;
use crate::locus::{locus_infinity_chart, tangency_w, PHI_TOL};
use crate::par::par_map;
use crate::poly::{bottcher_poly, PolyParams, PreimageAddress};
use crate::topology::{
    census_component, check_disjoint_images, check_horizontal_cones, check_vertical_cones,
    degenerate_distance, trace_component, verify_model, CensusOptions, ConeSpec,
};

const ZERO: C64 = C64::new(0.0, 0.0);
const GREEN_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    FunctionalEquations,
    Semiconjugacy,
    DegenerateLimits,
    DegenerateLocus,
    Continuation,
    Census,
    Cones,
    FundamentalDomain,
    InfinityChart,
    Jets,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::FunctionalEquations,
        Suite::Semiconjugacy,
        Suite::DegenerateLimits,
        Suite::DegenerateLocus,
        Suite::Continuation,
        Suite::Census,
        Suite::Cones,
        Suite::FundamentalDomain,
        Suite::InfinityChart,
        Suite::Jets,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::FunctionalEquations => "functional-equations",
            Suite::Semiconjugacy => "semiconjugacy",
            Suite::DegenerateLimits => "degenerate-limits",
            Suite::DegenerateLocus => "degenerate-locus",
            Suite::Continuation => "continuation",
            Suite::Census => "census",
            Suite::Cones => "cones",
            Suite::FundamentalDomain => "fundamental-domain",
            Suite::InfinityChart => "infinity-chart",
            Suite::Jets => "jets",
        }
    }

    /// Sample count used when the config does not override it.
    pub fn default_samples(self) -> usize {
        match self {
            Suite::FunctionalEquations | Suite::Cones | Suite::FundamentalDomain => 10_000,
            Suite::Semiconjugacy | Suite::DegenerateLocus => 1_000,
            Suite::DegenerateLimits | Suite::Jets => 100,
            Suite::Continuation => 40,
            Suite::Census | Suite::InfinityChart => 0,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub c: C64,
    pub a: C64,
    pub big_r: f64,
    pub seed: u64,
    pub samples: Option<usize>,
    /// test hook: replaces both cone constants
    pub cone_c_override: Option<f64>,
    pub k_max: usize,
    pub n_max: usize,
    pub census_depth: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            c: C64::new(-3.0, 0.0),
            a: C64::new(1e-3, 0.0),
            big_r: 0.1,
            seed: 1,
            samples: None,
            cone_c_override: None,
            k_max: 3,
            n_max: 8,
            census_depth: 2,
        }
    }
}

impl SuiteConfig {
    fn params(&self) -> HenonParams {
        HenonParams::new(self.c, self.a, self.big_r)
    }

    fn samples(&self, s: Suite) -> usize {
        self.samples.unwrap_or_else(|| s.default_samples())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub pass: bool,
    pub residuals: BTreeMap<String, f64>,
    pub violations: Vec<String>,
}

impl SuiteReport {
    fn new() -> Self {
        Self {
            pass: true,
            residuals: BTreeMap::new(),
            violations: Vec::new(),
        }
    }

    fn metric(&mut self, k: &str, v: f64) {
        self.residuals.insert(k.to_string(), v);
    }

    /// Records `what` as a violation unless `ok`.
    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.pass = false;
            if self.violations.len() < 20 {
                self.violations.push(what());
            }
        }
    }

    fn error(e: Error) -> Self {
        let mut r = Self::new();
        r.require(false, || e.to_string());
        r
    }

    pub fn get(&self, k: &str) -> f64 {
        self.residuals.get(k).copied().unwrap_or(f64::NAN)
    }
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig, rc: &RegionConstants) -> SuiteReport {
    let h = cfg.params();
    let n = cfg.samples(suite);
    let out = match suite {
        Suite::FunctionalEquations => functional_equations(&h, rc, n, cfg.seed),
        Suite::Semiconjugacy => semiconjugacy(&h, rc, n, cfg.seed),
        Suite::DegenerateLimits => degenerate_limits(&h, rc, n, cfg.seed),
        Suite::DegenerateLocus => degenerate_locus_suite(&h, rc, n, cfg.seed),
        Suite::Continuation => continuation(&h, rc, n),
        Suite::Census => census(&h, rc, cfg.census_depth),
        Suite::Cones => cones(&h, rc, n, cfg.seed, cfg.cone_c_override),
        Suite::FundamentalDomain => fundamental_domain(&h, rc, n, cfg.seed, cfg.n_max, cfg.k_max),
        Suite::InfinityChart => infinity_chart(&h, rc),
        Suite::Jets => jets(&h, rc, n, cfg.seed),
    };
    out.unwrap_or_else(SuiteReport::error)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn box_point(r: &mut ChaCha8Rng, half: f64) -> PointC2 {
    let mut s = || r.random_range(-half..half);
    PointC2::new(C64::new(s(), s()), C64::new(s(), s()))
}

fn annulus(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> C64 {
    C64::from_polar(r.random_range(lo..hi), r.random_range(0.0..TAU))
}

fn nondegenerate(h: &HenonParams) -> Result<()> {
    if h.is_degenerate() {
        Err(Error::DegenerateJacobian)
    } else {
        Ok(())
    }
}

// draws from `gen` until `n` candidates pass `keep`, evaluating `keep` in parallel
fn draw<T: Send + Sync, F: Fn(&mut ChaCha8Rng) -> PointC2, K: Fn(PointC2) -> Option<T> + Sync>(
    seed: u64,
    n: usize,
    gen: F,
    keep: K,
) -> Vec<(PointC2, T)> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(n);
    let mut rounds = 0;
    while out.len() < n && rounds < 100 {
        let batch: Vec<PointC2> = (0..(n - out.len()).max(256)).map(|_| gen(&mut r)).collect();
        let vals = par_map(&batch, |z| keep(*z));
        for (z, v) in batch.into_iter().zip(vals) {
            if out.len() < n {
                if let Some(v) = v {
                    out.push((z, v));
                }
            }
        }
        rounds += 1;
    }
    out
}

/// |G+(f z) - 2 G+(z)| and |(G- - log|a|)(f^-1 z) - 2 (G- - log|a|)(z)| on escaping samples.
fn functional_equations(
    h: &HenonParams,
    rc: &RegionConstants,
    n: usize,
    seed: u64,
) -> Result<SuiteReport> {
    nondegenerate(h)?;
    let mut rep = SuiteReport::new();
    let la = h.a.norm().ln();
    let plus = draw(
        seed,
        n,
        |r| box_point(r, 8.0),
        |z| {
            let g = green_plus(h, rc, z, GREEN_TOL, DEFAULT_MAX_ITER);
            g.escaped.then(|| {
                (green_plus(h, rc, henon_forward(h, z), GREEN_TOL, DEFAULT_MAX_ITER).value
                    - 2.0 * g.value)
                    .abs()
            })
        },
    );
    let minus = draw(
        seed ^ 0x9e37,
        n,
        |r| box_point(r, 8.0),
        |z| {
            let g = green_minus(h, rc, z, GREEN_TOL, DEFAULT_MAX_ITER)
                .ok()
                .filter(|g| g.escaped)?;
            let g1 = green_minus(
                h,
                rc,
                henon_inverse(h, z).ok()?,
                GREEN_TOL,
                DEFAULT_MAX_ITER,
            )
            .ok()?;
            Some(((g1.value - la) - 2.0 * (g.value - la)).abs())
        },
    );
    for (name, set) in [("plus", &plus), ("minus", &minus)] {
        let worst = set.iter().map(|s| s.1).fold(0.0, f64::max);
        rep.metric(&format!("{name}_max"), worst);
        rep.metric(&format!("{name}_samples"), set.len() as f64);
        rep.require(set.len() == n, || {
            format!("{name}: only {} escaping samples", set.len())
        });
        for (z, e) in set {
            rep.require(*e < 1e-8, || format!("{name}: residual {e:e} at {z:?}"));
        }
    }
    Ok(rep)
}

/// phi+ o f = phi+^2 on V+ and a phi- o f^-1 = phi-^2 on V-, relative.
fn semiconjugacy(
    h: &HenonParams,
    rc: &RegionConstants,
    n: usize,
    seed: u64,
) -> Result<SuiteReport> {
    nondegenerate(h)?;
    let al = rc.alpha;
    let mut rep = SuiteReport::new();
    let plus = draw(
        seed,
        n,
        |r| {
            let x = annulus(r, 1.0001 * al, 4.0 * al);
            let y = x * annulus(r, 0.0, 1.0);
            PointC2::new(x, y)
        },
        |z| {
            let p0 = phi_plus(h, rc, z, PHI_TOL).ok()?.value;
            let p1 = phi_plus(h, rc, henon_forward(h, z), PHI_TOL).ok()?.value;
            Some((p1 - p0 * p0).norm() / (p0 * p0).norm())
        },
    );
    let minus = draw(
        seed ^ 0x51,
        n,
        |r| {
            let y = annulus(r, 1.0001 * al, 4.0 * al);
            let x = y * annulus(r, 0.0, 1.0);
            PointC2::new(x, y)
        },
        |z| {
            let p0 = phi_minus(h, rc, z, PHI_TOL).ok()?.value;
            let p1 = phi_minus(h, rc, henon_inverse(h, z).ok()?, PHI_TOL)
                .ok()?
                .value;
            Some((h.a * p1 - p0 * p0).norm() / (p0 * p0).norm())
        },
    );
    for (name, set) in [("plus", &plus), ("minus", &minus)] {
        rep.metric(
            &format!("{name}_max"),
            set.iter().map(|s| s.1).fold(0.0, f64::max),
        );
        rep.require(set.len() == n, || {
            format!("{name}: only {} samples", set.len())
        });
        for (z, e) in set {
            rep.require(*e < 1e-8, || {
                format!("{name}: relative residual {e:e} at {z:?}")
            });
        }
    }
    Ok(rep)
}

/// Exact a = 0 code paths, then the deviation at a = 1e-4.
fn degenerate_limits(
    h: &HenonParams,
    rc: &RegionConstants,
    n: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let h0 = h.with_a(ZERO);
    let hs = h.with_a(C64::new(1e-4, 0.0));
    let p = h.poly();
    let al = rc.alpha;
    let mut rep = SuiteReport::new();
    let mut r = rng(seed);
    let mut worst_plus: f64 = 0.0;
    let mut worst_minus: f64 = 0.0;
    for _ in 0..n {
        // V+ points
        let x = annulus(&mut r, 1.0001 * al, 4.0 * al);
        let z = PointC2::new(x, x * annulus(&mut r, 0.0, 1.0));
        let b = bottcher_poly(&p, x, PHI_TOL)?.value;
        let e0 = phi_plus_ext(&h0, rc, z, PHI_TOL)?.value;
        rep.require(e0 == b, || format!("phi+ at a=0 differs from b_p at {z:?}"));
        let dev = (phi_plus(&hs, rc, z, PHI_TOL)?.value - b).norm() / b.norm();
        worst_plus = worst_plus.max(dev);
        rep.require(dev < 1e-3, || format!("phi+ deviation {dev:e} at {z:?}"));
        // points off the parabola in the bidisk |x|, |y| <= alpha
        let y = annulus(&mut r, 0.0, al);
        let u = annulus(&mut r, 0.1, al);
        let z = PointC2::new(p.eval(y) - u, y);
        let l0 = log_phi_minus_ext(&h0, rc, z, PHI_TOL)?;
        let u = p.eval(z.y) - z.x;
        rep.require(
            l0.depth == 1 && (l0.raw.v.exp() - u).norm() <= 1e-14 * u.norm(),
            || format!("phi-^2 at a=0 is not p(y) - x at {z:?}"),
        );
        let ls = log_phi_minus_at_depth(&hs, rc, z, 1, PHI_TOL)?;
        let dev = (ls.raw.v.exp() - u).norm() / u.norm();
        worst_minus = worst_minus.max(dev);
        rep.require(dev < 1e-3, || format!("phi-^2 deviation {dev:e} at {z:?}"));
    }
    rep.metric("plus_deviation_max", worst_plus);
    rep.metric("minus_deviation_max", worst_minus);
    Ok(rep)
}

fn depth_k_roots(p: &PolyParams, k: usize) -> Vec<C64> {
    PreimageAddress::all(k).iter().map(|a| a.point(p)).collect()
}

/// Independent residual oracle for p^k(xi) = 0.
fn iterate_residual(p: &PolyParams, x: C64, k: usize) -> f64 {
    p.iterate(x, k as u32).norm()
}

/// |w| on the degenerate locus at a = 0 and away from it.
fn degenerate_locus_suite(
    h: &HenonParams,
    rc: &RegionConstants,
    n: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let h0 = h.with_a(ZERO);
    let p = h.poly();
    let mut rep = SuiteReport::new();
    let mut roots = Vec::new();
    for k in 0..=3 {
        for xi in depth_k_roots(&p, k) {
            let res = iterate_residual(&p, xi, k);
            rep.require(res < 1e-10, || {
                format!("root {xi} fails |p^{k}| < 1e-10 ({res:e})")
            });
            roots.push(xi);
        }
    }
    let mut r = rng(seed);
    let mut on: Vec<PointC2> = Vec::new();
    for _ in 0..n.div_ceil(2) {
        // y = 0 with x escaping beyond the filled Julia set
        on.push(PointC2::new(annulus(&mut r, 2.5, 6.0), ZERO));
    }
    for k in 0..n / 2 {
        let xi = roots[k % roots.len()];
        // stay off the parabola points y = +-sqrt(xi - c)
        let s = (xi - p.c).sqrt();
        let y = loop {
            let y = annulus(&mut r, 0.0, 4.0);
            if (y - s).norm() > 0.1 && (y + s).norm() > 0.1 {
                break y;
            }
        };
        on.push(PointC2::new(xi, y));
    }
    let on_w = par_map(&on, |z| {
        tangency_w(&h0, rc, *z, PHI_TOL).map(|t| t.w.norm())
    });
    let mut worst_on: f64 = 0.0;
    for (z, w) in on.iter().zip(on_w) {
        let w = w?;
        worst_on = worst_on.max(w);
        rep.require(w < 1e-9, || {
            format!("|w| = {w:e} on the degenerate locus at {z:?}")
        });
    }
    // far points: more than 0.1 from y = 0 and from every line over p^-k(0), k <= 8
    let far_roots: Vec<C64> = (0..=8).flat_map(|k| depth_k_roots(&p, k)).collect();
    let far = draw(
        seed ^ 0xfa,
        n,
        |r| box_point(r, 4.0),
        |z| {
            if z.y.norm() <= 0.1 || far_roots.iter().any(|xi| (z.x - xi).norm() <= 0.1) {
                return None;
            }
            match tangency_w(&h0, rc, z, PHI_TOL) {
                Ok(t) => Some(t.w.norm()),
                Err(_) => None,
            }
        },
    );
    rep.require(far.len() == n, || format!("only {} far samples", far.len()));
    let mut worst_far = f64::INFINITY;
    for (z, w) in &far {
        worst_far = worst_far.min(*w);
        rep.require(*w > 1e-3, || {
            format!("|w| = {w:e} far from the degenerate locus at {z:?}")
        });
    }
    rep.metric("on_locus_max", worst_on);
    rep.metric("off_locus_min", worst_far);
    Ok(rep)
}

/// Outside the crossing bidisks the locus in Omega^xi lies within K |a| of
/// the degenerate locus, one K for a in {10 a, a, a/10}.
fn continuation(h: &HenonParams, rc: &RegionConstants, grid: usize) -> Result<SuiteReport> {
    nondegenerate(h)?;
    let mut rep = SuiteReport::new();
    let scales = [10.0, 1.0, 0.1];
    let mut k_max: f64 = 0.0;
    let mut spread_max: f64 = 0.0;
    let mut neck_exp: Vec<f64> = Vec::new();
    for depth in 0..=2 {
        for addr in PreimageAddress::all(depth) {
            let mut ks = Vec::new();
            let mut necks = Vec::new();
            for s in scales {
                let hh = h.with_a(h.a * s);
                let d = degenerate_distance(&hh, rc, &addr, 0.1, grid.max(8))?;
                ks.push(d.hausdorff / hh.a.norm());
                necks.push((hh.a.norm(), d.neck));
            }
            let hi = ks.iter().copied().fold(0.0, f64::max);
            let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
            k_max = k_max.max(hi);
            spread_max = spread_max.max(hi / lo);
            rep.require(hi / lo <= 3.0, || {
                format!("{addr}: d/|a| ranges over [{lo:.3}, {hi:.3}]")
            });
            if depth == 0 {
                let (a0, n0) = necks[0];
                let (a2, n2) = necks[2];
                neck_exp.push((n0 / n2).ln() / (a0 / a2).ln());
            }
        }
    }
    rep.metric("k", k_max);
    rep.metric("k_spread", spread_max);
    if let Some(e) = neck_exp.first() {
        rep.metric("neck_exponent", *e);
    }
    Ok(rep)
}

/// Boundary census for every address with n <= depth.
fn census(h: &HenonParams, rc: &RegionConstants, depth: usize) -> Result<SuiteReport> {
    nondegenerate(h)?;
    let mut rep = SuiteReport::new();
    let addrs: Vec<PreimageAddress> = (0..=depth).flat_map(PreimageAddress::all).collect();
    let opts = CensusOptions::default();
    let reports = par_map(&addrs, |a| {
        let t = trace_component(h, rc, a, &opts)?;
        census_component(h, rc, a.depth() as u32, a, &t)
    });
    let mut ok = 0;
    for (a, r) in addrs.iter().zip(reports) {
        let r = r?;
        if r.matches_expected() {
            ok += 1;
        }
        rep.require(r.matches_expected(), || {
            format!(
                "{a}: counts {:?}, chi {}, connected {}, planar {}, graph {}",
                r.counts.as_tuple(),
                r.euler_characteristic,
                r.connected,
                r.planar_pieces,
                r.graph_checks
            )
        });
    }
    rep.metric("components", addrs.len() as f64);
    rep.metric("matched", ok as f64);
    Ok(rep)
}

/// Horizontal and vertical cone invariance; without the override the
/// deliberately bad constants must also be caught.
fn cones(
    h: &HenonParams,
    rc: &RegionConstants,
    n: usize,
    seed: u64,
    over: Option<f64>,
) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new();
    let mut hs = ConeSpec::horizontal(rc);
    let mut vs = ConeSpec::vertical(rc);
    if let Some(c) = over {
        hs = hs.with_constant(c);
        vs = vs.with_constant(c);
    }
    let hr = check_horizontal_cones(h, rc, &hs, n, seed);
    let vr = check_vertical_cones(h, rc, &vs, n, seed ^ 0x7)?;
    for (name, r) in [("horizontal", &hr), ("vertical", &vr)] {
        rep.metric(&format!("{name}_violations"), r.violations.len() as f64);
        rep.metric(&format!("{name}_constant"), r.constant);
        rep.require(r.tested == n, || {
            format!("{name}: only {} samples in the box", r.tested)
        });
        rep.require(r.passed(), || {
            format!(
                "{name}: {} violations with C = {}",
                r.violations.len(),
                r.constant
            )
        });
    }
    if over.is_none() {
        let m = n.min(2000);
        let bad_h = 1.01 * 2.0 * sublevel_x_max(h, rc);
        let ch = check_horizontal_cones(h, rc, &hs.with_constant(bad_h), m, seed ^ 0x11);
        let cv = check_vertical_cones(h, rc, &vs.with_constant(0.1), m, seed ^ 0x13)?;
        rep.metric("control_horizontal_violations", ch.violations.len() as f64);
        rep.metric("control_vertical_violations", cv.violations.len() as f64);
        rep.require(!ch.passed(), || {
            "horizontal negative control found no violation".into()
        });
        rep.require(!cv.passed(), || {
            "vertical negative control found no violation".into()
        });
    }
    Ok(rep)
}

/// Upper bound for |x| over the horizontal cone box.
fn sublevel_x_max(h: &HenonParams, rc: &RegionConstants) -> f64 {
    crate::locus::sublevel_radius(&h.poly(), ZERO, rc.r_prime) + h.a.norm() * rc.beta
}

/// Disjoint forward images, the gluing pattern and the hole-diameter decay.
fn fundamental_domain(
    h: &HenonParams,
    rc: &RegionConstants,
    n: usize,
    seed: u64,
    n_max: usize,
    k_max: usize,
) -> Result<SuiteReport> {
    nondegenerate(h)?;
    let mut rep = SuiteReport::new();
    let d = check_disjoint_images(h, rc, n, n_max, seed)?;
    rep.metric("disjoint_tested", d.tested as f64);
    rep.metric("disjoint_violations", d.violations.len() as f64);
    rep.require(d.passed(), || {
        format!("{} forward images re-enter the domain", d.violations.len())
    });
    let m = verify_model(h, rc, k_max, 3)?;
    let want = (1usize << (k_max + 1)) - 1;
    rep.metric("gluing_pairs", m.pair_count() as f64);
    rep.metric(
        "gluing_distance_max",
        m.handle_pairs
            .iter()
            .chain(std::iter::once(&m.horizontal_pair))
            .map(|p| p.distance / p.diameter)
            .fold(0.0, f64::max),
    );
    rep.require(m.pair_count() == want, || {
        format!("{} gluing pairs, expected {want}", m.pair_count())
    });
    for u in &m.unmatched {
        rep.require(false, || format!("unmatched gluing pair {u}"));
    }
    if k_max >= 2 {
        let ratio = m.max_hole_ratio().unwrap_or(f64::INFINITY);
        rep.metric("hole_ratio_max", ratio);
        rep.require(ratio < 1.0, || {
            format!("hole diameters do not shrink (ratio {ratio})")
        });
    }
    Ok(rep)
}

fn infinity_chart(h: &HenonParams, rc: &RegionConstants) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new();
    let c = locus_infinity_chart(h, rc, 0.5, 1e-13)?;
    rep.metric("w_origin", c.w_origin.norm());
    rep.metric("slope_stability", c.slope_stability());
    rep.metric("tangent_c_re", c.tangent_c.re);
    rep.metric("tangent_c_im", c.tangent_c.im);
    rep.require(c.w_origin.norm() < 1e-9, || {
        format!("|w~(0,0)| = {:e}", c.w_origin.norm())
    });
    rep.require(c.slope_stability() < 0.01, || {
        format!("tangent ratio drifts by {:.3e}", c.slope_stability())
    });
    Ok(rep)
}

// central difference of log-valued functions, unwrapping the branch jump
fn log_diff(f1: C64, f0: C64, step: f64) -> C64 {
    let mut d = f1 - f0;
    d.im -= TAU * (d.im / TAU).round();
    d / (2.0 * step)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-3)
}

/// d/dx and d/dy of log phi+^{2^n} and log phi-^{2^n} against central differences.
fn jets(h: &HenonParams, rc: &RegionConstants, n: usize, seed: u64) -> Result<SuiteReport> {
    nondegenerate(h)?;
    let mut rep = SuiteReport::new();
    let step = 1e-5;
    let pts = draw(
        seed,
        n,
        |r| box_point(r, 4.0),
        |z| {
            // away from the locus, where w is not small
            let tv = tangency_w(h, rc, z, PHI_TOL).ok()?;
            (tv.w.norm() > 1e-2).then_some(tv.depths)
        },
    );
    let errs = par_map(&pts, |(z, (np, nm))| -> Result<f64> {
        let hx = C64::new(step, 0.0);
        let mut worst: f64 = 0.0;
        let lp = |q: PointC2| log_phi_plus_at_depth(h, rc, q, *np, PHI_TOL);
        let lm = |q: PointC2| log_phi_minus_at_depth(h, rc, q, *nm, PHI_TOL);
        for f in [
            &lp as &dyn Fn(PointC2) -> Result<crate::bottcher::LogJet>,
            &lm,
        ] {
            let j = f(*z)?.raw;
            let dx = log_diff(
                f(PointC2::new(z.x + hx, z.y))?.raw.v,
                f(PointC2::new(z.x - hx, z.y))?.raw.v,
                step,
            );
            let dy = log_diff(
                f(PointC2::new(z.x, z.y + hx))?.raw.v,
                f(PointC2::new(z.x, z.y - hx))?.raw.v,
                step,
            );
            worst = worst.max(rel(dx, j.dx)).max(rel(dy, j.dy));
        }
        Ok(worst)
    });
    rep.require(pts.len() == n, || {
        format!("only {} samples away from the locus", pts.len())
    });
    let mut worst: f64 = 0.0;
    for ((z, _), e) in pts.iter().zip(errs) {
        let e = e?;
        worst = worst.max(e);
        rep.require(e < 1e-4, || format!("jet relative error {e:e} at {z:?}"));
    }
    rep.metric("relative_error_max", worst);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::henon::select_constants;

    fn rc() -> RegionConstants {
        select_constants(&PolyParams::new(C64::new(-3.0, 0.0)), 0.1).unwrap()
    }

    fn small(s: Suite) -> SuiteReport {
        let cfg = SuiteConfig {
            samples: Some(match s {
                Suite::Continuation => 12,
                _ => 64,
            }),
            k_max: 2,
            census_depth: 1,
            ..SuiteConfig::default()
        };
        run_suite(s, &cfg, &rc())
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass() {
        for s in Suite::ALL {
            let r = small(s);
            assert!(r.pass, "{s}: {:?}", r.violations);
        }
    }

    #[test]
    fn sabotaged_cone_constant_fails() {
        let cfg = SuiteConfig {
            samples: Some(200),
            cone_c_override: Some(50.0),
            ..SuiteConfig::default()
        };
        assert!(!run_suite(Suite::Cones, &cfg, &rc()).pass);
    }

    #[test]
    fn degenerate_parameter_is_reported() {
        let cfg = SuiteConfig {
            a: ZERO,
            samples: Some(10),
            ..SuiteConfig::default()
        };
        let r = run_suite(Suite::Semiconjugacy, &cfg, &rc());
        assert!(
            !r.pass && r.violations[0].contains("not invertible"),
            "{:?}",
            r.violations
        );
    }
}
