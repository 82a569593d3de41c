//! henon-locus: grids, traces and verification suites for the Hénon critical locus.

mod config;
mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use henon_core::escape::{green_minus, green_minus_degenerate, green_plus};
use henon_core::henon::{
    classify_region, select_constants, HenonParams, PointC2, RegionConstants, RegionTag,
};
use henon_core::locus::{
    locus_infinity_chart, newton_refine, tangency_w, trace_locus, ChartTag, FixedVar, LocusSeed,
    NewtonOptions, TraceBounds, TraceOptions,
};
use henon_core::par::par_map;
use henon_core::poly::PreimageAddress;
use henon_core::topology::{
    census_component, trace_component, verify_model, BoundaryClass, CensusOptions,
};
use henon_core::verify::{run_suite, Suite, SuiteConfig};
use henon_core::{Error, C64};

use config::JobConfig;
use output::Outputs;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(PathBuf, std::io::Error),
    Numeric(Error),
}

impl CliError {
    pub fn io(p: &Path, e: std::io::Error) -> Self {
        CliError::Io(p.to_path_buf(), e)
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(..) => 3,
            CliError::Numeric(Error::GluingMismatch { .. }) => 1,
            CliError::Numeric(
                Error::DegenerateJacobian
                | Error::InfeasibleConstants { .. }
                | Error::DepthTooLarge { .. },
            ) => 2,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(p, e) => write!(f, "I/O error on {}: {e}", p.display()),
            CliError::Numeric(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numeric(e)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "henon-locus",
    version,
    about = "Critical locus of the complex Hénon family near a = 0"
)]
struct Cli {
    /// key=value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// override a config key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(flatten)]
    common: CommonFlags,
    #[command(subcommand)]
    cmd: Command,
}

/// Shorthands for the most used config keys.
#[derive(Args, Debug)]
struct CommonFlags {
    /// polynomial constant (key c)
    #[arg(long, global = true, value_name = "RE,IM", allow_hyphen_values = true)]
    c: Option<String>,
    /// Jacobian (key a)
    #[arg(long, global = true, value_name = "RE,IM", allow_hyphen_values = true)]
    a: Option<String>,
    /// RNG seed for sampled suites (key seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads, 0 = rayon default (key threads)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// directory for output files (key output_dir)
    #[arg(long = "output-dir", global = true)]
    output_dir: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Region tag per cell (0 = W, 1 = V+, 2 = V-)
    Classify,
    /// G+ or G- per cell (config key green_sign)
    Green,
    /// |w| per cell
    WGrid,
    /// Trace a locus component to JSON
    Trace {
        /// point:XR,XI,YR,YI | horizontal:XR,XI | vertical:ADDR,YR,YI | component:ADDR | infinity
        #[arg(long = "from", value_parser = parse_seed, allow_hyphen_values = true)]
        from: TraceSeed,
    },
    /// Run invariant suites (all when none is given)
    Verify {
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
    /// Check the gluing pattern of the fundamental domain
    ModelCheck,
}

#[derive(Clone, Debug, PartialEq)]
enum TraceSeed {
    Point(PointC2),
    Horizontal(C64),
    Vertical(PreimageAddress, C64),
    Component(PreimageAddress),
    Infinity,
}

fn parse_address(s: &str) -> Result<PreimageAddress, String> {
    if s == "-" || s.is_empty() {
        return Ok(PreimageAddress::root());
    }
    let bits: Vec<u8> = s
        .chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(format!("address '{s}' must be a string of 0/1 bits or '-'")),
        })
        .collect::<Result<_, _>>()?;
    Ok(PreimageAddress::from_bits(&bits))
}

fn parse_nums(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("'{t}' is not a number"))
        })
        .collect::<Result<_, _>>()?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(format!("expected {n} numbers in '{s}'"));
    }
    Ok(v)
}

fn parse_seed(s: &str) -> Result<TraceSeed, String> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "point" => {
            let v = parse_nums(rest, 4)?;
            Ok(TraceSeed::Point(PointC2::new(
                C64::new(v[0], v[1]),
                C64::new(v[2], v[3]),
            )))
        }
        "horizontal" => {
            let v = parse_nums(rest, 2)?;
            Ok(TraceSeed::Horizontal(C64::new(v[0], v[1])))
        }
        "vertical" => {
            let (addr, y) = rest
                .split_once(',')
                .ok_or("vertical seed needs ADDR,YR,YI")?;
            let v = parse_nums(y, 2)?;
            Ok(TraceSeed::Vertical(
                parse_address(addr)?,
                C64::new(v[0], v[1]),
            ))
        }
        "component" => Ok(TraceSeed::Component(parse_address(rest)?)),
        "infinity" if rest.is_empty() => Ok(TraceSeed::Infinity),
        _ => Err(format!("unknown seed '{s}'")),
    }
}

struct Job {
    cfg: JobConfig,
    h: HenonParams,
    rc: RegionConstants,
}

impl Job {
    fn new(cfg: JobConfig) -> Result<Self, CliError> {
        let h = HenonParams::new(cfg.complex("c")?, cfg.complex("a")?, cfg.f64("R")?);
        if !(h.big_r > 0.0) {
            return Err(CliError::Config("R must be positive".into()));
        }
        if h.a.norm() > h.big_r {
            return Err(CliError::Config(format!(
                "|a| = {} exceeds R = {}",
                h.a.norm(),
                h.big_r
            )));
        }
        let rc = select_constants(&h.poly(), h.big_r)?;
        Ok(Self { cfg, h, rc })
    }

    fn params_json(&self) -> Value {
        json!({
            "c": [self.h.c.re, self.h.c.im],
            "a": [self.h.a.re, self.h.a.im],
            "R": self.h.big_r,
            "alpha": self.rc.alpha,
            "r": self.rc.r,
        })
    }

    fn cells(&self) -> Result<(usize, usize, Vec<PointC2>), CliError> {
        let (nx, ny) = self.cfg.resolution()?;
        let w = self.cfg.list_f64("window", 4)?;
        let fixed = self.cfg.complex("fixed")?;
        let coord = |i: usize, n: usize, lo: f64, hi: f64| {
            if n == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let plane = self.cfg.raw("plane").to_string();
        if !matches!(plane.as_str(), "real" | "x" | "y") {
            return Err(CliError::Config(format!(
                "plane = '{plane}': expected real, x or y"
            )));
        }
        let mut cells = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let u = coord(i, nx, w[0], w[1]);
                let v = coord(j, ny, w[2], w[3]);
                cells.push(match plane.as_str() {
                    "real" => PointC2::re(u, v),
                    "x" => PointC2::new(C64::new(u, v), fixed),
                    _ => PointC2::new(fixed, C64::new(u, v)),
                });
            }
        }
        Ok((nx, ny, cells))
    }

    fn grid(
        &self,
        name: &str,
        default_log: bool,
        f: impl Fn(PointC2) -> f64 + Sync + Send,
    ) -> Result<(), CliError> {
        let (nx, ny, cells) = self.cells()?;
        let values = par_map(&cells, |z| f(*z));
        let log = match self.cfg.raw("pgm_scale") {
            "auto" => default_log,
            "log" => true,
            "linear" => false,
            s => {
                return Err(CliError::Config(format!(
                    "pgm_scale = '{s}': expected auto, log or linear"
                )))
            }
        };
        let mut out = Outputs::default();
        out.csv(&self.cfg.output_path(name, "csv"), &cells, &values)?;
        out.pgm(&self.cfg.output_path(name, "pgm"), nx, ny, &values, log)?;
        report_written(out.commit());
        Ok(())
    }
}

fn report_written(paths: Vec<PathBuf>) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn class_map(m: &BTreeMap<&'static str, usize>) -> Value {
    Value::Object(m.iter().map(|(k, v)| (k.to_string(), json!(v))).collect())
}

fn cmd_trace(job: &Job, seed: &TraceSeed) -> Result<(), CliError> {
    let (h, rc) = (&job.h, &job.rc);
    let tol = job.cfg.f64("tol")?;
    let (chart, samples, residual_max, closed, crossings) = match seed {
        TraceSeed::Component(addr) => {
            let t = trace_component(h, rc, addr, &CensusOptions::default())?;
            let rep = census_component(h, rc, addr.depth() as u32, addr, &t)?;
            let pts: Vec<PointC2> = t.samples().collect();
            let closed = t.circles.iter().all(|c| c.curve.closed);
            let mut m = class_map(&rep.counts.as_map());
            if rep.degenerate {
                m = Value::Object(
                    BoundaryClass::ALL
                        .iter()
                        .map(|c| (c.key().to_string(), json!(0)))
                        .collect(),
                );
            }
            (ChartTag::Standard, pts, t.residual_max(), closed, m)
        }
        TraceSeed::Infinity => {
            let r = locus_infinity_chart(h, rc, 0.5, 1e-13)?;
            let pts: Vec<PointC2> = r.curve.points().collect();
            (
                ChartTag::Infinity,
                pts,
                r.curve.residual_max(),
                false,
                json!({}),
            )
        }
        _ => {
            let (start, fixed) = match seed {
                TraceSeed::Point(z) => (*z, FixedVar::X),
                TraceSeed::Horizontal(x) => (PointC2::new(*x, C64::new(0.0, 0.0)), FixedVar::X),
                TraceSeed::Vertical(addr, y) => {
                    (PointC2::new(addr.point(&h.poly()), *y), FixedVar::Y)
                }
                _ => unreachable!(),
            };
            let nopts = NewtonOptions {
                phi_tol: tol,
                ..NewtonOptions::default()
            };
            let z0 = newton_refine(h, rc, &LocusSeed::manual(start), fixed, &nopts)?;
            let b = job.cfg.list_f64("trace_box", 2)?;
            let mut opts =
                TraceOptions::new(job.cfg.f64("trace_step")?, TraceBounds::boxed(b[0], b[1]));
            opts.max_samples = job.cfg.usize("trace_max_samples")?;
            opts.phi_tol = tol;
            let t = trace_locus(h, rc, z0, ChartTag::Standard, &opts)?;
            let pts: Vec<PointC2> = t.points().collect();
            (
                ChartTag::Standard,
                pts,
                t.residual_max(),
                t.closed,
                json!({}),
            )
        }
    };
    let doc = json!({
        "params": job.params_json(),
        "chart": chart.name(),
        "samples": samples.iter().map(|z| [z.x.re, z.x.im, z.y.re, z.y.im]).collect::<Vec<_>>(),
        "residual_max": residual_max,
        "closed": closed,
        "boundary_crossings": crossings,
    });
    let mut out = Outputs::default();
    out.json(&job.cfg.output_path("trace", "json"), &doc)?;
    report_written(out.commit());
    Ok(())
}

fn suite_config(job: &Job) -> Result<SuiteConfig, CliError> {
    let samples = job.cfg.usize("samples")?;
    Ok(SuiteConfig {
        c: job.h.c,
        a: job.h.a,
        big_r: job.h.big_r,
        seed: job.cfg.u64("seed")?,
        samples: (samples > 0).then_some(samples),
        cone_c_override: job.cfg.opt_f64("cone_c_override")?,
        k_max: job.cfg.usize("k_max")?,
        n_max: job.cfg.usize("n_max")?,
        census_depth: job.cfg.usize("census_depth")?,
    })
}

/// Returns whether every selected suite passed.
fn cmd_verify(job: &Job, names: &[String]) -> Result<bool, CliError> {
    let mut names: Vec<String> = names.to_vec();
    if names.is_empty() {
        names = job
            .cfg
            .raw("suites")
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    let suites: Vec<Suite> = if names.is_empty() {
        Suite::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|n| n.parse::<Suite>().map_err(CliError::Config))
            .collect::<Result<_, _>>()?
    };
    let scfg = suite_config(job)?;
    let mut doc = serde_json::Map::new();
    let mut all = true;
    for s in suites {
        let rep = run_suite(s, &scfg, &job.rc);
        eprintln!("{s}: {}", if rep.pass { "pass" } else { "FAIL" });
        all &= rep.pass;
        doc.insert(
            s.name().to_string(),
            serde_json::to_value(&rep).expect("report serializes"),
        );
    }
    let mut out = Outputs::default();
    out.json(&job.cfg.output_path("verify", "json"), &Value::Object(doc))?;
    report_written(out.commit());
    Ok(all)
}

fn cmd_model_check(job: &Job) -> Result<bool, CliError> {
    if job.h.is_degenerate() {
        return Err(CliError::Config(
            "model-check needs a != 0: the fundamental domain is not defined at a = 0".into(),
        ));
    }
    let k_max = job.cfg.usize("k_max")?;
    let window = job.cfg.usize("sphere_window")? as i64;
    let rep = verify_model(&job.h, &job.rc, k_max, window)?;
    let doc = json!({
        "params": job.params_json(),
        "k_max": k_max,
        "report": serde_json::to_value(&rep).expect("report serializes"),
        "pass": rep.passed(),
    });
    let mut out = Outputs::default();
    out.json(&job.cfg.output_path("model-check", "json"), &doc)?;
    report_written(out.commit());
    match rep.into_result() {
        Ok(_) => Ok(true),
        Err(e) => {
            eprintln!("{e}");
            Ok(false)
        }
    }
}

fn load_config(cli: &Cli) -> Result<JobConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            JobConfig::parse_file_text(&text)?
        }
        None => JobConfig::default(),
    };
    for kv in &cli.set {
        cfg.set_pair(kv)?;
    }
    let f = &cli.common;
    for (k, v) in [
        ("c", f.c.clone()),
        ("a", f.a.clone()),
        ("seed", f.seed.map(|s| s.to_string())),
        ("threads", f.threads.map(|s| s.to_string())),
        ("output_dir", f.output_dir.clone()),
    ] {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    Ok(cfg)
}

fn init_threads(n: usize) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads = {n}: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = load_config(cli)?;
    init_threads(cfg.usize("threads")?)?;
    let job = Job::new(cfg)?;
    let (h, rc) = (&job.h, &job.rc);
    let gtol = job.cfg.f64("green_tol")?;
    let max_iter = job.cfg.usize("max_iter")?;
    let tol = job.cfg.f64("tol")?;
    if !(gtol > 0.0 && tol > 0.0) {
        return Err(CliError::Config("tolerances must be positive".into()));
    }
    match &cli.cmd {
        Command::Classify => job.grid("classify", false, |z| match classify_region(rc, z) {
            RegionTag::W => 0.0,
            RegionTag::VPlus => 1.0,
            RegionTag::VMinus => 2.0,
        })?,
        Command::Green => match job.cfg.raw("green_sign") {
            "plus" => job.grid("green", false, |z| {
                green_plus(h, rc, z, gtol, max_iter).value
            })?,
            "minus" if h.is_degenerate() => job.grid("green", false, |z| {
                green_minus_degenerate(&h.poly(), z).value
            })?,
            "minus" => job.grid("green", false, |z| {
                green_minus(h, rc, z, gtol, max_iter).map_or(f64::NAN, |g| g.value)
            })?,
            s => {
                return Err(CliError::Config(format!(
                    "green_sign = '{s}': expected plus or minus"
                )))
            }
        },
        Command::WGrid => job.grid("w-grid", true, |z| {
            tangency_w(h, rc, z, tol).map_or(f64::NAN, |t| t.w.norm())
        })?,
        Command::Trace { from } => cmd_trace(&job, from)?,
        Command::Verify { suites } => return cmd_verify(&job, suites),
        Command::ModelCheck => return cmd_model_check(&job),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("henon-locus: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_grammar() {
        assert_eq!(
            parse_seed("point:1,0,2,0").unwrap(),
            TraceSeed::Point(PointC2::re(1.0, 2.0))
        );
        assert_eq!(
            parse_seed("component:-").unwrap(),
            TraceSeed::Component(PreimageAddress::root())
        );
        assert_eq!(
            parse_seed("component:10").unwrap(),
            TraceSeed::Component(PreimageAddress::from_bits(&[1, 0]))
        );
        assert!(matches!(
            parse_seed("vertical:0,1.5,0").unwrap(),
            TraceSeed::Vertical(_, _)
        ));
        assert_eq!(parse_seed("infinity").unwrap(), TraceSeed::Infinity);
        for bad in [
            "point:1,2",
            "component:12",
            "nowhere",
            "horizontal:x,0",
            "infinity:3",
        ] {
            assert!(parse_seed(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).code(), 2);
        assert_eq!(CliError::Numeric(Error::NoComponentFound("t")).code(), 4);
        assert_eq!(
            CliError::Numeric(Error::GluingMismatch {
                pair: "0 -> -".into(),
                distance: 1.0
            })
            .code(),
            1
        );
        assert_eq!(
            CliError::io(Path::new("/x"), std::io::Error::other("boom")).code(),
            3
        );
    }
}
