use std::path::Path;
use std::process::{Command, Output};

use henon_core::henon::{select_constants, HenonParams, PointC2};
use henon_core::locus::tangency_w;
use henon_core::poly::PreimageAddress;
use henon_core::topology::{census_component, trace_component, CensusOptions};
use henon_core::C64;
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_henon-locus"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn read_csv(p: &Path) -> Vec<[f64; 5]> {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_re,x_im,y_re,y_im,value"));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3], v[4]]
        })
        .collect()
}

#[test]
fn classify_smoke() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["classify", "--set", "resolution=16,16"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&d.path().join("classify.csv"));
    assert_eq!(rows.len(), 256);
    assert!(rows.iter().all(|r| [0.0, 1.0, 2.0].contains(&r[4])));
    let pgm = std::fs::read(d.path().join("classify.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
    assert_eq!(pgm.len(), b"P5\n16 16\n255\n".len() + 256);
}

#[test]
fn green_at_zero_a_is_constant_along_y() {
    // at a = 0 the forward map forgets y, so G+ depends on x alone
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &[
            "green",
            "--a",
            "0,0",
            "--set",
            "resolution=12,9",
            "--set",
            "window=-2,2,-2.5,2.5",
        ],
    );
    assert_eq!(code(&o), 0);
    let rows = read_csv(&d.path().join("green.csv"));
    assert_eq!(rows.len(), 108);
    for col in 0..12 {
        let column: Vec<_> = rows.iter().skip(col).step_by(12).collect();
        let g = column[0][4];
        assert!(
            column
                .iter()
                .all(|r| r[0] == column[0][0] && (r[4] - g).abs() <= 1e-12 * g.max(1.0)),
            "{column:?}"
        );
    }
    assert!(rows.iter().any(|r| r[4] > 0.0));
}

#[test]
fn w_grid_matches_library() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &[
            "w-grid",
            "--a",
            "0,0",
            "--set",
            "resolution=7,5",
            "--set",
            "plane=y",
            "--set",
            "fixed=0.3,0.1",
        ],
    );
    assert_eq!(code(&o), 0);
    let h = HenonParams::new(C64::new(-3.0, 0.0), C64::new(0.0, 0.0), 0.1);
    let rc = select_constants(&h.poly(), h.big_r).unwrap();
    let rows = read_csv(&d.path().join("w-grid.csv"));
    assert_eq!(rows.len(), 35);
    for r in rows {
        let z = PointC2::new(C64::new(r[0], r[1]), C64::new(r[2], r[3]));
        assert_eq!(z.x, C64::new(0.3, 0.1));
        let want = tangency_w(&h, &rc, z, 1e-15).map_or(f64::NAN, |t| t.w.norm());
        assert!(
            want.to_bits() == r[4].to_bits() || (want - r[4]).abs() <= 1e-15 * want.abs(),
            "{r:?} vs {want}"
        );
    }
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(
            code(&run(d.path(), &["green", "--set", "resolution=10,10"])),
            0
        );
        assert_eq!(
            code(&run(
                d.path(),
                &[
                    "verify",
                    "--suite",
                    "semiconjugacy",
                    "--seed",
                    "7",
                    "--set",
                    "samples=50"
                ]
            )),
            0
        );
    }
    for f in ["green.csv", "green.pgm", "verify.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["classify", "--set", "colour=red"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    std::fs::write(d.path().join("job.cfg"), "a = 0.01\n").unwrap();
    assert_eq!(
        code(&run(d.path(), &["--config", "job.cfg", "classify"])),
        2
    );
    assert!(!d.path().join("classify.csv").exists());
}

#[test]
fn malformed_seed_exits_two_with_usage() {
    let d = tempfile::tempdir().unwrap();
    for seed in ["point:1,2", "component:102", "sideways"] {
        let o = run(d.path(), &["trace", "--from", seed]);
        assert_eq!(code(&o), 2, "{seed}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("--from"));
    }
}

#[test]
fn component_trace_counts_match_census() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &["trace", "--from", "component:01", "--a", "0.002,0"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&d.path().join("trace.json"));
    let h = HenonParams::new(C64::new(-3.0, 0.0), C64::new(0.002, 0.0), 0.1);
    let rc = select_constants(&h.poly(), h.big_r).unwrap();
    let addr = PreimageAddress::from_bits(&[0, 1]);
    let t = trace_component(&h, &rc, &addr, &CensusOptions::default()).unwrap();
    let rep = census_component(&h, &rc, 2, &addr, &t).unwrap();
    for (k, v) in rep.counts.as_map() {
        assert_eq!(doc["boundary_crossings"][k].as_u64(), Some(v as u64), "{k}");
    }
    assert_eq!(rep.counts.as_tuple(), (1, 2, 1, 2));
    assert_eq!(doc["chart"], "standard");
    assert!(doc["residual_max"].as_f64().unwrap() < 1e-9);
}

#[test]
fn degenerate_horizontal_trace_stays_on_y_zero() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &["trace", "--from", "horizontal:1.7,0", "--a", "0,0"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&d.path().join("trace.json"));
    let s = doc["samples"].as_array().unwrap();
    assert!(s.len() > 10);
    assert!(s
        .iter()
        .all(|p| p[2].as_f64() == Some(0.0) && p[3].as_f64() == Some(0.0)));
}

#[test]
fn verify_reports_and_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &[
            "verify",
            "--suite",
            "functional-equations",
            "--set",
            "samples=200",
        ],
    );
    assert_eq!(code(&o), 0);
    let doc = read_json(&d.path().join("verify.json"));
    assert_eq!(doc["functional-equations"]["pass"], true);
    assert!(
        doc["functional-equations"]["residuals"]["plus_max"]
            .as_f64()
            .unwrap()
            < 1e-12
    );

    let o = run(
        d.path(),
        &[
            "verify",
            "--set",
            "suites=cones",
            "--set",
            "cone_c_override=50",
            "--set",
            "samples=200",
        ],
    );
    assert_eq!(code(&o), 1);
    let doc = read_json(&d.path().join("verify.json"));
    assert_eq!(doc["cones"]["pass"], false);
    assert!(!doc["cones"]["violations"].as_array().unwrap().is_empty());

    assert_eq!(code(&run(d.path(), &["verify", "--suite", "nonsense"])), 2);
}

#[test]
fn model_check_handles() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["model-check", "--set", "k_max=1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&d.path().join("model-check.json"));
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["report"]["handles"].as_array().unwrap().len(), 2);
    assert_eq!(doc["report"]["handle_pairs"].as_array().unwrap().len(), 2);

    assert_eq!(
        code(&run(d.path(), &["model-check", "--set", "k_max=0"])),
        0
    );
    let doc = read_json(&d.path().join("model-check.json"));
    assert!(doc["report"]["handles"].as_array().unwrap().is_empty());
    assert!(doc["report"]["horizontal_pair"].is_object());
}

#[test]
fn model_check_rejects_zero_a() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["model-check", "--a", "0,0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("a != 0"));
    assert!(!d.path().join("model-check.json").exists());
}
