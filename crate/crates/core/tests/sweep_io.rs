use std::time::Instant;

use qpa_core::metrics::threshold_pol;
use qpa_core::output::{read_csv, read_json, to_json_string, write_csv, CSV_HEADER};
use qpa_core::sweep::{positive_gain_components, region_summaries, AxisRange};
use qpa_core::*;

fn grid(step: f64) -> SweepConfig {
    SweepConfig {
        p_range: AxisRange::new(0.0, 0.4, step),
        q_range: AxisRange::new(0.0, 0.4, step),
        ..SweepConfig::default()
    }
}

fn csv_bytes(result: &SweepResult) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf).unwrap();
    buf
}

#[test]
fn csv_schema_and_parse_back() {
    let result = run_sweep(&grid(0.05)).unwrap();
    let bytes = csv_bytes(&result);
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "p,q,e_z_pol,e_x_pol,e_z_et,e_x_et,k_pol,k_et,k_noisy,yield,e_z_post,e_x_post,k_qpa,gain,region"
    );
    assert_eq!(text.lines().count(), result.points.len() + 1);
    assert_eq!(CSV_HEADER.len(), 15);

    let rows = read_csv(bytes.as_slice()).unwrap();
    for (row, pt) in rows.iter().zip(&result.points) {
        let r = &pt.report;
        let post = r.post_pol.unwrap();
        let pairs = [
            (row.p, pt.p),
            (row.q, pt.q),
            (row.e_z_pol, r.pol.e_z),
            (row.e_x_pol, r.pol.e_x),
            (row.e_z_et, r.et.e_z),
            (row.e_x_et, r.et.e_x),
            (row.k_pol, r.k_pol),
            (row.k_et, r.k_et),
            (row.k_noisy, r.k_noisy),
            (row.qpa_yield, r.qpa_yield),
            (row.e_z_post.unwrap(), post.e_z),
            (row.e_x_post.unwrap(), post.e_x),
            (row.k_qpa, r.k_qpa),
            (row.gain, r.gain),
        ];
        for (parsed, exact) in pairs {
            assert!((parsed - exact).abs() <= 1e-10, "{parsed} vs {exact}");
        }
        assert_eq!(row.region, r.region);
    }
}

#[test]
fn zero_yield_rows_leave_post_columns_empty() {
    let cfg = SweepConfig {
        p_range: AxisRange::new(1.0, 1.0, 0.1),
        q_range: AxisRange::new(0.0, 0.0, 0.1),
        ..SweepConfig::default()
    };
    let result = run_sweep(&cfg).unwrap();
    assert_eq!(result.points[0].report.k_qpa, 0.0);
    let bytes = csv_bytes(&result);
    let rows = read_csv(bytes.as_slice()).unwrap();
    assert_eq!(rows[0].e_z_post, None);
    assert_eq!(rows[0].k_qpa, 0.0);
}

#[test]
fn csv_is_byte_identical_across_runs_and_threads() {
    let cfg = SweepConfig::default();
    let a = csv_bytes(&sweep::run_sweep_with_threads(&cfg, Some(1)).unwrap());
    let b = csv_bytes(&sweep::run_sweep_with_threads(&cfg, Some(8)).unwrap());
    let c = csv_bytes(&run_sweep(&cfg).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn json_echo_schema_and_reproduction() {
    let mut cfg = grid(0.1);
    cfg.intrinsic = Some(sweep::Intrinsic {
        v_pol: 0.01,
        v_et: 0.02,
    });
    let result = run_sweep(&cfg).unwrap();
    let text = to_json_string(&result).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["schema_version"], 1);
    assert!(value["metadata"]["artifact_version"].is_string());

    let back = read_json(&text).unwrap();
    assert_eq!(back.config, cfg);
    let rerun = run_sweep(&back.config).unwrap();
    assert_eq!(rerun.points, result.points);

    // CSV and JSON agree after parse-back.
    let rows = read_csv(csv_bytes(&result).as_slice()).unwrap();
    for (row, pt) in rows.iter().zip(&back.points) {
        assert!((row.gain - pt.report.gain).abs() <= 1e-10);
        assert!((row.k_qpa - pt.report.k_qpa).abs() <= 1e-10);
        assert!((row.qpa_yield - pt.report.qpa_yield).abs() <= 1e-10);
    }
}

#[test]
fn emitters_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_sweep(&grid(0.2)).unwrap();
    emit_csv(&result, &dir.path().join("r.csv")).unwrap();
    emit_json(&result, &dir.path().join("r.json")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    assert_eq!(read_json(&text).unwrap().points, result.points);
    assert!(emit_csv(&result, &dir.path().join("missing/r.csv")).is_err());
}

#[test]
fn default_map_structure() {
    let result = run_sweep(&SweepConfig::default()).unwrap();
    let components = positive_gain_components(&result);
    assert_eq!(
        components.len(),
        1,
        "positive gain should be one connected region"
    );

    // The region straddles both threshold lines.
    let e_pol = threshold_pol();
    let e_et = metrics::threshold_et();
    let positive: Vec<&sweep::GridPoint> = result
        .points
        .iter()
        .filter(|pt| pt.report.gain > 0.0)
        .collect();
    assert!(positive.iter().any(|pt| pt.p < e_pol) && positive.iter().any(|pt| pt.p > e_pol));
    assert!(positive.iter().any(|pt| pt.q < e_et) && positive.iter().any(|pt| pt.q > e_et));

    let summaries = region_summaries(&result);
    let area = |r: Region| summaries.iter().find(|s| s.region == r).unwrap().area;
    for r in Region::LABELLED {
        assert!(area(r) > 0.0, "{r} missing");
    }
    assert!(area(Region::III) > area(Region::II));
    let total: f64 = summaries.iter().map(|s| s.area).sum();
    assert!((total - 0.16).abs() < 1e-9);
}

#[test]
fn region_areas_stable_under_refinement() {
    let coarse = region_summaries(&run_sweep(&grid(0.01)).unwrap());
    let fine = region_summaries(&run_sweep(&grid(0.005)).unwrap());
    for (c, f) in coarse.iter().zip(&fine) {
        assert_eq!(c.region, f.region);
        let rel = (c.area - f.area).abs() / f.area;
        assert!(rel < 0.05, "{}: {} vs {} ({rel})", c.region, c.area, f.area);
    }
}

#[test]
fn default_grid_is_fast() {
    let start = Instant::now();
    let result = run_sweep(&SweepConfig::default()).unwrap();
    assert_eq!(result.points.len(), 81 * 81);
    assert!(start.elapsed().as_secs_f64() < 10.0);
}
