//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use qpa_core::linalg::{bell_projector, EQ_TOL};
use qpa_core::metrics::evaluate_point_with_outcome;
use qpa_core::montecarlo::{simulate_experiment_at, stream_rng};
use qpa_core::output::write_csv;
use qpa_core::qpa::qpa_matrix_pipeline;
use qpa_core::states::waveplate_angle_for;
use qpa_core::sweep::{
    positive_gain_components, region_summaries, run_sweep_with_threads, AxisRange,
};
use qpa_core::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn unit_grid() -> impl Iterator<Item = (f64, f64)> {
    (0..=20).flat_map(|i| (0..=20).map(move |j| (i as f64 / 20.0, j as f64 / 20.0)))
}

fn thresholds_cli() -> Check {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_qpa"))
        .arg("thresholds")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(out.status.success(), "thresholds exited with failure")?;
    let text = String::from_utf8_lossy(&out.stdout);
    let value = |name: &str| -> Result<f64, String> {
        text.lines()
            .find_map(|l| l.strip_prefix(name))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| format!("{name} missing"))
    };
    let (pol, et) = (value("pol_threshold")?, value("et_threshold")?);
    ensure(
        (pol - 0.11003).abs() <= 0.0005,
        format!("pol threshold {pol}"),
    )?;
    ensure(et > pol, format!("et threshold {et} not above {pol}"))?;
    ensure(elapsed < 1.0, format!("took {elapsed:.2} s"))?;
    Ok(format!("pol {pol}, et {et}, {elapsed:.3} s"))
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for (p, q) in unit_grid() {
        let pol = BellWeights::new([1.0 - p, 0.0, 0.0, p]).map_err(|e| e.to_string())?;
        let et = BellWeights::new([1.0 - q, q / 2.0, 0.0, q / 2.0]).map_err(|e| e.to_string())?;
        let state = HyperState::from_factors(pol.to_density(), et.to_density())
            .map_err(|e| e.to_string())?;
        let full = qpa_matrix_pipeline(&state);
        let fast = qpa_bell_algebra(&pol, &et);
        worst = worst.max((full.qpa_yield - fast.qpa_yield).abs());
        match (&full.output_pol, &fast.output_pol) {
            (Some(a), Some(b)) => worst = worst.max(a.matrix().max_abs_diff(b.matrix())),
            (None, None) => {}
            _ => return Err(format!("defined-ness differs at ({p}, {q})")),
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    ensure(elapsed < 10.0, format!("took {elapsed:.2} s"))?;
    Ok(format!(
        "441 points, max deviation {worst:e}, {elapsed:.3} s"
    ))
}

fn closed_forms() -> Check {
    let mut worst = 0.0_f64;
    for (p, q) in unit_grid() {
        let (report, _) = evaluate_point_with_outcome(&NoiseParams::new(p, q), QpaRoute::Matrix)
            .map_err(|e| e.to_string())?;
        let y = (1.0 - p) * (1.0 - q) + p * q;
        worst = worst.max((report.qpa_yield - y).abs());
        match report.post_pol {
            Some(post) => {
                worst = worst.max((post.e_z - p * q / y).abs());
                worst = worst.max((post.e_x - p * q / 2.0 / y).abs());
            }
            None => ensure(y == 0.0, format!("missing output at ({p}, {q})"))?,
        }
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:e}"))
}

fn map_structure() -> Check {
    let result = run_sweep(&SweepConfig::default()).map_err(|e| e.to_string())?;
    let components = positive_gain_components(&result).len();
    ensure(
        components == 1,
        format!("{components} positive-gain components"),
    )?;
    let summaries = region_summaries(&result);
    let area = |r: Region| {
        summaries
            .iter()
            .find(|s| s.region == r)
            .map_or(0.0, |s| s.area)
    };
    let count = |r: Region| {
        summaries
            .iter()
            .find(|s| s.region == r)
            .map_or(0, |s| s.points)
    };
    for r in Region::LABELLED {
        ensure(count(r) > 0, format!("region {r} absent"))?;
    }
    ensure(
        area(Region::III) > area(Region::II),
        format!(
            "area III {} <= area II {}",
            area(Region::III),
            area(Region::II)
        ),
    )?;
    let fresh_key = result
        .points
        .iter()
        .any(|pt| pt.report.k_pol == 0.0 && pt.report.k_et == 0.0 && pt.report.gain > 0.0);
    ensure(fresh_key, "no positive gain where both input rates vanish")?;
    let max_gain = result
        .points
        .iter()
        .map(|pt| pt.report.gain)
        .fold(f64::MIN, f64::max);
    ensure(max_gain > 0.0, format!("max gain {max_gain}"))?;
    Ok(format!(
        "1 component, area III {:.4} > II {:.4}, max gain {max_gain:.4}",
        area(Region::III),
        area(Region::II)
    ))
}

fn anchors() -> Check {
    for route in [QpaRoute::BellAlgebra, QpaRoute::Matrix] {
        let r = evaluate_point(&NoiseParams::new(0.0, 0.0), route).map_err(|e| e.to_string())?;
        ensure((r.gain + 1.0).abs() <= 1e-12, format!("gain {}", r.gain))?;
        ensure(
            (r.k_noisy - 1.5).abs() <= 1e-12,
            format!("k_noisy {}", r.k_noisy),
        )?;
        ensure((r.k_qpa - 0.5).abs() <= 1e-12, format!("k_qpa {}", r.k_qpa))?;
    }
    let mut zero_yield = 0;
    for (p, q) in unit_grid() {
        let r =
            evaluate_point(&NoiseParams::new(p, q), QpaRoute::Matrix).map_err(|e| e.to_string())?;
        if r.qpa_yield == 0.0 {
            zero_yield += 1;
            ensure(r.k_qpa == 0.0, format!("k_qpa {} at zero yield", r.k_qpa))?;
        }
    }
    ensure(zero_yield > 0, "grid has no zero-yield point")?;
    ensure(
        matches!(key_rate_qpa(0.0, None), Ok(k) if k == 0.0),
        "key_rate_qpa(0, None) != 0",
    )?;
    Ok(format!(
        "gain(0,0) = -1, {zero_yield} zero-yield points with k_qpa = 0"
    ))
}

fn montecarlo() -> Check {
    let start = Instant::now();
    let levels = [0.0, 0.1, 0.2, 0.3, 0.4];
    let cfg = McConfig::new(100_000, 2024);
    let mut worst_sigmas = 0.0_f64;
    for (i, &p) in levels.iter().enumerate() {
        for (j, &q) in levels.iter().enumerate() {
            let params = NoiseParams::new(p, q);
            let exact = evaluate_point(&params, QpaRoute::Matrix).map_err(|e| e.to_string())?;
            let mc = simulate_experiment_at(&params, &cfg, (i * levels.len() + j) as u64)
                .map_err(|e| e.to_string())?;
            let post = exact.post_pol.ok_or("missing post-QPA state")?;
            let iv = &mc.intervals;
            let pairs = [
                (Some(iv.e_z_pol), exact.pol.e_z),
                (Some(iv.e_x_pol), exact.pol.e_x),
                (Some(iv.e_z_et), exact.et.e_z),
                (Some(iv.e_x_et), exact.et.e_x),
                (iv.e_z_post, post.e_z),
                (iv.e_x_post, post.e_x),
                (Some(iv.qpa_yield), exact.qpa_yield),
            ];
            for (est, truth) in pairs {
                let est = est.ok_or("missing post-QPA estimate")?;
                let sigma = (truth * (1.0 - truth) / est.trials as f64).sqrt();
                let dev = (est.value - truth).abs();
                if dev > 0.0 {
                    let k = if sigma > 0.0 {
                        dev / sigma
                    } else {
                        f64::INFINITY
                    };
                    worst_sigmas = worst_sigmas.max(k);
                }
            }
        }
    }
    ensure(
        worst_sigmas <= 4.0,
        format!("deviation {worst_sigmas:.2} sigma"),
    )?;

    let rho = pol_mixture(0.1).map_err(|e| e.to_string())?;
    let covered = (0..1000u64)
        .filter(|&t| {
            let rec = sample_counts(&rho, Basis::Z, 10_000, &mut stream_rng(555, t));
            estimate_qber(&rec).is_ok_and(|e| e.contains(0.1))
        })
        .count();
    ensure(covered >= 930, format!("Wilson coverage {covered}/1000"))?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, format!("took {elapsed:.2} s"))?;
    Ok(format!(
        "max {worst_sigmas:.2} sigma over 25 points, coverage {covered}/1000, {elapsed:.2} s"
    ))
}

fn csv_bytes(cfg: &SweepConfig, threads: usize) -> Result<Vec<u8>, String> {
    let result = run_sweep_with_threads(cfg, Some(threads)).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_csv(&result, &mut buf).map_err(|e| e.to_string())?;
    Ok(buf)
}

fn determinism() -> Check {
    let analytic = SweepConfig::default();
    let mc = SweepConfig {
        p_range: AxisRange::new(0.0, 0.4, 0.05),
        q_range: AxisRange::new(0.0, 0.4, 0.05),
        mode: Mode::Montecarlo,
        mc: Some(McConfig::new(10_000, 11)),
        ..SweepConfig::default()
    };
    for (name, cfg) in [("analytic", &analytic), ("montecarlo", &mc)] {
        let reference = csv_bytes(cfg, 1)?;
        for threads in [1, 3, 8] {
            ensure(
                csv_bytes(cfg, threads)? == reference,
                format!("{name} CSV differs with {threads} threads"),
            )?;
        }
    }
    Ok("analytic and montecarlo CSV identical for 1, 3, 8 threads".into())
}

fn channel_equivalence() -> Check {
    let phi = bell_projector(BellLabel::PHI_PLUS);
    let mut worst = 0.0_f64;
    for i in 0..=100 {
        let p = i as f64 / 100.0;
        let wp =
            waveplate_noise_channel(&phi, waveplate_angle_for(p)).map_err(|e| e.to_string())?;
        let direct = pol_mixture(p).map_err(|e| e.to_string())?;
        worst = worst.max(wp.matrix().max_abs_diff(direct.matrix()));
    }
    ensure(worst <= EQ_TOL, format!("max deviation {worst:e}"))?;
    Ok(format!("101 values, max deviation {worst:e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("threshold reproduction", thresholds_cli),
        ("oracle equivalence", oracle_equivalence),
        ("closed-form checks", closed_forms),
        ("noise-map structure", map_structure),
        ("trivial anchors", anchors),
        ("monte carlo convergence", montecarlo),
        ("determinism", determinism),
        ("channel equivalence", channel_equivalence),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
