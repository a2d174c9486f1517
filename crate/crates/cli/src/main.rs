use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qpa_core::metrics::evaluate_point_with_outcome;
use qpa_core::montecarlo::{McIntervals, McReport};
use qpa_core::output::format_sig12;
use qpa_core::sweep::{positive_gain_components, region_summaries, resolve_threads};
use qpa_core::*;

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Pairs simulated per measurement setting when `--seed` enables Monte Carlo
/// without a config section.
const DEFAULT_N_PAIRS: u64 = 100_000;

const CSV_NAME: &str = "results.csv";
const JSON_NAME: &str = "results.json";

#[derive(Parser)]
#[command(
    name = "qpa",
    version,
    about = "Key-rate maps for single-copy QPA on hyperentangled pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a grid sweep and write CSV, JSON and optional PNG maps.
    Sweep(SweepArgs),
    /// Print the full report for one noise point.
    Point(PointArgs),
    /// Print the QBER thresholds beyond which no key is possible.
    Thresholds,
    /// Print region areas and bounding boxes of a sweep.
    Regions(GridArgs),
}

#[derive(Args)]
struct GridArgs {
    /// TOML sweep configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// analytic | montecarlo
    #[arg(long)]
    mode: Option<Mode>,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to QPA_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render PNG heatmaps.
    #[arg(long)]
    plots: bool,
}

#[derive(Args)]
struct PointArgs {
    /// Polarisation noise probability.
    #[arg(long)]
    p: f64,
    /// Energy-time noise probability.
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    v_pol: f64,
    #[arg(long, default_value_t = 0.0)]
    v_et: f64,
    #[arg(long, default_value = "analytic")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_N_PAIRS)]
    n_pairs: u64,
    /// Drop half of the energy-time detections in Monte Carlo mode.
    #[arg(long)]
    franson_loss: bool,
    /// Evaluate through the 16-dimensional matrix pipeline.
    #[arg(long)]
    matrix: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = match cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Point(args) => point(args),
        Command::Thresholds => {
            out!("pol_threshold {}", format_sig12(threshold_pol()));
            out!("et_threshold  {}", format_sig12(threshold_et()));
            Ok(())
        }
        Command::Regions(args) => regions(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}

fn load_config(args: &GridArgs) -> Result<SweepConfig> {
    let mut cfg = match &args.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::default(),
    };
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if let Some(seed) = args.seed {
        cfg.mc
            .get_or_insert(McConfig::new(DEFAULT_N_PAIRS, seed))
            .seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = load_config(&args.grid)?;
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    cfg.emit_plots |= args.plots;
    let result = sweep::run_sweep_with_threads(&cfg, resolve_threads(args.grid.threads))?;

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let mut written = vec![dir.join(CSV_NAME), dir.join(JSON_NAME)];
    emit_csv(&result, &written[0])?;
    emit_json(&result, &written[1])?;
    if cfg.emit_plots {
        written.extend(render_maps(&result, dir)?);
    }
    let (np, nq) = result.shape();
    out!("{np}x{nq} grid, mode {:?}", cfg.mode);
    for path in &written {
        out!("wrote {}", path.display());
    }
    Ok(())
}

fn point(args: PointArgs) -> Result<()> {
    let params = NoiseParams::new(args.p, args.q).with_intrinsic(args.v_pol, args.v_et);
    params.validate()?;
    let route = if args.matrix {
        QpaRoute::Matrix
    } else {
        QpaRoute::BellAlgebra
    };
    match args.mode {
        Mode::Analytic => {
            let (report, _) = evaluate_point_with_outcome(&params, route)?;
            print_report(&params, &report);
        }
        Mode::Montecarlo => {
            let cfg = McConfig {
                apply_franson_loss: args.franson_loss,
                ..McConfig::new(args.n_pairs, args.seed)
            };
            let mc = simulate_experiment(&params, &cfg)?;
            print_report(&params, &mc.report);
            print_intervals(&mc);
        }
    }
    Ok(())
}

/// Shortest 12-digit form, keeping a decimal point on integral values.
fn show(x: f64) -> String {
    let s = format_sig12(x);
    if s.contains(['.', 'e', 'N', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn print_report(params: &NoiseParams, r: &KeyRateReport) {
    let opt = |x: Option<f64>| x.map(show).unwrap_or_else(|| "-".into());
    let rows = [
        ("p", show(params.p)),
        ("q", show(params.q)),
        ("v_pol", show(params.v_pol)),
        ("v_et", show(params.v_et)),
        ("e_z_pol", show(r.pol.e_z)),
        ("e_x_pol", show(r.pol.e_x)),
        ("e_z_et", show(r.et.e_z)),
        ("e_x_et", show(r.et.e_x)),
        ("k_pol", show(r.k_pol)),
        ("k_et", show(r.k_et)),
        ("k_noisy", show(r.k_noisy)),
        ("yield", show(r.qpa_yield)),
        ("e_z_post", opt(r.post_pol.map(|e| e.e_z))),
        ("e_x_post", opt(r.post_pol.map(|e| e.e_x))),
        ("k_qpa", show(r.k_qpa)),
        ("gain", show(r.gain)),
        ("region", r.region.to_string()),
    ];
    for (name, value) in rows {
        out!("{name:<9}{value}");
    }
}

fn print_intervals(mc: &McReport) {
    let McIntervals {
        e_z_pol,
        e_x_pol,
        e_z_et,
        e_x_et,
        e_z_post,
        e_x_post,
        qpa_yield,
    } = mc.intervals;
    out!("95% Wilson intervals:");
    let named = [
        ("e_z_pol", Some(e_z_pol)),
        ("e_x_pol", Some(e_x_pol)),
        ("e_z_et", Some(e_z_et)),
        ("e_x_et", Some(e_x_et)),
        ("e_z_post", e_z_post),
        ("e_x_post", e_x_post),
        ("yield", Some(qpa_yield)),
    ];
    for (name, est) in named {
        match est {
            Some(e) => out!(
                "  {name:<9}[{}, {}]  {}/{}",
                show(e.lower),
                show(e.upper),
                e.successes,
                e.trials
            ),
            None => out!("  {name:<9}-"),
        }
    }
}

fn regions(args: GridArgs) -> Result<()> {
    let cfg = load_config(&args)?;
    let result = sweep::run_sweep_with_threads(&cfg, resolve_threads(args.threads))?;
    out!(
        "{:<7}{:>8}  {:<14}bounding box (p; q)",
        "region",
        "points",
        "area"
    );
    for s in region_summaries(&result) {
        let bbox = s.bbox.map_or_else(
            || "-".to_string(),
            |b| {
                format!(
                    "[{}, {}]; [{}, {}]",
                    show(b.p_min),
                    show(b.p_max),
                    show(b.q_min),
                    show(b.q_max)
                )
            },
        );
        out!(
            "{:<7}{:>8}  {:<14}{bbox}",
            s.region.as_str(),
            s.points,
            format!("{:.6}", s.area)
        );
    }
    let max_gain = result
        .points
        .iter()
        .map(|pt| pt.report.gain)
        .fold(f64::NEG_INFINITY, f64::max);
    out!("max gain {}", show(max_gain));
    out!(
        "positive-gain components {}",
        positive_gain_components(&result).len()
    );
    Ok(())
}
