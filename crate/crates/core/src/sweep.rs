//! Grid sweeps over the noise plane `(p, q)` and region statistics.
//!
//! Points are evaluated in parallel and stored row-major: `p` is the outer
//! (slow) axis and `q` the inner one, so `index = i_p · n_q + i_q`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QpaError, Result};
use crate::metrics::{
    evaluate_point, threshold_et, threshold_pol, KeyRateReport, QpaRoute, Region, RATE_TOL,
};
use crate::montecarlo::{simulate_experiment_at, McConfig, McIntervals};
use crate::states::NoiseParams;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const MAX_GRID_POINTS: usize = 10_000_000;
/// Environment variable consulted for the worker count when none is given.
pub const THREADS_ENV: &str = "QPA_THREADS";

/// Grid values are snapped to this many decimals to keep `0.005·i` tidy.
const GRID_DECIMALS: i32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for AxisRange {
    fn default() -> Self {
        Self {
            min: 0.0,
            max: 0.4,
            step: 0.005,
        }
    }
}

impl AxisRange {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.min)
            && (0.0..=1.0).contains(&self.max)
            && self.min <= self.max
            && self.step > 0.0
            && self.step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(QpaError::Config(format!(
                "{name}: need 0 <= min <= max <= 1 and step > 0, got {self:?}"
            )))
        }
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        let scale = 10f64.powi(GRID_DECIMALS);
        (0..self.len())
            .map(|i| ((self.min + i as f64 * self.step) * scale).round() / scale)
            .map(|v| v.min(1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Analytic,
    Montecarlo,
}

impl std::str::FromStr for Mode {
    type Err = QpaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Mode::Analytic),
            "montecarlo" | "mc" => Ok(Mode::Montecarlo),
            other => Err(QpaError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsic {
    #[serde(default)]
    pub v_pol: f64,
    #[serde(default)]
    pub v_et: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub p_range: AxisRange,
    #[serde(default)]
    pub q_range: AxisRange,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsic: Option<Intrinsic>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_plots: bool,
}

fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("qpa-out")
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            p_range: AxisRange::default(),
            q_range: AxisRange::default(),
            mode: Mode::Analytic,
            mc: None,
            intrinsic: None,
            output_dir: default_output_dir(),
            emit_plots: false,
        }
    }
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| QpaError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| QpaError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| QpaError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(QpaError::Config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.p_range.validate("p_range")?;
        self.q_range.validate("q_range")?;
        let size = self.p_range.len().saturating_mul(self.q_range.len());
        if size > MAX_GRID_POINTS {
            return Err(QpaError::Config(format!(
                "grid has {size} points, limit is {MAX_GRID_POINTS}"
            )));
        }
        match (self.mode, &self.mc) {
            (Mode::Montecarlo, None) => {
                return Err(QpaError::Config(
                    "montecarlo mode needs an [mc] section".into(),
                ))
            }
            (_, Some(mc)) => mc.validate()?,
            _ => {}
        }
        if let Some(i) = self.intrinsic {
            NoiseParams::new(0.0, 0.0)
                .with_intrinsic(i.v_pol, i.v_et)
                .validate()
                .map_err(|e| QpaError::Config(format!("intrinsic: {e}")))?;
        }
        Ok(())
    }

    pub fn noise_at(&self, p: f64, q: f64) -> NoiseParams {
        let i = self.intrinsic.unwrap_or_default();
        NoiseParams::new(p, q).with_intrinsic(i.v_pol, i.v_et)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub p: f64,
    pub q: f64,
    pub report: KeyRateReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<McIntervals>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub artifact_version: String,
    pub timestamp: String,
    pub seed: Option<u64>,
    pub threshold_pol: f64,
    pub threshold_et: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub metadata: SweepMetadata,
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub points: Vec<GridPoint>,
}

impl SweepResult {
    pub fn point(&self, ip: usize, iq: usize) -> &GridPoint {
        &self.points[ip * self.q_values.len() + iq]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.p_values.len(), self.q_values.len())
    }
}

/// Flag value, else `QPA_THREADS`, else rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
    })
    .filter(|&n| n > 0)
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    run_sweep_with_threads(cfg, resolve_threads(None))
}

pub fn run_sweep_with_threads(cfg: &SweepConfig, threads: Option<usize>) -> Result<SweepResult> {
    cfg.validate()?;
    let p_values = cfg.p_range.values();
    let q_values = cfg.q_range.values();
    let nq = q_values.len();
    let total = p_values.len() * nq;

    let eval = |index: usize| -> Result<GridPoint> {
        let (p, q) = (p_values[index / nq], q_values[index % nq]);
        let params = cfg.noise_at(p, q);
        let (report, intervals) = match (cfg.mode, cfg.mc.as_ref()) {
            (Mode::Montecarlo, Some(mc)) => {
                let r = simulate_experiment_at(&params, mc, index as u64)?;
                (r.report, Some(r.intervals))
            }
            _ => (evaluate_point(&params, QpaRoute::BellAlgebra)?, None),
        };
        Ok(GridPoint {
            p,
            q,
            report,
            intervals,
        })
    };

    let collect = || {
        (0..total)
            .into_par_iter()
            .map(eval)
            .collect::<Result<Vec<_>>>()
    };
    let points = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| QpaError::Config(format!("thread pool: {e}")))?
            .install(collect)?,
        None => collect()?,
    };

    Ok(SweepResult {
        config: cfg.clone(),
        metadata: SweepMetadata {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: match cfg.mode {
                Mode::Montecarlo => cfg.mc.map(|m| m.seed),
                Mode::Analytic => None,
            },
            threshold_pol: threshold_pol(),
            threshold_et: threshold_et(),
        },
        p_values,
        q_values,
        points,
    })
}

/// Continuous fields of a sweep, bilinearly interpolated between grid points.
///
/// The unclamped rate margins are interpolated and clamped afterwards, so the
/// kinks at the thresholds land where the margins cross zero rather than
/// being smeared over a grid cell.
pub struct InterpolatedMaps<'a> {
    result: &'a SweepResult,
    margins: Vec<[f64; 3]>,
}

/// Clamped rates and labels at one location of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSample {
    pub k_pol: f64,
    pub k_et: f64,
    pub k_noisy: f64,
    pub k_qpa: f64,
    pub gain: f64,
    pub region: Region,
}

impl MapSample {
    fn from_margins([kp, ke, kq]: [f64; 3]) -> Self {
        let (k_pol, k_et, k_qpa) = (kp.max(0.0), ke.max(0.0), kq.max(0.0));
        let k_noisy = k_pol + k_et / 2.0;
        let gain = k_qpa - k_noisy;
        Self {
            k_pol,
            k_et,
            k_noisy,
            k_qpa,
            gain,
            region: Region::classify(k_pol, k_et, gain),
        }
    }
}

impl<'a> InterpolatedMaps<'a> {
    pub fn new(result: &'a SweepResult) -> Self {
        let margins = result
            .points
            .iter()
            .map(|pt| pt.report.raw_margins())
            .collect();
        Self { result, margins }
    }

    /// Sample at fractional grid coordinates `(u, v)`, `u ∈ [0, n_p − 1]`, `v ∈ [0, n_q − 1]`.
    pub fn sample_grid(&self, u: f64, v: f64) -> MapSample {
        let (np, nq) = self.result.shape();
        let u = u.clamp(0.0, (np - 1) as f64);
        let v = v.clamp(0.0, (nq - 1) as f64);
        let i0 = (u.floor() as usize).min(np.saturating_sub(2));
        let j0 = (v.floor() as usize).min(nq.saturating_sub(2));
        let i1 = (i0 + 1).min(np - 1);
        let j1 = (j0 + 1).min(nq - 1);
        let (tu, tv) = (u - i0 as f64, v - j0 as f64);
        let at = |i: usize, j: usize| self.margins[i * nq + j];
        let mut m = [0.0; 3];
        for (k, slot) in m.iter_mut().enumerate() {
            *slot = (1.0 - tu) * (1.0 - tv) * at(i0, j0)[k]
                + (1.0 - tu) * tv * at(i0, j1)[k]
                + tu * (1.0 - tv) * at(i1, j0)[k]
                + tu * tv * at(i1, j1)[k];
        }
        MapSample::from_margins(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionSummary {
    pub region: Region,
    /// Grid points carrying this label.
    pub points: usize,
    /// Area in the `(p, q)` plane from sub-cell sampling of the interpolated maps.
    pub area: f64,
    /// Extent of the labelled grid points.
    pub bbox: Option<BoundingBox>,
}

/// Sub-samples per grid cell along each axis for area integration.
pub const AREA_SUBSAMPLES: usize = 8;

/// Areas and bounding boxes of regions I–IV and of the non-positive remainder.
pub fn region_summaries(result: &SweepResult) -> Vec<RegionSummary> {
    let (np, nq) = result.shape();
    let order = [Region::I, Region::II, Region::III, Region::IV, Region::None];
    let mut areas = [0.0; 5];
    let slot = |r: Region| {
        order
            .iter()
            .position(|&o| o == r)
            .expect("all labels listed")
    };

    if np > 1 && nq > 1 {
        let maps = InterpolatedMaps::new(result);
        let s = AREA_SUBSAMPLES;
        for i in 0..np - 1 {
            let dp = result.p_values[i + 1] - result.p_values[i];
            for j in 0..nq - 1 {
                let dq = result.q_values[j + 1] - result.q_values[j];
                let cell = dp * dq / (s * s) as f64;
                for a in 0..s {
                    for b in 0..s {
                        let u = i as f64 + (a as f64 + 0.5) / s as f64;
                        let v = j as f64 + (b as f64 + 0.5) / s as f64;
                        areas[slot(maps.sample_grid(u, v).region)] += cell;
                    }
                }
            }
        }
    }

    order
        .iter()
        .map(|&region| {
            let mut count = 0;
            let mut bbox: Option<BoundingBox> = None;
            for pt in result.points.iter().filter(|pt| pt.report.region == region) {
                count += 1;
                let b = bbox.get_or_insert(BoundingBox {
                    p_min: pt.p,
                    p_max: pt.p,
                    q_min: pt.q,
                    q_max: pt.q,
                });
                b.p_min = b.p_min.min(pt.p);
                b.p_max = b.p_max.max(pt.p);
                b.q_min = b.q_min.min(pt.q);
                b.q_max = b.q_max.max(pt.q);
            }
            RegionSummary {
                region,
                points: count,
                area: areas[slot(region)],
                bbox,
            }
        })
        .collect()
}

/// 4-connected components of grid points with positive gain, as index lists.
pub fn positive_gain_components(result: &SweepResult) -> Vec<Vec<usize>> {
    let (np, nq) = result.shape();
    let positive: Vec<bool> = result
        .points
        .iter()
        .map(|pt| pt.report.gain > RATE_TOL)
        .collect();
    let mut seen = vec![false; positive.len()];
    let mut components = Vec::new();
    for start in 0..positive.len() {
        if !positive[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut component = Vec::new();
        seen[start] = true;
        while let Some(idx) = stack.pop() {
            component.push(idx);
            let (i, j) = (idx / nq, idx % nq);
            let mut neighbours = Vec::with_capacity(4);
            if i > 0 {
                neighbours.push(idx - nq);
            }
            if i + 1 < np {
                neighbours.push(idx + nq);
            }
            if j > 0 {
                neighbours.push(idx - 1);
            }
            if j + 1 < nq {
                neighbours.push(idx + 1);
            }
            for n in neighbours {
                if positive[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        component.sort_unstable();
        components.push(component);
    }
    components
}
