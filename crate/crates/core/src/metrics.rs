//! QBERs, Devetak-Winter key rates before and after QPA, gain, thresholds
//! and the region labels of the gain map.
//!
//! Rates are secret bits per detected pair. The factor ½ on every
//! energy-time-dependent rate accounts for the Franson interferometer's 50 %
//! postselection loss; basis-sifting factors are left out of both rates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, QpaError, Result};
use crate::linalg::{clamp_probability, hadamard, ComplexMatrix, DensityOperator};
use crate::qpa::{qpa_bell_algebra, qpa_matrix_pipeline, BellWeights, QpaOutcome};
use crate::states::{assemble_noisy_hyper, NoiseParams};

/// Rates at or below this are treated as zero.
pub const RATE_TOL: f64 = 1e-12;

const BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// `{|H⟩, |V⟩}` / `{|t_S⟩, |t_L⟩}`.
    Z,
    /// `{(|0⟩ ± |1⟩)/√2}`.
    X,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Z, Basis::X];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberPair {
    pub e_z: f64,
    pub e_x: f64,
}

impl QberPair {
    pub fn new(e_z: f64, e_x: f64) -> Result<Self> {
        check_probability("e_z", e_z)?;
        check_probability("e_x", e_x)?;
        Ok(Self { e_z, e_x })
    }

    pub fn of_state(rho: &DensityOperator) -> Self {
        Self {
            e_z: qber(rho, Basis::Z),
            e_x: qber(rho, Basis::X),
        }
    }
}

/// Joint outcome probabilities `[00, 01, 10, 11]` for a local measurement of
/// both qubits in `basis`.
pub fn outcome_probabilities(rho: &DensityOperator, basis: Basis) -> [f64; 4] {
    assert_eq!(rho.dim(), 4, "outcome probabilities need a two-qubit state");
    let rotated = match basis {
        Basis::Z => rho.clone(),
        Basis::X => {
            let h = hadamard().kron(&hadamard());
            crate::linalg::conjugate(rho, &h)
        }
    };
    let m = rotated.matrix();
    [0, 1, 2, 3].map(|i| clamp_probability(m[(i, i)].re))
}

/// Fraction of anticorrelated outcomes (`01`, `10`) in `basis`.
pub fn qber(rho: &DensityOperator, basis: Basis) -> f64 {
    let probs = outcome_probabilities(rho, basis);
    clamp_probability(probs[1] + probs[2]).min(1.0)
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("x", x)?;
    Ok(h2(x))
}

fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// `max(0, 1 − h₂(e_z) − h₂(e_x))`.
pub fn devetak_winter(e: QberPair) -> f64 {
    devetak_winter_margin(e).max(0.0)
}

/// `1 − h₂(e_z) − h₂(e_x)` without the clamp; smooth across the threshold.
pub fn devetak_winter_margin(e: QberPair) -> f64 {
    1.0 - h2(e.e_z) - h2(e.e_x)
}

/// `k(pol) + k(et)/2`, each summand clamped separately.
pub fn key_rate_noisy(pol: QberPair, et: QberPair) -> f64 {
    devetak_winter(pol) + devetak_winter(et) / 2.0
}

/// `y · k(post)/2`; zero when the post-QPA state is undefined.
pub fn key_rate_qpa(qpa_yield: f64, post: Option<QberPair>) -> Result<f64> {
    check_probability("yield", qpa_yield)?;
    Ok(match post {
        Some(e) if qpa_yield > 0.0 => qpa_yield * devetak_winter(e) / 2.0,
        _ => 0.0,
    })
}

pub fn gain(k_qpa: f64, k_noisy: f64) -> f64 {
    k_qpa - k_noisy
}

/// Root of `f` on `[lo, hi]` where `f(lo) > 0 ≥ f(hi)`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    debug_assert!(f(lo) > 0.0 && f(hi) <= 0.0);
    while hi - lo > BISECTION_TOL / 4.0 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// QBER at which `1 − 2h₂(e)` vanishes (equal errors in both bases).
pub fn threshold_pol() -> f64 {
    bisect(|e| 1.0 - 2.0 * h2(e), 1e-6, 0.5)
}

/// z-QBER at which `1 − h₂(q) − h₂(q/2)` vanishes (equal ψ⁺/ψ⁻ admixture).
pub fn threshold_et() -> f64 {
    bisect(|q| 1.0 - h2(q) - h2(q / 2.0), 1e-6, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// No pre-QPA key in either DOF, positive gain.
    #[serde(rename = "I")]
    I,
    /// Pre-QPA key from polarisation only.
    #[serde(rename = "II")]
    II,
    /// Pre-QPA key from energy-time only.
    #[serde(rename = "III")]
    III,
    /// Pre-QPA key from both DOF.
    #[serde(rename = "IV")]
    IV,
    /// Gain not positive.
    #[serde(rename = "NONE")]
    None,
}

impl Region {
    pub const LABELLED: [Region; 4] = [Region::I, Region::II, Region::III, Region::IV];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
            Region::None => "NONE",
        }
    }

    pub fn classify(k_pol: f64, k_et: f64, gain: f64) -> Self {
        if gain <= RATE_TOL {
            return Region::None;
        }
        match (k_pol > RATE_TOL, k_et > RATE_TOL) {
            (false, false) => Region::I,
            (true, false) => Region::II,
            (false, true) => Region::III,
            (true, true) => Region::IV,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = QpaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(Region::I),
            "II" => Ok(Region::II),
            "III" => Ok(Region::III),
            "IV" => Ok(Region::IV),
            "NONE" => Ok(Region::None),
            other => Err(QpaError::Config(format!("unknown region label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub pol: QberPair,
    pub et: QberPair,
    /// Post-QPA polarisation QBERs; absent when the yield is zero.
    pub post_pol: Option<QberPair>,
    #[serde(rename = "yield")]
    pub qpa_yield: f64,
    pub k_pol: f64,
    pub k_et: f64,
    pub k_noisy: f64,
    pub k_qpa: f64,
    pub gain: f64,
    pub region: Region,
}

impl KeyRateReport {
    /// Assembles a report from measured (or computed) QBERs and yield.
    pub fn from_qbers(
        pol: QberPair,
        et: QberPair,
        qpa_yield: f64,
        post_pol: Option<QberPair>,
    ) -> Result<Self> {
        let k_pol = devetak_winter(pol);
        let k_et = devetak_winter(et);
        let k_noisy = key_rate_noisy(pol, et);
        let k_qpa = key_rate_qpa(qpa_yield, post_pol)?;
        let gain = gain(k_qpa, k_noisy);
        Ok(Self {
            pol,
            et,
            post_pol,
            qpa_yield,
            k_pol,
            k_et,
            k_noisy,
            k_qpa,
            gain,
            region: Region::classify(k_pol, k_et, gain),
        })
    }
}

impl KeyRateReport {
    /// Unclamped `(k_pol, k_et, k_qpa)` margins; their zero crossings are the
    /// threshold lines, so they interpolate well between grid points.
    pub fn raw_margins(&self) -> [f64; 3] {
        let k_qpa = match self.post_pol {
            Some(e) => self.qpa_yield * devetak_winter_margin(e) / 2.0,
            None => 0.0,
        };
        [
            devetak_winter_margin(self.pol),
            devetak_winter_margin(self.et),
            k_qpa,
        ]
    }
}

pub fn classify_region(report: &KeyRateReport) -> Region {
    Region::classify(report.k_pol, report.k_et, report.gain)
}

/// Which QPA implementation a point evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpaRoute {
    #[default]
    BellAlgebra,
    Matrix,
}

/// Noise parameters → noisy hyperentangled state → QPA → key-rate report.
pub fn evaluate_point(params: &NoiseParams, route: QpaRoute) -> Result<KeyRateReport> {
    let (report, _) = evaluate_point_with_outcome(params, route)?;
    Ok(report)
}

pub fn evaluate_point_with_outcome(
    params: &NoiseParams,
    route: QpaRoute,
) -> Result<(KeyRateReport, QpaOutcome)> {
    let state = assemble_noisy_hyper(params)?;
    let outcome = match route {
        QpaRoute::BellAlgebra => qpa_bell_algebra(
            &BellWeights::from_density(state.pol())?,
            &BellWeights::from_density(state.et())?,
        ),
        QpaRoute::Matrix => qpa_matrix_pipeline(&state),
    };
    let post = outcome.output_pol.as_ref().map(QberPair::of_state);
    let report = KeyRateReport::from_qbers(
        QberPair::of_state(state.pol()),
        QberPair::of_state(state.et()),
        outcome.qpa_yield.min(1.0),
        post,
    )?;
    Ok((report, outcome))
}

/// The `|ab⟩⟨ab|` projector in `basis`, for callers that want explicit Born sums.
pub fn outcome_projector(basis: Basis, a: usize, b: usize) -> ComplexMatrix {
    let idx = 2 * a + b;
    let mut p = ComplexMatrix::zeros(4, 4);
    p[(idx, idx)] = num_complex::Complex64::new(1.0, 0.0);
    match basis {
        Basis::Z => p,
        Basis::X => {
            let h = hadamard().kron(&hadamard());
            &(&h * &p) * &h.adjoint()
        }
    }
}
