//! Finite-statistics simulation of the measurement campaign.
//!
//! Randomness: every sampling task draws from its own ChaCha8 stream, seeded
//! with the master seed and selected by `stream = base · STREAMS_PER_POINT + task`,
//! where `task` enumerates the six (DOF, basis) measurements of one noise
//! point. Sweeps use the row-major grid index as `base`, so results do not
//! depend on scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QpaError, Result};
use crate::linalg::DensityOperator;
use crate::metrics::{outcome_probabilities, Basis, KeyRateReport, QberPair};
use crate::qpa::{qpa_bell_algebra, BellWeights};
use crate::states::{assemble_noisy_hyper, NoiseParams};

/// Two-sided 95 % standard-normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Independent sampling tasks per noise point.
pub const STREAMS_PER_POINT: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Pairs entering each (DOF, basis) measurement.
    pub n_pairs: u64,
    pub seed: u64,
    #[serde(default)]
    pub apply_franson_loss: bool,
}

impl McConfig {
    pub fn new(n_pairs: u64, seed: u64) -> Self {
        Self {
            n_pairs,
            seed,
            apply_franson_loss: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(QpaError::Config("mc.n_pairs must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Coincidence counts of one basis setting, outcomes ordered `[00, 01, 10, 11]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub basis: Basis,
    pub counts: [u64; 4],
    pub n_total: u64,
}

impl CountRecord {
    pub fn new(basis: Basis, counts: [u64; 4]) -> Self {
        Self {
            basis,
            counts,
            n_total: counts.iter().sum(),
        }
    }

    pub fn errors(&self) -> u64 {
        self.counts[1] + self.counts[2]
    }
}

/// Draws `n` outcomes from `probs` as a chain of conditional binomials.
fn multinomial<R: Rng + ?Sized>(probs: [f64; 4], n: u64, rng: &mut R) -> [u64; 4] {
    let mut counts = [0u64; 4];
    let mut remaining = n;
    for i in 0..4 {
        if remaining == 0 {
            break;
        }
        let tail: f64 = probs[i + 1..].iter().sum();
        // Outcomes with zero probability never receive counts.
        let cond = if tail <= 0.0 {
            1.0
        } else {
            (probs[i] / (probs[i] + tail)).clamp(0.0, 1.0)
        };
        let k = binomial(remaining, cond, rng);
        counts[i] = k;
        remaining -= k;
    }
    counts
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
    }
}

pub fn sample_counts<R: Rng + ?Sized>(
    rho: &DensityOperator,
    basis: Basis,
    n: u64,
    rng: &mut R,
) -> CountRecord {
    CountRecord::new(
        basis,
        multinomial(outcome_probabilities(rho, basis), n, rng),
    )
}

/// Binomial proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub successes: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn wilson(successes: u64, trials: u64, z: f64) -> Result<Self> {
        if trials == 0 {
            return Err(QpaError::EmptyCounts);
        }
        let n = trials as f64;
        let phat = successes as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (phat + z2 / (2.0 * n)) / denom;
        let half = z / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
        let lower = if successes == 0 {
            0.0
        } else {
            (centre - half).max(0.0)
        };
        let upper = if successes == trials {
            1.0
        } else {
            (centre + half).min(1.0)
        };
        Ok(Self {
            value: phat,
            lower,
            upper,
            successes,
            trials,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// `e = N_err / N` with a 95 % Wilson interval.
pub fn estimate_qber(rec: &CountRecord) -> Result<Estimate> {
    Estimate::wilson(rec.errors(), rec.n_total, Z_95)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McIntervals {
    pub e_z_pol: Estimate,
    pub e_x_pol: Estimate,
    pub e_z_et: Estimate,
    pub e_x_et: Estimate,
    pub e_z_post: Option<Estimate>,
    pub e_x_post: Option<Estimate>,
    #[serde(rename = "yield")]
    pub qpa_yield: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub report: KeyRateReport,
    pub intervals: McIntervals,
    /// Pairs reaching the QPA stage (after the optional Franson loss).
    pub qpa_total: u64,
    /// Pairs passing postselection.
    pub qpa_passed: u64,
}

#[derive(Clone, Copy)]
enum Task {
    PolZ = 0,
    PolX = 1,
    EtZ = 2,
    EtX = 3,
    PostZ = 4,
    PostX = 5,
}

pub fn simulate_experiment(params: &NoiseParams, cfg: &McConfig) -> Result<McReport> {
    simulate_experiment_at(params, cfg, 0)
}

/// Same as [`simulate_experiment`] on the stream block of sweep point `point_index`.
pub fn simulate_experiment_at(
    params: &NoiseParams,
    cfg: &McConfig,
    point_index: u64,
) -> Result<McReport> {
    cfg.validate()?;
    let state = assemble_noisy_hyper(params)?;
    let outcome = qpa_bell_algebra(
        &BellWeights::from_density(state.pol())?,
        &BellWeights::from_density(state.et())?,
    );
    let rng_for = |task: Task| stream_rng(cfg.seed, point_index * STREAMS_PER_POINT + task as u64);
    let survivors = |rng: &mut ChaCha8Rng| {
        if cfg.apply_franson_loss {
            binomial(cfg.n_pairs, 0.5, rng)
        } else {
            cfg.n_pairs
        }
    };

    let measure = |rho: &DensityOperator, basis: Basis, task: Task, lossy: bool| {
        let mut rng = rng_for(task);
        let n = if lossy {
            survivors(&mut rng)
        } else {
            cfg.n_pairs
        };
        estimate_qber(&sample_counts(rho, basis, n, &mut rng))
    };
    let e_z_pol = measure(state.pol(), Basis::Z, Task::PolZ, false)?;
    let e_x_pol = measure(state.pol(), Basis::X, Task::PolX, false)?;
    let e_z_et = measure(state.et(), Basis::Z, Task::EtZ, true)?;
    let e_x_et = measure(state.et(), Basis::X, Task::EtX, true)?;

    let mut qpa_total = 0;
    let mut qpa_passed = 0;
    let mut post = [None, None];
    for (slot, (basis, task)) in [(Basis::Z, Task::PostZ), (Basis::X, Task::PostX)]
        .into_iter()
        .enumerate()
    {
        let mut rng = rng_for(task);
        let total = survivors(&mut rng);
        let passed = binomial(total, outcome.qpa_yield, &mut rng);
        qpa_total += total;
        qpa_passed += passed;
        if let (Some(rho), true) = (outcome.output_pol.as_ref(), passed > 0) {
            post[slot] = Some(estimate_qber(&sample_counts(rho, basis, passed, &mut rng))?);
        }
    }
    let qpa_yield = Estimate::wilson(qpa_passed, qpa_total, Z_95)?;
    let [e_z_post, e_x_post] = post;
    let post_pair = match (e_z_post, e_x_post) {
        (Some(z), Some(x)) => Some(QberPair::new(z.value, x.value)?),
        _ => None,
    };

    let report = KeyRateReport::from_qbers(
        QberPair::new(e_z_pol.value, e_x_pol.value)?,
        QberPair::new(e_z_et.value, e_x_et.value)?,
        qpa_yield.value,
        post_pair,
    )?;
    Ok(McReport {
        report,
        intervals: McIntervals {
            e_z_pol,
            e_x_pol,
            e_z_et,
            e_x_et,
            e_z_post,
            e_x_post,
            qpa_yield,
        },
        qpa_total,
        qpa_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{bell_projector, BellLabel};

    #[test]
    fn phi_plus_never_errs_in_z() {
        let mut rng = stream_rng(7, 0);
        let rec = sample_counts(
            &bell_projector(BellLabel::PHI_PLUS),
            Basis::Z,
            10_000,
            &mut rng,
        );
        assert_eq!(rec.counts[1], 0);
        assert_eq!(rec.counts[2], 0);
        assert_eq!(rec.n_total, 10_000);
    }

    #[test]
    fn maximally_mixed_counts_within_five_sigma() {
        let n = 1_000_000u64;
        let rho = DensityOperator::maximally_mixed(4).unwrap();
        let rec = sample_counts(&rho, Basis::Z, n, &mut stream_rng(11, 3));
        let sigma = (n as f64 * 3.0 / 16.0).sqrt();
        for c in rec.counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 5.0 * sigma, "{c}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let rho = crate::states::et_mixture(0.3).unwrap();
        let a = sample_counts(&rho, Basis::X, 5000, &mut stream_rng(42, 9));
        let b = sample_counts(&rho, Basis::X, 5000, &mut stream_rng(42, 9));
        assert_eq!(a, b);
        let c = sample_counts(&rho, Basis::X, 5000, &mut stream_rng(42, 10));
        assert_ne!(a, c);
    }

    #[test]
    fn zero_probability_outcomes_stay_empty() {
        let mut rng = stream_rng(3, 1);
        for _ in 0..200 {
            let c = multinomial([0.3, 0.2, 0.5, 0.0], 1000, &mut rng);
            assert_eq!(c[3], 0);
            assert_eq!(c.iter().sum::<u64>(), 1000);
            let c = multinomial([0.0, 0.7, 0.0, 0.3], 1000, &mut rng);
            assert_eq!((c[0], c[2]), (0, 0));
        }
    }

    #[test]
    fn qber_estimates() {
        let e = estimate_qber(&CountRecord::new(Basis::Z, [50, 0, 0, 50])).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.lower, 0.0);
        assert!(e.upper > 0.0 && e.upper < 0.05);
        let e = estimate_qber(&CountRecord::new(Basis::Z, [45, 5, 5, 45])).unwrap();
        assert!((e.value - 0.10).abs() < 1e-15);
        assert!(e.contains(0.10));
        assert!(matches!(
            estimate_qber(&CountRecord::new(Basis::Z, [0; 4])),
            Err(QpaError::EmptyCounts)
        ));
    }

    #[test]
    fn wilson_matches_reference_values() {
        // Closed-form Wilson bounds for 10/100 at z = 1.96 (Newcombe 1998, method 3).
        let e = Estimate::wilson(10, 100, 1.96).unwrap();
        assert!((e.lower - 0.0552).abs() < 5e-5, "{}", e.lower);
        assert!((e.upper - 0.1744).abs() < 5e-5, "{}", e.upper);
    }

    #[test]
    fn noiseless_experiment_is_exact() {
        let r =
            simulate_experiment(&NoiseParams::new(0.0, 0.0), &McConfig::new(10_000, 1)).unwrap();
        assert_eq!(r.report.k_noisy, 1.5);
        assert_eq!(r.report.qpa_yield, 1.0);
        assert_eq!(r.report.k_qpa, 0.5);
    }

    #[test]
    fn zero_pairs_rejected() {
        assert!(simulate_experiment(&NoiseParams::new(0.1, 0.1), &McConfig::new(0, 1)).is_err());
    }

    #[test]
    fn zero_yield_point_reports_no_post_state() {
        let r = simulate_experiment(&NoiseParams::new(1.0, 0.0), &McConfig::new(1000, 5)).unwrap();
        assert_eq!(r.qpa_passed, 0);
        assert!(r.report.post_pol.is_none());
        assert_eq!(r.report.k_qpa, 0.0);
    }
}
