//! Simulator for single-copy quantum privacy amplification (QPA) on
//! polarisation / energy-time hyperentangled photon pairs.
//!
//! The pipeline is: build the noisy hyperentangled state ([`states`]), run the
//! bilateral CNOT and postselection ([`qpa`]), then turn QBERs and yield into
//! Devetak-Winter key rates and the QPA gain ([`metrics`]). [`montecarlo`]
//! adds finite count statistics and [`sweep`] maps everything over the
//! `(p, q)` noise plane, with [`output`] and [`render`] for CSV/JSON and PNG.

pub mod error;
pub mod linalg;
pub mod metrics;
pub mod montecarlo;
pub mod output;
pub mod qpa;
pub mod render;
pub mod states;
pub mod sweep;

pub use error::{QpaError, Result};
pub use linalg::{
    apply_unitary, bell_state, born_probability, partial_trace, ry, BellLabel, ComplexMatrix,
    DensityOperator, DofPair, StateVector,
};
pub use metrics::{
    binary_entropy, classify_region, devetak_winter, evaluate_point, gain, key_rate_noisy,
    key_rate_qpa, qber, threshold_et, threshold_pol, Basis, KeyRateReport, QberPair, QpaRoute,
    Region,
};
pub use montecarlo::{
    estimate_qber, sample_counts, simulate_experiment, CountRecord, Estimate, McConfig, McReport,
};
pub use output::{emit_csv, emit_json, CSV_HEADER};
pub use qpa::{bilateral_cnot, postselect, qpa_bell_algebra, BellWeights, QpaOutcome};
pub use render::render_maps;
pub use states::{
    assemble_noisy_hyper, et_mixture, hyper_phi_plus, pol_mixture, waveplate_noise_channel,
    HyperState, NoiseParams,
};
pub use sweep::{run_sweep, Mode, SweepConfig, SweepResult};
