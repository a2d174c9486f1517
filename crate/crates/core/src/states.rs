//! Hyperentangled resource state and the two noise channels.
//!
//! Polarisation noise mixes ψ⁻ into φ⁺ (wave-plate rotation averaged over ±θ).
//! Energy-time noise mixes ψ⁺ and ψ⁻ into φ⁺ in equal parts. Both act on a
//! single DOF pair, so the noisy state stays a product across DOF.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Result};
use crate::linalg::{
    bell_projector, conjugate, partial_trace, pauli_x, pauli_y, pauli_z, ry, BellLabel,
    ComplexMatrix, DensityOperator, DofPair,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseParams {
    /// ψ⁻ weight in polarisation.
    pub p: f64,
    /// Total ψ⁺ + ψ⁻ weight in energy-time, split equally.
    pub q: f64,
    /// Intrinsic polarisation error (calibration knob, not a measured value).
    #[serde(default)]
    pub v_pol: f64,
    /// Intrinsic energy-time error (calibration knob, not a measured value).
    #[serde(default)]
    pub v_et: f64,
}

impl NoiseParams {
    pub fn new(p: f64, q: f64) -> Self {
        Self {
            p,
            q,
            v_pol: 0.0,
            v_et: 0.0,
        }
    }

    pub fn with_intrinsic(mut self, v_pol: f64, v_et: f64) -> Self {
        self.v_pol = v_pol;
        self.v_et = v_et;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p", self.p)?;
        check_probability("q", self.q)?;
        check_probability("v_pol", self.v_pol)?;
        check_probability("v_et", self.v_et)
    }
}

/// Two-DOF state held in factorised form; the 16-dim joint operator is built on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperState {
    pol: DensityOperator,
    et: DensityOperator,
}

impl HyperState {
    pub fn from_factors(pol: DensityOperator, et: DensityOperator) -> Result<Self> {
        for rho in [&pol, &et] {
            if rho.dim() != 4 {
                return Err(crate::QpaError::DimensionMismatch {
                    expected: "4".into(),
                    actual: rho.dim().to_string(),
                });
            }
        }
        Ok(Self { pol, et })
    }

    pub fn pol(&self) -> &DensityOperator {
        &self.pol
    }

    pub fn et(&self) -> &DensityOperator {
        &self.et
    }

    /// `ρ_pol ⊗ ρ_et` in `(pol_A, pol_B, et_A, et_B)` order.
    pub fn joint(&self) -> DensityOperator {
        self.pol.tensor(&self.et).expect("4 x 4 = 16")
    }

    /// Marginals of the materialised joint state.
    pub fn marginals_of_joint(&self) -> (DensityOperator, DensityOperator) {
        let joint = self.joint();
        (
            partial_trace(&joint, DofPair::Pol).expect("dim 16"),
            partial_trace(&joint, DofPair::Et).expect("dim 16"),
        )
    }
}

/// |Φ⁺⟩ = ½(|HH⟩ + |VV⟩) ⊗ (|t_S t_S⟩ + |t_L t_L⟩).
pub fn hyper_phi_plus() -> HyperState {
    HyperState {
        pol: bell_projector(BellLabel::PHI_PLUS),
        et: bell_projector(BellLabel::PHI_PLUS),
    }
}

/// `½[(Ry(θ)⊗I) ρ (Ry(θ)⊗I)† + (Ry(−θ)⊗I) ρ (Ry(−θ)⊗I)†]`.
pub fn waveplate_noise_channel(rho: &DensityOperator, theta: f64) -> Result<DensityOperator> {
    if rho.dim() != 4 {
        return Err(crate::QpaError::DimensionMismatch {
            expected: "4".into(),
            actual: rho.dim().to_string(),
        });
    }
    let id = ComplexMatrix::identity(2);
    let plus = conjugate(rho, &ry(theta).kron(&id));
    let minus = conjugate(rho, &ry(-theta).kron(&id));
    DensityOperator::mixture(&[(0.5, &plus), (0.5, &minus)])
}

/// Rotation angle at which [`waveplate_noise_channel`] reproduces `pol_mixture(p)`.
pub fn waveplate_angle_for(p: f64) -> f64 {
    2.0 * p.sqrt().asin()
}

/// `(1−p)|φ⁺⟩⟨φ⁺| + p|ψ⁻⟩⟨ψ⁻|`.
pub fn pol_mixture(p: f64) -> Result<DensityOperator> {
    check_probability("p", p)?;
    DensityOperator::mixture(&[
        (1.0 - p, &bell_projector(BellLabel::PHI_PLUS)),
        (p, &bell_projector(BellLabel::PSI_MINUS)),
    ])
}

/// `(1−q)|φ⁺⟩⟨φ⁺| + (q/2)|ψ⁺⟩⟨ψ⁺| + (q/2)|ψ⁻⟩⟨ψ⁻|`.
pub fn et_mixture(q: f64) -> Result<DensityOperator> {
    check_probability("q", q)?;
    DensityOperator::mixture(&[
        (1.0 - q, &bell_projector(BellLabel::PHI_PLUS)),
        (q / 2.0, &bell_projector(BellLabel::PSI_PLUS)),
        (q / 2.0, &bell_projector(BellLabel::PSI_MINUS)),
    ])
}

/// Isotropic Bell-diagonal error of weight `v`: Bob's qubit gets X, Y or Z
/// with probability `v/3` each. Maps φ⁺ to `(1−v)φ⁺ + v/3 (ψ⁺ + φ⁻ + ψ⁻)`.
pub fn intrinsic_error(rho: &DensityOperator, v: f64) -> Result<DensityOperator> {
    check_probability("v", v)?;
    if v == 0.0 {
        return Ok(rho.clone());
    }
    let id = ComplexMatrix::identity(2);
    let x = conjugate(rho, &id.kron(&pauli_x()));
    let y = conjugate(rho, &id.kron(&pauli_y()));
    let z = conjugate(rho, &id.kron(&pauli_z()));
    DensityOperator::mixture(&[(1.0 - v, rho), (v / 3.0, &x), (v / 3.0, &y), (v / 3.0, &z)])
}

pub fn assemble_noisy_hyper(params: &NoiseParams) -> Result<HyperState> {
    params.validate()?;
    let pol = intrinsic_error(&pol_mixture(params.p)?, params.v_pol)?;
    let et = intrinsic_error(&et_mixture(params.q)?, params.v_et)?;
    HyperState::from_factors(pol, et)
}
