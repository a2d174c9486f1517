//! Single-copy QPA: bilateral CNOT (control polarisation, target energy-time
//! path of the same photon), then keep only events where both parties'
//! target qubits agree, i.e. detector pairs (A0, B0) or (A1, B1).
//!
//! Two routes are provided. [`bilateral_cnot`] + [`postselect`] work on the
//! full 16-dimensional operator and accept arbitrary (also correlated) input.
//! [`qpa_bell_algebra`] is the closed-form fast path for factorised
//! Bell-diagonal input: a pair `(b₁,f₁) ⊗ (b₂,f₂)` becomes
//! `(b₁, f₁⊕f₂) ⊗ (b₂⊕b₁, f₂)` and survives iff `b₂⊕b₁ = 0`.

use crate::error::{QpaError, Result};
use crate::linalg::{
    bell_projector, bell_state, partial_trace, BellLabel, ComplexMatrix, DensityOperator, DofPair,
    EQ_TOL,
};
use crate::states::HyperState;

/// Below this yield the conditional output state is undefined.
pub const MIN_YIELD: f64 = 1e-12;

/// Probability vector over Bell labels, indexed by [`BellLabel::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellWeights([f64; 4]);

impl BellWeights {
    pub fn new(weights: [f64; 4]) -> Result<Self> {
        if weights.iter().any(|&w| w.is_nan() || w < -EQ_TOL) {
            return Err(QpaError::InvalidWeights(format!(
                "negative entry in {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > EQ_TOL {
            return Err(QpaError::InvalidWeights(format!("weights sum to {sum}")));
        }
        Ok(Self(weights.map(|w| w.max(0.0))))
    }

    pub fn pure(label: BellLabel) -> Self {
        let mut w = [0.0; 4];
        w[label.index()] = 1.0;
        Self(w)
    }

    /// Bell-basis diagonal `⟨B|ρ|B⟩` of a two-qubit state.
    pub fn from_density(rho: &DensityOperator) -> Result<Self> {
        if rho.dim() != 4 {
            return Err(QpaError::DimensionMismatch {
                expected: "4".into(),
                actual: rho.dim().to_string(),
            });
        }
        Self::new(BellLabel::ALL.map(|l| rho.fidelity_with(&bell_state(l))))
    }

    pub fn get(&self, label: BellLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn to_density(&self) -> DensityOperator {
        let projectors = BellLabel::ALL.map(bell_projector);
        let terms: Vec<(f64, &DensityOperator)> =
            self.0.iter().copied().zip(projectors.iter()).collect();
        DensityOperator::mixture(&terms).expect("validated weights")
    }
}

/// Largest modulus of an off-diagonal element of `ρ` in the Bell basis.
pub fn bell_offdiagonal_max(rho: &DensityOperator) -> f64 {
    let basis = BellLabel::ALL.map(bell_state);
    let mut worst = 0.0_f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            if i != j {
                worst = worst.max(rho.matrix().sandwich(a, b).norm());
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpaOutcome {
    /// Conditional polarisation state; `None` when the yield vanishes.
    pub output_pol: Option<DensityOperator>,
    pub qpa_yield: f64,
    /// Acceptance probabilities of the (A0, B0) and (A1, B1) branches.
    pub branch_probabilities: [f64; 2],
}

impl QpaOutcome {
    pub fn is_undefined(&self) -> bool {
        self.output_pol.is_none()
    }

    pub fn output_weights(&self) -> Option<BellWeights> {
        self.output_pol
            .as_ref()
            .map(|rho| BellWeights::from_density(rho).expect("trace-one output"))
    }
}

/// Basis-index permutation of the two CNOTs: `et_A ^= pol_A`, `et_B ^= pol_B`.
fn cnot_permute(index: usize) -> usize {
    let pol_a = (index >> 3) & 1;
    let pol_b = (index >> 2) & 1;
    index ^ (pol_a << 1) ^ pol_b
}

/// The 16×16 permutation unitary of the bilateral CNOT.
pub fn bilateral_cnot_matrix() -> ComplexMatrix {
    let mut u = ComplexMatrix::zeros(16, 16);
    for i in 0..16 {
        u[(cnot_permute(i), i)] = num_complex::Complex64::new(1.0, 0.0);
    }
    u
}

pub fn bilateral_cnot(state: &HyperState) -> DensityOperator {
    bilateral_cnot_joint(&state.joint()).expect("joint state is 16-dimensional")
}

/// Bilateral CNOT on an arbitrary 16-dimensional operator.
pub fn bilateral_cnot_joint(rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.dim() != 16 {
        return Err(QpaError::DimensionMismatch {
            expected: "16".into(),
            actual: rho.dim().to_string(),
        });
    }
    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(16, 16);
    for i in 0..16 {
        for j in 0..16 {
            out[(cnot_permute(i), cnot_permute(j))] = m[(i, j)];
        }
    }
    Ok(DensityOperator::from_matrix_unchecked(out))
}

/// Projects the energy-time pair onto `{|00⟩, |11⟩}` and returns the
/// normalised polarisation marginal of the accepted events.
pub fn postselect(rho: &DensityOperator) -> Result<QpaOutcome> {
    if rho.dim() != 16 {
        return Err(QpaError::DimensionMismatch {
            expected: "16".into(),
            actual: rho.dim().to_string(),
        });
    }
    let m = rho.matrix();
    let mut kept = ComplexMatrix::zeros(16, 16);
    let mut branches = [0.0; 2];
    for (branch, et) in [0b00usize, 0b11].into_iter().enumerate() {
        for pi in 0..4 {
            for pj in 0..4 {
                let (i, j) = (4 * pi + et, 4 * pj + et);
                kept[(i, j)] = m[(i, j)];
            }
            branches[branch] += m[(4 * pi + et, 4 * pi + et)].re;
        }
    }
    let branches = branches.map(crate::linalg::clamp_probability);
    let qpa_yield = branches[0] + branches[1];
    let output_pol = (qpa_yield >= MIN_YIELD).then(|| {
        let unnormalised = DensityOperator::from_matrix_unchecked(kept.scale(1.0 / qpa_yield));
        partial_trace(&unnormalised, DofPair::Pol).expect("dim 16")
    });
    Ok(QpaOutcome {
        output_pol,
        qpa_yield,
        branch_probabilities: branches,
    })
}

/// Full matrix route: tensor, bilateral CNOT, postselect.
pub fn qpa_matrix_pipeline(state: &HyperState) -> QpaOutcome {
    postselect(&bilateral_cnot(state)).expect("dim 16")
}

/// Closed-form QPA for factorised Bell-diagonal input.
pub fn qpa_bell_algebra(pol: &BellWeights, et: &BellWeights) -> QpaOutcome {
    let mut out = [0.0; 4];
    let mut qpa_yield = 0.0;
    for lp in BellLabel::ALL {
        for le in BellLabel::ALL {
            if lp.bit() != le.bit() {
                continue;
            }
            let w = pol.get(lp) * et.get(le);
            let label = BellLabel::new(lp.bit(), lp.phase() ^ le.phase());
            out[label.index()] += w;
            qpa_yield += w;
        }
    }
    // Every accepted Bell pair puts half its weight on et = |00⟩ and half on |11⟩.
    let branch_probabilities = [qpa_yield / 2.0, qpa_yield / 2.0];
    let output_pol = (qpa_yield >= MIN_YIELD).then(|| {
        let normalised = out.map(|w| w / qpa_yield);
        BellWeights::new(normalised)
            .expect("renormalised weights")
            .to_density()
    });
    QpaOutcome {
        output_pol,
        qpa_yield,
        branch_probabilities,
    }
}
