//! Dense complex linear algebra and two-qubit primitives.
//!
//! Matrices are stored row-major. For multi-qubit operators the basis index is
//! the binary expansion of the qubit labels with the first qubit as the most
//! significant bit; the four-qubit hyperentangled space is ordered
//! `(pol_A, pol_B, et_A, et_B)`, i.e. `index = 8·pol_A + 4·pol_B + 2·et_A + et_B`.
//! `|0⟩` is `|H⟩` / `|t_S⟩` and `|1⟩` is `|V⟩` / `|t_L⟩`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{QpaError, Result};

/// Entrywise equality tolerance.
pub const EQ_TOL: f64 = 1e-12;
/// Tolerance for unitarity, projector checks and positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(QpaError::DimensionMismatch {
                expected: format!("{rows}x{cols} = {} entries", rows * cols),
                actual: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_row_major(
            rows,
            cols,
            data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        m
    }

    /// `|a⟩⟨b|`.
    pub fn outer(a: &StateVector, b: &StateVector) -> Self {
        let n = a.dim();
        let m = b.dim();
        let mut out = Self::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                out[(i, j)] = a.amplitudes()[i] * b.amplitudes()[j].conj();
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(QpaError::DimensionMismatch {
                expected: format!("{} rows on the right operand", self.cols),
                actual: format!("{}", rhs.rows),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Kronecker product `self ⊗ rhs`; `self` indexes the high-order bits.
    pub fn kron(&self, rhs: &Self) -> Self {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        let mut out = Self::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out[(i * rhs.rows + k, j * rhs.cols + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entrywise modulus of `self - other`; `inf` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint())
    }

    pub fn unitarity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let prod = self.adjoint().matmul(self).expect("square");
        prod.max_abs_diff(&Self::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Eigenvalues of a Hermitian matrix in ascending order.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.rows;
        let m = nalgebra::DMatrix::<nalgebra::Complex<f64>>::from_fn(n, n, |r, c| {
            let z = self[(r, c)];
            nalgebra::Complex::new(z.re, z.im)
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Matrix elements `⟨a|M|b⟩`.
    pub fn sandwich(&self, a: &StateVector, b: &StateVector) -> Complex64 {
        let mut acc = ZERO;
        for i in 0..self.rows {
            let ai = a.amplitudes()[i].conj();
            if ai == ZERO {
                continue;
            }
            for j in 0..self.cols {
                acc += ai * self[(i, j)] * b.amplitudes()[j];
            }
        }
        acc
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of bounds"
        );
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of bounds"
        );
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch in add"
        );
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("shape mismatch in mul")
    }
}

/// Normalised pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(QpaError::UnsupportedDimension(0));
        }
        let norm: f64 = amps.iter().map(Complex64::norm_sqr).sum();
        if (norm - 1.0).abs() > EQ_TOL {
            return Err(QpaError::NotNormalized(norm));
        }
        Ok(Self { amps })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(
            index < dim,
            "basis index {index} out of range for dim {dim}"
        );
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dim = self.dim() * other.dim();
        if dim > 16 {
            return Err(QpaError::DimensionOverflow(dim));
        }
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(Self { amps })
    }

    pub fn projector(&self) -> DensityOperator {
        DensityOperator::from_matrix_unchecked(ComplexMatrix::outer(self, self))
    }
}

/// Mixed state on 2, 4 or 16 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positive semidefiniteness.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(matrix);
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::from_matrix_unchecked(
            ComplexMatrix::identity(dim).scale(1.0 / dim as f64),
        ))
    }

    /// Convex combination `Σ wᵢ ρᵢ`; the weights must be a probability vector.
    pub fn mixture(terms: &[(f64, &DensityOperator)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| QpaError::InvalidDensity("empty mixture".into()))?;
        let dim = first.1.dim();
        let mut total = 0.0;
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for &(w, rho) in terms {
            if !(0.0..=1.0 + EQ_TOL).contains(&w) {
                return Err(QpaError::InvalidDensity(format!("mixture weight {w}")));
            }
            if rho.dim() != dim {
                return Err(QpaError::DimensionMismatch {
                    expected: dim.to_string(),
                    actual: rho.dim().to_string(),
                });
            }
            total += w;
            if w != 0.0 {
                acc = &acc + &rho.matrix.scale(w);
            }
        }
        if (total - 1.0).abs() > EQ_TOL {
            return Err(QpaError::InvalidDensity(format!(
                "mixture weights sum to {total}"
            )));
        }
        Ok(Self::from_matrix_unchecked(acc))
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim())?;
        let herm = self.matrix.hermiticity_error();
        if herm > EQ_TOL {
            return Err(QpaError::InvalidDensity(format!(
                "not Hermitian ({herm:e})"
            )));
        }
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > EQ_TOL || tr.im.abs() > EQ_TOL {
            return Err(QpaError::InvalidDensity(format!("trace {tr}")));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -PSD_TOL {
            return Err(QpaError::InvalidDensity(format!(
                "negative eigenvalue {min_ev:e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.hermitian_eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with(&self, psi: &StateVector) -> f64 {
        self.matrix.sandwich(psi, psi).re
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dim = self.dim() * other.dim();
        if dim > 16 {
            return Err(QpaError::DimensionOverflow(dim));
        }
        Ok(Self::from_matrix_unchecked(self.matrix.kron(&other.matrix)))
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.matrix.approx_eq(&other.matrix, tol)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 4 | 16 => Ok(()),
        d => Err(QpaError::UnsupportedDimension(d)),
    }
}

/// Bell-state label as (bit-flip, phase-flip) bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BellLabel {
    bit: bool,
    phase: bool,
}

impl BellLabel {
    pub const PHI_PLUS: Self = Self::new(false, false);
    pub const PSI_PLUS: Self = Self::new(true, false);
    pub const PHI_MINUS: Self = Self::new(false, true);
    pub const PSI_MINUS: Self = Self::new(true, true);

    /// Ordered by [`BellLabel::index`]: φ⁺, ψ⁺, φ⁻, ψ⁻.
    pub const ALL: [Self; 4] = [
        Self::PHI_PLUS,
        Self::PSI_PLUS,
        Self::PHI_MINUS,
        Self::PSI_MINUS,
    ];

    pub const fn new(bit: bool, phase: bool) -> Self {
        Self { bit, phase }
    }

    pub fn from_bits(bit: u8, phase: u8) -> Result<Self> {
        match (bit, phase) {
            (0 | 1, 0 | 1) => Ok(Self::new(bit == 1, phase == 1)),
            _ => Err(QpaError::InvalidWeights(format!(
                "Bell label bits ({bit}, {phase})"
            ))),
        }
    }

    pub fn bit(self) -> bool {
        self.bit
    }

    pub fn phase(self) -> bool {
        self.phase
    }

    /// `bit + 2·phase`.
    pub fn index(self) -> usize {
        usize::from(self.bit) + 2 * usize::from(self.phase)
    }

    pub fn from_index(index: usize) -> Self {
        Self::ALL[index]
    }

    pub fn name(self) -> &'static str {
        match (self.bit, self.phase) {
            (false, false) => "phi+",
            (true, false) => "psi+",
            (false, true) => "phi-",
            (true, true) => "psi-",
        }
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `(|0,b⟩ + (−1)^f |1,1⊕b⟩)/√2`.
pub fn bell_state(label: BellLabel) -> StateVector {
    let b = usize::from(label.bit);
    let sign = if label.phase { -1.0 } else { 1.0 };
    let mut amps = vec![ZERO; 4];
    amps[b] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[2 + (1 - b)] = Complex64::new(sign * FRAC_1_SQRT_2, 0.0);
    StateVector { amps }
}

pub fn bell_projector(label: BellLabel) -> DensityOperator {
    bell_state(label).projector()
}

/// Rotation about the Bloch-sphere y axis.
pub fn ry(theta: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_real(2, 2, &[c, -s, s, c]).expect("2x2")
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).expect("2x2")
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).expect("2x2")
}

pub fn pauli_y() -> ComplexMatrix {
    let i = Complex64::new(0.0, 1.0);
    ComplexMatrix::from_row_major(2, 2, vec![ZERO, -i, i, ZERO]).expect("2x2")
}

/// Hadamard; maps the Z basis onto the X basis `{(|0⟩ ± |1⟩)/√2}`.
pub fn hadamard() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0])
        .expect("2x2")
        .scale(FRAC_1_SQRT_2)
}

/// `U ρ U†`; rejects non-unitary `U`.
pub fn apply_unitary(rho: &DensityOperator, u: &ComplexMatrix) -> Result<DensityOperator> {
    if u.rows() != rho.dim() || !u.is_square() {
        return Err(QpaError::DimensionMismatch {
            expected: format!("{0}x{0}", rho.dim()),
            actual: format!("{}x{}", u.rows(), u.cols()),
        });
    }
    let err = u.unitarity_error();
    if err > PSD_TOL {
        return Err(QpaError::NotUnitary(err));
    }
    Ok(conjugate(rho, u))
}

/// `U ρ U†` for an operator already known to be unitary.
pub(crate) fn conjugate(rho: &DensityOperator, u: &ComplexMatrix) -> DensityOperator {
    let out = &(u * rho.matrix()) * &u.adjoint();
    DensityOperator::from_matrix_unchecked(out)
}

/// `tr(P ρ)` for an orthogonal projector `P`.
pub fn born_probability(rho: &DensityOperator, projector: &ComplexMatrix) -> Result<f64> {
    if projector.rows() != rho.dim() || !projector.is_square() {
        return Err(QpaError::DimensionMismatch {
            expected: format!("{0}x{0}", rho.dim()),
            actual: format!("{}x{}", projector.rows(), projector.cols()),
        });
    }
    let idem = (projector * projector).max_abs_diff(projector);
    let herm = projector.hermiticity_error();
    let dev = idem.max(herm);
    if dev > PSD_TOL {
        return Err(QpaError::NotProjector(dev));
    }
    Ok(clamp_probability((projector * rho.matrix()).trace().re))
}

/// Snaps values within `PSD_TOL` of the unit interval onto it.
pub(crate) fn clamp_probability(x: f64) -> f64 {
    if (-PSD_TOL..0.0).contains(&x) {
        0.0
    } else if x > 1.0 && x <= 1.0 + PSD_TOL {
        1.0
    } else {
        x
    }
}

/// Which two-qubit pair of the four-qubit register to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofPair {
    /// Qubits `(pol_A, pol_B)`, the high-order pair.
    Pol,
    /// Qubits `(et_A, et_B)`, the low-order pair.
    Et,
}

pub fn partial_trace(rho: &DensityOperator, keep: DofPair) -> Result<DensityOperator> {
    if rho.dim() != 16 {
        return Err(QpaError::DimensionMismatch {
            expected: "16".into(),
            actual: rho.dim().to_string(),
        });
    }
    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = ZERO;
            for k in 0..4 {
                acc += match keep {
                    DofPair::Pol => m[(4 * i + k, 4 * j + k)],
                    DofPair::Et => m[(4 * k + i, 4 * k + j)],
                };
            }
            out[(i, j)] = acc;
        }
    }
    Ok(DensityOperator::from_matrix_unchecked(out))
}
