//! Density matrices, pure states and the entropic quantities defined on them.
//!
//! Every logarithm is base 2, so all entropies are in bits.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_eig, ComplexMatrix, MatrixText, Spectrum, C64, EIG_TOL, ZERO};

/// Eigenvalues in `[-CLIP_TOL, 0)` are rounded up to zero; anything more
/// negative is rejected.
pub const CLIP_TOL: f64 = 1e-12;

/// Eigenvalues at or below this are outside the support.
pub const SUPPORT_TOL: f64 = 1e-12;

pub const TRACE_TOL: f64 = 1e-10;

pub const NORM_TOL: f64 = 1e-10;

/// Hermitian, positive semidefinite, unit-trace operator. The spectrum is
/// computed once during validation and reused by every entropy call.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    spectrum: OnceLock<Spectrum>,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::InvalidState(format!(
                "density matrix must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        let defect = mat.hermitian_defect();
        if defect > EIG_TOL {
            return Err(Error::NotHermitian { defect });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let mat = mat.hermitian_part();
        let spectrum = hermitian_eig(&mat, EIG_TOL)?;
        if let Some(&lowest) = spectrum.values.first() {
            if lowest < -CLIP_TOL {
                return Err(Error::InvalidState(format!(
                    "negative eigenvalue {lowest:.3e}"
                )));
            }
        }
        let cell = OnceLock::new();
        let _ = cell.set(spectrum);
        Ok(Self { mat, spectrum: cell })
    }

    /// Renormalizes a PSD matrix to unit trace before validating it.
    pub fn normalized(mat: ComplexMatrix) -> Result<Self> {
        let tr = mat.trace().re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("cannot normalize, trace {tr}")));
        }
        Self::new(mat.scale_real(1.0 / tr))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::new(ComplexMatrix::identity(d).scale_real(1.0 / d as f64))
            .expect("I/d is a valid state")
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diagonal(probs))
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self::new(ComplexMatrix::projector(psi.amplitudes())).expect("projector of a unit vector")
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| {
            hermitian_eig(&self.mat, EIG_TOL).expect("validated density matrix is Hermitian")
        })
    }

    /// Eigenvalues (ascending) with round-off negatives clipped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum().values.iter().map(|&l| l.max(0.0)).collect()
    }

    pub fn rank(&self) -> usize {
        self.spectrum().values.iter().filter(|&&l| l > SUPPORT_TOL).count()
    }

    pub fn purity(&self) -> f64 {
        self.mat.trace_product_re(&self.mat)
    }

    pub fn to_text(&self, basis_label: &str) -> StateText {
        StateText {
            kind: StateKind::Density,
            basis_label: basis_label.to_string(),
            matrix: self.mat.clone().into(),
        }
    }
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

/// Unit vector on a finite-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("empty state vector".into()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { amps })
    }

    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn basis_state(d: usize, k: usize) -> Self {
        let mut amps = vec![ZERO; d];
        amps[k] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::projector(&self.amps)
    }

    pub fn to_text(&self, basis_label: &str) -> StateText {
        let col = ComplexMatrix::new(self.dim(), 1, self.amps.clone()).expect("non-empty");
        StateText {
            kind: StateKind::Pure,
            basis_label: basis_label.to_string(),
            matrix: col.into(),
        }
    }
}

/// Orthonormal basis stored as the columns of a square matrix.
#[derive(Clone, Debug)]
pub struct Basis {
    columns: ComplexMatrix,
    label: String,
}

impl Basis {
    pub fn new(columns: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        let defect = columns.unitarity_defect();
        if defect > 1e-10 {
            return Err(Error::InvalidState(format!(
                "basis columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Self {
            columns,
            label: label.into(),
        })
    }

    pub fn standard(d: usize) -> Self {
        Self {
            columns: ComplexMatrix::identity(d),
            label: "standard".into(),
        }
    }

    /// Eigenbasis of a state, dominant eigenvector first.
    pub fn eigenbasis(rho: &DensityMatrix, label: impl Into<String>) -> Self {
        let s = rho.spectrum();
        let n = s.dim();
        Self {
            columns: ComplexMatrix::from_fn(n, n, |i, j| s.vectors[(i, n - 1 - j)]),
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.rows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn columns(&self) -> &ComplexMatrix {
        &self.columns
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.columns.column(k)
    }

    /// Diagonal of `ρ` expressed in this basis, `⟨b_i|ρ|b_i⟩`.
    pub fn populations(&self, rho: &ComplexMatrix) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                let v = self.vector(k);
                rho.sandwich(&v, &v).re
            })
            .collect()
    }
}

/// `-Σ p log₂ p` with `0 log 0 = 0`; entries below zero are ignored.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Binary entropy `H(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy(&[p, 1.0 - p])
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(&rho.eigenvalues()).max(0.0)
}

/// Result of a relative entropy evaluation. `Infinite` is returned whenever
/// the support of the first argument leaves the support of the second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelEntropy {
    Finite(f64),
    Infinite,
}

impl RelEntropy {
    pub fn finite(self) -> Option<f64> {
        match self {
            RelEntropy::Finite(v) => Some(v),
            RelEntropy::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RelEntropy::Infinite)
    }

    /// Value with `Infinite` mapped to `f64::INFINITY`, for ordering.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// `S(ρ‖σ) = -Tr ρ log₂ σ - S(ρ)`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<RelEntropy> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "relative entropy of {}-dim and {}-dim states",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(relative_entropy_with_spectrum(rho, sigma.spectrum()))
}

/// Relative entropy against an operator given by its spectrum; the spectrum
/// must describe a unit-trace PSD operator.
pub(crate) fn relative_entropy_with_spectrum(rho: &DensityMatrix, sigma: &Spectrum) -> RelEntropy {
    let mut cross = 0.0;
    for (k, &mu) in sigma.values.iter().enumerate() {
        let v = sigma.vector(k);
        let weight = rho.matrix().sandwich(&v, &v).re;
        if mu <= SUPPORT_TOL {
            if weight > SUPPORT_TOL {
                return RelEntropy::Infinite;
            }
            continue;
        }
        cross -= weight * mu.log2();
    }
    RelEntropy::Finite((cross - von_neumann_entropy(rho)).max(0.0))
}

/// Completely dephased state `Σ ⟨b_i|ρ|b_i⟩ |b_i⟩⟨b_i|`.
pub fn dephase(rho: &DensityMatrix, basis: &Basis) -> Result<DensityMatrix> {
    check_basis(rho, basis)?;
    let pops = basis.populations(rho.matrix());
    let n = rho.dim();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, p) in pops.iter().enumerate() {
        let v = basis.vector(k);
        let proj = ComplexMatrix::projector(&v).scale_real(*p);
        out = &out + &proj;
    }
    DensityMatrix::new(out)
}

/// Relative entropy of coherence, `S(ρ^D) - S(ρ)`.
pub fn coherence_rel_ent(rho: &DensityMatrix, basis: &Basis) -> Result<f64> {
    check_basis(rho, basis)?;
    let pops = basis.populations(rho.matrix());
    Ok((shannon_entropy(&pops) - von_neumann_entropy(rho)).max(0.0))
}

fn check_basis(rho: &DensityMatrix, basis: &Basis) -> Result<()> {
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}-dim state against {}-dim basis '{}'",
            rho.dim(),
            basis.dim(),
            basis.label()
        )));
    }
    Ok(())
}

/// `Σ √a_i |a_i⟩|e_i⟩` with `{|e_i⟩}` the standard basis of the second factor.
pub fn purify(rho: &DensityMatrix) -> PureState {
    purify_in(rho, &Basis::eigenbasis(rho, "eigen"))
}

/// Purification using a caller-chosen eigenbasis of `ρ` (for degenerate
/// spectra the choice matters for bookkeeping, not for the reduced state).
pub fn purify_in(rho: &DensityMatrix, eigenbasis: &Basis) -> PureState {
    let n = rho.dim();
    let pops = eigenbasis.populations(rho.matrix());
    let mut amps = vec![ZERO; n * n];
    for (i, p) in pops.iter().enumerate() {
        let w = p.max(0.0).sqrt();
        if w == 0.0 {
            continue;
        }
        let a = eigenbasis.vector(i);
        for (r, ar) in a.iter().enumerate() {
            amps[r * n + i] += ar * w;
        }
    }
    PureState::normalized(amps).expect("purification of a unit-trace state")
}

/// Structured-text form shared by density matrices and pure states.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateText {
    pub kind: StateKind,
    pub basis_label: String,
    #[serde(flatten)]
    pub matrix: MatrixText,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Density,
    Pure,
}

/// Either kind of state parsed back from [`StateText`].
#[derive(Clone, Debug)]
pub enum ParsedState {
    Density(DensityMatrix),
    Pure(PureState),
}

impl TryFrom<StateText> for ParsedState {
    type Error = Error;
    fn try_from(t: StateText) -> Result<Self> {
        let m = ComplexMatrix::try_from(t.matrix)?;
        match t.kind {
            StateKind::Density => Ok(ParsedState::Density(DensityMatrix::new(m)?)),
            StateKind::Pure => {
                if m.cols() != 1 {
                    return Err(Error::InvalidState("pure state must be a column".into()));
                }
                Ok(ParsedState::Pure(PureState::new(m.column(0))?))
            }
        }
    }
}

/// Reduced state of a pure vector on the kept factors.
pub fn reduced_state(psi: &PureState, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    DensityMatrix::new(linalg::reduce_pure(psi.amplitudes(), dims, keep)?)
}
