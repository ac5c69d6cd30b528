//! Pointer measurement of a pure system by a mixed apparatus.
//!
//! The interaction is `U = Σ_j |s_j⟩⟨s_j| ⊗ V_j`: system basis state `j`
//! applies the record unitary `V_j` to the apparatus, sending each apparatus
//! eigenvector `|a_i⟩` to the pointer state `V_j|a_i⟩`. A valid record family
//! keeps pointer states for distinct `j` orthogonal for every fixed `i`.
//!
//! The environment only purifies the apparatus; it never touches the system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{reduce_pure, tensor, ComplexMatrix, MatrixText, C64, ZERO};
use crate::states::{purify_in, Basis, DensityMatrix, PureState, NORM_TOL};

pub const RECORD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFamily {
    ControlledShift,
    Custom,
}

#[derive(Clone, Debug)]
pub struct MeasurementModel {
    amplitudes: Vec<C64>,
    apparatus: DensityMatrix,
    /// Eigenbasis of the apparatus, dominant eigenvalue first.
    apparatus_basis: Basis,
    /// Eigenvalues `a_i` matching `apparatus_basis`.
    apparatus_weights: Vec<f64>,
    records: Vec<ComplexMatrix>,
    family: RecordFamily,
}

/// Worst-case defects of a record family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecordCheck {
    pub accepted: bool,
    /// `max |⟨a_i|V_j†V_k|a_i⟩|` over all `i` and `j ≠ k`.
    pub orthogonality_violation: f64,
    /// `max_j ‖V_j†V_j − I‖_max`.
    pub unitarity_defect: f64,
}

pub fn validate_records(records: &[ComplexMatrix], basis: &Basis, tol: f64) -> RecordCheck {
    let n = basis.dim();
    let mut unitarity = 0.0f64;
    for v in records {
        if v.rows() != n || v.cols() != n {
            return RecordCheck {
                accepted: false,
                orthogonality_violation: f64::INFINITY,
                unitarity_defect: f64::INFINITY,
            };
        }
        unitarity = unitarity.max(v.unitarity_defect());
    }
    let mut ortho = 0.0f64;
    for i in 0..n {
        let a = basis.vector(i);
        let pointers: Vec<Vec<C64>> = records.iter().map(|v| v.mul_vec(&a)).collect();
        for j in 0..pointers.len() {
            for k in j + 1..pointers.len() {
                let ov: C64 = pointers[j]
                    .iter()
                    .zip(&pointers[k])
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                ortho = ortho.max(ov.norm());
            }
        }
    }
    RecordCheck {
        accepted: ortho <= tol && unitarity <= tol,
        orthogonality_violation: ortho,
        unitarity_defect: unitarity,
    }
}

/// Cyclic shift of a basis, `|b_i⟩ ↦ |b_{(i+1) mod N}⟩`.
pub fn shift_operator(basis: &Basis) -> ComplexMatrix {
    let n = basis.dim();
    let mut x = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let from = basis.vector(i);
        let to = basis.vector((i + 1) % n);
        x = &x + &ComplexMatrix::outer(&to, &from);
    }
    x
}

/// Controlled-shift model: `V_j = X^j` with `X` cycling the apparatus eigenbasis.
pub fn build_controlled_shift(
    system_dim: usize,
    apparatus_dim: usize,
    amplitudes: &[C64],
    apparatus: DensityMatrix,
) -> Result<MeasurementModel> {
    if apparatus_dim < system_dim {
        return Err(Error::DimensionError {
            system: system_dim,
            apparatus: apparatus_dim,
        });
    }
    check_shapes(system_dim, apparatus_dim, amplitudes, &apparatus)?;
    let basis = Basis::eigenbasis(&apparatus, "apparatus-eigen");
    let x = shift_operator(&basis);
    let mut records = Vec::with_capacity(system_dim);
    let mut v = ComplexMatrix::identity(apparatus_dim);
    for _ in 0..system_dim {
        records.push(v.clone());
        v = &x * &v;
    }
    MeasurementModel::assemble(amplitudes, apparatus, basis, records, RecordFamily::ControlledShift)
}

fn check_shapes(m: usize, n: usize, amplitudes: &[C64], apparatus: &DensityMatrix) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidModel("dimensions must be positive".into()));
    }
    if amplitudes.len() != m {
        return Err(Error::InvalidModel(format!(
            "{} amplitudes for a {m}-dim system",
            amplitudes.len()
        )));
    }
    if apparatus.dim() != n {
        return Err(Error::InvalidModel(format!(
            "apparatus state is {}-dim, expected {n}",
            apparatus.dim()
        )));
    }
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidModel(format!("Σ|s_i|² = {norm}, expected 1")));
    }
    Ok(())
}

impl MeasurementModel {
    /// Model with caller-supplied records; they must pass [`validate_records`].
    pub fn with_records(
        amplitudes: &[C64],
        apparatus: DensityMatrix,
        records: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        check_shapes(records.len(), apparatus.dim(), amplitudes, &apparatus)?;
        let basis = Basis::eigenbasis(&apparatus, "apparatus-eigen");
        Self::assemble(amplitudes, apparatus, basis, records, RecordFamily::Custom)
    }

    fn assemble(
        amplitudes: &[C64],
        apparatus: DensityMatrix,
        basis: Basis,
        records: Vec<ComplexMatrix>,
        family: RecordFamily,
    ) -> Result<Self> {
        let check = validate_records(&records, &basis, RECORD_TOL);
        if !check.accepted {
            return Err(Error::InvalidModel(format!(
                "record family rejected: orthogonality violation {:.3e}, unitarity defect {:.3e}",
                check.orthogonality_violation, check.unitarity_defect
            )));
        }
        let weights = basis
            .populations(apparatus.matrix())
            .into_iter()
            .map(|p| p.max(0.0))
            .collect();
        Ok(Self {
            amplitudes: amplitudes.to_vec(),
            apparatus,
            apparatus_basis: basis,
            apparatus_weights: weights,
            records,
            family,
        })
    }

    pub fn system_dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn apparatus_dim(&self) -> usize {
        self.apparatus.dim()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// `|s_i|²`
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apparatus(&self) -> &DensityMatrix {
        &self.apparatus
    }

    pub fn apparatus_basis(&self) -> &Basis {
        &self.apparatus_basis
    }

    pub fn apparatus_weights(&self) -> &[f64] {
        &self.apparatus_weights
    }

    pub fn records(&self) -> &[ComplexMatrix] {
        &self.records
    }

    pub fn family(&self) -> RecordFamily {
        self.family
    }

    pub fn system_state(&self) -> PureState {
        PureState::new(self.amplitudes.clone()).expect("amplitudes validated at construction")
    }

    pub fn system_basis(&self) -> Basis {
        Basis::standard(self.system_dim())
    }

    /// `|Ψ_AE⟩ = Σ √a_i |a_i⟩|e_i⟩`
    pub fn apparatus_purification(&self) -> PureState {
        purify_in(&self.apparatus, &self.apparatus_basis)
    }
}

/// `U = Σ_j |s_j⟩⟨s_j| ⊗ V_j` on the `M·N` system–apparatus space.
pub fn build_joint_unitary(model: &MeasurementModel) -> ComplexMatrix {
    let (m, n) = (model.system_dim(), model.apparatus_dim());
    let mut u = ComplexMatrix::zeros(m * n, m * n);
    for (j, v) in model.records().iter().enumerate() {
        for r in 0..n {
            for c in 0..n {
                u[(j * n + r, j * n + c)] = v[(r, c)];
            }
        }
    }
    u
}

/// Everything produced by the interaction.
#[derive(Clone, Debug)]
pub struct FinalState {
    system_dim: usize,
    apparatus_dim: usize,
    /// `ρ_S'A'`
    pub joint: DensityMatrix,
    /// `ρ_ij = V_i ρ_A V_j†`, unnormalized off the diagonal.
    pub blocks: Vec<Vec<ComplexMatrix>>,
    /// `ρ_A'`
    pub apparatus_final: DensityMatrix,
    /// `ρ_S'`
    pub system_final: DensityMatrix,
    /// `|Ψ_S'A'E⟩`
    pub tripartite: PureState,
    /// `|Ψ_AE⟩` before the interaction.
    pub initial_apparatus_environment: PureState,
}

impl FinalState {
    pub fn dims(&self) -> [usize; 3] {
        [self.system_dim, self.apparatus_dim, self.apparatus_dim]
    }

    /// `ρ_A'E`
    pub fn apparatus_environment(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(reduce_pure(self.tripartite.amplitudes(), &self.dims(), &[1, 2])?)
    }

    /// `ρ_E` after the interaction.
    pub fn environment(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(reduce_pure(self.tripartite.amplitudes(), &self.dims(), &[2])?)
    }

    /// `Σ_i |s_i|² |s_i⟩⟨s_i| ⊗ ρ_ii`, the classically correlated part of `ρ_S'A'`.
    pub fn classical_part(&self, model: &MeasurementModel) -> Result<DensityMatrix> {
        let (m, n) = (self.system_dim, self.apparatus_dim);
        let mut out = ComplexMatrix::zeros(m * n, m * n);
        for (i, p) in model.probabilities().iter().enumerate() {
            let proj = ComplexMatrix::projector(PureState::basis_state(m, i).amplitudes());
            out = &out + &tensor(&proj, &self.blocks[i][i].scale_real(*p));
        }
        DensityMatrix::new(out)
    }

    /// Pure-state decomposition `ρ_A'E = Σ_i |s_i|² |Ψ^i_AE⟩⟨Ψ^i_AE|` with
    /// `|Ψ^i_AE⟩ = (V_i ⊗ I)|Ψ_AE⟩`.
    pub fn conditional_apparatus_environment(&self, model: &MeasurementModel) -> Vec<(f64, PureState)> {
        let nn = self.apparatus_dim * self.apparatus_dim;
        model
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.norm_sqr() > 0.0)
            .map(|(i, s)| {
                let slice = &self.tripartite.amplitudes()[i * nn..(i + 1) * nn];
                let psi = PureState::normalized(slice.iter().map(|a| a / s.norm()).collect())
                    .expect("conditional branch has norm |s_i|");
                (s.norm_sqr(), psi)
            })
            .collect()
    }
}

/// Applies `U` to `|Ψ_S⟩⟨Ψ_S| ⊗ ρ_A` and collects every post-measurement object.
pub fn evolve(model: &MeasurementModel) -> Result<FinalState> {
    let (m, n) = (model.system_dim(), model.apparatus_dim());
    let s = model.amplitudes();
    let rho_a = model.apparatus().matrix();
    let records = model.records();

    let adjoints: Vec<ComplexMatrix> = records.iter().map(|v| v.adjoint()).collect();
    let left: Vec<ComplexMatrix> = records.iter().map(|v| v * rho_a).collect();
    let blocks: Vec<Vec<ComplexMatrix>> = (0..m)
        .map(|i| (0..m).map(|j| &left[i] * &adjoints[j]).collect())
        .collect();

    let mut joint = ComplexMatrix::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..m {
            let c = s[i] * s[j].conj();
            if c == ZERO {
                continue;
            }
            let b = &blocks[i][j];
            for r in 0..n {
                for col in 0..n {
                    joint[(i * n + r, j * n + col)] = c * b[(r, col)];
                }
            }
        }
    }

    let mut apparatus_final = ComplexMatrix::zeros(n, n);
    for i in 0..m {
        apparatus_final = &apparatus_final + &blocks[i][i].scale_real(s[i].norm_sqr());
    }
    let system_final = ComplexMatrix::from_fn(m, m, |i, j| s[i] * s[j].conj() * blocks[i][j].trace());

    let psi_ae = model.apparatus_purification();
    let mut tri = vec![ZERO; m * n * n];
    for (i, v) in records.iter().enumerate() {
        if s[i] == ZERO {
            continue;
        }
        let phi = apply_first_factor_vec(v, psi_ae.amplitudes(), n);
        for (k, amp) in phi.iter().enumerate() {
            tri[i * n * n + k] = s[i] * amp;
        }
    }

    Ok(FinalState {
        system_dim: m,
        apparatus_dim: n,
        joint: DensityMatrix::new(joint)?,
        blocks,
        apparatus_final: DensityMatrix::new(apparatus_final)?,
        system_final: DensityMatrix::new(system_final)?,
        tripartite: PureState::normalized(tri)?,
        initial_apparatus_environment: psi_ae,
    })
}

/// `(A ⊗ I_env)|ψ⟩` for a vector on `dim(A) × env_dim`.
fn apply_first_factor_vec(a: &ComplexMatrix, psi: &[C64], env_dim: usize) -> Vec<C64> {
    let n = a.rows();
    let mut out = vec![ZERO; n * env_dim];
    for r in 0..n {
        for c in 0..a.cols() {
            let arc = a[(r, c)];
            if arc == ZERO {
                continue;
            }
            for e in 0..env_dim {
                out[r * env_dim + e] += arc * psi[c * env_dim + e];
            }
        }
    }
    out
}

/// Kraus representation of a channel on the apparatus.
#[derive(Clone, Debug)]
pub struct ApparatusChannel {
    pub kraus: Vec<ComplexMatrix>,
}

impl ApparatusChannel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let ch = Self { kraus };
        let n = ch.dim();
        if ch.kraus.iter().any(|k| k.rows() != n || k.cols() != n) {
            return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        let defect = ch.completeness_defect();
        if defect > 1e-10 {
            return Err(Error::InvalidModel(format!(
                "Kraus operators are not trace preserving (defect {defect:.3e})"
            )));
        }
        Ok(ch)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            kraus: vec![ComplexMatrix::identity(n)],
        }
    }

    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn dim(&self) -> usize {
        self.kraus.first().map_or(0, |k| k.rows())
    }

    /// `‖Σ A_i†A_i − I‖_max`
    pub fn completeness_defect(&self) -> f64 {
        let n = self.dim();
        let mut acc = ComplexMatrix::zeros(n, n);
        for k in &self.kraus {
            acc = &acc + &(&k.adjoint() * k);
        }
        acc.max_abs_diff(&ComplexMatrix::identity(n))
    }

    /// `Φ(ρ) = Σ A_i ρ A_i†`
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for k in &self.kraus {
            out = &out + &rho.conjugate_by(k);
        }
        out
    }

    /// `(Φ ⊗ id)(|ψ⟩⟨ψ|)` for a vector on `dim × env_dim`.
    pub fn apply_to_pure_first(&self, psi: &PureState, env_dim: usize) -> Result<ComplexMatrix> {
        let n = self.dim();
        if psi.dim() != n * env_dim {
            return Err(Error::DimensionMismatch(format!(
                "channel on {n} dims applied to a {}-dim vector with {env_dim}-dim environment",
                psi.dim()
            )));
        }
        let mut out = ComplexMatrix::zeros(n * env_dim, n * env_dim);
        for k in &self.kraus {
            let phi = apply_first_factor_vec(k, psi.amplitudes(), env_dim);
            out = &out + &ComplexMatrix::projector(&phi);
        }
        Ok(out)
    }
}

/// The channel the apparatus undergoes: Kraus operators `A_i = s_i V_i`, so
/// `Φ(ρ) = Σ |s_i|² V_i ρ V_i†`.
pub fn apparatus_channel(model: &MeasurementModel) -> ApparatusChannel {
    let kraus = model
        .amplitudes()
        .iter()
        .zip(model.records())
        .map(|(s, v)| v.scale(*s))
        .collect();
    ApparatusChannel::new(kraus).expect("valid records give a trace-preserving channel")
}

/// Scenario file schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system_dim: usize,
    pub apparatus_dim: usize,
    /// `[re, im]` per system amplitude.
    pub amplitudes: Vec<[f64; 2]>,
    pub apparatus_state: ApparatusSpec,
    #[serde(default)]
    pub records: RecordSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Apparatus state: a spectrum (diagonal in the standard basis) or a full matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ApparatusSpec {
    Spectrum(Vec<f64>),
    Matrix(MatrixText),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordSpec {
    Named(NamedRecords),
    Matrices(Vec<MatrixText>),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedRecords {
    ControlledShift,
}

impl Default for RecordSpec {
    fn default() -> Self {
        RecordSpec::Named(NamedRecords::ControlledShift)
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn build(&self) -> Result<MeasurementModel> {
        let to_config = |e: Error| Error::Config(e.to_string());
        let amplitudes: Vec<C64> = self.amplitudes.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        if amplitudes.len() != self.system_dim {
            return Err(Error::Config(format!(
                "system_dim is {} but {} amplitudes given",
                self.system_dim,
                amplitudes.len()
            )));
        }
        let apparatus = match &self.apparatus_state {
            ApparatusSpec::Spectrum(p) => DensityMatrix::diagonal(p),
            ApparatusSpec::Matrix(t) => ComplexMatrix::try_from(t.clone()).and_then(DensityMatrix::new),
        }
        .map_err(to_config)?;
        if apparatus.dim() != self.apparatus_dim {
            return Err(Error::Config(format!(
                "apparatus_dim is {} but apparatus_state is {}-dim",
                self.apparatus_dim,
                apparatus.dim()
            )));
        }
        match &self.records {
            RecordSpec::Named(NamedRecords::ControlledShift) => {
                build_controlled_shift(self.system_dim, self.apparatus_dim, &amplitudes, apparatus)
            }
            RecordSpec::Matrices(ms) => {
                let records = ms
                    .iter()
                    .map(|t| ComplexMatrix::try_from(t.clone()))
                    .collect::<Result<Vec<_>>>()?;
                MeasurementModel::with_records(&amplitudes, apparatus, records)
            }
        }
        .map_err(to_config)
    }

    /// Config that rebuilds `model` exactly.
    pub fn from_model(model: &MeasurementModel, seed: u64) -> Self {
        let records = match model.family() {
            RecordFamily::ControlledShift => RecordSpec::Named(NamedRecords::ControlledShift),
            RecordFamily::Custom => {
                RecordSpec::Matrices(model.records().iter().map(|m| m.clone().into()).collect())
            }
        };
        Self {
            system_dim: model.system_dim(),
            apparatus_dim: model.apparatus_dim(),
            amplitudes: model.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
            apparatus_state: ApparatusSpec::Matrix(model.apparatus().matrix().clone().into()),
            records,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, partial_trace, EIG_TOL};
    use crate::states::{reduced_state, von_neumann_entropy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn plus_amps() -> Vec<C64> {
        vec![C64::new(R, 0.0), C64::new(R, 0.0)]
    }

    fn random_state(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let g = ComplexMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        DensityMatrix::normalized(&g * &g.adjoint()).unwrap()
    }

    fn random_amps(d: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        let v: Vec<C64> = (0..d)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        PureState::normalized(v).unwrap().amplitudes().to_vec()
    }

    fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let h = ComplexMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .hermitian_part();
        hermitian_eig(&h, EIG_TOL).unwrap().vectors
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    #[test]
    fn smallest_shift_model() {
        let model = build_controlled_shift(2, 2, &plus_amps(), DensityMatrix::diagonal(&[0.9, 0.1]).unwrap()).unwrap();
        assert_eq!(model.records()[0], ComplexMatrix::identity(2));
        assert!(model.records()[1].max_abs_diff(&pauli_x()) < 1e-15);
        let basis = model.apparatus_basis();
        for i in 0..2 {
            let a = basis.vector(i);
            let ov = (&model.records()[0].adjoint() * &model.records()[1]).sandwich(&a, &a);
            assert!(ov.norm() < 1e-15);
        }
    }

    #[test]
    fn shift_needs_room() {
        let amps = vec![C64::new(1.0, 0.0), ZERO, ZERO];
        let err = build_controlled_shift(3, 2, &amps, DensityMatrix::maximally_mixed(2)).unwrap_err();
        assert!(matches!(err, Error::DimensionError { system: 3, apparatus: 2 }));
    }

    #[test]
    fn shift_model_3x4_random_apparatus() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let amps = random_amps(3, &mut rng);
        let model = build_controlled_shift(3, 4, &amps, random_state(4, &mut rng)).unwrap();
        let check = validate_records(model.records(), model.apparatus_basis(), RECORD_TOL);
        assert!(check.accepted);
        assert!(check.orthogonality_violation < 1e-14);
        assert!(check.unitarity_defect < 1e-12);
    }

    #[test]
    fn identical_records_rejected() {
        let basis = Basis::standard(2);
        let check = validate_records(&[ComplexMatrix::identity(2), ComplexMatrix::identity(2)], &basis, RECORD_TOL);
        assert!(!check.accepted);
        assert!((check.orthogonality_violation - 1.0).abs() < 1e-15);
        assert!(MeasurementModel::with_records(&plus_amps(), DensityMatrix::maximally_mixed(2), vec![
            ComplexMatrix::identity(2),
            ComplexMatrix::identity(2)
        ])
        .is_err());
    }

    #[test]
    fn records_invariant_under_common_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rho = random_state(3, &mut rng);
        let model = build_controlled_shift(3, 3, &random_amps(3, &mut rng), rho.clone()).unwrap();
        let w = random_unitary(3, &mut rng);
        let rotated: Vec<ComplexMatrix> = model.records().iter().map(|v| &w * v).collect();
        let check = validate_records(&rotated, model.apparatus_basis(), RECORD_TOL);
        assert!(check.accepted, "{check:?}");
        assert!(MeasurementModel::with_records(model.amplitudes(), rho, rotated).is_ok());
    }

    #[test]
    fn joint_unitary_shape_and_action() {
        let pure = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let model = build_controlled_shift(2, 2, &plus_amps(), pure).unwrap();
        let u = build_joint_unitary(&model);
        let mut expected = ComplexMatrix::identity(4);
        expected[(2, 2)] = ZERO;
        expected[(3, 3)] = ZERO;
        expected[(2, 3)] = C64::new(1.0, 0.0);
        expected[(3, 2)] = C64::new(1.0, 0.0);
        assert!(u.max_abs_diff(&expected) < 1e-15);
        // |s_1⟩|a_0⟩ ↦ |s_1⟩|a_1⟩
        let out = u.mul_vec(PureState::basis_state(4, 2).amplitudes());
        assert!((out[3] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn joint_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (m, n) in [(2, 2), (2, 3), (3, 4)] {
            let model = build_controlled_shift(m, n, &random_amps(m, &mut rng), random_state(n, &mut rng)).unwrap();
            assert!(build_joint_unitary(&model).unitarity_defect() <= 1e-12);
        }
    }

    #[test]
    fn ideal_measurement_gives_bell_state() {
        let pure = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let model = build_controlled_shift(2, 2, &plus_amps(), pure).unwrap();
        let f = evolve(&model).unwrap();
        let bell = [C64::new(R, 0.0), ZERO, ZERO, C64::new(R, 0.0)];
        assert!(f.joint.matrix().max_abs_diff(&ComplexMatrix::projector(&bell)) < 1e-15);
    }

    #[test]
    fn incoherent_system_gives_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rho = random_state(3, &mut rng);
        let amps = vec![C64::new(1.0, 0.0), ZERO];
        let model = build_controlled_shift(2, 3, &amps, rho.clone()).unwrap();
        let f = evolve(&model).unwrap();
        let product = tensor(&ComplexMatrix::from_real_diagonal(&[1.0, 0.0]), rho.matrix());
        assert!(f.joint.matrix().max_abs_diff(&product) < 1e-14);
    }

    #[test]
    fn mixed_09_blocks() {
        let model = build_controlled_shift(2, 2, &plus_amps(), DensityMatrix::diagonal(&[0.9, 0.1]).unwrap()).unwrap();
        let f = evolve(&model).unwrap();
        assert!(f.blocks[0][0].max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.9, 0.1])) < 1e-15);
        assert!(f.blocks[1][1].max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.1, 0.9])) < 1e-15);
        assert!(f.apparatus_final.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
        assert!(f.blocks[0][1].trace().norm() < 1e-15);
    }

    #[test]
    fn evolve_matches_direct_unitary_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for (m, n) in [(2, 2), (2, 4), (3, 3)] {
            let amps = random_amps(m, &mut rng);
            let model = build_controlled_shift(m, n, &amps, random_state(n, &mut rng)).unwrap();
            let f = evolve(&model).unwrap();
            let initial = tensor(&ComplexMatrix::projector(&amps), model.apparatus().matrix());
            let direct = initial.conjugate_by(&build_joint_unitary(&model));
            assert!(f.joint.matrix().max_abs_diff(&direct) < 1e-13);
        }
    }

    #[test]
    fn final_state_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for (m, n) in [(2, 2), (2, 4), (3, 3), (3, 5)] {
            let amps = random_amps(m, &mut rng);
            let model = build_controlled_shift(m, n, &amps, random_state(n, &mut rng)).unwrap();
            let f = evolve(&model).unwrap();
            let dims = f.dims();
            let tri = f.tripartite.projector();
            let sa = partial_trace(&tri, &dims, &[0, 1]).unwrap();
            assert!(sa.max_abs_diff(f.joint.matrix()) <= 1e-12);
            let a = partial_trace(&tri, &dims, &[1]).unwrap();
            assert!(a.max_abs_diff(f.apparatus_final.matrix()) <= 1e-10);
            let s = partial_trace(&tri, &dims, &[0]).unwrap();
            assert!(s.max_abs_diff(f.system_final.matrix()) <= 1e-10);

            let env_before = reduced_state(&f.initial_apparatus_environment, &[n, n], &[1]).unwrap();
            assert!(f.environment().unwrap().matrix().max_abs_diff(env_before.matrix()) <= 1e-10);

            let s_a = von_neumann_entropy(model.apparatus());
            assert!((von_neumann_entropy(&f.joint) - s_a).abs() <= 1e-9);
            for i in 0..m {
                assert!((f.blocks[i][i].trace().re - 1.0).abs() < 1e-12);
                let rho_ii = DensityMatrix::new(f.blocks[i][i].clone()).unwrap();
                assert!((von_neumann_entropy(&rho_ii) - s_a).abs() <= 1e-9);
            }
            for i in 0..m {
                for j in 0..m {
                    let e = f.system_final.matrix()[(i, j)];
                    let oracle = amps[i] * amps[j].conj() * f.blocks[i][j].trace();
                    assert!((e - oracle).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn valid_records_leave_system_diagonal() {
        // Tr(ρ_ij) = Σ_k a_k ⟨a_k|V_j†V_i|a_k⟩ vanishes for i ≠ j under the
        // record condition, so ρ_S' carries no coherence in {|s_i⟩}.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for (m, n) in [(2, 2), (3, 3), (3, 7)] {
            let amps = random_amps(m, &mut rng);
            let model = build_controlled_shift(m, n, &amps, random_state(n, &mut rng)).unwrap();
            let f = evolve(&model).unwrap();
            for i in 0..m {
                for j in 0..m {
                    let tr = f.blocks[i][j].trace();
                    let delta = if i == j { 1.0 } else { 0.0 };
                    assert!((tr - C64::new(delta, 0.0)).norm() < 1e-13);
                    if i != j {
                        assert!(f.system_final.matrix()[(i, j)].norm() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn channel_examples() {
        let amps = plus_amps();
        let model = build_controlled_shift(2, 2, &amps, DensityMatrix::diagonal(&[0.9, 0.1]).unwrap()).unwrap();
        let ch = apparatus_channel(&model);
        assert!(ch.completeness_defect() < 1e-14);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!(ch.apply(mixed.matrix()).max_abs_diff(mixed.matrix()) < 1e-15);
        let f = evolve(&model).unwrap();
        assert!(ch.apply(model.apparatus().matrix()).max_abs_diff(f.apparatus_final.matrix()) < 1e-10);

        let incoherent = build_controlled_shift(2, 2, &[C64::new(1.0, 0.0), ZERO], DensityMatrix::diagonal(&[0.9, 0.1]).unwrap()).unwrap();
        let ch = apparatus_channel(&incoherent);
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        assert!(ch.apply(rho.matrix()).max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn channel_output_matches_evolution_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (m, n) in [(2, 3), (3, 3), (3, 6)] {
            let model = build_controlled_shift(m, n, &random_amps(m, &mut rng), random_state(n, &mut rng)).unwrap();
            let f = evolve(&model).unwrap();
            let ch = apparatus_channel(&model);
            assert!(ch.completeness_defect() <= 1e-10);
            assert!(ch.apply(model.apparatus().matrix()).max_abs_diff(f.apparatus_final.matrix()) <= 1e-10);
            let psi = model.apparatus_purification();
            let out = ch.apply_to_pure_first(&psi, n).unwrap();
            assert!(out.max_abs_diff(f.apparatus_environment().unwrap().matrix()) <= 1e-10);
        }
    }

    #[test]
    fn scenario_config_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let model = build_controlled_shift(3, 4, &random_amps(3, &mut rng), random_state(4, &mut rng)).unwrap();
        let cfg = ScenarioConfig::from_model(&model, 42);
        let text = cfg.to_json();
        let back = ScenarioConfig::from_json(&text).unwrap();
        let rebuilt = back.build().unwrap();
        assert_eq!(rebuilt.amplitudes(), model.amplitudes());
        assert_eq!(rebuilt.apparatus(), model.apparatus());
        assert_eq!(rebuilt.records(), model.records());
        assert_eq!(back.seed, 42);
    }

    #[test]
    fn scenario_config_spectrum_form() {
        let text = r#"{"system_dim":2,"apparatus_dim":2,
            "amplitudes":[[0.7071067811865476,0],[0.7071067811865476,0]],
            "apparatus_state":[0.9,0.1],"records":"controlled_shift","seed":3}"#;
        let model = ScenarioConfig::from_json(text).unwrap().build().unwrap();
        assert_eq!(model.apparatus_weights(), &[0.9, 0.1]);
        assert!(ScenarioConfig::from_json(r#"{"system_dim":2}"#).is_err());
        let bad = text.replace("[0.9,0.1]", "[0.9,0.2]");
        assert!(matches!(ScenarioConfig::from_json(&bad).unwrap().build(), Err(Error::Config(_))));
    }
}
