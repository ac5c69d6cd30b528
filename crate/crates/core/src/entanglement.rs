//! Relative entropy of entanglement, bracketed from both sides.
//!
//! The lower bound comes from the PPT relaxation: a projected descent finds a
//! near-optimal PPT state and a convex-duality certificate turns it into a
//! bound that holds whether or not the descent converged. The upper bound is
//! `S(ρ‖σ)` for an explicit separable `σ`. Use `lower` for "E_R ≥ x" claims
//! and `upper` for "E_R ≤ x" claims, never the other way round.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, partial_trace, partial_transpose, tensor_vec, ComplexMatrix, Spectrum, C64, EIG_TOL, ZERO};
use crate::optim::{minimize, LbfgsOptions};
use crate::seeds::derive_seed;
use crate::states::{relative_entropy_with_spectrum, von_neumann_entropy, DensityMatrix, PureState};

/// Eigen-decomposition after discarding round-off anti-Hermitian parts.
fn eigh(m: &ComplexMatrix, tol: f64) -> Result<Spectrum> {
    hermitian_eig(&m.hermitian_part(), tol)
}

/// Eigenvalues below this are treated as outside the support of `σ`.
const KERNEL_TOL: f64 = 1e-14;
const DYKSTRA_MAX_ITER: usize = 500;
const DYKSTRA_TOL: f64 = 1e-10;
const INIT_NOISE: f64 = 0.1;

/// `Σ_k w_k |l_k⟩⟨l_k| ⊗ |r_k⟩⟨r_k|`
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableEnsemble {
    weights: Vec<f64>,
    left_states: Vec<PureState>,
    right_states: Vec<PureState>,
}

impl SeparableEnsemble {
    pub fn new(weights: Vec<f64>, left_states: Vec<PureState>, right_states: Vec<PureState>) -> Result<Self> {
        if weights.is_empty() || weights.len() != left_states.len() || weights.len() != right_states.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights, {} left states, {} right states",
                weights.len(),
                left_states.len(),
                right_states.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidState("negative ensemble weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("ensemble weights sum to {total}")));
        }
        let (da, db) = (left_states[0].dim(), right_states[0].dim());
        if left_states.iter().any(|s| s.dim() != da) || right_states.iter().any(|s| s.dim() != db) {
            return Err(Error::DimensionMismatch("ensemble factors differ in dimension".into()));
        }
        Ok(Self {
            weights,
            left_states,
            right_states,
        })
    }

    pub fn product(left: PureState, right: PureState) -> Self {
        Self {
            weights: vec![1.0],
            left_states: vec![left],
            right_states: vec![right],
        }
    }

    /// Builds from raw atoms, dropping negligible weights and renormalizing.
    fn from_atoms(atoms: &[Atom], weights: &[f64]) -> Result<Self> {
        let mut w = Vec::new();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (a, &wk) in atoms.iter().zip(weights) {
            if wk > 0.0 {
                w.push(wk);
                left.push(PureState::normalized(a.left.clone())?);
                right.push(PureState::normalized(a.right.clone())?);
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        Self::new(w, left, right)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.left_states[0].dim(), self.right_states[0].dim()]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn left_states(&self) -> &[PureState] {
        &self.left_states
    }

    pub fn right_states(&self) -> &[PureState] {
        &self.right_states
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let [da, db] = self.dims();
        let mut m = ComplexMatrix::zeros(da * db, da * db);
        for k in 0..self.len() {
            let v = tensor_vec(self.left_states[k].amplitudes(), self.right_states[k].amplitudes());
            add_projector(&mut m, &v, self.weights[k]);
        }
        m
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.matrix())
    }

    fn atoms(&self) -> Vec<Atom> {
        (0..self.len())
            .map(|k| Atom::new(self.left_states[k].amplitudes().to_vec(), self.right_states[k].amplitudes().to_vec()))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleText {
    weights: Vec<f64>,
    left_states: Vec<Vec<[f64; 2]>>,
    right_states: Vec<Vec<[f64; 2]>>,
}

impl Serialize for SeparableEnsemble {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let enc = |v: &[PureState]| -> Vec<Vec<[f64; 2]>> {
            v.iter()
                .map(|p| p.amplitudes().iter().map(|z| [z.re, z.im]).collect())
                .collect()
        };
        EnsembleText {
            weights: self.weights.clone(),
            left_states: enc(&self.left_states),
            right_states: enc(&self.right_states),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SeparableEnsemble {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let t = EnsembleText::deserialize(d)?;
        let dec = |v: Vec<Vec<[f64; 2]>>| -> Result<Vec<PureState>> {
            v.into_iter()
                .map(|amps| PureState::new(amps.into_iter().map(|[re, im]| C64::new(re, im)).collect()))
                .collect()
        };
        let build = || -> Result<Self> { Self::new(t.weights, dec(t.left_states)?, dec(t.right_states)?) };
        build().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug)]
struct Atom {
    left: Vec<C64>,
    right: Vec<C64>,
    projector: ComplexMatrix,
}

impl Atom {
    fn new(left: Vec<C64>, right: Vec<C64>) -> Self {
        let projector = ComplexMatrix::projector(&tensor_vec(&left, &right));
        Self { left, right, projector }
    }
}

fn add_projector(m: &mut ComplexMatrix, v: &[C64], w: f64) {
    let n = v.len();
    for i in 0..n {
        let vi = v[i] * w;
        if vi == ZERO {
            continue;
        }
        for j in 0..n {
            m[(i, j)] += vi * v[j].conj();
        }
    }
}

fn check_bipartite(rho: &DensityMatrix, dims: [usize; 2]) -> Result<()> {
    if dims[0] == 0 || dims[1] == 0 || dims[0] * dims[1] != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} do not match a {}-dim state",
            rho.dim()
        )));
    }
    Ok(())
}

/// `E_R` of a pure state: the entropy of either reduced state.
pub fn er_pure(psi: &PureState, dims: [usize; 2]) -> Result<f64> {
    if dims[0] * dims[1] != psi.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} do not match a {}-dim state",
            psi.dim()
        )));
    }
    let reduced = crate::states::reduced_state(psi, &dims, &[0])?;
    Ok(von_neumann_entropy(&reduced))
}

/// Schmidt decomposition `ψ = Σ_j c_j |u_j⟩|v_j⟩`, returned as `(c_j², u_j, v_j)`
/// for the nonzero coefficients, largest first.
pub fn schmidt_decomposition(psi: &[C64], dims: [usize; 2]) -> Result<Vec<(f64, Vec<C64>, Vec<C64>)>> {
    let [da, db] = dims;
    if da * db != psi.len() {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} do not match a {}-dim vector",
            psi.len()
        )));
    }
    let reduced = crate::linalg::reduce_pure(psi, &dims, &[0])?;
    let spec = eigh(&reduced, EIG_TOL)?;
    let mut out = Vec::new();
    for k in (0..da).rev() {
        let c2 = spec.values[k];
        if c2 <= KERNEL_TOL {
            continue;
        }
        let u = spec.vector(k);
        let c = c2.sqrt();
        let v: Vec<C64> = (0..db)
            .map(|b| (0..da).map(|a| u[a].conj() * psi[a * db + b]).sum::<C64>() / c)
            .collect();
        out.push((c2, u, v));
    }
    Ok(out)
}

/// `ρ_A ⊗ ρ_B`, written in the eigenbases of the marginals.
pub fn product_of_marginals(rho: &DensityMatrix, dims: [usize; 2]) -> Result<SeparableEnsemble> {
    check_bipartite(rho, dims)?;
    let a = eigh(&partial_trace(rho.matrix(), &dims, &[0])?, EIG_TOL)?;
    let b = eigh(&partial_trace(rho.matrix(), &dims, &[1])?, EIG_TOL)?;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            atoms.push(Atom::new(a.vector(i), b.vector(j)));
            weights.push(a.values[i].max(0.0) * b.values[j].max(0.0));
        }
    }
    SeparableEnsemble::from_atoms(&atoms, &weights)
}

/// Each eigenvector of `ρ` replaced by its Schmidt-dephased mixture. The
/// result sits within `Σ_k λ_k E(ψ_k) ≤ min(S(ρ_A), S(ρ_B))` of `ρ`.
pub fn schmidt_dephased(rho: &DensityMatrix, dims: [usize; 2]) -> Result<SeparableEnsemble> {
    check_bipartite(rho, dims)?;
    let spec = rho.spectrum();
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for k in 0..spec.dim() {
        let lambda = spec.values[k];
        if lambda <= KERNEL_TOL {
            continue;
        }
        for (c2, u, v) in schmidt_decomposition(&spec.vector(k), dims)? {
            atoms.push(Atom::new(u, v));
            weights.push(lambda * c2);
        }
    }
    SeparableEnsemble::from_atoms(&atoms, &weights)
}

/// Dephasing in the product computational basis.
pub fn computational_dephased(rho: &DensityMatrix, dims: [usize; 2]) -> Result<SeparableEnsemble> {
    check_bipartite(rho, dims)?;
    let [da, db] = dims;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for a in 0..da {
        for b in 0..db {
            let w = rho.matrix()[(a * db + b, a * db + b)].re;
            atoms.push(Atom::new(PureState::basis_state(da, a).amplitudes().to_vec(), PureState::basis_state(db, b).amplitudes().to_vec()));
            weights.push(w.max(0.0));
        }
    }
    SeparableEnsemble::from_atoms(&atoms, &weights)
}

/// Fréchet derivative of the natural log at `σ` applied to `ρ`, via divided
/// differences in the eigenbasis of `σ`. Directions outside the support of `σ`
/// are dropped.
fn log_derivative(sigma: &Spectrum, rho: &ComplexMatrix) -> ComplexMatrix {
    let n = sigma.dim();
    let u = &sigma.vectors;
    let rt = &(&u.adjoint() * rho) * u;
    let lam = &sigma.values;
    let mut dt = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        if lam[i] <= KERNEL_TOL {
            continue;
        }
        for j in 0..n {
            if lam[j] <= KERNEL_TOL {
                continue;
            }
            let diff = lam[i] - lam[j];
            let gamma = if diff.abs() <= 1e-12 * lam[i].max(lam[j]) {
                2.0 / (lam[i] + lam[j])
            } else {
                (lam[i].ln() - lam[j].ln()) / diff
            };
            dt[(i, j)] = rt[(i, j)] * gamma;
        }
    }
    &(u * &dt) * &u.adjoint()
}

fn objective(rho: &DensityMatrix, sigma: &ComplexMatrix) -> Result<(f64, Spectrum)> {
    let spec = eigh(sigma, EIG_TOL)?;
    let value = relative_entropy_with_spectrum(rho, &spec).as_f64();
    Ok((value, spec))
}

/// Nearest unit-trace PSD matrix in Frobenius norm.
fn project_density(y: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spec = eigh(y, EIG_TOL)?;
    let mut sorted = spec.values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            shift = t;
        }
    }
    spec.apply(|x| (x - shift).max(0.0))
}

/// Dykstra projection onto `{σ ≥ 0, Tr σ = 1, σ^Γ ≥ 0}`. Whatever partial
/// transpose negativity remains after the iteration cap is removed by mixing
/// in white noise, so the result is always PPT. The flag reports whether
/// Dykstra met its tolerance.
fn project_ppt(y: &ComplexMatrix, dims: [usize; 2]) -> Result<(ComplexMatrix, bool)> {
    let n = y.rows();
    let mut x = y.clone();
    let mut p = ComplexMatrix::zeros(n, n);
    let mut q = ComplexMatrix::zeros(n, n);
    let mut a = x.clone();
    for _ in 0..DYKSTRA_MAX_ITER {
        a = project_density(&(&x + &p))?;
        p = &(&x + &p) - &a;
        let aq = &a + &q;
        let b = partial_transpose(&project_density(&partial_transpose(&aq, &dims, &[1])?)?, &dims, &[1])?;
        q = &aq - &b;
        let gap = a.max_abs_diff(&b);
        let change = b.max_abs_diff(&x);
        x = b;
        if gap < DYKSTRA_TOL && change < DYKSTRA_TOL {
            return Ok((make_ppt(a, dims)?, true));
        }
    }
    Ok((make_ppt(a, dims)?, false))
}

fn make_ppt(a: ComplexMatrix, dims: [usize; 2]) -> Result<ComplexMatrix> {
    let n = a.rows() as f64;
    let m = eigh(&partial_transpose(&a, &dims, &[1])?, EIG_TOL)?.values[0];
    if m >= 0.0 {
        return Ok(a);
    }
    let eps = n * -m / (1.0 + n * -m);
    Ok(&a.scale_real(1.0 - eps) + &ComplexMatrix::identity(a.rows()).scale_real(eps / n))
}

fn hs(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.trace_product_re(b)
}

/// `-Tr ρ ln σ`, or `None` when `ρ` leaves the support of `σ`.
fn cross_entropy_nat(rho: &DensityMatrix, sigma: &Spectrum) -> Option<f64> {
    let mut cross = 0.0;
    for (k, &mu) in sigma.values.iter().enumerate() {
        let v = sigma.vector(k);
        let weight = rho.matrix().sandwich(&v, &v).re;
        if mu <= KERNEL_TOL {
            if weight > 1e-12 {
                return None;
            }
            continue;
        }
        cross -= weight * mu.ln();
    }
    Some(cross)
}

/// Rigorous lower bound on `min_{τ ∈ PPT} S(ρ‖τ)` from any state `σ`.
///
/// Convexity gives `S(ρ‖τ) ≥ S(ρ‖σ) - (⟨D, τ⟩ - ⟨D, σ⟩)/ln 2` with
/// `D = dlog_σ[ρ]`, and for every `Q ≥ 0` and PPT `τ`,
/// `⟨D, τ⟩ ≤ λ_max(D + Q^Γ)`. `Q = BB^†` is tuned by minimizing a
/// soft maximum of the spectrum; the bound holds for whatever `Q` results.
fn dual_certificate(rho: &DensityMatrix, sigma: &ComplexMatrix, dims: [usize; 2], iters: usize) -> Result<f64> {
    const MIX: f64 = 1e-9;
    let n = rho.dim();
    let sigma = &sigma.scale_real(1.0 - MIX) + &ComplexMatrix::identity(n).scale_real(MIX / n as f64);
    let (f, spec) = objective(rho, &sigma)?;
    if !f.is_finite() {
        return Ok(0.0);
    }
    let d = log_derivative(&spec, rho.matrix());
    let c = hs(&d, &sigma);
    let lmax = |q: &ComplexMatrix| -> Result<f64> {
        let a = &d + &partial_transpose(q, &dims, &[1])?;
        Ok(*eigh(&a, EIG_TOL)?.values.last().expect("nonempty"))
    };
    let mut h = lmax(&ComplexMatrix::zeros(n, n))?;
    if iters > 0 {
        let mut x: Vec<f64> = (0..n * n).flat_map(|k| [if k % (n + 1) == 0 { 0.1 } else { 0.0 }, 0.0]).collect();
        for beta in [30.0, 300.0, 3e3, 3e4] {
            let fg = |x: &[f64]| -> (f64, Vec<f64>) {
                let b = unpack_matrix(x, n);
                let q = &b * &b.adjoint();
                let a = &d + &partial_transpose(&q, &dims, &[1]).expect("dims checked");
                let Ok(sp) = eigh(&a, EIG_TOL) else {
                    return (f64::INFINITY, vec![0.0; x.len()]);
                };
                let top = *sp.values.last().expect("nonempty");
                let w: Vec<f64> = sp.values.iter().map(|m| (beta * (m - top)).exp()).collect();
                let z: f64 = w.iter().sum();
                let soft = sp.apply_indexed(|k| w[k] / z);
                let gq = partial_transpose(&soft, &dims, &[1]).expect("dims checked");
                let grad = (&gq * &b).scale_real(2.0);
                (top + z.ln() / beta, pack_matrix(&grad))
            };
            let res = minimize(fg, x, &LbfgsOptions { max_iter: iters, ..LbfgsOptions::default() });
            x = res.x;
            let b = unpack_matrix(&x, n);
            h = h.min(lmax(&(&b * &b.adjoint()))?);
        }
    }
    Ok(f - (h - c) / LN_2)
}

fn pack_matrix(m: &ComplexMatrix) -> Vec<f64> {
    m.as_slice().iter().flat_map(|z| [z.re, z.im]).collect()
}

fn unpack_matrix(x: &[f64], n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| C64::new(x[2 * (i * n + j)], x[2 * (i * n + j) + 1]))
}

/// Outcome of the PPT descent.
#[derive(Clone, Debug, Serialize)]
pub struct PptBound {
    /// Certified lower bound on `E_R`, clamped at zero.
    pub value: f64,
    /// Best PPT objective reached by the descent.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the initial point.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// Lower bound on `E_R` through the PPT relaxation.
///
/// Runs projected gradient descent on `σ ↦ S(ρ‖σ)` over PPT states (spectral
/// step length, Dykstra projection, Armijo halving from a unit step along the
/// projected direction) and then certifies a lower bound at the final iterate
/// by convex duality. The objective never increases between accepted steps.
/// `converged` means the predicted decrease fell below `tol`; `value` is a
/// valid lower bound either way.
pub fn er_lower_ppt(rho: &DensityMatrix, dims: [usize; 2], tol: f64, max_iter: usize) -> Result<PptBound> {
    er_lower_ppt_with(rho, dims, tol, max_iter, CERT_ITER)
}

const CERT_ITER: usize = 200;

fn er_lower_ppt_with(rho: &DensityMatrix, dims: [usize; 2], tol: f64, max_iter: usize, cert_iter: usize) -> Result<PptBound> {
    check_bipartite(rho, dims)?;
    let n = rho.dim();
    let mut sigma = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new((1.0 - INIT_NOISE) * rho.matrix()[(i, i)].re.max(0.0) + INIT_NOISE / n as f64, 0.0)
        } else {
            ZERO
        }
    });
    let (mut f, spec) = objective(rho, &sigma)?;
    let mut grad = log_derivative(&spec, rho.matrix()).scale_real(-1.0 / LN_2);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    let mut t = 1.0;
    'outer: while iterations < max_iter {
        iterations += 1;
        let (target, _) = project_ppt(&(&sigma - &grad.scale_real(t)), dims)?;
        let dir = &target - &sigma;
        let slope = hs(&grad, &dir);
        if -slope <= tol {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        loop {
            let cand = &sigma + &dir.scale_real(alpha);
            let (fc, sc) = objective(rho, &cand)?;
            if fc < f && fc <= f + 1e-4 * alpha * slope {
                let g_new = log_derivative(&sc, rho.matrix()).scale_real(-1.0 / LN_2);
                let s = &cand - &sigma;
                let y = &g_new - &grad;
                let sy = hs(&s, &y);
                t = if sy > 0.0 { (hs(&s, &s) / sy).clamp(1e-10, 1e10) } else { 1.0 };
                sigma = cand;
                grad = g_new;
                f = fc;
                trace.push(f);
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                converged = true;
                break 'outer;
            }
        }
    }
    let certified = dual_certificate(rho, &sigma, dims, cert_iter)?;
    Ok(PptBound {
        value: certified.clamp(0.0, f.max(0.0)),
        objective: f.max(0.0),
        converged,
        iterations,
        objective_trace: trace,
    })
}

/// Settings for [`er_seesaw_upper`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeesawOptions {
    /// Ensemble size; `None` means `(d_A d_B)²`.
    pub capacity: Option<usize>,
    pub restarts: usize,
    /// Gradient tolerance of the local optimization.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Also try the built-in structured starting states. Ignored when no
    /// hints are given.
    pub structured: bool,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            capacity: None,
            restarts: 2,
            tol: 1e-10,
            max_iter: 1000,
            seed: 0,
            structured: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeesawBound {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub witness: SeparableEnsemble,
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..d)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Packs atoms as `√w_k l_k` followed by `r_k`, real and imaginary parts
/// interleaved.
fn pack_atoms(atoms: &[Atom], weights: &[f64]) -> Vec<f64> {
    let mut x = Vec::new();
    for (a, w) in atoms.iter().zip(weights) {
        let s = w.max(0.0).sqrt();
        x.extend(a.left.iter().flat_map(|z| [z.re * s, z.im * s]));
        x.extend(a.right.iter().flat_map(|z| [z.re, z.im]));
    }
    x
}

fn unpack_atoms(x: &[f64], dims: [usize; 2]) -> Vec<(Vec<C64>, Vec<C64>)> {
    let [da, db] = dims;
    x.chunks(2 * (da + db))
        .map(|c| {
            let l = (0..da).map(|i| C64::new(c[2 * i], c[2 * i + 1])).collect();
            let r = (0..db).map(|i| C64::new(c[2 * (da + i)], c[2 * (da + i) + 1])).collect();
            (l, r)
        })
        .collect()
}

/// `-Tr ρ ln σ + Tr σ - 1 - S_nat(ρ)` for the unnormalized ensemble in `x`.
/// At unit trace this is the relative entropy in nats, and it is never
/// below the relative entropy to the normalized ensemble.
fn ensemble_objective(rho: &DensityMatrix, s_nat: f64, dims: [usize; 2], x: &[f64]) -> (f64, Vec<f64>) {
    let n = rho.dim();
    let [da, db] = dims;
    let parts = unpack_atoms(x, dims);
    let vecs: Vec<Vec<C64>> = parts.iter().map(|(l, r)| tensor_vec(l, r)).collect();
    let mut sigma = ComplexMatrix::zeros(n, n);
    for v in &vecs {
        add_projector(&mut sigma, v, 1.0);
    }
    let Ok(spec) = eigh(&sigma, EIG_TOL) else {
        return (f64::INFINITY, vec![0.0; x.len()]);
    };
    let Some(cross) = cross_entropy_nat(rho, &spec) else {
        return (f64::INFINITY, vec![0.0; x.len()]);
    };
    let value = cross + sigma.trace().re - 1.0 - s_nat;
    let m = &ComplexMatrix::identity(n) - &log_derivative(&spec, rho.matrix());
    let mut grad = Vec::with_capacity(x.len());
    for ((l, r), v) in parts.iter().zip(&vecs) {
        let mv = m.mul_vec(v);
        for a in 0..da {
            let y: C64 = (0..db).map(|b| mv[a * db + b] * r[b].conj()).sum();
            grad.extend([2.0 * y.re, 2.0 * y.im]);
        }
        for b in 0..db {
            let y: C64 = (0..da).map(|a| mv[a * db + b] * l[a].conj()).sum();
            grad.extend([2.0 * y.re, 2.0 * y.im]);
        }
    }
    (value, grad)
}

/// Exact relative entropy (bits) to the normalized ensemble in `x`, with the
/// ensemble itself.
fn finish_ensemble(rho: &DensityMatrix, dims: [usize; 2], x: &[f64]) -> Result<(f64, Vec<Atom>, Vec<f64>)> {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (l, r) in unpack_atoms(x, dims) {
        let nl = l.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let nr = r.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let w = nl * nr;
        if w <= 1e-300 {
            continue;
        }
        let (sl, sr) = (nl.sqrt(), nr.sqrt());
        atoms.push(Atom::new(l.iter().map(|z| z / sl).collect(), r.iter().map(|z| z / sr).collect()));
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let (value, _) = objective(rho, &build_sigma(&atoms, &weights, rho.dim()))?;
    Ok((value, atoms, weights))
}

fn build_sigma(atoms: &[Atom], weights: &[f64], n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for (a, &w) in atoms.iter().zip(weights) {
        if w != 0.0 {
            m = &m + &a.projector.scale_real(w);
        }
    }
    m
}

/// Upper bound on `E_R` from an explicit separable state.
///
/// Starts from the best of several structured separable states (marginal
/// product, Schmidt-dephased eigenvectors, computational dephasing, and any
/// caller `hints`), pads it to `capacity` product atoms, and optimizes all
/// weights and local vectors jointly by L-BFGS. The result is the relative
/// entropy to the final ensemble, never worse than the best starting state.
pub fn er_seesaw_upper(
    rho: &DensityMatrix,
    dims: [usize; 2],
    opts: &SeesawOptions,
    hints: &[SeparableEnsemble],
) -> Result<SeesawBound> {
    check_bipartite(rho, dims)?;
    for h in hints {
        if h.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "hint ensemble has dims {:?}, expected {dims:?}",
                h.dims()
            )));
        }
    }
    let n = rho.dim();
    let capacity = opts.capacity.unwrap_or(n * n).max(1);

    let mut candidates = Vec::new();
    if opts.structured || hints.is_empty() {
        candidates.push(schmidt_dephased(rho, dims)?);
        candidates.push(product_of_marginals(rho, dims)?);
        candidates.push(computational_dephased(rho, dims)?);
    }
    candidates.extend(hints.iter().cloned());
    let mut best: Option<(f64, Vec<Atom>, Vec<f64>)> = None;
    for c in &candidates {
        let atoms = c.atoms();
        let (v, _) = objective(rho, &build_sigma(&atoms, c.weights(), n))?;
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, atoms, c.weights().to_vec()));
        }
    }
    let (start_value, start_atoms, start_weights) = best.expect("at least one candidate");
    let mut best = (start_value, false, start_atoms.clone(), start_weights.clone());
    if start_value <= 1e-12 {
        best.1 = true;
    }

    let s_nat = von_neumann_entropy(rho) * LN_2;
    let mut iterations = 0;
    if opts.max_iter > 0 && !best.1 {
        for restart in 0..opts.restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, restart as u64));
            let (mut atoms, mut weights) = (start_atoms.clone(), start_weights.clone());
            let keep = if restart == 0 { 0.999 } else { 0.5 };
            weights.iter_mut().for_each(|w| *w *= keep);
            let extra = capacity.saturating_sub(atoms.len()).max(1);
            for _ in 0..extra {
                atoms.push(Atom::new(random_unit(&mut rng, dims[0]), random_unit(&mut rng, dims[1])));
                weights.push((1.0 - keep) / extra as f64);
            }
            let res = minimize(
                |x| ensemble_objective(rho, s_nat, dims, x),
                pack_atoms(&atoms, &weights),
                &LbfgsOptions {
                    max_iter: opts.max_iter,
                    gtol: opts.tol,
                    ..LbfgsOptions::default()
                },
            );
            iterations += res.iterations;
            let (value, atoms, weights) = finish_ensemble(rho, dims, &res.x)?;
            if value < best.0 {
                best = (value, res.converged, atoms, weights);
            }
        }
    }
    let (value, converged, atoms, weights) = best;
    Ok(SeesawBound {
        value: value.max(0.0),
        converged,
        iterations,
        witness: SeparableEnsemble::from_atoms(&atoms, &weights)?,
    })
}

/// Effort for both bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErBudget {
    pub lower_tol: f64,
    pub lower_max_iter: usize,
    /// Optimizer iterations per stage of each duality certificate.
    pub certificate_iter: usize,
    /// The lower bound counts as converged once it is within this of the
    /// best PPT objective found.
    pub gap_tol: f64,
    pub upper: SeesawOptions,
}

impl Default for ErBudget {
    fn default() -> Self {
        Self {
            lower_tol: 1e-10,
            lower_max_iter: 500,
            certificate_iter: CERT_ITER,
            gap_tol: 1e-3,
            upper: SeesawOptions::default(),
        }
    }
}

impl ErBudget {
    /// Budget shrunk to what a total dimension `d` affords. Past 6 dims the
    /// PPT descent is skipped and the lower bound rests on the certificate at
    /// the upper-bound witness; past 12 dims only structured separable states
    /// are tried; past 27 dims only the caller's hints, when there are any.
    pub fn for_dim(self, d: usize) -> Self {
        let (lower, cert, upper) = match d {
            0..=6 => (self.lower_max_iter, self.certificate_iter, self.upper.max_iter),
            7..=12 => (0, self.certificate_iter.min(50), self.upper.max_iter.min(100)),
            _ => (0, 0, 0),
        };
        Self {
            lower_max_iter: lower,
            certificate_iter: cert,
            upper: SeesawOptions {
                max_iter: upper,
                restarts: if d > 6 { 1 } else { self.upper.restarts },
                structured: d <= 27,
                ..self.upper
            },
            ..self
        }
    }
}

/// Two-sided estimate of `E_R`. Both ends are valid bounds; `lower ≤ upper`
/// up to 1e-6.
#[derive(Clone, Debug, Serialize)]
pub struct ERBracket {
    pub lower: f64,
    pub upper: f64,
    pub lower_converged: bool,
    pub upper_converged: bool,
    pub lower_iterations: usize,
    pub upper_iterations: usize,
    pub witness: SeparableEnsemble,
}

impl ERBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.lower - tol <= x && x <= self.upper + tol
    }
}

/// Runs both bounds. The lower end is the better of the duality certificates
/// at the PPT descent iterate and at the upper-bound witness.
pub fn er_bracket(rho: &DensityMatrix, dims: [usize; 2], budget: &ErBudget, hints: &[SeparableEnsemble]) -> Result<ERBracket> {
    let upper = er_seesaw_upper(rho, dims, &budget.upper, hints)?;
    let descent_cert = if budget.lower_max_iter > 0 { budget.certificate_iter } else { 0 };
    let ppt = er_lower_ppt_with(rho, dims, budget.lower_tol, budget.lower_max_iter, descent_cert)?;
    let at_witness = dual_certificate(rho, &upper.witness.matrix(), dims, budget.certificate_iter)?;
    let lower = ppt.value.max(at_witness).max(0.0);
    if lower > upper.value + 1e-6 {
        return Err(Error::BracketInversion {
            lower,
            upper: upper.value,
        });
    }
    let best_ppt = ppt.objective.min(upper.value);
    Ok(ERBracket {
        lower: lower.min(upper.value),
        upper: upper.value,
        lower_converged: best_ppt - lower <= budget.gap_tol,
        upper_converged: upper.converged,
        lower_iterations: ppt.iterations,
        upper_iterations: upper.iterations,
        witness: upper.witness,
    })
}
