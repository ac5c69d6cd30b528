//! Scalar information quantities of the measurement, all in bits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, partial_trace, ComplexMatrix, C64, EIG_TOL, ZERO};
use crate::measurement::{apparatus_channel, ApparatusChannel, FinalState, MeasurementModel, RecordFamily};
use crate::seeds::derive_seed;
use crate::states::{coherence_rel_ent, purify, shannon_entropy, von_neumann_entropy, Basis, DensityMatrix};

/// `{p_i, ρ_i}`
#[derive(Clone, Debug)]
pub struct Ensemble {
    probs: Vec<f64>,
    members: Vec<DensityMatrix>,
}

impl Ensemble {
    pub fn new(probs: Vec<f64>, members: Vec<DensityMatrix>) -> Result<Self> {
        if probs.len() != members.len() || probs.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} members",
                probs.len(),
                members.len()
            )));
        }
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidState("negative ensemble weight".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("ensemble weights sum to {total}")));
        }
        let d = members[0].dim();
        if members.iter().any(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch("ensemble members differ in dimension".into()));
        }
        Ok(Self { probs, members })
    }

    pub fn average(&self) -> Result<DensityMatrix> {
        let d = self.members[0].dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        for (p, m) in self.probs.iter().zip(&self.members) {
            acc = &acc + &m.matrix().scale_real(*p);
        }
        DensityMatrix::new(acc)
    }
}

/// `χ = S(Σ p_i ρ_i) − Σ p_i S(ρ_i)`
pub fn holevo(e: &Ensemble) -> Result<f64> {
    let avg = von_neumann_entropy(&e.average()?);
    let mean: f64 = e
        .probs
        .iter()
        .zip(&e.members)
        .map(|(p, m)| p * von_neumann_entropy(m))
        .sum();
    Ok((avg - mean).max(0.0))
}

/// The conditional apparatus ensemble `{|s_i|², ρ_ii}`.
pub fn record_ensemble(f: &FinalState, model: &MeasurementModel) -> Result<Ensemble> {
    let members = (0..model.system_dim())
        .map(|i| DensityMatrix::new(f.blocks[i][i].clone()))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(model.probabilities(), members)
}

/// Information gain `I_m = S(Σ|s_i|²ρ_ii) − Σ|s_i|² S(ρ_ii)`.
pub fn information_gain(f: &FinalState, model: &MeasurementModel) -> Result<f64> {
    let probs = model.probabilities();
    let mut avg = ComplexMatrix::zeros(model.apparatus_dim(), model.apparatus_dim());
    let mut mean = 0.0;
    for (i, p) in probs.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        avg = &avg + &f.blocks[i][i].scale_real(*p);
        mean += p * von_neumann_entropy(&DensityMatrix::new(f.blocks[i][i].clone())?);
    }
    Ok(von_neumann_entropy(&DensityMatrix::new(avg)?) - mean)
}

/// `I_c(S'⟩A') = S(ρ_A') − S(ρ_S'A')` for a joint state on `dims = [d_S, d_A]`.
pub fn coherent_information_state(joint: &DensityMatrix, dims: [usize; 2]) -> Result<f64> {
    let a = DensityMatrix::new(partial_trace(joint.matrix(), &dims, &[1])?)?;
    Ok(von_neumann_entropy(&a) - von_neumann_entropy(joint))
}

/// `I_c(ρ, Φ) = S(Φ(ρ)) − S((Φ ⊗ id)(|Ψ⟩⟨Ψ|))` with `|Ψ⟩` a purification of `ρ`.
pub fn coherent_information_channel(rho: &DensityMatrix, ch: &ApparatusChannel) -> Result<f64> {
    if ch.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "channel on {} dims applied to a {}-dim state",
            ch.dim(),
            rho.dim()
        )));
    }
    let n = rho.dim();
    let out = DensityMatrix::new(ch.apply(rho.matrix()))?;
    let extended = DensityMatrix::new(ch.apply_to_pure_first(&purify(rho), n)?)?;
    Ok(von_neumann_entropy(&out) - von_neumann_entropy(&extended))
}

/// Both routes to the entropy exchange: `S(ρ_A'E)` and `S(ρ_S')`.
#[derive(Clone, Copy, Debug)]
pub struct EntropyExchange {
    pub apparatus_environment: f64,
    pub system: f64,
}

pub fn entropy_exchange_routes(f: &FinalState) -> Result<EntropyExchange> {
    Ok(EntropyExchange {
        apparatus_environment: von_neumann_entropy(&f.apparatus_environment()?),
        system: von_neumann_entropy(&f.system_final),
    })
}

/// `S_e = S(ρ_A'E)`, cross-checked against `S(ρ_S')`.
pub fn entropy_exchange(f: &FinalState) -> Result<f64> {
    let r = entropy_exchange_routes(f)?;
    if (r.apparatus_environment - r.system).abs() > 1e-6 {
        return Err(Error::Consistency(format!(
            "S(ρ_A'E) = {} but S(ρ_S') = {}",
            r.apparatus_environment, r.system
        )));
    }
    Ok(r.apparatus_environment)
}

/// `D(ρ, Φ) = S(ρ) − I_c(ρ, Φ)`
pub fn disturbance(rho: &DensityMatrix, ch: &ApparatusChannel) -> Result<f64> {
    Ok(von_neumann_entropy(rho) - coherent_information_channel(rho, ch)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasuredSide {
    First,
    Second,
}

/// Search budget for [`classical_correlations`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerBudget {
    pub starts: usize,
    pub max_evaluations: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub seed: u64,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self {
            starts: 16,
            max_evaluations: 4000,
            initial_step: 0.4,
            min_step: 1e-6,
            seed: 0,
        }
    }
}

/// Best-found value of a supremum; a lower bound on the true value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub best_start: usize,
}

/// Classical correlations
/// `J = sup_{π} [S(ρ_u) − Σ_j p_j S(ρ_{u|π_j})]` over rank-one projective
/// measurements `π_j = W|j⟩⟨j|W†` on the measured side.
///
/// `W` is a product of Givens rotations, one angle and one phase per pair
/// of levels. Each start runs a coordinate pattern search; start 0 is the
/// computational basis and the rest are seeded from `budget.seed`. A start's
/// trajectory does not depend on the budget, so more budget never lowers the
/// returned value.
pub fn classical_correlations(
    rho: &DensityMatrix,
    dims: [usize; 2],
    side: MeasuredSide,
    budget: &OptimizerBudget,
) -> Result<CorrelationResult> {
    if dims[0] * dims[1] != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} do not match a {}-dim state",
            rho.dim()
        )));
    }
    let (measured, keep) = match side {
        MeasuredSide::First => (dims[0], 1),
        MeasuredSide::Second => (dims[1], 0),
    };
    let unmeasured = DensityMatrix::new(partial_trace(rho.matrix(), &dims, &[keep])?)?;
    let s_unmeasured = von_neumann_entropy(&unmeasured);
    let pairs: Vec<(usize, usize)> = (0..measured)
        .flat_map(|p| (p + 1..measured).map(move |q| (p, q)))
        .collect();
    let n_params = 2 * pairs.len();

    let objective = |x: &[f64]| -> f64 {
        let w = givens_unitary(measured, &pairs, x);
        s_unmeasured - conditional_entropy(rho.matrix(), dims, side, &w)
    };

    let mut best = CorrelationResult {
        value: f64::NEG_INFINITY,
        converged: true,
        evaluations: 0,
        best_start: 0,
    };
    for start in 0..budget.starts.max(1) {
        let mut x = vec![0.0; n_params];
        if start > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(budget.seed, start as u64));
            for (k, v) in x.iter_mut().enumerate() {
                *v = if k % 2 == 0 {
                    rng.random_range(0.0..std::f64::consts::PI)
                } else {
                    rng.random_range(0.0..std::f64::consts::TAU)
                };
            }
        }
        let (value, evals, converged) = pattern_search(&objective, &mut x, budget);
        best.evaluations += evals;
        best.converged &= converged;
        if value > best.value {
            best.value = value;
            best.best_start = start;
        }
    }
    Ok(best)
}

/// Coordinate pattern search maximizing `f`. A pass whose total gain is below
/// 1e-9 halves the step; convergence is the step falling under `min_step`.
fn pattern_search(f: &impl Fn(&[f64]) -> f64, x: &mut [f64], budget: &OptimizerBudget) -> (f64, usize, bool) {
    let mut fx = f(x);
    let mut evals = 1;
    if x.is_empty() {
        return (fx, evals, true);
    }
    let mut step = budget.initial_step;
    loop {
        let before = fx;
        for k in 0..x.len() {
            for dir in [1.0, -1.0] {
                if evals >= budget.max_evaluations {
                    return (fx, evals, false);
                }
                let old = x[k];
                x[k] = old + dir * step;
                let ft = f(x);
                evals += 1;
                if ft > fx {
                    fx = ft;
                    break;
                }
                x[k] = old;
            }
        }
        if fx - before < 1e-9 {
            step *= 0.5;
            if step < budget.min_step {
                return (fx, evals, true);
            }
        }
    }
}

fn givens_unitary(d: usize, pairs: &[(usize, usize)], x: &[f64]) -> ComplexMatrix {
    let mut w = ComplexMatrix::identity(d);
    for (k, &(p, q)) in pairs.iter().enumerate() {
        let (theta, phi) = (x[2 * k], x[2 * k + 1]);
        let (s, c) = theta.sin_cos();
        let e = C64::from_polar(1.0, phi);
        // Right-multiply by the rotation acting on columns p and q.
        for r in 0..d {
            let wp = w[(r, p)];
            let wq = w[(r, q)];
            w[(r, p)] = wp * c + wq * e * s;
            w[(r, q)] = -wp * e.conj() * s + wq * c;
        }
    }
    w
}

/// `Σ_j p_j S(ρ_{u|j})` for the projective measurement with basis columns of `w`.
fn conditional_entropy(rho: &ComplexMatrix, dims: [usize; 2], side: MeasuredSide, w: &ComplexMatrix) -> f64 {
    let [da, db] = dims;
    let (dm, du) = match side {
        MeasuredSide::First => (da, db),
        MeasuredSide::Second => (db, da),
    };
    let index = |m: usize, u: usize| match side {
        MeasuredSide::First => m * db + u,
        MeasuredSide::Second => u * db + m,
    };
    let mut total = 0.0;
    for j in 0..dm {
        let wj = w.column(j);
        let mut cond = ComplexMatrix::zeros(du, du);
        for u1 in 0..du {
            for u2 in u1..du {
                let mut acc = ZERO;
                for m1 in 0..dm {
                    let c1 = wj[m1].conj();
                    if c1 == ZERO {
                        continue;
                    }
                    for m2 in 0..dm {
                        acc += c1 * rho[(index(m1, u1), index(m2, u2))] * wj[m2];
                    }
                }
                cond[(u1, u2)] = acc;
                cond[(u2, u1)] = acc.conj();
            }
        }
        let p = cond.trace().re;
        if p <= 1e-15 {
            continue;
        }
        let eig = hermitian_eig(&cond, EIG_TOL).expect("conditional block is Hermitian");
        let probs: Vec<f64> = eig.values.iter().map(|v| (v / p).max(0.0)).collect();
        total += p * shannon_entropy(&probs);
    }
    total
}

/// Basis in which apparatus coherences are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApparatusBasisChoice {
    /// Eigenbasis of the initial apparatus state.
    #[default]
    Eigen,
    Standard,
}

impl ApparatusBasisChoice {
    pub fn basis(self, model: &MeasurementModel) -> Basis {
        match self {
            ApparatusBasisChoice::Eigen => model.apparatus_basis().clone(),
            ApparatusBasisChoice::Standard => Basis::standard(model.apparatus_dim()),
        }
    }
}

/// Every scalar quantity for one scenario.
#[derive(Clone, Debug, Serialize)]
pub struct QuantityReport {
    pub system_dim: usize,
    pub apparatus_dim: usize,
    pub seed: u64,
    pub record_family: RecordFamily,
    pub apparatus_basis: ApparatusBasisChoice,
    /// `I_m`
    pub information_gain: f64,
    /// `χ({|s_i|², ρ_ii})`
    pub holevo: f64,
    /// Best-found lower bound on `J(ρ^c_S'A')`, measuring the system.
    pub classical_correlations: f64,
    pub classical_correlations_converged: bool,
    /// `I_c(S'⟩A')`
    pub coherent_information_state: f64,
    /// `I_c(ρ_A, Φ)`
    pub coherent_information_channel: f64,
    /// `S_e = S(ρ_A'E)`
    pub entropy_exchange: f64,
    /// `S(ρ_S')`
    pub system_final_entropy: f64,
    /// `D(ρ_A, Φ)`
    pub disturbance: f64,
    pub coherence_initial_system: f64,
    pub coherence_final_system: f64,
    pub coherence_initial_apparatus: f64,
    pub coherence_final_apparatus: f64,
    /// `S(ρ_A)`
    pub apparatus_mixedness: f64,
    /// `S(ρ_A')`
    pub apparatus_final_entropy: f64,
    /// `S(ρ_S'A')`
    pub joint_entropy: f64,
}

impl QuantityReport {
    pub fn compute(
        model: &MeasurementModel,
        f: &FinalState,
        apparatus_basis: ApparatusBasisChoice,
        budget: &OptimizerBudget,
        seed: u64,
    ) -> Result<Self> {
        let (m, n) = (model.system_dim(), model.apparatus_dim());
        let ch = apparatus_channel(model);
        let app_basis = apparatus_basis.basis(model);
        let sys_basis = model.system_basis();
        let exchange = entropy_exchange_routes(f)?;
        let classical = classical_correlations(&f.classical_part(model)?, [m, n], MeasuredSide::First, budget)?;
        let initial_system = DensityMatrix::from_pure(&model.system_state());
        let channel_info = coherent_information_channel(model.apparatus(), &ch)?;
        let mixedness = von_neumann_entropy(model.apparatus());
        Ok(Self {
            system_dim: m,
            apparatus_dim: n,
            seed,
            record_family: model.family(),
            apparatus_basis,
            information_gain: information_gain(f, model)?,
            holevo: holevo(&record_ensemble(f, model)?)?,
            classical_correlations: classical.value,
            classical_correlations_converged: classical.converged,
            coherent_information_state: coherent_information_state(&f.joint, [m, n])?,
            coherent_information_channel: channel_info,
            entropy_exchange: exchange.apparatus_environment,
            system_final_entropy: exchange.system,
            disturbance: mixedness - channel_info,
            coherence_initial_system: coherence_rel_ent(&initial_system, &sys_basis)?,
            coherence_final_system: coherence_rel_ent(&f.system_final, &sys_basis)?,
            coherence_initial_apparatus: coherence_rel_ent(model.apparatus(), &app_basis)?,
            coherence_final_apparatus: coherence_rel_ent(&f.apparatus_final, &app_basis)?,
            apparatus_mixedness: mixedness,
            apparatus_final_entropy: von_neumann_entropy(&f.apparatus_final),
            joint_entropy: von_neumann_entropy(&f.joint),
        })
    }

    /// `(name, value)` for every real-valued field, in a fixed order.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("information_gain", self.information_gain),
            ("holevo", self.holevo),
            ("classical_correlations", self.classical_correlations),
            ("coherent_information_state", self.coherent_information_state),
            ("coherent_information_channel", self.coherent_information_channel),
            ("entropy_exchange", self.entropy_exchange),
            ("system_final_entropy", self.system_final_entropy),
            ("disturbance", self.disturbance),
            ("coherence_initial_system", self.coherence_initial_system),
            ("coherence_final_system", self.coherence_final_system),
            ("coherence_initial_apparatus", self.coherence_initial_apparatus),
            ("coherence_final_apparatus", self.coherence_final_apparatus),
            ("apparatus_mixedness", self.apparatus_mixedness),
            ("apparatus_final_entropy", self.apparatus_final_entropy),
            ("joint_entropy", self.joint_entropy),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tensor;
    use crate::measurement::{build_controlled_shift, evolve};
    use crate::states::{binary_entropy, PureState};
    use proptest::prelude::*;
    use rand::Rng;

    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn plus_amps() -> Vec<C64> {
        vec![C64::new(R, 0.0), C64::new(R, 0.0)]
    }

    fn scenario(apparatus: &[f64], amps: &[C64]) -> (MeasurementModel, FinalState) {
        let n = apparatus.len();
        let model = build_controlled_shift(amps.len(), n, amps, DensityMatrix::diagonal(apparatus).unwrap()).unwrap();
        let f = evolve(&model).unwrap();
        (model, f)
    }

    fn random_model(seed: u64, m: usize, n: usize) -> (MeasurementModel, FinalState) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<C64> = (0..m)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let amps = PureState::normalized(amps).unwrap().amplitudes().to_vec();
        let g = ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let rho = DensityMatrix::normalized(&g * &g.adjoint()).unwrap();
        let model = build_controlled_shift(m, n, &amps, rho).unwrap();
        let f = evolve(&model).unwrap();
        (model, f)
    }

    fn mixed_09_gain() -> f64 {
        1.0 - binary_entropy(0.9)
    }

    #[test]
    fn holevo_examples() {
        let e = Ensemble::new(
            vec![0.5, 0.5],
            vec![DensityMatrix::diagonal(&[1.0, 0.0]).unwrap(), DensityMatrix::diagonal(&[0.0, 1.0]).unwrap()],
        )
        .unwrap();
        assert!((holevo(&e).unwrap() - 1.0).abs() < 1e-14);
        let single = Ensemble::new(vec![1.0], vec![DensityMatrix::diagonal(&[0.3, 0.7]).unwrap()]).unwrap();
        assert!(holevo(&single).unwrap().abs() < 1e-14);
        let e = Ensemble::new(
            vec![0.5, 0.5],
            vec![DensityMatrix::diagonal(&[0.9, 0.1]).unwrap(), DensityMatrix::diagonal(&[0.1, 0.9]).unwrap()],
        )
        .unwrap();
        assert!((holevo(&e).unwrap() - mixed_09_gain()).abs() < 1e-13);
        assert!((holevo(&e).unwrap() - 0.531004).abs() < 1e-6);
        assert!(Ensemble::new(vec![0.6, 0.6], e.members.clone()).is_err());
    }

    #[test]
    fn information_gain_examples() {
        let (model, f) = scenario(&[1.0, 0.0], &plus_amps());
        assert!((information_gain(&f, &model).unwrap() - 1.0).abs() < 1e-12);
        let (model, f) = scenario(&[0.5, 0.5], &plus_amps());
        assert!(information_gain(&f, &model).unwrap().abs() < 1e-12);
        let (model, f) = scenario(&[0.9, 0.1], &plus_amps());
        assert!((information_gain(&f, &model).unwrap() - mixed_09_gain()).abs() < 1e-12);
    }

    #[test]
    fn coherent_information_state_examples() {
        let bell = [C64::new(R, 0.0), ZERO, ZERO, C64::new(R, 0.0)];
        let rho = DensityMatrix::new(ComplexMatrix::projector(&bell)).unwrap();
        assert!((coherent_information_state(&rho, [2, 2]).unwrap() - 1.0).abs() < 1e-12);
        let product = tensor(
            &ComplexMatrix::from_real_diagonal(&[1.0, 0.0]),
            &ComplexMatrix::from_real_diagonal(&[0.7, 0.3]),
        );
        let rho = DensityMatrix::new(product).unwrap();
        assert!(coherent_information_state(&rho, [2, 2]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn channel_quantities_examples() {
        let rho = DensityMatrix::diagonal(&[0.9, 0.1]).unwrap();
        let id = ApparatusChannel::identity(2);
        assert!((coherent_information_channel(&rho, &id).unwrap() - binary_entropy(0.9)).abs() < 1e-12);
        assert!(disturbance(&rho, &id).unwrap().abs() < 1e-12);

        let (model, _) = scenario(&[0.9, 0.1], &plus_amps());
        let pure = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let ch = apparatus_channel(&model);
        assert!(coherent_information_channel(&pure, &ch).unwrap().abs() < 1e-12);
        assert!(disturbance(&pure, &ch).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mixed_09_channel_routes_agree() {
        let (model, f) = scenario(&[0.9, 0.1], &plus_amps());
        let ch = apparatus_channel(&model);
        let via_channel = coherent_information_channel(model.apparatus(), &ch).unwrap();
        let via_tripartite = von_neumann_entropy(&f.apparatus_final) - von_neumann_entropy(&f.apparatus_environment().unwrap());
        assert!((via_channel - via_tripartite).abs() <= 1e-9);
        assert!(via_channel.abs() < 1e-12);
        let d = disturbance(model.apparatus(), &ch).unwrap();
        assert!((d - binary_entropy(0.9)).abs() < 1e-12);
        assert!((d - 0.468996).abs() < 1e-6);
    }

    #[test]
    fn entropy_exchange_examples() {
        let (_, f) = scenario(&[1.0, 0.0], &plus_amps());
        assert!((entropy_exchange(&f).unwrap() - 1.0).abs() < 1e-12);
        let (_, f) = scenario(&[0.9, 0.1], &[C64::new(1.0, 0.0), ZERO]);
        assert!(entropy_exchange(&f).unwrap().abs() < 1e-12);
        let (_, f) = scenario(&[0.9, 0.1], &plus_amps());
        assert!((entropy_exchange(&f).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unitary_channel_has_no_disturbance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = ComplexMatrix::from_fn(3, 3, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).hermitian_part();
        let u = hermitian_eig(&h, EIG_TOL).unwrap().vectors;
        let g = ComplexMatrix::from_fn(3, 3, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let rho = DensityMatrix::normalized(&g * &g.adjoint()).unwrap();
        let ch = ApparatusChannel::unitary(u).unwrap();
        assert!(disturbance(&rho, &ch).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn classical_correlations_examples() {
        let budget = OptimizerBudget::default();
        // Σ p_i |i⟩⟨i| ⊗ |i⟩⟨i|
        let p = [0.2, 0.3, 0.5];
        let mut m = ComplexMatrix::zeros(9, 9);
        for (i, pi) in p.iter().enumerate() {
            m[(i * 3 + i, i * 3 + i)] = C64::new(*pi, 0.0);
        }
        let rho = DensityMatrix::new(m).unwrap();
        for side in [MeasuredSide::First, MeasuredSide::Second] {
            let j = classical_correlations(&rho, [3, 3], side, &budget).unwrap();
            assert!((j.value - shannon_entropy(&p)).abs() < 1e-9, "{side:?}: {j:?}");
        }

        let product = DensityMatrix::new(tensor(
            &ComplexMatrix::from_real_rows(&[&[0.6, 0.2], &[0.2, 0.4]]),
            &ComplexMatrix::from_real_diagonal(&[0.3, 0.7]),
        ))
        .unwrap();
        let j = classical_correlations(&product, [2, 2], MeasuredSide::First, &budget).unwrap();
        assert!(j.value.abs() < 1e-6);
    }

    #[test]
    fn classical_correlations_of_qc_state_equal_gain() {
        let (model, f) = scenario(&[0.9, 0.1], &plus_amps());
        let qc = f.classical_part(&model).unwrap();
        let j = classical_correlations(&qc, [2, 2], MeasuredSide::First, &OptimizerBudget::default()).unwrap();
        assert!((j.value - 0.531004).abs() < 1e-6);
        assert!(j.value <= mixed_09_gain() + 1e-9);
    }

    #[test]
    fn classical_correlations_finds_rotated_optimum() {
        // Flag basis rotated away from computational: only the search finds it.
        let theta: f64 = 0.7;
        let u = ComplexMatrix::from_real_rows(&[&[theta.cos(), -theta.sin()], &[theta.sin(), theta.cos()]]);
        let mut m = ComplexMatrix::zeros(4, 4);
        for (i, p) in [0.25, 0.75].iter().enumerate() {
            let flag = u.column(i);
            let mut b = [ZERO; 2];
            b[i] = C64::new(1.0, 0.0);
            let v = crate::linalg::tensor_vec(&flag, &b);
            m = &m + &ComplexMatrix::projector(&v).scale_real(*p);
        }
        let rho = DensityMatrix::new(m).unwrap();
        let j = classical_correlations(&rho, [2, 2], MeasuredSide::First, &OptimizerBudget::default()).unwrap();
        assert!((j.value - binary_entropy(0.25)).abs() < 1e-8, "{j:?}");
    }

    #[test]
    fn classical_correlations_monotone_in_budget() {
        let (model, f) = random_model(5, 3, 3);
        let rho = f.joint.clone();
        let _ = model;
        let mut last = f64::NEG_INFINITY;
        for (starts, evals) in [(1, 10), (1, 50), (2, 50), (4, 200), (8, 2000)] {
            let budget = OptimizerBudget {
                starts,
                max_evaluations: evals,
                seed: 9,
                ..OptimizerBudget::default()
            };
            let j = classical_correlations(&rho, [3, 3], MeasuredSide::First, &budget).unwrap();
            assert!(j.value >= last, "budget ({starts},{evals}) lowered J");
            last = j.value;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn gain_identities_hold(seed in any::<u64>(), dims in prop::sample::select(vec![(2usize, 2usize), (2, 3), (3, 3), (2, 5)])) {
            let (model, f) = random_model(seed, dims.0, dims.1);
            let im = information_gain(&f, &model).unwrap();
            let ic = coherent_information_state(&f.joint, [dims.0, dims.1]).unwrap();
            prop_assert!((im - ic).abs() <= 1e-9);
            let chi = holevo(&record_ensemble(&f, &model).unwrap()).unwrap();
            prop_assert!((im - chi).abs() <= 1e-9);
            let alt = von_neumann_entropy(&f.apparatus_final) - von_neumann_entropy(model.apparatus());
            prop_assert!((im - alt).abs() <= 1e-9);
            let c0 = coherence_rel_ent(&DensityMatrix::from_pure(&model.system_state()), &model.system_basis()).unwrap();
            prop_assert!(c0 >= im - 1e-9);
            let se = entropy_exchange(&f).unwrap();
            prop_assert!(im <= se + 1e-9);
            let d = disturbance(model.apparatus(), &apparatus_channel(&model)).unwrap();
            prop_assert!(d >= -1e-9);
            prop_assert!(d <= 2.0 * (dims.1 as f64).log2() + 1e-9);
        }
    }

    #[test]
    fn report_fields_in_range() {
        let (model, f) = random_model(21, 3, 4);
        let r = QuantityReport::compute(&model, &f, ApparatusBasisChoice::Eigen, &OptimizerBudget::default(), 21).unwrap();
        assert!(r.information_gain >= -1e-9);
        assert!(r.coherence_initial_apparatus.abs() < 1e-9);
        let log_m = 3f64.log2();
        let log_n = 4f64.log2();
        assert!(r.coherence_initial_system <= log_m + 1e-9);
        assert!(r.coherence_final_apparatus <= log_n + 1e-9);
        assert!(r.apparatus_mixedness <= log_n + 1e-9);
        assert!(r.entropy_exchange <= 2.0 * log_n + 1e-9);
        assert_eq!(r.fields().len(), 15);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["record_family"], "controlled_shift");
    }
}
