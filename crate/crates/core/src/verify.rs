//! Random scenarios, the relation suite and the saturation probes.
//!
//! Every relation becomes an [`InequalityRecord`]. Relations involving `E_R`
//! go through [`certify_at_most`] or [`certify_at_least`], which only accept
//! the bound type that can certify the claim:
//!
//! ```
//! use qmeasure::verify::{certify_at_most, ErLower, ErUpper, Relation};
//! fn check(upper: ErUpper) -> qmeasure::Result<()> {
//!     let rec = certify_at_most(Relation::G, 0.2, upper, 1.0, 5e-3, || Ok(None::<ErLower>))?;
//!     assert!(rec.direction_sound || rec.verdict != qmeasure::verify::Verdict::Holds);
//!     Ok(())
//! }
//! ```
//!
//! Passing a lower bound where an upper bound is needed does not compile:
//!
//! ```compile_fail
//! use qmeasure::verify::{certify_at_most, ErLower, Relation};
//! fn check(lower: ErLower) {
//!     let _ = certify_at_most(Relation::G, 0.2, lower, 1.0, 5e-3, || Ok(None::<ErLower>));
//! }
//! ```
//!
//! ```compile_fail
//! use qmeasure::verify::{certify_at_least, ErUpper, Relation};
//! fn check(upper: ErUpper) {
//!     let _ = certify_at_least(Relation::A, upper, 0.5, 5e-3, None);
//! }
//! ```

use std::cell::OnceCell;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::entanglement::{er_bracket, er_pure, er_seesaw_upper, ERBracket, ErBudget, PptBound, SeesawBound, SeparableEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::measurement::{build_controlled_shift, evolve, FinalState, MeasurementModel, ScenarioConfig};
use crate::quantities::{
    coherent_information_state, entropy_exchange_routes, information_gain, ApparatusBasisChoice, OptimizerBudget,
    QuantityReport,
};
use crate::seeds::derive_seed;
use crate::states::{DensityMatrix, PureState};

/// Bumped whenever sampling changes; part of every report.
pub const GENERATOR_VERSION: u32 = 1;

pub fn version_tag() -> String {
    format!("qmeasure {} generator {}", env!("CARGO_PKG_VERSION"), GENERATOR_VERSION)
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Haar-random unit vector in `d` dimensions.
pub fn sample_haar_pure(d: usize, seed: u64) -> PureState {
    assert!(d >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let amps: Vec<C64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        if let Ok(psi) = PureState::normalized(amps) {
            return psi;
        }
    }
}

/// Ginibre-random state `GG†/Tr(GG†)` with `G` of shape `d × rank`.
pub fn sample_density(d: usize, rank: usize, seed: u64) -> DensityMatrix {
    assert!(rank >= 1 && rank <= d, "rank must lie in 1..=d");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = ComplexMatrix::from_fn(d, rank, |_, _| gaussian(&mut rng));
    DensityMatrix::normalized((&g * &g.adjoint()).hermitian_part()).expect("Ginibre product is a valid state")
}

/// One random scenario: Haar system amplitudes, full-rank Ginibre apparatus,
/// controlled-shift records.
#[derive(Clone, Debug)]
pub struct ScenarioSample {
    pub model: MeasurementModel,
    pub seed: u64,
    pub dims: (usize, usize),
}

impl ScenarioSample {
    pub fn generate(dims: (usize, usize), seed: u64) -> Result<Self> {
        let (m, n) = dims;
        let psi = sample_haar_pure(m, derive_seed(seed, 0));
        let rho_a = sample_density(n, n, derive_seed(seed, 1));
        let model = build_controlled_shift(m, n, psi.amplitudes(), rho_a)?;
        Ok(Self { model, seed, dims })
    }

    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig::from_model(&self.model, self.seed)
    }
}

/// The checked relations, in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
    K,
    L,
    M,
}

impl Relation {
    pub const ALL: [Relation; 13] = [
        Relation::A,
        Relation::B,
        Relation::C,
        Relation::D,
        Relation::E,
        Relation::F,
        Relation::G,
        Relation::H,
        Relation::I,
        Relation::J,
        Relation::K,
        Relation::L,
        Relation::M,
    ];

    pub fn letter(self) -> &'static str {
        match self {
            Relation::A => "a",
            Relation::B => "b",
            Relation::C => "c",
            Relation::D => "d",
            Relation::E => "e",
            Relation::F => "f",
            Relation::G => "g",
            Relation::H => "h",
            Relation::I => "i",
            Relation::J => "j",
            Relation::K => "k",
            Relation::L => "l",
            Relation::M => "m",
        }
    }

    pub fn statement(self) -> &'static str {
        match self {
            Relation::A => "E_R(S'A') >= I_m",
            Relation::B => "I_m + C_R(A') + S(A) <= log N",
            Relation::C => "I_m + S(A) <= log N",
            Relation::D => "I_m <= C_R(Psi_S)",
            Relation::E => "I_m <= S_e",
            Relation::F => "I_m + C_R(S') <= log M",
            Relation::G => "E_R(A'E) + I_m <= S(A')",
            Relation::H => "E_R(A'E) + I_m + C_R(A') <= log N",
            Relation::I => "C_R(A) + E_R(AE) <= log N",
            Relation::J => "C_R(A') + E_R(S'A') <= log N",
            Relation::K => "D + I_m + C_R(A') <= 2 log N",
            Relation::L => "|I_m - I_c(S'>A')| <= tol",
            Relation::M => "J(S'A' classical part) = I_m",
        }
    }

    pub fn uses_er(self) -> bool {
        matches!(self, Relation::A | Relation::G | Relation::H | Relation::I | Relation::J)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

/// Which `E_R` bound produced the record's numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundUsed {
    Lower,
    Upper,
}

/// `slack = rhs − lhs`; the relation holds when `slack ≥ −tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub sample_index: usize,
    pub dims: [usize; 2],
    pub relation: Relation,
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tol: f64,
    pub direction_sound: bool,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bound: Option<BoundUsed>,
}

impl InequalityRecord {
    fn new(relation: Relation, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            sample_index: 0,
            dims: [0, 0],
            relation,
            name: relation.statement().to_string(),
            lhs,
            rhs,
            slack: rhs - lhs,
            tol,
            direction_sound: true,
            verdict: Verdict::Holds,
            bound: None,
        }
    }

    fn judged(mut self) -> Self {
        self.verdict = if self.slack >= -self.tol { Verdict::Holds } else { Verdict::Violated };
        self
    }
}

/// `lhs ≤ rhs` between directly computed quantities.
pub fn plain_record(relation: Relation, lhs: f64, rhs: f64, tol: f64) -> InequalityRecord {
    InequalityRecord::new(relation, lhs, rhs, tol).judged()
}

/// A certified `E_R ≥ value`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErLower(f64);

/// A certified `E_R ≤ value`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErUpper(f64);

impl ErLower {
    pub fn from_bracket(b: &ERBracket) -> Self {
        Self(b.lower)
    }

    pub fn from_ppt(b: &PptBound) -> Self {
        Self(b.value)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl ErUpper {
    pub fn from_bracket(b: &ERBracket) -> Self {
        Self(b.upper)
    }

    pub fn from_seesaw(b: &SeesawBound) -> Self {
        Self(b.value)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Both bounds for a pure state, where `E_R` is known exactly.
pub fn pure_bounds(psi: &PureState, dims: [usize; 2]) -> Result<(ErLower, ErUpper)> {
    let v = er_pure(psi, dims)?;
    Ok((ErLower(v), ErUpper(v)))
}

/// Record for `extra + E_R ≤ rhs`.
///
/// The upper bound certifies. When it cannot, `refute` is asked for a lower
/// bound, which turns the record into a violation only if even the lower end
/// breaks the relation; otherwise the record is inconclusive.
pub fn certify_at_most(
    relation: Relation,
    extra: f64,
    upper: ErUpper,
    rhs: f64,
    tol: f64,
    refute: impl FnOnce() -> Result<Option<ErLower>>,
) -> Result<InequalityRecord> {
    let mut rec = InequalityRecord::new(relation, extra + upper.0, rhs, tol);
    rec.bound = Some(BoundUsed::Upper);
    if rec.slack >= -tol {
        return Ok(rec);
    }
    if let Some(lower) = refute()? {
        let refuted = InequalityRecord::new(relation, extra + lower.0, rhs, tol);
        if refuted.slack < -tol {
            return Ok(InequalityRecord {
                bound: Some(BoundUsed::Lower),
                verdict: Verdict::Violated,
                ..refuted
            });
        }
    }
    rec.direction_sound = false;
    rec.verdict = Verdict::Inconclusive;
    Ok(rec)
}

/// Record for `E_R ≥ value`, stored as `lhs = value`, `rhs = E_R`.
pub fn certify_at_least(
    relation: Relation,
    lower: ErLower,
    value: f64,
    tol: f64,
    refute: Option<ErUpper>,
) -> Result<InequalityRecord> {
    let mut rec = InequalityRecord::new(relation, value, lower.0, tol);
    rec.bound = Some(BoundUsed::Lower);
    if rec.slack >= -tol {
        return Ok(rec);
    }
    if let Some(upper) = refute {
        let refuted = InequalityRecord::new(relation, value, upper.0, tol);
        if refuted.slack < -tol {
            return Ok(InequalityRecord {
                bound: Some(BoundUsed::Upper),
                verdict: Verdict::Violated,
                ..refuted
            });
        }
    }
    rec.direction_sound = false;
    rec.verdict = Verdict::Inconclusive;
    Ok(rec)
}

/// Record for `I_m − opt_tol ≤ J ≤ I_m + tol`. The best-found `J` can only
/// underestimate, so the upper side is a hard check and the lower side
/// allows `opt_tol` of optimizer shortfall. The binding side is recorded.
pub fn achievement_record(relation: Relation, found: f64, target: f64, tol: f64, opt_tol: f64) -> InequalityRecord {
    let above = target - found;
    let below = found - (target - opt_tol);
    let rec = if above <= below {
        InequalityRecord::new(relation, found, target, tol)
    } else {
        InequalityRecord::new(relation, target - opt_tol, found, tol)
    };
    rec.judged()
}

/// Deliberate corruption used to check that violations are caught.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Adds the given amount to `I_m` before any relation is checked.
    ImPlus(f64),
}

impl Fault {
    /// Parses `im_plus_<amount>`.
    pub fn parse(text: &str) -> Result<Self> {
        text.strip_prefix("im_plus_")
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .map(Fault::ImPlus)
            .ok_or_else(|| Error::Config(format!("unknown fault '{text}', expected im_plus_<amount>")))
    }

    fn shift(fault: Option<Fault>) -> f64 {
        match fault {
            Some(Fault::ImPlus(d)) => d,
            None => 0.0,
        }
    }
}

/// Suite settings. Everything here is echoed into the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub dims: Vec<[usize; 2]>,
    pub samples: usize,
    pub seed: u64,
    /// Tolerance for relations between directly computed quantities.
    pub tol: f64,
    /// Tolerance for relations involving `E_R`.
    pub er_tol: f64,
    /// Allowed optimizer shortfall for the classical correlations.
    pub opt_tol: f64,
    pub apparatus_basis: ApparatusBasisChoice,
    pub correlation_budget: OptimizerBudget,
    pub er_budget: ErBudget,
    /// Only check the identities, skipping `E_R` and the classical correlations.
    pub identities_only: bool,
    pub fault: Option<Fault>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            dims: vec![[2, 2], [2, 4], [3, 3], [3, 9]],
            samples: 100,
            seed: 7,
            tol: 1e-9,
            er_tol: 5e-3,
            opt_tol: 1e-6,
            apparatus_basis: ApparatusBasisChoice::Eigen,
            correlation_budget: OptimizerBudget {
                starts: 2,
                max_evaluations: 400,
                ..OptimizerBudget::default()
            },
            er_budget: ErBudget::default(),
            identities_only: false,
            fault: None,
        }
    }
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("dims list is empty".into()));
        }
        if let Some([m, n]) = self.dims.iter().find(|[m, n]| *m == 0 || n < m) {
            return Err(Error::Config(format!("dims {m}x{n} need 1 <= M <= N")));
        }
        for (name, v) in [("tol", self.tol), ("er_tol", self.er_tol), ("opt_tol", self.opt_tol)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a non-negative number")));
            }
        }
        if self.correlation_budget.starts == 0 {
            return Err(Error::Config("correlation_budget.starts must be positive".into()));
        }
        Ok(())
    }
}

/// `E_R` numbers behind the records of one scenario.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ErSummary {
    /// Bracket on `E_R(ρ_S'A')`.
    pub final_joint_lower: Option<f64>,
    pub final_joint_upper: Option<f64>,
    /// Bounds on `E_R(ρ_A'E)`; the lower end is only computed when needed.
    pub apparatus_environment_lower: Option<f64>,
    pub apparatus_environment_upper: Option<f64>,
    /// `E_R(ρ_AE)`, exact for the pure initial state.
    pub initial_apparatus_environment: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioAnalysis {
    pub quantities: QuantityReport,
    pub records: Vec<InequalityRecord>,
    pub entanglement: ErSummary,
}

impl ScenarioAnalysis {
    pub fn violations(&self) -> usize {
        self.records.iter().filter(|r| r.verdict == Verdict::Violated).count()
    }
}

/// `Σ_i p_i |s_i⟩⟨s_i| ⊗ Σ_r w_r |V_i a_r⟩⟨V_i a_r|`, the classical part of
/// `ρ_S'A'` written as product atoms.
fn classical_hint(model: &MeasurementModel) -> Result<SeparableEnsemble> {
    let m = model.system_dim();
    let mut w = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, (p, v)) in model.probabilities().iter().zip(model.records()).enumerate() {
        for (r, a) in model.apparatus_weights().iter().enumerate() {
            w.push(p * a);
            left.push(PureState::basis_state(m, i));
            right.push(PureState::normalized(v.mul_vec(&model.apparatus_basis().vector(r)))?);
        }
    }
    normalize_weights(&mut w);
    SeparableEnsemble::new(w, left, right)
}

/// `Σ_i p_i (V_i ⊗ I) D(|Ψ_AE⟩⟨Ψ_AE|) (V_i ⊗ I)†` with `D` the Schmidt
/// dephasing, a separable state close to `ρ_A'E`.
fn environment_hint(model: &MeasurementModel) -> Result<SeparableEnsemble> {
    let n = model.apparatus_dim();
    let mut w = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (p, v) in model.probabilities().iter().zip(model.records()) {
        for (r, a) in model.apparatus_weights().iter().enumerate() {
            w.push(p * a);
            left.push(PureState::normalized(v.mul_vec(&model.apparatus_basis().vector(r)))?);
            right.push(PureState::basis_state(n, r));
        }
    }
    normalize_weights(&mut w);
    SeparableEnsemble::new(w, left, right)
}

fn normalize_weights(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
}

/// Lower bound on `E_R` computed at most once, on first request.
struct LazyLower<'a> {
    cell: OnceCell<Option<f64>>,
    rho: &'a DensityMatrix,
    dims: [usize; 2],
    budget: ErBudget,
    hints: &'a [SeparableEnsemble],
}

impl LazyLower<'_> {
    fn get(&self) -> Result<Option<ErLower>> {
        if let Some(v) = self.cell.get() {
            return Ok(v.map(ErLower));
        }
        let v = if self.budget.lower_max_iter == 0 && self.budget.certificate_iter == 0 {
            None
        } else {
            Some(er_bracket(self.rho, self.dims, &self.budget, self.hints)?.lower)
        };
        let _ = self.cell.set(v);
        Ok(v.map(ErLower))
    }
}

/// All quantities and all relation records for one scenario.
pub fn analyze(model: &MeasurementModel, seed: u64, cfg: &SuiteConfig) -> Result<ScenarioAnalysis> {
    let f = evolve(model)?;
    analyze_evolved(model, &f, seed, cfg)
}

fn analyze_evolved(model: &MeasurementModel, f: &FinalState, seed: u64, cfg: &SuiteConfig) -> Result<ScenarioAnalysis> {
    let (m, n) = (model.system_dim(), model.apparatus_dim());
    let log_m = (m as f64).log2();
    let log_n = (n as f64).log2();
    let corr = OptimizerBudget {
        seed: derive_seed(seed, 3),
        ..cfg.correlation_budget
    };
    let q = QuantityReport::compute(model, f, cfg.apparatus_basis, &corr, seed)?;
    let im = q.information_gain + Fault::shift(cfg.fault);
    let (tol, er_tol) = (cfg.tol, cfg.er_tol);

    let budget_for = |d: usize, k: u64| {
        let mut b = cfg.er_budget.for_dim(d);
        b.upper.seed = derive_seed(seed, k);
        b
    };
    let joint_budget = budget_for(m * n, 4);
    let joint = er_bracket(&f.joint, [m, n], &joint_budget, &[classical_hint(model)?])?;

    let rho_ae = f.apparatus_environment()?;
    let ae_budget = budget_for(n * n, 5);
    let ae_hints = [environment_hint(model)?];
    let ae_upper = er_seesaw_upper(&rho_ae, [n, n], &ae_budget.upper, &ae_hints)?;
    let ae_lower = LazyLower {
        cell: OnceCell::new(),
        rho: &rho_ae,
        dims: [n, n],
        budget: ae_budget,
        hints: &ae_hints,
    };
    let (initial_lower, initial_upper) = pure_bounds(&f.initial_apparatus_environment, [n, n])?;

    let c_final_a = q.coherence_final_apparatus;
    let records = vec![
        certify_at_least(Relation::A, ErLower::from_bracket(&joint), im, er_tol, Some(ErUpper::from_bracket(&joint)))?,
        plain_record(Relation::B, im + c_final_a + q.apparatus_mixedness, log_n, tol),
        plain_record(Relation::C, im + q.apparatus_mixedness, log_n, tol),
        plain_record(Relation::D, im, q.coherence_initial_system, tol),
        plain_record(Relation::E, im, q.entropy_exchange, tol),
        plain_record(Relation::F, im + q.coherence_final_system, log_m, tol),
        certify_at_most(Relation::G, im, ErUpper::from_seesaw(&ae_upper), q.apparatus_final_entropy, er_tol, || {
            ae_lower.get()
        })?,
        certify_at_most(Relation::H, im + c_final_a, ErUpper::from_seesaw(&ae_upper), log_n, er_tol, || {
            ae_lower.get()
        })?,
        certify_at_most(Relation::I, q.coherence_initial_apparatus, initial_upper, log_n, er_tol, || {
            Ok(Some(initial_lower))
        })?,
        certify_at_most(Relation::J, c_final_a, ErUpper::from_bracket(&joint), log_n, er_tol, || {
            Ok(Some(ErLower::from_bracket(&joint)))
        })?,
        plain_record(Relation::K, q.disturbance + im + c_final_a, 2.0 * log_n, tol),
        plain_record(Relation::L, (im - q.coherent_information_state).abs(), 0.0, tol),
        achievement_record(Relation::M, q.classical_correlations, im, tol, cfg.opt_tol),
    ];
    let entanglement = ErSummary {
        final_joint_lower: Some(joint.lower),
        final_joint_upper: Some(joint.upper),
        apparatus_environment_lower: ae_lower.cell.get().copied().flatten(),
        apparatus_environment_upper: Some(ae_upper.value),
        initial_apparatus_environment: Some(initial_upper.value()),
    };
    Ok(ScenarioAnalysis {
        quantities: q,
        records: with_context(records, 0, [m, n]),
        entanglement,
    })
}

fn with_context(mut records: Vec<InequalityRecord>, sample_index: usize, dims: [usize; 2]) -> Vec<InequalityRecord> {
    for r in &mut records {
        r.sample_index = sample_index;
        r.dims = dims;
    }
    records
}

/// Both identity residuals for one scenario.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Residuals {
    gain_vs_coherent_information: f64,
    exchange_routes: f64,
}

struct SampleOutcome {
    records: Vec<InequalityRecord>,
    residuals: Residuals,
}

fn evaluate_sample(index: usize, dims: [usize; 2], cfg: &SuiteConfig) -> Result<SampleOutcome> {
    let seed = derive_seed(cfg.seed, index as u64);
    let sample = ScenarioSample::generate((dims[0], dims[1]), seed)?;
    let f = evolve(&sample.model)?;
    let exchange = entropy_exchange_routes(&f)?;
    let exchange_routes = (exchange.apparatus_environment - exchange.system).abs();
    let records = if cfg.identities_only {
        let im = information_gain(&f, &sample.model)? + Fault::shift(cfg.fault);
        let ic = coherent_information_state(&f.joint, dims)?;
        vec![plain_record(Relation::L, (im - ic).abs(), 0.0, cfg.tol)]
    } else {
        analyze_evolved(&sample.model, &f, seed, cfg)?.records
    };
    let gain_vs_coherent_information = records
        .iter()
        .find(|r| r.relation == Relation::L)
        .map_or(0.0, |r| r.lhs);
    Ok(SampleOutcome {
        records: with_context(records, index, dims),
        residuals: Residuals {
            gain_vs_coherent_information,
            exchange_routes,
        },
    })
}

/// Per-relation summary; `dims` is absent on the rows pooling all dims.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub relation: Relation,
    pub dims: Option<[usize; 2]>,
    pub count: usize,
    pub min_slack: f64,
    pub holds: usize,
    pub violated: usize,
    pub inconclusive: usize,
    pub inconclusive_rate: f64,
}

/// Largest identity residuals per dims.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub dims: [usize; 2],
    pub samples: usize,
    /// `max |I_m − I_c(S'⟩A')|`
    pub max_gain_vs_coherent_information: f64,
    /// `max |S(ρ_A'E) − S(ρ_S')|`
    pub max_exchange_routes: f64,
}

/// A violating scenario, with everything needed to rebuild it.
#[derive(Clone, Debug, Serialize)]
pub struct FailedSample {
    pub sample_index: usize,
    pub seed: u64,
    pub dims: [usize; 2],
    pub relations: Vec<Relation>,
    pub scenario: ScenarioConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub version: String,
    pub config: SuiteConfig,
    pub violations: usize,
    pub inconclusive: usize,
    pub identities: Vec<IdentityRow>,
    pub aggregates: Vec<AggregateRow>,
    pub failures: Vec<FailedSample>,
    pub records: Vec<InequalityRecord>,
}

impl SuiteReport {
    pub fn has_violations(&self) -> bool {
        self.violations > 0
    }

    /// Row for `relation` at `dims`, or pooled over all dims.
    pub fn aggregate(&self, relation: Relation, dims: Option<[usize; 2]>) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|r| r.relation == relation && r.dims == dims)
    }

    /// JSON with measured numbers rounded to 12 significant digits.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        for key in ["identities", "aggregates", "records"] {
            if let Some(part) = v.get_mut(key) {
                round_json(part);
            }
        }
        let mut text = serde_json::to_string_pretty(&v).expect("report serializes");
        text.push('\n');
        text
    }

    /// One row per sample and relation.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sample_index", "relation", "lhs", "rhs", "slack", "verdict"])
            .expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.sample_index.to_string(),
                r.relation.letter().to_string(),
                fmt_sig(r.lhs),
                fmt_sig(r.rhs),
                fmt_sig(r.slack),
                verdict_name(r.verdict).to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Violated => "violated",
        Verdict::Inconclusive => "inconclusive",
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Shortest text for `x` at 12 significant digits, in exponent form when
/// very small or very large.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r != 0.0 && r.is_finite() && !(1e-4..1e15).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        r.to_string()
    }
}

fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Runs the suite on the current thread pool.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let jobs: Vec<[usize; 2]> = cfg
        .dims
        .iter()
        .flat_map(|d| std::iter::repeat_n(*d, cfg.samples))
        .collect();
    let outcomes: Vec<Result<SampleOutcome>> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, dims)| evaluate_sample(i, *dims, cfg))
        .collect();
    let mut samples = Vec::with_capacity(outcomes.len());
    for (i, o) in outcomes.into_iter().enumerate() {
        samples.push(o.map_err(|e| Error::Consistency(format!("sample {i}: {e}")))?);
    }
    assemble(cfg, &jobs, samples)
}

/// Runs the suite on a dedicated pool of `threads` workers. The report does
/// not depend on the thread count.
pub fn run_suite_with_threads(cfg: &SuiteConfig, threads: Option<usize>) -> Result<SuiteReport> {
    match threads {
        None => run_suite(cfg),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_suite(cfg)),
    }
}

fn assemble(cfg: &SuiteConfig, jobs: &[[usize; 2]], samples: Vec<SampleOutcome>) -> Result<SuiteReport> {
    let mut identities: Vec<IdentityRow> = Vec::new();
    for (dims, s) in jobs.iter().zip(&samples) {
        let row = match identities.iter_mut().find(|r| r.dims == *dims) {
            Some(r) => r,
            None => {
                identities.push(IdentityRow {
                    dims: *dims,
                    samples: 0,
                    max_gain_vs_coherent_information: 0.0,
                    max_exchange_routes: 0.0,
                });
                identities.last_mut().expect("just pushed")
            }
        };
        row.samples += 1;
        row.max_gain_vs_coherent_information = row.max_gain_vs_coherent_information.max(s.residuals.gain_vs_coherent_information);
        row.max_exchange_routes = row.max_exchange_routes.max(s.residuals.exchange_routes);
    }

    let records: Vec<InequalityRecord> = samples.into_iter().flat_map(|s| s.records).collect();
    let mut aggregates = Vec::new();
    let mut dims_order: Vec<[usize; 2]> = Vec::new();
    for d in jobs {
        if !dims_order.contains(d) {
            dims_order.push(*d);
        }
    }
    for d in dims_order.iter().map(|d| Some(*d)).chain([None]) {
        for rel in Relation::ALL {
            let rows = records.iter().filter(|r| r.relation == rel && d.is_none_or(|d| r.dims == d));
            if let Some(row) = aggregate_row(rel, d, rows) {
                aggregates.push(row);
            }
        }
    }

    let mut failing: BTreeMap<usize, Vec<Relation>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.verdict == Verdict::Violated) {
        failing.entry(r.sample_index).or_default().push(r.relation);
    }
    let failures = failing
        .into_iter()
        .map(|(i, relations)| {
            let seed = derive_seed(cfg.seed, i as u64);
            let dims = jobs[i];
            let sample = ScenarioSample::generate((dims[0], dims[1]), seed)?;
            Ok(FailedSample {
                sample_index: i,
                seed,
                dims,
                relations,
                scenario: sample.to_config(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SuiteReport {
        version: version_tag(),
        config: cfg.clone(),
        violations: records.iter().filter(|r| r.verdict == Verdict::Violated).count(),
        inconclusive: records.iter().filter(|r| r.verdict == Verdict::Inconclusive).count(),
        identities,
        aggregates,
        failures,
        records,
    })
}

fn aggregate_row<'a>(
    relation: Relation,
    dims: Option<[usize; 2]>,
    rows: impl Iterator<Item = &'a InequalityRecord>,
) -> Option<AggregateRow> {
    let mut row = AggregateRow {
        relation,
        dims,
        count: 0,
        min_slack: f64::INFINITY,
        holds: 0,
        violated: 0,
        inconclusive: 0,
        inconclusive_rate: 0.0,
    };
    for r in rows {
        row.count += 1;
        row.min_slack = row.min_slack.min(r.slack);
        match r.verdict {
            Verdict::Holds => row.holds += 1,
            Verdict::Violated => row.violated += 1,
            Verdict::Inconclusive => row.inconclusive += 1,
        }
    }
    if row.count == 0 {
        return None;
    }
    row.inconclusive_rate = row.inconclusive as f64 / row.count as f64;
    Some(row)
}

/// One checked number in a saturation probe.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeCheck {
    pub probe: String,
    pub quantity: String,
    pub value: f64,
    pub expected: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub checks: Vec<ProbeCheck>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, probe: &str, quantity: &str, value: f64, expected: f64, tol: f64) {
        self.checks.push(ProbeCheck {
            probe: probe.into(),
            quantity: quantity.into(),
            value,
            expected,
            tol,
            passed: (value - expected).abs() <= tol,
        });
    }

    fn at_most(&mut self, probe: &str, quantity: &str, value: f64, bound: f64) {
        self.checks.push(ProbeCheck {
            probe: probe.into(),
            quantity: quantity.into(),
            value,
            expected: bound,
            tol: 0.0,
            passed: value <= bound,
        });
    }
}

const PROBE_TOL: f64 = 1e-9;
const PROBE_SLACK: f64 = 1e-6;
const PROBE_ER_TOL: f64 = 5e-3;

/// Runs the limiting cases and collects every check, passing or not.
pub fn run_probes() -> Result<ProbeReport> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let plus = [C64::new(r, 0.0), C64::new(r, 0.0)];
    let cfg = SuiteConfig::default();
    let mut report = ProbeReport { checks: Vec::new() };

    let name = "pure_apparatus";
    let model = build_controlled_shift(2, 2, &plus, DensityMatrix::from_pure(&PureState::basis_state(2, 0)))?;
    let f = evolve(&model)?;
    let a = analyze_evolved(&model, &f, 0, &cfg)?;
    let q = &a.quantities;
    report.push(name, "information_gain", q.information_gain, 1.0, PROBE_TOL);
    report.push(name, "coherence_initial_system", q.coherence_initial_system, 1.0, PROBE_TOL);
    report.at_most(name, "slack(d)", record(&a, Relation::D).slack, PROBE_SLACK);
    report.at_most(name, "|I_m - I_c|", record(&a, Relation::L).lhs, PROBE_TOL);
    // ρ_S'A' is pure here, so its top eigenvector carries the exact value.
    let spec = f.joint.spectrum();
    let top = (0..spec.dim()).max_by(|&i, &j| spec.values[i].total_cmp(&spec.values[j])).unwrap_or(0);
    let exact = er_pure(&PureState::normalized(spec.vector(top))?, [2, 2])?;
    report.push(name, "er_final_joint_lower", a.entanglement.final_joint_lower.unwrap_or(f64::NAN), exact, PROBE_ER_TOL);
    report.push(name, "er_final_joint_upper", a.entanglement.final_joint_upper.unwrap_or(f64::NAN), exact, PROBE_ER_TOL);
    report.at_most(name, "slack(a)", record(&a, Relation::A).slack, PROBE_ER_TOL);

    let name = "incoherent_system";
    let model = build_controlled_shift(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], sample_density(2, 2, 11))?;
    let a = analyze(&model, 0, &cfg)?;
    let q = &a.quantities;
    report.push(name, "information_gain", q.information_gain, 0.0, PROBE_TOL);
    report.push(name, "holevo", q.holevo, 0.0, PROBE_TOL);
    report.push(name, "classical_correlations", q.classical_correlations, 0.0, PROBE_TOL);
    report.push(name, "coherent_information_state", q.coherent_information_state, 0.0, PROBE_TOL);
    report.push(name, "entropy_exchange", q.entropy_exchange, 0.0, PROBE_TOL);

    let name = "maximally_mixed_apparatus";
    let model = build_controlled_shift(2, 2, &plus, DensityMatrix::maximally_mixed(2))?;
    let a = analyze(&model, 0, &cfg)?;
    report.push(name, "information_gain", a.quantities.information_gain, 0.0, PROBE_TOL);
    report.at_most(name, "slack(c)", record(&a, Relation::C).slack, PROBE_TOL);

    Ok(report)
}

/// Runs the limiting cases and fails on the first probe that misses.
pub fn saturation_probes() -> Result<ProbeReport> {
    let report = run_probes()?;
    if let Some(c) = report.checks.iter().find(|c| !c.passed) {
        return Err(Error::ProbeFailure(
            c.probe.clone(),
            format!("{} = {} (expected {} within {})", c.quantity, c.value, c.expected, c.tol),
        ));
    }
    Ok(report)
}

fn record(a: &ScenarioAnalysis, rel: Relation) -> &InequalityRecord {
    a.records.iter().find(|r| r.relation == rel).expect("every relation is recorded")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eig;
    use crate::linalg::EIG_TOL;

    #[test]
    fn haar_examples() {
        let one = sample_haar_pure(1, 5);
        assert!((one.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
        assert_eq!(sample_haar_pure(4, 9).amplitudes(), sample_haar_pure(4, 9).amplitudes());
        assert_ne!(sample_haar_pure(4, 9).amplitudes(), sample_haar_pure(4, 10).amplitudes());
    }

    #[test]
    fn haar_bloch_mean_vanishes() {
        let mut mean = [0.0; 3];
        let count = 10_000;
        for k in 0..count {
            let a = sample_haar_pure(2, k);
            let (x, y) = (a.amplitudes()[0], a.amplitudes()[1]);
            let coh = x.conj() * y;
            mean[0] += 2.0 * coh.re;
            mean[1] += 2.0 * coh.im;
            mean[2] += x.norm_sqr() - y.norm_sqr();
        }
        let norm = mean.iter().map(|v| (v / count as f64).powi(2)).sum::<f64>().sqrt();
        assert!(norm <= 0.05, "{norm}");
    }

    #[test]
    fn ginibre_examples() {
        let pure = sample_density(3, 1, 4);
        assert!((pure.purity() - 1.0).abs() < 1e-12);
        assert_eq!(pure.rank(), 1);
        let full = sample_density(4, 4, 4);
        assert!((full.matrix().trace().re - 1.0).abs() < 1e-12);
        assert_eq!(sample_density(4, 2, 8).matrix(), sample_density(4, 2, 8).matrix());
        assert!(sample_density(4, 2, 8).rank() <= 2);
    }

    #[test]
    fn ginibre_spectra_nondegenerate() {
        for k in 0..1000 {
            let ev = hermitian_eig(sample_density(4, 4, k).matrix(), EIG_TOL).unwrap().values;
            let gap = ev.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
            assert!(gap > 0.0, "sample {k}");
        }
    }

    #[test]
    fn samples_regenerate() {
        let a = ScenarioSample::generate((3, 3), 77).unwrap();
        let b = ScenarioSample::generate((3, 3), 77).unwrap();
        assert_eq!(a.model.amplitudes(), b.model.amplitudes());
        assert_eq!(a.model.apparatus().matrix(), b.model.apparatus().matrix());
        assert_eq!(a.to_config().to_json(), b.to_config().to_json());
    }

    fn bracket(lower: f64, upper: f64) -> (ErLower, ErUpper) {
        (ErLower(lower), ErUpper(upper))
    }

    #[test]
    fn at_most_uses_upper_then_lower() {
        let (lo, up) = bracket(0.3, 0.4);
        let r = certify_at_most(Relation::G, 0.5, up, 1.0, 1e-3, || panic!("not needed")).unwrap();
        assert_eq!((r.verdict, r.bound, r.direction_sound), (Verdict::Holds, Some(BoundUsed::Upper), true));
        assert!((r.slack - 0.1).abs() < 1e-15);

        let r = certify_at_most(Relation::G, 0.65, up, 1.0, 1e-3, || Ok(Some(lo))).unwrap();
        assert_eq!((r.verdict, r.direction_sound), (Verdict::Inconclusive, false));

        let r = certify_at_most(Relation::G, 0.8, up, 1.0, 1e-3, || Ok(Some(lo))).unwrap();
        assert_eq!((r.verdict, r.bound), (Verdict::Violated, Some(BoundUsed::Lower)));
        assert!((r.slack + 0.1).abs() < 1e-12);

        let r = certify_at_most(Relation::G, 0.8, up, 1.0, 1e-3, || Ok(None)).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn at_least_uses_lower_then_upper() {
        let (lo, up) = bracket(0.3, 0.4);
        let r = certify_at_least(Relation::A, lo, 0.25, 1e-3, Some(up)).unwrap();
        assert_eq!((r.verdict, r.bound), (Verdict::Holds, Some(BoundUsed::Lower)));
        assert_eq!((r.lhs, r.rhs), (0.25, 0.3));
        let r = certify_at_least(Relation::A, lo, 0.35, 1e-3, Some(up)).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        let r = certify_at_least(Relation::A, lo, 0.5, 1e-3, Some(up)).unwrap();
        assert_eq!((r.verdict, r.bound), (Verdict::Violated, Some(BoundUsed::Upper)));
    }

    #[test]
    fn achievement_sides() {
        assert_eq!(achievement_record(Relation::M, 0.5, 0.5, 1e-9, 1e-6).verdict, Verdict::Holds);
        assert_eq!(achievement_record(Relation::M, 0.5 - 5e-7, 0.5, 1e-9, 1e-6).verdict, Verdict::Holds);
        assert_eq!(achievement_record(Relation::M, 0.5 - 1e-5, 0.5, 1e-9, 1e-6).verdict, Verdict::Violated);
        let over = achievement_record(Relation::M, 0.5 + 1e-8, 0.5, 1e-9, 1e-6);
        assert_eq!(over.verdict, Verdict::Violated);
        assert!((over.slack - (over.rhs - over.lhs)).abs() == 0.0);
    }

    #[test]
    fn fault_parsing() {
        assert_eq!(Fault::parse("im_plus_0.1").unwrap(), Fault::ImPlus(0.1));
        assert!(Fault::parse("im_minus_0.1").is_err());
        assert!(Fault::parse("im_plus_x").is_err());
    }

    fn small(samples: usize) -> SuiteConfig {
        SuiteConfig {
            dims: vec![[2, 2]],
            samples,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn small_suite_has_no_violations() {
        let report = run_suite(&small(4)).unwrap();
        assert_eq!(report.records.len(), 13 * 4);
        assert_eq!(report.violations, 0, "{}", report.to_json());
        for r in &report.records {
            assert_eq!(r.verdict == Verdict::Holds, r.slack >= -r.tol && r.direction_sound);
            assert!(r.verdict != Verdict::Inconclusive || r.relation.uses_er());
        }
        assert!(report.identities[0].max_gain_vs_coherent_information <= 1e-9);
        assert_eq!(report.aggregate(Relation::A, None).unwrap().count, 4);
    }

    #[test]
    fn injected_fault_is_caught() {
        let cfg = SuiteConfig {
            fault: Some(Fault::ImPlus(0.1)),
            ..small(2)
        };
        let report = run_suite(&cfg).unwrap();
        assert!(report.has_violations());
        let flagged = |rel| {
            report
                .records
                .iter()
                .filter(|r| r.relation == rel && r.verdict == Verdict::Violated)
                .count()
        };
        assert_eq!(flagged(Relation::L), 2);
        assert_eq!(report.failures.len(), 2);

        // With a pure apparatus both bounds on I_m are tight.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [C64::new(r, 0.0), C64::new(r, 0.0)];
        let model = build_controlled_shift(2, 2, &plus, DensityMatrix::from_pure(&PureState::basis_state(2, 0))).unwrap();
        let a = analyze(&model, 0, &cfg).unwrap();
        assert_eq!(record(&a, Relation::D).verdict, Verdict::Violated);
        assert_eq!(record(&a, Relation::E).verdict, Verdict::Violated);
        let replay = ScenarioConfig::from_json(&report.failures[0].scenario.to_json()).unwrap();
        assert_eq!(replay.system_dim, 2);
    }

    #[test]
    fn identities_only_mode() {
        let cfg = SuiteConfig {
            identities_only: true,
            dims: vec![[3, 9]],
            samples: 3,
            ..SuiteConfig::default()
        };
        let report = run_suite(&cfg).unwrap();
        assert_eq!(report.records.len(), 3);
        assert!(report.identities[0].max_exchange_routes <= 1e-9);
        assert!(report.identities[0].max_gain_vs_coherent_information <= 1e-9);
    }

    #[test]
    fn reports_are_stable() {
        let cfg = small(2);
        let a = run_suite_with_threads(&cfg, Some(1)).unwrap();
        let b = run_suite_with_threads(&cfg, Some(3)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let csv = a.to_csv();
        assert!(csv.starts_with("sample_index,relation,lhs,rhs,slack,verdict\n"));
        assert_eq!(csv.lines().count(), 1 + 26);
    }

    #[test]
    fn config_round_trip() {
        let cfg = SuiteConfig::default();
        let back = SuiteConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert!(SuiteConfig::from_json(r#"{"dims": [[3, 2]]}"#).is_err());
        assert!(SuiteConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(fmt_sig(-5.551115123125783e-16), "-5.55111512313e-16");
    }

    #[test]
    fn probes_pass() {
        let report = saturation_probes().unwrap();
        assert!(report.passed());
        assert!(report.checks.len() >= 10);
    }
}
