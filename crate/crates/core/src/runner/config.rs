use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::exponents::{
    check_diperna_lions, check_gamma_condition, check_product_theorem, Exponent, ExponentTuple, Integrability, Verdict,
    Violation, COND_GAMMA,
};
use crate::fields::{Domain, DomainKind, Grid};
use crate::profiles::Profile;
use crate::solver::Scheme;
use crate::velocity::{make_velocity, Params, VelocityField};
use crate::weak_forms::{make_renorm, Notion, Problem, RenormKind, SpaceProfile, TestFunction, TimeProfile};

use super::ConfigError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub velocity: VelocitySpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    pub exponents: Option<ExponentSpec>,
    #[serde(default)]
    pub analysis: Vec<Analysis>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub domain: DomainKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
    pub t_final: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocitySpec {
    pub id: String,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Density solving the continuity equation.
    pub rho: Profile,
    /// Scalar solving the transport equation.
    pub s: Option<Profile>,
    /// Companion density solving the continuity equation with the same velocity.
    #[serde(rename = "R")]
    pub r: Option<Profile>,
}

/// Where trajectories come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Characteristics oracle.
    #[default]
    Oracle,
    /// Upwind finite volumes for densities, semi-Lagrangian for `s`.
    Numerical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub source: Source,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_outputs")]
    pub outputs: usize,
    /// RK4 steps over `[0, T]` for the oracle; default `4·max(cells)`.
    pub rk_steps: Option<usize>,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_outputs() -> usize {
    64
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { source: Source::Oracle, cfl: default_cfl(), outputs: default_outputs(), rk_steps: None }
    }
}

/// Integrability exponents claimed for the scenario; `d` defaults to
/// `max(grid dimension, 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSpec {
    pub p: Exponent,
    pub q: Exponent,
    pub alpha: Exponent,
    pub beta: Exponent,
    #[serde(default = "inf")]
    pub gamma: Exponent,
    #[serde(default = "inf")]
    pub gamma_tilde: Exponent,
    /// Exponents of the transported scalar `s`, for the product theorem.
    pub alpha_s: Option<Exponent>,
    pub beta_s: Option<Exponent>,
    pub d: Option<u32>,
}

fn inf() -> Exponent {
    Exponent::INF
}

/// Theorem-level checks that have exponent hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Renormalized solutions are time-integrated renormalized solutions.
    Renormalization,
    /// The vacuum measure is continuous in time.
    VacuumContinuity,
    /// Conservation of `∫ s_ρ R` and inclusion of vacuum sets.
    VacuumInclusion,
    /// `ρ·s` solves the continuity equation.
    ProductSolution,
}

impl Theorem {
    pub const ALL: [Theorem; 4] =
        [Theorem::Renormalization, Theorem::VacuumContinuity, Theorem::VacuumInclusion, Theorem::ProductSolution];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::Renormalization => "renormalization",
            Theorem::VacuumContinuity => "vacuum_continuity",
            Theorem::VacuumInclusion => "vacuum_inclusion",
            Theorem::ProductSolution => "product_solution",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSpec {
    pub id: String,
    pub space: SpaceProfile,
    pub time: TimeProfile,
    #[serde(default)]
    pub margin: f64,
}

impl TestFunctionSpec {
    pub fn build(&self, domain: &Domain) -> Result<TestFunction, crate::weak_forms::WeakFormError> {
        TestFunction::new(self.id.clone(), self.space.clone(), self.time.clone(), domain, self.margin)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldName {
    #[default]
    Rho,
    S,
    #[serde(rename = "R")]
    R,
}

impl FieldName {
    pub fn name(self) -> &'static str {
        match self {
            FieldName::Rho => "rho",
            FieldName::S => "s",
            FieldName::R => "R",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutatorExpectation {
    /// Log-log slope at least the commutator tolerance.
    #[default]
    Decay,
    /// Strictly decreasing norms.
    Monotone,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardyExpectation {
    #[default]
    Stable,
    Divergent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    ResidualMatrix {
        #[serde(default = "default_problem")]
        problem: Problem,
        tau: Option<f64>,
        #[serde(default)]
        renorms: Vec<RenormKind>,
        test_functions: Vec<TestFunctionSpec>,
        max_abs: Option<f64>,
    },
    CommutatorSweep {
        #[serde(default)]
        field: FieldName,
        /// ε as multiples of the largest cell width, decreasing.
        #[serde(default = "default_eps_cells")]
        eps_cells: Vec<f64>,
        #[serde(default = "one")]
        time_exponent: Exponent,
        #[serde(default = "one")]
        space_exponent: Exponent,
        #[serde(default)]
        expect: CommutatorExpectation,
    },
    VacuumReport {
        #[serde(default)]
        threshold: f64,
        /// Check the inclusion defect; default: only when `ρ₀` has no vacuum.
        check_inclusion: Option<bool>,
    },
    HypothesisCheck {
        theorem: Theorem,
    },
    BoundaryTerms {
        #[serde(default = "default_boundary_n")]
        n_list: Vec<usize>,
        test_function: Option<TestFunctionSpec>,
    },
    Hardy {
        #[serde(default = "two")]
        q: Exponent,
        #[serde(default = "default_hardy_n")]
        n_list: Vec<usize>,
        #[serde(default)]
        expect: HardyExpectation,
    },
    Bdelta {
        #[serde(default = "default_deltas")]
        deltas: Vec<f64>,
        #[serde(default)]
        threshold: f64,
        /// Snapshot time; default the final time.
        time: Option<f64>,
    },
    ProductResidual {
        #[serde(default = "default_product_notions")]
        notions: Vec<Notion>,
        test_functions: Vec<TestFunctionSpec>,
        tau: Option<f64>,
        max_abs: Option<f64>,
    },
    Convergence {
        #[serde(default = "default_levels")]
        levels: usize,
    },
    TimeShiftReplay {
        t0: f64,
        tau: f64,
        #[serde(default)]
        threshold: f64,
    },
}

fn default_problem() -> Problem {
    Problem::Continuity
}
fn default_eps_cells() -> Vec<f64> {
    vec![32.0, 16.0, 8.0, 4.0]
}
fn one() -> Exponent {
    Exponent::ONE
}
fn two() -> Exponent {
    Exponent::int(2)
}
fn default_boundary_n() -> Vec<usize> {
    vec![8, 16, 32, 64]
}
fn default_hardy_n() -> Vec<usize> {
    vec![128, 256, 512]
}
fn default_deltas() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
}
fn default_product_notions() -> Vec<Notion> {
    vec![Notion::Distributional]
}
fn default_levels() -> usize {
    3
}

impl Analysis {
    pub fn kind(&self) -> &'static str {
        match self {
            Analysis::ResidualMatrix { .. } => "residual_matrix",
            Analysis::CommutatorSweep { .. } => "commutator_sweep",
            Analysis::VacuumReport { .. } => "vacuum_report",
            Analysis::HypothesisCheck { .. } => "hypothesis_check",
            Analysis::BoundaryTerms { .. } => "boundary_terms",
            Analysis::Hardy { .. } => "hardy",
            Analysis::Bdelta { .. } => "bdelta",
            Analysis::ProductResidual { .. } => "product_residual",
            Analysis::Convergence { .. } => "convergence",
            Analysis::TimeShiftReplay { .. } => "time_shift_replay",
        }
    }

    /// Theorems whose hypotheses this analysis relies on.
    pub fn theorems(&self, has_r: bool) -> Vec<Theorem> {
        match self {
            Analysis::HypothesisCheck { theorem } => vec![*theorem],
            Analysis::VacuumReport { .. } if has_r => vec![Theorem::VacuumContinuity, Theorem::VacuumInclusion],
            Analysis::VacuumReport { .. } => vec![Theorem::VacuumContinuity],
            Analysis::TimeShiftReplay { .. } => vec![Theorem::VacuumInclusion],
            Analysis::ProductResidual { .. } => vec![Theorem::ProductSolution],
            _ => vec![],
        }
    }
}

/// Default pass/fail thresholds, overridable per scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub residual: f64,
    pub commutator_slope: f64,
    pub modulus_exponent: f64,
    pub inclusion: f64,
    pub product_deviation: f64,
    pub mass_drift: f64,
    pub boundary_decay: f64,
    pub hardy_spread: f64,
    pub bdelta: f64,
    pub order_min: f64,
    pub order_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 5e-2,
            commutator_slope: 0.8,
            modulus_exponent: 0.8,
            inclusion: 0.0,
            product_deviation: 2e-2,
            mass_drift: 1e-12,
            boundary_decay: 4.0,
            hardy_spread: 0.1,
            bdelta: 1e-12,
            order_min: 0.8,
            order_max: 1.2,
        }
    }
}

/// Verdict of one theorem for the scenario's exponents and velocity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremVerdict {
    pub theorem: Theorem,
    pub admissible: bool,
    pub violation: Option<Violation>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.grid.lower.len()
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>, ConfigError> {
        let at = |m: String| ConfigError::at("grid", m);
        let domain = Domain::new(self.grid.domain, self.grid.lower.clone(), self.grid.upper.clone())
            .map_err(|e| at(e.to_string()))?;
        Ok(Arc::new(Grid::new(domain, self.grid.cells.clone(), self.grid.t_final).map_err(|e| at(e.to_string()))?))
    }

    pub fn build_velocity(&self) -> Result<VelocityField, ConfigError> {
        make_velocity(&self.velocity.id, &self.velocity.params).map_err(|e| ConfigError::at("velocity", e.to_string()))
    }

    pub fn tuple(&self) -> Result<Option<ExponentTuple>, ConfigError> {
        let Some(e) = &self.exponents else { return Ok(None) };
        let d = e.d.unwrap_or(self.dim().max(2) as u32);
        ExponentTuple::new(e.p, e.q, e.alpha, e.beta, e.gamma, e.gamma_tilde, d)
            .map(Some)
            .map_err(|err| ConfigError::at("exponents", err.to_string()))
    }

    /// Theorems requested by the analysis list, sorted and deduplicated.
    pub fn requested_theorems(&self) -> Vec<Theorem> {
        let mut t: Vec<Theorem> = self.analysis.iter().flat_map(|a| a.theorems(self.initial.r.is_some())).collect();
        t.sort();
        t.dedup();
        t
    }

    /// Evaluates `theorem` against the declared exponents and the velocity.
    pub fn verdict(&self, theorem: Theorem, u: &VelocityField) -> Result<TheoremVerdict, ConfigError> {
        let loc = "exponents";
        let tuple = self
            .tuple()?
            .ok_or_else(|| ConfigError::at(loc, format!("`{}` needs an [exponents] table", theorem.name())))?;
        let spec = self.exponents.as_ref().expect("tuple implies spec");
        let reject = |condition: &'static str, detail: String| Verdict::Rejected(Violation { condition, detail });
        let (dp, dq) = u.declared_class();
        let verdict = if tuple.q.recip() < dq.recip() || tuple.p.recip() < dp.recip() {
            reject(
                "u ∈ L^p(W^{1,q})",
                format!(
                    "velocity `{}` is only declared in L^{dp}(W^{{1,{dq}}}), claimed (p,q) = ({}, {})",
                    u.id(),
                    tuple.p,
                    tuple.q
                ),
            )
        } else {
            match theorem {
                Theorem::Renormalization => check_diperna_lions(&tuple),
                Theorem::VacuumContinuity => {
                    if tuple.gamma == Exponent::ONE {
                        reject("γ > 1", "γ = 1".into())
                    } else {
                        let by_gamma = check_gamma_condition(tuple.gamma, tuple.q, tuple.d)
                            .map_err(|e| ConfigError::at(loc, e.to_string()))?;
                        let by_qpab = check_diperna_lions(&tuple);
                        if by_gamma.is_admissible() || by_qpab.is_admissible() {
                            Verdict::Admissible
                        } else {
                            let detail = by_gamma.violation().map(|v| v.detail.clone()).unwrap_or_default();
                            reject(COND_GAMMA, detail)
                        }
                    }
                }
                Theorem::VacuumInclusion => {
                    let v = check_diperna_lions(&tuple);
                    if !v.is_admissible() {
                        v
                    } else if tuple.gamma == Exponent::ONE || tuple.gamma_tilde == Exponent::ONE {
                        reject("γ, γ̃ > 1", format!("γ = {}, γ̃ = {}", tuple.gamma, tuple.gamma_tilde))
                    } else if self.grid.domain == DomainKind::LipschitzBox && !u.zero_trace() {
                        reject("u = 0 on ∂Ω", format!("velocity `{}` does not vanish on the boundary", u.id()))
                    } else {
                        Verdict::Admissible
                    }
                }
                Theorem::ProductSolution => {
                    let (Some(a), Some(b)) = (spec.alpha_s, spec.beta_s) else {
                        return Err(ConfigError::at(loc, "`product_solution` needs alpha_s and beta_s".to_string()));
                    };
                    check_product_theorem(tuple.integrability(), Integrability { alpha: a, beta: b }, tuple.p, tuple.q)
                }
            }
        };
        Ok(TheoremVerdict { theorem, admissible: verdict.is_admissible(), violation: verdict.violation().cloned() })
    }
}

/// Parses and validates a scenario without the exponent gate.
pub fn parse_config_unchecked(text: &str) -> Result<Scenario, ConfigError> {
    let s: Scenario = toml::from_str(text).map_err(|e| {
        let loc = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            }
            None => "config".to_string(),
        };
        ConfigError::at(loc, e.message().to_string())
    })?;
    validate(&s)?;
    Ok(s)
}

/// Parses, validates, and rejects scenarios whose requested theorem checks
/// are forbidden by the declared exponents.
pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    let s = parse_config_unchecked(text)?;
    let u = s.build_velocity()?;
    let explicit: Vec<Theorem> = s
        .analysis
        .iter()
        .filter_map(|a| match a {
            Analysis::HypothesisCheck { theorem } => Some(*theorem),
            _ => None,
        })
        .collect();
    for t in s.requested_theorems() {
        // implicit checks only run when exponents are declared
        if s.exponents.is_none() && !explicit.contains(&t) {
            continue;
        }
        let v = s.verdict(t, &u)?;
        if let Some(viol) = v.violation {
            return Err(ConfigError::at(
                format!("analysis ({})", t.name()),
                format!("hypothesis violated: {} ({})", viol.condition, viol.detail),
            ));
        }
    }
    Ok(s)
}

fn validate(s: &Scenario) -> Result<(), ConfigError> {
    if s.name.trim().is_empty() {
        return Err(ConfigError::at("name", "must not be empty".to_string()));
    }
    let grid = s.build_grid()?;
    let u = s.build_velocity()?;
    u.check_grid(&grid).map_err(|e| ConfigError::at("velocity", e.to_string()))?;
    let dim = s.dim();
    for (key, p) in [
        ("initial.rho", Some(&s.initial.rho)),
        ("initial.s", s.initial.s.as_ref()),
        ("initial.R", s.initial.r.as_ref()),
    ] {
        if let Some(p) = p {
            p.validate(dim).map_err(|m| ConfigError::at(key, m))?;
        }
    }
    if !(s.solver.cfl > 0.0 && s.solver.cfl <= 1.0) {
        return Err(ConfigError::at("solver.cfl", format!("{} outside (0, 1]", s.solver.cfl)));
    }
    if s.solver.outputs == 0 {
        return Err(ConfigError::at("solver.outputs", "must be positive".to_string()));
    }
    if s.solver.rk_steps == Some(0) {
        return Err(ConfigError::at("solver.rk_steps", "must be positive".to_string()));
    }
    s.tuple()?;
    let snap = |t: f64| -> bool {
        let k = t / s.grid.t_final * s.solver.outputs as f64;
        t >= 0.0 && t <= s.grid.t_final * (1.0 + 1e-12) && (k - k.round()).abs() < 1e-9
    };
    for (i, a) in s.analysis.iter().enumerate() {
        let at = |m: String| ConfigError::at(format!("analysis[{i}] ({})", a.kind()), m);
        match a {
            Analysis::ResidualMatrix { problem, tau, renorms, test_functions, .. } => {
                if *problem == Problem::Transport && s.initial.s.is_none() {
                    return Err(at("transport residuals need initial.s".into()));
                }
                if let Some(t) = tau {
                    if !snap(*t) {
                        return Err(at(format!("tau = {t} is not an output time")));
                    }
                }
                for r in renorms {
                    make_renorm(r.clone()).map_err(|e| at(e.to_string()))?;
                }
                if test_functions.is_empty() {
                    return Err(at("needs at least one test function".into()));
                }
                for tf in test_functions {
                    tf.build(&grid.domain).map_err(|e| at(format!("test function `{}`: {e}", tf.id)))?;
                }
            }
            Analysis::ProductResidual { test_functions, tau, notions, .. } => {
                if s.initial.s.is_none() {
                    return Err(at("product residuals need initial.s".into()));
                }
                if notions.iter().any(|n| n.renormalized()) {
                    return Err(at("product residuals use the plain notions".into()));
                }
                if let Some(t) = tau {
                    if !snap(*t) {
                        return Err(at(format!("tau = {t} is not an output time")));
                    }
                }
                for tf in test_functions {
                    tf.build(&grid.domain).map_err(|e| at(format!("test function `{}`: {e}", tf.id)))?;
                }
            }
            Analysis::CommutatorSweep { field, eps_cells, .. } => {
                if eps_cells.len() < 2
                    || eps_cells.windows(2).any(|w| w[1] >= w[0])
                    || eps_cells.iter().any(|e| *e < 2.0)
                {
                    return Err(at("eps_cells must decrease strictly and stay ≥ 2".into()));
                }
                require_field(s, *field).map_err(at)?;
            }
            Analysis::VacuumReport { threshold, .. } | Analysis::TimeShiftReplay { threshold, .. }
                if *threshold < 0.0 =>
            {
                return Err(at("threshold must be ≥ 0".into()));
            }
            Analysis::BoundaryTerms { n_list, test_function } => {
                if grid.domain.is_periodic() {
                    return Err(at("periodic domains have no boundary".into()));
                }
                if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
                    return Err(at("n_list must increase strictly from n ≥ 1".into()));
                }
                if let Some(tf) = test_function {
                    tf.build(&grid.domain).map_err(|e| at(e.to_string()))?;
                }
            }
            Analysis::Hardy { n_list, .. } => {
                if grid.domain.is_periodic() {
                    return Err(at("periodic domains have no boundary".into()));
                }
                if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(at("n_list must increase strictly".into()));
                }
            }
            Analysis::Bdelta { deltas, threshold, time } => {
                if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(at("deltas must be positive and strictly decreasing".into()));
                }
                if *threshold < 0.0 {
                    return Err(at("threshold must be ≥ 0".into()));
                }
                if let Some(t) = time {
                    if !snap(*t) {
                        return Err(at(format!("time = {t} is not an output time")));
                    }
                }
            }
            Analysis::Convergence { levels } => {
                if *levels < 2 {
                    return Err(at("needs at least two levels".into()));
                }
            }
            Analysis::TimeShiftReplay { t0, tau, .. } => {
                if s.initial.r.is_none() {
                    return Err(at("time-shift replay needs initial.R".into()));
                }
                if !u.time_independent() {
                    return Err(at(format!(
                        "time-shift replay needs a time-independent velocity; `{}` depends on time",
                        u.id()
                    )));
                }
                if !(*tau > 0.0 && *t0 > 0.0 && t0 <= tau) || !snap(*tau) || !snap(tau - t0) {
                    return Err(at("need 0 < t0 ≤ tau with tau and tau − t0 on the output lattice".into()));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub(crate) fn require_field(s: &Scenario, f: FieldName) -> Result<(), String> {
    let present = match f {
        FieldName::Rho => true,
        FieldName::S => s.initial.s.is_some(),
        FieldName::R => s.initial.r.is_some(),
    };
    if present {
        Ok(())
    } else {
        Err(format!("field `{}` has no initial data", f.name()))
    }
}

/// The solver scheme used for a field when the source is numerical.
pub fn scheme_for(f: FieldName) -> Scheme {
    match f {
        FieldName::S => Scheme::SemiLagrangian,
        _ => Scheme::UpwindFv,
    }
}
