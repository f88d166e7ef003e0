use std::sync::Arc;

use serde::Serialize;

use super::config::{require_field, scheme_for};
use super::{
    Analysis, Bundle, CommutatorExpectation, ConfigError, Criterion, FieldName, HardyExpectation, RunError, Scenario,
    Source, Summary, TestFunctionSpec, Theorem, TheoremVerdict,
};
use crate::characteristics::{compute_flow, exact_continuity, exact_transport, oracle_trajectory, OracleEquation};
use crate::exponents::{Exponent, ExponentTuple};
use crate::fields::io::{write_binary, write_csv};
use crate::fields::{Grid, ScalarField, Trajectory};
use crate::mollify::decay_study;
use crate::refinement::empirical_orders;
use crate::solver::{solve_with_stats, Scheme, SolverConfig};
use crate::vacuum::{bdelta_limit_error, product_residual, vacuum_report, RESOLVED_FACTOR};
use crate::velocity::VelocityField;
use crate::weak_forms::{
    boundary_term_decay, hardy_study, make_renorm, residual_matrix, residual_rows_to_csv, Problem, RenormFunction,
    SpaceProfile, TimeProfile,
};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Add every snapshot of every trajectory to the bundle.
    pub dump_fields: bool,
}

/// The trajectories a scenario analyses.
#[derive(Clone, Debug)]
pub struct Trajectories {
    pub grid: Arc<Grid>,
    pub u: VelocityField,
    pub rho: Trajectory,
    pub s: Option<Trajectory>,
    pub r: Option<Trajectory>,
}

impl Trajectories {
    pub fn get(&self, f: FieldName) -> Option<&Trajectory> {
        match f {
            FieldName::Rho => Some(&self.rho),
            FieldName::S => self.s.as_ref(),
            FieldName::R => self.r.as_ref(),
        }
    }
}

fn uniform_times(t_final: f64, outputs: usize) -> Vec<f64> {
    (0..=outputs).map(|k| t_final * k as f64 / outputs as f64).collect()
}

fn analysis_err(e: impl std::fmt::Display) -> RunError {
    RunError::Analysis(e.to_string())
}

/// Trajectories on `grid` over `[0, grid.t_final]` with `outputs` uniform
/// snapshots. Numerical runs also return solver criteria.
pub(crate) fn compute_trajectories(
    s: &Scenario,
    grid: Arc<Grid>,
    u: &VelocityField,
    outputs: usize,
) -> Result<(Trajectories, Vec<Criterion>), RunError> {
    let t_final = grid.t_final;
    let fields: Vec<(FieldName, &crate::profiles::Profile)> = [
        (FieldName::Rho, Some(&s.initial.rho)),
        (FieldName::S, s.initial.s.as_ref()),
        (FieldName::R, s.initial.r.as_ref()),
    ]
    .into_iter()
    .filter_map(|(f, p)| p.map(|p| (f, p)))
    .collect();
    let mut out: Vec<(FieldName, Trajectory)> = Vec::new();
    let mut criteria = Vec::new();
    match s.solver.source {
        Source::Oracle => {
            let times = uniform_times(t_final, outputs);
            let steps = s.solver.rk_steps.unwrap_or(4 * grid.cells.iter().copied().max().unwrap_or(1));
            let flow = compute_flow(u, grid.clone(), &times, steps).map_err(analysis_err)?;
            for (f, p) in fields {
                let eq = if f == FieldName::S { OracleEquation::Transport } else { OracleEquation::Continuity };
                out.push((f, oracle_trajectory(p, &flow, eq, u.id()).map_err(analysis_err)?));
            }
        }
        Source::Numerical => {
            let tol = &s.tolerances;
            for (f, p) in fields {
                let scheme = scheme_for(f);
                let cfg = SolverConfig::uniform(scheme, s.solver.cfl, t_final, outputs).map_err(analysis_err)?;
                let init = p.sample_grid(grid.clone());
                let traj = match solve_with_stats(&init, u, &cfg) {
                    Ok((t, _)) => t,
                    Err(fail) => {
                        let mut partial = Bundle::default();
                        dump_trajectory(&mut partial, f.name(), &fail.partial);
                        partial.summary = Some(Summary {
                            scenario: s.name.clone(),
                            criteria: vec![Criterion::flag(format!("solver[{}]", f.name()), false)],
                        });
                        return Err(RunError::Aborted { message: fail.to_string(), partial: Box::new(partial) });
                    }
                };
                criteria.extend(solver_criteria(f, scheme, &traj, u, tol.mass_drift));
                out.push((f, traj));
            }
        }
    }
    let mut it = out.into_iter();
    let rho = it.next().expect("rho is always present").1;
    let (mut st, mut rt) = (None, None);
    for (f, t) in it {
        match f {
            FieldName::S => st = Some(t),
            FieldName::R => rt = Some(t),
            FieldName::Rho => unreachable!(),
        }
    }
    Ok((Trajectories { grid, u: u.clone(), rho, s: st, r: rt }, criteria))
}

/// Mass drift (conserving setups only), positivity and maximum principle.
fn solver_criteria(
    f: FieldName,
    scheme: Scheme,
    traj: &Trajectory,
    u: &VelocityField,
    drift_tol: f64,
) -> Vec<Criterion> {
    let name = f.name();
    let mut c = Vec::new();
    let first = traj.first().expect("nonempty");
    match scheme {
        Scheme::UpwindFv => {
            if traj.grid().domain.is_periodic() || u.zero_trace() {
                let m0 = first.integrate();
                let drift = traj.snapshots().iter().map(|s| (s.integrate() - m0).abs()).fold(0.0, f64::max)
                    / m0.abs().max(f64::MIN_POSITIVE);
                c.push(Criterion::at_most(format!("mass_drift[{name}]"), drift, drift_tol));
            }
            let neg = traj.snapshots().iter().flat_map(|s| s.values().iter()).filter(|v| **v < 0.0).count();
            c.push(Criterion::at_most(format!("positivity_violations[{name}]"), neg as f64, 0.0));
        }
        Scheme::SemiLagrangian => {
            let (lo, hi) = (first.min(), first.max());
            let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
            let bad = traj
                .snapshots()
                .iter()
                .flat_map(|s| (0..s.len()).filter(move |&i| s.is_valid(i)).map(move |i| s.values()[i]))
                .filter(|v| *v < lo - slack || *v > hi + slack)
                .count();
            c.push(Criterion::at_most(format!("max_principle_violations[{name}]"), bad as f64, 0.0));
        }
    }
    c
}

fn dump_trajectory(b: &mut Bundle, name: &str, t: &Trajectory) {
    for (k, snap) in t.snapshots().iter().enumerate() {
        let mut bin = Vec::new();
        let mut csv = Vec::new();
        if write_binary(snap, &mut bin).is_ok() && write_csv(snap, &mut csv).is_ok() {
            b.add(format!("fields/{name}_{k:04}.bin"), bin);
            b.add(format!("fields/{name}_{k:04}.csv"), csv);
        }
    }
}

fn default_boundary_phi() -> TestFunctionSpec {
    TestFunctionSpec {
        id: "one_affine".into(),
        space: SpaceProfile::One,
        time: TimeProfile::Affine { a: 1.0, b: 1.0 },
        margin: 0.0,
    }
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().map(f64::abs).fold(0.0, f64::max)
}

fn fmt_row(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",")
}

/// Runs one analysis, appending files and criteria.
fn run_analysis(
    s: &Scenario,
    idx: usize,
    a: &Analysis,
    tr: &Trajectories,
    bundle: &mut Bundle,
    criteria: &mut Vec<Criterion>,
) -> Result<(), RunError> {
    let tol = &s.tolerances;
    let u = &tr.u;
    let grid = &tr.grid;
    let t_final = grid.t_final;
    let tag = format!("{}_{idx}", a.kind());
    match a {
        Analysis::ResidualMatrix { problem, tau, renorms, test_functions, max_abs: limit } => {
            let traj = match problem {
                Problem::Continuity => &tr.rho,
                Problem::Transport => tr.s.as_ref().ok_or_else(|| analysis_err("transport residuals need s"))?,
            };
            let rens: Vec<RenormFunction> =
                renorms.iter().map(|k| make_renorm(k.clone())).collect::<Result<_, _>>().map_err(analysis_err)?;
            let phis = test_functions
                .iter()
                .map(|t| t.build(&grid.domain))
                .collect::<Result<Vec<_>, _>>()
                .map_err(analysis_err)?;
            let rows =
                residual_matrix(*problem, traj, u, &rens, &phis, tau.unwrap_or(t_final)).map_err(analysis_err)?;
            bundle.add(format!("{tag}.csv"), residual_rows_to_csv(&rows));
            let worst = max_abs(rows.iter().map(|r| r.value));
            criteria.push(Criterion::at_most(format!("{tag}.max_abs_residual"), worst, limit.unwrap_or(tol.residual)));
        }
        Analysis::ProductResidual { notions, test_functions, tau, max_abs: limit } => {
            let st = tr.s.as_ref().ok_or_else(|| analysis_err("product residuals need s"))?;
            let mut csv = String::from("notion,phi,tau,value\n");
            let mut worst: f64 = 0.0;
            let tau = tau.unwrap_or(t_final);
            for n in notions {
                for t in test_functions {
                    let phi = t.build(&grid.domain).map_err(analysis_err)?;
                    if crate::weak_forms::check_compatibility(*n, None, &phi, tau).is_err() {
                        continue;
                    }
                    let v = product_residual(&tr.rho, st, u, *n, None, &phi, tau).map_err(analysis_err)?;
                    worst = worst.max(v.abs());
                    csv.push_str(&format!("{},{},{:.17e},{:.17e}\n", n.name(), phi.id, tau, v));
                }
            }
            bundle.add(format!("{tag}.csv"), csv);
            criteria.push(Criterion::at_most(format!("{tag}.max_abs_residual"), worst, limit.unwrap_or(tol.residual)));
        }
        Analysis::CommutatorSweep { field, eps_cells, time_exponent, space_exponent, expect } => {
            let traj = tr.get(*field).ok_or_else(|| analysis_err(format!("no trajectory for {}", field.name())))?;
            let eps: Vec<f64> = eps_cells.iter().map(|c| c * grid.h_max()).collect();
            let table = decay_study(traj, u, &eps, *time_exponent, *space_exponent).map_err(analysis_err)?;
            bundle.add(format!("{tag}.csv"), table.to_csv());
            match expect {
                CommutatorExpectation::Decay => {
                    criteria.push(Criterion::at_least(format!("{tag}.slope"), table.slope, tol.commutator_slope))
                }
                CommutatorExpectation::Monotone => {
                    criteria.push(Criterion::flag(format!("{tag}.strictly_monotone"), table.strictly_monotone()))
                }
            }
        }
        Analysis::VacuumReport { threshold, check_inclusion } => {
            let rho0 = tr.rho.first().expect("nonempty");
            let no_initial_vacuum =
                (0..rho0.len()).filter(|&i| rho0.is_valid(i)).all(|i| rho0.values()[i] > *threshold);
            let check = check_inclusion.unwrap_or(no_initial_vacuum);
            let rep = vacuum_report(&tr.rho, tr.r.as_ref(), *threshold, tol.inclusion, tol.product_deviation)
                .map_err(analysis_err)?;
            bundle.add(format!("{tag}.json"), rep.to_json() + "\n");
            bundle.add(format!("{tag}_series.csv"), rep.series_csv());
            match rep.modulus_exponent {
                Some(e) => {
                    criteria.push(Criterion::at_least(format!("{tag}.modulus_exponent"), e, tol.modulus_exponent))
                }
                None => {
                    let jump = rep.modulus.iter().map(|r| r.max_jump).fold(0.0, f64::max);
                    let limit = RESOLVED_FACTOR * rep.measure_resolution.max(grid.cell_volume());
                    criteria.push(Criterion::at_most(format!("{tag}.measure_variation"), jump, limit));
                }
            }
            if let Some(dev) = rep.max_product_deviation {
                criteria.push(Criterion::at_most(format!("{tag}.product_deviation"), dev, tol.product_deviation));
            }
            if let (true, Some(d)) = (check, &rep.inclusion_defects) {
                criteria.push(Criterion::at_most(
                    format!("{tag}.inclusion_defect"),
                    max_abs(d.iter().map(|p| p.1)),
                    tol.inclusion,
                ));
            }
        }
        Analysis::HypothesisCheck { theorem } => {
            let v = s.verdict(*theorem, u)?;
            bundle.add(format!("{tag}.json"), serde_json::to_string_pretty(&v).expect("serializes") + "\n");
            criteria.push(Criterion::flag(format!("{tag}.{}", theorem.name()), v.admissible));
        }
        Analysis::BoundaryTerms { n_list, test_function } => {
            let spec = test_function.clone().unwrap_or_else(default_boundary_phi);
            let phi = spec.build(&grid.domain).map_err(analysis_err)?;
            let rows = boundary_term_decay(&tr.rho, u, &phi, n_list).map_err(analysis_err)?;
            let mut csv = String::from("n,strip_measure,t1,t2,t3,t4\n");
            for r in &rows {
                csv.push_str(&format!("{},{}\n", r.n, fmt_row(&[r.strip_measure, r.t1, r.t2, r.t3, r.t4])));
            }
            bundle.add(format!("{tag}.csv"), csv);
            let (first, last) = (rows.first().expect("rows").terms(), rows.last().expect("rows").terms());
            let worst = (0..4)
                .map(|k| if last[k] == 0.0 { f64::INFINITY } else { first[k].abs() / last[k].abs() })
                .fold(f64::INFINITY, f64::min);
            criteria.push(Criterion::at_least(format!("{tag}.min_decrease_factor"), worst, tol.boundary_decay));
        }
        Analysis::Hardy { q, n_list, expect } => {
            let study = hardy_study(u, grid, *q, n_list).map_err(analysis_err)?;
            let mut csv = String::from("n,quotient_norm,gradient_norm,ratio\n");
            for r in &study.rows {
                csv.push_str(&format!("{},{}\n", r.n, fmt_row(&[r.quotient_norm, r.gradient_norm, r.ratio])));
            }
            bundle.add(format!("{tag}.csv"), csv);
            match expect {
                HardyExpectation::Stable => {
                    criteria.push(Criterion::at_most(
                        format!("{tag}.ratio_spread"),
                        study.ratio_spread,
                        tol.hardy_spread,
                    ));
                    criteria.push(Criterion::flag(format!("{tag}.bounded"), !study.divergent));
                }
                HardyExpectation::Divergent => {
                    criteria.push(Criterion::flag(format!("{tag}.divergent"), study.divergent))
                }
            }
        }
        Analysis::Bdelta { deltas, threshold, time } => {
            let snap = tr.rho.at_time(time.unwrap_or(t_final)).map_err(analysis_err)?;
            let rows = bdelta_limit_error(snap, deltas, *threshold).map_err(analysis_err)?;
            let mut csv = String::from("delta,gap,bound\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{:.17e},{:.17e},{}\n",
                    r.delta,
                    r.gap,
                    r.bound.map_or(String::new(), |b| format!("{b:.17e}"))
                ));
            }
            bundle.add(format!("{tag}.csv"), csv);
            let monotone = rows.windows(2).all(|w| w[1].gap < w[0].gap || (w[0].gap == 0.0 && w[1].gap == 0.0));
            criteria.push(Criterion::flag(format!("{tag}.monotone"), monotone));
            let excess = rows.iter().filter_map(|r| r.bound.map(|b| r.gap - b)).fold(0.0, f64::max);
            criteria.push(Criterion::at_most(format!("{tag}.bound_excess"), excess, tol.bdelta));
        }
        Analysis::Convergence { levels } => {
            let rows = convergence_study(s, *levels)?;
            bundle.add(format!("{tag}.csv"), convergence_csv(&rows));
            criteria.extend(convergence_criteria(&tag, &rows, tol.order_min, tol.order_max));
        }
        Analysis::TimeShiftReplay { t0, tau, threshold } => {
            let rep = super::time_shift_replay(s, *t0, *tau, *threshold)?;
            bundle.add(format!("{tag}.json"), serde_json::to_string_pretty(&rep).expect("serializes") + "\n");
            criteria.push(Criterion::at_most(
                format!("{tag}.stitched_product_deviation"),
                rep.stitched_deviation,
                tol.product_deviation,
            ));
        }
    }
    Ok(())
}

/// Runs every analysis of the scenario. The bundle holds all CSV/JSON
/// outputs and a summary; repeated runs produce identical bytes.
pub fn run_scenario_with(s: &Scenario, opts: &RunOptions) -> Result<Bundle, RunError> {
    let grid = s.build_grid()?;
    let u = s.build_velocity()?;
    let (tr, mut criteria) = compute_trajectories(s, grid, &u, s.solver.outputs)?;
    let mut bundle = Bundle::default();
    if opts.dump_fields {
        dump_trajectory(&mut bundle, "rho", &tr.rho);
        if let Some(t) = &tr.s {
            dump_trajectory(&mut bundle, "s", t);
        }
        if let Some(t) = &tr.r {
            dump_trajectory(&mut bundle, "R", t);
        }
    }
    for (i, a) in s.analysis.iter().enumerate() {
        run_analysis(s, i, a, &tr, &mut bundle, &mut criteria)?;
    }
    bundle.summary = Some(Summary { scenario: s.name.clone(), criteria });
    Ok(bundle)
}

pub fn run_scenario(s: &Scenario) -> Result<Bundle, RunError> {
    run_scenario_with(s, &RunOptions::default())
}

/// Only the commutator sweeps of the scenario; a default decay sweep on `ρ`
/// when none is configured.
pub fn commutator_only(s: &Scenario) -> Result<Bundle, RunError> {
    let mut t = s.clone();
    t.analysis.retain(|a| matches!(a, Analysis::CommutatorSweep { .. }));
    if t.analysis.is_empty() {
        t.analysis.push(Analysis::CommutatorSweep {
            field: FieldName::Rho,
            eps_cells: vec![32.0, 16.0, 8.0, 4.0],
            time_exponent: Exponent::ONE,
            space_exponent: Exponent::ONE,
            expect: CommutatorExpectation::Decay,
        });
    }
    run_scenario(&t)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub scenario: String,
    pub tuple: Option<ExponentTuple>,
    pub requested: Vec<Theorem>,
    pub verdicts: Vec<TheoremVerdict>,
}

impl HypothesisReport {
    /// Every requested theorem is admissible.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().filter(|v| self.requested.contains(&v.theorem)).all(|v| v.admissible)
    }
}

/// Verdicts of every theorem whose inputs the scenario declares.
pub fn verify_hypotheses(s: &Scenario) -> Result<HypothesisReport, ConfigError> {
    let u = s.build_velocity()?;
    let tuple = s.tuple()?;
    let mut verdicts = Vec::new();
    if tuple.is_some() {
        let has_s = s.exponents.as_ref().is_some_and(|e| e.alpha_s.is_some() && e.beta_s.is_some());
        for t in Theorem::ALL {
            if t == Theorem::ProductSolution && !has_s {
                continue;
            }
            verdicts.push(s.verdict(t, &u)?);
        }
    }
    Ok(HypothesisReport { scenario: s.name.clone(), tuple, requested: s.requested_theorems(), verdicts })
}

/// One solver-vs-oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub field: String,
    pub scheme: String,
    pub cells: usize,
    pub h: f64,
    /// `‖numerical(T) − oracle(T)‖_{L¹}`.
    pub error: f64,
    /// Order against the previous level.
    pub order: Option<f64>,
}

/// Solver errors against the oracle at the final time, on the scenario grid
/// refined by 2 per level, for every field with initial data.
pub fn convergence_study(s: &Scenario, levels: usize) -> Result<Vec<ConvergenceRow>, RunError> {
    if levels < 2 {
        return Err(ConfigError::at("levels", "needs at least two levels").into());
    }
    let base = s.build_grid()?;
    let u = s.build_velocity()?;
    let t_final = base.t_final;
    let mut rows = Vec::new();
    for f in [FieldName::Rho, FieldName::S, FieldName::R] {
        if require_field(s, f).is_err() {
            continue;
        }
        let prof = match f {
            FieldName::Rho => &s.initial.rho,
            FieldName::S => s.initial.s.as_ref().expect("checked"),
            FieldName::R => s.initial.r.as_ref().expect("checked"),
        };
        let scheme = scheme_for(f);
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for level in 0..levels {
            let factor = 1usize << level;
            let cells: Vec<usize> = base.cells.iter().map(|c| c * factor).collect();
            let grid = Arc::new(Grid::new(base.domain.clone(), cells.clone(), t_final).map_err(analysis_err)?);
            let cfg = SolverConfig { cfl: s.solver.cfl, scheme, t_final, output_times: vec![t_final] };
            let (num, _) = solve_with_stats(&prof.sample_grid(grid.clone()), &u, &cfg)
                .map_err(|e| RunError::Analysis(e.to_string()))?;
            let steps = 4 * cells.iter().copied().max().unwrap_or(1);
            let flow = compute_flow(&u, grid.clone(), &[0.0, t_final], steps).map_err(analysis_err)?;
            let exact: ScalarField = match f {
                FieldName::S => exact_transport(prof, &flow, t_final),
                _ => exact_continuity(prof, &flow, t_final),
            }
            .map_err(analysis_err)?;
            let err = exact.distance(num.last().expect("final snapshot"), Exponent::ONE).map_err(analysis_err)?;
            hs.push(grid.h_max());
            errs.push(err);
            rows.push(ConvergenceRow {
                field: f.name().into(),
                scheme: scheme.name().into(),
                cells: cells[0],
                h: grid.h_max(),
                error: err,
                order: None,
            });
        }
        let orders = empirical_orders(&hs, &errs);
        let n = rows.len();
        for (k, o) in orders.into_iter().enumerate() {
            rows[n - levels + k + 1].order = Some(o);
        }
    }
    Ok(rows)
}

pub(crate) fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut csv = String::from("field,scheme,cells,h,error,order\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{:.17e},{:.17e},{}\n",
            r.field,
            r.scheme,
            r.cells,
            r.h,
            r.error,
            r.order.map_or(String::new(), |o| format!("{o:.6}"))
        ));
    }
    csv
}

pub(crate) fn convergence_criteria(tag: &str, rows: &[ConvergenceRow], lo: f64, hi: f64) -> Vec<Criterion> {
    let mut c = Vec::new();
    for field in ["rho", "s", "R"] {
        let orders: Vec<f64> = rows.iter().filter(|r| r.field == field).filter_map(|r| r.order).collect();
        if orders.is_empty() {
            continue;
        }
        let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
        let max = orders.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        c.push(Criterion::at_least(format!("{tag}.min_order[{field}]"), min, lo));
        c.push(Criterion::at_most(format!("{tag}.max_order[{field}]"), max, hi));
    }
    c
}
