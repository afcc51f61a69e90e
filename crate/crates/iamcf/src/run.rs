//! The configuration-driven pipeline: continuation solve, checks, artifacts.

use std::path::Path;

use iamcf_core::diagnostics::{decay_proxy, MAXGRAD_SLACK};
use iamcf_core::flow::{
    area_growth_series, contour_curvatures, extract_sublevel, minimality_spot_check, properness_proxy,
    weak_curvature_residual,
};
use iamcf_core::grid::NodeKind;
use iamcf_core::solver::{annulus_nodes, continuation_solve, extrapolate_limit, ContinuationResult};
use iamcf_core::{Obstacle, ScalarField, SolveReport};

use crate::config::{Check, Problem, RunConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::summary::{render, CheckOutcome, Status};

/// Relative slack of the gradient bound in terms of the inradius.
const INRADIUS_FACTOR: f64 = 1.0 + iamcf_core::diagnostics::INRADIUS_SLACK;
/// Largest tolerated fraction of masked contour vertices.
const MASKED_LIMIT: f64 = 0.01;

#[derive(Debug)]
pub struct RunReport {
    pub outcomes: Vec<CheckOutcome>,
    pub continuation: ContinuationResult,
    /// Extrapolated `p → 1` arrival time, when the schedule has two entries.
    pub limit: Option<ScalarField>,
}

impl RunReport {
    pub fn failed(&self) -> bool {
        self.outcomes.iter().any(|o| o.status == Status::Fail)
    }

    pub fn summary(&self) -> String {
        render(&self.outcomes)
    }
}

/// Solves, runs every requested check and writes the artifacts under `out`.
/// A solver failure is returned after the completed stages are written.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let problem = config.problem()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::write_text(&out.join("config.toml"), &config.to_toml())?;
    let continuation = continuation_solve(&problem.norm, &problem.domain, &problem.solver)?;
    write_solves(out, &problem, &continuation)?;
    if let Some(err) = continuation.aborted.clone() {
        return Err(err.into());
    }
    let limit = (continuation.reports.len() >= 2).then(|| extrapolate_limit(&continuation.reports)).transpose()?;
    if let Some(limit) = &limit {
        io::write_field_csv(&out.join("fields/u_limit.csv"), limit)?;
        io::write_field_binary(&out.join("fields/u_limit.bin"), limit)?;
    }
    let flow_field = match &limit {
        Some(l) => l.clone(),
        None => last(&continuation).arrival_time()?,
    };
    let ctx = Context { config, problem: &problem, continuation: &continuation, flow_field: &flow_field, out };
    let mut outcomes = Vec::new();
    let mut seen = Vec::new();
    for &check in &config.checks {
        if seen.contains(&check) {
            continue;
        }
        seen.push(check);
        outcomes.push(ctx.evaluate(check)?);
    }
    let report = RunReport { outcomes, continuation, limit };
    io::write_text(&out.join("summary.txt"), &report.summary())?;
    Ok(report)
}

fn last(c: &ContinuationResult) -> &SolveReport {
    c.reports.last().expect("a successful continuation has at least one stage")
}

/// One line of `solves.csv`.
#[derive(serde::Serialize)]
struct SolveRow {
    p: f64,
    iterations: usize,
    converged: bool,
    energy: f64,
    gradient_norm: f64,
    tol_grad: f64,
    regularization: f64,
    regularization_sensitivity: Option<f64>,
    positivity_violations: usize,
    barrier_violation: f64,
    barrier_slack: f64,
    sup_interior: Option<f64>,
    sup_boundary: Option<f64>,
    inradius: Option<f64>,
    decay_outer: f64,
    decay_mid: f64,
    properness_outer_min: f64,
    properness_mid_max: f64,
}

const SOLVE_COLUMNS: [&str; 18] = [
    "p",
    "iterations",
    "converged",
    "energy",
    "gradient_norm",
    "tol_grad",
    "regularization",
    "regularization_sensitivity",
    "positivity_violations",
    "barrier_violation",
    "barrier_slack",
    "sup_interior",
    "sup_boundary",
    "inradius",
    "decay_outer",
    "decay_mid",
    "properness_outer_min",
    "properness_mid_max",
];

fn write_solves(out: &Path, problem: &Problem, c: &ContinuationResult) -> Result<()> {
    let mut rows = Vec::new();
    for r in &c.reports {
        let u = r.arrival_time()?;
        let tag = format!("p{}", r.p);
        io::write_field_binary(&out.join(format!("fields/v_{tag}.bin")), &r.field)?;
        io::write_field_binary(&out.join(format!("fields/u_{tag}.bin")), &u)?;
        io::write_field_csv(&out.join(format!("fields/u_{tag}.csv")), &u)?;
        let (decay_outer, decay_mid) = decay_proxy(&problem.norm, &problem.domain, &r.field);
        let proper = properness_proxy(&problem.domain, &u);
        let b = r.bounds.as_ref();
        rows.push(SolveRow {
            p: r.p,
            iterations: r.iterations,
            converged: r.converged,
            energy: r.energy,
            gradient_norm: r.gradient_norm,
            tol_grad: r.tol_grad,
            regularization: r.regularization,
            regularization_sensitivity: r.regularization_sensitivity,
            positivity_violations: r.positivity_violations,
            barrier_violation: r.barrier.max_violation,
            barrier_slack: r.barrier.slack,
            sup_interior: b.map(|b| b.sup_interior),
            sup_boundary: b.map(|b| b.sup_boundary),
            inradius: b.map(|b| b.inradius),
            decay_outer,
            decay_mid,
            properness_outer_min: proper.outer_min,
            properness_mid_max: proper.mid_max,
        });
    }
    io::write_table(&out.join("solves.csv"), &SOLVE_COLUMNS, rows)?;
    let cauchy = c.reports.iter().skip(1).zip(&c.cauchy).map(|(r, d)| (r.p, *d));
    io::write_table(&out.join("cauchy.csv"), &["p", "sup_diff_annulus"], cauchy)
}

struct Context<'a> {
    config: &'a RunConfig,
    problem: &'a Problem,
    continuation: &'a ContinuationResult,
    flow_field: &'a ScalarField,
    out: &'a Path,
}

impl Context<'_> {
    fn evaluate(&self, check: Check) -> Result<CheckOutcome> {
        let reports = &self.continuation.reports;
        let bounds = || reports.iter().filter_map(|r| r.bounds.as_ref());
        Ok(match check {
            Check::Barriers => {
                let ratio = reports.iter().map(|r| r.barrier.max_violation / r.barrier.slack).fold(f64::MIN, f64::max);
                let pass = reports.iter().all(|r| r.barrier.passed);
                CheckOutcome::new(check, Status::from_pass(pass), ratio, 1.0)
            }
            Check::Maxgrad => {
                let excess = bounds().map(|b| b.interior_excess).fold(f64::MIN, f64::max);
                CheckOutcome::new(check, Status::from_pass(bounds().all(|b| b.maxgrad_pass)), excess, MAXGRAD_SLACK)
            }
            Check::InradiusBound => {
                let ratio = bounds()
                    .map(|b| b.sup_interior.max(b.sup_boundary) / b.inradius_bound)
                    .fold(f64::MIN, f64::max);
                let inradius = bounds().next().map_or(f64::NAN, |b| b.inradius);
                CheckOutcome::new(check, Status::from_pass(bounds().all(|b| b.inradius_pass)), ratio, INRADIUS_FACTOR)
                    .with("inradius", inradius)
            }
            Check::BoundaryCurvature => self.boundary_curvature(),
            Check::Growth => self.growth()?,
            Check::Minimality => {
                let report = minimality_spot_check(
                    &self.problem.norm,
                    &self.problem.domain,
                    self.flow_field,
                    self.config.flow.minimality_trials,
                    self.config.seed,
                )?;
                io::write_minimality_csv(&self.out.join("minimality.csv"), &report)?;
                CheckOutcome::new(check, Status::from_pass(report.passed()), report.failures() as f64, 0.0)
                    .with("trials", report.trials.len() as f64)
                    .with("worst_margin", report.worst_margin())
            }
            Check::WeakCurvature => {
                let tol = self.config.flow.curvature_tol;
                let (mut mean, mut max, mut masked) = (0.0f64, 0.0f64, 0.0f64);
                for &t in &self.config.flow.curvature_levels {
                    let w = weak_curvature_residual(&self.problem.norm, self.flow_field, Some(&self.problem.domain), t)?;
                    mean = mean.max(w.mean);
                    max = max.max(w.max);
                    masked = masked.max(w.masked_fraction());
                }
                CheckOutcome::new(check, Status::from_pass(mean <= tol && masked <= MASKED_LIMIT), mean, tol)
                    .with("max", max)
                    .with("masked_fraction", masked)
            }
            Check::PConvergence => self.p_convergence()?,
        })
    }

    /// `ε_p = |sup_∂Ω F(∇u_p) − H_F⁺|` must shrink along the schedule and end
    /// below a tenth of the boundary curvature.
    fn boundary_curvature(&self) -> CheckOutcome {
        let check = Check::BoundaryCurvature;
        let gaps: Vec<(f64, f64, f64)> = self
            .continuation
            .reports
            .iter()
            .filter_map(|r| r.bounds.as_ref())
            .filter_map(|b| Some((b.p, b.boundary_gap()?, b.boundary_curvature?)))
            .collect();
        let Some(&(_, gap, curvature)) = gaps.last() else {
            return CheckOutcome::new(check, Status::HypothesisUnverified, f64::NAN, f64::NAN);
        };
        let tol = 0.1 * curvature;
        let decreasing = gaps.windows(2).all(|w| w[1].1 <= w[0].1);
        CheckOutcome::new(check, Status::from_pass(decreasing && gap <= tol), gap, tol)
    }

    fn growth(&self) -> Result<CheckOutcome> {
        let flow = &self.config.flow;
        let (norm, domain) = (&self.problem.norm, &self.problem.domain);
        let series = area_growth_series(norm, domain, self.flow_field, &flow.growth_times)?;
        let p = last(self.continuation).p;
        io::write_growth_csv(&self.out.join("growth.csv"), &series, self.config.seed, p)?;
        for &t in &flow.growth_times {
            let snap = extract_sublevel(norm, self.flow_field, Some(domain), t)?;
            let mut contour = snap.contour;
            let curvatures = contour_curvatures(norm, self.flow_field, Some(domain), &contour);
            for (f, h) in contour.facets.iter_mut().zip(curvatures) {
                f.curvature = h;
            }
            io::write_contour_csv(&self.out.join(format!("contours/N_t{t}.csv")), &contour)?;
        }
        let tol = flow.growth_tol;
        let worst = series.samples.iter().map(|s| (s.ratio() - 1.0).abs()).fold(0.0, f64::max);
        let worst_coarea =
            series.samples.iter().filter_map(|s| s.coarea_ratio()).map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
        let status = if !series.hypothesis_verified {
            Status::HypothesisUnverified
        } else {
            Status::from_pass(worst <= tol && worst_coarea <= 2.0 * tol)
        };
        let mut outcome = CheckOutcome::new(Check::Growth, status, worst, tol).with("coarea", worst_coarea);
        for s in &series.samples {
            outcome = outcome.with(format!("ratio_t{}", s.t), s.ratio());
        }
        Ok(outcome)
    }

    /// Wulff obstacles are compared with the closed-form limit
    /// `(n − 1) log(F°/r)` on the annulus `1.5r ≤ F° ≤ 3r`: the gap must
    /// shrink along the schedule and the extrapolated limit must fall within
    /// tolerance. Other obstacles only require shrinking successive
    /// differences.
    fn p_convergence(&self) -> Result<CheckOutcome> {
        let check = Check::PConvergence;
        let c = self.continuation;
        match self.problem.domain.obstacle() {
            Obstacle::Wulff(w) if w.norm() == &self.problem.norm => {
                let gaps = limit_gaps(self.problem, c)?;
                let limit_gap = relative_limit_gap(self.problem, self.flow_field)?;
                let decreasing = gaps.windows(2).all(|g| g[1] < g[0]);
                let tol = self.config.flow.convergence_tol;
                let rows = c.reports.iter().zip(&gaps).map(|(r, g)| (r.p, *g));
                io::write_table(&self.out.join("p_convergence.csv"), &["p", "relative_gap"], rows)?;
                let status = Status::from_pass(decreasing && limit_gap <= tol);
                Ok(CheckOutcome::new(check, status, limit_gap, tol)
                    .with("gap_smallest_p", gaps.last().copied().unwrap_or(f64::NAN)))
            }
            _ => {
                if c.cauchy.len() < 2 {
                    return Ok(CheckOutcome::new(check, Status::HypothesisUnverified, f64::NAN, f64::NAN));
                }
                let n = c.cauchy.len();
                let decreasing = c.cauchy.windows(2).all(|d| d[1] < d[0]);
                Ok(CheckOutcome::new(check, Status::from_pass(decreasing), c.cauchy[n - 1], c.cauchy[n - 2]))
            }
        }
    }
}

/// `sup |u − (n − 1) log(F°/r)| / sup |(n − 1) log(F°/r)|` on the annulus
/// `1.5r ≤ F° ≤ 3r` of a Wulff problem.
pub fn relative_limit_gap(problem: &Problem, u: &ScalarField) -> Result<f64> {
    let Obstacle::Wulff(w) = problem.domain.obstacle() else {
        return Err(Error::Invalid { field: "obstacle".into(), message: "closed-form limit needs a Wulff obstacle".into() });
    };
    let annulus = annulus_nodes(&problem.norm, &problem.domain, 1.5, 3.0)?;
    let g = problem.domain.grid();
    let n = problem.norm.dim() as f64;
    let (mut gap, mut scale) = (0.0f64, 0.0f64);
    for &k in &annulus {
        let exact = (n - 1.0) * (w.gauge(&g.point_of(k)) / w.radius()).ln();
        gap = gap.max((u.values[k] - exact).abs());
        scale = scale.max(exact.abs());
    }
    Ok(gap / scale)
}

/// [`relative_limit_gap`] for every stage of a continuation run.
pub fn limit_gaps(problem: &Problem, c: &ContinuationResult) -> Result<Vec<f64>> {
    c.reports.iter().map(|r| relative_limit_gap(problem, &r.arrival_time()?)).collect()
}

/// One row of a refinement study.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct StudyRow {
    pub resolution: usize,
    pub h: f64,
    pub p: f64,
    /// Wulff: `sup |v_p − (r/F°)^α|` over interior nodes. Otherwise
    /// `sup |u_p − u_ref|` on the annulus, with the reference taken from the
    /// finest resolution at the smallest `p`.
    pub error: f64,
    /// Wulff only: relative gap to the `p → 1` limit on the annulus.
    pub limit_gap: Option<f64>,
}

/// Observed order between two consecutive resolutions at fixed `p`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ObservedOrder {
    pub p: f64,
    pub h_coarse: f64,
    pub h_fine: f64,
    pub order: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub orders: Vec<ObservedOrder>,
}

impl StudyTable {
    pub fn write(&self, out: &Path) -> Result<()> {
        io::write_table(&out.join("convergence.csv"), &["resolution", "h", "p", "error", "limit_gap"], &self.rows)?;
        io::write_table(&out.join("orders.csv"), &["p", "h_coarse", "h_fine", "order"], &self.orders)
    }
}

/// Runs the continuation at each resolution with the given schedule and
/// tabulates errors against the closed form (Wulff) or the finest run.
pub fn convergence_study(config: &RunConfig, resolutions: &[usize], schedule: &[f64]) -> Result<StudyTable> {
    if resolutions.is_empty() || schedule.is_empty() {
        return Err(Error::Invalid { field: "study".into(), message: "needs at least one resolution and one p".into() });
    }
    let mut resolutions = resolutions.to_vec();
    resolutions.sort_unstable();
    resolutions.dedup();
    let mut runs = Vec::new();
    for &resolution in &resolutions {
        let mut cfg = config.clone();
        cfg.grid.resolution = resolution;
        cfg.solver.schedule = schedule.to_vec();
        let problem = cfg.problem()?;
        let c = continuation_solve(&problem.norm, &problem.domain, &problem.solver)?;
        if let Some(err) = c.aborted {
            return Err(err.into());
        }
        runs.push((resolution, problem, c.reports));
    }
    let wulff = matches!(runs[0].1.domain.obstacle(), Obstacle::Wulff(w) if w.norm() == &runs[0].1.norm);
    let reference = if wulff {
        None
    } else {
        let (_, _, reports) = runs.last().expect("at least one run");
        Some(reports.last().expect("at least one stage").arrival_time()?)
    };
    let mut rows = Vec::new();
    for (resolution, problem, reports) in &runs {
        let h = problem.domain.grid().h;
        for r in reports {
            let (error, limit_gap) = match &reference {
                None => (potential_error(problem, r), Some(relative_limit_gap(problem, &r.arrival_time()?)?)),
                Some(u_ref) => (reference_error(problem, &r.arrival_time()?, u_ref)?, None),
            };
            rows.push(StudyRow { resolution: *resolution, h, p: r.p, error, limit_gap });
        }
    }
    let mut orders = Vec::new();
    for &p in schedule {
        let at_p: Vec<&StudyRow> = rows.iter().filter(|r| r.p == p).collect();
        for pair in at_p.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let order = (a.error / b.error).ln() / (a.h / b.h).ln();
            orders.push(ObservedOrder { p, h_coarse: a.h, h_fine: b.h, order });
        }
    }
    Ok(StudyTable { rows, orders })
}

fn potential_error(problem: &Problem, report: &SolveReport) -> f64 {
    let Obstacle::Wulff(w) = problem.domain.obstacle() else { unreachable!("checked by the caller") };
    let n = problem.norm.dim() as f64;
    let alpha = (n - report.p) / (report.p - 1.0);
    let g = problem.domain.grid();
    (0..g.len())
        .filter(|k| problem.domain.kind(*k) == NodeKind::Interior)
        .map(|k| {
            let exact = (w.radius() / w.gauge(&g.point_of(k))).powf(alpha);
            (report.field.values[k] - exact).abs()
        })
        .fold(0.0, f64::max)
}

fn reference_error(problem: &Problem, u: &ScalarField, reference: &ScalarField) -> Result<f64> {
    let annulus = annulus_nodes(&problem.norm, &problem.domain, 1.5, 3.0)?;
    let g = problem.domain.grid();
    Ok(annulus
        .iter()
        .map(|&k| (u.values[k] - reference.interpolate(g.point_of(k))).abs())
        .fold(0.0, f64::max))
}
