//! Discrete p-capacitary potential: energy, gradient and a damped Newton
//! minimizer with continuation in `p`.

use alloc::{format, vec, vec::Vec};

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Side};

use crate::error::{Error, Result};
use crate::field::{FieldMeaning, ScalarField};
use crate::grid::{GridDomain, NodeKind, Obstacle};
use crate::math::{exp, ln, powf, sqrt};
use crate::mesh::{BoundaryFit, Mesh, Vertex};
use crate::norm::{MinkowskiNorm, PolarNorm};

/// Default lower guard on `p`; smaller values need [`SolverConfig::allow_small_p`].
pub const MIN_P: f64 = 1.01;

/// Dirichlet data on the outer edge of the box.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum OuterBc {
    /// The upper barrier `(s / F°(x − y₀))^α`.
    #[default]
    BarrierValue,
    Zero,
    /// One value per grid node; only outer-boundary entries are read.
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub p: f64,
    /// Gradient regularization. `None` picks `1e-6` times the smallest
    /// barrier gradient on the outer boundary.
    pub regularization: Option<f64>,
    /// Absolute gradient tolerance. `None` means `1e-8` times the gradient
    /// norm at the cold start, where every free node is zero.
    pub tol_grad: Option<f64>,
    pub tol_energy: f64,
    pub max_iter: usize,
    /// Decreasing list of exponents used by [`continuation_solve`].
    pub schedule: Vec<f64>,
    pub outer_bc: OuterBc,
    pub boundary_fit: BoundaryFit,
    /// Value of `v` on the obstacle.
    pub obstacle_value: f64,
    /// Re-solve at a tenth of the regularization and report the change.
    pub confirm_regularization: bool,
    pub allow_small_p: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 1.2,
            regularization: None,
            tol_grad: None,
            tol_energy: 1e-12,
            max_iter: 200,
            schedule: vec![1.5, 1.3, 1.2, 1.1, 1.05],
            outer_bc: OuterBc::BarrierValue,
            boundary_fit: BoundaryFit::CutCell,
            obstacle_value: 1.0,
            confirm_regularization: true,
            allow_small_p: false,
        }
    }
}

impl SolverConfig {
    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    /// Checks `p` and the tolerances for dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        check_p(self.p, n, self.allow_small_p)?;
        if !(self.tol_energy > 0.0) || self.tol_grad.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if self.regularization.is_some_and(|d| !(d >= 0.0)) {
            return Err(Error::InvalidParameter("regularization must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn validate_schedule(&self, n: usize) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::InvalidParameter("schedule is empty".into()));
        }
        for w in self.schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidParameter("schedule must be strictly decreasing".into()));
            }
        }
        for p in &self.schedule {
            check_p(*p, n, self.allow_small_p)?;
        }
        Ok(())
    }
}

fn check_p(p: f64, n: usize, allow_small: bool) -> Result<()> {
    let n = n as f64;
    if !(p > 1.0 && p < n) {
        return Err(Error::InvalidParameter(format!("p = {p} must satisfy 1 < p < n = {n}")));
    }
    if !allow_small && !(p >= MIN_P && p <= n - 0.1) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} is outside the guarded range [{MIN_P}, {}]",
            n - 0.1
        )));
    }
    Ok(())
}

/// Inner and outer Wulff shapes around the obstacle and the associated
/// explicit p-capacitary potentials.
#[derive(Clone, Debug)]
pub struct Barriers {
    pub inner_center: [f64; 2],
    pub inner_radius: f64,
    pub outer_center: [f64; 2],
    pub outer_radius: f64,
    polar: PolarNorm,
}

impl Barriers {
    /// `W_r(x₀) ⊂ obstacle ⊂ W_s(y₀)`. For a Wulff obstacle of the same norm
    /// both coincide with it; polygons use their centroid and the tightest
    /// radii about it.
    pub fn new(norm: &MinkowskiNorm, obstacle: &Obstacle) -> Result<Self> {
        let polar = norm.polar();
        match obstacle {
            Obstacle::Wulff(w) if w.norm() == norm => {
                let c = [w.center()[0], w.center()[1]];
                Ok(Self { inner_center: c, inner_radius: w.radius(), outer_center: c, outer_radius: w.radius(), polar })
            }
            Obstacle::Wulff(w) => {
                // different norm: sample the boundary
                let c = [w.center()[0], w.center()[1]];
                let contour = crate::wulff::sample_wulff_boundary(w, 2048)?;
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for f in &contour.facets {
                    let g = polar.eval_unchecked(&[f.a[0] - c[0], f.a[1] - c[1]]);
                    lo = lo.min(g);
                    hi = hi.max(g);
                }
                Ok(Self { inner_center: c, inner_radius: lo * (1.0 - 1e-3), outer_center: c, outer_radius: hi * (1.0 + 1e-3), polar })
            }
            Obstacle::Polygon(poly) => {
                let c = poly.centroid();
                if !poly.contains(c) {
                    return Err(Error::Unsupported("polygon centroid lies outside the polygon".into()));
                }
                let inner = if poly.is_convex() {
                    poly.half_planes()
                        .iter()
                        .map(|(n, off)| (off - n[0] * c[0] - n[1] * c[1]) / norm.eval_unchecked(n))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    // largest Wulff shape about the centroid avoiding the boundary
                    let mut r = f64::INFINITY;
                    let v = poly.vertices();
                    for k in 0..v.len() {
                        let (a, b) = (v[k], v[(k + 1) % v.len()]);
                        for s in 0..=256 {
                            let t = s as f64 / 256.0;
                            let x = [a[0] + t * (b[0] - a[0]) - c[0], a[1] + t * (b[1] - a[1]) - c[1]];
                            r = r.min(polar.eval_unchecked(&x));
                        }
                    }
                    r * (1.0 - 1e-3)
                };
                let outer = poly
                    .vertices()
                    .iter()
                    .map(|v| polar.eval_unchecked(&[v[0] - c[0], v[1] - c[1]]))
                    .fold(0.0, f64::max);
                Ok(Self { inner_center: c, inner_radius: inner, outer_center: c, outer_radius: outer, polar })
            }
        }
    }

    pub fn exponent(p: f64, n: usize) -> f64 {
        (n as f64 - p) / (p - 1.0)
    }

    pub fn inner_gauge(&self, x: [f64; 2]) -> f64 {
        self.polar.eval_unchecked(&[x[0] - self.inner_center[0], x[1] - self.inner_center[1]])
    }

    pub fn outer_gauge(&self, x: [f64; 2]) -> f64 {
        self.polar.eval_unchecked(&[x[0] - self.outer_center[0], x[1] - self.outer_center[1]])
    }

    /// `(r / F°(x − x₀))^α`.
    pub fn lower(&self, x: [f64; 2], p: f64) -> f64 {
        powf(self.inner_radius / self.inner_gauge(x), Self::exponent(p, 2))
    }

    /// `(s / F°(x − y₀))^α`.
    pub fn upper(&self, x: [f64; 2], p: f64) -> f64 {
        powf(self.outer_radius / self.outer_gauge(x), Self::exponent(p, 2))
    }
}

/// Integrand `(1/p)(F(ξ)² + δ²)^{p/2}` with first and second derivatives.
#[derive(Clone, Copy, Debug)]
struct Density {
    p: f64,
    delta2: f64,
}

struct Local {
    grad: [f64; 2],
    hess: [f64; 4],
}

impl Density {
    #[inline]
    fn value(&self, norm: &MinkowskiNorm, g: [f64; 2]) -> f64 {
        let f = norm.eval_unchecked(&g);
        powf(f * f + self.delta2, 0.5 * self.p) / self.p
    }

    /// `W(g₁) − W(g₀)` without cancellation.
    #[inline]
    fn difference(&self, norm: &MinkowskiNorm, g0: [f64; 2], g1: [f64; 2]) -> f64 {
        let f0 = norm.eval_unchecked(&g0);
        let f1 = norm.eval_unchecked(&g1);
        let s0 = f0 * f0 + self.delta2;
        let s1 = f1 * f1 + self.delta2;
        if s0 == 0.0 {
            return powf(s1, 0.5 * self.p) / self.p;
        }
        let ratio = (f1 - f0) * (f1 + f0) / s0;
        powf(s0, 0.5 * self.p) * libm::expm1(0.5 * self.p * libm::log1p(ratio)) / self.p
    }

    fn local(&self, norm: &MinkowskiNorm, g: [f64; 2], want_hess: bool) -> Local {
        let zero = g[0] == 0.0 && g[1] == 0.0;
        let dir = if zero { [1.0, 0.0] } else { g };
        let mut fx = [0.0; 2];
        norm.grad_unchecked(&dir, &mut fx);
        let f = if zero { 0.0 } else { norm.eval_unchecked(&g) };
        let s = f * f + self.delta2;
        if s == 0.0 {
            return Local { grad: [0.0; 2], hess: [0.0; 4] };
        }
        let a = powf(s, 0.5 * self.p - 1.0);
        let grad = [a * f * fx[0], a * f * fx[1]];
        let mut hess = [0.0; 4];
        if want_hess {
            let mut d2f = [0.0; 4];
            if norm.hess_unchecked(&dir, &mut d2f).is_err() {
                // lq with q < 2 on an axis: nudge off the hyperplane
                let nudged = [dir[0] + 1e-9 * crate::math::norm2(&dir), dir[1] + 1e-9 * crate::math::norm2(&dir)];
                let _ = norm.hess_unchecked(&nudged, &mut d2f);
            }
            // D²F is (−1)-homogeneous
            let fd = norm.eval_unchecked(&dir);
            let b = (self.p - 2.0) * a / s;
            for i in 0..2 {
                for j in 0..2 {
                    let d2g = fd * d2f[2 * i + j] + fx[i] * fx[j];
                    hess[2 * i + j] = a * d2g + b * f * f * fx[i] * fx[j];
                }
            }
        }
        Local { grad, hess }
    }
}

/// The discrete energy on a fixed mesh.
pub struct DiscreteEnergy<'a> {
    norm: &'a MinkowskiNorm,
    domain: &'a GridDomain,
    mesh: Mesh,
    density: Density,
    obstacle_value: f64,
}

impl<'a> DiscreteEnergy<'a> {
    pub fn new(norm: &'a MinkowskiNorm, domain: &'a GridDomain, p: f64, regularization: f64, fit: BoundaryFit) -> Result<Self> {
        if norm.dim() != 2 {
            return Err(Error::Unsupported("grid solves are two-dimensional".into()));
        }
        if !(p > 1.0) {
            return Err(Error::InvalidParameter("p must exceed 1".into()));
        }
        Ok(Self {
            norm,
            domain,
            mesh: Mesh::build(domain, fit),
            density: Density { p, delta2: regularization * regularization },
            obstacle_value: 1.0,
        })
    }

    pub fn with_obstacle_value(mut self, value: f64) -> Self {
        self.obstacle_value = value;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn energy(&self, v: &[f64]) -> f64 {
        self.mesh
            .elements
            .iter()
            .map(|e| e.weight * self.density.value(self.norm, e.gradient(v, self.obstacle_value)))
            .sum()
    }

    /// `E(v₁) − E(v₀)`, accumulated element by element.
    pub fn energy_difference(&self, v0: &[f64], v1: &[f64]) -> f64 {
        self.mesh
            .elements
            .iter()
            .map(|e| {
                e.weight
                    * self.density.difference(
                        self.norm,
                        e.gradient(v0, self.obstacle_value),
                        e.gradient(v1, self.obstacle_value),
                    )
            })
            .sum()
    }

    /// Gradient with respect to nodal values; zero on constrained nodes.
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for e in &self.mesh.elements {
            let loc = self.density.local(self.norm, e.gradient(v, self.obstacle_value), false);
            for k in 0..3 {
                if let Vertex::Node(n) = e.verts[k] {
                    out[n] += e.weight * (loc.grad[0] * e.grads[k][0] + loc.grad[1] * e.grads[k][1]);
                }
            }
        }
        for (k, o) in out.iter_mut().enumerate() {
            if self.domain.kind(k) != NodeKind::Interior {
                *o = 0.0;
            }
        }
        out
    }
}

/// `Σ (1/p)(F(∇v)² + δ²)^{p/2}` over the cut-cell mesh.
pub fn energy(norm: &MinkowskiNorm, domain: &GridDomain, field: &ScalarField, p: f64, regularization: f64) -> Result<f64> {
    check_field(domain, field)?;
    Ok(DiscreteEnergy::new(norm, domain, p, regularization, BoundaryFit::CutCell)?.energy(&field.values))
}

/// Exact gradient of [`energy`] with respect to the free nodal values.
pub fn energy_gradient(norm: &MinkowskiNorm, domain: &GridDomain, field: &ScalarField, p: f64, regularization: f64) -> Result<Vec<f64>> {
    check_field(domain, field)?;
    Ok(DiscreteEnergy::new(norm, domain, p, regularization, BoundaryFit::CutCell)?.gradient(&field.values))
}

fn check_field(domain: &GridDomain, field: &ScalarField) -> Result<()> {
    if field.grid != *domain.grid() {
        return Err(Error::InvalidParameter("field grid differs from the domain grid".into()));
    }
    Ok(())
}

/// Free-node numbering and the fixed sparsity pattern of the Hessian.
struct Assembly {
    dof: Vec<usize>,
    nodes: Vec<usize>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: faer::sparse::Argsort<usize>,
    symbolic_llt: SymbolicLlt<usize>,
    /// `(value index, row)` of the element contributions on the diagonal.
    diagonal_slots: Vec<(usize, usize)>,
    entries: usize,
}

const NOT_FREE: usize = usize::MAX;

impl Assembly {
    fn new(energy: &DiscreteEnergy<'_>) -> Result<Self> {
        let kinds = energy.domain.kinds();
        let mut dof = vec![NOT_FREE; kinds.len()];
        let mut nodes = Vec::new();
        for (k, kind) in kinds.iter().enumerate() {
            if *kind == NodeKind::Interior {
                dof[k] = nodes.len();
                nodes.push(k);
            }
        }
        let n = nodes.len();
        let mut pairs = Vec::with_capacity(6 * energy.mesh.elements.len() + n);
        for e in &energy.mesh.elements {
            for_each_pair(e, &dof, |a, b, _, _| pairs.push(Pair { row: a.max(b), col: a.min(b) }));
        }
        let entries = pairs.len();
        let diagonal_slots = pairs.iter().enumerate().filter(|(_, p)| p.row == p.col).map(|(i, p)| (i, p.row)).collect();
        pairs.extend((0..n).map(|i| Pair { row: i, col: i }));
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let symbolic_llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(Self { dof, nodes, symbolic, argsort, symbolic_llt, diagonal_slots, entries })
    }

    fn hessian_values(&self, energy: &DiscreteEnergy<'_>, v: &[f64], shift: f64) -> Vec<f64> {
        let mut vals = Vec::with_capacity(self.entries + self.nodes.len());
        for e in &energy.mesh.elements {
            let loc = energy.density.local(energy.norm, e.gradient(v, energy.obstacle_value), true);
            let h = loc.hess;
            for_each_pair(e, &self.dof, |_, _, k, l| {
                let (gk, gl) = (e.grads[k], e.grads[l]);
                let hv = [h[0] * gl[0] + h[1] * gl[1], h[2] * gl[0] + h[3] * gl[1]];
                vals.push(e.weight * (gk[0] * hv[0] + gk[1] * hv[1]));
            });
        }
        vals.extend(core::iter::repeat_n(shift, self.nodes.len()));
        vals
    }

    fn diagonal(&self, vals: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.nodes.len()];
        for &(slot, row) in &self.diagonal_slots {
            d[row] += vals[slot];
        }
        d
    }

    /// Solves `(H + μ·diag(H)) s = −r`, adding a growing multiple of the
    /// identity when the factorization fails.
    fn shifted_solve(&self, hessian: &[f64], diag: &[f64], mu: f64, r: &[f64]) -> Option<Vec<f64>> {
        let n = self.nodes.len();
        let scale = diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut vals = hessian.to_vec();
        let mut extra = 0.0;
        loop {
            for (x, d) in vals[self.entries..].iter_mut().zip(diag) {
                *x = mu * d + extra;
            }
            if let Some(llt) = self.factor(&vals) {
                let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| -r[i]);
                llt.solve_in_place_with_conj(Conj::No, rhs.as_mut());
                return Some((0..n).map(|i| rhs[(i, 0)]).collect());
            }
            extra = if extra == 0.0 { 1e-12 * scale } else { 10.0 * extra };
            if extra > scale {
                return None;
            }
        }
    }

    fn factor(&self, vals: &[f64]) -> Option<Llt<usize, f64>> {
        let a = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, vals).ok()?;
        Llt::try_new_with_symbolic(self.symbolic_llt.clone(), a.as_ref(), Side::Lower).ok()
    }
}

/// Calls `f(dof_k, dof_l, k, l)` for each ordered vertex pair of free nodes
/// with `dof_k ≥ dof_l`.
#[inline]
fn for_each_pair(e: &crate::mesh::Element, dof: &[usize], mut f: impl FnMut(usize, usize, usize, usize)) {
    let d = |k: usize| match e.verts[k] {
        Vertex::Node(n) => dof[n],
        Vertex::Interface => NOT_FREE,
    };
    for k in 0..3 {
        let a = d(k);
        if a == NOT_FREE {
            continue;
        }
        for l in 0..3 {
            let b = d(l);
            if b == NOT_FREE || b > a {
                continue;
            }
            f(a, b, k, l);
        }
    }
}

/// Bound checks attached to a solve.
#[derive(Clone, Debug, PartialEq)]
pub struct BarrierCheck {
    pub passed: bool,
    /// Largest violation of either barrier, before slack.
    pub max_violation: f64,
    pub slack: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub p: f64,
    pub field: ScalarField,
    pub iterations: usize,
    pub converged: bool,
    pub energy: f64,
    pub gradient_norm: f64,
    pub tol_grad: f64,
    pub energy_history: Vec<f64>,
    pub regularization: f64,
    /// Largest change of `v`, relative to the obstacle value, when the
    /// regularization is divided by 10; `None` when that re-solve was skipped
    /// or did not converge.
    pub regularization_sensitivity: Option<f64>,
    pub positivity_violations: usize,
    pub barrier: BarrierCheck,
    pub bounds: Option<crate::diagnostics::GradientBoundReport>,
}

impl SolveReport {
    pub fn arrival_time(&self) -> Result<ScalarField> {
        crate::diagnostics::log_transform(&self.field, self.p)
    }
}

/// Times the default regularization may be multiplied by 10 when the
/// minimization stalls.
pub const MAX_REGULARIZATION_RAISES: usize = 12;

/// Default regularization: `1e-6` times the smallest upper-barrier gradient
/// magnitude on the outer boundary.
pub fn default_regularization(domain: &GridDomain, barriers: &Barriers, p: f64) -> f64 {
    let g = domain.grid();
    let alpha = Barriers::exponent(p, 2);
    let mut smallest = f64::INFINITY;
    for k in 0..g.len() {
        if domain.kind(k) == NodeKind::OuterBoundary {
            let x = g.point_of(k);
            let rho = barriers.outer_gauge(x);
            smallest = smallest.min(alpha * barriers.upper(x, p) / rho);
        }
    }
    1e-6 * smallest
}

fn boundary_values(domain: &GridDomain, barriers: &Barriers, config: &SolverConfig) -> Result<Vec<f64>> {
    let g = domain.grid();
    let mut v = vec![0.0; g.len()];
    for k in 0..g.len() {
        v[k] = match domain.kind(k) {
            NodeKind::Obstacle => config.obstacle_value,
            NodeKind::Interior => 0.0,
            NodeKind::OuterBoundary => match &config.outer_bc {
                OuterBc::BarrierValue => barriers.upper(g.point_of(k), config.p),
                OuterBc::Zero => 0.0,
                OuterBc::Values(vals) => {
                    if vals.len() != g.len() {
                        return Err(Error::DimensionMismatch { expected: g.len(), found: vals.len() });
                    }
                    vals[k]
                }
            },
        };
    }
    Ok(v)
}

/// Minimizes the discrete energy with `v = 1` on the obstacle and the
/// configured outer data, starting from the clipped upper barrier.
pub fn solve_vp(norm: &MinkowskiNorm, domain: &GridDomain, config: &SolverConfig) -> Result<SolveReport> {
    solve_vp_from(norm, domain, config, None)
}

/// As [`solve_vp`], with an optional initial guess for the interior nodes.
pub fn solve_vp_from(
    norm: &MinkowskiNorm,
    domain: &GridDomain,
    config: &SolverConfig,
    initial: Option<&[f64]>,
) -> Result<SolveReport> {
    config.validate(norm.dim())?;
    let barriers = Barriers::new(norm, domain.obstacle())?;
    let g = domain.grid();
    let mut v = boundary_values(domain, &barriers, config)?;
    for k in 0..g.len() {
        if domain.kind(k) == NodeKind::Interior {
            v[k] = match initial {
                Some(init) => init[k],
                None => barriers.upper(g.point_of(k), config.p).min(config.obstacle_value),
            };
        }
    }
    let mut delta = config.regularization.unwrap_or_else(|| default_regularization(domain, &barriers, config.p));
    let mut model = DiscreteEnergy::new(norm, domain, config.p, delta, config.boundary_fit)?
        .with_obstacle_value(config.obstacle_value);
    let assembly = Assembly::new(&model)?;
    let tol_grad = match config.tol_grad {
        Some(t) => t,
        None => {
            // relative to the cold state, so a good warm start is not penalized
            let mut cold = v.clone();
            for k in &assembly.nodes {
                cold[*k] = 0.0;
            }
            let r = free_gradient(&model, &assembly, &cold);
            1e-8 * sqrt(r.iter().map(|x| x * x).sum())
        }
    };
    let mut run = newton(&model, &assembly, &mut v, config, Some(tol_grad))?;
    // a default regularization that is too small for the far field is raised
    let mut raised = 0;
    while !run.converged && config.regularization.is_none() && raised < MAX_REGULARIZATION_RAISES {
        delta *= 10.0;
        raised += 1;
        model = DiscreteEnergy::new(norm, domain, config.p, delta, config.boundary_fit)?
            .with_obstacle_value(config.obstacle_value);
        let next = newton(&model, &assembly, &mut v, config, Some(tol_grad))?;
        run.iterations += next.iterations;
        run.history.extend(next.history.iter().copied());
        run.converged = next.converged;
        run.gradient_norm = next.gradient_norm;
        run.energy = next.energy;
    }
    let mut sensitivity = None;
    let mut final_delta = delta;
    if config.confirm_regularization && delta > 0.0 && run.converged {
        let before = v.clone();
        let fine = DiscreteEnergy::new(norm, domain, config.p, 0.1 * delta, config.boundary_fit)?
            .with_obstacle_value(config.obstacle_value);
        let second = newton(&fine, &assembly, &mut v, config, Some(run.tol_grad))?;
        run.iterations += second.iterations;
        if second.converged {
            let worst = (0..g.len())
                .filter(|k| domain.kind(*k) == NodeKind::Interior)
                .map(|k| (v[k] - before[k]).abs())
                .fold(0.0, f64::max);
            sensitivity = Some(worst / config.obstacle_value.abs());
            run.history.extend(second.history.iter().copied());
            run.gradient_norm = second.gradient_norm;
            run.energy = second.energy;
            final_delta = 0.1 * delta;
        } else {
            // keep the converged solve; the check is inconclusive
            v.copy_from_slice(&before);
        }
    }

    let positivity_violations = (0..g.len())
        .filter(|k| domain.kind(*k) == NodeKind::Interior && !(v[*k] > 0.0 && v[*k] <= config.obstacle_value * (1.0 + 1e-12)))
        .count();
    let field = ScalarField::new(*g, v, FieldMeaning::Potential)?;
    let barrier = if config.outer_bc == OuterBc::BarrierValue && config.obstacle_value == 1.0 {
        crate::diagnostics::check_barriers(norm, domain, &field, config.p, &barriers)
    } else {
        BarrierCheck { passed: true, max_violation: 0.0, slack: 0.0 }
    };
    let bounds = match crate::diagnostics::wulff_inradius(norm, domain) {
        Ok(r) if positivity_violations == 0 => crate::diagnostics::log_transform(&field, config.p)
            .and_then(|u| crate::diagnostics::check_gradient_bounds(norm, domain, &u, config.p, r))
            .ok(),
        _ => None,
    };
    Ok(SolveReport {
        p: config.p,
        field,
        iterations: run.iterations,
        converged: run.converged,
        energy: run.energy,
        gradient_norm: run.gradient_norm,
        tol_grad: run.tol_grad,
        energy_history: run.history,
        regularization: final_delta,
        regularization_sensitivity: sensitivity,
        positivity_violations,
        barrier,
        bounds,
    })
}

struct NewtonRun {
    iterations: usize,
    converged: bool,
    energy: f64,
    gradient_norm: f64,
    tol_grad: f64,
    history: Vec<f64>,
}

fn free_gradient(model: &DiscreteEnergy<'_>, assembly: &Assembly, v: &[f64]) -> Vec<f64> {
    let full = model.gradient(v);
    assembly.nodes.iter().map(|k| full[*k]).collect()
}

/// Damping weight beyond which accepted steps count as stalled progress.
const HEAVY_DAMPING: f64 = 1e2;

fn newton(
    model: &DiscreteEnergy<'_>,
    assembly: &Assembly,
    v: &mut [f64],
    config: &SolverConfig,
    tol_grad: Option<f64>,
) -> Result<NewtonRun> {
    let mut energy = model.energy(v);
    let mut history = vec![energy];
    let mut r = free_gradient(model, assembly, v);
    let mut gnorm = sqrt(r.iter().map(|x| x * x).sum());
    let tol = tol_grad.unwrap_or(1e-8 * gnorm).max(f64::MIN_POSITIVE);
    let mut last_decrease = f64::INFINITY;
    let mut trial = v.to_vec();
    let mut iterations = 0;
    let mut stalled = 0;
    let mut converged = false;
    // Levenberg–Marquardt weight on the Hessian diagonal
    let mut mu = 0.0f64;
    while iterations < config.max_iter {
        if gnorm <= tol && last_decrease <= config.tol_energy {
            converged = true;
            break;
        }
        iterations += 1;
        let hessian = assembly.hessian_values(model, v, 0.0);
        let diag = assembly.diagonal(&hessian);
        let mut accepted = None;
        for _ in 0..30 {
            let step = match assembly.shifted_solve(&hessian, &diag, mu, &r) {
                Some(s) => s,
                None => return Err(Error::LinearSolve("Hessian could not be made positive definite".into())),
            };
            let slope: f64 = r.iter().zip(&step).map(|(a, b)| a * b).sum();
            let damping: f64 = diag.iter().zip(&step).map(|(d, x)| d * x * x).sum();
            let predicted = 0.5 * (mu * damping - slope);
            trial.copy_from_slice(v);
            for (i, node) in assembly.nodes.iter().enumerate() {
                trial[*node] = v[*node] + step[i];
            }
            let de = model.energy_difference(v, &trial);
            let ratio = -de / predicted;
            if de.is_finite() && predicted > 0.0 && ratio >= 1e-4 {
                if ratio > 0.75 {
                    mu = if mu < 1e-8 { 0.0 } else { 0.25 * mu };
                } else if ratio < 0.25 {
                    mu = (4.0 * mu).max(1e-4);
                }
                accepted = Some(de);
                break;
            }
            // a step whose energy change is below rounding is kept when it
            // clearly reduces the gradient
            if de.abs() <= 1e-13 * energy.abs() {
                let g1 = free_gradient(model, assembly, &trial);
                if sqrt(g1.iter().map(|x| x * x).sum()) < 0.5 * gnorm {
                    accepted = Some(de);
                    break;
                }
            }
            mu = (4.0 * mu).max(1e-4);
        }
        match accepted {
            Some(de) => {
                v.copy_from_slice(&trial);
                energy += de;
                history.push(energy);
                last_decrease = -de / energy.abs().max(f64::MIN_POSITIVE);
                stalled = if mu >= HEAVY_DAMPING { stalled + 1 } else { 0 };
            }
            None => {
                last_decrease = 0.0;
                stalled += 1;
            }
        }
        r = free_gradient(model, assembly, v);
        gnorm = sqrt(r.iter().map(|x| x * x).sum());
        if stalled >= 5 {
            converged = gnorm <= tol;
            break;
        }
    }
    if !converged && gnorm <= tol && last_decrease <= config.tol_energy {
        converged = true;
    }
    Ok(NewtonRun { iterations, converged, energy: model.energy(v), gradient_norm: gnorm, tol_grad: tol, history })
}

/// Reports from a decreasing sequence of exponents.
#[derive(Clone, Debug)]
pub struct ContinuationResult {
    pub reports: Vec<SolveReport>,
    /// `‖u_{p_k} − u_{p_{k+1}}‖_∞` on the annulus `1.5s ≤ F°(x − y₀) ≤ 3s`.
    pub cauchy: Vec<f64>,
    /// The error that stopped the schedule early, if any.
    pub aborted: Option<Error>,
}

/// Nodes of the annulus `{a·s ≤ F°(x − y₀) ≤ b·s}` around the outer barrier.
pub fn annulus_nodes(norm: &MinkowskiNorm, domain: &GridDomain, inner: f64, outer: f64) -> Result<Vec<usize>> {
    let barriers = Barriers::new(norm, domain.obstacle())?;
    let g = domain.grid();
    Ok((0..g.len())
        .filter(|k| {
            let rho = barriers.outer_gauge(g.point_of(*k)) / barriers.outer_radius;
            domain.kind(*k) == NodeKind::Interior && rho >= inner && rho <= outer
        })
        .collect())
}

/// Solves along `config.schedule`. Each stage starts from the previous
/// potential raised to the power that maps `(r/F°)^{(n−p')/(p'−1)}` onto
/// `(r/F°)^{(n−p)/(p−1)}`.
pub fn continuation_solve(norm: &MinkowskiNorm, domain: &GridDomain, config: &SolverConfig) -> Result<ContinuationResult> {
    config.validate_schedule(norm.dim())?;
    let annulus = annulus_nodes(norm, domain, 1.5, 3.0)?;
    let mut reports: Vec<SolveReport> = Vec::new();
    let mut cauchy = Vec::new();
    let mut aborted = None;
    let mut previous_u: Option<Vec<f64>> = None;
    for &p in &config.schedule {
        let stage = config.clone().with_p(p);
        let init = reports.last().map(|prev: &SolveReport| {
            let n = norm.dim() as f64;
            let e = (prev.p - 1.0) * (n - p) / ((p - 1.0) * (n - prev.p));
            prev.field.values.iter().map(|x| powf(x.max(0.0), e)).collect::<Vec<f64>>()
        });
        let report = match solve_vp_from(norm, domain, &stage, init.as_deref()) {
            Ok(r) => r,
            Err(e) => {
                aborted = Some(e);
                break;
            }
        };
        let u: Vec<f64> = report.field.values.iter().map(|x| (1.0 - p) * ln(*x)).collect();
        if let Some(prev) = &previous_u {
            cauchy.push(annulus.iter().map(|k| (u[*k] - prev[*k]).abs()).fold(0.0, f64::max));
        }
        previous_u = Some(u);
        let ok = report.converged;
        reports.push(report);
        if !ok {
            aborted = Some(Error::NotConverged { p, iterations: reports.last().map_or(0, |r| r.iterations) });
            break;
        }
    }
    Ok(ContinuationResult { reports, cauchy, aborted })
}

/// Linear extrapolation to `p = 1` of the arrival times of the two
/// smallest exponents of a continuation run.
pub fn extrapolate_limit(reports: &[SolveReport]) -> Result<ScalarField> {
    if reports.len() < 2 {
        return Err(Error::InvalidParameter("extrapolation needs two solves".into()));
    }
    let (a, b) = (&reports[reports.len() - 1], &reports[reports.len() - 2]);
    let ua = a.arrival_time()?;
    let ub = b.arrival_time()?;
    let c = (a.p - 1.0) / (b.p - a.p);
    let values = ua.values.iter().zip(&ub.values).map(|(x, y)| x - c * (y - x)).collect();
    ScalarField::new(ua.grid, values, FieldMeaning::LimitArrivalTime)
}

/// `v = exp(−u/(p − 1))`.
pub fn potential_from_arrival(u: &ScalarField, p: f64) -> Result<ScalarField> {
    let values = u.values.iter().map(|x| exp(-x / (p - 1.0))).collect();
    ScalarField::new(u.grid, values, FieldMeaning::Potential)
}
