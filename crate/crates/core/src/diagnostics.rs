//! Post-processing of solved potentials: the log transform, barrier and
//! gradient-bound checks, the inradius of the obstacle and the `𝒬_p`
//! residual.

use alloc::{vec, vec::Vec};

use crate::error::{Error, Result};
use crate::field::{FieldMeaning, ScalarField};
use crate::grid::{GridDomain, NodeKind, Obstacle};
use crate::math::{hypot, ln};
use crate::norm::MinkowskiNorm;
use crate::solver::{BarrierCheck, Barriers};
use crate::stencil::{boundary_gradients, nodal_gradients, residual_qp_field};

/// `u = (1 − p) log v`, with `u = 0` wherever `v = 1`.
pub fn log_transform(field: &ScalarField, p: f64) -> Result<ScalarField> {
    let mut values = Vec::with_capacity(field.values.len());
    for (node, v) in field.values.iter().enumerate() {
        if !(*v > 0.0) {
            return Err(Error::NonPositiveValue { node, value: *v });
        }
        values.push(if *v == 1.0 { 0.0 } else { (1.0 - p) * ln(*v) });
    }
    ScalarField::new(field.grid, values, FieldMeaning::ArrivalTime)
}

/// Lipschitz estimate of a potential: the largest Euclidean nodal gradient.
pub fn lipschitz_estimate(domain: &GridDomain, v: &ScalarField, obstacle_value: f64) -> f64 {
    nodal_gradients(domain.grid(), &v.values, Some(domain), obstacle_value)
        .iter()
        .flatten()
        .map(|g| hypot(g[0], g[1]))
        .fold(0.0, f64::max)
}

/// `(r/F°(x − x₀))^α ≤ v ≤ (s/F°(x − y₀))^α` at interior nodes with slack
/// `3h·Lip`.
pub fn check_barriers(_norm: &MinkowskiNorm, domain: &GridDomain, v: &ScalarField, p: f64, barriers: &Barriers) -> BarrierCheck {
    let g = domain.grid();
    let slack = 3.0 * g.h * lipschitz_estimate(domain, v, 1.0);
    let mut worst = 0.0f64;
    for k in 0..g.len() {
        if domain.kind(k) != NodeKind::Interior {
            continue;
        }
        let x = g.point_of(k);
        let val = v.values[k];
        worst = worst.max(barriers.lower(x, p) - val).max(val - barriers.upper(x, p));
    }
    BarrierCheck { passed: worst <= slack, max_violation: worst, slack }
}

/// Largest `ρ` such that every boundary point is touched from inside the
/// obstacle by a Wulff shape of radius `ρ`.
///
/// Wulff obstacles of the same norm return their radius. Convex polygons are
/// handled by bisection on `ρ`, testing feasibility at `⌈len/h⌉` samples per
/// edge placed at the centers of equal subintervals.
pub fn wulff_inradius(norm: &MinkowskiNorm, domain: &GridDomain) -> Result<f64> {
    match domain.obstacle() {
        Obstacle::Wulff(w) if w.norm() == norm => Ok(w.radius()),
        Obstacle::Wulff(_) => Err(Error::Unsupported("inradius of a Wulff shape of a different norm".into())),
        Obstacle::Polygon(poly) => {
            let per_edge = |len: f64| libm::ceil(len / domain.grid().h).max(1.0) as usize;
            polygon_inradius(norm, poly, per_edge)
        }
    }
}

/// Bisection form of the inradius for a convex polygon; `samples(len)` gives
/// the number of boundary samples on an edge of length `len`.
pub fn polygon_inradius(norm: &MinkowskiNorm, poly: &crate::grid::Polygon, samples: impl Fn(f64) -> usize) -> Result<f64> {
    if !poly.is_convex() {
        return Err(Error::Unsupported("inradius requires a convex polygon".into()));
    }
    let planes = poly.half_planes();
    let v = poly.vertices();
    let mut points = Vec::new();
    for (e, (a, b)) in v.iter().zip(v.iter().cycle().skip(1)).enumerate() {
        let len = hypot(b[0] - a[0], b[1] - a[1]);
        let m = samples(len).max(1);
        for k in 0..m {
            let t = (k as f64 + 0.5) / m as f64;
            points.push((e, [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]));
        }
    }
    let anchors: Vec<[f64; 2]> = planes
        .iter()
        .map(|(n, _)| {
            let mut fx = [0.0; 2];
            norm.grad_unchecked(n, &mut fx);
            fx
        })
        .collect();
    // W_ρ(x − ρF_ξ(n₀)) touches x with normal n₀; it is inside iff every
    // other half-plane holds.
    let feasible = |rho: f64| {
        points.iter().all(|(e, x)| {
            let c = [x[0] - rho * anchors[*e][0], x[1] - rho * anchors[*e][1]];
            planes.iter().enumerate().all(|(f, (n, off))| {
                f == *e || n[0] * c[0] + n[1] * c[1] + rho * norm.eval_unchecked(n) <= off + 1e-14
            })
        })
    };
    let c = poly.centroid();
    let mut hi = planes
        .iter()
        .map(|(n, off)| (off - n[0] * c[0] - n[1] * c[1]) / norm.eval_unchecked(n))
        .fold(f64::INFINITY, f64::min)
        * 2.0
        + 1.0;
    let mut lo = 0.0;
    while feasible(hi) {
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Gradient bounds for `u_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBoundReport {
    pub p: f64,
    /// `sup F(∇u_p)` over interior nodes.
    pub sup_interior: f64,
    /// `sup F(∇u_p)` over boundary trace samples.
    pub sup_boundary: f64,
    pub inradius: f64,
    /// `(n − p)/R`.
    pub inradius_bound: f64,
    /// `max(sup_interior, sup_boundary) ≤ 1.10·(n − p)/R`.
    pub inradius_pass: bool,
    /// `sup_interior / sup_boundary − 1`.
    pub interior_excess: f64,
    /// `interior_excess ≤ 2%`.
    pub maxgrad_pass: bool,
    /// `H_F⁺` of the obstacle boundary when it is constant (Wulff obstacle).
    pub boundary_curvature: Option<f64>,
    /// `max(0, sup_∂Ω F(∇u_p) − H_F⁺)`, the smallest admissible `ε`.
    pub curvature_excess: Option<f64>,
    /// Per-sample `F(∇u_p) − H_F⁺` along the boundary.
    pub boundary_excess: Vec<f64>,
}

/// Relative slack for the inradius bound.
pub const INRADIUS_SLACK: f64 = 0.10;
/// Relative slack for the interior maximum principle.
pub const MAXGRAD_SLACK: f64 = 0.02;

pub fn check_gradient_bounds(norm: &MinkowskiNorm, domain: &GridDomain, u: &ScalarField, p: f64, inradius: f64) -> Result<GradientBoundReport> {
    let g = domain.grid();
    let grads = nodal_gradients(g, &u.values, Some(domain), 0.0);
    let mut sup_interior = 0.0f64;
    for (k, gr) in grads.iter().enumerate() {
        if domain.kind(k) == NodeKind::Interior {
            if let Some(gr) = gr {
                sup_interior = sup_interior.max(norm.eval_unchecked(gr));
            }
        }
    }
    let trace = boundary_gradients(norm, domain, &u.values);
    if trace.is_empty() {
        return Err(Error::InvalidDomain("no boundary trace samples".into()));
    }
    let sup_boundary = trace.iter().map(|b| b.value).fold(0.0, f64::max);
    let n = norm.dim() as f64;
    let inradius_bound = (n - p) / inradius;
    let boundary_curvature = match domain.obstacle() {
        Obstacle::Wulff(w) if w.norm() == norm => Some((n - 1.0) / w.radius()),
        _ => None,
    };
    let boundary_excess = match boundary_curvature {
        Some(hc) => trace.iter().map(|b| b.value - hc).collect(),
        None => vec![],
    };
    let curvature_excess = boundary_curvature.map(|hc| (sup_boundary - hc).max(0.0));
    let interior_excess = sup_interior / sup_boundary - 1.0;
    Ok(GradientBoundReport {
        p,
        sup_interior,
        sup_boundary,
        inradius,
        inradius_bound,
        inradius_pass: sup_interior.max(sup_boundary) <= (1.0 + INRADIUS_SLACK) * inradius_bound,
        interior_excess,
        maxgrad_pass: interior_excess <= MAXGRAD_SLACK,
        boundary_curvature,
        curvature_excess,
        boundary_excess,
    })
}

impl GradientBoundReport {
    /// `|sup_∂Ω F(∇u_p) − H_F⁺|`, the distance of the boundary trace from
    /// the obstacle curvature.
    pub fn boundary_gap(&self) -> Option<f64> {
        self.boundary_curvature.map(|hc| (self.sup_boundary - hc).abs())
    }
}

/// Masked `𝒬_p` residual of an arrival-time field.
#[derive(Clone, Debug, PartialEq)]
pub struct QpResidual {
    pub values: Vec<Option<f64>>,
    pub max_abs: f64,
    pub masked: usize,
}

pub fn residual_qp(norm: &MinkowskiNorm, domain: &GridDomain, u: &ScalarField, p: f64) -> QpResidual {
    residual_qp_on(norm, domain, u, p, |_| true)
}

/// As [`residual_qp`], restricted to nodes accepted by `keep`.
pub fn residual_qp_on(norm: &MinkowskiNorm, domain: &GridDomain, u: &ScalarField, p: f64, keep: impl Fn(usize) -> bool) -> QpResidual {
    let values = residual_qp_field(norm, domain.grid(), &u.values, p, Some(domain));
    let mut max_abs = 0.0f64;
    let mut masked = 0;
    for (k, q) in values.iter().enumerate() {
        if domain.kind(k) != NodeKind::Interior || !keep(k) {
            continue;
        }
        match q {
            Some(q) => max_abs = max_abs.max(q.abs()),
            None => masked += 1,
        }
    }
    QpResidual { values, max_abs, masked }
}

/// Decay proxy: `max F(∇v)/v` on the outermost 10% of the box versus the
/// annulus at mid radius. Returns `(outer, mid)`.
pub fn decay_proxy(norm: &MinkowskiNorm, domain: &GridDomain, v: &ScalarField) -> (f64, f64) {
    let g = domain.grid();
    let grads = nodal_gradients(g, &v.values, Some(domain), 1.0);
    let c = g.center();
    let half = 0.5 * g.width().min(g.height());
    let (mut outer, mut mid) = (0.0f64, 0.0f64);
    for (k, gr) in grads.iter().enumerate() {
        let Some(gr) = gr else { continue };
        if domain.kind(k) != NodeKind::Interior {
            continue;
        }
        let x = g.point_of(k);
        let d = (x[0] - c[0]).abs().max((x[1] - c[1]).abs()) / half;
        let ratio = norm.eval_unchecked(gr) / v.values[k];
        if d >= 0.9 {
            outer = outer.max(ratio);
        } else if (0.45..=0.55).contains(&d) {
            mid = mid.max(ratio);
        }
    }
    (outer, mid)
}
