//! Finite-difference operators on nodal fields: gradients, the anisotropic
//! mean curvature `div F_ξ(∇u)`, the operator `𝒬_p`, and a co-area estimate
//! of anisotropic area.
//!
//! Divergences use a compact face-flux stencil. The flux is evaluated at the
//! cell faces from the two adjacent nodes in the normal direction and the
//! averaged centered differences in the tangential ones.

use alloc::{vec, vec::Vec};
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Grid2, Grid3, GridDomain, NodeKind, DIRECTIONS};
use crate::math::{cos, hypot, powf};
use crate::norm::MinkowskiNorm;

/// Cut fraction below which the node next to the interface is skipped.
const NEAR_INTERFACE: f64 = 0.25;

/// Face gradients shorter than this are treated as degenerate.
pub const DEGENERACY_FLOOR: f64 = 1e-10;

/// Nodal gradients. Without a domain, centered differences inside and
/// second-order one-sided ones on the box edge. With a domain, obstacle
/// nodes get `None`, and neighbours across the interface are replaced by the
/// interface point carrying `interface_value` (Shortley–Weller), unless
/// that point lies within a quarter cell and a one-sided stencil is available.
pub fn nodal_gradients(grid: &Grid2, values: &[f64], domain: Option<&GridDomain>, interface_value: f64) -> Vec<Option<[f64; 2]>> {
    let h = grid.h;
    let mut out = vec![None; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.index(i, j);
            if domain.is_some_and(|d| d.kind(k) == NodeKind::Obstacle) {
                continue;
            }
            let mut g = [0.0; 2];
            for axis in 0..2 {
                let (pos, neg) = (2 * axis, 2 * axis + 1);
                let (len, at) = if axis == 0 { (grid.nx, i) } else { (grid.ny, j) };
                let step = |s: isize| -> usize {
                    let (di, dj) = if axis == 0 { (s, 0) } else { (0, s) };
                    grid.index((i as isize + di) as usize, (j as isize + dj) as usize)
                };
                // (offset, value) on each side
                let side = |dir: usize, s: isize| -> Option<(f64, f64)> {
                    if let Some(t) = domain.and_then(|d| d.cut(k, dir)) {
                        return Some((s as f64 * t * h, interface_value));
                    }
                    let inside = if s > 0 { at + 1 < len } else { at > 0 };
                    inside.then(|| (s as f64 * h, values[step(s)]))
                };
                let near = |dir: usize| domain.and_then(|d| d.cut(k, dir)).is_some_and(|t| t < NEAR_INTERFACE);
                let u0 = values[k];
                let (mut up, mut down) = (side(pos, 1), side(neg, -1));
                // a hugging interface point is dropped in favour of the opposite side
                if near(pos) && down.is_some_and(|(a, _)| a == -h) && at >= 2 && domain.is_none_or(|d| d.cut(step(-1), neg).is_none()) {
                    up = None;
                } else if near(neg) && up.is_some_and(|(b, _)| b == h) && at + 2 < len && domain.is_none_or(|d| d.cut(step(1), pos).is_none()) {
                    down = None;
                }
                g[axis] = match (up, down) {
                    (Some((b, ub)), Some((a, ua))) => {
                        let a = -a;
                        (a * a * (ub - u0) - b * b * (ua - u0)) / (a * b * (a + b))
                    }
                    (Some((b, ub)), None) => {
                        let far = if at + 2 < len && domain.is_none_or(|d| d.cut(step(1), pos).is_none()) {
                            Some(values[step(2)])
                        } else {
                            None
                        };
                        match far {
                            Some(u2) if b == h => (-3.0 * u0 + 4.0 * ub - u2) / (2.0 * h),
                            _ => (ub - u0) / b,
                        }
                    }
                    (None, Some((a, ua))) => {
                        let far = if at >= 2 && domain.is_none_or(|d| d.cut(step(-1), neg).is_none()) {
                            Some(values[step(-2)])
                        } else {
                            None
                        };
                        match far {
                            Some(u2) if a == -h => (3.0 * u0 - 4.0 * ua + u2) / (2.0 * h),
                            _ => (u0 - ua) / (-a),
                        }
                    }
                    (None, None) => 0.0,
                };
            }
            out[k] = Some(g);
        }
    }
    out
}

/// Nodes whose full 3×3 neighbourhood lies in the box and off the obstacle.
fn stencil_usable(grid: &Grid2, domain: Option<&GridDomain>, i: usize, j: usize) -> bool {
    if i == 0 || j == 0 || i + 1 >= grid.nx || j + 1 >= grid.ny {
        return false;
    }
    match domain {
        None => true,
        Some(d) => (j - 1..=j + 1).all(|b| (i - 1..=i + 1).all(|a| d.kind(grid.index(a, b)) != NodeKind::Obstacle)),
    }
}

/// Divergence of `flux(∇u)` by the compact face stencil at node `(i, j)`.
fn face_divergence(
    grid: &Grid2,
    u: &[f64],
    i: usize,
    j: usize,
    flux: &mut impl FnMut([f64; 2]) -> Option<[f64; 2]>,
) -> Option<f64> {
    let h = grid.h;
    let v = |a: usize, b: usize| u[grid.index(a, b)];
    let cy = |a: usize, b: usize| (v(a, b + 1) - v(a, b - 1)) / (2.0 * h);
    let cx = |a: usize, b: usize| (v(a + 1, b) - v(a - 1, b)) / (2.0 * h);
    let mut div = 0.0;
    for (lo, sign) in [(i, 1.0), (i - 1, -1.0)] {
        let g = [(v(lo + 1, j) - v(lo, j)) / h, 0.5 * (cy(lo, j) + cy(lo + 1, j))];
        div += sign * flux(g)?[0] / h;
    }
    for (lo, sign) in [(j, 1.0), (j - 1, -1.0)] {
        let g = [0.5 * (cx(i, lo) + cx(i, lo + 1)), (v(i, lo + 1) - v(i, lo)) / h];
        div += sign * flux(g)?[1] / h;
    }
    Some(div)
}

/// `H_F = div F_ξ(∇u)` at every node where the stencil fits and no face
/// gradient is degenerate.
pub fn curvature_field(norm: &MinkowskiNorm, grid: &Grid2, u: &[f64], domain: Option<&GridDomain>) -> Vec<Option<f64>> {
    let mut out = vec![None; grid.len()];
    let mut flux = |g: [f64; 2]| {
        if hypot(g[0], g[1]) < DEGENERACY_FLOOR {
            return None;
        }
        let mut fx = [0.0; 2];
        norm.grad_unchecked(&g, &mut fx);
        Some(fx)
    };
    for j in 1..grid.ny.saturating_sub(1) {
        for i in 1..grid.nx.saturating_sub(1) {
            if !stencil_usable(grid, domain, i, j) {
                continue;
            }
            out[grid.index(i, j)] = face_divergence(grid, u, i, j, &mut flux);
        }
    }
    out
}

/// `H_F` at one node of a field.
pub fn level_set_hf(norm: &MinkowskiNorm, field: &ScalarField, i: usize, j: usize) -> Result<f64> {
    let g = &field.grid;
    if i == 0 || j == 0 || i + 1 >= g.nx || j + 1 >= g.ny {
        return Err(Error::InvalidParameter("node is on the box edge".into()));
    }
    let mut worst = f64::INFINITY;
    let mut flux = |q: [f64; 2]| {
        let m = hypot(q[0], q[1]);
        worst = worst.min(m);
        if m < DEGENERACY_FLOOR {
            return None;
        }
        let mut fx = [0.0; 2];
        norm.grad_unchecked(&q, &mut fx);
        Some(fx)
    };
    match face_divergence(g, &field.values, i, j, &mut flux) {
        Some(h) => Ok(h),
        None => Err(Error::DegenerateGradient { magnitude: worst }),
    }
}

/// `𝒬_p[u] = div(F^{p−1}(∇u) F_ξ(∇u)) − F(∇u)^p` with the same stencil;
/// `F(∇u)` at the node uses centered differences.
pub fn residual_qp_field(norm: &MinkowskiNorm, grid: &Grid2, u: &[f64], p: f64, domain: Option<&GridDomain>) -> Vec<Option<f64>> {
    let mut out = vec![None; grid.len()];
    let h = grid.h;
    let mut flux = |g: [f64; 2]| {
        if hypot(g[0], g[1]) < DEGENERACY_FLOOR {
            return None;
        }
        let mut fx = [0.0; 2];
        norm.grad_unchecked(&g, &mut fx);
        let a = powf(norm.eval_unchecked(&g), p - 1.0);
        Some([a * fx[0], a * fx[1]])
    };
    for j in 1..grid.ny.saturating_sub(1) {
        for i in 1..grid.nx.saturating_sub(1) {
            if !stencil_usable(grid, domain, i, j) {
                continue;
            }
            let Some(div) = face_divergence(grid, u, i, j, &mut flux) else { continue };
            let v = |a: usize, b: usize| u[grid.index(a, b)];
            let g = [(v(i + 1, j) - v(i - 1, j)) / (2.0 * h), (v(i, j + 1) - v(i, j - 1)) / (2.0 * h)];
            out[grid.index(i, j)] = Some(div - powf(norm.eval_unchecked(&g), p));
        }
    }
    out
}

/// `H_F` on a 3D grid with the analogous face stencil.
pub fn curvature_field_3d(norm: &MinkowskiNorm, grid: &Grid3, u: &[f64]) -> Result<Vec<Option<f64>>> {
    if norm.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: norm.dim() });
    }
    if u.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: u.len() });
    }
    let h = grid.h;
    let [nx, ny, nz] = grid.n;
    let val = |i: usize, j: usize, k: usize| u[grid.index(i, j, k)];
    // centered derivative along `axis` at a node
    let central = |p: [usize; 3], axis: usize| {
        let mut a = p;
        let mut b = p;
        a[axis] += 1;
        b[axis] -= 1;
        (val(a[0], a[1], a[2]) - val(b[0], b[1], b[2])) / (2.0 * h)
    };
    let mut out = vec![None; grid.len()];
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let node = [i, j, k];
                let mut div = 0.0;
                let mut ok = true;
                for axis in 0..3 {
                    for (offset, sign) in [(0usize, 1.0), (1usize, -1.0)] {
                        let mut lo = node;
                        lo[axis] -= offset;
                        let mut hi = lo;
                        hi[axis] += 1;
                        let mut g = [0.0; 3];
                        for t in 0..3 {
                            g[t] = if t == axis {
                                (val(hi[0], hi[1], hi[2]) - val(lo[0], lo[1], lo[2])) / h
                            } else {
                                0.5 * (central(lo, t) + central(hi, t))
                            };
                        }
                        if crate::math::norm2(&g) < DEGENERACY_FLOOR {
                            ok = false;
                            break;
                        }
                        let mut fx = [0.0; 3];
                        norm.grad_unchecked(&g, &mut fx);
                        div += sign * fx[axis] / h;
                    }
                    if !ok {
                        break;
                    }
                }
                if ok {
                    out[grid.index(i, j, k)] = Some(div);
                }
            }
        }
    }
    Ok(out)
}

/// Smoothed delta `(1 + cos(πs/ε)) / 2ε` on `|s| < ε`.
#[inline]
fn cosine_kernel(s: f64, eps: f64) -> f64 {
    if s.abs() >= eps {
        0.0
    } else {
        (1.0 + cos(PI * s / eps)) / (2.0 * eps)
    }
}

/// Co-area estimate of `σ_F({u = t})`: `Σ F(∇uᵢ) K_{εᵢ}(uᵢ − t) h²` with
/// `εᵢ = 2h|∇uᵢ|`, so the band is about four cells wide.
pub fn coarea_sigma_f(norm: &MinkowskiNorm, grid: &Grid2, u: &[f64], domain: Option<&GridDomain>, t: f64) -> f64 {
    let grads = nodal_gradients(grid, u, domain, 0.0);
    let h = grid.h;
    let mut total = 0.0;
    for (k, g) in grads.iter().enumerate() {
        let Some(g) = g else { continue };
        let (i, j) = grid.ij(k);
        if grid.on_edge(i, j) {
            continue;
        }
        let m = hypot(g[0], g[1]);
        if m < DEGENERACY_FLOOR {
            continue;
        }
        total += norm.eval_unchecked(g) * cosine_kernel(u[k] - t, 2.0 * h * m) * h * h;
    }
    total
}

/// Three-dimensional co-area estimate, same kernel.
pub fn coarea_sigma_f_3d(norm: &MinkowskiNorm, grid: &Grid3, u: &[f64], t: f64) -> Result<f64> {
    if norm.dim() != 3 || u.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: u.len() });
    }
    let h = grid.h;
    let [nx, ny, nz] = grid.n;
    let mut total = 0.0;
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let d = |a: [usize; 3], b: [usize; 3]| (u[grid.index(a[0], a[1], a[2])] - u[grid.index(b[0], b[1], b[2])]) / (2.0 * h);
                let g = [
                    d([i + 1, j, k], [i - 1, j, k]),
                    d([i, j + 1, k], [i, j - 1, k]),
                    d([i, j, k + 1], [i, j, k - 1]),
                ];
                let m = crate::math::norm2(&g);
                if m < DEGENERACY_FLOOR {
                    continue;
                }
                total += norm.eval_unchecked(&g) * cosine_kernel(u[grid.index(i, j, k)] - t, 2.0 * h * m) * h * h * h;
            }
        }
    }
    Ok(total)
}

/// One sample of the boundary trace of `∇u` at an interface point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryGradient {
    pub point: [f64; 2],
    /// Unit normal of the obstacle pointing into the flow domain.
    pub normal: [f64; 2],
    /// `F(∇u)` at the interface point.
    pub value: f64,
}

/// Boundary traces of `F(∇u)` for a field vanishing on the obstacle, from
/// one-sided quadratics through the interface point and the next two nodes
/// along each grid line that crosses the interface.
pub fn boundary_gradients(norm: &MinkowskiNorm, domain: &GridDomain, u: &[f64]) -> Vec<BoundaryGradient> {
    let g = domain.grid();
    let h = g.h;
    let mut out = Vec::new();
    for k in domain.boundary_nodes() {
        let (i, j) = g.ij(k);
        for (dir, (di, dj)) in DIRECTIONS.iter().enumerate() {
            let Some(t) = domain.cut(k, dir) else { continue };
            let p = g.point(i, j);
            let point = [p[0] + t * h * *di as f64, p[1] + t * h * *dj as f64];
            let normal = domain.level_normal(point);
            // direction from the interface into the domain
            let d = [-(*di as f64), -(*dj as f64)];
            let cosine = normal[0] * d[0] + normal[1] * d[1];
            if cosine < 0.5 {
                continue;
            }
            // walk inward collecting the nodes along the line, dropping one
            // that hugs the interface so the quadratic stays well conditioned
            let mut samples: Vec<(f64, f64)> = Vec::with_capacity(3);
            let (mut ci, mut cj, mut dist) = (i as isize, j as isize, t * h);
            while samples.len() < 3 {
                if ci < 0 || cj < 0 || ci as usize >= g.nx || cj as usize >= g.ny {
                    break;
                }
                let c = g.index(ci as usize, cj as usize);
                if domain.kind(c) == NodeKind::Obstacle || (c != k && domain.cut(c, dir).is_some()) || domain.cut(c, dir ^ 1).is_some() {
                    break;
                }
                samples.push((dist, u[c]));
                ci -= di;
                cj -= dj;
                dist += h;
            }
            if samples.len() == 3 && t < NEAR_INTERFACE {
                samples.remove(0);
            }
            let slope = match samples[..] {
                [(a, ua), (b, ub), ..] => (ua * b * b - ub * a * a) / (a * b * (b - a)),
                [(a, ua)] => ua / a,
                _ => u[k] / (t * h),
            };
            let magnitude = slope / cosine;
            out.push(BoundaryGradient { point, normal, value: magnitude * norm.eval_unchecked(&normal) });
        }
    }
    out
}
