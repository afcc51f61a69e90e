//! The weak flow read off an arrival-time field `u`: sublevel sets
//! `E_t = {u < t}`, their anisotropic area, the curvature identity
//! `H_F = F(∇u)` on level sets, and spot checks of the minimality of `u`
//! for the functional `J(φ) = ∫_K F(∇φ) + φ F(∇u)`.

use alloc::{vec, vec::Vec};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::contour::marching_squares;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Grid2, GridDomain, NodeKind, Obstacle};
use crate::math::{exp, hypot};
use crate::norm::MinkowskiNorm;
use crate::stencil::{coarea_sigma_f, curvature_field, nodal_gradients, DEGENERACY_FLOOR};
use crate::wulff::{sigma_f, Contour};

/// `N_t = ∂{u < t}` with its anisotropic area.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSnapshot {
    pub t: f64,
    pub contour: Contour,
    pub sigma_f: f64,
    /// Fraction of contour vertices next to a degenerate gradient.
    pub masked_fraction: f64,
}

impl FlowSnapshot {
    pub fn is_empty(&self) -> bool {
        self.contour.is_empty()
    }
}

/// Value of a nodal quantity at `x` by bilinear interpolation, or `None`
/// when a corner of the containing cell has no value.
fn interpolate_nodal(grid: &Grid2, values: &[Option<f64>], x: [f64; 2]) -> Option<f64> {
    let fx = ((x[0] - grid.origin[0]) / grid.h).clamp(0.0, (grid.nx - 1) as f64);
    let fy = ((x[1] - grid.origin[1]) / grid.h).clamp(0.0, (grid.ny - 1) as f64);
    let i = (libm::floor(fx) as usize).min(grid.nx - 2);
    let j = (libm::floor(fy) as usize).min(grid.ny - 2);
    let (s, t) = (fx - i as f64, fy - j as f64);
    let a = values[grid.index(i, j)]?;
    let b = values[grid.index(i + 1, j)]?;
    let c = values[grid.index(i, j + 1)]?;
    let d = values[grid.index(i + 1, j + 1)]?;
    Some((1.0 - t) * ((1.0 - s) * a + s * b) + t * ((1.0 - s) * c + s * d))
}

/// `F(∇u)` at every node with a non-degenerate gradient.
fn speed_field(norm: &MinkowskiNorm, field: &ScalarField, domain: Option<&GridDomain>) -> Vec<Option<f64>> {
    nodal_gradients(&field.grid, &field.values, domain, 0.0)
        .into_iter()
        .map(|g| g.filter(|g| hypot(g[0], g[1]) >= DEGENERACY_FLOOR).map(|g| norm.eval_unchecked(&g)))
        .collect()
}

fn check_field(norm: &MinkowskiNorm, field: &ScalarField, domain: Option<&GridDomain>) -> Result<()> {
    if norm.dim() != 2 {
        return Err(Error::Unsupported("level sets are extracted in two dimensions".into()));
    }
    if let Some(d) = domain {
        if d.grid() != &field.grid {
            return Err(Error::InvalidDomain("field and domain grids differ".into()));
        }
    }
    Ok(())
}

/// Contour of `{u = t}`, oriented outward from `{u < t}`. Levels outside the
/// range of the field give an empty snapshot.
pub fn extract_sublevel(
    norm: &MinkowskiNorm,
    field: &ScalarField,
    domain: Option<&GridDomain>,
    t: f64,
) -> Result<FlowSnapshot> {
    check_field(norm, field, domain)?;
    if !(t > field.min() && t < field.max()) {
        return Ok(FlowSnapshot { t, contour: Contour::default(), sigma_f: 0.0, masked_fraction: 0.0 });
    }
    let contour = marching_squares(&field.grid, &field.values, t);
    let speed = speed_field(norm, field, domain);
    let masked = contour.facets.iter().filter(|f| interpolate_nodal(&field.grid, &speed, f.a).is_none()).count();
    let masked_fraction = if contour.is_empty() { 0.0 } else { masked as f64 / contour.len() as f64 };
    Ok(FlowSnapshot { t, sigma_f: sigma_f(norm, &contour), contour, masked_fraction })
}

/// Anisotropic mean curvature of the field interpolated to each facet
/// midpoint, `None` where the stencil is unavailable.
pub fn contour_curvatures(
    norm: &MinkowskiNorm,
    field: &ScalarField,
    domain: Option<&GridDomain>,
    contour: &Contour,
) -> Vec<Option<f64>> {
    let hf = curvature_field(norm, &field.grid, &field.values, domain);
    contour.facets.iter().map(|f| interpolate_nodal(&field.grid, &hf, f.midpoint())).collect()
}

/// One time sample of the area growth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthSample {
    pub t: f64,
    /// `σ_F(N_t)` from the facet contour.
    pub sigma_contour: f64,
    /// `σ_F(N_t)` from the co-area estimator, for `t > 0`.
    pub sigma_coarea: Option<f64>,
    /// `e^t σ_F(N_0)`.
    pub predicted: f64,
}

impl GrowthSample {
    pub fn ratio(&self) -> f64 {
        self.sigma_contour / self.predicted
    }

    pub fn coarea_ratio(&self) -> Option<f64> {
        self.sigma_coarea.map(|s| s / self.predicted)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthSeries {
    /// `σ_F(N_0)` from the contour of the obstacle level function.
    pub sigma_initial: f64,
    pub samples: Vec<GrowthSample>,
    /// The obstacle is convex, so it is its own F-minimizing hull.
    pub hypothesis_verified: bool,
}

/// Measured anisotropic area of `N_t` against exponential growth from the
/// obstacle boundary `N_0`.
pub fn area_growth_series(
    norm: &MinkowskiNorm,
    domain: &GridDomain,
    field: &ScalarField,
    times: &[f64],
) -> Result<GrowthSeries> {
    check_field(norm, field, Some(domain))?;
    let initial = marching_squares(domain.grid(), domain.level(), 0.0);
    let sigma_initial = sigma_f(norm, &initial);
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let sigma_contour = if t <= 0.0 {
            sigma_initial
        } else {
            extract_sublevel(norm, field, Some(domain), t)?.sigma_f
        };
        let sigma_coarea = (t > 0.0).then(|| coarea_sigma_f(norm, &field.grid, &field.values, Some(domain), t));
        samples.push(GrowthSample { t, sigma_contour, sigma_coarea, predicted: exp(t) * sigma_initial });
    }
    let hypothesis_verified = match domain.obstacle() {
        Obstacle::Wulff(_) => true,
        Obstacle::Polygon(p) => p.is_convex(),
    };
    Ok(GrowthSeries { sigma_initial, samples, hypothesis_verified })
}

/// Residual of `H_F = F(∇u)` over the vertices of one level set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakCurvature {
    pub max: f64,
    pub mean: f64,
    pub masked: usize,
    pub vertices: usize,
}

impl WeakCurvature {
    pub fn masked_fraction(&self) -> f64 {
        self.masked as f64 / self.vertices.max(1) as f64
    }
}

/// `|H_F − F(∇u)| / F(∇u)` at the contour vertices of `{u = t}`, both sides
/// interpolated from the grid. The level set must be closed.
pub fn weak_curvature_residual(
    norm: &MinkowskiNorm,
    field: &ScalarField,
    domain: Option<&GridDomain>,
    t: f64,
) -> Result<WeakCurvature> {
    let snap = extract_sublevel(norm, field, domain, t)?;
    if snap.is_empty() || !snap.contour.is_closed(1e-9 * field.grid.h) {
        return Err(Error::OpenLevelSet);
    }
    let hf = curvature_field(norm, &field.grid, &field.values, domain);
    let speed = speed_field(norm, field, domain);
    let (mut max, mut sum, mut used, mut masked) = (0.0f64, 0.0, 0usize, 0usize);
    for f in &snap.contour.facets {
        let pair = interpolate_nodal(&field.grid, &hf, f.a).zip(interpolate_nodal(&field.grid, &speed, f.a));
        match pair {
            Some((h, s)) if s > DEGENERACY_FLOOR => {
                let r = (h - s).abs() / s;
                max = max.max(r);
                sum += r;
                used += 1;
            }
            _ => masked += 1,
        }
    }
    if used == 0 {
        return Err(Error::AllMasked);
    }
    Ok(WeakCurvature { max, mean: sum / used as f64, masked, vertices: snap.contour.len() })
}

/// Cells of the box with at least one corner in `support`, as lower-left
/// node indices.
fn cells_meeting(grid: &Grid2, support: &[usize]) -> Vec<usize> {
    let mut hit = vec![false; grid.len()];
    for &k in support {
        let (i, j) = grid.ij(k);
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            if i >= di && j >= dj && i - di + 1 < grid.nx && j - dj + 1 < grid.ny {
                hit[grid.index(i - di, j - dj)] = true;
            }
        }
    }
    (0..grid.len()).filter(|k| hit[*k]).collect()
}

/// `∫ F(∇φ) + φ F(∇u)` over the cells meeting `support`, by vertex
/// quadrature on the four corner triangles of each cell. `φ` must agree
/// with `u` at every node outside `support`.
#[allow(non_snake_case)]
pub fn J_functional(norm: &MinkowskiNorm, u: &ScalarField, phi: &[f64], support: &[usize]) -> Result<f64> {
    let g = &u.grid;
    if phi.len() != g.len() {
        return Err(Error::DimensionMismatch { expected: g.len(), found: phi.len() });
    }
    let mut inside = vec![false; g.len()];
    for &k in support {
        if k >= g.len() {
            return Err(Error::InvalidParameter("support node out of range".into()));
        }
        inside[k] = true;
    }
    if let Some(node) = (0..g.len()).find(|k| !inside[*k] && phi[*k] != u.values[*k]) {
        return Err(Error::OutsideSupport { node });
    }
    Ok(j_over_cells(norm, g, &u.values, phi, &cells_meeting(g, support)))
}

fn j_over_cells(norm: &MinkowskiNorm, g: &Grid2, u: &[f64], phi: &[f64], cells: &[usize]) -> f64 {
    let h = g.h;
    let quarter = 0.25 * h * h;
    let mut total = 0.0;
    for &c in cells {
        let (i, j) = g.ij(c);
        let corners = [g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1), g.index(i, j + 1)];
        // corner triangles: the gradient at a corner uses its two cell edges
        for (k, &node) in corners.iter().enumerate() {
            let grad = |w: &[f64]| {
                let (x0, x1, y0, y1) = match k {
                    0 => (corners[0], corners[1], corners[0], corners[3]),
                    1 => (corners[0], corners[1], corners[1], corners[2]),
                    2 => (corners[3], corners[2], corners[1], corners[2]),
                    _ => (corners[3], corners[2], corners[0], corners[3]),
                };
                [(w[x1] - w[x0]) / h, (w[y1] - w[y0]) / h]
            };
            total += quarter * (norm.eval_unchecked(&grad(phi)) + phi[node] * norm.eval_unchecked(&grad(u)));
        }
    }
    total
}

/// Slack constant `C` in `J(u) ≤ J(φ) + C·h·|K|`.
pub const MINIMALITY_SLACK: f64 = 2.0;

/// One random perturbation `φ = u + a·b` with a tensor bump `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationTrial {
    pub trial: u64,
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: f64,
    /// Number of nodes where `φ ≠ u`.
    pub support_nodes: usize,
    pub j_u: f64,
    pub j_phi: f64,
    pub slack: f64,
}

impl PerturbationTrial {
    /// `J(φ) − J(u) + slack`; negative means the trial failed.
    pub fn margin(&self) -> f64 {
        self.j_phi - self.j_u + self.slack
    }

    pub fn passed(&self) -> bool {
        self.margin() >= 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimalityReport {
    pub seed: u64,
    pub slack_constant: f64,
    pub trials: Vec<PerturbationTrial>,
}

impl MinimalityReport {
    pub fn passed(&self) -> bool {
        self.trials.iter().all(PerturbationTrial::passed)
    }

    pub fn failures(&self) -> usize {
        self.trials.iter().filter(|t| !t.passed()).count()
    }

    /// Smallest `J(φ) − J(u)` over all trials.
    pub fn worst_margin(&self) -> f64 {
        self.trials.iter().map(|t| t.j_phi - t.j_u).fold(f64::INFINITY, f64::min)
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Random bump perturbations of `u` with support kept inside the flow
/// domain, one seeded stream per trial so trials replay independently.
pub fn minimality_spot_check(
    norm: &MinkowskiNorm,
    domain: &GridDomain,
    u: &ScalarField,
    trials: u64,
    seed: u64,
) -> Result<MinimalityReport> {
    check_field(norm, u, Some(domain))?;
    let g = *domain.grid();
    let h = g.h;
    // centers whose widest support stays two cells clear of obstacle and box
    let reach = 14usize;
    let clear = |i: usize, j: usize| {
        i >= reach && j >= reach && i + reach < g.nx && j + reach < g.ny && {
            let (a, b) = (i - reach..=i + reach, j - reach..=j + reach);
            b.clone().all(|y| a.clone().all(|x| domain.kind(g.index(x, y)) == NodeKind::Interior))
        }
    };
    let centers: Vec<usize> = (0..g.len()).filter(|k| {
        let (i, j) = g.ij(*k);
        clear(i, j)
    }).collect();
    if centers.is_empty() {
        return Err(Error::InvalidDomain("no room for perturbation supports".into()));
    }
    let mut phi = u.values.clone();
    let mut report = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let c = centers[((unit(&mut rng) * centers.len() as f64) as usize).min(centers.len() - 1)];
        let center = g.point_of(c);
        let width = h * (3.0 + 9.0 * unit(&mut rng));
        let (ci, cj) = g.ij(c);
        let span = libm::ceil(width / h) as usize;
        let mut support = Vec::new();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in cj - span..=cj + span {
            for i in ci - span..=ci + span {
                let k = g.index(i, j);
                let x = g.point_of(k);
                let (s, t) = ((x[0] - center[0]) / width, (x[1] - center[1]) / width);
                if s.abs() < 1.0 && t.abs() < 1.0 {
                    support.push(k);
                    lo = lo.min(u.values[k]);
                    hi = hi.max(u.values[k]);
                }
            }
        }
        let scale = (hi - lo).max(h);
        let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
        let amplitude = sign * scale * (0.05 + 0.95 * unit(&mut rng));
        for &k in &support {
            let x = g.point_of(k);
            let (s, t) = ((x[0] - center[0]) / width, (x[1] - center[1]) / width);
            let bump = (1.0 - s * s) * (1.0 - s * s) * (1.0 - t * t) * (1.0 - t * t);
            phi[k] = u.values[k] + amplitude * bump;
        }
        let cells = cells_meeting(&g, &support);
        let j_u = j_over_cells(norm, &g, &u.values, &u.values, &cells);
        let j_phi = j_over_cells(norm, &g, &u.values, &phi, &cells);
        let area = support.len() as f64 * h * h;
        report.push(PerturbationTrial {
            trial,
            center,
            width,
            amplitude,
            support_nodes: support.len(),
            j_u,
            j_phi,
            slack: MINIMALITY_SLACK * h * area,
        });
        for &k in &support {
            phi[k] = u.values[k];
        }
    }
    Ok(MinimalityReport { seed, slack_constant: MINIMALITY_SLACK, trials: report })
}

/// Properness proxy: the smallest `u` on the outermost tenth of the box
/// against the largest `u` on the mid-radius band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Properness {
    pub outer_min: f64,
    pub mid_max: f64,
}

impl Properness {
    pub fn passed(&self) -> bool {
        self.outer_min > self.mid_max
    }
}

pub fn properness_proxy(domain: &GridDomain, u: &ScalarField) -> Properness {
    let g = domain.grid();
    let c = g.center();
    let half = 0.5 * g.width().min(g.height());
    let (mut outer_min, mut mid_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..g.len() {
        if domain.kind(k) == NodeKind::Obstacle {
            continue;
        }
        let x = g.point_of(k);
        let d = (x[0] - c[0]).abs().max((x[1] - c[1]).abs()) / half;
        if d >= 0.9 {
            outer_min = outer_min.min(u.values[k]);
        } else if (0.45..=0.55).contains(&d) {
            mid_max = mid_max.max(u.values[k]);
        }
    }
    Properness { outer_min, mid_max }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldMeaning;
    use crate::wulff::WulffShape;

    fn wulff_u(cells: usize) -> (MinkowskiNorm, GridDomain, ScalarField) {
        let norm = MinkowskiNorm::euclidean(2).unwrap();
        let w = WulffShape::new(vec![0.0, 0.0], 1.0, norm.clone()).unwrap();
        let g = Grid2::square([0.0, 0.0], 8.0, cells).unwrap();
        let d = GridDomain::new(g, Obstacle::Wulff(w)).unwrap();
        let u = ScalarField::from_fn(g, FieldMeaning::ArrivalTime, |x| libm::log(hypot(x[0], x[1]).max(1.0)));
        (norm, d, u)
    }

    #[test]
    fn levels_outside_range_are_empty() {
        let (norm, d, u) = wulff_u(64);
        assert!(extract_sublevel(&norm, &u, Some(&d), -1.0).unwrap().is_empty());
        assert!(extract_sublevel(&norm, &u, Some(&d), 100.0).unwrap().is_empty());
    }

    #[test]
    fn identical_candidate_has_zero_margin() {
        let (norm, d, u) = wulff_u(64);
        let support: Vec<usize> = (0..d.grid().len()).filter(|k| {
            let x = d.grid().point_of(*k);
            (2.0..3.0).contains(&hypot(x[0], x[1]))
        }).collect();
        let a = J_functional(&norm, &u, &u.values, &support).unwrap();
        assert!(a.is_finite() && a > 0.0);
        let mut bad = u.values.clone();
        bad[0] += 1.0;
        assert!(matches!(J_functional(&norm, &u, &bad, &support), Err(Error::OutsideSupport { node: 0 })));
    }

    #[test]
    fn affine_field_is_rejected() {
        let norm = MinkowskiNorm::euclidean(2).unwrap();
        let g = Grid2::square([0.0, 0.0], 1.0, 32).unwrap();
        let u = ScalarField::from_fn(g, FieldMeaning::ArrivalTime, |x| x[0] + 0.5 * x[1]);
        assert!(matches!(weak_curvature_residual(&norm, &u, None, 0.1), Err(Error::OpenLevelSet)));
    }
}
