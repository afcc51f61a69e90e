//! Wulff shapes, oriented polyline contours, anisotropic area and its first
//! variation.

use alloc::{vec, vec::Vec};
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::{cos, hypot, sin, sqrt};
use crate::small;
use crate::norm::{MinkowskiNorm, NormKind, PolarNorm};

/// `{x : F°(x − center) < radius}`.
#[derive(Clone, Debug)]
pub struct WulffShape {
    center: Vec<f64>,
    radius: f64,
    norm: MinkowskiNorm,
    polar: PolarNorm,
}

impl WulffShape {
    pub fn new(center: Vec<f64>, radius: f64, norm: MinkowskiNorm) -> Result<Self> {
        if center.len() != norm.dim() {
            return Err(Error::DimensionMismatch { expected: norm.dim(), found: center.len() });
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter("Wulff radius must be positive".into()));
        }
        let polar = norm.polar();
        Ok(Self { center, radius, norm, polar })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn norm(&self) -> &MinkowskiNorm {
        &self.norm
    }

    pub fn polar(&self) -> &PolarNorm {
        &self.polar
    }

    /// `F°(x − x₀)`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.polar.eval_unchecked(&d)
    }

    /// `F°(x − x₀) − r`.
    pub fn level(&self, x: &[f64]) -> f64 {
        self.gauge(x) - self.radius
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) < 0.0
    }

    /// Support function: `max ⟨x − x₀, e⟩` over the shape, equal to `r·F(e)`.
    pub fn extent(&self, e: &[f64]) -> f64 {
        self.radius * self.norm.eval_unchecked(e)
    }

    /// Largest Euclidean distance from the center to the boundary, i.e.
    /// `r · max_{|e|=1} F(e)`.
    pub fn circumradius(&self) -> f64 {
        let n = self.norm.dim();
        match self.norm.kind() {
            NormKind::Euclidean => return self.radius,
            NormKind::Ellipsoidal { matrix, .. } => {
                let top = *small::symmetric_eigenvalues(matrix, n).last().unwrap_or(&1.0);
                return self.radius * sqrt(top);
            }
            _ => {}
        }
        let dirs = crate::norm::sphere_directions(n, if n == 2 { 720 } else { 2000 });
        let best = dirs
            .chunks(n)
            .max_by(|a, b| self.norm.eval_unchecked(a).total_cmp(&self.norm.eval_unchecked(b)))
            .map(<[f64]>::to_vec)
            .unwrap_or_default();
        if n != 2 {
            return self.radius * self.norm.eval_unchecked(&best) * (1.0 + 1e-4);
        }
        // golden-section refinement of the angle
        let f = |t: f64| self.norm.eval_unchecked(&[cos(t), sin(t)]);
        let t0 = libm::atan2(best[1], best[0]);
        let (mut a, mut b) = (t0 - PI / 360.0, t0 + PI / 360.0);
        let phi = 0.5 * (sqrt(5.0) - 1.0);
        for _ in 0..60 {
            let (c, d) = (b - phi * (b - a), a + phi * (b - a));
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        self.radius * f(0.5 * (a + b))
    }
}

/// Oriented segment. The enclosed region lies to the left of `a → b`, so
/// `normal` is `b − a` rotated clockwise and normalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Facet {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub normal: [f64; 2],
    pub measure: f64,
    /// Anisotropic mean curvature attached to the facet, when known.
    pub curvature: Option<f64>,
}

impl Facet {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let l = hypot(dx, dy);
        let normal = if l > 0.0 { [dy / l, -dx / l] } else { [0.0, 0.0] };
        Self { a, b, normal, measure: l, curvature: None }
    }

    pub fn midpoint(&self) -> [f64; 2] {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }

    pub fn reversed(&self) -> Self {
        let mut f = Facet::new(self.b, self.a);
        f.curvature = self.curvature;
        f
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Contour {
    pub facets: Vec<Facet>,
}

impl Contour {
    pub fn new(facets: Vec<Facet>) -> Self {
        Self { facets }
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    /// Total Euclidean length.
    pub fn length(&self) -> f64 {
        self.facets.iter().map(|f| f.measure).sum()
    }

    /// Signed area enclosed, positive for the outward orientation.
    pub fn enclosed_area(&self) -> f64 {
        0.5 * self.facets.iter().map(|f| f.a[0] * f.b[1] - f.b[0] * f.a[1]).sum::<f64>()
    }

    pub fn reversed(&self) -> Self {
        Self { facets: self.facets.iter().map(Facet::reversed).collect() }
    }

    /// Every endpoint is the head of exactly as many facets as it is the
    /// tail of (up to `tol`).
    pub fn is_closed(&self, tol: f64) -> bool {
        let mut heads: Vec<[f64; 2]> = self.facets.iter().map(|f| f.b).collect();
        let mut tails: Vec<[f64; 2]> = self.facets.iter().map(|f| f.a).collect();
        let key = |p: &[f64; 2], q: &[f64; 2]| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]));
        heads.sort_by(key);
        tails.sort_by(key);
        heads.iter().zip(&tails).all(|(p, q)| (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol)
    }

    /// Applies `x ↦ x + s·V(x)` to every endpoint.
    pub fn displaced(&self, field: &dyn Fn([f64; 2]) -> [f64; 2], s: f64) -> Self {
        let mv = |p: [f64; 2]| {
            let v = field(p);
            [p[0] + s * v[0], p[1] + s * v[1]]
        };
        Self {
            facets: self
                .facets
                .iter()
                .map(|f| {
                    let mut g = Facet::new(mv(f.a), mv(f.b));
                    g.curvature = f.curvature;
                    g
                })
                .collect(),
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        self.displaced(&|p| p, t - 1.0)
    }
}

/// Closed polygon through `x₀ + r·d(θ)/F°(d(θ))`, counter-clockwise.
pub fn sample_wulff_boundary(shape: &WulffShape, resolution: usize) -> Result<Contour> {
    if shape.norm.dim() != 2 {
        return Err(Error::Unsupported("facet contours are two-dimensional".into()));
    }
    if resolution < 8 {
        return Err(Error::InvalidParameter("resolution must be at least 8".into()));
    }
    let c = [shape.center[0], shape.center[1]];
    let pts: Vec<[f64; 2]> = (0..resolution)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / resolution as f64;
            let d = [cos(t), sin(t)];
            let s = shape.radius / shape.polar.eval_unchecked(&d);
            [c[0] + s * d[0], c[1] + s * d[1]]
        })
        .collect();
    let facets = (0..resolution).map(|k| Facet::new(pts[k], pts[(k + 1) % resolution])).collect();
    Ok(Contour::new(facets))
}

/// `ν_F = F_ξ(ν)`.
pub fn anisotropic_normal(norm: &MinkowskiNorm, normal: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; norm.dim()];
    norm.grad(normal, &mut out)?;
    Ok(out)
}

/// `Σ F(ν)·|facet|`.
pub fn sigma_f(norm: &MinkowskiNorm, contour: &Contour) -> f64 {
    contour
        .facets
        .iter()
        .map(|f| {
            // F(ν)·len = F(rotated edge) by homogeneity
            let e = [f.b[1] - f.a[1], f.a[0] - f.b[0]];
            norm.eval_unchecked(&e)
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstVariation {
    /// Central difference of `σ_F` along the displacement.
    pub lhs: f64,
    /// `Σ H_F ⟨V, ν⟩ |facet|`.
    pub rhs: f64,
    /// Central differences at `s` and `s/2` disagree by more than 1%.
    pub step_warning: bool,
}

impl FirstVariation {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs().max(self.rhs.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Compares the derivative of `σ_F` along `x ↦ x + sV(x)` with the
/// curvature integral. Every facet must carry a curvature value.
pub fn first_variation_check(
    norm: &MinkowskiNorm,
    contour: &Contour,
    field: &dyn Fn([f64; 2]) -> [f64; 2],
    step: f64,
) -> Result<FirstVariation> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let central = |s: f64| {
        (sigma_f(norm, &contour.displaced(field, s)) - sigma_f(norm, &contour.displaced(field, -s)))
            / (2.0 * s)
    };
    let lhs = central(step);
    let half = central(0.5 * step);
    let mut rhs = 0.0;
    for f in &contour.facets {
        let h = f.curvature.ok_or_else(|| {
            Error::InvalidParameter("first variation needs a curvature on every facet".into())
        })?;
        let v = field(f.midpoint());
        rhs += h * (v[0] * f.normal[0] + v[1] * f.normal[1]) * f.measure;
    }
    let scale = lhs.abs().max(half.abs()).max(1e-9 * sigma_f(norm, contour));
    Ok(FirstVariation { lhs: half, rhs, step_warning: (lhs - half).abs() > 0.01 * scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_perimeter() {
        let w = WulffShape::new(vec![0.0, 0.0], 1.0, MinkowskiNorm::euclidean(2).unwrap()).unwrap();
        let c = sample_wulff_boundary(&w, 512).unwrap();
        assert!((c.length() / (2.0 * PI) - 1.0).abs() < 1e-3);
        assert!(c.is_closed(0.0));
        assert!(c.enclosed_area() > 0.0 && c.reversed().enclosed_area() < 0.0);
    }

    #[test]
    fn wulff_circumradius_and_extent() {
        let n = MinkowskiNorm::ellipsoidal(2, &[4.0, 0.0, 0.0, 1.0]).unwrap();
        let w = WulffShape::new(vec![0.0, 0.0], 1.0, n).unwrap();
        assert!((w.extent(&[1.0, 0.0]) - 2.0).abs() < 1e-15);
        assert!((w.circumradius() - 2.0).abs() < 1e-12);
        let l = WulffShape::new(vec![0.0, 0.0], 1.0, MinkowskiNorm::lq(2, 4.0, 0.05).unwrap()).unwrap();
        // F(e) for the smoothed l4 norm peaks on the axes
        let axis = l.norm().eval(&[1.0, 0.0]).unwrap();
        assert!((l.circumradius() - axis).abs() < 1e-10);
        assert!(w.contains(&[1.9, 0.0]) && !w.contains(&[0.0, 1.1]));
    }
}
