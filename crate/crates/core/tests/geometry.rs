use std::f64::consts::PI;

use iamcf_core::diagnostics::polygon_inradius;
use iamcf_core::stencil::{curvature_field_3d, level_set_hf};
use iamcf_core::wulff::{anisotropic_normal, first_variation_check, sample_wulff_boundary, sigma_f};
use iamcf_core::*;
use proptest::prelude::*;

fn builtins() -> Vec<(&'static str, MinkowskiNorm)> {
    vec![
        ("euclidean", MinkowskiNorm::euclidean(2).unwrap()),
        ("ellipsoidal", MinkowskiNorm::ellipsoidal(2, &[4.0, 0.0, 0.0, 1.0]).unwrap()),
        ("lq4", MinkowskiNorm::lq(2, 4.0, 0.05).unwrap()),
    ]
}

/// Wulff boundary of radius `r` with the exact curvature `1/r` on every facet.
fn wulff_contour(norm: &MinkowskiNorm, r: f64, samples: usize) -> Contour {
    let w = WulffShape::new(vec![0.0, 0.0], r, norm.clone()).unwrap();
    let mut c = sample_wulff_boundary(&w, samples).unwrap();
    for f in &mut c.facets {
        f.curvature = Some(1.0 / r);
    }
    c
}

/// Largest `|H_F·F° − 1|` over nodes with `F° ≥ min_gauge`, for `u = F°`
/// on the box `±8`.
fn gauge_curvature_error(norm: &MinkowskiNorm, cells: usize, min_gauge: impl Fn(f64) -> f64) -> f64 {
    let g = Grid2::square([0.0, 0.0], 8.0, cells).unwrap();
    let polar = norm.polar();
    let u = ScalarField::from_fn(g, FieldMeaning::ArrivalTime, |x| polar.eval(&x).unwrap());
    let mut worst = 0.0f64;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let fo = u.at(i, j);
            if fo < min_gauge(g.h) {
                continue;
            }
            let h = level_set_hf(norm, &u, i, j).unwrap();
            worst = worst.max((h * fo - 1.0).abs());
        }
    }
    worst
}

#[test]
fn curvature_of_polar_gauge_is_inverse_radius() {
    for (name, norm) in builtins().into_iter().take(2) {
        let worst = gauge_curvature_error(&norm, 256, |h| 4.0 * h);
        assert!(worst <= 0.02, "{name}: worst relative error {worst}");
    }
}

#[test]
fn smoothed_lq_curvature_error_shrinks_under_refinement() {
    // the smoothed lq Wulff shape has near-axis curvature radii of order δ·F°
    let norm = MinkowskiNorm::lq(2, 4.0, 0.05).unwrap();
    let errors: Vec<f64> = [128, 256, 512].iter().map(|&c| gauge_curvature_error(&norm, c, |_| 2.0)).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    let blunt = MinkowskiNorm::lq(2, 4.0, 0.2).unwrap();
    assert!(gauge_curvature_error(&blunt, 512, |_| 2.0) <= 0.02);
}

#[test]
fn curvature_at_box_edge_is_refused() {
    let g = Grid2::square([0.0, 0.0], 2.0, 16).unwrap();
    let u = ScalarField::from_fn(g, FieldMeaning::ArrivalTime, |x| x[0].hypot(x[1]));
    assert!(level_set_hf(&MinkowskiNorm::euclidean(2).unwrap(), &u, 0, 5).is_err());
}

#[test]
fn sphere_curvature_in_three_dimensions() {
    let g = Grid3::cube([0.0; 3], 2.0, 48);
    let g = g.unwrap();
    let norm = MinkowskiNorm::euclidean(3).unwrap();
    let u = g.sample(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt());
    let hf = curvature_field_3d(&norm, &g, &u).unwrap();
    let mut checked = 0;
    for k in 1..g.n[2] - 1 {
        for j in 1..g.n[1] - 1 {
            for i in 1..g.n[0] - 1 {
                let r = u[g.index(i, j, k)];
                if r < 4.0 * g.h {
                    continue;
                }
                let h = hf[g.index(i, j, k)].expect("regular node");
                assert!((h * r / 2.0 - 1.0).abs() < 0.02, "H = {h} at r = {r}");
                checked += 1;
            }
        }
    }
    assert!(checked > 10_000);
}

#[test]
fn anisotropic_area_of_ellipse() {
    // W_1 = {xᵀA⁻¹x < 1} has area π√det A and σ_F(∂W_r) = 2|W_r|/r in the plane
    let a = [3.0, 0.8, 0.8, 1.0];
    let norm = MinkowskiNorm::ellipsoidal(2, &a).unwrap();
    let expected = 2.0 * PI * (a[0] * a[3] - a[1] * a[2]).sqrt();
    let c = wulff_contour(&norm, 1.0, 4096);
    assert!((sigma_f(&norm, &c) / expected - 1.0).abs() < 1e-5);
    let c2 = wulff_contour(&norm, 2.5, 4096);
    assert!((sigma_f(&norm, &c2) / (2.5 * expected) - 1.0).abs() < 1e-5);
}

#[test]
fn sigma_of_wulff_boundary_is_twice_area_over_radius() {
    for (name, norm) in builtins() {
        let c = wulff_contour(&norm, 1.3, 2048);
        let ratio = sigma_f(&norm, &c) / (2.0 * c.enclosed_area() / 1.3);
        assert!((ratio - 1.0).abs() < 1e-4, "{name}: {ratio}");
    }
}

/// Rolling-ball radius of a convex polygon for the Euclidean norm: a disk
/// tangent at distance `d` from a vertex with interior angle `θ` stays
/// inside iff its radius is at most `d·tan(θ/2)`.
fn rolling_disk_oracle(poly: &Polygon, per_edge: impl Fn(f64) -> usize) -> f64 {
    let v = poly.vertices();
    let n = v.len();
    let angle = |k: usize| {
        let (prev, here, next) = (v[(k + n - 1) % n], v[k], v[(k + 1) % n]);
        let a = (prev[0] - here[0], prev[1] - here[1]);
        let b = (next[0] - here[0], next[1] - here[1]);
        ((a.0 * b.0 + a.1 * b.1) / (a.0.hypot(a.1) * b.0.hypot(b.1))).acos()
    };
    let mut best = f64::INFINITY;
    for k in 0..n {
        let (a, b) = (v[k], v[(k + 1) % n]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let m = per_edge(len);
        for s in 0..m {
            let d = (s as f64 + 0.5) / m as f64 * len;
            let r = (d * (angle(k) / 2.0).tan()).min((len - d) * (angle((k + 1) % n) / 2.0).tan());
            best = best.min(r);
        }
    }
    best
}

#[test]
fn euclidean_rolling_radius_of_polygons() {
    let euclid = MinkowskiNorm::euclidean(2).unwrap();
    let shapes = [
        Polygon::new(vec![[0.0, 0.0], [4.0, 0.0], [1.0, 3.0]]).unwrap(),
        Polygon::square([0.0, 0.0], 2.0).unwrap(),
        Polygon::new(vec![[0.0, 0.0], [3.0, -1.0], [5.0, 1.0], [4.0, 4.0], [0.5, 3.0]]).unwrap(),
    ];
    for poly in &shapes {
        let per_edge = |len: f64| (len * 64.0) as usize;
        let r = polygon_inradius(&euclid, poly, per_edge).unwrap();
        let oracle = rolling_disk_oracle(poly, per_edge);
        assert!((r / oracle - 1.0).abs() < 0.01, "{r} vs {oracle}");
    }
}

#[test]
fn square_rolling_radius_shrinks_with_sampling() {
    let euclid = MinkowskiNorm::euclidean(2).unwrap();
    let sq = Polygon::square([0.0, 0.0], 2.0).unwrap();
    for m in [8usize, 64, 512] {
        let r = polygon_inradius(&euclid, &sq, |_| m).unwrap();
        assert!((r * m as f64 - 1.0).abs() < 1e-6, "m = {m}: {r}");
    }
}

#[test]
fn wulff_obstacle_inradius_is_its_radius() {
    let norm = MinkowskiNorm::ellipsoidal(2, &[4.0, 0.0, 0.0, 1.0]).unwrap();
    let g = Grid2::square([0.0, 0.0], 16.0, 64).unwrap();
    let w = WulffShape::new(vec![0.0, 0.0], 0.9, norm.clone()).unwrap();
    let d = GridDomain::new(g, Obstacle::Wulff(w)).unwrap();
    assert!((iamcf_core::diagnostics::wulff_inradius(&norm, &d).unwrap() - 0.9).abs() < 1e-6);
}

#[test]
fn dilation_first_variation() {
    for (name, norm) in builtins() {
        let c = wulff_contour(&norm, 1.0, 2048);
        let fv = first_variation_check(&norm, &c, &|x| x, 1e-3).unwrap();
        let sigma = sigma_f(&norm, &c);
        assert!((fv.lhs / sigma - 1.0).abs() < 0.01, "{name}: lhs {} sigma {sigma}", fv.lhs);
        assert!(fv.relative_gap() < 0.01, "{name}: {fv:?}");
        assert!(!fv.step_warning);
    }
}

#[test]
fn first_variation_rejects_missing_curvature() {
    let norm = MinkowskiNorm::euclidean(2).unwrap();
    let w = WulffShape::new(vec![0.0, 0.0], 1.0, norm.clone()).unwrap();
    let c = sample_wulff_boundary(&w, 64).unwrap();
    assert!(first_variation_check(&norm, &c, &|x| x, 1e-3).is_err());
    assert!(first_variation_check(&norm, &wulff_contour(&norm, 1.0, 64), &|x| x, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bump_first_variation(
        which in 0usize..3,
        angle in 0.0..std::f64::consts::TAU,
        width in 0.3f64..1.0,
        dir in (-1.0f64..1.0, -1.0f64..1.0),
    ) {
        let (_, norm) = builtins().swap_remove(which);
        let c = wulff_contour(&norm, 1.0, 2048);
        let centre = [angle.cos(), angle.sin()];
        let v = [dir.0, dir.1 + 1.5];
        let field = move |x: [f64; 2]| {
            let d2 = ((x[0] - centre[0]).powi(2) + (x[1] - centre[1]).powi(2)) / (width * width);
            let b = (-d2).exp();
            [b * v[0], b * v[1]]
        };
        let fv = first_variation_check(&norm, &c, &field, 1e-4).unwrap();
        let scale = fv.lhs.abs().max(0.05 * sigma_f(&norm, &c) * width);
        prop_assert!((fv.lhs - fv.rhs).abs() <= 0.02 * scale, "{fv:?}");
    }

    #[test]
    fn anisotropic_normal_is_on_polar_unit_sphere(which in 0usize..3, angle in 0.0..std::f64::consts::TAU) {
        let (_, norm) = builtins().swap_remove(which);
        let nu = anisotropic_normal(&norm, &[angle.cos(), angle.sin()]).unwrap();
        prop_assert!((norm.polar().eval(&nu).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn wulff_boundary_sits_on_the_level(which in 0usize..3, r in 0.2f64..5.0) {
        let (_, norm) = builtins().swap_remove(which);
        let w = WulffShape::new(vec![0.3, -0.2], r, norm.clone()).unwrap();
        let c = sample_wulff_boundary(&w, 64).unwrap();
        for f in &c.facets {
            prop_assert!((w.gauge(&f.a) / r - 1.0).abs() < 1e-8);
        }
        prop_assert!(c.enclosed_area() > 0.0);
    }
}
