use iamcf_core::grid::NodeKind;
use iamcf_core::solver::{energy, energy_gradient, DiscreteEnergy};
use iamcf_core::*;
use proptest::prelude::*;

/// Box `±12` with a `2 × 2` square whose corners sit on grid nodes.
fn aligned_square(cells: usize) -> GridDomain {
    let g = Grid2::square([0.0, 0.0], 12.0, cells).unwrap();
    GridDomain::new(g, Obstacle::Polygon(Polygon::square([0.0, 0.0], 2.0).unwrap())).unwrap()
}

fn disk(cells: usize, norm: &MinkowskiNorm) -> GridDomain {
    let g = Grid2::square([0.0, 0.0], 8.0, cells).unwrap();
    let w = WulffShape::new(vec![0.0, 0.0], 0.6, norm.clone()).unwrap();
    GridDomain::new(g, Obstacle::Wulff(w)).unwrap()
}

/// Field with `v = 1` on the obstacle and the given values elsewhere.
fn field_on(domain: &GridDomain, values: &[f64]) -> ScalarField {
    let v = (0..domain.grid().len())
        .map(|k| if domain.kind(k) == NodeKind::Obstacle { 1.0 } else { values[k % values.len()] })
        .collect();
    ScalarField::new(*domain.grid(), v, FieldMeaning::Potential).unwrap()
}

/// `½ Σ_edges w_e (Δv)²` with `w_e` half the number of adjacent cells.
fn five_point_energy(g: &Grid2, v: &[f64]) -> f64 {
    let mut e = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i + 1 < g.nx {
                let w = if j == 0 || j == g.ny - 1 { 0.5 } else { 1.0 };
                e += 0.5 * w * (v[g.index(i + 1, j)] - v[g.index(i, j)]).powi(2);
            }
            if j + 1 < g.ny {
                let w = if i == 0 || i == g.nx - 1 { 0.5 } else { 1.0 };
                e += 0.5 * w * (v[g.index(i, j + 1)] - v[g.index(i, j)]).powi(2);
            }
        }
    }
    e
}

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..2.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dirichlet_energy_matches_five_point_stencil(vals in values(97)) {
        let d = aligned_square(48);
        let e = MinkowskiNorm::euclidean(2).unwrap();
        let f = field_on(&d, &vals);
        let ours = energy(&e, &d, &f, 2.0, 0.0).unwrap();
        let oracle = five_point_energy(d.grid(), &f.values);
        prop_assert!((ours - oracle).abs() <= 1e-10 * oracle.max(1.0), "{ours} vs {oracle}");
    }

    #[test]
    fn dirichlet_gradient_is_five_point_laplacian(vals in values(97)) {
        let d = aligned_square(48);
        let g = *d.grid();
        let e = MinkowskiNorm::euclidean(2).unwrap();
        let f = field_on(&d, &vals);
        let grad = energy_gradient(&e, &d, &f, 2.0, 0.0).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                let expected = if d.kind(k) == NodeKind::Interior {
                    4.0 * f.at(i, j) - f.at(i + 1, j) - f.at(i - 1, j) - f.at(i, j + 1) - f.at(i, j - 1)
                } else {
                    0.0
                };
                prop_assert!((grad[k] - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn gradient_matches_directional_differences(
        vals in proptest::collection::vec(0.0f64..1.0, 61),
        dir in proptest::collection::vec(-1.0f64..1.0, 53),
        p in 1.05f64..1.9,
        ell in 0usize..3,
    ) {
        let norm = match ell {
            0 => MinkowskiNorm::euclidean(2).unwrap(),
            1 => MinkowskiNorm::ellipsoidal(2, &[2.0, 0.3, 0.3, 1.0]).unwrap(),
            _ => MinkowskiNorm::lq(2, 4.0, 0.05).unwrap(),
        };
        let d = disk(40, &norm);
        let f = field_on(&d, &vals);
        let model = DiscreteEnergy::new(&norm, &d, p, 1e-3, BoundaryFit::CutCell).unwrap();
        let grad = model.gradient(&f.values);
        let step: Vec<f64> = (0..f.values.len())
            .map(|k| if d.kind(k) == NodeKind::Interior { dir[k % dir.len()] } else { 0.0 })
            .collect();
        let eps = 1e-5;
        let plus: Vec<f64> = f.values.iter().zip(&step).map(|(v, s)| v + eps * s).collect();
        let minus: Vec<f64> = f.values.iter().zip(&step).map(|(v, s)| v - eps * s).collect();
        let fd = model.energy_difference(&minus, &plus) / (2.0 * eps);
        let exact: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-12), "{fd} vs {exact}");
    }

    #[test]
    fn energy_is_convex_along_segments(
        a in proptest::collection::vec(0.0f64..1.0, 41),
        b in proptest::collection::vec(0.0f64..1.0, 43),
        p in 1.1f64..1.9,
    ) {
        let norm = MinkowskiNorm::euclidean(2).unwrap();
        let d = disk(40, &norm);
        let (fa, fb) = (field_on(&d, &a), field_on(&d, &b));
        let mid: Vec<f64> = fa.values.iter().zip(&fb.values).map(|(x, y)| 0.5 * (x + y)).collect();
        let model = DiscreteEnergy::new(&norm, &d, p, 0.0, BoundaryFit::CutCell).unwrap();
        let (ea, eb, em) = (model.energy(&fa.values), model.energy(&fb.values), model.energy(&mid));
        prop_assert!(em <= 0.5 * (ea + eb) * (1.0 + 1e-12));
    }
}

#[test]
fn energy_difference_agrees_with_subtraction() {
    let norm = MinkowskiNorm::ellipsoidal(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
    let d = disk(40, &norm);
    let a = field_on(&d, &[0.2, 0.5, 0.9, 0.1, 0.4]);
    let b = field_on(&d, &[0.3, 0.45, 0.7, 0.15, 0.4, 0.6]);
    let model = DiscreteEnergy::new(&norm, &d, 1.3, 1e-6, BoundaryFit::CutCell).unwrap();
    let direct = model.energy(&b.values) - model.energy(&a.values);
    assert!((model.energy_difference(&a.values, &b.values) - direct).abs() < 1e-10 * direct.abs());
}

#[test]
fn staircase_and_cut_cell_agree_on_aligned_obstacle() {
    let d = aligned_square(48);
    let e = MinkowskiNorm::euclidean(2).unwrap();
    let f = field_on(&d, &[0.3, 0.8, 0.1, 0.55, 0.9, 0.2, 0.7]);
    let cut = DiscreteEnergy::new(&e, &d, 1.4, 0.0, BoundaryFit::CutCell).unwrap().energy(&f.values);
    let stair = DiscreteEnergy::new(&e, &d, 1.4, 0.0, BoundaryFit::Staircase).unwrap().energy(&f.values);
    assert!((cut - stair).abs() < 1e-10 * cut);
}

#[test]
fn mismatched_field_is_rejected() {
    let e = MinkowskiNorm::euclidean(2).unwrap();
    let d = aligned_square(48);
    let other = ScalarField::from_fn(Grid2::square([0.0, 0.0], 8.0, 16).unwrap(), FieldMeaning::Potential, |_| 0.0);
    assert!(energy(&e, &d, &other, 2.0, 0.0).is_err());
}
