use iamcf_core::flow::*;
use iamcf_core::*;

fn wulff_setup(norm: MinkowskiNorm, cells: usize) -> (MinkowskiNorm, GridDomain, ScalarField) {
    let g = Grid2::square([0.0, 0.0], 8.0, cells).unwrap();
    let w = WulffShape::new(vec![0.0, 0.0], 1.0, norm.clone()).unwrap();
    let d = GridDomain::new(g, Obstacle::Wulff(w)).unwrap();
    let polar = norm.polar();
    let u = ScalarField::from_fn(g, FieldMeaning::LimitArrivalTime, |x| polar.eval(&x).unwrap().max(1.0).ln());
    (norm, d, u)
}

fn euclidean_setup(cells: usize) -> (MinkowskiNorm, GridDomain, ScalarField) {
    wulff_setup(MinkowskiNorm::euclidean(2).unwrap(), cells)
}

/// `∫_cell (1 + log r)/r` by 6×6 Gauss–Legendre quadrature.
fn radial_j_oracle(g: &Grid2, cells: &[usize]) -> f64 {
    let nodes = [-0.932_469_514_203_152, -0.661_209_386_466_265, -0.238_619_186_083_197, 0.238_619_186_083_197, 0.661_209_386_466_265, 0.932_469_514_203_152];
    let weights = [0.171_324_492_379_170, 0.360_761_573_048_139, 0.467_913_934_572_691, 0.467_913_934_572_691, 0.360_761_573_048_139, 0.171_324_492_379_170];
    let h = g.h;
    let mut total = 0.0;
    for &c in cells {
        let [x0, y0] = g.point_of(c);
        for (a, wa) in nodes.iter().zip(weights) {
            for (b, wb) in nodes.iter().zip(weights) {
                let (x, y) = (x0 + 0.5 * h * (1.0 + a), y0 + 0.5 * h * (1.0 + b));
                let r = x.hypot(y);
                total += wa * wb * 0.25 * h * h * (1.0 + r.ln()) / r;
            }
        }
    }
    total
}

#[test]
fn j_matches_radial_quadrature() {
    let (norm, d, u) = euclidean_setup(128);
    let g = *d.grid();
    let support: Vec<usize> = (0..g.len())
        .filter(|k| {
            let x = g.point_of(*k);
            (2.0..=3.0).contains(&x[0].hypot(x[1]))
        })
        .collect();
    let cells: Vec<usize> = (0..g.len())
        .filter(|c| {
            let (i, j) = g.ij(*c);
            i + 1 < g.nx
                && j + 1 < g.ny
                && [g.index(i, j), g.index(i + 1, j), g.index(i, j + 1), g.index(i + 1, j + 1)]
                    .iter()
                    .any(|k| support.contains(k))
        })
        .collect();
    let j = J_functional(&norm, &u, &u.values, &support).unwrap();
    let oracle = radial_j_oracle(&g, &cells);
    assert!((j / oracle - 1.0).abs() < 0.005, "{j} vs {oracle}");
}

#[test]
fn j_rejects_changes_outside_support() {
    let (norm, d, u) = euclidean_setup(32);
    let mut phi = u.values.clone();
    let k = d.grid().index(5, 5);
    phi[k] += 1.0;
    assert!(J_functional(&norm, &u, &phi, &[k]).is_ok());
    assert!(J_functional(&norm, &u, &phi, &[k + 1]).is_err());
    assert!(J_functional(&norm, &u, &phi[1..], &[k]).is_err());
}

#[test]
fn exact_solution_passes_minimality_and_scaled_field_fails() {
    for norm in [MinkowskiNorm::euclidean(2).unwrap(), MinkowskiNorm::ellipsoidal(2, &[1.0, 0.0, 0.0, 0.6]).unwrap()] {
        let (norm, d, u) = wulff_setup(norm, 128);
        let report = minimality_spot_check(&norm, &d, &u, 200, 11).unwrap();
        assert_eq!(report.trials.len(), 200);
        assert!(report.passed(), "{} failures", report.failures());
        let scaled = ScalarField::new(u.grid, u.values.iter().map(|v| 10.0 * v).collect(), u.meaning).unwrap();
        assert!(!minimality_spot_check(&norm, &d, &scaled, 200, 11).unwrap().passed());
    }
}

#[test]
fn minimality_is_reproducible_per_seed() {
    let (norm, d, u) = euclidean_setup(64);
    let a = minimality_spot_check(&norm, &d, &u, 20, 3).unwrap();
    let b = minimality_spot_check(&norm, &d, &u, 20, 3).unwrap();
    let c = minimality_spot_check(&norm, &d, &u, 20, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.trials, c.trials);
}

#[test]
fn sublevel_sets_are_nested() {
    let (norm, d, u) = euclidean_setup(128);
    let areas: Vec<f64> = [0.1, 0.4, 0.8, 1.2, 1.6]
        .iter()
        .map(|&t| extract_sublevel(&norm, &u, Some(&d), t).unwrap().contour.enclosed_area())
        .collect();
    assert!(areas.windows(2).all(|w| w[1] > w[0]), "{areas:?}");
    for (t, a) in [0.1f64, 0.4, 0.8, 1.2, 1.6].iter().zip(&areas) {
        let exact = std::f64::consts::PI * (2.0 * t).exp();
        assert!((a / exact - 1.0).abs() < 0.01, "t = {t}: {a} vs {exact}");
    }
}

#[test]
fn anisotropic_area_grows_exponentially_on_exact_data() {
    let (norm, d, u) = wulff_setup(MinkowskiNorm::ellipsoidal(2, &[1.0, 0.0, 0.0, 0.6]).unwrap(), 256);
    let series = area_growth_series(&norm, &d, &u, &[0.25, 0.5, 1.0, 1.5]).unwrap();
    assert!(series.hypothesis_verified);
    for s in &series.samples {
        assert!((s.ratio() - 1.0).abs() < 0.02, "t = {}: {}", s.t, s.ratio());
        assert!((s.coarea_ratio().unwrap() - 1.0).abs() < 0.04, "t = {}: {:?}", s.t, s.coarea_ratio());
    }
}

#[test]
fn weak_curvature_identity_on_exact_data() {
    let (norm, d, u) = euclidean_setup(256);
    for t in [0.5, 1.0] {
        let wc = weak_curvature_residual(&norm, &u, Some(&d), t).unwrap();
        assert!(wc.mean <= 0.05 && wc.masked_fraction() <= 0.01, "t = {t}: {wc:?}");
    }
    assert!(weak_curvature_residual(&norm, &u, Some(&d), 50.0).is_err());
}

#[test]
fn contour_curvature_matches_level() {
    let (norm, d, u) = euclidean_setup(256);
    let snap = extract_sublevel(&norm, &u, Some(&d), 1.0).unwrap();
    let r = 1.0f64.exp();
    let hf = contour_curvatures(&norm, &u, Some(&d), &snap.contour);
    let known: Vec<f64> = hf.into_iter().flatten().collect();
    assert!(known.len() > snap.contour.len() * 9 / 10);
    let mean = known.iter().sum::<f64>() / known.len() as f64;
    assert!((mean * r - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn properness_holds_for_growing_field() {
    let (_, d, u) = euclidean_setup(64);
    assert!(properness_proxy(&d, &u).passed());
    let flipped = ScalarField::new(u.grid, u.values.iter().map(|v| -v).collect(), u.meaning).unwrap();
    assert!(!properness_proxy(&d, &flipped).passed());
}
