use iamcf_core::solver::{continuation_solve, extrapolate_limit, potential_from_arrival, solve_vp, solve_vp_from, Barriers};
use iamcf_core::*;

fn wulff_domain(norm: &MinkowskiNorm, radius: f64, cells: usize) -> GridDomain {
    let g = Grid2::square([0.0, 0.0], 8.0, cells).unwrap();
    let w = WulffShape::new(vec![0.0, 0.0], radius, norm.clone()).unwrap();
    GridDomain::new(g, Obstacle::Wulff(w)).unwrap()
}

/// `sup |v − (r/F°)^α|` over interior nodes against the closed form.
fn closed_form_error(norm: &MinkowskiNorm, domain: &GridDomain, v: &ScalarField, r: f64, p: f64) -> f64 {
    let polar = norm.polar();
    let alpha = (2.0 - p) / (p - 1.0);
    let g = domain.grid();
    (0..g.len())
        .filter(|k| domain.kind(*k) == NodeKind::Interior)
        .map(|k| (v.values[k] - (r / polar.eval(&g.point_of(k)).unwrap()).powf(alpha)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn wulff_solution_converges_to_closed_form() {
    let norm = MinkowskiNorm::ellipsoidal(2, &[4.0, 0.0, 0.0, 1.0]).unwrap();
    let config = SolverConfig { p: 1.5, ..SolverConfig::default() };
    let errors: Vec<f64> = [48, 96]
        .iter()
        .map(|&cells| {
            let d = wulff_domain(&norm, 0.5, cells);
            let report = solve_vp(&norm, &d, &config).unwrap();
            assert!(report.converged);
            closed_form_error(&norm, &d, &report.field, 0.5, 1.5)
        })
        .collect();
    assert!(errors[1] < 0.6 * errors[0], "{errors:?}");
    assert!(errors[1] < 0.05, "{errors:?}");
}

#[test]
fn report_is_consistent() {
    let norm = MinkowskiNorm::euclidean(2).unwrap();
    let d = wulff_domain(&norm, 1.0, 64);
    let report = solve_vp(&norm, &d, &SolverConfig { p: 1.3, ..SolverConfig::default() }).unwrap();
    assert!(report.converged && report.gradient_norm <= report.tol_grad);
    assert!(report.energy_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert_eq!(report.positivity_violations, 0);
    assert!(report.barrier.passed);
    let sensitivity = report.regularization_sensitivity.expect("confirmation solve runs by default");
    assert!(sensitivity < 1e-3, "{sensitivity}");
    let bounds = report.bounds.as_ref().expect("Wulff obstacle has an inradius");
    assert!((bounds.inradius - 1.0).abs() < 1e-12);
    for (k, v) in report.field.values.iter().enumerate() {
        assert!(*v > 0.0 && *v <= 1.0 + 1e-9, "node {k}: {v}");
    }
}

#[test]
fn larger_obstacle_gives_larger_potential() {
    let norm = MinkowskiNorm::euclidean(2).unwrap();
    let config = SolverConfig { p: 1.4, ..SolverConfig::default() };
    let small = wulff_domain(&norm, 0.8, 64);
    let large = wulff_domain(&norm, 1.0, 64);
    let vs = solve_vp(&norm, &small, &config).unwrap().field;
    let vl = solve_vp(&norm, &large, &config).unwrap().field;
    for k in 0..vs.values.len() {
        assert!(vl.values[k] >= vs.values[k] - 1e-8, "node {k}");
    }
}

#[test]
fn square_obstacle_stays_between_barriers() {
    for norm in [MinkowskiNorm::euclidean(2).unwrap(), MinkowskiNorm::ellipsoidal(2, &[4.0, 0.0, 0.0, 1.0]).unwrap()] {
        let g = Grid2::square([0.0, 0.0], 12.0, 96).unwrap();
        let d = GridDomain::new(g, Obstacle::Polygon(Polygon::square([0.0, 0.0], 2.0).unwrap())).unwrap();
        let report = solve_vp(&norm, &d, &SolverConfig { p: 1.5, ..SolverConfig::default() }).unwrap();
        assert!(report.converged);
        let barriers = Barriers::new(&norm, d.obstacle()).unwrap();
        let slack = report.barrier.slack;
        for k in (0..g.len()).filter(|k| d.kind(*k) == NodeKind::Interior) {
            let x = g.point_of(k);
            assert!(report.field.values[k] >= barriers.lower(x, 1.5) - slack);
            assert!(report.field.values[k] <= barriers.upper(x, 1.5) + slack);
        }
    }
}

#[test]
fn warm_start_reaches_the_cold_solution() {
    let norm = MinkowskiNorm::euclidean(2).unwrap();
    let d = wulff_domain(&norm, 1.0, 64);
    let config = SolverConfig { p: 1.2, ..SolverConfig::default() };
    let cold = solve_vp(&norm, &d, &config).unwrap();
    let seed = solve_vp(&norm, &d, &config.clone().with_p(1.3)).unwrap();
    let warm = solve_vp_from(&norm, &d, &config, Some(&seed.field.values)).unwrap();
    let gap = cold.field.values.iter().zip(&warm.field.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-6, "{gap}");
}

#[test]
fn invalid_exponents_are_rejected() {
    let norm = MinkowskiNorm::euclidean(2).unwrap();
    let d = wulff_domain(&norm, 1.0, 32);
    for p in [2.0, 2.5, 1.0, 0.5, 1.001] {
        assert!(solve_vp(&norm, &d, &SolverConfig { p, ..SolverConfig::default() }).is_err(), "p = {p}");
    }
    let bad = SolverConfig { schedule: vec![1.5, 2.1], ..SolverConfig::default() };
    assert!(continuation_solve(&norm, &d, &bad).is_err());
    let rising = SolverConfig { schedule: vec![1.2, 1.5], ..SolverConfig::default() };
    assert!(continuation_solve(&norm, &d, &rising).is_err());
}

#[test]
fn truncation_rule_is_enforced() {
    let norm = MinkowskiNorm::euclidean(2).unwrap();
    let g = Grid2::square([0.0, 0.0], 4.0, 32).unwrap();
    let w = WulffShape::new(vec![0.0, 0.0], 1.0, norm).unwrap();
    assert!(GridDomain::new(g, Obstacle::Wulff(w)).is_err());
}

#[test]
fn continuation_approaches_the_limit_profile() {
    let norm = MinkowskiNorm::euclidean(2).unwrap();
    let d = wulff_domain(&norm, 1.0, 64);
    let config = SolverConfig { schedule: vec![1.5, 1.3, 1.2], ..SolverConfig::default() };
    let run = continuation_solve(&norm, &d, &config).unwrap();
    assert!(run.aborted.is_none());
    assert_eq!(run.reports.len(), 3);
    assert_eq!(run.cauchy.len(), 2);
    let g = d.grid();
    let annulus: Vec<usize> = (0..g.len())
        .filter(|k| {
            let r = g.point_of(*k)[0].hypot(g.point_of(*k)[1]);
            (1.5..=3.0).contains(&r)
        })
        .collect();
    let gap = |u: &ScalarField| {
        annulus.iter().map(|k| {
            let x = g.point_of(*k);
            (u.values[*k] - x[0].hypot(x[1]).ln()).abs()
        })
        .fold(0.0, f64::max)
    };
    let gaps: Vec<f64> = run.reports.iter().map(|r| gap(&r.arrival_time().unwrap())).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let limit = extrapolate_limit(&run.reports).unwrap();
    assert!(gap(&limit) < gaps[2], "{} vs {gaps:?}", gap(&limit));
}

#[test]
fn log_transform_round_trips() {
    let g = Grid2::square([0.0, 0.0], 1.0, 8).unwrap();
    let v = ScalarField::from_fn(g, FieldMeaning::Potential, |x| 0.2 + 0.1 * x[0] * x[0]);
    let u = diagnostics::log_transform(&v, 1.3).unwrap();
    let back = potential_from_arrival(&u, 1.3).unwrap();
    for (a, b) in v.values.iter().zip(&back.values) {
        assert!((a - b).abs() < 1e-14);
    }
    let bad = ScalarField::from_fn(g, FieldMeaning::Potential, |x| x[0]);
    assert!(diagnostics::log_transform(&bad, 1.3).is_err());
}
