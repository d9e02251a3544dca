use tpm_core::geometry::{correlation_profile, measure_incoherence, riemannian_gradient, span_residual};
use tpm_core::landscape::{
    certify, finite_difference_gradient, gap_check, landscape_sweep, manifold_gradient_descent, proximity_check,
    DescentOptions, PointKind, DEFAULT_EIG_TOL, DEFAULT_GRAD_TOL,
};
use tpm_core::sampling::{generate_components, stream_rng, uniform_unit, ComponentModel, Domain};
use tpm_core::Rank1SumTensor;

#[test]
fn descent_on_orthonormal_components_finds_a_component() {
    let set = generate_components(ComponentModel::Orthonormal, 8, 4, (1.0, 1.0), 2).unwrap();
    let t = Rank1SumTensor::from_components(&set);
    let mut rng = stream_rng(2, Domain::DescentStarts, 0, 0);
    for start in 0..100 {
        let w0 = uniform_unit(&mut rng, 8);
        let out = manifold_gradient_descent(&t, &w0, &DescentOptions::default()).unwrap();
        assert!(out.converged, "start {start}");
        let p = proximity_check(&out.point, &set).unwrap();
        assert!(p.error <= 1e-6, "start {start}: {p:?}");
        for pair in out.objective_trace.windows(2) {
            // accepted steps never increase f; recomputing f can differ by roundoff
            assert!(pair[1] <= pair[0] + 1e-14, "start {start}: {pair:?}");
        }
    }
}

#[test]
fn critical_points_lie_in_the_component_span() {
    let mut checked = 0;
    for seed in 0..4 {
        let set = generate_components(ComponentModel::GaussianUnit, 30, 5, (1.0, 1.25), seed).unwrap();
        let rows = landscape_sweep(&set, seed, 25, &DescentOptions::default(), DEFAULT_EIG_TOL).unwrap();
        let t = Rank1SumTensor::from_components(&set);
        for row in rows.iter().filter(|r| r.point_kind == "minimum" || r.point_kind == "saddle") {
            let certificate = certify(&t, &row.point, DEFAULT_GRAD_TOL, DEFAULT_EIG_TOL).unwrap();
            if certificate.lambda_value > 1e-6 {
                assert!(span_residual(&set, &row.point).unwrap() <= 1e-6, "seed {seed}: {row:?}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 50, "{checked}");
}

#[test]
fn two_component_midpoint_is_a_saddle() {
    let set = generate_components(ComponentModel::Orthonormal, 6, 3, (1.0, 1.0), 0).unwrap();
    let t = Rank1SumTensor::from_components(&set);
    let mid = (set.vector(0) + set.vector(1)).normalize();
    let c = certify(&t, &mid, DEFAULT_GRAD_TOL, DEFAULT_EIG_TOL).unwrap();
    assert_eq!(c.classification, PointKind::Saddle);
    assert!((c.min_tangent_eigenvalue + 1.0).abs() <= 1e-8);
    assert!((c.lambda_value - 0.5).abs() <= 1e-12);
}

#[test]
fn finite_difference_gradient_has_second_order_truncation() {
    let set = generate_components(ComponentModel::GaussianUnit, 7, 3, (1.0, 1.25), 5).unwrap();
    let t = Rank1SumTensor::from_components(&set);
    let w = uniform_unit(&mut stream_rng(5, Domain::Probes, 0, 0), 7);
    let exact = riemannian_gradient(&t, &w).unwrap();
    let error = |h: f64| (finite_difference_gradient(&t, &w, h).unwrap() - &exact).norm();

    let fd = finite_difference_gradient(&t, &w, 1e-5).unwrap();
    assert!((&fd - &exact).norm() <= 1e-6 * exact.norm());

    // least-squares slope of log error against log h in the truncation regime
    let hs: [f64; 4] = [1e-3, 5e-4, 2.5e-4, 1.25e-4];
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = hs.iter().map(|&h| error(h).ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() < 0.1, "{slope}");
    // at the small end roundoff dominates and the error grows again
    assert!(error(1e-8) > error(1e-5));
    assert!(error(1e-3) > error(1e-5));
}

#[test]
fn minima_of_conforming_instances_have_the_gap_and_are_close() {
    let (d, k) = (60, 5);
    let mut minima = 0;
    for seed in 0..24u64 {
        let set = generate_components(ComponentModel::NearOrthogonal { spread: 0.015 }, d, k, (1.0, 1.25), seed).unwrap();
        let tau = measure_incoherence(&set);
        assert!(k as f64 * tau <= 0.05, "seed {seed}: kτ = {}", k as f64 * tau);
        assert!(set.kappa() <= 1.25);
        let rows = landscape_sweep(&set, seed, 25, &DescentOptions::default(), DEFAULT_EIG_TOL).unwrap();
        for row in rows.iter().filter(|r| r.point_kind == "minimum") {
            let profile = correlation_profile(&set, &row.point).unwrap();
            assert!(gap_check(&profile).unwrap(), "seed {seed}: {:?}", profile.values);
            assert!(row.within, "seed {seed}: error {} bound {}", row.error, row.bound);
            minima += 1;
        }
    }
    assert!(minima >= 500, "{minima}");
}

#[test]
fn empty_and_truncated_sweeps() {
    let set = generate_components(ComponentModel::Orthonormal, 5, 2, (1.0, 1.0), 0).unwrap();
    assert!(landscape_sweep(&set, 0, 0, &DescentOptions::default(), DEFAULT_EIG_TOL).unwrap().is_empty());
    // a single iteration leaves every start non-critical rather than failing the sweep
    let options = DescentOptions { max_iters: 1, ..Default::default() };
    let rows = landscape_sweep(&set, 0, 5, &options, DEFAULT_EIG_TOL).unwrap();
    assert!(rows.iter().all(|r| r.point_kind == "non-critical"));
}
