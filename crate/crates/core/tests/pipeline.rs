use ecclab_core::densities::DensityModel;
use ecclab_core::ecc::{ecc_curve_2d, ecc_in_lambda, LambdaCurve};
use ecclab_core::geometry::PointCloud;
use ecclab_core::harness::compare_curves;
use ecclab_core::laplace::{invert_excess_2d, level_measure, Eecc, GridFunction};
use ecclab_core::limits::{LimitCurve, Provenance};
use ecclab_core::rng::stream;

#[test]
fn sampled_cloud_survives_csv_and_tracks_its_limit() {
    let model = DensityModel::Normal2d;
    let cloud = model.sample(&mut stream(1, 0), 20_000);
    let back = PointCloud::from_csv_str(&cloud.to_csv_string(), None).unwrap();
    assert_eq!(back, cloud);

    let lambdas: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
    let empirical = ecc_in_lambda(&ecc_curve_2d(&back).unwrap(), 20_000.0, 2, &lambdas).unwrap();
    let limit = LimitCurve::evaluate(&model, 2, Provenance::ClosedForm, &lambdas, 0, 0).unwrap();
    let gap = compare_curves(&empirical, &limit.curve).unwrap();
    assert!(gap.sup_distance < 0.03, "{gap:?}");

    let mut csv = Vec::new();
    empirical.write_csv(&mut csv).unwrap();
    assert_eq!(LambdaCurve::read_csv(csv.as_slice()).unwrap(), empirical);
}

#[test]
fn inverted_excess_mass_survives_csv() {
    let ymax = DensityModel::ExpLaplace2d.sup();
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 * ymax / 100.0).collect();
    let excess = invert_excess_2d(&Eecc::catalog(&DensityModel::ExpLaplace2d).unwrap(), &grid, 64).unwrap();
    for (y, v) in grid.iter().zip(&excess.values).skip(5).take(90) {
        assert!((v - DensityModel::ExpLaplace2d.excess_mass(*y)).abs() < 1e-5, "y={y}");
    }
    let mut csv = Vec::new();
    excess.write_csv(&mut csv).unwrap();
    let back = GridFunction::read_csv(csv.as_slice()).unwrap();
    assert_eq!(back, excess);
    // level sets shrink as the level rises
    let mu = level_measure(&back).unwrap();
    assert!(mu.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}
