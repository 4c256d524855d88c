//! Fractal estimators on sets with known dimension.

use isl::cantor;
use isl::dynamics::{self, FlowSystem};
use isl::geometry::{self, PointCloud, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lorenz_cloud(n: usize, stride: usize) -> PointCloud {
    let sys = FlowSystem::lorenz_canonical();
    let x0 = dynamics::settle(&sys, &[1.0, 1.0, 1.0]).unwrap();
    let traj = dynamics::integrate(&sys, &x0, 0.01, n * stride).unwrap();
    PointCloud::from_points(&traj.points.iter().step_by(stride).take(n).cloned().collect::<Vec<_>>()).unwrap()
}

fn halving_ratios(fractions: &[f64]) -> Vec<f64> {
    fractions.windows(2).map(|w| w[1] / w[0]).collect()
}

#[test]
fn cantor_dust_sparseness_follows_codimension() {
    let dust = cantor::cantor_dust(8);
    let bbox = dust.bounding_box().unwrap();
    let eps: Vec<f64> = (0..4).map(|k| 0.05 / 2f64.powi(k)).collect();
    let f = geometry::sparseness_probe(&dust, 20_000, &eps, &bbox, 3).unwrap();
    let d = 4f64.ln() / 3f64.ln();
    let expected = 2f64.powf(d - 2.0);
    for r in halving_ratios(&f) {
        assert!((r / expected - 1.0).abs() < 0.25, "ratio {r} vs {expected}");
    }
}

#[test]
fn square_is_not_sparse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Vec<f64>> = (0..50_000).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let sq = PointCloud::from_points(&pts).unwrap();
    let bbox = sq.bounding_box().unwrap();
    let f = geometry::sparseness_probe(&sq, 5000, &[0.05, 0.025], &bbox, 1).unwrap();
    assert!(f.iter().all(|&x| x > 0.95), "{f:?}");
}

#[test]
fn lorenz_sparseness_shrinks_monotonically() {
    let cloud = lorenz_cloud(20_000, 5);
    let bbox = cloud.bounding_box().unwrap();
    let eps: Vec<f64> = (0..4).map(|k| 0.05 * cloud.extent() / 2f64.powi(k)).collect();
    let f = geometry::sparseness_probe(&cloud, 10_000, &eps, &bbox, 9).unwrap();
    assert!(f.windows(2).all(|w| w[1] < w[0]), "{f:?}");
    assert!(f[0] < 0.5);
}

#[test]
fn lorenz_correlation_dimension() {
    let cloud = lorenz_cloud(100_000, 1);
    let est = geometry::correlation_dimension(&cloud, &geometry::relative_radii(&cloud, 1e-3, 0.05, 12)).unwrap();
    assert!((est.value - 2.05).abs() < 0.1, "{}", est.value);
}

#[test]
fn estimators_agree_on_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts: Vec<Vec<f64>> = (0..40_000).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let sq = PointCloud::from_points(&pts).unwrap();
    let b = geometry::box_counting_dimension(&sq, 0.02, 0.2, 6).unwrap().value;
    let c = geometry::correlation_dimension(&sq, &geometry::relative_radii(&sq, 5e-3, 0.05, 8)).unwrap().value;
    assert!((b - c).abs() < 0.15, "{b} vs {c}");
    assert!((c - 2.0).abs() < 0.1);
}

#[test]
fn sine_delay_is_quarter_period() {
    let period = 200;
    let values: Vec<f64> = (0..20 * period).map(|i| (std::f64::consts::TAU * i as f64 / period as f64).sin()).collect();
    let sel = geometry::select_delay(&TimeSeries::new(0.01, values).unwrap()).unwrap();
    assert!((sel.tau as i64 - period as i64 / 4).abs() <= 1, "{}", sel.tau);
}

#[test]
fn window_means_of_uniform_noise_tighten() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let values: Vec<f64> = (0..200_000).map(|_| rng.random::<f64>()).collect();
    let raw = geometry::moments(&values);
    let avg = geometry::time_average_distribution(&TimeSeries::new(1.0, values).unwrap(), 100).unwrap();
    assert!((raw.excess_kurtosis + 1.2).abs() < 0.05);
    assert!(avg.excess_kurtosis.abs() < 0.2);
    assert!((avg.variance * 1200.0 - 1.0).abs() < 0.1);
}
