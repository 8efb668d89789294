//! The numeric kernels are generic over the scalar; exercise the f32
//! instantiation end to end and confirm it tracks f64 at single precision.

use seqtest::boundary::{mixture_half_width, rho_for_target_time};
use seqtest::dgp::{latent, std_normal_cdf, Dgp1Stream, Shape, ShapeSpec};
use seqtest::engine::{StreamKind, TestBundle};
use seqtest::regress::RegressorKind;
use seqtest::types::{NullSpec, Observation, TestConfig};
use seqtest::weights::threshold_weight;

#[test]
fn f32_boundary_tracks_f64() {
    let wide = mixture_half_width(1000u64, 0.25f32, 0.1, 0.06).unwrap();
    let precise = mixture_half_width(1000u64, 0.25f64, 0.1, 0.06).unwrap();
    assert!((f64::from(wide) - precise).abs() < 1e-6);
    let rho32 = rho_for_target_time(1294, 0.1f32).unwrap();
    assert!((f64::from(rho32) - 0.06).abs() < 1e-5);
}

#[test]
fn f32_special_functions_and_weights() {
    assert!((std_normal_cdf(0.0f32) - 0.5).abs() < 1e-7);
    let x = vec![0.5f32; 10];
    assert_eq!(latent(&x).unwrap(), 0.5f32);
    assert_eq!(threshold_weight(-0.05f32, 0.1), -0.1);
}

#[test]
fn f32_engine_consumes_a_stream() {
    let cfg = TestConfig::<f32> { t0: 20, seed: 6, ..TestConfig::default() };
    let mut bundle = TestBundle::from_kind(
        StreamKind::Cmf,
        10,
        NullSpec::constant(0.5f32),
        cfg,
        &RegressorKind::Knn { k: 10 },
    )
    .unwrap();
    let spec = ShapeSpec::<f32>::new(Shape::Bump, 0.15, 5.0, 10).unwrap();
    let stream = Dgp1Stream::new(spec, 12).map(|obs| match obs {
        Observation::Cmf(o) => Observation::Cmf(o),
        Observation::Cate(o) => Observation::Cate(o),
    });
    let (records, _) = bundle.run_to_horizon(stream, 150).unwrap();
    assert_eq!(records.len(), 150);
    assert!(records.iter().all(|r| r.v_hat.is_finite() && r.lower_bound.is_finite()));
}
