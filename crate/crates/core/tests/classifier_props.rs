use lulc_core::classify::{knn_predict_with, predict_with, ClassStats, ExtractOptions, FeatureOptions};
use lulc_core::sampling::stratified_random_points_excluding;
use lulc_core::synth::generate_scene;
use lulc_core::{
    extract_training, stratified_random_points, stripe_scene_spec, train_max_likelihood, ClassLegend,
    GaussianClassModel, LabeledSample, Ridge, SamplePlan, Workers,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

/// `A A' + 0.5 I`, symmetric positive definite.
fn spd(dim: usize, a: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut v = if i == j { 0.5 } else { 0.0 };
            for k in 0..dim {
                v += a[i * dim + k] * a[j * dim + k];
            }
            s[i * dim + j] = v;
        }
    }
    // exact symmetry
    for i in 0..dim {
        for j in 0..i {
            s[j * dim + i] = s[i * dim + j];
        }
    }
    s
}

#[derive(Debug, Clone)]
struct RandomModel {
    dim: usize,
    classes: Vec<(Vec<f64>, Vec<f64>, f64)>,
    x: Vec<f64>,
}

fn model_strategy() -> impl Strategy<Value = RandomModel> {
    (1usize..7, 2usize..5).prop_flat_map(|(dim, k)| {
        let class = (
            proptest::collection::vec(-5.0..5.0f64, dim),
            proptest::collection::vec(-1.0..1.0f64, dim * dim),
            0.05..1.0f64,
        );
        (
            Just(dim),
            proptest::collection::vec(class, k),
            proptest::collection::vec(-8.0..8.0f64, dim),
        )
            .prop_map(|(dim, classes, x)| RandomModel {
                dim,
                classes: classes.into_iter().map(|(m, a, p)| (m, spd(dim, &a), p)).collect(),
                x,
            })
    })
}

fn build(m: &RandomModel) -> GaussianClassModel {
    let legend = ClassLegend::canonical();
    let stats = m
        .classes
        .iter()
        .enumerate()
        .map(|(i, (mean, cov, prior))| ClassStats {
            class_id: i as u8 + 1,
            n_samples: 10,
            mean: mean.clone(),
            covariance: cov.clone(),
            prior: *prior,
        })
        .collect();
    let names = (0..m.dim).map(|b| format!("B{b}")).collect();
    GaussianClassModel::from_parts(legend, names, FeatureOptions::default(), 0.0, stats).unwrap()
}

proptest! {
    #![proptest_config(cfg(1000))]

    #[test]
    fn quadratic_term_matches_dense_solve(m in model_strategy()) {
        let model = build(&m);
        let total: f64 = m.classes.iter().map(|c| c.2).sum();
        for (i, (mean, cov, prior)) in m.classes.iter().enumerate() {
            let sigma = DMatrix::from_row_slice(m.dim, m.dim, cov);
            let d = DVector::from_iterator(m.dim, m.x.iter().zip(mean).map(|(x, mu)| x - mu));
            let solved = sigma.clone().lu().solve(&d).unwrap();
            let q_ref = d.dot(&solved);
            let q = model.mahalanobis_sq(&m.x, i as u8 + 1).unwrap();
            prop_assert!((q - q_ref).abs() <= 1e-8 * q_ref.abs().max(1.0), "q {} vs {}", q, q_ref);

            let g_ref = (prior / total).ln() - 0.5 * sigma.determinant().ln() - 0.5 * q_ref;
            let g = model.discriminant(&m.x, i as u8 + 1).unwrap();
            prop_assert!((g - g_ref).abs() <= 1e-8 * g_ref.abs().max(1.0), "g {} vs {}", g, g_ref);
        }
    }

    #[test]
    fn uniform_prior_scaling_keeps_argmax(m in model_strategy(), scale in 1.0e-3..1.0e3f64) {
        let model = build(&m);
        let priors: Vec<f64> = m.classes.iter().map(|c| c.2 * scale).collect();
        let scaled = model.with_priors(&priors).unwrap();
        prop_assert_eq!(model.classify_vector(&m.x).unwrap(), scaled.classify_vector(&m.x).unwrap());
    }

    #[test]
    fn raising_a_prior_never_loses_that_class(m in model_strategy(), boost in 1.0..100.0f64) {
        let model = build(&m);
        let before = model.classify_vector(&m.x).unwrap();
        let priors: Vec<f64> = m
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| if i as u8 + 1 == before { c.2 * boost } else { c.2 })
            .collect();
        prop_assert_eq!(model.with_priors(&priors).unwrap().classify_vector(&m.x).unwrap(), before);
    }
}

fn agreement(a: &[u8], b: &[u8]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

fn train_on(
    sigma: f64,
    seed: u64,
) -> (
    lulc_core::RasterGrid,
    lulc_core::ClassMap,
    lulc_core::FeatureMatrix,
    Vec<LabeledSample>,
) {
    let legend = ClassLegend::canonical();
    let spec = stripe_scene_spec(120, 60, 6, sigma, seed);
    let (scene, truth) = generate_scene(&spec).unwrap();
    let plan = SamplePlan::new(50, seed ^ 0x5eed, legend.clone()).unwrap();
    let samples = stratified_random_points(&truth, &plan).unwrap();
    let (fm, skipped) = extract_training(&scene, &samples, &legend, ExtractOptions::default()).unwrap();
    assert!(skipped.is_empty());
    let held_out = SamplePlan::new(100, seed ^ 0xc0de, legend).unwrap();
    let validation = stratified_random_points_excluding(&truth, &held_out, &samples).unwrap();
    (scene, truth, fm, validation)
}

fn labels_at(map: &lulc_core::ClassMap, points: &[LabeledSample]) -> Vec<u8> {
    points
        .iter()
        .map(|p| {
            let (c, r) = map.grid().map_to_pixel(p.x, p.y).unwrap().unwrap();
            map.class_at(r * map.grid().width() + c).unwrap()
        })
        .collect()
}

#[test]
fn ml_and_knn_agree_on_overlapping_classes() {
    // per-band separation of 4 sigma: a small share of pixels is genuinely ambiguous
    let (scene, truth, fm, _) = train_on(0.015, 11);
    let model = train_max_likelihood(&fm, Ridge::default()).unwrap();
    let ml = predict_with(&model, &scene, Workers::Auto).unwrap();
    let knn = knn_predict_with(&fm, &scene, 5, Workers::Auto).unwrap();
    let a = agreement(ml.values(), knn.values());
    assert!(a >= 0.95, "agreement {a}");
    assert!(agreement(ml.values(), truth.values()) < 1.0);
}

#[test]
fn both_classifiers_are_exact_on_held_out_points_at_six_sigma() {
    let (scene, _, fm, validation) = train_on(0.01, 7);
    let truth: Vec<u8> = validation.iter().map(|p| p.class_id).collect();
    let model = train_max_likelihood(&fm, Ridge::default()).unwrap();
    let ml = predict_with(&model, &scene, Workers::Auto).unwrap();
    let knn = knn_predict_with(&fm, &scene, 5, Workers::Auto).unwrap();
    assert_eq!(labels_at(&ml, &validation), truth);
    assert_eq!(labels_at(&knn, &validation), truth);
}

#[test]
fn two_separated_classes_classify_perfectly() {
    use lulc_core::synth::{ClassSignature, Rect, SceneSpec};
    let spec = SceneSpec {
        width: 80,
        height: 80,
        bands: 3,
        signatures: vec![
            ClassSignature {
                class_id: 1,
                mean: vec![0.10, 0.10, 0.10],
                sigma: vec![0.01; 3],
            },
            ClassSignature {
                class_id: 4,
                mean: vec![0.16, 0.16, 0.16],
                sigma: vec![0.01; 3],
            },
        ],
        background_class: 1,
        rectangles: vec![Rect {
            class_id: 4,
            col: 20,
            row: 10,
            width: 40,
            height: 50,
        }],
        seed: 99,
        pixel_size: 10.0,
        origin: [500_000.0, 2_600_000.0],
        crs_id: "EPSG:32640".into(),
        legend: None,
    };
    let (scene, truth) = generate_scene(&spec).unwrap();
    let legend = ClassLegend::new(vec![(1, "Water".into()), (4, "Built Area".into())]).unwrap();
    let samples = stratified_random_points(&truth, &SamplePlan::new(50, 3, legend).unwrap()).unwrap();
    let (fm, _) = extract_training(&scene, &samples, &ClassLegend::canonical(), ExtractOptions::default()).unwrap();
    let model = train_max_likelihood(&fm, Ridge::default()).unwrap();
    assert_eq!(
        predict_with(&model, &scene, Workers::Auto).unwrap().values(),
        truth.values()
    );
}

#[test]
fn sequential_and_parallel_predictions_are_identical() {
    let (scene, _, fm, _) = train_on(0.03, 5);
    let model = train_max_likelihood(&fm, Ridge::default()).unwrap();
    assert_eq!(
        predict_with(&model, &scene, Workers::Sequential).unwrap(),
        predict_with(&model, &scene, Workers::Auto).unwrap()
    );
    assert_eq!(
        knn_predict_with(&fm, &scene, 3, Workers::Sequential).unwrap(),
        knn_predict_with(&fm, &scene, 3, Workers::Auto).unwrap()
    );
}
