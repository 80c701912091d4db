use approx::assert_abs_diff_eq;
use kernelsmith::dataset::stratified_split;
use kernelsmith::rng::derive_seed;
use kernelsmith::{
    build, cross_compare, cross_performance, evaluate, fixtures, generate, load_csv, rng, save_csv, AttributeSpec, BuildParams, Cell, Classifier,
    Dataset, EvalParams, ForestConfig, GeneratorSpec, RandomForest, SamplingConfig, Schema,
};
use rand::seq::SliceRandom;
use rand::Rng;

fn uniform(n: usize, dims: usize, seed: u64) -> Dataset {
    let mut attrs: Vec<AttributeSpec> = (0..dims).map(|j| AttributeSpec::numeric(format!("a{j}"))).collect();
    attrs.push(AttributeSpec::class("c", ["x", "y"]));
    let mut r = rng::stream(seed, 0);
    let rows = (0..n)
        .map(|_| {
            let mut row: Vec<Cell> = (0..dims).map(|_| Cell::Numeric(r.random())).collect();
            row.push(Cell::Category(r.random_range(0..2)));
            row
        })
        .collect();
    Dataset::new(Schema::new(attrs).unwrap(), rows).unwrap()
}

fn small_forest(seed: u64) -> ForestConfig {
    ForestConfig { tree_count: 25, seed, ..Default::default() }
}

#[test]
fn cross_performance_is_deterministic_and_averages_repeats() {
    let d = fixtures::iris();
    let cfg = small_forest(0);
    let a = cross_performance(&d, &d, 3, &cfg, 9).unwrap();
    assert_eq!(a, cross_performance(&d, &d, 3, &cfg, 9).unwrap());
    assert_eq!(a.per_repeat.len(), 3);
    let mean = a.per_repeat.iter().map(|p| p.m2d1).sum::<f64>() / 3.0;
    assert_abs_diff_eq!(a.m2d1, mean, epsilon = 1e-12);
    assert_abs_diff_eq!(a.delta_d1, a.m1d1 - a.m2d1, epsilon = 1e-12);
}

#[test]
fn m1d1_is_two_fold_cross_validation() {
    let d = fixtures::wine();
    let cfg = small_forest(0);
    let seed = 4;
    let got = cross_performance(&d, &d, 1, &cfg, seed).unwrap();

    let rs = derive_seed(seed, 0);
    let (a, b) = stratified_split(&d, 0.5, derive_seed(rs, 1)).unwrap();
    let ma = RandomForest::train(&a, &ForestConfig { seed: derive_seed(rs, 10), ..cfg }).unwrap();
    let mb = RandomForest::train(&b, &ForestConfig { seed: derive_seed(rs, 11), ..cfg }).unwrap();
    let cv = (ma.accuracy(&b).unwrap() + mb.accuracy(&a).unwrap()) / 2.0;
    assert_abs_diff_eq!(got.m1d1, cv, epsilon = 1e-12);
}

#[test]
fn identical_datasets_give_symmetric_performance() {
    let d = fixtures::iris();
    let r = cross_performance(&d, &d, 5, &small_forest(0), 1).unwrap();
    assert!(r.delta_d1.abs() <= 0.03, "{r:?}");
    assert!((r.m1d1 - r.m2d2).abs() <= 0.03, "{r:?}");
    assert!((r.m1d2 - r.m2d1).abs() <= 0.03, "{r:?}");
}

#[test]
fn predictions_follow_rows_not_positions() {
    let d = fixtures::wine();
    let forest = RandomForest::train(&d, &small_forest(2)).unwrap();
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut rng::stream(3, 0));
    let shuffled = d.select(&order);
    let direct = forest.predict(&d).unwrap();
    let permuted = forest.predict(&shuffled).unwrap();
    for (pos, &i) in order.iter().enumerate() {
        assert_eq!(permuted[pos], direct[i]);
    }
}

#[test]
fn shuffled_labels_do_not_transfer() {
    let d = fixtures::iris();
    let mut classes = d.classes();
    classes.shuffle(&mut rng::stream(8, 0));
    let noisy = d.with_classes(&classes).unwrap();
    let majority = *d.class_counts().iter().max().unwrap() as f64 / d.len() as f64;
    let r = cross_performance(&d, &noisy, 5, &small_forest(0), 8).unwrap();
    assert!((r.m2d1 - majority).abs() <= 0.1, "m2d1 {} vs majority {majority}", r.m2d1);
    assert!(r.m1d1 > 0.9);
}

#[test]
fn unrelated_high_dimensional_data_has_near_zero_ari() {
    for s in 0..3 {
        let a = cross_compare(&uniform(200, 10, 2 * s), &uniform(200, 10, 2 * s + 1), s).unwrap();
        assert!(a.abs() < 0.15, "seed {s}: ARI {a}");
    }
}

#[test]
fn generated_iris_keeps_attribute_means() {
    let d = fixtures::iris();
    let spec = build(&d, &BuildParams::default()).unwrap();
    let g = generate(&spec, &SamplingConfig::new(d.len(), 11)).unwrap();
    for j in 0..4 {
        let mean = |x: &Dataset| x.rows().iter().map(|r| r[j].as_numeric().unwrap()).sum::<f64>() / x.len() as f64;
        let (lo, hi) = d
            .rows()
            .iter()
            .map(|r| r[j].as_numeric().unwrap())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        assert!(((mean(&d) - mean(&g)) / (hi - lo)).abs() <= 0.05, "attribute {j}");
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = fixtures::mixed(1);
    let csv = dir.path().join("mixed.csv");
    save_csv(&csv, &d).unwrap();
    assert_eq!(load_csv(&csv, d.schema()).unwrap(), d);

    let spec = build(&d, &BuildParams::default()).unwrap();
    let path = dir.path().join("gen.json");
    spec.save(&path).unwrap();
    let back = GeneratorSpec::load(&path).unwrap();
    assert_eq!(back, spec);
    let cfg = SamplingConfig::new(120, 5);
    assert_eq!(generate(&back, &cfg).unwrap(), generate(&spec, &cfg).unwrap());
}

#[test]
fn report_round_trips_through_json() {
    let d = fixtures::iris();
    let spec = build(&d, &BuildParams::default()).unwrap();
    let cfg = SamplingConfig::new(d.len(), 2);
    let g = generate(&spec, &cfg).unwrap();
    let params = EvalParams { repeats_ari: 2, repeats_cv: 1, seed: 3, forest: small_forest(0) };
    let report = evaluate("iris", &d, &g, &params, Some((&spec, &cfg))).unwrap();
    assert_eq!(report.ari_runs.len(), 2);
    assert_eq!(report.generator.as_ref().unwrap().kernel_count, spec.kernel_count());
    let text = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<kernelsmith::QualityReport>(&text).unwrap(), report);
    let table = report.table();
    assert_eq!(table.lines().count(), 2);
    assert!(table.starts_with("dataset"));
}
