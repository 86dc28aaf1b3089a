use hmdim_core::dataset::stratified_split;
use hmdim_core::ensemble::{stack_predict, stack_train, BaseSpec, StackConfig};
use hmdim_core::models::{
    train_model, ForestConfig, GbtConfig, LogisticConfig, ModelSpec, SvmConfig,
};
use hmdim_core::rng::seeded;
use hmdim_core::DatasetTable;
use rand::Rng;

/// Labels follow an XOR pattern in (a, b) plus the sign of c, which trees
/// learn and linear models cannot. Two noise columns ride along.
fn checkerboard(n: usize, seed: u64) -> DatasetTable {
    let mut rng = seeded(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let r: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xor = (r[0] > 0.0) != (r[1] > 0.0);
        labels.push(u8::from(xor) + 2 * u8::from(r[2] > 0.0));
        rows.push(r);
    }
    let names = ["a", "b", "c", "noise1", "noise2"].map(String::from).to_vec();
    DatasetTable::new(names, rows, labels, None).unwrap()
}

fn accuracy(pred: &[u8], truth: &[u8]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

#[test]
fn stack_keeps_up_with_its_best_base() {
    let t = checkerboard(800, 8);
    let split = stratified_split(&t, 0.25, 1).unwrap();
    let train = t.subset(&split.train_indices);
    let test = t.subset(&split.test_indices);
    let bases = vec![
        BaseSpec::Logistic(LogisticConfig::default()),
        BaseSpec::Forest(ForestConfig { n_trees: 50, ..Default::default() }),
        BaseSpec::Svm(SvmConfig { max_iters: 30, ..Default::default() }),
        BaseSpec::Gbt(GbtConfig { n_rounds: 60, ..Default::default() }),
    ];
    let mut best = 0.0f64;
    for b in &bases {
        let spec = match b.clone() {
            BaseSpec::Logistic(c) => ModelSpec::Logistic(c),
            BaseSpec::Forest(c) => ModelSpec::Forest(c),
            BaseSpec::Svm(c) => ModelSpec::Svm(c),
            BaseSpec::Gbt(c) => ModelSpec::Gbt(c),
        };
        let m = train_model(&spec, &train, 3).unwrap();
        let pred: Vec<u8> = test.rows().map(|x| m.predict(x).unwrap()).collect();
        best = best.max(accuracy(&pred, test.labels()));
    }
    let cfg = StackConfig { bases, meta: GbtConfig { n_rounds: 50, ..Default::default() }, oof_folds: 5 };
    let (stack, trace) = stack_train(&train, &cfg, 3).unwrap();
    let pred: Vec<u8> = test.rows().map(|x| stack_predict(&stack, x).unwrap().0).collect();
    let acc = accuracy(&pred, test.labels());
    assert!(best >= 0.9, "best base {best}");
    assert!(acc >= best - 0.02, "stack {acc} vs best base {best}");

    // Audit: every meta-feature row came from models that never saw it.
    for (fold, train_rows) in trace.fold_train_indices.iter().enumerate() {
        for row in trace.folds.held_out(fold) {
            assert!(!train_rows.contains(row));
        }
    }
}

#[test]
fn stack_is_deterministic() {
    let t = checkerboard(120, 2);
    let cfg = StackConfig {
        bases: vec![
            BaseSpec::Gbt(GbtConfig { n_rounds: 10, ..Default::default() }),
            BaseSpec::Forest(ForestConfig { n_trees: 10, ..Default::default() }),
        ],
        meta: GbtConfig { n_rounds: 10, ..Default::default() },
        oof_folds: 3,
    };
    let a = stack_train(&t, &cfg, 17).unwrap().0;
    let b = stack_train(&t, &cfg, 17).unwrap().0;
    assert_eq!(a, b);
    for x in t.rows() {
        let (label, p) = stack_predict(&a, x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(label, hmdim_core::models::argmax(&p));
    }
}
