use modopt_core::data::{generate_synthetic_dataset, load_market_dir, write_market_dir, DataFiles, SynthConfig};
use modopt_core::eval::{compare_models, pricer_inputs, rmse, traditional_predictions};
use modopt_core::features::{chronological_split, engineer_dataset, FeatureRow, FNN_COLUMNS};
use modopt_core::nn::{Activation, LayerSpec, TrainConfig};
use modopt_core::pricing::{baw_call_price, crr_binomial_call, ExerciseStyle, BOP_STEPS};
use modopt_core::tuning::{run_search, SearchConfig, SearchSpace, Strategy};
use modopt_core::zoo::{
    paper_best_mnn, train_model, Arch, BranchSpec, FnnSpec, MnnSpec, ModelSpec, ScaledSplit, TrainedModel,
};

fn small_config(noise_free: bool) -> SynthConfig {
    let mut cfg = SynthConfig {
        trading_days: 30,
        dte_set: vec![30, 90],
        ..SynthConfig::default()
    };
    if noise_free {
        cfg.premium_vix = 0.0;
        cfg.premium_pcr = 0.0;
        cfg.noise_scale = 0.0;
    }
    cfg
}

fn rows(cfg: &SynthConfig, seed: u64) -> Vec<FeatureRow> {
    let ds = generate_synthetic_dataset(cfg, seed).unwrap();
    let set = engineer_dataset(&ds.quotes, &ds.market).unwrap();
    assert_eq!(set.skipped, 0);
    set.rows
}

fn small_mnn() -> ModelSpec {
    let mut spec = paper_best_mnn();
    for b in &mut spec.branches {
        b.layers = vec![LayerSpec::new(32, Activation::Tanh)];
    }
    spec.fusion = vec![LayerSpec::new(32, Activation::Tanh)];
    ModelSpec::Mnn(spec)
}

fn small_fnn() -> ModelSpec {
    ModelSpec::Fnn(FnnSpec {
        input_columns: FNN_COLUMNS.to_vec(),
        layers: vec![LayerSpec::new(32, Activation::Tanh)],
    })
}

fn quick_train(seed: u64) -> TrainConfig {
    TrainConfig {
        max_epochs: 5,
        batch_size: 64,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn noise_free_labels_are_reproduced_by_the_lattice() {
    let rows = rows(&small_config(true), 3);
    let actual: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let (baw, bop) = traditional_predictions(&rows).unwrap();
    assert_eq!(rmse(&bop, &actual).unwrap(), 0.0);
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    assert!(rmse(&baw, &actual).unwrap() <= 0.05 * mean);
    for (i, r) in rows.iter().enumerate() {
        let inp = pricer_inputs(r);
        assert_eq!(baw[i].to_bits(), baw_call_price(&inp).unwrap().to_bits());
        let lattice = crr_binomial_call(&inp, BOP_STEPS, ExerciseStyle::American).unwrap();
        assert_eq!(bop[i].to_bits(), lattice.to_bits());
    }
}

#[test]
fn csv_round_trip_then_train_save_load_and_evaluate() {
    let cfg = small_config(false);
    let ds = generate_synthetic_dataset(&cfg, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = DataFiles::in_dir(dir.path());
    write_market_dir(&files, &ds.quotes, &ds.market).unwrap();
    let (chain, market) = load_market_dir(&files).unwrap();
    assert_eq!(chain.dropped, 0);
    let direct = engineer_dataset(&ds.quotes, &ds.market).unwrap().rows;
    let loaded = engineer_dataset(&chain.quotes, &market).unwrap().rows;
    assert_eq!(direct, loaded);

    let split = chronological_split(loaded, 0.8, 0.2).unwrap();
    let mut models = Vec::new();
    for spec in [small_mnn(), small_fnn()] {
        let data = ScaledSplit::new(&split, &spec.input_columns()).unwrap();
        let (model, history) = train_model(&spec, &data, &quick_train(7)).unwrap();
        assert!(history.best_val_mse().is_finite());
        let path = dir.path().join(format!("{}.json", spec.arch().name()));
        model.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(back, model);
        let a = model.predict_prices(&split.test).unwrap();
        let b = back.predict_prices(&split.test).unwrap();
        assert_eq!(a, b);
        models.push(model);
    }
    let report = compare_models("synthetic", &split.test, &models[0], &models[1]).unwrap();
    assert_eq!(report.n, split.test.len());
    for (_, s) in report.models.entries() {
        assert!(s.rmse.is_finite() && s.rmse >= 0.0);
        assert!((s.nrmse - s.rmse / report.mean_actual).abs() <= 1e-12);
    }
}

#[test]
fn training_is_reproducible() {
    let split = chronological_split(rows(&small_config(false), 5), 0.8, 0.2).unwrap();
    let spec = small_mnn();
    let data = ScaledSplit::new(&split, &spec.input_columns()).unwrap();
    let (a, _) = train_model(&spec, &data, &quick_train(9)).unwrap();
    let (b, _) = train_model(&spec, &data, &quick_train(9)).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn tuning_on_engineered_features_stays_in_space() {
    let split = chronological_split(rows(&small_config(false), 8), 0.8, 0.2).unwrap();
    let space = SearchSpace::default();
    let data = ScaledSplit::new(&split, &ModelSpec::paper_best(Arch::Mnn).input_columns()).unwrap();
    let cfg = SearchConfig {
        arch: Arch::Mnn,
        budget: 3,
        strategy: Strategy::Random,
        seed: 4,
        train: quick_train(0),
        workers: None,
    };
    let ranked = run_search(&space, &cfg, &data.train, &data.val).unwrap();
    assert_eq!(ranked.len(), 3);
    assert!(ranked.iter().all(|t| space.contains(&t.spec) && t.val_mse.is_finite()));
    assert!(ranked.windows(2).all(|w| w[0].val_mse <= w[1].val_mse));
}

#[test]
fn branch_spec_names_its_columns() {
    let spec = MnnSpec {
        branches: paper_best_mnn().branches,
        fusion: vec![LayerSpec::new(64, Activation::Relu)],
    };
    let cols: usize = spec.branches.iter().map(|b: &BranchSpec| b.input_columns().len()).sum();
    assert_eq!(cols, 46);
}
