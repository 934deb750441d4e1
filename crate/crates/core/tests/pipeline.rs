use phonintent::corpus::{
    generate_synthetic, kfold_split, load_manifest, load_manifest_with_dim, load_panphone_table, write_manifest,
    write_panphone_table, FeatureTable, SyntheticSpec,
};
use phonintent::experiments::{hold_out_per_class, NamedConfig};
use phonintent::frontend::FrontEndKind;
use phonintent::trainer::{append_run_log, evaluate, read_run_log, train, Setup, TrainedModel};
use phonintent::Error;

fn spec(per_class: usize) -> SyntheticSpec {
    SyntheticSpec {
        per_class,
        ..SyntheticSpec::default()
    }
}

#[test]
fn manifest_round_trip_preserves_everything_at_f32() {
    let d = generate_synthetic(&spec(5), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(&d, dir.path()).unwrap();
    let back = load_manifest(&path).unwrap();
    assert_eq!(back.len(), d.len());
    for (a, b) in d.iter().zip(back.iter()) {
        assert_eq!((&a.id, &a.label, &a.phones), (&b.id, &b.label, &b.phones));
        let (ea, eb) = (a.emb.as_ref().unwrap(), b.emb.as_ref().unwrap());
        assert_eq!((ea.rows(), ea.cols()), (eb.rows(), eb.cols()));
        for (x, y) in ea.as_slice().iter().zip(eb.as_slice()) {
            assert_eq!(*x as f32 as f64, *y);
        }
    }
    // a second write of the loaded data is byte-identical
    let again = tempfile::tempdir().unwrap();
    let path2 = write_manifest(&back, again.path()).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn manifest_dimension_is_enforced_on_request() {
    let d = generate_synthetic(&spec(2), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(&d, dir.path()).unwrap();
    assert!(load_manifest_with_dim(&path, Some(16)).is_ok());
    assert!(matches!(
        load_manifest_with_dim(&path, Some(640)),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn feature_table_round_trip() {
    let s = spec(1);
    let t = FeatureTable::synthetic(&s.phone_inventory(), 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panphone.tsv");
    write_panphone_table(&path, &t).unwrap();
    assert_eq!(load_panphone_table(&path).unwrap(), t);
}

#[test]
fn folds_partition_the_corpus() {
    let d = generate_synthetic(&spec(7), 1).unwrap();
    let plan = kfold_split(&d, 4, 3).unwrap();
    let mut all: Vec<usize> = (0..4).flat_map(|f| plan.test_indices(f)).collect();
    all.sort_unstable();
    assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
    for f in 0..4 {
        assert_eq!(plan.test_indices(f).len() + plan.train_indices(f).len(), d.len());
    }
}

#[test]
fn train_save_load_evaluate() {
    let s = spec(24);
    let d = generate_synthetic(&s, 2).unwrap();
    let (rest, test) = hold_out_per_class(&d, 6, 0).unwrap();
    let table = FeatureTable::synthetic(&s.phone_inventory(), 1);
    let c4 = NamedConfig::by_name("C4").unwrap();
    for kind in FrontEndKind::ALL {
        let mut setup = Setup::new(kind, c4.kernels, c4.dilations);
        setup.options.table = Some(table.clone());
        setup.options.phone_dim = Some(16);
        setup.channels = 8;
        setup.hyper.epochs = 4;
        let (model, record) = train(&rest, Some(&test), &setup, 0).unwrap();
        assert_eq!(record.epochs.len(), 4);
        assert!(record.epochs.iter().all(|e| e.train_loss.is_finite()));
        assert_eq!(record.best_dev_accuracy, record.epochs.iter().filter_map(|e| e.dev_accuracy).reduce(f64::max));

        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("m.picm");
        model.save(&ckpt).unwrap();
        let loaded = TrainedModel::load(&ckpt).unwrap();
        // the checkpoint stores f32, so logits agree closely but not exactly
        let (a, b) = (model.logits(&test).unwrap(), loaded.logits(&test).unwrap());
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-3, "{kind:?}: {x} vs {y}");
            }
        }
        let acc = evaluate(&loaded, &test).unwrap();
        assert!((0.0..=1.0).contains(&acc));

        let log = dir.path().join("runs.jsonl");
        append_run_log(&log, std::slice::from_ref(&record)).unwrap();
        append_run_log(&log, std::slice::from_ref(&record)).unwrap();
        assert_eq!(read_run_log(&log).unwrap(), vec![record.clone(), record]);
    }
}

#[test]
fn same_seed_same_model() {
    let d = generate_synthetic(&spec(10), 6).unwrap();
    let mut setup = Setup::new(FrontEndKind::Allo, [3, 3, 3, 3], [1, 2, 3, 4]);
    setup.channels = 6;
    setup.hyper.epochs = 3;
    let (a, ra) = train(&d, None, &setup, 9).unwrap();
    let (b, rb) = train(&d, None, &setup, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let (c, _) = train(&d, None, &setup, 10).unwrap();
    assert_ne!(a.params, c.params);
}
