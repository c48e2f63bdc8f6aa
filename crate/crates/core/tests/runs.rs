use flowlab::runner::{run, Emit, ExperimentConfig, Operation, Tolerances};
use proptest::prelude::*;

fn config(model: &str, op: &str, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        model: model.into(),
        seed,
        out: None,
        emit: Emit::Csv,
        tolerances: Tolerances::default(),
        operation: Operation::defaults(op, None).unwrap(),
    }
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let configs = flowlab::runner::suite::load_config_tree(&dir).unwrap();
    assert!(configs.len() >= 8);
    for (stem, c) in configs {
        let text = c.to_toml();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, c, "{stem}");
        assert_eq!(back.to_toml(), text, "{stem}");
    }
}

#[test]
fn reruns_reproduce_every_file_hash() {
    for (model, op) in [
        ("M2", "lyapunov"),
        ("MRANK1", "spectrum"),
        ("CAT", "coding"),
        ("M0", "validate"),
    ] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let c = config(model, op, 19);
        let ra = run(&c, a.path()).unwrap();
        let rb = run(&c, b.path()).unwrap();
        assert!(ra.passed(), "{model} {op}: {ra:?}");
        assert_eq!(ra.outputs, rb.outputs, "{model} {op}");
        assert_eq!(ra.config_hash, rb.config_hash);
        assert_eq!(
            std::fs::read(a.path().join("record.json")).unwrap(),
            std::fs::read(b.path().join("record.json")).unwrap()
        );
    }
}

#[test]
fn the_seed_drives_sampling() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&config("M2", "riccati", 1), a.path()).unwrap();
    run(&config("M2", "riccati", 2), b.path()).unwrap();
    assert_ne!(
        std::fs::read(a.path().join("riccati.csv")).unwrap(),
        std::fs::read(b.path().join("riccati.csv")).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn configs_round_trip_byte_identically(
        seed in any::<u64>(),
        lo in -8.0f64..0.0,
        width in 0.5f64..8.0,
        points in 3usize..200,
        w in prop::collection::vec(-5.0f64..0.0, 2),
        json in any::<bool>(),
    ) {
        let mut c = config("M2", "pressure", seed);
        c.emit = if json { Emit::Json } else { Emit::Csv };
        c.operation = Operation::Pressure {
            estimator: flowlab::thermo::Estimator::Oracle {
                potential: flowlab::thermo::Potential::Proxy { weights: w },
            },
            grid: flowlab::runner::Grid { lo, hi: lo + width, points },
        };
        let text = c.to_toml();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn series_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = flowlab::runner::fmt(x);
        prop_assert_eq!(s.parse::<f64>().unwrap(), x);
    }
}
