use anderson_corr::expansion::BoundMode;
use anderson_corr_cli::{CommandKind, Format, Grid, Point, RunConfig};
use anderson_corr::Complex64;
use proptest::prelude::*;

fn command() -> impl Strategy<Value = CommandKind> {
    prop_oneof![
        Just(CommandKind::Dos),
        Just(CommandKind::Green),
        Just(CommandKind::Corr2),
        Just(CommandKind::Validate),
        Just(CommandKind::Identities),
    ]
}

fn grid() -> impl Strategy<Value = Option<Grid>> {
    proptest::option::of((-5.0f64..5.0, 0.0f64..5.0, 2usize..200).prop_map(|(a, w, n)| Grid { start: a, stop: a + w, count: n }))
}

proptest! {
    #[test]
    fn json_round_trip(
        command in command(),
        d in 1usize..4,
        lambda in -1.0f64..1.0,
        grid in grid(),
        grid2 in grid(),
        z in proptest::collection::vec((-3.0f64..3.0, 0.01f64..2.0), 0..3),
        order in 0usize..16,
        gap in proptest::option::of(0.1f64..3.0),
        samples in 2usize..10_000,
        seed in any::<u64>(),
        certified in any::<bool>(),
        deterministic in any::<bool>(),
        csv in any::<bool>(),
    ) {
        let cfg = RunConfig {
            command,
            d,
            lambda,
            grid,
            grid2,
            z: z.into_iter().map(|(re, im)| Point(Complex64::new(re, -im))).collect(),
            order,
            gap,
            samples,
            seed,
            mode: if certified { BoundMode::Certified } else { BoundMode::Exploratory },
            deterministic,
            format: if csv { Format::Csv } else { Format::Json },
            observables: vec!["velocity:nu=0".into(), "identity".into()],
            sigma: Some("+-".into()),
            ..RunConfig::default()
        };
        prop_assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}

#[test]
fn grid_includes_both_endpoints() {
    let g: Grid = "-3:3:121".parse().unwrap();
    let p = g.points();
    assert_eq!(p.len(), 121);
    assert_eq!(p[0], -3.0);
    assert_eq!(p[120], 3.0);
    assert!((p[60]).abs() < 1e-15);
    assert!("1:2".parse::<Grid>().is_err());
    assert!("0:1:0".parse::<Grid>().is_err());
}

#[test]
fn partial_config_file_takes_defaults() {
    let cfg = RunConfig::from_json(r#"{"command": "dos", "lambda": 0.1, "grid": "-1:1:5"}"#).unwrap();
    assert_eq!(cfg.order, RunConfig::default().order);
    assert_eq!(cfg.grid.unwrap().count, 5);
    assert!(cfg.resolve().is_ok());
}
