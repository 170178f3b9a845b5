use acmax::geometries::{GeometryKind, GeometrySpec};
use acmax::solver::{SolveOptions, SolvePath};
use acmax::trig::{TrigSeries, TrigTerm};
use acmax_cli::{DataSpec, OutputFormat, OutputSpec, RunConfig};
use proptest::prelude::*;

fn data_strategy() -> impl Strategy<Value = DataSpec> {
    let term = (prop::collection::vec(-3i32..=3, 4), -1.0f64..1.0, -3.0f64..3.0)
        .prop_map(|(wave, amplitude, phase)| TrigTerm { wave, amplitude, phase });
    let series = prop::collection::vec(term, 0..4).prop_map(TrigSeries::new);
    prop_oneof![
        Just(DataSpec::Zero {}),
        (-2.0f64..2.0).prop_map(|value| DataSpec::Constant { value }),
        series.clone().prop_map(|terms| DataSpec::Trig { terms }),
        series.prop_map(|phi| DataSpec::Manufactured { phi }),
        "[a-z]{1,8}\\.csv".prop_map(|p| DataSpec::File { path: p.into() }),
    ]
}

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    (
        prop::bool::ANY,
        0.0f64..0.99,
        4usize..20,
        prop::sample::select(vec![2usize, 4]),
        data_strategy(),
        prop::bool::ANY,
        1e-12f64..1e-6,
        1usize..50,
        prop::collection::btree_set(prop::sample::select(vec![OutputFormat::Json, OutputFormat::Csv, OutputFormat::Binary]), 0..3),
        0..=i64::MAX as u64,
    )
        .prop_map(|(is_flat, twist, half_n, order, data, flow, tol, iters, formats, seed)| {
            let mut geometry = GeometrySpec::twisted(2 * half_n, twist);
            if is_flat {
                geometry.kind = GeometryKind::Flat;
                geometry.twist = 0.0;
            }
            geometry.stencil_order = order;
            RunConfig {
                geometry,
                data,
                solver: SolveOptions {
                    path: if flow { SolvePath::Flow } else { SolvePath::Continuity },
                    newton_tol: tol,
                    newton_max_iter: iters,
                    ..SolveOptions::default()
                },
                outputs: OutputSpec { directory: "runs/out".into(), formats },
                seed,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn toml_round_trip(config in config_strategy()) {
        let text = config.to_toml().unwrap();
        prop_assert_eq!(RunConfig::parse(&text).unwrap(), config);
    }

    #[test]
    fn json_round_trip(config in config_strategy()) {
        let text = serde_json::to_string(&config).unwrap();
        prop_assert_eq!(RunConfig::parse(&text).unwrap(), config);
    }
}

#[test]
fn defaults_fill_optional_tables() {
    let config = RunConfig::parse("[geometry]\nkind = \"flat\"\nhalf_dim = 1\npoints_per_axis = 8\n\n[data]\nkind = \"zero\"\n").unwrap();
    assert_eq!(config.solver, SolveOptions::default());
    assert_eq!(config.outputs, OutputSpec::default());
    assert_eq!(config.seed, 0);
    assert_eq!(config.geometry.stencil_order, 4);
}

#[test]
fn unknown_keys_anywhere_are_rejected() {
    let base = "[geometry]\nkind = \"flat\"\nhalf_dim = 1\npoints_per_axis = 8\n";
    for extra in [
        "colour = 1\n[data]\nkind = \"zero\"\n",
        "[data]\nkind = \"zero\"\nvalue = 1.0\n",
        "[data]\nkind = \"zero\"\n[outputs]\ndir = \"x\"\n",
        "[data]\nkind = \"zero\"\n[solver]\nnewton = 1\n",
        "[data]\nkind = \"zero\"\n[extra]\n",
    ] {
        let err = RunConfig::parse(&format!("{base}{extra}")).unwrap_err();
        assert_eq!(err.qualified_name(), "cli::ConfigParse", "{extra}");
        assert_eq!(err.exit_code(), 1);
    }
}

#[test]
fn validation_checks_trig_dimensions() {
    let mut config = RunConfig::parse("[geometry]\nkind = \"flat\"\nhalf_dim = 1\npoints_per_axis = 8\n\n[data]\nkind = \"zero\"\n").unwrap();
    config.data = DataSpec::Trig { terms: TrigSeries::new(vec![TrigTerm::cos(vec![1, 0, 0], 0.1)]) };
    let err = config.validate().unwrap_err();
    assert_eq!(err.qualified_name(), "ma_solver::InvalidOptions");
}
