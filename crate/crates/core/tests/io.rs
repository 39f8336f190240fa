use std::path::Path;

use proptest::prelude::*;
use skm_core::epidemic::ContactGraph;
use skm_core::io::{
    apply_mask, generate_benchmark, load_cell_values, load_contacts, load_ids, load_ledger,
    load_observations, load_states, write_cell_values, write_contacts, write_ids, write_ledger,
    write_observations, write_states, BenchmarkSpec, CellValue, ExternalId, IdMap, MaskSpec,
    MaskTask,
};
use skm_core::model::Observations;
use skm_core::SkmError;

fn string_ids(n: usize) -> IdMap {
    let mut ids = IdMap::default();
    for i in 0..n {
        ids.insert(ExternalId::Str(format!("p{}", 100 - i)));
    }
    ids
}

fn expect_parse_error(result: Result<impl std::fmt::Debug, SkmError>, want_line: usize) {
    match result {
        Err(SkmError::Parse { line, .. }) => assert_eq!(line, want_line),
        other => panic!("expected a parse error at line {want_line}, got {other:?}"),
    }
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn observations_round_trip(
        rows in prop::collection::vec(prop::collection::vec(prop::option::of(0usize..3), 4), 1..8)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let obs = Observations::from_rows(rows).unwrap();
        let ids = string_ids(4);
        let p = dir.path().join("obs.jsonl");
        write_observations(&p, &obs, &ids, 3).unwrap();
        prop_assert_eq!(load_observations(&p, &ids, None).unwrap(), obs);
    }

    #[test]
    fn contacts_round_trip(
        edges in prop::collection::vec((0usize..6, 0usize..5, 0usize..5), 0..30)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut graph = ContactGraph::new(5, 6);
        for (t, u, v) in edges {
            if u != v {
                graph.add_edge(t, u, v).unwrap();
            }
        }
        let ids = string_ids(5);
        let p = dir.path().join("contacts.jsonl");
        write_contacts(&p, &graph, &ids, 2).unwrap();
        let back = load_contacts(&p, Some(&ids), None).unwrap();
        prop_assert_eq!(back.graph, graph);
        prop_assert_eq!(back.duplicates, 0);
    }

    #[test]
    fn states_and_ids_round_trip(
        states in prop::collection::vec(prop::collection::vec(0usize..4, 3), 1..6)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let ids = string_ids(3);
        let ids_path = dir.path().join("ids.jsonl");
        write_ids(&ids_path, &ids).unwrap();
        let ids_back = load_ids(&ids_path).unwrap();
        prop_assert_eq!(&ids_back, &ids);
        let p = dir.path().join("states.jsonl");
        write_states(&p, &states, &ids, 4).unwrap();
        prop_assert_eq!(load_states(&p, &ids_back).unwrap(), states);
    }

    #[test]
    fn ledger_and_scores_round_trip(
        cells in prop::collection::vec((0usize..10, 0usize..3, -5.0f64..5.0), 0..20)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let ids = IdMap::dense(3);
        let ledger: Vec<(usize, usize)> = cells.iter().map(|&(t, m, _)| (t, m)).collect();
        let p = dir.path().join("ledger.jsonl");
        write_ledger(&p, &ledger, &ids).unwrap();
        prop_assert_eq!(load_ledger(&p, &ids).unwrap(), ledger);

        let values: Vec<CellValue> = cells.iter().map(|&(t, m, value)| CellValue { t, m, value }).collect();
        let q = dir.path().join("scores.jsonl");
        write_cell_values(&q, "score", &values, &ids).unwrap();
        prop_assert_eq!(load_cell_values(&q, &ids).unwrap(), values);
    }

    #[test]
    fn smoothing_mask_hides_exactly_the_ledger(seed in 0u64..500) {
        let rows = vec![vec![Some(0); 6]; 12];
        let obs = Observations::from_rows(rows).unwrap();
        let spec = MaskSpec { task: MaskTask::smooth(), seed };
        let masked = apply_mask(&obs, &spec).unwrap();
        let hidden: Vec<(usize, usize)> = (0..12)
            .flat_map(|t| (0..6).map(move |m| (t, m)))
            .filter(|&(t, m)| masked.observations.get(t, m).is_none())
            .collect();
        let mut ledger = masked.ledger.clone();
        ledger.sort_unstable();
        prop_assert_eq!(&hidden, &ledger);
        // A fifth of 72 cells, rounded.
        prop_assert_eq!(ledger.len(), 14);
        prop_assert_eq!(apply_mask(&obs, &spec).unwrap(), masked);
    }
}

#[test]
fn first_appearance_assigns_dense_ids() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.jsonl");
    write(
        &p,
        "{\"t\":1,\"u\":\"bob\",\"v\":7}\n\n{\"t\":3,\"u\":7,\"v\":\"amy\"}\n{\"t\":3,\"u\":\"amy\",\"v\":7}\n",
    );
    let c = load_contacts(&p, None, None).unwrap();
    assert_eq!(c.ids.len(), 3);
    assert_eq!(c.ids.get(&ExternalId::Str("bob".into())), Some(0));
    assert_eq!(c.ids.get(&ExternalId::Int(7)), Some(1));
    assert_eq!(c.graph.horizon(), 3);
    assert_eq!(c.graph.edges_at(0).count(), 1);
    assert_eq!(c.graph.edges_at(2).count(), 1);
    assert_eq!(c.duplicates, 1);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let ids = IdMap::dense(2);
    let p = dir.path().join("o.jsonl");

    write(
        &p,
        "{\"M\":2,\"T\":3,\"S\":2}\n{\"t\":1,\"m\":0,\"y\":1}\nnot json\n",
    );
    expect_parse_error(load_observations(&p, &ids, None), 3);

    write(&p, "{\"M\":2,\"T\":3,\"S\":2}\n{\"t\":0,\"m\":0,\"y\":1}\n");
    expect_parse_error(load_observations(&p, &ids, None), 2);

    write(&p, "{\"M\":2,\"T\":3,\"S\":2}\n{\"t\":4,\"m\":0,\"y\":1}\n");
    expect_parse_error(load_observations(&p, &ids, None), 2);

    write(
        &p,
        "{\"M\":2,\"T\":3,\"S\":2}\n\n{\"t\":1,\"m\":5,\"y\":1}\n",
    );
    expect_parse_error(load_observations(&p, &ids, None), 3);

    write(&p, "{\"M\":2,\"T\":3,\"S\":2}\n{\"t\":1,\"m\":0,\"y\":2}\n");
    expect_parse_error(load_observations(&p, &ids, None), 2);

    write(
        &p,
        "{\"M\":2,\"T\":3,\"S\":2}\n{\"t\":1,\"m\":0,\"y\":1}\n{\"t\":1,\"m\":0,\"y\":0}\n",
    );
    expect_parse_error(load_observations(&p, &ids, None), 3);

    write(
        &p,
        "{\"M\":2,\"T\":3,\"S\":2}\n{\"t\":1,\"m\":0,\"y\":1,\"extra\":true}\n",
    );
    expect_parse_error(load_observations(&p, &ids, None), 2);

    write(&p, "{\"t\":1,\"m\":0,\"y\":1}\n{\"M\":2,\"T\":3,\"S\":2}\n");
    expect_parse_error(load_observations(&p, &ids, None), 2);

    write(&p, "{\"t\":2,\"u\":0,\"v\":0}\n");
    expect_parse_error(load_contacts(&p, Some(&ids), None), 1);

    write(&p, "{\"m\":0,\"id\":\"a\"}\n{\"m\":1,\"id\":\"a\"}\n");
    expect_parse_error(load_ids(&p), 2);

    let err = load_observations(&dir.path().join("absent.jsonl"), &ids, None).unwrap_err();
    assert!(matches!(err, SkmError::Io { .. }));
}

#[test]
fn parse_error_message_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.jsonl");
    write(&p, "{\"M\":1,\"T\":2,\"S\":2}\n{\"t\":1}\n");
    let msg = load_observations(&p, &IdMap::dense(1), None)
        .unwrap_err()
        .to_string();
    assert!(msg.contains("bad.jsonl:2:"), "{msg}");
}

#[test]
fn masks_follow_their_task() {
    let obs = Observations::from_rows(vec![vec![Some(1); 10]; 5]).unwrap();

    let predict_all = MaskSpec {
        task: MaskTask::Predict { query_time: None },
        seed: 0,
    };
    let m = apply_mask(&obs, &predict_all).unwrap();
    assert_eq!(m.observations, obs);
    assert_eq!(m.ledger.len(), 40);

    let predict_one = MaskSpec {
        task: MaskTask::Predict {
            query_time: Some(3),
        },
        seed: 0,
    };
    let m = apply_mask(&obs, &predict_one).unwrap();
    assert_eq!(m.ledger, (0..10).map(|i| (3, i)).collect::<Vec<_>>());
    assert!((0..10).all(|i| m.observations.get(3, i).is_none()));
    assert_eq!(m.observations.observed_count(), 40);

    let expand = MaskSpec {
        task: MaskTask::expand(),
        seed: 2,
    };
    let m = apply_mask(&obs, &expand).unwrap();
    let visible: Vec<usize> = (0..10)
        .filter(|&i| m.observations.get(0, i).is_some())
        .collect();
    assert_eq!(visible.len(), 1);
    assert_eq!(m.ledger.len(), 45);
    assert!(m.ledger.iter().all(|&(_, i)| i != visible[0]));

    let bad = MaskSpec {
        task: MaskTask::Predict {
            query_time: Some(5),
        },
        seed: 0,
    };
    assert!(apply_mask(&obs, &bad).is_err());
    let bad = MaskSpec {
        task: MaskTask::Smooth {
            fraction: 0.2,
            min_len: 3,
            max_len: 2,
        },
        seed: 0,
    };
    assert!(apply_mask(&obs, &bad).is_err());
}

#[test]
fn mask_specs_parse_from_json() {
    let spec: MaskSpec =
        serde_json::from_str(r#"{"task":"expand","observed_fraction":0.3,"seed":4}"#).unwrap();
    assert_eq!(
        spec.task,
        MaskTask::Expand {
            observed_fraction: 0.3
        }
    );
    assert_eq!(spec.seed, 4);
}

#[test]
fn benchmark_generation_is_reproducible() {
    let spec = BenchmarkSpec {
        num_individuals: 30,
        horizon: 40,
        seed: 8,
        ..Default::default()
    };
    let (g1, b1) = generate_benchmark(&spec).unwrap();
    let (g2, b2) = generate_benchmark(&spec).unwrap();
    assert_eq!(g1, g2);
    assert_eq!(b1.states, b2.states);
    assert_eq!(b1.observations, b2.observations);
    assert_eq!(b1.states.len(), 40);
    // Roughly `contact_density` contacts per individual per step.
    let per_step = g1.total_edges() as f64 / 40.0;
    assert!((per_step - 30.0).abs() < 10.0, "{per_step} edges per step");
}
