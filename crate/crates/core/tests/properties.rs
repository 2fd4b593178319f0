mod common;

use std::collections::BTreeSet;

use common::{build_random, catalog, edit_for, op_strategy, random_chain, sample_inputs, Op};
use mosaic_core::engine::{Engine, PieceStatus, RunStatus};
use mosaic_core::mosaic::{chains, validate, Edit};
use mosaic_core::store::{MosaicDocument, Workspace};
use mosaic_core::{InstanceId, Mosaic, MosaicGraph};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn ops(max: usize) -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(op_strategy(), 0..max)
}

#[test]
fn save_then_load_is_identity_for_a_thousand_mosaics() {
    let catalog = catalog();
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::open(dir.path()).unwrap();
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&ops(40), |ops| {
            let mosaic = build_random(&catalog, &ops);
            prop_assert_eq!(validate(mosaic.graph(), &catalog).unwrap(), vec![]);
            let id = ws.save_mosaic(mosaic.graph(), "random", &catalog).unwrap();
            prop_assert_eq!(&ws.load_mosaic(&id).unwrap(), mosaic.graph());

            let doc = MosaicDocument::new("x", "t", &catalog, mosaic.graph().clone());
            let text = serde_json::to_string(&doc).unwrap();
            prop_assert_eq!(MosaicDocument::from_json("x", &text).unwrap(), doc);
            Ok(())
        })
        .unwrap();
    assert_eq!(ws.list_mosaics().unwrap().len(), 1000);
}

proptest! {
    #![proptest_config(Config { cases: 300, failure_persistence: None, ..Config::default() })]

    #[test]
    fn undo_after_edit_restores_the_graph(setup in ops(30), op in op_strategy()) {
        let catalog = catalog();
        let mut mosaic = build_random(&catalog, &setup);
        let Some(edit) = edit_for(&catalog, &mosaic, &op) else { return Ok(()) };
        let before = mosaic.graph().clone();
        let journal = mosaic.journal().len();
        if mosaic.apply_edit(&catalog, edit).is_ok() {
            let after = mosaic.graph().clone();
            mosaic.undo().unwrap();
            prop_assert_eq!(mosaic.graph(), &before);
            mosaic.redo(&catalog).unwrap();
            prop_assert_eq!(mosaic.graph(), &after);
        } else {
            prop_assert_eq!(mosaic.graph(), &before);
            prop_assert_eq!(mosaic.journal().len(), journal);
        }
    }

    #[test]
    fn journal_replay_reproduces_the_graph(setup in ops(40)) {
        let catalog = catalog();
        let mosaic = build_random(&catalog, &setup);
        let replayed = Mosaic::replay(&catalog, mosaic.journal().applied_edits()).unwrap();
        prop_assert_eq!(replayed.graph(), mosaic.graph());
    }

    #[test]
    fn chains_partition_the_mosaic_in_topological_order(setup in ops(40)) {
        let catalog = catalog();
        let mosaic = build_random(&catalog, &setup);
        let graph = mosaic.graph();
        let chains = chains(graph, &catalog).unwrap();
        let mut seen = BTreeSet::new();
        for chain in &chains {
            for &id in &chain.order {
                prop_assert!(seen.insert(id), "{} in two chains", id);
            }
        }
        prop_assert_eq!(seen, graph.instance_ids().collect::<BTreeSet<_>>());
        let position = |id: InstanceId| {
            chains.iter().flat_map(|c| c.order.iter()).position(|&x| x == id).unwrap()
        };
        for c in graph.connections() {
            prop_assert!(position(c.from_instance) < position(c.to_instance));
        }
    }

    #[test]
    fn random_chains_run_with_modality_correct_outputs(choices in prop::collection::vec(any::<u16>(), 1..=6)) {
        let catalog = catalog();
        let chain = random_chain(&catalog, &choices);
        prop_assert_eq!(validate(chain.mosaic.graph(), &catalog).unwrap(), vec![]);
        let engine = Engine::in_memory(catalog.clone());
        let inputs = sample_inputs(&engine, &chain.inputs);
        let record = engine.run_chain(chain.mosaic.graph(), 0, &inputs, &()).unwrap();
        prop_assert_eq!(record.status, RunStatus::Done);
        let out = record.intermediate_output(chain.terminal).unwrap();
        prop_assert_eq!(out.modality, catalog.get(&chain.terminal_spec).unwrap().output_modality());
        for entry in &record.entries {
            let spec = catalog.get(&entry.spec_id).unwrap();
            prop_assert_eq!(entry.output.as_ref().unwrap().modality, spec.output_modality());
        }

        // Cache soundness: equal keys give hash-equal outputs.
        let again = engine.run_chain(chain.mosaic.graph(), 0, &inputs, &()).unwrap();
        prop_assert_eq!(again.cache_hits(), again.entries.len());
        for (a, b) in record.entries.iter().zip(&again.entries) {
            prop_assert_eq!(b.status, PieceStatus::Done);
            prop_assert_eq!(
                a.output.as_ref().unwrap().content_hash(),
                b.output.as_ref().unwrap().content_hash()
            );
        }
    }
}

/// One instance of every edit kind, each undone and checked.
#[test]
fn every_edit_kind_undoes_exactly() {
    let catalog = catalog();
    let mut mosaic = Mosaic::new();
    let photo = mosaic.apply_edit(&catalog, Edit::add("upload_image", 0.0, 0.0)).unwrap().created().unwrap();
    let depth = mosaic.apply_edit(&catalog, Edit::add("get_depth_map", 6.0, 0.0)).unwrap().created().unwrap();
    let render = mosaic
        .apply_edit(&catalog, Edit::add("generate_image_from_text_and_depth_map", 12.0, 0.0))
        .unwrap()
        .created()
        .unwrap();
    mosaic.apply_edit(&catalog, Edit::Connect { from: photo, to: depth, channel: 0 }).unwrap();
    mosaic.apply_edit(&catalog, Edit::Connect { from: depth, to: render, channel: 0 }).unwrap();

    let edits = [
        Edit::add("type_text", 6.0, 2.0),
        Edit::RemovePiece { instance: depth },
        Edit::MovePieces { instances: vec![photo, render], dx: 1.5, dy: -2.0 },
        Edit::DuplicatePiece { instance: render },
        Edit::Disconnect { to: render, channel: 0 },
        Edit::SetParameter { instance: render, name: "seed".into(), value: mosaic_core::ParamValue::Integer(42) },
        Edit::Connect { from: photo, to: render, channel: 1 },
    ];
    let mut kinds = BTreeSet::new();
    for edit in edits {
        let before: MosaicGraph = mosaic.graph().clone();
        let kind = serde_json::to_value(&edit).unwrap()["op"].as_str().unwrap().to_string();
        match mosaic.apply_edit(&catalog, edit) {
            Ok(_) => {
                assert_ne!(mosaic.graph(), &before, "{kind} changed nothing");
                mosaic.undo().unwrap();
                assert_eq!(mosaic.graph(), &before, "{kind}");
                kinds.insert(kind);
            }
            // Image output into the text channel is refused outright.
            Err(e) => assert_eq!(e.code(), "IncompatibleConnection", "{kind}"),
        }
    }
    let text = mosaic.apply_edit(&catalog, Edit::add("type_text", 6.0, 2.0)).unwrap().created().unwrap();
    let before = mosaic.graph().clone();
    mosaic.apply_edit(&catalog, Edit::Connect { from: text, to: render, channel: 1 }).unwrap();
    mosaic.undo().unwrap();
    assert_eq!(mosaic.graph(), &before);
    kinds.insert("connect".into());
    assert_eq!(kinds.len(), 7, "{kinds:?}");
}
