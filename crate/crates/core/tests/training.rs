use dane::eval::{eval_link_prediction, eval_node_classification, LinkEvalSplit};
use dane::graph::{generate_synthetic, DynamicGraph, SyntheticParams};
use dane::training::{batch_loss, draw_samples, fine_tune, train, train_logged, EdgeScope, Model, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_graph(seed: u64) -> DynamicGraph {
    let params = SyntheticParams {
        num_nodes: 40,
        num_communities: 2,
        num_snapshots: 6,
        attr_dim: 4,
        ..SyntheticParams::default()
    };
    generate_synthetic(&params, seed).unwrap()
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        dim: 8,
        layers: 2,
        lookback: 2,
        epochs: 3,
        batch_size: 32,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let g = small_graph(1);
    let a = train(&g, &small_config(5)).unwrap();
    let b = train(&g, &small_config(5)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let c = train(&g, &small_config(6)).unwrap();
    assert_ne!(a.to_json(), c.to_json());
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let g = small_graph(2);
    let model = train(&g, &small_config(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let back = Model::load(&path).unwrap();
    assert_eq!(back, model);
    let t = g.num_timestamps() - 1;
    assert_eq!(back.predict(&g, t).unwrap(), model.predict(&g, t).unwrap());
    assert_eq!(back.to_json(), model.to_json());
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let g = small_graph(2);
    let model = train(&g, &TrainConfig { epochs: 1, ..small_config(3) }).unwrap();
    let text = model.to_json().replace("\"layers\": 2", "\"layers\": 3");
    assert!(Model::from_json(&text).is_err());
    assert!(Model::from_json("{}").is_err());
}

#[test]
fn training_loss_decreases() {
    let g = small_graph(4);
    let mut losses = Vec::new();
    let cfg = TrainConfig { epochs: 15, ..small_config(1) };
    train_logged(&g, &cfg, |log| losses.push(log.mean_loss)).unwrap();
    assert_eq!(losses.len(), 15);
    assert!(losses[14] < losses[0], "{losses:?}");
}

#[test]
fn both_edge_scopes_train() {
    let g = small_graph(4);
    for scope in [EdgeScope::All, EdgeScope::New] {
        let model = train(&g, &TrainConfig { edge_scope: scope, ..small_config(1) }).unwrap();
        assert!(model.epoch_losses.iter().all(|l| l.is_finite()));
    }
}

#[test]
fn too_few_snapshots_is_an_error() {
    let g = small_graph(4).prefix(2).unwrap();
    assert!(train(&g, &small_config(1)).is_err());
}

#[test]
fn fine_tuning_lowers_loss_on_revealed_edges() {
    let g = small_graph(7);
    let model = train(&g, &small_config(2)).unwrap();
    let split = LinkEvalSplit::draw(&g, 11).unwrap();
    let t = g.num_timestamps() - 1;
    let noise = g.noise_distribution(t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = draw_samples(&split.fine_tune_edges, &noise, 5, g.is_directed(), &mut rng);
    let before = batch_loss(&model, &g, t, &batch).unwrap();
    let tuned = fine_tune(&model, &g, &split.fine_tune_edges, 30, split.seed).unwrap();
    assert!(!tuned.skipped);
    let after = batch_loss(&tuned.model, &g, t, &batch).unwrap();
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn fine_tuning_edge_cases_leave_model_unchanged() {
    let g = small_graph(7);
    let model = train(&g, &TrainConfig { epochs: 1, ..small_config(2) }).unwrap();
    let split = LinkEvalSplit::draw(&g, 11).unwrap();
    let zero = fine_tune(&model, &g, &split.fine_tune_edges, 0, 1).unwrap();
    assert!(!zero.skipped);
    assert_eq!(zero.model, model);
    let empty = fine_tune(&model, &g, &[], 10, 1).unwrap();
    assert!(empty.skipped);
    assert_eq!(empty.model, model);
}

#[test]
fn evaluation_reports_are_reproducible() {
    let g = small_graph(8);
    let model = train(&g, &small_config(8)).unwrap();
    let a = eval_link_prediction(&g, &model, 3, 21).unwrap();
    let b = eval_link_prediction(&g, &model, 3, 21).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_json(), b.to_json());
    for metric in ["roc_auc", "pr_auc", "f1"] {
        let m = a.get(metric).unwrap();
        assert_eq!(m.values.len(), 3);
        assert!(m.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let nodes = eval_node_classification(&g, &model, 2, 21).unwrap();
    assert_eq!(nodes.to_csv(), eval_node_classification(&g, &model, 2, 21).unwrap().to_csv());
}

#[test]
fn eval_split_partitions_new_edges() {
    let g = small_graph(9);
    let n = g.num_timestamps();
    let seen = g.cumulative_edges(n).unwrap();
    for seed in 0..20 {
        let split = LinkEvalSplit::draw(&g, seed).unwrap();
        split.assert_disjoint(&seen);
        let mut all: Vec<_> = split.fine_tune_edges.iter().chain(&split.test_positives).copied().collect();
        all.sort();
        assert_eq!(all, g.new_edges(n).unwrap());
        assert_eq!(split.test_negatives.len(), split.test_positives.len());
    }
}
