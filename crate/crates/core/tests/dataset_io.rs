use std::fs;
use std::path::Path;

use dane::graph::{generate_synthetic, load_dynamic_graph, save_dynamic_graph, GraphError, LoadOptions, NodeId, SyntheticParams};

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn fixture(dir: &Path, cumulative: bool) {
    write(
        dir,
        "meta.json",
        &format!(r#"{{"num_nodes": 4, "num_timestamps": 3, "attr_dim": 2, "directed": false, "cumulative": {cumulative}}}"#),
    );
    write(dir, "t001.edges", "# comment\n0 1\n1 0\n");
    write(dir, "t001.attrs", "1.0,0.0\n0.0,1.0\n0.5,0.5\n0.0,0.0\n");
    write(dir, "t001.labels", "node,label\n0,1\n2,0\n");
    write(dir, "t002.edges", "1 2\n");
    write(dir, "t003.edges", "2 3\n\n0 3\n");
    write(dir, "t003.attrs", "1,1\n1,1\n1,1\n1,1\n");
}

#[test]
fn fixture_loads_with_merged_duplicates_and_carried_attributes() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), false);
    let g = load_dynamic_graph(dir.path(), LoadOptions::default()).unwrap();
    assert_eq!(g.num_timestamps(), 3);
    let s1 = g.snapshot(1).unwrap();
    assert_eq!(s1.edges().len(), 1);
    assert_eq!(s1.labels().unwrap().get(&NodeId(0)), Some(&1));
    assert_eq!(g.snapshot(2).unwrap().attributes(), s1.attributes());
    assert_eq!(g.snapshot(2).unwrap().edges().len(), 1);
    assert_eq!(g.snapshot(3).unwrap().attributes().row(0), &[1.0, 1.0]);
    assert_eq!(g.new_edges(3).unwrap().len(), 2);
}

#[test]
fn cumulative_flag_unions_periods() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), true);
    let g = load_dynamic_graph(dir.path(), LoadOptions::default()).unwrap();
    assert_eq!(g.snapshot(3).unwrap().edges().len(), 4);

    fixture(dir.path(), false);
    let forced = load_dynamic_graph(dir.path(), LoadOptions { cumulative: true }).unwrap();
    assert_eq!(forced.snapshot(3).unwrap().edges().len(), 4);
}

#[test]
fn malformed_files_report_path_and_line() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), false);
    write(dir.path(), "t002.edges", "1 2\n3 9\n");
    match load_dynamic_graph(dir.path(), LoadOptions::default()) {
        Err(GraphError::Load { path, line, .. }) => {
            assert!(path.ends_with("t002.edges"));
            assert_eq!(line, Some(2));
        }
        other => panic!("expected a load error, got {other:?}"),
    }

    fixture(dir.path(), false);
    write(dir.path(), "t002.edges", "1 1\n");
    assert!(load_dynamic_graph(dir.path(), LoadOptions::default()).is_err());

    fixture(dir.path(), false);
    write(dir.path(), "t003.attrs", "1,1\n1,1\n");
    assert!(load_dynamic_graph(dir.path(), LoadOptions::default()).is_err());

    fixture(dir.path(), false);
    fs::remove_file(dir.path().join("t001.attrs")).unwrap();
    assert!(load_dynamic_graph(dir.path(), LoadOptions::default()).is_err());
}

#[test]
fn synthetic_graph_round_trips_exactly() {
    let params = SyntheticParams {
        num_nodes: 40,
        num_communities: 2,
        num_snapshots: 4,
        attr_dim: 3,
        ..SyntheticParams::default()
    };
    let g = generate_synthetic(&params, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dynamic_graph(&g, dir.path()).unwrap();
    let back = load_dynamic_graph(dir.path(), LoadOptions::default()).unwrap();
    assert_eq!(back.num_timestamps(), g.num_timestamps());
    for (a, b) in g.snapshots().zip(back.snapshots()) {
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.attributes(), b.attributes());
        assert_eq!(a.labels(), b.labels());
    }
}
