use std::fs;
use std::path::Path;

use pignn::data::{generate_sbm, load_csv_graph, load_raw_citation, Bundle, RunInputs, SbmSpec};
use pignn::{Error, SplitPolicy};

const ONE_EACH: SplitPolicy = SplitPolicy::PerClass {
    train_k: 1,
    val_k: 0,
};

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn toy_citation_files() {
    let dir = tempfile::tempdir().unwrap();
    let content = write(dir.path(), "toy.content", "p1 0 1 1 A\np2 1 0 0 B\n");
    let cites = write(dir.path(), "toy.cites", "p1 p2\n");
    let (ds, report) = load_raw_citation(&content, &cites, &ONE_EACH).unwrap();
    assert_eq!(ds.num_nodes(), 2);
    assert_eq!(ds.graph.num_edges(), 1);
    assert_eq!(ds.num_classes, 2);
    assert_eq!(ds.clean_labels, vec![0, 1]);
    assert_eq!(ds.graph.feature_dim(), 3);
    assert_eq!(ds.graph.features()[[0, 2]], 1.0);
    assert_eq!(ds.name, "toy");
    assert_eq!(report.dropped_edges, 0);
}

#[test]
fn unknown_ids_are_dropped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let content = write(dir.path(), "cora.content", "a 1 X\nb 0 Y\nc 1 X\nd 0 Y\n");
    let cites = write(dir.path(), "cora.cites", "a b\nb zz\nc c\na b\nd a\n");
    let (ds, report) = load_raw_citation(&content, &cites, &ONE_EACH).unwrap();
    assert_eq!(report.dropped_edges, 1);
    assert_eq!(report.self_loops, 1);
    assert_eq!(ds.graph.num_edges(), 2);
    assert_eq!(ds.meta["raw_nodes"], 4);
    assert_eq!(ds.meta["reference_stats"]["nodes"], 2485);
    assert_eq!(ds.meta["reference_stats"]["edges"], 5069);
    assert_eq!(ds.meta["load_report"]["dropped_edges"], 1);
}

#[test]
fn malformed_rows_report_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let content = write(dir.path(), "bad.content", "a 1 0 X\nb 1 Y\n");
    let cites = write(dir.path(), "bad.cites", "a b\n");
    match load_raw_citation(&content, &cites, &ONE_EACH) {
        Err(Error::Parse { path, line, .. }) => {
            assert_eq!(line, 2);
            assert!(path.ends_with("bad.content"));
        }
        other => panic!("{other:?}"),
    }
    let content = write(dir.path(), "ok.content", "a 1 X\nb 0 Y\n");
    let cites = write(dir.path(), "bad3.cites", "a b\na b c\n");
    match load_raw_citation(&content, &cites, &ONE_EACH) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    let missing = dir.path().join("nope.cites");
    assert!(matches!(
        load_raw_citation(&content, &missing, &ONE_EACH),
        Err(Error::Io { .. })
    ));
}

#[test]
fn csv_graph() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = write(
        dir.path(),
        "wiki.csv",
        "id,label,f0,f1\n10,cat,0.5,1\n11,dog,1,0\n12,cat,0,0\n",
    );
    let edges = write(
        dir.path(),
        "wiki_edges.csv",
        "src,dst\n10,11\n11,12\n12,99\n",
    );
    let (ds, report) = load_csv_graph(&nodes, &edges, &ONE_EACH).unwrap();
    assert_eq!(ds.num_nodes(), 3);
    assert_eq!(ds.graph.num_edges(), 2);
    assert_eq!(ds.clean_labels, vec![0, 1, 0]);
    assert_eq!(ds.graph.features()[[0, 0]], 0.5);
    assert_eq!(report.dropped_edges, 1);
    let bad = write(dir.path(), "bad.csv", "id,label,f0\n1,a,zz\n");
    assert!(matches!(
        load_csv_graph(&bad, &edges, &ONE_EACH),
        Err(Error::Parse { line: 2, .. })
    ));
}

#[test]
fn bundles_are_deterministic_and_round_trip() {
    let spec = SbmSpec {
        block_size: 40,
        ..SbmSpec::default()
    };
    let policy = SplitPolicy::PerClass {
        train_k: 5,
        val_k: 5,
    };
    let ds = generate_sbm(&spec, &policy).unwrap();
    let noisy: Vec<usize> = ds.clean_labels.iter().map(|&y| (y + 1) % 4).collect();
    let inputs = RunInputs {
        dataset: ds,
        corrupted_labels: Some(noisy),
        seeds: [("sbm".to_owned(), 0)].into(),
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = inputs.save(a.path()).unwrap();
    let mb = inputs.save(b.path()).unwrap();
    assert_eq!(ma.files, mb.files);
    let back = RunInputs::load(a.path()).unwrap();
    assert_eq!(back, inputs);
    assert_ne!(
        back.corrupted_labels.as_ref(),
        Some(&back.dataset.clean_labels)
    );

    // flip one byte of the features
    let path = a
        .path()
        .join(&Bundle::open(a.path()).unwrap().manifest.files["features"].path);
    let mut bytes = fs::read(&path).unwrap();
    bytes[3] ^= 1;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(
        RunInputs::load(a.path()),
        Err(Error::Checksum { .. })
    ));
}
