use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, Meta};
use crate::error::{Error, Result};
use crate::graph::{build_graph, make_split, SplitPolicy};

/// Non-fatal problems found while loading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Edges naming an id absent from the node file.
    pub dropped_edges: usize,
    pub self_loops: usize,
    /// Repeated node ids; the first occurrence wins.
    pub duplicate_nodes: usize,
}

impl LoadReport {
    fn log(&self, what: &Path) {
        if self.dropped_edges > 0 {
            log::warn!(
                "{}: dropped {} edges with unknown endpoints",
                what.display(),
                self.dropped_edges
            );
        }
        if self.self_loops > 0 {
            log::warn!("{}: ignored {} self-loops", what.display(), self.self_loops);
        }
        if self.duplicate_nodes > 0 {
            log::warn!(
                "{}: skipped {} duplicate node rows",
                what.display(),
                self.duplicate_nodes
            );
        }
    }
}

/// Node and edge counts commonly reported for the public citation graphs
/// after largest-connected-component preprocessing.
fn reference_stats(name: &str) -> Option<(usize, usize, usize)> {
    match name {
        "cora" => Some((2485, 5069, 7)),
        "citeseer" => Some((2110, 3668, 6)),
        "pubmed" => Some((19717, 44324, 3)),
        _ => None,
    }
}

struct Interner {
    ids: HashMap<String, usize>,
    names: Vec<String>,
}

impl Interner {
    fn new() -> Self {
        Interner {
            ids: HashMap::new(),
            names: Vec::new(),
        }
    }

    fn intern(&mut self, s: &str) -> usize {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len();
        self.ids.insert(s.to_owned(), id);
        self.names.push(s.to_owned());
        id
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    name: String,
    node_ids: Interner,
    classes: Interner,
    labels: Vec<usize>,
    rows: Vec<f64>,
    dim: usize,
    edges: Vec<(usize, usize)>,
    report: LoadReport,
    policy: &SplitPolicy,
) -> Result<(Dataset, LoadReport)> {
    let n = node_ids.names.len();
    let features =
        Array2::from_shape_vec((n, dim), rows).map_err(|e| Error::Shape(e.to_string()))?;
    let graph = build_graph(&edges, n, features)?;
    let num_classes = classes.names.len();
    let split = make_split(&labels, num_classes, policy)?;
    let mut meta = Meta::new();
    meta.insert("class_names".into(), serde_json::json!(classes.names));
    meta.insert(
        "load_report".into(),
        serde_json::to_value(&report).expect("plain struct"),
    );
    meta.insert("raw_nodes".into(), n.into());
    meta.insert("raw_edges".into(), graph.num_edges().into());
    if let Some((nodes, edges, classes)) = reference_stats(&name) {
        meta.insert(
            "reference_stats".into(),
            serde_json::json!({ "nodes": nodes, "edges": edges, "classes": classes }),
        );
    }
    let ds = Dataset::new(name, graph, labels, num_classes, split, meta)?;
    Ok((ds, report))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().to_lowercase())
        .unwrap_or_else(|| "dataset".into())
}

/// Load the whitespace-separated `.content` / `.cites` pair used by the
/// public citation graphs.
///
/// Content rows are `<id> <f_1> .. <f_d> <class>`; cite rows are
/// `<id_a> <id_b>`. Node indices follow first appearance in the content file
/// and class ids follow first appearance of the class name.
pub fn load_raw_citation(
    content: &Path,
    cites: &Path,
    policy: &SplitPolicy,
) -> Result<(Dataset, LoadReport)> {
    let mut report = LoadReport::default();
    let mut nodes = Interner::new();
    let mut classes = Interner::new();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    let mut dim = None;

    let file = File::open(content).map_err(|e| Error::io(content, e))?;
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(content, e))?;
        let lineno = k + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 3 {
            return Err(parse_err(
                content,
                lineno,
                "expected `<id> <features..> <class>`",
            ));
        }
        let d = tokens.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => {
                return Err(parse_err(
                    content,
                    lineno,
                    format!("{d} features, previous rows had {prev}"),
                ));
            }
            _ => {}
        }
        if nodes.ids.contains_key(tokens[0]) {
            report.duplicate_nodes += 1;
            continue;
        }
        nodes.intern(tokens[0]);
        for t in &tokens[1..=d] {
            let x: f64 = t
                .parse()
                .map_err(|_| parse_err(content, lineno, format!("bad feature value `{t}`")))?;
            rows.push(x);
        }
        labels.push(classes.intern(tokens[d + 1]));
    }
    let Some(dim) = dim else {
        return Err(parse_err(content, 0, "no nodes"));
    };

    let mut edges = Vec::new();
    let file = File::open(cites).map_err(|e| Error::io(cites, e))?;
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(cites, e))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            [a, b] => match (nodes.ids.get(*a), nodes.ids.get(*b)) {
                (Some(&i), Some(&j)) if i == j => report.self_loops += 1,
                (Some(&i), Some(&j)) => edges.push((i, j)),
                _ => report.dropped_edges += 1,
            },
            _ => return Err(parse_err(cites, k + 1, "expected `<id_a> <id_b>`")),
        }
    }
    report.log(cites);
    assemble(
        dataset_name(content),
        nodes,
        classes,
        labels,
        rows,
        dim,
        edges,
        report,
        policy,
    )
}

/// Load a graph from two CSV files with header rows: node rows
/// `id,label,f_1,..,f_d` and edge rows `src,dst` referencing the ids.
pub fn load_csv_graph(
    nodes_csv: &Path,
    edges_csv: &Path,
    policy: &SplitPolicy,
) -> Result<(Dataset, LoadReport)> {
    let mut report = LoadReport::default();
    let mut nodes = Interner::new();
    let mut classes = Interner::new();
    let mut labels = Vec::new();
    let mut rows = Vec::new();

    let csv_err = |path: &Path, e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        parse_err(path, line, e.to_string())
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(nodes_csv)
        .map_err(|e| csv_err(nodes_csv, e))?;
    let dim = reader
        .headers()
        .map_err(|e| csv_err(nodes_csv, e))?
        .len()
        .checked_sub(2)
        .filter(|&d| d > 0)
        .ok_or_else(|| parse_err(nodes_csv, 1, "header must be `id,label,f_1,..`"))?;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(nodes_csv, e))?;
        let lineno = record.position().map_or(0, |p| p.line() as usize);
        if nodes.ids.contains_key(&record[0]) {
            report.duplicate_nodes += 1;
            continue;
        }
        nodes.intern(&record[0]);
        labels.push(classes.intern(&record[1]));
        for t in record.iter().skip(2) {
            let x: f64 = t
                .parse()
                .map_err(|_| parse_err(nodes_csv, lineno, format!("bad feature value `{t}`")))?;
            rows.push(x);
        }
    }
    if nodes.names.is_empty() {
        return Err(parse_err(nodes_csv, 0, "no nodes"));
    }

    let mut edges = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(edges_csv)
        .map_err(|e| csv_err(edges_csv, e))?;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(edges_csv, e))?;
        if record.len() != 2 {
            let lineno = record.position().map_or(0, |p| p.line() as usize);
            return Err(parse_err(edges_csv, lineno, "expected `src,dst`"));
        }
        match (nodes.ids.get(&record[0]), nodes.ids.get(&record[1])) {
            (Some(&i), Some(&j)) if i == j => report.self_loops += 1,
            (Some(&i), Some(&j)) => edges.push((i, j)),
            _ => report.dropped_edges += 1,
        }
    }
    report.log(edges_csv);
    assemble(
        dataset_name(nodes_csv),
        nodes,
        classes,
        labels,
        rows,
        dim,
        edges,
        report,
        policy,
    )
}
