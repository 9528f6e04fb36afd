//! Directory bundles: a `manifest.json` plus one flat little-endian binary
//! file per array, each covered by a SHA-256 checksum.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, Meta};
use crate::error::{Error, Result};
use crate::graph::{build_graph, Role, Split};
use crate::nn::{AdamState, Arch, ModelState, Param};
use crate::pi::{NegativePolicy, PiLabelSet, PiSource};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    U32,
    F64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the bundle directory.
    pub path: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub kind: String,
    pub name: String,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub seeds: BTreeMap<String, u64>,
    pub files: BTreeMap<String, FileEntry>,
    #[serde(default)]
    pub meta: Meta,
}

fn manifest_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Accumulates arrays into a bundle directory; [`BundleWriter::finish`]
/// writes the manifest last so a half-written bundle never looks complete.
pub struct BundleWriter {
    dir: PathBuf,
    manifest: Manifest,
}

impl BundleWriter {
    pub fn create(dir: &Path, kind: &str, name: &str) -> Result<BundleWriter> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(BundleWriter {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                version: FORMAT_VERSION,
                kind: kind.into(),
                name: name.into(),
                num_nodes: 0,
                num_classes: 0,
                seeds: BTreeMap::new(),
                files: BTreeMap::new(),
                meta: Meta::new(),
            },
        })
    }

    pub fn manifest_mut(&mut self) -> &mut Manifest {
        &mut self.manifest
    }

    fn add(&mut self, name: &str, dtype: Dtype, shape: &[usize], bytes: Vec<u8>) -> Result<()> {
        debug_assert_eq!(bytes.len(), shape.iter().product::<usize>() * dtype.width());
        let file = format!("{name}.bin");
        let path = self.dir.join(&file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.files.insert(
            name.into(),
            FileEntry {
                path: file,
                dtype,
                shape: shape.to_vec(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            },
        );
        Ok(())
    }

    pub fn add_u8(&mut self, name: &str, values: &[u8]) -> Result<()> {
        self.add(name, Dtype::U8, &[values.len()], values.to_vec())
    }

    pub fn add_u32(&mut self, name: &str, shape: &[usize], values: &[u32]) -> Result<()> {
        let bytes = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.add(name, Dtype::U32, shape, bytes)
    }

    pub fn add_f64(&mut self, name: &str, array: &Array2<f64>) -> Result<()> {
        let bytes = array.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.add(name, Dtype::F64, array.shape(), bytes)
    }

    pub fn add_indices(&mut self, name: &str, values: &[usize]) -> Result<()> {
        let values = to_u32(values)?;
        self.add_u32(name, &[values.len()], &values)
    }

    pub fn add_pairs(&mut self, name: &str, pairs: &[(u32, u32)]) -> Result<()> {
        let flat: Vec<u32> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        self.add_u32(name, &[pairs.len(), 2], &flat)
    }

    pub fn finish(self) -> Result<Manifest> {
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

fn to_u32(values: &[usize]) -> Result<Vec<u32>> {
    values
        .iter()
        .map(|&v| u32::try_from(v).map_err(|_| Error::invalid(format!("index {v} exceeds u32"))))
        .collect()
}

/// A bundle opened for reading. Every array read is checked against its
/// manifest checksum.
pub struct Bundle {
    dir: PathBuf,
    pub manifest: Manifest,
}

impl Bundle {
    pub fn open(dir: &Path) -> Result<Bundle> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let raw: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| manifest_err(&path, e.to_string()))?;
        let version = raw
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| manifest_err(&path, "missing version"))?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::Version {
                found: version as u32,
                expected: FORMAT_VERSION,
            });
        }
        let manifest =
            serde_json::from_value(raw).map_err(|e| manifest_err(&path, e.to_string()))?;
        Ok(Bundle {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.manifest.kind != kind {
            return Err(manifest_err(
                &self.dir.join(MANIFEST),
                format!("bundle holds `{}`, expected `{kind}`", self.manifest.kind),
            ));
        }
        Ok(())
    }

    pub fn has(&self, name: &str) -> bool {
        self.manifest.files.contains_key(name)
    }

    fn read(&self, name: &str, dtype: Dtype) -> Result<(Vec<usize>, Vec<u8>)> {
        let entry =
            self.manifest.files.get(name).ok_or_else(|| {
                manifest_err(&self.dir.join(MANIFEST), format!("no array `{name}`"))
            })?;
        if entry.dtype != dtype {
            return Err(manifest_err(
                &self.dir.join(MANIFEST),
                format!("array `{name}` is {:?}, expected {dtype:?}", entry.dtype),
            ));
        }
        let path = self.dir.join(&entry.path);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = entry.shape.iter().product::<usize>() * dtype.width();
        if bytes.len() != expected || hex::encode(Sha256::digest(&bytes)) != entry.sha256 {
            return Err(Error::Checksum {
                file: entry.path.clone(),
            });
        }
        Ok((entry.shape.clone(), bytes))
    }

    pub fn u8s(&self, name: &str) -> Result<Vec<u8>> {
        Ok(self.read(name, Dtype::U8)?.1)
    }

    pub fn u32s(&self, name: &str) -> Result<(Vec<usize>, Vec<u32>)> {
        let (shape, bytes) = self.read(name, Dtype::U32)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        Ok((shape, values))
    }

    pub fn f64s(&self, name: &str) -> Result<Array2<f64>> {
        let (shape, bytes) = self.read(name, Dtype::F64)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let (r, c) = match shape[..] {
            [r, c] => (r, c),
            [r] => (r, 1),
            _ => return Err(Error::Shape(format!("array `{name}` has shape {shape:?}"))),
        };
        Array2::from_shape_vec((r, c), values).map_err(|e| Error::Shape(e.to_string()))
    }

    pub fn indices(&self, name: &str) -> Result<Vec<usize>> {
        Ok(self.u32s(name)?.1.into_iter().map(|v| v as usize).collect())
    }

    pub fn pairs(&self, name: &str) -> Result<Vec<(u32, u32)>> {
        Ok(self
            .u32s(name)?
            .1
            .chunks_exact(2)
            .map(|c| (c[0], c[1]))
            .collect())
    }
}

/// A dataset together with an optional corrupted copy of its labels and the
/// seeds that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInputs {
    pub dataset: Dataset,
    pub corrupted_labels: Option<Vec<usize>>,
    pub seeds: BTreeMap<String, u64>,
}

impl RunInputs {
    pub fn save(&self, dir: &Path) -> Result<Manifest> {
        let ds = &self.dataset;
        let mut w = BundleWriter::create(dir, "dataset", &ds.name)?;
        {
            let m = w.manifest_mut();
            m.num_nodes = ds.num_nodes();
            m.num_classes = ds.num_classes;
            m.seeds = self.seeds.clone();
            m.meta = ds.meta.clone();
        }
        let (src, dst): (Vec<usize>, Vec<usize>) = ds.graph.edges().unzip();
        w.add_indices("edge_src", &src)?;
        w.add_indices("edge_dst", &dst)?;
        w.add_f64("features", ds.graph.features())?;
        w.add_indices("clean_labels", &ds.clean_labels)?;
        let roles: Vec<u8> = ds.split.roles().iter().map(|r| r.code()).collect();
        w.add_u8("split", &roles)?;
        if let Some(noisy) = &self.corrupted_labels {
            if noisy.len() != ds.num_nodes() {
                return Err(Error::Shape(format!(
                    "{} corrupted labels for {} nodes",
                    noisy.len(),
                    ds.num_nodes()
                )));
            }
            w.add_indices("corrupted_labels", noisy)?;
        }
        w.finish()
    }

    pub fn load(dir: &Path) -> Result<RunInputs> {
        let b = Bundle::open(dir)?;
        b.expect_kind("dataset")?;
        let m = &b.manifest;
        let src = b.indices("edge_src")?;
        let dst = b.indices("edge_dst")?;
        if src.len() != dst.len() {
            return Err(Error::Shape("edge endpoint arrays differ in length".into()));
        }
        let edges: Vec<(usize, usize)> = src.into_iter().zip(dst).collect();
        let graph = build_graph(&edges, m.num_nodes, b.f64s("features")?)?;
        let roles = b
            .u8s("split")?
            .into_iter()
            .map(|c| {
                Role::from_code(c)
                    .ok_or_else(|| Error::invalid(format!("unknown split role code {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let dataset = Dataset::new(
            m.name.clone(),
            graph,
            b.indices("clean_labels")?,
            m.num_classes,
            Split::from_roles(roles)?,
            m.meta.clone(),
        )?;
        let corrupted_labels = if b.has("corrupted_labels") {
            let y = b.indices("corrupted_labels")?;
            if y.len() != dataset.num_nodes() || y.iter().any(|&c| c >= dataset.num_classes) {
                return Err(Error::invalid("corrupted labels do not match the dataset"));
            }
            Some(y)
        } else {
            None
        };
        Ok(RunInputs {
            dataset,
            corrupted_labels,
            seeds: m.seeds.clone(),
        })
    }
}

/// Write weights and Adam moments of a model.
pub fn save_model(dir: &Path, model: &ModelState, name: &str) -> Result<Manifest> {
    let mut w = BundleWriter::create(dir, "model", name)?;
    {
        let m = w.manifest_mut();
        m.num_classes = *model.dims.last().expect("non-empty dims");
        m.seeds.insert("init".into(), model.seed);
        m.meta.insert(
            "arch".into(),
            serde_json::to_value(model.arch).expect("enum"),
        );
        m.meta.insert("dims".into(), serde_json::json!(model.dims));
        m.meta.insert("adam_step".into(), model.adam.step.into());
        let names: Vec<&str> = model.params.iter().map(|p| p.name.as_str()).collect();
        m.meta.insert("params".into(), serde_json::json!(names));
    }
    for (k, p) in model.params.iter().enumerate() {
        w.add_f64(&format!("param.{}", p.name), &p.value)?;
        w.add_f64(&format!("adam_m.{}", p.name), &model.adam.m[k])?;
        w.add_f64(&format!("adam_v.{}", p.name), &model.adam.v[k])?;
    }
    w.finish()
}

pub fn load_model(dir: &Path) -> Result<ModelState> {
    let b = Bundle::open(dir)?;
    b.expect_kind("model")?;
    let path = dir.join(MANIFEST);
    let meta = &b.manifest.meta;
    let field = |key: &str| {
        meta.get(key)
            .cloned()
            .ok_or_else(|| manifest_err(&path, format!("missing meta.{key}")))
    };
    let bad = |e: serde_json::Error| manifest_err(&path, e.to_string());
    let arch: Arch = serde_json::from_value(field("arch")?).map_err(bad)?;
    let dims: Vec<usize> = serde_json::from_value(field("dims")?).map_err(bad)?;
    let step: u64 = serde_json::from_value(field("adam_step")?).map_err(bad)?;
    let names: Vec<String> = serde_json::from_value(field("params")?).map_err(bad)?;
    let mut params = Vec::new();
    let mut m = Vec::new();
    let mut v = Vec::new();
    for name in names {
        m.push(b.f64s(&format!("adam_m.{name}"))?);
        v.push(b.f64s(&format!("adam_v.{name}"))?);
        let value = b.f64s(&format!("param.{name}"))?;
        params.push(Param { name, value });
    }
    let model = ModelState {
        arch,
        dims,
        params,
        adam: AdamState { m, v, step },
        seed: b.manifest.seeds.get("init").copied().unwrap_or(0),
    };
    // Shapes must agree with a freshly initialized model of the same layout.
    let reference = crate::nn::init_model(model.arch, &model.dims, 0)?;
    let same = reference.params.len() == model.params.len()
        && reference
            .params
            .iter()
            .zip(&model.params)
            .all(|(a, b)| a.name == b.name && a.value.shape() == b.value.shape());
    if !same {
        return Err(manifest_err(
            &path,
            "parameters do not match the recorded architecture",
        ));
    }
    Ok(model)
}

pub fn save_pi_labels(dir: &Path, labels: &PiLabelSet) -> Result<Manifest> {
    let mut w = BundleWriter::create(dir, "pi_labels", &labels.source().to_string())?;
    {
        let m = w.manifest_mut();
        m.num_nodes = labels.num_nodes();
        m.meta.insert(
            "source".into(),
            serde_json::to_value(labels.source()).expect("enum"),
        );
        m.meta.insert(
            "policy".into(),
            serde_json::to_value(labels.policy()).expect("enum"),
        );
    }
    w.add_pairs("positives", labels.positives())?;
    w.add_pairs("negatives", labels.sampled_negatives())?;
    w.finish()
}

pub fn load_pi_labels(dir: &Path) -> Result<PiLabelSet> {
    let b = Bundle::open(dir)?;
    b.expect_kind("pi_labels")?;
    let path = dir.join(MANIFEST);
    let get = |key: &str| {
        b.manifest
            .meta
            .get(key)
            .cloned()
            .ok_or_else(|| manifest_err(&path, format!("missing meta.{key}")))
    };
    let source: PiSource =
        serde_json::from_value(get("source")?).map_err(|e| manifest_err(&path, e.to_string()))?;
    let policy: NegativePolicy =
        serde_json::from_value(get("policy")?).map_err(|e| manifest_err(&path, e.to_string()))?;
    PiLabelSet::from_parts(
        b.manifest.num_nodes,
        source,
        policy,
        b.pairs("positives")?,
        b.pairs("negatives")?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SplitPolicy;

    fn toy() -> Dataset {
        let features = ndarray::array![[0.1, -2.5], [1.0 / 3.0, 7.0], [0.0, f64::MIN_POSITIVE]];
        let graph = build_graph(&[(0, 1), (1, 2)], 3, features).unwrap();
        let split = crate::graph::make_split(
            &[0, 1, 1],
            2,
            &SplitPolicy::PerClass {
                train_k: 1,
                val_k: 0,
            },
        )
        .unwrap();
        Dataset::new("toy", graph, vec![0, 1, 1], 2, split, Meta::new()).unwrap()
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let inputs = RunInputs {
            dataset: toy(),
            corrupted_labels: Some(vec![1, 1, 0]),
            seeds: [("noise".to_string(), 3)].into(),
        };
        inputs.save(dir.path()).unwrap();
        let back = RunInputs::load(dir.path()).unwrap();
        assert_eq!(back, inputs);
        assert_ne!(
            back.corrupted_labels.as_deref(),
            Some(&back.dataset.clean_labels[..])
        );
    }

    #[test]
    fn truncation_is_a_checksum_error() {
        let dir = tempfile::tempdir().unwrap();
        let inputs = RunInputs {
            dataset: toy(),
            corrupted_labels: None,
            seeds: BTreeMap::new(),
        };
        inputs.save(dir.path()).unwrap();
        let f = dir.path().join("features.bin");
        let bytes = fs::read(&f).unwrap();
        fs::write(&f, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            RunInputs::load(dir.path()),
            Err(Error::Checksum { .. })
        ));
    }

    #[test]
    fn version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let inputs = RunInputs {
            dataset: toy(),
            corrupted_labels: None,
            seeds: BTreeMap::new(),
        };
        inputs.save(dir.path()).unwrap();
        let m = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&m)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        fs::write(&m, text).unwrap();
        assert!(matches!(
            RunInputs::load(dir.path()),
            Err(Error::Version {
                found: 9,
                expected: 1
            })
        ));
    }

    #[test]
    fn model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut model = crate::nn::init_model(Arch::SageMean, &[3, 4, 2], 11).unwrap();
        model.adam.step = 7;
        model.adam.m[0][[0, 0]] = 0.25;
        save_model(dir.path(), &model, "f_m").unwrap();
        assert_eq!(load_model(dir.path()).unwrap(), model);
        assert!(load_pi_labels(dir.path()).is_err());
    }

    #[test]
    fn pi_label_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let policy = NegativePolicy::Sampled {
            per_positive: 1,
            seed: 4,
        };
        let labels = crate::pi::pi_labels_from_adjacency(&toy().graph, policy).unwrap();
        save_pi_labels(dir.path(), &labels).unwrap();
        assert_eq!(load_pi_labels(dir.path()).unwrap(), labels);
    }
}
