use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{validate_graph, Graph, Label};
use crate::network::Readout;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Train => "train.jsonl",
            Self::Val => "val.jsonl",
            Self::Test => "test.jsonl",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            _ => Err(Error::Unknown {
                kind: "split",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

/// Contents of `meta.json`. Counts are records (lines) per split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub task_type: Readout,
    /// 0 for regression.
    pub num_classes: usize,
    pub vertex_feat_dim: usize,
    pub edge_feat_dim: usize,
    pub counts: SplitCounts,
    /// Graph records form GIG samples in consecutive groups of this size
    /// when set, e.g. when labels depend on the other graphs of a group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graphs_per_sample: Option<usize>,
}

impl DatasetMeta {
    /// Width of the prediction head.
    pub fn outputs(&self) -> usize {
        if self.task_type.is_regression() {
            1
        } else {
            self.num_classes
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.vertex_feat_dim == 0 {
            return Err("vertex_feat_dim must be positive".into());
        }
        match (self.task_type.is_regression(), self.num_classes) {
            (true, 0) => {}
            (true, c) => return Err(format!("regression task with num_classes {c}")),
            (false, c) if c < 2 => return Err(format!("classification needs at least 2 classes, got {c}")),
            _ => {}
        }
        if self.graphs_per_sample == Some(0) {
            return Err("graphs_per_sample must be positive".into());
        }
        if self.graphs_per_sample.is_some() && self.task_type == Readout::ClipClass {
            return Err("graphs_per_sample does not apply to clips".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Record {
    Graph(Graph),
    /// Unlabelled frames, one GIG vertex each.
    Clip { frames: Vec<Graph>, label: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub train: Vec<Record>,
    pub val: Vec<Record>,
    pub test: Vec<Record>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Record] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Sets the split counts in `meta` from the records.
    pub fn with_counts(mut self) -> Self {
        self.meta.counts = SplitCounts {
            train: self.train.len(),
            val: self.val.len(),
            test: self.test.len(),
        };
        self
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    vertex_features: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    edge_features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipJson {
    frames: Vec<GraphJson>,
    label: usize,
}

fn graph_json(g: &Graph) -> GraphJson {
    GraphJson {
        vertex_features: g.vertex_features.clone(),
        edges: g.edges.iter().map(|&(a, b)| [a, b]).collect(),
        edge_features: g.edge_features.clone(),
        label: g.label.as_ref().map(|l| match l {
            Label::Class(c) => Value::from(*c),
            Label::Value(v) => Value::from(*v),
            Label::VertexClasses(c) | Label::EdgeClasses(c) => Value::from(c.clone()),
        }),
    }
}

fn parse_label(v: Value, meta: &DatasetMeta, g: &Graph) -> std::result::Result<Label, String> {
    let class = |v: &Value| -> std::result::Result<usize, String> {
        let c = v.as_u64().ok_or_else(|| format!("class label {v} is not a non-negative integer"))? as usize;
        if c >= meta.num_classes {
            return Err(format!("class {c} out of range for {} classes", meta.num_classes));
        }
        Ok(c)
    };
    let classes = |v: &Value, want: usize, what: &str| -> std::result::Result<Vec<usize>, String> {
        let arr = v.as_array().ok_or_else(|| format!("{what} label must be an array"))?;
        if arr.len() != want {
            return Err(format!("{what} label has {} entries for {want} {what}s", arr.len()));
        }
        arr.iter().map(class).collect()
    };
    match meta.task_type {
        Readout::GraphClass => class(&v).map(Label::Class),
        Readout::GraphReg => v
            .as_f64()
            .map(Label::Value)
            .ok_or_else(|| format!("regression label {v} is not a number")),
        Readout::VertexClass => classes(&v, g.num_vertices(), "vertex").map(Label::VertexClasses),
        Readout::EdgeClass => classes(&v, g.num_edges(), "edge").map(Label::EdgeClasses),
        Readout::ClipClass => Err("clip datasets label the clip, not its frames".into()),
    }
}

fn to_graph(j: GraphJson, meta: &DatasetMeta, labelled: bool) -> std::result::Result<Graph, String> {
    let mut g = Graph::new(j.vertex_features, j.edges.into_iter().map(|[a, b]| (a, b)).collect())
        .with_edge_features(j.edge_features);
    validate_graph(&g, false).map_err(|e| e.to_string())?;
    if g.num_vertices() == 0 {
        return Err("graph has no vertices".into());
    }
    if g.vertex_dim() != meta.vertex_feat_dim {
        return Err(format!(
            "vertex features have {} dimensions, meta says {}",
            g.vertex_dim(),
            meta.vertex_feat_dim
        ));
    }
    if meta.edge_feat_dim == 0 && !g.edge_features.is_empty() {
        return Err("edge features present but meta says edge_feat_dim 0".into());
    }
    if meta.edge_feat_dim > 0 && g.edge_features.len() != g.num_edges() {
        return Err(format!("meta says edge_feat_dim {} but edge features are missing", meta.edge_feat_dim));
    }
    if meta.edge_feat_dim > 0 && g.num_edges() > 0 && g.edge_dim() != meta.edge_feat_dim {
        return Err(format!(
            "edge features have {} dimensions, meta says {}",
            g.edge_dim(),
            meta.edge_feat_dim
        ));
    }
    match (labelled, j.label) {
        (true, Some(v)) => g.label = Some(parse_label(v, meta, &g)?),
        (true, None) => return Err("missing label".into()),
        (false, Some(_)) => return Err("clip frames carry no label".into()),
        (false, None) => {}
    }
    Ok(g)
}

fn parse_record(line: &str, meta: &DatasetMeta) -> std::result::Result<Record, String> {
    if meta.task_type == Readout::ClipClass {
        let c: ClipJson = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if c.frames.is_empty() {
            return Err("clip has no frames".into());
        }
        if c.label >= meta.num_classes {
            return Err(format!("class {} out of range for {} classes", c.label, meta.num_classes));
        }
        let frames = c
            .frames
            .into_iter()
            .enumerate()
            .map(|(k, f)| to_graph(f, meta, false).map_err(|e| format!("frame {k}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Record::Clip { frames, label: c.label })
    } else {
        let g: GraphJson = serde_json::from_str(line).map_err(|e| e.to_string())?;
        to_graph(g, meta, true).map(Record::Graph)
    }
}

fn record_line(r: &Record) -> String {
    let text = match r {
        Record::Graph(g) => serde_json::to_string(&graph_json(g)),
        Record::Clip { frames, label } => serde_json::to_string(&ClipJson {
            frames: frames
                .iter()
                .map(|f| GraphJson {
                    label: None,
                    ..graph_json(f)
                })
                .collect(),
            label: *label,
        }),
    };
    text.expect("records serialise")
}

pub fn load_meta(dir: &Path) -> Result<DatasetMeta> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path)?;
    let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| Error::Dataset {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    meta.validate().map_err(|message| Error::Dataset { path, line: 1, message })?;
    Ok(meta)
}

fn load_split(dir: &Path, split: Split, meta: &DatasetMeta) -> Result<Vec<Record>> {
    let path = dir.join(split.file_name());
    let at = |path: &PathBuf, line: usize, message: String| Error::Dataset {
        path: path.clone(),
        line,
        message,
    };
    let reader = BufReader::new(fs::File::open(&path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, meta).map_err(|m| at(&path, i + 1, m))?);
    }
    let want = meta.counts.get(split);
    if records.len() != want {
        return Err(at(&path, records.len(), format!("{} records, meta says {want}", records.len())));
    }
    if let Some(b) = meta.graphs_per_sample {
        if records.len() % b != 0 {
            return Err(at(
                &path,
                records.len(),
                format!("{} records do not split into groups of {b}", records.len()),
            ));
        }
    }
    Ok(records)
}

/// Reads `meta.json` and the three split files, validating every record
/// against the metadata. Fails on the first bad line.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta = load_meta(dir)?;
    Ok(Dataset {
        train: load_split(dir, Split::Train, &meta)?,
        val: load_split(dir, Split::Val, &meta)?,
        test: load_split(dir, Split::Test, &meta)?,
        meta,
    })
}

pub fn load_split_only(dir: &Path, split: Split) -> Result<(DatasetMeta, Vec<Record>)> {
    let meta = load_meta(dir)?;
    let records = load_split(dir, split, &meta)?;
    Ok((meta, records))
}

pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = serde_json::to_string_pretty(&data.meta)?;
    fs::write(dir.join("meta.json"), meta + "\n")?;
    for split in Split::ALL {
        let mut w = BufWriter::new(fs::File::create(dir.join(split.file_name()))?);
        for r in data.split(split) {
            writeln!(w, "{}", record_line(r))?;
        }
        w.flush()?;
    }
    Ok(())
}
