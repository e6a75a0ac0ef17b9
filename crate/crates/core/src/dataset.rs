//! Records, ground truth, and the JSON dataset document.
//!
//! A dataset is immutable once built. Ids are stable: [`Dataset::restrict`]
//! keeps the original ids so schemes can report invalid records against the
//! ground truth of the full dataset.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, format_rational, parse_rational, Rational};
use num_traits::Signed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Scalar,
    Lp,
    Points,
    GraphTerminals,
}

impl DatasetKind {
    pub fn tag(self) -> &'static str {
        match self {
            DatasetKind::Scalar => "scalar",
            DatasetKind::Lp => "lp",
            DatasetKind::Points => "points",
            DatasetKind::GraphTerminals => "graph-terminals",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "scalar" => DatasetKind::Scalar,
            "lp" => DatasetKind::Lp,
            "points" => DatasetKind::Points,
            "graph-terminals" => DatasetKind::GraphTerminals,
            _ => return None,
        })
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// What a record contributes to the computation.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Scalar(f64),
    /// Objective coefficient and constraint row owned by one record.
    LpRow { c: Rational, a: Vec<Rational> },
    Point(Vec<f64>),
    Vertex(usize),
}

impl Payload {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Payload::Scalar(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: usize,
    pub payload: Payload,
    pub group: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpSense {
    Packing,
    Covering,
    General,
}

impl LpSense {
    pub fn tag(self) -> &'static str {
        match self {
            LpSense::Packing => "packing",
            LpSense::Covering => "covering",
            LpSense::General => "general",
        }
    }
}

/// Which side of the duality a general LP is written on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpForm {
    /// Records are variables: `max c.y  s.t.  sum_i a_ij y_i <= b_j, y >= 0`.
    Packing,
    /// Records are constraints: `min b.x  s.t.  sum_j a_ij x_j >= c_i, x >= 0`.
    Covering,
}

impl LpForm {
    pub fn tag(self) -> &'static str {
        match self {
            LpForm::Packing => "packing",
            LpForm::Covering => "covering",
        }
    }
}

/// Parameters of an LP dataset that are known in advance (not record-owned).
#[derive(Debug, Clone, PartialEq)]
pub struct LpShared {
    pub b: Vec<Rational>,
    pub sense: LpSense,
    pub form: LpForm,
}

/// Undirected graph with positive edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    pub fn new(vertices: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(u, v, w) in &edges {
            if u >= vertices || v >= vertices {
                return Err(Error::input(format!("edge ({u},{v}) references a vertex >= {vertices}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::input(format!("edge ({u},{v}) has non-positive weight {w}")));
            }
        }
        Ok(Graph { vertices, edges })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    kind: DatasetKind,
    records: Vec<Record>,
    lp: Option<Arc<LpShared>>,
    graph: Option<Arc<Graph>>,
}

impl Dataset {
    /// Builds a dataset from records whose ids are unique (any order).
    pub fn new(kind: DatasetKind, mut records: Vec<Record>) -> Result<Self> {
        records.sort_by_key(|r| r.id);
        if records.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::input("duplicate record id"));
        }
        for r in &records {
            let ok = matches!(
                (kind, &r.payload),
                (DatasetKind::Scalar, Payload::Scalar(_))
                    | (DatasetKind::Lp, Payload::LpRow { .. })
                    | (DatasetKind::Points, Payload::Point(_))
                    | (DatasetKind::GraphTerminals, Payload::Vertex(_))
            );
            if !ok {
                return Err(Error::input(format!("record {} has a payload that does not match kind {kind}", r.id)));
            }
            if let Payload::Scalar(x) = r.payload {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::input(format!("record {} has invalid scalar value {x}", r.id)));
                }
            }
        }
        Ok(Dataset {
            kind,
            records,
            lp: None,
            graph: None,
        })
    }

    /// Scalar dataset with ids `0..values.len()`.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        let records = values
            .iter()
            .enumerate()
            .map(|(id, &x)| Record {
                id,
                payload: Payload::Scalar(x),
                group: None,
            })
            .collect();
        Dataset::new(DatasetKind::Scalar, records)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let records = points
            .iter()
            .enumerate()
            .map(|(id, p)| Record {
                id,
                payload: Payload::Point(p.clone()),
                group: None,
            })
            .collect();
        Dataset::new(DatasetKind::Points, records)
    }

    pub fn from_terminals(graph: Graph, terminals: &[usize]) -> Result<Self> {
        if let Some(&v) = terminals.iter().find(|&&v| v >= graph.vertices) {
            return Err(Error::input(format!("terminal vertex {v} is not in the graph")));
        }
        let records = terminals
            .iter()
            .enumerate()
            .map(|(id, &v)| Record {
                id,
                payload: Payload::Vertex(v),
                group: None,
            })
            .collect();
        Ok(Dataset::new(DatasetKind::GraphTerminals, records)?.with_graph(graph))
    }

    /// LP dataset: record `i` owns `(c[i], rows[i])`.
    pub fn from_lp(c: Vec<Rational>, rows: Vec<Vec<Rational>>, shared: LpShared) -> Result<Self> {
        if c.len() != rows.len() {
            return Err(Error::input("objective and row counts differ"));
        }
        let records = c
            .into_iter()
            .zip(rows)
            .enumerate()
            .map(|(id, (c, a))| Record {
                id,
                payload: Payload::LpRow { c, a },
                group: None,
            })
            .collect();
        let ds = Dataset::new(DatasetKind::Lp, records)?;
        ds.with_lp(shared)
    }

    pub fn with_graph(mut self, graph: Graph) -> Self {
        self.graph = Some(Arc::new(graph));
        self
    }

    pub fn with_lp(mut self, shared: LpShared) -> Result<Self> {
        let m = shared.b.len();
        if m == 0 {
            return Err(Error::input("LP needs at least one shared row (m >= 1)"));
        }
        for r in &self.records {
            if let Payload::LpRow { a, .. } = &r.payload {
                if a.len() != m {
                    return Err(Error::input(format!("record {} has {} coefficients, expected {m}", r.id, a.len())));
                }
            }
        }
        if shared.sense != LpSense::General {
            let negative = shared.b.iter().any(|b| b.is_negative())
                || self.records.iter().any(|r| match &r.payload {
                    Payload::LpRow { c, a } => c.is_negative() || a.iter().any(|x| x.is_negative()),
                    _ => false,
                });
            if negative {
                return Err(Error::input(format!("{} LP parameters must be nonnegative", shared.sense.tag())));
            }
        }
        self.lp = Some(Arc::new(shared));
        Ok(self)
    }

    /// Attaches group labels by id; every record must be labelled.
    pub fn with_groups(mut self, labels: &BTreeMap<usize, String>) -> Result<Self> {
        for r in &mut self.records {
            match labels.get(&r.id) {
                Some(label) => r.group = Some(label.clone()),
                None => return Err(Error::input(format!("record {} has no group label", r.id))),
            }
        }
        Ok(self)
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.id)
    }

    pub fn get(&self, id: usize) -> Option<&Record> {
        self.records
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn lp(&self) -> Option<&LpShared> {
        self.lp.as_deref()
    }

    pub fn graph(&self) -> Option<&Graph> {
        self.graph.as_deref()
    }

    /// `(id, x_i)` pairs, or an input error for non-scalar datasets.
    pub fn scalars(&self) -> Result<Vec<(usize, f64)>> {
        if self.kind != DatasetKind::Scalar {
            return Err(Error::input(format!("expected a scalar dataset, got {}", self.kind)));
        }
        Ok(self
            .records
            .iter()
            .map(|r| (r.id, r.payload.as_scalar().unwrap_or(0.0)))
            .collect())
    }

    /// Sub-dataset over the records not in `excluded`, original ids kept.
    pub fn restrict<I: IntoIterator<Item = usize>>(&self, excluded: I) -> Dataset {
        let excluded: HashSet<usize> = excluded.into_iter().collect();
        self.filter(|r| !excluded.contains(&r.id))
    }

    /// Sub-dataset over exactly the listed ids.
    pub fn select<I: IntoIterator<Item = usize>>(&self, kept: I) -> Dataset {
        let kept: HashSet<usize> = kept.into_iter().collect();
        self.filter(|r| kept.contains(&r.id))
    }

    fn filter(&self, keep: impl Fn(&Record) -> bool) -> Dataset {
        Dataset {
            kind: self.kind,
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            lp: self.lp.clone(),
            graph: self.graph.clone(),
        }
    }
}

/// Σ x_i over a scalar dataset, compensated.
pub fn scalar_total(dataset: &Dataset) -> Result<f64> {
    Ok(compensated_sum(dataset.scalars()?.into_iter().map(|(_, x)| x)))
}

/// The hidden validity mask, indexed by record id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    valid_mask: Vec<bool>,
}

impl GroundTruth {
    pub fn new(valid_mask: Vec<bool>) -> Self {
        GroundTruth { valid_mask }
    }

    pub fn all_valid(n: usize) -> Self {
        GroundTruth::new(vec![true; n])
    }

    /// All valid except the listed ids.
    pub fn with_invalid(n: usize, invalid: &[usize]) -> Self {
        let mut mask = vec![true; n];
        for &i in invalid {
            mask[i] = false;
        }
        GroundTruth::new(mask)
    }

    pub fn len(&self) -> usize {
        self.valid_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_mask.is_empty()
    }

    pub fn is_valid(&self, id: usize) -> Option<bool> {
        self.valid_mask.get(id).copied()
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid_mask
    }

    pub fn invalid_ids(&self) -> Vec<usize> {
        (0..self.valid_mask.len()).filter(|&i| !self.valid_mask[i]).collect()
    }

    /// The valid sub-dataset `x_T`, for scoring.
    pub fn valid_part(&self, dataset: &Dataset) -> Dataset {
        dataset.restrict(self.invalid_ids())
    }
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: u64,
    valid: bool,
    #[serde(default, deserialize_with = "nonnegative_scalar")]
    value: Option<f64>,
    #[serde(default)]
    c: Option<Value>,
    #[serde(default)]
    a: Option<Vec<Value>>,
    #[serde(default)]
    point: Option<Vec<f64>>,
    #[serde(default)]
    vertex: Option<usize>,
}

fn nonnegative_scalar<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    let value = Value::deserialize(d)?;
    let x = match &value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => parse_rational(s).ok().map(|r| crate::numeric::rational_to_f64(&r)),
        _ => None,
    }
    .ok_or_else(|| de::Error::custom(format!("value must be a number, got {value}")))?;
    if !x.is_finite() || x < 0.0 {
        return Err(de::Error::custom(format!("value must be finite and >= 0, got {value}")));
    }
    Ok(Some(x))
}

/// Record list that rejects duplicate ids while parsing, so the error carries
/// the position of the offending record.
struct RawRecords(Vec<RawRecord>);

impl<'de> Deserialize<'de> for RawRecords {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct SeqVisitor;
        impl<'de> Visitor<'de> for SeqVisitor {
            type Value = RawRecords;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array of records")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<RawRecords, A::Error> {
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                while let Some(rec) = seq.next_element::<RawRecord>()? {
                    if !seen.insert(rec.id) {
                        return Err(de::Error::custom(format!(
                            "duplicate record id {} (record #{} ends here)",
                            rec.id,
                            out.len()
                        )));
                    }
                    out.push(rec);
                }
                Ok(RawRecords(out))
            }
        }
        d.deserialize_seq(SeqVisitor)
    }
}

#[derive(Deserialize)]
struct RawLp {
    b: Vec<Value>,
    sense: String,
    #[serde(default)]
    form: Option<String>,
}

#[derive(Deserialize)]
struct RawGraph {
    vertices: usize,
    edges: Vec<(usize, usize, f64)>,
}

#[derive(Deserialize)]
struct RawDocument {
    kind: String,
    records: RawRecords,
    #[serde(default)]
    groups: Option<BTreeMap<String, String>>,
    #[serde(default)]
    lp: Option<RawLp>,
    #[serde(default)]
    graph: Option<RawGraph>,
}

fn rational_value(v: &Value) -> Result<Rational> {
    match v {
        Value::Number(n) => parse_rational(&n.to_string()),
        Value::String(s) => parse_rational(s),
        other => Err(Error::input(format!("expected a number or \"p/q\" string, got {other}"))),
    }
}

/// Parses a dataset document from text. `origin` names the source in errors.
pub fn parse_dataset(text: &str, origin: &str) -> Result<(Dataset, GroundTruth)> {
    let parse_err = |message: String| Error::Parse {
        path: origin.to_string(),
        message,
    };
    let doc: RawDocument = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let kind = DatasetKind::from_tag(&doc.kind).ok_or_else(|| parse_err(format!("unknown kind {:?}", doc.kind)))?;

    let n = doc.records.0.len();
    let mut mask = vec![true; n];
    let mut records = Vec::with_capacity(n);
    let mut dim = None;
    for raw in &doc.records.0 {
        let id = raw.id as usize;
        if id >= n {
            return Err(parse_err(format!("record ids must be contiguous 0..{n}; found id {id}")));
        }
        mask[id] = raw.valid;
        let payload = match kind {
            DatasetKind::Scalar => Payload::Scalar(
                raw.value
                    .ok_or_else(|| parse_err(format!("record {id}: scalar records need \"value\"")))?,
            ),
            DatasetKind::Lp => {
                let c = raw
                    .c
                    .as_ref()
                    .ok_or_else(|| parse_err(format!("record {id}: lp records need \"c\"")))?;
                let a = raw
                    .a
                    .as_ref()
                    .ok_or_else(|| parse_err(format!("record {id}: lp records need \"a\"")))?;
                let wrap = |e: Error| parse_err(format!("record {id}: {e}"));
                Payload::LpRow {
                    c: rational_value(c).map_err(wrap)?,
                    a: a.iter().map(rational_value).collect::<Result<_>>().map_err(wrap)?,
                }
            }
            DatasetKind::Points => {
                let p = raw
                    .point
                    .clone()
                    .ok_or_else(|| parse_err(format!("record {id}: point records need \"point\"")))?;
                if p.iter().any(|c| !c.is_finite()) {
                    return Err(parse_err(format!("record {id}: non-finite coordinate")));
                }
                match dim {
                    None => dim = Some(p.len()),
                    Some(d) if d != p.len() => {
                        return Err(parse_err(format!("record {id}: dimension {} differs from {d}", p.len())))
                    }
                    _ => {}
                }
                Payload::Point(p)
            }
            DatasetKind::GraphTerminals => Payload::Vertex(
                raw.vertex
                    .ok_or_else(|| parse_err(format!("record {id}: graph records need \"vertex\"")))?,
            ),
        };
        records.push(Record {
            id,
            payload,
            group: None,
        });
    }

    let mut dataset = Dataset::new(kind, records).map_err(|e| parse_err(e.to_string()))?;

    if let Some(groups) = &doc.groups {
        let mut labels = BTreeMap::new();
        for (key, label) in groups {
            let id: usize = key
                .parse()
                .map_err(|_| parse_err(format!("group key {key:?} is not a record id")))?;
            labels.insert(id, label.clone());
        }
        if let Some(extra) = labels.keys().find(|&&id| id >= n) {
            return Err(parse_err(format!("group label for unknown id {extra}")));
        }
        dataset = dataset.with_groups(&labels).map_err(|e| parse_err(e.to_string()))?;
    }

    match kind {
        DatasetKind::Lp => {
            let lp = doc.lp.ok_or_else(|| parse_err("lp datasets need an \"lp\" section".into()))?;
            let sense = match lp.sense.as_str() {
                "packing" => LpSense::Packing,
                "covering" => LpSense::Covering,
                "general" => LpSense::General,
                other => return Err(parse_err(format!("unknown lp sense {other:?}"))),
            };
            let form = match (sense, lp.form.as_deref()) {
                (LpSense::Packing, _) => LpForm::Packing,
                (LpSense::Covering, _) => LpForm::Covering,
                (LpSense::General, None | Some("covering")) => LpForm::Covering,
                (LpSense::General, Some("packing")) => LpForm::Packing,
                (_, Some(other)) => return Err(parse_err(format!("unknown lp form {other:?}"))),
            };
            let b = lp
                .b
                .iter()
                .map(rational_value)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| parse_err(e.to_string()))?;
            dataset = dataset
                .with_lp(LpShared { b, sense, form })
                .map_err(|e| parse_err(e.to_string()))?;
        }
        DatasetKind::GraphTerminals => {
            let g = doc
                .graph
                .ok_or_else(|| parse_err("graph-terminals datasets need a \"graph\" section".into()))?;
            let graph = Graph::new(g.vertices, g.edges).map_err(|e| parse_err(e.to_string()))?;
            if let Some(r) = dataset.records().iter().find(|r| matches!(r.payload, Payload::Vertex(v) if v >= graph.vertices)) {
                return Err(parse_err(format!("record {}: vertex outside the graph", r.id)));
            }
            dataset = dataset.with_graph(graph);
        }
        _ => {}
    }

    Ok((dataset, GroundTruth::new(mask)))
}

/// Reads a dataset document from disk.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<(Dataset, GroundTruth)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, &path.display().to_string())
}

fn rational_json(r: &Rational) -> Value {
    if r.is_integer() {
        if let Ok(n) = r.numer().to_string().parse::<i64>() {
            return json!(n);
        }
    }
    Value::String(format_rational(r))
}

/// Renders the document form of `(dataset, truth)`.
pub fn dataset_to_json(dataset: &Dataset, truth: &GroundTruth) -> Value {
    let records: Vec<Value> = dataset
        .records()
        .iter()
        .map(|r| {
            let valid = truth.is_valid(r.id).unwrap_or(true);
            let mut obj = json!({ "id": r.id, "valid": valid });
            let map = obj.as_object_mut().expect("object");
            match &r.payload {
                Payload::Scalar(x) => {
                    map.insert("value".into(), json!(x));
                }
                Payload::LpRow { c, a } => {
                    map.insert("c".into(), rational_json(c));
                    map.insert("a".into(), Value::Array(a.iter().map(rational_json).collect()));
                }
                Payload::Point(p) => {
                    map.insert("point".into(), json!(p));
                }
                Payload::Vertex(v) => {
                    map.insert("vertex".into(), json!(v));
                }
            }
            obj
        })
        .collect();
    let mut doc = json!({ "kind": dataset.kind().tag(), "records": records });
    let map = doc.as_object_mut().expect("object");
    if dataset.records().iter().any(|r| r.group.is_some()) {
        let groups: serde_json::Map<String, Value> = dataset
            .records()
            .iter()
            .filter_map(|r| r.group.as_ref().map(|g| (r.id.to_string(), Value::String(g.clone()))))
            .collect();
        map.insert("groups".into(), Value::Object(groups));
    }
    if let Some(lp) = dataset.lp() {
        let mut section = json!({
            "b": lp.b.iter().map(rational_json).collect::<Vec<_>>(),
            "sense": lp.sense.tag(),
        });
        if lp.sense == LpSense::General {
            section["form"] = json!(lp.form.tag());
        }
        map.insert("lp".into(), section);
    }
    if let Some(g) = dataset.graph() {
        let edges: Vec<Value> = g.edges.iter().map(|&(u, v, w)| json!([u, v, w])).collect();
        map.insert("graph".into(), json!({ "vertices": g.vertices, "edges": edges }));
    }
    doc
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset, truth: &GroundTruth) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&dataset_to_json(dataset, truth)).expect("serializable document");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
