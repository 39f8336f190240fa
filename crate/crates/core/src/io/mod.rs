//! Newline-delimited JSON files, observation masking and synthetic data.
//!
//! Every file may start with a header record `{"M": .., "T": .., "S": ..}`.
//! Times in files are 1-based; in memory they are 0-based. Individuals are
//! named by external ids (integers or strings) and mapped to dense indices
//! through an [`IdMap`], which is persisted as `ids.jsonl`.

mod generator;
mod mask;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::epidemic::ContactGraph;
use crate::error::{Result, SkmError};
use crate::model::Observations;

pub use generator::{generate_benchmark, random_contacts, BenchmarkSpec};
pub use mask::{apply_mask, MaskSpec, MaskTask, MaskedObservations};

/// Dimensions declared at the top of a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "S")]
    pub s: usize,
}

/// An individual's name outside this crate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExternalId {
    Int(i64),
    Str(String),
}

impl fmt::Display for ExternalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExternalId::Int(v) => write!(f, "{v}"),
            ExternalId::Str(s) => write!(f, "{s}"),
        }
    }
}

/// Dense index <-> external id table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: Vec<ExternalId>,
    index: HashMap<ExternalId, usize>,
}

impl IdMap {
    /// Identity map `0..n`.
    pub fn dense(n: usize) -> Self {
        let mut map = IdMap::default();
        for i in 0..n {
            map.insert(ExternalId::Int(i as i64));
        }
        map
    }

    /// Index of `id`, assigning the next free one if unseen.
    pub fn insert(&mut self, id: ExternalId) -> usize {
        if let Some(&i) = self.index.get(&id) {
            return i;
        }
        let i = self.ids.len();
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        i
    }

    pub fn get(&self, id: &ExternalId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, m: usize) -> &ExternalId {
        &self.ids[m]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdRecord {
    m: usize,
    id: ExternalId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContactRecord {
    t: usize,
    u: ExternalId,
    v: ExternalId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationRecord {
    t: usize,
    m: ExternalId,
    y: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRecord {
    t: usize,
    m: ExternalId,
    x: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRecord {
    t: usize,
    m: ExternalId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValueRecord {
    t: usize,
    m: ExternalId,
    #[serde(alias = "score", alias = "p")]
    value: f64,
}

fn io_err(path: &Path, e: impl fmt::Display) -> SkmError {
    SkmError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> SkmError {
    SkmError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parsed records of one file with their 1-based line numbers.
struct RecordFile<T> {
    header: Option<Header>,
    records: Vec<(usize, T)>,
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<RecordFile<T>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| parse_err(path, line_no, e.to_string()))?;
        if value.get("M").is_some() {
            if header.is_some() || !records.is_empty() {
                return Err(parse_err(path, line_no, "header must be the first record"));
            }
            header = Some(
                serde_json::from_value(value)
                    .map_err(|e| parse_err(path, line_no, format!("bad header: {e}")))?,
            );
            continue;
        }
        let rec =
            serde_json::from_value(value).map_err(|e| parse_err(path, line_no, e.to_string()))?;
        records.push((line_no, rec));
    }
    Ok(RecordFile { header, records })
}

fn write_records<T: Serialize>(path: &Path, header: Option<Header>, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |v: String| writeln!(out, "{v}").map_err(|e| io_err(path, e));
    if let Some(h) = header {
        emit(serde_json::to_string(&h).expect("header serializes"))?;
    }
    for r in records {
        emit(serde_json::to_string(r).expect("records serialize"))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Converts a 1-based file time into a 0-based index below `horizon`.
fn time_index(path: &Path, line: usize, t: usize, horizon: Option<usize>) -> Result<usize> {
    if t == 0 {
        return Err(parse_err(path, line, "times are 1-based"));
    }
    if let Some(h) = horizon {
        if t > h {
            return Err(parse_err(
                path,
                line,
                format!("t={t} exceeds the horizon {h}"),
            ));
        }
    }
    Ok(t - 1)
}

fn lookup(path: &Path, line: usize, ids: &IdMap, id: &ExternalId) -> Result<usize> {
    ids.get(id)
        .ok_or_else(|| parse_err(path, line, format!("unknown individual {id}")))
}

pub fn load_ids(path: &Path) -> Result<IdMap> {
    let file: RecordFile<IdRecord> = read_records(path)?;
    let mut map = IdMap::default();
    for (line, rec) in file.records {
        if rec.m != map.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected m={}, got {}", map.len(), rec.m),
            ));
        }
        if map.get(&rec.id).is_some() {
            return Err(parse_err(path, line, format!("duplicate id {}", rec.id)));
        }
        map.insert(rec.id);
    }
    Ok(map)
}

pub fn write_ids(path: &Path, ids: &IdMap) -> Result<()> {
    let records: Vec<IdRecord> = (0..ids.len())
        .map(|m| IdRecord {
            m,
            id: ids.id(m).clone(),
        })
        .collect();
    write_records(path, None, &records)
}

/// A loaded contact file.
#[derive(Debug, Clone)]
pub struct Contacts {
    pub graph: ContactGraph,
    pub ids: IdMap,
    /// Records dropped because the same pair already appeared at that time.
    pub duplicates: usize,
}

/// Loads contacts. With `ids`, every id must be known; without, ids are
/// assigned in order of first appearance. The horizon comes from the header,
/// else `horizon`, else the largest time seen.
pub fn load_contacts(path: &Path, ids: Option<&IdMap>, horizon: Option<usize>) -> Result<Contacts> {
    let file: RecordFile<ContactRecord> = read_records(path)?;
    let horizon = file.header.map(|h| h.t).or(horizon);
    let mut map = ids.cloned().unwrap_or_default();
    let mut edges = Vec::with_capacity(file.records.len());
    for (line, rec) in &file.records {
        let t = time_index(path, *line, rec.t, horizon)?;
        let (u, v) = if ids.is_some() {
            (
                lookup(path, *line, &map, &rec.u)?,
                lookup(path, *line, &map, &rec.v)?,
            )
        } else {
            (map.insert(rec.u.clone()), map.insert(rec.v.clone()))
        };
        if u == v {
            return Err(parse_err(path, *line, format!("self-contact of {}", rec.u)));
        }
        edges.push((*line, t, u, v));
    }
    let m_count = file.header.map_or(map.len(), |h| h.m);
    if map.len() > m_count {
        return Err(parse_err(
            path,
            1,
            format!("header declares M={m_count} but {} ids appear", map.len()),
        ));
    }
    let horizon = horizon.unwrap_or_else(|| edges.iter().map(|e| e.1 + 1).max().unwrap_or(0));
    let mut graph = ContactGraph::new(m_count, horizon);
    let mut duplicates = 0;
    for (line, t, u, v) in edges {
        let before = graph.num_edges_at(t);
        graph
            .add_edge(t, u, v)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        if graph.num_edges_at(t) == before {
            duplicates += 1;
        }
    }
    Ok(Contacts {
        graph,
        ids: map,
        duplicates,
    })
}

pub fn write_contacts(
    path: &Path,
    graph: &ContactGraph,
    ids: &IdMap,
    num_states: usize,
) -> Result<()> {
    let mut records = Vec::with_capacity(graph.total_edges());
    for t in 0..graph.horizon() {
        for (u, v) in graph.edges_at(t) {
            records.push(ContactRecord {
                t: t + 1,
                u: ids.id(u).clone(),
                v: ids.id(v).clone(),
            });
        }
    }
    let header = Header {
        m: graph.num_individuals(),
        t: graph.horizon(),
        s: num_states,
    };
    write_records(path, Some(header), &records)
}

/// Loads `y` records; absent cells are missing. Dimensions come from the
/// header when present, else from `ids` and `dims`.
pub fn load_observations(path: &Path, ids: &IdMap, dims: Option<Header>) -> Result<Observations> {
    let file: RecordFile<ObservationRecord> = read_records(path)?;
    let dims = file
        .header
        .or(dims)
        .ok_or_else(|| parse_err(path, 1, "no header and no dimensions supplied"))?;
    if dims.m != ids.len() {
        return Err(parse_err(
            path,
            1,
            format!("M={} but {} ids are known", dims.m, ids.len()),
        ));
    }
    let mut obs = Observations::missing(dims.t, dims.m);
    for (line, rec) in file.records {
        let t = time_index(path, line, rec.t, Some(dims.t))?;
        let m = lookup(path, line, ids, &rec.m)?;
        if rec.y >= dims.s {
            return Err(parse_err(
                path,
                line,
                format!("y={} outside 0..{}", rec.y, dims.s),
            ));
        }
        if obs.get(t, m).is_some() {
            return Err(parse_err(
                path,
                line,
                format!("duplicate observation for ({}, {})", rec.t, rec.m),
            ));
        }
        obs.set(t, m, Some(rec.y));
    }
    Ok(obs)
}

pub fn write_observations(
    path: &Path,
    obs: &Observations,
    ids: &IdMap,
    num_states: usize,
) -> Result<()> {
    let mut records = Vec::with_capacity(obs.observed_count());
    for t in 0..obs.horizon() {
        for m in 0..obs.num_individuals() {
            if let Some(y) = obs.get(t, m) {
                records.push(ObservationRecord {
                    t: t + 1,
                    m: ids.id(m).clone(),
                    y,
                });
            }
        }
    }
    let header = Header {
        m: obs.num_individuals(),
        t: obs.horizon(),
        s: num_states,
    };
    write_records(path, Some(header), &records)
}

/// Loads a complete `T x M` state grid.
pub fn load_states(path: &Path, ids: &IdMap) -> Result<Vec<Vec<usize>>> {
    let file: RecordFile<StateRecord> = read_records(path)?;
    let dims = file
        .header
        .ok_or_else(|| parse_err(path, 1, "state files need a header"))?;
    let mut grid = vec![vec![None; dims.m]; dims.t];
    for (line, rec) in file.records {
        let t = time_index(path, line, rec.t, Some(dims.t))?;
        let m = lookup(path, line, ids, &rec.m)?;
        if rec.x >= dims.s {
            return Err(parse_err(
                path,
                line,
                format!("x={} outside 0..{}", rec.x, dims.s),
            ));
        }
        grid[t][m] = Some(rec.x);
    }
    grid.into_iter()
        .enumerate()
        .map(|(t, row)| {
            row.into_iter()
                .enumerate()
                .map(|(m, x)| {
                    x.ok_or_else(|| {
                        parse_err(path, 0, format!("no state for t={} m={}", t + 1, ids.id(m)))
                    })
                })
                .collect()
        })
        .collect()
}

pub fn write_states(
    path: &Path,
    states: &[Vec<usize>],
    ids: &IdMap,
    num_states: usize,
) -> Result<()> {
    let records: Vec<StateRecord> = states
        .iter()
        .enumerate()
        .flat_map(|(t, row)| {
            row.iter().enumerate().map(move |(m, &x)| StateRecord {
                t: t + 1,
                m: ids.id(m).clone(),
                x,
            })
        })
        .collect();
    let header = Header {
        m: states.first().map_or(0, Vec::len),
        t: states.len(),
        s: num_states,
    };
    write_records(path, Some(header), &records)
}

/// Evaluation target cells `(t, m)`, 0-based.
pub fn load_ledger(path: &Path, ids: &IdMap) -> Result<Vec<(usize, usize)>> {
    let file: RecordFile<CellRecord> = read_records(path)?;
    let horizon = file.header.map(|h| h.t);
    file.records
        .iter()
        .map(|(line, rec)| {
            Ok((
                time_index(path, *line, rec.t, horizon)?,
                lookup(path, *line, ids, &rec.m)?,
            ))
        })
        .collect()
}

pub fn write_ledger(path: &Path, cells: &[(usize, usize)], ids: &IdMap) -> Result<()> {
    let records: Vec<CellRecord> = cells
        .iter()
        .map(|&(t, m)| CellRecord {
            t: t + 1,
            m: ids.id(m).clone(),
        })
        .collect();
    write_records(path, None, &records)
}

/// Per-cell real values such as scores or posterior probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellValue {
    pub t: usize,
    pub m: usize,
    pub value: f64,
}

/// Writes `{"t", "m", key}` records; `key` is typically `score` or `p`.
pub fn write_cell_values(path: &Path, key: &str, values: &[CellValue], ids: &IdMap) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for v in values {
        let mut obj = serde_json::Map::new();
        obj.insert("t".into(), Value::from(v.t + 1));
        obj.insert(
            "m".into(),
            serde_json::to_value(ids.id(v.m)).expect("ids serialize"),
        );
        obj.insert(key.into(), Value::from(v.value));
        writeln!(out, "{}", Value::Object(obj)).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads records written by [`write_cell_values`] with key `score` or `p`.
pub fn load_cell_values(path: &Path, ids: &IdMap) -> Result<Vec<CellValue>> {
    let file: RecordFile<ValueRecord> = read_records(path)?;
    file.records
        .iter()
        .map(|(line, rec)| {
            if !rec.value.is_finite() {
                return Err(parse_err(path, *line, "value must be finite"));
            }
            Ok(CellValue {
                t: time_index(path, *line, rec.t, None)?,
                m: lookup(path, *line, ids, &rec.m)?,
                value: rec.value,
            })
        })
        .collect()
}

/// Writes any serializable value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}
