//! Sensor trace tables.
//!
//! The on-disk form is CSV with the header `node_id,x,y,t,value`, one
//! reading per row. Every node must carry a reading for every tick
//! `0..ticks` and keep the same position throughout.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::Point;
use crate::ids::NodeId;

const HEADER: [&str; 5] = ["node_id", "x", "y", "t", "value"];

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("cannot read trace {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("trace header must be `node_id,x,y,t,value`, got `{0}`")]
    BadHeader(String),
    #[error("trace line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("trace line {line}: non-finite {column}")]
    NonFinite { line: u64, column: &'static str },
    #[error("node {node} has two readings at tick {tick}")]
    Duplicate { node: NodeId, tick: usize },
    #[error("node {node} changes position at tick {tick}")]
    Moved { node: NodeId, tick: usize },
    #[error("node {node} has no reading at tick {tick}")]
    Missing { node: NodeId, tick: usize },
    #[error("trace has no readings")]
    Empty,
}

#[derive(Debug, Deserialize)]
struct Row {
    node_id: u32,
    x: f64,
    y: f64,
    t: usize,
    value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrace {
    pub position: Point,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    nodes: BTreeMap<NodeId, NodeTrace>,
    ticks: usize,
}

impl Trace {
    /// Builds a trace from complete per-node series, which must all have
    /// the same non-zero length.
    pub fn from_series<I>(series: I) -> Result<Self, TraceError>
    where
        I: IntoIterator<Item = (NodeId, Point, Vec<f64>)>,
    {
        let mut nodes = BTreeMap::new();
        let mut ticks = None;
        for (id, position, values) in series {
            if !position.is_finite() {
                return Err(TraceError::NonFinite { line: 0, column: "position" });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(TraceError::NonFinite { line: 0, column: "value" });
            }
            let len = *ticks.get_or_insert(values.len());
            if values.len() != len {
                let tick = values.len().min(len);
                return Err(TraceError::Missing { node: id, tick });
            }
            if nodes.insert(id, NodeTrace { position, values }).is_some() {
                return Err(TraceError::Duplicate { node: id, tick: 0 });
            }
        }
        match ticks {
            None | Some(0) => Err(TraceError::Empty),
            Some(ticks) => Ok(Self { nodes, ticks }),
        }
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| TraceError::Malformed {
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        if header.iter().ne(HEADER) {
            return Err(TraceError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
        }

        let mut readings: BTreeMap<NodeId, (Point, BTreeMap<usize, f64>)> = BTreeMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| TraceError::Malformed {
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let row: Row = record.deserialize(Some(&header)).map_err(|e| TraceError::Malformed {
                line,
                reason: e.to_string(),
            })?;
            for (column, v) in [("x", row.x), ("y", row.y), ("value", row.value)] {
                if !v.is_finite() {
                    return Err(TraceError::NonFinite { line, column });
                }
            }
            let id = NodeId(row.node_id);
            let position = Point::new(row.x, row.y);
            let (pos, series) = readings.entry(id).or_insert_with(|| (position, BTreeMap::new()));
            if *pos != position {
                return Err(TraceError::Moved { node: id, tick: row.t });
            }
            match series.entry(row.t) {
                Entry::Occupied(_) => return Err(TraceError::Duplicate { node: id, tick: row.t }),
                Entry::Vacant(slot) => {
                    slot.insert(row.value);
                }
            }
        }

        let ticks = readings
            .values()
            .filter_map(|(_, s)| s.keys().next_back())
            .max()
            .map(|&t| t + 1)
            .ok_or(TraceError::Empty)?;
        let mut nodes = BTreeMap::new();
        for (id, (position, series)) in readings {
            if let Some(tick) = (0..ticks).find(|t| !series.contains_key(t)) {
                return Err(TraceError::Missing { node: id, tick });
            }
            nodes.insert(
                id,
                NodeTrace {
                    position,
                    values: series.into_values().collect(),
                },
            );
        }
        Ok(Self { nodes, ticks })
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        Self::from_reader(text.as_bytes())
    }

    pub fn from_path(path: &Path) -> Result<Self, TraceError> {
        let file = std::fs::File::open(path).map_err(|e| TraceError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeTrace> {
        self.nodes.get(&id)
    }

    pub fn value(&self, id: NodeId, tick: usize) -> Option<f64> {
        self.nodes.get(&id)?.values.get(tick).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &NodeTrace)> {
        self.nodes.iter().map(|(&id, t)| (id, t))
    }

    /// CSV text that [`Trace::parse`] reads back to an equal trace.
    pub fn to_csv(&self) -> String {
        let mut out = HEADER.join(",");
        out.push('\n');
        for t in 0..self.ticks {
            for (id, node) in &self.nodes {
                let _ = writeln!(out, "{},{},{},{},{}", id, node.position.x, node.position.y, t, node.values[t]);
            }
        }
        out
    }
}
