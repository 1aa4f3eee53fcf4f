//! Scenario configuration in a flat `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear at
//! most once. Per-node starting energies use keys of the form
//! `energy.<node id>`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::election::HeadPolicy;
use crate::geometry::{Point, Rect};
use crate::ids::NodeId;
use crate::sim::ledger::DEFAULT_UNIT_COST;
use crate::tree::ClusterBounds;
use crate::Aggregate;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid value `{value}` for key `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
}

impl ConfigError {
    /// The key the error refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::UnknownKey { key, .. }
            | ConfigError::DuplicateKey { key, .. }
            | ConfigError::InvalidValue { key, .. } => Some(key),
            ConfigError::MissingKey(key) => Some(key),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolicyKind {
    #[default]
    Weighted,
    Random,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Weighted => "weighted",
            PolicyKind::Random => "random",
        })
    }
}

/// Everything needed to rebuild and run a scenario, apart from the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub field_width: f64,
    pub field_height: f64,
    pub cell_size: f64,
    pub base_station: Point,
    pub target_clusters: usize,
    pub min_clusters: usize,
    pub max_clusters: usize,
    /// `None` disables splitting.
    pub split_threshold: Option<usize>,
    pub head_policy: PolicyKind,
    /// Falls back to `transmission_range` when absent.
    pub density_range: Option<f64>,
    pub transmission_range: f64,
    pub coverage_radius: f64,
    pub comm_range: f64,
    pub delta: f64,
    /// Reading every node is assumed to have reported before tick 0.
    pub initial_reported: Option<f64>,
    pub unit_cost: f64,
    pub dedup: bool,
    pub seed: u64,
    /// Defaults to the full trace length.
    pub ticks: Option<usize>,
    pub aggregate: Aggregate,
    pub initial_energy: f64,
    pub node_energy: BTreeMap<NodeId, f64>,
    /// Trace path, relative to the config file.
    pub trace: Option<String>,
    pub note: Option<String>,
}

const KEYS: &[&str] = &[
    "field_width",
    "field_height",
    "cell_size",
    "base_x",
    "base_y",
    "target_clusters",
    "min_clusters",
    "max_clusters",
    "split_threshold",
    "head_policy",
    "density_range",
    "transmission_range",
    "coverage_radius",
    "comm_range",
    "delta",
    "initial_reported",
    "unit_cost",
    "dedup",
    "seed",
    "ticks",
    "aggregate",
    "initial_energy",
    "trace",
    "note",
];

impl ScenarioConfig {
    /// A config with every optional key at its default.
    pub fn new(field_width: f64, field_height: f64, cell_size: f64, target_clusters: usize) -> Self {
        Self {
            field_width,
            field_height,
            cell_size,
            base_station: Point::default(),
            target_clusters,
            min_clusters: 1,
            max_clusters: target_clusters,
            split_threshold: None,
            head_policy: PolicyKind::Weighted,
            density_range: None,
            transmission_range: 10.0,
            coverage_radius: field_width.hypot(field_height),
            comm_range: field_width.hypot(field_height),
            delta: 0.0,
            initial_reported: None,
            unit_cost: DEFAULT_UNIT_COST,
            dedup: true,
            seed: 0,
            ticks: None,
            aggregate: Aggregate::Avg,
            initial_energy: 10_000.0,
            node_energy: BTreeMap::new(),
            trace: None,
            note: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: trimmed.to_owned(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: trimmed.to_owned(),
                });
            }
            if !KEYS.contains(&key) && !key.starts_with("energy.") {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_owned(),
                });
            }
            if seen.insert(key.to_owned(), value.to_owned()).is_some() {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_owned(),
                });
            }
        }

        let mut kv = Values(seen);
        let target_clusters = kv.required("target_clusters")?;
        let mut cfg = Self::new(
            kv.required("field_width")?,
            kv.required("field_height")?,
            kv.required("cell_size")?,
            target_clusters,
        );
        cfg.coverage_radius = kv.required("coverage_radius")?;
        cfg.comm_range = kv.required("comm_range")?;
        cfg.base_station = Point::new(kv.optional("base_x")?.unwrap_or(0.0), kv.optional("base_y")?.unwrap_or(0.0));
        cfg.min_clusters = kv.optional("min_clusters")?.unwrap_or(1);
        cfg.max_clusters = kv.optional("max_clusters")?.unwrap_or(target_clusters);
        cfg.split_threshold = kv.optional("split_threshold")?;
        if let Some(p) = kv.take("head_policy") {
            cfg.head_policy = match p.as_str() {
                "weighted" => PolicyKind::Weighted,
                "random" => PolicyKind::Random,
                _ => return Err(invalid("head_policy", &p, "expected `weighted` or `random`")),
            };
        }
        cfg.density_range = kv.optional("density_range")?;
        if let Some(r) = kv.optional("transmission_range")? {
            cfg.transmission_range = r;
        }
        cfg.delta = kv.optional("delta")?.unwrap_or(0.0);
        cfg.initial_reported = kv.optional("initial_reported")?;
        cfg.unit_cost = kv.optional("unit_cost")?.unwrap_or(DEFAULT_UNIT_COST);
        cfg.dedup = kv.optional("dedup")?.unwrap_or(true);
        cfg.seed = kv.optional("seed")?.unwrap_or(0);
        cfg.ticks = kv.optional("ticks")?;
        cfg.aggregate = kv.optional("aggregate")?.unwrap_or_default();
        cfg.initial_energy = kv.optional("initial_energy")?.unwrap_or(cfg.initial_energy);
        cfg.trace = kv.take("trace");
        cfg.note = kv.take("note");
        for (key, value) in std::mem::take(&mut kv.0) {
            // every remaining key is `energy.<id>`
            let id: u32 = key["energy.".len()..]
                .parse()
                .map_err(|_| ConfigError::UnknownKey { line: 0, key: key.clone() })?;
            let energy: f64 = value
                .parse()
                .map_err(|_| invalid(&key, &value, "expected a number"))?;
            cfg.node_energy.insert(NodeId(id), energy);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("field_width", self.field_width)?;
        positive("field_height", self.field_height)?;
        positive("cell_size", self.cell_size)?;
        finite("base_x", self.base_station.x)?;
        finite("base_y", self.base_station.y)?;
        positive("transmission_range", self.transmission_range)?;
        if let Some(r) = self.density_range {
            positive("density_range", r)?;
        }
        positive("coverage_radius", self.coverage_radius)?;
        positive("comm_range", self.comm_range)?;
        non_negative("delta", self.delta)?;
        if let Some(v) = self.initial_reported {
            finite("initial_reported", v)?;
        }
        positive("unit_cost", self.unit_cost)?;
        non_negative("initial_energy", self.initial_energy)?;
        for (id, &e) in &self.node_energy {
            non_negative(&format!("energy.{id}"), e)?;
        }
        if self.min_clusters < 1 {
            return Err(invalid("min_clusters", &self.min_clusters.to_string(), "must be at least 1"));
        }
        if self.max_clusters < self.min_clusters {
            return Err(invalid("max_clusters", &self.max_clusters.to_string(), "must be at least min_clusters"));
        }
        if self.target_clusters < self.min_clusters || self.target_clusters > self.max_clusters {
            return Err(invalid(
                "target_clusters",
                &self.target_clusters.to_string(),
                &format!("must lie in [{}, {}]", self.min_clusters, self.max_clusters),
            ));
        }
        if self.split_threshold == Some(0) {
            return Err(invalid("split_threshold", "0", "must be at least 1"));
        }
        if self.ticks == Some(0) {
            return Err(invalid("ticks", "0", "must be at least 1"));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0.0, 0.0, self.field_width, self.field_height)
    }

    pub fn cluster_bounds(&self) -> ClusterBounds {
        ClusterBounds::new(self.min_clusters, self.max_clusters, self.split_threshold.unwrap_or(usize::MAX))
            .expect("validated config")
    }

    pub fn policy(&self) -> HeadPolicy {
        match self.head_policy {
            PolicyKind::Random => HeadPolicy::RandomRotation,
            PolicyKind::Weighted => HeadPolicy::weighted(self.density_range.unwrap_or(self.transmission_range))
                .expect("validated config"),
        }
    }

    pub fn energy_of(&self, node: NodeId) -> f64 {
        self.node_energy.get(&node).copied().unwrap_or(self.initial_energy)
    }

    /// The same scenario with a different cluster count.
    pub fn with_target(&self, target: usize) -> Self {
        let mut cfg = self.clone();
        cfg.target_clusters = target;
        cfg
    }
}

impl fmt::Display for ScenarioConfig {
    /// Writes every set key; the output parses back to an equal config.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("field_width", &self.field_width);
        kv("field_height", &self.field_height);
        kv("cell_size", &self.cell_size);
        kv("base_x", &self.base_station.x);
        kv("base_y", &self.base_station.y);
        kv("target_clusters", &self.target_clusters);
        kv("min_clusters", &self.min_clusters);
        kv("max_clusters", &self.max_clusters);
        if let Some(t) = self.split_threshold {
            kv("split_threshold", &t);
        }
        kv("head_policy", &self.head_policy);
        if let Some(r) = self.density_range {
            kv("density_range", &r);
        }
        kv("transmission_range", &self.transmission_range);
        kv("coverage_radius", &self.coverage_radius);
        kv("comm_range", &self.comm_range);
        kv("delta", &self.delta);
        if let Some(v) = self.initial_reported {
            kv("initial_reported", &v);
        }
        kv("unit_cost", &self.unit_cost);
        kv("dedup", &self.dedup);
        kv("seed", &self.seed);
        if let Some(t) = self.ticks {
            kv("ticks", &t);
        }
        kv("aggregate", &self.aggregate);
        kv("initial_energy", &self.initial_energy);
        for (id, e) in &self.node_energy {
            kv(&format!("energy.{id}"), e);
        }
        if let Some(t) = &self.trace {
            kv("trace", t);
        }
        if let Some(n) = &self.note {
            kv("note", n);
        }
        f.write_str(&s)
    }
}

impl FromStr for ScenarioConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

struct Values(BTreeMap<String, String>);

impl Values {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn optional<T: FromStr>(&mut self, key: &'static str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| invalid(key, &v, "cannot parse")),
        }
    }

    fn required<T: FromStr>(&mut self, key: &'static str) -> Result<T, ConfigError> {
        self.optional(key)?.ok_or(ConfigError::MissingKey(key))
    }
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: reason.to_owned(),
    }
}

fn finite(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, &v.to_string(), "must be finite"))
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    finite(key, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, &v.to_string(), "must be positive"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    finite(key, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(key, &v.to_string(), "must not be negative"))
    }
}
