//! Grid-based hierarchical clustering index trees over sensor fields.
//!
//! A sensor field is tiled into square grid cells, cells are agglomerated
//! into clusters, oversized clusters are broken up with K-Means and the
//! result is arranged as an index tree rooted at the base station. The
//! [`sim`] module runs threshold-based reporting over that tree and charges
//! every transmission to an energy ledger; [`query`] answers region queries
//! from the values the base station stored.

use std::fmt;
use std::str::FromStr;

pub mod dedup;
pub mod election;
pub mod field;
pub mod geometry;
pub mod ids;
pub mod node;
pub mod query;
pub mod sim;
pub mod tree;

pub use dedup::{assign_exclusive, detect_overlaps, CoverageError, CoverageMap};
pub use election::{elect_head, node_density, ElectionError, HeadPolicy, HeadRotation};
pub use field::{compute_cell_weight, partition_field, Field, FieldError, GridCell};
pub use geometry::{Point, Rect};
pub use ids::{CellId, ClusterId, NodeId};
pub use node::{NodeSet, SensorNode};

/// In-network aggregate applied by headers and by queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Aggregate {
    #[default]
    Avg,
    Min,
    Max,
}

impl Aggregate {
    /// `None` for an empty input.
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        let (&first, rest) = values.split_first()?;
        Some(match self {
            Aggregate::Avg => values.iter().sum::<f64>() / values.len() as f64,
            Aggregate::Min => rest.iter().copied().fold(first, f64::min),
            Aggregate::Max => rest.iter().copied().fold(first, f64::max),
        })
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Avg => "avg",
            Aggregate::Min => "min",
            Aggregate::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown aggregate `{0}` (expected avg, min or max)")]
pub struct ParseAggregateError(pub String);

impl FromStr for Aggregate {
    type Err = ParseAggregateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "avg" => Ok(Aggregate::Avg),
            "min" => Ok(Aggregate::Min),
            "max" => Ok(Aggregate::Max),
            other => Err(ParseAggregateError(other.to_owned())),
        }
    }
}
