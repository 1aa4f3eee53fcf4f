//! Overlapping cluster coverage and exclusive reassignment.
//!
//! A cluster covers every alive node within `coverage_radius` of its
//! centroid. Nodes covered by more than one cluster would otherwise report
//! once per covering cluster; [`assign_exclusive`] keeps only the nearest.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::field::Field;
use crate::ids::{ClusterId, NodeId};
use crate::tree::Cluster;

#[derive(Debug, Error, PartialEq)]
pub enum CoverageError {
    #[error("coverage radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("alive node {0} is not covered by any cluster")]
    Uncovered(NodeId),
    #[error("coverage refers to unknown cluster {0}")]
    UnknownCluster(ClusterId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    coverage_radius: f64,
    covers: BTreeMap<NodeId, BTreeSet<ClusterId>>,
}

impl CoverageMap {
    pub fn coverage_radius(&self) -> f64 {
        self.coverage_radius
    }

    pub fn covers(&self, node: NodeId) -> Option<&BTreeSet<ClusterId>> {
        self.covers.get(&node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &BTreeSet<ClusterId>)> {
        self.covers.iter().map(|(&n, c)| (n, c))
    }

    /// Nodes covered by two or more clusters.
    pub fn overlap_set(&self) -> BTreeSet<NodeId> {
        self.covers
            .iter()
            .filter(|(_, c)| c.len() >= 2)
            .map(|(&n, _)| n)
            .collect()
    }
}

pub fn detect_overlaps(field: &Field, clusters: &[Cluster], coverage_radius: f64) -> Result<CoverageMap, CoverageError> {
    if !(coverage_radius.is_finite() && coverage_radius > 0.0) {
        return Err(CoverageError::InvalidRadius(coverage_radius));
    }
    let mut covers = BTreeMap::new();
    for node in field.nodes().alive() {
        let set: BTreeSet<ClusterId> = clusters
            .iter()
            .filter(|c| node.position.distance(&c.centroid) <= coverage_radius)
            .map(|c| c.id)
            .collect();
        if set.is_empty() {
            return Err(CoverageError::Uncovered(node.id));
        }
        covers.insert(node.id, set);
    }
    Ok(CoverageMap {
        coverage_radius,
        covers,
    })
}

/// Maps each covered node to its nearest covering centroid, lowest cluster
/// id on ties.
pub fn assign_exclusive(
    coverage: &CoverageMap,
    clusters: &[Cluster],
    field: &Field,
) -> Result<BTreeMap<NodeId, ClusterId>, CoverageError> {
    let by_id: BTreeMap<ClusterId, &Cluster> = clusters.iter().map(|c| (c.id, c)).collect();
    let mut out = BTreeMap::new();
    for (node, set) in coverage.iter() {
        let position = field
            .nodes()
            .get(node)
            .map(|n| n.position)
            .ok_or(CoverageError::Uncovered(node))?;
        let mut best: Option<(f64, ClusterId)> = None;
        for &id in set {
            let cluster = by_id.get(&id).ok_or(CoverageError::UnknownCluster(id))?;
            let d = position.distance(&cluster.centroid);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, id));
            }
        }
        let (_, id) = best.ok_or(CoverageError::Uncovered(node))?;
        out.insert(node, id);
    }
    Ok(out)
}
