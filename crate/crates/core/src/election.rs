//! Cluster-head election within a grid cell.
//!
//! Two policies are provided. `RandomRotation` is the classic LEACH
//! behaviour: a seeded uniform pick among members that have not served yet
//! in the current epoch. `WeightedDensityEnergy` weights every alive member
//! by `density * residual_energy`, where density counts the alive nodes
//! within `density_range` including the candidate itself, and takes the
//! argmax. Ties always go to the lowest node id.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field::GridCell;
use crate::ids::{CellId, NodeId};
use crate::node::{NodeSet, SensorNode};

#[derive(Debug, Error, PartialEq)]
pub enum ElectionError {
    #[error("density queried for dead node {0}")]
    DeadNode(NodeId),
    #[error("cell {0} has no alive member to elect")]
    NoAliveMember(CellId),
    #[error("density range must be positive and finite, got {0}")]
    InvalidDensityRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadPolicy {
    RandomRotation,
    WeightedDensityEnergy { density_range: f64 },
}

impl HeadPolicy {
    pub fn weighted(density_range: f64) -> Result<Self, ElectionError> {
        if density_range.is_finite() && density_range > 0.0 {
            Ok(Self::WeightedDensityEnergy { density_range })
        } else {
            Err(ElectionError::InvalidDensityRange(density_range))
        }
    }
}

/// Alive nodes within the node's own transmission range, itself included.
pub fn node_density(node: &SensorNode, nodes: &NodeSet) -> Result<usize, ElectionError> {
    density_within(node, nodes, node.transmission_range)
}

pub fn density_within(node: &SensorNode, nodes: &NodeSet, range: f64) -> Result<usize, ElectionError> {
    if !node.is_alive() {
        return Err(ElectionError::DeadNode(node.id));
    }
    let count = nodes
        .alive()
        .filter(|other| other.id != node.id && other.position.distance(&node.position) <= range)
        .count();
    Ok(count + 1)
}

fn alive_members<'a>(cell: &GridCell, nodes: &'a NodeSet) -> Vec<&'a SensorNode> {
    cell.members
        .iter()
        .filter_map(|&id| nodes.get(id))
        .filter(|n| n.is_alive())
        .collect()
}

/// Per-cell RNG so that elections in different cells are independent but
/// each is a pure function of `(seed, cell)`.
fn cell_rng(seed: u64, cell: CellId) -> ChaCha8Rng {
    let mixed = seed ^ (u64::from(cell.0) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(mixed)
}

pub fn elect_head(
    cell: &GridCell,
    nodes: &NodeSet,
    policy: &HeadPolicy,
    seed: u64,
) -> Result<NodeId, ElectionError> {
    elect_head_excluding(cell, nodes, policy, seed, &BTreeSet::new())
}

/// Like [`elect_head`], but `RandomRotation` skips members in `served`
/// unless every alive member has already served. The weighted policy
/// ignores `served`.
pub fn elect_head_excluding(
    cell: &GridCell,
    nodes: &NodeSet,
    policy: &HeadPolicy,
    seed: u64,
    served: &BTreeSet<NodeId>,
) -> Result<NodeId, ElectionError> {
    let members = alive_members(cell, nodes);
    if members.is_empty() {
        return Err(ElectionError::NoAliveMember(cell.id));
    }
    match *policy {
        HeadPolicy::WeightedDensityEnergy { density_range } => {
            let mut best: Option<(f64, NodeId)> = None;
            for m in members {
                let density = density_within(m, nodes, density_range)?;
                let weight = density as f64 * m.residual_energy();
                // members iterate in ascending id, so strict > keeps the lowest id on ties
                if best.map_or(true, |(w, _)| weight > w) {
                    best = Some((weight, m.id));
                }
            }
            Ok(best.expect("non-empty members").1)
        }
        HeadPolicy::RandomRotation => {
            let fresh: Vec<NodeId> = members
                .iter()
                .map(|m| m.id)
                .filter(|id| !served.contains(id))
                .collect();
            let pool = if fresh.is_empty() {
                members.iter().map(|m| m.id).collect()
            } else {
                fresh
            };
            let mut rng = cell_rng(seed, cell.id);
            Ok(*pool.choose(&mut rng).expect("non-empty pool"))
        }
    }
}

/// Tracks which members have served as head in the current epoch, so
/// successive elections under `RandomRotation` rotate through a cell.
#[derive(Debug, Clone, Default)]
pub struct HeadRotation {
    served: BTreeSet<NodeId>,
    round: u64,
}

impl HeadRotation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Elects the head for the next round. Once every alive member has
    /// served, the epoch resets.
    pub fn next_head(
        &mut self,
        cell: &GridCell,
        nodes: &NodeSet,
        policy: &HeadPolicy,
        seed: u64,
    ) -> Result<NodeId, ElectionError> {
        let members: BTreeSet<NodeId> = alive_members(cell, nodes).iter().map(|m| m.id).collect();
        if !members.is_empty() && members.is_subset(&self.served) {
            self.served.clear();
        }
        let round_seed = seed.wrapping_add(self.round.wrapping_mul(0xD1B5_4A32_D192_ED03));
        let head = elect_head_excluding(cell, nodes, policy, round_seed, &self.served)?;
        self.served.insert(head);
        self.round += 1;
        Ok(head)
    }

    pub fn served(&self) -> &BTreeSet<NodeId> {
        &self.served
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};

    fn node(id: u32, x: f64, energy: f64, range: f64) -> SensorNode {
        SensorNode::new(NodeId(id), Point::new(x, 0.5), energy, range).unwrap()
    }

    fn cell_of(ids: &[u32]) -> GridCell {
        GridCell {
            id: CellId(0),
            row: 0,
            col: 0,
            bounds: Rect::new(0.0, 0.0, 100.0, 100.0),
            members: ids.iter().map(|&i| NodeId(i)).collect(),
            weight: 0.0,
            head: None,
        }
    }

    #[test]
    fn isolated_node_has_density_one() {
        let nodes = NodeSet::from_nodes([node(0, 0.0, 1.0, 1.0), node(1, 50.0, 1.0, 1.0)]).unwrap();
        assert_eq!(node_density(nodes.get(NodeId(0)).unwrap(), &nodes), Ok(1));
    }

    #[test]
    fn all_in_range_gives_n() {
        let nodes = NodeSet::from_nodes((0..5).map(|i| node(i, i as f64, 1.0, 10.0))).unwrap();
        for n in nodes.iter() {
            assert_eq!(node_density(n, &nodes), Ok(5));
        }
    }

    #[test]
    fn partial_density_matches_brute_force() {
        // node 0 at x=0 with range 2.5 reaches x=1 and x=2 only
        let xs = [0.0, 1.0, 2.0, 7.0, 9.0];
        let nodes = NodeSet::from_nodes(xs.iter().enumerate().map(|(i, &x)| node(i as u32, x, 1.0, 2.5))).unwrap();
        let me = nodes.get(NodeId(0)).unwrap();
        let brute = xs.iter().filter(|&&x| (x - 0.0f64).abs() <= 2.5).count();
        assert_eq!(brute, 3);
        assert_eq!(node_density(me, &nodes), Ok(brute));
    }

    #[test]
    fn dead_nodes_have_no_density_and_are_not_counted() {
        let nodes = NodeSet::from_nodes([node(0, 0.0, 1.0, 5.0), node(1, 1.0, 0.0, 5.0)]).unwrap();
        assert_eq!(node_density(nodes.get(NodeId(0)).unwrap(), &nodes), Ok(1));
        assert_eq!(
            node_density(nodes.get(NodeId(1)).unwrap(), &nodes),
            Err(ElectionError::DeadNode(NodeId(1)))
        );
    }

    #[test]
    fn weighted_election() {
        let policy = HeadPolicy::weighted(10.0).unwrap();
        let nodes = NodeSet::from_nodes([node(0, 0.0, 5.0, 1.0), node(1, 1.0, 9.0, 1.0)]).unwrap();
        assert_eq!(elect_head(&cell_of(&[0, 1]), &nodes, &policy, 0), Ok(NodeId(1)));
        assert_eq!(elect_head(&cell_of(&[0]), &nodes, &policy, 0), Ok(NodeId(0)));

        let tied = NodeSet::from_nodes([node(4, 0.0, 7.0, 1.0), node(2, 1.0, 7.0, 1.0)]).unwrap();
        assert_eq!(elect_head(&cell_of(&[2, 4]), &tied, &policy, 0), Ok(NodeId(2)));
    }

    #[test]
    fn no_alive_member_is_an_error() {
        let nodes = NodeSet::from_nodes([node(0, 0.0, 0.0, 1.0)]).unwrap();
        let policy = HeadPolicy::RandomRotation;
        assert_eq!(
            elect_head(&cell_of(&[0]), &nodes, &policy, 1),
            Err(ElectionError::NoAliveMember(CellId(0)))
        );
        assert_eq!(elect_head(&cell_of(&[]), &nodes, &policy, 1), Err(ElectionError::NoAliveMember(CellId(0))));
    }

    #[test]
    fn density_range_must_be_positive() {
        assert!(HeadPolicy::weighted(0.0).is_err());
        assert!(HeadPolicy::weighted(f64::NAN).is_err());
    }

    #[test]
    fn rotation_serves_everyone_once_per_epoch() {
        let nodes = NodeSet::from_nodes((0..6).map(|i| node(i, i as f64, 10.0, 1.0))).unwrap();
        let cell = cell_of(&[0, 1, 2, 3, 4, 5]);
        let mut rot = HeadRotation::new();
        let mut seen = BTreeSet::new();
        for _ in 0..6 {
            assert!(seen.insert(rot.next_head(&cell, &nodes, &HeadPolicy::RandomRotation, 42).unwrap()));
        }
        // a new epoch starts after everyone served
        rot.next_head(&cell, &nodes, &HeadPolicy::RandomRotation, 42).unwrap();
        assert_eq!(rot.served().len(), 1);
    }

    #[test]
    fn random_rotation_is_reproducible() {
        let nodes = NodeSet::from_nodes((0..20).map(|i| node(i, i as f64, 10.0, 1.0))).unwrap();
        let cell = cell_of(&(0..20).collect::<Vec<_>>());
        let a = elect_head(&cell, &nodes, &HeadPolicy::RandomRotation, 99).unwrap();
        let b = elect_head(&cell, &nodes, &HeadPolicy::RandomRotation, 99).unwrap();
        assert_eq!(a, b);
        let picks: BTreeSet<_> = (0..32)
            .map(|s| elect_head(&cell, &nodes, &HeadPolicy::RandomRotation, s).unwrap())
            .collect();
        assert!(picks.len() > 1);
    }
}
