use std::collections::BTreeMap;

use crate::geometry::Point;
use crate::ids::NodeId;

/// A fixed-position sensor with a finite energy budget.
///
/// `alive` is derived from the residual energy and is false exactly when
/// the budget is exhausted.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorNode {
    pub id: NodeId,
    pub position: Point,
    pub transmission_range: f64,
    residual_energy: f64,
    last_reported: Option<f64>,
}

impl SensorNode {
    /// Returns `None` for a negative or non-finite energy, a non-positive
    /// range or a non-finite position.
    pub fn new(id: NodeId, position: Point, energy: f64, transmission_range: f64) -> Option<Self> {
        let valid = energy.is_finite()
            && energy >= 0.0
            && transmission_range.is_finite()
            && transmission_range > 0.0
            && position.is_finite();
        valid.then_some(Self {
            id,
            position,
            transmission_range,
            residual_energy: energy,
            last_reported: None,
        })
    }

    pub fn residual_energy(&self) -> f64 {
        self.residual_energy
    }

    pub fn is_alive(&self) -> bool {
        self.residual_energy > 0.0
    }

    pub fn last_reported(&self) -> Option<f64> {
        self.last_reported
    }

    pub fn with_last_reported(mut self, value: Option<f64>) -> Self {
        self.last_reported = value;
        self
    }

    pub(crate) fn set_last_reported(&mut self, value: f64) {
        self.last_reported = Some(value);
    }

    /// Deducts `amount`, clamping the residue to exactly zero once it falls
    /// below rounding noise so that `alive` flips deterministically.
    pub(crate) fn drain(&mut self, amount: f64) {
        let left = self.residual_energy - amount;
        self.residual_energy = if left <= amount * 1e-12 { 0.0 } else { left };
    }

    pub fn with_energy(mut self, energy: f64) -> Self {
        self.residual_energy = energy.max(0.0);
        self
    }
}

/// Nodes keyed by id. Iteration is always in ascending id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeSet {
    nodes: BTreeMap<NodeId, SensorNode>,
}

impl NodeSet {
    /// Collects nodes, returning the first repeated id on collision.
    pub fn from_nodes<I: IntoIterator<Item = SensorNode>>(nodes: I) -> Result<Self, NodeId> {
        let mut map = BTreeMap::new();
        for node in nodes {
            let id = node.id;
            if map.insert(id, node).is_some() {
                return Err(id);
            }
        }
        Ok(Self { nodes: map })
    }

    pub fn get(&self, id: NodeId) -> Option<&SensorNode> {
        self.nodes.get(&id)
    }

    pub(crate) fn get_mut(&mut self, id: NodeId) -> Option<&mut SensorNode> {
        self.nodes.get_mut(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SensorNode> {
        self.nodes.values()
    }

    pub fn alive(&self) -> impl Iterator<Item = &SensorNode> {
        self.nodes.values().filter(|n| n.is_alive())
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
