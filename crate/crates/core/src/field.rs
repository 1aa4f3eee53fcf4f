//! Partitioning of a sensor field into a uniform grid of cells.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::election::{elect_head, ElectionError, HeadPolicy};
use crate::geometry::{Point, Rect};
use crate::ids::{CellId, NodeId};
use crate::node::{NodeSet, SensorNode};

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
    #[error("field bounds {0} must be finite with positive area")]
    InvalidBounds(Rect),
    #[error("node {id} at {position} lies outside the field {bounds}")]
    NodeOutsideBounds {
        id: NodeId,
        position: Point,
        bounds: Rect,
    },
    #[error("node id {0} appears more than once")]
    DuplicateNode(NodeId),
    #[error("cell member {0} is not a known node")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub id: CellId,
    pub row: usize,
    pub col: usize,
    pub bounds: Rect,
    pub members: BTreeSet<NodeId>,
    pub weight: f64,
    pub head: Option<NodeId>,
}

impl GridCell {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// A deployment region tiled by square cells of side `cell_size`.
///
/// Cells are stored row-major; the last row and column may extend past the
/// field bounds when the field is not a whole multiple of the cell size.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    bounds: Rect,
    cell_size: f64,
    rows: usize,
    cols: usize,
    cells: Vec<GridCell>,
    nodes: NodeSet,
    base_station: Point,
    cell_of: BTreeMap<NodeId, CellId>,
}

/// Sum of the residual energy of a cell's alive members.
pub fn compute_cell_weight(cell: &GridCell, nodes: &NodeSet) -> Result<f64, FieldError> {
    let mut weight = 0.0;
    for &id in &cell.members {
        let node = nodes.get(id).ok_or(FieldError::UnknownNode(id))?;
        if node.is_alive() {
            weight += node.residual_energy();
        }
    }
    Ok(weight)
}

/// Tiles `bounds` with `cell_size` cells and assigns every alive node to the
/// unique cell containing it. Dead nodes are kept in the node set but belong
/// to no cell.
pub fn partition_field(
    bounds: Rect,
    cell_size: f64,
    base_station: Point,
    nodes: Vec<SensorNode>,
) -> Result<Field, FieldError> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(FieldError::InvalidCellSize(cell_size));
    }
    if !bounds.is_finite() || bounds.area() <= 0.0 {
        return Err(FieldError::InvalidBounds(bounds));
    }
    for node in &nodes {
        if !bounds.contains(&node.position) {
            return Err(FieldError::NodeOutsideBounds {
                id: node.id,
                position: node.position,
                bounds,
            });
        }
    }
    let nodes = NodeSet::from_nodes(nodes).map_err(FieldError::DuplicateNode)?;

    let cols = (bounds.width() / cell_size).ceil() as usize;
    let rows = (bounds.height() / cell_size).ceil() as usize;
    let mut cells = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let x0 = bounds.min.x + col as f64 * cell_size;
            let y0 = bounds.min.y + row as f64 * cell_size;
            cells.push(GridCell {
                id: CellId((row * cols + col) as u32),
                row,
                col,
                bounds: Rect::new(x0, y0, x0 + cell_size, y0 + cell_size),
                members: BTreeSet::new(),
                weight: 0.0,
                head: None,
            });
        }
    }

    let mut cell_of = BTreeMap::new();
    for node in nodes.alive() {
        let col = grid_index(node.position.x, bounds.min.x, cell_size, cols);
        let row = grid_index(node.position.y, bounds.min.y, cell_size, rows);
        let cell = &mut cells[row * cols + col];
        debug_assert!(cell.bounds.contains(&node.position));
        cell.members.insert(node.id);
        cell_of.insert(node.id, cell.id);
    }
    for cell in &mut cells {
        cell.weight = compute_cell_weight(cell, &nodes)?;
    }

    Ok(Field {
        bounds,
        cell_size,
        rows,
        cols,
        cells,
        nodes,
        base_station,
        cell_of,
    })
}

/// Index of the half-open interval containing `v`. The division can land one
/// slot off near a boundary, so the result is nudged until the interval
/// built from it actually contains `v`.
fn grid_index(v: f64, origin: f64, size: f64, count: usize) -> usize {
    let mut idx = (((v - origin) / size).floor().max(0.0) as usize).min(count - 1);
    while idx > 0 && v < origin + idx as f64 * size {
        idx -= 1;
    }
    while idx + 1 < count && v >= origin + (idx + 1) as f64 * size {
        idx += 1;
    }
    idx
}

impl Field {
    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn base_station(&self) -> Point {
        self.base_station
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> Option<&GridCell> {
        self.cells.get(id.0 as usize)
    }

    pub fn cell_at(&self, row: usize, col: usize) -> Option<&GridCell> {
        (row < self.rows && col < self.cols).then(|| &self.cells[row * self.cols + col])
    }

    pub fn nonempty_cells(&self) -> impl Iterator<Item = &GridCell> {
        self.cells.iter().filter(|c| !c.is_empty())
    }

    /// The cell an alive node was assigned to.
    pub fn cell_of(&self, node: NodeId) -> Option<CellId> {
        self.cell_of.get(&node).copied()
    }

    /// Returns a copy with every nonempty cell's head elected under `policy`.
    pub fn with_heads(&self, policy: &HeadPolicy, seed: u64) -> Result<Field, ElectionError> {
        let mut field = self.clone();
        for cell in field.cells.iter_mut().filter(|c| !c.is_empty()) {
            cell.head = Some(elect_head(cell, &self.nodes, policy, seed)?);
        }
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: u32, x: f64, y: f64, energy: f64) -> SensorNode {
        SensorNode::new(NodeId(id), Point::new(x, y), energy, 10.0).unwrap()
    }

    fn square(side: f64) -> Rect {
        Rect::new(0.0, 0.0, side, side)
    }

    #[test]
    fn sixteen_cells_in_four_by_four() {
        let f = partition_field(square(100.0), 25.0, Point::default(), vec![]).unwrap();
        assert_eq!((f.rows(), f.cols(), f.cells().len()), (4, 4, 16));
    }

    #[test]
    fn origin_node_lands_in_first_cell() {
        let f = partition_field(square(100.0), 25.0, Point::default(), vec![node(0, 0.0, 0.0, 1.0)])
            .unwrap();
        let c = f.cell(f.cell_of(NodeId(0)).unwrap()).unwrap();
        assert_eq!((c.row, c.col), (0, 0));
    }

    #[test]
    fn boundary_node_goes_right() {
        let f = partition_field(square(100.0), 25.0, Point::default(), vec![node(0, 25.0, 0.0, 1.0)])
            .unwrap();
        let c = f.cell(f.cell_of(NodeId(0)).unwrap()).unwrap();
        assert_eq!((c.row, c.col), (0, 1));
    }

    #[test]
    fn ragged_field_rounds_cell_count_up() {
        let f = partition_field(Rect::new(0.0, 0.0, 30.0, 10.0), 25.0, Point::default(), vec![])
            .unwrap();
        assert_eq!((f.rows(), f.cols()), (1, 2));
        assert_eq!(f.cell(CellId(1)).unwrap().bounds, Rect::new(25.0, 0.0, 50.0, 25.0));
    }

    #[test]
    fn bad_inputs_get_distinct_errors() {
        assert_eq!(
            partition_field(square(10.0), 0.0, Point::default(), vec![]),
            Err(FieldError::InvalidCellSize(0.0))
        );
        assert!(matches!(
            partition_field(square(10.0), 5.0, Point::default(), vec![node(1, 10.0, 1.0, 1.0)]),
            Err(FieldError::NodeOutsideBounds { id: NodeId(1), .. })
        ));
        assert_eq!(
            partition_field(
                square(10.0),
                5.0,
                Point::default(),
                vec![node(2, 1.0, 1.0, 1.0), node(2, 2.0, 1.0, 1.0)]
            ),
            Err(FieldError::DuplicateNode(NodeId(2)))
        );
    }

    #[test]
    fn dead_nodes_are_not_members() {
        let f = partition_field(
            square(10.0),
            5.0,
            Point::default(),
            vec![node(0, 1.0, 1.0, 10.0), node(1, 2.0, 2.0, 0.0)],
        )
        .unwrap();
        let c = f.cell(CellId(0)).unwrap();
        assert_eq!(c.members.len(), 1);
        assert_eq!(f.cell_of(NodeId(1)), None);
    }

    #[test]
    fn cell_weights() {
        let nodes = NodeSet::from_nodes([node(0, 1.0, 1.0, 10.0), node(1, 2.0, 2.0, 20.0), node(2, 3.0, 3.0, 0.0)])
            .unwrap();
        let mut cell = GridCell {
            id: CellId(0),
            row: 0,
            col: 0,
            bounds: square(5.0),
            members: BTreeSet::new(),
            weight: 0.0,
            head: None,
        };
        assert_eq!(compute_cell_weight(&cell, &nodes), Ok(0.0));
        cell.members.extend([NodeId(0), NodeId(1)]);
        assert_eq!(compute_cell_weight(&cell, &nodes), Ok(30.0));
        cell.members = [NodeId(0), NodeId(2)].into();
        assert_eq!(compute_cell_weight(&cell, &nodes), Ok(10.0));
        cell.members.insert(NodeId(9));
        assert_eq!(compute_cell_weight(&cell, &nodes), Err(FieldError::UnknownNode(NodeId(9))));
    }
}
