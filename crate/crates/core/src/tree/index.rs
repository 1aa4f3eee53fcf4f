//! The hierarchical index tree: base station at the root, cluster headers
//! below it, optional sub-cluster headers for split clusters, and grid cells
//! as leaves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::field::Field;
use crate::geometry::Rect;
use crate::ids::{CellId, ClusterId, NodeId};
use crate::tree::cluster::Cluster;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("no clusters to build a tree from")]
    NoClusters,
    #[error("nonempty cell {0} is not claimed by any cluster")]
    UncoveredCell(CellId),
    #[error("cell {0} is claimed by more than one cluster")]
    DuplicateCell(CellId),
    #[error("cell {0} is not a nonempty cell of the field")]
    UnknownCell(CellId),
    #[error("cluster id {0} is used twice")]
    DuplicateCluster(ClusterId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VertexKind {
    Base,
    Cluster,
    SubCluster,
    Cell,
}

impl fmt::Display for VertexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VertexKind::Base => "base",
            VertexKind::Cluster => "cluster",
            VertexKind::SubCluster => "subcluster",
            VertexKind::Cell => "cell",
        })
    }
}

/// Arena index of a vertex.
pub type VertexIdx = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub kind: VertexKind,
    /// Cluster id for cluster vertices, cell id for leaves, 0 for the root.
    pub id: u32,
    pub header: Option<NodeId>,
    pub parent: Option<VertexIdx>,
    pub children: Vec<VertexIdx>,
    /// Bounding box of all leaf cells below this vertex.
    pub extent: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexTree {
    vertices: Vec<Vertex>,
    clusters: BTreeMap<ClusterId, VertexIdx>,
    leaves: BTreeMap<CellId, VertexIdx>,
}

pub const ROOT: VertexIdx = 0;

impl IndexTree {
    pub fn vertex(&self, idx: VertexIdx) -> &Vertex {
        &self.vertices[idx]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn root(&self) -> &Vertex {
        &self.vertices[ROOT]
    }

    pub fn leaf(&self, cell: CellId) -> Option<VertexIdx> {
        self.leaves.get(&cell).copied()
    }

    pub fn leaf_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.leaves.keys().copied()
    }

    pub fn cluster_vertex(&self, id: ClusterId) -> Option<VertexIdx> {
        self.clusters.get(&id).copied()
    }

    /// Top-level clusters, i.e. the root's children, as `(id, header)`.
    pub fn top_level(&self) -> impl Iterator<Item = (ClusterId, NodeId)> + '_ {
        self.root().children.iter().map(|&i| {
            let v = &self.vertices[i];
            (ClusterId(v.id), v.header.expect("cluster vertices carry a header"))
        })
    }

    /// The root child whose subtree holds `cell`.
    pub fn top_cluster_of(&self, cell: CellId) -> Option<ClusterId> {
        let mut idx = self.leaf(cell)?;
        while let Some(parent) = self.vertices[idx].parent {
            if parent == ROOT {
                return Some(ClusterId(self.vertices[idx].id));
            }
            idx = parent;
        }
        None
    }

    /// Edges from the vertex up to the root.
    pub fn depth(&self, mut idx: VertexIdx) -> usize {
        let mut d = 0;
        while let Some(p) = self.vertices[idx].parent {
            d += 1;
            idx = p;
        }
        d
    }

    /// Leaf cells in the subtree rooted at `idx`, ascending.
    pub fn cells_under(&self, idx: VertexIdx) -> BTreeSet<CellId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![idx];
        while let Some(i) = stack.pop() {
            let v = &self.vertices[i];
            if v.kind == VertexKind::Cell {
                out.insert(CellId(v.id));
            }
            stack.extend(&v.children);
        }
        out
    }

    pub fn height(&self) -> usize {
        self.leaves.values().map(|&l| self.depth(l)).max().unwrap_or(0)
    }

    /// One vertex per line, `depth<TAB>kind<TAB>id<TAB>parent_id`, in
    /// pre-order with children sorted by id. The root's parent is `-`.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![ROOT];
        while let Some(i) = stack.pop() {
            let v = &self.vertices[i];
            let parent = match v.parent {
                Some(p) => self.vertices[p].id.to_string(),
                None => "-".to_owned(),
            };
            let _ = writeln!(out, "{}\t{}\t{}\t{}", self.depth(i), v.kind, v.id, parent);
            // children are stored sorted; push reversed so the smallest pops first
            stack.extend(v.children.iter().rev());
        }
        out
    }

    fn push(&mut self, kind: VertexKind, id: u32, header: Option<NodeId>, parent: VertexIdx, extent: Rect) -> VertexIdx {
        let idx = self.vertices.len();
        self.vertices.push(Vertex {
            kind,
            id,
            header,
            parent: Some(parent),
            children: Vec::new(),
            extent,
        });
        self.vertices[parent].children.push(idx);
        idx
    }
}

fn extent_of(field: &Field, cells: &[CellId]) -> Result<Rect, TreeError> {
    let mut rect: Option<Rect> = None;
    for &c in cells {
        let b = field.cell(c).ok_or(TreeError::UnknownCell(c))?.bounds;
        rect = Some(rect.map_or(b, |r| r.union(&b)));
    }
    Ok(rect.unwrap_or(field.bounds()))
}

/// Builds the tree. Unsplit clusters give `root -> header -> cells`; a split
/// cluster's header stays a direct child of the root and carries its
/// sub-cluster headers, whose leaves are the cells.
pub fn build_index_tree(clusters: &[Cluster], field: &Field) -> Result<IndexTree, TreeError> {
    if clusters.is_empty() {
        return Err(TreeError::NoClusters);
    }
    let nonempty: BTreeSet<CellId> = field.nonempty_cells().map(|c| c.id).collect();
    let mut claimed = BTreeSet::new();
    for cluster in clusters {
        for &c in &cluster.cells {
            if !nonempty.contains(&c) {
                return Err(TreeError::UnknownCell(c));
            }
            if !claimed.insert(c) {
                return Err(TreeError::DuplicateCell(c));
            }
        }
    }
    if let Some(&missing) = nonempty.difference(&claimed).next() {
        return Err(TreeError::UncoveredCell(missing));
    }

    let mut tree = IndexTree {
        vertices: vec![Vertex {
            kind: VertexKind::Base,
            id: 0,
            header: None,
            parent: None,
            children: Vec::new(),
            extent: extent_of(field, &claimed.iter().copied().collect::<Vec<_>>())?,
        }],
        clusters: BTreeMap::new(),
        leaves: BTreeMap::new(),
    };

    let mut sorted: Vec<&Cluster> = clusters.iter().collect();
    sorted.sort_by_key(|c| c.id);
    for cluster in sorted {
        let top = tree.push(
            VertexKind::Cluster,
            cluster.id.0,
            Some(cluster.header),
            ROOT,
            extent_of(field, &cluster.cells)?,
        );
        if tree.clusters.insert(cluster.id, top).is_some() {
            return Err(TreeError::DuplicateCluster(cluster.id));
        }
        let groups: Vec<(VertexIdx, &[CellId])> = match &cluster.children {
            None => vec![(top, &cluster.cells)],
            Some(children) => {
                let mut kids: Vec<&Cluster> = children.iter().collect();
                kids.sort_by_key(|c| c.id);
                let mut groups = Vec::new();
                for sub in kids {
                    let idx = tree.push(
                        VertexKind::SubCluster,
                        sub.id.0,
                        Some(sub.header),
                        top,
                        extent_of(field, &sub.cells)?,
                    );
                    if tree.clusters.insert(sub.id, idx).is_some() {
                        return Err(TreeError::DuplicateCluster(sub.id));
                    }
                    groups.push((idx, sub.cells.as_slice()));
                }
                groups
            }
        };
        for (parent, cells) in groups {
            let mut cells = cells.to_vec();
            cells.sort();
            for c in cells {
                let cell = field.cell(c).ok_or(TreeError::UnknownCell(c))?;
                let leaf = tree.push(VertexKind::Cell, c.0, cell.head, parent, cell.bounds);
                tree.leaves.insert(c, leaf);
            }
        }
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::election::HeadPolicy;
    use crate::field::partition_field;
    use crate::geometry::Point;
    use crate::node::SensorNode;
    use crate::tree::cluster::{build_clusters, split_oversized, ClusterBounds};

    fn line_field(n: usize) -> Field {
        let nodes = (0..n)
            .map(|i| SensorNode::new(NodeId(i as u32), Point::new(i as f64 * 10.0 + 5.0, 5.0), 50.0, 5.0).unwrap())
            .collect();
        partition_field(Rect::new(0.0, 0.0, n as f64 * 10.0, 10.0), 10.0, Point::default(), nodes).unwrap()
    }

    fn clusters(field: &Field, target: usize, threshold: usize) -> Vec<Cluster> {
        let policy = HeadPolicy::weighted(5.0).unwrap();
        let bounds = ClusterBounds::new(1, 10, threshold).unwrap();
        let c = build_clusters(field, &bounds, target, &policy, 0).unwrap();
        split_oversized(c, field, threshold, &policy, 0).unwrap()
    }

    #[test]
    fn single_unsplit_cluster_has_depth_two() {
        let f = line_field(3);
        let tree = build_index_tree(&clusters(&f, 1, 100), &f).unwrap();
        assert_eq!(tree.height(), 2);
        assert_eq!(
            tree.to_canonical_string(),
            "0\tbase\t0\t-\n1\tcluster\t0\t0\n2\tcell\t0\t0\n2\tcell\t1\t0\n2\tcell\t2\t0\n"
        );
    }

    #[test]
    fn split_cluster_hangs_sub_headers_under_its_header() {
        let f = line_field(6);
        let tree = build_index_tree(&clusters(&f, 1, 3), &f).unwrap();
        assert_eq!(
            tree.to_canonical_string(),
            "0\tbase\t0\t-\n\
             1\tcluster\t0\t0\n\
             2\tsubcluster\t1\t0\n\
             3\tcell\t0\t1\n3\tcell\t1\t1\n3\tcell\t2\t1\n\
             2\tsubcluster\t2\t0\n\
             3\tcell\t3\t2\n3\tcell\t4\t2\n3\tcell\t5\t2\n"
        );
        assert_eq!(tree.top_cluster_of(CellId(4)), Some(ClusterId(0)));
        assert_eq!(tree.root().children.len(), 1);
    }

    #[test]
    fn errors() {
        let f = line_field(3);
        assert_eq!(build_index_tree(&[], &f), Err(TreeError::NoClusters));
        let mut c = clusters(&f, 1, 100);
        c[0].cells.pop();
        assert_eq!(build_index_tree(&c, &f), Err(TreeError::UncoveredCell(CellId(2))));
        let mut c = clusters(&f, 2, 100);
        c[1].cells.push(CellId(0));
        assert_eq!(build_index_tree(&c, &f), Err(TreeError::DuplicateCell(CellId(0))));
    }

    #[test]
    fn parent_child_links_agree() {
        let f = line_field(8);
        let tree = build_index_tree(&clusters(&f, 2, 2), &f).unwrap();
        for (i, v) in tree.vertices().iter().enumerate() {
            for &c in &v.children {
                assert_eq!(tree.vertex(c).parent, Some(i));
            }
        }
        let leaves: Vec<CellId> = tree.leaf_cells().collect();
        assert_eq!(leaves, tree.cells_under(ROOT).into_iter().collect::<Vec<_>>());
    }
}
