//! Proximity clustering of grid cells and K-Means splitting of oversized
//! clusters.

use thiserror::Error;

use crate::election::{elect_head, ElectionError, HeadPolicy};
use crate::field::{Field, GridCell};
use crate::geometry::Point;
use crate::ids::{CellId, ClusterId, NodeId};
use crate::tree::kmeans::{kmeans, KMeansError, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cluster bounds need 1 <= m <= M and split_threshold >= 1 (got m={m}, M={max}, threshold={threshold})")]
    InvalidBounds { m: usize, max: usize, threshold: usize },
    #[error("target cluster count {target} is outside [{m}, {max}]")]
    TargetOutOfRange { target: usize, m: usize, max: usize },
    #[error("target cluster count {target} exceeds the {cells} nonempty cells")]
    TooFewCells { target: usize, cells: usize },
    #[error("field has no nonempty cell")]
    EmptyField,
    #[error("cell {0} is not part of the field")]
    UnknownCell(CellId),
    #[error("cluster {cluster} has {cells} cells and cannot be split into {k} parts")]
    CannotSplit { cluster: ClusterId, cells: usize, k: usize },
    #[error("cluster {0} does not exceed the split threshold")]
    NotOversized(ClusterId),
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    KMeans(#[from] KMeansError),
}

/// m/M bounds on the number of top-level clusters, plus the node count above
/// which a cluster is broken up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterBounds {
    min: usize,
    max: usize,
    split_threshold: usize,
}

impl ClusterBounds {
    pub fn new(min: usize, max: usize, split_threshold: usize) -> Result<Self, ClusterError> {
        if min < 1 || max < min || split_threshold < 1 {
            return Err(ClusterError::InvalidBounds {
                m: min,
                max,
                threshold: split_threshold,
            });
        }
        Ok(Self {
            min,
            max,
            split_threshold,
        })
    }

    pub fn min(&self) -> usize {
        self.min
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn split_threshold(&self) -> usize {
        self.split_threshold
    }

    pub fn check_target(&self, target: usize) -> Result<(), ClusterError> {
        if target < self.min || target > self.max {
            return Err(ClusterError::TargetOutOfRange {
                target,
                m: self.min,
                max: self.max,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: ClusterId,
    /// Member cells in ascending id order.
    pub cells: Vec<CellId>,
    /// Mean of the member cells' centers.
    pub centroid: Point,
    pub header: NodeId,
    /// Sub-clusters, present only after a split.
    pub children: Option<Vec<Cluster>>,
}

impl Cluster {
    pub fn is_split(&self) -> bool {
        self.children.is_some()
    }

    pub fn alive_nodes(&self, field: &Field) -> Result<usize, ClusterError> {
        let mut total = 0;
        for &id in &self.cells {
            total += field.cell(id).ok_or(ClusterError::UnknownCell(id))?.members.len();
        }
        Ok(total)
    }
}

fn cell_centroid(field: &Field, cells: &[CellId]) -> Point {
    let centers: Vec<Point> = cells
        .iter()
        .map(|&c| field.cell(c).expect("cell resolved by caller").bounds.center())
        .collect();
    Point::mean(&centers).expect("clusters are never empty")
}

/// Elects the header from the heaviest member cell (lowest cell id on ties).
fn elect_header(field: &Field, cells: &[CellId], policy: &HeadPolicy, seed: u64) -> Result<NodeId, ClusterError> {
    let mut heaviest: Option<&GridCell> = None;
    for &id in cells {
        let cell = field.cell(id).ok_or(ClusterError::UnknownCell(id))?;
        if heaviest.map_or(true, |h| cell.weight > h.weight) {
            heaviest = Some(cell);
        }
    }
    let cell = heaviest.expect("clusters are never empty");
    Ok(elect_head(cell, field.nodes(), policy, seed)?)
}

struct Group {
    key: CellId,
    cells: Vec<CellId>,
    sum: (f64, f64),
}

impl Group {
    fn centroid(&self) -> Point {
        let n = self.cells.len() as f64;
        Point::new(self.sum.0 / n, self.sum.1 / n)
    }
}

/// Agglomerates the nonempty cells of `field` into exactly `target`
/// clusters by centroid linkage.
///
/// Every cell starts as its own group, keyed by its id. The pair of groups
/// with the smallest centroid distance merges (ties go to the
/// lexicographically smallest key pair) and the merged group keeps the
/// smaller key. Because the merge sequence never depends on `target`, the
/// result for `t` is always a coarsening of the result for `t + 1`.
/// Final clusters are numbered by ascending key.
pub fn build_clusters(
    field: &Field,
    bounds: &ClusterBounds,
    target: usize,
    policy: &HeadPolicy,
    seed: u64,
) -> Result<Vec<Cluster>, ClusterError> {
    bounds.check_target(target)?;
    let mut groups: Vec<Group> = field
        .nonempty_cells()
        .map(|c| {
            let center = c.bounds.center();
            Group {
                key: c.id,
                cells: vec![c.id],
                sum: (center.x, center.y),
            }
        })
        .collect();
    if groups.is_empty() {
        return Err(ClusterError::EmptyField);
    }
    if target > groups.len() {
        return Err(ClusterError::TooFewCells {
            target,
            cells: groups.len(),
        });
    }

    while groups.len() > target {
        let centroids: Vec<Point> = groups.iter().map(Group::centroid).collect();
        let mut best = (f64::INFINITY, 0, 1);
        // groups stay sorted by key, so scanning i < j in order visits id
        // pairs lexicographically and strict < keeps the first tie
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                let d = centroids[i].distance_sq(&centroids[j]);
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let absorbed = groups.remove(j);
        let keep = &mut groups[i];
        keep.cells.extend(absorbed.cells);
        keep.cells.sort();
        keep.sum.0 += absorbed.sum.0;
        keep.sum.1 += absorbed.sum.1;
    }

    groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            debug_assert_eq!(g.key, g.cells[0]);
            Ok(Cluster {
                id: ClusterId(i as u32),
                header: elect_header(field, &g.cells, policy, seed)?,
                centroid: g.centroid(),
                cells: g.cells.clone(),
                children: None,
            })
        })
        .collect()
}

/// True iff the cluster holds strictly more alive nodes than the threshold.
pub fn should_split(cluster: &Cluster, field: &Field, split_threshold: usize) -> Result<bool, ClusterError> {
    Ok(cluster.alive_nodes(field)? > split_threshold)
}

/// Number of parts an oversized cluster is broken into.
pub fn split_count(alive_nodes: usize, split_threshold: usize) -> usize {
    alive_nodes.div_ceil(split_threshold)
}

fn mix_seed(seed: u64, cluster: ClusterId) -> u64 {
    seed ^ (u64::from(cluster.0) + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// Breaks an oversized cluster into `ceil(n / threshold)` sub-clusters by
/// running K-Means on its cell centers. Sub-clusters are numbered from
/// `first_id` in ascending order of their smallest cell id and each gets
/// its own elected header.
pub fn split_cluster(
    cluster: &Cluster,
    field: &Field,
    split_threshold: usize,
    policy: &HeadPolicy,
    seed: u64,
    first_id: ClusterId,
) -> Result<Vec<Cluster>, ClusterError> {
    let alive = cluster.alive_nodes(field)?;
    if alive <= split_threshold {
        return Err(ClusterError::NotOversized(cluster.id));
    }
    let k = split_count(alive, split_threshold);
    if k > cluster.cells.len() {
        return Err(ClusterError::CannotSplit {
            cluster: cluster.id,
            cells: cluster.cells.len(),
            k,
        });
    }
    let centers: Vec<Point> = cluster
        .cells
        .iter()
        .map(|&c| field.cell(c).expect("resolved above").bounds.center())
        .collect();
    let result = kmeans(&centers, k, mix_seed(seed, cluster.id), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;

    let mut parts: Vec<Vec<CellId>> = vec![Vec::new(); k];
    for (&cell, &a) in cluster.cells.iter().zip(&result.assignments) {
        parts[a].push(cell);
    }
    // cluster.cells is sorted, so each part is too
    parts.sort_by_key(|p| p[0]);

    parts
        .into_iter()
        .enumerate()
        .map(|(i, cells)| {
            Ok(Cluster {
                id: ClusterId(first_id.0 + i as u32),
                header: elect_header(field, &cells, policy, seed)?,
                centroid: cell_centroid(field, &cells),
                cells,
                children: None,
            })
        })
        .collect()
}

/// Splits every cluster that exceeds the threshold, numbering sub-clusters
/// after the largest top-level id.
pub fn split_oversized(
    clusters: Vec<Cluster>,
    field: &Field,
    split_threshold: usize,
    policy: &HeadPolicy,
    seed: u64,
) -> Result<Vec<Cluster>, ClusterError> {
    let mut next_id = clusters.iter().map(|c| c.id.0 + 1).max().unwrap_or(0);
    let mut out = Vec::with_capacity(clusters.len());
    for mut cluster in clusters {
        if should_split(&cluster, field, split_threshold)? {
            let children = split_cluster(&cluster, field, split_threshold, policy, seed, ClusterId(next_id))?;
            next_id += children.len() as u32;
            cluster.children = Some(children);
        }
        out.push(cluster);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::partition_field;
    use crate::geometry::Rect;
    use crate::node::SensorNode;

    fn policy() -> HeadPolicy {
        HeadPolicy::weighted(5.0).unwrap()
    }

    /// One node per listed (col, row) cell on a grid of 10 m cells.
    fn field_with_cells(cells: &[(usize, usize)], cols: usize, rows: usize) -> Field {
        let nodes = cells
            .iter()
            .enumerate()
            .map(|(i, &(c, r))| {
                SensorNode::new(
                    NodeId(i as u32),
                    Point::new(c as f64 * 10.0 + 5.0, r as f64 * 10.0 + 5.0),
                    100.0,
                    5.0,
                )
                .unwrap()
            })
            .collect();
        partition_field(
            Rect::new(0.0, 0.0, cols as f64 * 10.0, rows as f64 * 10.0),
            10.0,
            Point::default(),
            nodes,
        )
        .unwrap()
    }

    fn cell_sets(clusters: &[Cluster]) -> Vec<Vec<u32>> {
        clusters.iter().map(|c| c.cells.iter().map(|c| c.0).collect()).collect()
    }

    /// Naive centroid-linkage agglomeration over explicit point groups.
    fn oracle_agglomerate(points: &[(u32, Point)], target: usize) -> Vec<Vec<u32>> {
        let mut groups: Vec<Vec<(u32, Point)>> = points.iter().map(|p| vec![*p]).collect();
        while groups.len() > target {
            let mut best: Option<(f64, (u32, u32), usize, usize)> = None;
            for i in 0..groups.len() {
                for j in 0..groups.len() {
                    if i == j {
                        continue;
                    }
                    let ci = Point::mean(groups[i].iter().map(|g| &g.1)).unwrap();
                    let cj = Point::mean(groups[j].iter().map(|g| &g.1)).unwrap();
                    let ki = groups[i].iter().map(|g| g.0).min().unwrap();
                    let kj = groups[j].iter().map(|g| g.0).min().unwrap();
                    let cand = (ci.distance_sq(&cj), (ki.min(kj), ki.max(kj)), i, j);
                    if best.as_ref().map_or(true, |b| (cand.0, cand.1) < (b.0, b.1)) {
                        best = Some(cand);
                    }
                }
            }
            let (_, _, i, j) = best.unwrap();
            let moved = groups[j].clone();
            groups[i].extend(moved);
            groups.remove(j);
        }
        let mut out: Vec<Vec<u32>> = groups
            .into_iter()
            .map(|g| {
                let mut ids: Vec<u32> = g.into_iter().map(|p| p.0).collect();
                ids.sort();
                ids
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn target_equal_to_cells_keeps_every_cell() {
        let f = field_with_cells(&[(0, 0), (3, 0), (1, 2)], 4, 4);
        let b = ClusterBounds::new(1, 10, 100).unwrap();
        let c = build_clusters(&f, &b, 3, &policy(), 0).unwrap();
        assert_eq!(cell_sets(&c), vec![vec![0], vec![3], vec![9]]);
    }

    #[test]
    fn target_one_merges_everything() {
        let f = field_with_cells(&[(0, 0), (3, 0), (1, 2), (3, 3)], 4, 4);
        let b = ClusterBounds::new(1, 10, 100).unwrap();
        let c = build_clusters(&f, &b, 1, &policy(), 0).unwrap();
        assert_eq!(cell_sets(&c), vec![vec![0, 3, 9, 15]]);
    }

    #[test]
    fn corner_pairs_merge() {
        // corners of an 8x8 grid, each with a neighbour right next to it
        let cells = [(0, 0), (1, 0), (7, 0), (7, 1), (0, 7), (0, 6), (7, 7), (6, 7)];
        let f = field_with_cells(&cells, 8, 8);
        let b = ClusterBounds::new(1, 8, 100).unwrap();
        let c = build_clusters(&f, &b, 4, &policy(), 0).unwrap();

        let pts: Vec<(u32, Point)> = f.nonempty_cells().map(|c| (c.id.0, c.bounds.center())).collect();
        let expected = oracle_agglomerate(&pts, 4);
        assert_eq!(expected, vec![vec![0, 1], vec![7, 15], vec![48, 56], vec![62, 63]]);
        let mut got = cell_sets(&c);
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn header_comes_from_heaviest_cell() {
        let nodes = vec![
            SensorNode::new(NodeId(0), Point::new(5.0, 5.0), 10.0, 1.0).unwrap(),
            SensorNode::new(NodeId(1), Point::new(15.0, 5.0), 90.0, 1.0).unwrap(),
            SensorNode::new(NodeId(2), Point::new(16.0, 5.0), 5.0, 1.0).unwrap(),
        ];
        let f = partition_field(Rect::new(0.0, 0.0, 20.0, 10.0), 10.0, Point::default(), nodes).unwrap();
        let b = ClusterBounds::new(1, 2, 100).unwrap();
        let c = build_clusters(&f, &b, 1, &policy(), 0).unwrap();
        assert_eq!(c[0].header, NodeId(1));
        assert_eq!(c[0].centroid, Point::new(10.0, 5.0));
    }

    #[test]
    fn target_validation() {
        let f = field_with_cells(&[(0, 0), (1, 1)], 2, 2);
        let b = ClusterBounds::new(2, 4, 10).unwrap();
        assert!(matches!(
            build_clusters(&f, &b, 1, &policy(), 0),
            Err(ClusterError::TargetOutOfRange { target: 1, .. })
        ));
        assert!(matches!(
            build_clusters(&f, &b, 3, &policy(), 0),
            Err(ClusterError::TooFewCells { target: 3, cells: 2 })
        ));
        assert!(ClusterBounds::new(0, 1, 1).is_err());
        assert!(ClusterBounds::new(3, 2, 1).is_err());
        assert!(ClusterBounds::new(1, 2, 0).is_err());
    }

    fn cluster_over(field: &Field) -> Cluster {
        let b = ClusterBounds::new(1, 100, 1000).unwrap();
        build_clusters(field, &b, 1, &policy(), 0).unwrap().remove(0)
    }

    #[test]
    fn split_rule_is_strict() {
        let f = field_with_cells(&[(0, 0), (1, 0), (2, 0), (3, 0)], 4, 1);
        let c = cluster_over(&f);
        assert!(should_split(&c, &f, 3).unwrap());
        assert!(!should_split(&c, &f, 4).unwrap());
        let mut stray = c.clone();
        stray.cells.push(CellId(99));
        assert_eq!(should_split(&stray, &f, 1), Err(ClusterError::UnknownCell(CellId(99))));
    }

    #[test]
    fn split_count_is_ceiling() {
        assert_eq!(split_count(10, 4), 3);
        assert_eq!(split_count(8, 4), 2);
        assert_eq!(split_count(5, 4), 2);
    }

    #[test]
    fn ten_nodes_threshold_four_gives_three_parts() {
        let cells: Vec<(usize, usize)> = (0..10).map(|i| (i, 0)).collect();
        let f = field_with_cells(&cells, 10, 1);
        let c = cluster_over(&f);
        let parts = split_cluster(&c, &f, 4, &policy(), 0, ClusterId(1)).unwrap();
        assert_eq!(parts.len(), 3);
        let mut union: Vec<CellId> = parts.iter().flat_map(|p| p.cells.clone()).collect();
        union.sort();
        assert_eq!(union, c.cells);
        let ids: Vec<u32> = parts.iter().map(|p| p.id.0).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn split_follows_spatial_groups() {
        let cells = [(0, 0), (1, 0), (0, 1), (8, 8), (9, 8), (9, 9)];
        let f = field_with_cells(&cells, 10, 10);
        let c = cluster_over(&f);

        // exhaustive 2-partition of the six centers
        let centers: Vec<Point> = c.cells.iter().map(|&id| f.cell(id).unwrap().bounds.center()).collect();
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1u32..(1 << 6) - 1 {
            let (a, b): (Vec<Point>, Vec<Point>) = (0..6)
                .map(|i| (mask >> i & 1 == 1, centers[i]))
                .fold((vec![], vec![]), |(mut a, mut b), (in_a, p)| {
                    if in_a { a.push(p) } else { b.push(p) }
                    (a, b)
                });
            let w = |g: &[Point]| {
                let m = Point::mean(g).unwrap();
                g.iter().map(|p| p.distance_sq(&m)).sum::<f64>()
            };
            let total = w(&a) + w(&b);
            if total < best.0 {
                best = (total, mask);
            }
        }
        let left: Vec<CellId> = (0..6).filter(|i| best.1 >> i & 1 == 1).map(|i| c.cells[i]).collect();

        let parts = split_cluster(&c, &f, 3, &policy(), 5, ClusterId(1)).unwrap();
        assert_eq!(parts.len(), 2);
        let sets: Vec<Vec<CellId>> = parts.iter().map(|p| p.cells.clone()).collect();
        assert!(sets.contains(&left));
        assert_eq!(sets[0], vec![CellId(0), CellId(1), CellId(10)]);
    }

    #[test]
    fn unsplittable_cluster() {
        // 3 nodes in one cell, threshold 1 -> k = 3 parts of a 1-cell cluster
        let nodes = (0..3)
            .map(|i| SensorNode::new(NodeId(i), Point::new(1.0 + i as f64, 1.0), 10.0, 1.0).unwrap())
            .collect();
        let f = partition_field(Rect::new(0.0, 0.0, 10.0, 10.0), 10.0, Point::default(), nodes).unwrap();
        let c = cluster_over(&f);
        assert!(matches!(
            split_cluster(&c, &f, 1, &policy(), 0, ClusterId(1)),
            Err(ClusterError::CannotSplit { k: 3, cells: 1, .. })
        ));
        assert_eq!(
            split_cluster(&c, &f, 3, &policy(), 0, ClusterId(1)),
            Err(ClusterError::NotOversized(ClusterId(0)))
        );
    }

    #[test]
    fn oversized_splitting_numbers_children_after_top_level() {
        let cells: Vec<(usize, usize)> = (0..6).map(|i| (i, 0)).chain((0..2).map(|i| (i, 5))).collect();
        let f = field_with_cells(&cells, 6, 6);
        let b = ClusterBounds::new(1, 4, 3).unwrap();
        let clusters = build_clusters(&f, &b, 2, &policy(), 0).unwrap();
        let out = split_oversized(clusters, &f, 3, &policy(), 0).unwrap();
        assert!(out[0].is_split());
        assert!(!out[1].is_split());
        let kids: Vec<u32> = out[0].children.as_ref().unwrap().iter().map(|k| k.id.0).collect();
        assert_eq!(kids, vec![2, 3]);
    }
}
