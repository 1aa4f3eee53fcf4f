//! Index-tree construction: proximity clustering, K-Means splitting, the
//! tree itself and header routing.

pub mod cluster;
pub mod index;
pub mod kmeans;
pub mod route;

pub use cluster::{build_clusters, should_split, split_cluster, split_count, split_oversized, Cluster, ClusterBounds, ClusterError};
pub use index::{build_index_tree, IndexTree, TreeError, Vertex, VertexIdx, VertexKind, ROOT};
pub use kmeans::{kmeans, wcss, KMeans, KMeansError};
pub use route::{min_hop_routes, shortest_route, Route, RouteError};
