//! Windowed region queries over the base station's stored values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::field::Field;
use crate::geometry::Rect;
use crate::ids::{CellId, ClusterId, NodeId};
use crate::sim::config::ScenarioConfig;
use crate::sim::engine::{RunOutput, Scenario, SimError, TickState};
use crate::sim::trace::Trace;
use crate::tree::{IndexTree, VertexKind, ROOT};
use crate::Aggregate;

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("query region must have positive area and finite corners")]
    InvalidRegion,
    #[error("query window starts at {start} after it ends at {end}")]
    InvalidWindow { start: usize, end: usize },
    #[error("malformed query `{0}`: expected `x1 y1 x2 y2 t_start t_end fn`")]
    Malformed(String),
    #[error("no cells matched the query region")]
    NoCellsMatched,
    #[error("window ends at tick {end} but only {ticks} ticks were simulated")]
    WindowOutOfRange { end: usize, ticks: usize },
    #[error("no stored values in the query window")]
    NoStoredValues,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionQuery {
    region: Rect,
    t_start: usize,
    t_end: usize,
    func: Aggregate,
}

impl RegionQuery {
    pub fn new(region: Rect, t_start: usize, t_end: usize, func: Aggregate) -> Result<Self, QueryError> {
        if !region.is_finite() || region.area() <= 0.0 {
            return Err(QueryError::InvalidRegion);
        }
        if t_start > t_end {
            return Err(QueryError::InvalidWindow {
                start: t_start,
                end: t_end,
            });
        }
        Ok(Self {
            region,
            t_start,
            t_end,
            func,
        })
    }

    pub fn region(&self) -> Rect {
        self.region
    }

    pub fn window(&self) -> (usize, usize) {
        (self.t_start, self.t_end)
    }

    pub fn func(&self) -> Aggregate {
        self.func
    }

    fn window_states<'s>(&self, states: &'s [TickState]) -> Result<&'s [TickState], QueryError> {
        if self.t_end >= states.len() {
            return Err(QueryError::WindowOutOfRange {
                end: self.t_end,
                ticks: states.len(),
            });
        }
        Ok(&states[self.t_start..=self.t_end])
    }
}

impl FromStr for RegionQuery {
    type Err = QueryError;

    /// Parses `x1 y1 x2 y2 t_start t_end fn`. The corners may be given in
    /// any order.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || QueryError::Malformed(s.trim().to_owned());
        let parts: Vec<&str> = s.split_whitespace().collect();
        let [x1, y1, x2, y2, t0, t1, func] = parts[..] else {
            return Err(bad());
        };
        let coord = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let tick = |v: &str| v.parse::<usize>().map_err(|_| bad());
        let region = Rect::new(coord(x1)?, coord(y1)?, coord(x2)?, coord(y2)?);
        let func = func.parse().map_err(|_| bad())?;
        Self::new(region, tick(t0)?, tick(t1)?, func)
    }
}

impl fmt::Display for RegionQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.region;
        write!(
            f,
            "{} {} {} {} {} {} {}",
            r.min.x, r.min.y, r.max.x, r.max.y, self.t_start, self.t_end, self.func
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAnswer {
    pub value: f64,
    pub cells: BTreeSet<CellId>,
}

/// Leaf cells whose bounds overlap `region` with positive area. Subtrees
/// whose extent misses the region are never entered.
pub fn route_query(tree: &IndexTree, field: &Field, region: &Rect) -> BTreeSet<CellId> {
    let mut out = BTreeSet::new();
    let mut stack = vec![ROOT];
    while let Some(idx) = stack.pop() {
        let v = tree.vertex(idx);
        if v.kind == VertexKind::Cell {
            let cell = CellId(v.id);
            if field.cell(cell).is_some_and(|c| c.bounds.intersects(region)) {
                out.insert(cell);
            }
        } else if v.kind == VertexKind::Base || v.extent.intersects(region) {
            stack.extend(&v.children);
        }
    }
    out
}

/// Combines the stored values of the top-level clusters holding the
/// matched cells over every tick of the window. For `avg` this is the
/// unweighted mean of the collected cluster values.
pub fn answer_query(
    query: &RegionQuery,
    tree: &IndexTree,
    field: &Field,
    states: &[TickState],
) -> Result<QueryAnswer, QueryError> {
    let cells = route_query(tree, field, &query.region);
    if cells.is_empty() {
        return Err(QueryError::NoCellsMatched);
    }
    let clusters: BTreeSet<ClusterId> = cells.iter().filter_map(|&c| tree.top_cluster_of(c)).collect();
    let mut values = Vec::new();
    for state in query.window_states(states)? {
        values.extend(clusters.iter().filter_map(|c| state.stored.get(c)));
    }
    let value = query.func.apply(&values).ok_or(QueryError::NoStoredValues)?;
    Ok(QueryAnswer { value, cells })
}

/// Combines the raw readings delivered from nodes in the matched cells,
/// one per node and tick, bypassing header filtering.
pub fn answer_query_exact(
    query: &RegionQuery,
    tree: &IndexTree,
    field: &Field,
    states: &[TickState],
) -> Result<QueryAnswer, QueryError> {
    let cells = route_query(tree, field, &query.region);
    if cells.is_empty() {
        return Err(QueryError::NoCellsMatched);
    }
    let mut values = Vec::new();
    for state in query.window_states(states)? {
        let per_node: BTreeMap<NodeId, f64> = state
            .reports
            .iter()
            .filter(|r| field.cell_of(r.node).is_some_and(|c| cells.contains(&c)))
            .map(|r| (r.node, r.value))
            .collect();
        values.extend(per_node.into_values());
    }
    let value = query.func.apply(&values).ok_or(QueryError::NoStoredValues)?;
    Ok(QueryAnswer { value, cells })
}

/// Mean over node-ticks of |stored value of the node's top-level cluster -
/// the node's true reading|. Node-ticks whose cluster has nothing stored
/// yet are skipped.
pub fn node_error(scenario: &Scenario, output: &RunOutput) -> Result<f64, SimError> {
    let field = scenario.field();
    let tree = scenario.tree();
    let home: BTreeMap<NodeId, ClusterId> = field
        .nodes()
        .ids()
        .filter_map(|n| Some((n, tree.top_cluster_of(field.cell_of(n)?)?)))
        .collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for state in &output.states {
        for (node, &truth) in &state.sensed {
            if let Some(stored) = home.get(node).and_then(|c| state.stored.get(c)) {
                sum += (stored - truth).abs();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(SimError::NoSamples);
    }
    Ok(sum / count as f64)
}

pub fn sweep_error(config: &ScenarioConfig, count: usize, trace: &Trace) -> Result<f64, SimError> {
    let config = config.with_target(count);
    let scenario = Scenario::build(&config, trace)?;
    let output = scenario.run(trace, config.dedup)?;
    node_error(&scenario, &output)
}

/// Runs the scenario once per cluster count and reports [`node_error`].
pub fn accuracy_sweep(config: &ScenarioConfig, counts: &[usize], trace: &Trace) -> Result<Vec<(usize, f64)>, SimError> {
    counts
        .iter()
        .map(|&count| Ok((count, sweep_error(config, count, trace)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_query_strings() {
        let q: RegionQuery = "10 20 0 0 1 3 max".parse().unwrap();
        assert_eq!(q.region(), Rect::new(0.0, 0.0, 10.0, 20.0));
        assert_eq!(q.window(), (1, 3));
        assert_eq!(q.func(), Aggregate::Max);
        assert_eq!(q.to_string().parse::<RegionQuery>().unwrap(), q);
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(matches!("0 0 1 1 0 0".parse::<RegionQuery>(), Err(QueryError::Malformed(_))));
        assert!(matches!("0 0 1 1 0 0 median".parse::<RegionQuery>(), Err(QueryError::Malformed(_))));
        assert_eq!("0 0 0 5 0 0 avg".parse::<RegionQuery>(), Err(QueryError::InvalidRegion));
        assert_eq!(
            "0 0 1 1 3 2 avg".parse::<RegionQuery>(),
            Err(QueryError::InvalidWindow { start: 3, end: 2 })
        );
    }
}
