use std::collections::BTreeSet;

use gridtree::query::{accuracy_sweep, answer_query, answer_query_exact, route_query, QueryError, RegionQuery};
use gridtree::sim::{Scenario, ScenarioConfig, Trace};
use gridtree::{Aggregate, CellId, NodeId, Point, Rect};

/// One node in the middle of each cell of a 4x4 grid of 25 m cells, with
/// readings that change every tick.
fn grid16() -> (ScenarioConfig, Trace) {
    let trace = Trace::from_series((0..16u32).map(|i| {
        let (row, col) = (i / 4, i % 4);
        let p = Point::new(col as f64 * 25.0 + 12.5, row as f64 * 25.0 + 12.5);
        (NodeId(i), p, (0..4).map(|t| i as f64 + 0.25 * t as f64 + 1.0).collect())
    }))
    .unwrap();
    let mut config = ScenarioConfig::new(100.0, 100.0, 25.0, 1);
    config.max_clusters = 16;
    (config, trace)
}

#[test]
fn two_of_sixteen_cells() {
    let (config, trace) = grid16();
    let s = Scenario::build(&config, &trace).unwrap();
    let region = Rect::new(30.0, 30.0, 70.0, 45.0);
    let got = route_query(s.tree(), s.field(), &region);
    assert_eq!(got, [CellId(5), CellId(6)].into());
    assert_eq!(route_query(s.tree(), s.field(), &Rect::new(0.0, 0.0, 100.0, 100.0)).len(), 16);
    assert!(route_query(s.tree(), s.field(), &Rect::new(200.0, 200.0, 300.0, 300.0)).is_empty());
}

#[test]
fn whole_field_flat_average_is_the_true_mean() {
    let (config, trace) = grid16();
    let s = Scenario::build(&config, &trace).unwrap();
    let out = s.run(&trace, true).unwrap();
    let q = RegionQuery::new(Rect::new(0.0, 0.0, 100.0, 100.0), 0, 3, Aggregate::Avg).unwrap();
    let a = answer_query(&q, s.tree(), s.field(), &out.states).unwrap();
    let raw: Vec<f64> = (0..4).flat_map(|t| (0..16).map(move |i| i as f64 + 0.25 * t as f64 + 1.0)).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    assert!((a.value - mean).abs() < 1e-9);
}

#[test]
fn single_cell_query_returns_its_stored_value() {
    let (config, trace) = grid16();
    let config = config.with_target(16);
    let s = Scenario::build(&config, &trace).unwrap();
    let out = s.run(&trace, true).unwrap();
    let q: RegionQuery = "26 26 30 30 2 2 avg".parse().unwrap();
    let a = answer_query(&q, s.tree(), s.field(), &out.states).unwrap();
    assert_eq!(a.cells, BTreeSet::from([CellId(5)]));
    let cluster = s.tree().top_cluster_of(CellId(5)).unwrap();
    assert_eq!(a.value, out.states[2].stored[&cluster]);
    assert_eq!(a.value, 5.0 + 0.5 + 1.0);
}

#[test]
fn min_over_two_cells() {
    let trace = Trace::from_series([
        (NodeId(0), Point::new(5.0, 5.0), vec![2.0]),
        (NodeId(1), Point::new(15.0, 5.0), vec![22.0]),
    ])
    .unwrap();
    let mut config = ScenarioConfig::new(20.0, 10.0, 10.0, 2);
    config.coverage_radius = 4.0;
    let s = Scenario::build(&config, &trace).unwrap();
    let out = s.run(&trace, true).unwrap();
    let q: RegionQuery = "0 0 20 10 0 0 min".parse().unwrap();
    assert_eq!(answer_query(&q, s.tree(), s.field(), &out.states).unwrap().value, 2.0);
    let q: RegionQuery = "0 0 20 10 0 0 avg".parse().unwrap();
    assert_eq!(answer_query_exact(&q, s.tree(), s.field(), &out.states).unwrap().value, 12.0);
}

#[test]
fn query_errors() {
    let (config, trace) = grid16();
    let s = Scenario::build(&config, &trace).unwrap();
    let out = s.run(&trace, true).unwrap();
    let q: RegionQuery = "500 500 600 600 0 0 avg".parse().unwrap();
    assert_eq!(answer_query(&q, s.tree(), s.field(), &out.states), Err(QueryError::NoCellsMatched));
    let q: RegionQuery = "0 0 10 10 0 9 avg".parse().unwrap();
    assert_eq!(
        answer_query(&q, s.tree(), s.field(), &out.states),
        Err(QueryError::WindowOutOfRange { end: 9, ticks: 4 })
    );
}

/// Left half reads 10, right half reads 30, at every tick.
fn two_zones(homogeneous: bool) -> (ScenarioConfig, Trace) {
    let mut series = Vec::new();
    for i in 0..32u32 {
        let (row, col) = (i / 8, i % 8);
        let p = Point::new(col as f64 * 10.0 + 4.0, row as f64 * 10.0 + 6.0);
        let v = if homogeneous || col < 4 { 10.0 } else { 30.0 };
        series.push((NodeId(i), p, vec![v; 5]));
    }
    let mut config = ScenarioConfig::new(80.0, 40.0, 10.0, 1);
    config.max_clusters = 4;
    (config, Trace::from_series(series).unwrap())
}

#[test]
fn more_clusters_track_two_zones_better() {
    let (config, trace) = two_zones(false);
    let sweep = accuracy_sweep(&config, &[1, 2, 3, 4], &trace).unwrap();
    assert_eq!(sweep[0], (1, 10.0));
    assert!(sweep[3].1 < sweep[0].1);
}

#[test]
fn homogeneous_field_has_no_error() {
    let (config, trace) = two_zones(true);
    for (_, e) in accuracy_sweep(&config, &[1, 2, 3, 4], &trace).unwrap() {
        assert_eq!(e, 0.0);
    }
}

#[test]
fn sweep_rejects_counts_outside_bounds() {
    let (config, trace) = two_zones(false);
    assert!(accuracy_sweep(&config, &[5], &trace).is_err());
}
