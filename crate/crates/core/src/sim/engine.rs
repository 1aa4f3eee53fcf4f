//! The round engine.
//!
//! A tick runs in five phases. Alive nodes sense their trace value; the
//! threshold rule picks the reporters; each reporter sends one report per
//! assigned cluster; sub-cluster headers filter and pass their value to the
//! cluster header; cluster headers filter and forward to the base station
//! along their route. The base station keeps the latest value per
//! top-level cluster.
//!
//! Costs: a report to another node is one hop, a report a header addresses
//! to itself is free, and a forward costs `hops * unit_cost` paid entirely
//! by the cluster header. A report to a dead header is still paid for and
//! then lost. Every failed transmission becomes a [`DropEvent`].

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dedup::{assign_exclusive, detect_overlaps, CoverageError, CoverageMap};
use crate::election::ElectionError;
use crate::field::{partition_field, Field, FieldError};
use crate::ids::{ClusterId, NodeId};
use crate::node::{NodeSet, SensorNode};
use crate::sim::config::{ConfigError, ScenarioConfig};
use crate::sim::ledger::{charge_transmission, ChargeError, EnergyLedger};
use crate::sim::rules::{filter_at_head, threshold_report, ReportRule, RuleError};
use crate::sim::trace::{Trace, TraceError};
use crate::tree::{
    build_clusters, build_index_tree, shortest_route, split_oversized, Cluster, ClusterError, IndexTree, Route,
    RouteError, TreeError,
};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("config sets the energy of node {0}, which is not in the trace")]
    UnknownEnergyNode(NodeId),
    #[error("{needed} ticks requested but the trace has {available}")]
    TraceTooShort { needed: usize, available: usize },
    #[error("trace exhausted at tick {0}")]
    TraceExhausted(usize),
    #[error("no node-tick had a stored value to compare against")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    InsufficientEnergy,
    SenderDead,
    ReceiverDead,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropEvent {
    pub tick: usize,
    pub sender: NodeId,
    /// `None` when the base station was the destination.
    pub receiver: Option<NodeId>,
    pub reason: DropReason,
}

/// A report that reached a header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Report {
    pub node: NodeId,
    /// The receiving cluster, a sub-cluster when the target was split.
    pub cluster: ClusterId,
    /// The top-level cluster the report was addressed to.
    pub top: ClusterId,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickState {
    pub tick: usize,
    /// True readings of every node alive at the start of the tick.
    pub sensed: BTreeMap<NodeId, f64>,
    pub reports: Vec<Report>,
    /// Filtered values of headers that received at least one report.
    pub head_values: BTreeMap<ClusterId, f64>,
    /// Top-level values that reached the base station this tick.
    pub received: BTreeMap<ClusterId, f64>,
    /// Latest value held by the base station per top-level cluster.
    pub stored: BTreeMap<ClusterId, f64>,
}

/// A fully built scenario: field, clusters, tree, coverage and routes.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    ticks: usize,
    field: Field,
    clusters: Vec<Cluster>,
    tree: IndexTree,
    coverage: CoverageMap,
    exclusive: BTreeMap<NodeId, ClusterId>,
    routes: BTreeMap<NodeId, Route>,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig, trace: &Trace) -> Result<Self, SimError> {
        config.validate()?;
        let ticks = config.ticks.unwrap_or(trace.ticks());
        if ticks > trace.ticks() {
            return Err(SimError::TraceTooShort {
                needed: ticks,
                available: trace.ticks(),
            });
        }
        if let Some(&id) = config.node_energy.keys().find(|&&id| trace.node(id).is_none()) {
            return Err(SimError::UnknownEnergyNode(id));
        }
        let nodes = trace
            .iter()
            .map(|(id, t)| {
                SensorNode::new(id, t.position, config.energy_of(id), config.transmission_range)
                    .expect("config and trace are validated")
                    .with_last_reported(config.initial_reported)
            })
            .collect();

        let policy = config.policy();
        let field = partition_field(config.bounds(), config.cell_size, config.base_station, nodes)?
            .with_heads(&policy, config.seed)?;
        let bounds = config.cluster_bounds();
        let mut clusters = build_clusters(&field, &bounds, config.target_clusters, &policy, config.seed)?;
        if let Some(threshold) = config.split_threshold {
            clusters = split_oversized(clusters, &field, threshold, &policy, config.seed)?;
        }
        let tree = build_index_tree(&clusters, &field)?;
        let coverage = detect_overlaps(&field, &clusters, config.coverage_radius)?;
        let exclusive = assign_exclusive(&coverage, &clusters, &field)?;
        let routes = shortest_route(&tree, &field, config.comm_range)?;
        let mut scenario = Self {
            config: config.clone(),
            ticks,
            field,
            clusters,
            tree,
            coverage,
            exclusive,
            routes,
        };
        scenario.keep_self_receivers();
        Ok(scenario)
    }

    /// A covered node that is itself the receiver for one of its covering
    /// clusters reports there for free, so dedup keeps it in that cluster
    /// (lowest id if several) instead of the nearest-centroid one.
    fn keep_self_receivers(&mut self) {
        let mut home = Vec::new();
        for (node, set) in self.coverage.iter() {
            if set.len() < 2 {
                continue;
            }
            if let Some(&c) = set.iter().find(|&&c| self.receiver(node, c).is_some_and(|r| r.header == node)) {
                home.push((node, c));
            }
        }
        self.exclusive.extend(home);
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn tree(&self) -> &IndexTree {
        &self.tree
    }

    pub fn coverage(&self) -> &CoverageMap {
        &self.coverage
    }

    pub fn exclusive(&self) -> &BTreeMap<NodeId, ClusterId> {
        &self.exclusive
    }

    pub fn routes(&self) -> &BTreeMap<NodeId, Route> {
        &self.routes
    }

    /// Top-level or sub-cluster by id.
    pub fn cluster(&self, id: ClusterId) -> Option<&Cluster> {
        self.clusters.iter().find_map(|c| {
            if c.id == id {
                Some(c)
            } else {
                c.children.as_ref()?.iter().find(|s| s.id == id)
            }
        })
    }

    /// Top-level clusters each node sends to: the exclusive one with
    /// `dedup`, every covering one without.
    pub fn targets(&self, dedup: bool) -> BTreeMap<NodeId, Vec<ClusterId>> {
        if dedup {
            self.exclusive.iter().map(|(&n, &c)| (n, vec![c])).collect()
        } else {
            self.coverage
                .iter()
                .map(|(n, set)| (n, set.iter().copied().collect()))
                .collect()
        }
    }

    /// The cluster that receives a node's report addressed to `top`: the top
    /// cluster itself, or for a split cluster the child holding the node's
    /// cell, falling back to the nearest child centroid.
    pub fn receiver(&self, node: NodeId, top: ClusterId) -> Option<&Cluster> {
        let cluster = self.clusters.iter().find(|c| c.id == top)?;
        let Some(children) = &cluster.children else {
            return Some(cluster);
        };
        let cell = self.field.cell_of(node);
        if let Some(child) = children.iter().find(|c| cell.is_some_and(|cell| c.cells.contains(&cell))) {
            return Some(child);
        }
        let position = self.field.nodes().get(node)?.position;
        let mut best: Option<(f64, &Cluster)> = None;
        for child in children {
            let d = position.distance(&child.centroid);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, child));
            }
        }
        best.map(|(_, c)| c)
    }

    pub fn run(&self, trace: &Trace, dedup: bool) -> Result<RunOutput, SimError> {
        Simulation::new(self, trace, dedup)?.run()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dedup: bool,
    pub ledger: EnergyLedger,
    pub states: Vec<TickState>,
    /// Per tick, |base-station aggregate - aggregate of true readings|.
    pub accuracy: Vec<Option<f64>>,
    pub drops: Vec<DropEvent>,
    /// Node state after the last tick.
    pub nodes: NodeSet,
}

impl RunOutput {
    pub fn energy_series(&self) -> Vec<f64> {
        self.ledger.series(self.states.len())
    }

    pub fn total_energy(&self) -> f64 {
        self.ledger.total()
    }
}

pub struct Simulation<'a> {
    scenario: &'a Scenario,
    trace: &'a Trace,
    dedup: bool,
    rule: ReportRule,
    targets: BTreeMap<NodeId, Vec<ClusterId>>,
    nodes: NodeSet,
    ledger: EnergyLedger,
    drops: Vec<DropEvent>,
    states: Vec<TickState>,
    stored: BTreeMap<ClusterId, f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, trace: &'a Trace, dedup: bool) -> Result<Self, SimError> {
        let config = scenario.config();
        Ok(Self {
            scenario,
            trace,
            dedup,
            rule: ReportRule::new(config.delta)?,
            targets: scenario.targets(dedup),
            nodes: scenario.field().nodes().clone(),
            ledger: EnergyLedger::new(config.unit_cost),
            drops: Vec::new(),
            states: Vec::new(),
            stored: BTreeMap::new(),
        })
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn states(&self) -> &[TickState] {
        &self.states
    }

    pub fn step(&mut self) -> Result<&TickState, SimError> {
        let tick = self.states.len();
        if tick >= self.scenario.ticks() {
            return Err(SimError::TraceExhausted(tick));
        }
        let scenario = self.scenario;
        let func = scenario.config().aggregate;

        let mut sensed = BTreeMap::new();
        for node in self.nodes.alive() {
            let value = self.trace.value(node.id, tick).ok_or(SimError::TraceExhausted(tick))?;
            sensed.insert(node.id, value);
        }

        let mut reporters = Vec::new();
        for (&id, &value) in &sensed {
            let node = self.nodes.get_mut(id).expect("sensed nodes exist");
            if threshold_report(node, value, &self.rule)? {
                reporters.push((id, value));
            }
        }

        let mut inbox: BTreeMap<ClusterId, Vec<f64>> = BTreeMap::new();
        let mut reports = Vec::new();
        for (id, value) in reporters {
            let targets = self.targets.get(&id).cloned().unwrap_or_default();
            for top in targets {
                let cluster = scenario.receiver(id, top).expect("targets name built clusters");
                if self.transmit(tick, id, Some(cluster.header), 1) {
                    inbox.entry(cluster.id).or_default().push(value);
                    reports.push(Report {
                        node: id,
                        cluster: cluster.id,
                        top,
                        value,
                    });
                }
            }
        }

        let mut head_values = BTreeMap::new();
        for cluster in scenario.clusters() {
            for child in cluster.children.iter().flatten() {
                let Some(values) = inbox.remove(&child.id) else {
                    continue;
                };
                let v = filter_at_head(&values, func)?;
                head_values.insert(child.id, v);
                if self.transmit(tick, child.header, Some(cluster.header), 1) {
                    inbox.entry(cluster.id).or_default().push(v);
                }
            }
        }

        let mut received = BTreeMap::new();
        for cluster in scenario.clusters() {
            let Some(values) = inbox.remove(&cluster.id) else {
                continue;
            };
            let v = filter_at_head(&values, func)?;
            head_values.insert(cluster.id, v);
            let hops = scenario.routes()[&cluster.header].hops();
            if self.transmit(tick, cluster.header, None, hops) {
                received.insert(cluster.id, v);
                self.stored.insert(cluster.id, v);
            }
        }

        self.states.push(TickState {
            tick,
            sensed,
            reports,
            head_values,
            received,
            stored: self.stored.clone(),
        });
        Ok(self.states.last().expect("just pushed"))
    }

    /// Delivers one transmission, returning whether it arrived.
    fn transmit(&mut self, tick: usize, sender: NodeId, receiver: Option<NodeId>, hops: usize) -> bool {
        let node = self.nodes.get_mut(sender).expect("senders are field nodes");
        let reason = if receiver == Some(sender) {
            if node.is_alive() {
                return true;
            }
            DropReason::SenderDead
        } else {
            match charge_transmission(&mut self.ledger, tick, node, hops) {
                Ok(_) => match receiver {
                    Some(r) if !self.nodes.get(r).is_some_and(SensorNode::is_alive) => DropReason::ReceiverDead,
                    _ => return true,
                },
                Err(ChargeError::InsufficientEnergy { .. }) => DropReason::InsufficientEnergy,
                Err(ChargeError::DeadSender(_)) => DropReason::SenderDead,
                Err(ChargeError::ZeroHops) => unreachable!("routes have at least one hop"),
            }
        };
        self.drops.push(DropEvent {
            tick,
            sender,
            receiver,
            reason,
        });
        false
    }

    pub fn run(mut self) -> Result<RunOutput, SimError> {
        while self.states.len() < self.scenario.ticks() {
            self.step()?;
        }
        let func = self.scenario.config().aggregate;
        let accuracy = self
            .states
            .iter()
            .map(|s| {
                let stored: Vec<f64> = s.stored.values().copied().collect();
                let truth: Vec<f64> = s.sensed.values().copied().collect();
                Some((func.apply(&stored)? - func.apply(&truth)?).abs())
            })
            .collect();
        Ok(RunOutput {
            dedup: self.dedup,
            ledger: self.ledger,
            states: self.states,
            accuracy,
            drops: self.drops,
            nodes: self.nodes,
        })
    }
}

/// Builds the scenario and runs it in the mode the config selects.
pub fn run(config: &ScenarioConfig, trace: &Trace) -> Result<RunOutput, SimError> {
    Scenario::build(config, trace)?.run(trace, config.dedup)
}
