use thiserror::Error;

use crate::ids::NodeId;
use crate::node::SensorNode;
use crate::Aggregate;

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("delta must be finite and non-negative, got {0}")]
    InvalidDelta(f64),
    #[error("node {0} is dead and cannot sense")]
    DeadNode(NodeId),
    #[error("a header cannot filter an empty set of reports")]
    EmptyReports,
}

/// Significance threshold for re-reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRule {
    delta: f64,
}

impl ReportRule {
    pub fn new(delta: f64) -> Result<Self, RuleError> {
        if delta.is_finite() && delta >= 0.0 {
            Ok(Self { delta })
        } else {
            Err(RuleError::InvalidDelta(delta))
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Pure form of the rule.
    pub fn should_report(&self, last: Option<f64>, value: f64) -> bool {
        last.map_or(true, |prev| (value - prev).abs() > self.delta)
    }
}

/// Decides whether `node` reports `value` and records it as the last
/// reported reading when it does.
pub fn threshold_report(node: &mut SensorNode, value: f64, rule: &ReportRule) -> Result<bool, RuleError> {
    if !node.is_alive() {
        return Err(RuleError::DeadNode(node.id));
    }
    let report = rule.should_report(node.last_reported(), value);
    if report {
        node.set_last_reported(value);
    }
    Ok(report)
}

pub fn filter_at_head(values: &[f64], func: Aggregate) -> Result<f64, RuleError> {
    func.apply(values).ok_or(RuleError::EmptyReports)
}
