//! Round-based reporting simulation with energy accounting.

pub mod config;
pub mod engine;
pub mod ledger;
pub mod rules;
pub mod trace;

pub use config::{ConfigError, PolicyKind, ScenarioConfig};
pub use engine::{run, DropEvent, DropReason, Report, RunOutput, Scenario, SimError, Simulation, TickState};
pub use ledger::{charge_transmission, Charge, ChargeError, EnergyLedger, DEFAULT_UNIT_COST};
pub use rules::{filter_at_head, threshold_report, ReportRule, RuleError};
pub use trace::{NodeTrace, Trace, TraceError};
