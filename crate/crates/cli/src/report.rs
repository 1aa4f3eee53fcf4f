//! The structured report written by `--out`.
//!
//! Sections start with a `[name]` line. `config` holds the config echo in
//! its own `key = value` syntax, `summary` holds `key = value` pairs, and
//! the remaining sections are comma-separated tables with a header row.

use std::fmt::Write as _;

use gridtree::sim::{DropEvent, DropReason, Scenario, ScenarioConfig};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("mode `{mode}` total {total} does not equal the sum of its series {sum}")]
    TotalMismatch { mode: String, total: f64, sum: f64 },
    #[error("report has no [config] section")]
    NoConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSeries {
    pub mode: &'static str,
    pub energy: Vec<f64>,
    pub total: f64,
    pub accuracy: Vec<Option<f64>>,
    pub drops: Vec<DropEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub tree: String,
    /// `(cell, head)` for every nonempty cell.
    pub heads: Vec<(u32, u32)>,
    /// `(cluster, header, hops)` for every top-level cluster.
    pub routes: Vec<(u32, u32, usize)>,
    pub modes: Vec<ModeSeries>,
}

pub fn energy(v: f64) -> String {
    format!("{v:.3}")
}

pub fn value(v: f64) -> String {
    format!("{v:.6}")
}

fn reason(r: DropReason) -> &'static str {
    match r {
        DropReason::InsufficientEnergy => "insufficient_energy",
        DropReason::SenderDead => "sender_dead",
        DropReason::ReceiverDead => "receiver_dead",
    }
}

impl RunReport {
    pub fn new(scenario: &Scenario) -> Self {
        let tree = scenario.tree();
        Self {
            config: scenario.config().clone(),
            tree: tree.to_canonical_string(),
            heads: scenario
                .field()
                .nonempty_cells()
                .filter_map(|c| Some((c.id.0, c.head?.0)))
                .collect(),
            routes: tree
                .top_level()
                .map(|(id, header)| (id.0, header.0, scenario.routes()[&header].hops()))
                .collect(),
            modes: Vec::new(),
        }
    }

    pub fn check_totals(&self) -> Result<(), ReportError> {
        for m in &self.modes {
            let sum: f64 = m.energy.iter().sum();
            if (sum - m.total).abs() > 1e-9 * sum.abs().max(1.0) {
                return Err(ReportError::TotalMismatch {
                    mode: m.mode.to_owned(),
                    total: m.total,
                    sum,
                });
            }
        }
        Ok(())
    }

    pub fn render(&self) -> Result<String, ReportError> {
        self.check_totals()?;
        let mut out = String::from("# gridtree report\n");
        if let Some(note) = &self.config.note {
            let _ = writeln!(out, "# {note}");
        }
        out.push_str("\n[config]\n");
        out.push_str(&self.config.to_string());

        out.push_str("\n[summary]\n");
        let _ = writeln!(out, "clusters = {}", self.routes.len());
        for m in &self.modes {
            let _ = writeln!(out, "ticks.{} = {}", m.mode, m.energy.len());
            let _ = writeln!(out, "total_energy.{} = {}", m.mode, energy(m.total));
            let _ = writeln!(out, "drops.{} = {}", m.mode, m.drops.len());
        }

        if !self.modes.is_empty() {
            out.push_str("\n[series]\ntick");
            for m in &self.modes {
                let _ = write!(out, ",{}", m.mode);
            }
            out.push('\n');
            let ticks = self.modes.iter().map(|m| m.energy.len()).max().unwrap_or(0);
            for t in 0..ticks {
                let _ = write!(out, "{t}");
                for m in &self.modes {
                    let _ = write!(out, ",{}", m.energy.get(t).map_or_else(String::new, |&e| energy(e)));
                }
                out.push('\n');
            }

            out.push_str("\n[accuracy]\ntick");
            for m in &self.modes {
                let _ = write!(out, ",{}", m.mode);
            }
            out.push('\n');
            for t in 0..ticks {
                let _ = write!(out, "{t}");
                for m in &self.modes {
                    let cell = m.accuracy.get(t).copied().flatten().map_or_else(|| "-".to_owned(), value);
                    let _ = write!(out, ",{cell}");
                }
                out.push('\n');
            }
        }

        out.push_str("\n[tree]\n");
        out.push_str(&self.tree);

        out.push_str("\n[heads]\ncell,head\n");
        for (cell, head) in &self.heads {
            let _ = writeln!(out, "{cell},{head}");
        }

        out.push_str("\n[routes]\ncluster,header,hops\n");
        for (cluster, header, hops) in &self.routes {
            let _ = writeln!(out, "{cluster},{header},{hops}");
        }

        if !self.modes.is_empty() {
            out.push_str("\n[drops]\nmode,tick,sender,receiver,reason\n");
            for m in &self.modes {
                for d in &m.drops {
                    let receiver = d.receiver.map_or_else(|| "base".to_owned(), |r| r.to_string());
                    let _ = writeln!(out, "{},{},{},{},{}", m.mode, d.tick, d.sender, receiver, reason(d.reason));
                }
            }
        }
        Ok(out)
    }
}

/// Extracts and parses the `[config]` section of a rendered report.
pub fn parse_config_section(report: &str) -> Result<ScenarioConfig, ReportError> {
    let start = report.find("\n[config]\n").ok_or(ReportError::NoConfig)? + "\n[config]\n".len();
    let body = &report[start..];
    let end = body.find("\n[").unwrap_or(body.len());
    ScenarioConfig::parse(&body[..end]).map_err(|_| ReportError::NoConfig)
}
