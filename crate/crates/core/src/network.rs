//! The grating/delay-line network compiled from a graph.
//!
//! Feedforward networks are an `n × n` matrix of units: unit `(i, j)` delays
//! by `δ_j` and splits over one slit per out-neighbour `k` of vertex `j`,
//! feeding unit `(i + 1, k)`. Row `n` ends in detectors. The recurrent form
//! keeps a single row and routes each unit back to row 1 over a feedback
//! channel that adds `δ`, so the photon is detected after `n - 1` rounds.
//!
//! Both forms carry a `depth`: the number of unit traversals before
//! detection. Truncating a network to fewer rows (or rounds) is how the
//! path construction procedure gates detectors at earlier rows.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay::DelayTable;
use crate::graph::Graph;

/// Version tag written into serialized networks.
pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("graph has {graph} vertices but the delay table has {table}")]
    SizeMismatch { graph: usize, table: usize },
    #[error("feedback delay {feedback} must exceed the largest unit delay {max_delay}")]
    FeedbackTooShort { feedback: f64, max_delay: f64 },
    #[error("depth {depth} outside 1..={max}")]
    BadDepth { depth: usize, max: usize },
    #[error("malformed network document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Feedforward,
    Recurrent,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Feedforward => "feedforward",
            Topology::Recurrent => "recurrent",
        })
    }
}

/// Position `(row, column)` of a unit; the column is the vertex index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitId {
    pub row: usize,
    pub column: usize,
}

impl UnitId {
    pub fn new(row: usize, column: usize) -> Self {
        Self { row, column }
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u({},{})", self.row, self.column)
    }
}

/// Delay line, `k_j`-slit grating and the channels leaving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: UnitId,
    pub delay: f64,
    pub slit_count: usize,
    pub successors: Vec<UnitId>,
}

impl Unit {
    /// Whether weight entering this unit has nowhere to go before detection.
    pub fn is_absorbing(&self) -> bool {
        self.successors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Source,
    Unit(UnitId),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Source => f.write_str("source"),
            Endpoint::Unit(u) => u.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub from: Endpoint,
    pub to: UnitId,
    pub extra_delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    topology: Topology,
    depth: usize,
    channel_delay: f64,
    feedback_delay: Option<f64>,
    units: Vec<Unit>,
}

/// Full `n`-row feedforward matrix for `g`.
pub fn compile_feedforward(g: &Graph, table: &DelayTable) -> Result<Network, NetworkError> {
    compile_feedforward_rows(g, table, g.n())
}

/// Feedforward matrix truncated to rows `1..=rows`, with detectors after
/// row `rows`.
pub fn compile_feedforward_rows(
    g: &Graph,
    table: &DelayTable,
    rows: usize,
) -> Result<Network, NetworkError> {
    let n = check_sizes(g, table)?;
    if rows == 0 || rows > n {
        return Err(NetworkError::BadDepth {
            depth: rows,
            max: n,
        });
    }
    let mut units = Vec::with_capacity(rows * n);
    for row in 1..=rows {
        for column in 1..=n {
            let successors: Vec<UnitId> = if row < rows {
                g.successors(column)
                    .map(|k| UnitId::new(row + 1, k))
                    .collect()
            } else {
                Vec::new()
            };
            units.push(Unit {
                id: UnitId::new(row, column),
                delay: table.delay(column),
                slit_count: successors.len(),
                successors,
            });
        }
    }
    Ok(Network {
        n,
        topology: Topology::Feedforward,
        depth: rows,
        channel_delay: table.channel_delay(),
        feedback_delay: None,
        units,
    })
}

/// Single-row network whose outputs feed back to row 1 over channels that
/// add `feedback_delay`; detection after `n - 1` feedback rounds.
pub fn compile_recurrent(
    g: &Graph,
    table: &DelayTable,
    feedback_delay: f64,
) -> Result<Network, NetworkError> {
    let n = check_sizes(g, table)?;
    if !feedback_delay.is_finite() || feedback_delay <= table.max_delay() {
        return Err(NetworkError::FeedbackTooShort {
            feedback: feedback_delay,
            max_delay: table.max_delay(),
        });
    }
    let units = (1..=n)
        .map(|column| {
            let successors: Vec<UnitId> = g.successors(column).map(|k| UnitId::new(1, k)).collect();
            Unit {
                id: UnitId::new(1, column),
                delay: table.delay(column),
                slit_count: successors.len(),
                successors,
            }
        })
        .collect();
    Ok(Network {
        n,
        topology: Topology::Recurrent,
        depth: n,
        channel_delay: table.channel_delay(),
        feedback_delay: Some(feedback_delay),
        units,
    })
}

fn check_sizes(g: &Graph, table: &DelayTable) -> Result<usize, NetworkError> {
    if g.n() != table.n() {
        return Err(NetworkError::SizeMismatch {
            graph: g.n(),
            table: table.n(),
        });
    }
    Ok(g.n())
}

impl Network {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Unit traversals before detection.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn channel_delay(&self) -> f64 {
        self.channel_delay
    }

    pub fn feedback_delay(&self) -> Option<f64> {
        self.feedback_delay
    }

    /// Slits of the Level-A source grating.
    pub fn source_slits(&self) -> usize {
        self.n
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    /// The unit the photon occupies at traversal `step` (1-based) in
    /// `column`.
    #[inline]
    pub fn unit_at(&self, step: usize, column: usize) -> &Unit {
        match self.topology {
            Topology::Feedforward => &self.units[(step - 1) * self.n + column - 1],
            Topology::Recurrent => &self.units[column - 1],
        }
    }

    /// Per-column unit delays `δ_j`.
    pub fn column_delays(&self) -> Vec<f64> {
        self.units[..self.n].iter().map(|u| u.delay).collect()
    }

    /// Delay added by the channel leaving a unit.
    pub fn transit_delay(&self) -> f64 {
        self.channel_delay + self.feedback_delay.unwrap_or(0.0)
    }

    /// Time accrued on channels along any full traversal: `depth` channels
    /// of `δ_c` plus `depth - 1` feedback rounds of `δ`.
    pub fn channel_offset(&self) -> f64 {
        self.depth as f64 * self.channel_delay
            + (self.depth - 1) as f64 * self.feedback_delay.unwrap_or(0.0)
    }

    /// Same network with detectors after `depth` traversals.
    pub fn truncated(&self, depth: usize) -> Result<Network, NetworkError> {
        let max = match self.topology {
            Topology::Feedforward => self.depth,
            Topology::Recurrent => self.n,
        };
        if depth == 0 || depth > max {
            return Err(NetworkError::BadDepth { depth, max });
        }
        let mut net = self.clone();
        net.depth = depth;
        if self.topology == Topology::Feedforward {
            net.units.truncate(depth * self.n);
            for unit in &mut net.units[(depth - 1) * self.n..] {
                unit.successors.clear();
                unit.slit_count = 0;
            }
        }
        Ok(net)
    }

    /// Every channel: source fan-out first, then unit outputs in unit order.
    pub fn channels(&self) -> Vec<Channel> {
        let source = (1..=self.n).map(|column| Channel {
            from: Endpoint::Source,
            to: UnitId::new(1, column),
            extra_delay: self.channel_delay,
        });
        let transit = self.transit_delay();
        let internal = self.units.iter().flat_map(|u| {
            u.successors.iter().map(move |&to| Channel {
                from: Endpoint::Unit(u.id),
                to,
                extra_delay: transit,
            })
        });
        source.chain(internal).collect()
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            format_version: NETWORK_FORMAT_VERSION,
            n: self.n,
            topology: self.topology,
            depth: self.depth,
            channel_delay: self.channel_delay,
            feedback_delay: self.feedback_delay,
            source_slits: self.source_slits(),
            units: self
                .units
                .iter()
                .map(|u| UnitRecord {
                    row: u.id.row,
                    column: u.id.column,
                    delay: u.delay,
                    slit_count: u.slit_count,
                })
                .collect(),
            channels: self.channels(),
        }
    }

    /// Rebuilds a network from its document. Structural problems (missing
    /// units, dangling channels) are errors; wiring that disagrees with a
    /// graph is left for [`validate_network`].
    pub fn from_document(doc: &NetworkDocument) -> Result<Network, NetworkError> {
        let bad = |msg: String| Err(NetworkError::Document(msg));
        if doc.format_version != NETWORK_FORMAT_VERSION {
            return bad(format!("unsupported format version {}", doc.format_version));
        }
        let n = doc.n;
        if n == 0 {
            return bad("network needs at least one column".into());
        }
        if doc.source_slits != n {
            return bad(format!(
                "source has {} slits, expected {n}",
                doc.source_slits
            ));
        }
        let rows = match doc.topology {
            Topology::Feedforward => {
                if doc.feedback_delay.is_some() {
                    return bad("feedforward networks carry no feedback delay".into());
                }
                doc.depth
            }
            Topology::Recurrent => {
                if doc.feedback_delay.is_none() {
                    return bad("recurrent network without feedback delay".into());
                }
                1
            }
        };
        if doc.depth == 0 || doc.depth > n {
            return bad(format!("depth {} outside 1..={n}", doc.depth));
        }
        if doc.units.len() != rows * n {
            return bad(format!(
                "expected {} units, found {}",
                rows * n,
                doc.units.len()
            ));
        }
        let mut units = Vec::with_capacity(rows * n);
        for (idx, rec) in doc.units.iter().enumerate() {
            let id = UnitId::new(idx / n + 1, idx % n + 1);
            if UnitId::new(rec.row, rec.column) != id {
                return bad(format!(
                    "unit {idx} is u({},{}), expected {id}",
                    rec.row, rec.column
                ));
            }
            units.push(Unit {
                id,
                delay: rec.delay,
                slit_count: rec.slit_count,
                successors: Vec::new(),
            });
        }
        let transit = doc.channel_delay + doc.feedback_delay.unwrap_or(0.0);
        let mut source_targets = BTreeSet::new();
        for ch in &doc.channels {
            let in_range =
                |u: &UnitId| u.row >= 1 && u.row <= rows && u.column >= 1 && u.column <= n;
            if !in_range(&ch.to) {
                return bad(format!("channel to missing unit {}", ch.to));
            }
            match ch.from {
                Endpoint::Source => {
                    if ch.to.row != 1 || !source_targets.insert(ch.to.column) {
                        return bad(format!("unexpected source channel to {}", ch.to));
                    }
                    if ch.extra_delay != doc.channel_delay {
                        return bad(format!(
                            "source channel to {} has delay {}",
                            ch.to, ch.extra_delay
                        ));
                    }
                }
                Endpoint::Unit(from) => {
                    if !in_range(&from) {
                        return bad(format!("channel from missing unit {from}"));
                    }
                    if ch.extra_delay != transit {
                        return bad(format!(
                            "channel {from} -> {} has delay {}",
                            ch.to, ch.extra_delay
                        ));
                    }
                    units[(from.row - 1) * n + from.column - 1]
                        .successors
                        .push(ch.to);
                }
            }
        }
        if source_targets.len() != n {
            return bad("source does not reach every row-1 unit".into());
        }
        Ok(Network {
            n,
            topology: doc.topology,
            depth: doc.depth,
            channel_delay: doc.channel_delay,
            feedback_delay: doc.feedback_delay,
            units,
        })
    }
}

/// Serialized form of a [`Network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub format_version: u32,
    pub n: usize,
    pub topology: Topology,
    pub depth: usize,
    pub channel_delay: f64,
    pub feedback_delay: Option<f64>,
    pub source_slits: usize,
    pub units: Vec<UnitRecord>,
    pub channels: Vec<Channel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub row: usize,
    pub column: usize,
    pub delay: f64,
    pub slit_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    VertexCount {
        network: usize,
        graph: usize,
    },
    ExtraChannel {
        from: UnitId,
        to: UnitId,
    },
    MissingChannel {
        from: UnitId,
        to: UnitId,
    },
    SlitCount {
        unit: UnitId,
        slit_count: usize,
        out_degree: usize,
        channels: usize,
    },
    TerminalHasOutputs {
        unit: UnitId,
    },
    InconsistentDelay {
        unit: UnitId,
        delay: f64,
        expected: f64,
    },
    DelaysNotDistinct {
        column: usize,
    },
    FeedbackTooShort {
        feedback: f64,
        max_delay: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VertexCount { network, graph } => {
                write!(
                    f,
                    "network has {network} columns, graph has {graph} vertices"
                )
            }
            Violation::ExtraChannel { from, to } => write!(f, "extra channel {from} -> {to}"),
            Violation::MissingChannel { from, to } => write!(f, "missing channel {from} -> {to}"),
            Violation::SlitCount {
                unit,
                slit_count,
                out_degree,
                channels,
            } => write!(
                f,
                "{unit} has {slit_count} slits, out-degree {out_degree}, {channels} channels"
            ),
            Violation::TerminalHasOutputs { unit } => {
                write!(f, "{unit} is in the detector row but has output channels")
            }
            Violation::InconsistentDelay {
                unit,
                delay,
                expected,
            } => {
                write!(f, "{unit} delays by {delay}, column uses {expected}")
            }
            Violation::DelaysNotDistinct { column } => {
                write!(
                    f,
                    "column {column} delay is not larger than the previous column's"
                )
            }
            Violation::FeedbackTooShort {
                feedback,
                max_delay,
            } => {
                write!(f, "feedback delay {feedback} does not exceed {max_delay}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `net` against `g`: wiring equals adjacency, slit counts equal
/// out-degrees, detector-row units are terminal, delays are per-column and
/// distinct. A unit whose wiring is wrong gets one violation per wrong
/// channel and no separate slit-count violation.
pub fn validate_network(net: &Network, g: &Graph) -> ValidationReport {
    let mut violations = Vec::new();
    if net.n() != g.n() {
        violations.push(Violation::VertexCount {
            network: net.n(),
            graph: g.n(),
        });
        return ValidationReport { violations };
    }
    let delays = net.column_delays();
    for (j, w) in delays.windows(2).enumerate() {
        if w[0].partial_cmp(&w[1]) != Some(Ordering::Less) {
            violations.push(Violation::DelaysNotDistinct { column: j + 2 });
        }
    }
    if let Some(feedback) = net.feedback_delay() {
        let max_delay = delays.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if feedback.partial_cmp(&max_delay) != Some(Ordering::Greater) {
            violations.push(Violation::FeedbackTooShort {
                feedback,
                max_delay,
            });
        }
    }
    let last_row = match net.topology() {
        Topology::Feedforward => net.depth(),
        Topology::Recurrent => 0,
    };
    for unit in net.units() {
        let UnitId { row, column } = unit.id;
        if unit.delay != delays[column - 1] {
            violations.push(Violation::InconsistentDelay {
                unit: unit.id,
                delay: unit.delay,
                expected: delays[column - 1],
            });
        }
        if row == last_row {
            if !unit.successors.is_empty() || unit.slit_count != 0 {
                violations.push(Violation::TerminalHasOutputs { unit: unit.id });
            }
            continue;
        }
        let next_row = match net.topology() {
            Topology::Feedforward => row + 1,
            Topology::Recurrent => 1,
        };
        let expected: BTreeSet<UnitId> = g
            .successors(column)
            .map(|k| UnitId::new(next_row, k))
            .collect();
        let mut wired_ok = true;
        let mut seen = BTreeSet::new();
        for &to in &unit.successors {
            if !expected.contains(&to) || !seen.insert(to) {
                violations.push(Violation::ExtraChannel { from: unit.id, to });
                wired_ok = false;
            }
        }
        for &to in expected.difference(&seen) {
            violations.push(Violation::MissingChannel { from: unit.id, to });
            wired_ok = false;
        }
        let out_degree = expected.len();
        if wired_ok && (unit.slit_count != out_degree || unit.successors.len() != unit.slit_count) {
            violations.push(Violation::SlitCount {
                unit: unit.id,
                slit_count: unit.slit_count,
                out_degree,
                channels: unit.successors.len(),
            });
        }
    }
    ValidationReport { violations }
}
