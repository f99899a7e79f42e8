//! Command-line front end. Every number printed here comes from a library
//! call; this module only parses flags, dispatches and formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{Value, json};
use thiserror::Error;

use crate::delay::{
    DelayError, delta_min_approx, exact_gap_capped, hamiltonian_key, realizable_keys,
};
use crate::graph::{GraphError, brute_force_hamiltonian_paths_capped, count_walks, parse_graph};
use crate::network::{Topology, validate_network};
use crate::procedures::{
    DetectMode, Policy, ProcedureError, Setup, construct_path, construction_cost,
    detect_hamiltonian,
};
use crate::sim::{
    Mode, SimError, detection_probability, probability_balance, propagate_with_phase, sample_shots,
};

/// Version of the machine-readable report layout.
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Emit the compiled network.
    Compile,
    /// Delay table, λ(n), gaps, walk counts and realizable-key census.
    Analyze,
    /// Hamiltonian path detection.
    Detect,
    /// Head-first path construction.
    Construct,
    /// Seeded single-photon shots.
    Sample,
    /// Exhaustive Hamiltonian path search.
    Oracle,
    /// Terminal distribution table with conservation audit.
    Propagate,
    /// Per-pass work of path construction.
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyArg {
    Feedforward,
    Recurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Incoherent,
    Coherent,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    Deterministic,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Human,
    Machine,
}

/// Simulate the single-photon delay network for Hamiltonian path detection.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "photonpath", version, allow_negative_numbers = true)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Graph file (edge-list format).
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value = "feedforward")]
    pub topology: TopologyArg,
    #[arg(long, value_enum, default_value = "incoherent")]
    pub mode: ModeArg,
    /// Channel propagation time δ_c.
    #[arg(long, default_value_t = 0.0)]
    pub channel_delay: f64,
    /// Recurrent feedback delay δ (default 2·δ_n).
    #[arg(long)]
    pub feedback_delay: Option<f64>,
    /// Coherent phase rate ω.
    #[arg(long)]
    pub phase_omega: Option<f64>,
    /// Detection window half-width (default: half the exact gap).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub end_vertex: Option<usize>,
    #[arg(long, value_enum, default_value = "deterministic")]
    pub policy: PolicyArg,
    /// Largest n accepted by the exhaustive routines.
    #[arg(long, default_value_t = crate::graph::DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
    #[arg(long, value_enum, default_value = "human")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("graph has {n} vertices, above the limit of {cap}")]
    Oversize { n: usize, cap: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Graph { path: PathBuf, source: GraphError },
    #[error(transparent)]
    Procedure(#[from] ProcedureError),
}

impl CliError {
    /// 3: bad flag combination, 4: graph too large, 5: unreadable input,
    /// 6: computation refused. Clap's own usage errors exit with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 3,
            CliError::Oversize { .. } => 4,
            CliError::Io { .. } | CliError::Graph { .. } => 5,
            CliError::Procedure(ProcedureError::CapExceeded { .. })
            | CliError::Procedure(ProcedureError::Delay(DelayError::CapExceeded { .. }))
            | CliError::Procedure(ProcedureError::Delay(DelayError::TooManyVertices(_)))
            | CliError::Procedure(ProcedureError::Sim(SimError::TooManyVertices(_))) => 4,
            CliError::Procedure(_) => 6,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<DelayError> for CliError {
    fn from(e: DelayError) -> Self {
        CliError::Procedure(ProcedureError::Delay(e))
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Procedure(ProcedureError::Sim(e))
    }
}

impl From<crate::network::NetworkError> for CliError {
    fn from(e: crate::network::NetworkError) -> Self {
        CliError::Procedure(ProcedureError::Network(e))
    }
}

impl RunConfig {
    fn check_flags(&self) -> Result<(), CliError> {
        if self.shots.is_some() && self.seed.is_none() {
            return Err(usage("--shots requires --seed"));
        }
        if self.shots == Some(0) {
            return Err(usage("--shots must be at least 1"));
        }
        if self.feedback_delay.is_some() && self.topology != TopologyArg::Recurrent {
            return Err(usage(
                "--feedback-delay applies only to --topology recurrent",
            ));
        }
        if self.phase_omega.is_some() && self.mode != ModeArg::Coherent {
            return Err(usage("--phase-omega applies only to --mode coherent"));
        }
        if let Some(e) = self.epsilon
            && !(e > 0.0 && e.is_finite())
        {
            return Err(usage("--epsilon must be positive"));
        }
        if !(self.channel_delay >= 0.0 && self.channel_delay.is_finite()) {
            return Err(usage("--channel-delay must be finite and non-negative"));
        }
        if self.feedback_delay.is_some_and(|d| !d.is_finite()) {
            return Err(usage("--feedback-delay must be finite"));
        }
        if self.phase_omega.is_some_and(|w| !w.is_finite()) {
            return Err(usage("--phase-omega must be finite"));
        }
        if self.policy == PolicyArg::Sampled && self.seed.is_none() {
            return Err(usage("--policy sampled requires --seed"));
        }
        match self.command {
            Command::Sample if self.shots.is_none() => {
                Err(usage("sample requires --shots and --seed"))
            }
            Command::Detect if self.mode == ModeArg::Classical => {
                Err(usage("detect needs --mode incoherent or coherent"))
            }
            Command::Detect if self.shots.is_some() && self.mode != ModeArg::Incoherent => {
                Err(usage("sampled detection uses Born-rule shots; drop --mode"))
            }
            _ => Ok(()),
        }
    }

    fn setup(&self) -> Setup {
        Setup {
            topology: match self.topology {
                TopologyArg::Feedforward => Topology::Feedforward,
                TopologyArg::Recurrent => Topology::Recurrent,
            },
            channel_delay: self.channel_delay,
            feedback_delay: self.feedback_delay,
            epsilon: self.epsilon,
            cap: self.cap,
        }
    }

    fn mode(&self) -> Mode {
        match self.mode {
            ModeArg::Incoherent => Mode::Incoherent,
            ModeArg::Coherent => Mode::Coherent,
            ModeArg::Classical => Mode::Classical,
        }
    }
}

/// Executes `config` and returns the rendered report.
pub fn run(config: &RunConfig) -> Result<String, CliError> {
    config.check_flags()?;
    let text = std::fs::read_to_string(&config.graph).map_err(|source| CliError::Io {
        path: config.graph.clone(),
        source,
    })?;
    let g = parse_graph(&text).map_err(|source| CliError::Graph {
        path: config.graph.clone(),
        source,
    })?;
    let enumerates = !matches!(config.command, Command::Compile);
    if enumerates && g.n() > config.cap {
        return Err(CliError::Oversize {
            n: g.n(),
            cap: config.cap,
        });
    }
    let setup = config.setup();
    let table = setup.delay_table(&g)?;

    let mut effective = BTreeMap::new();
    effective.insert("channel_delay", json!(config.channel_delay));
    effective.insert("mode", json!(config.mode));
    effective.insert("topology", json!(config.topology));
    if matches!(
        config.command,
        Command::Analyze | Command::Detect | Command::Construct
    ) {
        effective.insert("epsilon", json!(setup.epsilon(&g, &table)?));
    }
    if setup.topology == Topology::Recurrent {
        effective.insert("feedback_delay", json!(setup.effective_feedback(&table)));
    }
    if config.mode == ModeArg::Coherent {
        effective.insert("phase_omega", json!(config.phase_omega.unwrap_or(0.0)));
    }

    let (result, human): (Value, String) = match config.command {
        Command::Compile => {
            let net = setup.network(&g, &table)?;
            let report = validate_network(&net, &g);
            let doc = net.to_document();
            let mut h = format!(
                "{} network: n = {}, {} units, {} channels, depth {}\n",
                net.topology(),
                net.n(),
                doc.units.len(),
                doc.channels.len(),
                net.depth()
            );
            for u in &doc.units {
                let _ = writeln!(
                    h,
                    "unit ({},{}) delay {} slits {}",
                    u.row, u.column, u.delay, u.slit_count
                );
            }
            for c in &doc.channels {
                let _ = writeln!(h, "channel {} -> {} extra {}", c.from, c.to, c.extra_delay);
            }
            let _ = writeln!(h, "violations: {}", report.violations.len());
            (json!({ "network": doc, "validation": report }), h)
        }
        Command::Analyze => {
            let n = g.n();
            let approx = delta_min_approx(n).ok();
            let gap = exact_gap_capped(&g, &table, config.cap)?;
            let census = realizable_keys(&g, n)?;
            let walks = count_walks(&g, n - 1);
            let epsilon = setup.epsilon(&g, &table)?;
            let ham_realizable = census.terminal_keys.contains(&hamiltonian_key(n)?);
            let max_exponent = census.terminal_keys.iter().map(|k| k.max_exponent()).max();
            let mut h = String::new();
            let _ = writeln!(h, "n = {n}");
            let _ = writeln!(h, "primes = {:?}", table.primes());
            let _ = writeln!(h, "delays = {:?}", table.delays());
            let _ = writeln!(h, "lambda = {}", table.lambda());
            let _ = writeln!(h, "delta_min_approx = {}", fmt_opt(approx));
            let _ = writeln!(
                h,
                "delta_min_exact = {}",
                fmt_opt(gap.as_ref().map(|g| g.gap))
            );
            if let Some(gap) = &gap {
                let keys: Vec<String> = gap.nearest.iter().map(|k| k.to_string()).collect();
                let _ = writeln!(h, "nearest keys = {}", keys.join(" "));
            }
            let _ = writeln!(h, "epsilon = {epsilon}");
            let _ = writeln!(h, "walks of length {} = {walks}", n - 1);
            let _ = writeln!(h, "hamiltonian key realizable = {ham_realizable}");
            let _ = writeln!(h, "realizable keys per row = {:?}", census.keys_per_row);
            let _ = writeln!(h, "realizable cells per row = {:?}", census.cells_per_row);
            (
                json!({
                    "n": n,
                    "primes": table.primes(),
                    "delays": table.delays(),
                    "channel_delay": table.channel_delay(),
                    "lambda": table.lambda(),
                    "delta_min_approx": approx,
                    "delta_min_exact": gap.as_ref().map(|g| g.gap),
                    "nearest_keys": gap.as_ref().map(|g| g.nearest.clone()),
                    "epsilon": epsilon,
                    "walk_length": n - 1,
                    "walks": walks.to_string(),
                    "hamiltonian_key_realizable": ham_realizable,
                    "max_exponent": max_exponent,
                    "exponent_bound": n.div_ceil(2),
                    "realizable_keys_per_row": census.keys_per_row,
                    "realizable_cells_per_row": census.cells_per_row,
                }),
                h,
            )
        }
        Command::Detect if config.shots.is_none() && config.mode == ModeArg::Coherent => {
            let net = setup.network(&g, &table)?;
            let dist =
                propagate_with_phase(&net, Mode::Coherent, config.phase_omega.unwrap_or(0.0))?;
            let epsilon = setup.epsilon(&g, &table)?;
            let p = detection_probability(&dist, &table, epsilon)?;
            let h = format!(
                "coherent detection: total {} per vertex {:?}\n",
                p.total, p.per_column
            );
            (json!({ "verdict": p.total > 0.0, "detection": p }), h)
        }
        Command::Detect => {
            let mode = match (config.shots, config.seed) {
                (Some(shots), Some(seed)) => DetectMode::Sampled { shots, seed },
                _ => DetectMode::Exact,
            };
            let o = detect_hamiltonian(&g, mode, &setup)?;
            let mut h = format!(
                "hamiltonian path detected: {}\nend vertices: {:?}\ntotal: {}\nper vertex: {:?}\nwindow: [{}, {}]\n",
                o.hamiltonian_detected,
                o.end_vertices,
                o.total,
                o.per_vertex,
                o.window_start,
                o.window_end
            );
            if o.inconclusive {
                h.push_str(
                    "no click in the window; this does not show that no Hamiltonian path exists\n",
                );
            }
            if let Some(w) = &o.warning {
                let _ = writeln!(h, "warning: {w}");
            }
            (
                json!({ "verdict": o.hamiltonian_detected, "detection": o }),
                h,
            )
        }
        Command::Construct => {
            let policy = match (config.policy, config.seed) {
                (PolicyArg::Sampled, Some(seed)) => Policy::Sampled { seed },
                _ => Policy::Deterministic,
            };
            let end = match config.end_vertex {
                Some(v) => Some(v),
                None => detect_hamiltonian(&g, DetectMode::Exact, &setup)?
                    .end_vertices
                    .first()
                    .copied(),
            };
            match end {
                None => (
                    json!({ "verdict": false, "construction": Value::Null }),
                    "no Hamiltonian path ends at any vertex\n".to_string(),
                ),
                Some(end) => {
                    let r = construct_path(&g, end, policy, &setup)?;
                    let mut h = format!("h = {:?}\n", r.path);
                    for p in &r.passes {
                        let _ = writeln!(
                            h,
                            "pass {}: rows {} head {} key {} instant {} candidates {:?} chose {}",
                            p.pass,
                            p.rows,
                            p.head,
                            p.target_key,
                            p.expected_instant,
                            p.candidates.iter().map(|c| c.0).collect::<Vec<_>>(),
                            p.chosen
                        );
                    }
                    (json!({ "verdict": true, "construction": r }), h)
                }
            }
        }
        Command::Sample => {
            let net = setup.network(&g, &table)?;
            let shots = config.shots.expect("checked");
            let seed = config.seed.expect("checked");
            let tally = sample_shots(&net, shots, seed)?;
            let hits = tally.hamiltonian_hits();
            let ham_total = tally.hamiltonian_total();
            let outcomes: Vec<Value> = tally
                .detected
                .iter()
                .map(|((v, k), c)| json!({ "vertex": v, "key": k, "count": c }))
                .collect();
            let mut h = format!(
                "shots {shots} seed {seed}\nhamiltonian-instant hits {ham_total} (frequency {})\nlost {}\n",
                ham_total as f64 / shots as f64,
                tally.lost
            );
            for ((v, k), c) in &tally.detected {
                let _ = writeln!(h, "{v}\t{k}\t{c}");
            }
            (
                json!({
                    "shots": shots,
                    "seed": seed,
                    "hamiltonian_hits": hits,
                    "hamiltonian_frequency": ham_total as f64 / shots as f64,
                    "lost": tally.lost,
                    "outcomes": outcomes,
                }),
                h,
            )
        }
        Command::Oracle => {
            let paths =
                brute_force_hamiltonian_paths_capped(&g, config.cap).map_err(|e| match e {
                    GraphError::CapExceeded { n, cap } => CliError::Oversize { n, cap },
                    other => CliError::Graph {
                        path: config.graph.clone(),
                        source: other,
                    },
                })?;
            let mut h = format!("{} Hamiltonian paths\n", paths.len());
            for p in &paths {
                let _ = writeln!(h, "{p:?}");
            }
            (json!({ "count": paths.len(), "paths": paths }), h)
        }
        Command::Propagate => {
            let net = setup.network(&g, &table)?;
            let dist =
                propagate_with_phase(&net, config.mode(), config.phase_omega.unwrap_or(0.0))?;
            let balance = probability_balance(&dist);
            let detection = if dist.mode == Mode::Classical {
                None
            } else {
                Some(detection_probability(
                    &dist,
                    &table,
                    setup.epsilon(&g, &table)?,
                )?)
            };
            let mut h = dist.to_table();
            let _ = writeln!(
                h,
                "total {} lost {} deviation {}",
                balance.total_mass,
                balance.lost_mass,
                fmt_opt(balance.deviation)
            );
            if let Some(norm) = balance.coherent_normalization {
                let _ = writeln!(h, "coherent normalization {norm}");
            }
            (
                json!({
                    "rows": dist.rows(),
                    "balance": balance,
                    "detection": detection,
                    "stats": dist.stats,
                }),
                h,
            )
        }
        Command::Cost => {
            let c = construction_cost(&g, &setup)?;
            let mut h = format!(
                "n = {} passes = {} (n^2 ln n = {})\n",
                c.n, c.pass_count, c.reference
            );
            for p in &c.passes {
                let _ = writeln!(
                    h,
                    "pass {}: rows {} cells {} transitions {}",
                    p.pass, p.rows, p.cells, p.transitions
                );
            }
            (serde_json::to_value(&c).expect("serializable"), h)
        }
    };

    Ok(match config.format {
        Format::Human => human,
        Format::Machine => {
            let doc = json!({
                "format_version": REPORT_FORMAT_VERSION,
                "command": config.command,
                "config": config,
                "effective": effective,
                "result": result,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
            s.push('\n');
            s
        }
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}
