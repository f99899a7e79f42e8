//! Hamiltonian path detection and head-first path construction.
//!
//! Detection opens the row-`n` detectors only around λ(n). Construction
//! starts from a vertex known to end a Hamiltonian path and repeatedly gates
//! the detectors one row earlier, at the instant a prefix avoiding every
//! vertex already fixed would arrive; the column that clicks is prepended.

use std::collections::{BTreeMap, BTreeSet};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay::{ArrivalKey, DelayError, DelayTable, default_epsilon, hamiltonian_key};
use crate::graph::{DEFAULT_ENUMERATION_CAP, Graph};
use crate::network::{Network, NetworkError, Topology, compile_feedforward, compile_recurrent};
use crate::sim::{
    CellWeight, Mode, PropagationStats, SimError, detection_probability, propagate, sample_shots,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcedureError {
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("graph has {n} vertices, exceeding the enumeration cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("vertex {vertex} out of range 1..={n}")]
    NoSuchVertex { vertex: usize, n: usize },
    #[error("sampled detection needs at least one shot")]
    NoShots,
    #[error("no Hamiltonian path ends at vertex {0}")]
    NoPathEndsAt(usize),
    #[error("pass {pass}: no adjacent vertex reaches the target key {key}")]
    ImpossibleState { pass: usize, key: ArrivalKey },
}

/// Physical parameters shared by the procedures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub topology: Topology,
    /// Channel propagation time `δ_c`.
    pub channel_delay: f64,
    /// Recurrent feedback delay; defaults to twice the largest unit delay.
    pub feedback_delay: Option<f64>,
    /// Detection half-width; defaults to [`default_epsilon`].
    pub epsilon: Option<f64>,
    pub cap: usize,
}

impl Default for Setup {
    fn default() -> Self {
        Self {
            topology: Topology::Feedforward,
            channel_delay: 0.0,
            feedback_delay: None,
            epsilon: None,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl Setup {
    pub fn delay_table(&self, g: &Graph) -> Result<DelayTable, ProcedureError> {
        Ok(DelayTable::first_primes(g.n(), self.channel_delay)?)
    }

    /// Feedback delay actually used for `table`.
    pub fn effective_feedback(&self, table: &DelayTable) -> f64 {
        self.feedback_delay.unwrap_or(2.0 * table.max_delay())
    }

    /// Full-depth network for `g`.
    pub fn network(&self, g: &Graph, table: &DelayTable) -> Result<Network, ProcedureError> {
        Ok(match self.topology {
            Topology::Feedforward => compile_feedforward(g, table)?,
            Topology::Recurrent => compile_recurrent(g, table, self.effective_feedback(table))?,
        })
    }

    pub fn epsilon(&self, g: &Graph, table: &DelayTable) -> Result<f64, ProcedureError> {
        match self.epsilon {
            Some(e) => Ok(e),
            None => Ok(default_epsilon(g, table)?),
        }
    }

    fn check_cap(&self, g: &Graph) -> Result<(), ProcedureError> {
        if g.n() > self.cap {
            return Err(ProcedureError::CapExceeded {
                n: g.n(),
                cap: self.cap,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DetectMode {
    /// Exact incoherent probabilities.
    Exact,
    /// Simulated single-photon shots.
    Sampled { shots: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub hamiltonian_detected: bool,
    /// Columns with positive Hamiltonian-instant weight (exact) or at least
    /// one hit (sampled).
    pub end_vertices: BTreeSet<usize>,
    /// Probability (exact) or hit frequency (sampled) per column.
    pub per_vertex: BTreeMap<usize, f64>,
    pub total: f64,
    pub mode: DetectMode,
    pub epsilon: f64,
    pub window_start: f64,
    pub window_end: f64,
    /// Sampled shots that clicked at the Hamiltonian instant.
    pub hits: Option<u64>,
    /// Set when a sampled run saw nothing: a miss does not show that no
    /// Hamiltonian path exists.
    pub inconclusive: bool,
    pub warning: Option<String>,
}

/// Runs the detection procedure. The verdict is taken at the Hamiltonian
/// instant itself (the all-ones key); the `[λ, λ + ε]` window is reported
/// alongside, with a warning when it would also admit other arrivals.
pub fn detect_hamiltonian(
    g: &Graph,
    mode: DetectMode,
    setup: &Setup,
) -> Result<DetectionOutcome, ProcedureError> {
    setup.check_cap(g)?;
    let table = setup.delay_table(g)?;
    let net = setup.network(g, &table)?;
    let epsilon = setup.epsilon(g, &table)?;
    let ham = hamiltonian_key(g.n())?;
    let dist = propagate(&net, Mode::Incoherent)?;
    let window = detection_probability(&dist, &table, epsilon)?;

    let (per_vertex, hits): (BTreeMap<usize, f64>, Option<u64>) = match mode {
        DetectMode::Exact => (
            (1..=g.n())
                .map(|c| {
                    let p = dist
                        .weight(c, &ham)
                        .and_then(|w| w.probability())
                        .unwrap_or(0.0);
                    (c, p)
                })
                .collect(),
            None,
        ),
        DetectMode::Sampled { shots, seed } => {
            if shots == 0 {
                return Err(ProcedureError::NoShots);
            }
            let tally = sample_shots(&net, shots, seed)?;
            let counts = tally.hamiltonian_hits();
            (
                (1..=g.n())
                    .map(|c| {
                        (
                            c,
                            counts.get(&c).copied().unwrap_or(0) as f64 / shots as f64,
                        )
                    })
                    .collect(),
                Some(tally.hamiltonian_total()),
            )
        }
    };
    let total: f64 = per_vertex.values().sum();
    let detected = match hits {
        Some(h) => h > 0,
        None => total > 0.0,
    };
    Ok(DetectionOutcome {
        hamiltonian_detected: detected,
        end_vertices: per_vertex
            .iter()
            .filter(|(_, p)| **p > 0.0)
            .map(|(c, _)| *c)
            .collect(),
        per_vertex,
        total,
        mode,
        epsilon,
        window_start: window.window_start,
        window_end: window.window_end,
        hits,
        inconclusive: hits == Some(0),
        warning: window.warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Policy {
    /// Smallest candidate vertex.
    Deterministic,
    /// Candidate drawn with probability proportional to its cell weight.
    Sampled { seed: u64 },
}

/// One reduced-network measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass: usize,
    /// Rows (or traversals) before the gated detectors.
    pub rows: usize,
    /// Current first entry of the path vector.
    pub head: usize,
    pub target_key: ArrivalKey,
    /// Arrival instant of `target_key` at the truncated detectors.
    pub expected_instant: f64,
    pub window_end: f64,
    /// Candidate columns and their incoherent weights.
    pub candidates: Vec<(usize, f64)>,
    pub chosen: usize,
    pub stats: PropagationStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub end_vertex: usize,
    pub policy: Policy,
    /// The path vector `h`, first vertex first.
    pub path: Vec<usize>,
    pub passes: Vec<PassRecord>,
    pub epsilon: f64,
}

/// Builds a Hamiltonian path ending at `end_vertex` head-first over `n - 1`
/// passes of truncated networks.
pub fn construct_path(
    g: &Graph,
    end_vertex: usize,
    policy: Policy,
    setup: &Setup,
) -> Result<ConstructionReport, ProcedureError> {
    setup.check_cap(g)?;
    let n = g.n();
    if end_vertex == 0 || end_vertex > n {
        return Err(ProcedureError::NoSuchVertex {
            vertex: end_vertex,
            n,
        });
    }
    let table = setup.delay_table(g)?;
    let full = setup.network(g, &table)?;
    let epsilon = setup.epsilon(g, &table)?;
    let ham = hamiltonian_key(n)?;
    let confirmed = propagate(&full, Mode::Incoherent)?
        .weight(end_vertex, &ham)
        .and_then(|w| w.probability())
        .is_some_and(|p| p > 0.0);
    if !confirmed {
        return Err(ProcedureError::NoPathEndsAt(end_vertex));
    }

    let mut rng = match policy {
        Policy::Sampled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Policy::Deterministic => None,
    };
    // stored tail-first while growing; reversed at the end
    let mut reversed = vec![end_vertex];
    let mut target = ham.without(end_vertex);
    let mut passes = Vec::with_capacity(n.saturating_sub(1));
    for pass in 1..n {
        let rows = n - pass;
        let head = *reversed.last().expect("path vector is never empty");
        let dist = propagate(&full.truncated(rows)?, Mode::Incoherent)?;
        let candidates: Vec<(usize, f64)> = g
            .arcs()
            .into_iter()
            .filter(|&(k, to)| to == head && !reversed.contains(&k))
            .filter_map(|(k, _)| match dist.weight(k, &target) {
                Some(CellWeight::Mass(m)) if m > 0.0 => Some((k, m)),
                _ => None,
            })
            .collect();
        let chosen = match &mut rng {
            _ if candidates.is_empty() => {
                return Err(ProcedureError::ImpossibleState { pass, key: target });
            }
            None => candidates[0].0,
            Some(rng) => pick_weighted(&candidates, rng),
        };
        let expected_instant = dist.time(&target);
        passes.push(PassRecord {
            pass,
            rows,
            head,
            target_key: target,
            expected_instant,
            window_end: expected_instant + epsilon,
            candidates,
            chosen,
            stats: dist.stats,
        });
        reversed.push(chosen);
        target = target.without(chosen);
    }
    reversed.reverse();
    Ok(ConstructionReport {
        end_vertex,
        policy,
        path: reversed,
        passes,
        epsilon,
    })
}

fn pick_weighted(candidates: &[(usize, f64)], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = candidates.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for &(k, w) in candidates {
        if u < w {
            return k;
        }
        u -= w;
    }
    candidates.last().expect("non-empty").0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassCost {
    pub pass: usize,
    pub rows: usize,
    pub cells: u64,
    pub transitions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub n: usize,
    pub pass_count: usize,
    pub passes: Vec<PassCost>,
    pub total_cells: u64,
    pub total_transitions: u64,
    /// `n² ln n`, for scaling comparisons.
    pub reference: f64,
}

/// Work of the `n - 1` truncated propagations a construction performs.
/// The passes do not depend on which vertices end up in the path.
pub fn construction_cost(g: &Graph, setup: &Setup) -> Result<CostReport, ProcedureError> {
    setup.check_cap(g)?;
    let n = g.n();
    let table = setup.delay_table(g)?;
    let full = setup.network(g, &table)?;
    let mut passes = Vec::with_capacity(n.saturating_sub(1));
    for pass in 1..n {
        let rows = n - pass;
        let stats = propagate(&full.truncated(rows)?, Mode::Incoherent)?.stats;
        passes.push(PassCost {
            pass,
            rows,
            cells: stats.total_cells(),
            transitions: stats.transitions,
        });
    }
    let nf = n as f64;
    Ok(CostReport {
        n,
        pass_count: passes.len(),
        total_cells: passes.iter().map(|p| p.cells).sum(),
        total_transitions: passes.iter().map(|p| p.transitions).sum(),
        passes,
        reference: nf * nf * nf.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::brute_force_hamiltonian_paths;

    const TOL: f64 = 1e-12;

    #[test]
    fn exact_detection() {
        let setup = Setup::default();
        let k3 =
            detect_hamiltonian(&Graph::complete(3).unwrap(), DetectMode::Exact, &setup).unwrap();
        assert!(k3.hamiltonian_detected);
        assert_eq!(k3.end_vertices, BTreeSet::from([1, 2, 3]));
        assert!((k3.total - 0.5).abs() < TOL);
        assert!(!k3.inconclusive);

        let s4 = detect_hamiltonian(&Graph::star(4).unwrap(), DetectMode::Exact, &setup).unwrap();
        assert!(!s4.hamiltonian_detected);
        assert_eq!(s4.total, 0.0);
        assert!(s4.end_vertices.is_empty());
    }

    #[test]
    fn single_shot_miss_is_flagged() {
        let k3 = Graph::complete(3).unwrap();
        let setup = Setup::default();
        let miss = (0..64)
            .map(|seed| {
                detect_hamiltonian(&k3, DetectMode::Sampled { shots: 1, seed }, &setup).unwrap()
            })
            .find(|o| !o.hamiltonian_detected)
            .expect("half of all shots miss");
        assert!(miss.inconclusive);
        assert_eq!(miss.hits, Some(0));
        assert!(matches!(
            detect_hamiltonian(&k3, DetectMode::Sampled { shots: 0, seed: 1 }, &setup),
            Err(ProcedureError::NoShots)
        ));
    }

    #[test]
    fn construction_examples() {
        let setup = Setup::default();
        let p3 = Graph::path(3).unwrap();
        let r = construct_path(&p3, 3, Policy::Deterministic, &setup).unwrap();
        assert_eq!(r.path, vec![1, 2, 3]);
        assert_eq!(r.passes.len(), 2);

        let k3 = Graph::complete(3).unwrap();
        let r = construct_path(&k3, 3, Policy::Deterministic, &setup).unwrap();
        assert_eq!(
            r.passes[0]
                .candidates
                .iter()
                .map(|c| c.0)
                .collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert_eq!(r.path, vec![2, 1, 3]);
        assert!(
            brute_force_hamiltonian_paths(&k3)
                .unwrap()
                .contains(&r.path)
        );

        assert_eq!(
            construct_path(&Graph::star(4).unwrap(), 2, Policy::Deterministic, &setup),
            Err(ProcedureError::NoPathEndsAt(2))
        );
        assert_eq!(
            construct_path(&p3, 2, Policy::Deterministic, &setup),
            Err(ProcedureError::NoPathEndsAt(2))
        );
        assert!(matches!(
            construct_path(&p3, 4, Policy::Deterministic, &setup),
            Err(ProcedureError::NoSuchVertex { .. })
        ));
    }

    #[test]
    fn window_shifts_by_fixed_delays() {
        let g = Graph::complete(5).unwrap();
        let setup = Setup {
            channel_delay: 0.1,
            ..Setup::default()
        };
        let table = setup.delay_table(&g).unwrap();
        let r = construct_path(&g, 4, Policy::Deterministic, &setup).unwrap();
        let mut fixed = vec![4];
        for p in &r.passes {
            let removed: f64 = fixed
                .iter()
                .map(|&v| table.delay(v) + table.channel_delay())
                .sum();
            assert!((p.expected_instant - (table.lambda() - removed)).abs() < 1e-12);
            fixed.push(p.chosen);
        }
    }

    #[test]
    fn recurrent_construction_matches() {
        let g = Graph::complete(4).unwrap();
        let rec = Setup {
            topology: Topology::Recurrent,
            ..Setup::default()
        };
        let a = construct_path(&g, 2, Policy::Deterministic, &rec).unwrap();
        let b = construct_path(&g, 2, Policy::Deterministic, &Setup::default()).unwrap();
        assert_eq!(a.path, b.path);
    }

    #[test]
    fn cost_report() {
        let setup = Setup::default();
        let c = construction_cost(&Graph::path(3).unwrap(), &setup).unwrap();
        assert_eq!(c.pass_count, 2);
        let c = construction_cost(&Graph::complete(8).unwrap(), &setup).unwrap();
        assert_eq!(c.pass_count, 7);
        assert!(
            c.passes
                .windows(2)
                .all(|w| w[0].cells >= w[1].cells && w[0].rows > w[1].rows)
        );
        for n in 4..=10 {
            let c = construction_cost(&Graph::complete(n).unwrap(), &setup).unwrap();
            assert_eq!(c.pass_count, n - 1);
        }
    }
}
