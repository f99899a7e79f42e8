//! Exact propagation of the photon through a compiled network.
//!
//! The state after each unit traversal is a sparse map from
//! `(column, arrival key)` to a weight. Weights landing on the same cell
//! merge by addition, so the state size is bounded by the realizable keys
//! rather than the (exponential) number of walks.
//!
//! * incoherent: probability mass, split `1/k` per slit; equals Born-rule
//!   sampling of equal splitters and conserves total probability.
//! * coherent: amplitudes, split `1/√k` per slit, with an optional phase
//!   `e^{iωd}` per delay `d` traversed. Same-time paths add before squaring,
//!   which overshoots unit norm whenever distinct paths merge.
//! * classical: exact pulse counts, every slit emits a full copy.
//!
//! Detection happens only after the last row; there is deliberately no
//! mid-network query.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::AddAssign;

use num_bigint::BigUint;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay::{
    ArrivalKey, DelayError, DelayTable, MAX_KEY_VERTICES, hamiltonian_key, is_hamiltonian_key,
};
use crate::network::{Network, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Key(#[from] DelayError),
    #[error("propagation supports at most {MAX_KEY_VERTICES} vertices, got {0}")]
    TooManyVertices(usize),
    #[error("detection windows need incoherent or coherent weights, not {0}")]
    ModeUnsupported(Mode),
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("distribution covers {depth} of {n} rows; detection needs a full traversal")]
    PartialTraversal { depth: usize, n: usize },
    #[error("distribution has {dist} columns but the delay table has {table}")]
    TableMismatch { dist: usize, table: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Incoherent,
    Coherent,
    Classical,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Incoherent => "incoherent",
            Mode::Coherent => "coherent",
            Mode::Classical => "classical",
        })
    }
}

/// Weight attached to one terminal cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellWeight {
    Mass(f64),
    Amplitude { re: f64, im: f64 },
    Pulses(u128),
}

impl CellWeight {
    /// Detection probability carried by the cell (squared magnitude for
    /// amplitudes). `None` for pulse counts.
    pub fn probability(&self) -> Option<f64> {
        match *self {
            CellWeight::Mass(m) => Some(m),
            CellWeight::Amplitude { re, im } => Some(re * re + im * im),
            CellWeight::Pulses(_) => None,
        }
    }
}

impl fmt::Display for CellWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellWeight::Mass(m) => write!(f, "{m}"),
            CellWeight::Amplitude { re, im } => {
                if *im < 0.0 {
                    write!(f, "{re}-{}i", -im)
                } else {
                    write!(f, "{re}+{im}i")
                }
            }
            CellWeight::Pulses(p) => write!(f, "{p}"),
        }
    }
}

trait Weight: Copy + Default + AddAssign {
    fn source(n: usize) -> Self;
    /// Share passed to each of `slits` outputs.
    fn split(self, slits: usize) -> Self;
    /// Weight after a delay of `d`.
    fn delayed(self, d: f64, omega: f64) -> Self;
    fn into_cell(self) -> CellWeight;
}

#[derive(Clone, Copy, Default)]
struct Mass(f64);

impl AddAssign for Mass {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Weight for Mass {
    fn source(n: usize) -> Self {
        Mass(1.0 / n as f64)
    }
    fn split(self, slits: usize) -> Self {
        Mass(self.0 / slits as f64)
    }
    fn delayed(self, _: f64, _: f64) -> Self {
        self
    }
    fn into_cell(self) -> CellWeight {
        CellWeight::Mass(self.0)
    }
}

#[derive(Clone, Copy, Default)]
struct Amplitude(Complex64);

impl AddAssign for Amplitude {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Weight for Amplitude {
    fn source(n: usize) -> Self {
        Amplitude(Complex64::new(1.0 / (n as f64).sqrt(), 0.0))
    }
    fn split(self, slits: usize) -> Self {
        Amplitude(self.0 / (slits as f64).sqrt())
    }
    fn delayed(self, d: f64, omega: f64) -> Self {
        if omega == 0.0 || d == 0.0 {
            self
        } else {
            Amplitude(self.0 * Complex64::from_polar(1.0, omega * d))
        }
    }
    fn into_cell(self) -> CellWeight {
        CellWeight::Amplitude {
            re: self.0.re,
            im: self.0.im,
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Pulses(u128);

impl AddAssign for Pulses {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Weight for Pulses {
    fn source(_: usize) -> Self {
        Pulses(1)
    }
    fn split(self, _: usize) -> Self {
        self
    }
    fn delayed(self, _: f64, _: f64) -> Self {
        self
    }
    fn into_cell(self) -> CellWeight {
        CellWeight::Pulses(self.0)
    }
}

/// Work done by one propagation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationStats {
    /// Occupied `(column, key)` cells after each traversal.
    pub cells_per_step: Vec<usize>,
    /// Slit-to-unit transfers performed.
    pub transitions: u64,
}

impl PropagationStats {
    pub fn total_cells(&self) -> u64 {
        self.cells_per_step.iter().map(|&c| c as u64).sum()
    }
}

/// What the row-`depth` detectors see.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalDistribution {
    pub mode: Mode,
    pub n: usize,
    pub depth: usize,
    pub topology: Topology,
    pub omega: f64,
    /// Unit delays `δ_j` of the network.
    pub delays: Vec<f64>,
    /// Channel and feedback delay common to every arrival.
    pub channel_offset: f64,
    /// Keyed by terminal column, then exponent vector.
    pub cells: BTreeMap<(usize, ArrivalKey), CellWeight>,
    /// Probability (incoherent) or squared magnitude (coherent) stopped at
    /// absorbing units.
    pub lost_mass: f64,
    /// Pulses stopped at absorbing units (classical).
    pub lost_pulses: u128,
    pub stats: PropagationStats,
}

/// Neumaier summation; starts from `0.0` so an empty sum is never `-0`.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + carry
}

impl TerminalDistribution {
    /// Arrival time of `key` at this network's detectors.
    pub fn time(&self, key: &ArrivalKey) -> f64 {
        let unit: f64 = key
            .exponents()
            .zip(&self.delays)
            .map(|(c, d)| f64::from(c) * d)
            .sum();
        unit + self.channel_offset
    }

    /// Summed probability over all cells; `None` in classical mode.
    pub fn total_mass(&self) -> Option<f64> {
        let probs: Option<Vec<f64>> = self.cells.values().map(CellWeight::probability).collect();
        probs.map(compensated_sum)
    }

    /// Summed pulse count; `None` outside classical mode.
    pub fn total_pulses(&self) -> Option<BigUint> {
        self.cells
            .values()
            .map(|w| match w {
                CellWeight::Pulses(p) => Some(BigUint::from(*p)),
                _ => None,
            })
            .sum()
    }

    /// Weight at `(column, key)`, if realized.
    pub fn weight(&self, column: usize, key: &ArrivalKey) -> Option<CellWeight> {
        self.cells.get(&(column, *key)).copied()
    }

    /// Tab-separated table: vertex, exponent vector, time, weight, mode.
    pub fn to_table(&self) -> String {
        let mut out = String::from("vertex\tkey\ttime\tweight\tmode\n");
        for ((column, key), w) in &self.cells {
            out.push_str(&format!(
                "{column}\t{key}\t{}\t{w}\t{}\n",
                self.time(key),
                self.mode
            ));
        }
        out
    }

    /// Row records in table order, for machine-readable export.
    pub fn rows(&self) -> Vec<DistributionRow> {
        self.cells
            .iter()
            .map(|(&(vertex, key), &weight)| DistributionRow {
                vertex,
                key,
                time: self.time(&key),
                weight,
                mode: self.mode,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub vertex: usize,
    pub key: ArrivalKey,
    pub time: f64,
    pub weight: CellWeight,
    pub mode: Mode,
}

/// Propagates with zero coherent phase.
pub fn propagate(net: &Network, mode: Mode) -> Result<TerminalDistribution, SimError> {
    propagate_with_phase(net, mode, 0.0)
}

/// Propagates the source photon to the detectors. `omega` only affects
/// coherent mode.
pub fn propagate_with_phase(
    net: &Network,
    mode: Mode,
    omega: f64,
) -> Result<TerminalDistribution, SimError> {
    if net.n() > MAX_KEY_VERTICES {
        return Err(SimError::TooManyVertices(net.n()));
    }
    let mut dist = TerminalDistribution {
        mode,
        n: net.n(),
        depth: net.depth(),
        topology: net.topology(),
        omega,
        delays: net.column_delays(),
        channel_offset: net.channel_offset(),
        cells: BTreeMap::new(),
        lost_mass: 0.0,
        lost_pulses: 0,
        stats: PropagationStats::default(),
    };
    match mode {
        Mode::Incoherent => {
            let lost: Vec<Mass> = run::<Mass>(net, omega, &mut dist)?;
            dist.lost_mass = compensated_sum(lost.iter().map(|m| m.0));
        }
        Mode::Coherent => {
            let lost: Vec<Amplitude> = run::<Amplitude>(net, omega, &mut dist)?;
            dist.lost_mass = compensated_sum(lost.iter().map(|a| a.0.norm_sqr()));
        }
        Mode::Classical => {
            let lost: Vec<Pulses> = run::<Pulses>(net, omega, &mut dist)?;
            dist.lost_pulses = lost.iter().map(|p| p.0).sum();
        }
    }
    Ok(dist)
}

/// Runs the row-by-row recursion, fills `dist.cells` and `dist.stats`, and
/// returns the merged weights that hit absorbing units.
fn run<W: Weight>(
    net: &Network,
    omega: f64,
    dist: &mut TerminalDistribution,
) -> Result<Vec<W>, SimError> {
    let n = net.n();
    let transit = net.transit_delay();
    let mut state: FxHashMap<(usize, ArrivalKey), W> = FxHashMap::default();
    for column in 1..=n {
        let unit = net.unit_at(1, column);
        let w = W::source(n)
            .delayed(net.channel_delay(), omega)
            .delayed(unit.delay, omega);
        *state
            .entry((column, ArrivalKey::unit(n, column)?))
            .or_default() += w;
    }
    dist.stats.cells_per_step.push(state.len());

    let mut lost = Vec::new();
    for step in 1..net.depth() {
        let mut next: FxHashMap<(usize, ArrivalKey), W> = FxHashMap::default();
        for (&(column, key), &w) in &state {
            let unit = net.unit_at(step, column);
            if unit.is_absorbing() {
                lost.push(w);
                continue;
            }
            let share = w.split(unit.successors.len()).delayed(transit, omega);
            for to in &unit.successors {
                let target = net.unit_at(step + 1, to.column);
                let key = key.with_visit(to.column)?;
                *next.entry((to.column, key)).or_default() += share.delayed(target.delay, omega);
                dist.stats.transitions += 1;
            }
        }
        state = next;
        dist.stats.cells_per_step.push(state.len());
    }
    dist.cells = state
        .into_iter()
        .map(|(cell, w)| (cell, w.into_cell()))
        .collect();
    Ok(lost)
}

/// Probability of a click inside `[λ, λ + ε]`, per terminal column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionProbability {
    pub mode: Mode,
    pub epsilon: f64,
    /// Hamiltonian instant λ, including channel and feedback offsets.
    pub window_start: f64,
    pub window_end: f64,
    /// Every column `1..=n`, zeros included.
    pub per_column: BTreeMap<usize, f64>,
    pub total: f64,
    /// Smallest separation between λ and another realized arrival.
    pub exact_gap: Option<f64>,
    /// Realized non-Hamiltonian keys that fell inside the window.
    pub contaminating_keys: Vec<ArrivalKey>,
    pub warning: Option<String>,
}

/// Sums detection probability over cells whose arrival lies in
/// `[λ, λ + ε]`. The all-ones key is matched exactly; another key is in the
/// window when its prime product exceeds λ's and its time excess is at most
/// `ε`.
pub fn detection_probability(
    dist: &TerminalDistribution,
    table: &DelayTable,
    epsilon: f64,
) -> Result<DetectionProbability, SimError> {
    if dist.mode == Mode::Classical {
        return Err(SimError::ModeUnsupported(dist.mode));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SimError::BadEpsilon(epsilon));
    }
    if table.n() != dist.n {
        return Err(SimError::TableMismatch {
            dist: dist.n,
            table: table.n(),
        });
    }
    if dist.depth != dist.n {
        return Err(SimError::PartialTraversal {
            depth: dist.depth,
            n: dist.n,
        });
    }
    let ham = hamiltonian_key(dist.n)?;
    let lambda_product = table.key_product(&ham)?;
    let mut per_column: BTreeMap<usize, f64> = (1..=dist.n).map(|c| (c, 0.0)).collect();
    let mut exact_gap: Option<f64> = None;
    let mut contaminating = Vec::new();
    for (&(column, key), weight) in &dist.cells {
        let p = weight.probability().expect("non-classical weights");
        let in_window = if key == ham {
            true
        } else {
            let diff = table.time_difference(&key, &ham);
            exact_gap = Some(exact_gap.map_or(diff.abs(), |g| g.min(diff.abs())));
            let later = table.key_product(&key)? > lambda_product;
            later && diff <= epsilon
        };
        if in_window {
            *per_column.get_mut(&column).expect("column in range") += p;
            if key != ham && !contaminating.contains(&key) {
                contaminating.push(key);
            }
        }
    }
    let warning = exact_gap.filter(|&g| epsilon >= g).map(|g| {
        format!("epsilon {epsilon} is not below the exact gap {g}; the window admits non-Hamiltonian arrivals")
    });
    contaminating.sort();
    let window_start = dist.time(&ham);
    Ok(DetectionProbability {
        mode: dist.mode,
        epsilon,
        window_start,
        window_end: window_start + epsilon,
        total: per_column.values().sum(),
        per_column,
        exact_gap,
        contaminating_keys: contaminating,
        warning,
    })
}

/// Conservation audit of a terminal distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub mode: Mode,
    /// Mass (or squared magnitude) at the detectors; pulse count in
    /// classical mode.
    pub total_mass: f64,
    pub lost_mass: f64,
    /// `|total + lost - 1|` for incoherent and coherent modes.
    pub deviation: Option<f64>,
    /// `total + lost` in coherent mode; 1 for a norm-preserving evolution.
    pub coherent_normalization: Option<f64>,
    pub total_pulses: Option<String>,
    pub lost_pulses: Option<String>,
}

pub fn probability_balance(dist: &TerminalDistribution) -> BalanceReport {
    match dist.mode {
        Mode::Classical => {
            let total = dist.total_pulses().unwrap_or_default();
            BalanceReport {
                mode: dist.mode,
                total_mass: total.to_string().parse().unwrap_or(f64::NAN),
                lost_mass: dist.lost_pulses as f64,
                deviation: None,
                coherent_normalization: None,
                total_pulses: Some(total.to_string()),
                lost_pulses: Some(dist.lost_pulses.to_string()),
            }
        }
        mode => {
            let total = dist.total_mass().unwrap_or(f64::NAN);
            let sum = total + dist.lost_mass;
            BalanceReport {
                mode,
                total_mass: total,
                lost_mass: dist.lost_mass,
                deviation: Some((sum - 1.0).abs()),
                coherent_normalization: (mode == Mode::Coherent).then_some(sum),
                total_pulses: None,
                lost_pulses: None,
            }
        }
    }
}

/// Result of one simulated photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Shot {
    Detected {
        column: usize,
        key: ArrivalKey,
    },
    /// Stopped at an absorbing unit after `step` traversals.
    Lost {
        step: usize,
        column: usize,
    },
}

/// RNG for shot `index` of a batch seeded with `seed`.
pub fn shot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One photon: uniform row-1 unit, then a uniform slit at every unit.
pub fn sample_photon(net: &Network, seed: u64) -> Result<Shot, SimError> {
    sample_photon_with(net, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_photon_with<R: rand::Rng + ?Sized>(
    net: &Network,
    rng: &mut R,
) -> Result<Shot, SimError> {
    let n = net.n();
    if n > MAX_KEY_VERTICES {
        return Err(SimError::TooManyVertices(n));
    }
    let mut column = rng.random_range(1..=n);
    let mut key = ArrivalKey::unit(n, column)?;
    for step in 1..net.depth() {
        let unit = net.unit_at(step, column);
        if unit.is_absorbing() {
            return Ok(Shot::Lost { step, column });
        }
        column = unit.successors[rng.random_range(0..unit.successors.len())].column;
        key = key.with_visit(column)?;
    }
    Ok(Shot::Detected { column, key })
}

/// Outcome counts of a batch of shots.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotTally {
    pub shots: u64,
    pub seed: u64,
    pub detected: BTreeMap<(usize, ArrivalKey), u64>,
    pub lost: u64,
}

impl ShotTally {
    /// Shots that arrived with the all-ones key, per column.
    pub fn hamiltonian_hits(&self) -> BTreeMap<usize, u64> {
        let mut hits = BTreeMap::new();
        for (&(column, key), &count) in &self.detected {
            if is_hamiltonian_key(&key) {
                *hits.entry(column).or_insert(0) += count;
            }
        }
        hits
    }

    pub fn hamiltonian_total(&self) -> u64 {
        self.hamiltonian_hits().values().sum()
    }

    pub fn frequency(&self, column: usize, key: &ArrivalKey) -> f64 {
        self.detected.get(&(column, *key)).copied().unwrap_or(0) as f64 / self.shots as f64
    }
}

/// `shots` photons, shot `i` drawn from [`shot_rng`]`(seed, i)`.
pub fn sample_shots(net: &Network, shots: u64, seed: u64) -> Result<ShotTally, SimError> {
    let mut tally = ShotTally {
        shots,
        seed,
        detected: BTreeMap::new(),
        lost: 0,
    };
    for index in 0..shots {
        match sample_photon_with(net, &mut shot_rng(seed, index))? {
            Shot::Detected { column, key } => {
                *tally.detected.entry((column, key)).or_insert(0) += 1
            }
            Shot::Lost { .. } => tally.lost += 1,
        }
    }
    Ok(tally)
}
