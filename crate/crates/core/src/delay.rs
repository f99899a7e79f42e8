//! Prime-logarithm delays and exact arrival-time classes.
//!
//! A photon that has passed through the delay lines of vertices with
//! multiplicities `c_1..c_n` arrives at `Σ c_j ln p_j`. By unique
//! factorization two arrival times agree iff their exponent vectors agree,
//! so every comparison in this crate is made on [`ArrivalKey`]s or on the
//! integer products `Π p_j^c_j`; floating-point times are only reported.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DEFAULT_ENUMERATION_CAP, Graph};

/// Widest exponent vector an [`ArrivalKey`] can hold.
pub const MAX_KEY_VERTICES: usize = 16;
/// Largest exponent a single vertex can carry in an [`ArrivalKey`].
pub const MAX_EXPONENT: u8 = 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelayError {
    #[error("{value} is not a prime")]
    NotPrime { value: u64 },
    #[error("primes must be strictly increasing ({prev} then {next})")]
    NotIncreasing { prev: u64, next: u64 },
    #[error("need at least one delay")]
    Empty,
    #[error("channel delay must be finite and non-negative, got {0}")]
    BadChannelDelay(f64),
    #[error("key has {key} entries but the delay table has {table}")]
    DimensionMismatch { key: usize, table: usize },
    #[error("rows traversed ({rows}) differs from the key's exponent sum ({sum})")]
    RowMismatch { rows: usize, sum: usize },
    #[error("the approximate gap 2/(n ln n) needs n >= 2, got {0}")]
    TooFewVertices(usize),
    #[error("arrival keys support at most {MAX_KEY_VERTICES} vertices, got {0}")]
    TooManyVertices(usize),
    #[error("exponent of vertex {vertex} would exceed {MAX_EXPONENT}")]
    ExponentOverflow { vertex: usize },
    #[error("graph has {graph} vertices but the delay table has {table}")]
    GraphMismatch { graph: usize, table: usize },
    #[error("graph has {n} vertices, exceeding the enumeration cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
}

/// Per-vertex delays `δ_j = ln p_j` plus the uniform channel delay `δ_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayTable {
    primes: Vec<u64>,
    delays: Vec<f64>,
    channel_delay: f64,
}

impl DelayTable {
    /// Delays from the first `n` primes.
    pub fn first_primes(n: usize, channel_delay: f64) -> Result<Self, DelayError> {
        Self::from_primes(first_primes(n), channel_delay)
    }

    /// Delays from an explicit, strictly increasing list of primes.
    pub fn from_primes(primes: Vec<u64>, channel_delay: f64) -> Result<Self, DelayError> {
        if primes.is_empty() {
            return Err(DelayError::Empty);
        }
        if !(channel_delay.is_finite() && channel_delay >= 0.0) {
            return Err(DelayError::BadChannelDelay(channel_delay));
        }
        for &p in &primes {
            if !is_prime(p) {
                return Err(DelayError::NotPrime { value: p });
            }
        }
        if let Some(w) = primes.windows(2).find(|w| w[0] >= w[1]) {
            return Err(DelayError::NotIncreasing {
                prev: w[0],
                next: w[1],
            });
        }
        let delays = primes.iter().map(|&p| (p as f64).ln()).collect();
        Ok(Self {
            primes,
            delays,
            channel_delay,
        })
    }

    pub fn n(&self) -> usize {
        self.primes.len()
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    /// `δ_j` for 1-based `j`.
    pub fn delay(&self, j: usize) -> f64 {
        self.delays[j - 1]
    }

    pub fn channel_delay(&self) -> f64 {
        self.channel_delay
    }

    /// Largest unit delay `δ_n`.
    pub fn max_delay(&self) -> f64 {
        *self.delays.last().expect("table is never empty")
    }

    /// `Σ c_j δ_j + rows · δ_c`, summed in vertex order.
    pub fn key_time(&self, key: &ArrivalKey, rows_traversed: usize) -> Result<f64, DelayError> {
        self.check_dim(key)?;
        let sum = key.total() as usize;
        if sum != rows_traversed {
            return Err(DelayError::RowMismatch {
                rows: rows_traversed,
                sum,
            });
        }
        Ok(self.unit_time(key) + rows_traversed as f64 * self.channel_delay)
    }

    /// `Σ c_j δ_j` without channel contributions.
    pub(crate) fn unit_time(&self, key: &ArrivalKey) -> f64 {
        key.exponents()
            .zip(&self.delays)
            .map(|(c, d)| f64::from(c) * d)
            .sum()
    }

    /// λ(n): arrival time of a Hamiltonian traversal.
    pub fn lambda(&self) -> f64 {
        let n = self.n();
        let key = hamiltonian_key(n).expect("table size is a valid key size");
        self.unit_time(&key) + n as f64 * self.channel_delay
    }

    /// `Π p_j^c_j`, the exact integer whose logarithm is the key's unit time.
    pub fn key_product(&self, key: &ArrivalKey) -> Result<BigUint, DelayError> {
        self.check_dim(key)?;
        let mut product = BigUint::from(1u32);
        for (c, &p) in key.exponents().zip(&self.primes) {
            product *= BigUint::from(p).pow(u32::from(c));
        }
        Ok(product)
    }

    /// `key_time(key) - key_time(reference)` for keys of equal exponent sum,
    /// evaluated from the exponent difference.
    pub fn time_difference(&self, key: &ArrivalKey, reference: &ArrivalKey) -> f64 {
        key.exponents()
            .zip(reference.exponents())
            .zip(&self.delays)
            .map(|((a, b), d)| (f64::from(a) - f64::from(b)) * d)
            .sum()
    }

    /// Exact ordering of the unit times of two keys.
    pub fn compare_times(&self, a: &ArrivalKey, b: &ArrivalKey) -> Result<Ordering, DelayError> {
        Ok(self.key_product(a)?.cmp(&self.key_product(b)?))
    }

    fn check_dim(&self, key: &ArrivalKey) -> Result<(), DelayError> {
        if key.dim() != self.n() {
            return Err(DelayError::DimensionMismatch {
                key: key.dim(),
                table: self.n(),
            });
        }
        Ok(())
    }
}

/// The first `n` primes.
pub fn first_primes(n: usize) -> Vec<u64> {
    (2u64..).filter(|&p| is_prime(p)).take(n).collect()
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    (2u64..)
        .take_while(|d| d * d <= p)
        .all(|d| !p.is_multiple_of(d))
}

/// Exponent vector `c` identifying an arrival-time class.
///
/// Packed four bits per vertex with vertex 1 in the most significant nibble,
/// so the derived ordering is lexicographic on the exponent vector.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArrivalKey {
    packed: u64,
    dim: u8,
}

impl ArrivalKey {
    /// All-zero key of dimension `dim`.
    pub fn zero(dim: usize) -> Result<Self, DelayError> {
        if dim > MAX_KEY_VERTICES {
            return Err(DelayError::TooManyVertices(dim));
        }
        Ok(Self {
            packed: 0,
            dim: dim as u8,
        })
    }

    pub fn from_exponents(exponents: &[u8]) -> Result<Self, DelayError> {
        let mut key = Self::zero(exponents.len())?;
        for (j, &c) in exponents.iter().enumerate() {
            if c > MAX_EXPONENT {
                return Err(DelayError::ExponentOverflow { vertex: j + 1 });
            }
            key.packed |= u64::from(c) << key.shift(j + 1);
        }
        Ok(key)
    }

    /// Unit vector for vertex `j`.
    pub fn unit(dim: usize, j: usize) -> Result<Self, DelayError> {
        Self::zero(dim)?.with_visit(j)
    }

    #[inline]
    fn shift(&self, j: usize) -> u32 {
        4 * (MAX_KEY_VERTICES - j) as u32
    }

    pub fn dim(&self) -> usize {
        usize::from(self.dim)
    }

    /// `c_j` for 1-based `j`.
    #[inline]
    pub fn exponent(&self, j: usize) -> u8 {
        ((self.packed >> self.shift(j)) & 0xF) as u8
    }

    pub fn exponents(&self) -> impl Iterator<Item = u8> + '_ {
        (1..=self.dim()).map(|j| self.exponent(j))
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.exponents().collect()
    }

    /// `Σ c_j`, the number of delay lines traversed.
    pub fn total(&self) -> u32 {
        self.exponents().map(u32::from).sum()
    }

    /// `max_j c_j`.
    pub fn max_exponent(&self) -> u8 {
        self.exponents().max().unwrap_or(0)
    }

    /// The key after one more pass through vertex `j`'s delay line.
    #[inline]
    pub fn with_visit(self, j: usize) -> Result<Self, DelayError> {
        if j == 0 || j > self.dim() {
            return Err(DelayError::DimensionMismatch {
                key: self.dim(),
                table: j,
            });
        }
        if self.exponent(j) == MAX_EXPONENT {
            return Err(DelayError::ExponentOverflow { vertex: j });
        }
        Ok(Self {
            packed: self.packed + (1 << self.shift(j)),
            dim: self.dim,
        })
    }

    /// The key with vertex `j`'s exponent cleared.
    pub fn without(self, j: usize) -> Self {
        Self {
            packed: self.packed & !(0xF << self.shift(j)),
            dim: self.dim,
        }
    }
}

impl fmt::Debug for ArrivalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ArrivalKey{:?}", self.to_vec())
    }
}

impl fmt::Display for ArrivalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.exponents().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for ArrivalKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ArrivalKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<u8>::deserialize(d)?;
        Self::from_exponents(&v).map_err(serde::de::Error::custom)
    }
}

/// The all-ones key: every delay line traversed exactly once.
pub fn hamiltonian_key(n: usize) -> Result<ArrivalKey, DelayError> {
    ArrivalKey::from_exponents(&vec![1; n])
}

/// Whether every exponent equals one.
pub fn is_hamiltonian_key(key: &ArrivalKey) -> bool {
    key.dim() > 0 && key.exponents().all(|c| c == 1)
}

/// `2 / (n ln n)`.
pub fn delta_min_approx(n: usize) -> Result<f64, DelayError> {
    if n < 2 {
        return Err(DelayError::TooFewVertices(n));
    }
    let n = n as f64;
    Ok(2.0 / (n * n.ln()))
}

/// Realizable `(vertex, key)` cells and keys, row by row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealizableKeys {
    /// Distinct `(vertex, key)` cells reachable at each row.
    pub cells_per_row: Vec<usize>,
    /// Distinct keys reachable at each row.
    pub keys_per_row: Vec<usize>,
    /// Keys reachable at the last row, in lexicographic order.
    pub terminal_keys: BTreeSet<ArrivalKey>,
}

/// Keys realized by walks through `rows` vertices, by dynamic programming
/// over `(vertex, key)` pairs.
pub fn realizable_keys(g: &Graph, rows: usize) -> Result<RealizableKeys, DelayError> {
    let n = g.n();
    let mut cells: FxHashSet<(usize, ArrivalKey)> = FxHashSet::default();
    let mut cells_per_row = Vec::with_capacity(rows);
    let mut keys_per_row = Vec::with_capacity(rows);
    if rows == 0 {
        return Ok(RealizableKeys {
            cells_per_row,
            keys_per_row,
            terminal_keys: BTreeSet::new(),
        });
    }
    for j in 1..=n {
        cells.insert((j, ArrivalKey::unit(n, j)?));
    }
    for row in 1..=rows {
        if row > 1 {
            let mut next = FxHashSet::default();
            for &(j, key) in &cells {
                for k in g.successors(j) {
                    next.insert((k, key.with_visit(k)?));
                }
            }
            cells = next;
        }
        cells_per_row.push(cells.len());
        let keys: FxHashSet<ArrivalKey> = cells.iter().map(|&(_, k)| k).collect();
        keys_per_row.push(keys.len());
    }
    Ok(RealizableKeys {
        cells_per_row,
        keys_per_row,
        terminal_keys: cells.into_iter().map(|(_, k)| k).collect(),
    })
}

/// The realizable non-Hamiltonian arrivals nearest to λ(n).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactGap {
    /// `|key_time - λ(n)|` for the nearest keys.
    pub gap: f64,
    /// Every realizable non-Hamiltonian key at exactly that distance.
    pub nearest: Vec<ArrivalKey>,
}

/// Smallest separation between λ(n) and any realizable non-Hamiltonian
/// full-traversal arrival, with the minimizing keys. `None` when the
/// Hamiltonian key or every other key is unrealizable.
pub fn exact_gap(g: &Graph, table: &DelayTable) -> Result<Option<ExactGap>, DelayError> {
    exact_gap_capped(g, table, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_gap_capped(
    g: &Graph,
    table: &DelayTable,
    cap: usize,
) -> Result<Option<ExactGap>, DelayError> {
    let n = g.n();
    if n != table.n() {
        return Err(DelayError::GraphMismatch {
            graph: n,
            table: table.n(),
        });
    }
    if n > cap {
        return Err(DelayError::CapExceeded { n, cap });
    }
    let keys = realizable_keys(g, n)?.terminal_keys;
    let ham = hamiltonian_key(n)?;
    if !keys.contains(&ham) {
        return Ok(None);
    }
    let lambda = table.key_product(&ham)?;

    // distance to λ measured by the ratio max/min of the two products
    let mut best: Option<(BigUint, BigUint)> = None;
    let mut nearest = Vec::new();
    for key in keys.iter().filter(|k| **k != ham) {
        let product = table.key_product(key)?;
        let ratio = if product > lambda {
            (product, lambda.clone())
        } else {
            (lambda.clone(), product)
        };
        let ord = match &best {
            None => Ordering::Less,
            Some((num, den)) => (&ratio.0 * den).cmp(&(num * &ratio.1)),
        };
        match ord {
            Ordering::Less => {
                best = Some(ratio);
                nearest.clear();
                nearest.push(*key);
            }
            Ordering::Equal => nearest.push(*key),
            Ordering::Greater => {}
        }
    }
    Ok(nearest.first().copied().map(|k| ExactGap {
        gap: table.time_difference(&k, &ham).abs(),
        nearest,
    }))
}

/// See [`exact_gap`].
pub fn delta_min_exact(g: &Graph, table: &DelayTable) -> Result<Option<f64>, DelayError> {
    Ok(exact_gap(g, table)?.map(|gap| gap.gap))
}

/// Detection half-width: half the exact gap when defined, otherwise half of
/// `2 / (n ln n)`. A single vertex has nothing to separate and gets `δ_1 / 2`.
pub fn default_epsilon(g: &Graph, table: &DelayTable) -> Result<f64, DelayError> {
    if let Some(gap) = delta_min_exact(g, table)? {
        return Ok(gap / 2.0);
    }
    if g.n() == 1 {
        return Ok(table.delay(1) / 2.0);
    }
    Ok(delta_min_approx(g.n())? / 2.0)
}
