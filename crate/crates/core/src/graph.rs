//! Problem graphs, the edge-list file format and the combinatorial oracles
//! (exhaustive Hamiltonian path search, exact walk counting).
//!
//! Vertices are numbered `1..=n` in every public interface.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `n` the exhaustive oracles accept unless told otherwise.
pub const DEFAULT_ENUMERATION_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: self-loop on vertex {vertex} rejected (graphs must have no self-loops)")]
    SelfLoop { line: usize, vertex: usize },
    #[error("line {line}: vertex {vertex} out of range 1..={n}")]
    VertexOutOfRange {
        line: usize,
        vertex: usize,
        n: usize,
    },
    #[error("vertex {vertex} out of range 1..={n}")]
    NoSuchVertex { vertex: usize, n: usize },
    #[error("graph has {n} vertices, exceeding the enumeration cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("a graph needs at least one vertex")]
    Empty,
}

/// A simple graph on `n` vertices stored as a dense adjacency matrix.
///
/// Undirected graphs are kept symmetrized, so every consumer can read the
/// directed view `adjacent(j, k)` as "an edge leads from j to k".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    directed: bool,
    adjacency: Vec<bool>,
}

impl Graph {
    /// Graph with `n` vertices and no edges.
    pub fn empty(n: usize, directed: bool) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        Ok(Self {
            n,
            directed,
            adjacency: vec![false; n * n],
        })
    }

    pub fn from_edges(
        n: usize,
        directed: bool,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::empty(n, directed)?;
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Adds the edge `i -> j` (and `j -> i` when undirected). Duplicates are
    /// idempotent.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<(), GraphError> {
        self.check_vertex(i)?;
        self.check_vertex(j)?;
        if i == j {
            return Err(GraphError::SelfLoop { line: 0, vertex: i });
        }
        let n = self.n;
        self.adjacency[(i - 1) * n + (j - 1)] = true;
        if !self.directed {
            self.adjacency[(j - 1) * n + (i - 1)] = true;
        }
        Ok(())
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let edges = (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| (i, j)));
        Self::from_edges(n, false, edges)
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(n, false, (1..n).map(|i| (i, i + 1)))
    }

    /// Star with center vertex 1 and leaves `2..=n`.
    pub fn star(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(n, false, (2..=n).map(|i| (1, i)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    fn check_vertex(&self, v: usize) -> Result<(), GraphError> {
        if v == 0 || v > self.n {
            Err(GraphError::NoSuchVertex {
                vertex: v,
                n: self.n,
            })
        } else {
            Ok(())
        }
    }

    /// `a_jk`: whether an edge leads from `j` to `k`. Out-of-range indices
    /// are never adjacent.
    pub fn adjacent(&self, j: usize, k: usize) -> bool {
        if j == 0 || k == 0 || j > self.n || k > self.n {
            return false;
        }
        self.adjacency[(j - 1) * self.n + (k - 1)]
    }

    /// Out-neighbours of `j` in increasing order.
    pub fn successors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n).filter(move |&k| self.adjacent(j, k))
    }

    pub fn out_degree(&self, j: usize) -> Result<usize, GraphError> {
        self.check_vertex(j)?;
        Ok(self.successors(j).count())
    }

    pub fn in_degree(&self, j: usize) -> Result<usize, GraphError> {
        self.check_vertex(j)?;
        Ok((1..=self.n).filter(|&i| self.adjacent(i, j)).count())
    }

    /// Directed edge list `(i, j)` in lexicographic order. Undirected graphs
    /// list both orientations.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        (1..=self.n)
            .flat_map(|i| self.successors(i).map(move |j| (i, j)))
            .collect()
    }

    /// Whether consecutive entries of `seq` are all edges.
    pub fn is_walk(&self, seq: &[usize]) -> bool {
        !seq.is_empty()
            && seq.iter().all(|&v| v >= 1 && v <= self.n)
            && seq.windows(2).all(|w| self.adjacent(w[0], w[1]))
    }

    /// Whether `seq` is a walk through every vertex exactly once.
    pub fn is_hamiltonian_path(&self, seq: &[usize]) -> bool {
        if seq.len() != self.n || !self.is_walk(seq) {
            return false;
        }
        let mut seen = vec![false; self.n];
        seq.iter()
            .all(|&v| !std::mem::replace(&mut seen[v - 1], true))
    }
}

/// Parses the edge-list format.
///
/// ```text
/// file    := header (NL line)*
/// header  := N [WS "directed"]
/// line    := "" | "#" comment | I WS J
/// ```
///
/// Leading and trailing whitespace on every line is ignored. Blank lines and
/// lines whose first non-space character is `#` are skipped everywhere,
/// including before the header. `N >= 1`; endpoints are 1-based decimal
/// integers. Repeating an edge is accepted and has no further effect.
pub fn parse_graph(text: &str) -> Result<Graph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(GraphError::Parse {
        line: 1,
        message: "missing header line with the vertex count".into(),
    })?;
    let mut tokens = header.split_whitespace();
    let n: usize = parse_index(tokens.next().unwrap_or(""), header_line, "vertex count")?;
    let directed = match tokens.next() {
        None => false,
        Some("directed") => true,
        Some(other) => {
            return Err(GraphError::Parse {
                line: header_line,
                message: format!("unexpected header token `{other}` (expected `directed`)"),
            });
        }
    };
    if let Some(extra) = tokens.next() {
        return Err(GraphError::Parse {
            line: header_line,
            message: format!("trailing token `{extra}` in header"),
        });
    }
    let mut g = Graph::empty(n, directed).map_err(|_| GraphError::Parse {
        line: header_line,
        message: "vertex count must be at least 1".into(),
    })?;

    for (line, content) in lines {
        let mut tokens = content.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(GraphError::Parse {
                line,
                message: format!("expected `i j`, found `{content}`"),
            });
        };
        let i = parse_index(a, line, "endpoint")?;
        let j = parse_index(b, line, "endpoint")?;
        for v in [i, j] {
            if v == 0 || v > n {
                return Err(GraphError::VertexOutOfRange { line, vertex: v, n });
            }
        }
        if i == j {
            return Err(GraphError::SelfLoop { line, vertex: i });
        }
        g.add_edge(i, j)?;
    }
    Ok(g)
}

fn parse_index(token: &str, line: usize, what: &str) -> Result<usize, GraphError> {
    token.parse().map_err(|_| GraphError::Parse {
        line,
        message: format!("invalid {what} `{token}`"),
    })
}

/// Writes `g` in the edge-list format accepted by [`parse_graph`].
impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.directed {
            writeln!(f, "{} directed", self.n)?;
        } else {
            writeln!(f, "{}", self.n)?;
        }
        for (i, j) in self.arcs() {
            if self.directed || i < j {
                writeln!(f, "{i} {j}")?;
            }
        }
        Ok(())
    }
}

/// Every Hamiltonian path of `g`, in lexicographic order, found by
/// exhaustive backtracking.
pub fn brute_force_hamiltonian_paths(g: &Graph) -> Result<Vec<Vec<usize>>, GraphError> {
    brute_force_hamiltonian_paths_capped(g, DEFAULT_ENUMERATION_CAP)
}

pub fn brute_force_hamiltonian_paths_capped(
    g: &Graph,
    cap: usize,
) -> Result<Vec<Vec<usize>>, GraphError> {
    if g.n() > cap {
        return Err(GraphError::CapExceeded { n: g.n(), cap });
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(g.n());
    let mut used = vec![false; g.n() + 1];
    for start in 1..=g.n() {
        prefix.push(start);
        used[start] = true;
        extend_paths(g, &mut prefix, &mut used, &mut out);
        used[start] = false;
        prefix.pop();
    }
    Ok(out)
}

fn extend_paths(g: &Graph, prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
    if prefix.len() == g.n() {
        out.push(prefix.clone());
        return;
    }
    let last = *prefix.last().expect("prefix is never empty here");
    for next in g.successors(last) {
        if used[next] {
            continue;
        }
        used[next] = true;
        prefix.push(next);
        extend_paths(g, prefix, used, out);
        prefix.pop();
        used[next] = false;
    }
}

/// Number of walks with `length` edges: `1ᵀ A^length 1`, computed exactly.
pub fn count_walks(g: &Graph, length: usize) -> BigUint {
    let n = g.n();
    // ends[v]: walks of the current length ending at v
    let mut ends: Vec<BigUint> = vec![BigUint::from(1u32); n];
    for _ in 0..length {
        let mut next = vec![BigUint::zero(); n];
        for (i, j) in g.arcs() {
            next[j - 1] += &ends[i - 1];
        }
        ends = next;
    }
    ends.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> Graph {
        parse_graph("3\n1 2\n2 3").unwrap()
    }

    fn k3() -> Graph {
        parse_graph("3\n1 2\n2 3\n1 3").unwrap()
    }

    #[test]
    fn parses_path_and_triangle() {
        let g = p3();
        assert_eq!(g.n(), 3);
        assert!(!g.is_directed());
        assert_eq!(g.arcs(), vec![(1, 2), (2, 1), (2, 3), (3, 2)]);
        assert_eq!(k3(), Graph::complete(3).unwrap());
        assert_eq!(p3(), Graph::path(3).unwrap());
    }

    #[test]
    fn rejects_self_loop() {
        assert_eq!(
            parse_graph("3\n2 2"),
            Err(GraphError::SelfLoop { line: 2, vertex: 2 })
        );
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_graph("# header comment\n4\n1 2\n\n2 x\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 5, .. }), "{err}");
        let err = parse_graph("4\n1 2 3").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }));
        assert_eq!(
            parse_graph("3\n1 4"),
            Err(GraphError::VertexOutOfRange {
                line: 2,
                vertex: 4,
                n: 3
            })
        );
        assert_eq!(
            parse_graph("3\n0 1"),
            Err(GraphError::VertexOutOfRange {
                line: 2,
                vertex: 0,
                n: 3
            })
        );
        assert!(matches!(
            parse_graph("0"),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(matches!(parse_graph(""), Err(GraphError::Parse { .. })));
        assert!(matches!(
            parse_graph("3 undirected"),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn directed_header() {
        let g = parse_graph("3 directed\n1 2\n2 3\n").unwrap();
        assert!(g.is_directed());
        assert!(g.adjacent(1, 2));
        assert!(!g.adjacent(2, 1));
        assert_eq!(g.in_degree(1).unwrap(), 0);
    }

    #[test]
    fn display_round_trips() {
        for g in [
            k3(),
            p3(),
            parse_graph("4 directed\n1 2\n3 1\n2 4").unwrap(),
        ] {
            assert_eq!(parse_graph(&g.to_string()).unwrap(), g);
        }
    }

    #[test]
    fn out_degrees() {
        assert_eq!(k3().out_degree(1).unwrap(), 2);
        assert_eq!(p3().out_degree(2).unwrap(), 2);
        assert_eq!(p3().out_degree(1).unwrap(), 1);
        assert!(p3().out_degree(4).is_err());
        assert!(p3().out_degree(0).is_err());
    }

    #[test]
    fn hamiltonian_oracle_examples() {
        let all_perms = vec![
            vec![1, 2, 3],
            vec![1, 3, 2],
            vec![2, 1, 3],
            vec![2, 3, 1],
            vec![3, 1, 2],
            vec![3, 2, 1],
        ];
        assert_eq!(brute_force_hamiltonian_paths(&k3()).unwrap(), all_perms);
        assert_eq!(
            brute_force_hamiltonian_paths(&p3()).unwrap(),
            vec![vec![1, 2, 3], vec![3, 2, 1]]
        );
        assert!(
            brute_force_hamiltonian_paths(&Graph::star(4).unwrap())
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn oracle_refuses_above_cap() {
        let g = Graph::path(13).unwrap();
        assert_eq!(
            brute_force_hamiltonian_paths(&g),
            Err(GraphError::CapExceeded { n: 13, cap: 12 })
        );
        assert_eq!(
            brute_force_hamiltonian_paths_capped(&g, 13).unwrap().len(),
            2
        );
    }

    #[test]
    fn walk_counts() {
        assert_eq!(count_walks(&k3(), 2), BigUint::from(12u32));
        assert_eq!(count_walks(&p3(), 2), BigUint::from(6u32));
        assert_eq!(count_walks(&p3(), 0), BigUint::from(3u32));
        // K_n has n (n-1)^L walks of length L
        let k12 = Graph::complete(12).unwrap();
        assert_eq!(
            count_walks(&k12, 11),
            BigUint::from(12u64) * BigUint::from(11u64).pow(11)
        );
    }

    #[test]
    fn path_predicates() {
        let g = p3();
        assert!(g.is_walk(&[1, 2, 1]));
        assert!(!g.is_walk(&[1, 3]));
        assert!(g.is_hamiltonian_path(&[3, 2, 1]));
        assert!(!g.is_hamiltonian_path(&[1, 2, 1]));
        assert!(!g.is_hamiltonian_path(&[1, 2]));
    }
}
