#![allow(dead_code)]

use std::collections::BTreeMap;

use photonpath::delay::ArrivalKey;
use photonpath::graph::Graph;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A named test graph.
pub struct Case {
    pub name: String,
    pub graph: Graph,
}

/// Structured graphs for `n` in `2..=max_n`: complete, path, star.
pub fn structured(max_n: usize) -> Vec<Case> {
    let mut out = Vec::new();
    for n in 2..=max_n {
        out.push(Case {
            name: format!("K{n}"),
            graph: Graph::complete(n).unwrap(),
        });
        out.push(Case {
            name: format!("P{n}"),
            graph: Graph::path(n).unwrap(),
        });
        out.push(Case {
            name: format!("S{n}"),
            graph: Graph::star(n).unwrap(),
        });
    }
    out
}

/// Random graph with edge probability `p`; about a fifth are directed.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let directed = rng.random_bool(0.2);
    let mut g = Graph::empty(n, directed).unwrap();
    for i in 1..=n {
        for j in 1..=n {
            if i == j || (!directed && j < i) {
                continue;
            }
            if rng.random_bool(p) {
                g.add_edge(i, j).unwrap();
            }
        }
    }
    g
}

const DENSITIES: [f64; 5] = [0.2, 0.35, 0.5, 0.7, 0.9];

/// `count` random graphs with `n` drawn from `n_range`, mixed densities.
pub fn random_suite(
    seed: u64,
    count: usize,
    n_range: std::ops::RangeInclusive<usize>,
) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.random_range(n_range.clone());
            let p = DENSITIES[i % DENSITIES.len()];
            Case {
                name: format!("R{i}(n={n},p={p})"),
                graph: random_graph(&mut rng, n, p),
            }
        })
        .collect()
}

/// `count` random graphs on exactly `n` vertices.
pub fn random_fixed_n(seed: u64, count: usize, n: usize) -> Vec<Case> {
    random_suite(seed, count, n..=n)
}

/// The acceptance suite: 100 random graphs on 3..=9 vertices, ten random
/// 10-vertex graphs, and complete/path/star graphs on 2..=10 vertices.
pub fn acceptance_suite() -> Vec<Case> {
    let mut cases = structured(10);
    cases.extend(random_suite(2001, 100, 3..=9));
    cases.extend(random_suite(2002, 10, 10..=10));
    cases
}

/// One walk through the graph, enumerated directly.
pub struct WalkRecord {
    pub vertices: Vec<usize>,
    pub key: ArrivalKey,
    /// `(1/n) Π 1/k` over the units left before the last.
    pub mass: f64,
}

/// Every walk with `n` vertices, by depth-first enumeration.
pub fn enumerate_walks(g: &Graph) -> Vec<WalkRecord> {
    fn go(g: &Graph, walk: &mut Vec<usize>, mass: f64, out: &mut Vec<WalkRecord>) {
        if walk.len() == g.n() {
            let mut c = vec![0u8; g.n()];
            for &v in walk.iter() {
                c[v - 1] += 1;
            }
            out.push(WalkRecord {
                vertices: walk.clone(),
                key: ArrivalKey::from_exponents(&c).unwrap(),
                mass,
            });
            return;
        }
        let last = *walk.last().unwrap();
        let succ: Vec<usize> = g.successors(last).collect();
        for k in &succ {
            walk.push(*k);
            go(g, walk, mass / succ.len() as f64, out);
            walk.pop();
        }
    }
    let mut out = Vec::new();
    for start in 1..=g.n() {
        let mut walk = vec![start];
        go(g, &mut walk, 1.0 / g.n() as f64, &mut out);
    }
    out
}

/// Incoherent terminal masses summed from explicit walks.
pub fn walk_masses(g: &Graph) -> BTreeMap<(usize, ArrivalKey), f64> {
    let mut m = BTreeMap::new();
    for w in enumerate_walks(g) {
        *m.entry((*w.vertices.last().unwrap(), w.key)).or_insert(0.0) += w.mass;
    }
    m
}

/// `(1/n) Σ_paths Π_{i<n} 1/out_degree(v_i)`.
pub fn hamiltonian_mass_formula(g: &Graph, paths: &[Vec<usize>]) -> f64 {
    let n = g.n() as f64;
    paths
        .iter()
        .map(|p| {
            p[..p.len() - 1]
                .iter()
                .map(|&v| 1.0 / g.out_degree(v).unwrap() as f64)
                .product::<f64>()
        })
        .sum::<f64>()
        / n
}

pub fn min_out_degree(g: &Graph) -> usize {
    (1..=g.n()).map(|v| g.out_degree(v).unwrap()).min().unwrap()
}
