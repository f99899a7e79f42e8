mod common;

use std::collections::BTreeSet;

use photonpath::delay::{DelayTable, hamiltonian_key};
use photonpath::graph::{Graph, brute_force_hamiltonian_paths};
use photonpath::network::{Topology, compile_feedforward};
use photonpath::procedures::{
    DetectMode, Policy, ProcedureError, Setup, construct_path, construction_cost,
    detect_hamiltonian,
};
use photonpath::sim::{Mode, propagate, sample_shots};

#[test]
fn detection_matches_oracle_per_size() {
    let setup = Setup::default();
    for n in 2..=9 {
        for case in common::random_fixed_n(100 + n as u64, 100, n) {
            let g = &case.graph;
            let exists = !brute_force_hamiltonian_paths(g).unwrap().is_empty();
            let outcome = detect_hamiltonian(g, DetectMode::Exact, &setup).unwrap();
            assert_eq!(outcome.hamiltonian_detected, exists, "{}", case.name);
            assert_eq!(
                outcome.hamiltonian_detected,
                !outcome.end_vertices.is_empty()
            );
        }
    }
}

#[test]
fn detection_examples() {
    let setup = Setup::default();
    let k3 = detect_hamiltonian(&Graph::complete(3).unwrap(), DetectMode::Exact, &setup).unwrap();
    assert!(k3.hamiltonian_detected);
    assert_eq!(k3.end_vertices, BTreeSet::from([1, 2, 3]));
    assert!((k3.total - 0.5).abs() < 1e-15);

    let s4 = detect_hamiltonian(&Graph::star(4).unwrap(), DetectMode::Exact, &setup).unwrap();
    assert!(!s4.hamiltonian_detected);
    assert_eq!(s4.total, 0.0);
    assert!(!s4.inconclusive);
}

#[test]
fn single_missed_shot_is_flagged() {
    let k3 = Graph::complete(3).unwrap();
    let setup = Setup::default();
    let net = compile_feedforward(&k3, &DelayTable::first_primes(3, 0.0).unwrap()).unwrap();
    let seed = (0..100)
        .find(|&s| sample_shots(&net, 1, s).unwrap().hamiltonian_total() == 0)
        .expect("some seed misses");
    let outcome = detect_hamiltonian(&k3, DetectMode::Sampled { shots: 1, seed }, &setup).unwrap();
    assert!(!outcome.hamiltonian_detected);
    assert!(outcome.inconclusive);
    assert_eq!(outcome.hits, Some(0));

    let err = detect_hamiltonian(&k3, DetectMode::Sampled { shots: 0, seed: 1 }, &setup);
    assert!(matches!(err, Err(ProcedureError::NoShots)));
}

#[test]
fn oversize_graphs_are_refused() {
    let setup = Setup {
        cap: 5,
        ..Setup::default()
    };
    let g = Graph::complete(6).unwrap();
    assert!(matches!(
        detect_hamiltonian(&g, DetectMode::Exact, &setup),
        Err(ProcedureError::CapExceeded { n: 6, cap: 5 })
    ));
    assert!(matches!(
        construct_path(&g, 1, Policy::Deterministic, &setup),
        Err(ProcedureError::CapExceeded { .. })
    ));
}

#[test]
fn construction_examples() {
    let setup = Setup::default();
    let p3 = construct_path(&Graph::path(3).unwrap(), 3, Policy::Deterministic, &setup).unwrap();
    assert_eq!(p3.path, vec![1, 2, 3]);

    let k3 = Graph::complete(3).unwrap();
    let report = construct_path(&k3, 3, Policy::Deterministic, &setup).unwrap();
    assert_eq!(
        report.passes[0]
            .candidates
            .iter()
            .map(|c| c.0)
            .collect::<Vec<_>>(),
        vec![1, 2]
    );
    assert!(
        brute_force_hamiltonian_paths(&k3)
            .unwrap()
            .contains(&report.path)
    );
    assert_eq!(report.path, vec![2, 1, 3]);

    let s4 = Graph::star(4).unwrap();
    assert!(matches!(
        construct_path(&s4, 2, Policy::Deterministic, &setup),
        Err(ProcedureError::NoPathEndsAt(2))
    ));
    assert!(matches!(
        construct_path(&s4, 9, Policy::Deterministic, &setup),
        Err(ProcedureError::NoSuchVertex { vertex: 9, n: 4 })
    ));
}

#[test]
fn constructed_paths_are_valid_under_both_topologies() {
    let cases = common::structured(7)
        .into_iter()
        .chain(common::random_suite(77, 60, 3..=7));
    for case in cases {
        let g = &case.graph;
        let oracle = brute_force_hamiltonian_paths(g).unwrap();
        for topology in [Topology::Feedforward, Topology::Recurrent] {
            let setup = Setup {
                topology,
                channel_delay: 0.1,
                ..Setup::default()
            };
            for end in 1..=g.n() {
                let ends_here = oracle.iter().any(|p| p.last() == Some(&end));
                match construct_path(g, end, Policy::Deterministic, &setup) {
                    Ok(r) => {
                        assert!(ends_here, "{} end {end}", case.name);
                        assert!(g.is_hamiltonian_path(&r.path), "{} {:?}", case.name, r.path);
                        assert_eq!(r.path.last(), Some(&end));
                        let distinct: BTreeSet<_> = r.path.iter().collect();
                        assert_eq!(distinct.len(), g.n());
                    }
                    Err(ProcedureError::NoPathEndsAt(v)) => {
                        assert!(!ends_here && v == end, "{} end {end}", case.name)
                    }
                    Err(e) => panic!("{} end {end}: {e}", case.name),
                }
            }
        }
    }
}

#[test]
fn pass_windows_shift_by_fixed_vertex_delays() {
    for case in common::structured(6)
        .into_iter()
        .chain(common::random_suite(31, 30, 3..=6))
    {
        let g = &case.graph;
        let setup = Setup::default();
        let table = setup.delay_table(g).unwrap();
        let lambda = table.lambda();
        let outcome = detect_hamiltonian(g, DetectMode::Exact, &setup).unwrap();
        for &end in &outcome.end_vertices {
            let report = construct_path(g, end, Policy::Deterministic, &setup).unwrap();
            let n = g.n();
            for rec in &report.passes {
                // vertices fixed before this pass: the last `pass` entries of h
                let fixed = &report.path[n - rec.pass..];
                let removed: f64 = fixed.iter().map(|&v| table.delay(v)).sum();
                assert!(
                    (rec.expected_instant - (lambda - removed)).abs() < 1e-12,
                    "{} pass {}",
                    case.name,
                    rec.pass
                );
                assert_eq!(rec.rows, n - rec.pass);
                assert_eq!(rec.target_key.total() as usize, rec.rows);
                assert!((rec.window_end - rec.expected_instant - report.epsilon).abs() < 1e-12);
            }
            // consecutive windows differ by the delay of the vertex fixed in between
            for pair in report.passes.windows(2) {
                let step = pair[0].expected_instant - pair[1].expected_instant;
                assert!((step - table.delay(pair[0].chosen)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn sampled_policy_stays_on_oracle_paths() {
    let g = Graph::complete(5).unwrap();
    let oracle: BTreeSet<Vec<usize>> = brute_force_hamiltonian_paths(&g)
        .unwrap()
        .into_iter()
        .collect();
    let setup = Setup::default();
    let mut seen = BTreeSet::new();
    for seed in 0..300 {
        let r = construct_path(&g, 2, Policy::Sampled { seed }, &setup).unwrap();
        assert!(oracle.contains(&r.path));
        seen.insert(r.path);
    }
    assert!(seen.len() > 1);
    let again = construct_path(&g, 2, Policy::Sampled { seed: 7 }, &setup).unwrap();
    let once = construct_path(&g, 2, Policy::Sampled { seed: 7 }, &setup).unwrap();
    assert_eq!(again, once);
}

#[test]
fn construction_cost_counts_passes() {
    let setup = Setup::default();
    assert_eq!(
        construction_cost(&Graph::path(3).unwrap(), &setup)
            .unwrap()
            .pass_count,
        2
    );
    for n in 4..=10 {
        let report = construction_cost(&Graph::complete(n).unwrap(), &setup).unwrap();
        assert_eq!(report.pass_count, n - 1);
        assert_eq!(report.passes.len(), n - 1);
        for pair in report.passes.windows(2) {
            assert!(pair[0].rows > pair[1].rows);
            assert!(pair[0].cells >= pair[1].cells);
            assert!(pair[0].transitions >= pair[1].transitions);
        }
        assert_eq!(
            report.total_cells,
            report.passes.iter().map(|p| p.cells).sum::<u64>()
        );
        let nf = n as f64;
        assert!((report.reference - nf * nf * nf.ln()).abs() < 1e-9);
    }
}

#[test]
fn hamiltonian_weight_positive_iff_path_exists() {
    for case in common::acceptance_suite()
        .into_iter()
        .filter(|c| c.graph.n() <= 8)
    {
        let g = &case.graph;
        let net = compile_feedforward(g, &DelayTable::first_primes(g.n(), 0.0).unwrap()).unwrap();
        let dist = propagate(&net, Mode::Incoherent).unwrap();
        let ham = hamiltonian_key(g.n()).unwrap();
        let oracle = brute_force_hamiltonian_paths(g).unwrap();
        for end in 1..=g.n() {
            let positive = dist
                .weight(end, &ham)
                .and_then(|w| w.probability())
                .is_some_and(|p| p > 0.0);
            let exists = oracle.iter().any(|p| p.last() == Some(&end));
            assert_eq!(positive, exists, "{} end {end}", case.name);
        }
    }
}
