use drpp_core::dense::{self, Basis, Outcome};
use drpp_core::pattern::{dense_merge, oracle_sweep, PatternState};
use drpp_core::{Family, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fam(s: &str) -> Graph {
    s.parse::<Family>().unwrap().build().unwrap()
}

#[test]
fn exhaustive_sweep_up_to_four_vertices() {
    let report = oracle_sweep(4, false).unwrap();
    assert!(report.passed(), "{:#?}", report.failures);
    assert_eq!(report.graphs, 1 + 2 + 8 + 64);
    assert!(report.max_distance < 1e-12);
}

#[test]
fn cz_on_patterns_matches_dense() {
    // CZ on Z^e|G⟩ equals Z^e|G xor {u,v}⟩.
    let g = fam("star:4");
    for e in 0..16u64 {
        for (u, v) in [(0, 1), (1, 2), (2, 3)] {
            let mut a = dense::graph_state_with_errors(&g, e).unwrap();
            a.apply_cz(u, v).unwrap();
            let b = dense::graph_state_with_errors(&g.toggle_edge(u, v).unwrap(), e).unwrap();
            assert!(a.trace_distance(&b) < 1e-12);
        }
    }
}

#[test]
fn random_z_measurements_on_larger_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..40 {
        let n = rng.random_range(6..=9);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(0.4) {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_edges(n, &edges).unwrap();
        let mask = rng.random_range(0..1u64 << n);
        let state = PatternState::from_mask(g, mask).unwrap();
        let v = rng.random_range(0..n);
        let psi = state.physical_state().unwrap();
        for out in Outcome::both() {
            let (prob, post) = psi.collapse(v, Basis::Z, out).unwrap();
            let (fast, _) = state.measure_z_with(v, out).unwrap();
            assert!((prob - 0.5).abs() < 1e-12);
            assert!(
                post.unwrap()
                    .trace_distance(&fast.physical_state().unwrap())
                    < 1e-9
            );
        }
    }
}

/// Pairs laid out as in a rebuild: edge j of `g` becomes qubits 2j, 2j+1.
fn pair_layout(g: &Graph) -> (Graph, Vec<Vec<usize>>) {
    let edges = g.edges();
    let pairs: Vec<(usize, usize)> = (0..edges.len()).map(|j| (2 * j, 2 * j + 1)).collect();
    let mut parties = vec![Vec::new(); g.n()];
    for (j, &(u, v)) in edges.iter().enumerate() {
        parties[u].push(2 * j);
        parties[v].push(2 * j + 1);
    }
    (Graph::from_edges(2 * edges.len(), &pairs).unwrap(), parties)
}

#[test]
fn sequential_rebuild_matches_dense_and_recovers_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for s in ["path:3", "star:4", "cycle:3", "cycle:4", "path:5"] {
        let g = fam(s);
        let (pairs, parties) = pair_layout(&g);
        for _ in 0..8 {
            let mask = rng.random_range(0..1u64 << pairs.n());
            let mut state = PatternState::from_mask(pairs.clone(), mask).unwrap();
            let mut psi = state.physical_state().unwrap();
            let mut index: Vec<Option<usize>> = (0..pairs.n()).map(Some).collect();
            for party in &parties {
                if party.len() < 2 {
                    continue;
                }
                let current: Vec<usize> = party.iter().map(|&q| index[q].unwrap()).collect();
                let outcomes: Vec<Outcome> = (1..party.len())
                    .map(|_| Outcome::sample(&mut rng))
                    .collect();
                let (prob, post) = dense_merge(&psi, &current, &outcomes).unwrap();
                let (_, next, relabel) = state.merge_local_with(&current, &outcomes).unwrap();
                assert!((prob - 0.5f64.powi(outcomes.len() as i32)).abs() < 1e-12);
                psi = post.unwrap();
                state = next;
                assert!(
                    psi.trace_distance(&state.physical_state().unwrap()) < 1e-9,
                    "{s}"
                );
                index = index.iter().map(|m| m.and_then(|i| relabel[i])).collect();
            }
            assert_eq!(state.n(), g.n());
            assert_eq!(state.graph().edge_count(), g.edge_count());
            // The residual error on each vertex is the XOR of its halves.
            for (v, party) in parties.iter().enumerate() {
                let flips = party.iter().filter(|&&q| mask >> q & 1 == 1).count();
                let at = index[party[0]].unwrap();
                assert_eq!(
                    state.z_errors().contains(at),
                    flips % 2 == 1,
                    "{s} vertex {v}"
                );
            }
        }
    }
}
