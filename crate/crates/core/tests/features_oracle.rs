use nalgebra::{DMatrix, SymmetricEigen};
use netsig_core::features::{
    classical_features, edge_connectivity, local_node_connectivity, top_two_eigenvalues,
    wl_features, wl_kernel, WlDictionary,
};
use netsig_core::Graph;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

fn dense_top_two(g: &Graph) -> (f64, f64) {
    let n = g.node_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (u, v) in g.edges() {
        m[(u, v)] = 1.0;
        m[(v, u)] = 1.0;
    }
    let mut values: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    (values[0], values[1])
}

#[test]
fn eigenvalues_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(2..=16);
        let p = rng.random_range(0.0..1.0);
        let g = random_graph(&mut rng, n, p);
        let (a, b) = top_two_eigenvalues(&g).unwrap();
        let (ea, eb) = dense_top_two(&g);
        assert!((a - ea).abs() < 1e-6 && (b - eb).abs() < 1e-6, "{a} {b} vs {ea} {eb}");
    }
}

/// Smallest vertex set separating s from t, by subset enumeration.
fn brute_vertex_separator(g: &Graph, s: usize, t: usize, skip_edge: bool) -> usize {
    let n = g.node_count();
    let others: Vec<usize> = (0..n).filter(|&v| v != s && v != t).collect();
    let mut best = usize::MAX;
    for mask in 0u32..(1 << others.len()) {
        let size = mask.count_ones() as usize;
        if size >= best {
            continue;
        }
        let removed: Vec<bool> = (0..n)
            .map(|v| {
                others
                    .iter()
                    .position(|&o| o == v)
                    .is_some_and(|i| mask & (1 << i) != 0)
            })
            .collect();
        let mut seen = vec![false; n];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for &w in g.neighbors(u) {
                if skip_edge && ((u == s && w == t) || (u == t && w == s)) {
                    continue;
                }
                if !removed[w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if !seen[t] {
            best = size;
        }
    }
    best
}

fn brute_edge_connectivity(g: &Graph) -> usize {
    let n = g.node_count();
    (1u32..(1 << n) - 1)
        .map(|mask| {
            g.edges()
                .filter(|&(u, v)| ((mask >> u) & 1) != ((mask >> v) & 1))
                .count()
        })
        .min()
        .unwrap()
}

#[test]
fn connectivity_matches_menger_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let n = rng.random_range(2..=7);
        let g = random_graph(&mut rng, n, 0.5);
        for s in 0..n {
            for t in s + 1..n {
                let expected = if g.has_edge(s, t) {
                    1 + brute_vertex_separator(&g, s, t, true)
                } else {
                    brute_vertex_separator(&g, s, t, false)
                };
                assert_eq!(local_node_connectivity(&g, s, t), expected, "{g:?} {s} {t}");
            }
        }
        assert_eq!(edge_connectivity(&g), brute_edge_connectivity(&g));
    }
}

fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    Graph::from_edges(n, edges.iter().copied()).unwrap()
}

#[test]
fn hand_computed_fixtures() {
    let k3 = classical_features(&graph(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
    let exact = [1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 2.0];
    assert_eq!(&k3.to_vec()[..13], &exact);
    assert!((k3.eig1 - 2.0).abs() < 1e-9 && (k3.eig2 + 1.0).abs() < 1e-9);

    let s3 = classical_features(&graph(4, &[(0, 1), (0, 2), (0, 3)])).unwrap();
    assert_eq!(s3.frac_degree_one, 0.75);
    assert_eq!(s3.avg_neighbor_degree, 2.5);
    assert_eq!(s3.central_points_frac, 0.25);
    assert!((s3.eig1 - 3f64.sqrt()).abs() < 1e-9 && s3.eig2.abs() < 1e-9);

    let p4 = classical_features(&graph(4, &[(0, 1), (1, 2), (2, 3)])).unwrap();
    assert_eq!(p4.diameter, 3.0);
    assert_eq!(p4.avg_shortest_path, 10.0 / 6.0);
    assert_eq!(p4.central_points_frac, 0.5);
}

fn permute(g: &Graph, rng: &mut ChaCha8Rng) -> Graph {
    let mut mapping: Vec<usize> = (0..g.node_count()).collect();
    mapping.shuffle(rng);
    g.relabel(&mapping).unwrap()
}

#[test]
fn wl_invariance_and_blind_spot() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dict = WlDictionary::new();
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let g = random_graph(&mut rng, n, 0.4);
        let h = permute(&g, &mut rng);
        for depth in 0..=2 {
            assert_eq!(wl_features(&g, depth, &dict), wl_features(&h, depth, &dict));
        }
    }
    let c6 = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
    let two_k3 = graph(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]);
    for depth in 0..=5 {
        let a = wl_features(&c6, depth, &dict);
        let b = wl_features(&two_k3, depth, &dict);
        assert_eq!(a, b);
        assert_eq!(wl_kernel(&a, &b).unwrap(), wl_kernel(&b, &a).unwrap());
    }
}

#[test]
fn wl_dictionary_is_consistent_across_threads() {
    use rayon::prelude::*;
    let dict = WlDictionary::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let graphs: Vec<Graph> = (0..64).map(|_| random_graph(&mut rng, 12, 0.3)).collect();
    let parallel: Vec<_> = graphs.par_iter().map(|g| wl_features(g, 3, &dict)).collect();
    let sequential: Vec<_> = graphs.iter().map(|g| wl_features(g, 3, &dict)).collect();
    assert_eq!(parallel, sequential);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_are_invariant_and_bounded(seed in any::<u64>(), n in 2usize..12, p in 0.1f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, p);
        let h = permute(&g, &mut rng);
        let a = classical_features(&g).unwrap();
        let b = classical_features(&h).unwrap();
        for (x, y) in a.to_vec().iter().zip(b.to_vec()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        for x in [a.density, a.transitivity, a.avg_clustering, a.frac_degree_one, a.central_points_frac] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert!(a.eig1.abs() + 1e-9 >= a.eig2.abs());
        if !a.degenerate {
            prop_assert!(a.diameter + 1e-12 >= a.avg_shortest_path);
            prop_assert!(a.avg_shortest_path >= 1.0);
        }
    }
}
