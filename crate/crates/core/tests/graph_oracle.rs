use netsig_core::graph::{
    bfs_distances, generate_synthetic, largest_component, parse_edge_list_str,
};
use netsig_core::sampler::{build_dataset, induced_subgraph, random_walk_sample};
use netsig_core::manifest::ClassGraph;
use netsig_core::sampler::SampleSpec;
use netsig_core::{Family, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference BA: roulette wheel over cumulative degrees, m distinct targets
/// per new node, seeded by a clique on m nodes whose first follower links to
/// all of them.
fn reference_ba(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; n];
    degree[..m].fill(m - 1);
    for v in m..n {
        let targets: Vec<usize> = if v == m {
            (0..m).collect()
        } else {
            let total: usize = degree[..v].iter().sum();
            let mut chosen = Vec::new();
            while chosen.len() < m {
                let mut ticket = rng.random_range(0..total);
                let mut pick = 0;
                while ticket >= degree[pick] {
                    ticket -= degree[pick];
                    pick += 1;
                }
                if !chosen.contains(&pick) {
                    chosen.push(pick);
                }
            }
            chosen
        };
        for t in targets {
            degree[t] += 1;
            degree[v] += 1;
        }
    }
    degree
}

fn summary(degrees: &[usize], m: usize) -> (f64, f64, f64) {
    let n = degrees.len() as f64;
    let at_m = degrees.iter().filter(|&&d| d == m).count() as f64 / n;
    let tail = degrees.iter().filter(|&&d| d >= 4 * m).count() as f64 / n;
    let max = *degrees.iter().max().unwrap() as f64;
    (at_m, tail, max)
}

#[test]
fn barabasi_albert_matches_reference() {
    let g = generate_synthetic(&Family::BarabasiAlbert { n: 100, m: 2 }, 7).unwrap();
    // one seed edge plus m per added node
    assert_eq!(g.edge_count(), 1 + 2 * 98);
    let reference: usize = reference_ba(100, 2, 7).iter().sum::<usize>() / 2;
    assert_eq!(g.edge_count(), reference);

    let (n, m, runs) = (1000, 3, 40);
    let mut ours = (0.0, 0.0, 0.0);
    let mut theirs = (0.0, 0.0, 0.0);
    for seed in 0..runs {
        let g = generate_synthetic(&Family::BarabasiAlbert { n, m }, seed).unwrap();
        let d: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
        let a = summary(&d, m);
        let b = summary(&reference_ba(n, m, 1000 + seed), m);
        ours = (ours.0 + a.0, ours.1 + a.1, ours.2 + a.2);
        theirs = (theirs.0 + b.0, theirs.1 + b.1, theirs.2 + b.2);
    }
    let r = runs as f64;
    assert!((ours.0 - theirs.0).abs() / r < 0.02, "{ours:?} {theirs:?}");
    assert!((ours.1 - theirs.1).abs() / r < 0.01, "{ours:?} {theirs:?}");
    assert!(((ours.2 - theirs.2) / theirs.2).abs() < 0.15, "{ours:?} {theirs:?}");
}

#[test]
fn generator_edge_cases() {
    assert_eq!(generate_synthetic(&Family::ErdosRenyi { n: 4, p: 1.0 }, 3).unwrap().edge_count(), 6);
    assert_eq!(generate_synthetic(&Family::ErdosRenyi { n: 10, p: 0.0 }, 3).unwrap().edge_count(), 0);
    for bad in [
        Family::ErdosRenyi { n: 5, p: 1.5 },
        Family::BarabasiAlbert { n: 5, m: 5 },
        Family::WattsStrogatz { n: 10, k: 3, beta: 0.1 },
        Family::RandomGeometric { n: 10, r: 0.0 },
    ] {
        let err = generate_synthetic(&bad, 1).unwrap_err().to_string();
        assert!(err.contains(bad.name()), "{err}");
    }
    let a = generate_synthetic(&Family::RandomGeometric { n: 200, r: 0.1 }, 5).unwrap();
    assert_eq!(a, generate_synthetic(&Family::RandomGeometric { n: 200, r: 0.1 }, 5).unwrap());
    assert!(a.check_invariants());
}

#[test]
fn parsing_and_traversal_examples() {
    let g = parse_edge_list_str("# comment\n5 9\n9 7").unwrap();
    assert_eq!(g.node_count(), 3);
    assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    assert_eq!(bfs_distances(&g, 0), vec![0, 1, 2]);
    let err = parse_edge_list_str("0 1\n1 x").unwrap_err().to_string();
    assert!(err.contains('2'), "{err}");

    let two = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
    assert_eq!(bfs_distances(&two, 0), vec![0, 1, 4, 4]);
    let (lc, map) = largest_component(&two).unwrap();
    assert_eq!((lc.node_count(), map), (2, vec![0, 1]));
}

#[test]
fn walk_samples_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let path = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
    let mut nodes = random_walk_sample(&path, 5, &mut rng).unwrap().nodes;
    nodes.sort_unstable();
    assert_eq!(nodes, vec![0, 1, 2, 3, 4]);
    let star = Graph::from_edges(11, (1..11).map(|l| (0, l))).unwrap();
    for _ in 0..50 {
        assert!(random_walk_sample(&star, 3, &mut rng).unwrap().nodes.contains(&0));
    }
    assert!(random_walk_sample(&star, 12, &mut rng).is_err());

    let c5 = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
    let p4 = induced_subgraph(&c5, &[1, 2, 3, 4]).unwrap();
    assert_eq!(p4.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2), (2, 3)]);
    assert!(induced_subgraph(&c5, &[1, 1]).is_err());
    assert!(induced_subgraph(&c5, &[9]).is_err());
}

#[test]
fn datasets_are_balanced_connected_and_reproducible() {
    let classes = vec![
        ClassGraph {
            name: "a".into(),
            graph: generate_synthetic(&Family::ErdosRenyi { n: 200, p: 0.05 }, 1).unwrap(),
        },
        ClassGraph {
            name: "b".into(),
            graph: generate_synthetic(&Family::WattsStrogatz { n: 200, k: 4, beta: 0.2 }, 2).unwrap(),
        },
    ];
    let spec = SampleSpec::new(8, 10, 99).unwrap();
    let samples = build_dataset(&classes, &spec).unwrap();
    assert_eq!(samples.len(), 20);
    for (i, s) in samples.iter().enumerate() {
        assert_eq!(s.class_id, i / 10);
        assert_eq!(s.subgraph.node_count(), 8);
        assert!(netsig_core::graph::is_connected(&s.subgraph));
    }
    assert_eq!(build_dataset(&classes, &spec).unwrap(), samples);
    let text = netsig_core::sampler::write_dataset(&samples);
    let back = netsig_core::sampler::read_dataset(text.as_bytes()).unwrap();
    assert_eq!(back, samples);
}
