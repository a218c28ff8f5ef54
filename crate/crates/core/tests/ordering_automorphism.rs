//! Brute force over small graphs: whenever the ordering claims to be fully
//! disambiguated, every relabeling must produce the same image.

use netsig_core::graph::is_connected;
use netsig_core::ordering::{reconstruct, structured_image};
use netsig_core::Graph;
use std::collections::{HashMap, HashSet};

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn graph_from_mask(n: usize, mask: u64) -> Graph {
    let mut edges = Vec::new();
    let mut bit = 0;
    for u in 0..n {
        for v in u + 1..n {
            if mask >> bit & 1 == 1 {
                edges.push((u, v));
            }
            bit += 1;
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Returns whether the graph was flagged, panicking on any flagged mismatch.
fn check_all_relabelings(g: &Graph, perms: &[Vec<usize>]) -> bool {
    let (base, ordering) = structured_image(g).unwrap();
    assert_eq!(reconstruct(&base, &ordering).unwrap(), *g);
    if !ordering.fully_disambiguated {
        return false;
    }
    for p in perms {
        let h = g.relabel(p).unwrap();
        let (img, ord) = structured_image(&h).unwrap();
        assert!(ord.fully_disambiguated, "{:?} under {:?}", g.edges().collect::<Vec<_>>(), p);
        assert_eq!(img, base, "{:?} under {:?}", g.edges().collect::<Vec<_>>(), p);
    }
    true
}

#[test]
fn exhaustive_five_nodes() {
    let perms = permutations(5);
    let mut flagged = 0;
    for mask in 0..1u64 << 10 {
        let g = graph_from_mask(5, mask);
        let f = check_all_relabelings(&g, &perms);
        // disconnected inputs never claim disambiguation
        assert_eq!(f, is_connected(&g), "{mask}");
        flagged += f as usize;
    }
    // connected labeled graphs on five nodes
    assert_eq!(flagged, 728);
}

#[test]
fn flagged_images_are_canonical_forms() {
    // flagged images must not merge distinct isomorphism classes
    let perms = permutations(5);
    let mut by_image: HashMap<Vec<u8>, Vec<u64>> = HashMap::new();
    for mask in 0..1u64 << 10 {
        let g = graph_from_mask(5, mask);
        let (img, ord) = structured_image(&g).unwrap();
        if ord.fully_disambiguated {
            by_image.entry(img.pixels().to_vec()).or_default().push(mask);
        }
    }
    for masks in by_image.values() {
        let g = graph_from_mask(5, masks[0]);
        let orbit: HashSet<Vec<(usize, usize)>> = perms
            .iter()
            .map(|p| g.relabel(p).unwrap().edges().collect())
            .collect();
        for &m in masks {
            assert!(orbit.contains(&graph_from_mask(5, m).edges().collect::<Vec<_>>()));
        }
    }
    // 21 of the 34 classes are connected
    assert_eq!(by_image.len(), 21);
}

#[test]
fn symmetric_families() {
    let perms6 = permutations(6);
    let perms7 = permutations(7);
    let cycle = |n: usize| Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap();
    let star = |n: usize| Graph::from_edges(n, (1..n).map(|l| (0, l))).unwrap();
    let biclique = |a: usize, b: usize| {
        Graph::from_edges(a + b, (0..a).flat_map(|u| (a..a + b).map(move |v| (u, v)))).unwrap()
    };
    let complete = |n: usize| graph_from_mask(n, (1u64 << (n * (n - 1) / 2)) - 1);
    let prism = Graph::from_edges(
        6,
        [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (0, 3), (1, 4), (2, 5)],
    )
    .unwrap();
    let two_triangles = Graph::from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();

    for g in [cycle(6), star(6), biclique(3, 3), biclique(2, 4), complete(6), prism, two_triangles] {
        check_all_relabelings(&g, &perms6);
    }
    for g in [cycle(7), star(7), biclique(3, 4), complete(7)] {
        // every relabeling of n = 7 is too slow in debug; a stride still covers all positions
        let sample: Vec<Vec<usize>> = perms7.iter().step_by(7).cloned().collect();
        check_all_relabelings(&g, &sample);
    }
}

#[test]
fn random_six_node_graphs() {
    let perms = permutations(6);
    let mut state = 0x1234_5678_u64;
    for _ in 0..60 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mask = (state >> 20) & ((1 << 15) - 1);
        check_all_relabelings(&graph_from_mask(6, mask), &perms);
    }
}

