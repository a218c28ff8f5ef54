//! Simple undirected graphs, edge-list ingestion and synthetic generators.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::BufRead;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, uniform_index};

/// Immutable simple undirected graph stored as sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from undirected edges. Self-loops and repeated edges
    /// are dropped; an endpoint `>= n` is an error.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidNodes(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph { adjacency })
    }

    /// Wraps adjacency lists that already satisfy the graph invariants.
    pub(crate) fn from_sorted_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let g = Graph { adjacency };
        debug_assert!(g.check_invariants());
        g
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Full scan of the symmetry, sortedness, range and loop-free invariants.
    pub fn check_invariants(&self) -> bool {
        let n = self.node_count();
        self.adjacency.iter().enumerate().all(|(u, list)| {
            list.windows(2).all(|w| w[0] < w[1])
                && list
                    .iter()
                    .all(|&v| v < n && v != u && self.adjacency[v].binary_search(&u).is_ok())
        })
    }

    /// Relabels nodes: node `v` becomes `mapping[v]`. `mapping` must be a
    /// permutation of `0..n`.
    pub fn relabel(&self, mapping: &[usize]) -> Result<Graph> {
        let n = self.node_count();
        if mapping.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: mapping.len(),
            });
        }
        let mut seen = vec![false; n];
        for &m in mapping {
            if m >= n || std::mem::replace(&mut seen[m], true) {
                return Err(Error::InvalidNodes("relabeling is not a permutation".into()));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (u, list) in self.adjacency.iter().enumerate() {
            let mut mapped: Vec<usize> = list.iter().map(|&v| mapping[v]).collect();
            mapped.sort_unstable();
            adjacency[mapping[u]] = mapped;
        }
        Ok(Graph { adjacency })
    }

    /// Subgraph induced by `nodes`; node `nodes[i]` becomes node `i`.
    /// Caller guarantees that `nodes` are distinct and in range.
    pub(crate) fn induced_unchecked(&self, nodes: &[usize]) -> Graph {
        let mut position = HashMap::with_capacity(nodes.len());
        for (i, &v) in nodes.iter().enumerate() {
            position.insert(v, i);
        }
        let adjacency = nodes
            .iter()
            .map(|&v| {
                let mut list: Vec<usize> = self.adjacency[v]
                    .iter()
                    .filter_map(|u| position.get(u).copied())
                    .collect();
                list.sort_unstable();
                list
            })
            .collect();
        Graph { adjacency }
    }

    /// Serializes to the edge-list text format. Lines are ordered so that
    /// re-parsing reproduces the node numbering exactly; a node that no edge
    /// can introduce in order (e.g. an isolated node) is introduced by a
    /// `v v` self-loop line, which the parser drops after assigning the id.
    pub fn to_edge_list(&self) -> String {
        let n = self.node_count();
        let mut out = String::new();
        let _ = writeln!(out, "# nodes {} edges {}", n, self.edge_count());
        let mut emitted: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut introduced = 0;
        while introduced < n {
            let v = introduced;
            if let Some(&u) = self.adjacency[v].iter().find(|&&u| u < v) {
                let _ = writeln!(out, "{u} {v}");
                emitted.insert((u, v));
                introduced += 1;
            } else if self.has_edge(v, v + 1) {
                let _ = writeln!(out, "{} {}", v, v + 1);
                emitted.insert((v, v + 1));
                introduced += 2;
            } else {
                // self-loop line: introduces the id, then dropped on parse
                let _ = writeln!(out, "{v} {v}");
                introduced += 1;
            }
        }
        for (u, v) in self.edges() {
            if !emitted.contains(&(u, v)) {
                let _ = writeln!(out, "{u} {v}");
            }
        }
        out
    }
}

/// Parses the SNAP-style edge-list format.
///
/// Lines starting with `#` are comments and blank lines are skipped. Every
/// other line holds two whitespace-separated integer node ids. Edges are
/// symmetrized, duplicates and self-loops dropped, and node ids compacted to
/// `0..n` in order of first appearance.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let mut endpoint = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected two node ids".into(),
            })?;
            let raw: u64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-integer token {tok:?}"),
            })?;
            let next = ids.len();
            Ok(*ids.entry(raw).or_insert(next))
        };
        let u = endpoint(tokens.next())?;
        let v = endpoint(tokens.next())?;
        if let Some(extra) = tokens.next() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unexpected token {extra:?} after two node ids"),
            });
        }
        edges.push((u, v));
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    Graph::from_edges(ids.len(), edges)
}

pub fn parse_edge_list_str(text: &str) -> Result<Graph> {
    parse_edge_list(text.as_bytes())
}

/// Synthetic parent-graph families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    ErdosRenyi { n: usize, p: f64 },
    /// Clique on `m` seed nodes, then each new node attaches to `m` distinct
    /// existing nodes chosen with probability proportional to degree.
    BarabasiAlbert { n: usize, m: usize },
    WattsStrogatz { n: usize, k: usize, beta: f64 },
    RandomGeometric { n: usize, r: f64 },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::ErdosRenyi { p, .. } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::param(format!("erdos_renyi: p={p} outside 0<=p<=1")));
                }
            }
            Family::BarabasiAlbert { n, m } => {
                if m < 1 || m >= n {
                    return Err(Error::param(format!(
                        "barabasi_albert: m={m} outside 1<=m<n (n={n})"
                    )));
                }
            }
            Family::WattsStrogatz { n, k, beta } => {
                if k % 2 != 0 || k >= n {
                    return Err(Error::param(format!(
                        "watts_strogatz: k={k} must be even and < n (n={n})"
                    )));
                }
                if !(0.0..=1.0).contains(&beta) {
                    return Err(Error::param(format!(
                        "watts_strogatz: beta={beta} outside 0<=beta<=1"
                    )));
                }
            }
            Family::RandomGeometric { r, .. } => {
                if !(r > 0.0) {
                    return Err(Error::param(format!("random_geometric: r={r} must be > 0")));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::ErdosRenyi { .. } => "erdos_renyi",
            Family::BarabasiAlbert { .. } => "barabasi_albert",
            Family::WattsStrogatz { .. } => "watts_strogatz",
            Family::RandomGeometric { .. } => "random_geometric",
        }
    }
}

/// Deterministic synthetic graph for `(family, seed)`.
pub fn generate_synthetic(family: &Family, seed: u64) -> Result<Graph> {
    family.validate()?;
    let mut rng = rng_from_seed(seed);
    let g = match *family {
        Family::ErdosRenyi { n, p } => {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random::<f64>() < p {
                        edges.push((u, v));
                    }
                }
            }
            Graph::from_edges(n, edges)?
        }
        Family::BarabasiAlbert { n, m } => {
            let mut edges = Vec::with_capacity(m * (m - 1) / 2 + m * (n - m));
            // endpoint multiset: each node appears once per incident edge
            let mut endpoints: Vec<usize> = Vec::with_capacity(2 * edges.capacity());
            for u in 0..m {
                for v in u + 1..m {
                    edges.push((u, v));
                    endpoints.push(u);
                    endpoints.push(v);
                }
            }
            let mut targets: Vec<usize> = Vec::with_capacity(m);
            for v in m..n {
                targets.clear();
                if v == m {
                    targets.extend(0..m);
                } else {
                    while targets.len() < m {
                        let t = endpoints[uniform_index(&mut rng, endpoints.len())];
                        if !targets.contains(&t) {
                            targets.push(t);
                        }
                    }
                }
                for &t in &targets {
                    edges.push((t, v));
                    endpoints.push(t);
                    endpoints.push(v);
                }
            }
            Graph::from_edges(n, edges)?
        }
        Family::WattsStrogatz { n, k, beta } => {
            let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
            for u in 0..n {
                for j in 1..=k / 2 {
                    let v = (u + j) % n;
                    sets[u].insert(v);
                    sets[v].insert(u);
                }
            }
            for j in 1..=k / 2 {
                for u in 0..n {
                    let v = (u + j) % n;
                    if rng.random::<f64>() >= beta || !sets[u].contains(&v) {
                        continue;
                    }
                    if sets[u].len() >= n - 1 {
                        continue;
                    }
                    let w = loop {
                        let w = uniform_index(&mut rng, n);
                        if w != u && !sets[u].contains(&w) {
                            break w;
                        }
                    };
                    sets[u].remove(&v);
                    sets[v].remove(&u);
                    sets[u].insert(w);
                    sets[w].insert(u);
                }
            }
            Graph::from_sorted_adjacency(sets.into_iter().map(|s| s.into_iter().collect()).collect())
        }
        Family::RandomGeometric { n, r } => {
            let points: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
            let r2 = r * r;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    let dx = points[u].0 - points[v].0;
                    let dy = points[u].1 - points[v].1;
                    if dx * dx + dy * dy <= r2 {
                        edges.push((u, v));
                    }
                }
            }
            Graph::from_edges(n, edges)?
        }
    };
    Ok(g)
}

/// Hop distances from `source`. Unreachable nodes get `g.node_count()`.
pub fn bfs_distances(g: &Graph, source: usize) -> Vec<usize> {
    let n = g.node_count();
    let mut dist = vec![n; n];
    if source >= n {
        return dist;
    }
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if dist[v] == n {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Connected components, each sorted ascending, listed by smallest member.
pub fn connected_components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut members = vec![start];
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    members.push(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Node set of the largest component. Equal sizes resolve to the component
/// holding the smallest node id.
pub fn largest_component_nodes(g: &Graph) -> Result<Vec<usize>> {
    let mut best: Option<Vec<usize>> = None;
    for c in connected_components(g) {
        if best.as_ref().is_none_or(|b| c.len() > b.len()) {
            best = Some(c);
        }
    }
    best.ok_or(Error::EmptyGraph)
}

/// Induced subgraph on the largest component, plus the map from new node id
/// to original node id.
pub fn largest_component(g: &Graph) -> Result<(Graph, Vec<usize>)> {
    let nodes = largest_component_nodes(g)?;
    let sub = g.induced_unchecked(&nodes);
    Ok((sub, nodes))
}

pub fn is_connected(g: &Graph) -> bool {
    g.node_count() > 0 && bfs_distances(g, 0).iter().all(|&d| d < g.node_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge_set(g: &Graph) -> Vec<(usize, usize)> {
        g.edges().collect()
    }

    #[test]
    fn parse_basic_path() {
        let g = parse_edge_list_str("0 1\n1 2").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(edge_set(&g), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn parse_symmetrizes_and_drops_loops() {
        let g = parse_edge_list_str("0 1\n1 0\n0 0").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(edge_set(&g), vec![(0, 1)]);
    }

    #[test]
    fn parse_compacts_in_first_appearance_order() {
        let g = parse_edge_list_str("# comment\n5 9\n9 7").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(edge_set(&g), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn parse_errors() {
        match parse_edge_list_str("0 1\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_edge_list_str(""), Err(Error::EmptyInput)));
        assert!(matches!(parse_edge_list_str("# only\n\n"), Err(Error::EmptyInput)));
        assert!(matches!(parse_edge_list_str("3\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn erdos_renyi_extremes() {
        for seed in 0..5 {
            let k4 = generate_synthetic(&Family::ErdosRenyi { n: 4, p: 1.0 }, seed).unwrap();
            assert_eq!(k4.edge_count(), 6);
            let empty = generate_synthetic(&Family::ErdosRenyi { n: 10, p: 0.0 }, seed).unwrap();
            assert_eq!(empty.edge_count(), 0);
            assert_eq!(empty.node_count(), 10);
        }
    }

    #[test]
    fn invalid_parameters_are_named() {
        let cases = [
            Family::ErdosRenyi { n: 5, p: 1.5 },
            Family::BarabasiAlbert { n: 5, m: 5 },
            Family::BarabasiAlbert { n: 5, m: 0 },
            Family::WattsStrogatz { n: 10, k: 3, beta: 0.1 },
            Family::WattsStrogatz { n: 4, k: 4, beta: 0.1 },
            Family::WattsStrogatz { n: 10, k: 4, beta: -0.1 },
            Family::RandomGeometric { n: 10, r: 0.0 },
        ];
        for family in cases {
            let err = generate_synthetic(&family, 1).unwrap_err().to_string();
            assert!(err.contains(family.name()), "{err}");
        }
    }

    #[test]
    fn watts_strogatz_without_rewiring_is_a_ring_lattice() {
        let g = generate_synthetic(&Family::WattsStrogatz { n: 12, k: 4, beta: 0.0 }, 3).unwrap();
        assert_eq!(g.edge_count(), 24);
        assert!((0..12).all(|v| g.degree(v) == 4));
        let rewired =
            generate_synthetic(&Family::WattsStrogatz { n: 200, k: 4, beta: 0.3 }, 3).unwrap();
        assert_eq!(rewired.edge_count(), 400);
        assert!(rewired.check_invariants());
    }

    #[test]
    fn random_geometric_radius_covers_unit_square() {
        let g = generate_synthetic(&Family::RandomGeometric { n: 8, r: 1.5 }, 9).unwrap();
        assert_eq!(g.edge_count(), 28);
    }

    #[test]
    fn bfs_examples() {
        let path = parse_edge_list_str("0 1\n1 2\n2 3").unwrap();
        assert_eq!(bfs_distances(&path, 0), vec![0, 1, 2, 3]);
        let k3 = parse_edge_list_str("0 1\n1 2\n2 0").unwrap();
        assert_eq!(bfs_distances(&k3, 0), vec![0, 1, 1]);
        let two = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(bfs_distances(&two, 0), vec![0, 1, 4, 4]);
    }

    #[test]
    fn largest_component_examples() {
        let k3 = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let (sub, map) = largest_component(&k3).unwrap();
        assert_eq!(sub, k3);
        assert_eq!(map, vec![0, 1, 2]);

        let k3_iso = Graph::from_edges(4, [(1, 2), (2, 3), (1, 3)]).unwrap();
        let (sub, map) = largest_component(&k3_iso).unwrap();
        assert_eq!(sub, k3);
        assert_eq!(map, vec![1, 2, 3]);

        let two = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let (sub, map) = largest_component(&two).unwrap();
        assert_eq!(edge_set(&sub), vec![(0, 1)]);
        assert_eq!(map, vec![0, 1]);

        assert!(matches!(largest_component(&Graph::empty(0)), Err(Error::EmptyGraph)));
    }

    fn edge_text() -> impl Strategy<Value = String> {
        prop::collection::vec((0u64..40, 0u64..40), 1..60).prop_map(|edges| {
            edges
                .into_iter()
                .map(|(u, v)| format!("{u} {v}\n"))
                .collect::<String>()
        })
    }

    proptest! {
        #[test]
        fn parsed_graphs_satisfy_invariants_and_reserialize(text in edge_text()) {
            let g = parse_edge_list_str(&text).unwrap();
            prop_assert!(g.check_invariants());
            let again = parse_edge_list_str(&g.to_edge_list()).unwrap();
            prop_assert_eq!(again, g);
        }

        #[test]
        fn bfs_distance_differs_by_at_most_one_across_edges(
            n in 2usize..30, p in 0.05f64..0.5, seed in 0u64..1000
        ) {
            let g = generate_synthetic(&Family::ErdosRenyi { n, p }, seed).unwrap();
            let d = bfs_distances(&g, 0);
            for (u, v) in g.edges() {
                if d[u] < n && d[v] < n {
                    prop_assert!(d[u].abs_diff(d[v]) <= 1);
                } else {
                    prop_assert_eq!(d[u], d[v]);
                }
            }
        }

        #[test]
        fn generators_are_reproducible(seed in 0u64..500, family_idx in 0usize..4) {
            let family = match family_idx {
                0 => Family::ErdosRenyi { n: 40, p: 0.1 },
                1 => Family::BarabasiAlbert { n: 40, m: 3 },
                2 => Family::WattsStrogatz { n: 40, k: 4, beta: 0.2 },
                _ => Family::RandomGeometric { n: 40, r: 0.2 },
            };
            let a = generate_synthetic(&family, seed).unwrap();
            let b = generate_synthetic(&family, seed).unwrap();
            prop_assert!(a.check_invariants());
            prop_assert_eq!(a.to_edge_list(), b.to_edge_list());
            prop_assert_eq!(a, b);
        }
    }
}
