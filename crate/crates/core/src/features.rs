//! Classical topological features and Weisfeiler-Lehman histograms.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bfs_distances, largest_component, Graph};
use crate::rng::splitmix64;

/// Power-iteration stopping tolerance on the Rayleigh quotient change.
pub const EIGEN_TOLERANCE: f64 = 1e-9;
pub const EIGEN_MAX_ITERATIONS: usize = 10_000;
/// Largest graph for which the dense eigensolver fallback is used.
pub const DENSE_FALLBACK_MAX_N: usize = 64;

/// The 15 classical features of a (sub)graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFeatures {
    pub transitivity: f64,
    pub avg_clustering: f64,
    pub avg_node_connectivity: f64,
    pub edge_connectivity: f64,
    pub avg_eccentricity: f64,
    pub diameter: f64,
    pub avg_shortest_path: f64,
    pub avg_degree: f64,
    pub frac_degree_one: f64,
    pub avg_closeness: f64,
    pub central_points_frac: f64,
    pub density: f64,
    pub avg_neighbor_degree: f64,
    pub eig1: f64,
    pub eig2: f64,
    /// Distance-based values were computed on the largest component only,
    /// or are zero because the graph has a single node.
    pub degenerate: bool,
}

impl ClassicalFeatures {
    pub const NAMES: [&'static str; 15] = [
        "transitivity",
        "avg_clustering",
        "avg_node_connectivity",
        "edge_connectivity",
        "avg_eccentricity",
        "diameter",
        "avg_shortest_path",
        "avg_degree",
        "frac_degree_one",
        "avg_closeness",
        "central_points_frac",
        "density",
        "avg_neighbor_degree",
        "eig1",
        "eig2",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.transitivity,
            self.avg_clustering,
            self.avg_node_connectivity,
            self.edge_connectivity,
            self.avg_eccentricity,
            self.diameter,
            self.avg_shortest_path,
            self.avg_degree,
            self.frac_degree_one,
            self.avg_closeness,
            self.central_points_frac,
            self.density,
            self.avg_neighbor_degree,
            self.eig1,
            self.eig2,
        ]
    }
}

pub fn classical_features(g: &Graph) -> Result<ClassicalFeatures> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let m = g.edge_count();
    let nf = n as f64;

    let mut triangles = 0usize;
    let mut triads = 0usize;
    let mut clustering_sum = 0.0;
    for v in 0..n {
        let d = g.degree(v);
        triads += d * d.saturating_sub(1) / 2;
        if d < 2 {
            continue;
        }
        let nbrs = g.neighbors(v);
        let mut links = 0usize;
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                if g.has_edge(a, b) {
                    links += 1;
                }
            }
        }
        triangles += links;
        clustering_sum += links as f64 / (d * (d - 1) / 2) as f64;
    }
    // every triangle was counted once from each corner
    let transitivity = if triads == 0 {
        0.0
    } else {
        triangles as f64 / triads as f64
    };

    let avg_degree = 2.0 * m as f64 / nf;
    let frac_degree_one = (0..n).filter(|&v| g.degree(v) == 1).count() as f64 / nf;
    let density = if n > 1 {
        2.0 * m as f64 / (nf * (nf - 1.0))
    } else {
        0.0
    };
    let avg_neighbor_degree = (0..n)
        .map(|v| {
            let d = g.degree(v);
            if d == 0 {
                0.0
            } else {
                g.neighbors(v).iter().map(|&u| g.degree(u) as f64).sum::<f64>() / d as f64
            }
        })
        .sum::<f64>()
        / nf;

    let (component, _) = largest_component(g)?;
    let nc = component.node_count();
    let degenerate = nc < n || n == 1;
    let distances = DistanceSummary::compute(&component);
    let avg_node_connectivity = average_node_connectivity(&component);
    let edge_connectivity = if nc < n {
        0.0
    } else {
        edge_connectivity(g) as f64
    };
    let (eig1, eig2) = if n >= 2 {
        top_two_eigenvalues(g)?
    } else {
        (0.0, 0.0)
    };

    Ok(ClassicalFeatures {
        transitivity,
        avg_clustering: clustering_sum / nf,
        avg_node_connectivity,
        edge_connectivity,
        avg_eccentricity: distances.avg_eccentricity,
        diameter: distances.diameter,
        avg_shortest_path: distances.avg_shortest_path,
        avg_degree,
        frac_degree_one,
        avg_closeness: distances.avg_closeness,
        central_points_frac: distances.central_points_frac,
        density,
        avg_neighbor_degree,
        eig1,
        eig2,
        degenerate,
    })
}

/// All-pairs BFS statistics of a connected graph.
struct DistanceSummary {
    avg_eccentricity: f64,
    diameter: f64,
    avg_shortest_path: f64,
    avg_closeness: f64,
    central_points_frac: f64,
}

impl DistanceSummary {
    fn compute(g: &Graph) -> Self {
        let n = g.node_count();
        if n < 2 {
            return DistanceSummary {
                avg_eccentricity: 0.0,
                diameter: 0.0,
                avg_shortest_path: 0.0,
                avg_closeness: 0.0,
                central_points_frac: 0.0,
            };
        }
        let mut ecc = vec![0usize; n];
        let mut total = 0usize;
        let mut closeness = 0.0;
        for v in 0..n {
            let d = bfs_distances(g, v);
            ecc[v] = *d.iter().max().expect("nonempty");
            let sum: usize = d.iter().sum();
            total += sum;
            closeness += (n - 1) as f64 / sum as f64;
        }
        let radius = *ecc.iter().min().expect("nonempty");
        let diameter = *ecc.iter().max().expect("nonempty");
        let nf = n as f64;
        DistanceSummary {
            avg_eccentricity: ecc.iter().sum::<usize>() as f64 / nf,
            diameter: diameter as f64,
            // each unordered pair was summed twice
            avg_shortest_path: total as f64 / (nf * (nf - 1.0)),
            avg_closeness: closeness / nf,
            central_points_frac: ecc.iter().filter(|&&e| e == radius).count() as f64 / nf,
        }
    }
}

/// Residual network with unit capacities, sized for subgraph samples.
struct FlowNetwork {
    head: Vec<usize>,
    cap: Vec<i32>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        FlowNetwork {
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_arc(&mut self, from: usize, to: usize, capacity: i32) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.cap.push(capacity);
        self.adj[to].push(self.head.len());
        self.head.push(from);
        self.cap.push(0);
    }

    /// Max flow by BFS augmenting paths; capacities are consumed.
    fn max_flow(&mut self, s: usize, t: usize) -> usize {
        let nodes = self.adj.len();
        let mut flow = 0;
        let mut via = vec![usize::MAX; nodes];
        loop {
            via.iter_mut().for_each(|x| *x = usize::MAX);
            let mut queue = VecDeque::from([s]);
            let mut reached = false;
            while let Some(u) = queue.pop_front() {
                for &arc in &self.adj[u] {
                    let w = self.head[arc];
                    if self.cap[arc] > 0 && w != s && via[w] == usize::MAX {
                        via[w] = arc;
                        if w == t {
                            reached = true;
                            break;
                        }
                        queue.push_back(w);
                    }
                }
                if reached {
                    break;
                }
            }
            if !reached {
                return flow;
            }
            let mut w = t;
            while w != s {
                let arc = via[w];
                self.cap[arc] -= 1;
                self.cap[arc ^ 1] += 1;
                w = self.head[arc ^ 1];
            }
            flow += 1;
        }
    }
}

/// Maximum number of internally vertex-disjoint `s`-`t` paths (a direct edge
/// counts as one path).
pub fn local_node_connectivity(g: &Graph, s: usize, t: usize) -> usize {
    let n = g.node_count();
    // node v splits into v_in = 2v and v_out = 2v + 1
    let mut net = FlowNetwork::new(2 * n);
    let big = n as i32;
    for v in 0..n {
        let through = if v == s || v == t { big } else { 1 };
        net.add_arc(2 * v, 2 * v + 1, through);
    }
    for (u, v) in g.edges() {
        net.add_arc(2 * u + 1, 2 * v, 1);
        net.add_arc(2 * v + 1, 2 * u, 1);
    }
    net.max_flow(2 * s + 1, 2 * t)
}

pub fn local_edge_connectivity(g: &Graph, s: usize, t: usize) -> usize {
    let mut net = FlowNetwork::new(g.node_count());
    for (u, v) in g.edges() {
        net.add_arc(u, v, 1);
        net.add_arc(v, u, 1);
    }
    net.max_flow(s, t)
}

/// Mean local node connectivity over all unordered node pairs.
pub fn average_node_connectivity(g: &Graph) -> f64 {
    let n = g.node_count();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0usize;
    for s in 0..n {
        for t in s + 1..n {
            total += local_node_connectivity(g, s, t);
        }
    }
    total as f64 / (n * (n - 1) / 2) as f64
}

/// Global minimum edge cut; 0 for disconnected or single-node graphs.
pub fn edge_connectivity(g: &Graph) -> usize {
    let n = g.node_count();
    (1..n)
        .map(|t| local_edge_connectivity(g, 0, t))
        .min()
        .unwrap_or(0)
}

/// The two largest adjacency eigenvalues, `eig1 >= eig2`.
///
/// Power iteration on `A + (Δ + 1) I`, which is positive definite, with
/// projection deflation for the second pair. A pair whose residual stays
/// above tolerance falls back to the dense Jacobi solver.
pub fn top_two_eigenvalues(g: &Graph) -> Result<(f64, f64)> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::param("top_two_eigenvalues needs at least 2 nodes"));
    }
    let shift = g.max_degree() as f64 + 1.0;
    let first = shifted_power_iteration(g, shift, None);
    let second = first
        .as_ref()
        .and_then(|(_, v1)| shifted_power_iteration(g, shift, Some(v1)));
    match (first, second) {
        (Some((l1, _)), Some((l2, _))) => Ok((l1 - shift, l2 - shift)),
        _ => {
            if n > DENSE_FALLBACK_MAX_N {
                return Err(Error::Numerical(format!(
                    "power iteration did not converge on {n} nodes"
                )));
            }
            log::debug!("power iteration fell back to the dense solver (n={n})");
            let values = dense_eigenvalues(&adjacency_matrix(g));
            Ok((values[0], values[1]))
        }
    }
}

fn adjacency_matrix(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (u, v) in g.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    a
}

fn shifted_product(g: &Graph, shift: f64, x: &[f64], out: &mut [f64]) {
    for (v, o) in out.iter_mut().enumerate() {
        *o = shift * x[v] + g.neighbors(v).iter().map(|&u| x[u]).sum::<f64>();
    }
}

fn project_out(x: &mut [f64], unit: &[f64]) {
    let dot: f64 = x.iter().zip(unit).map(|(a, b)| a * b).sum();
    x.iter_mut().zip(unit).for_each(|(a, b)| *a -= dot * b);
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}

/// Dominant eigenpair of `A + shift I`, restricted to the complement of
/// `deflate` when given. `None` when not converged.
fn shifted_power_iteration(
    g: &Graph,
    shift: f64,
    deflate: Option<&Vec<f64>>,
) -> Option<(f64, Vec<f64>)> {
    let n = g.node_count();
    // the deflated pass needs its own start vector: projecting the first one
    // would cancel a repeated top eigenvalue exactly
    let salt = if deflate.is_some() { 0x9e37_79b9 } else { 0 };
    let mut x: Vec<f64> = (0..n)
        .map(|i| 0.5 + (splitmix64(i as u64 + 1 + salt) >> 11) as f64 / (1u64 << 53) as f64)
        .collect();
    if let Some(v1) = deflate {
        project_out(&mut x, v1);
    }
    if normalize(&mut x) == 0.0 {
        return None;
    }
    let mut y = vec![0.0; n];
    let mut previous = f64::NAN;
    for _ in 0..EIGEN_MAX_ITERATIONS {
        shifted_product(g, shift, &x, &mut y);
        if let Some(v1) = deflate {
            project_out(&mut y, v1);
        }
        let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let residual = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - rq * a).powi(2))
            .sum::<f64>()
            .sqrt();
        if (rq - previous).abs() < EIGEN_TOLERANCE && residual < 1e-6 {
            return Some((rq, x));
        }
        previous = rq;
        std::mem::swap(&mut x, &mut y);
        if normalize(&mut x) == 0.0 {
            return None;
        }
    }
    None
}

/// Eigenvalues of a dense symmetric matrix, descending, by cyclic Jacobi
/// rotations.
pub fn dense_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut values: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

static NEXT_DICTIONARY_ID: AtomicU64 = AtomicU64::new(1);

type Signature = (usize, u64, Vec<u64>);

/// Injective compression of `(iteration, label, sorted neighbor labels)` to
/// fresh integer labels, shared by every graph of a dataset. Safe to use from
/// several threads: equal keys always map to the same label.
#[derive(Debug)]
pub struct WlDictionary {
    id: u64,
    table: Mutex<HashMap<Signature, u64>>,
}

impl Default for WlDictionary {
    fn default() -> Self {
        Self::new()
    }
}

impl WlDictionary {
    pub fn new() -> Self {
        WlDictionary {
            id: NEXT_DICTIONARY_ID.fetch_add(1, AtomicOrdering::Relaxed),
            table: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.table.lock().expect("dictionary lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn compress(&self, iteration: usize, label: u64, neighbors: Vec<u64>) -> u64 {
        let mut table = self.table.lock().expect("dictionary lock");
        let next = table.len() as u64;
        *table.entry((iteration, label, neighbors)).or_insert(next)
    }
}

/// Histogram of WL labels over iterations `0..=h`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WlFeatureVector {
    pub h: usize,
    pub dictionary_id: u64,
    /// `(iteration, label) -> count`.
    pub counts: BTreeMap<(usize, u64), u64>,
}

impl WlFeatureVector {
    pub fn total_at(&self, iteration: usize) -> u64 {
        self.counts
            .iter()
            .filter(|((it, _), _)| *it == iteration)
            .map(|(_, &c)| c)
            .sum()
    }
}

/// WL subtree features: iteration 0 labels are degrees, each later label
/// compresses the previous label with the sorted neighbor labels.
pub fn wl_features(g: &Graph, h: usize, dictionary: &WlDictionary) -> WlFeatureVector {
    let n = g.node_count();
    let mut labels: Vec<u64> = (0..n).map(|v| g.degree(v) as u64).collect();
    let mut counts = BTreeMap::new();
    for iteration in 0..=h {
        if iteration > 0 {
            labels = (0..n)
                .map(|v| {
                    let mut nbrs: Vec<u64> = g.neighbors(v).iter().map(|&u| labels[u]).collect();
                    nbrs.sort_unstable();
                    dictionary.compress(iteration, labels[v], nbrs)
                })
                .collect();
        }
        for &label in &labels {
            *counts.entry((iteration, label)).or_insert(0) += 1;
        }
    }
    WlFeatureVector {
        h,
        dictionary_id: dictionary.id,
        counts,
    }
}

/// WL kernel value: dot product of the two histograms.
pub fn wl_kernel(a: &WlFeatureVector, b: &WlFeatureVector) -> Result<f64> {
    if a.h != b.h {
        return Err(Error::param(format!("WL depth mismatch: {} vs {}", a.h, b.h)));
    }
    if a.dictionary_id != b.dictionary_id {
        return Err(Error::param("WL vectors come from different dictionaries"));
    }
    let (small, large) = if a.counts.len() <= b.counts.len() {
        (a, b)
    } else {
        (b, a)
    };
    Ok(small
        .counts
        .iter()
        .filter_map(|(key, &x)| large.counts.get(key).map(|&y| (x * y) as f64))
        .sum())
}

/// Column index of every WL label seen while fitting, for densifying sparse
/// histograms into fixed-length vectors.
#[derive(Clone, Debug, Default)]
pub struct WlVocabulary {
    index: BTreeMap<(usize, u64), usize>,
}

impl WlVocabulary {
    pub fn fit<'a, I: IntoIterator<Item = &'a WlFeatureVector>>(vectors: I) -> Self {
        let mut keys: Vec<(usize, u64)> = vectors
            .into_iter()
            .flat_map(|v| v.counts.keys().copied())
            .collect();
        keys.sort_unstable();
        keys.dedup();
        WlVocabulary {
            index: keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Dense counts; labels unseen during fitting are dropped.
    pub fn densify(&self, v: &WlFeatureVector) -> Vec<f64> {
        let mut out = vec![0.0; self.index.len()];
        for (key, &count) in &v.counts {
            if let Some(&i) = self.index.get(key) {
                out[i] = count as f64;
            }
        }
        out
    }
}

/// Feature matrix as CSV: a header naming the 15 features plus `class_id`,
/// then one row per sample.
pub fn write_features_csv<W: std::io::Write>(
    rows: &[(ClassicalFeatures, usize)],
    out: W,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = ClassicalFeatures::NAMES.to_vec();
    header.push("class_id");
    writer.write_record(&header)?;
    for (features, class_id) in rows {
        let mut record: Vec<String> = features.to_vec().iter().map(|x| format!("{x}")).collect();
        record.push(class_id.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a feature CSV written by [`write_features_csv`] into rows of 15
/// values plus class id. Lines starting with `#` are skipped.
pub fn read_features_csv<R: std::io::Read>(input: R) -> Result<Vec<(Vec<f64>, usize)>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = reader.headers()?.clone();
    let expected: Vec<&str> = ClassicalFeatures::NAMES
        .iter()
        .copied()
        .chain(std::iter::once("class_id"))
        .collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::schema("header", "unexpected feature CSV columns"));
    }
    reader
        .records()
        .enumerate()
        .map(|(i, record)| {
            let record = record?;
            let bad = |m: &str| Error::schema(format!("row {}", i + 1), m);
            let values = record
                .iter()
                .take(15)
                .map(|x| x.parse::<f64>().map_err(|_| bad("non-numeric feature")))
                .collect::<Result<Vec<f64>>>()?;
            let class_id = record
                .get(15)
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| bad("bad class_id"))?;
            Ok((values, class_id))
        })
        .collect()
}
