//! Random-walk subgraph sampling and labeled dataset assembly.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{largest_component_nodes, Graph};
use crate::manifest::ClassGraph;
use crate::rng::{derived_rng, uniform_index};

/// Walk steps allowed per attempt, as a multiple of the target size.
pub const STEP_BUDGET_PER_NODE: usize = 100;
/// Restarts allowed after the first attempt.
pub const MAX_RESTARTS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub n: usize,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(n: usize, samples_per_class: usize, seed: u64) -> Result<Self> {
        let spec = SampleSpec {
            n,
            samples_per_class,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param(format!("sample size n={} must be >= 2", self.n)));
        }
        if self.samples_per_class < 1 {
            return Err(Error::param("samples_per_class must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSample {
    pub subgraph: Graph,
    pub class_id: usize,
    pub sample_index: usize,
    /// Start node of the successful walk, as an id of the parent graph.
    pub walk_seed_node: usize,
}

/// Outcome of one walk: distinct visited nodes in discovery order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkSample {
    pub nodes: Vec<usize>,
    pub start: usize,
}

/// Random-walk sampler bound to one parent graph; caches the largest
/// component so that repeated sampling only pays for the walk.
pub struct RandomWalkSampler<'g> {
    graph: &'g Graph,
    component: Vec<usize>,
}

impl<'g> RandomWalkSampler<'g> {
    pub fn new(graph: &'g Graph) -> Result<Self> {
        let component = largest_component_nodes(graph)?;
        Ok(RandomWalkSampler { graph, component })
    }

    pub fn component_size(&self) -> usize {
        self.component.len()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<WalkSample> {
        if n == 0 {
            return Err(Error::param("walk target size must be >= 1"));
        }
        if self.component.len() < n {
            return Err(Error::Sampling(format!(
                "largest component has {} nodes, fewer than n={n}",
                self.component.len()
            )));
        }
        let budget = STEP_BUDGET_PER_NODE * n;
        let mut visited: HashSet<usize> = HashSet::with_capacity(n);
        let mut nodes = Vec::with_capacity(n);
        for _attempt in 0..=MAX_RESTARTS {
            visited.clear();
            nodes.clear();
            let start = self.component[uniform_index(rng, self.component.len())];
            let mut current = start;
            visited.insert(current);
            nodes.push(current);
            let mut steps = 0;
            while nodes.len() < n && steps < budget {
                let nbrs = self.graph.neighbors(current);
                current = nbrs[uniform_index(rng, nbrs.len())];
                steps += 1;
                if visited.insert(current) {
                    nodes.push(current);
                }
            }
            if nodes.len() == n {
                return Ok(WalkSample {
                    nodes: nodes.clone(),
                    start,
                });
            }
        }
        Err(Error::Sampling(format!(
            "walk did not reach {n} distinct nodes within {budget} steps after {MAX_RESTARTS} restarts"
        )))
    }
}

/// One random-walk sample of `n` distinct nodes from `g`.
pub fn random_walk_sample<R: rand::Rng + ?Sized>(
    g: &Graph,
    n: usize,
    rng: &mut R,
) -> Result<WalkSample> {
    RandomWalkSampler::new(g)?.sample(n, rng)
}

/// Subgraph induced by `nodes`, relabeled so that `nodes[i]` becomes node `i`.
pub fn induced_subgraph(g: &Graph, nodes: &[usize]) -> Result<Graph> {
    let mut seen = HashSet::with_capacity(nodes.len());
    for &v in nodes {
        if v >= g.node_count() {
            return Err(Error::InvalidNodes(format!(
                "node {v} out of range for {} nodes",
                g.node_count()
            )));
        }
        if !seen.insert(v) {
            return Err(Error::InvalidNodes(format!("duplicate node {v}")));
        }
    }
    Ok(g.induced_unchecked(nodes))
}

/// `spec.samples_per_class` walk samples per class, class-major. Sample `i`
/// of class `c` uses the RNG stream derived from `(spec.seed, c, i)`.
pub fn build_dataset(classes: &[ClassGraph], spec: &SampleSpec) -> Result<Vec<LabeledSample>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(classes.len() * spec.samples_per_class);
    for (class_id, class) in classes.iter().enumerate() {
        out.extend(sample_class(
            class,
            class_id,
            spec.n,
            0..spec.samples_per_class,
            spec.seed,
        )?);
    }
    Ok(out)
}

/// Samples with indices in `indices` for one class, using the same per-sample
/// streams as [`build_dataset`].
pub fn sample_class(
    class: &ClassGraph,
    class_id: usize,
    n: usize,
    indices: std::ops::Range<usize>,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    let sampler = RandomWalkSampler::new(&class.graph)?;
    if sampler.component_size() < n {
        return Err(Error::Sampling(format!(
            "class {}: largest component has {} nodes, fewer than n={n}",
            class.name,
            sampler.component_size(),
        )));
    }
    indices
        .into_par_iter()
        .map(|sample_index| {
            let mut rng = derived_rng(seed, class_id as u64, sample_index as u64);
            let walk = sampler.sample(n, &mut rng)?;
            Ok(LabeledSample {
                subgraph: class.graph.induced_unchecked(&walk.nodes),
                class_id,
                sample_index,
                walk_seed_node: walk.start,
            })
        })
        .collect()
}

pub const DATASET_VERSION: u32 = 1;
const DATASET_HEADER: &str = "# netsig-dataset v1";

/// Companion index of a dataset file: the class table and the sampling spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub version: u32,
    pub classes: Vec<String>,
    pub spec: SampleSpec,
    pub records: usize,
    #[serde(default)]
    pub config_hash: Option<String>,
}

impl DatasetIndex {
    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }
}

/// Image identifier `{class}_{sample_index}_{n}` used for image files and
/// recognizer records.
pub fn image_id(class_name: &str, sample_index: usize, n: usize) -> String {
    format!("{class_name}_{sample_index}_{n}")
}

/// Splits an image id into `(class name, sample index, n)`. Class names may
/// themselves contain underscores.
pub fn parse_image_id(id: &str) -> Option<(&str, usize, usize)> {
    let mut parts = id.rsplitn(3, '_');
    let n = parts.next()?.parse().ok()?;
    let index = parts.next()?.parse().ok()?;
    let class = parts.next()?;
    if class.is_empty() {
        return None;
    }
    Some((class, index, n))
}

/// Serializes samples in the line-delimited dataset format:
///
/// ```text
/// # netsig-dataset v1
/// <class_id> <sample_index> <n> <walk_seed_node> <u>-<v> <u>-<v> ...
/// ```
///
/// One record per line; edges list `u < v` in lexicographic order.
pub fn write_dataset(samples: &[LabeledSample]) -> String {
    let mut out = String::new();
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for s in samples {
        let _ = write!(
            out,
            "{} {} {} {}",
            s.class_id,
            s.sample_index,
            s.subgraph.node_count(),
            s.walk_seed_node
        );
        for (u, v) in s.subgraph.edges() {
            let _ = write!(out, " {u}-{v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<LabeledSample>> {
    let mut samples = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if line == DATASET_HEADER {
                saw_header = true;
            }
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut tokens = line.split_whitespace();
        let mut field = |name: &str| -> Result<usize> {
            let tok = tokens
                .next()
                .ok_or_else(|| bad(format!("missing field {name}")))?;
            tok.parse()
                .map_err(|_| bad(format!("field {name}: non-integer {tok:?}")))
        };
        let class_id = field("class_id")?;
        let sample_index = field("sample_index")?;
        let n = field("n")?;
        let walk_seed_node = field("walk_seed_node")?;
        let edges = tokens
            .map(|tok| {
                let (u, v) = tok
                    .split_once('-')
                    .ok_or_else(|| bad(format!("malformed edge {tok:?}")))?;
                let u = u.parse().map_err(|_| bad(format!("malformed edge {tok:?}")))?;
                let v = v.parse().map_err(|_| bad(format!("malformed edge {tok:?}")))?;
                Ok((u, v))
            })
            .collect::<Result<Vec<(usize, usize)>>>()?;
        let subgraph = Graph::from_edges(n, edges).map_err(|e| bad(e.to_string()))?;
        samples.push(LabeledSample {
            subgraph,
            class_id,
            sample_index,
            walk_seed_node,
        });
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 1,
            message: format!("missing header {DATASET_HEADER:?}"),
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, is_connected, Family};
    use crate::manifest::ClassGraph;
    use crate::rng::rng_from_seed;

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|v| (v - 1, v))).unwrap()
    }

    #[test]
    fn complete_graph_sample_is_everything() {
        let k3 = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        for seed in 0..20 {
            let mut nodes = random_walk_sample(&k3, 3, &mut rng_from_seed(seed)).unwrap().nodes;
            nodes.sort_unstable();
            assert_eq!(nodes, vec![0, 1, 2]);
        }
    }

    #[test]
    fn path_sample_covers_path() {
        let p5 = path(5);
        for seed in 0..20 {
            let mut nodes = random_walk_sample(&p5, 5, &mut rng_from_seed(seed)).unwrap().nodes;
            nodes.sort_unstable();
            assert_eq!(nodes, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn star_sample_contains_center() {
        let star = Graph::from_edges(11, (1..11).map(|v| (0, v))).unwrap();
        for seed in 0..50 {
            let nodes = random_walk_sample(&star, 3, &mut rng_from_seed(seed)).unwrap().nodes;
            assert!(nodes.contains(&0));
            assert!(is_connected(&induced_subgraph(&star, &nodes).unwrap()));
        }
    }

    #[test]
    fn too_small_component_is_an_error() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (3, 4)]).unwrap();
        assert!(matches!(
            random_walk_sample(&g, 4, &mut rng_from_seed(1)),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn induced_subgraph_examples() {
        let k4 = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let k3 = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(induced_subgraph(&k4, &[3, 1, 0]).unwrap(), k3);

        let p4 = path(4);
        assert_eq!(induced_subgraph(&p4, &[0, 2]).unwrap(), Graph::empty(2));

        let c5 = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        assert_eq!(induced_subgraph(&c5, &[1, 2, 3, 4]).unwrap(), path(4));

        assert!(induced_subgraph(&k4, &[0, 0]).is_err());
        assert!(induced_subgraph(&k4, &[0, 7]).is_err());
    }

    #[test]
    fn image_ids_round_trip_with_underscored_classes() {
        let id = image_id("road_net", 12, 64);
        assert_eq!(id, "road_net_12_64");
        assert_eq!(parse_image_id(&id), Some(("road_net", 12, 64)));
        assert_eq!(parse_image_id("12_64"), None);
        assert_eq!(parse_image_id("x_a_64"), None);
    }

    #[test]
    fn dataset_round_trip_and_determinism() {
        let classes = vec![
            ClassGraph {
                name: "ba".into(),
                graph: generate_synthetic(&Family::BarabasiAlbert { n: 200, m: 2 }, 1).unwrap(),
            },
            ClassGraph {
                name: "ws".into(),
                graph: generate_synthetic(&Family::WattsStrogatz { n: 200, k: 4, beta: 0.1 }, 2)
                    .unwrap(),
            },
        ];
        let spec = SampleSpec::new(8, 10, 42).unwrap();
        let samples = build_dataset(&classes, &spec).unwrap();
        assert_eq!(samples.len(), 20);
        for (i, s) in samples.iter().enumerate() {
            assert_eq!(s.class_id, i / 10);
            assert_eq!(s.subgraph.node_count(), 8);
            assert!(is_connected(&s.subgraph));
        }
        let text = write_dataset(&samples);
        assert_eq!(read_dataset(text.as_bytes()).unwrap(), samples);
        let again = build_dataset(&classes, &spec).unwrap();
        assert_eq!(write_dataset(&again), text);
    }

    #[test]
    fn read_dataset_rejects_garbage() {
        assert!(read_dataset("0 0 3 0 0-1\n".as_bytes()).is_err());
        let text = format!("{DATASET_HEADER}\n0 0 3 0 0-9\n");
        assert!(read_dataset(text.as_bytes()).is_err());
        let text = format!("{DATASET_HEADER}\n0 0 3 0 0:1\n");
        assert!(read_dataset(text.as_bytes()).is_err());
    }
}
