//! Dataset manifests: the list of parent-graph classes to sample from.
//!
//! Manifests are JSON documents (format version 1):
//!
//! ```json
//! {
//!   "version": 1,
//!   "classes": [
//!     { "name": "road", "path": "data/roadNet-PA.txt" },
//!     { "name": "er", "synthetic": { "family": "erdos_renyi",
//!                                     "params": { "n": 1000, "p": 0.15 },
//!                                     "seed": 1 } }
//!   ]
//! }
//! ```
//!
//! Each class carries exactly one of `path` (an edge-list file, relative
//! paths resolve against the manifest's directory) or `synthetic`.
//! Synthetic parameter keys per family:
//! `erdos_renyi {n, p}`, `barabasi_albert {n, m}`,
//! `watts_strogatz {n, k, beta}`, `random_geometric {n, r}`.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generate_synthetic, parse_edge_list, Family, Graph};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl SyntheticSource {
    pub fn new(family: &Family, seed: u64) -> Self {
        let mut params = BTreeMap::new();
        match *family {
            Family::ErdosRenyi { n, p } => {
                params.insert("n".into(), n as f64);
                params.insert("p".into(), p);
            }
            Family::BarabasiAlbert { n, m } => {
                params.insert("n".into(), n as f64);
                params.insert("m".into(), m as f64);
            }
            Family::WattsStrogatz { n, k, beta } => {
                params.insert("n".into(), n as f64);
                params.insert("k".into(), k as f64);
                params.insert("beta".into(), beta);
            }
            Family::RandomGeometric { n, r } => {
                params.insert("n".into(), n as f64);
                params.insert("r".into(), r);
            }
        }
        SyntheticSource {
            family: family.name().into(),
            params,
            seed,
        }
    }

    pub fn to_family(&self) -> Result<Family> {
        let get = |key: &str| -> Result<f64> {
            self.params.get(key).copied().ok_or_else(|| {
                Error::param(format!("{}: missing parameter {key:?}", self.family))
            })
        };
        let count = |key: &str| -> Result<usize> {
            let v = get(key)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::param(format!(
                    "{}: parameter {key:?}={v} must be a nonnegative integer",
                    self.family
                )));
            }
            Ok(v as usize)
        };
        let family = match self.family.as_str() {
            "erdos_renyi" => Family::ErdosRenyi {
                n: count("n")?,
                p: get("p")?,
            },
            "barabasi_albert" => Family::BarabasiAlbert {
                n: count("n")?,
                m: count("m")?,
            },
            "watts_strogatz" => Family::WattsStrogatz {
                n: count("n")?,
                k: count("k")?,
                beta: get("beta")?,
            },
            "random_geometric" => Family::RandomGeometric {
                n: count("n")?,
                r: get("r")?,
            },
            other => return Err(Error::param(format!("unknown synthetic family {other:?}"))),
        };
        family.validate()?;
        Ok(family)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSource {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub classes: Vec<ClassSource>,
    /// Directory that relative `path` entries resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// A class name with its loaded parent graph.
#[derive(Clone, Debug)]
pub struct ClassGraph {
    pub name: String,
    pub graph: Graph,
}

impl DatasetManifest {
    pub fn synthetic(classes: Vec<(String, Family, u64)>) -> Result<Self> {
        let manifest = DatasetManifest {
            version: MANIFEST_VERSION,
            classes: classes
                .into_iter()
                .map(|(name, family, seed)| ClassSource {
                    name,
                    path: None,
                    synthetic: Some(SyntheticSource::new(&family, seed)),
                })
                .collect(),
            base_dir: None,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: DatasetManifest = serde_json::from_str(text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut manifest = Self::from_json(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf);
        Ok(manifest)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::schema(
                "manifest",
                format!("unsupported version {} (expected {MANIFEST_VERSION})", self.version),
            ));
        }
        if self.classes.len() < 2 {
            return Err(Error::schema("manifest", "at least two classes are required"));
        }
        let mut names = HashSet::new();
        for class in &self.classes {
            if class.name.is_empty() {
                return Err(Error::schema("manifest", "empty class name"));
            }
            if !names.insert(class.name.as_str()) {
                return Err(Error::schema(&class.name, "duplicate class name"));
            }
            match (&class.path, &class.synthetic) {
                (Some(_), None) => {}
                (None, Some(s)) => {
                    s.to_family()?;
                }
                _ => {
                    return Err(Error::schema(
                        &class.name,
                        "exactly one of `path` or `synthetic` is required",
                    ))
                }
            }
        }
        Ok(())
    }

    /// Class names in class-id order. Ids follow the lexicographic order of
    /// the names, so reordering a manifest never changes any result.
    pub fn class_names(&self) -> Vec<String> {
        self.sorted_classes().map(|c| c.name.clone()).collect()
    }

    fn sorted_classes(&self) -> impl Iterator<Item = &ClassSource> {
        let mut classes: Vec<&ClassSource> = self.classes.iter().collect();
        classes.sort_by(|a, b| a.name.cmp(&b.name));
        classes.into_iter()
    }

    /// Loads or generates every parent graph, in class-id order.
    pub fn load_graphs(&self) -> Result<Vec<ClassGraph>> {
        self.sorted_classes()
            .map(|class| {
                let graph = match (&class.path, &class.synthetic) {
                    (Some(path), _) => {
                        let resolved = match &self.base_dir {
                            Some(base) if path.is_relative() => base.join(path),
                            _ => path.clone(),
                        };
                        parse_edge_list(BufReader::new(File::open(resolved)?))?
                    }
                    (None, Some(s)) => generate_synthetic(&s.to_family()?, s.seed)?,
                    (None, None) => unreachable!("validated manifest"),
                };
                log::debug!(
                    "class {}: {} nodes, {} edges",
                    class.name,
                    graph.node_count(),
                    graph.edge_count()
                );
                Ok(ClassGraph {
                    name: class.name.clone(),
                    graph,
                })
            })
            .collect()
    }
}
