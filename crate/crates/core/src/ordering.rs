//! Permutation-invariant vertex ordering and structured adjacency images.
//!
//! The ordering starts from the vertex with the largest rank key (degree,
//! then the sizes of its 2-, 3-, ... hop neighborhoods, then a color
//! refinement signature) and proceeds breadth-first from that seed. Inside a
//! BFS layer vertices are sorted by rank key, then by the position of their
//! earliest already-ordered neighbor, then by a refinement in which every
//! already-ordered vertex is individualized. Whatever tie survives all of
//! that is resolved by lowest vertex id, after checking whether the tied
//! vertices are interchangeable (same orbit of the automorphisms fixing the
//! vertices ordered so far). If they are not, the ordering is flagged as not
//! fully disambiguated and invariance is no longer guaranteed.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bfs_distances, connected_components, Graph};
use crate::rng::shuffle;

/// Search-tree node budget of a single interchangeability check.
const ORBIT_SEARCH_BUDGET: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering {
    /// `permutation[position]` is the original node id placed at `position`.
    pub permutation: Vec<usize>,
    pub fully_disambiguated: bool,
}

impl Ordering {
    /// Inverse map: `positions()[v]` is the position of node `v`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.permutation.len()];
        for (i, &v) in self.permutation.iter().enumerate() {
            pos[v] = i;
        }
        pos
    }

    pub fn is_valid_for(&self, g: &Graph) -> bool {
        let n = g.node_count();
        if self.permutation.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        self.permutation
            .iter()
            .all(|&v| v < n && !std::mem::replace(&mut seen[v], true))
    }
}

/// Count of nodes within `k` hops of `v`, excluding `v` itself.
pub fn neighborhood_size(g: &Graph, v: usize, k: usize) -> usize {
    let n = g.node_count();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    dist[v] = 0;
    queue.push_back(v);
    let mut count = 0;
    while let Some(u) = queue.pop_front() {
        if dist[u] == k {
            continue;
        }
        for &w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count
}

/// Sizes of the `k`-hop neighborhoods of `v` for `k = 1..n-1`; entry 0 is
/// the degree.
fn neighborhood_profile(g: &Graph, v: usize) -> Vec<usize> {
    let n = g.node_count();
    let dist = bfs_distances(g, v);
    let mut layers = vec![0usize; n.max(1)];
    for &d in &dist {
        if d > 0 && d < n {
            layers[d] += 1;
        }
    }
    let mut profile = Vec::with_capacity(n.saturating_sub(1));
    let mut total = 0;
    for &count in layers.iter().skip(1) {
        total += count;
        profile.push(total);
    }
    profile
}

/// Rank key of a vertex. Keys of vertices of the same graph compare
/// lexicographically; larger keys are ordered earlier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RankKey {
    /// `neighborhood_size(v, k)` for `k = 1, 2, ..., n-1`.
    pub profile: Vec<usize>,
    /// Stable color-refinement class, ranked consistently with `profile`.
    pub signature: u32,
}

/// Rank keys of every vertex of `g`.
pub fn rank_keys(g: &Graph) -> Vec<RankKey> {
    let profiles: Vec<Vec<usize>> = (0..g.node_count()).map(|v| neighborhood_profile(g, v)).collect();
    let colors = refine(g, &rank_values(&profiles));
    profiles
        .into_iter()
        .zip(colors)
        .map(|(profile, signature)| RankKey { profile, signature })
        .collect()
}

pub fn rank_key(g: &Graph, v: usize) -> RankKey {
    rank_keys(g).swap_remove(v)
}

/// Dense ranks of `values`: equal values share a rank, ranks ascend with the
/// values.
fn rank_values<T: Ord>(values: &[T]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].cmp(&values[b]));
    let mut ranks = vec![0u32; values.len()];
    let mut rank = 0u32;
    for w in 0..idx.len() {
        if w > 0 && values[idx[w]] != values[idx[w - 1]] {
            rank += 1;
        }
        ranks[idx[w]] = rank;
    }
    ranks
}

fn distinct(colors: &[u32]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

/// Color refinement to the coarsest stable partition finer than `initial`.
///
/// Each round recolors a vertex by its own color followed by the sorted
/// multiset of its neighbors' colors. New colors are dense ranks of those
/// signatures, so colors are canonical (isomorphism-invariant) and the order
/// between colors always refines the order of `initial`.
fn refine(g: &Graph, initial: &[u32]) -> Vec<u32> {
    let n = g.node_count();
    let mut colors = rank_values(initial);
    let mut classes = distinct(&colors);
    let mut offsets = Vec::with_capacity(n + 1);
    let mut flat: Vec<u32> = Vec::with_capacity(2 * g.edge_count());
    loop {
        if classes == n {
            return colors;
        }
        offsets.clear();
        flat.clear();
        for v in 0..n {
            offsets.push(flat.len());
            let start = flat.len();
            flat.extend(g.neighbors(v).iter().map(|&u| colors[u]));
            flat[start..].sort_unstable();
        }
        offsets.push(flat.len());
        let sig = |v: usize| (colors[v], &flat[offsets[v]..offsets[v + 1]]);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| sig(a).cmp(&sig(b)));
        let mut next = vec![0u32; n];
        let mut rank = 0u32;
        for w in 0..n {
            if w > 0 && sig(idx[w]) != sig(idx[w - 1]) {
                rank += 1;
            }
            next[idx[w]] = rank;
        }
        let next_classes = rank as usize + 1;
        colors = next;
        if next_classes == classes {
            return colors;
        }
        classes = next_classes;
    }
}

/// Refinement with the vertices of `prefix` individualized in order.
fn individualized_colors(g: &Graph, base: &[u32], prefix: &[usize]) -> Vec<u32> {
    let n = g.node_count();
    let mut tag = vec![(0usize, 0u32); n];
    for v in 0..n {
        tag[v] = (0, base[v]);
    }
    for (i, &v) in prefix.iter().enumerate() {
        tag[v] = (i + 1, 0);
    }
    refine(g, &rank_values(&tag))
}

/// Vertex ordering of `g`. Disconnected graphs are ordered component by
/// component, largest first (equal sizes by smallest node id), and are never
/// reported as fully disambiguated.
pub fn order_vertices(g: &Graph) -> Result<Ordering> {
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut components = connected_components(g);
    if components.len() == 1 {
        return Ok(order_connected(g));
    }
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let mut permutation = Vec::with_capacity(g.node_count());
    for nodes in &components {
        let sub = g.induced_unchecked(nodes);
        let local = order_connected(&sub);
        permutation.extend(local.permutation.iter().map(|&i| nodes[i]));
    }
    Ok(Ordering {
        permutation,
        fully_disambiguated: false,
    })
}

fn order_connected(g: &Graph) -> Ordering {
    let n = g.node_count();
    let keys = rank_keys(g);
    let base: Vec<u32> = keys.iter().map(|k| k.signature).collect();
    let mut disambiguated = true;

    let top = *base.iter().max().expect("nonempty graph");
    let seeds: Vec<usize> = (0..n).filter(|&v| base[v] == top).collect();
    let mut prefix: Vec<usize> = Vec::with_capacity(n);
    let seed = resolve_tie(g, &base, &prefix, &seeds, &mut disambiguated);
    prefix.push(seed);

    let dist = bfs_distances(g, seed);
    let mut position = vec![usize::MAX; n];
    position[seed] = 0;

    while prefix.len() < n {
        let layer = (0..n)
            .filter(|&v| position[v] == usize::MAX)
            .map(|v| dist[v])
            .min()
            .expect("unplaced vertex");
        let mut candidates: Vec<usize> = (0..n)
            .filter(|&v| position[v] == usize::MAX && dist[v] == layer)
            .collect();

        keep_best(&mut candidates, |&v| base[v]);
        keep_best(&mut candidates, |&v| {
            let earliest = g
                .neighbors(v)
                .iter()
                .map(|&u| position[u])
                .min()
                .unwrap_or(usize::MAX);
            std::cmp::Reverse(earliest)
        });
        if candidates.len() > 1 {
            let refined = individualized_colors(g, &base, &prefix);
            keep_best(&mut candidates, |&v| refined[v]);
        }
        let next = resolve_tie(g, &base, &prefix, &candidates, &mut disambiguated);
        position[next] = prefix.len();
        prefix.push(next);
    }

    Ordering {
        permutation: prefix,
        fully_disambiguated: disambiguated,
    }
}

/// Retains the candidates with the maximal key.
fn keep_best<K: Ord, F: Fn(&usize) -> K>(candidates: &mut Vec<usize>, key: F) {
    if candidates.len() < 2 {
        return;
    }
    let best = candidates.iter().map(&key).max().expect("nonempty");
    candidates.retain(|v| key(v) == best);
}

/// Picks the lowest id among `tied`, clearing `disambiguated` unless every
/// tied vertex is provably interchangeable with it.
fn resolve_tie(
    g: &Graph,
    base: &[u32],
    prefix: &[usize],
    tied: &[usize],
    disambiguated: &mut bool,
) -> usize {
    let chosen = *tied.iter().min().expect("nonempty tie set");
    if tied.len() > 1 && *disambiguated {
        let proven = tied
            .iter()
            .filter(|&&w| w != chosen)
            .all(|&w| interchangeable(g, base, prefix, chosen, w) == Some(true));
        if !proven {
            *disambiguated = false;
        }
    }
    chosen
}

fn are_twins(g: &Graph, u: usize, w: usize) -> bool {
    let strip = |v: usize, other: usize| g.neighbors(v).iter().copied().filter(move |&x| x != other);
    strip(u, w).eq(strip(w, u))
}

/// Whether some automorphism of `g` fixes every vertex of `prefix` and maps
/// `u` to `w`. `None` when the search budget runs out.
pub(crate) fn interchangeable(
    g: &Graph,
    base: &[u32],
    prefix: &[usize],
    u: usize,
    w: usize,
) -> Option<bool> {
    if u == w {
        return Some(true);
    }
    if base[u] != base[w] {
        return Some(false);
    }
    if !prefix.contains(&u) && !prefix.contains(&w) && are_twins(g, u, w) {
        return Some(true);
    }
    let n = g.node_count();
    let mut union = Vec::with_capacity(2 * n);
    for v in 0..n {
        union.push(g.neighbors(v).to_vec());
    }
    for v in 0..n {
        union.push(g.neighbors(v).iter().map(|&x| x + n).collect());
    }
    let mut tags = vec![(0usize, 0u32); 2 * n];
    for v in 0..n {
        tags[v] = (0, base[v]);
        tags[v + n] = (0, base[v]);
    }
    for (i, &v) in prefix.iter().enumerate() {
        tags[v] = (i + 1, 0);
        tags[v + n] = (i + 1, 0);
    }
    tags[u] = (prefix.len() + 1, 0);
    tags[w + n] = (prefix.len() + 1, 0);
    let mut search = IsoSearch {
        g,
        union: Graph::from_sorted_adjacency(union),
        budget: ORBIT_SEARCH_BUDGET,
    };
    search.explore(rank_values(&tags))
}

/// Backtracking isomorphism search between two individualized copies of one
/// graph, run on their disjoint union so that refined colors are directly
/// comparable across copies. Copy A holds nodes `0..n`, copy B `n..2n`.
struct IsoSearch<'g> {
    g: &'g Graph,
    union: Graph,
    budget: usize,
}

impl IsoSearch<'_> {
    fn explore(&mut self, colors: Vec<u32>) -> Option<bool> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        let n = self.g.node_count();
        let colors = refine(&self.union, &colors);
        let k = colors.iter().max().map_or(0, |&c| c as usize + 1);
        let mut count_a = vec![0usize; k];
        let mut count_b = vec![0usize; k];
        for v in 0..n {
            count_a[colors[v] as usize] += 1;
            count_b[colors[v + n] as usize] += 1;
        }
        if count_a != count_b {
            return Some(false);
        }
        let target = (0..k)
            .filter(|&c| count_a[c] > 1)
            .min_by_key(|&c| (count_a[c], c));
        let Some(cell) = target else {
            let mut image = vec![0usize; k];
            for v in 0..n {
                image[colors[v + n] as usize] = v;
            }
            let map: Vec<usize> = (0..n).map(|v| image[colors[v] as usize]).collect();
            return Some(self.g.edges().all(|(a, b)| self.g.has_edge(map[a], map[b])));
        };
        let x = (0..n).find(|&v| colors[v] as usize == cell).expect("cell member");
        let fresh = k as u32;
        for y in (n..2 * n).filter(|&v| colors[v] as usize == cell) {
            let mut next = colors.clone();
            next[x] = fresh;
            next[y] = fresh;
            match self.explore(next) {
                Some(false) => continue,
                other => return other,
            }
        }
        Some(false)
    }
}

/// A uniformly random vertex ordering, the unstructured baseline.
pub fn random_ordering<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Ordering {
    let mut permutation: Vec<usize> = (0..n).collect();
    shuffle(&mut permutation, rng);
    Ordering {
        permutation,
        fully_disambiguated: false,
    }
}

/// Square binary pixel matrix; pixel `(i, j)` is 1 iff the vertices at
/// positions `i` and `j` are adjacent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StructuredImage {
    n: usize,
    pixels: Vec<u8>,
}

impl StructuredImage {
    /// Validates symmetry, zero diagonal and binary values.
    pub fn from_pixels(n: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: pixels.len(),
            });
        }
        for i in 0..n {
            if pixels[i * n + i] != 0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal pixel {i}")));
            }
            for j in 0..n {
                let p = pixels[i * n + j];
                if p > 1 || p != pixels[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "pixel ({i}, {j}) is not a symmetric binary value"
                    )));
                }
            }
        }
        Ok(StructuredImage { n, pixels })
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.pixels[i * self.n + j] == 1
    }

    pub fn ones(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    /// Pixels as reals, row-major.
    pub fn to_vector(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Zero-pads to `side x side`, keeping the image in the top-left corner.
    pub fn padded(&self, side: usize) -> Result<StructuredImage> {
        if side < self.n {
            return Err(Error::param(format!(
                "cannot pad a {}x{} image down to {side}x{side}",
                self.n, self.n
            )));
        }
        let mut pixels = vec![0u8; side * side];
        for i in 0..self.n {
            pixels[i * side..i * side + self.n]
                .copy_from_slice(&self.pixels[i * self.n..(i + 1) * self.n]);
        }
        Ok(StructuredImage { n: side, pixels })
    }

    /// The graph drawn by the image, in position labels.
    pub fn to_graph(&self) -> Graph {
        let n = self.n;
        let adjacency = (0..n)
            .map(|i| (0..n).filter(|&j| self.pixels[i * n + j] == 1).collect())
            .collect();
        Graph::from_sorted_adjacency(adjacency)
    }
}

pub fn embed_image(g: &Graph, ordering: &Ordering) -> Result<StructuredImage> {
    if !ordering.is_valid_for(g) {
        return Err(Error::InvalidNodes(
            "ordering is not a permutation of the graph's nodes".into(),
        ));
    }
    let n = g.node_count();
    let pos = ordering.positions();
    let mut pixels = vec![0u8; n * n];
    for (u, v) in g.edges() {
        let (i, j) = (pos[u], pos[v]);
        pixels[i * n + j] = 1;
        pixels[j * n + i] = 1;
    }
    Ok(StructuredImage { n, pixels })
}

/// Structured image of `g` under its permutation-invariant ordering.
pub fn structured_image(g: &Graph) -> Result<(StructuredImage, Ordering)> {
    let ordering = order_vertices(g)?;
    let image = embed_image(g, &ordering)?;
    Ok((image, ordering))
}

/// Recovers the original graph from an image and the ordering that produced it.
pub fn reconstruct(image: &StructuredImage, ordering: &Ordering) -> Result<Graph> {
    if ordering.permutation.len() != image.side() {
        return Err(Error::DimensionMismatch {
            expected: image.side(),
            actual: ordering.permutation.len(),
        });
    }
    image.to_graph().relabel(&ordering.permutation)
}

/// Binary PGM (P5) bytes of an 8-bit gray raster:
/// `P5\n<width> <height>\n255\n` followed by `width * height` row-major bytes.
pub fn encode_pgm(width: usize, height: usize, gray: &[u8]) -> Vec<u8> {
    debug_assert_eq!(gray.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    out
}

/// PGM bytes of a structured image: edge pixels are black (0), all others
/// white (255), each pixel upscaled to a `scale x scale` block.
pub fn write_image(image: &StructuredImage, scale: usize) -> Result<Vec<u8>> {
    if scale < 1 {
        return Err(Error::param("scale must be >= 1"));
    }
    let n = image.side();
    let side = n * scale;
    let mut gray = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            gray.push(if image.get(row / scale, col / scale) { 0 } else { 255 });
        }
    }
    Ok(encode_pgm(side, side, &gray))
}

pub fn write_image_to<W: Write>(image: &StructuredImage, scale: usize, mut out: W) -> Result<()> {
    out.write_all(&write_image(image, scale)?)?;
    Ok(())
}

/// Parses a binary PGM with maxval 255 into `(width, height, gray)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |m: &str| Error::Parse {
        line: 0,
        message: format!("PGM: {m}"),
    };
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a P5 file"));
    }
    let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
    if fields[3] != "255" {
        return Err(bad("maxval must be 255"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let data = bytes.get(pos..).ok_or_else(|| bad("missing raster"))?;
    if data.len() != width * height {
        return Err(bad("raster size does not match header"));
    }
    Ok((width, height, data.to_vec()))
}

/// Inverse of [`write_image`] for the given `scale`.
pub fn read_image(bytes: &[u8], scale: usize) -> Result<StructuredImage> {
    if scale < 1 {
        return Err(Error::param("scale must be >= 1"));
    }
    let (width, height, gray) = decode_pgm(bytes)?;
    if width != height || width % scale != 0 {
        return Err(Error::param(format!(
            "{width}x{height} raster is not a square multiple of scale {scale}"
        )));
    }
    let n = width / scale;
    let pixels = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            u8::from(gray[i * scale * width + j * scale] == 0)
        })
        .collect();
    StructuredImage::from_pixels(n, pixels)
}
