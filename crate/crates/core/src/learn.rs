//! Supervised learners trained from scratch: multinomial logistic
//! regression, a one-hidden-layer MLP and a small CNN, plus per-class PCA.
//!
//! Model files are little-endian binary:
//!
//! ```text
//! magic      4 bytes  "NSGM"
//! version    u32      1
//! kind       u8       0 linear, 1 mlp, 2 cnn
//! repr       u8       representation tag (see Representation::tag)
//! dims       4 x u64  linear: D C 0 0; mlp: D H C 0; cnn: side F C 0
//! meta_len   u32      length of the JSON metadata that follows
//! meta       bytes    JSON {"config": ..., "n": ..., "classes": ..., "provenance": {...}}
//! std_len    u64      standardizer length (0 when inputs are raw)
//! std        f64 x 2*std_len   means then scales
//! param_len  u64
//! params     f64 x param_len
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordering::StructuredImage;
use crate::rng::{rng_from_seed, shuffle, splitmix64, Rng};

pub const MODEL_MAGIC: &[u8; 4] = b"NSGM";
pub const MODEL_VERSION: u32 = 1;

/// What the input vectors of a dataset encode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Structured (canonically ordered) adjacency image.
    Image,
    /// Adjacency image under a random vertex order.
    RandomImage,
    Classical,
    Wl,
}

impl Representation {
    pub fn tag(self) -> u8 {
        match self {
            Representation::Image => 0,
            Representation::RandomImage => 1,
            Representation::Classical => 2,
            Representation::Wl => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => Representation::Image,
            1 => Representation::RandomImage,
            2 => Representation::Classical,
            3 => Representation::Wl,
            _ => return Err(Error::schema("model", format!("unknown representation tag {tag}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Representation::Image => "image",
            Representation::RandomImage => "random_image",
            Representation::Classical => "classical",
            Representation::Wl => "wl",
        }
    }

    pub fn is_image(self) -> bool {
        matches!(self, Representation::Image | Representation::RandomImage)
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Representation::Image),
            "random_image" | "random-image" => Ok(Representation::RandomImage),
            "classical" => Ok(Representation::Classical),
            "wl" => Ok(Representation::Wl),
            other => Err(Error::param(format!(
                "unknown representation {other:?} (image, random_image, classical, wl)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Linear,
    Mlp,
    Cnn,
}

impl Learner {
    pub fn name(self) -> &'static str {
        match self {
            Learner::Linear => "linear",
            Learner::Mlp => "mlp",
            Learner::Cnn => "cnn",
        }
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Learner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Learner::Linear),
            "mlp" => Ok(Learner::Mlp),
            "cnn" => Ok(Learner::Cnn),
            other => Err(Error::param(format!("unknown learner {other:?} (linear, mlp, cnn)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<usize>,
    pub classes: usize,
    pub representation: Representation,
    /// Image side (or subgraph size for feature representations).
    pub n: usize,
}

impl Dataset {
    pub fn new(
        inputs: Vec<Vec<f64>>,
        targets: Vec<usize>,
        classes: usize,
        representation: Representation,
        n: usize,
    ) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                actual: targets.len(),
            });
        }
        if inputs.is_empty() {
            return Err(Error::param("dataset is empty"));
        }
        let dim = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::param(format!("target {t} out of range for {classes} classes")));
        }
        Ok(Dataset {
            inputs,
            targets,
            classes,
            representation,
            n,
        })
    }

    pub fn from_images(
        images: &[StructuredImage],
        targets: Vec<usize>,
        classes: usize,
        representation: Representation,
    ) -> Result<Self> {
        let n = images.first().map_or(0, StructuredImage::side);
        Self::new(
            images.iter().map(StructuredImage::to_vector).collect(),
            targets,
            classes,
            representation,
            n,
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(
            indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            indices.iter().map(|&i| self.targets[i]).collect(),
            self.classes,
            self.representation,
            self.n,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub filters: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            l2: 1e-4,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            hidden: 128,
            filters: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::param("l2 must be nonnegative"));
        }
        if self.batch_size == 0 || self.hidden == 0 || self.filters == 0 {
            return Err(Error::param("batch_size, hidden and filters must be positive"));
        }
        Ok(())
    }
}

/// Loss and gradient with respect to the logits, computed stably.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let probs = softmax(logits);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[target];
    let mut grad = probs;
    grad[target] -= 1.0;
    (loss, grad)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-dimension standardization; constant dimensions pass through.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(inputs: &[Vec<f64>]) -> Self {
        let d = inputs[0].len();
        let m = inputs.len() as f64;
        let mut means = vec![0.0; d];
        for x in inputs {
            means.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        means.iter_mut().for_each(|s| *s /= m);
        let mut vars = vec![0.0; d];
        for x in inputs {
            for ((s, v), mu) in vars.iter_mut().zip(x).zip(&means) {
                *s += (v - mu) * (v - mu);
            }
        }
        let mut scales = vec![1.0; d];
        for j in 0..d {
            let sd = (vars[j] / m).sqrt();
            if sd > 1e-12 {
                scales[j] = sd;
            } else {
                means[j] = 0.0;
            }
        }
        Standardizer { means, scales }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((v, mu), s)| (v - mu) / s)
            .collect()
    }
}

/// Network shape. Parameters live in one flat vector whose layout is fixed
/// per architecture (weights row-major, biases after their weights).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Layout: class-major rows of `inputs + 1` values, the bias last.
    Linear { inputs: usize, classes: usize },
    /// Layout: W1 (hidden x inputs), b1, W2 (classes x hidden), b2.
    Mlp {
        inputs: usize,
        hidden: usize,
        classes: usize,
    },
    /// 3x3 convolution with zero padding 1, ReLU, 2x2 max pool, dense
    /// softmax head. Layout: kernels (filters x 9), conv biases, dense
    /// weights (classes x filters*(side/2)^2, filter-major), dense biases.
    Cnn {
        side: usize,
        filters: usize,
        classes: usize,
    },
}

impl Architecture {
    pub fn learner(&self) -> Learner {
        match self {
            Architecture::Linear { .. } => Learner::Linear,
            Architecture::Mlp { .. } => Learner::Mlp,
            Architecture::Cnn { .. } => Learner::Cnn,
        }
    }

    pub fn for_learner(learner: Learner, data: &Dataset, config: &TrainConfig) -> Result<Self> {
        let inputs = data.dim();
        let classes = data.classes;
        match learner {
            Learner::Linear => Ok(Architecture::Linear { inputs, classes }),
            Learner::Mlp => Ok(Architecture::Mlp {
                inputs,
                hidden: config.hidden,
                classes,
            }),
            Learner::Cnn => {
                let side = (inputs as f64).sqrt().round() as usize;
                if side * side != inputs {
                    return Err(Error::param(format!(
                        "cnn needs square image inputs, got dimension {inputs}"
                    )));
                }
                let arch = Architecture::Cnn {
                    side,
                    filters: config.filters,
                    classes,
                };
                arch.check()?;
                Ok(arch)
            }
        }
    }

    fn check(&self) -> Result<()> {
        if let Architecture::Cnn { side, .. } = *self {
            if side < 2 || side % 2 != 0 {
                return Err(Error::param(format!(
                    "cnn image side must be even and at least 2, got {side}"
                )));
            }
        }
        if self.classes() < 2 {
            return Err(Error::param("at least two classes are required"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            Architecture::Linear { inputs, .. } | Architecture::Mlp { inputs, .. } => inputs,
            Architecture::Cnn { side, .. } => side * side,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Architecture::Linear { classes, .. }
            | Architecture::Mlp { classes, .. }
            | Architecture::Cnn { classes, .. } => classes,
        }
    }

    fn pooled(&self) -> usize {
        match *self {
            Architecture::Cnn { side, filters, .. } => filters * (side / 2) * (side / 2),
            _ => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            Architecture::Linear { inputs, classes } => classes * (inputs + 1),
            Architecture::Mlp {
                inputs,
                hidden,
                classes,
            } => hidden * inputs + hidden + classes * hidden + classes,
            Architecture::Cnn {
                filters, classes, ..
            } => filters * 9 + filters + classes * self.pooled() + classes,
        }
    }

    /// Mask of parameters subject to L2 (weights, not biases).
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.param_count()];
        match *self {
            Architecture::Linear { inputs, classes } => {
                for c in 0..classes {
                    mask[c * (inputs + 1) + inputs] = false;
                }
            }
            Architecture::Mlp {
                inputs,
                hidden,
                classes,
            } => {
                let b1 = hidden * inputs;
                mask[b1..b1 + hidden].iter_mut().for_each(|m| *m = false);
                let b2 = b1 + hidden + classes * hidden;
                mask[b2..].iter_mut().for_each(|m| *m = false);
            }
            Architecture::Cnn { filters, .. } => {
                mask[filters * 9..filters * 10].iter_mut().for_each(|m| *m = false);
                let b2 = filters * 10 + self.classes() * self.pooled();
                mask[b2..].iter_mut().for_each(|m| *m = false);
            }
        }
        mask
    }

    /// Initial parameters: zeros for the linear model, Glorot-uniform
    /// weights and zero biases otherwise.
    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        use rand::Rng as _;
        let mut params = vec![0.0; self.param_count()];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-limit..limit);
            }
        };
        match *self {
            Architecture::Linear { .. } => {}
            Architecture::Mlp {
                inputs,
                hidden,
                classes,
            } => {
                fill(0..hidden * inputs, inputs, hidden);
                let w2 = hidden * inputs + hidden;
                fill(w2..w2 + classes * hidden, hidden, classes);
            }
            Architecture::Cnn {
                filters, classes, ..
            } => {
                fill(0..filters * 9, 9, filters * 9);
                let w2 = filters * 10;
                fill(w2..w2 + classes * self.pooled(), self.pooled(), classes);
            }
        }
        params
    }

    pub fn logits(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        self.forward(params, x).logits
    }

    fn forward(&self, params: &[f64], x: &[f64]) -> Forward {
        match *self {
            Architecture::Linear { inputs, classes } => Forward {
                logits: (0..classes)
                    .map(|c| {
                        let row = &params[c * (inputs + 1)..(c + 1) * (inputs + 1)];
                        row[inputs] + dot(&row[..inputs], x)
                    })
                    .collect(),
                hidden: Vec::new(),
                argmax: Vec::new(),
            },
            Architecture::Mlp {
                inputs,
                hidden,
                classes,
            } => {
                let (w1, rest) = params.split_at(hidden * inputs);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(classes * hidden);
                let h: Vec<f64> = (0..hidden)
                    .map(|j| (b1[j] + dot(&w1[j * inputs..(j + 1) * inputs], x)).max(0.0))
                    .collect();
                let logits = (0..classes)
                    .map(|c| b2[c] + dot(&w2[c * hidden..(c + 1) * hidden], &h))
                    .collect();
                Forward {
                    logits,
                    hidden: h,
                    argmax: Vec::new(),
                }
            }
            Architecture::Cnn {
                side,
                filters,
                classes,
            } => {
                let half = side / 2;
                let pooled = self.pooled();
                let (kernels, rest) = params.split_at(filters * 9);
                let (kbias, rest) = rest.split_at(filters);
                let (w, b) = rest.split_at(classes * pooled);
                let mut pool = vec![0.0; pooled];
                let mut argmax = vec![0usize; pooled];
                let mut conv = vec![0.0; side * side];
                for f in 0..filters {
                    let k = &kernels[f * 9..f * 9 + 9];
                    for i in 0..side {
                        for j in 0..side {
                            let mut z = kbias[f];
                            for di in 0..3 {
                                let r = i + di;
                                if r == 0 || r > side {
                                    continue;
                                }
                                for dj in 0..3 {
                                    let c = j + dj;
                                    if c == 0 || c > side {
                                        continue;
                                    }
                                    z += k[di * 3 + dj] * x[(r - 1) * side + c - 1];
                                }
                            }
                            conv[i * side + j] = z;
                        }
                    }
                    for pi in 0..half {
                        for pj in 0..half {
                            let mut best = (2 * pi) * side + 2 * pj;
                            for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                                let idx = (2 * pi + di) * side + 2 * pj + dj;
                                if conv[idx] > conv[best] {
                                    best = idx;
                                }
                            }
                            let out = f * half * half + pi * half + pj;
                            pool[out] = conv[best].max(0.0);
                            argmax[out] = best;
                        }
                    }
                }
                let logits = (0..classes)
                    .map(|c| b[c] + dot(&w[c * pooled..(c + 1) * pooled], &pool))
                    .collect();
                Forward {
                    logits,
                    hidden: pool,
                    argmax,
                }
            }
        }
    }

    /// Adds the cross-entropy gradient of one example to `grad`; returns the
    /// loss.
    fn accumulate(&self, params: &[f64], x: &[f64], target: usize, grad: &mut [f64]) -> f64 {
        let fwd = self.forward(params, x);
        let (loss, dlogits) = softmax_cross_entropy(&fwd.logits, target);
        match *self {
            Architecture::Linear { inputs, classes } => {
                for c in 0..classes {
                    let row = &mut grad[c * (inputs + 1)..(c + 1) * (inputs + 1)];
                    axpy(dlogits[c], x, &mut row[..inputs]);
                    row[inputs] += dlogits[c];
                }
            }
            Architecture::Mlp {
                inputs,
                hidden,
                classes,
            } => {
                let w2_start = hidden * inputs + hidden;
                let b2_start = w2_start + classes * hidden;
                let mut dh = vec![0.0; hidden];
                for c in 0..classes {
                    let w2 = &params[w2_start + c * hidden..w2_start + (c + 1) * hidden];
                    axpy(dlogits[c], w2, &mut dh);
                    axpy(
                        dlogits[c],
                        &fwd.hidden,
                        &mut grad[w2_start + c * hidden..w2_start + (c + 1) * hidden],
                    );
                    grad[b2_start + c] += dlogits[c];
                }
                for j in 0..hidden {
                    if fwd.hidden[j] <= 0.0 {
                        continue;
                    }
                    axpy(dh[j], x, &mut grad[j * inputs..(j + 1) * inputs]);
                    grad[hidden * inputs + j] += dh[j];
                }
            }
            Architecture::Cnn {
                side,
                filters,
                classes,
            } => {
                let half = side / 2;
                let pooled = self.pooled();
                let w_start = filters * 10;
                let b_start = w_start + classes * pooled;
                let mut dpool = vec![0.0; pooled];
                for c in 0..classes {
                    let range = w_start + c * pooled..w_start + (c + 1) * pooled;
                    axpy(dlogits[c], &params[range.clone()], &mut dpool);
                    axpy(dlogits[c], &fwd.hidden, &mut grad[range]);
                    grad[b_start + c] += dlogits[c];
                }
                for (out, &dp) in dpool.iter().enumerate() {
                    // ReLU after pooling: no gradient through non-positive maxima
                    if fwd.hidden[out] <= 0.0 || dp == 0.0 {
                        continue;
                    }
                    let f = out / (half * half);
                    let pos = fwd.argmax[out];
                    let (i, j) = (pos / side, pos % side);
                    grad[filters * 9 + f] += dp;
                    for di in 0..3 {
                        let r = i + di;
                        if r == 0 || r > side {
                            continue;
                        }
                        for dj in 0..3 {
                            let c = j + dj;
                            if c == 0 || c > side {
                                continue;
                            }
                            grad[f * 9 + di * 3 + dj] += dp * x[(r - 1) * side + c - 1];
                        }
                    }
                }
            }
        }
        loss
    }

    /// Training objective on a batch: mean cross-entropy plus
    /// `l2 / 2 * |weights|^2`, with its gradient.
    pub fn objective(
        &self,
        params: &[f64],
        inputs: &[&[f64]],
        targets: &[usize],
        l2: f64,
    ) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for (x, &t) in inputs.iter().zip(targets) {
            loss += self.accumulate(params, x, t, &mut grad);
        }
        let m = inputs.len().max(1) as f64;
        loss /= m;
        grad.iter_mut().for_each(|g| *g /= m);
        if l2 > 0.0 {
            for ((g, p), w) in grad.iter_mut().zip(params).zip(self.weight_mask()) {
                if w {
                    loss += 0.5 * l2 * p * p;
                    *g += l2 * p;
                }
            }
        }
        (loss, grad)
    }
}

struct Forward {
    logits: Vec<f64>,
    /// Hidden activations (MLP) or pooled activations (CNN).
    hidden: Vec<f64>,
    /// Conv-map index chosen by each pooling window (CNN).
    argmax: Vec<usize>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// A trained model: architecture, parameters and the input transform.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub architecture: Architecture,
    pub representation: Representation,
    pub n: usize,
    pub config: TrainConfig,
    pub standardizer: Option<Standardizer>,
    pub params: Vec<f64>,
    /// Free-form key/value pairs carried through the file, e.g. a config hash.
    pub provenance: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    config: TrainConfig,
    n: usize,
    classes: usize,
    #[serde(default)]
    provenance: BTreeMap<String, String>,
}

impl Model {
    /// Zero-parameter model (uniform predictions).
    pub fn zeroed(architecture: Architecture, representation: Representation, n: usize) -> Self {
        Model {
            architecture,
            representation,
            n,
            config: TrainConfig::default(),
            standardizer: None,
            params: vec![0.0; architecture.param_count()],
            provenance: BTreeMap::new(),
        }
    }

    pub fn classes(&self) -> usize {
        self.architecture.classes()
    }

    fn prepare(&self, x: &[f64]) -> Result<Vec<f64>> {
        let expected = self.architecture.input_dim();
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: x.len(),
            });
        }
        Ok(match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = self.prepare(x)?;
        Ok(softmax(&self.architecture.logits(&self.params, &x)))
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        let x = self.prepare(x)?;
        Ok(argmax(&self.architecture.logits(&self.params, &x)))
    }

    /// Mean cross-entropy (without the L2 term) over a dataset.
    pub fn mean_loss(&self, data: &Dataset) -> Result<f64> {
        let mut total = 0.0;
        for (x, &t) in data.inputs.iter().zip(&data.targets) {
            let x = self.prepare(x)?;
            total += softmax_cross_entropy(&self.architecture.logits(&self.params, &x), t).0;
        }
        Ok(total / data.len() as f64)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        let (kind, dims) = match self.architecture {
            Architecture::Linear { inputs, classes } => (0u8, [inputs, classes, 0, 0]),
            Architecture::Mlp {
                inputs,
                hidden,
                classes,
            } => (1, [inputs, hidden, classes, 0]),
            Architecture::Cnn {
                side,
                filters,
                classes,
            } => (2, [side, filters, classes, 0]),
        };
        out.push(kind);
        out.push(self.representation.tag());
        for d in dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        let meta = serde_json::to_vec(&ModelMeta {
            config: self.config.clone(),
            n: self.n,
            classes: self.classes(),
            provenance: self.provenance.clone(),
        })?;
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        match &self.standardizer {
            Some(s) => {
                out.extend_from_slice(&(s.means.len() as u64).to_le_bytes());
                for v in s.means.iter().chain(&s.scales) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            None => out.extend_from_slice(&0u64.to_le_bytes()),
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for v in &self.params {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::schema("model", "bad magic header"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != MODEL_VERSION {
            return Err(Error::schema("model", format!("unsupported version {version}")));
        }
        let kind = r.take(1)?[0];
        let representation = Representation::from_tag(r.take(1)?[0])?;
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = r.u64()? as usize;
        }
        let architecture = match kind {
            0 => Architecture::Linear {
                inputs: dims[0],
                classes: dims[1],
            },
            1 => Architecture::Mlp {
                inputs: dims[0],
                hidden: dims[1],
                classes: dims[2],
            },
            2 => Architecture::Cnn {
                side: dims[0],
                filters: dims[1],
                classes: dims[2],
            },
            _ => return Err(Error::schema("model", format!("unknown model kind {kind}"))),
        };
        architecture.check()?;
        let meta_len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
        let meta: ModelMeta = serde_json::from_slice(r.take(meta_len)?)?;
        if meta.classes != architecture.classes() {
            return Err(Error::schema("model", "metadata disagrees with dimensions"));
        }
        let std_len = r.u64()? as usize;
        let standardizer = if std_len == 0 {
            None
        } else {
            if std_len != architecture.input_dim() {
                return Err(Error::schema("model", "standardizer length mismatch"));
            }
            let means = r.f64s(std_len)?;
            let scales = r.f64s(std_len)?;
            Some(Standardizer { means, scales })
        };
        let param_len = r.u64()? as usize;
        if param_len != architecture.param_count() {
            return Err(Error::schema(
                "model",
                format!(
                    "expected {} parameters, found {param_len}",
                    architecture.param_count()
                ),
            ));
        }
        let params = r.f64s(param_len)?;
        if r.pos != bytes.len() {
            return Err(Error::schema("model", "trailing bytes"));
        }
        Ok(Model {
            architecture,
            representation,
            n: meta.n,
            config: meta.config,
            standardizer,
            params,
            provenance: meta.provenance,
        })
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::schema("model", "truncated file"))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.take(count.checked_mul(8).ok_or_else(|| Error::schema("model", "overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Mini-batch SGD on cross-entropy plus L2. When `validation` is given, the
/// parameters with the lowest validation loss across epochs are kept.
///
/// Training examples are put in a canonical order before the seeded
/// per-epoch shuffles, so the result does not depend on input order.
pub fn train(
    learner: Learner,
    data: &Dataset,
    validation: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<Model> {
    config.validate()?;
    let architecture = Architecture::for_learner(learner, data, config)?;
    architecture.check()?;
    if let Some(v) = validation {
        if v.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                actual: v.dim(),
            });
        }
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        data.targets[a]
            .cmp(&data.targets[b])
            .then_with(|| compare_vectors(&data.inputs[a], &data.inputs[b]))
    });
    // images feed the CNN raw; everything else is standardized
    let standardizer = match learner {
        Learner::Cnn => None,
        _ => {
            let canonical: Vec<Vec<f64>> = order.iter().map(|&i| data.inputs[i].clone()).collect();
            Some(Standardizer::fit(&canonical))
        }
    };
    let inputs: Vec<Vec<f64>> = match &standardizer {
        Some(s) => data.inputs.iter().map(|x| s.apply(x)).collect(),
        None => data.inputs.clone(),
    };

    let mut rng = rng_from_seed(config.seed);
    let mut model = Model {
        architecture,
        representation: data.representation,
        n: data.n,
        config: config.clone(),
        standardizer,
        params: architecture.init(&mut rng),
        provenance: BTreeMap::new(),
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for epoch in 0..config.epochs {
        shuffle(&mut order, &mut rng);
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| inputs[i].as_slice()).collect();
            let ts: Vec<usize> = batch.iter().map(|&i| data.targets[i]).collect();
            let (_, grad) = architecture.objective(&model.params, &xs, &ts, config.l2);
            axpy(-config.learning_rate, &grad, &mut model.params);
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!("parameters diverged in epoch {epoch}")));
        }
        if let Some(v) = validation {
            let loss = model.mean_loss(v)?;
            log::trace!("epoch {epoch}: validation loss {loss:.6}");
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                best = Some((loss, model.params.clone()));
            }
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(model)
}

pub fn train_linear(data: &Dataset, validation: Option<&Dataset>, config: &TrainConfig) -> Result<Model> {
    train(Learner::Linear, data, validation, config)
}

pub fn train_mlp(data: &Dataset, validation: Option<&Dataset>, config: &TrainConfig) -> Result<Model> {
    train(Learner::Mlp, data, validation, config)
}

pub fn train_cnn(data: &Dataset, validation: Option<&Dataset>, config: &TrainConfig) -> Result<Model> {
    train(Learner::Cnn, data, validation, config)
}

fn compare_vectors(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

pub const PCA_TOLERANCE: f64 = 1e-9;
pub const PCA_MAX_ITERATIONS: usize = 50_000;

/// Top principal component of a set of images, reshaped to `side x side`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalComponent {
    pub side: usize,
    /// Unit-norm, row-major.
    pub values: Vec<f64>,
    /// Variance along the component.
    pub variance: f64,
}

impl PrincipalComponent {
    /// Grayscale rendering: 0 maps to mid gray, the largest magnitude to
    /// black (positive) or white (negative).
    pub fn to_gray(&self) -> Vec<u8> {
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.values
            .iter()
            .map(|v| {
                let t = if max > 0.0 { v / max } else { 0.0 };
                (127.5 - 127.5 * t).round().clamp(0.0, 255.0) as u8
            })
            .collect()
    }
}

/// Mean-centers the vectorized images and finds the top covariance
/// eigenvector by power iteration on the smaller of the Gram and covariance
/// matrices. The sign makes the largest-magnitude entry positive.
pub fn pca_top_component(images: &[StructuredImage]) -> Result<PrincipalComponent> {
    if images.len() < 2 {
        return Err(Error::param("pca needs at least two images"));
    }
    let side = images[0].side();
    if let Some(bad) = images.iter().find(|im| im.side() != side) {
        return Err(Error::DimensionMismatch {
            expected: side,
            actual: bad.side(),
        });
    }
    let rows: Vec<Vec<f64>> = images.iter().map(StructuredImage::to_vector).collect();
    pca_top_vector(&rows).map(|(values, variance)| PrincipalComponent {
        side,
        values,
        variance,
    })
}

/// Top covariance eigenvector (unit norm, sign-fixed) and its eigenvalue.
pub fn pca_top_vector(rows: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let m = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        axpy(1.0, r, &mut mean);
    }
    mean.iter_mut().for_each(|x| *x /= m as f64);
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect();
    let denom = (m - 1) as f64;

    // power iteration in the smaller space
    let use_gram = m < d;
    let k = if use_gram { m } else { d };
    let mut matrix = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = if use_gram {
                dot(&centered[i], &centered[j])
            } else {
                centered.iter().map(|r| r[i] * r[j]).sum()
            } / denom;
            matrix[i * k + j] = v;
            matrix[j * k + i] = v;
        }
    }
    let trace: f64 = (0..k).map(|i| matrix[i * k + i]).sum();
    if trace <= 1e-300 {
        return Err(Error::Numerical("zero covariance: all images are identical".into()));
    }
    let mut v: Vec<f64> = (0..k)
        .map(|i| 0.5 + (splitmix64(i as u64 + 7) >> 11) as f64 / (1u64 << 53) as f64)
        .collect();
    normalize(&mut v);
    let mut converged = false;
    let mut w = vec![0.0; k];
    for _ in 0..PCA_MAX_ITERATIONS {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = dot(&matrix[i * k..(i + 1) * k], &v);
        }
        if normalize(&mut w) == 0.0 {
            return Err(Error::Numerical("power iteration collapsed".into()));
        }
        let change = w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut w);
        if change < PCA_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "pca power iteration did not converge in {PCA_MAX_ITERATIONS} iterations"
        )));
    }
    let eigenvalue: f64 = (0..k)
        .map(|i| v[i] * dot(&matrix[i * k..(i + 1) * k], &v))
        .sum();
    let mut component = if use_gram {
        let mut c = vec![0.0; d];
        for (r, &vi) in centered.iter().zip(&v) {
            axpy(vi, r, &mut c);
        }
        normalize(&mut c);
        c
    } else {
        v
    };
    let lead = argmax(&component.iter().map(|x| x.abs()).collect::<Vec<_>>());
    if component[lead] < 0.0 {
        component.iter_mut().for_each(|x| *x = -*x);
    }
    Ok((component, eigenvalue))
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    #[test]
    fn softmax_examples() {
        let (loss, grad) = softmax_cross_entropy(&[0.5, 0.5, 0.5], 1);
        assert!((loss - 3f64.ln()).abs() < 1e-12);
        assert!((grad[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((grad[1] + 2.0 / 3.0).abs() < 1e-12);
        let (loss, grad) = softmax_cross_entropy(&[1000.0, -1000.0], 0);
        assert!(loss.abs() < 1e-12 && loss.is_finite());
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let logits: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let target = rng.random_range(0..5);
            let (_, grad) = softmax_cross_entropy(&logits, target);
            for i in 0..5 {
                let h = 1e-5;
                let mut up = logits.clone();
                up[i] += h;
                let mut down = logits.clone();
                down[i] -= h;
                let numeric = (softmax_cross_entropy(&up, target).0
                    - softmax_cross_entropy(&down, target).0)
                    / (2.0 * h);
                let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-6);
                assert!(rel < 1e-5, "{rel}");
            }
        }
    }

    #[test]
    fn zero_model_is_uniform_and_ties_to_class_zero() {
        let arch = Architecture::Linear {
            inputs: 3,
            classes: 4,
        };
        let model = Model::zeroed(arch, Representation::Classical, 3);
        let p = model.predict(&[1.0, -2.0, 0.5]).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        assert_eq!(model.classify(&[1.0, -2.0, 0.5]).unwrap(), 0);
        assert!(model.predict(&[1.0]).is_err());
    }

    #[test]
    fn boosting_one_logit_wins() {
        let arch = Architecture::Linear {
            inputs: 2,
            classes: 3,
        };
        let mut model = Model::zeroed(arch, Representation::Classical, 2);
        model.params[2 * 3 + 2] = 10.0;
        assert_eq!(model.classify(&[0.3, 0.1]).unwrap(), 2);
    }

    #[test]
    fn separable_points() {
        let data = Dataset::new(
            vec![vec![-1.0], vec![1.0]],
            vec![0, 1],
            2,
            Representation::Classical,
            1,
        )
        .unwrap();
        let model = train_linear(&data, None, &TrainConfig::default()).unwrap();
        assert_eq!(model.classify(&[-1.0]).unwrap(), 0);
        assert_eq!(model.classify(&[1.0]).unwrap(), 1);
    }

    #[test]
    fn cnn_separates_blank_from_full_images() {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for i in 0..8 {
            inputs.push(vec![(i % 2) as f64; 16]);
            targets.push(i % 2);
        }
        let data = Dataset::new(inputs, targets, 2, Representation::Image, 4).unwrap();
        let config = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let model = train_cnn(&data, None, &config).unwrap();
        assert_eq!(model.classify(&[0.0; 16]).unwrap(), 0);
        assert_eq!(model.classify(&[1.0; 16]).unwrap(), 1);
    }

    #[test]
    fn model_bytes_round_trip() {
        let data = Dataset::new(
            vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0], vec![3.0, 3.0, 2.0]],
            vec![0, 1, 2],
            3,
            Representation::Classical,
            3,
        )
        .unwrap();
        let config = TrainConfig {
            hidden: 4,
            epochs: 3,
            ..TrainConfig::default()
        };
        let model = train_mlp(&data, Some(&data), &config).unwrap();
        let bytes = model.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"NSGM");
        let back = Model::from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert!(Model::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Model::from_bytes(&bad).is_err());
    }

    #[test]
    fn pca_single_pixel_difference() {
        let a = StructuredImage::from_pixels(2, vec![0, 0, 0, 0]).unwrap();
        let b = StructuredImage::from_pixels(2, vec![0, 1, 1, 0]).unwrap();
        let pc = pca_top_component(&[a.clone(), b.clone()]).unwrap();
        let s = 0.5f64.sqrt();
        assert!((pc.values[1] - s).abs() < 1e-9 && (pc.values[2] - s).abs() < 1e-9);
        assert!(pca_top_component(&[a.clone(), a]).is_err());

        // raw vectors can differ in a single entry
        let (v, _) = pca_top_vector(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
    }
}
