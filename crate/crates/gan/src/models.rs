//! The four networks: Stage I refiner and discriminator, Stage II
//! super-resolution generator and discriminator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GanError, Result};
use crate::layers::{self, Hook, Layer, Tape};
use crate::ops::{self, ConvSpec};
use crate::params::{Grads, ParamStore};
use crate::tensor::Tensor;

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefinerConfig {
    pub size: usize,
    pub width: usize,
    pub blocks: usize,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self { size: 64, width: 64, blocks: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Disc1Config {
    pub size: usize,
    pub widths: [usize; 4],
    /// Emit one probability per output patch instead of per image.
    pub per_patch: bool,
}

impl Default for Disc1Config {
    fn default() -> Self {
        Self { size: 64, widths: [64, 128, 256, 512], per_patch: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gen2Config {
    /// Input side; the output side is four times larger.
    pub size: usize,
    pub width: usize,
    pub blocks: usize,
    pub batch_norm: bool,
}

impl Default for Gen2Config {
    fn default() -> Self {
        Self { size: 64, width: 64, blocks: 4, batch_norm: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Disc2Config {
    pub size: usize,
    pub base_width: usize,
    pub max_width: usize,
    pub head_channels: usize,
    pub batch_norm: bool,
}

impl Default for Disc2Config {
    fn default() -> Self {
        Self { size: 256, base_width: 32, max_width: 256, head_channels: 16, batch_norm: true }
    }
}

#[derive(Debug, Clone)]
enum Graph {
    Plain(Vec<Layer>),
    /// `tail(stem(x) + body(stem(x)))`
    Skip {
        stem: Vec<Layer>,
        body: Vec<Layer>,
        tail: Vec<Layer>,
    },
}

/// A parameterized layer graph with a fixed single-channel input size.
#[derive(Debug, Clone)]
pub struct Model {
    name: &'static str,
    side: usize,
    store: ParamStore,
    graph: Graph,
}

fn noop(_: &str, _: &Tensor) {}

impl Model {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn input_side(&self) -> usize {
        self.side
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn count_params(&self) -> usize {
        count_params(&self.store)
    }

    pub fn digest(&self) -> String {
        self.store.digest()
    }

    pub fn check_input(&self, x: &Tensor) -> Result<()> {
        let [n, c, h, w] = x.shape();
        if n == 0 || c != 1 || h != self.side || w != self.side {
            return Err(GanError::shape(self.name, format!("[N>=1, 1, {0}, {0}]", self.side), format!("{:?}", x.shape())));
        }
        if !x.is_finite() {
            return Err(GanError::NonFiniteInput { context: self.name });
        }
        Ok(())
    }

    /// Inference pass with running statistics. Raw graph output: images for
    /// generators, logits for discriminators.
    pub fn infer(&self, x: &Tensor, hook: Hook) -> Result<Tensor> {
        self.check_input(x)?;
        Ok(self.run(x.clone(), None, hook))
    }

    /// Training pass with batch statistics, recording into `tape`.
    pub fn forward_train(&self, x: &Tensor, tape: &mut Tape) -> Result<Tensor> {
        self.check_input(x)?;
        Ok(self.run(x.clone(), Some(tape), &mut noop))
    }

    fn run(&self, x: Tensor, mut tape: Option<&mut Tape>, hook: Hook) -> Tensor {
        match &self.graph {
            Graph::Plain(l) => layers::forward(l, &self.store, x, tape, hook),
            Graph::Skip { stem, body, tail } => {
                let s = layers::forward(stem, &self.store, x, tape.as_deref_mut(), hook);
                let mut b = layers::forward(body, &self.store, s.clone(), tape.as_deref_mut(), hook);
                b.add_assign(&s);
                layers::forward(tail, &self.store, b, tape, hook)
            }
        }
    }

    /// Reverse pass for the most recent [`Model::forward_train`] recorded in
    /// `tape`. Returns the gradient with respect to the input.
    pub fn backward(&self, tape: &mut Tape, g: Tensor, grads: Option<&mut Grads>) -> Tensor {
        let mut grads = grads;
        match &self.graph {
            Graph::Plain(l) => layers::backward(l, &self.store, tape, g, &mut grads),
            Graph::Skip { stem, body, tail } => {
                let gb = layers::backward(tail, &self.store, tape, g, &mut grads);
                let mut gs = layers::backward(body, &self.store, tape, gb.clone(), &mut grads);
                gs.add_assign(&gb);
                layers::backward(stem, &self.store, tape, gs, &mut grads)
            }
        }
    }
}

pub fn count_params(store: &ParamStore) -> usize {
    store.count()
}

fn conv(store: &mut ParamStore, name: &str, spec: ConvSpec, rng: &mut ChaCha8Rng) -> Layer {
    Layer::conv(store, name, spec, rng)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(GanError::Config(msg()))
    }
}

/// Stage I refiner: entry 3x3 conv, residual blocks, 1x1 exit, sigmoid.
#[derive(Debug, Clone)]
pub struct RefinerG1 {
    config: RefinerConfig,
    model: Model,
}

impl RefinerG1 {
    pub fn new(config: &RefinerConfig, seed: u64) -> Result<Self> {
        check(config.size >= 1 && config.width >= 1, || "refiner size and width must be positive".into())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let w = config.width;
        let branch_gain = (2.0 / config.blocks.max(1) as f64).sqrt();
        let mut l = vec![conv(&mut s, "entry", ConvSpec::same(1, w, 3), &mut rng), Layer::Relu];
        for b in 0..config.blocks {
            l.push(Layer::Residual(vec![
                conv(&mut s, &format!("block{b}.conv1"), ConvSpec::same(w, w, 3), &mut rng),
                Layer::Relu,
                Layer::conv_with_gain(&mut s, &format!("block{b}.conv2"), ConvSpec::same(w, w, 3), branch_gain, &mut rng),
            ]));
        }
        l.push(Layer::conv_with_gain(&mut s, "exit", ConvSpec::same(w, 1, 1), 1.0, &mut rng));
        l.push(Layer::Sigmoid);
        Ok(Self { config: config.clone(), model: Model { name: "g1", side: config.size, store: s, graph: Graph::Plain(l) } })
    }

    pub fn config(&self) -> &RefinerConfig {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut Model {
        &mut self.model
    }

    /// Refined images in (0, 1), same shape as the input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.model.infer(x, &mut noop)
    }
}

/// Stage I discriminator: five convolutions, two max-pools, logits per
/// image (global mean over patches) or per patch.
#[derive(Debug, Clone)]
pub struct DiscriminatorD1 {
    config: Disc1Config,
    model: Model,
}

impl DiscriminatorD1 {
    pub fn new(config: &Disc1Config, seed: u64) -> Result<Self> {
        check(config.size >= 8 && config.size.is_multiple_of(8), || {
            format!("D1 size {} must be a positive multiple of 8", config.size)
        })?;
        check(config.widths.iter().all(|&w| w > 0), || "D1 widths must be positive".into())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let [w0, w1, w2, w3] = config.widths;
        let lr = Layer::LeakyRelu(LEAKY_SLOPE);
        let mut l = vec![
            conv(&mut s, "conv1", ConvSpec::strided(1, w0, 3, 2), &mut rng),
            lr.clone(),
            conv(&mut s, "conv2", ConvSpec::same(w0, w1, 3), &mut rng),
            lr.clone(),
            Layer::MaxPool2,
            conv(&mut s, "conv3", ConvSpec::same(w1, w2, 3), &mut rng),
            lr.clone(),
            Layer::MaxPool2,
            conv(&mut s, "conv4", ConvSpec::same(w2, w3, 3), &mut rng),
            lr,
            Layer::conv_with_gain(&mut s, "conv5", ConvSpec::same(w3, 1, 1), 1.0, &mut rng),
            Layer::Tap("patch_logits"),
        ];
        if !config.per_patch {
            l.push(Layer::GlobalMean);
        }
        Ok(Self { config: config.clone(), model: Model { name: "d1", side: config.size, store: s, graph: Graph::Plain(l) } })
    }

    pub fn config(&self) -> &Disc1Config {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut Model {
        &mut self.model
    }

    /// Probability that each image is refined. Per-patch discriminators
    /// report the mean patch probability.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(image_probabilities(&self.model.infer(x, &mut noop)?))
    }
}

/// Stage II generator: 64 to 16 by max-pooling, residual bottleneck, nearest
/// upsampling with 3x3 convolutions back to 64 (plus a skip from the stem)
/// and on to 256.
#[derive(Debug, Clone)]
pub struct GeneratorG2 {
    config: Gen2Config,
    model: Model,
}

impl GeneratorG2 {
    pub fn new(config: &Gen2Config, seed: u64) -> Result<Self> {
        check(config.size >= 4 && config.size.is_multiple_of(4), || {
            format!("G2 size {} must be a positive multiple of 4", config.size)
        })?;
        check(config.width >= 4 && config.width.is_multiple_of(4), || {
            format!("G2 width {} must be a positive multiple of 4", config.width)
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let w = config.width;
        let bn = config.batch_norm;
        let block = |s: &mut ParamStore, name: &str, spec: ConvSpec, rng: &mut ChaCha8Rng| {
            let mut v = vec![conv(s, name, spec, rng)];
            if bn {
                v.push(Layer::batch_norm(s, &format!("{name}.bn"), spec.out_c));
            }
            v.push(Layer::Relu);
            v
        };
        let branch_gain = (2.0 / config.blocks.max(1) as f64).sqrt();
        let stem = block(&mut s, "stem", ConvSpec::same(1, w, 3), &mut rng);
        let mut body = vec![Layer::MaxPool2];
        body.extend(block(&mut s, "down", ConvSpec::same(w, w, 3), &mut rng));
        body.push(Layer::MaxPool2);
        body.push(Layer::Tap("bottleneck"));
        for b in 0..config.blocks {
            let mut inner = vec![conv(&mut s, &format!("block{b}.conv1"), ConvSpec::same(w, w, 3), &mut rng)];
            if bn {
                inner.push(Layer::batch_norm(&mut s, &format!("block{b}.bn1"), w));
            }
            inner.push(Layer::Relu);
            inner.push(Layer::conv_with_gain(&mut s, &format!("block{b}.conv2"), ConvSpec::same(w, w, 3), branch_gain, &mut rng));
            if bn {
                inner.push(Layer::batch_norm(&mut s, &format!("block{b}.bn2"), w));
            }
            body.push(Layer::Residual(inner));
        }
        for u in 0..2 {
            body.push(Layer::Upsample2);
            body.extend(block(&mut s, &format!("up{u}"), ConvSpec::same(w, w, 3), &mut rng));
        }
        let mut tail = vec![Layer::Upsample2];
        tail.extend(block(&mut s, "hires0", ConvSpec::same(w, w / 2, 3), &mut rng));
        tail.push(Layer::Upsample2);
        tail.extend(block(&mut s, "hires1", ConvSpec::same(w / 2, w / 4, 3), &mut rng));
        tail.push(Layer::conv_with_gain(&mut s, "exit", ConvSpec::same(w / 4, 1, 1), 1.0, &mut rng));
        tail.push(Layer::Sigmoid);
        Ok(Self {
            config: config.clone(),
            model: Model { name: "g2", side: config.size, store: s, graph: Graph::Skip { stem, body, tail } },
        })
    }

    pub fn config(&self) -> &Gen2Config {
        &self.config
    }

    pub fn output_side(&self) -> usize {
        4 * self.config.size
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut Model {
        &mut self.model
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.model.infer(x, &mut noop)
    }

    pub fn forward_hooked(&self, x: &Tensor, hook: Hook) -> Result<Tensor> {
        self.model.infer(x, hook)
    }
}

/// Stage II discriminator: stride-2 blocks down to 4x4, 1x1 convolution,
/// fully connected logit.
#[derive(Debug, Clone)]
pub struct DiscriminatorD2 {
    config: Disc2Config,
    model: Model,
}

impl DiscriminatorD2 {
    pub fn new(config: &Disc2Config, seed: u64) -> Result<Self> {
        check(config.size >= 8 && config.size.is_power_of_two(), || {
            format!("D2 size {} must be a power of two >= 8", config.size)
        })?;
        check(config.base_width > 0 && config.max_width > 0 && config.head_channels > 0, || "D2 widths must be positive".into())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let mut l = Vec::new();
        let (mut side, mut c_in, mut i) = (config.size, 1, 0);
        while side > 4 {
            let c_out = (config.base_width << i).min(config.max_width);
            l.push(conv(&mut s, &format!("down{i}"), ConvSpec::strided(c_in, c_out, 3, 2), &mut rng));
            if config.batch_norm && i > 0 {
                l.push(Layer::batch_norm(&mut s, &format!("down{i}.bn"), c_out));
            }
            l.push(Layer::LeakyRelu(LEAKY_SLOPE));
            side /= 2;
            c_in = c_out;
            i += 1;
        }
        l.push(Layer::Tap("pre_head"));
        l.push(conv(&mut s, "head", ConvSpec::same(c_in, config.head_channels, 1), &mut rng));
        l.push(Layer::LeakyRelu(LEAKY_SLOPE));
        l.push(Layer::linear(&mut s, "fc", config.head_channels * 16, 1, &mut rng));
        Ok(Self { config: config.clone(), model: Model { name: "d2", side: config.size, store: s, graph: Graph::Plain(l) } })
    }

    pub fn config(&self) -> &Disc2Config {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut Model {
        &mut self.model
    }

    pub fn forward(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(image_probabilities(&self.model.infer(x, &mut noop)?))
    }

    pub fn forward_hooked(&self, x: &Tensor, hook: Hook) -> Result<Vec<f64>> {
        Ok(image_probabilities(&self.model.infer(x, hook)?))
    }
}

/// Mean sigmoid probability per image of a logit tensor.
pub fn image_probabilities(logits: &Tensor) -> Vec<f64> {
    (0..logits.n())
        .map(|i| {
            let item = logits.item(i);
            item.iter().map(|&z| ops::sigmoid(z)).sum::<f64>() / item.len() as f64
        })
        .collect()
}
