//! Alternating adversarial training for both stages.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::HistoryBuffer;
use crate::checkpoint::{Checkpoint, Stage};
use crate::error::{GanError, Result};
use crate::layers::Tape;
use crate::loss::{adversarial, loss_reg_grad, Target};
use crate::models::{
    Disc1Config, Disc2Config, DiscriminatorD1, DiscriminatorD2, Gen2Config, GeneratorG2, Model, RefinerConfig, RefinerG1,
};
use crate::ops::softplus;
use crate::optim::{step_decay, Adam, AdamConfig};
use crate::params::{Grads, StatUpdate};
use crate::tensor::{ImageSet, Tensor};

pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage1Config {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    /// Largest chunk pushed through a network at once; gradients of the
    /// chunks are accumulated. 0 processes whole batches.
    pub micro_batch: usize,
    /// History buffer capacity in half-batches.
    pub history_batches: usize,
    pub adam: AdamConfig,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 20,
            batch_size: 512,
            lambda: 0.1,
            micro_batch: 0,
            history_batches: 50,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stage2Config {
    pub initial_learning_rate: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub micro_batch: usize,
    pub history_batches: usize,
    pub adam: AdamConfig,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Self {
            initial_learning_rate: 0.0002,
            decay: 0.5,
            decay_every: 100,
            epochs: 1200,
            batch_size: 64,
            micro_batch: 0,
            history_batches: 0,
            adam: AdamConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GanError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn validate_adam(a: &AdamConfig) -> Result<()> {
    for (name, b) in [("adam.beta1", a.beta1), ("adam.beta2", a.beta2)] {
        if !(0.0..1.0).contains(&b) {
            return Err(GanError::Config(format!("{name} must be in [0, 1), got {b}")));
        }
    }
    positive("adam.eps", a.eps)
}

impl Stage1Config {
    pub fn validate(&self) -> Result<()> {
        positive("learning_rate", self.learning_rate)?;
        positive("epochs", self.epochs as f64)?;
        positive("batch_size", self.batch_size as f64)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(GanError::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        validate_adam(&self.adam)
    }
}

impl Stage2Config {
    pub fn validate(&self) -> Result<()> {
        positive("initial_learning_rate", self.initial_learning_rate)?;
        positive("epochs", self.epochs as f64)?;
        positive("batch_size", self.batch_size as f64)?;
        positive("decay_every", self.decay_every as f64)?;
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(GanError::Config(format!("decay must be in (0, 1), got {}", self.decay)));
        }
        validate_adam(&self.adam)
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        step_decay(self.initial_learning_rate, self.decay, self.decay_every, epoch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Discriminator,
    Generator,
}

/// One optimizer step. Discriminator steps report the generator loss of the
/// freshly refined images they were shown (scaled to a full batch);
/// generator steps repeat the discriminator loss of the same iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub epoch: usize,
    pub phase: Phase,
    pub loss_g: f64,
    pub loss_d: f64,
    pub l_reg: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub seed: u64,
    /// Receives `last.ckpt` after every epoch and `best.ckpt` whenever the
    /// epoch-mean generator loss improves.
    pub checkpoint_dir: Option<PathBuf>,
    pub resume: Option<Checkpoint>,
    /// Stop once this many epochs are complete, as if interrupted.
    pub stop_after: Option<usize>,
}

pub struct Stage1Data {
    pub synthetic: ImageSet,
    pub real: ImageSet,
}

pub struct Stage2Data {
    /// Stage 0 images at the refiner's input size.
    pub synthetic: ImageSet,
    /// Real images at the Stage II output size.
    pub real: ImageSet,
}

#[derive(Debug)]
pub struct Stage1Outcome {
    pub g1: RefinerG1,
    pub d1: DiscriminatorD1,
    pub history: Vec<LossRecord>,
    pub epochs_completed: usize,
}

#[derive(Debug)]
pub struct Stage2Outcome {
    pub g2: GeneratorG2,
    pub d2: DiscriminatorD2,
    pub history: Vec<LossRecord>,
    pub epochs_completed: usize,
}

struct Game<'a> {
    stage: Stage,
    epochs: usize,
    batch: usize,
    micro: usize,
    lambda: f64,
    history_capacity: usize,
    adam: AdamConfig,
    lr: &'a dyn Fn(usize) -> f64,
    meta: serde_json::Value,
    /// Read-only models stored alongside the trained pair.
    frozen: Option<(&'a str, &'a Model)>,
}

fn chunks(n: usize, micro: usize) -> impl Iterator<Item = (usize, usize)> {
    let step = if micro == 0 { n.max(1) } else { micro };
    (0..n).step_by(step).map(move |s| (s, (s + step).min(n)))
}

/// Generator adversarial sum, L1 sum and parameter gradients of
/// `adv + lambda * l1 / norm` on `x`.
fn generator_pass(
    g: &Model,
    d: &Model,
    x: &Tensor,
    lambda: f64,
    norm: usize,
    micro: usize,
) -> Result<(f64, f64, Grads, Vec<StatUpdate>)> {
    let mut grads = Grads::zeros_like(g.store());
    let mut stats = Vec::new();
    let (mut adv, mut l1) = (0.0, 0.0);
    for (s, e) in chunks(x.n(), micro) {
        let xs = x.slice_batch(s, e);
        let mut tg = Tape::new();
        let y = g.forward_train(&xs, &mut tg)?;
        let mut td = Tape::new();
        let z = d.forward_train(&y, &mut td)?;
        let (a, gz) = adversarial(&z, Target::Real);
        adv += a;
        let mut gy = d.backward(&mut td, gz, None);
        if lambda > 0.0 {
            l1 += y.data().iter().zip(xs.data()).map(|(a, b)| (a - b).abs()).sum::<f64>();
            gy.add_assign(&loss_reg_grad(&y, &xs, lambda / norm as f64));
        }
        g.backward(&mut tg, gy, Some(&mut grads));
        stats.extend(tg.take_stats());
    }
    Ok((adv, l1, grads, stats))
}

/// Stage I generator objective and its gradient with respect to every
/// refiner parameter, evaluated exactly as in a training step.
pub fn stage1_generator_objective(g1: &RefinerG1, d1: &DiscriminatorD1, x: &Tensor, lambda: f64) -> Result<(f64, Grads)> {
    let (adv, l1, grads, _) = generator_pass(g1.model(), d1.model(), x, lambda, x.n(), 0)?;
    Ok((adv + lambda * l1 / x.n() as f64, grads))
}

/// Stage II generator objective and its gradient with respect to every G2
/// parameter; `x` is the refined low-resolution batch.
pub fn stage2_generator_objective(g2: &GeneratorG2, d2: &DiscriminatorD2, x: &Tensor) -> Result<(f64, Grads)> {
    let (adv, _, grads, _) = generator_pass(g2.model(), d2.model(), x, 0.0, x.n(), 0)?;
    Ok((adv, grads))
}

fn refine(g: &Model, x: &Tensor, micro: usize) -> Result<Tensor> {
    let mut parts = Vec::new();
    for (s, e) in chunks(x.n(), micro) {
        parts.push(g.forward_train(&x.slice_batch(s, e), &mut Tape::new())?);
    }
    Ok(Tensor::concat(&parts.iter().collect::<Vec<_>>()))
}

fn non_finite(what: &str, epoch: usize, step: u64, value: f64) -> GanError {
    GanError::NonFinite { what: what.to_string(), epoch, step, value }
}

struct State {
    g_opt: Adam,
    d_opt: Adam,
    buffer: HistoryBuffer,
    history: Vec<LossRecord>,
    epoch: usize,
    step: u64,
    best_g: f64,
}

const BEST_KEY: &str = "best_epoch_loss_g";

fn checkpoint(game: &Game, g: &Model, d: &Model, st: &State, seed: u64) -> Checkpoint {
    let mut meta = game.meta.clone();
    meta["records"] = serde_json::to_value(&st.history).expect("records serialize");
    meta[BEST_KEY] = serde_json::json!(st.best_g);
    let mut c = Checkpoint::new(game.stage, st.epoch, st.step, seed, meta);
    c.put_store("g", g.store());
    c.put_store("d", d.store());
    if let Some((name, m)) = game.frozen {
        c.put_store(name, m.store());
    }
    c.put_adam("adam_g", &st.g_opt);
    c.put_adam("adam_d", &st.d_opt);
    let items = st.buffer.raw_items();
    let shape = st.buffer.item_shape().unwrap_or([0, 0, 0]);
    c.counters.insert("history/capacity".into(), st.buffer.capacity() as u64);
    c.put("history", vec![items.len(), shape[0], shape[1], shape[2]], false, items.iter().flatten().map(|&v| v as f64).collect());
    c
}

fn restore(c: &Checkpoint, game: &Game, g: &mut Model, d: &mut Model, st: &mut State) -> Result<()> {
    let fail = |msg: String| GanError::Checkpoint { path: PathBuf::from("<resume>"), msg };
    if c.stage != game.stage {
        return Err(fail(format!("checkpoint is for {:?}, not {:?}", c.stage, game.stage)));
    }
    c.load_store("g", g.store_mut())?;
    c.load_store("d", d.store_mut())?;
    c.load_adam("adam_g", &mut st.g_opt)?;
    c.load_adam("adam_d", &mut st.d_opt)?;
    let h = c.get("history").ok_or_else(|| fail("missing history buffer".into()))?;
    let [n, ch, hh, ww] = <[usize; 4]>::try_from(h.info.shape.as_slice()).map_err(|_| fail("history shape".into()))?;
    let items =
        if n == 0 { Vec::new() } else { h.data.chunks(ch * hh * ww).map(|c| c.iter().map(|&v| v as f32).collect()).collect() };
    let cap = c.counters.get("history/capacity").copied().unwrap_or(game.history_capacity as u64) as usize;
    st.buffer = HistoryBuffer::restore(cap, (n > 0).then_some([ch, hh, ww]), items);
    st.history = serde_json::from_value(c.meta["records"].clone()).map_err(|e| fail(format!("records: {e}")))?;
    st.best_g = c.meta[BEST_KEY].as_f64().unwrap_or(f64::INFINITY);
    st.epoch = c.epoch;
    st.step = c.step;
    Ok(())
}

/// Called after every optimizer step with the phase just taken and the
/// generator and discriminator.
pub type StepObserver<'a> = &'a mut dyn FnMut(Phase, &Model, &Model);

fn play(
    game: &Game,
    g: &mut Model,
    d: &mut Model,
    inputs: &ImageSet,
    real: &ImageSet,
    opts: &TrainOptions,
    observer: StepObserver,
) -> Result<(Vec<LossRecord>, usize)> {
    if inputs.is_empty() || real.is_empty() {
        return Err(GanError::Config("training needs non-empty synthetic and real corpora".into()));
    }
    let mut st = State {
        g_opt: Adam::new(game.adam, g.store()),
        d_opt: Adam::new(game.adam, d.store()),
        buffer: HistoryBuffer::new(game.history_capacity),
        history: Vec::new(),
        epoch: 0,
        step: 0,
        best_g: f64::INFINITY,
    };
    if let Some(c) = &opts.resume {
        restore(c, game, g, d, &mut st)?;
    }
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| GanError::io(dir, e))?;
    }
    let (n, m, b) = (inputs.len(), real.len(), game.batch);
    while st.epoch < game.epochs {
        if opts.stop_after.is_some_and(|s| st.epoch >= s) {
            break;
        }
        let epoch = st.epoch;
        let lr = (game.lr)(epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(epoch as u64 + 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut real_order: Vec<usize> = (0..m).collect();
        real_order.shuffle(&mut rng);
        let mut real_pos = 0;
        let (mut g_sum, mut g_count) = (0.0, 0usize);
        for idx in order.chunks(b) {
            let bn = idx.len();
            let x = inputs.batch(idx);

            // Discriminator step: fresh refined images plus history, against real.
            let h = if st.buffer.is_empty() { 0 } else { (bn / 2).min(st.buffer.len()) };
            let cur_n = bn - h;
            let x_cur = x.slice_batch(0, cur_n);
            let fake_cur = refine(g, &x_cur, game.micro)?;
            let fake = match st.buffer.sample(h, &mut rng) {
                Some(hist) => Tensor::concat(&[&fake_cur, &hist]),
                None => fake_cur.clone(),
            };
            let real_idx: Vec<usize> = (0..bn).map(|k| real_order[(real_pos + k) % m]).collect();
            real_pos = (real_pos + bn) % m;
            let y = real.batch(&real_idx);
            let mut dg = Grads::zeros_like(d.store());
            let mut stats = Vec::new();
            let (mut loss_d, mut adv_cur) = (0.0, 0.0);
            for (batch, target) in [(&fake, Target::Refined), (&y, Target::Real)] {
                for (s, e) in chunks(batch.n(), game.micro) {
                    let mut tape = Tape::new();
                    let z = d.forward_train(&batch.slice_batch(s, e), &mut tape)?;
                    if target == Target::Refined {
                        for i in s..e.min(cur_n) {
                            let item = z.item(i - s);
                            adv_cur += item.iter().map(|&v| softplus(v)).sum::<f64>() / item.len() as f64;
                        }
                    }
                    let (l, gz) = adversarial(&z, target);
                    loss_d += l;
                    d.backward(&mut tape, gz, Some(&mut dg));
                    stats.extend(tape.take_stats());
                }
            }
            if !loss_d.is_finite() || !dg.is_finite() {
                return Err(non_finite("discriminator loss", epoch, st.step, loss_d));
            }
            let reg_cur = if game.lambda > 0.0 {
                fake_cur.data().iter().zip(x_cur.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / cur_n as f64
            } else {
                0.0
            };
            d.store_mut().apply_stats(&stats, BN_MOMENTUM);
            st.d_opt.step(d.store_mut(), &dg, lr);
            st.buffer.push(&fake_cur, &mut rng)?;
            st.history.push(LossRecord {
                step: st.step,
                epoch,
                phase: Phase::Discriminator,
                loss_g: adv_cur * bn as f64 / cur_n as f64 + game.lambda * reg_cur,
                loss_d,
                l_reg: reg_cur,
                lr,
            });
            st.step += 1;
            observer(Phase::Discriminator, g, d);

            // Generator step on the same synthetic batch.
            let (adv, l1, gg, stats) = generator_pass(g, d, &x, game.lambda, bn, game.micro)?;
            let l_reg = l1 / bn as f64;
            let loss_g = adv + game.lambda * l_reg;
            if !loss_g.is_finite() || !gg.is_finite() {
                return Err(non_finite("generator loss", epoch, st.step, loss_g));
            }
            g.store_mut().apply_stats(&stats, BN_MOMENTUM);
            st.g_opt.step(g.store_mut(), &gg, lr);
            st.history.push(LossRecord { step: st.step, epoch, phase: Phase::Generator, loss_g, loss_d, l_reg, lr });
            st.step += 1;
            observer(Phase::Generator, g, d);
            g_sum += loss_g;
            g_count += 1;
        }
        st.epoch += 1;
        let epoch_g = g_sum / g_count as f64;
        log::info!(
            "{:?} epoch {}/{}: mean L_G {:.4}, last L_D {:.4}, lr {}",
            game.stage,
            st.epoch,
            game.epochs,
            epoch_g,
            st.history.last().map_or(f64::NAN, |r| r.loss_d),
            lr
        );
        let improved = epoch_g < st.best_g;
        if improved {
            st.best_g = epoch_g;
        }
        if let Some(dir) = &opts.checkpoint_dir {
            let c = checkpoint(game, g, d, &st, opts.seed);
            c.write_atomic(&dir.join("last.ckpt"))?;
            if improved {
                c.write_atomic(&dir.join("best.ckpt"))?;
            }
        }
    }
    Ok((st.history, st.epoch))
}

pub fn train_stage1(
    g1: RefinerG1,
    d1: DiscriminatorD1,
    data: &Stage1Data,
    cfg: &Stage1Config,
    opts: &TrainOptions,
) -> Result<Stage1Outcome> {
    train_stage1_observed(g1, d1, data, cfg, opts, &mut |_, _, _| {})
}

pub fn train_stage1_observed(
    mut g1: RefinerG1,
    mut d1: DiscriminatorD1,
    data: &Stage1Data,
    cfg: &Stage1Config,
    opts: &TrainOptions,
    observer: StepObserver,
) -> Result<Stage1Outcome> {
    cfg.validate()?;
    let side = g1.model().input_side();
    for (what, set) in [("synthetic", &data.synthetic), ("real", &data.real)] {
        if set.dims() != (side, side) {
            return Err(GanError::shape("train_stage1", format!("{what} images {side}x{side}"), format!("{:?}", set.dims())));
        }
    }
    let lr = |_: usize| cfg.learning_rate;
    let game = Game {
        stage: Stage::Stage1,
        epochs: cfg.epochs,
        batch: cfg.batch_size,
        micro: cfg.micro_batch,
        lambda: cfg.lambda,
        history_capacity: cfg.history_batches * cfg.batch_size.div_ceil(2),
        adam: cfg.adam,
        lr: &lr,
        meta: serde_json::json!({
            "stage_config": cfg,
            "g_config": g1.config(),
            "d_config": d1.config(),
            "micro_batch_deviation": cfg.micro_batch != 0 && cfg.micro_batch < cfg.batch_size,
        }),
        frozen: None,
    };
    let (history, epochs_completed) = play(&game, g1.model_mut(), d1.model_mut(), &data.synthetic, &data.real, opts, observer)?;
    Ok(Stage1Outcome { g1, d1, history, epochs_completed })
}

/// Refiner outputs for a whole corpus, computed once.
pub fn refine_corpus(g1: &RefinerG1, synthetic: &ImageSet, chunk: usize) -> Result<ImageSet> {
    let (h, w) = synthetic.dims();
    let mut out = ImageSet::new(h, w);
    let idx: Vec<usize> = (0..synthetic.len()).collect();
    for part in idx.chunks(chunk.max(1)) {
        let y = g1.forward(&synthetic.batch(part))?;
        for i in 0..y.n() {
            out.push(&y.to_image(i));
        }
    }
    Ok(out)
}

pub fn train_stage2(
    g1: &RefinerG1,
    g2: GeneratorG2,
    d2: DiscriminatorD2,
    data: &Stage2Data,
    cfg: &Stage2Config,
    opts: &TrainOptions,
) -> Result<Stage2Outcome> {
    train_stage2_observed(g1, g2, d2, data, cfg, opts, &mut |_, _, _| {})
}

pub fn train_stage2_observed(
    g1: &RefinerG1,
    mut g2: GeneratorG2,
    mut d2: DiscriminatorD2,
    data: &Stage2Data,
    cfg: &Stage2Config,
    opts: &TrainOptions,
    observer: StepObserver,
) -> Result<Stage2Outcome> {
    cfg.validate()?;
    let side = g1.model().input_side();
    if data.synthetic.dims() != (side, side) || g2.model().input_side() != side {
        return Err(GanError::shape(
            "train_stage2",
            format!("synthetic images {side}x{side}"),
            format!("{:?}", data.synthetic.dims()),
        ));
    }
    let out = g2.output_side();
    if data.real.dims() != (out, out) || d2.model().input_side() != out {
        return Err(GanError::shape("train_stage2", format!("real images {out}x{out}"), format!("{:?}", data.real.dims())));
    }
    let lowres = refine_corpus(g1, &data.synthetic, cfg.batch_size)?;
    let lr = |e: usize| cfg.lr(e);
    let game = Game {
        stage: Stage::Stage2,
        epochs: cfg.epochs,
        batch: cfg.batch_size,
        micro: cfg.micro_batch,
        lambda: 0.0,
        history_capacity: cfg.history_batches * cfg.batch_size.div_ceil(2),
        adam: cfg.adam,
        lr: &lr,
        meta: serde_json::json!({
            "stage_config": cfg,
            "g_config": g2.config(),
            "d_config": d2.config(),
            "g1_config": g1.config(),
            "micro_batch_deviation": cfg.micro_batch != 0 && cfg.micro_batch < cfg.batch_size,
        }),
        frozen: Some(("g1", g1.model())),
    };
    let (history, epochs_completed) = play(&game, g2.model_mut(), d2.model_mut(), &lowres, &data.real, opts, observer)?;
    Ok(Stage2Outcome { g2, d2, history, epochs_completed })
}

fn meta_config<T: serde::de::DeserializeOwned>(c: &Checkpoint, key: &str) -> Result<T> {
    serde_json::from_value(c.meta[key].clone()).map_err(|e| GanError::Checkpoint { path: PathBuf::from(key), msg: e.to_string() })
}

/// Rebuilds the Stage I pair stored in a checkpoint.
pub fn load_stage1(c: &Checkpoint) -> Result<(RefinerG1, DiscriminatorD1)> {
    let gc: RefinerConfig = meta_config(c, "g_config")?;
    let dc: Disc1Config = meta_config(c, "d_config")?;
    let mut g = RefinerG1::new(&gc, 0)?;
    let mut d = DiscriminatorD1::new(&dc, 0)?;
    c.load_store("g", g.model_mut().store_mut())?;
    c.load_store("d", d.model_mut().store_mut())?;
    Ok((g, d))
}

/// Rebuilds the frozen refiner and the Stage II pair stored in a checkpoint.
pub fn load_stage2(c: &Checkpoint) -> Result<(RefinerG1, GeneratorG2, DiscriminatorD2)> {
    let g1c: RefinerConfig = meta_config(c, "g1_config")?;
    let gc: Gen2Config = meta_config(c, "g_config")?;
    let dc: Disc2Config = meta_config(c, "d_config")?;
    let mut g1 = RefinerG1::new(&g1c, 0)?;
    let mut g = GeneratorG2::new(&gc, 0)?;
    let mut d = DiscriminatorD2::new(&dc, 0)?;
    c.load_store("g1", g1.model_mut().store_mut())?;
    c.load_store("g", g.model_mut().store_mut())?;
    c.load_store("d", d.model_mut().store_mut())?;
    Ok((g1, g, d))
}
