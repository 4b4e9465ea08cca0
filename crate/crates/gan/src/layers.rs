//! Layer graph with a hand-written reverse pass.

use rand::Rng;

use crate::ops::{self, ConvSpec};
use crate::params::{Grads, ParamId, ParamStore, StatUpdate};
use crate::tensor::Tensor;

const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Conv {
    pub spec: ConvSpec,
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    channels: usize,
    gamma: ParamId,
    beta: ParamId,
    running_mean: ParamId,
    running_var: ParamId,
}

#[derive(Debug, Clone)]
pub struct Linear {
    in_f: usize,
    out_f: usize,
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(Conv),
    BatchNorm(BatchNorm),
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    MaxPool2,
    Upsample2,
    GlobalMean,
    Linear(Linear),
    /// `y = x + F(x)`.
    Residual(Vec<Layer>),
    /// Identity that reports its input to inspection hooks.
    Tap(&'static str),
}

impl Layer {
    /// He-initialized convolution with zero bias.
    pub fn conv(store: &mut ParamStore, name: &str, spec: ConvSpec, rng: &mut impl Rng) -> Layer {
        Self::conv_with_gain(store, name, spec, 2f64.sqrt(), rng)
    }

    /// Convolution with weights drawn from N(0, gain^2 / fan_in).
    pub fn conv_with_gain(store: &mut ParamStore, name: &str, spec: ConvSpec, gain: f64, rng: &mut impl Rng) -> Layer {
        let fan_in = (spec.in_c * spec.k * spec.k) as f64;
        let weight =
            store.add_normal(format!("{name}.weight"), vec![spec.out_c, spec.in_c, spec.k, spec.k], gain / fan_in.sqrt(), rng);
        let bias = store.add_const(format!("{name}.bias"), vec![spec.out_c], 0.0, true);
        Layer::Conv(Conv { spec, weight, bias })
    }

    pub fn batch_norm(store: &mut ParamStore, name: &str, channels: usize) -> Layer {
        Layer::BatchNorm(BatchNorm {
            channels,
            gamma: store.add_const(format!("{name}.gamma"), vec![channels], 1.0, true),
            beta: store.add_const(format!("{name}.beta"), vec![channels], 0.0, true),
            running_mean: store.add_const(format!("{name}.running_mean"), vec![channels], 0.0, false),
            running_var: store.add_const(format!("{name}.running_var"), vec![channels], 1.0, false),
        })
    }

    pub fn linear(store: &mut ParamStore, name: &str, in_f: usize, out_f: usize, rng: &mut impl Rng) -> Layer {
        let weight = store.add_normal(format!("{name}.weight"), vec![out_f, in_f], (1.0 / in_f as f64).sqrt(), rng);
        let bias = store.add_const(format!("{name}.bias"), vec![out_f], 0.0, true);
        Layer::Linear(Linear { in_f, out_f, weight, bias })
    }
}

enum Cache {
    Input(Tensor),
    Output(Tensor),
    Norm { xhat: Tensor, inv_std: Vec<f64> },
    Pool { argmax: Vec<usize>, in_shape: [usize; 4] },
    Shape([usize; 4]),
}

/// Intermediate values recorded by a training forward pass.
#[derive(Default)]
pub struct Tape {
    caches: Vec<Cache>,
    pub(crate) stats: Vec<StatUpdate>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn take_stats(&mut self) -> Vec<StatUpdate> {
        std::mem::take(&mut self.stats)
    }
}

pub type Hook<'a> = &'a mut dyn FnMut(&str, &Tensor);

/// Runs `layers` on `x`. With a tape, BatchNorm uses batch statistics and
/// everything needed for [`backward`] is recorded; without one, running
/// statistics are used.
pub fn forward(layers: &[Layer], store: &ParamStore, mut x: Tensor, mut tape: Option<&mut Tape>, hook: Hook) -> Tensor {
    for layer in layers {
        x = forward_one(layer, store, x, tape.as_deref_mut(), hook);
    }
    x
}

fn forward_one(layer: &Layer, store: &ParamStore, x: Tensor, tape: Option<&mut Tape>, hook: Hook) -> Tensor {
    let record = |tape: Option<&mut Tape>, c: Cache| {
        if let Some(t) = tape {
            t.caches.push(c);
        }
    };
    match layer {
        Layer::Conv(c) => {
            let y = ops::conv2d(&x, store.get(c.weight), store.get(c.bias), &c.spec);
            record(tape, Cache::Input(x));
            y
        }
        Layer::BatchNorm(bn) => batch_norm_forward(bn, store, x, tape),
        Layer::Relu => {
            let y = x.map(|v| v.max(0.0));
            if let Some(t) = tape {
                t.caches.push(Cache::Output(y.clone()));
            }
            y
        }
        Layer::LeakyRelu(a) => {
            let a = *a;
            let y = x.map(|v| if v > 0.0 { v } else { a * v });
            if let Some(t) = tape {
                t.caches.push(Cache::Output(y.clone()));
            }
            y
        }
        Layer::Sigmoid => {
            let y = x.map(ops::sigmoid);
            if let Some(t) = tape {
                t.caches.push(Cache::Output(y.clone()));
            }
            y
        }
        Layer::MaxPool2 => {
            let (y, argmax) = ops::maxpool2(&x);
            record(tape, Cache::Pool { argmax, in_shape: x.shape() });
            y
        }
        Layer::Upsample2 => {
            record(tape, Cache::Shape(x.shape()));
            ops::upsample2(&x)
        }
        Layer::GlobalMean => {
            let [n, c, h, w] = x.shape();
            let hw = (h * w) as f64;
            let data = x.data().chunks(h * w).map(|p| p.iter().sum::<f64>() / hw).collect();
            record(tape, Cache::Shape(x.shape()));
            Tensor::new([n, c, 1, 1], data)
        }
        Layer::Linear(l) => {
            let n = x.n();
            assert_eq!(x.item_len(), l.in_f, "linear input features");
            let mut y = Tensor::zeros([n, l.out_f, 1, 1]);
            for row in y.data_mut().chunks_mut(l.out_f) {
                row.copy_from_slice(store.get(l.bias));
            }
            ops::gemm(n, l.in_f, l.out_f, x.data(), false, store.get(l.weight), true, 1.0, y.data_mut());
            record(tape, Cache::Input(x));
            y
        }
        Layer::Residual(inner) => {
            let mut y = forward(inner, store, x.clone(), tape, hook);
            y.add_assign(&x);
            y
        }
        Layer::Tap(name) => {
            hook(name, &x);
            x
        }
    }
}

fn batch_norm_forward(bn: &BatchNorm, store: &ParamStore, x: Tensor, tape: Option<&mut Tape>) -> Tensor {
    let [n, c, h, w] = x.shape();
    assert_eq!(c, bn.channels, "batch norm channels");
    let hw = h * w;
    let gamma = store.get(bn.gamma);
    let beta = store.get(bn.beta);
    let Some(tape) = tape else {
        let (rm, rv) = (store.get(bn.running_mean), store.get(bn.running_var));
        let mut y = x;
        for (p, plane) in y.data_mut().chunks_mut(hw).enumerate() {
            let ch = p % c;
            let s = gamma[ch] / (rv[ch] + BN_EPS).sqrt();
            for v in plane {
                *v = s * (*v - rm[ch]) + beta[ch];
            }
        }
        return y;
    };
    let m = (n * hw) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for (p, plane) in x.data().chunks(hw).enumerate() {
        mean[p % c] += plane.iter().sum::<f64>();
    }
    mean.iter_mut().for_each(|v| *v /= m);
    for (p, plane) in x.data().chunks(hw).enumerate() {
        let mu = mean[p % c];
        var[p % c] += plane.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v / m + BN_EPS).sqrt()).collect();
    let mut xhat = x;
    for (p, plane) in xhat.data_mut().chunks_mut(hw).enumerate() {
        let ch = p % c;
        for v in plane {
            *v = (*v - mean[ch]) * inv_std[ch];
        }
    }
    let mut y = xhat.clone();
    for (p, plane) in y.data_mut().chunks_mut(hw).enumerate() {
        let ch = p % c;
        for v in plane {
            *v = gamma[ch] * *v + beta[ch];
        }
    }
    let unbiased = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
    tape.stats.push(StatUpdate {
        mean: bn.running_mean,
        var: bn.running_var,
        batch_mean: mean,
        batch_var: var.iter().map(|v| v / m * unbiased).collect(),
    });
    tape.caches.push(Cache::Norm { xhat, inv_std });
    y
}

/// Reverse pass through `layers`, consuming their entries from `tape`.
/// Parameter gradients are accumulated when `grads` is given; the gradient
/// with respect to the input is returned.
pub fn backward(layers: &[Layer], store: &ParamStore, tape: &mut Tape, mut g: Tensor, grads: &mut Option<&mut Grads>) -> Tensor {
    for layer in layers.iter().rev() {
        g = backward_one(layer, store, tape, g, grads);
    }
    g
}

fn backward_one(layer: &Layer, store: &ParamStore, tape: &mut Tape, g: Tensor, grads: &mut Option<&mut Grads>) -> Tensor {
    match layer {
        Layer::Tap(_) => g,
        Layer::Residual(inner) => {
            let mut gx = backward(inner, store, tape, g.clone(), grads);
            gx.add_assign(&g);
            gx
        }
        _ => {
            let cache = tape.caches.pop().expect("tape shorter than layer graph");
            backward_cached(layer, store, cache, g, grads)
        }
    }
}

fn backward_cached(layer: &Layer, store: &ParamStore, cache: Cache, mut g: Tensor, grads: &mut Option<&mut Grads>) -> Tensor {
    match (layer, cache) {
        (Layer::Conv(c), Cache::Input(x)) => {
            let pair = grads.as_deref_mut().map(|gr| gr.pair_mut(c.weight, c.bias));
            ops::conv2d_backward(&x, store.get(c.weight), &g, &c.spec, pair)
        }
        (Layer::Relu, Cache::Output(y)) => {
            for (d, &v) in g.data_mut().iter_mut().zip(y.data()) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
            g
        }
        (Layer::LeakyRelu(a), Cache::Output(y)) => {
            for (d, &v) in g.data_mut().iter_mut().zip(y.data()) {
                if v <= 0.0 {
                    *d *= a;
                }
            }
            g
        }
        (Layer::Sigmoid, Cache::Output(y)) => {
            for (d, &v) in g.data_mut().iter_mut().zip(y.data()) {
                *d *= v * (1.0 - v);
            }
            g
        }
        (Layer::MaxPool2, Cache::Pool { argmax, in_shape }) => ops::maxpool2_backward(&g, &argmax, in_shape),
        (Layer::Upsample2, Cache::Shape(_)) => ops::upsample2_backward(&g),
        (Layer::GlobalMean, Cache::Shape(shape)) => {
            let hw = shape[2] * shape[3];
            let mut dx = Tensor::zeros(shape);
            for (plane, &gv) in dx.data_mut().chunks_mut(hw).zip(g.data()) {
                plane.fill(gv / hw as f64);
            }
            dx
        }
        (Layer::Linear(l), Cache::Input(x)) => {
            let n = x.n();
            if let Some(gr) = grads.as_deref_mut() {
                for row in g.data().chunks(l.out_f) {
                    for (b, v) in gr.get_mut(l.bias).iter_mut().zip(row) {
                        *b += v;
                    }
                }
                ops::gemm(l.out_f, n, l.in_f, g.data(), true, x.data(), false, 1.0, gr.get_mut(l.weight));
            }
            let mut dx = Tensor::zeros(x.shape());
            ops::gemm(n, l.out_f, l.in_f, g.data(), false, store.get(l.weight), false, 0.0, dx.data_mut());
            dx
        }
        (Layer::BatchNorm(bn), Cache::Norm { xhat, inv_std }) => {
            let [n, c, h, w] = xhat.shape();
            let hw = h * w;
            let m = (n * hw) as f64;
            let gamma = store.get(bn.gamma);
            let mut sum_g = vec![0.0; c];
            let mut sum_gx = vec![0.0; c];
            for (p, (gp, xp)) in g.data().chunks(hw).zip(xhat.data().chunks(hw)).enumerate() {
                sum_g[p % c] += gp.iter().sum::<f64>();
                sum_gx[p % c] += gp.iter().zip(xp).map(|(a, b)| a * b).sum::<f64>();
            }
            if let Some(gr) = grads.as_deref_mut() {
                for ch in 0..c {
                    gr.get_mut(bn.gamma)[ch] += sum_gx[ch];
                    gr.get_mut(bn.beta)[ch] += sum_g[ch];
                }
            }
            for (p, (gp, xp)) in g.data_mut().chunks_mut(hw).zip(xhat.data().chunks(hw)).enumerate() {
                let ch = p % c;
                let k = gamma[ch] * inv_std[ch] / m;
                for (d, &xv) in gp.iter_mut().zip(xp) {
                    *d = k * (m * *d - sum_g[ch] - xv * sum_gx[ch]);
                }
            }
            g
        }
        _ => unreachable!("tape entry does not belong to this layer"),
    }
}
