//! Adversarial and regularization losses.
//!
//! Discriminators report the probability that an image is refined. With
//! logit `z`, `-ln(1 - D) = softplus(z)` and `-ln D = softplus(-z)`, which
//! is how every loss here is evaluated. Per-patch discriminators contribute
//! the mean over patches for each image; image terms are summed.

use crate::error::{GanError, Result};
use crate::models::{DiscriminatorD1, DiscriminatorD2, GeneratorG2, RefinerG1};
use crate::ops::{sigmoid, softplus};
use crate::tensor::Tensor;

/// Which way a discriminator term pushes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `-ln D`: the image should be judged refined.
    Refined,
    /// `-ln(1 - D)`: the image should be judged real.
    Real,
}

/// Summed cross-entropy of `logits` against `target` and its gradient with
/// respect to the logits.
pub fn adversarial(logits: &Tensor, target: Target) -> (f64, Tensor) {
    let per_image = logits.item_len() as f64;
    let mut grad = Tensor::zeros(logits.shape());
    let mut total = 0.0;
    for (g, &z) in grad.data_mut().iter_mut().zip(logits.data()) {
        let (l, d) = match target {
            Target::Refined => (softplus(-z), sigmoid(z) - 1.0),
            Target::Real => (softplus(z), sigmoid(z)),
        };
        total += l / per_image;
        *g = d / per_image;
    }
    (total, grad)
}

fn check_same(context: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(GanError::shape(context, format!("{:?}", b.shape()), format!("{:?}", a.shape())));
    }
    Ok(())
}

/// Mean over the batch of per-image L1 distances.
pub fn loss_reg(refined: &Tensor, synthetic: &Tensor) -> Result<f64> {
    check_same("loss_reg", refined, synthetic)?;
    let sum: f64 = refined.data().iter().zip(synthetic.data()).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / refined.n() as f64)
}

/// Gradient of `scale * sum |refined - synthetic|` with respect to `refined`.
pub fn loss_reg_grad(refined: &Tensor, synthetic: &Tensor, scale: f64) -> Tensor {
    let data = refined
        .data()
        .iter()
        .zip(synthetic.data())
        .map(|(a, b)| {
            let d = a - b;
            if d > 0.0 {
                scale
            } else if d < 0.0 {
                -scale
            } else {
                0.0
            }
        })
        .collect();
    Tensor::new(refined.shape(), data)
}

/// `-sum ln(1 - p)` over refined-image probabilities.
pub fn generator_loss_from_probs(p_refined: &[f64]) -> f64 {
    p_refined.iter().map(|p| -(1.0 - p).ln()).sum()
}

/// `-sum ln p_refined - sum ln(1 - p_real)`.
pub fn discriminator_loss_from_probs(p_refined: &[f64], p_real: &[f64]) -> f64 {
    -p_refined.iter().map(|p| p.ln()).sum::<f64>() - p_real.iter().map(|p| (1.0 - p).ln()).sum::<f64>()
}

fn finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GanError::NonFinite { what: what.to_string(), epoch: 0, step: 0, value: v })
    }
}

/// Stage I generator loss on synthetic batch `x`.
pub fn loss_g1(g1: &RefinerG1, d1: &DiscriminatorD1, x: &Tensor, lambda: f64) -> Result<f64> {
    let refined = g1.forward(x)?;
    let logits = d1.model().infer(&refined, &mut |_, _| {})?;
    let adv = adversarial(&logits, Target::Real).0;
    finite("loss_g1", adv + lambda * loss_reg(&refined, x)?)
}

/// Stage I discriminator loss on refined and real batches.
pub fn loss_d1(d1: &DiscriminatorD1, refined: &Tensor, real: &Tensor) -> Result<f64> {
    discriminator_terms(d1.model(), refined, real, "loss_d1")
}

/// Stage II generator loss on synthetic batch `x` through the frozen refiner.
pub fn loss_g2(g1: &RefinerG1, g2: &GeneratorG2, d2: &DiscriminatorD2, x: &Tensor) -> Result<f64> {
    let hires = g2.forward(&g1.forward(x)?)?;
    let logits = d2.model().infer(&hires, &mut |_, _| {})?;
    finite("loss_g2", adversarial(&logits, Target::Real).0)
}

pub fn loss_d2(d2: &DiscriminatorD2, refined: &Tensor, real: &Tensor) -> Result<f64> {
    discriminator_terms(d2.model(), refined, real, "loss_d2")
}

fn discriminator_terms(d: &crate::models::Model, refined: &Tensor, real: &Tensor, what: &str) -> Result<f64> {
    let a = adversarial(&d.infer(refined, &mut |_, _| {})?, Target::Refined).0;
    let b = adversarial(&d.infer(real, &mut |_, _| {})?, Target::Real).0;
    finite(what, a + b)
}
