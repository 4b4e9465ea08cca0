use std::f64::consts::LN_2;

use ivus_gan::loss::{self, discriminator_loss_from_probs, generator_loss_from_probs, loss_reg};
use ivus_gan::train::{stage1_generator_objective, stage2_generator_objective};
use ivus_gan::{
    Disc1Config, Disc2Config, DiscriminatorD1, DiscriminatorD2, Gen2Config, GeneratorG2, RefinerConfig, RefinerG1, Tensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(shape: [usize; 4], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random::<f64>()).collect())
}

fn half_d1() -> DiscriminatorD1 {
    let mut d = DiscriminatorD1::new(&Disc1Config { widths: [4, 4, 4, 4], ..Disc1Config::default() }, 0).unwrap();
    d.model_mut().store_mut().fill_trainable(0.0);
    d
}

fn half_d2() -> DiscriminatorD2 {
    let cfg = Disc2Config { base_width: 4, max_width: 8, head_channels: 2, ..Disc2Config::default() };
    let mut d = DiscriminatorD2::new(&cfg, 0).unwrap();
    d.model_mut().store_mut().fill_trainable(0.0);
    d
}

#[test]
fn closed_forms_when_discriminators_output_one_half() {
    let (n, m) = (5, 3);
    let x = uniform([n, 1, 64, 64], 1);
    let real = uniform([m, 1, 64, 64], 2);
    let g1 = RefinerG1::new(&RefinerConfig { width: 4, blocks: 1, ..RefinerConfig::default() }, 3).unwrap();
    let d1 = half_d1();
    let nl = n as f64 * LN_2;

    let g = loss::loss_g1(&g1, &d1, &x, 0.0).unwrap();
    assert!((g - nl).abs() < 1e-9, "{g} vs {nl}");
    let reg = loss_reg(&g1.forward(&x).unwrap(), &x).unwrap();
    let g = loss::loss_g1(&g1, &d1, &x, 0.1).unwrap();
    assert!((g - (nl + 0.1 * reg)).abs() < 1e-9);

    let refined = g1.forward(&x).unwrap();
    let d = loss::loss_d1(&d1, &refined, &real).unwrap();
    assert!((d - (n + m) as f64 * LN_2).abs() < 1e-9);

    let g2 = GeneratorG2::new(&Gen2Config { width: 4, blocks: 1, ..Gen2Config::default() }, 4).unwrap();
    let d2 = half_d2();
    let g = loss::loss_g2(&g1, &g2, &d2, &x).unwrap();
    assert!((g - nl).abs() < 1e-9);
    let hires = g2.forward(&refined).unwrap();
    let real_hi = uniform([m, 1, 256, 256], 5);
    let d = loss::loss_d2(&d2, &hires, &real_hi).unwrap();
    assert!((d - (n + m) as f64 * LN_2).abs() < 1e-9);
}

#[test]
fn perfect_discriminator_has_vanishing_loss() {
    let refined = [1.0 - 1e-12; 4];
    let real = [1e-12; 3];
    assert!(discriminator_loss_from_probs(&refined, &real) < 1e-10);
}

fn bce(p: f64, label: f64) -> f64 {
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

proptest! {
    #[test]
    fn probability_losses_match_binary_cross_entropy(
        refined in prop::collection::vec(0.001f64..0.999, 1..20),
        real in prop::collection::vec(0.001f64..0.999, 1..20),
    ) {
        let oracle: f64 = refined.iter().map(|&p| bce(p, 1.0)).sum::<f64>() + real.iter().map(|&p| bce(p, 0.0)).sum::<f64>();
        prop_assert!((discriminator_loss_from_probs(&refined, &real) - oracle).abs() < 1e-9);
        let oracle_g: f64 = refined.iter().map(|&p| bce(p, 0.0)).sum();
        prop_assert!((generator_loss_from_probs(&refined) - oracle_g).abs() < 1e-9);
    }

    #[test]
    fn reg_matches_brute_force(seed in 0u64..1000, n in 1usize..4) {
        let a = uniform([n, 1, 9, 7], seed);
        let b = uniform([n, 1, 9, 7], seed + 7919);
        let mut total = 0.0;
        for i in 0..n {
            for r in 0..9 {
                for c in 0..7 {
                    let k = (i * 9 + r) * 7 + c;
                    total += (a.data()[k] - b.data()[k]).abs();
                }
            }
        }
        prop_assert!((loss_reg(&a, &b).unwrap() - total / n as f64).abs() < 1e-9);
    }
}

/// Central differences against the analytic gradient of the full Stage I
/// generator objective, including the regularization term.
pub fn refiner_gradient_check() -> (usize, usize, f64) {
    let g_cfg = RefinerConfig { size: 8, width: 4, blocks: 1 };
    let d_cfg = Disc1Config { size: 8, widths: [4, 6, 6, 4], per_patch: false };
    let mut g1 = RefinerG1::new(&g_cfg, 11).unwrap();
    let mut d1 = DiscriminatorD1::new(&d_cfg, 12).unwrap();
    // Zero biases put ReLU inputs exactly on their kink wherever a whole
    // receptive field is dead; jitter every parameter to a generic point.
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for store in [g1.model_mut().store_mut(), d1.model_mut().store_mut()] {
        for e in store.entries_mut() {
            for v in &mut e.value {
                *v += 0.05 * (rng.random::<f64>() - 0.5);
            }
        }
    }
    // |x~ - x| has a kink at zero; central differences straddling it are
    // meaningless, so use the first input batch whose residuals all keep a
    // margin far beyond what a step of h can move them.
    let x = (13..)
        .map(|s| uniform([2, 1, 8, 8], s))
        .find(|x| {
            let y = g1.forward(x).unwrap();
            y.data().iter().zip(x.data()).all(|(a, b)| (a - b).abs() > 1e-3)
        })
        .unwrap();
    let lambda = 0.1;
    let (_, grads) = stage1_generator_objective(&g1, &d1, &x, lambda).unwrap();
    let h = 1e-4;
    let (mut checked, mut passed, mut worst) = (0, 0, 0.0f64);
    let n_entries = g1.model().store().len();
    for id in 0..n_entries {
        for k in 0..g1.model().store().get(id).len() {
            let orig = g1.model().store().get(id)[k];
            g1.model_mut().store_mut().get_mut(id)[k] = orig + h;
            let up = stage1_generator_objective(&g1, &d1, &x, lambda).unwrap().0;
            g1.model_mut().store_mut().get_mut(id)[k] = orig - h;
            let down = stage1_generator_objective(&g1, &d1, &x, lambda).unwrap().0;
            g1.model_mut().store_mut().get_mut(id)[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id)[k];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
            checked += 1;
            if rel < 1e-3 {
                passed += 1;
            }
            worst = worst.max(rel);
        }
    }
    (checked, passed, worst)
}

#[test]
fn refiner_gradients_match_central_differences() {
    let (checked, passed, worst) = refiner_gradient_check();
    assert!(checked >= 50);
    assert_eq!(passed, checked, "worst relative error {worst}");
}

#[test]
fn super_resolution_gradients_match_central_differences() {
    let mut g2 = GeneratorG2::new(&Gen2Config { size: 8, width: 4, blocks: 1, batch_norm: true }, 31).unwrap();
    let d_cfg = Disc2Config { size: 32, base_width: 4, max_width: 8, head_channels: 2, batch_norm: true };
    let mut d2 = DiscriminatorD2::new(&d_cfg, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for store in [g2.model_mut().store_mut(), d2.model_mut().store_mut()] {
        for e in store.entries_mut() {
            for v in &mut e.value {
                *v += 0.05 * (rng.random::<f64>() - 0.5);
            }
        }
    }
    let x = uniform([3, 1, 8, 8], 34);
    let (_, grads) = stage2_generator_objective(&g2, &d2, &x).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for id in 0..g2.model().store().len() {
        if !g2.model().store().entries()[id].trainable {
            continue;
        }
        let len = g2.model().store().get(id).len();
        for k in (0..len).step_by(len.div_ceil(6)) {
            let orig = g2.model().store().get(id)[k];
            g2.model_mut().store_mut().get_mut(id)[k] = orig + h;
            let up = stage2_generator_objective(&g2, &d2, &x).unwrap().0;
            g2.model_mut().store_mut().get_mut(id)[k] = orig - h;
            let down = stage2_generator_objective(&g2, &d2, &x).unwrap().0;
            g2.model_mut().store_mut().get_mut(id)[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id)[k];
            worst = worst.max((numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6));
            checked += 1;
        }
    }
    assert!(checked >= 50, "{checked}");
    assert!(worst < 1e-3, "worst relative error {worst} over {checked} parameters");
}
