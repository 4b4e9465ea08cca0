use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::Args;
use ivus_core::imaging::resize;
use ivus_gan::train::{load_stage1, train_stage1, train_stage2};
use ivus_gan::{
    Checkpoint, DiscriminatorD1, DiscriminatorD2, GeneratorG2, ImageSet, LossRecord, Phase, RefinerG1, Stage1Data, Stage2Data,
    TrainOptions,
};

use crate::config::RunConfig;
use crate::corpus::{self, item_seed};
use crate::{par, Ctx};

#[derive(Debug, Args)]
pub struct Stage1Args {
    /// Stage 0 images (`*.polar.png`).
    #[arg(long)]
    synthetic: PathBuf,
    /// Real images (`*.polar.png`).
    #[arg(long)]
    real: PathBuf,
    /// Receives checkpoints, loss history and the run manifest.
    #[arg(long)]
    out: PathBuf,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Stage2Args {
    /// Trained Stage I checkpoint; its refiner stays frozen.
    #[arg(long)]
    stage1: PathBuf,
    #[arg(long)]
    synthetic: PathBuf,
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

impl Stage1Args {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(e) = self.epochs {
            cfg.stage1.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.stage1.batch_size = b;
        }
    }
}

impl Stage2Args {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(e) = self.epochs {
            cfg.stage2.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.stage2.batch_size = b;
        }
    }
}

/// Reads every polar image in `dir`, resampled to `side x side`.
fn load_set(dir: &Path, side: usize, jobs: usize) -> Result<ImageSet> {
    let images = corpus::read_images(dir)?;
    let resized = par::map(jobs, &images, |_, (id, img)| resize(img, side, side).with_context(|| id.clone()))?;
    let mut set = ImageSet::new(side, side);
    for img in &resized {
        set.push(img);
    }
    Ok(set)
}

pub fn history_tsv(history: &[LossRecord]) -> String {
    let mut s = String::from("step\tepoch\tphase\tloss_g\tloss_d\tl_reg\tlr\n");
    for r in history {
        let phase = match r.phase {
            Phase::Discriminator => "D",
            Phase::Generator => "G",
        };
        let _ = writeln!(s, "{}\t{}\t{phase}\t{}\t{}\t{}\t{}", r.step, r.epoch, r.loss_g, r.loss_d, r.l_reg, r.lr);
    }
    s
}

fn options(ctx: &mut Ctx, out: &Path, resume: Option<&Path>) -> Result<TrainOptions> {
    let resume = match resume {
        Some(p) => {
            ctx.manifest.input(p)?;
            Some(Checkpoint::read(p)?)
        }
        None => None,
    };
    Ok(TrainOptions { seed: ctx.seed, checkpoint_dir: Some(out.to_path_buf()), resume, stop_after: None })
}

fn finish(ctx: &mut Ctx, out: &Path, history: &[LossRecord], epochs: usize, g_digest: String) -> Result<()> {
    fs::write(out.join("history.tsv"), history_tsv(history))?;
    let last_g = history.iter().rev().find(|r| r.phase == Phase::Generator);
    if let Some(r) = last_g {
        println!("trained {epochs} epochs ({} steps): final L_G {:.5}, L_D {:.5}", history.len(), r.loss_g, r.loss_d);
    }
    ctx.manifest.output("epochs_completed", epochs);
    ctx.manifest.output("steps", history.len());
    ctx.manifest.output("generator_sha256", g_digest);
    ctx.manifest.output("checkpoints", ["last.ckpt", "best.ckpt"]);
    ctx.manifest.write(out)?;
    Ok(())
}

pub fn stage1(ctx: &mut Ctx, args: Stage1Args) -> Result<()> {
    ctx.manifest.input(&args.synthetic)?;
    ctx.manifest.input(&args.real)?;
    let models = &ctx.config.models;
    let g1 = RefinerG1::new(&models.g1, item_seed(ctx.seed, 1))?;
    let d1 = DiscriminatorD1::new(&models.d1, item_seed(ctx.seed, 2))?;
    let side = g1.model().input_side();
    let data = Stage1Data { synthetic: load_set(&args.synthetic, side, ctx.jobs)?, real: load_set(&args.real, side, ctx.jobs)? };
    log::info!(
        "Stage I: {} synthetic and {} real images at {side}x{side}; G1 {} params, D1 {} params",
        data.synthetic.len(),
        data.real.len(),
        g1.model().count_params(),
        d1.model().count_params()
    );
    let opts = options(ctx, &args.out, args.resume.as_deref())?;
    let cfg = ctx.config.stage1.clone();
    let outcome = train_stage1(g1, d1, &data, &cfg, &opts)?;
    let digest = outcome.g1.model().digest();
    finish(ctx, &args.out, &outcome.history, outcome.epochs_completed, digest)
}

pub fn stage2(ctx: &mut Ctx, args: Stage2Args) -> Result<()> {
    ctx.manifest.input(&args.stage1)?;
    ctx.manifest.input(&args.synthetic)?;
    ctx.manifest.input(&args.real)?;
    let (g1, _) = load_stage1(&Checkpoint::read(&args.stage1)?)?;
    let models = &ctx.config.models;
    let side = g1.model().input_side();
    ensure!(models.g2.size == side, "models.g2.size = {} but the Stage I refiner works at {side}x{side}", models.g2.size);
    let g2 = GeneratorG2::new(&models.g2, item_seed(ctx.seed, 3))?;
    let d2 = DiscriminatorD2::new(&models.d2, item_seed(ctx.seed, 4))?;
    let out_side = g2.output_side();
    ensure!(models.d2.size == out_side, "models.d2.size = {} but G2 produces {out_side}x{out_side}", models.d2.size);
    let data =
        Stage2Data { synthetic: load_set(&args.synthetic, side, ctx.jobs)?, real: load_set(&args.real, out_side, ctx.jobs)? };
    log::info!(
        "Stage II: {} synthetic images at {side}x{side}, {} real at {out_side}x{out_side}; G2 {} params, D2 {} params",
        data.synthetic.len(),
        data.real.len(),
        g2.model().count_params(),
        d2.model().count_params()
    );
    let opts = options(ctx, &args.out, args.resume.as_deref())?;
    let cfg = ctx.config.stage2.clone();
    let g1_digest = g1.model().digest();
    let outcome = train_stage2(&g1, g2, d2, &data, &cfg, &opts)?;
    ctx.manifest.output("stage1_sha256", g1_digest);
    let digest = outcome.g2.model().digest();
    finish(ctx, &args.out, &outcome.history, outcome.epochs_completed, digest)
}
