use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use ivus_core::bmode::PsfParams;
use ivus_core::dataset::mask_to_echogenicity;
use ivus_core::raster::{self, CART_SUFFIX};
use ivus_gan::{Checkpoint, LatencyReport, Pipeline};

use super::data::parse_psf;
use crate::config::RunConfig;
use crate::corpus::{self, stage0_seeds};
use crate::{par, Ctx};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Stage II checkpoint (carries the frozen Stage I refiner).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Augmentation manifest or directory of tissue masks.
    #[arg(long)]
    maps: PathBuf,
    /// Receives `stage0/`, `refined/`, `stage2/` and `cart/`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_psf)]
    psf: Option<PsfParams>,
    #[arg(long)]
    dr: Option<f64>,
}

impl GenerateArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(psf) = self.psf {
            cfg.stage0.psf = psf;
        }
        if let Some(dr) = self.dr {
            cfg.stage0.dynamic_range_db = dr;
        }
    }
}

pub fn generate(ctx: &mut Ctx, args: GenerateArgs) -> Result<()> {
    ctx.manifest.input(&args.checkpoint)?;
    ctx.manifest.input(&args.maps)?;
    let maps = corpus::read_maps(&args.maps)?;
    let s0 = &ctx.config.stage0;

    let load_start = Instant::now();
    let mut pipeline = Pipeline::from_checkpoint(&Checkpoint::read(&args.checkpoint)?, s0.psf, s0.dynamic_range_db)?;
    pipeline.cartesian_side = ctx.config.generate.cartesian_side;
    let load_ms = load_start.elapsed().as_secs_f64() * 1e3;

    let dirs = ["stage0", "refined", "stage2", "cart"].map(|d| args.out.join(d));
    for d in &dirs {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let [stage0_dir, refined_dir, stage2_dir, cart_dir] = &dirs;
    let seed = ctx.seed;
    let generated = par::map(ctx.jobs, &maps, |i, (id, mask)| -> Result<_> {
        let (echo_seed, scatter_seed) = stage0_seeds(seed, i);
        let echo = mask_to_echogenicity(mask, &s0.echo, echo_seed)?;
        let g = pipeline.generate(&echo, scatter_seed).with_context(|| format!("generating {id}"))?;
        corpus::write_image(stage0_dir, id, &g.stage0)?;
        corpus::write_mask(stage0_dir, id, mask)?;
        corpus::write_image(refined_dir, id, &g.refined)?;
        corpus::write_image(stage2_dir, id, &g.polar)?;
        corpus::write_mask(stage2_dir, id, mask)?;
        raster::write_gray(&cart_dir.join(format!("{id}{CART_SUFFIX}")), g.cartesian.data())?;
        Ok(g)
    })?;

    let mut table = String::from("id\tms\n");
    for ((id, _), g) in maps.iter().zip(&generated) {
        let _ = writeln!(table, "{id}\t{:.3}", g.elapsed.as_secs_f64() * 1e3);
    }
    fs::write(args.out.join("latency.tsv"), table)?;
    let report = LatencyReport::from_generated(&generated).expect("at least one map");
    println!(
        "generated {} images: {:.2} ms per image (min {:.2}, max {:.2}); model load {:.2} ms once",
        report.images, report.mean_ms, report.min_ms, report.max_ms, load_ms
    );
    ctx.manifest.output("images", report.images);
    ctx.manifest.output(
        "latency_ms",
        serde_json::json!({ "mean": report.mean_ms, "min": report.min_ms, "max": report.max_ms, "model_load": load_ms }),
    );
    ctx.manifest.write(&args.out)?;
    Ok(())
}
