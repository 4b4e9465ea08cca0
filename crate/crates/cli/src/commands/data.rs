use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args};
use ivus_core::bmode::{self, PsfParams};
use ivus_core::dataset::augment::{format_manifest, ManifestEntry};
use ivus_core::dataset::{
    augment as augment_mask, calibrate_region_means, load_dataset, mask_to_echogenicity, rasterize_mask, rasterize_mask_polar,
    synth_phantom, EchoParams,
};
use ivus_core::imaging::cartesian_to_polar;
use ivus_core::raster::{self, CART_SUFFIX, MASK_CART_SUFFIX};
use ivus_core::surrogate::render_surrogate;
use serde::Serialize;

use crate::config::RunConfig;
use crate::corpus::{self, item_seed, stage0_seeds};
use crate::{par, Ctx};

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["root", "synthetic"])))]
pub struct IngestArgs {
    /// Dataset root laid out as described by `[dataset.layout]`.
    #[arg(long)]
    root: Option<PathBuf>,
    /// Instead of reading a dataset, synthesize this many phantoms and
    /// render them with the surrogate acquisition model.
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Directory of `*.mask.polar.png` tissue masks.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Augmentation manifest or directory of tissue masks.
    #[arg(long)]
    maps: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// PSF as `f0,sigma_axial,sigma_lateral`.
    #[arg(long, value_parser = parse_psf)]
    psf: Option<PsfParams>,
    /// Log-compression dynamic range in dB.
    #[arg(long)]
    dr: Option<f64>,
}

impl SimulateArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(psf) = self.psf {
            cfg.stage0.psf = psf;
        }
        if let Some(dr) = self.dr {
            cfg.stage0.dynamic_range_db = dr;
        }
    }
}

pub fn parse_psf(s: &str) -> Result<PsfParams, String> {
    let v: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    let [f0, sigma_axial, sigma_lateral] = v[..] else {
        return Err(format!("expected f0,sigma_axial,sigma_lateral, got {} values", v.len()));
    };
    Ok(PsfParams { f0, sigma_axial, sigma_lateral })
}

fn create(dir: &std::path::Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Serialize)]
struct Calibration {
    stage0: CalibratedStage0,
}

#[derive(Serialize)]
struct CalibratedStage0 {
    echo: EchoParams,
}

pub fn ingest(ctx: &mut Ctx, args: IngestArgs) -> Result<()> {
    create(&args.out)?;
    if let Some(n) = args.synthetic {
        return ingest_synthetic(ctx, n, args);
    }
    let root = args.root.expect("clap requires --root or --synthetic");
    ctx.manifest.input(&root)?;
    let ds = &ctx.config.dataset;
    let loaded = load_dataset(&root, &ds.layout)?;
    let (nr, na) = (ds.n_radial, ds.n_angular);
    let annotated = par::map(ctx.jobs, &loaded.items, |_, item| -> Result<_> {
        let side = item.image.side();
        let polar = cartesian_to_polar(&item.image, nr, na)?;
        corpus::write_image(&args.out, &item.id, &polar)?;
        raster::write_gray(&args.out.join(format!("{}{CART_SUFFIX}", item.id)), item.image.data())?;
        let Some(ann) = &item.annotation else { return Ok(None) };
        let mask = rasterize_mask_polar(ann, side, nr, na)?;
        corpus::write_mask(&args.out, &item.id, &mask)?;
        raster::write_labels(&args.out.join(format!("{}{MASK_CART_SUFFIX}", item.id)), rasterize_mask(ann, side)?.data())?;
        Ok(Some((polar, mask)))
    })?;
    let pairs: Vec<_> = annotated.iter().flatten().map(|(i, m)| (i, m)).collect();
    let c = loaded.counts;
    println!(
        "ingested {} images ({} annotated); skipped {} unreadable images, rejected {} annotations",
        c.images, c.annotated, c.skipped_images, c.rejected_annotations
    );
    if !pairs.is_empty() {
        let cal = calibrate_region_means(&pairs)?;
        let echo = cal.to_echo_params(ctx.config.stage0.echo.lumen.spread);
        let text = format!(
            "# Region means measured on {} annotated images\n{}",
            cal.n_images,
            toml::to_string(&Calibration { stage0: CalibratedStage0 { echo } })?
        );
        fs::write(args.out.join("echo_calibration.toml"), text)?;
        ctx.manifest.output("echo_calibration", echo);
    }
    ctx.manifest.output("images", c.images);
    ctx.manifest.output("annotated", c.annotated);
    ctx.manifest.output("skipped_images", c.skipped_images);
    ctx.manifest.output("rejected_annotations", c.rejected_annotations);
    ctx.manifest.write(&args.out)?;
    Ok(())
}

fn ingest_synthetic(ctx: &mut Ctx, n: usize, args: IngestArgs) -> Result<()> {
    let (phantom, surrogate, seed) = (&ctx.config.phantom, &ctx.config.surrogate, ctx.seed);
    let ids: Vec<String> = (0..n).map(|i| format!("phantom{i:05}")).collect();
    par::map(ctx.jobs, &ids, |i, id| -> Result<()> {
        let s = item_seed(seed, i);
        let ph = synth_phantom(s, phantom)?;
        let img = render_surrogate(&ph.mask, surrogate, item_seed(s, 1))?;
        corpus::write_image(&args.out, id, &img)?;
        corpus::write_mask(&args.out, id, &ph.mask)
    })?;
    println!("synthesized {n} annotated phantoms in {}", args.out.display());
    ctx.manifest.output("images", n);
    ctx.manifest.output("annotated", n);
    ctx.manifest.write(&args.out)?;
    Ok(())
}

pub fn augment(ctx: &mut Ctx, args: AugmentArgs) -> Result<()> {
    ctx.manifest.input(&args.input)?;
    let maps = corpus::read_maps(&args.input)?;
    create(&args.out)?;
    let entries = par::map(ctx.jobs, &maps, |_, (id, mask)| -> Result<Vec<ManifestEntry>> {
        let mut entries = Vec::new();
        for v in augment_mask(mask).with_context(|| format!("augmenting {id}"))? {
            let vid = ManifestEntry::variant_id(id, v.rotation_step, v.radial_shift);
            corpus::write_mask(&args.out, &vid, &v.mask)?;
            entries.push(ManifestEntry {
                id: vid,
                source_id: id.clone(),
                rotation_step: v.rotation_step,
                radial_shift: v.radial_shift,
            });
        }
        Ok(entries)
    })?;
    let entries: Vec<ManifestEntry> = entries.into_iter().flatten().collect();
    fs::write(args.out.join("manifest.tsv"), format_manifest(&entries))?;
    println!("augmented {} masks into {} tissue maps", maps.len(), entries.len());
    ctx.manifest.output("masks", maps.len());
    ctx.manifest.output("tissue_maps", entries.len());
    ctx.manifest.write(&args.out)?;
    Ok(())
}

pub fn simulate_stage0(ctx: &mut Ctx, args: SimulateArgs) -> Result<()> {
    ctx.manifest.input(&args.maps)?;
    let maps = corpus::read_maps(&args.maps)?;
    create(&args.out)?;
    let (s0, seed) = (&ctx.config.stage0, ctx.seed);
    let rows = par::map(ctx.jobs, &maps, |i, (id, mask)| -> Result<String> {
        let (echo_seed, scatter_seed) = stage0_seeds(seed, i);
        let echo = mask_to_echogenicity(mask, &s0.echo, echo_seed)?;
        let img =
            bmode::simulate(&echo, &s0.psf, s0.dynamic_range_db, scatter_seed).with_context(|| format!("simulating {id}"))?;
        corpus::write_image(&args.out, id, &img)?;
        corpus::write_mask(&args.out, id, mask)?;
        Ok(format!(
            "{id}\t{echo_seed}\t{scatter_seed}\t{}\t{}\t{}\t{}\n",
            s0.psf.f0, s0.psf.sigma_axial, s0.psf.sigma_lateral, s0.dynamic_range_db
        ))
    })?;
    let mut table = String::from("id\techo_seed\tscatter_seed\tf0\tsigma_axial\tsigma_lateral\tdynamic_range_db\n");
    table.extend(rows);
    fs::write(args.out.join("stage0.tsv"), table)?;
    println!("simulated {} Stage 0 images in {}", maps.len(), args.out.display());
    ctx.manifest.output("images", maps.len());
    ctx.manifest.write(&args.out)?;
    Ok(())
}
