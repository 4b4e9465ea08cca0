use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use ivus_core::eval::vtt::read_sides;
use ivus_core::eval::{divergence_report, plan_vtt, vtt_score as score, write_vtt, VttManifest, VttPair};
use ivus_core::imaging::polar_to_cartesian;
use ivus_core::CartesianImage;

use crate::config::RunConfig;
use crate::{corpus, par, Ctx};

#[derive(Debug, Clone)]
pub struct Source {
    label: String,
    dir: PathBuf,
}

fn parse_source(s: &str) -> Result<Source, String> {
    let (label, dir) = match s.split_once('=') {
        Some((l, d)) if !l.is_empty() => (l.to_string(), PathBuf::from(d)),
        _ => {
            let dir = PathBuf::from(s);
            let label = dir.file_name().map(|n| n.to_string_lossy().into_owned()).ok_or_else(|| format!("{s:?} has no name"))?;
            (label, dir)
        }
    };
    Ok(Source { label, dir })
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Annotated real corpus (images plus masks).
    #[arg(long)]
    real: PathBuf,
    /// Annotated simulated corpus as `LABEL=DIR` or `DIR`; repeatable.
    #[arg(long, required = true, value_parser = parse_source)]
    sim: Vec<Source>,
    /// Images sampled per corpus.
    #[arg(long)]
    n: Option<usize>,
    /// Receives `report.txt`, `table1.tsv` and `table2.tsv`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl EvaluateArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(n) = self.n {
            cfg.evaluate.n = n;
        }
    }
}

#[derive(Debug, Args)]
pub struct VttExportArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    sim: PathBuf,
    /// Number of real/simulated pairs.
    #[arg(long)]
    pairs: Option<usize>,
    /// Receives the pair images, `pairs.tsv` and `answer_key.tsv`.
    #[arg(long)]
    out: PathBuf,
}

impl VttExportArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(p) = self.pairs {
            cfg.evaluate.vtt_pairs = p;
        }
    }
}

#[derive(Debug, Args)]
pub struct VttScoreArgs {
    /// `answer_key.tsv` written by vtt-export.
    #[arg(long)]
    key: PathBuf,
    /// `pair_id<TAB>L|R` rows naming the side believed real, after a header row.
    #[arg(long)]
    responses: PathBuf,
    /// Defaults to the directory of the answer key.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn evaluate(ctx: &mut Ctx, args: EvaluateArgs) -> Result<()> {
    ctx.manifest.input(&args.real)?;
    let real = corpus::read_annotated(&args.real)?;
    let mut sims = Vec::with_capacity(args.sim.len());
    for s in &args.sim {
        ctx.manifest.input(&s.dir)?;
        sims.push((s.label.as_str(), corpus::read_annotated(&s.dir)?));
    }
    let sources: Vec<(&str, &[_])> = sims.iter().map(|(l, c)| (*l, c.as_slice())).collect();
    let report = divergence_report(&real, &sources, ctx.config.evaluate.n, ctx.seed)?;
    let text = report.to_text();
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("report.txt"), &text)?;
    fs::write(args.out.join("table1.tsv"), report.table1_tsv())?;
    fs::write(args.out.join("table2.tsv"), report.table2_tsv())?;
    print!("{text}");
    for row in &report.table1 {
        ctx.manifest.output(&format!("js/{}", row.label), row.js);
    }
    ctx.manifest.write(&args.out)?;
    Ok(())
}

fn cartesian(jobs: usize, dir: &Path, ids: &[&str], side: usize) -> Result<Vec<(String, CartesianImage)>> {
    par::map(jobs, ids, |_, id| -> Result<_> {
        let img = corpus::read_image(dir, id)?;
        Ok((id.to_string(), polar_to_cartesian(&img, side)?))
    })
}

pub fn vtt_export(ctx: &mut Ctx, args: VttExportArgs) -> Result<()> {
    ctx.manifest.input(&args.real)?;
    ctx.manifest.input(&args.sim)?;
    let real_ids = corpus::image_ids(&args.real)?;
    let sim_ids = corpus::image_ids(&args.sim)?;
    let plan = plan_vtt(real_ids.len(), sim_ids.len(), ctx.config.evaluate.vtt_pairs, ctx.seed)?;
    // Only the drawn images are scan converted; indices are remapped onto them.
    let side = ctx.config.evaluate.cartesian_side;
    let real_used: Vec<&str> = plan.pairs.iter().map(|p| real_ids[p.real_index].as_str()).collect();
    let sim_used: Vec<&str> = plan.pairs.iter().map(|p| sim_ids[p.sim_index].as_str()).collect();
    let real = cartesian(ctx.jobs, &args.real, &real_used, side)?;
    let sim = cartesian(ctx.jobs, &args.sim, &sim_used, side)?;
    let compact = VttManifest {
        pairs: plan.pairs.iter().enumerate().map(|(k, p)| VttPair { real_index: k, sim_index: k, ..p.clone() }).collect(),
        seed: plan.seed,
    };
    write_vtt(&args.out, &compact, &real, &sim)?;
    let left = plan.pairs.iter().filter(|p| p.real_side == ivus_core::eval::Side::Left).count();
    println!("exported {} pairs to {} (real shown left in {left})", plan.pairs.len(), args.out.display());
    ctx.manifest.output("pairs", plan.pairs.len());
    ctx.manifest.write(&args.out)?;
    Ok(())
}

pub fn vtt_score(ctx: &mut Ctx, args: VttScoreArgs) -> Result<()> {
    ctx.manifest.input(&args.key)?;
    ctx.manifest.input(&args.responses)?;
    let key = read_sides(&args.key)?;
    let responses = read_sides(&args.responses)?;
    let s = score(&key, &responses)?;
    let text = format!(
        "correct\t{}\ntotal\t{}\naccuracy\t{:.4}\nci95_low\t{:.4}\nci95_high\t{:.4}\n",
        s.correct, s.total, s.accuracy, s.ci_low, s.ci_high
    );
    let out = args.out.clone().unwrap_or_else(|| args.key.parent().map(Path::to_path_buf).unwrap_or_default());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("score.tsv"), &text)?;
    println!(
        "{} of {} real images identified: accuracy {:.4}, 95% CI [{:.4}, {:.4}]",
        s.correct, s.total, s.accuracy, s.ci_low, s.ci_high
    );
    ctx.manifest.output("accuracy", s.accuracy);
    ctx.manifest.output("ci95", [s.ci_low, s.ci_high]);
    ctx.manifest.write(&out)?;
    Ok(())
}
