//! Region-wise speckle-distribution comparisons shaped like the two
//! divergence tables: per-class real-vs-simulated divergence, and pairwise
//! class divergence within one image source.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::pmf::{js_pmf, pooled_region_pmf, RegionPmf};
use crate::dataset::TissueLabelMask;
use crate::error::{Error, Result};
use crate::imaging::{PolarImage, TissueClass};

/// An image with the tissue mask that labels it.
#[derive(Debug, Clone)]
pub struct AnnotatedImage {
    pub id: String,
    pub image: PolarImage,
    pub mask: TissueLabelMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub label: String,
    /// lumen, media, externa
    pub js: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub label: String,
    /// lumen-media, media-externa, lumen-externa
    pub js: [f64; 3],
}

pub const PAIRS: [(TissueClass, TissueClass); 3] = [
    (TissueClass::Lumen, TissueClass::Media),
    (TissueClass::Media, TissueClass::Externa),
    (TissueClass::Lumen, TissueClass::Externa),
];

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub table1: Vec<Table1Row>,
    pub table2: Vec<Table2Row>,
    pub n_images: usize,
    pub seed: u64,
}

fn pick<'a>(corpus: &'a [AnnotatedImage], n: usize, rng: &mut ChaCha8Rng, label: &str) -> Result<Vec<&'a AnnotatedImage>> {
    if n == 0 || corpus.len() < n {
        return Err(Error::Param(format!("{label}: need {n} annotated images, have {}", corpus.len())));
    }
    let mut idx = sample(rng, corpus.len(), n).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| &corpus[i]).collect())
}

fn class_pmfs(items: &[&AnnotatedImage]) -> Result<[RegionPmf; 3]> {
    let pmf = |c| pooled_region_pmf(items.iter().map(|a| (&a.image, &a.mask)), c);
    Ok([pmf(TissueClass::Lumen)?, pmf(TissueClass::Media)?, pmf(TissueClass::Externa)?])
}

/// Samples `n` images from each corpus (one seeded stream, real first, then
/// the simulated sources in order), pools region pixels per class and
/// reports JS(real, simulated) per class for every simulated source.
pub fn table1_report(
    real: &[AnnotatedImage],
    simulated: &[(&str, &[AnnotatedImage])],
    n: usize,
    seed: u64,
) -> Result<Vec<Table1Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real_pmfs = class_pmfs(&pick(real, n, &mut rng, "real")?)?;
    let mut rows = Vec::with_capacity(simulated.len());
    for (label, corpus) in simulated {
        let sim_pmfs = class_pmfs(&pick(corpus, n, &mut rng, label)?)?;
        let mut js = [0.0; 3];
        for k in 0..3 {
            js[k] = js_pmf(&real_pmfs[k], &sim_pmfs[k])?;
        }
        rows.push(Table1Row { label: label.to_string(), js });
    }
    Ok(rows)
}

/// Pairwise class divergences within each source.
pub fn table2_report(sources: &[(&str, &[AnnotatedImage])], n: usize, seed: u64) -> Result<Vec<Table2Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(sources.len());
    for (label, corpus) in sources {
        let pmfs = class_pmfs(&pick(corpus, n, &mut rng, label)?)?;
        let mut js = [0.0; 3];
        for (k, (a, b)) in PAIRS.iter().enumerate() {
            js[k] = js_pmf(&pmfs[a.index()], &pmfs[b.index()])?;
        }
        rows.push(Table2Row { label: label.to_string(), js });
    }
    Ok(rows)
}

/// Runs both tables. The tissue-pair table lists the real corpus first,
/// then every simulated source.
pub fn divergence_report(
    real: &[AnnotatedImage],
    simulated: &[(&str, &[AnnotatedImage])],
    n: usize,
    seed: u64,
) -> Result<DivergenceReport> {
    let table1 = table1_report(real, simulated, n, seed)?;
    let mut sources: Vec<(&str, &[AnnotatedImage])> = vec![("Real", real)];
    sources.extend_from_slice(simulated);
    let table2 = table2_report(&sources, n, seed)?;
    Ok(DivergenceReport { table1, table2, n_images: n, seed })
}

impl DivergenceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# JS divergence (log base 2), region pixels pooled over {} images per source, seed {}",
            self.n_images, self.seed
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "Simulated vs. real, per region");
        let _ = writeln!(s, "{:<16}|{:>9} |{:>9} |{:>9} ", "", "lumen", "media", "externa");
        for r in &self.table1 {
            let _ = writeln!(s, "{:<16}|{:>9.4} |{:>9.4} |{:>9.4} ", r.label, r.js[0], r.js[1], r.js[2]);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Between tissue types");
        let _ = writeln!(s, "{:<16}|{:>12} |{:>12} |{:>12} ", "", "lumen-media", "media-ext.", "lumen-ext.");
        for r in &self.table2 {
            let _ = writeln!(s, "{:<16}|{:>12.4} |{:>12.4} |{:>12.4} ", r.label, r.js[0], r.js[1], r.js[2]);
        }
        s
    }

    pub fn table1_tsv(&self) -> String {
        let mut s = String::from("source\tlumen\tmedia\texterna\n");
        for r in &self.table1 {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", r.label, r.js[0], r.js[1], r.js[2]);
        }
        s
    }

    pub fn table2_tsv(&self) -> String {
        let mut s = String::from("source\tlumen_media\tmedia_externa\tlumen_externa\n");
        for r in &self.table2 {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", r.label, r.js[0], r.js[1], r.js[2]);
        }
        s
    }
}
