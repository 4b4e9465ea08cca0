//! Visual Turing test harness: builds randomized real/simulated pairs,
//! writes them for presentation with the truth kept in a separate answer
//! key, and scores rater responses.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{s, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::CartesianImage;
use crate::raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "L",
            Side::Right => "R",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L" | "LEFT" => Some(Side::Left),
            "R" | "RIGHT" => Some(Side::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VttPair {
    pub pair_id: usize,
    pub real_index: usize,
    pub sim_index: usize,
    pub real_side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VttManifest {
    pub pairs: Vec<VttPair>,
    pub seed: u64,
}

/// Draws `n_pairs` distinct real and distinct simulated images and a fair
/// coin per pair for the side the real image is shown on.
pub fn plan_vtt(n_real: usize, n_sim: usize, n_pairs: usize, seed: u64) -> Result<VttManifest> {
    if n_pairs == 0 || n_real < n_pairs || n_sim < n_pairs {
        return Err(Error::Param(format!("{n_pairs} pairs need as many real ({n_real}) and simulated ({n_sim}) images")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = sample(&mut rng, n_real, n_pairs).into_vec();
    let sim = sample(&mut rng, n_sim, n_pairs).into_vec();
    let pairs = real
        .into_iter()
        .zip(sim)
        .enumerate()
        .map(|(pair_id, (real_index, sim_index))| VttPair {
            pair_id,
            real_index,
            sim_index,
            real_side: if rng.random_bool(0.5) { Side::Left } else { Side::Right },
        })
        .collect();
    Ok(VttManifest { pairs, seed })
}

pub fn pair_file_name(pair_id: usize) -> String {
    format!("pair_{pair_id:03}.png")
}

fn side_by_side(left: &Array2<f64>, right: &Array2<f64>, gap: usize) -> Array2<f64> {
    let h = left.nrows().max(right.nrows());
    let mut out = Array2::zeros((h, left.ncols() + gap + right.ncols()));
    out.slice_mut(s![..left.nrows(), ..left.ncols()]).assign(left);
    let x0 = left.ncols() + gap;
    out.slice_mut(s![..right.nrows(), x0..x0 + right.ncols()]).assign(right);
    out
}

/// Writes one composite image per pair, `pairs.tsv` (what raters see) and
/// `answer_key.tsv` (truth and provenance).
pub fn write_vtt(
    dir: &Path,
    manifest: &VttManifest,
    real: &[(String, CartesianImage)],
    sim: &[(String, CartesianImage)],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut listing = String::from("pair_id\tfile\n");
    let mut key = String::from("pair_id\treal_side\treal_id\tsim_id\n");
    for p in &manifest.pairs {
        let (real_id, real_img) = real.get(p.real_index).ok_or_else(|| Error::Param("real index out of range".into()))?;
        let (sim_id, sim_img) = sim.get(p.sim_index).ok_or_else(|| Error::Param("sim index out of range".into()))?;
        let (left, right) = match p.real_side {
            Side::Left => (real_img, sim_img),
            Side::Right => (sim_img, real_img),
        };
        let name = pair_file_name(p.pair_id);
        raster::write_gray(&dir.join(&name), &side_by_side(left.data(), right.data(), 8))?;
        let _ = writeln!(listing, "{}\t{}", p.pair_id, name);
        let _ = writeln!(key, "{}\t{}\t{}\t{}", p.pair_id, p.real_side.as_str(), real_id, sim_id);
    }
    write(dir.join("pairs.tsv"), &listing)?;
    write(dir.join("answer_key.tsv"), &key)
}

fn write(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads `pair_id <tab> side` rows (first row is a header).
pub fn read_sides(path: &Path) -> Result<Vec<(usize, Side)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let bad = || Error::format(path, format!("line {}: expected `pair_id<TAB>L|R`, got {line:?}", i + 1));
        let id = f.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let side = f.next().and_then(Side::parse).ok_or_else(bad)?;
        out.push((id, side));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VttScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// 95 % Wilson score interval.
pub fn wilson_interval(correct: usize, total: usize) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    let n = total as f64;
    let p = correct as f64 / n;
    let z2 = Z * Z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn score_counts(correct: usize, total: usize) -> Result<VttScore> {
    if total == 0 || correct > total {
        return Err(Error::Param(format!("invalid tally {correct}/{total}")));
    }
    let (ci_low, ci_high) = wilson_interval(correct, total);
    Ok(VttScore { correct, total, accuracy: correct as f64 / total as f64, ci_low, ci_high })
}

/// Scores responses against the answer key; every pair must be answered
/// exactly once.
pub fn vtt_score(key: &[(usize, Side)], responses: &[(usize, Side)]) -> Result<VttScore> {
    if key.len() != responses.len() {
        return Err(Error::Param(format!("{} responses for {} pairs", responses.len(), key.len())));
    }
    let mut correct = 0;
    for (id, truth) in key {
        let mut answers = responses.iter().filter(|(r, _)| r == id);
        let (Some((_, answer)), None) = (answers.next(), answers.next()) else {
            return Err(Error::Param(format!("pair {id} must be answered exactly once")));
        };
        correct += (answer == truth) as usize;
    }
    score_counts(correct, key.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_tally() {
        let s = score_counts(147, 260).unwrap();
        assert!((s.accuracy - 0.5654).abs() < 5e-5);
        assert!(s.ci_low < 0.5654 && s.ci_high > 0.5654);
        assert!(s.ci_low > 0.50 && s.ci_high < 0.63);
    }

    #[test]
    fn all_correct() {
        let key: Vec<_> = (0..20).map(|i| (i, if i % 3 == 0 { Side::Left } else { Side::Right })).collect();
        let s = vtt_score(&key, &key).unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert_eq!(s.ci_high, 1.0);
    }

    #[test]
    fn response_count_mismatch() {
        let key = vec![(0, Side::Left), (1, Side::Right)];
        assert!(vtt_score(&key, &key[..1]).is_err());
        assert!(vtt_score(&key, &[(0, Side::Left), (0, Side::Right)]).is_err());
    }

    #[test]
    fn plan_uses_distinct_images() {
        let m = plan_vtt(150, 300, 20, 3).unwrap();
        assert_eq!(m.pairs.len(), 20);
        let mut r: Vec<_> = m.pairs.iter().map(|p| p.real_index).collect();
        r.sort();
        r.dedup();
        assert_eq!(r.len(), 20);
        assert!(plan_vtt(10, 300, 20, 3).is_err());
    }
}
