//! Region-wise speckle distributions, Jensen-Shannon divergence reports and
//! the visual Turing test harness.

pub mod pmf;
pub mod report;
pub mod vtt;

pub use pmf::{js_divergence, js_pmf, pooled_region_pmf, region_pmf, RegionPmf, N_BINS};
pub use report::{divergence_report, table1_report, table2_report, AnnotatedImage, DivergenceReport, Table1Row, Table2Row};
pub use vtt::{plan_vtt, score_counts, vtt_score, write_vtt, Side, VttManifest, VttPair, VttScore};
