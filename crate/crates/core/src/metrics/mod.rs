//! Similarity measures between predicted and reference masks.

mod otsu;
mod report;
mod robustness;
mod similarity;
mod ssim;

pub use otsu::{binarize, otsu_threshold};
pub use report::{mean_std, measure, otsu_jaccard, CompareOptions, Measure, MetricReport};
pub use robustness::{margins, robustness_experiment, RobustnessRow, RobustnessTable};
pub use similarity::{jaccard, mae_similarity, tanimoto};
pub use ssim::{ssim, SsimParams};
