//! How each measure responds to shrinking images and to growing blank margins.

use std::fmt::Write as _;

use super::otsu::{binarize, otsu_threshold};
use super::report::{mean_std, Measure};
use super::similarity::{jaccard, mae_similarity, tanimoto};
use super::ssim::{ssim, SsimParams};
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessRow {
    pub measure: Measure,
    /// Down-sampling factor (1 keeps the original size).
    pub size: usize,
    /// Canvas side relative to the (down-sampled) image; 1 adds no margin.
    pub ratio: f64,
    pub pair: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessTable {
    pub rows: Vec<RobustnessRow>,
}

/// Otsu-binarized view used for Jaccard. Binary images pass through and a
/// constant image is cut at half its range.
fn binary_view(img: &GrayImage) -> GrayImage {
    if img.is_binary() {
        return img.clone();
    }
    let t = otsu_threshold(img).unwrap_or(img.depth().max_value() / 2);
    binarize(img, t)
}

pub fn margins(img: &GrayImage, ratio: f64) -> (usize, usize) {
    let m = |side: usize| ((ratio - 1.0) * side as f64 / 2.0).round() as usize;
    (m(img.width()), m(img.height()))
}

/// Evaluates every measure for every `(size, ratio, pair)`. Rows are ordered
/// by measure, size, ratio, then pair.
pub fn robustness_experiment(pairs: &[(GrayImage, GrayImage)], sizes: &[usize], ratios: &[f64]) -> Result<RobustnessTable> {
    if let Some(r) = ratios.iter().find(|r| !(**r >= 1.0 && r.is_finite())) {
        return Err(Error::invalid(format!("ratios must be finite and ≥ 1, got {r}")));
    }
    let mut cells: Vec<RobustnessRow> = Vec::new();
    for &size in sizes {
        for &ratio in ratios {
            for (p, (a, b)) in pairs.iter().enumerate() {
                let (a, b) = (a.downsample(size)?, b.downsample(size)?);
                if !a.same_size(&b) {
                    return Err(Error::shape(
                        "robustness pair",
                        format!("{}×{}", a.width(), a.height()),
                        format!("{}×{}", b.width(), b.height()),
                    ));
                }
                let (mx, my) = margins(&a, ratio);
                let (a, b) = (a.pad(mx, my), b.pad(mx, my));
                let window = SsimParams::default().window.min(a.width()).min(a.height());
                let params = SsimParams {
                    window,
                    ..SsimParams::default()
                };
                for m in Measure::ALL {
                    let value = match m {
                        Measure::Jaccard => jaccard(&binary_view(&a), &binary_view(&b))?,
                        Measure::Mae => mae_similarity(&a, &b)?,
                        Measure::Tanimoto => tanimoto(&a, &b)?,
                        Measure::Ssim => ssim(&a, &b, params)?,
                    };
                    cells.push(RobustnessRow {
                        measure: m,
                        size,
                        ratio,
                        pair: p,
                        value,
                    });
                }
            }
        }
    }
    cells.sort_by_key(|r| r.measure);
    let table = RobustnessTable { rows: cells };
    let spread = table.max_ratio_spread(Measure::Tanimoto);
    if spread != 0.0 {
        return Err(Error::Numeric(format!("tanimoto varied across ratios by {spread}")));
    }
    Ok(table)
}

impl RobustnessTable {
    /// Values of one measure across ratios for a fixed size and pair.
    pub fn ratio_series(&self, measure: Measure, size: usize, pair: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.measure == measure && r.size == size && r.pair == pair)
            .map(|r| (r.ratio, r.value))
            .collect()
    }

    /// Largest max − min of a ratio series over all sizes and pairs.
    pub fn max_ratio_spread(&self, measure: Measure) -> f64 {
        let mut keys: Vec<(usize, usize)> = self.rows.iter().map(|r| (r.size, r.pair)).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter()
            .map(|(s, p)| {
                let v: Vec<f64> = self.ratio_series(measure, s, p).into_iter().map(|x| x.1).collect();
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                if v.is_empty() {
                    0.0
                } else {
                    max - min
                }
            })
            .fold(0.0, f64::max)
    }

    /// `measure,size,ratio,pair,value` rows followed by `#`-prefixed
    /// aggregate lines: mean, sample std and the largest ratio spread.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("measure,size,ratio,pair,value\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{},{:.6}", r.measure, r.size, r.ratio, r.pair, r.value).unwrap();
        }
        s.push_str("# measure,mean,std,max_ratio_spread\n");
        for m in Measure::ALL {
            let v: Vec<f64> = self.rows.iter().filter(|r| r.measure == m).map(|r| r.value).collect();
            if v.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&v);
            writeln!(s, "# {m},{mean:.6},{std:.6},{:.6}", self.max_ratio_spread(m)).unwrap();
        }
        s
    }
}
