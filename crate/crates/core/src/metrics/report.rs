use std::fmt::{self, Write as _};

use super::otsu::{binarize, otsu_threshold};
use super::similarity::{jaccard, mae_similarity, tanimoto};
use super::ssim::{ssim, SsimParams};
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Jaccard,
    Mae,
    Tanimoto,
    Ssim,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Jaccard, Measure::Mae, Measure::Tanimoto, Measure::Ssim];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Jaccard => "jaccard",
            Measure::Mae => "mae",
            Measure::Tanimoto => "tanimoto",
            Measure::Ssim => "ssim",
        }
    }

    pub fn parse(s: &str) -> Option<Measure> {
        Measure::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompareOptions {
    /// Binarize non-binary inputs with Otsu's threshold before Jaccard.
    pub otsu: bool,
    pub ssim: SsimParams,
}

/// Otsu threshold, then binarize, then Jaccard. Already-binary inputs pass
/// through unthresholded. Returns the thresholds applied alongside the score.
pub fn otsu_jaccard(a: &GrayImage, b: &GrayImage) -> Result<(f64, [Option<u16>; 2])> {
    let prep = |img: &GrayImage| -> Result<(GrayImage, Option<u16>)> {
        if img.is_binary() {
            return Ok((img.clone(), None));
        }
        let t = otsu_threshold(img)?;
        Ok((binarize(img, t), Some(t)))
    };
    let (ba, ta) = prep(a)?;
    let (bb, tb) = prep(b)?;
    Ok((jaccard(&ba, &bb)?, [ta, tb]))
}

pub fn measure(m: Measure, a: &GrayImage, b: &GrayImage, options: &CompareOptions) -> Result<f64> {
    match m {
        Measure::Jaccard if options.otsu => Ok(otsu_jaccard(a, b)?.0),
        Measure::Jaccard => jaccard(a, b),
        Measure::Mae => mae_similarity(a, b),
        Measure::Tanimoto => tanimoto(a, b),
        Measure::Ssim => ssim(a, b, options.ssim),
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-pair scores for a fixed list of measures.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub measures: Vec<Measure>,
    pub labels: Vec<String>,
    /// `rows[pair][measure]`.
    pub rows: Vec<Vec<f64>>,
}

impl MetricReport {
    pub fn evaluate(pairs: &[(String, GrayImage, GrayImage)], measures: &[Measure], options: &CompareOptions) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::invalid("no measures requested"));
        }
        let mut rows = Vec::with_capacity(pairs.len());
        for (_, a, b) in pairs {
            let row = measures
                .iter()
                .map(|&m| measure(m, a, b, options))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(MetricReport {
            measures: measures.to_vec(),
            labels: pairs.iter().map(|p| p.0.clone()).collect(),
            rows,
        })
    }

    pub fn column(&self, m: Measure) -> Option<Vec<f64>> {
        let i = self.measures.iter().position(|&x| x == m)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn aggregate(&self, m: Measure) -> Option<(f64, f64)> {
        self.column(m).map(|c| mean_std(&c))
    }

    /// `pair,<measure>...` rows, then `mean` and `std` footer rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pair");
        for m in &self.measures {
            write!(s, ",{m}").unwrap();
        }
        s.push('\n');
        for (label, row) in self.labels.iter().zip(&self.rows) {
            s.push_str(label);
            for v in row {
                write!(s, ",{v:.6}").unwrap();
            }
            s.push('\n');
        }
        for (name, pick) in [("mean", 0), ("std", 1)] {
            s.push_str(name);
            for &m in &self.measures {
                let (mean, std) = self.aggregate(m).expect("listed measure");
                write!(s, ",{:.6}", if pick == 0 { mean } else { std }).unwrap();
            }
            s.push('\n');
        }
        s
    }
}
