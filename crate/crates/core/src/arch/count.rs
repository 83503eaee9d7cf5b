//! Symbolic parameter counting and the convention reconciliation sweep.

use super::build::ArchBuilder;
use super::convention::{CountConvention, NormCounting};
use super::graph::{Architecture, GraphSpec, LayerOp};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerRow {
    pub path: String,
    pub kind: &'static str,
    pub trainable: u64,
    pub moving: u64,
}

impl LedgerRow {
    pub fn total(&self) -> u64 {
        self.trainable + self.moving
    }
}

/// Per-layer counts for every layer that owns values, in construction order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLedger {
    pub rows: Vec<LedgerRow>,
    pub counting: NormCounting,
}

impl ParamLedger {
    pub fn total(&self) -> u64 {
        self.rows.iter().map(LedgerRow::total).sum()
    }

    pub fn trainable(&self) -> u64 {
        self.rows.iter().map(|r| r.trainable).sum()
    }
}

/// `(trainable, moving)` value counts of one layer given its input channels.
pub fn layer_params(op: &LayerOp, in_channels: usize, counting: NormCounting) -> (u64, u64) {
    let c = in_channels as u64;
    match *op {
        LayerOp::Conv { kernel, filters, bias } => {
            let f = filters as u64;
            ((kernel * kernel) as u64 * c * f + if bias { f } else { 0 }, 0)
        }
        LayerOp::ConvTranspose { filters, bias } => {
            let f = filters as u64;
            (4 * c * f + if bias { f } else { 0 }, 0)
        }
        LayerOp::BatchNorm { scale } => {
            let trainable = if scale { 2 * c } else { c };
            match counting {
                NormCounting::Excluded => (0, 0),
                NormCounting::TrainableOnly => (trainable, 0),
                NormCounting::TrainableAndMoving => (trainable, 2 * c),
            }
        }
        _ => (0, 0),
    }
}

pub fn count_params(spec: &GraphSpec, counting: NormCounting) -> Result<ParamLedger> {
    let channels = spec.channels()?;
    let rows = spec
        .layers
        .iter()
        .filter_map(|layer| {
            let cin = layer.inputs.first().map_or(0, |&j| channels[j]);
            let (trainable, moving) = layer_params(&layer.op, cin, counting);
            (trainable + moving > 0).then(|| LedgerRow {
                path: layer.path.clone(),
                kind: layer.op.kind(),
                trainable,
                moving,
            })
        })
        .collect();
    Ok(ParamLedger { rows, counting })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub convention: CountConvention,
    /// Totals in `Architecture::ALL` order.
    pub totals: [u64; 3],
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub entries: Vec<SweepEntry>,
    pub best: usize,
}

impl Sweep {
    pub fn best(&self) -> &SweepEntry {
        &self.entries[self.best]
    }
}

pub fn relative_error(total: u64, target: u64) -> f64 {
    (total as f64 - target as f64).abs() / target as f64
}

/// Counts the published configurations under every convention. The best
/// entry minimises the worst relative error over the three models; ties keep
/// the earlier entry.
pub fn sweep_conventions(base: &ArchBuilder) -> Result<Sweep> {
    let mut entries = Vec::new();
    for convention in CountConvention::all() {
        let builder = ArchBuilder {
            convention: convention.structure,
            ..*base
        };
        let mut totals = [0u64; 3];
        for (t, arch) in totals.iter_mut().zip(Architecture::ALL) {
            *t = count_params(&builder.reference(arch)?, convention.counting)?.total();
        }
        let max_rel_error = totals
            .iter()
            .zip(Architecture::ALL)
            .map(|(&t, a)| relative_error(t, a.published_total()))
            .fold(0.0, f64::max);
        entries.push(SweepEntry {
            convention,
            totals,
            max_rel_error,
        });
    }
    let best = entries
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.max_rel_error.total_cmp(&b.1.max_rel_error).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("sweep is never empty");
    Ok(Sweep { entries, best })
}
