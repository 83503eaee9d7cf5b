use std::fmt::Write as _;

use super::convention::NormCounting;
use super::count::layer_params;
use super::graph::GraphSpec;
use crate::error::Result;

/// Human-readable table, one row per layer in construction order. Output
/// shapes are for a single image at the spec's nominal resolution.
pub fn summarize(spec: &GraphSpec) -> Result<String> {
    summarize_with(spec, NormCounting::TrainableAndMoving)
}

pub fn summarize_with(spec: &GraphSpec, counting: NormCounting) -> Result<String> {
    let channels = spec.channels()?;
    let shapes = if spec.layers.is_empty() {
        Vec::new()
    } else {
        let (h, w) = spec.input_hw;
        spec.infer_shapes(1, h, w)?
    };
    let params: Vec<u64> = spec
        .layers
        .iter()
        .map(|l| {
            let cin = l.inputs.first().map_or(0, |&j| channels[j]);
            let (t, m) = layer_params(&l.op, cin, counting);
            t + m
        })
        .collect();
    let total: u64 = params.iter().sum();

    let mut s = String::new();
    writeln!(s, "model: {}", spec.name).unwrap();
    writeln!(s, "convention: {} {counting}", spec.convention).unwrap();
    writeln!(s, "total params: {total}").unwrap();
    writeln!(s, "{:<32} {:<15} {:>6} {:>8} {:>10}  output", "path", "kind", "kernel", "filters", "params").unwrap();
    for (i, layer) in spec.layers.iter().enumerate() {
        let kernel = layer.op.kernel().map_or("-".to_string(), |k| format!("{k}x{k}"));
        writeln!(
            s,
            "{:<32} {:<15} {:>6} {:>8} {:>10}  {}",
            layer.path,
            layer.op.kind(),
            kernel,
            channels[i],
            params[i],
            shapes[i]
        )
        .unwrap();
    }
    Ok(s)
}
