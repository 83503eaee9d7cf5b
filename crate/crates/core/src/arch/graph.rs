//! Declarative layer graphs.

use std::fmt::{self, Write as _};

use super::convention::Convention;
use super::schedule::FilterSchedule;
use crate::error::{Error, Result};
use crate::tensor::Shape;

/// Spatial extents must be divisible by this (four 2×2 poolings).
pub const SPATIAL_DIVISOR: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    UNet,
    MultiResUNet,
    DcUNet,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::UNet, Architecture::MultiResUNet, Architecture::DcUNet];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::UNet => "unet",
            Architecture::MultiResUNet => "multires",
            Architecture::DcUNet => "dcunet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Architecture::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Per-stage base filter counts of the published configuration.
    pub fn reference_filters(self) -> [usize; 5] {
        match self {
            Architecture::UNet | Architecture::MultiResUNet => [64, 128, 256, 512, 1024],
            Architecture::DcUNet => [32, 64, 128, 256, 512],
        }
    }

    /// Published total parameter count of the reference configuration.
    pub fn published_total(self) -> u64 {
        match self {
            Architecture::UNet => 31_031_685,
            Architecture::MultiResUNet => 29_061_741,
            Architecture::DcUNet => 10_069_640,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::UNet => "U-Net",
            Architecture::MultiResUNet => "MultiResUNet",
            Architecture::DcUNet => "DC-UNet",
        })
    }
}

/// One primitive layer. Convolutions use same padding and stride 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerOp {
    Input { channels: usize },
    Conv { kernel: usize, filters: usize, bias: bool },
    /// 2×2 kernel, stride 2.
    ConvTranspose { filters: usize, bias: bool },
    BatchNorm { scale: bool },
    Relu,
    Sigmoid,
    MaxPool,
    Concat,
    Add,
}

impl LayerOp {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerOp::Input { .. } => "input",
            LayerOp::Conv { .. } => "conv",
            LayerOp::ConvTranspose { .. } => "conv_transpose",
            LayerOp::BatchNorm { .. } => "batchnorm",
            LayerOp::Relu => "relu",
            LayerOp::Sigmoid => "sigmoid",
            LayerOp::MaxPool => "maxpool",
            LayerOp::Concat => "concat",
            LayerOp::Add => "add",
        }
    }

    pub fn kernel(&self) -> Option<usize> {
        match self {
            LayerOp::Conv { kernel, .. } => Some(*kernel),
            LayerOp::ConvTranspose { .. } | LayerOp::MaxPool => Some(2),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    /// Deterministic slash-separated path, unique within the graph.
    pub path: String,
    pub op: LayerOp,
    /// Indices of earlier layers.
    pub inputs: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    ConvPair,
    MultiRes,
    DualChannel,
    ResPath,
    Down,
    Up,
    Head,
}

/// Block-level description, kept alongside the flat layer list.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub kind: BlockKind,
    /// Widths of the block's convolutions in construction order.
    pub filters: Vec<usize>,
    pub schedule: Option<FilterSchedule>,
    /// Number of residual units (Res-Paths only).
    pub length: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphSpec {
    pub name: String,
    pub architecture: Option<Architecture>,
    pub convention: Convention,
    pub layers: Vec<LayerSpec>,
    pub blocks: Vec<BlockSpec>,
    /// Nominal `(H, W)` used by summaries.
    pub input_hw: (usize, usize),
}

impl GraphSpec {
    pub fn empty(name: impl Into<String>) -> Self {
        GraphSpec {
            name: name.into(),
            architecture: None,
            convention: Convention::reference(),
            layers: Vec::new(),
            blocks: Vec::new(),
            input_hw: (256, 128),
        }
    }

    pub fn in_channels(&self) -> Option<usize> {
        match self.layers.first()?.op {
            LayerOp::Input { channels } => Some(channels),
            _ => None,
        }
    }

    pub fn layer(&self, path: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.path == path)
    }

    pub fn block(&self, name: &str) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Output channel count of every layer, validating the graph structure
    /// along the way.
    pub fn channels(&self) -> Result<Vec<usize>> {
        let mut out: Vec<usize> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            if let Some(&bad) = layer.inputs.iter().find(|&&j| j >= i) {
                return Err(Error::Graph(format!("{} reads layer {bad}, which is not earlier", layer.path)));
            }
            let ins: Vec<usize> = layer.inputs.iter().map(|&j| out[j]).collect();
            let arity = |n: usize| -> Result<()> {
                if ins.len() == n {
                    Ok(())
                } else {
                    Err(Error::Graph(format!("{} expects {n} input(s), got {}", layer.path, ins.len())))
                }
            };
            let c = match layer.op {
                LayerOp::Input { channels } => {
                    if i != 0 {
                        return Err(Error::Graph(format!("{} is an input but not the first layer", layer.path)));
                    }
                    arity(0)?;
                    channels
                }
                LayerOp::Conv { filters, .. } | LayerOp::ConvTranspose { filters, .. } => {
                    arity(1)?;
                    filters
                }
                LayerOp::BatchNorm { .. } | LayerOp::Relu | LayerOp::Sigmoid | LayerOp::MaxPool => {
                    arity(1)?;
                    ins[0]
                }
                LayerOp::Concat => {
                    if ins.is_empty() {
                        return Err(Error::Graph(format!("{} concatenates nothing", layer.path)));
                    }
                    ins.iter().sum()
                }
                LayerOp::Add => {
                    arity(2)?;
                    if ins[0] != ins[1] {
                        return Err(Error::shape("add", format!("{} channels", ins[0]), format!("{} channels", ins[1])));
                    }
                    ins[0]
                }
            };
            out.push(c);
        }
        Ok(out)
    }

    /// Full output shape of every layer for an `n × C_in × h × w` input.
    pub fn infer_shapes(&self, n: usize, h: usize, w: usize) -> Result<Vec<Shape>> {
        check_spatial(h, w)?;
        let channels = self.channels()?;
        let mut out: Vec<Shape> = Vec::with_capacity(self.layers.len());
        for (layer, &c) in self.layers.iter().zip(&channels) {
            let s = match layer.op {
                LayerOp::Input { .. } => Shape::new(n, c, h, w),
                LayerOp::MaxPool => {
                    let x = out[layer.inputs[0]];
                    if !x.h.is_multiple_of(2) || !x.w.is_multiple_of(2) {
                        return Err(Error::invalid(format!("{}: cannot pool {x}", layer.path)));
                    }
                    Shape::new(n, c, x.h / 2, x.w / 2)
                }
                LayerOp::ConvTranspose { .. } => {
                    let x = out[layer.inputs[0]];
                    Shape::new(n, c, x.h * 2, x.w * 2)
                }
                LayerOp::Concat | LayerOp::Add => {
                    let first = out[layer.inputs[0]];
                    for &j in &layer.inputs[1..] {
                        if (out[j].h, out[j].w) != (first.h, first.w) {
                            return Err(Error::shape(layer.op.kind(), first, out[j]));
                        }
                    }
                    Shape::new(n, c, first.h, first.w)
                }
                _ => {
                    let x = out[layer.inputs[0]];
                    Shape::new(n, c, x.h, x.w)
                }
            };
            out.push(s);
        }
        Ok(out)
    }

    /// One line per layer: path, kind, attributes, inputs, output filters.
    pub fn to_text(&self) -> Result<String> {
        let channels = self.channels()?;
        let mut s = String::new();
        for (layer, c) in self.layers.iter().zip(channels) {
            let attrs = match layer.op {
                LayerOp::Conv { kernel, bias, .. } => format!(" k={kernel}x{kernel} bias={bias}"),
                LayerOp::ConvTranspose { bias, .. } => format!(" k=2x2 stride=2 bias={bias}"),
                LayerOp::BatchNorm { scale } => format!(" scale={scale}"),
                LayerOp::MaxPool => " k=2x2 stride=2".to_string(),
                _ => String::new(),
            };
            let inputs: Vec<String> = layer.inputs.iter().map(|&j| self.layers[j].path.clone()).collect();
            writeln!(
                s,
                "{} {}{} in=[{}] filters={c}",
                layer.path,
                layer.op.kind(),
                attrs,
                inputs.join(",")
            )
            .expect("write to string");
        }
        Ok(s)
    }
}

pub fn check_spatial(h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 || !h.is_multiple_of(SPATIAL_DIVISOR) || !w.is_multiple_of(SPATIAL_DIVISOR) {
        return Err(Error::invalid(format!(
            "input {h}×{w} rejected: height and width must be positive multiples of {SPATIAL_DIVISOR}"
        )));
    }
    Ok(())
}
