//! Construction of the three encoder/decoder networks as flat layer graphs.

use super::convention::Convention;
use super::graph::{Architecture, BlockKind, BlockSpec, GraphSpec, LayerOp, LayerSpec};
use super::schedule::{filter_schedule, DEFAULT_ALPHA};
use crate::error::{Error, Result};

/// Res-Path lengths from the shallowest skip to the deepest.
pub const RESPATH_LENGTHS: [usize; 4] = [4, 3, 2, 1];

/// Output head of the classical U-Net.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum UNetHead {
    /// 1×1 convolution straight to one channel.
    Direct,
    /// 3×3 convolution to two channels with ReLU, then the 1×1 sigmoid.
    #[default]
    TwoChannel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArchBuilder {
    pub convention: Convention,
    pub alpha: f64,
    pub unet_head: UNetHead,
}

impl Default for ArchBuilder {
    fn default() -> Self {
        ArchBuilder {
            convention: Convention::reference(),
            alpha: DEFAULT_ALPHA,
            unet_head: UNetHead::default(),
        }
    }
}

impl ArchBuilder {
    pub fn with_convention(convention: Convention) -> Self {
        ArchBuilder {
            convention,
            ..ArchBuilder::default()
        }
    }

    pub fn build(&self, arch: Architecture, filters: &[usize], in_channels: usize) -> Result<GraphSpec> {
        match arch {
            Architecture::UNet => self.unet(filters, in_channels),
            Architecture::MultiResUNet => self.multires(filters, in_channels, false),
            Architecture::DcUNet => self.multires(filters, in_channels, true),
        }
    }

    /// The published configuration of `arch` with one input channel.
    pub fn reference(&self, arch: Architecture) -> Result<GraphSpec> {
        self.build(arch, &arch.reference_filters(), 1)
    }

    fn unet(&self, filters: &[usize], in_channels: usize) -> Result<GraphSpec> {
        let f = check_filters(filters)?;
        let mut g = Graph::new(Architecture::UNet, self.convention, in_channels)?;
        let bias = self.convention.conv_bias(false);
        let mut x = 0;
        let mut skips = Vec::new();
        for (i, &u) in f.iter().enumerate() {
            let name = format!("block{}", i + 1);
            x = g.plain_conv(&format!("{name}/conv1"), x, 3, u, bias);
            x = g.plain_conv(&format!("{name}/conv2"), x, 3, u, bias);
            g.block(&name, BlockKind::ConvPair, vec![u, u], None);
            if i < 4 {
                skips.push(x);
                x = g.push(format!("pool{}", i + 1), LayerOp::MaxPool, vec![x]);
            }
        }
        for i in (0..4).rev() {
            let stage = 9 - i;
            let up = g.push(
                format!("up{stage}/convT"),
                LayerOp::ConvTranspose { filters: f[i], bias },
                vec![x],
            );
            g.block(&format!("up{stage}"), BlockKind::Up, vec![f[i]], None);
            x = g.push(format!("up{stage}/concat"), LayerOp::Concat, vec![up, skips[i]]);
            let name = format!("block{stage}");
            x = g.plain_conv(&format!("{name}/conv1"), x, 3, f[i], bias);
            x = g.plain_conv(&format!("{name}/conv2"), x, 3, f[i], bias);
            g.block(&name, BlockKind::ConvPair, vec![f[i], f[i]], None);
        }
        let head = match self.unet_head {
            UNetHead::Direct => vec![1],
            UNetHead::TwoChannel => {
                x = g.plain_conv("head/conv", x, 3, 2, bias);
                vec![2, 1]
            }
        };
        x = g.push("head/out".into(), LayerOp::Conv { kernel: 1, filters: 1, bias }, vec![x]);
        g.push("head/sigmoid".into(), LayerOp::Sigmoid, vec![x]);
        g.block("head", BlockKind::Head, head, None);
        Ok(g.finish())
    }

    fn multires(&self, filters: &[usize], in_channels: usize, dual: bool) -> Result<GraphSpec> {
        let u = check_filters(filters)?;
        let arch = if dual {
            Architecture::DcUNet
        } else {
            Architecture::MultiResUNet
        };
        let mut g = Graph::new(arch, self.convention, in_channels)?;
        let mut x = 0;
        let mut skips = Vec::new();
        for i in 0..5 {
            x = self.resolution_block(&mut g, &format!("block{}", i + 1), x, u[i], dual)?;
            if i < 4 {
                let skip = self.respath(&mut g, i, x, u[i]);
                skips.push(skip);
                x = g.push(format!("pool{}", i + 1), LayerOp::MaxPool, vec![x]);
            }
        }
        let up_bias = self.convention.conv_bias(false);
        for i in (0..4).rev() {
            let stage = 9 - i;
            let up = g.push(
                format!("up{stage}/convT"),
                LayerOp::ConvTranspose {
                    filters: u[i],
                    bias: up_bias,
                },
                vec![x],
            );
            g.block(&format!("up{stage}"), BlockKind::Up, vec![u[i]], None);
            let cat = g.push(format!("up{stage}/concat"), LayerOp::Concat, vec![up, skips[i]]);
            x = self.resolution_block(&mut g, &format!("block{stage}"), cat, u[i], dual)?;
        }
        x = self.conv_norm(&mut g, "head/conv", x, 1, 1, false);
        g.push("head/sigmoid".into(), LayerOp::Sigmoid, vec![x]);
        g.block("head", BlockKind::Head, vec![1], None);
        Ok(g.finish())
    }

    /// MultiRes block, or the dual-channel variant whose two chains are
    /// summed instead of meeting a 1×1 shortcut.
    fn resolution_block(&self, g: &mut Graph, name: &str, input: usize, base: usize, dual: bool) -> Result<usize> {
        let schedule = filter_schedule(base, self.alpha)?;
        let total = schedule.total();
        let (left, right, kind) = if dual {
            let l = self.chain(g, &format!("{name}/left"), input, schedule.filters);
            let r = self.chain(g, &format!("{name}/right"), input, schedule.filters);
            (l, r, BlockKind::DualChannel)
        } else {
            let s = self.conv_norm(g, &format!("{name}/shortcut"), input, 1, total, false);
            let c = self.chain(g, name, input, schedule.filters);
            (s, c, BlockKind::MultiRes)
        };
        let out = self.residual_tail(g, name, left, right);
        let mut widths = schedule.filters.to_vec();
        if dual {
            widths.extend(schedule.filters);
        } else {
            widths.push(total);
        }
        g.block(name, kind, widths, Some(schedule));
        Ok(out)
    }

    /// Three chained 3×3 convolutions, concatenated.
    fn chain(&self, g: &mut Graph, prefix: &str, input: usize, widths: [usize; 3]) -> usize {
        let mut x = input;
        let mut outs = Vec::with_capacity(3);
        for (j, &w) in widths.iter().enumerate() {
            x = self.conv_norm(g, &format!("{prefix}/conv{}", j + 1), x, 3, w, true);
            outs.push(x);
        }
        let cat = g.push(format!("{prefix}/concat"), LayerOp::Concat, outs);
        self.block_norm(g, &format!("{prefix}/concat/bn"), cat)
    }

    fn respath(&self, g: &mut Graph, stage: usize, input: usize, filters: usize) -> usize {
        let name = format!("respath{}", stage + 1);
        let mut x = input;
        for unit in 1..=RESPATH_LENGTHS[stage] {
            let p = format!("{name}/unit{unit}");
            let s = self.conv_norm(g, &format!("{p}/shortcut"), x, 1, filters, false);
            let c = self.conv_norm(g, &format!("{p}/conv"), x, 3, filters, true);
            x = self.residual_tail(g, &p, s, c);
        }
        g.block(&name, BlockKind::ResPath, vec![filters], None);
        g.blocks.last_mut().expect("just pushed").length = Some(RESPATH_LENGTHS[stage]);
        x
    }

    /// add, ReLU, then the block-level norm.
    fn residual_tail(&self, g: &mut Graph, prefix: &str, a: usize, b: usize) -> usize {
        let sum = g.push(format!("{prefix}/add"), LayerOp::Add, vec![a, b]);
        let act = g.push(format!("{prefix}/relu"), LayerOp::Relu, vec![sum]);
        self.block_norm(g, &format!("{prefix}/bn"), act)
    }

    fn block_norm(&self, g: &mut Graph, path: &str, input: usize) -> usize {
        if self.convention.norm.per_block() {
            g.push(path.to_string(), LayerOp::BatchNorm { scale: true }, vec![input])
        } else {
            input
        }
    }

    fn conv_norm(&self, g: &mut Graph, path: &str, input: usize, kernel: usize, filters: usize, relu: bool) -> usize {
        let normalized = self.convention.norm.per_conv();
        let bias = self.convention.conv_bias(normalized);
        let mut x = g.push(path.to_string(), LayerOp::Conv { kernel, filters, bias }, vec![input]);
        if normalized {
            x = g.push(
                format!("{path}/bn"),
                LayerOp::BatchNorm {
                    scale: self.convention.conv_norm_scale,
                },
                vec![x],
            );
        }
        if relu {
            x = g.push(format!("{path}/relu"), LayerOp::Relu, vec![x]);
        }
        x
    }
}

pub fn build_unet(base_filters: &[usize], in_channels: usize) -> Result<GraphSpec> {
    ArchBuilder::default().build(Architecture::UNet, base_filters, in_channels)
}

pub fn build_multiresunet(alpha: f64, base_u: &[usize], in_channels: usize) -> Result<GraphSpec> {
    ArchBuilder {
        alpha,
        ..ArchBuilder::default()
    }
    .build(Architecture::MultiResUNet, base_u, in_channels)
}

pub fn build_dcunet(alpha: f64, base_u: &[usize], in_channels: usize) -> Result<GraphSpec> {
    ArchBuilder {
        alpha,
        ..ArchBuilder::default()
    }
    .build(Architecture::DcUNet, base_u, in_channels)
}

fn check_filters(filters: &[usize]) -> Result<[usize; 5]> {
    let f: [usize; 5] = filters
        .try_into()
        .map_err(|_| Error::invalid(format!("expected 5 per-stage filter counts, got {}", filters.len())))?;
    if f.contains(&0) {
        return Err(Error::invalid(format!("filter counts must be positive, got {f:?}")));
    }
    Ok(f)
}

struct Graph {
    spec: GraphSpec,
    blocks: Vec<BlockSpec>,
}

impl Graph {
    fn new(arch: Architecture, convention: Convention, in_channels: usize) -> Result<Self> {
        if in_channels == 0 {
            return Err(Error::invalid("in_channels must be positive"));
        }
        let mut spec = GraphSpec::empty(arch.name());
        spec.architecture = Some(arch);
        spec.convention = convention;
        let mut g = Graph {
            spec,
            blocks: Vec::new(),
        };
        g.push("input".into(), LayerOp::Input { channels: in_channels }, vec![]);
        Ok(g)
    }

    fn push(&mut self, path: String, op: LayerOp, inputs: Vec<usize>) -> usize {
        self.spec.layers.push(LayerSpec { path, op, inputs });
        self.spec.layers.len() - 1
    }

    fn plain_conv(&mut self, path: &str, input: usize, kernel: usize, filters: usize, bias: bool) -> usize {
        let c = self.push(path.to_string(), LayerOp::Conv { kernel, filters, bias }, vec![input]);
        self.push(format!("{path}/relu"), LayerOp::Relu, vec![c])
    }

    fn block(&mut self, name: &str, kind: BlockKind, filters: Vec<usize>, schedule: Option<super::FilterSchedule>) {
        self.blocks.push(BlockSpec {
            name: name.to_string(),
            kind,
            filters,
            schedule,
            length: None,
        });
    }

    fn finish(mut self) -> GraphSpec {
        self.spec.blocks = self.blocks;
        self.spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dc_ref() -> GraphSpec {
        ArchBuilder::default().reference(Architecture::DcUNet).unwrap()
    }

    #[test]
    fn multires_block_one_widths() {
        let g = ArchBuilder::default().reference(Architecture::MultiResUNet).unwrap();
        assert_eq!(g.block("block1").unwrap().filters, vec![17, 35, 53, 105]);
        let ch = g.channels().unwrap();
        let idx = g.layers.iter().position(|l| l.path == "block1/shortcut").unwrap();
        assert_eq!(ch[idx], 105);
    }

    #[test]
    fn respath_lengths_and_widths() {
        let g = ArchBuilder::default().reference(Architecture::MultiResUNet).unwrap();
        let rp1 = g.block("respath1").unwrap();
        assert_eq!((rp1.filters.as_slice(), rp1.length), (&[64][..], Some(4)));
        let rp4 = g.block("respath4").unwrap();
        assert_eq!((rp4.filters.as_slice(), rp4.length), (&[512][..], Some(1)));
        assert!(g.layer("respath1/unit4/conv").is_some());
        assert!(g.layer("respath1/unit5/conv").is_none());
        assert!(g.layer("respath4/unit2/conv").is_none());
    }

    #[test]
    fn dc_block_chains() {
        let g = dc_ref();
        let b1 = g.block("block1").unwrap();
        assert_eq!(b1.filters, vec![8, 17, 26, 8, 17, 26]);
        assert_eq!(b1.kind, BlockKind::DualChannel);
        let ch = g.channels().unwrap();
        let idx = g.layers.iter().position(|l| l.path == "block1/bn").unwrap();
        assert_eq!(ch[idx], 51);
        assert_eq!(g.block("block5").unwrap().schedule.unwrap().filters, [142, 284, 427]);
        assert!(g.block("respath5").is_none());
    }

    #[test]
    fn decoder_mirrors_encoder() {
        for arch in [Architecture::MultiResUNet, Architecture::DcUNet] {
            let g = ArchBuilder::default().reference(arch).unwrap();
            for i in 1..=4 {
                let a = g.block(&format!("block{i}")).unwrap();
                let b = g.block(&format!("block{}", 10 - i)).unwrap();
                assert_eq!(a.schedule, b.schedule, "{arch} block {i}");
            }
        }
    }

    #[test]
    fn dc_widths_are_multires_at_half_base() {
        let m = ArchBuilder::default().reference(Architecture::MultiResUNet).unwrap();
        let d = ArchBuilder::default()
            .build(Architecture::DcUNet, &[64, 128, 256, 512, 1024], 1)
            .unwrap();
        for i in 1..=9 {
            let name = format!("block{i}");
            assert_eq!(m.block(&name).unwrap().schedule, d.block(&name).unwrap().schedule);
        }
    }

    #[test]
    fn every_conv_activated_except_head() {
        for arch in Architecture::ALL {
            let g = ArchBuilder::default().reference(arch).unwrap();
            let sigmoids: Vec<_> = g.layers.iter().filter(|l| l.op == LayerOp::Sigmoid).collect();
            assert_eq!(sigmoids.len(), 1);
            assert_eq!(g.layers.last().unwrap().op, LayerOp::Sigmoid);
            let pools = g.layers.iter().filter(|l| l.op == LayerOp::MaxPool).count();
            let ups = g
                .layers
                .iter()
                .filter(|l| matches!(l.op, LayerOp::ConvTranspose { .. }))
                .count();
            assert_eq!((pools, ups), (4, 4));
        }
    }

    #[test]
    fn paths_unique() {
        for arch in Architecture::ALL {
            let g = ArchBuilder::default().reference(arch).unwrap();
            let mut paths: Vec<&str> = g.layers.iter().map(|l| l.path.as_str()).collect();
            paths.sort_unstable();
            let n = paths.len();
            paths.dedup();
            assert_eq!(paths.len(), n);
        }
    }

    #[test]
    fn shapes_round_trip_and_reject_bad_sizes() {
        for arch in Architecture::ALL {
            let g = ArchBuilder::default().reference(arch).unwrap();
            let shapes = g.infer_shapes(1, 256, 128).unwrap();
            assert_eq!(shapes.last().unwrap().dims(), [1, 1, 256, 128]);
            let err = g.infer_shapes(1, 250, 130).unwrap_err().to_string();
            assert!(err.contains("16"), "{err}");
        }
    }

    #[test]
    fn filter_count_validated() {
        assert!(build_unet(&[1, 2, 3], 1).is_err());
        assert!(build_unet(&[4, 8, 0, 32, 64], 1).is_err());
        assert!(build_unet(&[4, 8, 16, 32, 64], 0).is_err());
        assert!(build_dcunet(DEFAULT_ALPHA, &[2, 4, 8, 16, 32], 1).is_err());
    }
}
