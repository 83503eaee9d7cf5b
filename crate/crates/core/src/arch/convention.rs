//! Structural and counting conventions the published parameter totals depend on.

use std::fmt;

/// When convolutions carry a bias vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BiasRule {
    Always,
    Never,
    /// Omitted when the convolution feeds straight into a batch norm.
    UnlessNormalized,
}

/// Where batch normalization sits in the multi-resolution family of blocks.
/// The classical U-Net never normalizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormPlacement {
    None,
    /// After every convolution, before its activation.
    PerConv,
    /// After each concatenation and after the block's residual sum.
    PerBlock,
    Both,
}

impl NormPlacement {
    pub fn per_conv(self) -> bool {
        matches!(self, NormPlacement::PerConv | NormPlacement::Both)
    }

    pub fn per_block(self) -> bool {
        matches!(self, NormPlacement::PerBlock | NormPlacement::Both)
    }
}

/// Which batch-norm values enter a parameter total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormCounting {
    Excluded,
    TrainableOnly,
    /// Scale/shift plus the moving mean and variance.
    TrainableAndMoving,
}

/// Layer-structure choices applied uniformly to every architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Convention {
    pub bias: BiasRule,
    pub norm: NormPlacement,
    /// Whether the per-convolution batch norms learn a scale (γ); the shift
    /// (β) is always learned. Block-level norms always learn both.
    pub conv_norm_scale: bool,
}

impl Convention {
    /// The layout that reproduces the published totals exactly: bias only on
    /// un-normalized convolutions, shift-only batch norm after every
    /// convolution plus full batch norm at block level.
    pub const fn reference() -> Self {
        Convention {
            bias: BiasRule::UnlessNormalized,
            norm: NormPlacement::Both,
            conv_norm_scale: false,
        }
    }

    pub fn conv_bias(&self, normalized: bool) -> bool {
        match self.bias {
            BiasRule::Always => true,
            BiasRule::Never => false,
            BiasRule::UnlessNormalized => !normalized,
        }
    }
}

impl Default for Convention {
    fn default() -> Self {
        Convention::reference()
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bias = match self.bias {
            BiasRule::Always => "always",
            BiasRule::Never => "never",
            BiasRule::UnlessNormalized => "unless-normalized",
        };
        let norm = match self.norm {
            NormPlacement::None => "none",
            NormPlacement::PerConv => "per-conv",
            NormPlacement::PerBlock => "per-block",
            NormPlacement::Both => "per-conv+per-block",
        };
        write!(
            f,
            "bias={bias} bn={norm} conv-bn-scale={}",
            if self.conv_norm_scale { "yes" } else { "no" }
        )
    }
}

impl fmt::Display for NormCounting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormCounting::Excluded => "bn-not-counted",
            NormCounting::TrainableOnly => "bn-trainable",
            NormCounting::TrainableAndMoving => "bn-trainable+moving",
        })
    }
}

/// A structure plus a counting rule: one point of the reconciliation sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CountConvention {
    pub structure: Convention,
    pub counting: NormCounting,
}

impl CountConvention {
    pub const fn reference() -> Self {
        CountConvention {
            structure: Convention::reference(),
            counting: NormCounting::TrainableAndMoving,
        }
    }

    /// Every combination, in a fixed order.
    pub fn all() -> Vec<CountConvention> {
        let mut out = Vec::new();
        for bias in [BiasRule::Always, BiasRule::Never, BiasRule::UnlessNormalized] {
            for norm in [
                NormPlacement::None,
                NormPlacement::PerConv,
                NormPlacement::PerBlock,
                NormPlacement::Both,
            ] {
                for conv_norm_scale in [true, false] {
                    for counting in [
                        NormCounting::Excluded,
                        NormCounting::TrainableOnly,
                        NormCounting::TrainableAndMoving,
                    ] {
                        out.push(CountConvention {
                            structure: Convention {
                                bias,
                                norm,
                                conv_norm_scale,
                            },
                            counting,
                        });
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for CountConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.structure, self.counting)
    }
}
