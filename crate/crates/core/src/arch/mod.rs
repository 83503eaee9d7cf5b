//! Layer graphs for U-Net, MultiResUNet and DC-UNet.

mod build;
mod convention;
mod count;
mod graph;
mod schedule;
mod summary;

pub use build::{build_dcunet, build_multiresunet, build_unet, ArchBuilder, UNetHead, RESPATH_LENGTHS};
pub use convention::{BiasRule, Convention, CountConvention, NormCounting, NormPlacement};
pub use count::{count_params, layer_params, relative_error, sweep_conventions, LedgerRow, ParamLedger, Sweep, SweepEntry};
pub use graph::{check_spatial, Architecture, BlockKind, BlockSpec, GraphSpec, LayerOp, LayerSpec, SPATIAL_DIVISOR};
pub use schedule::{filter_schedule, FilterSchedule, DEFAULT_ALPHA};
pub use summary::{summarize, summarize_with};
