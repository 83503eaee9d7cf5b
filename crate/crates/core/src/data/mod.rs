//! Image files, dataset manifests and synthetic data.

mod batch;
mod manifest;
mod pgm;
mod synth;

pub use batch::{load_batch, prepare_image, prepare_mask, tensor_to_images, SampleBatch, MASK_THRESHOLD};
pub use manifest::{DatasetManifest, ManifestItem};
pub use pgm::{decode_pgm, encode_pgm, load_gray, save_gray};
pub use synth::{synth_blobs, synth_sample, SynthConfig, AREA_RANGE, MANIFEST_NAME};
