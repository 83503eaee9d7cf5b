//! Deterministic inputs shared by the benchmarks.

use dcunet_core::arch::{ArchBuilder, Architecture};
use dcunet_core::data::synth_sample;
use dcunet_core::{GrayImage, Model, Scalar, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform values in `[-1, 1)`.
pub fn random_tensor<T: Scalar>(shape: Shape, seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.numel()).map(|_| T::from_f64(rng.gen_range(-1.0..1.0))).collect();
    Tensor::from_vec(shape, data).expect("numel matches")
}

/// A DC-UNet with every base width divided by `shrink`, statistics seeded
/// by one training-mode pass so inference works.
pub fn reduced_dcunet(shrink: usize, h: usize, w: usize) -> (Model<f32>, Tensor<f32>) {
    let filters: Vec<usize> = Architecture::DcUNet.reference_filters().iter().map(|f| f / shrink).collect();
    let spec = ArchBuilder::default()
        .build(Architecture::DcUNet, &filters, 1)
        .expect("valid widths");
    let mut model = Model::new(spec, 0).expect("model builds");
    let input = random_tensor::<f32>(Shape::new(1, 1, h, w), 1).map(|v| (v + 1.0) / 2.0);
    model
        .predict(&input, dcunet_core::kernels::NormMode::Train)
        .expect("seeding pass");
    (model, input)
}

/// A synthetic image and its mask.
pub fn image_pair(w: usize, h: usize, seed: u64) -> (GrayImage, GrayImage) {
    synth_sample(w, h, &mut ChaCha8Rng::seed_from_u64(seed))
}
