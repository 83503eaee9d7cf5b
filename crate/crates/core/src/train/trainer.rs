//! Training loop and k-fold evaluation.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState, ParamUpdate};
use super::kfold::FoldPlan;
use crate::autodiff::Tape;
use crate::checkpoint;
use crate::data::{tensor_to_images, SampleBatch};
use crate::error::{Error, Result};
use crate::kernels::NormMode;
use crate::metrics::{mean_std, tanimoto};
use crate::model::Model;
use crate::tensor::{Scalar, Shape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Divide each image's cross-entropy by its pixel count.
    pub per_pixel_mean: bool,
    /// Reshuffle the training order every epoch.
    pub shuffle: bool,
    pub seed: u64,
    /// Written after the last epoch, or after a divergence with the restored
    /// parameters.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            epochs: 50,
            batch_size: 4,
            per_pixel_mean: false,
            shuffle: true,
            seed: 0,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    pub val_tanimoto: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Loss of every optimisation step, before its update.
    pub steps: Vec<f64>,
}

impl TrainLog {
    /// `epoch,loss,val_tanimoto`, one row per epoch; a missing validation
    /// score prints as `nan`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,val_tanimoto\n");
        for e in &self.epochs {
            let v = e.val_tanimoto.map_or("nan".to_string(), |v| format!("{v:.6}"));
            writeln!(s, "{},{:.6},{v}", e.epoch, e.loss).unwrap();
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub log: TrainLog,
    /// Set when a step produced a non-finite value. The model then holds the
    /// parameters from the end of the last complete epoch.
    pub diverged: Option<String>,
}

/// Copies samples `indices` into a new batch.
pub fn select<T: Scalar>(data: &SampleBatch<T>, indices: &[usize]) -> Result<SampleBatch<T>> {
    let pick = |t: &Tensor<T>| -> Result<Tensor<T>> {
        let s = t.shape();
        let per = s.c * s.plane();
        let mut out = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            if i >= s.n {
                return Err(Error::invalid(format!("sample {i} out of range for {} samples", s.n)));
            }
            out.extend_from_slice(&t.data()[i * per..(i + 1) * per]);
        }
        Tensor::from_vec(Shape::new(indices.len(), s.c, s.h, s.w), out)
    };
    Ok(SampleBatch {
        images: pick(&data.images)?,
        masks: pick(&data.masks)?,
    })
}

/// Per-image Tanimoto of inference-mode predictions against the masks, both
/// rescaled to 8-bit.
pub fn evaluate<T: Scalar>(model: &mut Model<T>, data: &SampleBatch<T>, batch_size: usize) -> Result<Vec<f64>> {
    let n = data.len();
    let mut scores = Vec::with_capacity(n);
    let order: Vec<usize> = (0..n).collect();
    for chunk in order.chunks(batch_size.max(1)) {
        let part = select(data, chunk)?;
        let pred = model.predict(&part.images, NormMode::Inference)?;
        let (p, m) = (tensor_to_images(&pred)?, tensor_to_images(&part.masks)?);
        for (a, b) in p.iter().zip(&m) {
            scores.push(tanimoto(a, b)?);
        }
    }
    Ok(scores)
}

/// One optimisation step; returns the batch loss before the update.
pub fn train_step<T: Scalar>(
    model: &mut Model<T>,
    batch: &SampleBatch<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.leaf(batch.images.clone(), false);
    let fwd = model.forward(&mut tape, x, NormMode::Train)?;
    let per_image = tape.bce_per_image(fwd.output, &batch.masks, config.per_pixel_mean)?;
    let loss = tape.mean(per_image)?;
    let value = tape.value(loss).data()[0].to_f64().unwrap_or(f64::NAN);
    tape.backward(loss)?;
    let mut updates: Vec<ParamUpdate<'_, T>> = model
        .params_mut()
        .iter_mut()
        .zip(&fwd.params)
        .map(|(p, &v)| ParamUpdate {
            name: &p.name,
            value: &mut p.value,
            grad: tape.grad(v),
        })
        .collect();
    adam_step(&mut updates, state, &config.adam)?;
    Ok(value)
}

/// Mini-batch Adam on `data`, logging the mean epoch loss and, with `val`,
/// the held-out Tanimoto after every epoch.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    data: &SampleBatch<T>,
    val: Option<&SampleBatch<T>>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(model.params().iter().map(|p| p.value.len()));
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut good = (model.params().to_vec(), model.stats().to_vec());
    let mut diverged = None;
    'epochs: for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut losses = Vec::new();
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = select(data, chunk)?;
            match train_step(model, &batch, &mut state, config) {
                Ok(l) => {
                    losses.push(l);
                    log.steps.push(l);
                }
                Err(e) if e.is_numeric() => {
                    diverged = Some(format!(
                        "diverged at epoch {epoch}, step {}: {e}; restored parameters from the end of epoch {}",
                        step + 1,
                        epoch - 1
                    ));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        let val_tanimoto = match val {
            Some(v) => {
                let scores = evaluate(model, v, config.batch_size)?;
                Some(mean_std(&scores).0)
            }
            None => None,
        };
        log.epochs.push(EpochLog {
            epoch,
            loss,
            val_tanimoto,
        });
        good = (model.params().to_vec(), model.stats().to_vec());
    }
    if diverged.is_some() {
        let (params, stats) = good;
        for (dst, src) in model.params_mut().iter_mut().zip(params) {
            *dst = src;
        }
        model.set_stats(stats)?;
    }
    if let Some(path) = &config.checkpoint {
        checkpoint::save(path, &model.to_records())?;
    }
    Ok(TrainOutcome { log, diverged })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub images: usize,
    /// Mean per-image Tanimoto on the held-out fold.
    pub tanimoto: f64,
    pub per_image: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
}

impl CvReport {
    /// Mean and sample standard deviation of the per-fold scores.
    pub fn fold_mean_std(&self) -> (f64, f64) {
        mean_std(&self.folds.iter().map(|f| f.tanimoto).collect::<Vec<_>>())
    }

    /// Mean over every held-out image, regardless of fold.
    pub fn pooled_mean(&self) -> f64 {
        let all: Vec<f64> = self.folds.iter().flat_map(|f| f.per_image.iter().copied()).collect();
        mean_std(&all).0
    }

    /// `fold,images,tanimoto` rows, then `mean`, `std` and `pooled` footers.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,images,tanimoto\n");
        for f in &self.folds {
            writeln!(s, "{},{},{:.6}", f.fold, f.images, f.tanimoto).unwrap();
        }
        let total: usize = self.folds.iter().map(|f| f.images).sum();
        let (mean, std) = self.fold_mean_std();
        writeln!(s, "mean,{total},{mean:.6}").unwrap();
        writeln!(s, "std,{total},{std:.6}").unwrap();
        writeln!(s, "pooled,{total},{:.6}", self.pooled_mean()).unwrap();
        s
    }
}

/// Seed for fold `i`, derived from the master seed.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains a fresh model per fold on the remaining folds and scores the
/// held-out one. `build` receives the fold's seed.
pub fn cross_validate<T: Scalar>(
    build: impl Fn(u64) -> Result<Model<T>>,
    data: &SampleBatch<T>,
    plan: &FoldPlan,
    config: &TrainConfig,
) -> Result<CvReport> {
    let mut folds = Vec::with_capacity(plan.k());
    for (i, held) in plan.folds().iter().enumerate() {
        let seed = fold_seed(config.seed, i);
        let mut model = build(seed)?;
        let cfg = TrainConfig {
            seed,
            checkpoint: None,
            ..config.clone()
        };
        let train_set = select(data, &plan.training_indices(i))?;
        let outcome = train(&mut model, &train_set, None, &cfg)?;
        if let Some(msg) = outcome.diverged {
            return Err(Error::Numeric(format!("fold {}: {msg}", i + 1)));
        }
        let per_image = evaluate(&mut model, &select(data, held)?, config.batch_size)?;
        folds.push(FoldResult {
            fold: i + 1,
            images: held.len(),
            tanimoto: mean_std(&per_image).0,
            per_image,
        });
    }
    Ok(CvReport { folds })
}
