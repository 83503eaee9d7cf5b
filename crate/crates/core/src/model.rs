//! Concrete parameters for a [`GraphSpec`] and its forward passes.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::{check_spatial, GraphSpec, LayerOp};
use crate::autodiff::{stable_sigmoid, Tape, Var};
use crate::checkpoint::Record;
use crate::error::{Error, Result};
use crate::kernels::conv::{conv2d_forward, conv_transpose2d_forward, Padding};
use crate::kernels::norm::{batchnorm_forward, MovingStats, NormConfig, NormMode};
use crate::kernels::pool::maxpool2x2_forward;
use crate::tensor::{Scalar, Shape, Tensor};

/// A named trainable tensor, e.g. `block1/conv1.weight`.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Stateless,
    Conv { weight: usize, bias: Option<usize> },
    Norm { gamma: Option<usize>, beta: usize, stats: usize },
}

/// Result of a recorded forward pass.
pub struct Forward {
    pub output: Var,
    /// Tape handles of every parameter, in [`Model::params`] order.
    pub params: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct Model<T> {
    spec: GraphSpec,
    params: Vec<Param<T>>,
    slots: Vec<Slot>,
    stats: Vec<MovingStats<T>>,
    stat_paths: Vec<String>,
    pub norm: NormConfig,
}

impl<T: Scalar> Model<T> {
    /// Glorot-uniform weights, zero biases and shifts, unit scales.
    pub fn new(spec: GraphSpec, seed: u64) -> Result<Self> {
        let channels = spec.channels()?;
        if spec.in_channels().is_none() {
            return Err(Error::Graph("model graph must start with an input layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut slots = Vec::with_capacity(spec.layers.len());
        let mut stats = Vec::new();
        let mut stat_paths = Vec::new();
        let add = |params: &mut Vec<Param<T>>, name: String, value: Tensor<T>| {
            params.push(Param { name, value });
            params.len() - 1
        };
        for layer in &spec.layers {
            let cin = layer.inputs.first().map_or(0, |&j| channels[j]);
            let slot = match layer.op {
                LayerOp::Conv { kernel, filters, bias } => {
                    let shape = Shape::new(filters, cin, kernel, kernel);
                    let fan = ((cin + filters) * kernel * kernel) as f64;
                    let w = glorot(shape, fan, &mut rng);
                    let weight = add(&mut params, format!("{}.weight", layer.path), w);
                    let bias = bias.then(|| add(&mut params, format!("{}.bias", layer.path), Tensor::zeros(Shape::new(filters, 1, 1, 1))));
                    Slot::Conv { weight, bias }
                }
                LayerOp::ConvTranspose { filters, bias } => {
                    let shape = Shape::new(filters, cin, 2, 2);
                    let w = glorot(shape, ((cin + filters) * 4) as f64, &mut rng);
                    let weight = add(&mut params, format!("{}.weight", layer.path), w);
                    let bias = bias.then(|| add(&mut params, format!("{}.bias", layer.path), Tensor::zeros(Shape::new(filters, 1, 1, 1))));
                    Slot::Conv { weight, bias }
                }
                LayerOp::BatchNorm { scale } => {
                    let gamma = scale.then(|| add(&mut params, format!("{}.gamma", layer.path), Tensor::full(Shape::new(cin, 1, 1, 1), T::one())));
                    let beta = add(&mut params, format!("{}.beta", layer.path), Tensor::zeros(Shape::new(cin, 1, 1, 1)));
                    stats.push(MovingStats::new(cin));
                    stat_paths.push(layer.path.clone());
                    Slot::Norm {
                        gamma,
                        beta,
                        stats: stats.len() - 1,
                    }
                }
                _ => Slot::Stateless,
            };
            slots.push(slot);
        }
        Ok(Model {
            spec,
            params,
            slots,
            stats,
            stat_paths,
            norm: NormConfig::default(),
        })
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn stats(&self) -> &[MovingStats<T>] {
        &self.stats
    }

    pub fn set_stats(&mut self, stats: Vec<MovingStats<T>>) -> Result<()> {
        if stats.len() != self.stats.len() || stats.iter().zip(&self.stats).any(|(a, b)| a.mean.len() != b.mean.len()) {
            return Err(Error::invalid("moving statistics do not match the model layout"));
        }
        self.stats = stats;
        Ok(())
    }

    /// Scalars held by the model: parameters plus moving means and variances.
    pub fn allocated_elements(&self) -> u64 {
        let p: usize = self.params.iter().map(|p| p.value.len()).sum();
        let s: usize = self.stats.iter().map(|s| s.mean.len() + s.var.len()).sum();
        (p + s) as u64
    }

    fn check_input(&self, shape: Shape) -> Result<()> {
        let c = self.spec.in_channels().expect("checked in new");
        if shape.c != c || shape.n == 0 {
            return Err(Error::shape("model input", format!("N×{c}×H×W"), shape));
        }
        check_spatial(shape.h, shape.w)
    }

    /// Records a forward pass of `input` (already on `tape`). Training mode
    /// uses batch statistics and updates the moving averages.
    pub fn forward(&mut self, tape: &mut Tape<T>, input: Var, mode: NormMode) -> Result<Forward> {
        self.check_input(tape.value(input).shape())?;
        let params: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.value.clone(), true)).collect();
        let mut vars: Vec<Var> = Vec::with_capacity(self.spec.layers.len());
        for (layer, slot) in self.spec.layers.iter().zip(&self.slots) {
            let x = |k: usize| vars[layer.inputs[k]];
            let v = match (layer.op, *slot) {
                (LayerOp::Input { .. }, _) => input,
                (LayerOp::Conv { .. }, Slot::Conv { weight, bias }) => {
                    tape.conv2d(x(0), params[weight], bias.map(|b| params[b]), Padding::Same, 1)?
                }
                (LayerOp::ConvTranspose { .. }, Slot::Conv { weight, bias }) => {
                    tape.conv_transpose2d(x(0), params[weight], bias.map(|b| params[b]))?
                }
                (LayerOp::BatchNorm { .. }, Slot::Norm { gamma, beta, stats }) => tape.batchnorm(
                    x(0),
                    gamma.map(|g| params[g]),
                    Some(params[beta]),
                    &mut self.stats[stats],
                    mode,
                    self.norm,
                )?,
                (LayerOp::Relu, _) => tape.relu(x(0))?,
                (LayerOp::Sigmoid, _) => tape.sigmoid(x(0))?,
                (LayerOp::MaxPool, _) => tape.maxpool2x2(x(0))?,
                (LayerOp::Concat, _) => {
                    let ins: Vec<Var> = layer.inputs.iter().map(|&j| vars[j]).collect();
                    tape.concat(&ins)?
                }
                (LayerOp::Add, _) => tape.add(x(0), x(1))?,
                _ => unreachable!("slot built from the same layer"),
            };
            vars.push(v);
        }
        Ok(Forward {
            output: *vars.last().expect("graph has an input layer"),
            params,
        })
    }

    /// Forward pass without recording, releasing intermediates after their
    /// last use.
    pub fn predict(&mut self, input: &Tensor<T>, mode: NormMode) -> Result<Tensor<T>> {
        self.check_input(input.shape())?;
        let layers = &self.spec.layers;
        let mut last_use = vec![0usize; layers.len()];
        for (i, layer) in layers.iter().enumerate() {
            for &j in &layer.inputs {
                last_use[j] = i;
            }
        }
        let mut values: Vec<Option<Tensor<T>>> = (0..layers.len()).map(|_| None).collect();
        for (i, (layer, slot)) in layers.iter().zip(&self.slots).enumerate() {
            let x = |k: usize| values[layer.inputs[k]].as_ref().expect("live input");
            let p = |k: usize| &self.params[k].value;
            let out = match (layer.op, *slot) {
                (LayerOp::Input { .. }, _) => input.clone(),
                (LayerOp::Conv { .. }, Slot::Conv { weight, bias }) => {
                    conv2d_forward(x(0), p(weight), bias.map(p), Padding::Same, 1)?.0
                }
                (LayerOp::ConvTranspose { .. }, Slot::Conv { weight, bias }) => {
                    conv_transpose2d_forward(x(0), p(weight), bias.map(p))?
                }
                (LayerOp::BatchNorm { .. }, Slot::Norm { gamma, beta, stats }) => {
                    let (gamma, beta) = (gamma.map(|g| &self.params[g].value), &self.params[beta].value);
                    batchnorm_forward(x(0), gamma, Some(beta), &mut self.stats[stats], mode, self.norm)?.0
                }
                (LayerOp::Relu, _) => x(0).map(|v| if v < T::zero() { T::zero() } else { v }),
                (LayerOp::Sigmoid, _) => x(0).map(stable_sigmoid),
                (LayerOp::MaxPool, _) => maxpool2x2_forward(x(0))?.0,
                (LayerOp::Concat, _) => {
                    let parts: Vec<&Tensor<T>> = layer.inputs.iter().map(|&j| values[j].as_ref().expect("live input")).collect();
                    Tensor::concat_channels(&parts)?
                }
                (LayerOp::Add, _) => {
                    let (a, b) = (x(0), x(1));
                    if a.shape() != b.shape() {
                        return Err(Error::shape("add", a.shape(), b.shape()));
                    }
                    Tensor::from_vec(a.shape(), a.data().iter().zip(b.data()).map(|(&u, &v)| u + v).collect())?
                }
                _ => unreachable!("slot built from the same layer"),
            };
            if let Some(k) = out.first_non_finite() {
                return Err(Error::Numeric(format!("{} produced a non-finite value at element {k}", layer.path)));
            }
            values[i] = Some(out);
            for &j in &layer.inputs {
                if last_use[j] == i {
                    values[j] = None;
                }
            }
        }
        Ok(values.pop().flatten().expect("output retained"))
    }

    /// Parameters and populated moving statistics as checkpoint records.
    pub fn to_records(&self) -> Vec<Record> {
        let mut out: Vec<Record> = self.params.iter().map(|p| Record::from_tensor(&p.name, &p.value)).collect();
        for (path, s) in self.stat_paths.iter().zip(&self.stats) {
            if s.populated {
                out.push(Record::from_slice(&format!("{path}.moving_mean"), &s.mean));
                out.push(Record::from_slice(&format!("{path}.moving_var"), &s.var));
            }
        }
        out
    }

    /// Restores values written by [`Model::to_records`]. Every parameter must
    /// be present with a matching shape; moving statistics are optional.
    pub fn load_records(&mut self, records: &[Record]) -> Result<()> {
        let find = |name: &str| records.iter().find(|r| r.name == name);
        for p in &mut self.params {
            let r = find(&p.name).ok_or_else(|| Error::invalid(format!("checkpoint lacks {}", p.name)))?;
            p.value = r.to_tensor(p.value.shape())?;
        }
        for (path, s) in self.stat_paths.iter().zip(&mut self.stats) {
            let (mean, var) = (find(&format!("{path}.moving_mean")), find(&format!("{path}.moving_var")));
            if let (Some(m), Some(v)) = (mean, var) {
                let shape = Shape::new(s.mean.len(), 1, 1, 1);
                s.mean = m.to_tensor(shape)?.into_vec();
                s.var = v.to_tensor(shape)?.into_vec();
                s.populated = true;
            }
        }
        Ok(())
    }
}

fn glorot<T: Scalar>(shape: Shape, fan_sum: f64, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let limit = (6.0 / fan_sum).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit);
    let data = (0..shape.numel()).map(|_| T::from_f64(dist.sample(rng))).collect();
    Tensor::from_vec(shape, data).expect("numel matches")
}
