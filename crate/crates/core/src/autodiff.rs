//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its value and the inputs needed to
//! replay it backwards. Because nodes can only refer to earlier nodes the
//! recorded graph is acyclic by construction; [`Tape::backward`] still checks
//! the ordering before walking it.

use crate::error::{Error, Result};
use crate::kernels::conv::{self, ConvGeometry, Padding};
use crate::kernels::norm::{self, MovingStats, NormCache, NormConfig, NormMode};
use crate::kernels::pool;
use crate::tensor::{Scalar, Shape, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geometry: ConvGeometry,
    },
    ConvTranspose2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    Relu {
        input: Var,
    },
    Sigmoid {
        input: Var,
    },
    BatchNorm {
        input: Var,
        gamma: Option<Var>,
        beta: Option<Var>,
        cache: NormCache<T>,
    },
    Concat {
        inputs: Vec<Var>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sum {
        input: Var,
    },
    Mean {
        input: Var,
    },
    Bce {
        pred: Var,
        target: Tensor<T>,
        scale: T,
    },
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d { input, weight, bias, .. } | Op::ConvTranspose2d { input, weight, bias } => {
                let mut v = vec![*input, *weight];
                v.extend(bias);
                v
            }
            Op::BatchNorm { input, gamma, beta, .. } => {
                let mut v = vec![*input];
                v.extend(gamma);
                v.extend(beta);
                v
            }
            Op::MaxPool { input, .. }
            | Op::Relu { input }
            | Op::Sigmoid { input }
            | Op::Sum { input }
            | Op::Mean { input } => vec![*input],
            Op::Bce { pred, .. } => vec![*pred],
            Op::Concat { inputs } => inputs.clone(),
            Op::Add { a, b } => vec![*a, *b],
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Clamp applied to log arguments in the cross-entropy.
pub const LOG_CLAMP: f64 = 1e-12;

/// Recording of one forward pass.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    backward_done: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node(&self, v: Var) -> Result<&Node<T>> {
        self.nodes
            .get(v.0)
            .ok_or_else(|| Error::Graph(format!("variable {} is not on this tape", v.0)))
    }

    fn optional(&self, v: Option<Var>) -> Result<Option<&Tensor<T>>> {
        v.map(|v| self.node(v).map(|n| &n.value)).transpose()
    }

    /// Panics if `v` was not recorded on this tape.
    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Gradient of the backward root w.r.t. `v`, once [`Tape::backward`] ran.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>) -> Result<Var> {
        if self.backward_done {
            return Err(Error::Graph("tape already consumed by backward".into()));
        }
        if let Some(i) = value.first_non_finite() {
            return Err(Error::Numeric(format!("{name} produced a non-finite value at element {i}")));
        }
        let mut requires_grad = false;
        for input in op.inputs() {
            requires_grad |= self.node(input)?.requires_grad;
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Option<Var>, padding: Padding, stride: usize) -> Result<Var> {
        let (out, geometry) = conv::conv2d_forward(
            &self.node(input)?.value,
            &self.node(weight)?.value,
            self.optional(bias)?,
            padding,
            stride,
        )?;
        self.push(
            "conv2d",
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                geometry,
            },
        )
    }

    pub fn conv_transpose2d(&mut self, input: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let out = conv::conv_transpose2d_forward(
            &self.node(input)?.value,
            &self.node(weight)?.value,
            self.optional(bias)?,
        )?;
        self.push("conv_transpose2d", out, Op::ConvTranspose2d { input, weight, bias })
    }

    pub fn maxpool2x2(&mut self, input: Var) -> Result<Var> {
        let (out, argmax) = pool::maxpool2x2_forward(&self.node(input)?.value)?;
        self.push("maxpool2x2", out, Op::MaxPool { input, argmax })
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let out = self.node(input)?.value.map(|x| if x < T::zero() { T::zero() } else { x });
        self.push("relu", out, Op::Relu { input })
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var> {
        let out = self.node(input)?.value.map(stable_sigmoid);
        self.push("sigmoid", out, Op::Sigmoid { input })
    }

    pub fn batchnorm(
        &mut self,
        input: Var,
        gamma: Option<Var>,
        beta: Option<Var>,
        stats: &mut MovingStats<T>,
        mode: NormMode,
        config: NormConfig,
    ) -> Result<Var> {
        let (out, cache) = norm::batchnorm_forward(
            &self.node(input)?.value,
            self.optional(gamma)?,
            self.optional(beta)?,
            stats,
            mode,
            config,
        )?;
        self.push(
            "batchnorm",
            out,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                cache,
            },
        )
    }

    /// Channel concatenation in argument order.
    pub fn concat(&mut self, inputs: &[Var]) -> Result<Var> {
        let parts = inputs.iter().map(|&v| self.node(v).map(|n| &n.value)).collect::<Result<Vec<_>>>()?;
        let out = Tensor::concat_channels(&parts)?;
        self.push(
            "concat",
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.node(a)?.value, &self.node(b)?.value);
        if ta.shape() != tb.shape() {
            return Err(Error::shape("add", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x + y).collect();
        let out = Tensor::from_vec(ta.shape(), data)?;
        self.push("add", out, Op::Add { a, b })
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let s = self.node(input)?.value.sum();
        self.push("sum", Tensor::scalar(s), Op::Sum { input })
    }

    pub fn mean(&mut self, input: Var) -> Result<Var> {
        let t = &self.node(input)?.value;
        if t.is_empty() {
            return Err(Error::invalid("mean of an empty tensor"));
        }
        let m = t.sum() / T::from_f64(t.len() as f64);
        self.push("mean", Tensor::scalar(m), Op::Mean { input })
    }

    /// Per-image binary cross-entropy, summed over pixels: output `(N,1,1,1)`.
    /// With `per_pixel_mean` the sums are divided by the pixel count.
    pub fn bce_per_image(&mut self, pred: Var, target: &Tensor<T>, per_pixel_mean: bool) -> Result<Var> {
        let p = &self.node(pred)?.value;
        let values = crate::train::bce_values(p, target)?;
        let per_image = target.shape().c * target.shape().plane();
        let scale = if per_pixel_mean {
            T::one() / T::from_f64(per_image as f64)
        } else {
            T::one()
        };
        let out = Tensor::vector(values.into_iter().map(|v| v * scale).collect());
        let out = Tensor::from_vec(Shape::new(p.shape().n, 1, 1, 1), out.into_vec())?;
        self.push(
            "bce",
            out,
            Op::Bce {
                pred,
                target: target.clone(),
                scale,
            },
        )
    }

    /// Populates gradients of `root` w.r.t. every recorded value that
    /// requires one. `root` must be a single-element tensor.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Graph("backward already ran on this tape; record a new forward pass".into()));
        }
        let root_shape = self.node(root)?.value.shape();
        if root_shape.numel() != 1 {
            return Err(Error::Graph(format!("backward root must be a scalar, got {root_shape}")));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.op.inputs().iter().any(|v| v.0 >= i) {
                return Err(Error::Graph(format!("node {i} depends on a later node (cycle)")));
            }
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(root_shape, T::one()));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = Some(g);
                continue;
            }
            for (target, contribution) in self.local_grads(node, &g) {
                if !self.nodes[target.0].requires_grad {
                    continue;
                }
                match &mut grads[target.0] {
                    Some(existing) => existing.accumulate(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn local_grads(&self, node: &Node<T>, g: &Tensor<T>) -> Vec<(Var, Tensor<T>)> {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => vec![],
            Op::Conv2d {
                input,
                weight,
                bias,
                geometry,
            } => {
                let (dx, dw, db) = conv::conv2d_backward(val(*input), val(*weight), geometry, g);
                let mut out = vec![(*input, dx), (*weight, dw)];
                if let Some(b) = bias {
                    out.push((*b, db));
                }
                out
            }
            Op::ConvTranspose2d { input, weight, bias } => {
                let (dx, dw, db) = conv::conv_transpose2d_backward(val(*input), val(*weight), g);
                let mut out = vec![(*input, dx), (*weight, dw)];
                if let Some(b) = bias {
                    out.push((*b, db));
                }
                out
            }
            Op::MaxPool { input, argmax } => {
                vec![(*input, pool::maxpool2x2_backward(val(*input).shape(), argmax, g))]
            }
            Op::Relu { input } => {
                let x = val(*input);
                let data = x
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&xv, &gv)| if xv > T::zero() { gv } else { T::zero() })
                    .collect();
                vec![(*input, Tensor::from_vec(x.shape(), data).expect("shape"))]
            }
            Op::Sigmoid { input } => {
                let y = &node.value;
                let data = y
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&yv, &gv)| gv * yv * (T::one() - yv))
                    .collect();
                vec![(*input, Tensor::from_vec(y.shape(), data).expect("shape"))]
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                cache,
            } => {
                let (dx, dgamma, dbeta) = norm::batchnorm_backward(gamma.map(&val), cache, g);
                let mut out = vec![(*input, dx)];
                if let Some(v) = gamma {
                    out.push((*v, Tensor::vector(dgamma)));
                }
                if let Some(v) = beta {
                    out.push((*v, Tensor::vector(dbeta)));
                }
                out
            }
            Op::Concat { inputs } => {
                let mut start = 0;
                inputs
                    .iter()
                    .map(|&v| {
                        let c = val(v).shape().c;
                        let part = g.slice_channels(start, c).expect("concat slice");
                        start += c;
                        (v, part)
                    })
                    .collect()
            }
            Op::Add { a, b } => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sum { input } => vec![(*input, Tensor::full(val(*input).shape(), g.data()[0]))],
            Op::Mean { input } => {
                let x = val(*input);
                let v = g.data()[0] / T::from_f64(x.len() as f64);
                vec![(*input, Tensor::full(x.shape(), v))]
            }
            Op::Bce { pred, target, scale } => {
                let p = val(*pred);
                let s = p.shape();
                let per_image = s.c * s.plane();
                let lo = T::from_f64(LOG_CLAMP);
                let data = p
                    .data()
                    .iter()
                    .zip(target.data())
                    .enumerate()
                    .map(|(i, (&pv, &yv))| {
                        let up = g.data()[i / per_image] * *scale;
                        let d_pos = if pv > lo { -yv / pv } else { T::zero() };
                        let q = T::one() - pv;
                        let d_neg = if q > lo { (T::one() - yv) / q } else { T::zero() };
                        up * (d_pos + d_neg)
                    })
                    .collect();
                vec![(*pred, Tensor::from_vec(s, data).expect("shape"))]
            }
        }
    }
}

/// Logistic function evaluated on the branch that cannot overflow.
pub fn stable_sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
