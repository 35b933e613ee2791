//! Layers with explicit forward/backward passes.
//!
//! A [`Layer`] maps one tensor to one tensor. Forward returns a [`Cache`]
//! that the matching backward call consumes. Parameter gradients are
//! accumulated into a caller-provided slice ordered like [`Layer::params`].

pub mod activation;
pub mod attention;
pub mod conv;
pub mod dense;
pub mod residual;
pub mod shape;

pub use activation::{relu, relu_backward, softmax, softmax_backward, softmax_cross_entropy, softmax_forward};
pub use attention::{AttentionCache, MultiHeadAttention};
pub use conv::{conv2d_backward, conv2d_forward, pointwise_separable_conv, Conv2d, Padding, PointwiseSeparableConv};
pub use dense::Dense;
pub use residual::{ResidualBlock, ResidualCache};
pub use shape::{concat_channels, flatten, mean_pool, split_channels, FlattenMode, PositionalEmbedding};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv2d,
    PointwiseSeparableConv,
    ResidualBlock,
    Dense,
    Relu,
    Softmax,
    MultiHeadAttention,
    Flatten,
    /// Multi-input node; lives in the model graph rather than in [`Layer`].
    Concat,
    PositionalEmbedding,
    MeanPool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<F> {
    Conv2d(Conv2d<F>),
    PointwiseSeparableConv(PointwiseSeparableConv<F>),
    ResidualBlock(ResidualBlock<F>),
    Dense(Dense<F>),
    Relu,
    Softmax,
    MultiHeadAttention(MultiHeadAttention<F>),
    Flatten(FlattenMode),
    PositionalEmbedding(PositionalEmbedding<F>),
    MeanPool,
}

#[derive(Debug, Clone)]
pub struct Cache<F> {
    input: Tensor<F>,
    extra: Extra<F>,
}

#[derive(Debug, Clone)]
enum Extra<F> {
    None,
    Tensor(Tensor<F>),
    Residual(ResidualCache<F>),
    Attention(AttentionCache<F>),
}

impl<F> Cache<F> {
    pub fn input(&self) -> &Tensor<F> {
        &self.input
    }
}

impl<F: Real> Layer<F> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::PointwiseSeparableConv(_) => LayerKind::PointwiseSeparableConv,
            Layer::ResidualBlock(_) => LayerKind::ResidualBlock,
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Relu => LayerKind::Relu,
            Layer::Softmax => LayerKind::Softmax,
            Layer::MultiHeadAttention(_) => LayerKind::MultiHeadAttention,
            Layer::Flatten(_) => LayerKind::Flatten,
            Layer::PositionalEmbedding(_) => LayerKind::PositionalEmbedding,
            Layer::MeanPool => LayerKind::MeanPool,
        }
    }

    /// Named parameter tensors in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor<F>)> {
        match self {
            Layer::Conv2d(c) => vec![("weight", &c.weight), ("bias", &c.bias)],
            Layer::PointwiseSeparableConv(s) => vec![
                ("mix.weight", &s.mix.weight),
                ("mix.bias", &s.mix.bias),
                ("spatial.weight", &s.spatial.weight),
                ("spatial.bias", &s.spatial.bias),
            ],
            Layer::ResidualBlock(r) => vec![
                ("conv1.weight", &r.conv1.weight),
                ("conv1.bias", &r.conv1.bias),
                ("conv2.weight", &r.conv2.weight),
                ("conv2.bias", &r.conv2.bias),
            ],
            Layer::Dense(d) => vec![("weight", &d.weight), ("bias", &d.bias)],
            Layer::MultiHeadAttention(a) => vec![
                ("wq", &a.wq),
                ("bq", &a.bq),
                ("wk", &a.wk),
                ("bk", &a.bk),
                ("wv", &a.wv),
                ("bv", &a.bv),
                ("wo", &a.wo),
                ("bo", &a.bo),
            ],
            Layer::PositionalEmbedding(p) => vec![("table", &p.table)],
            Layer::Relu | Layer::Softmax | Layer::Flatten(_) | Layer::MeanPool => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        match self {
            Layer::Conv2d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::PointwiseSeparableConv(s) => {
                vec![&mut s.mix.weight, &mut s.mix.bias, &mut s.spatial.weight, &mut s.spatial.bias]
            }
            Layer::ResidualBlock(r) => {
                vec![&mut r.conv1.weight, &mut r.conv1.bias, &mut r.conv2.weight, &mut r.conv2.bias]
            }
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::MultiHeadAttention(a) => vec![
                &mut a.wq, &mut a.bq, &mut a.wk, &mut a.bk, &mut a.wv, &mut a.bv, &mut a.wo, &mut a.bo,
            ],
            Layer::PositionalEmbedding(p) => vec![&mut p.table],
            Layer::Relu | Layer::Softmax | Layer::Flatten(_) | Layer::MeanPool => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().len()
    }

    /// Zero tensors shaped like [`Layer::params`].
    pub fn zero_grads(&self) -> Vec<Tensor<F>> {
        self.params().iter().map(|(_, t)| Tensor::zeros(t.dims())).collect()
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<(Tensor<F>, Cache<F>)> {
        let (y, extra) = match self {
            Layer::Conv2d(c) => (c.forward(x)?, Extra::None),
            Layer::PointwiseSeparableConv(s) => {
                let (y, mid) = s.forward(x)?;
                (y, Extra::Tensor(mid))
            }
            Layer::ResidualBlock(r) => {
                let (y, c) = r.forward(x)?;
                (y, Extra::Residual(c))
            }
            Layer::Dense(d) => (d.forward(x)?, Extra::None),
            Layer::Relu => (relu(x), Extra::None),
            Layer::Softmax => {
                let y = softmax_forward(x)?;
                (y.clone(), Extra::Tensor(y))
            }
            Layer::MultiHeadAttention(a) => {
                let (y, c) = a.forward(x)?;
                (y, Extra::Attention(c))
            }
            Layer::Flatten(mode) => (flatten(x, *mode)?, Extra::None),
            Layer::PositionalEmbedding(p) => (p.forward(x)?, Extra::None),
            Layer::MeanPool => (mean_pool(x)?, Extra::None),
        };
        Ok((y, Cache { input: x.clone(), extra }))
    }

    /// Forward pass without keeping a cache.
    pub fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        match self {
            Layer::ResidualBlock(r) => Ok(r.forward(x)?.0),
            Layer::MultiHeadAttention(a) => Ok(a.forward(x)?.0),
            Layer::PointwiseSeparableConv(s) => Ok(s.forward(x)?.0),
            _ => Ok(self.forward(x)?.0),
        }
    }

    /// Appends the on/off state of every ReLU this layer evaluated.
    pub fn relu_pattern(&self, cache: &Cache<F>, out: &mut Vec<bool>) {
        let on = |t: &Tensor<F>, out: &mut Vec<bool>| out.extend(t.data().iter().map(|&v| v > F::zero()));
        match (self, &cache.extra) {
            (Layer::Relu, _) => on(&cache.input, out),
            (Layer::ResidualBlock(_), Extra::Residual(c)) => {
                on(&c.pre1, out);
                on(&c.sum, out);
            }
            _ => {}
        }
    }

    /// Returns `dL/dx`; adds parameter gradients into `grads`.
    pub fn backward(&self, cache: &Cache<F>, dy: &Tensor<F>, grads: &mut [Tensor<F>]) -> Result<Tensor<F>> {
        let x = &cache.input;
        match (self, &cache.extra) {
            (Layer::Conv2d(c), _) => c.backward(x, dy, grads),
            (Layer::PointwiseSeparableConv(s), Extra::Tensor(mid)) => s.backward(x, mid, dy, grads),
            (Layer::ResidualBlock(r), Extra::Residual(c)) => r.backward(x, c, dy, grads),
            (Layer::Dense(d), _) => d.backward(x, dy, grads),
            (Layer::Relu, _) => Ok(relu_backward(x, dy)),
            (Layer::Softmax, Extra::Tensor(s)) => Ok(softmax_backward(s, dy)),
            (Layer::MultiHeadAttention(a), Extra::Attention(c)) => a.backward(x, c, dy, grads),
            (Layer::Flatten(_), _) => dy.clone().reshape(x.dims()),
            (Layer::PositionalEmbedding(p), _) => Ok(p.backward(dy, grads)),
            (Layer::MeanPool, _) => Ok(shape::mean_pool_backward(x.dims(), dy)),
            _ => unreachable!("cache produced by a different layer"),
        }
    }
}
