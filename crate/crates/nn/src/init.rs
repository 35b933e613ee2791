//! Seeded parameter initialization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layers::Layer;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Half-width of the uniform range used for positional embeddings.
pub const POSITIONAL_INIT_RANGE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InitScheme {
    /// `U(±√(6 / fan_in))`, for weights feeding a ReLU.
    HeUniform,
    /// `U(±√(6 / (fan_in + fan_out)))`.
    XavierUniform,
}

pub fn uniform<F: Real>(t: &mut Tensor<F>, limit: f64, rng: &mut ChaCha8Rng) {
    t.data_mut().iter_mut().for_each(|v| *v = F::from_f64(rng.gen_range(-limit..=limit)));
}

pub fn init_weight<F: Real>(t: &mut Tensor<F>, fan_in: usize, fan_out: usize, scheme: InitScheme, rng: &mut ChaCha8Rng) {
    let limit = match scheme {
        InitScheme::HeUniform => (6.0 / fan_in.max(1) as f64).sqrt(),
        InitScheme::XavierUniform => (6.0 / (fan_in + fan_out).max(1) as f64).sqrt(),
    };
    uniform(t, limit, rng);
}

/// Initializes every weight of `layer` in place; biases are set to zero.
/// `dense_scheme` picks the rule for a `Dense` layer (He when a ReLU follows,
/// Xavier for the output layer).
pub fn init_layer<F: Real>(layer: &mut Layer<F>, dense_scheme: InitScheme, rng: &mut ChaCha8Rng) {
    fn conv<F: Real>(w: &mut Tensor<F>, b: &mut Tensor<F>, rng: &mut ChaCha8Rng) {
        let &[k, _, cin, cout] = w.dims() else { unreachable!() };
        init_weight(w, k * k * cin, k * k * cout, InitScheme::HeUniform, rng);
        b.fill(F::zero());
    }
    match layer {
        Layer::Conv2d(c) => conv(&mut c.weight, &mut c.bias, rng),
        Layer::PointwiseSeparableConv(s) => {
            conv(&mut s.mix.weight, &mut s.mix.bias, rng);
            conv(&mut s.spatial.weight, &mut s.spatial.bias, rng);
        }
        Layer::ResidualBlock(r) => {
            conv(&mut r.conv1.weight, &mut r.conv1.bias, rng);
            conv(&mut r.conv2.weight, &mut r.conv2.bias, rng);
        }
        Layer::Dense(d) => {
            let (i, o) = (d.in_features(), d.out_features());
            init_weight(&mut d.weight, i, o, dense_scheme, rng);
            d.bias.fill(F::zero());
        }
        Layer::MultiHeadAttention(a) => {
            let dim = a.dim();
            for w in [&mut a.wq, &mut a.wk, &mut a.wv, &mut a.wo] {
                init_weight(w, dim, dim, InitScheme::XavierUniform, rng);
            }
            for b in [&mut a.bq, &mut a.bk, &mut a.bv, &mut a.bo] {
                b.fill(F::zero());
            }
        }
        Layer::PositionalEmbedding(p) => uniform(&mut p.table, POSITIONAL_INIT_RANGE, rng),
        Layer::Relu | Layer::Softmax | Layer::Flatten(_) | Layer::MeanPool => {}
    }
}
