//! The five classifier architectures.
//!
//! | method | input | stems | body |
//! |---|---|---|---|
//! | 1 | frequency cubes `[·,·,64]` | 3×3 conv | conv trunk |
//! | 2 | bit features `[·,·,C]` | 3×3 conv | conv trunk |
//! | 3 | bit features | pointwise separable | conv trunk |
//! | 4 | bit features | 3×3 conv | attention |
//! | 5 | bit features | pointwise separable | attention |
//!
//! Every branch ends on the chroma block grid: the Y stem has stride 2, the
//! U and V stems stride 1. The conv trunk is a 3×3 conv, residual blocks, a
//! stride-2 conv, flatten and a dense layer. The attention body treats each
//! grid cell as a token.

use jpegclass::{FeatureFile, FeatureKind, ImageGeometry};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::init::{init_layer, InitScheme};
use crate::layers::{
    concat_channels, split_channels, Cache, Conv2d, Dense, FlattenMode, Layer, MultiHeadAttention, Padding,
    PointwiseSeparableConv, PositionalEmbedding, ResidualBlock,
};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Channels of a frequency cube.
pub const FREQUENCY_CHANNELS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MethodSpec {
    pub method_id: u8,
    pub num_classes: usize,
    pub input_geometry: ImageGeometry,
    /// Bits per block for methods 2-5; unused by method 1.
    pub crop_width: usize,
    pub stem_channels: usize,
    pub trunk_channels: usize,
    pub residual_blocks: usize,
    pub attention_heads: usize,
    pub attention_layers: usize,
}

impl MethodSpec {
    /// Full-size defaults: 101 classes, 64-channel stems, 256-channel trunk,
    /// 4 residual blocks, 2 attention layers with 4 heads, C = 128.
    pub fn new(method_id: u8, input_geometry: ImageGeometry) -> Self {
        MethodSpec {
            method_id,
            num_classes: 101,
            input_geometry,
            crop_width: jpegclass::DEFAULT_CROP_WIDTH,
            stem_channels: 64,
            trunk_channels: 256,
            residual_blocks: 4,
            attention_heads: 4,
            attention_layers: 2,
        }
    }

    pub fn uses_bitstream(&self) -> bool {
        self.method_id != 1
    }

    pub fn separable_stems(&self) -> bool {
        matches!(self.method_id, 3 | 5)
    }

    pub fn uses_attention(&self) -> bool {
        matches!(self.method_id, 4 | 5)
    }

    pub fn input_channels(&self) -> usize {
        if self.uses_bitstream() {
            self.crop_width
        } else {
            FREQUENCY_CHANNELS
        }
    }

    /// Expected `[grid_h, grid_w, channels]` for Y, U and V.
    pub fn input_dims(&self) -> [[usize; 3]; 3] {
        let ch = self.input_channels();
        self.input_geometry.grids_420().map(|(w, h)| [h, w, ch])
    }

    /// Number of attention tokens (cells of the chroma grid).
    pub fn token_count(&self) -> usize {
        let (w, h) = self.input_geometry.grids_420()[1];
        w * h
    }

    pub fn token_dim(&self) -> usize {
        3 * self.stem_channels
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(NnError::Config(m));
        if !(1..=5).contains(&self.method_id) {
            return cfg(format!("methodId must be 1-5, got {}", self.method_id));
        }
        if self.num_classes < 2 {
            return cfg("numClasses must be at least 2".into());
        }
        if self.stem_channels == 0 || self.trunk_channels == 0 || self.input_channels() == 0 {
            return cfg("channel counts must be positive".into());
        }
        if self.uses_attention() && (self.attention_heads == 0 || self.token_dim() % self.attention_heads != 0) {
            return cfg(format!("token dim {} not divisible by {} heads", self.token_dim(), self.attention_heads));
        }
        let g = self.input_geometry;
        if g.d_w0 == 0 || g.d_h0 == 0 {
            return Err(NnError::GeometryMismatch("empty input geometry".into()));
        }
        if g.d_w1 != g.d_w0.div_ceil(2) || g.d_h1 != g.d_h0.div_ceil(2) || (g.d_w1, g.d_h1) != (g.d_w2, g.d_h2) {
            return Err(NnError::GeometryMismatch(format!("geometry {g:?} is not 4:2:0")));
        }
        Ok(())
    }
}

/// Y, U and V input tensors.
pub type ModelInput<F> = [Tensor<F>; 3];

/// Fixed multiplier applied to dequantized DCT coefficients on load. Raw
/// coefficients reach about ±1024, which saturates the first layers.
pub const TRANSFORM_INPUT_SCALE: f64 = 1.0 / 128.0;

/// Converts a loaded feature file into model input. Transform cubes are
/// multiplied by [`TRANSFORM_INPUT_SCALE`]; bit planes pass through as 0/1.
pub fn input_from_features<F: Real>(file: &FeatureFile) -> ModelInput<F> {
    let scale = match file.kind {
        FeatureKind::Transform => F::from_f64(TRANSFORM_INPUT_SCALE),
        FeatureKind::Bitstream => F::one(),
    };
    [0, 1, 2].map(|c| {
        let mut t = Tensor::from_feature(&file.components[c]);
        if scale != F::one() {
            t.scale(scale);
        }
        t
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    spec: MethodSpec,
    init_seed: u64,
    stems: [Vec<Layer<F>>; 3],
    head: Vec<Layer<F>>,
}

/// Per-layer caches from a training forward pass.
#[derive(Debug, Clone)]
pub struct Trace<F> {
    stems: [Vec<Cache<F>>; 3],
    head: Vec<Cache<F>>,
}

fn stem<F: Real>(spec: &MethodSpec, stride: usize) -> Vec<Layer<F>> {
    let (cin, s) = (spec.input_channels(), spec.stem_channels);
    let conv = if spec.separable_stems() {
        Layer::PointwiseSeparableConv(PointwiseSeparableConv::zeros(3, cin, s, s, stride))
    } else {
        Layer::Conv2d(Conv2d::zeros(3, cin, s, stride, Padding::Same))
    };
    vec![conv, Layer::Relu]
}

/// Builds a model with seeded He/Xavier-uniform weights and zero biases.
pub fn build_model<F: Real>(spec: &MethodSpec, seed: u64) -> Result<Model<F>> {
    let mut model = Model::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.init_seed = seed;
    for layer in model.stems.iter_mut().flatten() {
        init_layer(layer, InitScheme::HeUniform, &mut rng);
    }
    for layer in &mut model.head {
        init_layer(layer, InitScheme::XavierUniform, &mut rng);
    }
    Ok(model)
}

impl<F: Real> Model<F> {
    /// Architecture with every parameter zero.
    pub fn zeros(spec: &MethodSpec) -> Result<Self> {
        spec.validate()?;
        let stems = [stem(spec, 2), stem(spec, 1), stem(spec, 1)];
        let (cw, ch) = spec.input_geometry.grids_420()[1];
        let (s, t, k) = (spec.stem_channels, spec.trunk_channels, spec.num_classes);
        let mut head = Vec::new();
        if spec.uses_attention() {
            let d = spec.token_dim();
            head.push(Layer::Flatten(FlattenMode::Spatial));
            head.push(Layer::PositionalEmbedding(PositionalEmbedding::zeros(cw * ch, d)));
            for _ in 0..spec.attention_layers {
                head.push(Layer::MultiHeadAttention(MultiHeadAttention::zeros(d, spec.attention_heads)?));
            }
            head.push(Layer::MeanPool);
            head.push(Layer::Dense(Dense::zeros(d, k)));
        } else {
            head.push(Layer::Conv2d(Conv2d::zeros(3, 3 * s, t, 1, Padding::Same)));
            head.push(Layer::Relu);
            for _ in 0..spec.residual_blocks {
                head.push(Layer::ResidualBlock(ResidualBlock::zeros(t)));
            }
            head.push(Layer::Conv2d(Conv2d::zeros(3, t, t, 2, Padding::Same)));
            head.push(Layer::Relu);
            head.push(Layer::Flatten(FlattenMode::All));
            head.push(Layer::Dense(Dense::zeros(cw.div_ceil(2) * ch.div_ceil(2) * t, k)));
        }
        Ok(Model { spec: spec.clone(), init_seed: 0, stems, head })
    }

    pub fn spec(&self) -> &MethodSpec {
        &self.spec
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub(crate) fn set_init_seed(&mut self, seed: u64) {
        self.init_seed = seed;
    }

    pub fn stems(&self) -> &[Vec<Layer<F>>; 3] {
        &self.stems
    }

    /// Layers after the channel concatenation.
    pub fn head(&self) -> &[Layer<F>] {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut [Layer<F>] {
        &mut self.head
    }

    fn layers(&self) -> impl Iterator<Item = (String, &Layer<F>)> {
        let stems = self.stems.iter().enumerate().flat_map(|(c, v)| v.iter().enumerate().map(move |(i, l)| (format!("stem{c}.{i}"), l)));
        stems.chain(self.head.iter().enumerate().map(|(i, l)| (format!("head.{i}"), l)))
    }

    /// Named parameters in a fixed order.
    pub fn params(&self) -> Vec<(String, &Tensor<F>)> {
        self.layers().flat_map(|(prefix, l)| l.params().into_iter().map(move |(n, t)| (format!("{prefix}.{n}"), t))).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        self.stems.iter_mut().flatten().chain(self.head.iter_mut()).flat_map(|l| l.params_mut()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<Tensor<F>> {
        self.params().iter().map(|(_, t)| Tensor::zeros(t.dims())).collect()
    }

    pub fn check_input(&self, input: &ModelInput<F>) -> Result<()> {
        for (c, (t, want)) in input.iter().zip(self.spec.input_dims()).enumerate() {
            if t.dims() != want {
                return Err(NnError::GeometryMismatch(format!(
                    "component {c}: model expects {want:?}, features are {:?}",
                    t.dims()
                )));
            }
        }
        Ok(())
    }

    /// Concatenation of the three stem outputs on the chroma grid.
    fn merge(&self, branches: [Tensor<F>; 3]) -> Result<Tensor<F>> {
        concat_channels(&[&branches[0], &branches[1], &branches[2]]).map_err(|_| {
            NnError::GeometryMismatch(format!(
                "stem outputs differ: Y {:?}, U {:?}, V {:?}",
                branches[0].dims(),
                branches[1].dims(),
                branches[2].dims()
            ))
        })
    }

    /// Logits of length `num_classes`.
    pub fn forward(&self, input: &ModelInput<F>) -> Result<Tensor<F>> {
        self.check_input(input)?;
        let mut branches = Vec::with_capacity(3);
        for (layers, x) in self.stems.iter().zip(input) {
            let mut h = x.clone();
            for l in layers {
                h = l.infer(&h)?;
            }
            branches.push(h);
        }
        let mut h = self.merge(branches.try_into().expect("three branches"))?;
        for l in &self.head {
            h = l.infer(&h)?;
        }
        Ok(h)
    }

    pub fn forward_train(&self, input: &ModelInput<F>) -> Result<(Tensor<F>, Trace<F>)> {
        self.check_input(input)?;
        let mut branches = Vec::with_capacity(3);
        let mut stem_caches: [Vec<Cache<F>>; 3] = Default::default();
        for ((layers, x), caches) in self.stems.iter().zip(input).zip(&mut stem_caches) {
            let mut h = x.clone();
            for l in layers {
                let (y, c) = l.forward(&h)?;
                caches.push(c);
                h = y;
            }
            branches.push(h);
        }
        let mut h = self.merge(branches.try_into().expect("three branches"))?;
        let mut head = Vec::with_capacity(self.head.len());
        for l in &self.head {
            let (y, c) = l.forward(&h)?;
            head.push(c);
            h = y;
        }
        Ok((h, Trace { stems: stem_caches, head }))
    }

    /// Backpropagates `d_logits`, accumulating into `grads` (ordered like
    /// [`Model::params`]). Returns the input gradients.
    pub fn backward(&self, trace: &Trace<F>, d_logits: &Tensor<F>, grads: &mut [Tensor<F>]) -> Result<ModelInput<F>> {
        let counts: Vec<usize> = self.stems.iter().flatten().chain(&self.head).map(|l| l.param_count()).collect();
        let mut offsets = Vec::with_capacity(counts.len());
        let mut acc = 0;
        for c in &counts {
            offsets.push(acc);
            acc += c;
        }
        let stem_layers: usize = self.stems.iter().map(Vec::len).sum();

        let mut g = d_logits.clone();
        for (i, (l, cache)) in self.head.iter().zip(&trace.head).enumerate().rev() {
            let idx = stem_layers + i;
            g = l.backward(cache, &g, &mut grads[offsets[idx]..offsets[idx] + counts[idx]])?;
        }
        let parts = split_channels(&g, &[self.spec.stem_channels; 3])?;
        let mut out = Vec::with_capacity(3);
        let mut base = 0;
        for ((layers, caches), mut g) in self.stems.iter().zip(&trace.stems).zip(parts) {
            for (i, (l, cache)) in layers.iter().zip(caches).enumerate().rev() {
                let idx = base + i;
                g = l.backward(cache, &g, &mut grads[offsets[idx]..offsets[idx] + counts[idx]])?;
            }
            base += layers.len();
            out.push(g);
        }
        Ok(out.try_into().expect("three components"))
    }

    /// On/off state of every ReLU in a traced forward pass.
    pub fn relu_pattern(&self, trace: &Trace<F>) -> Vec<bool> {
        let mut out = Vec::new();
        for (layers, caches) in self.stems.iter().zip(&trace.stems) {
            for (l, c) in layers.iter().zip(caches) {
                l.relu_pattern(c, &mut out);
            }
        }
        for (l, c) in self.head.iter().zip(&trace.head) {
            l.relu_pattern(c, &mut out);
        }
        out
    }

    pub fn predict(&self, input: &ModelInput<F>) -> Result<usize> {
        Ok(argmax(self.forward(input)?.data()))
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<F: Real>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
