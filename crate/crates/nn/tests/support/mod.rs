//! Gradient-check cases shared by the gradient tests and the acceptance run.
#![allow(dead_code)]

use jpegclass::ImageGeometry;
use jpegclass_nn::gradcheck::{grad_check, GradCheckOptions, GradReport, LayerProbe, ModelProbe};
use jpegclass_nn::init::{init_layer, InitScheme};
use jpegclass_nn::layers::*;
use jpegclass_nn::{build_model, Layer, MethodSpec, Real, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEEDS: u64 = 20;

pub fn random<F: Real>(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor<F> {
    Tensor::from_fn(dims, |_| F::from_f64(rng.gen_range(-1.0..1.0)))
}

pub fn probe<F: Real>(mut layer: Layer<F>, input_dims: &[usize], seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_layer(&mut layer, InitScheme::XavierUniform, &mut rng);
    // non-zero biases so their gradients are exercised away from the init
    for p in layer.params_mut() {
        if p.dims().len() == 1 {
            *p = random(p.dims(), &mut rng);
        }
    }
    let x: Tensor<F> = random(input_dims, &mut rng);
    let out_dims = layer.infer(&x).unwrap().dims().to_vec();
    let projection = random(&out_dims, &mut rng);
    let mut probe = LayerProbe { layer, projection };
    grad_check(&mut probe, &[x], GradCheckOptions::for_type::<F>()).unwrap()
}

/// Totals over many reports.
#[derive(Debug, Default)]
pub struct Tally {
    pub reports: usize,
    pub checked: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
    pub max_rel_err: f64,
}

impl Tally {
    pub fn add(&mut self, name: &str, seed: u64, r: &GradReport) {
        self.reports += 1;
        self.checked += r.checked;
        self.skipped += r.skipped_kinks;
        self.max_rel_err = self.max_rel_err.max(r.max_rel_err);
        if r.checked == 0 || !r.passed() {
            self.failures.push(format!("{name} seed {seed}: max rel err {:.3e}, first failure {:?}", r.max_rel_err, r.failures.first()));
        }
    }

    /// Fraction of perturbations that straddled a ReLU kink and were skipped.
    pub fn skipped_fraction(&self) -> f64 {
        self.skipped as f64 / (self.checked + self.skipped).max(1) as f64
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.skipped_fraction() <= 0.01
    }

    pub fn assert_passed(&self) {
        assert!(self.failures.is_empty(), "{:#?}", self.failures);
        assert!(self.skipped_fraction() <= 0.01, "{} of {} perturbations crossed a ReLU kink", self.skipped, self.checked + self.skipped);
    }
}

/// Gradient reports for every layer kind at one seed; shapes vary with the seed.
pub fn layer_reports<F: Real>(seed: u64) -> Vec<(&'static str, GradReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    let h = rng.gen_range(2..6);
    let w = rng.gen_range(2..6);
    let cin = rng.gen_range(1..4);
    let cout = rng.gen_range(1..4);
    let stride = rng.gen_range(1..3);
    let cases: Vec<(&str, Layer<F>, Vec<usize>)> = vec![
        ("conv same", Layer::Conv2d(Conv2d::zeros(3, cin, cout, stride, Padding::Same)), vec![h, w, cin]),
        ("conv valid", Layer::Conv2d(Conv2d::zeros(2, cin, cout, stride, Padding::Valid)), vec![h, w, cin]),
        (
            "separable",
            Layer::PointwiseSeparableConv(PointwiseSeparableConv::zeros(3, cin, 2, cout, stride)),
            vec![h, w, cin],
        ),
        ("residual", Layer::ResidualBlock(ResidualBlock::zeros(cin)), vec![h, w, cin]),
        ("dense 4->3", Layer::Dense(Dense::zeros(4, 3)), vec![4]),
        ("dense rows", Layer::Dense(Dense::zeros(cin, cout)), vec![h, cin]),
        ("softmax", Layer::Softmax, vec![h, w]),
        ("attention", Layer::MultiHeadAttention(MultiHeadAttention::zeros(4, 2).unwrap()), vec![h, 4]),
        ("attention 1 head", Layer::MultiHeadAttention(MultiHeadAttention::zeros(3, 1).unwrap()), vec![w, 3]),
        ("flatten", Layer::Flatten(FlattenMode::All), vec![h, w, cin]),
        ("tokens", Layer::Flatten(FlattenMode::Spatial), vec![h, w, cin]),
        ("positional", Layer::PositionalEmbedding(PositionalEmbedding::zeros(h, 3)), vec![h, 3]),
        ("mean pool", Layer::MeanPool, vec![h, cin]),
    ];
    cases.into_iter().map(|(name, layer, dims)| (name, probe(layer, &dims, seed))).collect()
}

pub fn micro_spec(method: u8) -> MethodSpec {
    MethodSpec {
        num_classes: 3,
        crop_width: 6,
        stem_channels: 4,
        trunk_channels: 4,
        residual_blocks: 1,
        attention_heads: 2,
        attention_layers: 2,
        ..MethodSpec::new(method, ImageGeometry::yuv420(16, 16))
    }
}

pub fn micro_model<F: Real>(method: u8, seed: u64) -> GradReport {
    let spec = micro_spec(method);
    let mut model = build_model::<F>(&spec, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    // perturb the zero-initialized biases so every path carries signal
    for p in model.params_mut() {
        if p.dims().len() == 1 {
            *p = Tensor::from_fn(p.dims(), |_| F::from_f64(rng.gen_range(-0.2..0.2)));
        }
    }
    let inputs: Vec<Tensor<F>> = spec
        .input_dims()
        .iter()
        .map(|d| {
            if spec.uses_bitstream() {
                Tensor::from_fn(d, |_| F::from_f64(f64::from(u8::from(rng.gen_bool(0.5)))))
            } else {
                random(d, &mut rng)
            }
        })
        .collect();
    let label = rng.gen_range(0..spec.num_classes);
    let mut probe = ModelProbe { model, label };
    grad_check(&mut probe, &inputs, GradCheckOptions::for_type::<F>()).unwrap()
}
