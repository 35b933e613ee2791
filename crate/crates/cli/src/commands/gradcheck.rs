use jpegclass::ImageGeometry;
use jpegclass_nn::gradcheck::{grad_check, GradCheckOptions, ModelProbe};
use jpegclass_nn::{build_model, MethodSpec, Real, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliResult;

/// Small architecture used for finite-difference checks: 16×16 input,
/// 4-channel stems and trunk, one residual block, 2 heads, C = 6.
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

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MethodGradReport {
    pub method: u8,
    pub dtype: &'static str,
    pub seeds: u64,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub failures: usize,
}

impl MethodGradReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn check<F: Real>(method: u8, seeds: u64, base_seed: u64) -> CliResult<MethodGradReport> {
    let spec = micro_spec(method);
    let opts = GradCheckOptions::for_type::<F>();
    let mut out = MethodGradReport {
        method,
        dtype: if std::mem::size_of::<F>() == 4 { "f32" } else { "f64" },
        seeds,
        checked: 0,
        skipped_kinks: 0,
        max_rel_err: 0.0,
        tolerance: opts.tolerance,
        failures: 0,
    };
    for s in 0..seeds {
        let seed = base_seed.wrapping_add(s);
        let mut model = build_model::<F>(&spec, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for p in model.params_mut() {
            if p.dims().len() == 1 {
                *p = Tensor::from_fn(p.dims(), |_| F::from_f64(rng.gen_range(-0.2..0.2)));
            }
        }
        let inputs: Vec<Tensor<F>> = spec
            .input_dims()
            .iter()
            .map(|d| {
                Tensor::from_fn(d, |_| {
                    F::from_f64(if spec.uses_bitstream() { f64::from(u8::from(rng.gen_bool(0.5))) } else { rng.gen_range(-1.0..1.0) })
                })
            })
            .collect();
        let label = rng.gen_range(0..spec.num_classes);
        let r = grad_check(&mut ModelProbe { model, label }, &inputs, opts)?;
        out.checked += r.checked;
        out.skipped_kinks += r.skipped_kinks;
        out.max_rel_err = out.max_rel_err.max(r.max_rel_err);
        out.failures += r.failures.len();
    }
    Ok(out)
}

pub fn gradcheck(methods: &[u8], f64_mode: bool, seeds: u64, base_seed: u64) -> CliResult<Vec<MethodGradReport>> {
    methods
        .iter()
        .map(|&m| if f64_mode { check::<f64>(m, seeds, base_seed) } else { check::<f32>(m, seeds, base_seed) })
        .collect()
}
