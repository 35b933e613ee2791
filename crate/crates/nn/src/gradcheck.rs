//! Central-difference gradient checking.

use serde::Serialize;

use crate::error::Result;
use crate::layers::Layer;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Something with a scalar loss whose gradients can be computed
/// analytically with respect to its inputs and parameters.
pub trait Differentiable<F: Real> {
    fn loss(&self, inputs: &[Tensor<F>]) -> Result<f64>;
    /// `(d_inputs, d_params)`, ordered like `inputs` and `params_mut`.
    fn gradients(&self, inputs: &[Tensor<F>]) -> Result<(Vec<Tensor<F>>, Vec<Tensor<F>>)>;
    fn params_mut(&mut self) -> Vec<&mut Tensor<F>>;
    /// On/off state of every ReLU at `inputs`. A perturbation that changes
    /// it straddles a kink, where central differences are meaningless.
    fn relu_pattern(&self, _inputs: &[Tensor<F>]) -> Result<Vec<bool>> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Lower bound on the denominator of the relative error.
    pub floor: f64,
    pub tolerance: f64,
}

impl GradCheckOptions {
    /// Step 1e-3 at f32, 1e-5 at f64. The floor keeps near-zero gradients
    /// from being judged on rounding noise.
    pub fn for_type<F: Real>() -> Self {
        if std::mem::size_of::<F>() == 4 {
            GradCheckOptions { step: 1e-3, floor: 1.0, tolerance: 1e-3 }
        } else {
            GradCheckOptions { step: 1e-5, floor: 1e-4, tolerance: 1e-5 }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradMismatch {
    /// `input[i]` or `param[i]`.
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradReport {
    pub checked: usize,
    /// Elements whose ±step perturbation crossed a ReLU kink.
    pub skipped_kinks: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn skipped_fraction(&self) -> f64 {
        self.skipped_kinks as f64 / (self.checked + self.skipped_kinks).max(1) as f64
    }
}

pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares analytic gradients of every input and parameter element with
/// central differences. Elements whose perturbation flips a ReLU are
/// counted in `skipped_kinks` instead of being compared.
pub fn grad_check<F: Real, D: Differentiable<F>>(frag: &mut D, inputs: &[Tensor<F>], opts: GradCheckOptions) -> Result<GradReport> {
    let (d_in, d_par) = frag.gradients(inputs)?;
    let base = frag.relu_pattern(inputs)?;
    let mut report =
        GradReport { checked: 0, skipped_kinks: 0, max_rel_err: 0.0, tolerance: opts.tolerance, failures: Vec::new() };
    let mut record = |name: String, index: usize, analytic: f64, probe: Probe| {
        if probe.crossed {
            report.skipped_kinks += 1;
            return;
        }
        let e = rel_err(analytic, probe.numeric, opts.floor);
        report.checked += 1;
        report.max_rel_err = report.max_rel_err.max(e);
        if !(e <= opts.tolerance) {
            report.failures.push(GradMismatch { tensor: name, index, analytic, numeric: probe.numeric, rel_err: e });
        }
    };

    let mut work = inputs.to_vec();
    for t in 0..work.len() {
        for i in 0..work[t].len() {
            let probe = central(work[t].data()[i], opts.step, &base, |v| {
                work[t].data_mut()[i] = v;
                (frag.loss(&work), frag.relu_pattern(&work))
            })?;
            record(format!("input[{t}]"), i, d_in[t].data()[i].as_f64(), probe);
        }
    }

    let n_params = frag.params_mut().len();
    for p in 0..n_params {
        let len = frag.params_mut()[p].len();
        for i in 0..len {
            let orig = frag.params_mut()[p].data()[i];
            let probe = central(orig, opts.step, &base, |v| {
                frag.params_mut()[p].data_mut()[i] = v;
                (frag.loss(inputs), frag.relu_pattern(inputs))
            })?;
            record(format!("param[{p}]"), i, d_par[p].data()[i].as_f64(), probe);
        }
    }
    Ok(report)
}

struct Probe {
    numeric: f64,
    crossed: bool,
}

/// Evaluates at `orig ± step` through `set`, restoring `orig` afterwards.
fn central<F: Real>(
    orig: F,
    step: f64,
    base: &[bool],
    mut set: impl FnMut(F) -> (Result<f64>, Result<Vec<bool>>),
) -> Result<Probe> {
    let plus = F::from_f64(orig.as_f64() + step);
    let minus = F::from_f64(orig.as_f64() - step);
    let (lp, pp) = set(plus);
    let (lm, pm) = set(minus);
    let _ = set(orig);
    let crossed = pp? != base || pm? != base;
    Ok(Probe { numeric: (lp? - lm?) / (plus.as_f64() - minus.as_f64()), crossed })
}

/// A single layer under the scalar loss `Σ r ⊙ layer(x)` for a fixed `r`.
#[derive(Debug, Clone)]
pub struct LayerProbe<F> {
    pub layer: Layer<F>,
    pub projection: Tensor<F>,
}

impl<F: Real> Differentiable<F> for LayerProbe<F> {
    fn loss(&self, inputs: &[Tensor<F>]) -> Result<f64> {
        Ok(self.layer.infer(&inputs[0])?.dot(&self.projection))
    }

    fn gradients(&self, inputs: &[Tensor<F>]) -> Result<(Vec<Tensor<F>>, Vec<Tensor<F>>)> {
        let (_, cache) = self.layer.forward(&inputs[0])?;
        let mut grads = self.layer.zero_grads();
        let dx = self.layer.backward(&cache, &self.projection, &mut grads)?;
        Ok((vec![dx], grads))
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        self.layer.params_mut()
    }

    fn relu_pattern(&self, inputs: &[Tensor<F>]) -> Result<Vec<bool>> {
        let (_, cache) = self.layer.forward(&inputs[0])?;
        let mut out = Vec::new();
        self.layer.relu_pattern(&cache, &mut out);
        Ok(out)
    }
}

/// A full model under cross-entropy loss for a fixed label.
#[derive(Debug, Clone)]
pub struct ModelProbe<F> {
    pub model: crate::models::Model<F>,
    pub label: usize,
}

impl<F: Real> Differentiable<F> for ModelProbe<F> {
    fn loss(&self, inputs: &[Tensor<F>]) -> Result<f64> {
        let input: [Tensor<F>; 3] = [inputs[0].clone(), inputs[1].clone(), inputs[2].clone()];
        let logits = self.model.forward(&input)?;
        Ok(crate::layers::softmax_cross_entropy(logits.data(), self.label).0)
    }

    fn gradients(&self, inputs: &[Tensor<F>]) -> Result<(Vec<Tensor<F>>, Vec<Tensor<F>>)> {
        let input: [Tensor<F>; 3] = [inputs[0].clone(), inputs[1].clone(), inputs[2].clone()];
        let (logits, trace) = self.model.forward_train(&input)?;
        let (_, d) = crate::layers::softmax_cross_entropy(logits.data(), self.label);
        let mut grads = self.model.zero_grads();
        let dx = self.model.backward(&trace, &Tensor::new(logits.dims(), d)?, &mut grads)?;
        Ok((dx.to_vec(), grads))
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        self.model.params_mut()
    }

    fn relu_pattern(&self, inputs: &[Tensor<F>]) -> Result<Vec<bool>> {
        let input: [Tensor<F>; 3] = [inputs[0].clone(), inputs[1].clone(), inputs[2].clone()];
        let (_, trace) = self.model.forward_train(&input)?;
        Ok(self.model.relu_pattern(&trace))
    }
}
