use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Stop as soon as epoch-end training accuracy reaches this value.
    pub target_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            early_stop_patience: 10,
            seed: 0,
            target_train_accuracy: None,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted (parameters then never move).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NnError::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learningRate must be a finite non-negative number");
        }
        if self.batch_size == 0 {
            return bad("batchSize must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(len: usize) -> Self {
        Moments { m: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// One bias-corrected Adam update at step `t ≥ 1`.
pub fn adam_step<F: Real>(param: &mut Tensor<F>, grad: &Tensor<F>, moments: &mut Moments, t: u64, config: &TrainConfig) -> Result<()> {
    if param.dims() != grad.dims() || moments.m.len() != param.len() || moments.v.len() != param.len() {
        return Err(NnError::shape("adam_step", param.dims(), (grad.dims(), moments.m.len())));
    }
    assert!(t >= 1, "adam step counter starts at 1");
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    for (((p, g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(&mut moments.m).zip(&mut moments.v) {
        let g = g.as_f64();
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let step = config.learning_rate * (*m / c1) / ((*v / c2).sqrt() + config.epsilon);
        *p = F::from_f64(p.as_f64() - step);
    }
    Ok(())
}

/// Adam state for a list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: TrainConfig,
    pub t: u64,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new<F: Real>(config: TrainConfig, params: &[&Tensor<F>]) -> Self {
        Adam { config, t: 0, moments: params.iter().map(|p| Moments::zeros(p.len())).collect() }
    }

    pub fn step<F: Real>(&mut self, params: Vec<&mut Tensor<F>>, grads: &[Tensor<F>]) -> Result<()> {
        if params.len() != self.moments.len() || grads.len() != params.len() {
            return Err(NnError::shape("Adam::step", self.moments.len(), (params.len(), grads.len())));
        }
        self.t += 1;
        for ((p, g), m) in params.into_iter().zip(grads).zip(&mut self.moments) {
            adam_step(p, g, m, self.t, &self.config)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::new(&[1], vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = TrainConfig::default();
        let mut p = scalar(0.7);
        let mut mo = Moments::zeros(1);
        adam_step(&mut p, &scalar(0.0), &mut mo, 1, &cfg).unwrap();
        assert_eq!(p.data(), &[0.7]);

        let mut mo = Moments { m: vec![0.5], v: vec![0.25] };
        adam_step(&mut p, &scalar(0.0), &mut mo, 2, &cfg).unwrap();
        assert!((mo.m[0] - 0.45).abs() < 1e-15);
        assert!((mo.v[0] - 0.24975).abs() < 1e-15);
    }

    #[test]
    fn first_step_is_learning_rate() {
        let cfg = TrainConfig::default();
        for g in [3.0, -0.02, 1e3] {
            let mut p = scalar(0.0);
            adam_step(&mut p, &scalar(g), &mut Moments::zeros(1), 1, &cfg).unwrap();
            let want = -cfg.learning_rate * g.signum() / (1.0 + cfg.epsilon / g.abs());
            assert!((p.data()[0] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn descends_parabola() {
        let cfg = TrainConfig { learning_rate: 0.1, ..TrainConfig::default() };
        let mut x = scalar(1.0);
        let mut opt = Adam::new(cfg, &[&x]);
        for _ in 0..100 {
            let g = scalar(2.0 * x.data()[0]);
            opt.step(vec![&mut x], &[g]).unwrap();
        }
        assert!(x.data()[0].abs() < 0.1, "x = {}", x.data()[0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_ok());
        let json = r#"{"learningRate":0.01,"batchSize":8,"maxEpochs":3,"seed":9}"#;
        let cfg: TrainConfig = serde_json::from_str(json).unwrap();
        assert_eq!((cfg.batch_size, cfg.max_epochs, cfg.early_stop_patience), (8, 3, 10));
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr":1}"#).is_err());
    }
}
