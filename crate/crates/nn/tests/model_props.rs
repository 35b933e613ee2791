use jpegclass::ImageGeometry;
use jpegclass_nn::{
    argmax, build_model, evaluate, train, Layer, MethodSpec, MetricsReport, Model, NnError, Sample, StopReason, Tensor,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn micro(method: u8, size: usize) -> MethodSpec {
    MethodSpec {
        num_classes: 4,
        crop_width: 6,
        stem_channels: 4,
        trunk_channels: 4,
        residual_blocks: 1,
        attention_heads: 2,
        attention_layers: 1,
        ..MethodSpec::new(method, ImageGeometry::yuv420(size, size))
    }
}

fn random_input(spec: &MethodSpec, rng: &mut ChaCha8Rng) -> [Tensor<f64>; 3] {
    spec.input_dims().map(|d| {
        Tensor::from_fn(&d, |_| if spec.uses_bitstream() { f64::from(rng.gen_bool(0.5)) } else { rng.gen_range(-1.0..1.0) })
    })
}

/// Gives every bias a random value so the oracle exercises them.
fn randomize_biases(model: &mut Model<f64>, rng: &mut ChaCha8Rng) {
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    for (name, t) in names.iter().zip(model.params_mut()) {
        if name.ends_with("bias") {
            t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.2..0.2));
        }
    }
}

// Plain-array reference implementation of the method-1 graph.
struct Map {
    h: usize,
    w: usize,
    c: usize,
    v: Vec<f64>,
}

impl Map {
    fn of(t: &Tensor<f64>) -> Map {
        let d = t.dims();
        Map { h: d[0], w: d[1], c: d[2], v: t.data().to_vec() }
    }

    fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.v[(y * self.w + x) * self.c + c]
    }

    /// Zero-pads explicitly, then runs a valid correlation.
    fn conv_same(&self, w: &Tensor<f64>, b: &Tensor<f64>, stride: usize) -> Map {
        let k = w.dims()[0];
        let cout = w.dims()[3];
        let oh = self.h.div_ceil(stride);
        let ow = self.w.div_ceil(stride);
        let pad_h = ((oh - 1) * stride + k).saturating_sub(self.h);
        let pad_w = ((ow - 1) * stride + k).saturating_sub(self.w);
        let (ph, pw) = (self.h + pad_h, self.w + pad_w);
        let mut padded = vec![0.0; ph * pw * self.c];
        for y in 0..self.h {
            for x in 0..self.w {
                for c in 0..self.c {
                    padded[((y + pad_h / 2) * pw + x + pad_w / 2) * self.c + c] = self.at(y, x, c);
                }
            }
        }
        let wv = w.data();
        let mut v = vec![0.0; oh * ow * cout];
        for oy in 0..oh {
            for ox in 0..ow {
                for o in 0..cout {
                    let mut s = b.data()[o];
                    for i in 0..k {
                        for j in 0..k {
                            for c in 0..self.c {
                                let xv = padded[((oy * stride + i) * pw + ox * stride + j) * self.c + c];
                                s += xv * wv[((i * k + j) * self.c + c) * cout + o];
                            }
                        }
                    }
                    v[(oy * ow + ox) * cout + o] = s;
                }
            }
        }
        Map { h: oh, w: ow, c: cout, v }
    }

    fn relu(mut self) -> Map {
        self.v.iter_mut().for_each(|x| *x = x.max(0.0));
        self
    }

    fn add(mut self, other: &Map) -> Map {
        self.v.iter_mut().zip(&other.v).for_each(|(a, b)| *a += b);
        self
    }
}

fn oracle_method1(model: &Model<f64>, input: &[Tensor<f64>; 3]) -> Vec<f64> {
    let p: std::collections::HashMap<String, &Tensor<f64>> = model.params().into_iter().collect();
    let stems: Vec<Map> = (0..3)
        .map(|c| {
            let stride = if c == 0 { 2 } else { 1 };
            Map::of(&input[c]).conv_same(p[&format!("stem{c}.0.weight")], p[&format!("stem{c}.0.bias")], stride).relu()
        })
        .collect();
    let (h, w) = (stems[1].h, stems[1].w);
    let cs = stems[0].c;
    let mut cat = Map { h, w, c: 3 * cs, v: vec![0.0; h * w * 3 * cs] };
    for y in 0..h {
        for x in 0..w {
            for (s, m) in stems.iter().enumerate() {
                for c in 0..cs {
                    cat.v[(y * w + x) * 3 * cs + s * cs + c] = m.at(y, x, c);
                }
            }
        }
    }
    let trunk = cat.conv_same(p["head.0.weight"], p["head.0.bias"], 1).relu();
    let inner = trunk.conv_same(p["head.2.conv1.weight"], p["head.2.conv1.bias"], 1).relu();
    let inner = inner.conv_same(p["head.2.conv2.weight"], p["head.2.conv2.bias"], 1);
    let res = inner.add(&trunk).relu();
    let down = res.conv_same(p["head.3.weight"], p["head.3.bias"], 2).relu();
    let (dw, db) = (p["head.6.weight"], p["head.6.bias"]);
    let k = db.len();
    (0..k).map(|o| db.data()[o] + down.v.iter().enumerate().map(|(i, x)| x * dw.data()[i * k + o]).sum::<f64>()).collect()
}

#[test]
fn method1_forward_matches_composed_oracle() {
    for size in [16, 32] {
        let spec = micro(1, size);
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut model = build_model::<f64>(&spec, seed).unwrap();
            randomize_biases(&mut model, &mut rng);
            let input = random_input(&spec, &mut rng);
            let got = model.forward(&input).unwrap();
            let want = oracle_method1(&model, &input);
            assert_eq!(got.dims(), [4]);
            for (g, w) in got.data().iter().zip(&want) {
                assert!((g - w).abs() <= 1e-5 * w.abs().max(1.0), "size {size} seed {seed}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn attention_head_ignores_token_order_without_positions() {
    for method in [4, 5] {
        let spec = micro(method, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = build_model::<f64>(&spec, 3).unwrap();
        randomize_biases(&mut model, &mut rng);
        for layer in model.head_mut() {
            if let Layer::PositionalEmbedding(p) = layer {
                p.table.fill(0.0);
            }
        }
        let (n, d) = (spec.token_count(), spec.token_dim());
        let tokens = Tensor::from_fn(&[n, d], |_| rng.gen_range(-1.0..1.0));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        perm.swap(0, n / 2);
        let mut shuffled = Tensor::zeros(&[n, d]);
        for (dst, &src) in perm.iter().enumerate() {
            shuffled.data_mut()[dst * d..][..d].copy_from_slice(&tokens.data()[src * d..][..d]);
        }
        let run = |x: &Tensor<f64>| {
            let mut h = x.clone();
            for l in &model.head()[1..] {
                h = l.infer(&h).unwrap();
            }
            h
        };
        let (a, b) = (run(&tokens), run(&shuffled));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-9, "method {method}: {x} vs {y}");
        }
    }
}

#[test]
fn predict_is_argmax_of_forward() {
    for method in 1..=5 {
        let spec = micro(method, 32);
        let model = build_model::<f64>(&spec, method as u64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + method as u64);
        for _ in 0..10 {
            let input = random_input(&spec, &mut rng);
            let logits = model.forward(&input).unwrap();
            assert_eq!(model.predict(&input).unwrap(), argmax(logits.data()));
        }
    }
}

/// Labelled samples whose class shifts the mean of the luma input.
fn toy_samples(spec: &MethodSpec, n: usize, seed: u64) -> Vec<Sample<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % spec.num_classes;
            let mut input = random_input(spec, &mut rng);
            input[0].data_mut().iter_mut().for_each(|v| *v = *v * 0.5 + label as f64 * 0.5);
            Sample { input, label }
        })
        .collect()
}

fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig { batch_size: 4, max_epochs: 4, early_stop_patience: 0, seed, ..Default::default() }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let spec = micro(1, 16);
    let model = build_model::<f64>(&spec, 1).unwrap();
    let data = toy_samples(&spec, 12, 1);
    let config = TrainConfig { learning_rate: 0.0, ..quick_config(0) };
    let (trained, history) = train(model.clone(), &data, &[], &config).unwrap();
    assert_eq!(history.records.len(), 4);
    assert_eq!(trained, model);
}

#[test]
fn training_is_deterministic_for_a_seed() {
    for method in [1, 2, 4] {
        let spec = micro(method, 16);
        let data = toy_samples(&spec, 16, 2);
        let val = toy_samples(&spec, 8, 3);
        let run = |seed| train(build_model::<f64>(&spec, 7).unwrap(), &data, &val, &quick_config(seed)).unwrap();
        let (m1, h1) = run(5);
        let (m2, h2) = run(5);
        assert_eq!(m1, m2);
        assert_eq!(h1.to_csv(), h2.to_csv());
        let (m3, _) = run(6);
        assert_ne!(m1, m3, "method {method}: shuffle seed had no effect");
    }
}

#[test]
fn returned_model_is_the_best_validation_epoch() {
    let spec = micro(1, 16);
    let data = toy_samples(&spec, 24, 4);
    let val = toy_samples(&spec, 12, 5);
    let config = TrainConfig { max_epochs: 8, ..quick_config(1) };
    let (best, history) = train(build_model::<f64>(&spec, 2).unwrap(), &data, &val, &config).unwrap();
    let max = history.records.iter().map(|r| r.val_acc).fold(f64::MIN, f64::max);
    let first = history.records.iter().find(|r| r.val_acc == max).unwrap();
    assert_eq!(history.best_epoch, first.epoch);
    assert_eq!(evaluate(&best, &val, "val").unwrap().accuracy, max);
}

#[test]
fn early_stopping_respects_patience() {
    let spec = micro(1, 16);
    let data = toy_samples(&spec, 12, 6);
    let val = toy_samples(&spec, 8, 7);
    let config = TrainConfig { max_epochs: 30, early_stop_patience: 2, ..quick_config(2) };
    let (_, history) = train(build_model::<f64>(&spec, 3).unwrap(), &data, &val, &config).unwrap();
    let last = history.records.last().unwrap().epoch;
    if history.stop_reason == StopReason::EarlyStop {
        assert_eq!(last, history.best_epoch + 2);
    } else {
        assert_eq!(last, 30);
    }
}

#[test]
fn non_finite_input_is_reported() {
    let spec = micro(1, 16);
    let mut data = toy_samples(&spec, 8, 8);
    data[3].input[1].data_mut()[0] = f64::NAN;
    let err = train(build_model::<f64>(&spec, 4).unwrap(), &data, &[], &quick_config(3)).unwrap_err();
    assert!(matches!(err, NnError::NonFiniteLoss { epoch: 1, .. }), "{err:?}");
}

#[test]
fn mismatched_input_geometry_is_rejected() {
    let model = build_model::<f64>(&micro(1, 32), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let input = random_input(&micro(1, 16), &mut rng);
    assert!(matches!(model.forward(&input), Err(NnError::GeometryMismatch(_))));
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Mean of small fractions over a common denominator, divided once.
fn mean_of(fracs: &[(u64, u64)]) -> f64 {
    let (mut num, mut den) = (0u128, 1u128);
    for &(n, d) in fracs {
        if d == 0 {
            continue;
        }
        let d = d as u128;
        let l = den / gcd(den, d) * d;
        num = num * (l / den) + n as u128 * (l / d);
        den = l;
    }
    den *= fracs.len() as u128;
    let g = gcd(num, den);
    assert!(den / g < 1 << 53, "denominator too large for an exact division");
    (num / g) as f64 / (den / g) as f64
}

// Second implementation working from (true, predicted) pairs directly.
fn naive_metrics(k: usize, pairs: &[(usize, usize)]) -> (f64, Vec<(f64, f64, f64)>, [f64; 3]) {
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    let accuracy = if pairs.is_empty() { 0.0 } else { correct as f64 / pairs.len() as f64 };
    let div = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let mut per = Vec::new();
    let mut fracs = [Vec::new(), Vec::new(), Vec::new()];
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as u64;
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count() as u64;
        let fn_ = pairs.iter().filter(|&&(t, p)| t == c && p != c).count() as u64;
        let parts = [(tp, tp + fp), (tp, tp + fn_), (2 * tp, 2 * tp + fp + fn_)];
        per.push((div(parts[0].0, parts[0].1), div(parts[1].0, parts[1].1), div(parts[2].0, parts[2].1)));
        for (f, p) in fracs.iter_mut().zip(parts) {
            f.push(p);
        }
    }
    (accuracy, per, [mean_of(&fracs[0]), mean_of(&fracs[1]), mean_of(&fracs[2])])
}

#[test]
fn metrics_agree_with_naive_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let k = rng.gen_range(2..7);
        let n = rng.gen_range(0..60);
        let pairs: Vec<(usize, usize)> = (0..n).map(|_| (rng.gen_range(0..k), rng.gen_range(0..k))).collect();
        let report = MetricsReport::from_predictions(k, pairs.iter().copied());
        let (accuracy, per, means) = naive_metrics(k, &pairs);
        assert_eq!(report.accuracy, accuracy);
        assert_eq!(report.total(), n as u64);
        for (m, (p, r, f)) in report.per_class.iter().zip(&per) {
            assert_eq!((m.precision, m.recall, m.f1), (*p, *r, *f));
        }
        assert_eq!([report.macro_precision, report.macro_recall, report.macro_f1], means);
    }
}
