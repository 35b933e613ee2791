//! Acceptance run: one `[PASS]`/`[FAIL]` line per criterion. Exits non-zero
//! if any criterion fails.

mod common;
#[path = "../../core/tests/common/mod.rs"]
mod corpus_ref;
#[path = "../../nn/tests/support/mod.rs"]
mod grad_support;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::*;
use corpus_ref::{is_q95_420, read_ref, RefDump};
use jpegclass::features::reconstruct_component;
use jpegclass::{decode_scan, parse_jpeg, verify_span_tiling, ExtractionConfig, FeatureMode};
use jpegclass_cli::commands::{extract, gradcheck, model, split};
use jpegclass_nn::{build_model, evaluate, load_split, train, DatasetManifest, MethodSpec, MetricsReport, Split, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus() -> Vec<(PathBuf, RefDump)> {
    let dir = core_fixtures().join("corpus");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "jpg"))
        .collect();
    paths.sort();
    paths.into_iter().map(|p| (p.clone(), read_ref(&p.with_extension("ref")))).collect()
}

fn name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

fn coefficients() -> Outcome {
    let start = Instant::now();
    let files: Vec<_> = corpus().into_iter().filter(|(p, r)| is_q95_420(p, r)).collect();
    ensure(files.len() >= 20, || format!("only {} quality-95 4:2:0 fixtures", files.len()))?;
    let mut coeffs = 0usize;
    for (path, r) in &files {
        let p = parse_jpeg(&std::fs::read(path).unwrap()).map_err(|e| format!("{}: {e}", name(path)))?;
        let (grid, _) = decode_scan(&p).map_err(|e| format!("{}: {e}", name(path)))?;
        for (c, rc) in r.components.iter().enumerate() {
            let g = &grid.components[c];
            ensure((g.grid_w, g.grid_h) == (rc.grid_w, rc.grid_h), || format!("{} component {c}: grid size", name(path)))?;
            for (i, want) in rc.coeffs.iter().enumerate() {
                ensure(&g.blocks[i].coeffs == want, || format!("{} component {c} block {i} differs", name(path)))?;
                coeffs += 64;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!("{} files, {coeffs} coefficients identical to libjpeg, {elapsed:.2?}", files.len()))
}

/// A one-bit shrink is a violation unless the span is the last one before a
/// restart or the stream end and the dropped bit is 1: that stream is
/// indistinguishable from valid byte-alignment padding. Shrinking such a span
/// by a full byte must still be caught.
fn tiling() -> Outcome {
    let files = corpus();
    let (mut detected, mut padding_like) = (0, 0);
    for (path, _) in &files {
        let p = parse_jpeg(&std::fs::read(path).unwrap()).unwrap();
        let (grid, scan) = decode_scan(&p).map_err(|e| format!("{}: {e}", name(path)))?;
        verify_span_tiling(&grid, &scan).map_err(|v| format!("{}: {v}", name(path)))?;
        let starts: std::collections::HashSet<usize> = grid.components.iter().flat_map(|g| g.spans.iter().map(|s| s.start_bit)).collect();
        for c in 0..grid.components.len() {
            let n = grid.components[c].spans.len();
            for i in [0, n / 2, n - 1] {
                let span = grid.components[c].spans[i];
                let interior = starts.contains(&span.end_bit);
                for cut in [1, 8] {
                    if span.len() <= cut {
                        continue;
                    }
                    let mut shrunk = grid.clone();
                    shrunk.components[c].spans[i].end_bit -= cut;
                    let caught = verify_span_tiling(&shrunk, &scan).is_err();
                    if cut == 1 && !interior && scan.bit(span.end_bit - 1) == 1 {
                        ensure(!caught, || format!("{}: padding-equivalent shrink of span {c}/{i} rejected", name(path)))?;
                        padding_like += 1;
                    } else {
                        ensure(caught, || format!("{}: shrink by {cut} of span {c}/{i} undetected", name(path)))?;
                        detected += 1;
                    }
                }
            }
            if n > 1 {
                let mut swapped = grid.clone();
                swapped.components[c].spans.swap(0, n - 1);
                ensure(verify_span_tiling(&swapped, &scan).is_err(), || format!("{}: swap in component {c} undetected", name(path)))?;
                detected += 1;
            }
        }
    }
    Ok(format!(
        "{} of {} scans tile exactly; {detected} shrink/swap mutants detected ({padding_like} one-bit shrinks at a stream or restart boundary drop a 1-bit and remain valid padding)",
        files.len(),
        files.len()
    ))
}

fn pixels() -> Outcome {
    let files = corpus();
    let (mut samples, mut worst) = (0usize, 0i32);
    for (path, r) in &files {
        let p = parse_jpeg(&std::fs::read(path).unwrap()).unwrap();
        let (grid, _) = decode_scan(&p).unwrap();
        for (c, rc) in r.components.iter().enumerate() {
            let plane = reconstruct_component(&grid, c, p.quant_table_for(c));
            let stride = grid.components[c].grid_w * 8;
            for y in 0..rc.height_in_blocks * 8 {
                for x in 0..rc.width_in_blocks * 8 {
                    let d = (plane[y * stride + x] as i32 - rc.plane[y * rc.plane_w + x] as i32).abs();
                    worst = worst.max(d);
                    samples += 1;
                }
            }
        }
    }
    ensure(worst <= 1, || format!("max deviation {worst}"))?;
    Ok(format!("{} files, {samples} samples, max deviation {worst}", files.len()))
}

fn gradients() -> Outcome {
    let mut lines = Vec::new();
    let mut check = |label: &str, t: grad_support::Tally| -> Result<(), String> {
        lines.push(format!("{label}: {} checks, max rel err {:.1e}, {:.2}% kink skips", t.checked, t.max_rel_err, 100.0 * t.skipped_fraction()));
        ensure(t.passed(), || format!("{label}: {:?} (kink fraction {:.4})", t.failures.first(), t.skipped_fraction()))
    };
    for f64_mode in [false, true] {
        let mut t = grad_support::Tally::default();
        for seed in 0..grad_support::SEEDS {
            let reports = if f64_mode { grad_support::layer_reports::<f64>(seed) } else { grad_support::layer_reports::<f32>(seed) };
            for (n, r) in reports {
                t.add(n, seed, &r);
            }
        }
        check(if f64_mode { "layers f64" } else { "layers f32" }, t)?;
        let reports = gradcheck::gradcheck(&[1, 2, 3, 4, 5], f64_mode, grad_support::SEEDS, 0).map_err(|e| e.to_string())?;
        let mut t = grad_support::Tally::default();
        for r in &reports {
            t.reports += r.seeds as usize;
            t.checked += r.checked;
            t.skipped += r.skipped_kinks;
            t.max_rel_err = t.max_rel_err.max(r.max_rel_err);
            if !r.passed() {
                t.failures.push(format!("method {} {}: {} failures", r.method, r.dtype, r.failures));
            }
        }
        check(if f64_mode { "models f64" } else { "models f32" }, t)?;
    }
    Ok(format!("13 layer kinds and methods 1-5, {} seeds each; {}", grad_support::SEEDS, lines.join("; ")))
}

/// Writes JPEGs, extracts both feature kinds and splits each.
struct Corpus {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Corpus {
    fn build(per_class: usize, size: usize, seed: u64, gen: Generator) -> Result<Corpus, String> {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        write_dataset(&root.join("img"), per_class, size, seed, gen);
        for mode in [FeatureMode::Transform, FeatureMode::Bitstream] {
            let feat = root.join(format!("{mode:?}"));
            let config = ExtractionConfig { mode, crop_width: jpegclass::DEFAULT_CROP_WIDTH, quality: Some(95) };
            extract::extract(&root.join("img"), &feat, &config).map_err(|e| e.to_string())?;
            split::split(&feat, &feat.join("manifest.jsonl"), 0).map_err(|e| e.to_string())?;
        }
        Ok(Corpus { _dir: dir, root })
    }

    fn features(&self, method: u8) -> PathBuf {
        self.root.join(if method == 1 { "Transform" } else { "Bitstream" })
    }

    fn manifest(&self, method: u8) -> PathBuf {
        self.features(method).join("manifest.jsonl")
    }
}

fn accuracy_is_trace(m: &MetricsReport) -> bool {
    let trace: u64 = (0..m.confusion.len()).map(|i| m.confusion[i][i]).sum();
    m.total() > 0 && m.accuracy == trace as f64 / m.total() as f64
}

fn capacity(reports: &mut Vec<MetricsReport>) -> Outcome {
    let start = Instant::now();
    let data = Corpus::build(20, 64, 1, texture)?;
    let mut parts = Vec::new();
    for method in 1..=5u8 {
        let manifest = DatasetManifest::load(&data.manifest(method)).map_err(|e| e.to_string())?;
        let mut all = Vec::new();
        for s in Split::ALL {
            all.extend(load_split::<f32>(&manifest, s, &data.features(method)).map_err(|e| e.to_string())?);
        }
        ensure(all.len() == 60, || format!("{} images", all.len()))?;
        let geometry = model::geometry_from_samples(&all).map_err(|e| e.to_string())?;
        let spec = MethodSpec { num_classes: 3, ..MethodSpec::new(method, geometry) };
        let config =
            TrainConfig { batch_size: 8, max_epochs: 200, early_stop_patience: 0, target_train_accuracy: Some(0.95), ..Default::default() };
        let (best, history) = train(build_model::<f32>(&spec, 0).map_err(|e| e.to_string())?, &all, &[], &config)
            .map_err(|e| format!("method {method}: {e}"))?;
        let report = evaluate(&best, &all, "train").map_err(|e| e.to_string())?;
        ensure(report.accuracy >= 0.95, || format!("method {method}: train accuracy {:.3} after {} epochs", report.accuracy, history.records.len()))?;
        parts.push(format!("M{method} {:.2}@{}", report.accuracy, history.records.len()));
        reports.push(report);
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= Duration::from_secs(15 * 60), || format!("took {elapsed:.0?}"))?;
    Ok(format!("default architecture, 60 images: {} (accuracy@epochs), {elapsed:.0?}", parts.join(", ")))
}

fn signal(reports: &mut Vec<MetricsReport>) -> Outcome {
    let start = Instant::now();
    let data = Corpus::build(250, 64, 2, texture)?;
    let config = TrainConfig { max_epochs: 40, early_stop_patience: 10, ..Default::default() };
    let arch = model::ArchOptions { stem_channels: Some(16), trunk_channels: Some(32), residual_blocks: Some(1), ..Default::default() };
    let mut parts = Vec::new();
    for method in [1u8, 2] {
        let ckpt = data.root.join(format!("m{method}.ckpt"));
        let summary = model::train_cmd(method, &data.manifest(method), &config, &arch, &ckpt, &ckpt.with_extension("csv"))
            .map_err(|e| e.to_string())?;
        let eval = model::eval_cmd(&data.manifest(method), &ckpt, Split::Test).map_err(|e| e.to_string())?;
        ensure(eval.metrics.accuracy >= 0.8, || format!("method {method}: test accuracy {:.3}", eval.metrics.accuracy))?;
        parts.push(format!("M{method} test {:.3} on {} images (best epoch {})", eval.metrics.accuracy, eval.count, summary.best_epoch));
        reports.push(eval.metrics);
    }
    Ok(format!("{}, {:.0?}", parts.join(", "), start.elapsed()))
}

fn metrics(runs: &[MetricsReport]) -> Outcome {
    let m = MetricsReport::from_confusion(vec![vec![2, 0], vec![1, 1]]);
    ensure(m.accuracy == 0.75 && m.macro_recall == 0.75, || format!("{m:?}"))?;
    ensure(m.macro_precision == 5.0 / 6.0, || format!("macroPrecision {}", m.macro_precision))?;
    ensure(m.macro_f1 == 11.0 / 15.0, || format!("macroF1 {}", m.macro_f1))?;
    let m = MetricsReport::from_predictions(2, [(0, 0), (0, 0), (1, 0), (1, 0)]);
    ensure(m.per_class[1].precision == 0.0 && m.macro_recall == 0.5, || format!("{m:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let k = rng.gen_range(2..8);
        let confusion: Vec<Vec<u64>> = (0..k).map(|_| (0..k).map(|_| rng.gen_range(0..20)).collect()).collect();
        let m = MetricsReport::from_confusion(confusion);
        ensure(m.total() == 0 || accuracy_is_trace(&m), || format!("{m:?}"))?;
    }
    ensure(!runs.is_empty() && runs.iter().all(accuracy_is_trace), || "a run's accuracy is not trace/sum".into())?;
    Ok(format!("hand examples exact (5/6, 11/15); accuracy = trace/sum on 50 random matrices and {} training runs", runs.len()))
}

fn determinism() -> Outcome {
    let data = Corpus::build(8, 32, 3, texture)?;
    let config = TrainConfig { batch_size: 4, max_epochs: 3, early_stop_patience: 0, seed: 11, ..Default::default() };
    let arch = model::ArchOptions {
        stem_channels: Some(4),
        trunk_channels: Some(8),
        residual_blocks: Some(1),
        attention_heads: Some(2),
        attention_layers: Some(1),
    };
    for method in 1..=5u8 {
        let mut csvs = Vec::new();
        for run in 0..2 {
            let ckpt = data.root.join(format!("det{method}_{run}.ckpt"));
            let history = ckpt.with_extension("csv");
            model::train_cmd(method, &data.manifest(method), &config, &arch, &ckpt, &history).map_err(|e| e.to_string())?;
            csvs.push(std::fs::read(&history).unwrap());
        }
        ensure(csvs[0] == csvs[1], || format!("method {method}: history CSVs differ"))?;
    }
    Ok("methods 1-5 trained twice with seed 11: history CSVs byte-identical".into())
}

fn full_scale_script() -> Outcome {
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../reproduce_c101.sh");
    let text = std::fs::read_to_string(&script).map_err(|e| format!("{}: {e}", script.display()))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = std::fs::metadata(&script).unwrap().permissions().mode();
        ensure(mode & 0o111 != 0, || "script is not executable".into())?;
    }
    for (method, acc) in [(1, "0.681"), (2, "0.595"), (3, "0.578"), (4, "0.481"), (5, "0.394")] {
        ensure(text.contains(acc), || format!("expected accuracy {acc} for method {method} not documented"))?;
    }
    for step in ["extract", "split", "train", "eval"] {
        ensure(text.contains(&format!("jpegclass {step}")) || text.contains(&format!("\" {step}")) || text.contains(&format!(" {step} ")), || {
            format!("pipeline step {step} missing")
        })?;
    }
    Ok("reproduce_c101.sh documents the full pipeline and expected accuracies; not executed here (full-scale only)".into())
}

fn main() {
    let mut runs = Vec::new();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut record = |label: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let outcome = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let (tag, text) = match &outcome {
            Ok(t) => ("PASS", t),
            Err(t) => ("FAIL", t),
        };
        println!("[{tag}] {label}: {text}");
        results.push((label, outcome));
    };
    record("1 coefficient oracle", &mut coefficients);
    record("2 span tiling", &mut tiling);
    record("3 pixel round-trip", &mut pixels);
    record("4 gradient suite", &mut gradients);
    record("5 capacity", &mut || capacity(&mut runs));
    record("6 desk-scale signal", &mut || signal(&mut runs));
    record("7 metrics", &mut || metrics(&runs));
    record("8 determinism", &mut determinism);
    record("9 full-scale script", &mut full_scale_script);
    let failed = results.iter().filter(|(_, o)| o.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
