//! Acceptance run: every criterion at its stated tolerance, one PASS/FAIL
//! line each. Run with `cargo test --test acceptance -- --nocapture`.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{brute_force_score, naive_attention, naive_conv, Matrix};
use madcnn::data::{fit_normalizer, make_dataset, read_trace, write_trace, FRAME_LEN};
use madcnn::eval::{
    comparison_table_csv, compute_report, continuous_filter, extract_intervals, infer_corpus, score_traces,
    DetectionReport, ScoringRules,
};
use madcnn::kernels::gradcheck::{
    AttentionObjective, BceObjective, ConvObjective, GeluObjective, LinearObjective, PoolObjective, SoftmaxObjective,
};
use madcnn::kernels::{conv1d_dilated, gradient_check, self_attention, AttentionParams, ConvParams, Differentiable, FeatureMap};
use madcnn::model::{
    build_model, forward_values, load_weights, save_weights, ModelConfig, ModelObjective, Variant,
};
use madcnn::sim::{generate_corpus, load_corpus, write_corpus, SimConfig, Split};
use madcnn::train::{train, train_with_progress, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const E2E_SCALE: f64 = 0.25;
const E2E_SEED: u64 = 2024;
const ABLATION_SCALE: f64 = 0.01;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Ledger {
    lines: Vec<(usize, &'static str, bool, String)>,
}

impl Ledger {
    fn run(&mut self, id: usize, name: &'static str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (pass, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let line = format!("{} [{id}] {name}: {detail} ({:.1} s)", if pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
        println!("{line}");
        self.lines.push((id, name, pass, line));
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rows(m: &FeatureMap) -> Matrix {
    (0..m.channels()).map(|c| m.row(c).to_vec()).collect()
}

fn random_matrix(r: &mut ChaCha8Rng, ch: usize, len: usize) -> Matrix {
    (0..ch).map(|_| (0..len).map(|_| r.gen_range(-2.0..2.0)).collect()).collect()
}

fn random_bursty(r: &mut ChaCha8Rng, len: usize, max_run: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut v = r.gen::<bool>();
    while out.len() < len {
        let run = r.gen_range(1..=max_run);
        out.extend(std::iter::repeat_n(u8::from(v), run));
        v = !v;
    }
    out.truncate(len);
    out
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut kernel_worst = [0.0f64; 7];
    for seed in 0..50u64 {
        let mut r = rng(seed);
        let ops: Vec<Box<dyn Differentiable>> = vec![
            Box::new(LinearObjective::new(3, 4, seed)),
            Box::new(ConvObjective::new(2, 3, 3, [1, 4, 8][seed as usize % 3], 11, seed)),
            Box::new(PoolObjective::new(3, 11, seed)),
            Box::new(GeluObjective::new(16, seed)),
            Box::new(SoftmaxObjective::new(5, seed)),
            Box::new(AttentionObjective::new(4, 3, 5, 1 + seed as usize % 4, seed)),
            Box::new(BceObjective { label: (seed % 2) as u8 }),
        ];
        for (i, op) in ops.iter().enumerate() {
            let mut x: Vec<f64> = (0..op.dim()).map(|_| r.gen_range(-1.0..1.0)).collect();
            if i == 6 {
                x[0] = r.gen_range(0.05..0.95);
            }
            kernel_worst[i] = kernel_worst[i].max(gradient_check(op.as_ref(), &x, 1e-5).unwrap());
        }
    }
    let mut model_worst: f64 = 0.0;
    for seed in 0..50u64 {
        let params = build_model(ModelConfig::for_variant(Variant::Mad), seed).unwrap();
        let mut r = rng(1000 + seed);
        let frame = loop {
            let f: Vec<f64> = (0..FRAME_LEN).map(|_| r.gen_range(0.0..1.0)).collect();
            if forward_values(&params, &f).unwrap().1.pool_margin() > 1e-3 {
                break f;
            }
        };
        let op = ModelObjective::new(params.clone(), (seed % 2) as u8);
        model_worst = model_worst.max(gradient_check(&op, &op.point(&params, &frame), 1e-5).unwrap());
    }
    let elapsed = start.elapsed();
    let k = kernel_worst.iter().copied().fold(0.0, f64::max);
    ensure(
        k < 1e-4 && model_worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!("kernel max rel err {k:.2e}, MAD+BCE max rel err {model_worst:.2e} over 50 seeds, {:.1} s (< 60 s)", elapsed.as_secs_f64()),
    )
}

fn oracles() -> Outcome {
    let start = Instant::now();
    let mut r = rng(7);
    let mut conv_err: f64 = 0.0;
    for case in 0..100 {
        let (out, inp, d) = (r.gen_range(1..17), r.gen_range(1..5), [1, 2, 4, 8][case % 4]);
        let len = r.gen_range(3..16);
        let p = ConvParams {
            out_channels: out,
            in_channels: inp,
            kernel_size: 3,
            dilation: d,
            weights: (0..out * inp * 3).map(|_| r.gen_range(-1.0..1.0)).collect(),
            bias: (0..out).map(|_| r.gen_range(-1.0..1.0)).collect(),
        };
        let x = random_matrix(&mut r, inp, len);
        let got = rows(&conv1d_dilated(&FeatureMap::new(inp, len, x.concat()).unwrap(), &p).unwrap());
        conv_err = conv_err.max(max_abs_diff(&got.concat(), &naive_conv(&x, &p).concat()));
    }
    let mut att_err: f64 = 0.0;
    for _ in 0..100 {
        let (d, s1, s, n) = (r.gen_range(1..8), r.gen_range(1..8), r.gen_range(1..8), r.gen_range(1..6));
        let p = AttentionParams {
            input_dim: d,
            key_dim: s1,
            value_dim: s,
            w_query: (0..s1 * d).map(|_| r.gen_range(-1.0..1.0)).collect(),
            w_key: (0..s1 * d).map(|_| r.gen_range(-1.0..1.0)).collect(),
            w_value: (0..s * d).map(|_| r.gen_range(-1.0..1.0)).collect(),
        };
        let x = random_matrix(&mut r, d, n);
        let (z, _) = self_attention(&FeatureMap::new(d, n, x.concat()).unwrap(), &p).unwrap();
        att_err = att_err.max(max_abs_diff(&rows(&z).concat(), &naive_attention(&x, &p).concat()));
    }
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = r.gen_range(1..3000);
        let dec = random_bursty(&mut r, len, 40);
        let lab = random_bursty(&mut r, len, 120);
        let rules = ScoringRules { detect_window_ms: r.gen_range(1..400), merge_gap_ms: r.gen_range(1..30) };
        let got = compute_report(&dec, &lab, &rules).unwrap();
        let want = brute_force_score(&dec, &lab, rules.detect_window_ms, rules.merge_gap_ms);
        if (got.collisions_total, got.dfn, &got.dd_values, got.fpn) != (want.collisions, want.dfn, &want.dd, want.fpn) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(
        conv_err <= 1e-12 && att_err <= 1e-12 && mismatches == 0 && elapsed < Duration::from_secs(60),
        format!(
            "conv max err {conv_err:.1e}, attention max err {att_err:.1e} (100 cases each, tol 1e-12), scorer mismatches {mismatches}/1000, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn shape_audit() -> Outcome {
    let frame: Vec<f64> = (0..FRAME_LEN).map(|i| (i as f64 * 0.37).sin().abs()).collect();
    let mut problems = Vec::new();
    for v in Variant::ALL {
        let (m, d, a) = v.flags();
        let params = build_model(ModelConfig::for_variant(v), 3).unwrap();
        let (pred, cache) = forward_values(&params, &frame).unwrap();
        let branches = if m { 2 } else { 1 };
        let (in_ch, fc_out) = if m { (2, 32) } else { (4, 64) };
        let dil = if d { [4, 8] } else { [1, 1] };
        let mut check = |ok: bool, what: &str| {
            if !ok {
                problems.push(format!("{v}: {what}"));
            }
        };
        check(params.branches.len() == branches && cache.branches.len() == branches, "branch count");
        for (br, bc) in params.branches.iter().zip(&cache.branches) {
            check(br.conv1.kernel_size == 3 && br.conv2.kernel_size == 3, "kernel size");
            check([br.conv1.dilation, br.conv2.dilation] == dil, "dilations");
            check(br.conv1.in_channels == in_ch && br.conv1.out_channels == 16, "conv1 channels");
            check(br.conv2.in_channels == 16 && br.conv2.out_channels == 32, "conv2 channels");
            check((bc.input.channels(), bc.input.length()) == (in_ch, 11), "input map");
            check((bc.conv1_pre.channels(), bc.conv1_pre.length()) == (16, 11), "conv1 output (stride 1)");
            check((bc.pool1_out.channels(), bc.pool1_out.length()) == (16, 5), "pool1 output");
            check((bc.conv2_pre.channels(), bc.conv2_pre.length()) == (32, 5), "conv2 output (stride 1)");
            check(bc.flat.len() == 64, "flatten");
            check(bc.fc_pre.len() == fc_out && br.fc.out_dim == fc_out, "branch FC");
        }
        check(cache.fused.len() == 64, "64-dim concatenation");
        check(params.attention.is_some() == a, "attention presence");
        if let (Some(att), Some((tokens, _))) = (&params.attention, &cache.attention) {
            check((tokens.channels(), tokens.length()) == (32, 2), "attention tokens");
            check((att.input_dim, att.key_dim, att.value_dim) == (32, 32, 32), "single-head projections");
        }
        check(cache.head_in.len() == 64 && params.head.out_dim == 64 && cache.head_out.len() == 64, "FC 64");
        check(params.output.out_dim == 2 && cache.probs.len() == 2, "2-class softmax");
        check((pred.p_collision + pred.p_no_collision - 1.0).abs() < 1e-9, "softmax sum");
    }
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let params = build_model(ModelConfig::for_variant(Variant::ALL[i % 5]), (i / 5) as u64 % 20);
        let f: Vec<f64> = (0..FRAME_LEN).map(|_| r.gen()).collect();
        let (p, _) = forward_values(params.as_ref().unwrap(), &f).unwrap();
        worst = worst.max((p.p_collision + p.p_no_collision - 1.0).abs());
    }
    ensure(
        problems.is_empty() && worst <= 1e-9,
        format!("5 variants audited, issues {problems:?}; softmax max |sum-1| {worst:.1e} on 1e4 frames"),
    )
}

fn cf_laws() -> Outcome {
    let mut r = rng(13);
    let rules = ScoringRules::default();
    let mut violations = Vec::new();
    for case in 0..10_000 {
        let len = r.gen_range(50..1500);
        let raw = random_bursty(&mut r, len, 30);
        let lab = random_bursty(&mut r, len, 150);
        if continuous_filter(&raw, 0) != raw {
            violations.push(format!("case {case}: duration 0 not identity"));
        }
        let onsets: Vec<usize> = extract_intervals(&lab).iter().map(|iv| iv.start).collect();
        let mut prev: Option<(usize, usize, BTreeMap<usize, usize>)> = None;
        for d in 0..=27 {
            let rep = compute_report(&continuous_filter(&raw, d), &lab, &rules).unwrap();
            let f = continuous_filter(&raw, d);
            let delays: BTreeMap<usize, usize> = onsets
                .iter()
                .filter_map(|&s| (s..len).take(rules.detect_window_ms + 1).find(|&t| f[t] == 1).map(|t| (s, t - s)))
                .collect();
            if let Some((fpn, dfn, old)) = &prev {
                if rep.fpn > *fpn || rep.dfn < *dfn || delays.iter().any(|(s, dd)| old.get(s).is_some_and(|o| dd < o)) {
                    violations.push(format!("case {case}: law broken at duration {d}"));
                }
            }
            prev = Some((rep.fpn, rep.dfn, delays));
        }
    }
    ensure(violations.is_empty(), format!("1e4 random sequences, durations 0..=27, violations {}", violations.len()))
}

fn paper_row(level: &str) -> (&'static str, &'static str, &'static str) {
    match level {
        "4" => ("0/172", "11.3095", "183"),
        "3" => ("0/172", "12.4093", "261"),
        "2" => ("0/172", "12.4319", "137"),
        _ => ("0/516", "12.0502", "581"),
    }
}

fn print_report(reports: &[&DetectionReport]) {
    println!("  stiffness  cf  DFn       DD(ms)     FPn    | reference DFn  DD(ms)   FPn");
    for r in reports {
        let mut rows: Vec<(String, &madcnn::eval::EventScore)> =
            r.by_level.iter().rev().map(|(l, s)| (l.to_string(), s)).collect();
        rows.push(("total".into(), &r.total));
        for (name, s) in rows {
            let (pd, pdd, pf) = paper_row(&name);
            println!(
                "  {name:<9} {:>3}  {:<9} {:>9.4}  {:>5}  | {pd:<13} {pdd:<8} {pf}",
                r.cf_ms,
                s.dfn_ratio(),
                s.dd_mean(),
                s.fpn
            );
        }
    }
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let corpus = generate_corpus(&SimConfig::default(), E2E_SEED, E2E_SCALE).unwrap();
    let trace = &corpus.get(Split::TrainCollision, 4).unwrap().trace;
    let stats = fit_normalizer(&[trace]).unwrap();
    let data = make_dataset(&[trace], &stats, 0).unwrap();
    let positives = data.iter().filter(|f| f.label == 1).count();
    println!("  corpus seed {E2E_SEED}, scale {E2E_SCALE}: {} training frames, {positives} positive", data.len());
    let result = train_with_progress(&ModelConfig::for_variant(Variant::Mad), &data, &TrainConfig::default(), |e, l| {
        if e == 1 || e % 5 == 0 {
            println!("  epoch {e:>2}  loss {l:.6}");
        }
    })
    .unwrap();
    let h = &result.loss_history;
    let traces = infer_corpus(&result.params, &stats, &corpus, 0.5).unwrap();
    let rules = ScoringRules::default();
    let cf0 = score_traces(&traces, 0, &rules).unwrap();
    let cf15 = score_traces(&traces, 15, &rules).unwrap();
    print_report(&[&cf0, &cf15]);
    let table = comparison_table_csv(&[("MAD_cf0", &cf0), ("MAD_cf15", &cf15)]);
    let complete = [4u8, 3, 2].iter().all(|l| cf0.by_level.contains_key(l)) && table.lines().count() == 13;
    let l4 = cf0
        .splits
        .iter()
        .find(|s| s.split == Split::TestCollision && s.stiffness_level == 4)
        .map(|s| s.score.clone())
        .unwrap();
    let miss_rate = l4.dfn as f64 / l4.collisions_total as f64;
    let ratio = h[h.len() - 1] / h[0];
    let elapsed = start.elapsed();
    ensure(
        ratio < 0.5 && miss_rate <= 0.05 && complete && elapsed <= Duration::from_secs(15 * 60),
        format!(
            "loss {:.4} -> {:.4} (ratio {ratio:.3}, need < 0.5); level-4 CF0 DFn {} (miss rate {miss_rate:.3}, need <= 0.05); report levels 2-4 {}; {:.0} s (<= 900 s)",
            h[0],
            h[h.len() - 1],
            l4.dfn_ratio(),
            if complete { "complete" } else { "incomplete" },
            elapsed.as_secs_f64()
        ),
    )
}

fn cli(args: &[&str]) -> i32 {
    madcnn::cli::run(std::iter::once("madcnn").chain(args.iter().copied()))
}

fn dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "run_manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn ablation() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let scale = ABLATION_SCALE.to_string();
    assert_eq!(cli(&["-q", "--seed", "5", "--out", corpus.to_str().unwrap(), "simulate", "--scale", &scale]), 0);
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let code = cli(&["-q", "--seed", "5", "--out", out.to_str().unwrap(), "ablate", "--corpus", corpus.to_str().unwrap()]);
        assert_eq!(code, 0);
        runs.push(dir_files(&out));
    }
    let table = String::from_utf8(runs[0]["ablation_table.csv"].clone()).unwrap();
    let mut lines = table.lines();
    let header_ok = lines.next() == Some("stiffness,metric,MAD,M,MD,MA,AD");
    let body: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let shape_ok = body.len() == 12 && body.iter().all(|r| r.len() == 7);
    let labels_ok = ["4", "3", "2", "total"].iter().enumerate().all(|(i, lvl)| {
        ["DFn", "DD", "FPn"].iter().enumerate().all(|(j, m)| body.get(i * 3 + j).is_some_and(|r| r[0] == *lvl && r[1] == *m))
    });
    let identical = runs[0] == runs[1];
    ensure(
        header_ok && shape_ok && labels_ok && identical,
        format!(
            "5 variants x 4 rows x 3 metrics {}; {} files byte-identical across two runs: {identical}",
            if header_ok && shape_ok && labels_ok { "present" } else { "malformed" },
            runs[0].len()
        ),
    )
}

fn latency() -> Outcome {
    let params = build_model(ModelConfig::for_variant(Variant::Mad), 1).unwrap();
    let mut r = rng(17);
    let frames: Vec<Vec<f64>> = (0..1000).map(|_| (0..FRAME_LEN).map(|_| r.gen()).collect()).collect();
    let n = 100_000;
    let start = Instant::now();
    let mut acc = 0.0;
    for i in 0..n {
        acc += forward_values(&params, &frames[i % frames.len()]).unwrap().0.p_collision;
    }
    let mean = start.elapsed().as_secs_f64() / n as f64;
    ensure(acc.is_finite() && mean < 1e-3, format!("mean single-frame forward {:.1} us over 1e5 frames (< 1000 us)", mean * 1e6))
}

fn determinism() -> Outcome {
    let cfg = SimConfig::default();
    let a = generate_corpus(&cfg, 3, 0.02).unwrap();
    let b = generate_corpus(&cfg, 3, 0.02).unwrap();
    let corpora = a == b;

    let trace = &a.get(Split::TrainCollision, 4).unwrap().trace;
    let stats = fit_normalizer(&[trace]).unwrap();
    let data = make_dataset(&[trace], &stats, 1).unwrap();
    let tc = TrainConfig { epochs: 2, seed: 4, ..TrainConfig::default() };
    let cfg_m = ModelConfig::for_variant(Variant::Mad);
    let w1 = train(&cfg_m, &data, &tc).unwrap();
    let w2 = train(&cfg_m, &data, &tc).unwrap();
    let weights = w1.params.flatten() == w2.params.flatten() && w1.loss_history == w2.loss_history;

    let rules = ScoringRules::default();
    let rep = |p| score_traces(&infer_corpus(p, &stats, &a, 0.5).unwrap(), 15, &rules).unwrap();
    let reports = rep(&w1.params) == rep(&w2.params);

    let tmp = tempfile::tempdir().unwrap();
    let tp = tmp.path().join("trace.csv");
    write_trace(&tp, trace).unwrap();
    let trace_rt = read_trace(&tp).unwrap() == *trace;
    let wp = tmp.path().join("w.json");
    save_weights(&wp, &w1.params, Some(stats)).unwrap();
    let (lp, ls) = load_weights(&wp).unwrap();
    let weight_rt = lp.flatten().iter().map(|x| x.to_bits()).eq(w1.params.flatten().iter().map(|x| x.to_bits()))
        && ls == Some(stats);
    write_corpus(&tmp.path().join("c"), &a).unwrap();
    let corpus_rt = load_corpus(&tmp.path().join("c")).unwrap() == a;
    ensure(
        corpora && weights && reports && trace_rt && weight_rt && corpus_rt,
        format!(
            "corpus {corpora}, weights {weights}, reports {reports}; round-trips: trace {trace_rt}, weights {weight_rt}, corpus {corpus_rt}"
        ),
    )
}

#[test]
fn acceptance() {
    let mut ledger = Ledger { lines: Vec::new() };
    ledger.run(1, "gradient correctness", gradients);
    ledger.run(2, "oracle equivalence", oracles);
    ledger.run(3, "architecture shape audit", shape_audit);
    ledger.run(4, "continuous-filter laws", cf_laws);
    ledger.run(5, "end-to-end synthetic run", end_to_end);
    ledger.run(6, "ablation harness", ablation);
    ledger.run(7, "real-time budget", latency);
    ledger.run(8, "determinism and round-trips", determinism);
    println!("\nsummary:");
    for (_, _, _, line) in &ledger.lines {
        println!("{line}");
    }
    let failed: Vec<_> = ledger.lines.iter().filter(|l| !l.2).map(|l| format!("[{}] {}", l.0, l.1)).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
