use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::inference::{check_threshold, collision_probabilities, threshold_decisions};
use super::scoring::{compute_report, continuous_filter, EventScore, ScoringRules};
use crate::data::{fit_normalizer, make_dataset, NormalizationStats};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParameters, Variant};
use crate::sim::{Corpus, Split};
use crate::train::{train_with_progress, TrainConfig};

/// Stiffness levels in report order.
pub const REPORT_LEVELS: [u8; 3] = [4, 3, 2];

/// Raw decisions for one test trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrace {
    pub name: String,
    pub split: Split,
    pub stiffness_level: u8,
    pub labels: Vec<u8>,
    pub raw: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitScore {
    pub name: String,
    pub split: Split,
    pub stiffness_level: u8,
    pub score: EventScore,
}

/// Scores of one model over the test splits at one CF duration.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub cf_ms: usize,
    pub splits: Vec<SplitScore>,
    pub by_level: BTreeMap<u8, EventScore>,
    pub total: EventScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfSweepRow {
    pub cf_ms: usize,
    pub collisions: usize,
    pub dfn: usize,
    pub dd_mean_ms: f64,
    pub fpn: usize,
}

/// Runs the model once over every test split of `corpus`.
pub fn infer_corpus(
    params: &ModelParameters,
    stats: &NormalizationStats,
    corpus: &Corpus,
    threshold: f64,
) -> Result<Vec<ScoredTrace>> {
    check_threshold(threshold)?;
    for level in REPORT_LEVELS {
        corpus.get(Split::TestCollision, level)?;
        corpus.get(Split::TestFree, level)?;
    }
    corpus
        .tests()
        .map(|e| {
            let probs = collision_probabilities(params, &e.trace, stats)?;
            Ok(ScoredTrace {
                name: e.info.name.clone(),
                split: e.info.split,
                stiffness_level: e.info.stiffness_level,
                labels: e.trace.labels().to_vec(),
                raw: threshold_decisions(&probs, threshold),
            })
        })
        .collect()
}

/// Applies the CF of `cf_ms` to each trace's raw decisions and scores them.
pub fn score_traces(traces: &[ScoredTrace], cf_ms: usize, rules: &ScoringRules) -> Result<DetectionReport> {
    let mut report = DetectionReport {
        cf_ms,
        splits: Vec::with_capacity(traces.len()),
        by_level: BTreeMap::new(),
        total: EventScore::default(),
    };
    for t in traces {
        let decisions = continuous_filter(&t.raw, cf_ms);
        let score = compute_report(&decisions, &t.labels, rules)?;
        report.by_level.entry(t.stiffness_level).or_default().merge(&score);
        report.total.merge(&score);
        report.splits.push(SplitScore {
            name: t.name.clone(),
            split: t.split,
            stiffness_level: t.stiffness_level,
            score,
        });
    }
    Ok(report)
}

/// One row per CF duration, all from the same raw decisions.
pub fn cf_sweep(
    traces: &[ScoredTrace],
    durations: impl IntoIterator<Item = usize>,
    rules: &ScoringRules,
) -> Result<Vec<CfSweepRow>> {
    durations
        .into_iter()
        .map(|cf_ms| {
            let total = score_traces(traces, cf_ms, rules)?.total;
            Ok(CfSweepRow {
                cf_ms,
                collisions: total.collisions_total,
                dfn: total.dfn,
                dd_mean_ms: total.dd_mean(),
                fpn: total.fpn,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationOptions {
    pub threshold: f64,
    pub cf_ms: usize,
    pub rules: ScoringRules,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions { threshold: 0.5, cf_ms: 0, rules: ScoringRules::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationColumn {
    pub variant: Variant,
    pub params: ModelParameters,
    pub loss_history: Vec<f64>,
    pub report: DetectionReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub stats: NormalizationStats,
    pub columns: Vec<AblationColumn>,
}

/// Trains every variant on the level-4 training split with the same data
/// and seed, then scores each on all test splits.
pub fn ablation_run(
    variants: &[Variant],
    corpus: &Corpus,
    tc: &TrainConfig,
    options: &AblationOptions,
    mut progress: impl FnMut(Variant, usize, f64),
) -> Result<AblationResult> {
    if variants.is_empty() {
        return Err(Error::Input("no variants requested".into()));
    }
    let train_trace = &corpus.get(Split::TrainCollision, 4)?.trace;
    let stats = fit_normalizer(&[train_trace])?;
    let data = make_dataset(&[train_trace], &stats, tc.seed)?;
    let mut columns = Vec::with_capacity(variants.len());
    for &variant in variants {
        let config = ModelConfig::for_variant(variant);
        let trained = train_with_progress(&config, &data, tc, |e, l| progress(variant, e, l))?;
        let traces = infer_corpus(&trained.params, &stats, corpus, options.threshold)?;
        let report = score_traces(&traces, options.cf_ms, &options.rules)?;
        columns.push(AblationColumn {
            variant,
            params: trained.params,
            loss_history: trained.loss_history,
            report,
        });
    }
    Ok(AblationResult { stats, columns })
}

fn fmt_dd(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.4}")
    }
}

fn level_label(level: Option<u8>) -> String {
    level.map_or_else(|| "total".into(), |l| l.to_string())
}

fn level_score(report: &DetectionReport, level: Option<u8>) -> EventScore {
    match level {
        Some(l) => report.by_level.get(&l).cloned().unwrap_or_default(),
        None => report.total.clone(),
    }
}

/// Wide table: one column per model, rows `(stiffness, metric)` for levels
/// 4, 3, 2 and the total, metrics `DFn` (`failed/total`), `DD` (mean ms)
/// and `FPn`.
pub fn comparison_table_csv(columns: &[(&str, &DetectionReport)]) -> String {
    let mut out = String::from("stiffness,metric");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let levels = REPORT_LEVELS.iter().map(|&l| Some(l)).chain([None]);
    for level in levels {
        let scores: Vec<EventScore> = columns.iter().map(|(_, r)| level_score(r, level)).collect();
        let rows: [(&str, Box<dyn Fn(&EventScore) -> String>); 3] = [
            ("DFn", Box::new(|s: &EventScore| s.dfn_ratio())),
            ("DD", Box::new(|s: &EventScore| fmt_dd(s.dd_mean()))),
            ("FPn", Box::new(|s: &EventScore| s.fpn.to_string())),
        ];
        for (metric, cell) in rows {
            let _ = write!(out, "{},{metric}", level_label(level));
            for s in &scores {
                out.push(',');
                out.push_str(&cell(s));
            }
            out.push('\n');
        }
    }
    out
}

pub const LONG_HEADER: &str = "model,cf_ms,stiffness,collisions,dfn,dd_mean_ms,fpn";

/// One row per `(model, stiffness)` including the total.
pub fn long_table_csv(columns: &[(&str, &DetectionReport)]) -> String {
    let mut out = format!("{LONG_HEADER}\n");
    for (name, report) in columns {
        for level in REPORT_LEVELS.iter().map(|&l| Some(l)).chain([None]) {
            let s = level_score(report, level);
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{}",
                report.cf_ms,
                level_label(level),
                s.collisions_total,
                s.dfn,
                fmt_dd(s.dd_mean()),
                s.fpn
            );
        }
    }
    out
}

pub const SPLIT_HEADER: &str = "cf_ms,split,stiffness,collisions,dfn,dd_mean_ms,fpn";

/// One row per test split per report.
pub fn split_table_csv(reports: &[DetectionReport]) -> String {
    let mut out = format!("{SPLIT_HEADER}\n");
    for r in reports {
        for s in &r.splits {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.cf_ms,
                s.split,
                s.stiffness_level,
                s.score.collisions_total,
                s.score.dfn,
                fmt_dd(s.score.dd_mean()),
                s.score.fpn
            );
        }
    }
    out
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// Sweep rows as CSV with header `cf_ms,collisions,dfn,dd_mean_ms,fpn`.
pub fn sweep_csv(rows: &[CfSweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_error)?).map_err(csv_error)
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<CfSweepRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

/// Two-column series `cf_ms,<metric>` for plotting.
pub fn series_csv(rows: &[CfSweepRow], metric: &str) -> Result<String> {
    let mut out = format!("cf_ms,{metric}\n");
    for r in rows {
        let v = match metric {
            "fpn" => r.fpn.to_string(),
            "dfn" => r.dfn.to_string(),
            "dd_mean_ms" => r.dd_mean_ms.to_string(),
            _ => return Err(Error::Input(format!("unknown series metric {metric}"))),
        };
        let _ = writeln!(out, "{},{v}", r.cf_ms);
    }
    Ok(out)
}

/// Three stacked line charts (FPn, DFn, DD against CF duration).
pub fn sweep_svg(rows: &[CfSweepRow]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 160.0;
    const PAD: f64 = 40.0;
    let panels: [(&str, Vec<f64>); 3] = [
        ("FPn", rows.iter().map(|r| r.fpn as f64).collect()),
        ("DFn", rows.iter().map(|r| r.dfn as f64).collect()),
        ("DD (ms)", rows.iter().map(|r| r.dd_mean_ms).collect()),
    ];
    let x_max = rows.iter().map(|r| r.cf_ms).max().unwrap_or(1).max(1) as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"11\">\n",
        W + 2.0 * PAD,
        3.0 * (H + PAD) + PAD
    );
    for (i, (title, ys)) in panels.iter().enumerate() {
        let top = PAD + i as f64 * (H + PAD);
        let finite: Vec<f64> = ys.iter().copied().filter(|y| y.is_finite()).collect();
        let y_min = finite.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
        let mut y_max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(y_max > y_min) {
            y_max = y_min + 1.0;
        }
        let _ = writeln!(
            svg,
            "<rect x=\"{PAD}\" y=\"{top}\" width=\"{W}\" height=\"{H}\" fill=\"none\" stroke=\"#888\"/>\n\
             <text x=\"{PAD}\" y=\"{}\">{title} (max {y_max:.3})</text>",
            top - 6.0
        );
        let points: Vec<String> = rows
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(r, y)| {
                let x = PAD + W * r.cf_ms as f64 / x_max;
                let y = top + H - H * (y - y_min) / (y_max - y_min);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.join(" ")
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\">CF duration (ms), 0 to {x_max}</text>\n</svg>",
        PAD,
        3.0 * (H + PAD) + PAD - 10.0
    );
    svg
}
