use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contact interval in samples (ms), both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionInterval {
    pub start: usize,
    pub end: usize,
}

/// Maximal runs of nonzero values.
pub fn extract_intervals(labels: &[u8]) -> Vec<CollisionInterval> {
    let mut out = Vec::new();
    let mut open = None;
    for (t, &l) in labels.iter().enumerate() {
        match (l != 0, open) {
            (true, None) => open = Some(t),
            (false, Some(start)) => {
                out.push(CollisionInterval { start, end: t - 1 });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        out.push(CollisionInterval { start, end: labels.len() - 1 });
    }
    out
}

/// Keeps a positive at `t` only when the previous `duration_ms` samples were
/// positive as well. Duration 0 is the identity.
pub fn continuous_filter(raw: &[u8], duration_ms: usize) -> Vec<u8> {
    let need = duration_ms + 1;
    let mut run = 0usize;
    raw.iter()
        .map(|&x| {
            run = if x != 0 { run + 1 } else { 0 };
            u8::from(run >= need)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringRules {
    /// A collision counts as detected by a positive within this many ms of onset.
    pub detect_window_ms: usize,
    /// False-positive run ends closer than this many ms form one event.
    pub merge_gap_ms: usize,
}

impl Default for ScoringRules {
    fn default() -> Self {
        ScoringRules { detect_window_ms: 300, merge_gap_ms: 10 }
    }
}

/// Event counts for one or more decision sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventScore {
    pub collisions_total: usize,
    pub dfn: usize,
    /// Detection delay of every detected collision, ms.
    pub dd_values: Vec<usize>,
    pub fpn: usize,
}

impl EventScore {
    pub fn detected(&self) -> usize {
        self.dd_values.len()
    }

    /// Mean detection delay in ms, NaN when nothing was detected.
    pub fn dd_mean(&self) -> f64 {
        if self.dd_values.is_empty() {
            return f64::NAN;
        }
        self.dd_values.iter().sum::<usize>() as f64 / self.dd_values.len() as f64
    }

    /// Detection failures as `failed/total`.
    pub fn dfn_ratio(&self) -> String {
        format!("{}/{}", self.dfn, self.collisions_total)
    }

    pub fn merge(&mut self, other: &EventScore) {
        self.collisions_total += other.collisions_total;
        self.dfn += other.dfn;
        self.dd_values.extend_from_slice(&other.dd_values);
        self.fpn += other.fpn;
    }
}

/// Samples `[start, end]` that belong to some collision: from onset to the
/// later of contact end and the detection window end.
fn exclusion_zones(intervals: &[CollisionInterval], window: usize) -> Vec<(usize, usize)> {
    let mut zones: Vec<(usize, usize)> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        let end = iv.end.max(iv.start + window);
        match zones.last_mut() {
            Some(last) if iv.start <= last.1 + 1 => last.1 = last.1.max(end),
            _ => zones.push((iv.start, end)),
        }
    }
    zones
}

/// Smallest number of `[p, p + gap)` windows covering sorted points.
pub(crate) fn cover_count(points: impl IntoIterator<Item = usize>, gap: usize) -> usize {
    let mut count = 0;
    let mut open: Option<usize> = None;
    for p in points {
        if open.is_none_or(|start| p >= start + gap.max(1)) {
            count += 1;
            open = Some(p);
        }
    }
    count
}

/// Scores one decision sequence against ground-truth labels.
///
/// * A collision `[s, e]` is detected when some decision in
///   `[s, s + detect_window_ms]` is 1; its delay is the offset of the first.
/// * A positive run is a false positive when its last sample lies outside
///   every collision's `[s, max(e, s + detect_window_ms)]`.
/// * False-positive run ends are grouped into the fewest `merge_gap_ms`
///   windows; FPn counts those groups.
pub fn compute_report(decisions: &[u8], labels: &[u8], rules: &ScoringRules) -> Result<EventScore> {
    if decisions.len() != labels.len() {
        return Err(Error::Input(format!(
            "decisions ({}) and labels ({}) differ in length",
            decisions.len(),
            labels.len()
        )));
    }
    let n = decisions.len();
    let intervals = extract_intervals(labels);

    let mut next_one = vec![usize::MAX; n + 1];
    for t in (0..n).rev() {
        next_one[t] = if decisions[t] != 0 { t } else { next_one[t + 1] };
    }
    let mut score = EventScore { collisions_total: intervals.len(), ..EventScore::default() };
    for iv in &intervals {
        let first = next_one[iv.start];
        if first <= iv.start + rules.detect_window_ms {
            score.dd_values.push(first - iv.start);
        } else {
            score.dfn += 1;
        }
    }

    let zones = exclusion_zones(&intervals, rules.detect_window_ms);
    let mut zone = 0;
    let run_ends = (0..n).filter(|&t| decisions[t] != 0 && (t + 1 == n || decisions[t + 1] == 0));
    let fp_ends = run_ends.filter(|&t| {
        while zone < zones.len() && zones[zone].1 < t {
            zone += 1;
        }
        !(zone < zones.len() && zones[zone].0 <= t)
    });
    score.fpn = cover_count(fp_ends, rules.merge_gap_ms);
    Ok(score)
}
