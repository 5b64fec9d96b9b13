use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    NormalizationStats, Trace, CHANNELS_PER_JOINT, FRAME_LEN, JOINTS, STEP_STRIDE, WINDOW_SPAN,
    WINDOW_STEPS,
};
use crate::error::{Error, Result};

/// One network input: both joints' normalized torque and velocity at 11
/// points spaced 10 samples apart, oldest first.
///
/// `values` is laid out `[joint][channel][step]`, which reads directly as a
/// `2 × 11` map per joint or a `4 × 11` map over all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct InputFrame {
    pub values: [f64; FRAME_LEN],
    pub label: u8,
    /// Sample index (ms) of the newest point.
    pub source_time: usize,
    pub stiffness_level: u8,
}

impl InputFrame {
    #[inline]
    pub fn value(&self, joint: usize, channel: usize, step: usize) -> f64 {
        self.values[(joint * CHANNELS_PER_JOINT + channel) * WINDOW_STEPS + step]
    }

    pub fn joint_values(&self, joint: usize) -> &[f64] {
        let n = CHANNELS_PER_JOINT * WINDOW_STEPS;
        &self.values[joint * n..(joint + 1) * n]
    }
}

/// Frame for the window ending at sample `t` (samples `t−100, t−90, …, t`),
/// labeled with the trace label at `t`.
pub fn window_frame(trace: &Trace, t: usize, stats: &NormalizationStats) -> Result<InputFrame> {
    if t < WINDOW_SPAN || t >= trace.len() {
        return Err(Error::Input(format!(
            "window end {t} outside valid range {WINDOW_SPAN}..{}",
            trace.len()
        )));
    }
    let mut values = [0.0; FRAME_LEN];
    let start = t - WINDOW_SPAN;
    for joint in 0..JOINTS {
        for ch in 0..CHANNELS_PER_JOINT {
            let signal_ch = joint * CHANNELS_PER_JOINT + ch;
            let series = trace.channel(signal_ch);
            let row = &mut values[signal_ch * WINDOW_STEPS..(signal_ch + 1) * WINDOW_STEPS];
            for (step, v) in row.iter_mut().enumerate() {
                *v = stats.normalize(signal_ch, series[start + step * STEP_STRIDE]);
            }
        }
    }
    Ok(InputFrame {
        values,
        label: trace.labels()[t],
        source_time: t,
        stiffness_level: trace.stiffness_level(),
    })
}

/// Every valid frame of every trace, in a seeded random order.
pub fn make_dataset(traces: &[&Trace], stats: &NormalizationStats, seed: u64) -> Result<Vec<InputFrame>> {
    if traces.is_empty() {
        return Err(Error::Input("make_dataset needs at least one trace".into()));
    }
    let mut frames = Vec::with_capacity(
        traces
            .iter()
            .map(|t| t.len().saturating_sub(WINDOW_SPAN))
            .sum(),
    );
    for trace in traces {
        for t in WINDOW_SPAN..trace.len() {
            frames.push(window_frame(trace, t, stats)?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    frames.shuffle(&mut rng);
    Ok(frames)
}
