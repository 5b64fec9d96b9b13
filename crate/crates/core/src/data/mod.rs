//! Trace storage, min/max normalization and sliding-window frame extraction.

mod normalize;
mod trace;
mod window;

pub use normalize::{fit_normalizer, normalize, NormalizationStats};
pub use trace::{read_trace, write_trace, JointSample, Trace, TRACE_HEADER};
pub use window::{make_dataset, window_frame, InputFrame};

/// Samples per second of every trace.
pub const SAMPLE_RATE_HZ: u32 = 1000;
pub const JOINTS: usize = 2;
pub const CHANNELS_PER_JOINT: usize = 2;
/// Signal channels in the order `τ₁, v₁, τ₂, v₂`.
pub const SIGNAL_CHANNELS: usize = JOINTS * CHANNELS_PER_JOINT;
/// Points per window (the current sample and ten past ones).
pub const WINDOW_STEPS: usize = 11;
/// Spacing between window points, in samples (10 ms).
pub const STEP_STRIDE: usize = 10;
/// Samples of history a frame needs before `t`.
pub const WINDOW_SPAN: usize = (WINDOW_STEPS - 1) * STEP_STRIDE;
/// Values in one frame: joints × channels × steps.
pub const FRAME_LEN: usize = SIGNAL_CHANNELS * WINDOW_STEPS;
