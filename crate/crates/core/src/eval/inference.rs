use rayon::prelude::*;

use crate::data::{window_frame, NormalizationStats, Trace, WINDOW_SPAN};
use crate::error::{Error, Result};
use crate::model::{forward, ModelParameters};

const CHUNK: usize = 4096;

/// Collision probability at every sample. The first 100 samples have no
/// full window and read 0.
pub fn collision_probabilities(
    params: &ModelParameters,
    trace: &Trace,
    stats: &NormalizationStats,
) -> Result<Vec<f64>> {
    if trace.len() <= WINDOW_SPAN {
        return Err(Error::Input(format!(
            "trace has {} samples, inference needs at least {}",
            trace.len(),
            WINDOW_SPAN + 1
        )));
    }
    let mut out = vec![0.0; trace.len()];
    out[WINDOW_SPAN..]
        .par_chunks_mut(CHUNK)
        .enumerate()
        .try_for_each(|(c, chunk)| -> Result<()> {
            let base = WINDOW_SPAN + c * CHUNK;
            for (k, slot) in chunk.iter_mut().enumerate() {
                let frame = window_frame(trace, base + k, stats)?;
                *slot = forward(params, &frame)?.0.p_collision;
            }
            Ok(())
        })?;
    Ok(out)
}

/// Binary decisions `p_collision ≥ threshold`, forced to 0 before the
/// first full window.
pub fn run_inference(
    params: &ModelParameters,
    trace: &Trace,
    stats: &NormalizationStats,
    threshold: f64,
) -> Result<Vec<u8>> {
    check_threshold(threshold)?;
    let probs = collision_probabilities(params, trace, stats)?;
    Ok(threshold_decisions(&probs, threshold))
}

pub(crate) fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("threshold must lie in (0, 1), got {threshold}")))
    }
}

pub(crate) fn threshold_decisions(probs: &[f64], threshold: f64) -> Vec<u8> {
    probs
        .iter()
        .enumerate()
        .map(|(t, &p)| u8::from(t >= WINDOW_SPAN && p >= threshold))
        .collect()
}
