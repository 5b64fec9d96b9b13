use serde::{Deserialize, Serialize};

use super::{Trace, SIGNAL_CHANNELS};
use crate::error::{Error, Result};

/// Per-channel min/max in native units, channels ordered `τ₁, v₁, τ₂, v₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: [f64; SIGNAL_CHANNELS],
    pub max: [f64; SIGNAL_CHANNELS],
}

impl NormalizationStats {
    pub fn normalize(&self, channel: usize, x: f64) -> f64 {
        normalize(x, self.min[channel], self.max[channel])
    }
}

/// Fits min/max over every sample of the given (training) traces.
pub fn fit_normalizer(traces: &[&Trace]) -> Result<NormalizationStats> {
    if traces.iter().all(|t| t.is_empty()) {
        return Err(Error::Input("cannot fit normalization on empty data".into()));
    }
    let mut stats = NormalizationStats {
        min: [f64::INFINITY; SIGNAL_CHANNELS],
        max: [f64::NEG_INFINITY; SIGNAL_CHANNELS],
    };
    for trace in traces {
        for c in 0..SIGNAL_CHANNELS {
            for &v in trace.channel(c) {
                stats.min[c] = stats.min[c].min(v);
                stats.max[c] = stats.max[c].max(v);
            }
        }
    }
    Ok(stats)
}

/// `(x − min)/(max − min)` clamped to `[0, 1]`; a constant channel maps to 0.
pub fn normalize(x: f64, min: f64, max: f64) -> f64 {
    let span = max - min;
    if span <= 0.0 {
        return 0.0;
    }
    ((x - min) / span).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(tau1: Vec<f64>) -> Trace {
        let n = tau1.len();
        Trace::new([tau1, vec![0.0; n]], [vec![1.0; n], vec![0.0; n]], vec![0; n], 4).unwrap()
    }

    #[test]
    fn min_max_of_channel() {
        let t = trace(vec![0.0, -2.0, 6.0, 1.0]);
        let s = fit_normalizer(&[&t]).unwrap();
        assert_eq!((s.min[0], s.max[0]), (-2.0, 6.0));
    }

    #[test]
    fn two_traces_equal_concatenation() {
        let a = trace(vec![1.0, 5.0]);
        let b = trace(vec![-3.0, 2.0]);
        let ab = trace(vec![1.0, 5.0, -3.0, 2.0]);
        assert_eq!(fit_normalizer(&[&a, &b]).unwrap(), fit_normalizer(&[&ab]).unwrap());
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let t = trace(vec![1.0, 2.0]);
        let s = fit_normalizer(&[&t]).unwrap();
        assert_eq!(s.normalize(1, 1.0), 0.0);
        assert_eq!(s.normalize(1, 123.0), 0.0);
    }

    #[test]
    fn endpoints_midpoint_and_clamp() {
        assert_eq!(normalize(-2.0, -2.0, 6.0), 0.0);
        assert_eq!(normalize(6.0, -2.0, 6.0), 1.0);
        assert_eq!(normalize(2.0, -2.0, 6.0), 0.5);
        assert_eq!(normalize(-9.0, -2.0, 6.0), 0.0);
        assert_eq!(normalize(60.0, -2.0, 6.0), 1.0);
    }

    #[test]
    fn empty_input() {
        assert!(fit_normalizer(&[]).is_err());
    }
}
