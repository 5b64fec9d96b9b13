use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Row-major `channels × length` activation map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    channels: usize,
    length: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, length: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::Shape(format!(
                "feature map needs positive dims, got {channels}x{length}"
            )));
        }
        if values.len() != channels * length {
            return Err(Error::Shape(format!(
                "feature map {channels}x{length} needs {} values, got {}",
                channels * length,
                values.len()
            )));
        }
        ensure_finite(&values, "feature map")?;
        Ok(Self {
            channels,
            length,
            values,
        })
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Self {
            channels,
            length,
            values: vec![0.0; channels * length],
        }
    }

    pub(crate) fn from_raw(channels: usize, length: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), channels * length);
        Self {
            channels,
            length,
            values,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, channel: usize, t: usize) -> f64 {
        self.values[channel * self.length + t]
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.values[channel * self.length..(channel + 1) * self.length]
    }
}
