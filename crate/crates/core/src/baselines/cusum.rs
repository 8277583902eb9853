use serde::{Deserialize, Serialize};

use super::SequentialDetector;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CusumParams {
    pub delta: f64,
    pub threshold: f64,
}

impl Default for CusumParams {
    fn default() -> Self {
        Self { delta: 0.005, threshold: 50.0 }
    }
}

/// One-sided CUSUM chart against the running mean of the samples seen since the last reset.
#[derive(Debug, Clone, PartialEq)]
pub struct Cusum {
    pub params: CusumParams,
    samples_seen: usize,
    mean: f64,
    g: f64,
}

impl Cusum {
    pub fn new(params: CusumParams) -> Self {
        Self {
            params,
            samples_seen: 0,
            mean: 0.0,
            g: 0.0,
        }
    }

    pub fn update(&mut self, x: f64) -> bool {
        self.samples_seen += 1;
        self.mean += (x - self.mean) / self.samples_seen as f64;
        self.g = (self.g + x - (self.mean + self.params.delta)).max(0.0);
        self.g > self.params.threshold
    }

    pub fn statistic(&self) -> f64 {
        self.g
    }
}

impl SequentialDetector for Cusum {
    fn update(&mut self, x: f64) -> Result<bool> {
        Ok(Cusum::update(self, x))
    }

    fn reset(&mut self) {
        *self = Self::new(self.params);
    }

    fn samples_seen(&self) -> usize {
        self.samples_seen
    }
}
