use serde::{Deserialize, Serialize};

use super::SequentialDetector;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdmParams {
    pub min_samples: usize,
    pub warning_level: f64,
    pub drift_level: f64,
}

impl Default for DdmParams {
    fn default() -> Self {
        Self {
            min_samples: 30,
            warning_level: 2.0,
            drift_level: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DdmLevel {
    Stable,
    Warning,
    Drift,
}

/// Drift detection method on a stream of error indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddm {
    pub params: DdmParams,
    samples_seen: usize,
    p: f64,
    s: f64,
    p_min: f64,
    s_min: f64,
}

impl Ddm {
    pub fn new(params: DdmParams) -> Self {
        Self {
            params,
            samples_seen: 0,
            p: 0.0,
            s: 0.0,
            p_min: f64::INFINITY,
            s_min: f64::INFINITY,
        }
    }

    pub fn update(&mut self, error: bool) -> DdmLevel {
        self.samples_seen += 1;
        let n = self.samples_seen as f64;
        self.p += (f64::from(u8::from(error)) - self.p) / n;
        self.s = (self.p * (1.0 - self.p) / n).sqrt();
        if self.samples_seen < self.params.min_samples {
            return DdmLevel::Stable;
        }
        if self.p + self.s <= self.p_min + self.s_min {
            self.p_min = self.p;
            self.s_min = self.s;
        }
        // strict comparisons: an error-free stream sits exactly on its minimum
        let level = self.p + self.s;
        if level > self.p_min + self.params.drift_level * self.s_min {
            DdmLevel::Drift
        } else if level > self.p_min + self.params.warning_level * self.s_min {
            DdmLevel::Warning
        } else {
            DdmLevel::Stable
        }
    }

    pub fn error_rate(&self) -> f64 {
        self.p
    }
}

impl SequentialDetector for Ddm {
    fn update(&mut self, x: f64) -> Result<bool> {
        Ok(Ddm::update(self, x >= 0.5) == DdmLevel::Drift)
    }

    fn reset(&mut self) {
        *self = Self::new(self.params);
    }

    fn samples_seen(&self) -> usize {
        self.samples_seen
    }
}
