use serde::{Deserialize, Serialize};

use super::SequentialDetector;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PageHinkleyParams {
    pub delta: f64,
    pub lambda: f64,
}

impl Default for PageHinkleyParams {
    fn default() -> Self {
        Self { delta: 0.005, lambda: 50.0 }
    }
}

/// Page-Hinkley test for an upward shift in the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PageHinkley {
    pub params: PageHinkleyParams,
    samples_seen: usize,
    mean: f64,
    cumulative: f64,
    minimum: f64,
}

impl PageHinkley {
    pub fn new(params: PageHinkleyParams) -> Self {
        Self {
            params,
            samples_seen: 0,
            mean: 0.0,
            cumulative: 0.0,
            minimum: f64::INFINITY,
        }
    }

    pub fn update(&mut self, x: f64) -> bool {
        self.samples_seen += 1;
        self.mean += (x - self.mean) / self.samples_seen as f64;
        self.cumulative += x - self.mean - self.params.delta;
        self.minimum = self.minimum.min(self.cumulative);
        self.cumulative - self.minimum > self.params.lambda
    }

    /// Current test statistic `m_t - min m_i`.
    pub fn statistic(&self) -> f64 {
        if self.samples_seen == 0 {
            0.0
        } else {
            self.cumulative - self.minimum
        }
    }
}

impl SequentialDetector for PageHinkley {
    fn update(&mut self, x: f64) -> Result<bool> {
        Ok(PageHinkley::update(self, x))
    }

    fn reset(&mut self) {
        *self = Self::new(self.params);
    }

    fn samples_seen(&self) -> usize {
        self.samples_seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stream_is_quiet() {
        let mut ph = PageHinkley::new(PageHinkleyParams::default());
        assert!((0..5000).all(|_| !ph.update(0.7)));
    }

    #[test]
    fn step_is_detected_after_change() {
        let mut ph = PageHinkley::new(PageHinkleyParams { lambda: 20.0, ..Default::default() });
        let stream = std::iter::repeat(0.0).take(200).chain(std::iter::repeat(1.0).take(200));
        let first = stream.enumerate().find(|&(_, x)| ph.update(x)).map(|(t, _)| t + 1);
        let t = first.expect("alarm");
        assert!(t > 200 && t <= 400, "alarm at {t}");
    }

    #[test]
    fn infinite_threshold_never_alarms() {
        let mut ph = PageHinkley::new(PageHinkleyParams { lambda: f64::INFINITY, ..Default::default() });
        assert!((0..1000).all(|t| !ph.update(if t < 500 { 0.0 } else { 1.0 })));
    }
}
