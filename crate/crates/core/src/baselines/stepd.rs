use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::SequentialDetector;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepdParams {
    pub window: usize,
    pub alpha_drift: f64,
}

impl Default for StepdParams {
    fn default() -> Self {
        Self {
            window: 30,
            alpha_drift: 0.003,
        }
    }
}

/// Statistical test of equal proportions between the most recent `window`
/// error indicators and everything older.
#[derive(Debug, Clone, PartialEq)]
pub struct Stepd {
    pub params: StepdParams,
    recent: VecDeque<bool>,
    recent_errors: usize,
    older: usize,
    older_errors: usize,
}

impl Stepd {
    pub fn new(params: StepdParams) -> Self {
        Self {
            params,
            recent: VecDeque::with_capacity(params.window + 1),
            recent_errors: 0,
            older: 0,
            older_errors: 0,
        }
    }

    pub fn update(&mut self, error: bool) -> bool {
        self.recent.push_back(error);
        self.recent_errors += usize::from(error);
        if self.recent.len() > self.params.window {
            let old = self.recent.pop_front().unwrap_or(false);
            self.recent_errors -= usize::from(old);
            self.older += 1;
            self.older_errors += usize::from(old);
        }
        match self.p_value() {
            Some(p) => {
                let recent_rate = self.recent_errors as f64 / self.recent.len() as f64;
                let older_rate = self.older_errors as f64 / self.older as f64;
                p < self.params.alpha_drift && recent_rate > older_rate
            }
            None => false,
        }
    }

    /// Two-sided p-value of the continuity-corrected z-test, once at least two
    /// windows' worth of samples have been seen.
    pub fn p_value(&self) -> Option<f64> {
        let w = self.params.window;
        if self.older + self.recent.len() < 2 * w || self.older == 0 {
            return None;
        }
        let (n_o, n_r) = (self.older as f64, self.recent.len() as f64);
        let (r_o, r_r) = (self.older_errors as f64, self.recent_errors as f64);
        let pooled = (r_o + r_r) / (n_o + n_r);
        let spread = pooled * (1.0 - pooled) * (1.0 / n_o + 1.0 / n_r);
        let gap = (r_o / n_o - r_r / n_r).abs() - 0.5 * (1.0 / n_o + 1.0 / n_r);
        if spread <= 0.0 {
            return Some(1.0);
        }
        let z = (gap / spread.sqrt()).max(0.0);
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        Some(2.0 * (1.0 - normal.cdf(z)))
    }
}

impl SequentialDetector for Stepd {
    fn update(&mut self, x: f64) -> Result<bool> {
        Ok(Stepd::update(self, x >= 0.5))
    }

    fn reset(&mut self) {
        *self = Self::new(self.params);
    }

    fn samples_seen(&self) -> usize {
        self.older + self.recent.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_proportions_are_quiet() {
        let mut s = Stepd::new(StepdParams::default());
        for t in 0..600 {
            assert!(!s.update(t % 4 == 0));
        }
        assert!(s.p_value().unwrap() > 0.5);
    }

    #[test]
    fn recent_errors_after_clean_history_alarm() {
        let mut s = Stepd::new(StepdParams::default());
        for _ in 0..30 {
            assert!(!s.update(false));
        }
        let fired: Vec<bool> = (0..30).map(|_| s.update(true)).collect();
        assert!(fired[29]);
        // hand computation: n=30 each side, 0 vs 30 errors
        let z = (1.0 - 0.5 * (2.0 / 30.0)) / (0.25f64 * 2.0 / 30.0).sqrt();
        assert!((z - 7.4887).abs() < 1e-3);
        assert!(s.p_value().unwrap() < 1e-9);
    }

    #[test]
    fn no_test_before_two_windows() {
        let mut s = Stepd::new(StepdParams::default());
        for t in 0..59 {
            assert!(!s.update(t >= 30));
            assert!(s.p_value().is_none());
        }
    }
}
