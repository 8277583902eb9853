use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::SequentialDetector;
use crate::error::{DriftError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdwinParams {
    pub delta: f64,
    pub max_buckets: usize,
    /// Minimum number of samples on each side of a candidate cut.
    pub min_side: usize,
}

impl Default for AdwinParams {
    fn default() -> Self {
        Self {
            delta: 0.002,
            max_buckets: 5,
            min_side: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bucket {
    total: f64,
    /// Sum of squared deviations from the bucket mean.
    m2: f64,
}

/// Adaptive windowing over an exponential histogram of buckets.
///
/// Level `i` holds buckets of `2^i` samples, newest first. The window is always a
/// suffix of the stream, so its mean is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Adwin {
    pub params: AdwinParams,
    levels: Vec<VecDeque<Bucket>>,
    width: usize,
    total: f64,
    m2: f64,
    samples_seen: usize,
}

fn merge_m2(n_a: f64, mean_a: f64, m2_a: f64, n_b: f64, mean_b: f64, m2_b: f64) -> f64 {
    m2_a + m2_b + n_a * n_b * (mean_a - mean_b).powi(2) / (n_a + n_b)
}

impl Adwin {
    pub fn new(params: AdwinParams) -> Self {
        Self {
            params,
            levels: Vec::new(),
            width: 0,
            total: 0.0,
            m2: 0.0,
            samples_seen: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mean(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    pub fn variance(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.m2 / self.width as f64
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.levels.iter().map(VecDeque::len).sum()
    }

    /// Smallest bucket size still in the window.
    pub fn smallest_bucket(&self) -> usize {
        self.levels.iter().position(|l| !l.is_empty()).map_or(0, |i| 1 << i)
    }

    /// Adds a sample; returns whether the window was cut, and the new width.
    pub fn update(&mut self, x: f64) -> Result<(bool, usize)> {
        if !(0.0..=1.0).contains(&x) {
            return Err(DriftError::InvalidParameter(format!("ADWIN input {x} outside [0,1]")));
        }
        self.samples_seen += 1;
        self.insert(x);
        self.compress();
        let cut = self.shrink();
        Ok((cut, self.width))
    }

    fn insert(&mut self, x: f64) {
        if self.width > 0 {
            let n = self.width as f64;
            self.m2 = merge_m2(n, self.total / n, self.m2, 1.0, x, 0.0);
        }
        self.width += 1;
        self.total += x;
        if self.levels.is_empty() {
            self.levels.push(VecDeque::new());
        }
        self.levels[0].push_front(Bucket { total: x, m2: 0.0 });
    }

    fn compress(&mut self) {
        let mut level = 0;
        while level < self.levels.len() && self.levels[level].len() > self.params.max_buckets {
            let size = (1usize << level) as f64;
            let older = self.levels[level].pop_back().expect("over-full level");
            let newer = self.levels[level].pop_back().expect("over-full level");
            let merged = Bucket {
                total: older.total + newer.total,
                m2: merge_m2(size, older.total / size, older.m2, size, newer.total / size, newer.m2),
            };
            if level + 1 == self.levels.len() {
                self.levels.push(VecDeque::new());
            }
            self.levels[level + 1].push_front(merged);
            level += 1;
        }
    }

    fn drop_oldest(&mut self) {
        let level = self.levels.iter().rposition(|l| !l.is_empty()).expect("non-empty window");
        let bucket = self.levels[level].pop_back().expect("non-empty level");
        let size = 1usize << level;
        self.width -= size;
        self.total -= bucket.total;
        if self.width == 0 {
            self.total = 0.0;
            self.m2 = 0.0;
        } else {
            let (n, s) = (self.width as f64, size as f64);
            let removed = bucket.m2 + s * n * (bucket.total / s - self.total / n).powi(2) / (s + n);
            self.m2 = (self.m2 - removed).max(0.0);
        }
        while self.levels.last().is_some_and(VecDeque::is_empty) {
            self.levels.pop();
        }
    }

    /// Drops the oldest bucket while any split of the window shows a significant gap.
    fn shrink(&mut self) -> bool {
        let mut cut = false;
        while self.width > 2 * self.params.min_side && self.find_cut() {
            self.drop_oldest();
            cut = true;
        }
        cut
    }

    fn find_cut(&self) -> bool {
        let n = self.width as f64;
        let v = self.variance();
        let dd = (2.0 * n.ln() / self.params.delta).ln();
        let min = self.params.min_side as f64;
        let (mut n0, mut t0) = (0.0, 0.0);
        // walk from the oldest bucket towards the newest; the older part grows
        for (level, buckets) in self.levels.iter().enumerate().rev() {
            let size = (1usize << level) as f64;
            for b in buckets.iter().rev() {
                n0 += size;
                t0 += b.total;
                let n1 = n - n0;
                if n1 <= min {
                    return false;
                }
                if n0 <= min {
                    continue;
                }
                let gap = (t0 / n0 - (self.total - t0) / n1).abs();
                let m = 1.0 / (n0 - min + 1.0) + 1.0 / (n1 - min + 1.0);
                let eps = (2.0 * m * v * dd).sqrt() + 2.0 / 3.0 * dd * m;
                if gap > eps {
                    return true;
                }
            }
        }
        false
    }
}

impl SequentialDetector for Adwin {
    fn update(&mut self, x: f64) -> Result<bool> {
        Ok(Adwin::update(self, x)?.0)
    }

    fn reset(&mut self) {
        *self = Self::new(self.params);
    }

    fn samples_seen(&self) -> usize {
        self.samples_seen
    }
}
