//! Classical sequential change detectors and the adapter that feeds them a
//! per-row signal derived from the deployed forest.

mod adwin;
mod cusum;
mod ddm;
mod page_hinkley;
mod stepd;

pub use adwin::{Adwin, AdwinParams};
pub use cusum::{Cusum, CusumParams};
pub use ddm::{Ddm, DdmLevel, DdmParams};
pub use page_hinkley::{PageHinkley, PageHinkleyParams};
pub use stepd::{Stepd, StepdParams};

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::trees::{Prediction, RandomForest};
use crate::types::{DriftVerdict, LabeledBatch};

pub trait SequentialDetector {
    /// Feeds one sample; returns whether the detector signals drift.
    fn update(&mut self, x: f64) -> Result<bool>;
    /// Restores the post-construction state.
    fn reset(&mut self);
    fn samples_seen(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineSpec {
    PageHinkley(PageHinkleyParams),
    Cusum(CusumParams),
    Ddm(DdmParams),
    Stepd(StepdParams),
    Adwin(AdwinParams),
}

pub const BASELINE_NAMES: [&str; 5] = ["page_hinkley", "cusum", "ddm", "stepd", "adwin"];

impl BaselineSpec {
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "page_hinkley" => Self::PageHinkley(PageHinkleyParams::default()),
            "cusum" => Self::Cusum(CusumParams::default()),
            "ddm" => Self::Ddm(DdmParams::default()),
            "stepd" => Self::Stepd(StepdParams::default()),
            "adwin" => Self::Adwin(AdwinParams::default()),
            other => return Err(DriftError::UnknownMethod(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PageHinkley(_) => "page_hinkley",
            Self::Cusum(_) => "cusum",
            Self::Ddm(_) => "ddm",
            Self::Stepd(_) => "stepd",
            Self::Adwin(_) => "adwin",
        }
    }

    pub fn build(&self) -> Box<dyn SequentialDetector> {
        match *self {
            Self::PageHinkley(p) => Box::new(PageHinkley::new(p)),
            Self::Cusum(p) => Box::new(Cusum::new(p)),
            Self::Ddm(p) => Box::new(Ddm::new(p)),
            Self::Stepd(p) => Box::new(Stepd::new(p)),
            Self::Adwin(p) => Box::new(Adwin::new(p)),
        }
    }

    /// PH and CUSUM look for upward mean shifts, so they watch uncertainty;
    /// DDM and STEPD need error-like booleans.
    pub fn signal(&self) -> SignalKind {
        match self {
            Self::PageHinkley(_) | Self::Cusum(_) => SignalKind::Uncertainty,
            Self::Ddm(_) | Self::Stepd(_) => SignalKind::LowConfidence,
            Self::Adwin(_) => SignalKind::Confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// Vote fraction of the predicted class.
    Confidence,
    /// One minus the vote fraction.
    Uncertainty,
    /// 1 when the vote fraction is below one half, else 0.
    LowConfidence,
}

impl SignalKind {
    pub fn of(self, p: &Prediction) -> f64 {
        match self {
            Self::Confidence => p.confidence,
            Self::Uncertainty => 1.0 - p.confidence,
            Self::LowConfidence => f64::from(u8::from(p.confidence < 0.5)),
        }
    }
}

/// Turns the deployed forest's predictions into one signal value per row.
pub struct BatchAdapter<'a> {
    pub m0: &'a RandomForest,
    pub signal: SignalKind,
}

impl BatchAdapter<'_> {
    pub fn stream(&self, batch: &LabeledBatch) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.m0.predict_with_confidence(batch)?.iter().map(|p| self.signal.of(p)).collect())
    }

    /// Signal for the forest's own training rows, from out-of-bag votes so the
    /// reference segment is not inflated by memorisation.
    pub fn reference_stream(&self, d0: &LabeledBatch) -> Result<Vec<f64>> {
        Ok(self.m0.oob_predict_with_confidence(d0)?.iter().map(|p| self.signal.of(p)).collect())
    }
}

/// Feeds `reference` then `incoming` through a fresh detector, resetting after
/// every alarm. `utility` is the number of alarms raised during `incoming`.
pub fn detect_on_signals(spec: &BaselineSpec, reference: &[f64], incoming: &[f64]) -> Result<DriftVerdict> {
    let mut det = spec.build();
    for &x in reference {
        if det.update(x)? {
            det.reset();
        }
    }
    let mut alarms = 0usize;
    for &x in incoming {
        if det.update(x)? {
            alarms += 1;
            det.reset();
        }
    }
    Ok(DriftVerdict {
        retrain: alarms > 0,
        utility: alarms as f64,
        threshold_used: 1.0,
        detector_name: spec.name().to_string(),
    })
}

pub fn baseline_detect_batch(spec: &BaselineSpec, m0: &RandomForest, d0: &LabeledBatch, d1: &LabeledBatch) -> Result<DriftVerdict> {
    let adapter = BatchAdapter { m0, signal: spec.signal() };
    detect_on_signals(spec, &adapter.reference_stream(d0)?, &adapter.stream(d1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in BASELINE_NAMES {
            assert_eq!(BaselineSpec::by_name(name).unwrap().name(), name);
        }
        assert!(BaselineSpec::by_name("nope").is_err());
    }

    #[test]
    fn signals() {
        let p = Prediction { class: 0, confidence: 0.3 };
        assert_eq!(SignalKind::Confidence.of(&p), 0.3);
        assert!((SignalKind::Uncertainty.of(&p) - 0.7).abs() < 1e-12);
        assert_eq!(SignalKind::LowConfidence.of(&p), 1.0);
        assert_eq!(SignalKind::LowConfidence.of(&Prediction { class: 0, confidence: 0.5 }), 0.0);
    }

    #[test]
    fn stable_signal_raises_no_alarm_and_a_jump_does() {
        let spec = BaselineSpec::by_name("page_hinkley").unwrap();
        let reference = vec![0.05; 300];
        let v = detect_on_signals(&spec, &reference, &[0.05; 300]).unwrap();
        assert!(!v.retrain && v.utility == 0.0);
        let v = detect_on_signals(&spec, &reference, &[0.9; 300]).unwrap();
        assert!(v.retrain && v.utility >= 1.0);
        assert_eq!(v.detector_name, "page_hinkley");
    }
}
