//! Benchmark harness: the full method comparison over repeated runs, the epoch
//! ablation and report files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    detect_on_signals, AdwinParams, BaselineSpec, BatchAdapter, CusumParams, DdmParams, PageHinkleyParams, StepdParams,
};
use crate::cfpt::{self, cfpt_detect, CFPT_NAME};
use crate::datasets::{
    build_fingerprinting_protocol, build_links_protocol, gaussian_mixture_source, generate_synthetic,
    link_series_source, scenario_sequence, BatchManifest, SyntheticDriftScenario,
};
use crate::error::{DriftError, Result};
use crate::evaluation::{aggregate_trimmed, f1_gain, score_sequence, AlarmConfusion, Decision, RewardParams};
use crate::tabautodrift::{self, tabautodrift_detect, tabautodrift_trace, TABAUTODRIFT_NAME};
use crate::trees::{ForestParams, RandomForest};
use crate::types::{BatchSequence, DetectorConfig, DriftVerdict};

pub const METHOD_NAMES: [&str; 7] = ["cfpt", "tabautodrift", "page_hinkley", "cusum", "ddm", "stepd", "adwin"];
pub const MIN_REPETITIONS: usize = 3;

/// Where the batch sequence comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSource {
    /// Gaussian-mixture classes replayed through the new-class protocol (30 incoming batches).
    Fingerprinting {
        class_count: usize,
        feature_count: usize,
        rows_per_class: usize,
        class_separation: f64,
    },
    /// Synthetic link series replayed through the anomaly protocol (8 incoming batches).
    Links {
        class_count: usize,
        rows_per_class: usize,
        series_length: usize,
    },
    /// One mixture; every third incoming batch drawn with the scenario's drift kind.
    Scenario {
        batches: usize,
        scenario: SyntheticDriftScenario,
    },
    /// Batches listed in a manifest file.
    Manifest { path: PathBuf },
}

impl Default for SequenceSource {
    fn default() -> Self {
        Self::Fingerprinting {
            class_count: 13,
            feature_count: 16,
            rows_per_class: 1200,
            class_separation: 1.5,
        }
    }
}

impl SequenceSource {
    pub fn build(&self, seed: u64) -> Result<BatchSequence> {
        match self {
            Self::Fingerprinting {
                class_count,
                feature_count,
                rows_per_class,
                class_separation,
            } => {
                let src = gaussian_mixture_source(*class_count, *feature_count, *rows_per_class, *class_separation, seed);
                build_fingerprinting_protocol(&src, seed)
            }
            Self::Links {
                class_count,
                rows_per_class,
                series_length,
            } => build_links_protocol(&link_series_source(*class_count, *rows_per_class, *series_length, seed), seed),
            Self::Scenario { batches, scenario } => scenario_sequence(
                &SyntheticDriftScenario {
                    rng_seed: seed,
                    ..*scenario
                },
                *batches,
            ),
            Self::Manifest { path } => BatchManifest::read(path)?.load(),
        }
    }
}

/// Parameters for every method; only the selected ones are used.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodOverrides {
    pub cfpt: DetectorConfig,
    pub tabautodrift: DetectorConfig,
    pub page_hinkley: PageHinkleyParams,
    pub cusum: CusumParams,
    pub ddm: DdmParams,
    pub stepd: StepdParams,
    pub adwin: AdwinParams,
}

impl MethodOverrides {
    pub fn baseline(&self, name: &str) -> Result<BaselineSpec> {
        Ok(match name {
            "page_hinkley" => BaselineSpec::PageHinkley(self.page_hinkley),
            "cusum" => BaselineSpec::Cusum(self.cusum),
            "ddm" => BaselineSpec::Ddm(self.ddm),
            "stepd" => BaselineSpec::Stepd(self.stepd),
            "adwin" => BaselineSpec::Adwin(self.adwin),
            other => return Err(DriftError::UnknownMethod(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub seed: u64,
    pub repetitions: usize,
    pub methods: Vec<String>,
    pub out_dir: PathBuf,
    /// Half splits (CFPT) or bootstrap draws (TabAutoDrift) used to calibrate each
    /// learning detector's threshold; 0 keeps the configured `utility_threshold`.
    pub calibration_resamples: usize,
    pub reward: RewardParams,
    /// The deployed model M0; its seed is replaced per repetition.
    pub forest: ForestParams,
    pub source: SequenceSource,
    pub overrides: MethodOverrides,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            repetitions: 10,
            methods: METHOD_NAMES.iter().map(|s| s.to_string()).collect(),
            out_dir: PathBuf::from("bench_out"),
            calibration_resamples: 10,
            reward: RewardParams::default(),
            forest: ForestParams::default(),
            source: SequenceSource::default(),
            overrides: MethodOverrides::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| DriftError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DriftError::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(DriftError::MissingFile(path.to_path_buf()));
        }
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < MIN_REPETITIONS {
            return Err(DriftError::Config(format!(
                "repetitions must be at least {MIN_REPETITIONS}, got {}",
                self.repetitions
            )));
        }
        if self.methods.is_empty() {
            return Err(DriftError::Config("no methods selected".into()));
        }
        let mut seen = BTreeSet::new();
        for m in &self.methods {
            if !METHOD_NAMES.contains(&m.as_str()) {
                return Err(DriftError::UnknownMethod(m.clone()));
            }
            if !seen.insert(m) {
                return Err(DriftError::Config(format!("method '{m}' listed twice")));
            }
        }
        if !(self.reward.t_s > 0.0 && self.reward.t_s.is_finite()) {
            return Err(DriftError::Config(format!("t_s must be positive, got {}", self.reward.t_s)));
        }
        self.overrides.cfpt.validate()?;
        self.overrides.tabautodrift.validate()?;
        if let SequenceSource::Manifest { path } = &self.source {
            if !path.exists() {
                return Err(DriftError::MissingFile(path.clone()));
            }
        }
        Ok(())
    }
}

/// Model seed of repetition `rep`; repetition 0 uses the master seed itself.
pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_add((rep as u64) << 32)
}

/// One detection call on one batch in one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub method: String,
    pub repetition: usize,
    pub batch: usize,
    pub drift: bool,
    pub retrain: bool,
    pub utility: f64,
    pub threshold: f64,
    pub f1_gain: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Trimmed mean of the per-repetition totals.
    pub reward: f64,
    pub reward_per_rep: Vec<f64>,
    /// Per-batch strict-majority vote of the repetitions' verdicts.
    pub confusion: AlarmConfusion,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub method: String,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub max_seconds: f64,
    pub calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub ground_truth: Vec<bool>,
    pub methods: Vec<MethodSummary>,
    pub records: Vec<BatchRecord>,
    /// Wall-clock figures; never part of the machine-readable record file.
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

impl BenchReport {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn timing(&self, method: &str) -> Option<&Timing> {
        self.timings.iter().find(|t| t.method == method)
    }
}

/// Runs every selected method over the configured sequence `repetitions` times.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let seq = cfg.source.build(cfg.seed)?;
    run_benchmark_on(cfg, &seq)
}

/// Same as [`run_benchmark`] over an already built sequence.
pub fn run_benchmark_on(cfg: &BenchConfig, seq: &BatchSequence) -> Result<BenchReport> {
    cfg.validate()?;
    let n = seq.len();
    let d0 = &seq.reference;
    let baselines: Vec<BaselineSpec> = cfg
        .methods
        .iter()
        .filter(|m| !matches!(m.as_str(), CFPT_NAME | TABAUTODRIFT_NAME))
        .map(|m| cfg.overrides.baseline(m))
        .collect::<Result<_>>()?;
    let unlabeled: Vec<_> = seq.incoming.iter().map(|b| b.unlabeled()).collect();

    // verdicts[method][rep][batch]
    let mut verdicts: Vec<Vec<Vec<DriftVerdict>>> = vec![Vec::with_capacity(cfg.repetitions); cfg.methods.len()];
    let mut seconds: Vec<Vec<f64>> = vec![Vec::new(); cfg.methods.len()];
    let mut gains: Vec<Vec<f64>> = Vec::with_capacity(cfg.repetitions);

    for rep in 0..cfg.repetitions {
        let seed = rep_seed(cfg.seed, rep);
        let m0 = RandomForest::fit(d0, ForestParams { rng_seed: seed, ..cfg.forest })?;
        let rep_gains = seq
            .incoming
            .iter()
            .enumerate()
            .map(|(i, b)| f1_gain(&m0, d0, b, seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        gains.push(rep_gains);

        for (mi, method) in cfg.methods.iter().enumerate() {
            let mut out = Vec::with_capacity(n);
            match method.as_str() {
                CFPT_NAME => {
                    let mut dc = DetectorConfig { rng_seed: seed, ..cfg.overrides.cfpt.clone() };
                    if cfg.calibration_resamples > 0 {
                        dc.utility_threshold = cfpt::calibrate_threshold(&m0, d0, &dc, cfg.calibration_resamples)?;
                    }
                    for b in &unlabeled {
                        let t = Instant::now();
                        let (v, _) = cfpt_detect(&m0, d0, b, &dc)?;
                        seconds[mi].push(t.elapsed().as_secs_f64());
                        out.push(v);
                    }
                }
                TABAUTODRIFT_NAME => {
                    let mut dc = DetectorConfig { rng_seed: seed, ..cfg.overrides.tabautodrift.clone() };
                    if cfg.calibration_resamples > 0 {
                        dc.utility_threshold = tabautodrift::calibrate_threshold(d0, &dc, cfg.calibration_resamples)?;
                    }
                    for b in &unlabeled {
                        let t = Instant::now();
                        let (v, _) = tabautodrift_detect(d0, b, &dc)?;
                        seconds[mi].push(t.elapsed().as_secs_f64());
                        out.push(v);
                    }
                }
                _ => {
                    let spec = baselines
                        .iter()
                        .find(|s| s.name() == method)
                        .expect("baseline specs built from the method list");
                    let adapter = BatchAdapter { m0: &m0, signal: spec.signal() };
                    // The reference segment belongs to deployment, not to each detection.
                    let reference = adapter.reference_stream(d0)?;
                    for b in &unlabeled {
                        let t = Instant::now();
                        let v = detect_on_signals(spec, &reference, &adapter.stream(b)?)?;
                        seconds[mi].push(t.elapsed().as_secs_f64());
                        out.push(v);
                    }
                }
            }
            verdicts[mi].push(out);
        }
    }

    let truth = &seq.ground_truth_drift;
    let mut methods = Vec::with_capacity(cfg.methods.len());
    let mut records = Vec::with_capacity(cfg.methods.len() * cfg.repetitions * n);
    let mut timings = Vec::with_capacity(cfg.methods.len());
    for (mi, method) in cfg.methods.iter().enumerate() {
        let mut totals = Vec::with_capacity(cfg.repetitions);
        let mut votes = vec![0usize; n];
        for (rep, rep_verdicts) in verdicts[mi].iter().enumerate() {
            let alarms: Vec<bool> = rep_verdicts.iter().map(|v| v.retrain).collect();
            let (total, _) = score_sequence(&alarms, truth, &gains[rep], cfg.reward)?;
            totals.push(total);
            for (i, v) in rep_verdicts.iter().enumerate() {
                votes[i] += usize::from(v.retrain);
                let d = Decision::classify(v.retrain, truth[i]);
                records.push(BatchRecord {
                    method: method.clone(),
                    repetition: rep,
                    batch: i + 1,
                    drift: truth[i],
                    retrain: v.retrain,
                    utility: v.utility,
                    threshold: v.threshold_used,
                    f1_gain: gains[rep][i],
                    reward: crate::evaluation::reward(d, gains[rep][i], cfg.reward),
                });
            }
        }
        let mut confusion = AlarmConfusion::default();
        for (i, &v) in votes.iter().enumerate() {
            confusion.record(Decision::classify(2 * v > cfg.repetitions, truth[i]));
        }
        methods.push(MethodSummary {
            method: method.clone(),
            reward: aggregate_trimmed(&totals)?,
            reward_per_rep: totals,
            confusion,
            precision: confusion.precision(),
            recall: confusion.recall(),
            f1: confusion.f1(),
        });
        let (mean, std) = mean_std(&seconds[mi]);
        timings.push(Timing {
            method: method.clone(),
            mean_seconds: mean,
            std_seconds: std,
            max_seconds: seconds[mi].iter().copied().fold(0.0, f64::max),
            calls: seconds[mi].len(),
        });
    }
    Ok(BenchReport {
        config: cfg.clone(),
        ground_truth: truth.clone(),
        methods,
        records,
        timings,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Text table of the per-method results; timing columns are filled when known.
pub fn summary_table(report: &BenchReport) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.4}"));
    let mut s = String::from("method,reward,tp,fp,tn,fn,precision,recall,f1,mean_seconds,std_seconds\n");
    for m in &report.methods {
        let (mean, std) = report
            .timing(&m.method)
            .map_or_else(|| ("nan".to_string(), "nan".to_string()), |t| (format!("{:.6}", t.mean_seconds), format!("{:.6}", t.std_seconds)));
        let c = m.confusion;
        s.push_str(&format!(
            "{},{:.4},{},{},{},{},{},{},{},{},{}\n",
            m.method,
            m.reward,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            opt(m.precision),
            opt(m.recall),
            opt(m.f1),
            mean,
            std
        ));
    }
    s
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const RECORDS_FILE: &str = "records.json";
pub const REWARDS_FILE: &str = "rewards.csv";

/// Writes `summary.csv`, `records.json` (deterministic, no timings) and `rewards.csv`
/// (one row per method and repetition) into `out_dir`.
pub fn emit_report(report: &BenchReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let summary = out_dir.join(SUMMARY_FILE);
    fs::write(&summary, summary_table(report))?;
    let records = out_dir.join(RECORDS_FILE);
    fs::write(&records, serde_json::to_string_pretty(report)?)?;
    let rewards = out_dir.join(REWARDS_FILE);
    let mut w = csv::Writer::from_path(&rewards)?;
    w.write_record(["method", "repetition", "reward"])?;
    for m in &report.methods {
        for (rep, r) in m.reward_per_rep.iter().enumerate() {
            w.write_record([m.method.as_str(), &rep.to_string(), &format!("{r:.6}")])?;
        }
    }
    w.flush()?;
    Ok(vec![summary, records, rewards])
}

/// Reads a `records.json` written by [`emit_report`].
pub fn read_records(path: &Path) -> Result<BenchReport> {
    if !path.exists() {
        return Err(DriftError::MissingFile(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    /// Vary training epochs, hold re-training epochs fixed.
    Train,
    /// Vary re-training epochs, hold training epochs fixed.
    Retrain,
}

/// Where the ablation's drifted (reference, incoming) pairs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AblationSource {
    /// One generated pair per seed.
    Scenario { scenario: SyntheticDriftScenario },
    /// The first `drift_batches` drift batches of each seed's sequence; a seed's
    /// utility is their mean.
    Sequence { source: SequenceSource, drift_batches: usize },
}

impl Default for AblationSource {
    fn default() -> Self {
        Self::Sequence {
            source: SequenceSource::default(),
            drift_batches: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub method: String,
    pub axis: AblationAxis,
    pub grid: Vec<usize>,
    /// Value of the epoch count that is not swept.
    pub fixed: usize,
    pub source: AblationSource,
    pub seeds: Vec<u64>,
    pub detector: DetectorConfig,
    pub forest: ForestParams,
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self {
            method: CFPT_NAME.to_string(),
            axis: AblationAxis::Train,
            grid: (1..=8).collect(),
            fixed: 5,
            source: AblationSource::default(),
            seeds: (0..8).collect(),
            detector: DetectorConfig::default(),
            forest: ForestParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub train_epochs: usize,
    pub retrain_epochs: usize,
    pub median_utility: f64,
}

/// Median utility over `spec.seeds` at each grid point. For TabAutoDrift the
/// re-training epochs are its pretraining epochs on the incoming batch.
pub fn run_ablation(spec: &AblationSpec) -> Result<Vec<AblationRow>> {
    if spec.grid.is_empty() {
        return Err(DriftError::InvalidParameter("empty epoch grid".into()));
    }
    if spec.seeds.is_empty() {
        return Err(DriftError::InvalidParameter("no seeds".into()));
    }
    if spec.grid.contains(&0) || spec.fixed == 0 {
        return Err(DriftError::InvalidParameter("epoch counts must be positive".into()));
    }
    let is_cfpt = match spec.method.as_str() {
        CFPT_NAME => true,
        TABAUTODRIFT_NAME => false,
        other => return Err(DriftError::UnknownMethod(other.to_string())),
    };
    // (seed, reference, drifted incoming batches)
    let mut cases = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        match &spec.source {
            AblationSource::Scenario { scenario } => {
                let (d0, d1) = generate_synthetic(&SyntheticDriftScenario {
                    rng_seed: seed,
                    ..*scenario
                })?;
                cases.push((seed, d0, vec![d1.unlabeled()]));
            }
            AblationSource::Sequence { source, drift_batches } => {
                let seq = source.build(seed)?;
                let drifted: Vec<_> = seq
                    .incoming
                    .iter()
                    .zip(&seq.ground_truth_drift)
                    .filter(|(_, &d)| d)
                    .take(*drift_batches)
                    .map(|(b, _)| b.unlabeled())
                    .collect();
                if drifted.is_empty() {
                    return Err(DriftError::InsufficientData(format!("seed {seed}: sequence has no drift batch")));
                }
                cases.push((seed, seq.reference, drifted));
            }
        }
    }
    let mut models = Vec::with_capacity(cases.len());
    if is_cfpt {
        for (seed, d0, _) in &cases {
            models.push(RandomForest::fit(d0, ForestParams { rng_seed: *seed, ..spec.forest })?);
        }
    }
    let mut rows = Vec::with_capacity(spec.grid.len());
    for &g in &spec.grid {
        let (train, retrain) = match spec.axis {
            AblationAxis::Train => (g, spec.fixed),
            AblationAxis::Retrain => (spec.fixed, g),
        };
        let mut utilities = Vec::with_capacity(cases.len());
        for (i, (seed, d0, drifted)) in cases.iter().enumerate() {
            let mut dc = DetectorConfig {
                rng_seed: *seed,
                train_epochs: train,
                ..spec.detector.clone()
            };
            let mut sum = 0.0;
            for d1 in drifted {
                sum += if is_cfpt {
                    dc.retrain_epochs = retrain;
                    cfpt_detect(&models[i], d0, d1, &dc)?.1.utility
                } else {
                    dc.tab.pretrain_epochs = retrain;
                    tabautodrift_trace(d0, d1, &dc)?.utility
                };
            }
            utilities.push(sum / drifted.len() as f64);
        }
        rows.push(AblationRow {
            train_epochs: train,
            retrain_epochs: retrain,
            median_utility: median(&mut utilities),
        });
    }
    Ok(rows)
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = String::from("train_epochs,retrain_epochs,median_utility\n");
    for r in rows {
        s.push_str(&format!("{},{},{:.6}\n", r.train_epochs, r.retrain_epochs, r.median_utility));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::DriftKind;

    fn small_config(methods: &[&str]) -> BenchConfig {
        BenchConfig {
            repetitions: 3,
            methods: methods.iter().map(|s| s.to_string()).collect(),
            calibration_resamples: 3,
            forest: ForestParams {
                tree_count: 10,
                max_depth: 6,
                ..ForestParams::default()
            },
            source: SequenceSource::Scenario {
                batches: 6,
                scenario: SyntheticDriftScenario {
                    kind: DriftKind::NewClass,
                    samples_per_batch: 90,
                    feature_count: 4,
                    ..SyntheticDriftScenario::default()
                },
            },
            ..BenchConfig::default()
        }
    }

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = BenchConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(BenchConfig::from_toml(&text).unwrap(), cfg);
        let small = small_config(&["cfpt", "adwin"]);
        assert_eq!(BenchConfig::from_toml(&small.to_toml().unwrap()).unwrap(), small);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = BenchConfig::from_toml("repetitions = 4\nmethods = [\"ddm\"]\n").unwrap();
        assert_eq!(cfg.repetitions, 4);
        assert_eq!(cfg.methods, vec!["ddm"]);
        assert_eq!(cfg.source, SequenceSource::default());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = BenchConfig::default();
        cfg.repetitions = 2;
        assert!(matches!(cfg.validate(), Err(DriftError::Config(_))));
        let mut cfg = BenchConfig::default();
        cfg.methods = vec!["kswin".into()];
        assert!(matches!(cfg.validate(), Err(DriftError::UnknownMethod(_))));
        let mut cfg = BenchConfig::default();
        cfg.methods.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::default();
        cfg.methods = vec!["ddm".into(), "ddm".into()];
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::default();
        cfg.source = SequenceSource::Manifest { path: "/nonexistent/manifest.toml".into() };
        assert!(matches!(cfg.validate(), Err(DriftError::MissingFile(_))));
    }

    #[test]
    fn report_structure_and_determinism() {
        let cfg = small_config(&METHOD_NAMES);
        let a = run_benchmark(&cfg).unwrap();
        assert_eq!(a.methods.len(), 7);
        for m in &a.methods {
            assert_eq!(m.confusion.total(), 6);
            assert_eq!(m.reward_per_rep.len(), 3);
        }
        assert_eq!(a.records.len(), 7 * 3 * 6);
        assert!(a.timings.iter().all(|t| t.calls == 18 && t.mean_seconds >= 0.0));
        let b = run_benchmark(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn no_drift_sequence_has_no_positives() {
        let mut cfg = small_config(&["adwin"]);
        if let SequenceSource::Scenario { scenario, .. } = &mut cfg.source {
            scenario.kind = DriftKind::None;
        }
        let r = run_benchmark(&cfg).unwrap();
        let c = r.methods[0].confusion;
        assert_eq!(c.fp + c.tn, 6);
        assert_eq!(c.tp + c.fn_, 0);
    }

    #[test]
    fn reward_is_trimmed_mean_of_repetition_totals() {
        let r = run_benchmark(&small_config(&["cfpt", "ddm"])).unwrap();
        for m in &r.methods {
            let per_rep: Vec<f64> = (0..3)
                .map(|rep| {
                    r.records
                        .iter()
                        .filter(|x| x.method == m.method && x.repetition == rep)
                        .map(|x| x.reward)
                        .sum()
                })
                .collect();
            for (a, b) in per_rep.iter().zip(&m.reward_per_rep) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((aggregate_trimmed(&per_rep).unwrap() - m.reward).abs() < 1e-12);
        }
    }

    #[test]
    fn emitted_files_and_record_round_trip() {
        let r = run_benchmark(&small_config(&["cusum", "stepd"])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&r, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(summary.lines().count(), 3);
        let rewards = fs::read_to_string(dir.path().join(REWARDS_FILE)).unwrap();
        assert_eq!(rewards.lines().count(), 1 + 2 * 3);
        let back = read_records(&dir.path().join(RECORDS_FILE)).unwrap();
        assert_eq!(back.methods, r.methods);
        assert_eq!(back.records, r.records);
        assert!(back.timings.is_empty());
    }

    #[test]
    fn unwritable_output_is_an_error() {
        let r = run_benchmark(&small_config(&["adwin"])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(emit_report(&r, &blocker.join("sub")).is_err());
    }

    #[test]
    fn ablation_grid_shapes() {
        let spec = AblationSpec {
            grid: vec![3],
            seeds: vec![0, 1],
            source: AblationSource::Scenario {
                scenario: SyntheticDriftScenario {
                    kind: DriftKind::NewClass,
                    samples_per_batch: 120,
                    feature_count: 4,
                    ..SyntheticDriftScenario::default()
                },
            },
            forest: ForestParams {
                tree_count: 10,
                ..ForestParams::default()
            },
            ..AblationSpec::default()
        };
        let rows = run_ablation(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].train_epochs, rows[0].retrain_epochs), (3, 5));
        assert!((0.0..=1.0).contains(&rows[0].median_utility));
        let tab = AblationSpec {
            method: TABAUTODRIFT_NAME.into(),
            axis: AblationAxis::Retrain,
            ..spec.clone()
        };
        let rows = run_ablation(&tab).unwrap();
        assert_eq!((rows[0].train_epochs, rows[0].retrain_epochs), (5, 3));
        assert!(run_ablation(&AblationSpec { grid: vec![], ..spec.clone() }).is_err());
        assert!(run_ablation(&AblationSpec { method: "adwin".into(), ..spec }).is_err());
    }
}
