use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use driftkit::baselines::{baseline_detect_batch, BASELINE_NAMES};
use driftkit::bench::{
    ablation_table, emit_report, read_records, run_ablation, run_benchmark, summary_table, AblationAxis, AblationSource,
    AblationSpec,
    BenchConfig, METHOD_NAMES,
};
use driftkit::cfpt::{self, cfpt_detect, CFPT_NAME};
use driftkit::datasets::{
    load_csv, write_csv, BatchManifest, CsvSchema, DriftKind, ManifestEntry, SyntheticDriftScenario, MANIFEST_VERSION,
};
use driftkit::tabautodrift::{self, tabautodrift_detect, TABAUTODRIFT_NAME};
use driftkit::trees::{ForestParams, RandomForest};
use driftkit::{DetectorConfig, DriftError, Result};

#[derive(Parser)]
#[command(name = "driftbench", version, about = "Batch drift detection benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full method comparison and write the report files.
    Bench(BenchArgs),
    /// Compare one incoming CSV batch against a labeled reference CSV.
    Detect(DetectArgs),
    /// Write the configured batch sequence as CSV files plus a manifest.
    Synth(ConfigArgs),
    /// Sweep training or re-training epochs and print median utilities.
    Ablate(AblateArgs),
    /// Print the summary table of a previous run's records.json.
    Report {
        /// records.json file or the directory holding it.
        input: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of the method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    reps: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<BenchConfig> {
        let mut cfg = match &self.config {
            Some(p) => BenchConfig::read(p)?,
            None => BenchConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(m) = &self.methods {
            cfg.methods = m.iter().map(|s| s.trim().to_string()).collect();
        }
        if let Some(r) = self.reps {
            cfg.repetitions = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    incoming: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// One of the method names.
    #[arg(long, default_value = CFPT_NAME)]
    method: String,
    /// Fixed alarm threshold; by default it is calibrated on the reference batch.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 10)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Train,
    Retrain,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long, default_value = CFPT_NAME)]
    method: String,
    #[arg(long, value_enum, default_value = "train")]
    axis: Axis,
    /// Comma-separated epoch counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    grid: Vec<usize>,
    /// Epoch count on the axis not swept.
    #[arg(long, default_value_t = 5)]
    fixed: usize,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 8)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use a generated drift pair of this kind (e.g. new_class, covariate) instead of
    /// the first two drift batches of the default benchmark sequence.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    magnitude: f64,
    /// Also write the table to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn bench(args: &BenchArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    if args.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let report = run_benchmark(&cfg)?;
    let files = emit_report(&report, &cfg.out_dir)?;
    print!("{}", summary_table(&report));
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn detect(args: &DetectArgs) -> Result<()> {
    if !METHOD_NAMES.contains(&args.method.as_str()) {
        return Err(DriftError::UnknownMethod(args.method.clone()));
    }
    let schema = CsvSchema::new(&args.label_column);
    let d0 = load_csv(&args.reference, &schema)?;
    let d1 = load_csv(&args.incoming, &schema)?.unlabeled();
    let mut cfg = DetectorConfig {
        rng_seed: args.seed,
        ..DetectorConfig::default()
    };
    let verdict = match args.method.as_str() {
        TABAUTODRIFT_NAME => {
            cfg.utility_threshold = match args.threshold {
                Some(t) => t,
                None => tabautodrift::calibrate_threshold(&d0, &cfg, args.resamples)?,
            };
            tabautodrift_detect(&d0, &d1, &cfg)?.0
        }
        method => {
            let m0 = RandomForest::fit(&d0, ForestParams { rng_seed: args.seed, ..ForestParams::default() })?;
            if method == CFPT_NAME {
                cfg.utility_threshold = match args.threshold {
                    Some(t) => t,
                    None => cfpt::calibrate_threshold(&m0, &d0, &cfg, args.resamples)?,
                };
                cfpt_detect(&m0, &d0, &d1, &cfg)?.0
            } else {
                debug_assert!(BASELINE_NAMES.contains(&method));
                baseline_detect_batch(&BenchConfig::default().overrides.baseline(method)?, &m0, &d0, &d1)?
            }
        }
    };
    println!("{}", serde_json::to_string(&verdict)?);
    Ok(())
}

fn synth(args: &ConfigArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let seq = cfg.source.build(cfg.seed)?;
    fs::create_dir_all(&cfg.out_dir)?;
    write_csv(&cfg.out_dir.join("d0.csv"), &seq.reference)?;
    let mut batches = Vec::with_capacity(seq.len());
    for (i, (b, &drift)) in seq.incoming.iter().zip(&seq.ground_truth_drift).enumerate() {
        let name = format!("d{}.csv", i + 1);
        write_csv(&cfg.out_dir.join(&name), b)?;
        batches.push(ManifestEntry {
            path: name.into(),
            has_drift: drift,
        });
    }
    let manifest = BatchManifest {
        version: MANIFEST_VERSION,
        reference: "d0.csv".into(),
        batches,
        schema: CsvSchema::new("label"),
    };
    let path = cfg.out_dir.join("manifest.toml");
    manifest.write(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn ablate(args: &AblateArgs) -> Result<()> {
    let defaults = AblationSpec::default();
    let source = match &args.kind {
        Some(k) => {
            let kind: DriftKind = serde_json::from_value(serde_json::Value::String(k.clone()))
                .map_err(|_| DriftError::InvalidParameter(format!("unknown drift kind '{k}'")))?;
            AblationSource::Scenario {
                scenario: SyntheticDriftScenario {
                    kind,
                    magnitude: args.magnitude,
                    ..SyntheticDriftScenario::default()
                },
            }
        }
        None => defaults.source.clone(),
    };
    let spec = AblationSpec {
        method: args.method.clone(),
        axis: match args.axis {
            Axis::Train => AblationAxis::Train,
            Axis::Retrain => AblationAxis::Retrain,
        },
        grid: args.grid.clone(),
        fixed: args.fixed,
        source,
        seeds: (args.seed..args.seed + args.seeds).collect(),
        ..defaults
    };
    let table = ablation_table(&run_ablation(&spec)?);
    if let Some(out) = &args.out {
        fs::write(out, &table)?;
    }
    print!("{table}");
    Ok(())
}

fn report(input: &Path) -> Result<()> {
    let path = if input.is_dir() {
        input.join(driftkit::bench::RECORDS_FILE)
    } else {
        input.to_path_buf()
    };
    print!("{}", summary_table(&read_records(&path)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bench(a) => bench(a),
        Command::Detect(a) => detect(a),
        Command::Synth(a) => synth(a),
        Command::Ablate(a) => ablate(a),
        Command::Report { input } => report(input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
