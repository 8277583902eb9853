//! Batch sources: CSV loading, the two batching protocols and synthetic drift.

mod loader;
mod protocols;
mod synthetic;

pub use loader::{load_csv, write_csv, BatchManifest, CsvSchema, LabelMap, ManifestEntry, MANIFEST_VERSION};
pub use protocols::{
    build_fingerprinting_protocol, build_links_protocol, FINGERPRINTING_BATCHES, LINKS_BATCHES,
};
pub use synthetic::{
    balanced_counts, gaussian_mixture_source, generate_synthetic, link_series_source, scenario_sequence, DriftKind,
    GaussianMixture,
    SyntheticDriftScenario,
};
