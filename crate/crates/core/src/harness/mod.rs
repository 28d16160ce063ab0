//! Experiment harness: error metric, sample-size sweeps, taxi ingestion.

mod metrics;
mod sweep;
mod taxi;

pub use metrics::normalized_l1_error;
pub use sweep::{run_sweep, write_results, ExperimentConfig, Source, SummaryRow, SweepResults, SweepRow};
pub use taxi::{
    ingest_taxi, ingest_taxi_file, ingest_taxi_from_readers, IngestReport, TaxiData, TaxiIngestConfig, MANHATTAN_ZONES,
};
