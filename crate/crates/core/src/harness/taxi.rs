//! Taxi trip records to state-pair counts.
//!
//! Each kept trip is one observed transition
//! `s = (pickup zone, pickup bin) -> s' = (dropoff zone, dropoff bin)`.
//! Trips are treated as an independent multiset of pairs, not a chained walk.
//! Bins split the day into `bins_per_day` equal blocks starting at midnight,
//! and each endpoint is binned by its own timestamp.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{JointNormalization, PairCounts};
use crate::markov::TransitionModel;
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, StateSpace};

/// Yellow-cab location IDs in Manhattan, ascending, without the three island
/// zones (103, 104, 105).
pub const MANHATTAN_ZONES: [u32; 66] = [
    4, 12, 13, 24, 41, 42, 43, 45, 48, 50, 68, 74, 75, 79, 87, 88, 90, 100, 107, 113, 114, 116, 120, 125, 127, 128,
    137, 140, 141, 142, 143, 144, 148, 151, 152, 153, 158, 161, 162, 163, 164, 166, 170, 186, 194, 202, 209, 211,
    224, 229, 230, 231, 232, 233, 234, 236, 237, 238, 239, 243, 244, 246, 249, 261, 262, 263,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaxiIngestConfig {
    pub inputs: Vec<PathBuf>,
    /// Allowed location IDs. The position in this list is the zone index.
    pub zones: Vec<u32>,
    pub bins_per_day: usize,
    pub pickup_zone_column: String,
    pub dropoff_zone_column: String,
    pub pickup_time_column: String,
    pub dropoff_time_column: String,
    /// `chrono` formats tried in order.
    pub timestamp_formats: Vec<String>,
    pub delimiter: char,
    /// Above this share of malformed rows the report is flagged.
    pub max_malformed_fraction: f64,
}

impl Default for TaxiIngestConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            zones: MANHATTAN_ZONES.to_vec(),
            bins_per_day: 6,
            pickup_zone_column: "PULocationID".into(),
            dropoff_zone_column: "DOLocationID".into(),
            pickup_time_column: "tpep_pickup_datetime".into(),
            dropoff_time_column: "tpep_dropoff_datetime".into(),
            timestamp_formats: vec!["%Y-%m-%d %H:%M:%S".into(), "%Y-%m-%dT%H:%M:%S".into()],
            delimiter: ',',
            max_malformed_fraction: 0.01,
        }
    }
}

impl TaxiIngestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.zones.is_empty() {
            return bad("zone allowlist is empty".into());
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(z) = self.zones.iter().find(|z| !seen.insert(**z)) {
            return bad(format!("zone {z} listed twice"));
        }
        if self.bins_per_day == 0 || 24 % self.bins_per_day != 0 {
            return bad(format!("bins_per_day must divide 24, got {}", self.bins_per_day));
        }
        if self.timestamp_formats.is_empty() {
            return bad("no timestamp formats given".into());
        }
        if !self.delimiter.is_ascii() {
            return bad(format!("delimiter {:?} is not ASCII", self.delimiter));
        }
        if !(0.0..=1.0).contains(&self.max_malformed_fraction) {
            return bad(format!("max_malformed_fraction must be in [0, 1], got {}", self.max_malformed_fraction));
        }
        Ok(())
    }

    /// `(zones, bins)`.
    pub fn space(&self) -> Result<StateSpace> {
        StateSpace::new(vec![self.zones.len(), self.bins_per_day])
    }

    pub fn bin_of(&self, hour: u32) -> usize {
        hour as usize / (24 / self.bins_per_day)
    }
}

/// Row accounting; `kept + dropped + malformed == total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub total: u64,
    pub kept: u64,
    /// Well-formed trips with an endpoint outside the allowlist.
    pub dropped: u64,
    pub malformed: u64,
    pub malformed_exceeded: bool,
}

#[derive(Debug, Clone)]
pub struct TaxiData {
    pub space: StateSpace,
    /// Flat `(s, s')` per kept trip, in input order.
    pub pairs: Vec<(usize, usize)>,
    pub counts: PairCounts,
    pub report: IngestReport,
}

impl TaxiData {
    /// Pair counts over the number of kept trips.
    pub fn joint<T: Scalar>(&self) -> Result<DenseTensor<T>> {
        self.counts.joint(JointNormalization::Transitions)
    }

    /// Row-normalized counts, uniform rows for unobserved states.
    pub fn truth<T: Scalar>(&self) -> Result<TransitionModel<T>> {
        self.counts.transition()
    }
}

struct Columns {
    pickup_zone: usize,
    dropoff_zone: usize,
    pickup_time: usize,
    dropoff_time: usize,
}

struct Ingestor<'a> {
    cfg: &'a TaxiIngestConfig,
    space: StateSpace,
    index: HashMap<u32, usize>,
    pairs: Vec<(usize, usize)>,
    report: IngestReport,
}

enum Row {
    Kept(usize, usize),
    Dropped,
    Malformed,
}

impl<'a> Ingestor<'a> {
    fn new(cfg: &'a TaxiIngestConfig) -> Result<Self> {
        cfg.validate()?;
        let index = cfg.zones.iter().enumerate().map(|(i, &z)| (z, i)).collect();
        Ok(Self { cfg, space: cfg.space()?, index, pairs: Vec::new(), report: IngestReport::default() })
    }

    fn hour(&self, field: &str) -> Option<u32> {
        let field = field.trim();
        self.cfg
            .timestamp_formats
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(field, f).ok())
            .map(|t| t.hour())
    }

    fn classify(&self, rec: &csv::StringRecord, cols: &Columns) -> Row {
        let field = |i: usize| rec.get(i).map(str::trim).filter(|s| !s.is_empty());
        let parsed = (|| {
            let pz: u32 = field(cols.pickup_zone)?.parse().ok()?;
            let dz: u32 = field(cols.dropoff_zone)?.parse().ok()?;
            let ph = self.hour(field(cols.pickup_time)?)?;
            let dh = self.hour(field(cols.dropoff_time)?)?;
            Some((pz, dz, ph, dh))
        })();
        let Some((pz, dz, ph, dh)) = parsed else {
            return Row::Malformed;
        };
        match (self.index.get(&pz), self.index.get(&dz)) {
            (Some(&a), Some(&b)) => {
                let s = a * self.cfg.bins_per_day + self.cfg.bin_of(ph);
                let t = b * self.cfg.bins_per_day + self.cfg.bin_of(dh);
                Row::Kept(s, t)
            }
            _ => Row::Dropped,
        }
    }

    fn feed<R: Read>(&mut self, reader: R, source: &str) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(self.cfg.delimiter as u8)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Ingestion(format!("{source}: cannot read header: {e}")))?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Ingestion(format!("{source}: missing column `{name}`")))
        };
        let cols = Columns {
            pickup_zone: find(&self.cfg.pickup_zone_column)?,
            dropoff_zone: find(&self.cfg.dropoff_zone_column)?,
            pickup_time: find(&self.cfg.pickup_time_column)?,
            dropoff_time: find(&self.cfg.dropoff_time_column)?,
        };
        for rec in rdr.records() {
            self.report.total += 1;
            let row = match rec {
                Ok(rec) => self.classify(&rec, &cols),
                Err(e) if e.is_io_error() => return Err(Error::Ingestion(format!("{source}: {e}"))),
                Err(_) => Row::Malformed,
            };
            match row {
                Row::Kept(s, t) => {
                    self.report.kept += 1;
                    self.pairs.push((s, t));
                }
                Row::Dropped => self.report.dropped += 1,
                Row::Malformed => self.report.malformed += 1,
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<TaxiData> {
        if self.report.total == 0 {
            return Err(Error::Ingestion("no trip rows in input".into()));
        }
        if self.report.kept == 0 {
            return Err(Error::Ingestion(format!(
                "no trips kept ({} dropped, {} malformed)",
                self.report.dropped, self.report.malformed
            )));
        }
        let fraction = self.report.malformed as f64 / self.report.total as f64;
        if fraction > self.cfg.max_malformed_fraction {
            self.report.malformed_exceeded = true;
            log::warn!(
                "{} of {} rows malformed ({:.2}%), above the {:.2}% threshold",
                self.report.malformed,
                self.report.total,
                100.0 * fraction,
                100.0 * self.cfg.max_malformed_fraction
            );
        }
        let counts = PairCounts::from_pairs(self.space.clone(), self.pairs.iter().copied())?;
        Ok(TaxiData { space: self.space, pairs: self.pairs, counts, report: self.report })
    }
}

/// Reads every file in `cfg.inputs`.
pub fn ingest_taxi(cfg: &TaxiIngestConfig) -> Result<TaxiData> {
    if cfg.inputs.is_empty() {
        return Err(Error::Ingestion("no input files given".into()));
    }
    let mut ing = Ingestor::new(cfg)?;
    for path in &cfg.inputs {
        let file = std::fs::File::open(path).map_err(|e| Error::Ingestion(format!("cannot open {}: {e}", path.display())))?;
        ing.feed(std::io::BufReader::new(file), &path.display().to_string())?;
    }
    ing.finish()
}

/// Same as [`ingest_taxi`] on in-memory sources; `cfg.inputs` is ignored.
pub fn ingest_taxi_from_readers<R: Read>(cfg: &TaxiIngestConfig, readers: impl IntoIterator<Item = R>) -> Result<TaxiData> {
    let mut ing = Ingestor::new(cfg)?;
    for (i, r) in readers.into_iter().enumerate() {
        ing.feed(r, &format!("input {i}"))?;
    }
    ing.finish()
}

/// Ingests one file, overriding `cfg.inputs`.
pub fn ingest_taxi_file(cfg: &TaxiIngestConfig, path: &Path) -> Result<TaxiData> {
    ingest_taxi(&TaxiIngestConfig { inputs: vec![path.to_path_buf()], ..cfg.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "tpep_pickup_datetime,tpep_dropoff_datetime,PULocationID,DOLocationID\n";

    fn run(body: &str) -> Result<TaxiData> {
        let text = format!("{HEADER}{body}");
        ingest_taxi_from_readers(&TaxiIngestConfig::default(), [text.as_bytes()])
    }

    #[test]
    fn manhattan_space_has_396_states() {
        let cfg = TaxiIngestConfig::default();
        assert_eq!(cfg.zones.len(), 66);
        assert_eq!(cfg.space().unwrap().total(), 396);
    }

    #[test]
    fn three_trips_hand_counted() {
        // zone 4 -> index 0, zone 12 -> index 1, zone 263 -> index 65
        let d = run("2024-01-01 00:10:00,2024-01-01 00:30:00,4,12\n\
                     2024-01-01 03:59:59,2024-01-01 04:05:00,4,12\n\
                     2024-01-01 23:00:00,2024-01-02 00:15:00,263,4\n")
            .unwrap();
        assert_eq!(d.report, IngestReport { total: 3, kept: 3, dropped: 0, malformed: 0, malformed_exceeded: false });
        assert_eq!(d.pairs, vec![(0, 6), (0, 7), (65 * 6 + 5, 0)]);
        let q = d.joint::<f64>().unwrap();
        assert_eq!(q.get(&[0, 0, 1, 0]).unwrap(), 1.0 / 3.0);
        assert_eq!(q.get(&[0, 0, 1, 1]).unwrap(), 1.0 / 3.0);
        assert_eq!(q.get(&[65, 5, 0, 0]).unwrap(), 1.0 / 3.0);
        assert!((q.sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outside_zone_is_dropped_and_counted() {
        let d = run("2024-01-01 10:00:00,2024-01-01 10:20:00,4,1\n2024-01-01 10:00:00,2024-01-01 10:20:00,4,4\n")
            .unwrap();
        assert_eq!((d.report.kept, d.report.dropped, d.report.malformed), (1, 1, 0));
    }

    #[test]
    fn malformed_rows_are_flagged() {
        let d = run("garbage,2024-01-01 10:20:00,4,4\n2024-01-01 10:00:00,2024-01-01 10:20:00,4,x\n\
                     2024-01-01 10:00:00,2024-01-01 10:20:00,4,4\n")
            .unwrap();
        assert_eq!((d.report.total, d.report.kept, d.report.malformed), (3, 1, 2));
        assert!(d.report.malformed_exceeded);
    }

    #[test]
    fn empty_or_fully_dropped_input_is_an_error() {
        assert!(matches!(run(""), Err(Error::Ingestion(_))));
        assert!(matches!(run("2024-01-01 10:00:00,2024-01-01 10:20:00,1,2\n"), Err(Error::Ingestion(_))));
    }

    #[test]
    fn missing_column_is_an_error() {
        let text = "a,b\n1,2\n";
        let r = ingest_taxi_from_readers(&TaxiIngestConfig::default(), [text.as_bytes()]);
        assert!(matches!(r, Err(Error::Ingestion(_))));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TaxiIngestConfig { bins_per_day: 5, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.bins_per_day = 6;
        cfg.zones.push(4);
        assert!(cfg.validate().is_err());
    }
}
