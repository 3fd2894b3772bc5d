//! Appliance logbook ingestion and emission, plus a synthetic fleet
//! generator for end-to-end experiments.
//!
//! Schema (single file or one file per appliance):
//! `appliance_id,startup_index,cum_hours,initial_temp_c,tmf_s,failed,failure_startup`
//! with `failure_startup` empty for appliances that never failed. Appliance
//! rows must be contiguous and carry consistent failure metadata. UTF-8,
//! LF or CRLF accepted on read, LF written.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::csvfmt::fmt_scalar;
use crate::markov_chain::GeneratorMatrix;
use crate::observation::SlopeVector;
use crate::scalar::{Scalar, SimScalar};

const HEADER: [&str; 7] = [
    "appliance_id",
    "startup_index",
    "cum_hours",
    "initial_temp_c",
    "tmf_s",
    "failed",
    "failure_startup",
];

#[derive(Debug, Error)]
pub enum LogbookError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {msg}")]
    Parse { file: PathBuf, line: u64, msg: String },
    #[error("{file}: {msg}")]
    Schema { file: PathBuf, msg: String },
    #[error("invalid logbook: {0}")]
    Invalid(String),
    #[error("duplicate appliance id {0:?}")]
    DuplicateId(String),
    #[error("invalid fleet generator configuration: {0}")]
    BadConfig(String),
}

/// One startup entry. Cumulative operating hours are carried through
/// unchanged; no computation uses them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartupRecord<T> {
    pub startup_index: u64,
    pub cum_hours: T,
    pub initial_temp: T,
    pub tmf: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceLogbook<T> {
    appliance_id: String,
    records: Vec<StartupRecord<T>>,
    failed: bool,
    failure_startup: Option<u64>,
}

impl<T: Scalar> ApplianceLogbook<T> {
    pub fn new(
        appliance_id: String,
        records: Vec<StartupRecord<T>>,
        failed: bool,
        failure_startup: Option<u64>,
    ) -> Result<Self, LogbookError> {
        if appliance_id.is_empty() {
            return Err(LogbookError::Invalid("appliance id must be non-empty".into()));
        }
        if records.is_empty() {
            return Err(LogbookError::Invalid(format!("appliance {appliance_id:?} has no records")));
        }
        for pair in records.windows(2) {
            if pair[1].startup_index <= pair[0].startup_index {
                return Err(LogbookError::Invalid(format!(
                    "appliance {appliance_id:?}: startup indices not strictly increasing at {}",
                    pair[1].startup_index
                )));
            }
        }
        for r in &records {
            if !r.tmf.is_finite() || !r.initial_temp.is_finite() || !r.cum_hours.is_finite() {
                return Err(LogbookError::Invalid(format!(
                    "appliance {appliance_id:?}: non-finite fields at startup {}",
                    r.startup_index
                )));
            }
        }
        if let Some(fs) = failure_startup {
            if !failed {
                return Err(LogbookError::Invalid(format!(
                    "appliance {appliance_id:?} has a failure startup but failed=false"
                )));
            }
            let last = records.last().expect("non-empty").startup_index;
            if fs > last {
                return Err(LogbookError::Invalid(format!(
                    "appliance {appliance_id:?}: failure startup {fs} beyond last record {last}"
                )));
            }
        }
        Ok(Self { appliance_id, records, failed, failure_startup })
    }

    pub fn appliance_id(&self) -> &str {
        &self.appliance_id
    }

    pub fn records(&self) -> &[StartupRecord<T>] {
        &self.records
    }

    pub fn failed(&self) -> bool {
        self.failed
    }

    pub fn failure_startup(&self) -> Option<u64> {
        self.failure_startup
    }

    /// Startups at risk: up to the failure when one happened, else the whole
    /// observed span. Feeds the censored exponential rate estimator.
    pub fn exposure(&self) -> u64 {
        match self.failure_startup {
            Some(fs) => fs,
            None => self.records.last().expect("non-empty").startup_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FleetDataset<T> {
    appliances: Vec<ApplianceLogbook<T>>,
}

impl<T: Scalar> FleetDataset<T> {
    pub fn new(appliances: Vec<ApplianceLogbook<T>>) -> Result<Self, LogbookError> {
        let mut seen = HashMap::new();
        for a in &appliances {
            if seen.insert(a.appliance_id.clone(), ()).is_some() {
                return Err(LogbookError::DuplicateId(a.appliance_id.clone()));
            }
        }
        Ok(Self { appliances })
    }

    pub fn empty() -> Self {
        Self { appliances: Vec::new() }
    }

    pub fn appliances(&self) -> &[ApplianceLogbook<T>] {
        &self.appliances
    }

    pub fn len(&self) -> usize {
        self.appliances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.appliances.is_empty()
    }

    /// Exposures (startups at risk) and failure flags, per appliance.
    pub fn exposures_and_events(&self) -> (Vec<T>, Vec<bool>) {
        let exposures = self.appliances.iter().map(|a| T::of(a.exposure() as f64)).collect();
        let events = self.appliances.iter().map(|a| a.failed).collect();
        (exposures, events)
    }
}

/// Read a fleet from one CSV file, or from every `.csv` file (sorted by
/// name) in a directory.
pub fn read_fleet<T: Scalar>(path: &Path) -> Result<FleetDataset<T>, LogbookError> {
    let io_err = |source| LogbookError::Io { path: path.to_path_buf(), source };
    let meta = fs::metadata(path).map_err(io_err)?;
    let mut appliances = Vec::new();
    if meta.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        for file in files {
            read_fleet_file(&file, &mut appliances)?;
        }
    } else {
        read_fleet_file(path, &mut appliances)?;
    }
    FleetDataset::new(appliances)
}

fn read_fleet_file<T: Scalar>(
    file: &Path,
    out: &mut Vec<ApplianceLogbook<T>>,
) -> Result<(), LogbookError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(file)
        .map_err(|e| csv_error(file, e))?;
    {
        let headers = rdr.headers().map_err(|e| csv_error(file, e))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != HEADER {
            return Err(LogbookError::Schema {
                file: file.to_path_buf(),
                msg: format!("expected columns {HEADER:?}, got {got:?}"),
            });
        }
    }

    struct Group<T> {
        records: Vec<StartupRecord<T>>,
        failed: bool,
        failure_startup: Option<u64>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Group<T>> = HashMap::new();

    for row in rdr.records() {
        let rec = row.map_err(|e| csv_error(file, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |msg: String| LogbookError::Parse { file: file.to_path_buf(), line, msg };
        if rec.len() != HEADER.len() {
            return Err(parse_err(format!("expected {} fields, got {}", HEADER.len(), rec.len())));
        }
        let id = rec[0].to_string();
        let startup_index: u64 = rec[1]
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("startup_index {:?}: {e}", &rec[1])))?;
        let cum_hours =
            crate::csvfmt::parse_field::<T>(&rec[2], "cum_hours").map_err(&parse_err)?;
        let initial_temp =
            crate::csvfmt::parse_field::<T>(&rec[3], "initial_temp_c").map_err(&parse_err)?;
        let tmf = crate::csvfmt::parse_field::<T>(&rec[4], "tmf_s").map_err(&parse_err)?;
        let failed = match rec[5].trim().to_ascii_lowercase().as_str() {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(parse_err(format!("failed flag {other:?} is not a boolean"))),
        };
        let failure_startup = match rec[6].trim() {
            "" => None,
            s => Some(
                s.parse::<u64>()
                    .map_err(|e| parse_err(format!("failure_startup {s:?}: {e}")))?,
            ),
        };

        let record = StartupRecord { startup_index, cum_hours, initial_temp, tmf };
        match groups.get_mut(&id) {
            Some(g) => {
                if g.failed != failed || g.failure_startup != failure_startup {
                    return Err(parse_err(format!(
                        "appliance {id:?} has inconsistent failure metadata"
                    )));
                }
                g.records.push(record);
            }
            None => {
                order.push(id.clone());
                groups.insert(id, Group { records: vec![record], failed, failure_startup });
            }
        }
    }

    for id in order {
        let g = groups.remove(&id).expect("group recorded in order");
        out.push(ApplianceLogbook::new(id, g.records, g.failed, g.failure_startup)?);
    }
    Ok(())
}

fn csv_error(file: &Path, e: csv::Error) -> LogbookError {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => LogbookError::Io { path: file.to_path_buf(), source },
            _ => unreachable!("is_io_error guarantees the Io kind"),
        }
    } else {
        LogbookError::Parse { file: file.to_path_buf(), line, msg: e.to_string() }
    }
}

/// Write a fleet. A path ending in `.csv` gets one concatenated file;
/// anything else is treated as a directory receiving one numbered file per
/// appliance (ids live inside the files, so arbitrary unicode ids survive
/// the round trip).
pub fn write_fleet<T: Scalar>(fleet: &FleetDataset<T>, path: &Path) -> Result<(), LogbookError> {
    if path.extension().is_some_and(|x| x == "csv") {
        write_fleet_file(fleet.appliances(), path)
    } else {
        fs::create_dir_all(path)
            .map_err(|source| LogbookError::Io { path: path.to_path_buf(), source })?;
        for (k, appliance) in fleet.appliances().iter().enumerate() {
            let file = path.join(format!("appliance_{k:04}.csv"));
            write_fleet_file(std::slice::from_ref(appliance), &file)?;
        }
        Ok(())
    }
}

fn write_fleet_file<T: Scalar>(
    appliances: &[ApplianceLogbook<T>],
    file: &Path,
) -> Result<(), LogbookError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(file)
        .map_err(|e| csv_error(file, e))?;
    w.write_record(HEADER).map_err(|e| csv_error(file, e))?;
    for a in appliances {
        let failed = if a.failed { "true" } else { "false" };
        let failure = a.failure_startup.map_or(String::new(), |v| v.to_string());
        for r in &a.records {
            w.write_record([
                a.appliance_id.as_str(),
                &r.startup_index.to_string(),
                &fmt_scalar(r.cum_hours),
                &fmt_scalar(r.initial_temp),
                &fmt_scalar(r.tmf),
                failed,
                &failure,
            ])
            .map_err(|e| csv_error(file, e))?;
        }
    }
    w.flush().map_err(|source| LogbookError::Io { path: file.to_path_buf(), source })?;
    Ok(())
}

/// Synthetic fleet shape and physics.
///
/// Raw cool-down times are built by inverting the preprocessing chain:
/// `tmf = temp_intercept + temp_slope * initial_temp + drift + noise`, where
/// the drift accumulates the slope vector along a sampled two-state health
/// path. The per-startup noise is sized so that after the trailing moving
/// average of length `smoothing_window`, increments of the smoothed series
/// have standard deviation about `noise_scale` (raw sd = ns * w / sqrt(2)).
#[derive(Debug, Clone)]
pub struct FleetGenConfig<T> {
    pub n_stable: usize,
    pub n_degrading: usize,
    pub a: GeneratorMatrix<T>,
    pub c: SlopeVector<T>,
    pub noise_scale: T,
    pub temp_slope: T,
    pub temp_intercept: T,
    pub temp_range: (T, T),
    pub horizon: usize,
    pub smoothing_window: usize,
    pub seed: u64,
}

impl<T: Scalar> FleetGenConfig<T> {
    /// 23 stable + 5 degrading appliances over 200 startups with the
    /// industrial working parameters.
    pub fn industrial(seed: u64) -> Self {
        let (a, c) = crate::estimation::industrial_defaults();
        Self {
            n_stable: 23,
            n_degrading: 5,
            a,
            c,
            noise_scale: T::of(0.3),
            temp_slope: T::of(2.0),
            temp_intercept: T::of(60.0),
            temp_range: (T::of(5.0), T::of(25.0)),
            horizon: 200,
            smoothing_window: crate::preprocessing::DEFAULT_WINDOW,
            seed,
        }
    }

    fn validate(&self) -> Result<(), LogbookError> {
        if self.a.n_states() != 2 {
            return Err(LogbookError::BadConfig(format!(
                "fleet generation uses a two-state health model, got {} states",
                self.a.n_states()
            )));
        }
        if self.c.dim() != 2 {
            return Err(LogbookError::BadConfig("slope vector must have 2 entries".into()));
        }
        if self.horizon < 4 {
            return Err(LogbookError::BadConfig("horizon must be at least 4 startups".into()));
        }
        if !(self.noise_scale >= T::zero() && self.noise_scale.is_finite()) {
            return Err(LogbookError::BadConfig("noise_scale must be finite and >= 0".into()));
        }
        let (lo, hi) = self.temp_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(LogbookError::BadConfig("temperature range must be ordered".into()));
        }
        if self.smoothing_window == 0 {
            return Err(LogbookError::BadConfig("smoothing_window must be >= 1".into()));
        }
        if self.n_degrading > 0 && !(self.a.rate(0, 1) > T::zero()) {
            return Err(LogbookError::BadConfig(
                "degrading appliances need a positive stable->degraded rate".into(),
            ));
        }
        Ok(())
    }
}

/// Earliest and latest startup lag between degradation onset and failure.
const FAILURE_LAG_STARTUPS: std::ops::Range<u64> = 40..80;

/// Degradation onsets are confined to the first fraction of the horizon so
/// every degrading appliance has room to fail inside its logbook.
const ONSET_HORIZON_FRACTION: f64 = 0.7;

/// Generate a synthetic fleet. Stable appliances stay in the healthy state
/// for their whole logbook; degrading ones switch at an exponentially
/// sampled onset (resampled into the first part of the horizon) and fail a
/// uniform 40-79 startups later, at which point their logbook ends.
/// Appliances use independent RNG streams, so output is deterministic per
/// seed and independent of generation order.
pub fn generate_synthetic_fleet<T: SimScalar>(
    cfg: &FleetGenConfig<T>,
) -> Result<FleetDataset<T>, LogbookError> {
    cfg.validate()?;
    let mut appliances = Vec::with_capacity(cfg.n_stable + cfg.n_degrading);
    for k in 0..cfg.n_stable + cfg.n_degrading {
        let degrading = k >= cfg.n_stable;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64 + 1);

        let (onset_startup, failure_startup) = if degrading {
            let a12 = num_traits::ToPrimitive::to_f64(&cfg.a.rate(0, 1))
                .expect("rate fits in f64");
            let cap = ONSET_HORIZON_FRACTION * cfg.horizon as f64;
            let mut onset = f64::INFINITY;
            while onset > cap {
                onset = f64::unit_exp(&mut rng) / a12;
            }
            let onset_startup = onset.floor() as u64 + 1;
            let lag = rng.gen_range(FAILURE_LAG_STARTUPS);
            let failure = (onset_startup + lag).min(cfg.horizon as u64);
            (Some(onset_startup), Some(failure))
        } else {
            (None, None)
        };

        let n_startups = failure_startup.unwrap_or(cfg.horizon as u64);
        let sigma_raw = cfg.noise_scale * T::of(cfg.smoothing_window as f64)
            / T::of(std::f64::consts::SQRT_2);
        let (lo, hi) = cfg.temp_range;
        let mut drift = T::zero();
        let mut cum_hours = T::zero();
        let mut records = Vec::with_capacity(n_startups as usize);
        for j in 1..=n_startups {
            let state = match onset_startup {
                Some(onset) if j >= onset => 1usize,
                _ => 0usize,
            };
            drift = drift + cfg.c.get(state);
            cum_hours = cum_hours + T::of(rng.gen_range(1.0..3.0));
            let temp = lo + (hi - lo) * T::of(rng.gen_range(0.0..1.0));
            let tmf = cfg.temp_intercept
                + cfg.temp_slope * temp
                + drift
                + sigma_raw * T::std_normal(&mut rng);
            records.push(StartupRecord { startup_index: j, cum_hours, initial_temp: temp, tmf });
        }
        appliances.push(ApplianceLogbook::new(
            format!("unit-{:03}", k + 1),
            records,
            degrading,
            failure_startup,
        )?);
    }
    FleetDataset::new(appliances)
}
