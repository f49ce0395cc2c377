//! 100 Hz session log: CSV with a schema line ahead of the header row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mode, SessionError};

pub const LOG_SCHEMA_VERSION: u32 = 1;
const SCHEMA_PREFIX: &str = "# mbf-log schema=";

/// One feedback tick. Raw columns hold the sample fed to the pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogRow {
    /// Scheduled tick time, ms since engine start.
    pub t: f64,
    pub mode: Mode,
    pub standby: bool,
    /// Feedback held at neutral because a required sensor is offline.
    pub frozen: bool,
    pub trunk_online: bool,
    pub left_online: bool,
    pub right_online: bool,
    pub trunk_ax: f64,
    pub trunk_ay: f64,
    pub trunk_az: f64,
    pub trunk_gx: f64,
    pub trunk_gy: f64,
    pub trunk_gz: f64,
    pub left_ax: f64,
    pub left_ay: f64,
    pub left_az: f64,
    pub right_ax: f64,
    pub right_ay: f64,
    pub right_az: f64,
    pub tilt_ml: f64,
    pub tilt_ap: f64,
    pub jerk_sq: f64,
    pub flexion: f64,
    /// Mode-specific movement parameter before mapping.
    pub param: f64,
    pub fv: f64,
    pub zone: u8,
    pub target_ml: f64,
    pub target_ap: f64,
    /// "left", "right" or empty.
    pub step: String,
    pub step_interval: Option<f64>,
    /// "sit", "stand", "sit+stand" or empty.
    pub cue: String,
    pub rep_count: u64,
    pub beat_phase: f64,
    /// Samples overwritten in the mailboxes since the previous tick.
    pub superseded: u64,
}

pub struct LogWriter {
    csv: csv::Writer<BufWriter<File>>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self, SessionError> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{SCHEMA_PREFIX}{LOG_SCHEMA_VERSION}")?;
        Ok(Self {
            csv: csv::Writer::from_writer(file),
        })
    }

    pub fn write(&mut self, row: &LogRow) -> Result<(), SessionError> {
        self.csv.serialize(row).map_err(|e| SessionError::Log(e.to_string()))
    }

    pub fn flush(&mut self) -> Result<(), SessionError> {
        self.csv.flush()?;
        Ok(())
    }
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<(), SessionError> {
    let mut w = LogWriter::create(path)?;
    for r in rows {
        w.write(r)?;
    }
    w.flush()
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>, SessionError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let found = first
        .trim()
        .strip_prefix(SCHEMA_PREFIX)
        .and_then(|v| v.parse::<u32>().ok())
        .unwrap_or(0);
    if found != LOG_SCHEMA_VERSION {
        return Err(SessionError::SchemaMismatch {
            found,
            expected: LOG_SCHEMA_VERSION,
        });
    }
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(|e| SessionError::Log(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let rows: Vec<LogRow> = (0..5)
            .map(|i| LogRow {
                t: i as f64 * 10.0,
                mode: Mode::GaitPhase,
                trunk_az: 1.0,
                tilt_ml: -0.1 * i as f64,
                fv: 0.123456789,
                step: if i == 2 { "left".into() } else { String::new() },
                step_interval: (i == 2).then_some(612.0),
                zone: 3,
                ..Default::default()
            })
            .collect();
        write_log(&path, &rows).unwrap();
        assert_eq!(read_log(&path).unwrap(), rows);
    }

    #[test]
    fn foreign_schema_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        std::fs::write(&path, "t,fv\n0,0\n").unwrap();
        assert!(matches!(read_log(&path), Err(SessionError::SchemaMismatch { found: 0, .. })));
    }
}
