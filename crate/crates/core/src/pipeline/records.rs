//! Line-delimited JSON record files.
//!
//! One object per line:
//!
//! ```text
//! {"id": str, "raw_text"?: str, "pred"?: [[x,y],...], "gt": [[x,y],...],
//!  "ego_history"?: [[t,v,a],...], "nav"?: str}
//! ```

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::types::{EgoHistory, EvalRecord, KinematicSample, Trajectory, Waypoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordLine {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred: Option<Vec<[f64; 2]>>,
    pub gt: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ego_history: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nav: Option<String>,
}

fn to_trajectory(pairs: &[[f64; 2]]) -> Trajectory {
    Trajectory::new(pairs.iter().map(|&p| Waypoint::from(p)).collect())
}

impl TryFrom<RecordLine> for EvalRecord {
    type Error = String;

    fn try_from(line: RecordLine) -> Result<Self, Self::Error> {
        let ego_history = line
            .ego_history
            .map(|rows| {
                let samples = rows
                    .iter()
                    .map(|&[t, v, a]| KinematicSample::new(t, v, a))
                    .collect();
                EgoHistory::new(samples).map_err(|e| e.to_string())
            })
            .transpose()?;
        Ok(EvalRecord {
            id: line.id,
            raw_text: line.raw_text,
            pred: line.pred.as_deref().map(to_trajectory),
            gt: to_trajectory(&line.gt),
            ego_history,
            nav_instruction: line.nav,
        })
    }
}

impl From<&EvalRecord> for RecordLine {
    fn from(r: &EvalRecord) -> Self {
        RecordLine {
            id: r.id.clone(),
            raw_text: r.raw_text.clone(),
            pred: r.pred.as_ref().map(Trajectory::to_pairs),
            gt: r.gt.to_pairs(),
            ego_history: r.ego_history.as_ref().map(|h| {
                h.samples()
                    .iter()
                    .map(|s| [s.t, s.velocity, s.acceleration])
                    .collect()
            }),
            nav: r.nav_instruction.clone(),
        }
    }
}

/// A line that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineDiagnostic {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedRecords {
    pub records: Vec<EvalRecord>,
    pub diagnostics: Vec<LineDiagnostic>,
}

/// Reads records from any buffered source. Blank lines are ignored.
pub fn read_records<R: BufRead>(reader: R) -> io::Result<LoadedRecords> {
    let mut out = LoadedRecords::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RecordLine>(&line)
            .map_err(|e| e.to_string())
            .and_then(EvalRecord::try_from);
        match parsed {
            Ok(record) => out.records.push(record),
            Err(message) => out.diagnostics.push(LineDiagnostic {
                line: idx + 1,
                message,
            }),
        }
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<LoadedRecords, PipelineError> {
    let file = fs::File::open(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_records(BufReader::new(file)).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_records<W: Write>(mut writer: W, records: &[EvalRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, &RecordLine::from(r))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
