//! The three ingestion CSVs, the rejects report, and the generator's CSV
//! output.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ppeq_core::ingest::{check_record, normalize_icu, RecordViolation};
use ppeq_core::model::{IcuInterval, InteractionEvent, InteractionType, PatientRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{format_timestamp, parse_timestamp};

pub const ADMISSIONS_HEADER: [&str; 4] = ["admission_id", "patient_id", "admit_ts", "discharge_ts"];
pub const INTERACTIONS_HEADER: [&str; 3] = ["admission_id", "interaction_type", "ts"];
pub const ICU_HEADER: [&str; 3] = ["admission_id", "start_ts", "end_ts"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One rejected row or record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub file: String,
    pub line: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admission_id: Option<String>,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<RecordViolation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedDataset {
    pub records: Vec<PatientRecord>,
    pub rejects: Vec<Reject>,
}

#[derive(Deserialize)]
struct AdmissionRow {
    admission_id: String,
    patient_id: String,
    admit_ts: String,
    discharge_ts: String,
}

#[derive(Deserialize)]
struct InteractionRow {
    admission_id: String,
    interaction_type: String,
    ts: String,
}

#[derive(Deserialize)]
struct IcuRow {
    admission_id: String,
    start_ts: String,
    end_ts: String,
}

fn rows<T: for<'de> Deserialize<'de>, R: Read>(
    reader: R,
    file: &str,
    header: &[&str],
) -> Result<Vec<(u64, T)>, DatasetError> {
    let malformed = |line: u64, message: String| DatasetError::Malformed {
        file: file.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    for column in header {
        if !headers.iter().any(|h| h == *column) {
            return Err(malformed(1, format!("missing column `{column}` (expected {})", header.join(","))));
        }
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| malformed(line, e.to_string()))?;
        out.push((line, row));
    }
    Ok(out)
}

fn ts(file: &str, line: u64, value: &str) -> Result<ppeq_core::Timestamp, DatasetError> {
    parse_timestamp(value).map_err(|message| DatasetError::Malformed {
        file: file.to_string(),
        line,
        message,
    })
}

/// Joins the three files into records. Malformed content is an error; orphan
/// rows, duplicate admissions and records breaking an invariant go to the
/// rejects list. Records keep admission-file order; events and ICU intervals
/// are sorted.
pub fn parse_dataset<A: Read, I: Read, U: Read>(admissions: A, interactions: I, icu: U) -> Result<ParsedDataset, DatasetError> {
    let mut out = ParsedDataset::default();
    let mut records: Vec<(u64, PatientRecord)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();

    for (line, row) in rows::<AdmissionRow, _>(admissions, "admissions", &ADMISSIONS_HEADER)? {
        let admit = ts("admissions", line, &row.admit_ts)?;
        let discharge = ts("admissions", line, &row.discharge_ts)?;
        if index.contains_key(&row.admission_id) {
            out.rejects.push(Reject {
                file: "admissions".into(),
                line,
                admission_id: Some(row.admission_id.clone()),
                code: "duplicate_admission_id".into(),
                message: format!("admission `{}` appears more than once", row.admission_id),
                violations: vec![],
            });
            continue;
        }
        index.insert(row.admission_id.clone(), records.len());
        records.push((
            line,
            PatientRecord {
                admission_id: row.admission_id,
                patient_id: row.patient_id,
                admit,
                discharge,
                icu_intervals: vec![],
                events: vec![],
            },
        ));
    }

    for (line, row) in rows::<InteractionRow, _>(interactions, "interactions", &INTERACTIONS_HEADER)? {
        let kind: InteractionType = row.interaction_type.parse().map_err(|e| DatasetError::Malformed {
            file: "interactions".into(),
            line,
            message: format!("{e}"),
        })?;
        let at = ts("interactions", line, &row.ts)?;
        match index.get(&row.admission_id) {
            Some(&i) => records[i].1.events.push(InteractionEvent { kind, at }),
            None => out.rejects.push(orphan("interactions", line, row.admission_id)),
        }
    }

    for (line, row) in rows::<IcuRow, _>(icu, "icu_stays", &ICU_HEADER)? {
        let start = ts("icu_stays", line, &row.start_ts)?;
        let end = ts("icu_stays", line, &row.end_ts)?;
        match index.get(&row.admission_id) {
            Some(&i) => records[i].1.icu_intervals.push(IcuInterval { start, end }),
            None => out.rejects.push(orphan("icu_stays", line, row.admission_id)),
        }
    }

    for (line, mut record) in records {
        record.events.sort();
        record.icu_intervals.sort();
        let violations = check_record(&record);
        if violations.is_empty() {
            // overlapping ICU logs are merged once here
            record.icu_intervals = normalize_icu(&record.icu_intervals);
            out.records.push(record);
        } else {
            out.rejects.push(Reject {
                file: "admissions".into(),
                line,
                admission_id: Some(record.admission_id.clone()),
                code: violations[0].code().into(),
                message: format!(
                    "record breaks {}",
                    violations.iter().map(|v| v.code()).collect::<Vec<_>>().join(", ")
                ),
                violations,
            });
        }
    }
    Ok(out)
}

fn orphan(file: &str, line: u64, admission_id: String) -> Reject {
    Reject {
        file: file.into(),
        line,
        message: format!("no admission `{admission_id}`"),
        admission_id: Some(admission_id),
        code: "orphan_row".into(),
        violations: vec![],
    }
}

fn open(path: &Path) -> Result<File, DatasetError> {
    File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_dataset_files(admissions: &Path, interactions: &Path, icu: &Path) -> Result<ParsedDataset, DatasetError> {
    parse_dataset(open(admissions)?, open(interactions)?, open(icu)?)
}

/// JSON lines, one reject per line.
pub fn write_rejects<W: Write>(mut w: W, rejects: &[Reject]) -> std::io::Result<()> {
    for r in rejects {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_admissions_csv<W: Write>(w: W, records: &[PatientRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ADMISSIONS_HEADER)?;
    for r in records {
        out.write_record([
            r.admission_id.as_str(),
            r.patient_id.as_str(),
            &format_timestamp(r.admit),
            &format_timestamp(r.discharge),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_interactions_csv<W: Write>(w: W, records: &[PatientRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(INTERACTIONS_HEADER)?;
    for r in records {
        for e in &r.events {
            out.write_record([r.admission_id.as_str(), e.kind.token(), &format_timestamp(e.at)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_icu_csv<W: Write>(w: W, records: &[PatientRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ICU_HEADER)?;
    for r in records {
        for iv in &r.icu_intervals {
            out.write_record([r.admission_id.as_str(), &format_timestamp(iv.start), &format_timestamp(iv.end)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `admission_id,true_class`.
pub fn write_labels_csv<W: Write>(w: W, labels: &[(String, u32)]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["admission_id", "true_class"])?;
    for (id, class) in labels {
        out.write_record([id.as_str(), &class.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
