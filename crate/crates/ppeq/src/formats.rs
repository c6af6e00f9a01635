//! Output files: canonical JSON, the per-cluster-count forecast CSV, the
//! stationarity sweep CSV, cluster assignments and embeddings.

use std::io::{Read, Write};

use ppeq_core::model::{ForecastReport, PpeType};
use ppeq_core::nhpp::StationaritySweepRow;
use serde::Serialize;

use crate::error::AppError;

/// Canonical JSON: pretty-printed with a trailing newline. The CLI and the
/// service both emit exactly these bytes.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("value serializes");
    out.push(b'\n');
    out
}

/// `cluster_count,quantile,<ppe types...>`, one row per report row, holding
/// the reuse-adjusted totals.
pub fn write_forecast_csv<W: Write>(w: W, reports: &[ForecastReport]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["cluster_count".to_string(), "quantile".to_string()];
    header.extend(PpeType::ALL.iter().map(|p| p.token().to_string()));
    out.write_record(&header)?;
    for report in reports {
        for row in &report.rows {
            let mut fields = vec![report.metadata.cluster_count.to_string(), row.quantile.token().to_string()];
            fields.extend(PpeType::ALL.iter().map(|&p| row.ppe[p].reuse_adjusted_total.to_string()));
            out.write_record(&fields)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[StationaritySweepRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "interval_count",
        "interval_length_days",
        "fraction_not_rejected",
        "tested_intervals",
        "excluded_intervals",
    ])?;
    for r in rows {
        out.write_record([
            r.interval_count.to_string(),
            r.interval_length_days.to_string(),
            r.fraction_not_rejected.to_string(),
            r.tested_intervals.to_string(),
            r.excluded_intervals.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `admission_id,class_id`.
pub fn write_assignments_csv<W: Write>(w: W, admission_ids: &[String], assignments: &[u32]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["admission_id", "class_id"])?;
    for (id, class) in admission_ids.iter().zip(assignments) {
        out.write_record([id.as_str(), &class.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct EmbeddingPoint {
    pub admission_id: String,
    pub x: f64,
    pub y: f64,
}

/// Reads an externally computed `admission_id,x,y` embedding.
pub fn read_embedding<R: Read>(r: R, name: &str) -> Result<Vec<EmbeddingPoint>, AppError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    rdr.deserialize()
        .map(|row| {
            row.map_err(|e| AppError::Input {
                path: name.to_string(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// `admission_id,x,y,class_id` for points whose admission was clustered.
pub fn write_scatter_csv<W: Write>(
    w: W,
    points: &[EmbeddingPoint],
    admission_ids: &[String],
    assignments: &[u32],
) -> csv::Result<()> {
    let class_of: std::collections::HashMap<&str, u32> = admission_ids
        .iter()
        .map(String::as_str)
        .zip(assignments.iter().copied())
        .collect();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["admission_id", "x", "y", "class_id"])?;
    for p in points {
        if let Some(class) = class_of.get(p.admission_id.as_str()) {
            out.write_record([p.admission_id.clone(), p.x.to_string(), p.y.to_string(), class.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
