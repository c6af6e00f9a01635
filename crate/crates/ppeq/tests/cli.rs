use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ppeq::error::exit;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn ppeq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppeq"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with("{\"error\"")).expect("error JSON on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn forecast_on_shipped_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppeq(dir.path(), &["forecast", "--profiles", fixture("profiles.json").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap().len(), 2 + 7);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let labels: Vec<&str> = rows.iter().map(|r| &r[1]).collect();
    assert_eq!(labels, ["q1", "median", "q3"]);

    // the scenario fixture holds the same profiles with the default usage
    let via_scenario = ppeq(dir.path(), &["forecast", "--scenario", fixture("scenario.json").to_str().unwrap()]);
    assert_eq!(via_scenario.stdout, out.stdout);
}

#[test]
fn los_precondition_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppeq(dir.path(), &["forecast", "--profiles", fixture("profiles.json").to_str().unwrap(), "--T", "3"]);
    assert_eq!(out.status.code(), Some(exit::VALIDATION));
    let err = error_json(&out);
    assert_eq!(err["error"]["code"], "los_precondition");
    assert!(err["error"]["message"].as_str().unwrap().contains("T > sigma"));
    assert_eq!(err["error"]["violations"][0]["code"], "T_not_greater_than_sigma");
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppeq(dir.path(), &["forecast", "--profiles", "missing.json"]);
    assert_eq!(out.status.code(), Some(exit::INPUT));
    assert_eq!(error_json(&out)["error"]["code"], "malformed_input");

    let out = ppeq(dir.path(), &["forecast", "--bogus"]);
    assert_eq!(out.status.code(), Some(exit::USAGE));
    assert_eq!(error_json(&out)["error"]["code"], "invalid_argument");

    let out = ppeq(dir.path(), &["simulate", "--scenario", fixture("scenario.json").to_str().unwrap(), "--reps", "20000"]);
    assert_eq!(out.status.code(), Some(exit::BUDGET));

    std::fs::write(dir.path().join("adm.csv"), "admission_id,patient_id,admit_ts\nA1,P1,2020-01-01T00:00:00Z\n").unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = ppeq(
        dir.path(),
        &["ingest", "--admissions", "adm.csv", "--interactions", "empty.csv", "--icu", "empty.csv", "--out", "r.json"],
    );
    assert_eq!(out.status.code(), Some(exit::INPUT));
    assert!(error_json(&out)["error"]["message"].as_str().unwrap().contains("discharge_ts"));
}

#[test]
fn ingest_reports_rejects() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("adm.csv"),
        "admission_id,patient_id,admit_ts,discharge_ts\n\
         A1,P1,2020-01-01T00:00:00Z,2020-01-04T00:00:00Z\n\
         A2,P2,2020-01-05T00:00:00Z,2020-01-03T00:00:00Z\n\
         A1,P3,2020-01-06T00:00:00Z,2020-01-07T00:00:00Z\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("int.csv"),
        "admission_id,interaction_type,ts\nA1,vital_signs,2020-01-01T08:00:00Z\nZZ,ct,2020-01-02T08:00:00Z\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("icu.csv"), "admission_id,start_ts,end_ts\n").unwrap();
    let out = ppeq(
        dir.path(),
        &["ingest", "--admissions", "adm.csv", "--interactions", "int.csv", "--icu", "icu.csv", "--out", "r.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["records"], 1);
    assert_eq!(summary["rejects"], 3);
    let rejects = std::fs::read_to_string(dir.path().join("r.json.rejects.jsonl")).unwrap();
    let codes: Vec<String> = rejects
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["code"].as_str().unwrap().to_string())
        .collect();
    assert!(codes.contains(&"duplicate_admission_id".to_string()), "{codes:?}");
    assert!(codes.contains(&"orphan_row".to_string()), "{codes:?}");
    assert_eq!(codes.len(), 3);
}

#[test]
fn generated_data_round_trips_and_passes_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(ppeq(d, &["generate", "--seed", "9", "--out", "g"]).status.success());
    let out = ppeq(
        d,
        &["ingest", "--admissions", "g/admissions.csv", "--interactions", "g/interactions.csv", "--icu", "g/icu_stays.csv", "--out", "r.json"],
    );
    assert!(out.status.success());
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["rejects"], 0);
    let labels = std::fs::read_to_string(d.join("g/labels.csv")).unwrap();
    assert_eq!(labels.lines().count() as u64 - 1, summary["records"].as_u64().unwrap());

    // the default preset is a stationary process, so the finest row passes
    let out = ppeq(d, &["nhpp-test", "--records", "r.json", "--intervals", "10,20,30,40,80,800", "--diagnostics", "diag.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let last: f64 = rows[5][2].parse().unwrap();
    assert!(last >= 0.9, "{last}");
    assert!(d.join("diag.json").exists());
}

#[test]
fn cluster_outputs_and_multi_k_forecast() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(ppeq(d, &["generate", "--preset", "three-class", "--seed", "4", "--out", "g"]).status.success());
    assert!(ppeq(
        d,
        &["ingest", "--admissions", "g/admissions.csv", "--interactions", "g/interactions.csv", "--icu", "g/icu_stays.csv", "--out", "r.json"],
    )
    .status
    .success());
    // a fake two-column embedding for the scatter export
    let records: Vec<Value> = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    let mut emb = String::from("admission_id,x,y\n");
    for (i, r) in records.iter().enumerate().take(50) {
        emb.push_str(&format!("{},{},{}\n", r["admission_id"].as_str().unwrap(), i, -(i as f64)));
    }
    std::fs::write(d.join("emb.csv"), emb).unwrap();
    let out = ppeq(
        d,
        &[
            "cluster", "--records", "r.json", "--k-range", "1..8", "--seed", "1", "--all-k", "--out", "c.json",
            "--assignments", "a.csv", "--embedding", "emb.csv", "--scatter", "s.csv",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let c: Value = serde_json::from_slice(&std::fs::read(d.join("c.json")).unwrap()).unwrap();
    assert_eq!(c["curve"].as_array().unwrap().len(), 8);
    assert_eq!(c["profiles_by_k"].as_array().unwrap().len(), 8);
    assert_eq!(std::fs::read_to_string(d.join("a.csv")).unwrap().lines().count(), records.len() + 1);
    assert_eq!(std::fs::read_to_string(d.join("s.csv")).unwrap().lines().count(), 51);

    let out = ppeq(d, &["forecast", "--profiles", "c.json", "--clusters", "5,6,7,8", "--json", "f.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 12);
    // face shields have no per-interaction use: same value for every k
    let shields: Vec<&str> = rows.iter().map(|r| &r[6]).collect();
    assert!(shields.windows(2).all(|w| w[0] == w[1]));
    let reports: Value = serde_json::from_slice(&std::fs::read(d.join("f.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 4);

    let out = ppeq(d, &["forecast", "--profiles", "c.json", "--clusters", "9"]);
    assert_eq!(out.status.code(), Some(exit::USAGE));
}

#[test]
fn simulate_command_writes_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppeq(
        dir.path(),
        &["simulate", "--scenario", fixture("scenario.json").to_str().unwrap(), "--reps", "100", "--seed", "3"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["comparison"]["replications"], 100);
    for p in ["gloves", "face_shields"] {
        assert!(v["comparison"]["ppe"][p]["closed_form"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn config_file_supplies_usage() {
    let dir = tempfile::tempdir().unwrap();
    let mut usage: Value = serde_json::from_str(ppeq::config::DEFAULT_USAGE_JSON).unwrap();
    usage["staff_daily_use"]["gowns"] = Value::from(1.0);
    std::fs::write(dir.path().join("usage.json"), usage.to_string()).unwrap();
    std::fs::write(dir.path().join("ppeq.toml"), "usage_file = \"usage.json\"\n").unwrap();
    let out = ppeq(
        dir.path(),
        &["--config", "ppeq.toml", "forecast", "--profiles", fixture("profiles.json").to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let row = rdr.records().next().unwrap().unwrap();
    // 97 staff over 365 days, one gown each per day
    assert_eq!(&row[3], "35405");
}
