//! CSV and JSON metric reports. Values are multiplied by 100; undefined
//! values are `undefined` in CSV and `null` in JSON.

use attnshift_core::metrics::MetricsReport;
use serde_json::{json, Map, Value};

pub const UNDEFINED: &str = "undefined";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub report: MetricsReport,
}

pub fn csv_header() -> Vec<&'static str> {
    let mut h = vec!["name"];
    h.extend(MetricsReport::FIELDS);
    h
}

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header()).expect("in-memory write");
    for row in rows {
        let mut rec = vec![row.name.clone()];
        rec.extend(row.report.scaled_values().iter().map(|v| match v {
            Some(x) => x.to_string(),
            None => UNDEFINED.to_string(),
        }));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// One report as a JSON object in field order.
pub fn report_json(report: &MetricsReport) -> Value {
    let mut obj = Map::new();
    for (name, v) in MetricsReport::FIELDS.iter().zip(report.scaled_values()) {
        obj.insert((*name).to_string(), v.map_or(Value::Null, |x| json!(x)));
    }
    Value::Object(obj)
}

pub fn to_json(rows: &[ReportRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|row| {
                let mut obj = Map::new();
                obj.insert("name".into(), Value::String(row.name.clone()));
                if let Value::Object(fields) = report_json(&row.report) {
                    obj.extend(fields);
                }
                Value::Object(obj)
            })
            .collect(),
    )
}
