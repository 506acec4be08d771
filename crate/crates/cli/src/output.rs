//! Canonical JSON (sorted keys, 17 significant digits) and CSV rendering.

use serde_json::Value;

use crate::error::CliError;

/// A command's result: the JSON document and a CSV projection of it.
pub struct Report {
    pub json: Value,
    pub csv_header: Vec<&'static str>,
    pub csv_rows: Vec<Vec<String>>,
}

pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings always serialize")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("strings always serialize"));
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
        }
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_csv(report: &Report) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::io(format!("csv: {e}"));
    w.write_record(&report.csv_header).map_err(err)?;
    for row in &report.csv_rows {
        w.write_record(row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::io(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_floats_fixed_width() {
        let v = json!({"b": 1.0, "a": [0.25, 3, null], "c": {"z": true, "y": "q"}});
        assert_eq!(
            canonical_json(&v),
            "{\"a\":[2.5000000000000000e-1,3,null],\"b\":1.0000000000000000e0,\"c\":{\"y\":\"q\",\"z\":true}}\n"
        );
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0 - 3f64.sqrt(), 1e-300, 123456.789] {
            let back: f64 = format_float(x).parse().unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn csv_projection() {
        let r = Report { json: Value::Null, csv_header: vec!["a", "b"], csv_rows: vec![vec!["1".into(), "x".into()]] };
        assert_eq!(render_csv(&r).unwrap(), "a,b\n1,x\n");
    }
}
