use serde_json::{Map, Value};

/// Aggregate metrics of one forecaster over a case set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub forecaster: String,
    pub crps: f64,
    pub mae: f64,
    pub coverage80: f64,
    pub width80: f64,
    /// One entry per weight in [`ScoreTable::weight_labels`].
    pub twcrps: Vec<f64>,
    pub n_cases: usize,
}

/// Table of forecaster rows with a fixed column order:
/// forecaster, crps, mae, coverage80, width80, twcrps columns, n_cases.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub weight_labels: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

fn json_num(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

impl ScoreTable {
    pub fn new(weight_labels: Vec<String>) -> Self {
        Self {
            weight_labels,
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["forecaster", "crps", "mae", "coverage80", "width80"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cols.extend(self.weight_labels.iter().cloned());
        cols.push("n_cases".to_string());
        cols
    }

    pub fn row(&self, forecaster: &str) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.forecaster == forecaster)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns().join(",");
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![
                r.forecaster.clone(),
                fmt_num(r.crps),
                fmt_num(r.mae),
                fmt_num(r.coverage80),
                fmt_num(r.width80),
            ];
            fields.extend(r.twcrps.iter().map(|&v| fmt_num(v)));
            fields.push(r.n_cases.to_string());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// JSON array of row objects, keys in column order.
    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                m.insert("forecaster".into(), Value::String(r.forecaster.clone()));
                m.insert("crps".into(), json_num(r.crps));
                m.insert("mae".into(), json_num(r.mae));
                m.insert("coverage80".into(), json_num(r.coverage80));
                m.insert("width80".into(), json_num(r.width80));
                for (label, &v) in self.weight_labels.iter().zip(&r.twcrps) {
                    m.insert(label.clone(), json_num(v));
                }
                m.insert("n_cases".into(), Value::from(r.n_cases));
                Value::Object(m)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("serializable");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ScoreTable {
        let mut t = ScoreTable::new(vec!["twcrps_r10".into(), "twcrps_r12".into(), "twcrps_r15".into()]);
        t.rows.push(ScoreRow {
            forecaster: "tn".into(),
            crps: 1.05,
            mae: 1.39,
            coverage80: 80.4,
            width80: 4.0,
            twcrps: vec![0.1, 0.05, 0.01],
            n_cases: 12,
        });
        t
    }

    #[test]
    fn csv_column_order() {
        let csv = table().to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "forecaster,crps,mae,coverage80,width80,twcrps_r10,twcrps_r12,twcrps_r15,n_cases"
        );
        assert_eq!(lines.next().unwrap(), "tn,1.05,1.39,80.4,4,0.1,0.05,0.01,12");
    }

    #[test]
    fn json_keys_keep_column_order() {
        let t = table();
        let v: Value = serde_json::from_str(&t.to_json()).unwrap();
        let keys: Vec<String> = v[0].as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, t.columns());
    }
}
