use std::collections::BTreeMap;

use serde::Serialize;

/// Bumped whenever a CSV column layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub experiment: String,
    pub name: String,
    /// `<experiment>/<SCHEMA_VERSION>`.
    pub schema: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub fields: Vec<String>,
    pub verdict: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: ReportHeader,
    /// Column names before the trailing `verdict` column.
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Serialize)]
struct Summary<'a> {
    #[serde(flatten)]
    header: &'a ReportHeader,
    columns: Vec<&'a str>,
    rows: usize,
    passed_rows: usize,
    failed_rows: usize,
    verdicts: BTreeMap<&'a str, usize>,
    passed: bool,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Index of a column, the verdict column included.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .or((name == "verdict").then_some(self.columns.len()))
    }

    /// Field `name` of row `k`.
    pub fn field(&self, k: usize, name: &str) -> Option<&str> {
        let row = self.rows.get(k)?;
        let j = self.column(name)?;
        Some(if j == self.columns.len() {
            row.verdict.as_str()
        } else {
            row.fields[j].as_str()
        })
    }

    /// `#`-prefixed header lines, then a CSV table with a trailing `verdict` column.
    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let mut out = format!(
            "# tool={} version={}\n# config_sha256={}\n# seed={}\n# experiment={} name={}\n# schema={}\n",
            h.tool, h.version, h.config_hash, h.seed, h.experiment, h.name, h.schema
        );
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut head: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        head.push("verdict");
        w.write_record(&head).expect("writing to memory");
        for r in &self.rows {
            w.write_record(
                r.fields
                    .iter()
                    .map(String::as_str)
                    .chain([r.verdict.as_str()]),
            )
            .expect("writing to memory");
        }
        let bytes = w.into_inner().expect("writing to memory");
        out.push_str(&String::from_utf8(bytes).expect("fields are UTF-8"));
        out
    }

    pub fn summary_json(&self) -> String {
        let mut verdicts = BTreeMap::new();
        for r in &self.rows {
            *verdicts.entry(r.verdict.as_str()).or_insert(0) += 1;
        }
        let passed_rows = self.rows.iter().filter(|r| r.pass).count();
        let summary = Summary {
            header: &self.header,
            columns: self.columns.iter().map(String::as_str).collect(),
            rows: self.rows.len(),
            passed_rows,
            failed_rows: self.rows.len() - passed_rows,
            verdicts,
            passed: self.passed(),
        };
        let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> Report {
        Report {
            header: ReportHeader {
                tool: "simlab".into(),
                version: "0".into(),
                config_hash: "ab".into(),
                seed: 3,
                experiment: "analyze".into(),
                name: "x".into(),
                schema: "analyze/1".into(),
            },
            columns: vec!["input".into(), "c".into()],
            rows: vec![
                Row {
                    fields: vec!["a,b".into(), "1".into()],
                    verdict: "Similar".into(),
                    pass: true,
                },
                Row {
                    fields: vec!["c".into(), "inf".into()],
                    verdict: "SpectralObstruction".into(),
                    pass: false,
                },
            ],
        }
    }

    #[test]
    fn csv_layout() {
        let r = report();
        let csv = r.to_csv();
        assert!(csv.starts_with("# tool=simlab version=0\n# config_sha256=ab\n# seed=3\n"));
        assert!(csv.ends_with("input,c,verdict\n\"a,b\",1,Similar\nc,inf,SpectralObstruction\n"));
        assert_eq!(r.field(1, "verdict"), Some("SpectralObstruction"));
        assert_eq!(r.field(0, "c"), Some("1"));
        assert!(!r.passed());
    }

    #[test]
    fn json_counts() {
        let v: serde_json::Value = serde_json::from_str(&report().summary_json()).unwrap();
        assert_eq!(v["rows"], 2);
        assert_eq!(v["failed_rows"], 1);
        assert_eq!(v["passed"], false);
        assert_eq!(v["config_hash"], "ab");
        assert_eq!(v["verdicts"]["Similar"], 1);
    }
}
