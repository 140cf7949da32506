use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::BenchError;
use crate::protocol::LeakageSummary;

pub const REPORT_COLUMNS: [&str; 12] = [
    "experiment",
    "setting",
    "protocol",
    "mode",
    "target",
    "metric",
    "value",
    "user_overlap",
    "max_window_overlap",
    "target_leak",
    "n",
    "seed",
];

const NA: &str = "NA";

/// One metric of one evaluated setting, with the leakage audit of its splits.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub setting: String,
    pub protocol: String,
    pub mode: String,
    pub target: String,
    pub metric: String,
    /// `None` when the metric is undefined.
    pub value: Option<f64>,
    pub user_overlap: usize,
    pub max_window_overlap: f64,
    pub target_leak: bool,
    pub n: usize,
    pub seed: u64,
}

impl ReportRow {
    fn fields(&self) -> [String; 12] {
        [
            self.experiment.clone(),
            self.setting.clone(),
            self.protocol.clone(),
            self.mode.clone(),
            self.target.clone(),
            self.metric.clone(),
            self.value.map_or_else(|| NA.to_string(), |v| v.to_string()),
            self.user_overlap.to_string(),
            self.max_window_overlap.to_string(),
            self.target_leak.to_string(),
            self.n.to_string(),
            self.seed.to_string(),
        ]
    }

    pub fn leakage(&self) -> LeakageSummary {
        LeakageSummary {
            user_overlap: self.user_overlap,
            max_window_overlap: self.max_window_overlap,
            target_leak: self.target_leak,
        }
    }
}

/// Where a report came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub config: String,
    pub seed: u64,
    pub dataset_digest: String,
    /// Exclusions, skipped users and fallbacks met during the run.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

impl ReportTable {
    /// Rows matching every given key; `None` matches anything.
    pub fn find(
        &self,
        setting: Option<&str>,
        protocol: Option<&str>,
        mode: Option<&str>,
        metric: Option<&str>,
    ) -> Vec<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| {
                setting.is_none_or(|s| r.setting == s)
                    && protocol.is_none_or(|s| r.protocol == s)
                    && mode.is_none_or(|s| r.mode == s)
                    && metric.is_none_or(|s| r.metric == s)
            })
            .collect()
    }

    /// Value of the single row matching the keys.
    pub fn value(&self, setting: &str, protocol: &str, mode: &str, metric: &str) -> Option<f64> {
        let rows = self.find(Some(setting), Some(protocol), Some(mode), Some(metric));
        match rows.as_slice() {
            [r] => r.value,
            _ => None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let p = &self.provenance;
        writeln!(out, "# config: {}", p.config).unwrap();
        writeln!(out, "# seed: {}", p.seed).unwrap();
        writeln!(out, "# dataset_digest: {}", p.dataset_digest).unwrap();
        for n in &p.notes {
            writeln!(out, "# note: {n}").unwrap();
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS).unwrap();
        for r in &self.rows {
            w.write_record(r.fields()).unwrap();
        }
        out.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let p = &self.provenance;
        writeln!(out, "- config: `{}`", p.config).unwrap();
        writeln!(out, "- seed: {}", p.seed).unwrap();
        writeln!(out, "- dataset_digest: {}", p.dataset_digest).unwrap();
        for n in &p.notes {
            writeln!(out, "- note: {n}").unwrap();
        }
        out.push('\n');
        writeln!(out, "| {} |", REPORT_COLUMNS.join(" | ")).unwrap();
        writeln!(out, "|{}", "---|".repeat(REPORT_COLUMNS.len())).unwrap();
        for r in &self.rows {
            let cells: Vec<String> = r.fields().iter().map(|f| f.replace('|', "\\|")).collect();
            writeln!(out, "| {} |", cells.join(" | ")).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Markdown,
}

pub fn emit_report(rt: &ReportTable, path: &Path, format: ReportFormat) -> Result<(), BenchError> {
    if rt.rows.is_empty() {
        return Err(BenchError::Harness("report has no rows".into()));
    }
    let text = match format {
        ReportFormat::Csv => rt.to_csv(),
        ReportFormat::Markdown => rt.to_markdown(),
    };
    fs::write(path, text).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> BenchError {
    BenchError::Config(format!("report line {line}: {msg}"))
}

/// Reads a CSV report written by [`emit_report`].
pub fn parse_report(text: &str) -> Result<ReportTable, BenchError> {
    let mut provenance = Provenance::default();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix("# ") {
            let (key, value) = c.split_once(": ").unwrap_or((c, ""));
            match key {
                "config" => provenance.config = value.to_string(),
                "seed" => provenance.seed = value.parse().map_err(|e| parse_err(0, e))?,
                "dataset_digest" => provenance.dataset_digest = value.to_string(),
                "note" => provenance.notes.push(value.to_string()),
                _ => {}
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> =
        rdr.headers().map_err(|e| parse_err(1, e))?.iter().map(str::to_string).collect();
    if header != REPORT_COLUMNS {
        return Err(parse_err(1, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(i + 2, e))?;
        let f = |k: usize| rec.get(k).unwrap_or_default().to_string();
        let num = |k: usize| -> Result<f64, BenchError> { f(k).parse().map_err(|e| parse_err(i + 2, e)) };
        let int = |k: usize| -> Result<u64, BenchError> { f(k).parse().map_err(|e| parse_err(i + 2, e)) };
        rows.push(ReportRow {
            experiment: f(0),
            setting: f(1),
            protocol: f(2),
            mode: f(3),
            target: f(4),
            metric: f(5),
            value: if f(6) == NA { None } else { Some(num(6)?) },
            user_overlap: int(7)? as usize,
            max_window_overlap: num(8)?,
            target_leak: f(9).parse().map_err(|e| parse_err(i + 2, e))?,
            n: int(10)? as usize,
            seed: int(11)?,
        });
    }
    Ok(ReportTable { rows, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ReportTable {
        let row = ReportRow {
            experiment: "P3R".into(),
            setting: "KRR_RBF".into(),
            protocol: "MIXED".into(),
            mode: "+".into(),
            target: "mood".into(),
            metric: "r2_global".into(),
            value: Some(0.1 + 0.2),
            user_overlap: 1200,
            max_window_overlap: 13.0 / 14.0,
            target_leak: false,
            n: 1200,
            seed: 42,
        };
        let na = ReportRow { metric: "r2_per_user".into(), value: None, ..row.clone() };
        let comma = ReportRow { setting: "A (AVG), per user".into(), mode: String::new(), ..row.clone() };
        ReportTable {
            rows: vec![row, na, comma],
            provenance: Provenance {
                config: r#"{"seed":42}"#.into(),
                seed: 42,
                dataset_digest: "ab12".into(),
                notes: vec!["3 instances excluded".into()],
            },
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = table();
        let text = t.to_csv();
        assert!(text.contains(",NA,"));
        assert!(text.lines().any(|l| l == REPORT_COLUMNS.join(",")));
        assert_eq!(parse_report(&text).unwrap(), t);
    }

    #[test]
    fn markdown_has_every_row() {
        let md = table().to_markdown();
        let rows = md.lines().filter(|l| l.starts_with("| P3R")).count();
        assert_eq!(rows, 3);
        assert!(md.contains("| NA |"));
    }

    #[test]
    fn emit_writes_and_rejects_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_report(&table(), &p, ReportFormat::Csv).unwrap();
        let first = fs::read(&p).unwrap();
        emit_report(&table(), &p, ReportFormat::Csv).unwrap();
        assert_eq!(fs::read(&p).unwrap(), first);
        assert!(emit_report(&ReportTable::default(), &p, ReportFormat::Csv).is_err());
        assert!(emit_report(&table(), &dir.path().join("no/such/dir.csv"), ReportFormat::Csv).is_err());
    }

    #[test]
    fn lookup() {
        let t = table();
        assert_eq!(t.value("KRR_RBF", "MIXED", "+", "r2_global"), Some(0.1 + 0.2));
        assert_eq!(t.find(None, Some("MIXED"), None, None).len(), 3);
    }
}
