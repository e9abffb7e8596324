use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Tsv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::InvalidArgument(format!(
                "unknown report format {s:?}"
            ))),
        }
    }
}

/// Plain text table: a header row and body rows of equal width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    /// Columns rendered right-aligned in markdown.
    pub numeric: Vec<bool>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self, format: ReportFormat) -> String {
        let mut out = String::new();
        match format {
            ReportFormat::Tsv => {
                for row in std::iter::once(&self.header).chain(&self.rows) {
                    out.push_str(&row.join("\t"));
                    out.push('\n');
                }
            }
            ReportFormat::Markdown => {
                let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
                out.push_str(&line(&self.header));
                let rule: Vec<String> = self
                    .numeric
                    .iter()
                    .map(|&n| {
                        if n {
                            "---:".to_owned()
                        } else {
                            "---".to_owned()
                        }
                    })
                    .collect();
                out.push_str(&format!("|{}|\n", rule.join("|")));
                for r in &self.rows {
                    out.push_str(&line(r));
                }
            }
        }
        out
    }
}

/// Tables that [`emit_report`] can render.
pub trait Report {
    fn to_table(&self) -> Table;
}

/// Renders `results`; output bytes depend only on the input.
pub fn emit_report(results: &dyn Report, format: ReportFormat) -> Result<String> {
    let table = results.to_table();
    if table.rows.is_empty() {
        return Err(Error::InvalidArgument("nothing to report".into()));
    }
    Ok(table.render(format))
}

/// WER in percent with one decimal.
pub fn format_wer(wer: f64) -> String {
    format!("{:.1}", wer * 100.0)
}

/// Counts as in `800M`, `200k`, `34`.
pub fn format_count(n: u64) -> String {
    if n >= 1_000_000 {
        format!("{}M", (n as f64 / 1e6).round())
    } else if n >= 1_000 {
        format!("{}k", (n as f64 / 1e3).round())
    } else {
        n.to_string()
    }
}

/// One model row of a WER table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WerRow {
    pub model: String,
    pub unit: String,
    pub context: String,
    /// WER fractions per dataset column; `None` renders as `-`.
    pub wers: Vec<Option<f64>>,
}

/// Models as rows, datasets as columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WerTable {
    pub datasets: Vec<String>,
    pub rows: Vec<WerRow>,
}

const WER_FIXED: [&str; 4] = ["#", "Model", "Unit", "Ctx"];

impl Report for WerTable {
    fn to_table(&self) -> Table {
        let header: Vec<String> = WER_FIXED
            .iter()
            .map(|s| s.to_string())
            .chain(self.datasets.iter().cloned())
            .collect();
        let numeric = (0..header.len())
            .map(|i| i == 0 || i >= WER_FIXED.len())
            .collect();
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut cells = vec![
                    (i + 1).to_string(),
                    r.model.clone(),
                    r.unit.clone(),
                    r.context.clone(),
                ];
                cells.extend(r.wers.iter().map(|w| w.map_or("-".to_owned(), format_wer)));
                cells
            })
            .collect();
        Table {
            header,
            numeric,
            rows,
        }
    }
}

impl WerTable {
    /// Reads the TSV form back; WERs come back at the printed precision.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("report tsv: {msg}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("empty".into()))?
            .split('\t')
            .collect();
        if header.len() < WER_FIXED.len() || header[..WER_FIXED.len()] != WER_FIXED {
            return Err(bad("unexpected header".into()));
        }
        let datasets: Vec<String> = header[WER_FIXED.len()..]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != header.len() {
                return Err(bad(format!("row {} has {} cells", i + 1, cells.len())));
            }
            let wers = cells[WER_FIXED.len()..]
                .iter()
                .map(|c| match *c {
                    "-" => Ok(None),
                    c => c
                        .parse::<f64>()
                        .map(|p| Some(p / 100.0))
                        .map_err(|_| bad(format!("bad WER {c:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(WerRow {
                model: cells[1].to_owned(),
                unit: cells[2].to_owned(),
                context: cells[3].to_owned(),
                wers,
            });
        }
        Ok(WerTable { datasets, rows })
    }
}
