use std::fmt::Write as _;

use super::{EvalReport, Metric};
use crate::embeddings::Method;
use crate::error::{Error, Result};

/// Tasks as rows, methods as columns in [`Method::ALL`] order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportTable {
    pub rows: Vec<(String, Metric, [Option<f64>; 5])>,
}

impl ReportTable {
    /// Rows in first-appearance order; a later report for the same task and
    /// method replaces an earlier one.
    pub fn from_reports(reports: &[EvalReport]) -> Self {
        let mut rows: Vec<(String, Metric, [Option<f64>; 5])> = Vec::new();
        for r in reports {
            let col = Method::ALL.iter().position(|&m| m == r.method).unwrap();
            let i = match rows.iter().position(|(t, m, _)| *t == r.task && *m == r.metric) {
                Some(i) => i,
                None => {
                    rows.push((r.task.clone(), r.metric, [None; 5]));
                    rows.len() - 1
                }
            };
            rows[i].2[col] = Some(r.value);
        }
        ReportTable { rows }
    }
}

/// Aligned text table (values to four decimals, `-` when absent).
pub fn format_report(reports: &[EvalReport]) -> String {
    let table = ReportTable::from_reports(reports);
    let task_w = table.rows.iter().map(|r| r.0.len()).chain([4]).max().unwrap();
    let mut out = format!("{:<task_w$}  {:<8}", "task", "metric");
    for m in Method::ALL {
        write!(out, "  {:>8}", m.label()).unwrap();
    }
    out.push('\n');
    for (task, metric, vals) in &table.rows {
        write!(out, "{task:<task_w$}  {:<8}", metric.label()).unwrap();
        for v in vals {
            match v {
                Some(x) => write!(out, "  {x:>8.4}").unwrap(),
                None => write!(out, "  {:>8}", "-").unwrap(),
            }
        }
        out.push('\n');
    }
    out
}

/// CSV twin of [`format_report`] with values in shortest round-trip form.
pub fn report_csv(reports: &[EvalReport]) -> String {
    let table = ReportTable::from_reports(reports);
    let mut out = String::from("task,metric");
    for m in Method::ALL {
        write!(out, ",{}", m.label()).unwrap();
    }
    out.push('\n');
    for (task, metric, vals) in &table.rows {
        write!(out, "{task},{}", metric.label()).unwrap();
        for v in vals {
            out.push(',');
            if let Some(x) = v {
                write!(out, "{x}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_report_csv(text: &str) -> Result<ReportTable> {
    let mut lines = text.lines().enumerate();
    let expected = report_csv(&[]);
    match lines.next() {
        Some((_, h)) if h == expected.trim_end() => {}
        _ => return Err(Error::format_at(1, "unexpected report header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::format_at(i + 1, "expected 7 fields"));
        }
        let mut vals = [None; 5];
        for (slot, cell) in vals.iter_mut().zip(&f[2..]) {
            if !cell.is_empty() {
                *slot = Some(cell.parse().map_err(|_| Error::format_at(i + 1, format!("bad value {cell:?}")))?);
            }
        }
        rows.push((f[0].to_string(), f[1].parse().map_err(|e: Error| Error::format_at(i + 1, e.to_string()))?, vals));
    }
    Ok(ReportTable { rows })
}
