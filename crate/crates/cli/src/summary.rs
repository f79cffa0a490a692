//! Per-cell means with `±1.64·stderr` intervals.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{config, CliError, Result};

/// Half-width multiplier of the reported intervals.
pub const CI_MULTIPLIER: f64 = 1.64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    pub ci_half_width: f64,
}

/// Mean, standard error (sample standard deviation over `sqrt(n)`, zero
/// for a single value) and `1.64·stderr`.
pub fn summarize_values(values: &[f64]) -> Option<CellSummary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    // shifted by the first value so that a constant column is exact
    let x0 = values[0];
    let mean = x0 + values.iter().map(|x| x - x0).sum::<f64>() / n as f64;
    let stderr = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Some(CellSummary { count: n, mean, stderr, ci_half_width: CI_MULTIPLIER * stderr })
}

/// Groups a result CSV by the `by` columns (in order of first appearance)
/// and summarizes each `value` column, writing
/// `<by...>,value,count,mean,stderr,ci_half_width`.
pub fn summarize_csv<R: Read, W: Write>(input: R, by: &[String], values: &[String], out: W) -> Result<()> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let col = |name: &String| {
        header.iter().position(|h| h == name).ok_or_else(|| CliError::Config(format!("no column named '{name}'")))
    };
    let by_idx = by.iter().map(col).collect::<Result<Vec<_>>>()?;
    let val_idx = values.iter().map(col).collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return config("summarize: name at least one value column");
    }
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut cells: HashMap<Vec<String>, Vec<Vec<f64>>> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let key: Vec<String> = by_idx.iter().map(|&i| rec[i].to_string()).collect();
        let vals = val_idx
            .iter()
            .map(|&i| {
                rec[i].parse::<f64>().map_err(|_| {
                    CliError::Config(format!(
                        "line {}: column '{}' is not a number: '{}'",
                        row + 2,
                        &header[i],
                        &rec[i]
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let entry = cells.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            vec![Vec::new(); val_idx.len()]
        });
        for (acc, v) in entry.iter_mut().zip(vals) {
            acc.push(v);
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut head: Vec<String> = by.to_vec();
    head.extend(["value", "count", "mean", "stderr", "ci_half_width"].map(String::from));
    w.write_record(&head)?;
    for key in &order {
        for (name, vals) in values.iter().zip(&cells[key]) {
            let s = summarize_values(vals).expect("every cell has a row");
            let mut rec = key.clone();
            rec.extend([
                name.clone(),
                s.count.to_string(),
                s.mean.to_string(),
                s.stderr.to_string(),
                s.ci_half_width.to_string(),
            ]);
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| CliError::io("<output>", e))?;
    Ok(())
}
