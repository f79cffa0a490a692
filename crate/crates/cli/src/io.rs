//! File formats.
//!
//! * Counts CSV: a header of item identifiers, then one row of
//!   nonnegative integer counts per user.
//! * Partition file: one `item_id<TAB>cluster_index` line per item, with
//!   1-based cluster indices. Blank lines and `#` comments are skipped.
//! * Labeled pairs CSV: `user,item,label,x1,...,xd`, one row per point;
//!   `item` is the point's 0-based element.
//! * Vector CSV: `index,value`, one row per coordinate.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use eldp::mechanisms::CountVector;
use eldp::optim::{LabeledPoint, LearningUser};
use eldp::partition::ElementPartition;

use crate::error::{config, CliError, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

/// Item identifiers and per-user count vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    pub items: Vec<String>,
    pub users: Vec<CountVector>,
}

pub fn read_counts(path: &Path) -> Result<CountsTable> {
    parse_counts(open(path)?, &path.display().to_string())
}

pub fn parse_counts<R: Read>(input: R, name: &str) -> Result<CountsTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let items: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if items.is_empty() {
        return config(format!("{name}: empty header"));
    }
    let mut seen = HashMap::new();
    for (j, it) in items.iter().enumerate() {
        if let Some(prev) = seen.insert(it.as_str(), j) {
            return config(format!("{name}: item '{it}' appears in columns {} and {}", prev + 1, j + 1));
        }
    }
    let mut users = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != items.len() {
            return config(format!("{name}:{line}: {} fields, header has {}", rec.len(), items.len()));
        }
        let counts = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<u64>()
                    .map_err(|_| CliError::Config(format!("{name}:{line}: column '{}': not a count: '{f}'", items[j])))
            })
            .collect::<Result<Vec<u64>>>()?;
        let cv = CountVector::new(counts).map_err(|e| CliError::Config(format!("{name}:{line}: {e}")))?;
        users.push(cv);
    }
    if users.is_empty() {
        return config(format!("{name}: no users"));
    }
    Ok(CountsTable { items, users })
}

pub fn write_counts<W: Write>(out: W, table: &CountsTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.items)?;
    for u in &table.users {
        w.write_record(u.counts().iter().map(|c| c.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))?;
    Ok(())
}

/// Reads a partition file and orders it by `items`. Every item must be
/// listed exactly once; lines for items outside `items` are rejected.
pub fn read_partition(path: &Path, items: &[String]) -> Result<ElementPartition> {
    parse_partition(BufReader::new(open(path)?), items, &path.display().to_string())
}

pub fn parse_partition<R: BufRead>(input: R, items: &[String], name: &str) -> Result<ElementPartition> {
    let index: HashMap<&str, usize> = items.iter().enumerate().map(|(j, s)| (s.as_str(), j)).collect();
    let mut assign: Vec<Option<usize>> = vec![None; items.len()];
    let mut k_max = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(name, e))?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((item, cluster)) = trimmed.split_once('\t') else {
            return config(format!("{name}:{lineno}: expected 'item_id<TAB>cluster_index'"));
        };
        let item = item.trim();
        let k: usize =
            cluster.trim().parse().ok().filter(|&k| k >= 1).ok_or_else(|| {
                CliError::Config(format!("{name}:{lineno}: cluster index must be a positive integer"))
            })?;
        let Some(&j) = index.get(item) else {
            return config(format!("{name}:{lineno}: item '{item}' is not a column of the counts"));
        };
        if assign[j].is_some() {
            return config(format!("{name}:{lineno}: item '{item}' listed twice"));
        }
        assign[j] = Some(k - 1);
        k_max = k_max.max(k);
    }
    let assign = assign
        .into_iter()
        .enumerate()
        .map(|(j, k)| k.ok_or_else(|| CliError::Config(format!("{name}: item '{}' has no cluster", items[j]))))
        .collect::<Result<Vec<usize>>>()?;
    Ok(ElementPartition::new(k_max, assign)?)
}

pub fn write_partition<W: Write>(mut out: W, items: &[String], part: &ElementPartition) -> Result<()> {
    for (item, k) in items.iter().zip(part.assignment()) {
        writeln!(out, "{item}\t{}", k + 1).map_err(|e| CliError::io("<output>", e))?;
    }
    Ok(())
}

pub fn write_pairs<W: Write>(out: W, users: &[LearningUser]) -> Result<()> {
    let dim = users.iter().flat_map(|u| u.points.first()).map(|p| p.features.len()).next().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["user".to_string(), "item".to_string(), "label".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (u, user) in users.iter().enumerate() {
        for pt in &user.points {
            let mut rec = vec![u.to_string(), pt.item.to_string(), pt.label.to_string()];
            rec.extend(pt.features.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| CliError::io("<output>", e))?;
    Ok(())
}

/// Reads labeled pairs, grouping rows by user in order of first appearance.
pub fn read_pairs(path: &Path) -> Result<Vec<LearningUser>> {
    parse_pairs(open(path)?, &path.display().to_string())
}

pub fn parse_pairs<R: Read>(input: R, name: &str) -> Result<Vec<LearningUser>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() < 4 || &header[0] != "user" || &header[1] != "item" || &header[2] != "label" {
        return config(format!("{name}: header must be user,item,label,x1,..."));
    }
    let dim = header.len() - 3;
    let mut order: Vec<String> = Vec::new();
    let mut points: HashMap<String, Vec<LabeledPoint>> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Config(format!("{name}:{line}: column '{}' is not a number", &header[i])))
        };
        let item: usize =
            rec[1].parse().map_err(|_| CliError::Config(format!("{name}:{line}: item must be a 0-based index")))?;
        let label = num(2)?;
        if label != 1.0 && label != -1.0 {
            return config(format!("{name}:{line}: label must be 1 or -1"));
        }
        let features = (3..3 + dim).map(num).collect::<Result<Vec<f64>>>()?;
        let user = rec[0].to_string();
        if !points.contains_key(&user) {
            order.push(user.clone());
        }
        points.entry(user).or_default().push(LabeledPoint { item, features, label });
    }
    if order.is_empty() {
        return config(format!("{name}: no data"));
    }
    Ok(order.into_iter().map(|u| LearningUser::new(points.remove(&u).unwrap_or_default())).collect())
}

pub fn write_vector<W: Write>(out: W, v: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "value"])?;
    for (i, x) in v.iter().enumerate() {
        w.write_record([i.to_string(), x.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let mut v = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let x = rec
            .get(1)
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| CliError::Config(format!("{name}:{}: expected index,value", row + 2)))?;
        v.push(x);
    }
    Ok(v)
}

/// Opens `path` for writing, or stdout when `None`.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(std::io::BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?))),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}
