//! Headered CSV datasets with numeric feature columns and an optional target.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::FeatureSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub target_name: Option<String>,
    /// Raw target cells, one per row.
    pub targets: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        Dataset {
            columns,
            rows,
            target_name: None,
            targets: None,
        }
    }

    pub fn with_targets(mut self, name: impl Into<String>, targets: Vec<String>) -> Self {
        self.target_name = Some(name.into());
        self.targets = Some(targets);
        self
    }

    pub fn read_csv(path: &Path, target: Option<&str>) -> Result<Self> {
        Dataset::from_reader(std::fs::File::open(path)?, target)
    }

    /// Reads a CSV; `target` names the target column if it is present.
    pub fn from_reader<R: Read>(reader: R, target: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let target_col = target.and_then(|t| header.iter().position(|h| h == t));
        let columns: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != target_col)
            .map(|(_, h)| h.clone())
            .collect();
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(columns.len());
            for (i, cell) in record.iter().enumerate() {
                if Some(i) == target_col {
                    targets.push(cell.to_string());
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| {
                    Error::InvalidData(format!("row {r}, column {:?}: {cell:?} is not a number", header[i]))
                })?;
                if !v.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "row {r}, column {:?}: non-finite value",
                        header[i]
                    )));
                }
                row.push(v);
            }
            rows.push(row);
        }
        let mut ds = Dataset::new(columns, rows);
        if let Some(i) = target_col {
            ds = ds.with_targets(header[i].clone(), targets);
        }
        Ok(ds)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.columns.clone();
        if let Some(t) = &self.target_name {
            header.push(t.clone());
        }
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            if let Some(t) = &self.targets {
                rec.push(t[i].clone());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn raw_targets(&self) -> Result<&[String]> {
        self.targets
            .as_deref()
            .ok_or_else(|| Error::InvalidData("dataset has no target column".into()))
    }

    pub fn numeric_targets(&self) -> Result<Vec<f64>> {
        self.raw_targets()?
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::InvalidData(format!("target {t:?} is not a finite number")))
            })
            .collect()
    }

    /// Distinct target labels, numerically sorted when every label is a number.
    pub fn class_labels(&self) -> Result<Vec<String>> {
        let mut labels: Vec<String> = self.raw_targets()?.to_vec();
        sort_labels(&mut labels);
        labels.dedup();
        Ok(labels)
    }

    pub fn class_targets(&self, classes: &[String]) -> Result<Vec<usize>> {
        self.raw_targets()?
            .iter()
            .map(|t| {
                classes
                    .iter()
                    .position(|c| c == t)
                    .ok_or_else(|| Error::InvalidData(format!("unknown class label {t:?}")))
            })
            .collect()
    }

    /// Feature specs derived from the columns; a column named `group=value`
    /// becomes a one-hot member of `group`.
    pub fn feature_specs(&self) -> Result<Vec<FeatureSpec>> {
        if self.rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(self
            .columns
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let (lo, hi) = self
                    .rows
                    .iter()
                    .map(|r| r[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                match name.split_once('=') {
                    Some((g, v)) if !g.is_empty() && !v.is_empty() => {
                        FeatureSpec::one_hot(i, name.clone(), g, v)
                    }
                    _ => FeatureSpec::numeric(i, name.clone(), lo, hi),
                }
            })
            .collect())
    }

    /// Rows re-ordered into the given feature order, matching columns by name.
    pub fn project(&self, features: &[FeatureSpec]) -> Result<Vec<Vec<f64>>> {
        let idx: Vec<usize> = features
            .iter()
            .map(|f| {
                self.columns
                    .iter()
                    .position(|c| *c == f.name)
                    .ok_or_else(|| Error::SchemaMismatch(format!("missing column {:?}", f.name)))
            })
            .collect::<Result<_>>()?;
        Ok(self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i]).collect())
            .collect())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            target_name: self.target_name.clone(),
            targets: self
                .targets
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i].clone()).collect()),
        }
    }

    /// Seeded shuffle split; the second part holds `round(holdout * len)` rows.
    pub fn split(&self, holdout: f64, seed: u64) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_hold = ((holdout.clamp(0.0, 1.0) * self.len() as f64).round() as usize).min(self.len());
        let (hold, train) = idx.split_at(n_hold);
        let mut train = train.to_vec();
        let mut hold = hold.to_vec();
        train.sort_unstable();
        hold.sort_unstable();
        (self.subset(&train), self.subset(&hold))
    }
}

pub(crate) fn sort_labels(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if numeric.map_or(false, |v| v.iter().all(|x| x.is_finite())) {
        labels.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b))
        });
    } else {
        labels.sort();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "a, color=red ,color=blue,target\n1.5,1,0,10\n-2,0,1,2\n3,1,0,10\n";

    #[test]
    fn reads_and_types_columns() {
        let ds = Dataset::from_reader(CSV.as_bytes(), Some("target")).unwrap();
        assert_eq!(ds.columns, vec!["a", "color=red", "color=blue"]);
        assert_eq!(ds.rows[1], vec![-2.0, 0.0, 1.0]);
        assert_eq!(ds.class_labels().unwrap(), vec!["2", "10"]);
        let specs = ds.feature_specs().unwrap();
        assert!(!specs[0].is_one_hot());
        assert_eq!((specs[0].domain_min, specs[0].domain_max), (-2.0, 3.0));
        assert_eq!(specs[1].group.as_deref(), Some("color"));
        assert_eq!(specs[2].member_value.as_deref(), Some("blue"));
    }

    #[test]
    fn missing_target_is_tolerated() {
        let ds = Dataset::from_reader(CSV.as_bytes(), Some("y")).unwrap();
        assert_eq!(ds.columns.len(), 4);
        assert!(ds.targets.is_none());
    }

    #[test]
    fn rejects_text_cells() {
        let err = Dataset::from_reader("a,b\n1,x\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn projection_and_split() {
        let ds = Dataset::from_reader(CSV.as_bytes(), Some("target")).unwrap();
        let specs = vec![FeatureSpec::numeric(0, "color=blue", 0.0, 1.0), FeatureSpec::numeric(1, "a", 0.0, 1.0)];
        assert_eq!(ds.project(&specs).unwrap()[0], vec![0.0, 1.5]);
        let missing = vec![FeatureSpec::numeric(0, "z", 0.0, 1.0)];
        assert!(matches!(ds.project(&missing), Err(Error::SchemaMismatch(_))));
        let (tr, ho) = ds.split(1.0 / 3.0, 1);
        assert_eq!((tr.len(), ho.len()), (2, 1));
        assert_eq!(ds.split(1.0 / 3.0, 1), (tr, ho));
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::from_reader(CSV.as_bytes(), Some("target")).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::from_reader(buf.as_slice(), Some("target")).unwrap();
        assert_eq!(back, ds);
    }
}
