//! Point datasets with an optional response column.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Name of the response column in CSV input.
pub const RESPONSE_COLUMN: &str = "y";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Option<Vec<f64>>) -> Result<Self> {
        let n = x.first().map_or(0, Vec::len);
        if x.iter().any(|p| p.len() != n) {
            return input("ragged feature rows");
        }
        if let Some(y) = &y {
            if y.len() != x.len() {
                return input(format!("{} responses for {} points", y.len(), x.len()));
            }
        }
        Ok(Self {
            features: (0..n).map(|i| format!("x{i}")).collect(),
            x,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    /// Header row required; every column except `y` is a feature.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let response = headers.iter().position(|h| h == RESPONSE_COLUMN);
        let features: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != response)
            .map(|(_, h)| h.to_string())
            .collect();
        if features.is_empty() {
            return Err(Error::Parse("dataset has no feature columns".into()));
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let mut point = Vec::with_capacity(features.len());
            for (i, field) in record.iter().enumerate() {
                let value: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: '{field}' is not a number", row + 1)))?;
                if !value.is_finite() {
                    return input(format!("row {}: non-finite value", row + 1));
                }
                if Some(i) == response {
                    y.push(value);
                } else {
                    point.push(value);
                }
            }
            x.push(point);
        }
        Ok(Self {
            features,
            x,
            y: response.map(|_| y),
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.features.clone();
        if self.y.is_some() {
            header.push(RESPONSE_COLUMN.to_string());
        }
        w.write_record(&header).map_err(|e| Error::Internal(e.to_string()))?;
        for (k, p) in self.x.iter().enumerate() {
            let mut row: Vec<String> = p.iter().map(f64::to_string).collect();
            if let Some(y) = &self.y {
                row.push(y[k].to_string());
            }
            w.write_record(&row).map_err(|e| Error::Internal(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let text = "a,y,b\n1,5,2\n3,6,4\n";
        let d = Dataset::from_csv(text.as_bytes()).unwrap();
        assert_eq!(d.features, vec!["a", "b"]);
        assert_eq!(d.x, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(d.y, Some(vec![5.0, 6.0]));
        let back = Dataset::from_csv(d.to_csv().unwrap().as_bytes()).unwrap();
        assert_eq!(back.x, d.x);
        assert_eq!(back.y, d.y);
    }

    #[test]
    fn rejects_bad_cells() {
        assert!(matches!(Dataset::from_csv("a\nfoo\n".as_bytes()), Err(Error::Parse(_))));
        assert!(Dataset::from_csv("y\n1\n".as_bytes()).is_err());
        assert!(Dataset::from_csv("a,b\n1\n".as_bytes()).is_err());
    }
}
