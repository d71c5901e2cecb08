//! Unit-level observations.

use std::collections::HashMap;
use std::io::Read;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Outcome, treatment and baseline covariates for `n` units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub outcome: DVector<f64>,
    pub treatment: DVector<f64>,
    pub covariates: DMatrix<f64>,
    pub outcome_name: String,
    pub treatment_name: String,
    pub covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        outcome: DVector<f64>,
        treatment: DVector<f64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = outcome.len();
        if n == 0 {
            return Err(Error::InvalidParameter("dataset has no units".into()));
        }
        if treatment.len() != n || covariates.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "outcome has {n} rows, treatment {}, covariates {}",
                treatment.len(),
                covariates.nrows()
            )));
        }
        if covariate_names.len() != covariates.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate names for {} columns",
                covariate_names.len(),
                covariates.ncols()
            )));
        }
        let all_finite = outcome.iter().chain(treatment.iter()).chain(covariates.iter());
        if all_finite.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dataset contains non-finite values".into()));
        }
        Ok(Self {
            outcome,
            treatment,
            covariates,
            outcome_name: "Y".into(),
            treatment_name: "A".into(),
            covariate_names,
        })
    }

    pub fn with_names(mut self, outcome: &str, treatment: &str) -> Self {
        self.outcome_name = outcome.to_string();
        self.treatment_name = treatment.to_string();
        self
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    /// Reorder units so that unit `i` moves to position `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::InvalidPermutation(format!("length {} for {n} units", perm.len())));
        }
        let mut inv = vec![usize::MAX; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || inv[p] != usize::MAX {
                return Err(Error::InvalidPermutation(format!("index {p} repeated or out of range")));
            }
            inv[p] = i;
        }
        Ok(Self {
            outcome: DVector::from_fn(n, |r, _| self.outcome[inv[r]]),
            treatment: DVector::from_fn(n, |r, _| self.treatment[inv[r]]),
            covariates: DMatrix::from_fn(n, self.covariates.ncols(), |r, c| {
                self.covariates[(inv[r], c)]
            }),
            ..self.clone()
        })
    }
}

/// Numeric columns read from a CSV file with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    columns: HashMap<String, Vec<f64>>,
    rows: usize,
}

impl Table {
    pub fn read<R: Read>(source: R, wanted: &[&str]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers()?.clone();
        let mut index = Vec::with_capacity(wanted.len());
        for &name in wanted {
            let pos = headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            index.push((name, pos));
        }
        let mut columns: HashMap<String, Vec<f64>> =
            wanted.iter().map(|&w| (w.to_string(), Vec::new())).collect();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(rows + 2, |p| p.line() as usize);
            for &(name, pos) in &index {
                let raw = rec.get(pos).unwrap_or_default();
                let v: f64 = raw.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                    Error::Parse {
                        context: "data".into(),
                        line,
                        message: format!("column `{name}`: `{raw}` is not a finite number"),
                    }
                })?;
                columns.get_mut(name).expect("column registered").push(v);
            }
            rows += 1;
        }
        Ok(Self { columns, rows })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        self.columns
            .get(name)
            .map(|v| DVector::from_column_slice(v))
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn dataset(&self, outcome: &str, treatment: &str, covariates: &[String]) -> Result<Dataset> {
        let mut l = DMatrix::zeros(self.rows, covariates.len());
        for (c, name) in covariates.iter().enumerate() {
            l.set_column(c, &self.column(name)?);
        }
        Ok(Dataset::new(self.column(outcome)?, self.column(treatment)?, l, covariates.to_vec())?
            .with_names(outcome, treatment))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_numeric_columns() {
        let t = Table::read("y,a,x,unused\n1,0,2.5,q\n2,1,3.5,r\n".as_bytes(), &["y", "a", "x"])
            .unwrap();
        let d = t.dataset("y", "a", &["x".to_string()]).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.covariates[(1, 0)], 3.5);
        assert_eq!(d.treatment_name, "a");
    }

    #[test]
    fn reports_line_of_bad_value() {
        let err = Table::read("y,a\n1,0\n2,oops\n".as_bytes(), &["y", "a"]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            Table::read("y\n1\n".as_bytes(), &["y", "a"]),
            Err(Error::MissingColumn(c)) if c == "a"
        ));
    }

    #[test]
    fn dimension_checks() {
        let r = Dataset::new(
            DVector::zeros(3),
            DVector::zeros(2),
            DMatrix::zeros(3, 0),
            vec![],
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }
}
