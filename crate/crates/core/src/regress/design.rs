use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;

use super::qr::OrderedQr;
use super::DROP_TOL;

/// What a design column represents. Network indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "role", content = "network")]
pub enum ColumnRole {
    Intercept,
    Treatment,
    Covariate,
    ExposureTreatment(usize),
    ExposureCovariate(usize),
    Degree(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub role: ColumnRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DesignSpec {
    /// `[1 A L]`
    Naive,
    /// `[1 A L G₁A G₁L … G_KA G_KL]`
    #[default]
    Full,
    /// `[1 A L F]` with `F` the weighted degrees of the first graph.
    DegreeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignOptions {
    /// Add the degree column `G_k·1` for each network.
    pub neighbor_intercept: bool,
    pub intercept: bool,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { neighbor_intercept: false, intercept: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub columns: Vec<Column>,
    /// Columns removed as all-zero or collinear with earlier columns.
    pub dropped: Vec<Column>,
}

impl DesignMatrix {
    /// Assemble a design from candidate columns, dropping zero and collinear
    /// ones. Columns listed earlier take priority.
    pub fn from_columns(candidates: Vec<(Column, DVector<f64>)>) -> Result<Self> {
        let n = candidates.first().map_or(0, |(_, v)| v.len());
        if candidates.iter().any(|(_, v)| v.len() != n) {
            return Err(Error::DimensionMismatch("design columns differ in length".into()));
        }
        let treatments = candidates.iter().filter(|(c, _)| c.role == ColumnRole::Treatment).count();
        if treatments != 1 {
            return Err(Error::InvalidParameter(format!(
                "design needs exactly one treatment column, found {treatments}"
            )));
        }
        let full = DMatrix::from_fn(n, candidates.len(), |i, j| candidates[j].1[i]);
        let qr = OrderedQr::factor(&full, DROP_TOL);
        let mut dropped = Vec::new();
        for &d in &qr.dropped {
            let col = &candidates[d].0;
            if col.role == ColumnRole::Treatment {
                return Err(Error::TreatmentCollinear(col.name.clone()));
            }
            dropped.push(col.clone());
        }
        // too few rows is a degrees-of-freedom problem for the fit, not collinearity
        let mut keep = qr.kept.clone();
        keep.extend(&qr.exhausted);
        keep.sort_unstable();
        Ok(Self {
            x: full.select_columns(&keep),
            columns: keep.iter().map(|&k| candidates[k].0.clone()).collect(),
            dropped,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn position(&self, role: ColumnRole) -> Option<usize> {
        self.columns.iter().position(|c| c.role == role)
    }
}

fn network_name(k: usize, base: &str) -> String {
    format!("G{}:{}", k + 1, base)
}

pub fn build_design(
    data: &Dataset,
    graphs: &[AdjacencyMatrix],
    spec: DesignSpec,
    options: DesignOptions,
) -> Result<DesignMatrix> {
    let n = data.n();
    if spec != DesignSpec::Naive && graphs.is_empty() {
        return Err(Error::InvalidParameter(format!("{spec:?} design requires at least one graph")));
    }
    if let Some(g) = graphs.iter().find(|g| g.n() != n) {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} nodes but the data has {n} units",
            g.n()
        )));
    }

    let mut cols = base_columns(data, options.intercept);
    match spec {
        DesignSpec::Naive => {}
        DesignSpec::DegreeOnly => {
            let f = DVector::from_vec(graphs[0].degree_summary().degrees);
            cols.push((Column { name: "F".into(), role: ColumnRole::Degree(0) }, f));
        }
        DesignSpec::Full => {
            for (k, g) in graphs.iter().enumerate() {
                if options.neighbor_intercept {
                    let f = DVector::from_vec(g.degree_summary().degrees);
                    cols.push((
                        Column { name: network_name(k, "(Intercept)"), role: ColumnRole::Degree(k) },
                        f,
                    ));
                }
                cols.push((
                    Column {
                        name: network_name(k, &data.treatment_name),
                        role: ColumnRole::ExposureTreatment(k),
                    },
                    g.exposure(&data.treatment)?,
                ));
                let gl = g.exposure_matrix(&data.covariates)?;
                for (c, name) in data.covariate_names.iter().enumerate() {
                    cols.push((
                        Column { name: network_name(k, name), role: ColumnRole::ExposureCovariate(k) },
                        gl.column(c).into_owned(),
                    ));
                }
            }
        }
    }
    DesignMatrix::from_columns(cols)
}

/// `[1 A L F]` for an externally supplied degree vector.
pub fn build_degree_design(
    data: &Dataset,
    degrees: &DVector<f64>,
    intercept: bool,
) -> Result<DesignMatrix> {
    if degrees.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} degrees for {} units",
            degrees.len(),
            data.n()
        )));
    }
    let mut cols = base_columns(data, intercept);
    cols.push((Column { name: "F".into(), role: ColumnRole::Degree(0) }, degrees.clone()));
    DesignMatrix::from_columns(cols)
}

fn base_columns(data: &Dataset, intercept: bool) -> Vec<(Column, DVector<f64>)> {
    let n = data.n();
    let mut cols = Vec::with_capacity(2 + data.covariates.ncols());
    if intercept {
        cols.push((
            Column { name: "(Intercept)".into(), role: ColumnRole::Intercept },
            DVector::from_element(n, 1.0),
        ));
    }
    cols.push((
        Column { name: data.treatment_name.clone(), role: ColumnRole::Treatment },
        data.treatment.clone(),
    ));
    for (c, name) in data.covariate_names.iter().enumerate() {
        cols.push((
            Column { name: name.clone(), role: ColumnRole::Covariate },
            data.covariates.column(c).into_owned(),
        ));
    }
    cols
}
