//! Edge-list ingestion.
//!
//! Edge files are CSV with a `src,dst[,weight]` header. A record `i,j,w` sets
//! `G[i][j] += w`: unit `j`'s treatment enters unit `i`'s exposure. Data stored
//! in the opposite orientation is read with `transpose`.

use std::collections::HashMap;
use std::io::Read;

use crate::error::{Error, Result};

use super::AdjacencyMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    #[default]
    None,
    Row,
}

#[derive(Debug, Clone, Default)]
pub struct EdgeListOptions {
    pub directed: bool,
    pub transpose: bool,
    /// Node count when indices are integers; labels fix it otherwise.
    pub n_hint: Option<usize>,
    /// Node labels defining index order.
    pub labels: Option<Vec<String>>,
    pub normalize: Normalize,
}

/// Read a `label` column defining node order.
pub fn load_node_labels<R: Read>(source: R) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::MissingColumn("label".into()))?;
    let mut labels = Vec::new();
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let label = rec.get(col).unwrap_or_default().to_string();
        if seen.insert(label.clone(), line).is_some() {
            return Err(Error::Parse {
                context: "node list".into(),
                line,
                message: format!("duplicate label `{label}`"),
            });
        }
        labels.push(label);
    }
    Ok(labels)
}

pub fn load_edge_list<R: Read>(source: R, opts: &EdgeListOptions) -> Result<AdjacencyMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let src_col = find("src").ok_or_else(|| Error::MissingColumn("src".into()))?;
    let dst_col = find("dst").ok_or_else(|| Error::MissingColumn("dst".into()))?;
    let weight_col = find("weight");

    let label_index: Option<HashMap<&str, usize>> = opts
        .labels
        .as_ref()
        .map(|ls| ls.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect());

    let mut triplets = Vec::new();
    let mut max_index = None::<usize>;
    for (k, rec) in rdr.records().enumerate() {
        let record = k + 1;
        let rec = rec?;
        let line = rec.position().map_or(record + 1, |p| p.line() as usize);
        let resolve = |token: &str| -> Result<usize> {
            match &label_index {
                Some(map) => map.get(token).copied().ok_or_else(|| Error::UnknownNode {
                    record,
                    label: token.to_string(),
                }),
                None => token.parse::<usize>().map_err(|_| Error::UnknownNode {
                    record,
                    label: token.to_string(),
                }),
            }
        };
        let src = resolve(rec.get(src_col).unwrap_or_default())?;
        let dst = resolve(rec.get(dst_col).unwrap_or_default())?;
        let weight = match weight_col.and_then(|c| rec.get(c)).filter(|s| !s.is_empty()) {
            None => 1.0,
            Some(s) => {
                let w: f64 = s.parse().map_err(|_| Error::Parse {
                    context: "edge list".into(),
                    line,
                    message: format!("weight `{s}` is not a number"),
                })?;
                if !w.is_finite() {
                    return Err(Error::NonFiniteWeight { record, value: s.to_string() });
                }
                w
            }
        };
        if src == dst {
            return Err(Error::SelfLoop { record, node: src });
        }
        max_index = max_index.max(Some(src.max(dst)));
        let (i, j) = if opts.transpose { (dst, src) } else { (src, dst) };
        triplets.push((i, j, weight));
    }

    let n = match (&opts.labels, opts.n_hint) {
        (Some(ls), Some(h)) if ls.len() != h => {
            return Err(Error::DimensionMismatch(format!(
                "{} node labels but {h} units expected",
                ls.len()
            )))
        }
        (Some(ls), _) => ls.len(),
        (None, Some(h)) => {
            if let Some(m) = max_index.filter(|&m| m >= h) {
                return Err(Error::IndexOutOfRange { index: m, n: h });
            }
            h
        }
        (None, None) => max_index.map_or(0, |m| m + 1),
    };
    if n == 0 {
        return Err(Error::InvalidParameter(
            "edge list is empty and no node count was given".into(),
        ));
    }

    let mut g = AdjacencyMatrix::from_edges(n, triplets, opts.directed)?;
    if let Some(ls) = &opts.labels {
        g = g.with_labels(ls.clone())?;
    }
    match opts.normalize {
        Normalize::None => Ok(g),
        Normalize::Row => g.row_normalize(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, opts: &EdgeListOptions) -> Result<AdjacencyMatrix> {
        load_edge_list(text.as_bytes(), opts)
    }

    fn directed() -> EdgeListOptions {
        EdgeListOptions { directed: true, ..Default::default() }
    }

    #[test]
    fn single_directed_record() {
        let g = load("src,dst,weight\n0,1,2.0\n", &directed()).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.get(0, 1), 2.0);
        assert_eq!(g.nnz(), 1);
    }

    #[test]
    fn undirected_symmetrizes() {
        let g = load("src,dst,weight\n0,1,1.0\n", &EdgeListOptions::default()).unwrap();
        assert_eq!(g.get(0, 1), 1.0);
        assert_eq!(g.get(1, 0), 1.0);
    }

    #[test]
    fn duplicates_sum() {
        let g = load("src,dst,weight\n0,1,1.0\n0,1,0.5\n", &directed()).unwrap();
        assert_eq!(g.get(0, 1), 1.5);
    }

    #[test]
    fn weight_column_optional() {
        let g = load("src,dst\n2,0\n", &directed()).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.get(2, 0), 1.0);
    }

    #[test]
    fn transpose_flag() {
        let opts = EdgeListOptions { transpose: true, ..directed() };
        let g = load("src,dst,weight\n0,1,2.0\n", &opts).unwrap();
        assert_eq!(g.get(1, 0), 2.0);
        assert_eq!(g.get(0, 1), 0.0);
    }

    #[test]
    fn rejects_bad_records() {
        assert!(matches!(
            load("src,dst\n0,1\n1,1\n", &directed()),
            Err(Error::SelfLoop { record: 2, node: 1 })
        ));
        assert!(matches!(
            load("src,dst,weight\n0,1,inf\n", &directed()),
            Err(Error::NonFiniteWeight { record: 1, .. })
        ));
        assert!(matches!(
            load("src,dst\nA,B\n", &directed()),
            Err(Error::UnknownNode { record: 1, .. })
        ));
        let hinted = EdgeListOptions { n_hint: Some(2), ..directed() };
        assert!(matches!(
            load("src,dst\n0,2\n", &hinted),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
        assert!(matches!(
            load("src,dst,weight\n0,1,abc\n", &directed()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn labels_define_order() {
        let labels = load_node_labels("label\nsf\nla\nsd\n".as_bytes()).unwrap();
        let opts = EdgeListOptions { labels: Some(labels), ..directed() };
        let g = load("src,dst,weight\nla,sd,0.25\n", &opts).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.get(1, 2), 0.25);
        assert_eq!(g.labels().unwrap()[0], "sf");
        assert!(matches!(
            load("src,dst\nla,oakland\n", &opts),
            Err(Error::UnknownNode { .. })
        ));
    }

    #[test]
    fn empty_file_with_hint() {
        let opts = EdgeListOptions { n_hint: Some(3), ..Default::default() };
        let g = load("src,dst,weight\n", &opts).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.degree_summary().total_weight, 0.0);
        assert!(load("src,dst,weight\n", &EdgeListOptions::default()).is_err());
    }

    #[test]
    fn row_normalize_on_load() {
        let opts = EdgeListOptions { normalize: Normalize::Row, ..directed() };
        let g = load("src,dst,weight\n0,1,2\n0,2,6\n", &opts).unwrap();
        assert_eq!(g.get(0, 1), 0.25);
        assert_eq!(g.get(0, 2), 0.75);
    }
}
