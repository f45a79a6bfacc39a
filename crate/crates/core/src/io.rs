//! On-disk formats.
//!
//! * Matrices: CSV, N rows of N plain decimals, row-major, no header.
//! * Signals: CSV, one realisation per row, no header.
//! * Graphs: JSON `{"n": N, "edges": [[i, j, w], ...], "q": [...]}` with
//!   0-based vertex ids and `q` optional.
//! * Sampling sets: JSON `{"method": ..., "indices": [...], "scores": [...]}`.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back is bit-identical to the value written.
//!
//! Every `parse_*` function accepts arbitrary text and reports malformed
//! input as [`Error::Parse`] (or a validation error); none of them panic.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphModel, SamplingSet};
use crate::matrix::DenseSymMatrix;
use crate::synth::NodeLayout;

/// Largest graph accepted from a file (dense storage is `N²` doubles).
pub const MAX_VERTICES: usize = 4096;

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(parse_err)?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {line}, column {col}: {field:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse(format!("row {line}, column {col}: not finite")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_csv_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str) -> Result<DenseSymMatrix> {
    let rows = parse_csv_rows(text)?;
    if rows.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if rows.len() > MAX_VERTICES {
        return Err(Error::Parse(format!("matrix order {} too large", rows.len())));
    }
    DenseSymMatrix::from_rows(&rows)
}

pub fn write_matrix_csv(m: &DenseSymMatrix) -> String {
    let rows: Vec<Vec<f64>> = m.clone().into();
    write_csv_rows(rows.iter().map(Vec::as_slice))
}

/// One signal per row; all rows must have the same nonzero length.
pub fn parse_signals_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let rows = parse_csv_rows(text)?;
    let width = rows.first().ok_or(Error::EmptyBatch)?.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Parse(format!(
                "row {i} has {} values, expected {width}",
                r.len()
            )));
        }
    }
    Ok(rows)
}

pub fn write_signals_csv(signals: &[Vec<f64>]) -> String {
    write_csv_rows(signals.iter().map(Vec::as_slice))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
}

impl GraphFile {
    pub fn from_model(model: &GraphModel) -> Self {
        GraphFile {
            n: model.n(),
            edges: model.edges(),
            q: model.vertex_importance().map(<[f64]>::to_vec),
        }
    }

    pub fn into_model(self) -> Result<GraphModel> {
        if self.n == 0 || self.n > MAX_VERTICES {
            return Err(Error::Parse(format!("vertex count {} out of range", self.n)));
        }
        GraphModel::from_edges(self.n, &self.edges, self.q)
    }
}

pub fn parse_graph_json(text: &str) -> Result<GraphModel> {
    let file: GraphFile = serde_json::from_str(text).map_err(parse_err)?;
    file.into_model()
}

pub fn write_graph_json(model: &GraphModel) -> String {
    serde_json::to_string_pretty(&GraphFile::from_model(model)).expect("graph serialises")
}

/// Parses a sampling set; when `n` is given the indices are validated against it.
pub fn parse_sampling_set_json(text: &str, n: Option<usize>) -> Result<SamplingSet> {
    let set: SamplingSet = serde_json::from_str(text).map_err(parse_err)?;
    let bound = n.unwrap_or_else(|| {
        set.indices
            .iter()
            .max()
            .map_or(0, |m| m.saturating_add(1))
    });
    set.validate(bound)?;
    Ok(set)
}

pub fn write_sampling_set_json(set: &SamplingSet) -> String {
    serde_json::to_string_pretty(set).expect("sampling set serialises")
}

pub fn parse_layout_json(text: &str) -> Result<NodeLayout> {
    let layout: NodeLayout = serde_json::from_str(text).map_err(parse_err)?;
    if layout
        .points
        .iter()
        .flatten()
        .any(|c| !(0.0..=1.0).contains(c))
    {
        return Err(Error::Parse("layout coordinate outside [0, 1]".into()));
    }
    Ok(layout)
}

pub fn write_layout_json(layout: &NodeLayout) -> String {
    serde_json::to_string_pretty(layout).expect("layout serialises")
}

/// Writes `contents` to a temporary file next to `path`, then renames it over `path`.
pub fn atomic_write(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matrix_csv_basic() {
        let m = parse_matrix_csv("1, 2\n2, 5\n").unwrap();
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(parse_matrix_csv(&write_matrix_csv(&m)).unwrap(), m);
        assert!(matches!(parse_matrix_csv("1,2\n3,4\n"), Err(Error::NotSymmetric { .. })));
        assert!(matches!(parse_matrix_csv("1,2\n"), Err(Error::NotSquare { .. })));
        assert!(matches!(parse_matrix_csv("1,x\nx,1"), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix_csv("NaN"), Err(Error::Parse(_))));
        assert_eq!(parse_matrix_csv(""), Err(Error::EmptyMatrix));
    }

    #[test]
    fn signals_csv_ragged_rows() {
        assert!(matches!(parse_signals_csv("1,2\n3\n"), Err(Error::Parse(_))));
        assert_eq!(parse_signals_csv(""), Err(Error::EmptyBatch));
    }

    #[test]
    fn graph_json() {
        let g = parse_graph_json(r#"{"n": 3, "edges": [[0, 1, 0.5], [1, 2, 2]], "q": [1, 2, 3]}"#)
            .unwrap();
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.vertex_importance(), Some(&[1.0, 2.0, 3.0][..]));
        assert_eq!(parse_graph_json(&write_graph_json(&g)).unwrap(), g);

        assert!(matches!(
            parse_graph_json(r#"{"n": 2, "edges": [[0, 2, 1.0]]}"#),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            parse_graph_json(r#"{"n": 2, "edges": [[0, 1, -1.0]]}"#),
            Err(Error::NegativeWeight { .. })
        ));
        assert!(matches!(
            parse_graph_json(r#"{"n": 2, "edges": [], "extra": 1}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            parse_graph_json(r#"{"n": 100000000000, "edges": []}"#),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn sampling_set_json() {
        let s = parse_sampling_set_json(r#"{"method":"vis","indices":[2,0],"scores":[1.5,1.0]}"#, Some(3))
            .unwrap();
        assert_eq!(s.indices, vec![2, 0]);
        assert_eq!(parse_sampling_set_json(&write_sampling_set_json(&s), Some(3)).unwrap(), s);
        assert!(matches!(
            parse_sampling_set_json(r#"{"method":"x","indices":[3]}"#, Some(3)),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            parse_sampling_set_json(r#"{"method":"x","indices":[1,1]}"#, None),
            Err(Error::DuplicateIndex(1))
        ));
        assert!(matches!(
            parse_sampling_set_json(r#"{"method":"x","indices":[0],"scores":[]}"#, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn signals_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..10)) {
            let text = write_signals_csv(&rows);
            prop_assert_eq!(parse_signals_csv(&text).unwrap(), rows);
        }

        #[test]
        fn graph_json_round_trip_is_bit_exact(
            w in prop::collection::vec(1e-9f64..1e3, 3),
            q in prop::collection::vec(1e-9f64..1e3, 4),
        ) {
            let edges = [(0, 1, w[0]), (1, 2, w[1]), (2, 3, w[2])];
            let g = GraphModel::from_edges(4, &edges, Some(q.clone())).unwrap();
            let back = parse_graph_json(&write_graph_json(&g)).unwrap();
            prop_assert_eq!(back.vertex_importance().unwrap(), &q[..]);
            prop_assert_eq!(back.edges(), g.edges());
        }

        #[test]
        fn parsers_never_panic(text in ".{0,200}") {
            let _ = parse_matrix_csv(&text);
            let _ = parse_signals_csv(&text);
            let _ = parse_graph_json(&text);
            let _ = parse_sampling_set_json(&text, None);
            let _ = parse_layout_json(&text);
        }
    }
}
