//! Loading and aligning region attribute tables, polygon geometry and GAL files.

mod gal;
mod geometry;
mod table;

pub use gal::{format_gal, parse_gal, read_gal, write_gal};
pub use geometry::{area_centroid, load_geometry, parse_geometry, GeometrySet, Polygon, Region, Ring};
pub use table::{load_table, load_table_with_delimiter, read_table, AttributeTable};

use crate::weights::{GraphError, NeighborGraph};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("Io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("Csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("Json: {0}")]
    Json(String),
    #[error("MissingColumn: column `{0}` not found")]
    MissingColumn(String),
    #[error("NonNumericCell: row {row}, column `{column}`: `{value}` is not a finite number")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("DuplicateId: region id `{0}` appears more than once")]
    DuplicateId(String),
    #[error("DuplicateColumn: column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("EmptyId: row {row} has an empty region id")]
    EmptyId { row: usize },
    #[error("InvalidId: region id `{0}` is empty or contains whitespace")]
    InvalidId(String),
    #[error("EmptyTable: no data rows")]
    EmptyTable,
    #[error("ColumnLength: column `{column}` has {found} values, expected {expected}")]
    ColumnLength { column: String, expected: usize, found: usize },
    #[error("OutOfRange: column `{column}`, region `{region}`: {value} is not {expected}")]
    OutOfRange {
        column: String,
        region: String,
        value: f64,
        expected: &'static str,
    },
    #[error("UnsupportedGeometryKind: region `{region}` has geometry type `{kind}`; only Polygon and MultiPolygon are accepted")]
    UnsupportedGeometryKind { region: String, kind: String },
    #[error("MissingIdProperty: feature {feature} lacks property `{property}`")]
    MissingIdProperty { feature: usize, property: String },
    #[error("MalformedRing: region `{region}` has a ring with {vertices} vertices (need >= 4, closed)")]
    MalformedRing { region: String, vertices: usize },
    #[error("BadHeader: {0}")]
    BadHeader(String),
    #[error("UnknownNeighborId: region `{region}` lists unknown neighbor `{neighbor}`")]
    UnknownNeighborId { region: String, neighbor: String },
    #[error("NeighborCountMismatch: region `{region}` declares {declared} neighbors but lists {listed}")]
    NeighborCountMismatch { region: String, declared: usize, listed: usize },
    #[error("Unmatched: ids only in the attribute table: [{}]; ids only in the other input: [{}]", only_in_table.join(", "), only_in_other.join(", "))]
    Unmatched {
        only_in_table: Vec<String>,
        only_in_other: Vec<String>,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl From<serde_json::Error> for IngestError {
    fn from(e: serde_json::Error) -> Self {
        IngestError::Json(e.to_string())
    }
}

/// Checks that `other` holds exactly the table's ids and returns the permutation
/// that maps table order onto `other` (position `i` holds the index in `other` of
/// the table's `i`-th id). Every unmatched id on either side is reported.
pub fn alignment(table_ids: &[String], other_ids: &[String]) -> Result<Vec<usize>, IngestError> {
    let index: std::collections::HashMap<&str, usize> =
        other_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let table_set: std::collections::HashSet<&str> = table_ids.iter().map(String::as_str).collect();
    let only_in_table: Vec<String> = table_ids.iter().filter(|id| !index.contains_key(id.as_str())).cloned().collect();
    let only_in_other: Vec<String> = other_ids.iter().filter(|id| !table_set.contains(id.as_str())).cloned().collect();
    if !only_in_table.is_empty() || !only_in_other.is_empty() {
        return Err(IngestError::Unmatched { only_in_table, only_in_other });
    }
    Ok(table_ids.iter().map(|id| index[id.as_str()]).collect())
}

/// Reorders geometry to the table's row order.
pub fn align_geometry(table: &AttributeTable, geometry: &GeometrySet) -> Result<GeometrySet, IngestError> {
    alignment(table.region_ids(), geometry.region_ids())?;
    geometry.reorder(table.region_ids())
}

/// Reorders a neighbour graph to the table's row order.
pub fn align_graph(table: &AttributeTable, graph: &NeighborGraph) -> Result<NeighborGraph, IngestError> {
    let perm = alignment(table.region_ids(), graph.region_ids())?;
    Ok(graph.permuted(&perm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_reports_every_unmatched_id() {
        let t: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let o: Vec<String> = ["c", "x", "a", "y"].iter().map(|s| s.to_string()).collect();
        match alignment(&t, &o).unwrap_err() {
            IngestError::Unmatched { only_in_table, only_in_other } => {
                assert_eq!(only_in_table, vec!["b"]);
                assert_eq!(only_in_other, vec!["x", "y"]);
            }
            e => panic!("{e}"),
        }
        let o: Vec<String> = ["c", "a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(alignment(&t, &o).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn align_graph_follows_table_order() {
        let g = parse_gal("3\nA 1\nB\nB 2\nA C\nC 1\nB").unwrap();
        let table = AttributeTable::new(
            vec!["C".into(), "B".into(), "A".into()],
            vec![("y".into(), vec![1.0, 2.0, 3.0])],
        )
        .unwrap();
        let aligned = align_graph(&table, &g).unwrap();
        assert_eq!(aligned.region_ids(), table.region_ids());
        assert_eq!(aligned.neighbors(0), &[1]);
        assert_eq!(aligned.neighbors(1), &[0, 2]);
    }
}
