use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use super::IngestError;

/// Columns whose values are shares and must lie in `[0, 1]`.
const PROPORTION_COLUMNS: &[&str] = &["prop_religious", "permanent_5y", "prop_degree", "prop_foreign"];

/// Region-indexed table of numeric community attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    region_ids: Vec<String>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl AttributeTable {
    /// Builds a table from already-parsed columns, enforcing the same invariants
    /// as [`load_table`].
    pub fn new(region_ids: Vec<String>, columns: Vec<(String, Vec<f64>)>) -> Result<Self, IngestError> {
        if region_ids.is_empty() {
            return Err(IngestError::EmptyTable);
        }
        let mut seen = HashSet::with_capacity(region_ids.len());
        for (row, id) in region_ids.iter().enumerate() {
            if id.trim().is_empty() {
                return Err(IngestError::EmptyId { row: row + 1 });
            }
            if !seen.insert(id.as_str()) {
                return Err(IngestError::DuplicateId(id.clone()));
            }
        }
        let mut names = Vec::with_capacity(columns.len());
        let mut values = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if col.len() != region_ids.len() {
                return Err(IngestError::ColumnLength {
                    column: name,
                    expected: region_ids.len(),
                    found: col.len(),
                });
            }
            if names.contains(&name) {
                return Err(IngestError::DuplicateColumn(name));
            }
            for (row, v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(IngestError::NonNumericCell {
                        row: row + 1,
                        column: name,
                        value: v.to_string(),
                    });
                }
            }
            check_domain(&name, &col, &region_ids)?;
            names.push(name);
            values.push(col);
        }
        Ok(Self { region_ids, names, columns: values })
    }

    pub fn n_rows(&self) -> usize {
        self.region_ids.len()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64], IngestError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Reorders rows to follow `order` (a permutation of this table's ids).
    pub fn reorder(&self, order: &[String]) -> Result<Self, IngestError> {
        let index: std::collections::HashMap<&str, usize> =
            self.region_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut rows = Vec::with_capacity(order.len());
        for id in order {
            rows.push(*index.get(id.as_str()).ok_or_else(|| IngestError::Unmatched {
                only_in_table: vec![],
                only_in_other: vec![id.clone()],
            })?);
        }
        self.select_rows(&rows)
    }

    /// Keeps only the given row indices, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, IngestError> {
        let ids = rows.iter().map(|&r| self.region_ids[r].clone()).collect();
        let cols = self
            .names
            .iter()
            .zip(&self.columns)
            .map(|(n, c)| (n.clone(), rows.iter().map(|&r| c[r]).collect()))
            .collect();
        Self::new(ids, cols)
    }
}

fn check_domain(name: &str, col: &[f64], ids: &[String]) -> Result<(), IngestError> {
    let bad = |row: usize, v: f64, expected: &'static str| IngestError::OutOfRange {
        column: name.to_string(),
        region: ids[row].clone(),
        value: v,
        expected,
    };
    if PROPORTION_COLUMNS.contains(&name) {
        if let Some((r, &v)) = col.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(bad(r, v, "a proportion in [0, 1]"));
        }
    } else if name == "ls_sd" {
        if let Some((r, &v)) = col.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(bad(r, v, "a non-negative standard deviation"));
        }
    } else if name == "urban" {
        if let Some((r, &v)) = col.iter().enumerate().find(|(_, v)| **v != 0.0 && **v != 1.0) {
            return Err(bad(r, v, "a 0/1 flag"));
        }
    }
    Ok(())
}

/// Reads a delimiter-separated attribute file with a header row.
pub fn load_table(path: impl AsRef<Path>, id_column: &str) -> Result<AttributeTable, IngestError> {
    load_table_with_delimiter(path, id_column, b',')
}

pub fn load_table_with_delimiter(
    path: impl AsRef<Path>,
    id_column: &str,
    delimiter: u8,
) -> Result<AttributeTable, IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_table(file, id_column, delimiter)
}

/// Parses an attribute table from any reader.
pub fn read_table<R: Read>(reader: R, id_column: &str, delimiter: u8) -> Result<AttributeTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let id_pos = headers
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| IngestError::MissingColumn(id_column.to_string()))?;

    let mut ids = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (c, cell) in record.iter().enumerate() {
            if c == id_pos {
                ids.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                IngestError::NonNumericCell {
                    row: row + 1,
                    column: headers[c].clone(),
                    value: cell.to_string(),
                }
            })?;
            columns[c].push(v);
        }
    }
    if ids.is_empty() {
        return Err(IngestError::EmptyTable);
    }
    let cols = headers
        .into_iter()
        .zip(columns)
        .enumerate()
        .filter(|(i, _)| *i != id_pos)
        .map(|(_, c)| c)
        .collect();
    AttributeTable::new(ids, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<AttributeTable, IngestError> {
        read_table(s.as_bytes(), "id", b',')
    }

    #[test]
    fn minimal_table() {
        let t = parse("id,y\nA,0\n").unwrap();
        assert_eq!(t.n_rows(), 1);
        assert_eq!(t.column("y").unwrap(), &[0.0]);
    }

    #[test]
    fn duplicate_id_is_named() {
        let err = parse("id,y\nA,1\nB,2\nA,3\n").unwrap_err();
        assert!(matches!(err, IngestError::DuplicateId(ref id) if id == "A"), "{err}");
    }

    #[test]
    fn missing_id_column() {
        assert!(matches!(parse("region,y\nA,1\n"), Err(IngestError::MissingColumn(_))));
    }

    #[test]
    fn empty_and_non_numeric() {
        assert!(matches!(parse("id,y\n"), Err(IngestError::EmptyTable)));
        let err = parse("id,y\nA,1\nB,\n").unwrap_err();
        match err {
            IngestError::NonNumericCell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(parse("id,y\nA,abc\n"), Err(IngestError::NonNumericCell { .. })));
        assert!(matches!(parse("id,y\nA,NaN\n"), Err(IngestError::NonNumericCell { .. })));
    }

    #[test]
    fn domain_checks() {
        assert!(matches!(parse("id,prop_degree\nA,1.2\n"), Err(IngestError::OutOfRange { .. })));
        assert!(matches!(parse("id,ls_sd\nA,-0.1\n"), Err(IngestError::OutOfRange { .. })));
        assert!(matches!(parse("id,urban\nA,2\n"), Err(IngestError::OutOfRange { .. })));
        assert!(parse("id,urban,prop_degree\nA,1,0.3\nB,0,1\n").is_ok());
    }

    #[test]
    fn row_order_preserved_and_deterministic() {
        let src = "id,y,x\nC,3,1\nA,1,2\nB,2,3\n";
        let t = parse(src).unwrap();
        assert_eq!(t.region_ids(), &["C", "A", "B"]);
        assert_eq!(t, parse(src).unwrap());
        let r = t.reorder(&["A".into(), "B".into(), "C".into()]).unwrap();
        assert_eq!(r.column("y").unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn other_delimiter() {
        let t = read_table("id;y\nA;4.5\n".as_bytes(), "id", b';').unwrap();
        assert_eq!(t.column("y").unwrap(), &[4.5]);
    }
}
