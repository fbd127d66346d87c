//! `.wm` triple-list serialization.
//!
//! ```text
//! <n> <normalization> <provenance>
//! # ids <id_1> ... <id_n>
//! <row id> <col id> <weight>
//! ```
//! Weights are written with 17 significant digits so the text round-trips
//! exactly. The `# ids` line fixes region order (and keeps islands); readers
//! that skip comments can still use the triples.

use std::fmt::Write as _;
use std::path::Path;

use super::{Normalization, Provenance, WeightsError, WeightsMatrix};

pub fn format_wm(w: &WeightsMatrix) -> String {
    let mut out = String::with_capacity(32 * (w.nnz() + 2));
    writeln!(out, "{} {} {}", w.n(), w.normalization(), w.provenance()).unwrap();
    out.push_str("# ids");
    for id in w.region_ids() {
        out.push(' ');
        out.push_str(id);
    }
    out.push('\n');
    let ids = w.region_ids();
    for (i, j, v) in w.triplets() {
        writeln!(out, "{} {} {:.16e}", ids[i], ids[j], v).unwrap();
    }
    out
}

pub fn parse_wm(text: &str) -> Result<WeightsMatrix, WeightsError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| WeightsError::Format("empty .wm file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [n, norm, prov] = fields.as_slice() else {
        return Err(WeightsError::Format(format!("bad header `{header}`")));
    };
    let n: usize = n.parse().map_err(|_| WeightsError::Format(format!("bad count in `{header}`")))?;
    let normalization: Normalization = norm.parse()?;
    let provenance: Provenance = prov.parse()?;

    let mut ids: Option<Vec<String>> = None;
    let mut raw = Vec::new();
    for line in lines {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('#') {
            if let Some(list) = rest.trim_start().strip_prefix("ids") {
                ids = Some(list.split_whitespace().map(str::to_string).collect());
            }
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        let [r, c, v] = parts.as_slice() else {
            return Err(WeightsError::Format(format!("bad triple `{t}`")));
        };
        let v: f64 = v.parse().map_err(|_| WeightsError::Format(format!("bad weight in `{t}`")))?;
        raw.push((r.to_string(), c.to_string(), v));
    }
    let ids = match ids {
        Some(ids) => ids,
        None => {
            let mut seen = Vec::new();
            for (r, c, _) in &raw {
                for id in [r, c] {
                    if !seen.contains(id) {
                        seen.push(id.clone());
                    }
                }
            }
            seen
        }
    };
    if ids.len() != n {
        return Err(WeightsError::Format(format!("header declares {n} regions, found {}", ids.len())));
    }
    let index: std::collections::HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| WeightsError::Format(format!("unknown region id `{id}`")))
    };
    let mut trip = Vec::with_capacity(raw.len());
    for (r, c, v) in &raw {
        trip.push((lookup(r)?, lookup(c)?, *v));
    }
    WeightsMatrix::from_triplets(ids, trip, normalization, provenance)
}

pub fn read_wm(path: impl AsRef<Path>) -> Result<WeightsMatrix, WeightsError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| WeightsError::Io(format!("{}: {e}", path.display())))?;
    parse_wm(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::NeighborGraph;

    #[test]
    fn round_trip_is_exact() {
        let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let g = NeighborGraph::from_edges(ids, &[(0, 1), (1, 2)]).unwrap();
        let w = WeightsMatrix::binary(&g, Provenance::Graph).normalize(Normalization::Row).unwrap();
        let w = w.with_values(w.values().iter().map(|v| v / 3.0).collect(), Normalization::Row);
        let text = format_wm(&w);
        assert!(text.starts_with("4 row graph\n# ids a b c d\n"));
        let back = parse_wm(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(format_wm(&back), text);
        assert_eq!(back.islands(), vec![3]);
    }

    #[test]
    fn without_id_line() {
        let w = parse_wm("2 none inverse_distance\nx y 0.5\ny x 0.5\n").unwrap();
        assert_eq!(w.region_ids(), &["x", "y"]);
        assert_eq!(w.get(1, 0), 0.5);
        assert!(parse_wm("3 none custom\nx y 1\n").is_err());
        assert!(parse_wm("2 bogus custom\n").is_err());
        assert!(parse_wm("2 none custom\nx x 1\n").is_err());
    }
}
