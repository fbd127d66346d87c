use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::IngestError;
use crate::weights::NeighborGraph;

/// Parses GAL text: a count line, then per region an `<id> <k>` line followed by a
/// line of `k` neighbour ids. Lines starting with `#` are ignored.
///
/// The four-field GeoDa header (`0 <n> <layer> <key>`) is also accepted.
pub fn parse_gal(text: &str) -> Result<NeighborGraph, IngestError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim_start().starts_with('#'));

    let (_, header) = lines.next().ok_or_else(|| IngestError::BadHeader("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let n: usize = match fields.as_slice() {
        [n] => n.parse().ok(),
        [_, n, _, _] => n.parse().ok(),
        _ => None,
    }
    .ok_or_else(|| IngestError::BadHeader(header.to_string()))?;

    let mut ids = Vec::with_capacity(n);
    let mut raw: Vec<Vec<String>> = Vec::with_capacity(n);
    for _ in 0..n {
        let (lineno, head) = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some(x) => break x,
                None => {
                    return Err(IngestError::BadHeader(format!(
                        "expected {n} regions, found {}",
                        ids.len()
                    )))
                }
            }
        };
        let parts: Vec<&str> = head.split_whitespace().collect();
        let (id, k) = match parts.as_slice() {
            [id, k] => (
                id.to_string(),
                k.parse::<usize>()
                    .map_err(|_| IngestError::BadHeader(format!("line {}: `{head}`", lineno + 1)))?,
            ),
            _ => return Err(IngestError::BadHeader(format!("line {}: `{head}`", lineno + 1))),
        };
        let listed: Vec<String> = if k == 0 {
            Vec::new()
        } else {
            match lines.next() {
                Some((_, l)) => l.split_whitespace().map(str::to_string).collect(),
                None => Vec::new(),
            }
        };
        if listed.len() != k {
            return Err(IngestError::NeighborCountMismatch {
                region: id,
                declared: k,
                listed: listed.len(),
            });
        }
        ids.push(id);
        raw.push(listed);
    }
    if let Some((lineno, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(IngestError::BadHeader(format!(
            "header declares {n} regions but line {} has more: `{extra}`",
            lineno + 1
        )));
    }

    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index.len() != ids.len() {
        let mut seen = std::collections::HashSet::new();
        let dup = ids.iter().find(|id| !seen.insert(*id)).cloned().unwrap_or_default();
        return Err(IngestError::DuplicateId(dup));
    }
    let mut adjacency = Vec::with_capacity(n);
    for (i, listed) in raw.iter().enumerate() {
        let mut row = Vec::with_capacity(listed.len());
        for nb in listed {
            let j = *index.get(nb.as_str()).ok_or_else(|| IngestError::UnknownNeighborId {
                region: ids[i].clone(),
                neighbor: nb.clone(),
            })?;
            row.push(j);
        }
        adjacency.push(row);
    }
    Ok(NeighborGraph::new(ids, adjacency)?)
}

/// Canonical GAL text: regions in graph order, neighbour ids sorted lexicographically.
pub fn format_gal(graph: &NeighborGraph) -> Result<String, IngestError> {
    let mut out = String::new();
    writeln!(out, "{}", graph.len()).unwrap();
    for (i, id) in graph.region_ids().iter().enumerate() {
        if id.chars().any(char::is_whitespace) || id.is_empty() {
            return Err(IngestError::InvalidId(id.clone()));
        }
        let mut names: Vec<&str> = graph.neighbors(i).iter().map(|&j| graph.region_ids()[j].as_str()).collect();
        names.sort_unstable();
        writeln!(out, "{id} {}", names.len()).unwrap();
        writeln!(out, "{}", names.join(" ")).unwrap();
    }
    Ok(out)
}

pub fn read_gal(path: impl AsRef<Path>) -> Result<NeighborGraph, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_gal(&text)
}

pub fn write_gal(path: impl AsRef<Path>, graph: &NeighborGraph) -> Result<(), IngestError> {
    let path = path.as_ref();
    std::fs::write(path, format_gal(graph)?).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
