use std::collections::VecDeque;

/// Errors raised when a neighbour structure violates the graph invariants.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("SelfNeighbor: region `{0}` lists itself as a neighbor")]
    SelfNeighbor(String),
    #[error("AsymmetricNeighbors: `{from}` lists `{to}` but not the reverse")]
    Asymmetric { from: String, to: String },
    #[error("IndexOutOfRange: neighbor index {index} with only {n} regions")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("LengthMismatch: {ids} ids but {rows} adjacency rows")]
    LengthMismatch { ids: usize, rows: usize },
}

/// Symmetric, irreflexive neighbour structure over an ordered list of regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    region_ids: Vec<String>,
    adjacency: Vec<Vec<usize>>,
}

impl NeighborGraph {
    pub fn new(region_ids: Vec<String>, mut adjacency: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        let n = region_ids.len();
        if adjacency.len() != n {
            return Err(GraphError::LengthMismatch { ids: n, rows: adjacency.len() });
        }
        for (i, row) in adjacency.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            if let Some(&j) = row.iter().find(|&&j| j >= n) {
                return Err(GraphError::IndexOutOfRange { index: j, n });
            }
            if row.binary_search(&i).is_ok() {
                return Err(GraphError::SelfNeighbor(region_ids[i].clone()));
            }
        }
        for (i, row) in adjacency.iter().enumerate() {
            for &j in row {
                if adjacency[j].binary_search(&i).is_err() {
                    return Err(GraphError::Asymmetric {
                        from: region_ids[i].clone(),
                        to: region_ids[j].clone(),
                    });
                }
            }
        }
        Ok(Self { region_ids, adjacency })
    }

    /// Builds a graph from undirected index pairs; both directions are inserted.
    pub fn from_edges(region_ids: Vec<String>, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let n = region_ids.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::IndexOutOfRange { index: a.max(b), n });
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        Self::new(region_ids, adjacency)
    }

    pub fn len(&self) -> usize {
        self.region_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_ids.is_empty()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (i, row) in self.adjacency.iter().enumerate() {
            out.extend(row.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn islands(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.adjacency[i].is_empty()).collect()
    }

    /// Neighbours at graph distance `<= order` (or exactly `order` when `exact`).
    pub fn higher_order(&self, order: usize, exact: bool) -> Self {
        if order <= 1 {
            return if order == 1 || !exact {
                self.clone()
            } else {
                Self { region_ids: self.region_ids.clone(), adjacency: vec![Vec::new(); self.len()] }
            };
        }
        let n = self.len();
        let mut adjacency = Vec::with_capacity(n);
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for src in 0..n {
            let mut touched = vec![src];
            dist[src] = 0;
            queue.push_back(src);
            while let Some(u) = queue.pop_front() {
                if dist[u] == order {
                    continue;
                }
                for &v in &self.adjacency[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        touched.push(v);
                        queue.push_back(v);
                    }
                }
            }
            let mut row: Vec<usize> = touched
                .iter()
                .copied()
                .filter(|&v| v != src && (!exact || dist[v] == order))
                .collect();
            row.sort_unstable();
            for &v in &touched {
                dist[v] = usize::MAX;
            }
            adjacency.push(row);
        }
        Self { region_ids: self.region_ids.clone(), adjacency }
    }

    /// Graph whose `i`-th region is this graph's `perm[i]`-th region.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let region_ids = perm.iter().map(|&o| self.region_ids[o].clone()).collect();
        let adjacency = perm
            .iter()
            .map(|&o| {
                let mut row: Vec<usize> = self.adjacency[o].iter().map(|&j| inverse[j]).collect();
                row.sort_unstable();
                row
            })
            .collect();
        Self { region_ids, adjacency }
    }

    /// Restricts the graph to the given regions (in the given order).
    pub fn subgraph(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let region_ids = keep.iter().map(|&o| self.region_ids[o].clone()).collect();
        let adjacency = keep
            .iter()
            .map(|&o| {
                let mut row: Vec<usize> =
                    self.adjacency[o].iter().filter(|&&j| map[j] != usize::MAX).map(|&j| map[j]).collect();
                row.sort_unstable();
                row
            })
            .collect();
        Self { region_ids, adjacency }
    }
}
