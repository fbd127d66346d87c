//! Data generating process of the general nesting model, used as a ground-truth
//! oracle for the estimators:
//!
//! `u ~ N(0, sigma^2 I)`, `e = (I - lambda W)^{-1} u`,
//! `y = (I - rho W)^{-1} (alpha + X beta + W X_d theta + e)`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::ingest::{GeometrySet, Polygon};
use crate::rng::substream;
use crate::weights::{ContiguityRule, NeighborGraph, WeightsMatrix};

#[derive(Debug, thiserror::Error)]
pub enum DgpError {
    #[error("OutOfStationaryRegion: {parameter} = {value} outside ({lower}, {upper})")]
    OutOfStationaryRegion {
        parameter: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("SingularSystem: I - {0} W is singular")]
    SingularSystem(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpParams {
    pub rho: f64,
    pub lambda: f64,
    pub beta: Vec<f64>,
    /// Aligned with the Durbin column list passed to [`simulate_dgp`].
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub y: Vec<f64>,
    /// Realized white-noise innovations.
    pub u: Vec<f64>,
}

/// `n x k` matrix of independent standard normals, deterministic in `seed`.
pub fn standard_normal_design(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = substream(seed, 1);
    DMatrix::from_fn(n, k, |_, _| -> f64 { StandardNormal.sample(&mut rng) })
}

/// Solves `(I - a W) x = b` exactly by dense LU.
pub fn solve_spatial(w: &WeightsMatrix, a: f64, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a == 0.0 {
        return Some(b.clone());
    }
    let n = w.n();
    let mut m = DMatrix::identity(n, n);
    for (i, j, v) in w.triplets() {
        m[(i, j)] -= a * v;
    }
    m.lu().solve(b)
}

fn check_stationary(w: &WeightsMatrix, parameter: &'static str, value: f64) -> Result<(), DgpError> {
    if value == 0.0 {
        return Ok(());
    }
    let (lower, upper) = w.stationary_interval();
    if value > lower && value < upper {
        Ok(())
    } else {
        Err(DgpError::OutOfStationaryRegion { parameter, value, lower, upper })
    }
}

/// Simulates one response vector. `durbin` lists the columns of `x` that enter
/// as spatial lags with coefficients `params.theta`.
pub fn simulate_dgp(params: &DgpParams, x: &DMatrix<f64>, durbin: &[usize], w: &WeightsMatrix) -> Result<Simulation, DgpError> {
    let n = w.n();
    if x.nrows() != n {
        return Err(DgpError::DimensionMismatch(format!("x has {} rows, W is {n}x{n}", x.nrows())));
    }
    if x.ncols() != params.beta.len() {
        return Err(DgpError::DimensionMismatch(format!(
            "x has {} columns but beta has {} entries",
            x.ncols(),
            params.beta.len()
        )));
    }
    if durbin.len() != params.theta.len() {
        return Err(DgpError::DimensionMismatch(format!(
            "{} durbin columns but {} theta values",
            durbin.len(),
            params.theta.len()
        )));
    }
    if let Some(&c) = durbin.iter().find(|&&c| c >= x.ncols()) {
        return Err(DgpError::DimensionMismatch(format!("durbin column {c} out of range")));
    }
    if !(params.sigma.is_finite() && params.sigma > 0.0) {
        return Err(DgpError::InvalidParameter(format!("sigma must be positive, got {}", params.sigma)));
    }
    check_stationary(w, "rho", params.rho)?;
    check_stationary(w, "lambda", params.lambda)?;

    let mut rng = substream(params.seed, 0);
    let u: DVector<f64> = DVector::from_fn(n, |_, _| params.sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng));
    let e = solve_spatial(w, params.lambda, &u).ok_or(DgpError::SingularSystem("lambda"))?;

    let beta = DVector::from_column_slice(&params.beta);
    let mut mean = x * beta;
    mean.add_scalar_mut(params.alpha);
    for (&c, &th) in durbin.iter().zip(&params.theta) {
        let col: Vec<f64> = x.column(c).iter().copied().collect();
        let lag = w.lag(&col);
        for (m, l) in mean.iter_mut().zip(lag) {
            *m += th * l;
        }
    }
    let y = solve_spatial(w, params.rho, &(mean + e)).ok_or(DgpError::SingularSystem("rho"))?;
    Ok(Simulation { y: y.iter().copied().collect(), u: u.iter().copied().collect() })
}

/// Regular `rows x cols` grid of unit squares with its contiguity graph.
/// Region `r{row}c{col}` occupies `[col, col+1] x [row, row+1]`; ids are in
/// row-major order.
pub fn make_lattice(rows: usize, cols: usize, rule: ContiguityRule) -> Result<(GeometrySet, NeighborGraph), DgpError> {
    if rows == 0 || cols == 0 {
        return Err(DgpError::InvalidParameter("lattice needs at least one row and column".into()));
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let ids: Vec<String> = (0..rows).flat_map(|r| (0..cols).map(move |c| format!("r{r}c{c}"))).collect();
    let mut items = Vec::with_capacity(rows * cols);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = (c as f64, r as f64);
            let ring = vec![[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0], [x, y]];
            items.push((ids[idx(r, c)].clone(), vec![Polygon::new(ring)]));
            if c + 1 < cols {
                edges.push((idx(r, c), idx(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((idx(r, c), idx(r + 1, c)));
            }
            if rule == ContiguityRule::Queen && r + 1 < rows {
                if c + 1 < cols {
                    edges.push((idx(r, c), idx(r + 1, c + 1)));
                }
                if c > 0 {
                    edges.push((idx(r, c), idx(r + 1, c - 1)));
                }
            }
        }
    }
    let geometry = GeometrySet::from_polygons(items).expect("lattice squares are valid");
    let graph = NeighborGraph::from_edges(ids, &edges).expect("lattice edges are valid");
    Ok((geometry, graph))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{build_contiguity, Normalization, Provenance};

    fn brute_force_edges(rows: usize, cols: usize, queen: bool) -> usize {
        let cells: Vec<(i64, i64)> = (0..rows as i64).flat_map(|r| (0..cols as i64).map(move |c| (r, c))).collect();
        let mut count = 0;
        for (a, &(r1, c1)) in cells.iter().enumerate() {
            for &(r2, c2) in &cells[a + 1..] {
                let (dr, dc) = ((r1 - r2).abs(), (c1 - c2).abs());
                let adjacent = if queen { dr <= 1 && dc <= 1 } else { dr + dc == 1 };
                count += adjacent as usize;
            }
        }
        count
    }

    #[test]
    fn lattice_edge_counts() {
        assert_eq!(make_lattice(2, 2, ContiguityRule::Rook).unwrap().1.n_edges(), 4);
        assert_eq!(brute_force_edges(3, 3, true), 20);
        assert_eq!(make_lattice(3, 3, ContiguityRule::Queen).unwrap().1.n_edges(), 20);
        let (_, path) = make_lattice(1, 5, ContiguityRule::Rook).unwrap();
        assert_eq!(path.n_edges(), 4);
        assert_eq!(path.neighbors(2), &[1, 3]);
        for (r, c) in [(4, 7), (5, 5), (2, 9)] {
            for (rule, queen) in [(ContiguityRule::Rook, false), (ContiguityRule::Queen, true)] {
                assert_eq!(make_lattice(r, c, rule).unwrap().1.n_edges(), brute_force_edges(r, c, queen));
            }
        }
    }

    #[test]
    fn lattice_graph_matches_polygon_contiguity() {
        for rule in [ContiguityRule::Rook, ContiguityRule::Queen] {
            let (geo, graph) = make_lattice(4, 5, rule).unwrap();
            let built = build_contiguity(&geo, rule, 1, Default::default()).unwrap();
            assert_eq!(built, graph);
        }
    }

    #[test]
    fn identity_operators_when_spatial_terms_vanish() {
        let (_, g) = make_lattice(3, 3, ContiguityRule::Rook).unwrap();
        let w = WeightsMatrix::binary(&g, Provenance::Graph).normalize(Normalization::Row).unwrap();
        let x = standard_normal_design(9, 2, 4);
        let p = DgpParams { rho: 0.0, lambda: 0.0, beta: vec![1.5, -0.5], theta: vec![], alpha: 2.0, sigma: 0.7, seed: 9 };
        let sim = simulate_dgp(&p, &x, &[], &w).unwrap();
        for i in 0..9 {
            let expect = 2.0 + 1.5 * x[(i, 0)] - 0.5 * x[(i, 1)] + sim.u[i];
            assert!((sim.y[i] - expect).abs() < 1e-12);
        }
        assert_eq!(sim, simulate_dgp(&p, &x, &[], &w).unwrap());
    }

    #[test]
    fn reduced_form_solved_exactly() {
        let (_, g) = make_lattice(4, 4, ContiguityRule::Queen).unwrap();
        let w = WeightsMatrix::binary(&g, Provenance::Graph).normalize(Normalization::Row).unwrap();
        let x = standard_normal_design(16, 1, 2);
        let p = DgpParams { rho: 0.6, lambda: 0.3, beta: vec![1.0], theta: vec![0.4], alpha: 0.0, sigma: 1.0, seed: 3 };
        let sim = simulate_dgp(&p, &x, &[0], &w).unwrap();
        // (I - rho W) y - X b - W X theta = (I - lambda W)^{-1} u  =>  (I - lambda W)(...) = u
        let y = DVector::from_vec(sim.y.clone());
        let wy = DVector::from_vec(w.lag(&sim.y));
        let xc: Vec<f64> = x.column(0).iter().copied().collect();
        let wx = DVector::from_vec(w.lag(&xc));
        let e = &y - &wy * 0.6 - x.column(0) * 1.0 - wx * 0.4;
        let we = DVector::from_vec(w.lag(e.as_slice()));
        let u = e - we * 0.3;
        for i in 0..16 {
            assert!((u[i] - sim.u[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn parameter_checks() {
        let (_, g) = make_lattice(2, 2, ContiguityRule::Rook).unwrap();
        let w = WeightsMatrix::binary(&g, Provenance::Graph).normalize(Normalization::Row).unwrap();
        let x = standard_normal_design(4, 1, 0);
        let mut p = DgpParams { rho: 1.0, lambda: 0.0, beta: vec![1.0], theta: vec![], alpha: 0.0, sigma: 1.0, seed: 0 };
        assert!(matches!(simulate_dgp(&p, &x, &[], &w), Err(DgpError::OutOfStationaryRegion { .. })));
        p.rho = 0.2;
        p.theta = vec![1.0];
        assert!(matches!(simulate_dgp(&p, &x, &[], &w), Err(DgpError::DimensionMismatch(_))));
        p.theta.clear();
        assert!(matches!(simulate_dgp(&p, &standard_normal_design(5, 1, 0), &[], &w), Err(DgpError::DimensionMismatch(_))));
    }
}
