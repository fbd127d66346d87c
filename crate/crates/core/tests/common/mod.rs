#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use spatialspill::dgp::{make_lattice, simulate_dgp, standard_normal_design, DgpParams};
use spatialspill::rng::substream;
use spatialspill::weights::{ContiguityRule, NeighborGraph, Normalization, Provenance, WeightsMatrix};
use spatialspill::AttributeTable;

pub fn lattice_w(rows: usize, cols: usize, rule: ContiguityRule, norm: Normalization) -> WeightsMatrix {
    let (_, g) = make_lattice(rows, cols, rule).unwrap();
    WeightsMatrix::binary(&g, Provenance::Graph).normalize(norm).unwrap()
}

pub fn rook(rows: usize, cols: usize) -> WeightsMatrix {
    lattice_w(rows, cols, ContiguityRule::Rook, Normalization::Row)
}

/// Random symmetric graph on `n` nodes where every node has at least one neighbour.
pub fn random_graph(n: usize, p: f64, seed: u64) -> NeighborGraph {
    let mut rng = substream(seed, 77);
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n));
        for j in i + 2..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let ids = (0..n).map(|i| format!("n{i}")).collect();
    NeighborGraph::from_edges(ids, &edges).unwrap()
}

/// Random non-negative, non-symmetric weights with a zero diagonal.
pub fn random_asymmetric(n: usize, seed: u64) -> WeightsMatrix {
    let mut rng = substream(seed, 78);
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && (j == (i + 1) % n || rng.random::<f64>() < 0.2) {
                trip.push((i, j, rng.random::<f64>() + 0.05));
            }
        }
    }
    let ids = (0..n).map(|i| format!("n{i}")).collect();
    WeightsMatrix::from_triplets(ids, trip, Normalization::None, Provenance::Custom).unwrap()
}

pub fn dense(w: &WeightsMatrix) -> DMatrix<f64> {
    let n = w.n();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = w.get(i, j);
        }
    }
    m
}

pub fn table(ids: &[String], cols: Vec<(&str, Vec<f64>)>) -> AttributeTable {
    AttributeTable::new(ids.to_vec(), cols.into_iter().map(|(k, v)| (k.to_string(), v)).collect()).unwrap()
}

/// Response `y` and regressors `x1..xk` simulated from the nesting process.
pub struct SimSpec {
    pub rho: f64,
    pub lambda: f64,
    pub beta: Vec<f64>,
    /// `(regressor index, theta)` pairs.
    pub theta: Vec<(usize, f64)>,
    pub alpha: f64,
    pub sigma: f64,
}

pub fn simulate(spec: &SimSpec, w: &WeightsMatrix, seed: u64) -> AttributeTable {
    let k = spec.beta.len();
    let x = standard_normal_design(w.n(), k, seed.wrapping_add(0x5eed));
    let durbin: Vec<usize> = spec.theta.iter().map(|t| t.0).collect();
    let params = DgpParams {
        rho: spec.rho,
        lambda: spec.lambda,
        beta: spec.beta.clone(),
        theta: spec.theta.iter().map(|t| t.1).collect(),
        alpha: spec.alpha,
        sigma: spec.sigma,
        seed,
    };
    let sim = simulate_dgp(&params, &x, &durbin, w).unwrap();
    let mut cols = vec![("y".to_string(), sim.y)];
    for c in 0..k {
        cols.push((format!("x{}", c + 1), x.column(c).iter().copied().collect()));
    }
    AttributeTable::new(w.region_ids().to_vec(), cols).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
