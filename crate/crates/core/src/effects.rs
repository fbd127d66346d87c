//! Impact decomposition.
//!
//! For regressor `k` the reduced form gives the impact matrix
//! `S_k = (I - rho W)^{-1} (beta_k I + theta_k W)`. Direct effects average its
//! diagonal, total effects its row sums, and the indirect effect is the
//! difference. Both averages are linear in `(beta_k, theta_k)`:
//!
//! `direct = beta_k tr(A)/n + theta_k tr(AW)/n`,
//! `total  = beta_k 1'A1/n + theta_k 1'AW1/n`, with `A = (I - rho W)^{-1}`,
//!
//! so one set of four scalars per value of `rho` serves every regressor.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::estimators::{FitResult, ModelKind};
use crate::rng::substream;
use crate::stats;
use crate::weights::WeightsMatrix;

/// Upper bound on rejected draws per accepted draw before giving up.
const MAX_REJECTIONS_PER_DRAW: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum EffectsError {
    #[error("DimensionMismatch: fit has {fit} observations, weights matrix is {weights}x{weights}")]
    DimensionMismatch { fit: usize, weights: usize },
    #[error("WeightsMismatch: fit was estimated with weights {expected}, got {got}")]
    WeightsMismatch { expected: String, got: String },
    #[error("OutOfStationaryRegion: rho = {value} outside ({lower}, {upper})")]
    OutOfStationaryRegion { value: f64, lower: f64, upper: f64 },
    #[error("InvalidCovariance: {0}")]
    InvalidCovariance(String),
    #[error("SingularSystem: I - rho W is singular at rho = {0}")]
    SingularSystem(f64),
}

/// Point estimate and Monte-Carlo summary of one effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub point: f64,
    /// Mean over the simulation draws; `None` when no draws were requested.
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectRow {
    pub variable: String,
    pub direct: EffectEstimate,
    pub indirect: EffectEstimate,
    pub total: EffectEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectsTable {
    pub model: ModelKind,
    pub rho: f64,
    pub rows: Vec<EffectRow>,
    pub draws: usize,
    pub seed: u64,
    /// Draws discarded because the simulated `rho` left the stationary interval.
    pub rejected_draws: usize,
}

impl EffectsTable {
    pub fn row(&self, variable: &str) -> Option<&EffectRow> {
        self.rows.iter().find(|r| r.variable == variable)
    }
}

/// `tr(A)/n`, `tr(AW)/n`, `1'A1/n`, `1'AW1/n` at one value of `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Multipliers {
    pub d0: f64,
    pub d1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Multipliers {
    pub fn direct(&self, beta: f64, theta: f64) -> f64 {
        beta * self.d0 + theta * self.d1
    }

    pub fn total(&self, beta: f64, theta: f64) -> f64 {
        beta * self.t0 + theta * self.t1
    }
}

pub(crate) fn multipliers(w: &WeightsMatrix, rho: f64) -> Result<Multipliers, EffectsError> {
    let n = w.n() as f64;
    if rho == 0.0 {
        let tr: f64 = (0..w.n()).map(|i| w.get(i, i)).sum();
        return Ok(Multipliers { d0: 1.0, d1: tr / n, t0: 1.0, t1: w.s0() / n });
    }
    let spectrum = w.spectrum();
    let (mut d0, mut d1) = (0.0, 0.0);
    for &om in &spectrum.eigenvalues {
        let a = 1.0 / (1.0 - rho * om);
        d0 += a.re;
        d1 += (om * a).re;
    }
    let (t0, t1) = match &spectrum.total_weights {
        Some(u) => {
            let (mut t0, mut t1) = (0.0, 0.0);
            for (om, uk) in spectrum.eigenvalues.iter().zip(u) {
                let a = 1.0 / (1.0 - rho * om.re);
                t0 += uk * a;
                t1 += uk * om.re * a;
            }
            (t0, t1)
        }
        None => dense_totals(w, rho)?,
    };
    Ok(Multipliers { d0: d0 / n, d1: d1 / n, t0: t0 / n, t1: t1 / n })
}

/// `1'A1` and `1'AW1` by a dense LU solve.
fn dense_totals(w: &WeightsMatrix, rho: f64) -> Result<(f64, f64), EffectsError> {
    let n = w.n();
    let mut m = DMatrix::identity(n, n);
    for (i, j, v) in w.triplets() {
        m[(i, j)] -= rho * v;
    }
    let lu = m.lu();
    let mut rhs = DMatrix::zeros(n, 2);
    rhs.column_mut(0).fill(1.0);
    for (i, s) in w.row_sums().into_iter().enumerate() {
        rhs[(i, 1)] = s;
    }
    let sol = lu.solve(&rhs).ok_or(EffectsError::SingularSystem(rho))?;
    Ok((sol.column(0).sum(), sol.column(1).sum()))
}

/// Regressor name with the parameter-vector positions of its `beta` and `theta`.
struct Target {
    name: String,
    beta: usize,
    theta: Option<usize>,
}

fn targets(fit: &FitResult) -> Vec<Target> {
    fit.beta_names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.as_str() != "const")
        .map(|(i, name)| {
            let lagged = format!("W_{name}");
            let theta = fit.theta_names.iter().position(|t| *t == lagged).map(|j| fit.beta.len() + j);
            Target { name: name.clone(), beta: i, theta }
        })
        .collect()
}

/// Lower-triangular factor `L` with `L L' = cov`, clamping tiny negative
/// eigenvalues when the matrix is only semi-definite.
fn covariance_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>, EffectsError> {
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.l());
    }
    let eig = SymmetricEigen::new(cov.clone());
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&l| l < -1e-8 * scale || !l.is_finite()) {
        return Err(EffectsError::InvalidCovariance("parameter covariance is not positive semi-definite".into()));
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

fn summarize(point: f64, sims: Option<Vec<f64>>) -> EffectEstimate {
    match sims {
        None => EffectEstimate { point, mean: None, std_error: None, t_stat: None, p_value: None },
        Some(s) => {
            let mean = stats::mean(&s);
            let sd = if s.len() > 1 { stats::sample_variance(&s).sqrt() } else { 0.0 };
            let t = mean / sd;
            EffectEstimate { point, mean: Some(mean), std_error: Some(sd), t_stat: Some(t), p_value: Some(stats::normal_two_sided(t)) }
        }
    }
}

/// Direct, indirect and total effects of every regressor, with Monte-Carlo
/// inference from `draws` Gaussian parameter draws when `draws > 0`.
pub fn decompose_effects(fit: &FitResult, w: &WeightsMatrix, draws: usize, seed: u64) -> Result<EffectsTable, EffectsError> {
    if w.n() != fit.n {
        return Err(EffectsError::DimensionMismatch { fit: fit.n, weights: w.n() });
    }
    if let Some(expected) = &fit.weights_fingerprint {
        let got = w.fingerprint();
        if *expected != got {
            return Err(EffectsError::WeightsMismatch { expected: expected.clone(), got });
        }
    }
    let kind = fit.spec.kind;
    let rho = if kind.has_rho() { fit.rho } else { 0.0 };
    let (lower, upper) = w.stationary_interval();
    if rho != 0.0 && !(rho > lower && rho < upper) {
        return Err(EffectsError::OutOfStationaryRegion { value: rho, lower, upper });
    }
    let targets = targets(fit);
    let m = multipliers(w, rho)?;
    let theta_at = |t: &Target, p: &[f64]| t.theta.map_or(0.0, |j| p[j]);
    let points: Vec<(f64, f64)> = targets
        .iter()
        .map(|t| (m.direct(fit.params[t.beta], theta_at(t, &fit.params)), m.total(fit.params[t.beta], theta_at(t, &fit.params))))
        .collect();

    let mut rejected = 0;
    let mut sims: Option<Vec<Vec<(f64, f64)>>> = None;
    if draws > 0 {
        // Parameters that move the effects: betas, thetas and rho.
        let mut idx: Vec<usize> = targets.iter().flat_map(|t| std::iter::once(t.beta).chain(t.theta)).collect();
        let rho_pos = if kind.has_rho() {
            let p = fit.param_names.iter().position(|n| n == "rho").expect("rho in parameter vector");
            idx.push(p);
            Some(idx.len() - 1)
        } else {
            None
        };
        let cov = fit.vcov_matrix();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| cov[(idx[a], idx[b])]);
        let l = covariance_factor(&sub)?;
        let centre = DVector::from_iterator(idx.len(), idx.iter().map(|&i| fit.params[i]));
        let pos_of = |param: usize| idx.iter().position(|&i| i == param).expect("indexed parameter");

        let results: Vec<Result<(Vec<(f64, f64)>, usize), EffectsError>> = (0..draws)
            .into_par_iter()
            .map(|d| {
                let mut rng = substream(seed, d as u64);
                let mut rejections = 0;
                let v = loop {
                    let e = DVector::from_fn(idx.len(), |_, _| -> f64 { StandardNormal.sample(&mut rng) });
                    let v = &centre + &l * e;
                    match rho_pos {
                        Some(r) if !(v[r] > lower && v[r] < upper) => {
                            rejections += 1;
                            if rejections > MAX_REJECTIONS_PER_DRAW {
                                return Err(EffectsError::OutOfStationaryRegion { value: v[r], lower, upper });
                            }
                        }
                        _ => break v,
                    }
                };
                let m = multipliers(w, rho_pos.map_or(0.0, |r| v[r]))?;
                let row = targets
                    .iter()
                    .map(|t| {
                        let b = v[pos_of(t.beta)];
                        let th = t.theta.map_or(0.0, |j| v[pos_of(j)]);
                        (m.direct(b, th), m.total(b, th))
                    })
                    .collect();
                Ok((row, rejections))
            })
            .collect();
        let mut all = Vec::with_capacity(draws);
        for r in results {
            let (row, rej) = r?;
            rejected += rej;
            all.push(row);
        }
        sims = Some(all);
    }

    let rows = targets
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let (pd, pt) = points[k];
            let pick = |f: fn(&(f64, f64)) -> f64| sims.as_ref().map(|s| s.iter().map(|row| f(&row[k])).collect::<Vec<f64>>());
            EffectRow {
                variable: t.name.clone(),
                direct: summarize(pd, pick(|x| x.0)),
                indirect: summarize(pt - pd, pick(|x| x.1 - x.0)),
                total: summarize(pt, pick(|x| x.1)),
            }
        })
        .collect();
    Ok(EffectsTable { model: kind, rho, rows, draws, seed, rejected_draws: rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::make_lattice;
    use crate::estimators::ModelSpec;
    use crate::weights::{ContiguityRule, NeighborGraph, Normalization, Provenance};

    fn two_cycle() -> WeightsMatrix {
        let g = NeighborGraph::from_edges(vec!["a".into(), "b".into()], &[(0, 1)]).unwrap();
        WeightsMatrix::binary(&g, Provenance::Graph).normalize(Normalization::Row).unwrap()
    }

    fn lattice(rows: usize, cols: usize) -> WeightsMatrix {
        let (_, g) = make_lattice(rows, cols, ContiguityRule::Queen).unwrap();
        WeightsMatrix::binary(&g, Provenance::Graph).normalize(Normalization::Row).unwrap()
    }

    /// A fit carrying only what the decomposition reads.
    fn fake_fit(kind: ModelKind, n: usize, beta: &[(&str, f64)], theta: &[(&str, f64)], rho: f64) -> FitResult {
        let mut names: Vec<String> = beta.iter().map(|b| b.0.to_string()).collect();
        names.extend(theta.iter().map(|t| format!("W_{}", t.0)));
        let mut params: Vec<f64> = beta.iter().map(|b| b.1).chain(theta.iter().map(|t| t.1)).collect();
        if kind.has_rho() {
            names.push("rho".into());
            params.push(rho);
        }
        names.push("sigma2".into());
        params.push(1.0);
        let p = params.len();
        let vcov = (0..p).map(|i| (0..p).map(|j| if i == j { 1e-4 } else { 0.0 }).collect()).collect();
        let regs: Vec<&str> = beta.iter().map(|b| b.0).filter(|b| *b != "const").collect();
        let durb: Vec<&str> = theta.iter().map(|t| t.0).collect();
        FitResult {
            spec: ModelSpec::new(kind, "y", &regs).with_durbin(&durb),
            region_ids: Vec::new(),
            beta_names: beta.iter().map(|b| b.0.to_string()).collect(),
            beta: beta.iter().map(|b| b.1).collect(),
            theta_names: theta.iter().map(|t| format!("W_{}", t.0)).collect(),
            theta: theta.iter().map(|t| t.1).collect(),
            rho,
            lambda: 0.0,
            sigma2: 1.0,
            param_names: names,
            std_errors: vec![0.01; p],
            params,
            vcov,
            loglik: 0.0,
            n,
            k: beta.len() + theta.len(),
            r2: 0.0,
            adj_r2: None,
            r2_kind: String::new(),
            residuals: Vec::new(),
            fitted: Vec::new(),
            weights_fingerprint: None,
            iterations: 0,
            warnings: Vec::new(),
            design: None,
        }
    }

    #[test]
    fn two_cycle_closed_form() {
        let w = two_cycle();
        let fit = fake_fit(ModelKind::Sdm, 2, &[("const", 0.0), ("x", 1.0)], &[("x", 0.0)], 0.3);
        let t = decompose_effects(&fit, &w, 0, 0).unwrap();
        let r = t.row("x").unwrap();
        assert!((r.total.point - 1.0 / 0.7).abs() < 1e-12);
        assert!((r.direct.point - 1.0 / 0.91).abs() < 1e-12);
        assert!(r.direct.mean.is_none());
    }

    #[test]
    fn slx_effects_are_coefficients() {
        let w = lattice(3, 4);
        let fit = fake_fit(ModelKind::Slx, 12, &[("const", 1.0), ("a", 0.7), ("b", -2.0)], &[("a", 0.4)], 0.0);
        let t = decompose_effects(&fit, &w, 0, 0).unwrap();
        assert_eq!(t.row("a").unwrap().direct.point, 0.7);
        assert!((t.row("a").unwrap().indirect.point - 0.4).abs() < 1e-15);
        assert_eq!(t.row("b").unwrap().indirect.point, 0.0);
        assert!(t.row("const").is_none());
    }

    #[test]
    fn sar_constant_ratio() {
        let w = lattice(4, 4);
        let fit = fake_fit(ModelKind::Sar, 16, &[("const", 1.0), ("a", 0.7), ("b", -2.0)], &[], 0.45);
        let t = decompose_effects(&fit, &w, 0, 0).unwrap();
        let ratio = |v: &str| t.row(v).unwrap().indirect.point / t.row(v).unwrap().direct.point;
        assert!((ratio("a") - ratio("b")).abs() < 1e-12);
    }

    /// `S_k` via the truncated Neumann series with dense matrix powers.
    fn neumann(w: &WeightsMatrix, rho: f64, beta: f64, theta: f64) -> (f64, f64) {
        let wd = w.to_dense();
        let n = w.n();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut p = DMatrix::<f64>::identity(n, n);
        for _ in 0..=50 {
            a += &p;
            p = &p * &wd * rho;
        }
        let s = &a * (DMatrix::identity(n, n) * beta + &wd * theta);
        (s.trace() / n as f64, s.sum() / n as f64)
    }

    #[test]
    fn matches_neumann_series() {
        let w = lattice(4, 5);
        for rho in [-0.5, -0.2, 0.3, 0.5] {
            let m = multipliers(&w, rho).unwrap();
            let (d, t) = neumann(&w, rho, 1.3, -0.6);
            assert!((m.direct(1.3, -0.6) - d).abs() < 1e-8, "rho {rho}");
            assert!((m.total(1.3, -0.6) - t).abs() < 1e-8, "rho {rho}");
        }
    }

    #[test]
    fn dense_totals_agree_with_spectral() {
        let w = lattice(3, 5);
        let m = multipliers(&w, 0.6).unwrap();
        let (t0, t1) = dense_totals(&w, 0.6).unwrap();
        assert!((m.t0 - t0 / 15.0).abs() < 1e-10);
        assert!((m.t1 - t1 / 15.0).abs() < 1e-10);
    }

    #[test]
    fn draws_are_deterministic_and_additive() {
        let w = lattice(3, 3);
        let mut fit = fake_fit(ModelKind::Sdm, 9, &[("const", 1.0), ("a", 0.7)], &[("a", 0.2)], 0.95);
        let rho_i = fit.param_names.iter().position(|n| n == "rho").unwrap();
        fit.vcov[rho_i][rho_i] = 0.01;
        let a = decompose_effects(&fit, &w, 200, 3).unwrap();
        assert_eq!(a, decompose_effects(&fit, &w, 200, 3).unwrap());
        assert!(a.rejected_draws > 0);
        let r = a.row("a").unwrap();
        assert!((r.total.mean.unwrap() - r.direct.mean.unwrap() - r.indirect.mean.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn dimension_mismatch() {
        let fit = fake_fit(ModelKind::Sar, 5, &[("const", 1.0), ("a", 1.0)], &[], 0.1);
        assert!(matches!(decompose_effects(&fit, &two_cycle(), 0, 0), Err(EffectsError::DimensionMismatch { .. })));
    }
}
