//! Maximum-likelihood estimation of the spatial family.
//!
//! For given `(rho, lambda)` the Gaussian likelihood is concentrated over
//! `beta` and `sigma^2`: with the filter `A(lambda) = I - lambda W`,
//!
//! ```text
//! y_f = A(lambda) (y - rho W y),   Z_f = A(lambda) Z
//! beta = (Z_f' Z_f)^{-1} Z_f' y_f,  sigma^2 = u'u / n,  u = y_f - Z_f beta
//! l_c = -n/2 (ln 2 pi + ln sigma^2 + 1) + ln|I - rho W| + ln|I - lambda W|
//! ```
//!
//! Since `y_f` is affine in `rho` for fixed `lambda`, one QR factorization of
//! `Z_f` serves a whole line search over `rho`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::logdet::{log_det_derivative, log_det_unchecked};
use super::ols::rows;
use super::optimize::{golden_max, grid_golden_max, polish_root, ScalarMax};
use super::{pseudo_r2, Design, EstimationError, FitResult, ModelKind, ModelSpec, SeMode};
use crate::ingest::AttributeTable;
use crate::linalg;
use crate::weights::WeightsMatrix;

#[derive(Debug, Clone, Copy)]
pub struct MlOptions {
    /// Grid points for the coarse scalar scan.
    pub grid: usize,
    /// Golden-section tolerance on the spatial parameter.
    pub tol: f64,
    /// Convergence tolerance of the rho/lambda alternation.
    pub outer_tol: f64,
    pub max_outer: usize,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self { grid: 100, tol: 1e-8, outer_tol: 1e-7, max_outer: 200 }
    }
}

struct Problem<'a> {
    kind: ModelKind,
    n: usize,
    y: DVector<f64>,
    wy: DVector<f64>,
    wwy: DVector<f64>,
    z: DMatrix<f64>,
    wz: DMatrix<f64>,
    eig: &'a [Complex64],
    space: (f64, f64),
}

/// Regression of the `lambda`-filtered data, affine in `rho`.
struct Filtered {
    lambda: f64,
    logdet_lambda: f64,
    e_a: DVector<f64>,
    e_b: DVector<f64>,
    b_a: DVector<f64>,
    b_b: DVector<f64>,
}

struct Concentrated {
    beta: DVector<f64>,
    sigma2: f64,
    loglik: f64,
}

impl<'a> Problem<'a> {
    fn new(design: &Design, w: &'a WeightsMatrix, kind: ModelKind) -> Self {
        let n = design.n();
        let wy = DVector::from_vec(w.lag(design.y.as_slice()));
        let wwy = DVector::from_vec(w.lag(wy.as_slice()));
        let mut wz = DMatrix::zeros(n, design.k());
        for c in 0..design.k() {
            let col: Vec<f64> = design.z.column(c).iter().copied().collect();
            wz.set_column(c, &DVector::from_vec(w.lag(&col)));
        }
        Self {
            kind,
            n,
            y: design.y.clone(),
            wy,
            wwy,
            z: design.z.clone(),
            wz,
            eig: w.eigenvalues(),
            space: w.parameter_space(),
        }
    }

    fn filtered(&self, lambda: f64) -> Option<Filtered> {
        let (zf, a, b) = if lambda == 0.0 {
            (self.z.clone(), self.y.clone(), self.wy.clone())
        } else {
            (
                &self.z - &self.wz * lambda,
                &self.y - &self.wy * lambda,
                &self.wy - &self.wwy * lambda,
            )
        };
        let rhs = DMatrix::from_columns(&[a.clone(), b.clone()]);
        let coef = linalg::lstsq_many(&zf, &rhs)?;
        let b_a = coef.column(0).clone_owned();
        let b_b = coef.column(1).clone_owned();
        let e_a = &a - &zf * &b_a;
        let e_b = &b - &zf * &b_b;
        Some(Filtered { lambda, logdet_lambda: log_det_unchecked(lambda, self.eig), e_a, e_b, b_a, b_b })
    }

    fn at(&self, f: &Filtered, rho: f64) -> Concentrated {
        let u = &f.e_a - &f.e_b * rho;
        let nf = self.n as f64;
        let sigma2 = u.dot(&u) / nf;
        let loglik = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0)
            + log_det_unchecked(rho, self.eig)
            + f.logdet_lambda;
        Concentrated { beta: &f.b_a - &f.b_b * rho, sigma2, loglik }
    }

    fn profile(&self, rho: f64, lambda: f64) -> f64 {
        match self.filtered(lambda) {
            Some(f) => finite_or_neg_inf(self.at(&f, rho).loglik),
            None => f64::NEG_INFINITY,
        }
    }

    /// Derivative of the concentrated log-likelihood in `rho` at fixed `lambda`.
    fn d_rho(&self, f: &Filtered, rho: f64) -> f64 {
        let u = &f.e_a - &f.e_b * rho;
        self.n as f64 * u.dot(&f.e_b) / u.dot(&u) + log_det_derivative(rho, self.eig)
    }

    /// Derivative of the concentrated log-likelihood in `lambda` at fixed `rho`.
    /// By the envelope theorem `beta` is held at its optimum:
    /// `d/dlambda = n u'(W r) / u'u + d ln|I - lambda W|`, `r = y - rho W y - Z beta`.
    fn d_lambda(&self, rho: f64, lambda: f64) -> f64 {
        let Some(f) = self.filtered(lambda) else { return f64::NAN };
        let u = &f.e_a - &f.e_b * rho;
        let beta = &f.b_a - &f.b_b * rho;
        let wr = &self.wy - &self.wwy * rho - &self.wz * beta;
        self.n as f64 * u.dot(&wr) / u.dot(&u) + log_det_derivative(lambda, self.eig)
    }

    fn search_rho(&self, lambda: f64, opts: &MlOptions, around: Option<f64>) -> ScalarMax {
        let Some(f) = self.filtered(lambda) else {
            return ScalarMax { x: 0.0, value: f64::NEG_INFINITY, evaluations: 0 };
        };
        let g = |r: f64| finite_or_neg_inf(self.at(&f, r).loglik);
        self.line_search(g, |r| self.d_rho(&f, r), opts, around)
    }

    fn search_lambda(&self, rho: f64, opts: &MlOptions, around: Option<f64>) -> ScalarMax {
        self.line_search(|l| self.profile(rho, l), |l| self.d_lambda(rho, l), opts, around)
    }

    /// Full-interval grid + golden search, or a local golden search around a
    /// previous value that falls back to the full search if it hits its
    /// bracket. The golden-section result is then polished to the root of the
    /// analytic derivative.
    fn line_search<G, D>(&self, mut g: G, dg: D, opts: &MlOptions, around: Option<f64>) -> ScalarMax
    where
        G: FnMut(f64) -> f64,
        D: FnMut(f64) -> f64,
    {
        let (lo, hi) = self.space;
        let step = (hi - lo) / (opts.grid - 1) as f64;
        let mut r = None;
        if let Some(c) = around {
            let a = (c - 5.0 * step).max(lo);
            let b = (c + 5.0 * step).min(hi);
            let local = golden_max(&mut g, a, b, opts.tol);
            let at_edge = (a > lo && local.x - a < 2.0 * opts.tol) || (b < hi && b - local.x < 2.0 * opts.tol);
            if !at_edge {
                r = Some(local);
            }
        }
        let mut r = r.unwrap_or_else(|| grid_golden_max(&mut g, lo, hi, opts.grid, opts.tol));
        if let Some(x) = polish_root(dg, r.x, lo, hi, step) {
            let v = g(x);
            if v >= r.value - 1e-12 * r.value.abs() {
                r = ScalarMax { x, value: v, evaluations: r.evaluations + 1 };
            }
        }
        r
    }

    fn gradient(&self, rho: f64, lambda: f64) -> Option<[f64; 2]> {
        let f = self.filtered(lambda)?;
        let g = [self.d_rho(&f, rho), self.d_lambda(rho, lambda)];
        g.iter().all(|v| v.is_finite()).then_some(g)
    }

    /// Newton steps on the analytic profile gradient, Jacobian by central
    /// differences. A step is kept only if it shrinks the gradient without
    /// lowering the likelihood.
    fn newton_polish(&self, mut rho: f64, mut lambda: f64, mut current: f64) -> (f64, f64, f64) {
        let (lo, hi) = self.space;
        let Some(mut g) = self.gradient(rho, lambda) else { return (rho, lambda, current) };
        for _ in 0..20 {
            let h = 1e-6;
            let (Some(rp), Some(rm), Some(lp), Some(lm)) = (
                self.gradient(rho + h, lambda),
                self.gradient(rho - h, lambda),
                self.gradient(rho, lambda + h),
                self.gradient(rho, lambda - h),
            ) else {
                break;
            };
            let (a, b) = ((rp[0] - rm[0]) / (2.0 * h), (lp[0] - lm[0]) / (2.0 * h));
            let (c, d) = ((rp[1] - rm[1]) / (2.0 * h), (lp[1] - lm[1]) / (2.0 * h));
            let off = 0.5 * (b + c);
            let det = a * d - off * off;
            if !(det > 0.0 && a < 0.0) {
                break;
            }
            let dr = -(d * g[0] - off * g[1]) / det;
            let dl = -(a * g[1] - off * g[0]) / det;
            let (nr, nl) = (rho + dr, lambda + dl);
            if !(nr > lo && nr < hi && nl > lo && nl < hi) {
                break;
            }
            let v = self.profile(nr, nl);
            let Some(ng) = self.gradient(nr, nl) else { break };
            if !(v >= current - 1e-12 * current.abs()) || ng[0].hypot(ng[1]) >= g[0].hypot(g[1]) {
                break;
            }
            (rho, lambda, current, g) = (nr, nl, v.max(current), ng);
        }
        (rho, lambda, current)
    }

    /// Coordinate ascent over `(rho, lambda)` with a pattern move along each
    /// sweep's displacement.
    fn alternate(&self, rho_first: bool, opts: &MlOptions) -> Result<(f64, f64, f64, usize), EstimationError> {
        let (lo, hi) = self.space;
        let (mut rho, mut lambda) = (0.0, 0.0);
        let mut current = if rho_first {
            let r = self.search_rho(0.0, opts, None);
            rho = r.x;
            r.value
        } else {
            let r = self.search_lambda(0.0, opts, None);
            lambda = r.x;
            r.value
        };
        for it in 1..=opts.max_outer {
            let (rho0, lambda0) = (rho, lambda);
            let local = |v: f64| if it == 1 { None } else { Some(v) };

            let s = self.search_lambda(rho, opts, if rho_first { local(lambda) } else { Some(lambda) });
            if s.value > current {
                lambda = s.x;
                current = s.value;
            }
            let s = self.search_rho(lambda, opts, if rho_first { Some(rho) } else { local(rho) });
            if s.value > current {
                rho = s.x;
                current = s.value;
            }

            let (dr, dl) = (rho - rho0, lambda - lambda0);
            if dr != 0.0 || dl != 0.0 {
                let t_max = [(dr, rho), (dl, lambda)]
                    .iter()
                    .map(|&(d, v)| {
                        if d > 0.0 {
                            (hi - v) / d
                        } else if d < 0.0 {
                            (lo - v) / d
                        } else {
                            f64::INFINITY
                        }
                    })
                    .fold(8.0_f64, f64::min);
                if t_max > 0.0 {
                    let mut line = |t: f64| self.profile(rho + t * dr, lambda + t * dl);
                    let s = golden_max(&mut line, 0.0, t_max, opts.tol.max(1e-10));
                    if s.value > current {
                        rho += s.x * dr;
                        lambda += s.x * dl;
                        current = s.value;
                    }
                }
            }

            if (rho - rho0).abs() < opts.outer_tol && (lambda - lambda0).abs() < opts.outer_tol {
                let (rho, lambda, current) = self.newton_polish(rho, lambda, current);
                return Ok((rho, lambda, current, it));
            }
        }
        Err(EstimationError::NonConvergence { iterations: opts.max_outer, rho, lambda, loglik: current })
    }

    /// Per-observation log-likelihood at a full parameter vector
    /// `[beta, rho?, lambda?, sigma2]` (Jacobian terms shared equally).
    fn obs_loglik(&self, p: &[f64]) -> DVector<f64> {
        let k = self.z.ncols();
        let beta = DVector::from_column_slice(&p[..k]);
        let mut idx = k;
        let rho = if self.kind.has_rho() {
            idx += 1;
            p[idx - 1]
        } else {
            0.0
        };
        let lambda = if self.kind.has_lambda() {
            idx += 1;
            p[idx - 1]
        } else {
            0.0
        };
        let sigma2 = p[idx];
        let nf = self.n as f64;
        let e = &self.y - &self.wy * rho - &self.z * &beta;
        let we = &self.wy - &self.wwy * rho - &self.wz * &beta;
        let u = e - we * lambda;
        let jac = (log_det_unchecked(rho, self.eig) + log_det_unchecked(lambda, self.eig)) / nf;
        let c = -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln() + jac;
        u.map(|ui| c - ui * ui / (2.0 * sigma2))
    }

    fn loglik(&self, p: &[f64]) -> f64 {
        self.obs_loglik(p).sum()
    }
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

fn step(v: f64) -> f64 {
    1e-5 * v.abs().max(1.0)
}

/// Central-difference Hessian of the total log-likelihood.
fn hessian(problem: &Problem, p: &[f64]) -> DMatrix<f64> {
    let m = p.len();
    let f0 = problem.loglik(p);
    let mut h = DMatrix::zeros(m, m);
    let mut x = p.to_vec();
    for i in 0..m {
        let hi = step(p[i]);
        x[i] = p[i] + hi;
        let fp = problem.loglik(&x);
        x[i] = p[i] - hi;
        let fm = problem.loglik(&x);
        x[i] = p[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = step(p[j]);
            let mut eval = |si: f64, sj: f64| {
                x[i] = p[i] + si * hi;
                x[j] = p[j] + sj * hj;
                let v = problem.loglik(&x);
                x[i] = p[i];
                x[j] = p[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Per-observation central-difference scores, `n x m`.
fn scores(problem: &Problem, p: &[f64]) -> DMatrix<f64> {
    let m = p.len();
    let mut s = DMatrix::zeros(problem.n, m);
    let mut x = p.to_vec();
    for j in 0..m {
        let h = step(p[j]);
        x[j] = p[j] + h;
        let fp = problem.obs_loglik(&x);
        x[j] = p[j] - h;
        let fm = problem.obs_loglik(&x);
        x[j] = p[j];
        s.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    s
}

/// Fits SEM, SAR, SDEM, SDM, SAC or GNS by maximum likelihood.
pub fn fit_spatial(spec: &ModelSpec, table: &AttributeTable, w: &WeightsMatrix) -> Result<FitResult, EstimationError> {
    fit_spatial_with(spec, table, w, &MlOptions::default())
}

pub fn fit_spatial_with(
    spec: &ModelSpec,
    table: &AttributeTable,
    w: &WeightsMatrix,
    opts: &MlOptions,
) -> Result<FitResult, EstimationError> {
    if !spec.kind.is_ml() {
        return Err(EstimationError::InvalidSpec(format!("{} is not a maximum-likelihood model", spec.kind)));
    }
    let design = Design::build(spec, table, Some(w))?;
    let problem = Problem::new(&design, w, spec.kind);
    let mut warnings = Vec::new();

    let (rho, lambda, iterations) = match (spec.kind.has_rho(), spec.kind.has_lambda()) {
        (true, false) => (problem.search_rho(0.0, opts, None).x, 0.0, 1),
        (false, true) => (0.0, problem.search_lambda(0.0, opts, None).x, 1),
        _ => {
            let msg = format!(
                "{} estimates rho and lambda jointly; the two are weakly identified and estimates may be unstable",
                spec.kind
            );
            log::warn!("{msg}");
            warnings.push(msg);
            let a = problem.alternate(true, opts);
            let b = problem.alternate(false, opts);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let best = if b.2 > a.2 { b } else { a };
                    (best.0, best.1, best.3)
                }
                (Ok(a), Err(_)) | (Err(_), Ok(a)) => (a.0, a.1, a.3),
                (Err(e), Err(_)) => return Err(e),
            }
        }
    };

    let filt = problem.filtered(lambda).ok_or_else(|| EstimationError::SingularDesign {
        column: design.names.last().cloned().unwrap_or_default(),
        combination: "filtered design is rank deficient".into(),
    })?;
    debug_assert_eq!(filt.lambda, lambda);
    let conc = problem.at(&filt, rho);

    let (lo, hi) = problem.space;
    for (name, v, active) in [("rho", rho, spec.kind.has_rho()), ("lambda", lambda, spec.kind.has_lambda())] {
        if active && ((v - lo).abs() < 1e-5 || (hi - v).abs() < 1e-5) {
            let msg = format!("{name} = {v} is at the edge of the parameter space ({lo}, {hi})");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut names = design.names.clone();
    let mut params: Vec<f64> = conc.beta.iter().copied().collect();
    if spec.kind.has_rho() {
        names.push("rho".into());
        params.push(rho);
    }
    if spec.kind.has_lambda() {
        names.push("lambda".into());
        params.push(lambda);
    }
    names.push("sigma2".into());
    params.push(conc.sigma2);

    let h = hessian(&problem, &params);
    let neg_h_inv = linalg::sym_inverse(&(-&h)).ok_or(EstimationError::SingularHessian)?;
    let vcov = match spec.se_mode {
        SeMode::Classical => neg_h_inv,
        SeMode::Robust => {
            let s = scores(&problem, &params);
            let meat = s.transpose() * &s;
            let v = &neg_h_inv * meat * &neg_h_inv;
            (&v + v.transpose()) * 0.5
        }
    };
    let std_errors: Vec<f64> = (0..params.len()).map(|i| vcov[(i, i)].max(0.0).sqrt()).collect();

    let fitted_v = &problem.wy * rho + &design.z * &conc.beta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = (&design.y - &fitted_v).iter().copied().collect();
    let r2 = pseudo_r2(&fitted, design.y.as_slice());

    let nb = design.n_beta;
    let k = design.k();
    Ok(FitResult {
        spec: spec.clone(),
        region_ids: table.region_ids().to_vec(),
        beta_names: design.names[..nb].to_vec(),
        beta: params[..nb].to_vec(),
        theta_names: design.names[nb..k].to_vec(),
        theta: params[nb..k].to_vec(),
        rho,
        lambda,
        sigma2: conc.sigma2,
        param_names: names,
        std_errors,
        vcov: rows(&vcov),
        loglik: conc.loglik,
        n: design.n(),
        k: params.len(),
        r2,
        adj_r2: None,
        r2_kind: "pseudo".into(),
        residuals,
        fitted,
        weights_fingerprint: Some(w.fingerprint()),
        iterations,
        warnings,
        params,
        design: Some(design),
    })
}

/// Full (unconcentrated) log-likelihood at `params`, ordered as in
/// [`FitResult::param_names`]: `[beta..., theta..., rho?, lambda?, sigma2]`.
pub fn full_loglik(
    spec: &ModelSpec,
    table: &AttributeTable,
    w: &WeightsMatrix,
    params: &[f64],
) -> Result<f64, EstimationError> {
    let design = Design::build(spec, table, Some(w))?;
    let expected = design.k() + spec.kind.has_rho() as usize + spec.kind.has_lambda() as usize + 1;
    if params.len() != expected {
        return Err(EstimationError::InvalidSpec(format!(
            "expected {expected} parameters, got {}",
            params.len()
        )));
    }
    Ok(Problem::new(&design, w, spec.kind).loglik(params))
}
