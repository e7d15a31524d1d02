//! Least-squares loading extraction.
//!
//! Two objectives are supported, both minimizing the sum of squared
//! off-diagonal residuals of the sample moment matrix `S`:
//!
//! * Minres (the classical common factor model): residuals of
//!   `S - ΛΛ'`.
//! * SPFA (score predictor factor analysis): residuals of
//!   `S - Λ(Λ'S⁻¹Λ)⁻¹Λ'`, the matrix reproduced from the factor score
//!   predictors. The returned solution is gauge-fixed to
//!   `Λ_s = Λ_os(Λ_os'S⁻¹Λ_os)^{-1/2}` so that `Λ_s'S⁻¹Λ_s = I`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SqrtKind, SymMatrix};

/// Extraction model tag. `Cfm` is the common factor model fitted with
/// Minres; `Spfa` is score predictor factor analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cfm,
    Spfa,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Cfm => write!(f, "cfm"),
            Method::Spfa => write!(f, "spfa"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cfm" | "minres" => Ok(Method::Cfm),
            "spfa" => Ok(Method::Spfa),
            other => Err(Error::Input(format!(
                "unknown method {other:?}; expected cfm or spfa"
            ))),
        }
    }
}

/// A p x q loading matrix with variable and factor labels.
#[derive(Debug, Clone)]
pub struct LoadingMatrix {
    rows: Vec<String>,
    cols: Vec<String>,
    values: DMatrix<f64>,
}

impl LoadingMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let rows = (1..=values.nrows()).map(|i| format!("X{i}")).collect();
        let cols = (1..=values.ncols()).map(|j| format!("F{j}")).collect();
        Self::with_labels(values, rows, cols)
    }

    pub fn with_labels(values: DMatrix<f64>, rows: Vec<String>, cols: Vec<String>) -> Result<Self> {
        if rows.len() != values.nrows() || cols.len() != values.ncols() {
            return Err(Error::Dimension(
                "label counts do not match loading matrix shape".into(),
            ));
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    i: idx % values.nrows(),
                    j: idx / values.nrows(),
                });
            }
        }
        Ok(Self { rows, cols, values })
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn q(&self) -> usize {
        self.values.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row_labels(&self) -> &[String] {
        &self.rows
    }

    pub fn col_labels(&self) -> &[String] {
        &self.cols
    }

    /// Entries whose magnitude exceeds the correlation-metric bound of
    /// 1.2 (1 plus slack); diagnostic only.
    pub fn out_of_metric_entries(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.q() {
            for i in 0..self.p() {
                if self.values[(i, j)].abs() > 1.2 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Tolerances and iteration limits for the fitters.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Stop when the objective decreases by less than this.
    pub tol_objective: f64,
    /// Stop when the largest gradient component is below this.
    pub tol_gradient: f64,
    pub max_iter: usize,
    /// Optional starting loadings for the SPFA fitter; defaults to the
    /// Minres solution.
    pub start: Option<DMatrix<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol_objective: 1e-9,
            tol_gradient: 1e-6,
            max_iter: 2000,
            start: None,
        }
    }
}

/// Result of an extraction run: canonical orthogonal loadings,
/// uniquenesses, and convergence bookkeeping.
#[derive(Debug, Clone)]
pub struct FactorSolution {
    pub method: Method,
    pub loadings: LoadingMatrix,
    /// Diagonal of Ψ² (Cfm) or Ψ_s² (Spfa).
    pub uniqueness: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective values across accepted iterates; non-increasing.
    pub trace: Vec<f64>,
    /// Variables whose communality hit the Heywood clamp.
    pub heywood: Vec<usize>,
    /// Condition number of the input moment matrix.
    pub condition: f64,
}

fn offdiag_residual(s: &DMatrix<f64>, reproduced: &DMatrix<f64>) -> DMatrix<f64> {
    let mut e = s - reproduced;
    for i in 0..e.nrows() {
        e[(i, i)] = 0.0;
    }
    e
}

fn frob_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Minres objective (sum of squared off-diagonal residuals of S - ΛΛ').
pub fn minres_objective(s: &SymMatrix, lambda: &DMatrix<f64>) -> f64 {
    let e = offdiag_residual(s.matrix(), &(lambda * lambda.transpose()));
    frob_sq(&e)
}

fn minres_gradient(s: &SymMatrix, lambda: &DMatrix<f64>) -> DMatrix<f64> {
    let e = offdiag_residual(s.matrix(), &(lambda * lambda.transpose()));
    -4.0 * e * lambda
}

/// SPFA objective: sum of squared off-diagonal residuals of
/// `S - Λ(Λ'S⁻¹Λ)⁻¹Λ'`. Invariant under `Λ -> ΛQ` for invertible Q.
pub fn spfa_objective(s: &SymMatrix, lambda: &LoadingMatrix) -> Result<f64> {
    let s_inv = linalg::sym_inverse(s)?;
    spfa_objective_raw(s.matrix(), s_inv.matrix(), lambda.matrix())
}

fn gauge_matrix(s_inv: &DMatrix<f64>, lambda: &DMatrix<f64>) -> DMatrix<f64> {
    lambda.transpose() * s_inv * lambda
}

fn spfa_reproduced(s_inv: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = gauge_matrix(s_inv, lambda);
    let g_inv = g.clone().try_inverse().ok_or(Error::RankDeficientGauge)?;
    Ok(lambda * g_inv * lambda.transpose())
}

fn spfa_objective_raw(s: &DMatrix<f64>, s_inv: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<f64> {
    let m = spfa_reproduced(s_inv, lambda)?;
    Ok(frob_sq(&offdiag_residual(s, &m)))
}

/// Analytic gradient of the SPFA objective with respect to Λ.
pub fn spfa_gradient(s: &SymMatrix, lambda: &LoadingMatrix) -> Result<DMatrix<f64>> {
    let s_inv = linalg::sym_inverse(s)?;
    spfa_gradient_raw(s.matrix(), s_inv.matrix(), lambda.matrix())
}

fn spfa_gradient_raw(
    s: &DMatrix<f64>,
    s_inv: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let g = gauge_matrix(s_inv, lambda);
    let g_inv = g.clone().try_inverse().ok_or(Error::RankDeficientGauge)?;
    let m = lambda * &g_inv * lambda.transpose();
    let e = offdiag_residual(s, &m);
    let elg = &e * lambda * &g_inv; // E Λ G⁻¹, p x q
    let grad = -4.0 * (&elg - s_inv * lambda * &g_inv * lambda.transpose() * &elg);
    Ok(grad)
}

/// Barzilai-Borwein descent with Armijo backtracking. `project` maps an
/// accepted iterate back onto the preferred parameterization (the SPFA
/// gauge); it must not change the objective value.
fn bb_minimize<F, P>(
    start: DMatrix<f64>,
    mut eval: F,
    mut project: P,
    opts: &FitOptions,
) -> Result<(DMatrix<f64>, f64, usize, bool, Vec<f64>)>
where
    F: FnMut(&DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>,
    P: FnMut(DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let mut x = project(start)?;
    let (mut f, mut grad) = eval(&x)?;
    let mut alpha = 1e-2;
    let mut trace = vec![f];
    let mut converged = grad.amax() <= opts.tol_gradient;
    let mut iter = 0;
    while iter < opts.max_iter && !converged {
        iter += 1;
        let gnorm_sq = frob_sq(&grad);
        let mut accepted = false;
        let mut cand = x.clone();
        let mut f_cand = f;
        let mut g_cand = grad.clone();
        while alpha > 1e-16 {
            cand = &x - alpha * &grad;
            match eval(&cand) {
                Ok((fc, gc)) if fc <= f - 1e-4 * alpha * gnorm_sq => {
                    f_cand = fc;
                    g_cand = gc;
                    accepted = true;
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        if !accepted {
            break; // step collapsed; gradient no longer a descent direction numerically
        }
        let cand = project(cand)?;
        let (f_proj, g_proj) = eval(&cand)?;
        if f_proj > f {
            break; // projection jitter exceeded the remaining decrease
        }
        let step = &cand - &x;
        let grad_diff = &g_proj - &grad;
        let delta = f - f_proj;
        x = cand;
        f = f_proj;
        grad = g_proj;
        let _ = f_cand;
        let _ = g_cand;
        trace.push(f);
        let sy: f64 = step.iter().zip(grad_diff.iter()).map(|(a, b)| a * b).sum();
        alpha = if sy > 1e-300 {
            (frob_sq(&step) / sy).clamp(1e-12, 1e6)
        } else {
            (alpha * 2.0).min(1.0)
        };
        if grad.amax() <= opts.tol_gradient && delta < opts.tol_objective {
            converged = true;
        }
    }
    if grad.amax() <= opts.tol_gradient {
        converged = true;
    }
    Ok((x, f, iter, converged, trace))
}

/// Orient loadings into principal-axis form (Λ'Λ diagonal descending)
/// with the dominant entry of each column positive. Leaves ΛΛ' intact.
fn canonicalize(lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = lambda.ncols();
    let llt = SymMatrix::from_matrix(lambda * lambda.transpose())?;
    let eig = linalg::sym_eigen(&llt)?;
    let mut out = DMatrix::zeros(lambda.nrows(), q);
    for j in 0..q {
        let val = eig.values[j].max(0.0).sqrt();
        let col = eig.vectors.column(j) * val;
        out.set_column(j, &col);
    }
    for j in 0..q {
        let mut best = 0usize;
        for i in 0..out.nrows() {
            if out[(i, j)].abs() > out[(best, j)].abs() {
                best = i;
            }
        }
        if out[(best, j)] < 0.0 {
            for i in 0..out.nrows() {
                out[(i, j)] = -out[(i, j)];
            }
        }
    }
    Ok(out)
}

fn condition_number(s: &SymMatrix) -> Result<f64> {
    let eig = linalg::sym_eigen(s)?;
    let max = eig.values[0];
    let min = eig.values[eig.values.len() - 1];
    if min <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

fn check_q(s: &SymMatrix, q: usize) -> Result<()> {
    if q < 1 {
        return Err(Error::Input("factor count q must be at least 1".into()));
    }
    if q >= s.order() {
        return Err(Error::Input(format!(
            "factor count q = {q} must be smaller than the number of variables p = {}",
            s.order()
        )));
    }
    Ok(())
}

const HEYWOOD_CAP: f64 = 0.998;

/// Classical Minres extraction: iterated principal axes on `S` with the
/// communality diagonal, followed by a first-order polish of the
/// off-diagonal residual objective.
pub fn minres_fit(s: &SymMatrix, q: usize, opts: &FitOptions) -> Result<FactorSolution> {
    check_q(s, q)?;
    let p = s.order();
    let s_inv = linalg::sym_inverse(s)?;
    let correlation_metric = s.is_correlation();

    // squared multiple correlations as starting communalities
    let mut h2: Vec<f64> = (0..p)
        .map(|i| {
            let smc = s.matrix()[(i, i)] - 1.0 / s_inv.matrix()[(i, i)];
            smc.clamp(0.0, HEYWOOD_CAP * s.matrix()[(i, i)])
        })
        .collect();
    let mut heywood = std::collections::BTreeSet::new();
    let mut lambda = DMatrix::zeros(p, q);
    for _ in 0..1000 {
        let mut adjusted = s.matrix().clone();
        for i in 0..p {
            adjusted[(i, i)] = h2[i];
        }
        let eig = linalg::sym_eigen(&SymMatrix::from_matrix(adjusted)?)?;
        for j in 0..q {
            let val = eig.values[j].max(0.0).sqrt();
            lambda.set_column(j, &(eig.vectors.column(j) * val));
        }
        let mut max_change = 0.0_f64;
        for i in 0..p {
            let mut comm: f64 = lambda.row(i).iter().map(|v| v * v).sum();
            let cap = HEYWOOD_CAP * s.matrix()[(i, i)];
            if comm > cap {
                comm = cap;
                heywood.insert(i);
            }
            max_change = max_change.max((comm - h2[i]).abs());
            h2[i] = comm;
        }
        if max_change < 1e-9 {
            break;
        }
    }

    let (polished, objective, iterations, converged, trace) = bb_minimize(
        lambda,
        |l| Ok((minres_objective(s, l), minres_gradient(s, l))),
        Ok,
        opts,
    )?;
    let lambda = canonicalize(&polished)?;

    let mut uniqueness = DVector::zeros(p);
    for i in 0..p {
        let comm: f64 = lambda.row(i).iter().map(|v| v * v).sum();
        let mut u = s.matrix()[(i, i)] - comm;
        if correlation_metric {
            if u < 0.0 || u > 1.0 {
                heywood.insert(i);
            }
            u = u.clamp(0.0, 1.0);
        } else if u < 0.0 {
            heywood.insert(i);
            u = 0.0;
        }
        uniqueness[i] = u;
    }

    Ok(FactorSolution {
        method: Method::Cfm,
        loadings: LoadingMatrix::new(lambda)?,
        uniqueness,
        objective,
        iterations,
        converged,
        trace,
        heywood: heywood.into_iter().collect(),
        condition: condition_number(s)?,
    })
}

/// SPFA extraction: minimizes the off-diagonal residuals of the matrix
/// reproduced from the factor score predictors, starting from the
/// Minres solution, and gauge-fixes every accepted iterate to
/// `Λ(Λ'S⁻¹Λ)^{-1/2}`.
pub fn spfa_fit(s: &SymMatrix, q: usize, opts: &FitOptions) -> Result<FactorSolution> {
    check_q(s, q)?;
    let p = s.order();
    let s_inv = linalg::sym_inverse(s)?;
    let start = match &opts.start {
        Some(l) => {
            if l.nrows() != p || l.ncols() != q {
                return Err(Error::Dimension(format!(
                    "start loadings are {}x{}, expected {p}x{q}",
                    l.nrows(),
                    l.ncols()
                )));
            }
            l.clone()
        }
        None => {
            let minres = minres_fit(s, q, &FitOptions::default())?;
            minres.loadings.matrix().clone()
        }
    };

    let gauge_fix = |l: DMatrix<f64>| -> Result<DMatrix<f64>> {
        let g = SymMatrix::from_matrix(gauge_matrix(s_inv.matrix(), &l))?;
        let g_mhalf = linalg::sym_sqrt(&g, SqrtKind::MinusHalf).map_err(|e| match e {
            Error::Singular { .. } => Error::RankDeficientGauge,
            other => other,
        })?;
        Ok(l * g_mhalf.matrix())
    };

    let (lambda_s, objective, iterations, converged, trace) = bb_minimize(
        start,
        |l| {
            Ok((
                spfa_objective_raw(s.matrix(), s_inv.matrix(), l)?,
                spfa_gradient_raw(s.matrix(), s_inv.matrix(), l)?,
            ))
        },
        gauge_fix,
        opts,
    )?;
    let lambda_s = canonicalize_gauged(&lambda_s, s_inv.matrix())?;

    let mut uniqueness = DVector::zeros(p);
    let reproduced = &lambda_s * lambda_s.transpose();
    for i in 0..p {
        uniqueness[i] = (s.matrix()[(i, i)] - reproduced[(i, i)]).max(0.0);
    }

    Ok(FactorSolution {
        method: Method::Spfa,
        loadings: LoadingMatrix::new(lambda_s)?,
        uniqueness,
        objective,
        iterations,
        converged,
        trace,
        heywood: Vec::new(),
        condition: condition_number(s)?,
    })
}

/// Principal-axis orientation within the gauge: rotate columns so Λ'Λ is
/// diagonal. An orthogonal right-rotation keeps Λ'S⁻¹Λ = I intact.
fn canonicalize_gauged(lambda: &DMatrix<f64>, s_inv: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let out = canonicalize(lambda)?;
    // canonicalize() rebuilds from ΛΛ' eigenvectors, which preserves both
    // the reproduced matrix and the gauge; verify the gauge survived.
    let g = gauge_matrix(s_inv, &out);
    let q = out.ncols();
    debug_assert!((g - DMatrix::identity(q, q)).amax() < 1e-6);
    Ok(out)
}

/// Moment matrix reproduced by a solution: `Λ_sΛ_s'` for SPFA
/// (rotation-invariant), `ΛΦΛ'` for the common factor model.
pub fn reproduce_moment(solution: &FactorSolution, phi: Option<&SymMatrix>) -> Result<SymMatrix> {
    let lambda = solution.loadings.matrix();
    let m = match (solution.method, phi) {
        (Method::Spfa, _) => lambda * lambda.transpose(),
        (Method::Cfm, None) => lambda * lambda.transpose(),
        (Method::Cfm, Some(phi)) => {
            if phi.order() != lambda.ncols() {
                return Err(Error::Dimension(format!(
                    "phi is {0}x{0} but the solution has {1} factors",
                    phi.order(),
                    lambda.ncols()
                )));
            }
            lambda * phi.matrix() * lambda.transpose()
        }
    };
    SymMatrix::from_matrix(m)
}
