//! Gradient-projection factor rotation in orthogonal and oblique modes.
//!
//! All criteria are expressed as minimization problems (Varimax is
//! negated), optimized over orthonormal transforms (orthogonal mode) or
//! unit-column transforms (oblique mode) with the projection/line-search
//! scheme of the gradient projection algorithm family.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::extraction::LoadingMatrix;
use crate::linalg::SymMatrix;
use crate::rng::Rng;

/// Rotation criterion. Target carries the target loading matrix.
#[derive(Debug, Clone)]
pub enum Criterion {
    Varimax,
    Parsimax,
    Infomax,
    Target(DMatrix<f64>),
}

impl Criterion {
    pub fn tag(&self) -> &'static str {
        match self {
            Criterion::Varimax => "varimax",
            Criterion::Parsimax => "parsimax",
            Criterion::Infomax => "infomax",
            Criterion::Target(_) => "target",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Orthogonal,
    Oblique,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Orthogonal => write!(f, "orthogonal"),
            Mode::Oblique => write!(f, "oblique"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RotationOpts {
    /// Number of random orthonormal starts tried in addition to the
    /// identity start.
    pub random_starts: usize,
    pub max_iter: usize,
    /// Stall tolerance: a failed line search still counts as converged
    /// when the projected gradient norm is below sqrt(tol).
    pub tol: f64,
    /// Seed for the random starts; fixed so rotations are reproducible.
    pub seed: u64,
    /// Kaiser row normalization before rotation.
    pub normalize: bool,
}

impl Default for RotationOpts {
    fn default() -> Self {
        Self {
            random_starts: 10,
            max_iter: 1000,
            tol: 1e-9,
            seed: 0x5EED_0001,
            normalize: false,
        }
    }
}

/// Rotated pattern, transformation and factor correlations.
#[derive(Debug, Clone)]
pub struct RotationSolution {
    pub pattern: LoadingMatrix,
    /// The transformation T; pattern = Λ (T')⁻¹.
    pub transform: DMatrix<f64>,
    /// Factor correlations Φ = T'T (identity in orthogonal mode).
    pub phi: SymMatrix,
    pub criterion_value: f64,
    pub criterion: String,
    pub mode: Mode,
    /// Index of the winning start; 0 is the identity start.
    pub random_start_index: usize,
    pub converged: bool,
    /// Criterion values across accepted iterates of the winning start.
    pub trace: Vec<f64>,
}

/// Criterion value and its gradient with respect to the rotated
/// loadings. Both are for the minimization form of the criterion.
pub fn criterion_value_and_gradient(
    loadings: &DMatrix<f64>,
    criterion: &Criterion,
) -> Result<(f64, DMatrix<f64>)> {
    if loadings.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { i: 0, j: 0 });
    }
    let (p, q) = (loadings.nrows(), loadings.ncols());
    match criterion {
        Criterion::Varimax => {
            let sq = loadings.map(|v| v * v);
            let mut centered = sq.clone();
            for j in 0..q {
                let mean = sq.column(j).mean();
                for i in 0..p {
                    centered[(i, j)] -= mean;
                }
            }
            let f = -0.25 * centered.iter().map(|v| v * v).sum::<f64>();
            let grad = -loadings.component_mul(&centered);
            Ok((f, grad))
        }
        Criterion::Parsimax => {
            let kappa = (q as f64 - 1.0) / (p as f64 + q as f64 - 2.0);
            crawford_ferguson(loadings, kappa)
        }
        Criterion::Infomax => infomax(loadings),
        Criterion::Target(target) => {
            if target.nrows() != p || target.ncols() != q {
                return Err(Error::Dimension(format!(
                    "target is {}x{}, loadings are {p}x{q}",
                    target.nrows(),
                    target.ncols()
                )));
            }
            let diff = loadings - target;
            let f = diff.iter().map(|v| v * v).sum();
            Ok((f, 2.0 * diff))
        }
    }
}

/// Crawford-Ferguson family criterion with row/column weight kappa.
pub fn crawford_ferguson(loadings: &DMatrix<f64>, kappa: f64) -> Result<(f64, DMatrix<f64>)> {
    let (p, q) = (loadings.nrows(), loadings.ncols());
    let sq = loadings.map(|v| v * v);
    // row term: Q (N_q), with N = ones - I; column term: (M_p) Q
    let mut qn = DMatrix::zeros(p, q);
    for i in 0..p {
        let row_sum: f64 = sq.row(i).iter().sum();
        for j in 0..q {
            qn[(i, j)] = row_sum - sq[(i, j)];
        }
    }
    let mut mq = DMatrix::zeros(p, q);
    for j in 0..q {
        let col_sum: f64 = sq.column(j).iter().sum();
        for i in 0..p {
            mq[(i, j)] = col_sum - sq[(i, j)];
        }
    }
    let row_part: f64 = sq.iter().zip(qn.iter()).map(|(a, b)| a * b).sum();
    let col_part: f64 = sq.iter().zip(mq.iter()).map(|(a, b)| a * b).sum();
    let f = 0.25 * ((1.0 - kappa) * row_part + kappa * col_part);
    let grad = (1.0 - kappa) * loadings.component_mul(&qn) + kappa * loadings.component_mul(&mq);
    Ok((f, grad))
}

fn infomax(loadings: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let (p, q) = (loadings.nrows(), loadings.ncols());
    let sq = loadings.map(|v| v * v);
    let total: f64 = sq.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateLoadings);
    }
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let e = sq.map(|v| v / total);
    let row_sums: Vec<f64> = (0..p).map(|i| e.row(i).iter().sum()).collect();
    let col_sums: Vec<f64> = (0..q).map(|j| e.column(j).iter().sum()).collect();
    let q0: f64 = -e.iter().map(|&v| xlogx(v)).sum::<f64>();
    let q1: f64 = -row_sums.iter().map(|&v| xlogx(v)).sum::<f64>();
    let q2: f64 = -col_sums.iter().map(|&v| xlogx(v)).sum::<f64>();
    let f = (q as f64).ln() + q0 - q1 - q2;

    // d f / d S_ij, with S = L squared; zero entries contribute nothing
    // because the outer factor 2 L_ij vanishes there
    let h = |x: f64| if x > 0.0 { -(x.ln() + 1.0) } else { 0.0 };
    let h_mean: f64 = e.iter().map(|&v| v * h(v)).sum();
    let h1: Vec<f64> = row_sums.iter().map(|&v| h(v)).collect();
    let h1_mean: f64 = row_sums.iter().zip(&h1).map(|(a, b)| a * b).sum();
    let h2: Vec<f64> = col_sums.iter().map(|&v| h(v)).collect();
    let h2_mean: f64 = col_sums.iter().zip(&h2).map(|(a, b)| a * b).sum();
    let mut grad = DMatrix::zeros(p, q);
    for j in 0..q {
        for i in 0..p {
            let l = loadings[(i, j)];
            if l == 0.0 {
                continue;
            }
            let d = (h(e[(i, j)]) - h_mean) - (h1[i] - h1_mean) - (h2[j] - h2_mean);
            grad[(i, j)] = 2.0 * l * d / total;
        }
    }
    Ok((f, grad))
}

fn random_orthonormal(q: usize, rng: &mut Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(q, q, |_, _| rng.next_normal());
    let qr = m.qr();
    let mut t = qr.q();
    // fix the sign convention so the factorization is unique
    let r = qr.r();
    for j in 0..q {
        if r[(j, j)] < 0.0 {
            for i in 0..q {
                t[(i, j)] = -t[(i, j)];
            }
        }
    }
    t
}

struct StartResult {
    pattern: DMatrix<f64>,
    transform: DMatrix<f64>,
    value: f64,
    converged: bool,
    trace: Vec<f64>,
}

/// Rotate an orthogonal loading solution under the given criterion.
///
/// The best of `random_starts` random orthonormal starts plus the
/// identity start is returned; ties go to the earliest start. Column
/// signs are standardized so the largest-magnitude loading in each
/// column is positive.
pub fn rotate(
    lambda: &LoadingMatrix,
    criterion: &Criterion,
    mode: Mode,
    opts: &RotationOpts,
) -> Result<RotationSolution> {
    let q = lambda.q();
    let a_raw = lambda.matrix().clone();
    let (a, row_scale) = if opts.normalize {
        let mut scale = vec![1.0; lambda.p()];
        let mut normed = a_raw.clone();
        for i in 0..lambda.p() {
            let h = a_raw.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if h > 1e-12 {
                scale[i] = h;
                for j in 0..q {
                    normed[(i, j)] /= h;
                }
            }
        }
        (normed, Some(scale))
    } else {
        (a_raw.clone(), None)
    };

    if q == 1 {
        let (value, _) = criterion_value_and_gradient(&a_raw, criterion)?;
        let mut sol = RotationSolution {
            pattern: lambda.clone(),
            transform: DMatrix::identity(1, 1),
            phi: SymMatrix::identity(1),
            criterion_value: value,
            criterion: criterion.tag().to_string(),
            mode,
            random_start_index: 0,
            converged: true,
            trace: vec![value],
        };
        standardize_signs(&mut sol)?;
        return Ok(sol);
    }
    if a.rank(1e-10) < q {
        return Err(Error::Input(
            "loading matrix must have full column rank for rotation".into(),
        ));
    }

    // orthogonal target rotation has the closed-form Procrustes solution
    if let (Criterion::Target(target), Mode::Orthogonal) = (criterion, mode) {
        let svd = (a.transpose() * target).svd(true, true);
        let u = svd.u.as_ref().unwrap();
        let vt = svd.v_t.as_ref().unwrap();
        let t = u * vt;
        let pattern = &a * &t;
        let (value, _) = criterion_value_and_gradient(&pattern, criterion)?;
        let pattern = denormalize(pattern, &row_scale);
        let mut sol = RotationSolution {
            pattern: LoadingMatrix::with_labels(
                pattern,
                lambda.row_labels().to_vec(),
                lambda.col_labels().to_vec(),
            )?,
            transform: t,
            phi: SymMatrix::identity(q),
            criterion_value: value,
            criterion: criterion.tag().to_string(),
            mode,
            random_start_index: 0,
            converged: true,
            trace: vec![value],
        };
        standardize_signs(&mut sol)?;
        return Ok(sol);
    }

    let mut rng = Rng::seed_from(opts.seed);
    let mut best: Option<(usize, StartResult)> = None;
    for start_idx in 0..=opts.random_starts {
        let t0 = if start_idx == 0 {
            DMatrix::identity(q, q)
        } else {
            random_orthonormal(q, &mut rng)
        };
        let result = match mode {
            Mode::Orthogonal => gp_orthogonal(&a, t0, criterion, opts)?,
            Mode::Oblique => gp_oblique(&a, t0, criterion, opts)?,
        };
        let better = match &best {
            None => true,
            Some((_, b)) => result.value < b.value - 1e-12,
        };
        if better {
            best = Some((start_idx, result));
        }
    }
    let (start_idx, result) = best.ok_or_else(|| Error::RotationFailed("no start produced a solution".into()))?;
    let phi = match mode {
        Mode::Orthogonal => SymMatrix::identity(q),
        Mode::Oblique => SymMatrix::from_matrix(result.transform.transpose() * &result.transform)?,
    };
    let pattern = denormalize(result.pattern, &row_scale);
    let mut sol = RotationSolution {
        pattern: LoadingMatrix::with_labels(
            pattern,
            lambda.row_labels().to_vec(),
            lambda.col_labels().to_vec(),
        )?,
        transform: result.transform,
        phi,
        criterion_value: result.value,
        criterion: criterion.tag().to_string(),
        mode,
        random_start_index: start_idx,
        converged: result.converged,
        trace: result.trace,
    };
    standardize_signs(&mut sol)?;
    Ok(sol)
}

fn denormalize(mut pattern: DMatrix<f64>, row_scale: &Option<Vec<f64>>) -> DMatrix<f64> {
    if let Some(scale) = row_scale {
        for i in 0..pattern.nrows() {
            for j in 0..pattern.ncols() {
                pattern[(i, j)] *= scale[i];
            }
        }
    }
    pattern
}

/// Flip column signs so the dominant loading of each column is
/// positive, keeping pattern, T and Φ consistent.
fn standardize_signs(sol: &mut RotationSolution) -> Result<()> {
    let p = sol.pattern.p();
    let q = sol.pattern.q();
    let mut pattern = sol.pattern.matrix().clone();
    let mut phi = sol.phi.matrix().clone();
    for j in 0..q {
        let mut best = 0usize;
        for i in 0..p {
            if pattern[(i, j)].abs() > pattern[(best, j)].abs() {
                best = i;
            }
        }
        if pattern[(best, j)] < 0.0 {
            for i in 0..p {
                pattern[(i, j)] = -pattern[(i, j)];
            }
            for i in 0..q {
                sol.transform[(i, j)] = -sol.transform[(i, j)];
            }
            for k in 0..q {
                phi[(j, k)] = -phi[(j, k)];
                phi[(k, j)] = -phi[(k, j)];
            }
        }
    }
    sol.phi = SymMatrix::from_matrix(phi)?;
    sol.pattern = LoadingMatrix::with_labels(
        pattern,
        sol.pattern.row_labels().to_vec(),
        sol.pattern.col_labels().to_vec(),
    )?;
    Ok(())
}

const GRADIENT_TOL: f64 = 1e-9;

fn gp_orthogonal(
    a: &DMatrix<f64>,
    t0: DMatrix<f64>,
    criterion: &Criterion,
    opts: &RotationOpts,
) -> Result<StartResult> {
    let q = t0.ncols();
    let mut t = t0;
    let mut pattern = a * &t;
    let (mut f, mut gq) = criterion_value_and_gradient(&pattern, criterion)?;
    let mut g = a.transpose() * &gq;
    let mut alpha = 1.0;
    let mut trace = vec![f];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let m = t.transpose() * &g;
        let sym = 0.5 * (&m + m.transpose());
        let gp = &g - &t * sym;
        let s_norm_sq: f64 = gp.iter().map(|v| v * v).sum();
        if s_norm_sq.sqrt() < GRADIENT_TOL {
            converged = true;
            break;
        }
        alpha *= 2.0;
        let mut accepted = false;
        for _ in 0..40 {
            let x = &t - alpha * &gp;
            let svd = x.svd(true, true);
            let tt = svd.u.as_ref().unwrap() * svd.v_t.as_ref().unwrap();
            let cand_pattern = a * &tt;
            let (ft, gqt) = criterion_value_and_gradient(&cand_pattern, criterion)?;
            if ft < f - 0.5 * s_norm_sq * alpha {
                t = tt;
                pattern = cand_pattern;
                f = ft;
                gq = gqt;
                g = a.transpose() * &gq;
                trace.push(f);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // a stalled line search at a small projected gradient is a
            // converged solution at line-search resolution
            converged = s_norm_sq.sqrt() < opts.tol.sqrt();
            break;
        }
    }
    let _ = q;
    Ok(StartResult {
        pattern,
        transform: t,
        value: f,
        converged,
        trace,
    })
}

fn gp_oblique(
    a: &DMatrix<f64>,
    t0: DMatrix<f64>,
    criterion: &Criterion,
    opts: &RotationOpts,
) -> Result<StartResult> {
    let q = t0.ncols();
    let mut t = t0;
    let inv = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        m.clone()
            .try_inverse()
            .ok_or_else(|| Error::RotationFailed("singular oblique transform".into()))
    };
    let mut ti = inv(&t)?;
    let mut pattern = a * ti.transpose();
    let (mut f, mut gq) = criterion_value_and_gradient(&pattern, criterion)?;
    let mut g = -(pattern.transpose() * &gq * &ti).transpose();
    let mut alpha = 1.0;
    let mut trace = vec![f];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        // project out the component that changes column lengths
        let mut gp = g.clone();
        for j in 0..q {
            let d: f64 = (0..q).map(|i| t[(i, j)] * g[(i, j)]).sum();
            for i in 0..q {
                gp[(i, j)] -= t[(i, j)] * d;
            }
        }
        let s_norm_sq: f64 = gp.iter().map(|v| v * v).sum();
        if s_norm_sq.sqrt() < GRADIENT_TOL {
            converged = true;
            break;
        }
        alpha *= 2.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut x = &t - alpha * &gp;
            let mut ok = true;
            for j in 0..q {
                let norm: f64 = (0..q).map(|i| x[(i, j)] * x[(i, j)]).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    ok = false;
                    break;
                }
                for i in 0..q {
                    x[(i, j)] /= norm;
                }
            }
            // unbounded criteria (varimax has no oblique lower bound)
            // are kept away from singular transforms
            if ok && x.determinant().abs() > 1e-6 {
                let tti = inv(&x)?;
                let cand_pattern = a * tti.transpose();
                let (ft, gqt) = criterion_value_and_gradient(&cand_pattern, criterion)?;
                if ft < f - 0.5 * s_norm_sq * alpha {
                    t = x;
                    ti = tti;
                    pattern = cand_pattern;
                    f = ft;
                    gq = gqt;
                    g = -(pattern.transpose() * &gq * &ti).transpose();
                    trace.push(f);
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            converged = s_norm_sq.sqrt() < opts.tol.sqrt();
            break;
        }
    }
    Ok(StartResult {
        pattern,
        transform: t,
        value: f,
        converged,
        trace,
    })
}
