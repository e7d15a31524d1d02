//! Factor score predictor weights and validity diagnostics.
//!
//! All predictors are linear: scores = B'x with B of shape p x q. The
//! weight formulas are instantiated from a fitted solution together
//! with its rotation, so pattern and factor correlations always refer
//! to the rotated model.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::extraction::{FactorSolution, Method};
use crate::linalg::{self, MomentMode, SqrtKind, SymMatrix};
use crate::rotation::{Mode, RotationSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    BestLinear,
    Takeuchi,
    Krijnen,
    Bartlett,
    Harman,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::BestLinear,
        Family::Takeuchi,
        Family::Krijnen,
        Family::Bartlett,
        Family::Harman,
    ];
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            Family::BestLinear => "best_linear",
            Family::Takeuchi => "takeuchi",
            Family::Krijnen => "krijnen",
            Family::Bartlett => "bartlett",
            Family::Harman => "harman",
        };
        write!(f, "{tag}")
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best_linear" => Ok(Family::BestLinear),
            // Anderson-Rubin's orthogonal predictor coincides with
            // Takeuchi's, so it is exposed as an alias
            "takeuchi" | "anderson_rubin" | "anderson-rubin" => Ok(Family::Takeuchi),
            "krijnen" => Ok(Family::Krijnen),
            "bartlett" => Ok(Family::Bartlett),
            "harman" => Ok(Family::Harman),
            other => Err(Error::Input(format!(
                "unknown predictor family {other:?}; expected best_linear, takeuchi, krijnen, bartlett or harman"
            ))),
        }
    }
}

/// A linear factor score predictor.
#[derive(Debug, Clone)]
pub struct ScorePredictor {
    pub family: Family,
    pub model: Method,
    /// p x q weight matrix; scores = B'x.
    pub weights: DMatrix<f64>,
    /// Per-factor standard deviation of the predictor, sqrt(diag(B'SB)).
    pub scale: Vec<f64>,
}

/// Validity diagnostics for a score predictor.
#[derive(Debug, Clone)]
pub struct ValidityReport {
    /// Cor(predictor_j, factor_j) per factor.
    pub determinacy: Vec<f64>,
    /// q x q Cor(predictor, factor).
    pub cross_correlations: DMatrix<f64>,
    /// q x q Cor(predictor, predictor).
    pub predictor_intercorrelations: DMatrix<f64>,
    /// Factor correlations of the rotated model.
    pub phi: DMatrix<f64>,
    /// Frobenius norm of the off-diagonal difference between the
    /// predictor-reproduced moment matrix and the model-reproduced one.
    pub structural_residual: f64,
}

fn sym_from(m: DMatrix<f64>) -> Result<SymMatrix> {
    SymMatrix::from_matrix(m).map_err(|_| Error::RankDeficientWeights)
}

/// Weight matrix for the requested predictor family.
///
/// The pattern and factor correlations come from `rotation`; `s` is the
/// moment matrix the solution was fitted to. Takeuchi's predictor is
/// only defined for orthogonal rotations.
pub fn predictor_weights(
    solution: &FactorSolution,
    rotation: &RotationSolution,
    family: Family,
    s: &SymMatrix,
) -> Result<ScorePredictor> {
    let lambda = rotation.pattern.matrix();
    let p = lambda.nrows();
    if s.order() != p {
        return Err(Error::Dimension(format!(
            "moment matrix order {} does not match {p} variables",
            s.order()
        )));
    }
    let phi = rotation.phi.matrix();
    let s_inv = linalg::sym_inverse(s)?;

    let weights = match (solution.method, family) {
        (_, Family::Harman) => {
            let gram = sym_from(lambda.transpose() * lambda)?;
            lambda * linalg::sym_inverse(&gram)?.matrix()
        }
        (_, Family::Takeuchi) => {
            if rotation.mode != Mode::Orthogonal {
                return Err(Error::OrthogonalPredictorObliqueMode);
            }
            let g = sym_from(lambda.transpose() * s_inv.matrix() * lambda)?;
            let g_mh = linalg::sym_sqrt(&g, SqrtKind::MinusHalf)
                .map_err(|_| Error::RankDeficientWeights)?;
            s_inv.matrix() * lambda * g_mh.matrix()
        }
        (_, Family::BestLinear) => s_inv.matrix() * lambda * phi,
        (Method::Cfm, Family::Krijnen) => {
            let g = sym_from(lambda.transpose() * s_inv.matrix() * lambda)?;
            s_inv.matrix() * lambda * linalg::sym_inverse(&g)?.matrix()
        }
        (Method::Cfm, Family::Bartlett) => {
            for (i, &u) in solution.uniqueness.iter().enumerate() {
                if u <= 1e-12 {
                    return Err(Error::ZeroUniqueness {
                        name: rotation.pattern.row_labels()[i].clone(),
                    });
                }
            }
            let psi_inv2 = DMatrix::from_fn(p, p, |i, j| {
                if i == j { 1.0 / solution.uniqueness[i] } else { 0.0 }
            });
            let g = sym_from(lambda.transpose() * &psi_inv2 * lambda)?;
            psi_inv2 * lambda * linalg::sym_inverse(&g)?.matrix()
        }
        // the score-predictor model collapses the weighted least
        // squares predictor to the conditionally unbiased one, so both
        // share the Krijnen form
        (Method::Spfa, Family::Krijnen) | (Method::Spfa, Family::Bartlett) => {
            let g = sym_from(lambda.transpose() * s_inv.matrix() * lambda)?;
            s_inv.matrix() * lambda * linalg::sym_inverse(&g)?.matrix()
        }
    };

    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficientWeights);
    }
    let cov = weights.transpose() * s.matrix() * &weights;
    let mut scale = Vec::with_capacity(weights.ncols());
    for j in 0..weights.ncols() {
        let v = cov[(j, j)];
        if v <= 0.0 {
            return Err(Error::RankDeficientWeights);
        }
        scale.push(v.sqrt());
    }
    Ok(ScorePredictor {
        family,
        model: solution.method,
        weights,
        scale,
    })
}

/// Moment matrix reproduced from the predictor, S B (B'SB)^-1 B' S.
pub fn reproduced_from_predictor(
    predictor: &ScorePredictor,
    s: &SymMatrix,
) -> Result<SymMatrix> {
    let b = &predictor.weights;
    let cov = sym_from(b.transpose() * s.matrix() * b)?;
    let cov_inv = linalg::sym_inverse(&cov).map_err(|_| Error::RankDeficientWeights)?;
    let sb = s.matrix() * b;
    SymMatrix::from_matrix(&sb * cov_inv.matrix() * sb.transpose())
}

/// Determinacy, correlation preservation and structural similarity
/// diagnostics for a predictor under the rotated model.
pub fn validity_report(
    predictor: &ScorePredictor,
    rotation: &RotationSolution,
    s: &SymMatrix,
) -> Result<ValidityReport> {
    let b = &predictor.weights;
    let lambda = rotation.pattern.matrix();
    let phi = rotation.phi.matrix();
    let q = lambda.ncols();

    let clamp = |v: f64| v.clamp(-1.0, 1.0);
    // Cov(predictor, factor) = B'ΛΦ; factors have unit variance
    let cov_cross = b.transpose() * lambda * phi;
    let cross = DMatrix::from_fn(q, q, |i, j| clamp(cov_cross[(i, j)] / predictor.scale[i]));
    let determinacy = (0..q).map(|j| cross[(j, j)]).collect();
    let cov_pred = b.transpose() * s.matrix() * b;
    let inter = DMatrix::from_fn(q, q, |i, j| {
        clamp(cov_pred[(i, j)] / (predictor.scale[i] * predictor.scale[j]))
    });

    let sigma_r = reproduced_from_predictor(predictor, s)?;
    let model = lambda * phi * lambda.transpose();
    let mut resid_sq = 0.0;
    for j in 0..s.order() {
        for i in 0..s.order() {
            if i != j {
                let d = sigma_r.matrix()[(i, j)] - model[(i, j)];
                resid_sq += d * d;
            }
        }
    }
    Ok(ValidityReport {
        determinacy,
        cross_correlations: cross,
        predictor_intercorrelations: inter,
        phi: phi.clone(),
        structural_residual: resid_sq.sqrt(),
    })
}

/// Apply a predictor to observed rows: row i of the output is B'x_i
/// with x_i centered, and standardized when the weights were computed
/// from a correlation matrix.
pub fn score_rows(
    predictor: &ScorePredictor,
    data: &DMatrix<f64>,
    mode: MomentMode,
) -> Result<DMatrix<f64>> {
    let (n, p) = (data.nrows(), data.ncols());
    if p != predictor.weights.nrows() {
        return Err(Error::Dimension(format!(
            "data has {p} columns but weights expect {}",
            predictor.weights.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::Input("scoring needs at least 2 rows".into()));
    }
    let mut x = data.clone();
    for j in 0..p {
        let mean = x.column(j).mean();
        for i in 0..n {
            x[(i, j)] -= mean;
        }
        if mode == MomentMode::Correlation {
            let var = x.column(j).iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0);
            if var <= 0.0 {
                return Err(Error::Input(format!(
                    "column {} has zero variance; cannot standardize",
                    j + 1
                )));
            }
            let sd = var.sqrt();
            for i in 0..n {
                x[(i, j)] /= sd;
            }
        }
    }
    Ok(x * &predictor.weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{minres_fit, spfa_fit, FitOptions};
    use crate::rng::Rng;
    use crate::rotation::{rotate, Criterion, RotationOpts};
    use crate::simulation::{align_columns, build_population, generate_sample_with_factors};

    fn fitted_correlation(q: usize, sl: f64, n: usize, seed: u64) -> SymMatrix {
        let spec = build_population(q, sl).unwrap();
        let (data, _) = generate_sample_with_factors(&spec, n, seed).unwrap();
        linalg::sample_moment_matrix(&data, MomentMode::Correlation, None).unwrap()
    }

    fn rotated(
        solution: &FactorSolution,
        mode: Mode,
    ) -> RotationSolution {
        // parsimax in oblique mode: its criterion is bounded below, so
        // oblique transforms cannot degenerate the way varimax allows
        let criterion = match mode {
            Mode::Orthogonal => Criterion::Varimax,
            Mode::Oblique => Criterion::Parsimax,
        };
        rotate(
            &solution.loadings,
            &criterion,
            mode,
            &RotationOpts::default(),
        )
        .unwrap()
    }

    #[test]
    fn cfm_best_linear_matches_hand_solved_system() {
        // p=3, q=1, lambda = (.8, .6, .7): solve Sigma b = lambda by
        // Cramer's rule as the oracle
        let lam = [0.8, 0.6, 0.7];
        let mut sig = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                sig[(i, j)] = if i == j { 1.0 } else { lam[i] * lam[j] };
            }
        }
        let s = SymMatrix::from_matrix(sig.clone()).unwrap();
        let fit = minres_fit(&s, 1, &FitOptions::default()).unwrap();
        let rot = rotated(&fit, Mode::Orthogonal);
        let pred = predictor_weights(&fit, &rot, Family::BestLinear, &s).unwrap();

        let lambda_hat = rot.pattern.matrix();
        let det3 = |m: &DMatrix<f64>| -> f64 {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        };
        let d = det3(&sig);
        for i in 0..3 {
            let mut numer = sig.clone();
            for r in 0..3 {
                numer[(r, i)] = lambda_hat[(r, 0)];
            }
            let expect = det3(&numer) / d;
            assert!((pred.weights[(i, 0)] - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn score_predictor_identities_hold_after_fit() {
        for (mode, seed) in [(Mode::Orthogonal, 11u64), (Mode::Oblique, 12u64)] {
            let s = fitted_correlation(2, 0.70, 300, seed);
            let fit = spfa_fit(&s, 2, &FitOptions::default()).unwrap();
            let rot = rotated(&fit, mode);
            let bl = predictor_weights(&fit, &rot, Family::BestLinear, &s).unwrap();
            let kr = predictor_weights(&fit, &rot, Family::Krijnen, &s).unwrap();
            let ba = predictor_weights(&fit, &rot, Family::Bartlett, &s).unwrap();
            assert!((&bl.weights - &kr.weights).amax() < 1e-10);
            assert!((&ba.weights - &kr.weights).amax() < 1e-10);
            for sc in &bl.scale {
                assert!((sc - 1.0).abs() < 1e-8, "scale {sc}");
            }
            if mode == Mode::Orthogonal {
                let ta = predictor_weights(&fit, &rot, Family::Takeuchi, &s).unwrap();
                assert!((&ta.weights - &bl.weights).amax() < 1e-10);
            }
            let report = validity_report(&bl, &rot, &s).unwrap();
            for d in &report.determinacy {
                assert!((d - 1.0).abs() < 1e-8, "determinacy {d}");
            }
            assert!(
                (&report.predictor_intercorrelations - rot.phi.matrix()).amax() < 1e-8
            );
            assert!(report.structural_residual < 1e-8);
            let ba_report = validity_report(&ba, &rot, &s).unwrap();
            let cov_ba = ba.weights.transpose() * s.matrix() * &ba.weights;
            assert!((cov_ba - rot.phi.matrix()).amax() < 1e-8);
            assert!(
                (&ba_report.cross_correlations - rot.phi.matrix()).amax() < 1e-8
            );
        }
    }

    #[test]
    fn structural_residual_survives_model_error() {
        let s0 = fitted_correlation(2, 0.60, 400, 5);
        let p = s0.order();
        let mut rng = Rng::seed_from(77);
        let mut m = s0.matrix().clone();
        for j in 0..p {
            for i in 0..j {
                let bump = 0.05 * (2.0 * rng.next_f64() - 1.0);
                m[(i, j)] += bump;
                m[(j, i)] += bump;
            }
        }
        let s = SymMatrix::from_matrix(m).unwrap();
        let fit = spfa_fit(&s, 2, &FitOptions::default()).unwrap();
        let rot = rotated(&fit, Mode::Orthogonal);
        let bl = predictor_weights(&fit, &rot, Family::BestLinear, &s).unwrap();
        let report = validity_report(&bl, &rot, &s).unwrap();
        assert!(report.structural_residual < 1e-8);
    }

    #[test]
    fn reproduced_matrix_for_best_linear_is_model_matrix() {
        let s = fitted_correlation(2, 0.50, 250, 8);
        let fit = spfa_fit(&s, 2, &FitOptions::default()).unwrap();
        let rot = rotated(&fit, Mode::Orthogonal);
        let bl = predictor_weights(&fit, &rot, Family::BestLinear, &s).unwrap();
        let sigma_r = reproduced_from_predictor(&bl, &s).unwrap();
        let l = fit.loadings.matrix();
        let s_inv = linalg::sym_inverse(&s).unwrap();
        let g = SymMatrix::from_matrix(l.transpose() * s_inv.matrix() * l).unwrap();
        let expect = l * linalg::sym_inverse(&g).unwrap().matrix() * l.transpose();
        assert!((sigma_r.matrix() - expect).amax() < 1e-8);
    }

    #[test]
    fn unit_selector_weights_reproduce_scaled_outer_product() {
        let s = fitted_correlation(1, 0.70, 120, 3);
        let p = s.order();
        let mut b = DMatrix::zeros(p, 1);
        b[(0, 0)] = 1.0;
        let pred = ScorePredictor {
            family: Family::BestLinear,
            model: Method::Cfm,
            scale: vec![s.matrix()[(0, 0)].sqrt()],
            weights: b,
        };
        let sigma_r = reproduced_from_predictor(&pred, &s).unwrap();
        for i in 0..p {
            for j in 0..p {
                let expect = s.matrix()[(i, 0)] * s.matrix()[(0, j)] / s.matrix()[(0, 0)];
                assert!((sigma_r.matrix()[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn harman_predictor_has_inflated_variance_and_imperfect_determinacy() {
        let s = fitted_correlation(2, 0.70, 300, 21);
        let fit = spfa_fit(&s, 2, &FitOptions::default()).unwrap();
        let rot = rotated(&fit, Mode::Orthogonal);
        let ha = predictor_weights(&fit, &rot, Family::Harman, &s).unwrap();
        let cov = ha.weights.transpose() * s.matrix() * &ha.weights;
        for j in 0..2 {
            assert!(cov[(j, j)] >= 1.0 - 1e-10, "variance {}", cov[(j, j)]);
        }
        let report = validity_report(&ha, &rot, &s).unwrap();
        for d in &report.determinacy {
            assert!(*d < 1.0, "determinacy {d}");
        }
        // the reproduced matrix departs from the model matrix
        assert!(report.structural_residual > 1e-4);
    }

    #[test]
    fn cfm_determinacy_below_one_with_positive_uniqueness() {
        let s = fitted_correlation(2, 0.80, 500, 31);
        let fit = minres_fit(&s, 2, &FitOptions::default()).unwrap();
        assert!(fit.uniqueness.iter().all(|&u| u > 0.0));
        let rot = rotated(&fit, Mode::Orthogonal);
        let bl = predictor_weights(&fit, &rot, Family::BestLinear, &s).unwrap();
        let report = validity_report(&bl, &rot, &s).unwrap();
        for d in &report.determinacy {
            assert!(*d < 1.0 - 1e-6, "determinacy {d}");
        }
    }

    #[test]
    fn cfm_bartlett_is_conditionally_unbiased() {
        let s = fitted_correlation(2, 0.70, 300, 41);
        let fit = minres_fit(&s, 2, &FitOptions::default()).unwrap();
        let rot = rotated(&fit, Mode::Orthogonal);
        let ba = predictor_weights(&fit, &rot, Family::Bartlett, &s).unwrap();
        let bt_l = ba.weights.transpose() * rot.pattern.matrix();
        assert!((bt_l - DMatrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn bartlett_rejects_zero_uniqueness_by_name() {
        let s = fitted_correlation(2, 0.70, 300, 42);
        let mut fit = minres_fit(&s, 2, &FitOptions::default()).unwrap();
        fit.uniqueness[3] = 0.0;
        let rot = rotated(&fit, Mode::Orthogonal);
        match predictor_weights(&fit, &rot, Family::Bartlett, &s) {
            Err(Error::ZeroUniqueness { name }) => assert_eq!(name, "X4"),
            other => panic!("expected zero-uniqueness error, got {other:?}"),
        }
    }

    #[test]
    fn takeuchi_rejects_oblique_rotation() {
        let s = fitted_correlation(2, 0.70, 300, 43);
        let fit = spfa_fit(&s, 2, &FitOptions::default()).unwrap();
        let rot = rotated(&fit, Mode::Oblique);
        assert!(matches!(
            predictor_weights(&fit, &rot, Family::Takeuchi, &s),
            Err(Error::OrthogonalPredictorObliqueMode)
        ));
    }

    #[test]
    fn zero_centered_rows_score_to_zero() {
        let s = fitted_correlation(1, 0.60, 100, 44);
        let fit = minres_fit(&s, 1, &FitOptions::default()).unwrap();
        let rot = rotated(&fit, Mode::Orthogonal);
        let bl = predictor_weights(&fit, &rot, Family::BestLinear, &s).unwrap();
        // two rows mirrored around zero: after centering the mean is
        // removed, so scores are opposite, and a symmetric pair sums to 0
        let mut data = DMatrix::zeros(2, s.order());
        for j in 0..s.order() {
            data[(0, j)] = 0.5;
            data[(1, j)] = -0.5;
        }
        let scores = score_rows(&bl, &data, MomentMode::Covariance).unwrap();
        assert!((scores[(0, 0)] + scores[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_scores_match_analytic_properties() {
        let spec = build_population(2, 0.80).unwrap();
        let (data, factors) = generate_sample_with_factors(&spec, 10_000, 314).unwrap();
        let s = linalg::sample_moment_matrix(&data, MomentMode::Correlation, None).unwrap();

        // SPFA best linear scores have unit variance
        let fit = spfa_fit(&s, 2, &FitOptions::default()).unwrap();
        let rot = rotated(&fit, Mode::Orthogonal);
        let bl = predictor_weights(&fit, &rot, Family::BestLinear, &s).unwrap();
        let scores = score_rows(&bl, &data, MomentMode::Correlation).unwrap();
        let n = scores.nrows() as f64;
        for j in 0..2 {
            let mean = scores.column(j).mean();
            let var = scores.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (n - 1.0);
            assert!((var - 1.0).abs() < 0.03, "variance {var}");
        }

        // CFM best linear scores correlate with the true factors at the
        // analytic determinacy
        let cfm = minres_fit(&s, 2, &FitOptions::default()).unwrap();
        let crot = rotated(&cfm, Mode::Orthogonal);
        let cbl = predictor_weights(&cfm, &crot, Family::BestLinear, &s).unwrap();
        let creport = validity_report(&cbl, &crot, &s).unwrap();
        let cscores = score_rows(&cbl, &data, MomentMode::Correlation).unwrap();
        let align = align_columns(crot.pattern.matrix(), spec.loadings.matrix());
        for j in 0..2 {
            let col = align.permutation[j];
            let sign = align.signs[j];
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            let mx = cscores.column(col).mean();
            let my = factors.column(j).mean();
            for i in 0..scores.nrows() {
                let x = sign * (cscores[(i, col)] - mx);
                let y = factors[(i, j)] - my;
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
            }
            let r = sxy / (sxx * syy).sqrt();
            let expect = creport.determinacy[col];
            assert!((r - expect).abs() < 0.03, "cor {r} vs determinacy {expect}");
        }
    }
}
