use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use wlasso::baselines::{holp_estimate, holp_select};
use wlasso::correlation::Dissimilarity;
use wlasso::lasso::{lambda_grid, lasso_path, support_of};
use wlasso::linalg::SymmetricMatrix;
use wlasso::wlasso::{wlasso_fit_timed, SigmaSource, SigmaSummary, WLassoConfig};

use crate::document::{one_based, ErrorInfo, FitParameters, MseCurves, PathReport, ResultDocument, SigmaReport};
use crate::io::{read_matrix, read_vector};
use crate::{emit, to_json, CliError, FitArgs, FitMethod};

/// Centers and scales the columns of `x` (sample sd) and centers `y`.
/// Constant columns are only centered.
pub fn standardize(x: &mut DMatrix<f64>, y: &mut DVector<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n - 1.0)).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
    let mean = y.sum() / n;
    y.add_scalar_mut(-mean);
}

fn method_name(m: FitMethod) -> &'static str {
    match m {
        FitMethod::Wlasso => "wlasso",
        FitMethod::Lasso => "lasso",
        FitMethod::Holp => "holp",
    }
}

fn dissimilarity_name(d: Dissimilarity) -> &'static str {
    match d {
        Dissimilarity::RowEuclidean => "row-euclidean",
        Dissimilarity::OneMinusCorrelation => "one-minus-r",
        Dissimilarity::OneMinusAbsCorrelation => "one-minus-abs-r",
    }
}

/// Builds the result document; numerical failures are recorded in its
/// `error` field rather than returned.
pub fn fit_document(args: &FitArgs) -> Result<ResultDocument, CliError> {
    let cfg = args.tuning.wlasso_config()?;
    let mut x = read_matrix(&args.x)?;
    let mut y = read_vector(&args.y)?;
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(CliError::Input(format!("X has {n} rows but y has {}", y.len())));
    }
    let sigma = match &args.sigma {
        Some(path) => {
            let m = read_matrix(path)?;
            if m.shape() != (p, p) {
                return Err(CliError::Input(format!("Σ is {}x{}, expected {p}x{p}", m.nrows(), m.ncols())));
            }
            Some(SymmetricMatrix::new(m).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    if args.standardize {
        standardize(&mut x, &mut y);
    }
    let dissimilarity: Dissimilarity = args.tuning.dissimilarity.into();
    let select_size = match args.method {
        FitMethod::Wlasso => None,
        _ => {
            let s = args.select_size.unwrap_or((n.min(p) / 2).max(1));
            if s == 0 || s > p {
                return Err(CliError::Input(format!("--select-size must lie in 1..={p}")));
            }
            Some(s)
        }
    };
    let params = FitParameters {
        x_path: args.x.display().to_string(),
        y_path: args.y.display().to_string(),
        sigma_path: args.sigma.as_ref().map(|p| p.display().to_string()),
        n,
        p,
        gamma: args.tuning.gamma,
        grid_count: args.tuning.grid_count,
        grid_ratio: args.tuning.grid_ratio,
        tol: args.tuning.tol,
        max_iter: args.tuning.max_iter,
        standardize: args.standardize,
        dissimilarity: dissimilarity_name(dissimilarity).into(),
        select_size,
    };
    let mut doc = ResultDocument::new(method_name(args.method), params);
    let outcome = match args.method {
        FitMethod::Wlasso => fit_wlasso(&mut doc, &x, &y, sigma, dissimilarity, &cfg),
        FitMethod::Lasso => fit_lasso(&mut doc, &x, &y, select_size.unwrap(), &cfg),
        FitMethod::Holp => fit_holp(&mut doc, &x, &y, select_size.unwrap()),
    };
    if let Err(e) = outcome {
        doc.error = Some(e);
    }
    Ok(doc)
}

fn fit_wlasso(
    doc: &mut ResultDocument,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma: Option<SymmetricMatrix>,
    dissimilarity: Dissimilarity,
    cfg: &WLassoConfig,
) -> Result<(), ErrorInfo> {
    let source = match sigma {
        Some(s) => SigmaSource::Known(s),
        None => SigmaSource::Estimate(dissimilarity),
    };
    let (fit, t) = wlasso_fit_timed(x, y, &source, cfg).map_err(|e| ErrorInfo {
        name: e.name().into(),
        message: e.to_string(),
        step: Some(e.step().into()),
    })?;
    let i = fit.lambda_hat_index;
    doc.selected = one_based(&fit.selected);
    doc.coefficients = fit.beta_hat[i].iter().copied().collect();
    doc.lambda_hat = Some(fit.lambda_hat);
    doc.k_hat = Some(fit.k_hat[i]);
    doc.m_hat = Some(fit.m_hat[i]);
    doc.sigma = Some(match &fit.sigma {
        SigmaSummary::Known => SigmaReport {
            source: "supplied".into(),
            rho: None,
            cluster_sizes: None,
            cluster_1: None,
            eigenvalues_clipped: fit.whitening_clipped,
        },
        SigmaSummary::Estimated(m) => SigmaReport {
            source: "estimated".into(),
            rho: Some(m.rho),
            cluster_sizes: Some(m.cluster_sizes),
            cluster_1: Some(one_based(&m.members(1))),
            eigenvalues_clipped: fit.whitening_clipped,
        },
    });
    doc.path = Some(PathReport {
        lambdas: fit.lambdas.clone(),
        coefficients: fit.beta_tilde0.iter().map(|b| b.iter().copied().collect()).collect(),
        objective: fit.objective.clone(),
        selected: fit.selections().iter().map(|s| one_based(s)).collect(),
        k_hat: Some(fit.k_hat.clone()),
        m_hat: Some(fit.m_hat.clone()),
        criterion: Some(fit.lambda_criterion()),
    });
    doc.mse_curves = Some(MseCurves { mse_tilde: fit.mse_tilde_curves[i].clone(), mse: fit.mse_curves[i].clone() });
    for (k, v) in [
        ("sigma_estimation", t.sigma_estimation),
        ("whitening", t.whitening),
        ("path_solve", t.path_solve),
        ("thresholding", t.thresholding),
        ("total", t.total()),
    ] {
        doc.timings.insert(k.into(), v.as_secs_f64());
    }
    Ok(())
}

/// Largest λ whose support has at least `s` variables, else the smallest λ.
pub fn lasso_level(supports: &[Vec<usize>], s: usize) -> usize {
    supports.iter().position(|sel| sel.len() >= s).unwrap_or(supports.len() - 1)
}

fn fit_lasso(
    doc: &mut ResultDocument,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    s: usize,
    cfg: &WLassoConfig,
) -> Result<(), ErrorInfo> {
    let clock = Instant::now();
    let err = |e: wlasso::lasso::LassoError| ErrorInfo { name: e.name().into(), message: e.to_string(), step: None };
    let grid = lambda_grid(x, y, cfg.grid.count, cfg.grid.ratio).map_err(err)?;
    let path = lasso_path(x, y, &grid, &cfg.solver).map_err(err)?;
    let supports: Vec<Vec<usize>> = path.coefficients.iter().map(support_of).collect();
    let k = lasso_level(&supports, s);
    doc.selected = one_based(&supports[k]);
    doc.coefficients = path.coefficients[k].iter().copied().collect();
    doc.lambda_hat = Some(grid.values()[k]);
    doc.path = Some(PathReport {
        lambdas: grid.values().to_vec(),
        coefficients: path.coefficients.iter().map(|b| b.iter().copied().collect()).collect(),
        objective: path.objective.clone(),
        selected: supports.iter().map(|s| one_based(s)).collect(),
        k_hat: None,
        m_hat: None,
        criterion: None,
    });
    doc.timings.insert("path_solve".into(), clock.elapsed().as_secs_f64());
    doc.timings.insert("total".into(), clock.elapsed().as_secs_f64());
    Ok(())
}

fn fit_holp(doc: &mut ResultDocument, x: &DMatrix<f64>, y: &DVector<f64>, s: usize) -> Result<(), ErrorInfo> {
    let clock = Instant::now();
    let err = |e: wlasso::baselines::BaselineError| ErrorInfo { name: e.name().into(), message: e.to_string(), step: None };
    let beta = holp_estimate(x, y).map_err(err)?;
    doc.selected = one_based(&holp_select(&beta, s).map_err(err)?);
    doc.coefficients = beta.iter().copied().collect();
    doc.timings.insert("total".into(), clock.elapsed().as_secs_f64());
    Ok(())
}

pub fn run(args: &FitArgs) -> Result<(), CliError> {
    let doc = fit_document(args)?;
    emit(args.out.as_deref(), &to_json(&doc)?)?;
    match doc.error {
        Some(e) => Err(CliError::Numerical { name: e.name, message: e.message }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_columns() {
        let mut x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 6.0, 5.0]);
        let mut y = DVector::from_vec(vec![1.0, 2.0, 6.0]);
        standardize(&mut x, &mut y);
        assert!(x.column(0).sum().abs() < 1e-12);
        assert!((x.column(0).norm_squared() / 2.0 - 1.0).abs() < 1e-12);
        assert_eq!(x.column(1).amax(), 0.0);
        assert!(y.sum().abs() < 1e-12);
    }

    #[test]
    fn lasso_level_rule() {
        let sup = vec![vec![], vec![3], vec![1, 3], vec![1, 2, 3]];
        assert_eq!(lasso_level(&sup, 1), 1);
        assert_eq!(lasso_level(&sup, 2), 2);
        assert_eq!(lasso_level(&sup, 9), 3);
    }
}
