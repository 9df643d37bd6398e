//! Active-set least squares with nonnegativity constraints on a subset of
//! the variables: min ||A z - b|| subject to z_i >= 0 for flagged i, z free
//! otherwise.
//!
//! This is Lawson-Hanson NNLS extended with free columns, which start (and
//! stay) in the passive set. Sub-solves use SVD with singular-value
//! truncation, so rank-deficient passive sets get the minimum-norm least
//! squares solution without any regularization term.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct SignedLsqSolution {
    pub z: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn lsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DVector::zeros(a.ncols());
    }
    let cutoff = smax * 1e-13 * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, cutoff)
        .map(|m| m.column(0).into_owned())
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

fn passive_solve(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&i| passive[i]).collect();
    if cols.is_empty() {
        return DVector::zeros(a.ncols());
    }
    let sub = a.select_columns(cols.iter());
    let zp = lsq_min_norm(&sub, b);
    let mut full = DVector::zeros(a.ncols());
    for (t, &i) in cols.iter().enumerate() {
        full[i] = zp[t];
    }
    full
}

/// Solve min ||A z - b|| with z_i >= 0 wherever `nonneg[i]`.
///
/// Every returned constrained entry is exactly nonnegative. Termination is
/// guaranteed by an iteration cap plus a no-progress guard; at desk scale
/// the dual test reaches machine-level optimality long before either fires.
pub fn solve_signed_lsq(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    nonneg: &[bool],
) -> SignedLsqSolution {
    let ncols = a.ncols();
    assert_eq!(nonneg.len(), ncols, "nonneg mask length mismatch");
    assert_eq!(a.nrows(), b.len(), "rhs length mismatch");

    let mut passive: Vec<bool> = nonneg.iter().map(|&c| !c).collect();
    let mut z = DVector::zeros(ncols);
    let mut iterations = 0usize;

    let scale = {
        let atb = a.transpose() * b;
        if atb.len() == 0 {
            1.0
        } else {
            1.0f64.max(atb.amax())
        }
    };
    let dual_tol = 1e-12 * scale;
    let zero_tol = 1e-14 * scale.max(1.0);

    // Inner feasibility loop: solve on the passive set; while any
    // constrained passive entry goes negative, step as far as feasibility
    // allows and demote the blocking variables.
    let feasible_solve = |z: &mut DVector<f64>, passive: &mut Vec<bool>, iters: &mut usize| {
        loop {
            *iters += 1;
            let zp = passive_solve(a, b, passive);
            let violators: Vec<usize> = (0..ncols)
                .filter(|&i| passive[i] && nonneg[i] && zp[i] <= 0.0)
                .collect();
            if violators.is_empty() {
                *z = zp;
                return;
            }
            let mut alpha = 1.0f64;
            for &i in &violators {
                let denom = z[i] - zp[i];
                if denom > 0.0 {
                    alpha = alpha.min(z[i] / denom);
                }
            }
            *z = &*z + alpha * (&zp - &*z);
            for i in 0..ncols {
                if passive[i] && nonneg[i] && z[i] <= zero_tol {
                    z[i] = 0.0;
                    passive[i] = false;
                }
            }
            if *iters > 6 * (ncols + 1) {
                // pathological cycling guard
                *z = zp.map(|v| v.max(0.0));
                return;
            }
        }
    };

    if passive.iter().any(|&p| p) {
        feasible_solve(&mut z, &mut passive, &mut iterations);
    }

    let mut last_residual = (b - a * &z).norm();
    for _ in 0..(3 * ncols + 30) {
        let w = a.transpose() * (b - a * &z);
        let candidate = (0..ncols)
            .filter(|&i| nonneg[i] && !passive[i])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(best) = candidate else { break };
        if w[best] <= dual_tol {
            break;
        }
        passive[best] = true;
        feasible_solve(&mut z, &mut passive, &mut iterations);
        let residual = (b - a * &z).norm();
        if residual > last_residual - 1e-15 * (1.0 + last_residual) {
            break;
        }
        last_residual = residual;
    }

    for i in 0..ncols {
        if nonneg[i] && z[i] < 0.0 {
            z[i] = 0.0;
        }
    }
    let residual_norm = (b - a * &z).norm();
    SignedLsqSolution {
        z,
        residual_norm,
        iterations,
    }
}
