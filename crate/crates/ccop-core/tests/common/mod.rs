//! Shared test helpers: an accelerated projected-gradient solver for the
//! sign-constrained least-squares problem, kept independent of the
//! active-set implementation it is used to cross-check.

use nalgebra::{DMatrix, DVector};

/// Residual norm of min ||A z - b|| s.t. z_i >= 0 on flagged entries,
/// computed by projected accelerated gradient descent followed by an exact
/// least-squares polish on the identified support.
pub fn pg_nnls_residual(a: &DMatrix<f64>, b: &DVector<f64>, nonneg: &[bool]) -> f64 {
    let ncols = a.ncols();
    if ncols == 0 || a.nrows() == 0 {
        return b.norm();
    }
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let lip = ata.norm().max(f64::MIN_POSITIVE); // Frobenius bound on the spectral norm
    let proj = |z: &mut DVector<f64>| {
        for i in 0..ncols {
            if nonneg[i] && z[i] < 0.0 {
                z[i] = 0.0;
            }
        }
    };

    let mut z = DVector::zeros(ncols);
    let mut w = z.clone();
    let mut t = 1.0f64;
    let mut best = b.norm();
    for _ in 0..200_000 {
        let grad = &ata * &w - &atb;
        let mut z_new = &w - grad / lip;
        proj(&mut z_new);
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        w = &z_new + ((t - 1.0) / t_new) * (&z_new - &z);
        z = z_new;
        t = t_new;
        let res = (b - a * &z).norm();
        if res < best {
            best = res;
        }
        // stationarity: projected gradient vanished
        let g = &ata * &z - &atb;
        let stat = (0..ncols).all(|i| {
            if nonneg[i] && z[i] <= 0.0 {
                g[i] >= -1e-15 * lip
            } else {
                g[i].abs() <= 1e-15 * lip
            }
        });
        if stat {
            break;
        }
    }

    // Exact polish: unconstrained solve on the support found by the
    // projected iteration; only accepted if it stays feasible.
    let support: Vec<usize> = (0..ncols)
        .filter(|&i| !nonneg[i] || z[i] > 1e-9)
        .collect();
    if !support.is_empty() {
        let sub = a.select_columns(support.iter());
        let svd = sub.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if smax > 0.0 {
            if let Ok(sol) = svd.solve(b, smax * 1e-13) {
                let zp = sol.column(0).into_owned();
                let feasible = support
                    .iter()
                    .enumerate()
                    .all(|(t, &i)| !nonneg[i] || zp[t] >= 0.0);
                if feasible {
                    let res = (b - sub * zp).norm();
                    if res < best {
                        best = res;
                    }
                }
            }
        }
    }
    best
}
