//! Central finite differences for validating analytic derivatives.
//!
//! These helpers evaluate function values only, so they stay independent of
//! any analytic gradient path they are used to check.

use nalgebra::DVector;

use crate::error::Result;
use crate::problem::CcopProblem;

/// Central-difference gradient of a scalar function at `z`.
pub fn central_gradient<F>(f: F, z: &DVector<f64>, step: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let mut grad = DVector::zeros(z.len());
    let mut zp = z.clone();
    for i in 0..z.len() {
        zp[i] = z[i] + step;
        let fp = f(&zp)?;
        zp[i] = z[i] - step;
        let fm = f(&zp)?;
        zp[i] = z[i];
        grad[i] = (fp - fm) / (2.0 * step);
    }
    Ok(grad)
}

/// Guarded relative error between two vectors:
/// `||a - b||_inf / max(1, ||a||_inf, ||b||_inf)`.
pub fn rel_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let diff = (a - b).amax();
    diff / 1.0f64.max(a.amax()).max(b.amax())
}

/// Worst relative error over the objective gradient and every constraint
/// gradient of `prob` at `x`, each checked against central differences.
pub fn max_derivative_error(prob: &CcopProblem, x: &DVector<f64>, step: f64) -> Result<f64> {
    let mut worst = rel_error(
        &prob.grad_f(x)?,
        &central_gradient(|z| prob.eval_f(z), x, step)?,
    );
    for i in 0..prob.m() {
        let fd = central_gradient(|z| Ok(prob.eval_g(z)?[i]), x, step)?;
        let analytic = prob.jac_g(x)?.column(i).into_owned();
        worst = worst.max(rel_error(&analytic, &fd));
    }
    for j in 0..prob.p() {
        let fd = central_gradient(|z| Ok(prob.eval_h(z)?[j]), x, step)?;
        let analytic = prob.jac_h(x)?.column(j).into_owned();
        worst = worst.max(rel_error(&analytic, &fd));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{self, RandomQuadraticDims};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn analytic_derivatives_match_central_differences() {
        let dims = RandomQuadraticDims {
            n: 5,
            m: 3,
            p: 2,
            kappa: 2,
        };
        let probs = vec![
            synthetic::axes2(),
            synthetic::product3(),
            synthetic::random_quadratic(11, dims),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for prob in &probs {
            for _ in 0..100 {
                let x = DVector::from_fn(prob.n(), |_, _| rng.random_range(-2.0..2.0));
                let err = max_derivative_error(prob, &x, 1e-6).unwrap();
                assert!(err <= 1e-5, "{}: derivative error {err}", prob.name());
            }
        }
    }
}
