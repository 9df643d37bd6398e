//! Small built-in instances: two hand-sized fixtures used throughout the
//! test suites, and a seeded random quadratic instance generator for
//! property tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::problem::CcopProblem;

/// n = 2, kappa = 1: find the point on the coordinate axes closest to
/// (1, 1). The two global minimizers are (1, 0) and (0, 1) with objective
/// 0.5; the origin is a stationary point with objective 1 but not a
/// minimizer.
pub fn axes2() -> CcopProblem {
    CcopProblem::builder("axes2", 2, 1)
        .objective(
            |x: &DVector<f64>| 0.5 * ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)),
            |x: &DVector<f64>| DVector::from_vec(vec![x[0] - 1.0, x[1] - 1.0]),
        )
        .build()
        .expect("valid instance")
}

/// n = 3, kappa = 2: minimize the distance of (x1, x2) to (1, 1) subject to
/// the product constraint x1 * x3 <= 0. The unique global minimizer is
/// (1, 1, 0) with objective 0. Points (a, 1, 0) with 0 < a < 1 look
/// stationary to weak sequential tests but are rejected by the sign
/// conditions, which makes this the standard stress fixture for the
/// certificate engine.
pub fn product3() -> CcopProblem {
    CcopProblem::builder("product3", 3, 2)
        .objective(
            |x: &DVector<f64>| 0.5 * ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)),
            |x: &DVector<f64>| DVector::from_vec(vec![x[0] - 1.0, x[1] - 1.0, 0.0]),
        )
        .inequalities(
            1,
            |x: &DVector<f64>| DVector::from_vec(vec![x[0] * x[2]]),
            |x: &DVector<f64>| DMatrix::from_column_slice(3, 1, &[x[2], 0.0, x[0]]),
        )
        .build()
        .expect("valid instance")
}

/// Shape of a randomly generated quadratic instance.
#[derive(Debug, Clone, Copy)]
pub struct RandomQuadraticDims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub kappa: usize,
}

/// Seeded random instance: strictly convex quadratic objective, affine or
/// mildly quadratic inequality rows, affine equality rows. Deterministic
/// per seed.
pub fn random_quadratic(seed: u64, dims: RandomQuadraticDims) -> CcopProblem {
    let RandomQuadraticDims { n, m, p, kappa } = dims;
    assert!(kappa > 0 && kappa < n, "dims must satisfy 0 < kappa < n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));

    // Inequality rows: 0.5 x'Qi x + ai'x + bi, with Qi either zero (affine
    // row) or a random symmetric rank-one term.
    let mut gq = Vec::with_capacity(m);
    let mut ga = Vec::with_capacity(m);
    let mut gb = Vec::with_capacity(m);
    for _ in 0..m {
        if rng.random_bool(0.5) {
            let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0f64));
            gq.push(&v * v.transpose() * rng.random_range(-0.5..0.5));
        } else {
            gq.push(DMatrix::zeros(n, n));
        }
        ga.push(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
        gb.push(rng.random_range(-1.0..1.0));
    }
    let mut ha = Vec::with_capacity(p);
    let mut hb = Vec::with_capacity(p);
    for _ in 0..p {
        ha.push(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
        hb.push(rng.random_range(-0.5..0.5));
    }

    let qf = q.clone();
    let cf = c.clone();
    let qg = q;
    let cg = c;
    let (gq2, ga2) = (gq.clone(), ga.clone());
    let ha2 = ha.clone();

    CcopProblem::builder(format!("random_quadratic_{seed}"), n, kappa)
        .objective(
            move |x: &DVector<f64>| 0.5 * (x.transpose() * &qf * x)[(0, 0)] + cf.dot(x),
            move |x: &DVector<f64>| &qg * x + &cg,
        )
        .inequalities(
            m,
            move |x: &DVector<f64>| {
                DVector::from_fn(m, |i, _| {
                    0.5 * (x.transpose() * &gq[i] * x)[(0, 0)] + ga[i].dot(x) + gb[i]
                })
            },
            move |x: &DVector<f64>| {
                let mut jac = DMatrix::zeros(n, m);
                for i in 0..m {
                    jac.set_column(i, &(&gq2[i] * x + &ga2[i]));
                }
                jac
            },
        )
        .equalities(
            p,
            move |x: &DVector<f64>| DVector::from_fn(p, |j, _| ha[j].dot(x) + hb[j]),
            move |x: &DVector<f64>| {
                let _ = x;
                let mut jac = DMatrix::zeros(n, p);
                for j in 0..p {
                    jac.set_column(j, &ha2[j]);
                }
                jac
            },
        )
        .build()
        .expect("valid instance")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_shape() {
        let a = axes2();
        assert_eq!((a.n(), a.m(), a.p(), a.kappa()), (2, 0, 0, 1));
        let b = product3();
        assert_eq!((b.n(), b.m(), b.p(), b.kappa()), (3, 1, 0, 2));
        let x = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert_eq!(b.eval_f(&x).unwrap(), 0.0);
        assert_eq!(b.eval_g(&x).unwrap()[0], 0.0);
    }

    #[test]
    fn random_quadratic_is_deterministic() {
        let dims = RandomQuadraticDims {
            n: 4,
            m: 2,
            p: 1,
            kappa: 2,
        };
        let a = random_quadratic(7, dims);
        let b = random_quadratic(7, dims);
        let x = DVector::from_vec(vec![0.3, -1.2, 0.5, 2.0]);
        assert_eq!(a.eval_f(&x).unwrap(), b.eval_f(&x).unwrap());
        assert_eq!(a.eval_g(&x).unwrap(), b.eval_g(&x).unwrap());
        assert_eq!(a.eval_h(&x).unwrap(), b.eval_h(&x).unwrap());
    }
}
