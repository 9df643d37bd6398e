//! Seeded instance generators. Generation materializes every matrix into
//! the instance document, so a generated file is self-contained and
//! regeneration with the same seed is bit-identical.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::instance::{
    ConstraintForm, ConstraintKind, ConstraintSpec, GeneratorSpec, InstanceSpec, ObjectiveSpec,
    QuadraticObjective, SCHEMA_VERSION,
};

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Markowitz-style selection instance: minimize x'Qx with Q = AA'/n plus a
/// positive diagonal jitter, subject to full investment (e'x = 1), long-only
/// bounds (-x <= 0) and a minimum return mu'x >= r, with r set to the median
/// single-asset return so the row is attainable. Deterministic per seed.
pub fn generate_portfolio(seed: u64, n: usize, kappa: usize) -> InstanceSpec {
    assert!(n >= 3, "portfolio needs n >= 3");
    assert!(kappa >= 1 && kappa < n, "need 1 <= kappa < n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = (&a * a.transpose()) / (n as f64);
    for i in 0..n {
        q[(i, i)] += rng.random_range(0.01..0.1);
    }
    let mu = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
    let mut sorted: Vec<f64> = mu.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let r = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    // objective value x'Qx equals 0.5 x'(2Q)x in the document convention
    let objective = ObjectiveSpec::Quadratic(QuadraticObjective {
        q: row_major(&(q * 2.0)),
        c: vec![0.0; n],
        constant: 0.0,
    });

    let mut constraints = vec![ConstraintSpec {
        kind: ConstraintKind::Eq,
        form: ConstraintForm::Affine {
            a: vec![1.0; n],
            b: -1.0,
        },
    }];
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = -1.0;
        constraints.push(ConstraintSpec {
            kind: ConstraintKind::Ineq,
            form: ConstraintForm::Affine { a: row, b: 0.0 },
        });
    }
    constraints.push(ConstraintSpec {
        kind: ConstraintKind::Ineq,
        form: ConstraintForm::Affine {
            a: mu.iter().map(|&v| -v).collect(),
            b: r,
        },
    });

    InstanceSpec {
        schema_version: SCHEMA_VERSION,
        name: format!("portfolio_s{seed}_n{n}_k{kappa}"),
        n,
        m: n + 1,
        p: 1,
        kappa,
        objective,
        constraints,
        generator: Some(GeneratorSpec::Portfolio { seed, n, kappa }),
    }
}

/// Sparse recovery instance: least squares against measurements of a
/// planted kappa-sparse signal with additive noise. The quadratic expansion
/// of 0.5||Ax - b||^2 is stored directly.
pub fn generate_sparse_lsq(seed: u64, n: usize, kappa: usize, rows: usize, noise: f64) -> InstanceSpec {
    assert!(kappa >= 1 && kappa < n, "need 1 <= kappa < n");
    assert!(rows >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let a = DMatrix::from_fn(rows, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut truth = DVector::zeros(n);
    let mut slots: Vec<usize> = (0..n).collect();
    for _ in 0..kappa {
        let pick = rng.random_range(0..slots.len());
        let i = slots.swap_remove(pick);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        truth[i] = sign * rng.random_range(0.5..1.5);
    }
    let mut b = &a * &truth;
    for v in b.iter_mut() {
        *v += noise * rng.sample::<f64, _>(StandardNormal);
    }

    let q = a.transpose() * &a;
    let c = -(a.transpose() * &b);
    let constant = 0.5 * b.norm_squared();

    InstanceSpec {
        schema_version: SCHEMA_VERSION,
        name: format!("sparse_lsq_s{seed}_n{n}_k{kappa}"),
        n,
        m: 0,
        p: 0,
        kappa,
        objective: ObjectiveSpec::Quadratic(QuadraticObjective {
            q: row_major(&q),
            c: c.iter().copied().collect(),
            constant,
        }),
        constraints: vec![],
        generator: Some(GeneratorSpec::SparseLsq {
            seed,
            n,
            kappa,
            rows,
            noise,
        }),
    }
}
