//! Problem definitions for cardinality-constrained programs and their
//! continuous relaxation.
//!
//! A [`CcopProblem`] is the smooth data of
//!
//! ```text
//! min f(x)  s.t.  g(x) <= 0,  h(x) = 0,  ||x||_0 <= kappa,
//! ```
//!
//! and the relaxation replaces the cardinality constraint by an auxiliary
//! variable `y` with `x ∘ y = 0`, `n - kappa - eᵀy <= 0`, `y <= e`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{CcopError, Result};

pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A cardinality-constrained instance. Immutable after construction; the
/// callbacks must be pure and reentrant so instances can be shared across
/// concurrent solves.
///
/// Jacobians are dense and stored column-wise: column `i` of `jac_g(x)` is
/// the gradient of the `i`-th inequality. Target instances are desk scale,
/// so no sparse storage.
#[derive(Clone)]
pub struct CcopProblem {
    name: String,
    n: usize,
    m: usize,
    p: usize,
    kappa: usize,
    f: ScalarFn,
    grad_f: VectorFn,
    g: VectorFn,
    jac_g: MatrixFn,
    h: VectorFn,
    jac_h: MatrixFn,
}

impl fmt::Debug for CcopProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CcopProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("p", &self.p)
            .field("kappa", &self.kappa)
            .finish()
    }
}

/// Builder for [`CcopProblem`]. Inequalities and equalities default to empty.
pub struct CcopProblemBuilder {
    name: String,
    n: usize,
    kappa: usize,
    f: Option<ScalarFn>,
    grad_f: Option<VectorFn>,
    m: usize,
    g: Option<VectorFn>,
    jac_g: Option<MatrixFn>,
    p: usize,
    h: Option<VectorFn>,
    jac_h: Option<MatrixFn>,
}

impl CcopProblemBuilder {
    pub fn objective<F, G>(mut self, f: F, grad_f: G) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.f = Some(Arc::new(f));
        self.grad_f = Some(Arc::new(grad_f));
        self
    }

    pub fn inequalities<G, J>(mut self, m: usize, g: G, jac_g: J) -> Self
    where
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.m = m;
        self.g = Some(Arc::new(g));
        self.jac_g = Some(Arc::new(jac_g));
        self
    }

    pub fn equalities<H, J>(mut self, p: usize, h: H, jac_h: J) -> Self
    where
        H: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.p = p;
        self.h = Some(Arc::new(h));
        self.jac_h = Some(Arc::new(jac_h));
        self
    }

    pub fn build(self) -> Result<CcopProblem> {
        let n = self.n;
        if n == 0 {
            return Err(CcopError::InvalidProblem("n must be positive".into()));
        }
        if self.kappa == 0 || self.kappa >= n {
            return Err(CcopError::InvalidProblem(format!(
                "kappa must satisfy 0 < kappa < n, got kappa = {}, n = {}",
                self.kappa, n
            )));
        }
        let f = self
            .f
            .ok_or_else(|| CcopError::InvalidProblem("objective is required".into()))?;
        let grad_f = self.grad_f.expect("set together with f");
        let g = self
            .g
            .unwrap_or_else(|| Arc::new(|_: &DVector<f64>| DVector::zeros(0)));
        let jac_g = self
            .jac_g
            .unwrap_or_else(|| Arc::new(move |_: &DVector<f64>| DMatrix::zeros(n, 0)));
        let h = self
            .h
            .unwrap_or_else(|| Arc::new(|_: &DVector<f64>| DVector::zeros(0)));
        let jac_h = self
            .jac_h
            .unwrap_or_else(|| Arc::new(move |_: &DVector<f64>| DMatrix::zeros(n, 0)));
        Ok(CcopProblem {
            name: self.name,
            n,
            m: self.m,
            p: self.p,
            kappa: self.kappa,
            f,
            grad_f,
            g,
            jac_g,
            h,
            jac_h,
        })
    }
}

impl CcopProblem {
    pub fn builder(name: impl Into<String>, n: usize, kappa: usize) -> CcopProblemBuilder {
        CcopProblemBuilder {
            name: name.into(),
            n,
            kappa,
            f: None,
            grad_f: None,
            m: 0,
            g: None,
            jac_g: None,
            p: 0,
            h: None,
            jac_h: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    fn check_x(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(CcopError::DimensionMismatch {
                what: "x",
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_x(x)?;
        let v = (self.f)(x);
        if !v.is_finite() {
            return Err(CcopError::NonFinite { what: "f(x)" });
        }
        Ok(v)
    }

    pub fn grad_f(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_x(x)?;
        let v = (self.grad_f)(x);
        check_vec(&v, self.n, "grad f(x)")?;
        Ok(v)
    }

    pub fn eval_g(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_x(x)?;
        let v = (self.g)(x);
        check_vec(&v, self.m, "g(x)")?;
        Ok(v)
    }

    pub fn jac_g(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        let v = (self.jac_g)(x);
        check_mat(&v, self.n, self.m, "jacobian of g")?;
        Ok(v)
    }

    pub fn eval_h(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_x(x)?;
        let v = (self.h)(x);
        check_vec(&v, self.p, "h(x)")?;
        Ok(v)
    }

    pub fn jac_h(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        let v = (self.jac_h)(x);
        check_mat(&v, self.n, self.p, "jacobian of h")?;
        Ok(v)
    }

    /// Derived instance with extra equality rows `x_i = 0` for each pinned
    /// index. The oracle uses this to solve support-restricted problems with
    /// the same machinery.
    pub fn with_pinned_zeros(&self, pinned: &[usize]) -> Result<CcopProblem> {
        for &i in pinned {
            if i >= self.n {
                return Err(CcopError::InvalidProblem(format!(
                    "pinned index {i} out of range for n = {}",
                    self.n
                )));
            }
        }
        let pinned: Vec<usize> = pinned.to_vec();
        let n = self.n;
        let base_h = Arc::clone(&self.h);
        let base_jac_h = Arc::clone(&self.jac_h);
        let p_new = self.p + pinned.len();

        let pins = pinned.clone();
        let h = move |x: &DVector<f64>| {
            let base = base_h(x);
            let mut out = DVector::zeros(base.len() + pins.len());
            out.rows_mut(0, base.len()).copy_from(&base);
            for (t, &i) in pins.iter().enumerate() {
                out[base.len() + t] = x[i];
            }
            out
        };
        let pins = pinned.clone();
        let jac_h = move |x: &DVector<f64>| {
            let base = base_jac_h(x);
            let mut out = DMatrix::zeros(n, base.ncols() + pins.len());
            out.columns_mut(0, base.ncols()).copy_from(&base);
            for (t, &i) in pins.iter().enumerate() {
                out[(i, base.ncols() + t)] = 1.0;
            }
            out
        };

        Ok(CcopProblem {
            name: format!("{}+pinned{}", self.name, pinned.len()),
            n: self.n,
            m: self.m,
            p: p_new,
            kappa: self.kappa,
            f: Arc::clone(&self.f),
            grad_f: Arc::clone(&self.grad_f),
            g: Arc::clone(&self.g),
            jac_g: Arc::clone(&self.jac_g),
            h: Arc::new(h),
            jac_h: Arc::new(jac_h),
        })
    }

    /// Same instance with a different cardinality bound.
    pub fn with_kappa(&self, kappa: usize) -> Result<CcopProblem> {
        if kappa == 0 || kappa >= self.n {
            return Err(CcopError::InvalidProblem(format!(
                "kappa must satisfy 0 < kappa < n, got kappa = {}, n = {}",
                kappa, self.n
            )));
        }
        let mut out = self.clone();
        out.kappa = kappa;
        Ok(out)
    }
}

fn check_vec(v: &DVector<f64>, expected: usize, what: &'static str) -> Result<()> {
    if v.len() != expected {
        return Err(CcopError::DimensionMismatch {
            what,
            expected,
            got: v.len(),
        });
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(CcopError::NonFinite { what });
    }
    Ok(())
}

fn check_mat(v: &DMatrix<f64>, nrows: usize, ncols: usize, what: &'static str) -> Result<()> {
    if v.nrows() != nrows || v.ncols() != ncols {
        return Err(CcopError::DimensionMismatch {
            what,
            expected: nrows * ncols,
            got: v.nrows() * v.ncols(),
        });
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(CcopError::NonFinite { what });
    }
    Ok(())
}

/// A point of the relaxed problem: the original `x` plus the auxiliary `y`.
/// Feasibility is measured, never assumed.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl RelaxedPoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }
}

/// Numeric index sets at a point: active inequalities, zero components and
/// nonzero components of `x`, decided by an absolute threshold `tol_active`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSets {
    /// Indices i with |g_i(x)| <= tol_active.
    pub active_g: Vec<usize>,
    /// Indices i with |x_i| <= tol_active.
    pub zero_x: Vec<usize>,
    /// Complement of `zero_x`.
    pub nonzero_x: Vec<usize>,
    pub tol_active: f64,
}

impl IndexSets {
    pub fn is_active_g(&self, i: usize) -> bool {
        self.active_g.binary_search(&i).is_ok()
    }

    pub fn is_zero(&self, i: usize) -> bool {
        self.zero_x.binary_search(&i).is_ok()
    }

    pub fn is_nonzero(&self, i: usize) -> bool {
        self.nonzero_x.binary_search(&i).is_ok()
    }
}

/// Classify the index sets of `x` under the threshold `tol_active`.
/// Deterministic for fixed inputs.
pub fn classify_indices(prob: &CcopProblem, x: &DVector<f64>, tol_active: f64) -> Result<IndexSets> {
    if tol_active <= 0.0 {
        return Err(CcopError::InvalidConfig(
            "tol_active must be positive".into(),
        ));
    }
    let gval = prob.eval_g(x)?;
    let active_g = (0..prob.m()).filter(|&i| gval[i].abs() <= tol_active).collect();
    let (zero_x, nonzero_x): (Vec<usize>, Vec<usize>) =
        (0..prob.n()).partition(|&i| x[i].abs() <= tol_active);
    Ok(IndexSets {
        active_g,
        zero_x,
        nonzero_x,
        tol_active,
    })
}

/// Violation measures of a relaxed point. All fields are nonnegative; a
/// point is declared feasible for the relaxation when the first five are
/// below the feasibility tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// ||g(x)_+||_inf
    pub viol_g: f64,
    /// ||h(x)||_inf
    pub viol_h: f64,
    /// ||x ∘ y||_inf
    pub viol_comp: f64,
    /// (n - kappa - eᵀy)_+
    pub viol_card: f64,
    /// ||(y - e)_+||_inf
    pub viol_box: f64,
    /// max(#{i : |x_i| > tol_active} - kappa, 0)
    pub viol_l0: usize,
}

impl FeasibilityReport {
    /// Largest of the five relaxation violations (excludes `viol_l0`).
    pub fn max_relaxation_violation(&self) -> f64 {
        self.viol_g
            .max(self.viol_h)
            .max(self.viol_comp)
            .max(self.viol_card)
            .max(self.viol_box)
    }

    pub fn is_relaxation_feasible(&self, tol_feas: f64) -> bool {
        self.max_relaxation_violation() <= tol_feas
    }
}

/// Measure all constraint violations of `pt` for the relaxation, plus the
/// cardinality excess of `x` under `tol_active`.
pub fn feasibility(
    prob: &CcopProblem,
    pt: &RelaxedPoint,
    tol_active: f64,
) -> Result<FeasibilityReport> {
    if pt.y.len() != prob.n() {
        return Err(CcopError::DimensionMismatch {
            what: "y",
            expected: prob.n(),
            got: pt.y.len(),
        });
    }
    let gval = prob.eval_g(&pt.x)?;
    let hval = prob.eval_h(&pt.x)?;
    let n = prob.n();
    let kappa = prob.kappa();

    let viol_g = gval.iter().fold(0.0f64, |acc, &v| acc.max(v.max(0.0)));
    let viol_h = hval.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let viol_comp = pt
        .x
        .iter()
        .zip(pt.y.iter())
        .fold(0.0f64, |acc, (&xi, &yi)| acc.max((xi * yi).abs()));
    let viol_card = (n as f64 - kappa as f64 - pt.y.sum()).max(0.0);
    let viol_box = pt.y.iter().fold(0.0f64, |acc, &v| acc.max((v - 1.0).max(0.0)));
    let support = pt.x.iter().filter(|v| v.abs() > tol_active).count();
    let viol_l0 = support.saturating_sub(kappa);

    Ok(FeasibilityReport {
        viol_g,
        viol_h,
        viol_comp,
        viol_card,
        viol_box,
        viol_l0,
    })
}

/// Indices of `x` sorted by descending magnitude, ties broken by lowest
/// index first. The shared selection order behind `pair_y_for_x` and
/// `project_to_cardinality`, kept deterministic for golden tests.
fn magnitude_order(x: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    idx
}

/// Construct an auxiliary `y` for `x`: zero on the `kappa` largest-magnitude
/// slots, one elsewhere, so eᵀy = n - kappa and y <= e. If `x` has more than
/// `kappa` nonzeros the pair is simply infeasible in the complementarity
/// block, which `feasibility` will report.
pub fn pair_y_for_x(x: &DVector<f64>, kappa: usize) -> DVector<f64> {
    let n = x.len();
    let mut y = DVector::from_element(n, 1.0);
    for &i in magnitude_order(x).iter().take(kappa.min(n)) {
        y[i] = 0.0;
    }
    y
}

/// Keep the `kappa` largest-magnitude entries of `x` and zero the rest.
/// Idempotent; the result satisfies ||result||_0 <= kappa exactly.
pub fn project_to_cardinality(x: &DVector<f64>, kappa: usize) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for &i in magnitude_order(x).iter().take(kappa.min(x.len())) {
        out[i] = x[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn classify_product3_spurious_point() {
        let prob = synthetic::product3();
        let x = DVector::from_vec(vec![0.5, 1.0, 0.0]);
        let sets = classify_indices(&prob, &x, 1e-8).unwrap();
        assert_eq!(sets.active_g, vec![0]);
        assert_eq!(sets.zero_x, vec![2]);
        assert_eq!(sets.nonzero_x, vec![0, 1]);
    }

    #[test]
    fn classify_zero_vector() {
        let prob = synthetic::axes2();
        let x = DVector::zeros(2);
        let sets = classify_indices(&prob, &x, 1e-8).unwrap();
        assert_eq!(sets.zero_x, vec![0, 1]);
        assert!(sets.nonzero_x.is_empty());
    }

    #[test]
    fn classify_nothing_active() {
        let prob = synthetic::product3();
        // x1*x3 = -6 < 0 strictly, every component above the threshold
        let x = DVector::from_vec(vec![2.0, 3.0, -3.0]);
        let sets = classify_indices(&prob, &x, 1e-8).unwrap();
        assert!(sets.active_g.is_empty());
        assert!(sets.zero_x.is_empty());
        assert_eq!(sets.nonzero_x, vec![0, 1, 2]);
    }

    #[test]
    fn feasibility_axes2_global_solutions() {
        let prob = synthetic::axes2();
        for (x, y) in [
            (vec![1.0, 0.0], vec![0.0, 1.0]),
            (vec![0.0, 1.0], vec![1.0, 0.0]),
        ] {
            let pt = RelaxedPoint::new(DVector::from_vec(x), DVector::from_vec(y));
            let rep = feasibility(&prob, &pt, 1e-8).unwrap();
            assert_eq!(rep.max_relaxation_violation(), 0.0);
            assert_eq!(rep.viol_l0, 0);
        }
    }

    #[test]
    fn feasibility_complementarity_violation() {
        let prob = synthetic::axes2();
        let pt = RelaxedPoint::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        );
        let rep = feasibility(&prob, &pt, 1e-8).unwrap();
        assert_eq!(rep.viol_comp, 1.0);
        assert_eq!(rep.viol_l0, 1);
    }

    #[test]
    fn feasibility_product3_solution() {
        let prob = synthetic::product3();
        let pt = RelaxedPoint::new(
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
        );
        let rep = feasibility(&prob, &pt, 1e-8).unwrap();
        assert_eq!(rep.max_relaxation_violation(), 0.0);
        assert_eq!(rep.viol_l0, 0);
    }

    #[test]
    fn feasibility_rejects_non_finite_evaluator() {
        let prob = CcopProblem::builder("bad", 2, 1)
            .objective(|_| f64::NAN, |_| DVector::zeros(2))
            .build()
            .unwrap();
        let x = DVector::zeros(2);
        assert!(matches!(
            prob.eval_f(&x),
            Err(CcopError::NonFinite { .. })
        ));
    }

    #[test]
    fn pair_y_top_two() {
        let y = pair_y_for_x(&DVector::from_vec(vec![0.9, 0.0, 0.1]), 2);
        assert_eq!(y, DVector::from_vec(vec![0.0, 1.0, 0.0]));
    }

    #[test]
    fn pair_y_tie_breaks_by_lowest_index() {
        let y = pair_y_for_x(&DVector::zeros(2), 1);
        assert_eq!(y, DVector::from_vec(vec![0.0, 1.0]));
    }

    #[test]
    fn pair_y_output_is_feasible() {
        let prob = synthetic::product3();
        let x = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let y = pair_y_for_x(&x, 2);
        assert_eq!(y, DVector::from_vec(vec![0.0, 0.0, 1.0]));
        let rep = feasibility(&prob, &RelaxedPoint::new(x, y), 1e-8).unwrap();
        assert_eq!(rep.max_relaxation_violation(), 0.0);
    }

    #[test]
    fn project_keeps_largest_magnitude() {
        let out = project_to_cardinality(&DVector::from_vec(vec![0.3, -0.7, 0.1]), 1);
        assert_eq!(out, DVector::from_vec(vec![0.0, -0.7, 0.0]));
    }

    #[test]
    fn project_is_identity_on_sparse_input() {
        let x = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert_eq!(project_to_cardinality(&x, 2), x);
    }

    #[test]
    fn project_tie_breaks_by_lowest_index() {
        let out = project_to_cardinality(&DVector::from_vec(vec![2.0, -2.0, 1.0]), 1);
        assert_eq!(out, DVector::from_vec(vec![2.0, 0.0, 0.0]));
    }

    #[test]
    fn builder_rejects_bad_kappa() {
        for kappa in [0, 2, 3] {
            let r = CcopProblem::builder("bad", 2, kappa)
                .objective(|_| 0.0, |_| DVector::zeros(2))
                .build();
            assert!(r.is_err(), "kappa = {kappa} should be rejected");
        }
    }

    #[test]
    fn pinned_problem_adds_equality_rows() {
        let prob = synthetic::product3().with_pinned_zeros(&[2]).unwrap();
        assert_eq!(prob.p(), 1);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let h = prob.eval_h(&x).unwrap();
        assert_eq!(h[0], 3.0);
        let jh = prob.jac_h(&x).unwrap();
        assert_eq!(jh.column(0).as_slice(), &[0.0, 0.0, 1.0]);
    }
}
