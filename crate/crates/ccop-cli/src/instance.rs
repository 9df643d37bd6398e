//! Structured-text problem files.
//!
//! An instance is a JSON document with explicit dimensions, an objective
//! (dense quadratic form or a named builtin) and a list of constraint rows.
//! Every scalar form follows the same convention:
//!
//! ```text
//! value(x) = 0.5 * x' Q x + a' x + b
//! ```
//!
//! with Q stored row-major and symmetrized on load (a warning is attached
//! when the asymmetry exceeds 1e-12). Inequality rows mean value <= 0,
//! equality rows mean value = 0. Derivative callbacks are synthesized from
//! the forms, so gradients are exact.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use ccop_core::problem::CcopProblem;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema violation in `{field}`: {message}")]
    Schema { field: String, message: String },
}

fn schema_err<T>(field: &str, message: impl Into<String>) -> Result<T, InstanceError> {
    Err(InstanceError::Schema {
        field: field.into(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuadraticObjective {
    /// Row-major n x n matrix.
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveSpec {
    Quadratic(QuadraticObjective),
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Ineq,
    Eq,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintForm {
    /// a'x + b
    Affine { a: Vec<f64>, b: f64 },
    /// 0.5 x'Qx + a'x + b
    Quadratic { q: Vec<f64>, a: Vec<f64>, b: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    #[serde(flatten)]
    pub form: ConstraintForm,
}

/// Provenance stamp for generated instances.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Portfolio {
        seed: u64,
        n: usize,
        kappa: usize,
    },
    SparseLsq {
        seed: u64,
        n: usize,
        kappa: usize,
        rows: usize,
        noise: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceSpec {
    pub schema_version: u32,
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub kappa: usize,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

pub struct LoadedInstance {
    pub problem: CcopProblem,
    pub spec: InstanceSpec,
    pub warnings: Vec<String>,
}

/// Symmetrize a row-major square matrix; returns the matrix and its
/// worst asymmetry.
fn symmetrized(q: &[f64], n: usize) -> (DMatrix<f64>, f64) {
    let raw = DMatrix::from_row_slice(n, n, q);
    let sym = (&raw + raw.transpose()) * 0.5;
    let asym = (&raw - raw.transpose()).amax();
    (sym, asym)
}

fn check_len(field: &str, len: usize, expected: usize) -> Result<(), InstanceError> {
    if len != expected {
        return schema_err(field, format!("expected length {expected}, got {len}"));
    }
    Ok(())
}

struct QuadRow {
    q: Option<DMatrix<f64>>,
    a: DVector<f64>,
    b: f64,
}

impl QuadRow {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.a.dot(x) + self.b;
        if let Some(q) = &self.q {
            v += 0.5 * (x.transpose() * q * x)[(0, 0)];
        }
        v
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.q {
            Some(q) => q * x + &self.a,
            None => self.a.clone(),
        }
    }
}

impl InstanceSpec {
    /// Validate the document and synthesize a problem with exact
    /// derivative callbacks.
    pub fn build(&self) -> Result<LoadedInstance, InstanceError> {
        let mut warnings = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            return schema_err(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            );
        }
        let n = self.n;
        if n == 0 {
            return schema_err("n", "dimension must be positive");
        }
        if self.kappa == 0 || self.kappa >= n {
            return schema_err(
                "kappa",
                format!("must satisfy 0 < kappa < n, got kappa = {}, n = {n}", self.kappa),
            );
        }

        let mut builder = CcopProblem::builder(self.name.clone(), n, self.kappa);
        match &self.objective {
            ObjectiveSpec::Quadratic(form) => {
                check_len("objective.quadratic.q", form.q.len(), n * n)?;
                check_len("objective.quadratic.c", form.c.len(), n)?;
                let (q, asym) = symmetrized(&form.q, n);
                if asym > 1e-12 {
                    warnings.push(format!(
                        "objective Q symmetrized; asymmetry was {asym:.3e}"
                    ));
                }
                let c = DVector::from_vec(form.c.clone());
                let constant = form.constant;
                let (q2, c2) = (q.clone(), c.clone());
                builder = builder.objective(
                    move |x: &DVector<f64>| 0.5 * (x.transpose() * &q * x)[(0, 0)] + c.dot(x) + constant,
                    move |x: &DVector<f64>| &q2 * x + &c2,
                );
            }
            ObjectiveSpec::Builtin { name, params } => match name.as_str() {
                "rosenbrock" => {
                    if n < 2 {
                        return schema_err("objective.builtin", "rosenbrock needs n >= 2");
                    }
                    let scale = params.get("scale").copied().unwrap_or(100.0);
                    builder = builder.objective(
                        move |x: &DVector<f64>| {
                            (0..x.len() - 1)
                                .map(|i| {
                                    scale * (x[i + 1] - x[i] * x[i]).powi(2)
                                        + (1.0 - x[i]).powi(2)
                                })
                                .sum()
                        },
                        move |x: &DVector<f64>| {
                            let n = x.len();
                            let mut g = DVector::zeros(n);
                            for i in 0..n - 1 {
                                let t = x[i + 1] - x[i] * x[i];
                                g[i] += -4.0 * scale * t * x[i] - 2.0 * (1.0 - x[i]);
                                g[i + 1] += 2.0 * scale * t;
                            }
                            g
                        },
                    );
                }
                other => {
                    return schema_err(
                        "objective.builtin.name",
                        format!("unknown builtin `{other}` (supported: rosenbrock)"),
                    )
                }
            },
        }

        let mut ineq_rows = Vec::new();
        let mut eq_rows = Vec::new();
        for (idx, row) in self.constraints.iter().enumerate() {
            let field = format!("constraints[{idx}]");
            let parsed = match &row.form {
                ConstraintForm::Affine { a, b } => {
                    check_len(&format!("{field}.a"), a.len(), n)?;
                    QuadRow {
                        q: None,
                        a: DVector::from_vec(a.clone()),
                        b: *b,
                    }
                }
                ConstraintForm::Quadratic { q, a, b } => {
                    check_len(&format!("{field}.q"), q.len(), n * n)?;
                    check_len(&format!("{field}.a"), a.len(), n)?;
                    let (qm, asym) = symmetrized(q, n);
                    if asym > 1e-12 {
                        warnings.push(format!(
                            "{field} Q symmetrized; asymmetry was {asym:.3e}"
                        ));
                    }
                    QuadRow {
                        q: Some(qm),
                        a: DVector::from_vec(a.clone()),
                        b: *b,
                    }
                }
            };
            match row.kind {
                ConstraintKind::Ineq => ineq_rows.push(parsed),
                ConstraintKind::Eq => eq_rows.push(parsed),
            }
        }
        if ineq_rows.len() != self.m {
            return schema_err(
                "m",
                format!("m = {} but {} ineq rows given", self.m, ineq_rows.len()),
            );
        }
        if eq_rows.len() != self.p {
            return schema_err(
                "p",
                format!("p = {} but {} eq rows given", self.p, eq_rows.len()),
            );
        }

        let (m, p) = (self.m, self.p);
        let ineq2 = std::sync::Arc::new(ineq_rows);
        let eq2 = std::sync::Arc::new(eq_rows);
        let (ia, ib) = (ineq2.clone(), ineq2);
        let (ea, eb) = (eq2.clone(), eq2);
        builder = builder
            .inequalities(
                m,
                move |x: &DVector<f64>| DVector::from_fn(m, |i, _| ia[i].value(x)),
                move |x: &DVector<f64>| {
                    let mut jac = DMatrix::zeros(x.len(), m);
                    for i in 0..m {
                        jac.set_column(i, &ib[i].gradient(x));
                    }
                    jac
                },
            )
            .equalities(
                p,
                move |x: &DVector<f64>| DVector::from_fn(p, |j, _| ea[j].value(x)),
                move |x: &DVector<f64>| {
                    let mut jac = DMatrix::zeros(x.len(), p);
                    for j in 0..p {
                        jac.set_column(j, &eb[j].gradient(x));
                    }
                    jac
                },
            );

        let problem = builder
            .build()
            .map_err(|e| InstanceError::Schema {
                field: "problem".into(),
                message: e.to_string(),
            })?;
        Ok(LoadedInstance {
            problem,
            spec: self.clone(),
            warnings,
        })
    }
}

pub fn load_instance(path: &Path) -> Result<LoadedInstance, InstanceError> {
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let spec: InstanceSpec = serde_json::from_str(&text)?;
    spec.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product3_json() -> String {
        r#"{
            "schema_version": 1,
            "name": "product3",
            "n": 3, "m": 1, "p": 0, "kappa": 2,
            "objective": {"quadratic": {"q": [1,0,0, 0,1,0, 0,0,0], "c": [-1,-1,0], "constant": 1.0}},
            "constraints": [
                {"kind": "ineq", "quadratic": {"q": [0,0,1, 0,0,0, 1,0,0], "a": [0,0,0], "b": 0.0}}
            ]
        }"#
        .to_string()
    }

    #[test]
    fn product_instance_loads_and_evaluates() {
        let spec: InstanceSpec = serde_json::from_str(&product3_json()).unwrap();
        let loaded = spec.build().unwrap();
        let prob = &loaded.problem;
        assert_eq!((prob.n(), prob.m(), prob.p(), prob.kappa()), (3, 1, 0, 2));
        let x = DVector::from_vec(vec![2.0, 0.5, 3.0]);
        // g1(x) = x1*x3
        assert_eq!(prob.eval_g(&x).unwrap()[0], 6.0);
        assert_eq!(
            prob.eval_f(&x).unwrap(),
            0.5 * ((2.0f64 - 1.0).powi(2) + (0.5f64 - 1.0).powi(2))
        );
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn kappa_out_of_range_is_a_schema_error() {
        let mut spec: InstanceSpec = serde_json::from_str(&product3_json()).unwrap();
        spec.kappa = 3;
        let err = spec.build().unwrap_err();
        match err {
            InstanceError::Schema { field, message } => {
                assert_eq!(field, "kappa");
                assert!(message.contains("kappa < n"), "{message}");
            }
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn row_count_mismatch_is_a_schema_error() {
        let mut spec: InstanceSpec = serde_json::from_str(&product3_json()).unwrap();
        spec.m = 2;
        assert!(matches!(
            spec.build().unwrap_err(),
            InstanceError::Schema { field, .. } if field == "m"
        ));
    }

    #[test]
    fn asymmetric_q_is_symmetrized_with_warning() {
        let mut spec: InstanceSpec = serde_json::from_str(&product3_json()).unwrap();
        if let ObjectiveSpec::Quadratic(form) = &mut spec.objective {
            form.q[1] = 0.5; // Q[0][1] != Q[1][0]
        }
        let loaded = spec.build().unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        // f uses (Q + Q')/2: cross term becomes 0.25*(x0*x1)*2*0.5
        let x = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let f = loaded.problem.eval_f(&x).unwrap();
        assert!((f - 0.25).abs() < 1e-15, "f = {f}");
    }

    #[test]
    fn rosenbrock_builtin_has_consistent_gradient() {
        let spec = InstanceSpec {
            schema_version: 1,
            name: "rosen".into(),
            n: 4,
            m: 0,
            p: 0,
            kappa: 2,
            objective: ObjectiveSpec::Builtin {
                name: "rosenbrock".into(),
                params: BTreeMap::new(),
            },
            constraints: vec![],
            generator: None,
        };
        let prob = spec.build().unwrap().problem;
        let x = DVector::from_vec(vec![0.3, -0.2, 0.7, 1.1]);
        let err = ccop_core::deriv_check::max_derivative_error(&prob, &x, 1e-6).unwrap();
        assert!(err < 1e-5, "gradient error {err}");
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        let spec = InstanceSpec {
            schema_version: 1,
            name: "x".into(),
            n: 3,
            m: 0,
            p: 0,
            kappa: 1,
            objective: ObjectiveSpec::Builtin {
                name: "mystery".into(),
                params: BTreeMap::new(),
            },
            constraints: vec![],
            generator: None,
        };
        assert!(spec.build().is_err());
    }
}
