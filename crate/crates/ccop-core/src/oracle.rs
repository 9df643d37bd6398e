//! Brute-force ground truth at desk scale: enumerate every support of size
//! at most kappa, solve the support-restricted smooth problem with the same
//! solver machinery, and keep the best feasible result. Supports smaller
//! than kappa are included because the cardinality constraint is an upper
//! bound and constraint rows can break feasible-set monotonicity.

use itertools::Itertools;
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::certificates;
use crate::error::{CcopError, Result};
use crate::problem::CcopProblem;
use crate::salm::{self, SalmConfig};

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Hard cap on n; the enumeration is combinatorial.
    pub max_n: usize,
    /// Seeded random starts per support, in addition to the zero vector.
    pub random_starts: usize,
    pub seed: u64,
    /// Configuration for the restricted solves.
    pub salm: SalmConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_n: 20,
            random_starts: 5,
            seed: 0,
            salm: SalmConfig {
                max_outer: 100,
                ..Default::default()
            },
        }
    }
}

/// Outcome of the restricted solves on one support.
#[derive(Debug, Clone)]
pub struct SupportRecord {
    pub support: Vec<usize>,
    /// Best solution found across starts, cleaned to the support.
    pub solution: Option<DVector<f64>>,
    pub objective: Option<f64>,
    pub feasible: bool,
    /// Starts whose restricted solve returned an error.
    pub solve_errors: usize,
}

#[derive(Debug, Clone)]
pub struct OracleBest {
    pub x: DVector<f64>,
    pub objective: f64,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Best feasible solution across all supports, if any support admits
    /// one.
    pub best: Option<OracleBest>,
    pub per_support: Vec<SupportRecord>,
    /// Number of supports enumerated.
    pub enumerated: usize,
}

/// Comparison of a candidate point against the oracle optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleVerdict {
    /// Feasible and within `tol` of the oracle objective.
    GlobalMatch,
    /// Feasible and certified stationary, but worse than the optimum.
    LocalOnly,
    /// Neither; carries the objective gap against the optimum.
    Worse(f64),
}

fn ccop_feasible(prob: &CcopProblem, x: &DVector<f64>, tol: f64, tol_active: f64) -> Result<bool> {
    let gval = prob.eval_g(x)?;
    let hval = prob.eval_h(x)?;
    let support = x.iter().filter(|v| v.abs() > tol_active).count();
    Ok(gval.iter().all(|&v| v <= tol)
        && hval.iter().all(|&v| v.abs() <= tol)
        && support <= prob.kappa())
}

/// Zero everything off the support.
fn clean_to_support(x: &DVector<f64>, support: &[usize]) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for &i in support {
        out[i] = x[i];
    }
    out
}

/// Enumerate all supports with |S| <= kappa and solve each restricted
/// problem from multiple starts. Restricted-solve failures are recorded per
/// support, never fatal.
pub fn enumerate_supports(prob: &CcopProblem, cfg: &OracleConfig) -> Result<OracleResult> {
    let n = prob.n();
    if n > cfg.max_n {
        return Err(CcopError::InvalidConfig(format!(
            "oracle cap exceeded: n = {n} > max_n = {}",
            cfg.max_n
        )));
    }
    cfg.salm.validate()?;

    let mut per_support = Vec::new();
    let mut best: Option<OracleBest> = None;
    let mut enumerated = 0usize;

    for size in 0..=prob.kappa() {
        for support in (0..n).combinations(size) {
            enumerated += 1;
            let pinned: Vec<usize> = (0..n).filter(|i| !support.contains(i)).collect();
            let restricted = prob.with_pinned_zeros(&pinned)?;

            let mut rng =
                ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(enumerated as u64 * 0x9E37_79B9));
            let mut starts = vec![DVector::zeros(n)];
            for _ in 0..cfg.random_starts {
                let mut x0 = DVector::zeros(n);
                for &i in &support {
                    x0[i] = rng.random_range(-1.0..1.0);
                }
                starts.push(x0);
            }

            let mut record = SupportRecord {
                support: support.clone(),
                solution: None,
                objective: None,
                feasible: false,
                solve_errors: 0,
            };
            for x0 in &starts {
                let solved = match salm::solve(&restricted, x0, &cfg.salm) {
                    Ok(r) => r,
                    Err(_) => {
                        record.solve_errors += 1;
                        continue;
                    }
                };
                let cleaned = clean_to_support(&solved.pt.x, &support);
                let feasible =
                    ccop_feasible(prob, &cleaned, cfg.salm.tol_feas, cfg.salm.tol_active)?;
                let objective = prob.eval_f(&cleaned)?;
                let better = match (&record.objective, record.feasible, feasible) {
                    (_, false, true) => true,
                    (Some(cur), true, true) => objective < *cur,
                    (Some(cur), false, false) => objective < *cur,
                    (None, _, _) => true,
                    _ => false,
                };
                if better {
                    record.solution = Some(cleaned);
                    record.objective = Some(objective);
                    record.feasible = feasible;
                }
            }

            if record.feasible {
                let obj = record.objective.expect("feasible record has objective");
                if best.as_ref().is_none_or(|b| obj < b.objective) {
                    best = Some(OracleBest {
                        x: record.solution.clone().expect("feasible record has solution"),
                        objective: obj,
                        support: support.clone(),
                    });
                }
            }
            per_support.push(record);
        }
    }

    Ok(OracleResult {
        best,
        per_support,
        enumerated,
    })
}

/// Compare a candidate against the oracle optimum: `GlobalMatch` when
/// feasible and within `tol` of the best objective, `LocalOnly` when
/// feasible and certified stationary but worse, `Worse` with the gap
/// otherwise.
pub fn validate_against_oracle(
    prob: &CcopProblem,
    x_candidate: &DVector<f64>,
    oracle: &OracleResult,
    tol: f64,
    tol_active: f64,
) -> Result<OracleVerdict> {
    let best = oracle.best.as_ref().ok_or_else(|| {
        CcopError::InvalidConfig("oracle found no feasible solution to compare against".into())
    })?;
    let feasible = ccop_feasible(prob, x_candidate, tol, tol_active)?;
    let objective = prob.eval_f(x_candidate)?;
    if feasible && objective <= best.objective + tol {
        return Ok(OracleVerdict::GlobalMatch);
    }
    if feasible {
        let report = certificates::ccm_residual(prob, x_candidate, tol_active)?;
        if report.residual <= tol {
            return Ok(OracleVerdict::LocalOnly);
        }
    }
    Ok(OracleVerdict::Worse(objective - best.objective))
}
