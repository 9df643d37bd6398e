//! The augmented Lagrangian of the relaxed problem, its gradient in (x, y),
//! the first-order multiplier estimates, the penalty-progress measures that
//! drive the penalty update, and the safeguard projection.
//!
//! With multipliers Λ = (λ, μ, γ, δ, η) and penalty ρ > 0:
//!
//! ```text
//! L(x, y, Λ, ρ) = f(x) + ρ/2 [ ||(g(x) + λ/ρ)_+||²
//!                            + ||h(x) + μ/ρ||²
//!                            + ||x ∘ y + γ/ρ||²
//!                            + ((n - κ - eᵀy + δ/ρ)_+)²
//!                            + ||(y - e + η/ρ)_+||² ]
//! ```
//!
//! The plus-function is the exact componentwise max with zero; L is C¹
//! as written, so no smoothing is applied.

use nalgebra::DVector;

use crate::error::{CcopError, Result};
use crate::problem::{CcopProblem, RelaxedPoint};

/// Multiplier tuple attached to the five constraint blocks of the
/// relaxation: inequalities, equalities, complementarity, the cardinality
/// row and the box row. `lam`, `delta` and `eta` are sign-constrained
/// because their constraints are inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub lam: DVector<f64>,
    pub mu: DVector<f64>,
    pub gam: DVector<f64>,
    pub delta: f64,
    pub eta: DVector<f64>,
}

impl Multipliers {
    pub fn zeros(m: usize, p: usize, n: usize) -> Self {
        Self {
            lam: DVector::zeros(m),
            mu: DVector::zeros(p),
            gam: DVector::zeros(n),
            delta: 0.0,
            eta: DVector::zeros(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = self.lam.iter().all(|&v| v >= 0.0)
            && self.delta >= 0.0
            && self.eta.iter().all(|&v| v >= 0.0);
        if !nonneg {
            return Err(CcopError::InvalidConfig(
                "lam, delta and eta must be componentwise nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn inf_norm(&self) -> f64 {
        let mut out = self.delta.abs();
        for block in [&self.lam, &self.mu, &self.gam, &self.eta] {
            if block.len() > 0 {
                out = out.max(block.amax());
            }
        }
        out
    }
}

/// Boxes into which the safeguarded multipliers are projected each outer
/// iteration. The wide defaults make the method behave like the classical
/// augmented Lagrangian until a user tightens them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeguardBounds {
    pub lam_max: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub gam_min: f64,
    pub gam_max: f64,
    pub delta_max: f64,
    pub eta_max: f64,
}

impl Default for SafeguardBounds {
    fn default() -> Self {
        Self {
            lam_max: 1e20,
            mu_min: -1e20,
            mu_max: 1e20,
            gam_min: -1e20,
            gam_max: 1e20,
            delta_max: 1e20,
            eta_max: 1e20,
        }
    }
}

impl SafeguardBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lam_max > 0.0
            && self.mu_min < self.mu_max
            && self.gam_min < self.gam_max
            && self.delta_max > 0.0
            && self.eta_max > 0.0;
        if !ok {
            return Err(CcopError::InvalidConfig(
                "safeguard boxes must be nonempty with positive upper bounds".into(),
            ));
        }
        Ok(())
    }
}

/// Per-block progress measures of the penalty test. `score` is the max of
/// the five block Euclidean norms and is the quantity compared across
/// consecutive iterations to decide whether the penalty grows.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyProgress {
    /// min{-g(x), λ̄/ρ} componentwise
    pub u: DVector<f64>,
    /// h(x)
    pub hval: DVector<f64>,
    /// x ∘ y
    pub comp: DVector<f64>,
    /// min{-(n - κ - eᵀy), δ̄/ρ}
    pub v: f64,
    /// min{-(y - e), η̄/ρ} componentwise
    pub r: DVector<f64>,
    pub score: f64,
}

struct BlockValues {
    gval: DVector<f64>,
    hval: DVector<f64>,
    comp: DVector<f64>,
    card: f64,
    box_y: DVector<f64>,
}

fn block_values(prob: &CcopProblem, pt: &RelaxedPoint) -> Result<BlockValues> {
    if pt.y.len() != prob.n() {
        return Err(CcopError::DimensionMismatch {
            what: "y",
            expected: prob.n(),
            got: pt.y.len(),
        });
    }
    Ok(BlockValues {
        gval: prob.eval_g(&pt.x)?,
        hval: prob.eval_h(&pt.x)?,
        comp: pt.x.component_mul(&pt.y),
        card: prob.n() as f64 - prob.kappa() as f64 - pt.y.sum(),
        box_y: pt.y.map(|v| v - 1.0),
    })
}

fn check_inputs(bar: &Multipliers, rho: f64) -> Result<()> {
    if rho <= 0.0 || !rho.is_finite() {
        return Err(CcopError::InvalidConfig("rho must be positive".into()));
    }
    bar.validate()
}

/// First-order multiplier estimates from the block values. The gradient and
/// the multiplier update share this routine so the identity
/// ∇ₓL = ∇f + ∇g λ + ∇h μ + γ ∘ y holds to the last bit.
fn estimates(vals: &BlockValues, bar: &Multipliers, rho: f64) -> Multipliers {
    Multipliers {
        lam: vals.gval.zip_map(&bar.lam, |g, l| (rho * g + l).max(0.0)),
        mu: vals.hval.zip_map(&bar.mu, |h, m| rho * h + m),
        gam: vals.comp.zip_map(&bar.gam, |c, g| rho * c + g),
        delta: (rho * vals.card + bar.delta).max(0.0),
        eta: vals.box_y.zip_map(&bar.eta, |b, e| (rho * b + e).max(0.0)),
    }
}

/// Evaluate L(x, y, Λ̄, ρ).
pub fn value(prob: &CcopProblem, pt: &RelaxedPoint, bar: &Multipliers, rho: f64) -> Result<f64> {
    check_inputs(bar, rho)?;
    let vals = block_values(prob, pt)?;
    let sq = |v: f64| v * v;
    let mut penalty = sq((vals.card + bar.delta / rho).max(0.0));
    penalty += vals
        .gval
        .zip_fold(&bar.lam, 0.0, |acc, g, l| acc + sq((g + l / rho).max(0.0)));
    penalty += vals
        .hval
        .zip_fold(&bar.mu, 0.0, |acc, h, m| acc + sq(h + m / rho));
    penalty += vals
        .comp
        .zip_fold(&bar.gam, 0.0, |acc, c, g| acc + sq(c + g / rho));
    penalty += vals
        .box_y
        .zip_fold(&bar.eta, 0.0, |acc, b, e| acc + sq((b + e / rho).max(0.0)));
    let out = prob.eval_f(&pt.x)? + 0.5 * rho * penalty;
    if !out.is_finite() {
        return Err(CcopError::NonFinite {
            what: "augmented Lagrangian value",
        });
    }
    Ok(out)
}

/// Gradient of L in (x, y):
///
/// ```text
/// ∇ₓL = ∇f + ∇g (ρg + λ̄)_+ + ∇h (ρh + μ̄) + (ρ x∘y + γ̄) ∘ y
/// ∇ᵧL = (ρ x∘y + γ̄) ∘ x − (ρ(n−κ−eᵀy) + δ̄)_+ e + (ρ(y−e) + η̄)_+
/// ```
pub fn gradient(
    prob: &CcopProblem,
    pt: &RelaxedPoint,
    bar: &Multipliers,
    rho: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_inputs(bar, rho)?;
    let vals = block_values(prob, pt)?;
    let est = estimates(&vals, bar, rho);

    let mut grad_x = prob.grad_f(&pt.x)?;
    if prob.m() > 0 {
        grad_x += prob.jac_g(&pt.x)? * &est.lam;
    }
    if prob.p() > 0 {
        grad_x += prob.jac_h(&pt.x)? * &est.mu;
    }
    grad_x += est.gam.component_mul(&pt.y);

    let grad_y =
        est.gam.component_mul(&pt.x) - DVector::from_element(prob.n(), est.delta) + &est.eta;

    for v in grad_x.iter().chain(grad_y.iter()) {
        if !v.is_finite() {
            return Err(CcopError::NonFinite {
                what: "augmented Lagrangian gradient",
            });
        }
    }
    Ok((grad_x, grad_y))
}

/// First-order multiplier update (Step 3): λ = (ρg + λ̄)_+, μ = ρh + μ̄,
/// γ = ρ x∘y + γ̄, δ = (ρ(n−κ−eᵀy) + δ̄)_+, η = (ρ(y−e) + η̄)_+. The output
/// satisfies the sign invariants by construction.
pub fn update_multipliers(
    prob: &CcopProblem,
    pt: &RelaxedPoint,
    bar: &Multipliers,
    rho: f64,
) -> Result<Multipliers> {
    check_inputs(bar, rho)?;
    let vals = block_values(prob, pt)?;
    Ok(estimates(&vals, bar, rho))
}

/// Progress measures of the penalty test (Step 4).
pub fn penalty_progress(
    prob: &CcopProblem,
    pt: &RelaxedPoint,
    bar: &Multipliers,
    rho: f64,
) -> Result<PenaltyProgress> {
    check_inputs(bar, rho)?;
    let vals = block_values(prob, pt)?;
    let u = vals.gval.zip_map(&bar.lam, |g, l| (-g).min(l / rho));
    let v = (-vals.card).min(bar.delta / rho);
    let r = vals.box_y.zip_map(&bar.eta, |b, e| (-b).min(e / rho));
    let score = u
        .norm()
        .max(vals.hval.norm())
        .max(vals.comp.norm())
        .max(v.abs())
        .max(r.norm());
    Ok(PenaltyProgress {
        u,
        hval: vals.hval,
        comp: vals.comp,
        v,
        r,
        score,
    })
}

/// Componentwise clamp of each multiplier block into its safeguard box.
pub fn project_safeguards(est: &Multipliers, bounds: &SafeguardBounds) -> Multipliers {
    Multipliers {
        lam: est.lam.map(|v| v.clamp(0.0, bounds.lam_max)),
        mu: est.mu.map(|v| v.clamp(bounds.mu_min, bounds.mu_max)),
        gam: est.gam.map(|v| v.clamp(bounds.gam_min, bounds.gam_max)),
        delta: est.delta.clamp(0.0, bounds.delta_max),
        eta: est.eta.map(|v| v.clamp(0.0, bounds.eta_max)),
    }
}
