//! Safeguarded augmented Lagrangian outer loop.
//!
//! Each outer iteration approximately minimizes the augmented Lagrangian to
//! an inexactness target, forms first-order multiplier estimates, grows the
//! penalty when the progress score did not shrink by the required factor,
//! and projects the estimates into the safeguard boxes for the next round.
//!
//! The run stops when the relaxed point is feasible and the multiplier-fit
//! residual at the cardinality-projected iterate certifies stationarity;
//! the residual and feasibility criteria, the penalty cap, the outer
//! iteration cap and repeated inner failures are the only exits.

use nalgebra::DVector;

use crate::auglag::{self, Multipliers, SafeguardBounds};
use crate::certificates::{
    self, Certificate, SequencePoint, DEFAULT_ALPHA_TOL, DEFAULT_BETA_TOL,
};
use crate::error::{CcopError, Result};
use crate::inner::{self, InnerConfig, InnerStatus};
use crate::problem::{
    feasibility, pair_y_for_x, project_to_cardinality, CcopProblem, FeasibilityReport,
    RelaxedPoint,
};

/// Inexactness schedule for the inner solves: eps(k) = max(eps_min, eps0 * theta^k).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub theta: f64,
    pub eps_min: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self {
            eps0: 1.0,
            theta: 0.5,
            eps_min: 1e-9,
        }
    }
}

impl EpsSchedule {
    pub fn eps(&self, k: usize) -> f64 {
        (self.eps0 * self.theta.powi(k as i32)).max(self.eps_min)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eps0 > 0.0 && self.theta > 0.0 && self.theta <= 1.0 && self.eps_min > 0.0;
        if !ok {
            return Err(CcopError::InvalidConfig(
                "eps schedule must be positive and nonincreasing".into(),
            ));
        }
        Ok(())
    }
}

/// How the safeguarded multipliers are chosen from the estimates each
/// iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SafeguardRule {
    /// Project the first-order estimates into the safeguard boxes.
    #[default]
    Project,
    /// Discard the estimates (pure penalty method).
    ResetToZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SalmConfig {
    pub rho0: f64,
    /// Required shrink factor of the progress score (> 1).
    pub tau: f64,
    /// Penalty growth factor (> 1).
    pub sigma: f64,
    pub eps: EpsSchedule,
    pub bounds: SafeguardBounds,
    pub tol_feas: f64,
    pub tol_opt: f64,
    pub max_outer: usize,
    pub rho_max: f64,
    pub tol_active: f64,
    pub inner: InnerConfig,
    pub safeguard_rule: SafeguardRule,
}

impl Default for SalmConfig {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            tau: 2.0,
            sigma: 10.0,
            eps: EpsSchedule::default(),
            bounds: SafeguardBounds::default(),
            tol_feas: 1e-6,
            tol_opt: 1e-6,
            max_outer: 200,
            rho_max: 1e12,
            tol_active: 1e-6,
            inner: InnerConfig::default(),
            safeguard_rule: SafeguardRule::Project,
        }
    }
}

impl SalmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.tau > 1.0 && self.sigma > 1.0) {
            return Err(CcopError::InvalidConfig(
                "rho0 must be positive, tau and sigma must exceed 1".into(),
            ));
        }
        if !(self.tol_feas > 0.0 && self.tol_opt > 0.0 && self.tol_active > 0.0) {
            return Err(CcopError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.rho_max < self.rho0 {
            return Err(CcopError::InvalidConfig(
                "max_outer must be positive and rho_max >= rho0".into(),
            ));
        }
        self.eps.validate()?;
        self.bounds.validate()?;
        // eps is owned by the schedule; only the remaining inner knobs are
        // validated here.
        InnerConfig {
            eps: 1.0,
            ..self.inner
        }
        .validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SalmStatus {
    CcmStationary,
    Infeasible,
    RhoLimit,
    OuterLimit,
    InnerFailure,
}

impl SalmStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SalmStatus::CcmStationary => "ccm_stationary",
            SalmStatus::Infeasible => "infeasible",
            SalmStatus::RhoLimit => "rho_limit",
            SalmStatus::OuterLimit => "outer_limit",
            SalmStatus::InnerFailure => "inner_failure",
        }
    }
}

/// Per-iteration summary of the multiplier sign products: how many
/// components are above the normalized-magnitude threshold, and the worst
/// sign product among them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignSummary {
    pub triggered: usize,
    pub min_product: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub k: usize,
    /// Penalty used by this iteration's subproblem.
    pub rho_used: f64,
    /// Penalty after the progress test.
    pub rho_next: f64,
    pub eps: f64,
    pub feasibility: FeasibilityReport,
    pub multiplier_inf_norm: f64,
    pub progress_score: f64,
    pub inner_iters: usize,
    pub inner_status: InnerStatus,
    pub inner_grad_norm: f64,
    pub ccm_residual: f64,
    pub objective: f64,
    pub signs: SignSummary,
}

#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct SalmResult {
    pub pt: RelaxedPoint,
    /// Cardinality projection of the final x.
    pub x_sparse: DVector<f64>,
    /// Objective at `x_sparse`.
    pub objective: f64,
    /// Final first-order multiplier estimates.
    pub multipliers: Multipliers,
    pub trace: RunTrace,
    pub status: SalmStatus,
    pub certificate: Certificate,
}

/// Penalty update rule: keep rho on the first iteration or when the
/// previous score shrank by at least the factor tau; grow by sigma
/// otherwise.
pub fn penalty_update(
    prev_score: f64,
    cur_score: f64,
    rho: f64,
    tau: f64,
    sigma: f64,
    k: usize,
) -> f64 {
    if k == 1 || prev_score >= tau * cur_score {
        rho
    } else {
        sigma * rho
    }
}

fn sign_summary(x: &DVector<f64>, gval: &DVector<f64>, hval: &DVector<f64>, est: &Multipliers) -> SignSummary {
    let mut pi = 1.0f64;
    for block in [&est.lam, &est.mu, &est.gam] {
        if block.len() > 0 {
            pi = pi.max(block.amax());
        }
    }
    let mut triggered = 0usize;
    let mut min_product: Option<f64> = None;
    let mut visit = |mult: f64, val: f64| {
        if mult.abs() / pi >= DEFAULT_BETA_TOL {
            triggered += 1;
            let prod = mult * val;
            min_product = Some(min_product.map_or(prod, |m| m.min(prod)));
        }
    };
    for i in 0..est.lam.len() {
        visit(est.lam[i], gval[i]);
    }
    for j in 0..est.mu.len() {
        visit(est.mu[j], hval[j]);
    }
    for i in 0..est.gam.len() {
        visit(est.gam[i], x[i]);
    }
    SignSummary {
        triggered,
        min_product,
    }
}

/// Run the outer loop from `x0` (the auxiliary variable is initialized by
/// the top-kappa pairing). Propagates evaluator failures; every iteration
/// is recorded in the returned trace.
pub fn solve(prob: &CcopProblem, x0: &DVector<f64>, cfg: &SalmConfig) -> Result<SalmResult> {
    cfg.validate()?;
    if x0.len() != prob.n() {
        return Err(CcopError::DimensionMismatch {
            what: "x0",
            expected: prob.n(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(CcopError::NonFinite { what: "x0" });
    }

    let zero = Multipliers::zeros(prob.m(), prob.p(), prob.n());
    let mut bar = auglag::project_safeguards(&zero, &cfg.bounds);
    let mut pt = RelaxedPoint::new(x0.clone(), pair_y_for_x(x0, prob.kappa()));
    let mut rho = cfg.rho0;
    let mut prev_score = 0.0f64;
    let mut last_failure_rho: Option<f64> = None;

    let mut trace = RunTrace::default();
    let mut history: Vec<SequencePoint> = Vec::new();
    let mut est = zero.clone();
    let mut status = SalmStatus::OuterLimit;

    for k in 1..=cfg.max_outer {
        let eps_k = cfg.eps.eps(k);
        let inner_cfg = InnerConfig {
            eps: eps_k,
            ..cfg.inner
        };
        let inner_res = inner::minimize(prob, &pt, &bar, rho, &inner_cfg)?;
        pt = inner_res.pt.clone();

        est = auglag::update_multipliers(prob, &pt, &bar, rho)?;
        let progress = auglag::penalty_progress(prob, &pt, &bar, rho)?;
        let rho_next = penalty_update(prev_score, progress.score, rho, cfg.tau, cfg.sigma, k);

        let x_sparse = project_to_cardinality(&pt.x, prob.kappa());
        let ccm = certificates::ccm_residual(prob, &x_sparse, cfg.tol_active)?;
        let feas = feasibility(prob, &pt, cfg.tol_active)?;
        let gval = prob.eval_g(&pt.x)?;
        let hval = prob.eval_h(&pt.x)?;

        trace.rows.push(TraceRow {
            k,
            rho_used: rho,
            rho_next,
            eps: eps_k,
            feasibility: feas.clone(),
            multiplier_inf_norm: est.inf_norm(),
            progress_score: progress.score,
            inner_iters: inner_res.iters,
            inner_status: inner_res.status,
            inner_grad_norm: inner_res.grad_norm,
            ccm_residual: ccm.residual,
            objective: prob.eval_f(&pt.x)?,
            signs: sign_summary(&pt.x, &gval, &hval, &est),
        });
        history.push(SequencePoint {
            x: pt.x.clone(),
            lam: est.lam.clone(),
            mu: est.mu.clone(),
            gam: est.gam.clone(),
        });

        if feas.is_relaxation_feasible(cfg.tol_feas) && ccm.residual <= cfg.tol_opt {
            status = SalmStatus::CcmStationary;
            break;
        }
        if rho_next > cfg.rho_max {
            status = if feas.is_relaxation_feasible(cfg.tol_feas) {
                SalmStatus::RhoLimit
            } else {
                SalmStatus::Infeasible
            };
            break;
        }
        if inner_res.status != InnerStatus::Converged {
            // two consecutive failures with unchanged penalty give up
            if last_failure_rho == Some(rho) {
                status = SalmStatus::InnerFailure;
                break;
            }
            last_failure_rho = Some(rho);
        } else {
            last_failure_rho = None;
        }

        bar = match cfg.safeguard_rule {
            SafeguardRule::Project => auglag::project_safeguards(&est, &cfg.bounds),
            SafeguardRule::ResetToZero => zero.clone(),
        };
        rho = rho_next;
        prev_score = progress.score;
    }

    let x_sparse = project_to_cardinality(&pt.x, prob.kappa());
    let ccm = certificates::ccm_residual(prob, &x_sparse, cfg.tol_active)?;
    let diagnostics = certificates::sequence_diagnostics(
        prob,
        &history,
        &x_sparse,
        cfg.tol_active,
        DEFAULT_BETA_TOL,
        DEFAULT_ALPHA_TOL,
        certificates::default_tail_window(history.len()),
    )?;
    let ccs_pair = if ccm.residual <= cfg.tol_opt {
        certificates::ccs_from_ccm(prob, &ccm, prob.kappa())
    } else {
        None
    };
    let objective = prob.eval_f(&x_sparse)?;
    let certificate = Certificate {
        ccs_pair,
        ccam_ok: diagnostics.ccam,
        ccpam_ok: diagnostics.ccpam,
        diagnostics: Some(diagnostics),
        ccm,
    };

    Ok(SalmResult {
        pt,
        x_sparse,
        objective,
        multipliers: est,
        trace,
        status,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use nalgebra::DMatrix;

    #[test]
    fn penalty_update_examples() {
        assert_eq!(penalty_update(123.0, 456.0, 3.0, 2.0, 10.0, 1), 3.0);
        assert_eq!(penalty_update(1.0, 0.1, 3.0, 2.0, 10.0, 2), 3.0);
        assert_eq!(penalty_update(1.0, 0.9, 1.0, 2.0, 10.0, 2), 10.0);
    }

    #[test]
    fn axes2_converges_to_a_global_solution() {
        let prob = synthetic::axes2();
        let res = solve(
            &prob,
            &DVector::from_vec(vec![2.0, 2.0]),
            &SalmConfig::default(),
        )
        .unwrap();
        assert_eq!(res.status, SalmStatus::CcmStationary);
        let d1 = (&res.x_sparse - DVector::from_vec(vec![1.0, 0.0])).amax();
        let d2 = (&res.x_sparse - DVector::from_vec(vec![0.0, 1.0])).amax();
        assert!(d1.min(d2) < 1e-6, "x_sparse {:?}", res.x_sparse);
        assert!((res.objective - 0.5).abs() < 1e-6);
    }

    #[test]
    fn product3_reaches_feasible_certified_point() {
        let prob = synthetic::product3();
        let res = solve(
            &prob,
            &DVector::from_vec(vec![1.0, 1.0, 1.0]),
            &SalmConfig::default(),
        )
        .unwrap();
        assert_eq!(res.status, SalmStatus::CcmStationary);
        let feas = feasibility(&prob, &res.pt, 1e-6).unwrap();
        assert!(feas.max_relaxation_violation() <= 1e-6);
        assert!(res.certificate.ccm.residual <= 1e-6);
    }

    #[test]
    fn infeasible_instance_exhausts_penalty() {
        // g(x) = x1^2 + x2^2 + 1 <= 0 has no solution.
        let prob = crate::problem::CcopProblem::builder("void", 2, 1)
            .objective(
                |x: &DVector<f64>| x.norm_squared(),
                |x: &DVector<f64>| 2.0 * x,
            )
            .inequalities(
                1,
                |x: &DVector<f64>| DVector::from_vec(vec![x.norm_squared() + 1.0]),
                |x: &DVector<f64>| DMatrix::from_column_slice(2, 1, &[2.0 * x[0], 2.0 * x[1]]),
            )
            .build()
            .unwrap();
        let cfg = SalmConfig {
            rho_max: 1e8,
            ..Default::default()
        };
        let res = solve(&prob, &DVector::zeros(2), &cfg).unwrap();
        assert_eq!(res.status, SalmStatus::Infeasible);
        let last = res.trace.rows.last().unwrap();
        assert!(last.rho_next > cfg.rho_max);
    }

    #[test]
    fn trace_penalty_sequence_is_consistent() {
        let prob = synthetic::product3();
        let cfg = SalmConfig::default();
        let res = solve(&prob, &DVector::from_vec(vec![-1.0, 2.0, 0.5]), &cfg).unwrap();
        let rows = &res.trace.rows;
        assert!(!rows.is_empty());
        for (i, row) in rows.iter().enumerate() {
            // rho never decreases and changes only by the factor sigma
            let grew = (row.rho_next - cfg.sigma * row.rho_used).abs() < 1e-12 * row.rho_next;
            assert!(row.rho_next == row.rho_used || grew);
            if i > 0 {
                assert_eq!(row.rho_used, rows[i - 1].rho_next);
                let keep = rows[i - 1].progress_score >= cfg.tau * row.progress_score;
                assert_eq!(row.rho_next == row.rho_used, keep);
            } else {
                assert_eq!(row.rho_next, row.rho_used);
            }
        }
    }

    #[test]
    fn step3_gradient_identity_holds_along_the_run() {
        // The x-gradient of L at the inner solution equals the stationarity
        // expression with the updated multipliers, so the recorded inner
        // gradient norm bounds it.
        let prob = synthetic::product3();
        let cfg = SalmConfig::default();
        let res = solve(&prob, &DVector::from_vec(vec![1.0, 1.0, 1.0]), &cfg).unwrap();
        for row in &res.trace.rows {
            if row.inner_status == InnerStatus::Converged {
                assert!(
                    row.inner_grad_norm <= row.eps,
                    "k = {}: {} > {}",
                    row.k,
                    row.inner_grad_norm,
                    row.eps
                );
            }
        }
    }

    #[test]
    fn spurious_points_are_not_certified() {
        // Starts near (a, 1, 0) with 0 < a < 1: those points have a
        // positive residual |a - 1|, so any certified exit must be
        // elsewhere.
        let prob = synthetic::product3();
        for a in [0.3, 0.5, 0.7] {
            let x0 = DVector::from_vec(vec![a, 1.0, 1e-3]);
            let res = solve(&prob, &x0, &SalmConfig::default()).unwrap();
            if res.status == SalmStatus::CcmStationary {
                let spurious = (res.x_sparse[0] - a).abs() < 1e-3
                    && (res.x_sparse[1] - 1.0).abs() < 1e-3
                    && res.x_sparse[0] > 0.2
                    && res.x_sparse[0] < 0.8;
                assert!(!spurious, "certified at spurious point {:?}", res.x_sparse);
            }
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let prob = synthetic::axes2();
        let cfg = SalmConfig::default();
        let a = solve(&prob, &DVector::from_vec(vec![2.0, -1.5]), &cfg).unwrap();
        let b = solve(&prob, &DVector::from_vec(vec![2.0, -1.5]), &cfg).unwrap();
        assert_eq!(a.x_sparse, b.x_sparse);
        assert_eq!(a.trace.rows.len(), b.trace.rows.len());
        for (ra, rb) in a.trace.rows.iter().zip(&b.trace.rows) {
            assert_eq!(ra.progress_score, rb.progress_score);
            assert_eq!(ra.ccm_residual, rb.ccm_residual);
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let prob = synthetic::axes2();
        let cfg = SalmConfig {
            tau: 1.0,
            ..Default::default()
        };
        assert!(solve(&prob, &DVector::zeros(2), &cfg).is_err());
    }
}
