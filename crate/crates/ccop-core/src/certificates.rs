//! Stationarity certificates.
//!
//! The central object is the CC-M residual: the optimal value of the
//! multiplier-fitting problem
//!
//! ```text
//! min  ||∇f(x) + ∇g(x) λ + ∇h(x) μ + γ||
//! s.t. λ >= 0,  λ_i = 0 for i not active,  γ_i = 0 on the support of x,
//! ```
//!
//! whose γ is free on the zero set of x, so the zero rows are eliminated
//! exactly and the reduced problem is a sign-constrained least squares on
//! the support rows. A residual below the optimality tolerance certifies
//! the point.
//!
//! Sequence diagnostics operationalize the sequential conditions: a
//! normalized-magnitude threshold decides which multipliers count as
//! asymptotically nonvanishing, and those must keep a strictly positive
//! sign product with their constraint values along the tail of the
//! sequence. A `Fail` verdict always reflects an actual wrong-sign product,
//! never a tolerance artifact.

use nalgebra::DVector;

use crate::error::{CcopError, Result};
use crate::nnls::solve_signed_lsq;
use crate::problem::{classify_indices, CcopProblem, IndexSets};

/// Normalized-magnitude threshold above which a multiplier component is
/// treated as asymptotically nonvanishing.
pub const DEFAULT_BETA_TOL: f64 = 1e-3;
/// Positivity margin for sign products.
pub const DEFAULT_ALPHA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Result of the multiplier-fitting problem at a point.
#[derive(Debug, Clone)]
pub struct CcmResidualReport {
    /// ||∇f + ∇g λ + ∇h μ + γ|| at the minimizer.
    pub residual: f64,
    pub lam: DVector<f64>,
    pub mu: DVector<f64>,
    pub gam: DVector<f64>,
    pub sets: IndexSets,
    /// Whether the point looked feasible (g, h, support count) within
    /// `tol_active`; the residual is computed either way.
    pub feasible_within_tol: bool,
}

/// Fit multipliers at `x` and report the stationarity residual. Rank
/// deficiency in the reduced system is handled by the active-set solver
/// without regularization; multipliers may then be non-unique and any
/// minimizer is reported.
pub fn ccm_residual(prob: &CcopProblem, x: &DVector<f64>, tol_active: f64) -> Result<CcmResidualReport> {
    let sets = classify_indices(prob, x, tol_active)?;
    let grad_f = prob.grad_f(x)?;
    let jac_g = prob.jac_g(x)?;
    let jac_h = prob.jac_h(x)?;

    let rows = &sets.nonzero_x;
    let n_act = sets.active_g.len();
    let ncols = n_act + prob.p();

    let mut lam = DVector::zeros(prob.m());
    let mut mu = DVector::zeros(prob.p());
    if !rows.is_empty() && ncols > 0 {
        let mut a = nalgebra::DMatrix::zeros(rows.len(), ncols);
        for (t, &i) in sets.active_g.iter().enumerate() {
            for (r, &row) in rows.iter().enumerate() {
                a[(r, t)] = jac_g[(row, i)];
            }
        }
        for j in 0..prob.p() {
            for (r, &row) in rows.iter().enumerate() {
                a[(r, n_act + j)] = jac_h[(row, j)];
            }
        }
        let b = DVector::from_fn(rows.len(), |r, _| -grad_f[rows[r]]);
        let mut nonneg = vec![true; n_act];
        nonneg.extend(std::iter::repeat(false).take(prob.p()));
        let sol = solve_signed_lsq(&a, &b, &nonneg);
        for (t, &i) in sets.active_g.iter().enumerate() {
            lam[i] = sol.z[t].max(0.0);
        }
        for j in 0..prob.p() {
            mu[j] = sol.z[n_act + j];
        }
    }

    // gamma cancels the zero rows exactly and vanishes on the support
    let partial = &grad_f + &jac_g * &lam + &jac_h * &mu;
    let mut gam = DVector::zeros(prob.n());
    for &i in &sets.zero_x {
        gam[i] = -partial[i];
    }
    let residual = (&partial + &gam).norm();

    let gval = prob.eval_g(x)?;
    let hval = prob.eval_h(x)?;
    let feasible_within_tol = gval.iter().all(|&v| v <= tol_active)
        && hval.iter().all(|&v| v.abs() <= tol_active)
        && rows.len() <= prob.kappa();

    Ok(CcmResidualReport {
        residual,
        lam,
        mu,
        gam,
        sets,
        feasible_within_tol,
    })
}

/// Recover an auxiliary vector `z` witnessing the stronger pointwise
/// condition from a certified multiplier fit: `z` must vanish on the
/// support of `x` (so x ∘ z = 0), carry at least n - kappa mass (eᵀz >=
/// n - kappa with z <= e), and the fitted γ must vanish wherever z does.
///
/// Taking z = 1 on the zero set and 0 on the support satisfies all three
/// whenever x is kappa-sparse: γ already vanishes on the support, and the
/// zero set has at least n - kappa slots. If x has more than kappa
/// nonzeros no such z exists and `None` is returned.
pub fn ccs_from_ccm(
    prob: &CcopProblem,
    report: &CcmResidualReport,
    kappa: usize,
) -> Option<DVector<f64>> {
    let n = prob.n();
    if report.sets.nonzero_x.len() > kappa {
        return None;
    }
    let mut z = DVector::zeros(n);
    for &i in &report.sets.zero_x {
        z[i] = 1.0;
    }
    Some(z)
}

/// One element of a multiplier sequence.
#[derive(Debug, Clone)]
pub struct SequencePoint {
    pub x: DVector<f64>,
    pub lam: DVector<f64>,
    pub mu: DVector<f64>,
    pub gam: DVector<f64>,
}

/// Per-element diagnostics: the normalization π = ||(1, λ, μ, γ)||_inf,
/// normalized magnitudes, sign products against the constraint values, the
/// stationarity residual and the distance to the limit point.
#[derive(Debug, Clone)]
pub struct ElementDiagnostics {
    pub pi: f64,
    pub lam_normalized: DVector<f64>,
    pub mu_normalized: DVector<f64>,
    pub gam_normalized: DVector<f64>,
    /// λ_i g_i(x)
    pub lam_products: DVector<f64>,
    /// μ_j h_j(x)
    pub mu_products: DVector<f64>,
    /// γ_i x_i
    pub gam_products: DVector<f64>,
    pub stationarity_residual: f64,
    pub dist_to_limit: f64,
}

/// Verdict for one sign condition, with the components that triggered it
/// and the worst sign product observed among them over the tail.
#[derive(Debug, Clone)]
pub struct SignConditionReport {
    pub verdict: Verdict,
    pub triggered: Vec<usize>,
    pub min_product: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SequenceDiagnostics {
    pub elements: Vec<ElementDiagnostics>,
    /// Index of the first element of the tail window the verdicts use.
    pub tail_start: usize,
    /// Convergence of x and of the stationarity residual.
    pub cond_a: Verdict,
    /// Multiplier support matches the index sets of the limit point.
    pub cond_b: Verdict,
    /// Sign condition for λ against g.
    pub cond_c: SignConditionReport,
    /// Sign condition for μ against h.
    pub cond_d: SignConditionReport,
    /// Sign condition for γ against x.
    pub cond_e: SignConditionReport,
    /// Conditions (a)-(b) only.
    pub ccam: Verdict,
    /// All five conditions; `Fail` only on an actual wrong-sign product or
    /// a definite support violation.
    pub ccpam: Verdict,
}

/// Tail-window default: the last quarter of the sequence, at least 10
/// elements, clamped to the sequence length.
pub fn default_tail_window(len: usize) -> usize {
    (len / 4).max(10).min(len).max(1)
}

fn sign_condition(
    elements: &[ElementDiagnostics],
    tail_start: usize,
    count: usize,
    normalized: impl Fn(&ElementDiagnostics) -> &DVector<f64>,
    products: impl Fn(&ElementDiagnostics) -> &DVector<f64>,
    beta_tol: f64,
    alpha_tol: f64,
) -> SignConditionReport {
    let tail = &elements[tail_start..];
    let triggered: Vec<usize> = (0..count)
        .filter(|&i| tail.iter().all(|e| normalized(e)[i] >= beta_tol))
        .collect();
    let mut verdict = Verdict::Pass;
    let mut min_product = None;
    for &i in &triggered {
        for e in tail {
            let prod = products(e)[i];
            min_product = Some(min_product.map_or(prod, |m: f64| m.min(prod)));
            if prod <= -alpha_tol {
                verdict = Verdict::Fail;
            } else if prod < alpha_tol && verdict == Verdict::Pass {
                verdict = Verdict::Inconclusive;
            }
        }
    }
    SignConditionReport {
        verdict,
        triggered,
        min_product,
    }
}

/// Evaluate the sequential conditions on a supplied multiplier sequence
/// against the limit candidate `x_star`. Only the supplied sequence is
/// judged; the pointwise property quantifies over all sequences and is not
/// decidable by finite search.
pub fn sequence_diagnostics(
    prob: &CcopProblem,
    seq: &[SequencePoint],
    x_star: &DVector<f64>,
    tol_active: f64,
    beta_tol: f64,
    alpha_tol: f64,
    tail_window: usize,
) -> Result<SequenceDiagnostics> {
    if seq.is_empty() {
        return Err(CcopError::InvalidConfig("empty sequence".into()));
    }
    let star_sets = classify_indices(prob, x_star, tol_active)?;

    let mut elements = Vec::with_capacity(seq.len());
    for pt in seq {
        if pt.x.len() != prob.n()
            || pt.lam.len() != prob.m()
            || pt.mu.len() != prob.p()
            || pt.gam.len() != prob.n()
        {
            return Err(CcopError::DimensionMismatch {
                what: "sequence element",
                expected: prob.n(),
                got: pt.x.len(),
            });
        }
        let gval = prob.eval_g(&pt.x)?;
        let hval = prob.eval_h(&pt.x)?;
        let grad_f = prob.grad_f(&pt.x)?;
        let jac_g = prob.jac_g(&pt.x)?;
        let jac_h = prob.jac_h(&pt.x)?;

        let mut pi = 1.0f64;
        for block in [&pt.lam, &pt.mu, &pt.gam] {
            if block.len() > 0 {
                pi = pi.max(block.amax());
            }
        }
        let residual = (&grad_f + &jac_g * &pt.lam + &jac_h * &pt.mu + &pt.gam).norm();
        elements.push(ElementDiagnostics {
            pi,
            lam_normalized: pt.lam.map(|v| v.abs() / pi),
            mu_normalized: pt.mu.map(|v| v.abs() / pi),
            gam_normalized: pt.gam.map(|v| v.abs() / pi),
            lam_products: pt.lam.component_mul(&gval),
            mu_products: pt.mu.component_mul(&hval),
            gam_products: pt.gam.component_mul(&pt.x),
            stationarity_residual: residual,
            dist_to_limit: (&pt.x - x_star).norm(),
        });
    }

    let tail_len = tail_window.clamp(1, elements.len());
    let tail_start = elements.len() - tail_len;

    // (a): the stationarity residual has reached the threshold and x either
    // sits at the limit or is still contracting toward it over the tail.
    let first = &elements[tail_start];
    let last = elements.last().expect("nonempty");
    let res_ok = last.stationarity_residual <= tol_active.max(1e3 * f64::EPSILON);
    let dist_ok = last.dist_to_limit <= tol_active
        || last.dist_to_limit <= 0.9 * first.dist_to_limit + f64::EPSILON;
    let cond_a = if res_ok && dist_ok {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };

    // (b): support conditions at the limit point, up to tol_active.
    let seq_tail = &seq[tail_start..];
    let mut support_ok = true;
    for pt in seq_tail {
        for i in 0..prob.m() {
            if !star_sets.is_active_g(i) && pt.lam[i].abs() > tol_active {
                support_ok = false;
            }
        }
        for &i in &star_sets.nonzero_x {
            if pt.gam[i].abs() > tol_active {
                support_ok = false;
            }
        }
    }
    let cond_b = if support_ok { Verdict::Pass } else { Verdict::Fail };

    let cond_c = sign_condition(
        &elements,
        tail_start,
        prob.m(),
        |e| &e.lam_normalized,
        |e| &e.lam_products,
        beta_tol,
        alpha_tol,
    );
    let cond_d = sign_condition(
        &elements,
        tail_start,
        prob.p(),
        |e| &e.mu_normalized,
        |e| &e.mu_products,
        beta_tol,
        alpha_tol,
    );
    let cond_e = sign_condition(
        &elements,
        tail_start,
        prob.n(),
        |e| &e.gam_normalized,
        |e| &e.gam_products,
        beta_tol,
        alpha_tol,
    );

    let ccam = match (cond_a, cond_b) {
        (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
        (_, Verdict::Fail) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    let signs = [cond_c.verdict, cond_d.verdict, cond_e.verdict];
    let ccpam = if ccam == Verdict::Fail || signs.contains(&Verdict::Fail) {
        Verdict::Fail
    } else if ccam == Verdict::Pass && signs.iter().all(|&v| v == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };

    Ok(SequenceDiagnostics {
        elements,
        tail_start,
        cond_a,
        cond_b,
        cond_c,
        cond_d,
        cond_e,
        ccam,
        ccpam,
    })
}

/// Full stationarity report for a point or a run.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub ccm: CcmResidualReport,
    /// Witness for the pointwise condition, present when the residual
    /// certifies and the construction is feasible.
    pub ccs_pair: Option<DVector<f64>>,
    pub ccam_ok: Verdict,
    pub ccpam_ok: Verdict,
    pub diagnostics: Option<SequenceDiagnostics>,
}

/// Certify a single point: multiplier fit plus diagnostics of the constant
/// sequence carrying the fitted multipliers.
pub fn certify_point(
    prob: &CcopProblem,
    x: &DVector<f64>,
    tol_active: f64,
    tol_opt: f64,
) -> Result<Certificate> {
    let ccm = ccm_residual(prob, x, tol_active)?;
    let element = SequencePoint {
        x: x.clone(),
        lam: ccm.lam.clone(),
        mu: ccm.mu.clone(),
        gam: ccm.gam.clone(),
    };
    let seq: Vec<SequencePoint> = std::iter::repeat(element).take(10).collect();
    certify_with_sequence(prob, ccm, &seq, x, tol_active, tol_opt)
}

/// Certify with a supplied multiplier sequence converging to `x_star`.
pub fn certify_sequence(
    prob: &CcopProblem,
    seq: &[SequencePoint],
    x_star: &DVector<f64>,
    tol_active: f64,
    tol_opt: f64,
) -> Result<Certificate> {
    let ccm = ccm_residual(prob, x_star, tol_active)?;
    certify_with_sequence(prob, ccm, seq, x_star, tol_active, tol_opt)
}

fn certify_with_sequence(
    prob: &CcopProblem,
    ccm: CcmResidualReport,
    seq: &[SequencePoint],
    x_star: &DVector<f64>,
    tol_active: f64,
    tol_opt: f64,
) -> Result<Certificate> {
    let diagnostics = sequence_diagnostics(
        prob,
        seq,
        x_star,
        tol_active,
        DEFAULT_BETA_TOL,
        DEFAULT_ALPHA_TOL,
        default_tail_window(seq.len()),
    )?;
    let ccs_pair = if ccm.residual <= tol_opt {
        ccs_from_ccm(prob, &ccm, prob.kappa())
    } else {
        None
    };
    Ok(Certificate {
        ccs_pair,
        ccam_ok: diagnostics.ccam,
        ccpam_ok: diagnostics.ccpam,
        diagnostics: Some(diagnostics),
        ccm,
    })
}
