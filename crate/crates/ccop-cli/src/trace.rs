//! Machine-readable run traces.
//!
//! A trace is a JSON-lines file: the first line is the header (run
//! metadata, config snapshot, seed, wall time), the last line is the footer
//! (status, final certificate), and every line in between is one record.
//! All floats are written in decimal scientific notation with 17
//! significant digits, which round-trips every f64 bit-exactly, so
//! write-read-write reproduces the file byte for byte. Timestamps and wall
//! time live in the header only: the body of a trace is a pure function of
//! the run.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use ccop_core::auglag::SafeguardBounds;
use ccop_core::certificates::Certificate;
use ccop_core::inner::InnerConfig;
use ccop_core::salm::{SalmConfig, TraceRow};

/// serde_json formatter that renders every f64 with 17 significant digits.
struct Sci17;

impl serde_json::ser::Formatter for Sci17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize one value to a single JSON line with 17-digit floats.
pub fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sci17);
    value.serialize(&mut ser).expect("serializable record");
    String::from_utf8(out).expect("json is utf8")
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigRecord {
    pub rho0: f64,
    pub tau: f64,
    pub sigma: f64,
    pub eps0: f64,
    pub eps_theta: f64,
    pub eps_min: f64,
    pub tol_feas: f64,
    pub tol_opt: f64,
    pub tol_active: f64,
    pub max_outer: usize,
    pub rho_max: f64,
    pub lam_max: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub gam_min: f64,
    pub gam_max: f64,
    pub delta_max: f64,
    pub eta_max: f64,
    pub inner_max_iters: usize,
    pub inner_ls_shrink: f64,
    pub inner_ls_c1: f64,
    pub inner_bb_min: f64,
    pub inner_bb_max: f64,
    pub inner_window: usize,
    pub inner_trust_radius: f64,
}

impl From<&SalmConfig> for ConfigRecord {
    fn from(cfg: &SalmConfig) -> Self {
        Self {
            rho0: cfg.rho0,
            tau: cfg.tau,
            sigma: cfg.sigma,
            eps0: cfg.eps.eps0,
            eps_theta: cfg.eps.theta,
            eps_min: cfg.eps.eps_min,
            tol_feas: cfg.tol_feas,
            tol_opt: cfg.tol_opt,
            tol_active: cfg.tol_active,
            max_outer: cfg.max_outer,
            rho_max: cfg.rho_max,
            lam_max: cfg.bounds.lam_max,
            mu_min: cfg.bounds.mu_min,
            mu_max: cfg.bounds.mu_max,
            gam_min: cfg.bounds.gam_min,
            gam_max: cfg.bounds.gam_max,
            delta_max: cfg.bounds.delta_max,
            eta_max: cfg.bounds.eta_max,
            inner_max_iters: cfg.inner.max_iters,
            inner_ls_shrink: cfg.inner.ls_shrink,
            inner_ls_c1: cfg.inner.ls_c1,
            inner_bb_min: cfg.inner.bb_clip.0,
            inner_bb_max: cfg.inner.bb_clip.1,
            inner_window: cfg.inner.nonmonotone_window,
            inner_trust_radius: cfg.inner.trust_radius,
        }
    }
}

impl ConfigRecord {
    pub fn to_salm_config(&self) -> SalmConfig {
        SalmConfig {
            rho0: self.rho0,
            tau: self.tau,
            sigma: self.sigma,
            eps: ccop_core::salm::EpsSchedule {
                eps0: self.eps0,
                theta: self.eps_theta,
                eps_min: self.eps_min,
            },
            bounds: SafeguardBounds {
                lam_max: self.lam_max,
                mu_min: self.mu_min,
                mu_max: self.mu_max,
                gam_min: self.gam_min,
                gam_max: self.gam_max,
                delta_max: self.delta_max,
                eta_max: self.eta_max,
            },
            tol_feas: self.tol_feas,
            tol_opt: self.tol_opt,
            max_outer: self.max_outer,
            rho_max: self.rho_max,
            tol_active: self.tol_active,
            inner: InnerConfig {
                max_iters: self.inner_max_iters,
                ls_shrink: self.inner_ls_shrink,
                ls_c1: self.inner_ls_c1,
                bb_clip: (self.inner_bb_min, self.inner_bb_max),
                nonmonotone_window: self.inner_window,
                trust_radius: self.inner_trust_radius,
                ..InnerConfig::default()
            },
            safeguard_rule: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceHeader {
    pub instance: String,
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub unix_time_s: u64,
    pub wall_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<ConfigRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "row", rename_all = "snake_case")]
pub enum TraceRecord {
    /// One outer iteration of a solve.
    Outer {
        k: usize,
        rho_used: f64,
        rho_next: f64,
        eps: f64,
        viol_g: f64,
        viol_h: f64,
        viol_comp: f64,
        viol_card: f64,
        viol_box: f64,
        viol_l0: usize,
        multiplier_inf_norm: f64,
        progress_score: f64,
        inner_iters: usize,
        inner_status: String,
        inner_grad_norm: f64,
        ccm_residual: f64,
        objective: f64,
        sign_triggered: usize,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        sign_min_product: Option<f64>,
    },
    /// One support of an oracle enumeration.
    Support {
        support: Vec<usize>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        objective: Option<f64>,
        feasible: bool,
        solve_errors: usize,
    },
    /// One element of a certification sequence.
    Element {
        k: usize,
        pi: f64,
        stationarity_residual: f64,
        dist_to_limit: f64,
    },
}

impl From<&TraceRow> for TraceRecord {
    fn from(row: &TraceRow) -> Self {
        TraceRecord::Outer {
            k: row.k,
            rho_used: row.rho_used,
            rho_next: row.rho_next,
            eps: row.eps,
            viol_g: row.feasibility.viol_g,
            viol_h: row.feasibility.viol_h,
            viol_comp: row.feasibility.viol_comp,
            viol_card: row.feasibility.viol_card,
            viol_box: row.feasibility.viol_box,
            viol_l0: row.feasibility.viol_l0,
            multiplier_inf_norm: row.multiplier_inf_norm,
            progress_score: row.progress_score,
            inner_iters: row.inner_iters,
            inner_status: row.inner_status.as_str().to_string(),
            inner_grad_norm: row.inner_grad_norm,
            ccm_residual: row.ccm_residual,
            objective: row.objective,
            sign_triggered: row.signs.triggered,
            sign_min_product: row.signs.min_product,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CertificateRecord {
    pub ccm_residual: f64,
    pub feasible_within_tol: bool,
    pub lam: Vec<f64>,
    pub mu: Vec<f64>,
    pub gam: Vec<f64>,
    pub ccam: String,
    pub ccpam: String,
    pub cond_a: String,
    pub cond_b: String,
    pub cond_c: String,
    pub cond_d: String,
    pub cond_e: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub worst_sign_product: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ccs_witness: Option<Vec<f64>>,
}

impl From<&Certificate> for CertificateRecord {
    fn from(cert: &Certificate) -> Self {
        let d = cert.diagnostics.as_ref();
        let verdict = |v: ccop_core::certificates::Verdict| v.as_str().to_string();
        let worst = d.and_then(|d| {
            [&d.cond_c, &d.cond_d, &d.cond_e]
                .iter()
                .filter_map(|c| c.min_product)
                .min_by(f64::total_cmp)
        });
        Self {
            ccm_residual: cert.ccm.residual,
            feasible_within_tol: cert.ccm.feasible_within_tol,
            lam: cert.ccm.lam.iter().copied().collect(),
            mu: cert.ccm.mu.iter().copied().collect(),
            gam: cert.ccm.gam.iter().copied().collect(),
            ccam: verdict(cert.ccam_ok),
            ccpam: verdict(cert.ccpam_ok),
            cond_a: d.map_or("inconclusive".into(), |d| verdict(d.cond_a)),
            cond_b: d.map_or("inconclusive".into(), |d| verdict(d.cond_b)),
            cond_c: d.map_or("inconclusive".into(), |d| verdict(d.cond_c.verdict)),
            cond_d: d.map_or("inconclusive".into(), |d| verdict(d.cond_d.verdict)),
            cond_e: d.map_or("inconclusive".into(), |d| verdict(d.cond_e.verdict)),
            worst_sign_product: worst,
            ccs_witness: cert.ccs_pair.as_ref().map(|z| z.iter().copied().collect()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceFooter {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x_sparse: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_support: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<CertificateRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub rows: Vec<TraceRecord>,
    pub footer: TraceFooter,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] io::Error),
    #[error("trace parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("malformed trace: {0}")]
    Malformed(String),
}

impl TraceFile {
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{}", to_json_line(&self.header))?;
        for row in &self.rows {
            writeln!(w, "{}", to_json_line(row))?;
        }
        writeln!(w, "{}", to_json_line(&self.footer))?;
        Ok(())
    }

    pub fn to_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf8")
    }

    pub fn save(&self, path: &std::path::Path) -> io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(io::BufWriter::new(file))
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() < 2 {
            return Err(TraceError::Malformed(
                "a trace has at least a header and a footer line".into(),
            ));
        }
        let header: TraceHeader = serde_json::from_str(lines[0])?;
        let footer: TraceFooter = serde_json::from_str(lines[lines.len() - 1])?;
        let rows = lines[1..lines.len() - 1]
            .iter()
            .map(|l| serde_json::from_str(l))
            .collect::<Result<Vec<TraceRecord>, _>>()?;
        Ok(Self {
            header,
            rows,
            footer,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TraceError> {
        Ok(Self::parse(&std::fs::read_to_string(path)?)?)
    }
}

/// Body of a rendered trace: everything after the header line. Two runs of
/// the same invocation must agree byte for byte on this.
pub fn trace_body(text: &str) -> &str {
    match text.split_once('\n') {
        Some((_, body)) => body,
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_floats_round_trip_bit_exactly() {
        for &v in &[
            0.5,
            -1.0 / 3.0,
            1e-300,
            -2.2250738585072014e-308,
            9_007_199_254_740_993.0,
            f64::MIN_POSITIVE,
            0.1 + 0.2,
        ] {
            let line = to_json_line(&v);
            let back: f64 = serde_json::from_str(&line).unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {line} -> {back}");
        }
    }

    fn sample_trace() -> TraceFile {
        TraceFile {
            header: TraceHeader {
                instance: "axes2".into(),
                command: "solve".into(),
                version: "0.1.0".into(),
                seed: Some(42),
                unix_time_s: 1,
                wall_ms: 12.5,
                config: Some(ConfigRecord::from(&SalmConfig::default())),
            },
            rows: vec![TraceRecord::Outer {
                k: 1,
                rho_used: 1.0,
                rho_next: 1.0,
                eps: 0.5,
                viol_g: 0.0,
                viol_h: 0.0,
                viol_comp: 1.0 / 3.0,
                viol_card: 0.0,
                viol_box: 0.0,
                viol_l0: 0,
                multiplier_inf_norm: 0.1,
                progress_score: 0.7,
                inner_iters: 12,
                inner_status: "converged".into(),
                inner_grad_norm: 1e-9,
                ccm_residual: 0.25,
                objective: 0.5,
                sign_triggered: 1,
                sign_min_product: Some(-0.25),
            }],
            footer: TraceFooter {
                status: "ccm_stationary".into(),
                objective: Some(0.5),
                x_sparse: Some(vec![1.0, 0.0]),
                best_objective: None,
                best_support: None,
                certificate: None,
            },
        }
    }

    #[test]
    fn write_read_write_is_byte_identical() {
        let trace = sample_trace();
        let text = trace.to_string();
        let parsed = TraceFile::parse(&text).unwrap();
        assert_eq!(parsed, trace);
        assert_eq!(parsed.to_string(), text);
    }

    #[test]
    fn body_excludes_header_line() {
        let trace = sample_trace();
        let text = trace.to_string();
        let body = trace_body(&text);
        assert!(!body.contains("wall_ms"));
        assert!(body.contains("ccm_residual"));
    }

    #[test]
    fn config_snapshot_round_trips() {
        let cfg = SalmConfig::default();
        let rec = ConfigRecord::from(&cfg);
        let back = rec.to_salm_config();
        assert_eq!(back, cfg);
    }
}
