//! Subcommand implementations. Each returns the process exit code:
//! 0 for a certified solve or successful certification, 1 for a clean run
//! that did not certify, 2 for infeasibility, 3 for iteration/penalty
//! limits, 4 for usage and input errors (mapped by the binary).

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ccop_core::certificates;
use ccop_core::oracle::{self, OracleConfig};
use ccop_core::salm::{self, SalmConfig, SalmStatus};

use crate::generate;
use crate::instance::{load_instance, LoadedInstance};
use crate::trace::{
    CertificateRecord, ConfigRecord, TraceFile, TraceFooter, TraceHeader, TraceRecord,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_STATIONARY: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

pub fn status_exit_code(status: SalmStatus) -> i32 {
    match status {
        SalmStatus::CcmStationary => EXIT_OK,
        SalmStatus::Infeasible => EXIT_INFEASIBLE,
        SalmStatus::RhoLimit | SalmStatus::OuterLimit | SalmStatus::InnerFailure => EXIT_LIMIT,
    }
}

/// Comma-separated float list, e.g. "2,2" or "0.5,1,0".
pub fn parse_point(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid number `{t}` in point `{s}`"))
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub rho0: Option<f64>,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub tol_feas: Option<f64>,
    pub tol_opt: Option<f64>,
    pub tol_active: Option<f64>,
    pub max_outer: Option<usize>,
    pub rho_max: Option<f64>,
}

impl ConfigOverrides {
    pub fn apply(&self, mut cfg: SalmConfig) -> SalmConfig {
        if let Some(v) = self.rho0 {
            cfg.rho0 = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.tol_feas {
            cfg.tol_feas = v;
        }
        if let Some(v) = self.tol_opt {
            cfg.tol_opt = v;
        }
        if let Some(v) = self.tol_active {
            cfg.tol_active = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.rho_max {
            cfg.rho_max = v;
        }
        cfg
    }
}

fn header(
    instance: &str,
    command: &str,
    seed: Option<u64>,
    config: Option<ConfigRecord>,
    started: Instant,
) -> TraceHeader {
    TraceHeader {
        instance: instance.to_string(),
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        unix_time_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        config,
    }
}

fn load(path: &Path) -> anyhow::Result<LoadedInstance> {
    let loaded = load_instance(path)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded)
}

pub struct SolveInvocation {
    pub problem: PathBuf,
    pub x0: Option<String>,
    pub kappa: Option<usize>,
    pub overrides: ConfigOverrides,
    pub seed: Option<u64>,
    pub trace: Option<PathBuf>,
}

pub fn cmd_solve(inv: &SolveInvocation) -> anyhow::Result<i32> {
    let started = Instant::now();
    let loaded = load(&inv.problem)?;
    let mut prob = loaded.problem;
    if let Some(kappa) = inv.kappa {
        prob = prob.with_kappa(kappa)?;
    }
    let cfg = inv.overrides.apply(SalmConfig::default());

    let x0 = match (&inv.x0, inv.seed) {
        (Some(text), _) => {
            let v = parse_point(text)?;
            if v.len() != prob.n() {
                bail!("x0 has {} entries, problem has n = {}", v.len(), prob.n());
            }
            DVector::from_vec(v)
        }
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DVector::from_fn(prob.n(), |_, _| rng.random_range(-1.0..1.0))
        }
        (None, None) => DVector::zeros(prob.n()),
    };

    let result = salm::solve(&prob, &x0, &cfg)?;
    let code = status_exit_code(result.status);

    println!(
        "status = {}  objective = {:.9e}  ccm_residual = {:.3e}  outer_iters = {}",
        result.status.as_str(),
        result.objective,
        result.certificate.ccm.residual,
        result.trace.rows.len()
    );
    println!(
        "x_sparse = [{}]",
        result
            .x_sparse
            .iter()
            .map(|v| format!("{v:.9e}"))
            .collect::<Vec<_>>()
            .join(", ")
    );

    if let Some(path) = &inv.trace {
        let rows = result.trace.rows.iter().map(TraceRecord::from).collect();
        let footer = TraceFooter {
            status: result.status.as_str().to_string(),
            objective: Some(result.objective),
            x_sparse: Some(result.x_sparse.iter().copied().collect()),
            best_objective: None,
            best_support: None,
            certificate: Some(CertificateRecord::from(&result.certificate)),
        };
        TraceFile {
            header: header(
                prob.name(),
                "solve",
                inv.seed,
                Some(ConfigRecord::from(&cfg)),
                started,
            ),
            rows,
            footer,
        }
        .save(path)?;
    }
    Ok(code)
}

pub fn cmd_oracle(
    problem: &Path,
    oracle_cap: usize,
    seed: u64,
    overrides: &ConfigOverrides,
    trace: Option<&Path>,
) -> anyhow::Result<i32> {
    let started = Instant::now();
    let loaded = load(problem)?;
    let cfg = OracleConfig {
        max_n: oracle_cap,
        seed,
        salm: overrides.apply(
            OracleConfig::default().salm,
        ),
        ..OracleConfig::default()
    };
    let result = oracle::enumerate_supports(&loaded.problem, &cfg)?;

    match &result.best {
        Some(best) => println!(
            "best_f = {:.9e} at support {:?} ({} supports enumerated)",
            best.objective, best.support, result.enumerated
        ),
        None => println!(
            "no feasible support found ({} supports enumerated)",
            result.enumerated
        ),
    }

    if let Some(path) = trace {
        let rows = result
            .per_support
            .iter()
            .map(|rec| TraceRecord::Support {
                support: rec.support.clone(),
                objective: rec.objective,
                feasible: rec.feasible,
                solve_errors: rec.solve_errors,
            })
            .collect();
        let footer = TraceFooter {
            status: if result.best.is_some() {
                "oracle_done".into()
            } else {
                "oracle_no_feasible".into()
            },
            objective: None,
            x_sparse: result
                .best
                .as_ref()
                .map(|b| b.x.iter().copied().collect()),
            best_objective: result.best.as_ref().map(|b| b.objective),
            best_support: result.best.as_ref().map(|b| b.support.clone()),
            certificate: None,
        };
        TraceFile {
            header: header(
                loaded.problem.name(),
                "oracle",
                Some(seed),
                Some(ConfigRecord::from(&cfg.salm)),
                started,
            ),
            rows,
            footer,
        }
        .save(path)?;
    }

    Ok(if result.best.is_some() {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

pub fn cmd_certify(
    problem: &Path,
    point: &str,
    tol_active: f64,
    tol_opt: f64,
    trace: Option<&Path>,
) -> anyhow::Result<i32> {
    let started = Instant::now();
    let loaded = load(problem)?;
    let prob = loaded.problem;
    let x = parse_point(point)?;
    if x.len() != prob.n() {
        bail!("point has {} entries, problem has n = {}", x.len(), prob.n());
    }
    let x = DVector::from_vec(x);
    let cert = certificates::certify_point(&prob, &x, tol_active, tol_opt)?;
    let certified = cert.ccm.residual <= tol_opt;

    println!(
        "ccm_residual = {:.9e} ({})",
        cert.ccm.residual,
        if certified {
            "ccm stationary"
        } else {
            "not stationary"
        }
    );
    println!(
        "ccam = {}  ccpam = {}  feasible = {}",
        cert.ccam_ok.as_str(),
        cert.ccpam_ok.as_str(),
        cert.ccm.feasible_within_tol
    );

    if let Some(path) = trace {
        let rows = cert
            .diagnostics
            .as_ref()
            .map(|d| {
                d.elements
                    .iter()
                    .enumerate()
                    .map(|(k, e)| TraceRecord::Element {
                        k: k + 1,
                        pi: e.pi,
                        stationarity_residual: e.stationarity_residual,
                        dist_to_limit: e.dist_to_limit,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let footer = TraceFooter {
            status: if certified {
                "certified".into()
            } else {
                "not_stationary".into()
            },
            objective: Some(prob.eval_f(&x)?),
            x_sparse: None,
            best_objective: None,
            best_support: None,
            certificate: Some(CertificateRecord::from(&cert)),
        };
        TraceFile {
            header: header(prob.name(), "certify", None, None, started),
            rows,
            footer,
        }
        .save(path)?;
    }

    Ok(if certified { EXIT_OK } else { EXIT_NOT_STATIONARY })
}

pub enum GenerateKind {
    Portfolio,
    SparseLsq { rows: usize, noise: f64 },
}

pub fn cmd_generate(
    kind: &GenerateKind,
    seed: u64,
    n: usize,
    kappa: usize,
    out: &Path,
) -> anyhow::Result<i32> {
    if kappa == 0 || kappa >= n {
        bail!("need 0 < kappa < n, got kappa = {kappa}, n = {n}");
    }
    let spec = match kind {
        GenerateKind::Portfolio => {
            if n < 3 {
                bail!("portfolio needs n >= 3");
            }
            generate::generate_portfolio(seed, n, kappa)
        }
        GenerateKind::SparseLsq { rows, noise } => {
            generate::generate_sparse_lsq(seed, n, kappa, *rows, *noise)
        }
    };
    // validate what we wrote
    spec.build()?;
    let mut text = crate::trace::to_json_line(&spec);
    text.push('\n');
    std::fs::write(out, text)?;
    println!("wrote {} ({})", out.display(), spec.name);
    Ok(EXIT_OK)
}

pub fn cmd_batch(
    problems: &[PathBuf],
    overrides: &ConfigOverrides,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> anyhow::Result<i32> {
    if problems.is_empty() {
        bail!("batch needs at least one problem file");
    }
    let results: Vec<anyhow::Result<i32>> = std::thread::scope(|scope| {
        let handles: Vec<_> = problems
            .iter()
            .map(|path| {
                let overrides = overrides.clone();
                scope.spawn(move || {
                    let trace = match out_dir {
                        Some(dir) => {
                            let stem = path
                                .file_stem()
                                .map(|s| s.to_string_lossy().to_string())
                                .unwrap_or_else(|| "problem".into());
                            Some(dir.join(format!("{stem}.trace.jsonl")))
                        }
                        None => None,
                    };
                    cmd_solve(&SolveInvocation {
                        problem: path.clone(),
                        x0: None,
                        kappa: None,
                        overrides,
                        seed,
                        trace,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("batch worker panicked"))
            .collect()
    });

    let mut worst = EXIT_OK;
    for (path, res) in problems.iter().zip(results) {
        match res {
            Ok(code) => {
                println!("{}: exit {code}", path.display());
                worst = worst.max(code);
            }
            Err(e) => {
                eprintln!("{}: error: {e:#}", path.display());
                worst = worst.max(EXIT_USAGE);
            }
        }
    }
    Ok(worst)
}
