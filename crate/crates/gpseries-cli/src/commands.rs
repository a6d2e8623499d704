//! The subcommands as library functions returning JSON.

use std::collections::BTreeMap;

use gpseries::convergence_analyzer::{
    bruno_check, certify, diophantine_check, fit_gamma, siegel_check, AnalyzerError, ArithmeticReport, CertifyConfig,
    ConvergenceCertificate,
};
use gpseries::exponent_lattice::Semigroup;
use gpseries::formal_solver::{
    compose_taylor, extend_solution, prepare, reduce_equation, solve_boettcher, solve_schroeder, solve_taylor,
    taylor_coeffs, SolveTranscript, SolverError,
};
use gpseries::gps_core::GSeries;
use gpseries::{Cx, CxJson, DEFAULT_PREC};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::source::{Env, Loaded, Problem, SourceError};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Computation(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Validation(_) => 1,
            CommandError::Computation(_) => 2,
            CommandError::Mismatch(_) => 3,
        }
    }
}

impl From<SourceError> for CommandError {
    fn from(e: SourceError) -> Self {
        CommandError::Validation(e.to_string())
    }
}

impl From<SolverError> for CommandError {
    fn from(e: SolverError) -> Self {
        CommandError::Computation(e.to_string())
    }
}

impl From<AnalyzerError> for CommandError {
    fn from(e: AnalyzerError) -> Self {
        CommandError::Computation(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CommandError>;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub precision_bits: usize,
    pub depth: usize,
    pub trunc_re: Option<f64>,
    pub scan_bound: u64,
    pub sector_center: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { precision_bits: DEFAULT_PREC, depth: 8, trunc_re: None, scan_bound: 200, sector_center: 0.0 }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.precision_bits < 64 {
            return Err(CommandError::Validation("precision must be at least 64 bits".into()));
        }
        if self.depth < 1 {
            return Err(CommandError::Validation("depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// A solved problem.
#[derive(Clone, Debug)]
pub struct Solved {
    pub series: GSeries,
    pub transcript: SolveTranscript,
    /// Largest exponent real part up to which the coefficients are final.
    pub frontier: f64,
    /// Largest relative residual coefficient up to the frontier.
    pub defect: f64,
}

/// Coefficients y_k q^k - f(y)_k, k <= depth.
fn schroeder_defect(f: &[Cx], y: &[Cx], depth: usize) -> f64 {
    let q = f.get(1).cloned().unwrap_or_else(Cx::zero);
    let fy = compose_taylor(f, y, depth);
    (1..=depth).map(|k| y[k].mul(&q.powi(k as i64)).sub(&fy[k]).abs_f64() / (1.0 + fy[k].abs_f64())).fold(0.0, f64::max)
}

/// Coefficients of y(x^l) - g(y(x)) through order depth + l - 1, the range
/// the solved y_1..y_depth fix.
fn boettcher_defect(g: &[Cx], ell: usize, y: &[Cx], depth: usize) -> f64 {
    let top = depth + ell - 1;
    let gy = compose_taylor(g, y, top);
    (1..=top)
        .map(|m| {
            let lhs = if m % ell == 0 && m / ell <= depth { y[m / ell].clone() } else { Cx::zero() };
            lhs.sub(&gy[m]).abs_f64() / (1.0 + gy[m].abs_f64())
        })
        .fold(0.0, f64::max)
}

pub fn solve(loaded: &Loaded, depth: usize, trunc_re: Option<f64>) -> Result<Solved> {
    let solved = match &loaded.problem {
        Problem::Equation { eq, prefix } => {
            let (phi, transcript) = if prefix.is_empty() {
                solve_taylor(eq, depth)?
            } else {
                let red = prepare(eq, prefix)?;
                extend_solution(&red, depth, &BTreeMap::new())?
            };
            let phi = match trunc_re {
                Some(t) if t < phi.trunc_re() => phi.truncate(t, phi.trunc_deg()),
                _ => phi,
            };
            let frontier = phi.trunc_re();
            let defect = eq.relative_defect(&phi, frontier).map_err(|e| CommandError::Computation(e.to_string()))?;
            Solved { series: phi, transcript, frontier, defect }
        }
        Problem::Schroeder { f } => {
            let (phi, transcript) = solve_schroeder(f, depth)?;
            let y = taylor_coeffs(&phi, depth);
            Solved { defect: schroeder_defect(f, &y, depth), series: phi, transcript, frontier: depth as f64 }
        }
        Problem::Boettcher { g, ell } => {
            let (phi, transcript) = solve_boettcher(g, *ell, depth)?;
            let y = taylor_coeffs(&phi, depth);
            Solved { defect: boettcher_defect(g, *ell, &y, depth), series: phi, transcript, frontier: depth as f64 }
        }
    };
    Ok(solved)
}

/// Ordered (exponent, coefficient) pairs of a series.
pub fn coefficient_list(s: &GSeries) -> Vec<(CxJson, CxJson)> {
    let sg = s.semigroup();
    s.iter_ordered().into_iter().map(|(m, c)| (CxJson::from(&sg.value(m)), CxJson::from(c))).collect()
}

pub fn solve_json(loaded: &Loaded, cfg: &RunConfig) -> Result<Value> {
    let s = solve(loaded, cfg.depth, cfg.trunc_re)?;
    Ok(json!({
        "kind": loaded.problem.kind(),
        "depth": cfg.depth,
        "precision_bits": cfg.precision_bits,
        "frontier": s.frontier,
        "relative_defect": s.defect,
        "coefficients": coefficient_list(&s.series)
            .into_iter()
            .map(|(e, c)| json!({ "exponent": e, "value": c }))
            .collect::<Vec<_>>(),
        "series": s.series.to_json(),
        "transcript": s.transcript,
    }))
}

fn equation_parts(loaded: &Loaded) -> Result<(&gpseries::equation_model::FunctionalEquation, &[(Cx, Cx)])> {
    match &loaded.problem {
        Problem::Equation { eq, prefix } => Ok((eq, prefix)),
        other => Err(CommandError::Validation(format!("`{}` problems have no functional equation", other.kind()))),
    }
}

/// The reduction along the first `terms` terms of the depth-d solution.
pub fn reduce_json(loaded: &Loaded, cfg: &RunConfig, terms: usize) -> Result<Value> {
    let (eq, _) = equation_parts(loaded)?;
    let s = solve(loaded, cfg.depth, cfg.trunc_re)?;
    let prefix = gpseries::formal_solver::solution_prefix(&s.series, terms.max(1));
    let red = reduce_equation(eq, &prefix, 1)?;
    Ok(red.to_json())
}

/// Extra solved levels beyond the certificate depth.
const CERTIFY_SLACK: usize = 4;

pub fn certify_problem(loaded: &Loaded, cfg: &RunConfig) -> Result<ConvergenceCertificate> {
    let (eq, _) = equation_parts(loaded)?;
    let s = solve(loaded, cfg.depth + CERTIFY_SLACK, None)?;
    let ccfg = CertifyConfig {
        depth: cfg.depth,
        precision: cfg.precision_bits,
        scan_bound: cfg.scan_bound,
        ..Default::default()
    };
    Ok(certify(eq, &s.series, &ccfg)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArithKind {
    Diophantine,
    Siegel,
    Bruno,
}

/// Input of an arithmetic check. Numbers are constant expressions.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct ArithRequest {
    pub kind: ArithKind,
    /// Rotation number; q defaults to e^(2 pi i omega).
    #[serde(default)]
    pub omega: Option<String>,
    #[serde(default)]
    pub q: Option<String>,
    #[serde(default)]
    pub generators: Vec<String>,
    #[serde(default)]
    pub roots: Vec<String>,
    #[serde(default)]
    pub c: Option<f64>,
    /// gamma (Diophantine) or nu (Siegel).
    #[serde(default)]
    pub exponent: Option<f64>,
    #[serde(default)]
    pub bound: Option<u64>,
    #[serde(default)]
    pub depth: Option<usize>,
}

pub fn check_arith(req: &ArithRequest, env: &Env, cfg: &RunConfig) -> Result<ArithmeticReport> {
    let p = env.prec;
    let val = |s: &str| env.constant_str(s).map_err(CommandError::from);
    let omega = req.omega.as_deref().map(val).transpose()?;
    let q = match (&req.q, &omega) {
        (Some(q), _) => Some(val(q)?),
        (None, Some(w)) => Some(Cx::two_pi(p).mul(&Cx::i()).mul(w).exp(p)),
        (None, None) => None,
    };
    let bound = req.bound.unwrap_or(cfg.scan_bound);
    let need_q = || q.clone().ok_or_else(|| CommandError::Validation("--omega or --q is required".into()));
    match req.kind {
        ArithKind::Bruno => {
            let w = omega.ok_or_else(|| CommandError::Validation("--omega is required".into()))?;
            Ok(bruno_check(&w, req.depth.unwrap_or(cfg.depth))?)
        }
        ArithKind::Siegel => Ok(siegel_check(&need_q()?, req.c.unwrap_or(0.5), req.exponent.unwrap_or(1.1), bound)),
        ArithKind::Diophantine => {
            let q = need_q()?;
            let gens = if req.generators.is_empty() {
                vec![Cx::one()]
            } else {
                req.generators.iter().map(|g| val(g)).collect::<Result<Vec<_>>>()?
            };
            let roots = if req.roots.is_empty() {
                vec![Cx::one()]
            } else {
                req.roots.iter().map(|r| val(r)).collect::<Result<Vec<_>>>()?
            };
            let sg = Semigroup::new(gens).map_err(|e| CommandError::Validation(e.to_string()))?;
            let (c, gamma, fitted) = match (req.c, req.exponent) {
                (Some(c), Some(g)) => (c, g, false),
                _ => match fit_gamma(&sg, &q, &roots, bound)? {
                    Some((c, g)) => (req.c.unwrap_or(c), req.exponent.unwrap_or(g), true),
                    None => return Err(CommandError::Computation("no (c, gamma) fits: a first-level value vanishes".into())),
                },
            };
            let mut rep = diophantine_check(&sg, &q, &roots, c, gamma, bound)?;
            if fitted {
                rep.fitted_gamma = Some(gamma);
            }
            Ok(rep)
        }
    }
}
