//! The bundled examples: each `NAME.eq` has a `NAME.expect.json` listing
//! checks on its solution, certificate and arithmetic conditions.

use std::path::{Path, PathBuf};

use gpseries::gps_core::GSeries;
use gpseries::convergence_analyzer::{ArithVerdict, Verdict};
use gpseries::CxJson;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commands::{certify_problem, check_arith, coefficient_list, solve, ArithRequest, CommandError, RunConfig};
use crate::source::{EquationSource, Loaded};

/// Default relative residual bound.
pub const DEFECT_BOUND: f64 = 1e-30;
/// Coefficients shared by the depth d and d + 2 solutions agree to this,
/// relative to their size.
pub const STABILITY_TOL: f64 = 1e-30;

#[derive(Clone, Debug, Deserialize)]
pub struct CoefficientExpect {
    pub exponent: String,
    pub value: String,
    #[serde(default)]
    pub tol: f64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct CertificateExpect {
    pub depth: usize,
    pub theorem: String,
    /// certified_convergent, hypothesis_failed or divergence_evidence.
    pub verdict: String,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ArithExpect {
    #[serde(flatten)]
    pub request: ArithRequest,
    /// pass, violation, divergence or inconclusive.
    pub verdict: String,
    #[serde(default)]
    pub witness: Option<Vec<i64>>,
    #[serde(default)]
    pub stabilized_at: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Expectation {
    pub depth: usize,
    #[serde(default)]
    pub coefficients: Vec<CoefficientExpect>,
    #[serde(default)]
    pub max_defect: Option<f64>,
    #[serde(default)]
    pub min_free_parameters: Option<usize>,
    /// A substring of the expected solver error; the solve must fail.
    #[serde(default)]
    pub solve_error: Option<String>,
    #[serde(default)]
    pub certificate: Option<CertificateExpect>,
    #[serde(default)]
    pub arith: Vec<ArithExpect>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub what: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntryReport {
    pub name: String,
    pub kind: String,
    pub depth: usize,
    pub frontier: Option<f64>,
    pub defect: Option<f64>,
    pub defect_next: Option<f64>,
    pub leading_terms: Vec<(CxJson, CxJson)>,
    pub checks: Vec<Check>,
}

impl EntryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusReport {
    pub entries: Vec<EntryReport>,
    pub passed: bool,
}

/// Directory of the examples shipped with the crate.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Names of the `.eq` files in `dir`, sorted.
pub fn entries(dir: &Path) -> Result<Vec<String>, CommandError> {
    let rd = std::fs::read_dir(dir).map_err(|e| CommandError::Validation(format!("{}: {e}", dir.display())))?;
    let mut names: Vec<String> = rd
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".eq")).map(String::from))
        .collect();
    names.sort();
    Ok(names)
}

pub fn load_entry(dir: &Path, name: &str, cfg: &RunConfig) -> Result<(Loaded, Expectation), CommandError> {
    let read = |ext: &str| {
        let p = dir.join(format!("{name}.{ext}"));
        std::fs::read_to_string(&p).map_err(|e| CommandError::Validation(format!("{}: {e}", p.display())))
    };
    let loaded = EquationSource::new(read("eq")?).load(cfg.precision_bits)?;
    let expect: Expectation = serde_json::from_str(&read("expect.json")?)
        .map_err(|e| CommandError::Validation(format!("{name}.expect.json: {e}")))?;
    Ok((loaded, expect))
}

fn check(checks: &mut Vec<Check>, what: impl Into<String>, ok: bool, detail: impl Into<String>) {
    checks.push(Check { what: what.into(), ok, detail: detail.into() });
}

/// Largest relative change of coefficients present in both series.
pub fn prefix_shift(short: &GSeries, long: &GSeries) -> f64 {
    short
        .iter()
        .map(|(m, c)| long.coeff(m).sub(c).abs_f64() / (1.0 + c.abs_f64()))
        .fold(0.0, f64::max)
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::CertifiedConvergent => "certified_convergent",
        Verdict::HypothesisFailed { .. } => "hypothesis_failed",
        Verdict::DivergenceEvidence { .. } => "divergence_evidence",
    }
}

fn arith_verdict_name(v: &ArithVerdict) -> &'static str {
    match v {
        ArithVerdict::PassUpToBound => "pass",
        ArithVerdict::ViolationWitness(_) => "violation",
        ArithVerdict::DivergenceEvidence { .. } => "divergence",
        ArithVerdict::Inconclusive => "inconclusive",
    }
}

pub fn run_entry(name: &str, loaded: &Loaded, expect: &Expectation, cfg: &RunConfig) -> EntryReport {
    let mut checks = vec![];
    let d = expect.depth;
    let mut report = EntryReport {
        name: name.into(),
        kind: loaded.problem.kind().into(),
        depth: d,
        frontier: None,
        defect: None,
        defect_next: None,
        leading_terms: vec![],
        checks: vec![],
    };
    match (solve(loaded, d, None), &expect.solve_error) {
        (Err(e), Some(want)) => check(&mut checks, "solve error", e.to_string().contains(want.as_str()), e.to_string()),
        (Ok(_), Some(want)) => check(&mut checks, "solve error", false, format!("expected an error containing `{want}`")),
        (Err(e), None) => check(&mut checks, "solve", false, e.to_string()),
        (Ok(s), None) => {
            report.frontier = Some(s.frontier);
            report.defect = Some(s.defect);
            report.leading_terms = coefficient_list(&s.series).into_iter().take(8).collect();
            let bound = expect.max_defect.unwrap_or(DEFECT_BOUND);
            check(&mut checks, format!("residual at depth {d}"), s.defect <= bound, format!("{:e}", s.defect));
            match solve(loaded, d + 2, None) {
                Ok(next) => {
                    report.defect_next = Some(next.defect);
                    check(
                        &mut checks,
                        format!("residual at depth {}", d + 2),
                        next.defect <= bound,
                        format!("{:e}", next.defect),
                    );
                    let shift = prefix_shift(&s.series, &next.series);
                    check(&mut checks, "prefix stability", shift <= STABILITY_TOL, format!("{shift:e}"));
                }
                Err(e) => check(&mut checks, format!("solve at depth {}", d + 2), false, e.to_string()),
            }
            if let Some(k) = expect.min_free_parameters {
                let n = s.transcript.free_parameters.len();
                check(&mut checks, "free parameters", n >= k, format!("{n}"));
            }
            let sg = s.series.semigroup();
            for ce in &expect.coefficients {
                let what = format!("coefficient at {}", ce.exponent);
                let (lam, want) = match (loaded.env.constant_str(&ce.exponent), loaded.env.constant_str(&ce.value)) {
                    (Ok(l), Ok(v)) => (l, v),
                    (Err(e), _) | (_, Err(e)) => {
                        check(&mut checks, what, false, e.to_string());
                        continue;
                    }
                };
                let got = s
                    .series
                    .iter()
                    .find(|(m, _)| sg.value(m).sub(&lam).abs_f64() < 1e-20)
                    .map(|(_, c)| c.clone())
                    .unwrap_or_else(gpseries::Cx::zero);
                let err = got.sub(&want).abs_f64();
                let tol = ce.tol * (1.0 + want.abs_f64());
                check(&mut checks, what, err <= tol, format!("error {err:e}"));
            }
        }
    }
    if let Some(ce) = &expect.certificate {
        let ccfg = RunConfig { depth: ce.depth, ..cfg.clone() };
        match certify_problem(loaded, &ccfg) {
            Ok(cert) => {
                let v = verdict_name(&cert.verdict);
                check(
                    &mut checks,
                    "certificate",
                    cert.theorem == ce.theorem && v == ce.verdict,
                    format!("theorem {} {v}", cert.theorem),
                );
            }
            Err(e) => check(&mut checks, "certificate", false, e.to_string()),
        }
    }
    for ae in &expect.arith {
        let what = format!("{:?} check", ae.request.kind).to_lowercase();
        match check_arith(&ae.request, &loaded.env, cfg) {
            Ok(rep) => {
                let v = arith_verdict_name(&rep.verdict);
                let mut ok = v == ae.verdict;
                if let Some(w) = &ae.witness {
                    ok &= rep.witness().map(|x| &x.m_vector == w && x.reproduced).unwrap_or(false);
                }
                if let Some(j) = ae.stabilized_at {
                    ok &= rep.stabilized_at.map(|s| s <= j).unwrap_or(false);
                }
                let at = rep.witness().map(|w| format!(" at {:?}", w.m_vector)).unwrap_or_default();
                check(&mut checks, what, ok, format!("{v}{at}"));
            }
            Err(e) => check(&mut checks, what, false, e.to_string()),
        }
    }
    report.checks = checks;
    report
}

pub fn run_corpus(dir: &Path, cfg: &RunConfig) -> Result<CorpusReport, CommandError> {
    let mut out = vec![];
    for name in entries(dir)? {
        let (loaded, expect) = load_entry(dir, &name, cfg)?;
        out.push(run_entry(&name, &loaded, &expect, cfg));
    }
    let passed = out.iter().all(EntryReport::passed);
    Ok(CorpusReport { entries: out, passed })
}

pub fn to_json(r: &CorpusReport) -> Value {
    serde_json::to_value(r).unwrap_or(Value::Null)
}
