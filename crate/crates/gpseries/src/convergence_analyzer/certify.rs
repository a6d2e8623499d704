//! Convergence certificates: which theorem applies, and the numerical
//! evidence behind the verdict.

use std::collections::BTreeMap;

use serde::Serialize;

use super::arithmetic::{diophantine_check, fit_gamma, ArithmeticReport};
use super::majorant::{delta_table, mahler_alpha, majorant, DeltaTable, MajorantRun, Variant, MAX_DELTA_DEPTH};
use super::roots::{alpha_bound, poly_roots, AlphaBound};
use super::AnalyzerError;
use crate::equation_model::{leading_data, EquationError, FunctionalEquation, LeadingData};
use crate::exponent_lattice::Semigroup;
use crate::formal_solver::{extend_solution, reduce_equation, solution_prefix, ReducedEquation, SolverError};
use crate::gps_core::{evaluate, GSeries, OperatorKind};
use crate::scalar::{Cx, CxJson};

const CIRCLE_TOL: f64 = 1e-9;
/// Fitted Diophantine exponents above this are treated as failure.
/// Quadratic terms below this are read as geometric growth with a
/// polynomial factor (ln k! has curvature about 1/(2k)).
const MIN_CURVATURE: f64 = 0.02;
const MAX_GAMMA: f64 = 16.0;

#[derive(Clone, Debug, Serialize)]
pub struct CertifyConfig {
    /// Levels of the majorant comparison.
    pub depth: usize,
    pub precision: usize,
    /// Largest |m| in the Diophantine scan.
    pub scan_bound: u64,
    /// Terms of the solution used as the reduction prefix.
    pub prefix_terms: usize,
    /// Point of the partial-sum evaluation.
    pub eval_point: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig { depth: 8, precision: crate::DEFAULT_PREC, scan_bound: 200, prefix_terms: 16, eval_point: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Inside,
    On,
    Outside,
}

/// Location of each |q^rho_i| relative to the unit circle and the special
/// case it selects, if any.
#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub moduli: Vec<f64>,
    pub positions: Vec<Position>,
    /// One of 'a'..'e'.
    pub case: Option<char>,
}

fn position(modulus: f64) -> Position {
    if modulus < 1.0 - CIRCLE_TOL {
        Position::Inside
    } else if modulus > 1.0 + CIRCLE_TOL {
        Position::Outside
    } else {
        Position::On
    }
}

fn log_q(op: &OperatorKind) -> Option<&Cx> {
    match op {
        OperatorKind::QDifference { log_q, .. } => Some(log_q),
        _ => None,
    }
}

/// Classifies the generators of `sg` against the unit circle, given
/// whether A_0 and A_n vanish.
pub fn classify_case(sg: &Semigroup, log_q: &Cx, a0_nonzero: bool, an_nonzero: bool) -> CaseReport {
    let moduli: Vec<f64> = sg.generators().iter().map(|g| g.mul(log_q).re_f64().exp()).collect();
    let positions: Vec<Position> = moduli.iter().map(|&m| position(m)).collect();
    let all = |p: Position| positions.iter().all(|&x| x == p);
    let none = |p: Position| positions.iter().all(|&x| x != p);
    let case = if all(Position::Inside) && a0_nonzero {
        Some('a')
    } else if all(Position::Outside) && an_nonzero {
        Some('b')
    } else if all(Position::On) {
        Some('c')
    } else if none(Position::Outside) && a0_nonzero {
        Some('d')
    } else if none(Position::Inside) && an_nonzero {
        Some('e')
    } else {
        None
    };
    CaseReport { moduli, positions, case }
}

/// Least-squares fit of max ln|c| per level against a + b s + c s^2.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    pub levels: Vec<i64>,
    pub log_max: Vec<f64>,
    pub linear: f64,
    pub quadratic: f64,
    pub sigma: f64,
    /// The quadratic term exceeds three standard errors and MIN_CURVATURE.
    pub super_geometric: bool,
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<([f64; 3], [[f64; 3]; 3])> {
    let mut m = [[0.0; 6]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3 + i] = 1.0;
    }
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..3 {
            if r != c {
                let f = m[r][c];
                let row = m[c];
                m[r].iter_mut().zip(row).for_each(|(v, w)| *v -= f * w);
            }
        }
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        inv[i].copy_from_slice(&m[i][3..]);
    }
    let x = [0, 1, 2].map(|i| (0..3).map(|j| inv[i][j] * b[j]).sum());
    Some((x, inv))
}

/// Needs at least five nonzero levels.
pub fn growth_fit(phi: &GSeries) -> Option<GrowthFit> {
    let mut per: BTreeMap<i64, f64> = BTreeMap::new();
    for (m, c) in phi.iter() {
        let v = c.abs_f64();
        if v > 0.0 && v.is_finite() {
            let e = per.entry(m.level()).or_insert(f64::NEG_INFINITY);
            *e = e.max(v.ln());
        }
    }
    if per.len() < 5 {
        return None;
    }
    let (levels, log_max): (Vec<i64>, Vec<f64>) = per.into_iter().unzip();
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (&s, &y) in levels.iter().zip(&log_max) {
        let row = [1.0, s as f64, (s * s) as f64];
        for i in 0..3 {
            b[i] += row[i] * y;
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    let (x, inv) = solve3(a, b)?;
    let rss: f64 = levels
        .iter()
        .zip(&log_max)
        .map(|(&s, &y)| {
            let s = s as f64;
            (y - x[0] - x[1] * s - x[2] * s * s).powi(2)
        })
        .sum();
    let dof = (levels.len() - 3) as f64;
    let sigma = (rss / dof * inv[2][2]).max(0.0).sqrt();
    let super_geometric = x[2] > 3.0 * sigma && x[2] > MIN_CURVATURE;
    Some(GrowthFit { levels, log_max, linear: x[1], quadratic: x[2], sigma, super_geometric })
}

/// Partial sums at a real point for the full series and its first half.
#[derive(Clone, Debug, Serialize)]
pub struct EvaluationEvidence {
    pub x: f64,
    pub terms: usize,
    pub full: (f64, f64),
    pub half: (f64, f64),
    pub difference: f64,
}

fn evaluation(phi: &GSeries, x: f64) -> EvaluationEvidence {
    let sg = phi.semigroup().clone();
    let p = phi.prec();
    let ordered = phi.iter_ordered();
    let mut half = GSeries::new(sg, f64::INFINITY, u64::MAX);
    for (m, c) in ordered.iter().take(ordered.len().div_ceil(2)) {
        half.insert((*m).clone(), (*c).clone());
    }
    let xc = Cx::from_f64(x, 0.0, p);
    let full = evaluate(phi, &xc, 0.0);
    let h = evaluate(&half, &xc, 0.0);
    EvaluationEvidence { x, terms: ordered.len(), full: full.to_f64(), half: h.to_f64(), difference: full.sub(&h).abs_f64() }
}

#[derive(Clone, Debug, Serialize)]
pub struct LeadingSummary {
    pub nu: CxJson,
    pub a: Vec<CxJson>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Evidence {
    pub leading: Option<LeadingSummary>,
    pub case: Option<CaseReport>,
    pub reduction: Option<serde_json::Value>,
    pub alpha: Option<AlphaBound>,
    pub majorant: Option<MajorantRun>,
    pub delta: Option<DeltaTable>,
    pub fitted_gamma: Option<f64>,
    pub arithmetic: Vec<ArithmeticReport>,
    pub growth: Option<GrowthFit>,
    pub evaluation: Option<EvaluationEvidence>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    CertifiedConvergent,
    HypothesisFailed { reason: String },
    DivergenceEvidence { reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceCertificate {
    /// "5", "6", "6bis-a".."6bis-e", "7" or "none".
    pub theorem: String,
    pub verdict: Verdict,
    pub evidence: Evidence,
    pub depth: usize,
    pub precision_bits: usize,
}

impl ConvergenceCertificate {
    pub fn is_certified(&self) -> bool {
        matches!(self.verdict, Verdict::CertifiedConvergent)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

struct Ctx<'a> {
    eq: &'a FunctionalEquation,
    phi: &'a GSeries,
    cfg: &'a CertifyConfig,
    ev: Evidence,
}

impl Ctx<'_> {
    fn done(self, theorem: &str, verdict: Verdict) -> ConvergenceCertificate {
        ConvergenceCertificate {
            theorem: theorem.into(),
            verdict,
            evidence: self.ev,
            depth: self.cfg.depth,
            precision_bits: self.cfg.precision,
        }
    }

    /// A failed hypothesis; reported as divergence evidence when the
    /// coefficients grow faster than geometrically.
    fn fail(mut self, theorem: &str, reason: String) -> ConvergenceCertificate {
        if self.ev.growth.as_ref().is_some_and(|g| g.super_geometric) {
            let g = self.ev.growth.as_ref().unwrap();
            let reason = format!(
                "{reason}; ln max|c| per level has quadratic term {:.3e} (sigma {:.1e})",
                g.quadratic, g.sigma
            );
            return self.done(theorem, Verdict::DivergenceEvidence { reason });
        }
        self.ev.evaluation = Some(evaluation(self.phi, self.cfg.eval_point));
        self.done(theorem, Verdict::HypothesisFailed { reason })
    }

    fn reduce(&mut self, n: usize) -> Result<Result<ReducedEquation, String>, AnalyzerError> {
        let prefix = solution_prefix(self.phi, self.cfg.prefix_terms);
        match reduce_equation(self.eq, &prefix, n) {
            Ok(red) => {
                self.ev.reduction = Some(serde_json::json!({
                    "n": red.prefix.len(),
                    "lambda_n": CxJson::from(&red.lambda_n),
                    "generators": red.sg.generators().iter().map(CxJson::from).collect::<Vec<_>>(),
                    "notes": red.notes,
                }));
                Ok(Ok(red))
            }
            Err(SolverError::PrefixTooShort(s)) => Ok(Err(format!("reduction: {s}"))),
            Err(SolverError::Equation(EquationError::NotSatisfied { reason, .. })) => Ok(Err(reason)),
            Err(e) => Err(e.into()),
        }
    }
}

fn nonzero(c: &Cx) -> bool {
    !c.is_negligible(1e-30)
}

/// Decides which convergence theorem covers the solution `phi` of `eq` and
/// checks its hypotheses and the majorant domination numerically.
pub fn certify(
    eq: &FunctionalEquation,
    phi: &GSeries,
    cfg: &CertifyConfig,
) -> Result<ConvergenceCertificate, AnalyzerError> {
    let mut cx = Ctx { eq, phi, cfg, ev: Evidence { growth: growth_fit(phi), ..Default::default() } };
    let partials = eq.partials_along(phi)?;
    let ld = match leading_data(&partials, eq.op()) {
        Ok(ld) => ld,
        Err(EquationError::NotSatisfied { reason, .. }) => return Ok(cx.fail("none", reason)),
        Err(e) => return Err(e.into()),
    };
    cx.ev.leading =
        Some(LeadingSummary { nu: CxJson::from(&ld.nu), a: ld.a.iter().map(CxJson::from).collect() });
    match eq.op() {
        OperatorKind::Differential => differential(cx, &ld),
        OperatorKind::QDifference { .. } => q_difference(cx, &ld),
        OperatorKind::Mahler { .. } => mahler(cx, &ld),
    }
}

fn differential(mut cx: Ctx, ld: &LeadingData) -> Result<ConvergenceCertificate, AnalyzerError> {
    let n = cx.eq.order();
    if !nonzero(&ld.a[n]) {
        return Ok(cx.fail("5", "A_n = 0: the highest-order partial starts after the others".into()));
    }
    let mut k = 1;
    let (red, alpha) = loop {
        let red = match cx.reduce(k)? {
            Ok(r) => r,
            Err(reason) => return Ok(cx.fail("5", reason)),
        };
        let l = red.l_coeffs().ok_or_else(|| AnalyzerError::MissingData("no leading data".into()))?.to_vec();
        match alpha_bound(&l, &red.lambda_n) {
            Ok(a) => break (red, a),
            Err(AnalyzerError::RootInHalfPlane { .. }) if red.prefix.len() < cx.cfg.prefix_terms.min(cx.phi.len()) => {
                cx.ev.notes.push(format!("N = {}: L(lambda_N + .) has a root with Re >= 0", red.prefix.len()));
                k = red.prefix.len() + 1;
            }
            Err(e) => return Ok(cx.fail("5", e.to_string())),
        }
    };
    let (psi, _) = extend_solution(&red, cx.cfg.depth, &BTreeMap::new())?;
    let mut run = majorant(&red, Variant::Differential, alpha.alpha, cx.cfg.depth)?;
    run.dominate(&red, &psi, None);
    cx.ev.alpha = Some(alpha);
    let ok = run.dominated();
    let worst = run.worst_ratio.iter().copied().fold(0.0, f64::max);
    cx.ev.majorant = Some(run);
    if ok {
        Ok(cx.done("5", Verdict::CertifiedConvergent))
    } else {
        Ok(cx.fail("5", format!("majorant does not dominate the solution (worst ratio {worst:.3e})")))
    }
}

fn mahler(mut cx: Ctx, ld: &LeadingData) -> Result<ConvergenceCertificate, AnalyzerError> {
    if !nonzero(&ld.a[0]) {
        return Ok(cx.fail("7", "A_0 = 0".into()));
    }
    let red = match cx.reduce(1)? {
        Ok(r) => r,
        Err(reason) => return Ok(cx.fail("7", reason)),
    };
    let (alpha, _) = mahler_alpha(&red)?;
    let (psi, _) = extend_solution(&red, cx.cfg.depth, &BTreeMap::new())?;
    let mut run = majorant(&red, Variant::Mahler, alpha, cx.cfg.depth)?;
    run.dominate(&red, &psi, None);
    let dominated = run.dominated();
    let monotone = run.alpha_certified || run.is_monotone();
    cx.ev.majorant = Some(run);
    if !dominated {
        return Ok(cx.fail("7", "majorant does not dominate the solution".into()));
    }
    if !monotone {
        return Ok(cx.fail("7", "majorant coefficients are not monotone".into()));
    }
    Ok(cx.done("7", Verdict::CertifiedConvergent))
}

fn q_difference(mut cx: Ctx, ld: &LeadingData) -> Result<ConvergenceCertificate, AnalyzerError> {
    let op = cx.eq.op().clone();
    let lq = log_q(&op).expect("q-difference operator").clone();
    let p = cx.cfg.precision;
    let n = cx.eq.order();
    let a0 = nonzero(&ld.a[0]);
    let an = nonzero(&ld.a[n]);
    let case = classify_case(cx.phi.semigroup(), &lq, a0, an);
    let general = a0 && an;
    let theorem = match (general, case.case) {
        (true, _) => "6".to_string(),
        (false, Some(c)) => format!("6bis-{c}"),
        (false, None) => {
            let mut missing = vec![];
            if !a0 {
                missing.push("A_0 = 0");
            }
            if !an {
                missing.push("A_n = 0");
            }
            let reason = format!("{}; no special case fits |q^rho| positions {:?}", missing.join(" and "), case.positions);
            cx.ev.case = Some(case);
            return Ok(cx.fail("none", reason));
        }
    };
    let case_letter = if general { None } else { case.case };
    cx.ev.case = Some(case);
    let red = match cx.reduce(1)? {
        Ok(r) => r,
        Err(reason) => return Ok(cx.fail(&theorem, reason)),
    };

    // roots of (z - 1) L(z), filtered by location in the special cases
    let mut roots = vec![Cx::one()];
    roots.extend(poly_roots(&ld.a));
    let keep = |r: &Cx| {
        let pos = position(r.abs_f64());
        match case_letter {
            None => true,
            Some('a') | Some('b') => false,
            Some('c') => pos == Position::On,
            Some('d') => pos != Position::Outside,
            _ => pos != Position::Inside,
        }
    };
    // the divisors actually met are L(q^(lambda_N + m.rho)): rescale by q^-lambda_N
    let shift = red.lambda_n.mul(&lq).neg().exp(p);
    let scanned: Vec<Cx> = roots
        .iter()
        .filter(|r| keep(r))
        .map(|r| if r.sub(&Cx::one()).is_zero() { r.clone() } else { r.mul(&shift) })
        .collect();
    let q = lq.exp(p);
    let (c, gamma) = if scanned.is_empty() {
        cx.ev.notes.push("no Diophantine condition in this case".into());
        (0.5, 0.5)
    } else {
        match fit_gamma(&red.sg, &q, &scanned, cx.cfg.scan_bound)? {
            Some((c, g)) if g <= MAX_GAMMA => (c, g),
            other => {
                let reason = match other {
                    Some((_, g)) => format!("Diophantine scan needs exponent {g} > {MAX_GAMMA}"),
                    None => "Diophantine scan: a divisor vanishes exactly".into(),
                };
                return Ok(cx.fail(&theorem, reason));
            }
        }
    };
    cx.ev.fitted_gamma = Some(gamma);
    let mut arith_ok = true;
    if !scanned.is_empty() {
        let rep = diophantine_check(&red.sg, &q, &scanned, c, gamma, cx.cfg.scan_bound)?;
        arith_ok = rep.passed();
        cx.ev.arithmetic.push(rep);
    }
    let depth = cx.cfg.depth.min(MAX_DELTA_DEPTH);
    if depth < cx.cfg.depth {
        cx.ev.notes.push(format!("weights computed to depth {depth}"));
    }
    let table = delta_table(&red, gamma, depth)?;
    let (psi, _) = extend_solution(&red, depth, &BTreeMap::new())?;
    let mut run = majorant(&red, Variant::QDiff, table.alpha, depth)?;
    run.dominate(&red, &psi, Some(&table));
    let checks = [
        (arith_ok, "Diophantine scan found a violation"),
        (table.bound_holds, "weights exceed the exponential bound"),
        (table.mu_monotone, "mu is not monotone"),
        (run.dominated(), "weighted majorant does not dominate the solution"),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.0).map(|c| c.1).collect();
    cx.ev.delta = Some(table);
    cx.ev.majorant = Some(run);
    if failed.is_empty() {
        Ok(cx.done(&theorem, Verdict::CertifiedConvergent))
    } else {
        Ok(cx.fail(&theorem, failed.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::exponent_lattice::Certificate;
    use crate::formal_solver::{prepare, solve_taylor};
    use crate::gps_core::MultiSeries;
    use crate::DEFAULT_PREC;

    const P: usize = DEFAULT_PREC;

    fn equation(terms: &[(&[u32], Cx)], op: OperatorKind) -> FunctionalEquation {
        let mut f = MultiSeries::new(terms[0].0.len(), u64::MAX);
        for (e, c) in terms {
            f.add_term(e.to_vec(), c.clone());
        }
        FunctionalEquation::new(f, op).unwrap()
    }

    fn cfg(depth: usize) -> CertifyConfig {
        CertifyConfig { depth, ..Default::default() }
    }

    #[test]
    fn euler_shows_divergence() {
        // x^2 y' - y + x = 0: c_k = (k - 1)!
        let eq = equation(
            &[(&[1, 0, 1], Cx::one()), (&[0, 1, 0], Cx::int(-1)), (&[1, 0, 0], Cx::one())],
            OperatorKind::Differential,
        );
        let (phi, _) = solve_taylor(&eq, 14).unwrap();
        let cert = certify(&eq, &phi, &cfg(8)).unwrap();
        assert!(matches!(cert.verdict, Verdict::DivergenceEvidence { .. }), "{:?}", cert.verdict);
        assert!(cert.evidence.growth.as_ref().unwrap().super_geometric);
    }

    #[test]
    fn logistic_is_certified() {
        let eq = equation(
            &[(&[0, 0, 1], Cx::one()), (&[0, 1, 0], Cx::int(-1)), (&[0, 2, 0], Cx::one())],
            OperatorKind::Differential,
        );
        let red = prepare(&eq, &[(Cx::one(), Cx::one())]).unwrap();
        let (phi, _) = extend_solution(&red, 16, &BTreeMap::new()).unwrap();
        let cert = certify(&eq, &phi, &cfg(10)).unwrap();
        assert!(cert.is_certified(), "{:?}", cert.verdict);
        assert_eq!(cert.theorem, "5");
        assert!((cert.evidence.alpha.as_ref().unwrap().alpha - 0.9).abs() < 1e-9);
        let run = cert.evidence.majorant.as_ref().unwrap();
        assert_eq!(run.domination.len(), 10);
        assert!(!cert.evidence.growth.unwrap().super_geometric);
    }

    fn qpainleve() -> (FunctionalEquation, GSeries) {
        let omega = Cx::int(2).sqrt(P);
        let q = Cx::two_pi(P).mul(&Cx::i()).mul(&omega).exp(P);
        let eq = equation(
            &[
                (&[0, 1, 0, 1], Cx::one()),
                (&[0, 0, 2, 0], Cx::int(-1)),
                (&[2, 4, 0, 0], Cx::int(-1)),
                (&[2, 0, 0, 0], Cx::int(-1)),
            ],
            OperatorKind::q_difference(q, P),
        );
        let red = prepare(&eq, &[(Cx::from_f64(0.3, 0.2, P), Cx::one())]).unwrap();
        let (phi, _) = extend_solution(&red, 10, &BTreeMap::new()).unwrap();
        (eq, phi)
    }

    #[test]
    fn qpainleve_weighted_domination() {
        let (eq, phi) = qpainleve();
        let cert = certify(&eq, &phi, &cfg(8)).unwrap();
        assert_eq!(cert.theorem, "6");
        assert!(cert.is_certified(), "{:?}", cert.verdict);
        // the first term beyond the prefix sits at level 8
        assert!(cert.evidence.majorant.as_ref().unwrap().worst_ratio[7] > 0.0);
        let t = cert.evidence.delta.as_ref().unwrap();
        assert!(t.bound_holds && t.mu_monotone);
        // the only splitting of 2 e_1 is e_1 + e_1
        let e1 = t.entry(&[1, 0]).unwrap();
        let e2 = t.entry(&[2, 0]).unwrap();
        let want = (e1.s.powi(t.n as i32) * e1.delta).powi(2);
        assert!((e2.mu.unwrap() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn mahler_cosine_fails_leading_form() {
        let eq = equation(
            &[
                (&[2, 2, 1], Cx::int(8)),
                (&[2, 1, 1], Cx::int(8)),
                (&[0, 1, 1], Cx::int(4)),
                (&[2, 0, 1], Cx::int(2)),
                (&[0, 0, 1], Cx::one()),
                (&[2, 2, 0], Cx::int(4)),
                (&[0, 2, 0], Cx::int(-2)),
                (&[2, 1, 0], Cx::int(4)),
                (&[2, 0, 0], Cx::one()),
            ],
            OperatorKind::Mahler { ell: 2 },
        );
        let prefix = [(Cx::gaussian(1, 1), Cx::ratio(1, 2)), (Cx::gaussian(1, -1), Cx::ratio(1, 2))];
        let red = prepare(&eq, &prefix).unwrap();
        let (phi, _) = extend_solution(&red, 8, &BTreeMap::new()).unwrap();
        let cert = certify(&eq, &phi, &cfg(6)).unwrap();
        assert_eq!(cert.theorem, "none");
        assert!(matches!(cert.verdict, Verdict::HypothesisFailed { .. }), "{:?}", cert.verdict);
        let e = cert.evidence.evaluation.unwrap();
        assert!(e.difference.is_finite());
    }

    #[test]
    fn mahler_is_certified() {
        // 2x + y + mu(y) + y^2 = 0
        let eq = equation(
            &[(&[1, 0, 0], Cx::int(2)), (&[0, 1, 0], Cx::one()), (&[0, 0, 1], Cx::one()), (&[0, 2, 0], Cx::one())],
            OperatorKind::Mahler { ell: 2 },
        );
        let (phi, _) = solve_taylor(&eq, 14).unwrap();
        let cert = certify(&eq, &phi, &cfg(10)).unwrap();
        assert_eq!(cert.theorem, "7");
        assert!(cert.is_certified(), "{:?}", cert.verdict);
        assert!(cert.evidence.majorant.unwrap().is_monotone());
    }

    fn pair(a: Cx, b: Cx) -> Semigroup {
        Semigroup::certified(vec![a, b], Certificate { certified_bound: 1000, prescaled: false, steps: vec![] }).unwrap()
    }

    #[test]
    fn case_classification() {
        // |q^rho| = exp(Re(rho log q))
        let real = pair(Cx::one(), Cx::int(2));
        assert_eq!(classify_case(&real, &Cx::int(-1), true, false).case, Some('a'));
        assert_eq!(classify_case(&real, &Cx::int(-1), false, true).case, None);
        assert_eq!(classify_case(&real, &Cx::one(), false, true).case, Some('b'));
        assert_eq!(classify_case(&real, &Cx::i(), false, false).case, Some('c'));
        let lq = Cx::i();
        let mixed_in = pair(Cx::one(), Cx::gaussian(1, 1));
        assert_eq!(classify_case(&mixed_in, &lq, true, false).case, Some('d'));
        assert_eq!(classify_case(&mixed_in, &lq, false, true).case, None);
        let mixed_out = pair(Cx::one(), Cx::gaussian(1, -1));
        assert_eq!(classify_case(&mixed_out, &lq, false, true).case, Some('e'));
        let split = pair(Cx::gaussian(1, 1), Cx::gaussian(1, -1));
        let r = classify_case(&split, &lq, true, true);
        assert_eq!(r.case, None);
        assert_eq!(r.positions, vec![Position::Inside, Position::Outside]);
    }

    #[test]
    fn growth_fit_separates_factorial_from_geometric() {
        let sg = Arc::new(Semigroup::naturals());
        let mut geo = GSeries::new(sg.clone(), f64::INFINITY, u64::MAX);
        let mut fac = GSeries::new(sg, f64::INFINITY, u64::MAX);
        let mut f = 1.0;
        for k in 1..=14i64 {
            f *= k as f64;
            geo.insert(crate::exponent_lattice::ExponentVec(vec![k]), Cx::from_f64(3f64.powi(k as i32), 0.0, P));
            fac.insert(crate::exponent_lattice::ExponentVec(vec![k]), Cx::from_f64(f, 0.0, P));
        }
        assert!(!growth_fit(&geo).unwrap().super_geometric);
        assert!(growth_fit(&fac).unwrap().super_geometric);
    }
}
