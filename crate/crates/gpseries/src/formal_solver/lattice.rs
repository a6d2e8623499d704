//! Generalized-series solutions continuing a known prefix: the exponent
//! lattice that carries them, the reduced equation, and the level-by-level
//! recurrence.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use super::{CoefficientStatus, SolveTranscript, SolverError, TranscriptEntry};
use crate::equation_model::{leading_data, EquationError, FunctionalEquation, LeadingData};
use crate::exponent_lattice::{dickson_minimal, express, regularize, ExponentVec, HalfspaceConstraint, Semigroup};
use crate::gps_core::{GSeries, OperatorKind};
use crate::scalar::{tolerance, zero_threshold, Cx, CxJson};

const EXPRESS_BOUND: i64 = 1 << 12;
const RESONANCE_SCAN_LEVEL: i64 = 10;

/// Which lattice points beyond the prefix may carry coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownSet {
    /// lambda_N + m with m a nonzero point of the semigroup.
    Cone,
    /// Every semigroup point after lambda_N in the exponent order.
    AfterPrefix,
}

/// An equation together with the prefix y = sum_{k<=N} c_k x^lambda_k + x^lambda_N u
/// and, for the strict reduction, the right-hand side a_p of the special form.
#[derive(Clone, Debug)]
pub struct ReducedEquation {
    pub eq: FunctionalEquation,
    pub sg: Arc<Semigroup>,
    /// (lambda_k, c_k) in exponent order.
    pub prefix: Vec<(Cx, Cx)>,
    pub prefix_coords: Vec<ExponentVec>,
    pub lambda_n: Cx,
    pub e_n: ExponentVec,
    pub leading: Option<LeadingData>,
    /// u-monomial exponent p -> a_p(x), present after [`reduce_equation`].
    pub rhs: Option<BTreeMap<Vec<u32>, GSeries>>,
    pub unknowns: UnknownSet,
    pub notes: Vec<String>,
}

impl ReducedEquation {
    pub fn op(&self) -> &OperatorKind {
        self.eq.op()
    }

    /// Coefficients A_0..A_n of L, when the leading data exists.
    pub fn l_coeffs(&self) -> Option<&[Cx]> {
        self.leading.as_ref().map(|l| l.a.as_slice())
    }

    pub fn prefix_series(&self) -> GSeries {
        prefix_series(&self.sg, &self.prefix, &self.prefix_coords)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let cx = |c: &Cx| serde_json::to_value(CxJson::from(c)).unwrap_or_default();
        json!({
            "operator": self.op().name(),
            "semigroup": self.sg.to_json(),
            "lambda_n": cx(&self.lambda_n),
            "e_n": self.e_n.0,
            "prefix": self.prefix.iter().zip(&self.prefix_coords).map(|((l, c), m)| json!({
                "exponent": cx(l), "coords": m.0, "coeff": cx(c)
            })).collect::<Vec<_>>(),
            "nu": self.leading.as_ref().map(|l| cx(&l.nu)),
            "l": self.leading.as_ref().map(|l| l.a.iter().map(cx).collect::<Vec<_>>()),
            "rhs": self.rhs.as_ref().map(|r| r.iter().map(|(p, s)| json!({
                "p": p, "series": serde_json::to_value(s.to_json()).unwrap_or_default()
            })).collect::<Vec<_>>()),
            "unknowns": self.unknowns,
            "notes": self.notes,
        })
    }
}

fn sort_prefix(prefix: &[(Cx, Cx)]) -> Result<Vec<(Cx, Cx)>, SolverError> {
    let mut v: Vec<(Cx, Cx)> = prefix.iter().filter(|(_, c)| !c.is_zero()).cloned().collect();
    if v.is_empty() {
        return Err(SolverError::PrefixTooShort("empty prefix".into()));
    }
    if let Some((l, _)) = v.iter().find(|(l, _)| l.re_f64() <= 0.0) {
        return Err(SolverError::DegenerateEquation(format!("prefix exponent {:?} has non-positive real part", l.to_f64())));
    }
    v.sort_by(|a, b| {
        let (x, y) = (a.0.to_f64(), b.0.to_f64());
        x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal).then(x.1.partial_cmp(&y.1).unwrap_or(Ordering::Equal))
    });
    Ok(v)
}

fn x_powers(eq: &FunctionalEquation) -> BTreeSet<u32> {
    eq.f().iter().map(|(e, _)| e[0]).filter(|&k| k > 0).collect()
}

/// Regularizes `raw`, adding the generator 1 when some x power of F would
/// not be an exponent of the result.
fn finalize(raw: &[Cx], eq: &FunctionalEquation, notes: &mut Vec<String>) -> Result<Semigroup, SolverError> {
    let (sg, _) = regularize(raw)?;
    let powers = x_powers(eq);
    if powers.iter().all(|&k| express(&sg, &Cx::int(k as i64), EXPRESS_BOUND).is_ok()) {
        return Ok(sg);
    }
    notes.push("added generator 1 so that the x powers of F are exponents".into());
    let mut raw = raw.to_vec();
    raw.push(Cx::one());
    Ok(regularize(&raw)?.0)
}

fn coords_of(sg: &Semigroup, vals: &[Cx]) -> Result<Vec<ExponentVec>, SolverError> {
    vals.iter()
        .map(|v| express(sg, v, EXPRESS_BOUND).map_err(SolverError::from))
        .collect()
}

fn prefix_series(sg: &Arc<Semigroup>, prefix: &[(Cx, Cx)], coords: &[ExponentVec]) -> GSeries {
    let mut s = GSeries::zero(sg.clone());
    for ((_, c), m) in prefix.iter().zip(coords) {
        let old = s.coeff(m);
        s.insert(m.clone(), old.add(c));
    }
    s
}

fn dedup(vals: Vec<Cx>) -> Vec<Cx> {
    let mut out: Vec<Cx> = Vec::new();
    for v in vals {
        if !out.iter().any(|o| o.approx_eq(&v, 1e-25)) {
            out.push(v);
        }
    }
    out
}

/// Lattice spanned by the prefix exponents (plus 1 if needed).
fn base_lattice(eq: &FunctionalEquation, lambdas: &[Cx]) -> Result<Arc<Semigroup>, SolverError> {
    let mut notes = vec![];
    Ok(Arc::new(finalize(&dedup(lambdas.to_vec()), eq, &mut notes)?))
}

fn leading_along(eq: &FunctionalEquation, sg: &Arc<Semigroup>, prefix: &[(Cx, Cx)]) -> Result<LeadingData, SolverError> {
    let lambdas: Vec<Cx> = prefix.iter().map(|p| p.0.clone()).collect();
    let coords = coords_of(sg, &lambdas)?;
    let parts = eq.partials_along(&prefix_series(sg, prefix, &coords))?;
    Ok(leading_data(&parts, eq.op())?)
}

type UPoly = BTreeMap<Vec<u32>, GSeries>;

fn upoly_mul(a: &UPoly, b: &UPoly) -> Result<UPoly, SolverError> {
    let mut out: UPoly = BTreeMap::new();
    for (p1, s1) in a {
        for (p2, s2) in b {
            let p: Vec<u32> = p1.iter().zip(p2).map(|(x, y)| x + y).collect();
            let prod = s1.mul(s2)?;
            let v = match out.remove(&p) {
                Some(old) => old.add(&prod)?,
                None => prod,
            };
            out.insert(p, v);
        }
    }
    Ok(out)
}

fn binom(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// G(x, u_0..u_n) = F(x, Y_0, ..., Y_n) with Y_j = D^j(P + x^lambda_N u)
/// written through u_j = D^j u.
fn expand_shifted(
    eq: &FunctionalEquation,
    sg: &Arc<Semigroup>,
    prefix: &GSeries,
    e_n: &ExponentVec,
    lambda_n: &Cx,
) -> Result<UPoly, SolverError> {
    let n = eq.order();
    let p = sg.prec();
    let op = eq.op();
    let images = eq.images(prefix);
    let unit = |i: usize| {
        let mut v = vec![0u32; n + 1];
        v[i] = 1;
        v
    };
    let mut ys: Vec<UPoly> = Vec::with_capacity(n + 1);
    for (j, image) in images.into_iter().enumerate() {
        let mut y: UPoly = BTreeMap::new();
        y.insert(vec![0; n + 1], image);
        match op {
            OperatorKind::Differential => {
                for i in 0..=j {
                    let c = lambda_n.powi((j - i) as i64).scale_int(binom(j, i));
                    y.insert(unit(i), GSeries::monomial(sg.clone(), e_n.clone(), c));
                }
            }
            OperatorKind::QDifference { .. } => {
                y.insert(unit(j), GSeries::monomial(sg.clone(), e_n.clone(), op.symbol(j, lambda_n, p)));
            }
            OperatorKind::Mahler { ell } => {
                let m = e_n.scale(ell.pow(j as u32));
                y.insert(unit(j), GSeries::monomial(sg.clone(), m, Cx::one()));
            }
        }
        ys.push(y);
    }
    let mut powers: Vec<Vec<UPoly>> = ys
        .into_iter()
        .map(|y| {
            let one: UPoly = [(vec![0; n + 1], GSeries::constant(sg.clone(), Cx::one()))].into_iter().collect();
            vec![one, y]
        })
        .collect();
    let mut out: UPoly = BTreeMap::new();
    for (e, c) in eq.f().iter() {
        let xm = if e[0] == 0 {
            ExponentVec::zero(sg.rank())
        } else {
            express(sg, &Cx::int(e[0] as i64), EXPRESS_BOUND)?
        };
        let mut term: UPoly = [(vec![0; n + 1], GSeries::monomial(sg.clone(), xm, c.clone()))].into_iter().collect();
        for (j, &k) in e[1..].iter().enumerate() {
            if k == 0 {
                continue;
            }
            while powers[j].len() <= k as usize {
                let next = upoly_mul(powers[j].last().unwrap(), &powers[j][1])?;
                powers[j].push(next);
            }
            term = upoly_mul(&term, &powers[j][k as usize])?;
        }
        for (pp, s) in term {
            let v = match out.remove(&pp) {
                Some(old) => old.add(&s)?,
                None => s,
            };
            if !v.is_empty() {
                out.insert(pp, v);
            }
        }
    }
    Ok(out)
}

/// Nonnegative integer vectors of length `dim` summing to `s`, in
/// lexicographic order.
pub(crate) fn compositions(dim: usize, s: i64) -> Vec<ExponentVec> {
    fn rec(dim: usize, s: i64, cur: &mut Vec<i64>, out: &mut Vec<ExponentVec>) {
        if cur.len() + 1 == dim {
            cur.push(s);
            out.push(ExponentVec(cur.clone()));
            cur.pop();
            return;
        }
        for k in 0..=s {
            cur.push(k);
            rec(dim, s - k, cur, out);
            cur.pop();
        }
    }
    let mut out = vec![];
    if dim == 0 {
        return out;
    }
    rec(dim, s, &mut Vec::with_capacity(dim), &mut out);
    out.reverse();
    out
}

/// Lattice for the continuation of a prefix whose linearization has
/// leading exponent `nu` and coefficients `l`.
fn support_lattice(
    eq: &FunctionalEquation,
    prefix: &[(Cx, Cx)],
    nu: &Cx,
    l: &[Cx],
    notes: &mut Vec<String>,
) -> Result<Semigroup, SolverError> {
    let lambdas: Vec<Cx> = prefix.iter().map(|p| p.0.clone()).collect();
    let lambda_n = lambdas.last().unwrap().clone();
    let mut raw_b = dedup(lambdas.clone());
    raw_b.push(Cx::one());
    let sg_b = Arc::new(regularize(&dedup(raw_b))?.0);
    let coords = coords_of(&sg_b, &lambdas)?;
    let pser = prefix_series(&sg_b, prefix, &coords);
    let e_n = coords.last().unwrap().clone();
    let g = expand_shifted(eq, &sg_b, &pser, &e_n, &lambda_n)?;
    let shift = lambda_n.add(nu);
    let tol = tolerance(sg_b.prec());

    let mut targets: Vec<ExponentVec> = vec![];
    for (pp, series) in &g {
        let deg: u32 = pp.iter().sum();
        for (w, _) in series.iter() {
            let d = sg_b.value(w).sub(&shift);
            if d.abs_f64() <= tol && deg >= 1 {
                continue;
            }
            if d.re_f64() <= tol {
                let what = if deg == 0 { "F along the prefix" } else { "the shifted equation" };
                let err = format!("{what} has a term at {:?}, not beyond lambda_N + nu", sg_b.value(w).to_f64());
                return Err(if deg == 0 { SolverError::InconsistentPrefix(err) } else { SolverError::PrefixTooShort(err) });
            }
            targets.push(w.clone());
        }
    }

    let constraint = HalfspaceConstraint::new(sg_b.generators().to_vec(), shift.neg());
    let minimal = dickson_minimal(&constraint, sg_b.rank())?;
    let mut needed_min: BTreeSet<ExponentVec> = BTreeSet::new();
    let mut needed_base: BTreeSet<usize> = BTreeSet::new();
    for w in &targets {
        let Some(ws) = minimal.iter().find(|m| ExponentVec::le(m, w)) else { continue };
        needed_min.insert(ws.clone());
        for i in 0..w.dim() {
            if w.0[i] > ws.0[i] {
                needed_base.insert(i);
            }
        }
    }
    let mut raw = dedup(lambdas);
    let mut mins: Vec<&ExponentVec> = needed_min.iter().collect();
    mins.sort_by(|a, b| sg_b.compare(a, b));
    for m in mins {
        raw.push(sg_b.value(m).sub(&shift));
    }
    for &i in &needed_base {
        raw.push(sg_b.generators()[i].clone());
    }
    if !nu.is_negligible(tol) {
        raw.push(nu.clone());
    }
    notes.push(format!(
        "support: {} minimal offsets, {} base generators",
        needed_min.len(),
        needed_base.len()
    ));
    let raw = dedup(raw);
    let mut sg = finalize(&raw, eq, notes)?;

    if let OperatorKind::QDifference { log_q, .. } = eq.op() {
        let extra = resonance_generators(&sg, &lambda_n, l, log_q, notes)?;
        if !extra.is_empty() {
            let mut raw = raw;
            raw.extend(extra);
            sg = finalize(&dedup(raw), eq, notes)?;
        }
    }
    Ok(sg)
}

/// Generators lambda_a - lambda_N and the period 2 pi i / ln q for every root a
/// of L hit by some q^(lambda_N + m) with |m| small.
fn resonance_generators(
    sg: &Semigroup,
    lambda_n: &Cx,
    l: &[Cx],
    log_q: &Cx,
    notes: &mut Vec<String>,
) -> Result<Vec<Cx>, SolverError> {
    let p = sg.prec();
    let tol = tolerance(p);
    let mut roots: Vec<Cx> = vec![];
    for s in 1..=RESONANCE_SCAN_LEVEL {
        for m in compositions(sg.rank(), s) {
            let z = lambda_n.add(&sg.value(&m)).mul(log_q).exp(p);
            let mut acc = Cx::zero();
            let mut scale = 0.0;
            let za = z.abs_f64();
            for (j, a) in l.iter().enumerate().rev() {
                acc = acc.mul(&z).add(a);
                scale += a.abs_f64() * za.powi(j as i32);
            }
            if acc.abs_f64() <= tol * scale.max(1.0) && !roots.iter().any(|r| r.approx_eq(&z, 1e-20 * (1.0 + za))) {
                roots.push(z);
            }
        }
    }
    let mut out = vec![];
    if roots.is_empty() {
        return Ok(out);
    }
    let period = Cx::two_pi(p).mul(&Cx::i()).div(log_q);
    if period.re_f64() <= tol {
        notes.push("positive real q: resonant exponents share one real part, no extension".into());
        return Ok(out);
    }
    for a in roots {
        let base = a.ln(p).div(log_q);
        let k = ((lambda_n.re_f64() - base.re_f64()) / period.re_f64()).floor() as i64 + 1;
        let mut la = base.add(&period.scale_int(k));
        while la.sub(lambda_n).re_f64() <= tol {
            la = la.add(&period);
        }
        notes.push(format!("resonance with root {:?}: added lambda_a - lambda_N and the q period", a.to_f64()));
        out.push(la.sub(lambda_n));
    }
    out.push(period);
    Ok(out)
}

/// Certified lattice carrying every continuation of the prefix.
pub fn exponent_support(eq: &FunctionalEquation, prefix: &[(Cx, Cx)]) -> Result<(Semigroup, Vec<String>), SolverError> {
    let prefix = sort_prefix(prefix)?;
    let lambdas: Vec<Cx> = prefix.iter().map(|p| p.0.clone()).collect();
    let sg0 = base_lattice(eq, &lambdas)?;
    let ld = leading_along(eq, &sg0, &prefix)?;
    let mut notes = vec![];
    let sg = support_lattice(eq, &prefix, &ld.nu, &ld.a, &mut notes)?;
    Ok((sg, notes))
}

fn assemble(
    eq: &FunctionalEquation,
    sg: Semigroup,
    prefix: Vec<(Cx, Cx)>,
    unknowns: UnknownSet,
    notes: Vec<String>,
) -> Result<ReducedEquation, SolverError> {
    let sg = Arc::new(sg);
    let lambdas: Vec<Cx> = prefix.iter().map(|p| p.0.clone()).collect();
    let prefix_coords = coords_of(&sg, &lambdas)?;
    let lambda_n = lambdas.last().unwrap().clone();
    let e_n = prefix_coords.last().unwrap().clone();
    let leading = match leading_along(eq, &sg, &prefix) {
        Ok(l) => Some(l),
        Err(SolverError::Equation(EquationError::NotSatisfied { .. })) => None,
        Err(e) => return Err(e),
    };
    Ok(ReducedEquation {
        eq: eq.clone(),
        sg,
        prefix,
        prefix_coords,
        lambda_n,
        e_n,
        leading,
        rhs: None,
        unknowns,
        notes,
    })
}

/// Sets up the continuation of a prefix without requiring the special form:
/// with leading data the lattice follows the support construction, otherwise
/// the prefix lattice is used and every later lattice point is an unknown.
pub fn prepare(eq: &FunctionalEquation, prefix: &[(Cx, Cx)]) -> Result<ReducedEquation, SolverError> {
    let prefix = sort_prefix(prefix)?;
    let lambdas: Vec<Cx> = prefix.iter().map(|p| p.0.clone()).collect();
    let sg0 = base_lattice(eq, &lambdas)?;
    let mut notes = vec![];
    match leading_along(eq, &sg0, &prefix) {
        Ok(ld) => {
            let sg = support_lattice(eq, &prefix, &ld.nu, &ld.a, &mut notes)?;
            assemble(eq, sg, prefix, UnknownSet::Cone, notes)
        }
        Err(SolverError::Equation(EquationError::NotSatisfied { reason, .. })) => {
            notes.push(format!("no leading data ({reason}); unknowns are all lattice points after the prefix"));
            assemble(eq, (*sg0).clone(), prefix, UnknownSet::AfterPrefix, notes)
        }
        Err(e) => Err(e),
    }
}

/// The special form: L(D + lambda_N) u = M(x, u, ..., D^n u) for the
/// differential and q-difference operators, u = M(x, u, ..., mu^n u) for
/// the Mahler operator. N starts at `n` and doubles until the required
/// inequalities hold.
pub fn reduce_equation(eq: &FunctionalEquation, prefix: &[(Cx, Cx)], n: usize) -> Result<ReducedEquation, SolverError> {
    let prefix = sort_prefix(prefix)?;
    let len = prefix.len();
    let lambdas: Vec<Cx> = prefix.iter().map(|p| p.0.clone()).collect();
    let sg_full = base_lattice(eq, &lambdas)?;
    let full = leading_along(eq, &sg_full, &prefix)?;
    let tol = tolerance(sg_full.prec());
    let s_min = {
        let coords = coords_of(&sg_full, &lambdas)?;
        let parts = eq.partials_along(&prefix_series(&sg_full, &prefix, &coords))?;
        parts.iter().filter_map(|s| s.min_re()).fold(f64::INFINITY, f64::min)
    };
    let same = |a: &LeadingData| {
        a.nu.approx_eq(&full.nu, 1e-20) && a.a.iter().zip(&full.a).all(|(x, y)| x.approx_eq(y, 1e-20 * (1.0 + y.abs_f64())))
    };
    let mut k = n.clamp(1, len);
    loop {
        let part = &prefix[..k];
        let lam = &part[k - 1].0;
        let gap = k == len || prefix[k].0.re_f64() > lam.re_f64() + 1e-12;
        let ineq = match eq.op() {
            OperatorKind::Mahler { ell } => s_min + (*ell - 1) as f64 * lam.re_f64() > full.nu.re_f64() + tol,
            _ => lam.re_f64() > full.nu.re_f64() + tol,
        };
        let stable = gap && ineq && {
            let lk: Vec<Cx> = part.iter().map(|p| p.0.clone()).collect();
            let sg = base_lattice(eq, &lk)?;
            leading_along(eq, &sg, part).map(|l| same(&l)).unwrap_or(false)
        };
        if stable {
            break;
        }
        if k == len {
            return Err(SolverError::PrefixTooShort(format!(
                "no N <= {len} satisfies the reduction inequalities (Re nu = {})",
                full.nu.re_f64()
            )));
        }
        k = (2 * k).min(len);
    }
    let part = prefix[..k].to_vec();
    let mut notes = vec![format!("N = {k}")];
    let sg = support_lattice(eq, &part, &full.nu, &full.a, &mut notes)?;
    let mut red = assemble(eq, sg, part, UnknownSet::Cone, notes)?;
    red.rhs = Some(special_form_rhs(&red, &full)?);
    Ok(red)
}

fn special_form_rhs(red: &ReducedEquation, ld: &LeadingData) -> Result<BTreeMap<Vec<u32>, GSeries>, SolverError> {
    let sg = &red.sg;
    let p = sg.prec();
    let n = red.eq.order();
    let g = expand_shifted(&red.eq, sg, &red.prefix_series(), &red.e_n, &red.lambda_n)?;
    let nu_c = express(sg, &ld.nu, EXPRESS_BOUND)?;
    let shift = red.e_n.add(&nu_c);
    let mahler = matches!(red.op(), OperatorKind::Mahler { .. });
    let a0 = ld.a[0].clone();
    let unit = |i: usize| {
        let mut v = vec![0u32; n + 1];
        v[i] = 1;
        v
    };
    let mut out: BTreeMap<Vec<u32>, GSeries> = BTreeMap::new();
    for (pp, s) in &g {
        let mut a = GSeries::zero(sg.clone());
        for (w, c) in s.iter() {
            let m = w.sub(&shift);
            if !m.is_nonneg() {
                return Err(SolverError::PrefixTooShort(format!("term at {:?} lies before lambda_N + nu", w.0)));
            }
            let v = if mahler { c.div(&a0) } else { c.clone() };
            a.insert(m, v.neg());
        }
        out.insert(pp.clone(), a);
    }
    let zero = ExponentVec::zero(sg.rank());
    let mut add_linear = |i: usize, c: Cx| {
        let e = out.entry(unit(i)).or_insert_with(|| GSeries::zero(sg.clone()));
        let old = e.coeff(&zero);
        e.insert(zero.clone(), old.add(&c));
    };
    match red.op() {
        OperatorKind::Differential => {
            for i in 0..=n {
                let mut c = Cx::zero();
                for j in i..=n {
                    c = c.add(&ld.a[j].mul(&red.lambda_n.powi((j - i) as i64)).scale_int(binom(j, i)));
                }
                add_linear(i, c);
            }
        }
        OperatorKind::QDifference { .. } => {
            for j in 0..=n {
                add_linear(j, ld.a[j].mul(&red.op().symbol(j, &red.lambda_n, p)));
            }
        }
        OperatorKind::Mahler { .. } => add_linear(0, Cx::one()),
    }
    let scale: f64 = ld.a.iter().map(|a| a.abs_f64()).sum::<f64>().max(1.0);
    for i in 0..=n {
        if let Some(s) = out.get(&unit(i)) {
            if s.coeff(&zero).abs_f64() > tolerance(p) * scale {
                return Err(SolverError::DegenerateEquation("linear part of the shifted equation does not match L".into()));
            }
        }
    }
    for s in out.values_mut() {
        let mut t = GSeries::zero(sg.clone());
        for (m, c) in s.iter() {
            if !(m.is_zero() && c.abs_f64() <= tolerance(p) * scale) {
                t.insert(m.clone(), c.clone());
            }
        }
        *s = t;
    }
    out.retain(|_, s| !s.is_empty());
    Ok(out)
}

/// The first `count` terms of a series as a prefix (lambda, c).
pub fn solution_prefix(phi: &GSeries, count: usize) -> Vec<(Cx, Cx)> {
    let sg = phi.semigroup();
    phi.iter_ordered()
        .into_iter()
        .take(count)
        .map(|(m, c)| (sg.value(m), c.clone()))
        .collect()
}

struct LevelSolution {
    values: Vec<Cx>,
    status: Vec<CoefficientStatus>,
    divisors: Vec<(Cx, bool)>,
}

/// Solves A c = b level-wise by Gauss-Jordan elimination. Columns whose pivot
/// is negligible are free and take the injected value or zero. Returns the
/// index of a row left unsatisfied on failure.
fn solve_level(
    cols: &[BTreeMap<usize, Cx>],
    nrows: usize,
    b: &[Cx],
    row_scale: &[f64],
    injected: &[Option<Cx>],
    tol: f64,
) -> Result<LevelSolution, (usize, f64, Vec<usize>)> {
    let ncols = cols.len();
    let mut a = vec![vec![Cx::zero(); ncols]; nrows];
    for (c, col) in cols.iter().enumerate() {
        for (&r, v) in col {
            a[r][c] = v.clone();
        }
    }
    let orig = a.clone();
    let mut rhs = b.to_vec();
    let mut used = vec![false; nrows];
    let mut pivot_row: Vec<Option<usize>> = vec![None; ncols];
    for c in 0..ncols {
        let colnorm = cols[c].values().map(|v| v.abs_f64()).fold(0.0, f64::max).max(1.0);
        let best = (0..nrows)
            .filter(|&r| !used[r])
            .max_by(|&x, &y| a[x][c].abs_f64().partial_cmp(&a[y][c].abs_f64()).unwrap_or(Ordering::Equal));
        let Some(r) = best else { continue };
        if a[r][c].is_zero() || a[r][c].abs_f64() <= tol * colnorm {
            continue;
        }
        used[r] = true;
        pivot_row[c] = Some(r);
        let piv = a[r][c].clone();
        for rr in 0..nrows {
            if rr == r || a[rr][c].is_zero() {
                continue;
            }
            let f = a[rr][c].div(&piv);
            for cc in 0..ncols {
                if !a[r][cc].is_zero() {
                    a[rr][cc] = a[rr][cc].sub(&f.mul(&a[r][cc]));
                }
            }
            a[rr][c] = Cx::zero();
            rhs[rr] = rhs[rr].sub(&f.mul(&rhs[r]));
        }
    }
    let mut values = vec![Cx::zero(); ncols];
    let mut status = vec![CoefficientStatus::Determined; ncols];
    let mut free = vec![];
    for c in 0..ncols {
        if pivot_row[c].is_none() {
            free.push(c);
            match &injected[c] {
                Some(v) => {
                    values[c] = v.clone();
                    status[c] = CoefficientStatus::Injected;
                }
                None => status[c] = CoefficientStatus::Free,
            }
        }
    }
    for c in 0..ncols {
        if let Some(r) = pivot_row[c] {
            let mut acc = rhs[r].clone();
            for &f in &free {
                if !a[r][f].is_zero() && !values[f].is_zero() {
                    acc = acc.sub(&a[r][f].mul(&values[f]));
                }
            }
            values[c] = acc.div(&a[r][c]);
        }
    }
    for r in 0..nrows {
        let mut acc = b[r].clone();
        let mut mag = row_scale[r];
        for c in 0..ncols {
            if !orig[r][c].is_zero() {
                let t = orig[r][c].mul(&values[c]);
                mag += t.abs_f64();
                acc = acc.sub(&t);
            }
        }
        if acc.abs_f64() > tol * mag.max(1.0) {
            return Err((r, acc.abs_f64(), free));
        }
    }
    let divisors = (0..ncols)
        .map(|c| {
            let coupled = cols[c].len() > 1;
            if !coupled {
                if let Some(v) = cols[c].values().next() {
                    return (v.clone(), false);
                }
                return (Cx::zero(), false);
            }
            match pivot_row[c] {
                Some(r) => (a[r][c].clone(), true),
                None => (Cx::zero(), true),
            }
        })
        .collect();
    Ok(LevelSolution { values, status, divisors })
}

/// Continues the prefix level by level: at each level the new coefficients
/// solve the linear system formed by the lowest residual rows they reach.
/// `injected` fixes free coefficients, keyed by lattice coordinates.
/// `depth` counts levels beyond lambda_N.
pub fn extend_solution(
    red: &ReducedEquation,
    depth: usize,
    injected: &BTreeMap<ExponentVec, Cx>,
) -> Result<(GSeries, SolveTranscript), SolverError> {
    let sg = red.sg.clone();
    let p = sg.prec();
    let tol = tolerance(p);
    let thr = zero_threshold(p);
    let eq = &red.eq;
    let op = eq.op().clone();
    let n = eq.order();
    let rank = sg.rank();
    let prefix = red.prefix_series();
    let partials = eq.partials_along(&prefix)?;
    let by_level: Vec<BTreeMap<i64, Vec<(ExponentVec, Cx)>>> = partials
        .iter()
        .map(|s| {
            let mut m: BTreeMap<i64, Vec<(ExponentVec, Cx)>> = BTreeMap::new();
            for (k, a) in s.iter() {
                m.entry(k.level()).or_default().push((k.clone(), a.clone()));
            }
            m
        })
        .collect();
    let min_level: Vec<Option<i64>> = by_level.iter().map(|m| m.keys().next().copied()).collect();
    if min_level.iter().all(Option::is_none) {
        return Err(SolverError::DegenerateEquation("the linearization vanishes along the prefix".into()));
    }
    let factor = |j: usize| -> i64 {
        match op {
            OperatorKind::Mahler { ell } => ell.pow(j as u32),
            _ => 1,
        }
    };
    let base = red.e_n.level();
    let known: BTreeSet<ExponentVec> = red.prefix_coords.iter().cloned().collect();
    let levels: Vec<(i64, Vec<ExponentVec>)> = match red.unknowns {
        UnknownSet::Cone => (1..=depth as i64)
            .map(|s| (base + s, compositions(rank, s).iter().map(|m| red.e_n.add(m)).collect()))
            .collect(),
        UnknownSet::AfterPrefix => (1..=base + depth as i64)
            .map(|t| {
                let v: Vec<ExponentVec> = compositions(rank, t)
                    .into_iter()
                    .filter(|v| sg.compare(v, &red.e_n) == Ordering::Greater && !known.contains(v))
                    .collect();
                (t, v)
            })
            .filter(|(_, v)| !v.is_empty())
            .collect(),
    };
    let t_first = levels.first().map(|l| l.0).unwrap_or(base + 1);
    let t_max = levels.last().map(|l| l.0).unwrap_or(base);

    let mut phi_terms: BTreeMap<ExponentVec, Cx> = prefix.iter().map(|(m, c)| (m.clone(), c.clone())).collect();
    let mut transcript = SolveTranscript { notes: red.notes.clone(), ..Default::default() };
    let mut checked: i64 = -1;
    for (t, unknowns) in &levels {
        let col_level = |v: &ExponentVec| -> Option<i64> {
            (0..=n).filter_map(|j| min_level[j].map(|k| v.level() * factor(j) + k)).min()
        };
        let Some(lt) = unknowns.iter().filter_map(col_level).min() else {
            return Err(SolverError::DegenerateEquation(format!("unknowns at level {t} never enter the residual")));
        };
        if t + t_first <= lt {
            return Err(SolverError::PrefixTooShort(format!(
                "unknowns at level {t} first enter the residual at level {lt}, where products of unknowns interfere"
            )));
        }
        let mut phi = GSeries::new(sg.clone(), f64::INFINITY, lt as u64);
        for (m, c) in &phi_terms {
            phi.insert(m.clone(), c.clone());
        }
        let r = eq.residual(&phi)?;
        let scale = eq.residual_scale(&phi)?;

        let mut row_index: BTreeMap<ExponentVec, usize> = BTreeMap::new();
        let mut raw_cols: Vec<BTreeMap<ExponentVec, Cx>> = Vec::with_capacity(unknowns.len());
        for v in unknowns {
            let val = sg.value(v);
            let mut col: BTreeMap<ExponentVec, Cx> = BTreeMap::new();
            for j in 0..=n {
                let img_level = v.level() * factor(j);
                let Some(terms) = by_level[j].get(&(lt - img_level)) else { continue };
                let img = v.scale(factor(j));
                let sym = match op {
                    OperatorKind::Mahler { .. } => Cx::one(),
                    _ => op.symbol(j, &val, p),
                };
                for (k, a) in terms {
                    let e = col.entry(img.add(k)).or_insert_with(Cx::zero);
                    *e = e.add(&sym.mul(a));
                }
            }
            col.retain(|_, c| !c.is_negligible(thr));
            for row in col.keys() {
                let next = row_index.len();
                row_index.entry(row.clone()).or_insert(next);
            }
            raw_cols.push(col);
        }
        for (m, c) in r.iter() {
            let lv = m.level();
            if lv <= checked || lv > lt || row_index.contains_key(m) {
                continue;
            }
            let s = scale.get(m).copied().unwrap_or(0.0).max(1.0);
            if c.abs_f64() > tol * s {
                return Err(SolverError::InconsistentPrefix(format!(
                    "residual term at {:?} (size {:e}) is out of reach of every unknown",
                    m.0,
                    c.abs_f64()
                )));
            }
        }
        checked = lt;

        let rows: Vec<ExponentVec> = {
            let mut v: Vec<(ExponentVec, usize)> = row_index.iter().map(|(m, &i)| (m.clone(), i)).collect();
            v.sort_by_key(|x| x.1);
            v.into_iter().map(|x| x.0).collect()
        };
        let cols: Vec<BTreeMap<usize, Cx>> = raw_cols
            .iter()
            .map(|c| c.iter().map(|(m, v)| (row_index[m], v.clone())).collect())
            .collect();
        let b: Vec<Cx> = rows.iter().map(|m| r.coeff(m).neg()).collect();
        let row_scale: Vec<f64> = rows.iter().map(|m| scale.get(m).copied().unwrap_or(0.0)).collect();
        let inj: Vec<Option<Cx>> = unknowns.iter().map(|v| injected.get(v).cloned()).collect();
        let sol = solve_level(&cols, rows.len(), &b, &row_scale, &inj, tol).map_err(|(ri, size, free)| {
            match free.first() {
                Some(&f) => SolverError::ResonanceBlocked { exponent: unknowns[f].0.clone(), rhs: size },
                None => SolverError::InconsistentPrefix(format!("row {:?} cannot be satisfied (defect {size:e})", rows[ri].0)),
            }
        })?;
        for (i, v) in unknowns.iter().enumerate() {
            let value = sol.values[i].clone();
            let (div, coupled) = sol.divisors[i].clone();
            if sol.status[i] != CoefficientStatus::Determined {
                transcript.resonances.push(v.0.clone());
                if sol.status[i] == CoefficientStatus::Free {
                    transcript.free_parameters.push(v.0.clone());
                }
            }
            transcript.entries.push(TranscriptEntry {
                coords: v.0.clone(),
                exponent: CxJson::from(&sg.value(v)),
                divisor: CxJson::from(&div),
                coupled,
                status: sol.status[i],
                value: CxJson::from(&value),
            });
            if !value.is_negligible(thr) {
                phi_terms.insert(v.clone(), value);
            }
        }
    }
    let frontier = match red.unknowns {
        UnknownSet::Cone => red.lambda_n.re_f64() + (depth + 1) as f64 * sg.min_re() - 1e-6,
        UnknownSet::AfterPrefix => ((t_max + 1) as f64 * sg.min_re() - 1e-6).max(red.lambda_n.re_f64()),
    };
    let mut phi = GSeries::new(sg.clone(), frontier, u64::MAX);
    for (m, c) in phi_terms {
        phi.insert(m, c);
    }
    Ok((phi, transcript))
}
