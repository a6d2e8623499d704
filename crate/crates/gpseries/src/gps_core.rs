//! Truncated generalized power series over a semigroup of exponents, the
//! three operators, substitution into a multivariate series, and the
//! coordinate map to ordinary multivariate Taylor series.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponent_lattice::{express, ExponentVec, LatticeError, Semigroup, SemigroupJson};
use crate::scalar::{tolerance, zero_threshold, Cx, CxJson};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series live over different semigroups")]
    SemigroupMismatch,
    #[error("argument {index} has a term with non-positive real exponent")]
    NonPositiveLeadingExponent { index: usize },
    #[error("semigroup carries no independence certificate")]
    UncertifiedSemigroup,
    #[error("power x^{power} is not an exponent of the semigroup")]
    PowerNotInSemigroup { power: i64 },
    #[error("wrong number of arguments: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// The operator Delta acting on the unknown function.
#[derive(Clone, Debug)]
pub enum OperatorKind {
    /// x d/dx
    Differential,
    /// y(x) -> y(qx), with the logarithm branch 0 <= arg q < 2 pi
    QDifference { q: Cx, log_q: Cx },
    /// y(x) -> y(x^l)
    Mahler { ell: i64 },
}

impl OperatorKind {
    /// q-difference operator with the standard logarithm branch.
    pub fn q_difference(q: Cx, p: usize) -> Self {
        let log_q = q.ln_upper(p);
        OperatorKind::QDifference { q, log_q }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::Differential => "differential",
            OperatorKind::QDifference { .. } => "q-difference",
            OperatorKind::Mahler { .. } => "mahler",
        }
    }

    /// Multiplier of x^lambda under Delta^j for the differential and
    /// q-difference operators: lambda^j or q^(j lambda).
    pub fn symbol(&self, j: usize, lambda: &Cx, p: usize) -> Cx {
        match self {
            OperatorKind::Differential => lambda.powi(j as i64),
            OperatorKind::QDifference { log_q, .. } => {
                if j == 0 {
                    Cx::one()
                } else {
                    lambda.scale_int(j as i64).mul(log_q).exp(p)
                }
            }
            OperatorKind::Mahler { .. } => Cx::one(),
        }
    }
}

/// Bound on the real part of determined exponents.
pub type TruncRe = f64;

/// Truncated generalized power series.
#[derive(Clone, Debug)]
pub struct GSeries {
    sg: Arc<Semigroup>,
    terms: BTreeMap<ExponentVec, Cx>,
    trunc_re: TruncRe,
    trunc_deg: u64,
}

const RE_SLACK: f64 = 1e-9;

impl GSeries {
    /// Empty series, exact in the region {Re <= trunc_re, |m| <= trunc_deg}.
    pub fn new(sg: Arc<Semigroup>, trunc_re: TruncRe, trunc_deg: u64) -> Self {
        GSeries { sg, terms: BTreeMap::new(), trunc_re, trunc_deg }
    }

    /// Exactly zero with no truncation.
    pub fn zero(sg: Arc<Semigroup>) -> Self {
        GSeries::new(sg, f64::INFINITY, u64::MAX)
    }

    /// c x^m with no truncation.
    pub fn monomial(sg: Arc<Semigroup>, m: ExponentVec, c: Cx) -> Self {
        let mut s = GSeries::zero(sg);
        s.insert(m, c);
        s
    }

    /// Constant series.
    pub fn constant(sg: Arc<Semigroup>, c: Cx) -> Self {
        let dim = sg.rank();
        GSeries::monomial(sg, ExponentVec::zero(dim), c)
    }

    pub fn semigroup(&self) -> &Arc<Semigroup> {
        &self.sg
    }

    pub fn trunc_re(&self) -> TruncRe {
        self.trunc_re
    }

    pub fn trunc_deg(&self) -> u64 {
        self.trunc_deg
    }

    pub fn prec(&self) -> usize {
        self.sg.prec()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when exponent `m` lies in the determined region.
    pub fn in_region(&self, m: &ExponentVec) -> bool {
        (m.level() as u64) <= self.trunc_deg && self.sg.value_f64(m).0 <= self.trunc_re + RE_SLACK
    }

    /// Stores a coefficient inside the region; negligible values are dropped.
    pub fn insert(&mut self, m: ExponentVec, c: Cx) {
        if !self.in_region(&m) || c.is_negligible(zero_threshold(self.prec())) {
            self.terms.remove(&m);
            return;
        }
        self.terms.insert(m, c);
    }

    fn accumulate(&mut self, m: ExponentVec, c: Cx) {
        if !self.in_region(&m) {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => *v = v.add(&c),
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    fn prune(&mut self) {
        let t = zero_threshold(self.prec());
        self.terms.retain(|_, c| !c.is_negligible(t));
    }

    pub fn coeff(&self, m: &ExponentVec) -> Cx {
        self.terms.get(m).cloned().unwrap_or_else(Cx::zero)
    }

    /// Terms in coordinate order.
    pub fn iter(&self) -> impl Iterator<Item = (&ExponentVec, &Cx)> {
        self.terms.iter()
    }

    /// Terms in increasing exponent order.
    pub fn iter_ordered(&self) -> Vec<(&ExponentVec, &Cx)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| self.sg.compare(a.0, b.0));
        v
    }

    /// Lowest term under the exponent order.
    pub fn leading(&self) -> Option<(&ExponentVec, &Cx)> {
        self.terms.iter().min_by(|a, b| self.sg.compare(a.0, b.0))
    }

    /// All terms whose exponent has minimal real part.
    pub fn lowest_re_terms(&self) -> Vec<(&ExponentVec, &Cx)> {
        let Some((lead, _)) = self.leading() else { return vec![] };
        let re0 = self.sg.value(lead).re_f64();
        let tol = tolerance(self.prec()).max(1e-12 * (1.0 + re0.abs()));
        self.iter_ordered()
            .into_iter()
            .filter(|(m, _)| (self.sg.value(m).re_f64() - re0).abs() <= tol)
            .collect()
    }

    /// Smallest real part among stored exponents.
    pub fn min_re(&self) -> Option<f64> {
        self.terms.keys().map(|m| self.sg.value_f64(m).0).reduce(f64::min)
    }

    fn check_sg(&self, o: &GSeries) -> Result<(), SeriesError> {
        if Arc::ptr_eq(&self.sg, &o.sg) || *self.sg == *o.sg {
            Ok(())
        } else {
            Err(SeriesError::SemigroupMismatch)
        }
    }

    /// Restricts to a smaller region.
    pub fn truncate(&self, trunc_re: TruncRe, trunc_deg: u64) -> GSeries {
        let mut out = GSeries::new(self.sg.clone(), trunc_re.min(self.trunc_re), trunc_deg.min(self.trunc_deg));
        for (m, c) in &self.terms {
            if out.in_region(m) {
                out.terms.insert(m.clone(), c.clone());
            }
        }
        out
    }

    /// Replaces the region without touching coefficients; only for callers
    /// that know the stored terms are complete in the new region.
    pub fn with_region(mut self, trunc_re: TruncRe, trunc_deg: u64) -> GSeries {
        self.trunc_re = trunc_re;
        self.trunc_deg = trunc_deg;
        let sg = self.sg.clone();
        self.terms
            .retain(|m, _| (m.level() as u64) <= trunc_deg && sg.value_f64(m).0 <= trunc_re + RE_SLACK);
        self
    }

    pub fn add(&self, o: &GSeries) -> Result<GSeries, SeriesError> {
        self.check_sg(o)?;
        let mut out = GSeries::new(self.sg.clone(), self.trunc_re.min(o.trunc_re), self.trunc_deg.min(o.trunc_deg));
        for (m, c) in self.terms.iter().chain(o.terms.iter()) {
            out.accumulate(m.clone(), c.clone());
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, o: &GSeries) -> Result<GSeries, SeriesError> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> GSeries {
        self.map_coeffs(|_, c| c.neg())
    }

    pub fn scale(&self, k: &Cx) -> GSeries {
        let mut s = self.map_coeffs(|_, c| c.mul(k));
        s.prune();
        s
    }

    fn map_coeffs(&self, f: impl Fn(&ExponentVec, &Cx) -> Cx) -> GSeries {
        GSeries {
            sg: self.sg.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), f(m, c))).collect(),
            trunc_re: self.trunc_re,
            trunc_deg: self.trunc_deg,
        }
    }

    pub fn mul(&self, o: &GSeries) -> Result<GSeries, SeriesError> {
        self.check_sg(o)?;
        let mut out = GSeries::new(self.sg.clone(), self.trunc_re.min(o.trunc_re), self.trunc_deg.min(o.trunc_deg));
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let m = m1.add(m2);
                if out.in_region(&m) {
                    out.accumulate(m, c1.mul(c2));
                }
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> Result<GSeries, SeriesError> {
        let mut acc = GSeries::constant(self.sg.clone(), Cx::one());
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Multiplies by x^v.
    pub fn shift(&self, v: &ExponentVec) -> GSeries {
        let re = self.sg.value_f64(v).0;
        let lvl = v.level().max(0) as u64;
        GSeries {
            sg: self.sg.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.add(v), c.clone())).collect(),
            trunc_re: self.trunc_re + re,
            trunc_deg: self.trunc_deg.saturating_add(lvl),
        }
    }

    /// Largest |coefficient| in f64.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.abs_f64()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> GSeriesJson {
        GSeriesJson {
            semigroup: self.sg.to_json(),
            terms: self
                .iter_ordered()
                .into_iter()
                .map(|(m, c)| {
                    let (re, im) = c.to_dec();
                    TermJson { m: m.0.clone(), re, im }
                })
                .collect(),
            trunc_re: if self.trunc_re.is_finite() {
                serde_json::json!(self.trunc_re)
            } else {
                serde_json::json!("inf")
            },
            trunc_deg: if self.trunc_deg == u64::MAX {
                serde_json::json!("inf")
            } else {
                serde_json::json!(self.trunc_deg)
            },
        }
    }

    pub fn from_json(j: &GSeriesJson, p: usize) -> Result<GSeries, SeriesError> {
        let sg = Arc::new(Semigroup::from_json(&j.semigroup, p)?);
        let trunc_re = j.trunc_re.as_f64().unwrap_or(f64::INFINITY);
        let trunc_deg = j.trunc_deg.as_u64().unwrap_or(u64::MAX);
        let mut s = GSeries::new(sg, trunc_re, trunc_deg);
        for t in &j.terms {
            let c = CxJson { re: t.re.clone(), im: t.im.clone() }.to_cx(p).unwrap_or_else(Cx::zero);
            s.insert(ExponentVec(t.m.clone()), c);
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub m: Vec<i64>,
    pub re: String,
    pub im: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSeriesJson {
    pub semigroup: SemigroupJson,
    pub terms: Vec<TermJson>,
    pub trunc_re: serde_json::Value,
    pub trunc_deg: serde_json::Value,
}

/// Delta^j applied to a series.
pub fn apply_operator(op: &OperatorKind, j: usize, s: &GSeries) -> GSeries {
    if j == 0 {
        return s.clone();
    }
    match op {
        OperatorKind::Differential | OperatorKind::QDifference { .. } => {
            let p = s.prec();
            let mut out = s.map_coeffs(|m, c| c.mul(&op.symbol(j, &s.sg.value(m), p)));
            out.prune();
            out
        }
        OperatorKind::Mahler { ell } => {
            let f = ell.pow(j as u32);
            GSeries {
                sg: s.sg.clone(),
                terms: s.terms.iter().map(|(m, c)| (m.scale(f), c.clone())).collect(),
                trunc_re: s.trunc_re * f as f64,
                trunc_deg: s.trunc_deg.saturating_mul(f as u64),
            }
        }
    }
}

/// Truncated multivariate series with complex coefficients.
#[derive(Clone, Debug)]
pub struct MultiSeries {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Cx>,
    trunc_deg: u64,
}

impl MultiSeries {
    pub fn new(nvars: usize, trunc_deg: u64) -> Self {
        MultiSeries { nvars, terms: BTreeMap::new(), trunc_deg }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn trunc_deg(&self) -> u64 {
        self.trunc_deg
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, &Cx)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: &[u32]) -> Cx {
        self.terms.get(e).cloned().unwrap_or_else(Cx::zero)
    }

    /// Adds c to the coefficient of the monomial with exponents `e`.
    pub fn add_term(&mut self, e: Vec<u32>, c: Cx) {
        assert_eq!(e.len(), self.nvars);
        if e.iter().map(|&k| k as u64).sum::<u64>() > self.trunc_deg {
            return;
        }
        let v = match self.terms.get(&e) {
            Some(old) => old.add(&c),
            None => c,
        };
        if v.is_zero() {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, v);
        }
    }

    pub fn add(&self, o: &MultiSeries) -> MultiSeries {
        let mut out = MultiSeries::new(self.nvars, self.trunc_deg.min(o.trunc_deg));
        for (e, c) in self.terms.iter().chain(o.terms.iter()) {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, k: &Cx) -> MultiSeries {
        let mut out = MultiSeries::new(self.nvars, self.trunc_deg);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.mul(k));
        }
        out
    }

    /// Schoolbook product truncated by total degree.
    pub fn mul(&self, o: &MultiSeries) -> MultiSeries {
        let mut out = MultiSeries::new(self.nvars, self.trunc_deg.min(o.trunc_deg));
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1.mul(c2));
            }
        }
        out
    }

    /// Partial derivative in variable `v`.
    pub fn derivative(&self, v: usize) -> MultiSeries {
        let mut out = MultiSeries::new(self.nvars, self.trunc_deg.saturating_sub(1));
        for (e, c) in &self.terms {
            if e[v] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[v] -= 1;
            out.add_term(d, c.scale_int(e[v] as i64));
        }
        out
    }

    /// Total degree of the highest stored term.
    pub fn degree(&self) -> u64 {
        self.terms.keys().map(|e| e.iter().map(|&k| k as u64).sum()).max().unwrap_or(0)
    }
}

/// F(x, a_0, ..., a_n) for F over variables (x, y_0, ..., y_n). The x powers
/// must be exponents of the arguments' semigroup.
pub fn substitute(f: &MultiSeries, args: &[GSeries]) -> Result<GSeries, SeriesError> {
    if args.len() + 1 != f.nvars() {
        return Err(SeriesError::Arity { expected: f.nvars() - 1, got: args.len() });
    }
    let sg = match args.first() {
        Some(a) => a.sg.clone(),
        None => Arc::new(Semigroup::naturals()),
    };
    for (index, a) in args.iter().enumerate() {
        a.check_sg(&args[0])?;
        for m in a.terms.keys() {
            if m.is_zero() || sg.value_f64(m).0 <= 0.0 {
                return Err(SeriesError::NonPositiveLeadingExponent { index });
            }
        }
    }
    let trunc_re = args.iter().map(|a| a.trunc_re).fold(f64::INFINITY, f64::min);
    let trunc_deg = args.iter().map(|a| a.trunc_deg).min().unwrap_or(u64::MAX);
    let mut out = GSeries::new(sg.clone(), trunc_re, trunc_deg);
    let mut xcache: BTreeMap<u32, Option<ExponentVec>> = BTreeMap::new();
    let mut pcache: Vec<Vec<GSeries>> = args
        .iter()
        .map(|a| vec![GSeries::constant(sg.clone(), Cx::one()).truncate(trunc_re, trunc_deg), a.truncate(trunc_re, trunc_deg)])
        .collect();
    for (e, c) in f.iter() {
        let xk = e[0];
        let xm = xcache
            .entry(xk)
            .or_insert_with(|| {
                if xk == 0 {
                    Some(ExponentVec::zero(sg.rank()))
                } else {
                    express(&sg, &Cx::int(xk as i64), 4 * xk as i64 + 64).ok()
                }
            })
            .clone();
        let Some(xm) = xm else {
            return Err(SeriesError::PowerNotInSemigroup { power: xk as i64 });
        };
        if !out.in_region(&xm) {
            continue;
        }
        let mut term = GSeries::monomial(sg.clone(), xm, c.clone()).truncate(trunc_re, trunc_deg);
        for (j, &k) in e[1..].iter().enumerate() {
            if k == 0 {
                continue;
            }
            while pcache[j].len() <= k as usize {
                let next = pcache[j].last().unwrap().mul(&pcache[j][1])?;
                pcache[j].push(next);
            }
            term = term.mul(&pcache[j][k as usize])?;
            if term.is_empty() {
                break;
            }
        }
        for (m, v) in term.terms {
            out.accumulate(m, v);
        }
    }
    out.prune();
    Ok(out)
}

/// Coordinates become monomial exponents.
pub fn iota(s: &GSeries) -> Result<MultiSeries, SeriesError> {
    if s.sg.certificate().is_none() {
        return Err(SeriesError::UncertifiedSemigroup);
    }
    let mut out = MultiSeries::new(s.sg.rank(), s.trunc_deg);
    for (m, c) in &s.terms {
        out.add_term(m.0.iter().map(|&k| k as u32).collect(), c.clone());
    }
    Ok(out)
}

/// Inverse of [`iota`].
pub fn iota_inv(m: &MultiSeries, sg: Arc<Semigroup>) -> Result<GSeries, SeriesError> {
    if sg.certificate().is_none() {
        return Err(SeriesError::UncertifiedSemigroup);
    }
    let mut out = GSeries::new(sg, f64::INFINITY, m.trunc_deg);
    for (e, c) in m.iter() {
        out.insert(ExponentVec(e.iter().map(|&k| k as i64).collect()), c.clone());
    }
    Ok(out)
}

/// Operator transported to Taylor series: multiplies the coefficient of
/// x^e by the symbol of the exponent sum e_i rho_i.
pub fn transported_operator(op: &OperatorKind, j: usize, m: &MultiSeries, sg: &Semigroup) -> MultiSeries {
    let p = sg.prec();
    match op {
        OperatorKind::Mahler { ell } => {
            let f = ell.pow(j as u32) as u32;
            let mut out = MultiSeries::new(m.nvars(), m.trunc_deg().saturating_mul(f as u64));
            for (e, c) in m.iter() {
                out.add_term(e.iter().map(|k| k * f).collect(), c.clone());
            }
            out
        }
        _ => {
            let mut out = MultiSeries::new(m.nvars(), m.trunc_deg());
            for (e, c) in m.iter() {
                let v = sg.value(&ExponentVec(e.iter().map(|&k| k as i64).collect()));
                out.add_term(e.clone(), c.mul(&op.symbol(j, &v, p)));
            }
            out
        }
    }
}

/// Partial sum at x, with x^lambda = exp(lambda (ln|x| + i arg x)) and
/// arg x taken in (center - pi, center + pi].
pub fn evaluate(s: &GSeries, x: &Cx, sector_center: f64) -> Cx {
    let p = s.prec();
    let two_pi = Cx::two_pi(p);
    let mut lx = x.ln(p);
    let mut arg = lx.im_f64();
    while arg <= sector_center - std::f64::consts::PI {
        lx = lx.add(&Cx::i().mul(&two_pi));
        arg += 2.0 * std::f64::consts::PI;
    }
    while arg > sector_center + std::f64::consts::PI {
        lx = lx.sub(&Cx::i().mul(&two_pi));
        arg -= 2.0 * std::f64::consts::PI;
    }
    let gpow: Vec<Cx> = s.sg.generators().iter().map(|g| g.mul(&lx).exp(p)).collect();
    let mut acc = Cx::zero();
    for (m, c) in &s.terms {
        let mut t = c.clone();
        for (g, &k) in gpow.iter().zip(&m.0) {
            if k != 0 {
                t = t.mul(&g.powi(k));
            }
        }
        acc = acc.add(&t);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent_lattice::Certificate;

    const P: usize = 192;

    fn sg_pair() -> Arc<Semigroup> {
        Arc::new(
            Semigroup::certified(
                vec![Cx::gaussian(1, 1), Cx::gaussian(1, -1)],
                Certificate { certified_bound: 1000, prescaled: false, steps: vec![] },
            )
            .unwrap(),
        )
    }

    fn ev(v: &[i64]) -> ExponentVec {
        ExponentVec(v.to_vec())
    }

    #[test]
    fn monomials_multiply() {
        let sg = sg_pair();
        let a = GSeries::monomial(sg.clone(), ev(&[1, 0]), Cx::one());
        let b = GSeries::monomial(sg.clone(), ev(&[0, 1]), Cx::one());
        let p = a.mul(&b).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.coeff(&ev(&[1, 1])).approx_eq(&Cx::one(), 0.0));
    }

    #[test]
    fn binomial_square() {
        let sg = sg_pair();
        let s = GSeries::monomial(sg.clone(), ev(&[1, 0]), Cx::one()).add(&GSeries::monomial(sg, ev(&[0, 1]), Cx::one())).unwrap();
        let sq = s.mul(&s).unwrap();
        assert_eq!(sq.coeff(&ev(&[2, 0])).as_small_int(), Some(1));
        assert_eq!(sq.coeff(&ev(&[1, 1])).as_small_int(), Some(2));
        assert_eq!(sq.coeff(&ev(&[0, 2])).as_small_int(), Some(1));
        let ordered: Vec<_> = sq.iter_ordered().into_iter().map(|(m, _)| m.clone()).collect();
        assert_eq!(ordered, vec![ev(&[0, 2]), ev(&[1, 1]), ev(&[2, 0])]);
    }

    #[test]
    fn truncation_is_respected() {
        let sg = sg_pair();
        let s = GSeries::monomial(sg.clone(), ev(&[1, 0]), Cx::one()).truncate(2.5, 100);
        let cube = s.pow(3).unwrap();
        assert!(cube.is_empty());
        assert_eq!(cube.trunc_re(), 2.5);
    }

    #[test]
    fn operators_on_monomials() {
        let sg = sg_pair();
        let s = GSeries::monomial(sg.clone(), ev(&[1, 0]), Cx::one());
        let d = apply_operator(&OperatorKind::Differential, 1, &s);
        assert!(d.coeff(&ev(&[1, 0])).approx_eq(&Cx::gaussian(1, 1), 0.0));
        let pair = s.add(&GSeries::monomial(sg.clone(), ev(&[0, 1]), Cx::one())).unwrap();
        let mu = apply_operator(&OperatorKind::Mahler { ell: 2 }, 1, &pair);
        assert_eq!(mu.coeff(&ev(&[2, 0])).as_small_int(), Some(1));
        assert_eq!(mu.coeff(&ev(&[0, 2])).as_small_int(), Some(1));
        assert_eq!(mu.len(), 2);
    }

    #[test]
    fn q_operator_with_full_period_is_identity() {
        // q = e^{pi(1+i)}: q^{(1+i)k} = e^{2 pi i k} = 1
        let q = Cx::pi(P).mul(&Cx::gaussian(1, 1)).exp(P);
        let op = OperatorKind::q_difference(q, P);
        let sg = Arc::new(Semigroup::new(vec![Cx::gaussian(1, 1)]).unwrap());
        let mut s = GSeries::new(sg.clone(), f64::INFINITY, u64::MAX);
        for k in 1..=5 {
            s.insert(ev(&[k]), Cx::int(k * k + 1));
        }
        let t = apply_operator(&op, 1, &s);
        for k in 1..=5 {
            assert!(t.coeff(&ev(&[k])).approx_eq(&Cx::int(k * k + 1), 1e-40));
        }
    }

    #[test]
    fn substitute_square() {
        let sg = sg_pair();
        let mut f = MultiSeries::new(2, u64::MAX);
        f.add_term(vec![0, 2], Cx::one());
        let phi = GSeries::monomial(sg, ev(&[1, 0]), Cx::one());
        let r = substitute(&f, &[phi]).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.coeff(&ev(&[2, 0])).as_small_int(), Some(1));
    }

    #[test]
    fn substitute_rejects_constant_argument() {
        let sg = sg_pair();
        let mut f = MultiSeries::new(2, u64::MAX);
        f.add_term(vec![0, 1], Cx::one());
        let c = GSeries::constant(sg, Cx::one());
        assert!(matches!(substitute(&f, &[c]), Err(SeriesError::NonPositiveLeadingExponent { .. })));
    }

    #[test]
    fn iota_maps_coordinates() {
        let sg = sg_pair();
        let s = GSeries::monomial(sg.clone(), ev(&[1, 0]), Cx::one()).add(&GSeries::monomial(sg.clone(), ev(&[1, 1]), Cx::one())).unwrap();
        let m = iota(&s).unwrap();
        assert_eq!(m.coeff(&[1, 0]).as_small_int(), Some(1));
        assert_eq!(m.coeff(&[1, 1]).as_small_int(), Some(1));
        let back = iota_inv(&m, sg).unwrap();
        assert_eq!(back.len(), 2);
        let unc = Arc::new(Semigroup::new(vec![Cx::one()]).unwrap());
        assert!(matches!(iota(&GSeries::zero(unc)), Err(SeriesError::UncertifiedSemigroup)));
    }

    #[test]
    fn evaluate_square() {
        let sg = Arc::new(Semigroup::naturals());
        let s = GSeries::monomial(sg, ev(&[2]), Cx::one());
        let v = evaluate(&s, &Cx::ratio(1, 2), 0.0);
        assert!(v.approx_eq(&Cx::ratio(1, 4), 1e-50));
    }

    #[test]
    fn derivative_power_rule() {
        let mut f = MultiSeries::new(2, 10);
        f.add_term(vec![1, 3], Cx::int(2));
        let d = f.derivative(1);
        assert_eq!(d.coeff(&[1, 2]).as_small_int(), Some(6));
    }
}
