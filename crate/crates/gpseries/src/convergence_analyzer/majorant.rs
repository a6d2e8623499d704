//! Majorant series for the reduced equation and the small-divisor weights of
//! the q-difference case.

use std::collections::{BTreeMap, HashMap};

use serde::{Serialize, Serializer};

use super::AnalyzerError;
use crate::exponent_lattice::ExponentVec;
use crate::formal_solver::{compositions, ReducedEquation};
use crate::gps_core::{GSeries, OperatorKind};

/// Largest multi-index table the majorant and delta computations accept.
const MAX_INDICES: usize = 200_000;
/// Deepest level of the delta recursion.
pub const MAX_DELTA_DEPTH: usize = 12;
const REL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Variant {
    Differential,
    QDiff,
    Mahler,
}

impl Variant {
    pub fn of(op: &OperatorKind) -> Self {
        match op {
            OperatorKind::Differential => Variant::Differential,
            OperatorKind::QDifference { .. } => Variant::QDiff,
            OperatorKind::Mahler { .. } => Variant::Mahler,
        }
    }
}

pub(crate) fn as_pairs<S: Serializer>(map: &BTreeMap<Vec<i64>, f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(map.iter())
}

fn index_count(dim: usize, depth: usize) -> usize {
    let mut c: f64 = 1.0;
    for i in 1..=dim {
        c = c * (depth + i) as f64 / i as f64;
    }
    c.min(usize::MAX as f64) as usize
}

/// |A_{k,p}| summed over p with |p| = d, keyed by (k, d).
fn rhs_table(red: &ReducedEquation) -> Result<BTreeMap<(Vec<i64>, usize), f64>, AnalyzerError> {
    let Some(rhs) = &red.rhs else {
        return Err(AnalyzerError::MissingData("the equation has not been brought to the special form".into()));
    };
    let mut t: BTreeMap<(Vec<i64>, usize), f64> = BTreeMap::new();
    for (p, a) in rhs {
        let d: usize = p.iter().map(|&x| x as usize).sum();
        for (k, c) in a.iter() {
            let v = c.abs_f64();
            if v > 0.0 {
                *t.entry((k.0.clone(), d)).or_insert(0.0) += v;
            }
        }
    }
    Ok(t)
}

fn le(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn minus(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Coefficients of the majorant series W together with the comparison
/// against an actual solution.
#[derive(Clone, Debug, Serialize)]
pub struct MajorantRun {
    pub variant: Variant,
    pub alpha: f64,
    pub depth: usize,
    #[serde(serialize_with = "as_pairs")]
    pub c: BTreeMap<Vec<i64>, f64>,
    /// Per level 1..=depth: every |c_m| is dominated.
    pub domination: Vec<bool>,
    /// Per level: max |c_m| / bound_m.
    pub worst_ratio: Vec<f64>,
    /// Per level: C_m >= C_(m - e_i) for every axis (Mahler only).
    pub monotone: Vec<bool>,
    /// The alpha choice proves monotonicity (Mahler only).
    pub alpha_certified: bool,
    pub notes: Vec<String>,
}

impl MajorantRun {
    pub fn coeff(&self, m: &[i64]) -> f64 {
        self.c.get(m).copied().unwrap_or(0.0)
    }

    pub fn dominated(&self) -> bool {
        !self.domination.is_empty() && self.domination.iter().all(|&b| b)
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone.iter().all(|&b| b)
    }

    /// Compares |c_m| (coefficient of x^(lambda_N + m.rho) in `psi`) with
    /// C_m, or with delta_m C_m when `weights` is given.
    pub fn dominate(&mut self, red: &ReducedEquation, psi: &GSeries, weights: Option<&DeltaTable>) {
        let dim = red.sg.rank();
        self.domination.clear();
        self.worst_ratio.clear();
        for s in 1..=self.depth as i64 {
            let mut ok = true;
            let mut worst = 0.0f64;
            for m in compositions(dim, s) {
                let c = psi.coeff(&red.e_n.add(&m)).abs_f64();
                let w = weights.and_then(|t| t.delta(&m.0)).unwrap_or(1.0);
                let bound = w * self.coeff(&m.0);
                let ratio = if c == 0.0 {
                    0.0
                } else if bound == 0.0 {
                    f64::INFINITY
                } else {
                    c / bound
                };
                worst = worst.max(ratio);
                ok &= ratio <= 1.0 + REL_SLACK;
            }
            self.domination.push(ok);
            self.worst_ratio.push(worst);
        }
    }
}

/// The Mahler alpha: the least power of two alpha >= 1 with
/// alpha sum_j |A_(e_i, e_j)| >= 1 on every axis carrying linear data.
/// The flag reports whether every axis carries such data.
pub fn mahler_alpha(red: &ReducedEquation) -> Result<(f64, bool), AnalyzerError> {
    let t = rhs_table(red)?;
    let dim = red.sg.rank();
    let mut alpha = 1.0f64;
    let mut all = true;
    for i in 0..dim {
        let e = ExponentVec::unit(dim, i).0;
        let s = t.get(&(e, 1)).copied().unwrap_or(0.0);
        if s == 0.0 {
            all = false;
            continue;
        }
        while alpha * s < 1.0 {
            alpha *= 2.0;
        }
    }
    Ok((alpha, all))
}

/// Majorant coefficients C_m for 0 < |m| <= depth from
/// alpha W = sum |A_(k,p)| x^k W^|p| (differential, q-difference) or
/// W = alpha sum |A_(k,p)| x^k W^|p| (Mahler).
pub fn majorant(red: &ReducedEquation, variant: Variant, alpha: f64, depth: usize) -> Result<MajorantRun, AnalyzerError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(AnalyzerError::MissingData(format!("alpha must be positive, got {alpha}")));
    }
    let dim = red.sg.rank();
    if index_count(dim, depth) > MAX_INDICES {
        return Err(AnalyzerError::CapacityExceeded(format!("{dim} axes to depth {depth}")));
    }
    let table = rhs_table(red)?;
    let dmax = table.keys().map(|(_, d)| *d).max().unwrap_or(0);
    // powers[d][m] = coefficient of x^m in W^d
    let mut powers: Vec<HashMap<Vec<i64>, f64>> = vec![HashMap::new(); dmax.max(1) + 1];
    let mut c: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut lower: Vec<Vec<i64>> = vec![];
    for s in 1..=depth as i64 {
        let level: Vec<Vec<i64>> = compositions(dim, s).into_iter().map(|v| v.0).collect();
        for d in 2..=dmax {
            for m in &level {
                let mut acc = 0.0;
                for k in &lower {
                    if le(k, m) {
                        if let Some(w) = powers[d - 1].get(&minus(m, k)) {
                            acc += c[k] * w;
                        }
                    }
                }
                if acc > 0.0 {
                    powers[d].insert(m.clone(), acc);
                }
            }
        }
        for m in &level {
            let mut acc = 0.0;
            for ((k, d), a) in &table {
                if *d == 0 {
                    if k == m {
                        acc += a;
                    }
                } else if le(k, m) && k != m {
                    if let Some(w) = powers[*d].get(&minus(m, k)) {
                        acc += a * w;
                    }
                }
            }
            let v = match variant {
                Variant::Mahler => alpha * acc,
                _ => acc / alpha,
            };
            c.insert(m.clone(), v);
            if v > 0.0 {
                powers[1].insert(m.clone(), v);
            }
        }
        lower.extend(level);
    }
    let mut run = MajorantRun {
        variant,
        alpha,
        depth,
        c,
        domination: vec![],
        worst_ratio: vec![],
        monotone: vec![],
        alpha_certified: false,
        notes: vec![],
    };
    if variant == Variant::Mahler {
        let (needed, all_axes) = mahler_alpha(red)?;
        run.alpha_certified = all_axes && alpha >= needed;
        if !run.alpha_certified {
            run.notes.push("alpha does not certify monotonicity; checked level by level".into());
        }
        for s in 1..=depth as i64 {
            let ok = compositions(dim, s).iter().all(|m| {
                let cm = run.coeff(&m.0);
                (0..dim).filter(|&i| m.0[i] > 0).all(|i| {
                    let prev = run.coeff(&m.sub(&ExponentVec::unit(dim, i)).0);
                    cm >= prev * (1.0 - REL_SLACK)
                })
            });
            run.monotone.push(ok);
        }
    }
    Ok(run)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaEntry {
    pub m: Vec<i64>,
    pub eps: f64,
    pub s: f64,
    /// Absent at |m| = 1.
    pub mu: Option<f64>,
    pub delta: f64,
    /// ln(s^n delta) and the logarithm of the exponential-growth bound.
    pub log_lhs: f64,
    pub log_bound: f64,
}

/// Small-divisor weights of the q-difference case and the exponential
/// growth bound they obey.
#[derive(Clone, Debug, Serialize)]
pub struct DeltaTable {
    pub depth: usize,
    pub gamma: f64,
    pub n: usize,
    pub n1: f64,
    pub n2: f64,
    pub q_max: f64,
    /// min(1, 1 / max_{|m|=1} eps_m): the majorant constant.
    pub alpha: f64,
    pub entries: Vec<DeltaEntry>,
    /// mu_(m-k) <= mu_m whenever both are defined.
    pub mu_monotone: bool,
    pub bound_holds: bool,
    /// min over m of log_bound - log_lhs.
    pub bound_margin: f64,
    #[serde(skip)]
    index: HashMap<Vec<i64>, usize>,
}

impl DeltaTable {
    pub fn entry(&self, m: &[i64]) -> Option<&DeltaEntry> {
        self.index.get(m).map(|&i| &self.entries[i])
    }

    pub fn delta(&self, m: &[i64]) -> Option<f64> {
        self.entry(m).map(|e| e.delta)
    }
}

/// eps_m = |L(q^(lambda_N + m.rho))|^-1, s_m = max(1, |q^(m.rho)|),
/// delta_m = 1 at |m| = 1 and eps_m mu_m beyond, mu_m being the largest
/// product of s^n delta over splittings of m into at least two parts.
pub fn delta_table(red: &ReducedEquation, gamma: f64, depth: usize) -> Result<DeltaTable, AnalyzerError> {
    let OperatorKind::QDifference { log_q, .. } = red.op() else {
        return Err(AnalyzerError::MissingData("small-divisor weights need a q-difference operator".into()));
    };
    let Some(ld) = &red.leading else {
        return Err(AnalyzerError::MissingData("no leading data".into()));
    };
    if depth > MAX_DELTA_DEPTH {
        return Err(AnalyzerError::CapacityExceeded(format!("delta table depth {depth} > {MAX_DELTA_DEPTH}")));
    }
    let dim = red.sg.rank();
    if index_count(dim, depth) > MAX_INDICES {
        return Err(AnalyzerError::CapacityExceeded(format!("{dim} axes to depth {depth}")));
    }
    let p = red.sg.prec();
    let n = red.eq.order();
    let nf = n as f64;
    let n1 = 2f64.powf(2.0 * gamma + 1.0);
    let n2 = 8f64.powf(gamma * nf) * n1.powf(nf);
    let q_max = red
        .sg
        .generators()
        .iter()
        .map(|g| g.mul(log_q).re_f64().exp().powf(nf))
        .fold(1.0, f64::max);

    let mut entries: Vec<DeltaEntry> = vec![];
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    // b[m] = max(s^n delta, mu): the best product over splittings into >= 1 part
    let mut b: HashMap<Vec<i64>, f64> = HashMap::new();
    let mut lower: Vec<Vec<i64>> = vec![];
    for s in 1..=depth as i64 {
        let level = compositions(dim, s);
        let mut fresh = vec![];
        for m in &level {
            let expo = red.sg.value(m);
            let z = red.lambda_n.add(&expo).mul(log_q).exp(p);
            let eps = 1.0 / ld.l_eval(&z).abs_f64();
            let sm = expo.mul(log_q).re_f64().exp().max(1.0);
            let (mu, delta) = if s == 1 {
                (None, 1.0)
            } else {
                let mut best = 0.0f64;
                for k in &lower {
                    if le(k, &m.0) {
                        let rest = minus(&m.0, k);
                        if let (Some(x), Some(y)) = (b.get(k), b.get(&rest)) {
                            best = best.max(x * y);
                        }
                    }
                }
                (Some(best), eps * best)
            };
            let pm = sm.powf(nf) * delta;
            let log_lhs = pm.ln();
            let sf = s as f64;
            let log_bound = -2.0 * gamma * nf * sf.ln() + (sf - 1.0) * n2.ln() + sf * q_max.ln();
            fresh.push((m.0.clone(), pm.max(mu.unwrap_or(0.0))));
            index.insert(m.0.clone(), entries.len());
            entries.push(DeltaEntry { m: m.0.clone(), eps, s: sm, mu, delta, log_lhs, log_bound });
        }
        for (m, v) in fresh {
            b.insert(m.clone(), v);
            lower.push(m);
        }
    }
    let alpha = entries
        .iter()
        .filter(|e| e.mu.is_none())
        .map(|e| e.eps)
        .fold(0.0, f64::max)
        .recip()
        .min(1.0);
    let mut mu_monotone = true;
    for e in &entries {
        let Some(mu) = e.mu else { continue };
        for k in &lower {
            if le(k, &e.m) && k != &e.m {
                let rest = minus(&e.m, k);
                if let Some(Some(r)) = index.get(&rest).map(|&i| entries[i].mu) {
                    mu_monotone &= r <= mu * (1.0 + REL_SLACK);
                }
            }
        }
    }
    let bound_margin = entries.iter().map(|e| e.log_bound - e.log_lhs).fold(f64::INFINITY, f64::min);
    Ok(DeltaTable {
        depth,
        gamma,
        n,
        n1,
        n2,
        q_max,
        alpha,
        entries,
        mu_monotone,
        bound_holds: bound_margin >= -1e-9,
        bound_margin,
        index,
    })
}
