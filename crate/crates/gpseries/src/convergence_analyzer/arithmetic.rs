//! Arithmetic conditions on q: the Siegel condition |q^k - 1| >= c k^-nu,
//! the Bruno sum over continued-fraction denominators, and the Diophantine
//! condition on the exponent lattice.
//!
//! Scans keep the real parts of m.theta in 128-bit fixed point (fractions
//! of a turn), so Liouville-type near misses of size 1e-18 at |m| ~ 1e6 are
//! resolved; imaginary parts stay in f64.

use std::f64::consts::{LN_2, TAU};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::AnalyzerError;
use crate::exponent_lattice::Semigroup;
use crate::scalar::{Cx, DEFAULT_PREC};

/// Largest number of lattice vectors a Diophantine scan visits.
const MAX_SCAN: u128 = 400_000_000;
/// Bruno terms below this count as a settled tail.
const BRUNO_SETTLED: f64 = 1e-3;
const TURN: f64 = 340282366920938463463374607431768211456.0; // 2^128

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConditionKind {
    Siegel,
    Diophantine,
    Bruno,
}

/// A point where the inequality fails.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub m_vector: Vec<i64>,
    /// The integer multiple of 2 pi i (nearest integer to m.theta - beta).
    pub m: i64,
    /// Index into the supplied roots (0 for the Siegel scan).
    pub root: usize,
    pub value: f64,
    pub threshold: f64,
    /// The value recomputed in high precision floating point.
    pub reverified: f64,
    pub reproduced: bool,
}

#[derive(Clone, Debug, Serialize)]
pub enum ArithVerdict {
    PassUpToBound,
    ViolationWitness(Witness),
    /// Bruno terms ln q_(j+1) / q_j stay above 1 from this index on.
    DivergenceEvidence { from_term: usize },
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ArithmeticReport {
    pub kind: ConditionKind,
    /// |m| bound of the scan, or the number of Bruno terms computed.
    pub bound: u64,
    pub c: f64,
    /// gamma for the Diophantine condition, nu for the Siegel condition.
    pub exponent: f64,
    /// min over the scan of value * |m|^exponent.
    pub min_scaled: f64,
    pub min_at: Vec<i64>,
    pub violations: u64,
    pub first_violation: Option<Witness>,
    /// The verdict carries the strongest violation (least value / threshold).
    pub verdict: ArithVerdict,
    pub fitted_gamma: Option<f64>,
    /// Bruno terms ln q_(j+1) / q_j and their partial sums.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub stabilized_at: Option<usize>,
    pub notes: Vec<String>,
}

impl ArithmeticReport {
    fn new(kind: ConditionKind, bound: u64, c: f64, exponent: f64) -> Self {
        ArithmeticReport {
            kind,
            bound,
            c,
            exponent,
            min_scaled: f64::INFINITY,
            min_at: vec![],
            violations: 0,
            first_violation: None,
            verdict: ArithVerdict::PassUpToBound,
            fitted_gamma: None,
            terms: vec![],
            partial_sums: vec![],
            stabilized_at: None,
            notes: vec![],
        }
    }

    pub fn passed(&self) -> bool {
        matches!(self.verdict, ArithVerdict::PassUpToBound)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.verdict {
            ArithVerdict::ViolationWitness(w) => Some(w),
            _ => None,
        }
    }
}

/// Fractional part of x in units of 2^-128.
fn frac128(x: &BigRational) -> u128 {
    let f = x - x.floor();
    let scaled = f * BigRational::from_integer(BigInt::one() << 128);
    scaled.floor().to_integer().to_u128().unwrap_or(0)
}

/// Distance to the nearest integer of a fixed-point fraction.
fn dist128(x: u128) -> f64 {
    x.min(x.wrapping_neg()) as f64 / TURN
}

/// Signed offset to the nearest integer, in turns.
fn signed128(x: u128) -> f64 {
    if x < 1u128 << 127 {
        x as f64 / TURN
    } else {
        -(x.wrapping_neg() as f64) / TURN
    }
}

fn nearest_int(x: &BigRational) -> i64 {
    x.round().to_integer().to_i64().unwrap_or(i64::MAX)
}

#[derive(Clone, Copy)]
struct Turn {
    re: u128,
    im: f64,
}

impl Turn {
    fn of(z: &Cx) -> Turn {
        Turn { re: frac128(&z.re_rational()), im: z.im_f64() }
    }
}

fn vector_count(dim: usize, bound: u64) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=dim as u128 {
        c = c.saturating_mul(bound as u128 + i) / i;
    }
    c - 1
}

/// Visits every nonnegative vector with |m| = s, with the running sums of
/// the axis fractions.
fn visit_level(axes: &[Turn], s: i64, f: &mut impl FnMut(&[i64], Turn)) {
    fn rec(axes: &[Turn], left: i64, cur: &mut Vec<i64>, acc: Turn, f: &mut impl FnMut(&[i64], Turn)) {
        let i = cur.len();
        let step = |acc: Turn, k: i64| Turn {
            re: acc.re.wrapping_add(axes[i].re.wrapping_mul(k as u128)),
            im: acc.im + axes[i].im * k as f64,
        };
        if i + 1 == axes.len() {
            cur.push(left);
            f(cur, step(acc, left));
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(axes, left - k, cur, step(acc, k), f);
            cur.pop();
        }
    }
    rec(axes, s, &mut Vec::with_capacity(axes.len()), Turn { re: 0, im: 0.0 }, f);
}

fn work_prec(vals: &[&Cx]) -> usize {
    2 * vals.iter().filter_map(|v| v.prec()).max().unwrap_or(DEFAULT_PREC).max(DEFAULT_PREC)
}

/// theta_i = rho_i ln q / (2 pi i) and beta_a = ln a / (2 pi i).
fn turns(sg: &Semigroup, q: &Cx, roots: &[Cx]) -> (Vec<Cx>, Vec<Cx>, usize) {
    let mut all: Vec<&Cx> = sg.generators().iter().collect();
    all.push(q);
    all.extend(roots.iter());
    let p = work_prec(&all);
    let log_q = q.ln_upper(p);
    let two_pi_i = Cx::i().mul(&Cx::two_pi(p));
    let theta = sg.generators().iter().map(|g| g.to_float(p).mul(&log_q).div(&two_pi_i)).collect();
    let beta = roots.iter().map(|a| a.ln(p).div(&two_pi_i)).collect();
    (theta, beta, p)
}

struct Hit {
    m: Vec<i64>,
    root: usize,
    value: f64,
    ratio: f64,
}

/// Scans 0 < |m| <= bound over every root and reports to `f` the value
/// 2 pi |m.theta - beta - k| minimized over integers k.
fn scan(axes: &[Turn], targets: &[Turn], bound: u64, mut f: impl FnMut(&[i64], i64, usize, f64)) {
    for s in 1..=bound as i64 {
        visit_level(axes, s, &mut |m, acc| {
            for (r, t) in targets.iter().enumerate() {
                let d = dist128(acc.re.wrapping_sub(t.re));
                let im = acc.im - t.im;
                f(m, s, r, TAU * d.hypot(im));
            }
        });
    }
}

/// High precision value of |m.theta - beta - k| 2 pi with k the nearest
/// integer, and that k.
fn reevaluate(theta: &[Cx], beta: &Cx, m: &[i64]) -> (f64, i64) {
    let mut w = beta.neg();
    for (t, &k) in theta.iter().zip(m) {
        if k != 0 {
            w = w.add(&t.mul(&Cx::int(k)));
        }
    }
    let k = nearest_int(&w.re_rational());
    (w.sub(&Cx::int(k)).abs_f64() * TAU, k)
}

/// Checks |(m.rho) ln q - ln a - 2 pi k i| > c |m|^-gamma for 0 < |m| <= bound,
/// every integer k and every root a.
pub fn diophantine_check(
    sg: &Semigroup,
    q: &Cx,
    roots: &[Cx],
    c: f64,
    gamma: f64,
    bound: u64,
) -> Result<ArithmeticReport, AnalyzerError> {
    let dim = sg.rank();
    if vector_count(dim, bound) > MAX_SCAN {
        return Err(AnalyzerError::CapacityExceeded(format!("{dim} axes to |m| = {bound}")));
    }
    let (theta, beta, _) = turns(sg, q, roots);
    let axes: Vec<Turn> = theta.iter().map(Turn::of).collect();
    let targets: Vec<Turn> = beta.iter().map(Turn::of).collect();
    let mut rep = ArithmeticReport::new(ConditionKind::Diophantine, bound, c, gamma);
    let mut first: Option<Hit> = None;
    let mut strongest: Option<Hit> = None;
    scan(&axes, &targets, bound, |m, s, r, value| {
        let scale = (s as f64).powf(gamma);
        let scaled = value * scale;
        if scaled < rep.min_scaled {
            rep.min_scaled = scaled;
            rep.min_at = m.to_vec();
        }
        if scaled <= c {
            rep.violations += 1;
            let ratio = scaled / c;
            if first.is_none() {
                first = Some(Hit { m: m.to_vec(), root: r, value, ratio });
            }
            if strongest.as_ref().map(|h| ratio < h.ratio).unwrap_or(true) {
                strongest = Some(Hit { m: m.to_vec(), root: r, value, ratio });
            }
        }
    });
    let witness = |h: Hit| {
        let (reverified, k) = reevaluate(&theta, &beta[h.root], &h.m);
        let threshold = c * (h.m.iter().sum::<i64>() as f64).powf(-gamma);
        Witness { m_vector: h.m, m: k, root: h.root, value: h.value, threshold, reverified, reproduced: reverified <= threshold }
    };
    rep.first_violation = first.map(witness);
    if let Some(h) = strongest {
        rep.verdict = ArithVerdict::ViolationWitness(witness(h));
    }
    Ok(rep)
}

/// A constant c = min(1/2, half the least |m| = 1 value) and the least
/// half-integer gamma >= 1/2 for which every scanned value exceeds
/// c |m|^-gamma. None when some |m| = 1 value vanishes.
pub fn fit_gamma(sg: &Semigroup, q: &Cx, roots: &[Cx], bound: u64) -> Result<Option<(f64, f64)>, AnalyzerError> {
    let dim = sg.rank();
    if vector_count(dim, bound) > MAX_SCAN {
        return Err(AnalyzerError::CapacityExceeded(format!("{dim} axes to |m| = {bound}")));
    }
    let (theta, beta, _) = turns(sg, q, roots);
    let axes: Vec<Turn> = theta.iter().map(Turn::of).collect();
    let targets: Vec<Turn> = beta.iter().map(Turn::of).collect();
    let mut first = f64::INFINITY;
    scan(&axes, &targets, 1, |_, _, _, value| first = first.min(value));
    let c = (first / 2.0).min(0.5);
    if c <= 0.0 {
        return Ok(None);
    }
    let mut need = 0.0f64;
    scan(&axes, &targets, bound, |_, s, _, value| {
        if value <= c && s > 1 {
            need = need.max((c / value).ln() / (s as f64).ln());
        }
    });
    if !need.is_finite() {
        return Ok(None);
    }
    Ok(Some((c, ((2.0 * need).floor() + 1.0).max(1.0) / 2.0)))
}

/// Scans |q^k - 1| >= c k^-nu for 1 <= k <= bound.
pub fn siegel_check(q: &Cx, c: f64, nu: f64, bound: u64) -> ArithmeticReport {
    let p = work_prec(&[q]);
    let log_q = q.ln_upper(p);
    let omega = log_q.im().div(&Cx::two_pi(p));
    let axis = frac128(&omega.re_rational());
    let log_r = log_q.re_f64();
    let mut rep = ArithmeticReport::new(ConditionKind::Siegel, bound, c, nu);
    if log_r.abs() > 1e-12 {
        rep.notes.push(format!("|q| = {} is off the unit circle", log_r.exp()));
    }
    let mut first: Option<Hit> = None;
    let mut strongest: Option<Hit> = None;
    let mut acc: u128 = 0;
    for k in 1..=bound {
        acc = acc.wrapping_add(axis);
        let value = if log_r == 0.0 {
            2.0 * (std::f64::consts::PI * dist128(acc)).sin()
        } else {
            let r = (k as f64 * log_r).exp();
            let a = TAU * signed128(acc);
            (r * a.cos() - 1.0).hypot(r * a.sin())
        };
        let scaled = value * (k as f64).powf(nu);
        if scaled < rep.min_scaled {
            rep.min_scaled = scaled;
            rep.min_at = vec![k as i64];
        }
        if scaled < c {
            rep.violations += 1;
            let ratio = scaled / c;
            let hit = || Hit { m: vec![k as i64], root: 0, value, ratio };
            if first.is_none() {
                first = Some(hit());
            }
            if strongest.as_ref().map(|h| ratio < h.ratio).unwrap_or(true) {
                strongest = Some(hit());
            }
        }
    }
    let qp = q.to_float(p);
    let witness = |h: Hit| {
        let k = h.m[0];
        let reverified = qp.powi(k).sub(&Cx::one()).abs_f64();
        let threshold = c * (k as f64).powf(-nu);
        let m = nearest_int(&omega.mul(&Cx::int(k)).re_rational());
        Witness { m_vector: h.m, m, root: 0, value: h.value, threshold, reverified, reproduced: reverified < threshold }
    };
    rep.first_violation = first.map(witness);
    if let Some(h) = strongest {
        rep.verdict = ArithVerdict::ViolationWitness(witness(h));
    }
    rep
}

fn ln_big(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 960 {
        n.to_f64().unwrap_or(f64::INFINITY).ln()
    } else {
        let shift = bits - 64;
        (n >> shift).to_f64().unwrap_or(1.0).ln() + shift as f64 * LN_2
    }
}

/// Continued-fraction denominators of omega and the Bruno partial sums
/// S_J = sum_{j<=J} ln q_(j+1) / q_j for J < depth. For a float input only
/// convergents its precision determines are used.
pub fn bruno_check(omega: &Cx, depth: usize) -> Result<ArithmeticReport, AnalyzerError> {
    let x = omega.re_rational();
    let err = match omega.prec() {
        None => BigRational::zero(),
        Some(p) => {
            let mag = x.abs().max(BigRational::one());
            mag / BigRational::from_integer(BigInt::one() << (p - 1))
        }
    };
    let mut rep = ArithmeticReport::new(ConditionKind::Bruno, 0, BRUNO_SETTLED, 0.0);
    let mut f = &x - x.floor();
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    let mut dens = vec![q.clone()];
    let mut finite = false;
    while dens.len() <= depth {
        if f.is_zero() {
            finite = true;
            break;
        }
        let r = f.recip();
        let a = r.floor();
        f = &r - &a;
        let next = a.to_integer() * &q + &q_prev;
        if !err.is_zero() {
            let q2 = BigRational::from_integer(&next * &next * 2);
            if q2 * &err >= BigRational::one() {
                rep.notes.push(format!("input precision determines {} denominators", dens.len()));
                break;
            }
        }
        q_prev = std::mem::replace(&mut q, next);
        dens.push(q.clone());
    }
    if finite && dens.len() <= depth {
        return Err(AnalyzerError::RationalInput { terms: dens.len() - 1 });
    }
    let mut s = 0.0;
    for w in dens.windows(2) {
        let t = ln_big(&w[1]) / w[0].to_f64().unwrap_or(f64::INFINITY);
        s += t;
        rep.terms.push(t);
        rep.partial_sums.push(s);
    }
    let n = rep.terms.len();
    rep.bound = n as u64;
    rep.stabilized_at = (0..n).find(|&j| rep.terms[j..].iter().all(|&t| t < BRUNO_SETTLED));
    rep.min_scaled = rep.terms.last().copied().unwrap_or(f64::INFINITY);
    rep.verdict = if n >= 3 && rep.terms[n - 3..].iter().all(|&t| t >= 1.0) {
        ArithVerdict::DivergenceEvidence { from_term: n - 3 }
    } else if rep.stabilized_at.is_some() {
        ArithVerdict::PassUpToBound
    } else {
        ArithVerdict::Inconclusive
    };
    Ok(rep)
}

/// omega = [0; a_1, ..., a_k] with a_(j+1) = ceil(e^(q_j)), rounded to `p`
/// bits. Such numbers violate the Bruno condition; only the first three
/// quotients are representable (the fourth exceeds e^(10^29)).
pub fn fast_growth_number(quotients: usize, p: usize) -> Cx {
    let k = quotients.clamp(1, 3);
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    let mut a_list: Vec<BigInt> = vec![];
    for _ in 0..k {
        let e = Cx::int(q.to_i64().unwrap_or(64)).exp(DEFAULT_PREC.max(p)).re_rational();
        let a = e.ceil().to_integer();
        let next = &a * &q + &q_prev;
        a_list.push(a);
        q_prev = std::mem::replace(&mut q, next);
    }
    let mut v = BigRational::zero();
    for a in a_list.iter().rev() {
        v = (BigRational::from_integer(a.clone()) + v).recip();
    }
    Cx::exact(v, BigRational::zero()).to_float(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q_turn(omega: &Cx, p: usize) -> Cx {
        Cx::i().mul(&Cx::two_pi(p)).mul(omega).exp(p)
    }

    #[test]
    fn fixed_point_fraction() {
        assert_eq!(frac128(&BigRational::new(1.into(), 2.into())), 1u128 << 127);
        assert_eq!(frac128(&BigRational::new((-1).into(), 4.into())), 3u128 << 126);
        assert!((dist128(3u128 << 126) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn liouville_witness_of_the_lattice_example() {
        // a = 2l, q = -1, root 1, generator a alone: m_1 = 10^6 misses the
        // integer 110001 by sum_{k>=4} 10^(6-k!)
        let a = Cx::liouville().scale_int(2);
        let sg = Semigroup::new(vec![a]).unwrap();
        let rep = diophantine_check(&sg, &Cx::int(-1), &[Cx::one()], 1.0, 2.0, 1_000_000).unwrap();
        let w = rep.witness().expect("violation");
        assert_eq!(w.m_vector, vec![1_000_000]);
        assert_eq!(w.m, 110_001);
        let oracle = TAU * 1e-18 * (1.0 + 1e-96);
        assert!((w.value - oracle).abs() < 1e-3 * oracle, "{}", w.value);
        assert!((w.reverified - oracle).abs() < 1e-6 * oracle);
        assert!(w.value < 1e-12 && w.reproduced);
    }

    #[test]
    fn golden_rotation_passes() {
        let p = DEFAULT_PREC;
        let q = q_turn(&Cx::golden(p), p);
        let sg = Semigroup::new(vec![Cx::one()]).unwrap();
        let (c, gamma) = fit_gamma(&sg, &q, &[Cx::one()], 10_000).unwrap().unwrap();
        assert_eq!(c, 0.5);
        assert_eq!(gamma, 1.0);
        let rep = diophantine_check(&sg, &q, &[Cx::one()], 0.5, gamma, 10_000).unwrap();
        assert!(rep.passed());
        // the minimum of k |k omega - m| is (3 - sqrt 5) / 2, at k = 1
        let want = TAU * (3.0 - 5f64.sqrt()) / 2.0;
        assert!((rep.min_scaled - want).abs() < 1e-12, "{}", rep.min_scaled);
        assert_eq!(rep.min_at, vec![1]);
    }

    #[test]
    fn separated_generators_grow_linearly() {
        // q = e^(-sqrt2 pi (1-i)/2): |q^(1+i)| < 1 and |q^(1-i)| = 1; the
        // imaginary part of m.theta grows with m_1
        let p = DEFAULT_PREC;
        let s2 = Cx::int(2).sqrt(p);
        let log_q = s2.mul(&Cx::pi(p)).mul(&Cx::gaussian(-1, 1)).div(&Cx::int(2));
        let q = log_q.exp(p);
        let sg = Semigroup::new(vec![Cx::gaussian(1, 1), Cx::gaussian(1, -1)]).unwrap();
        let rep = diophantine_check(&sg, &q, &[Cx::one()], 0.5, 1.0, 60).unwrap();
        assert!(rep.passed());
    }

    #[test]
    fn siegel_golden_and_root_of_unity() {
        let p = DEFAULT_PREC;
        let rep = siegel_check(&q_turn(&Cx::golden(p), p), 0.5, 1.1, 10_000);
        assert!(rep.passed(), "{:?}", rep.min_scaled);
        let fifth = q_turn(&Cx::ratio(1, 5), p);
        let rep = siegel_check(&fifth, 0.5, 1.1, 100);
        assert_eq!(rep.first_violation.as_ref().unwrap().m_vector, vec![5]);
        let w = rep.witness().unwrap();
        assert_eq!(w.m_vector[0] % 5, 0);
        assert!(w.value < 1e-30 && w.reproduced);
    }

    #[test]
    fn siegel_liouville_rotation() {
        let p = DEFAULT_PREC;
        let rep = siegel_check(&q_turn(&Cx::liouville(), p), 1.0, 2.0, 1_000_000);
        let w = rep.witness().unwrap();
        assert_eq!(w.m_vector, vec![1_000_000]);
        assert!(w.reproduced);
    }

    #[test]
    fn bruno_golden_settles_by_twenty() {
        let rep = bruno_check(&Cx::golden(DEFAULT_PREC), 40).unwrap();
        assert_eq!(rep.stabilized_at, Some(20));
        assert!((rep.partial_sums[20] - rep.partial_sums[19]).abs() < 1e-3);
        assert!(rep.passed());
        // oracle: Fibonacci denominators
        let (mut a, mut b) = (1u64, 1u64);
        let mut s = 0.0;
        for j in 0..=20 {
            s += (b as f64).ln() / a as f64;
            assert!((rep.partial_sums[j] - s).abs() < 1e-12);
            let c = a + b;
            a = b;
            b = c;
        }
    }

    #[test]
    fn bruno_rational_input() {
        assert!(matches!(bruno_check(&Cx::ratio(1, 2), 20), Err(AnalyzerError::RationalInput { .. })));
    }

    #[test]
    fn bruno_fast_growth_flagged() {
        let w = fast_growth_number(3, 256);
        let rep = bruno_check(&w, 20).unwrap();
        assert_eq!(rep.terms.len(), 3);
        assert!(matches!(rep.verdict, ArithVerdict::DivergenceEvidence { .. }));
        assert!((rep.terms[0] - 3f64.ln()).abs() < 1e-12);
        assert!((rep.terms[1] - 64f64.ln() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bruno_liouville_not_flagged() {
        let rep = bruno_check(&Cx::liouville(), 6).unwrap();
        assert!(!matches!(rep.verdict, ArithVerdict::DivergenceEvidence { .. }));
    }
}
