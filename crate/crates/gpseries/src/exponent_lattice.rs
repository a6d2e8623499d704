//! Complex exponents as integer points over a finitely generated additive
//! semigroup, with minimal-element enumeration and regularization to
//! generators that are independent over the integers.

use std::cmp::Ordering;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{tolerance, Cx, CxJson, DEFAULT_PREC};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("generator {index} has non-positive real part")]
    NonPositiveGenerator { index: usize },
    #[error("minimal element enumeration exceeded the coordinate cap {cap}")]
    NonTerminating { cap: i64 },
    #[error("integer relation {relation:?} remains among the generators")]
    DependencyUndetected { relation: Vec<i64> },
    #[error("target is not a nonnegative combination of the generators within bound {bound}")]
    NotRepresentable { bound: i64 },
    #[error("target has two representations {first:?} and {second:?}")]
    AmbiguousRepresentation { first: Vec<i64>, second: Vec<i64> },
}

/// Lattice coordinates of an exponent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExponentVec(pub Vec<i64>);

impl ExponentVec {
    pub fn zero(dim: usize) -> Self {
        ExponentVec(vec![0; dim])
    }

    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = vec![0; dim];
        v[i] = 1;
        ExponentVec(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Sum of coordinates.
    pub fn level(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn is_nonneg(&self) -> bool {
        self.0.iter().all(|&c| c >= 0)
    }

    pub fn add(&self, o: &ExponentVec) -> ExponentVec {
        ExponentVec(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &ExponentVec) -> ExponentVec {
        ExponentVec(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: i64) -> ExponentVec {
        ExponentVec(self.0.iter().map(|a| a * k).collect())
    }

    /// Coordinate-wise `self <= o`.
    pub fn le(&self, o: &ExponentVec) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a <= b)
    }

    /// Some(self / k) when every coordinate is divisible by k.
    pub fn div_exact(&self, k: i64) -> Option<ExponentVec> {
        if self.0.iter().all(|a| a % k == 0) {
            Some(ExponentVec(self.0.iter().map(|a| a / k).collect()))
        } else {
            None
        }
    }
}

/// How the generators were obtained and how far independence was checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// No integer relation with all |coefficients| at most this bound.
    pub certified_bound: i64,
    /// A rational dependency forced rescaling of some generator.
    pub prescaled: bool,
    pub steps: Vec<String>,
}

/// Finitely generated additive semigroup of complex exponents.
#[derive(Clone, Debug)]
pub struct Semigroup {
    generators: Vec<Cx>,
    approx: Vec<(f64, f64)>,
    certificate: Option<Certificate>,
    prec: usize,
}

impl PartialEq for Semigroup {
    fn eq(&self, o: &Semigroup) -> bool {
        self.generators.len() == o.generators.len()
            && self
                .generators
                .iter()
                .zip(&o.generators)
                .all(|(a, b)| a.approx_eq(b, tolerance(self.prec.min(o.prec))))
    }
}

impl Semigroup {
    /// Semigroup with the given generators and no certificate.
    pub fn new(generators: Vec<Cx>) -> Result<Self, LatticeError> {
        for (index, g) in generators.iter().enumerate() {
            if g.re_f64() <= 0.0 {
                return Err(LatticeError::NonPositiveGenerator { index });
            }
        }
        let prec = generators.iter().filter_map(|g| g.prec()).max().unwrap_or(DEFAULT_PREC);
        let approx = generators.iter().map(|g| g.to_f64()).collect();
        Ok(Semigroup { generators, approx, certificate: None, prec })
    }

    /// Semigroup whose generators are known to be independent.
    pub fn certified(generators: Vec<Cx>, certificate: Certificate) -> Result<Self, LatticeError> {
        let mut s = Semigroup::new(generators)?;
        s.certificate = Some(certificate);
        Ok(s)
    }

    /// The semigroup of nonnegative integers.
    pub fn naturals() -> Self {
        Semigroup::certified(
            vec![Cx::one()],
            Certificate { certified_bound: i64::MAX, prescaled: false, steps: vec![] },
        )
        .expect("1 has positive real part")
    }

    pub fn generators(&self) -> &[Cx] {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn prec(&self) -> usize {
        self.prec
    }

    /// Minimal real part over the generators.
    pub fn min_re(&self) -> f64 {
        self.approx.iter().map(|g| g.0).fold(f64::INFINITY, f64::min)
    }

    /// Exponent value of lattice coordinates.
    pub fn value(&self, v: &ExponentVec) -> Cx {
        let mut acc = Cx::zero();
        for (g, &m) in self.generators.iter().zip(&v.0) {
            if m != 0 {
                acc = acc.add(&g.scale_int(m));
            }
        }
        acc
    }

    /// Fast approximate value.
    pub fn value_f64(&self, v: &ExponentVec) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (g, &m) in self.approx.iter().zip(&v.0) {
            re += g.0 * m as f64;
            im += g.1 * m as f64;
        }
        (re, im)
    }

    /// Total order on exponents: real part, then imaginary part, then coords.
    pub fn compare(&self, a: &ExponentVec, b: &ExponentVec) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        let d = a.sub(b);
        let (re, im) = self.value_f64(&d);
        let scale: f64 = self
            .approx
            .iter()
            .zip(&d.0)
            .map(|(g, &m)| (g.0.abs() + g.1.abs()) * (m.abs() as f64))
            .sum::<f64>()
            .max(1.0);
        let gap = 1e-12 * scale;
        if re.abs() > gap {
            return if re > 0.0 { Ordering::Greater } else { Ordering::Less };
        }
        let exact = self.value(&d);
        let tol = tolerance(self.prec);
        let re = exact.re_f64();
        if re.abs() > tol {
            return if re > 0.0 { Ordering::Greater } else { Ordering::Less };
        }
        let im = if im.abs() > gap { im } else { exact.im_f64() };
        if im.abs() > tol {
            return if im > 0.0 { Ordering::Greater } else { Ordering::Less };
        }
        a.cmp(b)
    }

    pub fn to_json(&self) -> SemigroupJson {
        SemigroupJson {
            generators: self.generators.iter().map(CxJson::from).collect(),
            certified_bound: self.certificate.as_ref().map(|c| c.certified_bound.min(i64::MAX / 2)).unwrap_or(0),
        }
    }

    pub fn from_json(j: &SemigroupJson, p: usize) -> Result<Self, LatticeError> {
        let gens = j.generators.iter().map(|g| g.to_cx(p).unwrap_or_else(Cx::zero)).collect();
        if j.certified_bound > 0 {
            Semigroup::certified(
                gens,
                Certificate { certified_bound: j.certified_bound, prescaled: false, steps: vec![] },
            )
        } else {
            Semigroup::new(gens)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupJson {
    pub generators: Vec<CxJson>,
    pub certified_bound: i64,
}

/// (Re, Im) of the exponent.
pub fn order_key(sg: &Semigroup, v: &ExponentVec) -> (f64, f64) {
    sg.value(v).to_f64()
}

/// The condition Re(sum m_i w_i + offset) > 0.
#[derive(Clone, Debug)]
pub struct HalfspaceConstraint {
    pub weights: Vec<Cx>,
    pub offset: Cx,
}

impl HalfspaceConstraint {
    pub fn new(weights: Vec<Cx>, offset: Cx) -> Self {
        HalfspaceConstraint { weights, offset }
    }

    /// Real part of the affine form at `m`.
    pub fn eval(&self, m: &[i64]) -> Cx {
        let mut acc = self.offset.re();
        for (w, &k) in self.weights.iter().zip(m) {
            if k != 0 {
                acc = acc.add(&w.re().scale_int(k));
            }
        }
        acc
    }

    pub fn holds(&self, m: &[i64]) -> bool {
        let p = self.weights.iter().chain([&self.offset]).filter_map(|w| w.prec()).max().unwrap_or(DEFAULT_PREC);
        let v = self.eval(m);
        if v.is_exact() {
            v.re_f64() > 0.0 || v.as_rational().map(|r| r > &num_rational::BigRational::from_integer(0.into())).unwrap_or(false)
        } else {
            v.re_f64() > tolerance(p)
        }
    }
}

/// Default coordinate cap for [`dickson_minimal`].
pub const DICKSON_CAP: i64 = 10_000;

/// The coordinate-wise minimal elements of {m >= 0, m != 0 : c(m)}.
pub fn dickson_minimal(c: &HalfspaceConstraint, dim: usize) -> Result<Vec<ExponentVec>, LatticeError> {
    dickson_minimal_capped(c, dim, DICKSON_CAP)
}

pub fn dickson_minimal_capped(
    c: &HalfspaceConstraint,
    dim: usize,
    cap: i64,
) -> Result<Vec<ExponentVec>, LatticeError> {
    // A minimal element either is a unit vector, or lives on coordinates with
    // positive weight and satisfies 0 < f(m) <= min over its support of a_i,
    // since removing one unit along i must break the constraint.
    let a: Vec<f64> = (0..dim).map(|i| c.weights[i].re_f64()).collect();
    let b = c.offset.re_f64();
    let mut out = Vec::new();
    for i in 0..dim {
        let e = ExponentVec::unit(dim, i);
        if c.holds(&e.0) {
            out.push(e);
        }
    }
    let pos: Vec<usize> = (0..dim).filter(|&i| a[i] > 0.0).collect();
    if pos.is_empty() {
        return Ok(out);
    }
    let amax = pos.iter().map(|&i| a[i]).fold(0.0, f64::max);
    let mut bounds = vec![0i64; dim];
    for &i in &pos {
        let lim = ((amax - b) / a[i]).floor() + 1.0;
        if !lim.is_finite() || lim > cap as f64 {
            return Err(LatticeError::NonTerminating { cap });
        }
        bounds[i] = lim.max(0.0) as i64;
    }
    let mut m = vec![0i64; dim];
    let mut budget: u64 = 50_000_000;
    enumerate_box(&pos, 0, &bounds, &mut m, &mut |m| {
        let support = m.iter().filter(|&&k| k > 0).count();
        let total: i64 = m.iter().sum();
        if total <= 1 || (support == 1 && total == 1) {
            return;
        }
        // quick f64 reject before the exact test
        let f: f64 = m.iter().zip(&a).map(|(&k, &w)| k as f64 * w).sum::<f64>() + b;
        let amin = (0..dim).filter(|&i| m[i] > 0).map(|i| a[i]).fold(f64::INFINITY, f64::min);
        if f <= -1e-9 || f > amin + 1e-9 {
            return;
        }
        if !c.holds(m) {
            return;
        }
        let minimal = (0..dim).filter(|&i| m[i] > 0).all(|i| {
            let mut d = m.to_vec();
            d[i] -= 1;
            d.iter().all(|&k| k == 0) || !c.holds(&d)
        });
        if minimal {
            out.push(ExponentVec(m.to_vec()));
        }
    }, &mut budget);
    if budget == 0 {
        return Err(LatticeError::NonTerminating { cap });
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn enumerate_box(
    coords: &[usize],
    k: usize,
    bounds: &[i64],
    m: &mut [i64],
    f: &mut dyn FnMut(&[i64]),
    budget: &mut u64,
) {
    if *budget == 0 {
        return;
    }
    if k == coords.len() {
        *budget -= 1;
        f(m);
        return;
    }
    let i = coords[k];
    for v in 0..=bounds[i] {
        m[i] = v;
        enumerate_box(coords, k + 1, bounds, m, f, budget);
    }
    m[i] = 0;
}

/// Chooses up to two generators that are independent over the reals.
fn real_basis(vals: &[(f64, f64)], prefer_last_free: bool) -> Vec<usize> {
    let order: Vec<usize> = (0..vals.len()).collect();
    let _ = prefer_last_free;
    let mut basis: Vec<usize> = Vec::new();
    for &j in &order {
        let (x, y) = vals[j];
        let n = x.hypot(y);
        if n < 1e-300 {
            continue;
        }
        match basis.len() {
            0 => basis.push(j),
            1 => {
                let (a, b) = vals[basis[0]];
                let cross = a * y - b * x;
                if cross.abs() > 1e-9 * n * a.hypot(b) {
                    basis.push(j);
                }
            }
            _ => break,
        }
    }
    basis
}

/// All integer vectors m within the coordinate range with sum m_i g_i = target
/// to tolerance. `lo..=hi` bounds every coordinate. Zero vector is excluded
/// when `target` is zero. Relations are returned with the first nonzero
/// non-basis coordinate positive when `target` is zero.
fn solve_combinations(gens: &[Cx], target: &Cx, lo: i64, hi: i64, max_hits: usize) -> Vec<Vec<i64>> {
    let k = gens.len();
    let vals: Vec<(f64, f64)> = gens.iter().map(|g| g.to_f64()).collect();
    let basis = real_basis(&vals, true);
    let free: Vec<usize> = (0..k).filter(|j| !basis.contains(j)).collect();
    let homogeneous = target.is_zero();
    let t = target.to_f64();
    let p = gens.iter().chain([target]).filter_map(|g| g.prec()).max().unwrap_or(DEFAULT_PREC);
    let tol = tolerance(p);
    // coordinates of v in the basis
    let coords = |v: (f64, f64)| -> Option<Vec<f64>> {
        match basis.len() {
            0 => {
                if v.0.hypot(v.1) < 1e-12 {
                    Some(vec![])
                } else {
                    None
                }
            }
            1 => {
                let (a, b) = vals[basis[0]];
                let n2 = a * a + b * b;
                let s = (v.0 * a + v.1 * b) / n2;
                let resid = (v.0 - s * a).hypot(v.1 - s * b);
                if resid > 1e-9 * (1.0 + v.0.hypot(v.1)) {
                    None
                } else {
                    Some(vec![s])
                }
            }
            _ => {
                let (a, b) = vals[basis[0]];
                let (c, d) = vals[basis[1]];
                let det = a * d - b * c;
                Some(vec![(v.0 * d - v.1 * c) / det, (a * v.1 - b * v.0) / det])
            }
        }
    };
    // nonnegative combinations of generators with positive real part cannot
    // overshoot the target's real part
    let his: Vec<i64> = free
        .iter()
        .map(|&j| {
            if lo >= 0 && vals[j].0 > 0.0 {
                hi.min((t.0 / vals[j].0 + 1.0).floor().max(0.0) as i64)
            } else {
                hi
            }
        })
        .collect();
    let mut hits = Vec::new();
    let mut mfree = vec![lo; free.len()];
    loop {
        let skip = homogeneous
            && (mfree.iter().all(|&c| c == 0) || mfree.iter().find(|&&c| c != 0).map(|&c| c < 0).unwrap_or(false));
        if !skip {
            let mut rest = t;
            for (idx, &j) in free.iter().enumerate() {
                rest.0 -= mfree[idx] as f64 * vals[j].0;
                rest.1 -= mfree[idx] as f64 * vals[j].1;
            }
            if let Some(cs) = coords(rest) {
                let mut ok = true;
                let mut full = vec![0i64; k];
                for (idx, &j) in free.iter().enumerate() {
                    full[j] = mfree[idx];
                }
                for (idx, &j) in basis.iter().enumerate() {
                    let r = cs[idx].round();
                    let scale = 1.0 + cs[idx].abs();
                    if (cs[idx] - r).abs() > 1e-7 * scale || r < lo as f64 || r > hi as f64 {
                        ok = false;
                        break;
                    }
                    full[j] = r as i64;
                }
                if ok && !(homogeneous && full.iter().all(|&c| c == 0)) {
                    let mut s = Cx::zero();
                    for (g, &c) in gens.iter().zip(&full) {
                        if c != 0 {
                            s = s.add(&g.scale_int(c));
                        }
                    }
                    if s.sub(target).is_negligible(tol * (1.0 + full.iter().map(|c| c.abs() as f64).sum::<f64>())) {
                        hits.push(full);
                        if hits.len() >= max_hits {
                            return hits;
                        }
                    }
                }
            }
        }
        // advance odometer
        let mut idx = 0;
        loop {
            if idx == mfree.len() {
                return hits;
            }
            if mfree[idx] < his[idx] {
                mfree[idx] += 1;
                break;
            }
            mfree[idx] = lo;
            idx += 1;
        }
    }
}

/// A nonzero integer relation among `vals` with coefficients bounded by
/// `bound` in absolute value, if one exists.
pub fn find_relation(vals: &[Cx], bound: i64) -> Option<Vec<i64>> {
    solve_combinations(vals, &Cx::zero(), -bound, bound, 1).into_iter().next()
}

/// Nonnegative coordinates of `target`, each at most `bound`.
pub fn express(sg: &Semigroup, target: &Cx, bound: i64) -> Result<ExponentVec, LatticeError> {
    if target.is_negligible(tolerance(sg.prec)) {
        return Ok(ExponentVec::zero(sg.rank()));
    }
    let hits = solve_combinations(&sg.generators, target, 0, bound, 2);
    match hits.len() {
        0 => Err(LatticeError::NotRepresentable { bound }),
        1 => Ok(ExponentVec(hits.into_iter().next().unwrap())),
        _ => Err(LatticeError::AmbiguousRepresentation { first: hits[0].clone(), second: hits[1].clone() }),
    }
}

/// Integer coordinates (any sign) of `target` over independent generators.
pub fn express_signed(sg: &Semigroup, target: &Cx, bound: i64) -> Option<Vec<i64>> {
    if target.is_negligible(tolerance(sg.prec)) {
        return Some(vec![0; sg.rank()]);
    }
    solve_combinations(&sg.generators, target, -bound, bound, 1).into_iter().next()
}

/// Coefficient bound used when searching for dependencies during
/// regularization.
pub const RELATION_BOUND: i64 = 64;

/// Bound of the final independence certificate.
pub const CERTIFY_BOUND: i64 = 1000;

/// Replaces raw generators by independent ones spanning a semigroup that
/// contains every raw generator. Returns the semigroup and the coordinates
/// of each raw generator over it.
pub fn regularize(raw: &[Cx]) -> Result<(Semigroup, Vec<ExponentVec>), LatticeError> {
    for (index, g) in raw.iter().enumerate() {
        if g.re_f64() <= 0.0 {
            return Err(LatticeError::NonPositiveGenerator { index });
        }
    }
    let mut gens: Vec<Cx> = Vec::new();
    let mut steps = Vec::new();
    let mut prescaled = false;
    for b in raw {
        if gens.is_empty() {
            gens.push(b.clone());
            continue;
        }
        let mut vals = gens.clone();
        vals.push(b.clone());
        let rel = solve_combinations(&vals, &Cx::zero(), -RELATION_BOUND, RELATION_BOUND, 64)
            .into_iter()
            .filter(|r| r[gens.len()] != 0)
            .min_by_key(|r| r.iter().map(|c| c.abs()).max().unwrap_or(0));
        let Some(mut rel) = rel else {
            gens.push(b.clone());
            continue;
        };
        let g = rel.iter().fold(0i64, |acc, &c| acc.gcd(&c));
        for c in rel.iter_mut() {
            *c /= g;
        }
        // relation: sum rel_i g_i + rel_b b = 0, so k_b b = sum k_i g_i
        let mut kb = rel[gens.len()];
        let mut k: Vec<i64> = rel[..gens.len()].iter().map(|c| -c).collect();
        if kb < 0 {
            kb = -kb;
            k.iter_mut().for_each(|c| *c = -*c);
        }
        if kb > 1 {
            prescaled = true;
            for (i, c) in k.iter_mut().enumerate() {
                if *c == 0 {
                    continue;
                }
                let d = kb / (*c).gcd(&kb);
                *c /= kb / d;
                if d > 1 {
                    gens[i] = gens[i].div(&Cx::int(d));
                }
            }
            steps.push(format!("rescaled generators for dependency with denominator {kb}"));
        }
        if k.iter().all(|&c| c >= 0) {
            steps.push("dropped a generator already in the semigroup".into());
            continue;
        }
        let before = gens.len();
        let (ng, _) = absorb(gens, k)?;
        gens = ng;
        debug_assert_eq!(gens.len(), before);
        steps.push("absorbed a mixed-sign dependency".into());
    }
    let free_dims = gens.len().saturating_sub(real_basis(&gens.iter().map(|g| g.to_f64()).collect::<Vec<_>>(), true).len());
    let bound = if free_dims <= 1 { CERTIFY_BOUND } else { RELATION_BOUND };
    if let Some(relation) = find_relation(&gens, bound) {
        return Err(LatticeError::DependencyUndetected { relation });
    }
    let sg = Semigroup::certified(gens, Certificate { certified_bound: bound, prescaled, steps })?;
    let mut exprs = Vec::with_capacity(raw.len());
    for b in raw {
        exprs.push(express(&sg, b, 1 << 14)?);
    }
    Ok((sg, exprs))
}

/// Given b = sum coeffs_i gens_i with Re b > 0, returns new independent
/// generators over which every old generator and b are nonnegative
/// combinations, together with the coordinates of b.
fn absorb(gens: Vec<Cx>, coeffs: Vec<i64>) -> Result<(Vec<Cx>, Vec<i64>), LatticeError> {
    let negs: Vec<usize> = (0..gens.len()).filter(|&i| coeffs[i] < 0).collect();
    if negs.is_empty() {
        return Ok((gens, coeffs));
    }
    let tau = *negs.last().unwrap();
    if negs.len() == 1 {
        return Ok(absorb_one(gens, coeffs, tau));
    }
    // peel one negative term, absorb the rest, then put it back
    let m_tau = -coeffs[tau];
    let r_tau = gens[tau].clone();
    let mut sub_gens = gens.clone();
    let mut sub_coeffs = coeffs.clone();
    sub_gens.remove(tau);
    sub_coeffs.remove(tau);
    let (mut ng, mut nc) = absorb(sub_gens, sub_coeffs)?;
    ng.insert(tau, r_tau);
    nc.insert(tau, -m_tau);
    Ok(absorb_one(ng, nc, tau))
}

/// The single-negative step: b = sum_{P} m_i r_i - m_tau r_tau.
fn absorb_one(gens: Vec<Cx>, coeffs: Vec<i64>, tau: usize) -> (Vec<Cx>, Vec<i64>) {
    let m_tau = -coeffs[tau];
    let pos: Vec<usize> = (0..gens.len()).filter(|&i| coeffs[i] > 0).collect();
    let re_tau = gens[tau].re_f64();
    let u: Vec<f64> = pos.iter().map(|&i| coeffs[i] as f64 * gens[i].re_f64() / (m_tau as f64 * re_tau)).collect();
    let t = interior_rational_point(&u);
    // t_i = p_i / q_i
    let prod: i64 = pos.iter().zip(&t).map(|(&i, &(_, q))| q * coeffs[i]).product();
    let mut out = gens.clone();
    for (idx, &i) in pos.iter().enumerate() {
        let (p, q) = t[idx];
        let shift = gens[tau].mul(&Cx::ratio(p * m_tau, q * coeffs[i]));
        out[i] = gens[i].sub(&shift);
    }
    out[tau] = gens[tau].div(&Cx::int(prod));
    let mut nc = vec![0i64; gens.len()];
    for &i in &pos {
        nc[i] = coeffs[i];
    }
    (out, nc)
}

/// A rational point of {sum t = 1, 0 < t_i < u_i}: centroid of the vertices,
/// rounded with the smallest common denominator up to 64 that stays inside.
fn interior_rational_point(u: &[f64]) -> Vec<(i64, i64)> {
    let k = u.len();
    if k == 1 {
        return vec![(1, 1)];
    }
    let mut verts: Vec<Vec<f64>> = Vec::new();
    for free in 0..k {
        let others: Vec<usize> = (0..k).filter(|&i| i != free).collect();
        for mask in 0..(1u64 << others.len()) {
            let mut v = vec![0.0; k];
            let mut s = 0.0;
            for (bit, &i) in others.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    v[i] = u[i];
                    s += u[i];
                }
            }
            v[free] = 1.0 - s;
            if v[free] >= -1e-12 && v[free] <= u[free] + 1e-12 {
                if !verts.iter().any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-12)) {
                    verts.push(v);
                }
            }
        }
    }
    let n = verts.len() as f64;
    let centroid: Vec<f64> = (0..k).map(|i| verts.iter().map(|v| v[i]).sum::<f64>() / n).collect();
    for d in 1..=64i64 {
        let mut nums: Vec<i64> = centroid[..k - 1].iter().map(|c| (c * d as f64).round() as i64).collect();
        let last = d - nums.iter().sum::<i64>();
        nums.push(last);
        let inside = nums.iter().zip(u).all(|(&p, &ui)| p > 0 && (p as f64) < ui * d as f64);
        if inside {
            return nums
                .into_iter()
                .map(|p| {
                    let g = p.gcd(&d);
                    (p / g, d / g)
                })
                .collect();
        }
    }
    // fall back to a finer grid around the centroid
    let d = 1i64 << 20;
    let mut nums: Vec<i64> = centroid[..k - 1].iter().map(|c| (c * d as f64).round() as i64).collect();
    nums.push(d - nums.iter().sum::<i64>());
    nums.into_iter()
        .map(|p| {
            let g = p.gcd(&d);
            (p / g, d / g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: usize = 192;

    fn sqrt2() -> Cx {
        Cx::int(2).sqrt(P)
    }

    fn c(re: f64, im: f64) -> Cx {
        Cx::from_f64(re, im, P)
    }

    #[test]
    fn order_key_examples() {
        let sg = Semigroup::new(vec![Cx::gaussian(1, 1), Cx::gaussian(1, -1)]).unwrap();
        assert_eq!(order_key(&sg, &ExponentVec(vec![1, 0])), (1.0, 1.0));
        assert_eq!(order_key(&sg, &ExponentVec(vec![1, 1])), (2.0, 0.0));
        let r1 = Cx::one().sub(&sqrt2().div(&Cx::int(2)));
        let sg2 = Semigroup::new(vec![r1, sqrt2().div(&Cx::int(2))]).unwrap();
        let (re, im) = order_key(&sg2, &ExponentVec(vec![2, 0]));
        // 2 - sqrt 2 from an independent evaluation
        let want = Cx::int(2).sub(&sqrt2()).re_f64();
        assert!((re - want).abs() < 1e-15 && im == 0.0);
        assert!((re - 0.58579).abs() < 1e-5);
    }

    #[test]
    fn dickson_small_cases() {
        let c1 = HalfspaceConstraint::new(vec![Cx::one(), Cx::zero()], Cx::ratio(-1, 2));
        assert_eq!(dickson_minimal(&c1, 2).unwrap(), vec![ExponentVec(vec![1, 0])]);
        let c2 = HalfspaceConstraint::new(vec![Cx::one(), Cx::int(2)], Cx::ratio(-5, 2));
        let mut got = dickson_minimal(&c2, 2).unwrap();
        got.sort();
        assert_eq!(got, vec![ExponentVec(vec![0, 2]), ExponentVec(vec![1, 1]), ExponentVec(vec![3, 0])]);
        let c3 = HalfspaceConstraint::new(vec![Cx::gaussian(1, 1), Cx::gaussian(1, -1)], Cx::gaussian(-1, -1));
        let got = dickson_minimal(&c3, 2).unwrap();
        assert_eq!(got, vec![ExponentVec(vec![0, 2]), ExponentVec(vec![1, 1]), ExponentVec(vec![2, 0])]);
    }

    #[test]
    fn dickson_boundary_counts_as_violation() {
        // Re(m1 + m2 - 1) > 0 excludes the unit vectors exactly on the line
        let c = HalfspaceConstraint::new(vec![Cx::one(), Cx::one()], Cx::int(-1));
        let got = dickson_minimal(&c, 2).unwrap();
        assert_eq!(got, vec![ExponentVec(vec![0, 2]), ExponentVec(vec![1, 1]), ExponentVec(vec![2, 0])]);
    }

    #[test]
    fn dickson_caps_enumeration() {
        let c = HalfspaceConstraint::new(vec![c(1e-6, 0.0), Cx::one()], Cx::int(-1));
        assert!(matches!(dickson_minimal(&c, 2), Err(LatticeError::NonTerminating { .. })));
    }

    #[test]
    fn regularize_independent_pair_unchanged() {
        let (sg, ex) = regularize(&[Cx::one(), sqrt2()]).unwrap();
        assert_eq!(sg.rank(), 2);
        assert_eq!(ex, vec![ExponentVec(vec![1, 0]), ExponentVec(vec![0, 1])]);
    }

    #[test]
    fn regularize_mixed_sign_dependency() {
        let raw = [Cx::one(), sqrt2(), Cx::int(2).sub(&sqrt2())];
        let (sg, ex) = regularize(&raw).unwrap();
        let want0 = Cx::one().sub(&sqrt2().div(&Cx::int(2)));
        let want1 = sqrt2().div(&Cx::int(2));
        assert!(sg.generators()[0].approx_eq(&want0, 1e-50));
        assert!(sg.generators()[1].approx_eq(&want1, 1e-50));
        assert_eq!(ex, vec![ExponentVec(vec![1, 1]), ExponentVec(vec![0, 2]), ExponentVec(vec![2, 0])]);
        assert!(!sg.certificate().unwrap().prescaled);
    }

    #[test]
    fn regularize_rational_dependency() {
        let (sg, ex) = regularize(&[Cx::int(2), Cx::int(3)]).unwrap();
        assert_eq!(sg.rank(), 1);
        assert!(sg.generators()[0].approx_eq(&Cx::one(), 1e-50));
        assert_eq!(ex, vec![ExponentVec(vec![2]), ExponentVec(vec![3])]);
        assert!(sg.certificate().unwrap().prescaled);
    }

    #[test]
    fn regularize_two_negative_signs() {
        // b = 3a - b1 - b2 over independent a = 1, b1 = sqrt2 / 2, b2 = sqrt3 / 2
        let a = Cx::one();
        let b1 = sqrt2().div(&Cx::int(2));
        let b2 = Cx::int(3).sqrt(P).div(&Cx::int(2));
        let b = a.scale_int(3).sub(&b1).sub(&b2);
        let raw = [a, b1, b2, b];
        let (sg, ex) = regularize(&raw).unwrap();
        assert_eq!(sg.rank(), 3);
        for g in sg.generators() {
            assert!(g.re_f64() > 0.0);
        }
        for (r, e) in raw.iter().zip(&ex) {
            assert!(e.is_nonneg());
            assert!(sg.value(e).approx_eq(r, 1e-40));
        }
    }

    #[test]
    fn express_examples() {
        let sg = Semigroup::new(vec![Cx::gaussian(1, 1), Cx::gaussian(1, -1)]).unwrap();
        assert_eq!(express(&sg, &Cx::int(2), 10).unwrap(), ExponentVec(vec![1, 1]));
        assert_eq!(express(&Semigroup::naturals(), &Cx::int(5), 10).unwrap(), ExponentVec(vec![5]));
        let sg2 = Semigroup::new(vec![Cx::one().sub(&sqrt2().div(&Cx::int(2))), sqrt2().div(&Cx::int(2))]).unwrap();
        assert_eq!(express(&sg2, &sqrt2(), 10).unwrap(), ExponentVec(vec![0, 2]));
        assert!(matches!(express(&sg, &Cx::int(-2), 10), Err(LatticeError::NotRepresentable { .. })));
        let dep = Semigroup::new(vec![Cx::one(), Cx::int(2)]).unwrap();
        assert!(matches!(express(&dep, &Cx::int(2), 10), Err(LatticeError::AmbiguousRepresentation { .. })));
    }

    #[test]
    fn compare_breaks_ties_on_imaginary_part() {
        let sg = Semigroup::new(vec![Cx::gaussian(1, 1), Cx::gaussian(1, -1)]).unwrap();
        let a = ExponentVec(vec![1, 0]);
        let b = ExponentVec(vec![0, 1]);
        assert_eq!(sg.compare(&a, &b), Ordering::Greater);
        assert_eq!(sg.compare(&b, &ExponentVec(vec![1, 1])), Ordering::Less);
    }
}
