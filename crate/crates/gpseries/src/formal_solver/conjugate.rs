//! Conjugators of one-variable germs and the reduction of composition
//! equations y(f(x)) to q-difference or Mahler form.

use std::sync::Arc;

use super::{CoefficientStatus, SolveTranscript, SolverError, TranscriptEntry};
use crate::equation_model::FunctionalEquation;
use crate::exponent_lattice::{ExponentVec, Semigroup};
use crate::gps_core::{GSeries, MultiSeries, OperatorKind};
use crate::scalar::{tolerance, zero_threshold, Cx, CxJson};

/// Taylor coefficients a_0..a_depth of a series over the naturals.
pub fn taylor_coeffs(s: &GSeries, depth: usize) -> Vec<Cx> {
    (0..=depth).map(|k| s.coeff(&ExponentVec(vec![k as i64]))).collect()
}

/// The polynomial sum a_k x^k as a series exact to degree len - 1.
pub fn taylor_series(a: &[Cx]) -> GSeries {
    let depth = a.len().saturating_sub(1);
    let mut s = GSeries::new(Arc::new(Semigroup::naturals()), depth as f64, depth as u64);
    for (k, c) in a.iter().enumerate() {
        s.insert(ExponentVec(vec![k as i64]), c.clone());
    }
    s
}

fn mul_trunc(a: &[Cx], b: &[Cx], depth: usize) -> Vec<Cx> {
    let mut out = vec![Cx::zero(); depth + 1];
    for (i, x) in a.iter().enumerate().take(depth + 1) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(depth + 1 - i) {
            if !y.is_zero() {
                out[i + j] = out[i + j].add(&x.mul(y));
            }
        }
    }
    out
}

/// f(g(x)) to order `depth`; g must vanish at 0.
pub fn compose_taylor(f: &[Cx], g: &[Cx], depth: usize) -> Vec<Cx> {
    let mut out = vec![Cx::zero(); depth + 1];
    for c in f.iter().take(depth + 1).rev() {
        out = mul_trunc(&out, g, depth);
        out[0] = out[0].add(c);
    }
    out
}

/// Compositional inverse of f = f_1 x + ..., f_1 != 0, to order `depth`.
pub fn invert_taylor(f: &[Cx], depth: usize) -> Result<Vec<Cx>, SolverError> {
    let f1 = f.get(1).cloned().unwrap_or_else(Cx::zero);
    if f1.is_zero() {
        return Err(SolverError::DegenerateEquation("germ is not invertible: zero linear coefficient".into()));
    }
    let mut g = vec![Cx::zero(); depth + 1];
    if depth >= 1 {
        g[1] = f1.recip();
    }
    for k in 2..=depth {
        let r = compose_taylor(f, &g, k)[k].clone();
        g[k] = r.neg().div(&f1);
    }
    Ok(g)
}

fn pad(a: &[Cx], depth: usize) -> Vec<Cx> {
    let mut v: Vec<Cx> = a.iter().take(depth + 1).cloned().collect();
    v.resize(depth + 1, Cx::zero());
    v
}

fn entry(k: usize, divisor: &Cx, value: &Cx) -> TranscriptEntry {
    TranscriptEntry {
        coords: vec![k as i64],
        exponent: CxJson::from(&Cx::int(k as i64)),
        divisor: CxJson::from(divisor),
        coupled: false,
        status: CoefficientStatus::Determined,
        value: CxJson::from(value),
    }
}

fn schroeder_coeffs(f: &[Cx], depth: usize, tr: &mut SolveTranscript) -> Result<Vec<Cx>, SolverError> {
    let f = pad(f, depth);
    if !f[0].is_zero() {
        return Err(SolverError::DegenerateEquation("germ does not fix 0".into()));
    }
    let q = f[1].clone();
    if q.is_zero() {
        return Err(SolverError::DegenerateEquation("zero multiplier".into()));
    }
    let p = q.prec().unwrap_or(crate::scalar::DEFAULT_PREC);
    let thr = zero_threshold(p);
    let tol = tolerance(p);
    if let Some(r) = (1..=depth + 1).find(|&r| q.powi(r as i64).sub(&Cx::one()).is_negligible(thr)) {
        tr.notes.push(format!("multiplier is a root of unity of order {r}"));
        let mut iterates = vec![pad(&[Cx::zero(), Cx::one()], depth)];
        for k in 1..=r {
            let next = compose_taylor(&f, &iterates[k - 1], depth);
            iterates.push(next);
        }
        let scale = f.iter().map(Cx::abs_f64).fold(1.0, f64::max);
        let is_identity = iterates[r]
            .iter()
            .enumerate()
            .all(|(k, c)| if k == 1 { c.sub(&Cx::one()).is_negligible(tol) } else { c.is_negligible(tol * scale) });
        if !is_identity {
            return Err(SolverError::NonLinearizable { order: r });
        }
        let mut h = vec![Cx::zero(); depth + 1];
        let qinv = q.recip();
        for (k, it) in iterates.iter().take(r).enumerate() {
            let w = qinv.powi(k as i64);
            for (i, c) in it.iter().enumerate() {
                h[i] = h[i].add(&w.mul(c));
            }
        }
        let inv_r = Cx::ratio(1, r as i64);
        let h: Vec<Cx> = h.iter().map(|c| c.mul(&inv_r)).collect();
        let y = invert_taylor(&h, depth)?;
        for (k, c) in y.iter().enumerate().skip(1) {
            tr.entries.push(entry(k, &Cx::one(), c));
        }
        return Ok(y);
    }
    let mut y = vec![Cx::zero(); depth + 1];
    if depth >= 1 {
        y[1] = Cx::one();
        tr.entries.push(entry(1, &Cx::one(), &y[1]));
    }
    for k in 2..=depth {
        // y(qx) - q y(x) = sum_{j>=2} f_j y^j; y_k does not enter the right side yet.
        let small = q.powi(k as i64 - 1).sub(&Cx::one());
        if small.is_negligible(tol) {
            return Err(SolverError::SmallDivisorBreakdown { k: k - 1, value: small.abs_f64() });
        }
        let rhs = compose_taylor(&f, &y, k)[k].clone();
        let d = q.powi(k as i64).sub(&q);
        y[k] = rhs.div(&d);
        tr.entries.push(entry(k, &d, &y[k]));
    }
    Ok(y)
}

/// The conjugator y with y'(0) = 1 and y(qx) = f(y(x)) for f = qx + ...,
/// to order `depth`.
pub fn solve_schroeder(f: &[Cx], depth: usize) -> Result<(GSeries, SolveTranscript), SolverError> {
    let mut tr = SolveTranscript::default();
    let y = schroeder_coeffs(f, depth, &mut tr)?;
    Ok((taylor_series(&y), tr))
}

fn boettcher_coeffs(g: &[Cx], ell: usize, depth: usize, tr: &mut SolveTranscript) -> Result<Vec<Cx>, SolverError> {
    if ell < 2 {
        return Err(SolverError::DegenerateEquation("valence must be at least 2".into()));
    }
    let top = depth + ell - 1;
    let g = pad(g, top);
    if g[..ell].iter().any(|c| !c.is_zero()) || g[ell].is_zero() {
        return Err(SolverError::DegenerateEquation(format!("germ is not a x^{ell} + o(x^{ell}) with a != 0")));
    }
    let a = g[ell].clone();
    let p = a.prec().unwrap_or(crate::scalar::DEFAULT_PREC);
    let c = if ell == 2 { a.recip() } else { a.pow(&Cx::ratio(-1, ell as i64 - 1), p) };
    let mut y = vec![Cx::zero(); depth + 1];
    if depth >= 1 {
        y[1] = c;
        tr.entries.push(entry(1, &Cx::one(), &y[1]));
    }
    let ell_cx = Cx::int(ell as i64);
    for j in 2..=depth {
        // order m = j + ell - 1: [ell | m] y_{m/ell} = ell y_j + R_m
        let m = j + ell - 1;
        let r = compose_taylor(&g, &y, m)[m].clone();
        let lhs = if m % ell == 0 { y[m / ell].clone() } else { Cx::zero() };
        y[j] = lhs.sub(&r).div(&ell_cx);
        tr.entries.push(entry(j, &ell_cx, &y[j]));
    }
    Ok(y)
}

/// The conjugator y with y(x^ell) = g(y(x)) for g = a x^ell + ..., where
/// y'(0) is the principal root of a^(-1/(ell-1)).
pub fn solve_boettcher(g: &[Cx], ell: usize, depth: usize) -> Result<(GSeries, SolveTranscript), SolverError> {
    let mut tr = SolveTranscript::default();
    let y = boettcher_coeffs(g, ell, depth, &mut tr)?;
    Ok((taylor_series(&y), tr))
}

/// A germ f(x) = f_1 x + f_2 x^2 + ... fixing 0.
#[derive(Clone, Debug)]
pub struct CompositionMap {
    pub coeffs: Vec<Cx>,
}

impl CompositionMap {
    pub fn new(coeffs: Vec<Cx>) -> Self {
        CompositionMap { coeffs }
    }

    /// From a one-variable series f(x).
    pub fn from_multiseries(m: &MultiSeries) -> Self {
        let deg = m.degree() as usize;
        CompositionMap { coeffs: (0..=deg).map(|k| m.coeff(&[k as u32])).collect() }
    }

    /// Order of the first nonzero coefficient.
    pub fn valence(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }
}

/// The equation F(xi(t), u(t), u(q t), ...) = 0 (or with u(t^(ell^j))) where
/// xi conjugates f to t -> qt (or t -> t^ell), together with the transport
/// back to solutions of F(x, y(x), y(f(x)), ...) = 0.
#[derive(Clone, Debug)]
pub struct TransformedEquation {
    pub eq: FunctionalEquation,
    pub conjugator: Vec<Cx>,
    pub inverse: Vec<Cx>,
    pub depth: usize,
}

impl TransformedEquation {
    /// y = u o xi^(-1), to order `depth`.
    pub fn transport_back(&self, u: &[Cx]) -> Vec<Cx> {
        compose_taylor(u, &self.inverse, self.depth)
    }

    /// u = y o xi, to order `depth`.
    pub fn transport_forward(&self, y: &[Cx]) -> Vec<Cx> {
        compose_taylor(y, &self.conjugator, self.depth)
    }
}

/// Rewrites F(x, y(x), y(f(x)), ..., y(f^[n](x))) = 0 through the conjugator
/// of f. `f_eq` has variables (x, y_0, ..., y_n), where y_j stands for
/// y(f^[j](x)).
pub fn transform_general_equation(
    f_eq: &MultiSeries,
    map: &CompositionMap,
    depth: usize,
) -> Result<TransformedEquation, SolverError> {
    let unavailable = |e: SolverError| SolverError::ConjugatorUnavailable(e.to_string());
    let mut tr = SolveTranscript::default();
    let (xi, op) = match map.valence() {
        Some(1) => {
            let q = map.coeffs[1].clone();
            let p = q.prec().unwrap_or(crate::scalar::DEFAULT_PREC);
            (schroeder_coeffs(&map.coeffs, depth, &mut tr).map_err(unavailable)?, OperatorKind::q_difference(q, p))
        }
        Some(ell) if ell >= 2 => (
            boettcher_coeffs(&map.coeffs, ell, depth, &mut tr).map_err(unavailable)?,
            OperatorKind::Mahler { ell: ell as i64 },
        ),
        _ => return Err(SolverError::ConjugatorUnavailable("the map does not fix 0 with a nonzero germ".into())),
    };
    let inverse = invert_taylor(&xi, depth).map_err(unavailable)?;
    let mut powers: Vec<Vec<Cx>> = vec![pad(&[Cx::one()], depth)];
    let mut g = MultiSeries::new(f_eq.nvars(), f_eq.trunc_deg());
    for (e, c) in f_eq.iter() {
        let a = e[0] as usize;
        while powers.len() <= a {
            let next = mul_trunc(powers.last().unwrap(), &xi, depth);
            powers.push(next);
        }
        for (k, x) in powers[a].iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let mut e2 = e.clone();
            e2[0] = k as u32;
            g.add_term(e2, c.mul(x));
        }
    }
    let eq = FunctionalEquation::new(g, op)?;
    Ok(TransformedEquation { eq, conjugator: xi, inverse, depth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn same(a: &Cx, b: &Cx) -> bool {
        a.sub(b).is_zero()
    }

    fn same_all(a: &[Cx], b: &[Cx]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| same(x, y))
    }
    use crate::formal_solver::solve_taylor;

    fn ints(v: &[i64]) -> Vec<Cx> {
        v.iter().map(|&k| Cx::int(k)).collect()
    }

    fn assert_small(v: &[Cx], from: usize, to: usize) {
        for (k, c) in v.iter().enumerate().take(to + 1).skip(from) {
            assert!(c.abs_f64() < 1e-40, "order {k}: {c:?}");
        }
    }

    #[test]
    fn composition_and_inverse() {
        let f = ints(&[0, 1, 1]);
        let g = invert_taylor(&f, 8).unwrap();
        let id = compose_taylor(&f, &g, 8);
        assert!(same(&id[1], &Cx::one()));
        assert_small(&id, 2, 8);
        // inverse of x + x^2 has Catalan coefficients with alternating signs
        assert!(same(&g[4], &Cx::int(-5)));
    }

    #[test]
    fn schroeder_linear_map_is_identity() {
        let (y, _) = solve_schroeder(&ints(&[0, 3]), 6).unwrap();
        let c = taylor_coeffs(&y, 6);
        assert!(same(&c[1], &Cx::one()));
        assert!(c[2..].iter().all(Cx::is_zero));
    }

    #[test]
    fn schroeder_conjugacy_residual() {
        let depth = 8;
        let f = ints(&[0, 2, 1]);
        let (y, tr) = solve_schroeder(&f, depth).unwrap();
        let y = taylor_coeffs(&y, depth);
        let scaled: Vec<Cx> = y.iter().enumerate().map(|(k, c)| c.mul(&Cx::int(2).powi(k as i64))).collect();
        let fy = compose_taylor(&f, &y, depth);
        let diff: Vec<Cx> = scaled.iter().zip(&fy).map(|(a, b)| a.sub(b)).collect();
        assert!(diff.iter().all(Cx::is_zero));
        assert_eq!(tr.entries.len(), depth);
        // y o y^-1 = id
        let inv = invert_taylor(&y, depth).unwrap();
        let id = compose_taylor(&y, &inv, depth);
        assert_small(&id, 2, depth);
    }

    #[test]
    fn root_of_unity_detection() {
        let err = solve_schroeder(&ints(&[0, -1, 1]), 8).unwrap_err();
        assert_eq!(err, SolverError::NonLinearizable { order: 2 });
        // an involution is linearizable: f = -x / (1 + x) = -x + x^2 - x^3 + ...
        let depth = 8;
        let f: Vec<Cx> = (0..=depth as i64).map(|k| if k == 0 { Cx::zero() } else { Cx::int(if k % 2 == 1 { -1 } else { 1 }) }).collect();
        let (y, _) = solve_schroeder(&f, depth).unwrap();
        let y = taylor_coeffs(&y, depth);
        let lhs: Vec<Cx> = y.iter().enumerate().map(|(k, c)| c.mul(&Cx::int(-1).powi(k as i64))).collect();
        let rhs = compose_taylor(&f, &y, depth);
        for k in 0..=depth {
            assert!(lhs[k].sub(&rhs[k]).abs_f64() < 1e-40, "order {k}");
        }
    }

    #[test]
    fn boettcher_cases() {
        let (y, _) = solve_boettcher(&ints(&[0, 0, 1]), 2, 6).unwrap();
        assert!(same_all(&taylor_coeffs(&y, 6), &ints(&[0, 1, 0, 0, 0, 0, 0])));
        let (y, _) = solve_boettcher(&ints(&[0, 0, 2]), 2, 6).unwrap();
        let c = taylor_coeffs(&y, 6);
        assert!(same(&c[1], &Cx::ratio(1, 2)));
        assert!(c[2..].iter().all(Cx::is_zero));

        let depth = 8;
        let g = ints(&[0, 0, 1, 1]);
        let (y, _) = solve_boettcher(&g, 2, depth).unwrap();
        let y = taylor_coeffs(&y, depth);
        let mut y_sq = vec![Cx::zero(); 2 * depth + 1];
        for (k, c) in y.iter().enumerate() {
            y_sq[2 * k] = c.clone();
        }
        let gy = compose_taylor(&g, &y, depth);
        for k in 0..=depth {
            assert!(same(&y_sq[k], &gy[k]), "order {k}");
        }
        let inv = invert_taylor(&y, depth).unwrap();
        assert_small(&compose_taylor(&y, &inv, depth), 2, depth);
    }

    #[test]
    fn boettcher_cubic_principal_root() {
        let depth = 6;
        let g = ints(&[0, 0, 0, 8, 1]);
        let (y, _) = solve_boettcher(&g, 3, depth).unwrap();
        let y = taylor_coeffs(&y, depth);
        assert!(y[1].sub(&Cx::ratio(1, 8).pow(&Cx::ratio(1, 2), 192)).abs_f64() < 1e-50);
        let mut y_cube = vec![Cx::zero(); 3 * depth + 1];
        for (k, c) in y.iter().enumerate() {
            y_cube[3 * k] = c.clone();
        }
        let gy = compose_taylor(&g, &y, depth);
        for k in 0..=depth {
            assert!(y_cube[k].sub(&gy[k]).abs_f64() < 1e-45, "order {k}");
        }
    }

    fn composition_eq(terms: &[(&[u32], i64)]) -> MultiSeries {
        let mut m = MultiSeries::new(terms[0].0.len(), u64::MAX);
        for (e, c) in terms {
            m.add_term(e.to_vec(), Cx::int(*c));
        }
        m
    }

    /// F(x, y(x), y(f(x))) to order depth.
    fn round_trip(f_eq: &MultiSeries, f: &[Cx], y: &[Cx], depth: usize) -> Vec<Cx> {
        let yf = compose_taylor(y, f, depth);
        let mut out = vec![Cx::zero(); depth + 1];
        for (e, c) in f_eq.iter() {
            let mut t = pad(&[Cx::one()], depth);
            for _ in 0..e[0] {
                t = mul_trunc(&t, &pad(&[Cx::zero(), Cx::one()], depth), depth);
            }
            for _ in 0..e[1] {
                t = mul_trunc(&t, y, depth);
            }
            for _ in 0..e[2] {
                t = mul_trunc(&t, &yf, depth);
            }
            for k in 0..=depth {
                out[k] = out[k].add(&t[k].mul(c));
            }
        }
        out
    }

    #[test]
    fn transform_schroeder_round_trip() {
        let depth = 8;
        let f = ints(&[0, 2, 1]);
        // y(f(x)) - 3 y(x) - x^2 = 0
        let f_eq = composition_eq(&[(&[0, 0, 1], 1), (&[0, 1, 0], -3), (&[2, 0, 0], -1)]);
        let t = transform_general_equation(&f_eq, &CompositionMap::new(f.clone()), depth).unwrap();
        assert!(matches!(t.eq.op(), OperatorKind::QDifference { .. }));
        let (u, _) = solve_taylor(&t.eq, depth).unwrap();
        let y = t.transport_back(&taylor_coeffs(&u, depth));
        let r = round_trip(&f_eq, &f, &y, depth);
        assert!(r.iter().all(|c| c.abs_f64() < 1e-40), "{r:?}");

        // with -4 y the transformed divisor 2^k - 4 vanishes against a nonzero x^2 term
        let f_eq = composition_eq(&[(&[0, 0, 1], 1), (&[0, 1, 0], -4), (&[2, 0, 0], -1)]);
        let t = transform_general_equation(&f_eq, &CompositionMap::new(f), depth).unwrap();
        assert!(matches!(solve_taylor(&t.eq, depth), Err(SolverError::ResonanceBlocked { .. })));
    }

    #[test]
    fn transform_identity_for_linear_map() {
        let f_eq = composition_eq(&[(&[0, 0, 1], 1), (&[0, 1, 0], -3), (&[2, 0, 0], -1)]);
        let t = transform_general_equation(&f_eq, &CompositionMap::new(ints(&[0, 2])), 6).unwrap();
        assert!(same_all(&t.conjugator, &ints(&[0, 1, 0, 0, 0, 0, 0])));
        assert!(same(&t.eq.f().coeff(&[2, 0, 0]), &Cx::int(-1)));
        assert_eq!(t.eq.f().len(), 3);
    }

    #[test]
    fn transform_mahler_round_trip() {
        let depth = 8;
        let g = ints(&[0, 0, 1, 1]);
        // y(g(x)) - 2 y(x) - x = 0
        let f_eq = composition_eq(&[(&[0, 0, 1], 1), (&[0, 1, 0], -2), (&[1, 0, 0], -1)]);
        let t = transform_general_equation(&f_eq, &CompositionMap::new(g.clone()), depth).unwrap();
        assert!(matches!(t.eq.op(), OperatorKind::Mahler { ell: 2 }));
        let (u, _) = solve_taylor(&t.eq, depth).unwrap();
        let y = t.transport_back(&taylor_coeffs(&u, depth));
        let r = round_trip(&f_eq, &g, &y, depth);
        assert!(r.iter().all(|c| c.abs_f64() < 1e-40), "{r:?}");

        // y(g(x)) - y(x)^2 = 0 becomes u(t^2) = u(t)^2, solved by u = 0
        let f_eq = composition_eq(&[(&[0, 0, 1], 1), (&[0, 2, 0], -1)]);
        let t = transform_general_equation(&f_eq, &CompositionMap::new(g), depth).unwrap();
        assert_eq!(t.eq.f().len(), 2);
    }
}
