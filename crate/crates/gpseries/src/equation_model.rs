//! Functional equations F(x, y, Dy, ..., D^n y) = 0 together with what can be
//! read off along a candidate series: residual, partial derivatives and the
//! leading exponent data of the linearization.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::exponent_lattice::{express, ExponentVec};
use crate::gps_core::{apply_operator, substitute, GSeries, MultiSeries, OperatorKind, SeriesError};
use crate::scalar::{tolerance, Cx};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquationError {
    #[error("the equation is identically zero")]
    ZeroEquation,
    #[error("F must have at least the variables x and y")]
    TooFewVariables,
    #[error("leading data condition fails: {reason}")]
    NotSatisfied { reason: String, leading: Vec<Vec<(f64, f64)>> },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// F over (x, y_0, ..., y_n) with y_j standing for D^j y.
#[derive(Clone, Debug)]
pub struct FunctionalEquation {
    f: MultiSeries,
    op: OperatorKind,
}

impl FunctionalEquation {
    pub fn new(f: MultiSeries, op: OperatorKind) -> Result<Self, EquationError> {
        if f.nvars() < 2 {
            return Err(EquationError::TooFewVariables);
        }
        if f.is_empty() {
            return Err(EquationError::ZeroEquation);
        }
        Ok(FunctionalEquation { f, op })
    }

    pub fn f(&self) -> &MultiSeries {
        &self.f
    }

    pub fn op(&self) -> &OperatorKind {
        &self.op
    }

    /// Highest operator power n.
    pub fn order(&self) -> usize {
        self.f.nvars() - 2
    }

    /// (phi, D phi, ..., D^n phi).
    pub fn images(&self, phi: &GSeries) -> Vec<GSeries> {
        (0..=self.order()).map(|j| apply_operator(&self.op, j, phi)).collect()
    }

    /// F(x, phi, D phi, ..., D^n phi).
    pub fn residual(&self, phi: &GSeries) -> Result<GSeries, EquationError> {
        Ok(substitute(&self.f, &self.images(phi))?)
    }

    /// The series dF/dy_j along phi, j = 0..n.
    pub fn partials_along(&self, phi: &GSeries) -> Result<Vec<GSeries>, EquationError> {
        let args = self.images(phi);
        (0..=self.order())
            .map(|j| Ok(substitute(&self.f.derivative(j + 1), &args)?))
            .collect()
    }

    /// Same substitution with every coefficient replaced by its modulus: a
    /// termwise bound on the size of the sums that make up the residual.
    pub fn residual_scale(&self, phi: &GSeries) -> Result<BTreeMap<ExponentVec, f64>, EquationError> {
        abs_substitute(&self.f, &self.images(phi))
    }

    /// Largest |R_m| / max(1, scale_m) over residual terms with real part at
    /// most `frontier`.
    pub fn relative_defect(&self, phi: &GSeries, frontier: f64) -> Result<f64, EquationError> {
        let r = self.residual(phi)?;
        let scale = self.residual_scale(phi)?;
        let sg = phi.semigroup();
        let mut worst: f64 = 0.0;
        for (m, c) in r.iter() {
            if sg.value_f64(m).0 > frontier + 1e-9 {
                continue;
            }
            let s = scale.get(m).copied().unwrap_or(0.0).max(1.0);
            worst = worst.max(c.abs_f64() / s);
        }
        Ok(worst)
    }
}

fn abs_substitute(f: &MultiSeries, args: &[GSeries]) -> Result<BTreeMap<ExponentVec, f64>, EquationError> {
    let Some(first) = args.first() else { return Ok(BTreeMap::new()) };
    let sg = first.semigroup().clone();
    let trunc_re = args.iter().map(|a| a.trunc_re()).fold(f64::INFINITY, f64::min);
    let trunc_deg = args.iter().map(|a| a.trunc_deg()).min().unwrap_or(u64::MAX);
    let keep = |m: &ExponentVec| (m.level() as u64) <= trunc_deg && sg.value_f64(m).0 <= trunc_re + 1e-9;
    type Poly = BTreeMap<ExponentVec, f64>;
    let mul = |a: &Poly, b: &Poly| {
        let mut out = Poly::new();
        for (m1, c1) in a {
            for (m2, c2) in b {
                let m = m1.add(m2);
                if keep(&m) {
                    *out.entry(m).or_insert(0.0) += c1 * c2;
                }
            }
        }
        out
    };
    let mut powers: Vec<Vec<Poly>> = args
        .iter()
        .map(|a| {
            let one: Poly = [(ExponentVec::zero(sg.rank()), 1.0)].into_iter().collect();
            let base: Poly = a.iter().map(|(m, c)| (m.clone(), c.abs_f64())).collect();
            vec![one, base]
        })
        .collect();
    let mut out = Poly::new();
    for (e, c) in f.iter() {
        let xm = if e[0] == 0 {
            ExponentVec::zero(sg.rank())
        } else {
            express(&sg, &Cx::int(e[0] as i64), 4 * e[0] as i64 + 64)
                .map_err(|_| SeriesError::PowerNotInSemigroup { power: e[0] as i64 })?
        };
        if !keep(&xm) {
            continue;
        }
        let mut term: Poly = [(xm, c.abs_f64())].into_iter().collect();
        for (j, &k) in e[1..].iter().enumerate() {
            if k == 0 {
                continue;
            }
            while powers[j].len() <= k as usize {
                let next = mul(powers[j].last().unwrap(), &powers[j][1]);
                powers[j].push(next);
            }
            term = mul(&term, &powers[j][k as usize]);
        }
        for (m, v) in term {
            *out.entry(m).or_insert(0.0) += v;
        }
    }
    Ok(out)
}

/// Leading behaviour of the linearization along a solution.
#[derive(Clone, Debug)]
pub struct LeadingData {
    /// Leading exponent nu (nu_0 in the Mahler case).
    pub nu: Cx,
    pub nu_coords: ExponentVec,
    /// A_0..A_n: coefficient of x^nu in dF/dy_j.
    pub a: Vec<Cx>,
    /// Whether every nonzero partial starts exactly at x^nu.
    pub common_exponent: bool,
}

impl LeadingData {
    /// L(z) = sum A_j z^j.
    pub fn l_eval(&self, z: &Cx) -> Cx {
        let mut acc = Cx::zero();
        for c in self.a.iter().rev() {
            acc = acc.mul(z).add(c);
        }
        acc
    }

    /// Degree of L, ignoring vanishing top coefficients.
    pub fn degree(&self) -> usize {
        self.a.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }
}

fn leading_exponents(s: &GSeries) -> Vec<(f64, f64)> {
    s.lowest_re_terms().iter().map(|(m, _)| s.semigroup().value_f64(m)).collect()
}

/// Extracts nu and A_j. For the differential and q-difference operators all
/// partials must start at one common exponent; for the Mahler operator only
/// dF/dy_0 must start with a single term.
pub fn leading_data(partials: &[GSeries], op: &OperatorKind) -> Result<LeadingData, EquationError> {
    let diag = || partials.iter().map(leading_exponents).collect::<Vec<_>>();
    let Some(first) = partials.first() else {
        return Err(EquationError::NotSatisfied { reason: "no partial derivatives".into(), leading: vec![] });
    };
    let sg = first.semigroup().clone();
    let candidates: Vec<ExponentVec> = match op {
        OperatorKind::Mahler { .. } => first.lowest_re_terms().into_iter().map(|(m, _)| m.clone()).collect(),
        _ => {
            let mut all: Vec<ExponentVec> = partials
                .iter()
                .flat_map(|s| s.lowest_re_terms().into_iter().map(|(m, _)| m.clone()))
                .collect();
            all.sort_by(|a, b| sg.compare(a, b));
            all.dedup();
            if let Some(lo) = all.first() {
                let re0 = sg.value(lo).re_f64();
                let tol = tolerance(sg.prec()).max(1e-12 * (1.0 + re0.abs()));
                all.retain(|m| (sg.value(m).re_f64() - re0).abs() <= tol);
            }
            all
        }
    };
    match candidates.len() {
        0 => Err(EquationError::NotSatisfied {
            reason: match op {
                OperatorKind::Mahler { .. } => "dF/dy_0 vanishes along the series".into(),
                _ => "all partial derivatives vanish along the series".into(),
            },
            leading: diag(),
        }),
        1 => {
            let nu_coords = candidates[0].clone();
            let a: Vec<Cx> = partials.iter().map(|s| s.coeff(&nu_coords)).collect();
            let common_exponent = partials
                .iter()
                .all(|s| s.is_empty() || s.leading().map(|(m, _)| *m == nu_coords).unwrap_or(false));
            Ok(LeadingData { nu: sg.value(&nu_coords), nu_coords, a, common_exponent })
        }
        _ => Err(EquationError::NotSatisfied {
            reason: format!("{} distinct leading exponents share the minimal real part", candidates.len()),
            leading: diag(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent_lattice::{regularize, Semigroup};
    use std::sync::Arc;

    fn poly(nvars: usize, terms: &[(&[u32], Cx)]) -> MultiSeries {
        let mut f = MultiSeries::new(nvars, u64::MAX);
        for (e, c) in terms {
            f.add_term(e.to_vec(), c.clone());
        }
        f
    }

    fn euler() -> FunctionalEquation {
        // x * delta(y) - y + x
        let f = poly(3, &[(&[1, 0, 1], Cx::one()), (&[0, 1, 0], Cx::int(-1)), (&[1, 0, 0], Cx::one())]);
        FunctionalEquation::new(f, OperatorKind::Differential).unwrap()
    }

    #[test]
    fn euler_partial_sum_residual_starts_late() {
        let sg = Arc::new(Semigroup::naturals());
        let mut phi = GSeries::zero(sg.clone());
        let mut fact = 1i64;
        for k in 0..=6i64 {
            if k > 0 {
                fact *= k;
            }
            phi.insert(ExponentVec(vec![k + 1]), Cx::int(fact));
        }
        let r = euler().residual(&phi).unwrap();
        assert!(r.min_re().unwrap() >= 8.0);
        assert_eq!(r.coeff(&ExponentVec(vec![8])).as_small_int(), Some(5040));
    }

    #[test]
    fn residual_of_zero_is_forcing_term() {
        let f = poly(2, &[(&[1, 0], Cx::one()), (&[0, 1], Cx::one())]);
        let eq = FunctionalEquation::new(f, OperatorKind::Differential).unwrap();
        let sg = Arc::new(Semigroup::naturals());
        let r = eq.residual(&GSeries::zero(sg)).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r.coeff(&ExponentVec(vec![1])).approx_eq(&Cx::one(), 0.0));
    }

    #[test]
    fn linear_partial_is_one() {
        let f = poly(3, &[(&[0, 0, 1], Cx::one()), (&[1, 0, 0], Cx::one())]);
        let eq = FunctionalEquation::new(f, OperatorKind::Differential).unwrap();
        let sg = Arc::new(Semigroup::naturals());
        let phi = GSeries::monomial(sg, ExponentVec(vec![1]), Cx::int(3));
        let d = eq.partials_along(&phi).unwrap();
        assert!(d[0].is_empty());
        assert_eq!(d[1].len(), 1);
        assert!(d[1].coeff(&ExponentVec(vec![0])).approx_eq(&Cx::one(), 0.0));
    }

    #[test]
    fn all_zero_partials_not_satisfied() {
        let sg = Arc::new(Semigroup::naturals());
        let z = vec![GSeries::zero(sg.clone()), GSeries::zero(sg)];
        assert!(matches!(
            leading_data(&z, &OperatorKind::Differential),
            Err(EquationError::NotSatisfied { .. })
        ));
    }

    #[test]
    fn two_leading_exponents_not_satisfied() {
        let (sg, _) = regularize(&[Cx::gaussian(1, 1), Cx::gaussian(1, -1)]).unwrap();
        let sg = Arc::new(sg);
        let mut s = GSeries::zero(sg.clone());
        s.insert(ExponentVec(vec![1, 0]), Cx::int(-2));
        s.insert(ExponentVec(vec![0, 1]), Cx::int(-2));
        let r = leading_data(&[s, GSeries::zero(sg)], &OperatorKind::Mahler { ell: 2 });
        match r {
            Err(EquationError::NotSatisfied { leading, .. }) => assert_eq!(leading[0].len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn l_polynomial_from_partials() {
        let sg = Arc::new(Semigroup::naturals());
        let parts = vec![
            GSeries::constant(sg.clone(), Cx::int(-1)).add(&GSeries::monomial(sg.clone(), ExponentVec(vec![1]), Cx::int(2))).unwrap(),
            GSeries::constant(sg, Cx::one()),
        ];
        let ld = leading_data(&parts, &OperatorKind::Differential).unwrap();
        assert!(ld.nu.is_zero());
        assert!(ld.common_exponent);
        assert_eq!(ld.degree(), 1);
        assert!(ld.l_eval(&Cx::int(3)).approx_eq(&Cx::int(2), 0.0));
    }

    #[test]
    fn finite_difference_matches_partial() {
        // F = y0^2 y1 + x y1^2, phi = x + 2x^2, epsilon perturbation of y1 slot
        let f = poly(3, &[(&[0, 2, 1], Cx::one()), (&[1, 0, 2], Cx::one())]);
        let eq = FunctionalEquation::new(f.clone(), OperatorKind::Differential).unwrap();
        let sg = Arc::new(Semigroup::naturals());
        let mut phi = GSeries::zero(sg.clone());
        phi.insert(ExponentVec(vec![1]), Cx::one());
        phi.insert(ExponentVec(vec![2]), Cx::int(2));
        let d1 = &eq.partials_along(&phi).unwrap()[1];
        let args = eq.images(&phi);
        let base = substitute(&f, &args).unwrap();
        let fd = |eps: Cx| {
            let bumped = args[1].add(&GSeries::monomial(sg.clone(), ExponentVec(vec![1]), eps.clone())).unwrap();
            let r = substitute(&f, &[args[0].clone(), bumped]).unwrap().sub(&base).unwrap();
            // divide by eps x
            r.coeff(&ExponentVec(vec![3])).div(&eps)
        };
        let target = d1.coeff(&ExponentVec(vec![2]));
        let e1 = fd(Cx::ratio(1, 1000)).sub(&target).abs_f64();
        let e2 = fd(Cx::ratio(1, 2000)).sub(&target).abs_f64();
        assert!(e1 < 1e-2 && e2 < e1 * 0.6, "{e1} {e2}");
    }
}
