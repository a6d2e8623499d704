//! Power series solutions y = sum_{k>=1} c_k x^k with integer exponents.

use std::sync::Arc;

use super::{CoefficientStatus, SolveTranscript, SolverError, TranscriptEntry};
use crate::equation_model::FunctionalEquation;
use crate::exponent_lattice::{ExponentVec, Semigroup};
use crate::gps_core::{GSeries, OperatorKind};
use crate::scalar::{tolerance, Cx, CxJson};

fn order_of(s: &GSeries) -> Option<i64> {
    s.iter().map(|(m, _)| m.level()).min()
}

/// Solves F(x, y, Dy, ..., D^n y) = 0 for a power series vanishing at 0.
/// Coefficient k is fixed by the x^(k+nu) term of the residual, where nu is
/// the order of the linear part along y = 0.
pub fn solve_taylor(eq: &FunctionalEquation, depth: usize) -> Result<(GSeries, SolveTranscript), SolverError> {
    let sg = Arc::new(Semigroup::naturals());
    let p = sg.prec();
    let tol = tolerance(p);
    let op = eq.op().clone();
    let n = eq.order();
    let zero = GSeries::zero(sg.clone());
    let partials = eq.partials_along(&zero)?;
    let Some(nu) = partials.iter().filter_map(order_of).min() else {
        return Err(SolverError::DegenerateEquation("the linear part vanishes at y = 0".into()));
    };
    for (e, _) in eq.f().iter() {
        let d: u32 = e[1..].iter().sum();
        if d >= 2 && (e[0] + d - 1) as i64 <= nu {
            return Err(SolverError::DegenerateEquation(format!(
                "nonlinear term of x order {} reaches the linear order {nu}",
                e[0]
            )));
        }
    }
    let forcing = eq.residual(&zero)?;
    if let Some(k) = order_of(&forcing) {
        if k <= nu {
            return Err(SolverError::DegenerateEquation(format!(
                "F(x, 0) has a term of order {k}, not above the linear order {nu}"
            )));
        }
    }
    let divisor = |k: i64| -> Cx {
        let mut d = Cx::zero();
        for (j, a) in partials.iter().enumerate().take(n + 1) {
            let (img, sym) = match &op {
                OperatorKind::Differential => (k, Cx::int(k).powi(j as i64)),
                OperatorKind::QDifference { q, .. } => (k, q.powi(j as i64 * k)),
                OperatorKind::Mahler { ell } => (ell.pow(j as u32) * k, Cx::one()),
            };
            let at = k + nu - img;
            if at < 0 {
                continue;
            }
            let c = a.coeff(&ExponentVec(vec![at]));
            if !c.is_zero() {
                d = d.add(&sym.mul(&c));
            }
        }
        d
    };

    let mut coeffs: Vec<Cx> = vec![Cx::zero(); depth + 1];
    let mut transcript = SolveTranscript::default();
    transcript.notes.push(format!("linear order {nu}"));
    for k in 1..=depth as i64 {
        let row = (k + nu) as u64;
        let mut phi = GSeries::new(sg.clone(), f64::INFINITY, row);
        for (i, c) in coeffs.iter().enumerate().take(k as usize).skip(1) {
            phi.insert(ExponentVec(vec![i as i64]), c.clone());
        }
        let r = eq.residual(&phi)?.coeff(&ExponentVec(vec![row as i64]));
        let d = divisor(k);
        let scale = eq
            .residual_scale(&phi)?
            .get(&ExponentVec(vec![row as i64]))
            .copied()
            .unwrap_or(0.0)
            .max(1.0);
        let (value, status) = if d.is_zero() || d.abs_f64() <= tol {
            if r.is_zero() || r.abs_f64() <= tol * scale {
                transcript.resonances.push(vec![k]);
                transcript.free_parameters.push(vec![k]);
                (Cx::zero(), CoefficientStatus::Free)
            } else {
                return Err(SolverError::ResonanceBlocked { exponent: vec![k], rhs: r.abs_f64() });
            }
        } else {
            (r.neg().div(&d), CoefficientStatus::Determined)
        };
        transcript.entries.push(TranscriptEntry {
            coords: vec![k],
            exponent: CxJson::from(&Cx::int(k)),
            divisor: CxJson::from(&d),
            coupled: false,
            status,
            value: CxJson::from(&value),
        });
        coeffs[k as usize] = value;
    }
    let mut phi = GSeries::new(sg, depth as f64, depth as u64);
    for (i, c) in coeffs.into_iter().enumerate().skip(1) {
        phi.insert(ExponentVec(vec![i as i64]), c);
    }
    Ok((phi, transcript))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gps_core::MultiSeries;

    fn same(a: &Cx, b: &Cx) -> bool {
        a.sub(b).is_zero()
    }

    fn eq(terms: &[(&[u32], Cx)], op: OperatorKind) -> FunctionalEquation {
        let nvars = terms[0].0.len();
        let mut f = MultiSeries::new(nvars, u64::MAX);
        for (e, c) in terms {
            f.add_term(e.to_vec(), c.clone());
        }
        FunctionalEquation::new(f, op).unwrap()
    }

    fn c(s: &GSeries, k: i64) -> Cx {
        s.coeff(&ExponentVec(vec![k]))
    }

    #[test]
    fn euler_factorials_exact() {
        // x*dy - y + x = 0
        let e = eq(
            &[(&[1, 0, 1], Cx::one()), (&[0, 1, 0], Cx::int(-1)), (&[1, 0, 0], Cx::one())],
            OperatorKind::Differential,
        );
        let (phi, tr) = solve_taylor(&e, 13).unwrap();
        let mut fact = 1i64;
        for k in 0..=12 {
            if k > 0 {
                fact *= k;
            }
            let v = c(&phi, k + 1);
            assert!(v.is_exact());
            assert!(same(&v, &Cx::int(fact)), "k = {k}");
        }
        assert!(tr.free_parameters.is_empty());
    }

    #[test]
    fn q_difference_hand_recurrence() {
        // y(3x) - 2y(x) + x = 0: c_1 (3 - 2) = -1, then c_k (3^k - 2) = 0
        let e = eq(
            &[(&[0, 0, 1], Cx::one()), (&[0, 1, 0], Cx::int(-2)), (&[1, 0, 0], Cx::one())],
            OperatorKind::q_difference(Cx::int(3), 192),
        );
        let (phi, tr) = solve_taylor(&e, 6).unwrap();
        assert!(same(&c(&phi, 1), &Cx::int(-1)));
        for k in 2..=6 {
            assert!(c(&phi, k).is_zero());
        }
        assert!(same(&tr.entry(&[2]).unwrap().divisor.to_cx(192).unwrap(), &Cx::int(7)));
    }

    #[test]
    fn mahler_first_coefficient() {
        // y = alpha x + x y(x^2) + y^2 with alpha = 2: c_1 = -alpha after moving
        // everything to one side as y + alpha x + ... = 0
        let e = eq(
            &[(&[0, 1, 0], Cx::one()), (&[1, 0, 0], Cx::int(2)), (&[1, 0, 1], Cx::one()), (&[0, 2, 0], Cx::one())],
            OperatorKind::Mahler { ell: 2 },
        );
        let (phi, _) = solve_taylor(&e, 5).unwrap();
        assert!(same(&c(&phi, 1), &Cx::int(-2)));
        // order 2: c_2 + c_1^2 = 0
        assert!(same(&c(&phi, 2), &Cx::int(-4)));
        // order 3: c_3 + [x^3](x y(x^2)) + 2 c_1 c_2 = c_3 - 2 + 16 = 0
        assert!(same(&c(&phi, 3), &Cx::int(-14)));
    }

    #[test]
    fn resonance_blocks_or_frees() {
        // dy - 2y + x^2 = 0: divisor k - 2 vanishes at k = 2 with rhs 1
        let blocked = eq(
            &[(&[0, 0, 1], Cx::one()), (&[0, 1, 0], Cx::int(-2)), (&[2, 0, 0], Cx::one())],
            OperatorKind::Differential,
        );
        assert!(matches!(
            solve_taylor(&blocked, 4),
            Err(SolverError::ResonanceBlocked { exponent, .. }) if exponent == vec![2]
        ));
        // dy - 2y + x^3 = 0: the resonance at 2 is free
        let free = eq(
            &[(&[0, 0, 1], Cx::one()), (&[0, 1, 0], Cx::int(-2)), (&[3, 0, 0], Cx::one())],
            OperatorKind::Differential,
        );
        let (phi, tr) = solve_taylor(&free, 4).unwrap();
        assert_eq!(tr.free_parameters, vec![vec![2]]);
        assert!(same(&c(&phi, 3), &Cx::int(-1)));
    }

    #[test]
    fn degenerate_forcing_rejected() {
        let e = eq(&[(&[0, 1], Cx::one()), (&[0, 0], Cx::one())], OperatorKind::Differential);
        assert!(matches!(solve_taylor(&e, 3), Err(SolverError::DegenerateEquation(_))));
    }
}
