use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use gpseries::convergence_analyzer::delta_table;
use gpseries::equation_model::FunctionalEquation;
use gpseries::exponent_lattice::{
    dickson_minimal, express, find_relation, regularize, Certificate, ExponentVec, HalfspaceConstraint, Semigroup,
};
use gpseries::formal_solver::{extend_solution, prepare, reduce_equation, solution_prefix, solve_taylor};
use gpseries::gps_core::{iota, iota_inv, GSeries, MultiSeries, OperatorKind};
use gpseries::{Cx, DEFAULT_PREC};
use proptest::prelude::*;

const P: usize = DEFAULT_PREC;

fn pair_semigroup() -> Arc<Semigroup> {
    let cert = Certificate { certified_bound: 1000, prescaled: false, steps: vec![] };
    Arc::new(Semigroup::certified(vec![Cx::gaussian(1, 1), Cx::gaussian(1, -1)], cert).unwrap())
}

type Terms = Vec<(i64, i64, i64, i64)>;

fn terms() -> impl Strategy<Value = Terms> {
    prop::collection::vec((0..5i64, 0..5i64, -9..10i64, -9..10i64), 0..8)
}

fn exact_series(sg: &Arc<Semigroup>, t: &Terms, deg: u64) -> GSeries {
    let mut s = GSeries::new(sg.clone(), f64::INFINITY, deg);
    for &(a, b, re, im) in t {
        let m = ExponentVec(vec![a, b]);
        let c = s.coeff(&m).add(&Cx::gaussian(re, im));
        s.insert(m, c);
    }
    s
}

fn float_series(sg: &Arc<Semigroup>, t: &[(i64, i64, f64, f64)], deg: u64) -> GSeries {
    let mut s = GSeries::new(sg.clone(), f64::INFINITY, deg);
    for &(a, b, re, im) in t {
        let m = ExponentVec(vec![a, b]);
        let c = s.coeff(&m).add(&Cx::from_f64(re, im, P));
        s.insert(m, c);
    }
    s
}

fn same(a: &GSeries, b: &GSeries) -> bool {
    a.iter().chain(b.iter()).all(|(m, _)| a.coeff(m).sub(&b.coeff(m)).is_zero())
}

fn equation(terms: &[(&[u32], Cx)], op: OperatorKind) -> FunctionalEquation {
    let mut f = MultiSeries::new(terms[0].0.len(), u64::MAX);
    for (e, c) in terms {
        f.add_term(e.to_vec(), c.clone());
    }
    FunctionalEquation::new(f, op).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(a in terms(), b in terms(), c in terms()) {
        let sg = pair_semigroup();
        let (a, b, c) = (exact_series(&sg, &a, 6), exact_series(&sg, &b, 6), exact_series(&sg, &c, 6));
        prop_assert!(same(&a.add(&b).unwrap(), &b.add(&a).unwrap()));
        prop_assert!(same(&a.mul(&b).unwrap(), &b.mul(&a).unwrap()));
        let left = a.mul(&b).unwrap().mul(&c).unwrap();
        let right = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert!(same(&left, &right));
        let dist = a.mul(&b.add(&c).unwrap()).unwrap();
        let expanded = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        prop_assert!(same(&dist, &expanded));
        let one = GSeries::constant(sg.clone(), Cx::one());
        prop_assert!(same(&a.mul(&one).unwrap(), &a));
        prop_assert!(a.sub(&a).unwrap().is_empty());
    }

    #[test]
    fn order_is_total(u in prop::collection::vec((0..20i64, 0..20i64), 3)) {
        let sg = Semigroup::new(vec![Cx::one(), Cx::int(2).sqrt(P)]).unwrap();
        let v: Vec<ExponentVec> = u.iter().map(|&(a, b)| ExponentVec(vec![a, b])).collect();
        for x in &v {
            for y in &v {
                let xy = sg.compare(x, y);
                prop_assert_eq!(xy, sg.compare(y, x).reverse());
                prop_assert_eq!(xy == Ordering::Equal, x == y);
            }
        }
        let mut w = v.clone();
        w.sort_by(|a, b| sg.compare(a, b));
        prop_assert!(w.windows(2).all(|p| sg.value_f64(&p[0]).0 <= sg.value_f64(&p[1]).0 + 1e-12));
    }

    #[test]
    fn dickson_matches_brute_force(
        dim in 1..=3usize,
        w in prop::collection::vec(-5..=5i64, 3),
        off in -10..=10i64,
    ) {
        let c = HalfspaceConstraint::new(w[..dim].iter().map(|&k| Cx::int(k)).collect(), Cx::int(off));
        let got: Vec<Vec<i64>> = dickson_minimal(&c, dim).unwrap().into_iter().map(|v| v.0).collect();
        let mut inside = vec![];
        let side = 13i64;
        for idx in 1..side.pow(dim as u32) {
            let m: Vec<i64> = (0..dim).map(|i| idx / side.pow(i as u32) % side).collect();
            if c.holds(&m) {
                inside.push(m);
            }
        }
        let le = |a: &[i64], b: &[i64]| a.iter().zip(b).all(|(x, y)| x <= y);
        let mut want: Vec<Vec<i64>> =
            inside.iter().filter(|m| !inside.iter().any(|o| o != *m && le(o, m))).cloned().collect();
        let mut got = got;
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn regularize_contains_and_separates(
        raw in prop::collection::vec((1..5i64, 0..3i64, 1..4i64), 1..4),
    ) {
        let s2 = Cx::int(2).sqrt(P);
        let vals: Vec<Cx> = raw.iter().map(|&(a, b, d)| Cx::int(a).add(&s2.scale_int(b)).div(&Cx::int(d))).collect();
        let (sg, coords) = regularize(&vals).unwrap();
        prop_assert!(sg.rank() <= 2);
        prop_assert!(sg.certificate().unwrap().certified_bound >= 1000);
        prop_assert!(find_relation(sg.generators(), 50).is_none());
        for (v, m) in vals.iter().zip(&coords) {
            prop_assert!(m.is_nonneg());
            prop_assert!(sg.value(m).sub(v).abs_f64() < 1e-40);
        }
    }

    #[test]
    fn iota_is_multiplicative(
        a in prop::collection::vec((0..6i64, 0..6i64, -1.0..1.0f64, -1.0..1.0f64), 1..10),
        b in prop::collection::vec((0..6i64, 0..6i64, -1.0..1.0f64, -1.0..1.0f64), 1..10),
    ) {
        let sg = pair_semigroup();
        let (a, b) = (float_series(&sg, &a, 8), float_series(&sg, &b, 8));
        let lhs = iota(&a.mul(&b).unwrap()).unwrap();
        let rhs = iota(&a).unwrap().mul(&iota(&b).unwrap());
        let tol = 2f64.powi(-96);
        for (e, c) in lhs.iter().chain(rhs.iter()) {
            prop_assert!(lhs.coeff(e).sub(&rhs.coeff(e)).abs_f64() <= tol * (1.0 + c.abs_f64()));
        }
        let back = iota_inv(&iota(&a).unwrap(), sg.clone()).unwrap();
        prop_assert!(same(&back, &a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn taylor_prefix_is_stable(b in 1.1..1.9f64, a in -2.0..2.0f64, d in 4..8usize) {
        // delta y - b y - x - a y^2 = 0
        let eq = equation(
            &[
                (&[0, 0, 1], Cx::one()),
                (&[0, 1, 0], Cx::from_f64(-b, 0.0, P)),
                (&[1, 0, 0], Cx::int(-1)),
                (&[0, 2, 0], Cx::from_f64(-a, 0.0, P)),
            ],
            OperatorKind::Differential,
        );
        let (short, _) = solve_taylor(&eq, d).unwrap();
        let (long, _) = solve_taylor(&eq, d + 2).unwrap();
        for (m, c) in short.iter() {
            prop_assert!(long.coeff(m).sub(c).abs_f64() <= 1e-40 * (1.0 + c.abs_f64()));
        }
        // the residual starts beyond the solved frontier
        let res = eq.residual(&long.truncate(long.trunc_re(), u64::MAX)).unwrap();
        let frontier = long.trunc_re();
        for (m, c) in res.iter() {
            let re = res.semigroup().value_f64(m).0;
            prop_assert!(re > frontier + 0.5 || c.abs_f64() < 1e-40, "{:?} {}", m, c.abs_f64());
        }
    }

    #[test]
    fn delta_mu_is_monotone(re in 0.15..0.45f64, im in 0.05..0.3f64) {
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
        let red = prepare(&eq, &[(Cx::from_f64(re, im, P), Cx::one())]).unwrap();
        // deep enough for x^(2 - r) to lie inside the solved region
        let (phi, _) = extend_solution(&red, 14, &BTreeMap::new()).unwrap();
        let red = reduce_equation(&eq, &solution_prefix(&phi, 8), 1).unwrap();
        let t = delta_table(&red, 1.0, 6).unwrap();
        prop_assert!(t.mu_monotone);
        prop_assert!(t.bound_holds);
        for e in &t.entries {
            for f in &t.entries {
                let le = f.m.iter().zip(&e.m).all(|(x, y)| x <= y);
                if le && f.m != e.m {
                    if let (Some(a), Some(b)) = (f.mu, e.mu) {
                        prop_assert!(a <= b * (1.0 + 1e-12));
                    }
                }
            }
        }
    }
}

#[test]
fn regularize_named_sets() {
    let s2 = Cx::int(2).sqrt(P);
    for vals in [vec![Cx::one(), s2.clone(), Cx::int(2).sub(&s2)], vec![Cx::int(2), Cx::int(3)]] {
        let (sg, coords) = regularize(&vals).unwrap();
        assert!(sg.certificate().unwrap().certified_bound >= 1000);
        for (v, m) in vals.iter().zip(&coords) {
            assert!(sg.value(m).sub(v).abs_f64() < 1e-40);
            assert_eq!(express(&sg, v, 64).unwrap(), *m);
        }
    }
}
