//! Polynomial roots and the lower bound |L(lambda_N + rho)| >= alpha |rho|^j
//! on the closed right half-plane.

use num_complex::Complex64;
use serde::Serialize;

use super::AnalyzerError;
use crate::scalar::Cx;

const SAFETY: f64 = 0.9;

/// Horner evaluation with coefficients from the constant term up.
pub(crate) fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a)
}

fn to_c64(c: &Cx) -> Complex64 {
    let (a, b) = c.to_f64();
    Complex64::new(a, b)
}

/// Roots of sum c_k z^k by Aberth iteration, each polished by Newton steps
/// in the coefficients' own precision when that lowers |p(z)|.
pub fn poly_roots(coeffs: &[Cx]) -> Vec<Cx> {
    let Some(deg) = coeffs.iter().rposition(|c| !c.is_zero()) else {
        return vec![];
    };
    let c: Vec<Complex64> = coeffs[..=deg].iter().map(to_c64).collect();
    let lead = c[deg];
    let monic: Vec<Complex64> = c.iter().map(|a| a / lead).collect();
    let zs = aberth(&monic);
    let p = coeffs.iter().filter_map(Cx::prec).max().unwrap_or(crate::DEFAULT_PREC);
    let hi = &coeffs[..=deg];
    let dhi: Vec<Cx> = hi.iter().enumerate().skip(1).map(|(k, a)| a.scale_int(k as i64)).collect();
    let eval = |v: &[Cx], z: &Cx| v.iter().rev().fold(Cx::zero(), |acc, a| acc.mul(z).add(a));
    zs.into_iter()
        .map(|z| {
            let mut z = Cx::from_f64(z.re, z.im, p);
            let mut r = eval(hi, &z).abs_f64();
            for _ in 0..64 {
                let d = eval(&dhi, &z);
                if d.abs_f64() == 0.0 || r == 0.0 {
                    break;
                }
                let next = z.sub(&eval(hi, &z).div(&d));
                let rn = eval(hi, &next).abs_f64();
                if rn >= r {
                    break;
                }
                z = next;
                r = rn;
            }
            z
        })
        .collect()
}

fn aberth(monic: &[Complex64]) -> Vec<Complex64> {
    let n = monic.len() - 1;
    if n == 0 {
        return vec![];
    }
    let deriv: Vec<Complex64> = monic.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect();
    let radius = 1.0 + monic[..n].iter().map(|a| a.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius * 0.5, 0.4 + std::f64::consts::TAU * k as f64 / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..n {
            let pz = horner(monic, z[k]);
            if pz.norm() == 0.0 {
                continue;
            }
            let ratio = pz / horner(&deriv, z[k]);
            let s: Complex64 = (0..n).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            if w.is_finite() {
                z[k] -= w;
                moved = moved.max(w.norm() / (1.0 + z[k].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// The constant of the half-plane bound together with its two ingredients.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaBound {
    pub alpha: f64,
    /// |A_n| prod |Re r| / |r|: covers |rho| >= 1.
    pub far: f64,
    /// |A_n| prod dist(r, half-disk): covers |rho| <= 1.
    pub near: f64,
    /// Roots of L(lambda_N + .) as (re, im).
    pub shifted_roots: Vec<(f64, f64)>,
}

/// alpha with |L(lambda_N + rho)| >= alpha |rho|^j for Re rho >= 0 and
/// j = 0..deg L, shrunk by a safety factor.
pub fn alpha_bound(l: &[Cx], lambda_n: &Cx) -> Result<AlphaBound, AnalyzerError> {
    let Some(n) = l.iter().rposition(|c| !c.is_zero()) else {
        return Err(AnalyzerError::DegenerateL("L vanishes identically".into()));
    };
    let lead = l[n].abs_f64();
    let shifted: Vec<Complex64> = poly_roots(&l[..=n])
        .iter()
        .map(|r| {
            let (a, b) = r.sub(lambda_n).to_f64();
            Complex64::new(a, b)
        })
        .collect();
    for r in &shifted {
        if r.re >= -1e-12 * (1.0 + r.norm()) {
            return Err(AnalyzerError::RootInHalfPlane { re: r.re, im: r.im });
        }
    }
    let far = lead * shifted.iter().map(|r| r.re.abs() / r.norm()).product::<f64>();
    let near = lead * shifted.iter().map(|r| (r - Complex64::new(0.0, r.im.clamp(-1.0, 1.0))).norm()).product::<f64>();
    Ok(AlphaBound {
        alpha: SAFETY * far.min(near),
        far,
        near,
        shifted_roots: shifted.iter().map(|r| (r.re, r.im)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimum of |L(lambda + rho)| / max(1, |rho|)^n over a polar grid of
    /// the closed right half-plane.
    fn grid_min(l: &[f64], lambda: f64) -> f64 {
        let n = l.len() - 1;
        let c: Vec<Complex64> = l.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        let mut best = f64::INFINITY;
        for ri in 0..=400 {
            let r = 10f64.powf(-3.0 + 7.0 * ri as f64 / 400.0);
            for ti in 0..=400 {
                let t = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * ti as f64 / 400.0;
                let rho = Complex64::from_polar(r, t);
                let v = horner(&c, rho + lambda).norm() / r.max(1.0).powi(n as i32);
                best = best.min(v);
            }
        }
        best
    }

    #[test]
    fn identity_polynomial() {
        let a = alpha_bound(&[Cx::zero(), Cx::one()], &Cx::one()).unwrap();
        assert!((a.alpha - 0.9).abs() < 1e-12);
        assert!(a.alpha <= grid_min(&[0.0, 1.0], 1.0));
    }

    #[test]
    fn root_at_minus_two() {
        // L(z) = z + 2 at lambda_N = 1: shifted root -3
        let a = alpha_bound(&[Cx::int(2), Cx::one()], &Cx::one()).unwrap();
        assert!((a.far - 1.0).abs() < 1e-12);
        assert!((a.near - 3.0).abs() < 1e-12);
        assert!((a.alpha - 0.9).abs() < 1e-12);
        assert!(a.alpha <= grid_min(&[2.0, 1.0], 1.0));
    }

    #[test]
    fn quadratic_against_grid() {
        // (z - 0.3)(z + 1.5) at lambda_N = 1.1
        let l = [Cx::ratio(-45, 100), Cx::ratio(12, 10), Cx::one()];
        let a = alpha_bound(&l, &Cx::ratio(11, 10)).unwrap();
        assert!(a.alpha > 0.0);
        assert!(a.alpha <= grid_min(&[-0.45, 1.2, 1.0], 1.1));
    }

    #[test]
    fn root_in_half_plane() {
        // root at lambda_N + 0.5
        let err = alpha_bound(&[Cx::ratio(-3, 2), Cx::one()], &Cx::one()).unwrap_err();
        assert!(matches!(err, AnalyzerError::RootInHalfPlane { .. }));
    }

    #[test]
    fn roots_of_cubic() {
        // (z - 1)(z - 2i)(z + 3) = z^3 + (2 - 2i) z^2 + (-3 - 4i) z + 6i
        let c = [Cx::gaussian(0, 6), Cx::gaussian(-3, -4), Cx::gaussian(2, -2), Cx::one()];
        let roots = poly_roots(&c);
        for want in [Cx::one(), Cx::gaussian(0, 2), Cx::int(-3)] {
            assert!(roots.iter().any(|r| r.sub(&want).abs_f64() < 1e-40));
        }
    }
}
