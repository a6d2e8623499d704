//! Complex scalars with an exact rational fast path and a high precision
//! binary floating point fallback.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_bigint::{BigInt, Sign as BigSign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Default working precision in bits.
pub const DEFAULT_PREC: usize = 192;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

fn with_cc<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// Magnitude below which a coefficient is treated as zero at precision `p`.
pub fn zero_threshold(p: usize) -> f64 {
    pow2(-(p as i64) + 32)
}

/// Tolerance for equality decisions and resonance detection at precision `p`.
pub fn tolerance(p: usize) -> f64 {
    pow2(-(p as i64) / 2)
}

fn pow2(e: i64) -> f64 {
    let mut r = 1.0f64;
    let mut e = e;
    while e > 1000 {
        r *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        r *= 2f64.powi(-1000);
        e += 1000;
    }
    r * 2f64.powi(e as i32)
}


pub(crate) fn bf_from_bigint(n: &BigInt, p: usize) -> BigFloat {
    let (sign, digits) = n.to_u64_digits();
    let work = p.max(64 * digits.len() + 64);
    let radix = BigFloat::from_u128(1u128 << 64, work);
    let mut acc = BigFloat::from_u64(0, work);
    for d in digits.iter().rev() {
        acc = acc.mul(&radix, work, RM).add(&BigFloat::from_u64(*d, work), work, RM);
    }
    if sign == BigSign::Minus {
        acc = acc.neg();
    }
    let mut out = acc;
    out.set_precision(p, RM).expect("precision");
    out
}

pub(crate) fn bf_from_ratio(r: &BigRational, p: usize) -> BigFloat {
    if r.is_integer() {
        return bf_from_bigint(r.numer(), p);
    }
    let n = bf_from_bigint(r.numer(), p + 64);
    let d = bf_from_bigint(r.denom(), p + 64);
    n.div(&d, p, RM)
}

/// Nearest f64 of a big float.
pub fn bf_to_f64(b: &BigFloat) -> f64 {
    if b.is_zero() {
        return 0.0;
    }
    let Some((words, _, sign, exp, _)) = b.as_raw_parts() else {
        return f64::NAN;
    };
    let n = words.len();
    let top = words[n - 1] as f64;
    let next = if n > 1 { words[n - 2] as f64 } else { 0.0 };
    let frac = (top + next / 18446744073709551616.0) / 18446744073709551616.0;
    let v = frac * pow2(exp as i64);
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

/// Exact value of a big float as a rational.
pub(crate) fn bf_to_ratio(b: &BigFloat) -> BigRational {
    if b.is_zero() {
        return BigRational::zero();
    }
    let Some((words, _, sign, exp, _)) = b.as_raw_parts() else {
        return BigRational::zero();
    };
    let digits: Vec<u32> = words.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect();
    let m = BigInt::from_slice(BigSign::Plus, &digits);
    let shift = exp as i64 - 64 * words.len() as i64;
    let two = BigInt::from(2);
    let mut r = BigRational::from_integer(m);
    if shift >= 0 {
        r *= BigRational::from_integer(num_traits::pow(two, shift as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(two, (-shift) as usize));
    }
    if sign == Sign::Neg {
        -r
    } else {
        r
    }
}

fn bf_pi(p: usize) -> BigFloat {
    with_cc(|cc| cc.pi(p, RM))
}

fn bf_atan2(y: &BigFloat, x: &BigFloat, p: usize) -> BigFloat {
    let w = p + 16;
    if x.is_zero() {
        if y.is_zero() {
            return BigFloat::from_u8(0, p);
        }
        let half = bf_pi(w).div(&BigFloat::from_u8(2, w), w, RM);
        return if y.is_negative() { half.neg() } else { half };
    }
    // reduce to |ratio| <= 1 for accuracy of the series
    let swap = y.abs().cmp(&x.abs()).unwrap_or(0) > 0;
    let base = if swap {
        let t = with_cc(|cc| x.div(y, w, RM).atan(w, RM, cc));
        let half = bf_pi(w).div(&BigFloat::from_u8(2, w), w, RM);
        // atan(y/x) = sign(y/x) pi/2 - atan(x/y)
        let ratio_neg = y.is_negative() != x.is_negative();
        if ratio_neg {
            half.neg().sub(&t, w, RM)
        } else {
            half.sub(&t, w, RM)
        }
    } else {
        with_cc(|cc| y.div(x, w, RM).atan(w, RM, cc))
    };
    let r = if x.is_negative() {
        if y.is_negative() {
            base.sub(&bf_pi(w), w, RM)
        } else {
            base.add(&bf_pi(w), w, RM)
        }
    } else {
        base
    };
    let mut r = r;
    r.set_precision(p, RM).expect("precision");
    r
}

fn bf_ln(x: &BigFloat, p: usize) -> BigFloat {
    with_cc(|cc| x.ln(p, RM, cc))
}

fn bf_exp(x: &BigFloat, p: usize) -> BigFloat {
    with_cc(|cc| x.exp(p, RM, cc))
}

fn bf_sin(x: &BigFloat, p: usize) -> BigFloat {
    with_cc(|cc| x.sin(p, RM, cc))
}

fn bf_cos(x: &BigFloat, p: usize) -> BigFloat {
    with_cc(|cc| x.cos(p, RM, cc))
}

fn bf_to_dec(b: &BigFloat) -> String {
    if b.is_zero() {
        return "0".to_string();
    }
    with_cc(|cc| b.format(Radix::Dec, RM, cc)).unwrap_or_else(|_| "nan".into())
}

fn bf_parse(s: &str, p: usize) -> Option<BigFloat> {
    let v = with_cc(|cc| BigFloat::parse(s, Radix::Dec, p, RM, cc));
    if v.is_nan() {
        None
    } else {
        Some(v)
    }
}

fn ratio_parse(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = match mant.find('.') {
        Some(k) => (&mant[..k], &mant[k + 1..]),
        None => (mant, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}0").parse::<BigInt>().ok()? / BigInt::from(10);
    let scale = exp - frac.len() as i64;
    if scale.unsigned_abs() > 4000 {
        return None;
    }
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(digits);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

/// A complex number. Exact rationals stay exact under field operations;
/// anything touching a float becomes a float at the larger precision.
#[derive(Clone)]
pub enum Cx {
    Exact(BigRational, BigRational),
    Float(BigFloat, BigFloat, usize),
}

impl fmt::Debug for Cx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cx::Exact(a, b) => write!(f, "Exact({a} + {b}i)"),
            Cx::Float(..) => {
                let (a, b) = self.to_f64();
                write!(f, "Float({a:e} + {b:e}i)")
            }
        }
    }
}

impl fmt::Display for Cx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.to_f64();
        if b == 0.0 {
            write!(f, "{a}")
        } else if b < 0.0 {
            write!(f, "{a}-{}i", -b)
        } else {
            write!(f, "{a}+{b}i")
        }
    }
}

impl Default for Cx {
    fn default() -> Self {
        Cx::zero()
    }
}

impl Cx {
    pub fn zero() -> Self {
        Cx::Exact(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        Cx::int(1)
    }

    pub fn int(v: i64) -> Self {
        Cx::Exact(BigRational::from_integer(v.into()), BigRational::zero())
    }

    pub fn i() -> Self {
        Cx::Exact(BigRational::zero(), BigRational::one())
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Cx::Exact(BigRational::new(num.into(), den.into()), BigRational::zero())
    }

    pub fn exact(re: BigRational, im: BigRational) -> Self {
        Cx::Exact(re, im)
    }

    pub fn gaussian(re: i64, im: i64) -> Self {
        Cx::Exact(BigRational::from_integer(re.into()), BigRational::from_integer(im.into()))
    }

    pub fn from_f64(re: f64, im: f64, p: usize) -> Self {
        Cx::Float(BigFloat::from_f64(re, p), BigFloat::from_f64(im, p), p)
    }

    pub fn from_bf(re: BigFloat, im: BigFloat, p: usize) -> Self {
        Cx::Float(re, im, p)
    }

    /// Parses a decimal real number exactly.
    pub fn parse_real(s: &str) -> Option<Self> {
        ratio_parse(s).map(|r| Cx::Exact(r, BigRational::zero()))
    }

    /// Parses a pair of decimal strings at precision `p`.
    pub fn parse_parts(re: &str, im: &str, p: usize) -> Option<Self> {
        Some(Cx::Float(bf_parse(re, p)?, bf_parse(im, p)?, p))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Cx::Exact(..))
    }

    /// Precision of a float value; exact values report `None`.
    pub fn prec(&self) -> Option<usize> {
        match self {
            Cx::Exact(..) => None,
            Cx::Float(_, _, p) => Some(*p),
        }
    }

    pub fn as_exact(&self) -> Option<(&BigRational, &BigRational)> {
        match self {
            Cx::Exact(a, b) => Some((a, b)),
            Cx::Float(..) => None,
        }
    }

    /// Float parts at precision `p`.
    pub fn parts(&self, p: usize) -> (BigFloat, BigFloat) {
        match self {
            Cx::Exact(a, b) => (bf_from_ratio(a, p), bf_from_ratio(b, p)),
            Cx::Float(a, b, q) => {
                if *q == p {
                    (a.clone(), b.clone())
                } else {
                    let mut a = a.clone();
                    let mut b = b.clone();
                    a.set_precision(p, RM).expect("precision");
                    b.set_precision(p, RM).expect("precision");
                    (a, b)
                }
            }
        }
    }

    /// Converts to a float at precision `p`.
    pub fn to_float(&self, p: usize) -> Self {
        let (a, b) = self.parts(p);
        Cx::Float(a, b, p)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        match self {
            Cx::Exact(a, b) => (ratio_to_f64(a), ratio_to_f64(b)),
            Cx::Float(a, b, _) => (bf_to_f64(a), bf_to_f64(b)),
        }
    }

    pub fn re_f64(&self) -> f64 {
        self.to_f64().0
    }

    pub fn im_f64(&self) -> f64 {
        self.to_f64().1
    }

    pub fn abs_f64(&self) -> f64 {
        let (a, b) = self.to_f64();
        a.hypot(b)
    }

    pub fn re(&self) -> Cx {
        match self {
            Cx::Exact(a, _) => Cx::Exact(a.clone(), BigRational::zero()),
            Cx::Float(a, _, p) => Cx::Float(a.clone(), BigFloat::from_u8(0, *p), *p),
        }
    }

    pub fn im(&self) -> Cx {
        match self {
            Cx::Exact(_, b) => Cx::Exact(b.clone(), BigRational::zero()),
            Cx::Float(_, b, p) => Cx::Float(b.clone(), BigFloat::from_u8(0, *p), *p),
        }
    }

    /// Real part as a big float.
    pub fn re_bf(&self, p: usize) -> BigFloat {
        self.parts(p).0
    }

    pub fn im_bf(&self, p: usize) -> BigFloat {
        self.parts(p).1
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Cx::Exact(a, b) => a.is_zero() && b.is_zero(),
            Cx::Float(a, b, _) => a.is_zero() && b.is_zero(),
        }
    }

    /// True when |self| is below `tol`.
    pub fn is_negligible(&self, tol: f64) -> bool {
        match self {
            Cx::Exact(a, b) => a.is_zero() && b.is_zero(),
            Cx::Float(..) => self.abs_f64() < tol,
        }
    }

    /// True when the imaginary part is exactly zero or below `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        match self {
            Cx::Exact(_, b) => b.is_zero(),
            Cx::Float(_, b, _) => bf_to_f64(b).abs() < tol,
        }
    }

    fn common_prec(&self, o: &Cx) -> usize {
        match (self.prec(), o.prec()) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => DEFAULT_PREC,
        }
    }

    pub fn add(&self, o: &Cx) -> Cx {
        match (self, o) {
            (Cx::Exact(a, b), Cx::Exact(c, d)) => Cx::Exact(a + c, b + d),
            _ => {
                let p = self.common_prec(o);
                let (a, b) = self.parts(p);
                let (c, d) = o.parts(p);
                Cx::Float(a.add(&c, p, RM), b.add(&d, p, RM), p)
            }
        }
    }

    pub fn sub(&self, o: &Cx) -> Cx {
        match (self, o) {
            (Cx::Exact(a, b), Cx::Exact(c, d)) => Cx::Exact(a - c, b - d),
            _ => {
                let p = self.common_prec(o);
                let (a, b) = self.parts(p);
                let (c, d) = o.parts(p);
                Cx::Float(a.sub(&c, p, RM), b.sub(&d, p, RM), p)
            }
        }
    }

    pub fn mul(&self, o: &Cx) -> Cx {
        match (self, o) {
            (Cx::Exact(a, b), Cx::Exact(c, d)) => {
                if b.is_zero() && d.is_zero() {
                    Cx::Exact(a * c, BigRational::zero())
                } else {
                    Cx::Exact(a * c - b * d, a * d + b * c)
                }
            }
            _ => {
                let p = self.common_prec(o);
                let (a, b) = self.parts(p);
                let (c, d) = o.parts(p);
                let w = p + 8;
                let re = a.mul(&c, w, RM).sub(&b.mul(&d, w, RM), p, RM);
                let im = a.mul(&d, w, RM).add(&b.mul(&c, w, RM), p, RM);
                Cx::Float(re, im, p)
            }
        }
    }

    pub fn scale_int(&self, k: i64) -> Cx {
        self.mul(&Cx::int(k))
    }

    /// Division; the caller guarantees a nonzero divisor.
    pub fn div(&self, o: &Cx) -> Cx {
        match (self, o) {
            (Cx::Exact(a, b), Cx::Exact(c, d)) => {
                if d.is_zero() {
                    return Cx::Exact(a / c, b / c);
                }
                let n = c * c + d * d;
                Cx::Exact((a * c + b * d) / &n, (b * c - a * d) / &n)
            }
            _ => {
                let p = self.common_prec(o);
                let (a, b) = self.parts(p);
                let (c, d) = o.parts(p);
                let w = p + 16;
                let n = c.mul(&c, w, RM).add(&d.mul(&d, w, RM), w, RM);
                let re = a.mul(&c, w, RM).add(&b.mul(&d, w, RM), w, RM).div(&n, p, RM);
                let im = b.mul(&c, w, RM).sub(&a.mul(&d, w, RM), w, RM).div(&n, p, RM);
                Cx::Float(re, im, p)
            }
        }
    }

    pub fn neg(&self) -> Cx {
        match self {
            Cx::Exact(a, b) => Cx::Exact(-a, -b),
            Cx::Float(a, b, p) => Cx::Float(a.neg(), b.neg(), *p),
        }
    }

    pub fn conj(&self) -> Cx {
        match self {
            Cx::Exact(a, b) => Cx::Exact(a.clone(), -b),
            Cx::Float(a, b, p) => Cx::Float(a.clone(), b.neg(), *p),
        }
    }

    pub fn recip(&self) -> Cx {
        Cx::one().div(self)
    }

    /// |z|^2, exact when possible.
    pub fn norm_sqr(&self) -> Cx {
        self.mul(&self.conj()).re()
    }

    /// |z| as a real `Cx` at precision `p`.
    pub fn abs(&self, p: usize) -> Cx {
        let (a, b) = self.parts(p);
        let w = p + 8;
        let n = a.mul(&a, w, RM).add(&b.mul(&b, w, RM), w, RM).sqrt(p, RM);
        Cx::Float(n, BigFloat::from_u8(0, p), p)
    }

    /// Integer power by repeated squaring. Negative powers invert.
    pub fn powi(&self, n: i64) -> Cx {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut result = Cx::one();
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn exp(&self, p: usize) -> Cx {
        let w = p + 16;
        let (a, b) = self.parts(w);
        let m = bf_exp(&a, w);
        let re = m.mul(&bf_cos(&b, w), p, RM);
        let im = m.mul(&bf_sin(&b, w), p, RM);
        Cx::Float(re, im, p)
    }

    /// Principal argument in (-pi, pi].
    pub fn arg(&self, p: usize) -> Cx {
        let (a, b) = self.parts(p + 16);
        let mut t = bf_atan2(&b, &a, p + 16);
        t.set_precision(p, RM).expect("precision");
        Cx::Float(t, BigFloat::from_u8(0, p), p)
    }

    /// Principal logarithm, argument in (-pi, pi].
    pub fn ln(&self, p: usize) -> Cx {
        let w = p + 16;
        let (a, b) = self.parts(w);
        let n = a.mul(&a, w, RM).add(&b.mul(&b, w, RM), w, RM);
        let half = BigFloat::from_f64(0.5, w);
        let re = bf_ln(&n, w).mul(&half, p, RM);
        let mut im = bf_atan2(&b, &a, w);
        im.set_precision(p, RM).expect("precision");
        Cx::Float(re, im, p)
    }

    /// Logarithm with the argument in [0, 2pi).
    pub fn ln_upper(&self, p: usize) -> Cx {
        let l = self.ln(p + 8);
        let l = if l.im_f64() < 0.0 {
            l.add(&Cx::i().mul(&Cx::two_pi(p + 8)))
        } else {
            l
        };
        l.to_float(p)
    }

    /// exp(w ln z) for the principal branch.
    pub fn pow(&self, w: &Cx, p: usize) -> Cx {
        if let Some(k) = w.as_small_int() {
            if self.is_exact() || k.abs() <= 64 {
                return self.powi(k);
            }
        }
        if self.is_zero() {
            return Cx::zero();
        }
        w.mul(&self.ln(p + 16)).exp(p)
    }

    /// Principal square root.
    pub fn sqrt(&self, p: usize) -> Cx {
        if let Cx::Exact(a, b) = self {
            if b.is_zero() && !a.is_negative() {
                if let (Some(n), Some(d)) = (isqrt_exact(a.numer()), isqrt_exact(a.denom())) {
                    return Cx::Exact(BigRational::new(n, d), BigRational::zero());
                }
            }
        }
        if self.is_zero() {
            return Cx::zero();
        }
        let w = p + 16;
        let (a, b) = self.parts(w);
        if b.is_zero() {
            return if a.is_negative() {
                Cx::Float(BigFloat::from_u8(0, p), a.neg().sqrt(p, RM), p)
            } else {
                Cx::Float(a.sqrt(p, RM), BigFloat::from_u8(0, p), p)
            };
        }
        let m = a.mul(&a, w, RM).add(&b.mul(&b, w, RM), w, RM).sqrt(w, RM);
        let two = BigFloat::from_u8(2, w);
        let re = m.add(&a, w, RM).div(&two, w, RM).sqrt(w, RM);
        let im_abs = m.sub(&a, w, RM).div(&two, w, RM).sqrt(w, RM);
        let im = if b.is_negative() { im_abs.neg() } else { im_abs };
        Cx::Float(re, im, w).to_float(p)
    }

    pub fn cos(&self, p: usize) -> Cx {
        let iz = Cx::i().mul(self);
        iz.exp(p + 8).add(&iz.neg().exp(p + 8)).div(&Cx::int(2)).to_float(p)
    }

    pub fn sin(&self, p: usize) -> Cx {
        let iz = Cx::i().mul(self);
        iz.exp(p + 8).sub(&iz.neg().exp(p + 8)).div(&Cx::gaussian(0, 2)).to_float(p)
    }

    /// Some(k) when the value is an exact small integer.
    pub fn as_small_int(&self) -> Option<i64> {
        match self {
            Cx::Exact(a, b) if b.is_zero() && a.is_integer() => a.numer().to_i64(),
            _ => None,
        }
    }

    /// Real part as an exact rational (the stored binary value for floats).
    pub fn re_rational(&self) -> BigRational {
        match self {
            Cx::Exact(a, _) => a.clone(),
            Cx::Float(a, _, _) => bf_to_ratio(a),
        }
    }

    /// Some(r) when the value is an exact real rational.
    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Cx::Exact(a, b) if b.is_zero() => Some(a),
            _ => None,
        }
    }

    /// Approximate equality at tolerance `tol` (absolute on the difference).
    pub fn approx_eq(&self, o: &Cx, tol: f64) -> bool {
        self.sub(o).is_negligible(tol)
    }

    /// Compares real parts.
    pub fn cmp_re(&self, o: &Cx) -> Ordering {
        match (self, o) {
            (Cx::Exact(a, _), Cx::Exact(c, _)) => a.cmp(c),
            _ => {
                let d = self.sub(o);
                let (re, _) = d.parts(d.prec().unwrap_or(DEFAULT_PREC));
                if re.is_zero() {
                    Ordering::Equal
                } else if re.is_negative() {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }

    /// Decimal strings for serialization.
    pub fn to_dec(&self) -> (String, String) {
        match self {
            Cx::Exact(a, b) => {
                let p = DEFAULT_PREC;
                (ratio_to_dec(a, p), ratio_to_dec(b, p))
            }
            Cx::Float(a, b, _) => (bf_to_dec(a), bf_to_dec(b)),
        }
    }

    pub fn pi(p: usize) -> Cx {
        Cx::Float(bf_pi(p), BigFloat::from_u8(0, p), p)
    }

    pub fn two_pi(p: usize) -> Cx {
        Cx::pi(p).scale_int(2)
    }

    pub fn e(p: usize) -> Cx {
        Cx::one().exp(p)
    }

    /// (sqrt 5 - 1) / 2.
    pub fn golden(p: usize) -> Cx {
        Cx::int(5).sqrt(p).sub(&Cx::one()).div(&Cx::int(2))
    }

    /// Sum over k = 1..=8 of 10^(-k!), a truncation of the classical
    /// Liouville constant, exact.
    pub fn liouville() -> Cx {
        let mut s = BigRational::zero();
        let mut f: u32 = 1;
        for k in 1..=8u32 {
            f *= k;
            if f > 50_000 {
                break;
            }
            s += BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), f as usize));
        }
        Cx::Exact(s, BigRational::zero())
    }
}

fn isqrt_exact(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    if &(&r * &r) == n {
        Some(r)
    } else {
        None
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() && (v != 0.0 || r.is_zero()) {
            return v;
        }
    }
    bf_to_f64(&bf_from_ratio(r, 64))
}

fn ratio_to_dec(r: &BigRational, p: usize) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    bf_to_dec(&bf_from_ratio(r, p))
}

/// Serialized form of a complex number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CxJson {
    pub re: String,
    pub im: String,
}

impl From<&Cx> for CxJson {
    fn from(c: &Cx) -> Self {
        let (re, im) = c.to_dec();
        CxJson { re, im }
    }
}

impl CxJson {
    pub fn to_cx(&self, p: usize) -> Option<Cx> {
        if let (Some(a), Some(b)) = (ratio_parse(&self.re), ratio_parse(&self.im)) {
            // short decimal strings came from exact values
            if self.re.len() < 40 && self.im.len() < 40 {
                return Some(Cx::Exact(a, b));
            }
        }
        Cx::parse_parts(&self.re, &self.im, p)
    }
}
