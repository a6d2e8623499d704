//! Equation files: directives, parameters and lowering to solver input.
//!
//! A file holds `#` comments, directives and at most one equation line:
//!
//! ```text
//! @param q = exp(2*pi*i*omega)   parameter; later lines may use it
//! @prefix 1+i : 1/2               known leading term: exponent : coefficient
//! @schroeder 2*x + x^2            conjugacy problem y(qx) = f(y(x))
//! @boettcher x^2 + x^3            conjugacy problem y(x^l) = g(y(x))
//! sigma(y) - y = 0
//! ```
//!
//! A parameter defined as `exp(z)` remembers z as its logarithm, so `q^w`
//! means exp(w z) rather than a principal power.

use std::collections::BTreeMap;

use gpseries::convergence_analyzer::fast_growth_number;
use gpseries::equation_model::{EquationError, FunctionalEquation};
use gpseries::gps_core::{MultiSeries, OperatorKind};
use gpseries::Cx;
use thiserror::Error;

use crate::dsl::{parse_equation_at, parse_expr_at, Equation, Expr, Func, OpName, ParseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("operators {0} and {1} mixed in one equation")]
    MixedOperators(&'static str, &'static str),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("not polynomial in x and the operator images of y: {0}")]
    NotPolynomial(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("line {line}: {msg}")]
    Directive { line: usize, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Equation(#[from] EquationError),
}

type Result<T> = std::result::Result<T, SourceError>;

/// A constant with an optional chosen logarithm.
#[derive(Clone, Debug)]
pub struct Value {
    pub value: Cx,
    pub log: Option<Cx>,
}

impl Value {
    fn plain(value: Cx) -> Self {
        Value { value, log: None }
    }
}

/// Parameters in definition order, evaluated at a fixed precision.
#[derive(Clone, Debug)]
pub struct Env {
    pub prec: usize,
    pub values: BTreeMap<String, Value>,
}

impl Env {
    pub fn new(prec: usize) -> Self {
        Env { prec, values: BTreeMap::new() }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    /// Evaluates an expression that must not mention x or y.
    pub fn constant(&self, e: &Expr) -> Result<Value> {
        match lower(e, self, &Slots::none())? {
            Lowered::Const(v) => Ok(v),
            Lowered::Poly(_) => Err(SourceError::NotPolynomial("x or y in a constant".into())),
        }
    }

    pub fn constant_str(&self, text: &str) -> Result<Cx> {
        Ok(self.constant(&parse_expr_at(text, 1, 1)?)?.value)
    }

    fn named(&self, name: &str) -> Result<Value> {
        if let Some(v) = self.values.get(name) {
            return Ok(v.clone());
        }
        let p = self.prec;
        let v = match name {
            "i" => Cx::i(),
            "pi" => Cx::pi(p),
            "e" => return Ok(Value { value: Cx::e(p), log: Some(Cx::one()) }),
            "sqrt2" => Cx::int(2).sqrt(p),
            "golden" => Cx::golden(p),
            "liouville" => liouville(p),
            "fast_growth" => fast_growth_number(3, p),
            _ => return Err(SourceError::UnknownName(name.into())),
        };
        Ok(Value::plain(v))
    }
}

/// sum_k 10^(-k!) over the terms visible at `p` bits.
fn liouville(p: usize) -> Cx {
    let digits = p as u64 * 30103 / 100_000 + 10;
    let (mut s, mut f) = (Cx::zero(), 1u64);
    for k in 1.. {
        f *= k;
        if f > digits {
            break;
        }
        s = s.add(&Cx::int(10).powi(f as i64).recip());
    }
    s.to_float(p)
}

/// Which lowered variables exist: x, then y_0..y_n.
struct Slots {
    order: Option<usize>,
}

impl Slots {
    fn none() -> Self {
        Slots { order: None }
    }

    fn nvars(&self) -> usize {
        self.order.map(|n| n + 2).unwrap_or(1)
    }

    fn var(&self, slot: usize, what: &str) -> Result<MultiSeries> {
        let nv = self.nvars();
        if self.order.is_none() && slot > 0 || slot >= nv {
            return Err(SourceError::NotPolynomial(format!("{what} is not allowed here")));
        }
        let mut m = MultiSeries::new(nv, u64::MAX);
        let mut e = vec![0; nv];
        e[slot] = 1;
        m.add_term(e, Cx::one());
        Ok(m)
    }
}

enum Lowered {
    Const(Value),
    Poly(MultiSeries),
}

impl Lowered {
    fn poly(self, nv: usize) -> MultiSeries {
        match self {
            Lowered::Poly(m) => m,
            Lowered::Const(v) => {
                let mut m = MultiSeries::new(nv, u64::MAX);
                m.add_term(vec![0; nv], v.value);
                m
            }
        }
    }
}

fn literal(s: &str) -> Result<Cx> {
    Cx::parse_real(s).ok_or_else(|| SourceError::Invalid(format!("bad number `{s}`")))
}

/// Power of the y slot an operator application refers to.
fn apply_slot(arg: &Expr, op: OpName, power: u32) -> Result<usize> {
    match arg {
        Expr::Y => Ok(power as usize),
        Expr::Apply { op: o, power: k, arg } if *o == op => apply_slot(arg, op, power + k),
        _ => Err(SourceError::NotPolynomial(format!("{} applied to something other than y", op.keyword()))),
    }
}

fn lower(e: &Expr, env: &Env, slots: &Slots) -> Result<Lowered> {
    let p = env.prec;
    let nv = slots.nvars();
    let bin = |a: &Expr, b: &Expr| -> Result<(Lowered, Lowered)> { Ok((lower(a, env, slots)?, lower(b, env, slots)?)) };
    Ok(match e {
        Expr::Num(s) => Lowered::Const(Value::plain(literal(s)?)),
        Expr::Imag(s) => Lowered::Const(Value::plain(literal(s)?.mul(&Cx::i()))),
        Expr::Name(n) => Lowered::Const(env.named(n)?),
        Expr::X => Lowered::Poly(slots.var(0, "x")?),
        Expr::Y => Lowered::Poly(slots.var(1, "y")?),
        Expr::Apply { op, power, arg } => Lowered::Poly(slots.var(1 + apply_slot(arg, *op, *power)?, op.keyword())?),
        Expr::Call { func, arg } => {
            let Lowered::Const(v) = lower(arg, env, slots)? else {
                return Err(SourceError::NotPolynomial(format!("{} of a non-constant", func.keyword())));
            };
            let z = v.value;
            Lowered::Const(match func {
                Func::Exp => Value { value: z.exp(p), log: Some(z) },
                Func::Sqrt => Value::plain(z.sqrt(p)),
                Func::Ln => Value::plain(v.log.unwrap_or_else(|| z.ln(p))),
                Func::Cos => Value::plain(z.cos(p)),
                Func::Sin => Value::plain(z.sin(p)),
            })
        }
        Expr::Neg(a) => match lower(a, env, slots)? {
            Lowered::Const(v) => Lowered::Const(Value { value: v.value.neg(), log: None }),
            Lowered::Poly(m) => Lowered::Poly(m.scale(&Cx::int(-1))),
        },
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let sub = matches!(e, Expr::Sub(..));
            match bin(a, b)? {
                (Lowered::Const(x), Lowered::Const(y)) => {
                    Lowered::Const(Value::plain(if sub { x.value.sub(&y.value) } else { x.value.add(&y.value) }))
                }
                (x, y) => {
                    let y = y.poly(nv);
                    let y = if sub { y.scale(&Cx::int(-1)) } else { y };
                    Lowered::Poly(x.poly(nv).add(&y))
                }
            }
        }
        Expr::Mul(a, b) => match bin(a, b)? {
            (Lowered::Const(x), Lowered::Const(y)) => {
                let log = match (x.log, y.log) {
                    (Some(l1), Some(l2)) => Some(l1.add(&l2)),
                    _ => None,
                };
                Lowered::Const(Value { value: x.value.mul(&y.value), log })
            }
            (Lowered::Const(c), Lowered::Poly(m)) | (Lowered::Poly(m), Lowered::Const(c)) => {
                Lowered::Poly(m.scale(&c.value))
            }
            (Lowered::Poly(m), Lowered::Poly(n)) => Lowered::Poly(m.mul(&n)),
        },
        Expr::Div(a, b) => match bin(a, b)? {
            (_, Lowered::Const(d)) if d.value.is_zero() => return Err(SourceError::Invalid("division by zero".into())),
            (Lowered::Const(x), Lowered::Const(y)) => {
                let log = match (x.log, y.log) {
                    (Some(l1), Some(l2)) => Some(l1.sub(&l2)),
                    _ => None,
                };
                Lowered::Const(Value { value: x.value.div(&y.value), log })
            }
            (Lowered::Poly(m), Lowered::Const(d)) => Lowered::Poly(m.scale(&d.value.recip())),
            _ => return Err(SourceError::NotPolynomial("division by a non-constant".into())),
        },
        Expr::Pow(a, b) => {
            let Lowered::Const(w) = lower(b, env, slots)? else {
                return Err(SourceError::NotPolynomial("non-constant exponent".into()));
            };
            let w = w.value;
            match lower(a, env, slots)? {
                Lowered::Const(base) => {
                    let value = match (&base.log, w.as_small_int()) {
                        (_, Some(k)) if base.value.is_exact() || k.abs() <= 64 => base.value.powi(k),
                        (Some(l), _) => w.mul(l).exp(p),
                        (None, _) => base.value.pow(&w, p),
                    };
                    let log = base.log.as_ref().map(|l| w.mul(l));
                    Lowered::Const(Value { value, log })
                }
                Lowered::Poly(m) => {
                    let k = w
                        .as_small_int()
                        .filter(|k| (0..=64).contains(k))
                        .ok_or_else(|| SourceError::NotPolynomial("power of x or y must be an integer 0..=64".into()))?;
                    let mut out = Lowered::Const(Value::plain(Cx::one())).poly(nv);
                    for _ in 0..k {
                        out = out.mul(&m);
                    }
                    Lowered::Poly(out)
                }
            }
        }
    })
}

/// The operator an equation uses and its highest power.
pub fn operator_of(eq: &Equation) -> Result<(OpName, usize)> {
    let mut apps = eq.lhs.applications();
    apps.extend(eq.rhs.applications());
    let Some(&(first, _)) = apps.first() else {
        return Err(SourceError::Invalid("the equation applies no operator to y".into()));
    };
    if let Some(&(other, _)) = apps.iter().find(|(o, _)| *o != first) {
        return Err(SourceError::MixedOperators(first.keyword(), other.keyword()));
    }
    // nested applications add their powers; bound by the total
    let order = apps.iter().map(|&(_, k)| k as usize).sum::<usize>().max(1);
    Ok((first, order))
}

/// F(x, y_0, .., y_n) = lhs - rhs with trailing unused slots dropped.
pub fn lower_equation(eq: &Equation, env: &Env) -> Result<FunctionalEquation> {
    let (op, bound) = operator_of(eq)?;
    let slots = Slots { order: Some(bound) };
    let nv = slots.nvars();
    let f = lower(&eq.lhs, env, &slots)?.poly(nv).add(&lower(&eq.rhs, env, &slots)?.poly(nv).scale(&Cx::int(-1)));
    let used = f.iter().flat_map(|(e, _)| (1..nv).filter(move |&j| e[j] > 0)).max().unwrap_or(1);
    let nv_used = used.max(2) + 1;
    let mut trimmed = MultiSeries::new(nv_used, u64::MAX);
    for (e, c) in f.iter() {
        trimmed.add_term(e[..nv_used].to_vec(), c.clone());
    }
    let kind = match op {
        OpName::Delta => OperatorKind::Differential,
        OpName::Sigma => {
            let q = env.get("q").ok_or_else(|| SourceError::MissingParam("q".into()))?;
            match &q.log {
                Some(l) => OperatorKind::QDifference { q: q.value.clone(), log_q: l.clone() },
                None => OperatorKind::q_difference(q.value.clone(), env.prec),
            }
        }
        OpName::Mu => {
            let ell = env.get("ell").ok_or_else(|| SourceError::MissingParam("ell".into()))?;
            match ell.value.as_small_int() {
                Some(l) if l >= 2 => OperatorKind::Mahler { ell: l },
                _ => return Err(SourceError::Invalid("ell must be an integer >= 2".into())),
            }
        }
    };
    Ok(FunctionalEquation::new(trimmed, kind)?)
}

/// Taylor coefficients f_0..f_d of a polynomial in x.
pub fn lower_map(e: &Expr, env: &Env) -> Result<Vec<Cx>> {
    let m = lower(e, env, &Slots { order: Some(0) })?.poly(2);
    let mut out = vec![];
    for (k, c) in m.iter() {
        if k[1] != 0 {
            return Err(SourceError::NotPolynomial("the map may only involve x".into()));
        }
        let d = k[0] as usize;
        if out.len() <= d {
            out.resize(d + 1, Cx::zero());
        }
        out[d] = c.clone();
    }
    Ok(out)
}

/// What a file asks to solve.
#[derive(Clone, Debug)]
pub enum Problem {
    Equation { eq: FunctionalEquation, prefix: Vec<(Cx, Cx)> },
    Schroeder { f: Vec<Cx> },
    Boettcher { g: Vec<Cx>, ell: usize },
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Equation { .. } => "equation",
            Problem::Schroeder { .. } => "schroeder",
            Problem::Boettcher { .. } => "boettcher",
        }
    }
}

/// File text plus parameter overrides (`NAME=VALUE` from the command line).
#[derive(Clone, Debug, Default)]
pub struct EquationSource {
    pub text: String,
    pub params: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct Loaded {
    pub problem: Problem,
    pub equation: Option<Equation>,
    pub env: Env,
}

impl EquationSource {
    pub fn new(text: impl Into<String>) -> Self {
        EquationSource { text: text.into(), params: vec![] }
    }

    pub fn with_param(mut self, name: &str, value: &str) -> Self {
        self.params.push((name.into(), value.into()));
        self
    }

    pub fn load(&self, prec: usize) -> Result<Loaded> {
        let mut env = Env::new(prec);
        let overrides: BTreeMap<&str, &str> = self.params.iter().map(|(n, v)| (n.as_str(), v.as_str())).collect();
        let defined: Vec<&str> = self
            .text
            .lines()
            .filter_map(|l| l.trim().strip_prefix("@param"))
            .filter_map(|r| r.split('=').next())
            .map(str::trim)
            .collect();
        for (name, value) in &self.params {
            if !defined.contains(&name.as_str()) {
                let e = parse_expr_at(value, 0, 1)?;
                let v = env.constant(&e)?;
                env.values.insert(name.clone(), v);
            }
        }
        let mut prefix_lines = vec![];
        let mut map: Option<(&str, Expr)> = None;
        let mut equation = None;
        for (idx, raw) in self.text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("");
            let trimmed = body.trim_start();
            let col = body.len() - trimmed.len() + 1;
            let trimmed = trimmed.trim_end();
            if trimmed.is_empty() {
                continue;
            }
            let dir_err = |msg: &str| SourceError::Directive { line, msg: msg.into() };
            if let Some(rest) = trimmed.strip_prefix('@') {
                let (word, arg) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                let arg_col = col + 1 + word.len() + (arg.len() - arg.trim_start().len()) + 1;
                let arg = arg.trim_start();
                match word {
                    "param" => {
                        let (name, value) = arg.split_once('=').ok_or_else(|| dir_err("expected `@param NAME = VALUE`"))?;
                        let name = name.trim();
                        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                            return Err(dir_err("bad parameter name"));
                        }
                        let e = match overrides.get(name) {
                            Some(v) => parse_expr_at(v, 0, 1)?,
                            None => parse_expr_at(value, line, arg_col + name.len() + 1)?,
                        };
                        let v = env.constant(&e)?;
                        env.values.insert(name.into(), v);
                    }
                    "prefix" => {
                        let (a, b) = arg.split_once(':').ok_or_else(|| dir_err("expected `@prefix EXPONENT : COEFFICIENT`"))?;
                        let lam = env.constant(&parse_expr_at(a, line, arg_col)?)?.value;
                        let c = env.constant(&parse_expr_at(b, line, arg_col + a.len() + 1)?)?.value;
                        prefix_lines.push((lam, c));
                    }
                    "schroeder" | "boettcher" => {
                        let word = if word == "schroeder" { "schroeder" } else { "boettcher" };
                        map = Some((word, parse_expr_at(arg, line, arg_col)?));
                    }
                    _ => return Err(dir_err(&format!("unknown directive @{word}"))),
                }
                continue;
            }
            if equation.is_some() {
                return Err(dir_err("more than one equation"));
            }
            equation = Some(parse_equation_at(trimmed, line, col)?);
        }
        let problem = match (map, &equation) {
            (Some(_), Some(_)) => return Err(SourceError::Invalid("a file holds either a map or an equation".into())),
            (None, None) => return Err(SourceError::Invalid("no equation".into())),
            (Some((kind, e)), None) => {
                let coeffs = lower_map(&e, &env)?;
                if coeffs.first().map(|c| !c.is_zero()).unwrap_or(false) {
                    return Err(SourceError::Invalid("the map must fix 0".into()));
                }
                if kind == "schroeder" {
                    Problem::Schroeder { f: coeffs }
                } else {
                    let ell = coeffs.iter().position(|c| !c.is_zero()).unwrap_or(0);
                    if ell < 2 {
                        return Err(SourceError::Invalid("the map must start at degree >= 2".into()));
                    }
                    Problem::Boettcher { g: coeffs, ell }
                }
            }
            (None, Some(eq)) => Problem::Equation { eq: lower_equation(eq, &env)?, prefix: prefix_lines },
        };
        Ok(Loaded { problem, equation, env })
    }
}
