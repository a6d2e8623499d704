//! Equation language: lexer, parser and printer.
//!
//! ```text
//! equation := expr "=" expr
//! expr     := term (("+" | "-") term)*
//! term     := unary (("*" | "/") unary)*
//! unary    := "-" unary | factor
//! factor   := base ("^" exponent)?
//! base     := "x" | "y" | op ("^" integer)? "(" expr ")" | func "(" expr ")"
//!           | number | number "i" | name | "(" expr ")"
//! exponent := integer | name | "(" expr ")"
//! ```
//!
//! `op` is one of delta, sigma, mu; `func` one of sqrt, exp, ln, cos, sin.

use std::fmt::Write;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpName {
    Delta,
    Sigma,
    Mu,
}

impl OpName {
    pub fn keyword(self) -> &'static str {
        match self {
            OpName::Delta => "delta",
            OpName::Sigma => "sigma",
            OpName::Mu => "mu",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "delta" => Some(OpName::Delta),
            "sigma" => Some(OpName::Sigma),
            "mu" => Some(OpName::Mu),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Cos,
    Sin,
}

impl Func {
    pub fn keyword(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Cos => "cos",
            Func::Sin => "sin",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "sqrt" => Some(Func::Sqrt),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "cos" => Some(Func::Cos),
            "sin" => Some(Func::Sin),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Unsigned decimal literal, kept as written.
    Num(String),
    /// Literal `<num>i`.
    Imag(String),
    X,
    Y,
    Name(String),
    Apply { op: OpName, power: u32, arg: Box<Expr> },
    Call { func: Func, arg: Box<Expr> },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equation {
    pub lhs: Expr,
    pub rhs: Expr,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown operator `{name}`")]
    UnknownOperator { line: usize, col: usize, name: String },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Imag(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eq,
    End,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str, line: usize, col0: usize) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = vec![];
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, line, col });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            if !text.chars().any(|c| c.is_ascii_digit()) {
                return Err(ParseError::Syntax { line, col, msg: "malformed number".into() });
            }
            let ident_char = |k: usize| k < chars.len() && (chars[k].is_alphanumeric() || chars[k] == '_');
            if i < chars.len() && chars[i] == 'i' && !ident_char(i + 1) {
                i += 1;
                out.push(Spanned { tok: Tok::Imag(text), line, col });
            } else if ident_char(i) {
                return Err(ParseError::Syntax { line, col: col0 + i, msg: "identifier directly after a number".into() });
            } else {
                out.push(Spanned { tok: Tok::Num(text), line, col });
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), line, col });
            continue;
        }
        return Err(ParseError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
    }
    out.push(Spanned { tok: Tok::End, line, col: col0 + chars.len() });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.toks[self.pos];
        Err(ParseError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    e = Expr::Add(Box::new(e), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    e = Expr::Sub(Box::new(e), Box::new(self.term()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.next();
                    e = Expr::Mul(Box::new(e), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.next();
                    e = Expr::Div(Box::new(e), Box::new(self.unary()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let exp = match self.peek().clone() {
            Tok::Num(s) => {
                self.next();
                Expr::Num(s)
            }
            Tok::Ident(n) if !matches!(n.as_str(), "x" | "y") && OpName::from_keyword(&n).is_none() && Func::from_keyword(&n).is_none() => {
                self.next();
                Expr::Name(n)
            }
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                e
            }
            _ => return self.err("exponent must be an integer, a name or a parenthesized expression"),
        };
        Ok(Expr::Pow(Box::new(base), Box::new(exp)))
    }

    fn parenthesized(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let e = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(e)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Num(s) => Ok(Expr::Num(s)),
            Tok::Imag(s) => Ok(Expr::Imag(s)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(op) = OpName::from_keyword(&name) {
                    let mut power = 1;
                    if *self.peek() == Tok::Caret {
                        self.next();
                        match self.next().tok {
                            Tok::Num(s) => match s.parse::<u32>() {
                                Ok(k) => power = k,
                                Err(_) => return Err(ParseError::Syntax { line: t.line, col: t.col, msg: format!("bad operator power `{s}`") }),
                            },
                            _ => return Err(ParseError::Syntax { line: t.line, col: t.col, msg: "operator power must be an integer".into() }),
                        }
                    }
                    let arg = self.parenthesized()?;
                    return Ok(Expr::Apply { op, power, arg: Box::new(arg) });
                }
                if let Some(func) = Func::from_keyword(&name) {
                    let arg = self.parenthesized()?;
                    return Ok(Expr::Call { func, arg: Box::new(arg) });
                }
                if *self.peek() == Tok::LParen {
                    return Err(ParseError::UnknownOperator { line: t.line, col: t.col, name });
                }
                Ok(match name.as_str() {
                    "x" => Expr::X,
                    "y" => Expr::Y,
                    _ => Expr::Name(name),
                })
            }
            Tok::End => Err(ParseError::Syntax { line: t.line, col: t.col, msg: "unexpected end of input".into() }),
            other => Err(ParseError::Syntax { line: t.line, col: t.col, msg: format!("unexpected token {other:?}") }),
        }
    }
}

/// Parses `lhs = rhs`; `line` and `col` locate the text in its file (1-based).
pub fn parse_equation_at(src: &str, line: usize, col: usize) -> Result<Equation, ParseError> {
    let mut p = Parser { toks: lex(src, line, col)?, pos: 0 };
    let lhs = p.expr()?;
    p.expect(Tok::Eq, "`=`")?;
    let rhs = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(Equation { lhs, rhs })
}

pub fn parse_equation(src: &str) -> Result<Equation, ParseError> {
    parse_equation_at(src, 1, 1)
}

/// Parses a single expression.
pub fn parse_expr_at(src: &str, line: usize, col: usize) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src, line, col)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(e)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    parse_expr_at(src, 1, 1)
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

fn emit_into(e: &Expr, out: &mut String) {
    let wrap = |e: &Expr, min: u8, out: &mut String| {
        if prec(e) < min {
            out.push('(');
            emit_into(e, out);
            out.push(')');
        } else {
            emit_into(e, out);
        }
    };
    match e {
        Expr::Num(s) => out.push_str(s),
        Expr::Imag(s) => {
            out.push_str(s);
            out.push('i');
        }
        Expr::X => out.push('x'),
        Expr::Y => out.push('y'),
        Expr::Name(n) => out.push_str(n),
        Expr::Apply { op, power, arg } => {
            out.push_str(op.keyword());
            if *power != 1 {
                let _ = write!(out, "^{power}");
            }
            out.push('(');
            emit_into(arg, out);
            out.push(')');
        }
        Expr::Call { func, arg } => {
            out.push_str(func.keyword());
            out.push('(');
            emit_into(arg, out);
            out.push(')');
        }
        Expr::Neg(a) => {
            out.push('-');
            wrap(a, 3, out);
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            wrap(a, 1, out);
            out.push_str(if matches!(e, Expr::Add(..)) { " + " } else { " - " });
            wrap(b, 2, out);
        }
        Expr::Mul(a, b) | Expr::Div(a, b) => {
            wrap(a, 2, out);
            out.push_str(if matches!(e, Expr::Mul(..)) { "*" } else { "/" });
            wrap(b, 3, out);
        }
        Expr::Pow(a, b) => {
            wrap(a, 5, out);
            out.push('^');
            match &**b {
                Expr::Num(s) if s.chars().all(|c| c.is_ascii_digit()) => out.push_str(s),
                Expr::Name(n) => out.push_str(n),
                other => {
                    out.push('(');
                    emit_into(other, out);
                    out.push(')');
                }
            }
        }
    }
}

pub fn emit_expr(e: &Expr) -> String {
    let mut s = String::new();
    emit_into(e, &mut s);
    s
}

pub fn emit_equation(eq: &Equation) -> String {
    format!("{} = {}", emit_expr(&eq.lhs), emit_expr(&eq.rhs))
}

impl Expr {
    /// Every operator application in the tree.
    pub fn applications(&self) -> Vec<(OpName, u32)> {
        let mut out = vec![];
        self.walk(&mut |e| {
            if let Expr::Apply { op, power, .. } = e {
                out.push((*op, *power));
            }
        });
        out
    }

    fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Apply { arg, .. } | Expr::Call { arg, .. } | Expr::Neg(arg) => arg.walk(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn euler_line() {
        let eq = parse_equation("x*delta(y) - y + x = 0").unwrap();
        let want = Expr::Add(
            b(Expr::Sub(b(Expr::Mul(b(Expr::X), b(Expr::Apply { op: OpName::Delta, power: 1, arg: b(Expr::Y) }))), b(Expr::Y))),
            b(Expr::X),
        );
        assert_eq!(eq.lhs, want);
        assert_eq!(eq.rhs, Expr::Num("0".into()));
    }

    #[test]
    fn powers_and_complex_literals() {
        let eq = parse_equation("sigma^2(y) - q^(1+i)*sigma(y) + q^(2*(1+i))*(x^2 + y^2) = 0").unwrap();
        let apps = eq.lhs.applications();
        assert_eq!(apps, vec![(OpName::Sigma, 2), (OpName::Sigma, 1)]);
        let e = parse_expr("0.3+0.2i").unwrap();
        assert_eq!(e, Expr::Add(b(Expr::Num("0.3".into())), b(Expr::Imag("0.2".into()))));
    }

    #[test]
    fn error_positions() {
        match parse_equation("x + * y = 0") {
            Err(ParseError::Syntax { line, col, .. }) => assert_eq!((line, col), (1, 5)),
            other => panic!("{other:?}"),
        }
        match parse_equation_at("tau(y) = x", 3, 1) {
            Err(ParseError::UnknownOperator { line, col, name }) => {
                assert_eq!((line, col, name.as_str()), (3, 1, "tau"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_equation("y + x").is_err());
        assert!(parse_equation("2x = y").is_err());
    }

    #[test]
    fn printer_keeps_structure() {
        for s in ["a - (b - c) = 0", "a/(b*c) = 0", "-(x + y)^2 = 0", "(x^2)^3 = 0", "x^(-2) = y"] {
            let e = parse_equation(s).unwrap();
            assert_eq!(parse_equation(&emit_equation(&e)).unwrap(), e, "{s}");
        }
        assert_eq!(emit_equation(&parse_equation("a-(b-c)=0").unwrap()), "a - (b - c) = 0");
    }

    fn leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            "[0-9]{1,3}(\\.[0-9]{1,2})?".prop_map(Expr::Num),
            "[0-9]{1,2}".prop_map(Expr::Imag),
            Just(Expr::X),
            Just(Expr::Y),
            prop::sample::select(vec!["q", "r", "omega", "i", "pi", "c00"]).prop_map(|s| Expr::Name(s.into())),
        ]
    }

    fn tree() -> impl Strategy<Value = Expr> {
        leaf().prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                (prop::sample::select(vec![OpName::Delta, OpName::Sigma, OpName::Mu]), 1..4u32, inner.clone())
                    .prop_map(|(op, power, a)| Expr::Apply { op, power, arg: Box::new(a) }),
                (prop::sample::select(vec![Func::Sqrt, Func::Exp, Func::Ln]), inner.clone())
                    .prop_map(|(func, a)| Expr::Call { func, arg: Box::new(a) }),
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Pow(Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(lhs in tree(), rhs in tree()) {
            let eq = Equation { lhs, rhs };
            let text = emit_equation(&eq);
            let back = parse_equation(&text).unwrap();
            prop_assert_eq!(&back, &eq, "{}", text);
            prop_assert_eq!(emit_equation(&back), text);
        }
    }
}
