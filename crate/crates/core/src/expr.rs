//! Arithmetic expression language for embedding maps.
//!
//! Grammar (precedence climbing, `^` right-associative and binding tighter
//! than unary minus):
//!
//! ```text
//! expr    := expr ('+' | '-') expr | expr ('*' | '/') expr
//!          | '-' expr | expr '^' expr | primary
//! primary := number | 'pi' | 'e' | 'u1' .. 'un'
//!          | func '(' expr ')' | 'pow' '(' expr ',' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'sinh' | 'cosh' | 'exp'
//! ```

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        }
    }

    /// (left, right) binding powers.
    fn binding(self) -> (u8, u8) {
        match self {
            BinOp::Add | BinOp::Sub => (1, 2),
            BinOp::Mul | BinOp::Div => (3, 4),
            BinOp::Pow => (8, 7),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Exp,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Sinh, Func::Cosh, Func::Exp];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Exp => x.exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    /// Zero-based variable index; `u1` is `Var(0)`.
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Const(Constant::Pi) => std::f64::consts::PI,
            Expr::Const(Constant::E) => std::f64::consts::E,
            Expr::Var(i) => u[*i],
            Expr::Neg(a) => -a.eval(u),
            Expr::Bin(op, a, b) => op.apply(a.eval(u), b.eval(u)),
            Expr::Call(f, a) => f.apply(a.eval(u)),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Bin(_, a, b) => a.max_var().max(b.max_var()),
        }
    }
}

/// Fully parenthesized; re-parses to an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Const(Constant::Pi) => write!(f, "pi"),
            Expr::Const(Constant::E) => write!(f, "e"),
            Expr::Var(i) => write!(f, "u{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn err(column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line: 1,
        column,
        message: message.into(),
    }
}

impl Lexer {
    fn new(src: &str) -> Result<Self> {
        let chars: Vec<char> = src.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let ch = chars[i];
            let col = i + 1;
            if ch.is_whitespace() {
                i += 1;
            } else if ch.is_ascii_digit() || ch == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| err(col, format!("invalid number '{text}'")))?;
                toks.push((Tok::Num(v), col));
            } else if ch.is_ascii_alphabetic() || ch == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            } else {
                let t = match ch {
                    '+' | '-' | '*' | '/' | '^' => Tok::Op(ch),
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => return Err(err(col, format!("unexpected character '{ch}'"))),
                };
                toks.push((t, col));
                i += 1;
            }
        }
        toks.push((Tok::End, chars.len() + 1));
        Ok(Self { toks })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    nvars: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let (t, col) = self.next();
        if t == want {
            Ok(())
        } else {
            Err(err(col, format!("expected {what}")))
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = self.prefix()?;
        loop {
            let op = match self.peek().0 {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                Tok::Op('^') => BinOp::Pow,
                _ => break,
            };
            let (l, r) = op.binding();
            if l < min_bp {
                break;
            }
            self.next();
            let rhs = self.expr(r)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr> {
        if self.peek().0 == Tok::Op('-') {
            self.next();
            // unary minus binds looser than '^' and tighter than '*'
            let operand = self.expr(5)?;
            return Ok(Expr::Neg(Box::new(operand)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let (t, col) = self.next();
        match t {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr(0)?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, col),
            Tok::End => Err(err(col, "unexpected end of expression")),
            _ => Err(err(col, "expected a number, variable, function or '('")),
        }
    }

    fn ident(&mut self, name: String, col: usize) -> Result<Expr> {
        if name == "pi" {
            return Ok(Expr::Const(Constant::Pi));
        }
        if name == "e" {
            return Ok(Expr::Const(Constant::E));
        }
        if let Some(idx) = name.strip_prefix('u').and_then(|s| s.parse::<usize>().ok()) {
            if idx == 0 || idx > self.nvars {
                return Err(err(
                    col,
                    format!("variable '{name}' out of range u1..u{}", self.nvars),
                ));
            }
            return Ok(Expr::Var(idx - 1));
        }
        if name == "pow" {
            self.expect(Tok::LParen, "'(' after pow")?;
            let a = self.expr(0)?;
            self.expect(Tok::Comma, "',' in pow")?;
            let b = self.expr(0)?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b)));
        }
        if let Some(func) = Func::from_name(&name) {
            self.expect(Tok::LParen, &format!("'(' after {name}"))?;
            let a = self.expr(0)?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(Expr::Call(func, Box::new(a)));
        }
        Err(err(col, format!("unknown identifier '{name}'")))
    }
}

/// Parse an expression over `u1..u{nvars}`. Columns in errors are 1-based.
pub fn parse_expression(src: &str, nvars: usize) -> Result<Expr> {
    let lexer = Lexer::new(src)?;
    let mut p = Parser {
        toks: lexer.toks,
        pos: 0,
        nvars,
    };
    let e = p.expr(0)?;
    let (t, col) = p.peek().clone();
    if t != Tok::End {
        return Err(err(col, "unexpected trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, PI};

    fn ev(s: &str, u: &[f64]) -> f64 {
        parse_expression(s, u.len().max(1)).unwrap().eval(u)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[]), -4.0);
        assert_eq!(ev("2 * -3", &[]), -6.0);
        assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
        assert_eq!(ev("pow(2, 10)", &[]), 1024.0);
        assert_eq!(ev("1.5e2 + u2", &[0.0, 1.0]), 151.0);
    }

    #[test]
    fn unbalanced_parenthesis_reports_column() {
        match parse_expression("cos(u1", 1) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(parse_expression("tan(u1)", 1).is_err());
        assert!(parse_expression("u2", 1).is_err());
        assert!(parse_expression("u0", 1).is_err());
        assert!(parse_expression("1 +", 1).is_err());
        assert!(parse_expression("1 2", 1).is_err());
    }

    // ten hand-checked values per primitive
    #[test]
    fn primitive_table() {
        let half_ln3 = 0.5 * 3f64.ln();
        let table: [(&str, [(f64, f64); 10]); 5] = [
            (
                "sin(u1)",
                [
                    (0.0, 0.0),
                    (PI / 6.0, 0.5),
                    (PI / 4.0, 0.5f64.sqrt()),
                    (PI / 3.0, 3f64.sqrt() / 2.0),
                    (PI / 2.0, 1.0),
                    (-PI / 2.0, -1.0),
                    (5.0 * PI / 6.0, 0.5),
                    (-PI / 6.0, -0.5),
                    (3.0 * PI / 2.0, -1.0),
                    (7.0 * PI / 6.0, -0.5),
                ],
            ),
            (
                "cos(u1)",
                [
                    (0.0, 1.0),
                    (PI / 3.0, 0.5),
                    (PI / 4.0, 0.5f64.sqrt()),
                    (PI / 6.0, 3f64.sqrt() / 2.0),
                    (PI, -1.0),
                    (2.0 * PI / 3.0, -0.5),
                    (-PI / 3.0, 0.5),
                    (2.0 * PI, 1.0),
                    (4.0 * PI / 3.0, -0.5),
                    (-PI, -1.0),
                ],
            ),
            (
                "sinh(u1)",
                [
                    (0.0, 0.0),
                    (2f64.ln(), 0.75),
                    (-(2f64.ln()), -0.75),
                    (3f64.ln(), 4.0 / 3.0),
                    (half_ln3, 1.0 / 3f64.sqrt()),
                    (4f64.ln(), 15.0 / 8.0),
                    (5f64.ln(), 12.0 / 5.0),
                    ((1.0 + 2f64.sqrt()).ln(), 1.0),
                    (10f64.ln(), 99.0 / 20.0),
                    (0.5f64.ln(), -0.75),
                ],
            ),
            (
                "cosh(u1)",
                [
                    (0.0, 1.0),
                    (2f64.ln(), 1.25),
                    (-(2f64.ln()), 1.25),
                    (3f64.ln(), 5.0 / 3.0),
                    (half_ln3, 2.0 / 3f64.sqrt()),
                    (4f64.ln(), 17.0 / 8.0),
                    (5f64.ln(), 13.0 / 5.0),
                    ((1.0 + 2f64.sqrt()).ln(), 2f64.sqrt()),
                    (10f64.ln(), 101.0 / 20.0),
                    (0.5f64.ln(), 1.25),
                ],
            ),
            (
                "exp(u1)",
                [
                    (0.0, 1.0),
                    (1.0, E),
                    (-1.0, 1.0 / E),
                    (2f64.ln(), 2.0),
                    (10f64.ln(), 10.0),
                    (0.5f64.ln(), 0.5),
                    (2.0, E * E),
                    (0.5, E.sqrt()),
                    (3f64.ln() + 2f64.ln(), 6.0),
                    (-(4f64.ln()), 0.25),
                ],
            ),
        ];
        for (src, rows) in table {
            let e = parse_expression(src, 1).unwrap();
            for (x, want) in rows {
                let got = e.eval(&[x]);
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "{src} at {x}: {got} vs {want}"
                );
            }
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Expr::Num),
            Just(Expr::Const(Constant::Pi)),
            Just(Expr::Const(Constant::E)),
            (0usize..3).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                (0usize..5, inner).prop_map(|(f, a)| Expr::Call(Func::ALL[f], Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_roundtrip(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse_expression(&printed, 3).unwrap();
            prop_assert_eq!(back, e);
        }
    }

    #[test]
    fn builtin_style_roundtrip() {
        for src in [
            "sin(u1) * cos(u2)",
            "cosh(u1) * sin(u2)",
            "-u1^2 + 3",
            "pow(u1, 2) / (1 + exp(-u2))",
            "sinh(u1)",
        ] {
            let e = parse_expression(src, 2).unwrap();
            assert_eq!(parse_expression(&e.to_string(), 2).unwrap(), e);
        }
    }
}
