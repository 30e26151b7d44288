//! Arithmetic expressions over named parameters.
//!
//! Grammar (standard precedence, left-associative binary operators):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | ident | '-' factor | func '(' args ')' | '(' expr ')'
//! func   := min | max | abs
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Min,
    Max,
    Abs,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        match s {
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("unexpected character '{ch}' at offset {pos}")]
    Lexical { pos: usize, ch: char },
    #[error("malformed number '{text}' at offset {pos}")]
    BadNumber { pos: usize, text: String },
    #[error("unbalanced parenthesis at offset {pos}")]
    Unbalanced { pos: usize },
    #[error("unknown function '{name}' at offset {pos}")]
    UnknownFunction { pos: usize, name: String },
    #[error("{func} expects {expected} argument(s), got {got}")]
    Arity {
        func: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected token '{token}' at offset {pos}")]
    UnexpectedToken { pos: usize, token: String },
    #[error("trailing input '{rest}' at offset {pos}")]
    Trailing { pos: usize, rest: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Plus => f.write_str("+"),
            Tok::Minus => f.write_str("-"),
            Tok::Star => f.write_str("*"),
            Tok::Slash => f.write_str("/"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::Comma => f.write_str(","),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((start, Tok::Plus)),
            b'-' => out.push((start, Tok::Minus)),
            b'*' => out.push((start, Tok::Star)),
            b'/' => out.push((start, Tok::Slash)),
            b'(' => out.push((start, Tok::LParen)),
            b')' => out.push((start, Tok::RParen)),
            b',' => out.push((start, Tok::Comma)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError::BadNumber {
                    pos: start,
                    text: text.to_string(),
                })?;
                out.push((start, Tok::Num(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Lexical { pos: start, ch });
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.src.len())
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.next() {
            None => Err(ParseError::UnexpectedEnd),
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Minus) => Ok(Expr::Neg(Box::new(self.factor()?))),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(ParseError::Unbalanced { pos: at }),
                }
            }
            Some(Tok::Ident(name)) => {
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(Expr::Var(name));
                }
                let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction { pos: at, name })?;
                let open = self.offset();
                self.pos += 1;
                let mut args = vec![self.expr()?];
                loop {
                    match self.next() {
                        Some(Tok::Comma) => args.push(self.expr()?),
                        Some(Tok::RParen) => break,
                        _ => return Err(ParseError::Unbalanced { pos: open }),
                    }
                }
                let ok = match func {
                    Func::Abs => args.len() == 1,
                    Func::Min | Func::Max => args.len() >= 2,
                };
                if !ok {
                    return Err(ParseError::Arity {
                        func: func.name(),
                        expected: if func == Func::Abs { "1" } else { "2 or more" },
                        got: args.len(),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            Some(Tok::RParen) => Err(ParseError::Unbalanced { pos: at }),
            Some(t) => Err(ParseError::UnexpectedToken {
                pos: at,
                token: t.to_string(),
            }),
        }
    }
}

/// Parses an expression; the whole input must be consumed.
pub fn parse_expression(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { src, toks, pos: 0 };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        let at = p.offset();
        if p.peek() == Some(&Tok::RParen) {
            return Err(ParseError::Unbalanced { pos: at });
        }
        return Err(ParseError::Trailing {
            pos: at,
            rest: src[at..].to_string(),
        });
    }
    Ok(e)
}

impl Expr {
    /// Evaluates with `lookup` resolving parameter references.
    pub fn eval<F>(&self, lookup: &F) -> Result<f64, EvalError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::UnknownParameter(name.clone()))?,
            Expr::Neg(e) => -e.eval(lookup)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(lookup)?;
                let b = r.eval(lookup)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                }
            }
            Expr::Call(func, args) => {
                let vals = args.iter().map(|a| a.eval(lookup)).collect::<Result<Vec<_>, _>>()?;
                match func {
                    Func::Abs => vals[0].abs(),
                    Func::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
                    Func::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Names of all referenced parameters, sorted.
    pub fn references(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                out.insert(n);
            }
            Expr::Neg(e) => e.collect_refs(out),
            Expr::Binary(_, l, r) => {
                l.collect_refs(out);
                r.collect_refs(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_refs(out)),
        }
    }

    /// `Some(name)` when the expression is a bare parameter reference.
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Expr::Var(n) => Some(n),
            _ => None,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(n) => f.write_str(n),
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.write_prec(f, 3)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let paren = p < min_prec;
                if paren {
                    f.write_str("(")?;
                }
                l.write_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                // right operand at equal precedence needs parens to stay left-associative
                r.write_prec(f, p + 1)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.write_prec(f, 0)?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_with(src: &str, vars: &[(&str, f64)]) -> Result<f64, EvalError> {
        let e = parse_expression(src).unwrap();
        e.eval(&|n: &str| vars.iter().find(|(k, _)| *k == n).map(|(_, v)| *v))
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(eval_with("2*w + h", &[("w", 3.0), ("h", 4.0)]), Ok(10.0));
        assert_eq!(eval_with("-(a)", &[("a", 5.0)]), Ok(-5.0));
        assert_eq!(eval_with("min(w, 2*d) - 1", &[("w", 10.0), ("d", 3.0)]), Ok(5.0));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval_with("2 + 3 * 4", &[]), Ok(14.0));
        assert_eq!(eval_with("10 - 4 - 3", &[]), Ok(3.0));
        assert_eq!(eval_with("64 / 4 / 2", &[]), Ok(8.0));
        assert_eq!(eval_with("--2", &[]), Ok(2.0));
        assert_eq!(eval_with("abs(-3) + max(1, 2, 7)", &[]), Ok(10.0));
        assert_eq!(eval_with("1.5e1 + .5", &[]), Ok(15.5));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_expression("2 $ 3"),
            Err(ParseError::Lexical { ch: '$', .. })
        ));
        assert!(matches!(parse_expression("(1 + 2"), Err(ParseError::Unbalanced { .. })));
        assert!(matches!(parse_expression("1 + 2)"), Err(ParseError::Unbalanced { .. })));
        assert!(matches!(
            parse_expression("sqrt(4)"),
            Err(ParseError::UnknownFunction { .. })
        ));
        assert!(matches!(parse_expression("1 2"), Err(ParseError::Trailing { .. })));
        assert!(matches!(parse_expression("1 +"), Err(ParseError::UnexpectedEnd)));
        assert!(matches!(parse_expression("abs(1, 2)"), Err(ParseError::Arity { .. })));
    }

    #[test]
    fn division_by_zero() {
        assert_eq!(eval_with("1 / (a - a)", &[("a", 2.0)]), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn pretty_print_reparses_identically() {
        for src in [
            "2*w + h",
            "-(a)",
            "min(w, 2*d) - 1",
            "a - (b - c)",
            "a / (b * c)",
            "(a + b) * -(c - 1)",
            "0.5*w + 10",
            "d - 9",
            "max(abs(-x), 1e-3, 3)",
        ] {
            let e = parse_expression(src).unwrap();
            let printed = e.to_string();
            assert_eq!(parse_expression(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn references_are_collected() {
        let e = parse_expression("min(w, 2*d) - w").unwrap();
        assert_eq!(e.references().into_iter().collect::<Vec<_>>(), ["d", "w"]);
        assert_eq!(parse_expression("d").unwrap().as_var(), Some("d"));
    }
}
