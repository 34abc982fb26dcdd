//! Arithmetic expression parser used for scenario input.
//!
//! Grammar, with `^` binding tighter than unary minus and right-associative:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use crate::expr::{Expr, Func};
use std::collections::HashMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Built-in functions callable from expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Unary(Func),
    Pow,
}

impl Builtin {
    fn lookup(name: &str) -> Option<Builtin> {
        Some(match name {
            "sqrt" => Builtin::Unary(Func::Sqrt),
            "sin" => Builtin::Unary(Func::Sin),
            "cos" => Builtin::Unary(Func::Cos),
            "tan" => Builtin::Unary(Func::Tan),
            "exp" => Builtin::Unary(Func::Exp),
            "ln" => Builtin::Unary(Func::Ln),
            "pow" => Builtin::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Unary(f) => f.name(),
            Builtin::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        match self {
            Builtin::Unary(_) => 1,
            Builtin::Pow => 2,
        }
    }
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Num(f64),
    Param(String),
    Coord(String),
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Call(Builtin, Vec<Ast>),
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function '{name}' at offset {offset} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    coords: &'a [String],
    params: &'a [String],
}

/// Parses `text` against the given coordinate and parameter names.
pub fn parse_expression(
    text: &str,
    coords: &[String],
    params: &[String],
) -> Result<Ast, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        coords,
        params,
    };
    let ast = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(ast)
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        if self.eat(b'-') {
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Ast::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Ast, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Ast, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
                return Err(self.syntax("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        text.parse::<f64>()
            .map(Ast::Num)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: "malformed number".into(),
            })
    }

    fn identifier(&mut self) -> Result<Ast, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii identifier")
            .to_string();
        if self.peek() == Some(b'(') {
            let builtin = Builtin::lookup(&name).ok_or(ParseError::UnknownIdentifier {
                name: name.clone(),
                offset: start,
            })?;
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.syntax("expected ')' or ','"));
            }
            if args.len() != builtin.arity() {
                return Err(ParseError::Arity {
                    name,
                    offset: start,
                    expected: builtin.arity(),
                    found: args.len(),
                });
            }
            return Ok(Ast::Call(builtin, args));
        }
        if self.coords.iter().any(|c| *c == name) {
            Ok(Ast::Coord(name))
        } else if self.params.iter().any(|c| *c == name) {
            Ok(Ast::Param(name))
        } else {
            Err(ParseError::UnknownIdentifier {
                name,
                offset: start,
            })
        }
    }
}

impl Ast {
    fn precedence(&self) -> u8 {
        match self {
            Ast::Bin(op, ..) => op.precedence(),
            Ast::Neg(_) => 3,
            _ => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }

    /// Lowers the tree to an expression graph over coordinate indices.
    pub fn to_expr(
        &self,
        coords: &[String],
        params: &HashMap<String, f64>,
    ) -> Result<Expr, String> {
        Ok(match self {
            Ast::Num(c) => Expr::constant(*c),
            Ast::Param(p) => Expr::constant(
                *params
                    .get(p)
                    .ok_or_else(|| format!("parameter '{p}' has no value"))?,
            ),
            Ast::Coord(c) => Expr::var(
                coords
                    .iter()
                    .position(|n| n == c)
                    .ok_or_else(|| format!("unknown coordinate '{c}'"))?,
            ),
            Ast::Neg(a) => a.to_expr(coords, params)?.neg(),
            Ast::Bin(op, a, b) => {
                let a = a.to_expr(coords, params)?;
                let b = b.to_expr(coords, params)?;
                match op {
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => a.mul(&b),
                    BinOp::Div => a.div(&b),
                    BinOp::Pow => a.pow(&b),
                }
            }
            Ast::Call(Builtin::Unary(func), args) => args[0].to_expr(coords, params)?.apply(*func),
            Ast::Call(Builtin::Pow, args) => {
                let a = args[0].to_expr(coords, params)?;
                a.pow(&args[1].to_expr(coords, params)?)
            }
        })
    }
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Num(c) => write!(f, "{c}"),
            Ast::Param(name) | Ast::Coord(name) => write!(f, "{name}"),
            Ast::Neg(a) => {
                write!(f, "-")?;
                a.write_child(f, 3)
            }
            Ast::Bin(BinOp::Pow, a, b) => {
                a.write_child(f, 5)?;
                write!(f, "^")?;
                b.write_child(f, 3)
            }
            Ast::Bin(op, a, b) => {
                let p = op.precedence();
                a.write_child(f, p)?;
                write!(f, " {} ", op.symbol())?;
                b.write_child(f, p + 1)
            }
            Ast::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn unbalanced_parenthesis_reports_offset() {
        let err = parse_expression("2*(x", &names(&["x"]), &[]).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 4, .. }), "{err}");
    }

    #[test]
    fn unknown_identifier_and_arity() {
        let err = parse_expression("y + 1", &names(&["x"]), &[]).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "y".into(),
                offset: 0
            }
        );
        let err = parse_expression("pow(x)", &names(&["x"]), &[]).unwrap_err();
        assert!(matches!(err, ParseError::Arity { expected: 2, found: 1, .. }));
        let err = parse_expression("foo(x)", &names(&["x"]), &[]).unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { .. }));
    }

    #[test]
    fn power_binds_tighter_than_negation() {
        let ast = parse_expression("-x^2", &names(&["x"]), &[]).unwrap();
        let e = ast.to_expr(&names(&["x"]), &HashMap::new()).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let ast = parse_expression("2^3^2", &[], &[]).unwrap();
        assert_eq!(ast.to_expr(&[], &HashMap::new()).unwrap().eval(&[]).unwrap(), 512.0);
        let ast = parse_expression("2^-1", &[], &[]).unwrap();
        assert_eq!(ast.to_expr(&[], &HashMap::new()).unwrap().eval(&[]).unwrap(), 0.5);
    }

    #[test]
    fn numbers_with_exponents() {
        let ast = parse_expression("1.5e2 + .5 + 2E-1", &[], &[]).unwrap();
        let v = ast.to_expr(&[], &HashMap::new()).unwrap().eval(&[]).unwrap();
        assert!((v - 150.7).abs() < 1e-12);
        assert!(parse_expression("1e", &[], &[]).is_err());
    }

    #[test]
    fn pretty_print_round_trips() {
        let coords = names(&["r", "theta"]);
        let params = names(&["M"]);
        for text in [
            "1/sqrt(1-2*M/r)",
            "a",
            "-(r - 1)^2 * sin(theta)/(r*r)",
            "pow(r, -1/3) - -r",
            "(r^2)^3 - r^2^3",
            "r - (theta - r) + (r + theta)",
            "r / (theta / r) * (r * theta)",
        ] {
            let Ok(ast) = parse_expression(text, &coords, &params) else {
                continue;
            };
            let printed = ast.to_string();
            let again = parse_expression(&printed, &coords, &params).unwrap();
            assert_eq!(ast, again, "{text} -> {printed}");
        }
    }
}
