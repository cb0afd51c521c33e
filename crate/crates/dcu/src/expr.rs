//! A small arithmetic expression language for endowments and SDE
//! coefficients.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers are the variables `x` and `t` or named constants supplied at
//! parse time. Functions: `abs`, `exp`, `ln`, `sqrt`, `max`, `min`.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("column {column}: {message}")]
pub struct ExprError {
    /// 1-based character column within the expression.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Abs,
    Exp,
    Ln,
    Sqrt,
    Max,
    Min,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "abs" => (Func::Abs, 1),
            "exp" => (Func::Exp, 1),
            "ln" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "max" => (Func::Max, 2),
            "min" => (Func::Min, 2),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    T,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X => x,
            Node::T => t,
            Node::Neg(a) => -a.eval(x, t),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, t), b.eval(x, t));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
            Node::Call(f, args) => {
                let a = args[0].eval(x, t);
                match f {
                    Func::Abs => a.abs(),
                    Func::Exp => a.exp(),
                    Func::Ln => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Max => a.max(args[1].eval(x, t)),
                    Func::Min => a.min(args[1].eval(x, t)),
                }
            }
        }
    }

    fn uses_x(&self) -> bool {
        match self {
            Node::X => true,
            Node::Num(_) | Node::T => false,
            Node::Neg(a) => a.uses_x(),
            Node::Bin(_, a, b) => a.uses_x() || b.uses_x(),
            Node::Call(_, args) => args.iter().any(Node::uses_x),
        }
    }
}

/// A parsed expression in the variables `x` and `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(source: &str, constants: &BTreeMap<String, f64>) -> Result<Self, ExprError> {
        let mut p = Parser {
            chars: source.chars().collect(),
            pos: 0,
            constants,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error(format!("unexpected `{}`", p.chars[p.pos])));
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.root.eval(x, t)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the value does not depend on `x`.
    pub fn is_state_free(&self) -> bool {
        !self.root.uses_x()
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    constants: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn error(&self, message: String) -> ExprError {
        ExprError {
            column: self.pos + 1,
            message,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression".into())),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`".into()));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.ident(),
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let n = self.chars.len();
        while self.pos < n && (self.chars[self.pos].is_ascii_digit() || self.chars[self.pos] == '.') {
            self.pos += 1;
        }
        if self.pos < n && matches!(self.chars[self.pos], 'e' | 'E') {
            let mut look = self.pos + 1;
            if look < n && matches!(self.chars[look], '+' | '-') {
                look += 1;
            }
            if look < n && self.chars[look].is_ascii_digit() {
                self.pos = look;
                while self.pos < n && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map(Node::Num).map_err(|_| ExprError {
            column: start + 1,
            message: format!("bad number `{text}`"),
        })
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_alphanumeric() || self.chars[self.pos] == '_')
        {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        let at = |message: String| ExprError { column: start + 1, message };
        if self.peek() == Some('(') {
            let (func, arity) = Func::lookup(&name).ok_or_else(|| at(format!("unknown function `{name}`")))?;
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(',') {
                args.push(self.expr()?);
            }
            if !self.eat(')') {
                return Err(self.error("expected `)`".into()));
            }
            if args.len() != arity {
                return Err(at(format!("`{name}` takes {arity} argument(s), got {}", args.len())));
            }
            return Ok(Node::Call(func, args));
        }
        match name.as_str() {
            "x" => Ok(Node::X),
            "t" => Ok(Node::T),
            _ => self
                .constants
                .get(&name)
                .map(|&v| Node::Num(v))
                .ok_or_else(|| at(format!("unknown identifier `{name}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        let mut c = BTreeMap::new();
        c.insert("K".to_string(), 1.5);
        Expr::parse(s, &c).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("1 + 2 * 3").eval(0.0, 0.0), 7.0);
        assert_eq!(p("2 ^ 3 ^ 2").eval(0.0, 0.0), 512.0);
        assert_eq!(p("-2 ^ 2").eval(0.0, 0.0), -4.0);
        assert_eq!(p("8 / 4 / 2").eval(0.0, 0.0), 1.0);
        assert_eq!(p("1.5e1 - x").eval(5.0, 0.0), 10.0);
    }

    #[test]
    fn functions_and_constants() {
        assert_eq!(p("max(x - K, 0)").eval(2.0, 0.0), 0.5);
        assert_eq!(p("min(abs(x), 1)").eval(-3.0, 0.0), 1.0);
        assert!((p("ln(exp(t))").eval(0.0, 0.25) - 0.25).abs() < 1e-15);
        assert!(p("0.1 * t").is_state_free());
        assert!(!p("abs(x)").is_state_free());
    }

    #[test]
    fn errors_carry_columns() {
        let e = Expr::parse("x + foo", &BTreeMap::new()).unwrap_err();
        assert_eq!(e.column, 5);
        assert!(e.message.contains("foo"));
        assert!(Expr::parse("max(x)", &BTreeMap::new()).is_err());
        assert!(Expr::parse("(x", &BTreeMap::new()).is_err());
        assert!(Expr::parse("x x", &BTreeMap::new()).is_err());
    }
}
