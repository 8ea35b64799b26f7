//! Closed arithmetic grammar for load and design fields in `x`, `y`, `t`.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('+' | '-') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'x' | 'y' | 't' | 'pi' | call | '(' expr ')'
//! ```
//!
//! Calls: `min(a, b, ...)`, `max(a, b, ...)`, `abs`, `sqrt`, `exp`, `sin`,
//! `cos`, `ramp(t0, t1)` (0 before `t0`, 1 after `t1`, linear between) and
//! `pwl(t0, v0, t1, v1, ...)` (piecewise linear in `t`, constant outside).

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at column {column} of `{source_text}`")]
pub struct ParseError {
    pub column: usize,
    pub message: String,
    pub source_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X,
    Y,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Min,
    Max,
    Abs,
    Sqrt,
    Exp,
    Sin,
    Cos,
    Ramp,
    Pwl,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "min" => Self::Min,
            "max" => Self::Max,
            "abs" => Self::Abs,
            "sqrt" => Self::Sqrt,
            "exp" => Self::Exp,
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "ramp" => Self::Ramp,
            "pwl" => Self::Pwl,
            _ => return None,
        })
    }

    fn arity_ok(self, n: usize) -> Result<(), &'static str> {
        match self {
            Self::Min | Self::Max if n >= 1 => Ok(()),
            Self::Min | Self::Max => Err("needs at least one argument"),
            Self::Abs | Self::Sqrt | Self::Exp | Self::Sin | Self::Cos if n == 1 => Ok(()),
            Self::Abs | Self::Sqrt | Self::Exp | Self::Sin | Self::Cos => Err("takes exactly one argument"),
            Self::Ramp if n == 2 => Ok(()),
            Self::Ramp => Err("takes (t0, t1)"),
            Self::Pwl if n >= 2 && n.is_multiple_of(2) => Ok(()),
            Self::Pwl => Err("takes pairs (t0, v0, t1, v1, ...)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Parsed expression, cheap to clone and evaluate.
#[derive(Clone, PartialEq)]
pub struct Expr {
    text: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.text)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut p = Parser { src: text, chars: text.char_indices().collect(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self { text: text.to_string(), root })
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        eval(&self.root, x, y, t)
    }

}

fn eval(n: &Node, x: f64, y: f64, t: f64) -> f64 {
    let e = |n: &Node| eval(n, x, y, t);
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::X) => x,
        Node::Var(Var::Y) => y,
        Node::Var(Var::T) => t,
        Node::Neg(a) => -e(a),
        Node::Add(a, b) => e(a) + e(b),
        Node::Sub(a, b) => e(a) - e(b),
        Node::Mul(a, b) => e(a) * e(b),
        Node::Div(a, b) => e(a) / e(b),
        Node::Pow(a, b) => e(a).powf(e(b)),
        Node::Call(f, args) => {
            let v: Vec<f64> = args.iter().map(e).collect();
            match f {
                Func::Min => v.iter().copied().fold(f64::INFINITY, f64::min),
                Func::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Func::Abs => v[0].abs(),
                Func::Sqrt => v[0].sqrt(),
                Func::Exp => v[0].exp(),
                Func::Sin => v[0].sin(),
                Func::Cos => v[0].cos(),
                Func::Ramp => ramp(t, v[0], v[1]),
                Func::Pwl => pwl(t, &v),
            }
        }
    }
}

fn ramp(t: f64, t0: f64, t1: f64) -> f64 {
    if t <= t0 {
        0.0
    } else if t >= t1 {
        1.0
    } else {
        (t - t0) / (t1 - t0)
    }
}

fn pwl(t: f64, knots: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = knots.chunks(2).map(|c| (c[0], c[1])).collect();
    if t <= pts[0].0 {
        return pts[0].1;
    }
    for w in pts.windows(2) {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        if t <= t1 {
            return if t1 > t0 { v0 + (v1 - v0) * (t - t0) / (t1 - t0) } else { v1 };
        }
    }
    pts[pts.len() - 1].1
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { column: self.pos + 1, message: message.into(), source_text: self.src.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.error(format!("unexpected character `{c}`"))),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let mut end = self.pos;
        let mut seen_exp = false;
        while end < self.chars.len() {
            let c = self.chars[end].1;
            let sign_after_exp = (c == '+' || c == '-') && end > start && matches!(self.chars[end - 1].1, 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || sign_after_exp {
                end += 1;
            } else if (c == 'e' || c == 'E') && !seen_exp {
                seen_exp = true;
                end += 1;
            } else {
                break;
            }
        }
        let byte = |i: usize| self.chars.get(i).map_or(self.src.len(), |c| c.0);
        let text = &self.src[byte(start)..byte(end)];
        let v: f64 = text.parse().map_err(|_| self.error(format!("malformed number `{text}`")))?;
        self.pos = end;
        Ok(Node::Num(v))
    }

    fn ident(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let mut end = self.pos;
        while end < self.chars.len() && (self.chars[end].1.is_ascii_alphanumeric() || self.chars[end].1 == '_') {
            end += 1;
        }
        let name: String = self.chars[start..end].iter().map(|c| c.1).collect();
        self.pos = end;
        match name.as_str() {
            "x" => return Ok(Node::Var(Var::X)),
            "y" => return Ok(Node::Var(Var::Y)),
            "t" => return Ok(Node::Var(Var::T)),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            _ => {}
        }
        let Some(func) = Func::lookup(&name) else {
            self.pos = start;
            return Err(self.error(format!("unknown name `{name}`")));
        };
        if !self.eat('(') {
            return Err(self.error(format!("expected `(` after `{name}`")));
        }
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        if !self.eat(')') {
            return Err(self.error("expected `,` or `)`"));
        }
        func.arity_ok(args.len()).map_err(|m| self.error(format!("`{name}` {m}")))?;
        Ok(Node::Call(func, args))
    }
}
