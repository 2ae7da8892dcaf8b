//! Inline drift expressions for configs.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | var | func '(' expr ')' | '(' expr ')'
//! var   := t | x | x(t) | y | y(t) | supy | sup|y|
//! func  := sin | cos | tanh | exp | abs | sqrt
//! ```
//!
//! Only the current time, the current message and state values, and the
//! running maximum of `|y|` are reachable, so every expression is causal.

use super::drift::{Constants, Drift};
use super::grid::TimeGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    T,
    X,
    Y,
    SupY,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tanh,
    Exp,
    Abs,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Clone, Copy)]
struct Env {
    t: f64,
    x: f64,
    y: f64,
    sup_y: f64,
}

impl Node {
    fn eval(&self, env: &Env) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(Var::T) => env.t,
            Node::Var(Var::X) => env.x,
            Node::Var(Var::Y) => env.y,
            Node::Var(Var::SupY) => env.sup_y,
            Node::Neg(a) => -a.eval(env),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(env), b.eval(env));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
            Node::Call(f, a) => {
                let a = a.eval(env);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tanh => a.tanh(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Sqrt => a.sqrt(),
                }
            }
        }
    }

    fn uses(&self, v: Var) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(w) => *w == v,
            Node::Neg(a) | Node::Call(_, a) => a.uses(v),
            Node::Bin(_, a, b) => a.uses(v) || b.uses(v),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl std::fmt::Display) -> Result<T> {
        Err(Error::Config(format!(
            "drift expression: {msg} at column {}",
            self.pos + 1
        )))
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(c @ (b'+' | b'-')) => {
                    self.pos += 1;
                    lhs = Node::Bin(c as char, Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(c @ (b'*' | b'/')) => {
                    self.pos += 1;
                    lhs = Node::Bin(c as char, Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.err(format!("unexpected '{}'", c as char)),
            None => self.err("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exp_sign =
                (c == b'+' || c == b'-') && self.pos > start && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        match text.parse::<f64>() {
            Ok(v) => Ok(Node::Num(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("bad number '{text}'"))
            }
        }
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "tanh" => Some(Func::Tanh),
            "exp" => Some(Func::Exp),
            "abs" => Some(Func::Abs),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        };
        if let Some(func) = func {
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        let var = match name {
            "t" => Var::T,
            "x" => Var::X,
            "y" => Var::Y,
            "supy" | "sup_y" => Var::SupY,
            "sup" => {
                self.expect(b'|')?;
                if !(self.eat(b'y') && self.eat(b'|')) {
                    return self.err("expected 'sup|y|'");
                }
                return Ok(Node::Var(Var::SupY));
            }
            _ => {
                self.pos = start;
                return self.err(format!("unknown name '{name}'"));
            }
        };
        // optional "(t)" after x or y
        if matches!(var, Var::X | Var::Y) {
            let save = self.pos;
            if self.eat(b'(') && !(self.eat(b't') && self.eat(b')')) {
                self.pos = save;
                return self.err("only (t) may follow x or y");
            }
        }
        Ok(Node::Var(var))
    }
}

/// Drift defined by an inline expression plus declared constants.
#[derive(Debug, Clone)]
pub struct ExprDrift {
    root: Node,
    source: String,
    constants: Constants,
    uses_sup: bool,
}

impl ExprDrift {
    pub fn parse(source: &str, constants: Constants) -> Result<Self> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
        };
        let root = p.expr()?;
        if p.peek().is_some() {
            return p.err("trailing input");
        }
        Ok(Self {
            uses_sup: root.uses(Var::SupY),
            root,
            source: source.trim().to_string(),
            constants,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl Drift for ExprDrift {
    fn eval(&self, i: usize, grid: &TimeGrid, x: &[f64], y: &[f64]) -> f64 {
        let sup_y = if self.uses_sup {
            y[..=i].iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        } else {
            0.0
        };
        self.root.eval(&Env {
            t: grid.time(i),
            x: x[i],
            y: y[i],
            sup_y,
        })
    }

    fn eval_path(&self, grid: &TimeGrid, x: &[f64], y: &[f64], out: &mut [f64]) {
        let mut sup_y = 0.0_f64;
        for (i, o) in out.iter_mut().enumerate() {
            sup_y = sup_y.max(y[i].abs());
            *o = self.root.eval(&Env {
                t: grid.time(i),
                x: x[i],
                y: y[i],
                sup_y,
            });
        }
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn describe(&self) -> String {
        self.source.clone()
    }

    fn reads_state(&self) -> bool {
        self.root.uses(Var::Y) || self.uses_sup
    }
}
