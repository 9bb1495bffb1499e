//! Arithmetic expressions over `x`, `y`, `a` for inline initial data.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := ("+" | "-") unary | atom
//! atom   := number | "x" | "y" | "a" | "pi" | func "(" expr ")" | "(" expr ")"
//! func   := "sin" | "cos" | "exp"
//! ```
//! `π`, `×`, `÷` and `−` are accepted as aliases.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    A,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
}

/// A parsed expression; keeps its source text for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Open,
    Close,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '0'..='9' | '.' => {
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                // exponent
                if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].1.is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].1.is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let end = chars.get(i).map_or(src.len(), |c| c.0);
                let text = &src[pos..end];
                let v = text.parse::<f64>().map_err(|_| Error::Expression {
                    pos,
                    msg: format!("bad number `{text}`"),
                })?;
                out.push((pos, Tok::Num(v)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                    s.push(chars[i].1);
                    i += 1;
                }
                out.push((pos, Tok::Ident(s)));
            }
            '+' | '-' | '*' | '/' => {
                out.push((pos, Tok::Op(c)));
                i += 1;
            }
            '−' => {
                out.push((pos, Tok::Op('-')));
                i += 1;
            }
            '×' => {
                out.push((pos, Tok::Op('*')));
                i += 1;
            }
            '÷' => {
                out.push((pos, Tok::Op('/')));
                i += 1;
            }
            '(' => {
                out.push((pos, Tok::Open));
                i += 1;
            }
            ')' => {
                out.push((pos, Tok::Close));
                i += 1;
            }
            other => {
                return Err(Error::Expression {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Expression {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.i += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.i += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.i += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.i += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn close(&mut self) -> Result<()> {
        if self.peek() == Some(&Tok::Close) {
            self.i += 1;
            Ok(())
        } else {
            self.err("expected `)`")
        }
    }

    fn atom(&mut self) -> Result<Node> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        self.i += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Open => {
                let e = self.expr()?;
                self.close()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "x" => return Ok(Node::Var(Var::X)),
                    "y" => return Ok(Node::Var(Var::Y)),
                    "a" => return Ok(Node::Var(Var::A)),
                    "pi" | "π" => return Ok(Node::Num(PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    _ => {
                        self.i -= 1;
                        return self.err(format!("unknown identifier `{name}`"));
                    }
                };
                if self.peek() != Some(&Tok::Open) {
                    return self.err(format!("expected `(` after `{name}`"));
                }
                self.i += 1;
                let arg = self.expr()?;
                self.close()?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Tok::Op(c) => {
                self.i -= 1;
                self.err(format!("unexpected operator `{c}`"))
            }
            Tok::Close => {
                self.i -= 1;
                self.err("unexpected `)`")
            }
        }
    }
}

fn eval(n: &Node, v: [f64; 3]) -> f64 {
    match n {
        Node::Num(c) => *c,
        Node::Var(Var::X) => v[0],
        Node::Var(Var::Y) => v[1],
        Node::Var(Var::A) => v[2],
        Node::Neg(e) => -eval(e, v),
        Node::Call(f, e) => {
            let z = eval(e, v);
            match f {
                Func::Sin => z.sin(),
                Func::Cos => z.cos(),
                Func::Exp => z.exp(),
            }
        }
        Node::Bin(op, l, r) => {
            let (l, r) = (eval(l, v), eval(r, v));
            match op {
                '+' => l + r,
                '-' => l - r,
                '*' => l * r,
                _ => l / r,
            }
        }
    }
}

fn uses(n: &Node, var: Var) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(v) => *v == var,
        Node::Neg(e) | Node::Call(_, e) => uses(e, var),
        Node::Bin(_, l, r) => uses(l, var) || uses(r, var),
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let toks = lex(src)?;
        let mut p = Parser {
            toks,
            i: 0,
            end: src.len(),
        };
        let root = p.expr()?;
        if p.i != p.toks.len() {
            return p.err("trailing input");
        }
        Ok(Self {
            source: src.to_string(),
            root,
        })
    }

    pub fn eval(&self, x: f64, y: f64, a: f64) -> f64 {
        eval(&self.root, [x, y, a])
    }

    pub fn uses(&self, var: Var) -> bool {
        uses(&self.root, var)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_functions() {
        let e = Expr::parse("2*y - sin(2*pi*x - y)").unwrap();
        let (x, y) = (0.3, 0.7);
        assert_eq!(e.eval(x, y, 0.0), 2.0 * y - (2.0 * PI * x - y).sin());
        assert_eq!(Expr::parse("1 + 2 * 3").unwrap().eval(0.0, 0.0, 0.0), 7.0);
        assert_eq!(Expr::parse("-2 - -3").unwrap().eval(0.0, 0.0, 0.0), 1.0);
        assert_eq!(Expr::parse("8 / 4 / 2").unwrap().eval(0.0, 0.0, 0.0), 1.0);
        assert_eq!(Expr::parse("1.5e-1*(a+1)").unwrap().eval(0.0, 0.0, 1.0), 0.3);
        assert!((Expr::parse("exp(1)").unwrap().eval(0.0, 0.0, 0.0) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn unicode_aliases() {
        let e = Expr::parse("2×π÷4 − a").unwrap();
        assert!((e.eval(0.0, 0.0, 1.0) - (PI / 2.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn variable_usage() {
        let e = Expr::parse("2*y + 3").unwrap();
        assert!(!e.uses(Var::X) && e.uses(Var::Y) && !e.uses(Var::A));
    }

    #[test]
    fn errors_report_position() {
        for (src, pos) in [("2*z", 2), ("sin x", 4), ("(1+2", 4), ("1 2", 2), ("1 $", 2), ("", 0)] {
            match Expr::parse(src) {
                Err(Error::Expression { pos: p, .. }) => assert_eq!(p, pos, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn literals_and_arithmetic_round_trip(
            p in -1e6f64..1e6, q in 0.1f64..1e3, x in 0.0f64..1.0, y in 0.0f64..1.0,
        ) {
            let src = format!("{p:e} * x - {q} / (y + 1) + cos(x)*sin(y)");
            let e = Expr::parse(&src).unwrap();
            let want = p * x - q / (y + 1.0) + x.cos() * y.sin();
            proptest::prop_assert_eq!(e.eval(x, y, 0.0), want);
        }
    }
}
